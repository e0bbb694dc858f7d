//! Modulation frames `u = W_α + v` with `⟨v, Λ*g_α⟩ = 0`, the unstable
//! coordinate `δ = ⟨v, g_α⟩`, hyperbolic coordinates and the distance to the
//! soliton curve.

use crate::error::{Error, Result};
use crate::grid::{dirichlet_energy, inner, Exterior, RadialField, WaveState};
use crate::ground_state::{adjoint_lambda, dlambda_w_at, w_at, GroundState};
use crate::spectrum::SpectralData;

/// Which family of dilates plays the role of `W_α`.
#[derive(Debug, Clone)]
pub enum SolitonProfile {
    /// `√α W(αr)` from the closed form.
    Analytic,
    /// Grid-consistent dilates of the discrete ground state; `α = 1` is the
    /// exact equilibrium of the solver.
    Discrete(GroundState),
}

impl SolitonProfile {
    pub fn at(&self, alpha: f64, like: &RadialField) -> RadialField {
        match self {
            SolitonProfile::Analytic => RadialField::from_fn(*like.grid(), |r| w_at(alpha, r)),
            SolitonProfile::Discrete(gs) => gs.profile(alpha),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModulationFrame {
    pub alpha: f64,
    /// `u − W_α`.
    pub v: RadialField,
    /// `⟨v, g_α⟩`.
    pub delta: f64,
    /// `⟨v, Λ*g_α⟩` at the solved `α`.
    pub ortho_residual: f64,
    /// `|⟨∂_λW_λ|_{λ=α}, Λ*g_α⟩|`.
    pub nondegeneracy: f64,
    /// Sign changes of the orthogonality function seen on the bracket.
    pub sign_changes: usize,
    /// Unit unstable mode at scale `α`.
    pub g_alpha: RadialField,
}

/// `n₊`, `n₋` with `n_± = √(k/2)(δ ± δ̇/k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolicCoords {
    pub n_plus: f64,
    pub n_minus: f64,
}

pub fn hyperbolic_coords(delta: f64, delta_dot: f64, k: f64) -> HyperbolicCoords {
    let s = (k / 2.0).sqrt();
    HyperbolicCoords {
        n_plus: s * (delta + delta_dot / k),
        n_minus: s * (delta - delta_dot / k),
    }
}

/// Centered differences of a uniformly sampled series (one-sided, second
/// order, at the ends).
pub fn centered_derivative(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) / (2.0 * dt);
    }
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt);
    out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dt);
    out
}

pub fn unstable_coordinate(frame: &ModulationFrame) -> f64 {
    frame.delta
}

/// Shared data for repeated decompositions on one grid.
#[derive(Debug, Clone)]
pub struct Modulator {
    profile: SolitonProfile,
    k0: f64,
    g0: RadialField,
    adj_g0: RadialField,
    reference_nondegeneracy: f64,
}

/// Relative width of the root bracket around the guess.
const BRACKET: f64 = 1.5;
const SCAN_POINTS: usize = 16;

impl Modulator {
    pub fn new(sd: &SpectralData, profile: SolitonProfile) -> Self {
        let adj_g0 = adjoint_lambda(&sd.g0);
        let mut m = Self {
            profile,
            k0: sd.k0,
            g0: sd.g0.clone(),
            adj_g0,
            reference_nondegeneracy: 0.0,
        };
        m.reference_nondegeneracy = m.nondegeneracy(1.0);
        m
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn profile(&self) -> &SolitonProfile {
        &self.profile
    }

    /// `(g_α, Λ*g_α)` with `g_α` of unit norm.
    pub fn mode_pair(&self, alpha: f64) -> (RadialField, RadialField) {
        if alpha == 1.0 {
            return (self.g0.clone(), self.adj_g0.clone());
        }
        let g = self.g0.dilate(alpha, 1.5, Exterior::Zero);
        let adj = self.adj_g0.dilate(alpha, 1.5, Exterior::Zero);
        let norm = inner(&g, &g).map(f64::sqrt).unwrap_or(1.0);
        (g.scale(1.0 / norm), adj.scale(1.0 / norm))
    }

    fn nondegeneracy(&self, alpha: f64) -> f64 {
        let (_, adj) = self.mode_pair(alpha);
        let dw = RadialField::from_fn(*adj.grid(), |r| dlambda_w_at(alpha, r));
        inner(&dw, &adj).map(f64::abs).unwrap_or(0.0)
    }

    /// `F(α) = ⟨u − W_α, Λ*g_α⟩`.
    pub fn ortho_function(&self, u: &RadialField, alpha: f64) -> Result<f64> {
        let (_, adj) = self.mode_pair(alpha);
        let w = self.profile.at(alpha, u);
        inner(&u.sub(&w)?, &adj)
    }

    pub fn decompose(&self, u: &RadialField, alpha_guess: f64) -> Result<ModulationFrame> {
        u.same_grid(&self.g0)?;
        if !(alpha_guess.is_finite() && alpha_guess > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha_guess = {alpha_guess} must be positive"
            )));
        }
        let outside = |reason: String| Error::OutsideModulationRegime { alpha_guess, reason };
        let f = |a: f64| self.ortho_function(u, a);
        let f_guess = f(alpha_guess)?;
        // sign structure on a multiplicative scan of the bracket
        let lo = alpha_guess / BRACKET;
        let ratio = (BRACKET * BRACKET).powf(1.0 / SCAN_POINTS as f64);
        let mut nodes = Vec::with_capacity(SCAN_POINTS + 1);
        for j in 0..=SCAN_POINTS {
            let a = lo * ratio.powi(j as i32);
            nodes.push((a, f(a)?));
        }
        let mut brackets = Vec::new();
        for pair in nodes.windows(2) {
            let ((a, fa), (b, fb)) = (pair[0], pair[1]);
            if fa == 0.0 || fa.signum() != fb.signum() {
                brackets.push((a, fa, b, fb));
            }
        }
        if f_guess == 0.0 {
            return self.frame(u, alpha_guess, brackets.len().max(1));
        }
        let sign_changes = brackets.len();
        let (mut a, mut fa, mut b, mut fb) = *brackets
            .iter()
            .min_by(|x, y| {
                let dx = ((x.0 * x.2).sqrt() / alpha_guess).ln().abs();
                let dy = ((y.0 * y.2).sqrt() / alpha_guess).ln().abs();
                dx.total_cmp(&dy)
            })
            .ok_or_else(|| outside("orthogonality function has no root in the bracket".into()))?;
        if fa == 0.0 {
            return self.frame(u, a, sign_changes);
        }
        // safeguarded secant/Newton with bisection fallback
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let fx = f(x)?;
            if fx.abs() <= 1e-12 || (b - a) <= 1e-15 * x {
                return self.frame(u, x, sign_changes);
            }
            if fx.signum() == fa.signum() {
                a = x;
                fa = fx;
            } else {
                b = x;
                fb = fx;
            }
            let h = 1e-7 * x;
            let slope = (f(x + h)? - f(x - h)?) / (2.0 * h);
            let newton = x - fx / slope;
            x = if slope.is_finite() && slope != 0.0 && newton > a && newton < b {
                newton
            } else {
                // regula falsi point, else midpoint
                let rf = (a * fb - b * fa) / (fb - fa);
                if rf > a && rf < b {
                    0.5 * (rf + 0.5 * (a + b))
                } else {
                    0.5 * (a + b)
                }
            };
        }
        Err(Error::NoConvergence {
            what: "modulation root",
            iterations: 200,
        })
    }

    fn frame(&self, u: &RadialField, alpha: f64, sign_changes: usize) -> Result<ModulationFrame> {
        let (g_alpha, adj) = self.mode_pair(alpha);
        let w = self.profile.at(alpha, u);
        let v = u.sub(&w)?;
        let delta = inner(&v, &g_alpha)?;
        let ortho_residual = inner(&v, &adj)?;
        let dw = RadialField::from_fn(*u.grid(), |r| dlambda_w_at(alpha, r));
        let nondegeneracy = inner(&dw, &adj)?.abs();
        if nondegeneracy < 0.1 * self.reference_nondegeneracy {
            return Err(Error::OutsideModulationRegime {
                alpha_guess: alpha,
                reason: format!("degenerate pairing {nondegeneracy:e}"),
            });
        }
        Ok(ModulationFrame {
            alpha,
            v,
            delta,
            ortho_residual,
            nondegeneracy,
            sign_changes,
            g_alpha,
        })
    }

    /// `‖(u − W_λ, u_t)‖_{Ḣ¹×L²}`.
    pub fn distance_at(&self, s: &WaveState, lambda: f64, sign: f64) -> Result<f64> {
        let w = self.profile.at(lambda, &s.u).scale(sign);
        let d = s.u.sub(&w)?;
        Ok((dirichlet_energy(&d) + inner(&s.ut, &s.ut)?).max(0.0).sqrt())
    }

    /// Distance to `S ∪ −S`: 64 multiplicative seeds on `[c/4, 4c]` around
    /// `center`, refined by golden-section search around the best seed.
    pub fn dist_to_soliton_curve(&self, s: &WaveState, center: f64) -> Result<f64> {
        const SEEDS: usize = 64;
        let lo = (center / 4.0).ln();
        let hi = (4.0 * center).ln();
        let step = (hi - lo) / (SEEDS - 1) as f64;
        let mut best = f64::INFINITY;
        for sign in [1.0, -1.0] {
            let eval = |x: f64| self.distance_at(s, x.exp(), sign);
            let mut best_j = 0;
            let mut best_v = f64::INFINITY;
            for j in 0..SEEDS {
                let v = eval(lo + step * j as f64)?;
                if v < best_v {
                    best_v = v;
                    best_j = j;
                }
            }
            let mut a = lo + step * best_j.saturating_sub(1) as f64;
            let mut b = lo + step * (best_j + 1).min(SEEDS - 1) as f64;
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = b - phi * (b - a);
            let mut d = a + phi * (b - a);
            let (mut fc, mut fd) = (eval(c)?, eval(d)?);
            while (b - a) > 1e-10 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - phi * (b - a);
                    fc = eval(c)?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + phi * (b - a);
                    fd = eval(d)?;
                }
            }
            best = best.min(best_v).min(fc).min(fd);
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::spectrum::{compute_ground_spectrum, project_off_mode, Method};

    fn setup(profile_discrete: bool) -> (RadialGrid, SpectralData, Modulator) {
        let grid = RadialGrid::with_extent(60.0, 0.02).unwrap();
        let sd = compute_ground_spectrum(grid, Method::Matrix).unwrap();
        let profile = if profile_discrete {
            SolitonProfile::Discrete(GroundState::new(grid).unwrap())
        } else {
            SolitonProfile::Analytic
        };
        let m = Modulator::new(&sd, profile);
        (grid, sd, m)
    }

    #[test]
    fn exact_soliton_has_trivial_frame() {
        let (grid, _, m) = setup(true);
        let SolitonProfile::Discrete(gs) = m.profile() else {
            unreachable!()
        };
        let frame = m.decompose(gs.field(), 1.0).unwrap();
        assert_eq!(frame.alpha, 1.0);
        assert!(frame.v.sup() == 0.0);
        assert_eq!(frame.delta, 0.0);
        let _ = grid;
    }

    #[test]
    fn shifted_soliton_recovers_scale() {
        let (grid, _, m) = setup(false);
        for target in [0.8, 1.1, 1.3] {
            let u = RadialField::from_fn(grid, |r| w_at(target, r));
            let frame = m.decompose(&u, 1.0).unwrap();
            assert!((frame.alpha - target).abs() < 1e-10, "{} vs {target}", frame.alpha);
            assert!(frame.v.sup() < 1e-10);
            assert_eq!(frame.sign_changes, 1);
        }
    }

    #[test]
    fn mode_perturbation_gives_delta() {
        let (_, sd, m) = setup(true);
        let SolitonProfile::Discrete(gs) = m.profile() else {
            unreachable!()
        };
        for eps in [1e-3, -1e-3, 1e-4] {
            let u = gs.field().axpy(eps, &sd.g0).unwrap();
            let frame = m.decompose(&u, 1.0).unwrap();
            // frozen-α oracle: δ at α = 1 is exactly ε
            let frozen = inner(&u.sub(gs.field()).unwrap(), &sd.g0).unwrap();
            assert!((frozen - eps).abs() < 1e-14);
            assert!(
                (frame.delta / eps - 1.0).abs() < 20.0 * eps.abs(),
                "{}",
                frame.delta / eps
            );
            assert!((frame.alpha - 1.0).abs() < 20.0 * eps.abs());
            let scale = inner(&frame.v, &frame.v).unwrap().sqrt() + 1.0;
            assert!(frame.ortho_residual.abs() <= 1e-9 * scale);
            let back = m.profile().at(frame.alpha, &u).add(&frame.v).unwrap();
            assert!(back.sub(&u).unwrap().sup() < 1e-14);
        }
    }

    #[test]
    fn unstable_coordinate_examples() {
        let (grid, sd, m) = setup(false);
        let w = RadialField::from_fn(grid, |r| w_at(1.0, r));
        let c = 2e-3;
        let frame = m.decompose(&w.axpy(c, &sd.g0).unwrap(), 1.0).unwrap();
        assert!((unstable_coordinate(&frame) / c - 1.0).abs() < 0.05);
        let (g, _) = m.mode_pair(1.2);
        let off = project_off_mode(&g.scale(c), &g).unwrap();
        assert!(inner(&off, &g).unwrap().abs() < 1e-15);
    }

    #[test]
    fn gauge_covariance() {
        let (grid, sd, m) = setup(false);
        let u = RadialField::from_fn(grid, |r| w_at(1.0, r)).axpy(1e-3, &sd.g0).unwrap();
        let base = m.decompose(&u, 1.0).unwrap();
        for mu in [0.9, 1.2] {
            let u_mu = u.dilate(mu, 0.5, Exterior::Harmonic);
            let frame = m.decompose(&u_mu, mu).unwrap();
            assert!((frame.alpha / (mu * base.alpha) - 1.0).abs() < 1e-5, "{}", frame.alpha);
            // with L²-normalized modes, δ·α is the scale-invariant combination
            let ratio = frame.delta * frame.alpha / (base.delta * base.alpha);
            assert!((ratio - 1.0).abs() < 1e-3, "{ratio}");
        }
    }

    #[test]
    fn no_root_is_reported() {
        let (grid, _, m) = setup(false);
        let u = RadialField::zeros(grid);
        let err = m.decompose(&u, 1.0);
        assert!(matches!(err, Err(Error::OutsideModulationRegime { .. })), "{err:?}");
    }

    #[test]
    fn hyperbolic_examples() {
        let k = 1.1_f64;
        for t in [0.0, 1.0, 3.0] {
            let e = (k * t).exp();
            let grow = hyperbolic_coords(e, k * e, k);
            assert!(grow.n_minus.abs() <= 1e-10 * grow.n_plus.abs());
            assert!((grow.n_plus - (2.0 * k).sqrt() * e).abs() < 1e-12 * e);
            let decay = hyperbolic_coords(1.0 / e, -k / e, k);
            assert!(decay.n_plus.abs() <= 1e-10 * decay.n_minus.abs());
        }
    }

    #[test]
    fn centered_derivative_of_exponential() {
        let dt = 0.01;
        let v: Vec<f64> = (0..200).map(|i| (0.5 * i as f64 * dt).exp()).collect();
        let d = centered_derivative(&v, dt);
        for (i, di) in d.iter().enumerate() {
            assert!((di / (0.5 * v[i]) - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn distance_examples() {
        let (grid, sd, m) = setup(false);
        let zero = RadialField::zeros(grid);
        for lambda in [0.5, 1.0, 2.0] {
            let s = WaveState::new(RadialField::from_fn(grid, |r| w_at(lambda, r)), zero.clone(), 0.0).unwrap();
            assert!(m.dist_to_soliton_curve(&s, 1.0).unwrap() < 1e-6);
        }
        let minus = WaveState::new(RadialField::from_fn(grid, |r| -w_at(1.0, r)), zero.clone(), 0.0).unwrap();
        assert!(m.dist_to_soliton_curve(&minus, 1.0).unwrap() < 1e-6);

        let eps = 1e-3;
        let u = RadialField::from_fn(grid, |r| w_at(1.0, r)).axpy(eps, &sd.g0).unwrap();
        let s = WaveState::new(u, zero, 0.0).unwrap();
        let frozen = m.distance_at(&s, 1.0, 1.0).unwrap();
        let expected = eps * dirichlet_energy(&sd.g0).sqrt();
        assert!((frozen / expected - 1.0).abs() < 1e-10);
        let d = m.dist_to_soliton_curve(&s, 1.0).unwrap();
        assert!(d <= frozen * (1.0 + 1e-12));
        // minimizing over λ removes the Ḣ¹ component of g0 along ∂_λW = ΛW
        let h1 = |a: &RadialField, b: &RadialField| {
            (dirichlet_energy(&a.add(b).unwrap()) - dirichlet_energy(&a.sub(b).unwrap())) / 4.0
        };
        let lw = RadialField::from_fn(grid, |r| dlambda_w_at(1.0, r));
        let perp = h1(&sd.g0, &sd.g0) - h1(&sd.g0, &lw).powi(2) / h1(&lw, &lw);
        let predicted = eps * perp.sqrt();
        assert!((d / predicted - 1.0).abs() < 0.01, "{}", d / predicted);
    }
}
