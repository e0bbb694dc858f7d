//! The ground state `W(r) = (1 + r²/3)^{-1/2}`, its dilates, the scaling
//! generator and the conserved energy.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{derivative4, Exterior, RadialField, RadialGrid, WaveState};
use crate::linalg::SymTridiagonal;

/// Dilation parameter of the soliton curve `W_λ(r) = √λ W(λr)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonParams {
    lambda: f64,
}

impl SolitonParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda.is_finite() && lambda > 0.0 {
            Ok(Self { lambda })
        } else {
            Err(Error::InvalidParameter(format!("lambda = {lambda} must be positive")))
        }
    }

    pub fn unit() -> Self {
        Self { lambda: 1.0 }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

#[inline]
pub fn w_at(lambda: f64, r: f64) -> f64 {
    let x = lambda * r;
    lambda.sqrt() / (1.0 + x * x / 3.0).sqrt()
}

/// `∂_λ W_λ(r) = λ^{-1/2} (1 − λ²r²/3) / (2 (1 + λ²r²/3)^{3/2})`.
#[inline]
pub fn dlambda_w_at(lambda: f64, r: f64) -> f64 {
    let y = (lambda * r).powi(2) / 3.0;
    (1.0 - y) / (2.0 * lambda.sqrt() * (1.0 + y).powf(1.5))
}

pub fn eval_w(p: SolitonParams, grid: RadialGrid) -> RadialField {
    RadialField::from_fn(grid, |r| w_at(p.lambda, r))
}

pub fn eval_dlambda_w(p: SolitonParams, grid: RadialGrid) -> RadialField {
    RadialField::from_fn(grid, |r| dlambda_w_at(p.lambda, r))
}

/// `Λf = r f' + f/2` (fourth-order derivative stencil).
pub fn apply_lambda(f: &RadialField) -> RadialField {
    let d = derivative4(f);
    let grid = *f.grid();
    let values = f
        .values()
        .iter()
        .zip(d.values())
        .enumerate()
        .map(|(i, (v, dv))| grid.r(i) * dv + 0.5 * v)
        .collect();
    RadialField::from_raw(grid, values, f.is_even())
}

/// `Λ* = −r∂_r − 5/2`, the adjoint of `Λ` in the ℝ³ pairing.
pub fn adjoint_lambda(f: &RadialField) -> RadialField {
    let d = derivative4(f);
    let grid = *f.grid();
    let values = f
        .values()
        .iter()
        .zip(d.values())
        .enumerate()
        .map(|(i, (v, dv))| -grid.r(i) * dv - 2.5 * v)
        .collect();
    RadialField::from_raw(grid, values, f.is_even())
}

/// `V_λ = −5 W_λ⁴`.
pub fn potential_v(p: SolitonParams, grid: RadialGrid) -> RadialField {
    RadialField::from_fn(grid, |r| -5.0 * w_at(p.lambda, r).powi(4))
}

/// `N(v, W) = (v + W)⁵ − W⁵ − 5W⁴v` for node values.
///
/// Evaluated as `v²(10W³ + 10W²v + 5Wv² + v³)`: algebraically identical to
/// the literal formula but free of the cancellation that costs the literal
/// form roughly `log10(W/v)` digits for small `v`.
#[inline]
pub fn remainder_at(v: f64, w: f64) -> f64 {
    v * v * (10.0 * w * w * w + v * (10.0 * w * w + v * (5.0 * w + v)))
}

pub fn nonlinear_remainder(v: &RadialField, p: SolitonParams) -> RadialField {
    let grid = *v.grid();
    let values = v
        .values()
        .iter()
        .enumerate()
        .map(|(i, &vi)| remainder_at(vi, w_at(p.lambda, grid.r(i))))
        .collect();
    RadialField::from_raw(grid, values, v.is_even())
}

/// Trapezoid weight of node `i` on an `n`-point grid (units of `dr`).
#[inline]
pub(crate) fn trapezoid_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

/// `E(u, u_t) = 4π ∫ (½u_t² + ½u_r² − u⁶/6) r² dr`.
///
/// Discretized in the form conserved exactly by the semi-discrete solver:
/// the gradient term is `½ ∫ ((r u)_r)² dr` with forward differences (which
/// equals `½ ∫ u_r² r² dr` over ℝ³ for a harmonic exterior) and the local
/// terms use trapezoid weights.
pub fn energy(s: &WaveState) -> f64 {
    let grid = s.grid();
    let n = grid.n_points();
    let dr = grid.dr();
    let u = s.u.values();
    let ut = s.ut.values();
    let mut local = 0.0;
    for i in 0..n {
        let r = grid.r(i);
        local += trapezoid_weight(i, n) * (0.5 * ut[i] * ut[i] - u[i].powi(6) / 6.0) * r * r;
    }
    let mut grad = 0.0;
    for i in 0..n - 1 {
        let d = (grid.r(i + 1) * u[i + 1] - grid.r(i) * u[i]) / dr;
        grad += d * d;
    }
    4.0 * PI * dr * (local + 0.5 * grad)
}

/// Positive-definite energy density `½u_t² + ½|∇u|² + u⁶/6` integrated over
/// `r <= r_cut`.
pub fn local_energy(s: &WaveState, r_cut: f64) -> f64 {
    let grid = s.grid();
    let dr = grid.dr();
    let last = grid.index_at_or_below(r_cut).max(1);
    let u = s.u.values();
    let ut = s.ut.values();
    let mut local = 0.0;
    for i in 0..=last {
        let r = grid.r(i);
        let wgt = if i == 0 || i == last { 0.5 } else { 1.0 };
        local += wgt * (0.5 * ut[i] * ut[i] + u[i].powi(6) / 6.0) * r * r;
    }
    let mut grad = 0.0;
    for i in 0..last {
        let r0 = grid.r(i);
        let r1 = grid.r(i + 1);
        let du = (u[i + 1] - u[i]) / dr;
        let rm = 0.5 * (r0 + r1);
        grad += du * du * rm * rm;
    }
    4.0 * PI * dr * (local + 0.5 * grad)
}

/// Equilibrium of the semi-discrete equation on a grid.
///
/// Solves `(w_{i+1} − 2w_i + w_{i−1})/dr² + w_i⁵/r_i⁴ = 0` for `w = r·W`
/// with `w_0 = 0` and `w` pinned to the exact profile at `r_max`; the origin
/// node satisfies `6(W_1 − W_0)/dr² + W_0⁵ = 0`. The result differs from the
/// analytic `W` by `O(dr²)` and is stationary to round-off under the solver.
#[derive(Debug, Clone)]
pub struct GroundState {
    discrete: RadialField,
    correction: RadialField,
}

impl GroundState {
    pub fn new(grid: RadialGrid) -> Result<Self> {
        let n = grid.n_points();
        let dr = grid.dr();
        let h2 = dr * dr;
        let mut w: Vec<f64> = grid.nodes().map(|r| r * w_at(1.0, r)).collect();
        let m = n - 2;
        let mut converged = false;
        for _ in 0..50 {
            let mut res = vec![0.0; m];
            let mut diag = vec![0.0; m];
            let mut max_res = 0.0_f64;
            for k in 0..m {
                let i = k + 1;
                let r4 = grid.r(i).powi(4);
                res[k] = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / h2 + w[i].powi(5) / r4;
                diag[k] = -2.0 / h2 + 5.0 * w[i].powi(4) / r4;
                max_res = max_res.max(res[k].abs());
            }
            if max_res == 0.0 {
                converged = true;
                break;
            }
            let jac = SymTridiagonal::new(diag, vec![1.0 / h2; m - 1]);
            let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
            let step = jac.solve_shifted(0.0, &rhs)?;
            let mut max_step = 0.0_f64;
            for (k, s) in step.iter().enumerate() {
                w[k + 1] += s;
                max_step = max_step.max(s.abs());
            }
            if max_step < 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                what: "discrete ground state Newton",
                iterations: 50,
            });
        }
        let mut values: Vec<f64> = w
            .iter()
            .enumerate()
            .map(|(i, wi)| if i == 0 { 0.0 } else { wi / grid.r(i) })
            .collect();
        let u1 = values[1];
        let mut u0 = 1.0_f64;
        for _ in 0..50 {
            let f = 6.0 * (u1 - u0) / h2 + u0.powi(5);
            let df = -6.0 / h2 + 5.0 * u0.powi(4);
            let step = f / df;
            u0 -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        values[0] = u0;
        let discrete = RadialField::new(grid, values, true)?;
        let exact = eval_w(SolitonParams::unit(), grid);
        let correction = discrete.sub(&exact)?;
        Ok(Self { discrete, correction })
    }

    pub fn grid(&self) -> &RadialGrid {
        self.discrete.grid()
    }

    /// The grid equilibrium (scale 1).
    pub fn field(&self) -> &RadialField {
        &self.discrete
    }

    /// `W_h − W`, an `O(dr²)` field.
    pub fn correction(&self) -> &RadialField {
        &self.correction
    }

    /// Grid-consistent dilate `W_α + √α (W_h − W)(α r)`; exactly `W_h` at `α = 1`.
    pub fn profile(&self, alpha: f64) -> RadialField {
        if alpha == 1.0 {
            return self.discrete.clone();
        }
        let grid = *self.grid();
        let sa = alpha.sqrt();
        let values = grid
            .nodes()
            .map(|r| w_at(alpha, r) + sa * self.correction.sample(alpha * r, Exterior::Zero))
            .collect();
        RadialField::from_raw(grid, values, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner, integrate_radial, laplacian, norms};
    use approx::assert_relative_eq;

    /// `∫_{ℝ³} W⁶ dx = 3√3π²/4` (substitute `r = √3 tan θ`).
    fn w6_closed_form() -> f64 {
        3.0 * 3f64.sqrt() * PI * PI / 4.0
    }

    /// Independent high-resolution oracle: adaptive Simpson of `4π r² W⁶` on
    /// `[0, ∞)` after `r = √3 tan θ`.
    fn w6_oracle() -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
            let h = (b - a) / n as f64;
            let mut s = f(a) + f(b);
            for i in 1..n {
                let x = a + i as f64 * h;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
            }
            s * h / 3.0
        }
        let integrand = |th: f64| {
            let r = 3f64.sqrt() * th.tan();
            let dr = 3f64.sqrt() / th.cos().powi(2);
            4.0 * PI * r * r * w_at(1.0, r).powi(6) * dr
        };
        simpson(&integrand, 0.0, PI / 2.0 - 1e-9, 20000)
    }

    #[test]
    fn w6_oracle_agrees_with_closed_form() {
        assert_relative_eq!(w6_oracle(), w6_closed_form(), max_relative = 1e-9);
        assert_relative_eq!(w6_closed_form(), 12.821, epsilon = 1e-3);
    }

    #[test]
    fn formula_values() {
        let g = RadialGrid::with_extent(4.0, 3f64.sqrt() / 10.0).unwrap();
        let w = eval_w(SolitonParams::unit(), g);
        assert_eq!(w.values()[0], 1.0);
        assert_relative_eq!(w.values()[10], 1.0 / 2f64.sqrt(), epsilon = 1e-14);
        let w4 = eval_w(SolitonParams::new(4.0).unwrap(), g);
        assert_eq!(w4.values()[0], 2.0);
        let v = potential_v(SolitonParams::unit(), g);
        assert_eq!(v.values()[0], -5.0);
        assert_relative_eq!(v.values()[10], -1.25, epsilon = 1e-13);
        let v2 = potential_v(SolitonParams::new(2.0).unwrap(), g);
        assert_relative_eq!(v2.values()[0], -20.0, epsilon = 1e-13);
        assert!(SolitonParams::new(0.0).is_err());
    }

    #[test]
    fn integrals_of_w() {
        let g = RadialGrid::with_extent(200.0, 0.01).unwrap();
        let w = eval_w(SolitonParams::unit(), g);
        let w6 = integrate_radial(&w.map(|v| v.powi(6))).unwrap();
        assert_relative_eq!(w6, w6_closed_form(), max_relative = 1e-5);
        let w5 = w.map(|v| v.powi(5));
        assert_relative_eq!(inner(&w, &w5).unwrap(), w6_closed_form(), max_relative = 1e-5);
        // Pohozaev: ∫|∇W|² = ∫W⁶
        let h1 = norms(&w).unwrap().h1_seminorm;
        assert_relative_eq!(h1 * h1, w6_closed_form(), max_relative = 1e-4);
    }

    #[test]
    fn l2_of_w_grows_like_sqrt_rmax() {
        let l2 = |rm: f64| {
            let g = RadialGrid::with_extent(rm, 0.05).unwrap();
            norms(&eval_w(SolitonParams::unit(), g)).unwrap().l2
        };
        let (a, b) = (l2(100.0), l2(400.0));
        assert!(b > a);
        assert_relative_eq!(b / a, 2.0, max_relative = 0.05);
    }

    #[test]
    fn energy_values() {
        let g = RadialGrid::with_extent(200.0, 0.01).unwrap();
        let zero = RadialField::zeros(g);
        let s = WaveState::new(zero.clone(), zero.clone(), 0.0).unwrap();
        assert_eq!(energy(&s), 0.0);
        let w = eval_w(SolitonParams::unit(), g);
        let s = WaveState::new(w, zero.clone(), 0.0).unwrap();
        assert_relative_eq!(energy(&s), w6_closed_form() / 3.0, max_relative = 1e-4);
        assert_relative_eq!(energy(&s), 4.2737, epsilon = 1e-3);
        let f = RadialField::from_fn(g, |r| (-r * r).exp());
        let s = WaveState::new(zero, f.clone(), 0.0).unwrap();
        let l2 = norms(&f).unwrap().l2;
        assert_relative_eq!(energy(&s), 0.5 * l2 * l2, max_relative = 1e-8);
    }

    #[test]
    fn energy_is_dilation_invariant() {
        let g = RadialGrid::with_extent(400.0, 0.01).unwrap();
        let zero = RadialField::zeros(g);
        let e = |l: f64| {
            let w = eval_w(SolitonParams::new(l).unwrap(), g);
            energy(&WaveState::new(w, zero.clone(), 0.0).unwrap())
        };
        let e1 = e(1.0);
        for l in [0.5, 2.0] {
            assert_relative_eq!(e(l), e1, max_relative = 5e-4);
        }
    }

    #[test]
    fn dlambda_w_matches_scaling_generator_and_finite_differences() {
        let g = RadialGrid::with_extent(30.0, 0.01).unwrap();
        let d = eval_dlambda_w(SolitonParams::unit(), g);
        let lw = apply_lambda(&eval_w(SolitonParams::unit(), g));
        assert_eq!(d.values()[0], 0.5);
        for (a, b) in d.values().iter().zip(lw.values()).take(g.n_points() - 2) {
            assert!((a - b).abs() < 1e-9);
        }
        for &lam in &[0.7, 1.0, 1.6] {
            let eps = 1e-4;
            for &r in &[0.0, 0.5, 2.0, 7.0] {
                let fd = (w_at(lam + eps, r) - w_at(lam - eps, r)) / (2.0 * eps);
                assert!((fd - dlambda_w_at(lam, r)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn lambda_examples() {
        let g = RadialGrid::with_extent(20.0, 0.01).unwrap();
        let c = RadialField::from_fn(g, |_| 3.0);
        assert!(apply_lambda(&c).values().iter().all(|v| (v - 1.5).abs() < 1e-10));
        assert!(adjoint_lambda(&c).values().iter().all(|v| (v + 7.5).abs() < 1e-10));
        let crit = RadialField::from_fn(g, |r| if r > 0.0 { r.powf(-0.5) } else { 0.0 }).with_even(false);
        let l = apply_lambda(&crit);
        for i in 100..g.n_points() - 2 {
            assert!(l.values()[i].abs() < 1e-7, "node {i}: {}", l.values()[i]);
        }
        let w = eval_w(SolitonParams::unit(), g);
        assert_relative_eq!(apply_lambda(&w).values()[0], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn nonlinear_remainder_examples() {
        let g = RadialGrid::with_extent(10.0, 0.1).unwrap();
        let zero = RadialField::zeros(g);
        assert!(nonlinear_remainder(&zero, SolitonParams::unit()).sup() == 0.0);
        for &(v, w) in &[(0.3, 0.0), (-1.2, 0.0)] {
            assert_relative_eq!(remainder_at(v, w), f64::powi(v, 5), max_relative = 1e-15);
        }
        for &(v, w) in &[(0.3_f64, 0.8_f64), (-0.4, 1.3), (2.0, -0.5)] {
            let literal = (v + w).powi(5) - w.powi(5) - 5.0 * w.powi(4) * v;
            assert_relative_eq!(remainder_at(v, w), literal, max_relative = 1e-12);
        }
        // literal form loses digits where the factored one keeps the quadratic term
        let (v, w) = (1e-7_f64, 1.0_f64);
        let literal = (v + w).powi(5) - w.powi(5) - 5.0 * w.powi(4) * v;
        let leading = 10.0 * v * v;
        assert!((remainder_at(v, w) - leading).abs() / leading < 1e-6);
        assert!((literal - leading).abs() / leading > 1e-3);
    }

    #[test]
    fn remainder_is_quadratic() {
        let g = RadialGrid::with_extent(20.0, 0.01).unwrap();
        let bump = RadialField::from_fn(g, |r| (-r).exp());
        let ratio = |eps: f64| {
            norms(&nonlinear_remainder(&bump.scale(eps), SolitonParams::unit()))
                .unwrap()
                .l2
                / (eps * eps)
        };
        let (a, b, c) = (ratio(1e-2), ratio(1e-3), ratio(1e-4));
        assert!(c > 0.0);
        assert!((b - c).abs() / c < (a - c).abs() / c + 1e-12);
        assert!((b - c).abs() / c < 1e-2);
    }

    #[test]
    fn stationarity_residual_is_second_order() {
        let res = |dr: f64| {
            let g = RadialGrid::with_extent(40.0, dr).unwrap();
            let w = eval_w(SolitonParams::unit(), g);
            let r = laplacian(&w).add(&w.map(|v| v.powi(5))).unwrap().truncated(20.0);
            norms(&r).unwrap().l2
        };
        let ratio = res(0.04) / res(0.02);
        assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn scaling_covariance() {
        let g = RadialGrid::with_extent(20.0, 0.01).unwrap();
        let w1 = eval_w(SolitonParams::unit(), g);
        let lam = 1.37;
        let wl = eval_w(SolitonParams::new(lam).unwrap(), g);
        let dil = w1.dilate(lam, 0.5, Exterior::Harmonic);
        for (a, b) in wl.values().iter().zip(dil.values()).take(1000) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn adjoint_identity_on_compact_pairs() {
        let g = RadialGrid::with_extent(12.0, 0.005).unwrap();
        let bump = |c: f64, w: f64| {
            move |r: f64| {
                let x = (r - c) / w;
                if x.abs() < 1.0 {
                    (-1.0 / (1.0 - x * x)).exp()
                } else {
                    0.0
                }
            }
        };
        for (c1, w1, c2, w2) in [(2.0, 1.5, 3.0, 2.0), (4.0, 3.0, 5.0, 2.5), (0.0, 3.0, 1.0, 4.0)] {
            let f = RadialField::from_fn(g, bump(c1, w1));
            let h = RadialField::from_fn(g, bump(c2, w2));
            let lhs = inner(&apply_lambda(&f), &h).unwrap();
            let rhs = inner(&f, &adjoint_lambda(&h)).unwrap();
            assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn discrete_ground_state_is_close_to_w() {
        let g = RadialGrid::with_extent(60.0, 0.02).unwrap();
        let gs = GroundState::new(g).unwrap();
        let dev = gs.correction().sup();
        assert!(dev > 0.0 && dev < 1e-3, "deviation {dev}");
        let g2 = RadialGrid::with_extent(60.0, 0.01).unwrap();
        let dev2 = GroundState::new(g2).unwrap().correction().sup();
        let ratio = dev / dev2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
        assert_eq!(gs.profile(1.0), *gs.field());
        let p = gs.profile(1.2);
        let exact = eval_w(SolitonParams::new(1.2).unwrap(), g);
        assert!(p.sub(&exact).unwrap().sup() < 2.0 * dev);
    }
}
