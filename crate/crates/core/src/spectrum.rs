//! The unstable eigenpair `(−k₀², g₀)` of `H = −Δ − 5W⁴` and the zero
//! resonance `ΛW`.
//!
//! Two independent solvers are provided. The matrix solver works on the grid
//! operator linearized around the discrete ground state, which is the
//! operator the wave solver actually sees; the shooting solver integrates the
//! continuum radial ODE with the analytic `W`.

use crate::error::{Error, Result};
use crate::grid::{inner, laplacian, Exterior, RadialField, RadialGrid};
use crate::ground_state::{eval_dlambda_w, w_at, GroundState, SolitonParams};
use crate::linalg::SymTridiagonal;

/// Eigen-solver used by [`compute_ground_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Shooting,
    Matrix,
}

/// Unstable eigenpair, resonance and residual certificates.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub k0: f64,
    /// `‖g0‖ = 1`, `g0 ≥ 0`.
    pub g0: RadialField,
    /// `ΛW`, normalized by `ψ(0) = 1/2`.
    pub psi: RadialField,
    /// `‖H g0 + k0² g0‖_{L²}` for the operator the method discretizes.
    pub residual_eig: f64,
    /// `‖H ψ‖_{L²(r ≤ r_max/2)}`.
    pub residual_res: f64,
    /// Number of negative eigenvalues found by the method's own count
    /// (matrix inertia, or nodal count of the zero-energy solution).
    pub negative_count: usize,
    pub method: Method,
}

/// Unstable pair of `H(α) = −Δ − 5W_α⁴`.
#[derive(Debug, Clone)]
pub struct RescaledMode {
    pub k: f64,
    pub g: RadialField,
}

/// `−Δf − 5W_λ⁴ f` with the analytic potential.
pub fn apply_h(p: SolitonParams, f: &RadialField) -> RadialField {
    let grid = *f.grid();
    let lap = laplacian(f);
    let values = lap
        .values()
        .iter()
        .zip(f.values())
        .enumerate()
        .map(|(i, (l, v))| -l - 5.0 * w_at(p.lambda(), grid.r(i)).powi(4) * v)
        .collect();
    RadialField::from_raw(grid, values, f.is_even())
}

/// `−Δf + V f` for a potential given on the grid.
pub fn apply_h_with(potential: &RadialField, f: &RadialField) -> Result<RadialField> {
    f.same_grid(potential)?;
    let lap = laplacian(f);
    let values = lap
        .values()
        .iter()
        .zip(f.values())
        .zip(potential.values())
        .map(|((l, v), q)| -l + q * v)
        .collect();
    Ok(RadialField::from_raw(*f.grid(), values, f.is_even()))
}

/// `‖f‖_{L²(r ≤ r_cut)}`.
pub fn l2_within(f: &RadialField, r_cut: f64) -> f64 {
    let t = f.truncated(r_cut);
    inner(&t, &t).unwrap_or(f64::NAN).max(0.0).sqrt()
}

/// `f − ⟨f, g⟩ g` for a unit `g`.
pub fn project_off_mode(f: &RadialField, g: &RadialField) -> Result<RadialField> {
    let c = inner(f, g)?;
    f.axpy(-c, g)
}

pub fn compute_ground_spectrum(grid: RadialGrid, method: Method) -> Result<SpectralData> {
    if grid.r_max() < 20.0 {
        return Err(Error::InvalidGrid(format!(
            "r_max = {} too small to contain the unstable mode",
            grid.r_max()
        )));
    }
    match method {
        Method::Matrix => {
            let ground = GroundState::new(grid)?;
            matrix_spectrum(&ground)
        }
        Method::Shooting => shooting_spectrum(grid),
    }
}

/// Matrix solver around a precomputed discrete ground state.
pub fn matrix_spectrum(ground: &GroundState) -> Result<SpectralData> {
    let grid = *ground.grid();
    let potential = ground.field().map(|w| -5.0 * w.powi(4));
    let t = w_form_operator(&potential);
    let negative_count = t.count_below(0.0);
    if negative_count == 0 {
        let (lo, hi) = t.gershgorin();
        return Err(Error::NoBoundState { lo, hi });
    }
    let lam = t.eigenvalue_by_bisection(0, 1e-13);
    if lam >= 0.0 {
        return Err(Error::NoBoundState { lo: lam, hi: 0.0 });
    }
    let (lam, w) = inverse_iteration(&t, lam)?;
    let k0 = (-lam).sqrt();
    let n = grid.n_points();
    let h = grid.dr();
    let mut values = vec![0.0; n];
    for (k, wk) in w.iter().enumerate() {
        values[k + 1] = wk / grid.r(k + 1);
    }
    // origin row of the grid operator: −6(g₁ − g₀)/h² + V₀g₀ = −k²g₀
    let v0 = potential.values()[0];
    values[0] = 6.0 * values[1] / (6.0 + h * h * (v0 + k0 * k0));
    finish(grid, k0, values, negative_count, Method::Matrix, |g| {
        apply_h_with(&potential, g)
    })
}

/// Tridiagonal `w`-form of `−Δ + V` on interior nodes, Dirichlet at both ends.
fn w_form_operator(potential: &RadialField) -> SymTridiagonal {
    let grid = potential.grid();
    let h2 = grid.dr() * grid.dr();
    let m = grid.n_points() - 2;
    let diag = (1..=m).map(|i| 2.0 / h2 + potential.values()[i]).collect();
    SymTridiagonal::new(diag, vec![-1.0 / h2; m - 1])
}

fn inverse_iteration(t: &SymTridiagonal, shift: f64) -> Result<(f64, Vec<f64>)> {
    const CAP: usize = 50;
    let m = t.dim();
    let scale = t.gershgorin().1.abs().max(1.0);
    let mut x = vec![1.0 / (m as f64).sqrt(); m];
    for _ in 0..CAP {
        let mut y = t.solve_shifted(shift, &x)?;
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
        let ty = t.matvec(&y);
        let rq: f64 = ty.iter().zip(&y).map(|(a, b)| a * b).sum();
        let res = ty.iter().zip(&y).map(|(a, b)| (a - rq * b).powi(2)).sum::<f64>().sqrt();
        x = y;
        if res <= 1e-13 * scale {
            if x.iter().sum::<f64>() < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            return Ok((rq, x));
        }
    }
    Err(Error::NoConvergence {
        what: "shifted inverse iteration",
        iterations: CAP,
    })
}

/// Normalizes, clamps round-off negatives and attaches certificates.
fn finish(
    grid: RadialGrid,
    k0: f64,
    mut values: Vec<f64>,
    negative_count: usize,
    method: Method,
    op: impl Fn(&RadialField) -> Result<RadialField>,
) -> Result<SpectralData> {
    let raw = RadialField::new(grid, values.clone(), true)?;
    let norm = inner(&raw, &raw)?.sqrt();
    for v in values.iter_mut() {
        *v = (*v / norm).max(0.0);
    }
    let g0 = RadialField::new(grid, values, true)?;
    let res = op(&g0)?.axpy(k0 * k0, &g0)?;
    let residual_eig = inner(&res, &res)?.sqrt();
    let psi = eval_dlambda_w(SolitonParams::unit(), grid);
    let residual_res = l2_within(&apply_h(SolitonParams::unit(), &psi), grid.r_max() / 2.0);
    Ok(SpectralData {
        k0,
        g0,
        psi,
        residual_eig,
        residual_res,
        negative_count,
        method,
    })
}

/// RK4 integration of `w'' = (k² − 5W⁴) w`, `w(0) = 0`, `w'(0) = 1`, from 0
/// to `steps·h`. Calls `visit(step, w, w')` after every step.
fn shoot(k: f64, h: f64, steps: usize, mut visit: impl FnMut(usize, f64, f64)) -> (f64, f64) {
    let q = |r: f64| k * k - 5.0 * w_at(1.0, r).powi(4);
    let (mut w, mut dw) = (0.0_f64, 1.0_f64);
    for s in 0..steps {
        let r = s as f64 * h;
        let qm = q(r + 0.5 * h);
        let (k1w, k1d) = (dw, q(r) * w);
        let (k2w, k2d) = (dw + 0.5 * h * k1d, qm * (w + 0.5 * h * k1w));
        let (k3w, k3d) = (dw + 0.5 * h * k2d, qm * (w + 0.5 * h * k2w));
        let (k4w, k4d) = (dw + h * k3d, q(r + h) * (w + h * k3w));
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        dw += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        visit(s + 1, w, dw);
    }
    (w, dw)
}

/// Shooting solver on the continuum ODE.
///
/// `k` is bisected on the sign of `w' + k w` at a matching radius where the
/// decaying solution is `∝ e^{−kr}`; past that radius the exponential tail is
/// attached analytically so the growing branch never contaminates the mode.
pub fn shooting_spectrum(grid: RadialGrid) -> Result<SpectralData> {
    let dr = grid.dr();
    // substeps keep the RK4 error far below the cross-check tolerance
    let sub = (dr / 0.005).ceil().max(1.0) as usize;
    let h = dr / sub as f64;
    let mismatch = |k: f64, r_m: f64| {
        let steps = (r_m / h).round() as usize;
        let (w, dw) = shoot(k, h, steps, |_, _, _| {});
        dw + k * w
    };
    // bracket on a coarse matching radius, then sharpen with the adapted one
    let (k_lo, k_hi) = (0.05, 5f64.sqrt());
    let r_coarse = 12.0;
    let samples = 200;
    let mut bracket = None;
    let mut prev = mismatch(k_lo, r_coarse);
    for j in 1..=samples {
        let k = k_lo + (k_hi - k_lo) * j as f64 / samples as f64;
        let cur = mismatch(k, r_coarse);
        if prev.signum() != cur.signum() {
            bracket = Some((k - (k_hi - k_lo) / samples as f64, k));
            break;
        }
        prev = cur;
    }
    let (mut a, mut b) = bracket.ok_or(Error::NoBoundState { lo: k_lo, hi: k_hi })?;
    let k_est = 0.5 * (a + b);
    // matching radius: mode down by e^{-14}, growing branch still harmless
    let r_m = (14.0 / k_est).min(grid.r_max());
    let fa = mismatch(a, r_m);
    if fa.signum() == mismatch(b, r_m).signum() {
        // the adapted radius can move the root slightly; widen once
        a = (a - 0.1).max(k_lo);
        b = (b + 0.1).min(k_hi);
        if mismatch(a, r_m).signum() == mismatch(b, r_m).signum() {
            return Err(Error::NoBoundState { lo: a, hi: b });
        }
    }
    let sa = mismatch(a, r_m).signum();
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if mismatch(mid, r_m).signum() == sa {
            a = mid;
        } else {
            b = mid;
        }
    }
    let k0 = 0.5 * (a + b);

    let n = grid.n_points();
    let steps = (r_m / h).round() as usize;
    let mut w = vec![0.0; n];
    shoot(k0, h, steps, |s, ws, _| {
        if s % sub == 0 && s / sub < n {
            w[s / sub] = ws;
        }
    });
    let i_m = steps / sub;
    let w_m = w[i_m];
    for (i, wi) in w.iter_mut().enumerate().skip(i_m + 1) {
        *wi = w_m * (-k0 * (grid.r(i) - grid.r(i_m))).exp();
    }
    let mut values = vec![0.0; n];
    for i in 1..n {
        values[i] = w[i] / grid.r(i);
    }
    // g(0) = w'(0) = 1 and g is even: g(r) = 1 + c r² + ...
    values[0] = (4.0 * values[1] - values[2]) / 3.0;

    // Sturm oscillation: zeros of the zero-energy solution count bound states
    let mut zeros = 0;
    let mut last = 1.0_f64;
    shoot(0.0, h, (grid.r_max().min(200.0) / h) as usize, |_, ws, _| {
        if ws != 0.0 && ws.signum() != last.signum() {
            zeros += 1;
            last = ws;
        }
    });

    finish(grid, k0, values, zeros, Method::Shooting, |g| {
        Ok(apply_h(SolitonParams::unit(), g))
    })
}

/// Continuum `k0` from the matrix solver: Richardson extrapolation of the
/// `O(dr²)` grid eigenvalues on `dr` and `dr/2`.
pub fn extrapolated_k0(r_max: f64, dr: f64) -> Result<f64> {
    let coarse = compute_ground_spectrum(RadialGrid::with_extent(r_max, dr)?, Method::Matrix)?;
    let fine = compute_ground_spectrum(RadialGrid::with_extent(r_max, dr / 2.0)?, Method::Matrix)?;
    Ok((4.0 * fine.k0 - coarse.k0) / 3.0)
}

/// Unstable pair of `H(α)`: `k_α = α k0`, `g_α(r) = α^{3/2} g0(α r)` by cubic
/// interpolation, renormalized.
pub fn rescale_mode(sd: &SpectralData, alpha: f64) -> Result<RescaledMode> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must be positive")));
    }
    let k = alpha * sd.k0;
    let nodes = 1.0 / (k * sd.g0.grid().dr());
    if nodes < 8.0 {
        return Err(Error::UnderResolved { nodes });
    }
    if alpha == 1.0 {
        return Ok(RescaledMode { k, g: sd.g0.clone() });
    }
    let g = sd.g0.dilate(alpha, 1.5, Exterior::Zero);
    let norm = inner(&g, &g)?.sqrt();
    Ok(RescaledMode {
        k,
        g: g.scale(1.0 / norm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dr: f64) -> RadialGrid {
        RadialGrid::with_extent(60.0, dr).unwrap()
    }

    #[test]
    fn matrix_pair_certified() {
        let sd = compute_ground_spectrum(grid(0.02), Method::Matrix).unwrap();
        assert_eq!(sd.negative_count, 1);
        assert!(sd.residual_eig < 1e-6, "residual {}", sd.residual_eig);
        assert!((inner(&sd.g0, &sd.g0).unwrap() - 1.0).abs() < 1e-10);
        assert!(sd.g0.values().iter().all(|v| *v >= 0.0));
        assert!(sd.k0 > 0.0);
    }

    #[test]
    fn shooting_agrees_with_matrix_limit() {
        let shoot = compute_ground_spectrum(grid(0.01), Method::Shooting).unwrap();
        assert_eq!(shoot.negative_count, 1);
        let rich = extrapolated_k0(60.0, 0.01).unwrap();
        assert!((rich - shoot.k0).abs() / shoot.k0 < 1e-5);
    }

    #[test]
    fn matrix_eigenvalue_is_second_order() {
        let k: Vec<f64> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&dr| compute_ground_spectrum(grid(dr), Method::Matrix).unwrap().k0)
            .collect();
        let ratio = (k[0] - k[1]) / (k[1] - k[2]);
        assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn modes_have_no_interior_zero() {
        for method in [Method::Matrix, Method::Shooting] {
            let sd = compute_ground_spectrum(grid(0.02), method).unwrap();
            let g = sd.g0.values();
            let last = sd.g0.grid().index_at_or_below(25.0);
            assert!(g[..=last].iter().all(|v| *v > 0.0), "{method:?}");
        }
    }

    #[test]
    fn tail_decays_at_rate_k0() {
        // r·g0 ∝ e^{-k0 r}; g0 itself carries an extra 1/r
        let sd = compute_ground_spectrum(grid(0.01), Method::Matrix).unwrap();
        let grid = sd.g0.grid();
        let (xs, ys): (Vec<f64>, Vec<f64>) = (grid.index_at_or_below(10.0)..=grid.index_at_or_below(20.0))
            .map(|i| (grid.r(i), (grid.r(i) * sd.g0.values()[i]).ln()))
            .unzip();
        let slope = least_squares_slope(&xs, &ys);
        assert!((slope + sd.k0).abs() / sd.k0 < 0.02, "slope {slope}");
    }

    fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn resonance_residual_second_order() {
        let r: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&dr| compute_ground_spectrum(grid(dr), Method::Matrix).unwrap().residual_res)
            .collect();
        for pair in r.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn analytic_operator_eigen_residual() {
        let sd = compute_ground_spectrum(grid(0.01), Method::Matrix).unwrap();
        let res = apply_h(SolitonParams::unit(), &sd.g0)
            .axpy(sd.k0 * sd.k0, &sd.g0)
            .unwrap();
        assert!(inner(&res, &res).unwrap().sqrt() < 1e-3);
    }

    #[test]
    fn far_field_operator_is_minus_laplacian() {
        let g = grid(0.02);
        let f = RadialField::from_fn(g, |r| (-(r - 40.0).powi(2)).exp());
        let h = apply_h(SolitonParams::unit(), &f);
        let lap = laplacian(&f);
        let diff = h.add(&lap).unwrap();
        assert!(diff.sup() < 1e-5 * lap.sup());
    }

    #[test]
    fn operator_is_symmetric() {
        let g = grid(0.01);
        let f = RadialField::from_fn(g, |r| (-(r * r) / 2.0).exp() * (1.0 + r));
        let q = RadialField::from_fn(g, |r| (-(r - 2.0).powi(2)).exp());
        let p = SolitonParams::new(1.3).unwrap();
        let a = inner(&apply_h(p, &f), &q).unwrap();
        let b = inner(&f, &apply_h(p, &q)).unwrap();
        assert!((a - b).abs() < 1e-6 * a.abs().max(1.0), "{a} {b}");
    }

    fn rescaled_residual(sd: &SpectralData, alpha: f64) -> f64 {
        let m = rescale_mode(sd, alpha).unwrap();
        assert!((inner(&m.g, &m.g).unwrap() - 1.0).abs() < 1e-12);
        let p = SolitonParams::new(alpha).unwrap();
        let res = apply_h(p, &m.g).axpy(m.k * m.k, &m.g).unwrap();
        inner(&res, &res).unwrap().sqrt()
    }

    #[test]
    fn rescaled_mode_is_eigenpair_of_rescaled_operator() {
        let certification = RadialGrid::with_extent(40.0, 0.0025).unwrap();
        let sd = compute_ground_spectrum(certification, Method::Matrix).unwrap();
        assert_eq!(rescale_mode(&sd, 1.0).unwrap().g, sd.g0);
        for alpha in [0.8, 0.9, 1.1, 1.25] {
            let r = rescaled_residual(&sd, alpha);
            assert!(r <= 1e-4, "alpha {alpha}: {r}");
        }
        assert!(matches!(rescale_mode(&sd, 1e3), Err(Error::UnderResolved { .. })));
    }

    #[test]
    fn rescaling_adds_no_error_beyond_operator_scaling() {
        // ‖H(α)g_α + k_α²g_α‖ scales like α² when interpolation is harmless
        let sd = compute_ground_spectrum(grid(0.005), Method::Matrix).unwrap();
        let base = rescaled_residual(&sd, 1.0);
        for alpha in [0.8, 1.25] {
            let ratio = rescaled_residual(&sd, alpha) / (alpha * alpha * base);
            assert!((0.9..1.1).contains(&ratio), "alpha {alpha}: {ratio}");
        }
    }

    #[test]
    fn projection_examples() {
        let sd = compute_ground_spectrum(grid(0.02), Method::Matrix).unwrap();
        let g = &sd.g0;
        assert!(project_off_mode(g, g).unwrap().sup() < 1e-12);
        let f = RadialField::from_fn(*g.grid(), |r| (-(r - 3.0).powi(2)).exp());
        let once = project_off_mode(&f, g).unwrap();
        assert!(inner(&once, g).unwrap().abs() < 1e-14);
        let twice = project_off_mode(&once, g).unwrap();
        assert!(twice.sub(&once).unwrap().sup() < 1e-14);
        let again = project_off_mode(&once, g).unwrap();
        assert_eq!(again, twice);
    }
}
