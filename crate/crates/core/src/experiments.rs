//! Threshold experiments around the ground state: tangent-plane data,
//! bisection of the blowup/decay threshold, ejection-rate fits, the paired
//! bootstrap check and the quadratic-scaling sweep.

use std::ops::ControlFlow;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::grid::{inner, norms, RadialField, RadialGrid, WaveState};
use crate::ground_state::GroundState;
use crate::modulation::{centered_derivative, hyperbolic_coords, ModulationFrame, Modulator, SolitonProfile};
use crate::solver::{evolve, evolve_observed, Dynamics, Outcome, SolverConfig, Stepper};
use crate::spectrum::{matrix_spectrum, SpectralData};

/// `A·e·exp(−1/(1 − x²))`, `x = (r − center)/width`: peak `A` at the center,
/// supported on `|r − center| < width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl Bump {
    pub fn new(amplitude: f64, center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && center >= 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bump (A = {amplitude}, c = {center}, w = {width}) needs w > 0, c >= 0"
            )));
        }
        // smooth radial functions are even at the origin
        if center != 0.0 && center < width {
            return Err(Error::InvalidParameter(format!(
                "bump centered at {center} with width {width} is not smooth at r = 0; \
                 use center 0 or center >= width"
            )));
        }
        Ok(Self {
            amplitude,
            center,
            width,
        })
    }

    pub fn eval(&self, r: f64) -> f64 {
        let x = (r - self.center) / self.width;
        if x.abs() < 1.0 {
            self.amplitude * std::f64::consts::E * (-1.0 / (1.0 - x * x)).exp()
        } else {
            0.0
        }
    }

    pub fn outer_radius(&self) -> f64 {
        self.center + self.width
    }
}

/// Smooth cutoff equal to 1 on `r ≤ 0.8R` and 0 on `r ≥ R`.
pub fn cutoff(r: f64, radius: f64) -> f64 {
    let inner_r = 0.8 * radius;
    if r <= inner_r {
        return 1.0;
    }
    if r >= radius {
        return 0.0;
    }
    let x = (r - inner_r) / (radius - inner_r);
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    b / (a + b)
}

/// Perturbation `(f₁, f₂)` built from bumps, supported in `B(0, R)`.
///
/// After [`make_tangent_data`], `f₂` carries an extra multiple
/// `normal_shift · g₀χ_R` enforcing `⟨k₀f₁ + f₂, g₀⟩ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFamily {
    pub f1: Vec<Bump>,
    pub f2: Vec<Bump>,
    pub support_radius: f64,
    pub projected: bool,
    pub normal_shift: f64,
}

impl DataFamily {
    pub fn new(f1: Vec<Bump>, f2: Vec<Bump>, support_radius: f64) -> Result<Self> {
        for b in f1.iter().chain(&f2) {
            if b.outer_radius() > support_radius {
                return Err(Error::InvalidParameter(format!(
                    "bump reaching r = {} exceeds support radius {support_radius}",
                    b.outer_radius()
                )));
            }
        }
        Ok(Self {
            f1,
            f2,
            support_radius,
            projected: false,
            normal_shift: 0.0,
        })
    }

    /// The `(0, 0)` family with support radius `R`.
    pub fn zero(support_radius: f64) -> Self {
        Self {
            f1: Vec::new(),
            f2: Vec::new(),
            support_radius,
            projected: true,
            normal_shift: 0.0,
        }
    }

    /// Amplitudes (and the normal shift) multiplied by `eps`; projection is
    /// linear, so a projected family stays projected.
    pub fn scaled(&self, eps: f64) -> Self {
        let scale = |v: &[Bump]| {
            v.iter()
                .map(|b| Bump {
                    amplitude: eps * b.amplitude,
                    ..*b
                })
                .collect()
        };
        Self {
            f1: scale(&self.f1),
            f2: scale(&self.f2),
            normal_shift: eps * self.normal_shift,
            ..self.clone()
        }
    }

    pub fn chi(&self, grid: RadialGrid) -> RadialField {
        let radius = self.support_radius;
        RadialField::from_fn(grid, |r| cutoff(r, radius))
    }

    /// Node values of `(f₁, f₂)`; exactly zero beyond `R`.
    pub fn fields(&self, sd: &SpectralData) -> (RadialField, RadialField) {
        let grid = *sd.g0.grid();
        let sum = |v: &[Bump], r: f64| v.iter().map(|b| b.eval(r)).sum::<f64>();
        let f1 = RadialField::from_fn(grid, |r| sum(&self.f1, r));
        let mut f2 = RadialField::from_fn(grid, |r| sum(&self.f2, r));
        if self.normal_shift != 0.0 {
            let gchi = sd.g0.mul(&self.chi(grid)).expect("same grid");
            f2 = f2.axpy(self.normal_shift, &gchi).expect("same grid");
        }
        (f1, f2)
    }

    /// `‖f₁‖_{L²} + ‖∇f₁‖ + ‖Δf₁‖ + (same for f₂)`.
    pub fn norm(&self, sd: &SpectralData) -> f64 {
        let (f1, f2) = self.fields(sd);
        data_norm(&f1, &f2)
    }
}

pub fn data_norm(f1: &RadialField, f2: &RadialField) -> f64 {
    let a = norms(f1).map(|n| n.h2_surrogate()).unwrap_or(f64::NAN);
    let b = norms(f2).map(|n| n.h2_surrogate()).unwrap_or(f64::NAN);
    a + b
}

/// Precomputed objects shared by every experiment on one grid.
#[derive(Debug, Clone)]
pub struct Context {
    pub ground: GroundState,
    pub spectral: SpectralData,
    pub modulator: Modulator,
}

impl Context {
    pub fn new(grid: RadialGrid) -> Result<Self> {
        let ground = GroundState::new(grid)?;
        let spectral = matrix_spectrum(&ground)?;
        let modulator = Modulator::new(&spectral, SolitonProfile::Discrete(ground.clone()));
        Ok(Self {
            ground,
            spectral,
            modulator,
        })
    }

    pub fn grid(&self) -> RadialGrid {
        *self.ground.grid()
    }
}

/// Projects a family onto the tangent plane `⟨k₀f₁ + f₂, g₀⟩ = 0` by
/// correcting `f₂` along `g₀χ_R`.
pub fn make_tangent_data(family: &DataFamily, sd: &SpectralData) -> Result<DataFamily> {
    let mut out = family.clone();
    out.normal_shift = 0.0;
    let (f1, f2) = out.fields(sd);
    let gchi = sd.g0.mul(&out.chi(*sd.g0.grid()))?;
    let den = inner(&gchi, &sd.g0)?;
    if den < 0.5 {
        return Err(Error::DegenerateProjection(den));
    }
    let num = sd.k0 * inner(&f1, &sd.g0)? + inner(&f2, &sd.g0)?;
    out.normal_shift = -num / den;
    out.projected = true;
    Ok(out)
}

/// `|⟨k₀f₁ + f₂, g₀⟩|` for the family.
pub fn tangent_defect(family: &DataFamily, sd: &SpectralData) -> Result<f64> {
    let (f1, f2) = family.fields(sd);
    Ok((sd.k0 * inner(&f1, &sd.g0)? + inner(&f2, &sd.g0)?).abs())
}

/// `(W_h + f₁ + c·g₀χ_R, f₂)`.
pub fn build_initial_state(family: &DataFamily, c: f64, ctx: &Context) -> Result<WaveState> {
    let sd = &ctx.spectral;
    let (f1, f2) = family.fields(sd);
    let gchi = sd.g0.mul(&family.chi(ctx.grid()))?;
    let u = ctx.ground.field().add(&f1)?.axpy(c, &gchi)?;
    WaveState::new(u, f2, 0.0)
}

pub(crate) fn family_config(family: &DataFamily, cfg: &SolverConfig) -> SolverConfig {
    SolverConfig {
        support_radius: family.support_radius,
        stop_on_outcome: true,
        ..cfg.clone()
    }
}

/// Classifies the evolution of the family at coefficient `c`.
pub fn classify(family: &DataFamily, c: f64, ctx: &Context, cfg: &SolverConfig) -> Result<Outcome> {
    let s0 = build_initial_state(family, c, ctx)?;
    Ok(evolve(&s0, &family_config(family, cfg), &[])?.outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub h_star: f64,
    pub c_lo: f64,
    pub c_hi: f64,
    pub bracket_width: f64,
    pub runs: usize,
    pub upper_outcome: Outcome,
    pub lower_outcome: Outcome,
    pub family_norm: f64,
    /// Coefficients outside the final bracket whose outcome contradicted
    /// monotonicity (empty when the sign structure is clean).
    pub monotonicity_violations: Vec<f64>,
}

fn undetermined_error(c: f64, o: &Outcome) -> Error {
    match o {
        Outcome::Undetermined { t_reached, reason } => Error::Undetermined {
            t_reached: *t_reached,
            reason: format!("c = {c:e}: {reason}"),
        },
        other => Error::InvalidBracket(format!("c = {c:e} classified {other:?}")),
    }
}

/// Bisects the coefficient of `g₀χ_R` between a decaying and a blowing-up
/// endpoint. Endpoints and monotonicity probes run in parallel.
///
/// `monotonicity_probes` extra runs on each side sit at `c_hi + 10^j·width`
/// and `c_lo − 10^j·width`, `j = 0..probes`.
pub fn find_threshold(
    family: &DataFamily,
    bracket: (f64, f64),
    tol: f64,
    ctx: &Context,
    cfg: &SolverConfig,
    monotonicity_probes: usize,
) -> Result<ThresholdResult> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidBracket(format!("[{lo}, {hi}] with tol {tol}")));
    }
    let (o_lo, o_hi) = rayon::join(|| classify(family, lo, ctx, cfg), || classify(family, hi, ctx, cfg));
    let (mut o_lo, mut o_hi) = (o_lo?, o_hi?);
    let mut runs = 2;
    if !o_lo.is_decay() {
        return Err(endpoint_error(lo, &o_lo, "lower", "Decay"));
    }
    if !o_hi.is_blowup() {
        return Err(endpoint_error(hi, &o_hi, "upper", "Blowup"));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let o = classify(family, mid, ctx, cfg)?;
        runs += 1;
        match o {
            Outcome::Blowup { .. } => {
                hi = mid;
                o_hi = o;
            }
            Outcome::Decay { .. } => {
                lo = mid;
                o_lo = o;
            }
            Outcome::Undetermined { .. } => return Err(undetermined_error(mid, &o)),
        }
    }
    // re-certify the final endpoints
    let (r_lo, r_hi) = rayon::join(|| classify(family, lo, ctx, cfg), || classify(family, hi, ctx, cfg));
    let (r_lo, r_hi) = (r_lo?, r_hi?);
    runs += 2;
    if !r_lo.is_decay() || !r_hi.is_blowup() {
        return Err(Error::InvalidBracket(format!(
            "re-certification failed: {r_lo:?} at {lo:e}, {r_hi:?} at {hi:e}"
        )));
    }
    debug_assert_eq!((&r_lo, &r_hi), (&o_lo, &o_hi));
    let width = hi - lo;
    let probes: Vec<(f64, bool)> = (0..monotonicity_probes)
        .flat_map(|j| {
            let d = width * 10f64.powi(j as i32);
            [(hi + d, true), (lo - d, false)]
        })
        .collect();
    let checked: Vec<Result<(f64, bool, Outcome)>> = probes
        .par_iter()
        .map(|&(c, upper)| classify(family, c, ctx, cfg).map(|o| (c, upper, o)))
        .collect();
    runs += probes.len();
    let mut violations = Vec::new();
    for item in checked {
        let (c, upper, o) = item?;
        let ok = if upper { o.is_blowup() } else { o.is_decay() };
        if !ok {
            violations.push(c);
        }
    }
    Ok(ThresholdResult {
        h_star: 0.5 * (lo + hi),
        c_lo: lo,
        c_hi: hi,
        bracket_width: width,
        runs,
        upper_outcome: r_hi,
        lower_outcome: r_lo,
        family_norm: family.norm(&ctx.spectral),
        monotonicity_violations: violations,
    })
}

fn endpoint_error(c: f64, o: &Outcome, which: &str, expected: &str) -> Error {
    match o {
        Outcome::Undetermined { .. } => undetermined_error(c, o),
        other => Error::InvalidBracket(format!(
            "{which} endpoint c = {c:e} classified {other:?}, expected {expected}"
        )),
    }
}

/// One modulation sample along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePoint {
    pub t: f64,
    pub energy: f64,
    pub sup: f64,
    pub alpha: f64,
    pub delta: f64,
    pub ortho_residual: f64,
    pub v_l2: f64,
    pub v_h1: f64,
    pub v_h2: f64,
}

impl FramePoint {
    fn from_frame(s: &WaveState, f: &ModulationFrame) -> Self {
        let n = norms(&f.v).ok();
        Self {
            t: s.t,
            energy: crate::ground_state::energy(s),
            sup: s.u.sup(),
            alpha: f.alpha,
            delta: f.delta,
            ortho_residual: f.ortho_residual,
            v_l2: n.map_or(f64::NAN, |n| n.l2),
            v_h1: n.map_or(f64::NAN, |n| n.h1_seminorm),
            v_h2: n.map_or(f64::NAN, |n| n.h2),
        }
    }
}

/// A trajectory with modulation frames at every recorded time.
#[derive(Debug, Clone)]
pub struct FramedTrajectory {
    pub points: Vec<FramePoint>,
    pub outcome: Outcome,
    /// Time of the first failed decomposition, if any.
    pub frames_lost_at: Option<f64>,
    pub record_dt: f64,
}

/// Evolves with modulation frames until `stop(|δ|)` returns true, frames are
/// lost, or the run is classified.
pub fn evolve_framed(
    s0: &WaveState,
    ctx: &Context,
    cfg: &SolverConfig,
    mut stop: impl FnMut(&FramePoint) -> bool,
    mut on_frame: impl FnMut(&WaveState, &ModulationFrame),
) -> Result<FramedTrajectory> {
    let mut points = Vec::new();
    let mut alpha = 1.0;
    let mut lost = None;
    let (rec, _) = evolve_observed(s0, Dynamics::Nonlinear, None, cfg, &[], |s| {
        match ctx.modulator.decompose(&s.u, alpha) {
            Ok(frame) => {
                alpha = frame.alpha;
                on_frame(s, &frame);
                let p = FramePoint::from_frame(s, &frame);
                let done = stop(&p);
                points.push(p);
                if done {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            }
            Err(_) => {
                lost = Some(s.t);
                ControlFlow::Break(())
            }
        }
    })?;
    Ok(FramedTrajectory {
        points,
        outcome: rec.outcome,
        frames_lost_at: lost,
        record_dt: rec.dt * cfg.record_stride as f64,
    })
}

#[derive(Debug, Clone)]
pub struct EjectionResult {
    pub c_offset: f64,
    pub k_fit: f64,
    pub fit: LinearFit,
    /// `(t_start, t_end)` of the fitted window.
    pub window: (f64, f64),
    /// Time at which `|δ|` first reaches `ε₀` (linear interpolation).
    pub exit_time: f64,
    /// `α` of the threshold trajectory at the end of the window.
    pub alpha_inf: f64,
    /// `α` of the perturbed trajectory at the end of the window.
    pub alpha_perturbed: f64,
    /// `sign δ(t) = sign c_offset` throughout the window.
    pub sign_consistent: bool,
    pub series: Vec<FramePoint>,
}

/// Ejection-window ceiling on `|δ|`.
pub const EPS0: f64 = 0.1;

/// Fits `log|δ(t)|` on the window `10|c_offset| ≤ |δ| ≤ ε₀` of the run at
/// `c = h_star + c_offset`.
pub fn measure_ejection(
    family: &DataFamily,
    c_offset: f64,
    thr: &ThresholdResult,
    ctx: &Context,
    cfg: &SolverConfig,
) -> Result<EjectionResult> {
    if c_offset == 0.0 {
        return Err(Error::InvalidParameter("c_offset must be nonzero".into()));
    }
    let cfg = SolverConfig {
        stop_on_outcome: true,
        ..family_config(family, cfg)
    };
    let s0 = build_initial_state(family, thr.h_star + c_offset, ctx)?;
    let traj = evolve_framed(&s0, ctx, &cfg, |p| p.delta.abs() > 2.0 * EPS0, |_, _| {})?;
    let floor = 10.0 * c_offset.abs();
    let pts = &traj.points;
    // window: from the last entry above the floor before the exit crossing
    let exit_idx = pts
        .iter()
        .position(|p| p.delta.abs() >= EPS0)
        .ok_or_else(|| Error::InsufficientWindow {
            window: 0.0,
            needed: 3.0 / ctx.spectral.k0,
        })?;
    let start_idx = (0..exit_idx)
        .rev()
        .take_while(|&i| pts[i].delta.abs() >= floor)
        .last()
        .unwrap_or(exit_idx);
    let window_pts = &pts[start_idx..exit_idx];
    let needed = 3.0 / ctx.spectral.k0;
    let span = window_pts.last().map_or(0.0, |p| p.t) - window_pts.first().map_or(0.0, |p| p.t);
    if window_pts.len() < 3 || span < needed {
        return Err(Error::InsufficientWindow { window: span, needed });
    }
    let ts: Vec<f64> = window_pts.iter().map(|p| p.t).collect();
    let ls: Vec<f64> = window_pts.iter().map(|p| p.delta.abs().ln()).collect();
    let fit = linear_fit(&ts, &ls)?;
    let sign_consistent = window_pts.iter().all(|p| p.delta.signum() == c_offset.signum());
    let (a, b) = (&pts[exit_idx - 1], &pts[exit_idx]);
    let (la, lb) = (a.delta.abs().ln(), b.delta.abs().ln());
    let exit_time = a.t + (EPS0.ln() - la) / (lb - la) * (b.t - a.t);
    let t_end = *ts.last().expect("nonempty");
    let r0 = build_initial_state(family, thr.h_star, ctx)?;
    let reference = evolve_framed(&r0, ctx, &cfg, |p| p.t >= t_end, |_, _| {})?;
    let alpha_inf = match reference.points.last() {
        Some(p) if p.t >= t_end => p.alpha,
        _ => {
            return Err(Error::ReferenceEjected(format!(
                "threshold trajectory lost its frame before t = {t_end}"
            )))
        }
    };
    Ok(EjectionResult {
        c_offset,
        k_fit: fit.slope,
        fit,
        window: (ts[0], t_end),
        exit_time,
        alpha_inf,
        alpha_perturbed: window_pts.last().expect("nonempty").alpha,
        sign_consistent,
        series: traj.points,
    })
}

/// Exit-time law `T = A·log(ε₀/|c|) + B` over a set of ejections.
pub fn exit_time_law(results: &[EjectionResult]) -> Result<LinearFit> {
    let xs: Vec<f64> = results.iter().map(|r| (EPS0 / r.c_offset.abs()).ln()).collect();
    let ys: Vec<f64> = results.iter().map(|r| r.exit_time).collect();
    linear_fit(&xs, &ys)
}

#[derive(Debug, Clone)]
pub struct BootstrapPoint {
    pub t: f64,
    /// `⟨η, g_α⟩`.
    pub delta: f64,
    /// `‖η̃‖_{H²-surrogate}`.
    pub eta_tilde: f64,
    pub rho: f64,
    pub n_plus: f64,
    pub n_minus: f64,
    /// `⟨v_ref, g_α⟩` of the reference trajectory.
    pub reference_delta: f64,
}

#[derive(Debug, Clone)]
pub struct BootstrapReport {
    pub c_offset: f64,
    pub window: (f64, f64),
    pub sup_rho: f64,
    pub sup_n_ratio: f64,
    pub points: Vec<BootstrapPoint>,
    pub rho_tolerance: f64,
    pub n_ratio_tolerance: f64,
}

impl BootstrapReport {
    pub fn passes(&self) -> bool {
        self.sup_rho <= self.rho_tolerance && self.sup_n_ratio <= self.n_ratio_tolerance
    }
}

/// Runs the threshold trajectory and its `c_offset` neighbour in lockstep and
/// measures `ρ(t) = ‖η̃‖/|δ|` with `η = ũ − u = η̃ + δ g_α`, `α` from the
/// reference frame.
pub fn bootstrap_check(
    family: &DataFamily,
    c_offset: f64,
    thr: &ThresholdResult,
    ctx: &Context,
    cfg: &SolverConfig,
) -> Result<BootstrapReport> {
    const RHO_TOL: f64 = 0.2;
    const N_RATIO_TOL: f64 = 0.1;
    let cfg = family_config(family, cfg);
    cfg.validate()?;
    let mut reference = build_initial_state(family, thr.h_star, ctx)?;
    let mut perturbed = build_initial_state(family, thr.h_star + c_offset, ctx)?;
    let grid = ctx.grid();
    let mut step_ref = Stepper::new(&grid, Dynamics::Nonlinear, cfg.cfl)?;
    let mut step_pert = Stepper::new(&grid, Dynamics::Nonlinear, cfg.cfl)?;
    let dt = step_ref.dt();
    let record_dt = dt * cfg.record_stride as f64;
    let causal = cfg.causal_limit(&grid).min(cfg.t_max);
    let mut raw = Vec::new();
    let mut alpha = 1.0;
    loop {
        let frame = ctx
            .modulator
            .decompose(&reference.u, alpha)
            .map_err(|e| Error::ReferenceEjected(format!("reference frame lost at t = {}: {e}", reference.t)))?;
        alpha = frame.alpha;
        let eta = perturbed.u.sub(&reference.u)?;
        let delta = inner(&eta, &frame.g_alpha)?;
        let eta_tilde = eta.axpy(-delta, &frame.g_alpha)?;
        let size = norms(&eta_tilde)?.h2_surrogate();
        raw.push((reference.t, delta, size, frame.delta));
        if delta.abs() > EPS0 || reference.t + record_dt > causal {
            break;
        }
        for _ in 0..cfg.record_stride {
            let ok = step_ref.step(&mut reference) & step_pert.step(&mut perturbed);
            if !ok {
                return Err(Error::ReferenceEjected("non-finite state in paired run".into()));
            }
        }
    }
    let deltas: Vec<f64> = raw.iter().map(|r| r.1).collect();
    let ddot = centered_derivative(&deltas, record_dt);
    let k = ctx.spectral.k0 * alpha;
    let floor = 10.0 * c_offset.abs();
    let mut points = Vec::new();
    for (i, &(t, delta, size, ref_delta)) in raw.iter().enumerate() {
        let hc = hyperbolic_coords(delta, ddot[i], k);
        points.push(BootstrapPoint {
            t,
            delta,
            eta_tilde: size,
            rho: size / delta.abs(),
            n_plus: hc.n_plus,
            n_minus: hc.n_minus,
            reference_delta: ref_delta,
        });
    }
    let in_window: Vec<&BootstrapPoint> = points
        .iter()
        .filter(|p| p.delta.abs() >= floor && p.delta.abs() <= EPS0)
        .collect();
    if in_window.len() < 3 {
        return Err(Error::InsufficientWindow {
            window: 0.0,
            needed: 3.0 / ctx.spectral.k0,
        });
    }
    if let Some(p) = in_window.iter().find(|p| p.reference_delta.abs() > 0.1 * p.delta.abs()) {
        return Err(Error::ReferenceEjected(format!(
            "reference unstable coordinate {:e} at t = {} is not small against {:e}",
            p.reference_delta, p.t, p.delta
        )));
    }
    let sup_rho = in_window.iter().map(|p| p.rho).fold(0.0, f64::max);
    let sup_n_ratio = in_window
        .iter()
        .map(|p| (p.n_minus / p.n_plus).abs())
        .fold(0.0, f64::max);
    let window = (in_window[0].t, in_window[in_window.len() - 1].t);
    Ok(BootstrapReport {
        c_offset,
        window,
        sup_rho,
        sup_n_ratio,
        points,
        rho_tolerance: RHO_TOL,
        n_ratio_tolerance: N_RATIO_TOL,
    })
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub eps: Vec<f64>,
    pub thresholds: Vec<ThresholdResult>,
    pub fit: LinearFit,
}

/// Thresholds of `ε·family` for each `ε`, fitted as `log|h*|` against `log ε`.
pub fn hscaling(
    family: &DataFamily,
    eps: &[f64],
    bracket: (f64, f64),
    tol: f64,
    ctx: &Context,
    cfg: &SolverConfig,
) -> Result<ScalingReport> {
    let thresholds: Vec<ThresholdResult> = eps
        .par_iter()
        .map(|&e| find_threshold(&family.scaled(e), bracket, tol, ctx, cfg, 0))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = thresholds.iter().map(|t| t.h_star.abs().ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(ScalingReport {
        eps: eps.to_vec(),
        thresholds,
        fit,
    })
}

/// `|h*(A) − h*(B)| / ‖A − B‖` for two families on the same grid.
pub fn lipschitz_ratio(
    a: &ThresholdResult,
    b: &ThresholdResult,
    fa: &DataFamily,
    fb: &DataFamily,
    sd: &SpectralData,
) -> f64 {
    let (a1, a2) = fa.fields(sd);
    let (b1, b2) = fb.fields(sd);
    let d1 = a1.sub(&b1).expect("same grid");
    let d2 = a2.sub(&b2).expect("same grid");
    (a.h_star - b.h_star).abs() / data_norm(&d1, &d2)
}
