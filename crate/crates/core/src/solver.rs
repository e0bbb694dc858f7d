//! Method-of-lines integration of `u_tt = Δu + F(u)` on a radial grid.
//!
//! The Laplacian is the three-point stencil on `w = r u`, with the
//! `6(u₁ − u₀)/dr²` limit at the origin, and classical RK4 advances
//! `(u, u_t)`. The outermost node is held at its initial value: runs are
//! only trusted while the disturbance has not reached it, so no boundary
//! condition is ever exercised.

use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::grid::{Exterior, RadialField, RadialGrid, WaveState};
use crate::ground_state::{energy, local_energy, trapezoid_weight, w_at, SolitonParams};

/// Right-hand side `F(u)` of `u_tt = Δu + F(u)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    /// `F(u) = u⁵`.
    Nonlinear,
    /// `F(u) = 0`.
    Free,
    /// `F(u) = −V u` with `V` given on the grid, i.e. `u_tt + (−Δ + V) u = 0`.
    Potential(RadialField),
}

/// Linear flow selector for [`evolve_linear`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearMode {
    Free,
    WithPotential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// `dt = cfl · dr`.
    pub cfl: f64,
    pub t_max: f64,
    pub blowup_sup_threshold: f64,
    /// Local energy on `r ≤ 2R` relative to its initial value.
    pub decay_local_energy_threshold: f64,
    /// Absolute bound on `sup_{r ≤ 2R} |u|`.
    pub decay_sup_threshold: f64,
    /// Time both decay conditions must hold before `Decay` is declared.
    pub dwell: f64,
    pub causal_margin: f64,
    /// Radius `R` containing the initial perturbation.
    pub support_radius: f64,
    /// Record every `record_stride` steps.
    pub record_stride: usize,
    /// Stop as soon as the outcome is decided.
    pub stop_on_outcome: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            t_max: 100.0,
            blowup_sup_threshold: 1e4,
            decay_local_energy_threshold: 1e-4,
            decay_sup_threshold: 1e-2,
            dwell: 5.0,
            causal_margin: 5.0,
            support_radius: 10.0,
            record_stride: 10,
            stop_on_outcome: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl must lie in (0, 1]");
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad("t_max must be positive");
        }
        if self.record_stride == 0 {
            return bad("record_stride must be positive");
        }
        if !(self.support_radius > 0.0) {
            return bad("support_radius must be positive");
        }
        if !(self.blowup_sup_threshold > 0.0 && self.decay_local_energy_threshold > 0.0) {
            return bad("thresholds must be positive");
        }
        if !(self.dwell >= 0.0 && self.causal_margin >= 0.0) {
            return bad("dwell and causal_margin must be non-negative");
        }
        Ok(())
    }

    /// Last time at which the causal window still holds on `grid`.
    pub fn causal_limit(&self, grid: &RadialGrid) -> f64 {
        grid.r_max() - self.support_radius - self.causal_margin
    }

    /// Smallest `r_max` that keeps the whole run causal.
    pub fn required_r_max(&self) -> f64 {
        self.support_radius + self.t_max + self.causal_margin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Blowup { t_star: f64 },
    Decay { t_reached: f64 },
    Undetermined { t_reached: f64, reason: String },
}

impl Outcome {
    pub fn flag(&self) -> i8 {
        match self {
            Outcome::Blowup { .. } => 1,
            Outcome::Decay { .. } => -1,
            Outcome::Undetermined { .. } => 0,
        }
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self, Outcome::Blowup { .. })
    }

    pub fn is_decay(&self) -> bool {
        matches!(self, Outcome::Decay { .. })
    }

    pub fn time(&self) -> f64 {
        match self {
            Outcome::Blowup { t_star } => *t_star,
            Outcome::Decay { t_reached } | Outcome::Undetermined { t_reached, .. } => *t_reached,
        }
    }
}

/// Diagnostics at one recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub energy: f64,
    pub sup: f64,
    /// Energy on `r ≤ 2R`.
    pub local_energy: f64,
    /// `sup_{r ≤ 2R} |u|`.
    pub local_sup: f64,
    /// `u` at the requested probe radii.
    pub probes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    pub probe_radii: Vec<f64>,
    pub dt: f64,
    pub outcome: Outcome,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

/// Unit mode removed from `(u, u_t)` after every step of a linear flow.
///
/// The coefficient is taken in the discrete pairing `Σ trap_i r_i² f_i g_i`,
/// in which the grid operator is symmetric, so an exact grid eigenvector is
/// removed exactly.
#[derive(Debug, Clone)]
struct ModeFilter {
    weighted: Vec<f64>,
    mode: Vec<f64>,
}

impl ModeFilter {
    fn new(g: &RadialField) -> Self {
        let grid = g.grid();
        let n = grid.n_points();
        let mut weighted: Vec<f64> = g
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| trapezoid_weight(i, n) * grid.r(i).powi(2) * v)
            .collect();
        let norm: f64 = weighted.iter().zip(g.values()).map(|(a, b)| a * b).sum();
        weighted.iter_mut().for_each(|v| *v /= norm);
        Self {
            weighted,
            mode: g.values().to_vec(),
        }
    }

    fn apply(&self, f: &mut [f64]) {
        let c: f64 = self.weighted.iter().zip(f.iter()).map(|(a, b)| a * b).sum();
        for (x, g) in f.iter_mut().zip(&self.mode) {
            *x -= c * g;
        }
    }
}

/// RK4 stepper owning its stage buffers; two steppers can advance paired
/// states in lockstep.
#[derive(Debug, Clone)]
pub struct Stepper {
    dynamics: Dynamics,
    dt: f64,
    inv_i: Vec<f64>,
    inv_h2: f64,
    filter: Option<ModeFilter>,
    ku: [Vec<f64>; 4],
    kv: [Vec<f64>; 4],
    tmp_u: Vec<f64>,
    tmp_v: Vec<f64>,
    u0: Vec<f64>,
    v0: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: &RadialGrid, dynamics: Dynamics, cfl: f64) -> Result<Self> {
        if let Dynamics::Potential(v) = &dynamics {
            if v.grid() != grid {
                return Err(Error::GridMismatch);
            }
        }
        let n = grid.n_points();
        let dr = grid.dr();
        let inv_i = (0..n).map(|i| if i == 0 { 0.0 } else { 1.0 / i as f64 }).collect();
        let zeros = || vec![0.0; n];
        Ok(Self {
            dynamics,
            dt: cfl * dr,
            inv_i,
            inv_h2: 1.0 / (dr * dr),
            filter: None,
            ku: [zeros(), zeros(), zeros(), zeros()],
            kv: [zeros(), zeros(), zeros(), zeros()],
            tmp_u: zeros(),
            tmp_v: zeros(),
            u0: zeros(),
            v0: zeros(),
        })
    }

    /// Removes the unit mode `g` from both components after every step.
    pub fn with_mode_filter(mut self, g: &RadialField) -> Self {
        self.filter = Some(ModeFilter::new(g));
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Acceleration `Δu + F(u)`; the last node is frozen.
    fn accel(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        let ih2 = self.inv_h2;
        out[0] = 6.0 * (u[1] - u[0]) * ih2;
        for i in 1..n - 1 {
            let fi = i as f64;
            out[i] = ((fi + 1.0) * u[i + 1] - 2.0 * fi * u[i] + (fi - 1.0) * u[i - 1]) * ih2 * self.inv_i[i];
        }
        out[n - 1] = 0.0;
        match &self.dynamics {
            Dynamics::Free => {}
            Dynamics::Nonlinear => {
                for i in 0..n - 1 {
                    let x = u[i];
                    let x2 = x * x;
                    out[i] += x2 * x2 * x;
                }
            }
            Dynamics::Potential(v) => {
                for (i, q) in v.values().iter().enumerate().take(n - 1) {
                    out[i] -= q * u[i];
                }
            }
        }
    }

    /// One RK4 step in place. Returns `false` if a non-finite value appeared.
    pub fn step(&mut self, s: &mut WaveState) -> bool {
        let dt = self.dt;
        let n = s.u.len();
        let mut u0 = std::mem::take(&mut self.u0);
        let mut v0 = std::mem::take(&mut self.v0);
        u0.copy_from_slice(s.u.values());
        v0.copy_from_slice(s.ut.values());
        let coef = [0.0, 0.5, 0.5, 1.0];
        for stage in 0..4 {
            if stage == 0 {
                self.tmp_u.copy_from_slice(&u0);
                self.tmp_v.copy_from_slice(&v0);
            } else {
                let c = coef[stage] * dt;
                for i in 0..n {
                    self.tmp_u[i] = u0[i] + c * self.ku[stage - 1][i];
                    self.tmp_v[i] = v0[i] + c * self.kv[stage - 1][i];
                }
            }
            self.ku[stage].copy_from_slice(&self.tmp_v);
            self.ku[stage][n - 1] = 0.0;
            let mut acc = std::mem::take(&mut self.kv[stage]);
            self.accel(&self.tmp_u, &mut acc);
            self.kv[stage] = acc;
        }
        let u = s.u.values_mut();
        let v = s.ut.values_mut();
        let w = dt / 6.0;
        let mut finite = true;
        for i in 0..n {
            u[i] = u0[i] + w * (self.ku[0][i] + 2.0 * self.ku[1][i] + 2.0 * self.ku[2][i] + self.ku[3][i]);
            v[i] = v0[i] + w * (self.kv[0][i] + 2.0 * self.kv[1][i] + 2.0 * self.kv[2][i] + self.kv[3][i]);
            finite &= u[i].is_finite() && v[i].is_finite();
        }
        if let Some(filter) = &self.filter {
            filter.apply(u);
            filter.apply(v);
        }
        self.u0 = u0;
        self.v0 = v0;
        s.t += dt;
        finite
    }
}

/// One RK4 step of the nonlinear equation.
pub fn step_nonlinear(s: &WaveState, cfg: &SolverConfig) -> Result<WaveState> {
    let mut stepper = Stepper::new(s.grid(), Dynamics::Nonlinear, cfg.cfl)?;
    let mut out = s.clone();
    if stepper.step(&mut out) {
        Ok(out)
    } else {
        Err(Error::NonFinite {
            index: out.u.values().iter().position(|v| !v.is_finite()).unwrap_or(0),
            value: f64::NAN,
        })
    }
}

/// Tracks the decay conditions over the dwell window.
struct DecayWatch {
    initial_local: f64,
    since: Option<f64>,
}

impl DecayWatch {
    fn update(&mut self, cfg: &SolverConfig, t: f64, local_energy: f64, local_sup: f64) -> bool {
        let quiet = local_energy <= cfg.decay_local_energy_threshold * self.initial_local
            && local_sup <= cfg.decay_sup_threshold;
        if !quiet {
            self.since = None;
            return false;
        }
        let start = *self.since.get_or_insert(t);
        t - start >= cfg.dwell
    }
}

fn sample(s: &WaveState, cfg: &SolverConfig, probes: &[f64]) -> Sample {
    let r_loc = 2.0 * cfg.support_radius;
    Sample {
        t: s.t,
        energy: energy(s),
        sup: s.u.sup(),
        local_energy: local_energy(s, r_loc),
        local_sup: s.u.sup_within(r_loc),
        probes: probes.iter().map(|&r| s.u.sample(r, Exterior::Zero)).collect(),
    }
}

/// Nonlinear evolution with outcome classification.
pub fn evolve(s0: &WaveState, cfg: &SolverConfig, probes: &[f64]) -> Result<TrajectoryRecord> {
    evolve_observed(
        s0,
        Dynamics::Nonlinear,
        None,
        cfg,
        probes,
        |_| ControlFlow::Continue(()),
    )
    .map(|(rec, _)| rec)
}

/// Linear flow `u_tt + H(λ) u = 0` (analytic `W_λ` potential) or the free
/// wave equation.
pub fn evolve_linear(
    s0: &WaveState,
    p: SolitonParams,
    cfg: &SolverConfig,
    mode: LinearMode,
    probes: &[f64],
) -> Result<TrajectoryRecord> {
    let dynamics = match mode {
        LinearMode::Free => Dynamics::Free,
        LinearMode::WithPotential => {
            Dynamics::Potential(RadialField::from_fn(*s0.grid(), |r| -5.0 * w_at(p.lambda(), r).powi(4)))
        }
    };
    evolve_observed(s0, dynamics, None, cfg, probes, |_| ControlFlow::Continue(())).map(|(r, _)| r)
}

/// General driver: evolves `s0`, calling `observer` at every recorded time
/// (including `t = 0`). The observer may stop the run early, in which case
/// the outcome is `Undetermined` with reason "stopped by observer" unless
/// already decided. Returns the record and the final state.
pub fn evolve_observed(
    s0: &WaveState,
    dynamics: Dynamics,
    mode_filter: Option<&RadialField>,
    cfg: &SolverConfig,
    probes: &[f64],
    mut observer: impl FnMut(&WaveState) -> ControlFlow<()>,
) -> Result<(TrajectoryRecord, WaveState)> {
    cfg.validate()?;
    s0.u.check_finite()?;
    s0.ut.check_finite()?;
    let grid = *s0.grid();
    let mut stepper = Stepper::new(&grid, dynamics, cfg.cfl)?;
    if let Some(g) = mode_filter {
        g.same_grid(&s0.u)?;
        stepper = stepper.with_mode_filter(g);
    }
    let dt = stepper.dt();
    let causal_limit = cfg.causal_limit(&grid);
    let mut s = s0.clone();
    let first = sample(&s, cfg, probes);
    let mut watch = DecayWatch {
        initial_local: first.local_energy,
        since: None,
    };
    let mut samples = vec![first];
    let zero_data = s.u.sup() == 0.0 && s.ut.sup() == 0.0;
    let mut outcome = None;
    if zero_data {
        outcome = Some(Outcome::Decay { t_reached: s.t });
    }
    let mut stopped = observer(&s).is_break();
    let steps = ((cfg.t_max - s.t) / dt - 1e-9).ceil().max(0.0) as usize;
    let mut step = 0;
    while step < steps && !stopped && !(cfg.stop_on_outcome && outcome.is_some()) {
        if s.t + dt > causal_limit {
            outcome.get_or_insert(Outcome::Undetermined {
                t_reached: s.t,
                reason: format!(
                    "causal window exhausted: R + t + margin reaches r_max = {}",
                    grid.r_max()
                ),
            });
            break;
        }
        let finite = stepper.step(&mut s);
        step += 1;
        if !finite {
            outcome.get_or_insert(Outcome::Blowup { t_star: s.t });
            break;
        }
        let record = step % cfg.record_stride == 0 || step == steps;
        if record {
            let smp = sample(&s, cfg, probes);
            if smp.sup > cfg.blowup_sup_threshold {
                outcome.get_or_insert(Outcome::Blowup { t_star: s.t });
            } else if watch.update(cfg, s.t, smp.local_energy, smp.local_sup) {
                outcome.get_or_insert(Outcome::Decay { t_reached: s.t });
            }
            samples.push(smp);
            stopped = observer(&s).is_break();
        } else if s.u.values()[0].abs() > cfg.blowup_sup_threshold {
            outcome.get_or_insert(Outcome::Blowup { t_star: s.t });
        }
    }
    let outcome = outcome.unwrap_or_else(|| Outcome::Undetermined {
        t_reached: s.t,
        reason: if stopped {
            "stopped by observer".to_string()
        } else {
            "t_max reached without classification".to_string()
        },
    });
    Ok((
        TrajectoryRecord {
            samples,
            probe_radii: probes.to_vec(),
            dt,
            outcome,
        },
        s,
    ))
}
