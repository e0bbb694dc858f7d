//! Dispersive and modulation diagnostics: sup-norm decay of the radiation,
//! `L_x^∞L_t^1` partial integrals at probe radii, the averaged modulation
//! drift, the phase correction `Γ`, and linear-flow dispersive checks.

use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::experiments::{build_initial_state, evolve_framed, family_config, Context, DataFamily};
use crate::fit::{linear_fit, LinearFit};
use crate::grid::{derivative, inner, DerivativeOrder, Exterior, RadialField, WaveState};
use crate::ground_state::{apply_lambda, eval_dlambda_w, eval_w, SolitonParams};
use crate::solver::{evolve_observed, Dynamics, Outcome, SolverConfig};
use crate::spectrum::project_off_mode;

/// Number of halvings in the dyadic time ladder `T_k = T·2^{−k}`.
pub const DYADIC_LEVELS: usize = 3;

/// Modulation-frame snapshots of a near-threshold trajectory with the
/// radiation `u_* = v − δ g_α` kept at every recorded time.
#[derive(Debug, Clone)]
pub struct RadiationRecord {
    pub times: Vec<f64>,
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
    pub u_star: Vec<RadialField>,
    pub outcome: Outcome,
    /// Time at which recording stopped because `|δ|` passed the cap or the
    /// frame was lost.
    pub truncated_at: Option<f64>,
    pub support_radius: f64,
}

/// Records `u_*` along the trajectory at coefficient `c` until `|δ|` is
/// growing above `delta_cap`, frames are lost, or the run is classified.
pub fn record_radiation(
    family: &DataFamily,
    c: f64,
    delta_cap: f64,
    ctx: &Context,
    cfg: &SolverConfig,
) -> Result<RadiationRecord> {
    let cfg = family_config(family, cfg);
    let s0 = build_initial_state(family, c, ctx)?;
    let mut u_star = Vec::new();
    let mut capped = None;
    let mut previous = f64::INFINITY;
    let traj = evolve_framed(
        &s0,
        ctx,
        &cfg,
        |p| {
            let size = p.delta.abs();
            let over = size > delta_cap && size > previous;
            previous = size;
            if over {
                capped = Some(p.t);
            }
            over
        },
        |_, f| {
            u_star.push(f.v.axpy(-f.delta, &f.g_alpha).expect("same grid"));
        },
    )?;
    // the capped frame is recorded by the observer but lies past the cap
    let keep = if capped.is_some() {
        traj.points.len() - 1
    } else {
        traj.points.len()
    };
    u_star.truncate(keep);
    let pts = &traj.points[..keep];
    Ok(RadiationRecord {
        times: pts.iter().map(|p| p.t).collect(),
        alpha: pts.iter().map(|p| p.alpha).collect(),
        delta: pts.iter().map(|p| p.delta).collect(),
        u_star,
        outcome: traj.outcome,
        truncated_at: capped.or(traj.frames_lost_at),
        support_radius: family.support_radius,
    })
}

/// Cumulative trapezoid integral of `values` over `times`.
pub fn cumulative_integral(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            acc += 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// Linear interpolation of a tabulated function at `t` (clamped).
fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    match times.iter().position(|&s| s >= t) {
        None => *values.last().unwrap_or(&0.0),
        Some(0) => values[0],
        Some(j) => {
            let (t0, t1) = (times[j - 1], times[j]);
            let w = (t - t0) / (t1 - t0);
            values[j - 1] + w * (values[j] - values[j - 1])
        }
    }
}

/// Dyadic ladder `T·2^{−k}`, `k = DYADIC_LEVELS, …, 0`, in increasing order.
pub fn dyadic_times(t_end: f64) -> Vec<f64> {
    (0..=DYADIC_LEVELS)
        .rev()
        .map(|k| t_end / f64::powi(2.0, k as i32))
        .collect()
}

/// Partial integrals `I(T_k)` of `|values|` and their tail ratios
/// `(I(T_k) − I(T_{k−1}))/I(T_{k−1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialIntegrals {
    pub radius: f64,
    pub values: Vec<f64>,
    pub tail_ratios: Vec<f64>,
}

impl PartialIntegrals {
    fn new(radius: f64, times: &[f64], integrand: &[f64], ladder: &[f64]) -> Self {
        let cum = cumulative_integral(times, integrand);
        let values: Vec<f64> = ladder.iter().map(|&t| interpolate(times, &cum, t)).collect();
        let tail_ratios = values
            .windows(2)
            .map(|w| {
                if w[0] > 0.0 {
                    (w[1] - w[0]) / w[0]
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        Self {
            radius,
            values,
            tail_ratios,
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }

    /// Last tail ratio within `tol` and the ratios non-increasing in `T`.
    pub fn converges(&self, tol: f64) -> bool {
        let last_ok = self.tail_ratios.last().is_some_and(|&r| r <= tol);
        let decreasing = self.tail_ratios.windows(2).all(|w| w[1] <= w[0]);
        last_ok && decreasing && self.is_monotone()
    }
}

/// Phase correction `Γ(0, t)` on the recorded mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSeries {
    pub times: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `sup_{s,t} |Γ(s, t)| = max Γ(0,·) − min Γ(0,·)`.
    pub sup_abs: f64,
}

impl GammaSeries {
    /// `Γ(s, t) = Γ(0, t) − Γ(0, s)` on mesh indices.
    pub fn between(&self, s: usize, t: usize) -> f64 {
        self.gamma[t] - self.gamma[s]
    }
}

#[derive(Debug, Clone)]
pub struct DispersiveReport {
    pub fit_window: (f64, f64),
    /// Slope of `log sup_x|u_*|` against `log t`.
    pub sup_decay_slope: f64,
    pub sup_decay_fit: LinearFit,
    pub sup_series: Vec<(f64, f64)>,
    pub dyadic_times: Vec<f64>,
    pub linfl1_partial: Vec<PartialIntegrals>,
    pub alpha_inf: f64,
    pub a_series: Vec<(f64, f64)>,
    /// Running `∫₀^t (α_∞ − α(s)) ds`.
    pub a_avg_series: Vec<(f64, f64)>,
    pub a_avg_sup: f64,
    /// `sup_t t·|α_∞ − α(t)|`.
    pub a_weighted_sup: f64,
    /// `sup |∫₀^t(α_∞ − α)|` over the second half of the record divided by
    /// the sup over the first half.
    pub a_avg_growth: f64,
    pub gamma: GammaSeries,
    pub truncated_at: Option<f64>,
}

/// Post-processes a radiation record. The sup-decay fit uses `t ≥ fit_start`;
/// probes are `{0, R/2, R, 2R}`.
pub fn measure_radiation(rec: &RadiationRecord, fit_start: f64, ctx: &Context) -> Result<DispersiveReport> {
    let n = rec.times.len();
    let t_end = *rec
        .times
        .last()
        .ok_or_else(|| Error::InvalidParameter("empty record".into()))?;
    if t_end <= 2.0 * fit_start {
        return Err(Error::InsufficientWindow {
            window: t_end - fit_start,
            needed: fit_start,
        });
    }
    let sups: Vec<f64> = rec.u_star.iter().map(RadialField::sup).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = rec
        .times
        .iter()
        .zip(&sups)
        .filter(|(t, _)| **t >= fit_start)
        .map(|(t, s)| (t.ln(), s.ln()))
        .unzip();
    let sup_decay_fit = linear_fit(&xs, &ys)?;

    let radius = rec.support_radius;
    let ladder = dyadic_times(t_end);
    let linfl1_partial = [0.0, 0.5 * radius, radius, 2.0 * radius]
        .iter()
        .map(|&x| {
            let integrand: Vec<f64> = rec.u_star.iter().map(|u| u.sample(x, Exterior::Zero).abs()).collect();
            PartialIntegrals::new(x, &rec.times, &integrand, &ladder)
        })
        .collect();

    let alpha_inf = rec.alpha[n - 1];
    let drift: Vec<f64> = rec.alpha.iter().map(|a| alpha_inf - a).collect();
    let avg = cumulative_integral(&rec.times, &drift);
    let a_avg_sup = avg.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let a_weighted_sup = rec
        .times
        .iter()
        .zip(&drift)
        .fold(0.0_f64, |m, (t, d)| m.max(t * d.abs()));
    let half = n / 2;
    let sup_of = |s: &[f64]| s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let a_avg_growth = sup_of(&avg[half..]) / sup_of(&avg[..half]);

    Ok(DispersiveReport {
        fit_window: (fit_start, t_end),
        sup_decay_slope: sup_decay_fit.slope,
        sup_decay_fit,
        sup_series: rec.times.iter().copied().zip(sups).collect(),
        dyadic_times: ladder,
        linfl1_partial,
        alpha_inf,
        a_series: rec.times.iter().copied().zip(rec.alpha.iter().copied()).collect(),
        a_avg_series: rec.times.iter().copied().zip(avg).collect(),
        a_avg_sup,
        a_weighted_sup,
        a_avg_growth,
        gamma: phase_correction(rec, ctx)?,
        truncated_at: rec.truncated_at,
    })
}

/// `Γ(0, t) = ∫₀^t ⟨g_∞(u_* W³_{α_∞} + (α_∞ − α)∂_λV|_{α_∞}), g_∞⟩ ds` with
/// `V = −5W_λ⁴`, so `∂_λV = −20 W_λ³ ∂_λW_λ`.
pub fn phase_correction(rec: &RadiationRecord, ctx: &Context) -> Result<GammaSeries> {
    let alpha_inf = *rec
        .alpha
        .last()
        .ok_or_else(|| Error::InvalidParameter("empty record".into()))?;
    let grid = ctx.grid();
    let p = SolitonParams::new(alpha_inf)?;
    let w = eval_w(p, grid);
    let dw = eval_dlambda_w(p, grid);
    let (g_inf, _) = ctx.modulator.mode_pair(alpha_inf);
    let g2 = g_inf.mul(&g_inf)?;
    let w3 = w.map(|x| x * x * x);
    let dv = w3.mul(&dw)?.scale(-20.0);
    let g2w3 = g2.mul(&w3)?;
    let g2dv = inner(&g2, &dv)?;
    let mut integrand = Vec::with_capacity(rec.times.len());
    for (u, a) in rec.u_star.iter().zip(&rec.alpha) {
        integrand.push(inner(u, &g2w3)? + (alpha_inf - a) * g2dv);
    }
    Ok(gamma_from_integrand(&rec.times, &integrand))
}

fn gamma_from_integrand(times: &[f64], integrand: &[f64]) -> GammaSeries {
    let gamma = cumulative_integral(times, integrand);
    let hi = gamma.iter().fold(0.0_f64, |m, &v| m.max(v));
    let lo = gamma.iter().fold(0.0_f64, |m, &v| m.min(v));
    GammaSeries {
        times: times.to_vec(),
        gamma,
        sup_abs: hi - lo,
    }
}

/// Data slot of the linear evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataMode {
    /// `(u, u_t)(0) = (0, f)`: `sin(t√H)/√H f`.
    Sin,
    /// `(u, u_t)(0) = (f, 0)`: `cos(t√H) f`.
    Cos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearPotential {
    Free,
    /// `H = −Δ − 5W_h⁴`, with the unstable mode removed from data and flow.
    Soliton,
}

/// Time-independent part of the sin-evolution read off its late window.
#[derive(Debug, Clone)]
pub struct Plateau {
    /// Late-window mean of the projected solution.
    pub field: RadialField,
    /// Per-probe means over the two halves of the late window, relative
    /// spread `max |m₁ − m₂| / max |m|`.
    pub variation: f64,
    /// `|cos∠(plateau, ΛW)|` in `L²(r ≤ 10)`.
    pub lambda_w_similarity: f64,
    pub reliable: bool,
}

#[derive(Debug, Clone)]
pub struct LinearDispersiveReport {
    pub mode: DataMode,
    pub potential: LinearPotential,
    pub probe_radii: Vec<f64>,
    pub dyadic_times: Vec<f64>,
    pub partial: Vec<PartialIntegrals>,
    /// `max_j I(x_j, T)`.
    pub linfl1: f64,
    /// `‖f‖_{W^{1,1}}` for sin, `‖f‖_{W^{2,1}}` for cos.
    pub data_norm: f64,
    pub ratio: f64,
    /// `sup |u(t, 0)|` over the last dyadic half `[T/2, T]`.
    pub origin_late_sup: f64,
    /// `(I(0, T) − I(0, T/2)) / I(0, T/2)`.
    pub origin_saturation: f64,
    pub plateau: Option<Plateau>,
}

/// `4π ∫ (|f| + |f'|) r² dr`.
pub fn w11_norm(f: &RadialField) -> Result<f64> {
    let d1 = derivative(f, DerivativeOrder::First);
    crate::grid::integrate_radial(&f.map(f64::abs).add(&d1.map(f64::abs))?)
}

/// `4π ∫ (|f| + |f'| + |f''|) r² dr`.
pub fn w21_norm(f: &RadialField) -> Result<f64> {
    let d2 = derivative(f, DerivativeOrder::Second);
    Ok(w11_norm(f)? + crate::grid::integrate_radial(&d2.map(f64::abs))?)
}

/// Outermost radius where `f` is nonzero.
fn support_of(f: &RadialField) -> f64 {
    let last = f.values().iter().rposition(|&v| v != 0.0).unwrap_or(0);
    f.grid().r(last)
}

/// Evolves the linear flow from `f`, integrates `|P_c u|` (minus the
/// resonance plateau for sin data under the soliton potential) in time at
/// the probes `{0, R_f/2, R_f, 2R_f}`, and divides the largest integral by
/// the matching data norm.
pub fn linear_dispersive_check(
    f: &RadialField,
    mode: DataMode,
    potential: LinearPotential,
    t_max: f64,
    ctx: &Context,
) -> Result<LinearDispersiveReport> {
    let grid = ctx.grid();
    f.same_grid(&ctx.spectral.g0)?;
    let r_f = support_of(f);
    let g0 = &ctx.spectral.g0;
    let data = match potential {
        LinearPotential::Free => f.clone(),
        LinearPotential::Soliton => project_off_mode(f, g0)?,
    };
    let zero = RadialField::zeros(grid);
    let s0 = match mode {
        DataMode::Sin => WaveState::new(zero, data, 0.0)?,
        DataMode::Cos => WaveState::new(data, zero, 0.0)?,
    };
    let (dynamics, filter) = match potential {
        LinearPotential::Free => (Dynamics::Free, None),
        LinearPotential::Soliton => (
            Dynamics::Potential(ctx.ground.field().map(|w| -5.0 * w.powi(4))),
            Some(g0),
        ),
    };
    let cfg = SolverConfig {
        t_max,
        support_radius: r_f,
        stop_on_outcome: false,
        record_stride: 5,
        ..Default::default()
    };
    let probe_radii = vec![0.0, 0.5 * r_f, r_f, 2.0 * r_f];
    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    let (rec, _) = evolve_observed(&s0, dynamics, filter, &cfg, &[], |s| {
        let u = match potential {
            LinearPotential::Free => s.u.clone(),
            LinearPotential::Soliton => project_off_mode(&s.u, g0).expect("same grid"),
        };
        times.push(s.t);
        snapshots.push(u);
        ControlFlow::Continue(())
    })?;
    if let Outcome::Undetermined { t_reached, reason } = &rec.outcome {
        if *t_reached < t_max - rec.dt {
            return Err(Error::Undetermined {
                t_reached: *t_reached,
                reason: reason.clone(),
            });
        }
    }

    let plateau = match (mode, potential) {
        (DataMode::Sin, LinearPotential::Soliton) => Some(plateau_of(&times, &snapshots, &probe_radii, ctx)?),
        _ => None,
    };
    let t_end = *times.last().expect("t = 0 is recorded");
    let ladder = dyadic_times(t_end);
    let partial: Vec<PartialIntegrals> = probe_radii
        .iter()
        .map(|&x| {
            let offset = plateau.as_ref().map_or(0.0, |p| p.field.sample(x, Exterior::Zero));
            let integrand: Vec<f64> = snapshots
                .iter()
                .map(|u| (u.sample(x, Exterior::Zero) - offset).abs())
                .collect();
            PartialIntegrals::new(x, &times, &integrand, &ladder)
        })
        .collect();
    let linfl1 = partial
        .iter()
        .map(|p| *p.values.last().expect("nonempty ladder"))
        .fold(0.0, f64::max);
    let data_norm = match mode {
        DataMode::Sin => w11_norm(f)?,
        DataMode::Cos => w21_norm(f)?,
    };
    let origin_late_sup = times
        .iter()
        .zip(&snapshots)
        .filter(|(t, _)| **t >= 0.5 * t_end)
        .fold(0.0_f64, |m, (_, u)| m.max(u.values()[0].abs()));
    let origin_saturation = *partial[0].tail_ratios.last().expect("nonempty ladder");
    Ok(LinearDispersiveReport {
        mode,
        potential,
        probe_radii,
        dyadic_times: ladder,
        partial,
        linfl1,
        data_norm,
        ratio: linfl1 / data_norm,
        origin_late_sup,
        origin_saturation,
        plateau,
    })
}

fn plateau_of(times: &[f64], snapshots: &[RadialField], probes: &[f64], ctx: &Context) -> Result<Plateau> {
    let n = times.len();
    let start = 3 * n / 4;
    let mid = start + (n - start) / 2;
    let mean = |range: std::ops::Range<usize>| -> RadialField {
        let len = range.len() as f64;
        let mut acc = RadialField::zeros(*snapshots[0].grid());
        for u in &snapshots[range] {
            acc = acc.add(u).expect("same grid");
        }
        acc.scale(1.0 / len)
    };
    let field = mean(start..n);
    let (a, b) = (mean(start..mid), mean(mid..n));
    let scale = probes
        .iter()
        .map(|&x| field.sample(x, Exterior::Zero).abs())
        .fold(0.0, f64::max);
    let spread = probes
        .iter()
        .map(|&x| (a.sample(x, Exterior::Zero) - b.sample(x, Exterior::Zero)).abs())
        .fold(0.0, f64::max);
    let variation = if scale > 0.0 { spread / scale } else { f64::INFINITY };

    let lw = apply_lambda(ctx.ground.field());
    let within = |f: &RadialField| f.truncated(10.0);
    let (p, l) = (within(&field), within(&lw));
    let denom = (inner(&p, &p)? * inner(&l, &l)?).sqrt();
    let lambda_w_similarity = if denom > 0.0 { inner(&p, &l)?.abs() / denom } else { 0.0 };
    Ok(Plateau {
        field,
        variation,
        lambda_w_similarity,
        reliable: variation <= 0.2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_vanishes_without_radiation() {
        let times: Vec<f64> = (0..50).map(|i| 0.1 * i as f64).collect();
        let g = gamma_from_integrand(&times, &vec![0.0; 50]);
        assert!(g.gamma.iter().all(|&x| x == 0.0));
        assert_eq!(g.sup_abs, 0.0);
    }

    #[test]
    fn gamma_is_additive() {
        let times: Vec<f64> = (0..200).map(|i| 0.05 * i as f64).collect();
        let integrand: Vec<f64> = times.iter().map(|t| (-t).exp() * (3.0 * t).sin()).collect();
        let g = gamma_from_integrand(&times, &integrand);
        let direct: f64 = (60..140).map(|i| 0.5 * (integrand[i] + integrand[i + 1]) * 0.05).sum();
        assert_relative_eq!(g.between(60, 140), direct, epsilon = 1e-14);
        // sup over pairs equals the range of Γ(0,·)
        let mut brute = 0.0_f64;
        for s in 0..times.len() {
            for t in s..times.len() {
                brute = brute.max(g.between(s, t).abs());
            }
        }
        assert_relative_eq!(g.sup_abs, brute, epsilon = 1e-15);
    }

    #[test]
    fn dyadic_ladder_and_partial_integrals() {
        assert_eq!(dyadic_times(16.0), vec![2.0, 4.0, 8.0, 16.0]);
        let times: Vec<f64> = (0..=1600).map(|i| 0.01 * i as f64).collect();
        // ∫₀^T e^{−t} dt = 1 − e^{−T}
        let vals: Vec<f64> = times.iter().map(|t| (-t).exp()).collect();
        let p = PartialIntegrals::new(0.0, &times, &vals, &dyadic_times(16.0));
        for (v, t) in p.values.iter().zip([2.0, 4.0, 8.0, 16.0_f64]) {
            assert_relative_eq!(*v, 1.0 - (-t).exp(), epsilon = 1e-4);
        }
        assert!(p.converges(0.3));
        // ∫₀^T dt/(1+t) grows without bound: ratios stay near log 2 / log T
        let vals: Vec<f64> = times.iter().map(|t| 1.0 / (1.0 + t)).collect();
        let p = PartialIntegrals::new(0.0, &times, &vals, &dyadic_times(16.0));
        assert!(!p.converges(0.2));
    }

    #[test]
    fn sobolev_l1_norms_of_a_bump() {
        use crate::experiments::Bump;
        use crate::grid::RadialGrid;
        let grid = RadialGrid::with_extent(4.0, 0.001).unwrap();
        let b = Bump::new(1.0, 0.0, 1.0).unwrap();
        let f = RadialField::from_fn(grid, |r| b.eval(r));
        let n1 = w11_norm(&f).unwrap();
        let n2 = w21_norm(&f).unwrap();
        // scaling: W^{1,1} of f(μ·) has an L¹ part scaling μ⁻³ and a gradient part μ⁻²
        let fm = RadialField::from_fn(grid, |r| b.eval(2.0 * r));
        let l1 = crate::grid::integrate_radial(&f.map(f64::abs)).unwrap();
        let l1m = crate::grid::integrate_radial(&fm.map(f64::abs)).unwrap();
        assert_relative_eq!(l1m, l1 / 8.0, max_relative = 1e-6);
        let grad = n1 - l1;
        let gradm = w11_norm(&fm).unwrap() - l1m;
        assert_relative_eq!(gradm, grad / 4.0, max_relative = 1e-4);
        assert!(n2 > n1);
    }
}
