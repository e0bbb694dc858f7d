//! Subcommand runners. Each writes only inside its output directory and
//! returns the list of files it produced.

use std::io;
use std::ops::ControlFlow;
use std::path::Path;

use quintic_core::diagnostics::{
    linear_dispersive_check, measure_radiation, record_radiation, DataMode, LinearDispersiveReport, LinearPotential,
    PartialIntegrals,
};
use quintic_core::experiments::{
    bootstrap_check, build_initial_state, exit_time_law, find_threshold, hscaling, make_tangent_data, measure_ejection,
    Bump, Context, DataFamily, FramePoint, ThresholdResult,
};
use quintic_core::grid::{norms, RadialField, RadialGrid, WaveState};
use quintic_core::ground_state::{apply_lambda, energy};
use quintic_core::solver::{evolve_observed, Dynamics, Outcome, SolverConfig};
use quintic_core::spectrum::{compute_ground_spectrum, Method};
use quintic_core::Error;

use crate::config::{ConfigError, RunConfig};
use crate::output::{real, RunDir};
use crate::svg::{Plot, Series, Style};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Evolve,
    Threshold,
    Ejection,
    Bootstrap,
    Hscaling,
    Dispersive,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Threshold => "threshold",
            Command::Ejection => "ejection",
            Command::Bootstrap => "bootstrap",
            Command::Hscaling => "hscaling",
            Command::Dispersive => "dispersive",
        }
    }

    /// Commands whose experiment is meaningless for the zero family.
    pub fn needs_family(self) -> bool {
        matches!(self, Command::Hscaling | Command::Dispersive)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("classification undetermined: {0}")]
    Undetermined(String),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("output error: {0}")]
    Io(#[from] io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Undetermined { .. } => CliError::Undetermined(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Undetermined(_) => 3,
            CliError::Numerical(_) | CliError::Io(_) => 4,
        }
    }
}

/// Family after projection, normalization and scaling.
pub fn resolve_family(cfg: &RunConfig, ctx: &Context) -> quintic_core::Result<DataFamily> {
    let mut fam = cfg.raw_family()?;
    if cfg.family.project {
        fam = make_tangent_data(&fam, &ctx.spectral)?;
    }
    if cfg.family.normalize {
        fam = fam.scaled(1.0 / fam.norm(&ctx.spectral));
    }
    Ok(fam.scaled(cfg.family.scale))
}

/// Runs `cmd` into `out`; returns the files written.
pub fn run(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let ctx = Context::new(cfg.grid()?)?;
    let mut dir = RunDir::create(out)?;
    let pending = match cmd {
        Command::Spectrum => spectrum(&ctx, &mut dir),
        Command::Evolve => evolve(cfg, &ctx, &mut dir),
        Command::Threshold => threshold(cfg, &ctx, &mut dir),
        Command::Ejection => ejection(cfg, &ctx, &mut dir),
        Command::Bootstrap => bootstrap(cfg, &ctx, &mut dir),
        Command::Hscaling => scaling(cfg, &ctx, &mut dir),
        Command::Dispersive => dispersive(cfg, &ctx, &mut dir),
    }?;
    let files = dir.manifest(cmd.name(), cfg, &ctx.spectral)?;
    match pending {
        Some(reason) => Err(CliError::Undetermined(reason)),
        None => Ok(files),
    }
}

/// `Some(reason)` when outputs were written but the run ended undetermined.
type Pending = Result<Option<String>, CliError>;

fn spectrum(ctx: &Context, dir: &mut RunDir) -> Pending {
    let grid = ctx.grid();
    let sd = &ctx.spectral;
    let shooting = compute_ground_spectrum(grid, Method::Shooting)?;
    let row = |s: &quintic_core::spectrum::SpectralData| {
        vec![
            format!("{:?}", s.method).to_lowercase(),
            real(s.k0),
            real(s.residual_eig),
            real(s.residual_res),
            s.negative_count.to_string(),
        ]
    };
    dir.csv(
        "certificate.csv",
        &[
            "method",
            "k0",
            "eigen_residual",
            "resonance_residual",
            "negative_eigenvalues",
        ],
        [row(sd), row(&shooting)],
    )?;
    let w = ctx.ground.field();
    let lw = apply_lambda(w);
    let rows = (0..grid.n_points()).map(|i| {
        vec![
            real(grid.r(i)),
            real(w.values()[i]),
            real(sd.g0.values()[i]),
            real(shooting.g0.values()[i]),
            real(lw.values()[i]),
        ]
    });
    dir.csv(
        "spectrum.csv",
        &["r", "w_h", "g0_matrix", "g0_shooting", "lambda_w"],
        rows,
    )?;
    let r_plot = 20.0_f64.min(grid.r_max());
    let n = grid.index_at_or_below(r_plot);
    let curve = |f: &RadialField| (0..=n).map(|i| (grid.r(i), f.values()[i])).collect();
    let plot = Plot::new(&format!("unstable mode, k0 = {:.6}", sd.k0), "r", "g0")
        .with(Series::new("matrix", curve(&sd.g0), Style::Line))
        .with(Series::new("shooting", curve(&shooting.g0), Style::Dashed));
    dir.svg("mode.svg", &plot)?;
    Ok(None)
}

const TRAJECTORY_HEADER: [&str; 9] = [
    "t",
    "energy",
    "sup_norm",
    "alpha",
    "delta",
    "v_l2",
    "v_h1",
    "v_h2",
    "outcome_flag",
];

/// Nonlinear run with frames where the decomposition succeeds (NaN
/// elsewhere).
fn framed_rows(s0: &WaveState, ctx: &Context, scfg: &SolverConfig) -> quintic_core::Result<(Vec<FramePoint>, Outcome)> {
    let mut alpha = 1.0;
    let mut points = Vec::new();
    let (rec, _) = evolve_observed(s0, Dynamics::Nonlinear, None, scfg, &[], |s| {
        let mut p = FramePoint {
            t: s.t,
            energy: energy(s),
            sup: s.u.sup(),
            alpha: f64::NAN,
            delta: f64::NAN,
            ortho_residual: f64::NAN,
            v_l2: f64::NAN,
            v_h1: f64::NAN,
            v_h2: f64::NAN,
        };
        if let Ok(f) = ctx.modulator.decompose(&s.u, alpha) {
            alpha = f.alpha;
            p.alpha = f.alpha;
            p.delta = f.delta;
            p.ortho_residual = f.ortho_residual;
            if let Ok(n) = norms(&f.v) {
                (p.v_l2, p.v_h1, p.v_h2) = (n.l2, n.h1_seminorm, n.h2);
            }
        }
        points.push(p);
        ControlFlow::Continue(())
    })?;
    Ok((points, rec.outcome))
}

fn trajectory_rows(points: &[FramePoint], outcome: &Outcome) -> Vec<Vec<String>> {
    let decided_at = match outcome {
        Outcome::Undetermined { .. } => f64::INFINITY,
        o => o.time(),
    };
    points
        .iter()
        .map(|p| {
            let flag = if p.t >= decided_at { outcome.flag() } else { 0 };
            vec![
                real(p.t),
                real(p.energy),
                real(p.sup),
                real(p.alpha),
                real(p.delta),
                real(p.v_l2),
                real(p.v_h1),
                real(p.v_h2),
                flag.to_string(),
            ]
        })
        .collect()
}

fn abs_delta(points: &[FramePoint]) -> Vec<(f64, f64)> {
    points
        .iter()
        .filter(|p| p.delta.is_finite() && p.delta != 0.0)
        .map(|p| (p.t, p.delta.abs()))
        .collect()
}

fn evolve(cfg: &RunConfig, ctx: &Context, dir: &mut RunDir) -> Pending {
    let fam = resolve_family(cfg, ctx)?;
    let s0 = build_initial_state(&fam, cfg.evolve.c, ctx)?;
    let (points, outcome) = framed_rows(&s0, ctx, &cfg.solver_config())?;
    dir.csv("trajectory.csv", &TRAJECTORY_HEADER, trajectory_rows(&points, &outcome))?;
    let plot = Plot::new(
        &format!("c = {:e}: {}", cfg.evolve.c, outcome_name(&outcome)),
        "t",
        "|delta|",
    )
    .log_y()
    .with(Series::new("|delta(t)|", abs_delta(&points), Style::Line));
    dir.svg("delta_log.svg", &plot)?;
    Ok(match outcome {
        Outcome::Undetermined { t_reached, reason } => Some(format!("t = {t_reached}: {reason}")),
        _ => None,
    })
}

fn outcome_name(o: &Outcome) -> &'static str {
    match o {
        Outcome::Blowup { .. } => "blowup",
        Outcome::Decay { .. } => "decay",
        Outcome::Undetermined { .. } => "undetermined",
    }
}

fn threshold_of(cfg: &RunConfig, fam: &DataFamily, ctx: &Context) -> quintic_core::Result<ThresholdResult> {
    let t = &cfg.threshold;
    find_threshold(
        fam,
        (t.bracket[0], t.bracket[1]),
        t.tol,
        ctx,
        &cfg.solver_config(),
        t.monotonicity_probes,
    )
}

const THRESHOLD_HEADER: [&str; 11] = [
    "h_star",
    "c_lo",
    "c_hi",
    "bracket_width",
    "runs",
    "upper_flag",
    "upper_time",
    "lower_flag",
    "lower_time",
    "family_norm",
    "monotonicity_violations",
];

fn threshold_row(thr: &ThresholdResult) -> Vec<String> {
    vec![
        real(thr.h_star),
        real(thr.c_lo),
        real(thr.c_hi),
        real(thr.bracket_width),
        thr.runs.to_string(),
        thr.upper_outcome.flag().to_string(),
        real(thr.upper_outcome.time()),
        thr.lower_outcome.flag().to_string(),
        real(thr.lower_outcome.time()),
        real(thr.family_norm),
        thr.monotonicity_violations.len().to_string(),
    ]
}

fn threshold(cfg: &RunConfig, ctx: &Context, dir: &mut RunDir) -> Pending {
    let fam = resolve_family(cfg, ctx)?;
    let thr = threshold_of(cfg, &fam, ctx)?;
    dir.csv("threshold.csv", &THRESHOLD_HEADER, [threshold_row(&thr)])?;
    let mut plot = Plot::new(&format!("threshold h* = {:.6e}", thr.h_star), "t", "|delta|").log_y();
    for (label, c) in [("upper endpoint", thr.c_hi), ("lower endpoint", thr.c_lo)] {
        let s0 = build_initial_state(&fam, c, ctx)?;
        let (points, _) = framed_rows(&s0, ctx, &cfg.solver_config())?;
        plot = plot.with(Series::new(label, abs_delta(&points), Style::Line));
    }
    dir.svg("delta_log.svg", &plot)?;
    Ok(None)
}

fn ejection(cfg: &RunConfig, ctx: &Context, dir: &mut RunDir) -> Pending {
    let fam = resolve_family(cfg, ctx)?;
    let scfg = cfg.solver_config();
    let thr = threshold_of(cfg, &fam, ctx)?;
    let results = cfg
        .ejection
        .offsets
        .iter()
        .map(|&c| measure_ejection(&fam, c, &thr, ctx, &scfg))
        .collect::<quintic_core::Result<Vec<_>>>()?;
    let k0 = ctx.spectral.k0;
    dir.csv(
        "ejection.csv",
        &[
            "c_offset",
            "k_fit",
            "r_squared",
            "window_start",
            "window_end",
            "exit_time",
            "alpha_inf",
            "alpha_perturbed",
            "relative_rate_error",
            "sign_consistent",
        ],
        results.iter().map(|e| {
            vec![
                real(e.c_offset),
                real(e.k_fit),
                real(e.fit.r_squared),
                real(e.window.0),
                real(e.window.1),
                real(e.exit_time),
                real(e.alpha_inf),
                real(e.alpha_perturbed),
                real((e.k_fit - e.alpha_inf * k0).abs() / k0),
                e.sign_consistent.to_string(),
            ]
        }),
    )?;
    dir.csv(
        "delta_series.csv",
        &["c_offset", "t", "delta"],
        results.iter().flat_map(|e| {
            e.series
                .iter()
                .map(move |p| vec![real(e.c_offset), real(p.t), real(p.delta)])
        }),
    )?;
    // the law needs at least two distinct offset magnitudes
    let mut mags: Vec<f64> = results.iter().map(|e| e.c_offset.abs()).collect();
    mags.sort_by(f64::total_cmp);
    mags.dedup();
    let law_row = if mags.len() >= 2 {
        let law = exit_time_law(&results)?;
        vec![
            real(law.slope),
            real(law.intercept),
            real(law.r_squared),
            law.n.to_string(),
        ]
    } else {
        vec![
            real(f64::NAN),
            real(f64::NAN),
            real(f64::NAN),
            results.len().to_string(),
        ]
    };
    dir.csv(
        "exit_law.csv",
        &["slope", "intercept", "r_squared", "n", "inverse_k0"],
        [[law_row, vec![real(1.0 / k0)]].concat()],
    )?;
    let mut plot = Plot::new("ejection: |delta(t)| and fitted rates", "t", "|delta|").log_y();
    for e in &results {
        plot = plot.with(Series::new(
            format!("c = {:e}", e.c_offset),
            abs_delta(&e.series),
            Style::Line,
        ));
        let line = [e.window.0, e.window.1]
            .iter()
            .map(|&t| (t, (e.fit.intercept + e.fit.slope * t).exp()))
            .collect();
        plot = plot.with(Series::new(format!("k = {:.4}", e.k_fit), line, Style::Dashed));
    }
    dir.svg("delta_log.svg", &plot)?;
    Ok(None)
}

fn bootstrap(cfg: &RunConfig, ctx: &Context, dir: &mut RunDir) -> Pending {
    let fam = resolve_family(cfg, ctx)?;
    let thr = threshold_of(cfg, &fam, ctx)?;
    let rep = bootstrap_check(&fam, cfg.bootstrap.offset, &thr, ctx, &cfg.solver_config())?;
    dir.csv(
        "bootstrap.csv",
        &["t", "delta", "eta_tilde", "rho", "n_plus", "n_minus", "reference_delta"],
        rep.points.iter().map(|p| {
            vec![
                real(p.t),
                real(p.delta),
                real(p.eta_tilde),
                real(p.rho),
                real(p.n_plus),
                real(p.n_minus),
                real(p.reference_delta),
            ]
        }),
    )?;
    dir.csv(
        "bootstrap_summary.csv",
        &[
            "c_offset",
            "window_start",
            "window_end",
            "sup_rho",
            "sup_n_ratio",
            "rho_tolerance",
            "n_ratio_tolerance",
            "passes",
        ],
        [vec![
            real(rep.c_offset),
            real(rep.window.0),
            real(rep.window.1),
            real(rep.sup_rho),
            real(rep.sup_n_ratio),
            real(rep.rho_tolerance),
            real(rep.n_ratio_tolerance),
            rep.passes().to_string(),
        ]],
    )?;
    let in_window = |p: &&quintic_core::experiments::BootstrapPoint| p.t >= rep.window.0 && p.t <= rep.window.1;
    let plot = Plot::new("paired runs: rho(t) on the ejection window", "t", "ratio")
        .log_y()
        .with(Series::new(
            "rho",
            rep.points.iter().filter(in_window).map(|p| (p.t, p.rho)).collect(),
            Style::Line,
        ))
        .with(Series::new(
            "|n-/n+|",
            rep.points
                .iter()
                .filter(in_window)
                .map(|p| (p.t, (p.n_minus / p.n_plus).abs()))
                .collect(),
            Style::Dashed,
        ));
    dir.svg("rho.svg", &plot)?;
    Ok(None)
}

fn scaling(cfg: &RunConfig, ctx: &Context, dir: &mut RunDir) -> Pending {
    let fam = resolve_family(cfg, ctx)?;
    let h = &cfg.hscaling;
    let rep = hscaling(
        &fam,
        &h.eps,
        (h.bracket[0], h.bracket[1]),
        h.tol,
        ctx,
        &cfg.solver_config(),
    )?;
    dir.csv(
        "hscaling.csv",
        &["eps", "family_norm", "h_star", "c_lo", "c_hi", "bracket_width", "runs"],
        rep.eps.iter().zip(&rep.thresholds).map(|(e, t)| {
            vec![
                real(*e),
                real(t.family_norm),
                real(t.h_star),
                real(t.c_lo),
                real(t.c_hi),
                real(t.bracket_width),
                t.runs.to_string(),
            ]
        }),
    )?;
    dir.csv(
        "hscaling_fit.csv",
        &["slope", "intercept", "r_squared", "n"],
        [vec![
            real(rep.fit.slope),
            real(rep.fit.intercept),
            real(rep.fit.r_squared),
            rep.fit.n.to_string(),
        ]],
    )?;
    let data = rep
        .eps
        .iter()
        .zip(&rep.thresholds)
        .map(|(e, t)| (*e, t.h_star.abs()))
        .collect();
    let ends = [rep.eps[0], rep.eps[rep.eps.len() - 1]];
    let fit = ends
        .iter()
        .map(|&e| (e, (rep.fit.intercept + rep.fit.slope * e.ln()).exp()))
        .collect();
    let plot = Plot::new(&format!("|h*| vs eps, slope {:.4}", rep.fit.slope), "eps", "|h*|")
        .log_x()
        .log_y()
        .with(Series::new("bisected", data, Style::Points))
        .with(Series::new("fit", fit, Style::Dashed));
    dir.svg("hscaling.svg", &plot)?;
    Ok(None)
}

fn partial_rows(source: &str, ladder: &[f64], partial: &[PartialIntegrals]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for p in partial {
        for (k, (&t, &v)) in ladder.iter().zip(&p.values).enumerate() {
            let ratio = if k == 0 { f64::NAN } else { p.tail_ratios[k - 1] };
            rows.push(vec![source.to_string(), real(p.radius), real(t), real(v), real(ratio)]);
        }
    }
    rows
}

fn dispersive(cfg: &RunConfig, ctx: &Context, dir: &mut RunDir) -> Pending {
    let d = &cfg.dispersive;
    let scfg = cfg.solver_config();
    let fam = resolve_family(cfg, ctx)?;
    let thr = find_threshold(&fam, (d.bracket[0], d.bracket[1]), d.tol, ctx, &scfg, 0)?;
    let rec = record_radiation(&fam, thr.h_star, d.delta_cap, ctx, &scfg)?;
    let rep = measure_radiation(&rec, d.fit_start, ctx)?;
    dir.csv(
        "radiation.csv",
        &["t", "alpha", "delta", "sup_u_star", "a_avg", "gamma"],
        (0..rec.times.len()).map(|i| {
            vec![
                real(rec.times[i]),
                real(rec.alpha[i]),
                real(rec.delta[i]),
                real(rep.sup_series[i].1),
                real(rep.a_avg_series[i].1),
                real(rep.gamma.gamma[i]),
            ]
        }),
    )?;
    let summary = [
        ("h_star", thr.h_star),
        ("bracket_width", thr.bracket_width),
        ("t_end", rep.fit_window.1),
        ("sup_decay_slope", rep.sup_decay_slope),
        ("sup_decay_r_squared", rep.sup_decay_fit.r_squared),
        ("alpha_inf", rep.alpha_inf),
        ("a_avg_sup", rep.a_avg_sup),
        ("a_weighted_sup", rep.a_weighted_sup),
        ("a_avg_growth", rep.a_avg_growth),
        ("gamma_sup", rep.gamma.sup_abs),
    ];
    dir.csv(
        "radiation_summary.csv",
        &["quantity", "value"],
        summary.iter().map(|(k, v)| vec![k.to_string(), real(*v)]),
    )?;

    let linear = linear_suite(cfg)?;
    let mut partial = partial_rows("radiation", &rep.dyadic_times, &rep.linfl1_partial);
    for (label, _, r) in &linear {
        partial.extend(partial_rows(label, &r.dyadic_times, &r.partial));
    }
    dir.csv(
        "partials.csv",
        &["source", "probe", "t", "integral", "tail_ratio"],
        partial,
    )?;
    dir.csv(
        "linear.csv",
        &[
            "source",
            "mu",
            "linfl1",
            "data_norm",
            "ratio",
            "origin_late_sup",
            "origin_saturation",
            "plateau_variation",
            "plateau_similarity",
        ],
        linear.iter().map(|(label, mu, r)| {
            let (var, sim) = r
                .plateau
                .as_ref()
                .map_or((f64::NAN, f64::NAN), |p| (p.variation, p.lambda_w_similarity));
            vec![
                label.clone(),
                real(*mu),
                real(r.linfl1),
                real(r.data_norm),
                real(r.ratio),
                real(r.origin_late_sup),
                real(r.origin_saturation),
                real(var),
                real(sim),
            ]
        }),
    )?;

    let fitted = [rep.fit_window.0, rep.fit_window.1]
        .iter()
        .map(|&t| {
            (
                t,
                (rep.sup_decay_fit.intercept + rep.sup_decay_fit.slope * t.ln()).exp(),
            )
        })
        .collect();
    let decay = Plot::new(
        &format!("sup |u*| decay, slope {:.3}", rep.sup_decay_slope),
        "t",
        "sup |u*|",
    )
    .log_x()
    .log_y()
    .with(Series::new(
        "sup |u*|",
        rep.sup_series.iter().filter(|(t, _)| *t > 0.0).copied().collect(),
        Style::Line,
    ))
    .with(Series::new("fit", fitted, Style::Dashed));
    dir.svg("decay.svg", &decay)?;
    let mut stairs = Plot::new("partial L1-in-time integrals at probe radii", "T", "I(x, T)").log_y();
    for p in &rep.linfl1_partial {
        let mut pts = Vec::new();
        let mut prev = 0.0;
        for (&t, &v) in rep.dyadic_times.iter().zip(&p.values) {
            pts.push((prev, v));
            pts.push((t, v));
            prev = t;
        }
        stairs = stairs.with(Series::new(format!("x = {}", p.radius), pts, Style::Line));
    }
    dir.svg("partials.svg", &stairs)?;
    Ok(None)
}

/// Free sin/cos under dilation and soliton-potential sin/cos for a
/// centered bump, on a grid sized for `linear_t_max`.
pub fn linear_suite(cfg: &RunConfig) -> Result<Vec<(String, f64, LinearDispersiveReport)>, CliError> {
    let d = &cfg.dispersive;
    let widest = d.dilations.iter().fold(1.0_f64, |m, &mu| m.max(1.0 / mu)) * d.linear_width;
    let grid = RadialGrid::with_extent((d.linear_t_max + 2.0 * widest + 10.0).max(20.0), cfg.grid.dr)?;
    let ctx = Context::new(grid)?;
    let bump = |mu: f64| -> quintic_core::Result<RadialField> {
        let b = Bump::new(1.0, 0.0, d.linear_width / mu)?;
        Ok(RadialField::from_fn(grid, move |r| b.eval(r)))
    };
    let mut out = Vec::new();
    for &mu in &d.dilations {
        for (mode, name) in [(DataMode::Sin, "sin"), (DataMode::Cos, "cos")] {
            let r = linear_dispersive_check(&bump(mu)?, mode, LinearPotential::Free, d.linear_t_max, &ctx)?;
            out.push((format!("free_{name}"), mu, r));
        }
    }
    for (mode, name) in [(DataMode::Sin, "sin"), (DataMode::Cos, "cos")] {
        let r = linear_dispersive_check(&bump(1.0)?, mode, LinearPotential::Soliton, d.linear_t_max, &ctx)?;
        out.push((format!("soliton_{name}"), 1.0, r));
    }
    Ok(out)
}
