//! Run configuration: line-oriented `key = value` text with `[section]`
//! headers and `#` comments, every key optional with a documented default.

use serde::{Deserialize, Serialize};

use quintic_core::experiments::{Bump, DataFamily};
use quintic_core::grid::RadialGrid;
use quintic_core::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    /// 1-based line of the offending entry, 0 when it has no single line.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Node spacing.
    pub dr: f64,
    /// Number of nodes; 0 sizes the grid to the causal window of the run.
    pub n_points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { dr: 0.02, n_points: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub cfl: f64,
    pub t_max: f64,
    pub blowup_sup_threshold: f64,
    pub decay_local_energy_threshold: f64,
    pub decay_sup_threshold: f64,
    pub dwell: f64,
    pub causal_margin: f64,
    pub record_stride: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            cfl: d.cfl,
            t_max: d.t_max,
            blowup_sup_threshold: d.blowup_sup_threshold,
            decay_local_energy_threshold: d.decay_local_energy_threshold,
            decay_sup_threshold: d.decay_sup_threshold,
            dwell: d.dwell,
            causal_margin: d.causal_margin,
            record_stride: d.record_stride,
        }
    }
}

/// Bumps are `[amplitude, center, width]` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilySection {
    pub support_radius: f64,
    pub f1: Vec<[f64; 3]>,
    pub f2: Vec<[f64; 3]>,
    /// Apply the tangent-plane projection.
    pub project: bool,
    /// Rescale to unit data norm before `scale` is applied.
    pub normalize: bool,
    pub scale: f64,
}

impl Default for FamilySection {
    fn default() -> Self {
        Self {
            support_radius: 15.0,
            f1: Vec::new(),
            f2: Vec::new(),
            project: true,
            normalize: false,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSection {
    pub bracket: [f64; 2],
    pub tol: f64,
    pub monotonicity_probes: usize,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            bracket: [-0.02, 0.02],
            tol: 1e-10,
            monotonicity_probes: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSection {
    /// Coefficient of `g₀χ_R` in the initial data.
    pub c: f64,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self { c: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EjectionSection {
    pub offsets: Vec<f64>,
}

impl Default for EjectionSection {
    fn default() -> Self {
        Self {
            offsets: vec![1e-7, 1e-6, 1e-5, -1e-7, -1e-6, -1e-5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapSection {
    pub offset: f64,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        Self { offset: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HscalingSection {
    pub eps: Vec<f64>,
    pub bracket: [f64; 2],
    pub tol: f64,
}

impl Default for HscalingSection {
    fn default() -> Self {
        Self {
            eps: vec![0.05, 0.1, 0.2],
            bracket: [-0.05, 0.05],
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispersiveSection {
    /// Threshold bracket and tolerance for the radiation trajectory.
    pub bracket: [f64; 2],
    pub tol: f64,
    /// Recording stops once a growing `|δ|` exceeds this.
    pub delta_cap: f64,
    /// Start of the sup-norm decay fit.
    pub fit_start: f64,
    /// Width of the centered bump used for the linear checks.
    pub linear_width: f64,
    pub linear_t_max: f64,
    pub dilations: Vec<f64>,
}

impl Default for DispersiveSection {
    fn default() -> Self {
        Self {
            bracket: [-1e-3, 1e-3],
            tol: 1e-14,
            delta_cap: 1e-6,
            fit_start: 5.0,
            linear_width: 1.0,
            linear_t_max: 40.0,
            dilations: vec![0.5, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSection,
    pub solver: SolverSection,
    pub family: FamilySection,
    pub threshold: ThresholdSection,
    pub evolve: EvolveSection,
    pub ejection: EjectionSection,
    pub bootstrap: BootstrapSection,
    pub hscaling: HscalingSection,
    pub dispersive: DispersiveSection,
    pub output: OutputSection,
}

/// Parses and validates a configuration; absent keys keep their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map_or(0, |s| line_at(text, s.start)),
        message: e.message().to_string(),
    })?;
    cfg.validate(text)?;
    Ok(cfg)
}

/// [`parse_config`] plus the requirements of one subcommand: the scaling
/// and dispersive experiments need a nonzero family.
pub fn parse_config_for(text: &str, needs_family: bool) -> Result<RunConfig, ConfigError> {
    let cfg = parse_config(text)?;
    if needs_family && cfg.family.f1.is_empty() && cfg.family.f2.is_empty() {
        return Err(ConfigError {
            line: line_of_key(text, "family.f1"),
            message: "family: this experiment needs a nonzero family (f1 or f2)".into(),
        });
    }
    Ok(cfg)
}

impl RunConfig {
    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let fail = |key: &str, message: &str| {
            Err(ConfigError {
                line: line_of_key(text, key),
                message: format!("{key}: {message}"),
            })
        };
        let s = &self.solver;
        if !(self.grid.dr > 0.0 && self.grid.dr.is_finite()) {
            return fail("grid.dr", "must be positive");
        }
        if self.grid.n_points != 0 && self.grid.n_points < 8 {
            return fail("grid.n_points", "needs at least 8 nodes (or 0 for automatic)");
        }
        if !(s.cfl > 0.0 && s.cfl <= 1.0) {
            return fail("solver.cfl", "cfl out of (0,1]");
        }
        if !(s.t_max > 0.0 && s.t_max.is_finite()) {
            return fail("solver.t_max", "must be positive");
        }
        if s.record_stride == 0 {
            return fail("solver.record_stride", "must be positive");
        }
        for (key, v) in [
            ("solver.blowup_sup_threshold", s.blowup_sup_threshold),
            ("solver.decay_local_energy_threshold", s.decay_local_energy_threshold),
            ("solver.decay_sup_threshold", s.decay_sup_threshold),
        ] {
            if !(v > 0.0) {
                return fail(key, "must be positive");
            }
        }
        if !(s.dwell >= 0.0 && s.causal_margin >= 0.0) {
            return fail("solver.dwell", "dwell and causal_margin must be non-negative");
        }
        let f = &self.family;
        if !(f.support_radius > 0.0) {
            return fail("family.support_radius", "must be positive");
        }
        for (key, list) in [("family.f1", &f.f1), ("family.f2", &f.f2)] {
            for b in list {
                if let Err(e) = Bump::new(b[0], b[1], b[2]) {
                    return fail(key, &e.to_string());
                }
                if b[1] + b[2] > f.support_radius {
                    return fail(key, "bump reaches past family.support_radius");
                }
            }
        }
        if f.normalize && f.f1.is_empty() && f.f2.is_empty() {
            return fail("family.normalize", "the zero family cannot be normalized");
        }
        for (key, b) in [
            ("threshold.bracket", self.threshold.bracket),
            ("hscaling.bracket", self.hscaling.bracket),
            ("dispersive.bracket", self.dispersive.bracket),
        ] {
            if !(b[0] < b[1]) {
                return fail(key, "needs lower < upper");
            }
        }
        for (key, v) in [
            ("threshold.tol", self.threshold.tol),
            ("hscaling.tol", self.hscaling.tol),
            ("dispersive.tol", self.dispersive.tol),
            ("dispersive.delta_cap", self.dispersive.delta_cap),
            ("dispersive.linear_width", self.dispersive.linear_width),
            ("dispersive.linear_t_max", self.dispersive.linear_t_max),
            ("bootstrap.offset", self.bootstrap.offset.abs()),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(key, "must be positive");
            }
        }
        if self.ejection.offsets.iter().any(|&c| c == 0.0 || !c.is_finite()) {
            return fail("ejection.offsets", "offsets must be nonzero");
        }
        if self.hscaling.eps.len() < 2 || self.hscaling.eps.iter().any(|&e| !(e > 0.0)) {
            return fail("hscaling.eps", "needs at least two positive scales");
        }
        if self.dispersive.dilations.iter().any(|&m| !(m > 0.0)) {
            return fail("dispersive.dilations", "must be positive");
        }
        if self.output.dir.is_empty() {
            return fail("output.dir", "must not be empty");
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            cfl: s.cfl,
            t_max: s.t_max,
            blowup_sup_threshold: s.blowup_sup_threshold,
            decay_local_energy_threshold: s.decay_local_energy_threshold,
            decay_sup_threshold: s.decay_sup_threshold,
            dwell: s.dwell,
            causal_margin: s.causal_margin,
            support_radius: self.family.support_radius,
            record_stride: s.record_stride,
            stop_on_outcome: true,
        }
    }

    /// The configured grid, or one just large enough for the causal window.
    pub fn grid(&self) -> quintic_core::Result<RadialGrid> {
        if self.grid.n_points > 0 {
            RadialGrid::new(self.grid.n_points, self.grid.dr)
        } else {
            RadialGrid::with_extent(self.solver_config().required_r_max(), self.grid.dr)
        }
    }

    /// The family before projection and scaling.
    pub fn raw_family(&self) -> quintic_core::Result<DataFamily> {
        let bumps = |v: &[[f64; 3]]| {
            v.iter()
                .map(|b| Bump::new(b[0], b[1], b[2]))
                .collect::<quintic_core::Result<Vec<_>>>()
        };
        let f = &self.family;
        if f.f1.is_empty() && f.f2.is_empty() {
            return Ok(DataFamily::zero(f.support_radius));
        }
        DataFamily::new(bumps(&f.f1)?, bumps(&f.f2)?, f.support_radius)
    }
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line defining `section.key` (under `[section]` or dotted), else the line
/// of the section header, else 0.
fn line_of_key(text: &str, dotted: &str) -> usize {
    let section = dotted.split_once('.').map_or("", |(s, _)| s);
    let mut current = String::new();
    let mut header = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = i + 1;
            }
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else {
            continue;
        };
        let lhs: String = lhs.split('.').map(str::trim).collect::<Vec<_>>().join(".");
        let full = if current.is_empty() {
            lhs
        } else {
            format!("{current}.{lhs}")
        };
        if full == dotted {
            return i + 1;
        }
    }
    header
}
