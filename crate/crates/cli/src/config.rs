//! Experiment configuration: a TOML document with a frozen schema.
//!
//! Every key is validated before any computation starts; unknown keys and
//! out-of-range values are reported with the line they appear on.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Audit,
    ResonanceScan,
    Decay,
    Born,
    ResolventNorms,
    Statphase,
    IbpCheck,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Audit => "audit",
            Command::ResonanceScan => "resonance-scan",
            Command::Decay => "decay",
            Command::Born => "born",
            Command::ResolventNorms => "resolvent-norms",
            Command::Statphase => "statphase",
            Command::IbpCheck => "ibp-check",
        }
    }

    fn section(&self) -> &'static str {
        match self {
            Command::Audit => "audit",
            Command::ResonanceScan => "resonance",
            Command::Decay => "decay",
            Command::Born => "born",
            Command::ResolventNorms => "norms",
            Command::Statphase => "statphase",
            Command::IbpCheck => "ibp",
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    #[serde(default)]
    pub audit: Option<AuditConfig>,
    #[serde(default)]
    pub resonance: Option<ResonanceConfig>,
    #[serde(default)]
    pub decay: Option<DecayConfig>,
    #[serde(default)]
    pub born: Option<BornConfig>,
    #[serde(default)]
    pub norms: Option<NormsConfig>,
    #[serde(default)]
    pub statphase: Option<StatphaseConfig>,
    #[serde(default)]
    pub ibp: Option<IbpConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKindConfig {
    Radial,
    Box,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub kind: GridKindConfig,
    /// `r_max` (radial) or the half-width of the cube (box).
    pub extent: f64,
    /// Shells (radial) or nodes per axis (box).
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Zero,
    Well,
    Power,
    Gaussian,
    Table,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(rename = "type")]
    pub kind: PotentialKind,
    pub depth: Option<f64>,
    pub radius: Option<f64>,
    pub alpha: Option<f64>,
    pub strength: Option<f64>,
    pub width: Option<f64>,
    pub path: Option<PathBuf>,
    pub epsilon: Option<f64>,
    /// Translation of the potential (box grids only).
    pub center: Option<[f64; 3]>,
}

/// Either an explicit list or `{ min, max, count, log }`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Sweep {
    List(Vec<f64>),
    Range(SweepRange),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub log: bool,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::List(v) => v.clone(),
            Sweep::Range(r) if r.count == 1 => vec![r.min],
            Sweep::Range(r) => (0..r.count)
                .map(|k| {
                    let s = k as f64 / (r.count - 1) as f64;
                    if r.log {
                        r.min * (r.max / r.min).powf(s)
                    } else {
                        r.min + s * (r.max - r.min)
                    }
                })
                .collect(),
        }
    }

    fn check(&self, what: &str) -> Result<(), String> {
        match self {
            Sweep::List(v) if v.is_empty() => Err(format!("{what} must not be empty")),
            Sweep::List(v) if v.iter().any(|x| !x.is_finite()) => Err(format!("{what} must be finite")),
            Sweep::Range(r) if r.count == 0 => Err(format!("{what}.count must be ≥ 1")),
            Sweep::Range(r) if !(r.min.is_finite() && r.max.is_finite() && r.min <= r.max) => {
                Err(format!("{what} needs finite min ≤ max"))
            }
            Sweep::Range(r) if r.log && r.min <= 0.0 => Err(format!("{what} with log spacing needs min > 0")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// Expected Kato norm; checked to `kato_tolerance` relative.
    pub kato_reference: Option<f64>,
    #[serde(default = "default_one_percent")]
    pub kato_tolerance: f64,
    /// Require the ε-class audit to pass.
    #[serde(default = "default_true")]
    pub require_class: bool,
    pub iterated: Option<IteratedConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IteratedConfig {
    pub k_max: usize,
    pub samples: usize,
    /// Pairs `[x0, x_{k+1}]`.
    pub endpoints: Vec<[[f64; 3]; 2]>,
    /// For k = 1 with both endpoints at the potential's centre the bound is attained.
    pub centre_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceConfig {
    pub lambdas: Option<Sweep>,
    pub threshold: Option<f64>,
    pub depth_sweep: Option<DepthSweepConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DepthSweepConfig {
    pub depths: Sweep,
    #[serde(default = "default_radius")]
    pub radius: f64,
    pub reference: Option<f64>,
    #[serde(default = "default_two_percent")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub lambda_max: f64,
    pub panels: usize,
    pub order: usize,
    pub fine_panels: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub times: Sweep,
    pub quadrature: QuadratureConfig,
    #[serde(default = "default_radius")]
    pub probe_width: f64,
    pub cutoff: Option<f64>,
    pub alpha_band: Option<[f64; 2]>,
    /// Compare `‖u(t)‖_∞ t^{3/2} / ‖f‖₁` with the point-mass value `(4π)^{−3/2}`.
    pub amplitude_tolerance: Option<f64>,
    pub oracle: Option<OracleConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub grid: GridConfig,
    pub times: Sweep,
    pub compare_radius: f64,
    #[serde(default = "default_five_percent")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BornConfig {
    pub dispersive: Option<DispersiveConfig>,
    pub identity: Option<IdentityConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DispersiveConfig {
    pub orders: Vec<usize>,
    pub times: Sweep,
    #[serde(default = "default_ladder")]
    pub ladder: u32,
    pub quadrature: QuadratureConfig,
    #[serde(default = "default_radius")]
    pub probe_width: f64,
    /// Allowed `|α − 3/2|` per order.
    pub exponent_bands: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityConfig {
    pub m: usize,
    pub lambdas: Sweep,
    #[serde(default = "default_radius")]
    pub probe_width: f64,
    #[serde(default = "default_identity_tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchConfig {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NormsConfig {
    #[serde(default = "default_branch")]
    pub branch: BranchConfig,
    pub mapping: Option<MappingConfig>,
    pub derivative: Option<DerivativeConfig>,
    pub neumann: Option<NeumannConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MappingConfig {
    pub p: f64,
    pub lambdas: Sweep,
    pub widths: SweepRange,
    pub expected_exponent: Option<f64>,
    #[serde(default = "default_exponent_tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DerivativeConfig {
    pub lambdas: Sweep,
    #[serde(default = "default_derivative_tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NeumannConfig {
    pub lambdas: Sweep,
    #[serde(default = "default_identity_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_series_tolerance")]
    pub series_tolerance: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StatphaseConfig {
    pub a: Vec<f64>,
    pub times: Sweep,
    #[serde(default = "default_ladder")]
    pub ladder: u32,
    #[serde(default = "default_exponent_tolerance")]
    pub exponent_tolerance: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IbpConfig {
    pub m: usize,
    pub t: f64,
    pub quadrature: QuadratureConfig,
    #[serde(default = "default_radius")]
    pub probe_width: f64,
    pub fd_step: Option<f64>,
    #[serde(default = "default_ibp_tolerance")]
    pub tolerance: f64,
    /// Rerun at half the λ-step and require the error to shrink by this factor.
    pub refine_gain: Option<f64>,
}

fn default_true() -> bool {
    true
}
fn default_radius() -> f64 {
    1.0
}
fn default_one_percent() -> f64 {
    0.01
}
fn default_two_percent() -> f64 {
    0.02
}
fn default_five_percent() -> f64 {
    0.05
}
fn default_ladder() -> u32 {
    4
}
fn default_identity_tolerance() -> f64 {
    1e-6
}
fn default_series_tolerance() -> f64 {
    1e-10
}
fn default_exponent_tolerance() -> f64 {
    0.1
}
fn default_derivative_tolerance() -> f64 {
    1e-10
}
fn default_ibp_tolerance() -> f64 {
    1e-3
}
fn default_branch() -> BranchConfig {
    BranchConfig::Plus
}

/// A loaded config plus the raw text and directory it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub source: String,
    pub base_dir: PathBuf,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let source = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let config = parse(&source)?;
    Ok(LoadedConfig { config, source, base_dir })
}

pub fn parse(source: &str) -> Result<ExperimentConfig, CliError> {
    let config: ExperimentConfig = toml::from_str(source).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(source, s.start));
        CliError::Config { line, message: e.message().to_string() }
    })?;
    validate(&config, source)?;
    Ok(config)
}

fn line_of_offset(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]` (dotted; `""` for the top level), falling
/// back to the section header.
pub fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header_line = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') && line.ends_with(']') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section {
                header_line = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    if header_line.is_none() {
        if let Some((parent, last)) = section.rsplit_once('.') {
            return locate(source, parent, last);
        }
        if !section.is_empty() && !key.is_empty() {
            return locate(source, "", section);
        }
    }
    header_line
}

struct Validator<'a> {
    source: &'a str,
}

impl Validator<'_> {
    fn fail(&self, section: &str, key: &str, message: impl Into<String>) -> CliError {
        CliError::Config { line: locate(self.source, section, key), message: message.into() }
    }

    fn positive(&self, section: &str, key: &str, value: f64) -> Result<(), CliError> {
        if value > 0.0 && value.is_finite() {
            Ok(())
        } else {
            Err(self.fail(section, key, format!("{key} must be a positive finite number, got {value}")))
        }
    }

    fn sweep(&self, section: &str, key: &str, sweep: &Sweep) -> Result<(), CliError> {
        sweep.check(key).map_err(|m| self.fail(section, key, m))
    }

    fn grid(&self, section: &str, grid: &GridConfig) -> Result<(), CliError> {
        self.positive(section, "extent", grid.extent)?;
        let min = match grid.kind {
            GridKindConfig::Radial => 2,
            GridKindConfig::Box => 2,
        };
        if grid.n < min {
            return Err(self.fail(section, "n", format!("n must be ≥ {min}, got {}", grid.n)));
        }
        if grid.kind == GridKindConfig::Box && grid.n > 40 {
            return Err(self.fail(section, "n", format!("box grids are dense; n per axis must be ≤ 40, got {}", grid.n)));
        }
        Ok(())
    }

    fn quadrature(&self, section: &str, q: &QuadratureConfig) -> Result<(), CliError> {
        self.positive(section, "lambda_max", q.lambda_max)?;
        if q.panels == 0 {
            return Err(self.fail(section, "panels", "panels must be ≥ 1"));
        }
        if !(2..=64).contains(&q.order) {
            return Err(self.fail(section, "order", format!("order must lie in 2..=64, got {}", q.order)));
        }
        if q.fine_panels == Some(0) {
            return Err(self.fail(section, "fine_panels", "fine_panels must be ≥ 1"));
        }
        Ok(())
    }

    fn times(&self, section: &str, key: &str, sweep: &Sweep) -> Result<(), CliError> {
        self.sweep(section, key, sweep)?;
        if sweep.values().iter().any(|&t| t < 1.0) {
            return Err(self.fail(section, key, format!("{key} must all be ≥ 1")));
        }
        Ok(())
    }
}

fn require<'a, T>(v: &Validator, value: &'a Option<T>, section: &str, command: Command) -> Result<&'a T, CliError> {
    value.as_ref().ok_or_else(|| {
        CliError::Config {
            line: locate(v.source, "", "command"),
            message: format!("command '{}' needs a [{section}] section", command.as_str()),
        }
    })
}

fn validate(c: &ExperimentConfig, source: &str) -> Result<(), CliError> {
    let v = Validator { source };
    let sections: [(&str, bool); 7] = [
        ("audit", c.audit.is_some()),
        ("resonance", c.resonance.is_some()),
        ("decay", c.decay.is_some()),
        ("born", c.born.is_some()),
        ("norms", c.norms.is_some()),
        ("statphase", c.statphase.is_some()),
        ("ibp", c.ibp.is_some()),
    ];
    for (name, present) in sections {
        if present && name != c.command.section() {
            return Err(v.fail(name, "", format!("section [{name}] does not belong to command '{}'", c.command.as_str())));
        }
    }
    let needs_grid = c.command != Command::Statphase;
    match (&c.grid, needs_grid) {
        (Some(g), _) => v.grid("grid", g)?,
        (None, true) => {
            return Err(CliError::Config {
                line: locate(source, "", "command"),
                message: format!("command '{}' needs a [grid] section", c.command.as_str()),
            })
        }
        (None, false) => {}
    }
    if let Some(p) = &c.potential {
        validate_potential(&v, p, c.grid.as_ref())?;
    }
    match c.command {
        Command::Audit => {
            let a = require(&v, &c.audit, "audit", c.command)?;
            v.positive("audit", "kato_tolerance", a.kato_tolerance)?;
            if let Some(r) = a.kato_reference {
                v.positive("audit", "kato_reference", r)?;
            }
            if let Some(it) = &a.iterated {
                if it.samples < 10_000 {
                    return Err(v.fail("audit.iterated", "samples", format!("samples must be ≥ 10000, got {}", it.samples)));
                }
                if it.endpoints.is_empty() {
                    return Err(v.fail("audit.iterated", "endpoints", "endpoints must not be empty"));
                }
                if let Some(t) = it.centre_tolerance {
                    v.positive("audit.iterated", "centre_tolerance", t)?;
                }
            }
        }
        Command::ResonanceScan => {
            let r = require(&v, &c.resonance, "resonance", c.command)?;
            if let Some(l) = &r.lambdas {
                v.sweep("resonance", "lambdas", l)?;
                if l.values().iter().any(|&x| x < 0.0) {
                    return Err(v.fail("resonance", "lambdas", "lambdas must be ≥ 0"));
                }
            }
            if let Some(t) = r.threshold {
                v.positive("resonance", "threshold", t)?;
            }
            if let Some(d) = &r.depth_sweep {
                v.sweep("resonance.depth_sweep", "depths", &d.depths)?;
                if d.depths.values().len() < 3 {
                    return Err(v.fail("resonance.depth_sweep", "depths", "depths needs at least 3 values"));
                }
                v.positive("resonance.depth_sweep", "radius", d.radius)?;
                v.positive("resonance.depth_sweep", "tolerance", d.tolerance)?;
            }
            if r.lambdas.is_none() && r.depth_sweep.is_none() {
                return Err(v.fail("resonance", "", "resonance-scan needs lambdas or a depth_sweep"));
            }
        }
        Command::Decay => {
            let d = require(&v, &c.decay, "decay", c.command)?;
            v.times("decay", "times", &d.times)?;
            v.quadrature("decay.quadrature", &d.quadrature)?;
            v.positive("decay", "probe_width", d.probe_width)?;
            if let Some(l) = d.cutoff {
                if !(l >= 1.0) {
                    return Err(v.fail("decay", "cutoff", format!("cutoff must be ≥ 1, got {l}")));
                }
            }
            if let Some([lo, hi]) = d.alpha_band {
                if !(lo <= hi) {
                    return Err(v.fail("decay", "alpha_band", "alpha_band must be [low, high] with low ≤ high"));
                }
            }
            if let Some(o) = &d.oracle {
                v.grid("decay.oracle.grid", &o.grid)?;
                v.times("decay.oracle", "times", &o.times)?;
                v.positive("decay.oracle", "compare_radius", o.compare_radius)?;
                v.positive("decay.oracle", "tolerance", o.tolerance)?;
            }
        }
        Command::Born => {
            let b = require(&v, &c.born, "born", c.command)?;
            if let Some(d) = &b.dispersive {
                v.times("born.dispersive", "times", &d.times)?;
                v.quadrature("born.dispersive.quadrature", &d.quadrature)?;
                v.positive("born.dispersive", "probe_width", d.probe_width)?;
                if let Some(bands) = &d.exponent_bands {
                    if bands.len() != d.orders.len() {
                        return Err(v.fail("born.dispersive", "exponent_bands", "exponent_bands needs one entry per order"));
                    }
                }
            }
            if let Some(i) = &b.identity {
                v.sweep("born.identity", "lambdas", &i.lambdas)?;
                v.positive("born.identity", "probe_width", i.probe_width)?;
                v.positive("born.identity", "tolerance", i.tolerance)?;
            }
            if b.dispersive.is_none() && b.identity.is_none() {
                return Err(v.fail("born", "", "born needs a [born.dispersive] or [born.identity] section"));
            }
        }
        Command::ResolventNorms => {
            let n = require(&v, &c.norms, "norms", c.command)?;
            if let Some(m) = &n.mapping {
                if !(m.p >= 1.0) {
                    return Err(v.fail("norms.mapping", "p", format!("p must be ≥ 1, got {}", m.p)));
                }
                if !(m.p > 1.0 && m.p <= 4.0 / 3.0 + 1e-12) {
                    return Err(v.fail("norms.mapping", "p", format!("p must lie in (1, 4/3], got {}", m.p)));
                }
                v.sweep("norms.mapping", "lambdas", &m.lambdas)?;
                Sweep::Range(m.widths.clone()).check("widths").map_err(|e| v.fail("norms.mapping", "widths", e))?;
                if m.widths.min <= 0.0 {
                    return Err(v.fail("norms.mapping", "widths", "widths must be positive"));
                }
            }
            if let Some(d) = &n.derivative {
                v.sweep("norms.derivative", "lambdas", &d.lambdas)?;
            }
            if let Some(ne) = &n.neumann {
                v.sweep("norms.neumann", "lambdas", &ne.lambdas)?;
                v.positive("norms.neumann", "series_tolerance", ne.series_tolerance)?;
            }
            if n.mapping.is_none() && n.derivative.is_none() && n.neumann.is_none() {
                return Err(v.fail("norms", "", "resolvent-norms needs a mapping, derivative or neumann section"));
            }
        }
        Command::Statphase => {
            let s = require(&v, &c.statphase, "statphase", c.command)?;
            if s.a.is_empty() || s.a.iter().any(|x| !x.is_finite() || *x == 0.0) {
                return Err(v.fail("statphase", "a", "a must be a non-empty list of nonzero numbers"));
            }
            v.times("statphase", "times", &s.times)?;
        }
        Command::IbpCheck => {
            let i = require(&v, &c.ibp, "ibp", c.command)?;
            if !(i.t >= 1.0) {
                return Err(v.fail("ibp", "t", format!("t must be ≥ 1, got {}", i.t)));
            }
            v.quadrature("ibp.quadrature", &i.quadrature)?;
            v.positive("ibp", "probe_width", i.probe_width)?;
            if let Some(h) = i.fd_step {
                v.positive("ibp", "fd_step", h)?;
            }
            if let Some(g) = i.refine_gain {
                v.positive("ibp", "refine_gain", g)?;
            }
        }
    }
    Ok(())
}

fn validate_potential(v: &Validator, p: &PotentialConfig, grid: Option<&GridConfig>) -> Result<(), CliError> {
    let s = "potential";
    let given = [
        ("depth", p.depth.is_some()),
        ("radius", p.radius.is_some()),
        ("alpha", p.alpha.is_some()),
        ("strength", p.strength.is_some()),
        ("width", p.width.is_some()),
        ("path", p.path.is_some()),
    ];
    let (required, name): (&[&str], &str) = match p.kind {
        PotentialKind::Zero => (&[], "zero"),
        PotentialKind::Well => (&["depth", "radius"], "well"),
        PotentialKind::Power => (&["alpha", "strength", "radius"], "power"),
        PotentialKind::Gaussian => (&["depth", "width"], "gaussian"),
        PotentialKind::Table => (&["path"], "table"),
    };
    for (key, present) in given {
        if present && !required.contains(&key) {
            return Err(v.fail(s, key, format!("key '{key}' does not apply to a {name} potential")));
        }
        if !present && required.contains(&key) {
            return Err(v.fail(s, "type", format!("a {name} potential needs '{key}'")));
        }
    }
    for (key, value) in [("radius", p.radius), ("width", p.width)] {
        if let Some(x) = value {
            v.positive(s, key, x)?;
        }
    }
    if let Some(a) = p.alpha {
        if !(a > 0.0 && a < 2.0) {
            return Err(v.fail(s, "alpha", format!("alpha must lie in (0, 2), got {a}")));
        }
    }
    for (key, value) in [("depth", p.depth), ("strength", p.strength)] {
        if let Some(x) = value {
            if !x.is_finite() {
                return Err(v.fail(s, key, format!("{key} must be finite")));
            }
        }
    }
    if let Some(e) = p.epsilon {
        if !(e > 0.0 && e < 1.0) {
            return Err(v.fail(s, "epsilon", format!("epsilon must lie in (0, 1), got {e}")));
        }
    }
    if let Some(c) = p.center {
        if c.iter().any(|x| !x.is_finite()) {
            return Err(v.fail(s, "center", "center must be finite"));
        }
        let radial = grid.is_some_and(|g| g.kind == GridKindConfig::Radial);
        if radial && c.iter().any(|&x| x != 0.0) {
            return Err(v.fail(s, "center", "radial grids cannot represent a translated potential"));
        }
        if p.kind == PotentialKind::Table {
            return Err(v.fail(s, "center", "tabulated potentials cannot be translated"));
        }
    }
    Ok(())
}
