//! Scenario configuration: TOML parsing, schema checks and conversion into
//! core types.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wavegh_core::discretization::NonlinearitySpec;
use wavegh_core::dynamics::SamplerConfig;
use wavegh_core::gh::{DynamicalOptions, SearchOptions, DEFAULT_RHO, DEFAULT_SWEEPS, EXACT_CAP};
use wavegh_core::perturbation::{FamilyKind, PerturbationFamily, ReferenceDomain};

/// One problem found while validating a configuration file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// Dotted key path, e.g. `solver.dt`; empty for syntax errors.
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.key.is_empty(), self.line) {
            (true, Some(l)) => write!(f, "line {l}: {}", self.message),
            (true, None) => write!(f, "{}", self.message),
            (false, Some(l)) => write!(f, "{} (line {l}): {}", self.key, self.message),
            (false, None) => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

fn diag(key: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic { key: key.to_string(), line: None, message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// `interval` or `rectangle`.
    pub kind: String,
    /// `[a, b]` or `[a, b, c, d]`.
    pub bounds: Vec<f64>,
    /// Cells per axis.
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSection {
    pub family: String,
    pub schedule: Vec<f64>,
    /// Bump width for `bump1d` and `radial2d`.
    pub width: f64,
    /// Bump center; the domain midpoint when empty.
    pub center: Vec<f64>,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        Self { family: "scale".into(), schedule: vec![0.1], width: 0.5, center: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearitySection {
    /// `sine` for `a u + b sin u`, `cubic` for `c u³`.
    pub kind: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Lipschitz bound; derived for `sine`, required for `cubic`.
    pub l: Option<f64>,
}

impl Default for NonlinearitySection {
    fn default() -> Self {
        Self { kind: "sine".into(), a: 1.0, b: 0.5, c: 0.0, l: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    /// Horizon of single-trajectory runs and the energy profile.
    pub t_end: f64,
    /// Trajectory output stride in steps.
    pub record_every: usize,
    /// Seeded state pairs for the Lipschitz check.
    pub pairs: usize,
    /// Time each pair member is evolved before the check starts.
    pub t_absorb: f64,
    /// Lipschitz check horizon, at most 1.
    pub horizon: f64,
    /// Conjugated-flow horizon and number of output times.
    pub conj_t: f64,
    pub conj_steps: usize,
    pub conj_tol: f64,
    pub envelope_slack: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_end: 20.0,
            record_every: 10,
            pairs: 20,
            t_absorb: 5.0,
            horizon: 1.0,
            conj_t: 1.0,
            conj_steps: 10,
            conj_tol: 1e-3,
            envelope_slack: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub n_ics: usize,
    pub radius: f64,
    pub modes: usize,
    pub t_transient: f64,
    pub t_window: f64,
    pub stride: f64,
    pub max_points: usize,
    pub plateau_tol: f64,
    pub plateau_window: usize,
    pub t_cap: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            n_ics: d.n_ics,
            radius: d.radius,
            modes: d.modes,
            t_transient: d.t_transient,
            t_window: d.t_window,
            stride: d.stride,
            max_points: d.max_points,
            plateau_tol: d.plateau_tol,
            plateau_window: d.plateau_window,
            t_cap: d.t_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GhSection {
    /// Skeleton size for exact comparisons.
    pub exact_cap: usize,
    /// Annealing restarts per direction.
    pub budget: usize,
    pub sweeps: usize,
    /// Flow grid resolution: images at `k/grid_m`.
    pub grid_m: usize,
    pub enriched_budget: usize,
    pub rho: f64,
    /// Identical-map control runs measuring the sampling noise floor.
    pub control_runs: usize,
    /// Continuity passes when the final estimate is below `floor_factor × floor`.
    pub floor_factor: f64,
    /// Stability passes when the smallest pair certifies below this.
    pub threshold: f64,
}

impl Default for GhSection {
    fn default() -> Self {
        Self {
            exact_cap: EXACT_CAP,
            budget: 32,
            sweeps: DEFAULT_SWEEPS,
            grid_m: 5,
            enriched_budget: DynamicalOptions::default().enriched_budget,
            rho: DEFAULT_RHO,
            control_runs: 3,
            floor_factor: 3.0,
            threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub domain: DomainSection,
    #[serde(default)]
    pub perturbation: PerturbationSection,
    #[serde(default)]
    pub nonlinearity: NonlinearitySection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub gh: GhSection,
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("domain", &["kind", "bounds", "resolution"]),
    ("perturbation", &["family", "schedule", "width", "center"]),
    ("nonlinearity", &["kind", "a", "b", "c", "l"]),
    (
        "solver",
        &[
            "dt",
            "t_end",
            "record_every",
            "pairs",
            "t_absorb",
            "horizon",
            "conj_t",
            "conj_steps",
            "conj_tol",
            "envelope_slack",
        ],
    ),
    (
        "sampler",
        &[
            "n_ics",
            "radius",
            "modes",
            "t_transient",
            "t_window",
            "stride",
            "max_points",
            "plateau_tol",
            "plateau_window",
            "t_cap",
        ],
    ),
    (
        "gh",
        &[
            "exact_cap",
            "budget",
            "sweeps",
            "grid_m",
            "enriched_budget",
            "rho",
            "control_runs",
            "floor_factor",
            "threshold",
        ],
    ),
];

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the first `key =` inside `[section]`, for pointing diagnostics.
fn locate(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            continue;
        }
        let here = line.split('=').next().map(str::trim);
        if current.as_deref() == section && here == Some(key) {
            return Some(i + 1);
        }
    }
    None
}

fn schema_walk(text: &str, table: &toml::Table) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if !table.contains_key("seed") {
        out.push(diag("seed", "missing required top-level key"));
    }
    if !table.contains_key("domain") {
        out.push(diag("domain", "missing required section"));
    }
    for (name, value) in table {
        if name == "seed" {
            continue;
        }
        let Some((_, keys)) = SCHEMA.iter().find(|(s, _)| s == name) else {
            let mut d = diag(name, "unknown section or key");
            d.line = locate(text, None, name).or_else(|| text.find(&format!("[{name}]")).map(|o| line_of(text, o)));
            out.push(d);
            continue;
        };
        let Some(sub) = value.as_table() else {
            out.push(diag(name, "expected a table"));
            continue;
        };
        for key in sub.keys() {
            if !keys.contains(&key.as_str()) {
                let mut d = diag(&format!("{name}.{key}"), format!("unknown key; expected one of {}", keys.join(", ")));
                d.line = locate(text, Some(name), key);
                out.push(d);
            }
        }
    }
    out
}

fn positive(out: &mut Vec<Diagnostic>, key: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        out.push(diag(key, format!("must be a positive finite number, got {v}")));
    }
}

fn at_least(out: &mut Vec<Diagnostic>, key: &str, v: usize, min: usize) {
    if v < min {
        out.push(diag(key, format!("must be at least {min}, got {v}")));
    }
}

impl ScenarioConfig {
    /// Range and consistency checks that do not need any numerics.
    pub fn check(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if let Err(e) = self.domain() {
            out.push(diag("domain", e.to_string()));
        }
        at_least(&mut out, "domain.resolution", self.domain.resolution, 4);

        let p = &self.perturbation;
        if !FamilyKind::NAMES.contains(&p.family.as_str()) {
            out.push(diag(
                "perturbation.family",
                format!("unknown family '{}'; expected one of {}", p.family, FamilyKind::NAMES.join(", ")),
            ));
        }
        if p.schedule.is_empty() {
            out.push(diag("perturbation.schedule", "must not be empty"));
        }
        if p.schedule.iter().any(|&s| !(s > 0.0)) {
            out.push(diag("perturbation.schedule", "entries must be positive"));
        }
        if p.schedule.windows(2).any(|w| !(w[1] < w[0])) {
            out.push(diag("perturbation.schedule", "must be strictly decreasing"));
        }
        positive(&mut out, "perturbation.width", p.width);
        if !p.center.is_empty() && p.center.len() != self.domain.bounds.len() / 2 {
            out.push(diag("perturbation.center", "must have one coordinate per domain axis"));
        }

        let n = &self.nonlinearity;
        match n.kind.as_str() {
            "sine" => {}
            "cubic" if n.l.is_none() => out.push(diag("nonlinearity.l", "required for kind = \"cubic\"")),
            "cubic" => {}
            other => out.push(diag("nonlinearity.kind", format!("unknown kind '{other}'; expected sine or cubic"))),
        }
        if let Some(l) = n.l {
            positive(&mut out, "nonlinearity.l", l);
            if n.kind == "sine" && l < n.a.abs() + n.b.abs() {
                out.push(diag(
                    "nonlinearity.l",
                    format!("below the Lipschitz constant |a| + |b| = {}", n.a.abs() + n.b.abs()),
                ));
            }
        }

        let s = &self.solver;
        for (k, v) in [
            ("solver.dt", s.dt),
            ("solver.t_end", s.t_end),
            ("solver.t_absorb", s.t_absorb),
            ("solver.horizon", s.horizon),
            ("solver.conj_t", s.conj_t),
            ("solver.conj_tol", s.conj_tol),
            ("solver.envelope_slack", s.envelope_slack),
        ] {
            positive(&mut out, k, v);
        }
        if s.horizon > 1.0 {
            out.push(diag("solver.horizon", "must not exceed 1"));
        }
        at_least(&mut out, "solver.record_every", s.record_every, 1);
        at_least(&mut out, "solver.pairs", s.pairs, 1);
        at_least(&mut out, "solver.conj_steps", s.conj_steps, 1);

        if let Err(e) = self.sampler_config().validate() {
            out.push(diag("sampler", e.to_string()));
        }

        let g = &self.gh;
        if g.exact_cap == 0 || g.exact_cap > EXACT_CAP {
            out.push(diag("gh.exact_cap", format!("must lie in 1..={EXACT_CAP}, got {}", g.exact_cap)));
        }
        at_least(&mut out, "gh.budget", g.budget, 1);
        at_least(&mut out, "gh.sweeps", g.sweeps, 1);
        at_least(&mut out, "gh.grid_m", g.grid_m, 1);
        at_least(&mut out, "gh.enriched_budget", g.enriched_budget, 1);
        at_least(&mut out, "gh.control_runs", g.control_runs, 1);
        if !(g.rho > 0.0 && g.rho < 1.0) {
            out.push(diag("gh.rho", format!("must lie in (0, 1), got {}", g.rho)));
        }
        positive(&mut out, "gh.floor_factor", g.floor_factor);
        positive(&mut out, "gh.threshold", g.threshold);
        out
    }

    pub fn domain(&self) -> wavegh_core::Result<ReferenceDomain> {
        let b = &self.domain.bounds;
        match (self.domain.kind.as_str(), b.len()) {
            ("interval", 2) => ReferenceDomain::interval(b[0], b[1]),
            ("rectangle", 4) => ReferenceDomain::rectangle(b[0], b[1], b[2], b[3]),
            ("interval", _) => Err(wavegh_core::Error::InvalidArgument("interval bounds must be [a, b]".into())),
            ("rectangle", _) => {
                Err(wavegh_core::Error::InvalidArgument("rectangle bounds must be [a, b, c, d]".into()))
            }
            (k, _) => Err(wavegh_core::Error::InvalidArgument(format!(
                "unknown domain kind '{k}'; expected interval or rectangle"
            ))),
        }
    }

    pub fn family_kind(&self) -> wavegh_core::Result<FamilyKind> {
        let d = self.domain()?;
        let [(a, b), (c, e)] = d.bounds();
        let p = &self.perturbation;
        let center = |i: usize, mid: f64| p.center.get(i).copied().unwrap_or(mid);
        Ok(match p.family.as_str() {
            "scale" => FamilyKind::Scale,
            "quadratic1d" => FamilyKind::Quadratic1d,
            "bump1d" => FamilyKind::Bump1d { width: p.width, center: center(0, 0.5 * (a + b)) },
            "shear2d" => FamilyKind::Shear2d,
            "radial2d" => {
                FamilyKind::Radial2d { width: p.width, center: [center(0, 0.5 * (a + b)), center(1, 0.5 * (c + e))] }
            }
            other => return Err(wavegh_core::Error::InvalidArgument(format!("unknown family '{other}'"))),
        })
    }

    pub fn family(&self) -> wavegh_core::Result<PerturbationFamily> {
        PerturbationFamily::new(self.family_kind()?, self.domain()?, self.perturbation.schedule.clone())
    }

    pub fn nonlinearity(&self) -> NonlinearitySpec {
        let n = &self.nonlinearity;
        match n.kind.as_str() {
            "cubic" => NonlinearitySpec::cubic(n.c, n.l.unwrap_or(0.0)),
            _ => {
                let mut f = NonlinearitySpec::sine(n.a, n.b);
                if let Some(l) = n.l {
                    f.l = l;
                }
                f
            }
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        let s = &self.sampler;
        SamplerConfig {
            n_ics: s.n_ics,
            radius: s.radius,
            modes: s.modes,
            t_transient: s.t_transient,
            t_window: s.t_window,
            stride: s.stride,
            max_points: s.max_points,
            plateau_tol: s.plateau_tol,
            plateau_window: s.plateau_window,
            t_cap: s.t_cap,
            flow_m: self.gh.grid_m,
        }
    }

    pub fn dynamical_options(&self, base: SearchOptions) -> DynamicalOptions {
        DynamicalOptions { base, enriched_budget: self.gh.enriched_budget, rho: self.gh.rho }
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions { sweeps: self.gh.sweeps, ..Default::default() }
    }

    /// Normalized TOML with every default filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Parses and validates configuration text, collecting every problem found.
pub fn validate_config(text: &str) -> Result<ScenarioConfig, Vec<Diagnostic>> {
    let table: toml::Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            let line = e.span().map(|s| line_of(text, s.start));
            return Err(vec![Diagnostic { key: String::new(), line, message: e.message().to_string() }]);
        }
    };
    let mut diags = schema_walk(text, &table);
    if !diags.is_empty() {
        diags.sort_by_key(|d| d.line.unwrap_or(usize::MAX));
        return Err(diags);
    }
    let cfg: ScenarioConfig = match toml::from_str(text) {
        Ok(c) => c,
        Err(e) => {
            let line = e.span().map(|s| line_of(text, s.start));
            return Err(vec![Diagnostic { key: String::new(), line, message: e.message().to_string() }]);
        }
    };
    diags = cfg.check();
    for d in &mut diags {
        if d.line.is_none() {
            if let Some((section, key)) = d.key.split_once('.') {
                d.line = locate(text, Some(section), key);
            }
        }
    }
    if diags.is_empty() {
        Ok(cfg)
    } else {
        diags.sort_by_key(|d| d.line.unwrap_or(usize::MAX));
        Err(diags)
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, Vec<Diagnostic>> {
    match std::fs::read_to_string(path) {
        Ok(text) => validate_config(&text),
        Err(e) => Err(vec![diag("", format!("cannot read {}: {e}", path.display()))]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "seed = 1\n[domain]\nkind = \"interval\"\nbounds = [0.0, 1.0]\nresolution = 16\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = validate_config(MINIMAL).unwrap();
        assert_eq!(cfg.solver, SolverSection::default());
        assert_eq!(cfg.gh.exact_cap, EXACT_CAP);
        let again = validate_config(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn negative_dt_names_the_key() {
        let text = format!("{MINIMAL}[solver]\ndt = -0.01\n");
        let diags = validate_config(&text).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].key, "solver.dt");
        assert_eq!(diags[0].line, Some(7));
    }

    #[test]
    fn unknown_keys_are_reported_together() {
        let text = format!("{MINIMAL}[solver]\ndtt = 0.1\n[sampler]\nfoo = 1\n");
        let diags = validate_config(&text).unwrap_err();
        let keys: Vec<&str> = diags.iter().map(|d| d.key.as_str()).collect();
        assert_eq!(keys, ["solver.dtt", "sampler.foo"]);
    }

    #[test]
    fn missing_seed_and_bad_schedule() {
        let diags =
            validate_config("[domain]\nkind = \"interval\"\nbounds = [0.0, 1.0]\nresolution = 16\n").unwrap_err();
        assert_eq!(diags[0].key, "seed");
        let text = format!("{MINIMAL}[perturbation]\nfamily = \"bump1d\"\nschedule = [0.1, 0.2]\n");
        let diags = validate_config(&text).unwrap_err();
        assert_eq!(diags[0].key, "perturbation.schedule");
    }

    #[test]
    fn syntax_error_has_line() {
        let diags = validate_config("seed = 1\n[domain\n").unwrap_err();
        assert_eq!(diags[0].line, Some(2));
    }
}
