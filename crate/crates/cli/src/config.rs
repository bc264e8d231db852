//! `key = value` run configuration grouped under `[model]`, `[process]`, `[experiment]` and
//! `[output]`, read as TOML. Parsing is fail-closed: unknown sections and keys are errors.

use std::path::PathBuf;

use thiserror::Error;
use toml::{Table, Value};

use mixkern::experiments::{BandwidthRule, ExperimentError, ExperimentPlan};
use mixkern::kernels::KernelFamily;
use mixkern::processes::{ProcessKind, ProcessSpec, RegressionFn, ScaleFn};
use mixkern::scalar::infinite_size;
use mixkern::theory::{EstimatorKind, ModelSpec};

const MODEL_KEYS: &[&str] = &["s", "r", "d", "q", "q_f", "q_g", "v", "u", "theta", "ell", "panel_smoothness"];
const PROCESS_KEYS: &[&str] = &[
    "kind",
    "theta",
    "delta",
    "truncation",
    "burn_in",
    "d",
    "phi",
    "h",
    "sigma",
    "innovation_bound",
    "arch_gate",
    "arch_a0",
    "dependent_design",
    "factor_weight",
];
const EXPERIMENT_KEYS: &[&str] = &[
    "estimator",
    "kernel",
    "order",
    "t_grid",
    "replications",
    "z_points",
    "seed",
    "bandwidth",
    "b",
    "scale",
    "panel_n",
    "panel_growth",
    "zeta",
    "denom_floor",
    "t",
    "alpha",
    "sample",
    "grid",
    "envelope_b",
    "envelope_z",
    "envelope_max_lag",
    "envelope_replications",
    "envelope_window",
    "envelope_v",
];
const OUTPUT_KEYS: &[&str] = &["dir", "quiet"];
const SECTIONS: &[(&str, &[&str])] =
    &[("model", MODEL_KEYS), ("process", PROCESS_KEYS), ("experiment", EXPERIMENT_KEYS), ("output", OUTPUT_KEYS)];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}` = {value} is outside the accepted range {range}")]
    BadRange { key: String, value: String, range: &'static str },
    #[error("`{key}` expects {expected}")]
    BadType { key: String, expected: &'static str },
    #[error("missing required key `{0}`")]
    MissingRequired(String),
    #[error("`{0}` only applies when {1}")]
    Conflict(String, &'static str),
    #[error(transparent)]
    Invalid(#[from] ExperimentError),
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Io { .. } => "config-io",
            ConfigError::Syntax(_) => "syntax",
            ConfigError::UnknownKey(_) => "unknown-key",
            ConfigError::BadRange { .. } => "bad-range",
            ConfigError::BadType { .. } => "bad-type",
            ConfigError::MissingRequired(_) => "missing-required",
            ConfigError::Conflict(..) => "conflicting-keys",
            ConfigError::Invalid(e) => e.code(),
        }
    }
}

/// Covariance-envelope settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSettings {
    pub b: f64,
    pub z: Vec<f64>,
    pub max_lag: usize,
    pub replications: usize,
    pub window: usize,
    pub v: Option<f64>,
}

impl Default for EnvelopeSettings {
    fn default() -> Self {
        EnvelopeSettings { b: 0.5, z: vec![0.0], max_lag: 20, replications: 2000, window: 1, v: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSettings {
    pub dir: Option<PathBuf>,
    pub quiet: bool,
}

/// Everything a subcommand needs. `plan` carries the process and model specs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub plan: ExperimentPlan,
    /// Sample size for `bandwidth` and `simulate`.
    pub t: usize,
    /// `N`-growth exponent for `panel-demo`.
    pub alpha: f64,
    /// Input file for `estimate`.
    pub sample: Option<PathBuf>,
    /// Evaluation grid for `estimate`; `None` uses the plan's evaluation points.
    pub grid: Option<Vec<Vec<f64>>>,
    pub envelope: EnvelopeSettings,
    pub output: OutputSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            plan: ExperimentPlan::default(),
            t: 1024,
            alpha: 1.0,
            sample: None,
            grid: None,
            envelope: EnvelopeSettings::default(),
            output: OutputSettings::default(),
        }
    }
}

/// Typed access to one section with the key names used in error messages.
struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn key(&self, key: &str) -> String {
        format!("{}.{}", self.name, key)
    }

    fn raw(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn bad_type(&self, key: &str, expected: &'static str) -> ConfigError {
        ConfigError::BadType { key: self.key(key), expected }
    }

    fn range(&self, key: &str, value: impl ToString, range: &'static str) -> ConfigError {
        ConfigError::BadRange { key: self.key(key), value: value.to_string(), range }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.raw(key).map(|v| number(v).ok_or_else(|| self.bad_type(key, "a number"))).transpose()
    }

    /// Real number checked against `ok`, reported with `range` on failure.
    fn real(&self, key: &str, ok: impl Fn(f64) -> bool, range: &'static str) -> Result<Option<f64>, ConfigError> {
        match self.f64(key)? {
            Some(x) if !ok(x) => Err(self.range(key, x, range)),
            other => Ok(other),
        }
    }

    /// Mixing size: `inf` maps to the crate's infinite size.
    fn size(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        Ok(self.real(key, |x| x >= 0.0, "[0, inf]")?.map(|x| if x.is_infinite() { infinite_size() } else { x }))
    }

    fn uint(&self, key: &str, min: u64, range: &'static str) -> Result<Option<u64>, ConfigError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let n = match v {
            Value::Integer(i) => *i,
            _ => return Err(self.bad_type(key, "an integer")),
        };
        if n < 0 || (n as u64) < min {
            return Err(self.range(key, n, range));
        }
        Ok(Some(n as u64))
    }

    fn usize(&self, key: &str, min: u64, range: &'static str) -> Result<Option<usize>, ConfigError> {
        Ok(self.uint(key, min, range)?.map(|n| n as usize))
    }

    /// Seeds span all of `u64`; values beyond the TOML integer range are given as strings.
    fn seed(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::String(s)) => s.parse().map(Some).map_err(|_| self.bad_type(key, "an unsigned 64-bit integer")),
            Some(_) => self.uint(key, 0, "[0, 2^64)"),
        }
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.raw(key).map(|v| v.as_bool().ok_or_else(|| self.bad_type(key, "true or false"))).transpose()
    }

    fn str(&self, key: &str) -> Result<Option<&'a str>, ConfigError> {
        self.raw(key).map(|v| v.as_str().ok_or_else(|| self.bad_type(key, "a string"))).transpose()
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, range: &'static str) -> Result<Option<T>, ConfigError> {
        self.str(key)?.map(|s| s.parse().map_err(|_| self.range(key, format!("\"{s}\""), range))).transpose()
    }

    fn reals(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let arr = v.as_array().ok_or_else(|| self.bad_type(key, "an array of numbers"))?;
        arr.iter().map(|x| number(x).ok_or_else(|| self.bad_type(key, "an array of numbers"))).collect::<Result<_, _>>().map(Some)
    }

    fn sizes(&self, key: &str) -> Result<Option<Vec<usize>>, ConfigError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let arr = v.as_array().ok_or_else(|| self.bad_type(key, "an array of integers"))?;
        arr.iter()
            .map(|x| match x {
                Value::Integer(i) if *i >= 1 => Ok(*i as usize),
                Value::Integer(i) => Err(self.range(key, i, "[1, inf)")),
                _ => Err(self.bad_type(key, "an array of integers")),
            })
            .collect::<Result<_, _>>()
            .map(Some)
    }

    /// Array of points; a flat array of numbers is read as one-dimensional points.
    fn points(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>, ConfigError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let expected = "an array of points";
        let arr = v.as_array().ok_or_else(|| self.bad_type(key, expected))?;
        arr.iter()
            .map(|p| match p {
                Value::Array(coords) => {
                    coords.iter().map(|c| number(c).ok_or_else(|| self.bad_type(key, expected))).collect()
                }
                other => number(other).map(|x| vec![x]).ok_or_else(|| self.bad_type(key, expected)),
            })
            .collect::<Result<_, _>>()
            .map(Some)
    }

    fn scale_fn(&self, key: &str) -> Result<Option<ScaleFn>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::String(s)) if s == "sqrt1p" => Ok(Some(ScaleFn::SqrtOnePlusSquare)),
            Some(v) => match number(v) {
                Some(c) if c > 0.0 && c.is_finite() => Ok(Some(ScaleFn::Const(c))),
                Some(c) => Err(self.range(key, c, "(0, inf) or \"sqrt1p\"")),
                None => Err(self.bad_type(key, "a positive number or \"sqrt1p\"")),
            },
        }
    }
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) if !x.is_nan() => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn bandwidth_rule_from_name(name: &str, b: Option<f64>, key: String) -> Result<BandwidthRule, ConfigError> {
    match (name, b) {
        ("theory-optimal", None) => Ok(BandwidthRule::TheoryOptimal),
        ("misspecified-iid", None) => Ok(BandwidthRule::MisspecifiedIid),
        ("fixed", Some(b)) => Ok(BandwidthRule::Fixed(b)),
        ("fixed", None) => Err(ConfigError::MissingRequired("experiment.b".into())),
        ("theory-optimal" | "misspecified-iid", Some(_)) => {
            Err(ConfigError::Conflict("experiment.b".into(), "bandwidth = \"fixed\""))
        }
        _ => Err(ConfigError::BadRange {
            key,
            value: format!("\"{name}\""),
            range: "{theory-optimal, misspecified-iid, fixed}",
        }),
    }
}

/// Parses and fully validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
    for (name, value) in &doc {
        let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| s == name) else {
            return Err(ConfigError::UnknownKey(name.clone()));
        };
        let table = value.as_table().ok_or_else(|| ConfigError::BadType { key: name.clone(), expected: "a section" })?;
        if let Some(key) = table.keys().find(|k| !keys.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey(format!("{name}.{key}")));
        }
    }
    let section = |name: &'static str| Section { name, table: doc.get(name).and_then(Value::as_table) };
    let (m, p, e, o) = (section("model"), section("process"), section("experiment"), section("output"));

    let kind: ProcessKind = p
        .parsed("kind", "{iid, linear_gaussian, arch_inf, stoch_vol, panel_fixed_design, panel_shared_factor}")?
        .ok_or_else(|| ConfigError::MissingRequired("process.kind".into()))?;
    let dp = ProcessSpec::default();
    let process = ProcessSpec {
        kind,
        theta: p.real("theta", |x| x > 0.5 && x.is_finite(), "(1/2, inf)")?.unwrap_or(dp.theta),
        delta: p.real("delta", |x| x > 0.0 && x.is_finite(), "(0, inf)")?.unwrap_or(dp.delta),
        truncation: p.usize("truncation", 1, "[1, inf)")?,
        burn_in: p.usize("burn_in", 0, "[0, inf)")?,
        d: p.usize("d", 1, "[1, inf)")?.unwrap_or(dp.d),
        phi: p.parsed::<RegressionFn>("phi", "{zero, sin, square, linear}")?,
        h: p.scale_fn("h")?.unwrap_or(dp.h),
        sigma: p.scale_fn("sigma")?.unwrap_or(dp.sigma),
        innovation_bound: p.real("innovation_bound", |x| x > 0.0 && x.is_finite(), "(0, inf)")?.unwrap_or(dp.innovation_bound),
        arch_gate: p.real("arch_gate", |x| (0.0..1.0).contains(&x), "[0, 1)")?.unwrap_or(dp.arch_gate),
        arch_a0: p.real("arch_a0", |x| x > 0.0 && x.is_finite(), "(0, inf)")?.unwrap_or(dp.arch_a0),
        dependent_design: p.bool("dependent_design")?.unwrap_or(dp.dependent_design),
        factor_weight: p.real("factor_weight", |x| (0.0..=1.0).contains(&x), "[0, 1]")?.unwrap_or(dp.factor_weight),
    };

    let dm = ModelSpec::<f64>::default();
    let unit = |x: f64| x > 0.0 && x <= 1.0;
    let model = ModelSpec {
        s: m.real("s", |x| x > 0.0 && x.is_finite(), "(0, inf)")?.unwrap_or(dm.s),
        r: match m.uint("r", 2, "even integers >= 2")? {
            Some(r) if r % 2 != 0 || r > u32::MAX as u64 => return Err(m.range("r", r, "even integers >= 2")),
            Some(r) => r as u32,
            None => dm.r,
        },
        d: m.usize("d", 1, "[1, inf)")?.unwrap_or(process.d),
        q: m.real("q", unit, "(0, 1]")?.unwrap_or(dm.q),
        q_f: m.real("q_f", unit, "(0, 1]")?.unwrap_or(dm.q_f),
        q_g: m.real("q_g", unit, "(0, 1]")?.unwrap_or(dm.q_g),
        v: m.size("v")?.unwrap_or(dm.v),
        u: m.size("u")?.unwrap_or(dm.u),
        theta: m.real("theta", |x| x > 0.5 && x.is_finite(), "(1/2, inf)")?.unwrap_or(dm.theta),
        ell: m.real("ell", |x| x > 2.0, "(2, inf]")?.unwrap_or(dm.ell),
        panel_smoothness: match m.reals("panel_smoothness")? {
            Some(v) => match v.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
                Some(bad) => return Err(m.range("panel_smoothness", bad, "(0, inf)")),
                None => v,
            },
            None => dm.panel_smoothness,
        },
    };

    let defaults = RunConfig::default();
    let dp = &defaults.plan;
    let default_estimator = if kind.is_panel() { EstimatorKind::Panel } else { EstimatorKind::Density };
    let b = e.real("b", |x| x > 0.0 && x.is_finite(), "(0, inf)")?;
    let bandwidth = match e.str("bandwidth")? {
        Some(name) => bandwidth_rule_from_name(name, b, e.key("bandwidth"))?,
        None if b.is_some() => BandwidthRule::Fixed(b.unwrap_or_default()),
        None => dp.bandwidth,
    };
    let z_points = e.points("z_points")?.unwrap_or_else(|| if process.d == 1 { dp.z_points.clone() } else { vec![vec![0.0; process.d]] });
    let plan = ExperimentPlan {
        process,
        model,
        estimator: e
            .parsed("estimator", "{density, regression-model1, regression-model2, panel}")?
            .unwrap_or(default_estimator),
        kernel: e.parsed::<KernelFamily>("kernel", "{rectangular, epanechnikov, gaussian, polynomial}")?.unwrap_or(dp.kernel),
        kernel_order: match e.uint("order", 2, "even integers >= 2")? {
            Some(r) if r > u32::MAX as u64 => return Err(e.range("order", r, "even integers >= 2")),
            Some(r) => r as u32,
            None => dp.kernel_order,
        },
        t_grid: e.sizes("t_grid")?.unwrap_or_else(|| dp.t_grid.clone()),
        replications: e.usize("replications", 1, "[1, inf)")?.unwrap_or(dp.replications),
        z_points,
        master_seed: e.seed("seed")?.unwrap_or(dp.master_seed),
        bandwidth,
        scale: e.real("scale", |x| x > 0.0 && x.is_finite(), "(0, inf)")?,
        panel_n: e.usize("panel_n", 1, "[1, inf)")?.unwrap_or(dp.panel_n),
        panel_growth: e.real("panel_growth", |x| x >= 0.0 && x.is_finite(), "[0, inf)")?,
        zeta_override: e.real("zeta", |x| x >= 0.0 && x.is_finite(), "[0, inf)")?,
        denom_floor: e.real("denom_floor", |x| x > 0.0 && x.is_finite(), "(0, inf)")?.unwrap_or(dp.denom_floor),
    };
    plan.validate()?;

    let de = &defaults.envelope;
    let envelope = EnvelopeSettings {
        b: e.real("envelope_b", |x| x > 0.0 && x.is_finite(), "(0, inf)")?.unwrap_or(de.b),
        z: e.reals("envelope_z")?.unwrap_or_else(|| vec![0.0; plan.process.d]),
        max_lag: e.usize("envelope_max_lag", 1, "[1, inf)")?.unwrap_or(de.max_lag),
        replications: e.usize("envelope_replications", 50, "[50, inf)")?.unwrap_or(de.replications),
        window: e.usize("envelope_window", 1, "[1, inf)")?.unwrap_or(de.window),
        v: e.size("envelope_v")?,
    };
    if envelope.z.len() != plan.process.d {
        return Err(e.range("envelope_z", format!("{:?}", envelope.z), "points of the process dimension"));
    }
    let grid = e.points("grid")?;
    if let Some(bad) = grid.as_ref().and_then(|g| g.iter().find(|z| z.len() != plan.process.d)) {
        return Err(e.range("grid", format!("{bad:?}"), "points of the process dimension"));
    }

    Ok(RunConfig {
        plan,
        t: e.usize("t", 1, "[1, inf)")?.unwrap_or(defaults.t),
        alpha: e.real("alpha", |x| x >= 0.0 && x.is_finite(), "[0, inf)")?.unwrap_or(defaults.alpha),
        sample: e.str("sample")?.map(PathBuf::from),
        grid,
        envelope,
        output: OutputSettings {
            dir: o.str("dir")?.map(PathBuf::from),
            quiet: o.bool("quiet")?.unwrap_or(false),
        },
    })
}

fn real(x: f64) -> Value {
    if x >= f64::MAX {
        Value::Float(f64::INFINITY)
    } else {
        Value::Float(x)
    }
}

fn int(n: usize) -> Value {
    Value::Integer(n as i64)
}

fn points(p: &[Vec<f64>]) -> Value {
    Value::Array(p.iter().map(|z| Value::Array(z.iter().map(|&x| real(x)).collect())).collect())
}

fn scale_fn(h: ScaleFn) -> Value {
    match h {
        ScaleFn::Const(c) => real(c),
        ScaleFn::SqrtOnePlusSquare => Value::String("sqrt1p".into()),
    }
}

/// Writes every setting explicitly; [`parse_config`] reads the text back to an equal config.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let plan = &cfg.plan;
    let (m, p) = (&plan.model, &plan.process);

    let mut model = Table::new();
    model.insert("s".into(), real(m.s));
    model.insert("r".into(), int(m.r as usize));
    model.insert("d".into(), int(m.d));
    model.insert("q".into(), real(m.q));
    model.insert("q_f".into(), real(m.q_f));
    model.insert("q_g".into(), real(m.q_g));
    model.insert("v".into(), real(m.v));
    model.insert("u".into(), real(m.u));
    model.insert("theta".into(), real(m.theta));
    model.insert("ell".into(), real(m.ell));
    if !m.panel_smoothness.is_empty() {
        model.insert("panel_smoothness".into(), Value::Array(m.panel_smoothness.iter().map(|&s| real(s)).collect()));
    }

    let mut process = Table::new();
    process.insert("kind".into(), Value::String(p.kind.name().into()));
    process.insert("theta".into(), real(p.theta));
    process.insert("delta".into(), real(p.delta));
    if let Some(m) = p.truncation {
        process.insert("truncation".into(), int(m));
    }
    if let Some(b) = p.burn_in {
        process.insert("burn_in".into(), int(b));
    }
    process.insert("d".into(), int(p.d));
    if let Some(phi) = p.phi {
        process.insert("phi".into(), Value::String(phi.name().into()));
    }
    process.insert("h".into(), scale_fn(p.h));
    process.insert("sigma".into(), scale_fn(p.sigma));
    process.insert("innovation_bound".into(), real(p.innovation_bound));
    process.insert("arch_gate".into(), real(p.arch_gate));
    process.insert("arch_a0".into(), real(p.arch_a0));
    process.insert("dependent_design".into(), Value::Boolean(p.dependent_design));
    process.insert("factor_weight".into(), real(p.factor_weight));

    let mut exp = Table::new();
    exp.insert("estimator".into(), Value::String(plan.estimator.name().into()));
    exp.insert("kernel".into(), Value::String(plan.kernel.name().into()));
    exp.insert("order".into(), int(plan.kernel_order as usize));
    exp.insert("t_grid".into(), Value::Array(plan.t_grid.iter().map(|&t| int(t)).collect()));
    exp.insert("replications".into(), int(plan.replications));
    exp.insert("z_points".into(), points(&plan.z_points));
    exp.insert(
        "seed".into(),
        match i64::try_from(plan.master_seed) {
            Ok(s) => Value::Integer(s),
            Err(_) => Value::String(plan.master_seed.to_string()),
        },
    );
    exp.insert("bandwidth".into(), Value::String(plan.bandwidth.name().into()));
    if let BandwidthRule::Fixed(b) = plan.bandwidth {
        exp.insert("b".into(), real(b));
    }
    if let Some(c) = plan.scale {
        exp.insert("scale".into(), real(c));
    }
    exp.insert("panel_n".into(), int(plan.panel_n));
    if let Some(a) = plan.panel_growth {
        exp.insert("panel_growth".into(), real(a));
    }
    if let Some(z) = plan.zeta_override {
        exp.insert("zeta".into(), real(z));
    }
    exp.insert("denom_floor".into(), real(plan.denom_floor));
    exp.insert("t".into(), int(cfg.t));
    exp.insert("alpha".into(), real(cfg.alpha));
    if let Some(path) = &cfg.sample {
        exp.insert("sample".into(), Value::String(path.to_string_lossy().into_owned()));
    }
    if let Some(grid) = &cfg.grid {
        exp.insert("grid".into(), points(grid));
    }
    let env = &cfg.envelope;
    exp.insert("envelope_b".into(), real(env.b));
    exp.insert("envelope_z".into(), Value::Array(env.z.iter().map(|&x| real(x)).collect()));
    exp.insert("envelope_max_lag".into(), int(env.max_lag));
    exp.insert("envelope_replications".into(), int(env.replications));
    exp.insert("envelope_window".into(), int(env.window));
    if let Some(v) = env.v {
        exp.insert("envelope_v".into(), real(v));
    }

    let mut output = Table::new();
    if let Some(dir) = &cfg.output.dir {
        output.insert("dir".into(), Value::String(dir.to_string_lossy().into_owned()));
    }
    output.insert("quiet".into(), Value::Boolean(cfg.output.quiet));

    let mut doc = Table::new();
    doc.insert("model".into(), Value::Table(model));
    doc.insert("process".into(), Value::Table(process));
    doc.insert("experiment".into(), Value::Table(exp));
    doc.insert("output".into(), Value::Table(output));
    doc.to_string()
}
