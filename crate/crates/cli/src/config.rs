//! Scenario files: `key = value` lines or one JSON object.

use std::fmt;
use std::path::{Path, PathBuf};

use fracfp::evolution::{DiffusionSolver, SchemeConfig, Splitting};
use fracfp::functionals::p_gamma;
use fracfp::{build_grid, Exterior, Grid, Method, OperatorConfig};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Evolve,
    Steady,
    Rates,
    Inequalities,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Suite> {
        Some(match s {
            "evolve" => Suite::Evolve,
            "steady" => Suite::Steady,
            "rates" => Suite::Rates,
            "inequalities" => Suite::Inequalities,
            "all" => Suite::All,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Evolve => "evolve",
            Suite::Steady => "steady",
            Suite::Rates => "rates",
            Suite::Inequalities => "inequalities",
            Suite::All => "all",
        }
    }

    pub fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub name: String,
    pub d: usize,
    pub l: f64,
    pub n: usize,
    pub alpha: f64,
    pub gamma: f64,
    /// Weight exponent of the monitored norms (and the heavy weight of the polynomial regime).
    pub k: f64,
    /// Lighter weight of the polynomial regime.
    pub k_light: f64,
    /// Lebesgue exponent of the convergence norms.
    pub p: f64,
    pub theta: f64,
    pub method: Method,
    pub exterior: Exterior,
    pub dt: Option<f64>,
    pub splitting: Splitting,
    pub diffusion: DiffusionSolver,
    pub cfl: f64,
    pub horizon: f64,
    pub output_times: Vec<f64>,
    pub seed: u64,
    pub suite: Suite,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> ConfigError {
        ConfigError { line: Some(line), message: message.into() }
    }

    fn plain(message: impl Into<String>) -> ConfigError {
        ConfigError { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

pub const KEYS: &[&str] = &[
    "name", "d", "L", "n", "alpha", "gamma", "k", "k_light", "p", "theta", "method", "exterior", "dt", "splitting",
    "diffusion", "cfl", "horizon", "output_times", "seed", "suite", "out",
];

fn default_times(horizon: f64) -> Vec<f64> {
    (0..=40).map(|i| horizon * i as f64 / 40.0).collect()
}

/// Raw values before validation. Unset fields take the documented defaults.
#[derive(Default)]
struct Raw {
    entries: Vec<(String, Value, usize)>,
}

impl Raw {
    fn get(&self, key: &str) -> Option<&(String, Value, usize)> {
        self.entries.iter().find(|(k, _, _)| k == key)
    }
}

fn scalar(text: &str) -> Value {
    let t = text.trim();
    if let Ok(v) = t.parse::<f64>() {
        return serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::String(t.into()));
    }
    if t.contains(',') {
        return Value::Array(t.split(',').map(scalar).collect());
    }
    Value::String(t.trim_matches('"').to_string())
}

fn parse_kv(text: &str) -> Result<Raw, ConfigError> {
    let mut raw = Raw::default();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::at(ln, format!("expected `key = value`, got `{line}`")));
        };
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(ConfigError::at(ln, format!("unknown key `{k}`")));
        }
        if raw.get(k).is_some() {
            return Err(ConfigError::at(ln, format!("duplicate key `{k}`")));
        }
        raw.entries.push((k.to_string(), scalar(v), ln));
    }
    Ok(raw)
}

fn line_of(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map_or(1, |i| i + 1)
}

fn parse_json(text: &str) -> Result<Raw, ConfigError> {
    let v: Value = serde_json::from_str(text).map_err(|e| ConfigError::at(e.line(), e.to_string()))?;
    let Value::Object(map) = v else {
        return Err(ConfigError::at(1, "JSON config must be an object"));
    };
    let mut raw = Raw::default();
    for (k, v) in map {
        let ln = line_of(text, &k);
        if !KEYS.contains(&k.as_str()) {
            return Err(ConfigError::at(ln, format!("unknown key `{k}`")));
        }
        raw.entries.push((k, v, ln));
    }
    Ok(raw)
}

fn num(raw: &Raw, key: &str) -> Result<Option<f64>, ConfigError> {
    match raw.get(key) {
        None => Ok(None),
        Some((_, Value::Number(x), _)) => Ok(x.as_f64()),
        Some((_, v, ln)) => Err(ConfigError::at(*ln, format!("`{key}` must be a number, got {v}"))),
    }
}

fn int(raw: &Raw, key: &str) -> Result<Option<usize>, ConfigError> {
    match num(raw, key)? {
        None => Ok(None),
        Some(x) if x >= 0.0 && x.fract() == 0.0 && x < 1e15 => Ok(Some(x as usize)),
        Some(x) => Err(ConfigError::at(raw.get(key).map_or(1, |e| e.2), format!("`{key}` must be a nonnegative integer, got {x}"))),
    }
}

fn text(raw: &Raw, key: &str) -> Result<Option<(String, usize)>, ConfigError> {
    match raw.get(key) {
        None => Ok(None),
        Some((_, Value::String(s), ln)) => Ok(Some((s.clone(), *ln))),
        Some((_, Value::Number(x), ln)) => Ok(Some((x.to_string(), *ln))),
        Some((_, v, ln)) => Err(ConfigError::at(*ln, format!("`{key}` must be a string, got {v}"))),
    }
}

fn choice<T>(raw: &Raw, key: &str, default: T, f: impl Fn(&str) -> Option<T>, allowed: &str) -> Result<T, ConfigError> {
    match text(raw, key)? {
        None => Ok(default),
        Some((s, ln)) => f(&s).ok_or_else(|| ConfigError::at(ln, format!("`{key}` = `{s}` is not one of {allowed}"))),
    }
}

/// A short fraction for values such as `4/3`, otherwise the decimal.
pub fn pretty(x: f64) -> String {
    for q in 1..=24u32 {
        let p = x * q as f64;
        if (p - p.round()).abs() < 1e-9 * q as f64 {
            return if q == 1 { format!("{}", p.round()) } else { format!("{}/{q}", p.round()) };
        }
    }
    format!("{x}")
}

fn build(raw: &Raw) -> Result<ScenarioConfig, ConfigError> {
    let line = |key: &str| raw.get(key).map(|e| e.2);
    let err = |key: &str, msg: String| ConfigError { line: line(key), message: msg };
    let alpha = num(raw, "alpha")?.ok_or_else(|| ConfigError::plain("missing required key `alpha`"))?;
    let gamma = num(raw, "gamma")?.ok_or_else(|| ConfigError::plain("missing required key `gamma`"))?;
    let k = num(raw, "k")?.unwrap_or(0.5);
    let horizon = num(raw, "horizon")?.unwrap_or(10.0);
    let output_times = match raw.get("output_times") {
        None => default_times(horizon),
        Some((_, Value::Array(a), ln)) => a
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| ConfigError::at(*ln, format!("output time {v} is not a number"))))
            .collect::<Result<Vec<f64>, _>>()?,
        Some((_, Value::Number(x), _)) => vec![x.as_f64().unwrap_or(f64::NAN)],
        Some((_, v, ln)) => return Err(ConfigError::at(*ln, format!("`output_times` must be a list of numbers, got {v}"))),
    };
    let cfg = ScenarioConfig {
        name: text(raw, "name")?.map_or_else(|| "scenario".to_string(), |s| s.0),
        d: int(raw, "d")?.unwrap_or(1),
        l: num(raw, "L")?.unwrap_or(20.0),
        n: int(raw, "n")?.unwrap_or(1024),
        alpha,
        gamma,
        k,
        k_light: num(raw, "k_light")?.unwrap_or(0.5 * k),
        p: num(raw, "p")?.unwrap_or(1.0),
        theta: num(raw, "theta")?.unwrap_or(1.0),
        method: choice(
            raw,
            "method",
            Method::Quadrature,
            |s| match s {
                "quadrature" => Some(Method::Quadrature),
                "spectral" => Some(Method::Spectral),
                _ => None,
            },
            "quadrature, spectral",
        )?,
        exterior: choice(
            raw,
            "exterior",
            Exterior::Reinjected,
            |s| match s {
                "reinjected" => Some(Exterior::Reinjected),
                "censored" => Some(Exterior::Censored),
                "zero" => Some(Exterior::ZeroExtension),
                "periodic" => Some(Exterior::Periodic),
                _ => None,
            },
            "reinjected, censored, zero, periodic",
        )?,
        dt: num(raw, "dt")?,
        splitting: choice(
            raw,
            "splitting",
            Splitting::Strang,
            |s| match s {
                "strang" => Some(Splitting::Strang),
                "lie" => Some(Splitting::Lie),
                _ => None,
            },
            "strang, lie",
        )?,
        diffusion: choice(
            raw,
            "diffusion",
            DiffusionSolver::MatrixExponential,
            |s| match s {
                "expm" => Some(DiffusionSolver::MatrixExponential),
                "spectral" => Some(DiffusionSolver::ExactSpectral),
                "implicit" => Some(DiffusionSolver::ImplicitMatrix),
                _ => None,
            },
            "expm, spectral, implicit",
        )?,
        cfl: num(raw, "cfl")?.unwrap_or(0.9),
        horizon,
        output_times,
        seed: int(raw, "seed")?.unwrap_or(1) as u64,
        suite: choice(raw, "suite", Suite::All, Suite::parse, "evolve, steady, rates, inequalities, all")?,
        out: text(raw, "out")?.map_or_else(|| PathBuf::from("out"), |s| PathBuf::from(s.0)),
    };
    validate(&cfg).map_err(|(key, msg)| err(key, msg))?;
    Ok(cfg)
}

/// Every constraint the selected suite depends on, checked before any computation.
/// Errors carry the offending key.
pub fn validate(c: &ScenarioConfig) -> Result<(), (&'static str, String)> {
    build_grid(c.d, c.l, c.n).map_err(|e| ("n", e.to_string()))?;
    if !(c.alpha > 0.0 && c.alpha < 2.0) {
        return Err(("alpha", format!("alpha = {} must lie in (0, 2)", c.alpha)));
    }
    if !(c.gamma >= 1.0) || !c.gamma.is_finite() {
        return Err(("gamma", format!("gamma = {} must be finite and >= 1", c.gamma)));
    }
    let kmax = c.alpha.min(1.0);
    if !(c.k > 0.0 && c.k < kmax) {
        return Err(("k", format!("k = {} outside (0, min(alpha, 1)) = (0, {})", c.k, pretty(kmax))));
    }
    if !(c.k_light >= 0.0 && c.k_light <= c.k) {
        return Err(("k_light", format!("k_light = {} outside [0, k] = [0, {}]", c.k_light, c.k)));
    }
    if !(c.p >= 1.0) || !c.p.is_finite() {
        return Err(("p", format!("p = {} must be finite and >= 1", c.p)));
    }
    if let Some(pg) = p_gamma(c.d, c.gamma, c.k) {
        if c.p >= pg {
            return Err((
                "p",
                format!("p ≥ p_γ = {}: strict confinement for gamma > 2 requires p < 1 + k/(d + gamma - 2 - k)", pretty(pg)),
            ));
        }
    }
    if !(0.0..=1.0).contains(&c.theta) {
        return Err(("theta", format!("theta = {} outside [0, 1]", c.theta)));
    }
    if [Suite::Steady, Suite::Rates].iter().any(|s| c.suite.includes(*s)) && !(c.gamma > 2.0 - c.alpha) {
        return Err((
            "gamma",
            format!("the steady-state and convergence theorems require gamma > 2 - alpha = {}, got gamma = {}", pretty(2.0 - c.alpha), c.gamma),
        ));
    }
    if let Some(dt) = c.dt {
        if !(dt > 0.0) {
            return Err(("dt", format!("dt = {dt} must be positive")));
        }
    }
    if !(c.cfl > 0.0 && c.cfl <= 1.0) {
        return Err(("cfl", format!("cfl = {} outside (0, 1]", c.cfl)));
    }
    if !(c.horizon > 0.0) || !c.horizon.is_finite() {
        return Err(("horizon", format!("horizon = {} must be positive", c.horizon)));
    }
    if let Some(t) = c.output_times.iter().find(|t| !(**t >= 0.0 && **t <= c.horizon)) {
        return Err(("output_times", format!("output time {t} outside [0, horizon] = [0, {}]", c.horizon)));
    }
    Ok(())
}

/// Parse a config document; JSON when it starts with `{`.
pub fn parse_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw = if text.trim_start().starts_with('{') { parse_json(text)? } else { parse_kv(text)? };
    build(&raw)
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let bytes = std::fs::read(path).map_err(|e| ConfigError::plain(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes).map_err(|_| ConfigError::plain(format!("{}: not valid UTF-8", path.display())))?;
    parse_str(&text).map_err(|e| ConfigError { message: format!("{}: {}", path.display(), e.message), ..e })
}

impl ScenarioConfig {
    pub fn grid(&self) -> Grid {
        build_grid(self.d, self.l, self.n).expect("validated grid")
    }

    pub fn operator(&self) -> OperatorConfig {
        OperatorConfig::new(self.alpha, self.gamma).with_method(self.method).with_exterior(self.exterior)
    }

    pub fn scheme(&self) -> SchemeConfig {
        let s = SchemeConfig::default().with_splitting(self.splitting).with_diffusion(self.diffusion).with_cfl(self.cfl);
        match self.dt {
            Some(dt) => s.with_dt(dt),
            None => s,
        }
    }

    /// `key = value` lines that reproduce this scenario.
    pub fn echo(&self) -> Vec<(String, String)> {
        let g = |v: f64| format!("{v}");
        let times = self.output_times.iter().map(|t| g(*t)).collect::<Vec<_>>().join(",");
        vec![
            ("name".into(), self.name.clone()),
            ("d".into(), self.d.to_string()),
            ("L".into(), g(self.l)),
            ("n".into(), self.n.to_string()),
            ("alpha".into(), g(self.alpha)),
            ("gamma".into(), g(self.gamma)),
            ("k".into(), g(self.k)),
            ("k_light".into(), g(self.k_light)),
            ("p".into(), g(self.p)),
            ("theta".into(), g(self.theta)),
            ("method".into(), format!("{:?}", self.method).to_lowercase()),
            ("exterior".into(), format!("{:?}", self.exterior).to_lowercase()),
            ("dt".into(), self.dt.map_or_else(|| "auto".into(), g)),
            ("splitting".into(), format!("{:?}", self.splitting).to_lowercase()),
            ("diffusion".into(), format!("{:?}", self.diffusion).to_lowercase()),
            ("cfl".into(), g(self.cfl)),
            ("horizon".into(), g(self.horizon)),
            ("output_times".into(), times),
            ("seed".into(), self.seed.to_string()),
            ("suite".into(), self.suite.name().into()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse_str("name = m\nd = 1\nalpha = 1\ngamma = 2\n").unwrap();
        assert_eq!((c.l, c.n, c.k, c.suite), (20.0, 1024, 0.5, Suite::All));
        assert_eq!(c.name, "m");
        assert_eq!(c.output_times.len(), 41);
        assert_eq!(c.exterior, Exterior::Reinjected);
    }

    #[test]
    fn json_and_key_value_agree() {
        let a = parse_str("alpha = 1.5\ngamma = 2.5\nn = 256\noutput_times = 0, 1, 2\nsuite = rates\n").unwrap();
        let b = parse_str("{\"alpha\": 1.5, \"gamma\": 2.5, \"n\": 256, \"output_times\": [0, 1, 2], \"suite\": \"rates\"}").unwrap();
        assert_eq!(a.echo(), b.echo());
        assert_eq!(a.output_times, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn strict_confinement_exponent_is_enforced() {
        let e = parse_str("d = 1\nalpha = 1\ngamma = 3\nk = 0.5\np = 2\n").unwrap_err();
        assert!(e.message.contains("p ≥ p_γ = 4/3"), "{e}");
        assert_eq!(e.line, Some(5));
        assert!(parse_str("alpha = 1\ngamma = 3\nk = 0.5\np = 1.3\n").is_ok());
    }

    #[test]
    fn weight_exponent_range() {
        let e = parse_str("alpha = 1\ngamma = 2\nk = 1.2\n").unwrap_err();
        assert!(e.message.contains("k = 1.2 outside (0, min(alpha, 1)) = (0, 1)"), "{e}");
        assert_eq!(e.line, Some(3));
        assert!(parse_str("alpha = 0.5\ngamma = 2\nk = 0.5\n").is_err());
    }

    #[test]
    fn regime_is_checked_for_steady_and_rates_only() {
        let e = parse_str("alpha = 0.5\ngamma = 1.2\nk = 0.3\nsuite = steady\n").unwrap_err();
        assert!(e.message.contains("gamma > 2 - alpha = 3/2"), "{e}");
        assert!(parse_str("alpha = 0.5\ngamma = 1.2\nk = 0.3\nsuite = evolve\n").is_ok());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_str("alpha = 1\n\n# comment\nfoo = 3\ngamma = 2\n").unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(e.message.contains("unknown key `foo`"));
        let e = parse_str("alpha = 1\ngamma 2\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse_str("alpha = 1\nalpha = 1.5\ngamma = 2\n").unwrap_err();
        assert!(e.message.contains("duplicate"));
        let e = parse_str("{\n  \"alpha\": 1,\n  \"gama\": 2\n}").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = parse_str("{\n  \"alpha\": 1,\n  \"gamma\": \n}").unwrap_err();
        assert_eq!(e.line, Some(4));
        let e = parse_str("alpha = 1\ngamma = 2\nsuite = everything\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(parse_str("gamma = 2\n").unwrap_err().message.contains("alpha"));
    }

    #[test]
    fn grid_and_scheme_constraints() {
        assert!(parse_str("alpha = 1\ngamma = 2\nn = 1000\n").unwrap_err().message.contains("power of two"));
        assert!(parse_str("alpha = 1\ngamma = 2\ndt = -1\n").is_err());
        assert!(parse_str("alpha = 1\ngamma = 2\nhorizon = 1\noutput_times = 0, 2\n").is_err());
        assert!(parse_str("alpha = 2\ngamma = 2\n").is_err());
        assert!(parse_str("alpha = 1\ngamma = 2\nn = 2.5\n").is_err());
    }

    #[test]
    fn fractions_print_compactly() {
        assert_eq!(pretty(4.0 / 3.0), "4/3");
        assert_eq!(pretty(1.0), "1");
        assert_eq!(pretty(0.5), "1/2");
        assert_eq!(pretty(std::f64::consts::PI), format!("{}", std::f64::consts::PI));
    }
}
