//! Run configuration: a flat `key = value` file whose keys can each be
//! overridden by a `--key value` flag.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chargedfield::{ArithmeticMode, Param, SugawaraFault};
use clap::Args;
use serde::Serialize;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Keys accepted in a config file and as flags.
pub const KEYS: &[&str] = &[
    "alpha0",
    "alpha_multiplier",
    "level_cutoff",
    "charge_window",
    "lambda",
    "arithmetic",
    "tolerance",
    "seed",
    "output",
    "n_max",
    "m_list",
    "m_range",
    "interior_buffer",
    "samples",
    "fault_injection",
    "cutoff_list",
    "delta",
    "m",
];

/// Flag overrides shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Flat key=value config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sector spacing: p/q, decimal, or sqrt(p/q)
    #[arg(long)]
    pub alpha0: Option<String>,
    /// Integer k with alpha = k * alpha0
    #[arg(long = "alpha_multiplier", alias = "alpha-multiplier", allow_hyphen_values = true)]
    pub alpha_multiplier: Option<String>,
    /// Largest chiral level kept
    #[arg(long = "level_cutoff", alias = "level-cutoff")]
    pub level_cutoff: Option<String>,
    /// Sector window "a,b"
    #[arg(long = "charge_window", alias = "charge-window", allow_hyphen_values = true)]
    pub charge_window: Option<String>,
    /// Perturbation strength
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    /// exact-rational | exact-gaussian | float
    #[arg(long)]
    pub arithmetic: Option<String>,
    /// Absolute tolerance in float mode
    #[arg(long)]
    pub tolerance: Option<String>,
    /// Seed for sampled test-vector pairs
    #[arg(long)]
    pub seed: Option<String>,
    /// Write results here instead of stdout
    #[arg(long)]
    pub output: Option<String>,
    /// Largest mode number in partial sums and slope fits
    #[arg(long = "n_max", alias = "n-max")]
    pub n_max: Option<String>,
    /// Comma-separated mode list
    #[arg(long = "m_list", alias = "m-list", allow_hyphen_values = true)]
    pub m_list: Option<String>,
    /// Largest |m|, |n| (and |delta|) checked
    #[arg(long = "m_range", alias = "m-range")]
    pub m_range: Option<String>,
    /// Levels kept clear below the cutoff when sampling pairs (default: half the cutoff)
    #[arg(long = "interior_buffer", alias = "interior-buffer")]
    pub interior_buffer: Option<String>,
    /// Number of sampled excited pairs
    #[arg(long)]
    pub samples: Option<String>,
    /// none | charged-cross-term
    #[arg(long = "fault_injection", alias = "fault-injection")]
    pub fault_injection: Option<String>,
    /// Comma-separated level cutoffs for convergence sweeps
    #[arg(long = "cutoff_list", alias = "cutoff-list")]
    pub cutoff_list: Option<String>,
    /// Level shift of an exported mode block
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<String>,
    /// Mode index of a dumped state
    #[arg(long, allow_hyphen_values = true)]
    pub m: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("alpha0", &self.alpha0),
            ("alpha_multiplier", &self.alpha_multiplier),
            ("level_cutoff", &self.level_cutoff),
            ("charge_window", &self.charge_window),
            ("lambda", &self.lambda),
            ("arithmetic", &self.arithmetic),
            ("tolerance", &self.tolerance),
            ("seed", &self.seed),
            ("output", &self.output),
            ("n_max", &self.n_max),
            ("m_list", &self.m_list),
            ("m_range", &self.m_range),
            ("interior_buffer", &self.interior_buffer),
            ("samples", &self.samples),
            ("fault_injection", &self.fault_injection),
            ("cutoff_list", &self.cutoff_list),
            ("delta", &self.delta),
            ("m", &self.m),
        ]
    }

    /// Config-file entries with the flags laid over them.
    pub fn merged(&self) -> Result<BTreeMap<String, String>, ConfigError> {
        let map = match &self.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        Ok(self.overlay(map))
    }

    fn overlay(&self, mut map: BTreeMap<String, String>) -> BTreeMap<String, String> {
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                map.insert(key.to_string(), v.clone());
            }
        }
        map
    }
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// `key = value` lines; `#` starts a comment; blank lines are ignored.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("line {}: expected key = value", i + 1));
        };
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return err(format!("line {}: unknown key {key}", i + 1));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

/// Fully parsed configuration. Keys left unset keep `None` where the default
/// depends on the subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub alpha0: Param,
    pub alpha_multiplier: i64,
    pub level_cutoff: u32,
    pub charge_window: (i64, i64),
    pub lambda: Param,
    pub arithmetic: Option<ArithmeticMode>,
    pub tolerance: f64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub n_max: u32,
    pub m_list: Vec<i64>,
    pub m_range: Option<i64>,
    pub interior_buffer: Option<u32>,
    pub samples: usize,
    pub fault: Option<SugawaraFault>,
    pub cutoff_list: Vec<u32>,
    pub delta: i64,
    pub m: i64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha0: Param::rational(1, 2),
            alpha_multiplier: 1,
            level_cutoff: 10,
            charge_window: (-2, 2),
            lambda: Param::rational(1, 4),
            arithmetic: None,
            tolerance: 1e-10,
            seed: 0,
            output: None,
            n_max: 512,
            m_list: vec![0],
            m_range: None,
            interior_buffer: None,
            samples: 4,
            fault: None,
            cutoff_list: vec![8, 10, 12],
            delta: 0,
            m: 0,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim().parse().map_err(|_| ConfigError(format!("{key}: cannot parse {v:?}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    let items: Result<Vec<T>, _> = v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num(key, s)).collect();
    let items = items?;
    if items.is_empty() {
        return err(format!("{key}: empty list"));
    }
    Ok(items)
}

impl RunConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        for (key, v) in map {
            match key.as_str() {
                "alpha0" => c.alpha0 = v.parse().map_err(|e| ConfigError(format!("alpha0: {e}")))?,
                "alpha_multiplier" => c.alpha_multiplier = parse_num(key, v)?,
                "level_cutoff" => c.level_cutoff = parse_num(key, v)?,
                "charge_window" => {
                    let w: Vec<i64> = parse_list(key, v)?;
                    if w.len() != 2 || w[0] > w[1] {
                        return err(format!("charge_window: expected \"a,b\" with a <= b, got {v:?}"));
                    }
                    c.charge_window = (w[0], w[1]);
                }
                "lambda" => c.lambda = v.parse().map_err(|e| ConfigError(format!("lambda: {e}")))?,
                "arithmetic" => c.arithmetic = Some(v.parse().map_err(|e| ConfigError(format!("arithmetic: {e}")))?),
                "tolerance" => {
                    c.tolerance = parse_num(key, v)?;
                    if !(c.tolerance >= 0.0 && c.tolerance.is_finite()) {
                        return err(format!("tolerance: must be finite and non-negative, got {v}"));
                    }
                }
                "seed" => c.seed = parse_num(key, v)?,
                "output" => c.output = Some(PathBuf::from(v)),
                "n_max" => c.n_max = parse_num(key, v)?,
                "m_list" => c.m_list = parse_list(key, v)?,
                "m_range" => c.m_range = Some(parse_num(key, v)?),
                "interior_buffer" => c.interior_buffer = Some(parse_num(key, v)?),
                "samples" => c.samples = parse_num(key, v)?,
                "fault_injection" => {
                    c.fault = match v.trim() {
                        "none" | "" => None,
                        "charged-cross-term" => Some(SugawaraFault::ChargedCrossTerm),
                        other => return err(format!("fault_injection: unknown fault {other:?}")),
                    }
                }
                "cutoff_list" => c.cutoff_list = parse_list(key, v)?,
                "delta" => c.delta = parse_num(key, v)?,
                "m" => c.m = parse_num(key, v)?,
                other => return err(format!("unknown key {other}")),
            }
        }
        if c.alpha_multiplier == 0 {
            return err("alpha_multiplier must be nonzero");
        }
        if c.alpha0.is_zero() {
            return err("alpha0 must be nonzero");
        }
        Ok(c)
    }

    /// `α = multiplier · α0`.
    pub fn alpha(&self) -> Param {
        self.alpha0.scaled(self.alpha_multiplier)
    }

    /// `d = α²/2` as a float, for preconditions and logging.
    pub fn dimension_f64(&self) -> f64 {
        let a = self.alpha().to_f64();
        a * a / 2.0
    }

    /// Echo of the effective settings for reports.
    pub fn summary(&self, arithmetic: ArithmeticMode) -> ConfigSummary {
        ConfigSummary {
            alpha0: self.alpha0.to_string(),
            alpha_multiplier: self.alpha_multiplier,
            level_cutoff: self.level_cutoff,
            charge_window: self.charge_window,
            lambda: self.lambda.to_string(),
            arithmetic: arithmetic.as_str().to_string(),
            tolerance: if arithmetic.is_exact() { 0.0 } else { self.tolerance },
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigSummary {
    pub alpha0: String,
    pub alpha_multiplier: i64,
    pub level_cutoff: u32,
    pub charge_window: (i64, i64),
    pub lambda: String,
    pub arithmetic: String,
    pub tolerance: f64,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let map = parse_config("# run\nalpha0 = 1/3\nlevel-cutoff = 6\n\ncharge_window = -1,1  # narrow\n").unwrap();
        let mut o = Overrides::default();
        o.level_cutoff = Some("8".into());
        let c = RunConfig::from_map(&o.overlay(map)).unwrap();
        assert_eq!(c.alpha0, Param::rational(1, 3));
        assert_eq!(c.level_cutoff, 8);
        assert_eq!(c.charge_window, (-1, 1));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(parse_config("alpha = 1").is_err());
        assert!(parse_config("just a line").is_err());
        let mut m = BTreeMap::new();
        m.insert("charge_window".to_string(), "2,-2".to_string());
        assert!(RunConfig::from_map(&m).is_err());
        m.clear();
        m.insert("alpha_multiplier".to_string(), "0".to_string());
        assert!(RunConfig::from_map(&m).is_err());
        m.clear();
        m.insert("arithmetic".to_string(), "fixed-point".to_string());
        assert!(RunConfig::from_map(&m).is_err());
    }

    #[test]
    fn irrational_alpha_and_dimension() {
        let mut m = BTreeMap::new();
        m.insert("alpha0".to_string(), "sqrt(1/2)".to_string());
        let c = RunConfig::from_map(&m).unwrap();
        assert!(!c.alpha0.is_rational());
        assert!((c.dimension_f64() - 0.25).abs() < 1e-15);
    }
}
