//! Experiment configuration: flat `key = value` text with dotted keys,
//! defaults matching the reference scenario (60-agent geometric graph with
//! 50 legitimate agents, four trust regimes, c = 0.9 over a six-point gamma
//! grid, T = 1000, 1000 runs). Any field can be overridden by file or by
//! CLI flags, flags taking precedence.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::protocol::MaliciousParams;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub legit: usize,
    pub radius: f64,
    /// `(mu_legit, mu_malicious)` pairs.
    pub regimes: Vec<(f64, f64)>,
    pub c: f64,
    pub gammas: Vec<f64>,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub eta: f64,
    pub malicious: MaliciousParams,
    pub output_dir: Option<PathBuf>,
    pub write_traces: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 60,
            legit: 50,
            radius: 0.2,
            regimes: vec![(0.55, 0.45), (0.60, 0.40), (0.65, 0.35), (0.70, 0.30)],
            c: 0.9,
            gammas: vec![0.005, 0.01, 0.02, 0.05, 0.1, 0.2],
            horizon: 1000,
            runs: 1000,
            seed: 7,
            eta: 1.0,
            malicious: MaliciousParams::default(),
            output_dir: None,
            write_traces: false,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_regimes(value: &str) -> Result<Vec<(f64, f64)>> {
    value
        .split(',')
        .map(|pair| {
            let (l, m) = pair
                .trim()
                .split_once('/')
                .ok_or_else(|| {
                    Error::Config(format!("trust.regimes: expected muL/muM, got {pair:?}"))
                })?;
            Ok((parse_num("trust.regimes", l)?, parse_num("trust.regimes", m)?))
        })
        .collect()
}

impl ExperimentConfig {
    /// Applies one dotted-key override. Unknown keys are configuration
    /// errors so typos do not silently fall back to defaults.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "topology.n" => self.n = parse_num(key, value)?,
            "topology.legit" => self.legit = parse_num(key, value)?,
            "topology.radius" => self.radius = parse_num(key, value)?,
            "trust.regimes" => self.regimes = parse_regimes(value)?,
            "schedule.c" => self.c = parse_num(key, value)?,
            "schedule.gammas" => {
                self.gammas = value
                    .split(',')
                    .map(|g| parse_num("schedule.gammas", g))
                    .collect::<Result<_>>()?
            }
            "horizon" => self.horizon = parse_num(key, value)?,
            "runs" => self.runs = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "eta" => self.eta = parse_num(key, value)?,
            "malicious.rel_amplitude" => self.malicious.rel_amplitude = parse_num(key, value)?,
            "malicious.period" => self.malicious.period = parse_num(key, value)?,
            "malicious.noise_sigma" => self.malicious.noise_sigma = parse_num(key, value)?,
            "output.dir" => self.output_dir = Some(PathBuf::from(value.trim())),
            "output.traces" => {
                self.write_traces = match value.trim() {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(Error::Config(format!(
                            "output.traces: expected true or false, got {other:?}"
                        )))
                    }
                }
            }
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    pub fn from_str_content(content: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got {line:?}", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)?;
        Self::from_str_content(&content)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("topology.n: need at least 2 agents, got {}", self.n)));
        }
        if self.legit == 0 || self.legit > self.n {
            return Err(Error::Config(format!(
                "topology.legit: must be in 1..={}, got {}",
                self.n, self.legit
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!(
                "topology.radius: must be positive, got {}",
                self.radius
            )));
        }
        if self.regimes.is_empty() {
            return Err(Error::Config("trust.regimes: need at least one regime".into()));
        }
        for &(mu_l, mu_m) in &self.regimes {
            if !(mu_l > 0.5 && mu_l <= 1.0) || !(mu_m >= 0.0 && mu_m < 0.5) {
                return Err(Error::Config(format!(
                    "trust.regimes: need muL in (0.5, 1] and muM in [0, 0.5), got {mu_l}/{mu_m}"
                )));
            }
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::Config(format!("schedule.c: must be in (0, 1), got {}", self.c)));
        }
        if self.gammas.is_empty() {
            return Err(Error::Config("schedule.gammas: need at least one value".into()));
        }
        for &g in &self.gammas {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("schedule.gammas: must be positive, got {g}")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon: must be at least 1".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs: must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta: must be positive, got {}", self.eta)));
        }
        self.malicious.validate()?;
        if self.write_traces && self.output_dir.is_none() {
            return Err(Error::Config("output.traces=true requires output.dir".into()));
        }
        Ok(())
    }

    pub fn malicious_count(&self) -> usize {
        self.n - self.legit
    }
}
