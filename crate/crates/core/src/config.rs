//! Experiment configuration and its flat `key = value` text form.
//!
//! ```text
//! # comments start with '#'
//! users = 250
//! antennas = 100
//! kappa = 1, 10, 100      # lists are comma separated
//! snr_db = -20, -10, 0, 10, 20
//! ```
//!
//! List-valued keys (`active`, `antennas`, `pilot_len`, `kappa`, `snr_db`)
//! span a cartesian sweep. `inf` is accepted for `kappa` (pure LOS) and
//! `snr_db` (noiseless).

use std::fmt::Write as _;
use std::str::FromStr;

use crate::airlink::pattern_capacity;
use crate::error::{Error, Result};
use crate::estimate::{Detection, RvMode};
use crate::identify::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AoaMode {
    /// MUSIC on the received superframe.
    Estimated,
    /// True LOS angles of the active users.
    Genie,
}

impl AoaMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AoaMode::Estimated => "estimated",
            AoaMode::Genie => "genie",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceCount {
    /// MUSIC is told the number of active users.
    Known,
    /// Largest eigenvalue ratio.
    EigenGap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// K, size of the user population.
    pub users: usize,
    /// G values to sweep.
    pub active: Vec<usize>,
    /// M values to sweep.
    pub antennas: Vec<usize>,
    /// L values to sweep.
    pub pilot_len: Vec<usize>,
    /// U, subframes per superframe.
    pub subframes: usize,
    /// T_c, samples per subframe (pilot + data).
    pub coherence_len: usize,
    /// Data symbols used by the updated estimator.
    pub tau: usize,
    pub kappa: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// d/λ of the ULA.
    pub spacing: f64,
    pub methods: Vec<Method>,
    pub aoa_modes: Vec<AoaMode>,
    pub rv_mode: RvMode,
    pub detection: Detection,
    /// Baseline thresholds as multiples of the despread-noise RMS norm.
    pub threshold_scale: Vec<f64>,
    /// MUSIC grid points over [0, π].
    pub grid: usize,
    pub source_count: SourceCount,
    pub gain_min: f64,
    pub gain_max: f64,
    /// Minimum |cos θ_i − cos θ_j| between active users (0 disables).
    pub min_cos_gap: f64,
    /// Fixed active set instead of a random draw per trial.
    pub active_users: Option<Vec<usize>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            users: 250,
            active: vec![10],
            antennas: vec![100],
            pilot_len: vec![32],
            subframes: 4,
            coherence_len: 200,
            tau: 60,
            kappa: vec![10.0],
            snr_db: vec![0.0],
            trials: 1000,
            seed: 1,
            spacing: 0.5,
            methods: vec![Method::Proposed, Method::Baseline],
            aoa_modes: vec![AoaMode::Estimated],
            rv_mode: RvMode::Genie,
            detection: Detection::Hard,
            threshold_scale: vec![3.0],
            grid: 16384,
            source_count: SourceCount::Known,
            gain_min: 0.1,
            gain_max: 1.0,
            min_cos_gap: 0.0,
            active_users: None,
        }
    }
}

/// Keys in the order they are written.
pub const KEYS: &[&str] = &[
    "users",
    "active",
    "antennas",
    "pilot_len",
    "subframes",
    "coherence_len",
    "tau",
    "kappa",
    "snr_db",
    "trials",
    "seed",
    "array",
    "spacing",
    "methods",
    "aoa_modes",
    "rv_mode",
    "detection",
    "threshold_scale",
    "grid",
    "source_count",
    "gain_min",
    "gain_max",
    "min_cos_gap",
    "active_users",
];

fn parse_one<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse::<T>()
        .map_err(|_| Error::config(key, format!("cannot parse `{}`", v.trim())))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_one(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::config(key, "empty list"));
    }
    Ok(items)
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = parse_one(key, v)?;
    if x.is_nan() {
        return Err(Error::config(key, "NaN is not allowed"));
    }
    Ok(x)
}

fn parse_f64_list(key: &str, v: &str) -> Result<Vec<f64>> {
    parse_list::<String>(key, v)?
        .iter()
        .map(|s| parse_f64(key, s))
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Parses a config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key = value` lines without validating.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(
                    format!("line {}", n + 1),
                    format!("expected key = value, got `{line}`"),
                ));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Sets one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "users" => self.users = parse_one(key, value)?,
            "active" => self.active = parse_list(key, value)?,
            "antennas" => self.antennas = parse_list(key, value)?,
            "pilot_len" => self.pilot_len = parse_list(key, value)?,
            "subframes" => self.subframes = parse_one(key, value)?,
            "coherence_len" => self.coherence_len = parse_one(key, value)?,
            "tau" => self.tau = parse_one(key, value)?,
            "kappa" => self.kappa = parse_f64_list(key, value)?,
            "snr_db" => self.snr_db = parse_f64_list(key, value)?,
            "trials" => self.trials = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "array" => {
                if value != "ula" {
                    return Err(Error::config(key, "experiments run on a ULA (`array = ula`)"));
                }
            }
            "spacing" => self.spacing = parse_f64(key, value)?,
            "methods" => {
                self.methods = parse_list::<String>(key, value)?
                    .iter()
                    .map(|s| match s.as_str() {
                        "proposed" => Ok(Method::Proposed),
                        "baseline" => Ok(Method::Baseline),
                        other => Err(Error::config(key, format!("unknown method `{other}`"))),
                    })
                    .collect::<Result<_>>()?
            }
            "aoa_modes" => {
                self.aoa_modes = parse_list::<String>(key, value)?
                    .iter()
                    .map(|s| match s.as_str() {
                        "estimated" => Ok(AoaMode::Estimated),
                        "genie" => Ok(AoaMode::Genie),
                        other => Err(Error::config(key, format!("unknown AOA mode `{other}`"))),
                    })
                    .collect::<Result<_>>()?
            }
            "rv_mode" => {
                self.rv_mode = match value {
                    "genie" => RvMode::Genie,
                    "estimated" => RvMode::Estimated,
                    other => return Err(Error::config(key, format!("unknown R_v mode `{other}`"))),
                }
            }
            "detection" => {
                self.detection = match value {
                    "hard" => Detection::Hard,
                    "soft" => Detection::Soft,
                    other => return Err(Error::config(key, format!("unknown detection `{other}`"))),
                }
            }
            "threshold_scale" => self.threshold_scale = parse_f64_list(key, value)?,
            "grid" => self.grid = parse_one(key, value)?,
            "source_count" => {
                self.source_count = match value {
                    "known" => SourceCount::Known,
                    "eigengap" => SourceCount::EigenGap,
                    other => return Err(Error::config(key, format!("unknown source count mode `{other}`"))),
                }
            }
            "gain_min" => self.gain_min = parse_f64(key, value)?,
            "gain_max" => self.gain_max = parse_f64(key, value)?,
            "min_cos_gap" => self.min_cos_gap = parse_f64(key, value)?,
            "active_users" => {
                self.active_users = if value == "none" || value.is_empty() {
                    None
                } else {
                    Some(parse_list(key, value)?)
                }
            }
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    /// Checks every cross-field constraint; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: usize| {
            if v == 0 {
                Err(Error::config(key, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        positive("users", self.users)?;
        positive("subframes", self.subframes)?;
        positive("coherence_len", self.coherence_len)?;
        positive("tau", self.tau)?;
        positive("trials", self.trials)?;
        for &g in &self.active {
            positive("active", g)?;
            if g > self.users {
                return Err(Error::config("active", format!("G = {g} exceeds K = {}", self.users)));
            }
            if self.tau <= g {
                return Err(Error::config("tau", format!("tau = {} must exceed G = {g}", self.tau)));
            }
        }
        for &m in &self.antennas {
            positive("antennas", m)?;
            if self.aoa_modes.contains(&AoaMode::Estimated) && self.methods.contains(&Method::Proposed) {
                if let Some(&g) = self.active.iter().find(|&&g| g >= m) {
                    return Err(Error::config(
                        "antennas",
                        format!("MUSIC needs G < M (G = {g}, M = {m})"),
                    ));
                }
            }
        }
        for &l in &self.pilot_len {
            positive("pilot_len", l)?;
            if l >= self.coherence_len {
                return Err(Error::config(
                    "pilot_len",
                    format!("L = {l} leaves no data in T_c = {}", self.coherence_len),
                ));
            }
            if self.tau > self.coherence_len - l {
                return Err(Error::config(
                    "tau",
                    format!(
                        "tau = {} exceeds the {} data symbols per subframe",
                        self.tau,
                        self.coherence_len - l
                    ),
                ));
            }
            let cap = pattern_capacity(l, self.subframes);
            if self.users as u128 > cap {
                return Err(Error::config(
                    "users",
                    format!("K = {} exceeds L^U = {cap}", self.users),
                ));
            }
        }
        if self.kappa.iter().any(|&k| !(k >= 0.0)) {
            return Err(Error::config("kappa", "Rician factors must be >= 0"));
        }
        if self.snr_db.contains(&f64::NEG_INFINITY) {
            return Err(Error::config("snr_db", "SNR must be finite or +inf"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::config("spacing", "must be > 0"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "empty"));
        }
        if self.aoa_modes.is_empty() {
            return Err(Error::config("aoa_modes", "empty"));
        }
        if self.threshold_scale.iter().any(|&c| !(c >= 0.0)) {
            return Err(Error::config("threshold_scale", "must be >= 0"));
        }
        if self.grid < 2 {
            return Err(Error::config("grid", "needs at least 2 points"));
        }
        if !(self.gain_min > 0.0 && self.gain_min <= self.gain_max && self.gain_max.is_finite()) {
            return Err(Error::config("gain_min", "need 0 < gain_min <= gain_max"));
        }
        if !(self.min_cos_gap >= 0.0 && self.min_cos_gap < 2.0) {
            return Err(Error::config("min_cos_gap", "must lie in [0, 2)"));
        }
        if let Some(list) = &self.active_users {
            if list.iter().any(|&u| u >= self.users) {
                return Err(Error::config("active_users", "user id out of range"));
            }
            let mut sorted = list.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != list.len() {
                return Err(Error::config("active_users", "duplicate user id"));
            }
            if self.active != [list.len()] {
                return Err(Error::config("active", "must equal the length of active_users"));
            }
        }
        Ok(())
    }

    /// Canonical text form; parses back to an identical config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let methods: Vec<String> = self.methods.iter().map(ToString::to_string).collect();
        let modes: Vec<&str> = self.aoa_modes.iter().map(AoaMode::as_str).collect();
        let lines: Vec<(&str, String)> = vec![
            ("users", self.users.to_string()),
            ("active", join(&self.active)),
            ("antennas", join(&self.antennas)),
            ("pilot_len", join(&self.pilot_len)),
            ("subframes", self.subframes.to_string()),
            ("coherence_len", self.coherence_len.to_string()),
            ("tau", self.tau.to_string()),
            ("kappa", join(&self.kappa)),
            ("snr_db", join(&self.snr_db)),
            ("trials", self.trials.to_string()),
            ("seed", self.seed.to_string()),
            ("array", "ula".to_string()),
            ("spacing", self.spacing.to_string()),
            ("methods", methods.join(", ")),
            ("aoa_modes", modes.join(", ")),
            (
                "rv_mode",
                match self.rv_mode {
                    RvMode::Genie => "genie",
                    RvMode::Estimated => "estimated",
                }
                .to_string(),
            ),
            (
                "detection",
                match self.detection {
                    Detection::Hard => "hard",
                    Detection::Soft => "soft",
                }
                .to_string(),
            ),
            ("threshold_scale", join(&self.threshold_scale)),
            ("grid", self.grid.to_string()),
            (
                "source_count",
                match self.source_count {
                    SourceCount::Known => "known",
                    SourceCount::EigenGap => "eigengap",
                }
                .to_string(),
            ),
            ("gain_min", self.gain_min.to_string()),
            ("gain_max", self.gain_max.to_string()),
            ("min_cos_gap", self.min_cos_gap.to_string()),
            (
                "active_users",
                self.active_users.as_ref().map_or("none".to_string(), |v| join(v)),
            ),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
