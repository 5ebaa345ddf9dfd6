//! System configuration: every physical, protocol and traffic parameter in
//! one validated record, plus the flat `key = value` file format.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::ConfigError;

/// How the PHY layer is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhyMode {
    /// Infinite-antenna limit: correlation statistics equal their means.
    Asymptotic,
    /// Explicit Rayleigh channels and noise with `antennas` antennas.
    FiniteM,
}

impl PhyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PhyMode::Asymptotic => "asymptotic",
            PhyMode::FiniteM => "finite_m",
        }
    }
}

impl fmt::Display for PhyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "asymptotic" => Ok(PhyMode::Asymptotic),
            "finite_m" | "finite-m" => Ok(PhyMode::FiniteM),
            other => Err(format!("unknown phy mode `{other}`")),
        }
    }
}

/// Access protocol run in Step 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    /// Strongest-user collision resolution only.
    Sucr,
    /// SUCR plus ACB-gated contention for the idle pilots.
    SucrIpa,
}

impl Protocol {
    pub const BOTH: [Protocol; 2] = [Protocol::Sucr, Protocol::SucrIpa];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Sucr => "sucr",
            Protocol::SucrIpa => "sucr-ipa",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sucr" => Ok(Protocol::Sucr),
            "sucr-ipa" | "sucr_ipa" => Ok(Protocol::SucrIpa),
            other => Err(format!("unknown protocol `{other}`")),
        }
    }
}

/// All model parameters. Times are in milliseconds, powers are linear.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub antennas: usize,
    pub total_arrivals: usize,
    pub pilots: usize,
    pub pilot_length: usize,
    pub slots: usize,
    pub slot_interval: f64,
    pub max_attempts: u32,
    /// Backoff window in whole milliseconds; B is drawn from `1..=backoff_window`.
    pub backoff_window: u32,
    pub ul_power: f64,
    pub dl_power: f64,
    pub noise_var: f64,
    pub cell_radius: f64,
    pub min_distance: f64,
    pub pathloss_exp: f64,
    pub traffic_alpha: f64,
    pub traffic_theta: f64,
    pub phy_mode: PhyMode,
    pub decision_bias: f64,
    pub idle_threshold: f64,
    pub seed: u64,
    pub mc_replications: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            antennas: 50,
            total_arrivals: 2000,
            pilots: 60,
            pilot_length: 64,
            slots: 100,
            slot_interval: 10.0,
            max_attempts: 10,
            backoff_window: 20,
            ul_power: 1.0,
            dl_power: 1.0,
            noise_var: 1.0,
            cell_radius: 250.0,
            min_distance: 25.0,
            pathloss_exp: 3.8,
            traffic_alpha: 3.0,
            traffic_theta: 4.0,
            phy_mode: PhyMode::Asymptotic,
            decision_bias: 0.0,
            idle_threshold: 2.0,
            seed: 1,
            mc_replications: 20_000,
        }
    }
}

/// Field names accepted in a raw parameter map, in canonical order.
pub const FIELDS: [&str; 21] = [
    "antennas",
    "total_arrivals",
    "pilots",
    "pilot_length",
    "slots",
    "slot_interval",
    "max_attempts",
    "backoff_window",
    "ul_power",
    "dl_power",
    "noise_var",
    "cell_radius",
    "min_distance",
    "pathloss_exp",
    "traffic_alpha",
    "traffic_theta",
    "phy_mode",
    "decision_bias",
    "idle_threshold",
    "seed",
    "mc_replications",
];

fn parse_field<T: FromStr>(raw: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    match raw.get(key) {
        None => Ok(default),
        Some(v) => v
            .trim()
            .parse()
            .map_err(|e| ConfigError::new(key, format!("cannot parse `{v}`: {e}"))),
    }
}

/// Builds a config from a raw key/value map, filling absent fields with the
/// defaults and checking every invariant.
///
/// `idle_threshold` defaults to twice `noise_var` when absent.
pub fn validate_config(raw: &BTreeMap<String, String>) -> Result<SystemConfig, ConfigError> {
    if let Some(unknown) = raw.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(ConfigError::new(unknown.as_str(), "unknown key"));
    }
    let d = SystemConfig::default();
    let noise_var: f64 = parse_field(raw, "noise_var", d.noise_var)?;
    let cfg = SystemConfig {
        antennas: parse_field(raw, "antennas", d.antennas)?,
        total_arrivals: parse_field(raw, "total_arrivals", d.total_arrivals)?,
        pilots: parse_field(raw, "pilots", d.pilots)?,
        pilot_length: parse_field(raw, "pilot_length", d.pilot_length)?,
        slots: parse_field(raw, "slots", d.slots)?,
        slot_interval: parse_field(raw, "slot_interval", d.slot_interval)?,
        max_attempts: parse_field(raw, "max_attempts", d.max_attempts)?,
        backoff_window: parse_field(raw, "backoff_window", d.backoff_window)?,
        ul_power: parse_field(raw, "ul_power", d.ul_power)?,
        dl_power: parse_field(raw, "dl_power", d.dl_power)?,
        noise_var,
        cell_radius: parse_field(raw, "cell_radius", d.cell_radius)?,
        min_distance: parse_field(raw, "min_distance", d.min_distance)?,
        pathloss_exp: parse_field(raw, "pathloss_exp", d.pathloss_exp)?,
        traffic_alpha: parse_field(raw, "traffic_alpha", d.traffic_alpha)?,
        traffic_theta: parse_field(raw, "traffic_theta", d.traffic_theta)?,
        phy_mode: parse_field(raw, "phy_mode", d.phy_mode)?,
        decision_bias: parse_field(raw, "decision_bias", d.decision_bias)?,
        idle_threshold: parse_field(raw, "idle_threshold", 2.0 * noise_var)?,
        seed: parse_field(raw, "seed", d.seed)?,
        mc_replications: parse_field(raw, "mc_replications", d.mc_replications)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl SystemConfig {
    /// Checks every invariant, naming the first offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("antennas", self.antennas),
            ("total_arrivals", self.total_arrivals),
            ("pilots", self.pilots),
            ("pilot_length", self.pilot_length),
            ("slots", self.slots),
            ("max_attempts", self.max_attempts as usize),
            ("backoff_window", self.backoff_window as usize),
            ("mc_replications", self.mc_replications),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ConfigError::new(name, "must be positive"));
            }
        }
        if self.pilot_length < self.pilots {
            return Err(ConfigError::new(
                "pilot_length",
                format!(
                    "L >= tau_p violated (pilot_length {} < pilots {})",
                    self.pilot_length, self.pilots
                ),
            ));
        }
        let strictly_positive = [
            ("slot_interval", self.slot_interval),
            ("ul_power", self.ul_power),
            ("dl_power", self.dl_power),
            ("noise_var", self.noise_var),
            ("traffic_alpha", self.traffic_alpha),
            ("traffic_theta", self.traffic_theta),
            ("min_distance", self.min_distance),
            ("idle_threshold", self.idle_threshold),
        ];
        for (name, v) in strictly_positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::new(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.min_distance < self.cell_radius) || !self.cell_radius.is_finite() {
            return Err(ConfigError::new(
                "min_distance",
                format!(
                    "0 < min_distance < cell_radius violated ({} vs {})",
                    self.min_distance, self.cell_radius
                ),
            ));
        }
        if !(self.pathloss_exp > 2.0) {
            return Err(ConfigError::new("pathloss_exp", "must be > 2"));
        }
        if !(self.decision_bias >= 0.0 && self.decision_bias.is_finite()) {
            return Err(ConfigError::new("decision_bias", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Number of slots that receive retries after the last arrival slot.
    pub fn tail_slots(&self) -> usize {
        (self.backoff_window as f64 / self.slot_interval).ceil() as usize
    }

    /// Arrival slots plus the retry tail.
    pub fn horizon(&self) -> usize {
        self.slots + self.tail_slots()
    }

    /// Receive gain of a UE at the cell edge relative to noise, `rho * L`.
    pub fn edge_pilot_gain(&self) -> f64 {
        self.ul_power * self.pilot_length as f64 * self.noise_var
    }

    /// Canonical `key = value` rendering, one line per field in [`FIELDS`] order.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("antennas", self.antennas.to_string()),
            ("total_arrivals", self.total_arrivals.to_string()),
            ("pilots", self.pilots.to_string()),
            ("pilot_length", self.pilot_length.to_string()),
            ("slots", self.slots.to_string()),
            ("slot_interval", self.slot_interval.to_string()),
            ("max_attempts", self.max_attempts.to_string()),
            ("backoff_window", self.backoff_window.to_string()),
            ("ul_power", self.ul_power.to_string()),
            ("dl_power", self.dl_power.to_string()),
            ("noise_var", self.noise_var.to_string()),
            ("cell_radius", self.cell_radius.to_string()),
            ("min_distance", self.min_distance.to_string()),
            ("pathloss_exp", self.pathloss_exp.to_string()),
            ("traffic_alpha", self.traffic_alpha.to_string()),
            ("traffic_theta", self.traffic_theta.to_string()),
            ("phy_mode", self.phy_mode.to_string()),
            ("decision_bias", self.decision_bias.to_string()),
            ("idle_threshold", self.idle_threshold.to_string()),
            ("seed", self.seed.to_string()),
            ("mc_replications", self.mc_replications.to_string()),
        ]
    }

    /// Short stable hash of the canonical rendering, used in output headers.
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses the flat config file format into a raw map.
///
/// One `key = value` pair per line; blank lines and `#` comments are skipped.
/// Duplicate keys are rejected.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::new(
                format!("line {}", lineno + 1),
                "expected `key = value`",
            ));
        };
        let key = k.trim().to_string();
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(ConfigError::new(key, "duplicate key"));
        }
    }
    Ok(map)
}

/// Parses and validates a config file's text.
pub fn load_config_text(text: &str) -> Result<SystemConfig, ConfigError> {
    validate_config(&parse_config_text(text)?)
}
