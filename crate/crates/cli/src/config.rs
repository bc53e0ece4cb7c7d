//! Plain-text `key = value` experiment configuration.
//!
//! Lists are comma-separated; `#` starts a comment; unknown keys are hard
//! errors so typos cannot silently fall back to defaults. Power limits are
//! optional — when absent they derive from the coding power of the sweep
//! point (`P = K·p` per user uplink and per RRH downlink).

use std::fmt;

use paircof_core::system::{coding_power, SystemConfig};

/// Parse or validation failure with the offending line (1-based; 0 for
/// errors that are not tied to a line, e.g. CLI values).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "config line {}: {}", self.line, self.message)
        } else {
            write!(f, "config: {}", self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Raw experiment configuration as read from disk; sweep points materialize
/// it into a [`SystemConfig`].
#[derive(Debug, Clone)]
pub struct FileConfig {
    pub num_rrh: usize,
    pub num_users: usize,
    pub snr_db: f64,
    pub fronthaul: Vec<f64>,
    pub uplink_power: Option<Vec<f64>>,
    pub downlink_power: Option<Vec<f64>>,
    pub eps: f64,
    pub max_outer_iters: usize,
}

impl FileConfig {
    /// System configuration at a sweep point. `snr_db` and `fronthaul`
    /// override the file values along the swept axis.
    pub fn at_point(&self, snr_db: f64, fronthaul: Vec<f64>) -> SystemConfig {
        let p = coding_power(snr_db, self.num_users);
        let total = self.num_users as f64 * p;
        SystemConfig {
            num_rrh: self.num_rrh,
            num_users: self.num_users,
            snr_db,
            fronthaul_capacity: fronthaul,
            uplink_power_limits: self
                .uplink_power
                .clone()
                .unwrap_or_else(|| vec![total; self.num_users]),
            downlink_power_limits: self
                .downlink_power
                .clone()
                .unwrap_or_else(|| vec![total; self.num_rrh]),
            eps: self.eps,
            max_outer_iters: self.max_outer_iters,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.at_point(self.snr_db, self.fronthaul.clone())
            .check()
            .map_err(|m| ConfigError::new(0, m))
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .map_err(|_| ConfigError::new(line, format!("key `{key}` expects a number, got `{value}`")))
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse::<usize>().map_err(|_| {
        ConfigError::new(
            line,
            format!("key `{key}` expects a non-negative integer, got `{value}`"),
        )
    })
}

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|item| parse_f64(line, key, item.trim()))
        .collect()
}

/// Broadcast a one-element list to the requested length.
fn broadcast(list: Vec<f64>, len: usize) -> Vec<f64> {
    if list.len() == 1 && len > 1 {
        vec![list[0]; len]
    } else {
        list
    }
}

/// Parses the `key = value` format. Every key may appear at most once.
pub fn parse_config(text: &str) -> Result<FileConfig, ConfigError> {
    let mut num_rrh = None;
    let mut num_users = None;
    let mut snr_db = None;
    let mut fronthaul: Option<Vec<f64>> = None;
    let mut uplink_power: Option<Vec<f64>> = None;
    let mut downlink_power: Option<Vec<f64>> = None;
    let mut eps = None;
    let mut max_outer_iters = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::new(
                line_no,
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let key = key.trim();
        let value = value.trim();
        if value.is_empty() {
            return Err(ConfigError::new(line_no, format!("key `{key}` has no value")));
        }
        let duplicate = |set: bool| -> Result<(), ConfigError> {
            if set {
                Err(ConfigError::new(line_no, format!("duplicate key `{key}`")))
            } else {
                Ok(())
            }
        };
        match key {
            "rrh" => {
                duplicate(num_rrh.is_some())?;
                num_rrh = Some(parse_usize(line_no, key, value)?);
            }
            "users" => {
                duplicate(num_users.is_some())?;
                num_users = Some(parse_usize(line_no, key, value)?);
            }
            "snr_db" => {
                duplicate(snr_db.is_some())?;
                snr_db = Some(parse_f64(line_no, key, value)?);
            }
            "fronthaul" => {
                duplicate(fronthaul.is_some())?;
                fronthaul = Some(parse_list(line_no, key, value)?);
            }
            "uplink_power" => {
                duplicate(uplink_power.is_some())?;
                uplink_power = Some(parse_list(line_no, key, value)?);
            }
            "downlink_power" => {
                duplicate(downlink_power.is_some())?;
                downlink_power = Some(parse_list(line_no, key, value)?);
            }
            "eps" => {
                duplicate(eps.is_some())?;
                eps = Some(parse_f64(line_no, key, value)?);
            }
            "max_outer_iters" => {
                duplicate(max_outer_iters.is_some())?;
                max_outer_iters = Some(parse_usize(line_no, key, value)?);
            }
            other => {
                return Err(ConfigError::new(line_no, format!("unknown key `{other}`")));
            }
        }
    }

    let num_rrh = num_rrh.ok_or_else(|| ConfigError::new(0, "missing key `rrh`"))?;
    let num_users = num_users.ok_or_else(|| ConfigError::new(0, "missing key `users`"))?;
    let snr_db = snr_db.ok_or_else(|| ConfigError::new(0, "missing key `snr_db`"))?;
    let fronthaul = broadcast(
        fronthaul.ok_or_else(|| ConfigError::new(0, "missing key `fronthaul`"))?,
        num_rrh,
    );
    let cfg = FileConfig {
        num_rrh,
        num_users,
        snr_db,
        fronthaul,
        uplink_power: uplink_power.map(|l| broadcast(l, num_users)),
        downlink_power: downlink_power.map(|l| broadcast(l, num_rrh)),
        eps: eps.unwrap_or(1e-6),
        max_outer_iters: max_outer_iters.unwrap_or(20),
    };
    cfg.validate()?;
    Ok(cfg)
}
