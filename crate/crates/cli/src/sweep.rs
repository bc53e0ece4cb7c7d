//! Monte-Carlo sweep over SNR or fronthaul capacity.
//!
//! Realizations are the unit of parallelism: each owns its RNG streams (the
//! channel draw and the downlink initializations are counter-derived from the
//! global seed and the realization index), so the output is a pure function
//! of `(config, spec)` at any worker count. Failed downlink realizations are
//! recorded with zero rate rather than dropped, keeping averages
//! reproducible.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use paircof_core::downlink::{end_to_end_rates, ido, DownlinkError};
use paircof_core::system::sample_channel;
use paircof_core::uplink::{
    baseline_individual_rates, effective_noise_factor, optimize_uplink, UplinkError,
};

use crate::config::{ConfigError, FileConfig};

/// Swept quantity; also names the axis column of the CSV outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SnrDb,
    FronthaulBits,
}

impl SweepAxis {
    pub fn column_name(self) -> &'static str {
        match self {
            Self::SnrDb => "snr_db",
            Self::FronthaulBits => "fronthaul_bits",
        }
    }
}

/// Transmission scheme evaluated per realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scheme {
    /// The pairwise two-way chain: optimized uplink, matched downlink,
    /// per-user end-to-end minimum.
    Multipair,
    /// Individual-codeword computation reference (uplink side only; its rate
    /// columns all carry the uplink computation rate).
    IndividualBaseline,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Multipair => "multipair",
            Self::IndividualBaseline => "individual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    NoFeasibleDownlink,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::NoFeasibleDownlink => "no_feasible_downlink",
        }
    }
}

/// Sweep description: axis, points, realization count, seed, schemes.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
}

impl SweepSpec {
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.values.is_empty() {
            return Err(ConfigError::new(0, "sweep needs at least one value"));
        }
        if !self.values.windows(2).all(|w| w[0] < w[1]) {
            return Err(ConfigError::new(0, "sweep values must be strictly increasing"));
        }
        if self.realizations == 0 {
            return Err(ConfigError::new(0, "need at least one realization"));
        }
        if self.schemes.is_empty() {
            return Err(ConfigError::new(0, "need at least one scheme"));
        }
        Ok(())
    }

    /// Schemes in canonical emission order, deduplicated.
    fn ordered_schemes(&self) -> Vec<Scheme> {
        let mut s = self.schemes.clone();
        s.sort();
        s.dedup();
        s
    }
}

/// One user's rates at one sweep point and realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub axis_value: f64,
    pub realization: usize,
    pub user: usize,
    pub scheme: Scheme,
    pub status: RowStatus,
    pub r_ul: f64,
    pub r_dl: f64,
    pub r_e2e: f64,
}

/// Aggregated curve point.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub axis_value: f64,
    pub scheme: Scheme,
    pub mean_sum_rate: f64,
    pub stderr: f64,
}

/// Counts reported on standard error after a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub realizations_evaluated: usize,
    pub no_feasible_downlink: usize,
}

#[derive(Debug)]
pub enum SweepError {
    Config(ConfigError),
    Uplink(UplinkError),
    Downlink(DownlinkError),
}

impl fmt::Display for SweepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "{e}"),
            Self::Uplink(e) => write!(f, "uplink optimization failed: {e}"),
            Self::Downlink(e) => write!(f, "downlink optimization failed: {e}"),
        }
    }
}

impl std::error::Error for SweepError {}

impl From<ConfigError> for SweepError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

/// Per-realization seed for the downlink initialization streams.
fn realization_seed(seed: u64, index: u64) -> u64 {
    seed ^ (index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn evaluate_realization(
    file_cfg: &FileConfig,
    spec: &SweepSpec,
    axis_value: f64,
    index: usize,
    schemes: &[Scheme],
) -> Result<Vec<ResultRow>, SweepError> {
    let config = match spec.axis {
        SweepAxis::SnrDb => file_cfg.at_point(axis_value, file_cfg.fronthaul.clone()),
        SweepAxis::FronthaulBits => {
            file_cfg.at_point(file_cfg.snr_db, vec![axis_value; file_cfg.num_rrh])
        }
    };
    let channel = sample_channel(&config, spec.seed, index as u64);
    let ul = optimize_uplink(&config, &channel.h_ul).map_err(SweepError::Uplink)?;
    let p = config.coding_power();

    let mut rows = Vec::with_capacity(config.num_users * schemes.len());
    for user in 0..config.num_users {
        for &scheme in schemes {
            rows.push(match scheme {
                Scheme::Multipair => ResultRow {
                    axis_value,
                    realization: index,
                    user,
                    scheme,
                    status: RowStatus::Ok,
                    r_ul: ul.user_rates[user],
                    r_dl: 0.0,
                    r_e2e: 0.0,
                },
                Scheme::IndividualBaseline => ResultRow {
                    axis_value,
                    realization: index,
                    user,
                    scheme,
                    status: RowStatus::Ok,
                    r_ul: 0.0,
                    r_dl: 0.0,
                    r_e2e: 0.0,
                },
            });
        }
    }

    if schemes.contains(&Scheme::Multipair) {
        let dl_result = ido(
            &config,
            &channel.downlink(),
            &ul,
            realization_seed(spec.seed, index as u64),
        );
        match dl_result {
            Ok(dl) => {
                let e2e = end_to_end_rates(&ul, &dl).map_err(SweepError::Downlink)?;
                for row in rows.iter_mut().filter(|r| r.scheme == Scheme::Multipair) {
                    row.r_dl = dl.user_rates[row.user];
                    row.r_e2e = e2e.per_user_rate[row.user];
                }
            }
            Err(DownlinkError::NoFeasibleSolution) => {
                for row in rows.iter_mut().filter(|r| r.scheme == Scheme::Multipair) {
                    row.status = RowStatus::NoFeasibleDownlink;
                    row.r_dl = 0.0;
                    row.r_e2e = 0.0;
                }
            }
            Err(e) => return Err(SweepError::Downlink(e)),
        }
    }

    if schemes.contains(&Scheme::IndividualBaseline) {
        // Same effective-noise factor as the multipair chain; only the
        // combination structure differs (K individual vs M pairwise).
        let f_psi = effective_noise_factor(&channel.h_ul, &ul.b_ul, p, &ul.d_matrix);
        let rates = baseline_individual_rates(&f_psi, p).map_err(SweepError::Uplink)?;
        for row in rows
            .iter_mut()
            .filter(|r| r.scheme == Scheme::IndividualBaseline)
        {
            row.r_ul = rates[row.user];
            row.r_dl = rates[row.user];
            row.r_e2e = rates[row.user];
        }
    }

    Ok(rows)
}

/// Runs the full sweep. Deterministic for fixed `(file_cfg, spec)` at any
/// `workers` count; `workers = 0` uses all available cores.
pub fn run_sweep(
    file_cfg: &FileConfig,
    spec: &SweepSpec,
    workers: usize,
) -> Result<(Vec<ResultRow>, RunSummary), SweepError> {
    spec.check()?;
    file_cfg.validate()?;
    let schemes = spec.ordered_schemes();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ConfigError::new(0, format!("worker pool: {e}")))?;

    let mut rows = Vec::new();
    for &value in &spec.values {
        let mut per_value: Vec<Vec<ResultRow>> = pool.install(|| {
            (0..spec.realizations)
                .into_par_iter()
                .map(|index| evaluate_realization(file_cfg, spec, value, index, &schemes))
                .collect::<Result<Vec<_>, _>>()
        })?;
        for chunk in per_value.drain(..) {
            rows.extend(chunk);
        }
    }

    let mut summary = RunSummary {
        realizations_evaluated: spec.values.len() * spec.realizations,
        no_feasible_downlink: 0,
    };
    // A realization counts once regardless of how many of its rows failed.
    let mut seen_failures = std::collections::BTreeSet::new();
    for row in &rows {
        if row.status == RowStatus::NoFeasibleDownlink {
            seen_failures.insert((row.axis_value.to_bits(), row.realization));
        }
    }
    summary.no_feasible_downlink = seen_failures.len();
    Ok((rows, summary))
}

/// Per-(axis value, scheme) mean and standard error of the per-realization
/// end-to-end sum rates. Failed realizations contribute their recorded zero
/// rates and are counted.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    // Keyed by exact axis bits: values come from one shared list.
    let mut sums: BTreeMap<(u64, Scheme), BTreeMap<usize, f64>> = BTreeMap::new();
    for row in rows {
        *sums
            .entry((row.axis_value.to_bits(), row.scheme))
            .or_default()
            .entry(row.realization)
            .or_insert(0.0) += row.r_e2e;
    }
    let mut out: Vec<AggregateRow> = sums
        .into_iter()
        .map(|((bits, scheme), per_real)| {
            let n = per_real.len() as f64;
            let values: Vec<f64> = per_real.into_values().collect();
            let mean = values.iter().sum::<f64>() / n;
            let stderr = if values.len() < 2 {
                0.0
            } else {
                let var =
                    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            };
            AggregateRow {
                axis_value: f64::from_bits(bits),
                scheme,
                mean_sum_rate: mean,
                stderr,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.axis_value
            .partial_cmp(&b.axis_value)
            .unwrap()
            .then(a.scheme.cmp(&b.scheme))
    });
    out
}
