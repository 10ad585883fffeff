//! JSON records written by the command-line front end.
//!
//! Every record carries a `kind` tag and a `wall_time_s` field; apart from
//! the timing field the records are a deterministic function of their
//! inputs.

use serde::{Deserialize, Serialize};

use crate::gap_counter::{MomentAccumulator, Statistic, SweepResult};
use crate::model::{LawConstruction, SteinReport};
use crate::sieve_check::SieveCheckRow;
use crate::stats::Histogram;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Record {
    Sweep(SweepRecord),
    ModelExact(ModelRecord),
    ModelMc(ModelRecord),
    Oracle(OracleRecord),
    Stein(SteinRecord),
    SieveCheck(SieveCheckRecord),
}

impl Record {
    pub fn wall_time_s(&self) -> f64 {
        match self {
            Record::Sweep(r) => r.wall_time_s,
            Record::ModelExact(r) | Record::ModelMc(r) => r.wall_time_s,
            Record::Oracle(r) => r.wall_time_s,
            Record::Stein(r) => r.wall_time_s,
            Record::SieveCheck(r) => r.wall_time_s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub statistic: Statistic,
    pub n: u64,
    pub z: f64,
    /// `null` when untruncated.
    pub cutoff: Option<u64>,
    pub shift: f64,
    pub r_max: usize,
    pub power_sums: Vec<f64>,
    pub count: u64,
    pub histogram: Histogram,
    pub wall_time_s: f64,
}

impl SweepRecord {
    pub fn accumulator(&self) -> crate::Result<MomentAccumulator> {
        MomentAccumulator::from_parts(self.count, self.shift, &self.power_sums)
    }
}

impl From<&SweepResult> for SweepRecord {
    fn from(r: &SweepResult) -> Self {
        SweepRecord {
            statistic: r.statistic,
            n: r.n,
            z: r.params.z(),
            cutoff: r.cutoff,
            shift: r.accumulator.shift(),
            r_max: r.accumulator.r_max(),
            power_sums: r.accumulator.power_sums(),
            count: r.accumulator.count(),
            histogram: r.histogram.clone(),
            wall_time_s: r.wall_time_s,
        }
    }
}

/// Exact (`model-exact`) or Monte Carlo (`model-mc`) model summary. Power
/// sums are about `shift = c_N`; for `model-exact` they are probability
/// weighted (`count = 1`), for `model-mc` they run over the trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    #[serde(rename = "N")]
    pub cutoff: u64,
    pub z: f64,
    pub c_n: f64,
    pub s2_n: f64,
    pub asym_mean: f64,
    pub asym_var: f64,
    pub shift: f64,
    pub r_max: usize,
    pub power_sums: Vec<f64>,
    pub count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Histogram>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    #[serde(rename = "N")]
    pub cutoff: u64,
    #[serde(rename = "M")]
    pub enumeration_limit: u64,
    pub z: f64,
    pub construction: LawConstruction,
    pub atoms: usize,
    /// `E[S_N]`, reduced fraction.
    pub mean_exact: String,
    /// `E[(S_N - E S_N)^r]` for `r = 0..=r_max`, reduced fractions.
    pub central_moments_exact: Vec<String>,
    /// Variance from the closed-form identity, reduced fraction.
    pub formula_variance_exact: String,
    pub matches_formula: bool,
    pub shift: f64,
    pub r_max: usize,
    pub power_sums: Vec<f64>,
    pub count: u64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SteinRecord {
    #[serde(flatten)]
    pub report: SteinReport,
    pub wall_time_s: f64,
}

impl PartialEq for SteinRecord {
    fn eq(&self, other: &Self) -> bool {
        serde_json::to_value(self).ok() == serde_json::to_value(other).ok()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SieveCheckRecord {
    pub z: f64,
    pub n: u64,
    pub rows: Vec<SieveCheckRow>,
    pub wall_time_s: f64,
}

/// Serializes with `wall_time_s` zeroed, for determinism comparisons.
pub fn without_timing(json: &str) -> serde_json::Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(json)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("wall_time_s");
    }
    serde_json::to_string(&v)
}
