use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use collapse_core::analytic::{CriticalRate, ExtinctionEstimate};
use collapse_core::numfmt::{opt_real, real};
use collapse_core::validate::CheckOutcome;
use collapse_core::Model;

/// Everything a command did, in the form written by `--json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub args: Vec<String>,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Seconds.
    #[serde(with = "real")]
    pub wall_time: f64,
    pub params: Params,
    pub results: Results,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    #[serde(default, with = "opt_real", skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, with = "opt_real", skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, with = "opt_real", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(default, with = "opt_real", skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation_cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_axis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_axis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_range: Option<String>,
    #[serde(default, with = "opt_real", skip_serializing_if = "Option::is_none")]
    pub tol_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Results {
    Analytic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        extinction: Option<ExtinctionEstimate>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        survives: Option<bool>,
        #[serde(default, with = "opt_real", skip_serializing_if = "Option::is_none")]
        mean_offspring: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        critical_lambda: Option<CriticalRate>,
    },
    Simulate {
        estimate: ExtinctionEstimate,
        #[serde(with = "real")]
        standard_error: f64,
        #[serde(default, with = "opt_real", skip_serializing_if = "Option::is_none")]
        analytic: Option<f64>,
        reliable: bool,
    },
    Sweep {
        rows: usize,
        out: String,
        label_counts: BTreeMap<String, usize>,
    },
    Validate {
        passed: usize,
        failed: usize,
        checks: Vec<CheckOutcome>,
    },
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    #[cfg(test)]
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
