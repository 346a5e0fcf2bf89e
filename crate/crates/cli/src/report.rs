//! Machine-readable run reports. Field names mirror the usual result-table
//! headers (`gTx`, `xAx`, `iter`, `f_lambda`, `time_s`). With `--no-meta`
//! the meta block and all timing fields are omitted, so two runs with the
//! same inputs and seed serialize byte-identically.

use edopt::ascent::Selection;
use edopt::pedigree::Pedigree;
use edopt::rounding::BoundsReport;
use serde::Serialize;

#[derive(Serialize)]
pub struct Meta {
    pub timestamp_unix: u64,
    pub version: String,
    pub command: String,
}

impl Meta {
    pub fn now() -> Meta {
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Meta {
            timestamp_unix,
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: std::env::args().collect::<Vec<_>>().join(" "),
        }
    }
}

#[derive(Serialize)]
pub struct InstanceSummary {
    pub z: usize,
    pub n: usize,
    pub theta2: f64,
    pub v_size: usize,
    pub p: usize,
    /// None when the check was skipped (free-set too large).
    pub assumption1: Option<bool>,
}

#[derive(Serialize)]
pub struct MethodBlock {
    pub kind: String,
    #[serde(rename = "gTx")]
    pub gtx: f64,
    #[serde(rename = "xAx")]
    pub xax: f64,
    pub iter: u64,
    /// `f_λ` at the method's own solution.
    pub f_lambda: f64,
    /// `f_λ` at the rounded starting point derived from this solution
    /// (relaxation rows only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_lambda_x0: Option<f64>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_s: Option<f64>,
}

#[derive(Serialize)]
pub struct SelectionBlock {
    pub chosen_ids: Vec<u32>,
    #[serde(rename = "gTx")]
    pub gtx: f64,
    #[serde(rename = "xAx")]
    pub xax: f64,
    pub f_lambda: f64,
    pub feasible: bool,
}

impl SelectionBlock {
    pub fn from_selection(sel: &Selection, ped: &Pedigree) -> SelectionBlock {
        SelectionBlock {
            chosen_ids: sel.chosen.iter().map(|&pos| ped.ids()[pos]).collect(),
            gtx: sel.gx,
            xax: sel.xax,
            f_lambda: sel.penalty_value,
            feasible: sel.feasible,
        }
    }
}

#[derive(Serialize)]
pub struct RunReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    pub instance: InstanceSummary,
    pub lambda: Option<f64>,
    pub methods: Vec<MethodBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionBlock>,
}

#[derive(Serialize)]
pub struct OracleReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    pub instance: InstanceSummary,
    pub method: String,
    /// None when no selection satisfies the coancestry cap.
    pub opt: Option<f64>,
    pub argmax_ids: Vec<u32>,
    pub enumerated: u64,
    pub feasible_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timed_out: Option<bool>,
}

#[derive(Serialize)]
pub struct KinshipReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    pub z: usize,
    pub founders: usize,
    pub ainv_nnz: usize,
    pub b_nnz: usize,
    pub diag_max: f64,
    pub mendelian_min: f64,
    /// `max |B'B A - I|`, only evaluated at small scale.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub btb_residual: Option<f64>,
}

pub fn write_json<T: Serialize>(report: &T, path: &std::path::Path) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(path, text)
}
