//! Trace CSV and JSON artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use adaptive_admm::IterationRecord;
use serde::Serialize;

use crate::CliError;

pub const TRACE_HEADER: [&str; 8] = [
    "t",
    "objective",
    "max_primal",
    "max_dual",
    "eta_min",
    "eta_max",
    "eta_mean",
    "converged",
];

/// Formats `v` with 12 significant digits, like C's `%.12g`.
pub fn sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".to_owned();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_owned()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

pub fn trace_csv(records: &[IterationRecord]) -> String {
    let mut out = TRACE_HEADER.join(",");
    out.push('\n');
    for r in records {
        let fields = [
            r.t.to_string(),
            sig12(r.objective),
            sig12(r.max_primal),
            sig12(r.max_dual),
            sig12(r.eta_min),
            sig12(r.eta_max),
            sig12(r.eta_mean),
            u8::from(r.converged).to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        path: path.to_owned(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut file = fs::File::create(&tmp).map_err(io_err)?;
    file.write_all(contents).map_err(io_err)?;
    file.sync_all().map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_trace(path: &Path, records: &[IterationRecord]) -> Result<(), CliError> {
    write_atomic(path, trace_csv(records).as_bytes())
}
