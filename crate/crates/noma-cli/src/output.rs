//! CSV rows, run manifests and gnuplot scripts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliResult;

/// Header of every curve CSV.
pub const CURVE_HEADER: &str = "param,ue,mode,source,value,ci95,trials";

/// One curve sample. Theory rows leave `ci95` and `trials` empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub param: f64,
    pub ue: u8,
    pub mode: String,
    pub source: String,
    pub value: f64,
    pub ci95: Option<f64>,
    pub trials: Option<u64>,
}

/// One curve sample restricted to trials where UE `first_decoded` went first.
/// Empty simulation buckets are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub param: f64,
    pub ue: u8,
    pub first_decoded: u8,
    pub mode: String,
    pub source: String,
    pub value: f64,
    pub ci95: Option<f64>,
    pub trials: Option<u64>,
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Gnuplot script drawing every (ue, mode, source) series of `csv_name`.
pub fn gnuplot_script(csv_name: &str, xlabel: &str, rows: &[CurveRow]) -> String {
    let mut series: Vec<(u8, &str, &str)> = Vec::new();
    for r in rows {
        let key = (r.ue, r.mode.as_str(), r.source.as_str());
        if !series.contains(&key) {
            series.push(key);
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale y");
    let _ = writeln!(s, "set format y '10^{{%L}}'");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let _ = writeln!(s, "set ylabel 'BER'");
    let _ = writeln!(s, "set key outside right");
    let _ = writeln!(s, "set grid");
    let plots: Vec<String> = series
        .iter()
        .map(|(ue, mode, source)| {
            let style = if *source == "theory" { "lines" } else { "points" };
            format!(
                "'{csv_name}' using 1:((strcol(2) eq '{ue}' && strcol(3) eq '{mode}' && strcol(4) eq '{source}') ? $5 : NaN) with {style} title 'UE{ue} {mode} {source}'"
            )
        })
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

/// Human-readable manifest. The embedded config reproduces the CSVs.
pub fn write_manifest(path: &Path, config_text: &str, defaulted: &[&str], threads: usize, wall_secs: f64, files: &[String]) -> CliResult<()> {
    let mut s = String::new();
    let _ = writeln!(s, "# noma-sic run manifest");
    let _ = writeln!(s, "# threads: {threads} (results do not depend on this)");
    let _ = writeln!(s, "# wall time: {wall_secs:.3} s");
    let _ = writeln!(s, "# defaults applied: {}", if defaulted.is_empty() { "none".to_string() } else { defaulted.join(", ") });
    let _ = writeln!(s, "# outputs: {}", files.join(", "));
    s.push_str(config_text);
    fs::write(path, s)?;
    Ok(())
}
