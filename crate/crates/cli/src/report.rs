//! Deterministic report rendering. JSON objects keep lexicographically
//! sorted keys (serde_json's default map); CSV uses RFC-4180 quoting, '.'
//! decimals, a mandatory header row, and 17 significant digits so reruns
//! are byte-identical.

use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use hjt_core::ResidualReport;

/// 17 significant digits, sign-stable, locale-free.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') || s.contains('\r') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_row(fields: &[String]) -> String {
    fields
        .iter()
        .map(|f| csv_field(f))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_output(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{}", content);
            Ok(())
        }
    }
}

fn channel_value(stats: &hjt_core::ChannelStats) -> Value {
    json!({
        "argmax_point": stats.argmax,
        "max": stats.max,
    })
}

pub fn verify_json(system: &str, candidate: &str, report: &ResidualReport) -> String {
    let channels: serde_json::Map<String, Value> = report
        .channels
        .iter()
        .map(|(k, v)| (k.clone(), channel_value(v)))
        .collect();
    let diagnostics: serde_json::Map<String, Value> = report
        .diagnostics
        .iter()
        .map(|(k, v)| (k.clone(), channel_value(v)))
        .collect();
    let doc = json!({
        "candidate": candidate,
        "channels": channels,
        "diagnostics": diagnostics,
        "mode": report.mode,
        "system": system,
        "tol": report.tol,
        "verdict": if report.pass { "pass" } else { "fail" },
    });
    format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())
}

/// Per-sample rows: base coordinates, then every channel column (gating
/// channels and diagnostics alike) in sorted order.
pub fn verify_csv(report: &ResidualReport) -> String {
    let dim = report.samples.first().map(|s| s.point.len()).unwrap_or(0);
    let mut names: Vec<&String> = report
        .samples
        .first()
        .map(|s| s.channels.keys().collect())
        .unwrap_or_default();
    names.sort();
    let mut header: Vec<String> = (1..=dim).map(|i| format!("q{}", i)).collect();
    header.extend(names.iter().map(|s| s.to_string()));
    let mut out = csv_row(&header);
    out.push('\n');
    for s in &report.samples {
        let mut row: Vec<String> = s.point.iter().map(|v| fmt_f64(*v)).collect();
        for name in &names {
            row.push(s.channels.get(*name).map(|v| fmt_f64(*v)).unwrap_or_default());
        }
        out.push_str(&csv_row(&row));
        out.push('\n');
    }
    out
}

pub fn json_doc(doc: &Value) -> String {
    format!("{}\n", serde_json::to_string_pretty(doc).unwrap())
}
