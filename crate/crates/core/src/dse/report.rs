//! Aggregate trial tables and the accuracy/latency scatter.
//!
//! The SVG is 640×480. The plot area spans x ∈ [70, 610] and y ∈ [30, 420].
//! Latency maps linearly onto x from the smallest to the largest latency
//! present (padded by 5% of the span, or by 1 µs when all latencies are
//! equal). Accuracy maps linearly onto y from 0 at the bottom to 1 at the
//! top. Front members are red filled circles joined by a polyline in latency
//! order; dominated trials are grey.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::sweep::TRIAL_FILE;
use super::trial::TrialOutcome;
use crate::error::{Error, Result};
use crate::metrics::{pareto_indices, TrialRecord};

pub const RECORD_COLUMNS: [&str; 14] = [
    "hash",
    "surrogate_type",
    "slope",
    "neuron_type",
    "beta",
    "threshold",
    "seed",
    "accuracy",
    "quantized_accuracy",
    "total_cycles",
    "latency_ms",
    "activity_density",
    "energy_mj",
    "edp",
];

pub const SVG_WIDTH: f64 = 640.0;
pub const SVG_HEIGHT: f64 = 480.0;
const X0: f64 = 70.0;
const X1: f64 = 610.0;
const Y0: f64 = 30.0;
const Y1: f64 = 420.0;

/// Completed trials under `dir`, found as `trial.json` files at depth one
/// or two (a sweep directory or a results root). Sorted by hash.
pub fn collect_records(dir: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    visit(dir, 2, &mut out)?;
    out.sort_by(|a, b| a.hash.cmp(&b.hash));
    out.dedup_by(|a, b| a.hash == b.hash);
    Ok(out)
}

fn visit(dir: &Path, depth: usize, out: &mut Vec<TrialRecord>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<_> = entries
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    paths.sort();
    for p in paths {
        if !p.is_dir() {
            continue;
        }
        let t = p.join(TRIAL_FILE);
        if t.is_file() {
            let text = fs::read_to_string(&t).map_err(|e| Error::io(&t, e))?;
            if let TrialOutcome::Ok { record, .. } = serde_json::from_str(&text)? {
                out.push(record);
            }
        } else if depth > 1 {
            visit(&p, depth - 1, out)?;
        }
    }
    Ok(())
}

pub fn records_csv(records: &[TrialRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        let c = &r.config.train;
        let name = |v: serde_json::Value| v.as_str().unwrap_or_default().to_string();
        w.write_record([
            r.hash.clone(),
            name(serde_json::to_value(c.surrogate_type)?),
            c.slope.to_string(),
            name(serde_json::to_value(c.neuron_type)?),
            c.beta.to_string(),
            c.threshold.to_string(),
            c.seed.to_string(),
            r.accuracy.to_string(),
            r.quantized_accuracy.to_string(),
            r.total_cycles.to_string(),
            r.latency_ms.to_string(),
            r.activity_density.to_string(),
            r.energy_mj.to_string(),
            r.edp.to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Validation(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Pixel position of `(latency_ms, accuracy)` given the latency range.
pub fn svg_position(latency_ms: f64, accuracy: f64, lo: f64, hi: f64) -> (f64, f64) {
    let x = X0 + (latency_ms - lo) / (hi - lo) * (X1 - X0);
    let y = Y1 - accuracy.clamp(0.0, 1.0) * (Y1 - Y0);
    (x, y)
}

fn latency_range(records: &[TrialRecord]) -> (f64, f64) {
    let lo = records.iter().map(|r| r.latency_ms).fold(f64::INFINITY, f64::min);
    let hi = records.iter().map(|r| r.latency_ms).fold(f64::NEG_INFINITY, f64::max);
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 1e-3 };
    (lo - pad, hi + pad)
}

pub fn pareto_svg(records: &[TrialRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Empty("no trials to plot".into()));
    }
    let points: Vec<(f64, f64)> = records.iter().map(|r| (r.accuracy, r.latency_ms)).collect();
    let front = pareto_indices(&points);
    let (lo, hi) = latency_range(records);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{X0} {Y0} L{X0} {Y1} L{X1} {Y1}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = f64::from(i) / 4.0;
        let (_, y) = svg_position(lo, f, lo, hi);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{f:.2}</text>"#,
            X0 - 6.0,
            y + 4.0
        );
        let lat = lo + f * (hi - lo);
        let (x, _) = svg_position(lat, 0.0, lo, hi);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{lat:.4}</text>"#,
            Y1 + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">latency (ms)</text>"#,
        (X0 + X1) / 2.0,
        SVG_HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.2})">accuracy</text>"#,
        (Y0 + Y1) / 2.0,
        (Y0 + Y1) / 2.0
    );

    let mut line: Vec<usize> = front.clone();
    line.sort_by(|&a, &b| points[a].1.total_cmp(&points[b].1).then(points[b].0.total_cmp(&points[a].0)));
    let coords: Vec<String> = line
        .iter()
        .map(|&i| {
            let (x, y) = svg_position(points[i].1, points[i].0, lo, hi);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline class="front-line" points="{}" fill="none" stroke="red"/>"#,
        coords.join(" ")
    );
    for (i, r) in records.iter().enumerate() {
        let on_front = front.binary_search(&i).is_ok();
        let (x, y) = svg_position(r.latency_ms, r.accuracy, lo, hi);
        let (class, fill) = if on_front { ("front", "red") } else { ("trial", "grey") };
        let _ = writeln!(
            s,
            r#"<circle class="{class}" data-hash="{}" cx="{x:.2}" cy="{y:.2}" r="4" fill="{fill}"/>"#,
            r.hash
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
