//! Text summary of a sweep CSV: per-variant bound ranges, the SNR at which
//! the orientation bound crosses 1e-2, and the dB gaps between variants at
//! that crossing.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("failed to read csv: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed csv: {0}")]
    Malformed(String),
}

/// The orientation-bound level at which variants are compared.
pub const OEB_CROSSING_LEVEL: f64 = 1e-2;

#[derive(Debug, Clone)]
struct ParsedRow {
    variant: String,
    snr_db: f64,
    peb_m: f64,
    oeb_rad: f64,
    raw: String,
}

fn parse_rows(text: &str) -> Result<Vec<ParsedRow>, ReportError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| ReportError::Malformed("empty file".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let index_of = |name: &str| -> Result<usize, ReportError> {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| ReportError::Malformed(format!("missing column {name}")))
    };
    let (i_variant, i_snr, i_peb, i_oeb) = (
        index_of("variant")?,
        index_of("snr_db")?,
        index_of("peb_m")?,
        index_of("oeb_rad")?,
    );
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(ReportError::Malformed(format!(
                "line {}: {} fields, header has {}",
                lineno + 2,
                fields.len(),
                columns.len()
            )));
        }
        let num = |i: usize| -> Result<f64, ReportError> {
            fields[i].parse::<f64>().map_err(|e| {
                ReportError::Malformed(format!("line {}: field {}: {e}", lineno + 2, i))
            })
        };
        rows.push(ParsedRow {
            variant: fields[i_variant].to_string(),
            snr_db: num(i_snr)?,
            peb_m: num(i_peb)?,
            oeb_rad: num(i_oeb)?,
            raw: line.to_string(),
        });
    }
    if rows.is_empty() {
        return Err(ReportError::Malformed("no data rows".into()));
    }
    Ok(rows)
}

/// SNR (dB) at which the orientation bound reaches `level`, by linear
/// interpolation of log10(OEB) against SNR. Requires at least two distinct
/// SNR points bracketing the level.
fn oeb_crossing(points: &[(f64, f64)], level: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, oeb)| oeb.is_finite() && *oeb > 0.0)
        .cloned()
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pts.dedup_by(|a, b| a.0 == b.0);
    let target = level.log10();
    for w in pts.windows(2) {
        let (s0, o0) = (w[0].0, w[0].1.log10());
        let (s1, o1) = (w[1].0, w[1].1.log10());
        if (o0 - target) * (o1 - target) <= 0.0 && o0 != o1 {
            return Some(s0 + (s1 - s0) * (o0 - target) / (o0 - o1));
        }
    }
    None
}

/// Render the summary text for a CSV produced by the sweep driver.
pub fn report_summary(csv_path: &Path) -> Result<String, ReportError> {
    let text = std::fs::read_to_string(csv_path)?;
    summarize_text(&text)
}

/// [`report_summary`] over in-memory CSV text.
pub fn summarize_text(text: &str) -> Result<String, ReportError> {
    let rows = parse_rows(text)?;
    let mut out = String::new();

    if rows.len() == 1 {
        let r = &rows[0];
        out.push_str(&format!(
            "single row: variant={} snr_db={} peb_m={} oeb_rad={}\n{}\n",
            r.variant, r.snr_db, r.peb_m, r.oeb_rad, r.raw
        ));
        return Ok(out);
    }

    let mut by_variant: BTreeMap<String, Vec<&ParsedRow>> = BTreeMap::new();
    for r in &rows {
        by_variant.entry(r.variant.clone()).or_default().push(r);
    }

    let mut crossings: Vec<(String, Option<f64>)> = Vec::new();
    for (variant, group) in &by_variant {
        let peb_min = group.iter().map(|r| r.peb_m).fold(f64::INFINITY, f64::min);
        let peb_max = group
            .iter()
            .map(|r| r.peb_m)
            .fold(f64::NEG_INFINITY, f64::max);
        let oeb_min = group
            .iter()
            .map(|r| r.oeb_rad)
            .fold(f64::INFINITY, f64::min);
        let oeb_max = group
            .iter()
            .map(|r| r.oeb_rad)
            .fold(f64::NEG_INFINITY, f64::max);
        let points: Vec<(f64, f64)> = group.iter().map(|r| (r.snr_db, r.oeb_rad)).collect();
        let crossing = oeb_crossing(&points, OEB_CROSSING_LEVEL);
        out.push_str(&format!(
            "variant={variant}: peb_m in [{peb_min}, {peb_max}], oeb_rad in [{oeb_min}, {oeb_max}], "
        ));
        match crossing {
            Some(snr) => out.push_str(&format!(
                "oeb crosses {OEB_CROSSING_LEVEL:e} at {snr:.3} dB\n"
            )),
            None => out.push_str(&format!(
                "oeb does not cross {OEB_CROSSING_LEVEL:e} on the grid\n"
            )),
        }
        crossings.push((variant.clone(), crossing));
    }

    for i in 0..crossings.len() {
        for j in (i + 1)..crossings.len() {
            if let (Some(a), Some(b)) = (crossings[i].1, crossings[j].1) {
                out.push_str(&format!(
                    "gap at oeb={OEB_CROSSING_LEVEL:e}: {} vs {}: {:.3} dB\n",
                    crossings[i].0,
                    crossings[j].0,
                    b - a
                ));
            }
        }
    }
    Ok(out)
}
