//! Paper-style result tables: a TPR grid per model kind (rows are classes,
//! columns the second quality factor), a JSON summary and an accuracy chart.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dataset::{CompressionLabel, CLASS_ORDER_ID};
use crate::error::{Error, Result};
use crate::jpeg_sim::QualityFactor;
use crate::models::ModelKind;

use super::eval::EvalReport;

/// Marks the impossible first-equals-second cells.
pub const ABSENT: &str = "—";
/// Marks classes without test samples.
pub const UNDEFINED: &str = "n/a";

pub type BankReports = BTreeMap<QualityFactor, EvalReport>;

fn row_labels() -> Vec<(String, Option<QualityFactor>)> {
    let mut rows = vec![("Uncompressed".to_string(), None), ("Single".to_string(), None)];
    rows.extend(QualityFactor::GRID.iter().map(|&q| (format!("Double({q})"), Some(q))));
    rows
}

fn cell(report: &EvalReport, row: usize, qf1: Option<QualityFactor>) -> Option<Option<f64>> {
    let label = match (row, qf1) {
        (0, _) => CompressionLabel::Uncompressed,
        (1, _) => CompressionLabel::Single,
        (_, Some(q)) if q == report.qf2 => return None,
        (_, Some(q)) => CompressionLabel::Double(q),
        _ => unreachable!("double rows carry a quality factor"),
    };
    let idx = label.index(report.qf2).expect("grid label");
    Some(report.tpr[idx])
}

/// Tab-separated TPR grid with a row-average column. Without
/// `require_complete`, absent columns are left empty.
pub fn tpr_grid(reports: &BankReports, require_complete: bool) -> Result<String> {
    let missing: Vec<String> = QualityFactor::GRID
        .iter()
        .filter(|q| !reports.contains_key(q))
        .map(|q| q.to_string())
        .collect();
    if require_complete && !missing.is_empty() {
        return Err(Error::invalid(format!("no evaluation for qf2 {}", missing.join(", "))));
    }
    let mut out = String::from("class");
    for q in QualityFactor::GRID {
        write!(out, "\tQF2={q}").expect("string write");
    }
    out.push_str("\tAVG\n");
    for (row, (name, qf1)) in row_labels().into_iter().enumerate() {
        out.push_str(&name);
        let mut present = Vec::new();
        for q in QualityFactor::GRID {
            let text = match reports.get(&q).map(|r| cell(r, row, qf1)) {
                None => String::new(),
                Some(None) => ABSENT.to_string(),
                Some(Some(None)) => UNDEFINED.to_string(),
                Some(Some(Some(v))) => {
                    present.push(v);
                    format!("{v:.3}")
                }
            };
            out.push('\t');
            out.push_str(&text);
        }
        if present.is_empty() {
            write!(out, "\t{UNDEFINED}").expect("string write");
        } else {
            let avg = present.iter().sum::<f64>() / present.len() as f64;
            write!(out, "\t{avg:.3}").expect("string write");
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Serialize)]
struct SummaryEntry<'a> {
    accuracy: f64,
    seed: Option<u64>,
    tpr: &'a [Option<f64>],
}

/// Per-kind, per-qf2 accuracy, seed and TPR vector.
pub fn summary_json(
    evals: &BTreeMap<ModelKind, BankReports>,
    seeds: &BTreeMap<(ModelKind, QualityFactor), u64>,
) -> Result<String> {
    let mut kinds = BTreeMap::new();
    for (kind, reports) in evals {
        let entries: BTreeMap<String, SummaryEntry> = reports
            .iter()
            .map(|(q, r)| {
                let e = SummaryEntry {
                    accuracy: r.accuracy,
                    seed: seeds.get(&(*kind, *q)).copied(),
                    tpr: &r.tpr,
                };
                (q.to_string(), e)
            })
            .collect();
        kinds.insert(kind.name(), entries);
    }
    let doc = serde_json::json!({ "class_order": CLASS_ORDER_ID, "kinds": kinds });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// Line chart of accuracy against the second quality factor, one line per
/// model kind.
pub fn accuracy_chart_svg(evals: &BTreeMap<ModelKind, BankReports>) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let x = |q: QualityFactor| m + (q.value() as f64 - 60.0) / 35.0 * (w - 2.0 * m);
    let y = |a: f64| h - m - a * (h - 2.0 * m);
    let colors = |k: ModelKind| match k {
        ModelKind::Spatial => "#d62728",
        ModelKind::Frequency => "#1f77b4",
        ModelKind::MultiDomain => "#2ca02c",
    };
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    )
    .expect("write");
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).expect("write");
    writeln!(
        s,
        r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        h - m,
        w - m,
        h - m
    )
    .expect("write");
    writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#, h - m).expect("write");
    for q in QualityFactor::GRID {
        writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{q}</text>"#,
            x(q),
            h - m + 18.0
        )
        .expect("write");
    }
    for t in 0..=5 {
        let a = t as f64 / 5.0;
        writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{a:.1}</text>"#,
            m - 6.0,
            y(a) + 4.0
        )
        .expect("write");
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">QF2</text>"#,
        w / 2.0,
        h - 12.0
    )
    .expect("write");
    for (i, (kind, reports)) in evals.iter().enumerate() {
        let pts: Vec<String> = reports
            .iter()
            .map(|(q, r)| format!("{:.1},{:.1}", x(*q), y(r.accuracy)))
            .collect();
        let c = colors(*kind);
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        )
        .expect("write");
        for p in &pts {
            let (px, py) = p.split_once(',').expect("point");
            writeln!(s, r#"<circle cx="{px}" cy="{py}" r="3" fill="{c}"/>"#).expect("write");
        }
        writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{c}">{kind}</text>"#,
            w - m - 90.0,
            m + 16.0 * i as f64
        )
        .expect("write");
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `tpr_<kind>.tsv`, `summary.json` and `accuracy.svg` into `dir`.
pub fn write_reports(
    dir: &Path,
    evals: &BTreeMap<ModelKind, BankReports>,
    seeds: &BTreeMap<(ModelKind, QualityFactor), u64>,
    require_complete: bool,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: String, text: String| -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    let mut paths = Vec::new();
    for (kind, reports) in evals {
        paths.push(write(format!("tpr_{kind}.tsv"), tpr_grid(reports, require_complete)?)?);
    }
    paths.push(write("summary.json".into(), summary_json(evals, seeds)?)?);
    paths.push(write("accuracy.svg".into(), accuracy_chart_svg(evals))?);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train_eval::eval::ConfusionMatrix;

    fn report(qf2: QualityFactor) -> EvalReport {
        // Class c is right c times out of 8.
        let pairs = (0..9).flat_map(|c| (0..8).map(move |i| (c, if i < c { c } else { (c + 1) % 9 })));
        let conf = ConfusionMatrix::from_pairs(pairs).unwrap();
        EvalReport::from_confusion(ModelKind::MultiDomain, qf2, conf).unwrap()
    }

    fn all_reports() -> BankReports {
        QualityFactor::GRID.iter().map(|&q| (q, report(q))).collect()
    }

    #[test]
    fn grid_shape_and_dashes() {
        let text = tpr_grid(&all_reports(), true).unwrap();
        let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
        assert_eq!(rows.len(), 11);
        assert!(rows.iter().all(|r| r.len() == 10));
        for (i, q) in QualityFactor::GRID.iter().enumerate() {
            // Row Double(q) (index 3 + i incl. header), column QF2=q (1 + i).
            assert_eq!(rows[3 + i][1 + i], ABSENT, "{q}");
            assert_eq!(rows[0][1 + i], format!("QF2={q}"));
        }
        // Uncompressed is class 0: never right.
        assert_eq!(rows[1][1], "0.000");
        // Single (class 1): 1/8 in every column.
        assert_eq!(rows[2][9], "0.125");
    }

    #[test]
    fn average_of_present_cells() {
        let text = tpr_grid(&all_reports(), true).unwrap();
        let row: Vec<&str> = text.lines().nth(3).unwrap().split('\t').collect();
        let vals: Vec<f64> = row[1..9]
            .iter()
            .filter(|c| **c != ABSENT)
            .map(|c| c.parse().unwrap())
            .collect();
        assert_eq!(vals.len(), 7);
        let avg = vals.iter().sum::<f64>() / 7.0;
        assert_eq!(row[9], format!("{avg:.3}"));
    }

    #[test]
    fn missing_columns_named() {
        let mut r = all_reports();
        r.remove(&QualityFactor::new(65).unwrap());
        r.remove(&QualityFactor::new(80).unwrap());
        let err = tpr_grid(&r, true).unwrap_err().to_string();
        assert!(err.contains("65") && err.contains("80"), "{err}");
        assert!(tpr_grid(&r, false).is_ok());
    }

    #[test]
    fn outputs_written() {
        let dir = tempfile::tempdir().unwrap();
        let evals = BTreeMap::from([(ModelKind::MultiDomain, all_reports())]);
        let paths = write_reports(dir.path(), &evals, &BTreeMap::new(), true).unwrap();
        assert_eq!(paths.len(), 3);
        let svg = std::fs::read_to_string(dir.path().join("accuracy.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("polyline"));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert!(json["kinds"]["multidomain"]["90"]["accuracy"].is_number());
    }
}
