//! Report files. Floats use Rust's shortest round-trip formatting, and
//! undefined metrics are written as `NA`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::experiment::{CvReport, Stat};
use super::folds::FoldPlan;
use crate::error::{GgrError, Result};

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(GgrError::from)
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| GgrError::io(path, e))
}

pub fn write_fold_csv(report: &CvReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "mode", "repeat", "fold", "n_train", "n_test", "tp", "fn", "fp", "tn", "accuracy", "sensitivity", "specificity", "auc",
        "n_genes", "gene_mse_raw", "hygiene_clean",
    ])?;
    for f in &report.folds {
        let m = &f.metrics;
        w.write_record([
            report.mode.tag().to_string(),
            f.repeat.to_string(),
            f.fold.to_string(),
            f.n_train.to_string(),
            f.test_rows.len().to_string(),
            m.tp.to_string(),
            m.fn_.to_string(),
            m.fp.to_string(),
            m.tn.to_string(),
            m.accuracy.to_string(),
            opt(m.sensitivity),
            opt(m.specificity),
            opt(f.auc),
            f.n_genes.to_string(),
            opt(f.gene_mse_raw),
            f.hygiene.clean.to_string(),
        ])?;
    }
    finish(w, path)
}

pub fn write_predictions_csv(report: &CvReport, ids: &[String], labels: &[bool], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["mode", "repeat", "fold", "id", "label", "probability"])?;
    for f in &report.folds {
        for (&row, p) in f.test_rows.iter().zip(&f.probabilities) {
            let id = ids.get(row).ok_or_else(|| GgrError::Shape(format!("row {row} has no id")))?;
            w.write_record([
                report.mode.tag(),
                &f.repeat.to_string(),
                &f.fold.to_string(),
                id,
                if labels[row] { "1" } else { "0" },
                &p.to_string(),
            ])?;
        }
    }
    finish(w, path)
}

pub fn write_roc_csv(report: &CvReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["fpr", "tpr"])?;
    for p in &report.average_roc {
        w.write_record([p.fpr.to_string(), p.tpr.to_string()])?;
    }
    finish(w, path)
}

pub fn write_summary_csv(reports: &[CvReport], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "mode", "folds", "accuracy_mean", "accuracy_sd", "sensitivity_mean", "sensitivity_sd", "specificity_mean",
        "specificity_sd", "auc_mean", "auc_sd", "hygiene_clean",
    ])?;
    let pair = |s: Option<Stat>| [opt(s.map(|s| s.mean)), opt(s.map(|s| s.sd))];
    for r in reports {
        let s = &r.summary;
        let mut rec = vec![r.mode.tag().to_string(), r.folds.len().to_string()];
        for st in [s.accuracy, s.sensitivity, s.specificity, s.auc] {
            rec.extend(pair(st));
        }
        rec.push(r.all_clean().to_string());
        w.write_record(&rec)?;
    }
    finish(w, path)
}

pub fn write_plan_csv(plan: &FoldPlan, ids: &[String], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["repeat", "fold", "id"])?;
    for f in &plan.folds {
        for &i in &f.test {
            w.write_record([f.repeat.to_string(), f.fold.to_string(), ids[i].clone()])?;
        }
    }
    finish(w, path)
}

/// Standalone SVG of the averaged ROC curve with the chance diagonal.
pub fn roc_svg(report: &CvReport) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 50.0;
    let x = |f: f64| PAD + f * SIZE;
    let y = |t: f64| PAD + (1.0 - t) * SIZE;
    let total = SIZE + 2.0 * PAD;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r##"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="#333"/>"##);
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{v:.1}</text>"#, x(v), PAD + SIZE + 16.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{v:.1}</text>"#, PAD - 6.0, y(v) + 4.0);
    }
    let _ = writeln!(
        s,
        r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#999" stroke-dasharray="4 4"/>"##,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    );
    let points: Vec<String> = report.average_roc.iter().map(|p| format!("{:.2},{:.2}", x(p.fpr), y(p.tpr))).collect();
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#c0392b" stroke-width="2"/>"##, points.join(" "));
    let auc = report.summary.mean_auc().map_or_else(|| "NA".to_string(), |a| format!("{a:.4}"));
    let _ = writeln!(s, r#"<text x="{:.1}" y="30" font-size="14" text-anchor="middle">{} average ROC (mean AUC {auc})</text>"#, total / 2.0, report.mode);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">false positive rate</text>"#, total / 2.0, total - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">true positive rate</text>"#,
        total / 2.0,
        total / 2.0
    );
    s.push_str("</svg>\n");
    s
}

/// Writes every per-mode file plus `summary.csv` and `fold_plan.csv` into
/// `dir`; returns the written paths in a fixed order.
pub fn write_reports(dir: &Path, plan: &FoldPlan, reports: &[CvReport], ids: &[String], labels: &[bool]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| GgrError::io(dir, e))?;
    let mut written = Vec::new();
    for r in reports {
        let tag = r.mode.tag();
        let p = dir.join(format!("{tag}_folds.csv"));
        write_fold_csv(r, &p)?;
        written.push(p);
        let p = dir.join(format!("{tag}_predictions.csv"));
        write_predictions_csv(r, ids, labels, &p)?;
        written.push(p);
        let p = dir.join(format!("{tag}_roc.csv"));
        write_roc_csv(r, &p)?;
        written.push(p);
        let p = dir.join(format!("{tag}_roc.svg"));
        std::fs::write(&p, roc_svg(r)).map_err(|e| GgrError::io(&p, e))?;
        written.push(p);
    }
    let p = dir.join("summary.csv");
    write_summary_csv(reports, &p)?;
    written.push(p);
    let p = dir.join("fold_plan.csv");
    write_plan_csv(plan, ids, &p)?;
    written.push(p);
    Ok(written)
}
