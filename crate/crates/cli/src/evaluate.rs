use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;

use scribble_core::metrics::{aggregate, dice_per_class, markdown_table, Aggregate, CaseScores, UNDEFINED};
use scribble_core::read_nifti;

use crate::manifest::{DatasetManifest, LoadedManifest};
use crate::{ensure_dir, with_pool};

pub const CASE_FILE: &str = "dice_per_case.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TABLE_FILE: &str = "summary.md";

#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions {
    /// One manifest per dataset.
    pub manifests: Vec<PathBuf>,
    pub predictions: PathBuf,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub include_background: bool,
    /// Row label in the markdown table.
    pub method: String,
}

#[derive(Debug, Clone)]
pub struct EvaluateReport {
    pub scores: Vec<(String, CaseScores)>,
    /// `(dataset, case, reason)` for every case that was not scored.
    pub skipped: Vec<(String, String, String)>,
    /// Datasets without a single scored case.
    pub empty_datasets: Vec<String>,
    pub summary: Option<Aggregate>,
}

/// `<dir>/<dataset>/<case>.nii[.gz]`, falling back to `<dir>/<case>.nii[.gz]`.
pub fn find_prediction(dir: &Path, dataset: &str, case: &str) -> Option<PathBuf> {
    [dir.join(dataset), dir.to_path_buf()]
        .into_iter()
        .flat_map(|d| [d.join(format!("{case}.nii.gz")), d.join(format!("{case}.nii"))])
        .find(|p| p.is_file())
}

fn score_case(
    loaded: &LoadedManifest,
    name: &str,
    reference: &Path,
    predictions: &Path,
    include_background: bool,
) -> Result<CaseScores, String> {
    let dataset = &loaded.manifest.name;
    let pred_path = find_prediction(predictions, dataset, name).ok_or_else(|| "missing prediction".to_string())?;
    let reference = read_nifti(reference).map_err(|e| format!("reference: {e}"))?;
    let pred = read_nifti(&pred_path).map_err(|e| format!("prediction: {e}"))?;
    let first = if include_background { 0 } else { 1 };
    let classes: Vec<u32> = (first..loaded.manifest.classes.len() as u32).collect();
    dice_per_class(name, &pred, &reference, &classes).map_err(|e| e.to_string())
}

pub fn run_evaluate(opts: &EvaluateOptions) -> anyhow::Result<EvaluateReport> {
    let manifests = opts
        .manifests
        .iter()
        .map(|p| DatasetManifest::load(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    ensure_dir(&opts.out)?;

    let jobs: Vec<(&LoadedManifest, String, PathBuf)> = manifests
        .iter()
        .flat_map(|m| m.cases().into_iter().map(move |(n, p)| (m, n, p)))
        .collect();
    let results: Vec<Result<CaseScores, String>> = with_pool(opts.workers, || {
        jobs.par_iter()
            .map(|(m, name, path)| score_case(m, name, path, &opts.predictions, opts.include_background))
            .collect()
    })?;

    let mut scores = Vec::new();
    let mut skipped = Vec::new();
    for ((m, name, _), r) in jobs.iter().zip(results) {
        let dataset = m.manifest.name.clone();
        match r {
            Ok(s) => scores.push((dataset, s)),
            Err(e) => skipped.push((dataset, name.clone(), e)),
        }
    }

    let empty_datasets: Vec<String> = manifests
        .iter()
        .map(|m| m.manifest.name.clone())
        .filter(|d| !scores.iter().any(|(g, s)| g == d && s.mean.is_some()))
        .collect();
    let kept: Vec<&(String, CaseScores)> = scores.iter().filter(|(g, _)| !empty_datasets.contains(g)).collect();
    let summary = if kept.is_empty() {
        None
    } else {
        let cases: Vec<CaseScores> = kept.iter().map(|(_, s)| s.clone()).collect();
        let groups: Vec<String> = kept.iter().map(|(g, _)| g.clone()).collect();
        Some(aggregate(&cases, &groups)?)
    };

    let report = EvaluateReport {
        scores,
        skipped,
        empty_datasets,
        summary,
    };
    write_case_csv(&opts.out.join(CASE_FILE), &manifests, &report)?;
    write_summary_csv(&opts.out.join(SUMMARY_FILE), &report)?;
    let method = if opts.method.is_empty() { "prediction" } else { &opts.method };
    fs::write(opts.out.join(TABLE_FILE), summary_markdown(method, &report))
        .with_context(|| format!("cannot write {}", opts.out.join(TABLE_FILE).display()))?;
    Ok(report)
}

fn format_score(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |d| d.to_string())
}

/// Rows `dataset, case, class, name, dice` with full-precision values, so
/// every summary figure can be recomputed from this file alone.
fn write_case_csv(path: &Path, manifests: &[LoadedManifest], report: &EvaluateReport) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["dataset", "case", "class", "name", "dice"])?;
    for (dataset, s) in &report.scores {
        let m = manifests.iter().find(|m| &m.manifest.name == dataset).expect("dataset of a scored case");
        for &(class, dice) in &s.per_class {
            w.write_record([dataset.clone(), s.case_id.clone(), class.to_string(), m.class_name(class), format_score(dice)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_summary_csv(path: &Path, report: &EvaluateReport) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["dataset", "cases", "undefined_cases", "skipped", "mean"])?;
    let skipped = |d: &str| report.skipped.iter().filter(|s| s.0 == d).count().to_string();
    if let Some(agg) = &report.summary {
        for d in &agg.datasets {
            w.write_record([
                d.name.clone(),
                d.cases.to_string(),
                d.undefined_cases.to_string(),
                skipped(&d.name),
                d.mean.to_string(),
            ])?;
        }
    }
    for d in &report.empty_datasets {
        w.write_record([d.clone(), "0".into(), String::new(), skipped(d), UNDEFINED.into()])?;
    }
    let grand = report.summary.as_ref().map(|a| a.grand_mean);
    w.write_record(["mean".into(), String::new(), String::new(), String::new(), format_score(grand)])?;
    w.flush()?;
    Ok(())
}

pub fn summary_markdown(method: &str, report: &EvaluateReport) -> String {
    let mut out = match &report.summary {
        Some(agg) => markdown_table(&[(method, agg)]),
        None => "No case could be scored.\n".to_string(),
    };
    if !report.skipped.is_empty() || !report.empty_datasets.is_empty() {
        out.push_str("\nNot scored:\n\n");
        for (d, c, why) in &report.skipped {
            out.push_str(&format!("- {d}/{c}: {why}\n"));
        }
        for d in &report.empty_datasets {
            out.push_str(&format!("- {d}: no scored case, left out of the mean\n"));
        }
    }
    out
}
