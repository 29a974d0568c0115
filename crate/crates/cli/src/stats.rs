use std::path::{Path, PathBuf};

use rayon::prelude::*;

use scribble_core::metrics::{format_relative_change, scribble_stats};
use scribble_core::read_nifti;
use scribble_core::scribble::ScribbleVolume;

use crate::evaluate::find_prediction;
use crate::generate::{write_stats_csv, CaseResult};
use crate::manifest::DatasetManifest;
use crate::with_pool;

#[derive(Debug, Clone, Default)]
pub struct StatsOptions {
    pub manifest: PathBuf,
    pub scribbles: PathBuf,
    /// A second scribble set to compare annotated totals against.
    pub compare: Option<PathBuf>,
    pub out: PathBuf,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct StatsReport {
    pub cases: Vec<CaseResult>,
    pub total: u64,
    pub compare_total: Option<u64>,
}

impl StatsReport {
    /// Change from this set's total to the comparison set's, e.g. `+71%`.
    pub fn relative_change(&self) -> Option<String> {
        self.compare_total.map(|b| format_relative_change(self.total, b))
    }
}

fn collect(dir: &Path, dataset: &str, cases: &[(String, PathBuf)]) -> Vec<CaseResult> {
    cases
        .par_iter()
        .map(|(name, dense_path)| {
            let outcome = (|| {
                let path = find_prediction(dir, dataset, name).ok_or("missing scribble file")?;
                let dense = read_nifti(dense_path).map_err(|e| format!("reference: {e}"))?;
                let s = ScribbleVolume::from_volume(read_nifti(&path).map_err(|e| format!("scribbles: {e}"))?);
                scribble_stats(&s, &dense).map_err(|e| e.to_string())
            })();
            CaseResult {
                case: name.clone(),
                outcome,
            }
        })
        .collect()
}

fn total(cases: &[CaseResult]) -> u64 {
    cases
        .iter()
        .filter_map(|c| c.outcome.as_ref().ok())
        .map(|s| s.total_annotated)
        .sum()
}

pub fn run_stats(opts: &StatsOptions) -> anyhow::Result<StatsReport> {
    let loaded = DatasetManifest::load(&opts.manifest)?;
    let cases = loaded.cases();
    let dataset = loaded.manifest.name.clone();
    let (primary, other) = with_pool(opts.workers, || {
        let a = collect(&opts.scribbles, &dataset, &cases);
        let b = opts.compare.as_ref().map(|d| collect(d, &dataset, &cases));
        (a, b)
    })?;
    if let Some(parent) = opts.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        crate::ensure_dir(parent)?;
    }
    write_stats_csv(&opts.out, &loaded, &primary)?;
    Ok(StatsReport {
        total: total(&primary),
        compare_total: other.as_deref().map(total),
        cases: primary,
    })
}
