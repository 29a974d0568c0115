use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;

use scribble_core::metrics::{scribble_stats, ScribbleStats};
use scribble_core::scribble::{generate_volume_with_id, volume_id, ScribbleConfig, ScribbleVolume};
use scribble_core::{read_nifti, write_nifti};

use crate::manifest::{DatasetManifest, LoadedManifest};
use crate::{ensure_dir, with_pool, InvalidInput};

pub const STATS_FILE: &str = "scribble_stats.csv";

#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    pub manifest: PathBuf,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub slice_axis: Option<usize>,
}

/// Layers, lowest first: defaults, the config file, the manifest's
/// `[scribble]` table and `slice_axis`, then command-line flags.
pub fn resolve_config(
    config_file: Option<&Path>,
    manifest: &DatasetManifest,
    seed: Option<u64>,
    slice_axis: Option<usize>,
) -> anyhow::Result<ScribbleConfig> {
    let mut table = match config_file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| InvalidInput(format!("config {}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    for (k, v) in &manifest.scribble {
        table.insert(k.clone(), v.clone());
    }
    let mut cfg: ScribbleConfig = table
        .try_into()
        .map_err(|e| InvalidInput(format!("scribble config: {e}")))?;
    if let Some(axis) = manifest.slice_axis {
        cfg.slice_axis = axis;
    }
    if let Some(axis) = slice_axis {
        cfg.slice_axis = axis;
    }
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    cfg.validate().map_err(|e| InvalidInput(e.to_string()))?;
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub case: String,
    pub outcome: Result<ScribbleStats, String>,
}

#[derive(Debug, Clone)]
pub struct GenerateReport {
    pub cases: Vec<CaseResult>,
    pub stats_path: PathBuf,
}

impl GenerateReport {
    pub fn failures(&self) -> impl Iterator<Item = (&str, &str)> {
        self.cases
            .iter()
            .filter_map(|c| c.outcome.as_ref().err().map(|e| (c.case.as_str(), e.as_str())))
    }
}

/// Scribbles one case, writes it, reads it back and re-checks it.
fn generate_case(name: &str, input: &Path, out: &Path, cfg: &ScribbleConfig) -> anyhow::Result<ScribbleStats> {
    let dense = read_nifti(input)?;
    let scribbles = generate_volume_with_id(&dense, cfg, volume_id(name));
    let path = out.join(format!("{name}.nii.gz"));
    write_nifti(scribbles.volume(), &path)?;

    let reread = ScribbleVolume::from_volume(read_nifti(&path)?);
    if reread != scribbles {
        bail!("{} does not read back identically", path.display());
    }
    reread.volume().check_same_grid(&dense)?;
    let violations = reread.violations(&dense)?;
    if violations > 0 {
        bail!("{violations} scribble voxels disagree with the reference");
    }
    Ok(scribble_stats(&reread, &dense)?)
}

pub fn run_generate(opts: &GenerateOptions) -> anyhow::Result<GenerateReport> {
    let loaded = DatasetManifest::load(&opts.manifest)?;
    let cfg = resolve_config(opts.config.as_deref(), &loaded.manifest, opts.seed, opts.slice_axis)?;
    ensure_dir(&opts.out)?;
    let cases = loaded.cases();
    let results: Vec<CaseResult> = with_pool(opts.workers, || {
        cases
            .par_iter()
            .map(|(name, path)| CaseResult {
                case: name.clone(),
                outcome: generate_case(name, path, &opts.out, &cfg).map_err(|e| format!("{e:#}")),
            })
            .collect()
    })?;
    let stats_path = opts.out.join(STATS_FILE);
    write_stats_csv(&stats_path, &loaded, &results)?;
    Ok(GenerateReport {
        cases: results,
        stats_path,
    })
}

/// One row per (case, class) plus a `total` row per case; failed cases
/// are left out.
pub fn write_stats_csv(path: &Path, manifest: &LoadedManifest, results: &[CaseResult]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["case", "class", "name", "annotated", "class_voxels", "fraction"])?;
    for r in results {
        let Ok(stats) = &r.outcome else { continue };
        for s in &stats.per_class {
            w.write_record([
                r.case.clone(),
                s.class.to_string(),
                manifest.class_name(s.class),
                s.annotated.to_string(),
                s.class_voxels.to_string(),
                format!("{:.6}", s.fraction),
            ])?;
        }
        let voxels: u64 = stats.per_class.iter().map(|s| s.class_voxels).sum();
        let fraction = if voxels > 0 {
            stats.total_annotated as f64 / voxels as f64
        } else {
            0.0
        };
        w.write_record([
            r.case.clone(),
            String::new(),
            "total".into(),
            stats.total_annotated.to_string(),
            voxels.to_string(),
            format!("{fraction:.6}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}
