//! Dataset manifests: one TOML file per dataset.
//!
//! ```toml
//! name = "acdc"
//! root = "labels"            # relative to the manifest's directory
//! classes = ["background", "rv", "myo", "lv"]
//! cases = ["patient001.nii.gz", "patient002.nii.gz"]
//! slice_axis = 2             # optional
//!
//! [scribble]                 # optional generator overrides
//! erosion_radius = 3.0
//! ```

use std::fs;
use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::InvalidInput;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    #[serde(default = "default_root")]
    pub root: PathBuf,
    pub classes: Vec<String>,
    pub cases: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice_axis: Option<usize>,
    #[serde(default, skip_serializing_if = "toml::Table::is_empty")]
    pub scribble: toml::Table,
}

fn default_root() -> PathBuf {
    PathBuf::from(".")
}

/// A manifest together with the directory its relative paths start from.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub manifest: DatasetManifest,
    pub base: PathBuf,
}

impl DatasetManifest {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| InvalidInput(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> anyhow::Result<LoadedManifest> {
        let text = fs::read_to_string(path)
            .map_err(|e| InvalidInput(format!("cannot read manifest {}: {e}", path.display())))?;
        let manifest = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Ok(LoadedManifest {
            base: dir.join(&manifest.root),
            manifest,
        })
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.name.trim().is_empty() {
            bail!(InvalidInput("manifest name is empty".into()));
        }
        if self.classes.first().map(String::as_str) != Some("background") {
            bail!(InvalidInput("class 0 must be named \"background\"".into()));
        }
        if let Some(axis) = self.slice_axis {
            if axis > 2 {
                bail!(InvalidInput(format!("slice_axis {axis} is not 0, 1 or 2")));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for case in &self.cases {
            let escapes = case.is_absolute()
                || case
                    .components()
                    .any(|c| matches!(c, Component::ParentDir | Component::Prefix(_)));
            if escapes {
                bail!(InvalidInput(format!(
                    "case path {} must stay under the root",
                    case.display()
                )));
            }
            if !names.insert(case_name(case)) {
                bail!(InvalidInput(format!("duplicate case name {}", case_name(case))));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serialises")
    }
}

impl LoadedManifest {
    pub fn case_path(&self, case: &Path) -> PathBuf {
        self.base.join(case)
    }

    /// `(case name, absolute path)` in manifest order.
    pub fn cases(&self) -> Vec<(String, PathBuf)> {
        self.manifest
            .cases
            .iter()
            .map(|c| (case_name(c), self.case_path(c)))
            .collect()
    }

    pub fn class_name(&self, class: u32) -> String {
        self.manifest
            .classes
            .get(class as usize)
            .cloned()
            .unwrap_or_else(|| format!("class_{class}"))
    }
}

/// File name without directory and `.nii` / `.nii.gz` suffix.
pub fn case_name(path: &Path) -> String {
    let file = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    for suffix in [".nii.gz", ".nii"] {
        if let Some(stem) = file.strip_suffix(suffix) {
            return stem.to_string();
        }
    }
    file
}
