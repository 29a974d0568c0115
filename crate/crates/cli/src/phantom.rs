//! Synthetic label volumes built from spheres, ellipsoids and boxes.
//!
//! ```toml
//! name = "phantom"
//! dims = [48, 48, 48]
//! spacing = [1.0, 1.0, 1.0]
//! jitter = 0.1               # fraction of each radius
//! classes = ["background", "ball", "slab"]
//!
//! [[shapes]]
//! kind = "sphere"
//! class = 1
//! center = [24.0, 24.0, 24.0]
//! radii = 10.0
//!
//! [[shapes]]
//! kind = "box"
//! class = 2
//! center = [24.0, 10.0, 24.0]
//! radii = [20.0, 4.0, 20.0]  # half extents
//! ```
//!
//! Coordinates are in voxels and a voxel belongs to a shape when its centre
//! does. Shapes are painted in order, so later ones overwrite earlier ones,
//! and anything outside the grid is clipped.

use std::fs;
use std::path::PathBuf;

use anyhow::bail;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use scribble_core::{write_nifti, LabelVolume};

use crate::manifest::DatasetManifest;
use crate::{ensure_dir, with_pool, InvalidInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Sphere,
    Ellipsoid,
    Box,
}

/// One radius for all axes or one per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Radii {
    Uniform(f64),
    PerAxis([f64; 3]),
}

impl Radii {
    pub fn per_axis(self) -> [f64; 3] {
        match self {
            Radii::Uniform(r) => [r; 3],
            Radii::PerAxis(r) => r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shape {
    pub kind: ShapeKind,
    pub class: u32,
    pub center: [f64; 3],
    pub radii: Radii,
}

impl Shape {
    fn contains(&self, p: [f64; 3]) -> bool {
        let r = self.radii.per_axis();
        let d: [f64; 3] = std::array::from_fn(|i| (p[i] - self.center[i]) / r[i]);
        match self.kind {
            ShapeKind::Sphere | ShapeKind::Ellipsoid => d.iter().map(|v| v * v).sum::<f64>() <= 1.0,
            ShapeKind::Box => d.iter().all(|v| v.abs() <= 1.0),
        }
    }

    /// Voxel index range along each axis that can hold the shape, clipped.
    fn bounds(&self, dims: [usize; 3]) -> [(usize, usize); 3] {
        let r = self.radii.per_axis();
        std::array::from_fn(|i| {
            let lo = (self.center[i] - r[i]).floor().max(0.0) as usize;
            let hi = ((self.center[i] + r[i]).ceil() + 1.0).clamp(0.0, dims[i] as f64) as usize;
            (lo.min(dims[i]), hi)
        })
    }

    /// Shifts the centre by up to `jitter` of each radius and scales the
    /// radii by a factor in `[1 - jitter, 1 + jitter]` (one factor for a
    /// sphere so it stays round).
    fn jittered(&self, jitter: f64, rng: &mut impl Rng) -> Shape {
        if jitter == 0.0 {
            return self.clone();
        }
        let r = self.radii.per_axis();
        let center = std::array::from_fn(|i| self.center[i] + rng.random_range(-jitter..=jitter) * r[i]);
        let radii = match self.radii {
            Radii::Uniform(v) => Radii::Uniform(v * (1.0 + rng.random_range(-jitter..=jitter))),
            Radii::PerAxis(v) => {
                Radii::PerAxis(std::array::from_fn(|i| v[i] * (1.0 + rng.random_range(-jitter..=jitter))))
            }
        };
        Shape {
            kind: self.kind,
            class: self.class,
            center,
            radii,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub dims: [usize; 3],
    #[serde(default = "unit_spacing")]
    pub spacing: [f32; 3],
    #[serde(default)]
    pub jitter: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
    pub shapes: Vec<Shape>,
}

fn default_name() -> String {
    "phantom".into()
}

fn unit_spacing() -> [f32; 3] {
    [1.0; 3]
}

impl PhantomSpec {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| InvalidInput(format!("phantom spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serialises")
    }

    pub fn class_count(&self) -> u32 {
        self.shapes.iter().map(|s| s.class).max().unwrap_or(0)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let invalid = |msg: String| -> anyhow::Result<()> { bail!(InvalidInput(msg)) };
        if self.dims.contains(&0) {
            return invalid(format!("dims {:?} must be positive", self.dims));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return invalid(format!("spacing {:?} must be positive", self.spacing));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return invalid(format!("jitter {} must lie in [0, 1)", self.jitter));
        }
        if self.shapes.is_empty() {
            return invalid("no shapes".into());
        }
        for (i, s) in self.shapes.iter().enumerate() {
            if s.radii.per_axis().iter().any(|&r| !(r > 0.0 && r.is_finite())) {
                return invalid(format!("shape {i}: radii must be positive"));
            }
            if s.center.iter().any(|c| !c.is_finite()) {
                return invalid(format!("shape {i}: centre must be finite"));
            }
            if s.class == 0 {
                return invalid(format!("shape {i}: class 0 is the background"));
            }
            if s.kind == ShapeKind::Sphere && matches!(s.radii, Radii::PerAxis(r) if r[0] != r[1] || r[1] != r[2]) {
                return invalid(format!("shape {i}: a sphere needs equal radii"));
            }
        }
        let k = self.class_count();
        if let Some(missing) = (1..=k).find(|c| !self.shapes.iter().any(|s| s.class == *c)) {
            return invalid(format!("class ids must run from 1 to {k} without gaps; {missing} has no shape"));
        }
        if !self.classes.is_empty() {
            if self.classes.len() != k as usize + 1 {
                return invalid(format!(
                    "{} class names for {} classes including background",
                    self.classes.len(),
                    k + 1
                ));
            }
            if self.classes[0] != "background" {
                return invalid("class 0 must be named \"background\"".into());
            }
        }
        Ok(())
    }

    /// Class names, generated when the spec gives none.
    pub fn class_names(&self) -> Vec<String> {
        if !self.classes.is_empty() {
            return self.classes.clone();
        }
        std::iter::once("background".to_string())
            .chain((1..=self.class_count()).map(|c| format!("class_{c}")))
            .collect()
    }

    /// Paints the shapes (jittered with `rng`) into a fresh volume. Fails,
    /// naming the class, if a class ends up with no voxels.
    pub fn render(&self, rng: &mut impl Rng) -> anyhow::Result<LabelVolume> {
        let dims = self.dims;
        let mut data = vec![0u32; dims[0] * dims[1] * dims[2]];
        for shape in &self.shapes {
            let shape = shape.jittered(self.jitter, rng);
            let [(x0, x1), (y0, y1), (z0, z1)] = shape.bounds(dims);
            for z in z0..z1 {
                for y in y0..y1 {
                    for x in x0..x1 {
                        if shape.contains([x as f64, y as f64, z as f64]) {
                            data[x + dims[0] * (y + dims[1] * z)] = shape.class;
                        }
                    }
                }
            }
        }
        let names = self.class_names();
        for class in 1..=self.class_count() {
            if !data.contains(&class) {
                bail!(InvalidInput(format!(
                    "class {class} ({}) is empty after rasterization",
                    names[class as usize]
                )));
            }
        }
        Ok(LabelVolume::new(dims, data)?.with_spacing(self.spacing))
    }

    /// Case `index` of a seeded series: each case draws from its own stream.
    pub fn render_case(&self, seed: u64, index: usize) -> anyhow::Result<LabelVolume> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        self.render(&mut rng)
    }

    pub fn case_file_name(&self, index: usize) -> String {
        format!("{}_{index:03}.nii.gz", self.name)
    }
}

#[derive(Debug, Clone)]
pub struct PhantomOptions {
    pub spec: PathBuf,
    pub out: PathBuf,
    pub cases: usize,
    pub seed: u64,
    pub workers: Option<usize>,
}

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Writes `cases` phantoms and a manifest listing them; returns the
/// manifest path.
pub fn run_phantom(opts: &PhantomOptions) -> anyhow::Result<PathBuf> {
    let text = fs::read_to_string(&opts.spec)
        .map_err(|e| InvalidInput(format!("cannot read spec {}: {e}", opts.spec.display())))?;
    let spec = PhantomSpec::parse(&text)?;
    ensure_dir(&opts.out)?;
    let written: Vec<anyhow::Result<String>> = with_pool(opts.workers, || {
        (0..opts.cases)
            .into_par_iter()
            .map(|i| {
                let v = spec.render_case(opts.seed, i)?;
                let file = spec.case_file_name(i);
                write_nifti(&v, opts.out.join(&file))?;
                Ok(file)
            })
            .collect()
    })?;
    let cases = written.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        name: spec.name.clone(),
        root: PathBuf::from("."),
        classes: spec.class_names(),
        cases: cases.into_iter().map(PathBuf::from).collect(),
        slice_axis: None,
        scribble: toml::Table::new(),
    };
    let path = opts.out.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_toml())?;
    Ok(path)
}
