//! Scribble synthesis from dense label slices.
//!
//! Every class on every slice gets two scribbles:
//!
//! * an *interior* scribble: a NURBS curve through a few random points of the
//!   eroded class region, rasterized and clipped to the class;
//! * a *border* scribble: a stretch of the class contour pushed slightly
//!   inwards by a smoothly varying offset, rasterized and clipped.
//!
//! Each `(volume, slice, class, kind)` draws from its own random stream, so
//! output does not depend on the order slices are processed in.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    connected_components, erode, rasterize_polyline, trace_boundary, Components, Connectivity,
    Mask2D, Point2,
};
use crate::nurbs::NurbsCurve;
use crate::volume::{default_ignore_label, LabelSlice, LabelVolume};
use crate::{Error, Result};

/// All generation knobs. Unknown keys in a config file are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScribbleConfig {
    /// Axis held fixed for each slice.
    pub slice_axis: usize,
    /// First erosion radius (pixels) defining the class interior.
    pub erosion_radius: f64,
    /// Smaller radii tried, in order, when the interior vanishes; ends in 0.
    pub erosion_fallbacks: Vec<f64>,
    /// Inclusive range for the number of interior control points.
    pub control_points: [usize; 2],
    /// Range control-point weights are drawn from.
    pub weight_range: [f64; 2],
    pub samples_per_curve: usize,
    /// Range of the contour fraction a border scribble covers.
    pub arc_fraction: [f64; 2],
    /// Largest inward offset of a border scribble, in pixels.
    pub offset_scale: f64,
    /// Components smaller than this are not annotated.
    pub min_component_pixels: usize,
    pub include_background: bool,
    pub master_seed: u64,
    /// Label for unannotated voxels; chosen from the class range when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ignore_label: Option<u32>,
}

impl Default for ScribbleConfig {
    fn default() -> Self {
        Self {
            slice_axis: 2,
            erosion_radius: 2.0,
            erosion_fallbacks: vec![2.0, 1.0, 0.0],
            control_points: [4, 8],
            weight_range: [0.5, 2.0],
            samples_per_curve: 128,
            arc_fraction: [0.1, 0.25],
            offset_scale: 1.5,
            min_component_pixels: 10,
            include_background: true,
            master_seed: 0,
            ignore_label: None,
        }
    }
}

impl ScribbleConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.slice_axis > 2 {
            return bad(format!("slice_axis {} is not 0, 1 or 2", self.slice_axis));
        }
        if !(self.erosion_radius >= 0.0 && self.erosion_radius.is_finite()) {
            return bad(format!("erosion_radius {} must be >= 0", self.erosion_radius));
        }
        let fb = &self.erosion_fallbacks;
        if fb.last() != Some(&0.0) || fb.iter().any(|r| !(*r >= 0.0)) || fb.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!(
                "erosion_fallbacks {fb:?} must strictly descend and end in 0"
            ));
        }
        let [lo, hi] = self.control_points;
        if lo < 2 || hi < lo {
            return bad(format!("control_points {lo}..={hi} must satisfy 2 <= lo <= hi"));
        }
        let [wlo, whi] = self.weight_range;
        if !(wlo > 0.0 && whi >= wlo && whi.is_finite()) {
            return bad(format!("weight_range [{wlo}, {whi}] must be positive and ordered"));
        }
        if self.samples_per_curve < 2 {
            return bad("samples_per_curve must be at least 2".into());
        }
        let [flo, fhi] = self.arc_fraction;
        if !(flo > 0.0 && fhi >= flo && fhi <= 1.0) {
            return bad(format!("arc_fraction [{flo}, {fhi}] must lie in (0, 1]"));
        }
        if !(self.offset_scale >= 0.0 && self.offset_scale.is_finite()) {
            return bad(format!("offset_scale {} must be >= 0", self.offset_scale));
        }
        if self.min_component_pixels == 0 {
            return bad("min_component_pixels must be positive".into());
        }
        Ok(())
    }

    /// Erosion radii in the order they are tried.
    pub fn erosion_radii(&self) -> Vec<f64> {
        std::iter::once(self.erosion_radius)
            .chain(
                self.erosion_fallbacks
                    .iter()
                    .copied()
                    .filter(|&r| r < self.erosion_radius),
            )
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScribbleKind {
    Interior = 0,
    Border = 1,
}

/// SplitMix64 finaliser.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit id for a case name (FNV-1a).
pub fn volume_id(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Derives per-scribble random streams for one volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamFamily {
    pub master_seed: u64,
    pub volume_id: u64,
}

impl StreamFamily {
    pub fn new(master_seed: u64, volume_id: u64) -> Self {
        Self {
            master_seed,
            volume_id,
        }
    }

    /// ChaCha8 stream keyed by the full derivation tuple.
    pub fn stream(&self, axis: usize, slice: usize, class: u32, kind: ScribbleKind) -> ChaCha8Rng {
        let h = [
            self.volume_id,
            axis as u64,
            slice as u64,
            u64::from(class),
            kind as u64,
        ]
        .iter()
        .fold(splitmix64(self.master_seed), |h, &v| splitmix64(h ^ splitmix64(v)));
        let mut seed = [0u8; 32];
        for (k, chunk) in seed.chunks_exact_mut(8).enumerate() {
            chunk.copy_from_slice(&splitmix64(h.wrapping_add(k as u64)).to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

/// Union of the 8-connected components with at least `min_pixels` pixels.
fn eligible_region(mask: &Mask2D, min_pixels: usize) -> (Components, Mask2D) {
    let comps = connected_components(mask, Connectivity::Eight);
    let keep = Mask2D::from_fn(mask.width(), mask.height(), |x, y| {
        comps.size(comps.label(x, y)) >= min_pixels
    });
    (comps, keep)
}

/// Picks a component id with probability proportional to its size, among
/// those passing `accept`.
fn pick_component(comps: &Components, accept: impl Fn(usize) -> bool, rng: &mut impl Rng) -> Option<u32> {
    let candidates: Vec<(u32, usize)> = comps
        .sizes()
        .iter()
        .enumerate()
        .filter(|(_, &s)| accept(s))
        .map(|(i, &s)| (i as u32 + 1, s))
        .collect();
    let total: usize = candidates.iter().map(|c| c.1).sum();
    if total == 0 {
        return None;
    }
    let mut t = rng.random_range(0..total);
    for (id, size) in candidates {
        if t < size {
            return Some(id);
        }
        t -= size;
    }
    unreachable!("draw below total size")
}

/// Greedy nearest-neighbour ordering from `start`; ties go to the lower index.
fn nearest_neighbour_order(points: &[Point2], start: usize) -> Vec<Point2> {
    let mut remaining: Vec<usize> = (0..points.len()).filter(|&i| i != start).collect();
    let mut order = vec![points[start]];
    let mut current = points[start];
    while !remaining.is_empty() {
        let (pos, _) = remaining
            .iter()
            .enumerate()
            .map(|(pos, &i)| (pos, current.dist(points[i])))
            .fold((0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
        current = points[remaining.remove(pos)];
        order.push(current);
    }
    order
}

/// Interior scribble together with the intermediate quantities tests check.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorScribble {
    pub pixels: Mask2D,
    /// Erosion radius that left a non-empty interior.
    pub radius: Option<f64>,
    /// Control points in stroke order.
    pub control_points: Vec<Point2>,
    /// Rasterized curve before clipping to the class mask.
    pub unclipped: Mask2D,
}

pub fn interior_scribble(class_mask: &Mask2D, cfg: &ScribbleConfig, rng: &mut impl Rng) -> Mask2D {
    interior_scribble_detailed(class_mask, cfg, rng).pixels
}

pub fn interior_scribble_detailed(
    class_mask: &Mask2D,
    cfg: &ScribbleConfig,
    rng: &mut impl Rng,
) -> InteriorScribble {
    let (w, h) = (class_mask.width(), class_mask.height());
    let empty = InteriorScribble {
        pixels: Mask2D::new(w, h),
        radius: None,
        control_points: Vec::new(),
        unclipped: Mask2D::new(w, h),
    };
    let (_, region) = eligible_region(class_mask, cfg.min_component_pixels);
    if region.is_empty() {
        return empty;
    }
    let Some((radius, interior)) = cfg
        .erosion_radii()
        .into_iter()
        .map(|r| (r, erode(&region, r)))
        .find(|(_, m)| !m.is_empty())
    else {
        return empty;
    };

    let comps = connected_components(&interior, Connectivity::Eight);
    let id = pick_component(&comps, |_| true, rng).expect("interior is non-empty");
    let pool: Vec<(usize, usize)> = comps.mask(id).pixels().collect();

    let [lo, hi] = cfg.control_points;
    let k = rng.random_range(lo..=hi).min(pool.len());
    let picked: Vec<Point2> = index::sample(rng, pool.len(), k)
        .into_iter()
        .map(|i| Point2::from(pool[i]))
        .collect();
    let start = rng.random_range(0..k);
    let control_points = nearest_neighbour_order(&picked, start);

    let polyline = if k == 1 {
        control_points.clone()
    } else {
        let [wlo, whi] = cfg.weight_range;
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(wlo..=whi)).collect();
        let curve = NurbsCurve::make_clamped(control_points.clone(), weights, 3.min(k - 1))
            .expect("validated curve parameters");
        curve.sample(cfg.samples_per_curve)
    };
    let unclipped = rasterize_polyline(&polyline, w, h);
    InteriorScribble {
        pixels: unclipped.intersection(class_mask),
        radius: Some(radius),
        control_points,
        unclipped,
    }
}

/// Border scribble with its unclipped arc, for tests.
#[derive(Debug, Clone, PartialEq)]
pub struct BorderScribble {
    pub pixels: Mask2D,
    /// Contour pixels the arc follows, in order.
    pub arc: Vec<(usize, usize)>,
    /// Arc points after the inward offset.
    pub offset_points: Vec<Point2>,
}

pub fn border_scribble(class_mask: &Mask2D, cfg: &ScribbleConfig, rng: &mut impl Rng) -> Mask2D {
    border_scribble_detailed(class_mask, cfg, rng).pixels
}

pub fn border_scribble_detailed(
    class_mask: &Mask2D,
    cfg: &ScribbleConfig,
    rng: &mut impl Rng,
) -> BorderScribble {
    let (w, h) = (class_mask.width(), class_mask.height());
    let empty = BorderScribble {
        pixels: Mask2D::new(w, h),
        arc: Vec::new(),
        offset_points: Vec::new(),
    };
    let (comps, _) = eligible_region(class_mask, cfg.min_component_pixels);
    let Some(id) = pick_component(&comps, |s| s >= cfg.min_component_pixels, rng) else {
        return empty;
    };
    let contour = trace_boundary(&comps, id).expect("picked component is non-empty");
    let perimeter = contour.len();
    if perimeter < 2 {
        return empty;
    }

    let [flo, fhi] = cfg.arc_fraction;
    let fraction = rng.random_range(flo..=fhi);
    let arc_len = ((fraction * perimeter as f64).round() as usize).clamp(2, perimeter);
    let start = rng.random_range(0..perimeter);
    let at = |i: isize| contour.points[(start as isize + i).rem_euclid(perimeter as isize) as usize];
    let arc: Vec<(usize, usize)> = (0..arc_len as isize).map(at).collect();

    let offsets = smooth_offsets(arc_len, cfg.offset_scale, rng);
    let inside = |p: Point2| {
        let (x, y) = p.to_pixel();
        x >= 0
            && y >= 0
            && (x as usize) < w
            && (y as usize) < h
            && comps.label(x as usize, y as usize) == id
    };
    let offset_points: Vec<Point2> = (0..arc_len as isize)
        .zip(&offsets)
        .map(|(i, &offset)| {
            let p = Point2::from(at(i));
            let (prev, next) = (Point2::from(at(i - 1)), Point2::from(at(i + 1)));
            let (tx, ty) = (next.x - prev.x, next.y - prev.y);
            let norm = tx.hypot(ty);
            if norm == 0.0 || offset == 0.0 {
                return p;
            }
            // clockwise on screen: the interior lies to the right of travel
            let mut n = Point2::new(-ty / norm, tx / norm);
            if !inside(Point2::new(p.x + n.x, p.y + n.y)) && inside(Point2::new(p.x - n.x, p.y - n.y)) {
                n = Point2::new(-n.x, -n.y);
            }
            let q = Point2::new(p.x + offset * n.x, p.y + offset * n.y);
            if inside(q) {
                q
            } else {
                p
            }
        })
        .collect();

    let pixels = rasterize_polyline(&offset_points, w, h).intersection(class_mask);
    BorderScribble {
        pixels,
        arc,
        offset_points,
    }
}

/// Offsets along an arc of `len` points: `ceil(len / 8) + 2` random control
/// values in `[0, scale]` at evenly spaced positions, smoothed by a clamped
/// NURBS with unit weights.
fn smooth_offsets(len: usize, scale: f64, rng: &mut impl Rng) -> Vec<f64> {
    let m = len.div_ceil(8) + 2;
    let controls: Vec<Point2> = (0..m)
        .map(|j| Point2::new(j as f64 / (m - 1) as f64, rng.random_range(0.0..=scale)))
        .collect();
    let curve = NurbsCurve::make_clamped(controls, vec![1.0; m], 3.min(m - 1))
        .expect("at least three offset controls");
    (0..len)
        .map(|i| {
            let u = if len == 1 { 0.0 } else { i as f64 / (len - 1) as f64 };
            curve.evaluate(u.min(1.0)).expect("u in [0, 1]").y
        })
        .collect()
}

/// Scribbles for one slice. Classes absent from the slice are skipped;
/// class 0 is skipped unless `include_background`. Unannotated pixels get
/// `ignore_label`.
pub fn generate_slice(
    slice: &LabelSlice,
    classes: &[u32],
    cfg: &ScribbleConfig,
    streams: &StreamFamily,
    ignore_label: u32,
) -> LabelSlice {
    let [w, h] = slice.extents;
    let mut out = slice.filled_like(ignore_label);
    for &class in classes {
        if class == 0 && !cfg.include_background {
            continue;
        }
        let bits: Vec<bool> = slice.data.iter().map(|&l| l == class).collect();
        if !bits.iter().any(|&b| b) {
            continue;
        }
        let mask = Mask2D::from_bits(w, h, bits).expect("slice extents");
        let mut rng = streams.stream(slice.axis, slice.index, class, ScribbleKind::Interior);
        let interior = interior_scribble(&mask, cfg, &mut rng);
        let mut rng = streams.stream(slice.axis, slice.index, class, ScribbleKind::Border);
        let border = border_scribble(&mask, cfg, &mut rng);
        for (x, y) in interior.union(&border).pixels() {
            out.data[x + w * y] = class;
        }
    }
    out
}

/// A sparse label volume: scribbled voxels carry their class, the rest the
/// ignore label.
#[derive(Debug, Clone, PartialEq)]
pub struct ScribbleVolume {
    volume: LabelVolume,
}

impl ScribbleVolume {
    pub fn from_volume(volume: LabelVolume) -> Self {
        Self { volume }
    }

    pub fn volume(&self) -> &LabelVolume {
        &self.volume
    }

    pub fn into_volume(self) -> LabelVolume {
        self.volume
    }

    pub fn ignore_label(&self) -> u32 {
        self.volume.ignore_label()
    }

    pub fn annotated_count(&self) -> usize {
        let ignore = self.ignore_label();
        self.volume.data().iter().filter(|&&l| l != ignore).count()
    }

    /// Voxels whose scribble label disagrees with `dense`.
    pub fn violations(&self, dense: &LabelVolume) -> Result<usize> {
        if self.volume.dims() != dense.dims() {
            return Err(Error::ShapeMismatch(format!(
                "scribble dims {:?} vs dense {:?}",
                self.volume.dims(),
                dense.dims()
            )));
        }
        let ignore = self.ignore_label();
        Ok(self
            .volume
            .data()
            .iter()
            .zip(dense.data())
            .filter(|(&s, &d)| s != ignore && s != d)
            .count())
    }
}

/// Ignore label for scribbles of `dense`: the configured one unless it
/// collides with a class, otherwise the default for the class range.
pub fn scribble_ignore_label(dense: &LabelVolume, cfg: &ScribbleConfig) -> u32 {
    let classes = dense.class_labels();
    cfg.ignore_label
        .filter(|i| classes.binary_search(i).is_err())
        .unwrap_or_else(|| default_ignore_label(classes.last().copied().unwrap_or(0)))
}

/// Scribbles for every slice of `dense` along `cfg.slice_axis`, using the
/// random streams of volume id 0.
pub fn generate_volume(dense: &LabelVolume, cfg: &ScribbleConfig) -> ScribbleVolume {
    generate_volume_with_id(dense, cfg, 0)
}

pub fn generate_volume_with_id(dense: &LabelVolume, cfg: &ScribbleConfig, volume_id: u64) -> ScribbleVolume {
    let ignore = scribble_ignore_label(dense, cfg);
    let classes = dense.class_labels();
    let streams = StreamFamily::new(cfg.master_seed, volume_id);
    let axis = cfg.slice_axis.min(2);
    let mut out = LabelVolume::filled_like(dense, ignore).with_ignore_label(ignore);
    for k in 0..dense.dims()[axis] {
        let slice = dense.slice(axis, k).expect("index within extent");
        let scribbled = generate_slice(&slice, &classes, cfg, &streams, ignore);
        out.insert_slice(&scribbled).expect("same grid");
    }
    ScribbleVolume::from_volume(out)
}
