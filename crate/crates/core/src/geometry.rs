//! Binary-mask primitives on 2D slices.
//!
//! Coordinates are `(x, y)` with `x` the first (fastest) slice axis and `y`
//! growing downwards. Pixel `(i, j)` covers `[i-0.5, i+0.5) x [j-0.5, j+0.5)`,
//! so continuous coordinates map to pixels with `floor(v + 0.5)`. Everything
//! outside the grid counts as background.

use std::collections::VecDeque;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Nearest pixel under the half-open pixel convention.
    pub fn to_pixel(self) -> (i64, i64) {
        (round_coord(self.x), round_coord(self.y))
    }
}

impl From<(usize, usize)> for Point2 {
    fn from((x, y): (usize, usize)) -> Self {
        Self::new(x as f64, y as f64)
    }
}

#[inline]
pub fn round_coord(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// A 2D boolean grid, stored row by row (`x` fastest).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask2D {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask2D {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[x + width * y] = f(x, y);
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[x + self.width * y]
    }

    /// Like [`get`](Self::get) but false outside the grid.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[x as usize + self.width * y as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[x + self.width * y] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Set pixels in raster order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn intersection(&self, other: &Mask2D) -> Mask2D {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn union(&self, other: &Mask2D) -> Mask2D {
        self.zip_with(other, |a, b| a || b)
    }

    /// True when every set pixel of `self` is set in `other`.
    pub fn is_subset_of(&self, other: &Mask2D) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    fn zip_with(&self, other: &Mask2D, f: impl Fn(bool, bool) -> bool) -> Mask2D {
        assert_eq!(
            (self.width, self.height),
            (other.width, other.height),
            "mask extents differ"
        );
        Mask2D {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

/// Stand-in for infinity that keeps the lower-envelope arithmetic finite.
const FAR: f64 = 1e20;

/// 1D squared Euclidean distance transform of a sampled function
/// (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        // z[0] is -inf, so k never drops below 0
        let s = loop {
            let p = v[k] as f64;
            let s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * qf - 2.0 * p);
            if s <= z[k] {
                k -= 1;
            } else {
                break s;
            }
        };
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *o = (qf - p) * (qf - p) + f[v[k]];
    }
}

/// 2D squared EDT of `f` (0 at feature pixels, [`FAR`] elsewhere).
fn edt_2d(f: &mut [f64], width: usize, height: usize) {
    let n = width.max(height);
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let mut col = vec![0f64; height];
    let mut out = vec![0f64; n];
    for x in 0..width {
        for y in 0..height {
            col[y] = f[x + width * y];
        }
        edt_1d(&col, &mut out[..height], &mut v, &mut z);
        for y in 0..height {
            f[x + width * y] = out[y];
        }
    }
    for y in 0..height {
        let row = &mut f[width * y..width * (y + 1)];
        edt_1d(row, &mut out[..width], &mut v, &mut z);
        row.copy_from_slice(&out[..width]);
    }
}

/// Squared Euclidean distance from each pixel to the nearest background
/// pixel, with the ring just outside the grid counted as background.
/// Background pixels get 0.
pub fn distance_to_background_sq(mask: &Mask2D) -> Vec<f64> {
    let (w, h) = (mask.width + 2, mask.height + 2);
    let mut f = vec![0.0; w * h];
    for (x, y) in mask.pixels() {
        f[(x + 1) + w * (y + 1)] = FAR;
    }
    edt_2d(&mut f, w, h);
    let mut out = Vec::with_capacity(mask.bits.len());
    for y in 0..mask.height {
        out.extend_from_slice(&f[w * (y + 1) + 1..w * (y + 1) + 1 + mask.width]);
    }
    out
}

/// Euclidean distance from each pixel to the nearest set pixel of `targets`;
/// `f64::INFINITY` everywhere if `targets` is empty.
pub fn distance_to_set(targets: &Mask2D) -> Vec<f64> {
    if targets.is_empty() {
        return vec![f64::INFINITY; targets.bits.len()];
    }
    let mut f: Vec<f64> = targets.bits.iter().map(|&b| if b { 0.0 } else { FAR }).collect();
    edt_2d(&mut f, targets.width, targets.height);
    f.into_iter().map(f64::sqrt).collect()
}

/// Keeps the pixels whose distance to the nearest background pixel exceeds
/// `radius` (erosion by a closed Euclidean disk). Radius 0 is the identity.
pub fn erode(mask: &Mask2D, radius: f64) -> Mask2D {
    let r2 = radius.max(0.0).powi(2);
    let d2 = distance_to_background_sq(mask);
    Mask2D {
        width: mask.width,
        height: mask.height,
        bits: d2.iter().map(|&d| d > r2).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(1, 0), (0, 1), (-1, 0), (0, -1)],
            Connectivity::Eight => &[
                (1, 0),
                (1, 1),
                (0, 1),
                (-1, 1),
                (-1, 0),
                (-1, -1),
                (0, -1),
                (1, -1),
            ],
        }
    }
}

/// Connected-component labelling: ids start at 1 and are assigned in raster
/// order of each component's first pixel; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl Components {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[x + self.width * y]
    }

    fn label_signed(&self, x: i64, y: i64) -> u32 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            0
        } else {
            self.labels[x as usize + self.width * y as usize]
        }
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Size of component `id`, 0 if it does not exist.
    pub fn size(&self, id: u32) -> usize {
        id.checked_sub(1)
            .and_then(|i| self.sizes.get(i as usize))
            .copied()
            .unwrap_or(0)
    }

    /// Sizes indexed by `id - 1`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn mask(&self, id: u32) -> Mask2D {
        Mask2D {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l == id).collect(),
        }
    }
}

pub fn connected_components(mask: &Mask2D, connectivity: Connectivity) -> Components {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        labels[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if mask.get_signed(nx, ny) {
                    let j = nx as usize + w * ny as usize;
                    if labels[j] == 0 {
                        labels[j] = id;
                        queue.push_back(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    Components {
        width: w,
        height: h,
        labels,
        sizes,
    }
}

/// A pixel is on the boundary when it is set and at least one of its four
/// edge neighbours is not (the grid exterior counts as unset).
pub fn is_boundary_pixel(mask: &Mask2D, x: usize, y: usize) -> bool {
    let (x, y) = (x as i64, y as i64);
    mask.get_signed(x, y)
        && [(1, 0), (0, 1), (-1, 0), (0, -1)]
            .iter()
            .any(|&(dx, dy)| !mask.get_signed(x + dx, y + dy))
}

pub fn boundary_mask(mask: &Mask2D) -> Mask2D {
    Mask2D::from_fn(mask.width, mask.height, |x, y| is_boundary_pixel(mask, x, y))
}

/// An ordered chain of pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub points: Vec<(usize, usize)>,
    pub closed: bool,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Moore neighbourhood in clockwise order on screen (y down), starting east.
const MOORE: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];
const WEST: usize = 4;

fn moore_index(dx: i64, dy: i64) -> usize {
    MOORE
        .iter()
        .position(|&d| d == (dx, dy))
        .expect("not a Moore offset")
}

/// Clockwise Moore-neighbour trace of the outer boundary of component `id`,
/// starting at its first pixel in raster order and stopped with Jacob's
/// criterion (start pixel re-entered in the initial direction).
///
/// Pixels can repeat where the component is one pixel thick; holes are not
/// traced.
pub fn trace_boundary(components: &Components, id: u32) -> Result<Contour> {
    if components.size(id) == 0 {
        return Err(Error::EmptyComponent(id));
    }
    let start_index = components
        .labels
        .iter()
        .position(|&l| l == id)
        .ok_or(Error::EmptyComponent(id))?;
    let w = components.width;
    let start = ((start_index % w) as i64, (start_index / w) as i64);
    let inside = |(x, y): (i64, i64)| components.label_signed(x, y) == id;

    // First set neighbour scanning clockwise after the backtrack direction.
    let next_dir = |p: (i64, i64), backtrack: usize| {
        (1..=8)
            .map(|i| (backtrack + i) % 8)
            .find(|&d| inside((p.0 + MOORE[d].0, p.1 + MOORE[d].1)))
    };

    let mut points = vec![(start.0 as usize, start.1 as usize)];
    let Some(first_dir) = next_dir(start, WEST) else {
        return Ok(Contour {
            points,
            closed: true,
        });
    };

    let mut current = start;
    let mut dir = first_dir;
    loop {
        let next = (current.0 + MOORE[dir].0, current.1 + MOORE[dir].1);
        let back = MOORE[(dir + 7) % 8];
        let backtrack = moore_index(current.0 + back.0 - next.0, current.1 + back.1 - next.1);
        current = next;
        dir = next_dir(current, backtrack).expect("traced pixel has a set neighbour");
        if current == start && dir == first_dir {
            break;
        }
        points.push((current.0 as usize, current.1 as usize));
    }
    Ok(Contour {
        points,
        closed: true,
    })
}

fn push_pixel(chain: &mut Vec<(i64, i64)>, p: (i64, i64)) {
    if chain.last() != Some(&p) {
        chain.push(p);
    }
}

/// The unclipped pixel chain of a polyline. Consecutive pixels are
/// 8-neighbours and every pixel centre lies within `sqrt(0.5)` of the
/// continuous polyline.
pub fn rasterize_chain(points: &[Point2]) -> Vec<(i64, i64)> {
    let mut chain = Vec::new();
    let Some(&first) = points.first() else {
        return chain;
    };
    if points.len() == 1 {
        chain.push(first.to_pixel());
        return chain;
    }
    for seg in points.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let segment = segment_pixels(a, b);
        if let (Some(&last), Some(&head)) = (chain.last(), segment.first()) {
            if (last.0 - head.0).abs() > 1 || (last.1 - head.1).abs() > 1 {
                // both ends sit within one pixel of the shared vertex
                push_pixel(&mut chain, a.to_pixel());
            }
        }
        for p in segment {
            push_pixel(&mut chain, p);
        }
    }
    chain
}

/// DDA along the major axis, reading the minor coordinate off the exact
/// segment (clamped to its ends).
fn segment_pixels(a: Point2, b: Point2) -> Vec<(i64, i64)> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let x_major = dx.abs() >= dy.abs();
    let (a_maj, a_min, d_maj, d_min) = if x_major {
        (a.x, a.y, dx, dy)
    } else {
        (a.y, a.x, dy, dx)
    };
    let start = round_coord(a_maj);
    let end = round_coord(a_maj + d_maj);
    let step = if end >= start { 1 } else { -1 };
    let steps = (end - start).abs();
    (0..=steps)
        .map(|k| {
            let i = start + step * k;
            let t = if d_maj == 0.0 {
                0.0
            } else {
                ((i as f64 - a_maj) / d_maj).clamp(0.0, 1.0)
            };
            let j = round_coord(a_min + t * d_min);
            if x_major {
                (i, j)
            } else {
                (j, i)
            }
        })
        .collect()
}

/// Rasterizes a polyline into a `width x height` mask; pixels falling
/// outside the grid are dropped.
pub fn rasterize_polyline(points: &[Point2], width: usize, height: usize) -> Mask2D {
    let mut mask = Mask2D::new(width, height);
    for (x, y) in rasterize_chain(points) {
        if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
            mask.set(x as usize, y as usize, true);
        }
    }
    mask
}
