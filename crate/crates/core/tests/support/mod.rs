//! Brute-force reference implementations shared by the integration tests and
//! the acceptance target. Each one is written for clarity, not speed, and
//! avoids the library's own algorithms.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use scribble_core::geometry::{Connectivity, Mask2D, Point2};
use scribble_core::LabelVolume;

/// Random mask made of a few rectangles and disks plus salt noise.
pub fn random_mask(rng: &mut impl Rng, max_side: usize) -> Mask2D {
    let w = rng.random_range(1..=max_side);
    let h = rng.random_range(1..=max_side);
    let mut m = Mask2D::new(w, h);
    for _ in 0..rng.random_range(1..5) {
        let cx = rng.random_range(0.0..w as f64);
        let cy = rng.random_range(0.0..h as f64);
        let r = rng.random_range(0.5..(w.max(h) as f64 / 2.0).max(1.0));
        let disk = rng.random_bool(0.5);
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let hit = if disk {
                    dx * dx + dy * dy <= r * r
                } else {
                    dx.abs() <= r && dy.abs() <= r * 0.6
                };
                if hit {
                    m.set(x, y, true);
                }
            }
        }
    }
    let noise = rng.random_range(0.0..0.15);
    for y in 0..h {
        for x in 0..w {
            if rng.random_bool(noise) {
                let v = m.get(x, y);
                m.set(x, y, !v);
            }
        }
    }
    m
}

/// Erosion by a closed disk: a pixel survives when every pixel (in or out of
/// the grid) within `radius` of it is set. Outside the grid counts as unset.
pub fn erode_oracle(mask: &Mask2D, radius: f64) -> Mask2D {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let r2 = radius * radius;
    let reach = radius.ceil() as i64 + 1;
    Mask2D::from_fn(mask.width(), mask.height(), |x, y| {
        if !mask.get(x, y) {
            return false;
        }
        let (x, y) = (x as i64, y as i64);
        for qy in y - reach..=y + reach {
            for qx in x - reach..=x + reach {
                let d2 = ((qx - x).pow(2) + (qy - y).pow(2)) as f64;
                let set = qx >= 0 && qy >= 0 && qx < w && qy < h && mask.get(qx as usize, qy as usize);
                if d2 <= r2 && !set {
                    return false;
                }
            }
        }
        true
    })
}

fn offsets(conn: Connectivity) -> Vec<(i64, i64)> {
    let mut v = vec![(1, 0), (-1, 0), (0, 1), (0, -1)];
    if conn == Connectivity::Eight {
        v.extend([(1, 1), (1, -1), (-1, 1), (-1, -1)]);
    }
    v
}

fn fill(mask: &Mask2D, labels: &mut [u32], x: i64, y: i64, id: u32, conn: Connectivity) {
    let w = mask.width() as i64;
    if x < 0 || y < 0 || x >= w || y >= mask.height() as i64 {
        return;
    }
    let i = (x + w * y) as usize;
    if !mask.get(x as usize, y as usize) || labels[i] != 0 {
        return;
    }
    labels[i] = id;
    for (dx, dy) in offsets(conn) {
        fill(mask, labels, x + dx, y + dy, id, conn);
    }
}

/// Recursive flood fill; ids count up from 1 in order of each component's
/// first pixel in raster order.
pub fn components_oracle(mask: &Mask2D, conn: Connectivity) -> Vec<u32> {
    let mut labels = vec![0; mask.width() * mask.height()];
    let mut next = 0;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) && labels[x + mask.width() * y] == 0 {
                next += 1;
                fill(mask, &mut labels, x as i64, y as i64, next, conn);
            }
        }
    }
    labels
}

/// Pixels of `component` that touch, through an edge, the unset region
/// connected to the area outside the grid. That region is grown with
/// 4-connectivity, the dual of the 8-connected component.
pub fn outer_boundary_oracle(component: &Mask2D) -> BTreeSet<(usize, usize)> {
    let (w, h) = (component.width() as i64 + 2, component.height() as i64 + 2);
    let set = |x: i64, y: i64| {
        x >= 1 && y >= 1 && x < w - 1 && y < h - 1 && component.get((x - 1) as usize, (y - 1) as usize)
    };
    let mut outside = vec![false; (w * h) as usize];
    let mut stack = vec![(0i64, 0i64)];
    outside[0] = true;
    while let Some((x, y)) = stack.pop() {
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                continue;
            }
            let i = (nx + w * ny) as usize;
            if !outside[i] && !set(nx, ny) {
                outside[i] = true;
                stack.push((nx, ny));
            }
        }
    }
    let mut out = BTreeSet::new();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            if set(x, y)
                && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|&(dx, dy)| outside[(x + dx + w * (y + dy)) as usize])
            {
                out.insert(((x - 1) as usize, (y - 1) as usize));
            }
        }
    }
    out
}

fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// Pixels of one segment, found by scanning every pixel of a padded bounding
/// box. Along the dominant axis a pixel column is hit when it lies between
/// the rounded ends; across it, when the segment's height at that column
/// (taken at the nearest end if the column overhangs) falls in the pixel's
/// half-open span `[j - 0.5, j + 0.5)`.
fn segment_oracle(a: Point2, b: Point2) -> (BTreeSet<(i64, i64)>, (i64, i64), (i64, i64)) {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let x_major = dx.abs() >= dy.abs();
    let lo_x = a.x.min(b.x).floor() as i64 - 2;
    let hi_x = a.x.max(b.x).ceil() as i64 + 2;
    let lo_y = a.y.min(b.y).floor() as i64 - 2;
    let hi_y = a.y.max(b.y).ceil() as i64 + 2;
    let mut pixels = BTreeSet::new();
    let at = |i: i64| -> Option<f64> {
        let (a_maj, b_maj, a_min, b_min) = if x_major { (a.x, b.x, a.y, b.y) } else { (a.y, b.y, a.x, b.x) };
        let (r0, r1) = (round_half_up(a_maj), round_half_up(b_maj));
        if i < r0.min(r1) || i > r0.max(r1) {
            return None;
        }
        if a_maj == b_maj {
            return Some(a_min);
        }
        let t = ((i as f64 - a_maj) / (b_maj - a_maj)).clamp(0.0, 1.0);
        Some(a_min + t * (b_min - a_min))
    };
    for y in lo_y..=hi_y {
        for x in lo_x..=hi_x {
            let (i, j) = if x_major { (x, y) } else { (y, x) };
            if let Some(v) = at(i) {
                if (j as f64 - 0.5) <= v && v < j as f64 + 0.5 {
                    pixels.insert((x, y));
                }
            }
        }
    }
    let end = |p: Point2| {
        let i = if x_major { round_half_up(p.x) } else { round_half_up(p.y) };
        let v = at(i).expect("end column is covered");
        let j = round_half_up(v);
        if x_major {
            (i, j)
        } else {
            (j, i)
        }
    };
    let first = end(a);
    let last = end(b);
    (pixels, first, last)
}

/// Rasterized polyline: the union of segment pixel sets, plus the rounded
/// shared vertex wherever two consecutive segments fail to touch, clipped to
/// the grid.
pub fn raster_oracle(points: &[Point2], width: usize, height: usize) -> Mask2D {
    let mut all = BTreeSet::new();
    if points.len() == 1 {
        all.insert((round_half_up(points[0].x), round_half_up(points[0].y)));
    }
    let mut prev_last: Option<(i64, i64)> = None;
    for seg in points.windows(2) {
        let (pixels, first, last) = segment_oracle(seg[0], seg[1]);
        if let Some(p) = prev_last {
            if (p.0 - first.0).abs() > 1 || (p.1 - first.1).abs() > 1 {
                all.insert((round_half_up(seg[0].x), round_half_up(seg[0].y)));
            }
        }
        all.extend(pixels);
        prev_last = Some(last);
    }
    Mask2D::from_fn(width, height, |x, y| all.contains(&(x as i64, y as i64)))
}

/// Distance from `p` to the segment `a`-`b`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    Point2::new(a.x + t * dx, a.y + t * dy).dist(p)
}

/// Convex hull by Andrew's monotone chain, counter-clockwise in a y-up frame.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Point2, a: Point2, b: Point2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Point2> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// `p` inside or on the hull, allowing `tol` of slack.
pub fn in_hull(hull: &[Point2], p: Point2, tol: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0].dist(p) <= tol,
        2 => point_segment_distance(p, hull[0], hull[1]) <= tol,
        n => (0..n).all(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            let edge = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
            let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
            cross / edge >= -tol
        }),
    }
}

/// Dense cross-entropy over a `[voxel][class]` table, straight from the
/// definition.
pub fn dense_cross_entropy(logits: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (z, &t) in logits.iter().zip(labels) {
        let denom: f64 = z.iter().map(|v| v.exp()).sum();
        total -= (z[t].exp() / denom).ln();
    }
    total / labels.len() as f64
}

/// One minus the mean soft Dice over the classes that occur in `labels`.
pub fn dense_soft_dice(logits: &[Vec<f64>], labels: &[usize], smooth: f64) -> f64 {
    let classes = logits[0].len();
    let probs: Vec<Vec<f64>> = logits
        .iter()
        .map(|z| {
            let denom: f64 = z.iter().map(|v| v.exp()).sum();
            z.iter().map(|v| v.exp() / denom).collect()
        })
        .collect();
    let mut dice = Vec::new();
    for c in 0..classes {
        let t: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { 0.0 }).collect();
        let t_sum: f64 = t.iter().sum();
        if t_sum == 0.0 {
            continue;
        }
        let inter: f64 = probs.iter().zip(&t).map(|(p, t)| p[c] * t).sum();
        let p_sum: f64 = probs.iter().map(|p| p[c]).sum();
        dice.push((2.0 * inter + smooth) / (p_sum + t_sum + smooth));
    }
    1.0 - dice.iter().sum::<f64>() / dice.len() as f64
}

/// Dice per class by walking every voxel coordinate.
pub fn dice_oracle(pred: &LabelVolume, reference: &LabelVolume, class: u32) -> Option<f64> {
    let [nx, ny, nz] = pred.dims();
    let (mut p, mut r, mut both) = (0u64, 0u64, 0u64);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let a = pred.get(x, y, z) == class;
                let b = reference.get(x, y, z) == class;
                p += a as u64;
                r += b as u64;
                both += (a && b) as u64;
            }
        }
    }
    (p + r > 0).then(|| 2.0 * both as f64 / (p + r) as f64)
}
