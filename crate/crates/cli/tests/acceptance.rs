//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! The process exits 0 after printing the report so the rest of the test
//! suite keeps running; set `ACCEPTANCE_STRICT=1` to exit 1 on any FAIL.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scribble_cli::phantom::{PhantomSpec, Radii, Shape, ShapeKind};
use scribble_core::geometry::{
    connected_components, erode, rasterize_polyline, trace_boundary, Connectivity, Mask2D, Point2,
};
use scribble_core::losses::{
    finite_diff_check, partial_cross_entropy, partial_dice, LogitField, LossWeights, PartialLoss, SparseTarget,
    DEFAULT_SMOOTH,
};
use scribble_core::metrics::{aggregate, dice_per_class, CaseScores};
use scribble_core::nifti::encode;
use scribble_core::nurbs::{basis, NurbsCurve};
use scribble_core::scribble::{
    border_scribble, generate_volume_with_id, interior_scribble, volume_id, ScribbleConfig, ScribbleKind,
    StreamFamily,
};
use scribble_core::{read_nifti, write_nifti, LabelVolume};
use support::*;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Report {
    failed: Vec<usize>,
}

impl Report {
    fn run(&mut self, id: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Check) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match (result, limit) {
            (Ok(_), Some(l)) if elapsed > l => Err(format!("took {elapsed:.2?}, limit {l:?}")),
            (r, _) => r,
        };
        let (verdict, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{verdict} [{id:>2}] {name} ({:.2} s): {detail}", elapsed.as_secs_f64());
        if result.is_err() {
            self.failed.push(id);
        }
    }
}

// 1

fn table_means() -> Check {
    let rows: [(&[f64], &str); 3] = [
        (&[0.895, 0.886, 0.814, 0.753, 0.680, 0.840, 0.823], "0.813"),
        (&[0.887, 0.862, 0.843, 0.660, 0.687, 0.592, 0.347], "0.697"),
        (&[0.924, 0.906, 0.861, 0.770, 0.827, 0.860, 0.846], "0.856"),
    ];
    let mut got = Vec::new();
    for (values, expect) in rows {
        let cases: Vec<CaseScores> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| CaseScores::from_parts(format!("case{i}"), vec![(1, Some(v))]))
            .collect();
        let groups: Vec<String> = (0..values.len()).map(|i| format!("set{i}")).collect();
        let agg = aggregate(&cases, &groups).map_err(|e| e.to_string())?;
        let mean = format!("{:.3}", agg.grand_mean);
        let by_hand = format!("{:.3}", values.iter().sum::<f64>() / values.len() as f64);
        ensure(mean == expect && by_hand == expect, || format!("got {mean}, hand {by_hand}, want {expect}"))?;
        got.push(mean);
    }
    Ok(got.join(", "))
}

// 2-4

const IGNORE: u32 = 255;

fn problem(rng: &mut impl Rng, classes: usize, voxels: usize, labeled: f64, scale: f64) -> (LogitField, SparseTarget) {
    let values = (0..classes * voxels).map(|_| rng.random_range(-scale..scale)).collect();
    let labels = (0..voxels)
        .map(|_| {
            if rng.random_bool(labeled) {
                rng.random_range(0..classes as u32)
            } else {
                IGNORE
            }
        })
        .collect();
    (LogitField::new(classes, voxels, values).unwrap(), SparseTarget::new(labels, IGNORE))
}

fn losses() -> [PartialLoss; 3] {
    [
        PartialLoss::CrossEntropy,
        PartialLoss::Dice { smooth: DEFAULT_SMOOTH },
        PartialLoss::Combined {
            weights: LossWeights::default(),
            smooth: DEFAULT_SMOOTH,
        },
    ]
}

fn loss_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut worst_ce, mut worst_dice) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let classes = rng.random_range(2..=5);
        let voxels = rng.random_range(1..=500);
        let (logits, target) = problem(&mut rng, classes, voxels, 1.0, 4.0);
        let table: Vec<Vec<f64>> = (0..voxels).map(|j| (0..classes).map(|c| logits.get(c, j)).collect()).collect();
        let labels: Vec<usize> = target.labels().iter().map(|&l| l as usize).collect();
        let ce = partial_cross_entropy(&logits, &target).map_err(|e| e.to_string())?.value;
        let dice = partial_dice(&logits, &target, DEFAULT_SMOOTH).map_err(|e| e.to_string())?.value;
        worst_ce = worst_ce.max((ce - dense_cross_entropy(&table, &labels)).abs());
        worst_dice = worst_dice.max((dice - dense_soft_dice(&table, &labels, DEFAULT_SMOOTH)).abs());
    }
    let detail = format!("max |diff| pCE {worst_ce:.1e}, pDice {worst_dice:.1e}");
    ensure(worst_ce < 1e-12 && worst_dice < 1e-12, || detail.clone())?;
    Ok(detail)
}

fn gradients() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = [0.0f64; 3];
    for _ in 0..20 {
        let classes = rng.random_range(2..=5);
        let voxels = rng.random_range(10..=500);
        let frac = rng.random_range(0.1..1.0);
        let (logits, target) = problem(&mut rng, classes, voxels, frac, 1.0);
        for (w, loss) in worst.iter_mut().zip(losses()) {
            *w = w.max(finite_diff_check(loss, &logits, &target, 1e-5, &mut rng).map_err(|e| e.to_string())?);
        }
    }
    let detail = format!("max rel error pCE {:.1e}, pDice {:.1e}, pL {:.1e}", worst[0], worst[1], worst[2]);
    ensure(worst[0] < 1e-6 && worst[1] < 1e-5 && worst[2] < 1e-5, || detail.clone())?;
    Ok(detail)
}

fn ignore_invariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for trial in 0..100 {
        let classes = rng.random_range(2..=5);
        let voxels = rng.random_range(1..=300);
        let (logits, target) = problem(&mut rng, classes, voxels, 0.5, 4.0);
        let mut moved = logits.clone();
        for j in (0..voxels).filter(|&j| target.labels()[j] == IGNORE) {
            for c in 0..classes {
                moved.values_mut()[c * voxels + j] += rng.random_range(-20.0..20.0);
            }
        }
        for loss in losses() {
            let a = loss.evaluate(&logits, &target).map_err(|e| e.to_string())?;
            let b = loss.evaluate(&moved, &target).map_err(|e| e.to_string())?;
            let same_value = a.value.to_bits() == b.value.to_bits();
            let same_grad = a.gradient.iter().zip(&b.gradient).all(|(x, y)| x.to_bits() == y.to_bits());
            ensure(same_value && same_grad, || format!("trial {trial}, {} changed", loss.name()))?;
        }
    }
    Ok("100 trials, value and gradient bit-identical".into())
}

// 5-7

fn random_phantom(rng: &mut impl Rng) -> LabelVolume {
    let dims = [rng.random_range(24..=64), rng.random_range(24..=64), rng.random_range(16..=64)];
    let c = dims.map(|d| (d as f64 - 1.0) / 2.0);
    let outer = dims.map(|d| d as f64 * rng.random_range(0.3..0.45));
    let inner_kind = if rng.random_bool(0.5) { ShapeKind::Ellipsoid } else { ShapeKind::Box };
    let inner = outer.map(|r| r * rng.random_range(0.3..0.6));
    let spec = PhantomSpec {
        name: "p".into(),
        dims,
        spacing: [1.0; 3],
        jitter: 0.15,
        classes: Vec::new(),
        shapes: vec![
            Shape {
                kind: ShapeKind::Ellipsoid,
                class: 1,
                center: c,
                radii: Radii::PerAxis(outer),
            },
            Shape {
                kind: inner_kind,
                class: 2,
                center: c,
                radii: Radii::PerAxis(inner),
            },
        ],
    };
    spec.render(rng).expect("both classes are non-empty")
}

fn phantoms() -> Vec<LabelVolume> {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    (0..10).map(|_| random_phantom(&mut rng)).collect()
}

fn correctness_by_construction(vols: &[LabelVolume]) -> Check {
    let cfg = ScribbleConfig::default();
    let mut annotated = 0;
    for (i, dense) in vols.iter().enumerate() {
        let s = generate_volume_with_id(dense, &cfg, volume_id(&format!("p{i}")));
        let ignore = s.ignore_label();
        let bad = s
            .volume()
            .data()
            .iter()
            .zip(dense.data())
            .filter(|(l, d)| **l != ignore && l != d)
            .count();
        ensure(bad == 0, || format!("phantom {i}: {bad} violations"))?;
        annotated += s.annotated_count();
    }
    Ok(format!("10 phantoms, {annotated} scribbled voxels, 0 violations"))
}

/// Pixels of `mask` with a 4-neighbour outside it (the grid exterior counts
/// as outside).
fn boundary_pixels(mask: &Mask2D) -> Vec<(f64, f64)> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let set = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && mask.get(x as usize, y as usize);
    mask.pixels()
        .filter(|&(x, y)| {
            let (x, y) = (x as i64, y as i64);
            !(set(x - 1, y) && set(x + 1, y) && set(x, y - 1) && set(x, y + 1))
        })
        .map(|(x, y)| (x as f64, y as f64))
        .collect()
}

fn dual_representation(vols: &[LabelVolume]) -> Check {
    let cfg = ScribbleConfig::default();
    let limit = cfg.offset_scale + 1.5;
    let (mut pairs, mut both, mut border_px, mut far, mut worst) = (0usize, 0usize, 0usize, 0usize, 0.0f64);
    for (i, dense) in vols.iter().enumerate() {
        let streams = StreamFamily::new(cfg.master_seed, volume_id(&format!("p{i}")));
        let axis = cfg.slice_axis;
        for k in 0..dense.dims()[axis] {
            let slice = dense.slice(axis, k).unwrap();
            let [w, h] = slice.extents;
            for class in 0..=2u32 {
                let mask = Mask2D::from_fn(w, h, |x, y| slice.get(x, y) == class);
                let largest = components_oracle(&mask, Connectivity::Eight)
                    .iter()
                    .filter(|&&l| l > 0)
                    .fold(std::collections::BTreeMap::new(), |mut m, &l| {
                        *m.entry(l).or_insert(0usize) += 1;
                        m
                    })
                    .into_values()
                    .max()
                    .unwrap_or(0);
                if largest < cfg.min_component_pixels {
                    continue;
                }
                pairs += 1;
                let mut rng = streams.stream(axis, k, class, ScribbleKind::Interior);
                let interior = interior_scribble(&mask, &cfg, &mut rng);
                let mut rng = streams.stream(axis, k, class, ScribbleKind::Border);
                let border = border_scribble(&mask, &cfg, &mut rng);
                if !interior.is_empty() && !border.is_empty() {
                    both += 1;
                }
                let boundary = boundary_pixels(&mask);
                for (x, y) in border.pixels() {
                    let d = boundary
                        .iter()
                        .map(|&(bx, by)| (bx - x as f64).hypot(by - y as f64))
                        .fold(f64::INFINITY, f64::min);
                    border_px += 1;
                    worst = worst.max(d);
                    if d > limit {
                        far += 1;
                    }
                }
            }
        }
    }
    let share = both as f64 / pairs as f64;
    let detail = format!(
        "{both}/{pairs} pairs with both scribbles ({:.2}%), {far}/{border_px} border pixels beyond {limit} px (max {worst:.2})",
        100.0 * share
    );
    ensure(pairs > 0 && share >= 0.99 && far == 0, || detail.clone())?;
    Ok(detail)
}

/// Phantoms whose two classes have an in-plane cross-section of at least
/// 100 px on every slice: z-extruded boxes and elongated ellipsoids
/// with cross-section areas drawn from 100 to 1600 px.
fn sparsity_phantom(rng: &mut impl Rng) -> LabelVolume {
    let dims = [64, 64, 24];
    let shape = |class: u32, area: f64, rng: &mut ChaCha8Rng| {
        let aspect: f64 = rng.random_range(0.7..1.4);
        if rng.random_bool(0.5) {
            let hx = (area * aspect).sqrt() / 2.0;
            let hy = (area / aspect).sqrt() / 2.0;
            (class, ShapeKind::Box, [hx, hy, 100.0])
        } else {
            let rx = (area * aspect / std::f64::consts::PI).sqrt();
            let ry = (area / aspect / std::f64::consts::PI).sqrt();
            (class, ShapeKind::Ellipsoid, [rx, ry, 1000.0])
        }
    };
    let mut r = ChaCha8Rng::seed_from_u64(rng.random());
    let inner_area = r.random_range(110.0..1200.0);
    let outer_area = inner_area + r.random_range(150.0..1600.0);
    let shapes = [shape(1, outer_area, &mut r), shape(2, inner_area, &mut r)]
        .into_iter()
        .map(|(class, kind, radii)| Shape {
            kind,
            class,
            center: [31.5, 31.5, 11.5],
            radii: Radii::PerAxis(radii),
        })
        .collect();
    let spec = PhantomSpec {
        name: "s".into(),
        dims,
        spacing: [1.0; 3],
        jitter: 0.0,
        classes: Vec::new(),
        shapes,
    };
    spec.render(rng).unwrap()
}

fn sparsity() -> Check {
    let cfg = ScribbleConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut rows = Vec::new();
    let mut n = 0;
    while rows.len() < 60 {
        let dense = sparsity_phantom(&mut rng);
        n += 1;
        let axis = cfg.slice_axis;
        let min_area = (0..dense.dims()[axis])
            .flat_map(|k| {
                let s = dense.slice(axis, k).unwrap();
                (0..=2u32).map(move |c| s.data.iter().filter(|&&l| l == c).count())
            })
            .min()
            .unwrap();
        if min_area < 100 {
            continue;
        }
        let s = generate_volume_with_id(&dense, &cfg, volume_id(&format!("s{n}")));
        let ignore = s.ignore_label();
        for class in 0..=2u32 {
            let voxels = dense.data().iter().filter(|&&l| l == class).count();
            let scribbled = s.volume().data().iter().filter(|&&l| l == class && l != ignore).count();
            let area = voxels as f64 / dense.dims()[axis] as f64;
            rows.push((area, scribbled as f64 / voxels as f64));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let over: Vec<&(f64, f64)> = rows.iter().filter(|r| r.1 >= 0.10).collect();
    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let detail = if over.is_empty() {
        format!("{} (phantom, class) fractions, max {:.1}%", rows.len(), 100.0 * worst)
    } else {
        let largest_failing = over.iter().map(|r| r.0).fold(0.0, f64::max);
        let list: Vec<String> = over.iter().map(|r| format!("{:.0} px: {:.1}%", r.0, 100.0 * r.1)).collect();
        format!(
            "{}/{} (phantom, class) fractions >= 10%, all at mean cross-section <= {largest_failing:.0} px [{}]",
            over.len(),
            rows.len(),
            list.join(", ")
        )
    };
    ensure(over.is_empty(), || detail.clone())?;
    Ok(detail)
}

// 8

const PIPELINE_SPEC: &str = r#"
name = "det"
dims = [48, 44, 24]
jitter = 0.2
classes = ["background", "body", "core"]

[[shapes]]
kind = "ellipsoid"
class = 1
center = [24.0, 22.0, 12.0]
radii = [18.0, 15.0, 10.0]

[[shapes]]
kind = "sphere"
class = 2
center = [24.0, 22.0, 12.0]
radii = 7.0
"#;

fn snapshot(dir: &Path, prefix: &str, out: &mut Vec<(String, Vec<u8>)>) {
    let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        let name = format!("{prefix}/{}", p.file_name().unwrap().to_string_lossy());
        if p.is_dir() {
            snapshot(&p, &name, out);
        } else {
            out.push((name, fs::read(&p).unwrap()));
        }
    }
}

fn pipeline(root: &Path, workers: usize) -> Result<Vec<(String, Vec<u8>)>, String> {
    fs::create_dir_all(root).map_err(|e| e.to_string())?;
    let spec = root.join("spec.toml");
    fs::write(&spec, PIPELINE_SPEC).map_err(|e| e.to_string())?;
    let w = workers.to_string();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let dense = root.join("dense");
    let scribbles = root.join("scribbles");
    let eval = root.join("eval");
    let manifest = dense.join("manifest.toml");
    let steps: [Vec<String>; 3] = [
        ["phantom", "--spec", &s(&spec), "--out", &s(&dense), "--cases", "6", "--seed", "11", "--workers", &w]
            .map(String::from)
            .to_vec(),
        ["generate", "--manifest", &s(&manifest), "--out", &s(&scribbles), "--workers", &w]
            .map(String::from)
            .to_vec(),
        ["evaluate", "--manifest", &s(&manifest), "--pred", &s(&scribbles), "--out", &s(&eval), "--workers", &w]
            .map(String::from)
            .to_vec(),
    ];
    for args in steps {
        let o = Command::new(env!("CARGO_BIN_EXE_scribble")).args(&args).output().map_err(|e| e.to_string())?;
        ensure(o.status.success(), || {
            format!("{} exited {:?}: {}", args[0], o.status.code(), String::from_utf8_lossy(&o.stderr))
        })?;
    }
    let mut files = Vec::new();
    snapshot(&dense, "dense", &mut files);
    snapshot(&scribbles, "scribbles", &mut files);
    snapshot(&eval, "eval", &mut files);
    Ok(files)
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reference: Option<Vec<(String, Vec<u8>)>> = None;
    let mut runs = 0;
    for workers in [1, 4] {
        for run in 0..3 {
            let files = pipeline(&tmp.path().join(format!("w{workers}_r{run}")), workers)?;
            runs += 1;
            match &reference {
                None => reference = Some(files),
                Some(r) => {
                    let names = |f: &[(String, Vec<u8>)]| f.iter().map(|x| x.0.clone()).collect::<Vec<_>>();
                    ensure(names(r) == names(&files), || format!("workers {workers} run {run}: file sets differ"))?;
                    if let Some((a, _)) = r.iter().zip(&files).find(|(a, b)| a.1 != b.1) {
                        return Err(format!("workers {workers} run {run}: {} differs", a.0));
                    }
                }
            }
        }
    }
    let n = reference.map_or(0, |r| r.len());
    Ok(format!("{runs} runs, {n} files each, byte-identical"))
}

// 9

fn random_curve(rng: &mut impl Rng) -> NurbsCurve {
    let n = rng.random_range(2..12);
    let degree = rng.random_range(1..n.min(6));
    let points = (0..n)
        .map(|_| Point2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)))
        .collect();
    let weights = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
    NurbsCurve::make_clamped(points, weights, degree).unwrap()
}

fn nurbs() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut unity = 0.0f64;
    for _ in 0..1000 {
        let c = random_curve(&mut rng);
        let u = if rng.random_bool(0.05) { 1.0 } else { rng.random_range(0.0..1.0) };
        let b = basis(c.knots(), c.degree(), u).map_err(|e| e.to_string())?;
        ensure(b.iter().all(|&v| v >= 0.0), || format!("negative basis at u = {u}"))?;
        unity = unity.max((b.iter().sum::<f64>() - 1.0).abs());
        let r = c.rational_basis(u).map_err(|e| e.to_string())?;
        unity = unity.max((r.iter().sum::<f64>() - 1.0).abs());
    }
    let quarter = NurbsCurve::make_clamped(
        vec![Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)],
        vec![1.0, std::f64::consts::FRAC_1_SQRT_2, 1.0],
        2,
    )
    .map_err(|e| e.to_string())?;
    let samples = quarter.sample(101);
    let circle = samples.iter().map(|p| (p.x.hypot(p.y) - 1.0).abs()).fold(0.0, f64::max);
    let mut outside = 0;
    for _ in 0..200 {
        let c = random_curve(&mut rng);
        let hull = convex_hull(c.control_points());
        outside += c.sample(64).into_iter().filter(|&p| !in_hull(&hull, p, 1e-9)).count();
    }
    let detail = format!("unity error {unity:.1e}, circle error {circle:.1e} at {} samples, {outside} hull escapes", samples.len());
    ensure(unity < 1e-12 && samples.len() == 101 && circle < 1e-9 && outside == 0, || detail.clone())?;
    Ok(detail)
}

// 10

fn geometry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let mut counts = [0usize; 4];
    for m in 0..100 {
        let mask = random_mask(&mut rng, 32);
        for r in [0.0, 1.0, 1.5, 2.0, 3.0] {
            ensure(erode(&mask, r) == erode_oracle(&mask, r), || format!("mask {m}: erosion r = {r}"))?;
            counts[0] += 1;
        }
        for conn in [Connectivity::Four, Connectivity::Eight] {
            let c = connected_components(&mask, conn);
            ensure(c.labels() == &components_oracle(&mask, conn)[..], || format!("mask {m}: components {conn:?}"))?;
            counts[1] += 1;
        }
        let comps = connected_components(&mask, Connectivity::Eight);
        for id in 1..=comps.count() as u32 {
            let contour = trace_boundary(&comps, id).map_err(|e| e.to_string())?;
            let visited: BTreeSet<_> = contour.points.iter().copied().collect();
            ensure(visited == outer_boundary_oracle(&comps.mask(id)), || format!("mask {m}: contour {id}"))?;
            counts[2] += 1;
        }
        let (w, h) = (mask.width(), mask.height());
        let pts: Vec<Point2> = (0..rng.random_range(1..7))
            .map(|_| Point2::new(rng.random_range(-3.0..w as f64 + 3.0), rng.random_range(-3.0..h as f64 + 3.0)))
            .collect();
        ensure(rasterize_polyline(&pts, w, h) == raster_oracle(&pts, w, h), || format!("mask {m}: raster"))?;
        counts[3] += 1;
    }
    Ok(format!(
        "100 masks: {} erosions, {} labelings, {} contours, {} polylines exact",
        counts[0], counts[1], counts[2], counts[3]
    ))
}

// 11

fn dice() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let mut compared = 0;
    for pair in 0..50 {
        let classes = rng.random_range(2..=5u32);
        let vol = |rng: &mut ChaCha8Rng| {
            let bias = rng.random_range(0.0..1.0);
            let data = (0..512)
                .map(|_| if rng.random_bool(bias) { 0 } else { rng.random_range(0..classes) })
                .collect();
            LabelVolume::new([8, 8, 8], data).unwrap()
        };
        let (pred, reference) = (vol(&mut rng), vol(&mut rng));
        let list: Vec<u32> = (0..=classes).collect();
        let scores = dice_per_class("c", &pred, &reference, &list).map_err(|e| e.to_string())?;
        for &c in &list {
            let (got, want) = (scores.dice(c), dice_oracle(&pred, &reference, c));
            ensure(got == want, || format!("pair {pair} class {c}: {got:?} vs {want:?}"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} class scores equal the oracle"))
}

// 12

fn nifti() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(112);
    let mut gz = 0;
    for i in 0..20 {
        let dims = [rng.random_range(1..=20), rng.random_range(1..=20), rng.random_range(1..=10)];
        let max = [2u32, 400, 100_000][i % 3];
        let data = (0..dims.iter().product::<usize>()).map(|_| rng.random_range(0..=max)).collect();
        let spacing = [0, 1, 2].map(|_| rng.random_range(0.5f32..3.0));
        let v = LabelVolume::new(dims, data).unwrap().with_spacing(spacing);
        let name = if i % 2 == 0 { format!("v{i}.nii.gz") } else { format!("v{i}.nii") };
        gz += usize::from(i % 2 == 0);
        let path = tmp.path().join(name);
        write_nifti(&v, &path).map_err(|e| e.to_string())?;
        let back = read_nifti(&path).map_err(|e| e.to_string())?;
        ensure(
            back.dims() == v.dims() && back.data() == v.data() && back.header() == v.header(),
            || format!("volume {i} differs after round trip"),
        )?;
        let bytes = encode(&v);
        let sizeof_hdr = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
        ensure(sizeof_hdr == 348, || format!("volume {i}: sizeof_hdr {sizeof_hdr}"))?;
        ensure(&bytes[344..348] == b"n+1\0", || format!("volume {i}: magic {:?}", &bytes[344..348]))?;
        let vox_offset = f32::from_le_bytes(bytes[108..112].try_into().unwrap());
        ensure(vox_offset == 352.0, || format!("volume {i}: vox_offset {vox_offset}"))?;
        for k in 0..3 {
            let d = i16::from_le_bytes(bytes[42 + 2 * k..44 + 2 * k].try_into().unwrap());
            ensure(d as usize == dims[k], || format!("volume {i}: dim[{}] = {d}", k + 1))?;
        }
        if i % 2 == 0 {
            let raw = fs::read(&path).map_err(|e| e.to_string())?;
            ensure(raw.starts_with(&[0x1f, 0x8b]), || format!("volume {i}: .gz file is not gzip"))?;
        }
    }
    Ok(format!("20 volumes ({gz} gzip) identical, header fields checked"))
}

fn main() {
    let mut report = Report { failed: Vec::new() };
    let secs = Duration::from_secs;
    report.run(1, "table-mean reproduction", Some(secs(1)), table_means);
    report.run(2, "loss-oracle equivalence", Some(secs(10)), loss_oracles);
    report.run(3, "gradient correctness", Some(secs(30)), gradients);
    report.run(4, "ignore-invariance", None, ignore_invariance);
    let vols = phantoms();
    report.run(5, "scribble correctness-by-construction", None, || correctness_by_construction(&vols));
    report.run(6, "dual representation", None, || dual_representation(&vols));
    report.run(7, "sparsity", None, sparsity);
    report.run(8, "determinism", Some(secs(120)), determinism);
    report.run(9, "NURBS correctness", None, nurbs);
    report.run(10, "geometry oracles", None, geometry);
    report.run(11, "Dice oracle", None, dice);
    report.run(12, "NIfTI round-trip", None, nifti);

    let passed = 12 - report.failed.len();
    println!("acceptance: {passed}/12 passed");
    if !report.failed.is_empty() {
        let ids: Vec<String> = report.failed.iter().map(usize::to_string).collect();
        println!("failed: {}", ids.join(", "));
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
