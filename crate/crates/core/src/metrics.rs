//! Dice scoring, scribble density statistics and table-style aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::scribble::ScribbleVolume;
use crate::{Error, LabelVolume, Result};

/// Written in place of a score that is undefined.
pub const UNDEFINED: &str = "undefined";

#[derive(Debug, Clone, PartialEq)]
pub struct CaseScores {
    pub case_id: String,
    /// `None` where the class is absent from both volumes.
    pub per_class: Vec<(u32, Option<f64>)>,
    /// Mean over defined classes, `None` if there are none.
    pub mean: Option<f64>,
}

impl CaseScores {
    pub fn from_parts(case_id: impl Into<String>, per_class: Vec<(u32, Option<f64>)>) -> Self {
        let mean = mean(per_class.iter().filter_map(|&(_, d)| d));
        Self {
            case_id: case_id.into(),
            per_class,
            mean,
        }
    }

    pub fn dice(&self, class: u32) -> Option<f64> {
        self.per_class
            .iter()
            .find(|&&(c, _)| c == class)
            .and_then(|&(_, d)| d)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Non-background classes of a reference volume.
pub fn foreground_classes(reference: &LabelVolume) -> Vec<u32> {
    reference.class_labels().into_iter().filter(|&c| c != 0).collect()
}

/// `2|P ∩ R| / (|P| + |R|)` per listed class. Only the dims have to agree,
/// predictions often come with slightly different headers.
pub fn dice_per_class(
    case_id: &str,
    pred: &LabelVolume,
    reference: &LabelVolume,
    classes: &[u32],
) -> Result<CaseScores> {
    if pred.dims() != reference.dims() {
        return Err(Error::ShapeMismatch(format!(
            "prediction dims {:?} vs reference {:?}",
            pred.dims(),
            reference.dims()
        )));
    }
    let slot: BTreeMap<u32, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut p_count = vec![0u64; classes.len()];
    let mut r_count = vec![0u64; classes.len()];
    let mut both = vec![0u64; classes.len()];
    for (&p, &r) in pred.data().iter().zip(reference.data()) {
        if let Some(&i) = slot.get(&p) {
            p_count[i] += 1;
        }
        if let Some(&i) = slot.get(&r) {
            r_count[i] += 1;
            if p == r {
                both[i] += 1;
            }
        }
    }
    let per_class = slot
        .iter()
        .map(|(&c, &i)| {
            let denom = p_count[i] + r_count[i];
            (c, (denom > 0).then(|| 2.0 * both[i] as f64 / denom as f64))
        })
        .collect();
    Ok(CaseScores::from_parts(case_id, per_class))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub class: u32,
    pub annotated: u64,
    pub class_voxels: u64,
    /// `annotated / class_voxels`, 0 for an empty class.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScribbleStats {
    pub per_class: Vec<ClassStats>,
    pub total_annotated: u64,
}

impl ScribbleStats {
    pub fn class(&self, class: u32) -> Option<&ClassStats> {
        self.per_class.iter().find(|s| s.class == class)
    }
}

/// Annotated voxel counts per dense class. A scribble voxel is credited to
/// the class it carries.
pub fn scribble_stats(scribbles: &ScribbleVolume, dense: &LabelVolume) -> Result<ScribbleStats> {
    let s = scribbles.volume();
    s.check_same_grid(dense)?;
    let ignore = scribbles.ignore_label();
    let mut counts: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    for &d in dense.data() {
        if d != dense.ignore_label() {
            counts.entry(d).or_default().1 += 1;
        }
    }
    let mut total = 0;
    for &l in s.data() {
        if l != ignore {
            counts.entry(l).or_default().0 += 1;
            total += 1;
        }
    }
    let per_class = counts
        .into_iter()
        .map(|(class, (annotated, class_voxels))| ClassStats {
            class,
            annotated,
            class_voxels,
            fraction: if class_voxels > 0 {
                annotated as f64 / class_voxels as f64
            } else {
                0.0
            },
        })
        .collect();
    Ok(ScribbleStats {
        per_class,
        total_annotated: total,
    })
}

/// `(b - a) / a`, `None` when `a` is zero.
pub fn relative_change(a: u64, b: u64) -> Option<f64> {
    (a > 0).then(|| (b as f64 - a as f64) / a as f64)
}

/// Signed whole-percent change from `a` to `b`, e.g. `+71%`.
pub fn format_relative_change(a: u64, b: u64) -> String {
    match relative_change(a, b) {
        Some(r) => {
            let pct = (r * 100.0).round();
            if pct >= 0.0 {
                format!("+{pct:.0}%")
            } else {
                format!("{pct:.0}%")
            }
        }
        None => UNDEFINED.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub name: String,
    /// Cases that contributed a defined mean.
    pub cases: usize,
    /// Cases whose every class was undefined.
    pub undefined_cases: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub datasets: Vec<DatasetSummary>,
    /// Unweighted mean of the dataset means.
    pub grand_mean: f64,
}

/// Groups cases by `groups[i]` (datasets in first-appearance order), averages
/// case means per dataset and then the dataset means.
pub fn aggregate(per_case: &[CaseScores], groups: &[String]) -> Result<Aggregate> {
    if per_case.is_empty() {
        return Err(Error::EmptyInput("no cases to aggregate".into()));
    }
    if per_case.len() != groups.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} cases but {} group labels",
            per_case.len(),
            groups.len()
        )));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut buckets: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for (case, group) in per_case.iter().zip(groups) {
        let entry = buckets.entry(group.as_str()).or_insert_with(|| {
            order.push(group.as_str());
            (Vec::new(), 0)
        });
        match case.mean {
            Some(m) => entry.0.push(m),
            None => entry.1 += 1,
        }
    }
    let mut datasets = Vec::with_capacity(order.len());
    for name in order {
        let (means, undefined_cases) = &buckets[name];
        let mean = mean(means.iter().copied())
            .ok_or_else(|| Error::EmptyInput(format!("dataset {name} has no scored case")))?;
        datasets.push(DatasetSummary {
            name: name.to_string(),
            cases: means.len(),
            undefined_cases: *undefined_cases,
            mean,
        });
    }
    let grand_mean = mean(datasets.iter().map(|d| d.mean)).expect("at least one dataset");
    Ok(Aggregate {
        datasets,
        grand_mean,
    })
}

/// Markdown table with one column per dataset and the mean last. Values are
/// rounded to three decimals here and nowhere else.
pub fn markdown_table(rows: &[(&str, &Aggregate)]) -> String {
    let Some((_, first)) = rows.first() else {
        return String::new();
    };
    let names: Vec<&str> = first.datasets.iter().map(|d| d.name.as_str()).collect();
    let mut out = String::from("| Method |");
    for n in &names {
        let _ = write!(out, " {n} |");
    }
    out.push_str(" Mean |\n|---|");
    for _ in &names {
        out.push_str("---|");
    }
    out.push_str("---|\n");
    for (method, agg) in rows {
        let _ = write!(out, "| {method} |");
        for n in &names {
            match agg.datasets.iter().find(|d| d.name == *n) {
                Some(d) => {
                    let _ = write!(out, " {:.3} |", d.mean);
                }
                None => out.push_str(" - |"),
            }
        }
        let _ = writeln!(out, " {:.3} |", agg.grand_mean);
    }
    out
}
