//! Non-uniform rational B-spline curves in the plane.
//!
//! Curves are evaluated by summing the Cox-de Boor basis directly. That is
//! plenty for the handful of control points a scribble uses.

use crate::geometry::Point2;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NurbsCurve {
    degree: usize,
    control_points: Vec<Point2>,
    weights: Vec<f64>,
    knots: Vec<f64>,
}

impl NurbsCurve {
    /// Validates and assembles a curve from explicit parts.
    pub fn new(
        degree: usize,
        control_points: Vec<Point2>,
        weights: Vec<f64>,
        knots: Vec<f64>,
    ) -> Result<Self> {
        let n = control_points.len();
        if degree < 1 {
            return Err(Error::InvalidCurve("degree must be at least 1".into()));
        }
        if n < degree + 1 {
            return Err(Error::InvalidCurve(format!(
                "{n} control points cannot carry degree {degree}"
            )));
        }
        if weights.len() != n {
            return Err(Error::InvalidCurve(format!(
                "{} weights for {n} control points",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidCurve(format!("weight {w} is not positive")));
        }
        if knots.len() != n + degree + 1 {
            return Err(Error::InvalidCurve(format!(
                "{} knots, expected {}",
                knots.len(),
                n + degree + 1
            )));
        }
        if knots.windows(2).any(|k| k[1] < k[0]) {
            return Err(Error::InvalidCurve("knots must be non-decreasing".into()));
        }
        let m = knots.len();
        let clamped = knots[..=degree].iter().all(|&k| k == knots[0])
            && knots[m - degree - 1..].iter().all(|&k| k == knots[m - 1]);
        if !clamped || knots[0] == knots[m - 1] {
            return Err(Error::InvalidCurve("knot vector is not clamped".into()));
        }
        Ok(Self {
            degree,
            control_points,
            weights,
            knots,
        })
    }

    /// Clamped curve with uniformly spaced interior knots on `[0, 1]`; it
    /// starts at the first control point and ends at the last.
    pub fn make_clamped(control_points: Vec<Point2>, weights: Vec<f64>, degree: usize) -> Result<Self> {
        let n = control_points.len();
        if degree < 1 || n < degree + 1 {
            return Err(Error::InvalidCurve(format!(
                "{n} control points cannot carry degree {degree}"
            )));
        }
        Self::new(degree, control_points, weights, clamped_uniform_knots(n, degree))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn control_points(&self) -> &[Point2] {
        &self.control_points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Rational basis `w_i N_i(u) / sum_j w_j N_j(u)`.
    pub fn rational_basis(&self, u: f64) -> Result<Vec<f64>> {
        let mut b = basis(&self.knots, self.degree, u)?;
        let denom: f64 = b.iter().zip(&self.weights).map(|(n, w)| n * w).sum();
        for (v, w) in b.iter_mut().zip(&self.weights) {
            *v = *v * w / denom;
        }
        Ok(b)
    }

    pub fn evaluate(&self, u: f64) -> Result<Point2> {
        let b = basis(&self.knots, self.degree, u)?;
        let (mut x, mut y, mut wsum) = (0.0, 0.0, 0.0);
        for ((n, w), p) in b.iter().zip(&self.weights).zip(&self.control_points) {
            let nw = n * w;
            x += nw * p.x;
            y += nw * p.y;
            wsum += nw;
        }
        Ok(Point2::new(x / wsum, y / wsum))
    }

    /// `n >= 2` points at uniform parameters `k / (n - 1)` over the domain.
    pub fn sample(&self, n: usize) -> Vec<Point2> {
        let n = n.max(2);
        let (lo, hi) = self.domain();
        (0..n)
            .map(|k| {
                let u = if k == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * (k as f64 / (n - 1) as f64)
                };
                self.evaluate(u).expect("sample parameter inside domain")
            })
            .collect()
    }
}

/// `degree + 1` zeros, `n - degree - 1` uniform interior knots, `degree + 1` ones.
pub fn clamped_uniform_knots(n: usize, degree: usize) -> Vec<f64> {
    let spans = n - degree;
    let mut knots = vec![0.0; degree + 1];
    knots.extend((1..spans).map(|j| j as f64 / spans as f64));
    knots.extend(std::iter::repeat_n(1.0, degree + 1));
    knots
}

/// Cox-de Boor basis values `N_{i,degree}(u)` for every control index `i`.
/// Spans are half-open except the last non-empty one, which also takes the
/// right end of the domain. `0/0` terms are 0.
pub fn basis(knots: &[f64], degree: usize, u: f64) -> Result<Vec<f64>> {
    let m = knots.len();
    if m < degree + 2 {
        return Err(Error::InvalidCurve(format!(
            "{m} knots cannot carry degree {degree}"
        )));
    }
    let (lo, hi) = (knots[0], knots[m - 1]);
    if !(lo..=hi).contains(&u) {
        return Err(Error::OutsideDomain { u, lo, hi });
    }
    let count = m - degree - 1;

    let last_span = (0..m - 1).rev().find(|&i| knots[i] < knots[i + 1]);
    let mut n: Vec<f64> = (0..m - 1)
        .map(|i| {
            let inside = knots[i] <= u && u < knots[i + 1];
            let at_end = u == hi && Some(i) == last_span;
            if inside || at_end {
                1.0
            } else {
                0.0
            }
        })
        .collect();

    for p in 1..=degree {
        for i in 0..m - 1 - p {
            let left_den = knots[i + p] - knots[i];
            let right_den = knots[i + p + 1] - knots[i + 1];
            let left = if left_den > 0.0 {
                (u - knots[i]) / left_den * n[i]
            } else {
                0.0
            };
            let right = if right_den > 0.0 {
                (knots[i + p + 1] - u) / right_den * n[i + 1]
            } else {
                0.0
            };
            n[i] = left + right;
        }
    }
    n.truncate(count);
    Ok(n)
}
