//! Natural cubic spline bases.
//!
//! The basis is built the same way as the usual `ns()` helper of statistical
//! packages: a cubic B-spline basis on the augmented knot sequence, the first
//! B-spline dropped (no intercept), then projected onto the null space of the
//! second-derivative constraints at both boundary knots. Outside the boundary
//! knots each column continues linearly.

use super::matrix::{DesignMatrix, HouseholderQr, Matrix};
use crate::error::{Error, Result};

const ORDER: usize = 4;

/// Knots and constraint projection for a natural spline basis with `df` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline {
    df: usize,
    boundary: (f64, f64),
    interior: Vec<f64>,
    /// Augmented knot vector (boundary knots repeated `ORDER` times).
    knots: Vec<f64>,
    /// `(nb - 1) x df` projection onto the constraint null space.
    projection: Matrix,
}

/// Sample quantile with linear interpolation between order statistics
/// (the default "type 7" definition).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl NaturalSpline {
    /// Places boundary knots at the extremes of `train` and `df - 1` interior
    /// knots at its equally spaced quantiles.
    pub fn fit(train: &[f64], df: usize) -> Result<Self> {
        if df == 0 {
            return Err(Error::Argument("spline df must be at least 1".into()));
        }
        if train.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("spline training values must be finite".into()));
        }
        let mut sorted = train.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        if distinct.len() < df + 2 {
            return Err(Error::Argument(format!(
                "natural spline with df = {df} needs at least {} distinct training values, got {}",
                df + 2,
                distinct.len()
            )));
        }
        let boundary = (sorted[0], sorted[sorted.len() - 1]);
        let interior: Vec<f64> = (1..df)
            .map(|k| quantile_sorted(&sorted, k as f64 / df as f64))
            .collect();
        let mut all = vec![boundary.0];
        all.extend_from_slice(&interior);
        all.push(boundary.1);
        if all.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument(format!(
                "natural spline knots collapse for df = {df}; too many tied training values"
            )));
        }

        let mut knots = vec![boundary.0; ORDER];
        knots.extend_from_slice(&interior);
        knots.extend(std::iter::repeat_n(boundary.1, ORDER));

        let nb = knots.len() - ORDER;
        // Second derivatives at both boundaries, first B-spline dropped.
        let mut constraint_t = Matrix::zeros(nb - 1, 2);
        for (c, x) in [boundary.0, boundary.1].into_iter().enumerate() {
            for i in 1..nb {
                constraint_t[(i - 1, c)] = bspline(&knots, i, ORDER, x, 2);
            }
        }
        let q = HouseholderQr::new(&constraint_t)?.q_full();
        let projection = Matrix::from_fn(nb - 1, df, |i, j| q[(i, j + 2)]);

        Ok(Self {
            df,
            boundary,
            interior,
            knots,
            projection,
        })
    }

    pub fn df(&self) -> usize {
        self.df
    }

    pub fn boundary_knots(&self) -> (f64, f64) {
        self.boundary
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.interior
    }

    /// Basis row for one point: the B-spline values (first dropped) times the projection.
    fn raw_row(&self, x: f64, out: &mut [f64]) {
        let nb = self.knots.len() - ORDER;
        let (a, b) = self.boundary;
        let mut full = vec![0.0; nb];
        if x < a || x > b {
            let edge = if x < a { a } else { b };
            for (i, f) in full.iter_mut().enumerate() {
                *f = bspline(&self.knots, i, ORDER, edge, 0)
                    + (x - edge) * bspline(&self.knots, i, ORDER, edge, 1);
            }
        } else {
            let (span, vals) = nonzero_basis(&self.knots, x);
            for (r, v) in vals.iter().enumerate() {
                full[span + 1 - ORDER + r] = *v;
            }
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o = (1..nb).map(|i| full[i] * self.projection[(i - 1, j)]).sum();
        }
    }

    /// Evaluates the basis at `values`; one row per value, `df` columns.
    pub fn evaluate(&self, values: &[f64]) -> Result<Matrix> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("spline evaluation values must be finite".into()));
        }
        let mut m = Matrix::zeros(values.len(), self.df);
        let mut row = vec![0.0; self.df];
        for (i, &x) in values.iter().enumerate() {
            self.raw_row(x, &mut row);
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }
}

/// `n_eval x df` natural cubic spline basis with knots taken from `train_values`.
pub fn natural_spline_basis(
    train_values: &[f64],
    eval_values: &[f64],
    df: usize,
) -> Result<DesignMatrix> {
    let spline = NaturalSpline::fit(train_values, df)?;
    let labels = (1..=df).map(|k| format!("ns{k}")).collect();
    DesignMatrix::new(spline.evaluate(eval_values)?, labels)
}

/// Knot span index `s` with `knots[s] <= x < knots[s + 1]`; the right boundary
/// belongs to the last non-empty span.
fn find_span(knots: &[f64], x: f64) -> usize {
    let nb = knots.len() - ORDER;
    if x >= knots[nb] {
        return nb - 1;
    }
    let (mut lo, mut hi) = (ORDER - 1, nb);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if x < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// The `ORDER` non-vanishing cubic B-splines at `x` (triangular recurrence).
fn nonzero_basis(knots: &[f64], x: f64) -> (usize, [f64; ORDER]) {
    let span = find_span(knots, x);
    let mut n = [0.0; ORDER];
    let mut left = [0.0; ORDER];
    let mut right = [0.0; ORDER];
    n[0] = 1.0;
    for j in 1..ORDER {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    (span, n)
}

/// Value (or `deriv`-th derivative) of the `i`-th B-spline of the given order,
/// by the Cox-de Boor recursion. Used only at a handful of points.
fn bspline(knots: &[f64], i: usize, order: usize, x: f64, deriv: usize) -> f64 {
    if deriv > 0 {
        if order == 1 {
            return 0.0;
        }
        let k = (order - 1) as f64;
        let d1 = knots[i + order - 1] - knots[i];
        let d2 = knots[i + order] - knots[i + 1];
        let a = if d1 > 0.0 {
            bspline(knots, i, order - 1, x, deriv - 1) / d1
        } else {
            0.0
        };
        let b = if d2 > 0.0 {
            bspline(knots, i + 1, order - 1, x, deriv - 1) / d2
        } else {
            0.0
        };
        return k * (a - b);
    }
    if order == 1 {
        let last = *knots.last().unwrap();
        let (lo, hi) = (knots[i], knots[i + 1]);
        let inside = lo <= x && x < hi;
        let right_end = x == last && hi == last && lo < hi;
        return if inside || right_end { 1.0 } else { 0.0 };
    }
    let d1 = knots[i + order - 1] - knots[i];
    let d2 = knots[i + order] - knots[i + 1];
    let mut v = 0.0;
    if d1 > 0.0 {
        v += (x - knots[i]) / d1 * bspline(knots, i, order - 1, x, 0);
    }
    if d2 > 0.0 {
        v += (knots[i + order] - x) / d2 * bspline(knots, i + 1, order - 1, x, 0);
    }
    v
}
