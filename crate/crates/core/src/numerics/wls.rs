//! Weighted least squares via Householder QR.

use super::matrix::{back_substitute, upper_triangular_inverse, DesignMatrix, HouseholderQr, Matrix};
use crate::error::{Error, Result};

/// Relative size of an `R` diagonal entry, compared with its column norm,
/// below which the column is treated as linearly dependent.
const RANK_TOLERANCE: f64 = 1e-9;

/// Result of a (weighted) least-squares fit.
#[derive(Debug, Clone)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    /// Weighted residual sum of squares over `n_effective - p`.
    pub residual_variance: f64,
    /// `(XᵀWX)⁻¹`.
    pub gram_inverse: Matrix,
    pub degrees_freedom: usize,
    /// Number of rows with strictly positive weight.
    pub n_effective: usize,
    /// `R⁻¹`, an upper-triangular square root of `gram_inverse`.
    r_inverse: Matrix,
}

impl LinearFit {
    /// Upper-triangular `L` with `L Lᵀ = gram_inverse`.
    pub fn gram_inverse_factor(&self) -> &Matrix {
        &self.r_inverse
    }

    pub fn predict(&self, design: &DesignMatrix) -> Vec<f64> {
        design.values.mul_vec(&self.coefficients)
    }
}

/// Fits `response ~ design` by (weighted) least squares.
///
/// Rows with zero weight do not contribute. The residual variance uses the
/// number of positively weighted rows minus the number of columns.
pub fn wls_fit(
    design: &DesignMatrix,
    response: &[f64],
    weights: Option<&[f64]>,
) -> Result<LinearFit> {
    let (n, p) = (design.rows(), design.cols());
    if response.len() != n {
        return Err(Error::Argument(format!(
            "response has length {} but design has {n} rows",
            response.len()
        )));
    }
    if p == 0 {
        return Err(Error::Argument("design has no columns".into()));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::Argument(format!(
                "weights have length {} but design has {n} rows",
                w.len()
            )));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Argument("weights must be finite and nonnegative".into()));
        }
    }
    if response.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("response has non-finite entries".into()));
    }

    // Keep only positively weighted rows, scaled by sqrt(w).
    let rows: Vec<usize> = match weights {
        Some(w) => (0..n).filter(|&i| w[i] > 0.0).collect(),
        None => (0..n).collect(),
    };
    let n_eff = rows.len();
    if n_eff < p {
        return Err(Error::Argument(format!(
            "{n_eff} positively weighted rows for {p} columns"
        )));
    }
    let sqrt_w: Vec<f64> = match weights {
        Some(w) => rows.iter().map(|&i| w[i].sqrt()).collect(),
        None => vec![1.0; n_eff],
    };
    let mut a = design.values.select_rows(&rows);
    for j in 0..p {
        for (v, s) in a.column_mut(j).iter_mut().zip(&sqrt_w) {
            *v *= s;
        }
    }
    let mut b: Vec<f64> = rows.iter().zip(&sqrt_w).map(|(&i, s)| response[i] * s).collect();

    let col_norms: Vec<f64> = (0..p)
        .map(|j| a.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let qr = HouseholderQr::new(&a)?;
    let diag = qr.r_diagonal();
    let dependent: Vec<String> = (0..p)
        .filter(|&j| col_norms[j] == 0.0 || diag[j].abs() <= RANK_TOLERANCE * col_norms[j])
        .map(|j| design.labels[j].clone())
        .collect();
    if !dependent.is_empty() {
        return Err(Error::Singular { columns: dependent });
    }

    qr.apply_qt(&mut b);
    let r = qr.r();
    let coefficients = back_substitute(&r, &b);
    let rss: f64 = b[p..].iter().map(|v| v * v).sum();
    let dof = n_eff - p;
    let residual_variance = if dof > 0 { rss / dof as f64 } else { 0.0 };

    let r_inverse = upper_triangular_inverse(&r);
    let gram_inverse = r_inverse.matmul(&r_inverse.transpose());

    Ok(LinearFit {
        coefficients,
        residual_variance,
        gram_inverse,
        degrees_freedom: dof,
        n_effective: n_eff,
        r_inverse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(cols: &[Vec<f64>]) -> DesignMatrix {
        DesignMatrix::from_matrix(Matrix::from_columns(cols[0].len(), cols).unwrap()).unwrap()
    }

    #[test]
    fn exact_line() {
        let d = design(&[vec![1.0; 3], vec![0.0, 1.0, 2.0]]);
        let fit = wls_fit(&d, &[0.0, 1.0, 2.0], None).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-14);
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-14);
        assert!(fit.residual_variance.abs() < 1e-28);
        assert_eq!(fit.degrees_freedom, 1);
    }

    #[test]
    fn weighted_mean() {
        let d = design(&[vec![1.0; 2]]);
        let fit = wls_fit(&d, &[1.0, 3.0], Some(&[1.0, 3.0])).unwrap();
        assert!((fit.coefficients[0] - 2.5).abs() < 1e-14);
    }

    #[test]
    fn zero_weights_drop_rows() {
        let d = design(&[vec![1.0; 4], vec![0.0, 1.0, 2.0, 3.0]]);
        let fit = wls_fit(&d, &[0.0, 1.0, 2.0, 100.0], Some(&[1.0, 1.0, 1.0, 0.0])).unwrap();
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-12);
        assert_eq!(fit.n_effective, 3);
    }

    #[test]
    fn rank_deficiency_names_column() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let mut d = design(&[vec![1.0; 4], x, x2]);
        d.labels = vec!["(Intercept)".into(), "a".into(), "b".into()];
        match wls_fit(&d, &[1.0, 2.0, 3.0, 5.0], None) {
            Err(Error::Singular { columns }) => assert_eq!(columns, vec!["b".to_string()]),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch() {
        let d = design(&[vec![1.0; 3]]);
        assert!(matches!(wls_fit(&d, &[1.0, 2.0], None), Err(Error::Argument(_))));
        assert!(matches!(
            wls_fit(&d, &[1.0, 2.0, 3.0], Some(&[1.0])),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn gram_inverse_factor_squares_to_gram_inverse() {
        let d = design(&[vec![1.0; 5], vec![0.3, -1.0, 2.0, 0.7, 1.1]]);
        let fit = wls_fit(&d, &[1.0, 0.0, 3.0, 1.5, 2.0], None).unwrap();
        let l = fit.gram_inverse_factor();
        let g = l.matmul(&l.transpose());
        for i in 0..2 {
            for j in 0..2 {
                assert!((g[(i, j)] - fit.gram_inverse[(i, j)]).abs() < 1e-14);
            }
        }
    }
}
