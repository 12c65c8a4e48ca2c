//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Lower Cholesky factor of a symmetric matrix.
///
/// On failure the smallest eigenvalue is reported so callers can tell a
/// merely ill-conditioned matrix from an indefinite one.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        let l = ch.l();
        // pivots at rounding level mean the input was singular
        let scale = m.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let floor = 64.0 * f64::EPSILON * scale;
        if l.diagonal().iter().all(|v| v * v > floor && v.is_finite()) {
            return Ok(l);
        }
    }
    let min = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let sign = if min < 0.0 {
        "negative"
    } else if min == 0.0 {
        "zero"
    } else {
        "positive but numerically singular"
    };
    Err(Error::Cholesky {
        min_eigenvalue: min,
        sign,
    })
}

/// Solves `L z = v` for lower-triangular `L`.
pub fn solve_lower(l: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = v[i];
        for j in 0..i {
            s -= l[(i, j)] * z[j];
        }
        z[i] = s / l[(i, i)];
    }
    z
}

/// `L^T a` for lower-triangular `L`.
pub fn lt_mul(l: &DMatrix<f64>, a: &[f64]) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|j| (j..n).map(|i| l[(i, j)] * a[i]).sum())
        .collect()
}

/// `L z` for lower-triangular `L`.
pub fn l_mul(l: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    let n = z.len();
    (0..n)
        .map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Column means of a row-major `n x d` buffer.
pub fn column_means(data: &[f64], d: usize) -> Vec<f64> {
    let n = data.len() / d;
    let mut mean = vec![0.0; d];
    for row in data.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    mean
}

/// Unbiased sample covariance of a row-major `n x d` buffer.
pub fn sample_covariance(data: &[f64], d: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = data.len() / d;
    let mean = column_means(data, d);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in data.chunks_exact(d) {
        for k in 0..d {
            centered[k] = row[k] - mean[k];
        }
        for i in 0..d {
            for j in 0..=i {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for i in 0..d {
        for j in 0..=i {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    (mean, cov)
}

/// Least-squares fit `y ≈ Xw + b₀` on a row-major `n x d` buffer, via SVD
/// of the intercept-augmented design. Returns `(w, b₀)`.
pub fn ols(x: &[f64], d: usize, y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = y.len();
    if x.len() != n * d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            found: x.len(),
        });
    }
    if n < d + 1 {
        return Err(Error::invalid(format!(
            "least squares needs at least {} rows, got {n}",
            d + 1
        )));
    }
    let design = DMatrix::from_fn(n, d + 1, |i, j| if j < d { x[i * d + j] } else { 1.0 });
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-12) {
        return Err(Error::invalid("least-squares design is rank deficient"));
    }
    let coef = svd
        .solve(&DVector::from_column_slice(y), 0.0)
        .map_err(|e| Error::invalid(format!("least squares failed: {e}")))?;
    Ok((coef.as_slice()[..d].to_vec(), coef[d]))
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Serde adapter storing a matrix as a list of rows.
pub mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangular_helpers_agree_with_dense_products() {
        let l = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.5, 1.5, 0.0, -1.0, 0.25, 3.0]);
        let a = [0.3, -1.2, 2.0];
        let dense_lt = l.transpose() * to_dvector(&a);
        let dense_l = &l * to_dvector(&a);
        for i in 0..3 {
            assert!((lt_mul(&l, &a)[i] - dense_lt[i]).abs() < 1e-14);
            assert!((l_mul(&l, &a)[i] - dense_l[i]).abs() < 1e-14);
        }
        let z = solve_lower(&l, &a);
        let back = l_mul(&l, &z);
        for i in 0..3 {
            assert!((back[i] - a[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn cholesky_reports_negative_eigenvalue() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match cholesky_lower(&m) {
            Err(Error::Cholesky { min_eigenvalue, sign }) => {
                assert!((min_eigenvalue + 1.0).abs() < 1e-12);
                assert_eq!(sign, "negative");
            }
            other => panic!("expected cholesky error, got {other:?}"),
        }
    }
}
