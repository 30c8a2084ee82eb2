//! Gaussian kernel `exp(−λ d²)` and Gram matrices.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{distance_unchecked, validate_point, Point, SpaceDescriptor};
use crate::wide::{Precision, Wide};

/// Bandwidth `λ > 0`; `μ = 4π²λ` is the scaled form used on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParam {
    lambda: f64,
}

impl KernelParam {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(KernelParam { lambda })
        } else {
            Err(Error::InvalidArgument(format!("lambda must be positive and finite, got {lambda}")))
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.lambda * 4.0 * PI * PI
    }

    pub fn mu_wide(&self, bits: usize) -> Wide {
        let pi = Wide::pi(bits);
        Wide::from_f64(self.lambda, bits) * pi.square().mul_i64(4)
    }
}

/// `exp(−λ d²)`.
pub fn gaussian_kernel(param: KernelParam, d: f64) -> Result<f64> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::InvalidArgument(format!("distance must be nonnegative, got {d}")));
    }
    Ok((-param.lambda * d * d).exp())
}

/// Where a Gram matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramMeta {
    pub space: SpaceDescriptor,
    pub lambda: f64,
    /// Index of each row's point in the originating point list.
    pub point_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub meta: Option<GramMeta>,
}

impl GramMatrix {
    /// Wraps a bare symmetric matrix with no provenance.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch("Gram matrix must be square".into()));
        }
        Ok(GramMatrix { entries, meta: None })
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.amax()
    }

    /// JSON with the lower triangle flattened row by row.
    pub fn to_json(&self) -> serde_json::Value {
        let n = self.order();
        let lower: Vec<f64> = (0..n).flat_map(|i| (0..=i).map(move |j| (i, j))).map(|(i, j)| self.entries[(i, j)]).collect();
        serde_json::json!({
            "schema_version": crate::SCHEMA_VERSION,
            "order": n,
            "lambda": self.meta.as_ref().map(|m| m.lambda),
            "space": self.meta.as_ref().map(|m| m.space),
            "entries": lower,
        })
    }

    /// Dense, headerless CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.order() {
            for j in 0..self.order() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", self.entries[(i, j)]);
            }
            out.push('\n');
        }
        out
    }
}

/// Gram matrix of the Gaussian kernel on `points`.
///
/// Diagonal entries are exactly 1; each unordered pair is evaluated once
/// and mirrored.
pub fn gram(space: &SpaceDescriptor, points: &[Point], param: KernelParam) -> Result<GramMatrix> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("Gram matrix of an empty point set".into()));
    }
    for (i, p) in points.iter().enumerate() {
        validate_point(space, p).map_err(|e| Error::InvalidPoint(format!("points[{i}]: {e}")))?;
    }
    let n = points.len();
    let mut k = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = distance_unchecked(space, &points[i], &points[j])?;
            let v = gaussian_kernel(param, d)?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(GramMatrix {
        entries: k,
        meta: Some(GramMeta { space: *space, lambda: param.lambda(), point_ids: (0..n).collect() }),
    })
}

/// Entrywise product.
pub fn hadamard(k1: &GramMatrix, k2: &GramMatrix) -> Result<DMatrix<f64>> {
    if k1.entries.shape() != k2.entries.shape() {
        return Err(Error::DimensionMismatch(format!(
            "Hadamard product of {:?} and {:?}",
            k1.entries.shape(),
            k2.entries.shape()
        )));
    }
    if let (Some(a), Some(b)) = (&k1.meta, &k2.meta) {
        if a.point_ids != b.point_ids || a.space != b.space {
            return Err(Error::DimensionMismatch("Hadamard product of Grams on different point sets".into()));
        }
    }
    Ok(k1.entries.component_mul(&k2.entries))
}

/// Restriction to the rows/columns in `indices`.
pub fn principal_submatrix(k: &GramMatrix, indices: &[usize]) -> Result<GramMatrix> {
    let n = k.order();
    let mut seen = vec![false; n];
    for &i in indices {
        if i >= n {
            return Err(Error::InvalidArgument(format!("index {i} out of range for order {n}")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidArgument(format!("duplicate index {i}")));
        }
    }
    let m = indices.len();
    let entries = DMatrix::from_fn(m, m, |r, c| k.entries[(indices[r], indices[c])]);
    let meta = k.meta.as_ref().map(|meta| GramMeta {
        space: meta.space,
        lambda: meta.lambda,
        point_ids: indices.iter().map(|&i| meta.point_ids[i]).collect(),
    });
    Ok(GramMatrix { entries, meta })
}

/// First row of the equispaced `N`-point unit-circle Gram at wide precision:
/// `exp(−μ min(k, N−k)² / N²)`.
pub fn equispaced_circle_row(n: usize, lambda: f64, precision: Precision) -> Result<Vec<Wide>> {
    let param = KernelParam::new(lambda)?;
    let bits = precision.bits();
    let mu = param.mu_wide(bits);
    let nn = Wide::from_i64((n * n) as i64, bits);
    Ok((0..n)
        .map(|k| {
            let m = k.min(n - k) as i64;
            (-(&mu * &Wide::from_i64(m * m, bits)) / nn.clone()).exp()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::circle_equispaced;
    use approx::assert_abs_diff_eq;

    fn circle_gram(n: usize, lambda: f64) -> GramMatrix {
        gram(&SpaceDescriptor::UNIT_CIRCLE, &circle_equispaced(n).unwrap(), KernelParam::new(lambda).unwrap()).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let p = KernelParam::new(5.0).unwrap();
        assert_eq!(gaussian_kernel(p, 0.0).unwrap(), 1.0);
        let p = KernelParam::new(0.1).unwrap();
        let a = gaussian_kernel(p, PI / 2.0).unwrap();
        let b = gaussian_kernel(p, PI).unwrap();
        // Oracle: mpmath at 50 digits, exp(-0.1 (π/2)²) and exp(-0.1 π²).
        assert_abs_diff_eq!(a, 0.781_343_730_547_444_2, epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.372_707_838_853_437_9, epsilon = 1e-15);
        assert_abs_diff_eq!(b, a.powi(4), epsilon = 1e-15);
        assert!(gaussian_kernel(p, -1.0).is_err());
        assert!(KernelParam::new(0.0).is_err());
        assert!(KernelParam::new(-1.0).is_err());
    }

    #[test]
    fn mu_is_four_pi_squared_lambda() {
        let p = KernelParam::new(1.0).unwrap();
        assert_abs_diff_eq!(p.mu(), 39.478_417_604_357_43, epsilon = 1e-13);
        assert_abs_diff_eq!(p.mu_wide(128).to_f64(), p.mu(), epsilon = 1e-14);
    }

    #[test]
    fn circle_gram_first_row() {
        let k = circle_gram(4, 0.1);
        let row: Vec<f64> = k.entries.row(0).iter().copied().collect();
        let a = 0.781_343_730_547_444_2;
        let b = 0.372_707_838_853_437_9;
        for (got, want) in row.iter().zip([1.0, a, b, a]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn degenerate_grams() {
        let c = SpaceDescriptor::UNIT_CIRCLE;
        let p = KernelParam::new(3.0).unwrap();
        let one = gram(&c, &[Point::angle(1.0)], p).unwrap();
        assert_eq!(one.entries, DMatrix::from_element(1, 1, 1.0));
        let two = gram(&c, &[Point::angle(1.0), Point::angle(1.0)], p).unwrap();
        assert_eq!(two.entries, DMatrix::from_element(2, 2, 1.0));
        assert!(gram(&c, &[], p).is_err());
        assert!(gram(&c, &[Point::angle(7.0)], p).is_err());
    }

    #[test]
    fn gram_invariants() {
        let k = circle_gram(9, 0.37);
        for i in 0..9 {
            assert_eq!(k.entries[(i, i)], 1.0);
            for j in 0..9 {
                assert_eq!(k.entries[(i, j)], k.entries[(j, i)]);
                assert!(k.entries[(i, j)] > 0.0 && k.entries[(i, j)] <= 1.0);
            }
        }
    }

    #[test]
    fn hadamard_examples() {
        let k = circle_gram(4, 0.1);
        let ones = GramMatrix::from_matrix(DMatrix::from_element(4, 4, 1.0)).unwrap();
        assert_eq!(hadamard(&k, &ones).unwrap(), k.entries);
        let prod = hadamard(&k, &circle_gram(4, 0.2)).unwrap();
        let sum = circle_gram(4, 0.3).entries;
        assert!((prod - sum).amax() <= 1e-15);
        let (a, b) = (0.3, 0.7);
        let m = |x: f64| GramMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, x, x, 1.0])).unwrap();
        assert_eq!(hadamard(&m(a), &m(b)).unwrap(), DMatrix::from_row_slice(2, 2, &[1.0, a * b, a * b, 1.0]));
        assert!(hadamard(&k, &circle_gram(5, 0.1)).is_err());
        let other = principal_submatrix(&circle_gram(8, 0.1), &[1, 2, 3, 4]).unwrap();
        assert!(hadamard(&k, &other).is_err());
    }

    #[test]
    fn submatrix_examples() {
        let k = circle_gram(8, 0.2);
        assert_eq!(principal_submatrix(&k, &(0..8).collect::<Vec<_>>()).unwrap(), k);
        assert_eq!(principal_submatrix(&k, &[5]).unwrap().entries, DMatrix::from_element(1, 1, 1.0));
        let sub = principal_submatrix(&k, &[0, 2, 4, 6]).unwrap();
        assert_eq!(sub.entries, circle_gram(4, 0.2).entries);
        assert_eq!(sub.meta.unwrap().point_ids, vec![0, 2, 4, 6]);
        assert!(principal_submatrix(&k, &[8]).is_err());
        assert!(principal_submatrix(&k, &[1, 1]).is_err());
    }

    #[test]
    fn serialisations() {
        let k = principal_submatrix(&circle_gram(4, 0.1), &[0, 2]).unwrap();
        let j = k.to_json();
        assert_eq!(j["order"], 2);
        assert_eq!(j["entries"].as_array().unwrap().len(), 3);
        assert_eq!(j["space"]["variant"], "circle");
        let csv = k.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("1,0.37270783885343"));
    }

    #[test]
    fn wide_row_matches_double_row() {
        let row = equispaced_circle_row(8, 0.3, Precision::DEFAULT).unwrap();
        let k = circle_gram(8, 0.3);
        for (j, w) in row.iter().enumerate() {
            assert_abs_diff_eq!(w.to_f64(), k.entries[(0, j)], epsilon = 1e-15);
        }
    }
}
