//! Positive-semidefiniteness decisions.
//!
//! Two routes to a spectrum: a cyclic Jacobi eigensolver for arbitrary
//! dense symmetric matrices (double precision), and the exact circulant
//! route for equispaced circle configurations, where the eigenvalues are
//! the cosine transform of the first row and can be evaluated with wide
//! floats.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wide::{Neumaier, Precision, Real, Wide, WideSum};

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-14;
const PSD_REL_TOL: f64 = 1e-10;
/// Certificates require the violation to exceed this multiple of the PSD tolerance.
pub const CERTIFY_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    Jacobi,
    Circulant,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Ascending.
    pub eigenvalues: Vec<Real>,
    pub min_eigenvalue: Real,
    pub method: SpectrumMethod,
    /// Off-diagonal Frobenius norm left by the Jacobi sweeps; zero for the circulant route.
    pub offdiag_residual: f64,
    pub precision_digits: u32,
    /// For the circulant route: `index_map[i]` is the Fourier index `j` of the i-th sorted eigenvalue.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub index_map: Vec<usize>,
}

impl SpectrumReport {
    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(Real::to_f64).collect()
    }

    pub fn min_f64(&self) -> f64 {
        self.min_eigenvalue.to_f64()
    }
}

/// Full eigendecomposition from the Jacobi solver.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: DMatrix<f64>,
    pub offdiag_residual: f64,
    pub sweeps: usize,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * max_abs(m) {
        return Err(Error::Asymmetric(asym));
    }
    Ok(())
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps row by row over the strict upper triangle until the off-diagonal
/// Frobenius norm drops to `1e-14 ‖M‖_F`, giving up after 100 sweeps.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen> {
    check_symmetric(m)?;
    let n = m.nrows();
    // Row-major working copy, symmetrised.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let fro = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = JACOBI_REL_TOL * fro;
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        s.sqrt()
    };

    let mut residual = off(&a);
    let mut sweeps = 0;
    while residual > target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { iterations: sweeps, residual });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // Negligible against both diagonal entries: drop it.
                if sweeps > 4 && app.abs() + 100.0 * apq.abs() == app.abs() && aqq.abs() + 100.0 * apq.abs() == aqq.abs() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let nkp = c * akp - s * akq;
                    let nkq = s * akp + c * akq;
                    a[k * n + p] = nkp;
                    a[p * n + k] = nkp;
                    a[k * n + q] = nkq;
                    a[q * n + k] = nkq;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        residual = off(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    Ok(SymmetricEigen { values, vectors, offdiag_residual: residual, sweeps })
}

/// Ascending Jacobi spectrum, with the trace conservation check applied.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Result<SpectrumReport> {
    let eig = jacobi_eigen(m)?;
    let n = m.nrows();
    let trace: Neumaier = (0..n).map(|i| m[(i, i)]).collect();
    let sum: Neumaier = eig.values.iter().copied().collect();
    let drift = (trace.total() - sum.total()).abs();
    if drift > 1e-10 * n as f64 * max_abs(m).max(1.0) {
        return Err(Error::NoConvergence { iterations: eig.sweeps, residual: drift });
    }
    let min = eig.values.first().copied().unwrap_or(0.0);
    Ok(SpectrumReport {
        eigenvalues: eig.values.into_iter().map(Real::F64).collect(),
        min_eigenvalue: Real::F64(min),
        method: SpectrumMethod::Jacobi,
        offdiag_residual: eig.offdiag_residual,
        precision_digits: Precision::DOUBLE.digits(),
        index_map: Vec::new(),
    })
}

/// `cos(2π m / N)` for `m = 0..N`.
pub fn cos_table(n: usize, bits: usize) -> Vec<Wide> {
    let step = Wide::two_pi(bits).div_i64(n as i64);
    (0..n).map(|m| step.mul_i64(m as i64).cos()).collect()
}

/// All `w_j = Σ_k row[k] cos(2πjk/N)`, in Fourier index order.
pub fn circulant_spectrum_raw(first_row: &[Wide], precision: Precision) -> Result<Vec<Wide>> {
    let n = first_row.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty first row".into()));
    }
    let bits = precision.bits();
    let half_ulp = Wide::from_f64(2.0, bits) * Wide::from_f64(2f64.powi(-(bits as i32)), bits);
    for k in 1..n {
        let (a, b) = (&first_row[k], &first_row[n - k]);
        let tol = &half_ulp * &a.abs().max(&b.abs());
        if (a - b).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "first row is not symmetric: row[{k}] != row[{}]",
                n - k
            )));
        }
    }
    let cos = cos_table(n, bits);
    let row: Vec<Wide> = first_row.iter().map(|x| x.with_bits(bits)).collect();
    Ok((0..n)
        .map(|j| {
            let mut acc = WideSum::new(bits);
            for (k, r) in row.iter().enumerate() {
                acc.add(&(r * &cos[(j * k) % n]));
            }
            acc.total()
        })
        .collect())
}

/// Spectrum of a symmetric circulant from its first row.
pub fn circulant_eigenvalues(first_row: &[Wide], precision: Precision) -> Result<SpectrumReport> {
    let w = circulant_spectrum_raw(first_row, precision)?;
    let mut index_map: Vec<usize> = (0..w.len()).collect();
    index_map.sort_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    let eigenvalues: Vec<Real> = index_map.iter().map(|&j| Real::at_precision(&w[j], precision)).collect();
    Ok(SpectrumReport {
        min_eigenvalue: eigenvalues[0].clone(),
        eigenvalues,
        method: SpectrumMethod::Circulant,
        offdiag_residual: 0.0,
        precision_digits: precision.digits(),
        index_map,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    PositiveDefinite,
    PositiveSemidefinite,
    NotPsd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdVerdict {
    pub verdict: Verdict,
    pub min_eigenvalue: f64,
    pub tolerance: f64,
}

/// The PSD tolerance `1e-10 · N · scale`.
pub fn psd_tolerance(order: usize, scale: f64) -> f64 {
    PSD_REL_TOL * order as f64 * scale
}

/// Classifies a spectrum; `scale` is the largest absolute entry of the tested matrix.
pub fn pd_verdict(report: &SpectrumReport, scale: f64) -> PdVerdict {
    let tolerance = psd_tolerance(report.order(), scale);
    let min = report.min_f64();
    let verdict = if min < -tolerance {
        Verdict::NotPsd
    } else if min > tolerance {
        Verdict::PositiveDefinite
    } else {
        Verdict::PositiveSemidefinite
    };
    PdVerdict { verdict, min_eigenvalue: min, tolerance }
}

/// Unit eigenvector for `target` by shifted inverse iteration.
pub fn min_eigenvector(m: &DMatrix<f64>, target: f64) -> Result<DVector<f64>> {
    check_symmetric(m)?;
    let n = m.nrows();
    let fro = m.norm();
    let tol = 1e-8 * fro.max(f64::MIN_POSITIVE);
    let residual_of = |x: &DVector<f64>| (m * x - x * target).norm();

    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.25 * ((i + 1) as f64).sin());
    x /= x.norm();
    if residual_of(&x) <= tol {
        return Ok(x);
    }
    let mut delta = 1e-10 * fro.max(1e-300);
    let mut last = f64::INFINITY;
    for _attempt in 0..4 {
        let shifted = m - DMatrix::identity(n, n) * (target - delta);
        let lu = shifted.lu();
        let mut y = x.clone();
        for _ in 0..50 {
            let Some(z) = lu.solve(&y) else { break };
            let norm = z.norm();
            if !norm.is_finite() || norm == 0.0 {
                break;
            }
            y = z / norm;
            last = residual_of(&y);
            if last <= tol {
                return Ok(y);
            }
        }
        delta *= 1e3;
    }
    Err(Error::NoConvergence { iterations: 50, residual: last })
}

/// Normalised real Fourier mode `c_k = cos(2πjk/N)`, an eigenvector of every symmetric circulant.
pub fn fourier_mode(n: usize, j: usize, bits: usize) -> Vec<Wide> {
    let cos = cos_table(n, bits);
    let raw: Vec<Wide> = (0..n).map(|k| cos[(j * k) % n].clone()).collect();
    let mut norm2 = WideSum::new(bits);
    raw.iter().for_each(|c| norm2.add(&c.square()));
    let norm = norm2.total().sqrt();
    raw.iter().map(|c| c / &norm).collect()
}
