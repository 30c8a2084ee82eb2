//! Stein divergence on SPD matrices and a randomized probe of its
//! Gaussian-kernel bandwidth set.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{certify_threshold, WitnessCertificate};
use crate::error::{Error, Result};
use crate::gram::{gram, KernelParam};
use crate::metric::{orthonormalize, spd_from_factor, Point, SpaceDescriptor, SpdMetric};
use crate::spectral::jacobi_eigenvalues;
use crate::wide::Precision;
use crate::witness::build_certificate;

fn log_det(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidPoint(format!("{what}: not positive definite")))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// `S(A, B) = log det((A+B)/2) − ½ log det(AB)`.
pub fn stein_divergence(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let mid = (a + b) * 0.5;
    Ok(log_det(&mid, "(A+B)/2")? - 0.5 * (log_det(a, "A")? + log_det(b, "B")?))
}

/// `{1/2, 2/2, …, (n−2)/2} ∪ [(n−1)/2, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPlusSet {
    pub n: usize,
    pub discrete: Vec<f64>,
    pub continuous_from: f64,
}

impl LambdaPlusSet {
    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.continuous_from || self.discrete.iter().any(|d| (lambda - d).abs() <= 1e-12)
    }
}

pub fn lambda_plus_set(n: usize) -> Result<LambdaPlusSet> {
    if n < 1 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(LambdaPlusSet {
        n,
        discrete: (1..n.saturating_sub(1)).map(|k| k as f64 / 2.0).collect(),
        continuous_from: (n as f64 - 1.0) / 2.0,
    })
}

/// Point-set families tried by [`probe`], cycled by trial index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// `GGᵀ/(n+2)` with Gaussian `G` of shape `n × (n+2)`.
    Wishart,
    /// Log-normal diagonal matrices.
    Diagonal,
    /// Pairs `Q diag(e^t) Qᵀ`, `Q diag(e^{−t}) Qᵀ` with condition numbers up to `1e8`.
    IllConditioned,
    /// Cayley images `(I+Z)(I−Z)^{-1}` of a small symmetric cloud.
    Cayley,
}

const STRATEGIES: [Strategy; 4] = [Strategy::Wishart, Strategy::Diagonal, Strategy::IllConditioned, Strategy::Cayley];

impl Strategy {
    pub fn for_trial(t: u64) -> Self {
        STRATEGIES[(t % STRATEGIES.len() as u64) as usize]
    }
}

/// Cayley clouds need more points than there are polynomial components of
/// degree ≤ 3 in `n(n+1)/2` variables; twice that count plus a margin.
pub fn cayley_cloud_size(n: usize) -> usize {
    let m = n * (n + 1) / 2;
    let c = (m + 1) * (m + 2) * (m + 3) / 6;
    2 * c + 32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub n: usize,
    pub lambda: f64,
    pub in_set: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_strategy: Option<Strategy>,
    pub min_eig_seen: f64,
    pub trials_run: u64,
}

fn symmetric(g: DMatrix<f64>) -> DMatrix<f64> {
    (&g + g.transpose()) * 0.5
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn conjugate(q: &DMatrix<f64>, diag: &[f64]) -> DMatrix<f64> {
    let scaled = DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * diag[j].sqrt());
    spd_from_factor(&scaled, 0.0)
}

fn sample_trial(n: usize, strategy: Strategy, count: usize, rng: &mut ChaCha8Rng) -> Vec<DMatrix<f64>> {
    match strategy {
        Strategy::Wishart => (0..count)
            .map(|_| {
                let g = gaussian(rng, n, n + 2) / ((n + 2) as f64).sqrt();
                spd_from_factor(&g, 1e-3)
            })
            .collect(),
        Strategy::Diagonal => (0..count)
            .map(|_| {
                let d: Vec<f64> = (0..n).map(|_| (1.5 * rng.sample::<f64, _>(StandardNormal)).exp()).collect();
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
            })
            .collect(),
        Strategy::IllConditioned => {
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let q = orthonormalize(gaussian(rng, n, n));
                let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-9.2..9.2)).collect();
                out.push(conjugate(&q, &t.iter().map(|x| x.exp()).collect::<Vec<_>>()));
                if out.len() < count {
                    out.push(conjugate(&q, &t.iter().map(|x| (-x).exp()).collect::<Vec<_>>()));
                }
            }
            out
        }
        Strategy::Cayley => {
            let radius = rng.gen_range(0.4..0.6);
            let eye = DMatrix::<f64>::identity(n, n);
            (0..count.max(cayley_cloud_size(n)))
                .map(|_| {
                    let z = symmetric(gaussian(rng, n, n));
                    // Frobenius norm bounds the spectral norm, keeping ‖Z‖ < 1.
                    let z = &z * (radius * rng.gen_range(0.5..1.0) / z.norm());
                    let inv = (&eye - &z).try_inverse().expect("‖Z‖ < 1");
                    symmetric((&eye + &z) * inv)
                })
                .collect()
        }
    }
}

struct TrialOutcome {
    points: Vec<Point>,
    min_eig: f64,
    threshold: f64,
}

fn run_trial(n: usize, lambda: f64, points_per_trial: usize, seed: u64, t: u64) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    let space = SpaceDescriptor::Spd { n, metric: SpdMetric::Stein };
    let points: Vec<Point> =
        sample_trial(n, Strategy::for_trial(t), points_per_trial, &mut rng).into_iter().map(Point::Matrix).collect();
    let k = gram(&space, &points, KernelParam::new(lambda)?)?;
    let min_eig = jacobi_eigenvalues(&k.entries)?.min_f64();
    Ok(TrialOutcome { threshold: certify_threshold(points.len(), Precision::DOUBLE), points, min_eig })
}

/// Searches for a Gram matrix of the Stein Gaussian kernel with an
/// eigenvalue below `−10 × tolerance`.
///
/// Trials run in parallel batches but are scanned in index order, so the
/// reported witness is the lowest-index violation regardless of scheduling.
/// A report without a witness means only that the budget found none.
pub fn probe(n: usize, lambda: f64, trials: u64, points_per_trial: usize, seed: u64) -> Result<ProbeReport> {
    let set = lambda_plus_set(n)?;
    KernelParam::new(lambda)?;
    if trials < 1 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if points_per_trial < 2 {
        return Err(Error::InvalidArgument("points_per_trial must be at least 2".into()));
    }
    let batch = (rayon::current_num_threads() as u64 * 2).max(4);
    let mut min_eig_seen = f64::INFINITY;
    let mut start = 0;
    while start < trials {
        let end = (start + batch).min(trials);
        let outcomes: Vec<Result<TrialOutcome>> =
            (start..end).into_par_iter().map(|t| run_trial(n, lambda, points_per_trial, seed, t)).collect();
        for (t, outcome) in (start..end).zip(outcomes) {
            let outcome = outcome?;
            min_eig_seen = min_eig_seen.min(outcome.min_eig);
            if outcome.min_eig < outcome.threshold {
                let space = SpaceDescriptor::Spd { n, metric: SpdMetric::Stein };
                let cert = build_certificate(&space, lambda, &outcome.points, Precision::DOUBLE)?;
                return Ok(ProbeReport {
                    n,
                    lambda,
                    in_set: set.contains(lambda),
                    witness: Some(cert),
                    witness_strategy: Some(Strategy::for_trial(t)),
                    min_eig_seen,
                    trials_run: t + 1,
                });
            }
        }
        start = end;
    }
    Ok(ProbeReport {
        n,
        lambda,
        in_set: set.contains(lambda),
        witness: None,
        witness_strategy: None,
        min_eig_seen,
        trials_run: trials,
    })
}
