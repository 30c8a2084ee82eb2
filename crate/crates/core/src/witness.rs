//! Negative-eigenvalue witnesses on the circle, critical bandwidths and
//! certificate construction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{certify_threshold, quadratic_form, WitnessCertificate};
use crate::error::{Error, Result};
use crate::gram::{equispaced_circle_row, gram, KernelParam};
use crate::metric::{circle_equispaced_wide, validate_point, Point, SpaceDescriptor};
use crate::spectral::{circulant_spectrum_raw, fourier_mode, jacobi_eigenvalues, min_eigenvector, SpectrumMethod};
use crate::theta::finite_alternating_sum;
use crate::wide::{Precision, Real, Wide};
use crate::SCHEMA_VERSION;

const BRACKET_START: f64 = 1e-6;
const MAX_DOUBLINGS: u32 = 60;
const BISECTION_TOL: f64 = 1e-8;

/// `w_{N/2} = −1 + 2 Σ_{k<N/2} (−1)^k exp(−μk²/N²) + exp(−μ/4)`.
pub fn w_half(mu: f64, n: u64, precision: Precision) -> Result<Wide> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    w_half_wide(&Wide::from_f64(mu, precision.bits()), n, precision)
}

pub fn w_half_wide(mu: &Wide, n: u64, precision: Precision) -> Result<Wide> {
    if n == 0 || !n.is_multiple_of(4) {
        return Err(Error::InvalidArgument(format!("N must be a positive multiple of 4, got {n}")));
    }
    let bits = precision.bits();
    let mu = mu.with_bits(bits);
    let one = Wide::one(bits);
    Ok(finite_alternating_sum(&mu, n, bits).mul_i64(2) - one + (-(mu.div_i64(4))).exp())
}

/// A circle size `N` whose alternating eigenvalue is negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleWitness {
    pub lambda: f64,
    pub n: u64,
    pub w_half: Real,
}

/// Threshold below which an eigenvalue counts as negative at `precision`.
pub fn negativity_threshold(precision: Precision) -> Wide {
    -precision.epsilon_shifted(5)
}

/// First `N ∈ {4, 8, …} ≤ n_max` with `w_{N/2}(4π²λ, N) < −10^(−d+5)`.
pub fn find_witness_n(lambda: f64, n_max: u64, precision: Precision) -> Result<Option<CircleWitness>> {
    if n_max < 4 {
        return Err(Error::InvalidArgument(format!("n_max must be at least 4, got {n_max}")));
    }
    let bits = precision.bits();
    let mu = KernelParam::new(lambda)?.mu_wide(bits);
    let threshold = negativity_threshold(precision);
    for n in (4..=n_max).step_by(4) {
        let w = w_half_wide(&mu, n, precision)?;
        if w < threshold {
            return Ok(Some(CircleWitness { lambda, n, w_half: Real::at_precision(&w, precision) }));
        }
    }
    Ok(None)
}

/// All circulant eigenvalues `w_j` of the equispaced `N`-point circle Gram.
pub fn circle_spectrum(lambda: f64, n: usize, precision: Precision) -> Result<Vec<Wide>> {
    circulant_spectrum_raw(&equispaced_circle_row(n, lambda, precision)?, precision)
}

fn not_psd(lambda: f64, n: usize, precision: Precision, threshold: &Wide) -> Result<bool> {
    let w = circle_spectrum(lambda, n, precision)?;
    Ok(w.iter().any(|x| x < threshold))
}

/// Supremum of the bandwidths at which the equispaced `N`-point Gram has a
/// negative eigenvalue (any `j`, not only `N/2`).
///
/// Walks `λ = 1e−6 · 2^i` upward until the predicate has been true and then
/// turns false, and bisects that bracket to `1e−8`. At tiny `λ` the smallest
/// eigenvalues of large `N` sit below the working precision, so the walk does
/// not require the predicate to hold at its starting point.
pub fn lambda_crit(n: u64, precision: Precision) -> Result<f64> {
    if n == 0 || !n.is_multiple_of(4) {
        return Err(Error::InvalidArgument(format!("N must be a positive multiple of 4, got {n}")));
    }
    let n = n as usize;
    let threshold = negativity_threshold(precision);
    let mut lo = None;
    let mut hi = None;
    let mut lam = BRACKET_START;
    for _ in 0..=MAX_DOUBLINGS {
        if not_psd(lam, n, precision, &threshold)? {
            lo = Some(lam);
        } else if lo.is_some() {
            hi = Some(lam);
            break;
        }
        lam *= 2.0;
    }
    let (Some(mut lo), Some(mut hi)) = (lo, hi) else {
        return Err(Error::NotCertifiable(match lo {
            Some(l) => format!("Gram still not PSD at lambda = {l:e} after {MAX_DOUBLINGS} doublings"),
            None => format!("no negative eigenvalue found for N = {n} on the doubling grid"),
        }));
    };
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if not_psd(mid, n, precision, &threshold)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaProfileRow {
    pub n: u64,
    pub lambda_crit: f64,
}

pub fn lambda_profile(ns: &[u64], precision: Precision) -> Result<Vec<LambdaProfileRow>> {
    ns.par_iter()
        .map(|&n| Ok(LambdaProfileRow { n, lambda_crit: lambda_crit(n, precision)? }))
        .collect()
}

/// Why a bandwidth is outside `Λ⁺(S¹)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonPdEvidence {
    /// `λ` itself has a circle witness.
    Direct { witness: CircleWitness },
    /// `kλ` has a witness; closure of `Λ⁺` under addition then excludes `λ`.
    Addition { k: u64, witness: CircleWitness },
}

/// Direct witness for `λ`, else the smallest `k ≤ k_max` such that `kλ` has one.
pub fn non_pd_evidence(lambda: f64, n_max: u64, k_max: u64, precision: Precision) -> Result<Option<NonPdEvidence>> {
    if let Some(witness) = find_witness_n(lambda, n_max, precision)? {
        return Ok(Some(NonPdEvidence::Direct { witness }));
    }
    for k in 2..=k_max {
        if let Some(witness) = find_witness_n(k as f64 * lambda, n_max, precision)? {
            return Ok(Some(NonPdEvidence::Addition { k, witness }));
        }
    }
    Ok(None)
}

/// `N` when `points` are `2πk/N`, `k = 0..N`, in order.
fn equispaced_order(points: &[Point]) -> Option<usize> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let step = std::f64::consts::TAU / n as f64;
    points
        .iter()
        .enumerate()
        .all(|(k, p)| p.as_angle().is_some_and(|a| (a.to_f64() - step * k as f64).abs() <= 1e-12))
        .then_some(n)
}

/// Packages the most negative eigen-direction of the Gram as a certificate.
///
/// Equispaced circle configurations use the circulant spectrum and an exact
/// Fourier-mode eigenvector at `precision`; every other input uses Jacobi
/// and inverse iteration in double precision.
pub fn build_certificate(
    space: &SpaceDescriptor,
    lambda: f64,
    points: &[Point],
    precision: Precision,
) -> Result<WitnessCertificate> {
    space.validate()?;
    let param = KernelParam::new(lambda)?;
    for (i, p) in points.iter().enumerate() {
        validate_point(space, p).map_err(|e| Error::InvalidPoint(format!("points[{i}]: {e}")))?;
    }
    let circle_n = match *space {
        SpaceDescriptor::Circle { scale } => equispaced_order(points).map(|n| (n, scale)),
        _ => None,
    };
    let (points, coefficients, min_eigenvalue, method, precision) = match circle_n {
        Some((n, scale)) => {
            let w = circle_spectrum(lambda * scale * scale, n, precision)?;
            let (j, min) = w
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
                .expect("n >= 2");
            let threshold = certify_threshold(n, precision);
            if min.to_f64() >= threshold {
                return Err(refusal(min.to_f64(), threshold));
            }
            let coefficients: Vec<Real> =
                fourier_mode(n, j, precision.bits()).iter().map(|c| Real::at_precision(c, precision)).collect();
            let min = Real::at_precision(min, precision);
            (circle_equispaced_wide(n, precision)?, coefficients, min, SpectrumMethod::Circulant, precision)
        }
        None => {
            let k = gram(space, points, param)?;
            let report = jacobi_eigenvalues(&k.entries)?;
            let min = report.min_f64();
            let threshold = certify_threshold(points.len(), Precision::DOUBLE);
            if min >= threshold {
                return Err(refusal(min, threshold));
            }
            let v = min_eigenvector(&k.entries, min)?;
            let coefficients: Vec<Real> = v.iter().map(|&x| Real::F64(x)).collect();
            (points.to_vec(), coefficients, Real::F64(min), SpectrumMethod::Jacobi, Precision::DOUBLE)
        }
    };
    let quad_form = quadratic_form(space, lambda, &points, &coefficients, precision)?;
    let q = quad_form.to_f64();
    if q.is_nan() || q >= 0.0 || q < min_eigenvalue.to_f64() - 1e-12 {
        return Err(Error::NotCertifiable(format!(
            "quadratic form {q:e} inconsistent with minimum eigenvalue {:e}",
            min_eigenvalue.to_f64()
        )));
    }
    Ok(WitnessCertificate {
        schema_version: SCHEMA_VERSION.into(),
        space: *space,
        lambda,
        points,
        coefficients,
        quad_form,
        min_eigenvalue,
        method,
        precision_digits: precision.digits(),
        transfer: None,
    })
}

fn refusal(min: f64, threshold: f64) -> Error {
    Error::NotCertifiable(format!("minimum eigenvalue {min:e} is not below {threshold:e}"))
}

/// Scans for a witness at `λ·s²` on the unit circle and certifies the
/// corresponding equispaced configuration on `Circle{s}` at `λ`.
pub fn circle_certificate(
    scale: f64,
    lambda: f64,
    n_max: u64,
    precision: Precision,
) -> Result<Option<WitnessCertificate>> {
    let space = SpaceDescriptor::Circle { scale };
    space.validate()?;
    let Some(w) = find_witness_n(lambda * scale * scale, n_max, precision)? else {
        return Ok(None);
    };
    let points = circle_equispaced_wide(w.n as usize, precision)?;
    build_certificate(&space, lambda, &points, precision).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::verify_certificate;
    use crate::metric::circle_equispaced;
    use crate::theta::{bound_rhs_wide, leading_term};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn p(d: u32) -> Precision {
        Precision::new(d).unwrap()
    }

    fn mu(lambda: f64) -> f64 {
        4.0 * PI * PI * lambda
    }

    #[test]
    fn w_half_examples() {
        let a = (-0.1 * PI * PI / 4.0).exp();
        let w = w_half(mu(0.1), 4, p(30)).unwrap().to_f64();
        assert_abs_diff_eq!(w, 1.0 - 2.0 * a + a.powi(4), epsilon = 1e-15);
        assert_abs_diff_eq!(w, -0.189_979_622_241_450_6, epsilon = 1e-15);
        for m in [0.5, 7.0, 60.0] {
            let w = w_half(m, 4, p(30)).unwrap().to_f64();
            assert_abs_diff_eq!(w, 1.0 - 2.0 * (-m / 16.0).exp() + (-m / 4.0).exp(), epsilon = 1e-15);
        }
        // mpmath, 50 digits
        let w = w_half_wide(&KernelParam::new(1.0).unwrap().mu_wide(p(40).bits()), 20, p(40)).unwrap();
        assert_abs_diff_eq!(w.to_f64(), -3.994_216_913_201_377e-5, epsilon = 1e-15);
        assert!(w_half(1.0, 6, p(30)).is_err());
    }

    #[test]
    fn witness_scan_examples() {
        let w = find_witness_n(0.1, 64, p(30)).unwrap().unwrap();
        assert_eq!(w.n, 4);
        let w = find_witness_n(0.3, 64, p(30)).unwrap().unwrap();
        assert_eq!(w.n, 8);
        assert_abs_diff_eq!(w.w_half.to_f64(), -0.034_519_916_9, epsilon = 1e-9);
        let w = find_witness_n(1.0, 40, p(40)).unwrap().unwrap();
        assert_eq!(w.n, 16);
        assert_abs_diff_eq!(w.w_half.to_f64(), -4.357_445e-5, epsilon = 1e-10);
        let w12 = w_half(mu(1.0), 12, p(40)).unwrap().to_f64();
        assert!(w12 > 0.0);
        assert!(find_witness_n(1.0, 12, p(40)).unwrap().is_none());
        assert!(find_witness_n(1.0, 3, p(40)).is_err());
    }

    #[test]
    fn w_half_matches_circulant_and_jacobi() {
        for lambda in [0.05, 0.1, 0.3, 1.0] {
            for n in (4..=32).step_by(4) {
                let spectrum = circle_spectrum(lambda, n, p(30)).unwrap();
                let wh = w_half(mu(lambda), n as u64, p(30)).unwrap();
                assert!((&spectrum[n / 2] - &wh).abs().to_f64() < 1e-12);
                let k = gram(&SpaceDescriptor::UNIT_CIRCLE, &circle_equispaced(n).unwrap(), KernelParam::new(lambda).unwrap())
                    .unwrap();
                let jac = jacobi_eigenvalues(&k.entries).unwrap().values_f64();
                let target = wh.to_f64();
                assert!(jac.iter().any(|x| (x - target).abs() < 1e-9), "λ={lambda} N={n}");
            }
        }
    }

    #[test]
    fn bound_chain_and_threshold() {
        for lambda in [0.02, 0.1, 0.3, 1.0, 2.0] {
            let bits = p(40).bits();
            let m = KernelParam::new(lambda).unwrap().mu_wide(bits);
            for n in [4, 8, 12, 20, 40] {
                let w = w_half_wide(&m, n, p(40)).unwrap();
                let b = bound_rhs_wide(&m, n, p(40)).unwrap();
                assert!(w <= &b + &p(40).epsilon_shifted(5), "λ={lambda} N={n}");
            }
        }
        for m in [1.5, 1.99, 2.01, 3.0] {
            assert_eq!(leading_term(m, 100) < 0.0, m > 2.0);
        }
    }

    #[test]
    fn lambda_crit_examples() {
        let l4 = lambda_crit(4, p(30)).unwrap();
        // a³ + a² + a = 1, λ = −4 ln a / π²
        assert_abs_diff_eq!(l4, 0.246_971_545_6, epsilon = 1e-7);
        let l8 = lambda_crit(8, p(30)).unwrap();
        assert_abs_diff_eq!(l8, 0.547_315_5, epsilon = 1e-6);
        assert!(l8 >= l4);
        for n in [4, 8, 12] {
            let w = circle_spectrum(1e6, n, p(30)).unwrap();
            assert!(w.iter().all(|x| !x.is_negative()));
        }
        assert!(lambda_crit(6, p(30)).is_err());
    }

    #[test]
    fn certificates_from_both_routes() {
        let pts = circle_equispaced(4).unwrap();
        for prec in [Precision::DOUBLE, p(30)] {
            let c = build_certificate(&SpaceDescriptor::UNIT_CIRCLE, 0.1, &pts, prec).unwrap();
            assert_eq!(c.method, SpectrumMethod::Circulant);
            assert_abs_diff_eq!(c.quad_form.to_f64(), -0.189_979_622_241_450_6, epsilon = 1e-15);
            let c0 = c.coefficients[0].to_f64();
            for (k, ck) in c.coefficients.iter().enumerate() {
                assert_abs_diff_eq!(ck.to_f64(), if k % 2 == 0 { c0 } else { -c0 }, epsilon = 1e-15);
            }
            verify_certificate(&c).unwrap();
        }
        let c = circle_certificate(1.0, 0.3, 64, p(30)).unwrap().unwrap();
        assert_eq!(c.order(), 8);
        assert_abs_diff_eq!(c.quad_form.to_f64(), -0.034_519_916_9, epsilon = 1e-9);
        verify_certificate(&c).unwrap();

        // Non-equispaced circle input: Jacobi route.
        let mut pts = circle_equispaced(8).unwrap();
        pts.swap(1, 2);
        let c = build_certificate(&SpaceDescriptor::UNIT_CIRCLE, 0.3, &pts, p(30)).unwrap();
        assert_eq!(c.method, SpectrumMethod::Jacobi);
        assert!(c.quad_form.to_f64() >= c.min_eigenvalue.to_f64() - 1e-12);
        verify_certificate(&c).unwrap();
    }

    #[test]
    fn refuses_positive_definite_input() {
        let pts = circle_equispaced(4).unwrap();
        let err = build_certificate(&SpaceDescriptor::UNIT_CIRCLE, 2.0, &pts, p(30)).unwrap_err();
        assert!(matches!(err, Error::NotCertifiable(_)));
        let e3 = SpaceDescriptor::Euclidean { n: 3 };
        let pts = crate::metric::sample_points(&e3, 1, 6).unwrap();
        assert!(matches!(build_certificate(&e3, 1.0, &pts, Precision::DOUBLE), Err(Error::NotCertifiable(_))));
    }

    #[test]
    fn wide_certificate_at_large_lambda() {
        let c = circle_certificate(1.0, 4.0, 200, p(40)).unwrap().unwrap();
        assert!(c.quad_form.to_f64() < 0.0);
        verify_certificate(&c).unwrap();
    }

    #[test]
    fn evidence_report() {
        match non_pd_evidence(0.1, 64, 8, p(30)).unwrap().unwrap() {
            NonPdEvidence::Direct { witness } => assert_eq!(witness.n, 4),
            other => panic!("{other:?}"),
        }
        match non_pd_evidence(0.1, 4, 8, p(30)).unwrap() {
            Some(NonPdEvidence::Direct { .. }) => {}
            other => panic!("{other:?}"),
        }
        // At λ = 1e−26 the N = 4 eigenvalue −λπ²/2 sits inside the 30-digit
        // noise band; a multiple of λ clears it.
        match non_pd_evidence(1e-26, 64, 8, p(30)).unwrap() {
            Some(NonPdEvidence::Addition { k, witness }) => {
                assert!((2..=3).contains(&k), "{k}");
                assert_eq!(witness.n, 4);
            }
            other => panic!("{other:?}"),
        }
    }
}
