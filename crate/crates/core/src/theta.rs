//! Partial theta sums `S_r(N) = Σ_{k≥0} (−1)^k exp(−μk²/N² − rk/N)` and
//! the identities that bound the alternating circle eigenvalue by them.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::wide::{Precision, Wide, WideSum};

/// Extra bits for the multiplicative term recurrence.
const RECURRENCE_GUARD: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialThetaQuery {
    pub mu: f64,
    pub r: f64,
    pub n: u64,
    pub precision: Precision,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartialThetaResult {
    pub value: Wide,
    /// Number of series terms summed (always even).
    pub terms_used: u64,
    /// First omitted term, which bounds the tail of the alternating series.
    pub truncation_bound: Wide,
    pub precision_digits: u32,
}

impl PartialThetaQuery {
    fn check(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidArgument(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidArgument(format!("r must be nonnegative, got {}", self.r)));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("N must be positive".into()));
        }
        Ok(())
    }
}

pub fn partial_theta(q: PartialThetaQuery) -> Result<PartialThetaResult> {
    q.check()?;
    let bits = q.precision.bits();
    partial_theta_wide(&Wide::from_f64(q.mu, bits), &Wide::from_f64(q.r, bits), q.n, q.precision)
}

/// `S_r(N)` with `μ` and `r` already in wide form.
///
/// Terms are summed in pairs `t_{2m} − t_{2m+1} ≥ 0`, so the partial sums
/// increase monotonically; summation stops once the next term falls below
/// `10^(−digits−5)`.
pub fn partial_theta_wide(mu: &Wide, r: &Wide, n: u64, precision: Precision) -> Result<PartialThetaResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    if mu.to_f64().is_nan() || mu.to_f64() <= 0.0 || r.is_negative() {
        return Err(Error::InvalidArgument("need mu > 0 and r >= 0".into()));
    }
    let bits = precision.bits() + RECURRENCE_GUARD;
    let (mu, r) = (mu.with_bits(bits), r.with_bits(bits));
    let nw = Wide::from_i64(n as i64, bits);
    let nn = nw.square();
    let stop = precision.epsilon_shifted(-5).with_bits(bits);

    // t_{k+1} = t_k · g_k,  g_k = exp(−μ(2k+1)/N² − r/N),  g_{k+1} = g_k · exp(−2μ/N²).
    let mut g = (-(&mu / &nn) - &r / &nw).exp();
    let g_step = (-(mu.mul_i64(2) / nn)).exp();
    let mut t = Wide::one(bits);
    let mut acc = WideSum::new(bits);
    let mut k: u64 = 0;
    loop {
        if t < stop {
            break;
        }
        let even = t.clone();
        t = &t * &g;
        g = &g * &g_step;
        let odd = t.clone();
        t = &t * &g;
        g = &g * &g_step;
        acc.add(&(even - odd));
        k += 2;
    }
    Ok(PartialThetaResult {
        value: acc.total().with_bits(precision.bits()),
        terms_used: k,
        truncation_bound: t.with_bits(precision.bits()),
        precision_digits: precision.digits(),
    })
}

fn require_mod4(n: u64) -> Result<()> {
    if n == 0 || !n.is_multiple_of(4) {
        return Err(Error::InvalidArgument(format!("N must be a positive multiple of 4, got {n}")));
    }
    Ok(())
}

/// `Σ_{k=0}^{N/2−1} (−1)^k exp(−μk²/N²)`, compensated.
pub(crate) fn finite_alternating_sum(mu: &Wide, n: u64, bits: usize) -> Wide {
    let nn = Wide::from_i64((n * n) as i64, bits);
    let mut acc = WideSum::new(bits);
    for k in 0..n / 2 {
        let term = (-(mu * &Wide::from_i64((k * k) as i64, bits)) / nn.clone()).exp();
        if k % 2 == 0 {
            acc.add(&term);
        } else {
            acc.add(&-term);
        }
    }
    acc.total()
}

/// `|LHS − RHS|` of
/// `S_0(N) = (*) + e^{−μ/4} − e^{−μ/4} e^{−μ/N²−μ/N} + e^{−μ/4} e^{−4μ/N²−2μ/N} S_{μ(1+4/N)}(N)`,
/// where `(*)` is the finite alternating sum over `k < N/2`.
pub fn tail_decomposition_check(mu: f64, n: u64, precision: Precision) -> Result<Wide> {
    require_mod4(n)?;
    let bits = precision.bits();
    tail_decomposition_check_wide(&Wide::from_f64(mu, bits), n, precision)
}

pub fn tail_decomposition_check_wide(mu: &Wide, n: u64, precision: Precision) -> Result<Wide> {
    require_mod4(n)?;
    let bits = precision.bits();
    let mu = mu.with_bits(bits);
    let nw = Wide::from_i64(n as i64, bits);
    let nn = nw.square();
    let zero = Wide::zero(bits);

    let lhs = partial_theta_wide(&mu, &zero, n, precision)?.value;
    let head = finite_alternating_sum(&mu, n, bits);
    let quarter = (-(mu.div_i64(4))).exp();
    let first = (-(&mu / &nn) - &mu / &nw).exp();
    let second = (-(mu.mul_i64(4) / nn.clone()) - mu.mul_i64(2) / nw.clone()).exp();
    let shifted_r = &mu * &(Wide::one(bits) + Wide::from_i64(4, bits) / nw);
    let tail = partial_theta_wide(&mu, &shifted_r, n, precision)?.value;

    let rhs = head + &quarter - &quarter * &first + &(&quarter * &second) * &tail;
    Ok((lhs - rhs).abs())
}

/// Right-hand side of the upper bound on the alternating eigenvalue:
/// `−1 + 2S_0 + e^{−μ/4}(−1 + 2e^{−μ/N²−μ/N} − 2e^{−4μ/N²−2μ/N} S_0)`.
pub fn bound_rhs(mu: f64, n: u64, precision: Precision) -> Result<Wide> {
    let bits = precision.bits();
    bound_rhs_wide(&Wide::from_f64(mu, bits), n, precision)
}

pub fn bound_rhs_wide(mu: &Wide, n: u64, precision: Precision) -> Result<Wide> {
    require_mod4(n)?;
    let bits = precision.bits();
    let mu = mu.with_bits(bits);
    let nw = Wide::from_i64(n as i64, bits);
    let nn = nw.square();
    let one = Wide::one(bits);
    let s0 = partial_theta_wide(&mu, &Wide::zero(bits), n, precision)?.value;
    let quarter = (-(mu.div_i64(4))).exp();
    let first = (-(&mu / &nn) - &mu / &nw).exp();
    let second = (-(mu.mul_i64(4) / nn.clone()) - mu.mul_i64(2) / nw.clone()).exp();
    let inner = -one.clone() + first.mul_i64(2) - (&second * &s0).mul_i64(2);
    Ok(-one + s0.mul_i64(2) + &quarter * &inner)
}

/// `exp(−μ/4)(2μ − μ²)/N²`.
pub fn leading_term(mu: f64, n: u64) -> f64 {
    (-mu / 4.0).exp() * (2.0 * mu - mu * mu) / (n as f64 * n as f64)
}

pub fn leading_term_wide(mu: &Wide, n: u64) -> Wide {
    let bits = mu.bits();
    let nn = Wide::from_i64((n * n) as i64, bits);
    (-(mu.div_i64(4))).exp() * (mu.mul_i64(2) - mu.square()) / nn
}

/// `((1/2πi) ∂/∂z)^{2a} [1/(1 − e^{2πiz})]` at `z = 1/2`: `1/2` for `a = 0`,
/// and 0 otherwise since `(i/2) tan(πz)` is odd about the evaluation point.
pub fn bringmann_coefficient(a: u32) -> f64 {
    if a == 0 {
        0.5
    } else {
        0.0
    }
}

/// `μ = 4π²λ`.
pub fn mu_of_lambda(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    Ok(4.0 * PI * PI * lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(d: u32) -> Precision {
        Precision::new(d).unwrap()
    }

    fn s(mu: f64, r: f64, n: u64, d: u32) -> PartialThetaResult {
        partial_theta(PartialThetaQuery { mu, r, n, precision: p(d) }).unwrap()
    }

    /// Independent oracle: plain term-by-term double summation until terms vanish.
    fn brute_force(mu: f64, r: f64, n: u64) -> f64 {
        let n = n as f64;
        let mut sum = 0.0;
        for k in 0..100_000 {
            let k = k as f64;
            let t = (-mu * k * k / (n * n) - r * k / n).exp();
            if t == 0.0 {
                break;
            }
            sum += if (k as u64).is_multiple_of(2) { t } else { -t };
        }
        sum
    }

    #[test]
    fn examples() {
        // 50-digit mpmath: S_0(4) = 0.72022014490..., S_0(8) = 0.50118058739...
        assert_abs_diff_eq!(s(20.0, 0.0, 4, 30).value.to_f64(), 0.720_220_144_902_368_1, epsilon = 1e-15);
        assert_abs_diff_eq!(s(20.0, 0.0, 8, 30).value.to_f64(), 0.501_180_587_393_754_8, epsilon = 1e-15);
        let big = s(1e4, 0.0, 1, 45);
        assert!((&big.value - &Wide::one(big.value.bits())).abs() < Wide::pow10(-40, 256));
    }

    #[test]
    fn agrees_with_brute_force() {
        for (mu, r, n) in [(1.0, 0.0, 4), (10.0, 0.1, 16), (40.0, 1.0, 32), (3.0, 10.0, 8), (0.5, 0.0, 64)] {
            let got = s(mu, r, n, 20).value.to_f64();
            assert_abs_diff_eq!(got, brute_force(mu, r, n), epsilon = 1e-12);
        }
    }

    #[test]
    fn truncation_bound_invariant() {
        for (mu, r, n, d) in [(1.0, 0.0, 128, 30), (20.0, 0.0, 4, 60), (40.0, 100.0, 8, 17)] {
            let res = s(mu, r, n, d);
            let cap = Wide::pow10(-(d as i32), 512) * Wide::one(512).max(&res.value.abs());
            assert!(res.truncation_bound <= cap);
            assert_eq!(res.terms_used % 2, 0);
        }
    }

    #[test]
    fn rejects_bad_queries() {
        let q = PartialThetaQuery { mu: 0.0, r: 0.0, n: 4, precision: Precision::DEFAULT };
        assert!(partial_theta(q).is_err());
        assert!(partial_theta(PartialThetaQuery { mu: 1.0, r: -1.0, ..q }).is_err());
        assert!(partial_theta(PartialThetaQuery { mu: 1.0, n: 0, ..q }).is_err());
        assert!(Precision::new(16).is_err());
    }

    #[test]
    fn tail_identity_examples() {
        let tol = |e: i32| Wide::pow10(e, 256);
        assert!(tail_decomposition_check(20.0, 4, p(40)).unwrap() <= tol(-35));
        assert!(tail_decomposition_check(39.478, 20, p(40)).unwrap() <= tol(-35));
        assert!(tail_decomposition_check(1.0, 8, p(30)).unwrap() <= tol(-25));
        assert!(tail_decomposition_check(1.0, 6, p(30)).is_err());
    }

    #[test]
    fn bound_examples() {
        // mpmath: bound_rhs(39.478, 20) = −3.9380062459e−5.
        let b = bound_rhs(39.478, 20, p(40)).unwrap().to_f64();
        assert_abs_diff_eq!(b, -3.938_006_245_905_776e-5, epsilon = 1e-15);
        assert!(bound_rhs(1.0, 10, p(30)).is_err());
        // At μ = 2 the leading coefficient vanishes, so N² · bound → 0.
        let scaled: Vec<f64> = [400u64, 1600]
            .iter()
            .map(|&n| bound_rhs(2.0, n, p(40)).unwrap().to_f64() * (n * n) as f64)
            .collect();
        assert!(scaled[1].abs() < scaled[0].abs() && scaled[1].abs() < 1e-2);
    }

    #[test]
    fn leading_term_examples() {
        for n in [1, 10, 1000] {
            assert_eq!(leading_term(2.0, n), 0.0);
        }
        assert_abs_diff_eq!(leading_term(4.0, 10), (-1f64).exp() * -8.0 / 100.0, epsilon = 1e-18);
        assert_abs_diff_eq!(leading_term(4.0, 10), -0.029_430_355_293_715_39, epsilon = 1e-17);
        assert_abs_diff_eq!(leading_term(1.0, 10), 0.007_788_007_830_714_049, epsilon = 1e-17);
    }

    #[test]
    fn mu_of_lambda_examples() {
        assert_abs_diff_eq!(mu_of_lambda(1.0 / (2.0 * PI * PI)).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mu_of_lambda(1.0).unwrap(), 39.478_417_6, epsilon = 1e-7);
        assert!(mu_of_lambda(0.0).is_err());
    }

    #[test]
    fn bringmann_values() {
        assert_eq!(bringmann_coefficient(0), 0.5);
        assert_eq!(bringmann_coefficient(1), 0.0);
        assert_eq!(bringmann_coefficient(3), 0.0);
    }

    /// Finite-difference cross-check of the closed form: the even central
    /// differences of `h(z) = tan(πz)/2` (imaginary part of the shifted
    /// generating function) vanish at `z = 1`, while odd ones do not.
    #[test]
    fn bringmann_finite_differences() {
        let h = |z: f64| 0.5 * (PI * z).tan();
        let central = |order: u32, step: f64| -> f64 {
            let mut acc = 0.0;
            let mut binom = 1.0;
            for m in 0..=order {
                let x = 1.0 + (order as f64 / 2.0 - m as f64) * step;
                acc += if m % 2 == 0 { binom } else { -binom } * h(x);
                binom = binom * (order - m) as f64 / (m + 1) as f64;
            }
            acc / step.powi(order as i32)
        };
        for a in 1..=3u32 {
            // ((1/2πi)∂)^{2a} = (−1/4π²)^a ∂^{2a}
            let scaled = central(2 * a, 0.05) * (-1.0 / (4.0 * PI * PI)).powi(a as i32);
            assert!(scaled.abs() < 1e-9, "a={a}: {scaled}");
            assert!((scaled - bringmann_coefficient(a)).abs() < 1e-9);
        }
        // g(1/2) = 1/(1 − e^{iπ}) = 1/2
        assert_abs_diff_eq!(1.0 / (1.0 - PI.cos()), bringmann_coefficient(0), epsilon = 1e-16);
        // First derivative is π/2 ≠ 0: the differencing does see odd terms.
        assert_abs_diff_eq!(central(1, 1e-5), PI / 2.0, epsilon = 1e-6);
    }
}
