//! Witness certificates and their verifier.
//!
//! A certificate is self-contained: space, bandwidth, points and a
//! coefficient vector `c`. Anyone can recompute `cᵀKc` from those fields
//! alone; the stored `quad_form` is only a claim to be checked.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gram::{gram, KernelParam};
use crate::metric::{circle_distance_wide, validate_point, Point, SpaceDescriptor};
use crate::spectral::{psd_tolerance, SpectrumMethod, CERTIFY_FACTOR};
use crate::wide::{Neumaier, Precision, Real, Wide, WideSum};
use crate::SCHEMA_VERSION;

/// Relative agreement required between stored and recomputed `cᵀKc`.
pub const VERIFY_REL_TOL: f64 = 1e-12;

/// How a certificate was carried over from a circle certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub embedding: String,
    pub source_space: SpaceDescriptor,
    pub source_lambda: f64,
    /// Bandwidth on the unit circle whose Gram equals this certificate's Gram.
    pub unit_circle_lambda: f64,
    pub source_quad_form: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessCertificate {
    pub schema_version: String,
    pub space: SpaceDescriptor,
    pub lambda: f64,
    pub points: Vec<Point>,
    pub coefficients: Vec<Real>,
    /// `cᵀKc`; negative for a genuine witness.
    pub quad_form: Real,
    pub min_eigenvalue: Real,
    pub method: SpectrumMethod,
    pub precision_digits: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<Transfer>,
}

impl WitnessCertificate {
    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn precision(&self) -> Result<Precision> {
        Precision::new(self.precision_digits)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("certificate: {e}")))
    }
}

/// The violation a certificate must exhibit: ten times the PSD tolerance,
/// `1e−10 · N` in double precision and `10^(−d+5) · N` at `d` digits.
pub fn certify_threshold(order: usize, precision: Precision) -> f64 {
    if precision.is_double() {
        -CERTIFY_FACTOR * psd_tolerance(order, 1.0)
    } else {
        -CERTIFY_FACTOR * order as f64 * 10f64.powi(5 - precision.digits() as i32)
    }
}

/// Recomputes `cᵀKc` from raw data at `precision`.
///
/// Wide evaluation is available on the circle (the only space whose
/// witnesses need it); elsewhere the double-precision Gram is used.
pub fn quadratic_form(
    space: &SpaceDescriptor,
    lambda: f64,
    points: &[Point],
    coefficients: &[Real],
    precision: Precision,
) -> Result<Real> {
    if points.len() != coefficients.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} points but {} coefficients",
            points.len(),
            coefficients.len()
        )));
    }
    let param = KernelParam::new(lambda)?;
    if precision.is_double() {
        let k = gram(space, points, param)?;
        let c: Vec<f64> = coefficients.iter().map(Real::to_f64).collect();
        let mut acc = Neumaier::new();
        for i in 0..c.len() {
            for j in 0..c.len() {
                acc.add(c[i] * c[j] * k.entries[(i, j)]);
            }
        }
        return Ok(Real::F64(acc.total()));
    }
    let SpaceDescriptor::Circle { scale } = *space else {
        return Err(Error::InvalidArgument(format!(
            "{precision:?}-digit evaluation is only available on the circle, not {space}"
        )));
    };
    for (i, p) in points.iter().enumerate() {
        validate_point(space, p).map_err(|e| Error::InvalidPoint(format!("points[{i}]: {e}")))?;
    }
    let bits = precision.bits();
    let scale = Wide::from_f64(scale, bits);
    let lam = Wide::from_f64(lambda, bits);
    let angles: Vec<Wide> = points.iter().map(|p| p.as_angle().expect("validated").to_wide(bits)).collect();
    let c: Vec<Wide> = coefficients.iter().map(|x| x.to_wide(bits)).collect();
    let mut acc = WideSum::new(bits);
    for i in 0..c.len() {
        acc.add(&c[i].square());
        for j in (i + 1)..c.len() {
            let d = circle_distance_wide(&scale, &angles[i], &angles[j]);
            let kij = (-(&lam * &d.square())).exp();
            acc.add(&(&(&c[i] * &c[j]) * &kij).mul_i64(2));
        }
    }
    Ok(Real::at_precision(&acc.total(), precision))
}

/// Re-derives the violation from the certificate's raw fields.
///
/// Succeeds iff the recomputed `cᵀKc` is negative and agrees with the
/// stored value to `1e-12` relative.
pub fn verify_certificate(cert: &WitnessCertificate) -> Result<()> {
    if cert.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema(cert.schema_version.clone()));
    }
    let precision = cert.precision()?;
    cert.space.validate()?;
    for (i, p) in cert.points.iter().enumerate() {
        validate_point(&cert.space, p).map_err(|e| Error::InvalidPoint(format!("points[{i}]: {e}")))?;
    }
    let recomputed = quadratic_form(&cert.space, cert.lambda, &cert.points, &cert.coefficients, precision)?;
    let bits = precision.bits().max(128);
    let (got, stored) = (recomputed.to_wide(bits), cert.quad_form.to_wide(bits));
    if !got.is_negative() {
        return Err(Error::Mismatch(format!(
            "recomputed value {} is not negative",
            got.to_decimal(precision.digits())
        )));
    }
    if !stored.is_negative() {
        return Err(Error::Mismatch(format!(
            "recomputed value negative, stored positive ({})",
            stored.to_decimal(precision.digits())
        )));
    }
    let diff = (&got - &stored).abs();
    let allowed = stored.abs() * Wide::from_f64(VERIFY_REL_TOL, bits);
    if diff > allowed {
        return Err(Error::Mismatch(format!(
            "recomputed {} differs from stored {} by more than 1e-12 relative",
            got.to_decimal(precision.digits()),
            stored.to_decimal(precision.digits())
        )));
    }
    Ok(())
}
