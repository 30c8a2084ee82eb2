//! Isometric embeddings of circles and transfer of circle witnesses
//! through them.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificate::{quadratic_form, verify_certificate, Transfer, WitnessCertificate, VERIFY_REL_TOL};
use crate::error::{Error, Result};
use crate::metric::{circle_distance, distance_unchecked, validate_point, GrassmannMetric, Point, SpaceDescriptor};
use crate::wide::{Precision, Real};
use crate::witness::circle_certificate;

const ORTHO_TOL: f64 = 1e-10;
const DIRECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingKind {
    /// `θ ↦ (cos θ, sin θ, 0, …, 0)`.
    GreatCircle,
    /// `θ ↦ span(cos θ/2, sin θ/2, 0, …, 0)`.
    ProjectiveLine,
    /// `θ ↦ span{cos(θ/2) u₁ + sin(θ/2) v, u₂, …, u_k}`.
    GrassmannCircle { base: DMatrix<f64>, direction: DVector<f64> },
    /// `θ ↦ (θ, 0)`.
    FlatTorus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMap {
    pub source: SpaceDescriptor,
    pub target: SpaceDescriptor,
    /// Scale of the source circle.
    pub scale: f64,
    pub kind: EmbeddingKind,
}

fn planar(dim: usize, x: f64, y: f64) -> DVector<f64> {
    let mut v = DVector::zeros(dim);
    v[0] = x;
    v[1] = y;
    v
}

pub fn great_circle(n: usize) -> Result<EmbeddingMap> {
    if n < 1 {
        return Err(Error::InvalidArgument("sphere dimension must be at least 1".into()));
    }
    Ok(EmbeddingMap {
        source: SpaceDescriptor::Circle { scale: 1.0 },
        target: SpaceDescriptor::Sphere { n },
        scale: 1.0,
        kind: EmbeddingKind::GreatCircle,
    })
}

pub fn projective_line(n: usize) -> Result<EmbeddingMap> {
    if n < 1 {
        return Err(Error::InvalidArgument("projective dimension must be at least 1".into()));
    }
    Ok(EmbeddingMap {
        source: SpaceDescriptor::Circle { scale: 0.5 },
        target: SpaceDescriptor::Projective { n },
        scale: 0.5,
        kind: EmbeddingKind::ProjectiveLine,
    })
}

/// Rotates the first base column towards `direction`; needs `direction`
/// orthogonal to every base column.
pub fn grassmann_circle(k: usize, n: usize, base: DMatrix<f64>, direction: DVector<f64>) -> Result<EmbeddingMap> {
    if !(1 <= k && k < n) {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k < n for an orthogonal direction, got k={k}, n={n}"
        )));
    }
    if base.shape() != (n, k) || direction.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "base must be {n}x{k} and direction of length {n}, got {}x{} and {}",
            base.nrows(),
            base.ncols(),
            direction.len()
        )));
    }
    if (base.transpose() * &base - DMatrix::identity(k, k)).amax() > ORTHO_TOL {
        return Err(Error::InvalidPoint("base columns not orthonormal".into()));
    }
    if (direction.norm() - 1.0).abs() > ORTHO_TOL {
        return Err(Error::InvalidPoint("direction is not a unit vector".into()));
    }
    let overlap = (base.transpose() * &direction).amax();
    if overlap > DIRECTION_TOL {
        return Err(Error::InvalidPoint(format!("direction not orthogonal to base (max inner product {overlap:e})")));
    }
    Ok(EmbeddingMap {
        source: SpaceDescriptor::Circle { scale: 0.5 },
        target: SpaceDescriptor::Grassmannian { k, n, metric: GrassmannMetric::PrincipalAngle },
        scale: 0.5,
        kind: EmbeddingKind::GrassmannCircle { base, direction },
    })
}

/// `grassmann_circle` with base `e₁, …, e_k` and direction `e_{k+1}`.
pub fn grassmann_circle_standard(k: usize, n: usize) -> Result<EmbeddingMap> {
    if !(1 <= k && k < n) {
        return Err(Error::InvalidArgument(format!("need 1 <= k < n, got k={k}, n={n}")));
    }
    let base = DMatrix::from_fn(n, k, |i, j| if i == j { 1.0 } else { 0.0 });
    let direction = DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 });
    grassmann_circle(k, n, base, direction)
}

pub fn flat_torus(scale: f64) -> Result<EmbeddingMap> {
    let source = SpaceDescriptor::Circle { scale };
    source.validate()?;
    Ok(EmbeddingMap { source, target: SpaceDescriptor::FlatTorus { scale }, scale, kind: EmbeddingKind::FlatTorus })
}

/// The provided embedding of a circle into `target`.
pub fn embedding_for(target: &SpaceDescriptor) -> Result<EmbeddingMap> {
    target.validate()?;
    match *target {
        SpaceDescriptor::Sphere { n } => great_circle(n),
        SpaceDescriptor::Projective { n } => projective_line(n),
        SpaceDescriptor::Grassmannian { k, n, metric: GrassmannMetric::PrincipalAngle } => {
            grassmann_circle_standard(k, n)
        }
        SpaceDescriptor::FlatTorus { scale } => flat_torus(scale),
        other => Err(Error::InvalidArgument(format!("no circle embedding is provided for {other}"))),
    }
}

impl EmbeddingMap {
    pub fn label(&self) -> String {
        let kind = match self.kind {
            EmbeddingKind::GreatCircle => "great_circle",
            EmbeddingKind::ProjectiveLine => "projective_line",
            EmbeddingKind::GrassmannCircle { .. } => "grassmann_circle",
            EmbeddingKind::FlatTorus => "flat_torus",
        };
        format!("{kind}:{}", self.target)
    }

    fn ambient(&self) -> usize {
        match self.target {
            SpaceDescriptor::Sphere { n } | SpaceDescriptor::Projective { n } => n + 1,
            _ => 2,
        }
    }

    /// Image of the source angle `theta`.
    pub fn apply(&self, theta: f64) -> Point {
        let h = 0.5 * theta;
        match &self.kind {
            EmbeddingKind::GreatCircle => Point::Vector(planar(self.ambient(), theta.cos(), theta.sin())),
            EmbeddingKind::ProjectiveLine => Point::Vector(planar(self.ambient(), h.cos(), h.sin())),
            EmbeddingKind::GrassmannCircle { base, direction } => {
                let mut m = base.clone();
                let first = base.column(0) * h.cos() + direction * h.sin();
                m.set_column(0, &first);
                Point::Matrix(m)
            }
            EmbeddingKind::FlatTorus => Point::vector(&[theta, 0.0]),
        }
    }
}

/// `max |d_target(ι(a), ι(b)) − d_source(a, b)|` over `pair_count` seeded angle pairs.
pub fn verify_isometry(map: &EmbeddingMap, pair_count: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pair_count {
        let (a, b) = (rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
        let (pa, pb) = (map.apply(a), map.apply(b));
        validate_point(&map.target, &pa)?;
        validate_point(&map.target, &pb)?;
        let dt = distance_unchecked(&map.target, &pa, &pb)?;
        worst = worst.max((dt - circle_distance(map.scale, a, b)).abs());
    }
    Ok(worst)
}

/// Pushes a circle certificate through `map`: same coefficients, same `λ`,
/// points `ι(θ_i)`. The target Gram equals the source Gram entrywise, so the
/// quadratic form must agree to `1e-12` relative.
pub fn transfer_witness(cert: &WitnessCertificate, map: &EmbeddingMap) -> Result<WitnessCertificate> {
    let SpaceDescriptor::Circle { scale } = cert.space else {
        return Err(Error::InvalidArgument(format!("source certificate must live on a circle, not {}", cert.space)));
    };
    if scale != map.scale {
        return Err(Error::InvalidArgument(format!(
            "scale mismatch: certificate on circle:{scale}, embedding expects circle:{}",
            map.scale
        )));
    }
    let points: Vec<Point> = cert
        .points
        .iter()
        .map(|p| {
            p.as_angle()
                .map(|a| map.apply(a.to_f64()))
                .ok_or_else(|| Error::InvalidPoint("circle certificate point is not an angle".into()))
        })
        .collect::<Result<_>>()?;
    let quad_form = quadratic_form(&map.target, cert.lambda, &points, &cert.coefficients, Precision::DOUBLE)?;
    let (got, want) = (quad_form.to_f64(), cert.quad_form.to_f64());
    if (got - want).abs() > VERIFY_REL_TOL * want.abs() {
        return Err(Error::Mismatch(format!(
            "target quadratic form {got:e} differs from source {want:e} beyond 1e-12 relative"
        )));
    }
    let out = WitnessCertificate {
        schema_version: cert.schema_version.clone(),
        space: map.target,
        lambda: cert.lambda,
        points,
        coefficients: cert.coefficients.iter().map(|c| Real::F64(c.to_f64())).collect(),
        quad_form,
        min_eigenvalue: Real::F64(cert.min_eigenvalue.to_f64()),
        method: cert.method,
        precision_digits: Precision::DOUBLE.digits(),
        transfer: Some(Transfer {
            embedding: map.label(),
            source_space: cert.space,
            source_lambda: cert.lambda,
            unit_circle_lambda: cert.lambda * scale * scale,
            source_quad_form: cert.quad_form.clone(),
        }),
    };
    verify_certificate(&out)?;
    Ok(out)
}

/// A witness on `target` at `λ`: a circle witness on the embedded circle,
/// transferred through [`embedding_for`].
pub fn space_witness(target: &SpaceDescriptor, lambda: f64, n_max: u64) -> Result<Option<WitnessCertificate>> {
    let map = embedding_for(target)?;
    match circle_certificate(map.scale, lambda, n_max, Precision::DOUBLE)? {
        Some(cert) => transfer_witness(&cert, &map).map(Some),
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{distance, principal_angles};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn great_circle_examples() {
        let m = great_circle(2).unwrap();
        assert_abs_diff_eq!(distance(&m.target, &m.apply(0.0), &m.apply(PI)).unwrap(), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(distance(&m.target, &m.apply(0.0), &m.apply(PI / 2.0)).unwrap(), PI / 2.0, epsilon = 1e-15);
        assert!(verify_isometry(&m, 1000, 1).unwrap() <= 1e-12);
        assert!(great_circle(0).is_err());
    }

    #[test]
    fn projective_examples() {
        let m = projective_line(2).unwrap();
        // Source angles 0 and π are a quarter of the half-scale circle apart: orthogonal lines.
        let d = distance(&m.target, &m.apply(0.0), &m.apply(PI)).unwrap();
        assert_abs_diff_eq!(d, circle_distance(0.5, 0.0, PI), epsilon = 1e-12);
        assert_abs_diff_eq!(d, PI / 2.0, epsilon = 1e-12);
        // Antipodal representatives: the same line.
        let a = m.apply(0.3);
        let flipped = Point::Vector(-a.as_vector().unwrap().clone());
        assert_abs_diff_eq!(distance(&m.target, &a, &flipped).unwrap(), 0.0, epsilon = 1e-12);
        assert!(verify_isometry(&m, 1000, 2).unwrap() <= 1e-12);
    }

    #[test]
    fn grassmann_examples() {
        let m = grassmann_circle_standard(2, 4).unwrap();
        let (a, b) = (m.apply(0.0), m.apply(PI));
        let angles = principal_angles(a.as_matrix().unwrap(), b.as_matrix().unwrap()).unwrap();
        assert_abs_diff_eq!(angles[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(angles[1], PI / 2.0, epsilon = 1e-12);
        assert!(verify_isometry(&m, 1000, 3).unwrap() <= 1e-10);
        let m25 = grassmann_circle_standard(2, 5).unwrap();
        assert!(verify_isometry(&m25, 500, 4).unwrap() <= 1e-10);

        // Gr(1, 2) behaves like the projective line.
        let g12 = grassmann_circle_standard(1, 2).unwrap();
        let p1 = projective_line(1).unwrap();
        for (s, t) in [(0.1, 2.0), (1.0, 5.5), (3.0, 3.1)] {
            let dg = distance(&g12.target, &g12.apply(s), &g12.apply(t)).unwrap();
            let dp = distance(&p1.target, &p1.apply(s), &p1.apply(t)).unwrap();
            assert_abs_diff_eq!(dg, dp, epsilon = 1e-12);
        }

        let base = DMatrix::from_fn(4, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let skew = DVector::from_vec(vec![0.1, 0.0, (1.0f64 - 0.01).sqrt(), 0.0]);
        assert!(grassmann_circle(2, 4, base, skew).is_err());
        assert!(grassmann_circle_standard(3, 3).is_err());
    }

    #[test]
    fn torus_is_isometric() {
        let m = flat_torus(0.7).unwrap();
        assert!(verify_isometry(&m, 500, 5).unwrap() <= 1e-12);
    }

    #[test]
    fn wrong_scale_is_detected() {
        let mut m = great_circle(3).unwrap();
        m.scale = 0.5;
        m.source = SpaceDescriptor::Circle { scale: 0.5 };
        let dev = verify_isometry(&m, 1000, 6).unwrap();
        assert!(dev > 1.0, "{dev}");
    }

    #[test]
    fn transfer_examples() {
        let cert = circle_certificate(1.0, 0.1, 64, Precision::DOUBLE).unwrap().unwrap();
        let t = transfer_witness(&cert, &great_circle(2).unwrap()).unwrap();
        assert_abs_diff_eq!(t.quad_form.to_f64(), -0.189_979_622_241_450_6, epsilon = 1e-12);
        verify_certificate(&t).unwrap();
        assert!(transfer_witness(&cert, &projective_line(2).unwrap()).is_err());

        let half = circle_certificate(0.5, 0.1, 64, Precision::DOUBLE).unwrap().unwrap();
        let t = transfer_witness(&half, &projective_line(2).unwrap()).unwrap();
        let tr = t.transfer.as_ref().unwrap();
        assert_abs_diff_eq!(tr.unit_circle_lambda, 0.025, epsilon = 1e-15);
        assert_eq!(t.lambda, 0.1);
        verify_certificate(&t).unwrap();
    }

    #[test]
    fn space_witnesses_exist() {
        for target in ["sphere:2", "sphere:5", "projective:2", "grassmann:2,4", "torus:1"] {
            let target: SpaceDescriptor = target.parse().unwrap();
            let cert = space_witness(&target, 0.4, 64).unwrap().expect("witness");
            verify_certificate(&cert).unwrap();
        }
        assert!(space_witness(&"euclidean:3".parse().unwrap(), 0.4, 64).is_err());
    }
}
