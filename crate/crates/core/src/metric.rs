//! Metric spaces, point validation and exact distances.

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::spectral::jacobi_eigen;
use crate::stein::stein_divergence;
use crate::wide::{de_f64_lenient, Precision, Real, Wide};

const UNIT_TOL: f64 = 1e-12;
const ORTHO_TOL: f64 = 1e-10;
const SYM_TOL: f64 = 1e-12;
const CLAMP_EXCESS: f64 = 1e-8;
const SPD_SAMPLE_SHIFT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrassmannMetric {
    /// `(Σ θ_i²)^{1/2}` over principal angles.
    #[default]
    PrincipalAngle,
    /// `‖AAᵀ − BBᵀ‖_F`.
    Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpdMetric {
    Frobenius,
    LogEuclidean,
    Stein,
}

/// A metric space and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SpaceDescriptor {
    /// Circle of circumference `2π · scale`, points stored as angles.
    Circle { scale: f64 },
    /// Unit sphere `Sⁿ ⊂ ℝⁿ⁺¹`.
    Sphere { n: usize },
    /// Real projective space `ℝPⁿ`, points are unit representatives in `ℝⁿ⁺¹`.
    Projective { n: usize },
    /// `k`-planes in `ℝⁿ`, points are `n×k` orthonormal representatives.
    Grassmannian {
        k: usize,
        n: usize,
        #[serde(default)]
        metric: GrassmannMetric,
    },
    Spd { n: usize, metric: SpdMetric },
    Euclidean { n: usize },
    /// Flat product `S¹ × S¹` (both factors of circumference `2π · scale`).
    FlatTorus { scale: f64 },
}

impl SpaceDescriptor {
    pub const UNIT_CIRCLE: SpaceDescriptor = SpaceDescriptor::Circle { scale: 1.0 };

    pub fn validate(&self) -> Result<()> {
        use SpaceDescriptor::*;
        let bad = |m: String| Err(Error::InvalidSpace(m));
        match *self {
            Circle { scale } | FlatTorus { scale } if !(scale > 0.0 && scale.is_finite()) => {
                bad(format!("scale must be positive, got {scale}"))
            }
            Grassmannian { k, n, .. } if !(1 <= k && k < n) => bad(format!("Grassmannian needs 1 <= k < n, got k={k}, n={n}")),
            Sphere { n } | Projective { n } | Spd { n, .. } | Euclidean { n } if n < 1 => {
                bad("dimension must be at least 1".into())
            }
            _ => Ok(()),
        }
    }

    pub fn is_circle(&self) -> bool {
        matches!(self, SpaceDescriptor::Circle { .. })
    }
}

impl fmt::Display for SpaceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use SpaceDescriptor::*;
        match self {
            Circle { scale } => write!(f, "circle:{scale}"),
            Sphere { n } => write!(f, "sphere:{n}"),
            Projective { n } => write!(f, "projective:{n}"),
            Grassmannian { k, n, metric: GrassmannMetric::PrincipalAngle } => write!(f, "grassmann:{k},{n}"),
            Grassmannian { k, n, metric: GrassmannMetric::Projection } => write!(f, "grassmann:{k},{n},projection"),
            Spd { n, metric } => {
                let m = match metric {
                    SpdMetric::Frobenius => "frobenius",
                    SpdMetric::LogEuclidean => "log_euclidean",
                    SpdMetric::Stein => "stein",
                };
                write!(f, "spd:{n},{m}")
            }
            Euclidean { n } => write!(f, "euclidean:{n}"),
            FlatTorus { scale } => write!(f, "torus:{scale}"),
        }
    }
}

/// Short form used on the command line: `sphere:3`, `projective:2`,
/// `grassmann:2,4[,projection]`, `spd:3[,log_euclidean|stein]`,
/// `euclidean:5`, `circle[:scale]`, `torus[:scale]`.
impl FromStr for SpaceDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let parts: Vec<&str> = if args.is_empty() { vec![] } else { args.split(',').map(str::trim).collect() };
        let int = |i: usize| -> Result<usize> {
            parts
                .get(i)
                .ok_or_else(|| Error::InvalidSpace(format!("{s}: missing parameter {}", i + 1)))?
                .parse()
                .map_err(|_| Error::InvalidSpace(format!("{s}: parameter {} is not an integer", i + 1)))
        };
        let scale = || -> Result<f64> {
            match parts.first() {
                None => Ok(1.0),
                Some(p) => p.parse().map_err(|_| Error::InvalidSpace(format!("{s}: bad scale"))),
            }
        };
        let space = match name {
            "circle" => SpaceDescriptor::Circle { scale: scale()? },
            "torus" | "flat_torus" => SpaceDescriptor::FlatTorus { scale: scale()? },
            "sphere" => SpaceDescriptor::Sphere { n: int(0)? },
            "projective" => SpaceDescriptor::Projective { n: int(0)? },
            "euclidean" => SpaceDescriptor::Euclidean { n: int(0)? },
            "grassmann" | "grassmannian" => {
                let metric = match parts.get(2).copied() {
                    None | Some("principal_angle") => GrassmannMetric::PrincipalAngle,
                    Some("projection") => GrassmannMetric::Projection,
                    Some(m) => return Err(Error::InvalidSpace(format!("unknown Grassmannian metric {m:?}"))),
                };
                SpaceDescriptor::Grassmannian { k: int(0)?, n: int(1)?, metric }
            }
            "spd" => {
                let metric = match parts.get(1).copied() {
                    None | Some("frobenius") => SpdMetric::Frobenius,
                    Some("log_euclidean") => SpdMetric::LogEuclidean,
                    Some("stein") => SpdMetric::Stein,
                    Some(m) => return Err(Error::InvalidSpace(format!("unknown SPD metric {m:?}"))),
                };
                SpaceDescriptor::Spd { n: int(0)?, metric }
            }
            _ => return Err(Error::InvalidSpace(format!("unknown space {name:?}"))),
        };
        space.validate()?;
        Ok(space)
    }
}

/// A point; the payload shape is fixed by the space it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    /// Circle angle in `[0, 2π)`.
    Angle(Real),
    /// Sphere, projective, Euclidean and flat-torus coordinates.
    Vector(DVector<f64>),
    /// Grassmannian representatives and SPD matrices.
    Matrix(DMatrix<f64>),
}

impl Point {
    pub fn angle(theta: f64) -> Self {
        Point::Angle(Real::F64(theta))
    }

    pub fn vector(xs: &[f64]) -> Self {
        Point::Vector(DVector::from_column_slice(xs))
    }

    /// Matrix from row-major rows.
    pub fn matrix(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Point::Matrix(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn as_angle(&self) -> Option<&Real> {
        match self {
            Point::Angle(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<&DVector<f64>> {
        match self {
            Point::Vector(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            Point::Matrix(m) => Some(m),
            _ => None,
        }
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Point::Angle(a) => a.serialize(s),
            Point::Vector(v) => v.as_slice().serialize(s),
            Point::Matrix(m) => {
                let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
                rows.serialize(s)
            }
        }
    }
}

#[derive(Deserialize)]
struct Lenient(#[serde(deserialize_with = "de_f64_lenient")] f64);

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Scalar(Real),
            Vector(Vec<Lenient>),
            Matrix(Vec<Vec<Lenient>>),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Scalar(r) => Point::Angle(r),
            Raw::Vector(v) => Point::Vector(DVector::from_iterator(v.len(), v.into_iter().map(|x| x.0))),
            Raw::Matrix(rows) => {
                let r = rows.len();
                let c = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|row| row.len() != c) {
                    return Err(serde::de::Error::custom("ragged matrix rows"));
                }
                Point::Matrix(DMatrix::from_fn(r, c, |i, j| rows[i][j].0))
            }
        })
    }
}

fn violation(msg: impl Into<String>) -> Error {
    Error::InvalidPoint(msg.into())
}

fn mismatch(space: &SpaceDescriptor, what: String) -> Error {
    Error::DimensionMismatch(format!("{space}: {what}"))
}

fn check_vector<'a>(space: &SpaceDescriptor, p: &'a Point, len: usize) -> Result<&'a DVector<f64>> {
    let v = p.as_vector().ok_or_else(|| mismatch(space, "expected a coordinate vector".into()))?;
    if v.len() != len {
        return Err(mismatch(space, format!("expected {len} coordinates, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(violation("non-finite coordinate"));
    }
    Ok(v)
}

fn check_matrix<'a>(space: &SpaceDescriptor, p: &'a Point, rows: usize, cols: usize) -> Result<&'a DMatrix<f64>> {
    let m = p.as_matrix().ok_or_else(|| mismatch(space, "expected a matrix".into()))?;
    if m.shape() != (rows, cols) {
        return Err(mismatch(space, format!("expected {rows}x{cols} matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(violation("non-finite entry"));
    }
    Ok(m)
}

/// Checks `p` against the invariants of `space`; a violation names the failed invariant.
pub fn validate_point(space: &SpaceDescriptor, p: &Point) -> Result<()> {
    space.validate()?;
    use SpaceDescriptor::*;
    match *space {
        Circle { .. } => {
            let a = p.as_angle().ok_or_else(|| mismatch(space, "expected an angle".into()))?.to_f64();
            if !(0.0..TAU).contains(&a) {
                return Err(violation(format!("angle {a} outside [0, 2π)")));
            }
        }
        Sphere { n } | Projective { n } => {
            let v = check_vector(space, p, n + 1)?;
            if (v.norm() - 1.0).abs() > UNIT_TOL {
                return Err(violation("norm ≠ 1"));
            }
        }
        Euclidean { n } => {
            check_vector(space, p, n)?;
        }
        FlatTorus { .. } => {
            let v = check_vector(space, p, 2)?;
            if v.iter().any(|a| !(0.0..TAU).contains(a)) {
                return Err(violation("torus angle outside [0, 2π)"));
            }
        }
        Grassmannian { k, n, .. } => {
            let a = check_matrix(space, p, n, k)?;
            let gram = a.transpose() * a - DMatrix::identity(k, k);
            if gram.amax() > ORTHO_TOL {
                return Err(violation("columns not orthonormal"));
            }
        }
        Spd { n, .. } => {
            let a = check_matrix(space, p, n, n)?;
            if (a - a.transpose()).amax() > SYM_TOL * a.amax().max(1.0) {
                return Err(violation("not symmetric"));
            }
            if a.clone().cholesky().is_none() {
                return Err(violation("not positive definite"));
            }
        }
    }
    Ok(())
}

/// Circle distance `s · min(|Δ|, 2π − |Δ|)`.
pub fn circle_distance(scale: f64, a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    scale * d.min(TAU - d)
}

/// Circle distance in wide arithmetic.
pub fn circle_distance_wide(scale: &Wide, a: &Wide, b: &Wide) -> Wide {
    let d = (a - b).abs();
    let other = Wide::two_pi(d.bits()) - &d;
    scale * &d.min(&other)
}

fn unit_vector_angle(p: &DVector<f64>, q: &DVector<f64>, projective: bool) -> Result<f64> {
    let dot = p.dot(q);
    let c = if projective { dot.abs() } else { dot };
    if c.abs() > 1.0 + CLAMP_EXCESS {
        return Err(violation(format!("|⟨p,q⟩| = {} exceeds 1; inputs are not unit vectors", c.abs())));
    }
    // Near ±1 arccos loses half the digits; the chord form is the same function for unit vectors.
    let chord_angle = |chord: f64| 2.0 * (0.5 * chord).min(1.0).asin();
    Ok(if projective {
        if c > 0.9 {
            chord_angle((p - q).norm().min((p + q).norm()))
        } else {
            c.clamp(0.0, 1.0).acos()
        }
    } else if c > 0.9 {
        chord_angle((p - q).norm())
    } else if c < -0.9 {
        PI - chord_angle((p + q).norm())
    } else {
        c.clamp(-1.0, 1.0).acos()
    })
}

fn lex_cmp(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Ordering {
    a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Principal angles between the column spans of two orthonormal `n×k`
/// matrices, ascending in `[0, π/2]`.
///
/// Cosines come from the eigenvalues of `(AᵀB)ᵀ(AᵀB)` and sines from those
/// of `(B − AAᵀB)ᵀ(B − AAᵀB)`; each angle is read off whichever of the two
/// is better conditioned.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let (n, k) = a.shape();
    let space = SpaceDescriptor::Grassmannian { k, n, metric: GrassmannMetric::PrincipalAngle };
    validate_point(&space, &Point::Matrix(a.clone()))?;
    validate_point(&space, &Point::Matrix(b.clone()))?;
    principal_angles_unchecked(a, b)
}

fn principal_angles_unchecked(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let atb = a.transpose() * b;
    let cos2 = jacobi_eigen(&(atb.transpose() * &atb))?.values;
    let resid = b - a * &atb;
    let sin2 = jacobi_eigen(&(resid.transpose() * &resid))?.values;
    let k = cos2.len();
    // cos² ascending ↔ angles descending; sin² ascending ↔ angles ascending.
    Ok((0..k)
        .map(|i| {
            let c2 = cos2[k - 1 - i].clamp(0.0, 1.0);
            let s2 = sin2[i].clamp(0.0, 1.0);
            if c2 >= 0.5 {
                s2.sqrt().asin()
            } else {
                c2.sqrt().acos()
            }
        })
        .collect())
}

/// Matrix logarithm of an SPD matrix through its eigendecomposition.
pub fn spd_log(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = jacobi_eigen(a)?;
    if let Some(&l) = eig.values.first() {
        if l <= 0.0 {
            return Err(violation("not positive definite"));
        }
    }
    let logs = DVector::from_iterator(eig.values.len(), eig.values.iter().map(|l| l.ln()));
    Ok(&eig.vectors * DMatrix::from_diagonal(&logs) * eig.vectors.transpose())
}

/// Distance between two points of `space`.
pub fn distance(space: &SpaceDescriptor, p: &Point, q: &Point) -> Result<f64> {
    validate_point(space, p)?;
    validate_point(space, q)?;
    distance_unchecked(space, p, q)
}

/// Distance for points already known to be valid.
pub(crate) fn distance_unchecked(space: &SpaceDescriptor, p: &Point, q: &Point) -> Result<f64> {
    use SpaceDescriptor::*;
    let vec = |x: &Point| x.as_vector().cloned().ok_or_else(|| mismatch(space, "expected a vector".into()));
    let mat = |x: &Point| x.as_matrix().cloned().ok_or_else(|| mismatch(space, "expected a matrix".into()));
    Ok(match *space {
        Circle { scale } => {
            let (a, b) = (p.as_angle(), q.as_angle());
            let (Some(a), Some(b)) = (a, b) else {
                return Err(mismatch(space, "expected angles".into()));
            };
            circle_distance(scale, a.to_f64(), b.to_f64())
        }
        FlatTorus { scale } => {
            let (a, b) = (vec(p)?, vec(q)?);
            circle_distance(scale, a[0], b[0]).hypot(circle_distance(scale, a[1], b[1]))
        }
        Sphere { .. } => unit_vector_angle(&vec(p)?, &vec(q)?, false)?,
        Projective { .. } => unit_vector_angle(&vec(p)?, &vec(q)?, true)?,
        Euclidean { .. } => (vec(p)? - vec(q)?).norm(),
        Grassmannian { metric, .. } => {
            let (a, b) = (mat(p)?, mat(q)?);
            match metric {
                GrassmannMetric::PrincipalAngle => {
                    let (a, b) = if lex_cmp(&a, &b).is_le() { (a, b) } else { (b, a) };
                    principal_angles_unchecked(&a, &b)?.iter().map(|t| t * t).sum::<f64>().sqrt()
                }
                GrassmannMetric::Projection => (&a * a.transpose() - &b * b.transpose()).norm(),
            }
        }
        Spd { metric, .. } => {
            let (a, b) = (mat(p)?, mat(q)?);
            match metric {
                SpdMetric::Frobenius => (a - b).norm(),
                SpdMetric::LogEuclidean => (spd_log(&a)? - spd_log(&b)?).norm(),
                SpdMetric::Stein => stein_divergence(&a, &b)?.max(0.0).sqrt(),
            }
        }
    })
}

/// `N` equispaced circle points `2πk/N` as doubles.
pub fn circle_equispaced(n: usize) -> Result<Vec<Point>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 equispaced points, got {n}")));
    }
    Ok((0..n).map(|k| Point::angle(TAU * k as f64 / n as f64)).collect())
}

/// `N` equispaced circle points with angles carried at `precision`.
pub fn circle_equispaced_wide(n: usize, precision: Precision) -> Result<Vec<Point>> {
    if precision.is_double() {
        return circle_equispaced(n);
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 equispaced points, got {n}")));
    }
    let step = Wide::two_pi(precision.bits()).div_i64(n as i64);
    Ok((0..n).map(|k| Point::Angle(Real::at_precision(&step.mul_i64(k as i64), precision))).collect())
}

fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Modified Gram–Schmidt, applied twice.
pub(crate) fn orthonormalize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let k = m.ncols();
    for _pass in 0..2 {
        for j in 0..k {
            for i in 0..j {
                let proj = m.column(i).dot(&m.column(j));
                let ci = m.column(i).clone_owned();
                m.column_mut(j).axpy(-proj, &ci, 1.0);
            }
            let norm = m.column(j).norm();
            m.column_mut(j).unscale_mut(norm);
        }
    }
    m
}

fn sample_one(space: &SpaceDescriptor, rng: &mut ChaCha8Rng) -> Point {
    use SpaceDescriptor::*;
    match *space {
        Circle { .. } => Point::angle(rng.gen_range(0.0..TAU)),
        FlatTorus { .. } => Point::vector(&[rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)]),
        Sphere { n } | Projective { n } => {
            let v = gaussian_vector(rng, n + 1);
            let norm = v.norm();
            Point::Vector(v / norm)
        }
        Euclidean { n } => Point::Vector(gaussian_vector(rng, n)),
        Grassmannian { k, n, .. } => {
            let g = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
            Point::Matrix(orthonormalize(g))
        }
        Spd { n, .. } => {
            let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            Point::Matrix(spd_from_factor(&g, SPD_SAMPLE_SHIFT))
        }
    }
}

/// `GGᵀ + εI`, exactly symmetric.
pub(crate) fn spd_from_factor(g: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let n = g.nrows();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = g.row(i).dot(&g.row(j)) + if i == j { eps } else { 0.0 };
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

/// Haar-like random orthogonal `n×n` matrix from `seed`.
pub fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    orthonormalize(DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal)))
}

/// Deterministic random points; every point passes [`validate_point`].
pub fn sample_points(space: &SpaceDescriptor, seed: u64, count: usize) -> Result<Vec<Point>> {
    space.validate()?;
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| sample_one(space, &mut rng)).collect())
}
