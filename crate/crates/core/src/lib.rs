//! Gaussian kernels `exp(−λ d²)` on metric spaces.
//!
//! The crate builds Gram matrices on a catalog of metric spaces (circle,
//! spheres, projective spaces, Grassmannians, SPD matrices, Euclidean
//! space), decides positive semidefiniteness, and produces re-verifiable
//! certificates `cᵀKc < 0` showing that the kernel fails to be positive
//! definite on the circle and on every space the circle embeds into
//! isometrically.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`metric`] | spaces, point validation, distances, sampling |
//! | [`gram`] | kernel evaluation, Gram assembly, Hadamard products |
//! | [`spectral`] | Jacobi and circulant spectra, PSD verdicts |
//! | [`theta`] | partial theta sums and the tail/bound identities |
//! | [`witness`] | circle witnesses, critical bandwidths, certificates |
//! | [`embed`] | isometric circle embeddings and certificate transfer |
//! | [`stein`] | Stein divergence and its bandwidth set |
//! | [`certificate`] | certificate schema and the independent verifier |

pub mod certificate;
pub mod embed;
pub mod error;
pub mod gram;
pub mod metric;
pub mod pointset;
pub mod spectral;
pub mod stein;
pub mod theta;
pub mod wide;
pub mod witness;

pub use certificate::{verify_certificate, WitnessCertificate};
pub use error::{Error, Result};
pub use gram::{gaussian_kernel, gram, GramMatrix, KernelParam};
pub use metric::{distance, validate_point, Point, SpaceDescriptor};
pub use spectral::{jacobi_eigenvalues, pd_verdict, PdVerdict, SpectrumReport, Verdict};
pub use wide::{Precision, Real, Wide};

/// Version tag written into every JSON document.
pub const SCHEMA_VERSION: &str = "1";
