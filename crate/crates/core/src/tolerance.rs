//! Every numerical tolerance used by the crate, in one place.
//!
//! Exact rational verdicts never consult these; they apply only where a
//! quantity passes through floating point.

/// Inverse transform against the input, relative in l2.
pub const ROUND_TRIP: f64 = 1e-9;
/// Fast transform against the direct sum, relative in l2.
pub const DIRECT_SUM: f64 = 1e-9;
/// Parseval and inner-product identities, relative.
pub const PARSEVAL: f64 = 1e-6;
/// Direct against spectral cross-correlation, relative in l2.
pub const CORRELATION_AGREEMENT: f64 = 1e-8;
/// Direct against spectral uniformity functionals, relative.
pub const FUNCTIONAL_AGREEMENT: f64 = 1e-6;
/// Primal against dual box-norm fourth power, relative.
pub const BOX_DUAL: f64 = 1e-8;
/// Allowed imaginary part of a box-norm fourth power, relative to `1 + |re|`.
pub const BOX_IMAGINARY: f64 = 1e-8;
/// Slack on `|f| <= 1` for disk-valued fields.
pub const DISK: f64 = 1e-12;
/// Additive slack on the progression discrepancy bound.
pub const DISCREPANCY_SLACK: f64 = 1e-6;
/// Additive slack on the box-norm triangle inequality.
pub const TRIANGLE_SLACK: f64 = 1e-9;
/// Eigenvalue trace identities, relative.
pub const SPECTRAL_TRACE: f64 = 1e-6;
/// Eigenvalues above `-EIGEN_CLAMP` are clamped to zero; anything lower is an error.
pub const EIGEN_CLAMP: f64 = 1e-8;
/// Slack on the disk radius accepted by the level-set partition.
pub const LEVEL_SET_RADIUS: f64 = 1e-9;
/// Relative slack on floating-point inequality conclusions.
pub const INEQUALITY: f64 = 1e-9;
/// Smallest Fourier coefficient magnitude, relative to `N^2`, treated as nonzero.
pub const NONZERO_COEFFICIENT: f64 = 1e-9;

/// `|a - b| <= tol * scale`.
pub fn within(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * scale
}

/// Relative comparison with the larger magnitude as scale; two exact zeros agree.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    within(a, b, tol, a.abs().max(b.abs()))
}

/// `a <= b` up to a relative slack of [`INEQUALITY`].
pub fn at_most(a: f64, b: f64) -> bool {
    a <= b + INEQUALITY * (1.0 + b.abs())
}
