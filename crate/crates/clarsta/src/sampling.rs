//! Seeded generation of random orthogonal directions and subspaces.
//!
//! Directions are drawn by QR-factorizing Gaussian matrices, optionally after
//! projecting out an existing subspace, so a partially reused sample set can
//! be topped up with fresh directions orthogonal to the kept ones. The module
//! also provides the well-alignedness diagnostic: how much of a gradient's
//! feasible descent a sampled subspace captures, and the theoretical lower
//! bound on the probability of capturing enough.
//!
//! # Determinism
//!
//! All randomness flows through [`RngState`]: a ChaCha8 stream cipher (a
//! counter-based generator) keyed from one 64-bit seed via `seed_from_u64`,
//! with standard normals produced by the ziggurat sampler of
//! [`rand_distr::StandardNormal`]. Both are pinned by `Cargo.lock`, so a seed
//! reproduces the same direction sequence bit-for-bit on every platform.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::model::positive_diagonal_qr;
use crate::sets::{projected_step_measure, ConvexSet, ProjectionSettings, SetError};

/// Errors from direction generation and the alignment diagnostics.
#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Set(#[from] SetError),
}

/// Seeded, portable source of standard normal draws.
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// The seed this state was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Next standard normal draw from the stream.
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl std::fmt::Debug for RngState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RngState").field("seed", &self.seed).finish_non_exhaustive()
    }
}

const RANK_DEFICIENCY_THRESHOLD: f64 = 1e-12;
// A Gaussian draw is rank-deficient with probability zero; a redraw loop that
// runs this long indicates corrupted inputs rather than bad luck.
const MAX_REDRAWS: usize = 64;

/// Draw `q` mutually orthogonal directions of norm `delta` in Rⁿ, orthogonal
/// to the columns of `existing_q` when given.
///
/// The draw is a Gaussian `n×q` matrix, projected onto the complement of
/// `existing_q`, then orthonormalized by QR and scaled. A rank-deficient draw
/// (diagonal of the triangular factor below 1e-12) is discarded and redrawn
/// whole, preserving the distribution of the surviving samples.
pub fn generate_directions(
    n: usize,
    q: usize,
    delta: f64,
    existing_q: Option<&DMatrix<f64>>,
    rng: &mut RngState,
) -> Result<DMatrix<f64>, SamplingError> {
    if n == 0 || q == 0 {
        return Err(SamplingError::InvalidArgument(format!(
            "need n ≥ 1 and q ≥ 1, got n={n}, q={q}"
        )));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(SamplingError::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let p1 = match existing_q {
        Some(m) => {
            if m.nrows() != n {
                return Err(SamplingError::InvalidArgument(format!(
                    "existing basis has {} rows, ambient dimension is {n}",
                    m.nrows()
                )));
            }
            if crate::sets::orthonormality_deviation(m) > 1e-8 {
                return Err(SamplingError::InvalidArgument(
                    "existing basis columns are not orthonormal".into(),
                ));
            }
            m.ncols()
        }
        None => 0,
    };
    if q + p1 > n {
        return Err(SamplingError::InvalidArgument(format!(
            "cannot fit {q} directions orthogonal to a {p1}-dimensional subspace in R^{n}"
        )));
    }
    for _ in 0..MAX_REDRAWS {
        let a = DMatrix::from_fn(n, q, |_, _| rng.standard_normal());
        let a_tilde = match existing_q {
            Some(m) => &a - m * (m.transpose() * &a),
            None => a,
        };
        let (q_fac, r_fac) = positive_diagonal_qr(&a_tilde);
        if (0..q).all(|i| r_fac[(i, i)].abs() >= RANK_DEFICIENCY_THRESHOLD) {
            return Ok(q_fac * delta);
        }
    }
    Err(SamplingError::InvalidArgument(
        "Gaussian draws were persistently rank-deficient; inputs are likely corrupted".into(),
    ))
}

/// Sample a uniformly distributed rank-`z` orthogonal projector `QQᵀ` on Rⁿ.
///
/// Panics if `z` is 0 or exceeds `n`.
pub fn sample_projection_matrix(n: usize, z: usize, rng: &mut RngState) -> DMatrix<f64> {
    assert!(z >= 1 && z <= n, "projector rank {z} out of range 1..={n}");
    for _ in 0..MAX_REDRAWS {
        let a = DMatrix::from_fn(n, z, |_, _| rng.standard_normal());
        let (q_fac, r_fac) = positive_diagonal_qr(&a);
        if (0..z).all(|i| r_fac[(i, i)].abs() >= RANK_DEFICIENCY_THRESHOLD) {
            return &q_fac * q_fac.transpose();
        }
    }
    unreachable!("Gaussian draws cannot be persistently rank-deficient");
}

/// Outcome of testing whether a sampled subspace captures enough of the
/// feasible descent available to `grad` at `x`.
#[derive(Debug, Clone, Copy)]
pub struct AlignmentReport {
    /// Required capture fraction.
    pub alpha: f64,
    /// Criticality of the projected gradient `QQᵀ∇f` over the feasible unit step.
    pub lhs: f64,
    /// Criticality of the full gradient over the feasible unit step.
    pub pi_f: f64,
    /// Whether `lhs ≥ alpha·pi_f` (up to 1e-12 slack).
    pub aligned: bool,
    /// Theoretical lower bound on the probability of alignment, 0 if the
    /// bound's hypotheses do not hold for these parameters.
    pub bound: f64,
}

/// Evaluate the alignment test for one sampled subspace.
///
/// Both sides use the same one-projected-step approximation of the
/// criticality measure, applied to `QQᵀgrad` and to `grad`, so the comparison
/// is internally consistent even where the approximation is inexact.
pub fn alignment_check(
    q: &DMatrix<f64>,
    grad: &DVector<f64>,
    x: &DVector<f64>,
    set: &ConvexSet,
    alpha: f64,
    settings: &ProjectionSettings,
) -> Result<AlignmentReport, SamplingError> {
    let deviation = crate::sets::orthonormality_deviation(q);
    if deviation > 1e-8 {
        return Err(SamplingError::Set(SetError::NonOrthonormalBasis { deviation }));
    }
    if grad.len() != q.nrows() || x.len() != q.nrows() {
        return Err(SamplingError::InvalidArgument(
            "gradient, point, and basis dimensions disagree".into(),
        ));
    }
    let projected_grad = q * (q.transpose() * grad);
    let lhs = projected_step_measure(set, x, &projected_grad, settings)?;
    let pi_f = projected_step_measure(set, x, grad, settings)?;
    let aligned = lhs >= alpha * pi_f - 1e-12;
    let bound = alignment_probability_bound(q.nrows(), q.ncols(), alpha, pi_f, grad.norm())
        .unwrap_or(0.0);
    Ok(AlignmentReport { alpha, lhs, pi_f, aligned, bound })
}

/// Lower bound on the probability that a uniformly sampled p-dimensional
/// subspace of Rⁿ is `alpha`-well-aligned:
/// `1 − exp(−((n−1)/8)·(p/n − alpha)²·(pi_f/grad_norm)²)`, and 1 when
/// `pi_f = 0` (alignment is then vacuous).
pub fn alignment_probability_bound(
    n: usize,
    p: usize,
    alpha: f64,
    pi_f: f64,
    grad_norm: f64,
) -> Result<f64, SamplingError> {
    if n == 0 || p == 0 || p > n {
        return Err(SamplingError::InvalidArgument(format!(
            "need 1 ≤ p ≤ n, got p={p}, n={n}"
        )));
    }
    let ratio_pn = p as f64 / n as f64;
    if !(alpha > 0.0) || alpha >= ratio_pn {
        return Err(SamplingError::InvalidArgument(format!(
            "alpha must lie in (0, p/n) = (0, {ratio_pn}), got {alpha}"
        )));
    }
    if pi_f < 0.0 {
        return Err(SamplingError::InvalidArgument(format!("pi_f must be ≥ 0, got {pi_f}")));
    }
    if pi_f == 0.0 {
        return Ok(1.0);
    }
    if !(grad_norm > 0.0) {
        return Err(SamplingError::InvalidArgument(
            "grad_norm must be positive when pi_f > 0".into(),
        ));
    }
    let criticality_ratio = pi_f / grad_norm;
    let exponent =
        -((n as f64 - 1.0) / 8.0) * (ratio_pn - alpha).powi(2) * criticality_ratio.powi(2);
    Ok((1.0 - exponent.exp()).clamp(0.0, 1.0))
}
