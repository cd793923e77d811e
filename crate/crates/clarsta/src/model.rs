//! Linear interpolation models on subspaces, built from simplex gradients.
//!
//! Given sample directions `D = QR` (thin QR) from a center `x⁰` and function
//! values at the tips, the model is `m̂(ŝ) = f(x⁰) + gᵀŝ` with `Rᵀg` equal to
//! the vector of function differences. It interpolates `f` at the center and
//! every tip, and for Lipschitz-gradient `f` its error is controlled by the
//! constants computed in [`fully_linear_constants`].

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::sets::{projected_step_measure, ConvexSet, ProjectionSettings, SetError};

/// Errors from model construction.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("degenerate sample geometry: |R[{index},{index}]| = {value:.3e} below {threshold:.3e}")]
    DegenerateGeometry { index: usize, value: f64, threshold: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Where a sample direction's tip evaluation came from.
///
/// Either variant carries the index of the tip's record in the evaluation
/// ledger, so reused function values are looked up rather than recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnOrigin {
    /// Tip recycled from an earlier iteration's evaluations.
    Reused { ledger_index: usize },
    /// Tip freshly drawn and evaluated this iteration.
    Random { ledger_index: usize },
}

impl ColumnOrigin {
    pub fn ledger_index(&self) -> usize {
        match self {
            ColumnOrigin::Reused { ledger_index } | ColumnOrigin::Random { ledger_index } => {
                *ledger_index
            }
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, ColumnOrigin::Random { .. })
    }
}

/// Sample directions together with their thin QR factorization.
///
/// Columns keep the order they were given in, so the `i`-th column of `R`
/// always describes the `i`-th direction; `R` has a positive diagonal
/// (Householder QR followed by sign reflection), making the factorization
/// unique and platform-independent.
#[derive(Debug, Clone)]
pub struct DirectionMatrix {
    d: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    diam_bar: f64,
    origins: Vec<ColumnOrigin>,
}

impl DirectionMatrix {
    /// Factor an `n×p` direction matrix, rejecting rank-deficient geometry.
    pub fn factor(d: DMatrix<f64>, origins: Vec<ColumnOrigin>) -> Result<Self, ModelError> {
        let (n, p) = (d.nrows(), d.ncols());
        if p == 0 || n < p {
            return Err(ModelError::InvalidArgument(format!(
                "direction matrix must be tall with at least one column, got {n}×{p}"
            )));
        }
        if origins.len() != p {
            return Err(ModelError::DimensionMismatch { expected: p, found: origins.len() });
        }
        let (q, r) = positive_diagonal_qr(&d);
        let diam_bar = max_column_norm(&r);
        let threshold = 1e-14 * diam_bar;
        for i in 0..p {
            if r[(i, i)].abs() <= threshold {
                return Err(ModelError::DegenerateGeometry {
                    index: i,
                    value: r[(i, i)].abs(),
                    threshold,
                });
            }
        }
        debug_assert!({
            let diam_d = max_column_norm(&d);
            (diam_bar - diam_d).abs() <= 1e-10 * diam_d.max(1.0)
        });
        Ok(Self { d, q, r, diam_bar, origins })
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Largest column norm of `R` (equal to the largest of `D` by isometry).
    pub fn diam_bar(&self) -> f64 {
        self.diam_bar
    }

    pub fn origins(&self) -> &[ColumnOrigin] {
        &self.origins
    }

    /// Number of directions (the subspace dimension p).
    pub fn ncols(&self) -> usize {
        self.d.ncols()
    }
}

/// Thin QR with the sign convention `R_ii > 0` wherever the diagonal is
/// nonzero. Column order is preserved (no pivoting).
pub(crate) fn positive_diagonal_qr(d: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = d.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows() {
        if r[(i, i)] < 0.0 {
            for j in 0..r.ncols() {
                r[(i, j)] = -r[(i, j)];
            }
            for k in 0..q.nrows() {
                q[(k, i)] = -q[(k, i)];
            }
        }
    }
    (q, r)
}

fn max_column_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).norm()).fold(0.0, f64::max)
}

/// Generalized simplex gradient for a square invertible `R`: the solution of
/// `Rᵀg = delta_f` by forward substitution.
///
/// `delta_f[i]` is `f(x⁰ + d_i) − f(x⁰)`.
pub fn simplex_gradient(delta_f: &DVector<f64>, r: &DMatrix<f64>) -> Result<DVector<f64>, ModelError> {
    let p = r.ncols();
    if r.nrows() != p {
        return Err(ModelError::DimensionMismatch { expected: p, found: r.nrows() });
    }
    if delta_f.len() != p {
        return Err(ModelError::DimensionMismatch { expected: p, found: delta_f.len() });
    }
    let diam_bar = max_column_norm(r);
    let threshold = 1e-14 * diam_bar;
    for i in 0..p {
        if r[(i, i)].abs() <= threshold {
            return Err(ModelError::DegenerateGeometry {
                index: i,
                value: r[(i, i)].abs(),
                threshold,
            });
        }
    }
    // Rᵀ is lower triangular with (Rᵀ)_ij = R_ji.
    let mut g = DVector::zeros(p);
    for i in 0..p {
        let mut acc = delta_f[i];
        for j in 0..i {
            acc -= r[(j, i)] * g[j];
        }
        g[i] = acc / r[(i, i)];
    }
    Ok(g)
}

/// The linear model `m̂(ŝ) = constant + gradientᵀŝ` on the subspace spanned
/// by the columns of `Q`, anchored at `center`. Its Hessian is identically
/// zero, so the model curvature constant is 0 wherever one is needed.
#[derive(Debug, Clone)]
pub struct LinearSubspaceModel {
    /// Anchor point `x⁰` in the ambient space.
    pub center: DVector<f64>,
    /// Orthonormal basis of the model subspace.
    pub q: DMatrix<f64>,
    /// `f(center)`.
    pub constant: f64,
    /// Simplex gradient in subspace coordinates.
    pub gradient: DVector<f64>,
    /// Largest sample direction norm, the model's trust scale.
    pub diam_bar: f64,
}

/// Build the interpolation model from tip values recorded by the caller.
///
/// `f_at_tips[i]` must be `f(center + d_i)` for the `i`-th column of `dm`.
pub fn build_model(
    center: DVector<f64>,
    dm: &DirectionMatrix,
    f_center: f64,
    f_at_tips: &DVector<f64>,
) -> Result<LinearSubspaceModel, ModelError> {
    let p = dm.ncols();
    if f_at_tips.len() != p {
        return Err(ModelError::DimensionMismatch { expected: p, found: f_at_tips.len() });
    }
    if center.len() != dm.d().nrows() {
        return Err(ModelError::DimensionMismatch { expected: dm.d().nrows(), found: center.len() });
    }
    let delta_f = DVector::from_fn(p, |i, _| f_at_tips[i] - f_center);
    let gradient = simplex_gradient(&delta_f, dm.r())?;
    if !gradient.iter().all(|v| v.is_finite()) || !f_center.is_finite() {
        return Err(ModelError::InvalidArgument("non-finite model coefficients".into()));
    }
    Ok(LinearSubspaceModel {
        center,
        q: dm.q().clone(),
        constant: f_center,
        gradient,
        diam_bar: dm.diam_bar(),
    })
}

impl LinearSubspaceModel {
    /// Model value at subspace coordinates `s_hat`.
    pub fn eval(&self, s_hat: &DVector<f64>) -> f64 {
        self.constant + self.gradient.dot(s_hat)
    }

    /// One-projected-step approximation of the model criticality measure:
    /// `|gᵀQᵀ(proj_C(x − Qg/‖g‖) − x)|`, and 0 when the gradient vanishes
    /// (the unit step is undefined there; a zero-gradient linear model is
    /// critical everywhere).
    pub fn criticality_approx(
        &self,
        set: &ConvexSet,
        settings: &ProjectionSettings,
    ) -> Result<f64, SetError> {
        if self.gradient.norm() <= 1e-14 {
            return Ok(0.0);
        }
        let ambient_gradient = &self.q * &self.gradient;
        projected_step_measure(set, &self.center, &ambient_gradient, settings)
    }
}

/// Error constants of a fully linear model class, uniform over all radii the
/// solver can visit.
#[derive(Debug, Clone, Copy)]
pub struct FullyLinearConstants {
    /// Function-error constant: `|f(x+Qŝ) − m̂(ŝ)| ≤ kappa_ef·Δ²`.
    pub kappa_ef: f64,
    /// Gradient-error constant along feasible directions: error `≤ kappa_eg·Δ`.
    pub kappa_eg: f64,
    /// Uniform upper bound on `‖R̂⁻¹‖` over admissible sample sets.
    pub m_r_inv: f64,
    /// Lipschitz constant of `∇f` used to form the bounds.
    pub l_grad: f64,
}

/// Compute the uniform fully-linear constants from the solver's geometry
/// parameters.
///
/// `M = max(1/eps_geo, 1/delta_min)·eps_rad·delta_max` bounds `‖R̂⁻¹‖` for
/// every sample set the management rules can produce; then
/// `kappa_ef = ½L(1+√p·M)·eps_rad²` and `kappa_eg = ½L(2+√p·M)·eps_rad`.
pub fn fully_linear_constants(
    l_grad: f64,
    p: usize,
    eps_rad: f64,
    eps_geo: f64,
    delta_min: f64,
    delta_max: f64,
) -> Result<FullyLinearConstants, ModelError> {
    for (name, v) in [
        ("l_grad", l_grad),
        ("eps_rad", eps_rad),
        ("eps_geo", eps_geo),
        ("delta_min", delta_min),
        ("delta_max", delta_max),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(ModelError::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    if p == 0 {
        return Err(ModelError::InvalidArgument("p must be at least 1".into()));
    }
    if delta_min > delta_max {
        return Err(ModelError::InvalidArgument(format!(
            "delta_min {delta_min} exceeds delta_max {delta_max}"
        )));
    }
    if eps_rad < 1.0 {
        return Err(ModelError::InvalidArgument(format!("eps_rad must be ≥ 1, got {eps_rad}")));
    }
    let m_r_inv = (1.0 / eps_geo).max(1.0 / delta_min) * eps_rad * delta_max;
    let root_p_m = (p as f64).sqrt() * m_r_inv;
    Ok(FullyLinearConstants {
        kappa_ef: 0.5 * l_grad * (1.0 + root_p_m) * eps_rad * eps_rad,
        kappa_eg: 0.5 * l_grad * (2.0 + root_p_m) * eps_rad,
        m_r_inv,
        l_grad,
    })
}

/// Spectral norm `σ_max(M)`, an upper bound for the feasibility-restricted
/// geometry measure (which maximizes `‖Mw‖` only over feasible `w` and is
/// itself a nonconvex problem we deliberately do not solve).
pub fn geometry_norm_bound(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().copied().fold(0.0, f64::max)
}

/// Smallest singular value; 0 for a matrix with no columns.
pub(crate) fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::RngState;

    fn random_origins(p: usize) -> Vec<ColumnOrigin> {
        (0..p).map(|i| ColumnOrigin::Random { ledger_index: i }).collect()
    }

    #[test]
    fn simplex_gradient_identity_r() {
        // f(x) = x1 + 2 x2 sampled along I2.
        let g = simplex_gradient(&DVector::from_vec(vec![1.0, 2.0]), &DMatrix::identity(2, 2))
            .unwrap();
        assert_eq!(g, DVector::from_vec(vec![1.0, 2.0]));
    }

    #[test]
    fn simplex_gradient_hand_triangular_solve() {
        // Rᵀg = (2,1) with R = [[2,1],[0,1]]: g1 = 1, then 1·1 + 1·g2 = 1.
        let r = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let g = simplex_gradient(&DVector::from_vec(vec![2.0, 1.0]), &r).unwrap();
        assert!((g - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn simplex_gradient_scalar_forward_difference() {
        // f(x) = x² at 0 with d = 1: difference f(1)−f(0) = 1.
        let r = DMatrix::from_row_slice(1, 1, &[1.0]);
        let g = simplex_gradient(&DVector::from_vec(vec![1.0]), &r).unwrap();
        assert_eq!(g[0], 1.0);
    }

    #[test]
    fn simplex_gradient_residual_is_tiny() {
        let mut rng = RngState::new(11);
        for _ in 0..100 {
            let p = 1 + (rng.standard_normal().abs() * 2.0) as usize % 5;
            let d = DMatrix::from_fn(p + 2, p, |_, _| rng.standard_normal());
            let (_, r) = positive_diagonal_qr(&d);
            let delta_f = DVector::from_fn(p, |_, _| rng.standard_normal());
            let g = simplex_gradient(&delta_f, &r).unwrap();
            let residual = (r.transpose() * g - &delta_f).norm();
            assert!(residual <= 1e-12 * delta_f.norm().max(1e-300));
        }
    }

    #[test]
    fn simplex_gradient_rejects_singular_r() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            simplex_gradient(&DVector::from_vec(vec![1.0, 1.0]), &r),
            Err(ModelError::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn factorization_preserves_column_order_and_sign() {
        let mut rng = RngState::new(3);
        for _ in 0..50 {
            let d = DMatrix::from_fn(6, 3, |_, _| rng.standard_normal());
            let dm = DirectionMatrix::factor(d.clone(), random_origins(3)).unwrap();
            // Reconstruction, orthonormality, positive diagonal.
            assert!((dm.q() * dm.r() - &d).norm() <= 1e-10 * d.norm());
            assert!(crate::sets::orthonormality_deviation(dm.q()) <= 1e-10);
            for i in 0..3 {
                assert!(dm.r()[(i, i)] > 0.0);
            }
            // diam_bar measured on R matches the direction norms.
            let diam_d = (0..3).map(|j| d.column(j).norm()).fold(0.0, f64::max);
            assert!((dm.diam_bar() - diam_d).abs() <= 1e-10 * diam_d);
        }
    }

    #[test]
    fn factorization_rejects_rank_deficiency() {
        let mut d = DMatrix::zeros(4, 2);
        d[(0, 0)] = 1.0;
        d[(0, 1)] = 2.0; // second column parallel to the first
        assert!(matches!(
            DirectionMatrix::factor(d, random_origins(2)),
            Err(ModelError::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn model_is_exact_for_linear_functions() {
        let mut rng = RngState::new(21);
        for _ in 0..50 {
            let (n, p) = (7, 3);
            let a = DVector::from_fn(n, |_, _| rng.standard_normal());
            let b = rng.standard_normal();
            let f = |x: &DVector<f64>| a.dot(x) + b;
            let center = DVector::from_fn(n, |_, _| rng.standard_normal());
            let d = DMatrix::from_fn(n, p, |_, _| rng.standard_normal());
            let dm = DirectionMatrix::factor(d.clone(), random_origins(p)).unwrap();
            let tips = DVector::from_fn(p, |i, _| f(&(&center + d.column(i))));
            let model = build_model(center.clone(), &dm, f(&center), &tips).unwrap();
            let expected = dm.q().transpose() * &a;
            assert!((&model.gradient - expected).norm() <= 1e-10 * a.norm().max(1.0));
        }
    }

    #[test]
    fn model_gradient_of_separable_quadratic() {
        // f(x) = x1² at center 0 with D = I2: tip values (1, 0), so the
        // model is m̂(ŝ) = ŝ1.
        let f = |x: &DVector<f64>| x[0] * x[0];
        let center = DVector::zeros(2);
        let dm = DirectionMatrix::factor(DMatrix::identity(2, 2), random_origins(2)).unwrap();
        let tips = DVector::from_fn(2, |i, _| {
            f(&(&center + DMatrix::identity(2, 2).column(i).clone_owned()))
        });
        let model = build_model(center, &dm, 0.0, &tips).unwrap();
        assert!((&model.gradient - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn single_direction_model_is_forward_difference() {
        let f = |x: &DVector<f64>| (x[0] - 0.3).powi(2) + x[1];
        let delta = 0.25;
        let center = DVector::from_vec(vec![1.0, 2.0]);
        let d = DMatrix::from_column_slice(2, 1, &[delta, 0.0]);
        let dm = DirectionMatrix::factor(d.clone(), random_origins(1)).unwrap();
        let tip = f(&(&center + d.column(0)));
        let model = build_model(center.clone(), &dm, f(&center), &DVector::from_vec(vec![tip]))
            .unwrap();
        let expected = (tip - f(&center)) / delta;
        assert!((model.gradient[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn interpolation_property_on_random_quadratics() {
        let mut rng = RngState::new(33);
        for _ in 0..50 {
            let (n, p) = (6, 3);
            let a = DMatrix::from_fn(n, n, |_, _| rng.standard_normal());
            let sym = (&a + a.transpose()) * 0.5;
            let b = DVector::from_fn(n, |_, _| rng.standard_normal());
            let c = rng.standard_normal();
            let f = move |x: &DVector<f64>| (x.transpose() * &sym * x)[(0, 0)] + b.dot(x) + c;
            let center = DVector::from_fn(n, |_, _| rng.standard_normal());
            let d = DMatrix::from_fn(n, p, |_, _| rng.standard_normal());
            let dm = DirectionMatrix::factor(d.clone(), random_origins(p)).unwrap();
            let tips = DVector::from_fn(p, |i, _| f(&(&center + d.column(i))));
            let model = build_model(center.clone(), &dm, f(&center), &tips).unwrap();
            assert_eq!(model.eval(&DVector::zeros(p)), model.constant);
            for i in 0..p {
                let r_i = dm.r().column(i).clone_owned();
                let f_hat = f(&(&center + dm.q() * &r_i));
                let err = (model.eval(&r_i) - f_hat).abs();
                assert!(err <= 1e-9 * (1.0 + f_hat.abs()), "tip {i} err {err:.3e}");
            }
        }
    }

    #[test]
    fn eval_is_affine() {
        let model = LinearSubspaceModel {
            center: DVector::zeros(2),
            q: DMatrix::identity(2, 2),
            constant: 5.0,
            gradient: DVector::from_vec(vec![1.0, -2.0]),
            diam_bar: 1.0,
        };
        assert_eq!(model.eval(&DVector::zeros(2)), 5.0);
        assert_eq!(model.eval(&DVector::from_vec(vec![1.0, 0.0])), 6.0);
        let u = DVector::from_vec(vec![0.3, 0.7]);
        let v = DVector::from_vec(vec![-1.0, 0.2]);
        let (a, b) = (2.0, -0.5);
        let lhs = model.eval(&(&u * a + &v * b));
        let rhs = a * model.eval(&u) + b * model.eval(&v) - (a + b - 1.0) * model.constant;
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn criticality_unconstrained_is_gradient_norm() {
        let mut rng = RngState::new(44);
        for _ in 0..20 {
            let d = DMatrix::from_fn(5, 2, |_, _| rng.standard_normal());
            let (q, _) = positive_diagonal_qr(&d);
            let model = LinearSubspaceModel {
                center: DVector::from_fn(5, |_, _| rng.standard_normal()),
                q,
                constant: 0.0,
                gradient: DVector::from_fn(2, |_, _| rng.standard_normal()),
                diam_bar: 1.0,
            };
            let pi = model
                .criticality_approx(&ConvexSet::WholeSpace, &ProjectionSettings::default())
                .unwrap();
            assert!((pi - model.gradient.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn criticality_zero_gradient_is_zero() {
        let model = LinearSubspaceModel {
            center: DVector::zeros(3),
            q: DMatrix::identity(3, 2),
            constant: 0.0,
            gradient: DVector::zeros(2),
            diam_bar: 1.0,
        };
        let set = ConvexSet::ball(DVector::zeros(3), 1.0).unwrap();
        assert_eq!(model.criticality_approx(&set, &ProjectionSettings::default()).unwrap(), 0.0);
    }

    #[test]
    fn criticality_vanishes_at_blocked_boundary() {
        // One-dimensional box [0,2], model gradient positive at x = 0: the
        // unit descent probe projects back onto x, so the measure is 0.
        let model = LinearSubspaceModel {
            center: DVector::from_vec(vec![0.0]),
            q: DMatrix::identity(1, 1),
            constant: 0.0,
            gradient: DVector::from_vec(vec![1.0]),
            diam_bar: 1.0,
        };
        let set = ConvexSet::axis_box(DVector::from_vec(vec![0.0]), DVector::from_vec(vec![2.0]))
            .unwrap();
        assert_eq!(model.criticality_approx(&set, &ProjectionSettings::default()).unwrap(), 0.0);
    }

    #[test]
    fn constants_match_hand_computation() {
        let c = fully_linear_constants(2.0, 1, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(c.m_r_inv, 1.0);
        assert_eq!(c.kappa_ef, 2.0);
        assert_eq!(c.kappa_eg, 3.0);
    }

    #[test]
    fn constants_scale_linearly() {
        let base = fully_linear_constants(1.5, 3, 2.0, 0.1, 1e-3, 10.0).unwrap();
        let doubled_l = fully_linear_constants(3.0, 3, 2.0, 0.1, 1e-3, 10.0).unwrap();
        assert!((doubled_l.kappa_ef - 2.0 * base.kappa_ef).abs() < 1e-12 * base.kappa_ef);
        assert!((doubled_l.kappa_eg - 2.0 * base.kappa_eg).abs() < 1e-12 * base.kappa_eg);

        let doubled_dmax = fully_linear_constants(1.5, 3, 2.0, 0.1, 1e-3, 20.0).unwrap();
        assert!((doubled_dmax.m_r_inv - 2.0 * base.m_r_inv).abs() < 1e-12 * base.m_r_inv);
    }

    #[test]
    fn constants_reject_bad_inputs() {
        assert!(fully_linear_constants(-1.0, 1, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(fully_linear_constants(1.0, 0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(fully_linear_constants(1.0, 1, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(fully_linear_constants(1.0, 1, 1.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn spectral_norm_examples() {
        assert!((geometry_norm_bound(&DMatrix::identity(3, 3)) - 1.0).abs() < 1e-10);
        let diag = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        assert!((geometry_norm_bound(&diag) - 3.0).abs() < 1e-10);
        let perm = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((geometry_norm_bound(&perm) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn monte_carlo_restricted_measure_never_exceeds_spectral_bound() {
        // The feasibility-restricted measure maximizes ‖Mw‖/c only over
        // feasible w with ‖w‖ ≤ c; sampling such w gives a lower bound that
        // must sit below the spectral norm we use in its place.
        let mut rng = RngState::new(55);
        let (n, p) = (6, 3);
        let x0 = DVector::zeros(n);
        for _ in 0..20 {
            let d = DMatrix::from_fn(n, p, |_, _| rng.standard_normal());
            let dm = DirectionMatrix::factor(d, random_origins(p)).unwrap();
            let m = dm.r().clone() / dm.diam_bar(); // R̂, then bound its inverse
            let m_inv = m.try_inverse().unwrap();
            let cap = dm.diam_bar().min(1.0);
            let mut mc_lower: f64 = 0.0;
            for _ in 0..200 {
                // Feasible w: pull a random feasible ambient point back to the
                // subspace and cap its norm (the set is convex and contains
                // x0, so scaling toward 0 stays feasible).
                let z = DVector::from_fn(n, |_, _| rng.standard_normal().clamp(-1.0, 1.0));
                let mut w = dm.q().transpose() * (z - &x0);
                if w.norm() > cap {
                    w *= cap / w.norm();
                }
                mc_lower = mc_lower.max((&m_inv * w).norm() / cap);
            }
            let bound = geometry_norm_bound(&m_inv);
            assert!(mc_lower <= bound * (1.0 + 1e-12), "{mc_lower} > {bound}");
        }
    }
}
