//! Trust-region subproblem on a sampled subspace.
//!
//! Minimizes the linear model over `F = {‖ŝ‖ ≤ Δ} ∩ Qᵀ(C ∩ col(Q))` by
//! projected gradient descent, with projections onto `F` computed by Dykstra
//! alternation between the ball and the lifted set projection. A generalized
//! Cauchy safeguard compares the iterate against the projected full-length
//! gradient arc point, so the returned step carries a Cauchy-type decrease
//! guarantee whenever the geometry allows one.
//!
//! Because the model is linear, the value at `P_F(s − t·g)` is monotone in
//! `t`: summing the variational inequalities at two step lengths `t₁ < t₂`
//! gives `(t₂−t₁)·gᵀ(p₂−p₁) ≤ −‖p₂−p₁‖²`. The longest probe therefore
//! dominates any shorter one, which is why neither the projected-gradient
//! iteration nor the Cauchy safeguard needs a step-length search.

use nalgebra::DVector;

use crate::model::LinearSubspaceModel;
use crate::sets::{
    dykstra_generic, project_lifted, ConvexSet, ProjectionSettings, Projector, SetError,
};

/// Which projected-gradient step size to use.
#[derive(Debug, Clone, Copy)]
pub enum StepSizeRule {
    /// Constant step.
    Fixed(f64),
    /// Probe the full trust-region length `Δ/‖g‖` every iteration. By the
    /// monotonicity noted in the module docs a failed full-length probe
    /// rules out every shorter one, so no backtracking is needed.
    FullLength,
}

/// Solver parameters; the defaults match how the outer loop calls this.
#[derive(Debug, Clone, Copy)]
pub struct SubproblemSettings {
    /// Cap on projected-gradient iterations.
    pub pgd_max_iter: usize,
    /// Stop when an accepted step moves less than `pgd_tol·Δ`.
    pub pgd_tol: f64,
    pub step_size_rule: StepSizeRule,
    /// Fraction of the ideal Cauchy decrease the result must reach for
    /// `cauchy_ok`.
    pub kappa_tr: f64,
    /// Tolerances of the Dykstra projections onto `F`.
    pub projection: ProjectionSettings,
}

impl Default for SubproblemSettings {
    fn default() -> Self {
        Self {
            pgd_max_iter: 20,
            pgd_tol: 1e-8,
            step_size_rule: StepSizeRule::FullLength,
            kappa_tr: 0.5,
            projection: ProjectionSettings::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubproblemResult {
    /// Step in subspace coordinates, `‖s_hat‖ ≤ Δ` up to projection tolerance.
    pub s_hat: DVector<f64>,
    /// `m̂(0) − m̂(s_hat) = −gᵀs_hat`, never negative.
    pub model_decrease: f64,
    /// Whether the decrease reaches `kappa_tr·π̃·min(π̃, Δ, 1)` for the
    /// criticality estimate `π̃` the caller passed in.
    pub cauchy_ok: bool,
    pub pgd_iterations: usize,
}

/// Approximately minimize the model over the trust region intersected with
/// the subspace slice of `set`.
///
/// `pi_m` is the caller's criticality estimate at the model center; it only
/// parameterizes the Cauchy decrease target. A zero `pi_m` or zero gradient
/// short-circuits to the zero step (the decrease target is vacuous there).
pub fn solve(
    model: &LinearSubspaceModel,
    delta: f64,
    set: &ConvexSet,
    pi_m: f64,
    settings: &SubproblemSettings,
) -> Result<SubproblemResult, SetError> {
    assert!(delta > 0.0, "trust radius must be positive, got {delta}");
    let p = model.gradient.len();
    let g = model.gradient.clone();
    let g_norm = g.norm();
    if pi_m <= 0.0 || g_norm <= 1e-14 {
        return Ok(SubproblemResult {
            s_hat: DVector::zeros(p),
            model_decrease: 0.0,
            cauchy_ok: true,
            pgd_iterations: 0,
        });
    }

    // Validate the lifted projection once; the per-call closures below
    // reuse the already-checked inputs.
    project_lifted(set, &model.q, &DVector::zeros(p), &settings.projection)?;

    // The ball optimum bounds every feasible candidate, so when it already
    // lies in the slice there is nothing left to optimize and the Dykstra
    // machinery can be skipped entirely.
    let s_ball = -&g * (delta / g_norm);
    if set.contains(&(&model.q * &s_ball), 0.0)? {
        let model_decrease = delta * g_norm;
        let target = settings.kappa_tr * pi_m * pi_m.min(delta).min(1.0);
        let cauchy_ok = model_decrease >= target * (1.0 - 1e-12);
        return Ok(SubproblemResult {
            s_hat: s_ball,
            model_decrease,
            cauchy_ok,
            pgd_iterations: 0,
        });
    }
    let proj_f = |v: &DVector<f64>| -> DVector<f64> {
        let lifted: Projector = {
            let set = set.clone();
            let q = model.q.clone();
            let proj_settings = settings.projection;
            Box::new(move |z: &DVector<f64>| {
                project_lifted(&set, &q, z, &proj_settings).expect("inputs validated on entry")
            })
        };
        let ball: Projector = Box::new(move |z: &DVector<f64>| {
            let norm = z.norm();
            if norm <= delta {
                z.clone()
            } else {
                z * (delta / norm)
            }
        });
        dykstra_generic(&[lifted, ball], v, &settings.projection).point
    };

    let move_tol = settings.pgd_tol * delta;
    let mut s = DVector::zeros(p);
    let mut s_value = model.eval(&s);
    let mut iterations = 0;
    match settings.step_size_rule {
        StepSizeRule::Fixed(t) => {
            for _ in 0..settings.pgd_max_iter {
                iterations += 1;
                let candidate = proj_f(&(&s - &g * t));
                let moved = (&candidate - &s).norm();
                s = candidate;
                if moved <= move_tol {
                    break;
                }
            }
            s_value = model.eval(&s);
        }
        StepSizeRule::FullLength => {
            let t0 = delta / g_norm;
            for _ in 0..settings.pgd_max_iter {
                iterations += 1;
                let candidate = proj_f(&(&s - &g * t0));
                let value = model.eval(&candidate);
                if value >= s_value {
                    break;
                }
                let moved = (&candidate - &s).norm();
                s = candidate;
                s_value = value;
                if moved <= move_tol {
                    break;
                }
            }
        }
    }

    // Cauchy safeguard: the projected full-length gradient arc point. No
    // sweep over shorter lengths is needed, since by monotonicity none of
    // them can decrease the model further.  Skipped when the iterate
    // already matches the unconstrained ball bound, which no feasible
    // candidate can beat.
    let mut best = DVector::zeros(p);
    let mut best_value = model.eval(&best);
    if s_value < best_value {
        best = s.clone();
        best_value = s_value;
    }
    if -g.dot(&best) < delta * g_norm * (1.0 - 1e-12) {
        let candidate = proj_f(&(-&g * (delta / g_norm)));
        if model.eval(&candidate) < best_value {
            best = candidate;
        }
    }

    let model_decrease = (-g.dot(&best)).max(0.0);
    let target = settings.kappa_tr * pi_m * pi_m.min(delta).min(1.0);
    let cauchy_ok = model_decrease >= target * (1.0 - 1e-12);
    Ok(SubproblemResult { s_hat: best, model_decrease, cauchy_ok, pgd_iterations: iterations })
}
