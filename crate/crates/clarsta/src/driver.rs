//! The full iteration loop: lazy tip evaluation, model build, accuracy
//! test, subspace trust-region step, ratio-based radius update, greedy
//! candidate acceptance, and sample-set reuse with a forced-resample
//! schedule.
//!
//! A run owns one evaluation ledger and one RNG stream; every oracle call
//! goes through a budget gate, so the evaluation count never exceeds the
//! configured maximum and exhaustion is detected exactly when the next
//! needed evaluation cannot be paid for.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::ledger::EvaluationLedger;
use crate::model::{
    build_model, smallest_singular_value, ColumnOrigin, DirectionMatrix, ModelError,
    positive_diagonal_qr,
};
use crate::sample_set::{build_candidate_pool, pair_point, select_reusable};
use crate::sampling::{generate_directions, RngState, SamplingError};
use crate::sets::{ConvexSet, ProjectionSettings, SetError};
use crate::subproblem::{self, SubproblemSettings};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("starting point is not feasible")]
    InfeasibleStart,
    #[error("objective returned a non-finite value ({value})")]
    NonFiniteValue { value: f64 },
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// All tunables of the solver. Construct with [`SolverConfig::new`] and
/// override fields as needed; [`SolverConfig::validate`] checks the ranges
/// against the problem dimension.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Subspace dimension, `1 ≤ p ≤ n`.
    pub p: usize,
    /// Minimum number of freshly sampled directions per iteration,
    /// `1 ≤ p_rand ≤ p`.
    pub p_rand: usize,
    pub delta0: f64,
    /// Stop once the radius falls below this.
    pub delta_min: f64,
    pub delta_max: f64,
    /// Radius shrink factor in `(0,1)`.
    pub gamma_dec: f64,
    /// Radius growth factor, applied while `k < k_bar`; afterwards growth
    /// is switched off (factor 1), see [`SolverConfig::gamma_inc_at`].
    pub gamma_inc: f64,
    pub k_bar: usize,
    /// Ratio thresholds, `0 < eta1 ≤ eta2 < 1`.
    pub eta1: f64,
    pub eta2: f64,
    /// Model accuracy test: proceed with a step only when
    /// `Δ ≤ mu·π̃` for the model criticality estimate `π̃`.
    pub mu: f64,
    /// Reused directions may be up to `eps_rad·Δ` long, `eps_rad ≥ 1`.
    pub eps_rad: f64,
    /// Smallest singular value the reused block must keep.
    pub eps_geo: f64,
    /// Force a fully random sample set at least once in this many
    /// consecutive step-taking iterations.
    pub resample_period: usize,
    pub max_evals: usize,
    /// Safety cap on iterations; generous by default.
    pub max_iters: usize,
    pub seed: u64,
    /// Flip a fresh direction `d` to `−d` when `x+d` is infeasible but
    /// `x−d` is not (redrawing a few times if both sides fail).
    pub infeasible_mirror_mode: bool,
    /// Fraction of the ideal Cauchy decrease the subproblem must reach.
    pub kappa_tr: f64,
}

impl SolverConfig {
    pub fn new(p: usize, p_rand: usize, max_evals: usize, seed: u64) -> Self {
        Self {
            p,
            p_rand,
            delta0: 1.0,
            delta_min: 1e-8,
            delta_max: 1e3,
            gamma_dec: 0.5,
            gamma_inc: 2.0,
            k_bar: 1000,
            eta1: 0.1,
            eta2: 0.7,
            mu: 100.0,
            eps_rad: 2.0,
            eps_geo: 1e-8,
            resample_period: 10,
            max_evals,
            max_iters: 100_000,
            seed,
            infeasible_mirror_mode: false,
            kappa_tr: 0.5,
        }
    }

    /// Growth factor schedule: `gamma_inc` up to iteration `k_bar`, then 1
    /// so the radius can only stall or shrink late in the run.
    pub fn gamma_inc_at(&self, k: usize) -> f64 {
        if k < self.k_bar {
            self.gamma_inc
        } else {
            1.0
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), DriverError> {
        let bad = |msg: String| Err(DriverError::InvalidConfig(msg));
        if self.p < 1 || self.p > n {
            return bad(format!("need 1 ≤ p ≤ n, got p={} with n={n}", self.p));
        }
        if self.p_rand < 1 || self.p_rand > self.p {
            return bad(format!("need 1 ≤ p_rand ≤ p, got p_rand={}, p={}", self.p_rand, self.p));
        }
        if !(0.0 < self.delta_min && self.delta_min <= self.delta0 && self.delta0 <= self.delta_max)
        {
            return bad(format!(
                "need 0 < delta_min ≤ delta0 ≤ delta_max, got {}, {}, {}",
                self.delta_min, self.delta0, self.delta_max
            ));
        }
        if !(self.gamma_dec > 0.0 && self.gamma_dec < 1.0) {
            return bad(format!("gamma_dec must lie in (0,1), got {}", self.gamma_dec));
        }
        if !(self.gamma_inc >= 1.0) {
            return bad(format!("gamma_inc must be ≥ 1, got {}", self.gamma_inc));
        }
        if !(0.0 < self.eta1 && self.eta1 <= self.eta2 && self.eta2 < 1.0) {
            return bad(format!("need 0 < eta1 ≤ eta2 < 1, got {}, {}", self.eta1, self.eta2));
        }
        if !(self.mu > 0.0) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.eps_rad >= 1.0) {
            return bad(format!("eps_rad must be ≥ 1, got {}", self.eps_rad));
        }
        if !(self.eps_geo > 0.0) {
            return bad(format!("eps_geo must be positive, got {}", self.eps_geo));
        }
        if self.resample_period < 1 {
            return bad("resample_period must be ≥ 1".into());
        }
        if !(self.kappa_tr > 0.0 && self.kappa_tr < 1.0) {
            return bad(format!("kappa_tr must lie in (0,1), got {}", self.kappa_tr));
        }
        Ok(())
    }
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// Radius at iteration entry.
    pub delta: f64,
    /// Model criticality estimate `π̃` at the current iterate.
    pub pi_m: f64,
    /// Decrease ratio; absent when no step was tried or the predicted
    /// decrease was too small to divide by.
    pub rho: Option<f64>,
    /// Whether the iterate moved.
    pub accepted: bool,
    /// Whether `Δ ≤ mu·π̃` held, i.e. the step branch ran.
    pub model_test_passed: bool,
    /// Best feasible value seen so far (nonincreasing in `k`).
    pub f_best: f64,
    pub nf: usize,
    /// Smallest singular value of the reused block; absent when the sample
    /// set was fully random.
    pub sigma_min_du: Option<f64>,
    /// Whether the sample set was fully random this iteration.
    pub resampled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    RadiusBelowMin,
    BudgetExhausted,
    MaxIterations,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::RadiusBelowMin => "radius_below_min",
            StopReason::BudgetExhausted => "budget_exhausted",
            StopReason::MaxIterations => "max_iterations",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Feasible evaluated point with the smallest value.
    pub best_point: DVector<f64>,
    pub best_value: f64,
    pub iterations: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    /// Total oracle calls; can exceed the last record's count when the
    /// budget ran out while pre-evaluating tips for the next iteration.
    pub nf: usize,
    /// Seconds for the whole run.
    pub wall_time: f64,
    /// Wall time minus the summed oracle call durations.
    pub alg_time_estimate: f64,
}

/// Replacement direction for an infeasible tip: `−d` when the mirrored
/// point is feasible, `None` (redraw needed) when both sides are out.
pub fn mirror_fallback(
    x_k: &DVector<f64>,
    d: &DVector<f64>,
    set: &ConvexSet,
) -> Result<Option<DVector<f64>>, SetError> {
    if set.contains(&(x_k - d), 0.0)? {
        Ok(Some(-d))
    } else {
        Ok(None)
    }
}

/// Budget-gated, ledger-backed oracle access. Lookups are bit-exact, so a
/// point is never evaluated twice and reuse is free.
struct Oracle<'a, F> {
    objective: F,
    set: &'a ConvexSet,
    max_evals: usize,
    ledger: EvaluationLedger,
    oracle_time: f64,
    /// Ledger index and value of the best feasible point so far.
    best: Option<(usize, f64)>,
}

impl<F: FnMut(&DVector<f64>) -> f64> Oracle<'_, F> {
    /// `Ok(None)` means the budget is exhausted and the point is new.
    fn eval(&mut self, point: &DVector<f64>) -> Result<Option<(usize, f64)>, DriverError> {
        if let Some(idx) = self.ledger.lookup(point) {
            return Ok(Some((idx, self.ledger.value(idx))));
        }
        if self.ledger.nf() >= self.max_evals {
            return Ok(None);
        }
        let clock = Instant::now();
        let value = (self.objective)(point);
        self.oracle_time += clock.elapsed().as_secs_f64();
        if !value.is_finite() {
            return Err(DriverError::NonFiniteValue { value });
        }
        let idx = self.ledger.record(point.clone(), value);
        if self.set.contains(point, 1e-9)? && self.best.is_none_or(|(_, b)| value < b) {
            self.best = Some((idx, value));
        }
        Ok(Some((idx, value)))
    }

    fn best_value(&self) -> f64 {
        self.best.map(|(_, v)| v).unwrap_or(f64::INFINITY)
    }
}

/// Per-column bookkeeping for the current direction matrix.
#[derive(Debug, Clone, Copy)]
struct ColumnState {
    random: bool,
    /// Ledger index of the tip `x + d`; cleared by a shrink, filled back in
    /// by the lazy pass at the next model build.
    tip: Option<usize>,
}

/// Minimize `objective` over `set` starting from the feasible `x0`.
///
/// The oracle is called at most `config.max_evals` times; all evaluated
/// points are kept in a ledger so interpolation points shared between
/// iterations are never re-evaluated.
pub fn run<F>(
    objective: F,
    set: &ConvexSet,
    x0: &DVector<f64>,
    config: &SolverConfig,
) -> Result<RunResult, DriverError>
where
    F: FnMut(&DVector<f64>) -> f64,
{
    let started = Instant::now();
    let n = x0.len();
    config.validate(n)?;
    if let Some(dim) = set.dim() {
        if dim != n {
            return Err(SetError::DimensionMismatch { expected: dim, found: n }.into());
        }
    }
    if !set.contains(x0, 0.0)? {
        return Err(DriverError::InfeasibleStart);
    }

    let proj = ProjectionSettings::default();
    let sub_settings =
        SubproblemSettings { kappa_tr: config.kappa_tr, ..SubproblemSettings::default() };
    let mut oracle = Oracle {
        objective,
        set,
        max_evals: config.max_evals,
        ledger: EvaluationLedger::new(),
        oracle_time: 0.0,
        best: None,
    };
    let mut rng = RngState::new(config.seed);
    let mut records: Vec<IterationRecord> = Vec::new();

    let mut x = x0.clone();
    let mut f_x = match oracle.eval(&x)? {
        Some((_, v)) => v,
        None => {
            // Zero-evaluation budget: nothing was measured, report an
            // empty run.
            let wall_time = started.elapsed().as_secs_f64();
            return Ok(RunResult {
                best_point: x0.clone(),
                best_value: f64::INFINITY,
                iterations: records,
                stop_reason: StopReason::BudgetExhausted,
                nf: 0,
                wall_time,
                alg_time_estimate: wall_time,
            });
        }
    };

    let mut delta = config.delta0;
    let mut dirs = fresh_directions(
        n,
        config.p,
        delta,
        None,
        &mut rng,
        set,
        &x,
        config.infeasible_mirror_mode,
    )?;
    let mut cols: Vec<ColumnState> = vec![ColumnState { random: true, tip: None }; config.p];
    // Step-taking iterations since the sample set was last fully random.
    let mut streak: usize = 0;
    let mut k: usize = 0;

    let stop = 'outer: loop {
        if k >= config.max_iters {
            break StopReason::MaxIterations;
        }

        // Evaluate any tips not yet in the ledger: the fresh draws at the
        // start, and every tip after a shrink rescaled the directions.
        for i in 0..config.p {
            if cols[i].tip.is_none() {
                let pt = pair_point(&x, &dirs, 0, i + 1);
                match oracle.eval(&pt)? {
                    Some((idx, _)) => cols[i].tip = Some(idx),
                    None => break 'outer StopReason::BudgetExhausted,
                }
            }
        }

        let origins: Vec<ColumnOrigin> = cols
            .iter()
            .map(|c| {
                let ledger_index = c.tip.expect("tips evaluated above");
                if c.random {
                    ColumnOrigin::Random { ledger_index }
                } else {
                    ColumnOrigin::Reused { ledger_index }
                }
            })
            .collect();
        let n_random = cols.iter().filter(|c| c.random).count();
        assert!(n_random >= config.p_rand, "sample set lost its random columns");
        let resampled = n_random == config.p;
        let reused: Vec<DVector<f64>> = (0..config.p)
            .filter(|&i| !cols[i].random)
            .map(|i| dirs.column(i).clone_owned())
            .collect();
        let sigma_min_du = if reused.is_empty() {
            None
        } else {
            Some(smallest_singular_value(&DMatrix::from_columns(&reused)))
        };

        let dm = DirectionMatrix::factor(dirs.clone(), origins)?;
        let f_tips =
            DVector::from_fn(config.p, |i, _| oracle.ledger.value(cols[i].tip.unwrap()));
        let model = build_model(x.clone(), &dm, f_x, &f_tips)?;
        let pi_m = model.criticality_approx(set, &proj)?;
        let model_test_passed = delta <= config.mu * pi_m;

        let delta_entry = delta;
        let mut rho: Option<f64> = None;
        let mut accepted = false;

        if model_test_passed {
            // Solve in the slice of feasible displacements at x: the
            // predicted decrease is then achievable by an actual feasible
            // move, so ρ stays honest and the radius is not punished for
            // steps the constraint never allowed.
            let anchored = set.translated(&x);
            let sub = subproblem::solve(&model, delta, &anchored, pi_m, &sub_settings)?;
            let target = &x + &model.q * &sub.s_hat;
            let z = set.project(&target, &proj)?;
            let s = &z - &x;
            // Evaluate literally x + s: the reuse pool recomputes this sum
            // and must hit the same bits in the ledger.
            let step_pt = &x + &s;
            let Some((_, f_step)) = oracle.eval(&step_pt)? else {
                records.push(IterationRecord {
                    k,
                    delta: delta_entry,
                    pi_m,
                    rho: None,
                    accepted: false,
                    model_test_passed,
                    f_best: oracle.best_value(),
                    nf: oracle.ledger.nf(),
                    sigma_min_du,
                    resampled,
                });
                break StopReason::BudgetExhausted;
            };

            // Ratio of realized to predicted decrease; a prediction at
            // roundoff scale cannot be divided by and counts as a failure.
            let guard = 1e-14 * (1.0 + f_x.abs());
            if sub.model_decrease > guard {
                rho = Some((f_x - f_step) / sub.model_decrease);
            }
            // Near active boundaries the slice may admit only sideways
            // moves while the projected full-length radial target slides
            // along the faces and can pin coordinates exactly.  Acceptance
            // takes the best evaluated feasible point, so the radial target
            // joins the candidates whenever the slice fell short of the
            // plain ball optimum; elsewhere the two coincide and no extra
            // evaluation is spent.
            let g_norm = model.gradient.norm();
            let mut radial_pt: Option<DVector<f64>> = None;
            if g_norm > 1e-14 && sub.model_decrease < delta * g_norm * (1.0 - 1e-9) {
                let radial_target = &x - (delta / g_norm) * (&model.q * &model.gradient);
                let zr = set.project(&radial_target, &proj)?;
                let pt = &x + &(&zr - &x);
                if oracle.eval(&pt)?.is_some() {
                    radial_pt = Some(pt);
                }
            }

            delta = match rho {
                Some(r) if r > config.eta2 => (config.gamma_inc_at(k) * delta).min(config.delta_max),
                Some(r) if r >= config.eta1 => delta,
                _ => config.gamma_dec * delta,
            };

            // Evaluate the feasible pairwise points x + d_i + d_j so the
            // next iteration can reuse them as interpolation tips.
            'pairs: for i in 0..=config.p {
                for j in i.max(1)..=config.p {
                    let pt = pair_point(&x, &dirs, i, j);
                    if oracle.ledger.lookup(&pt).is_some() {
                        continue;
                    }
                    if !set.contains(&pt, 0.0)? {
                        continue;
                    }
                    if oracle.eval(&pt)?.is_none() {
                        break 'pairs;
                    }
                }
            }

            // Move to the best evaluated feasible candidate; the current
            // iterate competes too, so the sequence is monotone.
            let mut candidates: Vec<DVector<f64>> = Vec::new();
            candidates.push(step_pt.clone());
            if let Some(pt) = &radial_pt {
                candidates.push(pt.clone());
            }
            for i in 0..=config.p {
                for j in i.max(1)..=config.p {
                    candidates.push(pair_point(&x, &dirs, i, j));
                }
            }
            candidates.push(x.clone());
            let mut best_f = f64::INFINITY;
            let mut x_next = x.clone();
            for pt in candidates {
                let Some(idx) = oracle.ledger.lookup(&pt) else { continue };
                if !set.contains(&pt, 1e-9)? {
                    continue;
                }
                let v = oracle.ledger.value(idx);
                if v < best_f {
                    best_f = v;
                    x_next = pt;
                }
            }
            assert!(best_f <= f_x, "candidate acceptance broke monotonicity");
            assert!(set.contains(&x_next, 1e-9)?, "iterate left the feasible set");
            accepted = x_next != x;
            let _ = f_step;

            streak = if resampled { 0 } else { streak + 1 };
            assert!(streak < config.resample_period, "resampling schedule violated");

            // Reuse geometry around the new iterate, forcing a fully random
            // set when the schedule demands one.
            let pool = build_candidate_pool(&x, &x_next, &s, dm.d(), &oracle.ledger);
            let force_resample = streak >= config.resample_period - 1;
            let extra = if force_resample { pool.entries.len() } else { 0 };
            let selected = select_reusable(
                &pool,
                delta,
                config.p,
                config.p_rand,
                config.eps_rad,
                config.eps_geo,
                extra,
            );
            assert!(selected.len() + config.p_rand <= config.p);
            if !selected.is_empty() {
                let block: Vec<DVector<f64>> =
                    selected.iter().map(|e| e.direction.clone()).collect();
                let sigma = smallest_singular_value(&DMatrix::from_columns(&block));
                assert!(sigma >= config.eps_geo, "reused block too close to singular: {sigma}");
                for e in &selected {
                    assert!(
                        e.direction.norm() <= config.eps_rad * delta * (1.0 + 1e-12),
                        "reused direction longer than eps_rad·delta"
                    );
                }
            }

            let n_reused = selected.len();
            let q_fill = config.p - n_reused;
            let mut next = DMatrix::zeros(n, config.p);
            let mut next_cols: Vec<ColumnState> = Vec::with_capacity(config.p);
            for (i, e) in selected.iter().enumerate() {
                next.set_column(i, &e.direction);
                next_cols.push(ColumnState { random: false, tip: Some(e.ledger_index) });
            }
            if q_fill > 0 {
                let basis = if n_reused > 0 {
                    let block: Vec<DVector<f64>> =
                        selected.iter().map(|e| e.direction.clone()).collect();
                    Some(positive_diagonal_qr(&DMatrix::from_columns(&block)).0)
                } else {
                    None
                };
                let fresh = fresh_directions(
                    n,
                    q_fill,
                    delta,
                    basis.as_ref(),
                    &mut rng,
                    set,
                    &x_next,
                    config.infeasible_mirror_mode,
                )?;
                for j in 0..q_fill {
                    next.set_column(n_reused + j, &fresh.column(j));
                    next_cols.push(ColumnState { random: true, tip: None });
                }
            }
            x = x_next;
            f_x = best_f;
            dirs = next;
            cols = next_cols;
            // Fresh tips are evaluated now; if the budget runs out here the
            // lazy pass at the next loop entry reports the exhaustion.
            for i in 0..config.p {
                if cols[i].tip.is_none() {
                    let pt = pair_point(&x, &dirs, 0, i + 1);
                    match oracle.eval(&pt)? {
                        Some((idx, _)) => cols[i].tip = Some(idx),
                        None => break,
                    }
                }
            }
        } else {
            // Model not trusted at this radius: shrink both the region and
            // the sample set, keep the iterate. Tips are re-evaluated at
            // the next model build.
            delta *= config.gamma_dec;
            dirs *= config.gamma_dec;
            for c in cols.iter_mut() {
                c.tip = None;
            }
        }

        records.push(IterationRecord {
            k,
            delta: delta_entry,
            pi_m,
            rho,
            accepted,
            model_test_passed,
            f_best: oracle.best_value(),
            nf: oracle.ledger.nf(),
            sigma_min_du,
            resampled,
        });
        if delta < config.delta_min {
            break StopReason::RadiusBelowMin;
        }
        k += 1;
    };

    let (best_point, best_value) = match oracle.best {
        Some((idx, v)) => (oracle.ledger.point(idx).clone(), v),
        None => (x0.clone(), f64::INFINITY),
    };
    let wall_time = started.elapsed().as_secs_f64();
    Ok(RunResult {
        best_point,
        best_value,
        iterations: records,
        stop_reason: stop,
        nf: oracle.ledger.nf(),
        wall_time,
        alg_time_estimate: wall_time - oracle.oracle_time,
    })
}

/// Draw `count` new directions of length `delta` orthogonal to
/// `existing_q`, applying the mirror policy when enabled: infeasible tips
/// are flipped if the mirrored point is feasible, and the whole batch is
/// redrawn (a few times) when a direction is blocked on both sides.
#[allow(clippy::too_many_arguments)]
fn fresh_directions(
    n: usize,
    count: usize,
    delta: f64,
    existing_q: Option<&DMatrix<f64>>,
    rng: &mut RngState,
    set: &ConvexSet,
    anchor: &DVector<f64>,
    mirror: bool,
) -> Result<DMatrix<f64>, DriverError> {
    let mut last = None;
    for _ in 0..10 {
        let mut d = generate_directions(n, count, delta, existing_q, rng)?;
        if !mirror {
            return Ok(d);
        }
        let mut ok = true;
        for j in 0..count {
            let col = d.column(j).clone_owned();
            if set.contains(&(anchor + &col), 0.0)? {
                continue;
            }
            match mirror_fallback(anchor, &col, set)? {
                Some(flipped) => d.set_column(j, &flipped),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(d);
        }
        last = Some(d);
    }
    // Mirroring is a preference, not a requirement: infeasible tips are
    // still valid interpolation points, so give up after a few redraws.
    Ok(last.expect("at least one draw attempted"))
}
