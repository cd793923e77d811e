//! Reuse of evaluated points as next-iteration sample directions.
//!
//! After a step from `x_k` to `x_{k+1}`, the points evaluated around `x_k`
//! are candidate tips for the next sample set. This module enumerates them,
//! selects an independent subset, and prunes it by length and geometry so
//! that whatever survives can be completed with fresh random directions.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::ledger::EvaluationLedger;
use crate::model::smallest_singular_value;

#[derive(Debug, Error)]
pub enum SampleSetError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A candidate direction from `x_{k+1}` to a previously evaluated point,
/// identified by that point's ledger index.
#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub direction: DVector<f64>,
    pub ledger_index: usize,
}

/// Candidate directions for reuse, one per distinct evaluated point.
#[derive(Debug, Clone, Default)]
pub struct CandidatePool {
    pub entries: Vec<PoolEntry>,
}

/// The point `x_k + c_i + c_j` where `c_0 = 0` and `c_i` (i ≥ 1) is column
/// `i−1` of `d_k`, computed with a fixed operation order.
///
/// The driver evaluates pair points through this same helper, so the pool's
/// recomputation hits the identical bit pattern in the ledger.
pub(crate) fn pair_point(x_k: &DVector<f64>, d_k: &DMatrix<f64>, i: usize, j: usize) -> DVector<f64> {
    let mut point = x_k.clone();
    if i > 0 {
        point += d_k.column(i - 1);
    }
    if j > 0 {
        point += d_k.column(j - 1);
    }
    point
}

/// Enumerate the evaluated points reachable from the last iteration and turn
/// them into directions anchored at `x_next`.
///
/// Candidates are `x_k + s_k` and every pairwise sum `x_k + c_i + c_j`
/// (`i ≤ j`) of columns of `[0 | D_k]`. A candidate enters the pool only if
/// its exact point is in the ledger; duplicates collapse by ledger index and
/// the zero direction (`x_next` itself) is excluded.
pub fn build_candidate_pool(
    x_k: &DVector<f64>,
    x_next: &DVector<f64>,
    s_k: &DVector<f64>,
    d_k: &DMatrix<f64>,
    ledger: &EvaluationLedger,
) -> CandidatePool {
    let exclude = ledger.lookup(x_next);
    let mut seen: Vec<usize> = Vec::new();
    let mut entries = Vec::new();
    let mut push_candidate = |point: DVector<f64>| {
        if let Some(idx) = ledger.lookup(&point) {
            if Some(idx) != exclude && !seen.contains(&idx) {
                seen.push(idx);
                entries.push(PoolEntry { direction: ledger.point(idx) - x_next, ledger_index: idx });
            }
        }
    };
    push_candidate(x_k + s_k);
    let p = d_k.ncols();
    for i in 0..=p {
        for j in i..=p {
            push_candidate(pair_point(x_k, d_k, i, j));
        }
    }
    CandidatePool { entries }
}

const INDEPENDENCE_THRESHOLD: f64 = 1e-12;

/// Select, prune, and geometry-check reusable directions.
///
/// The pipeline, in order: shortest-first greedy selection of at most `p`
/// independent entries; removal of `p_rand` of them by the θ criterion (so
/// the result leaves room for that many fresh random directions); removal of
/// every direction longer than `eps_rad·delta_next`; one θ-removal per pass
/// while the smallest singular value sits below `eps_geo`; and finally
/// `extra_removals` more θ-removals (the driver uses this to force a full
/// resample periodically). Empty results are valid.
pub fn select_reusable(
    pool: &CandidatePool,
    delta_next: f64,
    p: usize,
    p_rand: usize,
    eps_rad: f64,
    eps_geo: f64,
    extra_removals: usize,
) -> Vec<PoolEntry> {
    assert!(p_rand >= 1 && p_rand <= p, "need 1 ≤ p_rand ≤ p");
    assert!(eps_rad >= 1.0, "eps_rad must be ≥ 1");

    // Step 1: greedy independent selection, shortest first. Ties in length
    // fall back to ledger order so the sort is a total order.
    let mut order: Vec<&PoolEntry> = pool.entries.iter().collect();
    order.sort_by(|a, b| {
        let (na, nb) = (a.direction.norm(), b.direction.norm());
        na.partial_cmp(&nb).unwrap().then(a.ledger_index.cmp(&b.ledger_index))
    });
    let mut selected: Vec<PoolEntry> = Vec::new();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for entry in order {
        if selected.len() == p {
            break;
        }
        let mut residual = entry.direction.clone();
        for b in &basis {
            let coeff = b.dot(&residual);
            residual -= b * coeff;
        }
        let r_norm = residual.norm();
        if r_norm >= INDEPENDENCE_THRESHOLD * entry.direction.norm().max(1.0) {
            basis.push(residual / r_norm);
            selected.push(entry.clone());
        }
    }

    // Step 2: make room for the p_rand random directions up front.
    for _ in 0..p_rand.min(selected.len()) {
        let victim = theta_argmax(&selected, delta_next);
        selected.remove(victim);
    }

    // Step 3: drop directions that overshoot the next trust region.
    selected.retain(|e| e.direction.norm() <= eps_rad * delta_next);

    // Step 4: restore geometry one removal at a time.
    while !selected.is_empty() && sigma_min_of(&selected) < eps_geo {
        let victim = theta_argmax(&selected, delta_next);
        selected.remove(victim);
    }

    // Step 5: optional forced removals.
    for _ in 0..extra_removals.min(selected.len()) {
        if selected.is_empty() {
            break;
        }
        let victim = theta_argmax(&selected, delta_next);
        selected.remove(victim);
    }

    selected
}

fn sigma_min_of(entries: &[PoolEntry]) -> f64 {
    if entries.is_empty() {
        return 0.0;
    }
    let cols: Vec<DVector<f64>> = entries.iter().map(|e| e.direction.clone()).collect();
    smallest_singular_value(&DMatrix::from_columns(&cols))
}

/// Index of the entry with the largest θ value; ties go to the smallest index.
fn theta_argmax(entries: &[PoolEntry], delta: f64) -> usize {
    let dirs: Vec<&DVector<f64>> = entries.iter().map(|e| &e.direction).collect();
    theta_argmax_dirs(&dirs, delta)
}

fn theta_argmax_dirs(dirs: &[&DVector<f64>], delta: f64) -> usize {
    let m = dirs.len();
    assert!(m >= 1);
    let mut best = 0;
    let mut best_theta = f64::NEG_INFINITY;
    for i in 0..m {
        let theta = theta_value(dirs, i, delta);
        if theta > best_theta {
            best_theta = theta;
            best = i;
        }
    }
    best
}

/// θ_i = σ_min(all columns but i) · max(‖d_i‖⁴/Δ⁴, 1).
pub(crate) fn theta_value(dirs: &[&DVector<f64>], i: usize, delta: f64) -> f64 {
    let sigma = if dirs.len() == 1 {
        0.0 // σ_min of a matrix with no columns
    } else {
        let others: Vec<DVector<f64>> =
            dirs.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, d)| (*d).clone()).collect();
        if others.len() == 1 {
            others[0].norm()
        } else {
            smallest_singular_value(&DMatrix::from_columns(&others))
        }
    };
    let ratio = dirs[i].norm() / delta;
    sigma * ratio.powi(4).max(1.0)
}

/// Remove `count` columns by repeated θ-argmax passes.
pub fn remove_by_theta(
    columns: &DMatrix<f64>,
    delta: f64,
    count: usize,
) -> Result<DMatrix<f64>, SampleSetError> {
    let m = columns.ncols();
    if count > m {
        return Err(SampleSetError::InvalidArgument(format!(
            "cannot remove {count} of {m} columns"
        )));
    }
    if !(delta > 0.0) {
        return Err(SampleSetError::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let mut cols: Vec<DVector<f64>> = (0..m).map(|j| columns.column(j).clone_owned()).collect();
    for _ in 0..count {
        let views: Vec<&DVector<f64>> = cols.iter().collect();
        let victim = theta_argmax_dirs(&views, delta);
        cols.remove(victim);
    }
    Ok(if cols.is_empty() {
        DMatrix::zeros(columns.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    })
}
