//! Convex constraint sets with projection and membership oracles.
//!
//! Four closed-form primitives (axis-aligned box, Euclidean ball, halfspace,
//! whole space) plus finite intersections, which are projected onto with
//! Dykstra's alternating method. Also provides the lifted projection onto
//! `Qᵀ(C ∩ col(Q))` needed when a subproblem lives in a subspace spanned by
//! the orthonormal columns of `Q`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Errors from set construction and projection.
#[derive(Debug, Error)]
pub enum SetError {
    #[error("dimension mismatch: set expects {expected}, point has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid set description: {0}")]
    InvalidDescriptor(String),
    #[error("basis matrix does not have orthonormal columns (max deviation {deviation:.3e})")]
    NonOrthonormalBasis { deviation: f64 },
}

/// Tolerances for Dykstra's alternating projection.
///
/// Defaults are two digits tighter than the subproblem solver needs, so
/// projection error never dominates the quantities computed from it.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionSettings {
    /// Stop once no single projection in a full sweep moves the iterate
    /// further than this.
    pub dykstra_tol: f64,
    /// Hard cap on sweeps; hitting it is reported, not an error.
    pub dykstra_max_iter: usize,
}

impl Default for ProjectionSettings {
    fn default() -> Self {
        Self { dykstra_tol: 1e-10, dykstra_max_iter: 1000 }
    }
}

/// Which side of a halfspace boundary is feasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfspaceSense {
    /// `normalᵀx ≤ offset`
    Le,
    /// `normalᵀx ≥ offset`
    Ge,
}

/// A closed convex subset of Rⁿ.
///
/// Build values through the checked constructors ([`ConvexSet::axis_box`] and
/// friends); they enforce the invariants documented on each variant.
#[derive(Debug, Clone)]
pub enum ConvexSet {
    /// `{x : lower ≤ x ≤ upper}` componentwise, with nonempty interior.
    AxisBox { lower: DVector<f64>, upper: DVector<f64> },
    /// `{x : ‖x − center‖ ≤ radius}` with `radius > 0`.
    Ball { center: DVector<f64>, radius: f64 },
    /// `{x : normalᵀx ≤ offset}`; `≥` inputs are negated into this form.
    Halfspace { normal: DVector<f64>, offset: f64 },
    /// Nonempty list of members, all of the same dimension.
    Intersection(Vec<ConvexSet>),
    /// All of Rⁿ, any n. Lets unconstrained runs share the constrained code path.
    WholeSpace,
}

impl ConvexSet {
    /// Axis-aligned box `[lower, upper]`.
    pub fn axis_box(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self, SetError> {
        if lower.len() != upper.len() {
            return Err(SetError::DimensionMismatch { expected: lower.len(), found: upper.len() });
        }
        if lower.is_empty() {
            return Err(SetError::InvalidDescriptor("box in zero dimensions".into()));
        }
        let mut has_interior = false;
        for i in 0..lower.len() {
            if lower[i] > upper[i] {
                return Err(SetError::InvalidDescriptor(format!(
                    "box bounds crossed in component {i}: {} > {}",
                    lower[i], upper[i]
                )));
            }
            if lower[i] < upper[i] {
                has_interior = true;
            }
        }
        if !has_interior {
            return Err(SetError::InvalidDescriptor("box has empty interior".into()));
        }
        Ok(ConvexSet::AxisBox { lower, upper })
    }

    /// Euclidean ball of positive radius.
    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self, SetError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(SetError::InvalidDescriptor(format!("ball radius {radius} not positive")));
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    /// Halfspace `normalᵀx ≤ offset` (or `≥` with [`HalfspaceSense::Ge`]).
    pub fn halfspace(
        normal: DVector<f64>,
        offset: f64,
        sense: HalfspaceSense,
    ) -> Result<Self, SetError> {
        if normal.norm() == 0.0 {
            return Err(SetError::InvalidDescriptor("halfspace normal is zero".into()));
        }
        match sense {
            HalfspaceSense::Le => Ok(ConvexSet::Halfspace { normal, offset }),
            HalfspaceSense::Ge => Ok(ConvexSet::Halfspace { normal: -normal, offset: -offset }),
        }
    }

    /// Intersection of a nonempty list of same-dimension members.
    pub fn intersection(members: Vec<ConvexSet>) -> Result<Self, SetError> {
        if members.is_empty() {
            return Err(SetError::InvalidDescriptor("intersection with no members".into()));
        }
        let mut dim = None;
        for m in &members {
            if let Some(d) = m.dim() {
                match dim {
                    None => dim = Some(d),
                    Some(prev) if prev != d => {
                        return Err(SetError::DimensionMismatch { expected: prev, found: d })
                    }
                    _ => {}
                }
            }
        }
        Ok(ConvexSet::Intersection(members))
    }

    /// Ambient dimension, if the set pins one down (`WholeSpace` does not).
    pub fn dim(&self) -> Option<usize> {
        match self {
            ConvexSet::AxisBox { lower, .. } => Some(lower.len()),
            ConvexSet::Ball { center, .. } => Some(center.len()),
            ConvexSet::Halfspace { normal, .. } => Some(normal.len()),
            ConvexSet::Intersection(members) => members.iter().find_map(|m| m.dim()),
            ConvexSet::WholeSpace => None,
        }
    }

    fn check_dim(&self, point: &DVector<f64>) -> Result<(), SetError> {
        match self.dim() {
            Some(d) if d != point.len() => {
                Err(SetError::DimensionMismatch { expected: d, found: point.len() })
            }
            _ => Ok(()),
        }
    }

    /// Membership test with slack `tol` on the constraint residual.
    ///
    /// Exact arithmetic for the closed-form variants when `tol = 0`.
    pub fn contains(&self, point: &DVector<f64>, tol: f64) -> Result<bool, SetError> {
        self.check_dim(point)?;
        Ok(match self {
            ConvexSet::AxisBox { lower, upper } => (0..point.len())
                .all(|i| point[i] >= lower[i] - tol && point[i] <= upper[i] + tol),
            ConvexSet::Ball { center, radius } => (point - center).norm() <= radius + tol,
            ConvexSet::Halfspace { normal, offset } => normal.dot(point) - offset <= tol,
            ConvexSet::Intersection(members) => {
                for m in members {
                    if !m.contains(point, tol)? {
                        return Ok(false);
                    }
                }
                true
            }
            ConvexSet::WholeSpace => true,
        })
    }

    /// Euclidean projection onto the set.
    ///
    /// Closed-form for the primitives; Dykstra's method for intersections,
    /// bounded by `settings` (a non-converged Dykstra run returns its best
    /// iterate; use [`dykstra_project`] directly to observe the flag).
    pub fn project(
        &self,
        point: &DVector<f64>,
        settings: &ProjectionSettings,
    ) -> Result<DVector<f64>, SetError> {
        self.check_dim(point)?;
        Ok(match self {
            ConvexSet::AxisBox { lower, upper } => {
                DVector::from_fn(point.len(), |i, _| point[i].clamp(lower[i], upper[i]))
            }
            ConvexSet::Ball { center, radius } => {
                let d = point - center;
                let dist = d.norm();
                if dist <= *radius {
                    point.clone()
                } else {
                    center + d * (*radius / dist)
                }
            }
            ConvexSet::Halfspace { normal, offset } => {
                let excess = normal.dot(point) - offset;
                if excess <= 0.0 {
                    point.clone()
                } else {
                    point - normal * (excess / normal.norm_squared())
                }
            }
            ConvexSet::Intersection(members) => {
                if members.len() == 1 {
                    members[0].project(point, settings)?
                } else {
                    dykstra_project(members, point, settings)?.point
                }
            }
            ConvexSet::WholeSpace => point.clone(),
        })
    }

    /// The set shifted by `-shift`: `{y : y + shift ∈ self}`.
    ///
    /// Used to re-anchor a constraint at the current iterate, so that step
    /// vectors rather than absolute points can be tested against it.
    pub fn translated(&self, shift: &DVector<f64>) -> ConvexSet {
        match self {
            ConvexSet::AxisBox { lower, upper } => {
                ConvexSet::AxisBox { lower: lower - shift, upper: upper - shift }
            }
            ConvexSet::Ball { center, radius } => {
                ConvexSet::Ball { center: center - shift, radius: *radius }
            }
            ConvexSet::Halfspace { normal, offset } => ConvexSet::Halfspace {
                normal: normal.clone(),
                offset: offset - normal.dot(shift),
            },
            ConvexSet::Intersection(members) => {
                ConvexSet::Intersection(members.iter().map(|m| m.translated(shift)).collect())
            }
            ConvexSet::WholeSpace => ConvexSet::WholeSpace,
        }
    }
}

/// Result of a Dykstra run.
#[derive(Debug, Clone)]
pub struct DykstraOutcome {
    /// Best iterate found (the projection, when `converged`).
    pub point: DVector<f64>,
    /// Whether the displacement test passed before the sweep cap.
    pub converged: bool,
    /// Full sweeps performed.
    pub sweeps: usize,
}

/// Dykstra's alternating projection onto an intersection of convex sets.
///
/// Classic form with one correction term per set, swept in member order.
/// Stops when no single projection in a sweep moves the iterate more than
/// `dykstra_tol`, or at `dykstra_max_iter` sweeps (reported via `converged`).
pub fn dykstra_project(
    sets: &[ConvexSet],
    point: &DVector<f64>,
    settings: &ProjectionSettings,
) -> Result<DykstraOutcome, SetError> {
    if sets.len() < 2 {
        return Err(SetError::InvalidDescriptor(
            "Dykstra needs at least two sets; call project on the single set instead".into(),
        ));
    }
    for s in sets {
        s.check_dim(point)?;
    }
    let projectors: Vec<Projector> = sets
        .iter()
        .map(|s| {
            let s = s.clone();
            let settings = *settings;
            Box::new(move |z: &DVector<f64>| {
                s.project(z, &settings).expect("dimensions checked before the sweep loop")
            }) as Projector
        })
        .collect();
    Ok(dykstra_generic(&projectors, point, settings))
}

pub(crate) type Projector = Box<dyn Fn(&DVector<f64>) -> DVector<f64>>;

/// Dykstra over arbitrary exact projectors. Shared by the public entry
/// points and by the subproblem solver, which mixes set projections with
/// subspace and trust-region ball projectors.
pub(crate) fn dykstra_generic(
    projectors: &[Projector],
    point: &DVector<f64>,
    settings: &ProjectionSettings,
) -> DykstraOutcome {
    let m = projectors.len();
    let mut x = point.clone();
    let mut corrections = vec![DVector::zeros(point.len()); m];
    for sweep in 1..=settings.dykstra_max_iter {
        let mut max_displacement: f64 = 0.0;
        for (proj, correction) in projectors.iter().zip(corrections.iter_mut()) {
            let candidate = &x + &*correction;
            let projected = proj(&candidate);
            *correction = candidate - &projected;
            max_displacement = max_displacement.max((&projected - &x).norm());
            x = projected;
        }
        if max_displacement <= settings.dykstra_tol {
            return DykstraOutcome { point: x, converged: true, sweeps: sweep };
        }
    }
    DykstraOutcome { point: x, converged: false, sweeps: settings.dykstra_max_iter }
}

/// Projection onto `Qᵀ(C ∩ col(Q))` for an orthonormal-column `Q`.
///
/// Runs Dykstra on the ambient point `Q·s_hat`, alternating between `C` and
/// the subspace `col(Q)` (projector `QQᵀ`), then pulls the result back with
/// `Qᵀ`. The subspace projection is applied last in each sweep, so the final
/// ambient iterate lies in `col(Q)` exactly and `Qᵀ` loses nothing.
pub fn project_lifted(
    set: &ConvexSet,
    q: &DMatrix<f64>,
    s_hat: &DVector<f64>,
    settings: &ProjectionSettings,
) -> Result<DVector<f64>, SetError> {
    if s_hat.len() != q.ncols() {
        return Err(SetError::DimensionMismatch { expected: q.ncols(), found: s_hat.len() });
    }
    let deviation = orthonormality_deviation(q);
    if deviation > 1e-10 {
        return Err(SetError::NonOrthonormalBasis { deviation });
    }
    let ambient = q * s_hat;
    set.check_dim(&ambient)?;
    if matches!(set, ConvexSet::WholeSpace) {
        return Ok(s_hat.clone());
    }
    let set_proj = {
        let set = set.clone();
        let settings = *settings;
        Box::new(move |z: &DVector<f64>| {
            set.project(z, &settings).expect("dimension checked on entry")
        }) as Projector
    };
    let subspace_proj = {
        let q = q.clone();
        Box::new(move |z: &DVector<f64>| &q * (q.transpose() * z)) as Projector
    };
    let outcome = dykstra_generic(&[set_proj, subspace_proj], &ambient, settings);
    Ok(q.transpose() * outcome.point)
}

/// Max absolute entry of `QᵀQ − I`.
pub(crate) fn orthonormality_deviation(q: &DMatrix<f64>) -> f64 {
    let gram = q.transpose() * q;
    let p = q.ncols();
    let mut dev: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((gram[(i, j)] - target).abs());
        }
    }
    dev
}

/// First-order stationarity measure of a direction `v` at `x` over `set`:
/// `|vᵀ(proj(x − v/‖v‖) − x)|`, the decrease of the linearization along one
/// projected unit step. Returns 0 for vanishing `v`.
pub(crate) fn projected_step_measure(
    set: &ConvexSet,
    x: &DVector<f64>,
    v: &DVector<f64>,
    settings: &ProjectionSettings,
) -> Result<f64, SetError> {
    let norm = v.norm();
    if norm <= 1e-14 {
        return Ok(0.0);
    }
    let probe = x - v / norm;
    let projected = set.project(&probe, settings)?;
    Ok(v.dot(&(projected - x)).abs())
}
