//! Benchmark objectives and ready-made constrained instances.
//!
//! The two classic test functions come with analytic gradients, but those
//! are for diagnostics and tests only: the solver sees nothing but the
//! value oracle. `oracled_quadratic` builds a problem whose constrained
//! minimizer is known in closed form, which end-to-end tests check against.

use std::sync::Arc;

use nalgebra::DVector;

use crate::sets::{ConvexSet, HalfspaceSense, ProjectionSettings};

/// `Σ_{i=1}^{n−1} (100(x_{i+1} − x_i²)² + (1 − x_i)²)`, minimum 0 at `1ₙ`.
///
/// Panics if `x` has fewer than two entries.
pub fn chain_rosenbrock(x: &DVector<f64>) -> f64 {
    let n = x.len();
    assert!(n >= 2, "chain Rosenbrock needs n ≥ 2, got {n}");
    let mut total = 0.0;
    for i in 0..n - 1 {
        let a = x[i + 1] - x[i] * x[i];
        let b = 1.0 - x[i];
        total += 100.0 * a * a + b * b;
    }
    total
}

/// Gradient of [`chain_rosenbrock`]; diagnostics only, the solver never
/// sees it.
pub fn chain_rosenbrock_gradient(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    assert!(n >= 2, "chain Rosenbrock needs n ≥ 2, got {n}");
    let mut g = DVector::zeros(n);
    for j in 0..n {
        if j < n - 1 {
            g[j] += -400.0 * x[j] * (x[j + 1] - x[j] * x[j]) - 2.0 * (1.0 - x[j]);
        }
        if j >= 1 {
            g[j] += 200.0 * (x[j] - x[j - 1] * x[j - 1]);
        }
    }
    g
}

/// `Σ_{i=1}^n (n − Σ_j cos x_j + i(1 − cos x_i) − sin x_i)²`, minimum 0
/// at the origin.
pub fn trigonometric(x: &DVector<f64>) -> f64 {
    let n = x.len();
    assert!(n >= 1, "trigonometric needs n ≥ 1");
    let cos_sum: f64 = x.iter().map(|v| v.cos()).sum();
    let mut total = 0.0;
    for i in 0..n {
        let inner =
            n as f64 - cos_sum + (i as f64 + 1.0) * (1.0 - x[i].cos()) - x[i].sin();
        total += inner * inner;
    }
    total
}

/// Gradient of [`trigonometric`]; diagnostics only.
pub fn trigonometric_gradient(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    assert!(n >= 1, "trigonometric needs n ≥ 1");
    let cos_sum: f64 = x.iter().map(|v| v.cos()).sum();
    let inner: Vec<f64> = (0..n)
        .map(|i| n as f64 - cos_sum + (i as f64 + 1.0) * (1.0 - x[i].cos()) - x[i].sin())
        .collect();
    let inner_sum: f64 = inner.iter().sum();
    DVector::from_fn(n, |k, _| {
        2.0 * x[k].sin() * inner_sum
            + 2.0 * inner[k] * ((k as f64 + 1.0) * x[k].sin() - x[k].cos())
    })
}

/// Shared value oracle; the only view of the objective the solver gets.
pub type Objective = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// A fully specified test problem: objective oracle, feasible set,
/// starting point, and (when known) the constrained optimum.
#[derive(Clone)]
pub struct ProblemInstance {
    pub name: String,
    pub dimension: usize,
    pub objective: Objective,
    pub set: ConvexSet,
    pub x0: DVector<f64>,
    pub known_optimum: Option<(DVector<f64>, f64)>,
}

impl std::fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("set", &self.set)
            .field("x0", &self.x0)
            .field("known_optimum", &self.known_optimum)
            .finish_non_exhaustive()
    }
}

/// The six standard constrained instances: each objective crossed with a
/// box, a ball, and a halfspace sized to the dimension.
///
/// Chain Rosenbrock starts at the origin with `[−1,1]ⁿ`, `Ball(0, √n)`,
/// or `1ᵀx ≥ 0`; trigonometric starts at `1ₙ` with `[0,2]ⁿ`,
/// `Ball(1ₙ, √n)`, or `1ᵀx ≤ n`.
pub fn standard_instances(n: usize) -> Vec<ProblemInstance> {
    assert!(n >= 2, "instances need n ≥ 2, got {n}");
    ["box", "ball", "halfspace"]
        .iter()
        .flat_map(|constraint| {
            ["chain_rosenbrock", "trigonometric"]
                .iter()
                .map(|problem| named_instance(problem, constraint, n).unwrap())
        })
        .collect()
}

/// Look up one of the six standard instances by objective and constraint
/// name (`chain_rosenbrock`/`trigonometric` × `box`/`ball`/`halfspace`).
pub fn named_instance(problem: &str, constraint: &str, n: usize) -> Option<ProblemInstance> {
    assert!(n >= 2, "instances need n ≥ 2, got {n}");
    let sqrt_n = (n as f64).sqrt();
    let ones = DVector::from_element(n, 1.0);
    let (objective, set, x0): (Objective, _, _) = match problem {
        "chain_rosenbrock" => {
            let set = match constraint {
                "box" => ConvexSet::axis_box(
                    DVector::from_element(n, -1.0),
                    DVector::from_element(n, 1.0),
                )
                .unwrap(),
                "ball" => ConvexSet::ball(DVector::zeros(n), sqrt_n).unwrap(),
                "halfspace" => {
                    ConvexSet::halfspace(ones.clone(), 0.0, HalfspaceSense::Ge).unwrap()
                }
                _ => return None,
            };
            (Arc::new(|x: &DVector<f64>| chain_rosenbrock(x)) as _, set, DVector::zeros(n))
        }
        "trigonometric" => {
            let set = match constraint {
                "box" => {
                    ConvexSet::axis_box(DVector::zeros(n), DVector::from_element(n, 2.0)).unwrap()
                }
                "ball" => ConvexSet::ball(ones.clone(), sqrt_n).unwrap(),
                "halfspace" => {
                    ConvexSet::halfspace(ones.clone(), n as f64, HalfspaceSense::Le).unwrap()
                }
                _ => return None,
            };
            (Arc::new(|x: &DVector<f64>| trigonometric(x)) as _, set, ones.clone())
        }
        _ => return None,
    };
    debug_assert!(set.contains(&x0, 0.0).unwrap());
    Some(ProblemInstance {
        name: format!("{problem}_{constraint}"),
        dimension: n,
        objective,
        set,
        x0,
        known_optimum: None,
    })
}

/// `f(x) = ‖x − c‖²` over `set`, with the optimum `proj(c)` computed in
/// closed form and the start at the projection of the origin.
pub fn oracled_quadratic(n: usize, c: DVector<f64>, set: ConvexSet) -> ProblemInstance {
    assert_eq!(c.len(), n);
    let settings = ProjectionSettings::default();
    let optimum_point = set.project(&c, &settings).unwrap();
    let optimum_value = (&optimum_point - &c).norm_squared();
    let x0 = set.project(&DVector::zeros(n), &settings).unwrap();
    let c_captured = c.clone();
    ProblemInstance {
        name: "oracled_quadratic".into(),
        dimension: n,
        objective: Arc::new(move |x: &DVector<f64>| (x - &c_captured).norm_squared()),
        set,
        x0,
        known_optimum: Some((optimum_point, optimum_value)),
    }
}
