//! The Blackwell-style controller and the approachability condition checks.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TargetSet;
use crate::model::GameModel;
use crate::planner::{scalarize, solve_minmax, PlannerOptions, PlannerSolution};
use crate::vecops::{dist, dot, norm};

/// Slack allowed in `c*(λ) <= h_D(λ)`.
pub const COND_TOL: f64 = 1e-7;

/// Default re-solve threshold on `‖λ - cached_λ‖`.
pub const DEFAULT_THETA: f64 = 0.05;

/// Seed for random direction sets when `K >= 4`.
const DIRECTION_SEED: u64 = 0x5eed;

/// Picks a leader policy for the current running average.
///
/// Outside the target the policy is the planner's minimizer for
/// `λ(x) = (x - P_D(x)) / ‖x - P_D(x)‖`, re-solved only when `λ` moved by
/// more than `theta` since the last solve. Inside the target the last policy
/// is held.
#[derive(Debug, Clone)]
pub struct Controller<'m> {
    model: &'m GameModel,
    target: TargetSet,
    theta: f64,
    opts: PlannerOptions,
    cached_lambda: Option<Vec<f64>>,
    cached: Option<Arc<PlannerSolution>>,
    planner_calls: usize,
}

impl<'m> Controller<'m> {
    pub fn new(model: &'m GameModel, target: TargetSet) -> Result<Self> {
        Self::with_options(model, target, DEFAULT_THETA, PlannerOptions::default())
    }

    pub fn with_options(
        model: &'m GameModel,
        target: TargetSet,
        theta: f64,
        opts: PlannerOptions,
    ) -> Result<Self> {
        if target.dim() != model.cost_dim() {
            return Err(Error::InvalidTarget(format!(
                "target has dimension {}, model has K = {}",
                target.dim(),
                model.cost_dim()
            )));
        }
        if !(theta >= 0.0) {
            return Err(Error::Config(format!("theta must be >= 0, got {theta}")));
        }
        Ok(Self {
            model,
            target,
            theta,
            opts,
            cached_lambda: None,
            cached: None,
            planner_calls: 0,
        })
    }

    pub fn target(&self) -> &TargetSet {
        &self.target
    }

    pub fn planner_calls(&self) -> usize {
        self.planner_calls
    }

    /// Direction the cached policy was solved for.
    pub fn cached_lambda(&self) -> Option<&[f64]> {
        self.cached_lambda.as_deref()
    }

    /// The leader policy to play at running average `x`.
    pub fn next_policy(&mut self, x: &[f64]) -> Result<Arc<PlannerSolution>> {
        let lambda = match self.target.steering(x) {
            Some((_, lambda)) => lambda,
            None => {
                if let Some(sol) = &self.cached {
                    return Ok(Arc::clone(sol));
                }
                let mut axis = vec![0.0; self.model.cost_dim()];
                axis[0] = 1.0;
                axis
            }
        };
        let stale = match &self.cached_lambda {
            Some(prev) => dist(prev, &lambda) > self.theta,
            None => true,
        };
        if stale || self.cached.is_none() {
            let sol = solve_minmax(&scalarize(self.model, &lambda)?, &self.opts)?;
            self.planner_calls += 1;
            self.cached = Some(Arc::new(sol));
            self.cached_lambda = Some(lambda);
        }
        Ok(Arc::clone(self.cached.as_ref().expect("cache filled above")))
    }
}

/// One evaluated direction of a condition sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionCheck {
    pub lambda: Vec<f64>,
    /// `c*(λ)`.
    pub value: f64,
    /// `h_D(λ)`.
    pub support: f64,
}

impl DirectionCheck {
    /// `c*(λ) - h_D(λ)`; positive means the halfspace is not approachable.
    pub fn excess(&self) -> f64 {
        self.value - self.support
    }
}

/// Outcome of [`check_approachable_convex`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexCertificate {
    pub approachable: bool,
    pub directions_checked: usize,
    pub tolerance: f64,
    /// Direction with the largest `c*(λ) - h_D(λ)`.
    pub worst: DirectionCheck,
    /// Set when some direction violates the condition; it is the worst one.
    pub counterexample: Option<Vec<f64>>,
    pub note: String,
}

/// Unit directions covering the sphere in `R^k`: an angular grid for `k = 2`,
/// a Fibonacci lattice for `k = 3`, seeded Gaussian draws otherwise.
pub fn direction_grid(k: usize, n: usize) -> Vec<Vec<f64>> {
    match k {
        0 => Vec::new(),
        1 => [1.0, -1.0].iter().take(n).map(|&v| vec![v]).collect(),
        2 => (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(DIRECTION_SEED);
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let g: Vec<f64> = (0..k).map(|_| gaussian(&mut rng)).collect();
                let len = norm(&g);
                if len > 1e-12 {
                    out.push(g.iter().map(|v| v / len).collect());
                }
            }
            out
        }
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Sweeps unit directions and checks `c*(λ) <= h_D(λ) + COND_TOL`.
///
/// A violation is a halfspace containing `D` that the adversary can keep
/// the average out of, so `D` is not approachable. Passing every direction is
/// sampled evidence only.
pub fn check_approachable_convex(
    model: &GameModel,
    target: &TargetSet,
    n_directions: usize,
    opts: &PlannerOptions,
) -> Result<ConvexCertificate> {
    if !target.is_convex() {
        return Err(Error::NonConvexSupport);
    }
    if target.dim() != model.cost_dim() {
        return Err(Error::InvalidTarget(format!(
            "target has dimension {}, model has K = {}",
            target.dim(),
            model.cost_dim()
        )));
    }
    let dirs = direction_grid(model.cost_dim(), n_directions);
    if dirs.is_empty() {
        return Err(Error::InsufficientData("no directions to check".into()));
    }
    let mut worst: Option<DirectionCheck> = None;
    for lambda in dirs.iter() {
        let value = solve_minmax(&scalarize(model, lambda)?, opts)?.value;
        let support = target.support(lambda)?;
        let check = DirectionCheck {
            lambda: lambda.clone(),
            value,
            support,
        };
        if worst.as_ref().is_none_or(|w| check.excess() > w.excess()) {
            worst = Some(check);
        }
    }
    let worst = worst.expect("at least one direction");
    let approachable = worst.excess() <= COND_TOL;
    let note = if approachable {
        format!(
            "c*(λ) <= h_D(λ) on all {} sampled directions; sampled evidence, not a proof",
            dirs.len()
        )
    } else {
        "a halfspace containing the target is not approachable, so the target is not".to_string()
    };
    Ok(ConvexCertificate {
        approachable,
        directions_checked: dirs.len(),
        tolerance: COND_TOL,
        counterexample: (!approachable).then(|| worst.lambda.clone()),
        worst,
        note,
    })
}

/// Points at which the non-convex condition is tested.
#[derive(Debug, Clone, PartialEq)]
pub enum PointSampler {
    /// Use exactly these points (those inside the target are skipped).
    Fixed(Vec<Vec<f64>>),
    /// Uniform draws from a box, rejecting points inside the target.
    UniformBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
        seed: u64,
    },
}

impl PointSampler {
    /// Uniform sampler over `[-1, 1]^k`, the range of the costs.
    pub fn cost_box(k: usize, seed: u64) -> Self {
        PointSampler::UniformBox {
            lower: vec![-1.0; k],
            upper: vec![1.0; k],
            seed,
        }
    }

    /// Up to `n` points outside `target`.
    pub fn sample(&self, target: &TargetSet, n: usize) -> Vec<Vec<f64>> {
        match self {
            PointSampler::Fixed(points) => points
                .iter()
                .filter(|x| !target.contains(x))
                .take(n)
                .cloned()
                .collect(),
            PointSampler::UniformBox { lower, upper, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut out = Vec::with_capacity(n);
                let max_draws = n.saturating_mul(1000).max(1000);
                for _ in 0..max_draws {
                    if out.len() == n {
                        break;
                    }
                    let x: Vec<f64> = lower
                        .iter()
                        .zip(upper)
                        .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                        .collect();
                    if !target.contains(&x) {
                        out.push(x);
                    }
                }
                out
            }
        }
    }
}

/// A point where the non-convex condition fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonconvexViolation {
    pub x: Vec<f64>,
    pub nearest: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `c*(λ)`.
    pub value: f64,
    /// `⟨P_D(x), λ⟩`.
    pub bound: f64,
}

/// Outcome of [`check_approachable_nonconvex`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonconvexReport {
    pub passed: bool,
    pub points_checked: usize,
    /// (point, nearest point) pairs evaluated.
    pub pairs_checked: usize,
    pub tolerance: f64,
    pub violations: Vec<NonconvexViolation>,
    pub note: Option<String>,
}

/// For each sampled `x` outside `D` and each of its nearest points `p`,
/// checks `c*(λ) <= ⟨p, λ⟩ + COND_TOL` with `λ = (x - p) / ‖x - p‖`.
pub fn check_approachable_nonconvex(
    model: &GameModel,
    target: &TargetSet,
    sampler: &PointSampler,
    n_points: usize,
    opts: &PlannerOptions,
) -> Result<NonconvexReport> {
    if target.dim() != model.cost_dim() {
        return Err(Error::InvalidTarget(format!(
            "target has dimension {}, model has K = {}",
            target.dim(),
            model.cost_dim()
        )));
    }
    let points = sampler.sample(target, n_points);
    let mut violations = Vec::new();
    let mut pairs = 0;
    for x in &points {
        for p in target.project(x) {
            let diff: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
            let len = norm(&diff);
            if len <= crate::geometry::INSIDE_TOL {
                continue;
            }
            let lambda: Vec<f64> = diff.iter().map(|d| d / len).collect();
            let value = solve_minmax(&scalarize(model, &lambda)?, opts)?.value;
            let bound = dot(&p, &lambda);
            pairs += 1;
            if value > bound + COND_TOL {
                violations.push(NonconvexViolation {
                    x: x.clone(),
                    nearest: p,
                    lambda,
                    value,
                    bound,
                });
            }
        }
    }
    let note = if points.is_empty() {
        Some("no samples".to_string())
    } else if points.len() < n_points {
        Some(format!("only {} of {n_points} points found outside the target", points.len()))
    } else {
        None
    };
    Ok(NonconvexReport {
        passed: violations.is_empty(),
        points_checked: points.len(),
        pairs_checked: pairs,
        tolerance: COND_TOL,
        violations,
        note,
    })
}
