//! Exact min-max planning for the direction-scalarized game.
//!
//! For a unit direction `λ` the vector cost collapses to
//! `c̃(s, a1, a2) = ⟨c(s, a1, a2), λ⟩`. The follower faces an average-reward
//! MDP on the augmented state `(s, a1)`; the leader minimizes the follower's
//! best-response gain. Because the follower observes `a1`, the leader's
//! objective after the inner maximization is linear in `π1(·|s)`, so a pure
//! per-state minimizer exists and relative value iteration on
//!
//! ```text
//! (TV)(s) = min_{a1} max_{a2} [ c̃(s, a1, a2) + Σ_{s'} p(s, (a1, a2), s') V(s') ]
//! ```
//!
//! yields the min-max gain `c*(λ)`. [`brute_force_value`] enumerates
//! deterministic policy pairs as an independent check.

use crate::error::{Error, Result};
use crate::model::{
    ergodic_cost, occupation_measure, GameModel, PolicyTable, StationaryPolicyPair,
};
use crate::vecops::{argmax_lowest, argmin_lowest, dot, min_max, norm};

/// Tolerance on `‖λ‖ = 1`.
pub const UNIT_TOL: f64 = 1e-9;

/// Budget on deterministic pairs for [`brute_force_value`].
pub const BRUTE_FORCE_BUDGET: f64 = 1e7;

/// Solver settings for relative value iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerOptions {
    /// Stop when `span(TV - V)` falls below this.
    pub span_tol: f64,
    pub max_iters: usize,
    /// Weight `τ` in `V ← (1 - τ) V + τ TV`; makes periodic chains converge.
    pub damping: f64,
    /// Actions whose values are within this of the best are tied; the lowest
    /// index wins.
    pub tie_tol: f64,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        Self {
            span_tol: 1e-10,
            max_iters: 1_000_000,
            damping: 0.5,
            tie_tol: 1e-9,
        }
    }
}

/// The scalar game `c̃(s, a1, a2) = ⟨c(s, a1, a2), λ⟩`.
#[derive(Debug, Clone)]
pub struct ScalarGame<'a> {
    pub model: &'a GameModel,
    pub lambda: Vec<f64>,
    /// Indexed by [`GameModel::triple_index`].
    pub scalar_cost: Vec<f64>,
}

/// Scalarizes `model` along the unit direction `lambda`.
pub fn scalarize<'a>(model: &'a GameModel, lambda: &[f64]) -> Result<ScalarGame<'a>> {
    if lambda.len() != model.cost_dim() {
        return Err(Error::InvalidModel(format!(
            "direction has dimension {}, model has K = {}",
            lambda.len(),
            model.cost_dim()
        )));
    }
    let n = norm(lambda);
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnitDirection(n));
    }
    let scalar_cost = (0..model.n_triples())
        .map(|idx| {
            let (s, a1, a2) = model.triple_of(idx);
            dot(model.cost(s, a1, a2), lambda)
        })
        .collect();
    Ok(ScalarGame {
        model,
        lambda: lambda.to_vec(),
        scalar_cost,
    })
}

impl ScalarGame<'_> {
    #[inline]
    pub fn cost(&self, s: usize, a1: usize, a2: usize) -> f64 {
        self.scalar_cost[self.model.triple_index(s, a1, a2)]
    }

    /// Same game with every stage cost multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            model: self.model,
            lambda: self.lambda.clone(),
            scalar_cost: self.scalar_cost.iter().map(|c| c * alpha).collect(),
        }
    }
}

/// Output of [`solve_minmax`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerSolution {
    /// `c*(λ)`.
    pub value: f64,
    /// Deterministic leader policy `s -> a1`.
    pub leader_policy: Vec<usize>,
    /// Deterministic follower response `(s, a1) -> a2`, rows `s * |A1| + a1`.
    pub follower_response: Vec<usize>,
    /// Every minimizing leader action per state (within the tie tolerance).
    pub optimal_leader_actions: Vec<Vec<usize>>,
    /// `V̂` pinned at `V̂(s0) = 0`.
    pub leader_relative_values: Vec<f64>,
    /// `V` over `(s, a1)` pinned at `V((s0, a1_0)) = 0`.
    pub follower_relative_values: Vec<f64>,
    /// `β`: the follower's best-response gain against `leader_policy`.
    pub follower_gain: f64,
    /// `β̂`.
    pub leader_gain: f64,
    pub iterations: usize,
}

/// Output of [`follower_best_response`].
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerResponse {
    /// `β`.
    pub gain: f64,
    /// Deterministic maximizer `(s, a1) -> a2`, rows `s * |A1| + a1`.
    pub policy: Vec<usize>,
    /// `V` pinned at `V((s0, a1_0)) = 0`.
    pub relative_values: Vec<f64>,
    pub iterations: usize,
}

/// Solves the leader's min-max problem for a scalarized game.
pub fn solve_minmax(game: &ScalarGame<'_>, opts: &PlannerOptions) -> Result<PlannerSolution> {
    let model = game.model;
    let (ns, na1, na2) = (model.n_states(), model.n_actions1(), model.n_actions2());

    // q[(s * na1 + a1) * na2 + a2] = c̃ + Σ p V
    let fill_q = |v: &[f64], q: &mut [f64]| {
        for s in 0..ns {
            for a1 in 0..na1 {
                for a2 in 0..na2 {
                    let idx = model.triple_index(s, a1, a2);
                    q[idx] = game.scalar_cost[idx] + dot(model.transition(s, a1, a2), v);
                }
            }
        }
    };
    let minmax = |q: &[f64], s: usize| -> f64 {
        (0..na1)
            .map(|a1| {
                let row = &q[(s * na1 + a1) * na2..(s * na1 + a1 + 1) * na2];
                row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::INFINITY, f64::min)
    };

    let mut v = vec![0.0; ns];
    let mut tv = vec![0.0; ns];
    let mut q = vec![0.0; model.n_triples()];
    let mut last_span = f64::INFINITY;
    for iter in 1..=opts.max_iters {
        fill_q(&v, &mut q);
        for s in 0..ns {
            tv[s] = minmax(&q, s);
        }
        let diff: Vec<f64> = tv.iter().zip(&v).map(|(t, x)| t - x).collect();
        let (lo, hi) = min_max(&diff);
        last_span = hi - lo;
        if last_span <= opts.span_tol {
            let gain = 0.5 * (lo + hi);
            return Ok(extract_solution(game, opts, &v, &q, gain, iter));
        }
        let tau = opts.damping;
        for s in 0..ns {
            v[s] = (1.0 - tau) * v[s] + tau * tv[s];
        }
        let anchor = v[0];
        v.iter_mut().for_each(|x| *x -= anchor);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iters,
        last_span,
    })
}

fn extract_solution(
    game: &ScalarGame<'_>,
    opts: &PlannerOptions,
    v: &[f64],
    q: &[f64],
    gain: f64,
    iterations: usize,
) -> PlannerSolution {
    let model = game.model;
    let (ns, na1, na2) = (model.n_states(), model.n_actions1(), model.n_actions2());
    let mut follower_response = vec![0; ns * na1];
    let mut leader_policy = vec![0; ns];
    let mut optimal_leader_actions = Vec::with_capacity(ns);
    for s in 0..ns {
        let mut inner = vec![0.0; na1];
        for a1 in 0..na1 {
            let row = &q[(s * na1 + a1) * na2..(s * na1 + a1 + 1) * na2];
            let best = argmax_lowest(row, opts.tie_tol);
            follower_response[s * na1 + a1] = best;
            inner[a1] = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        leader_policy[s] = argmin_lowest(&inner, opts.tie_tol);
        let (lo, _) = min_max(&inner);
        optimal_leader_actions.push(
            (0..na1)
                .filter(|&a| inner[a] <= lo + opts.tie_tol)
                .collect(),
        );
    }

    let leader_table = PolicyTable::deterministic(&leader_policy, na1);
    let (follower_gain, follower_relative_values) =
        match follower_rvi(game, &leader_table, opts) {
            Ok(resp) => (resp.gain, resp.relative_values),
            // The pure pair is unichain under the standing assumption; keep
            // the leader gain if the follower solve still fails.
            Err(_) => (gain, vec![0.0; ns * na1]),
        };

    PlannerSolution {
        value: gain,
        leader_policy,
        follower_response,
        optimal_leader_actions,
        leader_relative_values: v.to_vec(),
        follower_relative_values,
        follower_gain,
        leader_gain: gain,
        iterations,
    }
}

/// Best response of the follower to a fixed stationary leader policy:
/// relative value iteration on the augmented chain over `(s, a1)` with
/// kernel `p̃((s̃, ã1) | (s, a1), a2) = p(s, (a1, a2), s̃) π1(ã1 | s̃)`.
pub fn follower_best_response(
    model: &GameModel,
    leader: &PolicyTable,
    lambda: &[f64],
    opts: &PlannerOptions,
) -> Result<FollowerResponse> {
    if leader.rows() != model.n_states() || leader.cols() != model.n_actions1() {
        return Err(Error::InvalidPolicy(format!(
            "leader table is {}x{}, expected {}x{}",
            leader.rows(),
            leader.cols(),
            model.n_states(),
            model.n_actions1()
        )));
    }
    let game = scalarize(model, lambda)?;
    follower_rvi(&game, leader, opts)
}

fn follower_rvi(
    game: &ScalarGame<'_>,
    leader: &PolicyTable,
    opts: &PlannerOptions,
) -> Result<FollowerResponse> {
    let model = game.model;
    let (ns, na1, na2) = (model.n_states(), model.n_actions1(), model.n_actions2());
    let n_aug = ns * na1;

    let mut v = vec![0.0; n_aug];
    let mut tv = vec![0.0; n_aug];
    let mut w = vec![0.0; ns];
    let mut last_span = f64::INFINITY;
    for iter in 1..=opts.max_iters {
        // W(s̃) = Σ_ã1 π1(ã1 | s̃) V(s̃, ã1)
        for (s, ws) in w.iter_mut().enumerate() {
            *ws = dot(leader.row(s), &v[s * na1..(s + 1) * na1]);
        }
        for s in 0..ns {
            for a1 in 0..na1 {
                tv[s * na1 + a1] = (0..na2)
                    .map(|a2| game.cost(s, a1, a2) + dot(model.transition(s, a1, a2), &w))
                    .fold(f64::NEG_INFINITY, f64::max);
            }
        }
        let diff: Vec<f64> = tv.iter().zip(&v).map(|(t, x)| t - x).collect();
        let (lo, hi) = min_max(&diff);
        last_span = hi - lo;
        if last_span <= opts.span_tol {
            let mut policy = vec![0; n_aug];
            for s in 0..ns {
                for a1 in 0..na1 {
                    let vals: Vec<f64> = (0..na2)
                        .map(|a2| game.cost(s, a1, a2) + dot(model.transition(s, a1, a2), &w))
                        .collect();
                    policy[s * na1 + a1] = argmax_lowest(&vals, opts.tie_tol);
                }
            }
            return Ok(FollowerResponse {
                gain: 0.5 * (lo + hi),
                policy,
                relative_values: v,
                iterations: iter,
            });
        }
        let tau = opts.damping;
        for i in 0..n_aug {
            v[i] = (1.0 - tau) * v[i] + tau * tv[i];
        }
        let anchor = v[0];
        v.iter_mut().for_each(|x| *x -= anchor);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iters,
        last_span,
    })
}

/// Min over deterministic leader policies of max over deterministic follower
/// policies of the exact scalarized average cost.
///
/// The follower faces an MDP once the leader is fixed, so pure responses
/// attain the max; the leader's min is attained by a pure policy because the
/// follower observes `a1` (see the module docs).
pub fn brute_force_value(model: &GameModel, lambda: &[f64]) -> Result<f64> {
    let (ns, na1, na2) = (model.n_states(), model.n_actions1(), model.n_actions2());
    let n_leaders = (na1 as f64).powi(ns as i32);
    let n_followers = (na2 as f64).powi((ns * na1) as i32);
    if n_leaders * n_followers > BRUTE_FORCE_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: n_leaders * n_followers,
            budget: BRUTE_FORCE_BUDGET,
        });
    }
    if (norm(lambda) - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnitDirection(norm(lambda)));
    }

    let mut best = f64::INFINITY;
    let mut leader = vec![0usize; ns];
    loop {
        let mut worst = f64::NEG_INFINITY;
        let mut follower = vec![0usize; ns * na1];
        loop {
            let pair = StationaryPolicyPair::deterministic(model, &leader, &follower)?;
            let occ = occupation_measure(model, &pair)?;
            worst = worst.max(dot(&ergodic_cost(model, &occ), lambda));
            if !advance(&mut follower, na2) {
                break;
            }
        }
        best = best.min(worst);
        if !advance(&mut leader, na1) {
            break;
        }
    }
    Ok(best)
}

/// Mixed-radix increment; false once every digit has wrapped.
fn advance(digits: &mut [usize], radix: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{fix_chain, fix_match, fix_rand};

    const S2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn scalarize_fixtures() {
        let m = fix_match();
        let g = scalarize(&m, &[1.0, 0.0]).unwrap();
        for a1 in 0..2 {
            for a2 in 0..2 {
                assert_eq!(g.cost(0, a1, a2), if a1 == a2 { 1.0 } else { 0.0 });
            }
        }
        let g = scalarize(&m, &[0.0, 1.0]).unwrap();
        assert_eq!(g.cost(0, 0, 1), 1.0);

        let c = fix_chain();
        let g = scalarize(&c, &[S2, S2]).unwrap();
        assert!(g.scalar_cost.iter().all(|&v| (v - S2).abs() < 1e-15));
    }

    #[test]
    fn scalarize_rejects_non_unit() {
        assert!(matches!(
            scalarize(&fix_match(), &[1.0, 1.0]),
            Err(Error::NonUnitDirection(_))
        ));
    }

    #[test]
    fn match_value_is_one() {
        let m = fix_match();
        let sol = solve_minmax(&scalarize(&m, &[1.0, 0.0]).unwrap(), &PlannerOptions::default())
            .unwrap();
        assert!((sol.value - 1.0).abs() < 1e-9);
        assert_eq!(sol.follower_response, vec![0, 1]);
        assert!((brute_force_value(&m, &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_value_and_policy() {
        // Four leader policies give η0 ∈ {0.1, 0.5, 0.5, 0.9}; the best
        // switches out of s0 and stays in s1.
        let m = fix_chain();
        let sol = solve_minmax(&scalarize(&m, &[1.0, 0.0]).unwrap(), &PlannerOptions::default())
            .unwrap();
        assert!((sol.value - 0.1).abs() < 1e-9, "{}", sol.value);
        assert_eq!(sol.leader_policy, vec![1, 0]);
        assert_eq!(sol.leader_relative_values[0], 0.0);
        assert!((sol.follower_gain - 0.1).abs() < 1e-8);
        assert!((brute_force_value(&m, &[1.0, 0.0]).unwrap() - 0.1).abs() < 1e-12);
        assert!((brute_force_value(&m, &[-1.0, 0.0]).unwrap() + 0.9).abs() < 1e-12);
    }

    #[test]
    fn random_game_matches_brute_force() {
        for seed in 0..5 {
            let m = fix_rand(seed);
            let lambda = [0.6, -0.8];
            let sol =
                solve_minmax(&scalarize(&m, &lambda).unwrap(), &PlannerOptions::default()).unwrap();
            let oracle = brute_force_value(&m, &lambda).unwrap();
            assert!((sol.value - oracle).abs() < 1e-6, "seed {seed}");
        }
    }

    #[test]
    fn follower_matches_observed_action() {
        let m = fix_match();
        let opts = PlannerOptions::default();
        let r = follower_best_response(&m, &PolicyTable::uniform(1, 2), &[1.0, 0.0], &opts)
            .unwrap();
        assert!((r.gain - 1.0).abs() < 1e-9);
        assert_eq!(r.policy, vec![0, 1]);
        assert_eq!(r.relative_values[0], 0.0);

        let r = follower_best_response(&m, &PolicyTable::deterministic(&[0], 2), &[1.0, 0.0], &opts)
            .unwrap();
        assert!((r.gain - 1.0).abs() < 1e-9);
        assert_eq!(r.policy[0], 0);
    }

    #[test]
    fn follower_singleton_equals_policy_cost() {
        let m = fix_chain();
        let leader = PolicyTable::from_rows(vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let lambda = [0.6, 0.8];
        let r = follower_best_response(&m, &leader, &lambda, &PlannerOptions::default()).unwrap();
        let pair =
            StationaryPolicyPair::new(&m, leader, PolicyTable::uniform(4, 1)).unwrap();
        let cost = ergodic_cost(&m, &occupation_measure(&m, &pair).unwrap());
        assert!((r.gain - dot(&cost, &lambda)).abs() < 1e-8);
    }

    #[test]
    fn non_convergence_is_reported() {
        let m = fix_rand(1);
        let opts = PlannerOptions {
            max_iters: 2,
            ..PlannerOptions::default()
        };
        let err = solve_minmax(&scalarize(&m, &[1.0, 0.0]).unwrap(), &opts).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 2, .. }));
    }

    #[test]
    fn brute_force_budget() {
        let m = crate::fixtures::random_game(0, 6, 3, 3, 1);
        assert!(matches!(
            brute_force_value(&m, &[1.0]),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
