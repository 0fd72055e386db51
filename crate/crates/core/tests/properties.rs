mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use sgapproach::approach::Controller;
use sgapproach::fixtures::{fix_chain, random_game};
use sgapproach::geometry::{Halfspace, TargetSet};
use sgapproach::learner::{gamma1, gamma2};
use sgapproach::model::{ergodic_cost, occupation_measure, induced_chain, StationaryPolicyPair};
use sgapproach::{
    brute_force_value, run_episode, scalarize, solve_minmax, AdversarySpec, EpisodeOptions, LeaderKind,
    LearnerConfig, PlannerOptions, PolicyTable, RecordStride,
};

use common::{dot, minmax_by_enumeration, norm, pair_cost, stationary_power, unit};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn ball() -> impl Strategy<Value = TargetSet> {
    (-1.0..1.0f64, -1.0..1.0f64, 0.01..0.8f64).prop_map(|(x, y, r)| TargetSet::ball(vec![x, y], r).unwrap())
}

fn boxed() -> impl Strategy<Value = TargetSet> {
    (-1.0..1.0f64, -1.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64)
        .prop_map(|(x, y, w, h)| TargetSet::boxed(vec![x, y], vec![x + w, y + h]).unwrap())
}

/// Bounded polygon: consecutive normals less than π apart around a center.
fn polygon() -> impl Strategy<Value = TargetSet> {
    (3usize..7, -0.5..0.5f64, -0.5..0.5f64, any::<u64>()).prop_map(|(m, cx, cy, seed)| {
        let mut h = seed;
        let mut next = || {
            h = h.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (h >> 11) as f64 / (1u64 << 53) as f64
        };
        let rows = (0..m)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / m as f64 + (next() - 0.5) * PI / (2.0 * m as f64);
                let n = unit(a);
                let offset = dot(&n, &[cx, cy]) + 0.1 + 0.4 * next();
                Halfspace { normal: n, offset }
            })
            .collect();
        TargetSet::halfspaces(rows).unwrap()
    })
}

fn convex_target() -> impl Strategy<Value = TargetSet> {
    prop_oneof![ball(), boxed(), polygon()]
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 2)
}

/// Points of a convex target to test obtuseness against.
fn samples_in(t: &TargetSet) -> Vec<Vec<f64>> {
    match t {
        TargetSet::Ball { center, radius } => (0..64)
            .map(|i| {
                let u = unit(2.0 * PI * i as f64 / 64.0);
                vec![center[0] + radius * u[0], center[1] + radius * u[1]]
            })
            .collect(),
        _ => {
            let v = t.extreme_points();
            let mut out = v.clone();
            for a in &v {
                for b in &v {
                    out.push(vec![(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]);
                }
            }
            out
        }
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn projection_is_nearest_and_obtuse(t in convex_target(), x in point()) {
        let proj = t.project(&x);
        prop_assert_eq!(proj.len(), 1);
        let p = &proj[0];
        let d = t.distance(&x);
        prop_assert!((norm(&[x[0] - p[0], x[1] - p[1]]) - d).abs() <= 1e-9);
        prop_assert!(t.distance(p) <= 1e-9);
        if d > 0.0 {
            for z in samples_in(&t) {
                let v = dot(&[x[0] - p[0], x[1] - p[1]], &[z[0] - p[0], z[1] - p[1]]);
                prop_assert!(v <= 1e-9, "obtuseness violated: {}", v);
            }
        }
    }

    #[test]
    fn support_point_in_own_direction(t in convex_target(), x in point()) {
        if let Some((p, lambda)) = t.steering(&x) {
            prop_assert!((norm(&lambda) - 1.0).abs() <= 1e-12);
            prop_assert!((dot(&p, &lambda) - t.support(&lambda).unwrap()).abs() <= 1e-8);
        }
    }

    #[test]
    fn width_is_nonnegative(t in convex_target(), a in 0.0..2.0 * PI) {
        let l = unit(a);
        let m = vec![-l[0], -l[1]];
        prop_assert!(t.support(&l).unwrap() + t.support(&m).unwrap() >= -1e-12);
    }

    #[test]
    fn distance_is_one_lipschitz(t in convex_target(), x in point(), y in point()) {
        let gap = (t.distance(&x) - t.distance(&y)).abs();
        prop_assert!(gap <= norm(&[x[0] - y[0], x[1] - y[1]]) + 1e-9);
    }

    #[test]
    fn ball_projection_closed_form(cx in -1.0..1.0f64, cy in -1.0..1.0f64, r in 0.01..1.0f64, x in point()) {
        let t = TargetSet::ball(vec![cx, cy], r).unwrap();
        let v = [x[0] - cx, x[1] - cy];
        let len = norm(&v);
        prop_assume!(len > r + 1e-6);
        let expected = [cx + r * v[0] / len, cy + r * v[1] / len];
        let p = t.nearest(&x);
        prop_assert!((p[0] - expected[0]).abs() < 1e-12 && (p[1] - expected[1]).abs() < 1e-12);
        prop_assert!((t.distance(&x) - (len - r)).abs() < 1e-12);
    }

    #[test]
    fn box_projection_is_clamp(t in boxed(), x in point()) {
        if let TargetSet::Box { lower, upper } = &t {
            let p = t.nearest(&x);
            for i in 0..2 {
                prop_assert_eq!(p[i], x[i].clamp(lower[i], upper[i]));
            }
        }
    }

    #[test]
    fn union_returns_all_tied_points(y in -1.0..1.0f64, r in 0.05..0.3f64) {
        // Mirror-image balls: every point on the mirror axis is tied.
        let t = TargetSet::union(vec![
            TargetSet::ball(vec![-0.5, 0.0], r).unwrap(),
            TargetSet::ball(vec![0.5, 0.0], r).unwrap(),
        ]).unwrap();
        let x = [0.0, y];
        let proj = t.project(&x);
        prop_assert_eq!(proj.len(), 2);
        for p in &proj {
            prop_assert!((norm(&[x[0] - p[0], x[1] - p[1]]) - t.distance(&x)).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn planner_matches_enumeration(seed in 0u64..10_000, a in 0.0..2.0 * PI) {
        let m = random_game(seed, 3, 2, 2, 2);
        let l = unit(a);
        let v = solve_minmax(&scalarize(&m, &l).unwrap(), &PlannerOptions::default()).unwrap().value;
        prop_assert!((v - brute_force_value(&m, &l).unwrap()).abs() <= 1e-6);
        prop_assert!((v - minmax_by_enumeration(&m, &l)).abs() <= 1e-6);
    }

    #[test]
    fn value_is_sqrt_k_lipschitz_in_direction(seed in 0u64..10_000, a in 0.0..2.0 * PI, b in 0.0..2.0 * PI) {
        let m = random_game(seed, 3, 2, 2, 2);
        let opts = PlannerOptions::default();
        let (l1, l2) = (unit(a), unit(b));
        let v1 = solve_minmax(&scalarize(&m, &l1).unwrap(), &opts).unwrap().value;
        let v2 = solve_minmax(&scalarize(&m, &l2).unwrap(), &opts).unwrap().value;
        let gap = norm(&[l1[0] - l2[0], l1[1] - l2[1]]);
        prop_assert!((v1 - v2).abs() <= 2f64.sqrt() * gap + 1e-8);
    }

    #[test]
    fn positive_scaling_keeps_policies(seed in 0u64..10_000, a in 0.0..2.0 * PI, alpha in 0.1..10.0f64) {
        let m = random_game(seed, 3, 2, 2, 2);
        let g = scalarize(&m, &unit(a)).unwrap();
        let opts = PlannerOptions::default();
        let base = solve_minmax(&g, &opts).unwrap();
        let scaled = solve_minmax(&g.scaled(alpha), &opts).unwrap();
        prop_assert_eq!(base.leader_policy, scaled.leader_policy);
        prop_assert_eq!(base.follower_response, scaled.follower_response);
        prop_assert!((scaled.value - alpha * base.value).abs() <= 1e-7 * alpha.max(1.0));
    }

    #[test]
    fn gain_equals_ergodic_cost_of_policies(seed in 0u64..10_000, a in 0.0..2.0 * PI) {
        let m = random_game(seed, 3, 2, 2, 2);
        let l = unit(a);
        let sol = solve_minmax(&scalarize(&m, &l).unwrap(), &PlannerOptions::default()).unwrap();
        let c = pair_cost(&m, &sol.leader_policy, &sol.follower_response);
        prop_assert!((sol.value - dot(&c, &l)).abs() <= 1e-8);
        prop_assert!((sol.value - sol.leader_gain).abs() <= 1e-8);
        prop_assert_eq!(sol.leader_relative_values[0], 0.0);
        prop_assert_eq!(sol.follower_relative_values[0], 0.0);
    }

    #[test]
    fn scalar_cost_is_projection(seed in 0u64..10_000, a in 0.0..2.0 * PI) {
        let m = random_game(seed, 2, 2, 3, 2);
        let l = unit(a);
        let g = scalarize(&m, &l).unwrap();
        for s in 0..2 { for a1 in 0..2 { for a2 in 0..3 {
            let c = g.cost(s, a1, a2);
            prop_assert!((c - dot(m.cost(s, a1, a2), &l)).abs() <= 1e-12);
            prop_assert!(c.abs() <= 2f64.sqrt());
        }}}
    }

    #[test]
    fn occupation_measure_is_invariant(seed in 0u64..10_000, w in prop::collection::vec(0.01..1.0f64, 12)) {
        let m = random_game(seed, 3, 2, 2, 2);
        let row = |x: f64, y: f64| vec![x / (x + y), y / (x + y)];
        let leader = PolicyTable::from_rows((0..3).map(|s| row(w[2 * s], w[2 * s + 1])).collect()).unwrap();
        let follower = PolicyTable::from_rows((0..6).map(|r| row(w[r], w[(r + 5) % 12])).collect()).unwrap();
        let pair = StationaryPolicyPair::new(&m, leader, follower).unwrap();
        let occ = occupation_measure(&m, &pair).unwrap();
        prop_assert!((occ.psi.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        for s in 0..3 {
            let marginal: f64 = occ.psi[s * 4..s * 4 + 4].iter().sum();
            prop_assert!((marginal - occ.eta[s]).abs() <= 1e-10);
        }
        let p = induced_chain(&m, &pair);
        let oracle = stationary_power(&p, 3);
        for s in 0..3 {
            prop_assert!((oracle[s] - occ.eta[s]).abs() <= 1e-10);
        }
        for c in ergodic_cost(&m, &occ) {
            prop_assert!(c.abs() <= 1.0 + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn cache_only_differs_within_theta(angles in prop::collection::vec(0.0..2.0 * PI, 1..40), radius in 0.3..1.5f64) {
        let m = random_game(5, 3, 2, 2, 2);
        let target = TargetSet::ball(vec![0.0, 0.0], 0.2).unwrap();
        let theta = 0.05;
        let mut cached = Controller::with_options(&m, target.clone(), theta, PlannerOptions::default()).unwrap();
        let mut fresh = Controller::with_options(&m, target.clone(), 0.0, PlannerOptions::default()).unwrap();
        for a in angles {
            let x = unit(a).iter().map(|v| v * radius).collect::<Vec<_>>();
            let p = cached.next_policy(&x).unwrap();
            let q = fresh.next_policy(&x).unwrap();
            if p.leader_policy != q.leader_policy {
                let (_, lambda) = target.steering(&x).unwrap();
                let held = cached.cached_lambda().unwrap();
                prop_assert!(norm(&[lambda[0] - held[0], lambda[1] - held[1]]) <= theta);
            }
        }
    }

    #[test]
    fn controller_is_deterministic(angles in prop::collection::vec(0.0..2.0 * PI, 1..30)) {
        let m = random_game(9, 3, 2, 2, 2);
        let target = TargetSet::boxed(vec![-0.1, -0.1], vec![0.1, 0.1]).unwrap();
        let mut a = Controller::new(&m, target.clone()).unwrap();
        let mut b = Controller::new(&m, target).unwrap();
        for t in angles {
            let x = unit(t);
            prop_assert_eq!(&a.next_policy(&x).unwrap().leader_policy, &b.next_policy(&x).unwrap().leader_policy);
        }
        prop_assert_eq!(a.planner_calls(), b.planner_calls());
    }

    #[test]
    fn drift_toward_target(a in 0.0..2.0 * PI, r in 0.25..1.5f64) {
        let m = fix_chain();
        let target = TargetSet::ball(vec![0.5, 0.5], 0.2).unwrap();
        let x = vec![0.5 + r * a.cos(), 0.5 + r * a.sin()];
        let (p, lambda) = target.steering(&x).unwrap();
        let sol = solve_minmax(&scalarize(&m, &lambda).unwrap(), &PlannerOptions::default()).unwrap();
        let y = pair_cost(&m, &sol.leader_policy, &sol.follower_response);
        prop_assert!(dot(&[y[0] - p[0], y[1] - p[1]], &lambda) <= 1e-7);
    }

    #[test]
    fn running_mean_identity(seed in 0u64..1000, steps in 1u64..400) {
        let m = random_game(seed, 3, 2, 2, 2);
        let target = TargetSet::ball(vec![0.0, 0.0], 0.1).unwrap();
        let opts = EpisodeOptions { record_stride: RecordStride::Every { every: 1 }, ..EpisodeOptions::default() };
        for leader in [LeaderKind::exact(), LeaderKind::Learn(LearnerConfig::default())] {
            let rec = run_episode(&m, &leader, &AdversarySpec::UniformRandom, &target, steps, seed, &opts).unwrap();
            prop_assert_eq!(rec.rows.len() as u64, steps);
            let mut sum = [0.0, 0.0];
            for (i, row) in rec.rows.iter().enumerate() {
                sum[0] += row.cost[0];
                sum[1] += row.cost[1];
                let n = (i + 1) as f64;
                prop_assert!((row.x[0] - sum[0] / n).abs() <= 1e-9);
                prop_assert!((row.x[1] - sum[1] / n).abs() <= 1e-9);
                prop_assert!(row.dist >= 0.0);
                prop_assert_eq!(row.cost.as_slice(), m.cost(row.s, row.a1, row.a2));
            }
        }
    }

    #[test]
    fn episodes_are_reproducible(seed in 0u64..1000) {
        let m = random_game(seed, 2, 2, 2, 2);
        let target = TargetSet::ball(vec![0.0, 0.0], 0.1).unwrap();
        let opts = EpisodeOptions { record_stride: RecordStride::Every { every: 7 }, ..EpisodeOptions::default() };
        let leader = LeaderKind::Learn(LearnerConfig::default());
        let a = run_episode(&m, &leader, &AdversarySpec::UniformRandom, &target, 500, seed, &opts).unwrap();
        let b = run_episode(&m, &leader, &AdversarySpec::UniformRandom, &target, 500, seed, &opts).unwrap();
        prop_assert_eq!(a.rows, b.rows);
    }
}

#[test]
fn step_size_contract() {
    // γ2(m)² = (m+1)^-1.2 is summable; γ1/γ2 = (n+1)^-0.4 decreases to 0.
    let tail: f64 = (1_000_000u64..2_000_000).map(|m| gamma2(m, 0.6).powi(2)).sum();
    assert!(tail < 5.0 * (1e6f64).powf(-0.2));
    let ratios: Vec<f64> = [10u64, 1_000, 100_000, 10_000_000]
        .iter()
        .map(|&n| gamma1(n) / gamma2(n, 0.6))
        .collect();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]));
    assert!(ratios[3] < 2e-3);
    let total: f64 = (0u64..1_000_000).map(|n| gamma2(n, 0.6)).sum();
    // Partial sums grow like (n+1)^0.4 / 0.4, about 628 here.
    assert!(total > 600.0);
}
