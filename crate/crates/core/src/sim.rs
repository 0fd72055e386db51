//! Closed-loop episodes: leader, adversary, environment, running average.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adversary::{Adversary, AdversaryContext, AdversarySpec, LeaderView};
use crate::approach::{Controller, DEFAULT_THETA};
use crate::env::{Environment, ModelEnvironment};
use crate::error::{Error, Result};
use crate::geometry::TargetSet;
use crate::learner::{LearnerConfig, LearnerState, StepRecord};
use crate::model::GameModel;
use crate::planner::PlannerOptions;

/// Minimum number of rows [`metrics`] accepts.
pub const MIN_METRIC_ROWS: usize = 100;

/// Which steps end up in the trajectory. The final step is always kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum RecordStride {
    /// Powers of two plus every multiple of 10^4.
    #[default]
    Geometric,
    Every { every: u64 },
}


impl RecordStride {
    pub fn keeps(&self, n: u64, last: u64) -> bool {
        n == last
            || match self {
                RecordStride::Geometric => n.is_power_of_two() || n.is_multiple_of(10_000),
                RecordStride::Every { every } => n.is_multiple_of(*every.max(&1)),
            }
    }
}

/// Who plays agent 1.
#[derive(Debug, Clone, PartialEq)]
pub enum LeaderKind {
    /// The approachability controller with the known kernel.
    Exact { theta: f64, planner: PlannerOptions },
    /// The Q-learner; the kernel is only sampled.
    Learn(LearnerConfig),
}

impl LeaderKind {
    pub fn exact() -> Self {
        LeaderKind::Exact {
            theta: DEFAULT_THETA,
            planner: PlannerOptions::default(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            LeaderKind::Exact { .. } => "exact",
            LeaderKind::Learn(_) => "learn",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOptions {
    /// Overrides the learner's own `noise_std` when set.
    pub noise_std: Option<f64>,
    pub record_stride: RecordStride,
    pub initial_state: usize,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            noise_std: None,
            record_stride: RecordStride::Geometric,
            initial_state: 0,
        }
    }
}

/// One recorded step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub n: u64,
    pub s: usize,
    pub a1: usize,
    /// The real adversary's action.
    pub a2: usize,
    pub cost: Vec<f64>,
    pub x: Vec<f64>,
    pub dist: f64,
    /// Exploration rate; learner runs only.
    pub eps: Option<f64>,
}

/// Per-run metadata, written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub steps: u64,
    pub leader: String,
    pub adversary: AdversarySpec,
    pub target: TargetSet,
    pub cost_dim: usize,
    pub noise_std: f64,
    pub theta: Option<f64>,
    pub learner: Option<LearnerConfig>,
    pub policy_recompute_count: usize,
    pub adversary_refreshes: usize,
    /// Largest `|Q|` seen during a learner run.
    pub q_sup: Option<f64>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub rows: Vec<TrajectoryRow>,
    pub meta: RunMeta,
}

/// What an observer sees after each step.
pub struct StepView<'a> {
    pub n: u64,
    pub s: usize,
    pub a1: usize,
    pub a2: usize,
    pub x: &'a [f64],
    /// Present on learner runs.
    pub learner: Option<&'a LearnerState>,
}

/// Runs `steps` steps of the closed loop from `x_0 = 0`.
pub fn run_episode(
    model: &GameModel,
    leader: &LeaderKind,
    adversary: &AdversarySpec,
    target: &TargetSet,
    steps: u64,
    seed: u64,
    opts: &EpisodeOptions,
) -> Result<TrajectoryRecord> {
    run_episode_observed(model, leader, adversary, target, steps, seed, opts, |_| {})
}

/// [`run_episode`] with a callback after every step.
#[allow(clippy::too_many_arguments)]
pub fn run_episode_observed(
    model: &GameModel,
    leader: &LeaderKind,
    adversary: &AdversarySpec,
    target: &TargetSet,
    steps: u64,
    seed: u64,
    opts: &EpisodeOptions,
    mut observer: impl FnMut(&StepView<'_>),
) -> Result<TrajectoryRecord> {
    if steps == 0 {
        return Err(Error::Config("steps must be >= 1".into()));
    }
    if target.dim() != model.cost_dim() {
        return Err(Error::InvalidTarget(format!(
            "target has dimension {}, model has K = {}",
            target.dim(),
            model.cost_dim()
        )));
    }
    if opts.initial_state >= model.n_states() {
        return Err(Error::IndexOutOfRange(format!(
            "initial state {} >= |S| = {}",
            opts.initial_state,
            model.n_states()
        )));
    }
    let started = Instant::now();
    let noise_std = match (leader, opts.noise_std) {
        (_, Some(v)) => v,
        (LeaderKind::Learn(cfg), None) => cfg.noise_std,
        (LeaderKind::Exact { .. }, None) => 0.0,
    };
    let mut env = ModelEnvironment::with_noise(model, seed, noise_std)?;
    let mut adv = Adversary::new(adversary, model, seed)?;
    let mut rows = Vec::new();
    let push = |rows: &mut Vec<TrajectoryRow>, r: &StepRecord, eps: Option<f64>| {
        if opts.record_stride.keeps(r.n, steps) {
            rows.push(TrajectoryRow {
                n: r.n,
                s: r.s,
                a1: r.a1,
                a2: r.a2,
                cost: r.cost.clone(),
                x: r.x.clone(),
                dist: target.distance(&r.x),
                eps,
            });
        }
    };

    let (planner_calls, q_sup, theta, learner_cfg) = match leader {
        LeaderKind::Exact { theta, planner } => {
            let mut ctrl = Controller::with_options(model, target.clone(), *theta, *planner)?;
            let mut x = vec![0.0; model.cost_dim()];
            let mut s = opts.initial_state;
            for n in 1..=steps {
                let step = (|| -> Result<StepRecord> {
                    let sol = ctrl.next_policy(&x)?;
                    let a1 = sol.leader_policy[s];
                    let ctx = AdversaryContext {
                        step: n - 1,
                        x: &x,
                        target,
                        leader: LeaderView::Deterministic(&sol.leader_policy),
                    };
                    let a2 = adv.act(s, a1, &ctx)?;
                    let cost = env.observe_cost(s, a1, a2)?;
                    let g = 1.0 / n as f64;
                    for (xk, ck) in x.iter_mut().zip(&cost) {
                        *xk += g * (ck - *xk);
                    }
                    Ok(StepRecord {
                        n,
                        s,
                        a1,
                        a2,
                        cost,
                        x: x.clone(),
                        eps: 0.0,
                    })
                })()
                .map_err(|e| e.at_step(n))?;
                push(&mut rows, &step, None);
                observer(&StepView {
                    n,
                    s,
                    a1: step.a1,
                    a2: step.a2,
                    x: &x,
                    learner: None,
                });
                if n < steps {
                    s = env.step(s, step.a1, step.a2).map_err(|e| e.at_step(n))?;
                }
            }
            (ctrl.planner_calls(), None, Some(*theta), None)
        }
        LeaderKind::Learn(cfg) => {
            let mut st = LearnerState::for_env(cfg.clone(), &env, seed)?;
            let first = st
                .start(&mut env, &mut adv, target, opts.initial_state)
                .map_err(|e| e.at_step(1))?;
            push(&mut rows, &first, Some(first.eps));
            observer(&StepView {
                n: 1,
                s: first.s,
                a1: first.a1,
                a2: first.a2,
                x: st.x(),
                learner: Some(&st),
            });
            for n in 2..=steps {
                let r = st
                    .learner_step(&mut env, &mut adv, target)
                    .map_err(|e| e.at_step(n))?;
                push(&mut rows, &r, Some(r.eps));
                observer(&StepView {
                    n,
                    s: r.s,
                    a1: r.a1,
                    a2: r.a2,
                    x: st.x(),
                    learner: Some(&st),
                });
            }
            (0, Some(st.q_sup()), None, Some(cfg.clone()))
        }
    };

    Ok(TrajectoryRecord {
        rows,
        meta: RunMeta {
            seed,
            steps,
            leader: leader.label().to_string(),
            adversary: adversary.clone(),
            target: target.clone(),
            cost_dim: model.cost_dim(),
            noise_std,
            theta,
            learner: learner_cfg,
            policy_recompute_count: planner_calls,
            adversary_refreshes: adv.refreshes(),
            q_sup,
            wall_time_secs: started.elapsed().as_secs_f64(),
        },
    })
}

/// Summary of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub final_dist: f64,
    /// Largest distance over the last half of the records.
    pub max_dist_tail: f64,
    /// Least-squares slope of `log dist` against `log n` over the last half
    /// of the records, using rows with positive distance. `None` when fewer
    /// than two such rows exist.
    pub loglog_slope: Option<f64>,
    pub policy_recompute_count: usize,
}

pub fn metrics(traj: &TrajectoryRecord, target: &TargetSet) -> Result<Metrics> {
    if traj.rows.len() < MIN_METRIC_ROWS {
        return Err(Error::InsufficientData(format!(
            "metrics need at least {MIN_METRIC_ROWS} rows, got {}",
            traj.rows.len()
        )));
    }
    let dists: Vec<f64> = traj.rows.iter().map(|r| target.distance(&r.x)).collect();
    let tail = traj.rows.len() / 2;
    let ns: Vec<f64> = traj.rows[tail..].iter().map(|r| r.n as f64).collect();
    Ok(Metrics {
        final_dist: *dists.last().expect("nonempty"),
        max_dist_tail: dists[tail..].iter().copied().fold(0.0, f64::max),
        loglog_slope: loglog_slope(&ns, &dists[tail..]),
        policy_recompute_count: traj.meta.policy_recompute_count,
    })
}

/// Least-squares slope of `ln d` on `ln n` over pairs with `d > 0`.
pub fn loglog_slope(ns: &[f64], dists: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(dists)
        .filter(|(n, d)| **d > 0.0 && **n > 0.0)
        .map(|(n, d)| (n.ln(), d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{fix_chain, fix_match};

    fn ball() -> TargetSet {
        TargetSet::ball(vec![0.5, 0.5], 0.2).unwrap()
    }

    fn synthetic(dist: impl Fn(u64) -> f64) -> TrajectoryRecord {
        let target = TargetSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let rows = (1..=200u64)
            .map(|i| {
                let n = i * 100;
                let d = dist(n);
                TrajectoryRow {
                    n,
                    s: 0,
                    a1: 0,
                    a2: 0,
                    cost: vec![0.0, 0.0],
                    x: vec![1.0 + d, 0.0],
                    dist: d,
                    eps: None,
                }
            })
            .collect();
        TrajectoryRecord {
            rows,
            meta: RunMeta {
                seed: 0,
                steps: 20_000,
                leader: "exact".into(),
                adversary: AdversarySpec::UniformRandom,
                target,
                cost_dim: 2,
                noise_std: 0.0,
                theta: None,
                learner: None,
                policy_recompute_count: 7,
                adversary_refreshes: 0,
                q_sup: None,
                wall_time_secs: 0.0,
            },
        }
    }

    #[test]
    fn metric_slopes_on_synthetic_sequences() {
        let target = TargetSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let m = metrics(&synthetic(|n| 1.0 / n as f64), &target).unwrap();
        assert!((m.loglog_slope.unwrap() + 1.0).abs() < 0.05);
        assert_eq!(m.policy_recompute_count, 7);
        let m = metrics(&synthetic(|_| 0.3), &target).unwrap();
        assert!(m.loglog_slope.unwrap().abs() < 0.05);
        let m = metrics(&synthetic(|_| 0.0), &target).unwrap();
        assert_eq!(m.final_dist, 0.0);
        assert_eq!(m.loglog_slope, None);
    }

    #[test]
    fn metrics_need_rows() {
        let mut t = synthetic(|_| 0.1);
        t.rows.truncate(50);
        assert!(matches!(
            metrics(&t, &ball()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn geometric_stride() {
        let kept: Vec<u64> = (1..=20_000)
            .filter(|&n| RecordStride::Geometric.keeps(n, 20_001))
            .collect();
        assert_eq!(&kept[..5], &[1, 2, 4, 8, 16]);
        assert!(kept.contains(&10_000) && kept.contains(&20_000) && kept.contains(&16_384));
        assert!(RecordStride::Geometric.keeps(777, 777));
        assert!(RecordStride::Every { every: 10 }.keeps(30, 100));
    }

    #[test]
    fn scripted_costs_average() {
        let m = fix_match();
        let target = TargetSet::boxed(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        // The controller plays a1 = 0 throughout, so scripted 0 then 1 gives
        // costs (1,0) then (0,1).
        let spec = AdversarySpec::Scripted { actions: vec![0, 1] };
        let t = run_episode(&m, &LeaderKind::exact(), &spec, &target, 2, 0, &EpisodeOptions::default())
            .unwrap();
        assert_eq!(t.rows[0].cost, vec![1.0, 0.0]);
        assert_eq!(t.rows[1].cost, vec![0.0, 1.0]);
        assert_eq!(t.rows[1].x, vec![0.5, 0.5]);
    }

    #[test]
    fn running_mean_identity() {
        let m = crate::fixtures::fix_rand(4);
        let target = TargetSet::ball(vec![0.0, 0.0], 0.1).unwrap();
        let opts = EpisodeOptions {
            record_stride: RecordStride::Every { every: 1 },
            ..EpisodeOptions::default()
        };
        let t = run_episode(&m, &LeaderKind::exact(), &AdversarySpec::UniformRandom, &target, 3000, 1, &opts)
            .unwrap();
        let mut sum = [0.0; 2];
        for r in &t.rows {
            sum[0] += r.cost[0];
            sum[1] += r.cost[1];
            for k in 0..2 {
                assert!((r.x[k] - sum[k] / r.n as f64).abs() < 1e-9);
            }
            assert!(r.dist >= 0.0);
        }
    }

    #[test]
    fn chain_approaches_ball() {
        let m = fix_chain();
        let t = run_episode(
            &m,
            &LeaderKind::exact(),
            &AdversarySpec::worst_case(),
            &ball(),
            50_000,
            3,
            &EpisodeOptions::default(),
        )
        .unwrap();
        assert!(t.rows.last().unwrap().dist <= 0.05);
        assert!(t.meta.policy_recompute_count >= 1);
    }

    #[test]
    fn matching_game_stays_away() {
        let m = fix_match();
        let target = TargetSet::boxed(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        let t = run_episode(
            &m,
            &LeaderKind::exact(),
            &AdversarySpec::worst_case(),
            &target,
            20_000,
            0,
            &EpisodeOptions::default(),
        )
        .unwrap();
        assert!(t.rows.last().unwrap().dist >= 0.3);
    }

    #[test]
    fn errors_carry_step() {
        let m = fix_match();
        let spec = AdversarySpec::Scripted { actions: vec![0, 1, 0] };
        let err = run_episode(&m, &LeaderKind::exact(), &spec, &ball(), 10, 0, &EpisodeOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::AtStep { step: 4, .. }), "{err}");
    }

    #[test]
    fn learner_episode_is_deterministic() {
        let m = fix_chain();
        let leader = LeaderKind::Learn(LearnerConfig::default());
        let run = || {
            run_episode(&m, &leader, &AdversarySpec::UniformRandom, &ball(), 5000, 9, &EpisodeOptions::default())
                .unwrap()
                .rows
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.iter().all(|r| r.eps.is_some()));
    }
}
