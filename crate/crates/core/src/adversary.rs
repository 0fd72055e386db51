//! Agent-2 behaviors. The follower always sees the leader's action first.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{component_rng, stream};
use crate::error::{Error, Result};
use crate::geometry::TargetSet;
use crate::model::{sample_categorical, GameModel, PolicyTable};
use crate::planner::{follower_best_response, PlannerOptions};

pub const DEFAULT_REFRESH_PERIOD: u64 = 1000;

fn default_refresh() -> u64 {
    DEFAULT_REFRESH_PERIOD
}

/// JSON description of an adversary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversarySpec {
    /// Best response to the leader's current policy along `λ(x)`,
    /// recomputed every `refresh_period` steps.
    WorstCase {
        #[serde(default = "default_refresh")]
        refresh_period: u64,
    },
    /// Fixed randomized policy; row `s * |A1| + a1` is `π2(· | s, a1)`.
    Stationary { policy: Vec<Vec<f64>> },
    /// Plays these actions in order, then fails.
    Scripted { actions: Vec<usize> },
    UniformRandom,
}

impl AdversarySpec {
    pub fn worst_case() -> Self {
        AdversarySpec::WorstCase {
            refresh_period: DEFAULT_REFRESH_PERIOD,
        }
    }

    /// `Stationary` with uniform rows.
    pub fn stationary_uniform(model: &GameModel) -> Self {
        let na2 = model.n_actions2();
        AdversarySpec::Stationary {
            policy: vec![vec![1.0 / na2 as f64; na2]; model.n_states() * model.n_actions1()],
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            AdversarySpec::WorstCase { .. } => "worst_case",
            AdversarySpec::Stationary { .. } => "stationary",
            AdversarySpec::Scripted { .. } => "scripted",
            AdversarySpec::UniformRandom => "uniform_random",
        }
    }
}

/// What the leader currently plays, as seen by an informed adversary.
#[derive(Debug, Clone, Copy)]
pub enum LeaderView<'a> {
    Deterministic(&'a [usize]),
    Randomized(&'a PolicyTable),
}

impl LeaderView<'_> {
    fn to_table(self, n_actions1: usize) -> PolicyTable {
        match self {
            LeaderView::Deterministic(choices) => PolicyTable::deterministic(choices, n_actions1),
            LeaderView::Randomized(t) => t.clone(),
        }
    }
}

/// Information available to the adversary at one step.
#[derive(Debug, Clone, Copy)]
pub struct AdversaryContext<'a> {
    pub step: u64,
    pub x: &'a [f64],
    pub target: &'a TargetSet,
    pub leader: LeaderView<'a>,
}

#[derive(Debug, Clone)]
enum Behavior {
    WorstCase {
        period: u64,
        last_refresh: Option<u64>,
        response: Vec<usize>,
    },
    Stationary(PolicyTable),
    Scripted { actions: Vec<usize>, pos: usize },
    Uniform,
}

/// A running adversary with its own RNG stream.
#[derive(Debug, Clone)]
pub struct Adversary<'m> {
    model: &'m GameModel,
    behavior: Behavior,
    opts: PlannerOptions,
    rng: ChaCha8Rng,
    refreshes: usize,
}

impl<'m> Adversary<'m> {
    pub fn new(spec: &AdversarySpec, model: &'m GameModel, seed: u64) -> Result<Self> {
        let na2 = model.n_actions2();
        let behavior = match spec {
            AdversarySpec::WorstCase { refresh_period } => {
                if *refresh_period == 0 {
                    return Err(Error::Config("refresh_period must be >= 1".into()));
                }
                Behavior::WorstCase {
                    period: *refresh_period,
                    last_refresh: None,
                    response: Vec::new(),
                }
            }
            AdversarySpec::Stationary { policy } => {
                let expected = model.n_states() * model.n_actions1();
                if policy.len() != expected {
                    return Err(Error::InvalidPolicy(format!(
                        "stationary adversary has {} rows, expected |S|·|A1| = {expected}",
                        policy.len()
                    )));
                }
                if policy.iter().any(|r| r.len() != na2) {
                    return Err(Error::InvalidPolicy(format!(
                        "stationary adversary rows must have |A2| = {na2} entries"
                    )));
                }
                Behavior::Stationary(PolicyTable::from_rows(policy.clone())?)
            }
            AdversarySpec::Scripted { actions } => {
                if actions.is_empty() {
                    return Err(Error::InvalidPolicy("scripted adversary needs actions".into()));
                }
                if let Some(&a) = actions.iter().find(|&&a| a >= na2) {
                    return Err(Error::IndexOutOfRange(format!(
                        "scripted action {a} >= |A2| = {na2}"
                    )));
                }
                Behavior::Scripted {
                    actions: actions.clone(),
                    pos: 0,
                }
            }
            AdversarySpec::UniformRandom => Behavior::Uniform,
        };
        Ok(Self {
            model,
            behavior,
            opts: PlannerOptions::default(),
            rng: component_rng(seed, stream::ADVERSARY),
            refreshes: 0,
        })
    }

    /// Number of best-response recomputations so far (worst case only).
    pub fn refreshes(&self) -> usize {
        self.refreshes
    }

    /// Agent 2's action at `s` after observing `a1`.
    pub fn act(&mut self, s: usize, a1: usize, ctx: &AdversaryContext<'_>) -> Result<usize> {
        let model = self.model;
        let na1 = model.n_actions1();
        let na2 = model.n_actions2();
        if s >= model.n_states() || a1 >= na1 {
            return Err(Error::IndexOutOfRange(format!("(s, a1) = ({s}, {a1})")));
        }
        match &mut self.behavior {
            Behavior::WorstCase {
                period,
                last_refresh,
                response,
            } => {
                let due = last_refresh.is_none_or(|t| ctx.step >= t + *period);
                if due {
                    let lambda = match ctx.target.steering(ctx.x) {
                        Some((_, l)) => Some(l),
                        None if response.is_empty() => {
                            let mut axis = vec![0.0; model.cost_dim()];
                            axis[0] = 1.0;
                            Some(axis)
                        }
                        // Inside the target: keep the last response.
                        None => None,
                    };
                    if let Some(lambda) = lambda {
                        let leader = ctx.leader.to_table(na1);
                        let br = follower_best_response(model, &leader, &lambda, &self.opts)?;
                        *response = br.policy;
                        *last_refresh = Some(ctx.step);
                        self.refreshes += 1;
                    }
                }
                Ok(response[s * na1 + a1])
            }
            Behavior::Stationary(table) => Ok(sample_categorical(table.row(s * na1 + a1), &mut self.rng)),
            Behavior::Scripted { actions, pos } => {
                let a = *actions.get(*pos).ok_or(Error::ScriptExhausted(actions.len()))?;
                *pos += 1;
                Ok(a)
            }
            Behavior::Uniform => Ok(self.rng.random_range(0..na2)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{fix_chain, fix_match};

    fn ctx<'a>(x: &'a [f64], target: &'a TargetSet, leader: &'a [usize]) -> AdversaryContext<'a> {
        AdversaryContext {
            step: 0,
            x,
            target,
            leader: LeaderView::Deterministic(leader),
        }
    }

    #[test]
    fn worst_case_matches_leader() {
        let m = fix_match();
        let target = TargetSet::boxed(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        let mut adv = Adversary::new(&AdversarySpec::worst_case(), &m, 0).unwrap();
        for leader in [[0usize], [1]] {
            let mut c = ctx(&[1.0, 0.0], &target, &leader);
            for a1 in 0..2 {
                c.step += 1000;
                assert_eq!(adv.act(0, a1, &c).unwrap(), a1);
            }
        }
    }

    #[test]
    fn worst_case_refreshes_on_period() {
        let m = fix_match();
        let target = TargetSet::ball(vec![0.5, 0.5], 0.1).unwrap();
        let mut adv = Adversary::new(&AdversarySpec::WorstCase { refresh_period: 10 }, &m, 0).unwrap();
        let leader = [0usize];
        let mut c = ctx(&[1.0, 0.0], &target, &leader);
        for step in 0..25 {
            c.step = step;
            adv.act(0, 0, &c).unwrap();
        }
        assert_eq!(adv.refreshes(), 3);
        // Inside the target the last response is kept.
        c.x = &[0.5, 0.5];
        c.step = 100;
        adv.act(0, 0, &c).unwrap();
        assert_eq!(adv.refreshes(), 3);
    }

    #[test]
    fn stationary_uniform_frequencies() {
        let m = fix_match();
        let target = TargetSet::ball(vec![0.5, 0.5], 0.1).unwrap();
        let mut adv = Adversary::new(&AdversarySpec::stationary_uniform(&m), &m, 4).unwrap();
        let leader = [0usize];
        let c = ctx(&[0.0, 0.0], &target, &leader);
        let n = 100_000;
        let ones: usize = (0..n).map(|_| adv.act(0, 0, &c).unwrap()).sum();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn scripted_then_exhausted() {
        let m = fix_match();
        let target = TargetSet::ball(vec![0.5, 0.5], 0.1).unwrap();
        let spec = AdversarySpec::Scripted {
            actions: vec![0, 1, 0],
        };
        let mut adv = Adversary::new(&spec, &m, 0).unwrap();
        let leader = [0usize];
        let c = ctx(&[0.0, 0.0], &target, &leader);
        let got: Vec<usize> = (0..3).map(|_| adv.act(0, 0, &c).unwrap()).collect();
        assert_eq!(got, vec![0, 1, 0]);
        assert!(matches!(adv.act(0, 0, &c), Err(Error::ScriptExhausted(3))));
    }

    #[test]
    fn invalid_specs_rejected() {
        let m = fix_chain();
        assert!(Adversary::new(&AdversarySpec::Scripted { actions: vec![] }, &m, 0).is_err());
        assert!(Adversary::new(&AdversarySpec::Scripted { actions: vec![1] }, &m, 0).is_err());
        assert!(Adversary::new(
            &AdversarySpec::Stationary {
                policy: vec![vec![1.0]; 3]
            },
            &m,
            0
        )
        .is_err());
        assert!(Adversary::new(&AdversarySpec::WorstCase { refresh_period: 0 }, &m, 0).is_err());
    }

    #[test]
    fn seeded_reproducible() {
        let m = fix_match();
        let target = TargetSet::ball(vec![0.5, 0.5], 0.1).unwrap();
        let leader = [0usize];
        let c = ctx(&[0.0, 0.0], &target, &leader);
        let run = |seed| {
            let mut adv = Adversary::new(&AdversarySpec::UniformRandom, &m, seed).unwrap();
            (0..64).map(|_| adv.act(0, 1, &c).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn spec_json_forms() {
        let s: AdversarySpec = serde_json::from_str(r#"{"type":"worst_case"}"#).unwrap();
        assert_eq!(s, AdversarySpec::worst_case());
        let s: AdversarySpec = serde_json::from_str(r#"{"type":"uniform_random"}"#).unwrap();
        assert_eq!(s, AdversarySpec::UniformRandom);
        assert!(serde_json::from_str::<AdversarySpec>(r#"{"type":"worst_case","period":5}"#).is_err());
    }
}
