//! Two-timescale Q-learning for approachability when the kernel is unknown.
//!
//! The leader keeps two tables over triples `(s, a1, a2)`:
//!
//! * `Q̂((s, a1), a2)`, the follower's relative Q-values on the augmented
//!   state `(s, a1)`, a maximizing RVI Q-learning iterate;
//! * `Q̃(s, (a1, a2))`, the leader's own Q-values, minimized over `a1`
//!   against the follower's greedy reply from `Q̂`.
//!
//! Both are driven by the scalarized cost `⟨c, λ(x_n)⟩` and step sizes
//! `γ2(ν̂)` indexed by per-triple visit counts, while the running average
//! `x_n` moves on the slower `γ1(n) = 1/(n+1)` scale. The follower's actions
//! in the updates are simulated by the leader; only `x_n` uses the costs the
//! real adversary produces.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{Adversary, AdversaryContext, LeaderView};
use crate::env::{component_rng, stream, Environment};
use crate::error::{Error, Result};
use crate::geometry::TargetSet;
use crate::model::PolicyTable;
use crate::vecops::{argmax_lowest, argmin_lowest, dot};

/// Tie tolerance for greedy extraction.
const GREEDY_TIE_TOL: f64 = 0.0;

/// Learner settings, as found in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    /// Initial exploration rate `ε_0`.
    pub eps0: f64,
    /// `γ2(m) = (m + 1)^(-gamma2_exponent)`; must lie in `(0.5, 1)`.
    pub gamma2_exponent: f64,
    /// Triple `[s, a1, a2]` whose Q-value serves as `f(Q)`.
    pub anchor: [usize; 3],
    /// Update every triple each step from generative samples.
    pub sync: bool,
    /// Observation noise on costs, used when the run does not set its own.
    pub noise_std: f64,
    /// Mixed into the run seed for the learner's private draws.
    pub seed: u64,
    /// Steps between refreshes of the direction used in the Q updates.
    pub lambda_epoch: u64,
    /// Lower bound on `ε_n`; zero keeps the pure `ε_0 / (n + 1)` decay.
    pub eps_floor: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            eps0: 0.3,
            gamma2_exponent: 0.6,
            anchor: [0, 0, 0],
            sync: false,
            noise_std: 0.0,
            seed: 0,
            lambda_epoch: 1,
            eps_floor: 0.0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0 <= 1.0) {
            return Err(Error::Config(format!("eps0 must lie in (0, 1], got {}", self.eps0)));
        }
        if !(self.gamma2_exponent > 0.5 && self.gamma2_exponent < 1.0) {
            return Err(Error::Config(format!(
                "gamma2_exponent must lie in (0.5, 1), got {}",
                self.gamma2_exponent
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        if !(self.eps_floor >= 0.0 && self.eps_floor <= self.eps0) {
            return Err(Error::Config(format!(
                "eps_floor must lie in [0, eps0], got {}",
                self.eps_floor
            )));
        }
        if self.lambda_epoch == 0 {
            return Err(Error::Config("lambda_epoch must be >= 1".into()));
        }
        Ok(())
    }
}

/// `γ1(n) = 1 / (n + 1)`.
pub fn gamma1(n: u64) -> f64 {
    1.0 / (n as f64 + 1.0)
}

/// `γ2(m) = 1 / (m + 1)^exponent`.
pub fn gamma2(m: u64, exponent: f64) -> f64 {
    (m as f64 + 1.0).powf(-exponent)
}

/// `ε_n = ε_0 / (n + 1)`, the closed form of `ε_{n+1} = ε_n (1 - 1/(n+2))`.
pub fn epsilon_at(eps0: f64, n: u64) -> f64 {
    eps0 / (n as f64 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedules {
    pub gamma1: f64,
    pub gamma2_base: f64,
    pub epsilon: f64,
}

pub fn schedules(n: u64, cfg: &LearnerConfig) -> Schedules {
    Schedules {
        gamma1: gamma1(n),
        gamma2_base: gamma2(n, cfg.gamma2_exponent),
        epsilon: epsilon_at(cfg.eps0, n),
    }
}

/// `f(Q) = Q[anchor]`.
pub fn reference_value(q: &[f64], anchor: usize) -> f64 {
    q[anchor]
}

/// One realized step of the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Number of costs averaged into `x`, counting this one.
    pub n: u64,
    pub s: usize,
    pub a1: usize,
    /// The real adversary's action.
    pub a2: usize,
    pub cost: Vec<f64>,
    pub x: Vec<f64>,
    /// Exploration rate used to pick `a1`.
    pub eps: f64,
}

/// Full learner state.
#[derive(Debug, Clone)]
pub struct LearnerState {
    cfg: LearnerConfig,
    n_states: usize,
    n_actions1: usize,
    n_actions2: usize,
    q_hat: Vec<f64>,
    q_tilde: Vec<f64>,
    visit_counts: Vec<u64>,
    x: Vec<f64>,
    epsilon: f64,
    /// Completed Q-update rounds.
    updates: u64,
    /// Costs averaged into `x`.
    n: u64,
    anchor: usize,
    lambda: Option<Vec<f64>>,
    frozen_lambda: bool,
    q_sup: f64,
    // Current triple: state, actual leader action, simulated and actual
    // follower actions.
    s: usize,
    a1: usize,
    a2_sim: usize,
    a2_actual: usize,
    rng: ChaCha8Rng,
}

impl LearnerState {
    /// Zero-initialized tables for a game with the given dimensions.
    pub fn new(
        cfg: LearnerConfig,
        n_states: usize,
        n_actions1: usize,
        n_actions2: usize,
        cost_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let [s0, a10, a20] = cfg.anchor;
        if s0 >= n_states || a10 >= n_actions1 || a20 >= n_actions2 {
            return Err(Error::IndexOutOfRange(format!(
                "anchor ({s0}, {a10}, {a20}) outside ({n_states}, {n_actions1}, {n_actions2})"
            )));
        }
        let n_triples = n_states * n_actions1 * n_actions2;
        let anchor = (s0 * n_actions1 + a10) * n_actions2 + a20;
        let mixed = seed ^ cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        Ok(Self {
            epsilon: cfg.eps0,
            cfg,
            n_states,
            n_actions1,
            n_actions2,
            q_hat: vec![0.0; n_triples],
            q_tilde: vec![0.0; n_triples],
            visit_counts: vec![0; n_triples],
            x: vec![0.0; cost_dim],
            updates: 0,
            n: 0,
            anchor,
            lambda: None,
            frozen_lambda: false,
            q_sup: 0.0,
            s: 0,
            a1: 0,
            a2_sim: 0,
            a2_actual: 0,
            rng: component_rng(mixed, stream::LEARNER),
        })
    }

    /// State sized for `env`.
    pub fn for_env<E: Environment + ?Sized>(cfg: LearnerConfig, env: &E, seed: u64) -> Result<Self> {
        Self::new(
            cfg,
            env.n_states(),
            env.n_actions1(),
            env.n_actions2(),
            env.cost_dim(),
            seed,
        )
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    #[inline]
    fn idx(&self, s: usize, a1: usize, a2: usize) -> usize {
        (s * self.n_actions1 + a1) * self.n_actions2 + a2
    }

    /// `Q̂`, indexed `((s, a1), a2)` row-major.
    pub fn q_hat(&self) -> &[f64] {
        &self.q_hat
    }

    /// `Q̃`, same layout as [`q_hat`](Self::q_hat).
    pub fn q_tilde(&self) -> &[f64] {
        &self.q_tilde
    }

    pub fn q_hat_mut(&mut self) -> &mut [f64] {
        &mut self.q_hat
    }

    pub fn q_tilde_mut(&mut self) -> &mut [f64] {
        &mut self.q_tilde
    }

    /// `ν̂`: simulated-triple visit counts, summing to [`n`](Self::n).
    pub fn visit_counts(&self) -> &[u64] {
        &self.visit_counts
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Exploration rate actually used for sampling: `max(ε_n, eps_floor)`.
    pub fn behavior_eps(&self) -> f64 {
        self.epsilon.max(self.cfg.eps_floor)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    /// Current state of the real system.
    pub fn state(&self) -> usize {
        self.s
    }

    /// Direction currently used to scalarize costs.
    pub fn lambda(&self) -> Option<&[f64]> {
        self.lambda.as_deref()
    }

    /// Largest `|Q|` entry ever held by either table.
    pub fn q_sup(&self) -> f64 {
        self.q_sup
    }

    /// Smallest `ν̂(n, ·) / n` over all triples.
    pub fn min_visit_fraction(&self) -> f64 {
        let min = self.visit_counts.iter().copied().min().unwrap_or(0);
        if self.n == 0 {
            0.0
        } else {
            min as f64 / self.n as f64
        }
    }

    /// Use `lambda` in every update from now on, ignoring `x`.
    pub fn freeze_lambda(&mut self, lambda: Vec<f64>) {
        self.lambda = Some(lambda);
        self.frozen_lambda = true;
    }

    /// The follower update at `((s, a1), a2)` with step `gamma`:
    /// `Q̂ += γ (c̃ + max_z Q̂((s', â1), z) - f(Q̂) - Q̂((s, a1), a2))`.
    #[allow(clippy::too_many_arguments)]
    pub fn update_follower_q(
        &mut self,
        s: usize,
        a1: usize,
        a2: usize,
        s_next: usize,
        a1_hat: usize,
        c_tilde: f64,
        gamma: f64,
    ) {
        let row = self.idx(s_next, a1_hat, 0);
        let best = self.q_hat[row..row + self.n_actions2]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let f = reference_value(&self.q_hat, self.anchor);
        let i = self.idx(s, a1, a2);
        self.q_hat[i] += gamma * (c_tilde + best - f - self.q_hat[i]);
        self.q_sup = self.q_sup.max(self.q_hat[i].abs());
    }

    /// `argmax_z Q̂((s, a1), z)`, lowest index on ties.
    pub fn follower_greedy(&self, s: usize, a1: usize) -> usize {
        let row = self.idx(s, a1, 0);
        argmax_lowest(&self.q_hat[row..row + self.n_actions2], GREEDY_TIE_TOL)
    }

    /// `min_y Q̃(s, (y, argmax_z Q̂(s, y, z)))` and its lowest minimizer.
    fn leader_value(&self, s: usize) -> (f64, usize) {
        let vals: Vec<f64> = (0..self.n_actions1)
            .map(|y| self.q_tilde[self.idx(s, y, self.follower_greedy(s, y))])
            .collect();
        let best = argmin_lowest(&vals, GREEDY_TIE_TOL);
        (vals[best], best)
    }

    /// The leader update at `(s, (a1, a2))` with step `gamma`, using the
    /// already updated `Q̂` for the follower's reply at `s'`.
    #[allow(clippy::too_many_arguments)]
    pub fn update_leader_q(
        &mut self,
        s: usize,
        a1: usize,
        a2: usize,
        s_next: usize,
        c_tilde: f64,
        gamma: f64,
    ) {
        let (next, _) = self.leader_value(s_next);
        let f = reference_value(&self.q_tilde, self.anchor);
        let i = self.idx(s, a1, a2);
        self.q_tilde[i] += gamma * (c_tilde + next - f - self.q_tilde[i]);
        self.q_sup = self.q_sup.max(self.q_tilde[i].abs());
    }

    /// Greedy pair: leader `s -> a1`, follower rows `s * |A1| + a1 -> a2`.
    pub fn greedy_policies(&self) -> (Vec<usize>, Vec<usize>) {
        let leader = (0..self.n_states).map(|s| self.leader_value(s).1).collect();
        let follower = (0..self.n_states)
            .flat_map(|s| (0..self.n_actions1).map(move |a1| (s, a1)))
            .map(|(s, a1)| self.follower_greedy(s, a1))
            .collect();
        (leader, follower)
    }

    /// Greedy leader action at `s`.
    pub fn greedy_leader(&self, s: usize) -> usize {
        self.leader_value(s).1
    }

    /// `π^{ε,1} = (1 - ε) δ_greedy + ε uniform` as a table.
    pub fn leader_behavior(&self, eps: f64) -> PolicyTable {
        PolicyTable::epsilon_mixture(&self.greedy_policies().0, self.n_actions1, eps)
    }

    fn explore(&mut self, greedy: usize, n_actions: usize, eps: f64) -> usize {
        if self.rng.random::<f64>() < eps {
            self.rng.random_range(0..n_actions)
        } else {
            greedy
        }
    }

    /// Draw from `π^{ε,1}(· | s)`.
    pub fn sample_leader(&mut self, s: usize, eps: f64) -> usize {
        let g = self.greedy_leader(s);
        self.explore(g, self.n_actions1, eps)
    }

    /// Draw from `π^{ε,2}(· | s, a1)`.
    pub fn sample_follower(&mut self, s: usize, a1: usize, eps: f64) -> usize {
        let g = self.follower_greedy(s, a1);
        self.explore(g, self.n_actions2, eps)
    }

    fn refresh_lambda(&mut self, target: &TargetSet) {
        if self.frozen_lambda {
            return;
        }
        let due = self.lambda.is_none() || self.updates.is_multiple_of(self.cfg.lambda_epoch);
        if !due {
            return;
        }
        match target.steering(&self.x) {
            Some((_, l)) => self.lambda = Some(l),
            None if self.lambda.is_none() => {
                let mut axis = vec![0.0; self.x.len()];
                axis[0] = 1.0;
                self.lambda = Some(axis);
            }
            // Inside the target: hold the last direction.
            None => {}
        }
    }

    fn observe(
        &mut self,
        env: &mut dyn Environment,
        adversary: &mut Adversary<'_>,
        target: &TargetSet,
        s: usize,
        a1: usize,
        a2_sim: usize,
        eps: f64,
    ) -> Result<StepRecord> {
        let leader = self.leader_behavior(eps);
        let ctx = AdversaryContext {
            step: self.n,
            x: &self.x,
            target,
            leader: LeaderView::Randomized(&leader),
        };
        let a2 = adversary.act(s, a1, &ctx)?;
        let cost = env.observe_cost(s, a1, a2)?;
        let g = gamma1(self.n);
        for (xk, ck) in self.x.iter_mut().zip(&cost) {
            *xk += g * (ck - *xk);
        }
        self.n += 1;
        let i = self.idx(s, a1, a2_sim);
        self.visit_counts[i] += 1;
        self.s = s;
        self.a1 = a1;
        self.a2_sim = a2_sim;
        self.a2_actual = a2;
        Ok(StepRecord {
            n: self.n,
            s,
            a1,
            a2,
            cost,
            x: self.x.clone(),
            eps,
        })
    }

    /// First step from `s0`: uniform leader action, uniform simulated
    /// follower action, first observed cost.
    pub fn start(
        &mut self,
        env: &mut dyn Environment,
        adversary: &mut Adversary<'_>,
        target: &TargetSet,
        s0: usize,
    ) -> Result<StepRecord> {
        if self.n != 0 {
            return Err(Error::Config("learner already started".into()));
        }
        if s0 >= self.n_states {
            return Err(Error::IndexOutOfRange(format!("initial state {s0}")));
        }
        let a1 = self.rng.random_range(0..self.n_actions1);
        let a2_sim = self.rng.random_range(0..self.n_actions2);
        self.observe(env, adversary, target, s0, a1, a2_sim, 1.0)
    }

    /// One loop of the algorithm: move the real system, update `Q̂` then
    /// `Q̃` for the last simulated triple, pick the next actual leader
    /// action and simulated follower action, observe the real cost, update
    /// `x`, `ε`, and `ν̂`.
    pub fn learner_step(
        &mut self,
        env: &mut dyn Environment,
        adversary: &mut Adversary<'_>,
        target: &TargetSet,
    ) -> Result<StepRecord> {
        if self.n == 0 {
            return Err(Error::Config("learner_step called before start".into()));
        }
        let (s, a1, a2, a2_bar) = (self.s, self.a1, self.a2_sim, self.a2_actual);
        let s_next = env.step(s, a1, a2_bar)?;
        self.refresh_lambda(target);
        let lambda = self.lambda.clone().expect("direction set by refresh");

        if self.cfg.sync {
            self.sync_update(env, &lambda)?;
        } else {
            // The update needs a successor of the simulated triple; the
            // observed one qualifies only when the real follower agreed.
            let s_upd = if a2 == a2_bar {
                s_next
            } else {
                env.simulate(s, a1, a2)?
            };
            let c_tilde = dot(env.cost(s, a1, a2), &lambda);
            let gamma = gamma2(self.visit_counts[self.idx(s, a1, a2)], self.cfg.gamma2_exponent);
            let a1_hat = self.sample_leader(s_upd, self.behavior_eps());
            self.update_follower_q(s, a1, a2, s_upd, a1_hat, c_tilde, gamma);
            self.update_leader_q(s, a1, a2, s_upd, c_tilde, gamma);
        }

        self.epsilon *= 1.0 - 1.0 / (self.updates as f64 + 2.0);
        self.updates += 1;

        let eps = self.behavior_eps();
        let a1_next = self.sample_leader(s_next, eps);
        let a2_next = self.sample_follower(s_next, a1_next, eps);
        self.observe(env, adversary, target, s_next, a1_next, a2_next, eps)
    }

    /// Jacobi update of every triple from one generative successor each,
    /// with the global step `γ2(n)`.
    fn sync_update(&mut self, env: &mut dyn Environment, lambda: &[f64]) -> Result<()> {
        let gamma = gamma2(self.n, self.cfg.gamma2_exponent);
        let n_triples = self.q_hat.len();
        let mut succ = Vec::with_capacity(n_triples);
        let mut hats = Vec::with_capacity(n_triples);
        for i in 0..n_triples {
            let (s, a1, a2) = self.triple_of(i);
            let s2 = env.simulate(s, a1, a2)?;
            succ.push(s2);
            let eps = self.behavior_eps();
            hats.push(self.sample_leader(s2, eps));
        }
        let old_hat = self.q_hat.clone();
        let f_hat = reference_value(&old_hat, self.anchor);
        for i in 0..n_triples {
            let (s, a1, a2) = self.triple_of(i);
            let row = self.idx(succ[i], hats[i], 0);
            let best = old_hat[row..row + self.n_actions2]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let c = dot(env.cost(s, a1, a2), lambda);
            self.q_hat[i] = old_hat[i] + gamma * (c + best - f_hat - old_hat[i]);
        }
        let old_tilde = self.q_tilde.clone();
        let f_tilde = reference_value(&old_tilde, self.anchor);
        let next_vals: Vec<f64> = (0..self.n_states).map(|s| self.leader_value(s).0).collect();
        for i in 0..n_triples {
            let (s, a1, a2) = self.triple_of(i);
            let c = dot(env.cost(s, a1, a2), lambda);
            self.q_tilde[i] = old_tilde[i] + gamma * (c + next_vals[succ[i]] - f_tilde - old_tilde[i]);
        }
        let sup = self
            .q_hat
            .iter()
            .chain(&self.q_tilde)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        self.q_sup = self.q_sup.max(sup);
        Ok(())
    }

    fn triple_of(&self, i: usize) -> (usize, usize, usize) {
        let a2 = i % self.n_actions2;
        let sa = i / self.n_actions2;
        (sa / self.n_actions1, sa % self.n_actions1, a2)
    }
}

/// Asynchronous follower Q-learning against a fixed leader policy and a
/// fixed direction. The behavior `(a1, a2)` is uniform so every entry is
/// visited; `â1` is drawn from `leader`, the policy being evaluated.
/// Returns the learned state; `Q̂` approximates the follower's relative
/// Q-values and `f(Q̂)` its gain.
pub fn learn_follower_q(
    env: &mut dyn Environment,
    leader: &PolicyTable,
    lambda: &[f64],
    steps: u64,
    cfg: LearnerConfig,
    seed: u64,
) -> Result<LearnerState> {
    let mut st = LearnerState::for_env(cfg, env, seed)?;
    if leader.rows() != st.n_states || leader.cols() != st.n_actions1 {
        return Err(Error::InvalidPolicy("leader table does not match the game".into()));
    }
    st.freeze_lambda(lambda.to_vec());
    let mut s = 0;
    for _ in 0..steps {
        let a1 = st.rng.random_range(0..st.n_actions1);
        let a2 = st.rng.random_range(0..st.n_actions2);
        let s_next = env.step(s, a1, a2)?;
        let a1_hat = leader.sample(s_next, &mut st.rng);
        let i = st.idx(s, a1, a2);
        st.visit_counts[i] += 1;
        st.n += 1;
        let gamma = gamma2(st.visit_counts[i], st.cfg.gamma2_exponent);
        let c = dot(env.cost(s, a1, a2), lambda);
        st.update_follower_q(s, a1, a2, s_next, a1_hat, c, gamma);
        s = s_next;
    }
    Ok(st)
}
