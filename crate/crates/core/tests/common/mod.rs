//! Oracles written independently of the library's solvers.
#![allow(dead_code)]

use sgapproach::GameModel;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn unit(angle: f64) -> Vec<f64> {
    vec![angle.cos(), angle.sin()]
}

/// Invariant law of a row-stochastic matrix by lazy power iteration.
pub fn stationary_power(p: &[f64], n: usize) -> Vec<f64> {
    let mut mu = vec![1.0 / n as f64; n];
    for _ in 0..200_000 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                next[j] += mu[i] * 0.5 * (p[i * n + j] + if i == j { 1.0 } else { 0.0 });
            }
        }
        let diff: f64 = next.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum();
        mu = next;
        if diff < 1e-15 {
            break;
        }
    }
    mu
}

/// Average vector cost of a deterministic pair `s -> a1`, `(s, a1) -> a2`.
pub fn pair_cost(m: &GameModel, leader: &[usize], follower: &[usize]) -> Vec<f64> {
    let n = m.n_states();
    let mut p = vec![0.0; n * n];
    for s in 0..n {
        let a1 = leader[s];
        let a2 = follower[s * m.n_actions1() + a1];
        for (t, q) in m.transition(s, a1, a2).iter().enumerate() {
            p[s * n + t] = *q;
        }
    }
    let mu = stationary_power(&p, n);
    let mut c = vec![0.0; m.cost_dim()];
    for s in 0..n {
        let a1 = leader[s];
        let a2 = follower[s * m.n_actions1() + a1];
        for (k, v) in m.cost(s, a1, a2).iter().enumerate() {
            c[k] += mu[s] * v;
        }
    }
    c
}

fn next_index(digits: &mut [usize], radix: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}

/// min over deterministic leaders of max over deterministic followers.
pub fn minmax_by_enumeration(m: &GameModel, lambda: &[f64]) -> f64 {
    let mut leader = vec![0usize; m.n_states()];
    let mut best = f64::INFINITY;
    loop {
        let mut follower = vec![0usize; m.n_states() * m.n_actions1()];
        let mut worst = f64::NEG_INFINITY;
        loop {
            worst = worst.max(dot(&pair_cost(m, &leader, &follower), lambda));
            if !next_index(&mut follower, m.n_actions2()) {
                break;
            }
        }
        best = best.min(worst);
        if !next_index(&mut leader, m.n_actions1()) {
            break;
        }
    }
    best
}
