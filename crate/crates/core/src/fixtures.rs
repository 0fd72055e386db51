//! Built-in games used by tests, examples, and the `fixtures/` JSON files.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::GameModel;

/// One state, two actions per agent, `c = (1{a1 = a2}, 1{a1 ≠ a2})`.
///
/// The follower can always match the leader, so the first cost component
/// cannot be pushed below 1.
pub fn fix_match() -> GameModel {
    GameModel::from_fn(
        1,
        2,
        2,
        2,
        |_, _, _| vec![1.0],
        |_, a1, a2| {
            if a1 == a2 {
                vec![1.0, 0.0]
            } else {
                vec![0.0, 1.0]
            }
        },
    )
    .expect("fix_match is valid")
}

/// Two states; leader action 0 stays w.p. 0.9, action 1 switches w.p. 0.9.
/// The follower has a single action. Costs are `(1, 0)` in state 0 and
/// `(0, 1)` in state 1.
pub fn fix_chain() -> GameModel {
    GameModel::from_fn(
        2,
        2,
        1,
        2,
        |s, a1, _| {
            let stay = if a1 == 0 { 0.9 } else { 0.1 };
            if s == 0 {
                vec![stay, 1.0 - stay]
            } else {
                vec![1.0 - stay, stay]
            }
        },
        |s, _, _| if s == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] },
    )
    .expect("fix_chain is valid")
}

/// Seeded random game with strictly positive kernel rows (hence irreducible
/// under every stationary pair) and costs uniform on `[-1, 1]`.
pub fn random_game(
    seed: u64,
    n_states: usize,
    n_actions1: usize,
    n_actions2: usize,
    cost_dim: usize,
) -> GameModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kernel = Vec::with_capacity(n_states * n_actions1 * n_actions2 * n_states);
    let mut costs = Vec::with_capacity(n_states * n_actions1 * n_actions2 * cost_dim);
    for _ in 0..n_states * n_actions1 * n_actions2 {
        let row: Vec<f64> = (0..n_states).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = row.iter().sum();
        let mut row: Vec<f64> = row.iter().map(|w| w / total).collect();
        // Put the rounding residue on the largest entry so the row sums to 1.
        let residue = 1.0 - row.iter().sum::<f64>();
        let imax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        row[imax] += residue;
        kernel.extend(row);
        costs.extend((0..cost_dim).map(|_| rng.random_range(-1.0..=1.0)));
    }
    GameModel::from_flat(n_states, n_actions1, n_actions2, cost_dim, kernel, costs)
        .expect("random game is valid")
}

/// The seeded 3-state 2x2 game used as a planner oracle check.
pub fn fix_rand(seed: u64) -> GameModel {
    random_game(seed, 3, 2, 2, 2)
}
