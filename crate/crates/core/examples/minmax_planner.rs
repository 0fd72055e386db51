//! Scalarize a vector-cost game along a direction and solve the leader's
//! min-max problem by relative value iteration, then confirm the value by
//! enumerating every deterministic policy pair.

use sgapproach::fixtures::{fix_chain, fix_rand};
use sgapproach::{brute_force_value, scalarize, solve_minmax, PlannerOptions};

fn main() -> anyhow::Result<()> {
    let opts = PlannerOptions::default();
    let chain = fix_chain();
    for lambda in [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.6, -0.8]] {
        let sol = solve_minmax(&scalarize(&chain, &lambda)?, &opts)?;
        println!(
            "chain lambda {lambda:?}: c* = {:+.6} (enumeration {:+.6}), leader plays {:?}",
            sol.value,
            brute_force_value(&chain, &lambda)?,
            sol.leader_policy
        );
    }

    // A random 3-state game where the follower matters.
    let game = fix_rand(7);
    let lambda = [0.8, 0.6];
    let sol = solve_minmax(&scalarize(&game, &lambda)?, &opts)?;
    println!(
        "random game: c* = {:+.8}, enumeration {:+.8}, {} sweeps",
        sol.value,
        brute_force_value(&game, &lambda)?,
        sol.iterations
    );
    println!("  leader {:?}, follower (s, a1) -> a2 {:?}", sol.leader_policy, sol.follower_response);
    println!("  relative values {:.4?}", sol.leader_relative_values);
    Ok(())
}
