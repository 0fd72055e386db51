//! A target made of two disjoint balls. Each piece passes the convex check,
//! the union passes the sampled nearest-point check, and the controller
//! settles next to one piece.

use sgapproach::fixtures::fix_chain;
use sgapproach::{
    check_approachable_convex, check_approachable_nonconvex, run_episode, AdversarySpec, EpisodeOptions, LeaderKind,
    PlannerOptions, PointSampler, TargetSet,
};

fn main() -> anyhow::Result<()> {
    let model = fix_chain();
    let opts = PlannerOptions::default();
    let pieces = vec![
        TargetSet::ball(vec![0.3, 0.7], 0.1)?,
        TargetSet::ball(vec![0.7, 0.3], 0.1)?,
    ];
    for (i, p) in pieces.iter().enumerate() {
        let c = check_approachable_convex(&model, p, 180, &opts)?;
        println!("piece {i}: approachable = {}", c.approachable);
    }
    let union = TargetSet::union(pieces)?;
    let rep = check_approachable_nonconvex(&model, &union, &PointSampler::cost_box(2, 0), 200, &opts)?;
    println!(
        "union: passed = {}, {} points, {} nearest points",
        rep.passed, rep.points_checked, rep.pairs_checked
    );

    for seed in 0..4 {
        let rec = run_episode(
            &model,
            &LeaderKind::exact(),
            &AdversarySpec::worst_case(),
            &union,
            50_000,
            seed,
            &EpisodeOptions::default(),
        )?;
        let last = rec.rows.last().expect("rows");
        println!(
            "seed {seed}: final dist {:.2e}, nearest piece {}",
            last.dist,
            union.nearest_piece(&last.x)
        );
    }
    Ok(())
}
