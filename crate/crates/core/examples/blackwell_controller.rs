//! The exact approachability controller against a worst-case follower on
//! the two-state chain. The running average lands in the ball and stays.

use sgapproach::fixtures::fix_chain;
use sgapproach::{metrics, run_episode, AdversarySpec, EpisodeOptions, LeaderKind, RecordStride, TargetSet};

fn main() -> anyhow::Result<()> {
    let model = fix_chain();
    let target = TargetSet::ball(vec![0.5, 0.5], 0.2)?;
    let opts = EpisodeOptions {
        record_stride: RecordStride::Every { every: 500 },
        ..EpisodeOptions::default()
    };
    for seed in 0..3 {
        let rec = run_episode(&model, &LeaderKind::exact(), &AdversarySpec::worst_case(), &target, 100_000, seed, &opts)?;
        let m = metrics(&rec, &target)?;
        let last = rec.rows.last().expect("rows");
        println!(
            "seed {seed}: x = ({:.4}, {:.4}), dist {:.2e}, {} planner calls",
            last.x[0], last.x[1], m.final_dist, m.policy_recompute_count
        );
    }

    // Early rows show x entering the ball.
    let rec = run_episode(
        &model,
        &LeaderKind::exact(),
        &AdversarySpec::worst_case(),
        &target,
        64,
        0,
        &EpisodeOptions::default(),
    )?;
    for r in &rec.rows {
        println!("  n={:>3} x=({:.3}, {:.3}) dist={:.4}", r.n, r.x[0], r.x[1], r.dist);
    }
    Ok(())
}
