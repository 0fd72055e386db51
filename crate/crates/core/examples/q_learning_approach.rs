//! The two-timescale learner on the two-state chain without access to the
//! kernel, stepped by hand so the Q tables can be inspected along the way.

use sgapproach::fixtures::fix_chain;
use sgapproach::{Adversary, AdversarySpec, LearnerConfig, LearnerState, ModelEnvironment, TargetSet};

fn main() -> anyhow::Result<()> {
    let model = fix_chain();
    let target = TargetSet::ball(vec![0.5, 0.5], 0.2)?;
    let mut env = ModelEnvironment::new(&model, 11);
    let mut adv = Adversary::new(&AdversarySpec::UniformRandom, &model, 11)?;
    let mut learner = LearnerState::for_env(LearnerConfig::default(), &env, 11)?;

    learner.start(&mut env, &mut adv, &target, 0)?;
    let mut checkpoint = 10;
    while learner.n() < 200_000 {
        let rec = learner.learner_step(&mut env, &mut adv, &target)?;
        if rec.n == checkpoint {
            let (leader, _) = learner.greedy_policies();
            println!(
                "n={:>6} x=({:.4}, {:.4}) dist={:.2e} eps={:.1e} greedy leader {:?} max|Q|={:.3}",
                rec.n,
                rec.x[0],
                rec.x[1],
                target.distance(&rec.x),
                rec.eps,
                leader,
                learner.q_sup()
            );
            checkpoint *= 10;
        }
    }
    println!("least visited triple share {:.2e}", learner.min_visit_fraction());

    // A floor on exploration keeps every triple visited.
    let cfg = LearnerConfig {
        eps_floor: 0.05,
        ..LearnerConfig::default()
    };
    let mut env = ModelEnvironment::new(&model, 11);
    let mut adv = Adversary::new(&AdversarySpec::UniformRandom, &model, 11)?;
    let mut learner = LearnerState::for_env(cfg, &env, 11)?;
    learner.start(&mut env, &mut adv, &target, 0)?;
    while learner.n() < 200_000 {
        learner.learner_step(&mut env, &mut adv, &target)?;
    }
    println!(
        "with eps_floor 0.05: dist {:.2e}, least visited share {:.2e}",
        target.distance(learner.x()),
        learner.min_visit_fraction()
    );
    Ok(())
}
