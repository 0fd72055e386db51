//! Sweep unit directions and compare c*(λ) against the support function.
//! A single failing direction proves the target is not approachable.

use sgapproach::fixtures::{fix_chain, fix_match};
use sgapproach::{check_approachable_convex, PlannerOptions, TargetSet};

fn main() -> anyhow::Result<()> {
    let opts = PlannerOptions::default();

    let cert = check_approachable_convex(
        &fix_chain(),
        &TargetSet::ball(vec![0.5, 0.5], 0.2)?,
        360,
        &opts,
    )?;
    println!("chain vs ball: approachable = {}, {}", cert.approachable, cert.note);

    // The follower can always match the leader, so the first cost
    // component never drops below 1 and the left box is out of reach.
    let cert = check_approachable_convex(
        &fix_match(),
        &TargetSet::boxed(vec![0.0, 0.0], vec![0.5, 1.0])?,
        720,
        &opts,
    )?;
    println!("match vs box: approachable = {}", cert.approachable);
    let w = &cert.worst;
    println!(
        "  counterexample lambda {:?}: c* = {} > h_D = {}",
        w.lambda, w.value, w.support
    );
    println!("{}", serde_json::to_string(&cert)?);
    Ok(())
}
