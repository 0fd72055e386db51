//! Projections, steering directions and support functions for the target
//! shapes: ball, box, halfspace polytope, and a union of balls.

use sgapproach::geometry::{Halfspace, TargetSet};

fn main() -> anyhow::Result<()> {
    let x = [1.0, 0.25];
    let targets = [
        ("ball", TargetSet::ball(vec![0.5, 0.5], 0.2)?),
        ("box", TargetSet::boxed(vec![0.0, 0.0], vec![0.5, 1.0])?),
        (
            "triangle",
            TargetSet::halfspaces(vec![
                Halfspace { normal: vec![-1.0, 0.0], offset: 0.0 },
                Halfspace { normal: vec![0.0, -1.0], offset: 0.0 },
                Halfspace {
                    normal: vec![0.5f64.sqrt(), 0.5f64.sqrt()],
                    offset: 0.5f64.sqrt() * 0.8,
                },
            ])?,
        ),
        (
            "two balls",
            TargetSet::union(vec![
                TargetSet::ball(vec![0.3, 0.7], 0.1)?,
                TargetSet::ball(vec![0.7, 0.3], 0.1)?,
            ])?,
        ),
    ];

    for (name, t) in &targets {
        println!("{name}: dist(x, D) = {:.4}", t.distance(&x));
        for p in t.project(&x) {
            println!("  nearest point {p:.4?}");
        }
        if let Some((_, lambda)) = t.steering(&x) {
            // Support only exists for convex targets.
            match t.support(&lambda) {
                Ok(h) => println!("  lambda {lambda:.4?}, h_D(lambda) = {h:.4}"),
                Err(e) => println!("  lambda {lambda:.4?}, {e}"),
            }
        }
    }

    // Equidistant from both pieces: both nearest points come back.
    let mid = [0.5, 0.5];
    println!("tie at {mid:?}: {:.4?}", targets[3].1.project(&mid));
    Ok(())
}
