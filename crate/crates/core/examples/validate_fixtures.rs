//! Load the bundled model files, validate them, and check that every
//! stationary policy pair gives an irreducible chain.
//!
//! ```bash
//! cargo run -p sgapproach --example validate_fixtures
//! ```

use std::path::Path;

use sgapproach::model::{check_irreducibility, ModelFile};

fn main() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for name in ["fix_match.json", "fix_chain.json", "bad_model.json"] {
        let file = ModelFile::load(&dir.join(name))?;
        let report = file.validate();
        if !report.is_ok() {
            println!("{name}: invalid");
            for v in &report.violations {
                println!("  {v}");
            }
            continue;
        }
        let model = file.into_model()?;
        println!(
            "{name}: |S|={} |A1|={} |A2|={} K={}, irreducibility {}",
            model.n_states(),
            model.n_actions1(),
            model.n_actions2(),
            model.cost_dim(),
            check_irreducibility(&model)
        );
    }
    Ok(())
}
