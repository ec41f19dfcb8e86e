//! Validate the built-in catalogue and print what each action does to a layout.

use std::sync::Arc;

use neuroloop::adapt::{validate_catalogue, AdaptationEngine, Catalogue, Vocabulary};
use neuroloop::{Action, Layout};

fn main() -> anyhow::Result<()> {
    let entries = Catalogue::parse_entries(Catalogue::builtin_json())?;
    let violations = validate_catalogue(&entries, &Vocabulary::builtin());
    println!("{} entries, {} violations", entries.len(), violations.len());

    let mut engine = AdaptationEngine::new(Arc::new(Catalogue::builtin()));
    for action in Action::ALL {
        let cfg = engine.resolve("demo", Layout::Distribution, action, None);
        println!("{} {action}", cfg.config_id);
        for op in &cfg.operations {
            println!("    {}", serde_json::to_string(op)?);
        }
    }
    Ok(())
}
