//! Regenerates schema/experiment.schema.json from the config types.

use std::path::Path;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/experiment.schema.json");
    let text = serde_json::to_string_pretty(&bosonet::experiment::config_schema()).unwrap();
    std::fs::write(&path, text + "\n").unwrap();
    println!("wrote {}", path.display());
}
