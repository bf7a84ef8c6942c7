//! Write the built-in reference model (and its initial state) to a JSON file
//! usable with `nmq --model`.

use std::path::PathBuf;

use nmq::model_io::save_model;
use nmq::models::{reference_init, reference_model};

fn main() -> nmq::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("reference.json"));
    save_model(&reference_model(), Some(&reference_init()), &path)?;
    println!("wrote {}", path.display());
    Ok(())
}
