//! Sweep the number of oracle feedback documents on the toy benchmark via
//! the config-driven experiment commands. Outputs go to a temporary
//! directory; the second sweep is served entirely from the response cache.

use std::path::Path;

use genqr::experiment::{cmd_index, cmd_sweep, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let mut config =
        ExperimentConfig::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy/oracle.toml"))?;
    config.data.index = tmp.path().join("index");
    config.cache = Some(tmp.path().join("cache"));
    config.output = tmp.path().join("sweep");
    cmd_index(&config, false)?;

    let cold = cmd_sweep(&config)?;
    println!("{}", std::fs::read_to_string(&cold.csv_path)?);
    println!("cold sweep: {} backend calls", cold.backend_calls);
    let warm = cmd_sweep(&config)?;
    println!("warm sweep: {} backend calls", warm.backend_calls);
    Ok(())
}
