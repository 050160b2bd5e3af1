//! Parses a configuration document and runs two subcommands into a
//! temporary directory.

use obstacle_homog::cli::{dispatch, Command};
use obstacle_homog::config::parse_config;

const DOC: &str = r#"
[domain]
n = 3
boundary = "periodic-slab"

[patch]
eps = [0.25, 0.125, 0.0625]

[problem]
psi = "0"
phi = "1"
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config(DOC)?;
    let dir = std::env::temp_dir().join("obstacle-lab-example");
    for command in [Command::DumpLayout, Command::CorrectorScan, Command::MuLimit] {
        let outcome = dispatch(command, &config, &dir)?;
        println!("{command}: pass = {}", outcome.pass);
        for a in &outcome.artifacts {
            println!("  {}", a.display());
        }
    }
    print!("{}", std::fs::read_to_string(dir.join("corrector_scan.csv"))?);
    Ok(())
}
