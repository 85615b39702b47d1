//! Drives the command-line pipelines from code: a flat TOML config, a flag
//! override, and the manifest written next to the artifacts.

use degen_lab::cli::{run, Command, ExperimentConfig, Invocation};

fn main() -> degen_lab::Result<()> {
    let file = ExperimentConfig::from_toml(
        "alpha = 0.5\nomega = \"0.2,0.5\"\nE = \"0.1,0.35,0.6,0.85\"\nT = 1.0\nmodes = 12\n",
    )?;
    let out = std::env::temp_dir().join("degen-lab-example");
    let flags = ExperimentConfig {
        modes: Some(16),
        out: Some(out.clone()),
        ..Default::default()
    };
    let (outcome, dir) = run(&Command::NullControl(Invocation {
        config: None,
        flags: flags.over(file)?,
    }))?;
    println!("passed: {}; {}", outcome.passed, outcome.summary);
    println!("{}", std::fs::read_to_string(dir.join("manifest.json"))?);
    Ok(())
}
