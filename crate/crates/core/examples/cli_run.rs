// Drive the experiment runner from an inline TOML configuration, as the
// `pomfg` binary does, and read back the manifest.
//
// ```bash
// cargo run --example cli_run
// ```

use pomfg::cli::{parse_config, run, Command};

pub fn run_example() -> pomfg::Result<()> {
    let cfg = parse_config(
        r#"
seed = 17

[model]
horizon = 0.5
dt = 0.001
drift_a = -0.5

[filter]
kind = "grid"
x_lo = -6.0
x_hi = 6.0
nodes = 200
snapshots = 3
"#,
        None,
        None,
    )?;
    let dir = std::env::temp_dir().join(format!("pomfg-cli-run-{}", std::process::id()));
    let manifest = run(Command::FilterDemo, &cfg, &dir)?;
    println!("config hash {}", manifest.config_hash);
    println!("files: {}", manifest.files.join(", "));
    for (k, v) in &manifest.summary {
        println!("{k} = {v}");
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> pomfg::Result<()> {
    run_example()
}
