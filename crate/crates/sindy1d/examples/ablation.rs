//! Ablation grid over the pipeline components: dimensional filter on/off,
//! Gram accumulation batched/monolithic, ensemble on/off. Emits the runtime
//! and peak-memory table as CSV through the batch front-end.
//!
//! Run with: cargo run --release --example ablation

use sindy1d::cli::{run, Command, RunArgs};

fn main() -> sindy1d::Result<()> {
    let config = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/burgers.conf");
    let out = std::env::temp_dir().join("sindy1d_example_ablation");
    run(
        Command::Ablate,
        &RunArgs {
            config,
            set: vec!["case.realizations=8".into()],
            out: Some(out.clone()),
            seed: Some(4242),
            threads: None,
            dry_run: false,
        },
    )?;
    let table = std::fs::read_to_string(out.join("ablate.csv"))?;
    println!("{table}");
    println!("full report: {}", out.join("report.json").display());
    Ok(())
}
