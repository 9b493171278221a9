//! A-priori benchmark of SGS closures against true filtered stresses on
//! fresh Perlin evaluation cases: the discovered signed closure versus the
//! Taylor, Leonard and Smagorinsky baselines.
//!
//! Run with: cargo run --release --example sgs_benchmark

use sindy1d::filtering::ClosureModel;
use sindy1d::sgs::{benchmark_closures, width_averaged_r2, BenchmarkSpec};

fn main() -> sindy1d::Result<()> {
    let models = [
        ClosureModel::Taylor,
        ClosureModel::Leonard { order: 1 },
        ClosureModel::Smagorinsky { cs: 0.16 },
        ClosureModel::SindySigned { c: 0.1554 },
    ];
    let spec = BenchmarkSpec::default_with(10, 555);
    let rows = benchmark_closures(&models, &spec)?;

    println!("{:<14} {:>6} {:>12} {:>12} {:>9}", "model", "width", "mse", "mae", "r2");
    for r in &rows {
        let width = r.width.map_or("avg".to_string(), |k| format!("{k}dx"));
        println!(
            "{:<14} {:>6} {:>12.3e} {:>12.3e} {:>9.4}",
            r.model, width, r.mse, r.mae, r.r2
        );
    }
    println!(
        "\nwidth-averaged R^2: sindy {:+.3} vs smagorinsky {:+.3}",
        width_averaged_r2(&rows, "sindy_signed").unwrap(),
        width_averaged_r2(&rows, "smagorinsky").unwrap(),
    );
    Ok(())
}
