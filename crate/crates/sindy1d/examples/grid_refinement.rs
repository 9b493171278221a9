//! Grid-refinement study of the closure coefficient: the library is fixed to
//! Delta^2 ubar_x^2 and the fitted C tracked across grid spacings, with a
//! quadratic trend fit.
//!
//! Run with: cargo run --release --example grid_refinement

use sindy1d::ensemble::EnsembleConfig;
use sindy1d::sgs::{grid_refinement_study, quadratic_fit, SgsDatasetSpec};
use sindy1d::solvers::SolveMethod;

fn main() -> sindy1d::Result<()> {
    let template = SgsDatasetSpec::default_with(20, 1001);
    let cfg = EnsembleConfig::sgs_default(99, SolveMethod::default_sr3());
    let dx_list = [2.0 / 150.0, 2.0 / 300.0, 2.0 / 400.0];
    let rows = grid_refinement_study(&dx_list, &template, &cfg)?;

    println!("{:>9} {:>5} {:<11} {:>8} {:>8} {:>10}", "dx", "n_x", "method", "C", "Cs", "std");
    for r in &rows {
        println!(
            "{:>9.5} {:>5} {:<11} {:>8.4} {:>8.4} {:>10.2e}",
            r.dx, r.n_x, r.method, r.c, r.cs, r.c_std
        );
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.method == "sr3")
        .map(|r| (r.dx, r.c))
        .collect();
    if let Some([c0, c1, c2]) = quadratic_fit(&pts) {
        println!("\nquadratic trend: C(dx) = {c0:.4} + {c1:.3} dx + {c2:.1} dx^2");
    }
    Ok(())
}
