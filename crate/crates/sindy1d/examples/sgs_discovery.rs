//! Discovers the subgrid-scale closure for filtered Burgers turbulence:
//! iterative ensemble pruning reduces the candidate library to the single
//! dominant term Delta^2 ubar_x^2 and reports the effective Smagorinsky
//! constant sqrt(C).
//!
//! Run with: cargo run --release --example sgs_discovery
//! (takes a minute or two; pass a realization count to scale it)

use sindy1d::ensemble::EnsembleConfig;
use sindy1d::library::LibrarySpec;
use sindy1d::sgs::{build_sgs_dataset, discover_closure, SgsDatasetSpec};
use sindy1d::solvers::SolveMethod;

fn main() -> sindy1d::Result<()> {
    let realizations = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(40);
    let spec = SgsDatasetSpec::default_with(realizations, 1001);
    println!(
        "building {} filtered realizations x widths {:?} ...",
        realizations, spec.widths
    );
    let dataset = build_sgs_dataset(&spec)?;

    let library = LibrarySpec::sgs_library();
    let mut cfg = EnsembleConfig::sgs_default(77, SolveMethod::default_sr3());
    if realizations < 100 {
        // Smaller datasets have a higher bootstrap CV floor; stop the
        // threshold schedule one round earlier so the dominant term survives.
        cfg.max_iterations = 7;
    }
    let discovery = discover_closure(&dataset, &library, &cfg)?;

    for closure in [&discovery.elasticnet, &discovery.sr3] {
        println!(
            "{:<10}: tau_sgs = {:.4} * Delta^2 * ubar_x^2   (cv {:.4}, {} iterations)",
            closure.method, closure.c, closure.cv, closure.iterations
        );
        for it in &closure.report.iterations {
            println!(
                "   iteration {}: {:>2}/{} active at cv threshold {:.4}",
                it.iteration, it.active_after, it.active_before, it.cv_threshold
            );
        }
    }
    let sel = discovery.selected_closure();
    println!(
        "selected {} (lower cv): signed closure tau = -{:.4} Delta^2 ubar_x |ubar_x|, effective Cs = {:.4}",
        sel.method, sel.c, sel.effective_cs
    );
    Ok(())
}
