//! Identifies Burgers' equation u_t = -u u_x + nu u_xx, exercising the
//! parameter-aware library: each realization carries its own viscosity.
//!
//! Run with: cargo run --release --example discover_burgers

use sindy1d::ensemble::{iterative_prune, EnsembleConfig, SnapshotGramSource};
use sindy1d::features::RegressionTarget;
use sindy1d::library::{build_library, LibrarySpec};
use sindy1d::simulate::{generate_dataset, CaseSpec, Equation};

fn main() -> sindy1d::Result<()> {
    let mut case = CaseSpec::defaults(Equation::Burgers);
    case.realizations = 12;
    case.seed = 11;
    let data = generate_dataset(&case)?;

    let library = LibrarySpec::pde_library(false);
    let terms = build_library(&library)?;
    let source = SnapshotGramSource::new(&data, &terms, RegressionTarget::TimeDerivative);
    let report = iterative_prune(&source, &EnsembleConfig::pde_default(3), "u_t")?;

    println!("{}", report.equation);
    println!(
        "pruning history: {:?}",
        report
            .iterations
            .iter()
            .map(|it| format!("{}/{}", it.active_after, it.active_before))
            .collect::<Vec<_>>()
    );
    Ok(())
}
