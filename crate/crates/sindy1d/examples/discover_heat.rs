//! Identifies the heat equation u_t = nu u_xx from simulated data with
//! viscosities drawn per realization.
//!
//! Run with: cargo run --release --example discover_heat

use sindy1d::ensemble::{iterative_prune, EnsembleConfig, SnapshotGramSource};
use sindy1d::features::RegressionTarget;
use sindy1d::library::{build_library, LibrarySpec};
use sindy1d::simulate::{generate_dataset, CaseSpec, Equation};

fn main() -> sindy1d::Result<()> {
    let mut case = CaseSpec::defaults(Equation::Heat);
    case.realizations = 10;
    case.seed = 7;
    let data = generate_dataset(&case)?;

    let terms = build_library(&LibrarySpec::pde_library(false))?;
    println!("candidate library: {} terms after the dimensional filter", terms.len());

    let source = SnapshotGramSource::new(&data, &terms, RegressionTarget::TimeDerivative);
    let report = iterative_prune(&source, &EnsembleConfig::pde_default(1), "u_t")?;

    println!("{}", report.equation);
    for t in &report.refined {
        println!("  {}: {:.6} +- {:.2e} (cv {:.2e}, consensus {:.0}%)",
            t.name, t.mean, t.std, t.cv, 100.0 * t.consensus);
    }
    Ok(())
}
