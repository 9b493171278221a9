//! Identifies the KdV-Burgers equation u_t = -C1 u u_x - C2 u_xxx + nu u_xx
//! with three parameters drawn per realization, then refines the fit on the
//! stable terms. The refined pass shrinks every coefficient's spread.
//!
//! Run with: cargo run --release --example discover_kdv_burgers

use sindy1d::ensemble::{iterative_prune, EnsembleConfig, SnapshotGramSource};
use sindy1d::features::RegressionTarget;
use sindy1d::library::{build_library, enumerate_and_reduce, LibrarySpec};
use sindy1d::simulate::{generate_dataset, CaseSpec, Equation};

fn main() -> sindy1d::Result<()> {
    let mut case = CaseSpec::defaults(Equation::KdvBurgers);
    case.realizations = 10;
    case.seed = 5;
    let data = generate_dataset(&case)?;

    let library = LibrarySpec::pde_library(true);
    let raw = enumerate_and_reduce(&library)?;
    let terms = build_library(&library)?;
    println!(
        "library: {} monomials reduced to {} by the dimensional filter",
        raw.len(),
        terms.len()
    );

    let source = SnapshotGramSource::new(&data, &terms, RegressionTarget::TimeDerivative);
    let report = iterative_prune(&source, &EnsembleConfig::pde_default(9), "u_t")?;

    println!("{}", report.equation);
    let first_pass = &report.iterations[0].stats;
    for t in &report.refined {
        let initial = first_pass
            .iter()
            .find(|s| s.name == t.name)
            .map_or(f64::NAN, |s| s.std);
        println!(
            "  {}: {:.6} (std {:.2e}, first-pass std {:.2e})",
            t.name, t.mean, t.std, initial
        );
    }
    Ok(())
}
