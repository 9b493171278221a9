//! Memory-efficient Gram accumulation: batched sums reproduce the monolithic
//! normal equations exactly, and checkpoints resume long passes.
//!
//! Run with: cargo run --release --example gram_batching

use sindy1d::ensemble::{GramSource, SnapshotGramSource};
use sindy1d::features::RegressionTarget;
use sindy1d::gram::GramSystem;
use sindy1d::library::{build_library, LibrarySpec};
use sindy1d::simulate::{generate_dataset, CaseSpec, Equation};
use sindy1d::solvers::{solve, SolveMethod};

fn main() -> sindy1d::Result<()> {
    let mut case = CaseSpec::defaults(Equation::Burgers);
    case.realizations = 6;
    case.seed = 19;
    let data = generate_dataset(&case)?;
    let terms = build_library(&LibrarySpec::pde_library(false))?;
    let all: Vec<usize> = (0..terms.len()).collect();
    let source = SnapshotGramSource::new(&data, &terms, RegressionTarget::TimeDerivative);

    // Accumulate per realization (one batch each).
    let mut gram = GramSystem::new(terms.iter().map(|t| t.name.clone()).collect());
    for unit in 0..source.units() {
        gram.merge(&source.unit_gram(unit, &all)?)?;
    }
    let p = gram.p();
    println!(
        "{} samples accumulated into a {p}x{p} pair ({} bytes instead of {} for the full matrix)",
        gram.n_rows(),
        gram.bytes(),
        gram.n_rows() as usize * (p + 1) * 8,
    );

    let solution = solve(&gram, &SolveMethod::default_stlsq())?;
    for (name, coef) in solution.columns.iter().zip(&solution.coefficients) {
        if *coef != 0.0 {
            println!("  {name}: {coef:.4}");
        }
    }

    // Checkpoint and resume.
    let path = std::env::temp_dir().join("sindy1d_example_gram.bin");
    gram.save(&path)?;
    let resumed = GramSystem::load(&path)?;
    assert_eq!(gram, resumed);
    println!("checkpoint round-trip OK at {}", path.display());
    Ok(())
}
