//! Candidate-library construction and the dimensional similarity filter:
//! base terms, reduction rules, dimension vectors, hard and soft filtering.
//!
//! Run with: cargo run --release --example dimensional_filter

use sindy1d::library::{
    build_library, dsf_filter, enumerate_and_reduce, DsfMode, LibrarySpec,
};

fn main() -> sindy1d::Result<()> {
    // Burgers library: soft filter at tolerance 0.5 keeps 17 of 22 terms.
    let spec = LibrarySpec::pde_library(false);
    let raw = enumerate_and_reduce(&spec)?;
    let kept = dsf_filter(&raw, &spec)?;
    println!("burgers: {} -> {} terms at soft tolerance {}", raw.len(), kept.len(), spec.tolerance);
    for t in &kept {
        println!("  {:<16} [{:>2}, {:>2}]", t.name, t.dim.length, t.dim.time);
    }

    // KdV-Burgers: degree-3 library with three parameters and inverses.
    let spec = LibrarySpec::pde_library(true);
    let raw = enumerate_and_reduce(&spec)?;
    let kept = dsf_filter(&raw, &spec)?;
    println!(
        "\nkdv-burgers: {} -> {} terms at soft tolerance {}",
        raw.len(),
        kept.len(),
        spec.tolerance
    );

    // Hard filtering keeps exact dimensional matches to u_t only.
    let mut hard = LibrarySpec::pde_library(true);
    hard.dsf_mode = DsfMode::Hard;
    let exact = build_library(&hard)?;
    println!("hard filter to [1, -2]: {} exact matches", exact.len());

    // The SGS library pairs filtered-field terms with Delta powers.
    let sgs = LibrarySpec::sgs_library();
    let terms = build_library(&sgs)?;
    println!("\nsgs library: {} terms at tolerance {}; a few entries:", terms.len(), sgs.tolerance);
    for t in terms.iter().take(6) {
        println!("  {:<28} [{:>2}, {:>2}]", t.name, t.dim.length, t.dim.time);
    }
    Ok(())
}
