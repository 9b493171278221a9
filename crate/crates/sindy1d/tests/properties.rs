//! Property tests for the core pipeline invariants: enumeration determinism and
//! reduction soundness, dimensional-filter monotonicity, filter contraction,
//! stress nonnegativity, Gram batching equivalence and standardization
//! invariance.

use proptest::prelude::*;

use sindy1d::features::FeatureBatch;
use sindy1d::filtering::{box_filter, true_sgs_stress, FilterSpec};
use sindy1d::gram::GramSystem;
use sindy1d::grid::SchemeTag;
use sindy1d::library::{
    dsf_filter, enumerate_and_reduce, DimVec, DsfMetric, DsfMode, LibrarySpec, ParamEntry,
};
use sindy1d::solvers::{solve, SolveMethod};

/// Small random library specs: subsets of derivative tags and parameters.
fn library_strategy() -> impl Strategy<Value = LibrarySpec> {
    (
        proptest::bits::u8::between(0, 4),
        proptest::bool::ANY,
        proptest::bool::ANY,
        1usize..=3,
        0.0f64..=1.0,
    )
        .prop_map(|(bits, with_c1, include_constant, max_degree, tolerance)| {
            let all_tags = [
                SchemeTag::Cd1,
                SchemeTag::Uw2,
                SchemeTag::Cd2,
                SchemeTag::Cd2Third,
            ];
            let derivs: Vec<SchemeTag> = all_tags
                .iter()
                .enumerate()
                .filter(|(i, _)| bits & (1 << i) != 0)
                .map(|(_, t)| *t)
                .collect();
            let mut params = vec![
                ParamEntry {
                    name: "nu".into(),
                    dim: DimVec::new(2, -1),
                    power: 1,
                },
                ParamEntry {
                    name: "nu".into(),
                    dim: DimVec::new(2, -1),
                    power: -1,
                },
            ];
            if with_c1 {
                params.push(ParamEntry {
                    name: "C1".into(),
                    dim: DimVec::ZERO,
                    power: 1,
                });
            }
            LibrarySpec {
                field_name: "u".into(),
                field_dim: DimVec::VELOCITY,
                derivs,
                params,
                max_degree,
                include_constant,
                dsf_mode: DsfMode::Soft,
                metric: DsfMetric::Taxicab,
                tolerance,
                target: DimVec::U_T,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Identical specs yield identical ordered term lists, every output
    /// monomial satisfies the reduction invariants, and names are unique.
    #[test]
    fn enumeration_is_deterministic_and_sound(spec in library_strategy()) {
        let a = enumerate_and_reduce(&spec).unwrap();
        let b = enumerate_and_reduce(&spec).unwrap();
        prop_assert_eq!(&a, &b);
        let mut names = std::collections::BTreeSet::new();
        for term in &a {
            prop_assert!(names.insert(term.name.clone()), "duplicate {}", term.name);
            if !term.is_constant() {
                prop_assert!(!term.fields.is_empty(), "{} lacks a field factor", term.name);
            }
            for (_, exp) in &term.params {
                prop_assert!(*exp != 0);
            }
        }
    }

    /// Wider soft tolerances keep supersets; hard output is inside every
    /// soft output.
    #[test]
    fn dsf_monotone_in_tolerance(
        spec in library_strategy(),
        t1 in 0.0f64..=1.0,
        t2 in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let terms = enumerate_and_reduce(&spec).unwrap();
        let mut s = spec.clone();
        s.tolerance = lo;
        let a = dsf_filter(&terms, &s).unwrap();
        s.tolerance = hi;
        let b = dsf_filter(&terms, &s).unwrap();
        for t in &a {
            prop_assert!(b.iter().any(|x| x.name == t.name));
        }
        s.dsf_mode = DsfMode::Hard;
        let hard = dsf_filter(&terms, &s).unwrap();
        s.dsf_mode = DsfMode::Soft;
        s.tolerance = 0.0;
        let soft0 = dsf_filter(&terms, &s).unwrap();
        for t in &hard {
            prop_assert!(soft0.iter().any(|x| x.name == t.name));
        }
    }

    /// The box filter never grows the sup-norm; the SGS stress is a variance.
    #[test]
    fn filter_contracts_and_stress_nonnegative(
        values in proptest::collection::vec(-10.0f64..10.0, 7..64),
        half in 0usize..5,
    ) {
        let k = (2 * half + 1).min(if values.len() % 2 == 0 { values.len() - 1 } else { values.len() });
        let spec = FilterSpec::new(k).unwrap();
        let filtered = box_filter(&values, spec).unwrap();
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(sup(&filtered) <= sup(&values) + 1e-12);
        let tau = true_sgs_stress(&values, spec).unwrap();
        prop_assert!(tau.iter().all(|v| *v >= -1e-10));
    }

    /// Any batch partition reproduces the monolithic Gram pair.
    #[test]
    fn gram_partition_equivalence(
        rows in 4usize..200,
        p in 1usize..8,
        cut_fracs in proptest::collection::vec(0.0f64..1.0, 0..5),
        seed in 0u64..1000,
    ) {
        use rand::Rng;
        let mut rng = sindy1d::rng::stream(seed, 92, 0);
        let names: Vec<String> = (0..p).map(|j| format!("c{j}")).collect();
        let columns: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut mono = GramSystem::new(names.clone());
        mono.accumulate(&FeatureBatch {
            names: names.clone(),
            columns: columns.clone(),
            y: y.clone(),
        }).unwrap();

        let mut cuts: Vec<usize> = cut_fracs.iter().map(|f| (f * rows as f64) as usize).collect();
        cuts.push(0);
        cuts.push(rows);
        cuts.sort_unstable();
        let mut parts = GramSystem::new(names.clone());
        for w in cuts.windows(2) {
            parts.accumulate(&FeatureBatch {
                names: names.clone(),
                columns: columns.iter().map(|c| c[w[0]..w[1]].to_vec()).collect(),
                y: y[w[0]..w[1]].to_vec(),
            }).unwrap();
        }
        prop_assert_eq!(mono.n_rows(), parts.n_rows());
        for i in 0..p {
            for j in 0..p {
                let scale = mono.g(i, j).abs().max(1.0);
                prop_assert!((mono.g(i, j) - parts.g(i, j)).abs() <= 1e-12 * scale);
            }
        }
    }

    /// Positive column rescaling never changes the recovered support.
    #[test]
    fn stlsq_support_invariant_under_scaling(
        scale in proptest::sample::select(vec![1e-3f64, 0.1, 10.0, 1e3]),
        seed in 0u64..100,
    ) {
        use rand::Rng;
        let mut rng = sindy1d::rng::stream(seed, 93, 0);
        let rows = 300;
        let p = 6;
        let columns: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..rows).map(|r| 1.5 * columns[1][r] - 0.5 * columns[4][r]).collect();
        let names: Vec<String> = (0..p).map(|j| format!("c{j}")).collect();
        let gram = |cols: Vec<Vec<f64>>| {
            let mut g = GramSystem::new(names.clone());
            g.accumulate(&FeatureBatch { names: names.clone(), columns: cols, y: y.clone() })
                .unwrap();
            g
        };
        let a = solve(&gram(columns.clone()), &SolveMethod::default_stlsq()).unwrap();
        let mut scaled = columns;
        for v in &mut scaled[1] {
            *v *= scale;
        }
        for v in &mut scaled[2] {
            *v *= scale;
        }
        let b = solve(&gram(scaled), &SolveMethod::default_stlsq()).unwrap();
        prop_assert_eq!(a.active_set(), b.active_set());
    }
}
