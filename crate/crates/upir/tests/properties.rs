//! Randomized structural properties over generated set systems: profile
//! invariance under relabeling, duality as an involution, membership-change
//! round trips, and agreement between exact distributions and the sampler.

use proptest::prelude::*;

use upir::designs::{PointId, SetSystem};
use upir::fixtures::{fixture, FIXTURE_NAMES};
use upir::protocols::{choose_submission, plan_distribution, run_workload, ProtocolKind, ProtocolSpec, Trace, Workload};
use upir::rng::query_rng;

use num_rational::Ratio;

/// A small random set system that satisfies the structural invariants
/// (proper nonempty blocks, every point used).
fn arb_system() -> impl Strategy<Value = SetSystem> {
    (3usize..=8).prop_flat_map(|v| {
        let block = proptest::sample::subsequence((0..v).collect::<Vec<usize>>(), 2..v);
        proptest::collection::vec(block, v..=v + 3).prop_filter_map(
            "blocks must cover every point",
            move |blocks| {
                let points: Vec<String> = (0..v).map(|i| format!("P{i}")).collect();
                let named: Vec<Vec<String>> = blocks
                    .iter()
                    .map(|b| b.iter().map(|i| format!("P{i}")).collect())
                    .collect();
                SetSystem::new("generated", points, named).ok()
            },
        )
    })
}

/// The same system with points relabeled/reordered by a permutation and the
/// block list reordered.
fn relabeled(system: &SetSystem, point_perm: &[usize], block_perm: &[usize]) -> SetSystem {
    let file = system.to_design_file();
    let rename = |name: &str| -> String {
        let old = file.points.iter().position(|p| p == name).expect("known");
        format!("Q{}", point_perm[old])
    };
    let mut points: Vec<String> = file.points.iter().map(|p| rename(p)).collect();
    points.sort();
    let blocks: Vec<Vec<String>> = block_perm
        .iter()
        .map(|&b| file.blocks[b].iter().map(|p| rename(p)).collect())
        .collect();
    SetSystem::new("relabeled", points, blocks).expect("relabeling preserves validity")
}

fn perm(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<usize>>()).prop_shuffle()
}

proptest! {
    #[test]
    fn profile_is_invariant_under_relabeling(
        (system, point_perm, block_perm) in arb_system().prop_flat_map(|s| {
            let (v, b) = (s.v(), s.b());
            (Just(s), perm(v), perm(b))
        })
    ) {
        let original = system.profile();
        let renamed = relabeled(&system, &point_perm, &block_perm).profile();

        prop_assert_eq!(original.v, renamed.v);
        prop_assert_eq!(original.b, renamed.b);
        let sorted = |mut xs: Vec<u32>| { xs.sort_unstable(); xs };
        prop_assert_eq!(sorted(original.degrees.clone()), sorted(renamed.degrees.clone()));
        prop_assert_eq!(sorted(original.ranks.clone()), sorted(renamed.ranks.clone()));
        prop_assert_eq!(original.r, renamed.r);
        prop_assert_eq!(original.k, renamed.k);
        prop_assert_eq!(original.lambda, renamed.lambda);
        prop_assert_eq!(
            (original.lambda_min, original.lambda_max),
            (renamed.lambda_min, renamed.lambda_max)
        );
        prop_assert_eq!((original.mu_min, original.mu_max), (renamed.mu_min, renamed.mu_max));
        prop_assert_eq!(original.flags, renamed.flags);
    }

    #[test]
    fn dual_is_an_involution(system in arb_system()) {
        prop_assume!(system.dual().is_ok());
        let dual = system.dual().unwrap();

        // Parameters transpose: dual points are blocks and vice versa.
        prop_assert_eq!(dual.v(), system.b());
        prop_assert_eq!(dual.b(), system.v());
        let degrees = |s: &SetSystem| -> Vec<u32> {
            (0..s.v() as u32).map(|p| s.degree(PointId(p))).collect()
        };
        let ranks = |s: &SetSystem| -> Vec<u32> {
            s.blocks().iter().map(|b| b.len() as u32).collect()
        };
        prop_assert_eq!(degrees(&dual), ranks(&system));
        prop_assert_eq!(ranks(&dual), degrees(&system));

        // Taking the dual twice restores the exact incidence structure.
        prop_assume!(dual.dual().is_ok());
        let back = dual.dual().unwrap();
        prop_assert_eq!(back.blocks(), system.blocks());
    }

    #[test]
    fn adding_then_removing_a_user_is_the_identity(system in arb_system()) {
        let (grown, joined) = match system.add_user("EXTRA") {
            Ok(x) => x,
            // Impossible only when some block already spans all but one
            // point, so no block can take the newcomer; nothing to check.
            Err(_) => return Ok(()),
        };
        prop_assert!(!joined.is_empty());
        let extra = grown.point_id("EXTRA").unwrap();

        // Old pair coverage is untouched; the newcomer shares a space with
        // every old point.
        let (before, after) = (system.profile(), grown.profile());
        for a in 0..system.v() as u32 {
            for b in (a + 1)..system.v() as u32 {
                prop_assert_eq!(
                    before.pair_index.get(PointId(a), PointId(b)),
                    after.pair_index.get(PointId(a), PointId(b))
                );
            }
            prop_assert!(after.pair_index.get(extra, PointId(a)) >= 1);
        }

        let (back, rekey) = grown.remove_user(extra).expect("removal undoes the add");
        prop_assert_eq!(&rekey, &joined);
        prop_assert_eq!(back.points(), system.points());
        prop_assert_eq!(back.blocks(), system.blocks());
    }
}

/// Fixture/protocol pairs the validator accepts for proxy-draw simulation.
fn proxy_draw_combos() -> Vec<(&'static str, ProtocolKind)> {
    let kinds = [
        ProtocolKind::PdBibdV1,
        ProtocolKind::PdBibdV2,
        ProtocolKind::PdCoverV1,
        ProtocolKind::PdCoverV2,
    ];
    FIXTURE_NAMES
        .iter()
        .flat_map(|name| kinds.iter().map(move |k| (*name, *k)))
        .filter(|(name, kind)| {
            let profile = fixture(name).unwrap().profile();
            ProtocolSpec::new(*kind).validate(&profile).is_ok()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_distributions_sum_to_one_and_carry_the_sampler(
        combo in 0usize..28,
        source in 0u32..5,
        seed in any::<u64>()
    ) {
        let (name, kind) = proxy_draw_combos()[combo];
        let design = fixture(name).unwrap();
        let profile = design.profile();
        let source = PointId(source % design.v() as u32);
        let spec = ProtocolSpec::new(kind);

        let dist = plan_distribution(&spec, &design, &profile, source).unwrap();
        let total: Ratio<u64> = dist.values().copied().sum();
        prop_assert_eq!(total, Ratio::new(1, 1));

        let mut rng = query_rng(seed, 0);
        for _ in 0..40 {
            let plan = choose_submission(&spec, &design, &profile, source, &mut rng).unwrap();
            prop_assert!(
                dist.contains_key(&plan),
                "sampled {:?} outside the exact support", plan
            );
            prop_assert_eq!(plan.source, source);
        }
    }

    #[test]
    fn traces_round_trip_through_ndjson(
        combo in 0usize..28,
        seed in any::<u64>(),
        hop in proptest::option::of(1u32..=4)
    ) {
        let (name, kind) = proxy_draw_combos()[combo];
        let design = fixture(name).unwrap();
        let mut spec = ProtocolSpec::new(kind);
        if let Some(h) = hop {
            spec = spec.with_hop(f64::from(h) / 4.0);
        }
        let trace = run_workload(&design, &spec, &Workload::independent(25), seed).unwrap();
        let back = Trace::from_ndjson(&trace.to_ndjson()).unwrap();
        prop_assert_eq!(trace, back);
    }
}
