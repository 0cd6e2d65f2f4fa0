//! Property tests for the structural invariants.

use kdwalk::hash::ApproxPermFamily;
use kdwalk::store::{CanonicalStore, StoreParams};
use kdwalk::walk::{self, WalkParams};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Any insert/remove history realizing a set serializes identically to
    /// the fresh ascending-order build of that set.
    #[test]
    fn store_serialization_is_history_independent(
        seed in 0u64..1_000_000,
        pairs in proptest::collection::btree_map(1u64..=64, 1u64..=64, 1..12),
        decoy_pairs in proptest::collection::btree_map(1u64..=64, 1u64..=64, 0..6),
        order in proptest::collection::vec(0usize..1000, 0..40),
    ) {
        let params = StoreParams::new(64, 64, 20, 2, seed).unwrap();
        let target: Vec<(u64, u64)> = pairs.iter().map(|(&i, &x)| (i, x)).collect();
        let decoys: Vec<(u64, u64)> = decoy_pairs
            .iter()
            .filter(|(i, _)| !pairs.contains_key(i))
            .map(|(&i, &x)| (i, x))
            .collect();

        // scripted history: target inserts in a scrambled order with decoy
        // inserts/removes woven in
        let mut store = CanonicalStore::new(params).unwrap();
        let mut inserted = vec![false; target.len()];
        let mut live: Vec<(u64, u64)> = Vec::new();
        let mut cursor = 0usize;
        for &step in &order {
            match step % 3 {
                0 if cursor < target.len() => {
                    let pick = step % (target.len() - cursor) + cursor;
                    // swap-scramble which target goes next
                    let (i, x) = target[pick];
                    if !inserted[pick] {
                        store.insert(i, x).unwrap();
                        inserted[pick] = true;
                        cursor += (pick == cursor) as usize;
                    }
                }
                1 if live.len() < decoys.len() => {
                    let d = decoys[live.len()];
                    store.insert(d.0, d.1).unwrap();
                    live.push(d);
                }
                _ => {
                    if let Some(d) = live.pop() {
                        store.remove(d.0).unwrap();
                    }
                }
            }
        }
        for (pos, &(i, x)) in target.iter().enumerate() {
            if !inserted[pos] {
                store.insert(i, x).unwrap();
            }
        }
        while let Some(d) = live.pop() {
            store.remove(d.0).unwrap();
        }
        store.validate().unwrap();

        // fresh ascending build (the canonical reference history)
        let mut fresh = CanonicalStore::new(params).unwrap();
        for &(i, x) in &target {
            fresh.insert(i, x).unwrap();
        }
        prop_assert_eq!(store.serialize_canonical(), fresh.serialize_canonical());
    }

    /// Every walk operation is an isometry of the subspace state.
    #[test]
    fn walk_preserves_norm(
        n in 6u64..200,
        r_frac in 0.1f64..0.9,
        k in 2u32..4,
        t1 in 0u64..30,
        t2 in 1u64..6,
    ) {
        // a valid r needs k ≤ r ≤ n − k − 1
        prop_assume!(n >= 2 * k as u64 + 1);
        let r = ((n as f64 * r_frac) as u64).clamp(k as u64, n - k as u64 - 1);
        let params = WalkParams::new(n, n, r, k, t1, t2).unwrap();
        let out = walk::run_single_solution(&params).unwrap();
        prop_assert!((out.final_state.norm() - 1.0).abs() < 1e-9);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&out.success_prob));
        prop_assert_eq!(out.ledger.total(), r + 2 * t1 * t2);
    }

    /// Permutation members are bijections with exact inverses.
    #[test]
    fn permutations_invert(q in 2u64..300, d in 1u32..8, seed in 0u64..10_000) {
        let family = ApproxPermFamily::new(q, d).unwrap();
        let member = family.sample_member(seed);
        let mut seen = vec![false; q as usize];
        for i in 1..=q {
            let image = member.forward(i).unwrap();
            prop_assert!((1..=q).contains(&image));
            prop_assert!(!seen[(image - 1) as usize]);
            seen[(image - 1) as usize] = true;
            prop_assert_eq!(member.inverse(image).unwrap(), i);
        }
    }
}
