//! Exhaustive small-size agreement between the collapsed engine and the
//! brute-force simulator, beyond the four acceptance configurations.

use kdwalk::full_sim::{self, FullState, FullWalk, Instance};
use kdwalk::ledger::QueryLedger;
use kdwalk::walk::{self, WalkParams};
use std::sync::Arc;

fn planted_unique(n: u64, k: u32) -> Instance {
    let mut values = vec![0u64; n as usize];
    for (i, v) in values.iter_mut().enumerate() {
        *v = if i < k as usize { 1 } else { i as u64 + 2 - k as u64 };
    }
    Instance::new(values, n).unwrap()
}

#[test]
fn sweep_all_small_configurations() {
    let mut configs = 0;
    for n in 4..=8u64 {
        for r in 2..=4u64 {
            for k in 2..=3u32 {
                // walk validity: k ≤ r < N and N − r ≥ k
                if (k as u64) > r || r >= n || n - r < k as u64 {
                    continue;
                }
                configs += 1;
                let instance = planted_unique(n, k);
                let collision: Vec<u64> = (1..=k as u64).collect();
                let fw = FullWalk::new(n, r).unwrap();
                let marked = fw.marked_sets(&instance, k).unwrap();
                for t2 in 1..=4u64 {
                    let params = WalkParams::new(n, n, r, k, 0, t2).unwrap();
                    let curve = walk::success_curve(&params, 8).unwrap();
                    let mut state = FullState::uniform(Arc::clone(&fw.basis_h));
                    let mut ledger = QueryLedger::new();
                    for (t1, expected) in &curve {
                        if *t1 > 0 {
                            fw.apply_flip(&mut state, &marked).unwrap();
                            for _ in 0..t2 {
                                state = fw.walk_step(&state, &mut ledger).unwrap();
                            }
                        }
                        let block = state.basis.block();
                        let good: f64 = state
                            .amps
                            .chunks(block)
                            .zip(&marked)
                            .filter(|(_, &m)| m)
                            .map(|(c, _)| c.iter().map(|a| a.norm_sqr()).sum::<f64>())
                            .sum();
                        assert!(
                            (good - expected).abs() < 1e-9,
                            "mismatch at N={n} r={r} k={k} t1={t1} t2={t2}: \
                             full {good} vs collapsed {expected}"
                        );
                        let (_, resid) =
                            full_sim::project_to_subspace(&state, &collision).unwrap();
                        assert!(resid < 1e-9, "residual {resid} at N={n} r={r} k={k}");
                    }
                }
            }
        }
    }
    assert!(configs >= 10, "sweep covered only {configs} configurations");
}

#[test]
fn start_state_matches_exhaustive_enumeration() {
    // N = 8, r = 3, k = 2: all seven amplitudes against the brute-force
    // count of (S, y) types.
    let params = WalkParams::new(8, 8, 3, 2, 0, 1).unwrap();
    let sub = walk::start_state(&params).unwrap();
    let basis = kdwalk::full_sim::FullBasis::new(8, 3, kdwalk::full_sim::BasisMode::H).unwrap();
    let collision = [1u64, 2];
    let uniform = FullState::uniform(Arc::clone(&basis));
    let (coeffs, residual) = full_sim::project_to_subspace(&uniform, &collision).unwrap();
    assert!(residual < 1e-12);
    assert_eq!(coeffs.len(), sub.amps.len());
    for (c, s) in coeffs.iter().zip(&sub.amps) {
        assert!((c - s).norm() < 1e-12, "projection {c} vs formula {s}");
    }
}
