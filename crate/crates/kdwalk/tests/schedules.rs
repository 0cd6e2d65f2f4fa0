//! Cross-checks between the success curve, the spectral iteration count,
//! and the driver's cost tradeoff.

use kdwalk::driver;
use kdwalk::spectral::{self, GengroverInput};
use kdwalk::walk::{self, WalkParams};

#[test]
fn curve_peak_is_near_the_predicted_iteration_count() {
    // k = 2, N = 1000, r = 100: the first curve peak should sit within
    // ±20% of t = ⌊π/(2β)⌋ from the eigenphase analysis.
    let params = WalkParams::new(1000, 1000, 100, 2, 0, WalkParams::default_t2(100, 2)).unwrap();
    let input = GengroverInput::from_walk(&params).unwrap();
    let t = spectral::gengrover_analysis(&input).unwrap().t;
    let curve = walk::success_curve(&params, 2 * t).unwrap();
    // first local maximum of the oscillating curve
    let mut peak = 0usize;
    for i in 1..curve.len() - 1 {
        if curve[i].1 >= curve[i - 1].1 && curve[i].1 >= curve[i + 1].1 {
            peak = i;
            break;
        }
    }
    let lo = (t as f64 * 0.8).floor() as usize;
    let hi = (t as f64 * 1.2).ceil() as usize;
    assert!(
        (lo..=hi).contains(&peak),
        "peak at t1 = {peak}, predicted t = {t} (window [{lo}, {hi}])"
    );
}

#[test]
fn query_cost_dips_at_the_balanced_memory_size() {
    // the tradeoff max(N/√r, r) is minimized near r = N^(k/(k+1)); totals
    // at the extreme memory sizes must sit well above the interior minimum
    let n = 20_000u64;
    let r_values = [32u64, 128, 512, 2048, 8192];
    let rows = driver::memory_sweep(n, 2, &r_values, 31, 3).unwrap();
    let min = rows.iter().map(|w| w.median_queries).fold(f64::INFINITY, f64::min);
    let first = rows.first().unwrap().median_queries;
    let last = rows.last().unwrap().median_queries;
    let interior_min = rows[1..rows.len() - 1]
        .iter()
        .map(|w| w.median_queries)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(min, interior_min, "minimum sits at an endpoint: {rows:?}");
    assert!(first > 1.3 * min, "no dip from the small-r side: {rows:?}");
    assert!(last > 1.3 * min, "no rise on the large-r side: {rows:?}");
}

#[test]
fn substitute_permutations_match_uniform_baseline() {
    // The keyed permutation family must be statistically indistinguishable
    // from truly uniform permutations where the subsampling matters: the
    // multi-collision case, whose success depends on which collision
    // survives each level.
    use kdwalk::driver::PermModel;
    use kdwalk::full_sim::Instance;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(23);
    let instance = Instance::planted(60, 2, 3, &mut rng).unwrap();
    let seeds = 400u64;
    let mut hits = [0u32; 2];
    for seed in 0..seeds {
        for (slot, model) in [PermModel::DWise, PermModel::TrulyUniform].iter().enumerate() {
            hits[slot] += driver::run_k_distinctness_with(&instance, 16, 2, seed, *model)
                .unwrap()
                .found
                .is_some() as u32;
        }
    }
    let a = hits[0] as f64 / seeds as f64;
    let b = hits[1] as f64 / seeds as f64;
    // 3σ for the difference of two proportions near 0.84 at 400 seeds
    assert!((a - b).abs() < 0.08, "family rate {a} vs uniform rate {b}");
}

#[test]
fn driver_success_tracks_engine_on_unique_instances() {
    // 200 seeds at the reference parameters: the driver's first inner run
    // is the full-instance walk, so its success rate dominates 0.9·p.
    use kdwalk::full_sim::Instance;
    use rand::SeedableRng;
    let (n, r, k) = (60u64, 16u64, 2u32);
    let params = WalkParams::tuned(n, 2 * n, r, k).unwrap();
    let p = walk::run_single_solution(&params).unwrap().success_prob;
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(17);
    let instance = Instance::planted(n, k, 1, &mut rng).unwrap();
    let seeds = 200u64;
    let mut hits = 0u32;
    for seed in 0..seeds {
        hits += driver::run_k_distinctness(&instance, r, k, seed)
            .unwrap()
            .found
            .is_some() as u32;
    }
    let rate = hits as f64 / seeds as f64;
    assert!(rate >= 0.9 * p, "rate {rate} below 0.9·p = {}", 0.9 * p);
}
