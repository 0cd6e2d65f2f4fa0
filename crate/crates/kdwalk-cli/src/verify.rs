//! Verification suites behind `kdwalk verify`: each check reports a
//! measured value against its tolerance, and the command exits nonzero if
//! any check fails.

use kdwalk::driver;
use kdwalk::full_sim::{self, FullState, FullWalk, Instance};
use kdwalk::hash::DWiseBoolFamily;
use kdwalk::ledger::QueryLedger;
use kdwalk::linalg::{CMatrix, CVector};
use kdwalk::spectral::{self, GengroverInput, Mode};
use kdwalk::store::{self, CanonicalStore, StoreParams};
use kdwalk::walk::{self, WalkParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// Measured value must stay on the `pass_if_leq` side of this.
    pub bound: f64,
    pub pass_if_leq: bool,
    pub pass: bool,
}

impl Check {
    fn leq(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check { name: name.into(), measured, bound, pass_if_leq: true, pass: measured <= bound }
    }

    fn geq(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check { name: name.into(), measured, bound, pass_if_leq: false, pass: measured >= bound }
    }
}

/// Engine agreement and subspace closure at brute-force scale.
pub fn subspace_suite(n: u64, r: u64, k: u32) -> anyhow::Result<Vec<Check>> {
    let mut values: Vec<u64> = (1..=n).collect();
    values[(k - 1) as usize] = 1; // unique k-collision on the first k indices
    for v in values.iter_mut().skip(k as usize) {
        *v -= k as u64 - 1;
    }
    let instance = Instance::new(values, n)?;
    let collision: Vec<u64> = (1..=k as u64).collect();
    let fw = FullWalk::new(n, r)?;
    let marked = fw.marked_sets(&instance, k)?;
    let mut worst_delta = 0.0f64;
    let mut worst_residual = 0.0f64;
    for t2 in 1..=4u64 {
        let params = WalkParams::new(n, n, r, k, 0, t2)?;
        let curve = walk::success_curve(&params, 8)?;
        let mut state = FullState::uniform(Arc::clone(&fw.basis_h));
        let mut ledger = QueryLedger::new();
        for (t1, expected) in curve.iter() {
            if *t1 > 0 {
                fw.apply_flip(&mut state, &marked)?;
                for _ in 0..t2 {
                    state = fw.walk_step(&state, &mut ledger)?;
                    let (_, resid) = full_sim::project_to_subspace(&state, &collision)?;
                    worst_residual = worst_residual.max(resid);
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
            worst_delta = worst_delta.max((good - expected).abs());
        }
    }
    Ok(vec![
        Check::leq("engine-agreement max |Δp|", worst_delta, 1e-9),
        Check::leq("subspace-closure max residual", worst_residual, 1e-9),
    ])
}

/// Eigenphase law table.
pub fn spectrum_suite(n: u64, r: u64, k: u32) -> anyhow::Result<Vec<Check>> {
    let params = WalkParams::new(n, n, r, k, 0, 1)?;
    let mut checks = Vec::new();
    for row in spectral::theta_table(&params)? {
        checks.push(Check::leq(
            format!("theta law rel err (j = {}, theta = {:.6})", row.j, row.theta),
            row.rel_err,
            0.1,
        ));
    }
    Ok(checks)
}

/// Generalized-Grover trials on random mode sets.
pub fn gengrover_suite(trials: u32, seed: u64) -> anyhow::Result<Vec<Check>> {
    let (eps, alpha) = (0.3f64, 1e-3f64);
    let overlap_bound =
        ((1.0 - alpha * alpha) / 2.0).min((1.0 - alpha * alpha) * eps / 4.0) - 0.1 * eps;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut ok = 0u32;
    let mut min_overlap = f64::INFINITY;
    for _ in 0..trials {
        let l = rng.gen_range(1..=4);
        let thetas: Vec<f64> = (0..l).map(|_| rng.gen_range(eps..PI - 0.05)).collect();
        let weights: Vec<f64> = (0..l).map(|_| rng.gen_range(0.2..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let modes: Vec<Mode> = thetas
            .iter()
            .zip(&weights)
            .map(|(&theta, &w)| Mode {
                theta,
                a: (w / total * (1.0 - alpha * alpha) / 2.0).sqrt(),
            })
            .collect();
        let input = GengroverInput::new(alpha, modes, eps)?;
        let report = spectral::gengrover_analysis_measured(&input)?;
        let overlap = report.measured_overlap.unwrap();
        min_overlap = min_overlap.min(overlap);
        if report.beta >= eps * alpha / PI.sqrt()
            && report.beta <= 2.6 * alpha
            && overlap >= overlap_bound
        {
            ok += 1;
        }
    }
    Ok(vec![
        Check::geq(format!("gengrover trials in-bound ({trials} total)"), ok as f64, trials as f64),
        Check::geq("gengrover min model overlap", min_overlap, overlap_bound),
    ])
}

fn random_unitary(n: usize, rng: &mut ChaCha20Rng) -> CMatrix {
    let mut cols: Vec<CVector> = Vec::new();
    while cols.len() < n {
        let mut v = CVector::from_fn(n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        for c in &cols {
            let proj = c.dotc(&v);
            v -= c.map(|z| z * proj);
        }
        let norm = v.norm();
        if norm > 1e-6 {
            cols.push(v.map(|z| z / norm));
        }
    }
    CMatrix::from_columns(&cols)
}

/// Hoffman-Wielandt bound over random unitary pairs.
pub fn hoffman_suite(trials: u32, seed: u64) -> anyhow::Result<Vec<Check>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut holds = 0u32;
    let mut min_margin = f64::INFINITY;
    for trial in 0..trials {
        let n = 3 + (trial as usize % 6);
        let q = random_unitary(n, &mut rng);
        let mut d = CMatrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = Complex64::from_polar(1.0, rng.gen_range(-0.2..0.2));
        }
        let a = &q * d * q.adjoint();
        let b = random_unitary(n, &mut rng);
        let rep = spectral::hoffman_wielandt_check(&a, &b)?;
        holds += rep.holds as u32;
        min_margin = min_margin.min(rep.margin);
    }
    Ok(vec![
        Check::geq(format!("hoffman-wielandt holds ({trials} trials)"), holds as f64, trials as f64),
        Check::geq("hoffman-wielandt min margin", min_margin, -1e-9),
    ])
}

/// Store canonicality across histories plus the failure-rate measurement.
pub fn store_suite(n: u64, r: u64, histories: u32, seed: u64) -> anyhow::Result<Vec<Check>> {
    let params = StoreParams::new(n, n, r, 2, seed)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);
    let set_size = (r * 7 / 10).max(1) as usize;
    let mut target: Vec<(u64, u64)> = Vec::new();
    while target.len() < set_size {
        let i = rng.gen_range(1..=n);
        if target.iter().all(|&(t, _)| t != i) {
            target.push((i, rng.gen_range(1..=n)));
        }
    }
    let mut blobs = std::collections::HashSet::new();
    let mut rank_ok = true;
    for _ in 0..histories {
        let mut store = CanonicalStore::new(params)?;
        let mut order: Vec<usize> = (0..target.len()).collect();
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for &o in &order {
            let (i, x) = target[o];
            store.insert(i, x)?;
        }
        let mut ranks: Vec<u64> = store
            .indices_in_rank_order()
            .iter()
            .map(|&i| store.rank(i))
            .collect::<kdwalk::Result<_>>()?;
        ranks.sort_unstable();
        rank_ok &= ranks.iter().enumerate().all(|(p, &rk)| rk == p as u64 + 1);
        blobs.insert(store.serialize_canonical());
    }
    let failure = store::measure_failure_rate(params, 10_000, seed ^ 0xf00d)?;
    Ok(vec![
        Check::leq(
            format!("distinct serializations over {histories} histories"),
            blobs.len() as f64,
            1.0,
        ),
        Check::geq("rank bijection on all final states", rank_ok as u32 as f64, 1.0),
        Check::leq("store failure fraction (10⁴ ops)", failure.fraction, 0.0),
    ])
}

/// Exact d-wise uniformity by full enumeration at n = 8.
pub fn dwise_suite() -> anyhow::Result<Vec<Check>> {
    let mut worst_dev = 0.0f64;
    for d in 1..=3u32 {
        let fam = DWiseBoolFamily::new(8, d)?;
        let members = fam.member_count().unwrap();
        let expected = (members >> d) as i128;
        let mut tuples: Vec<Vec<u64>> = vec![vec![]];
        for _ in 0..d {
            let mut next = Vec::new();
            for t in &tuples {
                for p in 1..=8u64 {
                    if !t.contains(&p) {
                        let mut t2 = t.clone();
                        t2.push(p);
                        next.push(t2);
                    }
                }
            }
            tuples = next;
        }
        for tuple in tuples {
            let mut counts = vec![0i128; 1 << d];
            for idx in 0..members {
                let m = fam.member_from_index(idx).unwrap();
                let mut pattern = 0usize;
                for &point in &tuple {
                    pattern = (pattern << 1) | m.eval(point)? as usize;
                }
                counts[pattern] += 1;
            }
            for c in counts {
                worst_dev = worst_dev.max((c - expected).unsigned_abs() as f64);
            }
        }
    }
    Ok(vec![Check::leq("d-wise enumeration max count deviation", worst_dev, 0.0)])
}

/// Driver success statistics on planted instances.
pub fn driver_suite(n: u64, r: u64, k: u32, seeds: u32, seed: u64) -> anyhow::Result<Vec<Check>> {
    let params = WalkParams::tuned(n, 2 * n, r, k)?;
    let p = walk::run_single_solution(&params)?.success_prob;
    let mut gen_rng = ChaCha20Rng::seed_from_u64(seed);
    let unique = Instance::planted(n, k, 1, &mut gen_rng)?;
    let mut hits = 0u32;
    for s in 0..seeds {
        hits += driver::run_k_distinctness(&unique, r, k, seed ^ s as u64)?
            .found
            .is_some() as u32;
    }
    let rate = hits as f64 / seeds as f64;
    Ok(vec![
        Check::geq("single-solution baseline p", p, 0.8),
        Check::geq(format!("driver unique-collision rate ({seeds} seeds)"), rate, 0.9 * p),
    ])
}
