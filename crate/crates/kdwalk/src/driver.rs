//! The multiple-collision driver: repeated single-solution runs on a
//! shrinking chain of index subsets, classical fallbacks, and full query
//! accounting.
//!
//! Inner runs are modeled through the collapsed engine. On a sub-instance
//! with exactly one k-collision the measured set S is sampled from the exact
//! final distribution of the walk; with zero or multiple k-collisions S is
//! sampled uniformly (the pessimistic model, which is all the success
//! guarantee relies on). Each inner run charges r_j + 2·t1·t2 queries
//! regardless — the quantum algorithm's cost is oblivious to the collision
//! structure.

use crate::full_sim::{CollisionCount, Instance};
use crate::hash::{ApproxPermFamily, PermMember};
use crate::ledger::QueryLedger;
use crate::walk::{self, WalkParams};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Smallest even prime power q = p^(2m) with target ≤ q ≤ (1 + 1/(2k²))·target.
/// If the window is empty, returns the smallest even prime power ≥ target
/// with the relaxation flag set.
pub fn pick_prime_power(target: u64, k: u32) -> (u64, bool) {
    assert!(target >= 2, "need target >= 2");
    // q = s² for a prime-power s, so scan s upward from ⌈√target⌉.
    let mut s = (target as f64).sqrt().ceil() as u64;
    while s * s < target {
        s += 1;
    }
    while s > 2 && (s - 1) * (s - 1) >= target {
        s -= 1;
    }
    let s = (s..).find(|&c| is_prime_power(c)).unwrap();
    let q = s * s;
    let window_hi = target as f64 * (1.0 + 1.0 / (2.0 * (k as f64) * (k as f64)));
    (q, q as f64 > window_hi)
}

fn is_prime_power(mut x: u64) -> bool {
    if x < 2 {
        return false;
    }
    let mut p = 2;
    while p * p <= x {
        if x.is_multiple_of(p) {
            while x.is_multiple_of(p) {
                x /= p;
            }
            return x == 1;
        }
        p += 1;
    }
    true // x itself prime
}

/// Metadata of one applied subsampling level.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChainLevel {
    pub q: u64,
    pub relaxed: bool,
    pub perm_seed: u64,
    pub size_after: u64,
}

/// The chain T₁ ⊇ T₂ ⊇ … of index subsets, maintained through the composed
/// inverse permutations.
#[derive(Debug, Clone)]
pub struct SubsetChain {
    n: u64,
    k: u32,
    current: Vec<u64>,
    /// Composed map π₁⁻¹∘…∘π_j⁻¹ over [q_j] (1-based values in [q₁]);
    /// empty before the first level.
    comp: Vec<u32>,
    /// Membership of the current T, indexed by original value.
    alive: Vec<bool>,
    pub levels: Vec<ChainLevel>,
}

impl SubsetChain {
    /// T₁ = `[N]`.
    pub fn start(n: u64, k: u32) -> Self {
        SubsetChain {
            n,
            k,
            current: (1..=n).collect(),
            comp: Vec::new(),
            alive: {
                let mut a = vec![false; n as usize + 1];
                for x in a.iter_mut().skip(1) {
                    *x = true;
                }
                a
            },
            levels: Vec::new(),
        }
    }

    pub fn current(&self) -> &[u64] {
        &self.current
    }

    /// q for the next level, from the current subset size.
    pub fn next_q(&self) -> (u64, bool) {
        pick_prime_power(self.current.len().max(2) as u64, self.k)
    }

    /// Applies one subsampling level: T_{j+1} = {π₁⁻¹…π_j⁻¹(i) :
    /// i ∈ [⌈(2k/(2k+1))·q_j⌉]}, discarding images outside `[N]` or outside
    /// the current subset.
    pub fn next_subset(&mut self, perm: &PermMember, relaxed: bool) -> Result<()> {
        self.next_subset_with(
            perm.q(),
            relaxed,
            perm.key.seed,
            |i| perm.inverse(i),
        )
    }

    /// As [`Self::next_subset`], with an explicit inverse-permutation table
    /// (the truly-uniform baseline of the permutation-family comparison).
    pub fn next_subset_explicit(
        &mut self,
        inverse: &[u32],
        relaxed: bool,
        seed: u64,
    ) -> Result<()> {
        self.next_subset_with(inverse.len() as u64, relaxed, seed, |i| {
            Ok(inverse[(i - 1) as usize] as u64)
        })
    }

    fn next_subset_with(
        &mut self,
        q: u64,
        relaxed: bool,
        perm_seed: u64,
        inverse: impl Fn(u64) -> Result<u64>,
    ) -> Result<()> {
        let (expected_q, _) = self.next_q();
        if q != expected_q {
            return Err(Error::InvalidParams(format!(
                "permutation domain {q} does not match the required q = {expected_q}"
            )));
        }
        if !self.comp.is_empty() && q > self.comp.len() as u64 {
            return Err(Error::InvalidParams(format!(
                "q = {q} exceeds the previous level's domain {}",
                self.comp.len()
            )));
        }
        let keep = (2 * self.k as u64 * q).div_ceil(2 * self.k as u64 + 1);
        let first_level = self.comp.is_empty();
        let mut new_comp = vec![0u32; q as usize];
        for (i, slot) in new_comp.iter_mut().enumerate() {
            let pre = inverse(i as u64 + 1)?;
            *slot = if first_level { pre as u32 } else { self.comp[(pre - 1) as usize] };
        }
        let mut next: Vec<u64> = new_comp[..keep as usize]
            .iter()
            .map(|&v| v as u64)
            .filter(|&v| v >= 1 && v <= self.n && self.alive[v as usize])
            .collect();
        next.sort_unstable();
        for v in &self.current {
            self.alive[*v as usize] = false;
        }
        for v in &next {
            self.alive[*v as usize] = true;
        }
        self.levels.push(ChainLevel { q, relaxed, perm_seed, size_after: next.len() as u64 });
        self.current = next;
        self.comp = new_comp;
        Ok(())
    }
}

/// Which permutation family drives the subsampling: the keyed d-wise
/// substitute (default) or the truly uniform baseline it is validated
/// against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PermModel {
    #[default]
    DWise,
    TrulyUniform,
}

/// Outcome of one driver iteration, for the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IterationOutcome {
    /// Inner run measured a set that verified.
    Found,
    /// Inner run measured a set that did not verify.
    Continue,
    /// Subset too small to host a valid walk; no run charged.
    WalkSkipped,
    /// Classical scan of the remaining subset.
    ClassicalScan,
    /// Emulated Grover over the k-tuples of the remaining subset.
    GroverFallback,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t_size: u64,
    pub r_j: u64,
    pub t1: u64,
    pub t2: u64,
    pub q: Option<u64>,
    pub relaxed: Option<bool>,
    pub outcome: IterationOutcome,
}

/// Result of the full k-distinctness decision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollisionResult {
    /// k pairwise distinct 1-based indices with equal values, classically
    /// verified before answering.
    pub found: Option<Vec<u64>>,
    pub ledger: QueryLedger,
    pub trace: Vec<IterationRecord>,
}

/// One inner run of the single-solution algorithm on a sub-instance.
#[derive(Debug, Clone)]
pub struct InnerRun {
    /// The measured set S (1-based original indices, ascending).
    pub measured: Vec<u64>,
    pub ledger: QueryLedger,
    pub t1: u64,
    pub t2: u64,
}

/// Samples r_j distinct elements of `pool` uniformly (partial Fisher-Yates).
fn sample_subset(pool: &[u64], r_j: usize, rng: &mut ChaCha20Rng) -> Vec<u64> {
    let mut copy: Vec<u64> = pool.to_vec();
    let n = copy.len();
    for i in 0..r_j {
        let j = rng.gen_range(i..n);
        copy.swap(i, j);
    }
    let mut s = copy[..r_j].to_vec();
    s.sort_unstable();
    s
}

/// Runs the single-solution algorithm on x restricted to `subset`.
///
/// The measurement model: with exactly one k-collision present the type
/// (j, l) is drawn from the exact final subspace distribution and S is a
/// uniform set of that type; otherwise S is uniform. The ledger charges
/// r_j + 2·t1·t2 either way.
pub fn inner_algorithm2(
    instance: &Instance,
    subset: &[u64],
    r_j: u64,
    k: u32,
    rng: &mut ChaCha20Rng,
) -> Result<InnerRun> {
    let n_sub = subset.len() as u64;
    let params = WalkParams::tuned(n_sub, instance.alphabet(), r_j, k)?;
    let mut ledger = QueryLedger::new();
    ledger.charge_setup(r_j);
    ledger.charge_walk_steps(params.t1 * params.t2);

    let measured = match instance.collision_count(k, Some(subset)) {
        CollisionCount::Unique(collision) => {
            let out = walk::run_single_solution(&params)?;
            // sample the type (j, l) from the exact final distribution
            let weights: Vec<f64> =
                out.final_state.amps.iter().map(|a| a.norm_sqr().max(0.0)).collect();
            let total: f64 = weights.iter().sum();
            let mut draw = rng.gen_range(0.0..total);
            let mut type_idx = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if draw < *w {
                    type_idx = i;
                    break;
                }
                draw -= w;
            }
            let j = if type_idx == 2 * k as usize { k as usize } else { type_idx / 2 };
            // S = j collision members + (r_j − j) others, uniformly
            let members = sample_subset(&collision, j, rng);
            let others: Vec<u64> =
                subset.iter().copied().filter(|i| !collision.contains(i)).collect();
            let mut s = sample_subset(&others, r_j as usize - j, rng);
            s.extend(members);
            s.sort_unstable();
            s
        }
        _ => sample_subset(subset, r_j as usize, rng),
    };
    Ok(InnerRun { measured, ledger, t1: params.t1, t2: params.t2 })
}

/// Independence degree for the subsampling permutations: ⌈2k·log₂N⌉.
fn perm_independence(n: u64, k: u32) -> u32 {
    ((2 * k) as f64 * (n as f64).log2()).ceil().max(1.0) as u32
}

/// Full k-distinctness decision on an explicit instance.
pub fn run_k_distinctness(
    instance: &Instance,
    r: u64,
    k: u32,
    seed: u64,
) -> Result<CollisionResult> {
    run_k_distinctness_with(instance, r, k, seed, PermModel::DWise)
}

/// As [`run_k_distinctness`] with an explicit permutation model.
pub fn run_k_distinctness_with(
    instance: &Instance,
    r: u64,
    k: u32,
    seed: u64,
    model: PermModel,
) -> Result<CollisionResult> {
    if (k as u64) > r {
        return Err(Error::InvalidParams(format!("r = {r} below k = {k}")));
    }
    let n = instance.len();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut chain = SubsetChain::start(n, k);
    let mut ledger = QueryLedger::new();
    let mut trace = Vec::new();
    let threshold = r.max((n as f64).sqrt().floor() as u64);
    let d = perm_independence(n, k);
    // |T| shrinks by a constant factor per level, so the loop is bounded;
    // the cap only guards against a degenerate relaxed-q stall.
    let max_iters = (5.0 * k as f64 * (n as f64).ln()).ceil() as usize + 8;

    while chain.current().len() as u64 > threshold && trace.len() < max_iters {
        let subset = chain.current().to_vec();
        let t_size = subset.len() as u64;
        // memory r_j = r·|T_j|/N, clamped to the walk's validity window
        // k ≤ r_j ≤ |T_j| − k − 1 (subsets too small for a walk are only
        // subsampled)
        let desired = ((r as u128 * t_size as u128) / n as u128) as u64;
        let hi = t_size.saturating_sub(k as u64 + 1);
        let walk_ok = hi >= k as u64;
        let r_j = desired.clamp(k as u64, hi.max(k as u64));

        let mut outcome = IterationOutcome::WalkSkipped;
        let mut rec_t1 = 0;
        let mut rec_t2 = 0;
        if walk_ok {
            let run = inner_algorithm2(instance, &subset, r_j, k, &mut rng)?;
            ledger.absorb(&run.ledger);
            rec_t1 = run.t1;
            rec_t2 = run.t2;
            if let Some(found) = instance.find_collision(k, &run.measured) {
                trace.push(IterationRecord {
                    t_size,
                    r_j,
                    t1: rec_t1,
                    t2: rec_t2,
                    q: None,
                    relaxed: None,
                    outcome: IterationOutcome::Found,
                });
                return Ok(CollisionResult { found: Some(found), ledger, trace });
            }
            outcome = IterationOutcome::Continue;
        }

        let (q, relaxed) = chain.next_q();
        let perm_seed = rng.gen::<u64>();
        match model {
            PermModel::DWise => {
                let family = ApproxPermFamily::new(q, d)?;
                chain.next_subset(&family.sample_member(perm_seed), relaxed)?;
            }
            PermModel::TrulyUniform => {
                let mut inv: Vec<u32> = (1..=q as u32).collect();
                let mut perm_rng = ChaCha20Rng::seed_from_u64(perm_seed);
                for i in (1..inv.len()).rev() {
                    inv.swap(i, perm_rng.gen_range(0..=i));
                }
                chain.next_subset_explicit(&inv, relaxed, perm_seed)?;
            }
        }
        trace.push(IterationRecord {
            t_size,
            r_j,
            t1: rec_t1,
            t2: rec_t2,
            q: Some(q),
            relaxed: Some(relaxed),
            outcome,
        });
    }

    let remaining = chain.current().to_vec();
    let t_size = remaining.len() as u64;
    let found = if t_size <= r {
        // classical scan: query everything left
        ledger.charge_classical(t_size);
        trace.push(IterationRecord {
            t_size,
            r_j: 0,
            t1: 0,
            t2: 0,
            q: None,
            relaxed: None,
            outcome: IterationOutcome::ClassicalScan,
        });
        instance.find_collision(k, &remaining)
    } else {
        // |T| ≤ √N: Grover over the ≤ |T|^k ≤ N^(k/2) k-tuples, charged at
        // the square root, scanned classically here.
        let tuples = (t_size as f64).powi(k as i32);
        ledger.charge_grover(tuples.sqrt().ceil() as u64);
        trace.push(IterationRecord {
            t_size,
            r_j: 0,
            t1: 0,
            t2: 0,
            q: None,
            relaxed: None,
            outcome: IterationOutcome::GroverFallback,
        });
        instance.find_collision(k, &remaining)
    };
    Ok(CollisionResult { found, ledger, trace })
}

/// ⌊N^(k/(k+1))⌋ computed exactly in integers.
pub fn optimal_r(n: u64, k: u32) -> u64 {
    let kk = k;
    let mut r = (n as f64).powf(kk as f64 / (kk as f64 + 1.0)).round() as u64;
    let nk = (n as u128).pow(kk);
    while (r as u128 + 1).pow(kk + 1) <= nk {
        r += 1;
    }
    while r > 1 && (r as u128).pow(kk + 1) > nk {
        r -= 1;
    }
    r
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanRow {
    pub n: u64,
    pub r: u64,
    /// Median ledger total across the trials — the typical execution cost.
    /// The distribution is bimodal (early success vs a full subset sweep),
    /// so the median is what the fit uses.
    pub median_queries: f64,
    pub mean_queries: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentScan {
    pub k: u32,
    pub trials: u32,
    pub rows: Vec<ScanRow>,
    /// Least-squares slope of log(queries) vs log(N).
    pub slope: f64,
}

/// Runs the driver on planted single-collision instances at
/// r = ⌊N^(k/(k+1))⌋ across the grid and fits the log-log query slope.
pub fn exponent_scan(k: u32, n_grid: &[u64], seed: u64, trials: u32) -> Result<ExponentScan> {
    if n_grid.len() < 3 {
        return Err(Error::InvalidParams("need at least 3 grid points".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("grid must be strictly ascending".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &n in n_grid {
        let r = optimal_r(n, k);
        let mut totals = Vec::with_capacity(trials as usize);
        let mut hits = 0u32;
        for _ in 0..trials {
            let instance = Instance::planted(n, k, 1, &mut rng)?;
            let res = run_k_distinctness(&instance, r, k, rng.gen::<u64>())?;
            totals.push(res.ledger.total());
            hits += res.found.is_some() as u32;
        }
        totals.sort_unstable();
        let median = if trials % 2 == 1 {
            totals[trials as usize / 2] as f64
        } else {
            (totals[trials as usize / 2 - 1] + totals[trials as usize / 2]) as f64 / 2.0
        };
        rows.push(ScanRow {
            n,
            r,
            median_queries: median,
            mean_queries: totals.iter().sum::<u64>() as f64 / trials as f64,
            success_rate: hits as f64 / trials as f64,
        });
    }
    let slope = fit_loglog_slope(
        &rows.iter().map(|r| (r.n as f64, r.median_queries)).collect::<Vec<_>>(),
    );
    Ok(ExponentScan { k, trials, rows, slope })
}

/// Least-squares slope of ln(y) against ln(x).
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: u64,
    /// Median ledger total across the trials (same rationale as the
    /// exponent scan).
    pub median_queries: f64,
    pub mean_queries: f64,
    /// The predicted shape max(N/√r, r).
    pub shape: f64,
}

/// Query totals across a sweep of memory sizes r at fixed N, against the
/// tradeoff shape max(N/√r, r).
pub fn memory_sweep(
    n: u64,
    k: u32,
    r_values: &[u64],
    seed: u64,
    trials: u32,
) -> Result<Vec<SweepRow>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &r in r_values {
        let mut totals = Vec::with_capacity(trials as usize);
        for _ in 0..trials {
            let instance = Instance::planted(n, k, 1, &mut rng)?;
            let res = run_k_distinctness(&instance, r, k, rng.gen::<u64>())?;
            totals.push(res.ledger.total());
        }
        totals.sort_unstable();
        let median = if trials % 2 == 1 {
            totals[trials as usize / 2] as f64
        } else {
            (totals[trials as usize / 2 - 1] + totals[trials as usize / 2]) as f64 / 2.0
        };
        let shape = (n as f64 / (r as f64).sqrt()).max(r as f64);
        rows.push(SweepRow {
            r,
            median_queries: median,
            mean_queries: totals.iter().sum::<u64>() as f64 / trials as f64,
            shape,
        });
    }
    Ok(rows)
}
