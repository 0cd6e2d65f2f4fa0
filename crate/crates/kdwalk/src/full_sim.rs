//! Brute-force state-vector simulation over explicit basis pairs (S, y).
//!
//! This is the correctness oracle for the collapsed engine: it carries the
//! full C(N,r)·(N−r)-dimensional state with no symmetry assumptions, so any
//! disagreement with [`crate::walk`] is a bug in one of the two. A size cap
//! keeps it honest about its role — it refuses basis sizes past
//! [`DEFAULT_PAIR_CAP`] unless overridden.
//!
//! The x register is never materialized: under a fixed instance the stored
//! values are a function of S, so basis pairs (S, y) suffice.

use crate::ledger::QueryLedger;
use crate::walk::SubspaceState;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use std::collections::HashMap;
use std::sync::Arc;

pub const DEFAULT_PAIR_CAP: u128 = 1_000_000;

/// A concrete input x₁..x_N with values in `[M]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    values: Vec<u64>,
    m: u64,
}

/// Collision structure of an instance, as seen by the driver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CollisionCount {
    None,
    /// Exactly one set of k indices with a common value (1-based indices,
    /// ascending).
    Unique(Vec<u64>),
    Multiple,
}

impl Instance {
    pub fn new(values: Vec<u64>, m: u64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::BadInstance("need at least two values".into()));
        }
        if m < 1 {
            return Err(Error::BadInstance("alphabet size must be >= 1".into()));
        }
        if let Some(v) = values.iter().find(|&&v| v < 1 || v > m) {
            return Err(Error::BadInstance(format!("value {v} outside [1, {m}]")));
        }
        Ok(Instance { values, m })
    }

    /// Parses either one integer per line or a JSON array.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        let values: Vec<u64> = if trimmed.starts_with('[') {
            serde_json::from_str(trimmed)
                .map_err(|e| Error::BadInstance(format!("bad JSON array: {e}")))?
        } else {
            let mut vals = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                vals.push(line.parse::<u64>().map_err(|e| {
                    Error::BadInstance(format!("line {}: {e}", lineno + 1))
                })?);
            }
            vals
        };
        let m = values.iter().copied().max().unwrap_or(1);
        Instance::new(values, m)
    }

    /// Instance with all values distinct except `groups` planted disjoint
    /// k-collisions at random positions.
    pub fn planted(n: u64, k: u32, groups: usize, rng: &mut ChaCha20Rng) -> Result<Self> {
        let n = n as usize;
        let need = groups * k as usize;
        if need > n {
            return Err(Error::BadInstance("too many planted collisions".into()));
        }
        // Random distinct positions for the planted groups.
        let mut positions: Vec<usize> = (0..n).collect();
        for i in 0..need {
            let j = rng.gen_range(i..n);
            positions.swap(i, j);
        }
        let m = 2 * n as u64;
        let mut values: Vec<u64> = vec![0; n];
        for (g, chunk) in positions[..need].chunks(k as usize).enumerate() {
            for &p in chunk {
                values[p] = (g + 1) as u64;
            }
        }
        let mut next = groups as u64 + 1;
        for v in values.iter_mut() {
            if *v == 0 {
                *v = next;
                next += 1;
            }
        }
        Instance::new(values, m)
    }

    pub fn len(&self) -> u64 {
        self.values.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn alphabet(&self) -> u64 {
        self.m
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    /// x_i for a 1-based index.
    pub fn value(&self, i: u64) -> u64 {
        self.values[(i - 1) as usize]
    }

    /// Collision structure among the 1-based indices in `subset`
    /// (the whole instance if `None`).
    pub fn collision_count(&self, k: u32, subset: Option<&[u64]>) -> CollisionCount {
        let mut by_value: HashMap<u64, Vec<u64>> = HashMap::new();
        match subset {
            Some(idxs) => {
                for &i in idxs {
                    by_value.entry(self.value(i)).or_default().push(i);
                }
            }
            None => {
                for (p, &v) in self.values.iter().enumerate() {
                    by_value.entry(v).or_default().push(p as u64 + 1);
                }
            }
        }
        let mut groups: Vec<&Vec<u64>> =
            by_value.values().filter(|g| g.len() >= k as usize).collect();
        match groups.len() {
            0 => CollisionCount::None,
            1 if groups[0].len() == k as usize => {
                let mut idxs = groups.pop().unwrap().clone();
                idxs.sort_unstable();
                CollisionCount::Unique(idxs)
            }
            _ => CollisionCount::Multiple,
        }
    }

    /// The first k indices in `candidates` sharing a value, if any.
    pub fn find_collision(&self, k: u32, candidates: &[u64]) -> Option<Vec<u64>> {
        let mut by_value: HashMap<u64, Vec<u64>> = HashMap::new();
        for &i in candidates {
            let entry = by_value.entry(self.value(i)).or_default();
            entry.push(i);
            if entry.len() == k as usize {
                let mut found = entry.clone();
                found.sort_unstable();
                return Some(found);
            }
        }
        None
    }
}

/// Which explicit basis a state lives in: H (|S| = r, y ∉ S) or
/// H′ (|S| = r+1, y ∈ S).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisMode {
    H,
    HPrime,
}

/// Canonical enumeration of the basis pairs (S, y), lexicographic by (S, y).
///
/// Pairs with equal S are contiguous: index = set_index·block + offset with
/// block = N−r (H) or r+1 (H′).
#[derive(Debug, Clone)]
pub struct FullBasis {
    pub n: u64,
    pub r: u64,
    pub mode: BasisMode,
    /// All subsets in lexicographic order (size r for H, r+1 for H′).
    pub sets: Vec<Vec<u32>>,
    /// y of every pair, aligned with the contiguous-per-set layout.
    pub ys: Vec<u32>,
}

fn subsets_lex(n: u64, size: u64) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let size = size as usize;
    let mut cur: Vec<u32> = (1..=size as u32).collect();
    if size == 0 || size as u64 > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        // next combination in lex order
        let mut i = size;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < (n - (size - 1 - i) as u64) as u32 {
                cur[i] += 1;
                for j in i + 1..size {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn pair_count(n: u128, set_size: u128, block: u128) -> Option<u128> {
    // C(n, set_size) · block, None on overflow.
    let mut num = 1u128;
    let k = set_size.min(n - set_size);
    for t in 0..k {
        num = num.checked_mul(n - t)?;
        num /= t + 1;
    }
    num.checked_mul(block)
}

impl FullBasis {
    pub fn new(n: u64, r: u64, mode: BasisMode) -> Result<Arc<Self>> {
        Self::with_cap(n, r, mode, DEFAULT_PAIR_CAP)
    }

    pub fn with_cap(n: u64, r: u64, mode: BasisMode, cap: u128) -> Result<Arc<Self>> {
        if r >= n {
            return Err(Error::InvalidParams(format!("r = {r} must be < N = {n}")));
        }
        let (set_size, block) = match mode {
            BasisMode::H => (r, n - r),
            BasisMode::HPrime => (r + 1, r + 1),
        };
        let pairs = pair_count(n as u128, set_size as u128, block as u128)
            .unwrap_or(u128::MAX);
        if pairs > cap {
            return Err(Error::SizeCap { pairs, cap });
        }
        let sets = subsets_lex(n, set_size);
        let mut ys = Vec::with_capacity(pairs as usize);
        for s in &sets {
            match mode {
                BasisMode::H => {
                    let member: Vec<bool> = {
                        let mut b = vec![false; n as usize + 1];
                        for &e in s {
                            b[e as usize] = true;
                        }
                        b
                    };
                    for y in 1..=n as u32 {
                        if !member[y as usize] {
                            ys.push(y);
                        }
                    }
                }
                BasisMode::HPrime => ys.extend(s.iter().copied()),
            }
        }
        Ok(Arc::new(FullBasis { n, r, mode, sets, ys }))
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn block(&self) -> usize {
        match self.mode {
            BasisMode::H => (self.n - self.r) as usize,
            BasisMode::HPrime => (self.r + 1) as usize,
        }
    }

    /// The pair at a basis index.
    pub fn pair(&self, idx: usize) -> (&[u32], u32) {
        let b = self.block();
        (&self.sets[idx / b], self.ys[idx])
    }
}

/// Amplitudes over an explicit basis.
#[derive(Debug, Clone)]
pub struct FullState {
    pub basis: Arc<FullBasis>,
    pub amps: Vec<Complex64>,
}

impl FullState {
    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Uniform superposition over the whole basis.
    pub fn uniform(basis: Arc<FullBasis>) -> FullState {
        let n = basis.len();
        let a = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
        FullState { basis, amps: vec![a; n] }
    }
}

/// The walk machinery for one (N, r): both bases plus the relabeling
/// bijections between them.
pub struct FullWalk {
    pub basis_h: Arc<FullBasis>,
    pub basis_hp: Arc<FullBasis>,
    map_h_to_hp: Vec<u32>,
    map_hp_to_h: Vec<u32>,
}

impl FullWalk {
    pub fn new(n: u64, r: u64) -> Result<Self> {
        Self::with_cap(n, r, DEFAULT_PAIR_CAP)
    }

    pub fn with_cap(n: u64, r: u64, cap: u128) -> Result<Self> {
        let basis_h = FullBasis::with_cap(n, r, BasisMode::H, cap)?;
        let basis_hp = FullBasis::with_cap(n, r, BasisMode::HPrime, cap)?;
        // Transient set-rank lookup for the relabelings.
        let hp_rank: HashMap<&[u32], u32> = basis_hp
            .sets
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_slice(), i as u32))
            .collect();
        let bh = basis_h.block();
        let bhp = basis_hp.block();
        let mut map_h_to_hp = vec![0u32; basis_h.len()];
        let mut map_hp_to_h = vec![0u32; basis_hp.len()];
        let mut grown = Vec::with_capacity(r as usize + 1);
        for (idx, &y) in basis_h.ys.iter().enumerate() {
            let s = &basis_h.sets[idx / bh];
            grown.clear();
            grown.extend(s.iter().copied());
            let pos = grown.partition_point(|&e| e < y);
            grown.insert(pos, y);
            let sp_rank = hp_rank[grown.as_slice()] as usize;
            // In H′ the y offset within the block is its position in S′.
            let target = sp_rank * bhp + pos;
            map_h_to_hp[idx] = target as u32;
            map_hp_to_h[target] = idx as u32;
        }
        Ok(FullWalk { basis_h, basis_hp, map_h_to_hp, map_hp_to_h })
    }

    fn diffusion(amps: &mut [Complex64], block: usize) {
        let scale = 2.0 / block as f64;
        for chunk in amps.chunks_mut(block) {
            let total: Complex64 = chunk.iter().sum();
            for a in chunk.iter_mut() {
                *a = total * scale - *a;
            }
        }
    }

    /// Diffusion over y ∉ S (step 1 of the walk step), H mode.
    pub fn diffusion_h(&self, state: &mut FullState) -> Result<()> {
        if state.basis.mode != BasisMode::H {
            return Err(Error::ModeMismatch);
        }
        Self::diffusion(&mut state.amps, self.basis_h.block());
        Ok(())
    }

    /// Diffusion over y ∈ S (step 4), H′ mode.
    pub fn diffusion_hp(&self, state: &mut FullState) -> Result<()> {
        if state.basis.mode != BasisMode::HPrime {
            return Err(Error::ModeMismatch);
        }
        Self::diffusion(&mut state.amps, self.basis_hp.block());
        Ok(())
    }

    /// Relabel (S, y) → (S ∪ {y}, y), mapping H to H′.
    pub fn add_y(&self, state: &FullState) -> Result<FullState> {
        if state.basis.mode != BasisMode::H {
            return Err(Error::ModeMismatch);
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); self.basis_hp.len()];
        for (i, a) in state.amps.iter().enumerate() {
            amps[self.map_h_to_hp[i] as usize] = *a;
        }
        Ok(FullState { basis: Arc::clone(&self.basis_hp), amps })
    }

    /// Relabel (S, y) → (S ∖ {y}, y), mapping H′ back to H.
    pub fn remove_y(&self, state: &FullState) -> Result<FullState> {
        if state.basis.mode != BasisMode::HPrime {
            return Err(Error::ModeMismatch);
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); self.basis_h.len()];
        for (i, a) in state.amps.iter().enumerate() {
            amps[self.map_hp_to_h[i] as usize] = *a;
        }
        Ok(FullState { basis: Arc::clone(&self.basis_h), amps })
    }

    /// One full walk step. The two query steps act as identity on the
    /// amplitudes but charge 2 queries.
    pub fn walk_step(&self, state: &FullState, ledger: &mut QueryLedger) -> Result<FullState> {
        let mut s = state.clone();
        self.diffusion_h(&mut s)?;
        let mut s = self.add_y(&s)?;
        self.diffusion_hp(&mut s)?;
        let out = self.remove_y(&s)?;
        ledger.charge_walk_steps(1);
        Ok(out)
    }

    /// Marks (per lexicographic set index) the sets containing a k-collision.
    pub fn marked_sets(&self, instance: &Instance, k: u32) -> Result<Vec<bool>> {
        if instance.len() != self.basis_h.n {
            return Err(Error::BadInstance(format!(
                "instance length {} does not match basis N = {}",
                instance.len(),
                self.basis_h.n
            )));
        }
        Ok(self
            .basis_h
            .sets
            .iter()
            .map(|s| {
                let idxs: Vec<u64> = s.iter().map(|&e| e as u64).collect();
                instance.find_collision(k, &idxs).is_some()
            })
            .collect())
    }

    /// Conditional phase flip on every (S, y) whose S is marked.
    pub fn apply_flip(&self, state: &mut FullState, marked: &[bool]) -> Result<()> {
        if state.basis.mode != BasisMode::H {
            return Err(Error::ModeMismatch);
        }
        let block = self.basis_h.block();
        for (s_idx, &is_marked) in marked.iter().enumerate() {
            if is_marked {
                for a in &mut state.amps[s_idx * block..(s_idx + 1) * block] {
                    *a = -*a;
                }
            }
        }
        Ok(())
    }
}

/// Measurement distribution over the sets S.
#[derive(Debug, Clone)]
pub struct SDistribution {
    /// P(S) per lexicographic set index.
    pub probs: Vec<f64>,
    /// Whether each S contains a k-collision.
    pub marked: Vec<bool>,
}

impl SDistribution {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Probability mass on sets containing a k-collision.
    pub fn good_mass(&self) -> f64 {
        self.probs
            .iter()
            .zip(&self.marked)
            .filter(|(_, &m)| m)
            .map(|(p, _)| p)
            .sum()
    }
}

/// Runs the full algorithm: setup, then t1 outer iterations of
/// (flip, t2 walk steps), then measurement of S.
pub fn run_full(
    instance: &Instance,
    r: u64,
    k: u32,
    t1: u64,
    t2: u64,
) -> Result<(SDistribution, QueryLedger)> {
    run_full_with_cap(instance, r, k, t1, t2, DEFAULT_PAIR_CAP)
}

pub fn run_full_with_cap(
    instance: &Instance,
    r: u64,
    k: u32,
    t1: u64,
    t2: u64,
    cap: u128,
) -> Result<(SDistribution, QueryLedger)> {
    let walk = FullWalk::with_cap(instance.len(), r, cap)?;
    let marked = walk.marked_sets(instance, k)?;
    let mut ledger = QueryLedger::new();
    ledger.charge_setup(r);
    let mut state = FullState::uniform(Arc::clone(&walk.basis_h));
    for _ in 0..t1 {
        walk.apply_flip(&mut state, &marked)?;
        for _ in 0..t2 {
            state = walk.walk_step(&state, &mut ledger)?;
        }
    }
    let block = walk.basis_h.block();
    let probs: Vec<f64> = state
        .amps
        .chunks(block)
        .map(|c| c.iter().map(|a| a.norm_sqr()).sum())
        .collect();
    Ok((SDistribution { probs, marked }, ledger))
}

/// Type (j, l) of a basis pair for a given collision set.
fn pair_type(s: &[u32], y: u32, collision: &[u64]) -> (u32, u32) {
    let j = s.iter().filter(|&&e| collision.contains(&(e as u64))).count() as u32;
    let l = collision.contains(&(y as u64)) as u32;
    (j, l)
}

/// Projects a full H-mode state onto the 2k+1 symmetric basis vectors.
///
/// Returns the coefficients ⟨ψ_{j,l}|state⟩ in canonical order and the norm
/// of the component orthogonal to all of them.
pub fn project_to_subspace(
    state: &FullState,
    collision: &[u64],
) -> Result<(Vec<Complex64>, f64)> {
    if state.basis.mode != BasisMode::H {
        return Err(Error::ModeMismatch);
    }
    let k = collision.len() as u32;
    let dim = 2 * k as usize + 1;
    let mut sums = vec![Complex64::new(0.0, 0.0); dim];
    let mut counts = vec![0u64; dim];
    let block = state.basis.block();
    for (idx, amp) in state.amps.iter().enumerate() {
        let s = &state.basis.sets[idx / block];
        let (j, l) = pair_type(s, state.basis.ys[idx], collision);
        let t = SubspaceState::type_index(j, l, k);
        sums[t] += amp;
        counts[t] += 1;
    }
    let mut coeffs = vec![Complex64::new(0.0, 0.0); dim];
    for t in 0..dim {
        if counts[t] > 0 {
            coeffs[t] = sums[t] / (counts[t] as f64).sqrt();
        }
    }
    // Second pass: norm of the component orthogonal to the ψ_{j,l}, summed
    // directly to avoid the cancellation of ‖state‖² − ‖projection‖².
    let mut residual_sq = 0.0f64;
    for (idx, amp) in state.amps.iter().enumerate() {
        let s = &state.basis.sets[idx / block];
        let (j, l) = pair_type(s, state.basis.ys[idx], collision);
        let t = SubspaceState::type_index(j, l, k);
        let inside = coeffs[t] / (counts[t] as f64).sqrt();
        residual_sq += (amp - inside).norm_sqr();
    }
    Ok((coeffs, residual_sq.sqrt()))
}

/// Embeds a symmetric-basis state into the full H basis.
pub fn embed_subspace_state(
    basis: &Arc<FullBasis>,
    collision: &[u64],
    sub: &SubspaceState,
) -> Result<FullState> {
    if basis.mode != BasisMode::H {
        return Err(Error::ModeMismatch);
    }
    let k = collision.len() as u32;
    if sub.dim() != 2 * k as usize + 1 {
        return Err(Error::DimensionMismatch { expected: 2 * k as usize + 1, got: sub.dim() });
    }
    let block = basis.block();
    let mut counts = vec![0u64; sub.dim()];
    let mut types = Vec::with_capacity(basis.len());
    for idx in 0..basis.len() {
        let s = &basis.sets[idx / block];
        let (j, l) = pair_type(s, basis.ys[idx], collision);
        let t = SubspaceState::type_index(j, l, k);
        counts[t] += 1;
        types.push(t);
    }
    let amps: Vec<Complex64> = types
        .into_iter()
        .map(|t| sub.amps[t] / (counts[t] as f64).sqrt())
        .collect();
    Ok(FullState { basis: Arc::clone(basis), amps })
}

/// Uniform random H-mode state (for negative tests).
pub fn random_state(basis: &Arc<FullBasis>, rng: &mut ChaCha20Rng) -> FullState {
    let mut amps: Vec<Complex64> = (0..basis.len())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    FullState { basis: Arc::clone(basis), amps }
}
