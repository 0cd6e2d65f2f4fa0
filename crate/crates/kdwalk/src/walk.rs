//! Exact engine for the single-solution walk in its collapsed invariant
//! subspace.
//!
//! Under the promise that the instance has exactly one k-collision, every
//! state the algorithm reaches is a combination of the 2k+1 uniform
//! superpositions ψ_{j,l} over basis pairs (S, y) of type (j, l), where
//! j = |S ∩ K| for the collision set K and l marks whether y ∈ K. One walk
//! step collapses to a (2k+1)×(2k+1) real orthogonal matrix, so the whole
//! algorithm runs exactly at any N.
//!
//! Basis order used throughout: (0,0), (0,1), (1,0), (1,1), …, (k−1,0),
//! (k−1,1), (k,0).

use crate::ledger::QueryLedger;
use crate::linalg::{self, real_to_complex};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Scalar parameters of one walk instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkParams {
    /// Instance length N.
    pub n: u64,
    /// Alphabet size M.
    pub m: u64,
    /// Subset size r (memory).
    pub r: u64,
    /// Collision arity k.
    pub k: u32,
    /// Outer iterations (phase flip + t2 walk steps each).
    pub t1: u64,
    /// Walk steps per outer iteration.
    pub t2: u64,
}

impl WalkParams {
    /// Validates and builds parameters with an explicit schedule.
    pub fn new(n: u64, m: u64, r: u64, k: u32, t1: u64, t2: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParams(format!("k = {k}, need k >= 2")));
        }
        if (k as u64) > r {
            return Err(Error::InvalidParams(format!("k = {k} exceeds r = {r}")));
        }
        if r >= n {
            return Err(Error::InvalidParams(format!("r = {r} must be < N = {n}")));
        }
        if n - r < k as u64 {
            return Err(Error::InvalidParams(format!(
                "N - r = {} leaves no room for the collision set (k = {k})",
                n - r
            )));
        }
        if m < 1 {
            return Err(Error::InvalidParams("M must be >= 1".into()));
        }
        if t2 < 1 {
            return Err(Error::InvalidParams("t2 must be >= 1".into()));
        }
        Ok(WalkParams { n, m, r, k, t1, t2 })
    }

    /// t2 = ⌈(π / 3√k) · √r⌉.
    pub fn default_t2(r: u64, k: u32) -> u64 {
        ((PI / (3.0 * (k as f64).sqrt())) * (r as f64).sqrt()).ceil() as u64
    }

    /// Default schedule: the t2 formula above and t1 = ⌊π/(2β)⌋ from the
    /// exact eigenphase β of one outer iteration.
    pub fn with_default_schedule(n: u64, m: u64, r: u64, k: u32) -> Result<Self> {
        let t2 = Self::default_t2(r, k);
        let mut p = WalkParams::new(n, m, r, k, 0, t2)?;
        p.t1 = spectral_t1(&p)?;
        Ok(p)
    }

    /// Schedule tuned on the exact spectrum: scans t2 in a small window
    /// around the default formula and keeps the (t2, t1) pair with the best
    /// exact success probability. At large r this reproduces the default; at
    /// small r, where the √r asymptotics are coarse, it buys a visibly better
    /// constant.
    pub fn tuned(n: u64, m: u64, r: u64, k: u32) -> Result<Self> {
        let h = Self::default_t2(r, k);
        let lo = h.saturating_sub(2).max(1);
        let mut best: Option<(f64, WalkParams)> = None;
        for t2 in lo..=h + 2 {
            let mut p = WalkParams::new(n, m, r, k, 0, t2)?;
            p.t1 = spectral_t1(&p)?;
            let prob = run_single_solution(&p)?.success_prob;
            if best.as_ref().is_none_or(|(b, _)| prob > *b) {
                best = Some((prob, p));
            }
        }
        Ok(best.unwrap().1)
    }

    /// Subspace dimension 2k+1.
    pub fn dim(&self) -> usize {
        2 * self.k as usize + 1
    }

    /// Overlap α = ⟨ψ_good|ψ_start⟩ = √(C(N−k, r−k)/C(N, r)).
    pub fn alpha(&self) -> f64 {
        self.alpha_prime().sqrt()
    }

    /// α′ = Pr[K ⊆ S] for a uniform r-subset S.
    pub fn alpha_prime(&self) -> f64 {
        let (n, r, k) = (self.n as f64, self.r as f64, self.k as u64);
        (0..k).map(|t| (r - t as f64) / (n - t as f64)).product()
    }
}

/// Which symmetric basis a block matrix is expressed in: H̃ (|S| = r, y ∉ S)
/// or H̃′ (|S| = r+1, y ∈ S).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisTag {
    Symmetric,
    SymmetricPrime,
}

/// A real orthogonal matrix between the collapsed bases.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockUnitary {
    pub entries: DMatrix<f64>,
    /// Basis of the rows (output side).
    pub rows: BasisTag,
    /// Basis of the columns (input side).
    pub cols: BasisTag,
}

impl BlockUnitary {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Max-norm defect of `UᵀU − I`.
    pub fn orthogonality_defect(&self) -> f64 {
        let p = self.entries.transpose() * &self.entries;
        let n = p.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let t = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p[(i, j)] - t).abs());
            }
        }
        worst
    }
}

/// Amplitudes over the 2k+1 symmetric basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceState {
    pub amps: Vec<Complex64>,
}

impl SubspaceState {
    pub fn new(amps: Vec<Complex64>) -> Self {
        SubspaceState { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Position of type (j, l) in the canonical order.
    pub fn type_index(j: u32, l: u32, k: u32) -> usize {
        debug_assert!(j <= k && l <= 1 && (j < k || l == 0));
        if j == k {
            2 * k as usize
        } else {
            2 * j as usize + l as usize
        }
    }

    pub fn as_vector(&self) -> DVector<Complex64> {
        DVector::from_vec(self.amps.clone())
    }
}

/// The 2×2 reflection [[−1+2ε, 2√(ε−ε²)], [2√(ε−ε²), 1−2ε]] induced by one
/// diffusion step on a pair of symmetric states.
pub fn reflection_block(eps: f64) -> DMatrix<f64> {
    debug_assert!((0.0..=1.0).contains(&eps));
    let off = 2.0 * (eps - eps * eps).max(0.0).sqrt();
    DMatrix::from_row_slice(2, 2, &[-1.0 + 2.0 * eps, off, off, 1.0 - 2.0 * eps])
}

fn block_diag(blocks: &[DMatrix<f64>], leading_identity: bool, dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    let mut at = 0usize;
    if leading_identity {
        m[(0, 0)] = 1.0;
        at = 1;
    }
    for b in blocks {
        let s = b.nrows();
        for i in 0..s {
            for j in 0..s {
                m[(at + i, at + j)] = b[(i, j)];
            }
        }
        at += s;
    }
    if at < dim {
        // trailing 1×1 identity
        m[(dim - 1, dim - 1)] = 1.0;
    }
    m
}

/// First half of a walk step (diffusion over y ∉ S, then S ← S ∪ {y});
/// maps H̃ to H̃′.
///
/// Block j mixes (ψ_{j,0}, ψ_{j,1}) into (φ_{j,0}, φ_{j+1,1}); with
/// s₀ = N−r−(k−j) candidates outside the collision set, the block is the
/// reflection at ε = s₀/(N−r). ψ_{k,0} passes through to φ_{k,0}.
pub fn u1_matrix(params: &WalkParams) -> BlockUnitary {
    let (n, r, k) = (params.n as f64, params.r as f64, params.k);
    let blocks: Vec<DMatrix<f64>> = (0..k)
        .map(|j| {
            let s0 = n - r - (k - j) as f64;
            reflection_block(s0 / (n - r))
        })
        .collect();
    BlockUnitary {
        entries: block_diag(&blocks, false, params.dim()),
        rows: BasisTag::SymmetricPrime,
        cols: BasisTag::Symmetric,
    }
}

/// Second half of a walk step (diffusion over y ∈ S, then S ← S ∖ {y});
/// maps H̃′ back to H̃.
///
/// φ_{0,0} passes through to ψ_{0,0}; block j mixes (φ_{j,1}, φ_{j,0}) into
/// (ψ_{j−1,1}, ψ_{j,0}) as the reflection at ε = j/(r+1).
pub fn u2_matrix(params: &WalkParams) -> BlockUnitary {
    let (r, k) = (params.r as f64, params.k);
    let blocks: Vec<DMatrix<f64>> = (1..=k).map(|j| reflection_block(j as f64 / (r + 1.0))).collect();
    BlockUnitary {
        entries: block_diag(&blocks, true, params.dim()),
        rows: BasisTag::Symmetric,
        cols: BasisTag::SymmetricPrime,
    }
}

/// One full walk step U = U₂·U₁ on the H̃ basis.
pub fn build_step_unitary(params: &WalkParams) -> Result<BlockUnitary> {
    WalkParams::new(params.n, params.m, params.r, params.k, params.t1, params.t2)?;
    let u1 = u1_matrix(params);
    let u2 = u2_matrix(params);
    Ok(BlockUnitary {
        entries: u2.entries * u1.entries,
        rows: BasisTag::Symmetric,
        cols: BasisTag::Symmetric,
    })
}

/// Uniform superposition over all (S, y), expressed in the symmetric basis.
///
/// The squared amplitude on type (j, l) is the fraction of basis pairs of
/// that type: hypergeometric weight of |S ∩ K| = j times the fraction of
/// admissible y.
pub fn start_state(params: &WalkParams) -> Result<SubspaceState> {
    WalkParams::new(params.n, params.m, params.r, params.k, params.t1, params.t2)?;
    let (n, r, k) = (params.n as f64, params.r as f64, params.k);
    let mut amps = vec![Complex64::new(0.0, 0.0); params.dim()];
    for j in 0..=k {
        // Pr[|S ∩ K| = j] = C(k,j) · (r)_j · (N−r)_{k−j} / (N)_k
        let mut hyp = binomial_small(k, j) as f64;
        for t in 0..j {
            hyp *= r - t as f64;
        }
        for t in 0..(k - j) {
            hyp *= n - r - t as f64;
        }
        for t in 0..k {
            hyp /= n - t as f64;
        }
        let outside = n - r;
        if j == k {
            amps[SubspaceState::type_index(k, 0, k)] = Complex64::new(hyp.sqrt(), 0.0);
        } else {
            let frac0 = (outside - (k - j) as f64) / outside;
            let frac1 = (k - j) as f64 / outside;
            amps[SubspaceState::type_index(j, 0, k)] = Complex64::new((hyp * frac0).sqrt(), 0.0);
            amps[SubspaceState::type_index(j, 1, k)] = Complex64::new((hyp * frac1).sqrt(), 0.0);
        }
    }
    Ok(SubspaceState::new(amps))
}

fn binomial_small(n: u32, k: u32) -> u64 {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    let mut acc = 1u64;
    for t in 0..k as u64 {
        acc = acc * (n as u64 - t) / (t + 1);
    }
    acc
}

/// The conditional phase flip: negates the amplitude on type (k, 0).
pub fn phase_flip(state: &SubspaceState) -> SubspaceState {
    let mut amps = state.amps.clone();
    let last = amps.len() - 1;
    amps[last] = -amps[last];
    SubspaceState::new(amps)
}

fn matrix_power(m: &DMatrix<f64>, mut e: u64) -> DMatrix<f64> {
    let mut result = DMatrix::identity(m.nrows(), m.ncols());
    let mut base = m.clone();
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    result
}

/// Outcome of running the single-solution walk.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_state: SubspaceState,
    /// |amplitude on (k,0)|²: probability that measuring yields S ⊇ K.
    pub success_prob: f64,
    pub ledger: QueryLedger,
}

/// Applies (U^t2 · Flip)^t1 to the start state.
///
/// The ledger charges r setup queries and 2 queries per walk step,
/// r + 2·t1·t2 in total.
pub fn run_single_solution(params: &WalkParams) -> Result<RunOutcome> {
    let u = build_step_unitary(params)?;
    let m = matrix_power(&u.entries, params.t2);
    let mut amps: Vec<f64> = start_state(params)?.amps.iter().map(|a| a.re).collect();
    let dim = amps.len();
    let mut scratch = vec![0.0f64; dim];
    for _ in 0..params.t1 {
        amps[dim - 1] = -amps[dim - 1];
        for i in 0..dim {
            let mut acc = 0.0;
            for j in 0..dim {
                acc += m[(i, j)] * amps[j];
            }
            scratch[i] = acc;
        }
        std::mem::swap(&mut amps, &mut scratch);
    }
    let success_prob = amps[dim - 1] * amps[dim - 1];
    let mut ledger = QueryLedger::new();
    ledger.charge_setup(params.r);
    ledger.charge_walk_steps(params.t1 * params.t2);
    Ok(RunOutcome {
        final_state: SubspaceState::new(amps.into_iter().map(|a| Complex64::new(a, 0.0)).collect()),
        success_prob,
        ledger,
    })
}

/// Success probability at every t1 from 0 to t1_max (one pass).
pub fn success_curve(params: &WalkParams, t1_max: u64) -> Result<Vec<(u64, f64)>> {
    let u = build_step_unitary(params)?;
    let m = matrix_power(&u.entries, params.t2);
    let mut amps: Vec<f64> = start_state(params)?.amps.iter().map(|a| a.re).collect();
    let dim = amps.len();
    let mut out = Vec::with_capacity(t1_max as usize + 1);
    out.push((0, amps[dim - 1] * amps[dim - 1]));
    let mut scratch = vec![0.0f64; dim];
    for t1 in 1..=t1_max {
        amps[dim - 1] = -amps[dim - 1];
        for i in 0..dim {
            let mut acc = 0.0;
            for j in 0..dim {
                acc += m[(i, j)] * amps[j];
            }
            scratch[i] = acc;
        }
        std::mem::swap(&mut amps, &mut scratch);
        out.push((t1, amps[dim - 1] * amps[dim - 1]));
    }
    Ok(out)
}

/// Smallest positive eigenphase β of one outer iteration U^t2·Flip.
pub fn principal_eigenphase(params: &WalkParams) -> Result<f64> {
    let u = build_step_unitary(params)?;
    let mut m = matrix_power(&u.entries, params.t2);
    let dim = m.nrows();
    for i in 0..dim {
        m[(i, dim - 1)] = -m[(i, dim - 1)];
    }
    let (vals, _) = linalg::unitary_eigen(&real_to_complex(&m), 1e-8)?;
    vals.iter()
        .map(|v| v.arg())
        .filter(|p| *p > 1e-12)
        .min_by(|a, b| a.partial_cmp(b).unwrap())
        .ok_or_else(|| Error::InvalidParams("iteration matrix has no positive eigenphase".into()))
}

/// t1 = ⌊π/(2β)⌋ from the exact spectrum of one outer iteration.
pub fn spectral_t1(params: &WalkParams) -> Result<u64> {
    let beta = principal_eigenphase(params)?;
    Ok(((PI / (2.0 * beta)).floor() as u64).max(1))
}
