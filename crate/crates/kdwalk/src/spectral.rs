//! Eigen-analysis of the walk: the phase law θ_j ≈ 2√j/√r, the
//! Hoffman-Wielandt eigenvalue-perturbation bound, and the generalized
//! Grover analysis that produces the principal eigenphase β and the
//! iteration count t = ⌊π/(2β)⌋.

use crate::linalg::{self, real_to_complex, CMatrix, CVector};
use crate::walk::{self, BlockUnitary, WalkParams};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Full spectral decomposition of a unitary, deterministically ordered:
/// ascending phase in (−π, π], ties by the sign-normalized eigenvectors.
#[derive(Debug, Clone)]
pub struct PhaseSpectrum {
    pub phases: Vec<f64>,
    /// Orthonormal eigenvectors, column i matching the i-th phase.
    pub vectors: CMatrix,
}

impl PhaseSpectrum {
    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    /// Σ e^{iθ_i} v_i v_i†.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            let lambda = Complex64::from_polar(1.0, self.phases[i]);
            let v = self.vectors.column(i);
            for a in 0..n {
                for b in 0..n {
                    m[(a, b)] += lambda * v[a] * v[b].conj();
                }
            }
        }
        m
    }

    pub fn reconstruction_defect(&self, original: &CMatrix) -> f64 {
        (self.reconstruct() - original).norm()
    }

    /// Positive phases in ascending order.
    pub fn positive_phases(&self) -> Vec<f64> {
        self.phases.iter().copied().filter(|p| *p > 1e-12).collect()
    }
}

fn normalize_vector_phase(v: &mut CVector) {
    if let Some(lead) = v.iter().find(|z| z.norm() > 1e-10).copied() {
        let phase = lead / lead.norm();
        for z in v.iter_mut() {
            *z /= phase;
        }
    }
}

/// Spectral decomposition of a complex unitary matrix.
pub fn eigenphases_matrix(u: &CMatrix) -> Result<PhaseSpectrum> {
    let (vals, vecs) = linalg::unitary_eigen(u, 1e-9)?;
    let n = vals.len();
    let mut cols: Vec<(f64, CVector)> = (0..n)
        .map(|i| {
            let mut v = vecs.column(i).into_owned();
            normalize_vector_phase(&mut v);
            (vals[i].arg(), v)
        })
        .collect();
    cols.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).unwrap().then_with(|| {
            for (x, y) in a.1.iter().zip(b.1.iter()) {
                let ord = x
                    .re
                    .partial_cmp(&y.re)
                    .unwrap()
                    .then(x.im.partial_cmp(&y.im).unwrap());
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    let phases = cols.iter().map(|(p, _)| *p).collect();
    let vectors = CMatrix::from_columns(&cols.into_iter().map(|(_, v)| v).collect::<Vec<_>>());
    Ok(PhaseSpectrum { phases, vectors })
}

/// Spectral decomposition of a collapsed walk matrix.
pub fn eigenphases(u: &BlockUnitary) -> Result<PhaseSpectrum> {
    eigenphases_matrix(&real_to_complex(&u.entries))
}

/// One row of the eigenphase-law table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThetaRow {
    pub j: u32,
    pub theta: f64,
    /// The law value 2√j/√r.
    pub law: f64,
    /// |θ_j·√r/(2√j) − 1|.
    pub rel_err: f64,
    /// |θ_j − 2√j/√r|.
    pub abs_err: f64,
}

/// Positive eigenphases of one walk step, matched to j = 1..k in ascending
/// order, against the law θ_j = (2√j + o(1))/√r.
pub fn theta_table(params: &WalkParams) -> Result<Vec<ThetaRow>> {
    let u = walk::build_step_unitary(params)?;
    let spec = eigenphases(&u)?;
    let pos = spec.positive_phases();
    if pos.len() != params.k as usize {
        return Err(Error::InvalidParams(format!(
            "expected {} positive phases, found {}",
            params.k,
            pos.len()
        )));
    }
    let r = params.r as f64;
    Ok(pos
        .into_iter()
        .enumerate()
        .map(|(i, theta)| {
            let j = i as u32 + 1;
            let law = 2.0 * (j as f64).sqrt() / r.sqrt();
            ThetaRow {
                j,
                theta,
                law,
                rel_err: (theta / law - 1.0).abs(),
                abs_err: (theta - law).abs(),
            }
        })
        .collect())
}

/// Result of one Hoffman-Wielandt trial.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HwReport {
    pub holds: bool,
    /// bound − max paired distance.
    pub margin: f64,
    /// Σ|δ_i| with the eigenvalues of A written as 1 + δ_i.
    pub bound: f64,
    pub max_paired_distance: f64,
}

/// Minimum-cost perfect matching (sum of squared distances) over ≤ 20 points,
/// by subset dynamic programming.
fn min_cost_matching(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    assert!(n <= 20, "matching dimension too large");
    let full = 1usize << n;
    let mut dp = vec![f64::INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    dp[0] = 0.0;
    for mask in 0..full - 1 {
        if dp[mask].is_infinite() {
            continue;
        }
        let i = (mask as u32).count_ones() as usize; // next row to assign
        for j in 0..n {
            if mask & (1 << j) == 0 {
                let next = mask | (1 << j);
                let c = dp[mask] + cost[i][j];
                if c < dp[next] {
                    dp[next] = c;
                    choice[next] = j;
                }
            }
        }
    }
    let mut assign = vec![0usize; n];
    let mut mask = full - 1;
    for i in (0..n).rev() {
        let j = choice[mask];
        assign[i] = j;
        mask &= !(1 << j);
    }
    assign
}

/// Checks |μ_j − μ′_j| ≤ Σ|δ_i| for eigenvalues μ of B, μ′ of AB and
/// A's eigenvalues 1 + δ_i, under the optimal pairing of μ to μ′.
pub fn hoffman_wielandt_check(a: &CMatrix, b: &CMatrix) -> Result<HwReport> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.nrows() });
    }
    let (ev_a, _) = linalg::unitary_eigen(a, 1e-9)?;
    let (mu, _) = linalg::unitary_eigen(b, 1e-9)?;
    let (mu_p, _) = linalg::unitary_eigen(&(a * b), 1e-9)?;
    let bound: f64 = ev_a.iter().map(|l| (l - Complex64::new(1.0, 0.0)).norm()).sum();
    let n = mu.len();
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (mu[i] - mu_p[j]).norm_sqr()).collect())
        .collect();
    let assign = min_cost_matching(&cost);
    let max_paired_distance = (0..n)
        .map(|i| (mu[i] - mu_p[assign[i]]).norm())
        .fold(0.0f64, f64::max);
    let margin = bound - max_paired_distance;
    Ok(HwReport { holds: margin >= -1e-9, margin, bound, max_paired_distance })
}

/// One conjugate eigenphase pair of U₂ together with its (equalized, real
/// nonnegative) coefficient in the ψ_good decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub theta: f64,
    pub a: f64,
}

/// Input to the generalized Grover analysis: the overlap α, the nontrivial
/// modes of U₂, and the spectral-gap bound ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GengroverInput {
    pub alpha: f64,
    pub modes: Vec<Mode>,
    pub epsilon: f64,
}

impl GengroverInput {
    pub fn new(alpha: f64, modes: Vec<Mode>, epsilon: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParams(format!("alpha = {alpha} outside (0, 1)")));
        }
        if modes.is_empty() {
            return Err(Error::InvalidParams("need at least one mode".into()));
        }
        if !(epsilon > 0.0 && epsilon < PI) {
            return Err(Error::InvalidParams(format!("epsilon = {epsilon} outside (0, π)")));
        }
        for m in &modes {
            if m.a < 0.0 {
                return Err(Error::InvalidParams("mode coefficients must be nonnegative".into()));
            }
            if m.theta < epsilon - 1e-12 || m.theta > 2.0 * PI - epsilon + 1e-12 {
                return Err(Error::InvalidParams(format!(
                    "theta = {} outside [ε, 2π−ε] with ε = {epsilon}",
                    m.theta
                )));
            }
            if (m.theta - PI).abs() < 1e-9 {
                return Err(Error::InvalidParams("eigenvalue −1 (θ = π) is rejected".into()));
            }
        }
        let norm = alpha * alpha + 2.0 * modes.iter().map(|m| m.a * m.a).sum::<f64>();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "normalization α² + 2Σa² = {norm} differs from 1"
            )));
        }
        Ok(GengroverInput { alpha, modes, epsilon })
    }

    /// Extracts the decomposition from a walk instance: U₂ = U^t2 with
    /// ψ_start as its fixed vector and ψ_good = ψ_{k,0}.
    pub fn from_walk(params: &WalkParams) -> Result<Self> {
        let u = walk::build_step_unitary(params)?;
        let m = matrix_power_c(&real_to_complex(&u.entries), params.t2);
        let spec = eigenphases_matrix(&m)?;
        let start = walk::start_state(params)?;
        let dim = spec.dim();
        let good_idx = dim - 1;

        let mut unit_count = 0usize;
        let mut modes = Vec::new();
        for i in 0..dim {
            let p = spec.phases[i];
            if p.abs() < 1e-9 {
                unit_count += 1;
                let v = spec.vectors.column(i);
                let ov: Complex64 =
                    v.iter().zip(&start.amps).map(|(a, b)| a.conj() * b).sum();
                if ov.norm() < 1.0 - 1e-6 {
                    return Err(Error::InvalidParams(
                        "unit eigenvector of U^t2 is not the start state".into(),
                    ));
                }
            } else if (p.abs() - PI).abs() < 1e-9 {
                return Err(Error::InvalidParams(
                    "U^t2 has eigenvalue −1; outside the lemma regime".into(),
                ));
            } else if p > 0.0 {
                let v = spec.vectors.column(i);
                modes.push(Mode { theta: p, a: v[good_idx].norm() });
            }
        }
        if unit_count != 1 {
            return Err(Error::InvalidParams(format!(
                "U^t2 has {unit_count} unit eigenvalues, expected exactly 1"
            )));
        }
        let epsilon = modes
            .iter()
            .map(|m| m.theta.min(2.0 * PI - m.theta))
            .fold(f64::INFINITY, f64::min);
        let alpha = start.amps[good_idx].re;
        GengroverInput::new(alpha, modes, epsilon)
    }
}

fn matrix_power_c(m: &CMatrix, mut e: u64) -> CMatrix {
    let mut result = CMatrix::identity(m.nrows(), m.ncols());
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

/// Output of the generalized Grover analysis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GengroverReport {
    /// Principal eigenphase of U₂U₁: the root of f.
    pub beta: f64,
    /// ⌊π/(2β)⌋.
    pub t: u64,
    /// Lower-bound surrogate (1−α²)/√(1+cot²(ε/2)) for |⟨ψ_good|ψ_end⟩| —
    /// a bound, not an equality.
    pub predicted_overlap: f64,
    /// |⟨ψ_good|(U₂U₁)^t|ψ_start⟩| on the constructed model system.
    pub measured_overlap: Option<f64>,
}

fn cot(x: f64) -> f64 {
    1.0 / x.tan()
}

/// f(β) = α²·cot(β/2) + Σ a_j²·(cot((−θ_j+β)/2) + cot((θ_j+β)/2)); its root
/// is the eigenphase β of U₂U₁.
pub fn gengrover_f(input: &GengroverInput, beta: f64) -> f64 {
    let mut v = input.alpha * input.alpha * cot(beta / 2.0);
    for m in &input.modes {
        v += m.a * m.a * (cot((beta - m.theta) / 2.0) + cot((beta + m.theta) / 2.0));
    }
    v
}

/// Root-finds β by bisection on the bracket
/// [ε·α/√(2π(1−α²)), √(2π)·α/√(1−α²)] and derives t = ⌊π/(2β)⌋.
pub fn gengrover_analysis(input: &GengroverInput) -> Result<GengroverReport> {
    if input.alpha >= 0.1 {
        return Err(Error::OutOfRegime { alpha: input.alpha });
    }
    let a2 = input.alpha * input.alpha;
    let mut lo = input.epsilon * input.alpha / (2.0 * PI * (1.0 - a2)).sqrt();
    let mut hi = (2.0 * PI).sqrt() * input.alpha / (1.0 - a2).sqrt();
    let flo = gengrover_f(input, lo);
    let fhi = gengrover_f(input, hi);
    if !(flo >= 0.0 && fhi <= 0.0) {
        return Err(Error::NoSignChange { lo, hi });
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if gengrover_f(input, mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    let t = (PI / (2.0 * beta)).floor() as u64;
    let half_eps_cot = cot(input.epsilon / 2.0);
    let predicted_overlap = (1.0 - a2) / (1.0 + half_eps_cot * half_eps_cot).sqrt();
    Ok(GengroverReport { beta, t, predicted_overlap, measured_overlap: None })
}

/// Model system realizing a [`GengroverInput`]: U₂ is block-diagonal with a
/// fixed first coordinate and 2×2 rotation blocks at the mode phases; ψ_good
/// is the stated real combination and U₁ reflects about it.
pub fn model_system(input: &GengroverInput) -> (CMatrix, CMatrix, CVector, CVector) {
    let l = input.modes.len();
    let dim = 2 * l + 1;
    let mut u2 = CMatrix::zeros(dim, dim);
    u2[(0, 0)] = Complex64::new(1.0, 0.0);
    for (j, m) in input.modes.iter().enumerate() {
        let (c, s) = (m.theta.cos(), m.theta.sin());
        let at = 1 + 2 * j;
        u2[(at, at)] = Complex64::new(c, 0.0);
        u2[(at, at + 1)] = Complex64::new(-s, 0.0);
        u2[(at + 1, at)] = Complex64::new(s, 0.0);
        u2[(at + 1, at + 1)] = Complex64::new(c, 0.0);
    }
    let mut start = CVector::zeros(dim);
    start[0] = Complex64::new(1.0, 0.0);
    let mut good = CVector::zeros(dim);
    good[0] = Complex64::new(input.alpha, 0.0);
    for (j, m) in input.modes.iter().enumerate() {
        good[1 + 2 * j] = Complex64::new(m.a * 2.0f64.sqrt(), 0.0);
    }
    let mut u1 = CMatrix::identity(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            u1[(i, j)] -= 2.0 * good[i] * good[j].conj();
        }
    }
    (u1, u2, start, good)
}

/// |⟨ψ_good|(U₂U₁)^t|ψ_start⟩| by direct iteration.
pub fn overlap_at_t(
    u1: &CMatrix,
    u2: &CMatrix,
    start: &CVector,
    good: &CVector,
    t: u64,
) -> Result<f64> {
    let n = u1.nrows();
    if u2.nrows() != n || start.len() != n || good.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u2.nrows() });
    }
    for m in [u1, u2] {
        let defect = linalg::unitarity_defect(m);
        if defect > 1e-9 {
            return Err(Error::NotUnitary { defect });
        }
    }
    let mut v = start.clone();
    for _ in 0..t {
        v = u2 * (u1 * v);
    }
    Ok(good.dotc(&v).norm())
}

/// Measures |⟨ψ_good|(U₂U₁)^t|ψ_start⟩| on the constructed model system.
pub fn model_overlap(input: &GengroverInput, t: u64) -> Result<f64> {
    let (u1, u2, start, good) = model_system(input);
    overlap_at_t(&u1, &u2, &start, &good, t)
}

/// Analysis plus the model-system measurement at the derived t.
pub fn gengrover_analysis_measured(input: &GengroverInput) -> Result<GengroverReport> {
    let mut report = gengrover_analysis(input)?;
    report.measured_overlap = Some(model_overlap(input, report.t)?);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

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

    /// Unitary with every eigenvalue within distance `delta` of 1.
    fn random_near_identity(n: usize, delta: f64, rng: &mut ChaCha20Rng) -> CMatrix {
        let q = random_unitary(n, rng);
        let mut d = CMatrix::zeros(n, n);
        for i in 0..n {
            // |e^{iφ} − 1| = 2|sin(φ/2)| ≤ |φ|
            let phi = rng.gen_range(-delta..delta);
            d[(i, i)] = Complex64::from_polar(1.0, phi);
        }
        &q * d * q.adjoint()
    }

    #[test]
    fn identity_has_zero_phases() {
        let spec = eigenphases_matrix(&CMatrix::identity(4, 4)).unwrap();
        for p in &spec.phases {
            assert_abs_diff_eq!(*p, 0.0, epsilon = 1e-12);
        }
        assert!(spec.reconstruction_defect(&CMatrix::identity(4, 4)) < 1e-10);
    }

    #[test]
    fn half_block_has_phases_zero_and_pi() {
        let u = real_to_complex(&walk::reflection_block(0.5));
        let spec = eigenphases_matrix(&u).unwrap();
        assert_abs_diff_eq!(spec.phases[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.phases[1], PI, epsilon = 1e-12);
    }

    #[test]
    fn walk_spectrum_has_one_fixed_vector_and_conjugate_pairs() {
        let p = WalkParams::new(100, 100, 10, 2, 0, 1).unwrap();
        let u = walk::build_step_unitary(&p).unwrap();
        let spec = eigenphases(&u).unwrap();
        let zero: Vec<usize> =
            (0..spec.dim()).filter(|&i| spec.phases[i].abs() < 1e-9).collect();
        assert_eq!(zero.len(), 1);
        let start = walk::start_state(&p).unwrap();
        let v = spec.vectors.column(zero[0]);
        let ov: Complex64 = v.iter().zip(&start.amps).map(|(a, b)| a.conj() * b).sum();
        assert!(ov.norm() > 1.0 - 1e-9);
        let mut pos = spec.positive_phases();
        let mut neg: Vec<f64> =
            spec.phases.iter().filter(|&&p| p < -1e-12).map(|p| -p).collect();
        pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
        neg.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pos.len(), 2);
        assert_eq!(neg.len(), 2);
        for (a, b) in pos.iter().zip(&neg) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        assert!(spec.reconstruction_defect(&real_to_complex(&u.entries)) < 1e-8);
    }

    #[test]
    fn theta_law_within_ten_percent() {
        let p = WalkParams::new(8000, 8000, 400, 2, 0, 1).unwrap();
        for row in theta_table(&p).unwrap() {
            assert!(row.rel_err <= 0.1, "j={} rel_err={}", row.j, row.rel_err);
        }
        let p3 = WalkParams::new(27000, 27000, 900, 3, 0, 1).unwrap();
        for row in theta_table(&p3).unwrap() {
            assert!(row.rel_err <= 0.1, "j={} rel_err={}", row.j, row.rel_err);
        }
    }

    #[test]
    fn theta_error_shrinks_with_r_at_fixed_ratio() {
        // The deviation from the law decreases as r grows with N/r held at
        // 20; the relative error tends to a small ratio-dependent constant,
        // so the shrinking quantity is the absolute one.
        let mut last = f64::INFINITY;
        for r in [100u64, 400, 1600] {
            let p = WalkParams::new(20 * r, 20 * r, r, 2, 0, 1).unwrap();
            let row = theta_table(&p).unwrap()[0];
            assert!(
                row.abs_err < last,
                "abs_err {} did not shrink (prev {})",
                row.abs_err,
                last
            );
            last = row.abs_err;
        }
    }

    #[test]
    fn hoffman_wielandt_identity_margin_zero() {
        let b = real_to_complex(&walk::reflection_block(0.3));
        let a = CMatrix::identity(2, 2);
        let rep = hoffman_wielandt_check(&a, &b).unwrap();
        assert!(rep.holds);
        assert_abs_diff_eq!(rep.bound, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.max_paired_distance, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn hoffman_wielandt_global_phase() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let phi = 0.15f64;
        let n = 4;
        let a = CMatrix::identity(n, n).map(|z| z * Complex64::from_polar(1.0, phi));
        let b = random_unitary(n, &mut rng);
        let rep = hoffman_wielandt_check(&a, &b).unwrap();
        assert!(rep.holds);
        let delta = (Complex64::from_polar(1.0, phi) - Complex64::new(1.0, 0.0)).norm();
        assert_abs_diff_eq!(rep.bound, n as f64 * delta, epsilon = 1e-9);
    }

    #[test]
    fn hoffman_wielandt_random_trials() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        for trial in 0..100 {
            let a = random_near_identity(4, 0.2, &mut rng);
            let b = random_unitary(4, &mut rng);
            let rep = hoffman_wielandt_check(&a, &b).unwrap();
            assert!(rep.holds, "trial {trial} violated the bound: {rep:?}");
        }
    }

    #[test]
    fn hoffman_wielandt_rejects_bad_input() {
        let a = CMatrix::identity(3, 3);
        let b = CMatrix::identity(4, 4);
        assert!(matches!(
            hoffman_wielandt_check(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut notu = CMatrix::identity(3, 3);
        notu[(0, 0)] = Complex64::new(0.5, 0.0);
        assert!(matches!(hoffman_wielandt_check(&notu, &a), Err(Error::NotUnitary { .. })));
    }

    fn single_mode_input(alpha: f64) -> GengroverInput {
        let a = ((1.0 - alpha * alpha) / 2.0).sqrt();
        GengroverInput::new(alpha, vec![Mode { theta: PI / 2.0, a }], PI / 2.0).unwrap()
    }

    #[test]
    fn gengrover_single_mode_root_and_overlap() {
        let input = single_mode_input(0.01);
        let report = gengrover_analysis_measured(&input).unwrap();
        // |f| near the root is bounded by the slope (~1/β) times the width
        assert!(gengrover_f(&input, report.beta).abs() < 1e-10 / report.beta);
        let a2 = input.alpha * input.alpha;
        let lo = input.epsilon * input.alpha / (2.0 * PI * (1.0 - a2)).sqrt();
        let hi = (2.0 * PI).sqrt() * input.alpha / (1.0 - a2).sqrt();
        assert!(report.beta >= lo && report.beta <= hi);
        assert!(report.measured_overlap.unwrap() >= 0.3);
    }

    #[test]
    fn gengrover_beta_scales_linearly_with_alpha() {
        let b1 = gengrover_analysis(&single_mode_input(0.01)).unwrap().beta;
        let b2 = gengrover_analysis(&single_mode_input(0.005)).unwrap().beta;
        assert!((b1 / (2.0 * b2) - 1.0).abs() < 0.05, "b1 = {b1}, b2 = {b2}");
    }

    #[test]
    fn gengrover_rejects_out_of_regime() {
        let input = single_mode_input(0.3);
        assert!(matches!(gengrover_analysis(&input), Err(Error::OutOfRegime { .. })));
    }

    #[test]
    fn gengrover_rejects_theta_pi() {
        let alpha = 0.01f64;
        let a = ((1.0 - alpha * alpha) / 2.0).sqrt();
        assert!(GengroverInput::new(alpha, vec![Mode { theta: PI, a }], 0.3).is_err());
    }

    #[test]
    fn overlap_at_zero_is_alpha() {
        let input = single_mode_input(0.01);
        let (u1, u2, start, good) = model_system(&input);
        let ov = overlap_at_t(&u1, &u2, &start, &good, 0).unwrap();
        assert_abs_diff_eq!(ov, 0.01, epsilon = 1e-12);
        // invariant under a global phase of ψ_good
        let rotated = good.map(|z| z * Complex64::from_polar(1.0, 1.1));
        let ov2 = overlap_at_t(&u1, &u2, &start, &rotated, 0).unwrap();
        assert_abs_diff_eq!(ov, ov2, epsilon = 1e-12);
    }

    #[test]
    fn walk_overlap_matches_engine_amplitude() {
        let params = WalkParams::with_default_schedule(1000, 1000, 100, 2).unwrap();
        let u = walk::build_step_unitary(&params).unwrap();
        let u2 = matrix_power_c(&real_to_complex(&u.entries), params.t2);
        let dim = params.dim();
        let mut u1 = CMatrix::identity(dim, dim);
        u1[(dim - 1, dim - 1)] = Complex64::new(-1.0, 0.0);
        let start_vec = CVector::from_vec(walk::start_state(&params).unwrap().amps.clone());
        let mut good = CVector::zeros(dim);
        good[dim - 1] = Complex64::new(1.0, 0.0);
        let ov = overlap_at_t(&u1, &u2, &start_vec, &good, params.t1).unwrap();
        let engine = walk::run_single_solution(&params).unwrap();
        assert_abs_diff_eq!(ov * ov, engine.success_prob, epsilon = 1e-9);
    }

    #[test]
    fn from_walk_decomposition_is_consistent() {
        let params = WalkParams::with_default_schedule(1000, 1000, 100, 2).unwrap();
        let input = GengroverInput::from_walk(&params).unwrap();
        assert_abs_diff_eq!(input.alpha, params.alpha(), epsilon = 1e-9);
        let report = gengrover_analysis(&input).unwrap();
        // the f-root route and the direct eigenphase agree
        let direct_t = walk::spectral_t1(&params).unwrap();
        assert_eq!(report.t, direct_t);
        let beta_direct = walk::principal_eigenphase(&params).unwrap();
        assert_abs_diff_eq!(report.beta, beta_direct, epsilon = 1e-9);
    }
}
