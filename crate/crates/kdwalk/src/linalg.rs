//! Dense eigensolvers for the small (dimension ≤ a few dozen) Hermitian and
//! unitary matrices that appear in the walk analysis.
//!
//! The Hermitian solver is a cyclic complex Jacobi iteration; the unitary
//! solver reduces to it through the Hermitian parts `H = (U + U†)/2` and
//! `K = (U − U†)/(2i)`, which commute with a normal `U`. A random mix
//! `H + γK` generically has simple spectrum, so its eigenvectors are
//! eigenvectors of `U` and the eigenvalues are recovered as Rayleigh
//! quotients.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Max-norm defect of `U†U − I`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    let p = u.adjoint() * u;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            worst = worst.max((p[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| Complex64::new(m[(i, j)], 0.0))
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut v = CMatrix::identity(n, n);
    let tol = 1e-15 * a.iter().map(|z| z.norm()).fold(1.0f64, f64::max);

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[(p, q)].norm());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.norm() <= tol {
                    continue;
                }
                // Phase factor reduces the pivot to the real symmetric case.
                let phase = apq / apq.norm();
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * apq.norm());
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let sp = phase * s;
                // Columns: [p q] ← [p q]·[[c, s·phase], [−s·conj(phase), c]]
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = mip * c - miq * sp.conj();
                    m[(i, q)] = mip * sp + miq * c;
                }
                for i in 0..n {
                    let mpi = m[(p, i)];
                    let mqi = m[(q, i)];
                    m[(p, i)] = mpi * c - mqi * sp;
                    m[(q, i)] = mpi * sp.conj() + mqi * c;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * c - viq * sp.conj();
                    v[(i, q)] = vip * sp + viq * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vecs[(i, dst)] = v[(i, src)];
        }
    }
    (vals, vecs)
}

/// Eigendecomposition of a unitary matrix.
///
/// Returns unit-modulus eigenvalues and matching orthonormal eigenvectors as
/// columns, unordered. Fails if the input is not unitary within `tol`.
pub fn unitary_eigen(u: &CMatrix, tol: f64) -> Result<(Vec<Complex64>, CMatrix)> {
    let n = u.nrows();
    if n != u.ncols() {
        return Err(Error::DimensionMismatch { expected: n, got: u.ncols() });
    }
    let defect = unitarity_defect(u);
    if defect > tol {
        return Err(Error::NotUnitary { defect });
    }
    let ua = u.adjoint();
    let h = (u + &ua).map(|z| z * 0.5);
    let k = (u - &ua).map(|z| z * Complex64::new(0.0, -0.5));

    // Distinct eigenvalues of U may share a cos θ or sin θ; a generic mix
    // separates them. Retry with another γ on the rare accidental collision.
    for &gamma in &[0.6180339887498949, 0.3819660112501051, 1.2599210498948732, 0.1415926535897932] {
        let mix = &h + k.map(|z| z * gamma);
        let (_, vecs) = hermitian_eigen(&mix);
        let mut vals = Vec::with_capacity(n);
        let mut ok = true;
        for c in 0..n {
            let v = vecs.column(c).into_owned();
            let uv = u * &v;
            let lambda = v.dotc(&uv); // v† U v
            let resid = (&uv - v.map(|z| z * lambda)).norm();
            if resid > 1e-8 {
                ok = false;
                break;
            }
            vals.push(lambda);
        }
        if ok {
            return Ok((vals, vecs));
        }
    }
    Err(Error::NotUnitary { defect: f64::NAN })
}

/// |⟨a, b⟩| with the conjugation on `a`.
pub fn overlap(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).norm()
}
