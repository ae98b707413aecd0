//! Complex Hermitian eigendecomposition.
//!
//! Three classical stages, all dense and allocation-light:
//!
//! 1. Householder reduction of the Hermitian matrix to Hermitian tridiagonal
//!    form with accumulated unitary similarity;
//! 2. a diagonal phase similarity that makes the off-diagonal real and
//!    non-negative;
//! 3. implicitly shifted QL iteration on the real symmetric tridiagonal
//!    matrix, with the plane rotations folded into the complex eigenvector
//!    columns.
//!
//! The QL stage follows the long-standing EISPACK/JAMA `tql2` recurrence,
//! which is backward stable and deterministic. Eigenvalues are returned in
//! ascending order with matching eigenvector columns.

use super::{ComplexMatrix, HERMITIAN_TOL};
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Eigendecomposition of a Hermitian matrix: real eigenvalues in ascending
/// order and a unitary matrix whose k-th column is the k-th eigenvector.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Decomposes a Hermitian matrix as `V diag(values) V^dagger`.
///
/// Fails with [`Error::NotHermitian`] when the input deviates from its
/// adjoint by more than [`HERMITIAN_TOL`] in any entry; smaller deviations
/// are symmetrized away before factoring.
pub fn eigh(m: &ComplexMatrix) -> Result<HermitianEig> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch {
            reason: format!("eigendecomposition needs a square matrix, got {}x{}", m.rows(), m.cols()),
        });
    }
    let n = m.dim();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m.get(i, j) - m.get(j, i).conj()).norm());
        }
    }
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation: dev });
    }

    if n == 1 {
        return Ok(HermitianEig { values: vec![m.get(0, 0).re], vectors: ComplexMatrix::identity(1) });
    }

    let mut a = m.hermitize();
    let mut reflectors: Vec<Vec<Complex64>> = Vec::new();

    // Stage 1: Householder tridiagonalization. After step k the k-th column
    // below the subdiagonal is zero.
    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let mut x: Vec<Complex64> = (0..len).map(|i| a.get(k + 1 + i, k)).collect();
        let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            reflectors.push(Vec::new());
            continue;
        }
        // alpha = -phase(x0) * ||x||, so v = x - alpha e1 has no cancellation.
        let alpha = if x[0].norm() > 0.0 { -(x[0] / x[0].norm()) * norm } else { Complex64::new(-norm, 0.0) };
        x[0] -= alpha;
        let vnorm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if vnorm < 1e-300 {
            reflectors.push(Vec::new());
            // Column already reduced; record the subdiagonal.
            a.set(k + 1, k, alpha);
            a.set(k, k + 1, alpha.conj());
            continue;
        }
        for v in x.iter_mut() {
            *v /= vnorm;
        }

        // Rank-2 Hermitian update of the trailing block T <- T - v w^+ - w v^+
        // with p = 2 T v and w = p - (v^+ p) v.
        let mut p = vec![Complex64::new(0.0, 0.0); len];
        for i in 0..len {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..len {
                acc += a.get(k + 1 + i, k + 1 + j) * x[j];
            }
            p[i] = acc * 2.0;
        }
        let vp: Complex64 = x.iter().zip(&p).map(|(v, pi)| v.conj() * pi).sum();
        let w: Vec<Complex64> = p.iter().zip(&x).map(|(pi, vi)| pi - vi * vp).collect();
        for i in 0..len {
            for j in 0..len {
                let upd = x[i] * w[j].conj() + w[i] * x[j].conj();
                let cur = a.get(k + 1 + i, k + 1 + j);
                a.set(k + 1 + i, k + 1 + j, cur - upd);
            }
        }
        // New column k: alpha on the subdiagonal, zeros below.
        a.set(k + 1, k, alpha);
        a.set(k, k + 1, alpha.conj());
        for i in (k + 2)..n {
            a.set(i, k, Complex64::new(0.0, 0.0));
            a.set(k, i, Complex64::new(0.0, 0.0));
        }
        reflectors.push(x);
    }

    // Back-accumulate the unitary: Q = H_0 H_1 ... applied to the identity.
    let mut q = ComplexMatrix::identity(n);
    for k in (0..reflectors.len()).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        let len = v.len();
        // Q[k+1.., :] -= 2 v (v^+ Q[k+1.., :])
        for col in 0..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for i in 0..len {
                dot += v[i].conj() * q.get(k + 1 + i, col);
            }
            let dot2 = dot * 2.0;
            for i in 0..len {
                let cur = q.get(k + 1 + i, col);
                q.set(k + 1 + i, col, cur - v[i] * dot2);
            }
        }
    }

    // Stage 2: phase similarity making the subdiagonal real non-negative.
    let mut d: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    let mut e = vec![0.0f64; n]; // e[i] couples i and i+1; e[n-1] unused.
    let mut phase = vec![Complex64::new(1.0, 0.0); n];
    for i in 0..n - 1 {
        let sub = a.get(i + 1, i);
        let mag = sub.norm();
        e[i] = mag;
        phase[i + 1] = if mag > 0.0 { sub * phase[i] / mag } else { phase[i] };
    }
    for j in 0..n {
        if (phase[j] - Complex64::new(1.0, 0.0)).norm() == 0.0 {
            continue;
        }
        for i in 0..n {
            let cur = q.get(i, j);
            q.set(i, j, cur * phase[j]);
        }
    }

    // Stage 3: implicit QL with Wilkinson-style shifts (EISPACK tql2).
    tql2(&mut d, &mut e, &mut q)?;

    Ok(HermitianEig { values: d, vectors: q })
}

/// Implicitly shifted QL on a real symmetric tridiagonal matrix, rotating the
/// (complex) eigenvector columns of `z` along. Sorts ascending at the end.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut ComplexMatrix) -> Result<()> {
    let n = d.len();
    if n > 0 {
        e[n - 1] = 0.0;
    }
    let eps = f64::EPSILON;
    let mut shift_acc = 0.0f64;
    let mut tst1 = 0.0f64;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Numerical {
                        reason: format!("tridiagonal QL failed to converge at index {}", l),
                    });
                }

                // Wilkinson-style shift from the leading 2x2.
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for i in (l + 2)..n {
                    d[i] -= h;
                }
                shift_acc += h;

                // Implicit QL sweep from m-1 down to l.
                p = d[m];
                let mut c = 1.0f64;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0f64;
                let mut s2 = 0.0f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    // Rotate eigenvector columns i and i+1 (real rotation on
                    // complex columns).
                    let ncols = z.rows();
                    for k in 0..ncols {
                        let zi = z.get(k, i);
                        let zi1 = z.get(k, i + 1);
                        z.set(k, i + 1, zi * s + zi1 * c);
                        z.set(k, i, zi * c - zi1 * s);
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += shift_acc;
        e[l] = 0.0;
    }

    // Ascending selection sort with matching column swaps (stable for ties).
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for j in (i + 1)..n {
            if d[j] < p {
                k = j;
                p = d[j];
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for r in 0..z.rows() {
                let tmp = z.get(r, i);
                z.set(r, i, z.get(r, k));
                z.set(r, k, tmp);
            }
        }
    }
    Ok(())
}
