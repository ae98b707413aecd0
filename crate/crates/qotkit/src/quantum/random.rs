//! Deterministic random ensembles: Ginibre-induced states, Gaussian
//! Hermitian observables, and Stinespring-isometry channels. Every function
//! takes an explicit seed and produces the same output on every platform,
//! which makes randomized verification runs reproducible byte for byte.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, FactorShape};

use super::{DensityOperator, KrausChannel, Observable};

/// Standard normal sampler via Box-Muller on the ChaCha stream; the
/// generator's output is specified exactly, so results are reproducible.
pub(crate) struct Gaussian {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Gaussian {
    pub(crate) fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), spare: None }
    }

    fn uniform(&mut self) -> f64 {
        // 53 uniform bits in [0, 1).
        (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub(crate) fn sample(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// Standard complex normal: real and imaginary parts each N(0, 1/2).
    pub(crate) fn sample_complex(&mut self) -> Complex64 {
        let scale = 0.5_f64.sqrt();
        Complex64::new(self.sample() * scale, self.sample() * scale)
    }
}

fn ginibre(rows: usize, cols: usize, g: &mut Gaussian) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m.set(i, j, g.sample_complex());
        }
    }
    m
}

/// A random density operator of the given rank: `G G^dagger / tr` for a
/// `d x rank` Ginibre matrix. Rank `d` draws from the Hilbert-Schmidt-like
/// induced measure; smaller ranks give rank-deficient states.
pub fn random_state(shape: &FactorShape, rank: usize, seed: u64) -> Result<DensityOperator> {
    let d = shape.total();
    if rank == 0 || rank > d {
        return Err(Error::InvalidArgument { reason: format!("rank {} out of range 1..={}", rank, d) });
    }
    let mut g = Gaussian::new(seed);
    let gin = ginibre(d, rank, &mut g);
    let raw = gin.matmul(&gin.dagger()).hermitize();
    let tr = raw.trace().re;
    DensityOperator::new(raw.scale_re(1.0 / tr), shape.clone())
}

/// A random Hermitian observable `(G + G^dagger)/2` with standard complex
/// normal entries.
pub fn random_observable(shape: &FactorShape, seed: u64) -> Result<Observable> {
    let d = shape.total();
    let mut g = Gaussian::new(seed);
    let gin = ginibre(d, d, &mut g);
    Observable::new(gin.add(&gin.dagger()).scale_re(0.5), shape.clone())
}

/// Modified Gram-Schmidt, run twice for orthogonality at working precision.
/// Columns of the result are an orthonormal basis of the column span.
fn orthonormalize_columns(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = m.rows();
    let cols = m.cols();
    let mut q = m.clone();
    for _pass in 0..2 {
        for j in 0..cols {
            for k in 0..j {
                // proj = <q_k, q_j>
                let mut proj = Complex64::new(0.0, 0.0);
                for i in 0..rows {
                    proj += q.get(i, k).conj() * q.get(i, j);
                }
                for i in 0..rows {
                    let v = q.get(i, j) - proj * q.get(i, k);
                    q.set(i, j, v);
                }
            }
            let norm: f64 = (0..rows).map(|i| q.get(i, j).norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(Error::Numerical { reason: "rank-deficient Gram-Schmidt input".into() });
            }
            for i in 0..rows {
                let v = q.get(i, j) / norm;
                q.set(i, j, v);
            }
        }
    }
    Ok(q)
}

/// A random channel from a Haar-like Stinespring isometry: a Ginibre matrix
/// of shape `(dim_out * kraus) x dim_in` is orthonormalized and cut into
/// `kraus` blocks of `dim_out` rows. Requires `dim_out * kraus >= dim_in`.
pub fn random_channel(dim_in: usize, dim_out: usize, kraus: usize, seed: u64) -> Result<KrausChannel> {
    if dim_in == 0 || dim_out == 0 || kraus == 0 {
        return Err(Error::InvalidArgument { reason: "channel dimensions must be positive".into() });
    }
    if dim_out * kraus < dim_in {
        return Err(Error::InvalidArgument {
            reason: format!("isometry needs dim_out*kraus >= dim_in, got {}*{} < {}", dim_out, kraus, dim_in),
        });
    }
    if kraus > dim_in * dim_out {
        return Err(Error::InvalidArgument {
            reason: format!("{} Kraus operators exceed dim_in*dim_out", kraus),
        });
    }
    let mut g = Gaussian::new(seed);
    let gin = ginibre(dim_out * kraus, dim_in, &mut g);
    let iso = orthonormalize_columns(&gin)?;
    let mut ops = Vec::with_capacity(kraus);
    for e in 0..kraus {
        let mut b = ComplexMatrix::zeros(dim_out, dim_in);
        for i in 0..dim_out {
            for j in 0..dim_in {
                b.set(i, j, iso.get(e * dim_out + i, j));
            }
        }
        ops.push(b);
    }
    KrausChannel::new(ops, dim_in, dim_out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn states_are_valid_and_deterministic() {
        let shape = FactorShape::qubits(2);
        let a = random_state(&shape, 4, 12345).unwrap();
        let b = random_state(&shape, 4, 12345).unwrap();
        assert_eq!(a.matrix().data(), b.matrix().data());
        let c = random_state(&shape, 4, 54321).unwrap();
        assert!(a.matrix().max_abs_diff(c.matrix()) > 1e-3);
    }

    #[test]
    fn rank_parameter_controls_rank() {
        let shape = FactorShape::qubits(2);
        let low = random_state(&shape, 1, 7).unwrap();
        let eig = low.eigenvalues().unwrap();
        assert!(eig[2].abs() < 1e-12, "rank-1 state has extra eigenvalue {}", eig[2]);
        assert!(eig[3] > 0.9);
        assert!(random_state(&shape, 0, 7).is_err());
        assert!(random_state(&shape, 5, 7).is_err());
    }

    #[test]
    fn observables_are_hermitian_and_seeded() {
        let shape = FactorShape::qubits(1);
        let a = random_observable(&shape, 1).unwrap();
        let b = random_observable(&shape, 1).unwrap();
        assert_eq!(a.matrix().data(), b.matrix().data());
    }

    #[test]
    fn channels_are_trace_preserving_and_seeded() {
        let a = random_channel(4, 2, 3, 99).unwrap();
        let b = random_channel(4, 2, 3, 99).unwrap();
        for (x, y) in a.kraus().iter().zip(b.kraus()) {
            assert_eq!(x.data(), y.data());
        }
        assert_eq!(a.kraus().len(), 3);
        assert!(random_channel(4, 1, 2, 5).is_err());
    }

    #[test]
    fn gaussian_moments_are_plausible() {
        let mut g = Gaussian::new(2024);
        let n = 20_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let v = g.sample();
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.03, "mean {}", mean);
        assert!((var - 1.0).abs() < 0.05, "variance {}", var);
    }
}
