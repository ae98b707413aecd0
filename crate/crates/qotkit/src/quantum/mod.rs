//! Finite-dimensional quantum states, observables, channels, and the
//! functionals between them: trace distance, fidelity, entropies,
//! purification, and the channel/coupling correspondence used by the
//! transport layers.
//!
//! All operators act on tensor-product spaces described by a
//! [`FactorShape`]; the leftmost factor is the most significant index, so an
//! `n`-qubit basis state's binary label reads left to right.

mod channel;
mod random;

pub use channel::{channel_from_coupling, coupling_from_channel, ChannelRecovery, KrausChannel};
pub use random::{random_channel, random_observable, random_state};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{partial_trace, sqrt_psd, trace_norm, ComplexMatrix, FactorShape, HERMITIAN_TOL};

/// Eigenvalues below this threshold count as zero in entropy sums.
const ENTROPY_EIG_TOL: f64 = 1e-12;
/// Eigenvalues below this threshold span the kernel for relative entropy.
const KERNEL_EIG_TOL: f64 = 1e-10;

/// A density operator: Hermitian within `1e-9`, eigenvalues at least
/// `-1e-9`, unit trace within `1e-9`, on a factored space.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    shape: FactorShape,
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix, shape: FactorShape) -> Result<Self> {
        if !matrix.is_square() || matrix.dim() != shape.total() {
            return Err(Error::ShapeMismatch {
                reason: format!("operator dim {} does not match shape {}", matrix.dim(), shape.total()),
            });
        }
        if !matrix.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::NotAState { reason: "not Hermitian".into() });
        }
        let matrix = matrix.hermitize();
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::NotAState { reason: format!("trace {} is not 1", tr.re) });
        }
        let eig = matrix.eigh()?;
        if eig.values[0] < -1e-9 {
            return Err(Error::NotAState { reason: format!("eigenvalue {} below zero", eig.values[0]) });
        }
        Ok(Self { matrix, shape })
    }

    pub fn maximally_mixed(shape: FactorShape) -> Self {
        let d = shape.total();
        Self { matrix: ComplexMatrix::identity(d).scale_re(1.0 / d as f64), shape }
    }

    /// The rank-one state `|psi><psi|`.
    pub fn from_pure(psi: &PureState) -> Self {
        Self { matrix: ComplexMatrix::outer(psi.amplitudes(), psi.amplitudes()), shape: psi.shape().clone() }
    }

    /// Computational-basis state `|index>` (big-endian labeling).
    pub fn basis_state(shape: FactorShape, index: usize) -> Result<Self> {
        let d = shape.total();
        if index >= d {
            return Err(Error::InvalidArgument { reason: format!("basis index {} out of range {}", index, d) });
        }
        Ok(Self { matrix: ComplexMatrix::unit(d, index, index), shape })
    }

    /// Diagonal state with the given probabilities on the computational
    /// basis; cross-checks against classical distributions go through here.
    pub fn from_probs(probs: &[f64], shape: FactorShape) -> Result<Self> {
        if probs.len() != shape.total() {
            return Err(Error::ShapeMismatch {
                reason: format!("{} probabilities for dimension {}", probs.len(), shape.total()),
            });
        }
        Self::new(ComplexMatrix::from_diagonal(probs), shape)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn shape(&self) -> &FactorShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.matrix.eigh()?.values)
    }

    /// Computational-basis diagonal, clamped to nonnegative reals.
    pub fn diagonal_probs(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix.get(i, i).re.max(0.0)).collect()
    }

    /// Reduced state on the factors left after tracing out `traced`.
    pub fn reduce(&self, traced: &[usize]) -> Result<DensityOperator> {
        let matrix = partial_trace(&self.matrix, &self.shape, traced)?;
        DensityOperator::new(matrix, self.shape.without(traced)?)
    }
}

/// A Hermitian observable on a factored space.
#[derive(Debug, Clone)]
pub struct Observable {
    matrix: ComplexMatrix,
    shape: FactorShape,
}

impl Observable {
    pub fn new(matrix: ComplexMatrix, shape: FactorShape) -> Result<Self> {
        if !matrix.is_square() || matrix.dim() != shape.total() {
            return Err(Error::ShapeMismatch {
                reason: format!("operator dim {} does not match shape {}", matrix.dim(), shape.total()),
            });
        }
        if !matrix.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::NotHermitian { deviation: matrix.max_abs_diff(&matrix.dagger()) });
        }
        Ok(Self { matrix: matrix.hermitize(), shape })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn shape(&self) -> &FactorShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Expectation value `tr[A rho]`.
    pub fn expectation(&self, rho: &DensityOperator) -> f64 {
        self.matrix.trace_product_re(rho.matrix())
    }
}

/// A unit vector on a factored space.
#[derive(Debug, Clone)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
    shape: FactorShape,
}

impl PureState {
    pub fn new(amplitudes: Vec<Complex64>, shape: FactorShape) -> Result<Self> {
        if amplitudes.len() != shape.total() {
            return Err(Error::ShapeMismatch {
                reason: format!("{} amplitudes for dimension {}", amplitudes.len(), shape.total()),
            });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::NotAState { reason: format!("vector norm {} is not 1", norm) });
        }
        Ok(Self { amplitudes, shape })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn shape(&self) -> &FactorShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }
}

/// A quantum coupling of `(sigma, rho)`: a state on `Y (x) X*` (output
/// factor leftmost) whose partial trace over `Y` is `sigma` transposed and
/// over `X*` is `rho`, both within `1e-8`.
#[derive(Debug, Clone)]
pub struct QuantumCoupling {
    matrix: ComplexMatrix,
    dim_y: usize,
    dim_x: usize,
    sigma_t: ComplexMatrix,
    rho: ComplexMatrix,
}

impl QuantumCoupling {
    pub fn new(
        matrix: ComplexMatrix,
        dim_y: usize,
        dim_x: usize,
        sigma: &DensityOperator,
        rho: &DensityOperator,
    ) -> Result<Self> {
        if sigma.dim() != dim_x || rho.dim() != dim_y {
            return Err(Error::ShapeMismatch { reason: "marginal dimensions disagree with coupling".into() });
        }
        let state = DensityOperator::new(matrix, FactorShape::new(vec![dim_y, dim_x])?)?;
        let shape = state.shape().clone();
        let matrix = state.matrix;
        let sigma_t = partial_trace(&matrix, &shape, &[0])?;
        let rho_m = partial_trace(&matrix, &shape, &[1])?;
        let dev_sigma = sigma_t.max_abs_diff(&sigma.matrix().transpose());
        let dev_rho = rho_m.max_abs_diff(rho.matrix());
        if dev_sigma > 1e-8 || dev_rho > 1e-8 {
            return Err(Error::MarginalMismatch {
                reason: format!("coupling marginals deviate by {:.3e} and {:.3e}", dev_sigma, dev_rho),
            });
        }
        Ok(Self { matrix, dim_y, dim_x, sigma_t, rho: rho_m })
    }

    /// The uncorrelated coupling `rho (x) sigma^T`.
    pub fn product(sigma: &DensityOperator, rho: &DensityOperator) -> Result<Self> {
        let matrix = rho.matrix().kron(&sigma.matrix().transpose());
        Self::new(matrix, rho.dim(), sigma.dim(), sigma, rho)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim_y(&self) -> usize {
        self.dim_y
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    /// Cached partial trace over the output factor: `sigma` transposed.
    pub fn sigma_t(&self) -> &ComplexMatrix {
        &self.sigma_t
    }

    /// Cached partial trace over the input factor: the target state.
    pub fn rho(&self) -> &ComplexMatrix {
        &self.rho
    }
}

/// Trace distance `(1/2) ||a - b||_1`, clamped into `[0, 1]`.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), actual: b.dim() });
    }
    Ok((0.5 * trace_norm(&a.matrix().sub(b.matrix()))?).clamp(0.0, 1.0))
}

/// Uhlmann fidelity `(tr sqrt(sqrt(a) b sqrt(a)))^2`, in `[0, 1 + 1e-8]`.
pub fn fidelity(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), actual: b.dim() });
    }
    let ra = sqrt_psd(a.matrix())?;
    let inner = ra.matmul(b.matrix()).matmul(&ra).hermitize();
    let eig = inner.eigh()?;
    let root_sum: f64 = eig.values.iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok((root_sum * root_sum).max(0.0))
}

/// Von Neumann entropy `-tr[rho ln rho]` in nats; eigenvalues below
/// `1e-12` contribute zero.
pub fn vn_entropy(rho: &DensityOperator) -> Result<f64> {
    let eig = rho.matrix().eigh()?;
    let s: f64 = eig
        .values
        .iter()
        .filter(|&&l| l >= ENTROPY_EIG_TOL)
        .map(|&l| -l * l.ln())
        .sum();
    Ok(s.max(0.0))
}

/// Relative entropy `tr[rho (ln rho - ln sigma)]` in nats. Returns
/// `+infinity` when `rho` has weight on the kernel of `sigma` (eigenvalues
/// below `1e-10`).
pub fn rel_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), actual: sigma.dim() });
    }
    let eig_s = sigma.matrix().eigh()?;
    let d = sigma.dim();
    // Weight of rho on the kernel of sigma.
    let mut kernel_weight = 0.0;
    for (k, &l) in eig_s.values.iter().enumerate() {
        if l >= KERNEL_EIG_TOL {
            continue;
        }
        let col: Vec<Complex64> = (0..d).map(|i| eig_s.vectors.get(i, k)).collect();
        let rv = rho.matrix().matvec(&col);
        kernel_weight += col.iter().zip(&rv).map(|(c, r)| (c.conj() * r).re).sum::<f64>();
    }
    if kernel_weight > 1e-10 {
        return Ok(f64::INFINITY);
    }
    let mut tr_rho_ln_sigma = 0.0;
    for (k, &l) in eig_s.values.iter().enumerate() {
        if l < KERNEL_EIG_TOL {
            continue;
        }
        let col: Vec<Complex64> = (0..d).map(|i| eig_s.vectors.get(i, k)).collect();
        let rv = rho.matrix().matvec(&col);
        let weight: f64 = col.iter().zip(&rv).map(|(c, r)| (c.conj() * r).re).sum();
        tr_rho_ln_sigma += weight * l.ln();
    }
    let eig_r = rho.matrix().eigh()?;
    let tr_rho_ln_rho: f64 = eig_r
        .values
        .iter()
        .filter(|&&l| l >= ENTROPY_EIG_TOL)
        .map(|&l| l * l.ln())
        .sum();
    Ok((tr_rho_ln_rho - tr_rho_ln_sigma).max(0.0))
}

/// Projector onto the nonnegative eigenspace of `rho - sigma` (the optimal
/// discrimination test); eigenvalues within `(-1e-12, 1e-12]` count as
/// nonnegative.
pub fn helstrom_projector(rho: &DensityOperator, sigma: &DensityOperator) -> Result<ComplexMatrix> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), actual: sigma.dim() });
    }
    let diff = rho.matrix().sub(sigma.matrix()).hermitize();
    let eig = diff.eigh()?;
    let selected: Vec<f64> = eig.values.iter().map(|&l| if l > -1e-12 { 1.0 } else { 0.0 }).collect();
    Ok(crate::linalg::reconstruct(&eig.vectors, &selected))
}

/// Canonical purification `|Psi> = vec(sqrt(sigma))` on the doubled space;
/// tracing the second factor returns `sigma`, the first its transpose.
pub fn purify(sigma: &DensityOperator) -> Result<PureState> {
    let root = sqrt_psd(sigma.matrix())?;
    let d = sigma.dim();
    let mut amps = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            amps.push(root.get(i, j));
        }
    }
    // Renormalize the floating-point tail so the invariant is exact.
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in amps.iter_mut() {
        *a /= norm;
    }
    PureState::new(amps, FactorShape::new(vec![d, d])?)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_vec(
        2,
        2,
        vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
        ],
    )
    .unwrap()
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
}
