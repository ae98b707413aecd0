//! Quantum channels in Kraus form and their correspondence with couplings:
//! every channel applied to a purification of the source yields a coupling,
//! and every coupling of `(sigma, rho)` arises this way from a channel that
//! can be recovered by whitening the coupling's eigenvectors against the
//! source marginal.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{place_on_sites, ComplexMatrix, FactorShape};

use super::{purify, DensityOperator, PureState, QuantumCoupling};

/// Completeness tolerance for `sum B^dagger B = 1`.
const COMPLETENESS_TOL: f64 = 1e-8;
/// Source eigenvalues below this are treated as kernel directions during
/// channel recovery.
const RECOVERY_EIG_TOL: f64 = 1e-8;

/// A completely positive trace-preserving map in Kraus form: operators
/// `B_k` of shape `dim_out x dim_in` with `sum B_k^dagger B_k = 1` within
/// `1e-8`, at most `dim_in * dim_out` of them.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    kraus: Vec<ComplexMatrix>,
    dim_in: usize,
    dim_out: usize,
}

impl KrausChannel {
    pub fn new(kraus: Vec<ComplexMatrix>, dim_in: usize, dim_out: usize) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidArgument { reason: "a channel needs at least one Kraus operator".into() });
        }
        if kraus.len() > dim_in * dim_out {
            return Err(Error::InvalidArgument {
                reason: format!("{} Kraus operators exceed dim_in*dim_out = {}", kraus.len(), dim_in * dim_out),
            });
        }
        for b in &kraus {
            if b.rows() != dim_out || b.cols() != dim_in {
                return Err(Error::ShapeMismatch {
                    reason: format!("Kraus operator is {}x{}, expected {}x{}", b.rows(), b.cols(), dim_out, dim_in),
                });
            }
        }
        let mut total = ComplexMatrix::zeros(dim_in, dim_in);
        for b in &kraus {
            total = total.add(&b.dagger().matmul(b));
        }
        let dev = total.max_abs_diff(&ComplexMatrix::identity(dim_in));
        if dev > COMPLETENESS_TOL {
            return Err(Error::NotTracePreserving { deviation: dev });
        }
        Ok(Self { kraus, dim_in, dim_out })
    }

    pub fn identity(dim: usize) -> Self {
        Self { kraus: vec![ComplexMatrix::identity(dim)], dim_in: dim, dim_out: dim }
    }

    /// Conjugation by a unitary, validated through the completeness check.
    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        let d = u.dim();
        if !u.is_square() {
            return Err(Error::ShapeMismatch { reason: "unitary must be square".into() });
        }
        Self::new(vec![u], d, d)
    }

    /// The channel that discards its input and prepares `target`.
    pub fn constant(target: &DensityOperator, dim_in: usize) -> Result<Self> {
        let eig = target.matrix().eigh()?;
        let d_out = target.dim();
        let mut kraus = Vec::new();
        for (k, &l) in eig.values.iter().enumerate() {
            if l <= 1e-14 {
                continue;
            }
            let col: Vec<Complex64> = (0..d_out).map(|i| eig.vectors.get(i, k)).collect();
            for j in 0..dim_in {
                let mut b = ComplexMatrix::zeros(d_out, dim_in);
                for (i, c) in col.iter().enumerate() {
                    b.set(i, j, c * l.sqrt());
                }
                kraus.push(b);
            }
        }
        Self::new(kraus, dim_in, d_out)
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    /// Raw action `sum B m B^dagger` on an arbitrary operator.
    pub fn apply_matrix(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim_out, self.dim_out);
        for b in &self.kraus {
            out = out.add(&b.matmul(m).matmul(&b.dagger()));
        }
        out
    }

    /// Action on a state; the output is validated as a state, which in
    /// particular confirms trace preservation within `1e-9`.
    pub fn apply(&self, rho: &DensityOperator, out_shape: FactorShape) -> Result<DensityOperator> {
        if rho.dim() != self.dim_in {
            return Err(Error::DimensionMismatch { expected: self.dim_in, actual: rho.dim() });
        }
        DensityOperator::new(self.apply_matrix(rho.matrix()), out_shape)
    }

    /// Adjoint (Heisenberg) action `sum B^dagger a B`; unital within the
    /// channel's completeness tolerance.
    pub fn adjoint_apply(&self, a: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim_in, self.dim_in);
        for b in &self.kraus {
            out = out.add(&b.dagger().matmul(a).matmul(b));
        }
        out
    }

    /// Lifts a square single-site channel to the full factored space by
    /// tensoring each Kraus operator with identities on the other sites.
    pub fn embed_at(&self, shape: &FactorShape, site: usize) -> Result<KrausChannel> {
        if site >= shape.n_factors() {
            return Err(Error::InvalidArgument { reason: format!("site {} out of range", site) });
        }
        if self.dim_in != self.dim_out || shape.dims()[site] != self.dim_in {
            return Err(Error::ShapeMismatch {
                reason: "embedding needs a square channel matching the site dimension".into(),
            });
        }
        let left: usize = shape.dims()[..site].iter().product();
        let right: usize = shape.dims()[site + 1..].iter().product();
        let il = ComplexMatrix::identity(left.max(1));
        let ir = ComplexMatrix::identity(right.max(1));
        let total = shape.total();
        let kraus = self.kraus.iter().map(|b| il.kron(b).kron(&ir)).collect();
        KrausChannel::new(kraus, total, total)
    }

    /// Lifts a square channel acting jointly on the listed sites (in the
    /// given order, which need not be adjacent or ascending) to the full
    /// factored space, acting as the identity elsewhere.
    pub fn embed_on_sites(&self, shape: &FactorShape, sites: &[usize]) -> Result<KrausChannel> {
        let sub: usize = sites.iter().map(|&s| shape.dims().get(s).copied().unwrap_or(0)).product();
        if self.dim_in != self.dim_out || sub != self.dim_in {
            return Err(Error::ShapeMismatch {
                reason: "embedding needs a square channel matching the selected sites".into(),
            });
        }
        let total = shape.total();
        let kraus: Result<Vec<_>> =
            self.kraus.iter().map(|b| place_on_sites(b, shape, sites)).collect();
        KrausChannel::new(kraus?, total, total)
    }
}

/// Column-major flattening `vec(M)[i * cols + j] = M[i, j]` used to move
/// between operators on `X -> Y` and vectors on `Y (x) X*`.
fn vec_matrix(m: &ComplexMatrix) -> Vec<Complex64> {
    m.data().to_vec()
}

fn unvec(v: &[Complex64], rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_vec(rows, cols, v.to_vec()).expect("unvec shape")
}

/// The coupling induced by applying `phi` to half of the canonical
/// purification of `sigma`: a state on `Y (x) X*` with marginals
/// `(sigma^T, phi(sigma))`.
pub fn coupling_from_channel(phi: &KrausChannel, sigma: &DensityOperator) -> Result<QuantumCoupling> {
    if sigma.dim() != phi.dim_in() {
        return Err(Error::DimensionMismatch { expected: phi.dim_in(), actual: sigma.dim() });
    }
    let psi: PureState = purify(sigma)?;
    let root = unvec(psi.amplitudes(), sigma.dim(), sigma.dim());
    let d_out = phi.dim_out();
    let d_in = phi.dim_in();
    let mut pi = ComplexMatrix::zeros(d_out * d_in, d_out * d_in);
    for b in phi.kraus() {
        let col = vec_matrix(&b.matmul(&root));
        pi = pi.add(&ComplexMatrix::outer(&col, &col));
    }
    let rho_m = phi.apply_matrix(sigma.matrix());
    let rho = DensityOperator::new(rho_m, FactorShape::new(vec![d_out])?)?;
    let sigma_flat = DensityOperator::new(sigma.matrix().clone(), FactorShape::new(vec![d_in])?)?;
    QuantumCoupling::new(pi, d_out, d_in, &sigma_flat, &rho)
}

/// Outcome of recovering a channel from a coupling; `pseudo_inverse` is set
/// when the source marginal was rank-deficient and the recovery whitened on
/// its support only, completing the channel on the kernel.
#[derive(Debug, Clone)]
pub struct ChannelRecovery {
    pub channel: KrausChannel,
    pub pseudo_inverse: bool,
}

/// Recovers a channel `phi` with `coupling_from_channel(phi, sigma)`
/// matching `pi`. Each eigenvector of the coupling, read as an operator, is
/// whitened on the right by the inverse square root of the source marginal.
///
/// The declared source must match the coupling's first marginal within
/// `1e-6`. A source with eigenvalues at or below `1e-8` is rejected unless
/// `allow_pseudo_inverse` is set, in which case kernel directions are
/// dropped from the whitening and the channel is completed by operators
/// sending the kernel onto the target's leading eigenvector.
pub fn channel_from_coupling(
    pi: &QuantumCoupling,
    sigma: &DensityOperator,
    allow_pseudo_inverse: bool,
) -> Result<ChannelRecovery> {
    if sigma.dim() != pi.dim_x() {
        return Err(Error::DimensionMismatch { expected: pi.dim_x(), actual: sigma.dim() });
    }
    let dev = pi.sigma_t().max_abs_diff(&sigma.matrix().transpose());
    if dev > 1e-6 {
        return Err(Error::MarginalMismatch {
            reason: format!("coupling's source marginal deviates from sigma by {:.3e}", dev),
        });
    }
    // Whiten against the coupling's own marginal so completeness is exact.
    let marginal = pi.sigma_t().transpose().hermitize();
    let eig_m = marginal.eigh()?;
    let rank_deficient = eig_m.values.iter().any(|&l| l <= RECOVERY_EIG_TOL);
    if rank_deficient && !allow_pseudo_inverse {
        return Err(Error::SingularMarginal { eigenvalue: eig_m.values[0] });
    }
    let inv_vals: Vec<f64> = eig_m
        .values
        .iter()
        .map(|&l| if l > RECOVERY_EIG_TOL { 1.0 / l.sqrt() } else { 0.0 })
        .collect();
    let whiten = crate::linalg::reconstruct(&eig_m.vectors, &inv_vals);

    let d_y = pi.dim_y();
    let d_x = pi.dim_x();
    let eig_pi = pi.matrix().eigh()?;
    let mut kraus = Vec::new();
    for (k, &p) in eig_pi.values.iter().enumerate() {
        if p <= 1e-12 {
            continue;
        }
        let col: Vec<Complex64> = (0..d_y * d_x).map(|i| eig_pi.vectors.get(i, k)).collect();
        let g = unvec(&col, d_y, d_x);
        kraus.push(g.matmul(&whiten).scale_re(p.sqrt()));
    }
    if rank_deficient {
        // Complete trace preservation on the kernel of the source: send each
        // kernel direction to the target's leading eigenvector.
        let eig_rho = pi.rho().hermitize().eigh()?;
        let top = eig_rho.values.len() - 1;
        let y0: Vec<Complex64> = (0..d_y).map(|i| eig_rho.vectors.get(i, top)).collect();
        for (k, &l) in eig_m.values.iter().enumerate() {
            if l > RECOVERY_EIG_TOL {
                continue;
            }
            let ker: Vec<Complex64> = (0..d_x).map(|i| eig_m.vectors.get(i, k)).collect();
            kraus.push(ComplexMatrix::outer(&y0, &ker));
        }
    }
    let channel = KrausChannel::new(kraus, d_x, d_y)?;
    Ok(ChannelRecovery { channel, pseudo_inverse: rank_deficient })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::random::{random_channel, random_state};
    use crate::quantum::{pauli_x, pauli_z, trace_distance, rel_entropy};

    fn hadamard() -> ComplexMatrix {
        let h = 0.5_f64.sqrt();
        ComplexMatrix::from_real(2, 2, &[h, h, h, -h]).unwrap()
    }

    #[test]
    fn kraus_validation_rejects_incomplete_sets() {
        let half = pauli_x().scale_re(0.5);
        assert!(matches!(
            KrausChannel::new(vec![half], 2, 2),
            Err(Error::NotTracePreserving { .. })
        ));
        let too_many = vec![ComplexMatrix::identity(2); 5];
        assert!(KrausChannel::new(too_many, 2, 2).is_err());
    }

    #[test]
    fn unitary_channel_conjugates() {
        let phi = KrausChannel::unitary(hadamard()).unwrap();
        let zero = DensityOperator::basis_state(FactorShape::qubits(1), 0).unwrap();
        let out = phi.apply(&zero, FactorShape::qubits(1)).unwrap();
        // H|0> is the uniform superposition: all entries 1/2.
        for i in 0..2 {
            for j in 0..2 {
                assert!((out.matrix().get(i, j).re - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_channel_prepares_target() {
        let target = DensityOperator::from_probs(&[0.25, 0.75], FactorShape::qubits(1)).unwrap();
        let phi = KrausChannel::constant(&target, 2).unwrap();
        let input = DensityOperator::basis_state(FactorShape::qubits(1), 1).unwrap();
        let out = phi.apply(&input, FactorShape::qubits(1)).unwrap();
        assert!(out.matrix().max_abs_diff(target.matrix()) < 1e-10);
    }

    #[test]
    fn adjoint_is_unital_and_dual() {
        let phi = random_channel(2, 2, 3, 7).unwrap();
        let one = ComplexMatrix::identity(2);
        assert!(phi.adjoint_apply(&one).max_abs_diff(&one) < 1e-8);

        let rho = random_state(&FactorShape::qubits(1), 2, 11).unwrap();
        let a = pauli_z();
        let lhs = phi.apply_matrix(rho.matrix()).trace_product_re(&a);
        let rhs = rho.matrix().trace_product_re(&phi.adjoint_apply(&a));
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn embedding_acts_on_one_site_only() {
        let phi = KrausChannel::unitary(pauli_x()).unwrap();
        let shape = FactorShape::qubits(2);
        let lifted = phi.embed_at(&shape, 1).unwrap();
        let input = DensityOperator::basis_state(shape.clone(), 0b00).unwrap();
        let out = lifted.apply(&input, shape).unwrap();
        assert!((out.matrix().get(0b01, 0b01).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multi_site_embedding_matches_single_site_composition() {
        // A product of single-qubit channels embedded jointly on sites
        // {0, 2} acts the same as embedding each factor separately.
        let shape = FactorShape::qubits(3);
        let phi_a = random_channel(2, 2, 2, 31).unwrap();
        let phi_b = random_channel(2, 2, 2, 32).unwrap();
        let joint_kraus: Vec<ComplexMatrix> = phi_a
            .kraus()
            .iter()
            .flat_map(|a| phi_b.kraus().iter().map(move |b| a.kron(b)))
            .collect();
        let joint = KrausChannel::new(joint_kraus, 4, 4).unwrap();
        let embedded = joint.embed_on_sites(&shape, &[0, 2]).unwrap();

        let rho = random_state(&shape, 8, 33).unwrap();
        let direct = embedded.apply(&rho, shape.clone()).unwrap();
        let stepwise = phi_b
            .embed_at(&shape, 2)
            .unwrap()
            .apply(&phi_a.embed_at(&shape, 0).unwrap().apply(&rho, shape.clone()).unwrap(), shape)
            .unwrap();
        assert!(direct.matrix().max_abs_diff(stepwise.matrix()) < 1e-10);
    }

    #[test]
    fn coupling_from_identity_channel_is_purification() {
        let sigma = random_state(&FactorShape::qubits(1), 2, 3).unwrap();
        let pi = coupling_from_channel(&KrausChannel::identity(2), &sigma).unwrap();
        let psi = purify(&sigma).unwrap();
        let pure = DensityOperator::from_pure(&psi);
        assert!(pi.matrix().max_abs_diff(pure.matrix()) < 1e-10);
    }

    #[test]
    fn coupling_marginals_match_channel_action() {
        let sigma = random_state(&FactorShape::qubits(1), 2, 21).unwrap();
        let phi = random_channel(2, 4, 2, 22).unwrap();
        let pi = coupling_from_channel(&phi, &sigma).unwrap();
        assert_eq!(pi.dim_y(), 4);
        assert!(pi.sigma_t().max_abs_diff(&sigma.matrix().transpose()) < 1e-9);
        assert!(pi.rho().max_abs_diff(&phi.apply_matrix(sigma.matrix())) < 1e-9);
    }

    #[test]
    fn channel_recovery_round_trip_full_rank() {
        for seed in 0..5 {
            let sigma = random_state(&FactorShape::qubits(1), 2, 100 + seed).unwrap();
            let phi = random_channel(2, 2, 2, 200 + seed).unwrap();
            let pi = coupling_from_channel(&phi, &sigma).unwrap();
            let rec = channel_from_coupling(&pi, &sigma, false).unwrap();
            assert!(!rec.pseudo_inverse);
            let pi2 = coupling_from_channel(&rec.channel, &sigma).unwrap();
            assert!(
                pi.matrix().max_abs_diff(pi2.matrix()) < 1e-6,
                "round trip deviates by {:.3e}",
                pi.matrix().max_abs_diff(pi2.matrix())
            );
        }
    }

    #[test]
    fn channel_recovery_pseudo_inverse_path() {
        // Rank-one source: the coupling forgets everything off the support.
        let sigma = DensityOperator::basis_state(FactorShape::qubits(1), 0).unwrap();
        let phi = random_channel(2, 2, 2, 31).unwrap();
        let pi = coupling_from_channel(&phi, &sigma).unwrap();
        assert!(matches!(
            channel_from_coupling(&pi, &sigma, false),
            Err(Error::SingularMarginal { .. })
        ));
        let rec = channel_from_coupling(&pi, &sigma, true).unwrap();
        assert!(rec.pseudo_inverse);
        // The recovered channel still reproduces the coupling (hence the
        // action on the support of sigma).
        let pi2 = coupling_from_channel(&rec.channel, &sigma).unwrap();
        assert!(pi.matrix().max_abs_diff(pi2.matrix()) < 1e-6);
    }

    #[test]
    fn recovery_rejects_wrong_source() {
        let sigma = random_state(&FactorShape::qubits(1), 2, 41).unwrap();
        let other = DensityOperator::maximally_mixed(FactorShape::qubits(1));
        let phi = random_channel(2, 2, 2, 42).unwrap();
        let pi = coupling_from_channel(&phi, &sigma).unwrap();
        assert!(matches!(
            channel_from_coupling(&pi, &other, true),
            Err(Error::MarginalMismatch { .. })
        ));
    }

    #[test]
    fn data_processing_under_random_channels() {
        for seed in 0..4 {
            let a = random_state(&FactorShape::qubits(1), 2, 300 + seed).unwrap();
            let b = random_state(&FactorShape::qubits(1), 2, 400 + seed).unwrap();
            let phi = random_channel(2, 2, 3, 500 + seed).unwrap();
            let fa = phi.apply(&a, FactorShape::qubits(1)).unwrap();
            let fb = phi.apply(&b, FactorShape::qubits(1)).unwrap();
            let before = trace_distance(&a, &b).unwrap();
            let after = trace_distance(&fa, &fb).unwrap();
            assert!(after <= before + 1e-8, "contraction fails: {} > {}", after, before);
            let s_before = rel_entropy(&a, &b).unwrap();
            let s_after = rel_entropy(&fa, &fb).unwrap();
            if s_before.is_finite() {
                assert!(s_after <= s_before + 1e-6);
            }
        }
    }
}
