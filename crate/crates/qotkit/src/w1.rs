//! Order-1 transport distance on multi-qubit states.
//!
//! The distance between two `n`-qubit states is the least total weight of a
//! decomposition of their difference into `n` Hermitian pieces, one per
//! site, each of which vanishes under the partial trace over its own site;
//! the weight of a piece is half its trace norm. The module solves that
//! program semidefinitely, recovers the dual witness (an observable whose
//! site-Lipschitz constant is at most one), computes the Lipschitz constant
//! of arbitrary observables, certifies locality bounds for channels that
//! act on few sites, and brackets channel contraction factors by sampling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conic::{HermitianProgram, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_basis, kron, lift_with_identity, operator_norm, partial_trace, place_on_sites,
    reconstruct, trace_norm, traceless_hermitian_basis, ComplexMatrix, FactorShape,
};
use crate::quadratic::quantum_solve_options;
use crate::quantum::{random_observable, random_state, DensityOperator, KrausChannel, Observable};

/// Default cap on the number of qubits accepted by the semidefinite solves.
const DEFAULT_MAX_QUBITS: usize = 4;
/// Environment variable overriding [`max_qubits`].
const MAX_QUBITS_ENV: &str = "QOTKIT_NMAX";
/// Decomposition pieces with weight at or below this are reported without
/// normalized states.
const COMPONENT_WEIGHT_TOL: f64 = 1e-12;
/// Marginal deviation accepted by [`neighbor_bound`] before declaring a
/// mismatch.
const NEIGHBOR_MARGINAL_TOL: f64 = 1e-7;
/// Slack added to the unit bound certified by [`neighbor_bound`].
const NEIGHBOR_BOUND_TOL: f64 = 1e-6;
/// Slack added to the locality cap certified by [`local_channel_bound`].
const LOCALITY_TOL: f64 = 1e-6;
/// Sampled contraction ratios with denominators below this are skipped.
const RATIO_DENOM_TOL: f64 = 1e-9;

/// The largest number of qubits the semidefinite operations accept.
///
/// Defaults to 4; the environment variable `QOTKIT_NMAX` overrides it when
/// set to a positive integer.
pub fn max_qubits() -> usize {
    std::env::var(MAX_QUBITS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(DEFAULT_MAX_QUBITS)
}

/// Validates an all-qubit shape within the size cap and returns the qubit count.
fn qubit_count(shape: &FactorShape) -> Result<usize> {
    if shape.dims().iter().any(|&d| d != 2) {
        return Err(Error::ShapeMismatch {
            reason: format!("every factor must be a qubit; got dims {:?}", shape.dims()),
        });
    }
    let n = shape.n_factors();
    let cap = max_qubits();
    if n > cap {
        return Err(Error::InvalidArgument {
            reason: format!("{} qubits exceed the configured cap of {}", n, cap),
        });
    }
    Ok(n)
}

/// Validates that two states share one supported qubit shape.
fn check_pair(rho: &DensityOperator, sigma: &DensityOperator) -> Result<(usize, FactorShape)> {
    if rho.shape().dims() != sigma.shape().dims() {
        return Err(Error::ShapeMismatch {
            reason: format!(
                "states live on different shapes: {:?} vs {:?}",
                rho.shape().dims(),
                sigma.shape().dims()
            ),
        });
    }
    let n = qubit_count(rho.shape())?;
    Ok((n, rho.shape().clone()))
}

/// Partial trace over one site that also handles the single-factor case,
/// where the result is the 1x1 matrix holding the full trace.
fn site_trace(x: &ComplexMatrix, shape: &FactorShape, site: usize) -> Result<ComplexMatrix> {
    if shape.n_factors() == 1 {
        let mut out = ComplexMatrix::zeros(1, 1);
        out.set(0, 0, x.trace());
        return Ok(out);
    }
    partial_trace(x, shape, &[site])
}

/// Identity on one site tensored with an operator on the remaining sites,
/// including the single-factor case where the rest space is trivial.
fn lift_on_rest(op: &ComplexMatrix, shape: &FactorShape, site: usize) -> Result<ComplexMatrix> {
    if shape.n_factors() == 1 {
        if op.rows() != 1 || !op.is_square() {
            return Err(Error::ShapeMismatch {
                reason: "the rest space of a single qubit is one-dimensional".into(),
            });
        }
        return Ok(ComplexMatrix::identity(shape.total()).scale(op.get(0, 0)));
    }
    lift_with_identity(op, shape, site)
}

/// Raw output of the transport program: one Hermitian piece per site and
/// the dual witness assembled from the equality multipliers.
struct TransportSolve {
    pieces: Vec<ComplexMatrix>,
    witness: ComplexMatrix,
    status: SolveStatus,
}

/// Solves the site-decomposition program for `rho - sigma`.
///
/// Each site contributes a positive and a negative block; their difference
/// is the site's piece. The pieces must sum to the state difference and be
/// partial-trace free at their own site, and the objective charges half the
/// trace of every block, which totals half the trace norm per piece at the
/// optimum. The multipliers of the sum constraint assemble the traceless
/// dual witness.
fn solve_transport_program(rho: &DensityOperator, sigma: &DensityOperator) -> Result<TransportSolve> {
    let shape = rho.shape().clone();
    let n = shape.n_factors();
    let d = shape.total();
    let delta = rho.matrix().sub(sigma.matrix()).hermitize();

    let mut prog = HermitianProgram::new(vec![d; 2 * n])?;
    let half_id = ComplexMatrix::identity(d).scale_re(0.5);
    for b in 0..2 * n {
        prog.set_objective(b, &half_id)?;
    }

    // The difference of the positive and negative blocks, summed over
    // sites, must match the state difference; spanning the traceless
    // Hermitian directions suffices because every block difference is
    // traceless once the per-site conditions below hold.
    let diff_basis = traceless_hermitian_basis(d);
    for e in &diff_basis {
        let neg = e.scale_re(-1.0);
        let mut terms: Vec<(usize, &ComplexMatrix)> = Vec::with_capacity(2 * n);
        for i in 0..n {
            terms.push((i, e));
        }
        for i in 0..n {
            terms.push((n + i, &neg));
        }
        prog.add_constraint(&terms, e.trace_product_re(&delta))?;
    }

    // Each site's piece vanishes under the partial trace over that site.
    let rest_basis = hermitian_basis(d / 2);
    for i in 0..n {
        for f in &rest_basis {
            let lifted = lift_on_rest(f, &shape, i)?;
            let neg = lifted.scale_re(-1.0);
            prog.add_constraint(&[(i, &lifted), (n + i, &neg)], 0.0)?;
        }
    }

    let sol = prog.solve(&quantum_solve_options());
    if sol.status != SolveStatus::Optimal {
        return Err(Error::SolverFailure { status: sol.status });
    }

    let mut pieces = Vec::with_capacity(n);
    for i in 0..n {
        let p = prog.extract(&sol, i)?;
        let nmat = prog.extract(&sol, n + i)?;
        pieces.push(p.sub(&nmat).hermitize());
    }
    let mut witness = ComplexMatrix::zeros(d, d);
    for (k, e) in diff_basis.iter().enumerate() {
        witness = witness.add(&e.scale_re(sol.dual_y[k]));
    }
    Ok(TransportSolve { pieces, witness: witness.hermitize(), status: sol.status })
}

/// Projects a numerically optimal decomposition onto the exact affine
/// constraints. First every piece is made exactly partial-trace free at its
/// own site; then the leftover `delta - sum` is redistributed through a
/// telescope of partial reductions whose successive differences are
/// partial-trace free at the newly completed site, so the repaired pieces
/// sum to `delta` to machine precision without breaking the per-site
/// conditions.
fn repair_decomposition(
    pieces: &mut [ComplexMatrix],
    delta: &ComplexMatrix,
    shape: &FactorShape,
) -> Result<()> {
    let n = pieces.len();
    for (i, x) in pieces.iter_mut().enumerate() {
        let m = site_trace(x, shape, i)?.scale_re(0.5);
        *x = x.sub(&lift_on_rest(&m, shape, i)?);
    }
    let mut residual = delta.clone();
    for x in pieces.iter() {
        residual = residual.sub(x);
    }
    let d = shape.total();
    let mut prev = ComplexMatrix::zeros(d, d);
    for p in 1..=n {
        let g = if p == n {
            residual.clone()
        } else {
            let traced: Vec<usize> = (p..n).collect();
            let reduced = partial_trace(&residual, shape, &traced)?;
            let pad = d / reduced.rows();
            kron(&reduced, &ComplexMatrix::identity(pad)).scale_re(1.0 / pad as f64)
        };
        pieces[p - 1] = pieces[p - 1].add(&g.sub(&prev)).hermitize();
        prev = g;
    }
    Ok(())
}

/// One site's share of an optimal decomposition, split into normalized
/// positive and negative parts: the piece equals `weight * (plus - minus)`.
/// Pieces of negligible weight carry no states.
#[derive(Debug, Clone)]
pub struct SiteComponent {
    /// Half the trace norm of the site's piece.
    pub weight: f64,
    /// Positive part normalized to a state, absent for negligible weight.
    pub plus: Option<DensityOperator>,
    /// Negative part normalized to a state, absent for negligible weight.
    pub minus: Option<DensityOperator>,
}

/// An optimal transport decomposition: the distance together with one
/// Hermitian piece per site, each partial-trace free at its own site,
/// summing to the difference of the two states.
#[derive(Debug, Clone)]
pub struct W1Result {
    value: f64,
    decomposition: Vec<Observable>,
    status: SolveStatus,
}

impl W1Result {
    /// The transport distance: the summed half trace norms of the pieces.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// One Hermitian piece per site; piece `i` is partial-trace free at
    /// site `i` and the pieces sum to `rho - sigma`.
    pub fn decomposition(&self) -> &[Observable] {
        &self.decomposition
    }

    /// Status reported by the interior-point solve.
    pub fn solver_status(&self) -> SolveStatus {
        self.status
    }

    /// Splits every piece into its normalized positive and negative parts.
    pub fn site_components(&self) -> Result<Vec<SiteComponent>> {
        let mut out = Vec::with_capacity(self.decomposition.len());
        for piece in &self.decomposition {
            let eig = piece.matrix().eigh()?;
            let pos: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
            let neg: Vec<f64> = eig.values.iter().map(|v| (-v).max(0.0)).collect();
            let wp: f64 = pos.iter().sum();
            let wn: f64 = neg.iter().sum();
            let weight = 0.5 * (wp + wn);
            if weight <= COMPONENT_WEIGHT_TOL {
                out.push(SiteComponent { weight, plus: None, minus: None });
                continue;
            }
            let plus: Vec<f64> = pos.iter().map(|v| v / wp).collect();
            let minus: Vec<f64> = neg.iter().map(|v| v / wn).collect();
            out.push(SiteComponent {
                weight,
                plus: Some(DensityOperator::new(
                    reconstruct(&eig.vectors, &plus),
                    piece.shape().clone(),
                )?),
                minus: Some(DensityOperator::new(
                    reconstruct(&eig.vectors, &minus),
                    piece.shape().clone(),
                )?),
            });
        }
        Ok(out)
    }
}

/// The order-1 transport distance between two states on the same qubits.
///
/// Returns the optimal value together with the repaired decomposition: the
/// pieces sum to `rho - sigma` and are partial-trace free at their own
/// sites to machine precision, and the value is recomputed from the
/// repaired pieces so it is certified by an explicit feasible point.
pub fn w1(rho: &DensityOperator, sigma: &DensityOperator) -> Result<W1Result> {
    let (n, shape) = check_pair(rho, sigma)?;
    if rho.matrix().max_abs_diff(sigma.matrix()) == 0.0 {
        let zero = ComplexMatrix::zeros(rho.dim(), rho.dim());
        let decomposition = (0..n)
            .map(|_| Observable::new(zero.clone(), shape.clone()))
            .collect::<Result<Vec<_>>>()?;
        return Ok(W1Result { value: 0.0, decomposition, status: SolveStatus::Optimal });
    }
    let solve = solve_transport_program(rho, sigma)?;
    let delta = rho.matrix().sub(sigma.matrix()).hermitize();
    let mut pieces = solve.pieces;
    repair_decomposition(&mut pieces, &delta, &shape)?;
    let mut value = 0.0;
    for x in &pieces {
        value += 0.5 * trace_norm(x)?;
    }
    let decomposition = pieces
        .into_iter()
        .map(|x| Observable::new(x, shape.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(W1Result { value, decomposition, status: solve.status })
}

/// The dual view of the transport distance: an observable of unit
/// site-Lipschitz constant whose expectation gap matches the distance.
#[derive(Debug, Clone)]
pub struct DualW1Result {
    value: f64,
    witness: Observable,
    status: SolveStatus,
}

impl DualW1Result {
    /// The certified expectation gap `tr[A (rho - sigma)]` of the witness.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// The traceless witness observable; its site-Lipschitz constant is at
    /// most one up to solver tolerance.
    pub fn witness(&self) -> &Observable {
        &self.witness
    }

    /// Status reported by the interior-point solve.
    pub fn solver_status(&self) -> SolveStatus {
        self.status
    }
}

/// The transport distance through its dual: maximize the expectation gap
/// over observables of site-Lipschitz constant at most one.
///
/// The witness is assembled from the multipliers of the sum constraint in
/// the decomposition program, re-centered to be exactly traceless, and the
/// returned value is its actual expectation gap on the two states.
pub fn w1_dual(rho: &DensityOperator, sigma: &DensityOperator) -> Result<DualW1Result> {
    let (_, shape) = check_pair(rho, sigma)?;
    let d = shape.total();
    if rho.matrix().max_abs_diff(sigma.matrix()) == 0.0 {
        let witness = Observable::new(ComplexMatrix::zeros(d, d), shape)?;
        return Ok(DualW1Result { value: 0.0, witness, status: SolveStatus::Optimal });
    }
    let solve = solve_transport_program(rho, sigma)?;
    let shift = solve.witness.trace().re / d as f64;
    let a = solve.witness.sub(&ComplexMatrix::identity(d).scale_re(shift));
    let delta = rho.matrix().sub(sigma.matrix()).hermitize();
    let value = a.trace_product_re(&delta);
    Ok(DualW1Result { value, witness: Observable::new(a, shape)?, status: solve.status })
}

/// One site's contribution to the Lipschitz constant: the least deviation
/// of the observable from something acting trivially on that site, and the
/// operator on the remaining sites realizing it.
#[derive(Debug, Clone)]
pub struct SiteLipschitz {
    /// `min_B ||A - 1_site (x) B||`, recomputed from the minimizer.
    pub deviation: f64,
    /// The minimizing operator `B` on the remaining sites.
    pub minimizer: Observable,
}

/// The site-Lipschitz constant of an observable: twice the largest per-site
/// deviation, with the per-site minimizers.
#[derive(Debug, Clone)]
pub struct LipschitzResult {
    value: f64,
    per_site: Vec<SiteLipschitz>,
}

impl LipschitzResult {
    /// Twice the largest per-site deviation.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Per-site deviations and minimizers, in site order.
    pub fn per_site(&self) -> &[SiteLipschitz] {
        &self.per_site
    }
}

/// The site-Lipschitz constant of an observable.
///
/// For each site the least operator-norm deviation of `A` from an operator
/// acting trivially on that site is found semidefinitely; the reported
/// deviation is recomputed as the actual operator norm against the
/// recovered minimizer, so each per-site figure is certified. The constant
/// is twice the largest deviation.
pub fn lipschitz(a: &Observable) -> Result<LipschitzResult> {
    let n = qubit_count(a.shape())?;
    let d = a.shape().total();
    let rest_basis = hermitian_basis(d / 2);
    let neg_a = a.matrix().scale_re(-1.0);
    let id = ComplexMatrix::identity(d);
    let mut per_site = Vec::with_capacity(n);
    let mut value: f64 = 0.0;
    for site in 0..n {
        // Two PSD blocks splitting the unit-trace budget; the objective gap
        // between them is the deviation, and the equality multipliers
        // recover the minimizing operator on the remaining sites.
        let mut prog = HermitianProgram::new(vec![d, d])?;
        prog.set_objective(0, &neg_a)?;
        prog.set_objective(1, a.matrix())?;
        prog.add_constraint(&[(0, &id), (1, &id)], 1.0)?;
        for f in &rest_basis {
            let lifted = lift_on_rest(f, a.shape(), site)?;
            let neg = lifted.scale_re(-1.0);
            prog.add_constraint(&[(0, &lifted), (1, &neg)], 0.0)?;
        }
        let sol = prog.solve(&quantum_solve_options());
        if sol.status != SolveStatus::Optimal {
            return Err(Error::SolverFailure { status: sol.status });
        }
        let mut b = ComplexMatrix::zeros(d / 2, d / 2);
        for (m, f) in rest_basis.iter().enumerate() {
            b = b.add(&f.scale_re(sol.dual_y[m + 1]));
        }
        let minimizer = b.scale_re(-1.0).hermitize();
        let deviation = operator_norm(&a.matrix().sub(&lift_on_rest(&minimizer, a.shape(), site)?))?;
        value = value.max(2.0 * deviation);
        let rest_shape = if n == 1 {
            FactorShape::new(vec![1])?
        } else {
            a.shape().without(&[site])?
        };
        per_site.push(SiteLipschitz { deviation, minimizer: Observable::new(minimizer, rest_shape)? });
    }
    Ok(LipschitzResult { value, per_site })
}

/// Transport distance of a pair that differs on a single site.
///
/// Requires the two states to agree after tracing out `site` (within
/// `1e-7` per entry); the distance of such a pair never exceeds one, and
/// the computed value is checked against that bound before being returned.
pub fn neighbor_bound(rho: &DensityOperator, sigma: &DensityOperator, site: usize) -> Result<f64> {
    let (n, shape) = check_pair(rho, sigma)?;
    if site >= n {
        return Err(Error::InvalidArgument {
            reason: format!("site {} out of range (n = {})", site, n),
        });
    }
    let diff = rho.matrix().sub(sigma.matrix());
    let rest = site_trace(&diff, &shape, site)?;
    let dev = rest.max_abs_diff(&ComplexMatrix::zeros(rest.rows(), rest.rows()));
    if dev > NEIGHBOR_MARGINAL_TOL {
        return Err(Error::MarginalMismatch {
            reason: format!(
                "states must agree after tracing out site {}; max deviation {:.3e}",
                site, dev
            ),
        });
    }
    let result = w1(rho, sigma)?;
    if result.value() > 1.0 + NEIGHBOR_BOUND_TOL {
        return Err(Error::Numerical {
            reason: format!(
                "single-site neighbors must be within unit distance; got {:.9}",
                result.value()
            ),
        });
    }
    Ok(result.value())
}

/// Upper bound on the transport distance moved by a channel acting on `k`
/// of the sites, certified by an explicit decomposition.
///
/// The channel is embedded on the listed sites with identity elsewhere and
/// applied to `rho`. The difference to the input is decomposed through a
/// telescope of partial reductions ordered so that every unaffected site
/// precedes every affected one; trace preservation makes the unaffected
/// contributions vanish, so the total weight is at most `2k`. That weight
/// is an upper bound on the transport distance between input and output; it
/// is checked against `2k` before being returned.
pub fn local_channel_bound(
    phi: &KrausChannel,
    sites: &[usize],
    rho: &DensityOperator,
) -> Result<f64> {
    let n = qubit_count(rho.shape())?;
    let shape = rho.shape().clone();
    for &s in sites {
        if s >= n {
            return Err(Error::InvalidArgument {
                reason: format!("site {} out of range (n = {})", s, n),
            });
        }
    }
    let k = sites.len();
    let embedded = phi.embed_on_sites(&shape, sites)?;
    let mapped = embedded.apply(rho, shape.clone())?;
    let delta = rho.matrix().sub(mapped.matrix()).hermitize();

    let mut is_affected = vec![false; n];
    for &s in sites {
        is_affected[s] = true;
    }
    let mut order: Vec<usize> = (0..n).filter(|&f| !is_affected[f]).collect();
    order.extend((0..n).filter(|&f| is_affected[f]));

    let d = shape.total();
    let mut cost = 0.0;
    let mut prev = ComplexMatrix::zeros(d, d);
    for p in 1..=n {
        let g = if p == n {
            delta.clone()
        } else {
            let mut kept = order[..p].to_vec();
            kept.sort_unstable();
            let mut traced = order[p..].to_vec();
            traced.sort_unstable();
            let reduced = partial_trace(&delta, &shape, &traced)?;
            let pad = d / reduced.rows();
            place_on_sites(&reduced.scale_re(1.0 / pad as f64), &shape, &kept)?
        };
        cost += 0.5 * trace_norm(&g.sub(&prev))?;
        prev = g;
    }

    let cap = 2.0 * k as f64 + LOCALITY_TOL;
    if cost > cap {
        return Err(Error::Numerical {
            reason: format!("telescoped transport cost {:.9} exceeds the locality cap {:.9}", cost, cap),
        });
    }
    Ok(cost)
}

/// A state differing from `rho` only on the given site: a random direction
/// that is partial-trace free at the site is added with a step small enough
/// to keep the spectrum positive. Requires a full-rank input.
pub fn neighbor_of(rho: &DensityOperator, site: usize, seed: u64) -> Result<DensityOperator> {
    let n = qubit_count(rho.shape())?;
    if site >= n {
        return Err(Error::InvalidArgument {
            reason: format!("site {} out of range (n = {})", site, n),
        });
    }
    let y = random_observable(rho.shape(), seed)?;
    let m = site_trace(y.matrix(), rho.shape(), site)?.scale_re(0.5);
    let x = y.matrix().sub(&lift_on_rest(&m, rho.shape(), site)?).hermitize();
    let spread = operator_norm(&x)?;
    let floor = rho.matrix().eigh()?.values[0];
    if spread <= 0.0 || floor <= 0.0 {
        return Err(Error::InvalidArgument {
            reason: "perturbing a rank-deficient state off a single site is not supported".into(),
        });
    }
    let step = 0.9 * floor / spread;
    DensityOperator::new(rho.matrix().add(&x.scale_re(step)), rho.shape().clone())
}

/// Bracket on a channel's contraction factor with respect to the transport
/// distance: the true factor lies in `[lower, upper]`.
#[derive(Debug, Clone, Copy)]
pub struct ContractionBounds {
    /// Largest sampled ratio of output to input distance.
    pub lower: f64,
    /// The qubit count: distances contract to within this factor because
    /// the trace distance never grows under a channel.
    pub upper: f64,
    /// Number of sampled pairs whose input distance was informative.
    pub samples: usize,
}

/// Samples pairs of states and maximizes the ratio of output to input
/// transport distance under the channel.
///
/// Alternates generic random pairs with single-site neighbor pairs, which
/// probe the regime where the distance is most sensitive. The result is a
/// lower bound on the contraction factor; the accompanying upper bound is
/// the qubit count.
pub fn contraction_lower_bound(
    phi: &KrausChannel,
    trials: usize,
    seed: u64,
) -> Result<ContractionBounds> {
    if phi.dim_in() != phi.dim_out() {
        return Err(Error::ShapeMismatch {
            reason: "contraction sampling needs a square channel".into(),
        });
    }
    let d = phi.dim_in();
    let n = d.trailing_zeros() as usize;
    if d < 2 || d != (1usize << n) {
        return Err(Error::ShapeMismatch {
            reason: format!("channel dimension {} is not a power of two", d),
        });
    }
    let cap = max_qubits();
    if n > cap {
        return Err(Error::InvalidArgument {
            reason: format!("{} qubits exceed the configured cap of {}", n, cap),
        });
    }
    if trials == 0 {
        return Err(Error::InvalidArgument { reason: "at least one trial is required".into() });
    }
    let shape = FactorShape::qubits(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lower: f64 = 0.0;
    let mut samples = 0usize;
    for t in 0..trials {
        let seed_a = rng.next_u64();
        let seed_b = rng.next_u64();
        let (rho, sigma) = if t % 2 == 0 {
            (random_state(&shape, d, seed_a)?, random_state(&shape, d, seed_b)?)
        } else {
            let rho = random_state(&shape, d, seed_a)?;
            let sigma = neighbor_of(&rho, (t / 2) % n, seed_b)?;
            (rho, sigma)
        };
        let denom = w1(&rho, &sigma)?.value();
        if denom < RATIO_DENOM_TOL {
            continue;
        }
        let out_r = phi.apply(&rho, shape.clone())?;
        let out_s = phi.apply(&sigma, shape.clone())?;
        let numer = w1(&out_r, &out_s)?.value();
        lower = lower.max(numer / denom);
        samples += 1;
    }
    Ok(ContractionBounds { lower, upper: n as f64, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{hamming_w1, Distribution};
    use crate::quantum::{random_channel, trace_distance};

    fn basis_pair(n: usize, a: usize, b: usize) -> (DensityOperator, DensityOperator) {
        let shape = FactorShape::qubits(n);
        (
            DensityOperator::basis_state(shape.clone(), a).unwrap(),
            DensityOperator::basis_state(shape, b).unwrap(),
        )
    }

    #[test]
    fn identical_states_have_zero_distance() {
        let rho = random_state(&FactorShape::qubits(2), 4, 11).unwrap();
        let res = w1(&rho, &rho).unwrap();
        assert_eq!(res.value(), 0.0);
        for piece in res.decomposition() {
            assert!(piece.matrix().max_abs_diff(&ComplexMatrix::zeros(4, 4)) == 0.0);
        }
        let dual = w1_dual(&rho, &rho).unwrap();
        assert_eq!(dual.value(), 0.0);
    }

    #[test]
    fn basis_states_realize_hamming_distance() {
        let (r1, s1) = basis_pair(1, 0, 1);
        assert!((w1(&r1, &s1).unwrap().value() - 1.0).abs() < 1e-6);

        let (r2, s2) = basis_pair(2, 0b01, 0b11);
        assert!((w1(&r2, &s2).unwrap().value() - 1.0).abs() < 1e-6);

        let (r3, s3) = basis_pair(3, 0b000, 0b011);
        let res = w1(&r3, &s3).unwrap();
        assert!((res.value() - 2.0).abs() < 1e-6, "value {}", res.value());

        // The dual witness must certify the same value.
        let dual = w1_dual(&r3, &s3).unwrap();
        assert!((dual.value() - 2.0).abs() < 1e-6, "dual {}", dual.value());
    }

    #[test]
    fn single_qubit_distance_is_the_trace_distance() {
        let rho = random_state(&FactorShape::qubits(1), 2, 21).unwrap();
        let sigma = random_state(&FactorShape::qubits(1), 2, 22).unwrap();
        let value = w1(&rho, &sigma).unwrap().value();
        let td = trace_distance(&rho, &sigma).unwrap();
        assert!((value - td).abs() < 1e-7, "w1 {} vs trace distance {}", value, td);
    }

    #[test]
    fn diagonal_states_match_classical_transport() {
        let shape = FactorShape::qubits(2);
        let p = vec![0.4, 0.1, 0.2, 0.3];
        let q = vec![0.05, 0.45, 0.3, 0.2];
        let rho = DensityOperator::from_probs(&p, shape.clone()).unwrap();
        let sigma = DensityOperator::from_probs(&q, shape).unwrap();
        let quantum = w1(&rho, &sigma).unwrap().value();
        let classical =
            hamming_w1(&Distribution::new(p).unwrap(), &Distribution::new(q).unwrap()).unwrap();
        assert!((quantum - classical).abs() < 1e-6, "{} vs {}", quantum, classical);
    }

    #[test]
    fn decomposition_satisfies_its_invariants() {
        let shape = FactorShape::qubits(2);
        let rho = random_state(&shape, 4, 31).unwrap();
        let sigma = random_state(&shape, 4, 32).unwrap();
        let res = w1(&rho, &sigma).unwrap();

        let delta = rho.matrix().sub(sigma.matrix());
        let mut sum = ComplexMatrix::zeros(4, 4);
        let mut weight = 0.0;
        for (i, piece) in res.decomposition().iter().enumerate() {
            sum = sum.add(piece.matrix());
            weight += 0.5 * trace_norm(piece.matrix()).unwrap();
            let rest = partial_trace(piece.matrix(), &shape, &[i]).unwrap();
            let dev = rest.max_abs_diff(&ComplexMatrix::zeros(2, 2));
            assert!(dev < 1e-7, "site {} partial trace deviates by {:.3e}", i, dev);
        }
        assert!(sum.max_abs_diff(&delta) < 1e-7);
        assert!((weight - res.value()).abs() < 1e-9);
    }

    #[test]
    fn site_components_recombine_into_the_pieces() {
        let shape = FactorShape::qubits(2);
        let rho = random_state(&shape, 4, 41).unwrap();
        let sigma = random_state(&shape, 2, 42).unwrap();
        let res = w1(&rho, &sigma).unwrap();
        let comps = res.site_components().unwrap();
        assert_eq!(comps.len(), 2);
        for (comp, piece) in comps.iter().zip(res.decomposition()) {
            assert!(comp.weight >= 0.0);
            if comp.weight <= 1e-12 {
                continue;
            }
            let plus = comp.plus.as_ref().unwrap();
            let minus = comp.minus.as_ref().unwrap();
            let rebuilt = plus.matrix().sub(minus.matrix()).scale_re(comp.weight);
            assert!(rebuilt.max_abs_diff(piece.matrix()) < 1e-7);
        }
    }

    #[test]
    fn duality_holds_with_a_lipschitz_witness() {
        let shape = FactorShape::qubits(2);
        let rho = random_state(&shape, 4, 51).unwrap();
        let sigma = random_state(&shape, 4, 52).unwrap();
        let primal = w1(&rho, &sigma).unwrap().value();
        let dual = w1_dual(&rho, &sigma).unwrap();
        assert!((primal - dual.value()).abs() < 1e-6, "primal {} dual {}", primal, dual.value());

        let a = dual.witness();
        assert!(a.matrix().trace().re.abs() < 1e-8);
        let lip = lipschitz(a).unwrap();
        assert!(lip.value() <= 1.0 + 1e-5, "witness Lipschitz constant {}", lip.value());
    }

    #[test]
    fn lipschitz_of_simple_observables() {
        // Anything proportional to the identity has constant zero.
        let shape = FactorShape::qubits(2);
        let id = Observable::new(ComplexMatrix::identity(4), shape.clone()).unwrap();
        assert!(lipschitz(&id).unwrap().value() < 1e-7);

        // A single-site Pauli has constant two, and only that site deviates.
        let z0 = Observable::new(
            kron(&crate::quantum::pauli_z(), &ComplexMatrix::identity(2)),
            shape.clone(),
        )
        .unwrap();
        let res = lipschitz(&z0).unwrap();
        assert!((res.value() - 2.0).abs() < 1e-6, "value {}", res.value());
        assert!((res.per_site()[0].deviation - 1.0).abs() < 1e-6);
        assert!(res.per_site()[1].deviation < 1e-6);

        // A single qubit's constant is its spectral spread.
        let z = Observable::new(crate::quantum::pauli_z(), FactorShape::qubits(1)).unwrap();
        assert!((lipschitz(&z).unwrap().value() - 2.0).abs() < 1e-6);

        // Global bound: never more than twice the distance to the
        // trace-centered identity.
        let a = random_observable(&shape, 53).unwrap();
        let lip = lipschitz(&a).unwrap();
        let centered = a
            .matrix()
            .sub(&ComplexMatrix::identity(4).scale_re(a.matrix().trace().re / 4.0));
        assert!(lip.value() <= 2.0 * operator_norm(&centered).unwrap() + 1e-6);
        for (site, per) in lip.per_site().iter().enumerate() {
            let lifted = lift_on_rest(per.minimizer.matrix(), a.shape(), site).unwrap();
            let dev = operator_norm(&a.matrix().sub(&lifted)).unwrap();
            assert!((dev - per.deviation).abs() < 1e-9);
        }
    }

    #[test]
    fn distance_is_sandwiched_by_trace_distance() {
        for seed in [61u64, 62] {
            let shape = FactorShape::qubits(2);
            let rho = random_state(&shape, 4, seed).unwrap();
            let sigma = random_state(&shape, 3, seed + 100).unwrap();
            let value = w1(&rho, &sigma).unwrap().value();
            let td = trace_distance(&rho, &sigma).unwrap();
            assert!(td <= value + 1e-6, "trace distance {} vs w1 {}", td, value);
            assert!(value <= 2.0 * td + 1e-6, "w1 {} vs scaled trace distance {}", value, td);
        }
    }

    #[test]
    fn triangle_inequality_on_a_random_triple() {
        let shape = FactorShape::qubits(2);
        let a = random_state(&shape, 4, 71).unwrap();
        let b = random_state(&shape, 4, 72).unwrap();
        let c = random_state(&shape, 4, 73).unwrap();
        let ab = w1(&a, &b).unwrap().value();
        let bc = w1(&b, &c).unwrap().value();
        let ac = w1(&a, &c).unwrap().value();
        assert!(ac <= ab + bc + 1e-6);
    }

    #[test]
    fn qubit_permutation_preserves_the_distance() {
        let shape = FactorShape::qubits(2);
        let rho = random_state(&shape, 4, 81).unwrap();
        let sigma = random_state(&shape, 4, 82).unwrap();
        let swap = ComplexMatrix::from_real(
            4,
            4,
            &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let permute = |s: &DensityOperator| {
            DensityOperator::new(swap.matmul(s.matrix()).matmul(&swap), shape.clone()).unwrap()
        };
        let before = w1(&rho, &sigma).unwrap().value();
        let after = w1(&permute(&rho), &permute(&sigma)).unwrap().value();
        assert!((before - after).abs() < 1e-6, "{} vs {}", before, after);
    }

    #[test]
    fn local_unitary_rotation_preserves_the_distance() {
        let shape = FactorShape::qubits(2);
        let rho = random_state(&shape, 4, 91).unwrap();
        let sigma = random_state(&shape, 4, 92).unwrap();
        // Eigenvectors of a random Hermitian matrix form a unitary.
        let u = random_observable(&FactorShape::qubits(1), 93).unwrap().matrix().eigh().unwrap().vectors;
        let full = place_on_sites(&u, &shape, &[1]).unwrap();
        let rotate = |s: &DensityOperator| {
            DensityOperator::new(
                full.matmul(s.matrix()).matmul(&full.dagger()).hermitize(),
                shape.clone(),
            )
            .unwrap()
        };
        let before = w1(&rho, &sigma).unwrap().value();
        let after = w1(&rotate(&rho), &rotate(&sigma)).unwrap().value();
        assert!((before - after).abs() < 1e-6, "{} vs {}", before, after);
    }

    #[test]
    fn product_states_add_across_the_cut() {
        let one = FactorShape::qubits(1);
        let ra = random_state(&one, 2, 101).unwrap();
        let rb = random_state(&one, 2, 102).unwrap();
        let sa = random_state(&one, 2, 103).unwrap();
        let sb = random_state(&one, 2, 104).unwrap();
        let two = FactorShape::qubits(2);
        let rho = DensityOperator::new(kron(ra.matrix(), rb.matrix()), two.clone()).unwrap();
        let sigma = DensityOperator::new(kron(sa.matrix(), sb.matrix()), two).unwrap();
        let joint = w1(&rho, &sigma).unwrap().value();
        let split = w1(&ra, &sa).unwrap().value() + w1(&rb, &sb).unwrap().value();
        assert!((joint - split).abs() < 1e-6, "joint {} split {}", joint, split);
    }

    #[test]
    fn distance_is_superadditive_across_marginals() {
        let shape = FactorShape::qubits(2);
        let rho = random_state(&shape, 4, 111).unwrap();
        let sigma = random_state(&shape, 4, 112).unwrap();
        let joint = w1(&rho, &sigma).unwrap().value();
        let first =
            w1(&rho.reduce(&[1]).unwrap(), &sigma.reduce(&[1]).unwrap()).unwrap().value();
        let second =
            w1(&rho.reduce(&[0]).unwrap(), &sigma.reduce(&[0]).unwrap()).unwrap().value();
        assert!(joint >= first + second - 1e-6, "joint {} parts {} + {}", joint, first, second);
    }

    #[test]
    fn neighbor_states_stay_within_unit_distance() {
        let shape = FactorShape::qubits(2);
        let rho = random_state(&shape, 4, 121).unwrap();
        let sigma = neighbor_of(&rho, 1, 122).unwrap();
        let value = neighbor_bound(&rho, &sigma, 1).unwrap();
        assert!(value <= 1.0 + 1e-6);
        assert!(value > 1e-6, "perturbation should move the state");

        // Generic pairs do not satisfy the marginal condition.
        let tau = random_state(&shape, 4, 123).unwrap();
        assert!(matches!(
            neighbor_bound(&rho, &tau, 1),
            Err(Error::MarginalMismatch { .. })
        ));
    }

    #[test]
    fn local_channel_moves_states_proportionally_to_locality() {
        let shape = FactorShape::qubits(3);
        let rho = random_state(&shape, 8, 131).unwrap();

        // No sites: the identity, which moves nothing.
        let trivial = KrausChannel::identity(1);
        assert!(local_channel_bound(&trivial, &[], &rho).unwrap() < 1e-9);

        // One site: at most two, and at least the actual distance moved.
        let phi = random_channel(2, 2, 2, 132).unwrap();
        let bound = local_channel_bound(&phi, &[1], &rho).unwrap();
        assert!(bound <= 2.0 + 1e-6);
        let moved = phi.embed_at(&shape, 1).unwrap().apply(&rho, shape.clone()).unwrap();
        let actual = w1(&rho, &moved).unwrap().value();
        assert!(actual <= bound + 1e-6, "distance {} exceeds certificate {}", actual, bound);

        // All sites of a two-qubit state: at most four.
        let two = FactorShape::qubits(2);
        let tau = random_state(&two, 4, 133).unwrap();
        let big = random_channel(4, 4, 3, 134).unwrap();
        let all = local_channel_bound(&big, &[0, 1], &tau).unwrap();
        assert!(all <= 4.0 + 1e-6);
    }

    #[test]
    fn contraction_estimates_bracket_known_channels() {
        let shape = FactorShape::qubits(2);

        // The identity never contracts: every sampled ratio is one.
        let id = KrausChannel::identity(4);
        let res = contraction_lower_bound(&id, 4, 141).unwrap();
        assert!(res.lower >= 1.0 - 1e-6, "identity lower bound {}", res.lower);
        assert!((res.upper - 2.0).abs() < 1e-12);
        assert!(res.samples > 0);

        // A constant channel sends every pair to distance zero.
        let target = DensityOperator::maximally_mixed(shape.clone());
        let constant = KrausChannel::constant(&target, 4).unwrap();
        let res = contraction_lower_bound(&constant, 4, 142).unwrap();
        assert!(res.lower <= 1e-9, "constant channel lower bound {}", res.lower);

        // A unitary on one site keeps the distance, so the factor is one.
        let u = random_observable(&FactorShape::qubits(1), 143).unwrap().matrix().eigh().unwrap().vectors;
        let rotation = KrausChannel::unitary(u).unwrap().embed_at(&shape, 0).unwrap();
        let res = contraction_lower_bound(&rotation, 4, 144).unwrap();
        assert!(res.lower >= 1.0 - 1e-6, "unitary lower bound {}", res.lower);
    }

    #[test]
    fn rejects_unsupported_shapes() {
        let qudit = DensityOperator::maximally_mixed(FactorShape::new(vec![4]).unwrap());
        assert!(matches!(w1(&qudit, &qudit), Err(Error::ShapeMismatch { .. })));

        let big = DensityOperator::maximally_mixed(FactorShape::qubits(5));
        assert!(matches!(w1(&big, &big), Err(Error::InvalidArgument { .. })));

        let a = DensityOperator::maximally_mixed(FactorShape::qubits(1));
        let b = DensityOperator::maximally_mixed(FactorShape::qubits(2));
        assert!(w1(&a, &b).is_err());

        let obs = random_observable(&FactorShape::new(vec![3]).unwrap(), 151).unwrap();
        assert!(lipschitz(&obs).is_err());
    }
}
