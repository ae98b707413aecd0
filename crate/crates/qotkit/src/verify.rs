//! Randomized verification of the inequality ladder connecting trace
//! distance, transport distance, relative entropy, and spectral
//! concentration: Pinsker, Marton, eigenvalue concentration with the Gibbs
//! moment bound, entropy continuity, data processing, and the quadratic
//! cost properties.
//!
//! Every suite is deterministic given its `(seed, params)`: each trial's
//! randomness derives from the pair `(seed, trial index)`, so reports are
//! reproducible and independent of scheduling. Violations are recorded with
//! the trial seed and an input digest; trials whose entropic quantities are
//! infinite are skipped and counted, never treated as violations.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classical::{kl, Distribution};
use crate::error::{Error, Result};
use crate::linalg::{kron, ComplexMatrix, FactorShape};
use crate::quadratic::{cost_operator, dquad, dquad_lower_bound, self_cost_identity};
use crate::quantum::{
    helstrom_projector, random_channel, random_observable, random_state, rel_entropy,
    trace_distance, vn_entropy, DensityOperator, Observable,
};
use crate::w1::{lipschitz, max_qubits, w1};

/// Slack for the Pinsker and Helstrom-monotonicity checks.
const PINSKER_TOL: f64 = 1e-7;
/// Slack for the Marton transport-entropy check.
const MARTON_TOL: f64 = 1e-6;
/// Multiplicative slack on the Gibbs moment bound.
const GIBBS_REL_SLACK: f64 = 1e-9;
/// Slack for the entropy-continuity check.
const ENTROPY_TOL: f64 = 1e-6;
/// Slack for trace-distance monotonicity.
const DP_TRACE_TOL: f64 = 1e-8;
/// Slack for relative-entropy monotonicity.
const DP_ENTROPY_TOL: f64 = 1e-6;
/// Slack for the quadratic-cost equalities and lower bound.
const QUAD_TOL: f64 = 1e-6;
/// Slack for the quadratic-cost modified triangle inequality.
const QUAD_TRIANGLE_TOL: f64 = 1e-5;
/// Smallest eigenvalue guaranteed for each Marton product factor.
const MARTON_FACTOR_FLOOR: f64 = 0.1;

/// Distance evaluator used by [`suite_marton_with`]. The production choice
/// is the semidefinite transport distance; substituting a deliberately
/// wrong evaluator demonstrates the suites' detection power in tests.
pub type StateDistance = dyn Fn(&DensityOperator, &DensityOperator) -> Result<f64>;

/// Binary entropy `-(1-x) ln(1-x) - x ln x` in nats, zero at both
/// endpoints, maximal (`ln 2`) at one half. Inputs outside `[0, 1]` are
/// clamped.
pub fn binary_entropy(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 || x == 1.0 {
        return 0.0;
    }
    -(1.0 - x) * (1.0 - x).ln() - x * x.ln()
}

/// One completed trial: the worst check of the trial as a left/right pair
/// and its margin (positive means the check failed beyond tolerance).
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// A trial whose worst check exceeded its tolerance.
#[derive(Debug, Clone)]
pub struct Violation {
    pub trial: usize,
    pub seed: u64,
    pub margin: f64,
    pub inputs_digest: String,
}

/// Outcome of one suite run; reproducible from the suite name, seed, and
/// parameters.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: String,
    pub trials: usize,
    pub params: String,
    pub violations: Vec<Violation>,
    /// Largest `lhs - rhs - tolerance` over all completed trials; negative
    /// when every check held with room to spare.
    pub worst_margin: f64,
    /// Trials skipped because an entropic quantity was infinite.
    pub skipped: usize,
    /// Free-form observations (e.g. bound comparisons), deterministic.
    pub notes: Vec<String>,
    pub records: Vec<TrialRecord>,
}

impl SuiteReport {
    /// True when no trial violated its checks.
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// One CSV row per completed trial: `trial,seed,lhs,rhs,margin`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,seed,lhs,rhs,margin\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{:.17e},{:.17e},{:.17e}\n",
                r.trial, r.seed, r.lhs, r.rhs, r.margin
            ));
        }
        out
    }
}

/// Accumulates per-trial results into a [`SuiteReport`].
struct Collector {
    suite: &'static str,
    trials: usize,
    params: String,
    records: Vec<TrialRecord>,
    violations: Vec<Violation>,
    worst: f64,
    skipped: usize,
    notes: Vec<String>,
}

impl Collector {
    fn new(suite: &'static str, trials: usize, params: String) -> Self {
        Self {
            suite,
            trials,
            params,
            records: Vec::with_capacity(trials),
            violations: Vec::new(),
            worst: f64::NEG_INFINITY,
            skipped: 0,
            notes: Vec::new(),
        }
    }

    /// Folds a trial's checks `(lhs, rhs, tolerance)` into one record,
    /// keeping the check with the largest margin.
    fn finish_trial(&mut self, trial: usize, seed: u64, digest: String, checks: &[(f64, f64, f64)]) {
        let mut margin = f64::NEG_INFINITY;
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for &(l, r, tol) in checks {
            let m = l - r - tol;
            if m > margin {
                margin = m;
                lhs = l;
                rhs = r;
            }
        }
        self.records.push(TrialRecord { trial, seed, lhs, rhs, margin });
        if margin > self.worst {
            self.worst = margin;
        }
        if margin > 0.0 {
            self.violations.push(Violation { trial, seed, margin, inputs_digest: digest });
        }
    }

    fn skip(&mut self) {
        self.skipped += 1;
    }

    fn note(&mut self, text: String) {
        self.notes.push(text);
    }

    fn report(self) -> SuiteReport {
        SuiteReport {
            suite: self.suite.to_string(),
            trials: self.trials,
            params: self.params,
            violations: self.violations,
            worst_margin: self.worst,
            skipped: self.skipped,
            notes: self.notes,
            records: self.records,
        }
    }
}

/// Deterministic 64-bit FNV-1a digest of the entries of the trial inputs,
/// rendered as hex.
fn input_digest(parts: &[&ComplexMatrix]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for m in parts {
        for v in m.data() {
            for b in v.re.to_le_bytes().iter().chain(v.im.to_le_bytes().iter()) {
                h ^= *b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    format!("{:016x}", h)
}

/// Derives the RNG seed of one trial from the suite seed and trial index
/// (a SplitMix64 mix), so trials are independent of scheduling.
fn trial_seed(seed: u64, trial: usize) -> u64 {
    let mut z = seed ^ (trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Validates a qubit count for suite parameters.
fn check_qubits(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument { reason: "at least one qubit is required".into() });
    }
    let cap = max_qubits();
    if n > cap {
        return Err(Error::InvalidArgument {
            reason: format!("{} qubits exceed the configured cap of {}", n, cap),
        });
    }
    Ok(())
}

/// Pinsker's inequality and the Helstrom measurement monotonicity step.
///
/// Per trial two random full-rank states are drawn; the suite checks
/// `trace_distance <= sqrt(rel_entropy / 2)` and that the binary
/// distributions induced by the optimal discrimination test have no more
/// relative entropy than the states themselves.
pub fn suite_pinsker(trials: usize, seed: u64, n: usize) -> Result<SuiteReport> {
    check_qubits(n)?;
    let shape = FactorShape::qubits(n);
    let d = shape.total();
    let mut col = Collector::new("pinsker", trials, format!("n={}", n));
    for t in 0..trials {
        let ts = trial_seed(seed, t);
        let mut rng = ChaCha8Rng::seed_from_u64(ts);
        let rho = random_state(&shape, d, rng.next_u64())?;
        let sigma = random_state(&shape, d, rng.next_u64())?;
        let s = rel_entropy(&rho, &sigma)?;
        if !s.is_finite() {
            col.skip();
            continue;
        }
        let td = trace_distance(&rho, &sigma)?;
        let test = helstrom_projector(&rho, &sigma)?;
        let pr = test.trace_product_re(rho.matrix()).clamp(0.0, 1.0);
        let ps = test.trace_product_re(sigma.matrix()).clamp(0.0, 1.0);
        let measured = kl(
            &Distribution::new(vec![pr, 1.0 - pr])?,
            &Distribution::new(vec![ps, 1.0 - ps])?,
        )?;
        if !measured.is_finite() {
            col.skip();
            continue;
        }
        let digest = input_digest(&[rho.matrix(), sigma.matrix()]);
        col.finish_trial(
            t,
            ts,
            digest,
            &[(td, (0.5 * s).sqrt(), PINSKER_TOL), (measured, s, PINSKER_TOL)],
        );
    }
    Ok(col.report())
}

/// The transport-entropy inequality against a product reference state,
/// with the distance evaluator injected (see [`StateDistance`]).
pub fn suite_marton_with(
    distance: &StateDistance,
    trials: usize,
    seed: u64,
    n: usize,
) -> Result<SuiteReport> {
    check_qubits(n)?;
    let shape = FactorShape::qubits(n);
    let d = shape.total();
    let one = FactorShape::qubits(1);
    let mut col = Collector::new("marton", trials, format!("n={}", n));
    for t in 0..trials {
        let ts = trial_seed(seed, t);
        let mut rng = ChaCha8Rng::seed_from_u64(ts);
        let rho = random_state(&shape, d, rng.next_u64())?;
        // Product reference with well-conditioned factors: mixing with the
        // maximally mixed qubit floors every factor eigenvalue.
        let mut product = ComplexMatrix::identity(1);
        for _ in 0..n {
            let raw = random_state(&one, 2, rng.next_u64())?;
            let factor = raw
                .matrix()
                .scale_re(1.0 - 2.0 * MARTON_FACTOR_FLOOR)
                .add(&ComplexMatrix::identity(2).scale_re(MARTON_FACTOR_FLOOR));
            product = kron(&product, &factor);
        }
        let sigma = DensityOperator::new(product, shape.clone())?;
        let s = rel_entropy(&rho, &sigma)?;
        if !s.is_finite() {
            col.skip();
            continue;
        }
        let w = distance(&rho, &sigma)?;
        let digest = input_digest(&[rho.matrix(), sigma.matrix()]);
        col.finish_trial(t, ts, digest, &[(w, (0.5 * n as f64 * s).sqrt(), MARTON_TOL)]);
    }
    Ok(col.report())
}

/// [`suite_marton_with`] using the semidefinite transport distance.
pub fn suite_marton(trials: usize, seed: u64, n: usize) -> Result<SuiteReport> {
    suite_marton_with(&|a, b| Ok(w1(a, b)?.value()), trials, seed, n)
}

/// Spectral concentration of normalized observables around the maximally
/// mixed state, and the Gibbs moment bound.
///
/// Per trial a random observable is centered to zero trace and rescaled to
/// Lipschitz constant at most one; the suite counts eigenvalues above
/// `delta * sqrt(n) / 2` against `2^n exp(-delta^2 / 2)` for each grid
/// point, and checks `tr exp(tA) <= 2^n exp(n t^2 / 8)` for
/// `t` in `{±1/2, ±1, ±2}`.
pub fn suite_concentration(
    trials: usize,
    seed: u64,
    n: usize,
    deltas: &[f64],
) -> Result<SuiteReport> {
    check_qubits(n)?;
    let shape = FactorShape::qubits(n);
    let d = shape.total();
    let mut col = Collector::new(
        "concentration",
        trials,
        format!("n={} deltas={:?}", n, deltas),
    );
    for t in 0..trials {
        let ts = trial_seed(seed, t);
        let mut rng = ChaCha8Rng::seed_from_u64(ts);
        let raw = random_observable(&shape, rng.next_u64())?;
        let centered = raw
            .matrix()
            .sub(&ComplexMatrix::identity(d).scale_re(raw.matrix().trace().re / d as f64));
        let lip = lipschitz(&Observable::new(centered.clone(), shape.clone())?)?.value();
        if lip <= 1e-12 {
            col.skip();
            continue;
        }
        let a = centered.scale_re(1.0 / lip.max(1.0));
        let eigs = a.eigh()?.values;
        let mut checks = Vec::new();
        for &delta in deltas {
            let threshold = delta * (n as f64).sqrt() / 2.0;
            let count = eigs.iter().filter(|&&l| l > threshold).count() as f64;
            let bound = d as f64 * (-delta * delta / 2.0).exp();
            checks.push((count, bound, 0.0));
        }
        for &tp in &[0.5, -0.5, 1.0, -1.0, 2.0, -2.0] {
            let moment: f64 = eigs.iter().map(|&l| (tp * l).exp()).sum();
            let bound = d as f64 * (n as f64 * tp * tp / 8.0).exp() * (1.0 + GIBBS_REL_SLACK);
            checks.push((moment, bound, 0.0));
        }
        let digest = input_digest(&[&a]);
        col.finish_trial(t, ts, digest, &checks);
    }
    Ok(col.report())
}

/// Entropy continuity in the transport distance, compared against the
/// trace-distance (Fannes-Audenaert-style) bound.
///
/// Per trial checks `|S(rho) - S(sigma)| <= n h2(w/n) + w ln 3` where `w`
/// is the transport distance; the trace-distance bound
/// `h2(T) + T ln(2^n - 1)` is evaluated for comparison and the report notes
/// how often the transport bound is the tighter one.
pub fn suite_entropy_continuity(trials: usize, seed: u64, n: usize) -> Result<SuiteReport> {
    check_qubits(n)?;
    let shape = FactorShape::qubits(n);
    let d = shape.total();
    let mut col = Collector::new("entropy", trials, format!("n={}", n));
    let mut tighter = 0usize;
    let mut completed = 0usize;
    for t in 0..trials {
        let ts = trial_seed(seed, t);
        let mut rng = ChaCha8Rng::seed_from_u64(ts);
        let rho = random_state(&shape, d, rng.next_u64())?;
        let sigma = random_state(&shape, d, rng.next_u64())?;
        let w = w1(&rho, &sigma)?.value();
        let lhs = (vn_entropy(&rho)? - vn_entropy(&sigma)?).abs();
        let rhs = n as f64 * binary_entropy(w / n as f64) + w * 3f64.ln();
        if d > 2 {
            let td = trace_distance(&rho, &sigma)?;
            let fannes = binary_entropy(td) + td * ((d - 1) as f64).ln();
            if rhs < fannes {
                tighter += 1;
            }
        }
        completed += 1;
        let digest = input_digest(&[rho.matrix(), sigma.matrix()]);
        col.finish_trial(t, ts, digest, &[(lhs, rhs, ENTROPY_TOL)]);
    }
    col.note(format!(
        "transport bound tighter than the trace-distance bound in {} of {} trials",
        tighter, completed
    ));
    Ok(col.report())
}

/// Monotonicity of trace distance and relative entropy under channels.
pub fn suite_data_processing(trials: usize, seed: u64, n: usize) -> Result<SuiteReport> {
    check_qubits(n)?;
    let shape = FactorShape::qubits(n);
    let d = shape.total();
    let mut col = Collector::new("dataproc", trials, format!("n={}", n));
    for t in 0..trials {
        let ts = trial_seed(seed, t);
        let mut rng = ChaCha8Rng::seed_from_u64(ts);
        let rho = random_state(&shape, d, rng.next_u64())?;
        let sigma = random_state(&shape, d, rng.next_u64())?;
        let kraus = 2 + (t % 3);
        let phi = random_channel(d, d, kraus, rng.next_u64())?;
        let out_r = phi.apply(&rho, shape.clone())?;
        let out_s = phi.apply(&sigma, shape.clone())?;
        let mut checks = vec![(
            trace_distance(&out_r, &out_s)?,
            trace_distance(&rho, &sigma)?,
            DP_TRACE_TOL,
        )];
        let s_in = rel_entropy(&rho, &sigma)?;
        let s_out = rel_entropy(&out_r, &out_s)?;
        if s_in.is_finite() && s_out.is_finite() {
            checks.push((s_out, s_in, DP_ENTROPY_TOL));
        } else {
            col.skip();
        }
        let digest = input_digest(&[rho.matrix(), sigma.matrix()]);
        col.finish_trial(t, ts, digest, &checks);
    }
    Ok(col.report())
}

/// The quadratic-cost properties on random instances: symmetry of the
/// optimal value, the averaged self-cost lower bound, agreement of the
/// self-distance with its closed form, and the modified triangle
/// inequality through an intermediate state.
pub fn suite_quadratic(
    trials: usize,
    seed: u64,
    dim: usize,
    observables: usize,
) -> Result<SuiteReport> {
    if !(2..=4).contains(&dim) {
        return Err(Error::InvalidArgument {
            reason: format!("dimension {} outside the supported range 2..=4", dim),
        });
    }
    if !(1..=3).contains(&observables) {
        return Err(Error::InvalidArgument {
            reason: format!("{} cost observables outside the supported range 1..=3", observables),
        });
    }
    let shape = FactorShape::new(vec![dim])?;
    let mut col = Collector::new(
        "quadratic",
        trials,
        format!("dim={} observables={}", dim, observables),
    );
    for t in 0..trials {
        let ts = trial_seed(seed, t);
        let mut rng = ChaCha8Rng::seed_from_u64(ts);
        let obs: Vec<Observable> = (0..observables)
            .map(|_| random_observable(&shape, rng.next_u64()))
            .collect::<Result<Vec<_>>>()?;
        let cost = cost_operator(obs, dim)?;
        let sigma = random_state(&shape, dim, rng.next_u64())?;
        let rho = random_state(&shape, dim, rng.next_u64())?;
        let tau = random_state(&shape, dim, rng.next_u64())?;

        let forward = dquad(&sigma, &rho, &cost)?;
        let backward = dquad(&rho, &sigma, &cost)?;
        let self_solved = dquad(&sigma, &sigma, &cost)?;
        let self_closed = self_cost_identity(&sigma, &cost)?;
        let to_mid = dquad(&sigma, &tau, &cost)?;
        let mid_self = dquad(&tau, &tau, &cost)?;
        let from_mid = dquad(&tau, &rho, &cost)?;

        let checks = [
            ((forward.value_squared - backward.value_squared).abs(), 0.0, QUAD_TOL),
            (dquad_lower_bound(&sigma, &rho, &cost)?, forward.value_squared, QUAD_TOL),
            ((self_solved.value_squared - self_closed).abs(), 0.0, QUAD_TOL),
            (
                forward.value(),
                to_mid.value() + mid_self.value() + from_mid.value(),
                QUAD_TRIANGLE_TOL,
            ),
        ];
        let digest = input_digest(&[sigma.matrix(), rho.matrix(), tau.matrix()]);
        col.finish_trial(t, ts, digest, &checks);
    }
    Ok(col.report())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{pauli_z, KrausChannel};

    #[test]
    fn binary_entropy_shape() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - 2f64.ln()).abs() < 1e-15);
        // Symmetric and positive inside the interval.
        assert!((binary_entropy(0.2) - binary_entropy(0.8)).abs() < 1e-15);
        assert!(binary_entropy(0.2) > 0.0);
        // Out-of-range inputs clamp.
        assert_eq!(binary_entropy(-0.3), 0.0);
        assert_eq!(binary_entropy(1.7), 0.0);
    }

    #[test]
    fn pinsker_suite_holds_on_random_trials() {
        let report = suite_pinsker(25, 7, 2).unwrap();
        assert!(report.passed(), "violations: {:?}", report.violations);
        assert_eq!(report.trials, 25);
        assert!(report.worst_margin <= 0.0);
    }

    #[test]
    fn marton_suite_holds_and_detects_a_broken_distance() {
        let honest = suite_marton(20, 11, 2).unwrap();
        assert!(honest.passed(), "violations: {:?}", honest.violations);

        // A distance inflated beyond the entropy bound must be caught.
        let inflated: &StateDistance = &|a, b| Ok(5.0 * w1(a, b)?.value());
        let broken = suite_marton_with(inflated, 20, 11, 2).unwrap();
        assert!(!broken.passed(), "inflated distance went unnoticed");
    }

    #[test]
    fn concentration_suite_holds_on_random_trials() {
        let report = suite_concentration(15, 13, 2, &[0.5, 1.0, 2.0]).unwrap();
        assert!(report.passed(), "violations: {:?}", report.violations);
    }

    #[test]
    fn concentration_closed_form_example() {
        // A = Z on one site of two, centered and normalized: Lipschitz
        // constant two before rescaling, eigenvalues ±1/2 afterwards, four
        // each. Counts above the thresholds follow directly.
        let n = 2usize;
        let half_z = kron(&pauli_z(), &ComplexMatrix::identity(2)).scale_re(0.5);
        let eigs = half_z.eigh().unwrap().values;
        for &(delta, expected) in &[(0.5f64, 2usize), (1.0, 0)] {
            let threshold = delta * (n as f64).sqrt() / 2.0;
            let count = eigs.iter().filter(|&&l| l > threshold).count();
            assert_eq!(count, expected, "delta {}", delta);
            let bound = 4.0 * (-delta * delta / 2.0).exp();
            assert!((count as f64) <= bound);
        }
    }

    #[test]
    fn entropy_suite_holds_and_reports_comparison() {
        let report = suite_entropy_continuity(15, 17, 2).unwrap();
        assert!(report.passed(), "violations: {:?}", report.violations);
        assert_eq!(report.notes.len(), 1);
    }

    #[test]
    fn data_processing_suite_holds_on_random_trials() {
        let report = suite_data_processing(20, 19, 2).unwrap();
        assert!(report.passed(), "violations: {:?}", report.violations);
    }

    #[test]
    fn data_processing_edge_channels() {
        // Identity channel: both sides equal. Constant channel: left side zero.
        let shape = FactorShape::qubits(1);
        let rho = random_state(&shape, 2, 23).unwrap();
        let sigma = random_state(&shape, 2, 24).unwrap();
        let id = KrausChannel::identity(2);
        let a = id.apply(&rho, shape.clone()).unwrap();
        let b = id.apply(&sigma, shape.clone()).unwrap();
        assert!(
            (trace_distance(&a, &b).unwrap() - trace_distance(&rho, &sigma).unwrap()).abs()
                < 1e-12
        );
        let constant =
            KrausChannel::constant(&DensityOperator::maximally_mixed(shape.clone()), 2).unwrap();
        let ca = constant.apply(&rho, shape.clone()).unwrap();
        let cb = constant.apply(&sigma, shape).unwrap();
        assert!(trace_distance(&ca, &cb).unwrap() < 1e-12);
    }

    #[test]
    fn quadratic_suite_holds_on_random_trials() {
        let report = suite_quadratic(8, 29, 2, 1).unwrap();
        assert!(report.passed(), "violations: {:?}", report.violations);
    }

    #[test]
    fn suites_are_deterministic() {
        let a = suite_pinsker(10, 31, 2).unwrap();
        let b = suite_pinsker(10, 31, 2).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.worst_margin.to_bits(), b.worst_margin.to_bits());
        assert_eq!(a.skipped, b.skipped);

        let c = suite_marton(6, 37, 2).unwrap();
        let d = suite_marton(6, 37, 2).unwrap();
        assert_eq!(c.to_csv(), d.to_csv());
    }

    #[test]
    fn suites_reject_bad_parameters() {
        assert!(suite_pinsker(5, 1, 0).is_err());
        assert!(suite_pinsker(5, 1, 99).is_err());
        assert!(suite_quadratic(5, 1, 9, 1).is_err());
        assert!(suite_quadratic(5, 1, 2, 0).is_err());
    }
}
