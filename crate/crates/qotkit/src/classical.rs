//! Discrete optimal transport on finite sets: the Kantorovich primal and
//! dual, Wasserstein-p costs, classical divergences, and the Hamming-cube
//! W1 oracle used to cross-check the quantum order-1 distance on diagonal
//! states.
//!
//! The Kantorovich problem is solved as a dense LP through the conic
//! solver's nonnegative block. The largest instances this crate meets are
//! 64-point cubes (4096 transport variables), which the dense interior-point
//! method handles comfortably; no network simplex is needed. Zero-mass
//! points are presolved away and one-point marginals short-circuit to the
//! unique coupling, so the LP the solver sees always has a strictly
//! feasible interior.
//!
//! Binary strings index cube distributions in big-endian bit order (bit 1 is
//! the most significant), matching the computational-basis ordering of the
//! quantum layer.

use crate::conic::{BlockKind, ConicProgram, SolveOptions, SolveStatus};
use crate::error::{Error, Result};

/// Tolerances the LP is solved to. Tighter than the solver defaults because
/// the classical values serve as oracles for quantum computations with their
/// own 1e-6-scale budgets.
fn lp_options() -> SolveOptions {
    SolveOptions { max_iters: 200, gap_tol: 1e-10, feas_tol: 1e-10, step_fraction: 0.98 }
}

/// A probability distribution on a finite set.
///
/// Entries within `-1e-12` of zero are clamped to zero; anything more
/// negative is rejected, as is a total mass away from 1 by more than `1e-9`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::NotADistribution { reason: "empty support".into() });
        }
        let mut clamped = probs;
        for p in clamped.iter_mut() {
            if !p.is_finite() {
                return Err(Error::NotADistribution { reason: "non-finite probability".into() });
            }
            if *p < 0.0 {
                if *p < -1e-12 {
                    return Err(Error::NotADistribution {
                        reason: format!("negative probability {}", p),
                    });
                }
                *p = 0.0;
            }
        }
        let sum: f64 = clamped.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotADistribution { reason: format!("total mass {} is not 1", sum) });
        }
        Ok(Self { probs: clamped })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::NotADistribution { reason: "empty support".into() });
        }
        Ok(Self { probs: vec![1.0 / n as f64; n] })
    }

    pub fn delta(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::InvalidArgument { reason: format!("delta index {} out of range {}", at, n) });
        }
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Ok(Self { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// A dense cost matrix `c(x, y)` between two finite sets.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                reason: format!("cost matrix {}x{} with {} entries", rows, cols, data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument { reason: "non-finite cost entry".into() });
        }
        Ok(Self { rows, cols, data })
    }

    /// The Hamming distance on `{0,1}^bits`, indexed in big-endian bit order.
    pub fn hamming(bits: usize) -> Self {
        let n = 1usize << bits;
        let mut data = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                data[x * n + y] = (x ^ y).count_ones() as f64;
            }
        }
        Self { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Verifies the metric axioms (square shape, symmetry, zero diagonal,
    /// triangle inequality) within `1e-9`.
    pub fn check_metric(&self) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::NonMetricCost { reason: "metric cost must be square".into() });
        }
        let n = self.rows;
        for i in 0..n {
            if self.get(i, i).abs() > 1e-9 {
                return Err(Error::NonMetricCost { reason: format!("nonzero diagonal at {}", i) });
            }
            for j in 0..n {
                if self.get(i, j) < -1e-9 {
                    return Err(Error::NonMetricCost { reason: "negative distance".into() });
                }
                if (self.get(i, j) - self.get(j, i)).abs() > 1e-9 {
                    return Err(Error::NonMetricCost { reason: format!("asymmetry at ({}, {})", i, j) });
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if self.get(i, j) > self.get(i, k) + self.get(k, j) + 1e-9 {
                        return Err(Error::NonMetricCost {
                            reason: format!("triangle inequality fails via {} for ({}, {})", k, i, j),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Entrywise power of the costs.
    pub fn powf(&self, p: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v.powf(p)).collect() }
    }
}

/// A transport plan: a nonnegative matrix whose row sums are the source
/// distribution and column sums the target, within `1e-8`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CouplingMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, sigma: &[f64], rho: &[f64]) -> Result<Self> {
        if data.len() != rows * cols || sigma.len() != rows || rho.len() != cols {
            return Err(Error::ShapeMismatch { reason: "coupling shape mismatch".into() });
        }
        let mut worst = 0.0_f64;
        for v in &data {
            if *v < -1e-10 {
                return Err(Error::NotATransportPlan { deviation: -*v });
            }
        }
        for i in 0..rows {
            let row: f64 = data[i * cols..(i + 1) * cols].iter().sum();
            worst = worst.max((row - sigma[i]).abs());
        }
        for j in 0..cols {
            let col: f64 = (0..rows).map(|i| data[i * cols + j]).sum();
            worst = worst.max((col - rho[j]).abs());
        }
        if worst > 1e-8 {
            return Err(Error::NotATransportPlan { deviation: worst });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Total transport cost `sum c(x,y) pi(x,y)`.
    pub fn cost_against(&self, cost: &CostMatrix) -> f64 {
        self.data.iter().zip(&cost.data).map(|(p, c)| p * c).sum()
    }
}

/// Raw LP output before plan assembly: optimal value estimate, plan entries
/// on the reduced index sets, and the dual multipliers.
struct LpOutcome {
    plan: Vec<f64>,
    dual_rows: Vec<f64>,
    dual_cols: Vec<f64>,
}

/// Solves `min <c, pi>` over couplings of the reduced (all-positive)
/// marginals. The last column constraint is dropped (implied by the others),
/// keeping the constraint matrix full-rank.
fn transport_lp(sigma: &[f64], rho: &[f64], cost: impl Fn(usize, usize) -> f64) -> Result<LpOutcome> {
    let n = sigma.len();
    let m = rho.len();
    let nm = n * m;
    let mut prog = ConicProgram::new(vec![BlockKind::Nonneg(nm)])?;
    let mut obj = vec![0.0; nm];
    for i in 0..n {
        for j in 0..m {
            obj[i * m + j] = cost(i, j);
        }
    }
    prog.set_objective(0, obj)?;
    for i in 0..n {
        let mut row = vec![0.0; nm];
        for j in 0..m {
            row[i * m + j] = 1.0;
        }
        prog.add_constraint(vec![(0, row)], sigma[i])?;
    }
    for j in 0..m - 1 {
        let mut col = vec![0.0; nm];
        for i in 0..n {
            col[i * m + j] = 1.0;
        }
        prog.add_constraint(vec![(0, col)], rho[j])?;
    }
    let sol = prog.solve(&lp_options());
    if sol.status != SolveStatus::Optimal {
        return Err(Error::SolverFailure { status: sol.status });
    }
    let mut dual_cols: Vec<f64> = sol.dual_y[n..n + m - 1].to_vec();
    dual_cols.push(0.0);
    Ok(LpOutcome { plan: sol.primal_blocks[0].clone(), dual_rows: sol.dual_y[..n].to_vec(), dual_cols })
}

/// Presolve bookkeeping: indices with positive mass.
fn support(probs: &[f64]) -> Vec<usize> {
    probs.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, _)| i).collect()
}

/// The optimal transport cost between `sigma` and `rho` under `cost`,
/// together with an optimal coupling.
pub fn kantorovich(sigma: &Distribution, rho: &Distribution, cost: &CostMatrix) -> Result<(f64, CouplingMatrix)> {
    let (value, plan, _, _) = kantorovich_with_duals(sigma, rho, cost)?;
    Ok((value, plan))
}

/// As [`kantorovich`], additionally returning the LP dual multipliers for
/// the row and column constraints (zeros on presolved-away points).
fn kantorovich_with_duals(
    sigma: &Distribution,
    rho: &Distribution,
    cost: &CostMatrix,
) -> Result<(f64, CouplingMatrix, Vec<f64>, Vec<f64>)> {
    let n = sigma.len();
    let m = rho.len();
    if cost.rows != n {
        return Err(Error::DimensionMismatch { expected: cost.rows, actual: n });
    }
    if cost.cols != m {
        return Err(Error::DimensionMismatch { expected: cost.cols, actual: m });
    }
    let rows = support(sigma.probs());
    let cols = support(rho.probs());
    let mut plan = vec![0.0; n * m];
    let mut dual_rows = vec![0.0; n];
    let mut dual_cols = vec![0.0; m];

    if rows.len() == 1 {
        // All source mass sits at one point: the coupling is forced.
        let i = rows[0];
        for (j, &pj) in rho.probs().iter().enumerate() {
            plan[i * m + j] = pj;
        }
    } else if cols.len() == 1 {
        let j = cols[0];
        for (i, &pi) in sigma.probs().iter().enumerate() {
            plan[i * m + j] = pi;
        }
    } else {
        let red_sigma: Vec<f64> = rows.iter().map(|&i| sigma.probs()[i]).collect();
        let red_rho: Vec<f64> = cols.iter().map(|&j| rho.probs()[j]).collect();
        let out = transport_lp(&red_sigma, &red_rho, |a, b| cost.get(rows[a], cols[b]))?;
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                plan[i * m + j] = out.plan[a * cols.len() + b].max(0.0);
            }
        }
        for (a, &i) in rows.iter().enumerate() {
            dual_rows[i] = out.dual_rows[a];
        }
        for (b, &j) in cols.iter().enumerate() {
            dual_cols[j] = out.dual_cols[b];
        }
    }
    let coupling = CouplingMatrix::new(n, m, plan, sigma.probs(), rho.probs())?;
    let value = coupling.cost_against(cost);
    Ok((value, coupling, dual_rows, dual_cols))
}

/// Kantorovich-Rubinstein dual: the W1 value under the metric `d` together
/// with an exactly 1-Lipschitz potential `f` satisfying
/// `sum f (sigma - rho) = value`, normalized so `f[0] = 0`.
///
/// The potential is recovered from the LP column multipliers by an explicit
/// inf-convolution with `d` (a d-transform), which is 1-Lipschitz by
/// construction regardless of solver noise.
pub fn dual_w1(sigma: &Distribution, rho: &Distribution, d: &CostMatrix) -> Result<(f64, Vec<f64>)> {
    d.check_metric()?;
    if sigma.len() != rho.len() || sigma.len() != d.rows {
        return Err(Error::DimensionMismatch { expected: d.rows, actual: sigma.len() });
    }
    let n = sigma.len();
    let (_, _, _, dual_cols) = kantorovich_with_duals(sigma, rho, d)?;
    let cols = support(rho.probs());
    let mut f = vec![0.0; n];
    if cols.is_empty() {
        return Err(Error::NotADistribution { reason: "target distribution has no support".into() });
    }
    for (x, fx) in f.iter_mut().enumerate() {
        *fx = cols
            .iter()
            .map(|&j| d.get(x, j) - dual_cols[j])
            .fold(f64::INFINITY, f64::min);
    }
    let f0 = f[0];
    for fx in f.iter_mut() {
        *fx -= f0;
    }
    let value: f64 = f
        .iter()
        .zip(sigma.probs().iter().zip(rho.probs()))
        .map(|(fx, (s, r))| fx * (s - r))
        .sum();
    Ok((value, f))
}

/// Wasserstein cost of order `p` under the metric `d`: for `p >= 1` the
/// rooted value `(min <d^p, pi>)^{1/p}`, for `p` in (0,1) the raw minimum
/// `min <d^p, pi>` (which is itself a metric there).
pub fn wasserstein_p(sigma: &Distribution, rho: &Distribution, d: &CostMatrix, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidArgument { reason: format!("Wasserstein order p = {} must be positive", p) });
    }
    d.check_metric()?;
    let (value, _) = kantorovich(sigma, rho, &d.powf(p))?;
    if p >= 1.0 {
        Ok(value.max(0.0).powf(1.0 / p))
    } else {
        Ok(value)
    }
}

fn check_same_len(sigma: &Distribution, rho: &Distribution) -> Result<usize> {
    if sigma.len() != rho.len() {
        return Err(Error::DimensionMismatch { expected: sigma.len(), actual: rho.len() });
    }
    Ok(sigma.len())
}

/// Total variation distance `max |sigma(A) - rho(A)| = (1/2) l1-distance`.
pub fn tv(sigma: &Distribution, rho: &Distribution) -> Result<f64> {
    check_same_len(sigma, rho)?;
    Ok(0.5 * sigma.probs().iter().zip(rho.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Hellinger distance `sqrt((1/2) sum (sqrt sigma - sqrt rho)^2)`, in [0,1].
pub fn hellinger(sigma: &Distribution, rho: &Distribution) -> Result<f64> {
    check_same_len(sigma, rho)?;
    let sq: f64 = sigma
        .probs()
        .iter()
        .zip(rho.probs())
        .map(|(a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum();
    Ok((0.5 * sq).max(0.0).sqrt().min(1.0))
}

/// Kullback-Leibler divergence `sum sigma ln(sigma/rho)` in nats;
/// `+infinity` when the support of `sigma` is not contained in that of `rho`.
pub fn kl(sigma: &Distribution, rho: &Distribution) -> Result<f64> {
    check_same_len(sigma, rho)?;
    let mut total = 0.0;
    for (&p, &q) in sigma.probs().iter().zip(rho.probs()) {
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += p * (p / q).ln();
    }
    Ok(total.max(0.0))
}

/// W1 on the Hamming cube `{0,1}^n`: Kantorovich transport under the
/// Hamming distance. Indices are bit strings in big-endian order.
pub fn hamming_w1(p: &Distribution, q: &Distribution) -> Result<f64> {
    let n = check_same_len(p, q)?;
    if !n.is_power_of_two() {
        return Err(Error::InvalidArgument {
            reason: format!("cube distribution needs power-of-two support, got {}", n),
        });
    }
    let bits = n.trailing_zeros() as usize;
    let (value, _) = kantorovich(p, q, &CostMatrix::hamming(bits))?;
    Ok(value)
}
