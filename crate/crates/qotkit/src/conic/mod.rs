//! Dense conic programming over semidefinite and nonnegative blocks.
//!
//! Programs are in primal standard form:
//!
//! ```text
//! minimize    sum_b <C_b, X_b>
//! subject to  sum_b <A_kb, X_b> = b_k   (k = 1..m)
//!             X_b in cone_b             (PSD or nonnegative orthant)
//! ```
//!
//! with the dual read off the same data. [`ConicProgram::solve`] runs a
//! Mehrotra-style predictor-corrector primal-dual interior-point method with
//! Nesterov-Todd scaling on the semidefinite blocks ([`ipm`]); everything is
//! dense, deterministic, and sized for blocks up to a few hundred rows.
//!
//! Complex Hermitian data enters through [`embed_hermitian`], which doubles
//! the dimension into a real symmetric block; [`HermitianProgram`] wraps the
//! bookkeeping so callers state their programs directly in complex Hermitian
//! terms, with objective and constraint values matching the complex inner
//! product `Re tr(A X)`.

mod ipm;
pub(crate) mod realmat;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use num_complex::Complex64;
use std::fmt;

/// One cone block of the variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Real symmetric positive semidefinite block of the given side length.
    Psd(usize),
    /// Componentwise nonnegative block of the given length.
    Nonneg(usize),
}

impl BlockKind {
    /// Number of stored real entries.
    pub fn storage(&self) -> usize {
        match self {
            BlockKind::Psd(s) => s * s,
            BlockKind::Nonneg(m) => *m,
        }
    }

    /// Barrier degree of the cone (matrix side or vector length).
    pub fn degree(&self) -> usize {
        match self {
            BlockKind::Psd(s) => *s,
            BlockKind::Nonneg(m) => *m,
        }
    }
}

/// One linear equality constraint: a sparse-over-blocks list of dense
/// coefficient blocks and a right-hand side.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub(crate) terms: Vec<(usize, Vec<f64>)>,
    pub(crate) rhs: f64,
}

/// A conic program in primal standard form.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    blocks: Vec<BlockKind>,
    objective: Vec<Vec<f64>>,
    constraints: Vec<Constraint>,
}

/// Solver configuration. Defaults match the accuracy the rest of the crate
/// relies on; callers may tighten them.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Relative duality-gap tolerance `|p - d| / (1 + |p|)`.
    pub gap_tol: f64,
    /// Residual tolerance, scaled by `1 + max |data|`.
    pub feas_tol: f64,
    /// Fraction of the maximal cone step taken per iteration.
    pub step_fraction: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iters: 100, gap_tol: 1e-8, feas_tol: 1e-8, step_fraction: 0.98 }
    }
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Primal-dual optimal within tolerances.
    Optimal,
    /// Dual objective diverged: the primal constraints are inconsistent.
    PrimalInfeasible,
    /// Primal objective diverged below any bound: the dual is inconsistent.
    DualInfeasible,
    /// Iteration budget exhausted before the tolerances were met.
    IterationLimit,
    /// The Newton system or cone scalings broke down numerically.
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::PrimalInfeasible => "primal infeasible",
            SolveStatus::DualInfeasible => "dual infeasible",
            SolveStatus::IterationLimit => "iteration limit",
            SolveStatus::NumericalFailure => "numerical failure",
        };
        f.write_str(s)
    }
}

/// Result of a solve: primal blocks, dual multipliers, dual slacks, and the
/// convergence measurements at the returned iterate.
#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub primal_blocks: Vec<Vec<f64>>,
    pub dual_y: Vec<f64>,
    pub dual_slacks: Vec<Vec<f64>>,
    pub obj_primal: f64,
    pub obj_dual: f64,
    /// `|obj_primal - obj_dual| / (1 + |obj_primal|)` at the returned iterate.
    pub rel_gap: f64,
    /// Max-norm of `b - A(X)`.
    pub primal_residual: f64,
    /// Max entry norm of `C - A^T(y) - S`.
    pub dual_residual: f64,
    /// Normalized complementarity `<X, S> / degree`.
    pub mu: f64,
    pub iterations: usize,
}

impl ConicProgram {
    /// Creates a program over the given blocks with a zero objective and no
    /// constraints.
    pub fn new(blocks: Vec<BlockKind>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument { reason: "a conic program needs at least one block".into() });
        }
        if blocks.iter().any(|b| b.degree() == 0) {
            return Err(Error::InvalidArgument { reason: "blocks must have positive dimension".into() });
        }
        let objective = blocks.iter().map(|b| vec![0.0; b.storage()]).collect();
        Ok(Self { blocks, objective, constraints: Vec::new() })
    }

    pub fn blocks(&self) -> &[BlockKind] {
        &self.blocks
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Total real dimension of the variable.
    pub fn total_storage(&self) -> usize {
        self.blocks.iter().map(|b| b.storage()).sum()
    }

    fn check_block_data(&self, block: usize, data: &[f64]) -> Result<()> {
        let kind = self.blocks.get(block).ok_or_else(|| Error::InvalidArgument {
            reason: format!("block index {} out of range ({} blocks)", block, self.blocks.len()),
        })?;
        if data.len() != kind.storage() {
            return Err(Error::DimensionMismatch { expected: kind.storage(), actual: data.len() });
        }
        if let BlockKind::Psd(s) = kind {
            for i in 0..*s {
                for j in (i + 1)..*s {
                    if (data[i * s + j] - data[j * s + i]).abs() > 1e-10 {
                        return Err(Error::ShapeMismatch {
                            reason: format!("PSD coefficient for block {} is not symmetric at ({}, {})", block, i, j),
                        });
                    }
                }
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument { reason: "non-finite coefficient".into() });
        }
        Ok(())
    }

    /// Sets the objective coefficient for one block.
    pub fn set_objective(&mut self, block: usize, data: Vec<f64>) -> Result<()> {
        self.check_block_data(block, &data)?;
        self.objective[block] = data;
        Ok(())
    }

    /// Adds an equality constraint from per-block coefficients and a
    /// right-hand side. Blocks not listed have zero coefficient.
    pub fn add_constraint(&mut self, terms: Vec<(usize, Vec<f64>)>, rhs: f64) -> Result<()> {
        if !rhs.is_finite() {
            return Err(Error::InvalidArgument { reason: "non-finite right-hand side".into() });
        }
        let mut seen = vec![false; self.blocks.len()];
        for (block, data) in &terms {
            self.check_block_data(*block, data)?;
            if seen[*block] {
                return Err(Error::InvalidArgument {
                    reason: format!("block {} listed twice in one constraint", block),
                });
            }
            seen[*block] = true;
        }
        if self.constraints.len() + 1 > self.total_storage() {
            return Err(Error::InvalidArgument {
                reason: "more constraints than variable dimensions".into(),
            });
        }
        let mut terms = terms;
        terms.sort_by_key(|(b, _)| *b);
        self.constraints.push(Constraint { terms, rhs });
        Ok(())
    }

    pub(crate) fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub(crate) fn objective_blocks(&self) -> &[Vec<f64>] {
        &self.objective
    }

    /// Runs the interior-point method. All failure modes are reported through
    /// [`ConicSolution::status`].
    pub fn solve(&self, opts: &SolveOptions) -> ConicSolution {
        ipm::solve(self, opts)
    }

    /// Plain-text dump of the program, one objective or constraint per line,
    /// entries as `b<block>[i,j]=v` (PSD, upper triangle) or `b<block>[j]=v`
    /// (nonnegative) triplets.
    pub fn dump_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let kinds: Vec<String> = self
            .blocks
            .iter()
            .map(|b| match b {
                BlockKind::Psd(s) => format!("psd:{}", s),
                BlockKind::Nonneg(m) => format!("nonneg:{}", m),
            })
            .collect();
        let _ = writeln!(out, "blocks {}", kinds.join(" "));
        let fmt_block = |block: usize, data: &[f64], out: &mut String| match self.blocks[block] {
            BlockKind::Psd(s) => {
                for i in 0..s {
                    for j in i..s {
                        let v = data[i * s + j];
                        if v != 0.0 {
                            let _ = write!(out, " b{}[{},{}]={:.17e}", block, i, j, v);
                        }
                    }
                }
            }
            BlockKind::Nonneg(m) => {
                for j in 0..m {
                    if data[j] != 0.0 {
                        let _ = write!(out, " b{}[{}]={:.17e}", block, j, data[j]);
                    }
                }
            }
        };
        let mut line = String::from("objective");
        for (b, data) in self.objective.iter().enumerate() {
            fmt_block(b, data, &mut line);
        }
        let _ = writeln!(out, "{}", line);
        for (k, cons) in self.constraints.iter().enumerate() {
            let mut line = format!("constraint {} rhs={:.17e}", k, cons.rhs);
            for (b, data) in &cons.terms {
                fmt_block(*b, data, &mut line);
            }
            let _ = writeln!(out, "{}", line);
        }
        out
    }
}

/// Embeds a complex Hermitian matrix `H = A + iB` as the real symmetric
/// matrix `[[A, -B], [B, A]]` of twice the dimension. Eigenvalues are those
/// of `H`, each doubled in multiplicity.
pub fn embed_hermitian(h: &ComplexMatrix) -> Result<Vec<f64>> {
    if !h.is_square() {
        return Err(Error::ShapeMismatch { reason: "embedding needs a square matrix".into() });
    }
    if !h.is_hermitian(crate::linalg::HERMITIAN_TOL) {
        return Err(Error::NotHermitian { deviation: h.max_abs_diff(&h.dagger()) });
    }
    let d = h.dim();
    let n = 2 * d;
    let mut out = vec![0.0; n * n];
    for i in 0..d {
        for j in 0..d {
            let v = h.get(i, j);
            let sym = 0.5 * (v.re + h.get(j, i).re);
            let asym = 0.5 * (v.im - h.get(j, i).im);
            out[i * n + j] = sym;
            out[(i + d) * n + (j + d)] = sym;
            out[i * n + (j + d)] = -asym;
            out[(i + d) * n + j] = asym;
        }
    }
    Ok(out)
}

/// Recovers a complex Hermitian matrix from a real symmetric block of twice
/// its dimension by projecting onto the embedded subspace (the adjoint of
/// [`embed_hermitian`] up to the factor 2 handled by the callers).
pub fn extract_hermitian(block: &[f64], d: usize) -> Result<ComplexMatrix> {
    let n = 2 * d;
    if block.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, actual: block.len() });
    }
    let mut out = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let re = 0.5 * (block[i * n + j] + block[(i + d) * n + (j + d)]);
            let im = 0.5 * (block[(i + d) * n + j] - block[i * n + (j + d)]);
            out.set(i, j, Complex64::new(re, im));
        }
    }
    Ok(out.hermitize())
}

/// A conic program stated over complex Hermitian PSD blocks. Handles the
/// real embedding and the factor-of-two rescaling so that objective and
/// constraint values equal the complex inner products `tr(A X)`.
#[derive(Debug, Clone)]
pub struct HermitianProgram {
    dims: Vec<usize>,
    program: ConicProgram,
}

impl HermitianProgram {
    /// One complex PSD block per entry of `dims`.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        let blocks = dims.iter().map(|&d| BlockKind::Psd(2 * d)).collect();
        let program = ConicProgram::new(blocks)?;
        Ok(Self { dims, program })
    }

    fn coeff(&self, block: usize, m: &ComplexMatrix) -> Result<Vec<f64>> {
        let d = *self.dims.get(block).ok_or_else(|| Error::InvalidArgument {
            reason: format!("block index {} out of range", block),
        })?;
        if m.rows() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: m.rows() });
        }
        // Halved so <coeff, X_embed> = tr(M X_complex).
        Ok(embed_hermitian(m)?.into_iter().map(|v| 0.5 * v).collect())
    }

    /// Sets the (Hermitian) objective coefficient of one block.
    pub fn set_objective(&mut self, block: usize, m: &ComplexMatrix) -> Result<()> {
        let data = self.coeff(block, m)?;
        self.program.set_objective(block, data)
    }

    /// Adds the constraint `sum_b tr(M_b X_b) = rhs`.
    pub fn add_constraint(&mut self, terms: &[(usize, &ComplexMatrix)], rhs: f64) -> Result<()> {
        let mut real_terms = Vec::with_capacity(terms.len());
        for (block, m) in terms {
            real_terms.push((*block, self.coeff(*block, m)?));
        }
        self.program.add_constraint(real_terms, rhs)
    }

    pub fn program(&self) -> &ConicProgram {
        &self.program
    }

    pub fn solve(&self, opts: &SolveOptions) -> ConicSolution {
        self.program.solve(opts)
    }

    /// Complex Hermitian (PSD) solution of one block.
    pub fn extract(&self, solution: &ConicSolution, block: usize) -> Result<ComplexMatrix> {
        extract_hermitian(&solution.primal_blocks[block], self.dims[block])
    }

    /// Complex Hermitian dual slack of one block.
    pub fn extract_slack(&self, solution: &ConicSolution, block: usize) -> Result<ComplexMatrix> {
        extract_hermitian(&solution.dual_slacks[block], self.dims[block])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, ComplexMatrix};

    fn solve_default(p: &ConicProgram) -> ConicSolution {
        p.solve(&SolveOptions::default())
    }

    #[test]
    fn lp_minimum_over_halfline() {
        // minimize x subject to x >= 1: introduce slack x - s = 1 with both
        // nonnegative; optimum 1 at (x, s) = (1, 0).
        let mut p = ConicProgram::new(vec![BlockKind::Nonneg(2)]).unwrap();
        p.set_objective(0, vec![1.0, 0.0]).unwrap();
        p.add_constraint(vec![(0, vec![1.0, -1.0])], 1.0).unwrap();
        let sol = solve_default(&p);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.obj_primal - 1.0).abs() < 1e-7);
        assert!((sol.primal_blocks[0][0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sdp_trace_with_fixed_diagonal() {
        // minimize tr X subject to X_00 = 1, X_11 = 2, X PSD (2x2 real).
        // Optimal value 3; the analytic center of the optimal face is diagonal.
        let mut p = ConicProgram::new(vec![BlockKind::Psd(2)]).unwrap();
        p.set_objective(0, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        p.add_constraint(vec![(0, vec![1.0, 0.0, 0.0, 0.0])], 1.0).unwrap();
        p.add_constraint(vec![(0, vec![0.0, 0.0, 0.0, 1.0])], 2.0).unwrap();
        let sol = solve_default(&p);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.obj_primal - 3.0).abs() < 1e-7);
        assert!(sol.primal_blocks[0][1].abs() < 1e-5);
        assert!(sol.rel_gap <= 1e-7);
    }

    #[test]
    fn psd_dual_slack_stays_feasible() {
        // Same SDP; the dual slack must be PSD within tolerance.
        let mut p = ConicProgram::new(vec![BlockKind::Psd(2)]).unwrap();
        p.set_objective(0, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        p.add_constraint(vec![(0, vec![1.0, 0.0, 0.0, 0.0])], 1.0).unwrap();
        p.add_constraint(vec![(0, vec![0.0, 0.0, 0.0, 1.0])], 2.0).unwrap();
        let sol = solve_default(&p);
        let s = &sol.dual_slacks[0];
        // 2x2 symmetric PSD check by eigenvalue formula.
        let tr = s[0] + s[3];
        let det = s[0] * s[3] - s[1] * s[2];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let lam_min = tr / 2.0 - disc;
        assert!(lam_min >= -1e-8);
    }

    #[test]
    fn scaling_objective_scales_value_not_argmin() {
        // minimize x1 + 2 x2 s.t. x1 + x2 = 1, x >= 0: unique argmin (1, 0).
        let build = |lam: f64| {
            let mut p = ConicProgram::new(vec![BlockKind::Nonneg(2)]).unwrap();
            p.set_objective(0, vec![lam, 2.0 * lam]).unwrap();
            p.add_constraint(vec![(0, vec![1.0, 1.0])], 1.0).unwrap();
            p
        };
        let base = solve_default(&build(1.0));
        let scaled = solve_default(&build(7.5));
        assert_eq!(base.status, SolveStatus::Optimal);
        assert_eq!(scaled.status, SolveStatus::Optimal);
        for i in 0..2 {
            assert!((base.primal_blocks[0][i] - scaled.primal_blocks[0][i]).abs() < 1e-6);
        }
        let rel = (scaled.obj_primal - 7.5 * base.obj_primal).abs() / (1.0 + scaled.obj_primal.abs());
        assert!(rel < 1e-7);
    }

    #[test]
    fn solver_is_deterministic_to_the_bit() {
        let mut p = ConicProgram::new(vec![BlockKind::Psd(3), BlockKind::Nonneg(2)]).unwrap();
        p.set_objective(0, vec![2.0, 0.3, 0.0, 0.3, 1.0, -0.2, 0.0, -0.2, 1.5]).unwrap();
        p.set_objective(1, vec![0.5, 1.0]).unwrap();
        p.add_constraint(
            vec![(0, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]), (1, vec![1.0, 0.0])],
            2.0,
        )
        .unwrap();
        p.add_constraint(vec![(0, vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]), (1, vec![0.0, 1.0])], 0.25)
            .unwrap();
        let a = solve_default(&p);
        let b = solve_default(&p);
        assert_eq!(a.status, b.status);
        assert_eq!(a.iterations, b.iterations);
        for (xa, xb) in a.primal_blocks.iter().zip(&b.primal_blocks) {
            for (u, v) in xa.iter().zip(xb) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
        for (u, v) in a.dual_y.iter().zip(&b.dual_y) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn infeasible_lp_is_not_reported_optimal() {
        // x >= 0 with x = -1 is infeasible.
        let mut p = ConicProgram::new(vec![BlockKind::Nonneg(1)]).unwrap();
        p.set_objective(0, vec![1.0]).unwrap();
        p.add_constraint(vec![(0, vec![1.0])], -1.0).unwrap();
        let sol = solve_default(&p);
        assert_ne!(sol.status, SolveStatus::Optimal);
    }

    #[test]
    fn weak_duality_holds_at_optimum() {
        let mut p = ConicProgram::new(vec![BlockKind::Psd(2)]).unwrap();
        p.set_objective(0, vec![1.0, 0.25, 0.25, 2.0]).unwrap();
        p.add_constraint(vec![(0, vec![1.0, 0.0, 0.0, 1.0])], 1.0).unwrap();
        let sol = solve_default(&p);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.obj_dual <= sol.obj_primal + 1e-7 * (1.0 + sol.obj_primal.abs()));
        assert!(sol.mu <= 1e-7);
    }

    #[test]
    fn pauli_y_embedding_has_doubled_spectrum() {
        let y = ComplexMatrix::from_vec(
            2,
            2,
            vec![
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, 0.0),
            ],
        )
        .unwrap();
        let e = embed_hermitian(&y).unwrap();
        let m = ComplexMatrix::from_real(4, 4, &e).unwrap();
        let eig = eigh(&m).unwrap();
        let expect = [-1.0, -1.0, 1.0, 1.0];
        for (got, want) in eig.values.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn embed_extract_round_trip_preserves_inner_products() {
        let h = ComplexMatrix::from_vec(
            2,
            2,
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.25, -0.5),
                Complex64::new(0.25, 0.5),
                Complex64::new(-0.5, 0.0),
            ],
        )
        .unwrap();
        let x = ComplexMatrix::from_vec(
            2,
            2,
            vec![
                Complex64::new(0.7, 0.0),
                Complex64::new(0.1, 0.2),
                Complex64::new(0.1, -0.2),
                Complex64::new(0.3, 0.0),
            ],
        )
        .unwrap();
        let he = embed_hermitian(&h).unwrap();
        let xe = embed_hermitian(&x).unwrap();
        // <H_e, X_e> = 2 tr(H X).
        let ip: f64 = he.iter().zip(&xe).map(|(a, b)| a * b).sum();
        let tr = h.trace_product_re(&x);
        assert!((ip - 2.0 * tr).abs() < 1e-12);
        let back = extract_hermitian(&xe, 2).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-14);
    }

    #[test]
    fn hermitian_program_solves_complex_sdp() {
        // minimize tr(X) over complex PSD X with tr(Y X) = 1 for Pauli Y.
        // Optimal X = (I + Y)/2 * t with Y-expectation 1 ... the minimum of
        // tr X subject to <Y> = 1 is 1, at X = (I + Y)/4 * 2.
        let y = ComplexMatrix::from_vec(
            2,
            2,
            vec![
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, 0.0),
            ],
        )
        .unwrap();
        let mut hp = HermitianProgram::new(vec![2]).unwrap();
        hp.set_objective(0, &ComplexMatrix::identity(2)).unwrap();
        hp.add_constraint(&[(0, &y)], 1.0).unwrap();
        let sol = hp.solve(&SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.obj_primal - 1.0).abs() < 1e-6);
        let x = hp.extract(&sol, 0).unwrap();
        assert!((x.trace().re - 1.0).abs() < 1e-6);
        assert!((y.trace_product_re(&x) - 1.0).abs() < 1e-7);
        // The minimizer is the spectral projector scaled: X = (I + Y)/2 / 1.
        let expected = ComplexMatrix::identity(2).add(&y).scale_re(0.5);
        assert!(x.max_abs_diff(&expected) < 1e-5);
    }

    #[test]
    fn dump_text_is_stable_and_complete() {
        let mut p = ConicProgram::new(vec![BlockKind::Psd(2), BlockKind::Nonneg(1)]).unwrap();
        p.set_objective(0, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        p.add_constraint(vec![(0, vec![0.0, 0.5, 0.5, 0.0]), (1, vec![2.0])], 0.25).unwrap();
        let dump = p.dump_text();
        assert!(dump.contains("blocks psd:2 nonneg:1"));
        assert!(dump.contains("constraint 0"));
        assert!(dump.contains("b0[0,1]="));
        assert!(dump.contains("b1[0]="));
        assert_eq!(dump, p.dump_text());
    }
}
