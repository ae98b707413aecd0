//! Primal-dual interior-point iteration: infeasible-start Mehrotra
//! predictor-corrector with Nesterov-Todd scaling.
//!
//! Each iteration eigendecomposes the blocks to build the NT scaling point
//! `W` (satisfying `W S W = X`), forms the Schur complement of the Newton
//! system in the constraint multipliers, factors it once by regularized
//! Cholesky, and reuses the factor for the predictor and corrector solves.
//! Steps stay strictly inside the cones by a fixed fraction of the maximal
//! feasible step. All arithmetic is dense, sequential, and deterministic.

use super::realmat as rm;
use super::{BlockKind, ConicProgram, ConicSolution, SolveOptions, SolveStatus};

/// Base diagonal regularization for the Schur complement, relative to its
/// largest diagonal entry; bumped multiplicatively on breakdown.
const CHOL_BASE_REG: f64 = 1e-12;
/// Below this step size in both primal and dual, an iteration counts as
/// stalled; a few in a row abort the solve.
const STALL_STEP: f64 = 1e-7;
const STALL_LIMIT: usize = 3;
/// Once complementarity is at target, this many consecutive iterations
/// without residual or gap progress end the solve at the achieved
/// precision.
const PLATEAU_LIMIT: usize = 5;
/// Advertised quality of any `Optimal` return: constraint residuals within
/// `OPTIMAL_RES_CAP`·(1+‖b‖∞) and relative gap within `OPTIMAL_GAP_CAP`.
/// Requested tolerances below these are best-effort; a terminal iterate
/// that still meets the advertised caps reports as optimal with its
/// achieved statistics.
const OPTIMAL_RES_CAP: f64 = 1e-8;
const OPTIMAL_GAP_CAP: f64 = 1e-7;
/// When the smallest complementarity pair falls below this fraction of the
/// average, the iterate is treated as dangerously off-center and the next
/// step is forced to recenter (`sigma >= CENTER_RESTORE_SIGMA`).
const CENTER_RESTORE_TRIGGER: f64 = 1e-2;
const CENTER_RESTORE_SIGMA: f64 = 0.9;
/// With an acceptable snapshot in hand, a merit blowup past this factor of
/// the best seen aborts the endgame: pushing complementarity further below
/// the residual floor only erodes feasibility.
const DRIFT_ABORT: f64 = 50.0;
/// When the corrector direction allows less than this step in both primal
/// and dual, the iterate is stuck near the cone boundary; a strongly
/// centered direction (`CENTER_SIGMA`, no second-order term) is tried as a
/// fallback to pull it back toward the central path.
const CENTER_STEP_TRIGGER: f64 = 0.05;
const CENTER_SIGMA: f64 = 0.8;
/// Centrality neighborhood: the smallest complementarity product at an
/// accepted trial point must stay above `NEIGH_GAMMA` times the mean
/// (unless the incoming iterate is already worse; then no further decay
/// beyond a fixed factor is allowed). Steps are halved up to
/// `NEIGH_BACKTRACKS` times to enforce it. Without this, boundary-blocked
/// steps crash the small eigenvalues geometrically, the scaling
/// degenerates, and progress stops well short of the target precision.
const NEIGH_GAMMA: f64 = 1e-3;
const NEIGH_BACKTRACKS: usize = 25;
/// Iterate-norm blowup bound for declaring numerical divergence.
const DIVERGE_NORM: f64 = 1e14;
/// Objective blowup bound for the infeasibility heuristics.
const DIVERGE_OBJ: f64 = 1e10;

/// Per-block Nesterov-Todd scaling data. For PSD blocks the fields are
/// matrices; for nonnegative blocks, componentwise vectors.
struct Scaled {
    w: Vec<f64>,
    wh: Vec<f64>,
    whi: Vec<f64>,
    lam: Vec<f64>,
    lam_inv: Vec<f64>,
    lam_ih: Vec<f64>,
    /// Smallest eigenvalue product of the scaled point (`lambda_min^2`),
    /// i.e. the worst complementarity pair; collapsing far below `mu`
    /// signals an off-center iterate.
    min_prod: f64,
}

/// One set of Newton directions together with their scaled-space images.
struct Directions {
    dy: Vec<f64>,
    dx: Vec<Vec<f64>>,
    ds: Vec<Vec<f64>>,
    dxh: Vec<Vec<f64>>,
    dsh: Vec<Vec<f64>>,
}

#[derive(Clone)]
struct Measure {
    pobj: f64,
    dobj: f64,
    mu: f64,
    rel_gap: f64,
    prim_res: f64,
    dual_res: f64,
}

/// The best iterate seen so far, by scaled merit. Late iterations can lose
/// feasibility to rounding once complementarity is driven far below the
/// attainable residual floor; terminal returns fall back to this point.
struct Best {
    merit: f64,
    acceptable: bool,
    x: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
    y: Vec<f64>,
    meas: Measure,
    iterations: usize,
}

/// Scaled worst-case error of an iterate. Feasibility is weighted above the
/// gap terms so the retained snapshot favors residual quality.
fn merit_of(meas: &Measure, b_inf: f64, c_inf: f64) -> f64 {
    (10.0 * meas.prim_res / (1.0 + b_inf))
        .max(10.0 * meas.dual_res / (1.0 + c_inf))
        .max(meas.rel_gap)
        .max(meas.mu / (1.0 + meas.pobj.abs()))
}

/// Whether an iterate meets the advertised caps for an `Optimal` report,
/// independent of the (possibly tighter) requested tolerances.
fn near_optimal(meas: &Measure, b_inf: f64, c_inf: f64) -> bool {
    meas.prim_res <= OPTIMAL_RES_CAP * (1.0 + b_inf)
        && meas.dual_res <= OPTIMAL_RES_CAP * (1.0 + c_inf)
        && meas.rel_gap <= OPTIMAL_GAP_CAP
        && meas.mu <= OPTIMAL_GAP_CAP * (1.0 + meas.pobj.abs())
}

pub(super) fn solve(prog: &ConicProgram, opts: &SolveOptions) -> ConicSolution {
    let blocks: Vec<BlockKind> = prog.blocks().to_vec();
    let nb = blocks.len();
    let cons = prog.constraints();
    let m = cons.len();
    let cobj = prog.objective_blocks();
    let nu: f64 = blocks.iter().map(|b| b.degree() as f64).sum();

    // Which constraints touch each block, as (constraint, term) indices.
    let mut active: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nb];
    for (k, c) in cons.iter().enumerate() {
        for (ti, (bi, _)) in c.terms.iter().enumerate() {
            active[*bi].push((k, ti));
        }
    }

    // Sparse triplet view of the constraint coefficients, used by every
    // contraction against them: blocks are typically basis elements with a
    // handful of nonzeros, which turns the Schur build from O(m^2 n^2) dense
    // inner products into O(m^2 nnz).
    let sparse: Vec<Vec<Vec<(usize, f64)>>> = cons
        .iter()
        .map(|c| {
            c.terms
                .iter()
                .map(|(_, a)| {
                    a.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect()
                })
                .collect()
        })
        .collect();

    let b_vec: Vec<f64> = cons.iter().map(|c| c.rhs).collect();
    let b_inf = b_vec.iter().fold(0.0_f64, |mx, v| mx.max(v.abs()));
    let c_inf = cobj.iter().map(|c| rm::max_abs(c)).fold(0.0, f64::max);

    // Cold start on the central ray, sized to the data.
    let eta_p = 1.0_f64.max(b_inf);
    let eta_d = 1.0_f64.max(c_inf);
    let mut x: Vec<Vec<f64>> = blocks.iter().map(|k| cone_identity(*k, eta_p)).collect();
    let mut s: Vec<Vec<f64>> = blocks.iter().map(|k| cone_identity(*k, eta_d)).collect();
    let mut y = vec![0.0; m];

    let mut iterations = 0usize;
    let mut stall = 0usize;
    let mut flat = 0usize;
    let mut best_prim = f64::INFINITY;
    let mut best_dual = f64::INFINITY;
    let mut best_gap = f64::INFINITY;
    let mut prev_merit = f64::INFINITY;
    let mut prev_prim = f64::INFINITY;
    // `strained` marks instances whose iterates needed recentering (a sign
    // of blowing-up conditioning near the optimal face); `polish` is the
    // endgame for them: complementarity frozen, feasibility driven to its
    // floor so downstream consumers get an (almost) exactly feasible point.
    let mut strained = false;
    let mut polish = false;
    let mut best: Option<Best> = None;
    let mut acceptable_best: Option<Best> = None;
    let trace = std::env::var_os("QOTKIT_IPM_TRACE").is_some();

    loop {
        let (rp, rd) = residuals(cons, &sparse, cobj, &x, &s, &y, &b_vec);
        let meas = measure(&blocks, cobj, &b_vec, &x, &s, &y, &rp, &rd, nu);
        if trace {
            eprintln!(
                "ipm it={:3} pobj={:+.9e} dobj={:+.9e} mu={:.3e} gap={:.3e} rp={:.3e} rd={:.3e}",
                iterations, meas.pobj, meas.dobj, meas.mu, meas.rel_gap, meas.prim_res, meas.dual_res
            );
            for (bi, kind) in blocks.iter().enumerate() {
                if let BlockKind::Psd(n) = kind {
                    if let (Ok((xv, _)), Ok((sv, _))) =
                        (rm::sym_eigh(*n, &x[bi]), rm::sym_eigh(*n, &s[bi]))
                    {
                        eprintln!(
                            "       blk{} x=[{:.2e},{:.2e}] s=[{:.2e},{:.2e}]",
                            bi,
                            xv[0],
                            xv[*n - 1],
                            sv[0],
                            sv[*n - 1]
                        );
                    }
                }
            }
        }

        let finite = meas.pobj.is_finite()
            && meas.dobj.is_finite()
            && x.iter().chain(&s).all(|blk| blk.iter().all(|v| v.is_finite()))
            && y.iter().all(|v| v.is_finite());
        if !finite {
            return finish(SolveStatus::NumericalFailure, &blocks, x, s, y, &meas, iterations, best, acceptable_best, opts, b_inf, c_inf);
        }

        let prim_ok = meas.prim_res <= opts.feas_tol * (1.0 + b_inf);
        let dual_ok = meas.dual_res <= opts.feas_tol * (1.0 + c_inf);
        let gap_ok =
            meas.rel_gap <= opts.gap_tol && meas.mu <= opts.gap_tol * (1.0 + meas.pobj.abs());
        if prim_ok && dual_ok && gap_ok {
            return package(SolveStatus::Optimal, &blocks, x, s, y, &meas, iterations);
        }

        let cur_merit = merit_of(&meas, b_inf, c_inf);
        // Bank the lowest-primal-residual iterate that satisfies every cap
        // an `Optimal` report promises. Downstream consumers extract the
        // primal matrix and care most about feasibility, so when several
        // iterates qualify the one with the cleanest residual wins.
        if near_optimal(&meas, b_inf, c_inf)
            && acceptable_best.as_ref().map_or(true, |b| meas.prim_res < b.meas.prim_res)
        {
            acceptable_best = Some(Best {
                merit: cur_merit,
                acceptable: true,
                x: x.clone(),
                s: s.clone(),
                y: y.clone(),
                meas: meas.clone(),
                iterations,
            });
        }
        // Advertised-caps endgame: once an iterate satisfies every cap an
        // `Optimal` report promises, pushing complementarity further only
        // degrades instances whose conditioning blows up near the optimal
        // face (e.g. nearly rank-deficient solutions). All such instances
        // switch to a feasibility polish (sigma = 1) that freezes the
        // complementarity level and contracts the primal residual to its
        // floor; when a polish step cannot improve the residual (the Schur
        // system is past its precision limit) the banked iterate returns.
        if polish {
            if near_optimal(&meas, b_inf, c_inf) {
                let floor_hit = meas.prim_res <= 1e-13 * (1.0 + b_inf);
                if floor_hit || meas.prim_res >= 0.9 * prev_prim {
                    let b = acceptable_best.take().expect("banked at least this iterate");
                    return package(SolveStatus::Optimal, &blocks, b.x, b.s, b.y, &b.meas, b.iterations);
                }
            } else {
                polish = false;
            }
        } else if near_optimal(&meas, b_inf, c_inf) && (strained || cur_merit >= prev_merit) {
            polish = true;
            if trace {
                eprintln!("       polish from rp={:.3e}", meas.prim_res);
            }
        }
        prev_merit = cur_merit;
        prev_prim = meas.prim_res;
        if best.as_ref().map_or(true, |b| cur_merit < b.merit) {
            best = Some(Best {
                merit: cur_merit,
                acceptable: near_optimal(&meas, b_inf, c_inf),
                x: x.clone(),
                s: s.clone(),
                y: y.clone(),
                meas: meas.clone(),
                iterations,
            });
        } else if let Some(b) = &best {
            // Endgame drift: with an acceptable iterate already banked, a
            // sharp merit blowup means rounding is eroding the point the
            // solver worked for. Return the snapshot before it gets worse.
            if b.acceptable && cur_merit > DRIFT_ABORT * b.merit {
                return finish(SolveStatus::NumericalFailure, &blocks, x, s, y, &meas, iterations, best, acceptable_best, opts, b_inf, c_inf);
            }
        }

        // Plateau: complementarity is at target but feasibility or gap have
        // stopped improving, so further iterations only underflow mu and
        // erode feasibility. Stop and fall back to the best iterate.
        if meas.mu <= opts.gap_tol * (1.0 + meas.pobj.abs()) {
            let improving = meas.prim_res < 0.9 * best_prim
                || meas.dual_res < 0.9 * best_dual
                || meas.rel_gap < 0.9 * best_gap;
            flat = if improving { 0 } else { flat + 1 };
            if flat >= PLATEAU_LIMIT {
                return finish(SolveStatus::NumericalFailure, &blocks, x, s, y, &meas, iterations, best, acceptable_best, opts, b_inf, c_inf);
            }
        }
        best_prim = best_prim.min(meas.prim_res);
        best_dual = best_dual.min(meas.dual_res);
        best_gap = best_gap.min(meas.rel_gap);

        let norm_blowup = y.iter().fold(0.0_f64, |mx, v| mx.max(v.abs())) > DIVERGE_NORM
            || x.iter().chain(&s).map(|b| rm::max_abs(b)).fold(0.0, f64::max) > DIVERGE_NORM;
        if meas.dobj > DIVERGE_OBJ && !prim_ok {
            return package(SolveStatus::PrimalInfeasible, &blocks, x, s, y, &meas, iterations);
        }
        if meas.pobj < -DIVERGE_OBJ && !dual_ok {
            return package(SolveStatus::DualInfeasible, &blocks, x, s, y, &meas, iterations);
        }
        if norm_blowup {
            return finish(SolveStatus::NumericalFailure, &blocks, x, s, y, &meas, iterations, best, acceptable_best, opts, b_inf, c_inf);
        }
        if iterations >= opts.max_iters {
            return finish(SolveStatus::IterationLimit, &blocks, x, s, y, &meas, iterations, best, acceptable_best, opts, b_inf, c_inf);
        }

        // Nesterov-Todd scaling per block.
        let mut scal = Vec::with_capacity(nb);
        for bi in 0..nb {
            match scaling_for(blocks[bi], &x[bi], &s[bi]) {
                Some(sc) => scal.push(sc),
                None => {
                    return finish(SolveStatus::NumericalFailure, &blocks, x, s, y, &meas, iterations, best, acceptable_best, opts, b_inf, c_inf);
                }
            }
        }

        // Schur complement M[k,l] = sum_b <A_kb, W A_lb W>, factored once.
        let schur = match build_and_factor_schur(&blocks, &sparse, &active, &scal, m) {
            Some(l) => l,
            None => {
                return finish(SolveStatus::NumericalFailure, &blocks, x, s, y, &meas, iterations, best, acceptable_best, opts, b_inf, c_inf);
            }
        };

        // Predictor: aim at complementarity zero.
        let v_aff: Vec<Vec<f64>> = scal.iter().map(|sc| sc.lam.iter().map(|v| -v).collect()).collect();
        let aff = newton_step(&blocks, cons, &sparse, &active, &scal, &schur, &rp, &rd, &v_aff, m);
        let (apm, adm) = match max_steps(&blocks, &scal, &x, &s, &aff) {
            Some(t) => t,
            None => {
                return finish(SolveStatus::NumericalFailure, &blocks, x, s, y, &meas, iterations, best, acceptable_best, opts, b_inf, c_inf);
            }
        };
        let a_aff_p = apm.min(1.0);
        let a_aff_d = adm.min(1.0);

        // Centering weight from the affine trial point.
        let mut gap_aff = 0.0;
        for bi in 0..nb {
            gap_aff += rm::dot(&x[bi], &s[bi])
                + a_aff_p * rm::dot(&aff.dx[bi], &s[bi])
                + a_aff_d * rm::dot(&x[bi], &aff.ds[bi])
                + a_aff_p * a_aff_d * rm::dot(&aff.dx[bi], &aff.ds[bi]);
        }
        let mu_aff = (gap_aff / nu).max(0.0);
        let mut sigma = (mu_aff / meas.mu).powi(3).clamp(0.0, 1.0);
        // Centrality restoration: when the worst complementarity pair has
        // collapsed far below the average, the scaling point is close to a
        // corner and the Newton systems degrade. A strongly centering step
        // (which still reduces the residuals in full) pulls the products
        // back together before resuming complementarity progress.
        let min_prod = scal.iter().map(|sc| sc.min_prod).fold(f64::INFINITY, f64::min);
        if min_prod < CENTER_RESTORE_TRIGGER * meas.mu {
            strained = true;
            sigma = sigma.max(CENTER_RESTORE_SIGMA);
            if trace {
                eprintln!(
                    "       recenter sigma={:.3e} min_prod/mu={:.3e}",
                    sigma,
                    min_prod / meas.mu
                );
            }
        }
        if polish {
            sigma = 1.0;
        }

        // Corrector: recenter to sigma*mu and cancel the second-order term
        // from the affine direction.
        let v_corr = corrector_targets(&blocks, &scal, &aff, sigma * meas.mu);
        let mut dir = newton_step(&blocks, cons, &sparse, &active, &scal, &schur, &rp, &rd, &v_corr, m);
        let (apm, adm) = match max_steps(&blocks, &scal, &x, &s, &dir) {
            Some(t) => t,
            None => {
                return finish(SolveStatus::NumericalFailure, &blocks, x, s, y, &meas, iterations, best, acceptable_best, opts, b_inf, c_inf);
            }
        };
        let mut a_p = (opts.step_fraction * apm).min(1.0);
        let mut a_d = (opts.step_fraction * adm).min(1.0);

        // Boundary sticking: the Mehrotra direction is blocked almost
        // immediately. Retreat to a strongly centered step when that moves
        // further.
        if a_p.min(a_d) < CENTER_STEP_TRIGGER {
            let v_cent = centering_targets(&blocks, &scal, CENTER_SIGMA * meas.mu);
            let cent =
                newton_step(&blocks, cons, &sparse, &active, &scal, &schur, &rp, &rd, &v_cent, m);
            if let Some((apc, adc)) = max_steps(&blocks, &scal, &x, &s, &cent) {
                let a_pc = (opts.step_fraction * apc).min(1.0);
                let a_dc = (opts.step_fraction * adc).min(1.0);
                if trace {
                    eprintln!("       center a_pc={:.3e} a_dc={:.3e}", a_pc, a_dc);
                }
                if a_pc.min(a_dc) > a_p.min(a_d) {
                    dir = cent;
                    a_p = a_pc;
                    a_d = a_dc;
                }
            }
        }
        if trace {
            eprintln!("       sigma={:.3e} a_p={:.3e} a_d={:.3e}", sigma, a_p, a_d);
        }

        // Enforce the centrality neighborhood; never require more than the
        // incoming iterate already has (letting recovery steps through),
        // but block further decay.
        let cur_ratio = neighborhood_ratio(&blocks, &x, &s, &dir, 0.0, 0.0, nu);
        let floor = NEIGH_GAMMA.min(0.8 * cur_ratio);
        if floor.is_finite() && floor > 0.0 {
            let mut bt = 0;
            while bt < NEIGH_BACKTRACKS
                && neighborhood_ratio(&blocks, &x, &s, &dir, a_p, a_d, nu) < floor
            {
                a_p *= 0.5;
                a_d *= 0.5;
                bt += 1;
            }
            if trace && bt > 0 {
                eprintln!("       backtracked {} times to a_p={:.3e} a_d={:.3e}", bt, a_p, a_d);
            }
        }

        if a_p < STALL_STEP && a_d < STALL_STEP {
            stall += 1;
            if stall >= STALL_LIMIT {
                return finish(SolveStatus::NumericalFailure, &blocks, x, s, y, &meas, iterations, best, acceptable_best, opts, b_inf, c_inf);
            }
        } else {
            stall = 0;
        }

        for bi in 0..nb {
            for (xv, dv) in x[bi].iter_mut().zip(&dir.dx[bi]) {
                *xv += a_p * dv;
            }
            for (sv, dv) in s[bi].iter_mut().zip(&dir.ds[bi]) {
                *sv += a_d * dv;
            }
            if let BlockKind::Psd(n) = blocks[bi] {
                rm::symmetrize(n, &mut x[bi]);
                rm::symmetrize(n, &mut s[bi]);
            }
        }
        for (yv, dv) in y.iter_mut().zip(&dir.dy) {
            *yv += a_d * dv;
        }
        iterations += 1;
    }
}

/// Terminal handling for every non-certificate exit. An iterate that met
/// every advertised cap was banked while iterating and returns as
/// `Optimal` outright; otherwise the better of the current iterate and the
/// best-merit snapshot is classified, reporting `Optimal` only when it is
/// near the requested tolerances (see `near_optimal`) and keeping the
/// fallback status when it is not.
#[allow(clippy::too_many_arguments)]
fn finish(
    fallback: SolveStatus,
    blocks: &[BlockKind],
    x: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
    y: Vec<f64>,
    meas: &Measure,
    iterations: usize,
    best: Option<Best>,
    acceptable_best: Option<Best>,
    opts: &SolveOptions,
    b_inf: f64,
    c_inf: f64,
) -> ConicSolution {
    if let Some(b) = acceptable_best {
        return package(SolveStatus::Optimal, blocks, b.x, b.s, b.y, &b.meas, b.iterations);
    }
    let cur_merit = merit_of(meas, b_inf, c_inf);
    let (bx, bs, by, bmeas, bit) = match best {
        Some(b) if b.merit < cur_merit => (b.x, b.s, b.y, b.meas, b.iterations),
        _ => (x, s, y, meas.clone(), iterations),
    };
    let full = bmeas.prim_res <= opts.feas_tol * (1.0 + b_inf)
        && bmeas.dual_res <= opts.feas_tol * (1.0 + c_inf)
        && bmeas.rel_gap <= opts.gap_tol
        && bmeas.mu <= opts.gap_tol * (1.0 + bmeas.pobj.abs());
    let status = if full || near_optimal(&bmeas, b_inf, c_inf) {
        SolveStatus::Optimal
    } else {
        fallback
    };
    package(status, blocks, bx, bs, by, &bmeas, bit)
}

fn cone_identity(kind: BlockKind, scale: f64) -> Vec<f64> {
    match kind {
        BlockKind::Psd(n) => {
            let mut v = vec![0.0; n * n];
            for i in 0..n {
                v[i * n + i] = scale;
            }
            v
        }
        BlockKind::Nonneg(mlen) => vec![scale; mlen],
    }
}

/// Dot of a sparse triplet list against a dense block.
fn sdot(triplets: &[(usize, f64)], dense: &[f64]) -> f64 {
    triplets.iter().map(|&(i, v)| v * dense[i]).sum()
}

/// `W A W` for a sparse symmetric `A`, accumulated from rank-one outer
/// products of rows of the symmetric `W`.
fn sandwich_sparse(n: usize, w: &[f64], triplets: &[(usize, f64)]) -> Vec<f64> {
    let mut g = vec![0.0; n * n];
    for &(flat, v) in triplets {
        let i = flat / n;
        let j = flat % n;
        let wi = &w[i * n..(i + 1) * n];
        let wj = &w[j * n..(j + 1) * n];
        for p in 0..n {
            let f = v * wi[p];
            if f == 0.0 {
                continue;
            }
            let grow = &mut g[p * n..(p + 1) * n];
            for (gq, wq) in grow.iter_mut().zip(wj) {
                *gq += f * wq;
            }
        }
    }
    g
}

/// Primal residual `b - A(X)` and dual residual blocks `C - S - A^T(y)`.
fn residuals(
    cons: &[super::Constraint],
    sparse: &[Vec<Vec<(usize, f64)>>],
    cobj: &[Vec<f64>],
    x: &[Vec<f64>],
    s: &[Vec<f64>],
    y: &[f64],
    b_vec: &[f64],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut rp = b_vec.to_vec();
    for (k, c) in cons.iter().enumerate() {
        for (ti, (bi, _)) in c.terms.iter().enumerate() {
            rp[k] -= sdot(&sparse[k][ti], &x[*bi]);
        }
    }
    let mut rd: Vec<Vec<f64>> = cobj
        .iter()
        .zip(s)
        .map(|(c, sb)| c.iter().zip(sb).map(|(cv, sv)| cv - sv).collect())
        .collect();
    for (k, c) in cons.iter().enumerate() {
        let yk = y[k];
        if yk == 0.0 {
            continue;
        }
        for (ti, (bi, _)) in c.terms.iter().enumerate() {
            for &(idx, v) in &sparse[k][ti] {
                rd[*bi][idx] -= yk * v;
            }
        }
    }
    (rp, rd)
}

#[allow(clippy::too_many_arguments)]
fn measure(
    blocks: &[BlockKind],
    cobj: &[Vec<f64>],
    b_vec: &[f64],
    x: &[Vec<f64>],
    s: &[Vec<f64>],
    y: &[f64],
    rp: &[f64],
    rd: &[Vec<f64>],
    nu: f64,
) -> Measure {
    let _ = blocks;
    let pobj: f64 = cobj.iter().zip(x).map(|(c, xb)| rm::dot(c, xb)).sum();
    let dobj: f64 = b_vec.iter().zip(y).map(|(b, yv)| b * yv).sum();
    let gap: f64 = x.iter().zip(s).map(|(xb, sb)| rm::dot(xb, sb)).sum();
    Measure {
        pobj,
        dobj,
        mu: gap / nu,
        rel_gap: (pobj - dobj).abs() / (1.0 + pobj.abs()),
        prim_res: rp.iter().fold(0.0_f64, |mx, v| mx.max(v.abs())),
        dual_res: rd.iter().map(|b| rm::max_abs(b)).fold(0.0, f64::max),
    }
}

fn scaling_for(kind: BlockKind, x: &[f64], s: &[f64]) -> Option<Scaled> {
    match kind {
        BlockKind::Nonneg(mlen) => {
            // Diagonal case: the NT matrix is diag(w) with w = sqrt(x/s).
            let mut w = vec![0.0; mlen];
            let mut wh = vec![0.0; mlen];
            let mut whi = vec![0.0; mlen];
            let mut lam = vec![0.0; mlen];
            let mut lam_inv = vec![0.0; mlen];
            let mut lam_ih = vec![0.0; mlen];
            let mut min_prod = f64::INFINITY;
            for j in 0..mlen {
                if x[j] <= 0.0 || s[j] <= 0.0 {
                    return None;
                }
                w[j] = (x[j] / s[j]).sqrt();
                wh[j] = w[j].sqrt();
                whi[j] = 1.0 / wh[j];
                lam[j] = (x[j] * s[j]).sqrt();
                lam_inv[j] = 1.0 / lam[j];
                lam_ih[j] = lam_inv[j].sqrt();
                min_prod = min_prod.min(x[j] * s[j]);
            }
            Some(Scaled { w, wh, whi, lam, lam_inv, lam_ih, min_prod })
        }
        BlockKind::Psd(n) => {
            let (ls, vs) = rm::sym_eigh(n, s).ok()?;
            if ls[0] <= 0.0 {
                return None;
            }
            let s_h = rm::reconstruct(n, &ls, &vs, f64::sqrt);
            let s_ih = rm::reconstruct(n, &ls, &vs, |t| 1.0 / t.sqrt());
            let mid = rm::sandwich(n, &s_h, x);
            let (lm, vm) = rm::sym_eigh(n, &mid).ok()?;
            if lm[0] <= 0.0 {
                return None;
            }
            let mid_h = rm::reconstruct(n, &lm, &vm, f64::sqrt);
            let w = rm::sandwich(n, &s_ih, &mid_h);
            let (lw, vw) = rm::sym_eigh(n, &w).ok()?;
            if lw[0] <= 0.0 {
                return None;
            }
            let wh = rm::reconstruct(n, &lw, &vw, f64::sqrt);
            let whi = rm::reconstruct(n, &lw, &vw, |t| 1.0 / t.sqrt());
            // The scaled point from either side; average for symmetry.
            let mut lam = rm::sandwich(n, &whi, x);
            let lam_dual = rm::sandwich(n, &wh, s);
            for (a, b) in lam.iter_mut().zip(&lam_dual) {
                *a = 0.5 * (*a + *b);
            }
            let (ll, vl) = rm::sym_eigh(n, &lam).ok()?;
            if ll[0] <= 0.0 {
                return None;
            }
            let lam_inv = rm::reconstruct(n, &ll, &vl, |t| 1.0 / t);
            let lam_ih = rm::reconstruct(n, &ll, &vl, |t| 1.0 / t.sqrt());
            let min_prod = ll[0] * ll[0];
            Some(Scaled { w, wh, whi, lam, lam_inv, lam_ih, min_prod })
        }
    }
}

/// The Schur complement together with its Cholesky factor; the unfactored
/// matrix is kept for iterative refinement of multiplier solves.
struct SchurFactor {
    mmat: Vec<f64>,
    chol: Vec<f64>,
}

fn build_and_factor_schur(
    blocks: &[BlockKind],
    sparse: &[Vec<Vec<(usize, f64)>>],
    active: &[Vec<(usize, usize)>],
    scal: &[Scaled],
    m: usize,
) -> Option<SchurFactor> {
    let mut mmat = vec![0.0; m * m];
    for (bi, kind) in blocks.iter().enumerate() {
        let acts = &active[bi];
        match kind {
            BlockKind::Psd(n) => {
                for (pos, &(l, tl)) in acts.iter().enumerate() {
                    let g = sandwich_sparse(*n, &scal[bi].w, &sparse[l][tl]);
                    for &(k, tk) in &acts[..=pos] {
                        mmat[k * m + l] += sdot(&sparse[k][tk], &g);
                    }
                }
            }
            BlockKind::Nonneg(mlen) => {
                let mut g = vec![0.0; *mlen];
                for (pos, &(l, tl)) in acts.iter().enumerate() {
                    for &(idx, v) in &sparse[l][tl] {
                        let w = scal[bi].w[idx];
                        g[idx] = v * w * w;
                    }
                    for &(k, tk) in &acts[..=pos] {
                        mmat[k * m + l] += sdot(&sparse[k][tk], &g);
                    }
                    for &(idx, _) in &sparse[l][tl] {
                        g[idx] = 0.0;
                    }
                }
            }
        }
    }
    for k in 0..m {
        for l in (k + 1)..m {
            mmat[l * m + k] = mmat[k * m + l];
        }
    }
    let chol = rm::cholesky(m, &mmat, CHOL_BASE_REG).ok()?;
    Some(SchurFactor { mmat, chol })
}

/// Error-free sum: returns `a + b` rounded plus the exact rounding error.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Residual `b - M y` with the products and the accumulation carried in
/// double-double precision (`mul_add` recovers each product's rounding
/// error exactly). Plain-precision residuals would stall the refinement at
/// a forward error of order `eps * cond(M)`, which on late ill-conditioned
/// iterations is exactly the range that matters.
fn compensated_residual(m: usize, mmat: &[f64], y: &[f64], b: &[f64], out: &mut [f64]) {
    for i in 0..m {
        let row = &mmat[i * m..(i + 1) * m];
        let (mut hi, mut lo) = (b[i], 0.0);
        for (&rv, &yv) in row.iter().zip(y.iter()) {
            let p = -(rv * yv);
            let e = (-rv).mul_add(yv, -p);
            let (s, err) = two_sum(hi, p);
            hi = s;
            lo += err + e;
        }
        out[i] = hi + lo;
    }
}

/// Multiplier solve with iterative refinement against the unregularized
/// Schur matrix, using compensated residuals. The refinement removes both
/// the error injected by the Cholesky regularization and the forward error
/// of the factorization itself, which otherwise floor the attainable
/// feasibility on ill-conditioned late iterations.
fn schur_solve(m: usize, schur: &SchurFactor, rhs: &mut [f64]) {
    let b = rhs.to_vec();
    rm::chol_solve(m, &schur.chol, rhs);
    let scale = b.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
    let mut resid = vec![0.0; m];
    for _ in 0..4 {
        compensated_residual(m, &schur.mmat, rhs, &b, &mut resid);
        let rnorm = resid.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if rnorm <= 1e-16 * scale {
            break;
        }
        rm::chol_solve(m, &schur.chol, &mut resid);
        for (sv, cv) in rhs.iter_mut().zip(&resid) {
            *sv += cv;
        }
    }
}

/// Solves one Newton system for a given complementarity target `V`:
/// the scaled directions satisfy `dXhat + dShat = V` together with the full
/// infeasibility reductions for the primal and dual residuals.
#[allow(clippy::too_many_arguments)]
fn newton_step(
    blocks: &[BlockKind],
    cons: &[super::Constraint],
    sparse: &[Vec<Vec<(usize, f64)>>],
    active: &[Vec<(usize, usize)>],
    scal: &[Scaled],
    schur: &SchurFactor,
    rp: &[f64],
    rd: &[Vec<f64>],
    v: &[Vec<f64>],
    m: usize,
) -> Directions {
    let nb = blocks.len();
    // Per block: Wh V Wh and H = Wh V Wh - W Rd W.
    let mut whvwh = Vec::with_capacity(nb);
    let mut h = Vec::with_capacity(nb);
    for bi in 0..nb {
        match blocks[bi] {
            BlockKind::Psd(n) => {
                let a = rm::sandwich(n, &scal[bi].wh, &v[bi]);
                let b = rm::sandwich(n, &scal[bi].w, &rd[bi]);
                let hb: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                whvwh.push(a);
                h.push(hb);
            }
            BlockKind::Nonneg(_) => {
                let a: Vec<f64> = v[bi].iter().zip(&scal[bi].w).map(|(vv, w)| vv * w).collect();
                let hb: Vec<f64> = a
                    .iter()
                    .zip(rd[bi].iter().zip(&scal[bi].w))
                    .map(|(av, (rdv, wv))| av - wv * wv * rdv)
                    .collect();
                whvwh.push(a);
                h.push(hb);
            }
        }
    }

    // Right-hand side rp - <A, H> and multiplier solve.
    let mut rhs = rp.to_vec();
    for (bi, acts) in active.iter().enumerate() {
        for &(k, tk) in acts {
            rhs[k] -= sdot(&sparse[k][tk], &h[bi]);
        }
    }
    schur_solve(m, schur, &mut rhs);
    let dy = rhs;

    // dS = Rd - A^T(dy), then dX = WhVWh - W dS W, and the scaled images.
    let mut ds: Vec<Vec<f64>> = rd.to_vec();
    for (k, c) in cons.iter().enumerate() {
        let dyk = dy[k];
        if dyk == 0.0 {
            continue;
        }
        for (ti, (bi, _)) in c.terms.iter().enumerate() {
            for &(idx, v) in &sparse[k][ti] {
                ds[*bi][idx] -= dyk * v;
            }
        }
    }
    let mut dx = Vec::with_capacity(nb);
    let mut dxh = Vec::with_capacity(nb);
    let mut dsh = Vec::with_capacity(nb);
    for bi in 0..nb {
        match blocks[bi] {
            BlockKind::Psd(n) => {
                let wdsw = rm::sandwich(n, &scal[bi].w, &ds[bi]);
                let dxb: Vec<f64> = whvwh[bi].iter().zip(&wdsw).map(|(a, b)| a - b).collect();
                dxh.push(rm::sandwich(n, &scal[bi].whi, &dxb));
                dsh.push(rm::sandwich(n, &scal[bi].wh, &ds[bi]));
                dx.push(dxb);
            }
            BlockKind::Nonneg(_) => {
                let dxb: Vec<f64> = whvwh[bi]
                    .iter()
                    .zip(ds[bi].iter().zip(&scal[bi].w))
                    .map(|(a, (d, w))| a - w * w * d)
                    .collect();
                dxh.push(dxb.iter().zip(&scal[bi].w).map(|(d, w)| d / w).collect());
                dsh.push(ds[bi].iter().zip(&scal[bi].w).map(|(d, w)| d * w).collect());
                dx.push(dxb);
            }
        }
    }
    let mut dir = Directions { dy, dx, ds, dxh, dsh };

    // Feasibility refinement of the direction. Assembling dX through the
    // scaling sandwiches carries rounding error of order eps*cond(W)^2,
    // which leaks into the primal residual and floors the attainable
    // feasibility on ill-conditioned late iterations. Shifting the
    // multipliers by the Schur solve of the defect closes `A(dX) = rp`
    // while leaving the complementarity equation untouched: the induced
    // corrections to the scaled primal and dual directions cancel exactly.
    let rp_scale = rp.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    for _ in 0..2 {
        let mut defect = rp.to_vec();
        for (bi, acts) in active.iter().enumerate() {
            for &(k, tk) in acts {
                defect[k] -= sdot(&sparse[k][tk], &dir.dx[bi]);
            }
        }
        let dnorm = defect.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if dnorm <= 1e-14 * (1.0 + rp_scale) {
            break;
        }
        schur_solve(m, schur, &mut defect);
        let c = defect;
        let mut e: Vec<Vec<f64>> = dir.dx.iter().map(|b| vec![0.0; b.len()]).collect();
        for (k, con) in cons.iter().enumerate() {
            let ck = c[k];
            if ck == 0.0 {
                continue;
            }
            for (ti, (bi, _)) in con.terms.iter().enumerate() {
                for &(idx, v) in &sparse[k][ti] {
                    e[*bi][idx] += ck * v;
                }
            }
        }
        for bi in 0..nb {
            match blocks[bi] {
                BlockKind::Psd(n) => {
                    let wew = rm::sandwich(n, &scal[bi].w, &e[bi]);
                    let whewh = rm::sandwich(n, &scal[bi].wh, &e[bi]);
                    for i in 0..e[bi].len() {
                        dir.dx[bi][i] += wew[i];
                        dir.ds[bi][i] -= e[bi][i];
                        dir.dxh[bi][i] += whewh[i];
                        dir.dsh[bi][i] -= whewh[i];
                    }
                }
                BlockKind::Nonneg(_) => {
                    for i in 0..e[bi].len() {
                        let w = scal[bi].w[i];
                        dir.dx[bi][i] += w * w * e[bi][i];
                        dir.ds[bi][i] -= e[bi][i];
                        dir.dxh[bi][i] += w * e[bi][i];
                        dir.dsh[bi][i] -= w * e[bi][i];
                    }
                }
            }
        }
        for (dyv, cv) in dir.dy.iter_mut().zip(&c) {
            *dyv += cv;
        }
    }
    dir
}

/// Maximal primal and dual cone steps for a direction.
fn max_steps(
    blocks: &[BlockKind],
    scal: &[Scaled],
    x: &[Vec<f64>],
    s: &[Vec<f64>],
    dir: &Directions,
) -> Option<(f64, f64)> {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for (bi, kind) in blocks.iter().enumerate() {
        match kind {
            BlockKind::Psd(n) => {
                for (dhat, bound) in [(&dir.dxh[bi], &mut ap), (&dir.dsh[bi], &mut ad)] {
                    let t = rm::sandwich(*n, &scal[bi].lam_ih, dhat);
                    let (vals, _) = rm::sym_eigh(*n, &t).ok()?;
                    if vals[0] < 0.0 {
                        *bound = bound.min(-1.0 / vals[0]);
                    }
                }
            }
            BlockKind::Nonneg(mlen) => {
                for j in 0..*mlen {
                    let rx = dir.dx[bi][j] / x[bi][j];
                    if rx < 0.0 {
                        ap = ap.min(-1.0 / rx);
                    }
                    let rs = dir.ds[bi][j] / s[bi][j];
                    if rs < 0.0 {
                        ad = ad.min(-1.0 / rs);
                    }
                }
            }
        }
    }
    Some((ap, ad))
}

/// Centrality measure of the trial point `(x + a_p dx, s + a_d ds)`: the
/// smallest complementarity product eigenvalue divided by the mean product.
/// Returns `-inf` when the trial point leaves the cone interior.
fn neighborhood_ratio(
    blocks: &[BlockKind],
    x: &[Vec<f64>],
    s: &[Vec<f64>],
    dir: &Directions,
    a_p: f64,
    a_d: f64,
    nu: f64,
) -> f64 {
    let mut gap = 0.0;
    let mut lmin = f64::INFINITY;
    for (bi, kind) in blocks.iter().enumerate() {
        let xt: Vec<f64> = x[bi].iter().zip(&dir.dx[bi]).map(|(v, d)| v + a_p * d).collect();
        let st: Vec<f64> = s[bi].iter().zip(&dir.ds[bi]).map(|(v, d)| v + a_d * d).collect();
        match kind {
            BlockKind::Psd(n) => {
                let n = *n;
                let Ok((xv, xw)) = rm::sym_eigh(n, &xt) else { return f64::NEG_INFINITY };
                if xv[0] <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let xh = rm::reconstruct(n, &xv, &xw, |l| l.max(0.0).sqrt());
                let prod = rm::sandwich(n, &xh, &st);
                let Ok((pv, _)) = rm::sym_eigh(n, &prod) else { return f64::NEG_INFINITY };
                if pv[0] <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                lmin = lmin.min(pv[0]);
                gap += rm::dot(&xt, &st);
            }
            BlockKind::Nonneg(mlen) => {
                for j in 0..*mlen {
                    if xt[j] <= 0.0 || st[j] <= 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    let p = xt[j] * st[j];
                    lmin = lmin.min(p);
                    gap += p;
                }
            }
        }
    }
    let mu_t = gap / nu;
    if mu_t <= 0.0 {
        return f64::NEG_INFINITY;
    }
    lmin / mu_t
}

/// Pure centering targets `target*lam^{-1} - lam`, with no second-order
/// correction; used as the fallback direction near the cone boundary.
fn centering_targets(blocks: &[BlockKind], scal: &[Scaled], target: f64) -> Vec<Vec<f64>> {
    blocks
        .iter()
        .enumerate()
        .map(|(bi, kind)| match kind {
            BlockKind::Psd(n) => {
                let n = *n;
                let mut v = vec![0.0; n * n];
                for idx in 0..n * n {
                    v[idx] = target * scal[bi].lam_inv[idx] - scal[bi].lam[idx];
                }
                v
            }
            BlockKind::Nonneg(mlen) => (0..*mlen)
                .map(|j| {
                    let lam = scal[bi].lam[j];
                    target / lam - lam
                })
                .collect(),
        })
        .collect()
}

/// Mehrotra corrector targets `sigma*mu*lam^{-1} - lam - H(dXhat_aff dShat_aff)`
/// with the symmetric quadratic term halved against `lam^{-1}`.
fn corrector_targets(blocks: &[BlockKind], scal: &[Scaled], aff: &Directions, target: f64) -> Vec<Vec<f64>> {
    blocks
        .iter()
        .enumerate()
        .map(|(bi, kind)| match kind {
            BlockKind::Psd(n) => {
                let n = *n;
                let prod = rm::mat_mul(n, &aff.dxh[bi], &aff.dsh[bi]);
                let mut t = prod.clone();
                rm::symmetrize(n, &mut t);
                let mut corr = rm::mat_mul(n, &scal[bi].lam_inv, &t);
                let corr_t = rm::mat_mul(n, &t, &scal[bi].lam_inv);
                for (a, b) in corr.iter_mut().zip(&corr_t) {
                    *a = 0.5 * (*a + *b);
                }
                let mut v = vec![0.0; n * n];
                for idx in 0..n * n {
                    v[idx] = target * scal[bi].lam_inv[idx] - scal[bi].lam[idx] - corr[idx];
                }
                v
            }
            BlockKind::Nonneg(mlen) => (0..*mlen)
                .map(|j| {
                    let lam = scal[bi].lam[j];
                    target / lam - lam - aff.dxh[bi][j] * aff.dsh[bi][j] / lam
                })
                .collect(),
        })
        .collect()
}

fn package(
    status: SolveStatus,
    blocks: &[BlockKind],
    x: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
    y: Vec<f64>,
    meas: &Measure,
    iterations: usize,
) -> ConicSolution {
    let _ = blocks;
    ConicSolution {
        status,
        primal_blocks: x,
        dual_y: y,
        dual_slacks: s,
        obj_primal: meas.pobj,
        obj_dual: meas.dobj,
        rel_gap: meas.rel_gap,
        primal_residual: meas.prim_res,
        dual_residual: meas.dual_res,
        mu: meas.mu,
        iterations,
    }
}
