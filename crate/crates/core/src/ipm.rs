//! Primal–dual interior-point solver for semidefinite programs in
//! arbitrary-precision arithmetic.
//!
//! The problem shape is
//!
//! ```text
//! minimize    ⟨C, X⟩ + c_fᵀ x_f
//! subject to  ⟨A_j, X⟩ + F_jᵀ x_f  =  b_j   (Eq rows)
//!             ⟨A_j, X⟩ + F_jᵀ x_f  ≥  b_j   (Ge rows)
//!             X in a product of PSD blocks and a nonnegative diagonal
//!             block, x_f free.
//! ```
//!
//! Symmetric inner products use upper-triangle storage:
//! `⟨A, X⟩ = Σ_i A_ii X_ii + 2 Σ_{i<j} A_ij X_ij`, so a term `(i, j, a)`
//! with `i < j` stands for the symmetric pair.
//!
//! The algorithm is the standard Nesterov–Todd primal–dual path following
//! with a Mehrotra predictor–corrector step.  For each PSD block with
//! iterates `X, Z ≻ 0` the scaling point is computed from `L = chol(Z)`,
//! the eigendecomposition `Lᵀ X L = Q D Qᵀ`, and `R = L^{-T} Q D^{1/4}`,
//! which gives `W = R Rᵀ` with `W Z W = X` and maps both iterates to the
//! same diagonal `R^{-1} X R^{-T} = Rᵀ Z R = D^{1/2}`.  Search directions
//! are obtained from the Schur complement `M_jl = ⟨A_j, W A_l W⟩`, which is
//! positive definite whenever the constraint matrix has full row rank.
//! Free variables are kept exact through the bordered saddle system
//!
//! ```text
//! [ M   F ] [Δy  ]   [rhs]
//! [ Fᵀ  0 ] [Δx_f] = [r_f]
//! ```
//!
//! eliminated with one Cholesky factorization of `M` plus a small dense
//! solve with `Fᵀ M^{-1} F`.  Inequality rows receive one internal slack
//! variable each in an appended nonnegative block, which also guarantees
//! their Schur rows are independent.
//!
//! Determinism: identical inputs produce bit-identical iterates.  All
//! reductions run in fixed order; the parallelism (rayon) is only over
//! independently computed entries.  The per-iteration [`IterLog`] doubles
//! as a regression surface for that property.

use rayon::prelude::*;
use rug::{Assign, Float};
use thiserror::Error;

use crate::hp::Prec;
use crate::linalg::{self, Mat};

/// One conic block of the variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeBlock {
    /// Dense symmetric positive semidefinite block of the given side length.
    Psd(usize),
    /// Componentwise nonnegative diagonal block of the given length.
    Nonneg(usize),
}

impl ConeBlock {
    pub fn size(&self) -> usize {
        match self {
            ConeBlock::Psd(s) | ConeBlock::Nonneg(s) => *s,
        }
    }
}

/// A single coefficient of a constraint or objective: entry `(i, j)` of
/// block `block` with `i ≤ j`.
#[derive(Clone, Debug)]
pub struct SdpTerm {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: Float,
}

/// Row sense.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Eq,
    Ge,
}

/// One constraint row.
#[derive(Clone, Debug)]
pub struct SdpRow {
    pub kind: RowKind,
    pub terms: Vec<SdpTerm>,
    /// Coefficients on the free variables, `(index, value)`.
    pub free: Vec<(usize, Float)>,
    pub rhs: Float,
}

/// A complete problem instance.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub prec: Prec,
    pub blocks: Vec<ConeBlock>,
    pub num_free: usize,
    /// Objective coefficients on the conic part.
    pub obj: Vec<SdpTerm>,
    /// Objective coefficients on the free part.
    pub obj_free: Vec<(usize, Float)>,
    pub rows: Vec<SdpRow>,
}

/// Solver tuning knobs.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Working precision in bits (values below 128 are raised to 128).
    pub prec: Prec,
    /// Relative duality-gap tolerance.
    pub tol_gap: f64,
    /// Relative primal/dual feasibility tolerance.
    pub tol_feas: f64,
    pub max_iter: usize,
    /// Fraction of the maximal cone step taken (0 < step_frac < 1).
    pub step_frac: f64,
    /// Scale of the identity initial iterates.
    pub init_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            prec: 256,
            tol_gap: 1e-14,
            tol_feas: 1e-14,
            max_iter: 200,
            step_frac: 0.98,
            init_scale: 4.0,
        }
    }
}

/// Value of one conic block in a solution.
#[derive(Clone, Debug)]
pub enum BlockSol {
    Psd(Mat),
    Diag(Vec<Float>),
}

/// Per-iteration progress record (all `f64`, bit-stable across runs with
/// identical inputs).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterLog {
    pub mu: f64,
    pub sigma: f64,
    pub alpha_primal: f64,
    pub alpha_dual: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub rel_gap: f64,
}

/// Solution returned on convergence.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub x_blocks: Vec<BlockSol>,
    pub x_free: Vec<Float>,
    /// Row multipliers in the *original* row scaling; `Ge` rows come out
    /// nonnegative.
    pub y: Vec<Float>,
    pub z_blocks: Vec<BlockSol>,
    pub primal_obj: Float,
    pub dual_obj: Float,
    pub iterations: usize,
    pub log: Vec<IterLog>,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("iteration limit reached after {iterations} iterations (rel gap {rel_gap:e})")]
    IterationLimit { iterations: usize, rel_gap: f64 },
    #[error("numerical breakdown: {0}")]
    Breakdown(String),
}

impl SdpProblem {
    /// Structural validation: indices in range, `i ≤ j`, diagonal-only
    /// nonnegative entries, no duplicate coordinates within one row, and
    /// every row touching the conic part directly or via its `Ge` slack.
    pub fn validate(&self) -> Result<(), String> {
        let check_terms = |terms: &[SdpTerm], what: &str| -> Result<(), String> {
            let mut seen = std::collections::HashSet::new();
            for t in terms {
                let b = self
                    .blocks
                    .get(t.block)
                    .ok_or(format!("{what}: block {} out of range", t.block))?;
                if t.i > t.j {
                    return Err(format!("{what}: lower-triangle coordinate"));
                }
                if t.j >= b.size() {
                    return Err(format!("{what}: index {} exceeds block", t.j));
                }
                if matches!(b, ConeBlock::Nonneg(_)) && t.i != t.j {
                    return Err(format!("{what}: off-diagonal entry in diagonal block"));
                }
                if !seen.insert((t.block, t.i, t.j)) {
                    return Err(format!("{what}: duplicate entry"));
                }
            }
            Ok(())
        };
        if self.blocks.iter().any(|b| b.size() == 0) {
            return Err("empty block".into());
        }
        check_terms(&self.obj, "objective")?;
        for (fi, _) in &self.obj_free {
            if *fi >= self.num_free {
                return Err("objective: free index out of range".into());
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            check_terms(&row.terms, &format!("row {r}"))?;
            let mut seen = std::collections::HashSet::new();
            for (fi, _) in &row.free {
                if *fi >= self.num_free {
                    return Err(format!("row {r}: free index out of range"));
                }
                if !seen.insert(*fi) {
                    return Err(format!("row {r}: duplicate free index"));
                }
            }
            if row.terms.is_empty() && row.free.is_empty() {
                return Err(format!("row {r}: empty"));
            }
            if row.terms.is_empty() && row.kind == RowKind::Eq {
                return Err(format!(
                    "row {r}: equality row without conic entries makes the Schur complement singular"
                ));
            }
        }
        Ok(())
    }

    /// `⟨A_j, X⟩ + F_jᵀ x_f` for every row at a solution.
    pub fn row_activity(&self, sol: &SdpSolution) -> Vec<Float> {
        let prec = self.prec;
        self.rows
            .iter()
            .map(|row| {
                let mut acc = Float::new(prec);
                for t in &row.terms {
                    let v = match &sol.x_blocks[t.block] {
                        BlockSol::Psd(m) => m[(t.i, t.j)].clone(),
                        BlockSol::Diag(d) => d[t.i].clone(),
                    };
                    let mut c = Float::with_val(prec, &t.value * &v);
                    if t.i != t.j {
                        c *= 2;
                    }
                    acc += c;
                }
                for (fi, a) in &row.free {
                    acc += Float::with_val(prec, a * &sol.x_free[*fi]);
                }
                acc
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Internal canonical form
// ---------------------------------------------------------------------------

/// Sparse row against one block: `(i, j, value)` with `i ≤ j`.
type BlockTerms = Vec<(usize, usize, Float)>;

struct Canon {
    prec: Prec,
    blocks: Vec<ConeBlock>,
    /// Per row, per block, the sparse terms.
    rows: Vec<Vec<BlockTerms>>,
    row_free: Vec<Vec<(usize, Float)>>,
    b: Vec<Float>,
    /// C densified per block.
    c_blocks: Vec<BlockSol>,
    c_free: Vec<Float>,
    num_free: usize,
    /// Multiplier applied to each original row (equilibration); the slack
    /// block index if any `Ge` rows exist.
    row_scale: Vec<Float>,
    num_orig_blocks: usize,
}

fn canonicalize(p: &SdpProblem, prec: Prec) -> Canon {
    let num_ge = p.rows.iter().filter(|r| r.kind == RowKind::Ge).count();
    let mut blocks = p.blocks.clone();
    let slack_block = if num_ge > 0 {
        blocks.push(ConeBlock::Nonneg(num_ge));
        Some(blocks.len() - 1)
    } else {
        None
    };
    let nb = blocks.len();

    let mut c_blocks: Vec<BlockSol> = blocks
        .iter()
        .map(|b| match b {
            ConeBlock::Psd(s) => BlockSol::Psd(Mat::zeros(prec, *s, *s)),
            ConeBlock::Nonneg(s) => BlockSol::Diag((0..*s).map(|_| Float::new(prec)).collect()),
        })
        .collect();
    for t in &p.obj {
        match &mut c_blocks[t.block] {
            BlockSol::Psd(m) => {
                m[(t.i, t.j)] = t.value.clone();
                m[(t.j, t.i)] = t.value.clone();
            }
            BlockSol::Diag(d) => d[t.i] = t.value.clone(),
        }
    }
    let mut c_free: Vec<Float> = (0..p.num_free).map(|_| Float::new(prec)).collect();
    for (fi, a) in &p.obj_free {
        c_free[*fi] = a.clone();
    }

    let mut rows = Vec::with_capacity(p.rows.len());
    let mut row_free = Vec::with_capacity(p.rows.len());
    let mut b_vec = Vec::with_capacity(p.rows.len());
    let mut row_scale = Vec::with_capacity(p.rows.len());
    let mut ge_seen = 0usize;
    for row in &p.rows {
        // Equilibrate: divide the row by its largest absolute coefficient.
        let mut maxc = Float::new(prec);
        for t in &row.terms {
            let a = t.value.clone().abs();
            if a > maxc {
                maxc = a;
            }
        }
        for (_, a) in &row.free {
            let a = a.clone().abs();
            if a > maxc {
                maxc = a;
            }
        }
        if maxc.is_zero() {
            maxc = Float::with_val(prec, 1);
        }
        let scale = Float::with_val(prec, 1u32) / &maxc;
        let mut per_block: Vec<BlockTerms> = vec![Vec::new(); nb];
        for t in &row.terms {
            per_block[t.block].push((t.i, t.j, Float::with_val(prec, &t.value * &scale)));
        }
        if row.kind == RowKind::Ge {
            // ⟨A, X⟩ - s = b with s ≥ 0.
            per_block[slack_block.unwrap()].push((ge_seen, ge_seen, Float::with_val(prec, -1)));
            ge_seen += 1;
        }
        for bt in per_block.iter_mut() {
            bt.sort_by_key(|(i, j, _)| (*i, *j));
        }
        rows.push(per_block);
        row_free.push(
            row.free
                .iter()
                .map(|(fi, a)| (*fi, Float::with_val(prec, a * &scale)))
                .collect(),
        );
        b_vec.push(Float::with_val(prec, &row.rhs * &scale));
        row_scale.push(scale);
    }

    Canon {
        prec,
        blocks,
        rows,
        row_free,
        b: b_vec,
        c_blocks,
        c_free,
        num_free: p.num_free,
        row_scale,
        num_orig_blocks: p.blocks.len(),
    }
}

// ---------------------------------------------------------------------------
// Block-wise state and scaling
// ---------------------------------------------------------------------------

#[derive(Clone)]
enum BlockVal {
    Psd(Mat),
    Diag(Vec<Float>),
}

impl BlockVal {
    fn scaled_identity(prec: Prec, b: &ConeBlock, s: f64) -> BlockVal {
        match b {
            ConeBlock::Psd(n) => {
                let mut m = Mat::zeros(prec, *n, *n);
                for i in 0..*n {
                    m[(i, i)] = Float::with_val(prec, s);
                }
                BlockVal::Psd(m)
            }
            ConeBlock::Nonneg(n) => {
                BlockVal::Diag((0..*n).map(|_| Float::with_val(prec, s)).collect())
            }
        }
    }

    fn axpy(&mut self, prec: Prec, alpha: &Float, other: &BlockVal) {
        match (self, other) {
            (BlockVal::Psd(a), BlockVal::Psd(d)) => {
                for i in 0..a.rows {
                    for j in 0..a.cols {
                        a[(i, j)] += Float::with_val(prec, alpha * &d[(i, j)]);
                    }
                }
            }
            (BlockVal::Diag(a), BlockVal::Diag(d)) => {
                for (x, dx) in a.iter_mut().zip(d.iter()) {
                    *x += Float::with_val(prec, alpha * dx);
                }
            }
            _ => unreachable!("block kind mismatch"),
        }
    }

    fn inner(&self, prec: Prec, other: &BlockVal) -> Float {
        let mut acc = Float::new(prec);
        match (self, other) {
            (BlockVal::Psd(a), BlockVal::Psd(b)) => {
                for i in 0..a.rows {
                    for j in 0..a.cols {
                        acc += Float::with_val(prec, &a[(i, j)] * &b[(i, j)]);
                    }
                }
            }
            (BlockVal::Diag(a), BlockVal::Diag(b)) => {
                for (x, y) in a.iter().zip(b.iter()) {
                    acc += Float::with_val(prec, x * y);
                }
            }
            _ => unreachable!("block kind mismatch"),
        }
        acc
    }

    fn max_abs(&self) -> f64 {
        match self {
            BlockVal::Psd(m) => m.max_abs().to_f64(),
            BlockVal::Diag(d) => d
                .iter()
                .map(|x| x.clone().abs().to_f64())
                .fold(0.0, f64::max),
        }
    }
}

/// Nesterov–Todd scaling data for one block.
enum Scaling {
    Psd {
        /// `W = R Rᵀ`, dense.
        w: Mat,
        r: Mat,
        /// `λ = diag(D^{1/2})`: the common scaled spectrum of X and Z.
        lambda: Vec<Float>,
    },
    Diag {
        w: Vec<Float>,
        lambda: Vec<Float>,
    },
}

fn make_scaling(prec: Prec, x: &BlockVal, z: &BlockVal) -> Result<Scaling, SolverError> {
    match (x, z) {
        (BlockVal::Psd(x), BlockVal::Psd(z)) => {
            let lz = linalg::cholesky(prec, z)
                .map_err(|e| SolverError::Breakdown(format!("Z factorization: {e}")))?;
            // K = Lᵀ X L.
            let xt = x.matmul(prec, &lz);
            let k = lz.transpose().matmul(prec, &xt);
            let (d, q) = linalg::sym_eig(prec, &k)
                .map_err(|e| SolverError::Breakdown(format!("NT eigendecomposition: {e}")))?;
            if d.iter().any(|v| *v <= 0) {
                return Err(SolverError::Breakdown(
                    "scaled iterate lost positive definiteness".into(),
                ));
            }
            let n = d.len();
            let d4: Vec<Float> = d
                .iter()
                .map(|v| {
                    let s = v.clone().sqrt();
                    s.sqrt()
                })
                .collect();
            let lambda: Vec<Float> = d.iter().map(|v| v.clone().sqrt()).collect();
            // R = L^{-T} Q D^{1/4}: columns solved against Lᵀ.
            let mut r = Mat::zeros(prec, n, n);
            for j in 0..n {
                let col: Vec<Float> = (0..n)
                    .map(|i| Float::with_val(prec, &q[(i, j)] * &d4[j]))
                    .collect();
                let solved = linalg::solve_lower_t(prec, &lz, &col);
                for i in 0..n {
                    r[(i, j)] = solved[i].clone();
                }
            }
            let mut w = r.matmul(prec, &r.transpose());
            // Rounding makes the two triangles differ in the last bits;
            // the iteration (and the archived iterates) rely on exact
            // symmetry.
            w.symmetrize_from_upper();
            Ok(Scaling::Psd { w, r, lambda })
        }
        (BlockVal::Diag(x), BlockVal::Diag(z)) => {
            let mut w = Vec::with_capacity(x.len());
            let mut lambda = Vec::with_capacity(x.len());
            for (xi, zi) in x.iter().zip(z.iter()) {
                if *xi <= 0 || *zi <= 0 {
                    return Err(SolverError::Breakdown(
                        "nonnegative iterate lost positivity".into(),
                    ));
                }
                w.push(Float::with_val(prec, xi / zi).sqrt());
                lambda.push(Float::with_val(prec, xi * zi).sqrt());
            }
            Ok(Scaling::Diag { w, lambda })
        }
        _ => unreachable!("block kind mismatch"),
    }
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

struct Workspace {
    prec: Prec,
    canon: Canon,
    m: usize,
    nu: f64,
}

/// Solves the problem; see the module documentation for the algorithm.
pub fn solve(problem: &SdpProblem, config: &SolverConfig) -> Result<SdpSolution, SolverError> {
    problem.validate().map_err(SolverError::Invalid)?;
    let prec = config.prec.max(128);
    let canon = canonicalize(problem, prec);
    let m = canon.rows.len();
    if m == 0 {
        return Err(SolverError::Invalid("no constraint rows".into()));
    }
    let nu: f64 = canon.blocks.iter().map(|b| b.size() as f64).sum();
    let ws = Workspace {
        prec,
        canon,
        m,
        nu,
    };
    run(config, ws)
}

#[allow(clippy::too_many_lines)]
fn run(config: &SolverConfig, ws: Workspace) -> Result<SdpSolution, SolverError> {
    let prec = ws.prec;
    let canon = &ws.canon;
    let m = ws.m;
    let nf = canon.num_free;

    // Initial iterates: scaled identities sized from the data.
    let bmax = canon.b.iter().map(|x| x.clone().abs().to_f64()).fold(0.0, f64::max);
    let cmax = canon
        .c_blocks
        .iter()
        .map(|c| match c {
            BlockSol::Psd(m) => m.max_abs().to_f64(),
            BlockSol::Diag(d) => d.iter().map(|x| x.clone().abs().to_f64()).fold(0.0, f64::max),
        })
        .fold(0.0, f64::max);
    let sp = config.init_scale * (1.0 + bmax);
    let sd = config.init_scale * (1.0 + cmax);
    let mut x: Vec<BlockVal> = canon
        .blocks
        .iter()
        .map(|b| BlockVal::scaled_identity(prec, b, sp))
        .collect();
    let mut z: Vec<BlockVal> = canon
        .blocks
        .iter()
        .map(|b| BlockVal::scaled_identity(prec, b, sd))
        .collect();
    let c_vals: Vec<BlockVal> = canon
        .c_blocks
        .iter()
        .map(|c| match c {
            BlockSol::Psd(m) => BlockVal::Psd(m.clone()),
            BlockSol::Diag(d) => BlockVal::Diag(d.clone()),
        })
        .collect();
    let mut xf: Vec<Float> = (0..nf).map(|_| Float::new(prec)).collect();
    let mut y: Vec<Float> = (0..m).map(|_| Float::new(prec)).collect();
    let mut log: Vec<IterLog> = Vec::new();

    let tol_gap = Float::with_val(prec, config.tol_gap);
    let tol_feas = Float::with_val(prec, config.tol_feas);

    for iteration in 0..=config.max_iter {
        // Residuals and measures at the current point.
        let rp: Vec<Float> = (0..m)
            .map(|j| {
                let mut acc = canon.b[j].clone();
                for (bi, terms) in canon.rows[j].iter().enumerate() {
                    acc -= inner_sparse(prec, terms, &x[bi]);
                }
                for (fi, a) in &canon.row_free[j] {
                    acc -= Float::with_val(prec, a * &xf[*fi]);
                }
                acc
            })
            .collect();
        let rd: Vec<BlockVal> = (0..canon.blocks.len())
            .map(|bi| {
                let mut r = c_vals[bi].clone();
                r.axpy(prec, &Float::with_val(prec, -1), &z[bi]);
                for j in 0..m {
                    if y[j].is_zero() {
                        continue;
                    }
                    sub_scaled_sparse(prec, &mut r, &canon.rows[j][bi], &y[j]);
                }
                r
            })
            .collect();
        let rf: Vec<Float> = (0..nf)
            .map(|fi| {
                let mut acc = canon.c_free[fi].clone();
                for j in 0..m {
                    if let Some((_, a)) = canon.row_free[j].iter().find(|(k, _)| *k == fi) {
                        acc -= Float::with_val(prec, a * &y[j]);
                    }
                }
                acc
            })
            .collect();

        let gap: Float = x
            .iter()
            .zip(z.iter())
            .fold(Float::new(prec), |acc, (xb, zb)| {
                acc + xb.inner(prec, zb)
            });
        let mu = Float::with_val(prec, &gap / ws.nu);
        let pobj = {
            let mut acc = Float::new(prec);
            for (cb, xb) in c_vals.iter().zip(x.iter()) {
                acc += cb.inner(prec, xb);
            }
            for (cf, v) in canon.c_free.iter().zip(xf.iter()) {
                acc += Float::with_val(prec, cf * v);
            }
            acc
        };
        let dobj: Float = canon
            .b
            .iter()
            .zip(y.iter())
            .fold(Float::new(prec), |acc, (bj, yj)| {
                acc + Float::with_val(prec, bj * yj)
            });

        let pres = rp
            .iter()
            .map(|v| v.clone().abs())
            .fold(Float::new(prec), |a, b| if b > a { b } else { a })
            / (1.0 + bmax);
        let dres_abs = rd
            .iter()
            .map(|r| r.max_abs())
            .chain(rf.iter().map(|v| v.clone().abs().to_f64()))
            .fold(0.0, f64::max);
        let dres = Float::with_val(prec, dres_abs / (1.0 + cmax));
        let denom = Float::with_val(
            prec,
            1.0 + pobj.clone().abs().to_f64() + dobj.clone().abs().to_f64(),
        );
        let rel_gap = Float::with_val(prec, &gap / &denom);

        if pres <= tol_feas && dres <= tol_feas && rel_gap <= tol_gap {
            return Ok(finish(canon, x, xf, y, z, pobj, dobj, iteration, log));
        }
        if iteration == config.max_iter {
            return Err(SolverError::IterationLimit {
                iterations: iteration,
                rel_gap: rel_gap.to_f64(),
            });
        }
        if !mu.is_finite() || mu < 0 {
            return Err(SolverError::Breakdown("complementarity went negative".into()));
        }

        // Scaling and Schur complement.
        let scalings: Vec<Scaling> = x
            .iter()
            .zip(z.iter())
            .map(|(xb, zb)| make_scaling(prec, xb, zb))
            .collect::<Result<_, _>>()?;
        let schur = build_schur(prec, canon, &scalings, m);
        let lchol = chol_with_shift(prec, &schur)?;

        // Free-variable reduction: G = M^{-1} F, S_f = Fᵀ G.
        let (fmat, gmat, sf_chol) = if nf > 0 {
            let mut fmat = Mat::zeros(prec, m, nf);
            for j in 0..m {
                for (fi, a) in &canon.row_free[j] {
                    fmat[(j, *fi)] = a.clone();
                }
            }
            let mut gmat = Mat::zeros(prec, m, nf);
            for c in 0..nf {
                let col: Vec<Float> = (0..m).map(|j| fmat[(j, c)].clone()).collect();
                let sol = linalg::cholesky_solve(prec, &lchol, &col);
                for j in 0..m {
                    gmat[(j, c)] = sol[j].clone();
                }
            }
            let sf = fmat.transpose().matmul(prec, &gmat);
            let sf_chol = linalg::cholesky(prec, &sf).map_err(|e| {
                SolverError::Breakdown(format!("free-variable reduction is singular: {e}"))
            })?;
            (Some(fmat), Some(gmat), Some(sf_chol))
        } else {
            (None, None, None)
        };

        // W rd W per block, reused by both solves this iteration.
        let wrdw: Vec<BlockVal> = scalings
            .iter()
            .zip(rd.iter())
            .map(|(sc, r)| apply_w_both_sides(prec, sc, r))
            .collect();

        let solve_dir = |rc: &[BlockVal]| -> Result<Direction, SolverError> {
            direction(
                prec,
                canon,
                &scalings,
                &lchol,
                fmat.as_ref(),
                gmat.as_ref(),
                sf_chol.as_ref(),
                &rp,
                &rd,
                &rf,
                &wrdw,
                rc,
                m,
                nf,
            )
        };

        // Predictor: rc = -Λ².
        let rc_aff: Vec<BlockVal> = scalings
            .iter()
            .map(|sc| match sc {
                Scaling::Psd { lambda, .. } => {
                    let n = lambda.len();
                    let mut mmat = Mat::zeros(prec, n, n);
                    for i in 0..n {
                        mmat[(i, i)] = -Float::with_val(prec, &lambda[i] * &lambda[i]);
                    }
                    BlockVal::Psd(mmat)
                }
                Scaling::Diag { lambda, .. } => BlockVal::Diag(
                    lambda
                        .iter()
                        .map(|l| -Float::with_val(prec, l * l))
                        .collect(),
                ),
            })
            .collect();
        let aff = solve_dir(&rc_aff)?;
        let alpha_aff = max_step_scaled(prec, &scalings, &aff.dxt, 1.0);
        let beta_aff = max_step_scaled(prec, &scalings, &aff.dzt, 1.0);

        // μ after the affine step, in the scaled space where X̃ = Z̃ = Λ.
        let mu_aff = {
            let mut acc = Float::new(prec);
            for (sc, (dxt, dzt)) in scalings.iter().zip(aff.dxt.iter().zip(aff.dzt.iter())) {
                let lambda = match sc {
                    Scaling::Psd { lambda, .. } | Scaling::Diag { lambda, .. } => lambda,
                };
                match (dxt, dzt) {
                    (BlockVal::Psd(dx), BlockVal::Psd(dz)) => {
                        let n = lambda.len();
                        for i in 0..n {
                            for j in 0..n {
                                let xv = if i == j {
                                    lambda[i].clone() + Float::with_val(prec, &alpha_aff * &dx[(i, j)])
                                } else {
                                    Float::with_val(prec, &alpha_aff * &dx[(i, j)])
                                };
                                let zv = if i == j {
                                    lambda[i].clone() + Float::with_val(prec, &beta_aff * &dz[(i, j)])
                                } else {
                                    Float::with_val(prec, &beta_aff * &dz[(i, j)])
                                };
                                acc += xv * zv;
                            }
                        }
                    }
                    (BlockVal::Diag(dx), BlockVal::Diag(dz)) => {
                        for (i, l) in lambda.iter().enumerate() {
                            let xv = l.clone() + Float::with_val(prec, &alpha_aff * &dx[i]);
                            let zv = l.clone() + Float::with_val(prec, &beta_aff * &dz[i]);
                            acc += xv * zv;
                        }
                    }
                    _ => unreachable!(),
                }
            }
            acc / ws.nu
        };
        let ratio = Float::with_val(prec, &mu_aff / &mu).to_f64().max(0.0);
        let sigma = (ratio * ratio * ratio).clamp(1e-12, 1.0 - 1e-12);

        // Corrector: rc = σμ I - Λ² - sym(dX̃_a dZ̃_a).
        let sigmu = Float::with_val(prec, &mu * sigma);
        let rc_cor: Vec<BlockVal> = scalings
            .iter()
            .zip(aff.dxt.iter().zip(aff.dzt.iter()))
            .map(|(sc, (dxt, dzt))| match (sc, dxt, dzt) {
                (Scaling::Psd { lambda, .. }, BlockVal::Psd(dx), BlockVal::Psd(dz)) => {
                    let n = lambda.len();
                    let prod = dx.matmul(prec, dz);
                    let mut rc = Mat::zeros(prec, n, n);
                    for i in 0..n {
                        for j in 0..n {
                            let sym = Float::with_val(
                                prec,
                                &prod[(i, j)] + &prod[(j, i)],
                            ) / 2u32;
                            let mut v = -sym;
                            if i == j {
                                v += &sigmu;
                                v -= Float::with_val(prec, &lambda[i] * &lambda[i]);
                            }
                            rc[(i, j)] = v;
                        }
                    }
                    BlockVal::Psd(rc)
                }
                (Scaling::Diag { lambda, .. }, BlockVal::Diag(dx), BlockVal::Diag(dz)) => {
                    BlockVal::Diag(
                        lambda
                            .iter()
                            .zip(dx.iter().zip(dz.iter()))
                            .map(|(l, (a, b))| {
                                let mut v = sigmu.clone();
                                v -= Float::with_val(prec, l * l);
                                v -= Float::with_val(prec, a * b);
                                v
                            })
                            .collect(),
                    )
                }
                _ => unreachable!(),
            })
            .collect();
        let cor = solve_dir(&rc_cor)?;
        let alpha = max_step_scaled(prec, &scalings, &cor.dxt, config.step_frac).min(1.0);
        let beta = max_step_scaled(prec, &scalings, &cor.dzt, config.step_frac).min(1.0);

        log.push(IterLog {
            mu: mu.to_f64(),
            sigma,
            alpha_primal: alpha,
            alpha_dual: beta,
            primal_res: pres.to_f64(),
            dual_res: dres.to_f64(),
            rel_gap: rel_gap.to_f64(),
        });

        // Updates.
        let af = Float::with_val(prec, alpha);
        let bf = Float::with_val(prec, beta);
        for (xb, dxb) in x.iter_mut().zip(cor.dx.iter()) {
            xb.axpy(prec, &af, dxb);
        }
        for (v, dv) in xf.iter_mut().zip(cor.dxf.iter()) {
            *v += Float::with_val(prec, &af * dv);
        }
        for (zb, dzb) in z.iter_mut().zip(cor.dz.iter()) {
            zb.axpy(prec, &bf, dzb);
        }
        for (v, dv) in y.iter_mut().zip(cor.dy.iter()) {
            *v += Float::with_val(prec, &bf * dv);
        }
    }
    unreachable!("loop always returns");
}

struct Direction {
    dy: Vec<Float>,
    dxf: Vec<Float>,
    dx: Vec<BlockVal>,
    dz: Vec<BlockVal>,
    dxt: Vec<BlockVal>,
    dzt: Vec<BlockVal>,
}

#[allow(clippy::too_many_arguments)]
fn direction(
    prec: Prec,
    canon: &Canon,
    scalings: &[Scaling],
    lchol: &Mat,
    fmat: Option<&Mat>,
    gmat: Option<&Mat>,
    sf_chol: Option<&Mat>,
    rp: &[Float],
    rd: &[BlockVal],
    rf: &[Float],
    wrdw: &[BlockVal],
    rc: &[BlockVal],
    m: usize,
    nf: usize,
) -> Result<Direction, SolverError> {
    // CwRc = R Λ^{-1}(rc) Rᵀ per block.
    let cwrc: Vec<BlockVal> = scalings
        .iter()
        .zip(rc.iter())
        .map(|(sc, r)| match (sc, r) {
            (Scaling::Psd { r: rm, lambda, .. }, BlockVal::Psd(h)) => {
                let n = lambda.len();
                let mut lam_inv = Mat::zeros(prec, n, n);
                for i in 0..n {
                    for j in 0..n {
                        let denom = Float::with_val(prec, &lambda[i] + &lambda[j]);
                        lam_inv[(i, j)] =
                            Float::with_val(prec, 2 * &h[(i, j)]) / denom;
                    }
                }
                let t = rm.matmul(prec, &lam_inv);
                BlockVal::Psd(t.matmul(prec, &rm.transpose()))
            }
            (Scaling::Diag { w, lambda }, BlockVal::Diag(h)) => BlockVal::Diag(
                w.iter()
                    .zip(lambda.iter().zip(h.iter()))
                    .map(|(wi, (li, hi))| Float::with_val(prec, wi * hi) / li)
                    .collect(),
            ),
            _ => unreachable!(),
        })
        .collect();

    // rhs_j = rp_j + ⟨A_j, W rd W⟩ - ⟨A_j, CwRc⟩.
    let rhs: Vec<Float> = (0..m)
        .map(|j| {
            let mut acc = rp[j].clone();
            for (bi, terms) in canon.rows[j].iter().enumerate() {
                acc += inner_sparse(prec, terms, &wrdw[bi]);
                acc -= inner_sparse(prec, terms, &cwrc[bi]);
            }
            acc
        })
        .collect();

    // Saddle solve.
    let (dy, dxf) = if nf > 0 {
        let fmat = fmat.unwrap();
        let gmat = gmat.unwrap();
        let sf_chol = sf_chol.unwrap();
        // S_f dxf = Fᵀ M^{-1} rhs - rf.
        let minv_rhs = linalg::cholesky_solve(prec, lchol, &rhs);
        let mut rhs_f: Vec<Float> = (0..nf)
            .map(|c| {
                let mut acc = Float::new(prec);
                for j in 0..m {
                    acc += Float::with_val(prec, &fmat[(j, c)] * &minv_rhs[j]);
                }
                acc
            })
            .collect();
        for (a, r) in rhs_f.iter_mut().zip(rf.iter()) {
            *a -= r;
        }
        let dxf = linalg::cholesky_solve(prec, sf_chol, &rhs_f);
        // dy = M^{-1} rhs - G dxf.
        let gdx = gmat.mul_vec(prec, &dxf);
        let dy: Vec<Float> = minv_rhs
            .iter()
            .zip(gdx.iter())
            .map(|(a, b)| Float::with_val(prec, a - b))
            .collect();
        (dy, dxf)
    } else {
        (linalg::cholesky_solve(prec, lchol, &rhs), Vec::new())
    };

    // ΔZ = rd - Σ dy_j A_j;  dZ̃ = Rᵀ ΔZ R;  dX̃ = Λ^{-1}(rc) - dZ̃;
    // ΔX = R dX̃ Rᵀ.
    let nb = canon.blocks.len();
    let mut dz = Vec::with_capacity(nb);
    for bi in 0..nb {
        let mut r = rd[bi].clone();
        for (j, dyj) in dy.iter().enumerate() {
            if dyj.is_zero() {
                continue;
            }
            sub_scaled_sparse(prec, &mut r, &canon.rows[j][bi], dyj);
        }
        dz.push(r);
    }
    let mut dzt = Vec::with_capacity(nb);
    let mut dxt = Vec::with_capacity(nb);
    let mut dx = Vec::with_capacity(nb);
    for bi in 0..nb {
        match (&scalings[bi], &dz[bi], &rc[bi]) {
            (Scaling::Psd { r, lambda, .. }, BlockVal::Psd(dzb), BlockVal::Psd(h)) => {
                let n = lambda.len();
                let mut t = r.transpose().matmul(prec, &dzb.matmul(prec, r));
                t.symmetrize_from_upper();
                let mut dxtb = Mat::zeros(prec, n, n);
                for i in 0..n {
                    for j in 0..n {
                        let denom = Float::with_val(prec, &lambda[i] + &lambda[j]);
                        let lam = Float::with_val(prec, 2 * &h[(i, j)]) / denom;
                        dxtb[(i, j)] = lam - &t[(i, j)];
                    }
                }
                let mut dxb = r.matmul(prec, &dxtb.matmul(prec, &r.transpose()));
                dxb.symmetrize_from_upper();
                dzt.push(BlockVal::Psd(t));
                dxt.push(BlockVal::Psd(dxtb));
                dx.push(BlockVal::Psd(dxb));
            }
            (Scaling::Diag { w, lambda }, BlockVal::Diag(dzb), BlockVal::Diag(h)) => {
                let t: Vec<Float> = w
                    .iter()
                    .zip(dzb.iter())
                    .map(|(wi, d)| Float::with_val(prec, wi * d))
                    .collect();
                let dxtb: Vec<Float> = lambda
                    .iter()
                    .zip(h.iter().zip(t.iter()))
                    .map(|(l, (hi, ti))| Float::with_val(prec, hi / l) - ti)
                    .collect();
                let dxb: Vec<Float> = w
                    .iter()
                    .zip(dxtb.iter())
                    .map(|(wi, d)| Float::with_val(prec, wi * d))
                    .collect();
                dzt.push(BlockVal::Diag(t));
                dxt.push(BlockVal::Diag(dxtb));
                dx.push(BlockVal::Diag(dxb));
            }
            _ => unreachable!(),
        }
    }

    Ok(Direction {
        dy,
        dxf,
        dx,
        dz,
        dxt,
        dzt,
    })
}

/// `⟨A, S⟩` for sparse upper-triangle terms against a dense block value.
fn inner_sparse(prec: Prec, terms: &[(usize, usize, Float)], s: &BlockVal) -> Float {
    let mut acc = Float::new(prec);
    let mut t = Float::new(prec);
    match s {
        BlockVal::Psd(mat) => {
            for (i, j, a) in terms {
                t.assign(a * &mat[(*i, *j)]);
                if i != j {
                    t *= 2;
                }
                acc += &t;
            }
        }
        BlockVal::Diag(d) => {
            for (i, _, a) in terms {
                t.assign(a * &d[*i]);
                acc += &t;
            }
        }
    }
    acc
}

/// `r -= c · A` for sparse symmetric terms.
fn sub_scaled_sparse(prec: Prec, r: &mut BlockVal, terms: &[(usize, usize, Float)], c: &Float) {
    match r {
        BlockVal::Psd(mat) => {
            for (i, j, a) in terms {
                let t = Float::with_val(prec, a * c);
                mat[(*i, *j)] -= &t;
                if i != j {
                    mat[(*j, *i)] -= &t;
                }
            }
        }
        BlockVal::Diag(d) => {
            for (i, _, a) in terms {
                d[*i] -= Float::with_val(prec, a * c);
            }
        }
    }
}

/// `W S W` for one block.
fn apply_w_both_sides(prec: Prec, sc: &Scaling, s: &BlockVal) -> BlockVal {
    match (sc, s) {
        (Scaling::Psd { w, .. }, BlockVal::Psd(mat)) => {
            BlockVal::Psd(w.matmul(prec, &mat.matmul(prec, w)))
        }
        (Scaling::Diag { w, .. }, BlockVal::Diag(d)) => BlockVal::Diag(
            w.iter()
                .zip(d.iter())
                .map(|(wi, v)| Float::with_val(prec, wi * wi) * v)
                .collect(),
        ),
        _ => unreachable!(),
    }
}

/// Schur complement `M_jl = Σ_blocks ⟨A_j, W A_l W⟩`, parallel over columns,
/// deterministic.
fn build_schur(prec: Prec, canon: &Canon, scalings: &[Scaling], m: usize) -> Mat {
    let cols: Vec<(usize, Vec<Float>)> = (0..m)
        .into_par_iter()
        .map(|l| {
            // U = W A_l W per block, dense.
            let u: Vec<BlockVal> = canon.rows[l]
                .iter()
                .enumerate()
                .map(|(bi, terms)| scaled_row_image(prec, &scalings[bi], terms))
                .collect();
            let col: Vec<Float> = (0..=l)
                .map(|j| {
                    let mut acc = Float::new(prec);
                    for (bi, terms) in canon.rows[j].iter().enumerate() {
                        if terms.is_empty() {
                            continue;
                        }
                        acc += inner_sparse(prec, terms, &u[bi]);
                    }
                    acc
                })
                .collect();
            (l, col)
        })
        .collect();
    let mut mmat = Mat::zeros(prec, m, m);
    for (l, col) in cols {
        for (j, v) in col.into_iter().enumerate() {
            mmat[(j, l)] = v.clone();
            mmat[(l, j)] = v;
        }
    }
    mmat
}

/// Dense image `W A W` of one sparse row slice on one block.  PSD images
/// carry only their upper triangle (the consumers, [`inner_sparse`] with
/// canonical `i ≤ j` terms, never touch the lower part).
fn scaled_row_image(prec: Prec, sc: &Scaling, terms: &[(usize, usize, Float)]) -> BlockVal {
    match sc {
        Scaling::Psd { w, .. } => {
            let n = w.rows;
            let mut out = Mat::zeros(prec, n, n);
            if terms.is_empty() {
                return BlockVal::Psd(out);
            }
            // Σ a (w_i w_jᵀ + [i≠j] w_j w_iᵀ): rank-2 updates per term.
            let mut t = Float::new(prec);
            for (i, j, a) in terms {
                let wi = w.row(*i);
                let wj = w.row(*j);
                for p in 0..n {
                    let awpi = Float::with_val(prec, a * &wi[p]);
                    if i == j {
                        for q in p..n {
                            t.assign(&awpi * &wj[q]);
                            out[(p, q)] += &t;
                        }
                    } else {
                        let awpj = Float::with_val(prec, a * &wj[p]);
                        for q in p..n {
                            t.assign(&awpi * &wj[q]);
                            out[(p, q)] += &t;
                            t.assign(&awpj * &wi[q]);
                            out[(p, q)] += &t;
                        }
                    }
                }
            }
            BlockVal::Psd(out)
        }
        Scaling::Diag { w, .. } => {
            let mut out: Vec<Float> = (0..w.len()).map(|_| Float::new(prec)).collect();
            for (i, _, a) in terms {
                out[*i] = Float::with_val(prec, &w[*i] * &w[*i]) * a;
            }
            BlockVal::Diag(out)
        }
    }
}

/// Cholesky with escalating diagonal shifts; gives up after three retries.
fn chol_with_shift(prec: Prec, a: &Mat) -> Result<Mat, SolverError> {
    match linalg::cholesky(prec, a) {
        Ok(l) => return Ok(l),
        Err(_) => {}
    }
    let mut diag_max = Float::new(prec);
    for i in 0..a.rows {
        let d = a[(i, i)].clone().abs();
        if d > diag_max {
            diag_max = d;
        }
    }
    let mut shift = diag_max * Float::with_val(prec, Float::i_exp(1, -(prec as i32) / 2));
    for _ in 0..3 {
        let mut shifted = a.clone();
        for i in 0..a.rows {
            shifted[(i, i)] += &shift;
        }
        if let Ok(l) = linalg::cholesky(prec, &shifted) {
            return Ok(l);
        }
        shift *= Float::with_val(prec, 65536);
    }
    Err(SolverError::Breakdown(
        "Schur complement is numerically singular".into(),
    ))
}

/// Largest feasible fraction of the scaled step `Λ + α dS̃ ⪰ 0`, times
/// `frac`, capped at 1.
fn max_step_scaled(prec: Prec, scalings: &[Scaling], dirs: &[BlockVal], frac: f64) -> f64 {
    let mut alpha = f64::INFINITY;
    for (sc, d) in scalings.iter().zip(dirs.iter()) {
        match (sc, d) {
            (Scaling::Psd { lambda, .. }, BlockVal::Psd(dm)) => {
                let n = lambda.len();
                let sqrt_inv: Vec<Float> = lambda
                    .iter()
                    .map(|l| Float::with_val(prec, 1u32) / l.clone().sqrt())
                    .collect();
                let e = Mat::from_fn(n, n, |i, j| {
                    Float::with_val(prec, &dm[(i, j)] * &sqrt_inv[i]) * &sqrt_inv[j]
                });
                match linalg::sym_eig(prec, &e) {
                    Ok((ev, _)) => {
                        let lmin = ev[0].to_f64();
                        if lmin < 0.0 {
                            alpha = alpha.min(-1.0 / lmin);
                        }
                    }
                    // A failed spectral bound yields a zero step; the outer
                    // loop then reports the stall honestly.
                    Err(_) => alpha = 0.0,
                }
            }
            (Scaling::Diag { lambda, .. }, BlockVal::Diag(dv)) => {
                for (l, d) in lambda.iter().zip(dv.iter()) {
                    if *d < 0 {
                        let r = -Float::with_val(prec, l / d).to_f64();
                        alpha = alpha.min(r);
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    if alpha.is_infinite() {
        1.0
    } else {
        (frac * alpha).min(1.0)
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    canon: &Canon,
    x: Vec<BlockVal>,
    xf: Vec<Float>,
    y: Vec<Float>,
    z: Vec<BlockVal>,
    pobj: Float,
    dobj: Float,
    iterations: usize,
    log: Vec<IterLog>,
) -> SdpSolution {
    let prec = canon.prec;
    let to_sol = |v: BlockVal| match v {
        BlockVal::Psd(m) => BlockSol::Psd(m),
        BlockVal::Diag(d) => BlockSol::Diag(d),
    };
    let x_blocks: Vec<BlockSol> = x
        .into_iter()
        .take(canon.num_orig_blocks)
        .map(to_sol)
        .collect();
    let z_blocks: Vec<BlockSol> = z
        .into_iter()
        .take(canon.num_orig_blocks)
        .map(to_sol)
        .collect();
    // Undo row equilibration on the multipliers.
    let y: Vec<Float> = y
        .iter()
        .zip(canon.row_scale.iter())
        .map(|(yj, s)| Float::with_val(prec, yj * s))
        .collect();
    SdpSolution {
        x_blocks,
        x_free: xf,
        y,
        z_blocks,
        primal_obj: pobj,
        dual_obj: dobj,
        iterations,
        log,
    }
}
