//! Independence bounds on small finite graphs.
//!
//! Everything the sphere pipeline uses in function space has a finite,
//! exactly checkable counterpart, and this module implements the whole
//! ladder at desk scale:
//!
//! * [`alpha_brute`] — the exact independence number by branch and bound;
//! * [`lovasz_theta`] — the ϑ semidefinite bound;
//! * [`lasserre`] — moment-matrix hierarchy over vertex subsets;
//! * [`kpoint_delta`] — the k-point strengthening with conditioned moment
//!   matrices;
//! * [`kpcone_member`] / [`polya_exponent`] — membership in the tensor
//!   nonnegativity cones approximating copositivity, with the explicit
//!   exponent bound;
//! * [`gamma_r`] — the completely-positive-side bound using the adjoint
//!   generator representation of the dual cone.
//!
//! The SDP-based bounds share the interior-point solver of [`crate::ipm`];
//! the combinatorial and tensor routines are exact over the rationals.
//! Known closed forms (ϑ of cycles, hierarchy collapses) make the suite a
//! convenient oracle battery for the solver itself.

use rug::{Float, Rational};
use thiserror::Error;

use crate::hp::Prec;
use crate::ipm::{
    self, ConeBlock, RowKind, SdpProblem, SdpRow, SdpTerm, SolverConfig, SolverError,
};

/// Vertex cap for the exact branch-and-bound independence number.
pub const ALPHA_MAX_VERTICES: usize = 30;
/// Vertex cap for the ϑ SDP.
pub const THETA_MAX_VERTICES: usize = 64;
/// Vertex cap for the moment hierarchy.
pub const LASSERRE_MAX_VERTICES: usize = 14;
/// Level cap for the moment hierarchy.
pub const LASSERRE_MAX_LEVEL: usize = 3;
/// Vertex cap for the k-point bound.
pub const DELTA_MAX_VERTICES: usize = 12;
/// Level cap for the k-point bound.
pub const DELTA_MAX_LEVEL: usize = 4;
/// Vertex cap for the completely-positive-side bound.
pub const GAMMA_MAX_VERTICES: usize = 6;
/// Exponent cap for the completely-positive-side bound.
pub const GAMMA_MAX_EXPONENT: usize = 3;
/// Cap on the conceptual tensor size `|V|^(r+2)` of the cone membership
/// check.
pub const KPCONE_MAX_TENSOR: u128 = 10_000_000;

/// Errors of the finite-graph suite.
#[derive(Debug, Error)]
pub enum FiniteError {
    #[error("graph has a loop at vertex {0}")]
    Loop(usize),
    #[error("edge ({0}, {1}) references a vertex out of range")]
    VertexRange(usize, usize),
    #[error("{what} supports at most {cap} vertices, got {got}")]
    TooManyVertices {
        what: &'static str,
        cap: usize,
        got: usize,
    },
    #[error("{what} level must lie in {lo}..={hi}, got {got}")]
    LevelRange {
        what: &'static str,
        lo: usize,
        hi: usize,
        got: usize,
    },
    #[error("tensor with {0} entries exceeds the size cap")]
    TensorTooLarge(u128),
    #[error("matrix must be square, symmetric and nonempty")]
    BadMatrix,
    #[error("tensor values are not invariant under index permutations")]
    NotSymmetric,
    #[error("tensor length {got} does not match dim^order = {expected}")]
    BadLength { got: usize, expected: usize },
    #[error("certified simplex minimum {0:e} is not positive")]
    NotPositive(f64),
    #[error("graph file, line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

// ---------------------------------------------------------------------------
// Graphs
// ---------------------------------------------------------------------------

/// A loopless undirected graph on vertices `0..n` with adjacency bitsets.
///
/// The text format accepted by [`FiniteGraph::parse_text`] is line based:
/// `#` starts a comment running to the end of the line, the first
/// significant token is the vertex count, and every following pair of
/// tokens is one edge `u v` (0-based).  Duplicate edges collapse.
#[derive(Clone, Debug)]
pub struct FiniteGraph {
    /// Number of vertices, `0..n`.
    pub n: usize,
    /// Deduplicated edges with `u < v`.
    pub edges: Vec<(usize, usize)>,
    adj: Vec<u64>,
}

impl FiniteGraph {
    /// Builds a graph, rejecting loops and out-of-range endpoints and
    /// deduplicating symmetric pairs.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, FiniteError> {
        if n > THETA_MAX_VERTICES {
            return Err(FiniteError::TooManyVertices {
                what: "FiniteGraph",
                cap: THETA_MAX_VERTICES,
                got: n,
            });
        }
        let mut set = std::collections::BTreeSet::new();
        for &(u, v) in edges {
            if u == v {
                return Err(FiniteError::Loop(u));
            }
            if u >= n || v >= n {
                return Err(FiniteError::VertexRange(u, v));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut adj = vec![0u64; n];
        for &(u, v) in &edges {
            adj[u] |= 1 << v;
            adj[v] |= 1 << u;
        }
        Ok(FiniteGraph { n, edges, adj })
    }

    /// Parses the edge-list text format described on the type.
    pub fn parse_text(src: &str) -> Result<Self, FiniteError> {
        let mut toks: Vec<(usize, usize, &str)> = Vec::new(); // (line, col, token)
        for (ln, line) in src.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("");
            for (cn, tok) in body.split_whitespace().enumerate() {
                toks.push((ln + 1, cn, tok));
            }
        }
        let parse = |&(line, _, tok): &(usize, usize, &str)| -> Result<usize, FiniteError> {
            tok.parse::<usize>().map_err(|_| FiniteError::Parse {
                line,
                msg: format!("expected a nonnegative integer, got {tok:?}"),
            })
        };
        let Some(first) = toks.first() else {
            return Err(FiniteError::Parse {
                line: 1,
                msg: "empty graph file (vertex count missing)".into(),
            });
        };
        let n = parse(first)?;
        let rest = &toks[1..];
        if rest.len() % 2 != 0 {
            let (line, ..) = *rest.last().unwrap();
            return Err(FiniteError::Parse {
                line,
                msg: "dangling edge endpoint".into(),
            });
        }
        let mut edges = Vec::with_capacity(rest.len() / 2);
        for pair in rest.chunks_exact(2) {
            edges.push((parse(&pair[0])?, parse(&pair[1])?));
        }
        FiniteGraph::new(n, &edges)
    }

    /// The cycle `C_n`.
    pub fn cycle(n: usize) -> Self {
        let edges: Vec<(usize, usize)> = (0..n).map(|v| (v, (v + 1) % n)).collect();
        FiniteGraph::new(n, if n >= 3 { &edges } else { &[] }).expect("valid cycle")
    }

    /// The complete graph `K_n`.
    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        FiniteGraph::new(n, &edges).expect("valid complete graph")
    }

    /// The edgeless graph on `n` vertices.
    pub fn edgeless(n: usize) -> Self {
        FiniteGraph::new(n, &[]).expect("valid edgeless graph")
    }

    /// A reproducible Erdős–Rényi draw: every pair becomes an edge
    /// independently with probability `p`.
    pub fn random(n: usize, p: f64, seed: u64) -> Self {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        FiniteGraph::new(n, &edges).expect("valid random graph")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_edge(&self, u: usize, v: usize) -> bool {
        u != v && (self.adj[u] >> v) & 1 == 1
    }

    /// Adjacency bitset of `v`.
    pub fn adj_mask(&self, v: usize) -> u64 {
        self.adj[v]
    }

    /// Whether the vertex set encoded by `mask` is independent.
    pub fn is_independent(&self, mask: u64) -> bool {
        let mut rest = mask;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if self.adj[v] & mask != 0 {
                return false;
            }
        }
        true
    }

    /// All independent vertex sets of size at most `k`, as bitmasks sorted
    /// by (size, numeric mask) — the canonical basis order of the moment
    /// matrices.
    pub fn independent_sets_upto(&self, k: usize) -> Vec<u64> {
        let mut out: Vec<u64> = Vec::new();
        for mask in 0u64..(1 << self.n) {
            if (mask.count_ones() as usize) <= k && self.is_independent(mask) {
                out.push(mask);
            }
        }
        out.sort_by_key(|m| (m.count_ones(), *m));
        out
    }
}

/// Exact maximum independent set size by branch and bound.
///
/// The pivot is a maximum-degree vertex of the remaining subgraph and the
/// running best prunes via the trivial cardinality bound; exact well past
/// the |V| ≤ 30 cap for anything desk sized.
pub fn alpha_brute(g: &FiniteGraph) -> Result<u32, FiniteError> {
    if g.n > ALPHA_MAX_VERTICES {
        return Err(FiniteError::TooManyVertices {
            what: "alpha_brute",
            cap: ALPHA_MAX_VERTICES,
            got: g.n,
        });
    }
    fn rec(g: &FiniteGraph, mask: u64, size: u32, best: &mut u32) {
        if size + mask.count_ones() <= *best {
            return;
        }
        if mask == 0 {
            *best = size;
            return;
        }
        // Pivot on the densest remaining vertex: both branches shrink fast.
        let mut pivot = mask.trailing_zeros() as usize;
        let mut deg = 0;
        let mut rest = mask;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let d = (g.adj[v] & mask).count_ones();
            if d > deg {
                deg = d;
                pivot = v;
            }
        }
        rec(g, mask & !g.adj[pivot] & !(1 << pivot), size + 1, best);
        rec(g, mask & !(1 << pivot), size, best);
    }
    let mut best = 0;
    let full = if g.n == 64 { !0 } else { (1u64 << g.n) - 1 };
    rec(g, full, 0, &mut best);
    Ok(best)
}

// ---------------------------------------------------------------------------
// SDP bounds
// ---------------------------------------------------------------------------

/// Solver settings suited to the small finite SDPs of this module.
pub fn default_finite_config() -> SolverConfig {
    SolverConfig {
        prec: 128,
        tol_gap: 1e-11,
        tol_feas: 1e-11,
        max_iter: 150,
        step_frac: 0.98,
        init_scale: 4.0,
    }
}

/// A term contributing exactly `w · X_ij` to a row (halving off-diagonal
/// coefficients to cancel the symmetric double-count).
fn entry_term(prec: Prec, block: usize, i: usize, j: usize, w: f64) -> SdpTerm {
    let value = Float::with_val(prec, if i == j { w } else { w / 2.0 });
    SdpTerm { block, i, j, value }
}

/// Midpoint of the primal and dual objectives — splits the residual gap.
fn objective_mid(sol: &ipm::SdpSolution, prec: Prec) -> Float {
    let mut v = Float::with_val(prec, &sol.primal_obj + &sol.dual_obj);
    v /= 2;
    v
}

/// Assembles the ϑ SDP (minimize `⟨-J, A⟩` over psd `A` with unit trace
/// vanishing on edges); its optimal value is `-ϑ(G)`.  Exposed separately
/// so the same problem can be exported for external solvers.
pub fn lovasz_theta_problem(g: &FiniteGraph, prec: Prec) -> Result<SdpProblem, FiniteError> {
    if g.n > THETA_MAX_VERTICES {
        return Err(FiniteError::TooManyVertices {
            what: "lovasz_theta",
            cap: THETA_MAX_VERTICES,
            got: g.n,
        });
    }
    let mut rows = Vec::new();
    rows.push(SdpRow {
        kind: RowKind::Eq,
        terms: (0..g.n)
            .map(|i| SdpTerm {
                block: 0,
                i,
                j: i,
                value: Float::with_val(prec, 1),
            })
            .collect(),
        free: Vec::new(),
        rhs: Float::with_val(prec, 1),
    });
    for &(u, v) in &g.edges {
        rows.push(SdpRow {
            kind: RowKind::Eq,
            terms: vec![SdpTerm {
                block: 0,
                i: u,
                j: v,
                value: Float::with_val(prec, 1),
            }],
            free: Vec::new(),
            rhs: Float::new(prec),
        });
    }
    let mut obj = Vec::new();
    for i in 0..g.n {
        for j in i..g.n {
            obj.push(SdpTerm {
                block: 0,
                i,
                j,
                value: Float::with_val(prec, -1),
            });
        }
    }
    Ok(SdpProblem {
        prec,
        blocks: vec![ConeBlock::Psd(g.n)],
        num_free: 0,
        obj,
        obj_free: Vec::new(),
        rows,
    })
}

/// The Lovász ϑ number: maximize `⟨J, A⟩` over psd `A` with unit trace
/// vanishing on edges.
pub fn lovasz_theta(g: &FiniteGraph, cfg: &SolverConfig) -> Result<Float, FiniteError> {
    let problem = lovasz_theta_problem(g, cfg.prec)?;
    let sol = ipm::solve(&problem, cfg)?;
    Ok(-objective_mid(&sol, cfg.prec))
}

/// Shared scaffolding of the moment-matrix bounds: the solver's dual side
/// is `max Σ_x ν({x})` subject to `C + Σ_U ν_U E_U ⪰ 0`, so the problem is
/// assembled in primal form `min ⟨C, X⟩, ⟨-E_U, X⟩ = [|U| = 1]` with one
/// row per nonempty independent set `U` of `vars`, and the union-indicator
/// matrices `E_U` collected over the psd blocks whose index bases are
/// `block_bases` (`union_of` maps a block and a pair of basis masks to the
/// union the entry represents).  Entries whose union is dependent are
/// pinned to zero by carrying no variable at all.  Returns the optimal
/// value as the midpoint of the converged primal/dual pair.
fn solve_moment_form(
    g: &FiniteGraph,
    vars: &[u64],
    block_bases: &[Vec<u64>],
    union_of: impl Fn(usize, u64, u64) -> Option<u64>,
    cfg: &SolverConfig,
) -> Result<Float, FiniteError> {
    let prec = cfg.prec;
    let var_index: std::collections::BTreeMap<u64, usize> =
        vars.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let mut obj = Vec::new();
    let mut row_terms: Vec<Vec<SdpTerm>> = vec![Vec::new(); vars.len()];
    for (b, basis) in block_bases.iter().enumerate() {
        for (ai, &sa) in basis.iter().enumerate() {
            for (bi, &sb) in basis.iter().enumerate().skip(ai) {
                let Some(u) = union_of(b, sa, sb) else {
                    continue;
                };
                if !g.is_independent(u) {
                    continue; // entry pinned to zero: no variable touches it
                }
                if u == 0 {
                    obj.push(SdpTerm {
                        block: b,
                        i: ai,
                        j: bi,
                        value: Float::with_val(prec, 1),
                    });
                } else {
                    row_terms[var_index[&u]].push(SdpTerm {
                        block: b,
                        i: ai,
                        j: bi,
                        value: Float::with_val(prec, -1),
                    });
                }
            }
        }
    }
    let rows: Vec<SdpRow> = vars
        .iter()
        .zip(row_terms)
        .map(|(&u, terms)| SdpRow {
            kind: RowKind::Eq,
            terms,
            free: Vec::new(),
            rhs: Float::with_val(prec, u64::from(u.count_ones() == 1)),
        })
        .collect();
    debug_assert!(
        rows.iter().all(|r| !r.terms.is_empty()),
        "every moment variable must appear in some matrix entry"
    );
    let problem = SdpProblem {
        prec,
        blocks: block_bases.iter().map(|b| ConeBlock::Psd(b.len())).collect(),
        num_free: 0,
        obj,
        obj_free: Vec::new(),
        rows,
    };
    let sol = ipm::solve(&problem, cfg)?;
    Ok(objective_mid(&sol, prec))
}

/// Level `k` of the moment hierarchy: the matrix indexed by independent
/// sets of size ≤ k, with entry `(S, T) = ν(S ∪ T)`, must be psd;
/// `ν(∅) = 1`, ν vanishes on dependent sets, and `Σ_x ν({x})` is
/// maximized.  Level 1 coincides with the ϑ number.
pub fn lasserre(g: &FiniteGraph, k: usize, cfg: &SolverConfig) -> Result<Float, FiniteError> {
    if g.n > LASSERRE_MAX_VERTICES {
        return Err(FiniteError::TooManyVertices {
            what: "lasserre",
            cap: LASSERRE_MAX_VERTICES,
            got: g.n,
        });
    }
    if !(1..=LASSERRE_MAX_LEVEL).contains(&k) {
        return Err(FiniteError::LevelRange {
            what: "lasserre",
            lo: 1,
            hi: LASSERRE_MAX_LEVEL,
            got: k,
        });
    }
    let basis = g.independent_sets_upto(k);
    let vars: Vec<u64> = g
        .independent_sets_upto(2 * k)
        .into_iter()
        .filter(|&m| m != 0)
        .collect();
    let bases = vec![basis];
    solve_moment_form(g, &vars, &bases, |_, sa, sb| Some(sa | sb), cfg)
}

/// The k-point bound: moment vectors over independent sets of size ≤ k
/// with the conditioned matrices `(S, T) ↦ ν(Q ∪ S ∪ T)`, `S, T` empty or
/// singletons, required psd for every independent `Q` of size ≤ k − 2.
pub fn kpoint_delta(g: &FiniteGraph, k: usize, cfg: &SolverConfig) -> Result<Float, FiniteError> {
    if g.n > DELTA_MAX_VERTICES {
        return Err(FiniteError::TooManyVertices {
            what: "kpoint_delta",
            cap: DELTA_MAX_VERTICES,
            got: g.n,
        });
    }
    if !(2..=DELTA_MAX_LEVEL).contains(&k) {
        return Err(FiniteError::LevelRange {
            what: "kpoint_delta",
            lo: 2,
            hi: DELTA_MAX_LEVEL,
            got: k,
        });
    }
    let qs = g.independent_sets_upto(k - 2);
    let vars: Vec<u64> = g
        .independent_sets_upto(k)
        .into_iter()
        .filter(|&m| m != 0)
        .collect();
    // Every conditioned matrix is indexed by ∅ plus all singletons.
    let sub1: Vec<u64> = std::iter::once(0u64)
        .chain((0..g.n).map(|v| 1u64 << v))
        .collect();
    let bases: Vec<Vec<u64>> = qs.iter().map(|_| sub1.clone()).collect();
    solve_moment_form(g, &vars, &bases, |b, sa, sb| Some(qs[b] | sa | sb), cfg)
}

/// Number of distinct arrangements of a multiset given by `counts`.
fn arrangements(counts: &[usize]) -> u64 {
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    let mut v: u64 = (1..=total).product();
    for &c in counts {
        for i in 1..=c as u64 {
            v /= i;
        }
    }
    v
}

/// Enumerates all multisets of the given size over `dim` letters as count
/// vectors.
fn multisets(dim: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, size: usize, at: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if at == dim - 1 {
            cur[at] = size;
            out.push(cur.clone());
            return;
        }
        for c in 0..=size {
            cur[at] = c;
            rec(dim, size - c, at + 1, cur, out);
        }
    }
    let mut out = Vec::new();
    if dim == 0 {
        return out;
    }
    rec(dim, size, 0, &mut vec![0; dim], &mut out);
    out
}

/// The completely-positive-side bound `γ_r`: maximize `⟨J, A⟩` over psd,
/// unit-trace `A` vanishing on edges that additionally lie in the dual
/// tensor cone, represented by its generators — `A(x, y)` must equal the
/// sum over the remaining `r` indices of a symmetric entrywise-nonnegative
/// function on `V^{r+2}`.
pub fn gamma_r(g: &FiniteGraph, r: usize, cfg: &SolverConfig) -> Result<Float, FiniteError> {
    if g.n > GAMMA_MAX_VERTICES {
        return Err(FiniteError::TooManyVertices {
            what: "gamma_r",
            cap: GAMMA_MAX_VERTICES,
            got: g.n,
        });
    }
    if !(1..=GAMMA_MAX_EXPONENT).contains(&r) {
        return Err(FiniteError::LevelRange {
            what: "gamma_r",
            lo: 1,
            hi: GAMMA_MAX_EXPONENT,
            got: r,
        });
    }
    let prec = cfg.prec;
    let full = multisets(g.n, r + 2);
    let mindex: std::collections::BTreeMap<Vec<usize>, usize> = full
        .iter()
        .enumerate()
        .map(|(i, m)| (m.clone(), i))
        .collect();
    let inner = multisets(g.n, r);

    let mut rows = Vec::new();
    rows.push(SdpRow {
        kind: RowKind::Eq,
        terms: (0..g.n)
            .map(|i| SdpTerm {
                block: 0,
                i,
                j: i,
                value: Float::with_val(prec, 1),
            })
            .collect(),
        free: Vec::new(),
        rhs: Float::with_val(prec, 1),
    });
    for &(u, v) in &g.edges {
        rows.push(SdpRow {
            kind: RowKind::Eq,
            terms: vec![SdpTerm {
                block: 0,
                i: u,
                j: v,
                value: Float::with_val(prec, 1),
            }],
            free: Vec::new(),
            rhs: Float::new(prec),
        });
    }
    // A(x, y) = Σ_m (#arrangements of m) · F(m ⊎ {x, y}).
    for x in 0..g.n {
        for y in x..g.n {
            let mut terms = vec![entry_term(prec, 0, x, y, 1.0)];
            for m in &inner {
                let mut key = m.clone();
                key[x] += 1;
                key[y] += 1;
                terms.push(SdpTerm {
                    block: 1,
                    i: mindex[&key],
                    j: mindex[&key],
                    value: Float::with_val(prec, -(arrangements(m) as f64)),
                });
            }
            rows.push(SdpRow {
                kind: RowKind::Eq,
                terms,
                free: Vec::new(),
                rhs: Float::new(prec),
            });
        }
    }
    let mut obj = Vec::new();
    for i in 0..g.n {
        for j in i..g.n {
            obj.push(SdpTerm {
                block: 0,
                i,
                j,
                value: Float::with_val(prec, -1),
            });
        }
    }
    let problem = SdpProblem {
        prec,
        blocks: vec![ConeBlock::Psd(g.n), ConeBlock::Nonneg(full.len())],
        num_free: 0,
        obj,
        obj_free: Vec::new(),
        rows,
    };
    let sol = ipm::solve(&problem, cfg)?;
    Ok(-objective_mid(&sol, prec))
}

// ---------------------------------------------------------------------------
// Symmetric tensors and the nonnegativity cones
// ---------------------------------------------------------------------------

/// A dense symmetric tensor of the given order over `0..dim`, with exact
/// rational entries stored for every multi-index (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensor {
    order: usize,
    dim: usize,
    vals: Vec<Rational>,
}

/// Full symmetrization of a dense value array: every entry becomes the
/// average of the input over all permutations of its multi-index (equal,
/// by multiplicity counting, to the unweighted average over the distinct
/// arrangements).
pub fn rey_symmetrize(
    order: usize,
    dim: usize,
    vals: &[Rational],
) -> Result<Vec<Rational>, FiniteError> {
    let size = dim.checked_pow(order as u32).ok_or(FiniteError::TensorTooLarge(u128::MAX))?;
    if vals.len() != size {
        return Err(FiniteError::BadLength {
            got: vals.len(),
            expected: size,
        });
    }
    let mut out = vec![Rational::new(); size];
    let mut idx = vec![0usize; order];
    for (flat, slot) in out.iter_mut().enumerate() {
        let mut rest = flat;
        for p in (0..order).rev() {
            idx[p] = rest % dim;
            rest /= dim;
        }
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        // Average the input over the distinct arrangements of the sorted
        // multi-index.
        let mut sum = Rational::new();
        let mut count = 0u64;
        let mut arrangement = sorted.clone();
        loop {
            let mut f = 0usize;
            for &a in &arrangement {
                f = f * dim + a;
            }
            sum += &vals[f];
            count += 1;
            if !next_permutation(&mut arrangement) {
                break;
            }
        }
        sum /= Rational::from(count);
        *slot = sum;
    }
    Ok(out)
}

/// Advances a slice to its next lexicographic permutation; false at the
/// last one.
fn next_permutation(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

impl SymTensor {
    /// Wraps a dense array after verifying the symmetry invariant.
    pub fn new(order: usize, dim: usize, vals: Vec<Rational>) -> Result<Self, FiniteError> {
        let size = dim
            .checked_pow(order as u32)
            .ok_or(FiniteError::TensorTooLarge(u128::MAX))?;
        if vals.len() != size {
            return Err(FiniteError::BadLength {
                got: vals.len(),
                expected: size,
            });
        }
        let sym = rey_symmetrize(order, dim, &vals)?;
        if sym != vals {
            return Err(FiniteError::NotSymmetric);
        }
        Ok(SymTensor { order, dim, vals })
    }

    /// Symmetrizes an arbitrary dense array into a tensor.
    pub fn symmetrized(order: usize, dim: usize, vals: &[Rational]) -> Result<Self, FiniteError> {
        let vals = rey_symmetrize(order, dim, vals)?;
        Ok(SymTensor { order, dim, vals })
    }

    /// Order-2 tensor of a symmetric matrix.
    pub fn from_matrix(a: &[Vec<Rational>]) -> Result<Self, FiniteError> {
        let n = a.len();
        if n == 0 || a.iter().any(|row| row.len() != n) {
            return Err(FiniteError::BadMatrix);
        }
        for i in 0..n {
            for j in 0..i {
                if a[i][j] != a[j][i] {
                    return Err(FiniteError::BadMatrix);
                }
            }
        }
        let mut vals = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                vals.push(a[i][j].clone());
            }
        }
        Ok(SymTensor {
            order: 2,
            dim: n,
            vals,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[Rational] {
        &self.vals
    }

    /// Entry at a multi-index.
    pub fn get(&self, idx: &[usize]) -> &Rational {
        assert_eq!(idx.len(), self.order);
        let mut f = 0usize;
        for &a in idx {
            assert!(a < self.dim);
            f = f * self.dim + a;
        }
        &self.vals[f]
    }

    /// Counting inner product `Σ_x S(x)·T(x)` over all multi-indices.
    pub fn inner(&self, other: &SymTensor) -> Rational {
        assert_eq!((self.order, self.dim), (other.order, other.dim));
        let mut acc = Rational::new();
        for (a, b) in self.vals.iter().zip(&other.vals) {
            acc += Rational::from(a * b);
        }
        acc
    }

    /// Exact evaluation of `⟨T, w^{⊗k}⟩` at a point of the simplex.
    pub fn eval_power(&self, w: &[Rational]) -> Rational {
        use rug::ops::Pow;
        assert_eq!(w.len(), self.dim);
        let mut acc = Rational::new();
        for m in multisets(self.dim, self.order) {
            // Representative index of the multiset, ascending.
            let mut idx = Vec::with_capacity(self.order);
            let mut weight = Rational::from(arrangements(&m));
            for (v, &c) in m.iter().enumerate() {
                for _ in 0..c {
                    idx.push(v);
                }
                if c > 0 {
                    weight *= w[v].clone().pow(c as u32);
                }
            }
            acc += Rational::from(self.get(&idx) * &weight);
        }
        acc
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> Rational {
        let mut best = Rational::new();
        for v in &self.vals {
            let a = v.clone().abs();
            if a > best {
                best = a;
            }
        }
        best
    }
}

/// Membership of a symmetric matrix in the `r`-th tensor nonnegativity
/// cone: the symmetrization of `A ⊗ 1^{⊗r}` must be entrywise nonnegative.
/// Exact: each multiset entry is, up to a positive factor, the sum of `A`
/// over the unordered position pairs of the multiset.
pub fn kpcone_member(a: &[Vec<Rational>], r: usize) -> Result<bool, FiniteError> {
    let n = a.len();
    if n == 0 || a.iter().any(|row| row.len() != n) {
        return Err(FiniteError::BadMatrix);
    }
    for i in 0..n {
        for j in 0..i {
            if a[i][j] != a[j][i] {
                return Err(FiniteError::BadMatrix);
            }
        }
    }
    let size = (n as u128)
        .checked_pow(r as u32 + 2)
        .ok_or(FiniteError::TensorTooLarge(u128::MAX))?;
    if size > KPCONE_MAX_TENSOR {
        return Err(FiniteError::TensorTooLarge(size));
    }
    for m in multisets(n, r + 2) {
        let mut s = Rational::new();
        for (u, &cu) in m.iter().enumerate() {
            if cu == 0 {
                continue;
            }
            if cu >= 2 {
                s += a[u][u].clone() * Rational::from((cu * (cu - 1) / 2) as u64);
            }
            for (v, &cv) in m.iter().enumerate().skip(u + 1) {
                if cv == 0 {
                    continue;
                }
                s += a[u][v].clone() * Rational::from((cu * cv) as u64);
            }
        }
        if s < 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Grid spacing denominator of the certified simplex minimization.
const POLYA_GRID: u32 = 64;

/// Smallest exponent guaranteed by the effective positivity theorem:
/// `r > k(k−1)·M / (2λ) − k`, clamped to ≥ 0, where `M` is the largest
/// entry magnitude and `λ` a **certified** lower bound for the minimum of
/// `⟨T, w^{⊗k}⟩` over the simplex.
///
/// The bound on `λ` is exact: the form is evaluated at every grid point
/// with denominator 64 and the gap to off-grid points is covered by the
/// Lipschitz estimate `|p(w) − p(w′)| ≤ k·M·‖w − w′‖₁` with covering
/// radius `2(dim−1)/64`.  A float multistart projected-gradient pass
/// refines the search only as a sanity check — certification never relies
/// on it.
///
/// # Errors
///
/// Fails when the certified lower bound is not positive (the theorem's
/// hypothesis cannot be verified at this grid resolution).
pub fn polya_exponent(t: &SymTensor) -> Result<u32, FiniteError> {
    let k = t.order;
    let n = t.dim;
    if k == 0 || n == 0 {
        return Err(FiniteError::BadMatrix);
    }
    let grid_points = multisets(n, POLYA_GRID as usize);
    let budget = grid_points.len() as u128 * (multisets(n, k).len() as u128);
    if budget > 50_000_000 {
        return Err(FiniteError::TensorTooLarge(budget));
    }
    let mut grid_min: Option<Rational> = None;
    let mut w = vec![Rational::new(); n];
    for c in &grid_points {
        for (wi, &ci) in w.iter_mut().zip(c.iter()) {
            *wi = Rational::from((ci as u64, u64::from(POLYA_GRID)));
        }
        let v = t.eval_power(&w);
        if grid_min.as_ref().is_none_or(|m| v < *m) {
            grid_min = Some(v);
        }
    }
    let grid_min = grid_min.expect("nonempty grid");
    let m_abs = t.max_abs();

    // Float multistart projected gradient: a cheap search for a point below
    // the certified bound, which would expose a broken Lipschitz argument.
    let pg_min = projected_gradient_min(t, 8, 200);

    let lip_gap = Rational::from((2 * (n as u64 - 1), u64::from(POLYA_GRID)))
        * Rational::from(k as u64)
        * m_abs.clone();
    let lambda_lb = grid_min - lip_gap;
    debug_assert!(
        pg_min + 1e-9 >= lambda_lb.to_f64(),
        "simplex search beat the certified lower bound"
    );
    if lambda_lb <= 0 {
        return Err(FiniteError::NotPositive(lambda_lb.to_f64()));
    }
    let threshold = Rational::from((k * (k - 1)) as u64) * m_abs
        / (Rational::from(2) * lambda_lb)
        - Rational::from(k as u64);
    // Smallest integer strictly above the threshold, clamped to ≥ 0.
    let floor = threshold.floor();
    let next = floor
        .numer()
        .to_i64()
        .ok_or(FiniteError::TensorTooLarge(u128::MAX))?
        + 1;
    Ok(next.max(0) as u32)
}

/// Multistart projected-gradient minimization of `⟨T, w^{⊗k}⟩` over the
/// simplex, in plain `f64`; returns the best value found.
fn projected_gradient_min(t: &SymTensor, starts: usize, iters: usize) -> f64 {
    use rand::Rng;
    use rand::SeedableRng;
    let n = t.dim;
    let k = t.order;
    let vals: Vec<f64> = t.vals.iter().map(|v| v.to_f64()).collect();
    let eval = |w: &[f64]| -> f64 {
        let mut acc = 0.0;
        let mut idx = vec![0usize; k];
        for (flat, v) in vals.iter().enumerate() {
            let mut rest = flat;
            let mut prod = *v;
            for p in (0..k).rev() {
                idx[p] = rest % n;
                rest /= n;
                prod *= w[idx[p]];
            }
            acc += prod;
        }
        acc
    };
    let grad = |w: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|g| *g = 0.0);
        let mut idx = vec![0usize; k];
        for (flat, v) in vals.iter().enumerate() {
            let mut rest = flat;
            for p in (0..k).rev() {
                idx[p] = rest % n;
                rest /= n;
            }
            for p in 0..k {
                let mut prod = *v;
                for (q, &iq) in idx.iter().enumerate() {
                    if q != p {
                        prod *= w[iq];
                    }
                }
                out[idx[p]] += prod;
            }
        }
    };
    let project = |w: &mut Vec<f64>| {
        // Euclidean projection onto the simplex (sort-based).
        let mut u: Vec<f64> = w.clone();
        u.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut css = 0.0;
        let mut theta = 0.0;
        for (i, &ui) in u.iter().enumerate() {
            css += ui;
            let t = (css - 1.0) / (i + 1) as f64;
            if ui - t > 0.0 {
                theta = t;
            }
        }
        for wi in w.iter_mut() {
            *wi = (*wi - theta).max(0.0);
        }
    };
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(0x706f6c7961);
    let mut best = f64::INFINITY;
    let scale = t.max_abs().to_f64().max(1e-12);
    let mut g = vec![0.0; n];
    for _ in 0..starts {
        let mut w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        for _ in 0..iters {
            grad(&w, &mut g);
            let step = 0.5 / (k as f64 * scale);
            for (wi, gi) in w.iter_mut().zip(&g) {
                *wi -= step * gi;
            }
            project(&mut w);
        }
        best = best.min(eval(&w));
    }
    best
}
