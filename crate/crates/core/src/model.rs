//! Assembly of the density-bound optimization problem.
//!
//! For the sphere `S^{n-1}`, the module builds a semidefinite program whose
//! optimal value upper-bounds the density of any measurable set avoiding
//! pairs of orthogonal points.  The decision variables are
//!
//! * a scalar `λ` and a univariate sequence `f(0), …, f(2d)` (free),
//! * PSD moment/multiplier blocks `F_0, …, F_d` and `Q_0, …, Q_4` tied to
//!   `f` through the exact polynomial identity in [`crate::polysym`],
//! * a 2×2 PSD block holding `(z11, z12, z22)` with `z12 = 2·X[0][1]`,
//! * one nonnegative multiplier `y_i` per boolean-quadratic cut.
//!
//! The constraints are one inequality per sampled spherical-harmonic degree
//! `k`
//!
//! ```text
//! λ·P_k(0) + Σ_i y_i r_i(k) - ω_n z12 - [k=0] ω_n² z22 - [k≤2d] f(k) ≥ 1,
//! ```
//!
//! their `k → ∞` limit `Σ_i y_i r_i(∞) - ω_n z12 ≥ 1` (where `r_i(∞)` is
//! the trace of the cut's coefficient matrix), and the identity rows as
//! equalities.  The objective is `min z11 + Σ_i y_i β_i`, whose optimal
//! value is the reported density bound.  Degrees outside the sample are
//! handled afterwards by the certification sweep, which also consumes the
//! multipliers `â(k)` of the sampled rows as a separation profile.

use rug::float::Round;
use rug::ops::Pow;
use rug::Float;

use crate::bqpcuts::BqpInequality;
use crate::hp::{self, Prec};
use crate::ipm::{
    self, BlockSol, ConeBlock, RowKind, SdpProblem, SdpRow, SdpSolution, SdpTerm, SolverConfig,
    SolverError,
};
use crate::linalg::Mat;
use crate::polysym::{self, SosIdentity};
use crate::special::{self, JacobiFamily, SpecialError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Default largest explicitly sampled degree.
pub const DEFAULT_KMAX: u64 = 3000;

/// Sampled degrees: an initial dense range `0..=4d`, then geometric grid
/// points `g_j = ⌈4d·1.15^j⌉` expanded to the parity triple
/// `{2⌈g/2⌉, 2⌈g/2⌉+1, 2⌈g/2⌉+2}` (the two parity classes behave
/// differently through `P_k(0)`, so each scale pins both), and `kmax`
/// itself.  Sorted and deduplicated, everything clamped to `kmax`.
pub fn choose_sample(d: usize, kmax: u64) -> Vec<u64> {
    let mut set = std::collections::BTreeSet::new();
    let base = 4 * d as u64;
    for k in 0..=base.min(kmax) {
        set.insert(k);
    }
    let mut g = base as f64;
    loop {
        g *= 1.15;
        let gi = g.ceil() as u64;
        if gi > kmax {
            break;
        }
        let even = 2 * gi.div_ceil(2);
        for k in [even, even + 1, even + 2] {
            if k <= kmax {
                set.insert(k);
            }
        }
    }
    set.insert(kmax);
    set.into_iter().collect()
}

/// The assembled problem together with the layout information needed to
/// interpret its solutions.
#[derive(Clone, Debug)]
pub struct DualModel {
    pub n: u32,
    pub d: usize,
    pub prec: Prec,
    pub kmax: u64,
    /// Sampled degrees, ascending; row `i` of the problem is degree
    /// `sample[i]`, row `sample.len()` is the `k → ∞` limit row, and the
    /// identity rows follow in [`SosIdentity::rows`] order.
    pub sample: Vec<u64>,
    pub cuts: Vec<BqpInequality>,
    /// Exact rational identity backing the equality rows.
    pub identity: SosIdentity,
    /// Block index of the 2×2 `z` block (the identity blocks come first).
    pub z_block: usize,
    /// Block index of the cut-multiplier block, if any cuts are present.
    pub y_block: Option<usize>,
    pub problem: SdpProblem,
}

/// Everything the certification stage needs from a solved model.
#[derive(Clone, Debug)]
pub struct DualPoint {
    pub bound: Float,
    pub lambda: Float,
    /// `f(0), …, f(2d)`.
    pub f: Vec<Float>,
    pub z11: Float,
    pub z12: Float,
    pub z22: Float,
    /// Cut multipliers `y_i ≥ 0`.
    pub y: Vec<Float>,
    /// The PSD blocks of the identity, in [`SosIdentity::blocks`] order.
    pub blocks: Vec<Mat>,
    /// Multipliers of the sampled inequality rows, `(k, â(k))`.
    pub ahat: Vec<(u64, Float)>,
    /// Multiplier of the limit row.
    pub ahat_tail: Float,
}

/// Builds the bound problem for `S^{n-1}` at truncation degree `d`.
pub fn build_dual(
    n: u32,
    d: usize,
    cuts: &[BqpInequality],
    kmax: u64,
    prec: Prec,
) -> Result<DualModel, ModelError> {
    if kmax < 4 * d as u64 {
        return Err(ModelError::Invalid(format!(
            "kmax = {kmax} is below the dense sample range 4d = {}",
            4 * d
        )));
    }
    let identity = polysym::sos_identity(n, d)?;
    let fam = JacobiFamily::new(n)?;
    let omega = special::sphere_surface(n, prec)?;
    let omega_sq = Float::with_val(prec, &omega * &omega);
    let sample = choose_sample(d, kmax);

    let mut blocks: Vec<ConeBlock> = identity
        .blocks
        .iter()
        .map(|b| ConeBlock::Psd(b.size))
        .collect();
    let z_block = blocks.len();
    blocks.push(ConeBlock::Psd(2));
    let y_block = if cuts.is_empty() {
        None
    } else {
        blocks.push(ConeBlock::Nonneg(cuts.len()));
        Some(blocks.len() - 1)
    };
    let num_free = 1 + identity.f_len;

    // Per-cut values r_i(k) for all k ≤ kmax, and the traces r_i(∞).
    let r_seqs: Vec<Vec<Float>> = cuts.iter().map(|c| c.r_sequence(kmax, prec)).collect();
    let r_inf: Vec<Float> = cuts
        .iter()
        .map(|c| hp::float_of_rational(prec, &c.r_infinity(), Round::Nearest))
        .collect();

    let mut rows = Vec::with_capacity(sample.len() + 1 + identity.rows.len());
    for &k in &sample {
        let mut terms = vec![SdpTerm {
            block: z_block,
            i: 0,
            j: 1,
            value: -omega.clone(),
        }];
        if k == 0 {
            terms.push(SdpTerm {
                block: z_block,
                i: 1,
                j: 1,
                value: -omega_sq.clone(),
            });
        }
        if let Some(yb) = y_block {
            for (i, rs) in r_seqs.iter().enumerate() {
                terms.push(SdpTerm {
                    block: yb,
                    i,
                    j: i,
                    value: rs[k as usize].clone(),
                });
            }
        }
        let mut free = Vec::new();
        let pk0 = fam.at_zero(k);
        if pk0 != 0 {
            free.push((0usize, hp::float_of_rational(prec, &pk0, Round::Nearest)));
        }
        if k as usize <= 2 * d {
            free.push((1 + k as usize, Float::with_val(prec, -1)));
        }
        rows.push(SdpRow {
            kind: RowKind::Ge,
            terms,
            free,
            rhs: Float::with_val(prec, 1),
        });
    }

    // Limit row: P_k(0) → 0 and r_i(k) → trace(L_i).
    {
        let mut terms = vec![SdpTerm {
            block: z_block,
            i: 0,
            j: 1,
            value: -omega.clone(),
        }];
        if let Some(yb) = y_block {
            for (i, ri) in r_inf.iter().enumerate() {
                terms.push(SdpTerm {
                    block: yb,
                    i,
                    j: i,
                    value: ri.clone(),
                });
            }
        }
        rows.push(SdpRow {
            kind: RowKind::Ge,
            terms,
            free: Vec::new(),
            rhs: Float::with_val(prec, 1),
        });
    }

    // Identity rows, one equality per monomial.
    for row in &identity.rows {
        let terms = row
            .entries
            .iter()
            .map(|(b, i, j, q)| SdpTerm {
                block: *b,
                i: *i,
                j: *j,
                value: hp::float_of_rational(prec, q, Round::Nearest),
            })
            .collect();
        let free = row
            .f
            .iter()
            .map(|(k, q)| (1 + *k, hp::float_of_rational(prec, q, Round::Nearest)))
            .collect();
        rows.push(SdpRow {
            kind: RowKind::Eq,
            terms,
            free,
            rhs: Float::new(prec),
        });
    }

    let mut obj = vec![SdpTerm {
        block: z_block,
        i: 0,
        j: 0,
        value: Float::with_val(prec, 1),
    }];
    if let Some(yb) = y_block {
        for (i, c) in cuts.iter().enumerate() {
            obj.push(SdpTerm {
                block: yb,
                i,
                j: i,
                value: hp::float_of_rational(prec, &c.rhs, Round::Nearest),
            });
        }
    }

    let problem = SdpProblem {
        prec,
        blocks,
        num_free,
        obj,
        obj_free: Vec::new(),
        rows,
    };
    problem.validate().map_err(ModelError::Invalid)?;

    Ok(DualModel {
        n,
        d,
        prec,
        kmax,
        sample,
        cuts: cuts.to_vec(),
        identity,
        z_block,
        y_block,
        problem,
    })
}

impl DualModel {
    /// Solver configuration tuned for certification: feasibility residuals
    /// are driven far below the duality gap so the identity residual at the
    /// solved point ends up orders of magnitude below the interior blocks'
    /// smallest eigenvalues.
    pub fn default_config(&self) -> SolverConfig {
        SolverConfig {
            prec: self.prec,
            tol_gap: 1e-12,
            tol_feas: 1e-16,
            max_iter: 300,
            ..SolverConfig::default()
        }
    }

    /// Solves the problem and unpacks the solution.
    pub fn solve(&self, config: &SolverConfig) -> Result<(DualPoint, SdpSolution), ModelError> {
        let sol = ipm::solve(&self.problem, config)?;
        Ok((self.extract(&sol), sol))
    }

    /// Unpacks a solution of [`DualModel::problem`] (fresh or re-loaded
    /// from an archive) into named components.
    pub fn extract(&self, sol: &SdpSolution) -> DualPoint {
        let prec = self.prec;
        let zb = match &sol.x_blocks[self.z_block] {
            BlockSol::Psd(m) => m,
            BlockSol::Diag(_) => unreachable!("z block is PSD"),
        };
        let z11 = zb[(0, 0)].clone();
        let z12 = Float::with_val(prec, 2 * &zb[(0, 1)]);
        let z22 = zb[(1, 1)].clone();
        let y = match self.y_block {
            Some(yb) => match &sol.x_blocks[yb] {
                BlockSol::Diag(d) => d.clone(),
                BlockSol::Psd(_) => unreachable!("y block is diagonal"),
            },
            None => Vec::new(),
        };
        let blocks: Vec<Mat> = self
            .identity
            .blocks
            .iter()
            .enumerate()
            .map(|(b, _)| match &sol.x_blocks[b] {
                BlockSol::Psd(m) => m.clone(),
                BlockSol::Diag(_) => unreachable!("identity blocks are PSD"),
            })
            .collect();
        let ahat = self
            .sample
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, sol.y[i].clone()))
            .collect();
        DualPoint {
            bound: sol.primal_obj.clone(),
            lambda: sol.x_free[0].clone(),
            f: sol.x_free[1..].to_vec(),
            z11,
            z12,
            z22,
            y,
            blocks,
            ahat,
            ahat_tail: sol.y[self.sample.len()].clone(),
        }
    }

    /// Separation profile for the cut search: sampled-row multipliers as
    /// `f64`, suitable for [`crate::bqpcuts::generate_cuts`].
    pub fn ahat_f64(&self, point: &DualPoint) -> Vec<(u64, f64)> {
        point
            .ahat
            .iter()
            .map(|(k, v)| (*k, v.to_f64().max(0.0)))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Primal side: feasibility audit and the double-cap reference profile
// ---------------------------------------------------------------------------

/// Outcome of [`primal_check`].
#[derive(Clone, Debug)]
pub struct PrimalCheckReport {
    /// Most negative profile entry (0 when all are nonnegative).
    pub worst_negative: Float,
    /// `|Σ_k a(k) P_k(0)|`.
    pub equality_dev: Float,
    /// `a(0) - (Σ_k a(k))²`; nonnegative iff the 2×2 moment matrix
    /// `[[1, ω Σa], [ω Σa, ω² a(0)]]` is PSD.
    pub psd_margin: Float,
    /// `max_i (Σ_k a(k) r_i(k) - β_i)` over the cuts (`0` without cuts).
    pub worst_cut_excess: Float,
    /// Whether the truncated-moment membership program was feasible, when
    /// it was requested.
    pub membership: Option<bool>,
    /// `Σ_k a(k)`: the density this profile certifies from below.
    pub value: Float,
    pub ok: bool,
}

/// Verifies that a profile `a(0..=K)` is (within `tol`) a feasible point of
/// the primal problem: entrywise nonnegative, orthogonality equality
/// `Σ a(k) P_k(0) = 0`, the 2×2 moment condition, and every cut inequality
/// `Σ_k a(k) r_i(k) ≤ β_i`.  With `membership_d = Some(d)` it additionally
/// solves the degree-`d` truncated-moment program that ties `a(0..=2d)` to
/// PSD localizing blocks (small `d` only — the program has one row per
/// block entry).
pub fn primal_check(
    n: u32,
    a: &[Float],
    cuts: &[BqpInequality],
    tol: f64,
    membership_d: Option<usize>,
    prec: Prec,
) -> Result<PrimalCheckReport, ModelError> {
    if a.is_empty() {
        return Err(ModelError::Invalid("empty profile".into()));
    }
    let fam = JacobiFamily::new(n)?;
    let tol_f = Float::with_val(prec, tol);

    let mut worst_negative = Float::new(prec);
    for v in a {
        if *v < worst_negative {
            worst_negative = v.clone();
        }
    }

    let mut eq = Float::new(prec);
    let mut value = Float::new(prec);
    for (k, v) in a.iter().enumerate() {
        let p0 = fam.at_zero(k as u64);
        if p0 != 0 {
            eq += Float::with_val(prec, v * &hp::float_of_rational(prec, &p0, Round::Nearest));
        }
        value += v;
    }
    let equality_dev = eq.abs();

    let psd_margin = {
        let s2 = Float::with_val(prec, &value * &value);
        Float::with_val(prec, &a[0] - &s2)
    };

    let mut worst_cut_excess = Float::new(prec);
    for c in cuts {
        let rs = c.r_sequence(a.len() as u64 - 1, prec);
        let mut lhs = Float::new(prec);
        for (v, r) in a.iter().zip(rs.iter()) {
            lhs += Float::with_val(prec, v * r);
        }
        let beta = hp::float_of_rational(prec, &c.rhs, Round::Nearest);
        let excess = lhs - beta;
        if excess > worst_cut_excess {
            worst_cut_excess = excess;
        }
    }

    let membership = match membership_d {
        None => None,
        Some(d) => Some(moment_membership(n, d, a, tol, prec)?),
    };

    let ok = worst_negative >= -tol_f.clone()
        && equality_dev <= tol_f
        && psd_margin >= -tol_f.clone()
        && worst_cut_excess <= tol_f
        && membership != Some(false);
    Ok(PrimalCheckReport {
        worst_negative,
        equality_dev,
        psd_margin,
        worst_cut_excess,
        membership,
        value,
        ok,
    })
}

/// Feasibility of the degree-`d` truncated-moment program: do moments
/// `Φ_m` over the monomials of degree ≤ 2d exist whose localizing blocks
/// (the identity blocks with their signs restored) are PSD within `tol`
/// and whose univariate part reproduces `a(0..=2d)` within `tol`?
fn moment_membership(
    n: u32,
    d: usize,
    a: &[Float],
    tol: f64,
    prec: Prec,
) -> Result<bool, ModelError> {
    let identity = polysym::sos_identity(n, d)?;
    if a.len() < identity.f_len {
        return Err(ModelError::Invalid(format!(
            "profile too short for membership at degree {d}: need {} entries",
            identity.f_len
        )));
    }
    let num_monos = identity.rows.len();
    let tol_f = Float::with_val(prec, tol);

    let blocks: Vec<ConeBlock> = identity
        .blocks
        .iter()
        .map(|b| ConeBlock::Psd(b.size))
        .collect();

    let mut rows: Vec<SdpRow> = Vec::new();
    // Entry ties: S_B[i][j] + Σ_m stored(m, B, i, j)·Φ_m = tol·[i = j]
    // (the stored entries are the negated localizing coefficients, so the
    // localizing matrix is S_B - tol·I ⪰ -tol·I, i.e. PSD within tol).
    for (b, info) in identity.blocks.iter().enumerate() {
        for i in 0..info.size {
            for j in i..info.size {
                let mut free: Vec<(usize, Float)> = Vec::new();
                for (m, row) in identity.rows.iter().enumerate() {
                    for (eb, ei, ej, q) in &row.entries {
                        if *eb == b && *ei == i && *ej == j {
                            free.push((m, hp::float_of_rational(prec, q, Round::Nearest)));
                        }
                    }
                }
                let weight = if i == j { 1.0 } else { 0.5 };
                rows.push(SdpRow {
                    kind: RowKind::Eq,
                    terms: vec![SdpTerm {
                        block: b,
                        i,
                        j,
                        value: Float::with_val(prec, weight),
                    }],
                    free,
                    rhs: if i == j {
                        Float::with_val(prec, tol)
                    } else {
                        Float::new(prec)
                    },
                });
            }
        }
    }
    // Univariate ties within tol: |Σ_m fcoef(m, k)·Φ_m - a(k)| ≤ tol.
    for k in 0..identity.f_len {
        let mut free: Vec<(usize, Float)> = Vec::new();
        for (m, row) in identity.rows.iter().enumerate() {
            for (fk, q) in &row.f {
                if *fk == k {
                    free.push((m, hp::float_of_rational(prec, q, Round::Nearest)));
                }
            }
        }
        let ak = a[k].clone();
        rows.push(SdpRow {
            kind: RowKind::Ge,
            terms: Vec::new(),
            free: free.clone(),
            rhs: Float::with_val(prec, &ak - &tol_f),
        });
        rows.push(SdpRow {
            kind: RowKind::Ge,
            terms: Vec::new(),
            free: free.into_iter().map(|(m, q)| (m, -q)).collect(),
            rhs: -Float::with_val(prec, &ak + &tol_f),
        });
    }

    // Bounded feasibility objective: min Σ tr(S_B).
    let mut obj = Vec::new();
    for (b, info) in identity.blocks.iter().enumerate() {
        for i in 0..info.size {
            obj.push(SdpTerm {
                block: b,
                i,
                j: i,
                value: Float::with_val(prec, 1),
            });
        }
    }

    let problem = SdpProblem {
        prec,
        blocks,
        num_free: num_monos,
        obj,
        obj_free: Vec::new(),
        rows,
    };
    let config = SolverConfig {
        prec,
        tol_gap: 1e-12,
        tol_feas: 1e-12,
        max_iter: 200,
        ..SolverConfig::default()
    };
    Ok(ipm::solve(&problem, &config).is_ok())
}

/// Reference primal profile: the two antipodal spherical caps of angular
/// radius π/4 (the classical orthogonality-avoiding set).  Entry `k` is
/// `h_k J_k² / ω_n²` where `J_k = ∫ P_k(⟨x, e⟩) dω(x)` over the double cap;
/// odd entries vanish by symmetry and the sequence sums to the set's
/// density `1 - cos(π/4)`-style value as the length grows.
///
/// For `k ≥ 2` the integral collapses by the ultraspherical differential
/// equation to a boundary term,
/// `J_k = |S^{n-2}| · 2 (1-a²)^{(n-1)/2} P_k'(a) / (k (k+n-2))` at
/// `a = 1/√2`, so no quadrature is involved; `J_0` uses the partial
/// sine-power integral `∫_0^{π/4} sin^{n-2}`.
pub fn double_cap_profile(n: u32, kmax: u64, prec: Prec) -> Result<Vec<Float>, ModelError> {
    if n < 3 {
        return Err(ModelError::Special(SpecialError::DimensionTooSmall {
            min: 3,
            got: n,
        }));
    }
    let fam = JacobiFamily::new(n)?;
    let omega = special::sphere_surface(n, prec)?;
    let omega_sq = Float::with_val(prec, &omega * &omega);
    let slice = special::sphere_surface(n - 1, prec)?;
    let a = Float::with_val(prec, 0.5f64).sqrt();

    // (1 - a²)^{(n-1)/2} = 2^{-(n-1)/2}, split into the integer power and
    // the possible half step.
    let mut boundary_pow = Float::with_val(prec, Float::i_exp(1, -(((n - 1) / 2) as i32)));
    if (n - 1) % 2 == 1 {
        boundary_pow *= &a;
    }

    // ∫_0^{π/4} sin^{n-2} φ dφ by the stable downward power recurrence.
    let x = hp::pi(prec) / 4u32;
    let (sinx, cosx) = x.clone().sin_cos(Float::new(prec));
    let mut s_even = x.clone(); // ∫ sin^0
    let mut s_odd = Float::with_val(prec, 1 - &cosx); // ∫ sin^1
    let target = n - 2;
    let mut m = 2u32;
    while m <= target {
        let which = if m % 2 == 0 { &mut s_even } else { &mut s_odd };
        // S_m = (-cos·sin^{m-1} + (m-1) S_{m-2}) / m.
        let mut v = Float::with_val(prec, (&sinx).pow(m - 1));
        v *= &cosx;
        v = -v;
        v += Float::with_val(prec, (m - 1) * &*which);
        v /= m;
        *which = v;
        m += 1;
    }
    let partial_sin = if target % 2 == 0 { s_even } else { s_odd };

    let mut out = Vec::with_capacity(kmax as usize + 1);
    // k = 0: J_0 is the double cap's measure.
    let j0 = Float::with_val(prec, 2 * &slice) * &partial_sin;
    let mut a0 = Float::with_val(prec, &j0 * &j0);
    a0 /= &omega_sq;
    out.push(a0);

    // Joint value/derivative recurrence for P_k at the fixed point a.
    let mut p_prev = Float::with_val(prec, 1); // P_0(a)
    let mut d_prev = Float::new(prec); // P_0'(a)
    let mut p_cur = a.clone(); // P_1(a)
    let mut d_cur = Float::with_val(prec, 1); // P_1'(a)
    for k in 1..=kmax {
        if k >= 2 {
            let (au, b, den) = fam.step(k);
            let mut p = Float::with_val(prec, &a * &p_cur);
            p *= au;
            p += Float::with_val(prec, b * &p_prev);
            p /= den as i32;
            let mut dp = Float::with_val(prec, &a * &d_cur);
            dp += &p_cur;
            dp *= au;
            dp += Float::with_val(prec, b * &d_prev);
            dp /= den as i32;
            p_prev = std::mem::replace(&mut p_cur, p);
            d_prev = std::mem::replace(&mut d_cur, dp);
        }
        if k % 2 == 1 {
            out.push(Float::new(prec));
            continue;
        }
        // J_k from the boundary term of the ultraspherical ODE.
        let hk = special::harmonic_dim(n, k)?;
        let denom = k as i64 * (k as i64 + n as i64 - 2);
        let mut jk = Float::with_val(prec, 2 * &slice);
        jk *= &boundary_pow;
        jk *= &d_cur;
        jk /= Float::with_val(prec, denom);
        let mut ak = Float::with_val(prec, &jk * &jk);
        ak *= Float::with_val(prec, &hk);
        ak /= &omega_sq;
        out.push(ak);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hp::float;

    const P: Prec = 256;

    #[test]
    fn sample_schedule_is_frozen() {
        let s = choose_sample(6, 3000);
        // Dense head.
        assert_eq!(&s[..25], (0..=24).collect::<Vec<u64>>().as_slice());
        // First geometric points: ⌈24·1.15⌉ = 28 → {28, 29, 30};
        // ⌈24·1.3225⌉ = 32 → {32, 33, 34}.
        assert_eq!(&s[25..31], &[28, 29, 30, 32, 33, 34]);
        assert_eq!(*s.last().unwrap(), 3000);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        // Everything in range.
        assert!(s.iter().all(|&k| k <= 3000));

        let t = choose_sample(2, 60);
        assert_eq!(&t[..9], (0..=8).collect::<Vec<u64>>().as_slice());
        assert!(t.contains(&10) && t.contains(&11) && t.contains(&12));
        assert_eq!(*t.last().unwrap(), 60);
    }

    #[test]
    fn build_dual_inventory() {
        let model = build_dual(3, 2, &[], 40, P).unwrap();
        // Identity blocks F_0..F_2 (sizes 3, 2, 1) and Q_0, Q_1, Q_2, Q_4
        // (sizes 10, 4, 1, 1); then the z block.
        let sizes: Vec<usize> = model.problem.blocks.iter().map(|b| b.size()).collect();
        assert_eq!(sizes, vec![3, 2, 1, 10, 4, 1, 1, 2]);
        assert_eq!(model.z_block, 7);
        assert_eq!(model.y_block, None);
        assert_eq!(model.problem.num_free, 6);
        let ns = model.sample.len();
        assert_eq!(model.problem.rows.len(), ns + 1 + 35);

        // Row 0 is degree 0: λ coefficient 1, f(0) coefficient -1, both z
        // terms, right-hand side 1.
        let r0 = &model.problem.rows[0];
        assert_eq!(r0.kind, RowKind::Ge);
        assert_eq!(r0.free.len(), 2);
        assert!(r0.free.iter().any(|(i, v)| *i == 0 && *v == 1));
        assert!(r0.free.iter().any(|(i, v)| *i == 1 && *v == -1));
        let omega = special::sphere_surface(3, P).unwrap();
        let z12 = r0
            .terms
            .iter()
            .find(|t| t.block == 7 && t.i == 0 && t.j == 1)
            .unwrap();
        assert!(Float::with_val(P, &z12.value + &omega).abs() < float(P, 1e-70));
        assert!(r0
            .terms
            .iter()
            .any(|t| t.block == 7 && t.i == 1 && t.j == 1));

        // Odd-degree rows drop the λ coefficient; degrees above 2d drop f.
        let r1 = &model.problem.rows[1];
        assert!(r1.free.iter().all(|(i, _)| *i != 0));
        let k_big = model.sample.iter().position(|&k| k > 4).unwrap();
        let rb = &model.problem.rows[k_big];
        assert!(rb.free.iter().all(|(i, _)| *i == 0));

        // The limit row has no free coefficients and rhs 1.
        let rt = &model.problem.rows[ns];
        assert!(rt.free.is_empty());
        assert_eq!(rt.kind, RowKind::Ge);

        // Identity rows are equalities with zero right-hand side.
        let ri = &model.problem.rows[ns + 1];
        assert_eq!(ri.kind, RowKind::Eq);
        assert!(ri.rhs.is_zero());
    }

    #[test]
    fn double_cap_profile_matches_analytic_values() {
        let a = double_cap_profile(3, 12, P).unwrap();
        // a(0) = (1 - 1/√2)² = 3/2 - √2.
        let expect0 = Float::with_val(P, 1.5f64) - float(P, 2).sqrt();
        assert!(Float::with_val(P, &a[0] - &expect0).abs() < float(P, 1e-70));
        // a(2) = 5/32 exactly (J_2 = π/√2, h_2 = 5, ω_3 = 4π).
        let expect2 = float(P, 5) / 32u32;
        assert!(Float::with_val(P, &a[2] - &expect2).abs() < float(P, 1e-70));
        // Odd entries vanish.
        for k in (1..12).step_by(2) {
            assert!(a[k].is_zero());
        }
        // All entries nonnegative.
        assert!(a.iter().all(|v| *v >= 0));
    }

    #[test]
    fn double_cap_profile_passes_primal_check() {
        let a = double_cap_profile(3, 400, P).unwrap();
        let report = primal_check(3, &a, &[], 1e-3, None, P).unwrap();
        assert!(report.ok, "report: {report:?}");
        assert!(report.value > float(P, 0.29));
        assert!(report.value < float(P, 0.2929));
        assert!(report.worst_negative.is_zero());

        // Scaling the profile up violates the 2×2 moment condition.
        let scaled: Vec<Float> = a
            .iter()
            .map(|v| Float::with_val(P, v * &float(P, 1.3)))
            .collect();
        let bad = primal_check(3, &scaled, &[], 1e-3, None, P).unwrap();
        assert!(!bad.ok);
        assert!(bad.psd_margin < 0);
    }

    #[test]
    fn double_cap_profile_is_a_truncated_moment_sequence() {
        let a = double_cap_profile(3, 40, P).unwrap();
        let report = primal_check(3, &a, &[], 1e-6, Some(2), P).unwrap();
        assert_eq!(report.membership, Some(true));
    }

    #[test]
    fn small_bound_solve_brackets_and_dominates_the_primal() {
        let model = build_dual(3, 2, &[], 200, P).unwrap();
        let (point, sol) = model.solve(&model.default_config()).unwrap();
        // A valid upper bound for the density: above every primal value,
        // below an obviously slack ceiling.
        assert!(point.bound > float(P, 0.2928), "bound = {}", point.bound);
        assert!(point.bound < float(P, 0.45), "bound = {}", point.bound);
        let primal = double_cap_profile(3, 400, P).unwrap();
        let mut pv = Float::new(P);
        for v in &primal {
            pv += v;
        }
        assert!(pv < point.bound, "weak duality violated");

        // Multipliers of the inequality rows are nonnegative.
        assert!(point.ahat.iter().all(|(_, v)| *v >= -1e-20));
        // The z relation: bound = z11 (no cuts), z11 ≥ z12²/(4 z22).
        assert!(Float::with_val(P, &point.bound - &point.z11).abs() < float(P, 1e-15));
        let lift = Float::with_val(P, &point.z12 * &point.z12)
            / (Float::with_val(P, 4 * &point.z22));
        assert!(point.z11 >= lift - float(P, 1e-20));
        // Mechanical sanity of the extraction.
        assert_eq!(point.f.len(), 5);
        assert_eq!(point.blocks.len(), model.identity.blocks.len());
        assert_eq!(sol.iterations as u64 + 1, sol.log.len() as u64 + 1);
    }
}
