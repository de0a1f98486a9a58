//! Rigorous certification of solved density bounds.
//!
//! A floating-point solution of the [`crate::model`] problem is only
//! numerically feasible: the polynomial identity holds up to round-off, the
//! PSD blocks are strictly interior, and the degree constraints were only
//! imposed on a finite sample.  This module turns such a solution into a
//! bound that holds for **every** degree `k ≥ 0`:
//!
//! 1. the identity residual is bounded coefficient-wise (`η`) in interval
//!    arithmetic and absorbed into the top Gram block, which is shown PSD
//!    with margin `κ·B·η` by an interval Cholesky certificate;
//! 2. the limit row is given slack `η′` by decreasing `z12` (a repair that
//!    only increases the objective);
//! 3. a cutoff `k0` is computed from monotone tail bounds so that every
//!    degree beyond it is within `ε < η′` of the limit row;
//! 4. every degree `k ≤ k0` is checked by a forward-stable recurrence
//!    sweep, spot-audited at twice the working precision, and any violation
//!    is repaired by a further uniform `z12` shift;
//! 5. the 2×2 `z` block is re-lifted minimally and the final objective is
//!    rounded outward.
//!
//! The result is a [`CertificationReport`] whose `certified_bound` is a
//! sound upper bound for the sphere density whenever `status` is
//! [`CertStatus::Certified`].

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rug::float::Round;
use rug::ops::{DivAssignRound, MulAssignRound};
use rug::{Assign, Float};

use crate::bqpcuts::{BqpInequality, CutError};
use crate::hp::{self, Ival, Prec};
use crate::linalg::{self, Mat};
use crate::model::{DualModel, DualPoint};
use crate::polysym::BlockLabel;
use crate::special::{self, JacobiFamily, SpecialError, TAIL_BOUND_CELLS};
use thiserror::Error;

/// Safety factor between the absorption budget and the certified
/// smallest eigenvalue of the top Gram block.
pub const KAPPA: f64 = 10.0;
/// Hard cap on the tail cutoff `k0`.
pub const DEFAULT_K0_CAP: u64 = 10_000_000;
/// Working precision of the explicit degree sweep.
pub const SWEEP_PREC: Prec = 512;
/// Precision of the audit passes re-checking the sweep.
pub const AUDIT_PREC: Prec = 1024;
/// The audit re-evaluates one degree out of this many.
pub const AUDIT_STRIDE: u64 = 100;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(
        "tail cutoff search hit the cap {cap}: bound {reached:.3e} at the cap still exceeds epsilon {epsilon:.3e}"
    )]
    K0CapExceeded { cap: u64, reached: f64, epsilon: f64 },
    #[error("margin ordering violated: epsilon {epsilon:.3e} must be positive and below the limit-row margin {margin:.3e}")]
    MarginOrdering { epsilon: f64, margin: f64 },
}

/// Outcome of a certification attempt.  `Failed` carries the first reason;
/// the report's other fields still hold whatever diagnostics were computed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertStatus {
    Certified,
    Failed(String),
}

/// Certified smallest-eigenvalue margin of one PSD block.
#[derive(Clone, Debug)]
pub struct EigMargin {
    /// Block name, e.g. `F0` or `Q1`.
    pub label: String,
    /// Rigorous lower bound on the smallest eigenvalue (0 when no positive
    /// shift could be certified).
    pub lambda_min: Float,
    /// Required margin: `κ·B·η` for the top Gram block, 0 elsewhere.
    pub budget: Float,
    /// Whether positive semidefiniteness (with the shift) was proved.
    pub proved: bool,
}

/// Everything the certification pipeline established, margins included.
#[derive(Clone, Debug)]
pub struct CertificationReport {
    /// Outward bound on the largest identity-residual coefficient.
    pub eta: Float,
    pub eig_margins: Vec<EigMargin>,
    /// Certified lower bound on the limit-row value after repair.
    pub lhs_infinity: Float,
    /// Explicitly swept degree range `0..=k0`.
    pub k0: u64,
    /// Tail slack: degrees beyond `k0` are within `epsilon` of the limit.
    pub epsilon: f64,
    /// Limit-row margin `η′` (must exceed `epsilon`).
    pub margin: f64,
    /// `(z11, z12, z22)` after repair.
    pub adjusted_z: (Float, Float, Float),
    /// Final objective, rounded up; a sound bound iff `status` is
    /// `Certified`.
    pub certified_bound: Float,
    /// Smallest `lhs(k) - 1` over the swept range, after all repairs.
    pub sweep_min_slack: Float,
    /// Uniform extra `z12` shift performed after the sweep (0 if none).
    pub extra_shift: Float,
    /// Number of degrees re-evaluated by the high-precision audit.
    pub audit_points: usize,
    /// Largest deviation the audit found between the two precisions.
    pub audit_max_dev: Float,
    pub status: CertStatus,
}

impl CertificationReport {
    pub fn is_certified(&self) -> bool {
        self.status == CertStatus::Certified
    }

    /// Plain-text artifact with every margin and adjustment, one
    /// `key value` pair per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("certification-report 1\n");
        match &self.status {
            CertStatus::Certified => s.push_str("status certified\n"),
            CertStatus::Failed(r) => {
                s.push_str("status failed\n");
                s.push_str(&format!("reason {r}\n"));
            }
        }
        s.push_str(&format!(
            "certified_bound {}\n",
            hp::fmt_sci(&self.certified_bound, 30, Round::Up)
        ));
        s.push_str(&format!("eta {}\n", hp::fmt_sci(&self.eta, 10, Round::Up)));
        s.push_str(&format!("k0 {}\n", self.k0));
        s.push_str(&format!("epsilon {:e}\n", self.epsilon));
        s.push_str(&format!("margin {:e}\n", self.margin));
        s.push_str(&format!(
            "lhs_infinity {}\n",
            hp::fmt_sci(&self.lhs_infinity, 20, Round::Down)
        ));
        for (name, v) in [
            ("z11", &self.adjusted_z.0),
            ("z12", &self.adjusted_z.1),
            ("z22", &self.adjusted_z.2),
        ] {
            s.push_str(&format!("{name} {}\n", hp::fmt_sci(v, 30, Round::Nearest)));
        }
        s.push_str(&format!(
            "sweep_min_slack {}\n",
            hp::fmt_sci(&self.sweep_min_slack, 10, Round::Down)
        ));
        s.push_str(&format!(
            "extra_shift {}\n",
            hp::fmt_sci(&self.extra_shift, 10, Round::Up)
        ));
        s.push_str(&format!("audit_points {}\n", self.audit_points));
        s.push_str(&format!(
            "audit_max_dev {}\n",
            hp::fmt_sci(&self.audit_max_dev, 10, Round::Up)
        ));
        for m in &self.eig_margins {
            s.push_str(&format!(
                "block {} lambda_min {} budget {} proved {}\n",
                m.label,
                hp::fmt_sci(&m.lambda_min, 10, Round::Down),
                hp::fmt_sci(&m.budget, 10, Round::Up),
                m.proved
            ));
        }
        s
    }
}

/// Tunables of [`repair_and_certify`].
#[derive(Clone, Debug)]
pub struct CertifyConfig {
    /// Tail slack `ε`.
    pub epsilon: f64,
    /// Limit-row margin `η′ > ε`.
    pub margin: f64,
    pub k0_cap: u64,
    pub sweep_prec: Prec,
    pub audit_prec: Prec,
    pub audit_stride: u64,
}

impl CertifyConfig {
    /// Default margin split `η′ = 10·ε`.
    pub fn with_epsilon(epsilon: f64) -> Self {
        CertifyConfig {
            epsilon,
            margin: 10.0 * epsilon,
            k0_cap: DEFAULT_K0_CAP,
            sweep_prec: SWEEP_PREC,
            audit_prec: AUDIT_PREC,
            audit_stride: AUDIT_STRIDE,
        }
    }
}

// ---------------------------------------------------------------------------
// Identity residual
// ---------------------------------------------------------------------------

/// Outward-rounded bound on the largest absolute coefficient of the
/// polynomial identity residual at the solved point: the identity's exact
/// rational coefficients are paired with the floating-point `f` values and
/// block entries in interval arithmetic, row by row.
pub fn residual_eta(model: &DualModel, point: &DualPoint) -> Result<Float, CertifyError> {
    let identity = &model.identity;
    if point.f.len() != identity.f_len {
        return Err(CertifyError::Shape(format!(
            "expected {} univariate values, got {}",
            identity.f_len,
            point.f.len()
        )));
    }
    for (b, info) in identity.blocks.iter().enumerate() {
        let m = &point.blocks[b];
        if m.rows != info.size || m.cols != info.size {
            return Err(CertifyError::Shape(format!(
                "block {} is {}x{}, expected {}",
                b, m.rows, m.cols, info.size
            )));
        }
    }
    let prec = 2 * model.prec.max(128);
    let mut eta = Float::new(prec);
    for row in &identity.rows {
        let mut acc = Ival::zero(prec);
        for (k, q) in &row.f {
            let c = Ival::of_rational(prec, q);
            acc.add_assign(&c.mul(&Ival::point(Float::with_val(prec, &point.f[*k]))));
        }
        for (b, i, j, q) in &row.entries {
            let mut c = Ival::of_rational(prec, q);
            if i != j {
                c = c.scale(prec, &rug::Rational::from(2));
            }
            let x = Ival::point(Float::with_val(prec, &point.blocks[*b][(*i, *j)]));
            acc.add_assign(&c.mul(&x));
        }
        let mag = acc.mag();
        if mag > eta {
            eta = mag;
        }
    }
    Ok(eta)
}

// ---------------------------------------------------------------------------
// Eigenvalue margins
// ---------------------------------------------------------------------------

/// Interval-Cholesky proof that `a - tau·I` is positive semidefinite.
/// Success rigorously certifies `λ_min(a) ≥ tau`; failure proves nothing.
fn ival_psd_shifted(prec: Prec, a: &Mat, tau: &Float) -> bool {
    let n = a.rows;
    let mut l: Vec<Vec<Ival>> = vec![Vec::new(); n];
    let tau_iv = Ival::point(Float::with_val(prec, tau));
    for j in 0..n {
        let mut d = Ival::point(Float::with_val(prec, &a[(j, j)])).sub(&tau_iv);
        for k in 0..j {
            let ljk = l[j][k].clone();
            d.sub_assign(&ljk.mul(&ljk));
        }
        if !(*d.lower() > 0) {
            return false;
        }
        let piv = d.sqrt();
        for i in j + 1..n {
            let mut s = Ival::point(Float::with_val(prec, &a[(i, j)]));
            for k in 0..j {
                let p = l[i][k].mul(&l[j][k]);
                s.sub_assign(&p);
            }
            l[i].push(s.div(&piv));
        }
        debug_assert_eq!(l[j].len(), j);
        l[j].push(piv);
    }
    true
}

/// Certified smallest-eigenvalue margins for all identity blocks, and the
/// overall verdict: every block proved PSD and the top Gram block's margin
/// at least `κ·B·η` where `B` is its side length.
pub fn eigen_margin_check(
    model: &DualModel,
    point: &DualPoint,
    eta: &Float,
) -> Result<(Vec<EigMargin>, bool), CertifyError> {
    let prec = 2 * model.prec.max(128);
    let q0 = model
        .identity
        .blocks
        .iter()
        .position(|b| b.label == BlockLabel::Q(0))
        .ok_or_else(|| CertifyError::Shape("identity lacks the top Gram block".into()))?;
    let mut margins = Vec::new();
    let mut all_ok = true;
    for (b, info) in model.identity.blocks.iter().enumerate() {
        let mat = &point.blocks[b];
        let budget = if b == q0 {
            // κ·B·η, rounded up (κ·B is exact in double precision).
            let mut v = Float::with_val(prec, eta);
            v.mul_add_round(
                &Float::with_val(prec, KAPPA * info.size as f64),
                &Float::new(prec),
                Round::Up,
            );
            v
        } else {
            Float::new(prec)
        };
        // A float eigensolve suggests the margin; the interval Cholesky
        // certifies it (retrying at half the shift while the proof fails).
        let approx = match linalg::sym_eig(model.prec, mat) {
            Ok((evals, _)) => evals[0].clone(),
            Err(_) => Float::new(model.prec),
        };
        let mut proved = false;
        let mut certified = Float::new(prec);
        if approx > 0 {
            let mut tau = Float::with_val(prec, &approx) * Float::with_val(prec, 0.875f64);
            for _ in 0..60 {
                if ival_psd_shifted(prec, mat, &tau) {
                    proved = true;
                    certified = tau.clone();
                    break;
                }
                tau /= 2u32;
            }
        }
        if !proved && ival_psd_shifted(prec, mat, &Float::new(prec)) {
            proved = true;
        }
        let label = match info.label {
            BlockLabel::F(k) => format!("F{k}"),
            BlockLabel::Q(i) => format!("Q{i}"),
        };
        if !proved || certified < budget {
            all_ok = false;
        }
        margins.push(EigMargin {
            label,
            lambda_min: certified,
            budget,
            proved,
        });
    }
    Ok((margins, all_ok))
}

// ---------------------------------------------------------------------------
// Degree-row evaluation
// ---------------------------------------------------------------------------

struct ChainState {
    /// Coefficient the chain's polynomial value is multiplied by.
    coef: Float,
    /// Recurrence argument.
    t: Float,
    prev: Float,
    cur: Float,
    next: Float,
    tmp: Float,
}

/// Single-pass evaluator of the degree rows
/// `lhs(k) = λ·P_k(0) + Σ_i y_i·r_i(k) - ω z12 - [k=0] ω² z22 - [k≤2d] f(k)`
/// at a fixed precision, by running one three-term recurrence per distinct
/// polynomial argument.
pub struct LhsEvaluator {
    prec: Prec,
    fam: JacobiFamily,
    lam: Float,
    f: Vec<Float>,
    /// `Σ_i y_i·trace_i - ω z12`.
    constant: Float,
    omega_sq_z22: Float,
    chains: Vec<(Float, Float)>,
}

impl LhsEvaluator {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: u32,
        lam: &Float,
        f: &[Float],
        z12: &Float,
        z22: &Float,
        y: &[Float],
        cuts: &[BqpInequality],
        prec: Prec,
    ) -> Result<Self, CertifyError> {
        if y.len() != cuts.len() {
            return Err(CertifyError::Shape(format!(
                "{} multipliers for {} cuts",
                y.len(),
                cuts.len()
            )));
        }
        let fam = JacobiFamily::new(n)?;
        let omega = special::sphere_surface(n, prec)?;
        let mut constant = Float::with_val(prec, &omega * z12);
        constant = -constant;
        let mut chains = Vec::new();
        for (c, yi) in cuts.iter().zip(y.iter()) {
            let yi = Float::with_val(prec, yi);
            let tr = hp::float_of_rational(prec, &c.r_infinity(), Round::Nearest);
            constant += Float::with_val(prec, &yi * &tr);
            for ((i, j), g) in c.inner_products(prec) {
                let lq = hp::float_of_rational(
                    prec,
                    &rug::Rational::from(2 * c.coeff[i][j].clone()),
                    Round::Nearest,
                );
                let coef = Float::with_val(prec, &yi * &lq);
                chains.push((coef, g));
            }
        }
        let omega_sq = Float::with_val(prec, &omega * &omega);
        Ok(LhsEvaluator {
            prec,
            fam,
            lam: Float::with_val(prec, lam),
            f: f.iter().map(|v| Float::with_val(prec, v)).collect(),
            constant,
            omega_sq_z22: omega_sq * Float::with_val(prec, z22),
            chains,
        })
    }

    /// Calls `visit(k, lhs(k))` for every `k = 0..=k_hi` in order.
    pub fn sweep<F: FnMut(u64, &Float)>(&self, k_hi: u64, mut visit: F) {
        let prec = self.prec;
        let mut states: Vec<ChainState> = std::iter::once((self.lam.clone(), Float::new(prec)))
            .chain(self.chains.iter().cloned())
            .map(|(coef, t)| ChainState {
                coef,
                t,
                prev: Float::new(prec),
                cur: Float::with_val(prec, 1),
                next: Float::new(prec),
                tmp: Float::new(prec),
            })
            .collect();
        let mut lhs = Float::new(prec);
        for k in 0..=k_hi {
            if k == 1 {
                for s in states.iter_mut() {
                    s.prev.assign(&s.cur);
                    s.cur.assign(&s.t);
                }
            } else if k >= 2 {
                let (au, b, den) = self.fam.step(k);
                for s in states.iter_mut() {
                    s.next.assign(&s.cur * &s.t);
                    s.next *= au as i32;
                    s.tmp.assign(&s.prev * b as i32);
                    s.next += &s.tmp;
                    s.next /= den as i32;
                    std::mem::swap(&mut s.prev, &mut s.cur);
                    std::mem::swap(&mut s.cur, &mut s.next);
                }
            }
            lhs.assign(&self.constant);
            for s in states.iter_mut() {
                s.tmp.assign(&s.coef * &s.cur);
                lhs += &s.tmp;
            }
            if k == 0 {
                lhs -= &self.omega_sq_z22;
            }
            if (k as usize) < self.f.len() {
                lhs -= &self.f[k as usize];
            }
            visit(k, &lhs);
        }
    }

    /// `lhs(k)` for one degree (runs the recurrences up to `k`).
    pub fn eval_at(&self, k: u64) -> Float {
        let mut out = Float::new(self.prec);
        self.sweep(k, |kk, v| {
            if kk == k {
                out.assign(v);
            }
        });
        out
    }
}

/// Certified lower bound on the limit row
/// `lhs(∞) = Σ_i y_i·trace_i - ω z12` in interval arithmetic.
pub fn lhs_infinity(
    n: u32,
    z12: &Float,
    y: &[Float],
    cuts: &[BqpInequality],
    prec: Prec,
) -> Result<Ival, CertifyError> {
    let omega = special::sphere_surface_ival(n, prec)?;
    let mut acc = omega
        .mul(&Ival::point(Float::with_val(prec, z12)))
        .neg();
    for (c, yi) in cuts.iter().zip(y.iter()) {
        let tr = Ival::of_rational(prec, &c.r_infinity());
        acc.add_assign(&tr.mul(&Ival::point(Float::with_val(prec, yi))));
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Tail cutoff
// ---------------------------------------------------------------------------

/// Smallest cutoff `k0 ≤ cap` such that for all `k ≥ k0` the degree rows
/// differ from the limit row by at most `epsilon`:
/// `|lhs(k) - lhs(∞)| ≤ |λ|·sup|P_k(0)| + Σ_i y_i·(tail of r_i) ≤ ε`.
///
/// The two terms get separate budgets (half each when both are present).
///
/// * The `λ` term is handled exactly: odd-degree values vanish and the
///   even-degree magnitudes satisfy `|P_k(0)| = |P_{k-2}(0)|·(k-1)/(k+n-3)`,
///   a strictly decreasing chain, so the supremum over `k' ≥ k` is the value
///   at `k` itself.  The chain is walked once with upward rounding.  (The
///   generic integral tail bound is useless here: its Riemann cells touching
///   the endpoints never decay, flooring it near `2/cells` however large `k`
///   gets.)
/// * The cut term uses the nonincreasing integral bounds of
///   [`BqpInequality::r_tail_bound_cells`], with the cell count scaled to
///   push the discretization floor safely under the budget, searched by
///   doubling and binary refinement.
pub fn find_k0(
    n: u32,
    lam: &Float,
    cuts: &[BqpInequality],
    y: &[Float],
    epsilon: f64,
    prec: Prec,
    cap: u64,
) -> Result<u64, CertifyError> {
    let lam_abs = lam.clone().abs();
    let lam_active = !lam_abs.is_zero();
    let cut_active = cuts
        .iter()
        .zip(y.iter())
        .any(|(c, yi)| !yi.is_zero() && c.abs_offdiag_weight() != 0);
    let (share_lam, share_cut) = match (lam_active, cut_active) {
        (true, true) => (epsilon / 2.0, epsilon / 2.0),
        (true, false) => (epsilon, 0.0),
        (false, true) => (0.0, epsilon),
        (false, false) => return Ok(0),
    };

    let mut k0_lam = 0u64;
    if lam_active {
        let share = hp::float(prec, share_lam);
        let zero = Float::new(prec);
        // Upper bound on |P_k(0)| along the even chain, k = 0, 2, 4, ...
        let mut u = Float::with_val(prec, 1);
        let mut k = 0u64;
        loop {
            let mut v = Float::with_val(prec, &lam_abs);
            v.mul_add_round(&u, &zero, Round::Up);
            if v <= share {
                k0_lam = k;
                break;
            }
            if k >= cap {
                return Err(CertifyError::K0CapExceeded {
                    cap,
                    reached: v.to_f64(),
                    epsilon,
                });
            }
            k += 2;
            u.mul_assign_round((k - 1) as u32, Round::Up);
            u.div_assign_round((k + u64::from(n) - 3) as u32, Round::Up);
        }
    }

    let mut k0_cut = 0u64;
    if cut_active {
        let share = hp::float(prec, share_cut);
        // The integral bound floors at about `2π/(R(n)·cells) ≤ 6.6/cells`
        // for n ≥ 3; keep that floor a few times below the budget.  The
        // ceiling keeps a single evaluation affordable — budgets too tiny
        // for it surface as a clean cap error below.
        let cells = TAIL_BOUND_CELLS
            .max((24.0 / share_cut).ceil() as usize)
            .min(1 << 20);
        let bound_at = |k: u64| -> Result<Float, CertifyError> {
            let mut e = Float::new(prec);
            for (c, yi) in cuts.iter().zip(y.iter()) {
                if yi.is_zero() {
                    continue;
                }
                let rt = c.r_tail_bound_cells(k, prec, cells)?;
                e.mul_add_round(
                    &Float::with_val(prec, 1),
                    &Float::with_val(prec, yi * &rt),
                    Round::Up,
                );
            }
            Ok(e)
        };
        if !(bound_at(0)? <= share) {
            let mut hi = 1u64;
            loop {
                if bound_at(hi)? <= share {
                    break;
                }
                if hi >= cap {
                    return Err(CertifyError::K0CapExceeded {
                        cap,
                        reached: bound_at(cap)?.to_f64(),
                        epsilon,
                    });
                }
                hi = (hi * 2).min(cap);
            }
            let mut lo = hi / 2;
            while lo + 1 < hi {
                let mid = lo + (hi - lo) / 2;
                if bound_at(mid)? <= share {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            k0_cut = hi;
        }
    }
    Ok(k0_lam.max(k0_cut))
}

// ---------------------------------------------------------------------------
// The pipeline
// ---------------------------------------------------------------------------

/// Runs the full repair-and-certify pipeline on a solved point.
///
/// Hard input errors (bad `ε`/`η′` ordering, tail cutoff cap exceeded —
/// retry with a larger `ε`) are returned as `Err`.  Certification
/// *failures* (degenerate `z` block, unproved eigenvalue margins, audit
/// mismatch) come back as `Ok` with [`CertStatus::Failed`] and full
/// diagnostics.
pub fn repair_and_certify(
    model: &DualModel,
    point: &DualPoint,
    config: &CertifyConfig,
) -> Result<CertificationReport, CertifyError> {
    if !(config.epsilon > 0.0) || config.epsilon >= config.margin {
        return Err(CertifyError::MarginOrdering {
            epsilon: config.epsilon,
            margin: config.margin,
        });
    }
    let sp = config.sweep_prec;
    let fail = |eta: Float, margins: Vec<EigMargin>, reason: String| CertificationReport {
        eta,
        eig_margins: margins,
        lhs_infinity: Float::new(sp),
        k0: 0,
        epsilon: config.epsilon,
        margin: config.margin,
        adjusted_z: (point.z11.clone(), point.z12.clone(), point.z22.clone()),
        certified_bound: point.bound.clone(),
        sweep_min_slack: Float::new(sp),
        extra_shift: Float::new(sp),
        audit_points: 0,
        audit_max_dev: Float::new(sp),
        status: CertStatus::Failed(reason),
    };

    if point.y.iter().any(|v| *v < 0) {
        return Ok(fail(
            Float::new(sp),
            Vec::new(),
            "negative cut multiplier".into(),
        ));
    }
    if !(point.z22 > 0) {
        return Ok(fail(
            Float::new(sp),
            Vec::new(),
            "z block degenerate: z22 is not positive, no repair direction exists".into(),
        ));
    }

    // Identity residual and its absorption margins.
    let eta = residual_eta(model, point)?;
    let (margins, margins_ok) = eigen_margin_check(model, point, &eta)?;
    if !margins_ok {
        return Ok(fail(
            eta,
            margins,
            "eigenvalue margin gate failed: residual cannot be absorbed".into(),
        ));
    }

    // Step 1: give the limit row slack η′ by decreasing z12.
    let omega = special::sphere_surface_ival(model.n, sp)?;
    let target = Float::with_val(sp, 1) + hp::float(sp, config.margin);
    let mut z12 = Float::with_val(sp, &point.z12);
    for _ in 0..4 {
        let linf = lhs_infinity(model.n, &z12, &point.y, &model.cuts, sp)?;
        let mut deficit = Float::with_val(sp, &target - linf.lower());
        if deficit <= 0 {
            break;
        }
        // Nudge past the target so interval rounding cannot stall the loop.
        deficit *= Float::with_val(sp, 1.0 + 1e-30);
        let delta = Ival::point(deficit).div(&omega);
        z12 = Float::with_val_round(sp, &z12 - delta.upper(), Round::Down).0;
    }
    let linf = lhs_infinity(model.n, &z12, &point.y, &model.cuts, sp)?;
    if !(Float::with_val(sp, linf.lower()) >= target) {
        return Ok(fail(
            eta,
            margins,
            "limit-row repair failed to reach its margin".into(),
        ));
    }

    // Step 2: cutoff beyond which the limit row dominates.
    let k0 = find_k0(
        model.n,
        &point.lambda,
        &model.cuts,
        &point.y,
        config.epsilon,
        sp,
        config.k0_cap,
    )?;

    // Step 3: explicit sweep of every degree up to k0, recording stride
    // values for the audit.
    let ev = LhsEvaluator::new(
        model.n,
        &point.lambda,
        &point.f,
        &z12,
        &point.z22,
        &point.y,
        &model.cuts,
        sp,
    )?;
    let mut min_lhs = Float::with_val(sp, f64::INFINITY);
    let mut stride_vals: Vec<(u64, Float)> = Vec::new();
    ev.sweep(k0, |k, v| {
        if *v < min_lhs {
            min_lhs.assign(v);
        }
        if k % config.audit_stride == 0 || k == k0 {
            stride_vals.push((k, v.clone()));
        }
    });

    // Step 4: audit the sweep at the higher precision.
    let ev_hi = LhsEvaluator::new(
        model.n,
        &point.lambda,
        &point.f,
        &z12,
        &point.z22,
        &point.y,
        &model.cuts,
        config.audit_prec,
    )?;
    let mut audit_max_dev = Float::new(config.audit_prec);
    {
        let mut idx = 0usize;
        ev_hi.sweep(k0, |k, v| {
            if idx < stride_vals.len() && stride_vals[idx].0 == k {
                let dev = Float::with_val(config.audit_prec, &stride_vals[idx].1 - v).abs();
                if dev > audit_max_dev {
                    audit_max_dev = dev;
                }
                idx += 1;
            }
        });
        debug_assert_eq!(idx, stride_vals.len());
    }
    let audit_tol = Float::with_val(sp, Float::i_exp(1, -((sp as i32) / 2)));
    if audit_max_dev > audit_tol {
        return Ok(fail(
            eta,
            margins,
            format!(
                "audit mismatch: recurrence precisions disagree by {}",
                hp::fmt_sci(&audit_max_dev, 5, Round::Up)
            ),
        ));
    }

    // Step 5: absorb any swept violation into one more uniform z12 shift.
    let mut extra_shift = Float::new(sp);
    let violation = Float::with_val(sp, 1 - &min_lhs);
    if violation > 0 {
        // The violated rows need lhs to grow by this much; padding guards
        // the plain-float sweep values (audited far below this scale).
        let mut v = violation.clone();
        v *= Float::with_val(sp, 1.0 + 1e-30);
        v += Float::with_val(sp, Float::i_exp(1, -((sp as i32) * 3 / 4)));
        let delta = Ival::point(v).div(&omega);
        extra_shift = delta.upper().clone();
        z12 = Float::with_val_round(sp, &z12 - &extra_shift, Round::Down).0;
        min_lhs += Float::with_val(sp, omega.lower() * &extra_shift);
    }

    // Step 6: minimal PSD lift of z11, never decreasing the solved value.
    let z12_iv = Ival::point(z12.clone());
    let lift = z12_iv
        .mul(&z12_iv)
        .div(&Ival::point(Float::with_val(sp, 4 * &point.z22)));
    let z11_min = lift.upper().clone();
    let z11 = if Float::with_val(sp, &point.z11) >= z11_min {
        Float::with_val(sp, &point.z11)
    } else {
        z11_min
    };

    // Final objective, rounded outward.
    let mut bound = Ival::point(z11.clone());
    for (c, yi) in model.cuts.iter().zip(point.y.iter()) {
        let beta = Ival::of_rational(sp, &c.rhs);
        bound.add_assign(&beta.mul(&Ival::point(Float::with_val(sp, yi))));
    }
    let linf_final = lhs_infinity(model.n, &z12, &point.y, &model.cuts, sp)?;

    Ok(CertificationReport {
        eta,
        eig_margins: margins,
        lhs_infinity: linf_final.lower().clone(),
        k0,
        epsilon: config.epsilon,
        margin: config.margin,
        adjusted_z: (z11, z12, point.z22.clone()),
        certified_bound: bound.upper().clone(),
        sweep_min_slack: min_lhs - 1u32,
        extra_shift,
        audit_points: stride_vals.len(),
        audit_max_dev,
        status: CertStatus::Certified,
    })
}

/// Independent spot audit: re-evaluates the repaired degree rows at
/// `count` seeded random degrees up to `k_hi` in one sorted pass and
/// returns the smallest value found with its degree.  A sound certificate
/// keeps every value at least 1.
pub fn audit_random_lhs(
    model: &DualModel,
    point: &DualPoint,
    report: &CertificationReport,
    count: usize,
    k_hi: u64,
    seed: u64,
    prec: Prec,
) -> Result<(u64, Float), CertifyError> {
    let ev = LhsEvaluator::new(
        model.n,
        &point.lambda,
        &point.f,
        &report.adjusted_z.1,
        &report.adjusted_z.2,
        &point.y,
        &model.cuts,
        prec,
    )?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let targets: std::collections::BTreeSet<u64> =
        (0..count).map(|_| rng.gen_range(0..=k_hi)).collect();
    let last = *targets.iter().next_back().unwrap_or(&0);
    let mut min_val = Float::with_val(prec, f64::INFINITY);
    let mut min_k = 0u64;
    ev.sweep(last, |k, v| {
        if targets.contains(&k) && *v < min_val {
            min_val.assign(v);
            min_k = k;
        }
    });
    Ok((min_k, min_val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hp::float;
    use crate::model::{build_dual, double_cap_profile};

    const P: Prec = 256;

    /// An all-zero point with matching shapes.
    fn zero_point(model: &DualModel) -> DualPoint {
        DualPoint {
            bound: Float::new(P),
            lambda: Float::new(P),
            f: vec![Float::new(P); model.identity.f_len],
            z11: Float::new(P),
            z12: Float::new(P),
            z22: Float::new(P),
            y: Vec::new(),
            blocks: model
                .identity
                .blocks
                .iter()
                .map(|b| Mat::zeros(P, b.size, b.size))
                .collect(),
            ahat: Vec::new(),
            ahat_tail: Float::new(P),
        }
    }

    #[test]
    fn zero_point_has_zero_residual_and_zero_rows() {
        let model = build_dual(3, 2, &[], 20, P).unwrap();
        let point = zero_point(&model);
        let eta = residual_eta(&model, &point).unwrap();
        assert!(eta.is_zero());

        let ev = LhsEvaluator::new(
            3,
            &point.lambda,
            &point.f,
            &point.z12,
            &point.z22,
            &[],
            &[],
            P,
        )
        .unwrap();
        for k in [0u64, 1, 5, 40] {
            assert!(ev.eval_at(k).is_zero());
        }

        // λ = 1 contributes exactly P_0(0) = 1 at degree zero.
        let one = float(P, 1);
        let ev1 = LhsEvaluator::new(3, &one, &point.f, &point.z12, &point.z22, &[], &[], P)
            .unwrap();
        assert_eq!(ev1.eval_at(0), 1);
        // ... and P_2(0) = -1/2 at degree two.
        assert_eq!(ev1.eval_at(2), float(P, -0.5));

        // z22 = 0 leaves no repair direction.
        let report =
            repair_and_certify(&model, &point, &CertifyConfig::with_epsilon(1e-3)).unwrap();
        assert!(!report.is_certified());
        match &report.status {
            CertStatus::Failed(r) => assert!(r.contains("z22"), "reason: {r}"),
            CertStatus::Certified => unreachable!(),
        }
    }

    #[test]
    fn residual_is_linear_in_single_univariate_entries() {
        let model = build_dual(3, 2, &[], 20, P).unwrap();
        let mut point = zero_point(&model);
        let t = float(P, 1e-6);
        point.f[1] = t.clone();
        let eta = residual_eta(&model, &point).unwrap();
        // The residual of each row is fcoef(row, 1)·t, so η is the largest
        // |fcoef(·, 1)| times t.
        let mut maxc = rug::Rational::new();
        for row in &model.identity.rows {
            for (k, q) in &row.f {
                if *k == 1 {
                    let a = rug::Rational::from(q.clone().abs());
                    if a > maxc {
                        maxc = a;
                    }
                }
            }
        }
        let expect = Float::with_val(2 * P, &t)
            * hp::float_of_rational(2 * P, &maxc, Round::Nearest);
        let dev = Float::with_val(2 * P, &eta - &expect).abs();
        assert!(dev < float(2 * P, 1e-60), "eta {eta} vs {expect}");
    }

    #[test]
    fn interval_cholesky_certifies_shifts() {
        // diag(2, 5) with a small coupling: eigenvalues straddle 2 - 0.1.
        let mut a = Mat::zeros(P, 2, 2);
        a[(0, 0)] = float(P, 2);
        a[(1, 1)] = float(P, 5);
        a[(0, 1)] = float(P, 0.5);
        a[(1, 0)] = float(P, 0.5);
        assert!(ival_psd_shifted(P, &a, &float(P, 1.5)));
        assert!(!ival_psd_shifted(P, &a, &float(P, 2.5)));
        // Certifying PSD itself on a singular matrix fails (boundary), but
        // any negative shift passes.
        let mut s = Mat::zeros(P, 2, 2);
        s[(0, 0)] = float(P, 1);
        s[(0, 1)] = float(P, 1);
        s[(1, 0)] = float(P, 1);
        s[(1, 1)] = float(P, 1);
        assert!(ival_psd_shifted(P, &s, &float(P, -1e-30)));
    }

    #[test]
    fn tail_cutoff_examples() {
        let zero = Float::new(P);
        // λ = 0, no cuts: the bound is identically zero.
        assert_eq!(
            find_k0(3, &zero, &[], &[], 1e-3, P, DEFAULT_K0_CAP).unwrap(),
            0
        );
        // λ = 1, n = 3: the cutoff must push |P_k(0)| below ε.
        let one = float(P, 1);
        let k0 = find_k0(3, &one, &[], &[], 1e-3, P, DEFAULT_K0_CAP).unwrap();
        assert!(k0 > 1000, "k0 = {k0}");
        // With λ = 1 and everything else zero the degree rows are exactly
        // P_k(0); past the cutoff they must sit below ε.
        let zeros = [Float::new(P), Float::new(P), Float::new(P)];
        let ev = LhsEvaluator::new(3, &one, &[], &zeros[0], &zeros[1], &[], &[], P).unwrap();
        let even = k0 + (k0 % 2);
        let v = ev.eval_at(even);
        assert!(v.clone().abs() <= float(P, 1e-3), "P_{even}(0) = {v}");
        // Doubling ε never increases the cutoff.
        let k0_loose = find_k0(3, &one, &[], &[], 2e-3, P, DEFAULT_K0_CAP).unwrap();
        assert!(k0_loose <= k0);
        // A tiny ε overflows the cap.
        assert!(matches!(
            find_k0(3, &one, &[], &[], 1e-9, P, 100_000),
            Err(CertifyError::K0CapExceeded { .. })
        ));
    }

    #[test]
    fn certifies_a_solved_small_model() {
        let model = build_dual(3, 2, &[], 200, P).unwrap();
        let (point, _) = model.solve(&model.default_config()).unwrap();

        let eta = residual_eta(&model, &point).unwrap();
        assert!(eta < float(P, 1e-10), "eta = {eta}");

        let mut report = None;
        for eps in [1e-3, 2e-3, 4e-3, 8e-3] {
            match repair_and_certify(&model, &point, &CertifyConfig::with_epsilon(eps)) {
                Ok(r) => {
                    report = Some(r);
                    break;
                }
                Err(CertifyError::K0CapExceeded { .. }) => continue,
                Err(e) => panic!("unexpected error: {e}"),
            }
        }
        let report = report.expect("no epsilon fit under the cutoff cap");
        assert!(report.is_certified(), "status: {:?}", report.status);

        // The certificate never undercuts the solver objective, and the
        // repair slack is modest at this scale.
        assert!(report.certified_bound >= point.bound);
        assert!(
            Float::with_val(P, &report.certified_bound - &point.bound) < float(P, 0.05),
            "certified {} vs solved {}",
            report.certified_bound,
            point.bound
        );
        // It stays within the bracket the solver established.
        assert!(report.certified_bound < float(P, 0.45));
        let dc = double_cap_profile(3, 400, P).unwrap();
        let mut dcv = Float::new(P);
        for v in &dc {
            dcv += v;
        }
        assert!(report.certified_bound > dcv);

        assert!(Float::with_val(SWEEP_PREC, &report.lhs_infinity) >= 1 + float(P, report.margin) * 0.99);
        assert!(report.sweep_min_slack >= 0);
        assert!(report.audit_points > 0);

        // Independent random spot audit at the audit precision.
        let (k_min, v_min) =
            audit_random_lhs(&model, &point, &report, 500, 100_000, 7, AUDIT_PREC).unwrap();
        assert!(v_min >= 1, "lhs({k_min}) = {v_min}");

        let text = report.to_text();
        assert!(text.contains("status certified"));
        assert!(text.contains("certified_bound"));
        assert!(text.contains("block Q0"));
    }

    #[test]
    fn gate_rejects_singular_top_block() {
        let model = build_dual(3, 2, &[], 20, P).unwrap();
        let mut point = zero_point(&model);
        // Nonzero residual with an all-zero (singular) top Gram block.
        point.f[0] = float(P, 1e-6);
        point.z22 = float(P, 1.0);
        let report =
            repair_and_certify(&model, &point, &CertifyConfig::with_epsilon(1e-3)).unwrap();
        assert!(!report.is_certified());
        match &report.status {
            CertStatus::Failed(r) => assert!(r.contains("margin gate"), "reason: {r}"),
            CertStatus::Certified => unreachable!(),
        }
    }
}
