//! Exact trivariate polynomial algebra for three-point positivity
//! constraints on the sphere.
//!
//! All coefficients are [`rug::Rational`], so every identity produced here is
//! exact: no rounding enters until a polynomial is evaluated at a floating
//! point.  The variables are always called `u`, `v`, `t` and stand for the
//! three pairwise inner products of a triple of unit vectors.
//!
//! The exported pieces are:
//!
//! * [`TriPoly`] — sparse polynomials in `(u, v, t)` over the rationals;
//! * [`q_poly`] — the bivariate lift `Q_k` of a Jacobi polynomial, expanded
//!   exactly by parity;
//! * [`y_matrix`] / [`y_bar_matrix`] — the matrix polynomials entering the
//!   three-point moment constraints, and their symmetrized average;
//! * [`domain_polys`] — the four polynomials that cut out the region of
//!   feasible inner-product triples;
//! * [`sos_identity`] — the sparse linear identity tying a univariate
//!   coefficient sequence to sum-of-squares certificates.  Its rows become
//!   the equality constraints of the semidefinite program and are re-used
//!   verbatim by the certifier, so they are kept in exact rational form.

use std::collections::BTreeMap;

use rug::ops::NegAssign;
use rug::{Float, Rational};

use crate::hp::{float_of_rational, Prec};
use crate::special::{harmonic_dim, JacobiFamily, Result, SpecialError};

/// The six permutations of three symbols.  `perm[i]` is the index of the old
/// variable whose exponent moves into slot `i`.
pub const ALL_PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// A monomial `u^a v^b t^c`.
///
/// The ordering is graded: lower total degree first, and within equal total
/// degree lexicographic on `(a, b, c)`.  Ascending iteration therefore lists
/// `1, t, v, u, t^2, v t, v^2, u t, u v, u^2, ...`, ending each degree block
/// with the pure power of `u`.  Every canonical basis in this crate uses this
/// order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    deg: u16,
    pub a: u16,
    pub b: u16,
    pub c: u16,
}

impl Monomial {
    /// Creates `u^a v^b t^c`.
    pub fn new(a: u16, b: u16, c: u16) -> Self {
        Monomial {
            deg: a + b + c,
            a,
            b,
            c,
        }
    }

    /// Total degree `a + b + c`.
    pub fn degree(&self) -> u16 {
        self.deg
    }

    /// Product of two monomials (exponents add).
    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial::new(self.a + other.a, self.b + other.b, self.c + other.c)
    }

    /// Applies a permutation of the three variables.
    pub fn permute(&self, perm: &[usize; 3]) -> Monomial {
        let e = [self.a, self.b, self.c];
        Monomial::new(e[perm[0]], e[perm[1]], e[perm[2]])
    }
}

/// All monomials of total degree at most `deg`, in ascending canonical order.
///
/// The count is the tetrahedral number `C(deg + 3, 3)`.
pub fn monomials_up_to(deg: u16) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in 0..=deg {
        for a in 0..=d {
            for b in 0..=(d - a) {
                out.push(Monomial::new(a, b, d - a - b));
            }
        }
    }
    out.sort();
    out
}

/// Basis of the Gram matrix certifying a polynomial of degree at most `r`:
/// all monomials of total degree at most `⌊r/2⌋`.
///
/// Returns an empty basis when `r < 0`, meaning the corresponding block is
/// absent.
pub fn gram_basis(r: i64) -> Vec<Monomial> {
    if r < 0 {
        return Vec::new();
    }
    monomials_up_to((r / 2) as u16)
}

/// A sparse polynomial in `(u, v, t)` with exact rational coefficients.
///
/// The term map is normalized: zero coefficients are never stored, so two
/// polynomials are equal as values exactly when their `terms` maps are equal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TriPoly {
    terms: BTreeMap<Monomial, Rational>,
}

impl TriPoly {
    /// The zero polynomial.
    pub fn zero() -> Self {
        TriPoly {
            terms: BTreeMap::new(),
        }
    }

    /// The constant polynomial 1.
    pub fn one() -> Self {
        TriPoly::constant(Rational::from(1))
    }

    /// A constant polynomial.
    pub fn constant(q: Rational) -> Self {
        let mut p = TriPoly::zero();
        p.add_term(Monomial::new(0, 0, 0), q);
        p
    }

    /// A single term `q · u^a v^b t^c`.
    pub fn term(q: Rational, m: Monomial) -> Self {
        let mut p = TriPoly::zero();
        p.add_term(m, q);
        p
    }

    /// The variable with index `i` (0 = `u`, 1 = `v`, 2 = `t`).
    pub fn variable(i: usize) -> Self {
        let m = match i {
            0 => Monomial::new(1, 0, 0),
            1 => Monomial::new(0, 1, 0),
            2 => Monomial::new(0, 0, 1),
            _ => panic!("variable index out of range: {i}"),
        };
        TriPoly::term(Rational::from(1), m)
    }

    /// Adds `q` to the coefficient of `m`, dropping the term if it cancels.
    pub fn add_term(&mut self, m: Monomial, q: Rational) {
        if q == 0 {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(c) => {
                *c += q;
                if *c == 0 {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, q);
            }
        }
    }

    /// True for the zero polynomial.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of stored (nonzero) terms.
    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Total degree; the zero polynomial reports 0.
    pub fn degree(&self) -> u16 {
        self.terms.keys().map(|m| m.deg).max().unwrap_or(0)
    }

    /// Coefficient of a monomial (zero if absent).
    pub fn coeff(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_default()
    }

    /// Iterates over `(monomial, coefficient)` pairs in ascending canonical
    /// order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    /// Sum of two polynomials.
    pub fn add(&self, other: &TriPoly) -> TriPoly {
        let mut out = self.clone();
        for (m, q) in other.terms() {
            out.add_term(*m, q.clone());
        }
        out
    }

    /// Difference of two polynomials.
    pub fn sub(&self, other: &TriPoly) -> TriPoly {
        let mut out = self.clone();
        for (m, q) in other.terms() {
            out.add_term(*m, -q.clone());
        }
        out
    }

    /// Negation.
    pub fn neg(&self) -> TriPoly {
        let mut out = self.clone();
        for q in out.terms.values_mut() {
            q.neg_assign();
        }
        out
    }

    /// Product with a rational scalar.
    pub fn scale(&self, q: &Rational) -> TriPoly {
        if *q == 0 {
            return TriPoly::zero();
        }
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= q;
        }
        out
    }

    /// Product of two polynomials.
    pub fn mul(&self, other: &TriPoly) -> TriPoly {
        let mut out = TriPoly::zero();
        for (m1, q1) in self.terms() {
            for (m2, q2) in other.terms() {
                out.add_term(m1.mul(m2), Rational::from(q1 * q2));
            }
        }
        out
    }

    /// Applies a permutation of the variables to every term.
    pub fn permute(&self, perm: &[usize; 3]) -> TriPoly {
        let mut out = TriPoly::zero();
        for (m, q) in self.terms() {
            out.add_term(m.permute(perm), q.clone());
        }
        out
    }

    /// Average over all six permutations of the variables.  The result is
    /// invariant under every permutation of `(u, v, t)`.
    pub fn symmetrize(&self) -> TriPoly {
        let mut sum = TriPoly::zero();
        for perm in &ALL_PERMS {
            sum = sum.add(&self.permute(perm));
        }
        sum.scale(&Rational::from((1, 6)))
    }

    /// Evaluates at an exact rational point.
    pub fn eval_q(&self, u: &Rational, v: &Rational, t: &Rational) -> Rational {
        let (pu, pv, pt) = self.power_tables_q(u, v, t);
        let mut acc = Rational::new();
        for (m, q) in self.terms() {
            let mut term = q.clone();
            term *= &pu[m.a as usize];
            term *= &pv[m.b as usize];
            term *= &pt[m.c as usize];
            acc += term;
        }
        acc
    }

    /// Evaluates at a floating point with round-to-nearest arithmetic at
    /// precision `prec`.  Accumulation follows the canonical term order, so
    /// the result is deterministic.
    pub fn eval_f(&self, prec: Prec, u: &Float, v: &Float, t: &Float) -> Float {
        let (ma, mb, mc) = self.max_exponents();
        let pu = float_powers(prec, u, ma);
        let pv = float_powers(prec, v, mb);
        let pt = float_powers(prec, t, mc);
        let mut acc = Float::with_val(prec, 0);
        for (m, q) in self.terms() {
            let mut term = float_of_rational(prec, q, rug::float::Round::Nearest);
            term *= &pu[m.a as usize];
            term *= &pv[m.b as usize];
            term *= &pt[m.c as usize];
            acc += term;
        }
        acc
    }

    fn max_exponents(&self) -> (u16, u16, u16) {
        let mut ma = 0;
        let mut mb = 0;
        let mut mc = 0;
        for m in self.terms.keys() {
            ma = ma.max(m.a);
            mb = mb.max(m.b);
            mc = mc.max(m.c);
        }
        (ma, mb, mc)
    }

    fn power_tables_q(
        &self,
        u: &Rational,
        v: &Rational,
        t: &Rational,
    ) -> (Vec<Rational>, Vec<Rational>, Vec<Rational>) {
        let (ma, mb, mc) = self.max_exponents();
        (
            rational_powers(u, ma),
            rational_powers(v, mb),
            rational_powers(t, mc),
        )
    }
}

fn rational_powers(x: &Rational, max: u16) -> Vec<Rational> {
    let mut out = Vec::with_capacity(max as usize + 1);
    out.push(Rational::from(1));
    for i in 1..=max as usize {
        out.push(Rational::from(&out[i - 1] * x));
    }
    out
}

fn float_powers(prec: Prec, x: &Float, max: u16) -> Vec<Float> {
    let mut out = Vec::with_capacity(max as usize + 1);
    out.push(Float::with_val(prec, 1));
    for i in 1..=max as usize {
        out.push(Float::with_val(prec, &out[i - 1] * x));
    }
    out
}

/// The bivariate lift of the degree-`k` Jacobi polynomial on `S^{n-1}`:
///
/// ```text
/// Q_k(u, v, t) = ((1 - u^2)(1 - v^2))^{k/2} · P_k( (t - u v) / sqrt((1 - u^2)(1 - v^2)) )
/// ```
///
/// Because `P_k` only has monomials of the same parity as `k`, every
/// half-integer power above cancels and `Q_k` is a genuine polynomial of
/// total degree at most `2k`.  The expansion is carried out exactly:
/// with `P_k(x) = Σ_j c_j x^j` the result is
/// `Σ_j c_j (t - u v)^j ((1 - u^2)(1 - v^2))^{(k - j)/2}`.
///
/// `Q_k` is symmetric in `u` and `v`.
///
/// # Errors
///
/// Fails for `n < 2`, like [`JacobiFamily::new`].
pub fn q_poly(n: u32, k: u64) -> Result<TriPoly> {
    let fam = JacobiFamily::new(n)?;
    let coeffs = fam.coeffs(k);

    // t - u v and (1 - u^2)(1 - v^2), with power tables built on demand.
    let mut shifted = TriPoly::term(Rational::from(1), Monomial::new(0, 0, 1));
    shifted.add_term(Monomial::new(1, 1, 0), Rational::from(-1));

    let mut disc_u = TriPoly::one();
    disc_u.add_term(Monomial::new(2, 0, 0), Rational::from(-1));
    let mut disc_v = TriPoly::one();
    disc_v.add_term(Monomial::new(0, 2, 0), Rational::from(-1));
    let disc = disc_u.mul(&disc_v);

    let kk = k as usize;
    let mut shifted_pow = Vec::with_capacity(kk + 1);
    shifted_pow.push(TriPoly::one());
    for j in 1..=kk {
        shifted_pow.push(shifted_pow[j - 1].mul(&shifted));
    }
    let mut disc_pow = Vec::with_capacity(kk / 2 + 1);
    disc_pow.push(TriPoly::one());
    for j in 1..=kk / 2 {
        disc_pow.push(disc_pow[j - 1].mul(&disc));
    }

    let mut out = TriPoly::zero();
    for (j, c) in coeffs.iter().enumerate() {
        if *c == 0 {
            continue;
        }
        debug_assert!((kk - j) % 2 == 0, "parity violated in Jacobi coefficients");
        let part = shifted_pow[j].mul(&disc_pow[(kk - j) / 2]).scale(c);
        out = out.add(&part);
    }
    Ok(out)
}

/// The degree-`k` matrix polynomial used in the three-point constraint for
/// `S^{n-1}`, truncated at degree `d`.
///
/// The matrix has size `(d - k + 1) × (d - k + 1)` and entries
/// `Y_{ij}(u, v, t) = u^i v^j · Q_k(u, v, t)`, where `Q_k` is taken **one
/// dimension down** (the polynomial of [`q_poly`] with parameter `n - 1`):
/// the triple `(u, v, t)` fixes one point of the sphere and the remaining
/// two range over a sphere of one dimension less.
///
/// # Errors
///
/// Fails for `n < 3` or `k > d`.
pub fn y_matrix(n: u32, k: u64, d: usize) -> Result<Vec<Vec<TriPoly>>> {
    if n < 3 {
        return Err(SpecialError::DimensionTooSmall { min: 3, got: n });
    }
    if k as usize > d {
        return Err(SpecialError::ArgumentOutOfRange);
    }
    let base = q_poly(n - 1, k)?;
    let size = d - k as usize + 1;
    let mut rows = Vec::with_capacity(size);
    for i in 0..size {
        let mut row = Vec::with_capacity(size);
        for j in 0..size {
            let shift = Monomial::new(i as u16, j as u16, 0);
            let mut entry = TriPoly::zero();
            for (m, q) in base.terms() {
                entry.add_term(m.mul(&shift), q.clone());
            }
            row.push(entry);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Entrywise average of [`y_matrix`] over the six simultaneous permutations
/// of `(u, v, t)`.
///
/// Because `Q_k` is symmetric in `u` and `v`, the averaged matrix is
/// entrywise symmetric: `Ȳ_{ij} = Ȳ_{ji}` as polynomials.  This is the form
/// paired with a symmetric positive semidefinite multiplier block.
pub fn y_bar_matrix(n: u32, k: u64, d: usize) -> Result<Vec<Vec<TriPoly>>> {
    let y = y_matrix(n, k, d)?;
    let size = y.len();
    let mut rows = Vec::with_capacity(size);
    for i in 0..size {
        let mut row = Vec::with_capacity(size);
        for j in 0..size {
            row.push(y[i][j].symmetrize());
        }
        rows.push(row);
    }
    Ok(rows)
}

/// The four polynomials that cut out the set of feasible inner-product
/// triples `(u, v, t)` of three unit vectors:
///
/// ```text
/// g1 = 3 - u^2 - v^2 - t^2
/// g2 = (1-u^2)(1-v^2) + (1-u^2)(1-t^2) + (1-v^2)(1-t^2)
/// g3 = (1-u^2)(1-v^2)(1-t^2)
/// g4 = 1 + 2uvt - u^2 - v^2 - t^2
/// ```
///
/// `g4` is the determinant of the Gram matrix of the three vectors; the
/// first three are symmetric functions of the squares.  All four are
/// nonnegative exactly on the feasible set.
pub fn domain_polys() -> [TriPoly; 4] {
    let u2 = Monomial::new(2, 0, 0);
    let v2 = Monomial::new(0, 2, 0);
    let t2 = Monomial::new(0, 0, 2);

    let mut one_u = TriPoly::one();
    one_u.add_term(u2, Rational::from(-1));
    let mut one_v = TriPoly::one();
    one_v.add_term(v2, Rational::from(-1));
    let mut one_t = TriPoly::one();
    one_t.add_term(t2, Rational::from(-1));

    let mut g1 = TriPoly::constant(Rational::from(3));
    g1.add_term(u2, Rational::from(-1));
    g1.add_term(v2, Rational::from(-1));
    g1.add_term(t2, Rational::from(-1));

    let g2 = one_u
        .mul(&one_v)
        .add(&one_u.mul(&one_t))
        .add(&one_v.mul(&one_t));
    let g3 = one_u.mul(&one_v).mul(&one_t);

    let mut g4 = TriPoly::one();
    g4.add_term(Monomial::new(1, 1, 1), Rational::from(2));
    g4.add_term(u2, Rational::from(-1));
    g4.add_term(v2, Rational::from(-1));
    g4.add_term(t2, Rational::from(-1));

    [g1, g2, g3, g4]
}

/// `P_k(u) + P_k(v) + P_k(t)` for the Jacobi family on `S^{n-1}`, as an
/// exact polynomial.
pub fn univariate_sum_term(n: u32, k: u64) -> Result<TriPoly> {
    let fam = JacobiFamily::new(n)?;
    let coeffs = fam.coeffs(k);
    let mut out = TriPoly::zero();
    for (j, c) in coeffs.iter().enumerate() {
        if *c == 0 {
            continue;
        }
        let j = j as u16;
        out.add_term(Monomial::new(j, 0, 0), c.clone());
        out.add_term(Monomial::new(0, j, 0), c.clone());
        out.add_term(Monomial::new(0, 0, j), c.clone());
    }
    Ok(out)
}

/// Identifies one positive semidefinite block of the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockLabel {
    /// Three-point moment block of degree `k` (paired with `Ȳ_k`).
    F(usize),
    /// Sum-of-squares multiplier block `i` (0 = plain, 1..=4 paired with the
    /// domain polynomial `g_i`).
    Q(usize),
}

/// Size and role of one block in the identity.
#[derive(Clone, Debug)]
pub struct SosBlock {
    pub label: BlockLabel,
    pub size: usize,
}

/// One row of the identity: the coefficient of a single monomial.
///
/// The row asserts
///
/// ```text
/// Σ_k f_coeff(k) · f(k)  -  Σ (entry coefficients applied to the blocks) = 0
/// ```
///
/// where a block entry `(b, i, j)` with `i < j` is applied with the usual
/// symmetric inner-product weight 2, and diagonal entries with weight 1.
/// The stored rational is the inner-product matrix entry itself, so the
/// weight is *not* folded into it.
#[derive(Clone, Debug)]
pub struct SosRow {
    /// The monomial whose coefficient this row collects.
    pub monomial: Monomial,
    /// Coefficients on the free univariate sequence `f(0), ..., f(2d)`.
    pub f: Vec<(usize, Rational)>,
    /// Coefficients on block entries: `(block index, i, j, value)` with
    /// `i <= j`, block indices referring to [`SosIdentity::blocks`].
    pub entries: Vec<(usize, usize, usize, Rational)>,
}

/// The complete linear identity for dimension parameter `n` and truncation
/// degree `d`:
///
/// ```text
///   Σ_{k=0}^{2d} f(k) · (h_k / 3) · (P_k(u) + P_k(v) + P_k(t))
/// - Σ_{k=0}^{d}  ⟨F_k, Ȳ_k⟩
/// - ⟨Q_0, V_{2d}⟩ - ⟨Q_1, g1·V_{2d-2}⟩ - ⟨Q_2, g2·V_{2d-4}⟩
/// - ⟨Q_3, g3·V_{2d-6}⟩ - ⟨Q_4, g4·V_{2d-3}⟩  =  0   (as a polynomial)
/// ```
///
/// where `h_k` is the dimension of the degree-`k` harmonic space on
/// `S^{n-1}`, `V_r` is the Gram-product matrix over [`gram_basis`]`(r)`, and
/// blocks whose basis would have negative degree are omitted (for example
/// `Q_3` when `d < 3`).
///
/// There is one row per monomial of total degree at most `2d`, in ascending
/// canonical order, for a total of `C(2d + 3, 3)` rows.
#[derive(Clone, Debug)]
pub struct SosIdentity {
    /// Ambient sphere dimension parameter (the sphere is `S^{n-1}`).
    pub n: u32,
    /// Truncation degree.
    pub d: usize,
    /// Number of free univariate coefficients, `2d + 1`.
    pub f_len: usize,
    /// Block inventory: `F_0, ..., F_d` first, then the present `Q_i` in
    /// increasing `i`.
    pub blocks: Vec<SosBlock>,
    /// One row per monomial of degree at most `2d`, ascending.
    pub rows: Vec<SosRow>,
}

impl SosIdentity {
    /// Index of the block with the given label, if present.
    pub fn block_index(&self, label: BlockLabel) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    /// Evaluates every row exactly on a full assignment.
    ///
    /// `f` must have length `f_len`; `blocks[b]` is the full symmetric
    /// matrix for block `b` (entries `blocks[b][i][j] = blocks[b][j][i]`).
    /// Off-diagonal entries are applied with weight 2, matching the
    /// symmetric inner product.
    pub fn residual_exact(&self, f: &[Rational], blocks: &[Vec<Vec<Rational>>]) -> Vec<Rational> {
        assert_eq!(f.len(), self.f_len, "wrong number of univariate values");
        assert_eq!(blocks.len(), self.blocks.len(), "wrong number of blocks");
        for (b, info) in blocks.iter().zip(self.blocks.iter()) {
            assert_eq!(b.len(), info.size, "block has wrong size");
        }
        let mut out = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let mut acc = Rational::new();
            for (k, c) in &row.f {
                acc += Rational::from(c * &f[*k]);
            }
            for (b, i, j, c) in &row.entries {
                let mut term = Rational::from(c * &blocks[*b][*i][*j]);
                if i != j {
                    term *= 2;
                }
                acc += term;
            }
            out.push(acc);
        }
        out
    }
}

/// Builds the identity rows for dimension parameter `n` and truncation
/// degree `d`.  See [`SosIdentity`] for the exact statement.
///
/// # Errors
///
/// Fails for `n < 3` (the matrix polynomials need a sphere one dimension
/// down) or `d == 0`.
pub fn sos_identity(n: u32, d: usize) -> Result<SosIdentity> {
    if n < 3 {
        return Err(SpecialError::DimensionTooSmall { min: 3, got: n });
    }
    if d == 0 {
        return Err(SpecialError::ArgumentOutOfRange);
    }
    let two_d = 2 * d;
    let row_monos = monomials_up_to(two_d as u16);
    let index: BTreeMap<Monomial, usize> = row_monos
        .iter()
        .enumerate()
        .map(|(i, m)| (*m, i))
        .collect();
    let mut rows: Vec<SosRow> = row_monos
        .iter()
        .map(|m| SosRow {
            monomial: *m,
            f: Vec::new(),
            entries: Vec::new(),
        })
        .collect();

    // Univariate part: f(k) · (h_k / 3) · (P_k(u) + P_k(v) + P_k(t)).
    for k in 0..=two_d {
        let hk = Rational::from((harmonic_dim(n, k as u64)?, 3));
        let sum = univariate_sum_term(n, k as u64)?;
        for (m, q) in sum.terms() {
            rows[index[m]].f.push((k, Rational::from(q * &hk)));
        }
    }

    let mut blocks = Vec::new();

    // Three-point moment blocks F_k against the symmetrized matrices.
    for k in 0..=d {
        let ybar = y_bar_matrix(n, k as u64, d)?;
        let size = ybar.len();
        let b = blocks.len();
        blocks.push(SosBlock {
            label: BlockLabel::F(k),
            size,
        });
        for i in 0..size {
            for j in i..size {
                for (m, q) in ybar[i][j].terms() {
                    rows[index[m]].entries.push((b, i, j, -q.clone()));
                }
            }
        }
    }

    // Sum-of-squares multiplier blocks.
    let gs = domain_polys();
    let multiplier_degree: [i64; 5] = [
        two_d as i64,
        two_d as i64 - 2,
        two_d as i64 - 4,
        two_d as i64 - 6,
        two_d as i64 - 3,
    ];
    for (qi, r) in multiplier_degree.iter().enumerate() {
        let basis = gram_basis(*r);
        if basis.is_empty() {
            continue;
        }
        let b = blocks.len();
        blocks.push(SosBlock {
            label: BlockLabel::Q(qi),
            size: basis.len(),
        });
        let g = if qi == 0 {
            TriPoly::one()
        } else {
            gs[qi - 1].clone()
        };
        for (ia, ma) in basis.iter().enumerate() {
            for (ib, mb) in basis.iter().enumerate().skip(ia) {
                let pair = ma.mul(mb);
                for (gm, gq) in g.terms() {
                    let m = pair.mul(gm);
                    rows[index[&m]].entries.push((b, ia, ib, -gq.clone()));
                }
            }
        }
    }

    Ok(SosIdentity {
        n,
        d,
        f_len: two_d + 1,
        blocks,
        rows,
    })
}
