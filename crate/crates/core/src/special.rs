//! Normalized Jacobi (Gegenbauer) polynomials and sphere constants.
//!
//! Everything here is parameterized by the ambient dimension `n` of the unit
//! sphere `S^{n-1}` in `R^n`. The polynomial family `P_k` is normalized so
//! that `P_k(1) = 1` and is orthogonal with respect to the surface measure
//! written in the inner-product variable, i.e. the weight `(1-u²)^{(n-3)/2}`
//! on `[-1, 1]`.
//!
//! The family satisfies the forward-stable three-term recurrence
//!
//! ```text
//! P_0(u) = 1
//! P_1(u) = u
//! P_k(u) = (2k + n - 4)/(k + n - 3) · u · P_{k-1}(u)
//!        - (k - 1)/(k + n - 3) · P_{k-2}(u)        (k ≥ 2)
//! ```
//!
//! For `n = 3` these are the Legendre polynomials; for `n = 2` the Chebyshev
//! polynomials of the first kind.
//!
//! The module also provides the surface measure `ω_n` of `S^{n-1}`, the
//! dimension `h_k` of the space of degree-`k` spherical harmonics, and a
//! rigorous (outward-rounded) upper bound on `sup_{k ≥ k0} |P_k(t)|` used to
//! control constraint tails in certification.

use crate::hp::{self, Ival, Prec};
use rug::float::Round;
use rug::ops::{AddAssignRound, DivAssignRound, MulAssignRound};
use rug::{Float, Integer, Rational};
use thiserror::Error;

/// Errors for dimension/degree preconditions.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpecialError {
    /// The polynomial family needs an ambient dimension of at least 2.
    #[error("ambient dimension must be at least {min}, got {got}")]
    DimensionTooSmall { min: u32, got: u32 },
    /// Tail bounds require the argument to lie in [-1, 1].
    #[error("inner-product argument must lie in [-1, 1]")]
    ArgumentOutOfRange,
}

/// Result alias for this module.
pub type Result<T> = std::result::Result<T, SpecialError>;

/// The normalized Jacobi family on `S^{n-1}`.
///
/// Construction validates `n ≥ 2`; all evaluation entry points hang off this
/// struct so the dimension check happens exactly once.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JacobiFamily {
    n: u32,
}

impl JacobiFamily {
    pub fn new(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(SpecialError::DimensionTooSmall { min: 2, got: n });
        }
        Ok(JacobiFamily { n })
    }

    pub fn dim(&self) -> u32 {
        self.n
    }

    /// Recurrence factors for step `k ≥ 2`, exact:
    /// `P_k = (au_num/den)·u·P_{k-1} + (b_num/den)·P_{k-2}` with
    /// `au_num = 2k+n-4`, `b_num = -(k-1)`, `den = k+n-3`.
    #[inline]
    pub fn step(&self, k: u64) -> (i64, i64, i64) {
        debug_assert!(k >= 2);
        let n = self.n as i64;
        let k = k as i64;
        (2 * k + n - 4, -(k - 1), k + n - 3)
    }

    /// Evaluates `P_k(u)` at the given precision via the recurrence.
    pub fn eval(&self, k: u64, u: &Float, prec: Prec) -> Float {
        let mut it = JacobiIter::new(*self, u.clone(), prec);
        it.nth(k as usize).expect("iterator is infinite")
    }

    /// Evaluates `P_0(u), …, P_kmax(u)` in one forward pass.
    pub fn eval_all(&self, kmax: u64, u: &Float, prec: Prec) -> Vec<Float> {
        JacobiIter::new(*self, u.clone(), prec)
            .take(kmax as usize + 1)
            .collect()
    }

    /// Exact monomial coefficients of `P_k` (ascending degree, length `k+1`).
    ///
    /// Entries of parity different from `k` are zero.
    pub fn coeffs(&self, k: u64) -> Vec<Rational> {
        let mut prev: Vec<Rational> = vec![Rational::from(1)]; // P_0
        if k == 0 {
            return prev;
        }
        let mut cur: Vec<Rational> = vec![Rational::from(0), Rational::from(1)]; // P_1
        for j in 2..=k {
            let (au, b, den) = self.step(j);
            let mut next = vec![Rational::from(0); j as usize + 1];
            for (i, c) in cur.iter().enumerate() {
                if *c != 0 {
                    next[i + 1] += Rational::from((au, den)) * c;
                }
            }
            for (i, c) in prev.iter().enumerate() {
                if *c != 0 {
                    next[i] += Rational::from((b, den)) * c;
                }
            }
            prev = std::mem::take(&mut cur);
            cur = next;
        }
        cur
    }

    /// Exact value `P_k(0)` as a rational.
    ///
    /// Because the recurrence's `u`-term vanishes at zero, `P_k(0) =
    /// -(k-1)/(k+n-3) · P_{k-2}(0)`: zero for odd `k`, alternating in sign and
    /// strictly decreasing in magnitude over even `k`.
    pub fn at_zero(&self, k: u64) -> Rational {
        if k % 2 == 1 {
            return Rational::from(0);
        }
        let mut v = Rational::from(1);
        let mut j = 2u64;
        while j <= k {
            let (_, b, den) = self.step(j);
            v *= Rational::from((b, den));
            j += 2;
        }
        v
    }
}

/// Streaming evaluator for `P_0(u), P_1(u), P_2(u), …` at fixed `u`.
///
/// One multiply-add pair per step; used for constraint sweeps where `k`
/// ranges into the millions and materializing a vector is wasteful.
pub struct JacobiIter {
    fam: JacobiFamily,
    u: Float,
    prec: Prec,
    k: u64,
    prev: Float, // P_{k-2} after the first two yields
    cur: Float,  // P_{k-1}
}

impl JacobiIter {
    pub fn new(fam: JacobiFamily, u: Float, prec: Prec) -> Self {
        let u = Float::with_val(prec, u);
        JacobiIter {
            fam,
            u,
            prec,
            k: 0,
            prev: Float::new(prec),
            cur: Float::new(prec),
        }
    }
}

impl Iterator for JacobiIter {
    type Item = Float;

    fn next(&mut self) -> Option<Float> {
        let out = match self.k {
            0 => {
                self.cur = hp::float(self.prec, 1);
                self.cur.clone()
            }
            1 => {
                self.prev = std::mem::replace(&mut self.cur, self.u.clone());
                self.cur.clone()
            }
            k => {
                let (au, b, den) = self.fam.step(k);
                // next = (au·u·cur + b·prev) / den
                let mut next = self.u.clone();
                next *= &self.cur;
                next *= au;
                let mut t = self.prev.clone();
                t *= b;
                next += t;
                next /= den;
                self.prev = std::mem::replace(&mut self.cur, next);
                self.cur.clone()
            }
        };
        self.k += 1;
        Some(out)
    }
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> Integer {
    if k > n {
        return Integer::from(0);
    }
    let k = k.min(n - k);
    let mut num = Integer::from(1);
    let mut den = Integer::from(1);
    for i in 0..k {
        num *= Integer::from(n - i);
        den *= Integer::from(i + 1);
    }
    num / den
}

/// Dimension `h_k` of the space of degree-`k` spherical harmonics on
/// `S^{n-1}`: `C(n+k-1, k) − C(n+k-3, k-2)` for `k ≥ 1`, and `h_0 = 1`.
///
/// Requires `n ≥ 3`. The value is validated in tests against the quadrature
/// identity `∬ P_k(x·y)² dω dω = ω_n² / h_k`.
pub fn harmonic_dim(n: u32, k: u64) -> Result<Integer> {
    if n < 3 {
        return Err(SpecialError::DimensionTooSmall { min: 3, got: n });
    }
    if k == 0 {
        return Ok(Integer::from(1));
    }
    let n = n as u64;
    let a = binomial(n + k - 1, k);
    let b = if k >= 2 { binomial(n + k - 3, k - 2) } else { Integer::from(0) };
    Ok(a - b)
}

/// Surface measure of `S^{n-1}` decomposed as `rational · π^p`.
///
/// `ω_n = 2·π^{n/2} / Γ(n/2)`; the half-integer gamma values make the
/// coefficient rational with `p = n/2` for even `n` and `p = (n-1)/2` for odd
/// `n`. The exact decomposition lets certification work with an outward
/// interval for `ω_n` whose only inexactness is the enclosure of `π`.
pub fn sphere_surface_parts(n: u32) -> Result<(Rational, u32)> {
    if n < 2 {
        return Err(SpecialError::DimensionTooSmall { min: 2, got: n });
    }
    if n % 2 == 0 {
        // Γ(n/2) = (n/2 - 1)!
        let m = (n / 2) as u64;
        let mut fact = Integer::from(1);
        for i in 2..m {
            fact *= Integer::from(i);
        }
        Ok((Rational::from((Integer::from(2), fact)), n / 2))
    } else {
        // Γ(n/2) = Γ(m + 1/2) = (2m)!·√π / (4^m·m!)  with  m = (n-1)/2,
        // and π^{n/2} = π^m·√π, so the √π cancels:
        // ω_n = 2·4^m·m! / (2m)! · π^m.
        let m = ((n - 1) / 2) as u64;
        let mut num = Integer::from(2);
        num <<= 2 * m as u32; // 2·4^m
        let mut mfact = Integer::from(1);
        for i in 2..=m {
            mfact *= Integer::from(i);
        }
        num *= mfact;
        let mut den = Integer::from(1);
        for i in 2..=2 * m {
            den *= Integer::from(i);
        }
        Ok((Rational::from((num, den)), (n - 1) / 2))
    }
}

/// Surface measure `ω_n` at the given precision (round to nearest).
pub fn sphere_surface(n: u32, prec: Prec) -> Result<Float> {
    Ok(sphere_surface_ival(n, prec)?.mid())
}

/// Outward interval for `ω_n`.
pub fn sphere_surface_ival(n: u32, prec: Prec) -> Result<Ival> {
    let (coef, p) = sphere_surface_parts(n)?;
    Ok(Ival::pi(prec).pow_ui(p as u64).scale(prec, &coef))
}

/// Outward interval for `R(n) = ∫_0^π sin^{n-3}φ dφ`, `n ≥ 3`.
///
/// Closed form via the recursion `R(3) = π`, `R(4) = 2`,
/// `R(n) = R(n-2)·(n-4)/(n-3)`: a rational times `π^{0 or 1}`.
pub fn sin_power_integral_ival(n: u32, prec: Prec) -> Result<Ival> {
    if n < 3 {
        return Err(SpecialError::DimensionTooSmall { min: 3, got: n });
    }
    let mut coef = Rational::from(1);
    let mut m = n;
    while m > 4 {
        coef *= Rational::from(((m - 4) as i64, (m - 3) as i64));
        m -= 2;
    }
    if m == 3 {
        Ok(Ival::pi(prec).scale(prec, &coef))
    } else {
        coef *= 2;
        Ok(Ival::of_rational(prec, &coef))
    }
}

/// Number of uniform quadrature cells used by [`jacobi_tail_bound`].
pub const TAIL_BOUND_CELLS: usize = 1024;

/// Rigorous upper bound on `sup_{k ≥ k0} |P_k(t)|` on `S^{n-1}`, `n ≥ 3`.
///
/// Uses the integral representation bound
///
/// ```text
/// |P_k(t)| ≤ R(n)⁻¹ ∫_0^π (t² + (1-t²)·cos²φ)^{k/2} · sin^{n-3}φ dφ
/// ```
///
/// whose right-hand side is nonincreasing in `k` (the base is ≤ 1), so the
/// value at `k = k0` bounds the whole tail. The integral is evaluated by an
/// outward-rounded Riemann sum over `cells` uniform cells (`cells ≥ 1024`,
/// even so that `π/2` is a cell boundary): on each half of `[0, π]` both
/// factors are monotone, so the per-cell supremum is attained at a known
/// endpoint. The numerator is rounded up, the denominator `R(n)` down.
pub fn jacobi_tail_bound(n: u32, t: &Float, k0: u64, prec: Prec, cells: usize) -> Result<Float> {
    if n < 3 {
        return Err(SpecialError::DimensionTooSmall { min: 3, got: n });
    }
    let one = hp::float(prec, 1);
    if t.clone().abs() > one {
        return Err(SpecialError::ArgumentOutOfRange);
    }
    let cells = cells.max(TAIL_BOUND_CELLS);
    let cells = cells + (cells % 2); // even: π/2 is a boundary
    let pi_iv = Ival::pi(prec);

    // t² and 1 - t² as outward intervals.
    let t_iv = Ival::point(t.clone());
    let t2 = t_iv.mul(&t_iv);
    let one_minus_t2 = Ival::point(one.clone()).sub(&t2);

    // φ_i = π·i/cells as intervals; cos is decreasing on [0, π].
    let cos_at = |i: usize| -> Ival {
        let frac = Rational::from((i as u64, cells as u64));
        let phi = pi_iv.scale(prec, &frac);
        let mut lo = phi.upper().clone();
        lo.cos_round(Round::Down);
        let mut hi = phi.lower().clone();
        hi.cos_round(Round::Up);
        Ival::new(lo, hi)
    };
    let sin_at = |i: usize| -> Ival {
        let frac = Rational::from((i as u64, cells as u64));
        let phi = pi_iv.scale(prec, &frac);
        // sin is increasing on [0, π/2], decreasing on [π/2, π]; endpoints of
        // the evaluation are always within one half, and we only need an
        // enclosure at a point, so take min/max of both directed evaluations.
        let mut a = phi.lower().clone();
        a.sin_round(Round::Down);
        let mut b = phi.upper().clone();
        b.sin_round(Round::Up);
        // The φ interval here is a few ulps wide; sin over it is contained in
        // the hull of the two directed endpoint values capped at 1 (the only
        // interior extremum of sin on [0, π] is the maximum 1 at π/2).
        let lo = if a <= b { a.clone() } else { b.clone() };
        let mut hi = if a <= b { b } else { a };
        if hi > one {
            hi = one.clone();
        }
        let lo = if lo < 0 { Float::new(prec) } else { lo };
        Ival::new(lo, hi)
    };

    // Supremum of cos²φ on cell [i, i+1]: attained at the endpoint nearer 0
    // or π (larger |cos|).
    let half = cells / 2;
    let mut num_hi = Float::new(prec); // upper Riemann sum accumulator
    let width = {
        // π/cells, upper endpoint
        let frac = Rational::from((1u64, cells as u64));
        pi_iv.scale(prec, &frac)
    };
    for i in 0..cells {
        let cos_end = if i < half { cos_at(i) } else { cos_at(i + 1) };
        let cos2_sup = {
            let sq = cos_end.mul(&cos_end);
            sq.upper().clone()
        };
        // base = t² + (1-t²)·cos² at the maximizing endpoint, ≤ 1
        let mut base = one_minus_t2
            .mul(&Ival::new(cos2_sup.clone(), cos2_sup))
            .add(&t2)
            .upper()
            .clone();
        if base > one {
            base = one.clone();
        }
        if base < 0 {
            base = Float::new(prec);
        }
        // base^{k0/2}: for odd k0 use sqrt(base)^{k0}
        let base_iv = if k0 % 2 == 0 {
            Ival::new(base.clone(), base).pow_ui(k0 / 2)
        } else {
            Ival::new(base.clone(), base).sqrt().pow_ui(k0)
        };
        let mut cell = base_iv.upper().clone();
        if n > 3 {
            let sin_end = if i < half { sin_at(i + 1) } else { sin_at(i) };
            let sp = sin_end.pow_ui((n - 3) as u64);
            cell.mul_assign_round(sp.upper(), Round::Up);
        }
        cell.mul_assign_round(width.upper(), Round::Up);
        num_hi.add_assign_round(&cell, Round::Up);
    }

    let denom = sin_power_integral_ival(n, prec)?;
    let mut bound = num_hi;
    bound.div_assign_round(denom.lower(), Round::Up);
    Ok(bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hp::float;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Oracle: Legendre polynomials via the exact closed form
    /// `P_k(u) = 2^{-k} Σ_j C(k,j)² (u-1)^{k-j} (u+1)^j`,
    /// expanded symbolically over the rationals.
    fn legendre_coeffs_oracle(k: u64) -> Vec<Rational> {
        // (u-1)^a and (u+1)^b by binomial expansion, then convolution.
        let pow = |sign: i64, e: u64| -> Vec<Rational> {
            let mut c = vec![Rational::from(0); e as usize + 1];
            for i in 0..=e {
                let mut term = Rational::from(binomial(e, i));
                if sign < 0 && (e - i) % 2 == 1 {
                    term = -term;
                }
                c[i as usize] = term;
            }
            c
        };
        let mut acc = vec![Rational::from(0); k as usize + 1];
        for j in 0..=k {
            let b2 = Rational::from(binomial(k, j)) * Rational::from(binomial(k, j));
            let a = pow(-1, k - j);
            let b = pow(1, j);
            for (ia, ca) in a.iter().enumerate() {
                if *ca == 0 {
                    continue;
                }
                for (ib, cb) in b.iter().enumerate() {
                    if *cb == 0 {
                        continue;
                    }
                    acc[ia + ib] += b2.clone() * ca * cb;
                }
            }
        }
        let scale = Rational::from((Integer::from(1), Integer::from(1) << k as u32));
        for c in &mut acc {
            *c *= scale.clone();
        }
        acc
    }

    #[test]
    fn legendre_closed_form_matches_recurrence() {
        let fam = JacobiFamily::new(3).unwrap();
        for k in 0..=10u64 {
            let ours = fam.coeffs(k);
            let oracle = legendre_coeffs_oracle(k);
            assert_eq!(ours, oracle, "coefficient mismatch at k={k}");
        }
    }

    #[test]
    fn values_at_zero_and_one() {
        // P_2(0) = -1/2 on S², -1/3 on S³; P_k(1) = 1 everywhere.
        let f3 = JacobiFamily::new(3).unwrap();
        assert_eq!(f3.at_zero(2), Rational::from((-1, 2)));
        let f4 = JacobiFamily::new(4).unwrap();
        assert_eq!(f4.at_zero(2), Rational::from((-1, 3)));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.gen_range(2..=12);
            let k = rng.gen_range(0..=40u64);
            let fam = JacobiFamily::new(n).unwrap();
            let v = fam.eval(k, &float(192, 1), 192);
            assert!((v - 1u32).abs() < float(192, 1e-50), "P_k(1) != 1 at n={n}, k={k}");
        }
    }

    #[test]
    fn at_zero_matches_recurrence_eval() {
        for n in [3u32, 4, 5, 8] {
            let fam = JacobiFamily::new(n).unwrap();
            for k in 0..=30u64 {
                let exact = fam.at_zero(k);
                let num = fam.eval(k, &Float::new(192), 192);
                let diff = (num - hp::float_of_rational(192, &exact, Round::Nearest)).abs();
                assert!(diff < float(192, 1e-40));
            }
        }
    }

    #[test]
    fn chebyshev_case_n2() {
        // n = 2 gives Chebyshev T_k: T_4(u) = 8u⁴ - 8u² + 1.
        let fam = JacobiFamily::new(2).unwrap();
        let c = fam.coeffs(4);
        let expect: Vec<Rational> = [1, 0, -8, 0, 8].iter().map(|&v| Rational::from(v)).collect();
        assert_eq!(c, expect);
    }

    #[test]
    fn dimension_precondition() {
        assert_eq!(
            JacobiFamily::new(1).unwrap_err(),
            SpecialError::DimensionTooSmall { min: 2, got: 1 }
        );
        assert!(harmonic_dim(2, 3).is_err());
    }

    #[test]
    fn recurrence_is_stable_at_large_degree() {
        // f64 and 256-bit evaluations agree to 1e-8 relative at k = 100000.
        for (n, u) in [(3u32, 0.3f64), (8, -0.77)] {
            let fam = JacobiFamily::new(n).unwrap();
            let k = 100_000u64;
            // f64 recurrence
            let (mut prev, mut cur) = (1f64, u);
            for j in 2..=k {
                let (au, b, den) = fam.step(j);
                let next = (au as f64 * u * cur + b as f64 * prev) / den as f64;
                prev = cur;
                cur = next;
            }
            let hi = fam.eval(k, &float(256, u), 256).to_f64();
            let denom = hi.abs().max(1e-300);
            assert!(
                ((cur - hi) / denom).abs() < 1e-8,
                "instability at n={n}: f64={cur:e} vs 256-bit={hi:e}"
            );
        }
    }

    #[test]
    fn harmonic_dims_match_known_values() {
        assert_eq!(harmonic_dim(3, 4).unwrap(), Integer::from(9));
        assert_eq!(harmonic_dim(4, 2).unwrap(), Integer::from(9));
        assert_eq!(harmonic_dim(3, 0).unwrap(), Integer::from(1));
        // On S²: h_k = 2k + 1.
        for k in 1..=20u64 {
            assert_eq!(harmonic_dim(3, k).unwrap(), Integer::from(2 * k + 1));
        }
    }

    /// Composite-Simpson quadrature oracle for smooth integrands on [0, π].
    fn simpson(f: impl Fn(f64) -> f64, cells: usize) -> f64 {
        let h = std::f64::consts::PI / cells as f64;
        let mut acc = 0.0;
        for i in 0..cells {
            let a = i as f64 * h;
            acc += (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h)) * h / 6.0;
        }
        acc
    }

    fn jacobi_f64(n: u32, k: u64, u: f64) -> f64 {
        let fam = JacobiFamily::new(n).unwrap();
        let (mut prev, mut cur) = (1f64, u);
        if k == 0 {
            return 1.0;
        }
        for j in 2..=k {
            let (au, b, den) = fam.step(j);
            let next = (au as f64 * u * cur + b as f64 * prev) / den as f64;
            prev = cur;
            cur = next;
        }
        cur
    }

    #[test]
    fn surface_measure_known_and_quadrature() {
        // ω_3 = 4π, ω_4 = 2π².
        let w3 = sphere_surface(3, 128).unwrap().to_f64();
        assert!((w3 - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        let w4 = sphere_surface(4, 128).unwrap().to_f64();
        assert!((w4 - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
        // Quadrature oracle: ω_n = ω_{n-1} ∫_0^π sin^{n-2}θ dθ, seeded at ω_2 = 2π.
        let mut w = 2.0 * std::f64::consts::PI;
        for n in 3..=9u32 {
            w *= simpson(|t| t.sin().powi(n as i32 - 2), 4096);
            let ours = sphere_surface(n, 128).unwrap().to_f64();
            assert!(
                ((w - ours) / w).abs() < 1e-9,
                "surface measure mismatch at n={n}: quad={w} ours={ours}"
            );
        }
    }

    #[test]
    fn harmonic_dim_quadrature_gate() {
        // ∬ P_k(x·y)² dω dω = ω_n²/h_k reduces to
        // ω_n·ω_{n-1}·∫_0^π P_k(cosθ)² sin^{n-2}θ dθ = ω_n²/h_k.
        for n in [3u32, 4, 5, 6, 8] {
            let wn = sphere_surface(n, 128).unwrap().to_f64();
            let wn1 = sphere_surface(n - 1, 128).unwrap().to_f64();
            for k in 0..=6u64 {
                let integral = simpson(
                    |t| jacobi_f64(n, k, t.cos()).powi(2) * t.sin().powi(n as i32 - 2),
                    4096,
                );
                let h_quad = wn / (wn1 * integral);
                let h = harmonic_dim(n, k).unwrap().to_f64();
                assert!(
                    ((h_quad - h) / h).abs() < 1e-6,
                    "harmonic_dim gate failed at n={n}, k={k}: quad={h_quad} formula={h}"
                );
            }
        }
    }

    #[test]
    fn tail_bound_at_k0_zero_is_one() {
        // The true value of the integral ratio at k0 = 0 is exactly 1; the
        // computed upper bound adds the upper-Riemann-sum slack, which is
        // zero for n = 3 (constant integrand) and O(1/cells) otherwise.
        for n in [3u32, 4, 7] {
            let b = jacobi_tail_bound(n, &Float::new(256), 0, 256, 1024).unwrap();
            let one = float(256, 1);
            assert!(b >= one, "upper bound must be ≥ 1");
            let slack = if n == 3 { 1e-60 } else { 8.0 / 1024.0 };
            assert!(b.clone() - one < float(256, slack), "loose at k0=0, n={n}: {b}");
        }
    }

    #[test]
    fn tail_bound_soundness_randomized() {
        // 1000 random (n, t, k0, k ≥ k0): |P_k(t)| ≤ bound(n, t, k0).
        let mut rng = ChaCha8Rng::seed_from_u64(20260817);
        for trial in 0..1000 {
            let n = rng.gen_range(3..=8u32);
            let t: f64 = rng.gen_range(-0.99..0.99);
            let k0 = rng.gen_range(0..1500u64);
            let k = k0 + rng.gen_range(0..400u64);
            let b = jacobi_tail_bound(n, &float(192, t), k0, 192, 1024)
                .unwrap()
                .to_f64();
            let p = jacobi_f64(n, k, t).abs();
            assert!(
                p <= b + 1e-13,
                "tail bound violated at trial {trial}: n={n} t={t} k0={k0} k={k}: |P|={p} bound={b}"
            );
        }
    }

    #[test]
    fn tail_bound_monotone_on_doubling_grid() {
        for n in [3u32, 5] {
            let t = float(192, 0.4);
            let mut last = f64::INFINITY;
            for j in 0..=10 {
                let k0 = 1u64 << j;
                let b = jacobi_tail_bound(n, &t, k0, 192, 1024).unwrap().to_f64();
                assert!(b <= last + 1e-15, "tail bound not monotone at n={n}, k0={k0}");
                last = b;
            }
        }
    }

    #[test]
    fn tail_bound_decays_at_zero_argument() {
        // At t = 0 the bound decays like k^{-(n-2)/2}; check the n=3 scale
        // against the known Legendre magnitude |P_k(0)| ≈ sqrt(2/(πk)).
        let b = jacobi_tail_bound(3, &Float::new(256), 10_000, 256, 2048)
            .unwrap()
            .to_f64();
        let expect = (2.0 / (std::f64::consts::PI * 10_000.0)).sqrt();
        assert!(b >= expect, "bound must dominate the true magnitude");
        assert!(b <= 3.0 * expect, "bound should be within a small factor: {b} vs {expect}");
    }
}
