//! High-precision scalars and outward-rounded interval arithmetic.
//!
//! Everything rigorous in this crate (tail bounds, residual norms, eigenvalue
//! certificates, the final bound repair) is computed through [`Ival`], a closed
//! interval with MPFR endpoints rounded outward on every operation. Plain
//! [`Float`] values are used where rigor is not required (solver iterates,
//! heuristics) or where forward error is separately argued (recurrence sweeps).
//!
//! Precision is always an explicit bits parameter; nothing in this module
//! consults global state.

use rug::float::Round;
use rug::ops::{AddAssignRound, AssignRound, DivAssignRound, MulAssignRound, SubAssignRound};
use rug::{Float, Rational};

/// Working precision in bits.
pub type Prec = u32;

/// Creates a [`Float`] of the given precision from anything rug can assign.
pub fn float<T>(prec: Prec, src: T) -> Float
where
    Float: rug::Assign<T>,
{
    Float::with_val(prec, src)
}

/// Converts a rational to a float with an explicit rounding direction.
pub fn float_of_rational(prec: Prec, r: &Rational, round: Round) -> Float {
    let mut f = Float::new(prec);
    f.assign_round(r, round);
    f
}

/// Parses a decimal string at the given precision (round to nearest).
///
/// Returns `None` when the string is not a valid decimal/scientific literal.
pub fn parse_decimal(prec: Prec, s: &str) -> Option<Float> {
    Float::parse(s).ok().map(|p| Float::with_val(prec, p))
}

/// π at the given precision.
pub fn pi(prec: Prec) -> Float {
    Float::with_val(prec, rug::float::Constant::Pi)
}

/// A closed interval `[lo, hi]` with outward-rounded endpoint arithmetic.
///
/// Invariant: `lo ≤ hi`, both finite, both carrying the same precision.
/// Every arithmetic operation rounds the lower endpoint down and the upper
/// endpoint up, so the result interval always contains the exact result of
/// applying the operation to any members of the operand intervals.
#[derive(Clone, Debug)]
pub struct Ival {
    lo: Float,
    hi: Float,
}

impl Ival {
    /// The degenerate interval `[x, x]`.
    pub fn point(x: Float) -> Self {
        let hi = x.clone();
        Ival { lo: x, hi }
    }

    /// The exact zero interval at the given precision.
    pub fn zero(prec: Prec) -> Self {
        Ival::point(Float::new(prec))
    }

    /// Interval from explicit endpoints. Panics if `lo > hi` or not finite.
    pub fn new(lo: Float, hi: Float) -> Self {
        assert!(lo.is_finite() && hi.is_finite() && lo <= hi, "invalid interval endpoints");
        Ival { lo, hi }
    }

    /// Tight outward enclosure of a rational at the given precision.
    pub fn of_rational(prec: Prec, r: &Rational) -> Self {
        Ival {
            lo: float_of_rational(prec, r, Round::Down),
            hi: float_of_rational(prec, r, Round::Up),
        }
    }

    /// Enclosure of a small integer (exact at any practical precision).
    pub fn of_i64(prec: Prec, v: i64) -> Self {
        Ival::point(float(prec, v))
    }

    /// π as an outward interval.
    pub fn pi(prec: Prec) -> Self {
        let mut lo = Float::new(prec);
        lo.assign_round(rug::float::Constant::Pi, Round::Down);
        let mut hi = Float::new(prec);
        hi.assign_round(rug::float::Constant::Pi, Round::Up);
        Ival { lo, hi }
    }

    pub fn lower(&self) -> &Float {
        &self.lo
    }

    pub fn upper(&self) -> &Float {
        &self.hi
    }

    /// Midpoint (round to nearest); convenience for reporting only.
    pub fn mid(&self) -> Float {
        let mut m = self.lo.clone();
        m.add_assign_round(&self.hi, Round::Nearest);
        m.mul_assign_round(0.5, Round::Nearest);
        m
    }

    /// Supremum of |x| over the interval.
    pub fn mag(&self) -> Float {
        let a = self.lo.clone().abs();
        let b = self.hi.clone().abs();
        if a > b {
            a
        } else {
            b
        }
    }

    /// Width `hi − lo`, rounded up.
    pub fn width(&self) -> Float {
        let mut w = self.hi.clone();
        w.sub_assign_round(&self.lo, Round::Up);
        w
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0 && self.hi >= 0
    }

    /// Certainly greater than or equal to `c`.
    pub fn ge(&self, c: &Float) -> bool {
        self.lo >= *c
    }

    /// Certainly less than or equal to `c`.
    pub fn le(&self, c: &Float) -> bool {
        self.hi <= *c
    }

    pub fn neg(&self) -> Self {
        Ival {
            lo: -self.hi.clone(),
            hi: -self.lo.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut lo = self.lo.clone();
        lo.add_assign_round(&other.lo, Round::Down);
        let mut hi = self.hi.clone();
        hi.add_assign_round(&other.hi, Round::Up);
        Ival { lo, hi }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut lo = self.lo.clone();
        lo.sub_assign_round(&other.hi, Round::Down);
        let mut hi = self.hi.clone();
        hi.sub_assign_round(&other.lo, Round::Up);
        Ival { lo, hi }
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.lo.add_assign_round(&other.lo, Round::Down);
        self.hi.add_assign_round(&other.hi, Round::Up);
    }

    pub fn sub_assign(&mut self, other: &Self) {
        self.lo.sub_assign_round(&other.hi, Round::Down);
        self.hi.sub_assign_round(&other.lo, Round::Up);
    }

    fn corner(a: &Float, b: &Float, round: Round) -> Float {
        let mut p = a.clone();
        p.mul_assign_round(b, round);
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let cands = [
            (&self.lo, &other.lo),
            (&self.lo, &other.hi),
            (&self.hi, &other.lo),
            (&self.hi, &other.hi),
        ];
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (a, b) in cands {
            let d = Self::corner(a, b, Round::Down);
            let u = Self::corner(a, b, Round::Up);
            lo = Some(match lo {
                Some(cur) if cur <= d => cur,
                _ => d,
            });
            hi = Some(match hi {
                Some(cur) if cur >= u => cur,
                _ => u,
            });
        }
        Ival {
            lo: lo.unwrap(),
            hi: hi.unwrap(),
        }
    }

    /// Division by a sign-definite interval. Panics if `other` contains zero.
    pub fn div(&self, other: &Self) -> Self {
        assert!(!other.contains_zero(), "interval division by interval containing zero");
        let cands = [
            (&self.lo, &other.lo),
            (&self.lo, &other.hi),
            (&self.hi, &other.lo),
            (&self.hi, &other.hi),
        ];
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (a, b) in cands {
            let mut d = a.clone();
            d.div_assign_round(b, Round::Down);
            let mut u = a.clone();
            u.div_assign_round(b, Round::Up);
            lo = Some(match lo {
                Some(cur) if cur <= d => cur,
                _ => d,
            });
            hi = Some(match hi {
                Some(cur) if cur >= u => cur,
                _ => u,
            });
        }
        Ival {
            lo: lo.unwrap(),
            hi: hi.unwrap(),
        }
    }

    /// Square root; the interval must be nonnegative up to outward clamping
    /// (a slightly negative `lo` from rounding is clamped to zero).
    pub fn sqrt(&self) -> Self {
        assert!(self.hi >= 0, "interval sqrt of negative interval");
        let mut lo = self.lo.clone();
        if lo < 0 {
            lo = Float::new(lo.prec());
        }
        lo.sqrt_round(Round::Down);
        let mut hi = self.hi.clone();
        hi.sqrt_round(Round::Up);
        Ival { lo, hi }
    }

    /// Integer power by repeated interval multiplication (sound for any sign).
    pub fn pow_ui(&self, mut e: u64) -> Self {
        let prec = self.lo.prec();
        let mut acc = Ival::point(float(prec, 1));
        if e == 0 {
            return acc;
        }
        let mut base = self.clone();
        loop {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.mul(&base);
        }
        acc
    }

    /// Outward scale by an exact rational.
    pub fn scale(&self, prec: Prec, r: &Rational) -> Self {
        self.mul(&Ival::of_rational(prec, r))
    }
}

/// Canonical scientific-notation rendering used by every report and exporter:
/// `-d.ddd…e±x` with exactly `sig` significant digits.
///
/// `Round::Nearest` is MPFR round-half-even; `Round::Up`/`Round::Down` give the
/// conservative directed renderings used for certified quantities.
pub fn fmt_sci(x: &Float, sig: usize, round: Round) -> String {
    assert!(sig >= 1);
    if x.is_zero() {
        let mut s = String::from("0.");
        for _ in 1..sig {
            s.push('0');
        }
        s.push_str("e0");
        return s;
    }
    assert!(x.is_finite(), "cannot render non-finite value");
    // MPFR's directed rounding in to_string_radix_round is toward -inf/+inf;
    // for magnitude-conservative rendering of certified bounds the caller
    // passes Up for upper bounds and Down for lower bounds, which is exactly
    // toward +inf/-inf as desired.
    let raw = x.to_string_radix_round(10, Some(sig), round);
    // Normalize "12345.678", "0.0012", "1.2e-7" into d.ddd…e±x.
    let (neg, body) = match raw.strip_prefix('-') {
        Some(b) => (true, b.to_string()),
        None => (false, raw),
    };
    let (mant, mut exp) = match body.split_once(['e', 'E']) {
        Some((m, e)) => (m.to_string(), e.parse::<i64>().expect("exponent")),
        None => (body, 0),
    };
    let (int_part, frac_part) = match mant.split_once('.') {
        Some((i, f)) => (i.to_string(), f.to_string()),
        None => (mant, String::new()),
    };
    let mut digits: String = int_part.chars().chain(frac_part.chars()).collect();
    // Decimal exponent of the leading digit.
    exp += int_part.len() as i64 - 1;
    // Strip leading zeros (values like 0.0012 render with int part "0").
    while digits.len() > 1 && digits.starts_with('0') {
        digits.remove(0);
        exp -= 1;
    }
    digits.truncate(sig);
    while digits.len() < sig {
        digits.push('0');
    }
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push(digits.as_bytes()[0] as char);
    out.push('.');
    out.push_str(&digits[1..]);
    out.push('e');
    out.push_str(&exp.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::ops::Pow;

    #[test]
    fn interval_add_mul_enclose() {
        let prec = 128;
        let a = Ival::of_rational(prec, &Rational::from((1, 3)));
        let b = Ival::of_rational(prec, &Rational::from((1, 7)));
        let s = a.add(&b);
        // 1/3 + 1/7 = 10/21
        let exact = Rational::from((10, 21));
        assert!(float_of_rational(prec + 32, &exact, Round::Down) >= *s.lower());
        assert!(float_of_rational(prec + 32, &exact, Round::Up) <= *s.upper());
        assert!(s.lower() < s.upper());

        let p = a.mul(&b);
        let exact = Rational::from((1, 21));
        assert!(float_of_rational(prec + 32, &exact, Round::Down) >= *p.lower());
        assert!(float_of_rational(prec + 32, &exact, Round::Up) <= *p.upper());
    }

    #[test]
    fn interval_mul_signs() {
        let prec = 64;
        let a = Ival::new(float(prec, -2), float(prec, 3));
        let b = Ival::new(float(prec, -5), float(prec, 4));
        let p = a.mul(&b);
        // candidates: 10, -8, -15, 12 → [-15, 12]
        assert_eq!(p.lower().to_f64(), -15.0);
        assert_eq!(p.upper().to_f64(), 12.0);
    }

    #[test]
    fn interval_pow_and_sqrt() {
        let prec = 128;
        let x = Ival::of_rational(prec, &Rational::from((3, 2)));
        let p = x.pow_ui(10);
        let exact = Rational::from((3, 2)).pow(10);
        assert!(float_of_rational(prec + 32, &exact, Round::Down) >= *p.lower());
        assert!(float_of_rational(prec + 32, &exact, Round::Up) <= *p.upper());

        let two = Ival::of_i64(prec, 2);
        let r = two.sqrt();
        let prod = r.mul(&r);
        assert!(*prod.lower() <= 2 && *prod.upper() >= 2);
    }

    #[test]
    fn interval_div_encloses() {
        let prec = 96;
        let a = Ival::new(float(prec, 1), float(prec, 2));
        let b = Ival::new(float(prec, 4), float(prec, 5));
        let q = a.div(&b);
        assert!(q.lower().to_f64() <= 0.2 && q.upper().to_f64() >= 0.5);
    }

    #[test]
    #[should_panic]
    fn interval_div_by_zero_panics() {
        let prec = 64;
        let a = Ival::of_i64(prec, 1);
        let b = Ival::new(float(prec, -1), float(prec, 1));
        let _ = a.div(&b);
    }

    #[test]
    fn fmt_sci_canonical() {
        let prec = 128;
        assert_eq!(fmt_sci(&float(prec, 0.5), 6, Round::Nearest), "5.00000e-1");
        assert_eq!(fmt_sci(&float(prec, -12345.678), 8, Round::Nearest), "-1.2345678e4");
        assert_eq!(fmt_sci(&Float::new(prec), 4, Round::Nearest), "0.000e0");
        // Directed rendering is conservative: up ≥ down on positive values.
        let x = float(prec, 1) / float(prec, 3);
        let up = fmt_sci(&x, 10, Round::Up);
        let dn = fmt_sci(&x, 10, Round::Down);
        assert_eq!(up, "3.333333334e-1");
        assert_eq!(dn, "3.333333333e-1");
    }

    #[test]
    fn fmt_sci_roundtrip_is_stable() {
        // fmt → parse → fmt is the identity on fmt output (precision ≫ digits).
        let prec = 256;
        let x = pi(prec) / float(prec, 773);
        let s1 = fmt_sci(&x, 40, Round::Nearest);
        let y = parse_decimal(prec, &s1).unwrap();
        let s2 = fmt_sci(&y, 40, Round::Nearest);
        assert_eq!(s1, s2);
    }
}
