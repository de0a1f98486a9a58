//! Fixed-point rendering of high-precision values under the crate's
//! printing contract: half-to-even for ordinary quantities, directed
//! rounding for one-sided ones (up for upper bounds, down for values
//! quoted as lower bounds).

use rug::float::Round;
use rug::ops::{MulAssignRound, Pow};
use rug::{Float, Integer};

/// Decimals in human-readable tables.
pub const TABLE_DECIMALS: usize = 6;
/// Decimals in CSV fields.
pub const CSV_DECIMALS: usize = 12;

fn scaled_integer(x: &Float, decimals: usize, round: Round) -> Integer {
    let prec = x.prec().max(64) + 64;
    let mut s = Float::with_val(prec, x);
    let scale = Float::with_val(prec, Integer::from(10).pow(decimals as u32));
    s.mul_assign_round(&scale, round);
    let (int, _) = s
        .to_integer_round(round)
        .expect("finite value required for fixed-point formatting");
    int
}

fn place_point(int: Integer, decimals: usize) -> String {
    let neg = int < 0;
    let mut digits = Integer::from(int.abs_ref()).to_string();
    if digits.len() <= decimals {
        digits = format!("{}{digits}", "0".repeat(decimals + 1 - digits.len()));
    }
    let split = digits.len() - decimals;
    let sign = if neg { "-" } else { "" };
    if decimals == 0 {
        format!("{sign}{digits}")
    } else {
        format!("{sign}{}.{}", &digits[..split], &digits[split..])
    }
}

/// `x` with `decimals` fixed decimals, ties to even.
pub fn fixed_even(x: &Float, decimals: usize) -> String {
    place_point(scaled_integer(x, decimals, Round::Nearest), decimals)
}

/// `x` rounded up (toward `+∞`) at `decimals` decimals; the printed value
/// is never below `x`, so it remains a valid upper bound.
pub fn fixed_up(x: &Float, decimals: usize) -> String {
    place_point(scaled_integer(x, decimals, Round::Up), decimals)
}

/// `x` rounded down (toward `-∞`) at `decimals` decimals; the printed
/// value is never above `x`, so it remains a valid lower bound.
pub fn fixed_down(x: &Float, decimals: usize) -> String {
    place_point(scaled_integer(x, decimals, Round::Down), decimals)
}
