//! Exact rational arithmetic helpers.
//!
//! Solver queries must carry constants that are exactly the numbers the rest
//! of the toolkit computes with: binary64 weights are converted to rationals
//! with power-of-two denominators (no decimal rounding anywhere), while
//! human-entered bounds like `0.1` or `0.05` are parsed from their decimal
//! spelling so they enter the solver as `1/10` and `1/20`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational number used throughout the SMT side.
pub type Rat = BigRational;

/// Convert a binary64 value to the rational it denotes, exactly.
///
/// The denominator is always a power of two; there is no rounding.
pub fn rat_from_f64(x: f64) -> Result<Rat> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("rational conversion of {x}")));
    }
    Ok(BigRational::from_float(x).expect("finite f64 converts exactly"))
}

/// Parse a decimal string ("0.05", "-1.25", "3", "15/8") to an exact rational.
pub fn rat_from_decimal(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a decimal or rational literal: {s:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rat::new(p, q));
    }
    let (sign, digits) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    if !all.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let numer: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().map_err(|_| bad())? };
    let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
    Ok(Rat::new(numer * sign, denom))
}

/// Exact rational from an integer.
pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Exact rational p/q from integers.
pub fn rat(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

/// Render a rational as an SMT-LIB2 Real term.
///
/// Nonnegative integers render as numerals (`3`), fractions as `(/ p q)`,
/// negatives wrapped in `(- ...)`.
pub fn rat_to_smt(r: &Rat) -> String {
    let mag = r.abs();
    let body = if mag.denom().is_one() {
        format!("{}", mag.numer())
    } else {
        format!("(/ {} {})", mag.numer(), mag.denom())
    };
    if r.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

/// Convert a rational to the nearest binary64, with round-half-to-even.
///
/// `num`'s own `to_f64` divides two separately rounded floats, which is wrong
/// for large numerators and denominators such as the values an SMT solver can
/// return. This routine rounds once, at the right bit. Values smaller in
/// magnitude than roughly 2^-1000 may double-round in the subnormal range;
/// nothing in this toolkit produces them.
pub fn rat_to_f64(r: &Rat) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let neg = r.is_negative();
    let a = r.numer().magnitude().clone();
    let b = r.denom().magnitude().clone();

    // e = floor(log2(a/b)): start from the bit-length estimate, then correct.
    let ge_pow2 = |e: i64| -> bool {
        // a/b >= 2^e ?
        if e >= 0 {
            a >= (&b << e as u64)
        } else {
            (&a << (-e) as u64) >= b
        }
    };
    let mut e = a.bits() as i64 - b.bits() as i64;
    if ge_pow2(e + 1) {
        e += 1;
    } else if !ge_pow2(e) {
        e -= 1;
    }
    debug_assert!(ge_pow2(e) && !ge_pow2(e + 1));

    // Mantissa m = round(a/b * 2^(52-e)), so that m is in [2^52, 2^53].
    let shift = 52 - e;
    let (num, den) = if shift >= 0 {
        (&a << shift as u64, b.clone())
    } else {
        (a.clone(), &b << (-shift) as u64)
    };
    let (q, rem) = num_integer_div_rem(&num, &den);
    let mut m = q;
    let twice = &rem << 1u32;
    if twice > den || (twice == den && m.bit(0)) {
        m += 1u32;
    }
    let mut m64 = m.to_u64().expect("mantissa fits in 64 bits");
    let mut e2 = e;
    if m64 == (1u64 << 53) {
        m64 >>= 1;
        e2 += 1;
    }
    let exp = e2 - 52;
    let mag = if (-1022..=1023).contains(&exp) {
        (m64 as f64) * f64::powi(2.0, exp as i32)
    } else if exp > 1023 {
        f64::INFINITY
    } else {
        // Two-step scaling into the subnormal range.
        (m64 as f64) * f64::powi(2.0, -1022) * f64::powi(2.0, (exp + 1022).max(-1022) as i32)
    };
    if neg {
        -mag
    } else {
        mag
    }
}

fn num_integer_div_rem(a: &BigUint, b: &BigUint) -> (BigUint, BigUint) {
    (a / b, a % b)
}
