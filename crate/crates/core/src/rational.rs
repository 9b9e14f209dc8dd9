//! Exact rational arithmetic helpers.
//!
//! All equation values, slot bindings and solver results are `BigRational`;
//! floats appear only at final answer reporting.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Build a rational from an integer.
pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Build a rational from a numerator/denominator pair.
///
/// Panics if `den` is zero.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parse a decimal digit string (`"30"`, `"3.5"`, `"0.75"`) into an exact rational.
///
/// Returns `None` for anything that is not `digits` or `digits.digits`.
pub fn parse_decimal(s: &str) -> Option<Rational> {
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = digits.parse().ok()?;
    let den = BigInt::from(10u32).pow(frac_part.len() as u32);
    Some(Rational::new(num, den))
}

/// Parse `"a/b"`, a decimal, or a plain integer into an exact rational.
pub fn parse_number(s: &str) -> Option<Rational> {
    if let Some((num, den)) = s.split_once('/') {
        let n = parse_decimal(num)?;
        let d = parse_decimal(den)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    parse_decimal(s)
}

/// Convert an `f64` to an exact rational via its shortest round-trip decimal
/// rendering, so `0.1` becomes exactly `1/10` rather than its binary expansion.
pub fn from_f64(v: f64) -> Option<Rational> {
    if !v.is_finite() {
        return None;
    }
    let s = format!("{v}");
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.as_str()),
    };
    // Scientific notation falls back to the exact binary value.
    let r = if body.contains(['e', 'E']) {
        Rational::from_float(v.abs())?
    } else {
        parse_decimal(body)?
    };
    Some(if neg { -r } else { r })
}

pub fn to_f64(r: &Rational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// True iff the rational has a terminating decimal expansion
/// (denominator of the reduced form is 2^a * 5^b).
pub fn is_terminating_decimal(r: &Rational) -> bool {
    let mut d = r.denom().abs();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    for p in [two, five] {
        while (&d % &p).is_zero() {
            d /= &p;
        }
    }
    d.is_one()
}

/// Render a non-negative terminating-decimal rational as its exact decimal
/// string with no trailing zeros (`1/2` -> `"0.5"`, `30` -> `"30"`).
///
/// Panics if the value is negative or has no terminating expansion; callers
/// uphold that invariant (see `Expr::literal`).
pub fn format_decimal(r: &Rational) -> String {
    assert!(!r.is_negative(), "format_decimal: negative value");
    assert!(is_terminating_decimal(r), "format_decimal: non-terminating value");
    if r.is_integer() {
        return r.numer().to_string();
    }
    // Scale the denominator up to a power of ten.
    let mut d = r.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    let k = twos.max(fives);
    let scale = BigInt::from(10u32).pow(k) / r.denom();
    let scaled = (r.numer() * scale).to_string();
    let digits = if scaled.len() <= k as usize {
        format!("{}{}", "0".repeat(k as usize - scaled.len() + 1), scaled)
    } else {
        scaled
    };
    let split = digits.len() - k as usize;
    let (int_part, frac_part) = digits.split_at(split);
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.is_empty() {
        int_part.to_string()
    } else {
        format!("{int_part}.{frac_part}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parse_is_exact() {
        assert_eq!(parse_decimal("3.5").unwrap(), ratio(7, 2));
        assert_eq!(parse_decimal("0.75").unwrap(), ratio(3, 4));
        assert_eq!(parse_decimal("30").unwrap(), rat(30));
        assert!(parse_decimal("3.5.1").is_none());
        assert!(parse_decimal("").is_none());
    }

    #[test]
    fn number_parse_handles_fractions() {
        assert_eq!(parse_number("3/4").unwrap(), ratio(3, 4));
        assert!(parse_number("3/0").is_none());
    }

    #[test]
    fn f64_round_trips_through_decimal() {
        assert_eq!(from_f64(0.1).unwrap(), ratio(1, 10));
        assert_eq!(from_f64(-2.5).unwrap(), ratio(-5, 2));
        assert_eq!(from_f64(17.0).unwrap(), rat(17));
    }

    #[test]
    fn decimal_formatting() {
        assert_eq!(format_decimal(&ratio(1, 2)), "0.5");
        assert_eq!(format_decimal(&ratio(3, 4)), "0.75");
        assert_eq!(format_decimal(&ratio(7, 2)), "3.5");
        assert_eq!(format_decimal(&rat(30)), "30");
        assert_eq!(format_decimal(&ratio(1, 1000)), "0.001");
        assert_eq!(format_decimal(&Rational::zero()), "0");
    }

    #[test]
    fn terminating_detection() {
        assert!(is_terminating_decimal(&ratio(1, 8)));
        assert!(is_terminating_decimal(&ratio(7, 50)));
        assert!(!is_terminating_decimal(&ratio(1, 3)));
    }
}
