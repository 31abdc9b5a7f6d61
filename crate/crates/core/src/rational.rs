//! Exact rational helpers shared by every module.
//!
//! All geometry on the torus is carried out in [`Q`], an arbitrary precision
//! rational. Positions on the continuous torus are kept in `[0, 1)`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar.
pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

/// Parse `"p/q"`, `"p"` or a finite decimal such as `"0.25"`.
pub fn parse_q(s: &str) -> Result<Q> {
    let t = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    if let Some((int, frac)) = t.split_once('.') {
        let neg = int.starts_with('-');
        let int_part: BigInt = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            int.parse().map_err(|_| bad())?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let frac_num: BigInt = frac.parse().map_err(|_| bad())?;
        let den = num_traits::pow(BigInt::from(10), frac.len());
        let f = Q::new(frac_num, den);
        let i = Q::from_integer(int_part.abs());
        let v = i + f;
        return Ok(if neg { -v } else { v });
    }
    let n: BigInt = t.parse().map_err(|_| bad())?;
    Ok(Q::from_integer(n))
}

/// Canonical `"p/q"` rendering (integers render without a denominator).
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Huge numerators/denominators: fall back to a scaled division.
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Reduce into `[0, 1)`.
pub fn wrap_unit(x: &Q) -> Q {
    let fl = x.floor();
    x - fl
}

/// Length of the cyclic half-open arc `(a, b]` on the unit torus; `a == b` gives 0.
pub fn arc_len(a: &Q, b: &Q) -> Q {
    wrap_unit(&(b - a))
}

pub fn max_q(a: &Q, b: &Q) -> Q {
    if a >= b {
        a.clone()
    } else {
        b.clone()
    }
}

pub fn pos_part(a: &Q) -> Q {
    if a.is_positive() {
        a.clone()
    } else {
        Q::zero()
    }
}

/// Least common multiple of denominators, handy for lattice embeddings.
pub fn lcm_denoms<'a>(xs: impl IntoIterator<Item = &'a Q>) -> BigInt {
    xs.into_iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_q("3/4").unwrap(), q(3, 4));
        assert_eq!(parse_q(" 2 ").unwrap(), qi(2));
        assert_eq!(parse_q("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_q("-1.5").unwrap(), q(-3, 2));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("abc").is_err());
    }

    #[test]
    fn render_roundtrip() {
        for x in [q(3, 4), qi(0), q(-7, 3), qi(5)] {
            assert_eq!(parse_q(&fmt_q(&x)).unwrap(), x);
        }
        assert_eq!(fmt_q(&q(6, 8)), "3/4");
    }

    #[test]
    fn arcs_wrap() {
        assert_eq!(arc_len(&q(3, 4), &q(1, 4)), q(1, 2));
        assert_eq!(arc_len(&q(1, 4), &q(3, 4)), q(1, 2));
        assert_eq!(arc_len(&q(1, 4), &q(1, 4)), qi(0));
        assert_eq!(wrap_unit(&q(5, 4)), q(1, 4));
        assert_eq!(wrap_unit(&q(-1, 4)), q(3, 4));
    }
}
