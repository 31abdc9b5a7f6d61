//! Torus geometry: sites and cyclic intervals of `Z_N`, particle
//! configurations, point configurations on the unit circle, and ordered
//! multiclass tuples.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational::{fmt_q, parse_q, Q};

/// Largest ring admitted by the exhaustive enumeration helpers.
pub const ENUM_MAX_N: usize = 12;
/// Largest `(k+1)^N` admitted by the exhaustive enumeration helpers.
pub const ENUM_MAX_STATES: u128 = 10_000_000;

/// Closed cyclic interval `[a, b]` on `Z_N`, traversed rightward from `a`.
///
/// When `b < a` the interval wraps through `N - 1 -> 0`. The full ring is
/// represented by `[a, a-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusInterval {
    n: usize,
    a: usize,
    b: usize,
}

impl TorusInterval {
    pub fn new(n: usize, a: usize, b: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("ring size must be positive".into()));
        }
        if a >= n || b >= n {
            return Err(Error::InvalidConfig(format!(
                "interval [{a},{b}] outside Z_{n}"
            )));
        }
        Ok(Self { n, a, b })
    }

    pub fn full(n: usize) -> Self {
        Self { n, a: 0, b: n - 1 }
    }

    pub fn ring(&self) -> usize {
        self.n
    }

    pub fn start(&self) -> usize {
        self.a
    }

    pub fn end(&self) -> usize {
        self.b
    }

    pub fn wraps(&self) -> bool {
        self.b < self.a
    }

    /// Number of sites, between 1 and `N`.
    pub fn len(&self) -> usize {
        (self.b + self.n - self.a) % self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: usize) -> bool {
        x < self.n && (x + self.n - self.a) % self.n < self.len()
    }

    /// Sites in traversal order.
    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).map(move |i| (self.a + i) % self.n)
    }

    pub fn rotate(&self, by: usize) -> Self {
        Self {
            n: self.n,
            a: (self.a + by) % self.n,
            b: (self.b + by) % self.n,
        }
    }
}

/// Occupation vector on `Z_N`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TorusConfig {
    occupied: Vec<bool>,
    count: usize,
}

impl fmt::Debug for TorusConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self
            .occupied
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect();
        write!(f, "TorusConfig({s})")
    }
}

impl TorusConfig {
    pub fn from_bits(occupied: Vec<bool>) -> Result<Self> {
        if occupied.is_empty() {
            return Err(Error::InvalidConfig("ring size must be positive".into()));
        }
        let count = occupied.iter().filter(|&&b| b).count();
        Ok(Self { occupied, count })
    }

    /// Parse a 0/1 slice.
    pub fn from_01(v: &[u8]) -> Result<Self> {
        let bits = v
            .iter()
            .map(|&x| match x {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidConfig(format!("occupation value {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(bits)
    }

    pub fn from_sites(n: usize, sites: &[usize]) -> Result<Self> {
        let mut occ = vec![false; n];
        for &s in sites {
            if s >= n {
                return Err(Error::InvalidConfig(format!("site {s} outside Z_{n}")));
            }
            if occ[s] {
                return Err(Error::InvalidConfig(format!("site {s} listed twice")));
            }
            occ[s] = true;
        }
        Self::from_bits(occ)
    }

    pub fn empty(n: usize) -> Self {
        Self {
            occupied: vec![false; n],
            count: 0,
        }
    }

    pub fn ring(&self) -> usize {
        self.occupied.len()
    }

    pub fn particles(&self) -> usize {
        self.count
    }

    pub fn get(&self, x: usize) -> bool {
        self.occupied[x % self.ring()]
    }

    pub fn value(&self, x: usize) -> i64 {
        i64::from(self.get(x))
    }

    pub fn bits(&self) -> &[bool] {
        &self.occupied
    }

    pub fn sites(&self) -> Vec<usize> {
        (0..self.ring()).filter(|&x| self.occupied[x]).collect()
    }

    pub fn to_01(&self) -> Vec<u8> {
        self.occupied.iter().map(|&b| u8::from(b)).collect()
    }

    pub(crate) fn set(&mut self, x: usize, v: bool) {
        if self.occupied[x] != v {
            self.occupied[x] = v;
            if v {
                self.count += 1;
            } else {
                self.count -= 1;
            }
        }
    }

    /// `self ⪯ other` componentwise; returns the first offending site otherwise.
    pub fn first_excess_site(&self, other: &Self) -> Option<usize> {
        (0..self.ring()).find(|&x| self.occupied[x] && !other.occupied[x])
    }

    pub fn is_below(&self, other: &Self) -> bool {
        self.ring() == other.ring() && self.first_excess_site(other).is_none()
    }

    /// Particle count on a cyclic interval.
    pub fn count_in(&self, iv: &TorusInterval) -> usize {
        iv.sites().filter(|&x| self.occupied[x]).count()
    }
}

impl Serialize for TorusConfig {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_01().serialize(s)
    }
}

impl<'de> Deserialize<'de> for TorusConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<u8>::deserialize(d)?;
        Self::from_01(&v).map_err(serde::de::Error::custom)
    }
}

/// Excess `Σ_{z∈[a,b]} (η₁(z) − η₂(z))` over a closed cyclic interval.
pub fn discrete_excess(
    eta1: &TorusConfig,
    eta2: &TorusConfig,
    interval: &TorusInterval,
) -> Result<i64> {
    if eta1.ring() != eta2.ring() {
        return Err(Error::SizeMismatch(eta1.ring(), eta2.ring()));
    }
    if interval.ring() != eta1.ring() {
        return Err(Error::SizeMismatch(interval.ring(), eta1.ring()));
    }
    Ok(interval
        .sites()
        .map(|z| eta1.value(z) - eta2.value(z))
        .sum())
}

/// Finite set of distinct points of the unit torus, kept sorted in `[0, 1)`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct PointConfig {
    points: Vec<Q>,
}

impl fmt::Debug for PointConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.points.iter().map(fmt_q).collect();
        write!(f, "PointConfig{{{}}}", parts.join(", "))
    }
}

impl PointConfig {
    /// Sorts the input; rejects duplicates and values outside `[0, 1)`.
    pub fn new(mut points: Vec<Q>) -> Result<Self> {
        for p in &points {
            if p < &crate::rational::zero() || p >= &crate::rational::one() {
                return Err(Error::InvalidConfig(format!(
                    "point {} outside [0,1)",
                    fmt_q(p)
                )));
            }
        }
        points.sort();
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("repeated point".into()));
        }
        Ok(Self { points })
    }

    pub fn empty() -> Self {
        Self { points: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Q] {
        &self.points
    }

    pub fn contains(&self, p: &Q) -> bool {
        self.points.binary_search(p).is_ok()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.points.iter().all(|p| other.contains(p))
    }

    /// Cyclic successor of the `i`-th point.
    pub fn successor(&self, i: usize) -> &Q {
        &self.points[(i + 1) % self.points.len()]
    }

    pub(crate) fn from_sorted_unchecked(points: Vec<Q>) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0] < w[1]));
        Self { points }
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.points.iter().map(fmt_q).collect()
    }

    pub fn from_strings(v: &[String]) -> Result<Self> {
        Self::new(v.iter().map(|s| parse_q(s)).collect::<Result<Vec<_>>>()?)
    }
}

impl Serialize for PointConfig {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_strings().serialize(s)
    }
}

impl<'de> Deserialize<'de> for PointConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        Self::from_strings(&v).map_err(serde::de::Error::custom)
    }
}

/// Types carrying the partial order used by multiclass tuples.
pub trait Dominance {
    /// `None` when `self ⪯ other`, otherwise a human-readable location of
    /// the first violation.
    fn first_violation(&self, other: &Self) -> Option<String>;
}

impl Dominance for TorusConfig {
    fn first_violation(&self, other: &Self) -> Option<String> {
        if self.ring() != other.ring() {
            return Some(format!("ring sizes {} and {}", self.ring(), other.ring()));
        }
        self.first_excess_site(other).map(|x| x.to_string())
    }
}

impl Dominance for PointConfig {
    fn first_violation(&self, other: &Self) -> Option<String> {
        self.points
            .iter()
            .find(|p| !other.contains(p))
            .map(fmt_q)
    }
}

/// Multiclass state: part `i` holds the particles of class `≤ i+1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedTuple<T> {
    parts: Vec<T>,
}

/// Outcome of [`validate_ordered`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderCheck {
    pub ok: bool,
    /// `(index of the lower part, location)` of the first violating pair.
    pub violation: Option<(usize, String)>,
}

pub fn validate_ordered<T: Dominance>(parts: &[T]) -> OrderCheck {
    for (i, w) in parts.windows(2).enumerate() {
        if let Some(at) = w[0].first_violation(&w[1]) {
            return OrderCheck {
                ok: false,
                violation: Some((i, at)),
            };
        }
    }
    OrderCheck {
        ok: true,
        violation: None,
    }
}

impl<T: Dominance> OrderedTuple<T> {
    pub fn new(parts: Vec<T>) -> Result<Self> {
        match validate_ordered(&parts).violation {
            None => Ok(Self { parts }),
            Some((index, at)) => Err(Error::OrderViolated { index, at }),
        }
    }
}

impl<T> OrderedTuple<T> {
    pub(crate) fn new_unchecked(parts: Vec<T>) -> Self {
        Self { parts }
    }

    pub fn parts(&self) -> &[T] {
        &self.parts
    }

    pub fn into_parts(self) -> Vec<T> {
        self.parts
    }

    pub fn classes(&self) -> usize {
        self.parts.len()
    }
}

impl OrderedTuple<TorusConfig> {
    pub fn ring(&self) -> usize {
        self.parts.first().map_or(0, TorusConfig::ring)
    }
}

/// Class labels: 0 at holes, `j` at sites first occupied in part `j`.
pub fn class_label_encode(tuple: &OrderedTuple<TorusConfig>) -> Vec<u8> {
    let n = tuple.ring();
    (0..n)
        .map(|x| {
            tuple
                .parts()
                .iter()
                .position(|eta| eta.get(x))
                .map_or(0, |i| (i + 1) as u8)
        })
        .collect()
}

/// Inverse of [`class_label_encode`] for `k` classes.
pub fn class_label_decode(labels: &[u8], k: usize) -> Result<OrderedTuple<TorusConfig>> {
    if labels.is_empty() {
        return Err(Error::InvalidConfig("empty label vector".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize > k) {
        return Err(Error::InvalidConfig(format!("label {bad} exceeds k = {k}")));
    }
    let parts = (1..=k)
        .map(|i| {
            TorusConfig::from_bits(
                labels
                    .iter()
                    .map(|&l| l != 0 && (l as usize) <= i)
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrderedTuple::new_unchecked(parts))
}

/// Refuse exhaustive enumerations that would not be tractable.
pub fn check_enumeration_size(n: usize, k: usize) -> Result<()> {
    if n > ENUM_MAX_N {
        return Err(Error::TooLarge(format!(
            "ring size {n} exceeds enumeration cap {ENUM_MAX_N}"
        )));
    }
    let states = (k as u128 + 1).checked_pow(n as u32).unwrap_or(u128::MAX);
    if states > ENUM_MAX_STATES {
        return Err(Error::TooLarge(format!(
            "(k+1)^N = {states} exceeds {ENUM_MAX_STATES}"
        )));
    }
    Ok(())
}

/// All configurations of `X_{N,M}` in lexicographic order of their 0/1 vectors
/// read as big-endian words (so `1,1,0` precedes `1,0,1`).
pub fn configs_with_count(n: usize, m: usize) -> Result<Vec<TorusConfig>> {
    if n > ENUM_MAX_N {
        return Err(Error::TooLarge(format!(
            "ring size {n} exceeds enumeration cap {ENUM_MAX_N}"
        )));
    }
    if m > n {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut bits = vec![false; n];
    fn rec(pos: usize, left: usize, bits: &mut Vec<bool>, out: &mut Vec<TorusConfig>) {
        let n = bits.len();
        if left == 0 {
            out.push(TorusConfig::from_bits(bits.clone()).expect("non-empty ring"));
            return;
        }
        if n - pos < left {
            return;
        }
        bits[pos] = true;
        rec(pos + 1, left - 1, bits, out);
        bits[pos] = false;
        rec(pos + 1, left, bits, out);
    }
    rec(0, m, &mut bits, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn cfg(v: &[u8]) -> TorusConfig {
        TorusConfig::from_01(v).unwrap()
    }

    #[test]
    fn interval_basics() {
        let iv = TorusInterval::new(6, 4, 1).unwrap();
        assert!(iv.wraps());
        assert_eq!(iv.len(), 4);
        assert_eq!(iv.sites().collect::<Vec<_>>(), vec![4, 5, 0, 1]);
        assert!(iv.contains(0) && iv.contains(5) && !iv.contains(2));
        assert_eq!(TorusInterval::full(6).len(), 6);
        assert_eq!(TorusInterval::new(6, 3, 3).unwrap().len(), 1);
        assert!(TorusInterval::new(6, 6, 1).is_err());
    }

    #[test]
    fn interval_membership_rotates() {
        let n = 7;
        for a in 0..n {
            for b in 0..n {
                let iv = TorusInterval::new(n, a, b).unwrap();
                for r in 0..n {
                    let rot = iv.rotate(r);
                    for x in 0..n {
                        assert_eq!(iv.contains(x), rot.contains((x + r) % n));
                    }
                }
            }
        }
    }

    #[test]
    fn encode_examples() {
        let t = OrderedTuple::new(vec![cfg(&[1, 0, 0]), cfg(&[1, 1, 0])]).unwrap();
        assert_eq!(class_label_encode(&t), vec![1, 2, 0]);
        let t = OrderedTuple::new(vec![cfg(&[0, 1])]).unwrap();
        assert_eq!(class_label_encode(&t), vec![0, 1]);
        let t = OrderedTuple::new(vec![
            cfg(&[0, 0, 0, 1]),
            cfg(&[0, 1, 0, 1]),
            cfg(&[1, 1, 0, 1]),
        ])
        .unwrap();
        assert_eq!(class_label_encode(&t), vec![3, 2, 0, 1]);
    }

    #[test]
    fn encode_rejects_unordered() {
        let err = OrderedTuple::new(vec![cfg(&[1, 1]), cfg(&[1, 0])]).unwrap_err();
        assert_eq!(
            err,
            Error::OrderViolated {
                index: 0,
                at: "1".into()
            }
        );
    }

    #[test]
    fn validate_examples() {
        assert!(validate_ordered(&[cfg(&[1, 0]), cfg(&[1, 1])]).ok);
        let c = validate_ordered(&[cfg(&[1, 1]), cfg(&[1, 0])]);
        assert!(!c.ok);
        assert_eq!(c.violation, Some((0, "1".to_string())));
        let x = PointConfig::new(vec![q(1, 3)]).unwrap();
        let y = PointConfig::new(vec![q(1, 3), q(1, 2)]).unwrap();
        assert!(validate_ordered(&[x.clone(), y.clone()]).ok);
        assert!(!validate_ordered(&[y, x]).ok);
    }

    #[test]
    fn excess_examples() {
        let e1 = TorusConfig::from_sites(6, &[0, 3]).unwrap();
        let e2 = TorusConfig::from_sites(6, &[1, 2, 5]).unwrap();
        let at0 = TorusInterval::new(6, 0, 0).unwrap();
        assert_eq!(discrete_excess(&e1, &e2, &at0).unwrap(), 1);
        assert_eq!(discrete_excess(&e1, &e2, &TorusInterval::full(6)).unwrap(), -1);
        for a in 0..6 {
            for b in 0..6 {
                let iv = TorusInterval::new(6, a, b).unwrap();
                assert_eq!(discrete_excess(&e1, &e1, &iv).unwrap(), 0);
            }
        }
        let other = TorusConfig::empty(5);
        assert!(discrete_excess(&e1, &other, &at0).is_err());
    }

    #[test]
    fn enumeration_counts_and_caps() {
        assert_eq!(configs_with_count(6, 3).unwrap().len(), 20);
        assert_eq!(configs_with_count(4, 0).unwrap().len(), 1);
        assert!(configs_with_count(13, 1).is_err());
        assert!(check_enumeration_size(12, 3).is_err());
        assert!(check_enumeration_size(6, 3).is_ok());
    }

    #[test]
    fn points_reject_duplicates_and_range() {
        assert!(PointConfig::new(vec![q(1, 2), q(1, 2)]).is_err());
        assert!(PointConfig::new(vec![q(1, 1)]).is_err());
        let p = PointConfig::new(vec![q(3, 4), q(1, 4)]).unwrap();
        assert_eq!(p.points(), &[q(1, 4), q(3, 4)]);
        assert_eq!(p.successor(1), &q(1, 4));
    }

    #[test]
    fn json_shapes() {
        let c = cfg(&[1, 0, 1]);
        assert_eq!(serde_json::to_string(&c).unwrap(), "[1,0,1]");
        let back: TorusConfig = serde_json::from_str("[1,0,1]").unwrap();
        assert_eq!(back, c);
        let p = PointConfig::new(vec![q(1, 4), q(2, 3)]).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"["1/4","2/3"]"#);
        assert!(serde_json::from_str::<TorusConfig>("[2]").is_err());
    }
}
