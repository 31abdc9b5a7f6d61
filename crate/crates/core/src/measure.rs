//! Positive measures on the unit torus: a piecewise-constant density plus
//! finitely many atoms, all data exact rationals.
//!
//! Cell `i` of a measure is `[b_i, b_{i+1})`, the last cell wrapping to
//! `b_0 + 1`. The stored form is canonical: breakpoints appear only where
//! the density actually changes, so structural equality is measure equality.

use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{fmt_q, one, parse_q, wrap_unit, zero, Q};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TorusMeasure {
    breakpoints: Vec<Q>,
    densities: Vec<Q>,
    atoms: Vec<(Q, Q)>,
}

impl fmt::Debug for TorusMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self
            .breakpoints
            .iter()
            .zip(&self.densities)
            .map(|(b, d)| format!("{}:{}", fmt_q(b), fmt_q(d)))
            .collect();
        let atoms: Vec<String> = self
            .atoms
            .iter()
            .map(|(x, m)| format!("{}δ{}", fmt_q(m), fmt_q(x)))
            .collect();
        write!(f, "TorusMeasure[{}; {}]", cells.join(" "), atoms.join(" + "))
    }
}

/// Sorted grid of positions in `[0, 1)` that always contains 0.
///
/// Cell `i` is `[g_i, g_{i+1})` with `g_n := 1`; no cell wraps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub points: Vec<Q>,
}

impl Grid {
    pub fn new(extra: impl IntoIterator<Item = Q>) -> Self {
        let mut points: Vec<Q> = std::iter::once(zero())
            .chain(extra.into_iter().map(|x| wrap_unit(&x)))
            .collect();
        points.sort();
        points.dedup();
        Self { points }
    }

    /// Union of the breakpoints and atom locations of all measures.
    pub fn common(measures: &[&TorusMeasure]) -> Self {
        Self::new(measures.iter().flat_map(|m| {
            m.breakpoints
                .iter()
                .cloned()
                .chain(m.atoms.iter().map(|(x, _)| x.clone()))
        }))
    }

    pub fn cells(&self) -> usize {
        self.points.len()
    }

    pub fn left(&self, i: usize) -> &Q {
        &self.points[i]
    }

    pub fn right(&self, i: usize) -> Q {
        self.points.get(i + 1).cloned().unwrap_or_else(one)
    }

    pub fn width(&self, i: usize) -> Q {
        self.right(i) - self.left(i)
    }

    pub fn refine(&self, extra: impl IntoIterator<Item = Q>) -> Self {
        Self::new(self.points.iter().cloned().chain(extra))
    }
}

/// Membership summary of a measure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MeasureClass {
    pub absolutely_continuous: bool,
    pub bounded_density: bool,
    pub total_mass: String,
}

impl TorusMeasure {
    /// Build from cells `[b_i, b_{i+1})` (last cell wrapping) and atoms.
    pub fn new(breakpoints: Vec<Q>, densities: Vec<Q>, atoms: Vec<(Q, Q)>) -> Result<Self> {
        if breakpoints.len() != densities.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} breakpoints but {} densities",
                breakpoints.len(),
                densities.len()
            )));
        }
        if breakpoints.is_empty() && !densities.is_empty() {
            return Err(Error::InvalidMeasure("densities without cells".into()));
        }
        for b in &breakpoints {
            if b.is_negative() || b >= &one() {
                return Err(Error::InvalidMeasure(format!(
                    "breakpoint {} outside [0,1)",
                    fmt_q(b)
                )));
            }
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMeasure(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if let Some(d) = densities.iter().find(|d| d.is_negative()) {
            return Err(Error::InvalidMeasure(format!(
                "negative density {}",
                fmt_q(d)
            )));
        }
        let mut seen: Vec<Q> = Vec::with_capacity(atoms.len());
        for (x, m) in &atoms {
            if x.is_negative() || x >= &one() {
                return Err(Error::InvalidMeasure(format!(
                    "atom location {} outside [0,1)",
                    fmt_q(x)
                )));
            }
            if !m.is_positive() {
                return Err(Error::InvalidMeasure(format!(
                    "atom mass {} must be positive",
                    fmt_q(m)
                )));
            }
            if seen.contains(x) {
                return Err(Error::InvalidMeasure(format!(
                    "two atoms at {}",
                    fmt_q(x)
                )));
            }
            seen.push(x.clone());
        }
        let (breakpoints, densities) = if breakpoints.is_empty() {
            (vec![zero()], vec![zero()])
        } else {
            (breakpoints, densities)
        };
        Ok(Self::canonical(breakpoints, densities, atoms))
    }

    /// Merge cells of equal density and sort atoms, dropping zero atoms.
    fn canonical(breakpoints: Vec<Q>, densities: Vec<Q>, mut atoms: Vec<(Q, Q)>) -> Self {
        let n = breakpoints.len();
        let mut bp = Vec::with_capacity(n);
        let mut ds = Vec::with_capacity(n);
        for i in 0..n {
            let prev = &densities[(i + n - 1) % n];
            if n == 1 || &densities[i] != prev {
                bp.push(breakpoints[i].clone());
                ds.push(densities[i].clone());
            }
        }
        if bp.is_empty() {
            bp.push(zero());
            ds.push(densities[0].clone());
        }
        atoms.retain(|(_, m)| !m.is_zero());
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        Self {
            breakpoints: bp,
            densities: ds,
            atoms,
        }
    }

    pub fn zero_measure() -> Self {
        Self::constant(zero())
    }

    pub fn lebesgue() -> Self {
        Self::constant(one())
    }

    pub fn constant(c: Q) -> Self {
        assert!(!c.is_negative(), "negative constant density");
        Self {
            breakpoints: vec![zero()],
            densities: vec![c],
            atoms: Vec::new(),
        }
    }

    /// Purely atomic measure.
    pub fn atomic(atoms: Vec<(Q, Q)>) -> Result<Self> {
        Self::new(vec![zero()], vec![zero()], atoms)
    }

    /// Density given on the cells of a [`Grid`].
    pub fn from_grid(grid: &Grid, densities: Vec<Q>, atoms: Vec<(Q, Q)>) -> Result<Self> {
        Self::new(grid.points.clone(), densities, atoms)
    }

    /// Density `f(midpoint)` on every cell of `grid`, no atoms.
    pub fn tabulate(grid: &Grid, f: impl Fn(&Q) -> Q) -> Result<Self> {
        let two = crate::rational::qi(2);
        let dens = (0..grid.cells())
            .map(|i| f(&((grid.left(i) + grid.right(i)) / &two)))
            .collect();
        Self::from_grid(grid, dens, Vec::new())
    }

    /// `c · χ_[a, a+len]` for a cyclic arc starting at `a`.
    pub fn arc_indicator(a: &Q, len: &Q, c: &Q) -> Result<Self> {
        Self::sum_of_arcs(&[(a.clone(), len.clone(), c.clone())])
    }

    /// Sum of `c_j · χ_[a_j, a_j+len_j]` over cyclic arcs (overlaps add up).
    pub fn sum_of_arcs(arcs: &[(Q, Q, Q)]) -> Result<Self> {
        let mut cuts = Vec::new();
        for (a, len, c) in arcs {
            if len.is_negative() || len > &one() || c.is_negative() {
                return Err(Error::InvalidMeasure("bad arc".into()));
            }
            cuts.push(a.clone());
            cuts.push(a + len);
        }
        let grid = Grid::new(cuts);
        let dens = (0..grid.cells())
            .map(|i| {
                let mid = (grid.left(i) + grid.right(i)) / crate::rational::qi(2);
                arcs.iter()
                    .filter(|(a, len, _)| {
                        let off = wrap_unit(&(&mid - a));
                        &off < len
                    })
                    .fold(zero(), |acc, (_, _, c)| acc + c)
            })
            .collect();
        Self::from_grid(&grid, dens, Vec::new())
    }

    pub fn breakpoints(&self) -> &[Q] {
        &self.breakpoints
    }

    pub fn densities(&self) -> &[Q] {
        &self.densities
    }

    pub fn atoms(&self) -> &[(Q, Q)] {
        &self.atoms
    }

    pub fn is_absolutely_continuous(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_bounded_density(&self) -> bool {
        self.is_absolutely_continuous() && self.densities.iter().all(|d| d <= &one())
    }

    pub fn total_mass(&self) -> Q {
        let n = self.breakpoints.len();
        let mut total = zero();
        for i in 0..n {
            let len = if i + 1 < n {
                &self.breakpoints[i + 1] - &self.breakpoints[i]
            } else {
                &self.breakpoints[0] + one() - &self.breakpoints[i]
            };
            total += len * &self.densities[i];
        }
        self.atoms.iter().fold(total, |acc, (_, m)| acc + m)
    }

    pub fn class(&self) -> MeasureClass {
        MeasureClass {
            absolutely_continuous: self.is_absolutely_continuous(),
            bounded_density: self.is_bounded_density(),
            total_mass: fmt_q(&self.total_mass()),
        }
    }

    /// Density of the cell containing `x` (cells are left-closed).
    pub fn density_at(&self, x: &Q) -> &Q {
        let x = wrap_unit(x);
        match self.breakpoints.binary_search(&x) {
            Ok(i) => &self.densities[i],
            Err(0) => self.densities.last().expect("at least one cell"),
            Err(i) => &self.densities[i - 1],
        }
    }

    pub fn atom_at(&self, x: &Q) -> Q {
        let x = wrap_unit(x);
        match self.atoms.binary_search_by(|(p, _)| p.cmp(&x)) {
            Ok(i) => self.atoms[i].1.clone(),
            Err(_) => zero(),
        }
    }

    /// Densities on the cells of `grid`; `grid` must refine the breakpoints.
    pub fn densities_on(&self, grid: &Grid) -> Vec<Q> {
        grid.points.iter().map(|g| self.density_at(g).clone()).collect()
    }

    /// Atom masses at the points of `grid`.
    pub fn atoms_on(&self, grid: &Grid) -> Vec<Q> {
        grid.points.iter().map(|g| self.atom_at(g)).collect()
    }

    /// `∫_{[0, x)} density` for `x ∈ [0, 1]`.
    fn lebesgue_prefix(&self, x: &Q) -> Q {
        let n = self.breakpoints.len();
        let mut acc = zero();
        // Portion of the wrapping last cell lying in [0, b_0).
        let first = &self.breakpoints[0];
        let head_end = if x < first { x } else { first };
        acc += head_end * &self.densities[n - 1];
        for i in 0..n {
            let lo = &self.breakpoints[i];
            if x <= lo {
                break;
            }
            let hi = if i + 1 < n {
                self.breakpoints[i + 1].clone()
            } else {
                one()
            };
            let end = if x < &hi { x.clone() } else { hi };
            acc += (end - lo) * &self.densities[i];
        }
        acc
    }

    /// Lebesgue part of the mass of the arc `[a, a+len]`, `len ∈ [0, 1]`.
    pub fn lebesgue_arc(&self, a: &Q, len: &Q) -> Q {
        let a = wrap_unit(a);
        let end = &a + len;
        if end <= one() {
            self.lebesgue_prefix(&end) - self.lebesgue_prefix(&a)
        } else {
            let total = self.lebesgue_prefix(&one());
            total - self.lebesgue_prefix(&a) + self.lebesgue_prefix(&(end - one()))
        }
    }

    /// Atom mass in the arc from `a` of length `len`, with endpoint flags.
    /// A full-circle arc counts an atom at `a` once if either end is closed.
    pub fn atoms_arc(&self, a: &Q, len: &Q, left_closed: bool, right_closed: bool) -> Q {
        let a = wrap_unit(a);
        let full = len >= &one();
        let mut acc = zero();
        for (x, m) in &self.atoms {
            let off = wrap_unit(&(x - &a));
            let inside = if off.is_zero() {
                if full {
                    left_closed || right_closed
                } else if len.is_zero() {
                    left_closed && right_closed
                } else {
                    left_closed
                }
            } else if &off < len {
                true
            } else if &off == len {
                right_closed
            } else {
                false
            };
            if inside {
                acc += m;
            }
        }
        acc
    }

    /// Mass of the half-open cyclic interval `(a, b]`; empty when `a == b`.
    pub fn interval_mass(&self, a: &Q, b: &Q) -> Q {
        let len = crate::rational::arc_len(a, b);
        self.lebesgue_arc(a, &len) + self.atoms_arc(a, &len, false, true)
    }

    /// Mass of the closed cyclic arc `[a, a+len]`.
    pub fn closed_arc_mass(&self, a: &Q, len: &Q) -> Q {
        self.lebesgue_arc(a, len) + self.atoms_arc(a, len, true, true)
    }

    /// `self ⪯ other` on every Borel set: cellwise density and pointwise atoms.
    /// Returns the first violating location otherwise.
    pub fn domination_violation(&self, other: &Self) -> Option<Q> {
        let grid = Grid::common(&[self, other]);
        for g in &grid.points {
            if self.density_at(g) > other.density_at(g) || self.atom_at(g) > other.atom_at(g) {
                return Some(g.clone());
            }
        }
        None
    }

    pub fn is_dominated_by(&self, other: &Self) -> bool {
        self.domination_violation(other).is_none()
    }

    pub fn add(&self, other: &Self) -> Self {
        let grid = Grid::common(&[self, other]);
        let dens = grid
            .points
            .iter()
            .map(|g| self.density_at(g) + other.density_at(g))
            .collect();
        let atoms = grid
            .points
            .iter()
            .map(|g| (g.clone(), self.atom_at(g) + other.atom_at(g)))
            .filter(|(_, m)| !m.is_zero())
            .collect();
        Self::canonical(grid.points, dens, atoms)
    }

    pub fn scale(&self, c: &Q) -> Self {
        assert!(!c.is_negative(), "negative scale");
        Self::canonical(
            self.breakpoints.clone(),
            self.densities.iter().map(|d| d * c).collect(),
            self.atoms.iter().map(|(x, m)| (x.clone(), m * c)).collect(),
        )
    }

    /// Convex combination `c·self + (1−c)·other`.
    pub fn mix(&self, other: &Self, c: &Q) -> Self {
        self.scale(c).add(&other.scale(&(one() - c)))
    }

    pub fn to_json_form(&self) -> MeasureJson {
        MeasureJson {
            breakpoints: self.breakpoints.iter().map(fmt_q).collect(),
            densities: self.densities.iter().map(fmt_q).collect(),
            atoms: self
                .atoms
                .iter()
                .map(|(x, m)| AtomJson {
                    at: fmt_q(x),
                    mass: fmt_q(m),
                })
                .collect(),
        }
    }

    pub fn from_json_form(j: &MeasureJson) -> Result<Self> {
        let bp = j
            .breakpoints
            .iter()
            .map(|s| parse_q(s))
            .collect::<Result<Vec<_>>>()?;
        let ds = j
            .densities
            .iter()
            .map(|s| parse_q(s))
            .collect::<Result<Vec<_>>>()?;
        let atoms = j
            .atoms
            .iter()
            .map(|a| Ok((parse_q(&a.at)?, parse_q(&a.mass)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(bp, ds, atoms)
    }
}

/// Wire form: `{breakpoints: ["p/q",...], densities: [...], atoms: [{at, mass}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureJson {
    pub breakpoints: Vec<String>,
    pub densities: Vec<String>,
    #[serde(default)]
    pub atoms: Vec<AtomJson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomJson {
    pub at: String,
    pub mass: String,
}

impl Serialize for TorusMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_form().serialize(s)
    }
}

impl<'de> Deserialize<'de> for TorusMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MeasureJson::deserialize(d)?;
        Self::from_json_form(&j).map_err(serde::de::Error::custom)
    }
}

impl crate::lattice::Dominance for TorusMeasure {
    fn first_violation(&self, other: &Self) -> Option<String> {
        self.domination_violation(other).map(|x| fmt_q(&x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::validate_ordered;
    use crate::rational::{q, qi};

    #[test]
    fn interval_mass_examples() {
        let leb = TorusMeasure::lebesgue();
        assert_eq!(leb.interval_mass(&qi(0), &q(1, 2)), q(1, 2));
        let delta = TorusMeasure::atomic(vec![(q(1, 2), qi(1))]).unwrap();
        assert_eq!(delta.interval_mass(&q(1, 4), &q(1, 2)), qi(1));
        assert_eq!(delta.interval_mass(&q(1, 2), &q(3, 4)), qi(0));
        let rho = TorusMeasure::arc_indicator(&q(1, 4), &q(1, 4), &qi(2)).unwrap();
        assert_eq!(rho.interval_mass(&qi(0), &q(3, 8)), q(1, 4));
    }

    #[test]
    fn wrapping_intervals() {
        let rho = TorusMeasure::arc_indicator(&q(7, 8), &q(1, 4), &qi(1)).unwrap();
        assert_eq!(rho.total_mass(), q(1, 4));
        assert_eq!(rho.interval_mass(&q(3, 4), &q(1, 16)), q(3, 16));
        assert_eq!(rho.density_at(&q(1, 16)), &qi(1));
        assert_eq!(rho.density_at(&q(1, 2)), &qi(0));
    }

    #[test]
    fn canonical_form_merges_cells() {
        let a = TorusMeasure::new(
            vec![qi(0), q(1, 4), q(1, 2)],
            vec![qi(1), qi(1), qi(1)],
            vec![],
        )
        .unwrap();
        assert_eq!(a, TorusMeasure::lebesgue());
        let b = TorusMeasure::new(vec![q(1, 8), q(1, 2)], vec![qi(1), qi(0)], vec![]).unwrap();
        let c = TorusMeasure::arc_indicator(&q(1, 8), &q(3, 8), &qi(1)).unwrap();
        assert_eq!(b, c);
    }

    #[test]
    fn validation_errors() {
        assert!(TorusMeasure::new(vec![qi(0)], vec![qi(-1)], vec![]).is_err());
        assert!(TorusMeasure::new(vec![q(1, 2), q(1, 4)], vec![qi(0), qi(0)], vec![]).is_err());
        assert!(TorusMeasure::atomic(vec![(q(1, 2), qi(0))]).is_err());
        assert!(TorusMeasure::atomic(vec![(q(1, 2), qi(1)), (q(1, 2), qi(1))]).is_err());
    }

    #[test]
    fn domination_examples() {
        let half = TorusMeasure::constant(q(1, 2));
        let leb = TorusMeasure::lebesgue();
        assert!(validate_ordered(&[half.clone(), leb.clone()]).ok);
        assert!(!validate_ordered(&[leb, half]).ok);
        let d = TorusMeasure::atomic(vec![(q(1, 2), qi(1))]).unwrap();
        let dd = TorusMeasure::atomic(vec![(q(1, 2), qi(1)), (q(3, 4), qi(1))]).unwrap();
        assert!(d.is_dominated_by(&dd));
        assert!(!dd.is_dominated_by(&d));
    }

    #[test]
    fn flags_and_mass() {
        let m = TorusMeasure::new(
            vec![qi(0), q(1, 2)],
            vec![qi(2), qi(0)],
            vec![(q(3, 4), q(1, 3))],
        )
        .unwrap();
        assert_eq!(m.total_mass(), q(4, 3));
        assert!(!m.is_absolutely_continuous());
        assert!(!m.is_bounded_density());
        assert!(TorusMeasure::constant(q(1, 2)).is_bounded_density());
    }

    #[test]
    fn json_roundtrip() {
        let m = TorusMeasure::new(
            vec![qi(0), q(1, 2)],
            vec![q(1, 3), qi(0)],
            vec![(q(3, 4), q(1, 3))],
        )
        .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(
            s,
            r#"{"breakpoints":["0","1/2"],"densities":["1/3","0"],"atoms":[{"at":"3/4","mass":"1/3"}]}"#
        );
        let back: TorusMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
