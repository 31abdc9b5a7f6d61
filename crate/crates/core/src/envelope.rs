//! Plateau decomposition of two density profiles, cumulative functions on a
//! closed arc, and their concave envelopes.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{Grid, TorusMeasure};
use crate::rational::{fmt_q, one, wrap_unit, zero, Q};

/// Closed cyclic arc `[start, start + len]`, `0 < len ≤ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClosedArc {
    pub start: Q,
    pub len: Q,
}

impl ClosedArc {
    pub fn new(start: Q, len: Q) -> Self {
        Self {
            start: wrap_unit(&start),
            len,
        }
    }

    pub fn end(&self) -> Q {
        wrap_unit(&(&self.start + &self.len))
    }

    pub fn is_full(&self) -> bool {
        self.len >= one()
    }

    pub fn wraps(&self) -> bool {
        &self.start + &self.len > one()
    }

    /// Offset of `x` from the start, if `x` lies in the arc.
    pub fn offset_of(&self, x: &Q) -> Option<Q> {
        let off = wrap_unit(&(x - &self.start));
        if self.is_full() || off <= self.len {
            Some(off)
        } else {
            None
        }
    }

    /// Whether `x` lies strictly inside the arc.
    pub fn contains_interior(&self, x: &Q) -> bool {
        let off = wrap_unit(&(x - &self.start));
        self.is_full() || (off.is_positive() && off < self.len)
    }

    pub fn describe(&self) -> String {
        format!("[{}, {}]", fmt_q(&self.start), fmt_q(&(&self.start + &self.len)))
    }
}

impl Serialize for ClosedArc {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [fmt_q(&self.start), fmt_q(&(&self.start + &self.len))].serialize(s)
    }
}

/// Maximal closed arcs on which two densities agree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlateauDecomposition {
    pub intervals: Vec<ClosedArc>,
    /// The densities agree everywhere (`𝒰 = Λ`).
    pub full: bool,
}

impl PlateauDecomposition {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Index of the plateau containing `x` in its interior.
    pub fn locate(&self, x: &Q) -> Option<usize> {
        self.intervals.iter().position(|a| a.contains_interior(x))
    }

    pub fn total_length(&self) -> Q {
        self.intervals.iter().fold(zero(), |acc, a| acc + &a.len)
    }
}

fn densities_agree(a: &Q, b: &Q, tol: &Q) -> bool {
    if tol.is_zero() {
        return a == b;
    }
    let scale = if a > b { a } else { b };
    (a - b).abs() <= tol * scale
}

/// Exact plateau set: cells of the common refinement with equal density,
/// merged into maximal cyclic runs.
pub fn plateau_set(rho1: &TorusMeasure, rho2: &TorusMeasure) -> Result<PlateauDecomposition> {
    plateau_set_with_tol(rho1, rho2, &zero())
}

/// Plateau set where densities count as equal within relative tolerance `tol`.
pub fn plateau_set_with_tol(
    rho1: &TorusMeasure,
    rho2: &TorusMeasure,
    tol: &Q,
) -> Result<PlateauDecomposition> {
    if !rho1.is_absolutely_continuous() || !rho2.is_absolutely_continuous() {
        return Err(Error::InvalidMeasure(
            "plateaus are defined for densities only (atoms present)".into(),
        ));
    }
    if tol.is_negative() {
        return Err(Error::InvalidConfig("negative equality tolerance".into()));
    }
    let grid = Grid::common(&[rho1, rho2]);
    let n = grid.cells();
    let eq: Vec<bool> = grid
        .points
        .iter()
        .map(|g| densities_agree(rho1.density_at(g), rho2.density_at(g), tol))
        .collect();
    let Some(start) = eq.iter().position(|e| !e) else {
        return Ok(PlateauDecomposition {
            intervals: vec![ClosedArc::new(zero(), one())],
            full: true,
        });
    };
    let mut intervals = Vec::new();
    let mut run: Option<(Q, Q)> = None;
    for step in 1..=n {
        let i = (start + step) % n;
        if eq[i] {
            let w = grid.width(i);
            run = Some(match run {
                Some((s, len)) => (s, len + w),
                None => (grid.left(i).clone(), w),
            });
        } else if let Some((s, len)) = run.take() {
            intervals.push(ClosedArc::new(s, len));
        }
    }
    intervals.sort_by(|a, b| a.start.cmp(&b.start));
    Ok(PlateauDecomposition {
        intervals,
        full: false,
    })
}

/// Piecewise-linear cumulative `u ↦ ρ([u^l, u^l + u])` on a closed arc;
/// positions are offsets from the arc start and the function is `−∞` outside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CumulativeFunction {
    pub base: ClosedArc,
    pub knots: Vec<(Q, Q)>,
}

impl CumulativeFunction {
    /// Value at offset `x`; `None` outside the arc.
    pub fn eval(&self, x: &Q) -> Option<Q> {
        if x.is_negative() || x > &self.base.len {
            return None;
        }
        let i = match self.knots.binary_search_by(|(p, _)| p.cmp(x)) {
            Ok(i) => return Some(self.knots[i].1.clone()),
            Err(i) => i,
        };
        let (x0, y0) = &self.knots[i - 1];
        let (x1, y1) = &self.knots[i];
        Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }

    pub fn total(&self) -> &Q {
        &self.knots.last().expect("cumulative has knots").1
    }

    /// Slope on each segment between consecutive knots.
    pub fn slopes(&self) -> Vec<Q> {
        self.knots
            .windows(2)
            .map(|w| (&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0))
            .collect()
    }

    pub fn is_concave(&self) -> bool {
        self.slopes().windows(2).all(|w| w[0] >= w[1])
    }

    /// `offset,position,value` rows for plotting.
    pub fn knots_csv(&self) -> String {
        let mut out = String::from("offset,position,value\n");
        for (x, y) in &self.knots {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_q(x),
                fmt_q(&wrap_unit(&(&self.base.start + x))),
                fmt_q(y)
            ));
        }
        out
    }
}

/// Cumulative function of `rho` on `arc`, with a knot at every breakpoint.
pub fn cumulative(rho: &TorusMeasure, arc: &ClosedArc) -> Result<CumulativeFunction> {
    if rho.atoms().iter().any(|(x, _)| arc.offset_of(x).is_some()) {
        return Err(Error::InvalidMeasure(format!(
            "atom inside {}; cumulative needs a density there",
            arc.describe()
        )));
    }
    let mut offs: Vec<Q> = rho
        .breakpoints()
        .iter()
        .map(|b| wrap_unit(&(b - &arc.start)))
        .filter(|o| o.is_positive() && o < &arc.len)
        .collect();
    offs.push(zero());
    offs.push(arc.len.clone());
    offs.sort();
    offs.dedup();
    let knots = offs
        .into_iter()
        .map(|o| {
            let v = rho.lebesgue_arc(&arc.start, &o);
            (o, v)
        })
        .collect();
    Ok(CumulativeFunction {
        base: arc.clone(),
        knots,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub hull: CumulativeFunction,
    /// Slopes of the hull as a density supported on the arc.
    pub density: TorusMeasure,
}

/// Smallest concave majorant, via the upper hull of the knots.
pub fn concave_envelope(f: &CumulativeFunction) -> Result<Envelope> {
    if f.knots.windows(2).any(|w| w[1].1 < w[0].1) {
        return Err(Error::Domain("cumulative function decreases".into()));
    }
    let mut hull: Vec<(Q, Q)> = Vec::with_capacity(f.knots.len());
    for p in &f.knots {
        while hull.len() >= 2 {
            let (ax, ay) = &hull[hull.len() - 2];
            let (bx, by) = &hull[hull.len() - 1];
            // Drop b unless it lies strictly above the chord a→p.
            let cross = (bx - ax) * (&p.1 - ay) - (by - ay) * (&p.0 - ax);
            if cross.is_negative() {
                break;
            }
            hull.pop();
        }
        hull.push(p.clone());
    }
    let hull = CumulativeFunction {
        base: f.base.clone(),
        knots: hull,
    };
    let arcs: Vec<(Q, Q, Q)> = hull
        .knots
        .windows(2)
        .zip(hull.slopes())
        .map(|(w, s)| (&f.base.start + &w[0].0, &w[1].0 - &w[0].0, s))
        .collect();
    let density = TorusMeasure::sum_of_arcs(&arcs)?;
    Ok(Envelope { hull, density })
}

/// `rho` with each plateau arc replaced by the envelope of its cumulative.
pub fn patch_with_envelopes(
    rho: &TorusMeasure,
    plateaus: &PlateauDecomposition,
) -> Result<TorusMeasure> {
    let mut envs = Vec::with_capacity(plateaus.intervals.len());
    for arc in &plateaus.intervals {
        envs.push(concave_envelope(&cumulative(rho, arc)?)?);
    }
    let grid = Grid::new(
        rho.breakpoints().iter().cloned().chain(envs.iter().flat_map(|e| {
            e.hull
                .knots
                .iter()
                .map(|(x, _)| &e.hull.base.start + x)
                .collect::<Vec<_>>()
        })),
    );
    TorusMeasure::tabulate(&grid, |mid| match plateaus.locate(mid) {
        Some(i) => envs[i].density.density_at(mid).clone(),
        None => rho.density_at(mid).clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn chi(a: Q, b: Q) -> TorusMeasure {
        let len = &b - &a;
        TorusMeasure::arc_indicator(&a, &len, &qi(1)).unwrap()
    }

    #[test]
    fn plateau_examples() {
        let r1 = chi(q(1, 4), q(1, 2));
        let r2 = chi(q(1, 4), qi(1));
        let p = plateau_set(&r1, &r2).unwrap();
        assert_eq!(p.intervals, vec![ClosedArc::new(qi(0), q(1, 2))]);
        assert!(!p.full);

        let same = plateau_set(&r1, &r1).unwrap();
        assert!(same.full);

        let c = plateau_set(
            &TorusMeasure::constant(q(1, 4)),
            &TorusMeasure::constant(q(1, 2)),
        )
        .unwrap();
        assert!(c.is_empty());
        assert!(plateau_set(&TorusMeasure::atomic(vec![(qi(0), qi(1))]).unwrap(), &r1).is_err());
    }

    #[test]
    fn plateau_wraps_once() {
        let r1 = chi(q(1, 4), q(3, 4));
        let r2 = TorusMeasure::sum_of_arcs(&[
            (q(1, 4), q(1, 2), qi(1)),
            (q(3, 8), q(1, 8), qi(1)),
        ])
        .unwrap();
        let p = plateau_set(&r1, &r2).unwrap();
        // Equal on [1/4,3/8], [1/2,3/4] and the zero region, which joins both.
        assert_eq!(p.intervals, vec![ClosedArc::new(q(1, 2), q(7, 8))]);
        assert_eq!(p.intervals.iter().filter(|a| a.wraps()).count(), 1);
    }

    #[test]
    fn approximate_plateaus() {
        let a = TorusMeasure::constant(q(1000, 1000));
        let b = TorusMeasure::constant(q(1001, 1000));
        assert!(plateau_set(&a, &b).unwrap().is_empty());
        assert!(plateau_set_with_tol(&a, &b, &q(1, 100)).unwrap().full);
    }

    #[test]
    fn cumulative_examples() {
        let c = cumulative(&TorusMeasure::constant(q(1, 3)), &ClosedArc::new(qi(0), q(1, 2))).unwrap();
        assert_eq!(c.knots, vec![(qi(0), qi(0)), (q(1, 2), q(1, 6))]);
        let r = chi(q(1, 4), q(1, 2));
        let c = cumulative(&r, &ClosedArc::new(qi(0), q(1, 2))).unwrap();
        assert_eq!(
            c.knots,
            vec![(qi(0), qi(0)), (q(1, 4), qi(0)), (q(1, 2), q(1, 4))]
        );
        assert_eq!(c.eval(&q(3, 8)), Some(q(1, 8)));
        assert_eq!(c.eval(&q(3, 4)), None);
    }

    #[test]
    fn envelope_examples() {
        let r = chi(q(1, 4), q(1, 2));
        let arc = ClosedArc::new(qi(0), q(1, 2));
        let e = concave_envelope(&cumulative(&r, &arc).unwrap()).unwrap();
        assert_eq!(e.hull.knots, vec![(qi(0), qi(0)), (q(1, 2), q(1, 4))]);
        assert_eq!(
            e.density,
            TorusMeasure::arc_indicator(&qi(0), &q(1, 2), &q(1, 2)).unwrap()
        );
        let again = concave_envelope(&e.hull).unwrap();
        assert_eq!(again.hull, e.hull);
    }

    #[test]
    fn envelope_rejects_decreasing() {
        let f = CumulativeFunction {
            base: ClosedArc::new(qi(0), qi(1)),
            knots: vec![(qi(0), qi(0)), (q(1, 2), qi(1)), (qi(1), q(1, 2))],
        };
        assert!(concave_envelope(&f).is_err());
    }

    #[test]
    fn patching_on_the_example() {
        let r1 = chi(q(1, 4), q(1, 2));
        let r2 = chi(q(1, 4), qi(1));
        let p = plateau_set(&r1, &r2).unwrap();
        let patched = patch_with_envelopes(&r1, &p).unwrap();
        assert_eq!(
            patched,
            TorusMeasure::arc_indicator(&qi(0), &q(1, 2), &q(1, 2)).unwrap()
        );
    }
}
