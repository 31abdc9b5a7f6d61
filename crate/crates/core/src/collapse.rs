//! The collapsing operator `C_{η₂}[η₁]` on particle configurations, point
//! configurations and measures, its flux `J`, and the k-fold composition.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Dominance, OrderedTuple, PointConfig, TorusConfig};
use crate::measure::{Grid, TorusMeasure};
use crate::rational::{fmt_q, max_q, one, pos_part, qi, zero, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxDomain {
    /// Sites `0..N`; `J(x)` is the flux across the bond `(x, x+1)`.
    Sites(usize),
    /// Refined breakpoint grid of two measures; `J` is linear between points.
    Measure,
}

/// Maximal interval where `J > 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FluxInterval {
    pub left: Q,
    pub right: Q,
    pub left_closed: bool,
    pub right_closed: bool,
}

impl FluxInterval {
    pub fn describe(&self) -> String {
        format!(
            "{}{}, {}{}",
            if self.left_closed { "[" } else { "(" },
            fmt_q(&self.left),
            fmt_q(&self.right),
            if self.right_closed { "]" } else { ")" }
        )
    }

    /// Length in the measure regime; equal ends mean the torus minus a point.
    pub fn length(&self) -> Q {
        let len = crate::rational::arc_len(&self.left, &self.right);
        if len.is_zero() {
            one()
        } else {
            len
        }
    }
}

impl Serialize for FluxInterval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.describe().serialize(s)
    }
}

/// Flux of the first layer through the second.
///
/// `values[i] = J(p_i)` and `left_limits[i] = J(p_i⁻)` at every position;
/// in the measure regime `J` is linear on each open cell `(p_i, p_{i+1})`.
/// The signed measure `γ = ρ₁ − C` has atom `J(p_i) − J(p_i⁻)` at `p_i` and
/// mass `J(p_{i+1}⁻) − J(p_i)` on the cell after it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FluxProfile {
    pub domain: FluxDomain,
    pub positions: Vec<Q>,
    pub values: Vec<Q>,
    pub left_limits: Vec<Q>,
    pub intervals: Vec<FluxInterval>,
}

impl FluxProfile {
    fn next_left_limit(&self, i: usize) -> &Q {
        &self.left_limits[(i + 1) % self.positions.len()]
    }

    pub fn gamma_atoms(&self) -> Vec<Q> {
        self.values
            .iter()
            .zip(&self.left_limits)
            .map(|(v, l)| v - l)
            .collect()
    }

    pub fn gamma_cells(&self) -> Vec<Q> {
        match self.domain {
            FluxDomain::Sites(_) => vec![zero(); self.positions.len()],
            FluxDomain::Measure => (0..self.positions.len())
                .map(|i| self.next_left_limit(i) - &self.values[i])
                .collect(),
        }
    }

    /// Total mass of `γ`; zero by conservation.
    pub fn gamma_total(&self) -> Q {
        self.gamma_atoms()
            .into_iter()
            .chain(self.gamma_cells())
            .fold(zero(), |a, b| a + b)
    }

    /// `J(v)` for any `v` in the measure regime (right-continuous).
    pub fn eval(&self, v: &Q) -> Q {
        let v = crate::rational::wrap_unit(v);
        let i = match self.positions.binary_search(&v) {
            Ok(i) => return self.values[i].clone(),
            Err(0) => self.positions.len() - 1,
            Err(i) => i - 1,
        };
        if matches!(self.domain, FluxDomain::Sites(_)) {
            return self.values[i].clone();
        }
        let a = &self.positions[i];
        let b = self.positions.get(i + 1).cloned().unwrap_or_else(|| &self.positions[0] + one());
        let t = (crate::rational::wrap_unit(&(&v - a))) / (b - a);
        &self.values[i] + (self.next_left_limit(i) - &self.values[i]) * t
    }

    /// Integer flux values in the discrete regime.
    pub fn site_values(&self) -> Vec<i64> {
        self.values
            .iter()
            .map(|v| {
                use num_traits::ToPrimitive;
                v.to_integer().to_i64().expect("site flux fits i64")
            })
            .collect()
    }
}

impl Serialize for FluxProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("FluxProfile", 6)?;
        st.serialize_field("domain", &self.domain)?;
        st.serialize_field(
            "positions",
            &self.positions.iter().map(fmt_q).collect::<Vec<_>>(),
        )?;
        st.serialize_field("J", &self.values.iter().map(fmt_q).collect::<Vec<_>>())?;
        st.serialize_field(
            "J_left",
            &self.left_limits.iter().map(fmt_q).collect::<Vec<_>>(),
        )?;
        st.serialize_field("positive_set", &self.intervals)?;
        st.serialize_field(
            "gamma",
            &serde_json_like_gamma(self),
        )?;
        st.end()
    }
}

fn serde_json_like_gamma(p: &FluxProfile) -> Vec<[String; 2]> {
    p.gamma_atoms()
        .iter()
        .zip(p.gamma_cells())
        .map(|(a, c)| [fmt_q(a), fmt_q(&c)])
        .collect()
}

fn check_counts(m1: usize, m2: usize) -> Result<()> {
    if m1 > m2 {
        return Err(Error::MassOrder {
            first: m1.to_string(),
            second: m2.to_string(),
        });
    }
    Ok(())
}

fn check_rings(a: &TorusConfig, b: &TorusConfig) -> Result<()> {
    if a.ring() != b.ring() {
        return Err(Error::SizeMismatch(a.ring(), b.ring()));
    }
    Ok(())
}

/// Movement-rule collapse. `order` lists η₁'s particles (indexed by
/// ascending initial site) by priority; `None` means ascending order.
pub fn collapse_discrete_algorithmic(
    eta1: &TorusConfig,
    eta2: &TorusConfig,
    order: Option<&[usize]>,
) -> Result<TorusConfig> {
    check_rings(eta1, eta2)?;
    check_counts(eta1.particles(), eta2.particles())?;
    let n = eta1.ring();
    let mut pos = eta1.sites();
    let m = pos.len();
    let order: Vec<usize> = match order {
        None => (0..m).collect(),
        Some(o) => {
            let mut seen = vec![false; m];
            if o.len() != m || o.iter().any(|&i| i >= m || std::mem::replace(&mut seen[i], true)) {
                return Err(Error::InvalidConfig(format!(
                    "order must be a permutation of 0..{m}"
                )));
            }
            o.to_vec()
        }
    };
    let mut cur = eta1.clone();
    while let Some(&p) = order.iter().find(|&&p| !eta2.get(pos[p])) {
        let from = pos[p];
        let to = (1..n)
            .map(|d| (from + d) % n)
            .find(|&y| eta2.get(y) && !cur.get(y))
            .ok_or_else(|| Error::Internal("no free second-layer site".into()))?;
        cur.set(from, false);
        cur.set(to, true);
        pos[p] = to;
    }
    Ok(cur)
}

/// `J(x) = sup_y [E(y, x)]₊` via `J(x) = [J(x−1) + η₁(x) − η₂(x)]₊`, two laps.
pub fn discrete_flux_values(eta1: &TorusConfig, eta2: &TorusConfig) -> Result<Vec<i64>> {
    check_rings(eta1, eta2)?;
    check_counts(eta1.particles(), eta2.particles())?;
    let n = eta1.ring();
    let mut j = vec![0i64; n];
    let mut prev = 0i64;
    for step in 0..2 * n {
        let x = step % n;
        prev = (prev + eta1.value(x) - eta2.value(x)).max(0);
        j[x] = prev;
    }
    Ok(j)
}

fn positive_runs(pos: &[bool]) -> Vec<(usize, usize)> {
    let n = pos.len();
    let Some(start) = pos.iter().position(|p| !p) else {
        return Vec::new();
    };
    let mut runs = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    for step in 1..=n {
        let i = (start + step) % n;
        if pos[i] {
            run = Some(match run {
                Some((a, len)) => (a, len + 1),
                None => (i, 1),
            });
        } else if let Some(r) = run.take() {
            runs.push(r);
        }
    }
    runs.sort();
    runs
}

/// Collapse through the flux formula: `ξ(x) = η₁(x) + J(x−1) − J(x)`.
pub fn collapse_discrete_flux(
    eta1: &TorusConfig,
    eta2: &TorusConfig,
) -> Result<(TorusConfig, FluxProfile)> {
    let j = discrete_flux_values(eta1, eta2)?;
    let n = j.len();
    let mut bits = Vec::with_capacity(n);
    for x in 0..n {
        let v = eta1.value(x) + j[(x + n - 1) % n] - j[x];
        if !(0..=1).contains(&v) {
            return Err(Error::Internal(format!("occupation {v} at site {x}")));
        }
        bits.push(v == 1);
    }
    let positive: Vec<bool> = j.iter().map(|&v| v > 0).collect();
    if positive.iter().all(|&p| p) {
        return Err(Error::Internal("flux positive on the whole ring".into()));
    }
    let intervals = positive_runs(&positive)
        .into_iter()
        .map(|(a, len)| FluxInterval {
            left: qi(a as i64),
            right: qi(((a + len - 1) % n) as i64),
            left_closed: true,
            right_closed: true,
        })
        .collect();
    let profile = FluxProfile {
        domain: FluxDomain::Sites(n),
        positions: (0..n).map(|x| qi(x as i64)).collect(),
        values: j.iter().map(|&v| qi(v)).collect(),
        left_limits: (0..n).map(|x| qi(j[(x + n - 1) % n])).collect(),
        intervals,
    };
    Ok((TorusConfig::from_bits(bits)?, profile))
}

/// Intervals `[a, b]` (all `N²`, `b = a − 1` being the whole ring) on which
/// `Σ ξ = Σ η₁ + J(a−1) − J(b)` fails.
pub fn ledger_mismatches(eta1: &TorusConfig, xi: &TorusConfig, flux: &[i64]) -> Result<usize> {
    let n = eta1.ring();
    if xi.ring() != n || flux.len() != n {
        return Err(Error::SizeMismatch(n, xi.ring().max(flux.len())));
    }
    let mut bad = 0;
    for a in 0..n {
        let (mut sx, mut se) = (0i64, 0i64);
        for len in 1..=n {
            let b = (a + len - 1) % n;
            sx += xi.value(b);
            se += eta1.value(b);
            if sx != se + flux[(a + n - 1) % n] - flux[b] {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

/// Collapse of point configurations. Points are ranked on their joint
/// cyclic order and collapsed as particle configurations on that ring.
pub fn collapse_points(x: &PointConfig, y: &PointConfig) -> Result<PointConfig> {
    check_counts(x.len(), y.len())?;
    if x.is_empty() {
        return Ok(PointConfig::empty());
    }
    let mut all: Vec<Q> = x.points().iter().chain(y.points()).cloned().collect();
    all.sort();
    all.dedup();
    let eta1 = TorusConfig::from_bits(all.iter().map(|p| x.contains(p)).collect())?;
    let eta2 = TorusConfig::from_bits(all.iter().map(|p| y.contains(p)).collect())?;
    let (xi, _) = collapse_discrete_flux(&eta1, &eta2)?;
    Ok(PointConfig::from_sorted_unchecked(
        xi.sites().into_iter().map(|s| all[s].clone()).collect(),
    ))
}

/// How the measure flux is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluxMethod {
    /// Cyclic recurrence along the grid, linear in the number of cells.
    #[default]
    Recurrence,
    /// Supremum over all candidate left endpoints, quadratic.
    Enumeration,
}

struct PairGrid {
    grid: Grid,
    /// `ρ₁ − ρ₂` density on each cell.
    slope: Vec<Q>,
    /// `ρ₁ − ρ₂` atom at each grid point.
    atom: Vec<Q>,
}

impl PairGrid {
    fn new(rho1: &TorusMeasure, rho2: &TorusMeasure) -> Self {
        let grid = Grid::common(&[rho1, rho2]);
        let slope = grid
            .points
            .iter()
            .map(|g| rho1.density_at(g) - rho2.density_at(g))
            .collect();
        let atom = grid
            .points
            .iter()
            .map(|g| rho1.atom_at(g) - rho2.atom_at(g))
            .collect();
        Self { grid, slope, atom }
    }
}

/// `(J(g), J(g⁻))` at every grid point by the cyclic recurrence.
fn flux_by_recurrence(pg: &PairGrid) -> (Vec<Q>, Vec<Q>) {
    let n = pg.grid.cells();
    let mut val = vec![zero(); n];
    let mut left = vec![zero(); n];
    let mut j = zero();
    for step in 0..2 * n {
        let i = step % n;
        let jl = j;
        let jv = pos_part(&(&jl + &pg.atom[i]));
        j = pos_part(&(&jv + &pg.slope[i] * pg.grid.width(i)));
        left[i] = jl;
        val[i] = jv;
    }
    (val, left)
}

/// `(J(g), J(g⁻))` at every grid point by maximizing `E(u, ·)` over the
/// candidate left ends `u ∈ {g_i, g_i⁺}`.
fn flux_by_enumeration(pg: &PairGrid) -> (Vec<Q>, Vec<Q>) {
    use rayon::prelude::*;
    let n = pg.grid.cells();
    // lebesgue[i] = (ρ₁−ρ₂)-density mass of [0, g_i); atoms[i] = atom mass on [0, g_i).
    let mut lebesgue = vec![zero(); n + 1];
    let mut atoms = vec![zero(); n + 1];
    for i in 0..n {
        lebesgue[i + 1] = &lebesgue[i] + &pg.slope[i] * pg.grid.width(i);
        atoms[i + 1] = &atoms[i] + &pg.atom[i];
    }
    let total = &lebesgue[n] + &atoms[n];
    // Mass of [g_i, g_j) for i ≠ j, cyclic.
    let half_open = |i: usize, j: usize| -> Q {
        if i < j {
            (&lebesgue[j] - &lebesgue[i]) + (&atoms[j] - &atoms[i])
        } else {
            &total - ((&lebesgue[i] - &lebesgue[j]) + (&atoms[i] - &atoms[j]))
        }
    };
    let per_point: Vec<(Q, Q)> = (0..n)
        .into_par_iter()
        .map(|v| {
            // Closed arcs [u, v] and left-open (u, v]; u → v⁺ spans the whole torus.
            let mut jv = max_q(&zero(), &pg.atom[v]);
            jv = max_q(&jv, &total);
            // Arcs [u, v) and (u, v); u → v⁺ spans everything but the atom at v.
            let mut jl = max_q(&zero(), &(&total - &pg.atom[v]));
            for u in (0..n).filter(|&u| u != v) {
                let e_open_right = half_open(u, v);
                let without_u = &e_open_right - &pg.atom[u];
                jl = max_q(&jl, &max_q(&e_open_right, &without_u));
                let closed = &e_open_right + &pg.atom[v];
                let closed_without_u = &without_u + &pg.atom[v];
                jv = max_q(&jv, &max_q(&closed, &closed_without_u));
            }
            (jv, jl)
        })
        .collect();
    per_point.into_iter().unzip()
}

/// Flux of `ρ₁` through `ρ₂`.
pub fn flux_measure(
    rho1: &TorusMeasure,
    rho2: &TorusMeasure,
    method: FluxMethod,
) -> Result<FluxProfile> {
    let (m1, m2) = (rho1.total_mass(), rho2.total_mass());
    if m1 > m2 {
        return Err(Error::MassOrder {
            first: fmt_q(&m1),
            second: fmt_q(&m2),
        });
    }
    let pg = PairGrid::new(rho1, rho2);
    let (val, left) = match method {
        FluxMethod::Recurrence => flux_by_recurrence(&pg),
        FluxMethod::Enumeration => flux_by_enumeration(&pg),
    };
    build_measure_profile(&pg, val, left)
}

/// Insert the interior zero crossings of `J` and classify the positive set.
fn build_measure_profile(pg: &PairGrid, val: Vec<Q>, left: Vec<Q>) -> Result<FluxProfile> {
    let n = pg.grid.cells();
    let mut positions = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut left_limits = Vec::with_capacity(n);
    for i in 0..n {
        positions.push(pg.grid.left(i).clone());
        values.push(val[i].clone());
        left_limits.push(left[i].clone());
        let next_left = &left[(i + 1) % n];
        if val[i].is_positive() && next_left.is_zero() {
            let s = &pg.slope[i];
            let x = pg.grid.left(i) + &val[i] / -s;
            if x < pg.grid.right(i) {
                positions.push(x);
                values.push(zero());
                left_limits.push(zero());
            }
        }
    }
    // Elements in cyclic order: point p_i (index 2i), open cell after it (2i+1).
    let m = positions.len();
    let next_left = |i: usize| &left_limits[(i + 1) % m];
    let positive: Vec<bool> = (0..2 * m)
        .map(|e| {
            let i = e / 2;
            if e % 2 == 0 {
                values[i].is_positive()
            } else {
                values[i].is_positive() || next_left(i).is_positive()
            }
        })
        .collect();
    if positive.iter().all(|&p| p) {
        return Err(Error::Internal("flux positive on the whole torus".into()));
    }
    let intervals = positive_runs(&positive)
        .into_iter()
        .map(|(a, len)| {
            let last = (a + len - 1) % (2 * m);
            if last % 2 == 0 {
                return Err(Error::Internal("flux not right-continuous".into()));
            }
            Ok(FluxInterval {
                left: positions[a / 2].clone(),
                right: positions[(last / 2 + 1) % m].clone(),
                left_closed: a % 2 == 0,
                right_closed: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FluxProfile {
        domain: FluxDomain::Measure,
        positions,
        values,
        left_limits,
        intervals,
    })
}

/// `ρ₁ − γ`: the collapsed measure read off the flux.
fn measure_from_flux(rho1: &TorusMeasure, flux: &FluxProfile) -> Result<TorusMeasure> {
    let grid = Grid::new(flux.positions.iter().cloned());
    let cells = flux.gamma_cells();
    let gatoms = flux.gamma_atoms();
    let mut dens = Vec::with_capacity(grid.cells());
    let mut atoms = Vec::new();
    for (ci, g) in grid.points.iter().enumerate() {
        let i = flux.positions.binary_search(g).map_err(|_| {
            Error::Internal("flux positions must contain 0".into())
        })?;
        debug_assert_eq!(ci, i);
        let d = rho1.density_at(g) - &cells[i] / grid.width(ci);
        let a = rho1.atom_at(g) - &gatoms[i];
        if d.is_negative() || a.is_negative() {
            return Err(Error::Internal(format!(
                "negative collapsed mass near {}",
                fmt_q(g)
            )));
        }
        dens.push(d);
        if a.is_positive() {
            atoms.push((g.clone(), a));
        }
    }
    TorusMeasure::from_grid(&grid, dens, atoms)
}

/// Collapse of `ρ₁` onto `ρ₂` by the mass-balance ledger
/// `C([u,v]) = ρ₁([u,v]) + J(u⁻) − J(v)`.
pub fn collapse_measure(
    rho1: &TorusMeasure,
    rho2: &TorusMeasure,
) -> Result<(TorusMeasure, FluxProfile)> {
    collapse_measure_with(rho1, rho2, FluxMethod::Recurrence)
}

pub fn collapse_measure_with(
    rho1: &TorusMeasure,
    rho2: &TorusMeasure,
    method: FluxMethod,
) -> Result<(TorusMeasure, FluxProfile)> {
    let flux = flux_measure(rho1, rho2, method)?;
    let c = measure_from_flux(rho1, &flux)?;
    Ok((c, flux))
}

/// `ρ₁ χ_{𝒥ᶜ} + ρ₂ χ_𝒥 + Σᵢ (ρ₁(𝒥ᵢ) − ρ₂(𝒥ᵢ)) δ_{rᵢ}` for the positive set
/// `𝒥` recorded in `flux`.
pub fn positive_set_representation(
    rho1: &TorusMeasure,
    rho2: &TorusMeasure,
    flux: &FluxProfile,
) -> Result<TorusMeasure> {
    let ivs = &flux.intervals;
    let grid = Grid::common(&[rho1, rho2])
        .refine(ivs.iter().flat_map(|iv| [iv.left.clone(), iv.right.clone()]));
    let in_open = |x: &Q, iv: &FluxInterval| {
        let off = crate::rational::wrap_unit(&(x - &iv.left));
        let len = iv.length();
        off.is_positive() && off < len
    };
    let in_set = |x: &Q, is_point: bool| {
        ivs.iter()
            .any(|iv| in_open(x, iv) || (is_point && iv.left_closed && &iv.left == x))
    };
    let two = qi(2);
    let dens: Vec<Q> = (0..grid.cells())
        .map(|i| {
            let mid = (grid.left(i) + grid.right(i)) / &two;
            if in_set(&mid, false) {
                rho2.density_at(&mid).clone()
            } else {
                rho1.density_at(&mid).clone()
            }
        })
        .collect();
    let mut atoms: Vec<(Q, Q)> = Vec::new();
    for g in &grid.points {
        let a = if in_set(g, true) {
            rho2.atom_at(g)
        } else {
            rho1.atom_at(g)
        };
        let extra = ivs
            .iter()
            .filter(|iv| &iv.right == g)
            .map(|iv| {
                let len = iv.length();
                let mass = |r: &TorusMeasure| {
                    r.lebesgue_arc(&iv.left, &len) + r.atoms_arc(&iv.left, &len, iv.left_closed, false)
                };
                mass(rho1) - mass(rho2)
            })
            .fold(zero(), |x, y| x + y);
        let total = a + extra;
        if total.is_negative() {
            return Err(Error::Internal(format!(
                "negative atom in representation at {}",
                fmt_q(g)
            )));
        }
        if total.is_positive() {
            atoms.push((g.clone(), total));
        }
    }
    TorusMeasure::from_grid(&grid, dens, atoms)
}

/// Objects that can be collapsed onto a larger one.
pub trait Collapsible: Clone + Dominance {
    fn mass(&self) -> Q;
    fn collapse_onto(&self, upper: &Self) -> Result<Self>;
}

impl Collapsible for TorusConfig {
    fn mass(&self) -> Q {
        qi(self.particles() as i64)
    }

    fn collapse_onto(&self, upper: &Self) -> Result<Self> {
        collapse_discrete_flux(self, upper).map(|(c, _)| c)
    }
}

impl Collapsible for PointConfig {
    fn mass(&self) -> Q {
        qi(self.len() as i64)
    }

    fn collapse_onto(&self, upper: &Self) -> Result<Self> {
        collapse_points(self, upper)
    }
}

impl Collapsible for TorusMeasure {
    fn mass(&self) -> Q {
        self.total_mass()
    }

    fn collapse_onto(&self, upper: &Self) -> Result<Self> {
        collapse_measure(self, upper).map(|(c, _)| c)
    }
}

/// `ξ_k = η_k`, `ξ_j = C_{η_k}[⋯ C_{η_{j+1}}[η_j] ⋯]`.
pub fn collapse_k<T: Collapsible>(parts: &[T]) -> Result<OrderedTuple<T>> {
    for w in parts.windows(2) {
        let (a, b) = (w[0].mass(), w[1].mass());
        if a > b {
            return Err(Error::MassOrder {
                first: fmt_q(&a),
                second: fmt_q(&b),
            });
        }
    }
    let k = parts.len();
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let mut cur = parts[j].clone();
        for upper in &parts[j + 1..] {
            cur = cur.collapse_onto(upper)?;
        }
        out.push(cur);
    }
    OrderedTuple::new(out).map_err(|e| Error::Internal(format!("collapsed tuple not ordered: {e}")))
}

/// Empirical measures commute with `ℂ_k` for particle configurations.
pub fn commutation_check_configs(parts: &[TorusConfig]) -> Result<bool> {
    let n = parts.first().map_or(1, TorusConfig::ring);
    let lhs: Vec<TorusMeasure> = collapse_k(parts)?
        .parts()
        .iter()
        .map(|c| crate::dynamics::empirical_config(c, n))
        .collect();
    let pushed: Vec<TorusMeasure> = parts
        .iter()
        .map(|c| crate::dynamics::empirical_config(c, n))
        .collect();
    let rhs = collapse_k(&pushed)?.into_parts();
    Ok(lhs == rhs)
}

/// Empirical measures (scale `n`) commute with `ℂ_k` for point configurations.
pub fn commutation_check_points(parts: &[PointConfig], n: usize) -> Result<bool> {
    let lhs: Vec<TorusMeasure> = collapse_k(parts)?
        .parts()
        .iter()
        .map(|c| crate::dynamics::empirical_points(c, n))
        .collect();
    let pushed: Vec<TorusMeasure> = parts
        .iter()
        .map(|c| crate::dynamics::empirical_points(c, n))
        .collect();
    let rhs = collapse_k(&pushed)?.into_parts();
    Ok(lhs == rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn cfg(n: usize, s: &[usize]) -> TorusConfig {
        TorusConfig::from_sites(n, s).unwrap()
    }

    #[test]
    fn discrete_examples() {
        let (a, b) = (cfg(6, &[0, 3]), cfg(6, &[1, 2, 5]));
        assert_eq!(collapse_discrete_algorithmic(&a, &b, None).unwrap(), cfg(6, &[1, 5]));
        let (c, flux) = collapse_discrete_flux(&a, &b).unwrap();
        assert_eq!(c, cfg(6, &[1, 5]));
        assert_eq!(flux.site_values()[0], 1);
        assert_eq!(flux.site_values()[1], 0);
        assert_eq!(flux.gamma_total(), zero());

        let (a, b) = (cfg(4, &[2]), cfg(4, &[0, 1]));
        assert_eq!(collapse_discrete_algorithmic(&a, &b, None).unwrap(), cfg(4, &[0]));
        assert_eq!(collapse_discrete_flux(&a, &b).unwrap().0, cfg(4, &[0]));

        let (a, b) = (cfg(5, &[1]), cfg(5, &[1, 3]));
        assert_eq!(collapse_discrete_algorithmic(&a, &b, None).unwrap(), a);
        let (c, flux) = collapse_discrete_flux(&b, &b).unwrap();
        assert_eq!(c, b);
        assert!(flux.intervals.is_empty());
    }

    #[test]
    fn discrete_rejects_bad_input() {
        let (a, b) = (cfg(4, &[0, 1]), cfg(4, &[2]));
        assert!(matches!(
            collapse_discrete_flux(&a, &b),
            Err(Error::MassOrder { .. })
        ));
        assert!(collapse_discrete_algorithmic(&b, &cfg(5, &[1]), None).is_err());
        assert!(collapse_discrete_algorithmic(&b, &a, Some(&[1])).is_err());
    }

    #[test]
    fn point_example() {
        let x = PointConfig::new(vec![q(3, 10)]).unwrap();
        let y = PointConfig::new(vec![q(1, 10), q(4, 10)]).unwrap();
        assert_eq!(
            collapse_points(&x, &y).unwrap(),
            PointConfig::new(vec![q(2, 5)]).unwrap()
        );
        assert_eq!(collapse_points(&x, &x).unwrap(), x);
    }

    #[test]
    fn atomic_measure_examples() {
        let half = TorusMeasure::atomic(vec![(q(1, 2), qi(1))]).unwrap();
        let two = TorusMeasure::atomic(vec![(q(1, 2), qi(1)), (q(3, 4), qi(1))]).unwrap();
        let (c, _) = collapse_measure(&half, &two).unwrap();
        assert_eq!(c, half);
        for eps in [q(1, 10), q(1, 1000), q(1, 1_000_000)] {
            let shifted = TorusMeasure::atomic(vec![(q(1, 2) + eps, qi(1))]).unwrap();
            let (c, flux) = collapse_measure(&shifted, &two).unwrap();
            assert_eq!(c, TorusMeasure::atomic(vec![(q(3, 4), qi(1))]).unwrap());
            assert_eq!(flux.gamma_total(), zero());
        }
    }

    #[test]
    fn ordered_densities_are_fixed() {
        let r1 = TorusMeasure::arc_indicator(&q(1, 8), &q(1, 4), &q(1, 2)).unwrap();
        let r2 = TorusMeasure::constant(q(3, 4));
        let (c, flux) = collapse_measure(&r1, &r2).unwrap();
        assert_eq!(c, r1);
        assert!(flux.intervals.is_empty());
    }

    #[test]
    fn density_collapse_moves_excess_right() {
        // 1 on [0,1/4] onto 1/2 everywhere: the excess spreads right.
        let r1 = TorusMeasure::arc_indicator(&qi(0), &q(1, 4), &qi(1)).unwrap();
        let r2 = TorusMeasure::constant(q(1, 2));
        let (c, flux) = collapse_measure(&r1, &r2).unwrap();
        assert_eq!(c, TorusMeasure::arc_indicator(&qi(0), &q(1, 2), &q(1, 2)).unwrap());
        assert_eq!(flux.intervals.len(), 1);
        assert_eq!(flux.intervals[0].describe(), "(0, 1/2)");
        assert_eq!(flux.eval(&q(1, 4)), q(1, 8));
        let rep = positive_set_representation(&r1, &r2, &flux).unwrap();
        assert_eq!(rep, c);
        let (c2, flux2) = collapse_measure_with(&r1, &r2, FluxMethod::Enumeration).unwrap();
        assert_eq!((c2, flux2), (c, flux));
    }

    #[test]
    fn collapse_k_identity_on_equal_inputs() {
        let r = TorusMeasure::constant(q(1, 3));
        let t = collapse_k(&[r.clone(), r.clone(), r.clone()]).unwrap();
        assert_eq!(t.parts(), &[r.clone(), r.clone(), r]);
        let c = cfg(5, &[0, 2]);
        assert_eq!(collapse_k(&[c.clone(), c.clone()]).unwrap().parts(), &[c.clone(), c]);
    }
}
