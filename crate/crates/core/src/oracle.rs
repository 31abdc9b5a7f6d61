//! Brute-force minimizers of the variational rate formulas, used to check
//! the closed forms. All searches run over lattice profiles, so each value is
//! an upper bound for the true infimum.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::collapse::{collapse_k, collapse_measure, Collapsible};
use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::measure::{Grid, TorusMeasure};
use crate::rate::{membership_failure, s2, EntropyKernel};
use crate::rational::{fmt_q, q, qi, to_f64, Q};

/// Result of a lattice minimization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub value: f64,
    /// Distinct feasible candidates within `near_tol` of the best value.
    pub near_minimizers: usize,
    /// Feasible candidates examined.
    pub feasible: usize,
    /// Whether the search covered the whole lattice.
    pub exhaustive: bool,
}

/// Minimizer found by [`s2_dp_oracle`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpOracleResult {
    pub value: f64,
    /// Lattice minimizer `ψ₁`; collapses onto `ρ₁` under `ρ₂`.
    pub psi1: Option<TorusMeasure>,
}

/// `∫ kernel(ρ)` by cells.
fn integral(rho: &TorusMeasure, kernel: &EntropyKernel) -> f64 {
    let grid = Grid::new(rho.breakpoints().iter().cloned());
    (0..grid.cells())
        .map(|i| to_f64(&grid.width(i)) * kernel.eval(rho.density_at(grid.left(i))))
        .sum()
}

/// Two-class rate by dynamic programming over lattice cumulatives.
///
/// Minimizes `∫ K_{m₁}(ψ₁)` over profiles `ψ₁` that agree with `ρ₁` where the
/// two densities differ and, on each maximal run of equal cells, have a
/// cumulative dominating that of `ρ₁` with the same total. Cumulative values
/// live on the lattice `δℤ`, `δ = 1/resolution` (rounded up so that every
/// knot value of `ρ₁` is a lattice point).
pub fn s2_dp_oracle(
    rho1: &TorusMeasure,
    rho2: &TorusMeasure,
    m1: &Q,
    m2: &Q,
    family: Model,
    resolution: u64,
) -> Result<DpOracleResult> {
    let infinite = DpOracleResult {
        value: f64::INFINITY,
        psi1: None,
    };
    let k1 = EntropyKernel::new(family, m1.clone())?;
    let k2 = EntropyKernel::new(family, m2.clone())?;
    if m1 >= m2
        || membership_failure(rho1, m1, family).is_some()
        || membership_failure(rho2, m2, family).is_some()
        || !rho1.is_dominated_by(rho2)
    {
        return Ok(infinite);
    }
    let grid = Grid::common(&[rho1, rho2]);
    let n = grid.cells();
    let d1: Vec<Q> = rho1.densities_on(&grid);
    let d2: Vec<Q> = rho2.densities_on(&grid);
    let widths: Vec<Q> = (0..n).map(|i| grid.width(i)).collect();
    let equal: Vec<bool> = (0..n).map(|i| d1[i] == d2[i]).collect();

    let cell_masses = d1.iter().zip(&widths).map(|(d, w)| d * w);
    let den = cell_masses
        .fold(BigInt::from(resolution), |acc, x| acc.lcm(x.denom()));
    let delta = Q::new(1.into(), den.clone());
    let units = |x: &Q| -> usize {
        (x / &delta)
            .to_integer()
            .to_usize()
            .expect("lattice index fits")
    };

    let mut value = integral(rho2, &k2);
    let mut psi = d1.clone();
    let start = equal.iter().position(|e| !e).expect("masses differ");
    let mut i = 0;
    while i < n {
        let c = (start + i) % n;
        if !equal[c] {
            value += to_f64(&widths[c]) * k1.eval(&d1[c]);
            i += 1;
            continue;
        }
        let mut run = Vec::new();
        while i < n && equal[(start + i) % n] {
            run.push((start + i) % n);
            i += 1;
        }
        let (cost, dens) = dp_run(&run, &d1, &widths, &delta, &units, &k1, family)?;
        value += cost;
        for (c, d) in run.iter().zip(dens) {
            psi[*c] = d;
        }
    }
    let psi1 = TorusMeasure::from_grid(&grid, psi, Vec::new())?;
    Ok(DpOracleResult {
        value,
        psi1: Some(psi1),
    })
}

fn dp_run(
    run: &[usize],
    d1: &[Q],
    widths: &[Q],
    delta: &Q,
    units: &dyn Fn(&Q) -> usize,
    kernel: &EntropyKernel,
    family: Model,
) -> Result<(f64, Vec<Q>)> {
    // Lower bounds (exact lattice points) at every knot of the run.
    let mut lower = vec![0usize];
    let mut acc = Q::zero();
    for &c in run {
        acc += &d1[c] * &widths[c];
        lower.push(units(&acc));
    }
    let total = *lower.last().unwrap();
    let mut best = vec![f64::INFINITY; total + 1];
    best[0] = 0.0;
    let mut choice: Vec<Vec<u32>> = Vec::with_capacity(run.len());
    for (j, &c) in run.iter().enumerate() {
        let w = &widths[c];
        let wf = to_f64(w);
        let cap = match family {
            Model::Tasep => units(w).min(total),
            Model::Had => total,
        };
        let table: Vec<f64> = (0..=cap)
            .map(|a| wf * kernel.eval(&(qi(a as i64) * delta / w)))
            .collect();
        let mut next = vec![f64::INFINITY; total + 1];
        let mut arg = vec![u32::MAX; total + 1];
        for (u, &b) in best.iter().enumerate() {
            if !b.is_finite() {
                continue;
            }
            let amax = cap.min(total - u);
            for (a, &t) in table.iter().enumerate().take(amax + 1) {
                let v = u + a;
                let cand = b + t;
                if cand < next[v] {
                    next[v] = cand;
                    arg[v] = a as u32;
                }
            }
        }
        for (v, x) in next.iter_mut().enumerate() {
            if v < lower[j + 1] {
                *x = f64::INFINITY;
            }
        }
        best = next;
        choice.push(arg);
    }
    let cost = best[total];
    if !cost.is_finite() {
        return Err(Error::Internal("no lattice path on a plateau".into()));
    }
    let mut dens = vec![Q::zero(); run.len()];
    let mut u = total;
    for j in (0..run.len()).rev() {
        let a = choice[j][u] as usize;
        dens[j] = qi(a as i64) * delta / &widths[run[j]];
        u -= a;
    }
    Ok((cost, dens))
}

/// Lattice of candidate profiles: `cells` equal cells with densities in
/// `(1/quantum)ℤ`, capped at 1 for TASEP and at `had_cap` for HAD.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LatticeSpec {
    pub cells: usize,
    pub quantum: usize,
    pub had_cap: usize,
    /// Subdivision of each cell for the first layer.
    pub first_cell_factor: usize,
    /// Refinement of the density quantum for the first layer.
    pub first_quantum_factor: usize,
}

impl LatticeSpec {
    pub fn new(cells: usize, quantum: usize) -> Self {
        Self {
            cells,
            quantum,
            had_cap: 2,
            first_cell_factor: 1,
            first_quantum_factor: 1,
        }
    }

    pub fn with_first_layer(mut self, cell_factor: usize, quantum_factor: usize) -> Self {
        self.first_cell_factor = cell_factor.max(1);
        self.first_quantum_factor = quantum_factor.max(1);
        self
    }

    fn first_layer(&self) -> Self {
        Self {
            cells: self.cells * self.first_cell_factor,
            quantum: self.quantum * self.first_quantum_factor,
            had_cap: self.had_cap,
            first_cell_factor: 1,
            first_quantum_factor: 1,
        }
    }

    fn max_units(&self, family: Model) -> usize {
        match family {
            Model::Tasep => self.quantum,
            Model::Had => self.quantum * self.had_cap,
        }
    }
}

/// Upper limit on enumerated profiles per layer.
pub const LATTICE_MAX_PROFILES: usize = 200_000;

/// Every lattice profile of total mass `m`.
pub fn lattice_profiles(spec: &LatticeSpec, m: &Q, family: Model) -> Result<Vec<TorusMeasure>> {
    let per = qi((spec.cells * spec.quantum) as i64);
    let total = m * per;
    if !total.is_integer() || total.is_negative() {
        return Err(Error::InvalidConfig(format!(
            "mass {} is not on the lattice",
            fmt_q(m)
        )));
    }
    let total = total.to_integer().to_usize().expect("small");
    let cap = spec.max_units(family);
    let mut out = Vec::new();
    let mut cur = vec![0usize; spec.cells];
    fn rec(
        i: usize,
        left: usize,
        cap: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        limit: usize,
    ) -> bool {
        let n = cur.len();
        if i == n - 1 {
            if left <= cap {
                cur[i] = left;
                out.push(cur.clone());
            }
            return out.len() <= limit;
        }
        if left > cap * (n - i) {
            return true;
        }
        for a in 0..=left.min(cap) {
            cur[i] = a;
            if !rec(i + 1, left - a, cap, cur, out, limit) {
                return false;
            }
        }
        true
    }
    let mut raw = Vec::new();
    if !rec(0, total, cap, &mut cur, &mut raw, LATTICE_MAX_PROFILES) {
        return Err(Error::TooLarge(format!(
            "more than {LATTICE_MAX_PROFILES} lattice profiles"
        )));
    }
    let bps: Vec<Q> = (0..spec.cells)
        .map(|i| q(i as i64, spec.cells as i64))
        .collect();
    for v in raw {
        let dens = v
            .into_iter()
            .map(|a| q(a as i64, spec.quantum as i64))
            .collect();
        out.push(TorusMeasure::new(bps.clone(), dens, Vec::new())?);
    }
    Ok(out)
}

/// Tolerance for counting near-minimizers.
pub const NEAR_TOL: f64 = 1e-9;

/// Variational rate of a `k`-tuple (`k ≤ 3`) by lattice search.
///
/// `k = 1` is the closed form, `k = 2` the dynamic program of
/// [`s2_dp_oracle`], `k = 3` an exhaustive branch-and-bound over lattice
/// pairs `(ψ₁, ψ₂)` with `ℂ₃(ψ₁, ψ₂, ρ₃) = (ρ₁, ρ₂, ρ₃)`.
pub fn sk_oracle(
    parts: &[TorusMeasure],
    masses: &[Q],
    family: Model,
    lattice: &LatticeSpec,
) -> Result<OracleResult> {
    if parts.len() != masses.len() {
        return Err(Error::SizeMismatch(parts.len(), masses.len()));
    }
    let exact = |value: f64| OracleResult {
        value,
        near_minimizers: usize::from(value.is_finite()),
        feasible: usize::from(value.is_finite()),
        exhaustive: true,
    };
    match parts.len() {
        1 => Ok(exact(crate::rate::s1(
            &parts[0],
            &EntropyKernel::new(family, masses[0].clone())?,
        ))),
        2 => {
            let r = s2_dp_oracle(
                &parts[0],
                &parts[1],
                &masses[0],
                &masses[1],
                family,
                4096,
            )?;
            Ok(exact(r.value))
        }
        3 => s3_direct(parts, masses, family, lattice),
        k => Err(Error::TooLarge(format!("oracle supports k ≤ 3, got {k}"))),
    }
}

fn kernels(masses: &[Q], family: Model) -> Result<Vec<EntropyKernel>> {
    masses
        .iter()
        .map(|m| EntropyKernel::new(family, m.clone()))
        .collect()
}

fn domain_ok(parts: &[TorusMeasure], masses: &[Q], family: Model) -> bool {
    parts
        .iter()
        .zip(masses)
        .all(|(r, m)| membership_failure(r, m, family).is_none())
        && masses.windows(2).all(|w| w[0] <= w[1])
}

/// Feasible second layers: lattice `ψ₂` with `C_{ρ₃}[ψ₂] = ρ₂`, by cost.
fn second_layers(
    parts: &[TorusMeasure],
    masses: &[Q],
    kernel: &EntropyKernel,
    family: Model,
    lattice: &LatticeSpec,
) -> Result<Vec<(f64, TorusMeasure)>> {
    let mut out: Vec<(f64, TorusMeasure)> = Vec::new();
    for psi in lattice_profiles(lattice, &masses[1], family)? {
        if psi.collapse_onto(&parts[2])? == parts[1] {
            out.push((integral(&psi, kernel), psi));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Intermediate first layers `φ₁ = C_{ψ₂}[ψ₁]` over lattice `ψ₁` that
/// collapse onto `ρ₁` under `ρ₃`.
fn intermediate_firsts(
    parts: &[TorusMeasure],
    psi2: &TorusMeasure,
    firsts: &[TorusMeasure],
) -> Result<Vec<TorusMeasure>> {
    let mut seen: HashSet<TorusMeasure> = HashSet::new();
    let mut out = Vec::new();
    for psi1 in firsts {
        let phi1 = collapse_measure(psi1, psi2)?.0;
        if !seen.insert(phi1.clone()) {
            continue;
        }
        if collapse_measure(&phi1, &parts[2])?.0 == parts[0] {
            out.push(phi1);
        }
    }
    Ok(out)
}

/// Resolution of the cumulative lattice used for the first layer.
pub const DIRECT_RESOLUTION: u64 = 256;

fn s3_direct(
    parts: &[TorusMeasure],
    masses: &[Q],
    family: Model,
    lattice: &LatticeSpec,
) -> Result<OracleResult> {
    if !domain_ok(parts, masses, family) {
        return Ok(OracleResult {
            value: f64::INFINITY,
            near_minimizers: 0,
            feasible: 0,
            exhaustive: true,
        });
    }
    let ks = kernels(masses, family)?;
    let top = integral(&parts[2], &ks[2]);
    let seconds = second_layers(parts, masses, &ks[1], family, lattice)?;
    let firsts = lattice_profiles(&lattice.first_layer(), &masses[0], family)?;
    let mut values: Vec<f64> = Vec::new();
    for (c2, psi2) in &seconds {
        for phi1 in intermediate_firsts(parts, psi2, &firsts)? {
            let (v, psi1) = if masses[0] == masses[1] {
                // Equal masses collapse onto the upper layer whatever the
                // lower one is, so the flat profile is optimal.
                (*c2, TorusMeasure::constant(masses[0].clone()))
            } else {
                let r = s2_dp_oracle(&phi1, psi2, &masses[0], &masses[1], family, DIRECT_RESOLUTION)?;
                match r.psi1 {
                    Some(p) => (r.value, p),
                    None => continue,
                }
            };
            let image = collapse_k(&[psi1, psi2.clone(), parts[2].clone()])?.into_parts();
            if image != parts {
                return Err(Error::Internal(
                    "lattice minimizer does not reproduce the tuple".into(),
                ));
            }
            values.push(v);
        }
    }
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let near = values.iter().filter(|v| **v <= best + NEAR_TOL).count();
    Ok(OracleResult {
        value: top + best,
        near_minimizers: near,
        feasible: values.len(),
        exhaustive: true,
    })
}

/// Three-class rate through the two-class closed form:
/// `∫K_{m₃}(ρ₃) + inf {S₂(φ₁, φ₂) : C_{ρ₃}[φ₁] = ρ₁, C_{ρ₃}[φ₂] = ρ₂, φ₁ ⪯ φ₂}`,
/// with `φ₂` over lattice profiles and `φ₁` over lattice profiles and their
/// collapses onto `φ₂`.
pub fn s3_by_recursion(
    parts: &[TorusMeasure],
    masses: &[Q],
    family: Model,
    lattice: &LatticeSpec,
) -> Result<OracleResult> {
    if parts.len() != 3 || masses.len() != 3 {
        return Err(Error::InvalidConfig("recursion needs three layers".into()));
    }
    if !domain_ok(parts, masses, family) {
        return Ok(OracleResult {
            value: f64::INFINITY,
            near_minimizers: 0,
            feasible: 0,
            exhaustive: true,
        });
    }
    let ks = kernels(masses, family)?;
    let top = integral(&parts[2], &ks[2]);
    let seconds = second_layers(parts, masses, &ks[1], family, lattice)?;
    let firsts = lattice_profiles(&lattice.first_layer(), &masses[0], family)?;
    let mut best = f64::INFINITY;
    let mut values: Vec<f64> = Vec::new();
    for (_, phi2) in &seconds {
        for phi1 in intermediate_firsts(parts, phi2, &firsts)? {
            let v = s2(&phi1, phi2, &masses[0], &masses[1], family)?.value;
            values.push(v);
            best = best.min(v);
        }
    }
    let near = values.iter().filter(|v| **v <= best + NEAR_TOL).count();
    Ok(OracleResult {
        value: top + best,
        near_minimizers: near,
        feasible: values.len(),
        exhaustive: true,
    })
}

/// Values compared by the three-class contraction check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionK3 {
    /// `ρ₁* = C_{ρ₃}[C_{ρ₂}[m₁]]`.
    pub rho1: TorusMeasure,
    /// Oracle value of `S₃(ρ₁*, ρ₂, ρ₃)`.
    pub s3: f64,
    /// Closed form `S₂(ρ₂, ρ₃)`.
    pub s2: f64,
}

/// Minimizing the first layer out of `S₃` should give `S₂` of the upper
/// pair, with the minimum at the collapse of the flat profile.
pub fn contraction_check_k3(
    rho2: &TorusMeasure,
    rho3: &TorusMeasure,
    masses: &[Q; 3],
    family: Model,
    lattice: &LatticeSpec,
) -> Result<ContractionK3> {
    let flat = TorusMeasure::constant(masses[0].clone());
    let rho1 = collapse_measure(&collapse_measure(&flat, rho2)?.0, rho3)?.0;
    let parts = [rho1.clone(), rho2.clone(), rho3.clone()];
    let s3 = sk_oracle(&parts, masses, family, lattice)?.value;
    let s2v = s2(rho2, rho3, &masses[1], &masses[2], family)?.value;
    Ok(ContractionK3 { rho1, s3, s2: s2v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::s2;

    #[test]
    fn constant_tuples_are_zero() {
        let lat = LatticeSpec::new(4, 4);
        let ms = [q(1, 4), q(1, 2), q(3, 4)];
        let parts: Vec<TorusMeasure> = ms.iter().map(|m| TorusMeasure::constant(m.clone())).collect();
        for fam in [Model::Tasep, Model::Had] {
            for k in 1..=3 {
                let r = sk_oracle(&parts[..k], &ms[..k], fam, &lat).unwrap();
                assert!(r.value.abs() < 1e-12, "k={k}: {}", r.value);
            }
        }
    }

    #[test]
    fn dp_matches_closed_form_on_example() {
        let r1 = TorusMeasure::arc_indicator(&q(1, 4), &q(1, 4), &qi(1)).unwrap();
        let r2 = TorusMeasure::arc_indicator(&q(1, 4), &q(3, 4), &qi(1)).unwrap();
        let (m1, m2) = (q(1, 4), q(3, 4));
        let dp = s2_dp_oracle(&r1, &r2, &m1, &m2, Model::Tasep, 4096).unwrap();
        let closed = s2(&r1, &r2, &m1, &m2, Model::Tasep).unwrap().value;
        assert!((dp.value - closed).abs() < 1e-9, "{} vs {closed}", dp.value);
        let psi = dp.psi1.unwrap();
        assert_eq!(collapse_measure(&psi, &r2).unwrap().0, r1);
    }

    #[test]
    fn lattice_enumeration_counts() {
        let lat = LatticeSpec::new(3, 2);
        // Units 0..=2 per cell summing to 3: 7 compositions.
        assert_eq!(lattice_profiles(&lat, &q(1, 2), Model::Tasep).unwrap().len(), 7);
        assert!(lattice_profiles(&lat, &q(1, 5), Model::Tasep).is_err());
    }

    #[test]
    fn three_class_routes_agree_on_a_small_instance() {
        let lat = LatticeSpec::new(4, 4);
        let psi = [
            TorusMeasure::new(vec![qi(0), q(1, 4)], vec![qi(1), qi(0)], vec![]).unwrap(),
            TorusMeasure::new(
                vec![qi(0), q(1, 4), q(1, 2), q(3, 4)],
                vec![qi(0), qi(1), q(1, 2), q(1, 2)],
                vec![],
            )
            .unwrap(),
            TorusMeasure::constant(q(3, 4)),
        ];
        let rho = collapse_k(&psi).unwrap().into_parts();
        let ms = [q(1, 4), q(1, 2), q(3, 4)];
        let direct = sk_oracle(&rho, &ms, Model::Tasep, &lat).unwrap();
        let rec = s3_by_recursion(&rho, &ms, Model::Tasep, &lat).unwrap();
        assert!(direct.value.is_finite());
        assert!(rec.value <= direct.value + 1e-12);
        assert!(direct.value - rec.value < 1e-2, "{} vs {}", direct.value, rec.value);
    }

    #[test]
    fn contraction_without_plateaus() {
        let lat = LatticeSpec::new(4, 4);
        let r2 = TorusMeasure::new(vec![qi(0), q(1, 2)], vec![q(1, 4), q(3, 4)], vec![]).unwrap();
        let r3 = TorusMeasure::constant(qi(1));
        let ms = [q(1, 4), q(1, 2), qi(1)];
        let c = contraction_check_k3(&r2, &r3, &ms, Model::Tasep, &lat).unwrap();
        assert!((c.s3 - c.s2).abs() < 1e-9, "{} vs {}", c.s3, c.s2);
    }
}
