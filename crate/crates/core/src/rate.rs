//! Rate functionals of one- and two-class empirical profiles, their explicit
//! minimizers, exact finite-size decay rates and the nonconvexity certificate.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::collapse::collapse_measure;
use crate::dynamics::Model;
use crate::envelope::{
    cumulative, patch_with_envelopes, plateau_set_with_tol, ClosedArc, PlateauDecomposition,
};
use crate::error::{Error, Result};
use crate::measure::{Grid, TorusMeasure};
use crate::rational::{fmt_q, one, q, qi, to_f64, wrap_unit, zero, Q};

/// Per-site entropy density of a one-class profile.
///
/// TASEP: `h_m(x) = x log(x/m) + (1−x) log((1−x)/(1−m))` on `[0,1]`.
/// HAD: `k_m(x) = x log(x/m) − x + m` on `[0,∞)`; the affine part integrates
/// to zero against any profile of mass `m`, and keeps the density nonnegative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntropyKernel {
    pub family: Model,
    pub m: Q,
}

impl EntropyKernel {
    pub fn new(family: Model, m: Q) -> Result<Self> {
        let ok = match family {
            Model::Tasep => m.is_positive() && m <= one(),
            Model::Had => m.is_positive(),
        };
        if !ok {
            return Err(Error::Domain(format!(
                "mass parameter {} outside the admissible range",
                fmt_q(&m)
            )));
        }
        Ok(Self { family, m })
    }

    pub fn tasep(m: Q) -> Result<Self> {
        Self::new(Model::Tasep, m)
    }

    pub fn had(m: Q) -> Result<Self> {
        Self::new(Model::Had, m)
    }

    /// Kernel value at an exact density; `+∞` outside the domain.
    pub fn eval(&self, x: &Q) -> f64 {
        if x.is_negative() {
            return f64::INFINITY;
        }
        let xlog = |a: &Q, b: &Q| -> f64 {
            if a.is_zero() {
                0.0
            } else {
                to_f64(a) * to_f64(&(a / b)).ln()
            }
        };
        match self.family {
            Model::Tasep => {
                if x > &one() {
                    return f64::INFINITY;
                }
                let hole = one() - x;
                let mhole = one() - &self.m;
                if mhole.is_zero() {
                    return if hole.is_zero() { 0.0 } else { f64::INFINITY };
                }
                xlog(x, &self.m) + xlog(&hole, &mhole)
            }
            Model::Had => xlog(x, &self.m) - to_f64(x) + to_f64(&self.m),
        }
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let m = to_f64(&self.m);
        let xlog = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
        if x < 0.0 {
            return f64::INFINITY;
        }
        match self.family {
            Model::Tasep => {
                if x > 1.0 {
                    return f64::INFINITY;
                }
                if m == 1.0 {
                    return if x == 1.0 { 0.0 } else { f64::INFINITY };
                }
                xlog(x, m) + xlog(1.0 - x, 1.0 - m)
            }
            Model::Had => xlog(x, m) - x + m,
        }
    }
}

/// Why a profile lies outside the finite domain of the rate functional.
pub fn membership_failure(rho: &TorusMeasure, m: &Q, family: Model) -> Option<String> {
    if !rho.is_absolutely_continuous() {
        return Some("profile has atoms".into());
    }
    let mass = rho.total_mass();
    if &mass != m {
        return Some(format!("mass {} differs from {}", fmt_q(&mass), fmt_q(m)));
    }
    if family == Model::Tasep && !rho.is_bounded_density() {
        return Some("density exceeds 1".into());
    }
    None
}

/// `∫ kernel(ρ)` over the cells of `rho` whose interior passes `keep`.
fn kernel_integral(
    rho: &TorusMeasure,
    kernel: &EntropyKernel,
    cuts: &[Q],
    keep: impl Fn(&Q) -> bool,
) -> f64 {
    let grid = Grid::new(rho.breakpoints().iter().cloned().chain(cuts.iter().cloned()));
    let two = qi(2);
    let mut total = 0.0;
    for i in 0..grid.cells() {
        let mid = (grid.left(i) + grid.right(i)) / &two;
        if keep(&mid) {
            total += to_f64(&grid.width(i)) * kernel.eval(rho.density_at(&mid));
        }
    }
    total
}

fn arc_cuts(arcs: &[ClosedArc]) -> Vec<Q> {
    arcs.iter().flat_map(|a| [a.start.clone(), a.end()]).collect()
}

/// One-class rate functional.
pub fn s1(rho: &TorusMeasure, kernel: &EntropyKernel) -> f64 {
    if membership_failure(rho, &kernel.m, kernel.family).is_some() {
        return f64::INFINITY;
    }
    kernel_integral(rho, kernel, &[], |_| true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTerms {
    /// `∫_{𝒰ᶜ} K_{m₁}(ρ₁)`.
    pub complement: f64,
    /// `∫_{𝒰ᵢ} K_{m₁}(ρ₁^{𝒰ᵢ})` for each plateau.
    pub plateaus: Vec<f64>,
    /// `∫ K_{m₂}(ρ₂)`.
    pub rho2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateResult {
    pub value: f64,
    pub finite: bool,
    /// Why the value is infinite.
    pub reason: Option<String>,
    /// Equal masses: finite only on the diagonal, where it is `S₁(ρ₂)`.
    pub diagonal: bool,
    pub plateaus: Option<PlateauDecomposition>,
    /// `ρ₁` with every plateau replaced by its envelope density.
    pub envelope_rho1: Option<TorusMeasure>,
    pub terms: Option<RateTerms>,
}

impl RateResult {
    fn infinite(reason: String) -> Self {
        Self {
            value: f64::INFINITY,
            finite: false,
            reason: Some(reason),
            diagonal: false,
            plateaus: None,
            envelope_rho1: None,
            terms: None,
        }
    }
}

/// Two-class rate functional in closed form.
pub fn s2(
    rho1: &TorusMeasure,
    rho2: &TorusMeasure,
    m1: &Q,
    m2: &Q,
    family: Model,
) -> Result<RateResult> {
    s2_with_tol(rho1, rho2, m1, m2, family, &zero())
}

/// As [`s2`], with plateaus detected up to relative tolerance `tol`.
pub fn s2_with_tol(
    rho1: &TorusMeasure,
    rho2: &TorusMeasure,
    m1: &Q,
    m2: &Q,
    family: Model,
    tol: &Q,
) -> Result<RateResult> {
    let k1 = EntropyKernel::new(family, m1.clone())?;
    let k2 = EntropyKernel::new(family, m2.clone())?;
    if m1 > m2 {
        return Ok(RateResult::infinite(format!(
            "first-class mass {} exceeds total mass {}",
            fmt_q(m1),
            fmt_q(m2)
        )));
    }
    for (i, (rho, m)) in [(rho1, m1), (rho2, m2)].into_iter().enumerate() {
        if let Some(why) = membership_failure(rho, m, family) {
            return Ok(RateResult::infinite(format!("layer {}: {why}", i + 1)));
        }
    }
    if let Some(at) = rho1.domination_violation(rho2) {
        return Ok(RateResult::infinite(format!(
            "layers not ordered near {}",
            fmt_q(&at)
        )));
    }
    let rho2_term = kernel_integral(rho2, &k2, &[], |_| true);
    if m1 == m2 {
        if rho1 != rho2 {
            return Ok(RateResult::infinite(
                "equal masses require equal profiles".into(),
            ));
        }
        return Ok(RateResult {
            value: rho2_term,
            finite: true,
            reason: None,
            diagonal: true,
            plateaus: None,
            envelope_rho1: None,
            terms: Some(RateTerms {
                complement: 0.0,
                plateaus: Vec::new(),
                rho2: rho2_term,
            }),
        });
    }
    let plateaus = plateau_set_with_tol(rho1, rho2, tol)?;
    let cuts = arc_cuts(&plateaus.intervals);
    let complement =
        kernel_integral(rho1, &k1, &cuts, |mid| plateaus.locate(mid).is_none());
    let envelope = patch_with_envelopes(rho1, &plateaus)?;
    let plateau_terms: Vec<f64> = plateaus
        .intervals
        .iter()
        .map(|arc| {
            kernel_integral(&envelope, &k1, &cuts, |mid| arc.contains_interior(mid))
        })
        .collect();
    let value = complement + plateau_terms.iter().sum::<f64>() + rho2_term;
    Ok(RateResult {
        value,
        finite: value.is_finite(),
        reason: None,
        diagonal: false,
        plateaus: Some(plateaus),
        envelope_rho1: Some(envelope),
        terms: Some(RateTerms {
            complement,
            plateaus: plateau_terms,
            rho2: rho2_term,
        }),
    })
}

/// `S₂(ρ₁,ρ₂) − S₁(ρ₁)` written as `∫_{𝒰ᶜ} K_{m₂}(ρ₂) + Σᵢ ∫_{𝒰ᵢ} K_{m₂}(ρ₂^{𝒰ᵢ})`.
pub fn s2_excess_over_s1(
    rho1: &TorusMeasure,
    rho2: &TorusMeasure,
    m2: &Q,
    family: Model,
) -> Result<f64> {
    let k2 = EntropyKernel::new(family, m2.clone())?;
    let plateaus = plateau_set_with_tol(rho1, rho2, &zero())?;
    let cuts = arc_cuts(&plateaus.intervals);
    let off = kernel_integral(rho2, &k2, &cuts, |mid| plateaus.locate(mid).is_none());
    let env2 = patch_with_envelopes(rho2, &plateaus)?;
    let on = kernel_integral(&env2, &k2, &cuts, |mid| plateaus.locate(mid).is_some());
    Ok(off + on)
}

/// `∫_V (K_{m₂} − K_{m₁})(ρ)` and its closed form in terms of `∫_V ρ` alone.
pub fn entropy_difference(
    rho: &TorusMeasure,
    arc: &ClosedArc,
    m1: &Q,
    m2: &Q,
    family: Model,
) -> Result<(f64, f64)> {
    let k1 = EntropyKernel::new(family, m1.clone())?;
    let k2 = EntropyKernel::new(family, m2.clone())?;
    let cuts = [arc.start.clone(), arc.end()];
    let lhs = kernel_integral(rho, &k2, &cuts, |mid| arc.contains_interior(mid))
        - kernel_integral(rho, &k1, &cuts, |mid| arc.contains_interior(mid));
    let mass = to_f64(&rho.lebesgue_arc(&arc.start, &arc.len));
    let len = to_f64(&arc.len);
    let (a, b) = (to_f64(m1), to_f64(m2));
    let rhs = match family {
        Model::Tasep => {
            mass * ((a * (1.0 - b)) / (b * (1.0 - a))).ln() + len * ((1.0 - a) / (1.0 - b)).ln()
        }
        Model::Had => mass * (a / b).ln() + len * (b - a),
    };
    Ok((lhs, rhs))
}

/// Outcome of the preimage test for `C_{ρ₂}[ψ₁] = ρ₁`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PreimageCheck {
    pub ok: bool,
    pub failures: Vec<String>,
}

/// Whether `ψ₁` collapses onto `ρ₁` under `ρ₂`: `ψ₁ = ρ₁` off the plateaus,
/// and on each plateau its cumulative dominates that of `ρ₁` with equal total.
pub fn preimage_conditions(
    psi1: &TorusMeasure,
    rho1: &TorusMeasure,
    rho2: &TorusMeasure,
) -> Result<PreimageCheck> {
    let mut failures = Vec::new();
    if !psi1.is_absolutely_continuous() {
        failures.push("ψ₁ has atoms".into());
        return Ok(PreimageCheck { ok: false, failures });
    }
    let plateaus = plateau_set_with_tol(rho1, rho2, &zero())?;
    let grid = Grid::common(&[psi1, rho1, rho2]).refine(arc_cuts(&plateaus.intervals));
    let two = qi(2);
    for i in 0..grid.cells() {
        let mid = (grid.left(i) + grid.right(i)) / &two;
        if plateaus.locate(&mid).is_none() && psi1.density_at(&mid) != rho1.density_at(&mid) {
            failures.push(format!(
                "differs from ρ₁ off the plateaus near {}",
                fmt_q(grid.left(i))
            ));
            break;
        }
    }
    for arc in &plateaus.intervals {
        let fp = cumulative(psi1, arc)?;
        let fr = cumulative(rho1, arc)?;
        if fp.total() != fr.total() {
            failures.push(format!("mass on {} differs", arc.describe()));
            continue;
        }
        let below = fp
            .knots
            .iter()
            .chain(&fr.knots)
            .map(|(x, _)| x)
            .find(|x| fp.eval(x) < fr.eval(x));
        if let Some(x) = below {
            failures.push(format!(
                "cumulative below ρ₁ at offset {} of {}",
                fmt_q(x),
                arc.describe()
            ));
        }
    }
    Ok(PreimageCheck {
        ok: failures.is_empty(),
        failures,
    })
}

/// `C_{ρ₂}[m₁]`: the most likely first-class profile given `ρ₂`.
pub fn minimizer_rho1(rho2: &TorusMeasure, m1: &Q) -> Result<TorusMeasure> {
    if !rho2.is_absolutely_continuous() {
        return Err(Error::InvalidMeasure("ρ₂ must be a density".into()));
    }
    let m2 = rho2.total_mass();
    if m1 > &m2 {
        return Err(Error::MassOrder {
            first: fmt_q(m1),
            second: fmt_q(&m2),
        });
    }
    Ok(collapse_measure(&TorusMeasure::constant(m1.clone()), rho2)?.0)
}

/// The intervals `Ṽᵢ = [wᵢ, vᵢʳ]` used by [`minimizer_rho2`], nested ones dropped.
pub fn minimizer_rho2_intervals(rho1: &TorusMeasure, m2: &Q) -> Result<Vec<ClosedArc>> {
    if !rho1.is_absolutely_continuous() {
        return Err(Error::InvalidMeasure("ρ₁ must be a density".into()));
    }
    let m1 = rho1.total_mass();
    if &m1 >= m2 {
        return Err(Error::MassOrder {
            first: fmt_q(&m1),
            second: fmt_q(m2),
        });
    }
    let grid = Grid::new(rho1.breakpoints().iter().cloned());
    let n = grid.cells();
    let above: Vec<bool> = (0..n).map(|i| rho1.density_at(grid.left(i)) > m2).collect();
    let Some(start) = above.iter().position(|a| !a) else {
        return Err(Error::Internal("density above m₂ everywhere".into()));
    };
    // Maximal runs of cells above m₂: (first cell, last cell).
    let mut runs = Vec::new();
    let mut cur: Option<(usize, usize)> = None;
    for step in 1..=n {
        let i = (start + step) % n;
        if above[i] {
            cur = Some(cur.map_or((i, i), |(a, _)| (a, i)));
        } else if let Some(r) = cur.take() {
            runs.push(r);
        }
    }
    let mut arcs = Vec::with_capacity(runs.len());
    for (first, last) in runs {
        let vr = grid.right(last);
        // G(w) = ∫_w^{vʳ} (m₂ − ρ₁); walk left from vˡ until it reaches 0.
        let mut g = zero();
        let mut i = last;
        let mut inside = true;
        let w = loop {
            let d = rho1.density_at(grid.left(i));
            let width = grid.width(i);
            let next = &g + (m2 - d) * &width;
            if !inside && !next.is_negative() {
                let slope = m2 - d;
                break grid.right(i) - (-&g) / slope;
            }
            g = next;
            if i == first {
                inside = false;
            }
            i = (i + n - 1) % n;
            if i == last && !inside {
                return Err(Error::Internal("no zero of the balance integral".into()));
            }
        };
        let len = wrap_unit(&(&vr - &w));
        let len = if len.is_zero() { one() } else { len };
        arcs.push(ClosedArc::new(w, len));
    }
    let contained = |a: &ClosedArc, b: &ClosedArc| -> bool {
        a != b
            && b.offset_of(&a.start)
                .is_some_and(|o| &o + &a.len <= b.len)
    };
    let kept: Vec<ClosedArc> = arcs
        .iter()
        .filter(|a| !arcs.iter().any(|b| contained(a, b)))
        .cloned()
        .collect();
    Ok(kept)
}

/// Most likely total profile given the first-class profile `ρ₁`:
/// `ρ₁` on the balanced intervals `Ṽᵢ`, `m₂` elsewhere.
pub fn minimizer_rho2(rho1: &TorusMeasure, m2: &Q) -> Result<TorusMeasure> {
    let arcs = minimizer_rho2_intervals(rho1, m2)?;
    let grid = Grid::new(rho1.breakpoints().iter().cloned().chain(arc_cuts(&arcs)));
    let out = TorusMeasure::tabulate(&grid, |mid| {
        if arcs.iter().any(|a| a.contains_interior(mid)) {
            rho1.density_at(mid).clone()
        } else {
            m2.clone()
        }
    })?;
    if &out.total_mass() != m2 {
        return Err(Error::Internal(format!(
            "minimizer mass {} instead of {}",
            fmt_q(&out.total_mass()),
            fmt_q(m2)
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionResiduals {
    /// `|S₂(C_{ρ₂}[m₁], ρ₂) − S₁(ρ₂)|`.
    pub rho1_side: f64,
    /// `|S₂(ρ₁, ρ₂*) − S₁(ρ₁)|`.
    pub rho2_side: f64,
}

/// Both one-class contractions of `S₂`, evaluated independently.
pub fn contraction_identity_check(
    rho1: &TorusMeasure,
    rho2: &TorusMeasure,
    family: Model,
) -> Result<ContractionResiduals> {
    let (m1, m2) = (rho1.total_mass(), rho2.total_mass());
    let star1 = minimizer_rho1(rho2, &m1)?;
    let lhs1 = s2(&star1, rho2, &m1, &m2, family)?.value;
    let rhs1 = s1(rho2, &EntropyKernel::new(family, m2.clone())?);
    let star2 = minimizer_rho2(rho1, &m2)?;
    let lhs2 = s2(rho1, &star2, &m1, &m2, family)?.value;
    let rhs2 = s1(rho1, &EntropyKernel::new(family, m1.clone())?);
    Ok(ContractionResiduals {
        rho1_side: (lhs1 - rhs1).abs(),
        rho2_side: (lhs2 - rhs2).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonconvexityCertificate {
    /// `(c, c·S₂(ρ₁,ρ₂) + (1−c)·S₂(ρ₁*,ρ₂*) − S₂(ρ_{1c},ρ_{2c}))`.
    pub margins: Vec<(String, f64)>,
    pub most_negative: f64,
    /// The `c ↑ 1` limit `∫_{[0,½]} h_{¼}(½) − ∫_{[0,½]} h_{¼}(ρ₁)`.
    pub limit: f64,
}

/// The two-class pairs whose convex combinations break convexity of `S₂`:
/// `((ρ₁, ρ₂), (ρ₁*, ρ₂*), m₁, m₂)`.
pub fn nonconvexity_profiles() -> ((TorusMeasure, TorusMeasure), (TorusMeasure, TorusMeasure), Q, Q)
{
    let rho1 = TorusMeasure::arc_indicator(&q(1, 4), &q(1, 4), &qi(1)).expect("arc");
    let rho2 = TorusMeasure::arc_indicator(&q(1, 4), &q(3, 4), &qi(1)).expect("arc");
    let star1 = TorusMeasure::arc_indicator(&q(1, 2), &q(1, 2), &q(1, 2)).expect("arc");
    ((rho1, rho2.clone()), (star1, rho2), q(1, 4), q(3, 4))
}

pub fn convexity_margin(c: &Q) -> Result<f64> {
    let ((r1, r2), (s1_, s2_), m1, m2) = nonconvexity_profiles();
    let f = |a: &TorusMeasure, b: &TorusMeasure| -> Result<f64> {
        Ok(s2(a, b, &m1, &m2, Model::Tasep)?.value)
    };
    let mixed1 = r1.mix(&s1_, c);
    let mixed2 = r2.mix(&s2_, c);
    let cf = to_f64(c);
    Ok(cf * f(&r1, &r2)? + (1.0 - cf) * f(&s1_, &s2_)? - f(&mixed1, &mixed2)?)
}

/// Margins at `c ∈ {0.9, 0.99, 0.999}` and the analytic limit.
pub fn nonconvexity_certificate() -> Result<NonconvexityCertificate> {
    let cs = [q(9, 10), q(99, 100), q(999, 1000)];
    let margins = cs
        .iter()
        .map(|c| Ok((fmt_q(c), convexity_margin(c)?)))
        .collect::<Result<Vec<_>>>()?;
    let most_negative = margins.iter().map(|(_, m)| *m).fold(f64::INFINITY, f64::min);
    let h = EntropyKernel::tasep(q(1, 4))?;
    let limit = 0.5 * h.eval(&q(1, 2)) - 0.25 * (h.eval(&zero()) + h.eval(&one()));
    Ok(NonconvexityCertificate {
        margins,
        most_negative,
        limit,
    })
}

/// Two distinct three-class preimages of the same tuple whose midpoint is not
/// a preimage: `(ψ, ψ̃, ρ)` for bump width `ε < 1/8`.
pub fn nonconvex_preimage_example(
    eps: &Q,
) -> Result<([TorusMeasure; 3], [TorusMeasure; 3], [TorusMeasure; 3])> {
    if !eps.is_positive() || eps >= &q(1, 8) {
        return Err(Error::Domain(format!("bump width {} not in (0, 1/8)", fmt_q(eps))));
    }
    let bumps = |spec: &[(Q, Q, i64)]| {
        TorusMeasure::sum_of_arcs(
            &spec
                .iter()
                .map(|(a, l, c)| (a.clone(), l.clone(), qi(*c)))
                .collect::<Vec<_>>(),
        )
    };
    let e = eps.clone();
    let half = eps / qi(2);
    let top = bumps(&[(q(1, 4), e.clone(), 4), (q(1, 2), e.clone(), 8)])?;
    let psi = [
        bumps(&[(q(1, 8), e.clone(), 2)])?,
        bumps(&[(qi(0), e.clone(), 4), (q(7, 8), e.clone(), 4)])?,
        top.clone(),
    ];
    let tilde = [
        bumps(&[(q(5, 8), e.clone(), 2)])?,
        bumps(&[(q(3, 8), e.clone(), 4), (q(3, 4), e.clone(), 4)])?,
        top.clone(),
    ];
    let rho = [
        bumps(&[(q(1, 4), half.clone(), 4)])?,
        bumps(&[(q(1, 4), e.clone(), 4), (q(1, 2), half, 8)])?,
        top,
    ];
    Ok((psi, tilde, rho))
}

/// One row of the finite-size decay table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdpRow {
    pub n: usize,
    /// `−(1/N) log P(profile)`.
    pub rate: f64,
    pub s1: f64,
    /// `|rate − S₁|`.
    pub gap: f64,
    /// `B (1 + log(N+1)) / N`.
    pub bound: f64,
}

/// Above this size binomials switch from exact integers to log-gamma.
pub const EXACT_BINOMIAL_MAX_N: usize = 100_000;

fn binomial(n: usize, k: usize) -> BigInt {
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Natural log of a positive big integer, to double precision.
pub fn ln_bigint(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("finite").ln();
    }
    let shift = bits - 64;
    let top: BigInt = x >> shift;
    top.to_f64().expect("finite").ln() + shift as f64 * std::f64::consts::LN_2
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    if n <= EXACT_BINOMIAL_MAX_N {
        ln_bigint(&binomial(n, k))
    } else {
        use statrs::function::gamma::ln_gamma;
        ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    }
}

/// Exact `−(1/N) log P` for a `B`-bin profile under sampling `M = mN` sites
/// without replacement: `P = Πᵦ C(N/B, jᵦ) / C(N, M)`.
pub fn ldp_decay_exact(profile: &[Q], ns: &[usize], m: &Q) -> Result<Vec<LdpRow>> {
    let b = profile.len();
    if b == 0 {
        return Err(Error::InvalidConfig("empty profile".into()));
    }
    let width = q(1, b as i64);
    let rho = TorusMeasure::new(
        (0..b).map(|i| q(i as i64, b as i64)).collect(),
        profile.to_vec(),
        Vec::new(),
    )?;
    let s1_value = s1(&rho, &EntropyKernel::tasep(m.clone())?);
    let mass: Q = profile.iter().fold(zero(), |a, d| a + d * &width);
    if &mass != m {
        return Err(Error::InvalidConfig(format!(
            "profile mass {} differs from {}",
            fmt_q(&mass),
            fmt_q(m)
        )));
    }
    ns.iter()
        .map(|&n| {
            if n % b != 0 {
                return Err(Error::InvalidConfig(format!("{n} sites do not split into {b} bins")));
            }
            let per_bin = n / b;
            let counts = profile
                .iter()
                .map(|d| {
                    let j = d * qi(per_bin as i64);
                    if !j.is_integer() || j.is_negative() || j > qi(per_bin as i64) {
                        return Err(Error::InvalidConfig(format!(
                            "density {} not realizable with {per_bin} sites per bin",
                            fmt_q(d)
                        )));
                    }
                    Ok(j.to_integer().to_usize().expect("small count"))
                })
                .collect::<Result<Vec<_>>>()?;
            let total: usize = counts.iter().sum();
            let ln_p: f64 = counts.iter().map(|&j| ln_binomial(per_bin, j)).sum::<f64>()
                - ln_binomial(n, total);
            let rate = -ln_p / n as f64;
            Ok(LdpRow {
                n,
                rate,
                s1: s1_value,
                gap: (rate - s1_value).abs(),
                bound: b as f64 * (1.0 + ((n + 1) as f64).ln()) / n as f64,
            })
        })
        .collect()
}

/// Smallest `N` that is a multiple of the bin count and of every density denominator.
pub fn realizable_step(profile: &[Q]) -> usize {
    let b = profile.len();
    let l = profile
        .iter()
        .fold(BigInt::one(), |acc, d| acc.lcm(d.denom()));
    (l * BigInt::from(b)).to_usize().expect("small lattice step")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preimage_set_is_not_convex() {
        let (psi, tilde, rho) = nonconvex_preimage_example(&q(1, 10)).unwrap();
        let a = crate::collapse::collapse_k(&psi).unwrap().into_parts();
        let b = crate::collapse::collapse_k(&tilde).unwrap().into_parts();
        assert_eq!(a, rho);
        assert_eq!(b, rho);
        let mid: Vec<TorusMeasure> = psi.iter().zip(&tilde).map(|(x, y)| x.mix(y, &q(1, 2))).collect();
        assert_ne!(crate::collapse::collapse_k(&mid).unwrap().into_parts(), rho);
    }

    fn chi(a: Q, len: Q) -> TorusMeasure {
        TorusMeasure::arc_indicator(&a, &len, &qi(1)).unwrap()
    }

    #[test]
    fn kernel_values() {
        let h = EntropyKernel::tasep(q(1, 2)).unwrap();
        assert_eq!(h.eval(&q(1, 2)), 0.0);
        assert!((h.eval(&qi(1)) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((h.eval(&qi(0)) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(h.eval(&q(3, 2)), f64::INFINITY);
        let k = EntropyKernel::had(q(1, 2)).unwrap();
        assert_eq!(k.eval(&q(1, 2)), 0.0);
        assert!(k.eval(&q(1, 4)) > 0.0);
        assert!(EntropyKernel::tasep(qi(0)).is_err());
        assert!(EntropyKernel::tasep(q(3, 2)).is_err());
        let full = EntropyKernel::tasep(qi(1)).unwrap();
        assert_eq!(full.eval(&qi(1)), 0.0);
        assert_eq!(full.eval(&q(1, 2)), f64::INFINITY);
    }

    #[test]
    fn s1_examples() {
        let h = EntropyKernel::tasep(q(1, 2)).unwrap();
        assert_eq!(s1(&TorusMeasure::constant(q(1, 2)), &h), 0.0);
        let v = s1(&chi(qi(0), q(1, 2)), &h);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(s1(&TorusMeasure::constant(q(1, 3)), &h), f64::INFINITY);
        let atom = TorusMeasure::atomic(vec![(qi(0), q(1, 2))]).unwrap();
        assert_eq!(s1(&atom, &h), f64::INFINITY);
    }

    #[test]
    fn s2_constant_pair_is_zero() {
        for fam in [Model::Tasep, Model::Had] {
            let r = s2(
                &TorusMeasure::constant(q(1, 4)),
                &TorusMeasure::constant(q(1, 2)),
                &q(1, 4),
                &q(1, 2),
                fam,
            )
            .unwrap();
            assert_eq!(r.value, 0.0);
            assert!(r.plateaus.unwrap().is_empty());
        }
    }

    #[test]
    fn s2_on_the_nonconvexity_data() {
        let ((r1, r2), _, m1, m2) = nonconvexity_profiles();
        let r = s2(&r1, &r2, &m1, &m2, Model::Tasep).unwrap();
        let h1 = EntropyKernel::tasep(m1.clone()).unwrap();
        let h2 = EntropyKernel::tasep(m2.clone()).unwrap();
        let expected = 0.25 * h2.eval(&qi(0))
            + 0.75 * h2.eval(&qi(1))
            + 0.5 * h1.eval(&q(1, 2))
            + 0.5 * h1.eval(&qi(0));
        assert!((r.value - expected).abs() < 1e-12, "{} vs {expected}", r.value);
        assert_eq!(r.terms.unwrap().plateaus.len(), 1);
    }

    #[test]
    fn s2_infinite_cases() {
        let (a, b) = (q(1, 4), q(1, 2));
        let c1 = TorusMeasure::constant(a.clone());
        let c2 = TorusMeasure::constant(b.clone());
        assert!(!s2(&c2, &c1, &b, &a, Model::Tasep).unwrap().finite);
        assert!(!s2(&c1, &c2, &b, &b, Model::Tasep).unwrap().finite);
        let dense = TorusMeasure::arc_indicator(&qi(0), &q(1, 4), &qi(2)).unwrap();
        let low = chi(qi(0), q(1, 4));
        assert!(!s2(&low, &dense, &a, &b, Model::Tasep).unwrap().finite);
        assert!(s2(&low, &dense, &a, &b, Model::Had).unwrap().finite);
        let unordered = chi(qi(0), q(1, 4));
        let r = s2(&unordered, &chi(q(1, 2), q(1, 2)), &a, &b, Model::Had).unwrap();
        assert!(!r.finite);
    }

    #[test]
    fn diagonal_case() {
        let r = chi(q(1, 8), q(1, 2));
        let v = s2(&r, &r, &q(1, 2), &q(1, 2), Model::Tasep).unwrap();
        assert!(v.diagonal);
        let s = s1(&r, &EntropyKernel::tasep(q(1, 2)).unwrap());
        assert_eq!(v.value, s);
    }

    #[test]
    fn minimizer_rho1_examples() {
        let c = minimizer_rho1(&TorusMeasure::constant(q(1, 2)), &q(1, 4)).unwrap();
        assert_eq!(c, TorusMeasure::constant(q(1, 4)));
        let rho2 = TorusMeasure::arc_indicator(&qi(0), &q(1, 2), &qi(1)).unwrap();
        let star = minimizer_rho1(&rho2, &q(1, 4)).unwrap();
        assert!(star.is_dominated_by(&rho2));
        assert_eq!(star.total_mass(), q(1, 4));
        let lhs = s2(&star, &rho2, &q(1, 4), &q(1, 2), Model::Tasep).unwrap().value;
        let rhs = s1(&rho2, &EntropyKernel::tasep(q(1, 2)).unwrap());
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn minimizer_rho2_example() {
        let rho1 = chi(q(1, 4), q(1, 4));
        let arcs = minimizer_rho2_intervals(&rho1, &q(1, 2)).unwrap();
        assert_eq!(arcs, vec![ClosedArc::new(qi(0), q(1, 2))]);
        let star = minimizer_rho2(&rho1, &q(1, 2)).unwrap();
        let expected = TorusMeasure::sum_of_arcs(&[
            (q(1, 4), q(1, 4), qi(1)),
            (q(1, 2), q(1, 2), q(1, 2)),
        ])
        .unwrap();
        assert_eq!(star, expected);
        let lhs = s2(&rho1, &star, &q(1, 4), &q(1, 2), Model::Tasep).unwrap().value;
        let rhs = s1(&rho1, &EntropyKernel::tasep(q(1, 4)).unwrap());
        assert!((lhs - rhs).abs() < 1e-12);
        let flat = minimizer_rho2(&TorusMeasure::constant(q(1, 4)), &q(1, 2)).unwrap();
        assert_eq!(flat, TorusMeasure::constant(q(1, 2)));
    }

    #[test]
    fn nested_balanced_intervals() {
        // The small bump's balance interval [0.4,0.5] lies inside the big one's [0.3,0.8].
        let rho1 = TorusMeasure::sum_of_arcs(&[
            (q(6, 10), q(2, 10), qi(1)),
            (q(45, 100), q(5, 100), qi(1)),
        ])
        .unwrap();
        let m2 = q(1, 2);
        let arcs = minimizer_rho2_intervals(&rho1, &m2).unwrap();
        assert_eq!(arcs.len(), 1);
        assert_eq!(arcs[0], ClosedArc::new(q(3, 10), q(1, 2)));
        let star = minimizer_rho2(&rho1, &m2).unwrap();
        let res = contraction_identity_check(&rho1, &star, Model::Tasep).unwrap();
        assert!(res.rho2_side < 1e-12);
        let excess = s2_excess_over_s1(&rho1, &star, &m2, Model::Tasep).unwrap();
        assert!(excess.abs() < 1e-12);
    }

    #[test]
    fn preimage_examples() {
        let ((r1, r2), _, _, _) = nonconvexity_profiles();
        assert!(preimage_conditions(&r1, &r1, &r2).unwrap().ok);
        let env = TorusMeasure::sum_of_arcs(&[(qi(0), q(1, 2), q(1, 2))]).unwrap();
        assert!(preimage_conditions(&env, &r1, &r2).unwrap().ok);
        let heavy = TorusMeasure::arc_indicator(&qi(0), &q(1, 2), &qi(1)).unwrap();
        assert!(!preimage_conditions(&heavy, &r1, &r2).unwrap().ok);
    }

    #[test]
    fn nonconvexity() {
        assert!(convexity_margin(&qi(0)).unwrap().abs() < 1e-12);
        assert!(convexity_margin(&qi(1)).unwrap().abs() < 1e-12);
        let cert = nonconvexity_certificate().unwrap();
        assert!(cert.most_negative < 0.0);
        assert!(cert.limit < 0.0);
        let last = cert.margins.last().unwrap().1;
        assert!((last - cert.limit).abs() < 0.05, "{last} vs {}", cert.limit);
    }

    #[test]
    fn entropy_difference_depends_on_mass_only() {
        let arc = ClosedArc::new(q(1, 8), q(1, 2));
        let a = TorusMeasure::arc_indicator(&q(1, 8), &q(1, 4), &qi(1)).unwrap();
        let b = TorusMeasure::constant(q(1, 2));
        for fam in [Model::Tasep, Model::Had] {
            let (la, ra) = entropy_difference(&a, &arc, &q(1, 3), &q(2, 3), fam).unwrap();
            let (lb, rb) = entropy_difference(&b, &arc, &q(1, 3), &q(2, 3), fam).unwrap();
            assert!((la - ra).abs() < 1e-12);
            assert!((lb - rb).abs() < 1e-12);
            assert!((la - lb).abs() < 1e-12);
        }
    }

    #[test]
    fn ldp_rows() {
        let rows = ldp_decay_exact(&[q(1, 2), qi(0)], &[100, 1000, 10000], &q(1, 4)).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].gap < w[0].gap);
        }
        assert!(rows.iter().all(|r| r.gap <= r.bound));
        let flat = ldp_decay_exact(&[q(1, 4), q(1, 4)], &[200, 10000], &q(1, 4)).unwrap();
        assert!(flat[1].rate < flat[0].rate);
        assert!(ldp_decay_exact(&[q(1, 3), q(1, 6)], &[100], &q(1, 4)).is_err());
        assert_eq!(realizable_step(&[q(1, 3), q(1, 6)]), 12);
    }

    #[test]
    fn big_log() {
        let x = BigInt::from(10u32).pow(400);
        assert!((ln_bigint(&x) - 400.0 * 10f64.ln()).abs() < 1e-9);
        let a = ln_binomial(200_000, 50_000);
        let b = ln_bigint(&binomial(200_000, 50_000));
        assert!((a - b).abs() / b < 1e-10);
    }
}
