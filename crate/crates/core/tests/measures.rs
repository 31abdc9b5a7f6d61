use collapse_core::collapse::{
    collapse_measure, collapse_measure_with, positive_set_representation, FluxMethod,
};
use collapse_core::envelope::{
    concave_envelope, cumulative, patch_with_envelopes, plateau_set, ClosedArc,
};
use collapse_core::instances::{random_measure, random_measure_pair};
use collapse_core::measure::Grid;
use collapse_core::rational::{q, qi, zero, Q};
use collapse_core::TorusMeasure;
use num_traits::Signed;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn max_q(a: Q, b: Q) -> Q {
    if a >= b {
        a
    } else {
        b
    }
}

/// `J(v) = sup_u [(ρ₁−ρ₂)((u, v])]₊ ∨ [(ρ₁−ρ₂)([u, v])]₊` over grid left ends.
fn flux_by_brute_force(r1: &TorusMeasure, r2: &TorusMeasure, v: &Q) -> Q {
    let grid = Grid::common(&[r1, r2]);
    let diff_half = |u: &Q| r1.interval_mass(u, v) - r2.interval_mass(u, v);
    let len = |u: &Q| {
        let l = collapse_core::rational::wrap_unit(&(v - u));
        if l.is_zero() {
            qi(1)
        } else {
            l
        }
    };
    let diff_closed = |u: &Q| r1.closed_arc_mass(u, &len(u)) - r2.closed_arc_mass(u, &len(u));
    let mut best = zero();
    best = max_q(best, r1.atom_at(v) - r2.atom_at(v));
    for u in grid.points.iter() {
        if u != v {
            best = max_q(best, diff_half(u));
        }
        best = max_q(best, diff_closed(u));
    }
    best
}

use num_traits::Zero;

fn seeds() -> impl Strategy<Value = u64> {
    any::<u64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn ledger_and_representation_agree(seed in seeds()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = random_measure_pair(&mut rng);
        let (c, flux) = collapse_measure(&a, &b).unwrap();
        prop_assert_eq!(flux.gamma_total(), zero());
        prop_assert_eq!(c.total_mass(), a.total_mass());
        prop_assert!(c.is_dominated_by(&b), "{:?} not below {:?}", c, b);
        prop_assert_eq!(&positive_set_representation(&a, &b, &flux).unwrap(), &c);
        let (c2, flux2) = collapse_measure_with(&a, &b, FluxMethod::Enumeration).unwrap();
        prop_assert_eq!(&c2, &c);
        prop_assert_eq!(&flux2.values, &flux.values);
        prop_assert_eq!(&flux2.left_limits, &flux.left_limits);
    }

    #[test]
    fn flux_matches_brute_force(seed in seeds()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = random_measure_pair(&mut rng);
        let (_, flux) = collapse_measure(&a, &b).unwrap();
        let grid = Grid::common(&[&a, &b]);
        for i in 0..grid.cells() {
            let g = grid.left(i).clone();
            prop_assert_eq!(flux.eval(&g), flux_by_brute_force(&a, &b, &g));
            let mid = (&g + grid.right(i)) / qi(2);
            prop_assert_eq!(flux.eval(&mid), flux_by_brute_force(&a, &b, &mid));
        }
    }

    #[test]
    fn collapse_is_idempotent(seed in seeds()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = random_measure_pair(&mut rng);
        let c = collapse_measure(&a, &b).unwrap().0;
        prop_assert_eq!(collapse_measure(&c, &b).unwrap().0, c);
    }

    #[test]
    fn envelope_is_least_concave_majorant(seed in seeds()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_measure(6, 0, 24, &mut rng);
        let start = q(rand::Rng::random_range(&mut rng, 0..24), 24);
        let len = q(rand::Rng::random_range(&mut rng, 1..=24), 24);
        let arc = ClosedArc::new(start, len);
        let f = cumulative(&rho, &arc).unwrap();
        let env = concave_envelope(&f).unwrap();
        prop_assert!(env.hull.is_concave());
        // Brute force: the envelope at each knot is the best chord value.
        for (x, _) in &f.knots {
            let mut best = f.eval(x).unwrap();
            for (a, fa) in &f.knots {
                for (b, fb) in &f.knots {
                    if a < x && x < b {
                        let t = (x - a) / (b - a);
                        best = max_q(best, fa + (fb - fa) * t);
                    }
                }
            }
            prop_assert_eq!(env.hull.eval(x).unwrap(), best);
        }
        prop_assert_eq!(env.hull.total(), f.total());
        let again = concave_envelope(&cumulative(&env.density, &arc).unwrap()).unwrap();
        prop_assert_eq!(again.hull.knots.first(), env.hull.knots.first());
        prop_assert_eq!(again.density, env.density);
    }

    #[test]
    fn plateaus_are_symmetric_and_patching_keeps_mass(seed in seeds()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_measure(5, 0, 16, &mut rng);
        let b = random_measure(5, 0, 16, &mut rng);
        let pa = plateau_set(&a, &b).unwrap();
        prop_assert_eq!(&pa, &plateau_set(&b, &a).unwrap());
        if !pa.full {
            let patched = patch_with_envelopes(&a, &pa).unwrap();
            prop_assert_eq!(patched.total_mass(), a.total_mass());
        }
    }
}

#[test]
fn shifting_a_bump_past_the_upper_edge() {
    // Moving a bump of the lower layer past the edge of the upper layer's
    // support makes the output jump.
    let upper = TorusMeasure::arc_indicator(&q(1, 4), &q(1, 2), &qi(1)).unwrap();
    let inside = TorusMeasure::arc_indicator(&q(1, 2), &q(1, 8), &qi(1)).unwrap();
    let c = collapse_measure(&inside, &upper).unwrap().0;
    assert_eq!(c, inside);
    let past = TorusMeasure::arc_indicator(&q(3, 4), &q(1, 8), &qi(1)).unwrap();
    let c = collapse_measure(&past, &upper).unwrap().0;
    assert_eq!(c, TorusMeasure::arc_indicator(&q(1, 4), &q(1, 8), &qi(1)).unwrap());
}

#[test]
fn atoms_spread_onto_densities() {
    let lower = TorusMeasure::atomic(vec![(q(1, 8), q(1, 4))]).unwrap();
    let upper = TorusMeasure::arc_indicator(&q(1, 2), &q(1, 4), &qi(1)).unwrap();
    let c = collapse_measure(&lower, &upper).unwrap().0;
    assert_eq!(c, TorusMeasure::arc_indicator(&q(1, 2), &q(1, 4), &qi(1)).unwrap());
    assert!(c.atoms().is_empty());
    assert!(!c.densities().iter().any(|d| d.is_negative()));
}
