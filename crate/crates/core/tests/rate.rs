use collapse_core::dynamics::Model;
use collapse_core::envelope::ClosedArc;
use collapse_core::instances::{random_cell_pair, random_profile};
use collapse_core::oracle::s2_dp_oracle;
use collapse_core::rate::{
    contraction_identity_check, convexity_margin, entropy_difference, ldp_decay_exact,
    minimizer_rho1, minimizer_rho2, preimage_conditions, s1, s2, EntropyKernel,
};
use collapse_core::rational::{q, qi, to_f64};
use collapse_core::TorusMeasure;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn family() -> impl Strategy<Value = Model> {
    prop_oneof![Just(Model::Tasep), Just(Model::Had)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kernels_are_convex_and_vanish_at_m(fam in family(), mn in 1i64..16, x in 0.0f64..1.0, y in 0.0f64..1.0, t in 0.0f64..1.0) {
        let m = q(mn, 16);
        let k = EntropyKernel::new(fam, m.clone()).unwrap();
        prop_assert!(k.eval(&m).abs() < 1e-15);
        let scale = if fam == Model::Had { 3.0 } else { 1.0 };
        let (x, y) = (x * scale, y * scale);
        let mid = t * x + (1.0 - t) * y;
        prop_assert!(k.eval_f64(mid) <= t * k.eval_f64(x) + (1.0 - t) * k.eval_f64(y) + 1e-12);
        prop_assert!(k.eval_f64(x) >= -1e-15);
    }

    #[test]
    fn two_class_rate_dominates_one_class_rates(fam in family(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r1, r2) = random_cell_pair(8, 8, fam, &mut rng);
        let (m1, m2) = (r1.total_mass(), r2.total_mass());
        let v = s2(&r1, &r2, &m1, &m2, fam).unwrap();
        prop_assert!(v.finite);
        let a = s1(&r1, &EntropyKernel::new(fam, m1).unwrap());
        let b = s1(&r2, &EntropyKernel::new(fam, m2).unwrap());
        prop_assert!(v.value >= a - 1e-12 && v.value >= b - 1e-12, "{} vs {a}, {b}", v.value);
    }

    #[test]
    fn contractions_hold(fam in family(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r1, r2) = random_cell_pair(8, 8, fam, &mut rng);
        let res = contraction_identity_check(&r1, &r2, fam).unwrap();
        prop_assert!(res.rho1_side <= 1e-12 && res.rho2_side <= 1e-12, "{res:?}");
        let star = minimizer_rho1(&r2, &r1.total_mass()).unwrap();
        let flat = TorusMeasure::constant(r1.total_mass());
        prop_assert!(preimage_conditions(&flat, &star, &r2).unwrap().ok);
        let star2 = minimizer_rho2(&r1, &r2.total_mass()).unwrap();
        prop_assert!(r1.is_dominated_by(&star2));
    }

    #[test]
    fn entropy_difference_depends_only_on_arc_mass(fam in family(), seed in any::<u64>(), a in 0i64..16, l in 1i64..=16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_profile(8, 8, fam, &mut rng);
        let arc = ClosedArc::new(q(a, 16), q(l, 16));
        let (lhs, rhs) = entropy_difference(&rho, &arc, &q(1, 4), &q(1, 2), fam).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 || (lhs.is_infinite() && fam == Model::Tasep));
    }
}

#[test]
fn closed_form_matches_dynamic_program() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for fam in [Model::Tasep, Model::Had] {
        for _ in 0..8 {
            let (r1, r2) = random_cell_pair(8, 8, fam, &mut rng);
            let (m1, m2) = (r1.total_mass(), r2.total_mass());
            let closed = s2(&r1, &r2, &m1, &m2, fam).unwrap().value;
            let dp = s2_dp_oracle(&r1, &r2, &m1, &m2, fam, 4096).unwrap();
            assert!((closed - dp.value).abs() <= 1e-3, "{closed} vs {}", dp.value);
            assert!(dp.value >= closed - 1e-12);
            let psi = dp.psi1.unwrap();
            let back = collapse_core::collapse::collapse_measure(&psi, &r2).unwrap().0;
            assert_eq!(back, r1);
        }
    }
}

#[test]
fn convexity_fails_near_the_endpoint() {
    assert!(convexity_margin(&q(999, 1000)).unwrap() < 0.0);
}

#[test]
fn finite_size_decay_approaches_the_rate() {
    let profiles = [
        vec![q(1, 2), q(1, 10)],
        vec![q(1, 5), q(2, 5), q(3, 5), q(4, 5)],
    ];
    for p in profiles {
        let m = p.iter().fold(qi(0), |a, d| a + d) / qi(p.len() as i64);
        let rows = ldp_decay_exact(&p, &[100, 1000, 10_000], &m).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].gap < w[0].gap);
        }
        for r in &rows {
            assert!(r.gap <= r.bound, "{r:?}");
        }
        assert!(to_f64(&m) > 0.0);
    }
}
