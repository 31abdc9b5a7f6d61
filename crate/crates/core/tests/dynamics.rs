use std::collections::BTreeMap;

use collapse_core::dynamics::{
    exact_stationary, had_simulate, pushforward_distribution, sample_invariant_had,
    sample_invariant_tasep, tasep_occupation, total_variation, HadChain, ProcessSpec,
};
use collapse_core::lattice::class_label_encode;
use collapse_core::rational::{to_f64, zero};
use collapse_core::OrderedTuple;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn pushforward_is_stationary_for_small_rings() {
    for n in 2..=5 {
        for a in 0..=n {
            for b in 0..=n - a {
                let spec = ProcessSpec::tasep(n, vec![a, b]).unwrap();
                let exact = exact_stationary(&spec).unwrap();
                let push = pushforward_distribution(&spec).unwrap();
                assert_eq!(total_variation(&exact, &push), zero(), "N={n} Δ=({a},{b})");
            }
        }
    }
}

#[test]
fn simulated_occupation_approaches_the_stationary_law() {
    let spec = ProcessSpec::tasep(4, vec![1, 1]).unwrap();
    let table = exact_stationary(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = OrderedTuple::new(vec![
        collapse_core::TorusConfig::from_sites(4, &[0]).unwrap(),
        collapse_core::TorusConfig::from_sites(4, &[0, 1]).unwrap(),
    ])
    .unwrap();
    let freq = tasep_occupation(&start, 20_000.0, &mut rng);
    for (s, p) in table.states.iter().zip(&table.probabilities) {
        let f = freq.get(s).copied().unwrap_or(0.0);
        assert!((f - to_f64(p)).abs() < 0.01, "{s:?}: {f} vs {}", to_f64(p));
    }
}

#[test]
fn sampler_frequencies_match_the_table() {
    let spec = ProcessSpec::tasep(5, vec![1, 2, 1]).unwrap();
    let table = exact_stationary(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draws = 40_000;
    let mut counts: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
    for _ in 0..draws {
        let t = sample_invariant_tasep(&spec, &mut rng).unwrap();
        *counts.entry(class_label_encode(&t)).or_default() += 1;
    }
    // Pearson statistic against the exact law; 4σ above its mean.
    let cells = table.states.len() as f64;
    let chi2: f64 = table
        .states
        .iter()
        .zip(&table.probabilities)
        .map(|(s, p)| {
            let e = to_f64(p) * draws as f64;
            let o = counts.get(s).copied().unwrap_or(0) as f64;
            (o - e).powi(2) / e
        })
        .sum();
    assert!(chi2 < cells + 4.0 * (2.0 * cells).sqrt(), "χ² = {chi2} over {cells} cells");
}

#[test]
fn had_runs_keep_counts_and_order() {
    let spec = ProcessSpec::had(vec![3, 4, 2]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let start = sample_invariant_had(&spec, &mut rng).unwrap();
    let (marks, end) = had_simulate(&start, 50.0, &mut rng).unwrap();
    assert!(!marks.is_empty());
    let sizes: Vec<usize> = end.parts().iter().map(|p| p.len()).collect();
    assert_eq!(sizes, vec![3, 7, 9]);
    let mut chain = HadChain::new(&end).unwrap();
    for _ in 0..1000 {
        chain.step(&mut rng);
    }
    assert_eq!(chain.state().parts().len(), 3);
}
