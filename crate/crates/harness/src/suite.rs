//! Batch acceptance suites.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use collapse_core::collapse::{
    collapse_discrete_algorithmic, collapse_discrete_flux, collapse_k, collapse_measure,
    collapse_measure_with, commutation_check_configs, commutation_check_points,
    discrete_flux_values, ledger_mismatches, positive_set_representation, FluxMethod,
};
use collapse_core::dynamics::{
    exact_stationary, pushforward_distribution, sample_invariant_had, total_variation, HadChain,
    Model, ProcessSpec, TICKS,
};
use collapse_core::instances::{
    random_cell_pair, random_config_tuple, random_discrete_pair, random_lattice_triple,
    random_measure_pair, random_point_tuple,
};
use collapse_core::oracle::{contraction_check_k3, s2_dp_oracle, s3_by_recursion, sk_oracle, LatticeSpec};
use collapse_core::rate::{
    contraction_identity_check, convexity_margin, ldp_decay_exact, nonconvex_preimage_example,
    LdpRow,
};
use collapse_core::rational::{fmt_q, q, qi, Q};
use collapse_core::{OrderedTuple, PointConfig, TorusMeasure};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::ks::ks_two_sample;
use crate::tolerances as tol;

/// Every suite, in acceptance order.
pub const SUITES: [&str; 11] = [
    "stationarity",
    "flux-equivalence",
    "order-independence",
    "commutation",
    "measure-representation",
    "s2-oracle",
    "minimizers",
    "nonconvexity",
    "ldp-decay",
    "had-invariance",
    "recursion",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub suite: String,
    /// Ring sizes (TASEP) or point counts (HAD), per suite.
    pub n_values: Vec<usize>,
    pub k_values: Vec<usize>,
    /// Explicit class-count vectors; empty means all of them.
    pub class_counts: Vec<Vec<usize>>,
    pub seed: u64,
    pub replicas: usize,
    pub tolerances: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl SuiteConfig {
    /// Acceptance-size defaults for `suite`.
    pub fn for_suite(suite: &str, seed: u64) -> Result<Self> {
        let (n_values, k_values, replicas): (Vec<usize>, Vec<usize>, usize) = match suite {
            "stationarity" => (vec![3, 4, 5, 6], vec![2, 3], 1),
            "flux-equivalence" => (vec![64], vec![2], 10_000),
            "order-independence" => (vec![64], vec![2], 1_000),
            "commutation" => (vec![32], vec![4], 1_000),
            "measure-representation" => (vec![], vec![2], 1_000),
            "s2-oracle" => (vec![8], vec![2], 50),
            "minimizers" => (vec![8], vec![2], 20),
            "nonconvexity" => (vec![], vec![2, 3], 1),
            "ldp-decay" => (vec![100, 1_000, 10_000], vec![1], 1),
            "had-invariance" => (vec![8, 16], vec![2], 1_000),
            "recursion" => (vec![4], vec![3], 10),
            other => return Err(HarnessError::UnknownSuite(other.into())),
        };
        Ok(Self {
            suite: suite.into(),
            n_values,
            k_values,
            class_counts: Vec::new(),
            seed,
            replicas,
            tolerances: BTreeMap::new(),
            out_dir: None,
        })
    }

    fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    /// Independent stream `i` of the configured seed.
    fn rng(&self, i: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(i);
        r
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub passed: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub runtime_ms: f64,
    pub detail: String,
}

impl CheckResult {
    fn at_most(id: impl Into<String>, statistic: f64, threshold: f64, detail: String) -> Self {
        Self {
            id: id.into(),
            passed: statistic <= threshold,
            statistic,
            threshold,
            runtime_ms: 0.0,
            detail,
        }
    }

    fn at_least(id: impl Into<String>, statistic: f64, threshold: f64, detail: String) -> Self {
        Self {
            passed: statistic >= threshold,
            ..Self::at_most(id, statistic, threshold, detail)
        }
    }

    fn flag(id: impl Into<String>, ok: bool, detail: String) -> Self {
        Self::at_most(id, if ok { 0.0 } else { 1.0 }, 0.0, detail)
    }

    fn timed(mut self, start: Instant) -> Self {
        self.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        self
    }
}

/// CSV series written next to a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub config: SuiteConfig,
    pub invocation: Vec<String>,
    /// SHA-256 of the git-style blob framing of the canonical config.
    pub input_hash: String,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    pub runtime_ms: f64,
    #[serde(skip)]
    pub artifacts: Vec<Artifact>,
}

impl SuiteReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Run the suite named in `config`. Checks keep running past failures.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    let start = Instant::now();
    let (checks, artifacts) = match config.suite.as_str() {
        "stationarity" => stationarity(config)?,
        "flux-equivalence" => (flux_equivalence(config)?, vec![]),
        "order-independence" => (order_independence(config)?, vec![]),
        "commutation" => (commutation(config)?, vec![]),
        "measure-representation" => (measure_representation(config)?, vec![]),
        "s2-oracle" => s2_oracle(config)?,
        "minimizers" => (minimizers(config)?, vec![]),
        "nonconvexity" => (nonconvexity(config)?, vec![]),
        "ldp-decay" => ldp_decay(config)?,
        "had-invariance" => had_invariance(config)?,
        "recursion" => recursion(config)?,
        other => return Err(HarnessError::UnknownSuite(other.into())),
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(SuiteReport {
        suite: config.suite.clone(),
        config: config.clone(),
        invocation: std::env::args().collect(),
        input_hash: crate::report::input_hash(config)?,
        checks,
        passed,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        artifacts,
    })
}

type Outcome = (Vec<CheckResult>, Vec<Artifact>);

/// All vectors of `k` nonnegative counts with sum at most `n`.
fn count_vectors(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    (0..=n)
        .flat_map(|c| {
            count_vectors(n - c, k - 1).into_iter().map(move |mut rest| {
                rest.insert(0, c);
                rest
            })
        })
        .collect()
}

fn stationarity(cfg: &SuiteConfig) -> Result<Outcome> {
    let mut cases: Vec<(usize, Vec<usize>)> = Vec::new();
    for &n in &cfg.n_values {
        if cfg.class_counts.is_empty() {
            for &k in &cfg.k_values {
                cases.extend(count_vectors(n, k).into_iter().map(|c| (n, c)));
            }
        } else {
            cases.extend(cfg.class_counts.iter().map(|c| (n, c.clone())));
        }
    }
    let started = Instant::now();
    let rows: Vec<Result<(CheckResult, Vec<String>)>> = cases
        .par_iter()
        .map(|(n, counts)| {
            let t = Instant::now();
            let spec = ProcessSpec::tasep(*n, counts.clone())?;
            let exact = exact_stationary(&spec)?;
            let push = pushforward_distribution(&spec)?;
            let tv = total_variation(&exact, &push);
            let id = format!("N={n} Δ={counts:?}");
            let check = CheckResult::flag(
                id.clone(),
                tv == qi(0),
                format!("{} states, TV {}", exact.states.len(), fmt_q(&tv)),
            )
            .timed(t);
            Ok((check, vec![id, exact.states.len().to_string(), fmt_q(&tv)]))
        })
        .collect();
    let mut checks = Vec::with_capacity(rows.len() + 1);
    let mut csv = Vec::new();
    for r in rows {
        let (c, row) = r?;
        checks.push(c);
        csv.push(row);
    }
    let secs = started.elapsed().as_secs_f64();
    checks.push(CheckResult::at_most(
        "runtime",
        secs,
        cfg.tol("stationarity_seconds", tol::STATIONARITY_SECONDS),
        format!("{} instances", cases.len()),
    ));
    Ok((
        checks,
        vec![Artifact {
            name: "stationarity".into(),
            header: vec!["instance".into(), "states".into(), "tv".into()],
            rows: csv,
        }],
    ))
}

/// Run `f` on `replicas` independent streams in parallel and count failures;
/// the first failure's description is kept.
fn count_failures<F>(cfg: &SuiteConfig, offset: u64, f: F) -> Result<(usize, String)>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Option<String>> + Sync,
{
    let outcomes: Vec<Result<Option<String>>> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|i| f(&mut cfg.rng(offset + i)))
        .collect();
    let mut bad = 0;
    let mut first = String::new();
    for o in outcomes {
        if let Some(msg) = o? {
            if bad == 0 {
                first = msg;
            }
            bad += 1;
        }
    }
    Ok((bad, first))
}

fn with_example(summary: String, first: &str) -> String {
    if first.is_empty() {
        summary
    } else {
        format!("{summary}; first failure: {first}")
    }
}

fn flux_equivalence(cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    let max_n = cfg.n_values.first().copied().unwrap_or(64);
    let t = Instant::now();
    let (bad, first) = count_failures(cfg, 0, |rng| {
        let (a, b) = random_discrete_pair(max_n, rng);
        let moved = collapse_discrete_algorithmic(&a, &b, None)?;
        let (xi, _) = collapse_discrete_flux(&a, &b)?;
        let j = discrete_flux_values(&a, &b)?;
        let ledger = ledger_mismatches(&a, &xi, &j)?;
        Ok((moved != xi || ledger != 0).then(|| format!("{a:?} onto {b:?}")))
    })?;
    Ok(vec![CheckResult::at_most(
        "mismatches",
        bad as f64,
        0.0,
        with_example(format!("{} pairs, N ≤ {max_n}", cfg.replicas), &first),
    )
    .timed(t)])
}

fn order_independence(cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    let max_n = cfg.n_values.first().copied().unwrap_or(64);
    let t = Instant::now();
    let (bad, first) = count_failures(cfg, 0, |rng| {
        let (a, b) = random_discrete_pair(max_n, rng);
        let reference = collapse_discrete_algorithmic(&a, &b, None)?;
        let mut order: Vec<usize> = (0..a.particles()).collect();
        for _ in 0..10 {
            order.shuffle(rng);
            if collapse_discrete_algorithmic(&a, &b, Some(&order))? != reference {
                return Ok(Some(format!("{a:?} onto {b:?} with order {order:?}")));
            }
        }
        Ok(None)
    })?;
    Ok(vec![CheckResult::at_most(
        "mismatches",
        bad as f64,
        0.0,
        with_example(format!("{} pairs × 10 orders", cfg.replicas), &first),
    )
    .timed(t)])
}

fn commutation(cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    let max_n = cfg.n_values.first().copied().unwrap_or(32);
    let max_k = cfg.k_values.first().copied().unwrap_or(4);
    let t = Instant::now();
    let (bad, first) = count_failures(cfg, 0, |rng| {
        let n = rand::Rng::random_range(rng, 1..=max_n);
        let k = rand::Rng::random_range(rng, 1..=max_k);
        let parts = random_config_tuple(n, k, rng);
        Ok((!commutation_check_configs(&parts)?).then(|| format!("{parts:?}")))
    })?;
    let discrete = CheckResult::at_most("particles", bad as f64, 0.0, first).timed(t);
    let t = Instant::now();
    let (bad, first) = count_failures(cfg, 1 << 32, |rng| {
        let k = rand::Rng::random_range(rng, 1..=max_k);
        let parts = random_point_tuple(k, 16, 64, rng);
        Ok((!commutation_check_points(&parts, 16)?).then(|| format!("{parts:?}")))
    })?;
    let points = CheckResult::at_most("points", bad as f64, 0.0, first).timed(t);
    Ok(vec![discrete, points])
}

fn measure_representation(cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    let t = Instant::now();
    let (bad, first) = count_failures(cfg, 0, |rng| {
        let (a, b) = random_measure_pair(rng);
        let (c, flux) = collapse_measure(&a, &b)?;
        let rep = positive_set_representation(&a, &b, &flux)?;
        let (c2, _) = collapse_measure_with(&a, &b, FluxMethod::Enumeration)?;
        let ok = rep == c
            && c2 == c
            && flux.gamma_total() == qi(0)
            && c.is_dominated_by(&b)
            && c.total_mass() == a.total_mass();
        Ok((!ok).then(|| format!("{a:?} onto {b:?}")))
    })?;
    Ok(vec![CheckResult::at_most(
        "mismatches",
        bad as f64,
        0.0,
        with_example(format!("{} pairs", cfg.replicas), &first),
    )
    .timed(t)])
}

fn families() -> [(Model, &'static str); 2] {
    [(Model::Tasep, "tasep"), (Model::Had, "had")]
}

fn s2_oracle(cfg: &SuiteConfig) -> Result<Outcome> {
    let cells = cfg.n_values.first().copied().unwrap_or(8);
    let bound = cfg.tol("s2_oracle", tol::S2_ORACLE);
    let budget = cfg.tol("s2_oracle_seconds", tol::S2_ORACLE_SECONDS);
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (fi, (fam, name)) in families().into_iter().enumerate() {
        let t = Instant::now();
        let per: Vec<Result<(f64, f64, f64, bool)>> = (0..cfg.replicas as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = cfg.rng(((fi as u64) << 32) + i);
                let (r1, r2) = random_cell_pair(cells, cells, fam, &mut rng);
                let (m1, m2) = (r1.total_mass(), r2.total_mass());
                let closed = collapse_core::rate::s2(&r1, &r2, &m1, &m2, fam)?.value;
                let t = Instant::now();
                let dp = s2_dp_oracle(&r1, &r2, &m1, &m2, fam, 4096)?;
                let secs = t.elapsed().as_secs_f64();
                let reproduces = match &dp.psi1 {
                    Some(p) => collapse_measure(p, &r2)?.0 == r1,
                    None => false,
                };
                Ok((closed, dp.value, secs, reproduces))
            })
            .collect();
        let mut worst: f64 = 0.0;
        let mut slowest: f64 = 0.0;
        let mut all_reproduce = true;
        for (i, r) in per.into_iter().enumerate() {
            let (closed, dp, secs, rep) = r?;
            worst = worst.max((closed - dp).abs());
            slowest = slowest.max(secs);
            all_reproduce &= rep;
            rows.push(vec![
                name.to_string(),
                i.to_string(),
                format!("{closed:.12}"),
                format!("{dp:.12}"),
                format!("{secs:.4}"),
            ]);
        }
        checks.push(
            CheckResult::at_most(format!("{name} residual"), worst, bound, format!("{} instances", cfg.replicas))
                .timed(t),
        );
        checks.push(CheckResult::at_most(format!("{name} runtime"), slowest, budget, "seconds, slowest instance".into()));
        checks.push(CheckResult::flag(
            format!("{name} minimizer preimage"),
            all_reproduce,
            "lattice minimizers collapse onto ρ₁".into(),
        ));
    }
    Ok((
        checks,
        vec![Artifact {
            name: "s2-oracle".into(),
            header: ["family", "instance", "closed", "oracle", "seconds"].map(String::from).to_vec(),
            rows,
        }],
    ))
}

/// Two bumps whose balance intervals are nested, so the inner one is dropped.
pub fn nested_balance_instance() -> Result<(TorusMeasure, Q)> {
    let rho1 = TorusMeasure::sum_of_arcs(&[
        (q(6, 10), q(2, 10), qi(1)),
        (q(45, 100), q(5, 100), qi(1)),
    ])?;
    Ok((rho1, q(1, 2)))
}

fn minimizers(cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    let cells = cfg.n_values.first().copied().unwrap_or(8);
    let bound = cfg.tol("minimizer", tol::MINIMIZER);
    let mut checks = Vec::new();
    for (fi, (fam, name)) in families().into_iter().enumerate() {
        let t = Instant::now();
        let mut pairs: Vec<(TorusMeasure, TorusMeasure)> = (0..cfg.replicas as u64)
            .map(|i| random_cell_pair(cells, cells, fam, &mut cfg.rng(((fi as u64) << 32) + i)))
            .collect();
        let (nested, m2) = nested_balance_instance()?;
        let star2 = collapse_core::rate::minimizer_rho2(&nested, &m2)?;
        let nested_arcs = collapse_core::rate::minimizer_rho2_intervals(&nested, &m2)?;
        pairs.push((nested, star2));
        let mut worst: f64 = 0.0;
        for (r1, r2) in &pairs {
            let res = contraction_identity_check(r1, r2, fam)?;
            worst = worst.max(res.rho1_side).max(res.rho2_side);
        }
        checks.push(
            CheckResult::at_most(
                format!("{name} residual"),
                worst,
                bound,
                format!("{} instances, nested case kept {} interval(s)", pairs.len(), nested_arcs.len()),
            )
            .timed(t),
        );
    }
    Ok(checks)
}

fn nonconvexity(cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    let t = Instant::now();
    let margin = convexity_margin(&q(999, 1000))?;
    let mut checks = vec![CheckResult {
        passed: margin < cfg.tol("nonconvex_margin", tol::NONCONVEX_MARGIN),
        ..CheckResult::at_most("margin at c=0.999", margin, tol::NONCONVEX_MARGIN, "strictly negative".into())
    }
    .timed(t)];
    let t = Instant::now();
    let (psi, tilde, rho) = nonconvex_preimage_example(&q(1, 10))?;
    let a = collapse_k(&psi)?.into_parts();
    let b = collapse_k(&tilde)?.into_parts();
    let mid: Vec<TorusMeasure> = psi.iter().zip(&tilde).map(|(x, y)| x.mix(y, &q(1, 2))).collect();
    let c = collapse_k(&mid)?.into_parts();
    checks.push(CheckResult::flag("ψ reproduces ρ", a == rho, String::new()).timed(t));
    checks.push(CheckResult::flag("ψ̃ reproduces ρ", b == rho, String::new()));
    checks.push(CheckResult::flag("midpoint differs", c != rho, String::new()));
    Ok(checks)
}

fn ldp_decay(cfg: &SuiteConfig) -> Result<Outcome> {
    let profiles = [vec![q(1, 2), q(1, 10)], vec![q(1, 5), q(2, 5), q(3, 5), q(4, 5)]];
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for p in profiles {
        let t = Instant::now();
        let m = p.iter().fold(qi(0), |a, d| a + d) / qi(p.len() as i64);
        let table: Vec<LdpRow> = ldp_decay_exact(&p, &cfg.n_values, &m)?;
        let label = format!("B={}", p.len());
        let worst = table
            .iter()
            .map(|r| r.gap / r.bound)
            .fold(0.0, f64::max);
        let decreasing = table.windows(2).all(|w| w[1].gap < w[0].gap);
        for r in &table {
            rows.push(vec![
                label.clone(),
                r.n.to_string(),
                format!("{:.12}", r.rate),
                format!("{:.12}", r.s1),
                format!("{:.3e}", r.gap),
                format!("{:.3e}", r.bound),
            ]);
        }
        checks.push(
            CheckResult::at_most(format!("{label} gap/bound"), worst, 1.0, String::new()).timed(t),
        );
        checks.push(CheckResult::flag(format!("{label} decreasing"), decreasing, String::new()));
    }
    Ok((
        checks,
        vec![Artifact {
            name: "ldp-decay".into(),
            header: ["profile", "n", "rate", "s1", "gap", "bound"].map(String::from).to_vec(),
            rows,
        }],
    ))
}

/// Scalar statistics of a two-class HAD state, all from positions in ticks:
/// the largest gap between consecutive second-class points, the total
/// length from each first-class point to the next point, and the number of
/// cyclically adjacent first-class pairs in rank order.
pub fn had_statistics(layers: &[Vec<u64>]) -> [f64; 3] {
    let first = &layers[0];
    let all = &layers[1];
    let n = all.len();
    let is_first: Vec<bool> = all.iter().map(|x| first.binary_search(x).is_ok()).collect();
    let second: Vec<u64> = all.iter().zip(&is_first).filter(|(_, f)| !**f).map(|(x, _)| *x).collect();
    let gap = |a: u64, b: u64| (if b > a { b - a } else { b + TICKS - a }) as f64 / TICKS as f64;
    let max_gap = if second.len() < 2 {
        1.0
    } else {
        (0..second.len())
            .map(|i| gap(second[i], second[(i + 1) % second.len()]))
            .fold(0.0, f64::max)
    };
    let owned: f64 = (0..n).filter(|&i| is_first[i]).map(|i| gap(all[i], all[(i + 1) % n])).sum();
    let adjacent = (0..n).filter(|&i| is_first[i] && is_first[(i + 1) % n]).count() as f64;
    [max_gap, owned, adjacent]
}

/// Marks between recorded states of the simulated chain.
pub const HAD_SPACING: usize = 200;
/// Marks discarded before recording.
pub const HAD_BURN_IN: usize = 5_000;

fn had_invariance(cfg: &SuiteConfig) -> Result<Outcome> {
    let n1 = cfg.n_values.first().copied().unwrap_or(8);
    let n2 = cfg.n_values.get(1).copied().unwrap_or(16);
    let spec = ProcessSpec::had(vec![n1, n2 - n1])?;
    let samples = cfg.replicas;
    let level = cfg.tol("ks_level", tol::KS_LEVEL);
    let seeds: Vec<u64> = (0..8).collect();
    let names = ["max second-class gap", "first-class owned length", "first-class adjacencies"];
    let per_seed: Vec<Result<[f64; 3]>> = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = cfg.rng(s);
            let sampled: Vec<[f64; 3]> = (0..samples)
                .map(|_| {
                    let t = sample_invariant_had(&spec, &mut rng)?;
                    Ok(had_statistics(&ticks_of(&t)?))
                })
                .collect::<Result<_>>()?;
            // Start far from equilibrium: evenly spaced, first class bunched.
            let all: Vec<u64> = (0..n2 as u64).map(|i| i * (TICKS / n2 as u64)).collect();
            let mut chain = HadChain::from_ticks(vec![all[..n1].to_vec(), all.clone()]);
            for _ in 0..HAD_BURN_IN {
                chain.step(&mut rng);
            }
            let mut simulated = Vec::with_capacity(samples);
            for _ in 0..samples {
                for _ in 0..HAD_SPACING {
                    chain.step(&mut rng);
                }
                simulated.push(had_statistics(&chain.layers));
            }
            let mut ps = [0.0; 3];
            for (j, p) in ps.iter_mut().enumerate() {
                let a: Vec<f64> = sampled.iter().map(|v| v[j]).collect();
                let b: Vec<f64> = simulated.iter().map(|v| v[j]).collect();
                *p = ks_two_sample(&a, &b)?.1;
            }
            Ok(ps)
        })
        .collect();
    let mut rows = Vec::new();
    let mut passing = 0;
    let mut detail = Vec::new();
    for (s, r) in seeds.iter().zip(per_seed) {
        let ps = r?;
        let ok = ps.iter().all(|&p| p > level);
        passing += usize::from(ok);
        detail.push(format!("seed {s}: min p {:.3}", ps.iter().copied().fold(1.0, f64::min)));
        for (name, p) in names.iter().zip(ps) {
            rows.push(vec![s.to_string(), (*name).to_string(), format!("{p:.6}")]);
        }
    }
    let required = cfg.tol("had_seeds_required", tol::HAD_SEEDS_REQUIRED as f64);
    Ok((
        vec![CheckResult::at_least(
            "seeds passing",
            passing as f64,
            required,
            detail.join("; "),
        )],
        vec![Artifact {
            name: "had-invariance".into(),
            header: ["seed", "statistic", "p_value"].map(String::from).to_vec(),
            rows,
        }],
    ))
}

fn ticks_of(t: &OrderedTuple<PointConfig>) -> Result<Vec<Vec<u64>>> {
    Ok(t.parts()
        .iter()
        .map(|p| p.points().iter().map(collapse_core::dynamics::q_to_ticks).collect::<collapse_core::Result<Vec<_>>>())
        .collect::<collapse_core::Result<Vec<_>>>()?)
}

/// `ρ₂` strictly below `ρ₃` wherever `ρ₃ > 0`, on `cells` equal cells with
/// densities in `(1/cells)ℤ`, and a flat first-class density `m₁` on the same
/// lattice with `0 < m₁ < m₂`.
fn strict_pair(cells: usize, fam: Model, rng: &mut ChaCha8Rng) -> (TorusMeasure, TorusMeasure, Q) {
    use rand::Rng;
    let top = match fam {
        Model::Tasep => cells as i64,
        Model::Had => 2 * cells as i64,
    };
    let grid = collapse_core::measure::Grid::new((0..cells).map(|i| q(i as i64, cells as i64)));
    loop {
        let d3: Vec<i64> = (0..cells).map(|_| rng.random_range(0..=top)).collect();
        let d2: Vec<i64> = d3.iter().map(|&d| if d > 0 { rng.random_range(0..d) } else { 0 }).collect();
        let units: i64 = d2.iter().sum();
        // Flat density m₁ = j/cells needs total units j·cells < units.
        let max_j = (units - 1) / cells as i64;
        if max_j < 1 {
            continue;
        }
        let j = rng.random_range(1..=max_j);
        let to = |v: &[i64]| {
            TorusMeasure::from_grid(&grid, v.iter().map(|&d| q(d, cells as i64)).collect(), Vec::new())
                .expect("valid")
        };
        return (to(&d2), to(&d3), q(j, cells as i64));
    }
}

fn recursion(cfg: &SuiteConfig) -> Result<Outcome> {
    let cells = cfg.n_values.first().copied().unwrap_or(4);
    let lattice = LatticeSpec::new(cells, cells);
    let bound = cfg.tol("recursion", tol::RECURSION);
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (fi, (fam, name)) in families().into_iter().enumerate() {
        let t = Instant::now();
        let per: Vec<Result<(f64, f64, usize)>> = (0..cfg.replicas as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = cfg.rng(((fi as u64) << 32) + i);
                let psi = random_lattice_triple(cells, cells, fam, &mut rng)?;
                let rho = collapse_k(&psi)?.into_parts();
                let masses: Vec<Q> = psi.iter().map(TorusMeasure::total_mass).collect();
                let direct = sk_oracle(&rho, &masses, fam, &lattice)?;
                let rec = s3_by_recursion(&rho, &masses, fam, &lattice)?;
                Ok((direct.value, rec.value, direct.near_minimizers))
            })
            .collect();
        let mut worst: f64 = 0.0;
        let mut multiple = 0;
        for (i, r) in per.into_iter().enumerate() {
            let (d, r, near) = r?;
            let diff = if d.is_finite() && r.is_finite() { (d - r).abs() } else { f64::INFINITY };
            worst = worst.max(diff);
            multiple += usize::from(near > 1);
            rows.push(vec![name.to_string(), i.to_string(), format!("{d:.12}"), format!("{r:.12}"), near.to_string()]);
        }
        checks.push(
            CheckResult::at_most(
                format!("{name} direct vs recursion"),
                worst,
                bound,
                format!("{} instances, {multiple} with several near-minimizers", cfg.replicas),
            )
            .timed(t),
        );
        // Minimizing out the first class recovers the two-class rate.
        let t = Instant::now();
        let mut rng = cfg.rng(((fi as u64) << 32) + (1 << 20));
        let (r2, r3, m1) = strict_pair(cells, fam, &mut rng);
        let masses = [m1, r2.total_mass(), r3.total_mass()];
        let c = contraction_check_k3(&r2, &r3, &masses, fam, &lattice)?;
        checks.push(
            CheckResult::at_most(
                format!("{name} three-class contraction"),
                (c.s3 - c.s2).abs(),
                bound,
                format!("S₃ {:.6}, S₂ {:.6}", c.s3, c.s2),
            )
            .timed(t),
        );
    }
    Ok((
        checks,
        vec![Artifact {
            name: "recursion".into(),
            header: ["family", "instance", "direct", "recursion", "near_minimizers"].map(String::from).to_vec(),
            rows,
        }],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_vectors_enumerates_all() {
        assert_eq!(count_vectors(2, 2).len(), 6);
        assert_eq!(count_vectors(6, 3).len(), 84);
    }

    #[test]
    fn unknown_suite_is_an_error() {
        assert!(matches!(
            SuiteConfig::for_suite("nope", 0),
            Err(HarnessError::UnknownSuite(_))
        ));
    }

    #[test]
    fn statistics_of_a_simple_state() {
        let t = TICKS / 4;
        let s = had_statistics(&[vec![0], vec![0, t, 2 * t, 3 * t]]);
        assert_eq!(s, [0.5, 0.25, 0.0]);
    }

    #[test]
    fn small_suites_pass() {
        for name in ["flux-equivalence", "order-independence", "measure-representation"] {
            let mut cfg = SuiteConfig::for_suite(name, 1).unwrap();
            cfg.replicas = 20;
            let r = run_suite(&cfg).unwrap();
            assert!(r.passed, "{name}: {:?}", r.checks);
        }
    }
}
