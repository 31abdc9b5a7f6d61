//! Multiclass TASEP and HAD dynamics, exact stationary laws on small rings,
//! collapsing samplers of the invariant measures, and empirical measures.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::collapse::collapse_k;
use crate::error::{Error, Result};
use crate::lattice::{
    check_enumeration_size, class_label_decode, class_label_encode, configs_with_count,
    OrderedTuple, PointConfig, TorusConfig, ENUM_MAX_STATES,
};
use crate::measure::TorusMeasure;
use crate::rational::{fmt_q, q, qi, zero, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Tasep,
    Had,
}

/// A multiclass system: `class_counts[i]` particles of class `i+1`.
/// Layer `j` holds `M_j = Δ_1 + … + Δ_j` particles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub model: Model,
    /// Ring size for TASEP; unused for HAD.
    #[serde(default)]
    pub ring: usize,
    pub class_counts: Vec<usize>,
}

impl ProcessSpec {
    pub fn tasep(ring: usize, class_counts: Vec<usize>) -> Result<Self> {
        let s = Self {
            model: Model::Tasep,
            ring,
            class_counts,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn had(class_counts: Vec<usize>) -> Result<Self> {
        let s = Self {
            model: Model::Had,
            ring: 0,
            class_counts,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_counts.is_empty() {
            return Err(Error::InvalidConfig("at least one class required".into()));
        }
        if self.model == Model::Tasep {
            if self.ring == 0 {
                return Err(Error::InvalidConfig("ring size must be positive".into()));
            }
            if self.layer_sizes().last().copied().unwrap_or(0) > self.ring {
                return Err(Error::InvalidConfig(format!(
                    "{} particles do not fit on a ring of {}",
                    self.layer_sizes().last().unwrap(),
                    self.ring
                )));
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.class_counts.len()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.class_counts
            .iter()
            .scan(0, |acc, d| {
                *acc += d;
                Some(*acc)
            })
            .collect()
    }
}

/// Rank for the sorting update: lower classes are stronger, holes weakest.
fn strength(label: u8, k: u8) -> u8 {
    if label == 0 {
        k + 1
    } else {
        label
    }
}

/// Sorting update on the bond `(x, x+1)`: the stronger label ends up at `x`.
/// Returns whether anything moved.
pub fn tasep_bond_update(labels: &mut [u8], k: u8, x: usize) -> bool {
    let n = labels.len();
    let y = (x + 1) % n;
    if strength(labels[y], k) < strength(labels[x], k) {
        labels.swap(x, y);
        true
    } else {
        false
    }
}

/// Same update on an ordered tuple of layers, applied to each layer.
pub fn tasep_step(tuple: &OrderedTuple<TorusConfig>, x: usize) -> OrderedTuple<TorusConfig> {
    let parts = tuple
        .parts()
        .iter()
        .map(|eta| {
            let n = eta.ring();
            let (a, b) = (eta.get(x), eta.get((x + 1) % n));
            let mut bits = eta.bits().to_vec();
            bits[x % n] = a || b;
            bits[(x + 1) % n] = a && b;
            TorusConfig::from_bits(bits).expect("nonempty ring")
        })
        .collect();
    OrderedTuple::new(parts).expect("sorting update keeps layers ordered")
}

/// Continuous-time multiclass TASEP on class labels.
#[derive(Debug, Clone)]
pub struct TasepChain {
    pub labels: Vec<u8>,
    pub k: u8,
    pub time: f64,
    clock: Exp<f64>,
}

impl TasepChain {
    pub fn new(tuple: &OrderedTuple<TorusConfig>) -> Self {
        Self::from_labels(class_label_encode(tuple), tuple.classes() as u8)
    }

    pub fn from_labels(labels: Vec<u8>, k: u8) -> Self {
        let rate = labels.len() as f64;
        Self {
            labels,
            k,
            time: 0.0,
            clock: Exp::new(rate).expect("positive rate"),
        }
    }

    /// One event of the global rate-`N` clock; returns `(holding time, bond)`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (f64, usize) {
        let dt = self.clock.sample(rng);
        let x = rng.random_range(0..self.labels.len());
        self.time += dt;
        tasep_bond_update(&mut self.labels, self.k, x);
        (dt, x)
    }

    pub fn state(&self) -> OrderedTuple<TorusConfig> {
        class_label_decode(&self.labels, self.k as usize).expect("labels stay valid")
    }
}

/// One recorded event: time, bond or mark, and the state afterwards.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TasepEvent {
    pub time: f64,
    pub site: usize,
    pub labels: Vec<u8>,
}

/// Run until `horizon`, recording every event.
pub fn tasep_simulate<R: Rng + ?Sized>(
    tuple: &OrderedTuple<TorusConfig>,
    horizon: f64,
    rng: &mut R,
) -> (Vec<TasepEvent>, OrderedTuple<TorusConfig>) {
    let mut chain = TasepChain::new(tuple);
    let mut events = Vec::new();
    loop {
        let before = chain.labels.clone();
        let (dt, x) = chain.step(rng);
        if chain.time > horizon {
            chain.labels = before;
            chain.time -= dt;
            break;
        }
        debug_assert!(class_label_decode(&chain.labels, chain.k as usize).is_ok());
        events.push(TasepEvent {
            time: chain.time,
            site: x,
            labels: chain.labels.clone(),
        });
    }
    (events, chain.state())
}

/// Time-weighted state frequencies over `[0, horizon]`.
pub fn tasep_occupation<R: Rng + ?Sized>(
    tuple: &OrderedTuple<TorusConfig>,
    horizon: f64,
    rng: &mut R,
) -> BTreeMap<Vec<u8>, f64> {
    let mut chain = TasepChain::new(tuple);
    let mut freq: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    loop {
        let state = chain.labels.clone();
        let t0 = chain.time;
        chain.step(rng);
        let dt = chain.time.min(horizon) - t0;
        *freq.entry(state).or_default() += dt / horizon;
        if chain.time >= horizon {
            break;
        }
    }
    freq
}

/// Resolution of simulated and sampled HAD points: multiples of `2^-53`.
pub const TICK_BITS: u32 = 53;
pub const TICKS: u64 = 1 << TICK_BITS;

pub fn ticks_to_q(t: u64) -> Q {
    Q::new(BigInt::from(t), BigInt::from(TICKS))
}

pub fn q_to_ticks(x: &Q) -> Result<u64> {
    use num_traits::ToPrimitive;
    let scaled = x * Q::from_integer(BigInt::from(TICKS));
    if !scaled.is_integer() || scaled.is_negative() {
        return Err(Error::Domain(format!(
            "{} is not a multiple of 2^-{TICK_BITS} in [0,1)",
            fmt_q(x)
        )));
    }
    scaled
        .to_integer()
        .to_u64()
        .filter(|&t| t < TICKS)
        .ok_or_else(|| Error::Domain(format!("{} outside [0,1)", fmt_q(x))))
}

/// Multiclass HAD on the dyadic grid, driven by shared uniform marks.
#[derive(Debug, Clone)]
pub struct HadChain {
    /// Sorted point positions of each layer, in ticks.
    pub layers: Vec<Vec<u64>>,
    pub time: f64,
    clock: Exp<f64>,
}

impl HadChain {
    pub fn new(tuple: &OrderedTuple<PointConfig>) -> Result<Self> {
        let layers = tuple
            .parts()
            .iter()
            .map(|p| p.points().iter().map(q_to_ticks).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_ticks(layers))
    }

    pub fn from_ticks(layers: Vec<Vec<u64>>) -> Self {
        Self {
            layers,
            time: 0.0,
            clock: Exp::new(1.0).expect("positive rate"),
        }
    }

    /// Apply the mark `u`: in every layer the point `x_i` with
    /// `u ∈ (x_i, x_{i+1}]` moves to `u`. Marks on an existing point are refused.
    pub fn apply_mark(&mut self, u: u64) -> bool {
        if self
            .layers
            .iter()
            .any(|l| l.binary_search(&u).is_ok())
        {
            return false;
        }
        for layer in &mut self.layers {
            if layer.is_empty() {
                continue;
            }
            let j = layer.partition_point(|&x| x < u);
            if j == 0 {
                layer.pop();
                layer.insert(0, u);
            } else {
                layer[j - 1] = u;
            }
        }
        true
    }

    /// One mark of the rate-1 Poisson process; returns `(holding time, mark)`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (f64, u64) {
        let dt = self.clock.sample(rng);
        self.time += dt;
        loop {
            let u = rng.random_range(0..TICKS);
            if self.apply_mark(u) {
                return (dt, u);
            }
        }
    }

    pub fn state(&self) -> OrderedTuple<PointConfig> {
        let parts = self
            .layers
            .iter()
            .map(|l| PointConfig::new(l.iter().map(|&t| ticks_to_q(t)).collect()).expect("distinct"))
            .collect();
        OrderedTuple::new(parts).expect("shared marks keep inclusion")
    }
}

/// Run the HAD chain until `horizon`; returns `(time, mark)` events and the final state.
pub fn had_simulate<R: Rng + ?Sized>(
    tuple: &OrderedTuple<PointConfig>,
    horizon: f64,
    rng: &mut R,
) -> Result<(Vec<(f64, Q)>, OrderedTuple<PointConfig>)> {
    let mut chain = HadChain::new(tuple)?;
    let mut events = Vec::new();
    loop {
        let saved = (chain.layers.clone(), chain.time);
        let (_, u) = chain.step(rng);
        if chain.time > horizon {
            chain.layers = saved.0;
            chain.time = saved.1;
            break;
        }
        debug_assert!(chain
            .layers
            .windows(2)
            .all(|w| w[0].iter().all(|x| w[1].binary_search(x).is_ok())));
        events.push((chain.time, ticks_to_q(u)));
    }
    Ok((events, chain.state()))
}

/// Probability table of a multiclass TASEP law, states as class-label vectors
/// in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StationaryTable {
    pub ring: usize,
    pub class_counts: Vec<usize>,
    pub states: Vec<Vec<u8>>,
    pub probabilities: Vec<Q>,
}

#[derive(Serialize)]
struct TableRow<'a> {
    labels: &'a [u8],
    probability: String,
}

impl Serialize for StationaryTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("StationaryTable", 3)?;
        st.serialize_field("ring", &self.ring)?;
        st.serialize_field("class_counts", &self.class_counts)?;
        let rows: Vec<TableRow> = self
            .states
            .iter()
            .zip(&self.probabilities)
            .map(|(l, p)| TableRow {
                labels: l,
                probability: fmt_q(p),
            })
            .collect();
        st.serialize_field("states", &rows)?;
        st.end()
    }
}

impl StationaryTable {
    pub fn probability_of(&self, labels: &[u8]) -> Q {
        self.states
            .binary_search_by(|s| s.as_slice().cmp(labels))
            .map(|i| self.probabilities[i].clone())
            .unwrap_or_else(|_| zero())
    }

    pub fn total(&self) -> Q {
        self.probabilities.iter().fold(zero(), |a, b| a + b)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("labels,probability\n");
        for (l, p) in self.states.iter().zip(&self.probabilities) {
            let s: String = l.iter().map(|d| char::from(b'0' + d)).collect();
            out.push_str(&format!("{s},{}\n", fmt_q(p)));
        }
        out
    }
}

/// `½ Σ |p − p'|` over the union of both supports.
pub fn total_variation(a: &StationaryTable, b: &StationaryTable) -> Q {
    let mut states: Vec<&Vec<u8>> = a.states.iter().chain(&b.states).collect();
    states.sort();
    states.dedup();
    let sum = states
        .into_iter()
        .map(|s| (a.probability_of(s) - b.probability_of(s)).abs())
        .fold(zero(), |x, y| x + y);
    sum / qi(2)
}

/// All label vectors with the given class counts, lexicographically.
pub fn enumerate_states(spec: &ProcessSpec) -> Result<Vec<Vec<u8>>> {
    if spec.model != Model::Tasep {
        return Err(Error::InvalidConfig(
            "state enumeration needs a discrete model".into(),
        ));
    }
    spec.validate()?;
    check_enumeration_size(spec.ring, spec.classes())?;
    let mut first: Vec<u8> = Vec::with_capacity(spec.ring);
    let holes = spec.ring - spec.layer_sizes().last().unwrap();
    first.extend(std::iter::repeat_n(0u8, holes));
    for (i, &d) in spec.class_counts.iter().enumerate() {
        first.extend(std::iter::repeat_n((i + 1) as u8, d));
    }
    let mut states = vec![first.clone()];
    let mut cur = first;
    while next_permutation(&mut cur) {
        states.push(cur.clone());
        if states.len() as u128 > ENUM_MAX_STATES {
            return Err(Error::TooLarge(format!(
                "more than {ENUM_MAX_STATES} states"
            )));
        }
    }
    Ok(states)
}

fn next_permutation(v: &mut [u8]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("pivot exists");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Solve `π L = 0`, `Σ π = 1` exactly by fraction-free elimination.
pub fn exact_stationary(spec: &ProcessSpec) -> Result<StationaryTable> {
    let states = enumerate_states(spec)?;
    let n = states.len();
    let k = spec.classes() as u8;
    let index: BTreeMap<&[u8], usize> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_slice(), i))
        .collect();
    // Row i of the transposed generator: inflow into state i, outflow on the diagonal.
    let mut a = vec![vec![BigInt::zero(); n + 1]; n];
    for (from, s) in states.iter().enumerate() {
        for x in 0..spec.ring {
            let mut t = s.clone();
            if tasep_bond_update(&mut t, k, x) {
                let to = index[t.as_slice()];
                a[to][from] += 1;
                a[from][from] -= 1;
            }
        }
    }
    for cell in a[n - 1].iter_mut() {
        *cell = BigInt::one();
    }
    let probabilities = bareiss_solve(a)?;
    Ok(StationaryTable {
        ring: spec.ring,
        class_counts: spec.class_counts.clone(),
        states,
        probabilities,
    })
}

/// Solve the augmented integer system `[A | b]` exactly.
fn bareiss_solve(mut m: Vec<Vec<BigInt>>) -> Result<Vec<Q>> {
    let n = m.len();
    let mut prev = BigInt::one();
    for k in 0..n {
        let p = (k..n)
            .find(|&r| !m[r][k].is_zero())
            .ok_or_else(|| Error::Internal("singular balance equations".into()))?;
        m.swap(k, p);
        let (top, rest) = m.split_at_mut(k + 1);
        let pivot_row = &top[k];
        for row in rest.iter_mut() {
            let f = row[k].clone();
            for j in k + 1..=n {
                let v = (&row[j] * &pivot_row[k] - &f * &pivot_row[j]) / &prev;
                row[j] = v;
            }
            row[k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    let mut x = vec![zero(); n];
    for i in (0..n).rev() {
        let mut acc = Q::from_integer(m[i][n].clone());
        for j in i + 1..n {
            acc -= Q::from_integer(m[i][j].clone()) * &x[j];
        }
        x[i] = acc / Q::from_integer(m[i][i].clone());
    }
    Ok(x)
}

/// Law of `ℂ_k` applied to independent uniform layers, exactly.
pub fn pushforward_distribution(spec: &ProcessSpec) -> Result<StationaryTable> {
    if spec.model != Model::Tasep {
        return Err(Error::InvalidConfig(
            "exact pushforward needs a discrete model".into(),
        ));
    }
    spec.validate()?;
    let layers: Vec<Vec<TorusConfig>> = spec
        .layer_sizes()
        .iter()
        .map(|&m| configs_with_count(spec.ring, m))
        .collect::<Result<_>>()?;
    let product: u128 = layers.iter().map(|l| l.len() as u128).product();
    if product > ENUM_MAX_STATES {
        return Err(Error::TooLarge(format!(
            "{product} layer tuples exceed the enumeration cap"
        )));
    }
    let mut counts: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    let mut idx = vec![0usize; layers.len()];
    loop {
        let parts: Vec<TorusConfig> = idx
            .iter()
            .zip(&layers)
            .map(|(&i, l)| l[i].clone())
            .collect();
        let labels = class_label_encode(&collapse_k(&parts)?);
        *counts.entry(labels).or_default() += 1;
        let mut d = 0;
        loop {
            if d == idx.len() {
                let states: Vec<Vec<u8>> = counts.keys().cloned().collect();
                let probabilities = counts
                    .values()
                    .map(|&c| q(c as i64, product as i64))
                    .collect();
                return Ok(StationaryTable {
                    ring: spec.ring,
                    class_counts: spec.class_counts.clone(),
                    states,
                    probabilities,
                });
            }
            idx[d] += 1;
            if idx[d] < layers[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Draw from the invariant measure: independent uniform layers, collapsed.
pub fn sample_invariant_tasep<R: Rng + ?Sized>(
    spec: &ProcessSpec,
    rng: &mut R,
) -> Result<OrderedTuple<TorusConfig>> {
    spec.validate()?;
    let parts: Vec<TorusConfig> = spec
        .layer_sizes()
        .iter()
        .map(|&m| {
            let sites = rand::seq::index::sample(rng, spec.ring, m).into_vec();
            TorusConfig::from_sites(spec.ring, &sites)
        })
        .collect::<Result<_>>()?;
    collapse_k(&parts)
}

/// `n` distinct uniform points on the dyadic grid, as ticks.
pub fn uniform_ticks<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u64> {
    let mut pts: Vec<u64> = Vec::with_capacity(n);
    while pts.len() < n {
        let u = rng.random_range(0..TICKS);
        if !pts.contains(&u) {
            pts.push(u);
        }
    }
    pts.sort_unstable();
    pts
}

pub fn uniform_points<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PointConfig {
    PointConfig::new(uniform_ticks(n, rng).into_iter().map(ticks_to_q).collect())
        .expect("distinct points")
}

/// HAD invariant sample: independent uniform point sets of sizes `N_j`, collapsed.
pub fn sample_invariant_had<R: Rng + ?Sized>(
    spec: &ProcessSpec,
    rng: &mut R,
) -> Result<OrderedTuple<PointConfig>> {
    spec.validate()?;
    let parts: Vec<PointConfig> = spec
        .layer_sizes()
        .iter()
        .map(|&n| uniform_points(n, rng))
        .collect();
    collapse_k(&parts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmpiricalMode {
    #[default]
    Atomic,
    Binned,
}

/// `(1/n) Σ_x η(x) δ_{x/n}`.
pub fn empirical_config(eta: &TorusConfig, n: usize) -> TorusMeasure {
    let w = q(1, n as i64);
    TorusMeasure::atomic(
        eta.sites()
            .into_iter()
            .map(|x| (q(x as i64, n as i64), w.clone()))
            .collect(),
    )
    .expect("distinct sites")
}

/// Density 1 on `[x/n − 1/2n, x/n + 1/2n)` for each occupied `x`.
pub fn empirical_config_binned(eta: &TorusConfig, n: usize) -> TorusMeasure {
    let n = n as i64;
    let arcs: Vec<(Q, Q, Q)> = eta
        .sites()
        .into_iter()
        .map(|x| (q(2 * x as i64 - 1, 2 * n), q(1, n), qi(1)))
        .collect();
    TorusMeasure::sum_of_arcs(&arcs).expect("valid arcs")
}

/// `(1/n) Σ δ_{x_i}`.
pub fn empirical_points(x: &PointConfig, n: usize) -> TorusMeasure {
    let w = q(1, n as i64);
    TorusMeasure::atomic(x.points().iter().map(|p| (p.clone(), w.clone())).collect())
        .expect("distinct points")
}

pub fn empirical(eta: &TorusConfig, n: usize, mode: EmpiricalMode) -> TorusMeasure {
    match mode {
        EmpiricalMode::Atomic => empirical_config(eta, n),
        EmpiricalMode::Binned => empirical_config_binned(eta, n),
    }
}
