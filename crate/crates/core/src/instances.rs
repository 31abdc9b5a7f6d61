//! Seeded random instances for the property checks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dynamics::Model;
use crate::error::Result;
use crate::lattice::{PointConfig, TorusConfig};
use crate::measure::{Grid, TorusMeasure};
use crate::rational::{q, zero, Q};

/// `m` distinct uniformly placed particles on `ℤ_n`.
pub fn random_config<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> TorusConfig {
    let mut sites: Vec<usize> = (0..n).collect();
    sites.shuffle(rng);
    TorusConfig::from_sites(n, &sites[..m]).expect("m ≤ n")
}

/// Layers on `ℤ_n` with nondecreasing particle counts, not necessarily ordered.
pub fn random_config_tuple<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<TorusConfig> {
    let mut counts: Vec<usize> = (0..k).map(|_| rng.random_range(0..=n)).collect();
    counts.sort_unstable();
    counts.into_iter().map(|m| random_config(n, m, rng)).collect()
}

/// A pair `(η₁, η₂)` with `|η₁| ≤ |η₂|` on a ring of size `2..=max_n`.
pub fn random_discrete_pair<R: Rng + ?Sized>(max_n: usize, rng: &mut R) -> (TorusConfig, TorusConfig) {
    let n = rng.random_range(2..=max_n.max(2));
    let mut t = random_config_tuple(n, 2, rng);
    let b = t.pop().unwrap();
    (t.pop().unwrap(), b)
}

/// Point layers with nondecreasing sizes on the grid `(1/den)ℤ`.
pub fn random_point_tuple<R: Rng + ?Sized>(
    k: usize,
    max_points: usize,
    den: usize,
    rng: &mut R,
) -> Vec<PointConfig> {
    let mut counts: Vec<usize> = (0..k)
        .map(|_| rng.random_range(0..=max_points.min(den)))
        .collect();
    counts.sort_unstable();
    counts
        .into_iter()
        .map(|m| {
            let cfg = random_config(den, m, rng);
            PointConfig::new(cfg.sites().iter().map(|&s| q(s as i64, den as i64)).collect())
                .expect("distinct")
        })
        .collect()
}

/// Piecewise-constant measure with up to `cells` pieces on `(1/den)ℤ`, small
/// rational densities and up to `atoms` atoms.
pub fn random_measure<R: Rng + ?Sized>(
    cells: usize,
    atoms: usize,
    den: usize,
    rng: &mut R,
) -> TorusMeasure {
    let mut bps: Vec<Q> = (0..cells)
        .map(|_| q(rng.random_range(0..den) as i64, den as i64))
        .collect();
    bps.push(zero());
    let grid = Grid::new(bps);
    let dens = (0..grid.cells())
        .map(|_| q(rng.random_range(0..=8), rng.random_range(1..=4)))
        .collect();
    let at = (0..rng.random_range(0..=atoms))
        .map(|_| {
            (
                q(rng.random_range(0..den) as i64, den as i64),
                q(rng.random_range(1..=6), rng.random_range(1..=4)),
            )
        })
        .collect::<Vec<_>>();
    let mut merged: Vec<(Q, Q)> = Vec::new();
    for (x, m) in at {
        match merged.iter_mut().find(|(y, _)| *y == x) {
            Some(e) => e.1 += m,
            None => merged.push((x, m)),
        }
    }
    TorusMeasure::from_grid(&grid, dens, merged).expect("valid")
}

/// A pair with `|ρ₁| ≤ |ρ₂|`, both with atoms allowed.
pub fn random_measure_pair<R: Rng + ?Sized>(rng: &mut R) -> (TorusMeasure, TorusMeasure) {
    let a = random_measure(rng.random_range(1..=5), 3, 24, rng);
    let b = random_measure(rng.random_range(1..=5), 3, 24, rng);
    if a.total_mass() <= b.total_mass() {
        (a, b)
    } else {
        (b, a)
    }
}

/// Density ceiling for generated profiles.
fn density_cap(family: Model) -> i64 {
    match family {
        Model::Tasep => 1,
        Model::Had => 2,
    }
}

/// An ordered pair of `cells`-cell profiles with densities in `(1/quantum)ℤ`:
/// each cell of `ρ₁` either equals `ρ₂` or is drawn below it, and
/// `0 < m₁ < m₂`.
pub fn random_cell_pair<R: Rng + ?Sized>(
    cells: usize,
    quantum: usize,
    family: Model,
    rng: &mut R,
) -> (TorusMeasure, TorusMeasure) {
    let grid = Grid::new((0..cells).map(|i| q(i as i64, cells as i64)));
    let top = density_cap(family) * quantum as i64;
    loop {
        let d2: Vec<i64> = (0..cells).map(|_| rng.random_range(0..=top)).collect();
        let d1: Vec<i64> = d2
            .iter()
            .map(|&d| if rng.random_bool(0.5) { d } else { rng.random_range(0..=d) })
            .collect();
        let (s1, s2): (i64, i64) = (d1.iter().sum(), d2.iter().sum());
        if s1 == 0 || s1 == s2 {
            continue;
        }
        let to = |v: &[i64]| {
            TorusMeasure::from_grid(
                &grid,
                v.iter().map(|&d| q(d, quantum as i64)).collect(),
                Vec::new(),
            )
            .expect("valid")
        };
        return (to(&d1), to(&d2));
    }
}

/// Absolutely continuous profile with `cells` cells, densities in
/// `(1/quantum)ℤ` and positive total mass.
pub fn random_profile<R: Rng + ?Sized>(
    cells: usize,
    quantum: usize,
    family: Model,
    rng: &mut R,
) -> TorusMeasure {
    let grid = Grid::new((0..cells).map(|i| q(i as i64, cells as i64)));
    let top = density_cap(family) * quantum as i64;
    loop {
        let d: Vec<i64> = (0..cells).map(|_| rng.random_range(0..=top)).collect();
        if d.iter().any(|&x| x > 0) {
            return TorusMeasure::from_grid(
                &grid,
                d.iter().map(|&x| q(x, quantum as i64)).collect(),
                Vec::new(),
            )
            .expect("valid");
        }
    }
}

/// Lattice triple `ψ` with strictly increasing masses on `cells` equal cells.
pub fn random_lattice_triple<R: Rng + ?Sized>(
    cells: usize,
    quantum: usize,
    family: Model,
    rng: &mut R,
) -> Result<Vec<TorusMeasure>> {
    loop {
        let mut t: Vec<TorusMeasure> = (0..3)
            .map(|_| random_profile(cells, quantum, family, rng))
            .collect();
        t.sort_by_key(TorusMeasure::total_mass);
        if t[0].total_mass() < t[1].total_mass() && t[1].total_mass() < t[2].total_mass() {
            return Ok(t);
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_pairs_are_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for fam in [Model::Tasep, Model::Had] {
            for _ in 0..50 {
                let (a, b) = random_cell_pair(8, 8, fam, &mut rng);
                assert!(a.is_dominated_by(&b));
                assert!(a.total_mass() < b.total_mass());
                assert!(a.total_mass() > qi(0));
            }
        }
        for _ in 0..50 {
            let (a, b) = random_measure_pair(&mut rng);
            assert!(a.total_mass() <= b.total_mass());
        }
    }
}
