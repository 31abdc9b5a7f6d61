//! Pass thresholds for the acceptance suites.

/// `|closed form − dynamic program|` for the two-class rate.
pub const S2_ORACLE: f64 = 1e-3;
/// Wall-clock budget of one dynamic-program evaluation, seconds.
pub const S2_ORACLE_SECONDS: f64 = 10.0;
/// Contraction identities of the two-class rate.
pub const MINIMIZER: f64 = 1e-12;
/// Three-class lattice search against the recursion through `S₂`.
pub const RECURSION: f64 = 1e-2;
/// KS p-value below which a HAD statistic counts as rejected.
pub const KS_LEVEL: f64 = 0.01;
/// Seeds out of eight that must pass the HAD comparison.
pub const HAD_SEEDS_REQUIRED: usize = 7;
/// Convexity margin at `c = 0.999` must be below this.
pub const NONCONVEX_MARGIN: f64 = 0.0;
/// Budget of the stationarity suite, seconds.
pub const STATIONARITY_SECONDS: f64 = 300.0;
