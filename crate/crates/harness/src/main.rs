use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use collapse_core::collapse::{collapse_k, collapse_measure, collapse_points, collapse_discrete_flux};
use collapse_core::dynamics::{
    exact_stationary, had_simulate, pushforward_distribution, sample_invariant_had,
    sample_invariant_tasep, tasep_simulate, Model, ProcessSpec,
};
use collapse_core::rate::{
    contraction_identity_check, ldp_decay_exact, minimizer_rho1, minimizer_rho2,
    nonconvex_preimage_example, nonconvexity_certificate, s1, s2_with_tol, EntropyKernel,
};
use collapse_core::rational::{fmt_q, parse_q, q, qi, Q};
use collapse_core::{PointConfig, TorusConfig, TorusMeasure};
use collapse_harness::report::{checks_csv, to_json, write_report};
use collapse_harness::{run_suite, SuiteConfig, SUITES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "collapse", version, about = "Multiclass TASEP/HAD invariant measures by collapsing")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Json)]
    format: OutFormat,
    /// Output directory; results go to stdout when unset (suites default to ./collapse-out).
    #[arg(long, global = true, env = "COLLAPSE_OUT_DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Relative tolerance for detecting equal densities, as "p/q".
    #[arg(long, global = true, default_value = "0")]
    eq_tol: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Regime {
    Discrete,
    Points,
    Measure,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Tasep,
    Had,
}

impl From<Family> for Model {
    fn from(f: Family) -> Self {
        match f {
            Family::Tasep => Model::Tasep,
            Family::Had => Model::Had,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Given {
    Rho1,
    Rho2,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Solve,
    Pushforward,
}

#[derive(Subcommand)]
enum Command {
    /// Collapse a tuple of layers read from a JSON file `{"layers": [...]}`.
    Collapse {
        #[arg(long, value_enum)]
        regime: Regime,
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the multiclass dynamics from an invariant sample.
    Simulate {
        #[arg(long, value_enum)]
        model: Family,
        /// Ring size (TASEP only).
        #[arg(long, default_value_t = 0)]
        ring: usize,
        /// Particles (or points) per class.
        #[arg(long, value_delimiter = ',')]
        counts: Vec<usize>,
        #[arg(long)]
        horizon: f64,
    },
    /// Exact stationary law of multiclass TASEP.
    Stationary {
        #[arg(long)]
        ring: usize,
        #[arg(long, value_delimiter = ',')]
        counts: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Method::Solve)]
        method: Method,
    },
    /// Independent draws from the invariant measure.
    SampleInvariant {
        #[arg(long, value_enum)]
        model: Family,
        #[arg(long, default_value_t = 0)]
        ring: usize,
        #[arg(long, value_delimiter = ',')]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        samples: usize,
    },
    /// Rate functional of one or two profiles read from JSON files.
    RateEval {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        rho1: PathBuf,
        #[arg(long)]
        rho2: Option<PathBuf>,
        /// Mass parameters; default to the profile masses.
        #[arg(long)]
        m1: Option<String>,
        #[arg(long)]
        m2: Option<String>,
    },
    /// Most likely complementary profile under a one-class constraint.
    Minimizer {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long, value_enum)]
        given: Given,
        #[arg(long)]
        rho: PathBuf,
        /// Mass of the profile to construct.
        #[arg(long)]
        mass: String,
    },
    /// Exact finite-size decay of a binned profile probability.
    LdpDecay {
        #[arg(long, value_delimiter = ',')]
        profile: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
        n: Vec<usize>,
    },
    /// Convexity margins of the two-class rate and the non-convex preimage example.
    CertifyNonconvex,
    /// Run an acceptance suite, or all of them with `all`.
    Suite {
        name: String,
        #[arg(long)]
        replicas: Option<usize>,
        /// Full suite configuration as JSON; overrides the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Deserialize)]
struct LayersFile<T> {
    layers: Vec<T>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

struct Output<'a> {
    cli: &'a Cli,
}

impl Output<'_> {
    /// Write `name.json` or `name.csv` under `--out`, or print.
    fn emit(&self, name: &str, json: &serde_json::Value, csv: Option<String>) -> Result<()> {
        let (body, ext) = match (self.cli.format, csv) {
            (OutFormat::Csv, Some(c)) => (c, "csv"),
            (OutFormat::Csv, None) => bail!("`{name}` has no CSV form; use --format json"),
            (OutFormat::Json, _) => (serde_json::to_string_pretty(json)?, "json"),
        };
        match &self.cli.out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                let path = dir.join(format!("{name}.{ext}"));
                fs::write(&path, body)?;
                eprintln!("wrote {}", path.display());
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                match writeln!(stdout, "{body}") {
                    Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                    r => r?,
                }
            }
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let out = Output { cli };
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    match &cli.command {
        Command::Collapse { regime, input } => collapse_cmd(&out, *regime, input)?,
        Command::Simulate { model, ring, counts, horizon } => {
            simulate_cmd(&out, *model, *ring, counts, *horizon, &mut rng)?
        }
        Command::Stationary { ring, counts, method } => {
            let spec = ProcessSpec::tasep(*ring, counts.clone())?;
            let table = match method {
                Method::Solve => exact_stationary(&spec)?,
                Method::Pushforward => pushforward_distribution(&spec)?,
            };
            out.emit("stationary", &serde_json::to_value(&table)?, Some(table.to_csv()))?;
        }
        Command::SampleInvariant { model, ring, counts, samples } => {
            let mut rows = Vec::new();
            let mut csv = String::from("sample,class,position\n");
            for s in 0..*samples {
                match model {
                    Family::Tasep => {
                        let t = sample_invariant_tasep(&ProcessSpec::tasep(*ring, counts.clone())?, &mut rng)?;
                        let labels = collapse_core::lattice::class_label_encode(&t);
                        for (x, l) in labels.iter().enumerate() {
                            csv.push_str(&format!("{s},{l},{x}\n"));
                        }
                        rows.push(json!(labels));
                    }
                    Family::Had => {
                        let t = sample_invariant_had(&ProcessSpec::had(counts.clone())?, &mut rng)?;
                        push_point_rows(&mut csv, s, t.parts());
                        rows.push(serde_json::to_value(&t)?);
                    }
                }
            }
            out.emit("samples", &json!({ "seed": cli.seed, "samples": rows }), Some(csv))?;
        }
        Command::RateEval { family, rho1, rho2, m1, m2 } => {
            let tol = parse_q(&cli.eq_tol)?;
            let fam: Model = (*family).into();
            let r1: TorusMeasure = read_json(rho1)?;
            let m1 = m1.as_deref().map(parse_q).transpose()?.unwrap_or_else(|| r1.total_mass());
            let value = match rho2 {
                None => json!({ "s1": s1(&r1, &EntropyKernel::new(fam, m1)?) }),
                Some(p) => {
                    let r2: TorusMeasure = read_json(p)?;
                    let m2 = m2.as_deref().map(parse_q).transpose()?.unwrap_or_else(|| r2.total_mass());
                    serde_json::to_value(s2_with_tol(&r1, &r2, &m1, &m2, fam, &tol)?)?
                }
            };
            out.emit("rate", &value, None)?;
        }
        Command::Minimizer { family, given, rho, mass } => {
            let fam: Model = (*family).into();
            let r: TorusMeasure = read_json(rho)?;
            let m = parse_q(mass)?;
            let (r1, r2) = match given {
                Given::Rho2 => (minimizer_rho1(&r, &m)?, r),
                Given::Rho1 => {
                    let star = minimizer_rho2(&r, &m)?;
                    (r, star)
                }
            };
            let residuals = contraction_identity_check(&r1, &r2, fam)?;
            out.emit("minimizer", &json!({ "rho1": r1, "rho2": r2, "residuals": residuals }), None)?;
        }
        Command::LdpDecay { profile, n } => {
            let p: Vec<Q> = profile.iter().map(|s| parse_q(s)).collect::<collapse_core::Result<_>>()?;
            if p.is_empty() {
                bail!("empty profile");
            }
            let m = p.iter().fold(qi(0), |a, d| a + d) / qi(p.len() as i64);
            let rows = ldp_decay_exact(&p, n, &m)?;
            let mut csv = String::from("n,rate,s1,gap,bound\n");
            for r in &rows {
                csv.push_str(&format!("{},{:e},{:e},{:e},{:e}\n", r.n, r.rate, r.s1, r.gap, r.bound));
            }
            out.emit("ldp-decay", &json!({ "mass": fmt_q(&m), "rows": rows }), Some(csv))?;
        }
        Command::CertifyNonconvex => {
            let cert = nonconvexity_certificate()?;
            let (psi, tilde, rho) = nonconvex_preimage_example(&q(1, 10))?;
            let mid: Vec<TorusMeasure> = psi.iter().zip(&tilde).map(|(a, b)| a.mix(b, &q(1, 2))).collect();
            let value = json!({
                "certificate": cert,
                "preimages": {
                    "rho": rho,
                    "psi_collapses_to_rho": collapse_k(&psi)?.into_parts() == rho,
                    "psi_tilde_collapses_to_rho": collapse_k(&tilde)?.into_parts() == rho,
                    "midpoint_image": collapse_k(&mid)?.into_parts(),
                },
            });
            out.emit("nonconvexity", &value, None)?;
            return Ok(cert.most_negative < 0.0);
        }
        Command::Suite { name, replicas, config } => return suite_cmd(cli, name, *replicas, config.as_deref()),
    }
    Ok(true)
}

fn push_point_rows(csv: &mut String, sample: usize, parts: &[PointConfig]) {
    for (c, layer) in parts.iter().enumerate() {
        for p in layer.points() {
            csv.push_str(&format!("{sample},{},{}\n", c + 1, fmt_q(p)));
        }
    }
}

fn collapse_cmd(out: &Output, regime: Regime, input: &Path) -> Result<()> {
    let value = match regime {
        Regime::Discrete => {
            let f: LayersFile<TorusConfig> = read_json(input)?;
            let flux = if f.layers.len() == 2 {
                Some(collapse_discrete_flux(&f.layers[0], &f.layers[1])?.1)
            } else {
                None
            };
            json!({ "layers": collapse_k(&f.layers)?, "flux": flux })
        }
        Regime::Points => {
            let f: LayersFile<PointConfig> = read_json(input)?;
            if f.layers.len() == 2 {
                collapse_points(&f.layers[0], &f.layers[1])?;
            }
            json!({ "layers": collapse_k(&f.layers)? })
        }
        Regime::Measure => {
            let f: LayersFile<TorusMeasure> = read_json(input)?;
            let flux = if f.layers.len() == 2 {
                Some(collapse_measure(&f.layers[0], &f.layers[1])?.1)
            } else {
                None
            };
            json!({ "layers": collapse_k(&f.layers)?, "flux": flux })
        }
    };
    out.emit("collapse", &value, None)
}

fn simulate_cmd(
    out: &Output,
    model: Family,
    ring: usize,
    counts: &[usize],
    horizon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        bail!("horizon must be a nonnegative number");
    }
    match model {
        Family::Tasep => {
            let start = sample_invariant_tasep(&ProcessSpec::tasep(ring, counts.to_vec())?, rng)?;
            let (events, end) = tasep_simulate(&start, horizon, rng);
            let mut csv = String::from("time,bond,labels\n");
            for e in &events {
                let labels: Vec<String> = e.labels.iter().map(u8::to_string).collect();
                csv.push_str(&format!("{:.9},{},{}\n", e.time, e.site, labels.join(" ")));
            }
            let value = json!({
                "start": collapse_core::lattice::class_label_encode(&start),
                "events": events,
                "final": collapse_core::lattice::class_label_encode(&end),
            });
            out.emit("tasep-events", &value, Some(csv))
        }
        Family::Had => {
            let start = sample_invariant_had(&ProcessSpec::had(counts.to_vec())?, rng)?;
            let (marks, end) = had_simulate(&start, horizon, rng)?;
            let mut csv = String::from("time,mark\n");
            for (t, u) in &marks {
                csv.push_str(&format!("{t:.9},{}\n", fmt_q(u)));
            }
            let marks: Vec<_> = marks.iter().map(|(t, u)| json!([t, fmt_q(u)])).collect();
            out.emit("had-events", &json!({ "start": start, "marks": marks, "final": end }), Some(csv))
        }
    }
}

fn suite_cmd(cli: &Cli, name: &str, replicas: Option<usize>, config: Option<&Path>) -> Result<bool> {
    let names: Vec<&str> = if name == "all" { SUITES.to_vec() } else { vec![name] };
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("collapse-out"));
    let mut all_ok = true;
    for n in names {
        let mut cfg = match config {
            Some(p) => read_json::<SuiteConfig>(p)?,
            None => SuiteConfig::for_suite(n, cli.seed)?,
        };
        if let Some(r) = replicas {
            cfg.replicas = r;
        }
        cfg.out_dir = Some(dir.clone());
        let report = run_suite(&cfg)?;
        write_report(&report, &dir)?;
        match cli.format {
            OutFormat::Json => eprintln!("{}", to_json(&report.checks)?),
            OutFormat::Csv => eprint!("{}", checks_csv(&report)?),
        }
        println!(
            "{} {} ({} checks, {:.1} s)",
            if report.passed { "PASS" } else { "FAIL" },
            report.suite,
            report.checks.len(),
            report.runtime_ms / 1e3
        );
        all_ok &= report.passed;
    }
    Ok(all_ok)
}
