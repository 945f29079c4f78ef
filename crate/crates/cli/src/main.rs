//! `metriclab`: reproducible experiment driver.
//!
//! Every verb resolves its parameters from long flags, optionally overridden
//! by a JSON object given with `--config`, writes a CSV with a provenance
//! header to `--out` and prints a one-line summary. Exit codes: 0 pass,
//! 1 assertion or numerical failure (with a witness dump on stderr), 2 usage.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use metriclab::acceptance::{
    full_diameter, independent_check, manifest, mazur_slack_table, radial_sweep, separated_ball_set,
    uniform_cube, write_radial_csv, write_slack_csv, CriterionResult,
};
use metriclab::compose::{ladder_report, BallCarving, InductiveSampler, ScaleLadder, TraceMode};
use metriclab::embed::{bourgain_embed, distortion_report, DistortionReport};
use metriclab::metric::AmbientMode;
use metriclab::oracle::{exact_sep, named_instance};
use metriclab::partition::{estimate_separation, BoundMode, CenterChoice, CkrSampler, PartitionSampler};
use metriclab::pipeline::{lp_separation_sampler, random_lp_set, sep_growth_experiment, PipelineConfig};
use metriclab::report::{csv_artifact, Artifact};
use metriclab::rng::{derive_seed, from_seed};
use metriclab::stats::power_law_exponent;
use metriclab::Error;

const EXIT_PASS: i32 = 0;
const EXIT_FAIL: i32 = 1;
const EXIT_USAGE: i32 = 2;

/// Comma-separated values.
#[derive(Clone, Debug, PartialEq)]
struct List<T>(Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|x| x.trim().parse::<T>().map_err(|e| format!("{x:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(List)
    }
}

impl<T: Display> Display for List<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Set sizes: a comma list, or `a..b` for the doublings of `a` up to `b`.
#[derive(Clone, Debug, PartialEq)]
struct Sizes(Vec<usize>);

impl FromStr for Sizes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some((a, b)) = s.split_once("..") {
            let a: usize = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
            let b: usize = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
            if a == 0 || a > b {
                return Err(format!("empty range {s:?}"));
            }
            let mut v = Vec::new();
            let mut n = a;
            while n <= b {
                v.push(n);
                n *= 2;
            }
            return Ok(Sizes(v));
        }
        s.parse::<List<usize>>().map(|l| Sizes(l.0))
    }
}

#[derive(Parser, Debug)]
#[command(name = "metriclab", version, about = "Separating partitions and embeddings of finite l_p sets")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Debug)]
struct Io {
    /// Output file (a directory for full-acceptance).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON object of flag values; its entries override flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Grid sweep of the Mazur pointwise inequality.
    MazurCheck(MazurCheck),
    /// Random check of the radial inclusion.
    RadialCheck(RadialCheck),
    /// CKR separation against dimension.
    CkrBench(CkrBench),
    /// Composed separation against the telescoped per-scale bound.
    ComposeBench(ComposeBench),
    /// One run of the end-to-end l_p sampler.
    Pipeline(Pipeline),
    /// Pipeline separation against n.
    SepGrowth(SepGrowth),
    /// Bourgain embedding distortion.
    EmbedDistortion(EmbedDistortion),
    /// Exact separation modulus of a named instance.
    Oracle(Oracle),
    /// The numbered acceptance suite with a pass/fail manifest.
    FullAcceptance(FullAcceptance),
}

#[derive(Args, Debug)]
struct MazurCheck {
    #[arg(long, default_value = "2,2.5,3,4,6,10")]
    p: List<f64>,
    #[arg(long, default_value_t = 0.01)]
    grid: f64,
    #[command(flatten)]
    io: Io,
}

#[derive(Args, Debug)]
struct RadialCheck {
    #[arg(long, default_value = "2.5,4,8")]
    p: List<f64>,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 1000)]
    points: usize,
    #[arg(long, default_value_t = 100)]
    perturbations: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    io: Io,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Centers {
    Net,
    All,
}

#[derive(Args, Debug)]
struct CkrBench {
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long, default_value = "2,4,8,16,32")]
    dims: List<usize>,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = Centers::Net)]
    centers: Centers,
    #[arg(long, default_value_t = 500)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    io: Io,
}

#[derive(Args, Debug)]
struct ComposeBench {
    #[arg(long, default_value = "2,3,4")]
    p: List<f64>,
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 1.25)]
    k_star: f64,
    #[arg(long, default_value_t = 3)]
    scales: usize,
    #[arg(long, default_value_t = 500)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    io: Io,
}

#[derive(Args, Debug)]
struct Pipeline {
    #[arg(long, default_value_t = 3.0)]
    p: f64,
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    /// `Δ` as a fraction of the diameter.
    #[arg(long, default_value_t = 0.25)]
    delta_fraction: f64,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    io: Io,
}

#[derive(Args, Debug)]
struct SepGrowth {
    #[arg(long, default_value = "3,4")]
    p: List<f64>,
    #[arg(long, default_value = "64..4096")]
    n: Sizes,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    io: Io,
}

#[derive(Args, Debug)]
struct EmbedDistortion {
    #[arg(long, default_value_t = 3.0)]
    p: f64,
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    io: Io,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Diameter,
    RadialWithinSet,
    RadialContinuous,
}

impl Mode {
    fn bound(self) -> BoundMode {
        match self {
            Mode::Diameter => BoundMode::DiameterBounded,
            Mode::RadialWithinSet => BoundMode::RadiallyBounded(AmbientMode::WithinSet),
            Mode::RadialContinuous => BoundMode::RadiallyBounded(AmbientMode::ContinuousLp),
        }
    }
}

#[derive(Args, Debug)]
struct Oracle {
    /// Named instances: two-point, equilateral3, square4, path5, cube8.
    #[arg(long)]
    instance: List<String>,
    #[arg(long)]
    delta: List<f64>,
    #[arg(long, value_enum, default_value_t = Mode::Diameter)]
    mode: Mode,
    #[command(flatten)]
    io: Io,
}

#[derive(Args, Debug)]
struct FullAcceptance {
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    io: Io,
}

/// What a verb produced.
struct Outcome {
    passed: bool,
    summary: String,
    artifacts: Vec<Artifact>,
    /// Details of the first failed assertion.
    witness: Option<String>,
    /// Lines printed ahead of the summary.
    details: Vec<String>,
}

enum Failure {
    Usage(String),
    Internal(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::Parse(_) => Failure::Usage(e.to_string()),
            other => Failure::Internal(other),
        }
    }
}

/// Replaces `--config FILE` by the flags it holds, appended last so they win.
fn expand_config(args: Vec<String>) -> Result<Vec<String>, String> {
    let mut out = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or("--config needs a file")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            out.push(a);
        }
    }
    let Some(path) = path else { return Ok(out) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    let json: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))?;
    let obj = json.as_object().ok_or_else(|| format!("{path}: config must be a JSON object"))?;
    for (key, value) in obj {
        if key == "config" {
            return Err(format!("{path}: key {key:?} is not allowed in a config file"));
        }
        let scalar = |v: &serde_json::Value| -> Result<String, String> {
            match v {
                serde_json::Value::Number(n) => Ok(n.to_string()),
                serde_json::Value::String(s) => Ok(s.clone()),
                _ => Err(format!("{path}: unsupported value for {key:?}")),
            }
        };
        let text = match value {
            serde_json::Value::Array(items) => items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?.join(","),
            v => scalar(v)?,
        };
        out.push(format!("--{}={text}", key.replace('_', "-")));
    }
    Ok(out)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let code = run(args, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}

/// Parses `args` (program name first), runs the verb and returns the exit code.
fn run(args: Vec<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(stderr, "{text}") } else { write!(stdout, "{text}") };
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_USAGE;
    }
    let (name, config, out, result) = dispatch(&cli.verb);
    let result = result.and_then(|o| {
        if let Some(path) = out {
            write_artifacts(&cli.verb, path, &o.artifacts)?;
        }
        Ok(o)
    });
    match result {
        Ok(o) => {
            for line in &o.details {
                let _ = writeln!(stdout, "{line}");
            }
            let _ = writeln!(stdout, "{name}: {} {}", if o.passed { "pass" } else { "FAIL" }, o.summary);
            if o.passed {
                EXIT_PASS
            } else {
                let w = o.witness.unwrap_or_else(|| o.summary.clone());
                let _ = writeln!(stderr, "{}", witness_dump(name, &config, &w));
                EXIT_FAIL
            }
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Internal(e)) => {
            let _ = writeln!(stderr, "{}", witness_dump(name, &config, &e.to_string()));
            EXIT_FAIL
        }
    }
}

fn witness_dump(verb: &str, config: &str, witness: &str) -> String {
    serde_json::json!({ "verb": verb, "config": config, "witness": witness }).to_string()
}

/// `METRICLAB_THREADS` caps the global pool.
fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("METRICLAB_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("METRICLAB_THREADS={v:?} is not a positive integer"))?;
    if n == 0 {
        return Err("METRICLAB_THREADS must be positive".into());
    }
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn write_artifacts(verb: &Verb, path: &Path, artifacts: &[Artifact]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Internal(Error::Io(format!("{}: {e}", path.display())));
    if matches!(verb, Verb::FullAcceptance(_)) {
        std::fs::create_dir_all(path).map_err(io)?;
        for a in artifacts {
            a.write_to(path)?;
        }
    } else if let Some(a) = artifacts.first() {
        std::fs::write(path, &a.contents).map_err(io)?;
    }
    Ok(())
}

type Dispatched<'a> = (&'static str, String, Option<&'a Path>, Result<Outcome, Failure>);

fn dispatch(verb: &Verb) -> Dispatched<'_> {
    macro_rules! go {
        ($name:expr, $args:expr, $config:expr, $f:expr) => {{
            let config = format!("{};{}", $name, $config);
            let result = $f($args, &config);
            ($name, config, $args.io.out.as_deref(), result)
        }};
    }
    match verb {
        Verb::MazurCheck(a) => go!("mazur-check", a, format!("p={};grid={}", a.p, a.grid), mazur_check),
        Verb::RadialCheck(a) => go!(
            "radial-check",
            a,
            format!("p={};dim={};points={};perturbations={}", a.p, a.dim, a.points, a.perturbations),
            radial_check
        ),
        Verb::CkrBench(a) => go!(
            "ckr-bench",
            a,
            format!("n={};dims={};delta={};centers={:?};trials={}", a.n, a.dims, a.delta, a.centers, a.trials),
            ckr_bench
        ),
        Verb::ComposeBench(a) => go!(
            "compose-bench",
            a,
            format!("p={};n={};dim={};k_star={};scales={};trials={}", a.p, a.n, a.dim, a.k_star, a.scales, a.trials),
            compose_bench
        ),
        Verb::Pipeline(a) => go!(
            "pipeline",
            a,
            format!("p={};n={};dim={};delta_fraction={};trials={}", a.p, a.n, a.dim, a.delta_fraction, a.trials),
            pipeline
        ),
        Verb::SepGrowth(a) => go!(
            "sep-growth",
            a,
            format!("p={};n={};dim={};trials={}", a.p, List(a.n.0.clone()), a.dim, a.trials),
            sep_growth
        ),
        Verb::EmbedDistortion(a) => {
            go!("embed-distortion", a, format!("p={};n={};dim={}", a.p, a.n, a.dim), embed_distortion)
        }
        Verb::Oracle(a) => {
            go!("oracle", a, format!("instance={};delta={};mode={:?}", a.instance, a.delta, a.mode), oracle)
        }
        Verb::FullAcceptance(a) => go!("full-acceptance", a, "", full_acceptance),
    }
}

fn mazur_check(a: &MazurCheck, config: &str) -> Result<Outcome, Failure> {
    let rows = mazur_slack_table(&a.p.0, a.grid)?;
    let worst = rows
        .iter()
        .copied()
        .min_by(|x, y| x.5.total_cmp(&y.5))
        .ok_or_else(|| Failure::Usage("empty p list".into()))?;
    let art = csv_artifact("mazur_slack.csv", config, 0, |o| write_slack_csv(&rows, o))?;
    let passed = worst.5 >= -1e-12;
    Ok(Outcome {
        passed,
        summary: format!("min slack {:e} over {} (p, alpha, lambda) grids", worst.5, rows.len()),
        artifacts: vec![art],
        witness: (!passed).then(|| {
            format!("p={} alpha={} lambda={} u={} v={} slack={:e}", worst.0, worst.1, worst.2, worst.3, worst.4, worst.5)
        }),
        details: Vec::new(),
    })
}

fn radial_check(a: &RadialCheck, config: &str) -> Result<Outcome, Failure> {
    let mut rows = Vec::new();
    for (k, &p) in a.p.0.iter().enumerate() {
        rows.push(radial_sweep(p, a.dim, a.points, a.perturbations, derive_seed(a.seed, k as u64))?);
    }
    let violations: usize = rows.iter().map(|r| r.violations).sum();
    let checks: usize = rows.iter().map(|r| r.checks).sum();
    let art = csv_artifact("radial_inclusion.csv", config, a.seed, |o| write_radial_csv(&rows, o))?;
    let bad = rows.iter().find(|r| r.violations > 0);
    Ok(Outcome {
        passed: violations == 0,
        summary: format!("{violations} violations in {checks} checks"),
        artifacts: vec![art],
        witness: bad.map(|r| format!("p={} violations={} min_margin={:e}", r.p, r.violations, r.min_margin)),
        details: Vec::new(),
    })
}

fn ckr_bench(a: &CkrBench, config: &str) -> Result<Outcome, Failure> {
    let choice = match a.centers {
        Centers::Net => CenterChoice::Net,
        Centers::All => CenterChoice::AllPoints,
    };
    let mut rows = Vec::new();
    for &k in &a.dims.0 {
        let s = Arc::new(separated_ball_set(k, a.n, a.delta, derive_seed(a.seed, k as u64))?);
        let ckr = CkrSampler::new(s, a.delta, choice)?;
        let rep = estimate_separation(&ckr, a.trials, derive_seed(a.seed, 100 + k as u64))?;
        rows.push((k, rep.sigma_hat, rep.half_width_at_argmax()));
    }
    let ks: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let sig: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let exponent = if rows.len() >= 2 { power_law_exponent(&ks, &sig) } else { f64::NAN };
    let n = a.n;
    let art = csv_artifact("ckr_bench.csv", config, a.seed, |o| {
        writeln!(o, "k,n,sigma_hat,half_width")?;
        for (k, s, h) in &rows {
            writeln!(o, "{k},{n},{s:e},{h:e}")?;
        }
        Ok(())
    })?;
    let table = rows.iter().map(|r| format!("k={} {:.3}", r.0, r.1)).collect::<Vec<_>>().join(", ");
    Ok(Outcome {
        passed: true,
        summary: format!("sigma_hat {table}; fitted exponent {exponent:.3}"),
        artifacts: vec![art],
        witness: None,
        details: Vec::new(),
    })
}

fn compose_bench(a: &ComposeBench, config: &str) -> Result<Outcome, Failure> {
    let scales = i32::try_from(a.scales).map_err(|_| Failure::Usage("too many scales".into()))?;
    let mut rows = Vec::new();
    for (k, &p) in a.p.0.iter().enumerate() {
        let s = Arc::new(uniform_cube(p, a.n, a.dim, derive_seed(a.seed, k as u64))?);
        let diam = full_diameter(&s)?;
        // The top scale covers twice the diameter.
        let delta = 2.0 * diam / a.k_star.powi(scales) * (1.0 + 1e-9);
        let ladder = ScaleLadder::with_top(delta, a.k_star, a.scales, diam)?;
        let sampler = InductiveSampler::with_ladder(
            Arc::new(BallCarving { centers: CenterChoice::AllPoints }),
            s.clone(),
            ladder,
            TraceMode::Ball,
        );
        let run_seed = derive_seed(a.seed, 10 + k as u64);
        let ids: Vec<usize> = (0..s.len()).collect();
        let rep = estimate_separation(&sampler, a.trials, run_seed)?;
        let lad = ladder_report(&sampler, &ids, a.trials, run_seed)?;
        let mut invalid = None;
        for t in 0..a.trials {
            if invalid.is_none() && !independent_check(&sampler.sample(run_seed, t)?, &s) {
                invalid = Some(t);
            }
        }
        let bound = lad.telescoped(a.k_star);
        let hw = rep.half_width_at_argmax();
        rows.push((p, delta, rep.sigma_hat, hw, bound, invalid));
    }
    let art = csv_artifact("compose_bench.csv", config, a.seed, |o| {
        writeln!(o, "p,delta,sigma_composed,half_width,telescoped,invalid_trial,ok")?;
        for (p, d, s, h, b, i) in &rows {
            let ok = s <= &(b + 3.0 * h) && i.is_none();
            let it = i.map(|t| t.to_string()).unwrap_or_default();
            writeln!(o, "{p},{d:e},{s:e},{h:e},{b:e},{it},{ok}")?;
        }
        Ok(())
    })?;
    let bad = rows.iter().find(|(_, _, s, h, b, i)| *s > b + 3.0 * h || i.is_some());
    let summary = rows
        .iter()
        .map(|r| format!("p={}: {:.3} <= {:.3} + 3*{:.3}", r.0, r.2, r.4, r.3))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome {
        passed: bad.is_none(),
        summary,
        artifacts: vec![art],
        witness: bad.map(|r| format!("p={} sigma={:e} telescoped={:e} invalid_trial={:?}", r.0, r.2, r.4, r.5)),
        details: Vec::new(),
    })
}

fn pipeline(a: &Pipeline, config: &str) -> Result<Outcome, Failure> {
    if !(a.delta_fraction > 0.0) {
        return Err(Failure::Usage(format!("delta fraction {} must be positive", a.delta_fraction)));
    }
    let mut rng = from_seed(derive_seed(a.seed, 0));
    let c = Arc::new(random_lp_set(a.p, a.n, a.dim, &mut rng)?);
    let diam = full_diameter(&c)?;
    let delta = if diam > 0.0 { a.delta_fraction * diam } else { 1.0 };
    let cfg = PipelineConfig::new(a.p, delta, a.trials, derive_seed(a.seed, 1))?;
    let mut rng = from_seed(derive_seed(a.seed, 2));
    let run = lp_separation_sampler(&cfg, c, &mut rng)?;
    let (lo, hi) = run.sigma_interval();
    let art = csv_artifact("pipeline.csv", config, a.seed, |o| run.report.write_csv(o))?;
    Ok(Outcome {
        passed: true,
        summary: format!(
            "sigma_hat {:.4} [{lo:.4}, {hi:.4}], bound value {:.3}, gamma {}",
            run.report.sigma_hat,
            run.bound_value,
            run.gamma_used()
        ),
        artifacts: vec![art],
        witness: None,
        details: Vec::new(),
    })
}

fn sep_growth(a: &SepGrowth, config: &str) -> Result<Outcome, Failure> {
    let table = sep_growth_experiment(&a.p.0, &a.n.0, a.dim, a.trials, a.seed)?;
    let min_n = a.n.0.iter().copied().find(|&n| n >= 256).unwrap_or(a.n.0[0]);
    let fits = table.log_n_fits(min_n);
    let art = csv_artifact("sep_growth.csv", config, a.seed, |o| table.write_csv(o))?;
    let summary = fits
        .iter()
        .map(|f| format!("p={} delta/diam={}: exponent in ln n {:.3}", f.p, f.delta_fraction, f.exponent_log_n))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome { passed: true, summary: format!("{} rows; {summary}", table.rows.len()), artifacts: vec![art], witness: None, details: Vec::new() })
}

fn embed_distortion(a: &EmbedDistortion, config: &str) -> Result<Outcome, Failure> {
    let s = Arc::new(uniform_cube(a.p, a.n, a.dim, derive_seed(a.seed, 0))?);
    let mut rng = from_seed(derive_seed(a.seed, 1));
    let map = bourgain_embed(s, &mut rng)?;
    let lip = map.check_lipschitz(1e-12);
    let rep = distortion_report(&map, None)?;
    let art = csv_artifact("embed_distortion.csv", config, a.seed, |o| DistortionReport::write_csv(&[rep.clone()], o))?;
    Ok(Outcome {
        passed: lip.is_ok(),
        summary: format!("distortion {:.3}, Lipschitz {:.6}", rep.distortion, rep.lip),
        artifacts: vec![art],
        witness: lip.err().map(|e| e.to_string()),
        details: Vec::new(),
    })
}

fn oracle(a: &Oracle, config: &str) -> Result<Outcome, Failure> {
    let mode = a.mode.bound();
    let mut rows = Vec::new();
    for name in &a.instance.0 {
        let s = named_instance(name)?;
        for &delta in &a.delta.0 {
            let r = exact_sep(&s, delta, mode)?;
            rows.push((name.clone(), delta, r.sigma_star, r.gap));
        }
    }
    let art = csv_artifact("oracle.csv", config, 0, |o| {
        writeln!(o, "instance,delta,mode,sigma_star,gap")?;
        for (name, d, s, g) in &rows {
            writeln!(o, "{name},{d:e},{},{s:e},{g:e}", mode.name())?;
        }
        Ok(())
    })?;
    let loose = rows.iter().find(|r| !(r.3 <= 1e-9));
    let summary = rows.iter().map(|r| format!("{} delta={}: sigma*={}", r.0, r.1, r.2)).collect::<Vec<_>>().join("; ");
    Ok(Outcome {
        passed: loose.is_none(),
        summary,
        artifacts: vec![art],
        witness: loose.map(|r| format!("{} delta={} certified gap {:e}", r.0, r.1, r.3)),
        details: Vec::new(),
    })
}

/// The suite twice, then the determinism check on the two runs.
fn full_acceptance(a: &FullAcceptance, _config: &str) -> Result<Outcome, Failure> {
    let results = metriclab::acceptance::run_all(a.seed);
    let mut artifacts: Vec<Artifact> = results.iter().flat_map(|r| r.artifacts.iter().cloned()).collect();
    artifacts.push(manifest(&results, a.seed)?);
    let failed: Vec<&CriterionResult> = results.iter().filter(|r| !r.passed).collect();
    let lines: Vec<String> = results.iter().map(CriterionResult::line).collect();
    Ok(Outcome {
        passed: failed.is_empty(),
        summary: format!("{} of {} criteria passed", results.len() - failed.len(), results.len()),
        artifacts,
        witness: (!failed.is_empty())
            .then(|| failed.iter().map(|r| format!("criterion {}: {}", r.id, r.summary)).collect::<Vec<_>>().join("; ")),
        details: lines,
    })
}
