//! The numbered acceptance checks. Each runner returns a pass/fail verdict,
//! a one-line summary and the CSV artifacts it produced. Runtimes are
//! measured but never written into artifacts, so two runs with the same seed
//! give byte-identical files.

use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng as _;

use crate::compose::{ladder_report, BallCarving, InductiveSampler, ScaleLadder, TraceMode};
use crate::embed::{
    bourgain_embed, distortion_report, euclid, exact_kernel_distance, growth_constant, truncation_map, DistortionReport,
};
use crate::error::{Error, Result};
use crate::mazur::{
    mazur_coords, pointwise_inequality_slack, radial_inclusion_check, radial_inclusion_radius, MazurParams,
};
use crate::metric::{diameter, min_enclosing_ball, sphere_direction, AmbientMode, PointSet, Space, WeightedVector};
use crate::oracle::{exact_sep, named_instance};
use crate::partition::{
    estimate_separation, extend_partition, padded_partition, BoundMode, CenterChoice, CkrSampler, Partition,
    PartitionSampler, Reinterpreted,
};
use crate::pipeline::{lp_separation_sampler, random_lp_set, sep_growth_experiment, PipelineConfig};
use crate::reduce::{jl_anchor_map, reduce_map_guarantee, sample_near};
use crate::report::{csv_artifact, Artifact};
use crate::rng::{derive_seed, from_seed};
use crate::stats::power_law_exponent;

pub const CRITERIA: [(u32, &str); 12] = [
    (1, "mazur pointwise inequality"),
    (2, "radial inclusion"),
    (3, "mazur norm, homogeneity and Lipschitz"),
    (4, "partition validity"),
    (5, "CKR scaling in dimension"),
    (6, "oracle agreement"),
    (7, "induction on scales telescoping"),
    (8, "JL plus Kirszbraun guarantees"),
    (9, "pipeline growth in n"),
    (10, "Bourgain embedding"),
    (11, "truncation map"),
    (12, "determinism"),
];

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub summary: String,
    pub artifacts: Vec<Artifact>,
    pub elapsed: Duration,
    /// A partition failed validation somewhere in this run.
    pub invalid_partition: bool,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {} ({:.1}s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.elapsed.as_secs_f64(),
            self.summary
        )
    }
}

struct Outcome {
    passed: bool,
    summary: String,
    artifacts: Vec<Artifact>,
}

fn name_of(id: u32) -> &'static str {
    CRITERIA.iter().find(|(k, _)| *k == id).map(|(_, n)| *n).unwrap_or("unknown")
}

/// Wall-clock budgets in seconds, where one is stated.
fn budget(id: u32) -> Option<f64> {
    match id {
        1 => Some(60.0),
        2 => Some(120.0),
        9 => Some(1800.0),
        _ => None,
    }
}

/// Runs one of criteria 1 to 11.
pub fn run_criterion(id: u32, seed: u64) -> CriterionResult {
    let seed_k = derive_seed(seed, id as u64);
    let start = Instant::now();
    let out = match id {
        1 => mazur_inequality(seed_k),
        2 => radial_inclusion(seed_k),
        3 => mazur_norms(seed_k),
        4 => partition_validity(seed_k),
        5 => ckr_scaling(seed_k),
        6 => oracle_agreement(seed_k),
        7 => telescoping(seed_k),
        8 => jl_kirszbraun(seed_k),
        9 => pipeline_growth(seed_k),
        10 => bourgain(seed_k),
        11 => truncation(seed_k),
        _ => Err(Error::Domain(format!("no runner for criterion {id}"))),
    };
    let elapsed = start.elapsed();
    let (mut passed, mut summary, artifacts, invalid) = match out {
        Ok(o) => (o.passed, o.summary, o.artifacts, false),
        Err(e) => {
            let invalid = matches!(e, Error::Validation(_));
            (false, format!("error: {e}"), Vec::new(), invalid)
        }
    };
    if let Some(limit) = budget(id) {
        if elapsed.as_secs_f64() > limit {
            passed = false;
            summary.push_str(&format!("; over the {limit} s budget"));
        }
    }
    CriterionResult { id, name: name_of(id), passed, summary, artifacts, elapsed, invalid_partition: invalid }
}

/// Criteria 1 to 11. A validation failure anywhere also fails criterion 4.
pub fn run_suite(seed: u64) -> Vec<CriterionResult> {
    let mut out: Vec<CriterionResult> = (1..=11).map(|id| run_criterion(id, seed)).collect();
    let bad: Vec<u32> = out.iter().filter(|r| r.invalid_partition).map(|r| r.id).collect();
    if !bad.is_empty() {
        let c4 = out.iter_mut().find(|r| r.id == 4).expect("criterion 4 ran");
        c4.passed = false;
        c4.summary.push_str(&format!("; invalid partitions in criteria {bad:?}"));
    }
    out
}

/// Criterion 12: the artifacts of two suite runs agree byte for byte.
pub fn determinism(first: &[CriterionResult], second: &[CriterionResult], seed: u64) -> CriterionResult {
    let start = Instant::now();
    let a: Vec<&Artifact> = first.iter().flat_map(|r| &r.artifacts).collect();
    let b: Vec<&Artifact> = second.iter().flat_map(|r| &r.artifacts).collect();
    let mut differing = Vec::new();
    if a.len() != b.len() {
        differing.push(format!("{} vs {} artifacts", a.len(), b.len()));
    }
    for (x, y) in a.iter().zip(&b) {
        if x != y {
            differing.push(x.name.clone());
        }
    }
    let m1 = manifest(first, seed).ok();
    let m2 = manifest(second, seed).ok();
    if m1.is_none() || m1 != m2 {
        differing.push("manifest.csv".into());
    }
    let passed = differing.is_empty();
    let summary = if passed {
        format!("{} artifacts byte-identical across two runs", a.len())
    } else {
        format!("differing: {}", differing.join(", "))
    };
    CriterionResult {
        id: 12,
        name: name_of(12),
        passed,
        summary,
        artifacts: Vec::new(),
        elapsed: start.elapsed(),
        invalid_partition: false,
    }
}

/// The full suite: criteria 1 to 11 twice, then the determinism check.
/// Results of the first run are returned with criterion 12 appended.
pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    let first = run_suite(seed);
    let second = run_suite(seed);
    let c12 = determinism(&first, &second, seed);
    let mut out = first;
    out.push(c12);
    out
}

/// `criterion,name,status,summary`.
pub fn manifest(results: &[CriterionResult], seed: u64) -> Result<Artifact> {
    let config = format!("manifest;criteria={}", results.iter().map(|r| r.id.to_string()).collect::<Vec<_>>().join(","));
    csv_artifact("manifest.csv", &config, seed, |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["criterion", "name", "status", "summary"])?;
        for r in results {
            w.write_record([r.id.to_string(), r.name.to_string(), status(r.passed).into(), r.summary.clone()])?;
        }
        w.flush()?;
        Ok(())
    })
}

fn status(passed: bool) -> &'static str {
    if passed {
        "pass"
    } else {
        "fail"
    }
}

// ---------------------------------------------------------------------------
// 1

pub const MAZUR_P_GRID: [f64; 6] = [2.0, 2.5, 3.0, 4.0, 6.0, 10.0];
pub const MAZUR_LAMBDA_GRID: [f64; 3] = [0.25, 0.5, 0.75];

/// Per `(p, α, λ)` the grid point with the smallest slack, `u, v ∈ [−3, 3]`
/// with step `step`.
pub fn mazur_slack_table(ps: &[f64], step: f64) -> Result<Vec<(f64, f64, f64, f64, f64, f64)>> {
    if !(step > 0.0) || step > 3.0 {
        return Err(Error::Domain(format!("grid step {step} must lie in (0, 3]")));
    }
    let half = (3.0 / step).round() as i64;
    let grid: Vec<f64> = (-half..=half).map(|i| i as f64 * step).collect();
    let mut rows = Vec::new();
    for &p in ps {
        for alpha in [1.0 / p, 0.5 / p] {
            for lambda in MAZUR_LAMBDA_GRID {
                pointwise_inequality_slack(0.0, 0.0, alpha, lambda, p)?;
                let mut best = (f64::INFINITY, 0.0, 0.0);
                for &u in &grid {
                    for &v in &grid {
                        let s = crate::mazur::slack_unchecked(u, v, alpha, lambda, p);
                        if s < best.0 {
                            best = (s, u, v);
                        }
                    }
                }
                rows.push((p, alpha, lambda, best.1, best.2, best.0));
            }
        }
    }
    Ok(rows)
}

pub fn write_slack_csv(rows: &[(f64, f64, f64, f64, f64, f64)], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "p,alpha,lambda,u,v,slack")?;
    for (p, a, l, u, v, s) in rows {
        writeln!(out, "{p},{a:e},{l},{u},{v},{s:e}")?;
    }
    Ok(())
}

fn mazur_inequality(seed: u64) -> Result<Outcome> {
    let rows = mazur_slack_table(&MAZUR_P_GRID, 0.01)?;
    let min = rows.iter().map(|r| r.5).fold(f64::INFINITY, f64::min);
    let art = csv_artifact("mazur_slack.csv", "mazur-check;p=2,2.5,3,4,6,10;grid=0.01", seed, |o| write_slack_csv(&rows, o))?;
    Ok(Outcome {
        passed: min >= -1e-12,
        summary: format!("min slack {min:e} over {} (p, alpha, lambda) grids", rows.len()),
        artifacts: vec![art],
    })
}

// ---------------------------------------------------------------------------
// 2

#[derive(Clone, Debug, PartialEq)]
pub struct RadialRow {
    pub p: f64,
    pub r: f64,
    pub checks: usize,
    pub violations: usize,
    pub min_margin: f64,
}

/// `xs` points `ρu` of `B_p` and `per_x` perturbations `M_{p→2}(x) + ρ'v`
/// with `ρ' ≤ r` for each, checked at `α = 1/p`, `λ = σ = 1/2`.
pub fn radial_sweep(p: f64, dim: usize, xs: usize, per_x: usize, seed: u64) -> Result<RadialRow> {
    let params = MazurParams::standard(p)?;
    let r = radial_inclusion_radius(&params)?;
    let sp = Space::uniform(p, dim)?;
    let s2 = Space::uniform(2.0, dim)?;
    let mut rng = from_seed(seed);
    let mut row = RadialRow { p, r, checks: 0, violations: 0, min_margin: f64::INFINITY };
    for _ in 0..xs {
        let u = sphere_direction(&sp, &mut rng);
        let rho = rng.random::<f64>();
        let mut x: Vec<f64> = u.iter().map(|v| rho * v).collect();
        while sp.norm(&x) > 1.0 {
            x.iter_mut().for_each(|v| *v *= 1.0 - 1e-15);
        }
        let mx = mazur_coords(&x, p, 2.0);
        let xv = WeightedVector::uniform(x, p)?;
        for _ in 0..per_x {
            let v = sphere_direction(&s2, &mut rng);
            let mut t = r * rng.random::<f64>();
            let w = loop {
                let w: Vec<f64> = mx.iter().zip(&v).map(|(a, b)| a + t * b).collect();
                if s2.dist(&w, &mx) <= r {
                    break w;
                }
                t *= 1.0 - 1e-12;
            };
            let c = radial_inclusion_check(&xv, &WeightedVector::uniform(w, 2.0)?, &params)?;
            row.checks += 1;
            if c.margin < -1e-9 {
                row.violations += 1;
            }
            row.min_margin = row.min_margin.min(c.margin);
        }
    }
    Ok(row)
}

pub fn write_radial_csv(rows: &[RadialRow], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "p,r,checks,violations,min_margin")?;
    for r in rows {
        writeln!(out, "{},{:e},{},{},{:e}", r.p, r.r, r.checks, r.violations, r.min_margin)?;
    }
    Ok(())
}

fn radial_inclusion(seed: u64) -> Result<Outcome> {
    let mut rows = Vec::new();
    for (k, p) in [2.5, 4.0, 8.0].into_iter().enumerate() {
        rows.push(radial_sweep(p, 16, 1000, 100, derive_seed(seed, k as u64))?);
    }
    let violations: usize = rows.iter().map(|r| r.violations).sum();
    let checks: usize = rows.iter().map(|r| r.checks).sum();
    let min = rows.iter().map(|r| r.min_margin).fold(f64::INFINITY, f64::min);
    let art = csv_artifact("radial_inclusion.csv", "radial-check;p=2.5,4,8;dim=16;x=1000;w=100", seed, |o| {
        write_radial_csv(&rows, o)
    })?;
    Ok(Outcome {
        passed: violations == 0,
        summary: format!("{violations} violations in {checks} checks, min margin {min:e}"),
        artifacts: vec![art],
    })
}

// ---------------------------------------------------------------------------
// 3

#[derive(Clone, Debug, PartialEq)]
struct NormRow {
    p: f64,
    vectors: usize,
    norm_err: f64,
    power_err: f64,
    homogeneity_err: f64,
    pairs: usize,
    lipschitz: f64,
}

fn mazur_norm_row(p: f64, dim: usize, count: usize, seed: u64) -> Result<NormRow> {
    let sp = Space::uniform(p, dim)?;
    let s2 = Space::uniform(2.0, dim)?;
    let mut rng = from_seed(seed);
    let mut row = NormRow { p, vectors: count, norm_err: 0.0, power_err: 0.0, homogeneity_err: 0.0, pairs: 0, lipschitz: 0.0 };
    let mut ball = Vec::with_capacity(count);
    for _ in 0..count {
        let u = sphere_direction(&sp, &mut rng);
        // Unit vectors map to unit vectors.
        let mu = mazur_coords(&u, p, 2.0);
        row.norm_err = row.norm_err.max((s2.norm(&mu) - sp.norm(&u)).abs());
        // Arbitrary vectors: ‖M(x)‖₂² = ‖x‖_p^p.
        let scale = (4.0 * rng.random::<f64>() - 2.0).exp();
        let x: Vec<f64> = u.iter().map(|v| scale * v).collect();
        let mx = mazur_coords(&x, p, 2.0);
        let lhs = s2.norm_pow(&mx);
        let rhs = sp.norm_pow(&x);
        row.power_err = row.power_err.max((lhs - rhs).abs() / rhs.max(f64::MIN_POSITIVE));
        // M(tx) = t^{p/2} M(x) for t > 0.
        let t = (2.0 * rng.random::<f64>() - 1.0).exp();
        let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
        let mtx = mazur_coords(&tx, p, 2.0);
        let f = t.powf(p / 2.0);
        let top = mtx.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let err = mtx.iter().zip(&mx).map(|(a, b)| (a - f * b).abs()).fold(0.0, f64::max) / top;
        row.homogeneity_err = row.homogeneity_err.max(err);
        let rho = rng.random::<f64>();
        ball.push(u.iter().map(|v| rho * v).collect::<Vec<f64>>());
    }
    // Far pairs between consecutive points and near pairs around each.
    let mut pairs = Vec::new();
    for w in ball.chunks(2) {
        if w.len() == 2 {
            pairs.push((w[0].clone(), w[1].clone()));
        }
    }
    for a in &ball {
        let v = sphere_direction(&sp, &mut rng);
        let eps = 1e-3 * rng.random::<f64>();
        let mut b: Vec<f64> = a.iter().zip(&v).map(|(x, y)| x + eps * y).collect();
        while sp.norm(&b) > 1.0 {
            b.iter_mut().for_each(|x| *x *= 1.0 - 1e-6);
        }
        pairs.push((a.clone(), b));
    }
    row.pairs = pairs.len();
    row.lipschitz = crate::mazur::empirical_mazur_lipschitz(&sp, &pairs);
    Ok(row)
}

fn mazur_norms(seed: u64) -> Result<Outcome> {
    let mut rows = Vec::new();
    for (k, p) in [2.5, 3.0, 4.0, 6.0, 10.0].into_iter().enumerate() {
        rows.push(mazur_norm_row(p, 8, 10_000, derive_seed(seed, k as u64))?);
    }
    let exact = rows.iter().all(|r| r.norm_err <= 1e-12 && r.power_err <= 1e-12 && r.homogeneity_err <= 1e-12);
    let lip = rows.iter().all(|r| r.lipschitz <= r.p);
    let worst = rows.iter().map(|r| r.norm_err.max(r.power_err).max(r.homogeneity_err)).fold(0.0, f64::max);
    let ratio = rows.iter().map(|r| r.lipschitz / r.p).fold(0.0, f64::max);
    let art = csv_artifact("mazur_norms.csv", "mazur-norms;p=2.5,3,4,6,10;dim=8;vectors=10000", seed, |o| {
        writeln!(o, "p,vectors,norm_err,power_err,homogeneity_err,pairs,lipschitz")?;
        for r in &rows {
            writeln!(
                o,
                "{},{},{:e},{:e},{:e},{},{:e}",
                r.p, r.vectors, r.norm_err, r.power_err, r.homogeneity_err, r.pairs, r.lipschitz
            )?;
        }
        Ok(())
    })?;
    Ok(Outcome {
        passed: exact && lip,
        summary: format!("worst identity error {worst:e}; max Lip/p {ratio:.4}"),
        artifacts: vec![art],
    })
}

// ---------------------------------------------------------------------------
// 4

/// Re-checks a partition with direct distance evaluations: the cover, and
/// each cluster's diameter or enclosing radius against `Δ`.
pub fn independent_check(p: &Partition, s: &PointSet) -> bool {
    let n = s.len();
    let mut seen = vec![false; n];
    for c in &p.clusters {
        if c.is_empty() {
            return false;
        }
        for &i in c {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
        }
    }
    if seen.iter().any(|v| !v) {
        return false;
    }
    let sp = s.space();
    let fits = |c: &[usize], z: &[f64]| c.iter().all(|&i| sp.dist(s.point(i), z) <= p.delta);
    p.clusters.iter().enumerate().all(|(k, c)| match p.mode {
        BoundMode::DiameterBounded => {
            c.iter().enumerate().all(|(a, &i)| c[a + 1..].iter().all(|&j| sp.dist(s.point(i), s.point(j)) <= p.delta))
        }
        BoundMode::RadiallyBounded(AmbientMode::WithinSet) => (0..n).any(|z| fits(c, s.point(z))),
        BoundMode::RadiallyBounded(AmbientMode::ContinuousLp) => {
            if let Some(Some(z)) = p.centers.get(k) {
                if fits(c, z) {
                    return true;
                }
            }
            if c.iter().any(|&m| fits(c, s.point(m))) {
                return true;
            }
            let pts: Vec<&[f64]> = c.iter().map(|&i| s.point(i)).collect();
            match min_enclosing_ball(&pts, sp) {
                Ok(ball) => fits(c, &ball.center),
                Err(_) => false,
            }
        }
    })
}

/// `n` points uniform in `[0, 1]^dim` under the `ℓ_p` norm.
pub fn uniform_cube(p: f64, n: usize, dim: usize, seed: u64) -> Result<PointSet> {
    let mut rng = from_seed(seed);
    let rows = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    PointSet::new(Space::uniform(p, dim)?, rows, None)
}

pub fn full_diameter(s: &PointSet) -> Result<f64> {
    diameter(&(0..s.len()).collect::<Vec<_>>(), s)
}

struct SchemeTally {
    scheme: String,
    draws: usize,
    failures: usize,
}

fn tally_sampler(name: &str, sampler: &dyn PartitionSampler, draws: u64, seed: u64) -> Result<SchemeTally> {
    let mut t = SchemeTally { scheme: name.to_string(), draws: 0, failures: 0 };
    for i in 0..draws {
        let p = sampler.sample(seed, i)?;
        t.draws += 1;
        if !independent_check(&p, sampler.points()) {
            t.failures += 1;
        }
    }
    Ok(t)
}

fn partition_validity(seed: u64) -> Result<Outcome> {
    const DRAWS: u64 = 200;
    let mut tallies = Vec::new();

    let e2 = Arc::new(uniform_cube(2.0, 128, 4, derive_seed(seed, 1))?);
    let d2 = full_diameter(&e2)?;
    tallies.push(tally_sampler("ckr-net", &CkrSampler::new(e2.clone(), d2 / 4.0, CenterChoice::Net)?, DRAWS, seed)?);

    let l3 = Arc::new(uniform_cube(3.0, 128, 4, derive_seed(seed, 2))?);
    let d3 = full_diameter(&l3)?;
    tallies.push(tally_sampler("ckr-all", &CkrSampler::new(l3.clone(), d3 / 4.0, CenterChoice::AllPoints)?, DRAWS, seed)?);

    let mut t = SchemeTally { scheme: "padded".into(), draws: 0, failures: 0 };
    let mut rng = from_seed(derive_seed(seed, 3));
    for _ in 0..DRAWS {
        let p = padded_partition(&l3, d3 / 4.0, &mut rng)?;
        t.draws += 1;
        t.failures += !independent_check(&p, &l3) as usize;
    }
    tallies.push(t);

    for (name, choice) in [("induct-carving-all", CenterChoice::AllPoints), ("induct-carving-net", CenterChoice::Net)] {
        let sampler = crate::compose::induct_scales(
            Arc::new(BallCarving { centers: choice }),
            l3.clone(),
            d3 / 8.0,
            1.25,
            TraceMode::Ball,
        )?;
        tallies.push(tally_sampler(name, &sampler, DRAWS, seed)?);
    }

    let mut t = SchemeTally { scheme: "ckr-extended".into(), draws: 0, failures: 0 };
    let half: Vec<usize> = (0..64).collect();
    let sub = e2.subset(&half);
    let far = d2 / 16.0;
    let mut rng = from_seed(derive_seed(seed, 4));
    for _ in 0..DRAWS {
        let q = crate::partition::ckr_partition(&sub, d2 / 4.0, &mut rng)?;
        let ext = extend_partition(&q, &sub, &e2, far)?;
        let claimed = Partition::new(ext.clusters.clone(), d2 / 4.0 + 2.0 * far, BoundMode::DiameterBounded);
        t.draws += 1;
        t.failures += !independent_check(&claimed, &e2) as usize;
    }
    tallies.push(t);

    for (k, p) in [3.0, 4.0].into_iter().enumerate() {
        let mut rng = from_seed(derive_seed(seed, 10 + k as u64));
        let c = Arc::new(random_lp_set(p, 48, 8, &mut rng)?);
        let diam = full_diameter(&c)?;
        let cfg = PipelineConfig::new(p, diam / 4.0, DRAWS, derive_seed(seed, 20 + k as u64))?;
        let run = lp_separation_sampler(&cfg, c, &mut rng)?;
        tallies.push(tally_sampler(&format!("pipeline-p{p}"), &run.sampler, DRAWS, cfg.seed)?);
        let as_diameter = Reinterpreted { inner: &run.sampler, delta: 2.0 * cfg.delta, mode: BoundMode::DiameterBounded };
        tallies.push(tally_sampler(&format!("pipeline-p{p}-as-diameter"), &as_diameter, DRAWS, cfg.seed)?);
    }

    let draws: usize = tallies.iter().map(|t| t.draws).sum();
    let failures: usize = tallies.iter().map(|t| t.failures).sum();
    let art = csv_artifact("partition_validity.csv", "partition-validity;draws=200", seed, |o| {
        writeln!(o, "scheme,draws,failures")?;
        for t in &tallies {
            writeln!(o, "{},{},{}", t.scheme, t.draws, t.failures)?;
        }
        Ok(())
    })?;
    Ok(Outcome {
        passed: failures == 0,
        summary: format!("{failures} invalid of {draws} draws over {} schemes", tallies.len()),
        artifacts: vec![art],
    })
}

// ---------------------------------------------------------------------------
// 5

pub const CKR_DIMS: [usize; 5] = [2, 4, 8, 16, 32];

/// `n` points uniform in the Euclidean ball of radius `4Δ`, kept only when
/// farther than `Δ/4` from every earlier point.
pub fn separated_ball_set(k: usize, n: usize, delta: f64, seed: u64) -> Result<PointSet> {
    let space = Space::uniform(2.0, k)?;
    let mut rng = from_seed(seed);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut tries = 0usize;
    while rows.len() < n {
        tries += 1;
        if tries > 1000 * n {
            return Err(Error::Numerical { msg: "rejection sampling stalled".into(), achieved: rows.len() as f64 });
        }
        let u = sphere_direction(&space, &mut rng);
        let r = 4.0 * delta * rng.random::<f64>().powf(1.0 / k as f64);
        let x: Vec<f64> = u.iter().map(|v| v * r).collect();
        if rows.iter().all(|y| space.dist(&x, y) > 0.25 * delta) {
            rows.push(x);
        }
    }
    PointSet::new(space, rows, None)
}

fn ckr_scaling(seed: u64) -> Result<Outcome> {
    let delta = 1.0;
    let trials = 500;
    let mut rows = Vec::new();
    for &k in &CKR_DIMS {
        let s = Arc::new(separated_ball_set(k, 512, delta, derive_seed(seed, k as u64))?);
        let ckr = CkrSampler::new(s, delta, CenterChoice::Net)?;
        let rep = estimate_separation(&ckr, trials, derive_seed(seed, 100 + k as u64))?;
        rows.push((k, rep.sigma_hat, rep.half_width_at_argmax()));
    }
    let ks: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let sig: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let exponent = power_law_exponent(&ks, &sig);
    let at2 = rows[0].1;
    let art = csv_artifact("ckr_scaling.csv", "ckr-bench;k=2,4,8,16,32;n=512;trials=500;radius=4;min_sep=0.25", seed, |o| {
        writeln!(o, "k,n,sigma_hat,half_width")?;
        for (k, s, h) in &rows {
            writeln!(o, "{k},512,{s:e},{h:e}")?;
        }
        writeln!(o, "# fitted exponent {exponent:e}")?;
        Ok(())
    })?;
    Ok(Outcome {
        passed: exponent <= 0.6 && at2 <= 4.0,
        summary: format!("exponent {exponent:.3} (limit 0.6), sigma_hat(k=2) {at2:.3} (limit 4)"),
        artifacts: vec![art],
    })
}

// ---------------------------------------------------------------------------
// 6

struct OracleCheck {
    instance: &'static str,
    delta: f64,
    scheme: String,
    sigma_star: f64,
    sigma_hat: f64,
    half_width: f64,
    optimal: bool,
    ok: bool,
}

fn oracle_agreement(seed: u64) -> Result<Outcome> {
    const TRIALS: u64 = 2000;
    let mut exact_ok = true;
    let mut exact_err = 0.0f64;
    let two = Arc::new(named_instance("two-point")?);
    let tri = Arc::new(named_instance("equilateral3")?);
    let d = two.d(0, 1);
    for delta in [0.1, 0.25, 0.5, 0.75, 0.99] {
        let e = exact_sep(&two, delta, BoundMode::DiameterBounded)?;
        let err = (e.sigma_star - delta / d).abs();
        exact_err = exact_err.max(err);
        exact_ok &= err <= 1e-9;
    }
    let side = tri.d(0, 1);
    let e = exact_sep(&tri, side / 2.0, BoundMode::DiameterBounded)?;
    let err = (e.sigma_star - 0.5).abs();
    exact_err = exact_err.max(err);
    exact_ok &= err <= 1e-9;

    let mut checks = Vec::new();
    let cases: [(&'static str, &Arc<PointSet>, &[f64]); 2] =
        [("two-point", &two, &[0.25, 0.5, 0.75, 1.5]), ("equilateral3", &tri, &[0.5, 1.0, 1.5])];
    for (name, s, deltas) in cases {
        let dmin = (0..s.len()).flat_map(|i| (i + 1..s.len()).map(move |j| (i, j))).map(|(i, j)| s.d(i, j)).fold(f64::INFINITY, f64::min);
        for (t, &delta) in deltas.iter().enumerate() {
            let run_seed = derive_seed(seed, 1000 * t as u64 + s.len() as u64);
            let diam_star = exact_sep(s, delta, BoundMode::DiameterBounded)?.sigma_star;
            // Balls of radius at most Δ/2 split every pair when Δ < d_min.
            let optimal = delta < dmin;
            for choice in [CenterChoice::Net, CenterChoice::AllPoints] {
                let ckr = CkrSampler::new((*s).clone(), delta, choice)?;
                let rep = estimate_separation(&ckr, TRIALS, run_seed)?;
                checks.push(judge(name, delta, &ckr.info().scheme, diam_star, &rep, optimal));
            }
            let radial_star = exact_sep(s, delta, BoundMode::RadiallyBounded(AmbientMode::ContinuousLp))?.sigma_star;
            let cfg = PipelineConfig::new(2.0, delta, TRIALS, run_seed)?;
            let mut rng = from_seed(derive_seed(run_seed, 1));
            let run = lp_separation_sampler(&cfg, (*s).clone(), &mut rng)?;
            checks.push(judge(name, delta, "pipeline", radial_star, &run.report, false));
        }
    }
    let mc_ok = checks.iter().all(|c| c.ok);
    let art = csv_artifact("oracle_agreement.csv", "oracle-agreement;instances=two-point,equilateral3;trials=2000", seed, |o| {
        writeln!(o, "instance,delta,scheme,sigma_star,sigma_hat,half_width,optimal,ok")?;
        for c in &checks {
            writeln!(
                o,
                "{},{:e},{},{:e},{:e},{:e},{},{}",
                c.instance, c.delta, c.scheme, c.sigma_star, c.sigma_hat, c.half_width, c.optimal, c.ok
            )?;
        }
        Ok(())
    })?;
    let bad = checks.iter().filter(|c| !c.ok).count();
    Ok(Outcome {
        passed: exact_ok && mc_ok,
        summary: format!("exact error {exact_err:e}; {bad} of {} Monte-Carlo comparisons out of band", checks.len()),
        artifacts: vec![art],
    })
}

fn judge(
    instance: &'static str,
    delta: f64,
    scheme: &str,
    sigma_star: f64,
    rep: &crate::partition::SeparationReport,
    optimal: bool,
) -> OracleCheck {
    let hw = rep.half_width_at_argmax();
    let mut ok = rep.sigma_hat >= sigma_star - 3.0 * hw;
    if optimal {
        ok &= rep.sigma_hat <= sigma_star + 0.05;
    }
    OracleCheck { instance, delta, scheme: scheme.to_string(), sigma_star, sigma_hat: rep.sigma_hat, half_width: hw, optimal, ok }
}

// ---------------------------------------------------------------------------
// 7

fn telescoping(seed: u64) -> Result<Outcome> {
    const TRIALS: u64 = 500;
    let k_star: f64 = 1.25;
    let mut rows = Vec::new();
    let mut ladders = Vec::new();
    for (k, p) in [2.0, 3.0, 4.0].into_iter().enumerate() {
        let s = Arc::new(uniform_cube(p, 128, 4, derive_seed(seed, k as u64))?);
        let diam = full_diameter(&s)?;
        // Three scales below the top one, which covers twice the diameter.
        let delta = 2.0 * diam / k_star.powi(3) * (1.0 + 1e-9);
        let ladder = ScaleLadder::with_top(delta, k_star, 3, diam)?;
        let sampler = InductiveSampler::with_ladder(
            Arc::new(BallCarving { centers: CenterChoice::AllPoints }),
            s.clone(),
            ladder,
            TraceMode::Ball,
        );
        let run_seed = derive_seed(seed, 10 + k as u64);
        let ids: Vec<usize> = (0..s.len()).collect();
        let rep = estimate_separation(&sampler, TRIALS, run_seed)?;
        let lad = ladder_report(&sampler, &ids, TRIALS, run_seed)?;
        let mut invalid = 0;
        for t in 0..TRIALS {
            let part = sampler.sample(run_seed, t)?;
            invalid += !independent_check(&part, &s) as usize;
        }
        let bound = lad.telescoped(k_star);
        let hw = rep.half_width_at_argmax();
        rows.push((p, delta, rep.sigma_hat, hw, bound, invalid, rep.sigma_hat <= bound + 3.0 * hw && invalid == 0));
        ladders.push((p, lad));
    }
    let mut arts = vec![csv_artifact("telescoping.csv", "compose-bench;n=128;dim=4;k_star=1.25;scales=3;trials=500", seed, |o| {
        writeln!(o, "p,delta,sigma_composed,half_width,telescoped,invalid,ok")?;
        for (p, d, s, h, b, i, ok) in &rows {
            writeln!(o, "{p},{d:e},{s:e},{h:e},{b:e},{i},{ok}")?;
        }
        Ok(())
    })?];
    for (p, lad) in &ladders {
        arts.push(csv_artifact(&format!("ladder_p{p}.csv"), &format!("compose-bench;ladder;p={p}"), seed, |o| lad.write_csv(o))?);
    }
    let passed = rows.iter().all(|r| r.6);
    let summary = rows
        .iter()
        .map(|r| format!("p={}: {:.3} <= {:.3} + 3*{:.3}", r.0, r.2, r.4, r.3))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome { passed, summary, artifacts: arts })
}

// ---------------------------------------------------------------------------
// 8

fn jl_kirszbraun(seed: u64) -> Result<Outcome> {
    let dim = 128;
    let mut rng = from_seed(seed);
    let rows: Vec<Vec<f64>> = (0..32).map(|_| (0..dim).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()).collect();
    let anchors = PointSet::new(Space::uniform(2.0, dim)?, rows, None)?;
    let diam = full_diameter(&anchors)?;
    let r = 0.2 * diam;
    let map = jl_anchor_map(&anchors, derive_seed(seed, 1))?;
    let exact_on_anchors = (0..anchors.len()).all(|i| {
        map.query(anchors.point(i)).map(|h| h.iter().zip(map.anchor_image(i)).all(|(a, b)| a.to_bits() == b.to_bits())).unwrap_or(false)
    });
    let queries = sample_near(&anchors, r, 2000, &mut rng);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = queries.chunks(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    let rep = reduce_map_guarantee(&map, &anchors, &pairs, r)?;
    // Lipschitz over every pair of anchors and queried points.
    let src_space = anchors.space();
    let img_space = map.image_space();
    let mut pts: Vec<Vec<f64>> = (0..anchors.len()).map(|i| anchors.point(i).to_vec()).collect();
    pts.extend(queries.iter().cloned());
    let imgs: Vec<Vec<f64>> = pts.iter().map(|x| map.query(x)).collect::<Result<_>>()?;
    let mut lip = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = src_space.dist(&pts[i], &pts[j]);
            if d > 0.0 {
                lip = lip.max(img_space.dist(&imgs[i], &imgs[j]) / d);
            }
        }
    }
    let passed = exact_on_anchors
        && lip <= 1.0 + 1e-5
        && rep.upper_violations == 0
        && rep.lower_violations == 0
        && rep.inclusion_violations == 0;
    let mut arts = vec![csv_artifact("reduce_guarantee.csv", "reduce;anchors=32;dim=128;pairs=1000;r=0.2diam", seed, |o| {
        rep.write_csv(o)
    })?];
    arts.push(csv_artifact("reduce_summary.csv", "reduce;summary", seed, |o| {
        writeln!(o, "k,pairs,upper_violations,lower_violations,inclusion_pairs,inclusion_violations,lipschitz,min_lower_slack")?;
        writeln!(
            o,
            "{},{},{},{},{},{},{:e},{:e}",
            map.k(),
            rep.pairs,
            rep.upper_violations,
            rep.lower_violations,
            rep.inclusion_pairs,
            rep.inclusion_violations,
            lip,
            rep.min_lower_slack
        )?;
        Ok(())
    })?);
    Ok(Outcome {
        passed,
        summary: format!(
            "k={}, anchors exact: {exact_on_anchors}, Lip {lip:.8}, violations {}/{}/{} (upper/lower/8r over {} inclusion pairs)",
            map.k(),
            rep.upper_violations,
            rep.lower_violations,
            rep.inclusion_violations,
            rep.inclusion_pairs
        ),
        artifacts: arts,
    })
}

// ---------------------------------------------------------------------------
// 9

pub const GROWTH_N: [usize; 7] = [64, 128, 256, 512, 1024, 2048, 4096];

fn pipeline_growth(seed: u64) -> Result<Outcome> {
    let table = sep_growth_experiment(&[3.0, 4.0], &GROWTH_N, 32, 200, seed)?;
    let fits = table.log_n_fits(256);
    let limit = ((4096f64).ln() / (256f64).ln()).sqrt() * 1.3;
    let mut checks = Vec::new();
    for f in &fits {
        let series = table.series(f.p, f.delta_fraction);
        let at = |n: usize| series.iter().find(|r| r.n == n).map(|r| r.sigma_hat).unwrap_or(f64::NAN);
        let ratio = at(4096) / at(256);
        let ok = f.exponent_log_n <= 0.65 && ratio <= limit;
        checks.push((f.p, f.delta_fraction, f.exponent_log_n, ratio, ok));
    }
    let mut arts = vec![csv_artifact("sep_growth.csv", "sep-growth;p=3,4;n=64..4096;dim=32;trials=200", seed, |o| {
        table.write_csv(o)
    })?];
    arts.push(csv_artifact("sep_growth_fits.csv", "sep-growth;fits;min_n=256", seed, |o| {
        writeln!(o, "p,delta_fraction,exponent_log_n,ratio_4096_256,ok")?;
        for (p, f, e, r, ok) in &checks {
            writeln!(o, "{p},{f},{e:e},{r:e},{ok}")?;
        }
        Ok(())
    })?);
    let summary = checks
        .iter()
        .map(|(p, f, e, r, _)| format!("p={p} Δ/diam={f}: exponent {e:.3} (≤0.65), ratio {r:.3} (≤{limit:.3})"))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome { passed: checks.iter().all(|c| c.4), summary, artifacts: arts })
}

// ---------------------------------------------------------------------------
// 10

/// Four tight clusters of 32 points at the vertices of a regular simplex of
/// side 4; every point has `|B(x, 0.5)| = |B(x, 0.2)|`.
pub fn planted_clusters(seed: u64) -> Result<PointSet> {
    let mut rng = from_seed(seed);
    let dim = 4;
    let space = Space::new(2.0, vec![1.0; dim])?;
    let side = 4.0 / std::f64::consts::SQRT_2;
    let mut rows = Vec::new();
    for c in 0..4 {
        for _ in 0..32 {
            let u = sphere_direction(&space, &mut rng);
            let rho = 0.05 * rng.random::<f64>();
            rows.push((0..dim).map(|k| if k == c { side } else { 0.0 } + rho * u[k]).collect());
        }
    }
    PointSet::new(space, rows, None)
}

/// 128 points on a line with unit spacing.
pub fn planted_line() -> Result<PointSet> {
    PointSet::new(Space::new(2.0, vec![1.0])?, (0..128).map(|i| vec![i as f64]).collect(), None)
}

fn bourgain(seed: u64) -> Result<Outcome> {
    let mut reports: Vec<DistortionReport> = Vec::new();
    let mut lip_ok = true;
    let mut rng = from_seed(derive_seed(seed, 1));
    let random = Arc::new(uniform_cube(3.0, 128, 8, derive_seed(seed, 2))?);
    let map = bourgain_embed(random.clone(), &mut rng)?;
    lip_ok &= map.check_lipschitz(1e-12).is_ok();
    let rep = distortion_report(&map, None)?;
    let limit = 4.0 * (128f64).ln();
    let distortion_ok = rep.distortion <= limit;
    let distortion = rep.distortion;
    reports.push(rep);

    let mut growth = Vec::new();
    let planted: [(&str, PointSet, f64, f64, f64); 2] =
        [("clusters", planted_clusters(derive_seed(seed, 3))?, 0.2, 0.5, 1.0), ("line", planted_line()?, 2.0, 8.0, 6.0)];
    for (name, set, r, big_r, k) in planted {
        let set = Arc::new(set);
        let map = bourgain_embed(set, &mut rng)?;
        lip_ok &= map.check_lipschitz(1e-12).is_ok();
        reports.push(distortion_report(&map, None)?);
        let fit = growth_constant(&map, r, big_r, k)?;
        growth.push((name, r, big_r, k, fit));
    }
    let growth_ok = growth.iter().all(|g| g.4.pairs > 0 && g.4.c >= 0.05);
    let mut arts = vec![csv_artifact("bourgain_distortion.csv", "embed-distortion;bourgain;n=128", seed, |o| {
        DistortionReport::write_csv(&reports, o)
    })?];
    arts.push(csv_artifact("bourgain_growth.csv", "embed-distortion;growth;clusters,line", seed, |o| {
        writeln!(o, "instance,r,R,K,centers,pairs,c")?;
        for (name, r, big_r, k, f) in &growth {
            writeln!(o, "{name},{r},{big_r},{k},{},{},{:e}", f.centers, f.pairs, f.c)?;
        }
        Ok(())
    })?);
    let cs = growth.iter().map(|g| format!("{} c={:.3}", g.0, g.4.c)).collect::<Vec<_>>().join(", ");
    Ok(Outcome {
        passed: lip_ok && distortion_ok && growth_ok,
        summary: format!("Lipschitz ok: {lip_ok}; distortion {distortion:.3} (≤{limit:.2}); growth {cs} (≥0.05)"),
        artifacts: arts,
    })
}

// ---------------------------------------------------------------------------
// 11

fn truncation(seed: u64) -> Result<Outcome> {
    let mut grid_ok = true;
    let mut grid_worst = f64::INFINITY;
    for delta in [0.5, 1.0, 1.7] {
        for k in 0..=10_000 {
            let d = k as f64 * 0.001 * delta;
            let g = exact_kernel_distance(d, delta);
            let m = delta.min(d);
            grid_ok &= g >= 0.5 * m && g <= m * (1.0 + 1e-15);
            if m > 0.0 {
                grid_worst = grid_worst.min((m - g).min(g - 0.5 * m) / m);
            }
        }
    }
    let mut rng = from_seed(seed);
    let dim = 8;
    let delta = 1.0;
    let g = truncation_map(dim, delta, 1024, &mut rng)?;
    let mut worst = 0.0f64;
    let mut lip_ok = true;
    let mut rows = Vec::with_capacity(1000);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let dir: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let nd = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let t = 0.2 + 3.8 * rng.random::<f64>();
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * delta * b / nd).collect();
        let got = euclid(&g.apply(&x), &g.apply(&y));
        let want = g.exact_distance(&x, &y);
        let rel = (got - want).abs() / want;
        worst = worst.max(rel);
        lip_ok &= got <= g.lipschitz_witness() * euclid(&x, &y) * (1.0 + 1e-12);
        rows.push((t, want, got, rel));
    }
    let art = csv_artifact("truncation.csv", "truncation;dim=8;delta=1;features=1024;pairs=1000;t=0.2..4", seed, |o| {
        writeln!(o, "t,exact,realized,rel_err")?;
        for (t, w, gv, r) in &rows {
            writeln!(o, "{t:e},{w:e},{gv:e},{r:e}")?;
        }
        Ok(())
    })?;
    Ok(Outcome {
        passed: grid_ok && worst <= 0.05 && lip_ok,
        summary: format!(
            "grid bounds hold: {grid_ok} (min relative margin {grid_worst:.3e}); worst feature error {worst:.4} (≤0.05); Lipschitz witness respected: {lip_ok}"
        ),
        artifacts: vec![art],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_table_on_coarse_grid() {
        let rows = mazur_slack_table(&[2.0, 4.0], 0.25).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 3);
        assert!(rows.iter().all(|r| r.5 >= -1e-12));
        assert!(mazur_slack_table(&[2.0], 0.0).is_err());
    }

    #[test]
    fn independent_check_rejects_bad_partitions() {
        let s = named_instance("path5").unwrap();
        let good = Partition::new(vec![vec![0, 1], vec![2, 3], vec![4]], 1.0, BoundMode::DiameterBounded);
        assert!(independent_check(&good, &s));
        let wide = Partition::new(vec![vec![0, 1, 2], vec![3, 4]], 1.0, BoundMode::DiameterBounded);
        assert!(!independent_check(&wide, &s));
        let partial = Partition::new(vec![vec![0, 1], vec![2, 3]], 1.0, BoundMode::DiameterBounded);
        assert!(!independent_check(&partial, &s));
        // {0,1,2} has radius 1 around point 1, in and out of the set.
        for amb in [AmbientMode::WithinSet, AmbientMode::ContinuousLp] {
            let radial = Partition::new(vec![vec![0, 1, 2], vec![3, 4]], 1.0, BoundMode::RadiallyBounded(amb));
            assert!(independent_check(&radial, &s));
        }
    }

    #[test]
    fn separated_set_respects_floor() {
        let s = separated_ball_set(3, 64, 1.0, 5).unwrap();
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                assert!(s.d(i, j) > 0.25);
            }
            assert!(s.space().norm(s.point(i)) <= 4.0 + 1e-12);
        }
    }

    #[test]
    fn planted_clusters_are_growth_controlled() {
        let s = planted_clusters(1).unwrap();
        let g = crate::metric::growth_centers(&s, 0.2, 0.5, 1.0).unwrap();
        assert_eq!(g.indices.len(), 128);
    }

    #[test]
    fn determinism_detects_changes() {
        let mk = |body: &str| CriterionResult {
            id: 1,
            name: "x",
            passed: true,
            summary: String::new(),
            artifacts: vec![Artifact { name: "a.csv".into(), contents: body.into() }],
            elapsed: Duration::ZERO,
            invalid_partition: false,
        };
        assert!(determinism(&[mk("1")], &[mk("1")], 0).passed);
        assert!(!determinism(&[mk("1")], &[mk("2")], 0).passed);
    }
}
