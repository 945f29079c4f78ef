//! The end-to-end `ℓ_p` separation sampler.
//!
//! Each snapshot (an outer cluster with ball center `z` at scale `Δ_s`) is
//! mapped by `φ = f/p`, where `f` is the localized radial map at `(z, Δ_s)`,
//! reduced by a random projection with Kirszbraun extension, carved by CKR at
//! `Δ_s/(8D)` and pulled back. Every pulled-back cluster must fit in an `ℓ_p`
//! ball of radius `Δ_s`; when it does not, `γ` is halved and the snapshot is
//! redone.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng as _;

use crate::compose::{induct_scales, InductiveSampler, LocalPartition, ScaleLadder, SnapshotPartitioner, TraceMode};
use crate::error::{domain, Error, Result};
use crate::mazur::{localized_radial_map, RadialMapSpec, DEFAULT_GAMMA};
use crate::metric::{diameter, greedy_net_of, neighborhood_sample, sphere_direction, AmbientMode, PointSet, Space};
use crate::partition::{ckr_partition, estimate_separation_among, radial_certificate, SeparationReport};
use crate::reduce::{jl_anchor_map, jl_dimension};
use crate::rng::{derive_seed, from_seed, Rng};
use crate::stats::{power_law_exponent, wilson};

pub const MAX_HALVINGS: u32 = 3;
pub const DEFAULT_NEIGHBORHOOD_SAMPLES: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub p: f64,
    pub delta: f64,
    pub gamma: f64,
    /// `K = 1 + 1/(4p)`.
    pub k: f64,
    /// `D = p/(Kγ)`.
    pub d: f64,
    /// `K_* = K − 1/(2D)`.
    pub k_star: f64,
    /// Neighborhood radius as a multiple of `Δ`; defaults to `1/(9D)`.
    pub neighborhood_fraction: f64,
    pub neighborhood_samples: usize,
    pub trials: u64,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(p: f64, delta: f64, trials: u64, seed: u64) -> Result<Self> {
        Self::with_gamma(p, delta, DEFAULT_GAMMA, trials, seed)
    }

    pub fn with_gamma(p: f64, delta: f64, gamma: f64, trials: u64, seed: u64) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return domain(format!("p = {p} must be >= 2"));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return domain(format!("scale {delta} must be positive"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return domain(format!("gamma = {gamma} must lie in (0, 1)"));
        }
        let k = 1.0 + 1.0 / (4.0 * p);
        let d = p / (k * gamma);
        let k_star = k - 1.0 / (2.0 * d);
        if !(k_star > 1.0) {
            return domain(format!("K_* = {k_star} must exceed 1; gamma = {gamma} is too large"));
        }
        Ok(Self {
            p,
            delta,
            gamma,
            k,
            d,
            k_star,
            neighborhood_fraction: 1.0 / (9.0 * d),
            neighborhood_samples: DEFAULT_NEIGHBORHOOD_SAMPLES,
            trials,
            seed,
        })
    }

    pub fn neighborhood_radius(&self) -> f64 {
        self.neighborhood_fraction * self.delta
    }

    /// `K D √(ln n)/(K_* − 1)`.
    pub fn bound_value(&self, n: usize) -> f64 {
        self.k * self.d * (n.max(2) as f64).ln().sqrt() / (self.k_star - 1.0)
    }
}

/// Radii of the snapshot at scale index `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSpec {
    pub z: Vec<f64>,
    pub s: usize,
    /// `(K − 1/(8D)) K_*^s Δ`.
    pub alpha: f64,
    /// `K_*^s Δ/(8D) − Δ/(9D)`.
    pub beta_net: f64,
    /// `((3/8)K_*^s − 1/9) Δ/D`.
    pub eps0: f64,
}

impl SnapshotSpec {
    pub fn new(cfg: &PipelineConfig, z: Vec<f64>, s: usize) -> Result<Self> {
        let ks = cfg.k_star.powi(s as i32);
        let (d, delta) = (cfg.d, cfg.delta);
        let alpha = (cfg.k - 1.0 / (8.0 * d)) * ks * delta;
        let beta_net = ks * delta / (8.0 * d) - delta / (9.0 * d);
        let eps0 = (0.375 * ks - 1.0 / 9.0) * delta / d;
        if !(alpha > beta_net && beta_net > 0.0) {
            return Err(Error::Structural(format!("snapshot radii out of order: alpha = {alpha}, beta = {beta_net}")));
        }
        Ok(Self { z, s, alpha, beta_net, eps0 })
    }

    /// `K_*^{s+1}Δ + ε₀`.
    pub fn reach(&self, cfg: &PipelineConfig) -> f64 {
        cfg.k_star.powi(self.s as i32 + 1) * cfg.delta + self.eps0
    }
}

/// Where the random projection gets its anchors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnchorChoice {
    /// Rows with index below `base` (the original set); the rest are
    /// Kirszbraun queries.
    Finite { base: usize },
    /// A greedy net of the snapshot at `β_net`.
    Net,
}

/// Counters shared by all snapshots of a sampler.
#[derive(Debug, Default)]
pub struct SnapshotLog {
    halvings: AtomicU64,
    min_gamma_bits: AtomicU64,
    snapshots: AtomicU64,
}

impl SnapshotLog {
    fn new(gamma: f64) -> Self {
        Self { halvings: AtomicU64::new(0), min_gamma_bits: AtomicU64::new(gamma.to_bits()), snapshots: AtomicU64::new(0) }
    }

    pub fn halvings(&self) -> u64 {
        self.halvings.load(Ordering::Relaxed)
    }

    /// Smallest `γ` any snapshot needed.
    pub fn gamma_used(&self) -> f64 {
        f64::from_bits(self.min_gamma_bits.load(Ordering::Relaxed))
    }

    pub fn snapshots(&self) -> u64 {
        self.snapshots.load(Ordering::Relaxed)
    }
}

/// The snapshot partitioner of the pipeline.
pub struct MazurSnapshot {
    pub cfg: PipelineConfig,
    pub anchors: AnchorChoice,
    log: Arc<SnapshotLog>,
}

impl MazurSnapshot {
    pub fn new(cfg: PipelineConfig, anchors: AnchorChoice) -> Self {
        let log = Arc::new(SnapshotLog::new(cfg.gamma));
        Self { cfg, anchors, log }
    }

    pub fn log(&self) -> Arc<SnapshotLog> {
        self.log.clone()
    }

    /// One attempt at a given `γ`; a cluster without a ball of radius
    /// `scale` yields [`Error::Rejected`].
    fn attempt(
        &self,
        s: &PointSet,
        members: &[usize],
        z: &[f64],
        scale: f64,
        gamma: f64,
        rng: &mut Rng,
    ) -> Result<LocalPartition> {
        let p = self.cfg.p;
        let map = localized_radial_map(RadialMapSpec::new(z.to_vec(), scale, p, gamma)?)?;
        let r = scale / (8.0 * map.spec.d);
        let m = s.dim();
        let mut phi = vec![0.0; members.len() * m];
        for (row, &i) in phi.chunks_mut(m).zip(members) {
            map.forward_into(s.point(i), row);
            row.iter_mut().for_each(|v| *v /= p);
        }
        let euclid = Space::new(2.0, s.space().weights.clone())?;
        let image = PointSet::from_flat(Arc::new(euclid), phi, None)?;
        let reduced = self.reduce(&image, members, scale, rng)?;
        let carved = ckr_partition(&reduced, r, rng)?;
        let mut clusters = Vec::with_capacity(carved.len());
        let mut centers = Vec::with_capacity(carved.len());
        for c in &carved.clusters {
            let ids: Vec<usize> = c.iter().map(|&t| members[t]).collect();
            let hint = map.witness_center(s.point(ids[0]));
            match radial_certificate(&ids, s, scale, AmbientMode::ContinuousLp, Some(&hint))? {
                Some(center) => {
                    clusters.push(ids);
                    centers.push(center);
                }
                None => {
                    return Err(Error::Rejected {
                        witness: ids[0],
                        msg: format!("pullback of an image ball at gamma = {gamma} has radius above {scale}"),
                    })
                }
            }
        }
        Ok(LocalPartition { clusters, centers })
    }

    /// Random projection of the image with Kirszbraun extension off the
    /// anchors. Returns the reduced image, one row per member.
    fn reduce(&self, image: &PointSet, members: &[usize], scale: f64, rng: &mut Rng) -> Result<PointSet> {
        let n = image.len();
        let anchor_rows: Vec<usize> = match self.anchors {
            AnchorChoice::Finite { base } => (0..n).filter(|&t| members[t] < base).collect(),
            AnchorChoice::Net => {
                let spec = SnapshotSpec::new(&self.cfg, vec![], scale_index(&self.cfg, scale))?;
                // The net radius is measured in the source; φ is 1-Lipschitz
                // so a source net is dense in the image too.
                greedy_net_of(image, &(0..n).collect::<Vec<_>>(), spec.beta_net / self.cfg.p)?
            }
        };
        let mut seen = HashMap::new();
        let distinct: Vec<usize> = anchor_rows
            .into_iter()
            .filter(|&t| seen.insert(image.point(t).iter().map(|v| v.to_bits()).collect::<Vec<_>>(), ()).is_none())
            .collect();
        if distinct.len() < 2 || jl_dimension(distinct.len()) >= image.dim() {
            return Ok(image.clone());
        }
        let anchors = image.subset(&distinct);
        let h = jl_anchor_map(&anchors, rng.random::<u64>())?;
        let mut rows = Vec::with_capacity(n * h.k());
        for t in 0..n {
            rows.extend(h.query(image.point(t))?);
        }
        PointSet::from_flat(Arc::new(h.image_space()), rows, None)
    }
}

fn scale_index(cfg: &PipelineConfig, scale: f64) -> usize {
    ((scale / cfg.delta).ln() / cfg.k_star.ln()).round().max(0.0) as usize
}

impl SnapshotPartitioner for MazurSnapshot {
    fn partition(&self, s: &PointSet, members: &[usize], center: &[f64], _radius: f64, scale: f64, rng: &mut Rng) -> Result<LocalPartition> {
        self.log.snapshots.fetch_add(1, Ordering::Relaxed);
        if members.len() == 1 {
            return Ok(LocalPartition { clusters: vec![members.to_vec()], centers: vec![s.point(members[0]).to_vec()] });
        }
        let mut gamma = self.cfg.gamma;
        let mut halvings = 0;
        loop {
            match self.attempt(s, members, center, scale, gamma, rng) {
                Ok(local) => {
                    self.log.min_gamma_bits.fetch_min(gamma.to_bits(), Ordering::Relaxed);
                    return Ok(local);
                }
                Err(Error::Rejected { .. }) if halvings < MAX_HALVINGS => {
                    halvings += 1;
                    self.log.halvings.fetch_add(1, Ordering::Relaxed);
                    gamma /= 2.0;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn ambient(&self) -> AmbientMode {
        AmbientMode::ContinuousLp
    }

    fn name(&self) -> String {
        format!("mazur-ckr(p={})", self.cfg.p)
    }
}

/// The pipeline sampler over `C` augmented by a sampled neighborhood, with
/// its separation estimate over pairs of `C`.
pub struct PipelineRun {
    pub sampler: InductiveSampler,
    pub report: SeparationReport,
    /// `K D √(ln n)/(K_* − 1)`.
    pub bound_value: f64,
    pub log: Arc<SnapshotLog>,
    /// Size of the original set.
    pub base: usize,
}

impl PipelineRun {
    pub fn gamma_used(&self) -> f64 {
        self.log.gamma_used()
    }

    /// Wilson interval of `σ̂` at the maximizing pair.
    pub fn sigma_interval(&self) -> (f64, f64) {
        let r = &self.report;
        let Some((i, j)) = r.argmax else { return (0.0, wilson(0, r.trials).1 * r.delta / min_positive(&r.dists)) };
        let mut out = (0.0, 0.0);
        r.for_each_pair(|a, b, d, c| {
            if a == i && b == j {
                let (lo, hi) = wilson(c as u64, r.trials);
                out = (lo * r.delta / d, hi * r.delta / d);
            }
        });
        out
    }
}

fn min_positive(d: &[f64]) -> f64 {
    d.iter().cloned().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min)
}

pub fn lp_separation_sampler(cfg: &PipelineConfig, c: Arc<PointSet>, rng: &mut Rng) -> Result<PipelineRun> {
    if c.is_empty() {
        return domain("empty point set");
    }
    if (c.p() - cfg.p).abs() > 0.0 {
        return domain(format!("set has p = {} but the configuration has p = {}", c.p(), cfg.p));
    }
    let base = c.len();
    let r = cfg.neighborhood_radius();
    let all: Vec<usize> = (0..base).collect();
    let (augmented, parents) = neighborhood_sample(&c, &all, r, cfg.neighborhood_samples, rng)?;
    for (t, &x) in parents.iter().enumerate() {
        let d = augmented.d(base + t, x);
        if d > r {
            return Err(Error::Validation(format!("neighborhood point {} is {d} from its parent, above {r}", base + t)));
        }
    }
    let inner = MazurSnapshot::new(cfg.clone(), AnchorChoice::Finite { base });
    let log = inner.log();
    let augmented = Arc::new(augmented);
    let diam = diameter(&(0..augmented.len()).collect::<Vec<_>>(), &augmented)?;
    // A set of diameter at most Δ/2 is already one cluster at the top scale.
    let sampler = if cfg.delta >= 2.0 * diam {
        let ladder = ScaleLadder::with_top(cfg.delta, cfg.k_star, 0, diam)?;
        InductiveSampler::with_ladder(Arc::new(inner), augmented, ladder, TraceMode::Cluster)
    } else {
        induct_scales(Arc::new(inner), augmented, cfg.delta, cfg.k_star, TraceMode::Cluster)?
    };
    let report = estimate_separation_among(&sampler, &all, cfg.trials, cfg.seed)?;
    Ok(PipelineRun { sampler, report, bound_value: cfg.bound_value(base), log, base })
}

/// `n` points `ρu` with `u` uniform on the unit sphere of `ℓ_p^dim` and `ρ`
/// uniform in `[0, 1]`.
pub fn random_lp_set(p: f64, n: usize, dim: usize, rng: &mut Rng) -> Result<PointSet> {
    let space = Space::uniform(p, dim)?;
    let mut rows = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let u = sphere_direction(&space, rng);
        let rho = rng.random::<f64>();
        rows.extend(u.into_iter().map(|v| rho * v));
    }
    PointSet::from_flat(Arc::new(space), rows, None)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthRow {
    pub p: f64,
    pub n: usize,
    pub dim: usize,
    pub delta: f64,
    /// `Δ` as a fraction of the diameter.
    pub delta_fraction: f64,
    pub sigma_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bound_value: f64,
    pub gamma_used: f64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthFit {
    pub p: f64,
    pub delta_fraction: f64,
    /// Exponent of `σ̂` against `ln n` over `n ≥ min_n`.
    pub exponent_log_n: f64,
    pub min_n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthTable {
    pub rows: Vec<GrowthRow>,
}

pub const GROWTH_CSV_HEADER: &str = "p,n,dim,delta,sigma_hat,ci_lo,ci_hi,bound_value,gamma_used,trials,seed";
pub const DELTA_FRACTIONS: [f64; 2] = [0.25, 0.0625];

impl GrowthTable {
    pub fn write_csv(&self, out: &mut dyn std::io::Write) -> Result<()> {
        writeln!(out, "{GROWTH_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
                r.p, r.n, r.dim, r.delta, r.sigma_hat, r.ci_lo, r.ci_hi, r.bound_value, r.gamma_used, r.trials, r.seed
            )?;
        }
        Ok(())
    }

    fn groups(&self) -> Vec<(f64, f64)> {
        let mut keys: Vec<(f64, f64)> = Vec::new();
        for r in &self.rows {
            if !keys.contains(&(r.p, r.delta_fraction)) {
                keys.push((r.p, r.delta_fraction));
            }
        }
        keys
    }

    /// Rows of one `(p, Δ/diam)` group, ordered by `n`.
    pub fn series(&self, p: f64, delta_fraction: f64) -> Vec<&GrowthRow> {
        let mut v: Vec<&GrowthRow> = self.rows.iter().filter(|r| r.p == p && r.delta_fraction == delta_fraction).collect();
        v.sort_by_key(|r| r.n);
        v
    }

    /// Exponent of `σ̂` against `ln n` for every `(p, Δ/diam)` group. Groups
    /// with fewer than two usable rows get `NaN`.
    pub fn log_n_fits(&self, min_n: usize) -> Vec<GrowthFit> {
        self.groups()
            .into_iter()
            .map(|(p, f)| {
                let rows: Vec<&GrowthRow> = self.series(p, f).into_iter().filter(|r| r.n >= min_n && r.sigma_hat > 0.0).collect();
                let exponent = if rows.len() < 2 {
                    f64::NAN
                } else {
                    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
                    let y: Vec<f64> = rows.iter().map(|r| r.sigma_hat).collect();
                    power_law_exponent(&x, &y)
                };
                GrowthFit { p, delta_fraction: f, exponent_log_n: exponent, min_n }
            })
            .collect()
    }

    /// Exponent of `σ̂` against `p` at fixed `n` and `Δ/diam`.
    pub fn p_exponent(&self, n: usize, delta_fraction: f64) -> f64 {
        let rows: Vec<&GrowthRow> =
            self.rows.iter().filter(|r| r.n == n && r.delta_fraction == delta_fraction && r.sigma_hat > 0.0).collect();
        if rows.len() < 2 {
            return f64::NAN;
        }
        let x: Vec<f64> = rows.iter().map(|r| r.p).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.sigma_hat).collect();
        power_law_exponent(&x, &y)
    }
}

/// For each `(p, n)`, a random set as in [`random_lp_set`] run through the
/// pipeline at `Δ = diam/4` and `Δ = diam/16`.
pub fn sep_growth_experiment(p_list: &[f64], n_list: &[usize], dim: usize, trials: u64, seed: u64) -> Result<GrowthTable> {
    sep_growth_with(p_list, n_list, dim, trials, seed, &DELTA_FRACTIONS, DEFAULT_NEIGHBORHOOD_SAMPLES)
}

pub fn sep_growth_with(
    p_list: &[f64],
    n_list: &[usize],
    dim: usize,
    trials: u64,
    seed: u64,
    fractions: &[f64],
    neighborhood_samples: usize,
) -> Result<GrowthTable> {
    let mut rows = Vec::new();
    for (a, &p) in p_list.iter().enumerate() {
        for (b, &n) in n_list.iter().enumerate() {
            let set_seed = derive_seed(derive_seed(seed, a as u64), b as u64);
            let mut rng = from_seed(set_seed);
            let c = Arc::new(random_lp_set(p, n, dim, &mut rng)?);
            let diam = if n < 2 { 0.0 } else { diameter(&(0..n).collect::<Vec<_>>(), &c)? };
            for (f_idx, &f) in fractions.iter().enumerate() {
                let delta = if diam > 0.0 { f * diam } else { 1.0 };
                let run_seed = derive_seed(set_seed, 1 + f_idx as u64);
                let mut cfg = PipelineConfig::new(p, delta, trials, run_seed)?;
                cfg.neighborhood_samples = neighborhood_samples;
                let mut rng = from_seed(derive_seed(run_seed, u64::MAX));
                let run = lp_separation_sampler(&cfg, c.clone(), &mut rng)?;
                let (ci_lo, ci_hi) = run.sigma_interval();
                rows.push(GrowthRow {
                    p,
                    n,
                    dim,
                    delta,
                    delta_fraction: f,
                    sigma_hat: run.report.sigma_hat,
                    ci_lo,
                    ci_hi,
                    bound_value: run.bound_value,
                    gamma_used: run.gamma_used(),
                    trials,
                    seed: run_seed,
                });
            }
        }
    }
    Ok(GrowthTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{estimate_separation, BoundMode, CenterChoice, CkrSampler, PartitionSampler};

    #[test]
    fn config_invariants() {
        for p in [2.0, 2.5, 3.0, 4.0, 8.0, 64.0] {
            let c = PipelineConfig::new(p, 1.0, 10, 1).unwrap();
            assert!(c.k_star > 1.0 && c.k_star < c.k);
            for s in 0..20 {
                let spec = SnapshotSpec::new(&c, vec![], s).unwrap();
                assert!(spec.alpha > spec.beta_net && spec.beta_net > 0.0);
                // Reach plus the neighborhood radius is exactly α.
                assert!((spec.reach(&c) + c.neighborhood_radius() - spec.alpha).abs() < 1e-12 * spec.alpha);
            }
        }
        assert!(PipelineConfig::with_gamma(3.0, 1.0, 0.5, 10, 1).is_err());
        assert!(PipelineConfig::new(1.5, 1.0, 10, 1).is_err());
        assert!(PipelineConfig::new(3.0, 0.0, 10, 1).is_err());
    }

    fn snapshot_run(p: f64, n: usize, seed: u64) -> (Arc<PointSet>, LocalPartition, f64) {
        let mut rng = from_seed(seed);
        let s = Arc::new(random_lp_set(p, n, 6, &mut rng).unwrap());
        let cfg = PipelineConfig::new(p, 1.0, 10, seed).unwrap();
        let inner = MazurSnapshot::new(cfg.clone(), AnchorChoice::Finite { base: n });
        let members: Vec<usize> = (0..n).collect();
        let z = vec![0.0; 6];
        let scale = 1.0 / cfg.k_star;
        let local = inner.partition(&s, &members, &z, 1.0, scale, &mut rng).unwrap();
        (s, local, scale)
    }

    #[test]
    fn single_point_snapshot() {
        let (_, local, _) = snapshot_run(4.0, 1, 2);
        assert_eq!(local.clusters, vec![vec![0]]);
    }

    #[test]
    fn snapshot_clusters_are_radially_bounded() {
        for p in [2.0, 4.0] {
            let (s, local, scale) = snapshot_run(p, 64, 3);
            let mut seen = vec![false; 64];
            for (c, z) in local.clusters.iter().zip(&local.centers) {
                for &i in c {
                    assert!(!seen[i]);
                    seen[i] = true;
                    assert!(s.dist_to(i, z) <= scale);
                }
            }
            assert!(seen.iter().all(|&b| b));
        }
    }

    #[test]
    fn p_two_matches_direct_carving() {
        // At p = 2 the radial map is a translation followed by division by 2,
        // so the snapshot is CKR at scale Δ/(8D) of the set itself, halved.
        let mut rng = from_seed(4);
        let s = Arc::new(random_lp_set(2.0, 40, 5, &mut rng).unwrap());
        let cfg = PipelineConfig::new(2.0, 1.0, 10, 1).unwrap();
        let inner = MazurSnapshot::new(cfg.clone(), AnchorChoice::Finite { base: 40 });
        let members: Vec<usize> = (0..40).collect();
        let z = vec![0.0; 5];
        let local = inner.partition(&s, &members, &z, 1.0, 1.0, &mut from_seed(9)).unwrap();
        let rows: Vec<Vec<f64>> = (0..40).map(|i| s.point(i).iter().map(|v| v / 2.0).collect()).collect();
        let half = PointSet::new(s.space().clone(), rows, None).unwrap();
        let mut rng = from_seed(9);
        let direct = ckr_partition(&half, 1.0 / (8.0 * cfg.d), &mut rng).unwrap();
        let mut a = local.clusters.clone();
        let mut b = direct.clusters.clone();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn large_delta_never_separates() {
        let mut rng = from_seed(5);
        let c = Arc::new(random_lp_set(3.0, 20, 4, &mut rng).unwrap());
        let diam = diameter(&(0..20).collect::<Vec<_>>(), &c).unwrap();
        let cfg = PipelineConfig::new(3.0, 2.0 * diam + 1.0, 20, 1).unwrap();
        let run = lp_separation_sampler(&cfg, c, &mut rng).unwrap();
        assert_eq!(run.report.sigma_hat, 0.0);
        assert_eq!(run.log.halvings(), 0);
    }

    #[test]
    fn two_far_points_stay_below_the_forced_value() {
        // Two points at distance 1 with Δ = 1/2: separation probability is at
        // most 1, so σ̂ never exceeds Δ/d = 1/2.
        let s = Arc::new(PointSet::new(Space::uniform(4.0, 2).unwrap(), vec![vec![0.0, 0.0], vec![2f64.powf(0.25), 0.0]], None).unwrap());
        assert!((s.d(0, 1) - 1.0).abs() < 1e-12);
        let mut cfg = PipelineConfig::new(4.0, 0.5, 50, 3).unwrap();
        cfg.neighborhood_samples = 4;
        let run = lp_separation_sampler(&cfg, s, &mut from_seed(1)).unwrap();
        assert!(run.report.sigma_hat <= 0.5 + 1e-12);
        let (lo, hi) = run.sigma_interval();
        assert!(lo <= run.report.sigma_hat && run.report.sigma_hat <= hi);
    }

    #[test]
    fn emitted_partitions_validate_and_are_deterministic() {
        let mut rng = from_seed(6);
        let c = Arc::new(random_lp_set(4.0, 48, 8, &mut rng).unwrap());
        let diam = diameter(&(0..48).collect::<Vec<_>>(), &c).unwrap();
        let cfg = PipelineConfig::new(4.0, diam / 4.0, 10, 7).unwrap();
        let run = lp_separation_sampler(&cfg, c.clone(), &mut from_seed(1)).unwrap();
        let again = lp_separation_sampler(&cfg, c, &mut from_seed(1)).unwrap();
        assert_eq!(run.report.counts, again.report.counts);
        for t in 0..5 {
            let part = run.sampler.sample(11, t).unwrap();
            assert_eq!(part.mode, BoundMode::RadiallyBounded(AmbientMode::ContinuousLp));
            part.validate(run.sampler.points()).unwrap();
        }
    }

    #[test]
    fn projection_is_used_for_many_anchors_in_high_dimension() {
        // 40 anchors in dimension 200: the projection dimension ⌈24 ln 40⌉ = 89
        // is below the ambient one, so queries go through Kirszbraun.
        let mut rng = from_seed(7);
        let s = Arc::new(random_lp_set(3.0, 48, 200, &mut rng).unwrap());
        let cfg = PipelineConfig::new(3.0, 1.0, 10, 1).unwrap();
        let inner = MazurSnapshot::new(cfg.clone(), AnchorChoice::Finite { base: 40 });
        let members: Vec<usize> = (0..48).collect();
        let local = inner.partition(&s, &members, &vec![0.0; 200], 1.0, 1.0 / cfg.k_star, &mut rng).unwrap();
        let total: usize = local.clusters.iter().map(|c| c.len()).sum();
        assert_eq!(total, 48);
    }

    #[test]
    fn p_two_pipeline_and_ckr_on_the_same_set() {
        let mut rng = from_seed(8);
        let c = Arc::new(random_lp_set(2.0, 32, 4, &mut rng).unwrap());
        let diam = diameter(&(0..32).collect::<Vec<_>>(), &c).unwrap();
        let mut cfg = PipelineConfig::new(2.0, diam / 4.0, 100, 2).unwrap();
        cfg.neighborhood_samples = 0;
        let run = lp_separation_sampler(&cfg, c.clone(), &mut rng).unwrap();
        let direct = CkrSampler::new(c, diam / 4.0, CenterChoice::Net).unwrap();
        let d = estimate_separation(&direct, 100, 2).unwrap();
        assert!(d.sigma_hat <= run.bound_value);
        assert!(run.report.sigma_hat <= run.bound_value);
    }
}
