//! Refinement of radially bounded partitions across scales, and pullback of
//! partitions through maps.
//!
//! A coarse partition at scale `KΔ` whose clusters come with ball centers is
//! refined by partitioning, for every coarse cluster, the trace of the ball
//! `B(z, KΔ + ε)` at scale `Δ` and intersecting. Repeating this down a ladder
//! `K^sΔ` gives the induction on scales.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{domain, Error, Result};
use crate::metric::{greedy_net_of, AmbientMode, PointSet, SweepIndex};
use crate::partition::{
    radial_certificate, BoundMode, CenterChoice, Partition, PartitionSampler, SamplerInfo,
};
use crate::rng::{derive_seed, substream, Rng};

/// Relative slack `ε = 1e−9·Δ` added to enclosing balls.
pub const EPSILON_FACTOR: f64 = 1e-9;

/// Clusters of a local partition with one ball center per cluster.
#[derive(Clone, Debug, Default)]
pub struct LocalPartition {
    pub clusters: Vec<Vec<usize>>,
    pub centers: Vec<Vec<f64>>,
}

/// Partitions finite subsets of balls radially at a given scale.
pub trait SnapshotPartitioner: Send + Sync {
    /// Splits `members` (rows of `s` inside `B(center, radius)`) into clusters
    /// each contained in a ball of radius `scale`, returning a center per
    /// cluster.
    fn partition(
        &self,
        s: &PointSet,
        members: &[usize],
        center: &[f64],
        radius: f64,
        scale: f64,
        rng: &mut Rng,
    ) -> Result<LocalPartition>;

    fn ambient(&self) -> AmbientMode;

    fn name(&self) -> String;
}

/// Ball carving with radius uniform in `[scale/2, scale]` around centers taken
/// in random order.
#[derive(Clone, Copy, Debug)]
pub struct BallCarving {
    pub centers: CenterChoice,
}

impl SnapshotPartitioner for BallCarving {
    fn partition(
        &self,
        s: &PointSet,
        members: &[usize],
        _center: &[f64],
        _radius: f64,
        scale: f64,
        rng: &mut Rng,
    ) -> Result<LocalPartition> {
        let rho = scale * (0.5 + 0.5 * rng.random::<f64>());
        let mut order = match self.centers {
            CenterChoice::AllPoints => members.to_vec(),
            CenterChoice::Net => greedy_net_of(s, members, scale / 4.0)?,
        };
        order.shuffle(rng);
        let index = SweepIndex::new(s.coords(), s.dim(), s.space(), members);
        let pos: std::collections::HashMap<usize, usize> = members.iter().enumerate().map(|(a, &i)| (i, a)).collect();
        let mut owner = vec![usize::MAX; members.len()];
        for (rank, &c) in order.iter().enumerate() {
            index.for_each_within(s.point(c), rho, |id, _| {
                let a = pos[&id];
                if owner[a] == usize::MAX {
                    owner[a] = rank;
                }
            });
        }
        let mut clusters = vec![Vec::new(); order.len()];
        for (a, &o) in owner.iter().enumerate() {
            if o == usize::MAX {
                return Err(Error::Structural(format!("point {} not covered by carving", members[a])));
            }
            clusters[o].push(members[a]);
        }
        let mut out = LocalPartition::default();
        for (rank, c) in clusters.into_iter().enumerate() {
            if !c.is_empty() {
                out.clusters.push(c);
                out.centers.push(s.point(order[rank]).to_vec());
            }
        }
        Ok(out)
    }

    fn ambient(&self) -> AmbientMode {
        AmbientMode::WithinSet
    }

    fn name(&self) -> String {
        match self.centers {
            CenterChoice::Net => "carving-net".into(),
            CenterChoice::AllPoints => "carving-all".into(),
        }
    }
}

/// Which points the inner partitioner sees for a coarse cluster.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceMode {
    /// Every point of the ball `B(z, KΔ + ε)`.
    Ball,
    /// The coarse cluster only. Valid whenever the inner scheme's guarantee
    /// holds for every finite subset of the ball.
    Cluster,
}

/// The geometric ladder of scales `K_*^s Δ`, `s = 0..=s_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleLadder {
    pub delta: f64,
    pub k_star: f64,
    pub s_max: usize,
}

impl ScaleLadder {
    /// `s_max = ⌈log_{K_*}(2·diam/Δ)⌉ + 1`, so `K_*^{s_max}Δ ≥ 2·diam`.
    pub fn new(delta: f64, k_star: f64, diam: f64) -> Result<Self> {
        if !(k_star > 1.0) || !k_star.is_finite() {
            return domain(format!("scale ratio {k_star} must exceed 1"));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return domain(format!("scale {delta} must be positive"));
        }
        let ratio = (2.0 * diam / delta).max(1.0);
        let s_max = (ratio.ln() / k_star.ln()).ceil().max(0.0) as usize + 1;
        let ladder = Self { delta, k_star, s_max };
        ladder.check(diam)?;
        Ok(ladder)
    }

    pub fn with_top(delta: f64, k_star: f64, s_max: usize, diam: f64) -> Result<Self> {
        if !(k_star > 1.0) {
            return domain(format!("scale ratio {k_star} must exceed 1"));
        }
        let ladder = Self { delta, k_star, s_max };
        ladder.check(diam)?;
        Ok(ladder)
    }

    fn check(&self, diam: f64) -> Result<()> {
        if self.scale(self.s_max) < 2.0 * diam {
            return domain(format!(
                "top scale {} does not cover twice the diameter {}",
                self.scale(self.s_max),
                diam
            ));
        }
        Ok(())
    }

    pub fn scale(&self, s: usize) -> f64 {
        self.k_star.powi(s as i32) * self.delta
    }

    /// Greedy net of `s` at granularity `K_*^{level+1}Δ`, the snapshot centers
    /// of that level.
    pub fn snapshot_centers(&self, s: &PointSet, level: usize) -> Result<Vec<usize>> {
        crate::metric::greedy_net(s, self.scale(level + 1))
    }
}

/// One refinement step: every cluster of `outer` (radially `k·scale`-bounded
/// with centers) is intersected with an inner partition at `scale`.
pub fn refine_once(
    outer: &Partition,
    s: &PointSet,
    inner: &dyn SnapshotPartitioner,
    k: f64,
    scale: f64,
    trace: TraceMode,
    rng: &mut Rng,
) -> Result<Partition> {
    let ambient = inner.ambient();
    let eps = EPSILON_FACTOR * scale;
    let all: Vec<usize> = (0..s.len()).collect();
    let index = match trace {
        TraceMode::Ball => Some(SweepIndex::new(s.coords(), s.dim(), s.space(), &all)),
        TraceMode::Cluster => None,
    };
    let mut clusters = Vec::new();
    let mut centers = Vec::new();
    for (c, z) in outer.clusters.iter().zip(&outer.centers) {
        if c.len() == 1 {
            clusters.push(c.clone());
            centers.push(Some(s.point(c[0]).to_vec()));
            continue;
        }
        let z = match z {
            Some(z) => z.clone(),
            None => radial_certificate(c, s, k * scale, ambient, None)?
                .ok_or_else(|| Error::Validation("outer cluster has no enclosing ball".into()))?,
        };
        let radius = k * scale + eps;
        let members = match &index {
            Some(ix) => {
                let mut m = ix.within(&z, radius);
                m.sort_unstable();
                m
            }
            None => c.clone(),
        };
        let local = inner.partition(s, &members, &z, radius, scale, rng)?;
        let mut owner = std::collections::HashMap::with_capacity(members.len());
        for (t, lc) in local.clusters.iter().enumerate() {
            for &i in lc {
                owner.insert(i, t);
            }
        }
        let mut pieces: Vec<Vec<usize>> = vec![Vec::new(); local.clusters.len()];
        for &i in c {
            match owner.get(&i) {
                Some(&t) => pieces[t].push(i),
                None => return Err(Error::Structural(format!("point {i} missing from the inner partition"))),
            }
        }
        for (t, piece) in pieces.into_iter().enumerate() {
            if !piece.is_empty() {
                clusters.push(piece);
                centers.push(Some(local.centers[t].clone()));
            }
        }
    }
    let p = Partition::with_centers(clusters, centers, scale, BoundMode::RadiallyBounded(ambient));
    p.validate(s)?;
    Ok(p)
}

/// `refine_once` as a sampler: an outer sampler at scale `KΔ` refined by a
/// snapshot partitioner at `Δ`.
pub struct RefinedSampler {
    pub outer: Arc<dyn PartitionSampler>,
    pub inner: Arc<dyn SnapshotPartitioner>,
    pub k: f64,
    pub trace: TraceMode,
}

impl PartitionSampler for RefinedSampler {
    fn sample(&self, seed: u64, index: u64) -> Result<Partition> {
        let outer = self.outer.sample(derive_seed(seed, 0), index)?;
        let mut rng = substream(derive_seed(seed, 1), index);
        refine_once(&outer, self.outer.points(), self.inner.as_ref(), self.k, self.delta(), self.trace, &mut rng)
    }
    fn delta(&self) -> f64 {
        self.outer.delta() / self.k
    }
    fn mode(&self) -> BoundMode {
        BoundMode::RadiallyBounded(self.inner.ambient())
    }
    fn points(&self) -> &Arc<PointSet> {
        self.outer.points()
    }
    fn info(&self) -> SamplerInfo {
        SamplerInfo::new(&format!("refine({})", self.inner.name())).with("k", self.k)
    }
}

/// The induction-on-scales sampler: starts from one cluster at the top of the
/// ladder and refines down to `Δ`.
pub struct InductiveSampler {
    set: Arc<PointSet>,
    pub ladder: ScaleLadder,
    inner: Arc<dyn SnapshotPartitioner>,
    trace: TraceMode,
}

pub fn induct_scales(
    inner: Arc<dyn SnapshotPartitioner>,
    s: Arc<PointSet>,
    delta: f64,
    k_star: f64,
    trace: TraceMode,
) -> Result<InductiveSampler> {
    if s.is_empty() {
        return domain("empty point set");
    }
    let diam = crate::metric::diameter(&(0..s.len()).collect::<Vec<_>>(), &s)?;
    let ladder = ScaleLadder::new(delta, k_star, diam)?;
    Ok(InductiveSampler { set: s, ladder, inner, trace })
}

impl InductiveSampler {
    pub fn with_ladder(inner: Arc<dyn SnapshotPartitioner>, s: Arc<PointSet>, ladder: ScaleLadder, trace: TraceMode) -> Self {
        Self { set: s, ladder, inner, trace }
    }

    /// Partitions at every scale, top first; entry `t` is at scale index
    /// `s_max − t`.
    pub fn sample_ladder(&self, seed: u64, index: u64) -> Result<Vec<Partition>> {
        let mut rng = substream(seed, index);
        let ambient = self.inner.ambient();
        let n = self.set.len();
        let top = self.ladder.scale(self.ladder.s_max);
        let mut current = Partition::with_centers(
            vec![(0..n).collect()],
            vec![Some(self.set.point(0).to_vec())],
            top,
            BoundMode::RadiallyBounded(ambient),
        );
        current.validate(&self.set)?;
        let mut out = vec![current.clone()];
        for level in (0..self.ladder.s_max).rev() {
            let scale = self.ladder.scale(level);
            current = refine_once(&current, &self.set, self.inner.as_ref(), self.ladder.k_star, scale, self.trace, &mut rng)?;
            out.push(current.clone());
        }
        Ok(out)
    }
}

impl PartitionSampler for InductiveSampler {
    fn sample(&self, seed: u64, index: u64) -> Result<Partition> {
        Ok(self.sample_ladder(seed, index)?.pop().expect("ladder is nonempty"))
    }
    fn delta(&self) -> f64 {
        self.ladder.delta
    }
    fn mode(&self) -> BoundMode {
        BoundMode::RadiallyBounded(self.inner.ambient())
    }
    fn points(&self) -> &Arc<PointSet> {
        &self.set
    }
    fn info(&self) -> SamplerInfo {
        SamplerInfo::new(&format!("induct({})", self.inner.name()))
            .with("k_star", self.ladder.k_star)
            .with("s_max", self.ladder.s_max as f64)
    }
}

/// Per-scale separation accounting of an inductive sampler: for each scale
/// `s`, the frequency with which a pair is together at `s+1` and split at `s`.
#[derive(Clone, Debug)]
pub struct LadderReport {
    /// `(s, scale, sigma_hat_s, mean cluster count)`, `s` ascending.
    pub rows: Vec<(usize, f64, f64, f64)>,
    pub trials: u64,
}

impl LadderReport {
    /// `Σ_s K_*^{−s} σ̂_s`.
    pub fn telescoped(&self, k_star: f64) -> f64 {
        self.rows.iter().map(|&(s, _, sig, _)| sig / k_star.powi(s as i32)).sum()
    }

    pub fn write_csv(&self, out: &mut dyn std::io::Write) -> Result<()> {
        writeln!(out, "s,scale,sigma_hat,clusters_mean")?;
        for &(s, scale, sig, cl) in &self.rows {
            writeln!(out, "{s},{scale:e},{sig:e},{cl:e}")?;
        }
        Ok(())
    }
}

/// Estimates `σ̂_s` for each level of the ladder over all pairs of `ids`.
pub fn ladder_report(sampler: &InductiveSampler, ids: &[usize], trials: u64, seed: u64) -> Result<LadderReport> {
    let s = sampler.points();
    let levels = sampler.ladder.s_max;
    let m = ids.len();
    let npairs = m * m.saturating_sub(1) / 2;
    let mut counts = vec![vec![0u32; npairs]; levels];
    let mut clusters = vec![0u64; levels];
    for t in 0..trials {
        let parts = sampler.sample_ladder(seed, t)?;
        let assigns: Vec<Vec<u32>> = parts.iter().map(|p| p.assignment()).collect();
        for step in 1..parts.len() {
            let level = levels - step;
            clusters[level] += parts[step].len() as u64;
            let (up, here) = (&assigns[step - 1], &assigns[step]);
            let mut k = 0;
            for a in 0..m {
                for b in a + 1..m {
                    let (i, j) = (ids[a], ids[b]);
                    if up[i] == up[j] && here[i] != here[j] {
                        counts[level][k] += 1;
                    }
                    k += 1;
                }
            }
        }
    }
    let mut rows = Vec::new();
    for level in 0..levels {
        let scale = sampler.ladder.scale(level);
        let mut best = 0.0f64;
        let mut k = 0;
        for a in 0..m {
            for b in a + 1..m {
                let d = s.d(ids[a], ids[b]);
                if d > 0.0 {
                    best = best.max(counts[level][k] as f64 / trials as f64 * scale / d);
                }
                k += 1;
            }
        }
        rows.push((level, scale, best, clusters[level] as f64 / trials as f64));
    }
    Ok(LadderReport { rows, trials })
}

/// Partitions of a source set obtained by pulling back partitions of its
/// image under a map with Lipschitz constant `lip`.
pub struct PullbackSampler {
    source: Arc<PointSet>,
    target: Arc<dyn PartitionSampler>,
    delta: f64,
    ambient: AmbientMode,
    pub lip: f64,
    pub r: f64,
}

/// Checks at every source point `x` that `{y : ‖φ(y) − φ(x)‖ ≤ L·R}` has
/// radius at most `Δ`, then returns the pullback sampler. `target` partitions
/// the image set, whose rows are `φ` of the source rows in order.
pub fn pullback_partition(
    source: Arc<PointSet>,
    target: Arc<dyn PartitionSampler>,
    lip: f64,
    r: f64,
    delta: f64,
    ambient: AmbientMode,
) -> Result<PullbackSampler> {
    let image = target.points().clone();
    if image.len() != source.len() {
        return Err(Error::Structural("image and source sizes differ".into()));
    }
    if !(delta > 0.0 && r > 0.0 && lip > 0.0) {
        return domain("pullback scales must be positive");
    }
    let all: Vec<usize> = (0..image.len()).collect();
    let index = SweepIndex::new(image.coords(), image.dim(), image.space(), &all);
    for x in 0..source.len() {
        let mut pre = index.within(image.point(x), lip * r);
        pre.sort_unstable();
        if radial_certificate(&pre, &source, delta, ambient, Some(source.point(x)))?.is_none() {
            return Err(Error::Rejected {
                witness: x,
                msg: format!("preimage of the image ball of radius {} has radius above {delta}", lip * r),
            });
        }
    }
    Ok(PullbackSampler { source, target, delta, ambient, lip, r })
}

impl PartitionSampler for PullbackSampler {
    fn sample(&self, seed: u64, index: u64) -> Result<Partition> {
        let q = self.target.sample(seed, index)?;
        let p = Partition::new(q.clusters, self.delta, BoundMode::RadiallyBounded(self.ambient));
        p.validate(&self.source)?;
        Ok(p)
    }
    fn delta(&self) -> f64 {
        self.delta
    }
    fn mode(&self) -> BoundMode {
        BoundMode::RadiallyBounded(self.ambient)
    }
    fn points(&self) -> &Arc<PointSet> {
        &self.source
    }
    fn info(&self) -> SamplerInfo {
        SamplerInfo::new(&format!("pullback({})", self.target.info().scheme)).with("lip", self.lip).with("r", self.r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Space;
    use crate::partition::{estimate_separation, FnSampler};
    use crate::rng::from_seed;

    fn random_set(n: usize, dim: usize, seed: u64) -> Arc<PointSet> {
        let mut rng = from_seed(seed);
        let rows = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
        Arc::new(PointSet::new(Space::uniform(2.0, dim).unwrap(), rows, None).unwrap())
    }

    struct Singletons;
    impl SnapshotPartitioner for Singletons {
        fn partition(&self, s: &PointSet, m: &[usize], _: &[f64], _: f64, _: f64, _: &mut Rng) -> Result<LocalPartition> {
            Ok(LocalPartition { clusters: m.iter().map(|&i| vec![i]).collect(), centers: m.iter().map(|&i| s.point(i).to_vec()).collect() })
        }
        fn ambient(&self) -> AmbientMode {
            AmbientMode::WithinSet
        }
        fn name(&self) -> String {
            "singletons".into()
        }
    }

    struct Whole;
    impl SnapshotPartitioner for Whole {
        fn partition(&self, _: &PointSet, m: &[usize], z: &[f64], _: f64, _: f64, _: &mut Rng) -> Result<LocalPartition> {
            Ok(LocalPartition { clusters: vec![m.to_vec()], centers: vec![z.to_vec()] })
        }
        fn ambient(&self) -> AmbientMode {
            AmbientMode::ContinuousLp
        }
        fn name(&self) -> String {
            "whole".into()
        }
    }

    #[test]
    fn singletons_inner_gives_singletons() {
        let s = random_set(10, 2, 1);
        let outer = Partition::with_centers(
            vec![(0..10).collect()],
            vec![Some(s.point(0).to_vec())],
            2.0,
            BoundMode::RadiallyBounded(AmbientMode::WithinSet),
        );
        let p = refine_once(&outer, &s, &Singletons, 2.0, 1.0, TraceMode::Ball, &mut from_seed(1)).unwrap();
        assert_eq!(p.len(), 10);
    }

    #[test]
    fn identity_at_scale_keeps_outer() {
        let s = random_set(10, 2, 2);
        let z = vec![0.5, 0.5];
        let outer = Partition::with_centers(
            vec![(0..10).collect()],
            vec![Some(z)],
            1.5,
            BoundMode::RadiallyBounded(AmbientMode::ContinuousLp),
        );
        let p = refine_once(&outer, &s, &Whole, 1.5, 1.0, TraceMode::Ball, &mut from_seed(1)).unwrap();
        assert_eq!(p.clusters, outer.clusters);
    }

    #[test]
    fn inner_failure_is_reported() {
        let s = random_set(10, 2, 3);
        let outer = Partition::with_centers(
            vec![(0..10).collect()],
            vec![Some(vec![0.5, 0.5])],
            1.0,
            BoundMode::RadiallyBounded(AmbientMode::ContinuousLp),
        );
        let r = refine_once(&outer, &s, &Whole, 4.0, 0.25, TraceMode::Ball, &mut from_seed(1));
        assert!(matches!(r, Err(Error::Validation(_))), "{r:?}");
    }

    #[test]
    fn ladder_rules() {
        let l = ScaleLadder::new(1.0, 1.25, 1.0).unwrap();
        assert!(l.scale(l.s_max) >= 2.0);
        assert_eq!(l.s_max, (2f64.ln() / 1.25f64.ln()).ceil() as usize + 1);
        assert!(ScaleLadder::new(1.0, 1.0, 1.0).is_err());
        assert!(ScaleLadder::with_top(1.0, 2.0, 0, 1.0).is_err());
    }

    #[test]
    fn single_point_and_large_delta() {
        let one = random_set(1, 2, 4);
        let ind = induct_scales(Arc::new(BallCarving { centers: CenterChoice::AllPoints }), one, 1.0, 1.25, TraceMode::Ball).unwrap();
        assert_eq!(ind.sample(1, 0).unwrap().len(), 1);
        let s = random_set(20, 2, 5);
        let big = induct_scales(Arc::new(Whole), s, 10.0, 1.25, TraceMode::Ball).unwrap();
        let r = estimate_separation(&big, 10, 3).unwrap();
        assert_eq!(r.sigma_hat, 0.0);
    }

    #[test]
    fn cluster_counts_never_decrease() {
        let s = random_set(64, 3, 6);
        let ind = induct_scales(Arc::new(BallCarving { centers: CenterChoice::AllPoints }), s, 0.2, 1.25, TraceMode::Ball).unwrap();
        for t in 0..5 {
            let ladder = ind.sample_ladder(8, t).unwrap();
            for w in ladder.windows(2) {
                assert!(w[1].len() >= w[0].len());
            }
        }
    }

    #[test]
    fn identity_pullback_and_rescaling() {
        let s = random_set(30, 2, 7);
        let single: Arc<dyn PartitionSampler> = Arc::new(FnSampler::new(
            s.clone(),
            0.5,
            BoundMode::DiameterBounded,
            "singletons",
            |_, _| (0..30).map(|i| vec![i]).collect(),
        ));
        let pb = pullback_partition(s.clone(), single.clone(), 1.0, 1e-6, 1e-6, AmbientMode::ContinuousLp).unwrap();
        assert_eq!(pb.sample(1, 0).unwrap().clusters, single.sample(1, 0).unwrap().clusters);
        let half_rows: Vec<Vec<f64>> = (0..30).map(|i| s.point(i).iter().map(|c| c / 2.0).collect()).collect();
        let half = Arc::new(PointSet::new(s.space().clone(), half_rows, None).unwrap());
        let carve: Arc<dyn PartitionSampler> =
            Arc::new(crate::partition::CkrSampler::new(half, 0.25, CenterChoice::AllPoints).unwrap());
        let pb = pullback_partition(s.clone(), carve.clone(), 0.5, 0.5, 0.5, AmbientMode::WithinSet).unwrap();
        let a = estimate_separation(&pb, 50, 2).unwrap();
        let b = estimate_separation(carve.as_ref(), 50, 2).unwrap();
        assert_eq!(a.counts, b.counts);
    }

    #[test]
    fn pullback_rejects_large_preimages() {
        let s = random_set(30, 2, 8);
        let collapsed = Arc::new(PointSet::new(s.space().clone(), vec![vec![0.0, 0.0]; 30], None).unwrap());
        let target: Arc<dyn PartitionSampler> = Arc::new(FnSampler::new(
            collapsed,
            1.0,
            BoundMode::DiameterBounded,
            "whole",
            |_, _| vec![(0..30).collect()],
        ));
        let r = pullback_partition(s, target, 1.0, 1.0, 0.01, AmbientMode::ContinuousLp);
        assert!(matches!(r, Err(Error::Rejected { witness: 0, .. })));
    }
}
