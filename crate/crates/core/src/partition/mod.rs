//! Random partitions of finite point sets.
//!
//! A [`Partition`] is an ordered list of disjoint clusters covering a
//! [`PointSet`], together with the scale `Δ` and the bound it claims. Every
//! sampler validates what it emits.

mod ckr;
mod estimate;

pub use ckr::{
    bernoulli_event_probability, bernoulli_subset, ckr_partition, padded_partition, BernoulliEvent,
    CenterChoice, CkrSampler,
};
pub use estimate::{estimate_padding, estimate_separation, estimate_separation_among, fit_padding_kappa, PaddingStats, SeparationReport};

use std::collections::HashMap;
use std::sync::Arc;

use serde_json::json;

use crate::error::{domain, Error, Result};
use crate::metric::{min_enclosing_ball, AmbientMode, PointSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundMode {
    DiameterBounded,
    RadiallyBounded(AmbientMode),
}

impl BoundMode {
    pub fn name(self) -> &'static str {
        match self {
            BoundMode::DiameterBounded => "diameter",
            BoundMode::RadiallyBounded(AmbientMode::WithinSet) => "radial-within-set",
            BoundMode::RadiallyBounded(AmbientMode::ContinuousLp) => "radial-continuous",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub clusters: Vec<Vec<usize>>,
    pub delta: f64,
    pub mode: BoundMode,
    /// Optional per-cluster ball centers certifying a radial bound.
    pub centers: Vec<Option<Vec<f64>>>,
}

impl Partition {
    /// Builds a partition in canonical order: members ascending, clusters by
    /// smallest member.
    pub fn new(clusters: Vec<Vec<usize>>, delta: f64, mode: BoundMode) -> Self {
        let n = clusters.len();
        Self::with_centers(clusters, vec![None; n], delta, mode)
    }

    pub fn with_centers(clusters: Vec<Vec<usize>>, centers: Vec<Option<Vec<f64>>>, delta: f64, mode: BoundMode) -> Self {
        let mut pairs: Vec<(Vec<usize>, Option<Vec<f64>>)> = clusters
            .into_iter()
            .zip(centers)
            .filter(|(c, _)| !c.is_empty())
            .map(|(mut c, z)| {
                c.sort_unstable();
                (c, z)
            })
            .collect();
        pairs.sort_by_key(|(c, _)| c[0]);
        let (clusters, centers) = pairs.into_iter().unzip();
        Self { clusters, delta, mode, centers }
    }

    /// Cluster id of each point, from a label vector (labels need not be dense).
    pub fn from_labels(labels: &[usize], delta: f64, mode: BoundMode) -> Self {
        let mut map: HashMap<usize, usize> = HashMap::new();
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            let k = *map.entry(l).or_insert_with(|| {
                clusters.push(Vec::new());
                clusters.len() - 1
            });
            clusters[k].push(i);
        }
        Self::new(clusters, delta, mode)
    }

    pub fn singletons(n: usize, delta: f64, mode: BoundMode) -> Self {
        Self::new((0..n).map(|i| vec![i]).collect(), delta, mode)
    }

    pub fn whole(n: usize, delta: f64, mode: BoundMode) -> Self {
        Self::new(vec![(0..n).collect()], delta, mode)
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn point_count(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// Cluster index of every point.
    pub fn assignment(&self) -> Vec<u32> {
        let mut a = vec![u32::MAX; self.point_count()];
        for (k, c) in self.clusters.iter().enumerate() {
            for &i in c {
                if i < a.len() {
                    a[i] = k as u32;
                }
            }
        }
        a
    }

    pub fn separates(&self, i: usize, j: usize) -> bool {
        let a = self.assignment();
        a[i] != a[j]
    }

    /// Checks that clusters are disjoint and cover `0..n`.
    pub fn check_cover(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for c in &self.clusters {
            for &i in c {
                if i >= n {
                    return Err(Error::Structural(format!("cluster member {i} out of range for {n} points")));
                }
                if seen[i] {
                    return Err(Error::Structural(format!("point {i} appears in two clusters")));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Structural(format!("point {i} is not covered")));
        }
        Ok(())
    }

    /// Exact validation of the cover and of the declared bound.
    pub fn validate(&self, s: &PointSet) -> Result<()> {
        self.check_cover(s.len())?;
        for (k, c) in self.clusters.iter().enumerate() {
            match self.mode {
                BoundMode::DiameterBounded => {
                    let d = cluster_diameter_exceeds(c, s, self.delta);
                    if let Some((i, j, d)) = d {
                        return Err(Error::Validation(format!(
                            "cluster {k}: d({i},{j}) = {d} exceeds delta = {}",
                            self.delta
                        )));
                    }
                }
                BoundMode::RadiallyBounded(ambient) => {
                    if radial_certificate(c, s, self.delta, ambient, self.centers[k].as_deref())?.is_none() {
                        return Err(Error::Validation(format!(
                            "cluster {k} ({} points) has no {} ball of radius {}",
                            c.len(),
                            ambient.name(),
                            self.delta
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest cluster diameter.
    pub fn max_diameter(&self, s: &PointSet) -> f64 {
        let mut best = 0.0f64;
        for c in &self.clusters {
            for (a, &i) in c.iter().enumerate() {
                for &j in &c[a + 1..] {
                    best = best.max(s.d(i, j));
                }
            }
        }
        best
    }

    /// Same clusters, reinterpreted under another bound.
    pub fn relabeled(&self, delta: f64, mode: BoundMode) -> Self {
        let mut p = self.clone();
        p.delta = delta;
        p.mode = mode;
        if !matches!(mode, BoundMode::RadiallyBounded(AmbientMode::ContinuousLp)) {
            p.centers = vec![None; p.clusters.len()];
        }
        p
    }

    /// Canonical JSON `{delta, mode, clusters}`.
    pub fn to_json(&self) -> String {
        json!({ "delta": self.delta, "mode": self.mode.name(), "clusters": self.clusters }).to_string()
    }
}

/// First pair of `c` at distance greater than `delta`, if any.
pub(crate) fn cluster_diameter_exceeds(c: &[usize], s: &PointSet, delta: f64) -> Option<(usize, usize, f64)> {
    for (a, &i) in c.iter().enumerate() {
        for &j in &c[a + 1..] {
            let d = s.d(i, j);
            if d > delta {
                return Some((i, j, d));
            }
        }
    }
    None
}

/// A ball center of radius at most `delta` containing the cluster `c`, if one
/// is found. Tries `hint`, then members of `c` (or of `s` for
/// [`AmbientMode::WithinSet`]), then a minimum enclosing ball.
pub fn radial_certificate(
    c: &[usize],
    s: &PointSet,
    delta: f64,
    ambient: AmbientMode,
    hint: Option<&[f64]>,
) -> Result<Option<Vec<f64>>> {
    if c.is_empty() {
        return domain("empty cluster");
    }
    let fits = |z: &[f64]| c.iter().all(|&i| s.dist_to(i, z) <= delta);
    match ambient {
        AmbientMode::WithinSet => {
            if fits(s.point(c[0])) {
                return Ok(Some(s.point(c[0]).to_vec()));
            }
            for z in 0..s.len() {
                if c.iter().all(|&i| s.d(z, i) <= delta) {
                    return Ok(Some(s.point(z).to_vec()));
                }
            }
            Ok(None)
        }
        AmbientMode::ContinuousLp => {
            if let Some(z) = hint {
                if fits(z) {
                    return Ok(Some(z.to_vec()));
                }
            }
            if c.len() == 1 {
                return Ok(Some(s.point(c[0]).to_vec()));
            }
            for &m in c.iter().take(64) {
                if fits(s.point(m)) {
                    return Ok(Some(s.point(m).to_vec()));
                }
            }
            let pts: Vec<&[f64]> = c.iter().map(|&i| s.point(i)).collect();
            let ball = min_enclosing_ball(&pts, s.space())?;
            // The ball's radius is the exact max distance from its center.
            Ok(if ball.radius <= delta { Some(ball.center) } else { None })
        }
    }
}

/// Descriptive metadata of a sampler.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerInfo {
    pub scheme: String,
    pub params: Vec<(String, f64)>,
}

impl SamplerInfo {
    pub fn new(scheme: &str) -> Self {
        Self { scheme: scheme.to_string(), params: Vec::new() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.push((key.to_string(), value));
        self
    }
}

/// A seedable random partition of a fixed point set. `sample(seed, index)`
/// is deterministic and every returned partition has passed validation.
pub trait PartitionSampler: Send + Sync {
    fn sample(&self, seed: u64, index: u64) -> Result<Partition>;
    fn delta(&self) -> f64;
    fn mode(&self) -> BoundMode;
    fn points(&self) -> &Arc<PointSet>;
    fn info(&self) -> SamplerInfo;
}

/// A sampler defined by a closure, validated on every draw.
pub struct FnSampler<F> {
    set: Arc<PointSet>,
    delta: f64,
    mode: BoundMode,
    name: String,
    f: F,
}

impl<F> FnSampler<F>
where
    F: Fn(u64, u64) -> Vec<Vec<usize>> + Send + Sync,
{
    pub fn new(set: Arc<PointSet>, delta: f64, mode: BoundMode, name: &str, f: F) -> Self {
        Self { set, delta, mode, name: name.to_string(), f }
    }
}

impl<F> PartitionSampler for FnSampler<F>
where
    F: Fn(u64, u64) -> Vec<Vec<usize>> + Send + Sync,
{
    fn sample(&self, seed: u64, index: u64) -> Result<Partition> {
        let p = Partition::new((self.f)(seed, index), self.delta, self.mode);
        p.validate(&self.set)?;
        Ok(p)
    }
    fn delta(&self) -> f64 {
        self.delta
    }
    fn mode(&self) -> BoundMode {
        self.mode
    }
    fn points(&self) -> &Arc<PointSet> {
        &self.set
    }
    fn info(&self) -> SamplerInfo {
        SamplerInfo::new(&self.name)
    }
}

/// Validates another sampler's draws under a different bound, e.g. a radial
/// `Δ` sampler read as diameter-`2Δ` bounded.
pub struct Reinterpreted<'a> {
    pub inner: &'a dyn PartitionSampler,
    pub delta: f64,
    pub mode: BoundMode,
}

impl PartitionSampler for Reinterpreted<'_> {
    fn sample(&self, seed: u64, index: u64) -> Result<Partition> {
        let p = self.inner.sample(seed, index)?.relabeled(self.delta, self.mode);
        p.validate(self.inner.points())?;
        Ok(p)
    }
    fn delta(&self) -> f64 {
        self.delta
    }
    fn mode(&self) -> BoundMode {
        self.mode
    }
    fn points(&self) -> &Arc<PointSet> {
        self.inner.points()
    }
    fn info(&self) -> SamplerInfo {
        self.inner.info()
    }
}

/// Extends a partition of `c` to the superset `s`: points within
/// `far_threshold` of `c` join the cluster of their nearest `c`-point (ties to
/// the lowest cluster index), farther points become singletons. The result is
/// diameter-bounded by `Δ + 2·far_threshold`.
pub fn extend_partition(p: &Partition, c: &PointSet, s: &PointSet, far_threshold: f64) -> Result<Partition> {
    if c.dim() != s.dim() || c.space() != s.space() {
        return Err(Error::Structural("subset and superset live in different spaces".into()));
    }
    p.check_cover(c.len())?;
    let mut by_bits: HashMap<Vec<u64>, usize> = HashMap::new();
    for i in 0..s.len() {
        by_bits.entry(s.point(i).iter().map(|v| v.to_bits()).collect()).or_insert(i);
    }
    let mut image = Vec::with_capacity(c.len());
    for i in 0..c.len() {
        let key: Vec<u64> = c.point(i).iter().map(|v| v.to_bits()).collect();
        match by_bits.get(&key) {
            Some(&j) => image.push(j),
            None => return Err(Error::Structural(format!("point {i} of the subset is not in the superset"))),
        }
    }
    let assign = p.assignment();
    let mut owner = vec![usize::MAX; s.len()];
    for (i, &j) in image.iter().enumerate() {
        owner[j] = assign[i] as usize;
    }
    let mut labels = vec![0usize; s.len()];
    let mut next = p.len();
    for j in 0..s.len() {
        if owner[j] != usize::MAX {
            labels[j] = owner[j];
            continue;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        for i in 0..c.len() {
            let d = s.space().dist(s.point(j), c.point(i));
            let k = assign[i] as usize;
            if d < best.0 || (d == best.0 && k < best.1) {
                best = (d, k);
            }
        }
        if best.0 <= far_threshold {
            labels[j] = best.1;
        } else {
            labels[j] = next;
            next += 1;
        }
    }
    let out = Partition::from_labels(&labels, p.delta + 2.0 * far_threshold, BoundMode::DiameterBounded);
    out.validate(s)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Space;

    fn line(n: usize) -> PointSet {
        PointSet::new(Space::uniform(2.0, 1).unwrap(), (0..n).map(|i| vec![i as f64]).collect(), None).unwrap()
    }

    #[test]
    fn canonical_order() {
        let p = Partition::new(vec![vec![3, 1], vec![2, 0]], 1.0, BoundMode::DiameterBounded);
        assert_eq!(p.clusters, vec![vec![0, 2], vec![1, 3]]);
        assert_eq!(p.assignment(), vec![0, 1, 0, 1]);
        let q = Partition::from_labels(&[7, 7, 2, 9], 1.0, BoundMode::DiameterBounded);
        assert_eq!(q.clusters, vec![vec![0, 1], vec![2], vec![3]]);
    }

    #[test]
    fn cover_errors() {
        let s = line(3);
        let gap = Partition::new(vec![vec![0], vec![2]], 5.0, BoundMode::DiameterBounded);
        assert!(matches!(gap.validate(&s), Err(Error::Structural(_))));
        let dup = Partition::new(vec![vec![0, 1], vec![1, 2]], 5.0, BoundMode::DiameterBounded);
        assert!(matches!(dup.validate(&s), Err(Error::Structural(_))));
    }

    #[test]
    fn bound_checks_are_exact() {
        let s = line(3);
        let p = Partition::whole(3, 2.0, BoundMode::DiameterBounded);
        assert!(p.validate(&s).is_ok());
        let tight = p.relabeled(2.0 - 1e-15, BoundMode::DiameterBounded);
        assert!(matches!(tight.validate(&s), Err(Error::Validation(_))));
        let radial = p.relabeled(1.0, BoundMode::RadiallyBounded(AmbientMode::WithinSet));
        assert!(radial.validate(&s).is_ok());
        let pair = PointSet::new(Space::uniform(2.0, 1).unwrap(), vec![vec![0.0], vec![1.0]], None).unwrap();
        let both = Partition::whole(2, 0.5, BoundMode::RadiallyBounded(AmbientMode::ContinuousLp));
        assert!(both.validate(&pair).is_ok());
        let within = both.relabeled(0.5, BoundMode::RadiallyBounded(AmbientMode::WithinSet));
        assert!(within.validate(&pair).is_err());
    }

    #[test]
    fn extension_cases() {
        let c = PointSet::new(Space::uniform(2.0, 1).unwrap(), vec![vec![0.0], vec![1.0]], None).unwrap();
        let p = Partition::singletons(2, 0.5, BoundMode::DiameterBounded);
        let same = extend_partition(&p, &c, &c, 0.1).unwrap();
        assert_eq!(same.clusters, p.clusters);
        let s = c.extended(&[0.4, 0.5, 0.6, 5.0], vec!["a".into(), "b".into(), "c".into(), "d".into()]).unwrap();
        let e = extend_partition(&p, &c, &s, 0.5).unwrap();
        let a = e.assignment();
        assert_eq!(a[2], a[0]);
        // Equidistant midpoint goes to the lower cluster index.
        assert_eq!(a[3], a[0]);
        assert_eq!(a[4], a[1]);
        assert_ne!(a[5], a[0]);
        assert_ne!(a[5], a[1]);
        let far = extend_partition(&p, &c, &s, 0.01).unwrap();
        assert_eq!(far.len(), 6);
        let other = PointSet::new(Space::uniform(2.0, 1).unwrap(), vec![vec![3.0]], None).unwrap();
        assert!(matches!(
            extend_partition(&Partition::singletons(1, 1.0, BoundMode::DiameterBounded), &other, &c, 1.0),
            Err(Error::Structural(_))
        ));
    }
}
