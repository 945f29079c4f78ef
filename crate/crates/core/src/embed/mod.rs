//! Euclidean embeddings of finite point sets.
//!
//! Every construction here evaluates its map on the whole domain at build
//! time and stores the images, so an [`EmbeddingMap`] is a finite table with
//! a declared Lipschitz witness. Images live in plain Euclidean space.

mod bourgain;
mod local;
mod truncation;

pub use bourgain::{bourgain_embed, bourgain_embed_with, growth_constant, GrowthFit, DEFAULT_BOURGAIN_TRIALS};
pub use local::{
    localized_map, localized_lower_constant, net_anchor_map, sep_ext_product_map, BourgainFactory, EuclideanInclusion,
    LocalizedMap, LocalizedParams, NetAnchorMap, SepExtMap, SubMapFactory,
};
pub use truncation::{exact_kernel_distance, truncation_map, TruncationMap, MIN_FEATURES};

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::metric::PointSet;
use crate::partition::Partition;

/// Relative slack when comparing an empirical Lipschitz constant against an
/// exact witness.
pub const LIPSCHITZ_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct EmbeddingMap {
    pub construction: String,
    /// Scale `Δ` for single-scale constructions.
    pub scale: Option<f64>,
    pub params: Vec<(String, f64)>,
    /// Upper bound on the Lipschitz constant.
    pub lipschitz_witness: f64,
    dim: usize,
    domain: Arc<PointSet>,
    images: Vec<f64>,
}

impl EmbeddingMap {
    /// `images` is row-major, one row of length `dim` per domain point.
    pub fn new(construction: &str, domain: Arc<PointSet>, dim: usize, images: Vec<f64>, lipschitz_witness: f64) -> Result<Self> {
        if images.len() != domain.len() * dim {
            return Err(Error::Structural(format!(
                "{} image coordinates for {} points of dimension {dim}",
                images.len(),
                domain.len()
            )));
        }
        if images.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical { msg: format!("{construction}: non-finite image coordinate"), achieved: f64::NAN });
        }
        Ok(Self { construction: construction.to_string(), scale: None, params: Vec::new(), lipschitz_witness, dim, domain, images })
    }

    pub fn with_scale(mut self, delta: f64) -> Self {
        self.scale = Some(delta);
        self
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.push((key.to_string(), value));
        self
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Arc<PointSet> {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f64] {
        &self.images[i * self.dim..(i + 1) * self.dim]
    }

    /// Image of a domain point given by its coordinates.
    pub fn evaluate(&self, x: &[f64]) -> Result<&[f64]> {
        (0..self.len())
            .find(|&i| self.domain.point(i).iter().zip(x).all(|(a, b)| a.to_bits() == b.to_bits()))
            .map(|i| self.image(i))
            .ok_or_else(|| Error::Domain("point is outside the domain of the map".into()))
    }

    /// `‖f(x_i) − f(x_j)‖`.
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        euclid(self.image(i), self.image(j))
    }

    /// Largest ratio `‖f(x)−f(y)‖/d(x,y)` over all pairs at positive distance.
    pub fn empirical_lipschitz(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.domain.d(i, j);
                if d > 0.0 {
                    best = best.max(self.dist(i, j) / d);
                }
            }
        }
        best
    }

    /// Fails when some pair exceeds the witness by more than `rel` relative.
    pub fn check_lipschitz(&self, rel: f64) -> Result<()> {
        let lip = self.empirical_lipschitz();
        if lip > self.lipschitz_witness * (1.0 + rel) {
            return Err(Error::Numerical {
                msg: format!("{}: empirical Lipschitz constant exceeds the witness {}", self.construction, self.lipschitz_witness),
                achieved: lip,
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Coordinates `√w ⊙ x`, isometric for a weighted `ℓ_2` space.
pub(crate) fn euclidean_coords(s: &PointSet, i: usize) -> Vec<f64> {
    s.point(i).iter().zip(&s.space().weights).map(|(v, w)| v * w.sqrt()).collect()
}

/// The raw coordinates of each point, read as a vector of plain `ℓ_2`.
pub fn identity_embedding(s: Arc<PointSet>) -> Result<EmbeddingMap> {
    let dim = s.dim();
    let images = s.coords().to_vec();
    let mut map = EmbeddingMap::new("identity", s, dim, images, f64::INFINITY)?;
    map.lipschitz_witness = map.empirical_lipschitz();
    Ok(map)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistortionReport {
    pub construction: String,
    pub n: usize,
    pub p: f64,
    pub lip: f64,
    pub colip: f64,
    /// `lip / colip`; infinite for degenerate maps.
    pub distortion: f64,
    pub window: Option<(f64, f64)>,
    pub lip_pair: Option<(usize, usize)>,
    pub colip_pair: Option<(usize, usize)>,
    /// Some pair at positive distance collapsed to a point.
    pub degenerate: bool,
    pub pairs: usize,
}

impl DistortionReport {
    pub const CSV_HEADER: &'static str = "construction,n,p,lip,colip,distortion,window_lo,window_hi";

    pub fn csv_row(&self) -> String {
        let (lo, hi) = match self.window {
            Some((a, b)) => (a.to_string(), b.to_string()),
            None => (String::new(), String::new()),
        };
        format!("{},{},{},{},{},{},{},{}", self.construction, self.n, self.p, self.lip, self.colip, self.distortion, lo, hi)
    }

    pub fn write_csv(reports: &[DistortionReport], out: &mut dyn Write) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in reports {
            writeln!(out, "{}", r.csv_row())?;
        }
        Ok(())
    }
}

/// Exact extreme pair ratios, over all pairs or over pairs with
/// `lo ≤ d(x,y) ≤ hi`.
pub fn distortion_report(map: &EmbeddingMap, window: Option<(f64, f64)>) -> Result<DistortionReport> {
    if let Some((lo, hi)) = window {
        if !(lo >= 0.0) || !(hi >= lo) {
            return domain(format!("invalid scale window [{lo}, {hi}]"));
        }
    }
    let s = map.domain();
    let n = s.len();
    let mut lip = (0.0f64, None);
    let mut colip = (f64::INFINITY, None);
    let mut pairs = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = s.d(i, j);
            if d <= 0.0 {
                continue;
            }
            if let Some((lo, hi)) = window {
                if d < lo || d > hi {
                    continue;
                }
            }
            pairs += 1;
            let r = map.dist(i, j) / d;
            if r > lip.0 || lip.1.is_none() {
                lip = (r, Some((i, j)));
            }
            if r < colip.0 {
                colip = (r, Some((i, j)));
            }
        }
    }
    let degenerate = pairs > 0 && colip.0 == 0.0;
    let (colip_v, distortion) = if pairs == 0 {
        (0.0, 1.0)
    } else if degenerate {
        (0.0, f64::INFINITY)
    } else {
        (colip.0, lip.0 / colip.0)
    };
    Ok(DistortionReport {
        construction: map.construction.clone(),
        n,
        p: s.p(),
        lip: lip.0,
        colip: colip_v,
        distortion,
        window,
        lip_pair: lip.1,
        colip_pair: colip.1,
        degenerate,
        pairs,
    })
}

/// The vector `ψ(a)`: block `t` is `amplitude/√T` times the indicator of
/// `a`'s cluster in partition `t`.
pub fn partition_feature_map(a: usize, partitions: &[Partition], amplitude: f64) -> Vec<f64> {
    let t = partitions.len().max(1) as f64;
    let c = amplitude / t.sqrt();
    let mut out = Vec::with_capacity(partitions.iter().map(|p| p.len()).sum());
    for p in partitions {
        let k = p.clusters.iter().position(|cl| cl.binary_search(&a).is_ok());
        let start = out.len();
        out.resize(start + p.len(), 0.0);
        if let Some(k) = k {
            out[start + k] = c;
        }
    }
    out
}

/// `ψ` on every point of `s`. The witness is the exact Lipschitz constant of
/// the finite table.
pub fn partition_feature_embedding(s: Arc<PointSet>, partitions: &[Partition], amplitude: f64) -> Result<EmbeddingMap> {
    for p in partitions {
        p.check_cover(s.len())?;
    }
    let dim: usize = partitions.iter().map(|p| p.len()).sum();
    let mut images = Vec::with_capacity(s.len() * dim);
    for a in 0..s.len() {
        images.extend(partition_feature_map(a, partitions, amplitude));
    }
    let mut map = EmbeddingMap::new("partition-features", s, dim, images, f64::INFINITY)?
        .with_param("amplitude", amplitude)
        .with_param("trials", partitions.len() as f64);
    map.lipschitz_witness = map.empirical_lipschitz();
    Ok(map)
}

/// Weighted block direct sum of maps over a common domain.
pub fn combine_scales(maps: &[&EmbeddingMap], weights: &[f64]) -> Result<EmbeddingMap> {
    if maps.is_empty() || maps.len() != weights.len() {
        return domain("need one weight per map and at least one map");
    }
    let base = maps[0].domain();
    for m in maps {
        let same = Arc::ptr_eq(m.domain(), base) || (m.len() == base.len() && m.domain().coords() == base.coords());
        if !same {
            return Err(Error::Structural("maps are defined on different domains".into()));
        }
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return domain("weights must be finite");
    }
    let dim: usize = maps.iter().map(|m| m.dim()).sum();
    let n = base.len();
    let mut images = Vec::with_capacity(n * dim);
    for i in 0..n {
        for (m, w) in maps.iter().zip(weights) {
            images.extend(m.image(i).iter().map(|v| w * v));
        }
    }
    let witness = maps.iter().zip(weights).map(|(m, w)| (w * m.lipschitz_witness).powi(2)).sum::<f64>().sqrt();
    let mut out = EmbeddingMap::new("combined", base.clone(), dim, images, witness)?.with_param("blocks", maps.len() as f64);
    if maps.len() == 1 {
        out.construction = maps[0].construction.clone();
        out.scale = maps[0].scale;
    }
    Ok(out)
}

/// Scale indices of a pair: `i = ⌊log₂ d⌋` (`None` for `x = y`) and the
/// critical growth index `𝓀`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScaleIndex {
    pub i: Option<i32>,
    pub k: usize,
}

/// Radii `r_i^k = 2^i / (27 d̂^k)` and `R_i = 3 C ln(n) 2^i` indexed by the
/// hereditary single-scale distortions `d̂^k`, `k = 1..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthLadder {
    /// `dhat[k-1] = d̂^k`, nondecreasing and at least 1.
    pub dhat: Vec<f64>,
    pub c: f64,
    /// Growth threshold multiplier: membership asks for ratio `≤ slack·ℓ`.
    pub slack: f64,
}

impl GrowthLadder {
    pub fn new(dhat: Vec<f64>, c: f64) -> Result<Self> {
        if dhat.is_empty() {
            return domain("empty distortion profile");
        }
        if dhat.iter().any(|d| !(*d >= 1.0)) || dhat.windows(2).any(|w| w[1] < w[0]) {
            return domain("distortion profile must be nondecreasing and at least 1");
        }
        if !(c >= 1.0) {
            return domain(format!("constant C = {c} must be at least 1"));
        }
        Ok(Self { dhat, c, slack: 1.0 })
    }

    /// Profile `d̂^k = max(1, √ln k)`.
    pub fn sqrt_log(n: usize, c: f64) -> Result<Self> {
        Self::new((1..=n).map(|k| (k as f64).ln().sqrt().max(1.0)).collect(), c)
    }

    pub fn with_slack(mut self, slack: f64) -> Self {
        self.slack = slack;
        self
    }

    pub fn n(&self) -> usize {
        self.dhat.len()
    }

    pub fn r(&self, i: i32, k: usize) -> f64 {
        2f64.powi(i) / (27.0 * self.dhat[k - 1])
    }

    pub fn big_r(&self, i: i32) -> f64 {
        3.0 * self.c * (self.n().max(2) as f64).ln() * 2f64.powi(i)
    }
}

pub fn scale_indices(s: &PointSet, x: usize, y: usize, ladder: &GrowthLadder) -> Result<ScaleIndex> {
    let n = s.len();
    if ladder.n() != n {
        return Err(Error::Structural(format!("ladder has {} levels for {n} points", ladder.n())));
    }
    if !(ladder.slack >= 1.0) {
        return domain("growth slack must be at least 1");
    }
    let d = s.d(x, y);
    if d == 0.0 {
        return Ok(ScaleIndex { i: None, k: 1 });
    }
    let i = d.log2().floor() as i32;
    let i = if 2f64.powi(i + 1) <= d { i + 1 } else if 2f64.powi(i) > d { i - 1 } else { i };
    let count = |r: f64| (0..n).filter(|&z| s.d(x, z) <= r).count();
    let big = count(ladder.big_r(i)) as f64;
    let mut cache: HashMap<u64, usize> = HashMap::new();
    let mut member = |l: usize| {
        let r = ladder.r(i, l);
        let small = *cache.entry(r.to_bits()).or_insert_with(|| count(r)) as f64;
        big / small <= ladder.slack * l as f64
    };
    let mut k = n;
    while k > 1 && member(k - 1) {
        k -= 1;
    }
    Ok(ScaleIndex { i: Some(i), k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Space;

    fn set(p: f64, rows: Vec<Vec<f64>>, unit: bool) -> Arc<PointSet> {
        let m = rows[0].len();
        let space = if unit { Space::new(p, vec![1.0; m]).unwrap() } else { Space::uniform(p, m).unwrap() };
        Arc::new(PointSet::new(space, rows, None).unwrap())
    }

    fn hypercube(k: usize, p: f64) -> Arc<PointSet> {
        let rows = (0..1usize << k).map(|b| (0..k).map(|j| ((b >> j) & 1) as f64).collect()).collect();
        set(p, rows, true)
    }

    #[test]
    fn hypercube_distortion() {
        for (k, p) in [(4usize, 1.0f64), (3, 1.5), (5, 1.25)] {
            let map = identity_embedding(hypercube(k, p)).unwrap();
            let r = distortion_report(&map, None).unwrap();
            let want = (k as f64).powf(1.0 / p - 0.5);
            assert!((r.distortion - want).abs() < 1e-12 * want, "k={k} p={p}: {} vs {want}", r.distortion);
        }
        let one = identity_embedding(hypercube(1, 1.0)).unwrap();
        assert_eq!(distortion_report(&one, None).unwrap().distortion, 1.0);
    }

    #[test]
    fn identity_and_constant_maps() {
        let s = set(2.0, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.3, 2.0]], true);
        let id = identity_embedding(s.clone()).unwrap();
        let r = distortion_report(&id, None).unwrap();
        assert!((r.distortion - 1.0).abs() < 1e-15);
        assert!(!r.degenerate);
        let constant = EmbeddingMap::new("constant", s, 1, vec![1.0; 3], 0.0).unwrap();
        let r = distortion_report(&constant, None).unwrap();
        assert!(r.degenerate);
        assert!(r.distortion.is_infinite());
        let w = distortion_report(&id, Some((1.5, 1.9))).unwrap();
        assert_eq!(w.pairs, 0);
    }

    #[test]
    fn evaluate_finds_domain_points() {
        let s = set(2.0, vec![vec![0.0], vec![2.0]], false);
        let id = identity_embedding(s).unwrap();
        assert_eq!(id.evaluate(&[2.0]).unwrap(), &[2.0]);
        assert!(id.evaluate(&[1.0]).is_err());
    }

    #[test]
    fn feature_distance_identity() {
        let s = set(2.0, (0..6).map(|i| vec![i as f64]).collect(), false);
        let parts = vec![
            Partition::new(vec![vec![0, 1, 2], vec![3, 4, 5]], 3.0, crate::partition::BoundMode::DiameterBounded),
            Partition::new(vec![vec![0, 1], vec![2, 3], vec![4, 5]], 3.0, crate::partition::BoundMode::DiameterBounded),
            Partition::new(vec![vec![0], vec![1, 2, 3, 4, 5]], 3.0, crate::partition::BoundMode::DiameterBounded),
        ];
        let amp = 0.7;
        let map = partition_feature_embedding(s.clone(), &parts, amp).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let sep = parts.iter().filter(|p| p.separates(i, j)).count() as f64;
                let d2 = map.dist(i, j).powi(2);
                assert!((d2 / (2.0 * amp * amp) - sep / 3.0).abs() < 1e-14);
            }
        }
        // Always co-clustered and always separated pairs.
        assert_eq!(map.dist(4, 5), 0.0);
        let apart = [parts[0].clone(), parts[0].clone()];
        let m2 = partition_feature_embedding(s, &apart, amp).unwrap();
        assert!((m2.dist(0, 5) - amp * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn combining_copies() {
        let s = set(2.0, vec![vec![0.0, 1.0], vec![1.0, 0.5], vec![2.0, -1.0]], true);
        let id = identity_embedding(s).unwrap();
        let same = combine_scales(&[&id], &[1.0]).unwrap();
        for i in 0..3 {
            assert_eq!(same.image(i), id.image(i));
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let two = combine_scales(&[&id, &id], &[h, h]).unwrap();
        let r = distortion_report(&two, None).unwrap();
        assert!((r.lip - 1.0).abs() < 1e-12 && (r.colip - 1.0).abs() < 1e-12);
        assert!((two.lipschitz_witness - 1.0).abs() < 1e-12);
        assert!(combine_scales(&[&id], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn equilateral_growth_index() {
        // Simplex vertices e_i/√2 are pairwise at distance 1.
        let n = 6;
        let rows = (0..n).map(|i| (0..n).map(|j| if i == j { 0.5f64.sqrt() } else { 0.0 }).collect()).collect();
        let s = set(2.0, rows, true);
        let ladder = GrowthLadder::sqrt_log(n, 1.0).unwrap();
        let idx = scale_indices(&s, 0, 1, &ladder).unwrap();
        assert_eq!(idx.i, Some(0));
        // |B(x,R)| = n and |B(x,r)| = 1 for every level, so only ℓ = n qualifies.
        assert_eq!(idx.k, n);
        assert_eq!(scale_indices(&s, 2, 2, &ladder).unwrap(), ScaleIndex { i: None, k: 1 });
        let loose = scale_indices(&s, 0, 1, &ladder.clone().with_slack(n as f64)).unwrap();
        assert_eq!(loose.k, 1);
    }
}
