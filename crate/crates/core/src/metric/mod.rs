//! Finite subsets of weighted `ℓ_p` and the metric primitives built on them:
//! distances, diameter and circumradius, neighborhoods, nets, growth-center
//! sets and doubling estimates.

mod index;
mod meb;
mod space;

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

pub use index::SweepIndex;
pub use meb::{min_enclosing_ball, Ball};
pub use space::Space;

use crate::error::{domain, Error, Result};
use crate::rng::Rng;

/// A point of a discretized `L_p(μ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedVector {
    pub coords: Vec<f64>,
    pub weights: Vec<f64>,
    pub p: f64,
}

impl WeightedVector {
    pub fn new(coords: Vec<f64>, weights: Vec<f64>, p: f64) -> Result<Self> {
        if coords.len() != weights.len() {
            return Err(Error::Structural(format!(
                "{} coordinates but {} weights",
                coords.len(),
                weights.len()
            )));
        }
        Space::new(p, weights.clone())?;
        if coords.iter().any(|c| !c.is_finite()) {
            return domain("coordinates must be finite");
        }
        Ok(Self { coords, weights, p })
    }

    /// Uniform weights `1/m`.
    pub fn uniform(coords: Vec<f64>, p: f64) -> Result<Self> {
        let m = coords.len();
        if m == 0 {
            return domain("empty coordinate vector");
        }
        Self::new(coords, vec![1.0 / m as f64; m], p)
    }

    pub fn space(&self) -> Space {
        Space::new(self.p, self.weights.clone()).expect("validated at construction")
    }

    pub fn norm(&self) -> f64 {
        self.space().norm(&self.coords)
    }

    pub fn dist(&self, other: &WeightedVector) -> Result<f64> {
        if self.p != other.p || self.weights != other.weights {
            return Err(Error::Structural("points live in different spaces".into()));
        }
        Ok(self.space().dist(&self.coords, &other.coords))
    }
}

/// How cluster radii are measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AmbientMode {
    /// Centers restricted to the points of the set.
    WithinSet,
    /// Centers anywhere in the coordinate space.
    ContinuousLp,
}

impl AmbientMode {
    pub fn name(self) -> &'static str {
        match self {
            AmbientMode::WithinSet => "within_set",
            AmbientMode::ContinuousLp => "continuous_lp",
        }
    }
}

/// A finite labeled point set in a shared weighted `ℓ_p` space.
#[derive(Clone, Debug)]
pub struct PointSet {
    space: Arc<Space>,
    coords: Vec<f64>,
    labels: Vec<String>,
    dist: OnceLock<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PointSetJson {
    p: f64,
    dim: usize,
    weights: Vec<f64>,
    points: Vec<Vec<f64>>,
    labels: Vec<String>,
}

impl PointSet {
    /// Builds a set from rows; labels default to the row index.
    pub fn new(space: Space, rows: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> Result<Self> {
        let dim = space.dim();
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Structural(format!(
                    "point {i} has dimension {} but the space has {dim}",
                    r.len()
                )));
            }
            coords.extend_from_slice(r);
        }
        Self::from_flat(Arc::new(space), coords, labels)
    }

    pub fn from_flat(space: Arc<Space>, coords: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        let dim = space.dim();
        if coords.len() % dim != 0 {
            return Err(Error::Structural("coordinate buffer is not a whole number of rows".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return domain("coordinates must be finite");
        }
        let n = coords.len() / dim;
        let labels = labels.unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
        if labels.len() != n {
            return Err(Error::Structural(format!("{} labels for {n} points", labels.len())));
        }
        Ok(Self { space, coords, labels, dist: OnceLock::new() })
    }

    /// Builds a set from vectors that must share `p`, weights and dimension.
    pub fn from_vectors(points: &[WeightedVector], labels: Option<Vec<String>>) -> Result<Self> {
        let first = points.first().ok_or_else(|| Error::Domain("no points".into()))?;
        for (i, v) in points.iter().enumerate() {
            if v.p != first.p || v.weights != first.weights {
                return Err(Error::Structural(format!("point {i} is in a different space")));
            }
        }
        let rows = points.iter().map(|v| v.coords.clone()).collect();
        Self::new(first.space(), rows, labels)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn p(&self) -> f64 {
        self.space.p
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn space_arc(&self) -> Arc<Space> {
        self.space.clone()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let m = self.dim();
        &self.coords[i * m..(i + 1) * m]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vector(&self, i: usize) -> WeightedVector {
        WeightedVector { coords: self.point(i).to_vec(), weights: self.space.weights.clone(), p: self.p() }
    }

    /// `d(i, j)`, from the cached matrix when it has been built.
    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        match self.dist.get() {
            Some(mat) => mat[i * self.len() + j],
            None => self.space.dist(self.point(i), self.point(j)),
        }
    }

    pub fn dist_to(&self, i: usize, x: &[f64]) -> f64 {
        self.space.dist(self.point(i), x)
    }

    /// Row-major `n × n` distance matrix, computed once.
    pub fn matrix(&self) -> &[f64] {
        self.dist.get_or_init(|| {
            let n = self.len();
            let mut mat = vec![0.0; n * n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = self.space.dist(self.point(i), self.point(j));
                    mat[i * n + j] = d;
                    mat[j * n + i] = d;
                }
            }
            mat
        })
    }

    pub fn has_matrix(&self) -> bool {
        self.dist.get().is_some()
    }

    /// Sub-set on the given rows, in the given order.
    pub fn subset(&self, idx: &[usize]) -> PointSet {
        let mut coords = Vec::with_capacity(idx.len() * self.dim());
        for &i in idx {
            coords.extend_from_slice(self.point(i));
        }
        let labels = idx.iter().map(|&i| self.labels[i].clone()).collect();
        PointSet { space: self.space.clone(), coords, labels, dist: OnceLock::new() }
    }

    /// This set followed by extra rows.
    pub fn extended(&self, extra: &[f64], labels: Vec<String>) -> Result<PointSet> {
        let mut coords = self.coords.clone();
        coords.extend_from_slice(extra);
        let mut all = self.labels.clone();
        all.extend(labels);
        PointSet::from_flat(self.space.clone(), coords, Some(all))
    }

    pub fn to_json(&self) -> String {
        let doc = PointSetJson {
            p: self.p(),
            dim: self.dim(),
            weights: self.space.weights.clone(),
            points: (0..self.len()).map(|i| self.point(i).to_vec()).collect(),
            labels: self.labels.clone(),
        };
        serde_json::to_string(&doc).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PointSetJson = serde_json::from_str(text)?;
        if doc.weights.len() != doc.dim {
            return Err(Error::Structural("weights length differs from dim".into()));
        }
        Self::new(Space::new(doc.p, doc.weights)?, doc.points, Some(doc.labels))
    }

    /// Reads `label,c0,c1,...` rows; weights are uniform.
    pub fn from_csv(text: &str, p: f64) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.get(0) != Some("label") || header.len() < 2 {
            return Err(Error::Parse("expected header label,c0,c1,...".into()));
        }
        let dim = header.len() - 1;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            labels.push(rec.get(0).unwrap_or("").to_string());
            let row = rec
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::new(Space::uniform(p, dim)?, rows, Some(labels))
    }
}

/// Full distance matrix (row-major).
pub fn distance_matrix(s: &PointSet) -> Vec<f64> {
    s.matrix().to_vec()
}

pub fn diameter(c: &[usize], s: &PointSet) -> Result<f64> {
    if c.is_empty() {
        return domain("diameter of an empty set");
    }
    let mut best = 0.0f64;
    for (a, &i) in c.iter().enumerate() {
        for &j in &c[a + 1..] {
            best = best.max(s.d(i, j));
        }
    }
    Ok(best)
}

/// Circumradius value together with a center achieving it.
#[derive(Clone, Debug)]
pub struct RadiusWitness {
    pub radius: f64,
    pub center: Vec<f64>,
    /// Index of the center when it is a point of the set.
    pub center_index: Option<usize>,
    pub gap: f64,
}

pub fn radius(c: &[usize], s: &PointSet, ambient: AmbientMode) -> Result<f64> {
    radius_witness(c, s, ambient).map(|w| w.radius)
}

pub fn radius_witness(c: &[usize], s: &PointSet, ambient: AmbientMode) -> Result<RadiusWitness> {
    if c.is_empty() {
        return domain("radius of an empty set");
    }
    match ambient {
        AmbientMode::WithinSet => {
            let mut best = (usize::MAX, f64::INFINITY);
            for z in 0..s.len() {
                let mut worst = 0.0f64;
                for &i in c {
                    worst = worst.max(s.d(z, i));
                    if worst >= best.1 {
                        break;
                    }
                }
                if worst < best.1 {
                    best = (z, worst);
                }
            }
            Ok(RadiusWitness {
                radius: best.1,
                center: s.point(best.0).to_vec(),
                center_index: Some(best.0),
                gap: 0.0,
            })
        }
        AmbientMode::ContinuousLp => {
            let pts: Vec<&[f64]> = c.iter().map(|&i| s.point(i)).collect();
            let ball = min_enclosing_ball(&pts, s.space())?;
            Ok(RadiusWitness { radius: ball.radius, center: ball.center, center_index: None, gap: ball.gap })
        }
    }
}

/// Max distance from `center` to the rows `c`.
pub fn enclosing_radius(c: &[usize], s: &PointSet, center: &[f64]) -> f64 {
    c.iter().map(|&i| s.dist_to(i, center)).fold(0.0, f64::max)
}

/// Uniform direction on the unit sphere of the weighted `ℓ_p` norm.
pub fn sphere_direction(space: &Space, rng: &mut Rng) -> Vec<f64> {
    let p = space.p;
    let gamma = Gamma::new(1.0 / p, 1.0).expect("valid shape");
    loop {
        let g: Vec<f64> = (0..space.dim())
            .map(|k| {
                let mag = gamma.sample(rng).powf(1.0 / p);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * mag * space.weights[k].powf(-1.0 / p)
            })
            .collect();
        let n = space.norm(&g);
        if n > 0.0 && n.is_finite() {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

/// Appends `count` points `x + ρu` with `x` drawn from `c`, `ρ ~ U[0, r]` and
/// `u` uniform on the unit sphere. Every added point is within `r` of its
/// parent. Returns the augmented set and the parent of each added point.
pub fn neighborhood_sample(
    s: &PointSet,
    c: &[usize],
    r: f64,
    count: usize,
    rng: &mut Rng,
) -> Result<(PointSet, Vec<usize>)> {
    if !(r >= 0.0) {
        return domain(format!("neighborhood radius {r} is negative"));
    }
    if c.is_empty() && count > 0 {
        return domain("cannot sample around an empty set");
    }
    let m = s.dim();
    let mut extra = Vec::with_capacity(count * m);
    let mut parents = Vec::with_capacity(count);
    for _ in 0..count {
        let x = c[rng.random_range(0..c.len())];
        let u = sphere_direction(s.space(), rng);
        let mut rho = r * rng.random::<f64>();
        let base = s.point(x);
        let point = loop {
            let y: Vec<f64> = base.iter().zip(&u).map(|(b, v)| b + rho * v).collect();
            if s.space().dist(&y, base) <= r {
                break y;
            }
            rho *= 1.0 - 1e-12;
        };
        assert!(s.space().dist(&point, base) <= r, "neighborhood point escaped its ball");
        extra.extend_from_slice(&point);
        parents.push(x);
    }
    let labels = (0..count).map(|k| format!("nbr{k}")).collect();
    Ok((s.extended(&extra, labels)?, parents))
}

/// Greedy net in index order: strictly `r`-separated and `r`-dense.
pub fn greedy_net(s: &PointSet, r: f64) -> Result<Vec<usize>> {
    let all: Vec<usize> = (0..s.len()).collect();
    greedy_net_of(s, &all, r)
}

/// Greedy net of the rows `ids`, scanned in the given order.
pub fn greedy_net_of(s: &PointSet, ids: &[usize], r: f64) -> Result<Vec<usize>> {
    if !(r > 0.0) {
        return domain(format!("net radius {r} must be positive"));
    }
    if ids.is_empty() {
        return domain("net of an empty set");
    }
    Ok(greedy_net_raw(s.coords(), s.dim(), s.space(), ids, r))
}

pub(crate) fn greedy_net_raw(coords: &[f64], dim: usize, space: &Space, ids: &[usize], r: f64) -> Vec<usize> {
    let index = SweepIndex::new(coords, dim, space, ids);
    let mut covered: HashMap<usize, ()> = HashMap::with_capacity(ids.len());
    let mut net = Vec::new();
    for &i in ids {
        if covered.contains_key(&i) {
            continue;
        }
        net.push(i);
        index.for_each_within(&coords[i * dim..(i + 1) * dim], r, |j, _| {
            covered.insert(j, ());
        });
    }
    net
}

/// Controlled local growth centers `{x : |B(x,R)| / |B(x,r)| <= K}`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthCenterSet {
    pub indices: Vec<usize>,
    pub r: f64,
    pub big_r: f64,
    pub k: f64,
}

/// Closed-ball counts `|B(x, r)|` for every point.
pub fn ball_counts(s: &PointSet, r: f64) -> Vec<usize> {
    let n = s.len();
    (0..n).map(|x| (0..n).filter(|&y| s.d(x, y) <= r).count()).collect()
}

pub fn growth_centers(s: &PointSet, r: f64, big_r: f64, k: f64) -> Result<GrowthCenterSet> {
    if !(r >= 0.0) || r > big_r {
        return domain(format!("need 0 <= r <= R, got r = {r}, R = {big_r}"));
    }
    if !(k >= 1.0) {
        return domain(format!("growth bound K = {k} must be >= 1"));
    }
    s.matrix();
    let small = ball_counts(s, r);
    let large = ball_counts(s, big_r);
    let indices =
        (0..s.len()).filter(|&x| large[x] as f64 / small[x] as f64 <= k).collect();
    Ok(GrowthCenterSet { indices, r, big_r, k })
}

/// Upper estimate of the doubling constant: the largest greedy cover of a
/// ball `B(x, 2r)` by balls of radius `r` centered in the set, over sampled
/// centers `x` and radii `r`.
pub fn doubling_estimate(s: &PointSet) -> f64 {
    let n = s.len();
    if n <= 1 {
        return 1.0;
    }
    s.matrix();
    let stride = (n / 64).max(1);
    let mut best = 1usize;
    for x in (0..n).step_by(stride) {
        let mut radii: Vec<f64> = (0..n).filter(|&y| y != x).map(|y| 0.5 * s.d(x, y)).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        let picks = radii.len().min(32);
        for q in 0..picks {
            let r = radii[q * radii.len() / picks];
            if r <= 0.0 {
                continue;
            }
            let ball: Vec<usize> = (0..n).filter(|&y| s.d(x, y) <= 2.0 * r).collect();
            let mut uncovered = ball.clone();
            let mut count = 0;
            while let Some(&c) = uncovered.first() {
                count += 1;
                uncovered.retain(|&y| s.d(c, y) > r);
            }
            best = best.max(count);
        }
    }
    best as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    fn random_set(n: usize, m: usize, p: f64, seed: u64) -> PointSet {
        let mut rng = from_seed(seed);
        let rows = (0..n).map(|_| (0..m).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
        PointSet::new(Space::uniform(p, m).unwrap(), rows, None).unwrap()
    }

    fn line(n: usize) -> PointSet {
        let rows = (0..n).map(|i| vec![i as f64]).collect();
        PointSet::new(Space::uniform(2.0, 1).unwrap(), rows, None).unwrap()
    }

    #[test]
    fn identical_points_have_zero_distance() {
        let s = PointSet::new(Space::uniform(3.0, 2).unwrap(), vec![vec![1.0, 2.0], vec![1.0, 2.0]], None).unwrap();
        assert_eq!(s.d(0, 1), 0.0);
    }

    #[test]
    fn unit_vector_distance_uses_weights() {
        let m = 5;
        let mut e1 = vec![0.0; m];
        e1[0] = 1.0;
        let s = PointSet::new(Space::uniform(2.0, m).unwrap(), vec![vec![0.0; m], e1], None).unwrap();
        assert!((s.d(0, 1) - (m as f64).powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn matrix_matches_scalar_loop() {
        let s = random_set(3, 6, 3.0, 1);
        let mat = distance_matrix(&s);
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..6 {
                    let d: f64 = s.point(i)[k] - s.point(j)[k];
                    acc += (1.0 / 6.0) * d.abs().powf(3.0);
                }
                assert!((mat[i * 3 + j] - acc.powf(1.0 / 3.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mismatched_vectors_are_structural_errors() {
        let a = WeightedVector::uniform(vec![0.0, 1.0], 2.0).unwrap();
        let b = WeightedVector::uniform(vec![0.0, 1.0, 2.0], 2.0).unwrap();
        assert!(matches!(PointSet::from_vectors(&[a.clone(), b], None), Err(Error::Structural(_))));
        let c = WeightedVector::uniform(vec![0.0, 1.0], 3.0).unwrap();
        assert!(matches!(a.dist(&c), Err(Error::Structural(_))));
    }

    #[test]
    fn diameter_examples() {
        let s = random_set(5, 3, 2.0, 2);
        assert_eq!(diameter(&[3], &s).unwrap(), 0.0);
        let all: Vec<usize> = (0..5).collect();
        let mut scan = 0.0f64;
        for i in 0..5 {
            for j in 0..5 {
                scan = scan.max(s.d(i, j));
            }
        }
        assert_eq!(diameter(&all, &s).unwrap(), scan);
        assert!(matches!(diameter(&[], &s), Err(Error::Domain(_))));
        let two = line(2);
        assert_eq!(diameter(&[0, 1], &two).unwrap(), 1.0);
    }

    #[test]
    fn radius_examples() {
        let two = line(2);
        assert_eq!(radius(&[0], &two, AmbientMode::ContinuousLp).unwrap(), 0.0);
        assert_eq!(radius(&[0, 1], &two, AmbientMode::ContinuousLp).unwrap(), 0.5);
        assert_eq!(radius(&[0, 1], &two, AmbientMode::WithinSet).unwrap(), 1.0);
        for p in [1.0, 2.5, 4.0] {
            let s = PointSet::new(Space::uniform(p, 3).unwrap(), vec![vec![0.0, 1.0, 2.0], vec![3.0, -1.0, 0.5]], None)
                .unwrap();
            let r = radius(&[0, 1], &s, AmbientMode::ContinuousLp).unwrap();
            assert!((r - 0.5 * s.d(0, 1)).abs() < 1e-15);
        }
        assert!(matches!(radius(&[], &two, AmbientMode::WithinSet), Err(Error::Domain(_))));
    }

    #[test]
    fn euclidean_circumradius_of_triangle() {
        // Equilateral triangle with side 1 in the plane (unit weights): R = 1/sqrt(3).
        let h = 3f64.sqrt() / 2.0;
        let s = PointSet::new(Space::new(2.0, vec![1.0, 1.0]).unwrap(), vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]], None)
            .unwrap();
        let r = radius(&[0, 1, 2], &s, AmbientMode::ContinuousLp).unwrap();
        assert!((r - 1.0 / 3f64.sqrt()).abs() < 1e-9, "{r}");
        // Obtuse triangle: the longest side is a diameter.
        let s = PointSet::new(Space::new(2.0, vec![1.0, 1.0]).unwrap(), vec![vec![0.0, 0.0], vec![4.0, 0.0], vec![2.0, 0.5]], None)
            .unwrap();
        let r = radius(&[0, 1, 2], &s, AmbientMode::ContinuousLp).unwrap();
        assert!((r - 2.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn neighborhood_points_stay_within_radius() {
        let s = random_set(10, 4, 3.0, 3);
        let idx: Vec<usize> = (0..10).collect();
        let mut rng = from_seed(9);
        let (aug, parents) = neighborhood_sample(&s, &idx, 0.3, 100, &mut rng).unwrap();
        assert_eq!(aug.len(), 110);
        for (k, &par) in parents.iter().enumerate() {
            let y = aug.point(10 + k);
            let nearest = (0..10).map(|i| s.dist_to(i, y)).fold(f64::INFINITY, f64::min);
            assert!(nearest <= 0.3 && s.dist_to(par, y) <= 0.3);
        }
        let (zero, _) = neighborhood_sample(&s, &idx, 0.0, 5, &mut rng).unwrap();
        for k in 0..5 {
            assert!((0..10).any(|i| s.point(i) == zero.point(10 + k)));
        }
        assert!(matches!(neighborhood_sample(&s, &idx, -1.0, 1, &mut rng), Err(Error::Domain(_))));
    }

    #[test]
    fn sphere_directions_have_unit_norm() {
        let space = Space::new(4.0, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut rng = from_seed(5);
        for _ in 0..50 {
            let u = sphere_direction(&space, &mut rng);
            assert!((space.norm(&u) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_net_examples() {
        let s = line(20);
        assert_eq!(greedy_net(&s, 100.0).unwrap(), vec![0]);
        assert_eq!(greedy_net(&s, 0.5).unwrap().len(), 20);
        let net = greedy_net(&s, 2.5).unwrap();
        assert_eq!(net, vec![0, 3, 6, 9, 12, 15, 18]);
        for (a, &i) in net.iter().enumerate() {
            for &j in &net[a + 1..] {
                assert!(s.d(i, j) > 2.5);
            }
        }
        for x in 0..20 {
            assert!(net.iter().any(|&a| s.d(x, a) <= 2.5));
        }
    }

    #[test]
    fn growth_center_examples() {
        let s = line(21);
        let all = growth_centers(&s, 1.0, 3.0, 21.0).unwrap();
        assert_eq!(all.indices.len(), 21);
        let same = growth_centers(&s, 2.0, 2.0, 1.0).unwrap();
        assert_eq!(same.indices.len(), 21);
        let g = growth_centers(&s, 1.0, 3.0, 2.0).unwrap();
        // Direct ball counting: |B(x,3)| / |B(x,1)| with truncation at the ends.
        let expect: Vec<usize> = (0..21i64)
            .filter(|&x| {
                let big = (0..21i64).filter(|y| (x - y).abs() <= 3).count() as f64;
                let small = (0..21i64).filter(|y| (x - y).abs() <= 1).count() as f64;
                big / small <= 2.0
            })
            .map(|x| x as usize)
            .collect();
        assert_eq!(g.indices, expect);
        assert_eq!(g.indices, vec![0, 1, 2, 18, 19, 20]);
        assert!(matches!(growth_centers(&s, 2.0, 1.0, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn doubling_examples() {
        assert_eq!(doubling_estimate(&line(1)), 1.0);
        // Equilateral: scaled standard basis in l_2 with unit weights.
        let n = 6;
        let rows = (0..n).map(|i| (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect()).collect();
        let s = PointSet::new(Space::new(2.0, vec![1.0; n]).unwrap(), rows, None).unwrap();
        assert_eq!(doubling_estimate(&s), n as f64);
        assert!(doubling_estimate(&line(40)) <= 5.0);
    }

    #[test]
    fn json_and_csv_round_trip() {
        let s = random_set(4, 3, 2.5, 7);
        let back = PointSet::from_json(&s.to_json()).unwrap();
        assert_eq!(back.coords(), s.coords());
        assert_eq!(back.p(), 2.5);
        let csv = "label,c0,c1\na,0,1\nb,2,3\n";
        let t = PointSet::from_csv(csv, 2.0).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.label(1), "b");
        assert_eq!(t.point(1), &[2.0, 3.0]);
    }

    #[test]
    fn sweep_index_matches_brute_force() {
        let s = random_set(200, 5, 3.0, 11);
        let ids: Vec<usize> = (0..200).collect();
        let index = SweepIndex::new(s.coords(), s.dim(), s.space(), &ids);
        for q in [0usize, 17, 99] {
            let mut got = index.within(s.point(q), 0.4);
            got.sort();
            let want: Vec<usize> = (0..200).filter(|&j| s.d(q, j) <= 0.4).collect();
            assert_eq!(got, want);
            let x: Vec<f64> = s.point(q).iter().map(|v| v + 0.01).collect();
            let (nn, d) = index.nearest(&x).unwrap();
            let best = (0..200).map(|j| s.dist_to(j, &x)).fold(f64::INFINITY, f64::min);
            assert_eq!(d, best);
            assert_eq!(s.dist_to(nn, &x), best);
        }
    }
}
