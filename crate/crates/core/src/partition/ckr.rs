//! Ball carving (CKR) partitions and Bernoulli subsets.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{BoundMode, Partition, PartitionSampler, SamplerInfo};
use crate::error::{domain, Result};
use crate::metric::{greedy_net, PointSet, SweepIndex};
use crate::rng::{substream, Rng};
use crate::stats::wilson_half_width;

/// Which points act as carving centers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CenterChoice {
    /// A greedy `Δ/8`-net of the set.
    Net,
    /// Every point of the set.
    AllPoints,
}

/// Carves `s` with balls of a common radius `rho` around `centers`, visited
/// in a uniformly random order; each point joins the first ball containing it.
fn carve(s: &PointSet, centers: &[usize], rho: f64, delta: f64, rng: &mut Rng) -> Result<Partition> {
    let mut order = centers.to_vec();
    order.shuffle(rng);
    let all: Vec<usize> = (0..s.len()).collect();
    let index = SweepIndex::new(s.coords(), s.dim(), s.space(), &all);
    let mut owner = vec![usize::MAX; s.len()];
    for (rank, &c) in order.iter().enumerate() {
        index.for_each_within(s.point(c), rho, |id, _| {
            if owner[id] == usize::MAX {
                owner[id] = rank;
            }
        });
    }
    if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(crate::Error::Structural(format!("point {i} is not covered by any carving ball")));
    }
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); order.len()];
    for (i, &o) in owner.iter().enumerate() {
        clusters[o].push(i);
    }
    let witnesses: Vec<Option<Vec<f64>>> = order.iter().map(|&c| Some(s.point(c).to_vec())).collect();
    let p = Partition::with_centers(clusters, witnesses, delta, BoundMode::DiameterBounded);
    p.validate(s)?;
    Ok(p)
}

fn draw_radius(delta: f64, rng: &mut Rng) -> f64 {
    delta * (0.25 + 0.25 * rng.random::<f64>())
}

/// CKR partition of a Euclidean set with centers from a greedy `Δ/8`-net.
pub fn ckr_partition(s: &PointSet, delta: f64, rng: &mut Rng) -> Result<Partition> {
    check_euclidean(s, delta)?;
    let net = greedy_net(s, delta / 8.0)?;
    let rho = draw_radius(delta, rng);
    carve(s, &net, rho, delta, rng)
}

/// CKR carving around all points with radius uniform in `[Δ₀/4, Δ₀/2]`.
pub fn padded_partition(s: &PointSet, delta0: f64, rng: &mut Rng) -> Result<Partition> {
    if !(delta0 > 0.0) || !delta0.is_finite() {
        return domain(format!("scale {delta0} must be positive"));
    }
    let all: Vec<usize> = (0..s.len()).collect();
    let rho = draw_radius(delta0, rng);
    carve(s, &all, rho, delta0, rng)
}

fn check_euclidean(s: &PointSet, delta: f64) -> Result<()> {
    if s.p() != 2.0 {
        return domain(format!("ball carving with net centers needs p = 2, got p = {}", s.p()));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return domain(format!("scale {delta} must be positive"));
    }
    Ok(())
}

/// Seeded CKR sampler over a fixed set.
pub struct CkrSampler {
    set: Arc<PointSet>,
    delta: f64,
    choice: CenterChoice,
    centers: Vec<usize>,
}

impl CkrSampler {
    pub fn new(set: Arc<PointSet>, delta: f64, choice: CenterChoice) -> Result<Self> {
        let centers = match choice {
            CenterChoice::Net => {
                check_euclidean(&set, delta)?;
                greedy_net(&set, delta / 8.0)?
            }
            CenterChoice::AllPoints => {
                if !(delta > 0.0) || !delta.is_finite() {
                    return domain(format!("scale {delta} must be positive"));
                }
                (0..set.len()).collect()
            }
        };
        Ok(Self { set, delta, choice, centers })
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
    }
}

impl PartitionSampler for CkrSampler {
    fn sample(&self, seed: u64, index: u64) -> Result<Partition> {
        let mut rng = substream(seed, index);
        let rho = draw_radius(self.delta, &mut rng);
        carve(&self.set, &self.centers, rho, self.delta, &mut rng)
    }
    fn delta(&self) -> f64 {
        self.delta
    }
    fn mode(&self) -> BoundMode {
        BoundMode::DiameterBounded
    }
    fn points(&self) -> &Arc<PointSet> {
        &self.set
    }
    fn info(&self) -> SamplerInfo {
        let name = match self.choice {
            CenterChoice::Net => "ckr-net",
            CenterChoice::AllPoints => "ckr-all",
        };
        SamplerInfo::new(name).with("delta", self.delta).with("centers", self.centers.len() as f64)
    }
}

/// Indices included independently with probability `prob`.
pub fn bernoulli_subset(n: usize, prob: f64, rng: &mut Rng) -> Vec<usize> {
    (0..n).filter(|_| rng.random::<f64>() < prob).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BernoulliEvent {
    pub probability: f64,
    pub successes: u64,
    pub trials: u64,
    /// `min{(1−𝔭)^{|B(x,R)|}, 1−(1−𝔭)^{|B(x,r)|}}`.
    pub bound: f64,
    pub half_width: f64,
}

/// Empirical probability that a `prob`-Bernoulli subset `Z` is nonempty and
/// `|d(x,Z) − d(y,Z)| > (R−r)/2`.
#[allow(clippy::too_many_arguments)]
pub fn bernoulli_event_probability(
    s: &PointSet,
    x: usize,
    y: usize,
    prob: f64,
    r: f64,
    big_r: f64,
    trials: u64,
    seed: u64,
) -> Result<BernoulliEvent> {
    if !(0.0..=1.0).contains(&prob) {
        return domain(format!("probability {prob} outside [0, 1]"));
    }
    if !(r > 0.0 && r < big_r) {
        return domain(format!("radii must satisfy 0 < r < R, got r = {r}, R = {big_r}"));
    }
    if !(s.d(x, y) > 0.5 * r + 1.5 * big_r) {
        return domain(format!("d(x, y) = {} must exceed r/2 + 3R/2 = {}", s.d(x, y), 0.5 * r + 1.5 * big_r));
    }
    if trials == 0 {
        return domain("at least one trial is needed");
    }
    let n = s.len();
    let count = |rad: f64, c: usize| (0..n).filter(|&z| s.d(c, z) <= rad).count() as i32;
    let bound = (1.0 - prob).powi(count(big_r, x)).min(1.0 - (1.0 - prob).powi(count(r, x)));
    let mut rng = substream(seed, 0);
    let mut successes = 0u64;
    for _ in 0..trials {
        let mut dx = f64::INFINITY;
        let mut dy = f64::INFINITY;
        let mut any = false;
        for z in 0..n {
            if rng.random::<f64>() < prob {
                any = true;
                dx = dx.min(s.d(x, z));
                dy = dy.min(s.d(y, z));
            }
        }
        if any && (dx - dy).abs() > 0.5 * (big_r - r) {
            successes += 1;
        }
    }
    Ok(BernoulliEvent {
        probability: successes as f64 / trials as f64,
        successes,
        trials,
        bound,
        half_width: wilson_half_width(successes, trials),
    })
}
