//! Bourgain-type embedding by distances to Bernoulli subsets.

use std::sync::Arc;

use super::EmbeddingMap;
use crate::error::{domain, Result};
use crate::metric::{growth_centers, PointSet};
use crate::partition::bernoulli_subset;
use crate::rng::Rng;

pub const DEFAULT_BOURGAIN_TRIALS: usize = 64;

pub fn bourgain_embed(s: Arc<PointSet>, rng: &mut Rng) -> Result<EmbeddingMap> {
    bourgain_embed_with(s, DEFAULT_BOURGAIN_TRIALS, rng)
}

/// For `i = 1..⌈ln n⌉` and `T` trials each, the coordinate
/// `min{d(x, Z), diam}/√(⌈ln n⌉ T)` with `Z` a Bernoulli subset of density
/// `e^{−i}` and `d(x, ∅) = diam + 1`. Each coordinate is 1-Lipschitz, so the
/// map is.
pub fn bourgain_embed_with(s: Arc<PointSet>, trials: usize, rng: &mut Rng) -> Result<EmbeddingMap> {
    let n = s.len();
    if n < 2 {
        return domain("embedding needs at least two points");
    }
    if trials == 0 {
        return domain("at least one trial is needed");
    }
    s.matrix();
    let levels = ((n as f64).ln().ceil() as usize).max(1);
    let diam = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| s.d(i, j)).fold(0.0, f64::max);
    let dim = levels * trials;
    let norm = 1.0 / (dim as f64).sqrt();
    let mut images = vec![0.0; n * dim];
    let mut col = 0;
    for i in 1..=levels {
        let prob = (-(i as f64)).exp();
        for _ in 0..trials {
            let z = bernoulli_subset(n, prob, rng);
            for x in 0..n {
                let d = z.iter().map(|&w| s.d(x, w)).fold(diam + 1.0, f64::min);
                images[x * dim + col] = norm * d.min(diam);
            }
            col += 1;
        }
    }
    Ok(EmbeddingMap::new("bourgain", s, dim, images, 1.0)?
        .with_param("levels", levels as f64)
        .with_param("trials", trials as f64))
}

/// Smallest `c` with `‖f(x)−f(y)‖ ≥ c (R−r)/√(K ln n)` over `x ∈ 𝒢_{≤K}(r,R)`
/// and `d(x,y) > r/2 + 3R/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthFit {
    pub c: f64,
    pub pairs: usize,
    pub centers: usize,
    pub witness: Option<(usize, usize)>,
}

pub fn growth_constant(map: &EmbeddingMap, r: f64, big_r: f64, k: f64) -> Result<GrowthFit> {
    if !(r > 0.0) || !(big_r > r) {
        return domain(format!("need 0 < r < R, got r = {r}, R = {big_r}"));
    }
    let s = map.domain();
    let g = growth_centers(s, r, big_r, k)?;
    let n = s.len();
    let unit = (big_r - r) / (k * (n.max(2) as f64).ln()).sqrt();
    let cut = 0.5 * r + 1.5 * big_r;
    let mut fit = GrowthFit { c: f64::INFINITY, pairs: 0, centers: g.indices.len(), witness: None };
    for &x in &g.indices {
        for y in 0..n {
            if s.d(x, y) > cut {
                fit.pairs += 1;
                let c = map.dist(x, y) / unit;
                if c < fit.c {
                    fit.c = c;
                    fit.witness = Some((x, y));
                }
            }
        }
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Space;
    use crate::partition::bernoulli_event_probability;
    use crate::rng::from_seed;

    #[test]
    fn lipschitz_and_two_points() {
        let s = Arc::new(PointSet::new(Space::uniform(2.0, 1).unwrap(), vec![vec![0.0], vec![3.0]], None).unwrap());
        let mut rng = from_seed(5);
        let map = bourgain_embed_with(s.clone(), 400, &mut rng).unwrap();
        map.check_lipschitz(1e-12).unwrap();
        // One level with density 1/e. A coordinate differs by diam exactly
        // when Z holds one point but not the other: probability 2q(1−q).
        let q = (-1.0f64).exp();
        let expect = 3.0 * (2.0 * q * (1.0 - q)).sqrt();
        let got = map.dist(0, 1);
        assert!((got - expect).abs() < 0.1 * expect, "{got} vs {expect}");
        let ev = bernoulli_event_probability(&s, 0, 1, q, 0.1, 0.5, 2000, 9).unwrap();
        assert!(ev.probability >= ev.bound - 3.0 * ev.half_width);
    }

    #[test]
    fn empty_subsets_are_truncated() {
        // With 3 points, ⌈ln 3⌉ = 2 levels; coordinates never exceed diam/√dim.
        let s = Arc::new(
            PointSet::new(Space::uniform(2.0, 1).unwrap(), vec![vec![0.0], vec![1.0], vec![2.0]], None).unwrap(),
        );
        let mut rng = from_seed(1);
        let map = bourgain_embed_with(s, 50, &mut rng).unwrap();
        let cap = 2.0 / (map.dim() as f64).sqrt();
        for i in 0..3 {
            assert!(map.image(i).iter().all(|v| *v <= cap + 1e-15));
        }
    }
}
