//! Net-anchored maps, spatially localized single-scale maps, and the
//! separation/extension map on nets.

use std::collections::HashMap;
use std::sync::Arc;

use super::{euclidean_coords, truncation_map, EmbeddingMap, TruncationMap};
use crate::error::{domain, Error, Result};
use crate::metric::{greedy_net_of, GrowthCenterSet, PointSet};
use crate::partition::{estimate_padding, extend_partition, padded_partition, CenterChoice, CkrSampler, Partition, PartitionSampler};
use crate::reduce::KirszbraunExtension;
use crate::rng::{derive_seed, from_seed, substream, Rng};

/// `φ(x) = (f(x) ⊕ d(x, N))/√2` together with the net `N`.
#[derive(Clone, Debug)]
pub struct NetAnchorMap {
    pub map: EmbeddingMap,
    pub net: Vec<usize>,
    /// `|B(a_min, R)| / |B(a_min, r)|` for the net point with the smallest
    /// `r`-ball.
    pub packing_bound: f64,
    /// Whether `R − r ≥ diam(U)`, under which `|N| ≤ packing_bound`.
    pub packing_applies: bool,
}

/// Builds a maximal `2r`-separated `N ⊆ U ∩ 𝒢` (with `r` and `R` taken from
/// the growth set) and appends the distance to `N` as a fresh coordinate.
pub fn net_anchor_map(
    u: &[usize],
    growth: &GrowthCenterSet,
    delta: f64,
    d: f64,
    base: &EmbeddingMap,
) -> Result<NetAnchorMap> {
    let s = base.domain().clone();
    let r = growth.r;
    if !(r > 0.0) || !(d >= 1.0) {
        return domain(format!("need r > 0 and D >= 1, got r = {r}, D = {d}"));
    }
    if delta < 9.0 * d * r {
        return domain(format!("scale {delta} is below 9Dr = {}", 9.0 * d * r));
    }
    let members: Vec<usize> = u.iter().copied().filter(|i| growth.indices.binary_search(i).is_ok()).collect();
    if members.is_empty() {
        return domain("U contains no growth center");
    }
    let net = greedy_net_of(&s, &members, 2.0 * r)?;
    let n = s.len();
    let count = |x: usize, rad: f64| (0..n).filter(|&z| s.d(x, z) <= rad).count();
    let a_min = *net.iter().min_by_key(|&&a| (count(a, r), a)).expect("nonempty net");
    let packing_bound = count(a_min, growth.big_r) as f64 / count(a_min, r) as f64;
    let diam_u = u.iter().flat_map(|&i| u.iter().map(move |&j| (i, j))).map(|(i, j)| s.d(i, j)).fold(0.0, f64::max);
    let packing_applies = growth.big_r - r >= diam_u;
    if packing_applies && net.len() as f64 > packing_bound {
        return Err(Error::Validation(format!("net of {} points exceeds the packing bound {packing_bound}", net.len())));
    }
    let dim = base.dim() + 1;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut images = Vec::with_capacity(n * dim);
    for x in 0..n {
        images.extend(base.image(x).iter().map(|v| h * v));
        images.push(h * net.iter().map(|&a| s.d(x, a)).fold(f64::INFINITY, f64::min));
    }
    let witness = ((base.lipschitz_witness.powi(2) + 1.0) / 2.0).sqrt();
    let map = EmbeddingMap::new("net-anchor", s, dim, images, witness)?
        .with_scale(delta)
        .with_param("r", r)
        .with_param("R", growth.big_r)
        .with_param("D", d)
        .with_param("net", net.len() as f64);
    Ok(NetAnchorMap { map, net, packing_bound, packing_applies })
}

/// Produces, for a cluster `U ⊆ S`, a map of `U` into plain `ℓ_2` and its
/// Lipschitz witness.
pub trait SubMapFactory: Sync {
    fn build(&self, s: &Arc<PointSet>, cluster: &[usize], seed: u64) -> Result<(Vec<Vec<f64>>, f64)>;
    fn name(&self) -> &'static str;
}

/// The isometric inclusion of a Euclidean set.
pub struct EuclideanInclusion;

impl SubMapFactory for EuclideanInclusion {
    fn build(&self, s: &Arc<PointSet>, cluster: &[usize], _seed: u64) -> Result<(Vec<Vec<f64>>, f64)> {
        if s.p() != 2.0 {
            return domain(format!("inclusion into l_2 needs p = 2, got p = {}", s.p()));
        }
        Ok((cluster.iter().map(|&i| euclidean_coords(s, i)).collect(), 1.0))
    }
    fn name(&self) -> &'static str {
        "inclusion"
    }
}

/// A Bourgain embedding of the cluster alone.
pub struct BourgainFactory {
    pub trials: usize,
}

impl SubMapFactory for BourgainFactory {
    fn build(&self, s: &Arc<PointSet>, cluster: &[usize], seed: u64) -> Result<(Vec<Vec<f64>>, f64)> {
        if cluster.len() == 1 {
            return Ok((vec![vec![0.0]], 0.0));
        }
        let sub = Arc::new(s.subset(cluster));
        let map = super::bourgain_embed_with(sub, self.trials, &mut from_seed(seed))?;
        Ok(((0..cluster.len()).map(|i| map.image(i).to_vec()).collect(), map.lipschitz_witness))
    }
    fn name(&self) -> &'static str {
        "bourgain"
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalizedParams {
    pub trials: usize,
    pub features: usize,
    pub padding_trials: u64,
    /// Required padding probability when fitting `κ`.
    pub padding_target: f64,
    pub kappa_grid: Vec<f64>,
}

impl Default for LocalizedParams {
    fn default() -> Self {
        Self {
            trials: 32,
            features: 128,
            padding_trials: 200,
            padding_target: 0.25,
            kappa_grid: vec![1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0],
        }
    }
}

#[derive(Clone, Debug)]
pub struct LocalizedMap {
    pub map: EmbeddingMap,
    pub kappa: f64,
    pub padding_probability: f64,
    pub delta0: f64,
    /// Diameter bound of the extended partitions.
    pub delta_prime: f64,
}

/// The localized map `φ_C`: for each of `T` padded partitions of `C` at scale
/// `Δ₀ = 16κ(β+1) ln|C| Δ`, extended to `S`, the block
/// `(𝔡_U(z)/2) G(f_U(z))/√T` with `U` the cluster of `z`. `κ` is the
/// smallest grid value whose padding probability at radius `16(β+1)Δ`
/// reaches the target.
pub fn localized_map(
    s: &Arc<PointSet>,
    c: &[usize],
    delta: f64,
    beta: f64,
    factory: &dyn SubMapFactory,
    params: &LocalizedParams,
    seed: u64,
) -> Result<LocalizedMap> {
    if c.len() < 2 {
        return domain("the anchor set needs at least two points");
    }
    if !(delta > 0.0) || !(beta >= 1.0) {
        return domain(format!("need delta > 0 and beta >= 1, got {delta}, {beta}"));
    }
    if params.trials == 0 {
        return domain("at least one trial is needed");
    }
    let cset = Arc::new(s.subset(c));
    let ln_c = (c.len() as f64).ln();
    let inner = 16.0 * (beta + 1.0) * delta;
    let mut chosen = None;
    for &kappa in &params.kappa_grid {
        let delta0 = 16.0 * kappa * (beta + 1.0) * ln_c * delta;
        let sampler = CkrSampler::new(cset.clone(), delta0, CenterChoice::AllPoints)?;
        let stats = estimate_padding(&sampler, inner, params.padding_trials, derive_seed(seed, 1))?;
        if stats.p_hat >= params.padding_target {
            chosen = Some((kappa, delta0, stats.p_hat));
            break;
        }
    }
    let (kappa, delta0, padding_probability) = chosen.ok_or_else(|| Error::Numerical {
        msg: format!("no kappa in the grid reaches padding probability {}", params.padding_target),
        achieved: 0.0,
    })?;
    let far = 2.0 * (beta + 1.0) * delta;
    let n = s.len();
    let mut maps: HashMap<usize, TruncationMap> = HashMap::new();
    let out_dim = 2 * params.features + 1;
    let dim = params.trials * out_dim;
    let mut images = vec![0.0; n * dim];
    let scale = 1.0 / (params.trials as f64).sqrt();
    let mut lip_f = 0.0f64;
    let mut lip_g = 0.0f64;
    let mut delta_prime = 0.0f64;
    for t in 0..params.trials {
        let mut rng = substream(derive_seed(seed, 2), t as u64);
        let p0 = padded_partition(&cset, delta0, &mut rng)?;
        let p = extend_partition(&p0, &cset, s, far)?;
        delta_prime = p.delta;
        let assign = p.assignment();
        for (k, cluster) in p.clusters.iter().enumerate() {
            let rho: Vec<f64> = if cluster.len() == n {
                vec![1.0; n]
            } else {
                cluster
                    .iter()
                    .map(|&z| {
                        let out = (0..n).filter(|&w| assign[w] as usize != k).map(|w| s.d(z, w)).fold(f64::INFINITY, f64::min);
                        (out / delta).min(1.0)
                    })
                    .collect()
            };
            let (sub, witness) = factory.build(s, cluster, derive_seed(derive_seed(seed, 3), (t * n + cluster[0]) as u64))?;
            lip_f = lip_f.max(witness);
            let m = sub[0].len();
            if !maps.contains_key(&m) {
                let mut grng: Rng = from_seed(derive_seed(derive_seed(seed, 4), m as u64));
                let g = truncation_map(m, delta, params.features, &mut grng)?;
                lip_g = lip_g.max(g.lipschitz_witness());
                maps.insert(m, g);
            }
            let g = &maps[&m];
            let mut buf = vec![0.0; out_dim];
            for ((&z, fz), r) in cluster.iter().zip(&sub).zip(&rho) {
                g.apply_into(fz, &mut buf);
                let row = &mut images[z * dim + t * out_dim..z * dim + (t + 1) * out_dim];
                for (o, v) in row.iter_mut().zip(&buf) {
                    *o = 0.5 * r * scale * v;
                }
            }
        }
    }
    let witness = (0.5 + 0.5 * lip_g * lip_f).max(1.0);
    let map = EmbeddingMap::new("localized", s.clone(), dim, images, witness)?
        .with_scale(delta)
        .with_param("beta", beta)
        .with_param("kappa", kappa)
        .with_param("delta0", delta0)
        .with_param("padding", padding_probability);
    Ok(LocalizedMap { map, kappa, padding_probability, delta0, delta_prime })
}

/// Smallest `‖φ(x)−φ(y)‖ D/Δ` over pairs with `Δ ≤ d(x,y) ≤ βΔ` and
/// `d(x, C) ≤ (β+1)Δ`; `None` when no pair qualifies.
pub fn localized_lower_constant(map: &EmbeddingMap, c: &[usize], delta: f64, beta: f64, d: f64) -> Option<f64> {
    let s = map.domain();
    let n = s.len();
    let mut best: Option<f64> = None;
    for x in 0..n {
        let near = c.iter().map(|&a| s.d(x, a)).fold(f64::INFINITY, f64::min) <= (beta + 1.0) * delta;
        if !near {
            continue;
        }
        for y in 0..n {
            let dxy = s.d(x, y);
            if dxy >= delta && dxy <= beta * delta {
                let v = map.dist(x, y) * d / delta;
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    }
    best
}

/// The separation/extension map of a Euclidean set at scale `Δ`.
#[derive(Clone, Debug)]
pub struct SepExtMap {
    pub map: EmbeddingMap,
    /// Separation estimate on the net, used as `Π`.
    pub pi_hat: f64,
    pub epsilon: f64,
    /// Partition bound as a fraction of `Δ`.
    pub bound_fraction: f64,
    pub net: Vec<usize>,
    pub trials: usize,
    /// Guaranteed `‖Ψ(x)−Ψ(y)‖` for `d(x,y) ≥ Δ`: `(√(ε𝒹/Π) − 2ε)Δ`.
    pub lower_bound: f64,
}

/// `ψ(a) = Δ√(ε𝒹)/√(2Π) v_{P(a)}` on an `εΔ`-net `N`, realized with `T` CKR
/// partitions of `N` at scale `𝒹Δ`, then extended to `S` by Kirszbraun.
/// `Π` is the empirical separation of those same partitions, so `ψ` is
/// 1-Lipschitz on `N` exactly; `ε` and `𝒹` are re-chosen until the net
/// estimate no longer exceeds the value used to build the net.
pub fn sep_ext_product_map(s: &Arc<PointSet>, delta: f64, trials: usize, seed: u64) -> Result<SepExtMap> {
    if s.p() != 2.0 {
        return domain(format!("Kirszbraun extension needs p = 2, got p = {}", s.p()));
    }
    if !(delta > 0.0) || trials == 0 {
        return domain("need delta > 0 and at least one trial");
    }
    let n = s.len();
    let all: Vec<usize> = (0..n).collect();
    let mut pi = 1.0f64;
    for round in 0..8 {
        let frac = 0.999 * 8.0 * pi / (8.0 * pi + 1.0);
        let eps = frac / (16.0 * pi);
        let net = greedy_net_of(s, &all, eps * delta)?;
        let nset = Arc::new(s.subset(&net));
        let sampler = CkrSampler::new(nset.clone(), frac * delta, CenterChoice::Net)?;
        let parts: Vec<Partition> =
            (0..trials as u64).map(|t| sampler.sample(derive_seed(seed, round), t)).collect::<Result<_>>()?;
        let mut sigma = 0.0f64;
        for a in 0..net.len() {
            for b in (a + 1)..net.len() {
                let sep = parts.iter().filter(|p| p.separates(a, b)).count() as f64 / trials as f64;
                sigma = sigma.max(sep * frac * delta / nset.d(a, b));
            }
        }
        if sigma > pi && round < 7 {
            pi = sigma;
            continue;
        }
        let pi_used = pi.max(sigma);
        let amp = delta * (eps * frac).sqrt() / (2.0 * pi_used).sqrt();
        let k: usize = parts.iter().map(|p| p.len()).sum();
        let m = s.dim();
        let mut src = Vec::with_capacity(net.len() * m);
        let mut img = Vec::with_capacity(net.len() * k);
        for (a, &i) in net.iter().enumerate() {
            src.extend(euclidean_coords(s, i));
            img.extend(super::partition_feature_map(a, &parts, amp));
        }
        let mut ext = KirszbraunExtension::new(src, img, m, k)?;
        let lip_net = ext.anchor_lipschitz();
        if lip_net > 1.0 + 1e-12 {
            return Err(Error::Numerical { msg: "net map is not 1-Lipschitz".into(), achieved: lip_net });
        }
        let mut images = vec![0.0; n * k];
        for x in 0..n {
            let y = ext.extend(&euclidean_coords(s, x))?;
            images[x * k..(x + 1) * k].copy_from_slice(&y);
        }
        let lower_bound = ((eps * frac / pi_used).sqrt() - 2.0 * eps) * delta;
        let map = EmbeddingMap::new("sep-ext", s.clone(), k, images, 1.0)?
            .with_scale(delta)
            .with_param("pi", pi_used)
            .with_param("epsilon", eps)
            .with_param("net", net.len() as f64);
        return Ok(SepExtMap { map, pi_hat: pi_used, epsilon: eps, bound_fraction: frac, net, trials, lower_bound });
    }
    unreachable!("the last round always returns")
}

/// Uniform random points in `[0, 1)^m` under the given exponent.
#[cfg(test)]
pub(crate) fn random_set(n: usize, m: usize, p: f64, seed: u64) -> Arc<PointSet> {
    use rand::Rng as _;
    let mut rng = from_seed(seed);
    let rows = (0..n).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect();
    Arc::new(PointSet::new(crate::metric::Space::uniform(p, m).unwrap(), rows, None).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{bourgain_embed, distortion_report};
    use crate::metric::growth_centers;

    #[test]
    fn net_anchor_coordinates() {
        let s = random_set(40, 2, 2.0, 3);
        let base = bourgain_embed(s.clone(), &mut from_seed(4)).unwrap();
        let g = growth_centers(&s, 0.05, 0.9, 20.0).unwrap();
        let u: Vec<usize> = (0..20).collect();
        let d = 2.0;
        let delta = 9.0 * d * 0.05;
        let na = net_anchor_map(&u, &g, delta, d, &base).unwrap();
        let last = na.map.dim() - 1;
        for &a in &na.net {
            assert_eq!(na.map.image(a)[last], 0.0);
        }
        na.map.check_lipschitz(1e-12).unwrap();
        if na.packing_applies {
            assert!(na.net.len() as f64 <= na.packing_bound);
        }
        // Points of U ∩ 𝒢 sit within 2r of the net; far points are separated.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for &x in u.iter().filter(|x| g.indices.contains(x)) {
            for y in 0..s.len() {
                let dy = na.map.image(y)[last] / h;
                if dy >= 2.0 * 0.05 + delta / (19.0 * d) {
                    assert!(na.map.dist(x, y) >= h * (dy - 2.0 * 0.05) - 1e-12);
                }
            }
        }
        assert!(net_anchor_map(&u, &g, 0.5 * delta, d, &base).is_err());
    }

    #[test]
    fn localized_map_is_lipschitz_and_local() {
        let s = random_set(60, 2, 2.0, 8);
        let c: Vec<usize> = (0..12).collect();
        let delta = 0.02;
        let params = LocalizedParams { trials: 8, padding_trials: 100, ..Default::default() };
        let lm = localized_map(&s, &c, delta, 1.0, &EuclideanInclusion, &params, 21).unwrap();
        let lip = lm.map.empirical_lipschitz();
        assert!(lip <= 1.05, "Lipschitz {lip}");
        assert!(lm.map.lipschitz_witness <= 1.0 + 1e-12);
        assert!(lm.kappa >= 1.0);
        assert!(lm.delta_prime <= 8.0 * 2.0 * (2.0 * lm.kappa * (12f64).ln() + 1.0) * delta * (1.0 + 1e-12));
        let r = distortion_report(&lm.map, Some((delta, delta))).unwrap();
        assert!(r.lip <= 1.05);
    }

    #[test]
    fn sep_ext_chain_bound() {
        let s = random_set(50, 2, 2.0, 12);
        let delta = 0.3;
        let se = sep_ext_product_map(&s, delta, 64, 5).unwrap();
        se.map.check_lipschitz(1e-5).unwrap();
        let w = distortion_report(&se.map, Some((delta, f64::INFINITY))).unwrap();
        assert!(w.pairs > 0);
        assert!(se.lower_bound > 0.0);
        // Exact chain bound up to the extension tolerance, and its closed form.
        let tol = 4.0 * crate::reduce::QUERY_TOLERANCE;
        let mut worst = f64::INFINITY;
        for x in 0..s.len() {
            for y in 0..s.len() {
                if s.d(x, y) >= delta {
                    worst = worst.min(se.map.dist(x, y));
                }
            }
        }
        assert!(worst >= se.lower_bound - tol, "{worst} < {}", se.lower_bound);
        assert!(worst * 4.0 >= delta / (8.0 * se.pi_hat + 1.0));
    }
}
