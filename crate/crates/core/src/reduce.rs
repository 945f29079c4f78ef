//! Random projection of a finite Euclidean set followed by Kirszbraun
//! extension to arbitrary query points.
//!
//! The anchor map `h` is a scaled sign matrix accepted only when every anchor
//! pair satisfies `½‖a−b‖ ≤ ‖h(a)−h(b)‖ ≤ ‖a−b‖`. A query `x` is mapped to a
//! point `y` with `‖y − H(a)‖ ≤ ‖x − a‖` for every anchor `a`, found by
//! solving the dual of `min_y max_a ‖y−H(a)‖² − ‖x−a‖²` on the simplex.
//! Answered queries become anchors, so `H` stays 1-Lipschitz on everything it
//! has seen.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::error::{domain, Error, Result};
use crate::metric::{PointSet, Space};
use crate::rng::{substream, Rng};

pub const C_JL: f64 = 24.0;
const MAX_DRAWS: usize = 64;
/// Largest accepted `m(y)`.
pub const QUERY_TOLERANCE: f64 = 1e-6;

/// `⌈C_JL · ln n⌉`.
pub fn jl_dimension(n: usize) -> usize {
    ((C_JL * (n.max(2) as f64).ln()).ceil() as usize).max(1)
}

#[derive(Debug)]
struct Anchors {
    /// Source rows in Euclidean coordinates `√w ⊙ x`.
    src: Vec<f64>,
    /// Images in Euclidean coordinates of `ℓ_2^k`.
    img: Vec<f64>,
    cache: HashMap<Vec<u64>, usize>,
}

/// The map `H` of a finite anchor set.
#[derive(Debug)]
pub struct ReducedMap {
    source: Space,
    sqrt_w: Vec<f64>,
    k: usize,
    /// Row-major `k × m` matrix acting on Euclidean source coordinates; `None`
    /// for the identity.
    matrix: Option<Vec<f64>>,
    base: usize,
    /// Worst anchor pair ratios `‖h(a)−h(b)‖/‖a−b‖`.
    pub ratio_range: (f64, f64),
    pub draws: usize,
    state: Mutex<Anchors>,
}

/// Builds `h` on the anchors `c` (a Euclidean point set). The target
/// dimension is `min(⌈24 ln|C|⌉, dim)`; when it reaches the ambient dimension
/// the identity is used.
pub fn jl_anchor_map(c: &PointSet, seed: u64) -> Result<ReducedMap> {
    let k = jl_dimension(c.len());
    jl_anchor_map_with_dim(c, k, seed)
}

pub fn jl_anchor_map_with_dim(c: &PointSet, k: usize, seed: u64) -> Result<ReducedMap> {
    if c.p() != 2.0 {
        return domain(format!("random projection needs p = 2, got p = {}", c.p()));
    }
    if c.len() < 2 {
        return domain("at least two anchors are needed");
    }
    if k == 0 {
        return domain("target dimension must be positive");
    }
    let n = c.len();
    for i in 0..n {
        for j in i + 1..n {
            if c.d(i, j) == 0.0 {
                return domain(format!("anchors {i} and {j} coincide"));
            }
        }
    }
    let m = c.dim();
    let sqrt_w: Vec<f64> = c.space().weights.iter().map(|w| w.sqrt()).collect();
    let src: Vec<f64> = (0..n).flat_map(|i| c.point(i).iter().zip(&sqrt_w).map(|(x, s)| x * s).collect::<Vec<_>>()).collect();
    if k >= m {
        let map = ReducedMap::assemble(c.space().clone(), sqrt_w, m, None, src.clone(), src, (1.0, 1.0), 0);
        return Ok(map);
    }
    let mut rng = substream(seed, 0);
    let mut dim = k;
    for round in 0..2 {
        for draw in 0..MAX_DRAWS {
            let raw: Vec<f64> = (0..dim * m).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            let proj = |x: &[f64]| -> Vec<f64> {
                (0..dim).map(|r| raw[r * m..(r + 1) * m].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
            };
            let imgs: Vec<Vec<f64>> = (0..n).map(|i| proj(&src[i * m..(i + 1) * m])).collect();
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for i in 0..n {
                for j in i + 1..n {
                    let num = euclid(&imgs[i], &imgs[j]);
                    let den = euclid(&src[i * m..(i + 1) * m], &src[j * m..(j + 1) * m]);
                    let r = num / den;
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
            if hi > 0.0 && lo >= 0.5 * hi {
                let scale = 1.0 / hi;
                let matrix: Vec<f64> = raw.iter().map(|v| v * scale).collect();
                let img: Vec<f64> = imgs.iter().flat_map(|v| v.iter().map(|x| x * scale).collect::<Vec<_>>()).collect();
                // Recheck the accepted map pair by pair after scaling.
                let (mut lo2, mut hi2) = (f64::INFINITY, 0.0f64);
                for i in 0..n {
                    for j in i + 1..n {
                        let r = euclid(&img[i * dim..(i + 1) * dim], &img[j * dim..(j + 1) * dim])
                            / euclid(&src[i * m..(i + 1) * m], &src[j * m..(j + 1) * m]);
                        lo2 = lo2.min(r);
                        hi2 = hi2.max(r);
                    }
                }
                if hi2 <= 1.0 + 1e-12 && lo2 >= 0.5 {
                    let draws = round * MAX_DRAWS + draw + 1;
                    return Ok(ReducedMap::assemble(c.space().clone(), sqrt_w, dim, Some(matrix), src, img, (lo2, hi2), draws));
                }
            }
        }
        dim = (dim * 3).div_ceil(2);
        if dim >= m {
            return Ok(ReducedMap::assemble(c.space().clone(), sqrt_w, m, None, src.clone(), src, (1.0, 1.0), 2 * MAX_DRAWS));
        }
    }
    Err(Error::Numerical { msg: "no projection met the anchor pair bounds".into(), achieved: 0.0 })
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn bits(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

impl ReducedMap {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        source: Space,
        sqrt_w: Vec<f64>,
        k: usize,
        matrix: Option<Vec<f64>>,
        src: Vec<f64>,
        img: Vec<f64>,
        ratio_range: (f64, f64),
        draws: usize,
    ) -> Self {
        let m = source.dim();
        let base = src.len() / m;
        let mut cache = HashMap::new();
        for i in 0..base {
            let row: Vec<f64> = src[i * m..(i + 1) * m].iter().zip(&sqrt_w).map(|(e, s)| e / s).collect();
            cache.entry(bits(&row)).or_insert(i);
        }
        Self { source, sqrt_w, k, matrix, base, ratio_range, draws, state: Mutex::new(Anchors { src, img, cache }) }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_identity(&self) -> bool {
        self.matrix.is_none()
    }

    /// Image coordinates live in `ℓ_2^k` with uniform weights `1/k`.
    pub fn image_space(&self) -> Space {
        Space::uniform(2.0, self.k).expect("k >= 1")
    }

    fn to_image_coords(&self, e: &[f64]) -> Vec<f64> {
        let s = (self.k as f64).sqrt();
        e.iter().map(|v| v * s).collect()
    }

    /// `h(a)` for anchor `i` in image coordinates.
    pub fn anchor_image(&self, i: usize) -> Vec<f64> {
        let st = self.state.lock().expect("anchor state");
        self.to_image_coords(&st.img[i * self.k..(i + 1) * self.k])
    }

    pub fn anchor_count(&self) -> usize {
        self.base
    }

    /// `H(x)` in image coordinates; `x` is in source coordinates.
    pub fn query(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.source.dim();
        if x.len() != m {
            return Err(Error::Structural(format!("query has {} coordinates, expected {m}", x.len())));
        }
        let xe: Vec<f64> = x.iter().zip(&self.sqrt_w).map(|(v, s)| v * s).collect();
        if self.matrix.is_none() {
            return Ok(self.to_image_coords(&xe));
        }
        let key = bits(x);
        let mut st = self.state.lock().expect("anchor state");
        if let Some(&i) = st.cache.get(&key) {
            return Ok(self.to_image_coords(&st.img[i * self.k..(i + 1) * self.k]));
        }
        let (y, achieved) = kirszbraun_point(&st.src, &st.img, m, self.k, &xe, &self.nearest(&st.src, &xe))?;
        if achieved > QUERY_TOLERANCE {
            return Err(Error::Numerical { msg: "Kirszbraun query did not reach feasibility".into(), achieved });
        }
        let idx = st.src.len() / m;
        st.src.extend_from_slice(&xe);
        st.img.extend_from_slice(&y);
        st.cache.insert(key, idx);
        Ok(self.to_image_coords(&y))
    }

    fn nearest(&self, src: &[f64], xe: &[f64]) -> usize {
        let m = self.source.dim();
        let mut best = (f64::INFINITY, 0);
        for (i, row) in src.chunks(m).enumerate() {
            let d = euclid(row, xe);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// `m(y) = max_a (‖y − H(a)‖ − ‖x − a‖)` over the current anchors.
    pub fn violation(&self, x: &[f64], y: &[f64]) -> f64 {
        let m = self.source.dim();
        let xe: Vec<f64> = x.iter().zip(&self.sqrt_w).map(|(v, s)| v * s).collect();
        let s = 1.0 / (self.k as f64).sqrt();
        let ye: Vec<f64> = y.iter().map(|v| v * s).collect();
        let st = self.state.lock().expect("anchor state");
        let n = st.src.len() / m;
        (0..n)
            .map(|i| euclid(&ye, &st.img[i * self.k..(i + 1) * self.k]) - euclid(&xe, &st.src[i * m..(i + 1) * m]))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `h(x) = Gx` for the linear part (identity when no projection is used).
    pub fn linear_part(&self, x: &[f64]) -> Vec<f64> {
        let m = self.source.dim();
        let xe: Vec<f64> = x.iter().zip(&self.sqrt_w).map(|(v, s)| v * s).collect();
        match &self.matrix {
            None => self.to_image_coords(&xe),
            Some(g) => {
                let y: Vec<f64> = (0..self.k).map(|r| g[r * m..(r + 1) * m].iter().zip(&xe).map(|(a, b)| a * b).sum()).collect();
                self.to_image_coords(&y)
            }
        }
    }
}

/// Kirszbraun extension of a 1-Lipschitz map between Euclidean spaces given
/// on finitely many anchors. Coordinates are plain (unweighted) Euclidean.
/// Every extended point is appended to the anchors.
#[derive(Clone, Debug)]
pub struct KirszbraunExtension {
    m: usize,
    k: usize,
    src: Vec<f64>,
    img: Vec<f64>,
}

impl KirszbraunExtension {
    pub fn new(src: Vec<f64>, img: Vec<f64>, m: usize, k: usize) -> Result<Self> {
        if m == 0 || k == 0 || src.is_empty() || src.len() % m != 0 || img.len() % k != 0 || src.len() / m != img.len() / k {
            return Err(Error::Structural("anchor rows and images do not match".into()));
        }
        Ok(Self { m, k, src, img })
    }

    pub fn anchor_count(&self) -> usize {
        self.src.len() / self.m
    }

    /// Largest `‖F(a)−F(b)‖/‖a−b‖` over anchor pairs.
    pub fn anchor_lipschitz(&self) -> f64 {
        let n = self.anchor_count();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = euclid(&self.src[i * self.m..(i + 1) * self.m], &self.src[j * self.m..(j + 1) * self.m]);
                let e = euclid(&self.img[i * self.k..(i + 1) * self.k], &self.img[j * self.k..(j + 1) * self.k]);
                if d > 0.0 {
                    best = best.max(e / d);
                } else if e > 0.0 {
                    return f64::INFINITY;
                }
            }
        }
        best
    }

    /// Image of `x`; anchors are returned unchanged.
    pub fn extend(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.m {
            return Err(Error::Structural(format!("query has {} coordinates, expected {}", x.len(), self.m)));
        }
        let mut start = 0;
        let mut best = f64::INFINITY;
        for (i, row) in self.src.chunks(self.m).enumerate() {
            let d = euclid(row, x);
            if d == 0.0 {
                return Ok(self.img[i * self.k..(i + 1) * self.k].to_vec());
            }
            if d < best {
                best = d;
                start = i;
            }
        }
        let (y, achieved) = kirszbraun_point(&self.src, &self.img, self.m, self.k, x, &start)?;
        if achieved > QUERY_TOLERANCE {
            return Err(Error::Numerical { msg: "Kirszbraun extension did not reach feasibility".into(), achieved });
        }
        self.src.extend_from_slice(x);
        self.img.extend_from_slice(&y);
        Ok(y)
    }
}

/// Solves `max_{λ ∈ Δ} Σ λ_a b_a − ‖Σ λ_a c_a‖²` with `b_a = ‖c_a‖² − r_a²`
/// by constraint generation and a primal active-set method; returns
/// `y = Σ λ_a c_a` and `m(y)`.
fn kirszbraun_point(src: &[f64], img: &[f64], m: usize, k: usize, xe: &[f64], start: &usize) -> Result<(Vec<f64>, f64)> {
    let n = src.len() / m;
    let r: Vec<f64> = (0..n).map(|i| euclid(xe, &src[i * m..(i + 1) * m])).collect();
    let c = |i: usize| &img[i * k..(i + 1) * k];
    let scale = r.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let mut work: Vec<usize> = vec![*start];
    let mut lambda: Vec<f64> = vec![1.0];
    let mut y = c(*start).to_vec();
    for _round in 0..4 * n + 8 {
        lambda = simplex_qp(&work.iter().map(|&i| c(i)).collect::<Vec<_>>(), &work.iter().map(|&i| r[i]).collect::<Vec<_>>(), &lambda);
        y = vec![0.0; k];
        for (l, &i) in lambda.iter().zip(&work) {
            for (yv, cv) in y.iter_mut().zip(c(i)) {
                *yv += l * cv;
            }
        }
        // Most violated constraint outside the working set.
        let mut worst = (0.0f64, usize::MAX);
        for i in 0..n {
            let v = euclid(&y, c(i)) - r[i];
            if v > worst.0 && !work.contains(&i) {
                worst = (v, i);
            }
        }
        if worst.1 == usize::MAX || worst.0 <= 1e-13 * scale {
            break;
        }
        work.push(worst.1);
        lambda.push(0.0);
        // Drop members that carry no weight to keep the working set small.
        let keep: Vec<usize> = (0..work.len()).filter(|&t| lambda[t] > 0.0 || t + 1 == work.len()).collect();
        work = keep.iter().map(|&t| work[t]).collect();
        lambda = keep.iter().map(|&t| lambda[t]).collect();
    }
    let achieved = (0..n).map(|i| euclid(&y, c(i)) - r[i]).fold(f64::NEG_INFINITY, f64::max);
    Ok((y, achieved))
}

/// Minimizes `λᵀQλ − bᵀλ` over the simplex, `Q = CᵀC`, `b_a = ‖c_a‖² − r_a²`,
/// starting from `init` (same length as `cs`).
fn simplex_qp(cs: &[&[f64]], r: &[f64], init: &[f64]) -> Vec<f64> {
    let n = cs.len();
    if n == 1 {
        return vec![1.0];
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let q = DMatrix::from_fn(n, n, |i, j| dot(cs[i], cs[j]));
    let b = DVector::from_fn(n, |i, _| dot(cs[i], cs[i]) - r[i] * r[i]);
    let qscale = (0..n).map(|i| q[(i, i)]).fold(0.0, f64::max).max(b.amax()).max(1e-300);
    let ridge = 1e-13 * qscale;
    let tol = 1e-14 * qscale;
    let mut lambda = DVector::from_column_slice(init);
    if (lambda.sum() - 1.0).abs() > 1e-9 || lambda.iter().any(|v| *v < 0.0) {
        lambda = DVector::from_element(n, 0.0);
        lambda[0] = 1.0;
    }
    let mut support: Vec<bool> = lambda.iter().map(|v| *v > 0.0).collect();
    for _ in 0..20 * n + 50 {
        let grad = &q * &lambda * 2.0 - &b;
        let nu: f64 = (0..n).filter(|&i| support[i]).map(|i| lambda[i] * grad[i]).sum();
        let mut enter = None;
        let mut best = nu - tol;
        for j in 0..n {
            if !support[j] && grad[j] < best {
                best = grad[j];
                enter = Some(j);
            }
        }
        // Re-solve on the current support even when nothing enters, so the
        // final iterate satisfies the equality conditions.
        if let Some(j) = enter {
            support[j] = true;
        }
        loop {
            let idx: Vec<usize> = (0..n).filter(|&i| support[i]).collect();
            let s = idx.len();
            let mut kkt = DMatrix::zeros(s + 1, s + 1);
            let mut rhs = DVector::zeros(s + 1);
            for (a, &i) in idx.iter().enumerate() {
                for (bb, &j) in idx.iter().enumerate() {
                    kkt[(a, bb)] = 2.0 * q[(i, j)];
                }
                kkt[(a, a)] += ridge;
                kkt[(a, s)] = 1.0;
                kkt[(s, a)] = 1.0;
                rhs[a] = b[i];
            }
            rhs[s] = 1.0;
            let sol = match kkt.clone().lu().solve(&rhs) {
                Some(v) => v,
                None => break,
            };
            let cand: Vec<f64> = (0..s).map(|a| sol[a]).collect();
            if cand.iter().all(|v| *v > 0.0) {
                for (a, &i) in idx.iter().enumerate() {
                    lambda[i] = cand[a];
                }
                break;
            }
            // Move toward the candidate until a weight reaches zero.
            let mut step = 1.0f64;
            for (a, &i) in idx.iter().enumerate() {
                if cand[a] <= 0.0 {
                    let denom = lambda[i] - cand[a];
                    let t = if denom > 0.0 { lambda[i] / denom } else { 0.0 };
                    step = step.min(t);
                }
            }
            for (a, &i) in idx.iter().enumerate() {
                lambda[i] += step * (cand[a] - lambda[i]);
            }
            for &i in &idx {
                if lambda[i] <= 1e-15 {
                    lambda[i] = 0.0;
                    support[i] = false;
                }
            }
            if !support.iter().any(|s| *s) {
                break;
            }
        }
        let total = lambda.sum();
        if total > 0.0 {
            lambda /= total;
        }
        if enter.is_none() {
            break;
        }
    }
    lambda.iter().cloned().collect()
}

/// Results of checking the additive bi-Lipschitz guarantee and the `8r`
/// inclusion on sampled pairs.
#[derive(Clone, Debug, Default)]
pub struct GuaranteeReport {
    pub pairs: usize,
    pub upper_violations: usize,
    pub lower_violations: usize,
    /// `max ‖H(x)−H(y)‖ / ‖x−y‖`.
    pub lipschitz: f64,
    /// Smallest `‖H(x)−H(y)‖ − (½‖x−y‖ − 3/2 d(x,C) − 3/2 d(y,C))`.
    pub min_lower_slack: f64,
    pub inclusion_pairs: usize,
    pub inclusion_violations: usize,
    /// Per pair `(lower_slack, upper_slack)`.
    pub slacks: Vec<(f64, f64)>,
}

impl GuaranteeReport {
    pub fn write_csv(&self, out: &mut dyn std::io::Write) -> Result<()> {
        writeln!(out, "pair,lower_slack,upper_slack")?;
        for (t, (lo, hi)) in self.slacks.iter().enumerate() {
            writeln!(out, "{t},{lo:e},{hi:e}")?;
        }
        Ok(())
    }
}

/// Checks `½‖x−y‖ − 3/2 d(x,C) − 3/2 d(y,C) ≤ ‖H(x)−H(y)‖ ≤ ‖x−y‖` for each
/// pair, and for pairs inside `B(C, r)` whose images are within `r`, that
/// `‖x − y‖ ≤ 8r`.
pub fn reduce_map_guarantee(map: &ReducedMap, anchors: &PointSet, pairs: &[(Vec<f64>, Vec<f64>)], r: f64) -> Result<GuaranteeReport> {
    let src = anchors.space();
    let img = map.image_space();
    let dist_c = |x: &[f64]| (0..anchors.len()).map(|i| anchors.dist_to(i, x)).fold(f64::INFINITY, f64::min);
    let mut rep = GuaranteeReport { min_lower_slack: f64::INFINITY, ..Default::default() };
    for (x, y) in pairs {
        let hx = map.query(x)?;
        let hy = map.query(y)?;
        let d = src.dist(x, y);
        let dh = img.dist(&hx, &hy);
        let (dx, dy) = (dist_c(x), dist_c(y));
        let lower = 0.5 * d - 1.5 * dx - 1.5 * dy;
        let lo_slack = dh - lower;
        let hi_slack = d - dh;
        rep.pairs += 1;
        if hi_slack < -QUERY_TOLERANCE {
            rep.upper_violations += 1;
        }
        if lo_slack < -4.0 * QUERY_TOLERANCE {
            rep.lower_violations += 1;
        }
        if d > 0.0 {
            rep.lipschitz = rep.lipschitz.max(dh / d);
        }
        rep.min_lower_slack = rep.min_lower_slack.min(lo_slack);
        rep.slacks.push((lo_slack, hi_slack));
        if dx <= r && dy <= r && dh <= r {
            rep.inclusion_pairs += 1;
            if d > 8.0 * r {
                rep.inclusion_violations += 1;
            }
        }
    }
    Ok(rep)
}

/// Samples points `a + ρu` around anchors with `ρ ≤ r`, `u` uniform on the
/// unit sphere.
pub fn sample_near(anchors: &PointSet, r: f64, count: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let space = anchors.space();
    (0..count)
        .map(|_| {
            let a = rng.random_range(0..anchors.len());
            let u = crate::metric::sphere_direction(space, rng);
            let rho = r * rng.random::<f64>();
            anchors.point(a).iter().zip(&u).map(|(x, v)| x + rho * v).collect()
        })
        .collect()
}

/// Shared handle used by the pipeline.
pub type SharedMap = Arc<ReducedMap>;
