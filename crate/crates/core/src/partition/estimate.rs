//! Monte-Carlo separation and padding estimators.

use std::io::Write;

use rayon::prelude::*;

use super::PartitionSampler;
use crate::error::{domain, Result};
use crate::metric::SweepIndex;
use crate::stats::{wilson, wilson_half_width};

/// Per-pair separation frequencies of a sampler.
#[derive(Clone, Debug)]
pub struct SeparationReport {
    pub delta: f64,
    pub trials: u64,
    /// Point indices whose pairs were tracked.
    pub ids: Vec<usize>,
    /// Pair distances, pairs `(ids[a], ids[b])`, `a < b`, in row order.
    pub dists: Vec<f64>,
    pub counts: Vec<u32>,
    /// `max p̂(x,y)·Δ/d(x,y)`; infinite if a zero-distance pair was split.
    pub sigma_hat: f64,
    /// Pair attaining `sigma_hat`.
    pub argmax: Option<(usize, usize)>,
}

impl SeparationReport {
    pub fn pair_count(&self) -> usize {
        self.counts.len()
    }

    pub fn phat(&self, k: usize) -> f64 {
        self.counts[k] as f64 / self.trials as f64
    }

    /// Visits `(i, j, d, separations)` for every tracked pair.
    pub fn for_each_pair(&self, mut visit: impl FnMut(usize, usize, f64, u32)) {
        let mut k = 0;
        for a in 0..self.ids.len() {
            for b in a + 1..self.ids.len() {
                visit(self.ids[a], self.ids[b], self.dists[k], self.counts[k]);
                k += 1;
            }
        }
    }

    /// `max (p̂ + z·h)Δ/d` with `h` the Wilson half-width of each pair
    /// (`z` may be negative).
    pub fn sigma_shifted(&self, z: f64) -> f64 {
        let mut best = 0.0f64;
        for k in 0..self.counts.len() {
            let d = self.dists[k];
            let c = self.counts[k] as u64;
            if d == 0.0 {
                if c > 0 {
                    return f64::INFINITY;
                }
                continue;
            }
            let h = if c == 0 && z <= 0.0 { 0.0 } else { wilson_half_width(c, self.trials) };
            let v = (c as f64 / self.trials as f64 + z * h).max(0.0);
            best = best.max(v * self.delta / d);
        }
        best
    }

    /// Wilson half-width at the maximizing pair, in `σ` units.
    pub fn half_width_at_argmax(&self) -> f64 {
        let Some((i, j)) = self.argmax else { return 0.0 };
        let mut out = 0.0;
        self.for_each_pair(|a, b, d, c| {
            if a == i && b == j && d > 0.0 {
                out = wilson_half_width(c as u64, self.trials) * self.delta / d;
            }
        });
        out
    }

    /// CSV rows `i,j,dist,phat,lo,hi`.
    pub fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        writeln!(out, "i,j,dist,phat,lo,hi")?;
        let mut err = None;
        self.for_each_pair(|i, j, d, c| {
            if err.is_some() {
                return;
            }
            let (lo, hi) = wilson(c as u64, self.trials);
            let ph = c as f64 / self.trials as f64;
            if let Err(e) = writeln!(out, "{i},{j},{d:e},{ph:e},{lo:e},{hi:e}") {
                err = Some(e);
            }
        });
        match err {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }
}

pub(crate) fn chunk_ranges(total: u64) -> Vec<(u64, u64)> {
    let parts = (rayon::current_num_threads() as u64).clamp(1, total.max(1));
    let step = total.div_ceil(parts).max(1);
    (0..parts).map(|c| (c * step, ((c + 1) * step).min(total))).filter(|(a, b)| a < b).collect()
}

/// Separation frequencies over all pairs of the sampler's point set.
pub fn estimate_separation(sampler: &dyn PartitionSampler, trials: u64, seed: u64) -> Result<SeparationReport> {
    let ids: Vec<usize> = (0..sampler.points().len()).collect();
    estimate_separation_among(sampler, &ids, trials, seed)
}

/// Separation frequencies over the pairs of `ids` only.
pub fn estimate_separation_among(
    sampler: &dyn PartitionSampler,
    ids: &[usize],
    trials: u64,
    seed: u64,
) -> Result<SeparationReport> {
    if trials == 0 {
        return domain("at least one trial is needed");
    }
    let s = sampler.points();
    let m = ids.len();
    let npairs = m * m.saturating_sub(1) / 2;
    let parts: Vec<Vec<u32>> = chunk_ranges(trials)
        .into_par_iter()
        .map(|(lo, hi)| -> Result<Vec<u32>> {
            let mut counts = vec![0u32; npairs];
            let mut labels = vec![0u32; m];
            for t in lo..hi {
                let p = sampler.sample(seed, t)?;
                let a = p.assignment();
                for (k, &i) in ids.iter().enumerate() {
                    labels[k] = a[i];
                }
                let mut off = 0;
                for x in 0..m {
                    let lx = labels[x];
                    let row = &mut counts[off..off + (m - x - 1)];
                    for (c, &ly) in row.iter_mut().zip(&labels[x + 1..]) {
                        *c += (lx != ly) as u32;
                    }
                    off += m - x - 1;
                }
            }
            Ok(counts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0u32; npairs];
    for part in parts {
        for (c, v) in counts.iter_mut().zip(part) {
            *c += v;
        }
    }
    let mut dists = Vec::with_capacity(npairs);
    for a in 0..m {
        for b in a + 1..m {
            dists.push(s.d(ids[a], ids[b]));
        }
    }
    let delta = sampler.delta();
    let mut sigma_hat = 0.0f64;
    let mut argmax = None;
    let mut k = 0;
    for a in 0..m {
        for b in a + 1..m {
            let v = if counts[k] == 0 {
                0.0
            } else if dists[k] == 0.0 {
                f64::INFINITY
            } else {
                counts[k] as f64 / trials as f64 * delta / dists[k]
            };
            if v > sigma_hat {
                sigma_hat = v;
                argmax = Some((ids[a], ids[b]));
            }
            k += 1;
        }
    }
    Ok(SeparationReport { delta, trials, ids: ids.to_vec(), dists, counts, sigma_hat, argmax })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PaddingStats {
    /// Minimum over points of the empirical padding frequency.
    pub p_hat: f64,
    /// `Δ / (inner_radius · ln n)`.
    pub kappa_hat: f64,
    pub inner_radius: f64,
    pub trials: u64,
    /// Point attaining `p_hat`.
    pub worst_point: usize,
}

/// Frequency with which the ball of `inner_radius` around each point stays
/// inside that point's cluster.
pub fn estimate_padding(sampler: &dyn PartitionSampler, inner_radius: f64, trials: u64, seed: u64) -> Result<PaddingStats> {
    if trials == 0 {
        return domain("at least one trial is needed");
    }
    if !(inner_radius >= 0.0) {
        return domain(format!("inner radius {inner_radius} must be nonnegative"));
    }
    let s = sampler.points();
    let n = s.len();
    let all: Vec<usize> = (0..n).collect();
    let index = SweepIndex::new(s.coords(), s.dim(), s.space(), &all);
    let balls: Vec<Vec<usize>> = (0..n).map(|i| index.within(s.point(i), inner_radius)).collect();
    let parts: Vec<Vec<u64>> = chunk_ranges(trials)
        .into_par_iter()
        .map(|(lo, hi)| -> Result<Vec<u64>> {
            let mut padded = vec![0u64; n];
            for t in lo..hi {
                let a = sampler.sample(seed, t)?.assignment();
                for i in 0..n {
                    if balls[i].iter().all(|&j| a[j] == a[i]) {
                        padded[i] += 1;
                    }
                }
            }
            Ok(padded)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut padded = vec![0u64; n];
    for part in parts {
        for (c, v) in padded.iter_mut().zip(part) {
            *c += v;
        }
    }
    let (worst_point, &worst) = padded.iter().enumerate().min_by_key(|(_, &c)| c).unwrap_or((0, &trials));
    let ln = (n.max(2) as f64).ln();
    let kappa_hat = if inner_radius > 0.0 { sampler.delta() / (inner_radius * ln) } else { f64::INFINITY };
    Ok(PaddingStats { p_hat: worst as f64 / trials as f64, kappa_hat, inner_radius, trials, worst_point })
}

/// Smallest `κ` of the ascending grid whose inner radius `Δ/(κ ln n)` is
/// padded with probability at least `target`.
pub fn fit_padding_kappa(
    sampler: &dyn PartitionSampler,
    target: f64,
    kappas: &[f64],
    trials: u64,
    seed: u64,
) -> Result<PaddingStats> {
    let n = sampler.points().len().max(2) as f64;
    let mut last = None;
    for &k in kappas {
        let stats = estimate_padding(sampler, sampler.delta() / (k * n.ln()), trials, seed)?;
        if stats.p_hat >= target {
            return Ok(stats);
        }
        last = Some(stats);
    }
    match last {
        Some(s) => Err(crate::Error::Numerical {
            msg: format!("no kappa in the grid reaches padding probability {target}"),
            achieved: s.p_hat,
        }),
        None => domain("empty kappa grid"),
    }
}
