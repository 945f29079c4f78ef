//! Minimum enclosing ball in a weighted `ℓ_p` space.
//!
//! For `p >= 2` the problem `min_z max_i ‖z - x_i‖_p^p` is solved with a
//! log-barrier Newton method; for `1 <= p < 2` with projected subgradient
//! steps. Both report a Lagrangian lower bound so the returned radius comes
//! with a certified gap.

use nalgebra::{DMatrix, DVector};

use super::space::Space;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Certified upper bound on `radius - optimal radius`.
    pub gap: f64,
}

pub const TOLERANCE: f64 = 1e-8;
const SUBGRADIENT_ITERS: usize = 10_000;

pub fn min_enclosing_ball(pts: &[&[f64]], space: &Space) -> Result<Ball> {
    let m = space.dim();
    match pts.len() {
        0 => return Err(Error::Domain("empty point collection".into())),
        1 => {
            return Ok(Ball { center: pts[0].to_vec(), radius: 0.0, gap: 0.0 });
        }
        2 => {
            let center: Vec<f64> = pts[0].iter().zip(pts[1]).map(|(a, b)| 0.5 * (a + b)).collect();
            let radius = space.dist(&center, pts[0]).max(space.dist(&center, pts[1]));
            return Ok(Ball { center, radius, gap: radius - 0.5 * space.dist(pts[0], pts[1]) });
        }
        _ => {}
    }
    let n = pts.len() as f64;
    let mut c0 = vec![0.0; m];
    for x in pts {
        for (c, v) in c0.iter_mut().zip(x.iter()) {
            *c += v / n;
        }
    }
    let scale = pts.iter().map(|x| space.dist(x, &c0)).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(Ball { center: c0, radius: 0.0, gap: 0.0 });
    }
    let ys: Vec<Vec<f64>> =
        pts.iter().map(|x| x.iter().zip(&c0).map(|(a, c)| (a - c) / scale).collect()).collect();
    let (z, lambda) =
        if space.p >= 2.0 { barrier(&ys, space) } else { subgradient(&ys, space) };
    let lambda = polish_dual(&ys, lambda, space);
    let (bound, z_dual) = lagrangian_bound(&ys, &lambda, space);
    // The Lagrangian minimizer is a second candidate; it sits exactly on flat
    // directions where the barrier iterate creeps.
    let value = |z: &[f64]| ys.iter().map(|y| space.dist_pow(z, y)).fold(0.0, f64::max);
    let (z, upper) = {
        let (a, b) = (value(&z), value(&z_dual));
        if b < a { (z_dual, b) } else { (z, a) }
    };
    let lower = bound.min(upper);
    let p = space.p;
    let gap = (upper.powf(1.0 / p) - lower.max(0.0).powf(1.0 / p)) * scale;
    let center: Vec<f64> = z.iter().zip(&c0).map(|(v, c)| c + v * scale).collect();
    let radius = pts.iter().map(|x| space.dist(x, &center)).fold(0.0, f64::max);
    if gap > TOLERANCE * scale.max(1.0) {
        return Err(Error::Numerical {
            msg: "enclosing-ball solver did not reach tolerance".into(),
            achieved: gap,
        });
    }
    Ok(Ball { center, radius, gap })
}

/// `min_z Σ_i λ_i ‖z - y_i‖_p^p`, a lower bound on `min_z max_i ‖z - y_i‖_p^p`,
/// and its minimizer.
fn lagrangian_bound(ys: &[Vec<f64>], lambda: &[f64], space: &Space) -> (f64, Vec<f64>) {
    let p = space.p;
    let m = space.dim();
    let mut total = 0.0;
    let mut arg = vec![0.0; m];
    for k in 0..m {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for y in ys {
            lo = lo.min(y[k]);
            hi = hi.max(y[k]);
        }
        let slope = |z: f64| -> f64 {
            ys.iter()
                .zip(lambda)
                .map(|(y, l)| {
                    let d = z - y[k];
                    l * d.signum() * d.abs().powf(p - 1.0)
                })
                .sum()
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let z = 0.5 * (lo + hi);
        let v: f64 = ys.iter().zip(lambda).map(|(y, l)| l * space.pow_abs(z - y[k])).sum();
        total += space.weights[k] * v;
        arg[k] = z;
    }
    (total, arg)
}

/// Newton ascent on the concave dual `g(λ) = min_z Σ_i λ_i f_i(z)` over the
/// simplex. The inner minimizer is separable, so `∇²g = -J H⁻¹ Jᵀ` with `H`
/// diagonal and `J` the rows `∇f_i(z(λ))`.
fn polish_dual(ys: &[Vec<f64>], mut lambda: Vec<f64>, space: &Space) -> Vec<f64> {
    let n = ys.len();
    let m = space.dim();
    let p = space.p;
    let w = &space.weights;
    let (mut value, mut z) = lagrangian_bound(ys, &lambda, space);
    for _ in 0..50 {
        let mut jac = DMatrix::<f64>::zeros(n, m);
        let mut grad = DVector::<f64>::zeros(n);
        let mut hinv = vec![0.0; m];
        for (i, y) in ys.iter().enumerate() {
            grad[i] = space.dist_pow(&z, y);
            for k in 0..m {
                let d = z[k] - y[k];
                jac[(i, k)] = p * w[k] * d.signum() * d.abs().powf(p - 1.0);
            }
        }
        for k in 0..m {
            let h: f64 = ys
                .iter()
                .zip(&lambda)
                .map(|(y, l)| l * p * (p - 1.0) * w[k] * (z[k] - y[k]).abs().powf(p - 2.0))
                .sum();
            hinv[k] = if h.is_finite() && h > 0.0 { 1.0 / h } else { 0.0 };
        }
        // Maximize the quadratic model on `Σ d = 0`, restricted to the free
        // coordinates (those away from the boundary or pushed inward).
        let free: Vec<usize> = (0..n).filter(|&i| lambda[i] > 1e-14).collect();
        let r = free.len();
        if r < 2 {
            break;
        }
        let mut kkt = DMatrix::<f64>::zeros(r + 1, r + 1);
        let mut rhs = DVector::<f64>::zeros(r + 1);
        let scale = (0..m).map(|k| hinv[k]).fold(0.0, f64::max).max(1e-300);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                let q: f64 = (0..m).map(|k| jac[(i, k)] * hinv[k] * jac[(j, k)]).sum();
                kkt[(a, b)] = q;
            }
            kkt[(a, a)] += 1e-12 * scale;
            kkt[(a, r)] = 1.0;
            kkt[(r, a)] = 1.0;
            rhs[a] = grad[i];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { break };
        let mut max_alpha: f64 = 1.0;
        for (a, &i) in free.iter().enumerate() {
            if sol[a] < 0.0 {
                max_alpha = max_alpha.min(-lambda[i] / sol[a]);
            }
        }
        let mut alpha = max_alpha;
        let mut improved = false;
        for _ in 0..40 {
            let mut cand = lambda.clone();
            for (a, &i) in free.iter().enumerate() {
                cand[i] = (cand[i] + alpha * sol[a]).max(0.0);
            }
            let total: f64 = cand.iter().sum();
            cand.iter_mut().for_each(|l| *l /= total);
            let (v, zc) = lagrangian_bound(ys, &cand, space);
            if v > value {
                improved = v - value > 1e-16 * value.abs();
                lambda = cand;
                value = v;
                z = zc;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    lambda
}

fn barrier(ys: &[Vec<f64>], space: &Space) -> (Vec<f64>, Vec<f64>) {
    let m = space.dim();
    let n = ys.len();
    let p = space.p;
    let w = &space.weights;
    let fvals = |z: &[f64]| -> Vec<f64> { ys.iter().map(|y| space.dist_pow(z, y)).collect() };
    let mut z = vec![0.0; m];
    let f0 = fvals(&z);
    let mut t = 2.0 * f0.iter().fold(0.0f64, |a, b| a.max(*b)) + 1e-2;
    let mut tau = 1.0;
    let mut grads = vec![0.0; n * m];
    let mut hdiag = vec![0.0; n * m];
    // Change of `τt − Σ ln(t − f_i(z))` from `(z, t)` to `(zn, tn)`, formed
    // from differences so large `τt` does not swamp small improvements.
    let change = |f: &[f64], t: f64, zn: &[f64], tn: f64, tau: f64| -> f64 {
        let mut acc = tau * (tn - t);
        for (y, fi) in ys.iter().zip(f) {
            let sn = tn - space.dist_pow(zn, y);
            if sn <= 0.0 {
                return f64::INFINITY;
            }
            acc -= (sn / (t - fi)).ln();
        }
        acc
    };
    for _outer in 0..60 {
        for _newton in 0..100 {
            let f = fvals(&z);
            for (i, y) in ys.iter().enumerate() {
                for k in 0..m {
                    let d = z[k] - y[k];
                    let a = d.abs();
                    grads[i * m + k] = p * w[k] * d.signum() * a.powf(p - 1.0);
                    hdiag[i * m + k] = p * (p - 1.0) * w[k] * a.powf(p - 2.0);
                }
            }
            let dimv = m + 1;
            let mut h = DMatrix::<f64>::zeros(dimv, dimv);
            let mut g = DVector::<f64>::zeros(dimv);
            g[m] = tau;
            for i in 0..n {
                let s = t - f[i];
                let inv = 1.0 / s;
                let inv2 = inv * inv;
                let gi = &grads[i * m..(i + 1) * m];
                for a in 0..m {
                    g[a] += gi[a] * inv;
                    h[(a, a)] += hdiag[i * m + a] * inv;
                    for b in 0..=a {
                        h[(a, b)] += gi[a] * gi[b] * inv2;
                    }
                    h[(m, a)] -= gi[a] * inv2;
                }
                g[m] -= inv;
                h[(m, m)] += inv2;
            }
            for a in 0..dimv {
                for b in 0..a {
                    h[(b, a)] = h[(a, b)];
                }
            }
            let step = solve_spd(h, &g);
            let decrement = -g.dot(&step);
            if !(decrement > 1e-14) {
                break;
            }
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let zn: Vec<f64> = (0..m).map(|k| z[k] + alpha * step[k]).collect();
                let tn = t + alpha * step[m];
                let val = change(&f, t, &zn, tn, tau);
                if val.is_finite() && val <= -0.25 * alpha * decrement {
                    z = zn;
                    t = tn;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved || decrement < 1e-12 {
                break;
            }
        }
        if (n as f64) / tau < 1e-11 {
            break;
        }
        tau *= 8.0;
    }
    let f = fvals(&z);
    let mut lambda: Vec<f64> = f.iter().map(|fi| 1.0 / (t - fi).max(1e-300)).collect();
    let total: f64 = lambda.iter().sum();
    lambda.iter_mut().for_each(|l| *l /= total);
    (z, lambda)
}

fn solve_spd(mut h: DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let dimv = h.nrows();
    let scale = (0..dimv).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut jitter = 0.0;
    for _ in 0..12 {
        let mut hj = h.clone();
        for i in 0..dimv {
            hj[(i, i)] += jitter;
        }
        if let Some(ch) = hj.cholesky() {
            return -ch.solve(g);
        }
        jitter = if jitter == 0.0 { 1e-14 * scale } else { jitter * 100.0 };
    }
    for i in 0..dimv {
        h[(i, i)] += scale;
    }
    -h.lu().solve(g).unwrap_or_else(|| g.clone())
}

fn subgradient(ys: &[Vec<f64>], space: &Space) -> (Vec<f64>, Vec<f64>) {
    let m = space.dim();
    let n = ys.len();
    let p = space.p;
    let mut z = vec![0.0; m];
    let mut best = z.clone();
    let mut best_val = f64::INFINITY;
    let mut lambda = vec![0.0; n];
    for it in 1..=SUBGRADIENT_ITERS {
        let (imax, fmax) = ys
            .iter()
            .enumerate()
            .map(|(i, y)| (i, space.dist(&z, y)))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        if fmax < best_val {
            best_val = fmax;
            best.clone_from(&z);
        }
        let step = 0.5 / (it as f64).sqrt();
        lambda[imax] += step;
        let y = &ys[imax];
        let mut g: Vec<f64> = (0..m)
            .map(|k| {
                let d = z[k] - y[k];
                space.weights[k] * d.signum() * d.abs().powf(p - 1.0)
            })
            .collect();
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn == 0.0 {
            break;
        }
        g.iter_mut().for_each(|v| *v /= gn);
        for k in 0..m {
            z[k] -= step * g[k];
        }
    }
    let total: f64 = lambda.iter().sum();
    if total > 0.0 {
        lambda.iter_mut().for_each(|l| *l /= total);
    }
    (best, lambda)
}
