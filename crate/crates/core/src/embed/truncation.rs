//! The truncation map `G_Δ`: a random-feature realization of the Gaussian
//! kernel helix, rescaled so every image has norm exactly `Δ`.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{domain, Result};
use crate::rng::Rng;

pub const MIN_FEATURES: usize = 64;

/// `Δ √(1 − exp(−d²/(2Δ²)))`, the distance between exact kernel images of
/// two points at distance `d`.
pub fn exact_kernel_distance(d: f64, delta: f64) -> f64 {
    let t = d / delta;
    delta * (-(-0.5 * t * t).exp_m1()).sqrt()
}

/// `G(x) = (Δ/√2)(z(x/Δ) ⊕ 1)` where `z` stacks `cos(ω·u)/√F, sin(ω·u)/√F`
/// over `F` frequencies. Frequencies come in orthogonal blocks with
/// independent chi-distributed lengths.
#[derive(Clone, Debug)]
pub struct TruncationMap {
    pub delta: f64,
    pub features: usize,
    input_dim: usize,
    /// Row-major `F × input_dim`.
    omega: Vec<f64>,
    lipschitz: f64,
}

pub fn truncation_map(input_dim: usize, delta: f64, features: usize, rng: &mut Rng) -> Result<TruncationMap> {
    if features < MIN_FEATURES {
        return domain(format!("feature count {features} is below the minimum {MIN_FEATURES}"));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return domain(format!("scale {delta} must be positive"));
    }
    if input_dim == 0 {
        return domain("input dimension must be positive");
    }
    let m = input_dim;
    let mut omega = Vec::with_capacity(features * m);
    while omega.len() < features * m {
        let g = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = g.qr().q();
        for r in 0..m {
            if omega.len() == features * m {
                break;
            }
            let len = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum::<f64>().sqrt();
            omega.extend((0..m).map(|c| q[(r, c)] * len));
        }
    }
    // ‖z(u)−z(v)‖² ≤ (1/F) Σ (ω·(u−v))², so G is √(λ_max/2)-Lipschitz.
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for row in omega.chunks(m) {
        for a in 0..m {
            for b in 0..m {
                gram[(a, b)] += row[a] * row[b];
            }
        }
    }
    gram /= features as f64;
    let lambda = gram.symmetric_eigenvalues().iter().cloned().fold(0.0f64, f64::max);
    Ok(TruncationMap { delta, features, input_dim, omega, lipschitz: (lambda / 2.0).sqrt() })
}

impl TruncationMap {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        2 * self.features + 1
    }

    /// Certified Lipschitz constant of the realized map.
    pub fn lipschitz_witness(&self) -> f64 {
        self.lipschitz
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim()];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.input_dim, "input dimension mismatch");
        let m = self.input_dim;
        let amp = self.delta / (2.0 * self.features as f64).sqrt();
        for (j, row) in self.omega.chunks(m).enumerate() {
            let a = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() / self.delta;
            let (s, c) = a.sin_cos();
            out[2 * j] = amp * c;
            out[2 * j + 1] = amp * s;
        }
        out[2 * self.features] = self.delta * std::f64::consts::FRAC_1_SQRT_2;
    }

    pub fn exact_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        exact_kernel_distance(super::euclid(x, y), self.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::euclid;
    use crate::rng::from_seed;

    #[test]
    fn exact_kernel_bounds_on_grid() {
        let delta = 1.7;
        for k in 0..=10_000 {
            let t = k as f64 * 0.001;
            let d = t * delta;
            let g = exact_kernel_distance(d, delta);
            let m = delta.min(d);
            assert!(g <= m * (1.0 + 1e-15), "t = {t}");
            assert!(g >= 0.5 * m, "t = {t}");
        }
        // At t = 1 the value is √(1 − e^{−1/2}) ≈ 0.6273.
        assert!((exact_kernel_distance(1.0, 1.0) - 0.627_271_345_023_321_3).abs() < 1e-12);
    }

    #[test]
    fn norms_and_identity() {
        let mut rng = from_seed(3);
        let g = truncation_map(5, 2.0, 128, &mut rng).unwrap();
        let x = [0.3, -1.0, 2.0, 0.0, 4.0];
        let gx = g.apply(&x);
        let norm = gx.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 2.0).abs() < 1e-12);
        assert_eq!(euclid(&gx, &g.apply(&x)), 0.0);
        assert!(g.lipschitz_witness() < 1.0);
        assert!(truncation_map(5, 2.0, 63, &mut rng).is_err());
    }

    #[test]
    fn features_track_the_kernel() {
        let mut rng = from_seed(11);
        let m = 8;
        let delta = 1.0;
        let g = truncation_map(m, delta, 1024, &mut rng).unwrap();
        let mut worst = 0.0f64;
        for _ in 0..500 {
            let x: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let dir: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let nd = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let t = 0.2 + 3.8 * rng.random::<f64>();
            let y: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * delta * b / nd).collect();
            let got = euclid(&g.apply(&x), &g.apply(&y));
            let want = g.exact_distance(&x, &y);
            worst = worst.max((got - want).abs() / want);
            assert!(got <= g.lipschitz_witness() * euclid(&x, &y) * (1.0 + 1e-12));
        }
        assert!(worst <= 0.05, "relative error {worst}");
    }
}
