use crate::error::{domain, Result};

/// Weighted coordinate space `ℓ_p(w)` shared by the points of a set.
#[derive(Clone, Debug, PartialEq)]
pub struct Space {
    pub p: f64,
    pub weights: Vec<f64>,
    uniform: Option<f64>,
    int_p: Option<i32>,
}

impl Space {
    pub fn new(p: f64, weights: Vec<f64>) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return domain(format!("exponent p = {p} must be a finite value >= 1"));
        }
        if weights.is_empty() {
            return domain("weight vector is empty");
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return domain("weights must be positive and finite");
        }
        Ok(Self::build(p, weights))
    }

    /// Uniform probability weights `1/dim`.
    pub fn uniform(p: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return domain("dimension must be positive");
        }
        Self::new(p, vec![1.0 / dim as f64; dim])
    }

    fn build(p: f64, weights: Vec<f64>) -> Self {
        let first = weights[0];
        let uniform = weights.iter().all(|w| *w == first).then_some(first);
        let int_p = (p.fract() == 0.0 && p <= 32.0).then_some(p as i32);
        Self { p, weights, uniform, int_p }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn with_p(&self, q: f64) -> Result<Self> {
        Self::new(q, self.weights.clone())
    }

    #[inline]
    pub fn pow_abs(&self, x: f64) -> f64 {
        pow_abs(x, self.p, self.int_p)
    }

    /// `Σ w_k |a_k - b_k|^p`.
    #[inline]
    pub fn dist_pow(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match (self.uniform, self.int_p) {
            (Some(w), Some(2)) => w * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>(),
            (Some(w), Some(4)) => {
                w * a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| {
                        let d = (x - y) * (x - y);
                        d * d
                    })
                    .sum::<f64>()
            }
            (Some(w), _) => w * a.iter().zip(b).map(|(x, y)| self.pow_abs(x - y)).sum::<f64>(),
            (None, _) => a
                .iter()
                .zip(b)
                .zip(&self.weights)
                .map(|((x, y), w)| w * self.pow_abs(x - y))
                .sum(),
        }
    }

    #[inline]
    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        root(self.dist_pow(a, b), self.p)
    }

    /// `Σ w_k |a_k|^p`.
    pub fn norm_pow(&self, a: &[f64]) -> f64 {
        a.iter().zip(&self.weights).map(|(x, w)| w * self.pow_abs(*x)).sum()
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        root(self.norm_pow(a), self.p)
    }

    /// Lower bound on `d(a, b)` from a single coordinate.
    #[inline]
    pub fn coord_scale(&self, k: usize) -> f64 {
        self.weights[k].powf(1.0 / self.p)
    }
}

#[inline]
pub(crate) fn pow_abs(x: f64, p: f64, int_p: Option<i32>) -> f64 {
    let a = x.abs();
    match int_p {
        Some(1) => a,
        Some(2) => a * a,
        Some(3) => a * a * a,
        Some(4) => {
            let s = a * a;
            s * s
        }
        Some(k) => a.powi(k),
        None => a.powf(p),
    }
}

#[inline]
pub(crate) fn root(s: f64, p: f64) -> f64 {
    if p == 2.0 {
        s.sqrt()
    } else if p == 1.0 {
        s
    } else {
        s.powf(1.0 / p)
    }
}
