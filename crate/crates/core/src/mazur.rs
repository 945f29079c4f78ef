//! Mazur maps `M_{p→q}(c) = |c|^{p/q} sgn(c)` (coordinatewise), the scalar
//! inequality behind their radial pullback property, and the localized radial
//! map `f(x) = KΔ M_{p→2}((x - z) / (KΔ))`.

use crate::error::{domain, Error, Result};
use crate::metric::{Space, WeightedVector};

/// Coordinatewise `|c|^e sgn(c)` with `sgn(0) = 0`.
#[inline]
pub fn signed_pow(c: f64, e: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    let a = c.abs();
    let m = if e == 1.0 {
        a
    } else if e == 2.0 {
        a * a
    } else if e == 0.5 {
        a.sqrt()
    } else if e == 1.5 {
        a * a.sqrt()
    } else {
        a.powf(e)
    };
    m.copysign(c)
}

/// `M_{p→q}` on raw coordinates.
pub fn mazur_coords(c: &[f64], p: f64, q: f64) -> Vec<f64> {
    let e = p / q;
    c.iter().map(|&v| signed_pow(v, e)).collect()
}

pub fn mazur(x: &WeightedVector, q: f64) -> Result<WeightedVector> {
    if !(q > 0.0) || !q.is_finite() {
        return domain(format!("target exponent q = {q} must be positive"));
    }
    if q < 1.0 {
        return domain(format!("target exponent q = {q} must be >= 1"));
    }
    Ok(WeightedVector { coords: mazur_coords(&x.coords, x.p, q), weights: x.weights.clone(), p: q })
}

/// `M_{q→p}(M_{p→q}(x))`.
pub fn mazur_roundtrip(x: &WeightedVector, q: f64) -> Result<WeightedVector> {
    mazur(&mazur(x, q)?, x.p)
}

/// Parameters `(p, α, λ, σ)` of the shifted Mazur inclusion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MazurParams {
    pub p: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub sigma: f64,
}

impl MazurParams {
    pub fn new(p: f64, alpha: f64, lambda: f64, sigma: f64) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return domain(format!("p = {p} must be >= 2"));
        }
        if !(alpha > 0.0 && alpha <= 1.0 / p) {
            return domain(format!("alpha = {alpha} must lie in (0, 1/p]"));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return domain(format!("lambda = {lambda} must lie in (0, 1)"));
        }
        if !(sigma > 0.0 && sigma < 1.0) {
            return domain(format!("sigma = {sigma} must lie in (0, 1)"));
        }
        Ok(Self { p, alpha, lambda, sigma })
    }

    /// `α = 1/p`, `λ = σ = 1/2`.
    pub fn standard(p: f64) -> Result<Self> {
        Self::new(p, 1.0 / p, 0.5, 0.5)
    }
}

/// `RHS − LHS` of the scalar inequality
/// `||u+v|^{2/p} sgn(u+v) − α|u|^{2/p} sgn(u)|^p ≤ (1−λα)^p u² + 5v²/((1−λ)pα)`.
pub fn pointwise_inequality_slack(u: f64, v: f64, alpha: f64, lambda: f64, p: f64) -> Result<f64> {
    MazurParams::new(p, alpha, lambda, 0.5)?;
    Ok(slack_unchecked(u, v, alpha, lambda, p))
}

#[inline]
pub(crate) fn slack_unchecked(u: f64, v: f64, alpha: f64, lambda: f64, p: f64) -> f64 {
    let e = 2.0 / p;
    let inner = signed_pow(u + v, e) - alpha * signed_pow(u, e);
    let lhs = inner.abs().powf(p);
    let rhs = (1.0 - lambda * alpha).powf(p) * u * u + 5.0 * v * v / ((1.0 - lambda) * p * alpha);
    rhs - lhs
}

/// `r = sqrt(((1−λ)pα/5) ((1−σλα)^p − (1−λα)^p))`.
pub fn radial_inclusion_radius(m: &MazurParams) -> Result<f64> {
    let m = MazurParams::new(m.p, m.alpha, m.lambda, m.sigma)?;
    let gap = (1.0 - m.sigma * m.lambda * m.alpha).powf(m.p) - (1.0 - m.lambda * m.alpha).powf(m.p);
    Ok(((1.0 - m.lambda) * m.p * m.alpha / 5.0 * gap).max(0.0).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InclusionCheck {
    pub holds: bool,
    /// `(1 − σλα) − ‖M_{2→p}(w) − αx‖_p`.
    pub margin: f64,
    pub distance: f64,
}

/// Checks `‖M_{2→p}(w) − αx‖_p ≤ 1 − σλα` for `x ∈ B_{L_p}` and `w` within
/// the inclusion radius of `M_{p→2}(x)`.
pub fn radial_inclusion_check(x: &WeightedVector, w: &WeightedVector, m: &MazurParams) -> Result<InclusionCheck> {
    if x.p != m.p {
        return Err(Error::Structural(format!("x has p = {} but params have p = {}", x.p, m.p)));
    }
    if w.p != 2.0 || w.weights != x.weights {
        return Err(Error::Structural("w must live in l_2 with the weights of x".into()));
    }
    let r = radial_inclusion_radius(m)?;
    let sp = x.space();
    let s2 = w.space();
    if sp.norm(&x.coords) > 1.0 {
        return domain("x lies outside the unit ball");
    }
    let mx = mazur_coords(&x.coords, m.p, 2.0);
    if s2.dist(&w.coords, &mx) > r {
        return domain("w lies outside the inclusion radius around M(x)");
    }
    let y = mazur_coords(&w.coords, 2.0, m.p);
    let shifted: Vec<f64> = x.coords.iter().map(|c| m.alpha * c).collect();
    let distance = sp.dist(&y, &shifted);
    let bound = 1.0 - m.sigma * m.lambda * m.alpha;
    Ok(InclusionCheck { holds: distance <= bound, margin: bound - distance, distance })
}

/// Parameters of the localized radial map.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialMapSpec {
    pub z: Vec<f64>,
    pub delta: f64,
    pub p: f64,
    /// `K = 1 + 1/(4p)`.
    pub k: f64,
    /// `D = p / (Kγ)`.
    pub d: f64,
    pub gamma: f64,
}

pub const DEFAULT_GAMMA: f64 = 0.14;

impl RadialMapSpec {
    pub fn new(z: Vec<f64>, delta: f64, p: f64, gamma: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return domain(format!("scale {delta} must be positive"));
        }
        if !(p >= 2.0) {
            return domain(format!("p = {p} must be >= 2"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return domain(format!("gamma = {gamma} must lie in (0, 1)"));
        }
        let k = 1.0 + 1.0 / (4.0 * p);
        Ok(Self { z, delta, p, k, d: p / (k * gamma), gamma })
    }
}

/// `f(x) = KΔ M_{p→2}((x − z)/(KΔ))` and its inverse `z + KΔ M_{2→p}(w/(KΔ))`.
#[derive(Clone, Debug)]
pub struct LocalizedRadialMap {
    pub spec: RadialMapSpec,
    scale: f64,
}

pub fn localized_radial_map(spec: RadialMapSpec) -> Result<LocalizedRadialMap> {
    let spec = RadialMapSpec::new(spec.z, spec.delta, spec.p, spec.gamma)?;
    let scale = spec.k * spec.delta;
    Ok(LocalizedRadialMap { spec, scale })
}

impl LocalizedRadialMap {
    /// Radius `KΔ` of the ball on which the map is used.
    pub fn domain_radius(&self) -> f64 {
        self.scale
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let e = self.spec.p / 2.0;
        x.iter().zip(&self.spec.z).map(|(a, z)| self.scale * signed_pow((a - z) / self.scale, e)).collect()
    }

    pub fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        let e = self.spec.p / 2.0;
        for ((o, a), z) in out.iter_mut().zip(x).zip(&self.spec.z) {
            *o = self.scale * signed_pow((a - z) / self.scale, e);
        }
    }

    pub fn inverse(&self, w: &[f64]) -> Vec<f64> {
        let e = 2.0 / self.spec.p;
        w.iter().zip(&self.spec.z).map(|(b, z)| z + self.scale * signed_pow(b / self.scale, e)).collect()
    }

    /// Center `z + (x − z)/p` of the `ℓ_p` ball of radius `(1 − 1/(4p))KΔ`
    /// containing the preimage of `B_2(f(x), γKΔ)`.
    pub fn witness_center(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.spec.z).map(|(a, z)| z + (a - z) / self.spec.p).collect()
    }

    /// Radius `(1 − 1/(4p))KΔ` of the pullback balls.
    pub fn pullback_radius(&self) -> f64 {
        (1.0 - 1.0 / (4.0 * self.spec.p)) * self.scale
    }

    /// Lipschitz budget of `f` used for normalization.
    pub fn lipschitz_budget(&self) -> f64 {
        self.spec.p
    }
}

/// Largest ratio `‖M_{p→2}(a) − M_{p→2}(b)‖_2 / ‖a − b‖_p` over the given pairs.
pub fn empirical_mazur_lipschitz(space: &Space, pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let s2 = Space::new(2.0, space.weights.clone()).expect("same weights");
    let mut worst = 0.0f64;
    for (a, b) in pairs {
        let d = space.dist(a, b);
        if d > 0.0 {
            let ma = mazur_coords(a, space.p, 2.0);
            let mb = mazur_coords(b, space.p, 2.0);
            worst = worst.max(s2.dist(&ma, &mb) / d);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::sphere_direction;
    use crate::rng::from_seed;
    use rand::Rng as _;

    fn rand_vec(m: usize, p: f64, seed: u64) -> WeightedVector {
        let mut rng = from_seed(seed);
        WeightedVector::uniform((0..m).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect(), p).unwrap()
    }

    #[test]
    fn identity_when_q_equals_p() {
        let x = rand_vec(6, 3.0, 1);
        assert_eq!(mazur(&x, 3.0).unwrap().coords, x.coords);
        assert_eq!(mazur_roundtrip(&x, 3.0).unwrap().coords, x.coords);
    }

    #[test]
    fn constant_four_maps_to_sixteen() {
        let x = WeightedVector::uniform(vec![4.0; 3], 4.0).unwrap();
        assert_eq!(mazur(&x, 2.0).unwrap().coords, vec![16.0; 3]);
    }

    #[test]
    fn invalid_target_exponent() {
        let x = rand_vec(3, 3.0, 2);
        assert!(matches!(mazur(&x, 0.0), Err(Error::Domain(_))));
        assert!(matches!(mazur(&x, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn powers_of_norms_are_preserved() {
        for seed in 0..100 {
            let x = rand_vec(8, 3.5, seed);
            let y = mazur(&x, 2.0).unwrap();
            let lhs = y.space().norm_pow(&y.coords);
            let rhs = x.space().norm_pow(&x.coords);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }
    }

    #[test]
    fn unit_sphere_norms_are_preserved() {
        let space = Space::uniform(4.0, 10).unwrap();
        let mut rng = from_seed(3);
        for _ in 0..100 {
            let u = sphere_direction(&space, &mut rng);
            let x = WeightedVector::uniform(u, 4.0).unwrap();
            let y = mazur(&x, 2.0).unwrap();
            assert!((y.norm() - x.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_and_signs() {
        let x = rand_vec(10, 3.0, 4);
        let back = mazur_roundtrip(&x, 2.0).unwrap();
        for (a, b) in x.coords.iter().zip(&back.coords) {
            assert!((a - b).abs() < 1e-10);
            assert_eq!(a.signum(), b.signum());
        }
        let z = WeightedVector::uniform(vec![0.0, -1.0], 4.0).unwrap();
        assert_eq!(mazur(&z, 2.0).unwrap().coords, vec![0.0, -1.0]);
    }

    #[test]
    fn homogeneity_is_exact() {
        let x = rand_vec(6, 4.0, 5);
        for s in [2.0f64, -3.0, 0.5] {
            let sx = WeightedVector::uniform(x.coords.iter().map(|c| s * c).collect(), 4.0).unwrap();
            let lhs = mazur(&sx, 2.0).unwrap().coords;
            let factor = s.abs().powf(2.0) * s.signum();
            let mx = mazur(&x, 2.0).unwrap().coords;
            for (a, b) in lhs.iter().zip(&mx) {
                assert!((a - factor * b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn slack_reference_values() {
        assert_eq!(pointwise_inequality_slack(0.0, 0.0, 0.5, 0.5, 2.0).unwrap(), 0.0);
        // (3/4)^2 - (1 - 1/2)^2
        let s = pointwise_inequality_slack(1.0, 0.0, 0.5, 0.5, 2.0).unwrap();
        assert!((s - 0.3125).abs() < 1e-15);
        assert!(pointwise_inequality_slack(1.0, 0.0, 0.6, 0.5, 2.0).is_err());
        assert!(pointwise_inequality_slack(1.0, 0.0, 0.5, 1.0, 2.0).is_err());
        assert!(pointwise_inequality_slack(1.0, 0.0, 0.5, 0.5, 1.5).is_err());
    }

    #[test]
    fn slack_is_nonnegative_on_coarse_grid() {
        for p in [2.0, 3.0, 4.0, 6.0, 10.0] {
            for alpha in [1.0 / p, 0.5 / p] {
                for lambda in [0.25, 0.5, 0.75] {
                    for i in -60..=60 {
                        for j in -60..=60 {
                            let s = slack_unchecked(i as f64 * 0.05, j as f64 * 0.05, alpha, lambda, p);
                            assert!(s >= -1e-12, "p={p} a={alpha} l={lambda} u={i} v={j}: {s}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn inclusion_radius_values() {
        let m = MazurParams::new(2.0, 0.5, 0.5, 0.5).unwrap();
        let r = radial_inclusion_radius(&m).unwrap();
        let by_hand = (0.1f64 * ((7.0f64 / 8.0).powi(2) - (0.75f64).powi(2))).sqrt();
        assert!((r - by_hand).abs() < 1e-15);
        assert!((r - 0.14252192813739226).abs() < 1e-12);
        let near_one = MazurParams::new(3.0, 0.2, 0.5, 1.0 - 1e-12).unwrap();
        assert!(radial_inclusion_radius(&near_one).unwrap() < 1e-5);
    }

    #[test]
    fn inclusion_holds_at_the_center_and_origin() {
        let m = MazurParams::standard(4.0).unwrap();
        let x = WeightedVector::uniform(vec![0.3, -0.5, 0.9, 0.1], 4.0).unwrap();
        let w = WeightedVector { coords: mazur_coords(&x.coords, 4.0, 2.0), weights: x.weights.clone(), p: 2.0 };
        let c = radial_inclusion_check(&x, &w, &m).unwrap();
        assert!(c.holds);
        assert!((c.distance - (1.0 - m.alpha) * x.norm()).abs() < 1e-12);
        let zero = WeightedVector::uniform(vec![0.0; 4], 4.0).unwrap();
        let r = radial_inclusion_radius(&m).unwrap();
        let w0 = WeightedVector::uniform(vec![r, 0.0, 0.0, 0.0], 2.0).unwrap();
        let c0 = radial_inclusion_check(&zero, &w0, &m).unwrap();
        assert!(c0.holds);
        let far = WeightedVector::uniform(vec![5.0, 0.0, 0.0, 0.0], 2.0).unwrap();
        assert!(matches!(radial_inclusion_check(&zero, &far, &m), Err(Error::Domain(_))));
        let big = WeightedVector::uniform(vec![3.0; 4], 4.0).unwrap();
        assert!(matches!(radial_inclusion_check(&big, &w, &m), Err(Error::Domain(_))));
    }

    #[test]
    fn radial_map_basics() {
        let z = vec![0.5, -0.25, 1.0];
        let spec = RadialMapSpec::new(z.clone(), 2.0, 4.0, DEFAULT_GAMMA).unwrap();
        assert!((spec.k - 1.0625).abs() < 1e-15);
        assert!((spec.d - 4.0 / (1.0625 * 0.14)).abs() < 1e-12);
        let f = localized_radial_map(spec).unwrap();
        assert_eq!(f.forward(&z), vec![0.0; 3]);
        let kd = f.domain_radius();
        let u = [0.3, -0.7, 0.2];
        let x: Vec<f64> = z.iter().zip(&u).map(|(a, b)| a + kd * b).collect();
        let fx = f.forward(&x);
        for (a, b) in fx.iter().zip(mazur_coords(&u, 4.0, 2.0)) {
            assert!((a - kd * b).abs() < 1e-12);
        }
        let back = f.inverse(&fx);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(RadialMapSpec::new(z, 0.0, 4.0, 0.14).is_err());
    }
}
