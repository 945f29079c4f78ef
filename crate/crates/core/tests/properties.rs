use std::sync::Arc;

use proptest::prelude::*;

use metriclab::compose::{induct_scales, BallCarving, TraceMode};
use metriclab::embed::{bourgain_embed_with, exact_kernel_distance};
use metriclab::mazur::{
    empirical_mazur_lipschitz, mazur, mazur_coords, pointwise_inequality_slack, radial_inclusion_check,
    radial_inclusion_radius, MazurParams,
};
use metriclab::metric::{
    diameter, distance_matrix, greedy_net, growth_centers, radius, sphere_direction, AmbientMode, PointSet, Space,
    WeightedVector,
};
use metriclab::oracle::exact_sep;
use metriclab::partition::{
    estimate_separation, BoundMode, CenterChoice, CkrSampler, PartitionSampler, Reinterpreted,
};
use metriclab::reduce::{jl_anchor_map, jl_dimension, C_JL};
use metriclab::report::provenance_header;
use metriclab::rng::from_seed;

fn point_set(p: f64, rows: Vec<Vec<f64>>) -> PointSet {
    let dim = rows[0].len();
    PointSet::new(Space::uniform(p, dim).unwrap(), rows, None).unwrap()
}

fn rows_strategy(n: std::ops::Range<usize>, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, dim), n)
}

fn p_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![Just(2.0), Just(2.5), Just(3.0), Just(4.0), Just(6.0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn radius_and_diameter_bracket(rows in rows_strategy(1..9, 3), p in p_strategy()) {
        let s = point_set(p, rows);
        let all: Vec<usize> = (0..s.len()).collect();
        let diam = diameter(&all, &s).unwrap();
        let within = radius(&all, &s, AmbientMode::WithinSet).unwrap();
        prop_assert!(within <= diam && diam <= 2.0 * within);
        let cont = radius(&all, &s, AmbientMode::ContinuousLp).unwrap();
        prop_assert!(cont <= diam + 1e-6 && diam <= 2.0 * cont + 1e-6);
    }

    #[test]
    fn growth_centers_are_monotone(
        rows in rows_strategy(2..24, 2),
        r in 0.0f64..1.0,
        dr in 0.0f64..0.5,
        gap in 0.0f64..2.0,
        shrink in 0.0f64..0.5,
        k in 1.0f64..4.0,
        dk in 0.0f64..2.0,
    ) {
        let s = point_set(2.0, rows);
        let big_r = r + dr + gap;
        // r ≤ r′ ≤ R′ ≤ R and K ≤ K′.
        let r2 = r + dr;
        let big_r2 = (big_r - shrink).max(r2);
        let a = growth_centers(&s, r, big_r, k).unwrap();
        let b = growth_centers(&s, r2, big_r2, k + dk).unwrap();
        prop_assert!(a.indices.iter().all(|i| b.indices.contains(i)));
    }

    #[test]
    fn greedy_nets_are_separated_and_dense(rows in rows_strategy(1..40, 3), r in 0.05f64..2.0) {
        let s = point_set(3.0, rows);
        let net = greedy_net(&s, r).unwrap();
        for (a, &i) in net.iter().enumerate() {
            for &j in &net[a + 1..] {
                prop_assert!(s.d(i, j) > r);
            }
        }
        for x in 0..s.len() {
            prop_assert!(net.iter().any(|&c| s.d(x, c) <= r));
        }
    }

    #[test]
    fn distance_matrix_is_a_metric(rows in rows_strategy(3..12, 4), p in p_strategy()) {
        let s = point_set(p, rows);
        let n = s.len();
        let m = distance_matrix(&s);
        for i in 0..n {
            prop_assert_eq!(m[i * n + i], 0.0);
            for j in 0..n {
                prop_assert_eq!(m[i * n + j], m[j * n + i]);
                for k in 0..n {
                    prop_assert!(m[i * n + k] <= m[i * n + j] + m[j * n + k] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn pointwise_inequality_on_grid(
        iu in -300i32..=300,
        iv in -300i32..=300,
        pi in 0usize..6,
        half in any::<bool>(),
        li in 0usize..3,
    ) {
        let p = [2.0, 2.5, 3.0, 4.0, 6.0, 10.0][pi];
        let alpha = if half { 0.5 / p } else { 1.0 / p };
        let lambda = [0.25, 0.5, 0.75][li];
        let s = pointwise_inequality_slack(iu as f64 / 100.0, iv as f64 / 100.0, alpha, lambda, p).unwrap();
        prop_assert!(s >= -1e-12);
    }

    #[test]
    fn mazur_norm_and_homogeneity(seed in any::<u64>(), p in p_strategy(), t in -5.0f64..5.0) {
        let sp = Space::uniform(p, 6).unwrap();
        let mut rng = from_seed(seed);
        let u = sphere_direction(&sp, &mut rng);
        let x = WeightedVector::uniform(u.clone(), p).unwrap();
        let y = mazur(&x, 2.0).unwrap();
        prop_assert!((y.norm() - 1.0).abs() <= 1e-12);
        prop_assume!(t.abs() > 1e-3);
        let mx = mazur_coords(&u, p, 2.0);
        let tx: Vec<f64> = u.iter().map(|v| t * v).collect();
        let mtx = mazur_coords(&tx, p, 2.0);
        let f = t.abs().powf(p / 2.0) * t.signum();
        for (a, b) in mtx.iter().zip(&mx) {
            prop_assert!((a - f * b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn radial_inclusion_holds(seed in any::<u64>(), p in p_strategy(), rho in 0.0f64..1.0, frac in 0.0f64..1.0) {
        let params = MazurParams::standard(p).unwrap();
        let r = radial_inclusion_radius(&params).unwrap();
        let sp = Space::uniform(p, 5).unwrap();
        let s2 = Space::uniform(2.0, 5).unwrap();
        let mut rng = from_seed(seed);
        let x: Vec<f64> = sphere_direction(&sp, &mut rng).into_iter().map(|v| rho * v).collect();
        let v = sphere_direction(&s2, &mut rng);
        let mx = mazur_coords(&x, p, 2.0);
        let w: Vec<f64> = mx.iter().zip(&v).map(|(a, b)| a + frac * r * (1.0 - 1e-12) * b).collect();
        let c = radial_inclusion_check(
            &WeightedVector::uniform(x, p).unwrap(),
            &WeightedVector::uniform(w, 2.0).unwrap(),
            &params,
        ).unwrap();
        prop_assert!(c.holds && c.margin >= -1e-9);
    }

    #[test]
    fn mazur_lipschitz_on_the_ball(seed in any::<u64>(), p in p_strategy(), eps in 1e-6f64..1.0) {
        let sp = Space::uniform(p, 4).unwrap();
        let mut rng = from_seed(seed);
        let a: Vec<f64> = sphere_direction(&sp, &mut rng).into_iter().map(|v| 0.99 * v).collect();
        let dir = sphere_direction(&sp, &mut rng);
        let mut b: Vec<f64> = a.iter().zip(&dir).map(|(x, d)| x + eps * d).collect();
        let nb = sp.norm(&b);
        if nb > 1.0 {
            b.iter_mut().for_each(|v| *v /= nb);
        }
        prop_assert!(empirical_mazur_lipschitz(&sp, &[(a, b)]) <= p);
    }

    #[test]
    fn samplers_are_valid_and_deterministic(rows in rows_strategy(2..30, 2), frac in 0.05f64..1.5, index in 0u64..1000) {
        let s = Arc::new(point_set(2.0, rows));
        let all: Vec<usize> = (0..s.len()).collect();
        let diam = diameter(&all, &s).unwrap();
        prop_assume!(diam > 0.0);
        for choice in [CenterChoice::Net, CenterChoice::AllPoints] {
            let ckr = CkrSampler::new(s.clone(), frac * diam, choice).unwrap();
            let a = ckr.sample(11, index).unwrap();
            a.validate(&s).unwrap();
            prop_assert_eq!(a.to_json(), ckr.sample(11, index).unwrap().to_json());
        }
    }

    #[test]
    fn radial_estimate_is_below_the_diameter_reading(rows in rows_strategy(2..20, 2), frac in 0.1f64..1.0) {
        let s = Arc::new(point_set(3.0, rows));
        let all: Vec<usize> = (0..s.len()).collect();
        let diam = diameter(&all, &s).unwrap();
        prop_assume!(diam > 0.0);
        let sampler = induct_scales(
            Arc::new(BallCarving { centers: CenterChoice::AllPoints }),
            s.clone(),
            frac * diam,
            1.25,
            TraceMode::Ball,
        ).unwrap();
        let radial = estimate_separation(&sampler, 40, 3).unwrap();
        let as_diam = Reinterpreted { inner: &sampler, delta: 2.0 * frac * diam, mode: BoundMode::DiameterBounded };
        let diam_est = estimate_separation(&as_diam, 40, 3).unwrap();
        prop_assert!(radial.sigma_hat <= diam_est.sigma_hat * (1.0 + 1e-12));
    }

    #[test]
    fn refinement_never_merges(rows in rows_strategy(2..30, 2), frac in 0.05f64..0.8, index in 0u64..100) {
        let s = Arc::new(point_set(2.0, rows));
        let all: Vec<usize> = (0..s.len()).collect();
        let diam = diameter(&all, &s).unwrap();
        prop_assume!(diam > 0.0);
        let sampler = induct_scales(
            Arc::new(BallCarving { centers: CenterChoice::Net }),
            s.clone(),
            frac * diam,
            1.25,
            TraceMode::Cluster,
        ).unwrap();
        let ladder = sampler.sample_ladder(5, index).unwrap();
        for w in ladder.windows(2) {
            prop_assert!(w[1].len() >= w[0].len());
            let up = w[0].assignment();
            let here = w[1].assignment();
            for i in 0..s.len() {
                for j in 0..s.len() {
                    if here[i] == here[j] {
                        prop_assert_eq!(up[i], up[j]);
                    }
                }
            }
            w[1].validate(&s).unwrap();
        }
    }

    #[test]
    fn bourgain_is_one_lipschitz(rows in rows_strategy(2..24, 3), seed in any::<u64>()) {
        let s = Arc::new(point_set(4.0, rows));
        let mut rng = from_seed(seed);
        let map = bourgain_embed_with(s, 8, &mut rng).unwrap();
        map.check_lipschitz(1e-12).unwrap();
    }

    #[test]
    fn kernel_distance_bounds(d in 0.0f64..50.0, delta in 0.01f64..10.0) {
        let g = exact_kernel_distance(d, delta);
        let m = d.min(delta);
        prop_assert!(g >= 0.5 * m && g <= m * (1.0 + 1e-15));
    }

    #[test]
    fn provenance_headers_are_comments(config in ".{0,40}", seed in any::<u64>()) {
        let h = provenance_header(&config, seed);
        prop_assert_eq!(h.lines().count(), 3);
        prop_assert!(h.lines().all(|l| l.starts_with("# ")));
        let seed_line = format!("# seed {seed}");
        prop_assert!(h.contains(&seed_line));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn reduced_map_is_exact_on_anchors_and_lipschitz(seed in any::<u64>(), n in 2usize..20) {
        let mut rng = from_seed(seed);
        let dim = 160;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rand::Rng::random::<f64>(&mut rng)).collect()).collect();
        let c = point_set(2.0, rows);
        let map = jl_anchor_map(&c, seed).unwrap();
        prop_assert_eq!(map.k(), jl_dimension(n));
        prop_assert!(map.k() as f64 <= C_JL * (n.max(2) as f64).ln() + 1.0);
        for i in 0..n {
            let h = map.query(c.point(i)).unwrap();
            prop_assert_eq!(h, map.anchor_image(i));
        }
        let queries = metriclab::reduce::sample_near(&c, 0.3, 6, &mut rng);
        let imgs: Vec<Vec<f64>> = queries.iter().map(|q| map.query(q).unwrap()).collect();
        let src = c.space();
        let img = map.image_space();
        for a in 0..queries.len() {
            for b in a + 1..queries.len() {
                let d = src.dist(&queries[a], &queries[b]);
                if d > 0.0 {
                    prop_assert!(img.dist(&imgs[a], &imgs[b]) <= (1.0 + 1e-5) * d);
                }
            }
            for i in 0..n {
                let d = src.dist(&queries[a], c.point(i));
                prop_assert!(img.dist(&imgs[a], &map.anchor_image(i)) <= (1.0 + 1e-5) * d);
            }
        }
    }

    #[test]
    fn oracle_per_unit_scale_is_monotone(rows in rows_strategy(2..6, 2), a in 0.05f64..3.0, b in 0.05f64..3.0) {
        let s = point_set(2.0, rows);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let x = exact_sep(&s, lo, BoundMode::DiameterBounded).unwrap().sigma_star;
        let y = exact_sep(&s, hi, BoundMode::DiameterBounded).unwrap().sigma_star;
        // A partition bounded by `lo` is also bounded by `hi`, so σ*/Δ cannot grow.
        prop_assert!(y / hi <= (x / lo) * (1.0 + 1e-9) + 1e-9, "{} at {} vs {} at {}", x, lo, y, hi);
    }

    #[test]
    fn oracle_radial_relations(rows in rows_strategy(2..6, 2), delta in 0.1f64..3.0) {
        let s = point_set(2.0, rows);
        for amb in [AmbientMode::WithinSet, AmbientMode::ContinuousLp] {
            let hat = exact_sep(&s, delta, BoundMode::RadiallyBounded(amb)).unwrap().sigma_star;
            let sep = exact_sep(&s, delta, BoundMode::DiameterBounded).unwrap().sigma_star;
            let hat_half = exact_sep(&s, delta / 2.0, BoundMode::RadiallyBounded(amb)).unwrap().sigma_star;
            prop_assert!(hat <= sep * (1.0 + 1e-9) + 1e-9);
            prop_assert!(sep <= 2.0 * hat_half * (1.0 + 1e-9) + 1e-9);
        }
    }

    #[test]
    fn monte_carlo_never_beats_the_oracle(rows in rows_strategy(2..6, 2), delta in 0.1f64..3.0, seed in any::<u64>()) {
        let s = Arc::new(point_set(2.0, rows));
        let star = exact_sep(&s, delta, BoundMode::DiameterBounded).unwrap().sigma_star;
        prop_assume!(star.is_finite());
        let ckr = CkrSampler::new(s.clone(), delta, CenterChoice::AllPoints).unwrap();
        let rep = estimate_separation(&ckr, 400, seed).unwrap();
        // The lower confidence bound at some pair must reach σ*.
        prop_assert!(rep.sigma_shifted(3.0) >= star - 1e-9, "{} vs {}", rep.sigma_shifted(3.0), star);
    }
}
