use proptest::prelude::*;
use rustfft::num_complex::Complex64;

use rproj::curve::{cone_distance, ConeModel, SphericalCurve};
use rproj::decoupling::{bootstrap_iterate, flat_decoupling_ratio, DataSpec, DecouplingInstance};
use rproj::field::{high_low_split, mixed_split_3d, Field, GridSpec};
use rproj::fractal::{box_dimension_estimate, cantor_stage, natural_measure, CountMethod};
use rproj::lab::project_point;
use rproj::nets::{covering_number, dyadic_pigeonhole, extract_delta_s_subset, is_delta_s_set};
use rproj::planks::{part_family, slab, Plank, Range};
use rproj::Vec3;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 32, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn frame_is_orthonormal_and_solves_the_frenet_system(theta in 0.01f64..4.4) {
        let c = SphericalCurve::light_cone();
        let f = c.frenet_frame(theta).unwrap();
        prop_assert!(f.orthonormality_defect() <= 1e-10);
        let h = 1e-5;
        let (a, b) = (c.frenet_frame(theta - h).unwrap(), c.frenet_frame(theta + h).unwrap());
        let tau = c.torsion(theta).unwrap();
        let d1 = (b.e1 - a.e1) / (2.0 * h);
        let d2 = (b.e2 - a.e2) / (2.0 * h);
        let d3 = (b.e3 - a.e3) / (2.0 * h);
        prop_assert!((d1 - f.e2).norm() <= 1e-6);
        prop_assert!((d2 + f.e1 - tau * f.e3).norm() <= 1e-6);
        prop_assert!((d3 + tau * f.e2).norm() <= 1e-6);
    }

    #[test]
    fn cone_distance_vanishes_on_the_cone_and_scales(omega in 0.0f64..6.3, r in 0.1f64..3.0, lambda in 0.1f64..10.0,
                                                      x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0) {
        let on = ConeModel::new(0.1).unwrap().point(omega, r);
        prop_assert!(cone_distance(&on) < 1e-12);
        let xi = Vec3::new(x, y, z);
        prop_assert!((cone_distance(&(lambda * xi)) - lambda * cone_distance(&xi)).abs() < 1e-9 * (1.0 + lambda));
    }

    #[test]
    fn projection_keeps_the_pythagoras_identity(theta in 0.0f64..4.4, x in -5.0f64..5.0, y in -5.0f64..5.0, z in -5.0f64..5.0) {
        let c = SphericalCurve::light_cone();
        let e1 = c.frenet_frame(theta).unwrap().e1;
        let v = Vec3::new(x, y, z);
        let p = project_point(&[x, y, z], theta, &c).unwrap();
        prop_assert!((v.norm_squared() - v.dot(&e1).powi(2) - p[0] * p[0] - p[1] * p[1]).abs() < 1e-10);
    }

    #[test]
    fn cantor_stages_nest_and_count(base in 2u64..5, mask in 1u32..16, n in 0u32..4, d in 1usize..4) {
        let digits: Vec<u64> = (0..base).filter(|i| mask & (1 << i) != 0).collect();
        prop_assume!(!digits.is_empty());
        let a = cantor_stage(base, &digits, n, d).unwrap();
        let b = cantor_stage(base, &digits, n + 1, d).unwrap();
        prop_assert!(b.refines(&a));
        prop_assert_eq!(b.len() as u64, (digits.len() as u64).pow((n + 1) * d as u32));
    }

    #[test]
    fn duplicate_scales_do_not_change_the_estimate(seed in 0u64..1000, dup in 0usize..4) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let pts: Vec<[f64; 3]> = (0..300).map(|_| [rand::Rng::random::<f64>(&mut rng), rand::Rng::random::<f64>(&mut rng), 0.0]).collect();
        let scales = [0.5, 0.25, 0.125, 0.0625];
        let mut more = scales.to_vec();
        more.insert(dup, scales[dup]);
        for m in [CountMethod::Mesh, CountMethod::Separated] {
            let a = box_dimension_estimate(&pts, &scales, m).unwrap();
            let b = box_dimension_estimate(&pts, &more, m).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn blurring_by_a_quarter_scale_costs_at_most_eight(seed in 0u64..1000, k in 2i32..6) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let delta = 2f64.powi(-k);
        let pts: Vec<[f64; 3]> = (0..200).map(|_| [rand::Rng::random::<f64>(&mut rng), rand::Rng::random::<f64>(&mut rng), 0.0]).collect();
        let q = delta / 4.0;
        let mut blurred = pts.clone();
        for p in &pts {
            for (dx, dy) in [(q, 0.0), (-q, 0.0), (0.0, q), (0.0, -q), (0.7 * q, 0.7 * q)] {
                blurred.push([p[0] + dx, p[1] + dy, 0.0]);
            }
        }
        let a = covering_number(&pts, delta).unwrap().count as f64;
        let b = covering_number(&blurred, delta).unwrap().count as f64;
        prop_assert!(b <= 8.0 * a && a <= 8.0 * b);
    }

    #[test]
    fn extracted_sets_are_certified(s in 0.1f64..0.6, n in 5u32..9) {
        let m = natural_measure(&cantor_stage(3, &[0, 2], 6, 1).unwrap()).unwrap();
        let p = extract_delta_s_subset(&m, n, s).unwrap();
        prop_assert!(p.is_separated());
        prop_assert!(is_delta_s_set(&p, s, 2.0).ok);
    }

    #[test]
    fn pigeonhole_loses_at_most_two_j(counts in proptest::collection::vec(1u64..5000, 1..60)) {
        let r = dyadic_pigeonhole(&counts).unwrap();
        prop_assert!(r.holds());
        let kept = r.value as f64 * r.members.len() as f64;
        prop_assert!(kept >= r.total as f64 / (2.0 * r.j as f64));
    }

    #[test]
    fn part_planks_tile_the_slab(theta in 0.0f64..4.4, kd in 7i32..13, k_exp in 0i32..4,
                                 u in -1.0f64..1.0, v in -1.0f64..1.0, w in -1.0f64..1.0) {
        let f = SphericalCurve::light_cone().frenet_frame(theta).unwrap();
        let delta = 2f64.powi(-kd);
        let k = 2f64.powi(k_exp);
        let parts = part_family(&f, delta, k).unwrap();
        let slab = slab(&f, delta).unwrap();
        let c = [u * delta, v, w];
        let hits = parts.iter().filter(|(_, p)| (0..3).all(|a| p.ranges[a].contains(c[a]))).count();
        let inside = (0..3).all(|a| slab.ranges[a].contains(c[a]));
        prop_assert_eq!(hits, inside as usize);
    }

    #[test]
    fn plancherel_and_exact_splits(seed in 0u64..1000, kd in 2i32..5, k in 1.0f64..4.0) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let spec = GridSpec::new(2, 32, 4.0).unwrap();
        let f = Field::from_fn(spec, |_| Complex64::new(rand::Rng::random_range(&mut rng, -1.0..1.0), rand::Rng::random_range(&mut rng, -1.0..1.0)));
        let e = f.l2_squared();
        let g = f.clone().into_freq();
        prop_assert!((g.l2_squared() - e).abs() <= 1e-9 * e);
        let delta = 2f64.powi(-kd);
        let (lo, hi) = high_low_split(&f, delta, k).unwrap();
        let mut sum = lo.into_phys();
        sum.add_assign(&hi.into_phys()).unwrap();
        prop_assert!(f.max_rel_diff(&sum).unwrap() <= 1e-9);
    }

    #[test]
    fn flat_ratio_ignores_a_common_character(seed in 0u64..1000, a in -9i64..9, b in -9i64..9, c in -9i64..9) {
        let planks: Vec<Plank> = (0..3)
            .map(|j| {
                let x = 3.0 * j as f64;
                Plank::new(
                    rproj::curve::FrenetFrame::standard(),
                    [Range::closed(x, x + 3.0).open_hi(), Range::closed(0.0, 4.0).open_hi(), Range::closed(0.0, 2.0).open_hi()],
                )
                .unwrap()
            })
            .collect();
        let mut inst = DecouplingInstance { planks, scale: 1.0, data: DataSpec::new(Some(8), seed), p: 4.0, grid: [32, 16, 8], k: None };
        let base = flat_decoupling_ratio(&inst).unwrap().ratio;
        inst.data.modulation = [a, b, c];
        let moved = flat_decoupling_ratio(&inst).unwrap().ratio;
        prop_assert!((base - moved).abs() <= 1e-9 * base);
    }

    #[test]
    fn bootstrap_induction_holds(eps in 0.001f64..0.49, kd in 2i32..30) {
        let st = bootstrap_iterate(eps, 2f64.powi(-kd), 1.0).unwrap();
        prop_assert!(st.checks.induction_ok);
        prop_assert!(st.checks.steps_ok);
        prop_assert!(st.checks.all_ok());
    }
}

#[test]
fn mixed_split_is_exact_on_a_random_field() {
    let spec = GridSpec::new(3, 16, 8.0).unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(2);
    let f = Field::from_fn(spec, |_| Complex64::new(rand::Rng::random_range(&mut rng, -1.0..1.0), 0.0));
    let frame = SphericalCurve::light_cone().frenet_frame(0.9).unwrap();
    let parts = mixed_split_3d(&f, &frame, 1.0 / 16.0, 2.0).unwrap();
    let mut sum = Field::zeros(spec);
    for (_, p) in &parts {
        sum.add_assign(p).unwrap();
    }
    assert!(f.max_rel_diff(&sum).unwrap() <= 1e-9);
}
