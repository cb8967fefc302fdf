use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rproj::curve::{cone_distance, SphericalCurve};
use rproj::planks::*;
use rproj::Vec3;

fn cone() -> SphericalCurve {
    SphericalCurve::light_cone()
}

#[test]
fn part_plank_ranges() {
    let f = cone().frenet_frame(0.3).unwrap();
    let d = 2f64.powi(-10);
    let low = build_part_planks(&f, d, 8.0, PartKind::Low).unwrap();
    let his: Vec<f64> = low.ranges.iter().map(|r| r.hi).collect();
    assert_eq!(his, vec![d, 0.125, 0.125]);
    assert!(low.ranges.iter().all(|r| r.abs && r.lo == 0.0));

    let high = build_part_planks(&f, d, 8.0, PartKind::High).unwrap();
    assert_eq!((high.ranges[1].lo, high.ranges[1].hi), (0.125, 1.0));

    let d = 2f64.powi(-16);
    let err = build_part_planks(&f, d, d.powf(-0.5), PartKind::Mixed(2.0 * d.sqrt()));
    assert!(err.is_err());
    assert!(build_part_planks(&f, d, 4.0, PartKind::Mixed(0.1)).is_err());
    assert!(build_part_planks(&f, d, 0.5, PartKind::Low).is_err());
    let m = build_part_planks(&f, d, 4.0, PartKind::Mixed(1.0 / 16.0)).unwrap();
    assert_eq!((m.ranges[1].lo, m.ranges[1].hi, m.ranges[2].lo), (1.0 / 32.0, 1.0 / 16.0, 0.25));
}

#[test]
fn parts_tile_the_slab() {
    let curve = cone();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (d, k) in [(2f64.powi(-12), 8.0), (2f64.powi(-12), 6.0), (2f64.powi(-10), 1024.0), (2f64.powi(-9), 1.0)] {
        let f = curve.frenet_frame(1.1).unwrap();
        let parts = part_family(&f, d, k).unwrap();
        let slab = slab(&f, d).unwrap();
        for i in 0..20_000 {
            // hit band edges on purpose half the time
            let c = if i % 2 == 0 {
                Vec3::new(rng.random_range(-d..d), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            } else {
                let edges: Vec<f64> = parts.iter().flat_map(|(_, p)| [p.ranges[1].lo, p.ranges[1].hi]).collect();
                let e = edges[rng.random_range(0..edges.len())];
                Vec3::new(0.0, e * if rng.random() { 1.0 } else { -1.0 }, [1.0 / k, 0.5][rng.random_range(0..2)])
            };
            // frame coordinates are used directly to keep boundary values exact
            let hits = parts
                .iter()
                .filter(|(_, p)| (0..3).all(|a| p.ranges[a].contains(c[a])))
                .count();
            let inside = (0..3).all(|a| slab.ranges[a].contains(c[a]));
            assert_eq!(hits, inside as usize, "d={d} K={k} c={c:?}");
        }
    }
}

#[test]
fn membership_matches_dot_products() {
    let curve = cone();
    let f = curve.frenet_frame(2.0).unwrap();
    let p = build_part_planks(&f, 0.01, 4.0, PartKind::High).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut inside = 0;
    for _ in 0..20_000 {
        let x = Vec3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
        let (a, b, c) = (x.dot(&f.e1), x.dot(&f.e2), x.dot(&f.e3));
        let oracle = a.abs() <= 0.01 && b.abs() > 0.25 && b.abs() <= 1.0 && c.abs() <= 1.0;
        assert_eq!(p.contains(&x), oracle);
        inside += oracle as usize;
    }
    assert!(inside > 0);
}

#[test]
fn overlap_examples() {
    let curve = cone();
    let a = slab(&curve.frenet_frame(0.0).unwrap(), 0.01).unwrap();
    let b = Plank::new(
        curve.frenet_frame(0.0).unwrap(),
        [Range::closed(0.5, 0.6), Range::sym(1.0), Range::sym(1.0)],
    )
    .unwrap();
    let r = overlap_count(&[a, b], &Sampling::PerPlank { per_plank: 5000, seed: 1 }).unwrap();
    assert_eq!(r.max, 1);
    assert_eq!(r.in_union(), r.samples);

    let d = 2f64.powi(-10);
    let k = 4.0;
    let family: Vec<Plank> = lattice_frames(&curve, d)
        .unwrap()
        .iter()
        .map(|f| build_part_planks(f, d, k, PartKind::High).unwrap())
        .collect();
    let r = overlap_count(&family, &Sampling::PerPlank { per_plank: 20, seed: 2 }).unwrap();
    assert!(r.max as f64 <= 16.0 * k, "{}", r.max);
    assert!(r.max >= 2);

    // the skip index agrees with brute force
    let pts: Vec<Vec3> = {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        (0..400).map(|i| family[i * 11 % family.len()].sample(&mut rng)).collect()
    };
    let fast = overlap_count(&family, &Sampling::Points(pts.clone())).unwrap();
    let mut shuffled = family.clone();
    shuffled.reverse();
    let slow = overlap_count(&shuffled, &Sampling::Points(pts)).unwrap();
    assert_eq!(fast, slow);

    let h = 2f64.powi(-6);
    let sqrt: Vec<Plank> = lattice_frames(&curve, h)
        .unwrap()
        .iter()
        .map(|f| sqrt_plank_plus(f, h * h, 1.0).unwrap().dilate(4.0))
        .collect();
    let r = overlap_count(&sqrt, &Sampling::PerPlank { per_plank: 200, seed: 3 }).unwrap();
    assert!(r.max <= 64, "{}", r.max);
}

#[test]
fn same_or_disjoint_examples() {
    let curve = cone();
    let d = 2f64.powi(-40);
    let l = d.powf(0.4);
    let step = d / l;
    let near = SameOrDisjointParams { c1: 16.0, samples: 20_000, ..Default::default() };
    let r = same_or_disjoint_check(&curve, 0.7, 0.7 + step / 2.0, d, l, FamilyKind::Q, &near).unwrap();
    assert_eq!(r.regime, Regime::Near);
    assert_eq!(r.classification, Classification::EssentiallySame);

    let far = SameOrDisjointParams { c1: 1.0, c2: 8.0, samples: 20_000, ..Default::default() };
    let r = same_or_disjoint_check(&curve, 0.7, 0.7 + 10.0 * step, d, l, FamilyKind::Q, &far).unwrap();
    assert_eq!(r.regime, Regime::Separated);
    assert_eq!(r.classification, Classification::Disjoint);
    assert!(r.disjoint_exact && r.disjoint_sampled);

    // same plank
    let r = same_or_disjoint_check(&curve, 0.7, 0.7, d, l, FamilyKind::Q, &far).unwrap();
    assert_eq!(r.classification, Classification::EssentiallySame);

    let s = 2f64.powi(-20);
    let r = same_or_disjoint_check(&curve, 1.0, 1.0 + 10.0 * s.sqrt(), s, 0.0, FamilyKind::Sqrt, &far).unwrap();
    assert_eq!(r.classification, Classification::Disjoint);
}

#[test]
fn separating_axis_matches_sampling() {
    let curve = cone();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..60 {
        let t = rng.random_range(0.0..4.0);
        let dt = rng.random_range(0.0..0.6);
        let a = sqrt_plank_plus(&curve.frenet_frame(t).unwrap(), 0.04, 2.0).unwrap();
        let b = sqrt_plank_plus(&curve.frenet_frame(t + dt).unwrap(), 0.04, 2.0).unwrap();
        let hit = (0..20_000).any(|_| b.contains(&a.sample(&mut rng)));
        // sampling can only find an intersection the exact test also sees
        if hit {
            assert!(a.intersects(&b));
        }
        if dt < 1e-3 {
            assert!(a.intersects(&b));
        }
    }
}

#[test]
fn cone_family_examples() {
    let curve = cone();
    let f = curve.frenet_frame(0.0).unwrap();
    let v = cone_plank(&f, 0, 0, &ConeShape::verbatim()).unwrap();
    assert_eq!(v.plank.ranges[0].hi, 1024.0);
    assert_eq!(v.plank.ranges[1].hi, 2f64.powi(-100));
    assert_eq!((v.plank.ranges[2].lo, v.plank.ranges[2].hi), (2f64.powi(-10), 1024.0));
    let v = cone_plank(&f, 12, 4, &ConeShape::verbatim()).unwrap();
    assert_eq!((v.plank.ranges[0].lo, v.plank.ranges[0].hi), (2f64.powi(-2), 2f64.powi(18)));
    assert_eq!(v.plank.ranges[1].hi, 2f64.powi(10 - 100));
    assert!(build_cone_family(&curve, 2, 2, &ConeShape::verbatim()).is_err());
    assert!(build_cone_family(&curve, 2, 3, &ConeShape::desk()).is_err());

    let desk = ConeShape::desk();
    let fam = build_cone_family(&curve, 6, 4, &desk).unwrap();
    let h = desk.step(4);
    assert_eq!(fam.len(), (curve.domain().1 / h).ceil() as usize);
    assert!(fam.iter().all(|p| p.plank.theta() < curve.domain().1));
}

fn shell_family(j: u32) -> Vec<Vec<Plank>> {
    let curve = cone();
    (0..=j)
        .map(|k| {
            build_cone_family(&curve, j, k, &ConeShape::desk())
                .unwrap()
                .into_iter()
                .map(|p| p.plank)
                .collect()
        })
        .collect()
}

#[test]
fn cone_planks_cover_shells() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let fams: Vec<Vec<Vec<Plank>>> = (0..=6).map(shell_family).collect();
    for _ in 0..4000 {
        let r = 0.5 * 2f64.powf(rng.random_range(0.0..7.0));
        let u = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if u.norm() < 1e-3 {
            continue;
        }
        let xi = u.normalize() * r;
        let j = r.log2().ceil().max(0.0) as usize;
        let covered = (j.saturating_sub(1)..=(j + 1).min(6))
            .any(|jj| fams[jj].iter().any(|f| f.iter().any(|p| p.contains(&xi))));
        assert!(covered, "{xi:?}");
    }
}

#[test]
fn cone_planks_stay_near_their_region() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 1.0f64;
    for j in [3u32, 6] {
        for (k, fam) in shell_family(j).iter().enumerate() {
            let region = ConeRegion::new(j, k as u32, 1.0).unwrap();
            let scale = 2f64.powi(j as i32 - k as i32);
            for p in fam.iter().step_by(3) {
                for _ in 0..20 {
                    let xi = p.sample(&mut rng);
                    let d = cone_distance(&xi);
                    assert!(d <= scale * 2f64.powi(10));
                    if (k as u32) < j {
                        assert!(d >= scale * 2f64.powi(-40));
                    }
                    worst = worst.max(region.dilation_needed(&xi));
                }
            }
        }
    }
    assert!(worst <= 2f64.powi(50), "{worst}");
}

#[test]
fn region_membership_examples() {
    for (j, k) in [(5u32, 2u32), (4, 4), (3, 0)] {
        let pts = sample_cone_region(j, k, 500, 8).unwrap();
        assert!(pts.iter().all(|x| cone_region_membership(x, j, k, 1.0).unwrap()));
    }
    let curve = cone();
    let f = curve.frenet_frame(0.4).unwrap();
    let (j, k) = (6u32, 2u32);
    let n = 2f64.powi(j as i32) * 0.75;
    let q = 2f64.powf(-(k as f64) - 0.5);
    let at = |q: f64| {
        let t = q * n;
        f.e3 * (n * n - t * t).sqrt() + f.e1 * t
    };
    assert!(cone_region_membership(&at(q * (1.0 - 1e-9)), j, k, 1.0).unwrap());
    assert!(!cone_region_membership(&at(q * (1.0 + 1e-9)), j, k, 1.0).unwrap());
    assert!(cone_region_membership(&at(q * (1.0 + 1e-9)), j, k, 1.01).unwrap());
    assert!(!cone_region_membership(&at(q / 4.0), j, k, 1.0).unwrap());
    assert!(cone_region_membership(&Vec3::zeros(), 2, 1, 2.0).is_ok());
    assert!(!cone_region_membership(&Vec3::zeros(), 2, 1, 2.0).unwrap());
    assert!(cone_region_membership(&Vec3::x(), 2, 3, 2.0).is_err());
}

/// Parent by scanning the parent lattice for the half-open cell.
fn parent_oracle(x: f64, h: f64) -> f64 {
    let mut p = (x / h).floor() - 2.0;
    loop {
        let c = p * h;
        if x - c > -h / 2.0 && x - c <= h / 2.0 {
            return c;
        }
        p += 1.0;
    }
}

#[test]
fn attach_examples() {
    let m = AttachmentMap::new(2f64.powi(-10), 2f64.powi(-3)).unwrap();
    assert_eq!(m.attach(0.0, AttachLevel::ThetaToTau).unwrap(), 0.0);
    let t = m.parent_step(AttachLevel::ThetaToTau);
    assert_eq!(t, 2f64.powi(-7));
    // right ends belong to the cell, left ends do not
    assert_eq!(m.attach(t / 2.0, AttachLevel::ThetaToTau).unwrap(), 0.0);
    assert_eq!(m.attach(-t / 2.0, AttachLevel::ThetaToTau).unwrap(), -t);
    assert_eq!(m.children(0, AttachLevel::ThetaToTau).unwrap(), -3..=4);
    assert!(AttachmentMap::new(2f64.powi(-10), 2f64.powi(-5)).is_err());
    assert!(AttachmentMap::new(2f64.powi(-10), 0.1).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (b, a) in [(10, 3), (12, 4), (9, 2), (8, 0)] {
        let m = AttachmentMap::new(2f64.powi(-b), 2f64.powi(-a)).unwrap();
        for _ in 0..2000 {
            let i: i64 = rng.random_range(-5000..5000);
            let theta = i as f64 * m.delta;
            let tau = parent_oracle(theta, m.delta / m.lambda);
            let sigma = parent_oracle(tau, m.lambda);
            assert_eq!(m.attach(theta, AttachLevel::ThetaToTau).unwrap(), tau);
            assert_eq!(m.attach(tau, AttachLevel::TauToSigma).unwrap(), sigma);
            assert_eq!(m.attach(theta, AttachLevel::ThetaToSigma).unwrap(), sigma);
            let p = m.attach_index(i, AttachLevel::ThetaToTau);
            assert!(m.children(p, AttachLevel::ThetaToTau).unwrap().contains(&i));
        }
    }
}

#[test]
fn lorentz_examples() {
    let curve = cone();
    let f = curve.frenet_frame(0.9).unwrap();
    let x = Vec3::new(0.3, -1.2, 2.5);
    let y = lorentz_rescale(&curve, 0.9, 1.0, &x).unwrap();
    assert!((y - x).norm() < 1e-14);
    assert!((lorentz_rescale(&curve, 0.9, 7.0, &f.e1).unwrap() - f.e1).norm() < 1e-14);
    assert!((lorentz_rescale(&curve, 0.9, 2.0, &f.e3).unwrap() - f.e3 * 4.0).norm() < 1e-14);
    let back = lorentz_rescale(&curve, 0.9, 0.25, &lorentz_rescale(&curve, 0.9, 4.0, &x).unwrap()).unwrap();
    assert!((back - x).norm() < 1e-13);
    assert!(lorentz_rescale(&curve, 0.9, 0.0, &x).is_err());
}

#[test]
fn rectangle_overlap() {
    let d = 2f64.powi(-8);
    let fam = RectFamily::separated(d).unwrap();
    assert_eq!(fam.angles().len(), 805);
    for k in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let r = 1.0 / (k * d);
        let exact = fam.max_overlap_outside(r).unwrap();
        assert!(exact as f64 <= 4.0 * k, "K={k}: {exact}");
        assert!(exact as f64 >= 2.0 * k - 1.0);
        let sampled = fam.sampled_max_outside(r, (2.0 * r).min(fam.a), 20_000, 1).unwrap();
        assert!(sampled <= exact && (k == 1.0 || sampled + 2 >= exact), "K={k}: {sampled} vs {exact}");
    }
    // brute-force check of the pruned count
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..500 {
        let x = [rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0)];
        let brute = fam.angles().iter().filter(|t| fam.contains(**t, x)).count();
        assert_eq!(fam.count_at(x), brute);
    }
}
