use std::f64::consts::{PI, SQRT_2};

use rproj::curve::*;
use rproj::{Error, Vec3};

fn close(a: &Vec3, b: &Vec3, tol: f64) -> bool {
    (a - b).amax() <= tol
}

fn e3_cone(omega: f64) -> Vec3 {
    let (s, c) = (SQRT_2 * omega).sin_cos();
    Vec3::new(-c, -s, 1.0) / SQRT_2
}

#[test]
fn light_cone_frame_at_zero() {
    let f = SphericalCurve::light_cone().frenet_frame(0.0).unwrap();
    assert!(close(&f.e1, &(Vec3::new(1.0, 0.0, 1.0) / SQRT_2), 1e-15));
    assert!(close(&f.e2, &Vec3::new(0.0, 1.0, 0.0), 1e-15));
    assert!(close(&f.e3, &(Vec3::new(-1.0, 0.0, 1.0) / SQRT_2), 1e-15));
    assert!((f.tau - 1.0).abs() < 1e-14);
    assert!(f.e1.dot(&f.e2).abs() < 1e-10);
}

#[test]
fn domain_and_degeneracy_errors() {
    let c = SphericalCurve::light_cone();
    assert!(matches!(c.frenet_frame(-0.1), Err(Error::Domain { .. })));
    assert!(matches!(c.frenet_frame(5.0), Err(Error::Domain { .. })));
    // a great circle has zero torsion
    let t: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
    let g: Vec<Vec3> = t.iter().map(|&x| Vec3::new(x.cos(), x.sin(), 0.0)).collect();
    let d1: Vec<Vec3> = t.iter().map(|&x| Vec3::new(-x.sin(), x.cos(), 0.0)).collect();
    let d2: Vec<Vec3> = g.iter().map(|v| -v).collect();
    assert!(matches!(SphericalCurve::tabulated(&t, &g, &d1, &d2), Err(Error::Degenerate { .. })));
}

#[test]
fn inner_products() {
    let c = SphericalCurve::light_cone();
    let m = frame_inner_products(&c, 1.3, 1.3).unwrap();
    assert!((m - nalgebra::Matrix3::identity()).amax() < 1e-10);
    let m = frame_inner_products(&c, 0.0, 0.1).unwrap();
    assert!((m * m.transpose() - nalgebra::Matrix3::identity()).amax() < 1e-9);
    // direct trigonometric evaluation: e1(0) . e3(t) = (1 - cos(sqrt2 t)) / 2
    let t: f64 = 0.1;
    let expect = (1.0 - (SQRT_2 * t).cos()) / 2.0;
    assert!((m[(0, 2)] - expect).abs() < 1e-14);
    assert!(m[(0, 2)].abs() <= 0.01);
}

#[test]
fn cone_distance_examples() {
    assert!((cone_distance(&Vec3::new(0.0, 0.0, 1.0)) - 1.0 / SQRT_2).abs() < 1e-15);
    assert!((cone_distance(&Vec3::new(3.0, 4.0, 0.0)) - 5.0 / SQRT_2).abs() < 1e-14);
    for i in 0..50 {
        let w = i as f64 * 0.08;
        for r in [-1.5, 0.3, 2.0] {
            assert!(cone_distance(&(e3_cone(w) * r)) < 1e-14);
        }
    }
}

/// Sampled minimum over the generators, refined around the best sample.
fn brute_distance(xi: &Vec3) -> f64 {
    let (nw, nr) = (2000, 500);
    let period = SQRT_2 * PI;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..nw {
        let w = period * i as f64 / nw as f64;
        let e = e3_cone(w);
        for j in 0..=nr {
            let r = -2.0 + 4.0 * j as f64 / nr as f64;
            let d = (xi - e * r).norm();
            if d < best.0 {
                best = (d, w, r);
            }
        }
    }
    let (mut dw, mut dr) = (period / nw as f64, 4.0 / nr as f64);
    for _ in 0..30 {
        let (_, w0, r0) = best;
        for a in -4..=4 {
            for b in -4..=4 {
                let (w, r) = (w0 + dw * a as f64 / 4.0, r0 + dr * b as f64 / 4.0);
                let d = (xi - e3_cone(w) * r).norm();
                if d < best.0 {
                    best = (d, w, r);
                }
            }
        }
        dw /= 2.0;
        dr /= 2.0;
    }
    best.0
}

#[test]
fn cone_distance_matches_brute_force() {
    for xi in [Vec3::new(3.0, 4.0, 0.0) / 5.0, Vec3::new(0.2, -0.7, -0.4), Vec3::new(-1.0, 0.5, 1.2)] {
        assert!((cone_distance(&xi) - brute_distance(&xi)).abs() < 2e-3);
    }
}

#[test]
fn nearest_point_examples() {
    let p = nearest_cone_point(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
    assert_eq!(p.omega, 0.0);
    assert!((p.r - 1.0 / SQRT_2).abs() < 1e-15);
    assert!(((Vec3::new(0.0, 0.0, 1.0) - p.foot).norm() - 1.0 / SQRT_2).abs() < 1e-15);
    // the foot's distance from the axis is 1/2
    assert!((p.foot.x.hypot(p.foot.y) - 0.5).abs() < 1e-15);

    let xi = e3_cone(1.7) * 0.8;
    let p = nearest_cone_point(&xi).unwrap();
    assert!(close(&p.foot, &xi, 1e-14));

    let c = SphericalCurve::light_cone();
    for xi in [Vec3::new(1.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.3, -2.0, -0.5)] {
        let p = nearest_cone_point(&xi).unwrap();
        let res = xi - p.foot;
        let e1 = c.frenet_frame(p.omega).unwrap().e1;
        assert!(res.cross(&e1).norm() <= 1e-8 * res.norm() + 1e-14);
        assert!((res.norm() - cone_distance(&xi)).abs() < 1e-12);
    }
    assert!(nearest_cone_point(&Vec3::zeros()).is_err());
}

#[test]
fn cone_model_bounds() {
    assert!(ConeModel::new(0.0).is_err());
    assert!(ConeModel::new(1.5).is_err());
    let m = ConeModel::new(0.25).unwrap();
    assert!(m.contains(&m.point(0.4, 0.5), 1e-12));
    assert!(!m.contains(&m.point(0.4, 0.1), 1e-12));
}

#[test]
fn light_cone_binormal_reparametrization() {
    let c = SphericalCurve::light_cone();
    let b = reparametrize_binormal(&c, 10_000).unwrap();
    let (lo, hi) = b.domain();
    assert!((lo + SQRT_2 * PI).abs() < 1e-12 && hi == 0.0);
    for u in [-4.0, -2.5, -0.3] {
        assert!((b.s(u).unwrap() + u).abs() < 1e-12);
        let h = 1e-5;
        let fp = b.frenet_frame(u + h).unwrap();
        let fm = b.frenet_frame(u - h).unwrap();
        let f = b.frenet_frame(u).unwrap();
        let de3 = (fp.e3 - fm.e3) / (2.0 * h);
        assert!((de3 - f.e2).amax() < 1e-8);
    }
    assert!((binormal_speed(&c, 1.0, 10_000).unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn constant_torsion() {
    let tau = 2.5;
    let c = SphericalCurve::from_torsion(|_| tau, (0.0, 1.0), 400).unwrap();
    for t in [0.25, 0.5, 1.0] {
        assert!((binormal_speed(&c, t, 1000).unwrap() + t / tau).abs() < 1e-9);
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64) -> f64 {
        let m = (a + b) / 2.0;
        let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0) + rec(f, m, b, fm, frm, fb, right, tol / 2.0)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f((a + b) / 2.0));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol)
}

#[test]
fn variable_torsion_speed() {
    let c = SphericalCurve::from_torsion(|t| 1.0 + t / 2.0, (0.0, 1.0), 1000).unwrap();
    let oracle = -adaptive_simpson(&|t| 1.0 / (1.0 + t / 2.0), 0.0, 1.0, 1e-13);
    assert!((oracle + 2.0 * 1.5f64.ln()).abs() < 1e-12);
    let s = binormal_speed(&c, 1.0, 10_000).unwrap();
    assert!((s - oracle).abs() < 1e-6, "{s} vs {oracle}");
    // the reparametrized binormal still moves with unit speed toward e2
    let b = reparametrize_binormal(&c, 20_000).unwrap();
    let (lo, hi) = b.domain();
    for k in 1..6 {
        let u = lo + (hi - lo) * k as f64 / 6.0;
        let h = 1e-4;
        let de3 = (b.frenet_frame(u + h).unwrap().e3 - b.frenet_frame(u - h).unwrap().e3) / (2.0 * h);
        assert!((de3 - b.frenet_frame(u).unwrap().e2).amax() < 1e-4);
    }
    assert!(matches!(
        SphericalCurve::from_torsion(|_| 5e-7, (0.0, 1.0), 100).and_then(|c| reparametrize_binormal(&c, 100)),
        Err(Error::SingularTorsion { .. })
    ));
}

#[test]
fn csv_round_trip() {
    let c = SphericalCurve::from_torsion(|t| 1.0 + t * t, (0.0, 1.0), 200).unwrap();
    let mut buf = Vec::new();
    c.write_csv(&mut buf, 200).unwrap();
    let d = SphericalCurve::read_csv(buf.as_slice()).unwrap();
    for t in [0.0, 0.123, 0.77, 1.0] {
        let (a, b) = (c.frenet_frame(t).unwrap(), d.frenet_frame(t).unwrap());
        assert!(close(&a.e3, &b.e3, 1e-12));
        assert!((a.tau - b.tau).abs() < 1e-9);
    }
    assert!(SphericalCurve::read_csv("theta,a\n0,1\n".as_bytes()).is_err());
}
