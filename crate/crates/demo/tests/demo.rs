use rproj_demo::{cantor_projection, cone_slice, high_low_panels, theta_max};

#[test]
fn cantor_projection_has_the_right_shape_and_a_sane_slope() {
    let p = cantor_projection(1.0, 3, 64).unwrap();
    assert_eq!((p.width, p.height), (64, 64));
    assert_eq!(p.rgba.len(), 4 * 64 * 64);
    let s = cantor_projection(1.3, 4, 128).unwrap().value;
    assert!(s > 1.3 && s <= 8f64.ln() / 3f64.ln() + 0.1, "slope {s}");
    assert!(cantor_projection(1.0, 1, 64).unwrap().value.is_nan());
}

#[test]
fn cantor_projection_is_deterministic() {
    assert_eq!(cantor_projection(0.7, 3, 64).unwrap().rgba, cantor_projection(0.7, 3, 64).unwrap().rgba);
}

#[test]
fn low_fraction_falls_as_k_grows() {
    let a = high_low_panels(16, 1.5, 1.0).unwrap();
    let b = high_low_panels(16, 1.5, 8.0).unwrap();
    assert_eq!((a.width, a.height), (768, 256));
    assert!((0.0..=1.0).contains(&b.value) && b.value <= a.value, "{} {}", a.value, b.value);
}

#[test]
fn cone_slice_covers_the_cone() {
    let p = cone_slice(6, 2, 0.5, 64).unwrap();
    assert!(p.value >= 1.0);
    let lit = p.rgba.chunks(4).filter(|px| px[0] > 0).count();
    assert!(lit > 0 && lit < 64 * 64);
}

#[test]
fn bad_arguments_are_rejected() {
    assert!(cantor_projection(0.0, 9, 64).is_err());
    assert!(high_low_panels(0, 1.0, 2.0).is_err());
    assert!(high_low_panels(4, 1.0, 0.5).is_err());
    assert!(cone_slice(3, 4, 1.0, 64).is_err());
    assert!(theta_max() > 4.4 && theta_max() < 4.5);
}
