//! Browser demo: restricted projections of a Cantor dust, high-low splits of a tube bush, and
//! slices through a cone plank family. The plain functions below do the work; the
//! `wasm_bindgen` wrappers only convert errors.

use rproj::curve::SphericalCurve;
use rproj::field::{assemble_f, high_low_split, GridSpec, Tube, TubeFamily};
use rproj::fractal::{box_dimension_estimate, CountMethod};
use rproj::lab::{project_point, FixtureSpec};
use rproj::planks::{build_cone_family, ConeRegion, ConeShape};
use rproj::{Error, Result, Vec3};
use wasm_bindgen::prelude::*;

/// An RGBA image plus one headline number.
#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone)]
pub struct Picture {
    pub width: u32,
    pub height: u32,
    pub rgba: Vec<u8>,
    pub value: f64,
}

fn gray(v: f64) -> [u8; 4] {
    let g = (255.0 * v.clamp(0.0, 1.0)).round() as u8;
    [g, g, g, 255]
}

fn heat(v: f64) -> [u8; 4] {
    let t = v.clamp(0.0, 1.0);
    let r = (255.0 * (3.0 * t).min(1.0)) as u8;
    let g = (255.0 * (3.0 * t - 1.0).clamp(0.0, 1.0)) as u8;
    let b = (255.0 * (3.0 * t - 2.0).clamp(0.0, 1.0)) as u8;
    [r, g, b, 255]
}

/// Projection of the solid stage-`stage` middle-thirds dust in `[0,1]^3` onto the plane spanned
/// by `e2(theta), e3(theta)` of the light cone curve. `value` is the mesh box-counting slope.
pub fn cantor_projection(theta: f64, stage: u32, size: u32) -> Result<Picture> {
    if !(1..=5).contains(&stage) {
        return Err(Error::Invalid("stage must be in 1..=5".into()));
    }
    if !(16..=1024).contains(&size) {
        return Err(Error::Invalid("image size must be in 16..=1024".into()));
    }
    let curve = SphericalCurve::light_cone();
    let fixture = FixtureSpec::Cantor { base: 3, digits: vec![0, 2], stage, dim: 3, scale: 1.0, offset: [0.0; 3], fill: 1 }
        .build(&curve)?;
    let centre = project_point(&[0.5; 3], theta, &curve)?;
    let proj: Vec<[f64; 3]> = fixture
        .points
        .iter()
        .map(|p| project_point(p, theta, &curve).map(|q| [q[0] - centre[0], q[1] - centre[1], 0.0]))
        .collect::<Result<_>>()?;
    let scales: Vec<f64> = (1..=stage as i32).map(|i| 3f64.powi(-i)).collect();
    let value = if scales.len() >= 2 {
        box_dimension_estimate(&proj, &scales, CountMethod::Mesh)?.slope
    } else {
        f64::NAN
    };
    // the cube projects into the disc of radius sqrt(3)/2 about the centre
    let n = size as usize;
    let half = 0.9;
    let mut hits = vec![0u32; n * n];
    for p in &proj {
        let i = ((p[0] + half) / (2.0 * half) * n as f64).floor();
        let j = ((half - p[1]) / (2.0 * half) * n as f64).floor();
        if (0.0..n as f64).contains(&i) && (0.0..n as f64).contains(&j) {
            hits[j as usize * n + i as usize] += 1;
        }
    }
    let top = hits.iter().copied().max().unwrap_or(1).max(1) as f64;
    let rgba = hits.iter().flat_map(|&h| if h == 0 { [12, 12, 20, 255] } else { heat(0.25 + 0.75 * (h as f64).ln_1p() / top.ln_1p()) }).collect();
    Ok(Picture { width: size, height: size, rgba, value })
}

/// `count` tubes of half-widths `0.5 x 1/32` through the middle of a `256^2` grid on
/// `[0,4)^2`, at angles spread evenly over `[0, spread]`, each carrying one bump packet.
/// Returns `|f|`, `|f_low|`, `|f_high|` side by side; `value` is the low energy fraction.
pub fn high_low_panels(count: u32, spread: f64, k: f64) -> Result<Picture> {
    if !(1..=64).contains(&count) {
        return Err(Error::Invalid("tube count must be in 1..=64".into()));
    }
    if !(0.0..=std::f64::consts::PI).contains(&spread) {
        return Err(Error::Invalid("spread must be in [0, pi]".into()));
    }
    let delta = 1.0 / 32.0;
    let spec = GridSpec::new(2, 256, 4.0)?;
    let families = (0..count)
        .map(|i| {
            let angle = if count == 1 { 0.0 } else { spread * i as f64 / (count - 1) as f64 };
            Ok(TubeFamily { label: angle, tubes: vec![Tube::planar([2.0, 2.0], angle, [0.5, delta])?] })
        })
        .collect::<Result<Vec<_>>>()?;
    let f = assemble_f(spec, &families)?.field.into_phys();
    let (lo, hi) = high_low_split(&f, delta, k)?;
    let (lo, hi) = (lo.into_phys(), hi.into_phys());
    let total = f.l2_squared();
    let value = if total > 0.0 { lo.l2_squared() / total } else { 0.0 };
    let top = f.data().iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let n = spec.n;
    let w = 3 * n;
    let mut rgba = vec![0u8; 4 * w * n];
    for (panel, field) in [&f, &lo, &hi].into_iter().enumerate() {
        for (idx, z) in field.data().iter().enumerate() {
            let (row, col) = (idx / n, idx % n);
            // first grid axis runs left to right, second bottom to top
            let (x, y) = (row, n - 1 - col);
            let at = 4 * (y * w + panel * n + x);
            rgba[at..at + 4].copy_from_slice(&gray(z.norm() / top));
        }
    }
    Ok(Picture { width: w as u32, height: n as u32, rgba, value })
}

/// Slice `xi3 = height 2^j` of the planks `Lambda_{j,k}` for the light cone over
/// `|xi1|, |xi2| <= 2^{j+1}`. Colour is the number of planks covering a pixel, tinted blue
/// where the pixel lies in `Gamma_{j,k}`; `value` is the largest overlap seen.
pub fn cone_slice(j: u32, k: u32, height: f64, size: u32) -> Result<Picture> {
    if j > 12 || k > j {
        return Err(Error::Invalid("need k <= j <= 12".into()));
    }
    if !(16..=512).contains(&size) {
        return Err(Error::Invalid("image size must be in 16..=512".into()));
    }
    let curve = SphericalCurve::light_cone();
    let family = build_cone_family(&curve, j, k, &ConeShape::desk())?;
    let region = ConeRegion::new(j, k, 1.0)?;
    let scale = 2f64.powi(j as i32);
    let n = size as usize;
    let extent = 2.0 * scale;
    let mut counts = vec![0usize; n * n];
    let mut inside = vec![false; n * n];
    for row in 0..n {
        for col in 0..n {
            let x = extent * (2.0 * (col as f64 + 0.5) / n as f64 - 1.0);
            let y = extent * (1.0 - 2.0 * (row as f64 + 0.5) / n as f64);
            let xi = Vec3::new(x, y, height * scale);
            counts[row * n + col] = family.iter().filter(|p| p.plank.contains(&xi)).count();
            inside[row * n + col] = region.contains(&xi);
        }
    }
    let top = counts.iter().copied().max().unwrap_or(0);
    let rgba = counts
        .iter()
        .zip(&inside)
        .flat_map(|(&c, &g)| {
            let mut px = if c == 0 { [0, 0, 0, 255] } else { heat(0.2 + 0.8 * c as f64 / top.max(1) as f64) };
            if g {
                px[2] = px[2].saturating_add(110);
            }
            px
        })
        .collect();
    Ok(Picture { width: size, height: size, rgba, value: top as f64 })
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = cantorProjection)]
pub fn cantor_projection_js(theta: f64, stage: u32, size: u32) -> std::result::Result<Picture, JsError> {
    cantor_projection(theta, stage, size).map_err(js)
}

#[wasm_bindgen(js_name = highLowPanels)]
pub fn high_low_panels_js(count: u32, spread: f64, k: f64) -> std::result::Result<Picture, JsError> {
    high_low_panels(count, spread, k).map_err(js)
}

#[wasm_bindgen(js_name = coneSlice)]
pub fn cone_slice_js(j: u32, k: u32, height: f64, size: u32) -> std::result::Result<Picture, JsError> {
    cone_slice(j, k, height, size).map_err(js)
}

/// Upper end of the light cone parameter range, for the theta slider.
#[wasm_bindgen(js_name = thetaMax)]
pub fn theta_max() -> f64 {
    SphericalCurve::light_cone().domain().1
}
