//! Planks adapted to the light cone at frequency `2^j` and angular scale `2^{-k/2}`, and the
//! conical regions `Gamma_{j,k}` they cover.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{lattice_frames, Plank, Range};
use crate::curve::{cone_distance, FrenetFrame, SphericalCurve};
use crate::error::{invalid, Error, Result};
use crate::Vec3;

/// Largest family the verbatim constructor will enumerate.
pub const MAX_FAMILY: usize = 10_000_000;

/// Box dimensions of a cone plank, as powers of two relative to the scale.
///
/// For `k < j`: `2^{j-k+normal.0} <= |x1| <= 2^{j-k+normal.1}`, `|x2| <= aperture 2^{j-k/2}`,
/// `2^{j+radial.0} <= |x3| <= 2^{j+radial.1}`. For `k = j` the normal range is
/// `|x1| <= top_normal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeShape {
    /// lattice constant: orientations are `c 2^{-k/2} N` in the domain
    pub c: f64,
    pub normal: (f64, f64),
    pub aperture: f64,
    pub radial: (f64, f64),
    pub top_normal: f64,
}

impl ConeShape {
    /// Tight constants for computation; cover every shell with bounded overlap.
    pub fn desk() -> Self {
        Self {
            c: 0.25,
            normal: (-3.0, 1.0),
            aperture: 0.22,
            radial: (-2.0, 1.0),
            top_normal: 2.0,
        }
    }

    /// The constants of the original construction, with `c = 100^{-100}`.
    pub fn verbatim() -> Self {
        Self {
            c: 1e-200,
            normal: (-10.0, 10.0),
            aperture: 2f64.powi(-100),
            radial: (-10.0, 10.0),
            top_normal: 2f64.powi(10),
        }
    }

    pub fn step(&self, k: u32) -> f64 {
        self.c * 2f64.powf(-(k as f64) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConePlank {
    pub j: u32,
    pub k: u32,
    pub plank: Plank,
}

impl ConePlank {
    pub fn record(&self) -> super::PlankRecord {
        let mut r = self.plank.record();
        r.j = Some(self.j);
        r.k = Some(self.k);
        r
    }
}

/// `P_{theta,j,k}` in the frame at `theta`.
pub fn cone_plank(frame: &FrenetFrame, j: u32, k: u32, shape: &ConeShape) -> Result<ConePlank> {
    if k > j {
        return Err(Error::Invalid(format!("cone plank needs k <= j, got k = {k}, j = {j}")));
    }
    let (jf, kf) = (j as f64, k as f64);
    let normal = if k < j {
        Range::band(2f64.powf(jf - kf + shape.normal.0), 2f64.powf(jf - kf + shape.normal.1))
    } else {
        Range::sym(shape.top_normal)
    };
    let ranges = [
        normal,
        Range::sym(shape.aperture * 2f64.powf(jf - kf / 2.0)),
        Range::band(2f64.powf(jf + shape.radial.0), 2f64.powf(jf + shape.radial.1)),
    ];
    Ok(ConePlank { j, k, plank: Plank::new(*frame, ranges)? })
}

/// `Lambda_{j,k}`: one plank per orientation in `c 2^{-k/2} N` inside the domain of `curve`.
pub fn build_cone_family(curve: &SphericalCurve, j: u32, k: u32, shape: &ConeShape) -> Result<Vec<ConePlank>> {
    if k > j {
        return Err(Error::Invalid(format!("cone family needs k <= j, got k = {k}, j = {j}")));
    }
    let (a, b) = curve.domain();
    let step = shape.step(k);
    let n = (b - a) / step;
    if !(n <= MAX_FAMILY as f64) {
        return Err(Error::Invalid(format!(
            "the lattice c 2^(-k/2) N has about {n:.3e} points in the domain, more than {MAX_FAMILY}"
        )));
    }
    lattice_frames(curve, step)?
        .iter()
        .map(|f| cone_plank(f, j, k, shape))
        .collect()
}

/// `C Gamma_{j,k}`: `C^{-1} 2^{j-1} <= |xi| <= C 2^j` and the distance to the light cone lies in
/// `[C^{-1} 2^{-k-3/2} |xi|, C 2^{-k-1/2} |xi|]`, or in `[0, C 2^{-j-1/2} |xi|]` when `k = j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeRegion {
    pub j: u32,
    pub k: u32,
    pub c: f64,
}

impl ConeRegion {
    pub fn new(j: u32, k: u32, c: f64) -> Result<Self> {
        if k > j {
            return invalid("cone region needs k <= j");
        }
        if !(c >= 1.0) {
            return invalid("region dilation must be at least 1");
        }
        Ok(Self { j, k, c })
    }

    pub fn contains(&self, xi: &Vec3) -> bool {
        self.dilation_needed(xi) <= self.c
    }

    /// Smallest `C >= 1` with `xi` in `C Gamma_{j,k}` (infinite if no dilation suffices).
    pub fn dilation_needed(&self, xi: &Vec3) -> f64 {
        let r = xi.norm();
        let d = cone_distance(xi);
        let (jf, kf) = (self.j as f64, self.k as f64);
        let mut need = (2f64.powf(jf - 1.0) / r).max(r / 2f64.powf(jf)).max(1.0);
        if self.k < self.j {
            need = need.max(d / (2f64.powf(-kf - 0.5) * r));
            need = need.max(2f64.powf(-kf - 1.5) * r / d);
        } else {
            need = need.max(d / (2f64.powf(-jf - 0.5) * r));
        }
        if need.is_nan() {
            f64::INFINITY
        } else {
            need
        }
    }
}

pub fn cone_region_membership(xi: &Vec3, j: u32, k: u32, c: f64) -> Result<bool> {
    Ok(ConeRegion::new(j, k, c)?.contains(xi))
}

/// Points of `Gamma_{j,k}`: `r e3(omega) + t e1(omega)` with `|t| <= r` has cone distance `|t|`,
/// so the radius and the relative distance are drawn directly, then a random antipodal flip.
pub fn sample_cone_region(j: u32, k: u32, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    let region = ConeRegion::new(j, k, 1.0)?;
    let curve = SphericalCurve::light_cone();
    let (_, top) = curve.domain();
    let (jf, kf) = (j as f64, k as f64);
    let (qlo, qhi) = if k < j {
        (2f64.powf(-kf - 1.5), 2f64.powf(-kf - 0.5))
    } else {
        (0.0, 2f64.powf(-jf - 0.5))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 100 * n + 1000 {
            return Err(Error::Invalid("sampling the cone region keeps failing".into()));
        }
        let norm = 2f64.powf(jf - 1.0) * (1.0 + rng.random::<f64>());
        let q = rng.random_range(qlo..=qhi);
        let t = q * norm * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let r = (norm * norm - t * t).sqrt();
        let f = curve.frenet_frame(rng.random_range(0.0..top))?;
        let mut xi = f.e3 * r + f.e1 * t;
        if rng.random::<bool>() {
            xi = -xi;
        }
        if region.contains(&xi) {
            out.push(xi);
        }
    }
    Ok(out)
}

