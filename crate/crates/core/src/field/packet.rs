use quadrature::double_exponential;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{Field, GridSpec};
use crate::error::{invalid, Error, Result};
use crate::Vec3;

/// A box with center, orthonormal axes and half-widths; only the first `dim` axes are used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    pub dim: usize,
    pub center: [f64; 3],
    pub axes: [Vec3; 3],
    pub half_widths: [f64; 3],
}

impl Tube {
    /// Planar tube with first axis `(cos angle, sin angle)`.
    pub fn planar(center: [f64; 2], angle: f64, half_widths: [f64; 2]) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        Self::new(
            2,
            [center[0], center[1], 0.0],
            [Vec3::new(c, s, 0.0), Vec3::new(-s, c, 0.0), Vec3::z()],
            [half_widths[0], half_widths[1], 1.0],
        )
    }

    pub fn spatial(center: [f64; 3], axes: [Vec3; 3], half_widths: [f64; 3]) -> Result<Self> {
        Self::new(3, center, axes, half_widths)
    }

    fn new(dim: usize, center: [f64; 3], axes: [Vec3; 3], half_widths: [f64; 3]) -> Result<Self> {
        if half_widths[..dim].iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return invalid("tube half-widths must be positive");
        }
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                if (axes[i].dot(&axes[j]) - want).abs() > 1e-9 {
                    return invalid("tube axes are not orthonormal");
                }
            }
        }
        Ok(Self { dim, center, axes, half_widths })
    }

    pub fn translated(&self, d: [f64; 3]) -> Self {
        let mut t = *self;
        for a in 0..3 {
            t.center[a] += d[a];
        }
        t
    }

    fn offset(&self, x: &[f64; 3]) -> Vec3 {
        let mut v = Vec3::new(x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]);
        for a in self.dim..3 {
            v[a] = 0.0;
        }
        v
    }

    /// Coordinates of `x - center` along the axes.
    pub fn local(&self, x: &[f64; 3]) -> [f64; 3] {
        let v = self.offset(x);
        [v.dot(&self.axes[0]), v.dot(&self.axes[1]), v.dot(&self.axes[2])]
    }

    pub fn contains(&self, x: &[f64; 3]) -> bool {
        let l = self.local(x);
        (0..self.dim).all(|i| l[i].abs() <= self.half_widths[i] * (1.0 + 1e-12))
    }

    fn corners(&self) -> Vec<[f64; 3]> {
        (0..1usize << self.dim)
            .map(|m| {
                let mut p = self.center;
                for i in 0..self.dim {
                    let s = if m >> i & 1 == 0 { -1.0 } else { 1.0 };
                    for a in 0..self.dim {
                        p[a] += s * self.half_widths[i] * self.axes[i][a];
                    }
                }
                p
            })
            .collect()
    }

    fn same_shape(&self, other: &Tube) -> bool {
        self.dim == other.dim
            && (0..self.dim).all(|i| {
                (self.axes[i] - other.axes[i]).norm() < 1e-12
                    && (self.half_widths[i] - other.half_widths[i]).abs() <= 1e-12 * self.half_widths[i]
            })
    }
}

/// Tubes of one orientation class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeFamily {
    pub label: f64,
    pub tubes: Vec<Tube>,
}

/// `eta_hat(u) = exp(-1/(1 - u^2))` on `(-1, 1)`, zero elsewhere.
pub fn eta_hat(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// `eta(t) = (1/2pi) int eta_hat(u) e^{iut} du`, real and even.
pub fn eta(t: f64) -> f64 {
    double_exponential::integrate(|u| eta_hat(u) * (u * t).cos(), 0.0, 1.0, 1e-15).integral / PI
}

pub fn eta_zero() -> f64 {
    static ETA0: OnceLock<f64> = OnceLock::new();
    *ETA0.get_or_init(|| eta(0.0))
}

/// Adds `sum_T psi_T` over a family sharing axes and half-widths to the spectrum `field`; returns
/// the family's own `int |f_theta|^2`. `psi_T(x) = prod_i eta((x - c).e_i / w_i) / eta(0)`.
fn add_family(field: &mut Field, tubes: &[Tube]) -> Result<f64> {
    let Some(t0) = tubes.first() else {
        return Ok(0.0);
    };
    let spec = field.spec();
    if t0.dim != spec.dim {
        return invalid(format!("tube dimension {} on a {}D grid", t0.dim, spec.dim));
    }
    if tubes.iter().any(|t| !t0.same_shape(t)) {
        return invalid("a tube family must share axes and half-widths");
    }
    let d = spec.dim;
    let h = spec.spacing();
    for i in 0..d {
        if 2.0 * t0.half_widths[i] / h < 4.0 {
            return Err(Error::Resolution(format!(
                "tube width {} spans fewer than 4 grid cells of size {h}",
                2.0 * t0.half_widths[i]
            )));
        }
    }
    for t in tubes {
        for c in t.corners() {
            if c[..d].iter().any(|v| *v < -1e-12 || *v > spec.period * (1.0 + 1e-12)) {
                return invalid(format!("tube at {:?} leaves the period box", &t.center[..d]));
            }
        }
    }
    // frequency support |xi . e_i| <= 1/w_i, as an index box
    let step = 2.0 * PI / spec.period;
    let mut reach = [0i64; 3];
    for j in 0..d {
        let bound: f64 = (0..d).map(|i| t0.axes[i][j].abs() / t0.half_widths[i]).sum();
        reach[j] = (bound / step).floor() as i64;
        if reach[j] >= (spec.n / 2) as i64 {
            return Err(Error::Resolution(format!(
                "dual plank reaches frequency {bound:.4} beyond the Nyquist limit {:.4}",
                spec.nyquist()
            )));
        }
    }
    let norm = (spec.len() as f64).sqrt() / spec.volume() / eta_zero().powi(d as i32);
    let n = spec.n as i64;
    let mut energy = 0.0;
    let mut ix = [-reach[0], -reach[1], -reach[2]];
    for a in d..3 {
        ix[a] = 0;
    }
    loop {
        let mut xi = Vec3::zeros();
        for a in 0..d {
            xi[a] = ix[a] as f64 * step;
        }
        let mut prof = 1.0;
        for i in 0..d {
            let u = t0.half_widths[i] * xi.dot(&t0.axes[i]);
            prof *= t0.half_widths[i] * eta_hat(u);
            if prof == 0.0 {
                break;
            }
        }
        if prof != 0.0 {
            let mut phase = Complex64::new(0.0, 0.0);
            for t in tubes {
                let dot: f64 = (0..d).map(|a| xi[a] * t.center[a]).sum();
                phase += Complex64::from_polar(1.0, -dot);
            }
            let c = phase * (prof * norm);
            let mut flat = [0usize; 3];
            for a in 0..d {
                flat[a] = ix[a].rem_euclid(n) as usize;
            }
            let k = spec.flatten(flat);
            field.data_mut()[k] += c;
            energy += c.norm_sqr();
        }
        // advance the odometer, last axis fastest
        let mut a = d;
        loop {
            if a == 0 {
                return Ok(energy * spec.cell());
            }
            a -= 1;
            if ix[a] < reach[a] {
                ix[a] += 1;
                break;
            }
            ix[a] = -reach[a];
        }
    }
}

/// The packet of a single tube, in physical space.
pub fn bump_packet(tube: &Tube, spec: GridSpec) -> Result<Field> {
    let mut f = Field::zeros(spec).into_freq();
    add_family(&mut f, std::slice::from_ref(tube))?;
    Ok(f.into_phys())
}

/// `f = sum_theta f_theta` in frequency space, with `int |f_theta|^2` per family.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub field: Field,
    pub labels: Vec<f64>,
    pub energies: Vec<f64>,
    pub tube_counts: Vec<usize>,
}

impl Assembly {
    pub fn energy_sum(&self) -> f64 {
        self.energies.iter().sum()
    }
}

pub fn assemble_f(spec: GridSpec, families: &[TubeFamily]) -> Result<Assembly> {
    let mut field = Field::zeros(spec).into_freq();
    let mut energies = Vec::with_capacity(families.len());
    for fam in families {
        energies.push(add_family(&mut field, &fam.tubes)?);
    }
    Ok(Assembly {
        field,
        labels: families.iter().map(|f| f.label).collect(),
        energies,
        tube_counts: families.iter().map(|f| f.tubes.len()).collect(),
    })
}

/// Tubes for direction `angle`: a greedy cover of the projections `(x - origin).u` by intervals
/// of half-width `delta`, each becoming a tube `delta x length` (half-widths) centered on the
/// line through `origin` along `u = (cos angle, sin angle)`.
pub fn tubes_from_projection(
    points: &[[f64; 2]],
    origin: [f64; 2],
    angle: f64,
    delta: f64,
    length: f64,
) -> Result<Vec<Tube>> {
    if points.is_empty() {
        return Err(Error::Empty("projected points"));
    }
    let (s, c) = angle.sin_cos();
    let mut p: Vec<f64> = points.iter().map(|x| (x[0] - origin[0]) * c + (x[1] - origin[1]) * s).collect();
    p.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < p.len() {
        let mid = p[i] + delta;
        out.push(Tube::planar([origin[0] + mid * c, origin[1] + mid * s], angle, [delta, length])?);
        while i < p.len() && p[i] <= mid + delta {
            i += 1;
        }
    }
    Ok(out)
}
