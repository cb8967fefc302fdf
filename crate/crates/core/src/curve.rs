//! Curves on the unit sphere, their Frenet frames, and the light cone they sweep out.

use std::f64::consts::{PI, SQRT_2};
use std::io::{Read, Write};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::Vec3;

/// Below this value of |det(g, g', g'')| a frame is treated as degenerate.
pub const NON_DEGENERACY: f64 = 1e-8;

/// Torsion below this magnitude makes the binormal reparametrization singular.
pub const MIN_TORSION: f64 = 1e-6;

const UNIT_TOL: f64 = 1e-8;

/// Moving frame `(e1, e2, e3)` with torsion at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrenetFrame {
    pub theta: f64,
    pub e1: Vec3,
    pub e2: Vec3,
    pub e3: Vec3,
    pub tau: f64,
}

impl FrenetFrame {
    /// The standard basis, used for axis-aligned boxes that do not come from a curve.
    pub fn standard() -> Self {
        Self {
            theta: 0.0,
            e1: Vec3::x(),
            e2: Vec3::y(),
            e3: Vec3::z(),
            tau: 0.0,
        }
    }

    pub fn axis(&self, i: usize) -> Vec3 {
        match i {
            0 => self.e1,
            1 => self.e2,
            _ => self.e3,
        }
    }

    /// Coordinates `(xi . e1, xi . e2, xi . e3)`.
    pub fn coords(&self, xi: &Vec3) -> Vec3 {
        Vec3::new(xi.dot(&self.e1), xi.dot(&self.e2), xi.dot(&self.e3))
    }

    /// Inverse of [`coords`](Self::coords).
    pub fn embed(&self, c: &Vec3) -> Vec3 {
        self.e1 * c.x + self.e2 * c.y + self.e3 * c.z
    }

    /// Largest deviation of the Gram matrix from the identity, including the handedness check
    /// `e3 = e1 x e2`.
    pub fn orthonormality_defect(&self) -> f64 {
        let m = Matrix3::from_columns(&[self.e1, self.e2, self.e3]);
        let g = m.transpose() * m - Matrix3::identity();
        let hand = (self.e1.cross(&self.e2) - self.e3).amax();
        g.amax().max(hand)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Table {
    theta0: f64,
    step: f64,
    gamma: Vec<Vec3>,
    d1: Vec<Vec3>,
    d2: Vec<Vec3>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Kind {
    LightCone,
    Tabulated(Table),
}

/// A non-degenerate unit-speed curve on the sphere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SphericalCurve {
    kind: Kind,
    domain: (f64, f64),
}

impl SphericalCurve {
    /// `g(t) = 2^{-1/2} (cos(sqrt2 t), sin(sqrt2 t), 1)` on `[0, sqrt2 pi]`.
    pub fn light_cone() -> Self {
        Self {
            kind: Kind::LightCone,
            domain: (0.0, SQRT_2 * PI),
        }
    }

    /// Builds a curve from samples of `g, g', g''` on a uniform grid.
    pub fn tabulated(thetas: &[f64], gamma: &[Vec3], d1: &[Vec3], d2: &[Vec3]) -> Result<Self> {
        let n = thetas.len();
        if n < 2 {
            return invalid("a tabulated curve needs at least two samples");
        }
        if gamma.len() != n || d1.len() != n || d2.len() != n {
            return invalid("sample columns have different lengths");
        }
        let step = (thetas[n - 1] - thetas[0]) / (n - 1) as f64;
        if !(step > 0.0) {
            return invalid("parameter grid must be increasing");
        }
        for (i, t) in thetas.iter().enumerate() {
            let expect = thetas[0] + step * i as f64;
            if (t - expect).abs() > 1e-9 * step.max(1.0) {
                return invalid(format!("parameter grid is not uniform at row {i}"));
            }
        }
        for i in 0..n {
            if (gamma[i].norm() - 1.0).abs() > UNIT_TOL {
                return invalid(format!("|g| != 1 at row {i}"));
            }
            if (d1[i].norm() - 1.0).abs() > UNIT_TOL {
                return invalid(format!("|g'| != 1 at row {i}"));
            }
            let det = gamma[i].dot(&d1[i].cross(&d2[i]));
            if det.abs() < NON_DEGENERACY {
                return Err(Error::Degenerate {
                    theta: thetas[i],
                    det,
                });
            }
        }
        Ok(Self {
            kind: Kind::Tabulated(Table {
                theta0: thetas[0],
                step,
                gamma: gamma.to_vec(),
                d1: d1.to_vec(),
                d2: d2.to_vec(),
            }),
            domain: (thetas[0], thetas[n - 1]),
        })
    }

    /// Tabulates the curve whose Frenet frame solves `e1' = e2, e2' = -e1 + tau e3, e3' = -tau e2`
    /// with the standard basis at the left end of `domain`.
    pub fn from_torsion(tau: impl Fn(f64) -> f64, domain: (f64, f64), intervals: usize) -> Result<Self> {
        if intervals == 0 || !(domain.1 > domain.0) {
            return invalid("need a nonempty domain and at least one interval");
        }
        const SUB: usize = 32;
        let h = (domain.1 - domain.0) / intervals as f64;
        let dt = h / SUB as f64;
        let mut e = [Vec3::x(), Vec3::y(), Vec3::z()];
        let rhs = |t: f64, e: &[Vec3; 3]| {
            let k = tau(t);
            [e[1], -e[0] + e[2] * k, -e[1] * k]
        };
        let mut thetas = Vec::with_capacity(intervals + 1);
        let mut g = Vec::with_capacity(intervals + 1);
        let mut g1 = Vec::with_capacity(intervals + 1);
        let mut g2 = Vec::with_capacity(intervals + 1);
        for i in 0..=intervals {
            let t = domain.0 + h * i as f64;
            thetas.push(t);
            g.push(e[0]);
            g1.push(e[1]);
            g2.push(-e[0] + e[2] * tau(t));
            if i == intervals {
                break;
            }
            for s in 0..SUB {
                let t0 = t + dt * s as f64;
                let k1 = rhs(t0, &e);
                let y2 = add(&e, &k1, dt / 2.0);
                let k2 = rhs(t0 + dt / 2.0, &y2);
                let y3 = add(&e, &k2, dt / 2.0);
                let k3 = rhs(t0 + dt / 2.0, &y3);
                let y4 = add(&e, &k3, dt);
                let k4 = rhs(t0 + dt, &y4);
                for j in 0..3 {
                    e[j] += (k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]) * (dt / 6.0);
                }
            }
            e = gram_schmidt(&e);
        }
        Self::tabulated(&thetas, &g, &g1, &g2)
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn is_light_cone(&self) -> bool {
        matches!(self.kind, Kind::LightCone)
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.domain.0 && theta <= self.domain.1
    }

    fn check(&self, theta: f64) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            Err(Error::Domain {
                value: theta,
                lo: self.domain.0,
                hi: self.domain.1,
            })
        }
    }

    /// `(g, g', g'')` at `theta`.
    pub fn jet(&self, theta: f64) -> Result<[Vec3; 3]> {
        self.check(theta)?;
        Ok(match &self.kind {
            Kind::LightCone => {
                let (s, c) = (SQRT_2 * theta).sin_cos();
                [
                    Vec3::new(c, s, 1.0) / SQRT_2,
                    Vec3::new(-s, c, 0.0),
                    Vec3::new(-c, -s, 0.0) * SQRT_2,
                ]
            }
            Kind::Tabulated(t) => t.eval(theta),
        })
    }

    pub fn frenet_frame(&self, theta: f64) -> Result<FrenetFrame> {
        let [g, g1, g2] = self.jet(theta)?;
        let det = g.dot(&g1.cross(&g2));
        if det.abs() < NON_DEGENERACY {
            return Err(Error::Degenerate { theta, det });
        }
        if let Kind::LightCone = self.kind {
            return Ok(FrenetFrame {
                theta,
                e1: g,
                e2: g1,
                e3: g.cross(&g1),
                tau: det,
            });
        }
        // interpolated jets are only approximately orthonormal between samples
        let e = gram_schmidt(&[g, g1, Vec3::zeros()]);
        Ok(FrenetFrame {
            theta,
            e1: e[0],
            e2: e[1],
            e3: e[2],
            tau: det,
        })
    }

    pub fn torsion(&self, theta: f64) -> Result<f64> {
        let [g, g1, g2] = self.jet(theta)?;
        Ok(g.dot(&g1.cross(&g2)))
    }

    /// Reads the CSV layout `theta, gx, gy, gz, g'x, g'y, g'z, g''x, g''y, g''z` with a header row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let mut thetas = Vec::new();
        let (mut g, mut g1, mut g2) = (Vec::new(), Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 10 {
                return Err(Error::Parse(format!("row {row}: expected 10 columns, found {}", rec.len())));
            }
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {row}: {e}"))))
                .collect::<Result<_>>()?;
            thetas.push(v[0]);
            g.push(Vec3::new(v[1], v[2], v[3]));
            g1.push(Vec3::new(v[4], v[5], v[6]));
            g2.push(Vec3::new(v[7], v[8], v[9]));
        }
        Self::tabulated(&thetas, &g, &g1, &g2)
    }

    /// Writes `samples + 1` rows over the domain in the layout read by [`read_csv`](Self::read_csv).
    pub fn write_csv<W: Write>(&self, writer: W, samples: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "theta", "gx", "gy", "gz", "dgx", "dgy", "dgz", "ddgx", "ddgy", "ddgz",
        ])?;
        let (a, b) = self.domain;
        let n = samples.max(1);
        for i in 0..=n {
            let t = if i == n { b } else { a + (b - a) * i as f64 / n as f64 };
            let jet = self.jet(t)?;
            let mut rec = vec![t.to_string()];
            for v in jet.iter() {
                rec.extend(v.iter().map(|x| x.to_string()));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Table {
    fn eval(&self, theta: f64) -> [Vec3; 3] {
        let n = self.gamma.len();
        let u = (theta - self.theta0) / self.step;
        let i = (u.floor() as usize).min(n - 2);
        let t = u - i as f64;
        let h = self.step;
        let (p0, v0, a0) = (self.gamma[i], self.d1[i] * h, self.d2[i] * h * h);
        let (p1, v1, a1) = (self.gamma[i + 1], self.d1[i + 1] * h, self.d2[i + 1] * h * h);
        let (t2, t3, t4, t5) = (t * t, t * t * t, t * t * t * t, t * t * t * t * t);
        let b = [
            1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
            t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
            (t2 - 3.0 * t3 + 3.0 * t4 - t5) / 2.0,
            10.0 * t3 - 15.0 * t4 + 6.0 * t5,
            -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
            (t3 - 2.0 * t4 + t5) / 2.0,
        ];
        let db = [
            -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
            1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
            (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4) / 2.0,
            30.0 * t2 - 60.0 * t3 + 30.0 * t4,
            -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
            (3.0 * t2 - 8.0 * t3 + 5.0 * t4) / 2.0,
        ];
        let ddb = [
            -60.0 * t + 180.0 * t2 - 120.0 * t3,
            -36.0 * t + 96.0 * t2 - 60.0 * t3,
            (2.0 - 18.0 * t + 36.0 * t2 - 20.0 * t3) / 2.0,
            60.0 * t - 180.0 * t2 + 120.0 * t3,
            -24.0 * t + 84.0 * t2 - 60.0 * t3,
            (6.0 * t - 24.0 * t2 + 20.0 * t3) / 2.0,
        ];
        let k = [p0, v0, a0, p1, v1, a1];
        let comb = |w: &[f64; 6]| k.iter().zip(w).fold(Vec3::zeros(), |acc, (v, c)| acc + v * *c);
        [comb(&b), comb(&db) / h, comb(&ddb) / (h * h)]
    }
}

fn add(e: &[Vec3; 3], k: &[Vec3; 3], s: f64) -> [Vec3; 3] {
    [e[0] + k[0] * s, e[1] + k[1] * s, e[2] + k[2] * s]
}

/// Orthonormalizes the first two vectors and completes with their cross product.
fn gram_schmidt(e: &[Vec3; 3]) -> [Vec3; 3] {
    let a = e[0].normalize();
    let b = (e[1] - a * a.dot(&e[1])).normalize();
    [a, b, a.cross(&b)]
}

/// Gram matrix `M[i][j] = e_i(theta) . e_j(theta')`.
pub fn frame_inner_products(curve: &SphericalCurve, theta: f64, theta2: f64) -> Result<Matrix3<f64>> {
    let f = curve.frenet_frame(theta)?;
    let g = curve.frenet_frame(theta2)?;
    let a = Matrix3::from_columns(&[f.e1, f.e2, f.e3]);
    let b = Matrix3::from_columns(&[g.e1, g.e2, g.e3]);
    Ok(a.transpose() * b)
}

/// Distance from `xi` to the light cone `{x3^2 = x1^2 + x2^2}`.
///
/// In the closed upper half-space this is `2^{-1/2} |x3 - sqrt(x1^2 + x2^2)|`; the lower nappe is
/// handled by symmetry.
pub fn cone_distance(xi: &Vec3) -> f64 {
    let rho = xi.x.hypot(xi.y);
    (xi.z.abs() - rho).abs() / SQRT_2
}

/// Closest point `r e3(omega)` of the light cone, with `r < 0` on the lower nappe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    pub omega: f64,
    pub r: f64,
    pub foot: Vec3,
}

/// Foot of the perpendicular from `xi` to the light cone. On the axis every direction is a
/// minimizer and the smallest `omega` (zero) is returned.
pub fn nearest_cone_point(xi: &Vec3) -> Result<ConePoint> {
    if xi.norm() == 0.0 {
        return invalid("the origin is equidistant from every generator");
    }
    let rho = xi.x.hypot(xi.y);
    let period = SQRT_2 * PI;
    let upper = xi.z >= 0.0;
    let omega = if rho == 0.0 {
        0.0
    } else {
        let phi = xi.y.atan2(xi.x);
        // e3(omega) points along -(cos, sin) horizontally on the upper nappe
        let ang = if upper { phi + PI } else { phi };
        let w = ang.rem_euclid(2.0 * PI) / SQRT_2;
        if w >= period { 0.0 } else { w }
    };
    let r_abs = (rho + xi.z.abs()) / SQRT_2;
    let r = if upper { r_abs } else { -r_abs };
    let (s, c) = (SQRT_2 * omega).sin_cos();
    let e3 = Vec3::new(-c, -s, 1.0) / SQRT_2;
    Ok(ConePoint { omega, r, foot: e3 * r })
}

/// The truncated cone `{ r e3(omega) : r in [r_min, 1] }`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConeModel {
    r_min: f64,
}

impl ConeModel {
    pub fn new(r_min: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_min <= 1.0) {
            return invalid(format!("r_min = {r_min} must lie in (0, 1]"));
        }
        Ok(Self { r_min })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn point(&self, omega: f64, r: f64) -> Vec3 {
        let (s, c) = (SQRT_2 * omega).sin_cos();
        Vec3::new(-c, -s, 1.0) * (r / SQRT_2)
    }

    pub fn contains(&self, xi: &Vec3, tol: f64) -> bool {
        let r = xi.norm();
        r >= self.r_min - tol && r <= 1.0 + tol && cone_distance(xi) <= tol && xi.z >= 0.0
    }
}

/// `s(theta) = -int_a^theta dt / tau(t)` by the composite trapezoid rule, `a` the left end of the
/// domain.
pub fn binormal_speed(curve: &SphericalCurve, theta: f64, intervals: usize) -> Result<f64> {
    let (a, _) = curve.domain();
    curve.check(theta)?;
    let n = intervals.max(1);
    let h = (theta - a) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let t = a + h * i as f64;
        let tau = curve.torsion(t.min(theta))?;
        if tau.abs() < MIN_TORSION {
            return Err(Error::SingularTorsion { theta: t, tau });
        }
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        acc += w / tau;
    }
    Ok(-acc * h)
}

/// Frame reparametrized so that the binormal moves with unit speed toward `e2`.
///
/// The new parameter is `u = -int_a^s tau`, ranging over `[-int_a^b tau, 0]`; the frame at `u`
/// is the original frame at `s(u)`, so `d/du e3 = e2`. When `tau` is constant this coincides
/// with `s(u) = -u / tau` shifted to the left end of the domain.
#[derive(Debug, Clone)]
pub struct BinormalCurve {
    curve: SphericalCurve,
    thetas: Vec<f64>,
    /// cumulative `int_a^theta tau` at the grid nodes
    cumulative: Vec<f64>,
}

pub fn reparametrize_binormal(curve: &SphericalCurve, intervals: usize) -> Result<BinormalCurve> {
    let n = intervals.max(1);
    let (a, b) = curve.domain();
    let h = (b - a) / n as f64;
    let mut thetas = Vec::with_capacity(n + 1);
    let mut taus = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = if i == n { b } else { a + h * i as f64 };
        let tau = curve.torsion(t)?;
        if tau.abs() < MIN_TORSION {
            return Err(Error::SingularTorsion { theta: t, tau });
        }
        thetas.push(t);
        taus.push(tau);
    }
    if taus.iter().any(|t| t.signum() != taus[0].signum()) {
        return Err(Error::SingularTorsion { theta: a, tau: 0.0 });
    }
    let mut cumulative = vec![0.0; n + 1];
    for i in 1..=n {
        cumulative[i] = cumulative[i - 1] + 0.5 * h * (taus[i - 1] + taus[i]);
    }
    Ok(BinormalCurve {
        curve: curve.clone(),
        thetas,
        cumulative,
    })
}

impl BinormalCurve {
    /// Parameter range `[u_min, u_max]` of the reparametrized frame.
    pub fn domain(&self) -> (f64, f64) {
        let last = *self.cumulative.last().unwrap();
        if last >= 0.0 { (-last, 0.0) } else { (0.0, -last) }
    }

    /// The original parameter `s(u)`.
    pub fn s(&self, u: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if u < lo - 1e-12 || u > hi + 1e-12 {
            return Err(Error::Domain { value: u, lo, hi });
        }
        let target = -u;
        let c = &self.cumulative;
        let increasing = c[c.len() - 1] >= 0.0;
        let idx = if increasing {
            c.partition_point(|v| *v < target)
        } else {
            c.partition_point(|v| *v > target)
        };
        let i = idx.clamp(1, c.len() - 1);
        let (c0, c1) = (c[i - 1], c[i]);
        let w = if c1 == c0 { 0.0 } else { (target - c0) / (c1 - c0) };
        let t = self.thetas[i - 1] + w * (self.thetas[i] - self.thetas[i - 1]);
        let (a, b) = self.curve.domain();
        Ok(t.clamp(a, b))
    }

    pub fn frenet_frame(&self, u: f64) -> Result<FrenetFrame> {
        let s = self.s(u)?;
        let mut f = self.curve.frenet_frame(s)?;
        f.theta = u;
        Ok(f)
    }
}
