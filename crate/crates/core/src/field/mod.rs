//! Periodic sampled fields on `[0, L)^d` with unitary FFTs, wave-packet sums and their
//! frequency splits.

mod packet;
mod weight;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::curve::FrenetFrame;
use crate::error::{invalid, Error, Result};
use crate::planks::{mixed_scales, PartKind};
use crate::Vec3;

pub use packet::{assemble_f, bump_packet, eta, eta_hat, eta_zero, tubes_from_projection, Assembly, Tube, TubeFamily};
pub use weight::{tiling_weight_sum, weight, weight_convolution_bound, ConvolutionReport, WeightParams};

/// Shape of a periodic grid: `n` samples per axis on `[0, period)^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub period: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, period: f64) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return invalid(format!("fields are 2 or 3 dimensional, got {dim}"));
        }
        if !n.is_power_of_two() || n < 2 {
            return invalid(format!("grid size {n} is not a power of two >= 2"));
        }
        if !(period > 0.0 && period.is_finite()) {
            return invalid("period must be positive");
        }
        Ok(Self { dim, n, period })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn volume(&self) -> f64 {
        self.period.powi(self.dim as i32)
    }

    /// Cell volume `h^d`.
    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Largest representable angular frequency per axis.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.n as f64 / self.period
    }

    fn unflatten(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.dim).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn flatten(&self, ix: [usize; 3]) -> usize {
        (0..self.dim).fold(0, |acc, a| acc * self.n + ix[a])
    }

    /// Physical coordinates of the sample at flat index `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        self.unflatten(idx).map(|i| i as f64 * h)
    }

    /// Signed frequency index of an FFT bin.
    pub fn signed(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Angular frequency of the bin at flat index `idx` (unused axes are zero).
    pub fn freq(&self, idx: usize) -> Vec3 {
        let ix = self.unflatten(idx);
        let s = 2.0 * std::f64::consts::PI / self.period;
        let mut v = Vec3::zeros();
        for a in 0..self.dim {
            v[a] = self.signed(ix[a]) as f64 * s;
        }
        v
    }
}

/// Complex samples on a periodic grid, held either in physical space or as unitary DFT
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    spec: GridSpec,
    data: Vec<Complex64>,
    freq: bool,
}

impl Field {
    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, data: vec![Complex64::new(0.0, 0.0); spec.len()], freq: false }
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(&[f64; 3]) -> Complex64) -> Self {
        let data = (0..spec.len()).map(|i| f(&spec.point(i))).collect();
        Self { spec, data, freq: false }
    }

    /// Frequency-domain field from a function of the angular frequency.
    pub fn from_spectrum(spec: GridSpec, mut f: impl FnMut(&Vec3) -> Complex64) -> Self {
        let data = (0..spec.len()).map(|i| f(&spec.freq(i))).collect();
        Self { spec, data, freq: true }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn is_freq(&self) -> bool {
        self.freq
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn to_freq(&mut self) {
        if !self.freq {
            self.transform(false);
            self.freq = true;
        }
    }

    pub fn to_phys(&mut self) {
        if self.freq {
            self.transform(true);
            self.freq = false;
        }
    }

    pub fn into_phys(mut self) -> Self {
        self.to_phys();
        self
    }

    pub fn into_freq(mut self) -> Self {
        self.to_freq();
        self
    }

    fn transform(&mut self, inverse: bool) {
        let n = self.spec.n;
        let mut planner = FftPlanner::<f64>::new();
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let d = self.spec.dim;
        let norm = 1.0 / (n as f64).sqrt();
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            let outer = n.pow(axis as u32);
            for o in 0..outer {
                for r in 0..stride {
                    let base = o * n * stride + r;
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = self.data[base + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        self.data[base + j * stride] = v * norm;
                    }
                }
            }
        }
    }

    fn same_shape(&self, other: &Field) -> Result<()> {
        if self.spec != other.spec || self.freq != other.freq {
            return invalid("fields differ in grid or domain");
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Field) -> Result<()> {
        self.same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    /// Frequency-domain field multiplied pointwise by `m(xi)`.
    pub fn multiplied(&self, m: impl Fn(&Vec3) -> f64) -> Result<Field> {
        if !self.freq {
            return invalid("spectral multiplier needs a frequency-domain field");
        }
        let mut out = self.clone();
        for (i, v) in out.data.iter_mut().enumerate() {
            let w = m(&self.spec.freq(i));
            *v *= w;
        }
        Ok(out)
    }

    /// `int |f|^2` over the period box; equal in both domains.
    pub fn l2_squared(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.spec.cell()
    }

    /// Largest `|f - g|` over samples, relative to the largest `|f|`.
    pub fn max_rel_diff(&self, other: &Field) -> Result<f64> {
        self.same_shape(other)?;
        let scale = self.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let diff = self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        Ok(if scale > 0.0 { diff / scale } else { diff })
    }

    /// Samples inside the region described by `pred` on physical coordinates.
    pub fn mask(&self, pred: impl Fn(&[f64; 3]) -> bool) -> Vec<bool> {
        (0..self.spec.len()).map(|i| pred(&self.spec.point(i))).collect()
    }

    /// Little-endian header (dim, sizes, period, domain flag), then interleaved re/im, row-major.
    pub fn write_raw<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.spec.dim as u64).to_le_bytes())?;
        for _ in 0..self.spec.dim {
            w.write_all(&(self.spec.n as u64).to_le_bytes())?;
        }
        w.write_all(&self.spec.period.to_le_bytes())?;
        w.write_all(&(self.freq as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_raw<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = [0u8; 8];
        let mut word = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut buf)?;
            Ok(buf)
        };
        let dim = u64::from_le_bytes(word(&mut r)?) as usize;
        if !(dim == 2 || dim == 3) {
            return Err(Error::Parse(format!("field header has dimension {dim}")));
        }
        let mut sizes = Vec::new();
        for _ in 0..dim {
            sizes.push(u64::from_le_bytes(word(&mut r)?) as usize);
        }
        if sizes.iter().any(|s| *s != sizes[0]) || sizes[0] > 1 << 12 {
            return Err(Error::Parse(format!("unsupported field sizes {sizes:?}")));
        }
        let period = f64::from_le_bytes(word(&mut r)?);
        let freq = match u64::from_le_bytes(word(&mut r)?) {
            0 => false,
            1 => true,
            f => return Err(Error::Parse(format!("bad domain flag {f}"))),
        };
        let spec = GridSpec::new(dim, sizes[0], period).map_err(|e| Error::Parse(e.to_string()))?;
        let mut data = Vec::with_capacity(spec.len());
        for _ in 0..spec.len() {
            let re = f64::from_le_bytes(word(&mut r)?);
            let im = f64::from_le_bytes(word(&mut r)?);
            data.push(Complex64::new(re, im));
        }
        Ok(Self { spec, data, freq })
    }
}

/// Smooth step: 1 for `t <= 0`, 0 for `t >= 1`, `C^infinity` in between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        b / (a + b)
    }
}

/// `eta_l`: 1 for `|xi| <= 1/(K delta)`, 0 for `|xi| >= 2/(K delta)`.
pub fn low_cutoff(xi: &Vec3, delta: f64, k: f64) -> f64 {
    let r0 = 1.0 / (k * delta);
    smooth_step(xi.norm() / r0 - 1.0)
}

fn check_split(delta: f64, k: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return invalid("delta must lie in (0, 1)");
    }
    if !(k >= 1.0 && k <= 1.0 / delta * (1.0 + 1e-12)) {
        return Err(Error::Invalid(format!("K = {k} outside [1, 1/delta]")));
    }
    Ok(())
}

/// Frequency-domain `(low, high)` with `low = eta_l f_hat` and `high = f_hat - low`.
pub fn high_low_spectra(f: &Field, delta: f64, k: f64) -> Result<(Field, Field)> {
    check_split(delta, k)?;
    let spec = f.clone().into_freq();
    let low = spec.multiplied(|xi| low_cutoff(xi, delta, k))?;
    let mut high = spec;
    for (h, l) in high.data.iter_mut().zip(&low.data) {
        *h -= l;
    }
    Ok((low, high))
}

/// Physical `(low, high)` parts of `f`; they sum to `f` up to rounding.
pub fn high_low_split(f: &Field, delta: f64, k: f64) -> Result<(Field, Field)> {
    let (low, high) = high_low_spectra(f, delta, k)?;
    Ok((low.into_phys(), high.into_phys()))
}

/// `chi_b(t)`: 1 for `|t| <= b`, 0 for `|t| >= sqrt(2) b`.
fn chi(b: f64, t: f64) -> f64 {
    smooth_step((t.abs() / b - 1.0) / (std::f64::consts::SQRT_2 - 1.0))
}

/// Band edges in `|xi_2|`: the sqrt part lives below the first, mixed part `i` between edges
/// `i` and `i + 1`; the last edge is `1/K`.
fn mixed_edges(delta: f64, k: f64) -> (Vec<f64>, Vec<f64>) {
    let lambdas = mixed_scales(delta, k);
    let mut edges: Vec<f64> = lambdas.iter().rev().map(|l| l / 2.0).collect();
    edges.push(1.0 / k);
    (edges, lambdas.into_iter().rev().collect())
}

/// Smooth partition of unity following the slab decomposition in the frame at `theta`:
/// high `1 - chi(x2)`, low `chi(x2) chi(x3)`, sqrt and dyadic bands
/// `(chi_{e_i} - chi_{e_{i-1}})(x2) (1 - chi(x3))`, all with cutoff scale `1/K`.
pub fn mixed_weights(frame: &FrenetFrame, delta: f64, k: f64, xi: &Vec3) -> Vec<(PartKind, f64)> {
    let c = frame.coords(xi);
    let kinv = 1.0 / k;
    let (edges, lambdas) = mixed_edges(delta, k);
    let lo3 = chi(kinv, c.z);
    let mut out = vec![
        (PartKind::High, 1.0 - chi(kinv, c.y)),
        (PartKind::Low, chi(kinv, c.y) * lo3),
        (PartKind::Sqrt, chi(edges[0], c.y) * (1.0 - lo3)),
    ];
    for (i, l) in lambdas.iter().enumerate() {
        let band = chi(edges[i + 1], c.y) - chi(edges[i], c.y);
        out.push((PartKind::Mixed(*l), band * (1.0 - lo3)));
    }
    out
}

/// Split a 3D field into the labeled parts of [`mixed_weights`]; the parts are returned in
/// physical space and sum to `f`.
pub fn mixed_split_3d(f: &Field, frame: &FrenetFrame, delta: f64, k: f64) -> Result<Vec<(PartKind, Field)>> {
    if f.dim() != 3 {
        return Err(Error::Invalid(format!("mixed split needs a 3D field, got dimension {}", f.dim())));
    }
    check_split(delta, k)?;
    let spec = f.clone().into_freq();
    let labels: Vec<PartKind> = mixed_weights(frame, delta, k, &Vec3::zeros()).into_iter().map(|p| p.0).collect();
    let mut parts: Vec<Field> = labels.iter().map(|_| Field { freq: true, ..Field::zeros(f.spec) }).collect();
    for (i, v) in spec.data.iter().enumerate() {
        if *v == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (p, (_, w)) in parts.iter_mut().zip(mixed_weights(frame, delta, k, &spec.spec.freq(i))) {
            p.data[i] = v * w;
        }
    }
    Ok(labels.into_iter().zip(parts.into_iter().map(Field::into_phys)).collect())
}

/// Fraction of spectral mass `sum |c|^2` of `f` at frequencies accepted by `inside`.
pub fn spectral_fraction(f: &Field, inside: impl Fn(&Vec3) -> bool) -> f64 {
    let spec = f.clone().into_freq();
    let total: f64 = spec.data.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 1.0;
    }
    let kept: f64 = spec
        .data
        .iter()
        .enumerate()
        .filter(|(i, _)| inside(&spec.spec.freq(*i)))
        .map(|(_, v)| v.norm_sqr())
        .sum();
    kept / total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub label: String,
    /// `int_region |f|^2`
    pub l2: f64,
    /// `(p, int_region |f|^p)`
    pub lp: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub region_measure: f64,
    pub rows: Vec<EnergyRow>,
}

/// Riemann sums of `|f|^p`, `p` in `{2, 4, 6}`, over the masked samples of each part.
pub fn energy_report(parts: &[(String, &Field)], mask: &[bool]) -> Result<EnergyReport> {
    let Some((_, first)) = parts.first() else {
        return Err(Error::Empty("energy parts"));
    };
    let spec = first.spec;
    if mask.len() != spec.len() {
        return invalid("mask length differs from the grid");
    }
    let cell = spec.cell();
    let mut rows = Vec::new();
    for (label, f) in parts {
        if f.spec != spec {
            return invalid("energy parts live on different grids");
        }
        let phys;
        let g = if f.freq {
            phys = (*f).clone().into_phys();
            &phys
        } else {
            *f
        };
        let mut sums = [0.0; 3];
        for (v, _) in g.data.iter().zip(mask).filter(|(_, m)| **m) {
            let a = v.norm_sqr();
            sums[0] += a;
            sums[1] += a * a;
            sums[2] += a * a * a;
        }
        rows.push(EnergyRow {
            label: label.clone(),
            l2: sums[0] * cell,
            lp: vec![(2, sums[0] * cell), (4, sums[1] * cell), (6, sums[2] * cell)],
        });
    }
    Ok(EnergyReport {
        region_measure: mask.iter().filter(|m| **m).count() as f64 * cell,
        rows,
    })
}
