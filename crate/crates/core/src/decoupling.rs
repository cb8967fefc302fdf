//! Flat and cone decoupling ratios measured on random lattice data, and the bootstrap iteration.
//!
//! Frequencies live on the integer lattice (physical period `2 pi`), so a test function with
//! finitely many modes is a trigonometric polynomial and is sampled exactly by an inverse FFT on
//! any grid. A plank with `scale` S owns the lattice points `m` with `m / S` in the plank.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::curve::SphericalCurve;
use crate::error::{invalid, Error, Result};
use crate::planks::{sqrt_plank_plus, Plank, Range};
use crate::Vec3;

/// How the random test functions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    /// modes per plank; `None` takes every lattice point of the plank
    pub modes: Option<usize>,
    pub seed: u64,
    /// common character `e^{i a.x}` applied to every `f_T`
    pub modulation: [i64; 3],
}

impl DataSpec {
    pub fn new(modes: Option<usize>, seed: u64) -> Self {
        Self { modes, seed, modulation: [0; 3] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecouplingInstance {
    pub planks: Vec<Plank>,
    pub scale: f64,
    pub data: DataSpec,
    pub p: f64,
    /// samples per axis of the physical grid on `[0, 2 pi)^3`
    pub grid: [usize; 3],
    /// overlap constant to use; checked against the measured lattice overlap
    pub k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatResult {
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
    pub k: f64,
    pub measured_k: usize,
    pub planks: usize,
}

/// Lattice points inside a plank scaled by `scale`.
pub fn plank_lattice(plank: &Plank, scale: f64) -> Vec<[i64; 3]> {
    let corners = plank.corners();
    let mut lo = [i64::MAX; 3];
    let mut hi = [i64::MIN; 3];
    for c in &corners {
        for a in 0..3 {
            lo[a] = lo[a].min((c[a] * scale).floor() as i64);
            hi[a] = hi[a].max((c[a] * scale).ceil() as i64);
        }
    }
    let mut out = Vec::new();
    for i in lo[0]..=hi[0] {
        for j in lo[1]..=hi[1] {
            for k in lo[2]..=hi[2] {
                let xi = Vec3::new(i as f64, j as f64, k as f64) / scale;
                if plank.contains(&xi) {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

/// Random modes of one plank: unit amplitudes, uniform phases, from substream `index`.
fn draw_modes(lattice: &[[i64; 3]], data: &DataSpec, index: u64) -> Vec<([i64; 3], Complex64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(data.seed);
    rng.set_stream(index);
    let picks: Vec<usize> = match data.modes {
        Some(m) if m < lattice.len() => {
            let mut v = sample(&mut rng, lattice.len(), m).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..lattice.len()).collect(),
    };
    picks
        .into_iter()
        .map(|i| {
            let phase = rng.random::<f64>() * 2.0 * PI;
            let m = lattice[i];
            let shifted = [m[0] + data.modulation[0], m[1] + data.modulation[1], m[2] + data.modulation[2]];
            (shifted, Complex64::from_polar(1.0, phase))
        })
        .collect()
}

/// Samples `sum a_m e^{i m.x}` on the grid `x = 2 pi j / n`.
struct Synth {
    grid: [usize; 3],
    ffts: Vec<std::sync::Arc<dyn rustfft::Fft<f64>>>,
    scratch: Vec<Complex64>,
}

impl Synth {
    fn new(grid: [usize; 3]) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let ffts: Vec<_> = grid.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let len = ffts.iter().map(|f| f.get_inplace_scratch_len()).max().unwrap_or(0);
        Self { grid, ffts, scratch: vec![Complex64::new(0.0, 0.0); len] }
    }

    fn len(&self) -> usize {
        self.grid.iter().product()
    }

    fn eval(&mut self, modes: &[([i64; 3], Complex64)], out: &mut [Complex64]) {
        let [n0, n1, n2] = self.grid;
        out.fill(Complex64::new(0.0, 0.0));
        for (m, a) in modes {
            let i = m[0].rem_euclid(n0 as i64) as usize;
            let j = m[1].rem_euclid(n1 as i64) as usize;
            let k = m[2].rem_euclid(n2 as i64) as usize;
            out[(i * n1 + j) * n2 + k] += a;
        }
        let mut line = Vec::new();
        for axis in 0..3 {
            let n = self.grid[axis];
            if n == 1 {
                continue;
            }
            let stride: usize = self.grid[axis + 1..].iter().product();
            let outer: usize = self.grid[..axis].iter().product();
            line.resize(n, Complex64::new(0.0, 0.0));
            for o in 0..outer {
                for r in 0..stride {
                    let base = o * n * stride + r;
                    for (t, v) in line.iter_mut().enumerate() {
                        *v = out[base + t * stride];
                    }
                    self.ffts[axis].process_with_scratch(&mut line, &mut self.scratch);
                    for (t, v) in line.iter().enumerate() {
                        out[base + t * stride] = *v;
                    }
                }
            }
        }
    }
}

/// `(mean |f|^p)^{1/p}`; the normalized measure cancels in every ratio.
fn lp_norm(f: &[Complex64], p: f64) -> f64 {
    let half = p / 2.0;
    let s: f64 = if half.fract() == 0.0 {
        f.iter().map(|z| z.norm_sqr().powi(half as i32)).sum()
    } else {
        f.iter().map(|z| z.norm_sqr().powf(half)).sum()
    };
    (s / f.len() as f64).powf(1.0 / p)
}

fn check_grid(grid: [usize; 3]) -> Result<()> {
    if grid.contains(&0) {
        return invalid("sample grid has an empty axis");
    }
    if grid.iter().product::<usize>() > 1 << 24 {
        return Err(Error::Resolution(format!("sample grid {grid:?} is too large")));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(2.0..=6.0).contains(&p) {
        return invalid(format!("exponent p = {p} outside [2, 6]"));
    }
    Ok(())
}

/// Largest number of planks sharing a lattice point.
pub fn lattice_overlap(lattices: &[Vec<[i64; 3]>]) -> usize {
    let mut count = std::collections::HashMap::new();
    for l in lattices {
        for m in l {
            *count.entry(*m).or_insert(0usize) += 1;
        }
    }
    count.values().copied().max().unwrap_or(0)
}

/// `||sum f_T||_p / (K (#T)^{1/2 - 1/p} (sum ||f_T||_p^2)^{1/2})`.
pub fn flat_decoupling_ratio(inst: &DecouplingInstance) -> Result<FlatResult> {
    check_p(inst.p)?;
    check_grid(inst.grid)?;
    if inst.planks.is_empty() {
        return Err(Error::Empty("plank family"));
    }
    if !(inst.scale > 0.0) {
        return invalid("plank scale must be positive");
    }
    let lattices: Vec<_> = inst.planks.iter().map(|t| plank_lattice(t, inst.scale)).collect();
    if lattices.iter().any(Vec::is_empty) {
        return Err(Error::Resolution("a plank holds no lattice point".into()));
    }
    let measured = lattice_overlap(&lattices);
    let k = match inst.k {
        Some(k) if k < measured as f64 => {
            return Err(Error::Precondition(format!(
                "planks overlap {measured} times, more than the claimed K = {k}"
            )))
        }
        Some(k) => k,
        None => measured as f64,
    };
    let mut synth = Synth::new(inst.grid);
    let mut total = vec![Complex64::new(0.0, 0.0); synth.len()];
    let mut cur = total.clone();
    let mut sq = 0.0;
    for (i, l) in lattices.iter().enumerate() {
        let modes = draw_modes(l, &inst.data, i as u64);
        synth.eval(&modes, &mut cur);
        sq += lp_norm(&cur, inst.p).powi(2);
        for (t, c) in total.iter_mut().zip(&cur) {
            *t += c;
        }
    }
    let numerator = lp_norm(&total, inst.p);
    let count = inst.planks.len() as f64;
    let denominator = k * count.powf(0.5 - 1.0 / inst.p) * sq.sqrt();
    Ok(FlatResult {
        numerator,
        denominator,
        ratio: numerator / denominator,
        k,
        measured_k: measured,
        planks: inst.planks.len(),
    })
}

/// The box `[0, 128) x [0, 16) x [0, 16)` cut into 16 slabs of width 8 along the first axis,
/// sampled on a `128 x 16 x 16` grid.
pub fn tiling_instance(p: f64, data: DataSpec) -> Result<DecouplingInstance> {
    let frame = crate::curve::FrenetFrame::standard();
    let planks = (0..16)
        .map(|j| {
            let lo = 8.0 * j as f64;
            Plank::new(
                frame,
                [
                    Range::closed(lo, lo + 8.0).open_hi(),
                    Range::closed(0.0, 16.0).open_hi(),
                    Range::closed(0.0, 16.0).open_hi(),
                ],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecouplingInstance {
        planks,
        scale: 1.0,
        data,
        p,
        grid: [128, 16, 16],
        k: Some(1.0),
    })
}

/// Cone bench settings. Planks `A_omega = 2 P^+_{omega, delta^{1/2}}` (with `K = 1`) are scaled
/// by `scale` onto the lattice and sampled on an `n^3` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConeBench {
    pub deltas: Vec<f64>,
    pub ps: Vec<f64>,
    pub seeds: Vec<u64>,
    pub modes: Option<usize>,
    pub scale: f64,
    pub n: usize,
}

impl Default for ConeBench {
    fn default() -> Self {
        Self {
            deltas: vec![4f64.powi(-2), 4f64.powi(-3), 4f64.powi(-4), 4f64.powi(-5)],
            ps: vec![2.0, 4.0, 6.0],
            seeds: vec![0, 1, 2],
            modes: None,
            scale: 30.0,
            n: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeRow {
    pub delta: f64,
    pub p: f64,
    pub seed: u64,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeTable {
    pub rows: Vec<ConeRow>,
    /// `(p, alpha)` from the least-squares fit of `log ratio` against `log(1/delta)`
    pub alpha: Vec<(f64, f64)>,
    /// `(delta, seed)` pairs whose ratio went down as `p` went up; logged only
    pub non_monotone: Vec<(f64, u64)>,
}

impl ConeTable {
    pub fn alpha_at(&self, p: f64) -> Option<f64> {
        self.alpha.iter().find(|(q, _)| (q - p).abs() < 1e-12).map(|a| a.1)
    }

    /// Soft criterion: growth exponent at `p = 6` at most 0.1.
    pub fn passes(&self) -> Option<bool> {
        self.alpha_at(6.0).map(|a| a <= 0.1)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["delta", "p", "seed", "numerator", "denominator", "ratio"])?;
        for r in &self.rows {
            out.write_record([
                format!("{:e}", r.delta),
                r.p.to_string(),
                r.seed.to_string(),
                format!("{:.12e}", r.numerator),
                format!("{:.12e}", r.denominator),
                format!("{:.12e}", r.ratio),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// The decoupling planks at scale `delta` over `omega in delta^{1/2} Z cap [0, 1]`.
pub fn cone_planks(curve: &SphericalCurve, delta: f64) -> Result<Vec<Plank>> {
    let step = delta.sqrt();
    let count = (1.0 / step + 1e-9).floor() as usize;
    (0..=count)
        .map(|i| {
            let frame = curve.frenet_frame(i as f64 * step)?;
            Ok(sqrt_plank_plus(&frame, delta, 1.0)?.dilate(2.0))
        })
        .collect()
}

fn is_power_of_four(delta: f64) -> bool {
    let e = -delta.log(4.0);
    e > 0.5 && (e - e.round()).abs() < 1e-9
}

/// `||sum f_omega||_p / (sum ||f_omega||_p^2)^{1/2}` for one scale and seed, at every `p` in
/// `ps`, as `(p, numerator, denominator)`.
pub fn cone_decoupling_ratio(
    curve: &SphericalCurve,
    delta: f64,
    ps: &[f64],
    data: DataSpec,
    scale: f64,
    n: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    if !is_power_of_four(delta) {
        return invalid(format!("delta = {delta} is not a power of 1/4"));
    }
    for &p in ps {
        check_p(p)?;
    }
    let planks = cone_planks(curve, delta)?;
    let lattices: Vec<_> = planks.iter().map(|t| plank_lattice(t, scale)).collect();
    let reach = lattices.iter().flatten().flat_map(|m| m.iter().map(|v| v.abs())).max().unwrap_or(0);
    if 2 * reach >= n as i64 {
        return Err(Error::Resolution(format!(
            "frequency {reach} needs more than {n} samples per axis"
        )));
    }
    if lattices.iter().any(Vec::is_empty) {
        return Err(Error::Resolution(format!("a plank at delta = {delta} holds no lattice point")));
    }
    let mut synth = Synth::new([n; 3]);
    let mut total = vec![Complex64::new(0.0, 0.0); synth.len()];
    let mut cur = total.clone();
    let mut sq = vec![0.0; ps.len()];
    for (i, l) in lattices.iter().enumerate() {
        let modes = draw_modes(l, &data, i as u64);
        synth.eval(&modes, &mut cur);
        for (s, &p) in sq.iter_mut().zip(ps) {
            *s += lp_norm(&cur, p).powi(2);
        }
        for (t, c) in total.iter_mut().zip(&cur) {
            *t += c;
        }
    }
    Ok(ps.iter().zip(&sq).map(|(&p, s)| (p, lp_norm(&total, p), s.sqrt())).collect())
}

/// Runs the bench over all scales, exponents and seeds and fits the growth exponents.
pub fn cone_table(curve: &SphericalCurve, bench: &ConeBench) -> Result<ConeTable> {
    if bench.deltas.len() < 2 {
        return invalid("the growth fit needs at least two scales");
    }
    let mut rows = Vec::new();
    let mut non_monotone = Vec::new();
    for &delta in &bench.deltas {
        for &seed in &bench.seeds {
            let data = DataSpec::new(bench.modes, seed);
            let r = cone_decoupling_ratio(curve, delta, &bench.ps, data, bench.scale, bench.n)?;
            let ratios: Vec<f64> = r.iter().map(|(_, a, b)| a / b).collect();
            if ratios.windows(2).any(|w| w[1] < w[0]) {
                non_monotone.push((delta, seed));
            }
            for (p, numerator, denominator) in r {
                rows.push(ConeRow { delta, p, seed, numerator, denominator, ratio: numerator / denominator });
            }
        }
    }
    let alpha = bench
        .ps
        .iter()
        .map(|&p| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.p == p)
                .map(|r| ((1.0 / r.delta).ln(), r.ratio.ln()))
                .collect();
            (p, slope(&pts))
        })
        .collect();
    Ok(ConeTable { rows, alpha, non_monotone })
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Ratio of consecutive `c_n`.
pub const C0: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapChecks {
    /// largest `|ln delta_n - (eps/eps_n) ln delta|`, relative to `|ln delta|`
    pub closed_form_error: f64,
    /// largest `|x_{n+1} - (x_n - sqrt x_n)| / x_n`
    pub recursion_error: f64,
    pub step_bound: f64,
    pub steps_ok: bool,
    /// `y_n > n^2 y_1 / 14` for every `n`
    pub induction_ok: bool,
    /// `delta_n^{-10 sqrt eps_n} <= delta^{-10 sqrt eps}` for every `n`
    pub power_ok: bool,
}

impl BootstrapChecks {
    pub fn all_ok(&self) -> bool {
        self.closed_form_error <= 1e-10 && self.recursion_error <= 1e-12 && self.steps_ok && self.induction_ok && self.power_ok
    }
}

/// Sequences indexed from `n = 1`; entry `N` (0-based) is the first with `eps >= 1/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapState {
    pub epsilon: Vec<f64>,
    pub delta: Vec<f64>,
    pub c: Vec<f64>,
    pub x: Vec<f64>,
    /// `y_1 = x_{N+1}`, `y_{n+1} = f^{-1}(y_n)` with `f(t) = t - sqrt t`
    pub y: Vec<f64>,
    pub steps: usize,
    pub c0: f64,
    pub checks: BootstrapChecks,
}

impl BootstrapState {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn bootstrap_iterate(eps: f64, delta: f64, c: f64) -> Result<BootstrapState> {
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid(format!("epsilon = {eps} must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("delta = {delta} outside (0, 1)"));
    }
    if !(c > 0.0 && c <= 1.0) {
        return invalid(format!("c = {c} outside (0, 1]"));
    }
    let mut epsilon = vec![eps];
    let mut deltas = vec![delta];
    let mut cs = vec![c];
    while *epsilon.last().unwrap() < 0.5 {
        let n = epsilon.len();
        let e = epsilon[n - 1];
        epsilon.push(e / (1.0 - e.sqrt()));
        deltas.push(deltas[n - 1].powf(1.0 - e.sqrt()));
        cs.push(C0.powi(n as i32) * c);
    }
    let steps = epsilon.len() - 1;
    let x: Vec<f64> = epsilon.iter().map(|e| 1.0 / e).collect();

    let ld = delta.ln();
    let closed_form_error = epsilon
        .iter()
        .zip(&deltas)
        .map(|(e, d)| (d.ln() - eps / e * ld).abs() / ld.abs())
        .fold(0.0, f64::max);
    let recursion_error = x.windows(2).map(|w| (w[1] - (w[0] - w[0].sqrt())).abs() / w[0]).fold(0.0, f64::max);
    let step_bound = 5.0 / eps.sqrt();
    let mut y = vec![x[steps]];
    for _ in 0..steps {
        let t = *y.last().unwrap();
        y.push(t + 0.5 + (4.0 * t + 1.0).sqrt() / 2.0);
    }
    let induction_ok = y.iter().enumerate().all(|(i, v)| {
        let n = (i + 1) as f64;
        *v > n * n * y[0] / 14.0
    });
    let cap = -10.0 * eps.sqrt() * ld;
    let power_ok = epsilon
        .iter()
        .zip(&deltas)
        .all(|(e, d)| -10.0 * e.sqrt() * d.ln() <= cap * (1.0 + 1e-12));
    let checks = BootstrapChecks {
        closed_form_error,
        recursion_error,
        step_bound,
        steps_ok: steps as f64 <= step_bound,
        induction_ok,
        power_ok,
    };
    Ok(BootstrapState { epsilon, delta: deltas, c: cs, x, y, steps, c0: C0, checks })
}
