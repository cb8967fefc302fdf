use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use super::{num, ExperimentConfig, KPolicy, Report};
use crate::error::{invalid, Error, Result};
use crate::field::{
    assemble_f, high_low_spectra, low_cutoff, tubes_from_projection, GridSpec, Tube, TubeFamily, WeightParams,
};
use crate::nets::covering_number;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarstrandSettings {
    pub n: usize,
    pub period: f64,
    pub delta: f64,
    /// tube half-length
    pub length: f64,
    /// the lines `L_theta` pass through this point
    pub origin: [f64; 2],
    /// spacing of `Theta`; `delta` when absent
    pub theta_step: Option<f64>,
    pub ks: Vec<f64>,
    /// pinned constant in `int |f_h|^2 <= beta K sum int |f_theta|^2`
    pub beta: f64,
    /// constant of the `(delta, s)` condition on projections
    pub hypothesis_c: f64,
    /// directions sampled for the pointwise low-part bound
    pub low_bound_thetas: usize,
}

impl Default for MarstrandSettings {
    fn default() -> Self {
        Self {
            n: 1024,
            period: 2.0,
            delta: 2f64.powi(-8),
            length: 0.25,
            origin: [1.0, 1.0],
            theta_step: None,
            ks: vec![4.0, 8.0, 16.0],
            beta: 2.0,
            hypothesis_c: 4.0,
            low_bound_thetas: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KRow {
    pub k: f64,
    /// `int |f_h|^2`
    pub high_energy: f64,
    /// `int |f_h|^2 / (K sum_theta int |f_theta|^2)`
    pub ratio: f64,
    /// fraction of A-samples with `|f_l| < |f| / 2`
    pub dominance: f64,
    /// `max |f_l + f_h - f| / max |f|`
    pub partition_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowBoundRow {
    pub theta: f64,
    /// `max |f_theta,l(x)| / (K^{-1 + 1/(E-1)} #{T : T meets B(x, C K delta)})` over A-samples
    /// met by some tube, with `C = K^{1/(E-1)}`
    pub beta_prime: f64,
    /// largest `|f_theta,l|` at A-samples far from every tube
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisViolation {
    pub theta: f64,
    pub r: f64,
    /// left end of the worst interval `I_r` on `L_theta`
    pub start: f64,
    pub count: usize,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarstrandReport {
    pub delta: f64,
    pub s: f64,
    /// `log |A|_delta / log(1/delta)`
    pub a: f64,
    pub cells: usize,
    pub theta_count: usize,
    pub tube_count: usize,
    /// `sum_theta int |f_theta|^2`
    pub energy_sum: f64,
    /// `min f / #Theta` and `max f / #Theta` over A-samples
    pub f_min_ratio: f64,
    pub f_max_ratio: f64,
    pub imag_max: f64,
    pub k_rows: Vec<KRow>,
    pub beta: f64,
    /// largest `ratio` over the listed `K`
    pub beta_fit: f64,
    pub orthogonality_ok: bool,
    pub k_dom: f64,
    pub dominance: f64,
    pub dominance_ok: bool,
    pub weight_exponent: f64,
    pub low_bound: Vec<LowBoundRow>,
    /// largest `|p_theta(A) cap I_r|_delta / (r/delta)^s` over directions and intervals
    pub hypothesis_constant: f64,
    pub hypothesis_c: f64,
    pub violations: Vec<HypothesisViolation>,
    /// `int_A |f|^2` and `int_A |f_h|^2` at `k_dom`
    pub int_a_f2: f64,
    pub int_a_fh2: f64,
    /// `#Theta delta^{1 - a + s}`
    pub beta_required: f64,
    /// the constant produced by the measured chain of inequalities
    pub beta_chain: f64,
    pub final_holds: bool,
}

impl MarstrandReport {
    pub fn hypothesis_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Report for MarstrandReport {
    fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "high_energy", "ratio", "dominance", "partition_error"])?;
        for r in &self.k_rows {
            out.write_record([num(r.k), num(r.high_energy), num(r.ratio), num(r.dominance), num(r.partition_error)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Smallest dyadic `K` with `K^{s-1} <= 1/4`, capped at `1/delta`.
pub(crate) fn dominance_k(s: f64, delta: f64) -> f64 {
    let mut k: f64 = 1.0;
    while k.powf(s - 1.0) > 0.25 && k * 2.0 <= 1.0 / delta + 1e-9 {
        k *= 2.0;
    }
    k
}

/// Worst `(delta, s)` ratio of a sorted list of projections, with its interval.
fn s_condition(sorted: &[f64], delta: f64, s: f64) -> (f64, f64, f64, usize) {
    let mut net = Vec::new();
    for &p in sorted {
        if net.last().is_none_or(|q: &f64| p - q >= delta * (1.0 - 1e-9)) {
            net.push(p);
        }
    }
    let mut worst = (0.0, delta, net[0], 1);
    let mut r = delta;
    while r <= 1.0 + 1e-12 {
        let bound = (r / delta).powf(s);
        let mut j = 0;
        for i in 0..net.len() {
            while j < net.len() && net[j] - net[i] <= r * (1.0 + 1e-12) {
                j += 1;
            }
            let ratio = (j - i) as f64 / bound;
            if ratio > worst.0 {
                worst = (ratio, r, net[i], j - i);
            }
        }
        r *= 2.0;
    }
    worst
}

fn cell_mask(spec: &GridSpec, centers: &[[f64; 2]], side: f64) -> Vec<bool> {
    let h = spec.spacing();
    let n = spec.n as i64;
    let mut mask = vec![false; spec.len()];
    for c in centers {
        let range = |x: f64| {
            let lo = ((x - side / 2.0) / h - 1e-9).ceil() as i64;
            let hi = ((x + side / 2.0) / h - 1e-9).ceil() as i64;
            lo.max(0)..hi.min(n)
        };
        for i in range(c[0]) {
            for j in range(c[1]) {
                mask[spec.flatten([i as usize, j as usize, 0])] = true;
            }
        }
    }
    mask
}

fn dist_to_tube(t: &Tube, x: &[f64; 3]) -> f64 {
    let l = t.local(x);
    let a = (l[0].abs() - t.half_widths[0]).max(0.0);
    let b = (l[1].abs() - t.half_widths[1]).max(0.0);
    a.hypot(b)
}

pub fn marstrand_pipeline(config: &ExperimentConfig) -> Result<MarstrandReport> {
    config.validate()?;
    let st = &config.marstrand;
    let s = config.s;
    if !(s > 0.0 && s < 1.0) {
        return invalid(format!("s = {s} outside (0, 1)"));
    }
    let delta = st.delta;
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("delta = {delta} outside (0, 1)"));
    }
    let curve = config.curve.build()?;
    let fixture = config.fixture.build(&curve)?;
    if fixture.dim != 2 {
        return invalid("the Marstrand pipeline needs a planar fixture");
    }
    if !(fixture.side > 0.0) {
        return invalid("fixture cells need a positive side");
    }
    let centers: Vec<[f64; 2]> = fixture.points.iter().map(|p| [p[0], p[1]]).collect();
    let step = st.theta_step.unwrap_or(delta);
    if step < delta * (1.0 - 1e-9) {
        return invalid("Theta must be delta-separated");
    }
    let thetas: Vec<f64> = (0..).map(|i| i as f64 * step).take_while(|t| *t < PI).collect();
    let (ks, k_dom) = match &config.k {
        KPolicy::Auto => (st.ks.clone(), dominance_k(s, delta)),
        KPolicy::Fixed { values } => (values.clone(), values.iter().copied().fold(1.0, f64::max)),
    };

    // tubes and the (delta, s) condition on projections
    let mut families = Vec::with_capacity(thetas.len());
    let mut violations = Vec::new();
    let mut hypothesis_constant = 0.0f64;
    for &theta in &thetas {
        let (ratio, r, start, count) = projection_s_condition(&centers, st.origin, theta, delta, s);
        hypothesis_constant = hypothesis_constant.max(ratio);
        if ratio > st.hypothesis_c {
            violations.push(HypothesisViolation { theta, r, start, count, bound: st.hypothesis_c * (r / delta).powf(s) });
        }
        let tubes = tubes_from_projection(&centers, st.origin, theta, delta, st.length)?;
        families.push(TubeFamily { label: theta, tubes });
    }

    let spec = GridSpec::new(2, st.n, st.period)?;
    let assembly = assemble_f(spec, &families)?;
    let f = assembly.field.clone().into_phys();
    let mask = cell_mask(&spec, &centers, fixture.side);
    let in_a: Vec<usize> = (0..spec.len()).filter(|&i| mask[i]).collect();
    if in_a.is_empty() {
        return Err(Error::Resolution("no grid sample falls inside A".into()));
    }
    let nt = thetas.len() as f64;
    let fa: Vec<f64> = in_a.iter().map(|&i| f.data()[i].re).collect();
    let f_min_ratio = fa.iter().copied().fold(f64::INFINITY, f64::min) / nt;
    let f_max_ratio = fa.iter().copied().fold(f64::NEG_INFINITY, f64::max) / nt;
    let imag_max = f.data().iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let energy_sum = assembly.energy_sum();
    let cell = spec.cell();
    let int_a_f2: f64 = in_a.iter().map(|&i| f.data()[i].norm_sqr()).sum::<f64>() * cell;

    let mut all_ks = ks.clone();
    if !all_ks.iter().any(|k| (k - k_dom).abs() < 1e-12) {
        all_ks.push(k_dom);
    }
    let mut k_rows = Vec::new();
    let mut int_a_fh2 = 0.0;
    for &k in &all_ks {
        let (low, high) = high_low_spectra(&assembly.field, delta, k)?;
        let high_energy = high.l2_squared();
        let (low, high) = (low.into_phys(), high.into_phys());
        let mut sum = low.clone();
        sum.add_assign(&high)?;
        let partition_error = f.max_rel_diff(&sum)?;
        let dominated = in_a.iter().filter(|&&i| low.data()[i].norm() < f.data()[i].norm() / 2.0).count();
        if (k - k_dom).abs() < 1e-12 {
            int_a_fh2 = in_a.iter().map(|&i| high.data()[i].norm_sqr()).sum::<f64>() * cell;
        }
        k_rows.push(KRow {
            k,
            high_energy,
            ratio: high_energy / (k * energy_sum),
            dominance: dominated as f64 / in_a.len() as f64,
            partition_error,
        });
    }
    let listed: Vec<&KRow> = k_rows.iter().filter(|r| ks.iter().any(|k| (k - r.k).abs() < 1e-12)).collect();
    let beta_fit = listed.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let dom_row = k_rows.iter().find(|r| (r.k - k_dom).abs() < 1e-12).unwrap();
    let dominance = dom_row.dominance;
    let r_dom = dom_row.ratio;

    // pointwise low-part bound on a few directions
    let e = WeightParams::for_exponent(s, 2)?.e;
    let c_blur = k_dom.powf(1.0 / (e - 1.0));
    let scale = k_dom.powf(-1.0 + 1.0 / (e - 1.0));
    let picks = st.low_bound_thetas.min(families.len());
    let mut low_bound = Vec::with_capacity(picks);
    for j in 0..picks {
        let fam = &families[j * families.len() / picks];
        let single = assemble_f(spec, std::slice::from_ref(fam))?;
        let low = single.field.multiplied(|xi| low_cutoff(xi, delta, k_dom))?.into_phys();
        let rho = c_blur * k_dom * delta;
        let (mut beta_prime, mut tail) = (0.0f64, 0.0f64);
        for &i in &in_a {
            let x = spec.point(i);
            let count = fam.tubes.iter().filter(|t| dist_to_tube(t, &x) <= rho).count();
            let v = low.data()[i].norm();
            if count == 0 {
                tail = tail.max(v);
            } else {
                beta_prime = beta_prime.max(v / (scale * count as f64));
            }
        }
        low_bound.push(LowBoundRow { theta: fam.label, beta_prime, tail });
    }

    // the chain  c^2 #Theta^2 |A| <= int_A f^2 <= 4 int_A |f_h|^2 <= 4 R K sum int |f_theta|^2
    let cells = covering_number(&fixture.points, delta * (1.0 - 1e-9))?.count;
    let a = (cells as f64).ln() / (1.0 / delta).ln();
    let area = in_a.len() as f64 * cell;
    let e_per = energy_sum / (nt * delta.powf(1.0 - s));
    let alpha = area / delta.powf(2.0 - a);
    let beta_chain = if f_min_ratio > 0.0 && int_a_f2 <= 4.0 * int_a_fh2 {
        4.0 * r_dom * k_dom * e_per / (f_min_ratio * f_min_ratio * alpha)
    } else {
        f64::INFINITY
    };
    let beta_required = nt * delta.powf(1.0 - a + s);
    Ok(MarstrandReport {
        delta,
        s,
        a,
        cells,
        theta_count: thetas.len(),
        tube_count: assembly.tube_counts.iter().sum(),
        energy_sum,
        f_min_ratio,
        f_max_ratio,
        imag_max,
        orthogonality_ok: listed.iter().all(|r| r.ratio <= st.beta),
        k_rows,
        beta: st.beta,
        beta_fit,
        k_dom,
        dominance,
        dominance_ok: dominance >= 0.95,
        weight_exponent: e,
        low_bound,
        hypothesis_constant,
        hypothesis_c: st.hypothesis_c,
        violations,
        int_a_f2,
        int_a_fh2,
        beta_required,
        beta_chain,
        final_holds: beta_chain.is_finite() && beta_required <= beta_chain,
    })
}

/// Worst `|p_theta(A) cap I_r|_delta / (r/delta)^s` over dyadic `r in [delta, 1]` and intervals
/// `I_r` on `L_theta`, as `(ratio, r, start of I_r, count)`.
pub fn projection_s_condition(points: &[[f64; 2]], origin: [f64; 2], theta: f64, delta: f64, s: f64) -> (f64, f64, f64, usize) {
    let (sn, cs) = theta.sin_cos();
    let mut p: Vec<f64> = points.iter().map(|x| (x[0] - origin[0]) * cs + (x[1] - origin[1]) * sn).collect();
    p.sort_by(f64::total_cmp);
    s_condition(&p, delta, s)
}
