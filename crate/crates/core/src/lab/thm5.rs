use serde::{Deserialize, Serialize};
use std::io::Write;

use super::{num, ExperimentConfig, KPolicy, Report};
use crate::error::{invalid, Error, Result};
use crate::field::{assemble_f, energy_report, mixed_split_3d, EnergyReport, Field, GridSpec, Tube, TubeFamily};
use crate::nets::{dyadic_pigeonhole, PigeonholeReport};
use crate::planks::PartKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thm5Settings {
    pub n: usize,
    pub period: f64,
    pub delta: f64,
    pub directions: usize,
    pub theta_start: f64,
    pub theta_step: f64,
    pub k: f64,
    pub ball_radius: f64,
    /// constant of the `s`-dimensional condition on each tube family
    pub hypothesis_c: f64,
}

impl Default for Thm5Settings {
    fn default() -> Self {
        Self {
            n: 128,
            period: 64.0,
            delta: 1.0 / 16.0,
            directions: 8,
            theta_start: 0.0,
            theta_step: 0.125,
            k: 2.0,
            ball_radius: 1.0,
            hypothesis_c: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm5Report {
    pub delta: f64,
    pub s: f64,
    pub k: f64,
    pub thetas: Vec<f64>,
    pub tube_counts: Vec<usize>,
    pub balls: usize,
    /// `min f / #Theta` on `H`
    pub f_min_ratio: f64,
    pub c_log: f64,
    pub f_lower_ok: bool,
    /// `max |sum of parts - f| / max |f|`
    pub partition_error: f64,
    pub energies: EnergyReport,
    /// `int |f_high|^2 / (K^2 sum_theta int |f_theta|^2)`
    pub high_ratio: f64,
    /// fraction of `H` samples with `|f_low| < |f| / 2`
    pub low_dominance: f64,
    /// `(omega, #{theta attached to omega})`
    pub omega_counts: Vec<(f64, u64)>,
    pub pigeonhole: PigeonholeReport,
    pub pigeonhole_ok: bool,
    /// `(p, ||f_sqrt||_p / ((#omega)^{1/2 - 1/p} (sum_omega ||f_omega||_p^p)^{1/p}))`
    pub mixed_decoupling: Vec<(f64, f64)>,
    pub a: f64,
    pub t: f64,
    /// `delta^{-t-a} / delta^{-1-s}`
    pub final_constant: f64,
    pub hypothesis_constant: f64,
    pub hypothesis_c: f64,
}

impl Thm5Report {
    pub fn hypothesis_ok(&self) -> bool {
        self.hypothesis_constant <= self.hypothesis_c
    }
}

impl Report for Thm5Report {
    fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["part", "p", "integral_over_h"])?;
        for row in &self.energies.rows {
            for (p, v) in &row.lp {
                out.write_record([row.label.clone(), p.to_string(), num(*v)])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn label(kind: PartKind) -> String {
    match kind {
        PartKind::High => "high".into(),
        PartKind::Low => "low".into(),
        PartKind::Sqrt => "sqrt".into(),
        PartKind::Mixed(l) => format!("mixed_{l}"),
    }
}

fn dist_to_tube(t: &Tube, x: &[f64; 3]) -> f64 {
    let l = t.local(x);
    (0..3).map(|i| (l[i].abs() - t.half_widths[i]).max(0.0).powi(2)).sum::<f64>().sqrt()
}

fn integral_p(f: &Field, p: f64) -> f64 {
    f.data().iter().map(|v| v.norm().powf(p)).sum::<f64>() * f.spec().cell()
}

pub fn thm5_pipeline(config: &ExperimentConfig) -> Result<Thm5Report> {
    config.validate()?;
    let st = &config.thm5;
    let delta = st.delta;
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("delta = {delta} outside (0, 1)"));
    }
    if st.directions == 0 {
        return Err(Error::Empty("direction set"));
    }
    if st.directions > 1 && st.theta_step < delta * (1.0 - 1e-9) {
        return invalid("Theta must be delta-separated");
    }
    let k = match &config.k {
        KPolicy::Auto => st.k,
        KPolicy::Fixed { values } => values[0],
    };
    let curve = config.curve.build()?;
    let fixture = config.fixture.build(&curve)?;
    if fixture.dim != 3 {
        return invalid("the spatial pipeline needs a spatial fixture");
    }
    let spec = GridSpec::new(3, st.n, st.period)?;
    let thetas: Vec<f64> = (0..st.directions).map(|i| st.theta_start + st.theta_step * i as f64).collect();
    let h = delta.sqrt();

    let mut total = Field::zeros(spec).into_freq();
    let mut parts: Vec<(String, Field)> = Vec::new();
    let mut energy_sum = 0.0;
    let mut tube_counts = Vec::with_capacity(thetas.len());
    let mut hypothesis_constant = 0.0f64;
    let ps = [2.0, 4.0, 6.0];
    let mut omega_counts: Vec<(f64, u64)> = Vec::new();
    let mut omega_field: Option<Field> = None;
    let mut omega_sums = [0.0; 3];
    let flush = |f: &mut Option<Field>, sums: &mut [f64; 3]| {
        if let Some(g) = f.take() {
            for (s, p) in sums.iter_mut().zip(ps) {
                *s += integral_p(&g, p);
            }
        }
    };
    for &theta in &thetas {
        let frame = curve.frenet_frame(theta)?;
        let axes = [frame.e1, frame.e2, frame.e3];
        let mut tubes: Vec<Tube> = Vec::new();
        for c in &fixture.points {
            let t = Tube::spatial(*c, axes, [1.0 / delta, 1.0, 1.0])?;
            let same_line = tubes.iter().any(|u| {
                let l = u.local(c);
                l[1].abs() < 1.0 && l[2].abs() < 1.0
            });
            if !same_line {
                tubes.push(t);
            }
        }
        // s-dimensional condition, balls centred on the tube centres
        let mut r = 1.0;
        while r <= 1.0 / delta + 1e-9 {
            for t in &tubes {
                let n = tubes.iter().filter(|u| dist_to_tube(u, &t.center) <= r).count();
                hypothesis_constant = hypothesis_constant.max(n as f64 / r.powf(config.s));
            }
            r *= 2.0;
        }
        tube_counts.push(tubes.len());
        let fam = assemble_f(spec, &[TubeFamily { label: theta, tubes }])?;
        energy_sum += fam.energy_sum();
        total.add_assign(&fam.field)?;
        let split = mixed_split_3d(&fam.field, &frame, delta, k)?;
        if parts.is_empty() {
            parts = split.iter().map(|(kind, _)| (label(*kind), Field::zeros(spec))).collect();
        }
        let omega = h * (theta / h - 0.5).ceil() + 0.0;
        match omega_counts.last_mut() {
            Some((w, n)) if (*w - omega).abs() < 1e-12 => *n += 1,
            _ => {
                flush(&mut omega_field, &mut omega_sums);
                omega_counts.push((omega, 1));
            }
        }
        for ((kind, g), (_, acc)) in split.iter().zip(parts.iter_mut()) {
            acc.add_assign(g)?;
            if *kind == PartKind::Sqrt {
                match &mut omega_field {
                    Some(w) => w.add_assign(g)?,
                    None => omega_field = Some(g.clone()),
                }
            }
        }
    }
    flush(&mut omega_field, &mut omega_sums);
    let f = total.into_phys();

    let r2 = st.ball_radius * st.ball_radius;
    let mask = f.mask(|x| {
        fixture
            .points
            .iter()
            .any(|c| (0..3).map(|a| (x[a] - c[a]).powi(2)).sum::<f64>() <= r2)
    });
    let in_h: Vec<usize> = (0..spec.len()).filter(|&i| mask[i]).collect();
    if in_h.is_empty() {
        return Err(Error::Resolution("no grid sample falls inside H".into()));
    }
    let nt = thetas.len() as f64;
    let f_min_ratio = in_h.iter().map(|&i| f.data()[i].re).fold(f64::INFINITY, f64::min) / nt;
    let c_log = (1.0 / delta).ln().powi(-2);

    let mut sum = Field::zeros(spec);
    for (_, p) in &parts {
        sum.add_assign(p)?;
    }
    let partition_error = f.max_rel_diff(&sum)?;
    let find = |name: &str| parts.iter().find(|(l, _)| l == name).map(|p| &p.1).unwrap();
    let high_ratio = find("high").l2_squared() / (k * k * energy_sum);
    let low = find("low");
    let low_dominance =
        in_h.iter().filter(|&&i| low.data()[i].norm() < f.data()[i].norm() / 2.0).count() as f64 / in_h.len() as f64;

    let mut labelled: Vec<(String, &Field)> = vec![("f".to_string(), &f)];
    labelled.extend(parts.iter().map(|(l, g)| (l.clone(), g)));
    let energies = energy_report(&labelled, &mask)?;

    let counts: Vec<u64> = omega_counts.iter().map(|c| c.1).collect();
    let pigeonhole = dyadic_pigeonhole(&counts)?;
    let pigeonhole_ok = pigeonhole.holds() && counts.iter().sum::<u64>() == thetas.len() as u64;
    let n_omega = omega_counts.len() as f64;
    let sqrt = find("sqrt");
    let mixed_decoupling = ps
        .iter()
        .zip(omega_sums)
        .map(|(&p, s)| {
            let lhs = integral_p(sqrt, p).powf(1.0 / p);
            let rhs = n_omega.powf(0.5 - 1.0 / p) * s.powf(1.0 / p);
            (p, if rhs > 0.0 { lhs / rhs } else { 0.0 })
        })
        .collect();

    let ld = (1.0 / delta).ln();
    let a = (fixture.points.len() as f64).ln() / ld;
    let t = nt.ln() / ld;
    Ok(Thm5Report {
        delta,
        s: config.s,
        k,
        thetas,
        tube_counts,
        balls: fixture.points.len(),
        f_min_ratio,
        c_log,
        f_lower_ok: f_min_ratio >= c_log,
        partition_error,
        energies,
        high_ratio,
        low_dominance,
        omega_counts,
        pigeonhole,
        pigeonhole_ok,
        mixed_decoupling,
        a,
        t,
        final_constant: delta.powf(1.0 + config.s - t - a),
        hypothesis_constant,
        hypothesis_c: st.hypothesis_c,
    })
}
