use quadrature::double_exponential;
use serde::{Deserialize, Serialize};

use super::Tube;
use crate::error::{invalid, Error, Result};

/// Decay exponent `E` of the weights `w_T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub e: f64,
    pub dim: usize,
}

impl WeightParams {
    pub fn new(e: f64, dim: usize) -> Result<Self> {
        if !(e > 1.0 && e.is_finite()) {
            return invalid(format!("weight exponent {e} must exceed 1"));
        }
        if !(dim == 2 || dim == 3) {
            return invalid("weights are 2 or 3 dimensional");
        }
        Ok(Self { e, dim })
    }

    /// `E = max(100, 1 + 2/(1 - s))` for `s` in `(0, 1)`.
    pub fn for_exponent(s: f64, dim: usize) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return invalid("s must lie in (0, 1)");
        }
        Self::new(f64::max(100.0, 1.0 + 2.0 / (1.0 - s)), dim)
    }
}

/// `w_T(x) = prod_i (1 + |(x - c).e_i| / r_i)^{-E}` with `r_i = 2 w_i` the side lengths of `T`.
pub fn weight(tube: &Tube, params: &WeightParams, x: &[f64; 3]) -> f64 {
    let l = tube.local(x);
    (0..tube.dim)
        .map(|i| (1.0 + l[i].abs() / (2.0 * tube.half_widths[i])).powf(-params.e))
        .product()
}

pub fn tiling_weight_sum(tubes: &[Tube], params: &WeightParams, x: &[f64; 3]) -> f64 {
    tubes.iter().map(|t| weight(t, params, x)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionReport {
    /// largest `(w_A * w_B)(x) / (prod_i min(r_i, r'_i) w_{A+B}(x))` found
    pub max_ratio: f64,
    /// per axis of `A`: the 1D maximum and the offset where it occurs
    pub per_axis: Vec<(f64, f64)>,
    pub constant: f64,
    pub passed: bool,
}

fn profile(t: f64, r: f64, e: f64) -> f64 {
    (1.0 + t.abs() / r).powf(-e)
}

/// `int (1 + |y|/r)^{-E} (1 + |t - y|/d)^{-E} dy`, split at the kinks, tails mapped to `[0, 1)`.
fn conv_1d(t: f64, r: f64, d: f64, e: f64, tol: f64) -> f64 {
    let f = |y: f64| profile(y, r, e) * profile(t - y, d, e);
    let (lo, hi) = (t.min(0.0), t.max(0.0));
    let scale = r.max(d);
    let tail = |sign: f64, from: f64| {
        double_exponential::integrate(
            |u| {
                let y = from + sign * scale * u / (1.0 - u);
                f(y) * scale / ((1.0 - u) * (1.0 - u))
            },
            0.0,
            1.0,
            tol,
        )
        .integral
    };
    let mid = if hi > lo { double_exponential::integrate(f, lo, hi, tol).integral } else { 0.0 };
    tail(-1.0, lo) + mid + tail(1.0, hi)
}

/// Numerical check of `w_A * w_B <= C prod_i min(r_i, r'_i) w_{A+B}`, where `A + B` has the
/// center `c + c'` and sides `r_i + r'_i` along the axes of `A`. The kernels are separable, so
/// the ratio is a product of 1D ratios, each maximized over a grid of offsets.
pub fn weight_convolution_bound(a: &Tube, b: &Tube, params: &WeightParams, constant: f64) -> Result<ConvolutionReport> {
    if a.dim != b.dim {
        return invalid("tubes of different dimensions");
    }
    let d = a.dim;
    let mut per_axis = Vec::with_capacity(d);
    let mut max_ratio = 1.0;
    for i in 0..d {
        let partner = (0..d).find(|&j| (a.axes[i].dot(&b.axes[j]).abs() - 1.0).abs() < 1e-9);
        let Some(j) = partner else {
            return Err(Error::Unsupported("tubes must be parallel or perpendicular".into()));
        };
        let (r, s) = (2.0 * a.half_widths[i], 2.0 * b.half_widths[j]);
        let mut best = (0.0f64, 0.0);
        for k in 0..=800 {
            let t = (r + s) * k as f64 / 20.0;
            let rhs = r.min(s) * profile(t, r + s, params.e);
            if rhs < 1e-250 {
                break;
            }
            let lhs = conv_1d(t, r, s, params.e, 1e-10 * rhs);
            if lhs / rhs > best.0 {
                best = (lhs / rhs, t);
            }
        }
        max_ratio *= best.0;
        per_axis.push(best);
    }
    Ok(ConvolutionReport {
        max_ratio,
        per_axis,
        constant,
        passed: max_ratio <= constant,
    })
}
