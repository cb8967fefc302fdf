//! Nested orientation lattices `Theta = delta Z`, `T = (delta / lambda) Z`, `Sigma = lambda Z`
//! and the rule attaching each point to the parent whose half-open cell contains it.

use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttachLevel {
    ThetaToTau,
    TauToSigma,
    /// composition of the two steps
    ThetaToSigma,
}

/// Lattices for dyadic `delta = 2^{-b}` and `lambda = 2^{-a}` with `delta^{1/2} < lambda <= 1`.
/// A child `x` attaches to the parent `p` with `x - p` in `(-h/2, h/2]`, `h` the parent step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttachmentMap {
    pub delta: f64,
    pub lambda: f64,
    a: u32,
    b: u32,
}

fn dyadic_exponent(x: f64, name: &str) -> Result<u32> {
    let e = -x.log2();
    if !(x > 0.0 && x <= 1.0) || (e - e.round()).abs() > 1e-9 || e.round() > 60.0 {
        return Err(Error::Invalid(format!("{name} = {x} must be 2^-n with 0 <= n <= 60")));
    }
    Ok(e.round() as u32)
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -((-a).div_euclid(b))
}

impl AttachmentMap {
    pub fn new(delta: f64, lambda: f64) -> Result<Self> {
        let b = dyadic_exponent(delta, "delta")?;
        let a = dyadic_exponent(lambda, "lambda")?;
        if 2 * a >= b {
            return Err(Error::Invalid(format!("lambda = {lambda} must exceed delta^(1/2) = {}", delta.sqrt())));
        }
        Ok(Self { delta, lambda, a, b })
    }

    /// Step of the child lattice for `level`.
    pub fn child_step(&self, level: AttachLevel) -> f64 {
        match level {
            AttachLevel::ThetaToTau | AttachLevel::ThetaToSigma => self.delta,
            AttachLevel::TauToSigma => self.delta / self.lambda,
        }
    }

    /// Step of the parent lattice for `level`.
    pub fn parent_step(&self, level: AttachLevel) -> f64 {
        match level {
            AttachLevel::ThetaToTau => self.delta / self.lambda,
            AttachLevel::TauToSigma | AttachLevel::ThetaToSigma => self.lambda,
        }
    }

    /// Parent step over child step for a single level.
    fn ratio(&self, level: AttachLevel) -> i128 {
        match level {
            AttachLevel::ThetaToTau => 1 << self.a,
            AttachLevel::TauToSigma => 1 << (self.b - 2 * self.a),
            AttachLevel::ThetaToSigma => unreachable!(),
        }
    }

    /// Parent index of the child index `i`.
    pub fn attach_index(&self, i: i64, level: AttachLevel) -> i64 {
        match level {
            AttachLevel::ThetaToSigma => {
                let t = self.attach_index(i, AttachLevel::ThetaToTau);
                self.attach_index(t, AttachLevel::TauToSigma)
            }
            _ => {
                let r = self.ratio(level);
                ceil_div(2 * i as i128 - r, 2 * r) as i64
            }
        }
    }

    /// Child indices attached to the parent index `p` (single levels only).
    pub fn children(&self, p: i64, level: AttachLevel) -> Result<RangeInclusive<i64>> {
        if level == AttachLevel::ThetaToSigma {
            return Err(Error::Unsupported("children are listed one level at a time".into()));
        }
        let r = self.ratio(level);
        let p = p as i128;
        let lo = (2 * p * r - r).div_euclid(2) + 1;
        let hi = (2 * p * r + r).div_euclid(2);
        Ok(lo as i64..=hi as i64)
    }

    /// Parent of a child lattice value. Values within `1e-6` steps of the child lattice are
    /// snapped to it; others use the same half-open rule in floating point.
    pub fn attach(&self, value: f64, level: AttachLevel) -> Result<f64> {
        if !value.is_finite() {
            return Err(Error::Invalid("attach needs a finite value".into()));
        }
        let h = self.child_step(level);
        let x = value / h;
        if (x - x.round()).abs() <= 1e-6 && x.abs() < 9e15 {
            return Ok(self.attach_index(x.round() as i64, level) as f64 * self.parent_step(level));
        }
        let step = |v: f64, h: f64| h * (v / h - 0.5).ceil();
        Ok(match level {
            AttachLevel::ThetaToSigma => {
                let t = step(value, self.delta / self.lambda);
                self.attach(t, AttachLevel::TauToSigma)?
            }
            _ => step(value, self.parent_step(level)),
        })
    }
}
