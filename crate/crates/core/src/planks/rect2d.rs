//! Planar rectangles centered at the origin with long axis along `(cos theta, sin theta)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectFamily {
    /// orientations reduced to `[0, pi)` and sorted
    angles: Vec<f64>,
    /// half-length along the long axis
    pub a: f64,
    /// half-width across it
    pub b: f64,
}

impl RectFamily {
    pub fn new(angles: &[f64], a: f64, b: f64) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::Empty("rectangle orientations"));
        }
        if !(a > 0.0 && b > 0.0 && b <= a) {
            return invalid("rectangle half-dimensions need 0 < b <= a");
        }
        let mut angles: Vec<f64> = angles.iter().map(|t| t.rem_euclid(PI)).collect();
        angles.sort_by(f64::total_cmp);
        Ok(Self { angles, a, b })
    }

    /// `S_theta` with half-dimensions `(delta^{-1}, 1)` for orientations `delta Z` in `[0, pi)`.
    pub fn separated(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return invalid("delta must lie in (0, 1)");
        }
        let n = (PI / delta).ceil() as usize;
        let angles: Vec<f64> = (0..n).map(|i| i as f64 * delta).filter(|t| *t < PI).collect();
        Self::new(&angles, 1.0 / delta, 1.0)
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn contains(&self, theta: f64, x: [f64; 2]) -> bool {
        let (s, c) = theta.sin_cos();
        (x[0] * c + x[1] * s).abs() <= self.a && (-x[0] * s + x[1] * c).abs() <= self.b
    }

    /// Number of rectangles containing `x`. Only orientations within `asin(b/|x|)` of the
    /// direction of `x` (mod pi) can contain it.
    pub fn count_at(&self, x: [f64; 2]) -> usize {
        let rho = x[0].hypot(x[1]);
        if rho <= self.b {
            return self.angles.iter().filter(|t| self.contains(**t, x)).count();
        }
        let phi = x[1].atan2(x[0]).rem_euclid(PI);
        let w = (self.b / rho).asin() * (1.0 + 1e-12) + 1e-15;
        let mut n = 0;
        for shift in [-PI, 0.0, PI] {
            let (lo, hi) = (phi - w + shift, phi + w + shift);
            let i = self.angles.partition_point(|t| *t < lo);
            let j = self.angles.partition_point(|t| *t <= hi);
            n += self.angles[i..j].iter().filter(|t| self.contains(**t, x)).count();
        }
        n
    }

    /// Exact maximum of [`count_at`](Self::count_at) over `|x| >= r`, for `b <= r <= a`:
    /// the window `|sin(phi - theta)| <= b/|x|` is widest at `|x| = r`, where the long side
    /// imposes nothing, so the answer is the most orientations in a closed arc of that width.
    pub fn max_overlap_outside(&self, r: f64) -> Result<usize> {
        if !(r >= self.b && r <= self.a) {
            return Err(Error::Unsupported(format!("radius {r} outside [b, a] = [{}, {}]", self.b, self.a)));
        }
        let width = 2.0 * (self.b / r).asin();
        let n = self.angles.len();
        if width >= PI {
            return Ok(n);
        }
        let ext: Vec<f64> = self.angles.iter().copied().chain(self.angles.iter().map(|t| t + PI)).collect();
        let mut best = 0;
        let mut j = 0;
        for i in 0..n {
            j = j.max(i);
            while j + 1 < i + n && ext[j + 1] - ext[i] <= width * (1.0 + 1e-12) {
                j += 1;
            }
            best = best.max(j - i + 1);
        }
        Ok(best)
    }

    /// Largest count over `n` points drawn uniformly from the annulus `r_min <= |x| <= r_max`.
    pub fn sampled_max_outside(&self, r_min: f64, r_max: f64, n: usize, seed: u64) -> Result<usize> {
        if !(r_min > 0.0 && r_max >= r_min) {
            return invalid("annulus needs 0 < r_min <= r_max");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = 0;
        for _ in 0..n {
            let rho = (r_min * r_min + (r_max * r_max - r_min * r_min) * rng.random::<f64>()).sqrt();
            let phi = rng.random_range(0.0..2.0 * PI);
            best = best.max(self.count_at([rho * phi.cos(), rho * phi.sin()]));
        }
        Ok(best)
    }
}
