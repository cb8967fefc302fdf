//! Cantor-type fixtures as unions of base-`b` cubes, their natural measures, Frostman constants
//! and box-counting dimension estimates.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nets::covering_number;

pub type Point = [f64; 3];

/// Half-open cube `prod [k_i b^{-m}, (k_i + 1) b^{-m})`; unused axes hold zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: u32,
    pub coords: [u64; 3],
}

impl DyadicCube {
    pub fn parent(&self, base: u64) -> Option<DyadicCube> {
        if self.level == 0 {
            return None;
        }
        Some(DyadicCube {
            level: self.level - 1,
            coords: self.coords.map(|c| c / base),
        })
    }

    /// Ancestor at `level`, which must not exceed `self.level`.
    pub fn ancestor(&self, base: u64, level: u32) -> DyadicCube {
        let f = base.pow(self.level - level);
        DyadicCube {
            level,
            coords: self.coords.map(|c| c / f),
        }
    }
}

/// A stage of a product Cantor construction: distinct cubes of a single level in `[0,1)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeSet {
    dim: usize,
    level: u32,
    base: u64,
    cubes: Vec<[u64; 3]>,
}

fn check_dim(d: usize) -> Result<()> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        invalid(format!("ambient dimension {d} not in 1..=3"))
    }
}

impl CubeSet {
    pub fn new(dim: usize, level: u32, base: u64, mut cubes: Vec<[u64; 3]>) -> Result<Self> {
        check_dim(dim)?;
        if base < 2 {
            return invalid("base must be at least 2");
        }
        let side = base
            .checked_pow(level)
            .filter(|v| *v <= 1u64 << 53)
            .ok_or_else(|| Error::Invalid(format!("{base}^{level} is too fine")))?;
        for c in &cubes {
            for (i, &x) in c.iter().enumerate() {
                if (i < dim && x >= side) || (i >= dim && x != 0) {
                    return invalid(format!("cube {c:?} outside the level-{level} grid"));
                }
            }
        }
        cubes.sort_unstable();
        let before = cubes.len();
        cubes.dedup();
        if cubes.len() != before {
            return invalid("duplicate cubes");
        }
        Ok(Self { dim, level, base, cubes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn cubes(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        self.cubes.iter().map(|&coords| DyadicCube {
            level: self.level,
            coords,
        })
    }

    pub fn coords(&self) -> &[[u64; 3]] {
        &self.cubes
    }

    pub fn side(&self) -> f64 {
        (self.base as f64).powi(-(self.level as i32))
    }

    pub fn center(&self, c: &[u64; 3]) -> Point {
        let h = self.side();
        let mut p = [0.0; 3];
        for i in 0..self.dim {
            p[i] = (c[i] as f64 + 0.5) * h;
        }
        p
    }

    pub fn centers(&self) -> Vec<Point> {
        self.cubes.iter().map(|c| self.center(c)).collect()
    }

    pub fn contains_point(&self, x: &Point) -> bool {
        let n = self.base.pow(self.level) as f64;
        let mut key = [0u64; 3];
        for i in 0..self.dim {
            let v = (x[i] * n).floor();
            if v < 0.0 || v >= n {
                return false;
            }
            key[i] = v as u64;
        }
        self.cubes.binary_search(&key).is_ok()
    }

    /// True when every cube of `self` lies inside a cube of `coarser`.
    pub fn refines(&self, coarser: &CubeSet) -> bool {
        if self.base != coarser.base || self.dim != coarser.dim || self.level < coarser.level {
            return false;
        }
        self.cubes().all(|c| {
            let a = c.ancestor(self.base, coarser.level);
            coarser.cubes.binary_search(&a.coords).is_ok()
        })
    }

    /// Affine image `offset + scale * x` of every cube center.
    pub fn placed_centers(&self, scale: f64, offset: Point) -> Vec<Point> {
        self.centers()
            .into_iter()
            .map(|p| {
                let mut q = offset;
                for i in 0..self.dim {
                    q[i] += scale * p[i];
                }
                q
            })
            .collect()
    }

    /// Writes the `level d base` header and one cube per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.level, self.dim, self.base)?;
        for c in &self.cubes {
            let row: Vec<String> = c[..self.dim].iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let (set, w) = read_rows(r)?;
        if w.iter().any(Option::is_some) {
            return Err(Error::Parse("unexpected weight column".into()));
        }
        Ok(set)
    }
}

fn read_rows<R: BufRead>(r: R) -> Result<(CubeSet, Vec<Option<f64>>)> {
    let mut lines = r.lines();
    let header = lines.next().ok_or(Error::Empty("cube set file"))??;
    let h: Vec<u64> = header
        .split_whitespace()
        .map(|t| t.parse::<u64>().map_err(|e| Error::Parse(format!("header: {e}"))))
        .collect::<Result<_>>()?;
    if h.len() != 3 {
        return Err(Error::Parse("header must be `level d base`".into()));
    }
    let (level, dim, base) = (h[0] as u32, h[1] as usize, h[2]);
    check_dim(dim)?;
    let mut cubes = Vec::new();
    let mut weights = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != dim && toks.len() != dim + 1 {
            return Err(Error::Parse(format!("line {}: expected {dim} coordinates", i + 2)));
        }
        let mut c = [0u64; 3];
        for k in 0..dim {
            c[k] = toks[k].parse().map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))?;
        }
        cubes.push(c);
        weights.push(match toks.get(dim) {
            Some(t) => Some(t.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))?),
            None => None,
        });
    }
    // keep weights aligned with the sorted cube order
    let mut idx: Vec<usize> = (0..cubes.len()).collect();
    idx.sort_by_key(|&i| cubes[i]);
    let weights = idx.iter().map(|&i| weights[i]).collect();
    Ok((CubeSet::new(dim, level, base, cubes)?, weights))
}

/// Stage `n` of the product Cantor set keeping `digits` in base `base` along each of `d` axes.
pub fn cantor_stage(base: u64, digits: &[u64], n: u32, d: usize) -> Result<CubeSet> {
    check_dim(d)?;
    let kept: BTreeSet<u64> = digits.iter().copied().collect();
    if kept.is_empty() {
        return invalid("kept digit set is empty");
    }
    if base < 2 || kept.iter().any(|&k| k >= base) {
        return invalid(format!("digits {digits:?} are not base-{base} digits"));
    }
    let mut axis = vec![0u64];
    for _ in 0..n {
        axis = axis
            .iter()
            .flat_map(|&a| kept.iter().map(move |&k| a * base + k))
            .collect();
    }
    let mut cubes = vec![[0u64; 3]];
    for i in 0..d {
        cubes = cubes
            .iter()
            .flat_map(|c| {
                axis.iter().map(move |&a| {
                    let mut c = *c;
                    c[i] = a;
                    c
                })
            })
            .collect();
    }
    CubeSet::new(d, n, base, cubes)
}

/// A weighted cube set; `exponent` is the Frostman exponent of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractalMeasure {
    set: CubeSet,
    weights: Vec<f64>,
    pub exponent: f64,
}

pub fn natural_measure(set: &CubeSet) -> Result<FractalMeasure> {
    if set.is_empty() {
        return Err(Error::Empty("cube set"));
    }
    let w = 1.0 / set.len() as f64;
    let kept = set.cubes.len();
    // similarity dimension of the stage, log #cubes / log base^level
    let exponent = if set.level == 0 {
        set.dim as f64
    } else {
        (kept as f64).ln() / (set.level as f64 * (set.base as f64).ln())
    };
    Ok(FractalMeasure {
        set: set.clone(),
        weights: vec![w; kept],
        exponent,
    })
}

impl FractalMeasure {
    pub fn new(set: CubeSet, weights: Vec<f64>, exponent: f64) -> Result<Self> {
        if weights.len() != set.len() {
            return invalid("one weight per cube is required");
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return invalid("weights must be finite and nonnegative");
        }
        if !(weights.iter().sum::<f64>() > 0.0) {
            return invalid("total mass must be positive");
        }
        Ok(Self { set, weights, exponent })
    }

    pub fn set(&self) -> &CubeSet {
        &self.set
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Restriction to the cubes whose centers satisfy `keep`; weights are not renormalized.
    pub fn restrict(&self, keep: impl Fn(&Point) -> bool) -> Result<Self> {
        let mut cubes = Vec::new();
        let mut weights = Vec::new();
        for (c, w) in self.set.cubes.iter().zip(&self.weights) {
            if keep(&self.set.center(c)) {
                cubes.push(*c);
                weights.push(*w);
            }
        }
        Self::new(
            CubeSet::new(self.set.dim, self.set.level, self.set.base, cubes)?,
            weights,
            self.exponent,
        )
    }

    /// Mass of the cubes whose centers lie in the closed ball `B(x, r)`.
    pub fn ball_mass(&self, x: &Point, r: f64) -> f64 {
        self.set
            .cubes
            .iter()
            .zip(&self.weights)
            .filter(|(c, _)| dist(&self.set.center(c), x) <= r)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.set.level, self.set.dim, self.set.base)?;
        for (c, m) in self.set.cubes.iter().zip(&self.weights) {
            let mut row: Vec<String> = c[..self.set.dim].iter().map(|v| v.to_string()).collect();
            row.push(format!("{m:e}"));
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R, exponent: f64) -> Result<Self> {
        let (set, w) = read_rows(r)?;
        let weights = w
            .into_iter()
            .map(|v| v.ok_or_else(|| Error::Parse("missing weight column".into())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(set, weights, exponent)
    }
}

pub(crate) fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub(crate) fn cell_key(p: &Point, h: f64) -> [i64; 3] {
    p.map(|x| (x / h).floor() as i64)
}

pub(crate) fn neighbours(k: [i64; 3]) -> impl Iterator<Item = [i64; 3]> {
    (0..27).map(move |i| {
        let d = [i % 3 - 1, (i / 3) % 3 - 1, i / 9 - 1];
        [k[0] + d[0], k[1] + d[1], k[2] + d[2]]
    })
}

/// `max_{x, r} r^{-a} mu(B(x, r))` over cube centers `x` and the given radii.
pub fn frostman_constant(measure: &FractalMeasure, a: f64, radii: &[f64]) -> Result<f64> {
    if !(a > 0.0) || a > measure.set.dim as f64 + 1e-12 {
        return invalid(format!("exponent {a} outside (0, {}]", measure.set.dim));
    }
    let centers = measure.set.centers();
    let mut best = 0.0f64;
    for &r in radii {
        if !(r > 0.0 && r < 1.0) {
            return invalid(format!("radius {r} outside (0, 1)"));
        }
        let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in centers.iter().enumerate() {
            grid.entry(cell_key(p, r)).or_default().push(i);
        }
        for p in &centers {
            let mut mass = 0.0;
            for k in neighbours(cell_key(p, r)) {
                if let Some(ids) = grid.get(&k) {
                    for &j in ids {
                        if dist(p, &centers[j]) <= r {
                            mass += measure.weights[j];
                        }
                    }
                }
            }
            best = best.max(mass * r.powf(-a));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountMethod {
    /// occupied cells of the `delta`-mesh
    Mesh,
    /// greedy maximal `delta`-separated subset
    Separated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub slope: f64,
    pub intercept: f64,
    /// `(delta, count)` with scales in decreasing order
    pub counts: Vec<(f64, usize)>,
}

/// Number of `delta`-mesh cells met by `points`.
pub fn mesh_count(points: &[Point], delta: f64) -> usize {
    let mut keys: Vec<[i64; 3]> = points
        .iter()
        .map(|p| p.map(|x| (x / delta + 1e-9).floor() as i64))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Least-squares slope of `log N(delta)` against `log(1/delta)`.
pub fn box_dimension_estimate(points: &[Point], scales: &[f64], method: CountMethod) -> Result<DimensionEstimate> {
    if points.is_empty() {
        return Err(Error::Empty("point set"));
    }
    let mut s: Vec<f64> = scales.to_vec();
    if s.iter().any(|d| !(*d > 0.0)) {
        return invalid("scales must be positive");
    }
    s.sort_by(|a, b| b.total_cmp(a));
    s.dedup();
    if s.len() < 3 {
        return invalid(format!("need at least 3 distinct scales, got {}", s.len()));
    }
    let mut counts = Vec::with_capacity(s.len());
    for &d in &s {
        let n = match method {
            CountMethod::Mesh => mesh_count(points, d),
            CountMethod::Separated => covering_number(points, d)?.count,
        };
        counts.push((d, n));
    }
    let xs: Vec<f64> = counts.iter().map(|(d, _)| -d.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|(_, n)| (*n as f64).ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    Ok(DimensionEstimate { slope, intercept, counts })
}

pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (slope, my - slope * mx)
}
