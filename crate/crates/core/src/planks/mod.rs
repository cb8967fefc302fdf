//! Frame-aligned boxes in frequency space: the slab decomposition into high, low and mixed
//! parts, decoupling planks, cone planks, attachment lattices and the Lorentz rescaling.

pub mod attach;
pub mod cone;
pub mod rect2d;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{FrenetFrame, SphericalCurve};
use crate::error::{invalid, Error, Result};
use crate::Vec3;

pub use attach::{AttachLevel, AttachmentMap};
pub use cone::{
    build_cone_family, cone_plank, cone_region_membership, sample_cone_region, ConePlank, ConeRegion, ConeShape,
};
pub use rect2d::RectFamily;

/// Relative margin applied to interval tests when certifying containment or disjointness.
pub const MARGIN: f64 = 1e-9;

/// An interval `lo..hi` with open/closed ends; with `abs` the test applies to `|x|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
    pub abs: bool,
}

impl Range {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_open: false, hi_open: false, abs: false }
    }

    /// `|x| <= hi`
    pub fn sym(hi: f64) -> Self {
        Self { lo: 0.0, hi, lo_open: false, hi_open: false, abs: true }
    }

    /// `lo <= |x| <= hi`
    pub fn band(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_open: false, hi_open: false, abs: true }
    }

    pub fn open_lo(mut self) -> Self {
        self.lo_open = true;
        self
    }

    pub fn open_hi(mut self) -> Self {
        self.hi_open = true;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo || (self.hi == self.lo && (self.lo_open || self.hi_open)) || (self.abs && self.hi < 0.0)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.contains_with(x, 0.0)
    }

    /// Membership with both ends pushed outward by `slack`.
    pub fn contains_with(&self, x: f64, slack: f64) -> bool {
        let v = if self.abs { x.abs() } else { x };
        let lo_ok = if self.lo_open { v > self.lo - slack } else { v >= self.lo - slack };
        let hi_ok = if self.hi_open { v < self.hi + slack } else { v <= self.hi + slack };
        lo_ok && hi_ok
    }

    /// Divides the lower end and multiplies the upper end by `c` (signed ends move away from
    /// zero accordingly).
    pub fn dilate(&self, c: f64) -> Self {
        let grow = |v: f64| if v >= 0.0 { v * c } else { v / c };
        let shrink = |v: f64| if v >= 0.0 { v / c } else { v * c };
        Self { lo: shrink(self.lo), hi: grow(self.hi), ..*self }
    }

    /// Largest magnitude of an endpoint, the scale used for relative margins.
    pub fn scale(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let lo = if self.abs { self.lo.max(0.0) } else { self.lo };
        let v = lo + (self.hi - lo) * rng.random::<f64>();
        if self.abs && rng.random::<bool>() {
            -v
        } else {
            v
        }
    }

    /// Endpoints of the convex pieces: one interval, or two mirror intervals when `abs` with
    /// a positive lower end.
    fn pieces(&self) -> Vec<(f64, f64)> {
        if !self.abs {
            vec![(self.lo, self.hi)]
        } else if self.lo <= 0.0 {
            vec![(-self.hi, self.hi)]
        } else {
            vec![(self.lo, self.hi), (-self.hi, -self.lo)]
        }
    }
}

/// A box in the coordinates of a Frenet frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plank {
    pub frame: FrenetFrame,
    pub ranges: [Range; 3],
    /// accumulated dilation factor relative to the defining box
    pub dilation: f64,
}

impl Plank {
    pub fn new(frame: FrenetFrame, ranges: [Range; 3]) -> Result<Self> {
        if let Some(i) = ranges.iter().position(Range::is_empty) {
            return Err(Error::Invalid(format!("range {} of the plank is empty", i + 1)));
        }
        if frame.orthonormality_defect() > 1e-9 {
            return invalid("plank frame is not orthonormal");
        }
        Ok(Self { frame, ranges, dilation: 1.0 })
    }

    pub fn theta(&self) -> f64 {
        self.frame.theta
    }

    pub fn contains(&self, xi: &Vec3) -> bool {
        let c = self.frame.coords(xi);
        (0..3).all(|i| self.ranges[i].contains(c[i]))
    }

    /// Membership with every range widened by `eta` times its scale, plus a rounding allowance
    /// proportional to `|xi|`.
    pub fn contains_with_margin(&self, xi: &Vec3, eta: f64) -> bool {
        let c = self.frame.coords(xi);
        let round = 8.0 * f64::EPSILON * xi.norm();
        (0..3).all(|i| self.ranges[i].contains_with(c[i], eta * self.ranges[i].scale() + round))
    }

    pub fn dilate(&self, c: f64) -> Self {
        Self {
            frame: self.frame,
            ranges: self.ranges.map(|r| r.dilate(c)),
            dilation: self.dilation * c,
        }
    }

    /// A uniform point of the box (of one of its mirror pieces when a range is two-sided).
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        let c = Vec3::new(self.ranges[0].sample(rng), self.ranges[1].sample(rng), self.ranges[2].sample(rng));
        self.frame.embed(&c)
    }

    /// Corners of all convex pieces.
    pub fn corners(&self) -> Vec<Vec3> {
        let mut out = Vec::new();
        for a in self.ranges[0].pieces() {
            for b in self.ranges[1].pieces() {
                for c in self.ranges[2].pieces() {
                    for m in 0..8 {
                        let x = if m & 1 == 0 { a.0 } else { a.1 };
                        let y = if m & 2 == 0 { b.0 } else { b.1 };
                        let z = if m & 4 == 0 { c.0 } else { c.1 };
                        out.push(self.frame.embed(&Vec3::new(x, y, z)));
                    }
                }
            }
        }
        out
    }

    /// Convex pieces as `(center, half-widths)` in frame coordinates.
    fn boxes(&self) -> Vec<(Vec3, Vec3)> {
        let mut out = Vec::new();
        for a in self.ranges[0].pieces() {
            for b in self.ranges[1].pieces() {
                for c in self.ranges[2].pieces() {
                    out.push((
                        Vec3::new((a.0 + a.1) / 2.0, (b.0 + b.1) / 2.0, (c.0 + c.1) / 2.0),
                        Vec3::new((a.1 - a.0) / 2.0, (b.1 - b.0) / 2.0, (c.1 - c.0) / 2.0),
                    ));
                }
            }
        }
        out
    }

    /// Exact separating-axis test on the closed convex pieces of both planks.
    pub fn intersects(&self, other: &Plank) -> bool {
        let axes_a = [self.frame.e1, self.frame.e2, self.frame.e3];
        let axes_b = [other.frame.e1, other.frame.e2, other.frame.e3];
        for (ca, ha) in self.boxes() {
            let pa = self.frame.embed(&ca);
            for (cb, hb) in other.boxes() {
                let pb = other.frame.embed(&cb);
                if !obb_separated(&pa, &axes_a, &ha, &pb, &axes_b, &hb) {
                    return true;
                }
            }
        }
        false
    }

    /// Row for the JSON plank dump.
    pub fn record(&self) -> PlankRecord {
        PlankRecord {
            theta: self.frame.theta,
            j: None,
            k: None,
            ranges: self.ranges.map(|r| [r.lo, r.hi]),
            dilation: self.dilation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlankRecord {
    pub theta: f64,
    pub j: Option<u32>,
    pub k: Option<u32>,
    pub ranges: [[f64; 2]; 3],
    pub dilation: f64,
}

fn obb_separated(pa: &Vec3, ea: &[Vec3; 3], ha: &Vec3, pb: &Vec3, eb: &[Vec3; 3], hb: &Vec3) -> bool {
    let t = pb - pa;
    let proj = |axis: &Vec3, e: &[Vec3; 3], h: &Vec3| (0..3).map(|i| h[i] * e[i].dot(axis).abs()).sum::<f64>();
    let mut axes: Vec<Vec3> = ea.iter().chain(eb.iter()).copied().collect();
    for a in ea {
        for b in eb {
            let c = a.cross(b);
            if c.norm() > 1e-12 {
                axes.push(c.normalize());
            }
        }
    }
    axes.iter().any(|ax| {
        let ra = proj(ax, ea, ha);
        let rb = proj(ax, eb, hb);
        t.dot(ax).abs() > (ra + rb) * (1.0 + 1e-12)
    })
}

/// The pieces of the slab `P_theta = {|x1| <= delta, |x2| <= 1, |x3| <= 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PartKind {
    High,
    Low,
    /// `|x2|` below the smallest dyadic `lambda`
    Sqrt,
    Mixed(f64),
}

fn is_dyadic(x: f64) -> bool {
    let l = x.log2();
    (l - l.round()).abs() < 1e-9
}

/// Dyadic `lambda in (delta^{1/2}, K^{-1}]`, largest first.
pub fn mixed_scales(delta: f64, k: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut l = 2f64.powf((-k.log2() + 1e-9).floor());
    while l > delta.sqrt() * (1.0 + 1e-12) {
        out.push(l);
        l /= 2.0;
    }
    out
}

fn check_scales(delta: f64, k: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("delta = {delta} outside (0, 1)"));
    }
    if !(k >= 1.0 && k <= 1.0 / delta * (1.0 + 1e-12)) {
        return invalid(format!("K = {k} outside [1, 1/delta]"));
    }
    Ok(())
}

/// The piece of `P_theta` of the given kind. Pieces are half-open so that the high, low, sqrt
/// and dyadic mixed parts tile `P_theta` exactly:
/// high `K^{-1} < |x2| <= 1`; low `|x2| <= K^{-1}, |x3| < K^{-1}`; mixed bands
/// `lambda/2 < |x2| <= lambda` (the top band reaching up to `K^{-1}`) and sqrt
/// `|x2| <= lambda_min/2`, both with `K^{-1} <= |x3| <= 1`.
pub fn build_part_planks(frame: &FrenetFrame, delta: f64, k: f64, kind: PartKind) -> Result<Plank> {
    check_scales(delta, k)?;
    let kinv = 1.0 / k;
    let x1 = Range::sym(delta);
    let upper = Range::band(kinv, 1.0);
    let lambdas = mixed_scales(delta, k);
    let ranges = match kind {
        PartKind::High => [x1, Range::band(kinv, 1.0).open_lo(), Range::sym(1.0)],
        PartKind::Low => [x1, Range::sym(kinv), Range::sym(kinv).open_hi()],
        PartKind::Sqrt => {
            let top = lambdas.last().map_or(kinv, |l| l / 2.0);
            [x1, Range::sym(top), upper]
        }
        PartKind::Mixed(l) => {
            if !is_dyadic(l) || !(l > delta.sqrt()) || l > kinv * (1.0 + 1e-12) {
                return Err(Error::Invalid(format!(
                    "lambda = {l} must be dyadic in (delta^(1/2), 1/K] = ({}, {kinv}]",
                    delta.sqrt()
                )));
            }
            let hi = if lambdas.first().is_some_and(|t| (t - l).abs() < 1e-12 * l) { kinv } else { l };
            [x1, Range::band(l / 2.0, hi).open_lo(), upper]
        }
    };
    Plank::new(*frame, ranges)
}

/// All nonempty pieces of `P_theta`, in the order high, low, sqrt, mixed (largest first).
pub fn part_family(frame: &FrenetFrame, delta: f64, k: f64) -> Result<Vec<(PartKind, Plank)>> {
    check_scales(delta, k)?;
    let mut kinds = vec![PartKind::High, PartKind::Low, PartKind::Sqrt];
    kinds.extend(mixed_scales(delta, k).into_iter().map(PartKind::Mixed));
    let mut out = Vec::new();
    for kind in kinds {
        match build_part_planks(frame, delta, k, kind) {
            Ok(p) => out.push((kind, p)),
            Err(Error::Invalid(msg)) if msg.contains("empty") => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// The full slab `P_theta`.
pub fn slab(frame: &FrenetFrame, delta: f64) -> Result<Plank> {
    Plank::new(*frame, [Range::sym(delta), Range::sym(1.0), Range::sym(1.0)])
}

/// `P^+_{theta, delta^{1/2}} = {|x1| <= delta, |x2| <= delta^{1/2}, K^{-1} <= x3 <= 1}`; its
/// `C`-dilation is the decoupling plank `A_{omega, delta^{1/2}}`.
pub fn sqrt_plank_plus(frame: &FrenetFrame, delta: f64, k: f64) -> Result<Plank> {
    check_scales(delta, k)?;
    Plank::new(*frame, [Range::sym(delta), Range::sym(delta.sqrt()), Range::closed(1.0 / k, 1.0)])
}

/// `Q_{theta, lambda} = {|x1| <= delta, lambda/2 <= x2 <= lambda, K^{-1} <= x3 <= 1}`.
pub fn q_plank(frame: &FrenetFrame, delta: f64, lambda: f64, k: f64) -> Result<Plank> {
    check_scales(delta, k)?;
    Plank::new(*frame, [Range::sym(delta), Range::closed(lambda / 2.0, lambda), Range::closed(1.0 / k, 1.0)])
}

/// Where sample points for an overlap count come from.
#[derive(Debug, Clone)]
pub enum Sampling {
    Points(Vec<Vec3>),
    /// this many uniform points inside each plank, from a seeded stream
    PerPlank { per_plank: usize, seed: u64 },
    /// uniform points in the bounding box of all plank corners
    BoundingBox { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub max: usize,
    /// `histogram[n]` = number of sampled points lying in exactly `n` planks
    pub histogram: Vec<usize>,
    pub samples: usize,
    /// a point achieving the maximum
    pub argmax: Option<[f64; 3]>,
}

impl OverlapReport {
    pub fn in_union(&self) -> usize {
        self.samples - self.histogram.first().copied().unwrap_or(0)
    }
}

/// Index used to skip planks whose `|x1|` bound cannot hold: `theta -> x . e1(theta)` is
/// `|x|`-Lipschitz for a unit-speed curve.
struct SkipIndex {
    thetas: Vec<f64>,
    x1_hi: f64,
}

impl SkipIndex {
    fn build(family: &[Plank]) -> Option<Self> {
        let hi = family.first()?.ranges[0].hi;
        // every plank must force |x1| <= hi
        let bounded = family
            .iter()
            .all(|p| p.ranges[0].hi == hi && (p.ranges[0].abs || p.ranges[0].lo >= -hi));
        // consecutive frames must be consistent with a unit-speed parametrization
        let sorted = family.windows(2).all(|w| {
            let dt = w[1].frame.theta - w[0].frame.theta;
            dt >= 0.0 && (w[1].frame.e1 - w[0].frame.e1).norm() <= dt * (1.0 + 1e-6) + 1e-12
        });
        if !(bounded && sorted) {
            return None;
        }
        Some(Self {
            thetas: family.iter().map(|p| p.frame.theta).collect(),
            x1_hi: hi,
        })
    }

    fn count(&self, family: &[Plank], xi: &Vec3, eta: f64) -> usize {
        let norm = xi.norm();
        let slack = eta * self.x1_hi + 8.0 * f64::EPSILON * norm;
        let mut n = 0;
        let mut i = 0;
        while i < family.len() {
            let p = &family[i];
            let v = xi.dot(&p.frame.e1).abs();
            let excess = v - self.x1_hi - slack;
            if excess > 0.0 && norm > 0.0 {
                let target = p.frame.theta + excess / norm;
                let j = self.thetas.partition_point(|t| *t < target);
                i = j.max(i + 1);
                continue;
            }
            let hit = if eta == 0.0 { p.contains(xi) } else { p.contains_with_margin(xi, eta) };
            if hit {
                n += 1;
            }
            i += 1;
        }
        n
    }
}

/// Number of planks of `family` containing each sample point; the maximum and histogram.
pub fn overlap_count(family: &[Plank], sampling: &Sampling) -> Result<OverlapReport> {
    overlap_count_with(family, sampling, 0.0)
}

/// As [`overlap_count`], with membership widened by the relative margin `eta`.
pub fn overlap_count_with(family: &[Plank], sampling: &Sampling, eta: f64) -> Result<OverlapReport> {
    if family.is_empty() {
        return Err(Error::Empty("plank family"));
    }
    let index = SkipIndex::build(family);
    let count = |xi: &Vec3| match &index {
        Some(ix) => ix.count(family, xi, eta),
        None => family
            .iter()
            .filter(|p| if eta == 0.0 { p.contains(xi) } else { p.contains_with_margin(xi, eta) })
            .count(),
    };
    let mut hist = vec![0usize; 1];
    let mut best = (0usize, None);
    let mut samples = 0;
    let mut record = |xi: Vec3, hist: &mut Vec<usize>| {
        let n = count(&xi);
        if n >= hist.len() {
            hist.resize(n + 1, 0);
        }
        hist[n] += 1;
        if n > best.0 {
            best = (n, Some([xi.x, xi.y, xi.z]));
        }
    };
    match sampling {
        Sampling::Points(pts) => {
            for p in pts {
                record(*p, &mut hist);
                samples += 1;
            }
        }
        Sampling::PerPlank { per_plank, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for p in family {
                for _ in 0..*per_plank {
                    record(p.sample(&mut rng), &mut hist);
                    samples += 1;
                }
            }
        }
        Sampling::BoundingBox { count: n, seed } => {
            let mut lo = Vec3::repeat(f64::INFINITY);
            let mut hi = Vec3::repeat(f64::NEG_INFINITY);
            for p in family {
                for c in p.corners() {
                    lo = lo.inf(&c);
                    hi = hi.sup(&c);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for _ in 0..*n {
                let u = Vec3::new(rng.random(), rng.random(), rng.random());
                record(lo + (hi - lo).component_mul(&u), &mut hist);
                samples += 1;
            }
        }
    }
    Ok(OverlapReport {
        max: best.0,
        histogram: hist,
        samples,
        argmax: best.1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    EssentiallySame,
    Disjoint,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `|theta - theta'| <= lambda^{-1} delta`
    Near,
    /// `C2 lambda^{-1} delta <= |theta - theta'| <= lambda / C2`
    Separated,
    Intermediate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FamilyKind {
    /// `Q_{theta, lambda}`
    Q,
    /// `P^+_{theta, delta^{1/2}}`, where `lambda` is ignored and `delta^{1/2}` used
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SameOrDisjoint {
    pub classification: Classification,
    pub regime: Regime,
    /// every corner of the plank at `theta` lies in the `C1`-dilation at `theta'`
    pub contained: bool,
    /// no sampled point of either `C1`-dilation lies in the other
    pub disjoint_sampled: bool,
    /// exact separating-axis verdict on the `C1`-dilations
    pub disjoint_exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SameOrDisjointParams {
    pub c1: f64,
    pub c2: f64,
    pub k: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SameOrDisjointParams {
    fn default() -> Self {
        Self { c1: 16.0, c2: 8.0, k: 1.0, samples: 100_000, seed: 0 }
    }
}

/// Containment of the plank at `theta` in the `C1`-dilation at `theta'` (by corners, exact for
/// convex boxes) and disjointness of the two `C1`-dilations (by sampling, cross-checked with the
/// separating-axis test).
pub fn same_or_disjoint_check(
    curve: &SphericalCurve,
    theta: f64,
    theta2: f64,
    delta: f64,
    lambda: f64,
    kind: FamilyKind,
    params: &SameOrDisjointParams,
) -> Result<SameOrDisjoint> {
    let f = curve.frenet_frame(theta)?;
    let g = curve.frenet_frame(theta2)?;
    let (a, b, step) = match kind {
        FamilyKind::Q => (
            q_plank(&f, delta, lambda, params.k)?,
            q_plank(&g, delta, lambda, params.k)?,
            delta / lambda,
        ),
        FamilyKind::Sqrt => (
            sqrt_plank_plus(&f, delta, params.k)?,
            sqrt_plank_plus(&g, delta, params.k)?,
            delta.sqrt(),
        ),
    };
    let aperture = if let FamilyKind::Q = kind { lambda } else { 1.0 };
    let gap = (theta - theta2).abs();
    let regime = if gap <= step * (1.0 + 1e-12) {
        Regime::Near
    } else if gap >= params.c2 * step && gap <= aperture / params.c2 {
        Regime::Separated
    } else {
        Regime::Intermediate
    };
    let (ad, bd) = (a.dilate(params.c1), b.dilate(params.c1));
    let contained = a.corners().iter().all(|x| bd.contains_with_margin(x, MARGIN));
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let half = params.samples / 2;
    let hit_ab = (0..half).any(|_| bd.contains_with_margin(&ad.sample(&mut rng), MARGIN));
    let hit_ba = (0..params.samples - half).any(|_| ad.contains_with_margin(&bd.sample(&mut rng), MARGIN));
    let disjoint_sampled = !hit_ab && !hit_ba;
    let disjoint_exact = !ad.intersects(&bd);
    let classification = if contained {
        Classification::EssentiallySame
    } else if disjoint_sampled && disjoint_exact {
        Classification::Disjoint
    } else {
        Classification::Neither
    };
    Ok(SameOrDisjoint {
        classification,
        regime,
        contained,
        disjoint_sampled,
        disjoint_exact,
    })
}

/// `L_theta(xi)`: frame coordinates at `theta` scaled by `(1, K, K^2)`.
pub fn lorentz_rescale(curve: &SphericalCurve, theta: f64, k: f64, xi: &Vec3) -> Result<Vec3> {
    if k == 0.0 || !k.is_finite() {
        return invalid("the rescaling factor must be finite and nonzero");
    }
    let f = curve.frenet_frame(theta)?;
    let c = f.coords(xi);
    Ok(f.embed(&Vec3::new(c.x, c.y * k, c.z * k * k)))
}

/// Frenet frames on a uniform lattice `step * {0, 1, ...}` inside the curve's (half-open)
/// domain.
pub fn lattice_frames(curve: &SphericalCurve, step: f64) -> Result<Vec<FrenetFrame>> {
    let (a, b) = curve.domain();
    if !(step > 0.0) {
        return invalid("lattice step must be positive");
    }
    let n = ((b - a) / step).ceil() as usize;
    if n > 50_000_000 {
        return Err(Error::Invalid(format!("{n} lattice points is too many")));
    }
    let periodic = curve.is_light_cone();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = a + step * i as f64;
        if t > b || (periodic && t >= b) {
            break;
        }
        out.push(curve.frenet_frame(t)?);
    }
    Ok(out)
}
