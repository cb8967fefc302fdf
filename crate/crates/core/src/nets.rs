//! Covering numbers, `(delta, s, C)`-sets, greedy `(delta, s)`-subset extraction, dyadic
//! `s`-covers and dyadic pigeonholing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fractal::{cell_key, dist, neighbours, CubeSet, DyadicCube, FractalMeasure, Point};

/// Relative slack on the separation test, so that lattices of spacing exactly `delta` count as
/// separated despite rounding.
pub const SEPARATION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub s: f64,
    pub c: f64,
    pub passed: bool,
}

/// A point cloud in `[0,1]^d` with separation `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSet {
    pub dim: usize,
    pub points: Vec<Point>,
    pub delta: f64,
    pub certificate: Option<Certificate>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    dim: usize,
    delta: f64,
    count: usize,
    s: Option<f64>,
    c: Option<f64>,
    certified: bool,
}

impl DeltaSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest pairwise distance when it is below `delta`; otherwise `delta` itself (or infinity
    /// for fewer than two points).
    pub fn min_separation(&self) -> f64 {
        let h = self.delta.max(1e-300);
        let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in self.points.iter().enumerate() {
            grid.entry(cell_key(p, h)).or_default().push(i);
        }
        let mut best = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            for k in neighbours(cell_key(p, h)) {
                if let Some(ids) = grid.get(&k) {
                    for &j in ids {
                        if j > i {
                            best = best.min(dist(p, &self.points[j]));
                        }
                    }
                }
            }
        }
        if self.points.len() > 1 {
            best.min(self.delta)
        } else {
            best
        }
    }

    pub fn is_separated(&self) -> bool {
        self.min_separation() >= self.delta * (1.0 - SEPARATION_SLACK)
    }

    /// One point per CSV row, coordinates `x0..x{d-1}`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        let header: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).collect();
        w.write_record(&header)?;
        for p in &self.points {
            w.write_record(p[..self.dim].iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_sidecar<W: Write>(&self, w: W) -> Result<()> {
        let car = Sidecar {
            dim: self.dim,
            delta: self.delta,
            count: self.points.len(),
            s: self.certificate.map(|c| c.s),
            c: self.certificate.map(|c| c.c),
            certified: self.certificate.is_some_and(|c| c.passed),
        };
        serde_json::to_writer_pretty(w, &car)?;
        Ok(())
    }

    pub fn read<R: Read, S: Read>(csv_in: R, sidecar: S) -> Result<Self> {
        let car: Sidecar = serde_json::from_reader(sidecar)?;
        let mut rdr = csv::Reader::from_reader(csv_in);
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != car.dim {
                return Err(Error::Parse(format!("expected {} columns", car.dim)));
            }
            let mut p = [0.0; 3];
            for (i, f) in rec.iter().enumerate() {
                p[i] = f.parse().map_err(|e| Error::Parse(format!("{e}")))?;
            }
            points.push(p);
        }
        let certificate = match (car.s, car.c) {
            (Some(s), Some(c)) => Some(Certificate {
                s,
                c,
                passed: car.certified,
            }),
            _ => None,
        };
        Ok(Self {
            dim: car.dim,
            points,
            delta: car.delta,
            certificate,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Covering {
    pub count: usize,
    pub witness: DeltaSet,
}

/// Greedy maximal `delta`-separated subset, scanning points in lexicographic order.
pub fn covering_number(points: &[Point], delta: f64) -> Result<Covering> {
    if points.is_empty() {
        return Err(Error::Empty("point set"));
    }
    if !(delta > 0.0) {
        return invalid(format!("delta = {delta} must be positive"));
    }
    let mut order: Vec<&Point> = points.iter().collect();
    order.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])).then(a[2].total_cmp(&b[2])));
    let thresh = delta * (1.0 - SEPARATION_SLACK);
    let mut grid: HashMap<[i64; 3], Vec<Point>> = HashMap::new();
    let mut kept = Vec::new();
    for p in order {
        let key = cell_key(p, delta);
        let clash = neighbours(key).any(|k| grid.get(&k).is_some_and(|v| v.iter().any(|q| dist(p, q) < thresh)));
        if !clash {
            grid.entry(key).or_default().push(*p);
            kept.push(*p);
        }
    }
    let dim = if points.iter().any(|p| p[2] != 0.0) {
        3
    } else if points.iter().any(|p| p[1] != 0.0) {
        2
    } else {
        1
    };
    Ok(Covering {
        count: kept.len(),
        witness: DeltaSet {
            dim,
            points: kept,
            delta,
            certificate: None,
        },
    })
}

/// A dyadic cube holding more points than the `(delta, s, C)` bound allows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub cube: DyadicCube,
    pub side: f64,
    pub count: usize,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetCheck {
    pub ok: bool,
    /// the violation with the largest `count / bound`, coarsest and lexicographically first on
    /// ties
    pub witness: Option<Witness>,
}

fn dyadic_key(p: &Point, dim: usize, m: u32) -> [u64; 3] {
    let n = (1u64 << m) as f64;
    let mut k = [0u64; 3];
    for i in 0..dim {
        // the closed right edge of [0,1] belongs to the last cube
        k[i] = ((p[i] * n).floor().max(0.0) as u64).min((1u64 << m) - 1);
    }
    k
}

/// Checks `#(P cap Q) <= C (r/delta)^s` for all dyadic cubes of side `r in [delta, 1]`.
pub fn is_delta_s_set(p: &DeltaSet, s: f64, c: f64) -> SetCheck {
    let top = ((1.0 / p.delta).log2() + 1e-9).floor().max(0.0) as u32;
    let mut worst: Option<(f64, Witness)> = None;
    for m in 0..=top.min(62) {
        let side = 0.5f64.powi(m as i32);
        let bound = c * (side / p.delta).powf(s);
        let mut counts: BTreeMap<[u64; 3], usize> = BTreeMap::new();
        for q in &p.points {
            *counts.entry(dyadic_key(q, p.dim, m)).or_default() += 1;
        }
        for (k, n) in counts {
            if n as f64 > bound * (1.0 + 1e-12) {
                let ratio = n as f64 / bound;
                if worst.as_ref().is_none_or(|(r, _)| ratio > *r) {
                    worst = Some((
                        ratio,
                        Witness {
                            cube: DyadicCube { level: m, coords: k },
                            side,
                            count: n,
                            bound,
                        },
                    ));
                }
            }
        }
    }
    SetCheck {
        ok: worst.is_none(),
        witness: worst.map(|w| w.1),
    }
}

/// Top-down pruning of one point per level-`n` dyadic cube charged by `measure`, so that every
/// level-`m` cube keeps at most `2 * 2^{(n-m)s}` points. `delta = 2^{-n}`.
///
/// The representative of a level-`n` cube is its center, so the output is exactly
/// `delta`-separated and lies within `delta/2` (per axis) of the support.
pub fn extract_delta_s_subset(measure: &FractalMeasure, n: u32, s: f64) -> Result<DeltaSet> {
    if !(measure.total_mass() > 0.0) {
        return invalid("measure has zero mass");
    }
    if n > 40 {
        return invalid("depth above 40 is not supported");
    }
    if !(s >= 0.0) {
        return invalid("exponent must be nonnegative");
    }
    let set = measure.set();
    let dim = set.dim();
    let mut cells: BTreeSet<[u64; 3]> = BTreeSet::new();
    for (c, w) in set.coords().iter().zip(measure.weights()) {
        if *w > 0.0 {
            cells.insert(dyadic_key(&set.center(c), dim, n));
        }
    }
    let mut alive: Vec<[u64; 3]> = cells.into_iter().collect();
    for m in (0..n).rev() {
        let cap = (2.0 * 2f64.powf((n - m) as f64 * s) * (1.0 + 1e-12)).floor() as usize;
        let shift = n - m;
        let mut groups: BTreeMap<[u64; 3], Vec<[u64; 3]>> = BTreeMap::new();
        for k in alive {
            groups.entry(k.map(|v| v >> shift)).or_default().push(k);
        }
        alive = Vec::new();
        for (_, mut pts) in groups {
            // cells are already lexicographic, which matches the order of their centers
            pts.truncate(cap.max(1));
            alive.extend(pts);
        }
        alive.sort_unstable();
    }
    let delta = 0.5f64.powi(n as i32);
    let points: Vec<Point> = alive
        .iter()
        .map(|k| {
            let mut p = [0.0; 3];
            for i in 0..dim {
                p[i] = (k[i] as f64 + 0.5) * delta;
            }
            p
        })
        .collect();
    let mut out = DeltaSet {
        dim,
        points,
        delta,
        certificate: None,
    };
    let check = is_delta_s_set(&out, s, 2.0);
    out.certificate = Some(Certificate {
        s,
        c: 2.0,
        passed: check.ok,
    });
    Ok(out)
}

/// Disjoint dyadic squares with the `s`-dimensional condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCover {
    pub dim: usize,
    pub s: f64,
    pub max_depth: u32,
    /// cover squares by level
    pub squares: BTreeMap<u32, Vec<[u64; 3]>>,
    pub merges: usize,
    /// the requested content budget; `content() < epsilon` is reported, not enforced
    pub epsilon: f64,
}

impl SCover {
    pub fn content(&self) -> f64 {
        self.squares
            .iter()
            .map(|(l, v)| v.len() as f64 * 0.5f64.powf(*l as f64 * self.s))
            .sum()
    }

    pub fn within_budget(&self) -> bool {
        self.content() < self.epsilon
    }

    pub fn len(&self) -> usize {
        self.squares.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Exhaustive search for a level-`l` square `D` and level `k > l` with more than
    /// `2^{(k-l)s}` cover squares of level `k` inside `D`.
    pub fn violation(&self) -> Option<(DyadicCube, u32, usize)> {
        for (&k, v) in &self.squares {
            for l in 0..k {
                let mut counts: BTreeMap<[u64; 3], usize> = BTreeMap::new();
                for c in v {
                    *counts.entry(c.map(|x| x >> (k - l))).or_default() += 1;
                }
                let bound = 2f64.powf((k - l) as f64 * self.s);
                for (d, n) in counts {
                    if n as f64 > bound * (1.0 + 1e-12) {
                        return Some((DyadicCube { level: l, coords: d }, k, n));
                    }
                }
            }
        }
        None
    }

    /// True when the squares are pairwise disjoint.
    pub fn is_disjoint(&self) -> bool {
        let all: BTreeSet<(u32, [u64; 3])> = self
            .squares
            .iter()
            .flat_map(|(l, v)| v.iter().map(move |c| (*l, *c)))
            .collect();
        if all.len() != self.len() {
            return false;
        }
        all.iter().all(|&(l, c)| (0..l).all(|a| !all.contains(&(a, c.map(|x| x >> (l - a))))))
    }

    /// True when every cube of `x` lies inside some cover square.
    pub fn covers(&self, x: &CubeSet) -> bool {
        let leaves = match leaf_cells(x, self.max_depth) {
            Ok(v) => v,
            Err(_) => return false,
        };
        leaves.iter().all(|c| {
            self.squares
                .iter()
                .any(|(l, v)| v.binary_search(&c.map(|x| x >> (self.max_depth - l))).is_ok())
        })
    }
}

/// Level-`depth` dyadic cells meeting some cube of `x`, by exact integer interval intersection.
fn leaf_cells(x: &CubeSet, depth: u32) -> Result<Vec<[u64; 3]>> {
    if depth > 30 {
        return invalid("dyadic depth above 30 is not supported");
    }
    let dim = x.dim();
    let b = x.base() as u128;
    let bn = b.pow(x.level());
    let two = 1u128 << depth;
    let mut out = BTreeSet::new();
    for c in x.coords() {
        // cube [k/b^n, (k+1)/b^n) meets [j/2^D, (j+1)/2^D) iff k 2^D < (j+1) b^n and j b^n < (k+1) 2^D
        let mut ranges = [(0u64, 0u64); 3];
        for i in 0..dim {
            let k = c[i] as u128;
            let lo = (k * two) / bn;
            let hi = ((k + 1) * two).div_ceil(bn) - 1;
            ranges[i] = (lo as u64, hi.min(two - 1) as u64);
        }
        let mut idx = [0u64; 3];
        let r = |i: usize| if i < dim { ranges[i] } else { (0, 0) };
        for a in r(0).0..=r(0).1 {
            idx[0] = a;
            for b2 in r(1).0..=r(1).1 {
                idx[1] = b2;
                for c3 in r(2).0..=r(2).1 {
                    idx[2] = c3;
                    out.insert(idx);
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// Finite-depth realization of the dyadic `s`-cover: start from the level-`max_depth` cells
/// meeting `x`, then repeatedly take the violating square `D` that is coarsest and then
/// lexicographically first, and replace every cover square inside `D` by `D` itself.
pub fn dyadic_s_cover(x: &CubeSet, s: f64, max_depth: u32, epsilon: f64) -> Result<SCover> {
    if x.is_empty() {
        return Err(Error::Empty("cube set"));
    }
    let dim = x.dim();
    let depth = max_depth;
    let leaves = leaf_cells(x, depth)?;
    let bound = |gap: u32| 2f64.powf(gap as f64 * s) * (1.0 + 1e-12);

    // cover squares, and per ancestor the number of cover squares at each finer level
    let mut cover: BTreeSet<(u32, [u64; 3])> = BTreeSet::new();
    let mut counts: HashMap<(u32, [u64; 3]), Vec<usize>> = HashMap::new();
    let anc = |l: u32, c: &[u64; 3], a: u32| c.map(|v| v >> (l - a));
    let bump = |counts: &mut HashMap<(u32, [u64; 3]), Vec<usize>>, l: u32, c: &[u64; 3], add: bool| {
        for a in 0..l {
            let e = counts.entry((a, anc(l, c, a))).or_insert_with(|| vec![0; depth as usize + 1]);
            if add {
                e[l as usize] += 1;
            } else {
                e[l as usize] -= 1;
            }
        }
    };
    for c in &leaves {
        cover.insert((depth, *c));
        bump(&mut counts, depth, c, true);
    }
    let violates = |counts: &HashMap<(u32, [u64; 3]), Vec<usize>>, l: u32, c: &[u64; 3]| {
        counts
            .get(&(l, *c))
            .is_some_and(|v| (l + 1..=depth).any(|k| v[k as usize] as f64 > bound(k - l)))
    };
    let mut pending: BTreeSet<(u32, [u64; 3])> = counts
        .keys()
        .filter(|(l, c)| violates(&counts, *l, c))
        .copied()
        .collect();
    let mut merges = 0;
    while let Some((l, d)) = pending.pop_first() {
        if !violates(&counts, l, &d) {
            continue;
        }
        // drop every cover square inside d
        let inside: Vec<(u32, [u64; 3])> = cover
            .iter()
            .filter(|(k, c)| *k > l && anc(*k, c, l) == d)
            .copied()
            .collect();
        for (k, c) in inside {
            cover.remove(&(k, c));
            bump(&mut counts, k, &c, false);
        }
        cover.insert((l, d));
        bump(&mut counts, l, &d, true);
        merges += 1;
        pending.retain(|(k, c)| !(*k > l && anc(*k, c, l) == d));
        for a in 0..l {
            let ad = anc(l, &d, a);
            if violates(&counts, a, &ad) {
                pending.insert((a, ad));
            }
        }
    }
    let mut squares: BTreeMap<u32, Vec<[u64; 3]>> = BTreeMap::new();
    for (l, c) in cover {
        squares.entry(l).or_default().push(c);
    }
    Ok(SCover {
        dim,
        s,
        max_depth: depth,
        squares,
        merges,
        epsilon,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PigeonholeReport {
    /// bucket index `i`: members have counts in `[2^i, 2^{i+1})`
    pub index: u32,
    pub value: u64,
    /// positions (in input order) of the groups in the chosen bucket
    pub members: Vec<usize>,
    pub j: u32,
    pub total: u64,
}

impl PigeonholeReport {
    /// `2^i #bucket <= total <= J 2^{i+1} #bucket`
    pub fn holds(&self) -> bool {
        let m = self.members.len() as u128;
        let lo = (self.value as u128) * m;
        let hi = self.j as u128 * 2 * self.value as u128 * m;
        lo <= self.total as u128 && self.total as u128 <= hi
    }
}

/// Picks the dyadic bucket `[2^j, 2^{j+1})` maximizing `2^j #bucket`, larger `j` on ties.
pub fn dyadic_pigeonhole(counts: &[u64]) -> Result<PigeonholeReport> {
    if counts.is_empty() {
        return Err(Error::Empty("group counts"));
    }
    if counts.contains(&0) {
        return invalid("group counts must be at least 1");
    }
    let bucket = |c: u64| 63 - c.leading_zeros();
    let mut buckets: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &c) in counts.iter().enumerate() {
        buckets.entry(bucket(c)).or_default().push(i);
    }
    let max = *counts.iter().max().unwrap();
    let (&index, members) = buckets
        .iter()
        .max_by(|(a, x), (b, y)| {
            let pa = (1u128 << **a) * x.len() as u128;
            let pb = (1u128 << **b) * y.len() as u128;
            pa.cmp(&pb).then(a.cmp(b))
        })
        .unwrap();
    Ok(PigeonholeReport {
        index,
        value: 1u64 << index,
        members: members.clone(),
        j: bucket(max) + 1,
        total: counts.iter().sum(),
    })
}
