use serde::{Deserialize, Serialize};
use std::io::Write;

use super::{num, ExperimentConfig, Report};
use crate::curve::{FrenetFrame, SphericalCurve};
use crate::error::{Error, Result};
use crate::fractal::{box_dimension_estimate, Point};

/// `pi_theta(x) = x - (x.e1) e1` in the `(e2, e3)` coordinates of the plane.
pub fn project_point(x: &Point, theta: f64, curve: &SphericalCurve) -> Result<[f64; 2]> {
    let f = curve.frenet_frame(theta)?;
    Ok(project_with(&f, x))
}

fn project_with(f: &FrenetFrame, x: &Point) -> [f64; 2] {
    let v = crate::Vec3::new(x[0], x[1], x[2]);
    [v.dot(&f.e2), v.dot(&f.e3)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionResult {
    pub theta: f64,
    pub estimate: f64,
    /// `(delta, |pi_theta(A)|_delta)`, scales descending
    pub counts: Vec<(f64, usize)>,
    pub exceptional: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub s: f64,
    pub margin: f64,
    /// box-dimension estimate of the fixture itself at the same scales
    pub fixture_estimate: Option<f64>,
    pub directions: Vec<DirectionResult>,
    pub exceptional_fraction: f64,
    /// `(q, estimate)` for q in {0, 0.1, 0.5, 0.9, 1}
    pub quantiles: Vec<(f64, f64)>,
}

impl ProjectionReport {
    pub fn empty(s: f64, margin: f64) -> Self {
        Self {
            s,
            margin,
            fixture_estimate: None,
            directions: Vec::new(),
            exceptional_fraction: 0.0,
            quantiles: Vec::new(),
        }
    }

    pub fn exceptional(&self) -> impl Iterator<Item = &DirectionResult> {
        self.directions.iter().filter(|d| d.exceptional)
    }

    /// Flags agree with estimates and every count is positive.
    pub fn is_consistent(&self) -> bool {
        self.directions.iter().all(|d| {
            d.exceptional == (d.estimate < self.s - self.margin) && d.counts.iter().all(|c| c.1 > 0)
        })
    }
}

impl Report for ProjectionReport {
    fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["theta", "delta", "count", "estimate", "exceptional"])?;
        for d in &self.directions {
            for (delta, count) in &d.counts {
                out.write_record([num(d.theta), num(*delta), count.to_string(), num(d.estimate), d.exceptional.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Directions uniform over the curve's parameter interval (right end excluded), then the extras.
fn direction_grid(curve: &SphericalCurve, n: usize, extra: &[f64]) -> Vec<f64> {
    let (a, b) = curve.domain();
    let mut out: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    out.extend_from_slice(extra);
    out
}

fn quantiles(values: &[f64]) -> Vec<(f64, f64)> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    [0.0, 0.1, 0.5, 0.9, 1.0]
        .iter()
        .map(|&q| (q, v[(q * (v.len() - 1) as f64).round() as usize]))
        .collect()
}

pub fn projection_scan(config: &ExperimentConfig) -> Result<ProjectionReport> {
    config.validate()?;
    let curve = config.curve.build()?;
    let fixture = config.fixture.build(&curve)?;
    let finest = config.scales.last().copied().unwrap_or(0.0);
    if fixture.side > finest * (1.0 + 1e-9) {
        return Err(Error::Resolution(format!(
            "fixture cells of side {} are coarser than the finest scale {finest}",
            fixture.side
        )));
    }
    let thetas = direction_grid(&curve, config.directions, &config.extra_directions);
    if thetas.is_empty() {
        return Ok(ProjectionReport::empty(config.s, config.margin));
    }
    let fixture_estimate = box_dimension_estimate(&fixture.points, &config.scales, config.count)?.slope;
    let mut directions = Vec::with_capacity(thetas.len());
    for theta in thetas {
        let f = curve.frenet_frame(theta)?;
        let projected: Vec<Point> = fixture
            .points
            .iter()
            .map(|x| {
                let p = project_with(&f, x);
                [p[0], p[1], 0.0]
            })
            .collect();
        let est = box_dimension_estimate(&projected, &config.scales, config.count)?;
        directions.push(DirectionResult {
            theta,
            estimate: est.slope,
            counts: est.counts,
            exceptional: est.slope < config.s - config.margin,
        });
    }
    let estimates: Vec<f64> = directions.iter().map(|d| d.estimate).collect();
    let flagged = directions.iter().filter(|d| d.exceptional).count();
    Ok(ProjectionReport {
        s: config.s,
        margin: config.margin,
        fixture_estimate: Some(fixture_estimate),
        exceptional_fraction: flagged as f64 / directions.len() as f64,
        quantiles: quantiles(&estimates),
        directions,
    })
}
