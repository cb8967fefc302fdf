//! Experiment configuration, projection scans, the two pipelines and report output.

mod marstrand;
mod scan;
mod thm5;

pub use marstrand::{marstrand_pipeline, projection_s_condition, HypothesisViolation, KRow, LowBoundRow, MarstrandReport, MarstrandSettings};
pub use scan::{project_point, projection_scan, DirectionResult, ProjectionReport};
pub use thm5::{thm5_pipeline, Thm5Report, Thm5Settings};

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::curve::SphericalCurve;
use crate::error::{invalid, Error, Result};
use crate::fractal::{cantor_stage, CountMethod, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSpec {
    LightCone,
    ConstantTorsion { tau: f64, domain: [f64; 2], intervals: usize },
}

impl CurveSpec {
    pub fn build(&self) -> Result<SphericalCurve> {
        match *self {
            CurveSpec::LightCone => Ok(SphericalCurve::light_cone()),
            CurveSpec::ConstantTorsion { tau, domain, intervals } => {
                SphericalCurve::from_torsion(move |_| tau, (domain[0], domain[1]), intervals)
            }
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixtureSpec {
    /// product Cantor cubes, placed at `offset + scale * x`; with `fill > 0` each cube is
    /// sampled as a solid cube on a `base^fill` grid per axis instead of by its center
    Cantor {
        base: u64,
        digits: Vec<u64>,
        stage: u32,
        dim: usize,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        offset: [f64; 3],
        #[serde(default)]
        fill: u32,
    },
    /// evenly spaced points of the segment `offset + t gamma(theta0)`, `t in [0, length]`
    Segment {
        theta0: f64,
        length: f64,
        points: usize,
        #[serde(default)]
        offset: [f64; 3],
    },
    Point { at: [f64; 3] },
    /// planar cells of side `side` whose centers lie in the disc
    Disc { center: [f64; 2], radius: f64, side: f64 },
}

/// Cell centers with their common side length (0 for a bare point).
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub dim: usize,
    pub points: Vec<Point>,
    pub side: f64,
}

impl FixtureSpec {
    pub fn build(&self, curve: &SphericalCurve) -> Result<Fixture> {
        match self {
            FixtureSpec::Cantor { base, digits, stage, dim, scale, offset, fill } => {
                if !(*scale > 0.0) {
                    return invalid("fixture scale must be positive");
                }
                let set = cantor_stage(*base, digits, *stage, *dim)?;
                let centers = set.placed_centers(*scale, *offset);
                if *fill == 0 {
                    return Ok(Fixture { dim: *dim, points: centers, side: scale * set.side() });
                }
                let m = base.checked_pow(*fill).filter(|m| m.pow(*dim as u32) <= 1 << 12);
                let Some(m) = m else {
                    return invalid("fill too fine");
                };
                let side = scale * set.side() / m as f64;
                let shift = |i: u64| (i as f64 + 0.5) * side - 0.5 * scale * set.side();
                let mut subs: Vec<Point> = vec![[0.0; 3]];
                for axis in 0..*dim {
                    subs = subs
                        .iter()
                        .flat_map(|q| {
                            (0..m).map(move |i| {
                                let mut r = *q;
                                r[axis] = shift(i);
                                r
                            })
                        })
                        .collect();
                }
                let points = centers
                    .iter()
                    .flat_map(|c| subs.iter().map(move |d| [c[0] + d[0], c[1] + d[1], c[2] + d[2]]))
                    .collect();
                Ok(Fixture { dim: *dim, points, side })
            }
            FixtureSpec::Segment { theta0, length, points, offset } => {
                if *points < 2 || !(*length > 0.0) {
                    return invalid("a segment needs 2 or more points and positive length");
                }
                let g = curve.jet(*theta0)?[0];
                let pts = (0..*points)
                    .map(|i| {
                        let t = length * i as f64 / (*points - 1) as f64;
                        [offset[0] + t * g.x, offset[1] + t * g.y, offset[2] + t * g.z]
                    })
                    .collect();
                Ok(Fixture { dim: 3, points: pts, side: length / (*points - 1) as f64 })
            }
            FixtureSpec::Point { at } => Ok(Fixture { dim: 3, points: vec![*at], side: 0.0 }),
            FixtureSpec::Disc { center, radius, side } => {
                if !(*side > 0.0 && *radius >= 0.0) {
                    return invalid("disc needs a positive cell side");
                }
                let m = (radius / side).ceil() as i64 + 1;
                let mut pts = Vec::new();
                for i in -m..=m {
                    for j in -m..=m {
                        let (x, y) = ((i as f64 + 0.5) * side, (j as f64 + 0.5) * side);
                        if x.hypot(y) <= *radius {
                            pts.push([center[0] + x, center[1] + y, 0.0]);
                        }
                    }
                }
                if pts.is_empty() {
                    return Err(Error::Empty("disc cells"));
                }
                Ok(Fixture { dim: 2, points: pts, side: *side })
            }
        }
    }
}

/// Whether each pipeline picks `K` itself or takes the listed values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KPolicy {
    Auto,
    Fixed { values: Vec<f64> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

fn default_margin() -> f64 {
    0.05
}

fn default_count() -> CountMethod {
    CountMethod::Mesh
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub curve: CurveSpec,
    pub fixture: FixtureSpec,
    /// descending
    pub scales: Vec<f64>,
    pub directions: usize,
    #[serde(default)]
    pub extra_directions: Vec<f64>,
    pub s: f64,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_count")]
    pub count: CountMethod,
    #[serde(default = "auto")]
    pub k: KPolicy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub marstrand: MarstrandSettings,
    #[serde(default)]
    pub thm5: Thm5Settings,
}

fn auto() -> KPolicy {
    KPolicy::Auto
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales.windows(2).any(|w| !(w[0] > w[1])) {
            return invalid("scales must be strictly descending");
        }
        if self.scales.iter().any(|d| !(*d > 0.0)) {
            return invalid("scales must be positive");
        }
        if !(self.s > 0.0 && self.s < 2.0) {
            return invalid(format!("s = {} outside (0, 2)", self.s));
        }
        if !(self.a > 0.0 && self.a <= 3.0) {
            return invalid(format!("a = {} outside (0, 3]", self.a));
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return invalid(format!("t = {} outside (0, 1]", self.t));
        }
        if !(self.margin >= 0.0) {
            return invalid("margin must be non-negative");
        }
        if let KPolicy::Fixed { values } = &self.k {
            if values.is_empty() || values.iter().any(|k| !(*k >= 1.0)) {
                return invalid("fixed K values must be at least 1");
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// A report with a flat CSV view; the JSON view is its serde form.
pub trait Report: Serialize {
    fn write_csv<W: Write>(&self, w: W) -> Result<()>;
}

pub fn render_report<R: Report, W: Write>(report: &R, format: Format, mut w: W) -> Result<()> {
    match format {
        Format::Csv => report.write_csv(w),
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, report)?;
            writeln!(w)?;
            Ok(())
        }
    }
}

pub fn emit_report<R: Report>(report: &R, format: Format, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    render_report(report, format, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Shortest decimal form that reads back to the same float.
pub(crate) fn num(x: f64) -> String {
    format!("{x:?}")
}
