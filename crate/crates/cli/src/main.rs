use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use rproj::curve::SphericalCurve;
use rproj::decoupling::{bootstrap_iterate, cone_table, flat_decoupling_ratio, tiling_instance, ConeBench, DataSpec};
use rproj::field::{assemble_f, high_low_split, GridSpec, Tube, TubeFamily};
use rproj::fractal::{box_dimension_estimate, cantor_stage, natural_measure, CountMethod};
use rproj::lab::{marstrand_pipeline, projection_scan, render_report, thm5_pipeline, CurveSpec, ExperimentConfig, Format, Report};
use rproj::nets::{extract_delta_s_subset, is_delta_s_set};
use rproj::planks::{part_family, PartKind, PlankRecord};

#[derive(Parser)]
#[command(name = "rproj", version, about = "Projection, tube and decoupling experiments along space curves")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// config file, TOML or JSON (chosen by the .json extension)
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// overrides the seed in the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output file; stdout when absent
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,
}

#[derive(Subcommand)]
enum Verb {
    /// Frenet frame table along a curve
    Frames,
    /// Cantor cubes, or a box-dimension estimate
    Fractal,
    /// (delta, s)-subset of a Cantor measure
    Net,
    /// part-planks of the slab at one direction
    Planks,
    /// high-low split energies of a tube field
    Highlow,
    /// flat, cone or bootstrap decoupling runs
    Decouple,
    /// projection scan over a direction grid
    Scan,
    /// the planar or the spatial incidence pipeline
    Pipeline {
        #[arg(long, value_enum, default_value = "marstrand")]
        kind: PipelineKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineKind {
    Marstrand,
    Thm5,
}

/// Exit status of a successful run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Invariant,
    Hypothesis,
}

impl Status {
    fn code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Invariant => 2,
            Status::Hypothesis => 3,
        }
    }
}

fn load<T: DeserializeOwned>(path: Option<&Path>) -> anyhow::Result<T> {
    let Some(path) = path else {
        bail!("this verb needs --config");
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(&text)?)
    } else {
        Ok(toml::from_str(&text)?)
    }
}

fn load_experiment(path: Option<&Path>) -> anyhow::Result<ExperimentConfig> {
    let c: ExperimentConfig = load(path)?;
    c.validate()?;
    Ok(c)
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn json<T: Serialize>(v: &T) -> anyhow::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner()?)
}

fn report<R: Report>(r: &R, format: Format) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    render_report(r, format, &mut out)?;
    Ok(out)
}

fn pick(f: Option<OutFormat>, default: Format) -> Format {
    match f {
        Some(OutFormat::Csv) => Format::Csv,
        Some(OutFormat::Json) => Format::Json,
        None => default,
    }
}

#[derive(Deserialize)]
struct FramesConfig {
    curve: CurveSpec,
    #[serde(default = "default_samples")]
    samples: usize,
}

fn default_samples() -> usize {
    64
}

#[derive(Serialize)]
struct FrameRow {
    theta: f64,
    e1: [f64; 3],
    e2: [f64; 3],
    e3: [f64; 3],
    tau: f64,
    defect: f64,
}

fn frames(cli: &Cli) -> anyhow::Result<(Vec<u8>, Status)> {
    let c: FramesConfig = load(cli.config.as_deref())?;
    let curve = c.curve.build()?;
    let (a, b) = curve.domain();
    let n = c.samples.max(1);
    let mut rows = Vec::with_capacity(n + 1);
    let mut status = Status::Pass;
    for i in 0..=n {
        let t = if i == n { b } else { a + (b - a) * i as f64 / n as f64 };
        let f = curve.frenet_frame(t)?;
        let defect = f.orthonormality_defect();
        if defect > 1e-10 {
            status = Status::Invariant;
        }
        let v = |e: rproj::Vec3| [e.x, e.y, e.z];
        rows.push(FrameRow { theta: t, e1: v(f.e1), e2: v(f.e2), e3: v(f.e3), tau: curve.torsion(t)?, defect });
    }
    let out = match pick(cli.format, Format::Csv) {
        Format::Json => json(&rows)?,
        Format::Csv => csv_table(
            &["theta", "e1x", "e1y", "e1z", "e2x", "e2y", "e2z", "e3x", "e3y", "e3z", "tau", "defect"],
            rows.iter().map(|r| {
                let mut rec = vec![num(r.theta)];
                rec.extend(r.e1.iter().chain(&r.e2).chain(&r.e3).map(|x| num(*x)));
                rec.push(num(r.tau));
                rec.push(num(r.defect));
                rec
            }),
        )?,
    };
    Ok((out, status))
}

#[derive(Deserialize)]
struct CantorConfig {
    base: u64,
    digits: Vec<u64>,
    stage: u32,
    dim: usize,
    #[serde(default)]
    scales: Vec<f64>,
    #[serde(default = "mesh")]
    count: CountMethod,
}

fn mesh() -> CountMethod {
    CountMethod::Mesh
}

#[derive(Serialize)]
struct FractalSummary {
    cubes: usize,
    side: f64,
    similarity_dimension: f64,
    estimate: Option<rproj::fractal::DimensionEstimate>,
}

fn fractal(cli: &Cli) -> anyhow::Result<(Vec<u8>, Status)> {
    let c: CantorConfig = load(cli.config.as_deref())?;
    let set = cantor_stage(c.base, &c.digits, c.stage, c.dim)?;
    if c.scales.is_empty() && matches!(cli.format, None | Some(OutFormat::Csv)) {
        let mut out = Vec::new();
        set.write_text(&mut out)?;
        return Ok((out, Status::Pass));
    }
    let estimate = if c.scales.is_empty() {
        None
    } else {
        Some(box_dimension_estimate(&set.centers(), &c.scales, c.count)?)
    };
    let summary = FractalSummary {
        cubes: set.len(),
        side: set.side(),
        similarity_dimension: c.dim as f64 * (c.digits.len() as f64).ln() / (c.base as f64).ln(),
        estimate,
    };
    Ok((json(&summary)?, Status::Pass))
}

#[derive(Deserialize)]
struct NetConfig {
    #[serde(flatten)]
    cantor: CantorConfig,
    /// the subset lives at scale `2^-n`
    n: u32,
    s: f64,
}

fn net(cli: &Cli) -> anyhow::Result<(Vec<u8>, Status)> {
    let c: NetConfig = load(cli.config.as_deref())?;
    let set = cantor_stage(c.cantor.base, &c.cantor.digits, c.cantor.stage, c.cantor.dim)?;
    let p = extract_delta_s_subset(&natural_measure(&set)?, c.n, c.s)?;
    let ok = p.is_separated() && is_delta_s_set(&p, c.s, 2.0).ok;
    let mut out = Vec::new();
    match pick(cli.format, Format::Csv) {
        Format::Csv => p.write_csv(&mut out)?,
        Format::Json => p.write_sidecar(&mut out)?,
    }
    Ok((out, if ok { Status::Pass } else { Status::Invariant }))
}

#[derive(Deserialize)]
struct PlanksConfig {
    curve: CurveSpec,
    theta: f64,
    delta: f64,
    k: f64,
}

#[derive(Serialize)]
struct PartRow {
    kind: PartKind,
    plank: PlankRecord,
}

fn planks(cli: &Cli) -> anyhow::Result<(Vec<u8>, Status)> {
    let c: PlanksConfig = load(cli.config.as_deref())?;
    let curve = c.curve.build()?;
    let frame = curve.frenet_frame(c.theta)?;
    let rows: Vec<PartRow> = part_family(&frame, c.delta, c.k)?
        .into_iter()
        .map(|(kind, p)| PartRow { kind, plank: p.record() })
        .collect();
    let out = match pick(cli.format, Format::Json) {
        Format::Json => json(&rows)?,
        Format::Csv => csv_table(
            &["kind", "x1_lo", "x1_hi", "x2_lo", "x2_hi", "x3_lo", "x3_hi"],
            rows.iter().map(|r| {
                let mut rec = vec![format!("{:?}", r.kind)];
                rec.extend(r.plank.ranges.iter().flatten().map(|x| num(*x)));
                rec
            }),
        )?,
    };
    Ok((out, Status::Pass))
}

#[derive(Deserialize)]
struct TubeSpec {
    center: [f64; 2],
    angle: f64,
    half_widths: [f64; 2],
}

#[derive(Deserialize)]
struct HighlowConfig {
    n: usize,
    period: f64,
    delta: f64,
    ks: Vec<f64>,
    tubes: Vec<TubeSpec>,
}

#[derive(Serialize)]
struct HighlowRow {
    k: f64,
    low_energy: f64,
    high_energy: f64,
    partition_error: f64,
}

fn highlow(cli: &Cli) -> anyhow::Result<(Vec<u8>, Status)> {
    let c: HighlowConfig = load(cli.config.as_deref())?;
    let spec = GridSpec::new(2, c.n, c.period)?;
    let families = c
        .tubes
        .iter()
        .map(|t| Ok(TubeFamily { label: t.angle, tubes: vec![Tube::planar(t.center, t.angle, t.half_widths)?] }))
        .collect::<rproj::Result<Vec<_>>>()?;
    let f = assemble_f(spec, &families)?.field.into_phys();
    let mut rows = Vec::new();
    for &k in &c.ks {
        let (lo, hi) = high_low_split(&f, c.delta, k)?;
        let mut sum = lo.clone();
        sum.add_assign(&hi)?;
        rows.push(HighlowRow {
            k,
            low_energy: lo.l2_squared(),
            high_energy: hi.l2_squared(),
            partition_error: f.max_rel_diff(&sum)?,
        });
    }
    let status = if rows.iter().all(|r| r.partition_error <= 1e-9) { Status::Pass } else { Status::Invariant };
    let out = match pick(cli.format, Format::Csv) {
        Format::Json => json(&rows)?,
        Format::Csv => csv_table(
            &["k", "low_energy", "high_energy", "partition_error"],
            rows.iter().map(|r| vec![num(r.k), num(r.low_energy), num(r.high_energy), num(r.partition_error)]),
        )?,
    };
    Ok((out, status))
}

#[derive(Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
enum DecoupleConfig {
    Flat {
        #[serde(default = "six")]
        p: f64,
        seeds: Vec<u64>,
        #[serde(default = "sixty_four")]
        modes: usize,
    },
    Cone {
        #[serde(default)]
        bench: ConeBench,
    },
    Bootstrap {
        epsilon: f64,
        delta: f64,
        #[serde(default = "one")]
        c: f64,
    },
}

fn six() -> f64 {
    6.0
}

fn sixty_four() -> usize {
    64
}

fn one() -> f64 {
    1.0
}

#[derive(Serialize)]
struct FlatRow {
    seed: u64,
    numerator: f64,
    denominator: f64,
    ratio: f64,
}

fn decouple(cli: &Cli) -> anyhow::Result<(Vec<u8>, Status)> {
    let c: DecoupleConfig = load(cli.config.as_deref())?;
    match c {
        DecoupleConfig::Flat { p, seeds, modes } => {
            let seeds = cli.seed.map(|s| vec![s]).unwrap_or(seeds);
            let mut rows = Vec::with_capacity(seeds.len());
            for seed in seeds {
                let r = flat_decoupling_ratio(&tiling_instance(p, DataSpec::new(Some(modes), seed))?)?;
                rows.push(FlatRow { seed, numerator: r.numerator, denominator: r.denominator, ratio: r.ratio });
            }
            let status = if rows.iter().all(|r| r.ratio <= 4.0) { Status::Pass } else { Status::Invariant };
            let out = match pick(cli.format, Format::Csv) {
                Format::Json => json(&rows)?,
                Format::Csv => csv_table(
                    &["seed", "numerator", "denominator", "ratio"],
                    rows.iter().map(|r| vec![r.seed.to_string(), num(r.numerator), num(r.denominator), num(r.ratio)]),
                )?,
            };
            Ok((out, status))
        }
        DecoupleConfig::Cone { mut bench } => {
            if let Some(s) = cli.seed {
                bench.seeds = vec![s];
            }
            let table = cone_table(&SphericalCurve::light_cone(), &bench)?;
            let out = match pick(cli.format, Format::Csv) {
                Format::Json => json(&table)?,
                Format::Csv => {
                    let mut out = Vec::new();
                    table.write_csv(&mut out)?;
                    out
                }
            };
            Ok((out, Status::Pass))
        }
        DecoupleConfig::Bootstrap { epsilon, delta, c } => {
            let st = bootstrap_iterate(epsilon, delta, c)?;
            let mut out = st.to_json()?.into_bytes();
            out.push(b'\n');
            Ok((out, if st.checks.all_ok() { Status::Pass } else { Status::Invariant }))
        }
    }
}

fn scan(cli: &Cli) -> anyhow::Result<(Vec<u8>, Status)> {
    let mut c = load_experiment(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    let r = projection_scan(&c)?;
    let status = if r.is_consistent() { Status::Pass } else { Status::Invariant };
    Ok((report(&r, pick(cli.format, Format::Csv))?, status))
}

fn pipeline(cli: &Cli, kind: PipelineKind) -> anyhow::Result<(Vec<u8>, Status)> {
    let mut c = load_experiment(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    let format = pick(cli.format, Format::Json);
    match kind {
        PipelineKind::Marstrand => {
            let r = marstrand_pipeline(&c)?;
            let exact = r.k_rows.iter().all(|k| k.partition_error <= 1e-9);
            let status = if !exact || !r.orthogonality_ok {
                Status::Invariant
            } else if !r.hypothesis_ok() {
                Status::Hypothesis
            } else {
                Status::Pass
            };
            Ok((report(&r, format)?, status))
        }
        PipelineKind::Thm5 => {
            let r = thm5_pipeline(&c)?;
            let status = if r.partition_error > 1e-9 || !r.pigeonhole_ok {
                Status::Invariant
            } else if !r.hypothesis_ok() {
                Status::Hypothesis
            } else {
                Status::Pass
            };
            Ok((report(&r, format)?, status))
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<Status> {
    let (bytes, status) = match &cli.verb {
        Verb::Frames => frames(cli)?,
        Verb::Fractal => fractal(cli)?,
        Verb::Net => net(cli)?,
        Verb::Planks => planks(cli)?,
        Verb::Highlow => highlow(cli)?,
        Verb::Decouple => decouple(cli)?,
        Verb::Scan => scan(cli)?,
        Verb::Pipeline { kind } => pipeline(cli, *kind)?,
    };
    match &cli.out {
        Some(path) => std::fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(status) => {
            if status != Status::Pass {
                eprintln!("rproj: {status:?} check failed");
            }
            ExitCode::from(status.code())
        }
        Err(e) => {
            eprintln!("rproj: {e:#}");
            ExitCode::from(1)
        }
    }
}
