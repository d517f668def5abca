//! Experiment recipes: configuration, replica orchestration and output files.
//!
//! A recipe is a flat TOML file naming the experiment `kind` plus its
//! parameters. [`run`] validates everything first, then writes one or more
//! CSV files and a `summary.json` into `out`. Every random quantity comes
//! from `replica_seed(seed, tag, index)`, so outputs depend only on the
//! recipe, never on the worker count.
//!
//! ```
//! use slfv::harness::{ExperimentConfig, Kind};
//!
//! let cfg = ExperimentConfig::from_toml("kind = \"twocol-exact\"\nschedule = [8, 16]\n").unwrap();
//! assert_eq!(cfg.kind, Kind::TwocolExact);
//! assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ancestral::{estimate_speed, SimOptions, SpeedEstimate};
use crate::error::{Error, Location, Result};
use crate::events::{Atom, ShapeLaw};
use crate::express;
use crate::forward::{self, DualConvention};
use crate::percolation;
use crate::region::{self, Primitive};
use crate::stats;
use crate::twocolumn;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    SpeedSweep,
    Express,
    FppDomination,
    TwocolExact,
    TwocolMc,
    ForwardFrames,
    Duality,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::SpeedSweep => "speed-sweep",
            Kind::Express => "express",
            Kind::FppDomination => "fpp-domination",
            Kind::TwocolExact => "twocol-exact",
            Kind::TwocolMc => "twocol-mc",
            Kind::ForwardFrames => "forward-frames",
            Kind::Duality => "duality",
        }
    }
}

/// One atom of the shape law. Without `weight` the atom gets unit total
/// rate, `1 / (pi a b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

impl AtomSpec {
    fn atom(&self) -> Result<Atom> {
        match self.weight {
            Some(w) => Atom::new(w, self.a, self.b, self.gamma),
            None => Atom::unit_rate(self.a, self.b, self.gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::reps")]
    pub reps: usize,
    #[serde(default = "defaults::workers")]
    pub workers: usize,
    #[serde(default = "defaults::out")]
    pub out: PathBuf,
    /// Shape law; empty means unit balls at unit rate.
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    /// Speed sweep over unit-rate laws with `b = 1/a`, `gamma = 0`; empty
    /// means the single law given by `atoms`.
    #[serde(default)]
    pub a_values: Vec<f64>,
    #[serde(default = "defaults::xs")]
    pub xs: Vec<f64>,
    #[serde(default = "defaults::n_values")]
    pub n_values: Vec<usize>,
    /// Caps `N` of the two-column schedule, each with `eps = N^-3`.
    #[serde(default = "defaults::schedule")]
    pub schedule: Vec<usize>,
    /// Horizon of express and forward runs, and the duality time.
    #[serde(default = "defaults::t_end")]
    pub t_end: f64,
    /// Forward seed region, also the region `A` of the duality check.
    #[serde(default = "defaults::regions")]
    pub regions: Vec<Primitive>,
    /// Region `B` of the duality check.
    #[serde(default)]
    pub query: Vec<Primitive>,
    #[serde(default)]
    pub convention: DualConvention,
    /// Frame times; empty means four equally spaced times up to `t_end`.
    #[serde(default)]
    pub frames: Vec<f64>,
    /// Pixels per unit length.
    #[serde(default = "defaults::resolution")]
    pub resolution: f64,
    #[serde(default)]
    pub svg: bool,
    #[serde(default = "defaults::budget")]
    pub budget: u64,
}

mod defaults {
    use super::*;

    pub fn seed() -> u64 {
        1
    }
    pub fn reps() -> usize {
        30
    }
    pub fn workers() -> usize {
        1
    }
    pub fn out() -> PathBuf {
        PathBuf::from("out")
    }
    pub fn xs() -> Vec<f64> {
        vec![10.0, 20.0, 30.0, 40.0]
    }
    pub fn n_values() -> Vec<usize> {
        vec![5, 10]
    }
    pub fn schedule() -> Vec<usize> {
        vec![16, 32, 64, 128]
    }
    pub fn t_end() -> f64 {
        10.0
    }
    pub fn regions() -> Vec<Primitive> {
        vec!["rect:-1,-20,0,20".parse().expect("valid default region")]
    }
    pub fn resolution() -> f64 {
        10.0
    }
    pub fn budget() -> u64 {
        SimOptions::default().budget
    }
}

fn field<T>(name: &str, msg: impl Into<String>) -> Result<T> {
    Err(Error::field(name, msg))
}

fn positive(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        Some(x) => field(name, format!("{x} is not a positive number")),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    /// Defaults for `kind`.
    pub fn new(kind: Kind) -> Self {
        ExperimentConfig {
            kind,
            seed: defaults::seed(),
            reps: defaults::reps(),
            workers: defaults::workers(),
            out: defaults::out(),
            atoms: Vec::new(),
            a_values: Vec::new(),
            xs: defaults::xs(),
            n_values: defaults::n_values(),
            schedule: defaults::schedule(),
            t_end: defaults::t_end(),
            regions: defaults::regions(),
            query: Vec::new(),
            convention: DualConvention::default(),
            frames: Vec::new(),
            resolution: defaults::resolution(),
            svg: false,
            budget: defaults::budget(),
        }
    }

    /// Parses and validates a recipe. Syntax errors report a line, value
    /// errors a field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::Config {
                location: Location::Line(line),
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::contract(format!("cannot serialise config: {e}")))
    }

    pub fn law(&self) -> Result<ShapeLaw> {
        if self.atoms.is_empty() {
            return Ok(ShapeLaw::unit_ball());
        }
        let atoms = self
            .atoms
            .iter()
            .map(AtomSpec::atom)
            .collect::<Result<Vec<_>>>()
            .or_else(|e| field("atoms", e.to_string()))?;
        ShapeLaw::new(atoms).or_else(|e| field("atoms", e.to_string()))
    }

    pub fn options(&self) -> SimOptions {
        SimOptions {
            budget: self.budget,
            ..SimOptions::default()
        }
    }

    /// Frame times, defaulting to quarters of `t_end`.
    pub fn frame_times(&self) -> Vec<f64> {
        if self.frames.is_empty() {
            (1..=4).map(|k| self.t_end * k as f64 / 4.0).collect()
        } else {
            self.frames.clone()
        }
    }

    /// Checks every field the chosen kind reads.
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return field("workers", "need at least one worker");
        }
        if self.budget == 0 {
            return field("budget", "must be positive");
        }
        self.law()?;
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return field("t_end", "must be a non-negative number");
        }
        let needs_reps = !matches!(self.kind, Kind::TwocolExact | Kind::ForwardFrames);
        if needs_reps && self.reps < 2 {
            return field("reps", "need at least two replicas");
        }
        match self.kind {
            Kind::SpeedSweep => {
                positive("a_values", &self.a_values)?;
                positive("xs", &self.xs)?;
                if self.xs.len() < 2 {
                    return field("xs", "need at least two abscissae to fit a slope");
                }
            }
            Kind::Express => {
                positive("xs", &self.xs)?;
                if self.t_end <= 0.0 {
                    return field("t_end", "horizon must be positive");
                }
            }
            Kind::FppDomination => {
                if self.n_values.is_empty() || self.n_values.contains(&0) {
                    return field("n_values", "need at least one positive n");
                }
            }
            Kind::TwocolExact => {
                if self.schedule.len() < 2 || self.schedule.iter().any(|&n| n < 2) {
                    return field("schedule", "need at least two caps, each at least 2");
                }
            }
            Kind::TwocolMc => {}
            Kind::ForwardFrames => {
                self.check_region("regions", &self.regions)?;
                positive("resolution", &[self.resolution])?;
                let frames = self.frame_times();
                if frames.iter().any(|t| !(t.is_finite() && *t >= 0.0 && *t <= self.t_end)) {
                    return field("frames", "frame times must lie in [0, t_end]");
                }
            }
            Kind::Duality => {
                self.check_region("regions", &self.regions)?;
                self.check_region("query", &self.query)?;
                if self.t_end > 20.0 {
                    return field("t_end", "duality runs are limited to t_end <= 20");
                }
            }
        }
        Ok(())
    }

    fn check_region(&self, name: &str, r: &[Primitive]) -> Result<()> {
        if r.is_empty() {
            return field(name, "need at least one primitive");
        }
        if r.iter().any(|p| !(p.area() > 0.0)) {
            return field(name, "primitives need positive area");
        }
        Ok(())
    }
}

/// What [`run`] wrote, also saved as `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub files: Vec<String>,
    pub results: serde_json::Value,
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn csv(&mut self, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
        Ok(csv::Writer::from_writer(self.create(name)?))
    }
}

/// Runs a validated recipe and writes its outputs.
pub fn run(cfg: &ExperimentConfig) -> Result<Summary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let mut out = Output {
        dir: cfg.out.clone(),
        files: Vec::new(),
    };
    let results = match cfg.kind {
        Kind::SpeedSweep => run_speed(cfg, &mut out)?,
        Kind::Express => run_express(cfg, &mut out)?,
        Kind::FppDomination => run_fpp(cfg, &mut out)?,
        Kind::TwocolExact => run_twocol_exact(cfg, &mut out)?,
        Kind::TwocolMc => run_twocol_mc(cfg, &mut out)?,
        Kind::ForwardFrames => run_forward(cfg, &mut out)?,
        Kind::Duality => run_duality(cfg, &mut out)?,
    };
    let mut f = out.create("summary.json")?;
    let summary = Summary {
        version: VERSION,
        config: cfg.clone(),
        files: out.files.clone(),
        results,
    };
    serde_json::to_writer_pretty(&mut f, &summary).map_err(|e| Error::Io(e.into()))?;
    writeln!(f)?;
    f.flush()?;
    Ok(summary)
}

fn csv_err(e: csv::Error) -> Error {
    region::csv_error(e)
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("plain data serialises")
}

fn run_speed(cfg: &ExperimentConfig, out: &mut Output) -> Result<serde_json::Value> {
    let laws: Vec<(String, ShapeLaw)> = if cfg.a_values.is_empty() {
        vec![("law".to_string(), cfg.law()?)]
    } else {
        cfg.a_values
            .iter()
            .map(|&a| Ok((format!("a={a}"), ShapeLaw::unit_rate(a, 1.0 / a, 0.0)?)))
            .collect::<Result<_>>()?
    };
    let mut fits: Vec<(String, SpeedEstimate, f64)> = Vec::new();
    for (label, law) in &laws {
        let est = estimate_speed(law, &cfg.xs, cfg.reps, cfg.seed, cfg.workers, &cfg.options())?;
        fits.push((label.clone(), est, express::lower_bound_speed(law)));
    }
    let mut w = out.csv("speed.csv")?;
    w.write_record(["law", "a", "nu", "speed", "speed_over_a", "r2", "express_bound"])
        .map_err(csv_err)?;
    for (k, (label, est, bound)) in fits.iter().enumerate() {
        let a = cfg.a_values.get(k).copied().unwrap_or(f64::NAN);
        w.write_record([
            label.clone(),
            a.to_string(),
            est.nu.to_string(),
            est.speed.to_string(),
            (est.speed / a).to_string(),
            est.r2.to_string(),
            bound.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    let mut w = out.csv("speed_points.csv")?;
    w.write_record(["law", "x", "mean_tau", "ci95", "reps"]).map_err(csv_err)?;
    for (label, est, _) in &fits {
        for p in &est.points {
            w.write_record([label.clone(), p.x.to_string(), p.mean.to_string(), p.ci95.to_string(), cfg.reps.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    if cfg.svg {
        let series: Vec<Series> = fits
            .iter()
            .map(|(label, est, _)| Series {
                label: label.clone(),
                points: est.points.iter().map(|p| (p.x, p.mean)).collect(),
                fit: Some((est.nu, est.intercept)),
            })
            .collect();
        write_scatter_svg(out.create("speed.svg")?, "x", "mean hitting time", &series)?;
    }
    Ok(json(&fits.iter().map(|(l, e, b)| (l, e, b)).collect::<Vec<_>>()))
}

#[derive(Debug, Clone, Copy, Serialize)]
struct CoupledRow {
    x: f64,
    reps: usize,
    express_not_earlier: usize,
    mean_dual_tau: f64,
    mean_express_tau: f64,
}

fn run_express(cfg: &ExperimentConfig, out: &mut Output) -> Result<serde_json::Value> {
    let law = cfg.law()?;
    let bound = express::lower_bound_speed(&law);
    let tag = stats::stream_tag("express-speed");
    let speeds = stats::map_replicas(cfg.reps, cfg.workers, |i| {
        express::long_run_speed(&law, cfg.t_end, stats::replica_seed(cfg.seed, tag, i as u64))
    })?;
    let est = stats::estimate(&speeds)?;
    let mut w = out.csv("express.csv")?;
    w.write_record(["horizon", "reps", "mean_speed", "ci95", "bound", "relative_error"])
        .map_err(csv_err)?;
    w.write_record([
        cfg.t_end.to_string(),
        cfg.reps.to_string(),
        est.mean.to_string(),
        est.ci95.to_string(),
        bound.to_string(),
        ((est.mean - bound) / bound).to_string(),
    ])
    .map_err(csv_err)?;
    w.flush()?;

    let ctag = stats::stream_tag("express-coupled");
    let mut rows = Vec::new();
    for &x in &cfg.xs {
        let hits = stats::map_replicas(cfg.reps, cfg.workers, |i| {
            express::coupled_hit(&law, x, stats::replica_seed(cfg.seed ^ x.to_bits(), ctag, i as u64), &cfg.options())
        })?;
        let n = hits.len() as f64;
        rows.push(CoupledRow {
            x,
            reps: hits.len(),
            express_not_earlier: hits.iter().filter(|h| h.express_tau >= h.dual_tau).count(),
            mean_dual_tau: hits.iter().map(|h| h.dual_tau).sum::<f64>() / n,
            mean_express_tau: hits.iter().map(|h| h.express_tau).sum::<f64>() / n,
        });
    }
    let mut w = out.csv("express_coupled.csv")?;
    for r in &rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(serde_json::json!({ "speed": est, "bound": bound, "coupled": rows }))
}

fn run_fpp(cfg: &ExperimentConfig, out: &mut Output) -> Result<serde_json::Value> {
    let report = percolation::domination_suite(&cfg.n_values, cfg.reps, cfg.seed, cfg.workers, &cfg.options())?;
    report.write_csv(out.create("domination.csv")?)?;
    let ns: Vec<f64> = report.rows.iter().map(|r| r.n as f64).collect();
    let means: Vec<f64> = report.rows.iter().map(|r| r.fpp.mean).collect();
    let fit = if ns.len() >= 2 { stats::ols(&ns, &means).ok() } else { None };
    if cfg.svg {
        let series = [Series {
            label: "lattice".into(),
            points: ns.iter().copied().zip(means.iter().copied()).collect(),
            fit: fit.map(|f| (f.slope, f.intercept)),
        }];
        write_scatter_svg(out.create("fpp.svg")?, "n", "mean passage time", &series)?;
    }
    let checks: Vec<_> = report
        .rows
        .iter()
        .map(|r| serde_json::json!({ "n": r.n, "ordered": r.ordered(), "separated": r.separated(), "pointwise": r.pointwise }))
        .collect();
    Ok(serde_json::json!({ "rows": report.rows, "checks": checks, "fpp_fit": fit }))
}

fn run_twocol_exact(cfg: &ExperimentConfig, out: &mut Output) -> Result<serde_json::Value> {
    let schedule: Vec<(usize, f64)> = cfg.schedule.iter().map(|&n| (n, (n as f64).powi(-3))).collect();
    let ex = twocolumn::extrapolate(&schedule)?;
    ex.write_csv(out.create("twocol.csv")?)?;
    let n_max = *cfg.schedule.iter().max().expect("validated schedule");
    Ok(serde_json::json!({
        "t_square_limit": ex.t_square_limit,
        "speed": ex.speed,
        "warnings": ex.warnings,
        "limit_at_largest_cap": twocolumn::limit_return_time(n_max)?,
    }))
}

fn run_twocol_mc(cfg: &ExperimentConfig, out: &mut Output) -> Result<serde_json::Value> {
    let runs = twocolumn::return_samples(cfg.reps, cfg.seed, cfg.workers)?;
    let t: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let m: Vec<f64> = runs.iter().map(|r| r.1 as f64).collect();
    let gap: Vec<f64> = runs.iter().map(|r| r.1 as f64 - r.0 - 0.5).collect();
    let (t, m, gap) = (stats::estimate(&t)?, stats::estimate(&m)?, stats::estimate(&gap)?);
    let mut w = out.csv("twocol_mc.csv")?;
    w.write_record(["reps", "mean_t", "ci_t", "mean_m", "ci_m", "mean_gap", "ci_gap", "speed"])
        .map_err(csv_err)?;
    w.write_record([
        cfg.reps.to_string(),
        t.mean.to_string(),
        t.ci95.to_string(),
        m.mean.to_string(),
        m.ci95.to_string(),
        gap.mean.to_string(),
        gap.ci95.to_string(),
        (m.mean / t.mean).to_string(),
    ])
    .map_err(csv_err)?;
    w.flush()?;
    Ok(serde_json::json!({ "t": t, "m": m, "m_minus_t_minus_half": gap }))
}

#[derive(Debug, Clone, Copy, Serialize)]
struct FrameRow {
    frame: usize,
    time: f64,
    occupied_pixels: usize,
    occupied_area: f64,
    reach: f64,
}

fn run_forward(cfg: &ExperimentConfig, out: &mut Output) -> Result<serde_json::Value> {
    let law = cfg.law()?;
    let state = forward::forward_run(cfg.regions.clone(), &law, cfg.t_end, cfg.seed, &cfg.options())?;
    let union = state.union();
    region::write_trajectory(out.create("trajectory.csv")?, union.absorbed())?;
    let view = union.bounds().expect("seeded union has bounds").dilate(1.0);
    let times = cfg.frame_times();
    let frames = forward::render_frames(union, &view, cfg.resolution, &times)?;
    let mut rows = Vec::new();
    for (k, (frame, &t)) in frames.iter().zip(&times).enumerate() {
        let mut f = out.create(&format!("frame_{k:03}.pgm"))?;
        frame.write_pgm(&mut f)?;
        f.flush()?;
        rows.push(FrameRow {
            frame: k,
            time: t,
            occupied_pixels: frame.occupied(),
            occupied_area: frame.occupied() as f64 / (cfg.resolution * cfg.resolution),
            reach: forward::reach_at(union, t),
        });
    }
    let mut w = out.csv("frames.csv")?;
    for r in &rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    if cfg.svg {
        write_union_svg(out.create("forward.svg")?, union, &view)?;
    }
    Ok(serde_json::json!({ "absorbed": union.absorbed().len(), "frames": rows }))
}

fn run_duality(cfg: &ExperimentConfig, out: &mut Output) -> Result<serde_json::Value> {
    let law = cfg.law()?;
    let r = forward::duality_check(
        &cfg.regions,
        &cfg.query,
        &law,
        cfg.t_end,
        cfg.reps,
        cfg.seed,
        cfg.convention,
        cfg.workers,
        &cfg.options(),
    )?;
    let mut w = out.csv("duality.csv")?;
    w.write_record(["t", "reps", "convention", "p_forward", "p_dual", "z"]).map_err(csv_err)?;
    let convention = match cfg.convention {
        DualConvention::Same => "same",
        DualConvention::Mirrored => "mirrored",
    };
    w.write_record([
        cfg.t_end.to_string(),
        r.reps.to_string(),
        convention.to_string(),
        r.p_forward.to_string(),
        r.p_dual.to_string(),
        r.z.to_string(),
    ])
    .map_err(csv_err)?;
    w.flush()?;
    Ok(json(&r))
}

/// A scatter series with an optional fitted line `y = slope x + intercept`.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Writes a minimal SVG scatter plot with fitted lines.
pub fn write_scatter_svg<W: Write>(mut w: W, x_label: &str, y_label: &str, series: &[Series]) -> Result<()> {
    let (width, height, pad) = (640.0, 480.0, 60.0);
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    x0 = x0.min(0.0);
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (width - 2.0 * pad);
    let sy = |y: f64| height - pad - (y - y0) / (y1 - y0) * (height - 2.0 * pad);
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#)?;
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(
        w,
        r#"<path d="M{} {} V{} H{}" stroke="black" fill="none"/>"#,
        pad,
        pad,
        height - pad,
        width - pad
    )?;
    writeln!(w, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, width / 2.0, height - 15.0)?;
    writeln!(
        w,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{y_label}</text>"#,
        height / 2.0,
        height / 2.0
    )?;
    writeln!(w, r#"<text x="{}" y="{}" text-anchor="middle">{x0:.3}</text>"#, sx(x0), height - pad + 16.0)?;
    writeln!(w, r#"<text x="{}" y="{}" text-anchor="middle">{x1:.3}</text>"#, sx(x1), height - pad + 16.0)?;
    writeln!(w, r#"<text x="{}" y="{}" text-anchor="end">{y0:.3}</text>"#, pad - 4.0, sy(y0))?;
    writeln!(w, r#"<text x="{}" y="{}" text-anchor="end">{y1:.3}</text>"#, pad - 4.0, sy(y1))?;
    for (k, s) in series.iter().enumerate() {
        let c = PALETTE[k % PALETTE.len()];
        for &(x, y) in &s.points {
            writeln!(w, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, sx(x), sy(y))?;
        }
        if let Some((slope, intercept)) = s.fit {
            let (ya, yb) = (slope * x0 + intercept, slope * x1 + intercept);
            writeln!(
                w,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{c}"/>"#,
                sx(x0),
                sy(ya),
                sx(x1),
                sy(yb)
            )?;
        }
        writeln!(w, r#"<text x="{}" y="{}" fill="{c}">{}</text>"#, pad + 10.0, pad + 14.0 * (k as f64 + 1.0), s.label)?;
    }
    writeln!(w, "</svg>")?;
    w.flush()?;
    Ok(())
}

/// Writes the primitives of a union as black SVG shapes, `y` pointing up.
pub fn write_union_svg<W: Write>(mut w: W, union: &region::Union, view: &crate::geometry::Rect) -> Result<()> {
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}">"#,
        view.min.x,
        -view.max.y,
        view.width(),
        view.height()
    )?;
    writeln!(w, r#"<g transform="scale(1,-1)" fill="black">"#)?;
    for p in union.primitives() {
        match p {
            Primitive::Rect(r) => writeln!(
                w,
                r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#,
                r.min.x,
                r.min.y,
                r.width(),
                r.height()
            )?,
            Primitive::Ellipse(e) => writeln!(
                w,
                r#"<ellipse transform="translate({} {}) rotate({})" rx="{}" ry="{}"/>"#,
                e.center().x,
                e.center().y,
                e.gamma().to_degrees(),
                e.a(),
                e.b()
            )?,
        }
    }
    writeln!(w, "</g>\n</svg>")?;
    w.flush()?;
    Ok(())
}
