//! Run configs, seed batches, CSV/JSON outputs and SVG charts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::AdversarySpec;
use crate::approach::DEFAULT_THETA;
use crate::error::{Error, Result};
use crate::geometry::TargetSet;
use crate::learner::LearnerConfig;
use crate::model::{validate_model, GameModel};
use crate::planner::PlannerOptions;
use crate::sim::{
    metrics, run_episode, EpisodeOptions, LeaderKind, RecordStride, TrajectoryRecord,
    TrajectoryRow,
};

/// Lowest distance drawn on log axes.
pub const PLOT_FLOOR: f64 = 1e-6;

/// Quantile levels reported in `aggregate.json`.
pub const QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeaderChoice {
    Exact,
    Learn,
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

/// A batch of seeded episodes. Paths are relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: PathBuf,
    pub target: TargetSet,
    pub leader: LeaderChoice,
    pub adversary: AdversarySpec,
    pub steps: u64,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub learner: LearnerConfig,
    pub output_dir: PathBuf,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Observation noise; falls back to `learner.noise_std` for learner runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    #[serde(default)]
    pub record_stride: RecordStride,
    #[serde(default)]
    pub initial_state: usize,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn model_path(&self) -> PathBuf {
        self.base_dir.join(&self.model)
    }

    pub fn output_path(&self) -> PathBuf {
        self.base_dir.join(&self.output_dir)
    }

    pub fn leader_kind(&self) -> LeaderKind {
        match self.leader {
            LeaderChoice::Exact => LeaderKind::Exact {
                theta: self.theta,
                planner: PlannerOptions::default(),
            },
            LeaderChoice::Learn => LeaderKind::Learn(self.learner.clone()),
        }
    }

    pub fn episode_options(&self) -> EpisodeOptions {
        EpisodeOptions {
            noise_std: self.noise_std,
            record_stride: self.record_stride,
            initial_state: self.initial_state,
        }
    }

    /// Checks everything except the model file.
    pub fn validate_fields(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if !(self.theta >= 0.0) {
            return Err(Error::Config(format!("theta must be >= 0, got {}", self.theta)));
        }
        if let Some(v) = self.noise_std {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("noise_std must be >= 0, got {v}")));
            }
        }
        if let RecordStride::Every { every: 0 } = self.record_stride {
            return Err(Error::Config("record_stride.every must be >= 1".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        self.learner.validate()
    }

    /// Loads the referenced model and checks it against the config.
    pub fn load_model(&self) -> Result<GameModel> {
        let model = GameModel::load(self.model_path())?;
        if self.target.dim() != model.cost_dim() {
            return Err(Error::InvalidTarget(format!(
                "target has dimension {}, model has K = {}",
                self.target.dim(),
                model.cost_dim()
            )));
        }
        if self.initial_state >= model.n_states() {
            return Err(Error::Config(format!(
                "initial_state {} >= |S| = {}",
                self.initial_state,
                model.n_states()
            )));
        }
        Ok(model)
    }
}

/// Reads and fully validates a run config.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.validate_fields()?;
    cfg.load_model()?;
    Ok(cfg)
}

/// CSV header for a `K`-dimensional run.
pub fn csv_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = ["n", "s", "a1", "a2"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=k).map(|i| format!("c_{i}")));
    h.extend((1..=k).map(|i| format!("x_{i}")));
    h.push("dist".into());
    h.push("eps".into());
    h
}

pub fn write_trajectory_csv(path: &Path, rows: &[TrajectoryRow], k: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(csv_header(k))?;
    for r in rows {
        let mut rec = vec![r.n.to_string(), r.s.to_string(), r.a1.to_string(), r.a2.to_string()];
        rec.extend(r.cost.iter().map(f64::to_string));
        rec.extend(r.x.iter().map(f64::to_string));
        rec.push(r.dist.to_string());
        rec.push(r.eps.map(|e| e.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let width = header.len();
    if width < 8 || (width - 6) % 2 != 0 || header.get(0) != Some("n") {
        return Err(Error::InsufficientData(format!(
            "{}: not a trajectory CSV",
            path.display()
        )));
    }
    let k = (width - 6) / 2;
    if header.iter().collect::<Vec<_>>() != csv_header(k) {
        return Err(Error::InsufficientData(format!(
            "{}: unexpected columns",
            path.display()
        )));
    }
    let bad = |what: &str| Error::InsufficientData(format!("{}: bad {what}", path.display()));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let int = |i: usize| rec[i].parse::<u64>().map_err(|_| bad(&header[i]));
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(&header[i]));
        rows.push(TrajectoryRow {
            n: int(0)?,
            s: int(1)? as usize,
            a1: int(2)? as usize,
            a2: int(3)? as usize,
            cost: (4..4 + k).map(num).collect::<Result<_>>()?,
            x: (4 + k..4 + 2 * k).map(num).collect::<Result<_>>()?,
            dist: num(4 + 2 * k)?,
            eps: if rec[5 + 2 * k].is_empty() {
                None
            } else {
                Some(num(5 + 2 * k)?)
            },
        });
    }
    Ok(rows)
}

pub fn csv_name(seed: u64) -> String {
    format!("traj_seed{seed}.csv")
}

pub fn meta_name(seed: u64) -> String {
    format!("traj_seed{seed}.meta.json")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Linear-interpolation quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: u64,
    pub median: f64,
    /// `[level, value]` pairs at [`QUANTILES`].
    pub quantiles: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_dist: f64,
    pub max_dist_tail: Option<f64>,
    pub loglog_slope: Option<f64>,
    pub policy_recompute_count: usize,
    /// Why the tail metrics are missing, if they are.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

/// Contents of `aggregate.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub leader: LeaderChoice,
    pub steps: u64,
    pub seeds: Vec<SeedSummary>,
    pub failures: Vec<SeedFailure>,
    /// Distance quantiles over seeds at every step all runs recorded.
    pub checkpoints: Vec<Checkpoint>,
    pub median_final_dist: Option<f64>,
}

/// Output of [`run_batch`].
#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub records: Vec<TrajectoryRecord>,
    pub aggregate: Aggregate,
    pub output_dir: PathBuf,
}

/// Runs every seed (in parallel), writing `traj_seed{seed}.csv`, a metadata
/// sidecar per seed, and `aggregate.json`. Successful seeds are written even
/// when others fail; the first failure is then returned.
pub fn run_batch(cfg: &RunConfig) -> Result<BatchOutput> {
    cfg.validate_fields()?;
    let model = cfg.load_model()?;
    let report = validate_model(&model);
    if !report.is_ok() {
        return Err(Error::InvalidModel(report.to_string()));
    }
    let out_dir = cfg.output_path();
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let leader = cfg.leader_kind();
    let opts = cfg.episode_options();
    let k = model.cost_dim();

    let results: Vec<(u64, Result<TrajectoryRecord>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let res = run_episode(&model, &leader, &cfg.adversary, &cfg.target, cfg.steps, seed, &opts)
                .and_then(|rec| {
                    write_trajectory_csv(&out_dir.join(csv_name(seed)), &rec.rows, k)?;
                    write_json(&out_dir.join(meta_name(seed)), &rec.meta)?;
                    Ok(rec)
                });
            (seed, res)
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut first_err = None;
    for (seed, res) in results {
        match res {
            Ok(rec) => records.push(rec),
            Err(e) => {
                failures.push(SeedFailure {
                    seed,
                    error: e.to_string(),
                });
                first_err.get_or_insert(e);
            }
        }
    }
    let aggregate = aggregate(cfg, &records, failures);
    write_json(&out_dir.join("aggregate.json"), &aggregate)?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(BatchOutput {
            records,
            aggregate,
            output_dir: out_dir,
        }),
    }
}

fn aggregate(cfg: &RunConfig, records: &[TrajectoryRecord], failures: Vec<SeedFailure>) -> Aggregate {
    let seeds: Vec<SeedSummary> = records
        .iter()
        .map(|rec| {
            let final_dist = rec.rows.last().map(|r| r.dist).unwrap_or(0.0);
            match metrics(rec, &cfg.target) {
                Ok(m) => SeedSummary {
                    seed: rec.meta.seed,
                    final_dist,
                    max_dist_tail: Some(m.max_dist_tail),
                    loglog_slope: m.loglog_slope,
                    policy_recompute_count: m.policy_recompute_count,
                    note: m
                        .loglog_slope
                        .is_none()
                        .then(|| "slope undefined: fewer than two tail rows outside the target".into()),
                },
                Err(e) => SeedSummary {
                    seed: rec.meta.seed,
                    final_dist,
                    max_dist_tail: None,
                    loglog_slope: None,
                    policy_recompute_count: rec.meta.policy_recompute_count,
                    note: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut checkpoints = Vec::new();
    if let Some(first) = records.first() {
        for (i, row) in first.rows.iter().enumerate() {
            let ds: Option<Vec<f64>> = records
                .iter()
                .map(|r| r.rows.get(i).filter(|x| x.n == row.n).map(|x| x.dist))
                .collect();
            if let Some(ds) = ds {
                checkpoints.push(Checkpoint {
                    n: row.n,
                    median: quantile(&ds, 0.5),
                    quantiles: QUANTILES.iter().map(|&q| [q, quantile(&ds, q)]).collect(),
                });
            }
        }
    }
    let finals: Vec<f64> = seeds.iter().map(|s| s.final_dist).collect();
    Aggregate {
        leader: cfg.leader,
        steps: cfg.steps,
        median_final_dist: (!finals.is_empty()).then(|| quantile(&finals, 0.5)),
        seeds,
        failures,
        checkpoints,
    }
}

/// One curve of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// `(n, dist)` pairs.
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn from_rows(label: impl Into<String>, rows: &[TrajectoryRow]) -> Self {
        Self {
            label: label.into(),
            points: rows.iter().map(|r| (r.n as f64, r.dist)).collect(),
        }
    }
}

/// Loads every `traj_seed*.csv` in `dir`, ordered by seed.
pub fn load_series_dir(dir: &Path) -> Result<Vec<Series>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(seed) = name
            .strip_prefix("traj_seed")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<u64>().ok())
        {
            found.push((seed, entry.path()));
        }
    }
    found.sort();
    found
        .into_iter()
        .map(|(seed, path)| Ok(Series::from_rows(format!("seed {seed}"), &read_trajectory_csv(&path)?)))
        .collect()
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Log-log chart of distance against step, one polyline per series.
pub fn render_svg(series: &[Series]) -> Result<String> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(n, _)| *n > 0.0)
        .collect();
    if pts.is_empty() {
        return Err(Error::InsufficientData("nothing to plot".into()));
    }
    let clamped = pts.iter().any(|(_, d)| *d < PLOT_FLOOR);
    let ly = |d: f64| d.max(PLOT_FLOOR).log10();
    let x_lo = pts.iter().map(|p| p.0.log10()).fold(f64::INFINITY, f64::min).floor();
    let mut x_hi = pts.iter().map(|p| p.0.log10()).fold(f64::NEG_INFINITY, f64::max).ceil();
    let y_lo = pts.iter().map(|p| ly(p.1)).fold(f64::INFINITY, f64::min).floor();
    let mut y_hi = pts.iter().map(|p| ly(p.1)).fold(f64::NEG_INFINITY, f64::max).ceil();
    if x_hi <= x_lo {
        x_hi = x_lo + 1.0;
    }
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }

    let (w, h) = (800.0, 500.0);
    let (left, right, top, bottom) = (80.0, 170.0, 30.0, 60.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |lx: f64| left + (lx - x_lo) / (x_hi - x_lo) * pw;
    let sy = |lyv: f64| top + (y_hi - lyv) / (y_hi - y_lo) * ph;

    let mut out = String::new();
    out.push_str(&format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n<g class=\"grid\" stroke=\"#dddddd\" stroke-width=\"1\">\n"
    ));
    let mut labels = String::new();
    for e in (x_lo as i64)..=(x_hi as i64) {
        let x = sx(e as f64);
        out.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{top}\" x2=\"{x:.2}\" y2=\"{:.2}\"/>\n",
            top + ph
        ));
        labels.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">1e{e}</text>\n",
            top + ph + 18.0
        ));
    }
    for e in (y_lo as i64)..=(y_hi as i64) {
        let y = sy(e as f64);
        out.push_str(&format!(
            "<line x1=\"{left}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\"/>\n",
            left + pw
        ));
        labels.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">1e{e}</text>\n",
            left - 8.0,
            y + 4.0
        ));
    }
    out.push_str("</g>\n");
    out.push_str(&format!(
        "<rect x=\"{left}\" y=\"{top}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>\n"
    ));
    out.push_str(&labels);
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">step n</text>\n",
        left + pw / 2.0,
        h - 15.0
    ));
    out.push_str(&format!(
        "<text x=\"20\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {:.2})\">dist(x_n, D)</text>\n",
        top + ph / 2.0,
        top + ph / 2.0
    ));

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|(n, _)| *n > 0.0)
            .map(|&(n, d)| format!("{:.2},{:.2}", sx(n.log10()), sy(ly(d))))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
        let ly_leg = top + 10.0 + 16.0 * i as f64;
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ly_leg:.2}\" x2=\"{:.2}\" y2=\"{ly_leg:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n<text x=\"{:.2}\" y=\"{:.2}\">{}</text>\n",
            left + pw + 10.0,
            left + pw + 30.0,
            left + pw + 36.0,
            ly_leg + 4.0,
            xml_escape(&s.label)
        ));
    }
    if clamped {
        out.push_str(&format!(
            "<text class=\"note\" x=\"{:.2}\" y=\"{:.2}\">dist 0 drawn at 1e-6</text>\n",
            left + pw + 10.0,
            top + 10.0 + 16.0 * series.len() as f64 + 8.0
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_svg(series: &[Series], path: &Path) -> Result<()> {
    let svg = render_svg(series)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(svg.as_bytes()).map_err(|e| Error::io(path, e))
}
