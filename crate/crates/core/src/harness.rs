//! Experiment configs, batched multi-seed runs, trace CSV and summary JSON.
//!
//! A config is one flat JSON object:
//!
//! ```json
//! { "M": 32, "N": 2, "K": 8, "d": 2, "snr_db": 10,
//!   "algorithm": ["wmmse", "mmmse", "ammmse"], "n_realizations": 20,
//!   "sweep": [{ "param": "K", "values": [4, 8, 12] }] }
//! ```
//!
//! Omitted fields take the simulation defaults (`p_max = 10`, `eps1 = 0.1`,
//! `eps2 = 1e-3`, bisection width `1e-4` within 100 steps). When `gamma` or
//! `omega` is omitted, it is looked up by SNR in the A-MMMSE parameter table.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{generate_instance, ChannelSet, Stage, SystemConfig, RNG_NAME};
use crate::solvers::{solve, Algorithm, IterationRecord, SolveResult, SolverOptions, StepSize};
use crate::verify::{self, OracleReport};

/// `(snr_db, omega, gamma)` rows of the A-MMMSE parameter table.
pub const AMMMSE_PARAMETER_TABLE: [(f64, f64, f64); 7] = [
    (-10.0, 0.6, 0.4),
    (-5.0, 0.6, 0.4),
    (0.0, 0.6, 0.4),
    (5.0, 0.6, 0.4),
    (10.0, 0.8, 0.05),
    (15.0, 0.8, 0.005),
    (20.0, 0.8, 0.003),
];

/// `(omega, gamma)` of the table row nearest to `snr_db`; ties go to the lower SNR.
pub fn tabulated_ammmse_parameters(snr_db: f64) -> (f64, f64) {
    let mut best = AMMMSE_PARAMETER_TABLE[0];
    for row in AMMMSE_PARAMETER_TABLE {
        if (row.0 - snr_db).abs() < (best.0 - snr_db).abs() {
            best = row;
        }
    }
    (best.1, best.2)
}

pub const DEFAULT_REALIZATIONS: usize = 20;
pub const TRACE_HEADER: [&str; 9] =
    ["iter", "wsr_bpcu", "f_nats", "power", "stage", "f_after_u", "f_after_w", "f_after_v", "rel_change"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    K,
    M,
    #[serde(rename = "snr_db")]
    SnrDb,
}

impl SweepParam {
    fn label(self) -> &'static str {
        match self {
            SweepParam::K => "K",
            SweepParam::M => "M",
            SweepParam::SnrDb => "snr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// A validated experiment with every default filled in.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    pub solver: SolverOptions,
    pub algorithms: Vec<Algorithm>,
    /// `gamma` / `omega` were omitted and follow the SNR table at each sweep point.
    pub gamma_from_table: bool,
    pub omega_from_table: bool,
    pub n_realizations: usize,
    pub sweep: Vec<SweepAxis>,
    /// Worker threads; 0 picks the number of cores.
    pub parallel_workers: usize,
    pub output_dir: PathBuf,
    pub verify: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NumberOrName {
    Number(f64),
    Name(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    #[serde(rename = "M")]
    m: Option<usize>,
    #[serde(rename = "N")]
    n: Option<usize>,
    #[serde(rename = "K")]
    k: Option<usize>,
    d: Option<usize>,
    snr_db: Option<f64>,
    p_max: Option<f64>,
    weights: Option<Vec<f64>>,
    channel_seed: Option<u64>,
    init_seed: Option<u64>,
    algorithm: Option<OneOrMany>,
    gamma: Option<NumberOrName>,
    omega: Option<f64>,
    eps1: Option<NumberOrName>,
    eps2: Option<f64>,
    max_iters: Option<usize>,
    bisect_tol: Option<f64>,
    bisect_max: Option<usize>,
    latch_stage: Option<bool>,
    n_realizations: Option<usize>,
    sweep: Option<Vec<SweepAxis>>,
    parallel_workers: Option<usize>,
    output_dir: Option<PathBuf>,
    verify: Option<bool>,
}

fn required<T>(value: Option<T>, field: &str) -> Result<T> {
    value.ok_or_else(|| Error::Parse(format!("missing required field `{field}`")))
}

fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidConfig { field, reason } => Error::Parse(format!("field `{field}`: {reason}")),
        other => other,
    }
}

/// Parses and validates a JSON experiment config.
pub fn parse_experiment(text: &str) -> Result<ExperimentSpec> {
    let raw: RawExperiment = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let m = required(raw.m, "M")?;
    let n = required(raw.n, "N")?;
    let k = required(raw.k, "K")?;
    let d = required(raw.d, "d")?;
    let snr_db = required(raw.snr_db, "snr_db")?;

    let sweep = raw.sweep.unwrap_or_default();
    for axis in &sweep {
        if axis.values.is_empty() {
            return Err(Error::Parse(format!("field `sweep`: no values for {:?}", axis.param)));
        }
        for &x in &axis.values {
            let ok = match axis.param {
                SweepParam::K | SweepParam::M => x.is_finite() && x >= 1.0 && x.fract() == 0.0,
                SweepParam::SnrDb => x.is_finite(),
            };
            if !ok {
                return Err(Error::Parse(format!("field `sweep`: invalid value {x} for {:?}", axis.param)));
            }
        }
    }
    if raw.weights.is_some() && sweep.iter().any(|a| a.param == SweepParam::K) {
        return Err(Error::Parse("field `weights`: explicit weights cannot be combined with a K sweep".into()));
    }

    let base = SystemConfig {
        m,
        n,
        k,
        d,
        p_max: raw.p_max.unwrap_or(10.0),
        snr_db,
        weights: raw.weights.unwrap_or_else(|| vec![1.0; k]),
        channel_seed: raw.channel_seed.unwrap_or(0),
        init_seed: raw.init_seed.unwrap_or(1),
    };
    base.validate().map_err(config_error)?;

    let algorithms = match raw.algorithm {
        None => vec![Algorithm::Ammmse],
        Some(OneOrMany::One(s)) => vec![s.parse().map_err(config_error)?],
        Some(OneOrMany::Many(list)) => {
            if list.is_empty() {
                return Err(Error::Parse("field `algorithm`: empty list".into()));
            }
            list.iter().map(|s| s.parse().map_err(config_error)).collect::<Result<_>>()?
        }
    };

    let (table_omega, table_gamma) = tabulated_ammmse_parameters(snr_db);
    let gamma_from_table = raw.gamma.is_none();
    let gamma = match raw.gamma {
        None => StepSize::Fixed(table_gamma),
        Some(NumberOrName::Number(g)) => StepSize::Fixed(g),
        Some(NumberOrName::Name(s)) if s.eq_ignore_ascii_case("safe") => StepSize::Safe,
        Some(NumberOrName::Name(s)) => {
            return Err(Error::Parse(format!("field `gamma`: expected a number or \"safe\", got `{s}`")))
        }
    };
    let eps1 = match raw.eps1 {
        None => 0.1,
        Some(NumberOrName::Number(x)) => x,
        Some(NumberOrName::Name(s)) if s.eq_ignore_ascii_case("inf") => f64::INFINITY,
        Some(NumberOrName::Name(s)) => {
            return Err(Error::Parse(format!("field `eps1`: expected a number or \"inf\", got `{s}`")))
        }
    };
    let defaults = SolverOptions::default();
    let solver = SolverOptions {
        algorithm: algorithms[0],
        gamma,
        omega: raw.omega.unwrap_or(table_omega),
        eps1,
        eps2: raw.eps2.unwrap_or(defaults.eps2),
        max_iters: raw.max_iters.unwrap_or(defaults.max_iters),
        bisect_tol: raw.bisect_tol.unwrap_or(defaults.bisect_tol),
        bisect_max: raw.bisect_max.unwrap_or(defaults.bisect_max),
        latch_stage: raw.latch_stage.unwrap_or(true),
        record_iterates: false,
    };
    solver.validate().map_err(config_error)?;

    let n_realizations = raw.n_realizations.unwrap_or(DEFAULT_REALIZATIONS);
    if n_realizations == 0 {
        return Err(Error::Parse("field `n_realizations`: must be at least 1".into()));
    }

    Ok(ExperimentSpec {
        base,
        solver,
        algorithms,
        gamma_from_table,
        omega_from_table: raw.omega.is_none(),
        n_realizations,
        sweep,
        parallel_workers: raw.parallel_workers.unwrap_or(0),
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        verify: raw.verify.unwrap_or(false),
    })
}

pub fn load_experiment(path: &Path) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_experiment(&text)
}

/// One fully resolved grid point of an experiment.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub config: SystemConfig,
    pub solver: SolverOptions,
}

impl ExperimentSpec {
    /// Cartesian product of the sweep axes, first axis slowest.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>> {
        let mut points = vec![(Vec::<String>::new(), self.base.clone())];
        for axis in &self.sweep {
            let mut next = Vec::with_capacity(points.len() * axis.values.len());
            for (labels, cfg) in &points {
                for &x in &axis.values {
                    let mut cfg = cfg.clone();
                    match axis.param {
                        SweepParam::K => {
                            cfg.k = x as usize;
                            cfg.weights = vec![1.0; cfg.k];
                        }
                        SweepParam::M => cfg.m = x as usize,
                        SweepParam::SnrDb => cfg.snr_db = x,
                    }
                    let mut labels = labels.clone();
                    labels.push(format!("{}{}", axis.param.label(), x));
                    next.push((labels, cfg));
                }
            }
            points = next;
        }
        points
            .into_iter()
            .map(|(labels, config)| {
                config.validate().map_err(config_error)?;
                let mut solver = self.solver.clone();
                let (omega, gamma) = tabulated_ammmse_parameters(config.snr_db);
                if self.gamma_from_table {
                    solver.gamma = StepSize::Fixed(gamma);
                }
                if self.omega_from_table {
                    solver.omega = omega;
                }
                let label = if labels.is_empty() { "base".to_string() } else { labels.join("_") };
                Ok(SweepPoint { label, config, solver })
            })
            .collect()
    }
}

/// Writes one CSV row per iteration.
pub fn emit_trace(result: &SolveResult, path: &Path) -> Result<()> {
    write_trace(&result.trace, path)
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trace(trace: &[IterationRecord], path: &Path) -> Result<()> {
    let wrap = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(TRACE_HEADER).map_err(wrap)?;
    for r in trace {
        w.write_record([
            r.t.to_string(),
            fmt_float(r.wsr_bits),
            fmt_float(r.f_value),
            fmt_float(r.total_power),
            r.stage.code().to_string(),
            fmt_float(r.f_after_u),
            fmt_float(r.f_after_w),
            fmt_float(r.f_after_v),
            fmt_float(r.rel_change),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Parses a trace CSV written by [`emit_trace`].
pub fn read_trace(path: &Path) -> Result<Vec<IterationRecord>> {
    let wrap = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut rdr = csv::Reader::from_path(path).map_err(wrap)?;
    let header = rdr.headers().map_err(wrap)?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::TraceFormat { path: path.to_path_buf(), row: 0, reason: "unexpected header".into() });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(wrap)?;
        let bad = |reason: String| Error::TraceFormat { path: path.to_path_buf(), row: i + 1, reason };
        let num = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().map_err(|e| bad(format!("column {}: {e}", TRACE_HEADER[j])))
        };
        let t = rec[0].parse::<usize>().map_err(|e| bad(format!("iter: {e}")))?;
        let code = rec[4].parse::<u8>().map_err(|e| bad(format!("stage: {e}")))?;
        let stage = Stage::from_code(code).ok_or_else(|| bad(format!("stage code {code}")))?;
        out.push(IterationRecord {
            t,
            wsr_bits: num(1)?,
            f_value: num(2)?,
            total_power: num(3)?,
            stage,
            f_after_u: num(5)?,
            f_after_w: num(6)?,
            f_after_v: num(7)?,
            rel_change: num(8)?,
        });
    }
    Ok(out)
}

pub fn trace_file_name(algorithm: Algorithm, label: &str, channel_seed: u64) -> String {
    format!("{algorithm}_{label}_seed{channel_seed}.csv")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    /// Sample statistics; `None` for an empty slice.
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Some(Self {
            mean,
            std: var.sqrt(),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Outcome of one solve inside an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct RealizationRecord {
    pub realization: usize,
    pub channel_seed: u64,
    pub final_wsr_bits: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub switch_iteration: Option<usize>,
    pub stationarity_residual: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_seconds: f64,
}

/// Aggregates for one (sweep point, algorithm) pair.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigSummary {
    pub label: String,
    pub algorithm: Algorithm,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub snr_db: f64,
    pub solver: SolverOptions,
    pub n_realizations: usize,
    pub n_failed: usize,
    pub final_wsr_bits: Option<Stats>,
    pub iterations: Option<Stats>,
    pub mean_switch_iteration: Option<f64>,
    pub convergence_rate: f64,
    pub realizations: Vec<RealizationRecord>,
    pub oracle_reports: Vec<OracleReport>,
    #[serde(skip)]
    pub wall_seconds: Option<Stats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SoftwareStamp {
    pub name: &'static str,
    pub version: &'static str,
    pub rng: &'static str,
}

impl Default for SoftwareStamp {
    fn default() -> Self {
        Self { name: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION"), rng: RNG_NAME }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub software: SoftwareStamp,
    pub spec: ExperimentSpec,
    pub configs: Vec<ConfigSummary>,
}

#[derive(Serialize)]
struct TimingRow<'a> {
    label: &'a str,
    algorithm: Algorithm,
    wall_seconds: Option<Stats>,
}

struct WorkItem<'a> {
    point_index: usize,
    point: &'a SweepPoint,
    realization: usize,
}

struct WorkOutput {
    point_index: usize,
    records: Vec<(Algorithm, RealizationRecord)>,
    oracles: Vec<(Algorithm, OracleReport)>,
    instance_oracles: Vec<OracleReport>,
}

fn realization_config(point: &SweepPoint, r: usize) -> SystemConfig {
    let base = &point.config;
    base.clone().with_seeds(base.channel_seed + r as u64, base.init_seed + r as u64)
}

fn run_item(spec: &ExperimentSpec, item: &WorkItem<'_>) -> Result<WorkOutput> {
    let config = realization_config(item.point, item.realization);
    let mut out = WorkOutput {
        point_index: item.point_index,
        records: Vec::new(),
        oracles: Vec::new(),
        instance_oracles: Vec::new(),
    };
    let channels = match generate_instance(&config) {
        Ok(c) => c,
        Err(e) => {
            for &algorithm in &spec.algorithms {
                out.records.push((algorithm, failed_record(item.realization, config.channel_seed, &e)));
            }
            return Ok(out);
        }
    };
    if spec.verify && item.realization == 0 {
        out.instance_oracles = verify::instance_oracles(&channels, &config, &item.point.solver);
    }
    for &algorithm in &spec.algorithms {
        let options = SolverOptions { algorithm, record_iterates: spec.verify, ..item.point.solver.clone() };
        let start = Instant::now();
        let solved = solve(&channels, &config, &options);
        let wall_seconds = start.elapsed().as_secs_f64();
        let record = match solved {
            Ok(result) => {
                let path = spec.output_dir.join(trace_file_name(algorithm, &item.point.label, config.channel_seed));
                emit_trace(&result, &path)?;
                if spec.verify {
                    out.oracles.push((algorithm, lemma_report(&channels, &config, &result)));
                }
                RealizationRecord {
                    realization: item.realization,
                    channel_seed: config.channel_seed,
                    final_wsr_bits: Some(result.final_wsr_bits()),
                    iterations: Some(result.iterations),
                    converged: result.converged,
                    switch_iteration: result.switch_iteration,
                    stationarity_residual: Some(result.stationarity_residual),
                    error: None,
                    wall_seconds,
                }
            }
            Err(e) => failed_record(item.realization, config.channel_seed, &e),
        };
        out.records.push((algorithm, record));
    }
    Ok(out)
}

fn lemma_report(channels: &ChannelSet, config: &SystemConfig, result: &SolveResult) -> OracleReport {
    verify::check_lemma_bounds(channels, &result.iterates, &config.weights, &result.bounds)
}

fn failed_record(realization: usize, channel_seed: u64, e: &Error) -> RealizationRecord {
    RealizationRecord {
        realization,
        channel_seed,
        final_wsr_bits: None,
        iterations: None,
        converged: false,
        switch_iteration: None,
        stationarity_residual: None,
        error: Some(e.to_string()),
        wall_seconds: 0.0,
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io(std::io::Error::other(e)))?;
    text.push('\n');
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)
}

/// Runs every sweep point x realization x algorithm, writes one trace CSV per
/// solve, `summary.json` and the non-normative `timing.json`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunSummary> {
    let points = spec.sweep_points()?;
    fs::create_dir_all(&spec.output_dir).map_err(|source| Error::Io { path: spec.output_dir.clone(), source })?;

    let items: Vec<WorkItem<'_>> = points
        .iter()
        .enumerate()
        .flat_map(|(point_index, point)| {
            (0..spec.n_realizations).map(move |realization| WorkItem { point_index, point, realization })
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallel_workers)
        .build()
        .map_err(|e| Error::Parse(format!("field `parallel_workers`: {e}")))?;
    let outputs: Vec<Result<WorkOutput>> = pool.install(|| {
        use rayon::prelude::*;
        items.par_iter().map(|item| run_item(spec, item)).collect()
    });

    let mut per_point: Vec<Vec<WorkOutput>> = (0..points.len()).map(|_| Vec::new()).collect();
    for out in outputs {
        let out = out?;
        per_point[out.point_index].push(out);
    }

    let mut configs = Vec::new();
    for (point, outs) in points.iter().zip(&per_point) {
        let instance_oracles: Vec<OracleReport> =
            outs.iter().flat_map(|o| o.instance_oracles.iter().cloned()).collect();
        for &algorithm in &spec.algorithms {
            let realizations: Vec<RealizationRecord> = outs
                .iter()
                .flat_map(|o| o.records.iter().filter(|(a, _)| *a == algorithm).map(|(_, r)| r.clone()))
                .collect();
            let mut oracle_reports: Vec<OracleReport> = Vec::new();
            if spec.verify {
                let lemma = outs
                    .iter()
                    .flat_map(|o| o.oracles.iter().filter(|(a, _)| *a == algorithm).map(|(_, r)| r))
                    .fold(None::<OracleReport>, |acc, r| {
                        Some(match acc {
                            None => r.clone(),
                            Some(a) => a.merge(r),
                        })
                    });
                oracle_reports.extend(lemma);
                oracle_reports.extend(instance_oracles.iter().cloned());
            }
            configs.push(summarize(point, algorithm, realizations, oracle_reports));
        }
    }

    let summary = RunSummary { software: SoftwareStamp::default(), spec: spec.clone(), configs };
    write_json(&spec.output_dir.join("summary.json"), &summary)?;
    let timing: Vec<TimingRow<'_>> = summary
        .configs
        .iter()
        .map(|c| TimingRow { label: &c.label, algorithm: c.algorithm, wall_seconds: c.wall_seconds })
        .collect();
    write_json(&spec.output_dir.join("timing.json"), &timing)?;
    Ok(summary)
}

fn summarize(
    point: &SweepPoint,
    algorithm: Algorithm,
    realizations: Vec<RealizationRecord>,
    oracle_reports: Vec<OracleReport>,
) -> ConfigSummary {
    let ok: Vec<&RealizationRecord> = realizations.iter().filter(|r| r.error.is_none()).collect();
    let wsr: Vec<f64> = ok.iter().filter_map(|r| r.final_wsr_bits).collect();
    let iters: Vec<f64> = ok.iter().filter_map(|r| r.iterations.map(|i| i as f64)).collect();
    let switches: Vec<f64> = ok.iter().filter_map(|r| r.switch_iteration.map(|i| i as f64)).collect();
    let walls: Vec<f64> = ok.iter().map(|r| r.wall_seconds).collect();
    let n = realizations.len();
    ConfigSummary {
        label: point.label.clone(),
        algorithm,
        m: point.config.m,
        k: point.config.k,
        snr_db: point.config.snr_db,
        solver: SolverOptions { algorithm, ..point.solver.clone() },
        n_realizations: n,
        n_failed: n - ok.len(),
        final_wsr_bits: Stats::of(&wsr),
        iterations: Stats::of(&iters),
        mean_switch_iteration: Stats::of(&switches).map(|s| s.mean),
        convergence_rate: realizations.iter().filter(|r| r.converged).count() as f64 / n.max(1) as f64,
        realizations,
        oracle_reports,
        wall_seconds: Stats::of(&walls),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let spec = parse_experiment(r#"{"M": 16, "N": 2, "K": 4, "d": 2, "snr_db": 0}"#).unwrap();
        assert_eq!(spec.base.p_max, 10.0);
        assert_eq!(spec.solver.eps1, 0.1);
        assert_eq!(spec.solver.eps2, 0.001);
        assert_eq!(spec.solver.bisect_tol, 1e-4);
        assert_eq!(spec.solver.bisect_max, 100);
        assert_eq!(spec.base.weights, vec![1.0; 4]);
        assert_eq!(spec.solver.gamma, StepSize::Fixed(0.4));
        assert_eq!(spec.solver.omega, 0.6);
        assert_eq!(spec.n_realizations, DEFAULT_REALIZATIONS);
    }

    #[test]
    fn table_lookup_at_20_db() {
        let spec =
            parse_experiment(r#"{"M": 16, "N": 2, "K": 4, "d": 2, "snr_db": 20, "algorithm": "ammmse"}"#).unwrap();
        assert_eq!(spec.solver.gamma, StepSize::Fixed(0.003));
        assert_eq!(spec.solver.omega, 0.8);
        assert_eq!(tabulated_ammmse_parameters(10.0), (0.8, 0.05));
        assert_eq!(tabulated_ammmse_parameters(-30.0), (0.6, 0.4));
        assert_eq!(tabulated_ammmse_parameters(12.5), (0.8, 0.05));
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            (r#"{"M": 16, "N": 2, "K": 4, "d": 2, "snr_db": 0, "eps1": 0.001, "eps2": 0.01}"#, "eps2"),
            (r#"{"N": 2, "K": 4, "d": 2, "snr_db": 0}"#, "`M`"),
            (r#"{"M": 16, "N": 2, "K": 4, "d": 2, "snr_db": 0, "colour": 1}"#, "colour"),
            (r#"{"M": 16, "N": 2, "K": 4, "d": 3, "snr_db": 0}"#, "`d`"),
            (r#"{"M": 16, "N": 2, "K": 4, "d": 2, "snr_db": 0, "omega": 1.5}"#, "omega"),
            (r#"{"M": 16, "N": 2, "K": 4, "d": 2, "snr_db": 0, "algorithm": "nqt"}"#, "algorithm"),
            (r#"{"M": 16, "N": 2, "K": 4, "d": 2, "snr_db": 0, "sweep": [{"param": "K", "values": [0]}]}"#, "sweep"),
            (r#"{"M": 16, "N": 2, "K": 4, "d": 2, "snr_db": 0, "n_realizations": 0}"#, "n_realizations"),
        ];
        for (text, field) in cases {
            let err = parse_experiment(text).unwrap_err().to_string();
            assert!(err.contains(field), "{err} should name {field}");
        }
    }

    #[test]
    fn gamma_and_eps1_names() {
        let spec = parse_experiment(
            r#"{"M": 8, "N": 2, "K": 2, "d": 1, "snr_db": 5, "gamma": "safe", "eps1": "inf", "omega": 0}"#,
        )
        .unwrap();
        assert_eq!(spec.solver.gamma, StepSize::Safe);
        assert!(spec.solver.eps1.is_infinite());
        assert!(!spec.gamma_from_table && !spec.omega_from_table);
    }

    #[test]
    fn sweep_points_are_a_grid() {
        let spec = parse_experiment(
            r#"{"M": 8, "N": 2, "K": 2, "d": 1, "snr_db": 0,
                "sweep": [{"param": "K", "values": [2, 3]}, {"param": "snr_db", "values": [0, 20]}]}"#,
        )
        .unwrap();
        let pts = spec.sweep_points().unwrap();
        let labels: Vec<&str> = pts.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, ["K2_snr0", "K2_snr20", "K3_snr0", "K3_snr20"]);
        assert_eq!(pts[3].config.weights.len(), 3);
        assert_eq!(pts[1].solver.gamma, StepSize::Fixed(0.003));
        assert_eq!(pts[0].solver.gamma, StepSize::Fixed(0.4));
    }

    #[test]
    fn stats_basic() {
        let s = Stats::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 1.0).abs() < 1e-15);
        assert!(Stats::of(&[]).is_none());
        assert_eq!(Stats::of(&[4.0]).unwrap().std, 0.0);
    }
}
