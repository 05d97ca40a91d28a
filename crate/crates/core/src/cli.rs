//! Command-line front end: run configuration, subcommands, artifacts and
//! the manifest written next to them.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{run_figure, run_platoon, scenario_predictor, validate_defaults, ExperimentOptions, Figure, FigureReport, DWELL, STABLE_AFTER};
use crate::hybrid::{ccdf_table, write_ccdf_csv, Channel, ChannelBound, HybridConfig};
use crate::presets::per_slot;
use crate::sim::{compute_metrics, urgent_brake_scenario, write_trace_csv, ScenarioConfig};
use crate::surrogate::{self, generate_dataset, predict_delay, read_dataset_csv, train_mlp, write_dataset_csv, DelayQuery, GridSpec, SurrogateHyper, SurrogateModel};

pub const RUN_SCHEMA: &str = "hybrid-v2v/run/v1";
pub const MANIFEST_SCHEMA: &str = "hybrid-v2v/manifest/v1";
/// Output root used when neither `--out` nor the config names one.
pub const OUT_ENV: &str = "HYBRID_V2V_OUT";

/// Everything a run reads, as one JSON document. Missing sections take
/// their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub verbosity: u8,
    pub channel: HybridConfig,
    pub dataset: GridSpec,
    pub surrogate: SurrogateHyper,
    pub scenario: ScenarioConfig,
    pub experiment: ExperimentOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema: RUN_SCHEMA.into(),
            seed: 1,
            out: None,
            verbosity: 0,
            channel: HybridConfig::default(),
            dataset: GridSpec::default(),
            surrogate: SurrogateHyper::default(),
            scenario: ScenarioConfig::degradation(),
            experiment: ExperimentOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        if cfg.schema != RUN_SCHEMA {
            return Err(Error::Config(format!("config schema `{}` is not `{RUN_SCHEMA}`", cfg.schema)));
        }
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(&serde_json::to_vec(self)?))
    }
}

#[derive(Debug, Parser)]
#[command(name = "v2v", version, about = "Delay bounds, surrogate training and platoon runs for hybrid V2V networks")]
pub struct Cli {
    /// Run configuration (JSON); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output root; defaults to $HYBRID_V2V_OUT, then ./out.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelArg {
    Cellular,
    Mmwave,
    Hybrid,
}

impl From<ChannelArg> for Channel {
    fn from(c: ChannelArg) -> Self {
        match c {
            ChannelArg::Cellular => Channel::Cellular,
            ChannelArg::Mmwave => Channel::Mmwave,
            ChannelArg::Hybrid => Channel::Hybrid,
        }
    }
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "lowercase", tag = "command")]
pub enum Command {
    /// Delay CCDF bounds on the configured grid.
    Bounds {
        /// Only this channel; instability is then an error.
        #[arg(long, value_enum)]
        channel: Option<ChannelArg>,
        /// Packets per 100 slots per vehicle.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        split: Option<f64>,
    },
    /// Labels the surrogate grid with inverted hybrid bounds.
    Dataset,
    /// Fits the delay surrogate.
    Train {
        /// Dataset CSV; generated from the config when absent.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Queries a trained surrogate.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        p: f64,
        /// Packets per 100 slots per vehicle.
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        #[arg(long, default_value_t = 6)]
        n: u32,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0.5)]
        split: f64,
    },
    /// Runs the configured platoon scenario.
    Simulate {
        /// Trained surrogate; one is trained from the config when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Adds a lead brake at this time, seconds.
        #[arg(long)]
        brake_at: Option<f64>,
    },
    /// Monte Carlo dominance checks at the default parameters.
    Validate,
    /// Emits the series behind one figure and checks its claims.
    Reproduce {
        /// fig5 .. fig10
        figure: String,
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Bounds { .. } => "bounds".into(),
            Command::Dataset => "dataset".into(),
            Command::Train { .. } => "train".into(),
            Command::Predict { .. } => "predict".into(),
            Command::Simulate { .. } => "simulate".into(),
            Command::Validate => "validate".into(),
            Command::Reproduce { figure, .. } => figure.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    /// Hash of the resolved configuration and the subcommand arguments.
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub artifacts: Vec<Artifact>,
    pub passed: Option<bool>,
}

/// Error report printed as one JSON line on stderr.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub error: String,
    pub message: String,
    pub exit_code: i32,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        Self { error: e.kind().into(), message: e.to_string(), exit_code: e.exit_code() }
    }
}

/// Hash of the resolved configuration and the command. The output root is
/// left out and input files enter by content, so the hash names what was
/// computed rather than where.
pub fn config_hash(cfg: &RunConfig, cmd: &Command) -> Result<String> {
    let cfg = RunConfig { out: None, ..cfg.clone() };
    let mut cmd = serde_json::to_value(cmd)?;
    if let Some(obj) = cmd.as_object_mut() {
        for key in ["model", "dataset"] {
            if let Some(path) = obj.get(key).and_then(|v| v.as_str()).map(PathBuf::from) {
                let bytes = fs::read(&path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                obj.insert(key.into(), format!("sha256:{}", sha256_hex(&bytes)).into());
            }
        }
    }
    Ok(sha256_hex(&serde_json::to_vec(&(&cfg, &cmd))?))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects the files one subcommand writes.
struct Outputs {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
    verbose: bool,
}

impl Outputs {
    fn new(dir: PathBuf, verbose: bool) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, artifacts: Vec::new(), verbose })
    }

    fn write(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        let path = self.dir.join(name);
        fs::write(&path, &buf)?;
        if self.verbose {
            eprintln!("wrote {}", path.display());
        }
        self.artifacts.push(Artifact { path: name.into(), sha256: sha256_hex(&buf), bytes: buf.len() as u64 });
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        self.write(name, |b| {
            serde_json::to_writer_pretty(&mut *b, value)?;
            b.push(b'\n');
            Ok(())
        })
    }

    fn report(&mut self, r: &FigureReport) -> Result<()> {
        for s in &r.series {
            self.write(&format!("{}.csv", s.name), |b| s.write_csv(b))?;
        }
        self.json("report.json", &r.checks)
    }
}

/// Output root: flag, then config, then the environment, then `./out`.
pub fn output_root(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load_surrogate(path: &Path) -> Result<SurrogateModel> {
    let f = fs::File::open(path).map_err(|e| Error::Config(format!("cannot open model {}: {e}", path.display())))?;
    surrogate::load_model(BufReader::new(f))
}

fn surrogate_for(model: Option<&Path>, cfg: &RunConfig, verbose: bool) -> Result<SurrogateModel> {
    match model {
        Some(p) => load_surrogate(p),
        None => {
            if verbose {
                eprintln!("no model given; generating the dataset and training one");
            }
            let ds = generate_dataset(&cfg.dataset);
            let mut hyper = cfg.surrogate.clone();
            hyper.train.seed = cfg.seed;
            Ok(train_mlp(&ds.rows, &hyper)?.0)
        }
    }
}

/// Parses arguments, runs, prints any error report and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            let report = ErrorReport::from(&e);
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
            report.exit_code
        }
    }
}

/// Executes one parsed command. Returns 0, or 4 when checks fail.
pub fn run(cli: &Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.verbosity = cfg.verbosity.max(cli.verbose);
    cfg.experiment.seed = cfg.seed;
    cfg.scenario.seed = cfg.seed;
    let verbose = cfg.verbosity > 0;
    if let Command::Bounds { lambda, n, split, .. } = &cli.command {
        if let Some(l) = lambda {
            cfg.channel = cfg.channel.clone().with_lambda(per_slot(*l));
        }
        if let Some(n) = n {
            cfg.channel = cfg.channel.clone().with_n(*n);
        }
        if let Some(s) = split {
            cfg.channel = cfg.channel.clone().with_split(*s);
        }
    }
    cfg.channel.validate()?;
    cfg.scenario.validate()?;

    let root = output_root(cli.out.as_deref(), &cfg);
    let name = cli.command.name();
    let mut out = Outputs::new(root.join(&name), verbose)?;
    let config_hash = config_hash(&cfg, &cli.command)?;
    let mut passed = None;

    match &cli.command {
        Command::Bounds { channel, .. } => match channel {
            None => {
                let rows = ccdf_table(&cfg.channel)?;
                out.write("ccdf.csv", |b| write_ccdf_csv(&rows, b))?;
            }
            Some(c) => {
                let bound = ChannelBound::new(&cfg.channel, (*c).into())?;
                let xs = cfg.channel.grid.xs();
                let est = bound.ccdf_grid(&xs)?;
                out.write("ccdf.csv", |b| {
                    writeln!(b, "x,ccdf,theta")?;
                    for d in &est {
                        let theta = if d.theta.is_finite() { d.theta.to_string() } else { String::new() };
                        writeln!(b, "{},{:e},{theta}", d.x, d.probability)?;
                    }
                    Ok(())
                })?;
            }
        },
        Command::Dataset => {
            let ds = generate_dataset(&cfg.dataset);
            out.write("dataset.csv", |b| write_dataset_csv(&ds.rows, b))?;
            out.json("skipped.json", &ds.skipped)?;
        }
        Command::Train { dataset } => {
            let rows = match dataset {
                Some(p) => {
                    let f = fs::File::open(p).map_err(|e| Error::Config(format!("cannot open dataset {}: {e}", p.display())))?;
                    read_dataset_csv(BufReader::new(f))?
                }
                None => generate_dataset(&cfg.dataset).rows,
            };
            let mut hyper = cfg.surrogate.clone();
            hyper.train.seed = cfg.seed;
            let (model, report) = train_mlp(&rows, &hyper)?;
            out.write("model.json", |b| surrogate::save_model(&model, b))?;
            out.json("fit_report.json", &model.report)?;
            out.json("train_report.json", &report)?;
        }
        Command::Predict { model, p, lambda, n, noise, split } => {
            let m = load_surrogate(model)?;
            let q = DelayQuery { p: *p, lambda: per_slot(*lambda), n: *n, noise_level: *noise, split: *split };
            q.validate()?;
            let pr = predict_delay(&m, &q);
            #[derive(Serialize)]
            struct Answer {
                query: DelayQuery,
                delay_slots: f64,
                delay_seconds: f64,
                extrapolated: bool,
            }
            let a = Answer { query: q, delay_slots: pr.delay_slots, delay_seconds: pr.delay_slots * cfg.channel.cellular.slot_duration, extrapolated: pr.extrapolated };
            if pr.extrapolated && verbose {
                eprintln!("warning: query lies outside the training box");
            }
            out.json("prediction.json", &a)?;
        }
        Command::Simulate { model, brake_at } => {
            let m = surrogate_for(model.as_deref(), &cfg, verbose)?;
            let opts = ExperimentOptions { seed: cfg.seed, ..cfg.experiment.clone() };
            let (trace, metrics) = match brake_at {
                None => {
                    let r = run_platoon(&cfg.scenario, &m, &opts)?;
                    (r.trace, r.metrics)
                }
                Some(at) => {
                    let pred = scenario_predictor(&cfg.scenario, &opts)?;
                    let t = urgent_brake_scenario(&cfg.scenario, *at, &m, pred.as_ref())?;
                    let mt = compute_metrics(&t, cfg.scenario.command_tolerance, DWELL, STABLE_AFTER);
                    (t, mt)
                }
            };
            out.write("trace.csv", |b| write_trace_csv(&trace, b))?;
            #[derive(Serialize)]
            struct Summary {
                collision: bool,
                min_gap: f64,
                convergence_time: Option<f64>,
                stable_changes: usize,
                stable_mean_gap: f64,
                stable_mean_safe_distance: f64,
                brake_onset: Vec<Option<f64>>,
                extrapolations: usize,
            }
            out.json(
                "metrics.json",
                &Summary {
                    collision: metrics.collision,
                    min_gap: metrics.min_gap,
                    convergence_time: metrics.convergence_time,
                    stable_changes: metrics.stable_changes,
                    stable_mean_gap: metrics.stable_mean_gap,
                    stable_mean_safe_distance: metrics.stable_mean_safe_distance,
                    brake_onset: metrics.brake_onset,
                    extrapolations: trace.extrapolations,
                },
            )?;
        }
        Command::Validate => {
            let r = validate_defaults(&cfg.experiment)?;
            out.report(&r)?;
            passed = Some(r.passed());
        }
        Command::Reproduce { figure, model } => {
            let fig: Figure = figure.parse()?;
            let m = if fig.needs_surrogate() { Some(surrogate_for(model.as_deref(), &cfg, verbose)?) } else { None };
            let r = run_figure(fig, &cfg.experiment, m.as_ref())?;
            out.report(&r)?;
            passed = Some(r.passed());
        }
    }

    if let Some(ok) = passed {
        if verbose || !ok {
            eprintln!("{name}: {}", if ok { "all checks passed" } else { "some checks failed, see report.json" });
        }
    }
    let mut versions = BTreeMap::new();
    versions.insert("hybrid-v2v".to_string(), env!("CARGO_PKG_VERSION").to_string());
    versions.insert("run_schema".to_string(), RUN_SCHEMA.to_string());
    versions.insert("surrogate_schema".to_string(), surrogate::MODEL_SCHEMA.to_string());
    versions.insert("predictor_schema".to_string(), crate::predictor::MODEL_SCHEMA.to_string());
    let manifest = Manifest { schema: MANIFEST_SCHEMA.into(), command: name, config_hash, seed: cfg.seed, versions, artifacts: out.artifacts.clone(), passed };
    let path = out.dir.join("manifest.json");
    let mut w = BufWriter::new(fs::File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    w.flush()?;
    Ok(if passed == Some(false) { 4 } else { 0 })
}
