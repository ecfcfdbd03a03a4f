//! The `ispca` command line: argument parsing, config-file merging, and the
//! five subcommands.
//!
//! Settings resolve in three layers: built-in defaults, then the JSON file
//! given by `--config`, then explicit flags. All results are computed before
//! the first file is written.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::detect::{detect, BlockPartition, DetectorConfig, Strategy};
use crate::error::{Error, ErrorKind, Result};
use crate::io::{self, CsvOptions, HeaderMode, LoadedMatrix, ModelVariance};
use crate::model::{fit, FitOptions, IsPcaModel, KPolicy};
use crate::pla::{
    explained_variance_eigen, explained_variance_trace, select_principal, VarianceMethod,
    VarianceReport,
};
use crate::sim::{run_simulation, Approach, Profile, SimConfig};
use crate::spectra::{exact_svd, SvdMethod};

#[derive(Debug, Parser)]
#[command(
    name = "ispca",
    version,
    about = "Inherently sparse PCA for block-diagonal covariance structure"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the block partition and write partition.json.
    Detect(DetectCmd),
    /// Rank blocks by their share of the total variance.
    Pla(PlaCmd),
    /// Fit sparse loadings block by block and write scores and loadings.
    Ispca(IspcaCmd),
    /// Run the compound-symmetric Monte-Carlo comparison.
    Simulate(SimulateCmd),
    /// Write score pairs for biplots.
    BiplotData(BiplotCmd),
}

#[derive(Debug, Clone, Args, Default)]
pub struct CommonArgs {
    /// JSON file with defaults for any of the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct InputArgs {
    /// Numeric CSV, observations as rows.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Treat the data as already centered.
    #[arg(long)]
    pub no_center: bool,
    /// The file stores variables as rows.
    #[arg(long)]
    pub transpose: bool,
    /// Take base-2 logarithms before centering.
    #[arg(long)]
    pub log2: bool,
    #[arg(long)]
    pub delimiter: Option<char>,
    #[arg(long, value_enum)]
    pub header: Option<HeaderMode>,
    /// The first field of each row is an observation label.
    #[arg(long)]
    pub row_names: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorFlag {
    Oracle,
    Threshold,
    SparseSplit,
}

impl From<DetectorFlag> for Strategy {
    fn from(d: DetectorFlag) -> Self {
        match d {
            DetectorFlag::Oracle => Strategy::Oracle,
            DetectorFlag::Threshold => Strategy::ThresholdGraph,
            DetectorFlag::SparseSplit => Strategy::SparseSplit,
        }
    }
}

#[derive(Debug, Clone, Args, Default)]
pub struct DetectArgs {
    #[arg(long, value_enum)]
    pub detector: Option<DetectorFlag>,
    /// Edge threshold for the correlation-graph detector.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub hbic_scale: Option<f64>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Known partition; skips detection.
    #[arg(long)]
    pub blocks_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyFlag {
    GlobalTop,
    PerBlock,
    FullRank,
}

#[derive(Debug, Clone, Args, Default)]
pub struct FitArgs {
    #[arg(long = "svd", value_enum)]
    pub svd: Option<SvdFlag>,
    /// Number of components (global) or per block, see --k-policy.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub k_policy: Option<PolicyFlag>,
    /// With --svd cdm, blocks with at most ratio·n columns use the exact SVD.
    #[arg(long)]
    pub cdm_threshold_ratio: Option<f64>,
    /// Model from an earlier `ispca` run instead of fitting again.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SvdFlag {
    Exact,
    Cdm,
}

impl From<SvdFlag> for SvdMethod {
    fn from(s: SvdFlag) -> Self {
        match s {
            SvdFlag::Exact => SvdMethod::Exact,
            SvdFlag::Cdm => SvdMethod::Cdm,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DetectCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub detect: DetectArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PlaCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub detect: DetectArgs,
    /// Blocks with at least this share are reported as principal.
    #[arg(long)]
    pub min_share: Option<f64>,
    #[arg(long, value_enum)]
    pub variance_method: Option<VarianceFlag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VarianceFlag {
    Trace,
    Eigen,
}

#[derive(Debug, Clone, Args)]
pub struct IspcaCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub detect: DetectArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Also write correlations between sparse and dense loadings.
    #[arg(long)]
    pub compare_dense: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BiplotCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub detect: DetectArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Group label per observation, one per line in row order.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Component pair `i,j` (from 1); repeat for several files.
    #[arg(long)]
    pub components: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Comma-separated subset of the approaches.
    #[arg(long, value_delimiter = ',')]
    pub approaches: Vec<ApproachFlag>,
    /// Exit nonzero if any replicate failed.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApproachFlag {
    Cdm,
    OracleIsPca,
    FalseNegIsPca,
    PmdIsPca,
    Pmd,
}

impl From<ApproachFlag> for Approach {
    fn from(a: ApproachFlag) -> Self {
        match a {
            ApproachFlag::Cdm => Approach::Cdm,
            ApproachFlag::OracleIsPca => Approach::OracleIsPca,
            ApproachFlag::FalseNegIsPca => Approach::FalseNegIsPca,
            ApproachFlag::PmdIsPca => Approach::PmdIsPca,
            ApproachFlag::Pmd => Approach::Pmd,
        }
    }
}

/// `detector` in a config file: a strategy name or a full detector block.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum DetectorEntry {
    Name(DetectorFlag),
    Full(DetectorConfig),
}

/// Config file layout. Keys mirror the flags (snake case); `sim` holds a
/// full simulation config.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    input: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    no_center: Option<bool>,
    transpose: Option<bool>,
    log2: Option<bool>,
    delimiter: Option<char>,
    header: Option<HeaderMode>,
    row_names: Option<bool>,
    detector: Option<DetectorEntry>,
    threshold: Option<f64>,
    hbic_scale: Option<f64>,
    grid_size: Option<usize>,
    blocks_file: Option<PathBuf>,
    svd: Option<SvdFlag>,
    k: Option<usize>,
    k_policy: Option<PolicyFlag>,
    cdm_threshold_ratio: Option<f64>,
    model: Option<PathBuf>,
    compare_dense: Option<bool>,
    min_share: Option<f64>,
    variance_method: Option<VarianceFlag>,
    labels: Option<PathBuf>,
    components: Option<Vec<(usize, usize)>>,
    profile: Option<Profile>,
    strict: Option<bool>,
    sim: Option<SimConfig>,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub csv: CsvOptions,
    pub detector: DetectorConfig,
    pub blocks_file: Option<PathBuf>,
    pub fit: FitOptions,
    pub model: Option<PathBuf>,
    pub compare_dense: bool,
    pub min_share: f64,
    pub variance_method: VarianceMethod,
    pub labels: Option<PathBuf>,
    pub components: Vec<(usize, usize)>,
    pub sim: SimConfig,
    pub strict: bool,
}

fn read_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        Some(p) => io::read_json(p),
        None => Ok(FileConfig::default()),
    }
}

fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let bad = || {
        Error::InvalidConfig(format!(
            "--components expects `i,j` with i, j >= 1, got {s:?}"
        ))
    };
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let i: usize = a.trim().parse().map_err(|_| bad())?;
    let j: usize = b.trim().parse().map_err(|_| bad())?;
    if i == 0 || j == 0 {
        return Err(bad());
    }
    Ok((i, j))
}

struct Layers<'a> {
    file: FileConfig,
    common: &'a CommonArgs,
    input: Option<&'a InputArgs>,
    detect: Option<&'a DetectArgs>,
    fit: Option<&'a FitArgs>,
}

impl Layers<'_> {
    fn resolve(self) -> Result<RunConfig> {
        let f = self.file;
        let flag = |set: bool, file: Option<bool>| set || file.unwrap_or(false);
        let input = self.input.cloned().unwrap_or_default();
        let csv = CsvOptions {
            header: input.header.or(f.header).unwrap_or_default(),
            delimiter: input.delimiter.or(f.delimiter).unwrap_or(','),
            row_names: flag(input.row_names, f.row_names),
            transpose: flag(input.transpose, f.transpose),
            log2: flag(input.log2, f.log2),
            center: !flag(input.no_center, f.no_center),
        };

        let mut detector = match f.detector {
            Some(DetectorEntry::Full(d)) => d,
            Some(DetectorEntry::Name(n)) => DetectorConfig {
                strategy: n.into(),
                ..Default::default()
            },
            None => DetectorConfig::default(),
        };
        let d = self.detect.cloned().unwrap_or_default();
        if let Some(s) = d.detector {
            detector.strategy = s.into();
        }
        detector.threshold = d.threshold.or(f.threshold).or(detector.threshold);
        if let Some(h) = d.hbic_scale.or(f.hbic_scale) {
            detector.hbic_scale = h;
        }
        if let Some(g) = d.grid_size.or(f.grid_size) {
            detector.grid_size = g;
        }
        detector.validate()?;

        let fa = self.fit.cloned().unwrap_or_default();
        let k = fa.k.or(f.k);
        if k == Some(0) {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        let policy = match (
            fa.k_policy.or(f.k_policy).unwrap_or(PolicyFlag::GlobalTop),
            k,
        ) {
            (PolicyFlag::FullRank, _) => KPolicy::FullRank,
            (PolicyFlag::GlobalTop, k) => KPolicy::GlobalTop(k.unwrap_or(2)),
            (PolicyFlag::PerBlock, k) => KPolicy::PerBlock(k.unwrap_or(1)),
        };
        let fit = FitOptions {
            method: fa.svd.or(f.svd).map_or(SvdMethod::Exact, Into::into),
            policy,
            cdm_threshold_ratio: fa
                .cdm_threshold_ratio
                .or(f.cdm_threshold_ratio)
                .unwrap_or(1.0),
        };

        let mut sim = match (f.sim, f.profile) {
            (Some(s), _) => s,
            (None, Some(p)) => SimConfig::profile(p),
            (None, None) => SimConfig::default(),
        };
        if let Some(seed) = self.common.seed.or(f.seed) {
            sim.seed = seed;
        }

        Ok(RunConfig {
            input: input.input.or(f.input),
            output_dir: self
                .common
                .output_dir
                .clone()
                .or(f.output_dir)
                .unwrap_or_else(|| PathBuf::from(".")),
            csv,
            detector,
            blocks_file: d.blocks_file.or(f.blocks_file),
            fit,
            model: fa.model.or(f.model),
            compare_dense: f.compare_dense.unwrap_or(false),
            min_share: f.min_share.unwrap_or(0.0),
            variance_method: match f.variance_method {
                Some(VarianceFlag::Eigen) => VarianceMethod::Eigen,
                _ => VarianceMethod::Trace,
            },
            labels: f.labels,
            components: f.components.unwrap_or_default(),
            sim,
            strict: f.strict.unwrap_or(false),
        })
    }
}

impl Command {
    /// Merge defaults, the config file and the flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let common = match self {
            Command::Detect(c) => &c.common,
            Command::Pla(c) => &c.common,
            Command::Ispca(c) => &c.common,
            Command::Simulate(c) => &c.common,
            Command::BiplotData(c) => &c.common,
        };
        let file = read_file_config(common.config.as_deref())?;
        let layers = |input, detect, fit| Layers {
            file: file.clone(),
            common,
            input,
            detect,
            fit,
        };
        let mut cfg = match self {
            Command::Detect(c) => layers(Some(&c.input), Some(&c.detect), None).resolve()?,
            Command::Pla(c) => {
                let mut cfg = layers(Some(&c.input), Some(&c.detect), None).resolve()?;
                if let Some(m) = c.min_share {
                    cfg.min_share = m;
                }
                if let Some(v) = c.variance_method {
                    cfg.variance_method = match v {
                        VarianceFlag::Trace => VarianceMethod::Trace,
                        VarianceFlag::Eigen => VarianceMethod::Eigen,
                    };
                }
                cfg
            }
            Command::Ispca(c) => {
                let mut cfg = layers(Some(&c.input), Some(&c.detect), Some(&c.fit)).resolve()?;
                cfg.compare_dense |= c.compare_dense;
                cfg
            }
            Command::BiplotData(c) => {
                let mut cfg = layers(Some(&c.input), Some(&c.detect), Some(&c.fit)).resolve()?;
                if c.labels.is_some() {
                    cfg.labels = c.labels.clone();
                }
                if !c.components.is_empty() {
                    cfg.components = c
                        .components
                        .iter()
                        .map(|s| parse_pair(s))
                        .collect::<Result<_>>()?;
                }
                if cfg.components.is_empty() {
                    cfg.components = vec![(1, 2)];
                }
                cfg
            }
            Command::Simulate(c) => {
                let mut cfg = layers(None, None, None).resolve()?;
                if let Some(p) = c.profile {
                    cfg.sim = SimConfig {
                        seed: cfg.sim.seed,
                        ..SimConfig::profile(p)
                    };
                }
                let s = &mut cfg.sim;
                s.n = c.n.unwrap_or(s.n);
                s.p = c.p.unwrap_or(s.p);
                s.b = c.b.unwrap_or(s.b);
                s.replicates = c.replicates.unwrap_or(s.replicates);
                if !c.approaches.is_empty() {
                    s.approaches = c.approaches.iter().map(|&a| a.into()).collect();
                }
                cfg.strict |= c.strict;
                cfg.sim.validate()?;
                cfg
            }
        };
        cfg.min_share = cfg.min_share.max(0.0);
        Ok(cfg)
    }
}

fn load_input(cfg: &RunConfig) -> Result<LoadedMatrix> {
    let path = cfg
        .input
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("--input is required".into()))?;
    io::read_matrix_csv(path, &cfg.csv)
}

fn partition_for(cfg: &RunConfig, loaded: &LoadedMatrix) -> Result<BlockPartition> {
    match &cfg.blocks_file {
        Some(path) => io::read_partition(path, loaded.data.ncols()),
        None => detect(&loaded.data, &cfg.detector),
    }
}

fn block_report(
    cfg: &RunConfig,
    loaded: &LoadedMatrix,
    part: &BlockPartition,
) -> Result<VarianceReport> {
    match cfg.variance_method {
        VarianceMethod::Trace => explained_variance_trace(&loaded.data, part),
        VarianceMethod::Eigen => explained_variance_eigen(&loaded.data, part),
    }
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|source| Error::Io {
        path: cfg.output_dir.clone(),
        source,
    })?;
    Ok(&cfg.output_dir)
}

#[derive(Serialize)]
struct PlaDoc<'a> {
    #[serde(flatten)]
    report: &'a VarianceReport,
    min_share: f64,
    principal: Vec<usize>,
}

/// Names of the files written, relative to the output directory.
pub type Written = Vec<String>;

pub fn cmd_detect(cfg: &RunConfig) -> Result<Written> {
    let loaded = load_input(cfg)?;
    let part = partition_for(cfg, &loaded)?;
    io::write_partition(&out_dir(cfg)?.join("partition.json"), &part)?;
    Ok(vec!["partition.json".into()])
}

pub fn cmd_pla(cfg: &RunConfig) -> Result<Written> {
    let loaded = load_input(cfg)?;
    let part = partition_for(cfg, &loaded)?;
    let report = block_report(cfg, &loaded, &part)?;
    let principal = select_principal(&report, cfg.min_share);
    let dir = out_dir(cfg)?;
    io::write_partition(&dir.join("partition.json"), &part)?;
    io::write_json(
        &dir.join("variance.json"),
        &PlaDoc {
            report: &report,
            min_share: cfg.min_share,
            principal,
        },
    )?;
    io::write_variance_csv(&dir.join("variance.csv"), &report)?;
    Ok(vec![
        "partition.json".into(),
        "variance.json".into(),
        "variance.csv".into(),
    ])
}

fn fitted(cfg: &RunConfig, loaded: &LoadedMatrix) -> Result<IsPcaModel> {
    match &cfg.model {
        Some(path) => {
            let model = io::read_model(path)?;
            if model.p() != loaded.data.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: format!("{} columns", model.p()),
                    found: loaded.data.ncols().to_string(),
                });
            }
            Ok(model)
        }
        None => fit(&loaded.data, &partition_for(cfg, loaded)?, &cfg.fit),
    }
}

pub fn cmd_ispca(cfg: &RunConfig) -> Result<Written> {
    let loaded = load_input(cfg)?;
    let model = fitted(cfg, &loaded)?;
    let scores = model.scores(&loaded.data)?;
    let variance = ModelVariance::new(&model, block_report(cfg, &loaded, &model.partition)?);
    let correlations = if cfg.compare_dense {
        let (n, p) = (loaded.data.nrows(), loaded.data.ncols());
        let dense = exact_svd(&loaded.data, model.num_components().min(n).min(p))?;
        Some(model.loading_correlations(&dense)?)
    } else {
        None
    };

    let dir = out_dir(cfg)?;
    let labels = loaded.data.col_labels();
    io::write_partition(&dir.join("partition.json"), &model.partition)?;
    io::write_model(&dir.join("model.json"), &model)?;
    io::write_scores(
        &dir.join("scores.csv"),
        &scores,
        loaded.row_labels.as_deref(),
    )?;
    io::write_loadings(&dir.join("loadings.csv"), &model, labels)?;
    io::write_json(&dir.join("variance.json"), &variance)?;
    let mut written: Written = [
        "partition.json",
        "model.json",
        "scores.csv",
        "loadings.csv",
        "variance.json",
    ]
    .map(String::from)
    .to_vec();
    if let Some(c) = correlations {
        io::write_correlations(&dir.join("loading_correlations.csv"), &c)?;
        written.push("loading_correlations.csv".into());
    }
    Ok(written)
}

pub fn cmd_biplot_data(cfg: &RunConfig) -> Result<Written> {
    let loaded = load_input(cfg)?;
    let model = fitted(cfg, &loaded)?;
    let k = model.num_components();
    for &(i, j) in &cfg.components {
        if i > k || j > k {
            return Err(Error::RankOutOfRange {
                k: i.max(j),
                max: k,
            });
        }
    }
    let groups = match &cfg.labels {
        Some(path) => {
            let g = io::read_labels(path)?;
            if g.len() != loaded.data.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: format!("{} labels", loaded.data.nrows()),
                    found: g.len().to_string(),
                });
            }
            Some(g)
        }
        None => None,
    };
    let scores = model.scores(&loaded.data)?;
    let dir = out_dir(cfg)?;
    let mut written = Vec::new();
    for &(i, j) in &cfg.components {
        let name = format!("biplot_{i}_{j}.csv");
        io::write_biplot(
            &dir.join(&name),
            &scores,
            (i, j),
            loaded.row_labels.as_deref(),
            groups.as_deref(),
        )?;
        written.push(name);
    }
    Ok(written)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Written> {
    let result = run_simulation(&cfg.sim)?;
    let dir = out_dir(cfg)?;
    io::write_sim_csv(&dir.join("sim_results.csv"), &result)?;
    io::write_sim_summary(&dir.join("sim_summary.json"), &result)?;
    if cfg.strict && !result.failures.is_empty() {
        let first = &result.failures[0];
        return Err(Error::ReplicateFailures {
            count: result.failures.len(),
            first: format!(
                "replicate {}, {}: {}",
                first.replicate,
                first.approach.name(),
                first.error
            ),
        });
    }
    Ok(vec!["sim_results.csv".into(), "sim_summary.json".into()])
}

/// Exit status for an error class.
pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

/// `{"error": {"code", "kind", "message"}}` on one line.
pub fn error_json(code: &str, kind: ErrorKind, message: &str) -> String {
    let kind = match kind {
        ErrorKind::Usage => "usage",
        ErrorKind::Data => "data",
        ErrorKind::Numerical => "numerical",
    };
    serde_json::json!({ "error": { "code": code, "kind": kind, "message": message } }).to_string()
}

/// Size the global thread pool from `ISPCA_THREADS` (unset or empty: rayon's
/// default).
pub fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("ISPCA_THREADS") else {
        return Ok(());
    };
    if value.trim().is_empty() {
        return Ok(());
    }
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "ISPCA_THREADS must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

pub fn run(cli: &Cli) -> Result<Written> {
    init_threads()?;
    let cfg = cli.command.resolve()?;
    match &cli.command {
        Command::Detect(_) => cmd_detect(&cfg),
        Command::Pla(_) => cmd_pla(&cfg),
        Command::Ispca(_) => cmd_ispca(&cfg),
        Command::Simulate(_) => cmd_simulate(&cfg),
        Command::BiplotData(_) => cmd_biplot_data(&cfg),
    }
}

/// Parse `args`, run, and report. Returns the process exit status; errors
/// go to stderr as one JSON line.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(
                e.kind(),
                K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = e.print();
                return 0;
            }
            let msg = e.render().to_string();
            eprintln!("{}", error_json("usage", ErrorKind::Usage, msg.trim()));
            return 2;
        }
    };
    match run(&cli) {
        Ok(written) => {
            for w in written {
                println!("{w}");
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(e.code(), e.kind(), &e.to_string()));
            exit_code(e.kind())
        }
    }
}
