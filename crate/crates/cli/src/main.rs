use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use maxlin_core::dag::{ten_node_dag, Dag};
use maxlin_core::error::{Error, Result};
use maxlin_core::io::{self, MatrixJson, Samples};
use maxlin_core::learning::ReorderConfig;
use maxlin_core::nalgebra::DMatrix;
use maxlin_core::pipeline::{
    cmd_extremes, cmd_learn, cmd_learn_exact, cmd_simulate, cmd_study, cmd_transform,
    extremes_to_csv, study_to_csv, LearnOptions, OrderAlgorithm, ScalingMode, StudyConfig,
    Transforms, WeightPolicy, WeightProtocol, DEFAULT_EXTREMES,
};

#[derive(Parser)]
#[command(name = "maxlin", version, about = "Causal order learning for max-linear models")]
struct Cli {
    /// TOML or JSON config file; command line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a model on a DAG and write samples plus the true matrix.
    Simulate(SimulateArgs),
    /// Learn a causal order and estimate the coefficient matrix.
    Learn(LearnArgs),
    /// Repeat threshold learning on simulated data and count valid/correct runs.
    Study(StudyArgs),
    /// Export the observations with the largest pairwise radii.
    Extremes(ExtremesArgs),
    /// Apply the negate / Fréchet rank transforms to a sample CSV.
    Transform(TransformArgs),
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Preset {
    Simulation,
    Data,
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Policy {
    Paper,
    Unit,
}

#[derive(Args, Default)]
struct ReorderArgs {
    /// Tolerance preset (default: simulation).
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long)]
    eps3: Option<f64>,
}

#[derive(Args, Default)]
struct TransformFlags {
    /// Use max(-x, 0), e.g. losses of returns.
    #[arg(long)]
    negate: bool,
    /// Rank transform each column to Fréchet(2) margins.
    #[arg(long)]
    frechet2: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// DAG file (text or .json), or `ten-node` for the built-in graph.
    #[arg(long)]
    dag: Option<String>,
    #[arg(long, value_enum)]
    policy: Option<Policy>,
    /// Explicit edge weight matrix C (headerless CSV); overrides --policy.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    /// Sample CSV with header.
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Use theoretical scalings of this matrix (.json or .csv) instead of data.
    #[arg(long, conflicts_with = "input")]
    exact: Option<PathBuf>,
    #[arg(short, long)]
    k: Option<usize>,
    #[command(flatten)]
    reorder: ReorderArgs,
    #[arg(long, value_enum)]
    algorithm: Option<Algorithm>,
    #[command(flatten)]
    transforms: TransformFlags,
    /// Divide each row of the estimate by its norm.
    #[arg(long)]
    renormalize: bool,
    /// Drop DOT edges with weight below this value.
    #[arg(long)]
    prune: Option<f64>,
    /// Add plug-in asymptotic covariance exports.
    #[arg(long)]
    covariance: bool,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Algorithm {
    Argmax,
    Threshold,
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum StudyMode {
    FrechetMle,
    Spectral,
    Exact,
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Weights {
    Redraw,
    Fixed,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    dag: Option<String>,
    /// Comma separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<StudyMode>,
    #[arg(long, value_enum)]
    weights: Option<Weights>,
    #[arg(short, long)]
    k: Option<usize>,
    #[command(flatten)]
    reorder: ReorderArgs,
    /// Output CSV; stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExtremesArgs {
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Estimated matrix (.json or .csv) for the simulated source.
    #[arg(long)]
    a_hat: Option<PathBuf>,
    /// Pairs like `1-2,3-4`; all pairs when omitted.
    #[arg(long, value_delimiter = ',')]
    pairs: Option<Vec<String>>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    transforms: TransformFlags,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    transforms: TransformFlags,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct FileReorder {
    preset: Option<Preset>,
    a: Option<f64>,
    eps1: Option<f64>,
    eps2: Option<f64>,
    eps3: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct FileStudy {
    sizes: Option<Vec<usize>>,
    runs: Option<usize>,
    mode: Option<StudyMode>,
    weights: Option<Weights>,
}

/// Shared config file; every key is optional.
#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    input: Option<PathBuf>,
    out: Option<PathBuf>,
    dag: Option<String>,
    policy: Option<Policy>,
    n: Option<usize>,
    k: Option<usize>,
    seed: Option<u64>,
    algorithm: Option<Algorithm>,
    renormalize: Option<bool>,
    prune: Option<f64>,
    covariance: Option<bool>,
    count: Option<usize>,
    reorder: FileReorder,
    transforms: Option<Transforms>,
    study: FileStudy,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = io::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(&text)?)
    } else {
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

fn required<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::Validation(format!("missing required option --{name}")))
}

fn reorder_config(args: &ReorderArgs, file: &FileReorder) -> ReorderConfig {
    let base = match args.preset.or(file.preset) {
        Some(Preset::Data) => ReorderConfig::data(),
        _ => ReorderConfig::simulation(),
    };
    ReorderConfig {
        a: args.a.or(file.a).unwrap_or(base.a),
        eps1: args.eps1.or(file.eps1).unwrap_or(base.eps1),
        eps2: args.eps2.or(file.eps2).unwrap_or(base.eps2),
        eps3: args.eps3.or(file.eps3).unwrap_or(base.eps3),
    }
}

fn transforms(flags: &TransformFlags, file: &FileConfig) -> Transforms {
    let base = file.transforms.unwrap_or_default();
    Transforms {
        negate: flags.negate || base.negate,
        frechet2: flags.frechet2 || base.frechet2,
    }
}

fn load_dag(spec: &str) -> Result<Dag> {
    if spec == "ten-node" {
        Ok(ten_node_dag())
    } else {
        io::read_dag(Path::new(spec))
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => io::write_string(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate(args: SimulateArgs, file: FileConfig) -> Result<()> {
    let dag = load_dag(&required(args.dag.or(file.dag), "dag")?)?;
    let policy = match args.weights {
        Some(p) => {
            let rows = io::parse_matrix_csv(std::fs::File::open(p)?)?;
            let d = rows.len();
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            if flat.len() != d * d {
                return Err(Error::Parse("weight matrix must be square".into()));
            }
            WeightPolicy::Explicit(DMatrix::from_row_slice(d, d, &flat))
        }
        None => match args.policy.or(file.policy).unwrap_or(Policy::Paper) {
            Policy::Paper => WeightPolicy::Paper,
            Policy::Unit => WeightPolicy::Unit,
        },
    };
    let n = required(args.n.or(file.n), "n")?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let out = required(args.out.or(file.out), "out")?;
    let sim = cmd_simulate(&dag, &policy, seed, n)?;
    std::fs::create_dir_all(&out)?;
    io::write_samples_file(&out.join("samples.csv"), &sim.samples)?;
    io::write_json(&out.join("a.json"), &MatrixJson::from_matrix(&sim.a))?;
    io::write_string(&out.join("a.csv"), &io::matrix_to_csv(sim.a.matrix()))?;
    io::write_string(&out.join("dag.txt"), &io::dag_to_text(&dag))?;
    Ok(())
}

fn learn(args: LearnArgs, file: FileConfig) -> Result<()> {
    let opts = LearnOptions {
        k: args.k.or(file.k),
        reorder: reorder_config(&args.reorder, &file.reorder),
        algorithm: match args.algorithm.or(file.algorithm).unwrap_or(Algorithm::Argmax) {
            Algorithm::Argmax => OrderAlgorithm::Argmax,
            Algorithm::Threshold => OrderAlgorithm::Threshold,
        },
        transforms: transforms(&args.transforms, &file),
        renormalize: args.renormalize || file.renormalize.unwrap_or(false),
        prune: args.prune.or(file.prune).unwrap_or(0.0),
        covariance: args.covariance || file.covariance.unwrap_or(false),
    };
    let out = required(args.out.or(file.out.clone()), "out")?;
    let report = match args.exact {
        Some(path) => cmd_learn_exact(&io::read_ml_matrix(&path)?, &opts)?,
        None => {
            let input = required(args.input.or(file.input), "input")?;
            cmd_learn(&io::read_samples(&input)?, &opts)?
        }
    };
    report.write_to(&out)?;
    log::info!("learn finished in {:.3}s", report.elapsed.as_secs_f64());
    Ok(())
}

fn study(args: StudyArgs, file: FileConfig) -> Result<()> {
    let dag = load_dag(&args.dag.or(file.dag).unwrap_or_else(|| "ten-node".into()))?;
    let defaults = StudyConfig::default();
    let cfg = StudyConfig {
        sizes: args.sizes.or(file.study.sizes).unwrap_or(defaults.sizes),
        runs: args.runs.or(file.study.runs).unwrap_or(defaults.runs),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        reorder: reorder_config(&args.reorder, &file.reorder),
        mode: match args.mode.or(file.study.mode).unwrap_or(StudyMode::FrechetMle) {
            StudyMode::FrechetMle => ScalingMode::FrechetMle,
            StudyMode::Spectral => ScalingMode::Spectral,
            StudyMode::Exact => ScalingMode::Exact,
        },
        weights: match args.weights.or(file.study.weights).unwrap_or(Weights::Redraw) {
            Weights::Redraw => WeightProtocol::Redraw,
            Weights::Fixed => WeightProtocol::Fixed,
        },
        k: args.k.or(file.k),
    };
    let rows = cmd_study(&dag, &cfg)?;
    write_or_print(args.out.or(file.out).as_deref(), &study_to_csv(&rows)?)
}

fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Parse(format!("bad pair {s:?}, expected `i-j`"));
    let (i, j) = s.trim().split_once('-').ok_or_else(bad)?;
    let i: usize = i.parse().map_err(|_| bad())?;
    let j: usize = j.parse().map_err(|_| bad())?;
    if i == 0 || j == 0 {
        return Err(bad());
    }
    Ok((i - 1, j - 1))
}

fn extremes(args: ExtremesArgs, file: FileConfig) -> Result<()> {
    let input = required(args.input.or(file.input.clone()), "input")?;
    let samples = cmd_transform(&io::read_samples(&input)?, &transforms(&args.transforms, &file))?;
    let pairs = args
        .pairs
        .unwrap_or_default()
        .iter()
        .map(|p| parse_pair(p))
        .collect::<Result<Vec<_>>>()?;
    let a_hat = args.a_hat.as_deref().map(io::read_ml_matrix).transpose()?;
    let rows = cmd_extremes(
        &samples.data,
        &pairs,
        args.count.or(file.count).unwrap_or(DEFAULT_EXTREMES),
        a_hat.as_ref(),
        args.seed.or(file.seed).unwrap_or(0),
    )?;
    write_or_print(args.out.or(file.out).as_deref(), &extremes_to_csv(&rows)?)
}

fn transform(args: TransformArgs, file: FileConfig) -> Result<()> {
    let input = required(args.input.or(file.input.clone()), "input")?;
    let out: Samples = cmd_transform(&io::read_samples(&input)?, &transforms(&args.transforms, &file))?;
    match args.out.or(file.out) {
        Some(p) => io::write_samples_file(&p, &out),
        None => io::write_samples(std::io::stdout().lock(), &out),
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(a) => simulate(a, file),
        Command::Learn(a) => learn(a, file),
        Command::Study(a) => study(a, file),
        Command::Extremes(a) => extremes(a, file),
        Command::Transform(a) => transform(a, file),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
