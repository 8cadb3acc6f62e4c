//! The `sheafgauge` command line: building sheaves from attributed graphs,
//! four-channel diagnostics, the experiment harnesses, verification
//! certificates and operator dumps.
//!
//! Exit codes: 0 success, 1 input error, 2 validation error, 3 failed
//! verification.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use sheafgauge::diagnostics::{self, separation_check, Heatmap};
use sheafgauge::io::{self, FeaturesSpec, GraphSpec, SheafSpec};
use sheafgauge::linalg::Mat;
use sheafgauge::operators::{
    self, block_decomposition, verify_cone_equivalence, verify_long_exact_sequence, GroundingMode,
};
use sheafgauge::sheaf::{self, build_sheaf_from_features, validate_sheaf, FunctorialityViolation};
use sheafgauge::spectral::{verify_cone_reduction, GroundedOperators, LocalWitnessMap};
use sheafgauge::{
    CellSheaf, CheckStatus, DiagnosticsConfig, Error, ExperimentKind, ExperimentParams, FeaturePipelineConfig,
    GroundingKind, GroundingMorphism, TargetSheaf, Weight,
};

/// Largest two-path composite difference accepted when validating a sheaf.
pub const VALIDATION_TOL: f64 = 1e-8;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SHEAFGAUGE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sheafgauge", version, about = "Spectral diagnostics for cellular sheaves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a sheaf from a graph and per-vertex feature matrices.
    Build(CommonArgs),
    /// Four-channel diagnostics of a sheaf and a grounding.
    Diagnose(CommonArgs),
    /// Run one of the experiments.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentName,
        #[command(flatten)]
        args: CommonArgs,
    },
    /// Verification certificates for the cone constructions.
    Verify(CommonArgs),
    /// Write coboundaries, Laplacians and the grounding as CSV matrices.
    Dump(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    Existence,
    Magnitude,
    Localization,
    Relativity,
}

impl From<ExperimentName> for ExperimentKind {
    fn from(e: ExperimentName) -> Self {
        match e {
            ExperimentName::Existence => ExperimentKind::Existence,
            ExperimentName::Magnitude => ExperimentKind::Magnitude,
            ExperimentName::Localization => ExperimentKind::Localization,
            ExperimentName::Relativity => ExperimentKind::Relativity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    /// Trivial bundle on the n-cycle.
    Trivial,
    /// Bundle on the n-cycle with a single -I twist.
    Mobius,
    /// Rank-2 bundle on the n-prism with one rotated rung.
    HiddenTwist,
    /// Rank-2 bundle on the n-prism with random rotations on every edge.
    NoisyTrivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundingArg {
    Fullrank,
    Deficient,
    Padding,
    Zero,
}

impl From<GroundingArg> for GroundingKind {
    fn from(g: GroundingArg) -> Self {
        match g {
            GroundingArg::Fullrank => GroundingKind::FullRank,
            GroundingArg::Deficient => GroundingKind::Deficient,
            GroundingArg::Padding => GroundingKind::Padding,
            GroundingArg::Zero => GroundingKind::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightArg {
    Unif,
    Inv,
    Heat,
    Gap,
}

impl From<WeightArg> for Weight {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::Unif => Weight::Uniform,
            WeightArg::Inv => Weight::Inverse,
            WeightArg::Heat => Weight::Heat { t: 1.0 },
            WeightArg::Gap => Weight::GapIndicator,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Input document: a graph for `build`, a sheaf otherwise.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Per-vertex feature matrices (for `build`).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Synthetic sheaf used instead of `--input`.
    #[arg(long, value_enum)]
    pub generator: Option<Generator>,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Stalk dimension of the cycle bundles.
    #[arg(long, default_value_t = 1)]
    pub stalk_dim: usize,
    /// Rotation angle of the hidden twist.
    #[arg(long, default_value_t = 0.3)]
    pub tau: f64,
    /// Standard deviation of the restriction noise.
    #[arg(long, default_value_t = 0.25)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = GroundingArg::Fullrank)]
    pub grounding: GroundingArg,
    #[arg(long, default_value_t = 0.0)]
    pub delta0: f64,
    /// Upper witness threshold; defaults to twice each channel's gap.
    #[arg(long)]
    pub delta1: Option<f64>,
    #[arg(long, value_enum, default_value_t = WeightArg::Gap)]
    pub weight: WeightArg,
    /// Scale every operator to trace/rank = 1.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Every setting that determines a run; embedded in each output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub input: Option<String>,
    pub features: Option<String>,
    pub generator: Option<Generator>,
    pub n: usize,
    pub stalk_dim: usize,
    pub tau: f64,
    pub sigma: f64,
    pub seed: u64,
    pub grounding: GroundingArg,
    pub pipeline: FeaturePipelineConfig,
    pub diagnostics: DiagnosticsConfig,
    pub out: String,
}

impl RunConfig {
    pub fn from_args(command: &str, a: &CommonArgs) -> Self {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        RunConfig {
            command: command.to_string(),
            input: path(&a.input),
            features: path(&a.features),
            generator: a.generator,
            n: a.n,
            stalk_dim: a.stalk_dim,
            tau: a.tau,
            sigma: a.sigma,
            seed: a.seed,
            grounding: a.grounding,
            pipeline: FeaturePipelineConfig::default(),
            diagnostics: DiagnosticsConfig {
                normalize: a.normalize,
                delta0: a.delta0,
                delta1: a.delta1,
                weight: a.weight.into(),
            },
            out: a.out.display().to_string(),
        }
    }

    fn experiment_params(&self) -> ExperimentParams {
        ExperimentParams {
            n: self.n,
            stalk_dim: self.stalk_dim,
            tau: self.tau,
            sigma: self.sigma,
            seed: self.seed,
            grounding: self.grounding.into(),
            diagnostics: self.diagnostics,
        }
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    fn validation(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotIncident { .. }
            | Error::Shape(_)
            | Error::DimensionMismatch { .. }
            | Error::NonOrthogonalTwist(..) => 2,
            _ => 1,
        };
        CliError { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Writes `contents` to `dir/name` through a temporary file and a rename.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    let target = dir.join(name);
    let fail = |e: std::io::Error| CliError::input(format!("cannot write {}: {e}", target.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(&target).map_err(|e| fail(e.error))?;
    Ok(target)
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn read_doc<T: serde::de::DeserializeOwned>(kind: &str, path: &Path) -> CliResult<T> {
    io::from_json(kind, &read_text(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn violation_error(violations: &[FunctorialityViolation]) -> CliError {
    let mut ids: Vec<usize> = violations.iter().map(|v| v.triangle).collect();
    ids.dedup();
    let list: Vec<String> = ids.iter().map(usize::to_string).collect();
    CliError::validation(format!("functoriality fails on triangles {}", list.join(", ")))
}

/// Loads `--input` as a sheaf document, or builds `--generator`.
fn load_sheaf(cfg: &RunConfig, a: &CommonArgs) -> CliResult<CellSheaf> {
    let s = match (&a.input, a.generator) {
        (Some(_), Some(_)) => return Err(CliError::input("give either --input or --generator, not both")),
        (None, None) => return Err(CliError::input("a sheaf is required: pass --input or --generator")),
        (Some(path), None) => {
            let spec: SheafSpec = read_doc("sheaf", path)?;
            spec.to_sheaf().map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?
        }
        (None, Some(g)) => match g {
            Generator::Trivial => sheaf::trivial_bundle(cfg.n, cfg.stalk_dim)?,
            Generator::Mobius => sheaf::mobius_bundle(cfg.n, cfg.stalk_dim)?,
            Generator::HiddenTwist => sheaf::hidden_twist_bundle(cfg.n, cfg.tau)?,
            Generator::NoisyTrivial => sheaf::noisy_trivial_bundle(cfg.n, cfg.sigma, cfg.seed)?,
        },
    };
    let violations = validate_sheaf(&s, VALIDATION_TOL);
    if !violations.is_empty() {
        return Err(violation_error(&violations));
    }
    Ok(s)
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))
}

#[derive(Serialize)]
struct Output<'a, T> {
    config: &'a RunConfig,
    result: T,
}

fn write_doc<T: Serialize>(cfg: &RunConfig, dir: &Path, name: &str, kind: &str, result: T) -> CliResult<PathBuf> {
    let text = io::to_json(kind, &Output { config: cfg, result })?;
    write_atomic(dir, name, &text)
}

fn cmd_build(cfg: &RunConfig, a: &CommonArgs) -> CliResult<Vec<PathBuf>> {
    let graph_path = a.input.as_ref().ok_or_else(|| CliError::input("build needs --input GRAPH.json"))?;
    let feat_path = a.features.as_ref().ok_or_else(|| CliError::input("build needs --features FEATURES.json"))?;
    let graph: GraphSpec = read_doc("graph", graph_path)?;
    let features: FeaturesSpec = read_doc("features", feat_path)?;
    let g = graph.to_graph()?;
    let s = build_sheaf_from_features(&g, &features.to_mats()?, &cfg.pipeline)?;
    let violations = validate_sheaf(&s, VALIDATION_TOL);
    if !violations.is_empty() {
        return Err(violation_error(&violations));
    }
    let text = io::to_json("sheaf", &SheafSpec::from(&s))?;
    Ok(vec![write_atomic(&a.out, "sheaf.json", &text)?])
}

fn cmd_diagnose(cfg: &RunConfig, a: &CommonArgs) -> CliResult<Vec<PathBuf>> {
    let s = load_sheaf(cfg, a)?;
    let g = GroundingKind::from(cfg.grounding).build(&s);
    let report = diagnostics::run_diagnostics(&s, &g, &cfg.diagnostics)?;
    let separation = separation_check(&s, &g)?;
    let delta = report.channel(diagnostics::Channel::LocalFeasibility).witness.delta1;
    let localization = LocalWitnessMap { degree: 1, delta, scores: report.localization.clone() };
    let mut written = vec![
        write_atomic(&a.out, "spectra.csv", &io::spectra_csv(&report)?)?,
        write_atomic(&a.out, "localization.csv", &io::witness_csv(&localization)?)?,
    ];
    #[derive(Serialize)]
    struct Body<'a> {
        report: &'a diagnostics::DiagnosticsReport,
        separation: &'a diagnostics::SeparationVerdict,
    }
    written.insert(
        0,
        write_doc(cfg, &a.out, "report.json", "diagnostics", Body { report: &report, separation: &separation })?,
    );
    Ok(written)
}

fn heatmap_name(h: &Heatmap) -> String {
    format!("heatmap_{}_{}.csv", h.fixture, h.channel.to_lowercase())
}

fn cmd_experiment(cfg: &RunConfig, name: ExperimentName, a: &CommonArgs) -> CliResult<Vec<PathBuf>> {
    let result = diagnostics::run_experiment(name.into(), &cfg.experiment_params())?;
    let mut written = vec![write_doc(cfg, &a.out, "experiment.json", "experiment", &result)?];
    for h in &result.heatmaps {
        let map = LocalWitnessMap { degree: h.degree, delta: h.delta, scores: h.scores.clone() };
        written.push(write_atomic(&a.out, &heatmap_name(h), &io::witness_csv(&map)?)?);
    }
    Ok(written)
}

/// Per-check certificates.
#[derive(Debug, Serialize)]
struct Certificates {
    statuses: BTreeMap<String, CheckStatus>,
    cone_equivalence: operators::ConeEquivalenceReport,
    long_exact_sequence: operators::LesReport,
    block_decomposition: operators::BlockDecompositionReport,
    separation: diagnostics::SeparationVerdict,
    cone_reduction: sheafgauge::spectral::ConeReductionReport,
}

fn cmd_verify(cfg: &RunConfig, a: &CommonArgs) -> CliResult<(Vec<PathBuf>, bool)> {
    let s = load_sheaf(cfg, a)?;
    // cell-level checks use the ambient padding unless the zero map is asked for
    let cell_level = match cfg.grounding {
        GroundingArg::Zero => GroundingMorphism::zero(&s, s.max_ambient_dim(), GroundingMode::VertexLevel),
        _ => GroundingMorphism::from_padding(&s, GroundingMode::VertexLevel),
    };
    let c1 = GroundingKind::from(cfg.grounding).build(&s);
    let eps = c1.c1_matrix();
    let cone_equivalence = verify_cone_equivalence(&s, &cell_level)?;
    let long_exact_sequence = verify_long_exact_sequence(&s, &cell_level, TargetSheaf::Constant)?;
    let block = block_decomposition(&s, &c1)?;
    let separation = separation_check(&s, &c1)?;
    let grounded = GroundedOperators::from_sheaf(&s, &eps)?;
    let ungrounded = GroundedOperators::from_sheaf(&s, &(&eps * 0.0))?;
    let cone_reduction = verify_cone_reduction(&grounded, &ungrounded)?;

    let mut statuses = BTreeMap::new();
    statuses.insert("cone_equivalence".to_string(), cone_equivalence.status);
    statuses.insert("long_exact_sequence".to_string(), long_exact_sequence.status);
    statuses.insert(
        "block_decomposition".to_string(),
        match block.holds {
            Some(true) => CheckStatus::Pass,
            Some(false) => CheckStatus::Fail,
            None => CheckStatus::HypothesisNotMet,
        },
    );
    statuses
        .insert("separation".to_string(), if separation.equivalent { CheckStatus::Pass } else { CheckStatus::Fail });
    statuses.insert("cone_reduction".to_string(), cone_reduction.status);
    let ok = statuses.values().all(|&s| s != CheckStatus::Fail);
    let certs = Certificates {
        statuses,
        cone_equivalence,
        long_exact_sequence,
        block_decomposition: block,
        separation,
        cone_reduction,
    };
    Ok((vec![write_doc(cfg, &a.out, "certificates.json", "certificates", &certs)?], ok))
}

fn cmd_dump(cfg: &RunConfig, a: &CommonArgs) -> CliResult<Vec<PathBuf>> {
    let s = load_sheaf(cfg, a)?;
    let g = GroundingKind::from(cfg.grounding).build(&s);
    let ch = operators::channel_set(&s, &g)?;
    let mut mats: Vec<(&str, Mat)> = vec![
        ("d0", operators::coboundary(&s, 0)?.matrix),
        ("d1", operators::coboundary(&s, 1)?.matrix),
        ("L0", ch.l0.matrix.clone()),
        ("L1", ch.l1.matrix.clone()),
        ("L2", operators::laplacian(&s, 2)?.matrix),
        ("relative", ch.relative.matrix.clone()),
        ("utilization", ch.utilization.matrix.clone()),
    ];
    mats.push(("eps", g.c1_matrix()));
    let mut written = Vec::new();
    let mut shapes = BTreeMap::new();
    for (name, m) in &mats {
        let file = format!("{name}.csv");
        written.push(write_atomic(&a.out, &file, &io::matrix_csv(m)?)?);
        shapes.insert(name.to_string(), (file, [m.nrows(), m.ncols()]));
    }
    written.insert(0, write_doc(cfg, &a.out, "dump.json", "operator-dump", &shapes)?);
    Ok(written)
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs a parsed command and returns the files written and the exit code.
pub fn run(cli: Cli) -> CliResult<(Vec<PathBuf>, i32)> {
    configure_threads()?;
    let (name, args) = match &cli.command {
        Command::Build(a) => ("build", a),
        Command::Diagnose(a) => ("diagnose", a),
        Command::Experiment { args, .. } => ("experiment", args),
        Command::Verify(a) => ("verify", a),
        Command::Dump(a) => ("dump", a),
    };
    let cfg = RunConfig::from_args(name, args);
    ensure_dir(&args.out)?;
    match &cli.command {
        Command::Build(a) => Ok((cmd_build(&cfg, a)?, 0)),
        Command::Diagnose(a) => Ok((cmd_diagnose(&cfg, a)?, 0)),
        Command::Experiment { name, args } => Ok((cmd_experiment(&cfg, *name, args)?, 0)),
        Command::Verify(a) => {
            let (files, ok) = cmd_verify(&cfg, a)?;
            Ok((files, if ok { 0 } else { 3 }))
        }
        Command::Dump(a) => Ok((cmd_dump(&cfg, a)?, 0)),
    }
}

/// Parses `args`, runs the command, prints what was written, and returns
/// the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok((files, code)) => {
            for f in files {
                println!("{}", f.display());
            }
            if code == 3 {
                eprintln!("error: verification failed; see certificates.json");
            }
            code
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("sheafgauge").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn run_config_round_trips() {
        let cli =
            parse(&["diagnose", "--generator", "hidden-twist", "--tau", "0.125", "--delta1", "0.5", "--normalize"]);
        let Command::Diagnose(a) = &cli.command else { panic!("wrong subcommand") };
        let cfg = RunConfig::from_args("diagnose", a);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        assert_eq!(cfg.diagnostics.delta1, Some(0.5));
        assert!(cfg.diagnostics.normalize);
    }

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(main_with(["sheafgauge", "experiment", "bogus"]), 1);
        assert_eq!(main_with(["sheafgauge", "diagnose", "--weight", "cubic"]), 1);
    }

    #[test]
    fn core_errors_map_to_exit_codes() {
        assert_eq!(CliError::from(Error::Shape("x".into())).code, 2);
        assert_eq!(CliError::from(Error::Schema("x".into())).code, 1);
    }
}
