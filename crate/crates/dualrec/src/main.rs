//! Thin command-line front end over [`dualrec::harness`]. All logic lives in
//! the library; this binary parses flags, wires paths, and maps errors to
//! exit codes: 0 success, 1 usage, 2 configuration, 3 runtime, 4
//! verification failure. Failures print a machine-readable JSON record to
//! stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dualrec::harness::{
    self, files, generate_data, run_grid, run_theory_suite, write_report, ExperimentConfig,
    ReportFormat, TaskSelection, TheorySuiteConfig,
};
use dualrec::mi_est::{estimate_mi, EstimatorConfig, PerturbationParams};
use dualrec::train::{SampleMode, Strategy};

/// Environment variable naming the default output root (used when `--out`
/// is not given).
const OUT_ROOT_VAR: &str = "DUALREC_OUT";

#[derive(Parser)]
#[command(
    name = "dualrec",
    version,
    about = "Exact-probability laboratory for dual reconstruction training of translation model pairs",
    after_help = "Output roots default to --out, then $DUALREC_OUT/<name>, then ./runs/<name>."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct OutArg {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample corpora for a task preset or a custom task file.
    GenData {
        /// Task preset: low-resource, high-resource, or cross-domain.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// JSON experiment or data config holding "task" (and "sizes").
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run one (strategy, seed) cell of an experiment.
    Train {
        /// JSON experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Strategy name; defaults to the config's first strategy.
        #[arg(long)]
        strategy: Option<String>,
        /// Seed; defaults to the config's first seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run the full strategy × seed grid of an experiment.
    Grid {
        /// JSON experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seeds (comma-separated).
        #[arg(long)]
        seeds: Option<String>,
        /// Restrict the grid to one strategy.
        #[arg(long)]
        strategy: Option<String>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Construct and verify optimality cases; fails (exit 4) on any residual
    /// over tolerance.
    VerifyTheory {
        /// JSON suite config; defaults cover uniform-8 targets, random
        /// priors, and factorization probes.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Monte Carlo mutual-information estimate for a saved checkpoint.
    EstimateMi {
        /// Model checkpoint (theta.json from a run).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Corpus directory: mono_x.txt supplies source samples, mono_y.txt
        /// the target corpus.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Draw targets by renormalized top-k sampling instead of ancestral
        /// sampling.
        #[arg(long)]
        beam: Option<usize>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Aggregate a finished experiment directory into tables and charts.
    Report {
        /// Experiment directory (a grid's --out).
        #[arg(long)]
        dir: PathBuf,
        /// Formats to emit: comma-separated subset of csv,json,svg.
        #[arg(long)]
        format: Option<String>,
    },
}

// ---------------------------------------------------------------------------
// Error-to-exit-code mapping
// ---------------------------------------------------------------------------

struct CliError {
    class: &'static str,
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { class: "usage", code: 1, message: message.into() }
    }
    fn config(message: impl Into<String>) -> Self {
        CliError { class: "config", code: 2, message: message.into() }
    }
    fn runtime(message: impl Into<String>) -> Self {
        CliError { class: "runtime", code: 3, message: message.into() }
    }
    fn verification(message: impl Into<String>) -> Self {
        CliError { class: "verification", code: 4, message: message.into() }
    }
}

/// Errors raised while loading or validating configuration are exit 2;
/// everything else from the library is a runtime failure (exit 3) except
/// explicit verification failures (exit 4).
fn classify(e: dualrec::Error) -> CliError {
    match e {
        dualrec::Error::VerificationFailed(msg) => CliError::verification(msg),
        other => CliError::runtime(other.to_string()),
    }
}

fn as_config(e: dualrec::Error) -> CliError {
    CliError::config(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/usage text; --help and --version are
            // successful exits per convention.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.class, "message": e.message })
            );
            ExitCode::from(e.code)
        }
    }
}

// ---------------------------------------------------------------------------
// Shared flag plumbing
// ---------------------------------------------------------------------------

fn out_dir(arg: OutArg, default_name: &str) -> PathBuf {
    arg.out.unwrap_or_else(|| {
        let root = std::env::var_os(OUT_ROOT_VAR)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"));
        root.join(default_name)
    })
}

fn load_experiment(path: &Path) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = files::read_json(path).map_err(as_config)?;
    cfg.validate().map_err(as_config)?;
    Ok(cfg)
}

fn parse_strategy(name: &str) -> Result<Strategy, CliError> {
    name.parse::<Strategy>().map_err(|e| CliError::usage(e.to_string()))
}

fn parse_seeds(list: &str) -> Result<Vec<u64>, CliError> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| CliError::usage(format!("bad seed '{s}' in --seeds")))
        })
        .collect()
}

fn parse_formats(list: &str) -> Result<Vec<ReportFormat>, CliError> {
    list.split(',')
        .map(|f| match f.trim() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "svg" => Ok(ReportFormat::Svg),
            other => Err(CliError::usage(format!(
                "unknown format '{other}' (expected csv, json, or svg)"
            ))),
        })
        .collect()
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::GenData { preset, config, seed, out } => {
            let (task, sizes) = match (preset, config) {
                (Some(name), None) => (TaskSelection::Preset(name), None),
                (None, Some(path)) => {
                    // Accept either a full experiment config or a bare
                    // {"task": ..., "sizes": ...} document.
                    #[derive(serde::Deserialize)]
                    struct DataDoc {
                        task: TaskSelection,
                        #[serde(default)]
                        sizes: Option<dualrec::synth::CorpusSizes>,
                    }
                    let doc: DataDoc = files::read_json(&path).map_err(as_config)?;
                    (doc.task, doc.sizes)
                }
                _ => return Err(CliError::usage("gen-data needs --preset or --config")),
            };
            let dir = out_dir(out, "data");
            let desc = generate_data(&task, sizes, seed, &dir).map_err(classify)?;
            println!(
                "wrote {} parallel / {}+{} mono / {} validation / {} test sentences to {}",
                desc.sizes.parallel,
                desc.sizes.mono_x,
                desc.sizes.mono_y,
                desc.sizes.validation,
                desc.sizes.test,
                dir.display()
            );
            Ok(())
        }

        Cmd::Train { config, strategy, seed, out } => {
            let cfg = load_experiment(&config)?;
            let strategy = match strategy {
                Some(name) => parse_strategy(&name)?,
                None => cfg.strategies[0].clone(),
            };
            let seed = seed.unwrap_or(cfg.seeds[0]);
            let dir = out_dir(out, "train");
            let manifest =
                harness::run_single(&cfg, &dir, strategy, seed).map_err(classify)?;
            let run = &manifest.runs[0];
            println!(
                "{} seed {} finished in {:.1}s -> {}/{}",
                run.strategy,
                run.seed,
                run.wall_seconds,
                dir.display(),
                run.dir
            );
            Ok(())
        }

        Cmd::Grid { config, seeds, strategy, workers, out } => {
            let mut cfg = load_experiment(&config)?;
            if let Some(list) = seeds {
                cfg.seeds = parse_seeds(&list)?;
            }
            if let Some(name) = strategy {
                cfg.strategies = vec![parse_strategy(&name)?];
            }
            cfg.validate().map_err(as_config)?;
            let dir = out_dir(out, "grid");
            let manifest = run_grid(&cfg, &dir, workers).map_err(classify)?;
            for run in &manifest.runs {
                println!(
                    "{:>14} seed {}  {:>7.1}s  {}",
                    run.strategy, run.seed, run.wall_seconds, run.dir
                );
            }
            println!(
                "{} runs complete; manifest at {}",
                manifest.runs.len(),
                dir.join("manifest.json").display()
            );
            Ok(())
        }

        Cmd::VerifyTheory { config, out } => {
            let cfg: TheorySuiteConfig = match config {
                Some(path) => files::read_json(&path).map_err(as_config)?,
                None => TheorySuiteConfig::default(),
            };
            let report = run_theory_suite(&cfg).map_err(classify)?;
            for case in &report.cases {
                println!(
                    "{} {:<12} i_max {:<8.4} bound gap {:.2e}  max residual {:.2e}",
                    if case.passed { "PASS" } else { "FAIL" },
                    case.label,
                    case.i_max,
                    case.report.bound_gap,
                    case.report
                        .max_consistency_residual
                        .max(case.report.mi_residual_theta)
                        .max(case.report.mi_residual_phi)
                        .max(case.report.marginal_residual_p)
                        .max(case.report.marginal_residual_q),
                );
            }
            println!(
                "factorization probes respected: {}/{}",
                report.factorization_respected, report.factorization_total
            );
            let dir = out_dir(out, "theory");
            std::fs::create_dir_all(&dir)
                .map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
            let path = dir.join("theory.json");
            files::write_json(&path, &report).map_err(classify)?;
            println!("report written to {}", path.display());
            if report.all_passed {
                Ok(())
            } else {
                Err(CliError::verification(format!(
                    "{} of {} cases failed",
                    report.cases.iter().filter(|c| !c.passed).count(),
                    report.cases.len()
                )))
            }
        }

        Cmd::EstimateMi { checkpoint, data, samples, seed, beam, out } => {
            let model = files::load_model(&checkpoint).map_err(classify)?;
            let src_space = model.src_space().clone();
            let dst_space = model.dst_space().clone();
            let read_corpus = |name: &str,
                               space: &dualrec::space::SentenceSpace|
             -> Result<Vec<dualrec::space::Sentence>, CliError> {
                let path = data.join(name);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
                text.lines()
                    .filter(|l| !l.is_empty())
                    .map(|l| space.parse(l).map_err(classify))
                    .collect()
            };
            let sources = read_corpus("mono_x.txt", &src_space)?;
            let targets = read_corpus("mono_y.txt", &dst_space)?;
            let cfg = EstimatorConfig {
                sample_mode: if beam.is_some() { SampleMode::Beam } else { SampleMode::Sampling },
                beam_width: beam.unwrap_or(5),
                perturbation: PerturbationParams { seed, ..PerturbationParams::default() },
                ..EstimatorConfig::default()
            };
            let estimate =
                estimate_mi(&model, &sources, &targets, samples, &cfg, seed).map_err(classify)?;
            println!("{}", serde_json::to_string_pretty(&estimate).map_err(|e| CliError::runtime(e.to_string()))?);
            if let Some(dir) = out.out {
                std::fs::create_dir_all(&dir)
                    .map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
                let path = dir.join("mi_estimate.json");
                files::write_json(&path, &estimate).map_err(classify)?;
                println!("estimate written to {}", path.display());
            }
            Ok(())
        }

        Cmd::Report { dir, format } => {
            let formats = match format {
                Some(list) => parse_formats(&list)?,
                None => vec![ReportFormat::Csv, ReportFormat::Json, ReportFormat::Svg],
            };
            let bundle = write_report(&dir, &formats).map_err(classify)?;
            println!(
                "aggregated {} runs -> {}",
                bundle.curve_files.len(),
                dir.join("report").display()
            );
            if let Some(csv) = &bundle.aggregate_csv {
                println!("table: {}", dir.join(csv).display());
            }
            if let Some(svg) = &bundle.chart_svg {
                println!("chart: {}", dir.join(svg).display());
            }
            Ok(())
        }
    }
}
