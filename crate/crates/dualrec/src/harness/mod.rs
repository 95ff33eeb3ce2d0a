//! Configuration-driven experiment runner: data generation, strategy × seed
//! grids with a worker pool, theory verification suites, and the persisted
//! file layout that [`report`] aggregates.
//!
//! An experiment directory looks like
//!
//! ```text
//! out/
//!   config.json            the experiment configuration as run
//!   manifest.json          seeds, fingerprints, wall times (the only timestamps)
//!   data/seed{N}/          corpus text files per seed
//!   runs/{strategy}-seed{N}/
//!     curves.csv           long-format learning curves
//!     run.json             final metrics and the exact training config
//!     theta.json phi.json  model checkpoints
//!     mi.json              Monte Carlo MI estimate for the forward model
//!   report/                aggregate table, charts, bundle index
//! ```
//!
//! Grid execution is deterministic: runs are seeded, workers share nothing,
//! and every artifact except the manifest is byte-identical across re-runs
//! of the same configuration.

pub mod files;
pub mod report;

use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::Categorical;
use crate::error::{Error, Result};
use crate::mi_est::{estimate_mi, EstimatorConfig, MIEstimate, PerturbationParams};
use crate::model::Model;
use crate::space::{letters, SentenceSpace};
use crate::synth::{
    build_ground_truth, cross_domain_preset, high_resource_preset, low_resource_preset,
    oracle_eval, sample_corpora, Corpora, CorpusSizes, GroundTruth, TaskSpec,
};
use crate::theory::{
    check_factorization_uniqueness, construct_optimum, max_mi_coupling_search, verify_optimum,
    VerificationReport,
};
use crate::train::{pretrain_supervised, run_strategy, Strategy, TrainConfig};

pub use files::{
    config_hash, load_corpora, load_model, read_json, save_corpora, save_model, write_json,
    CurveRow, ModelCheckpoint, RunRecord,
};
pub use report::{
    aggregate, load_runs, render_chart, write_report, AggregateTable, ReportBundle,
};

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

/// Which translation task to run on: a named preset or an inline definition.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TaskSelection {
    Preset(String),
    Custom(TaskSpec),
}

pub const PRESET_NAMES: [&str; 3] = ["low-resource", "high-resource", "cross-domain"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

fn default_formats() -> Vec<ReportFormat> {
    vec![ReportFormat::Csv, ReportFormat::Json, ReportFormat::Svg]
}

fn default_mi_samples() -> usize {
    10_000
}

/// One experiment: a task, a strategy grid, seeds, and the shared training
/// configuration (`strategy` and `seed` are overridden per run).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskSelection,
    /// Overrides the preset's corpus sizes; required for a custom task.
    #[serde(default)]
    pub sizes: Option<CorpusSizes>,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub train: TrainConfig,
    /// Monte Carlo samples for each run's MI estimate; 0 disables it.
    #[serde(default = "default_mi_samples")]
    pub mi_samples: usize,
    #[serde(default = "default_formats")]
    pub formats: Vec<ReportFormat>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::InvalidConfig("experiment lists no strategies".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("experiment lists no seeds".into()));
        }
        let mut names: Vec<String> = self.strategies.iter().map(|s| s.to_string()).collect();
        names.sort();
        names.dedup();
        if names.len() != self.strategies.len() {
            return Err(Error::InvalidConfig("duplicate strategies in the grid".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::InvalidConfig("duplicate seeds in the grid".into()));
        }
        for strategy in &self.strategies {
            let mut cfg = self.train.clone();
            cfg.strategy = strategy.clone();
            cfg.validate()?;
        }
        resolve_task(&self.task, self.sizes)?;
        Ok(())
    }
}

/// A task selection reduced to concrete specs: the training channel, an
/// optional shifted evaluation channel (cross-domain preset), sizes, and a
/// fingerprint that ties runs to this exact task.
#[derive(Clone, Debug)]
pub struct ResolvedTask {
    pub spec: TaskSpec,
    pub eval_spec: Option<TaskSpec>,
    pub sizes: CorpusSizes,
    pub hash: u64,
}

pub fn resolve_task(task: &TaskSelection, sizes: Option<CorpusSizes>) -> Result<ResolvedTask> {
    let (spec, eval_spec, preset_sizes) = match task {
        TaskSelection::Preset(name) => match name.as_str() {
            "low-resource" => {
                let (spec, sizes) = low_resource_preset();
                (spec, None, Some(sizes))
            }
            "high-resource" => {
                let (spec, sizes) = high_resource_preset();
                (spec, None, Some(sizes))
            }
            "cross-domain" => {
                let (train, eval, sizes) = cross_domain_preset();
                (train, Some(eval), Some(sizes))
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown task preset '{other}' (expected one of {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        },
        TaskSelection::Custom(spec) => (spec.clone(), None, None),
    };
    let sizes = sizes.or(preset_sizes).ok_or_else(|| {
        Error::InvalidConfig("a custom task needs explicit corpus sizes".into())
    })?;
    let hash = files::config_hash(&(&spec, &eval_spec, &sizes))?;
    Ok(ResolvedTask { spec, eval_spec, sizes, hash })
}

// ---------------------------------------------------------------------------
// Data generation
// ---------------------------------------------------------------------------

/// Seed offset separating the shifted-domain test draw from the training
/// draw, so the two are independent streams.
const EVAL_SEED_OFFSET: u64 = 0x5eed_0000_0000_0001;

fn sample_task_corpora(resolved: &ResolvedTask, gt: &GroundTruth, eval_gt: Option<&GroundTruth>, seed: u64) -> Result<Corpora> {
    let mut sizes = resolved.sizes;
    if eval_gt.is_some() {
        sizes.test = 0;
    }
    let mut corpora = sample_corpora(gt, &sizes, seed)?;
    if let Some(egt) = eval_gt {
        let test_only = CorpusSizes {
            parallel: 0,
            mono_x: 0,
            mono_y: 0,
            validation: 0,
            test: resolved.sizes.test,
        };
        corpora.test = sample_corpora(egt, &test_only, seed.wrapping_add(EVAL_SEED_OFFSET))?.test;
    }
    Ok(corpora)
}

/// What `generate_data` records next to the corpus files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DataDescriptor {
    pub spec: TaskSpec,
    pub eval_spec: Option<TaskSpec>,
    pub sizes: CorpusSizes,
    pub seed: u64,
    pub task_hash: u64,
}

/// Builds the task, samples one set of corpora, and writes the corpus text
/// files plus a `task.json` descriptor into `out_dir`.
pub fn generate_data(
    task: &TaskSelection,
    sizes: Option<CorpusSizes>,
    seed: u64,
    out_dir: &Path,
) -> Result<DataDescriptor> {
    let resolved = resolve_task(task, sizes)?;
    let gt = build_ground_truth(&resolved.spec)?;
    let eval_gt = resolved.eval_spec.as_ref().map(build_ground_truth).transpose()?;
    let corpora = sample_task_corpora(&resolved, &gt, eval_gt.as_ref(), seed)?;
    files::save_corpora(out_dir, &gt, &corpora)?;
    let descriptor = DataDescriptor {
        spec: resolved.spec,
        eval_spec: resolved.eval_spec,
        sizes: resolved.sizes,
        seed,
        task_hash: resolved.hash,
    };
    files::write_json(&out_dir.join("task.json"), &descriptor)?;
    Ok(descriptor)
}

// ---------------------------------------------------------------------------
// Runs and grids
// ---------------------------------------------------------------------------

/// A run's MI file: the exact value at the final checkpoint next to the
/// Monte Carlo estimate from the run's own monolingual corpora.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MiRecord {
    pub exact: f64,
    pub estimate: MIEstimate,
}

/// Index entry for one completed run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestRun {
    pub strategy: String,
    pub seed: u64,
    pub dir: String,
    pub wall_seconds: f64,
    pub outputs: Vec<String>,
}

/// Experiment index: fingerprints, the grid axes, and every output path.
/// This is the only artifact allowed to differ between identical re-runs
/// (creation time and wall times live here and nowhere else).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub created_unix: u64,
    pub config_hash: u64,
    pub task_hash: u64,
    pub strategies: Vec<String>,
    pub seeds: Vec<u64>,
    pub data_dirs: Vec<String>,
    pub runs: Vec<ManifestRun>,
}

struct RunOutcome {
    record: RunRecord,
    dir_name: String,
    wall_seconds: f64,
    outputs: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
fn execute_run(
    gt: &GroundTruth,
    eval_gt: Option<&GroundTruth>,
    corpora: &Corpora,
    pretrained: Option<(Model, Model)>,
    shared_pretrain_steps: usize,
    train: &TrainConfig,
    task_hash: u64,
    run_dir: &Path,
    mi_samples: usize,
) -> Result<RunOutcome> {
    fs::create_dir_all(run_dir)?;
    let started = Instant::now();

    let mut result = match eval_gt {
        None => run_strategy(gt, corpora, pretrained, train)?,
        Some(egt) => {
            // Shifted-domain evaluation: train without the test split, then
            // score against the evaluation channel's ground truth.
            let mut training = corpora.clone();
            let test = std::mem::take(&mut training.test);
            let mut result = run_strategy(gt, &training, pretrained, train)?;
            if !test.is_empty() {
                result.final_eval = Some(oracle_eval(&result.theta, egt, &test, train.eval_beam)?);
            }
            result
        }
    };

    let strategy = train.strategy.to_string();
    files::save_curves(&run_dir.join("curves.csv"), &strategy, train.seed, &result.curves)?;
    files::save_model(&run_dir.join("theta.json"), &result.theta)?;
    files::save_model(&run_dir.join("phi.json"), &result.phi)?;
    let final_metrics = result
        .curves
        .last()
        .cloned()
        .ok_or_else(|| Error::InvalidConfig("run produced no checkpoints".into()))?;
    let record = RunRecord {
        strategy,
        seed: train.seed,
        task_hash,
        train: train.clone(),
        pretrain_steps: shared_pretrain_steps + result.pretrain_steps,
        final_metrics,
        final_eval: result.final_eval.take(),
    };
    files::write_json(&run_dir.join("run.json"), &record)?;

    let mut outputs: Vec<String> =
        ["curves.csv", "run.json", "theta.json", "phi.json"].map(String::from).into();
    if mi_samples > 0 && !corpora.mono_x.is_empty() && !corpora.mono_y.is_empty() {
        let cfg = EstimatorConfig {
            perturbation: PerturbationParams { seed: train.seed, ..PerturbationParams::default() },
            ..EstimatorConfig::default()
        };
        let estimate = estimate_mi(
            &result.theta,
            &corpora.mono_x,
            &corpora.mono_y,
            mi_samples,
            &cfg,
            train.seed,
        )?;
        let mi = MiRecord { exact: record.final_metrics.mi_theta, estimate };
        files::write_json(&run_dir.join("mi.json"), &mi)?;
        outputs.push("mi.json".into());
    }

    Ok(RunOutcome {
        dir_name: format!("{}-seed{}", record.strategy, record.seed),
        record,
        wall_seconds: started.elapsed().as_secs_f64(),
        outputs,
    })
}

/// Runs the full strategy × seed matrix into `out_dir` and writes the
/// manifest. Each seed shares one supervised pretraining across strategies,
/// so strategy comparisons are paired. `workers = 0` uses the default pool.
pub fn run_grid(cfg: &ExperimentConfig, out_dir: &Path, workers: usize) -> Result<Manifest> {
    cfg.validate()?;
    let resolved = resolve_task(&cfg.task, cfg.sizes)?;
    fs::create_dir_all(out_dir)?;
    files::write_json(&out_dir.join("config.json"), cfg)?;

    let gt = build_ground_truth(&resolved.spec)?;
    let eval_gt = resolved.eval_spec.as_ref().map(build_ground_truth).transpose()?;

    let run_seed = |&seed: &u64| -> Result<Vec<RunOutcome>> {
        let corpora = sample_task_corpora(&resolved, &gt, eval_gt.as_ref(), seed)?;
        files::save_corpora(&out_dir.join(format!("data/seed{seed}")), &gt, &corpora)?;

        let mut base = cfg.train.clone();
        base.seed = seed;
        base.strategy = Strategy::Supervised;
        let pretrained = {
            let mut training = corpora.clone();
            training.test.clear(); // pretraining never sees test pairs
            pretrain_supervised(&gt, &training, &base)?
        };

        cfg.strategies
            .par_iter()
            .map(|strategy| {
                let mut train = base.clone();
                train.strategy = strategy.clone();
                let dir = out_dir.join(format!("runs/{}-seed{seed}", strategy));
                execute_run(
                    &gt,
                    eval_gt.as_ref(),
                    &corpora,
                    Some((pretrained.theta.clone(), pretrained.phi.clone())),
                    pretrained.pretrain_steps,
                    &train,
                    resolved.hash,
                    &dir,
                    cfg.mi_samples,
                )
            })
            .collect()
    };

    let nested: Vec<Vec<RunOutcome>> = if workers == 0 {
        cfg.seeds.par_iter().map(run_seed).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        pool.install(|| cfg.seeds.par_iter().map(run_seed).collect::<Result<_>>())?
    };

    let mut outcomes: Vec<RunOutcome> = nested.into_iter().flatten().collect();
    outcomes.sort_by(|a, b| a.dir_name.cmp(&b.dir_name));

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config_hash: files::config_hash(cfg)?,
        task_hash: resolved.hash,
        strategies: cfg.strategies.iter().map(|s| s.to_string()).collect(),
        seeds: cfg.seeds.clone(),
        data_dirs: cfg.seeds.iter().map(|s| format!("data/seed{s}")).collect(),
        runs: outcomes
            .into_iter()
            .map(|o| ManifestRun {
                strategy: o.record.strategy,
                seed: o.record.seed,
                dir: format!("runs/{}", o.dir_name),
                wall_seconds: o.wall_seconds,
                outputs: o.outputs,
            })
            .collect(),
    };
    files::write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Runs a single (strategy, seed) cell of the grid into `out_dir`.
pub fn run_single(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    strategy: Strategy,
    seed: u64,
) -> Result<Manifest> {
    let mut one = cfg.clone();
    one.strategies = vec![strategy];
    one.seeds = vec![seed];
    run_grid(&one, out_dir, 1)
}

// ---------------------------------------------------------------------------
// Theory verification suite
// ---------------------------------------------------------------------------

/// Cases for the optimality-condition suite: uniform-prior constructions at
/// fixed MI targets, random-prior constructions at random feasible targets,
/// and product-factorization uniqueness probes.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySuiteConfig {
    pub uniform_sizes: Vec<usize>,
    pub i_max_targets: Vec<f64>,
    pub random_cases: usize,
    pub random_space: usize,
    pub factorization_cases: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for TheorySuiteConfig {
    fn default() -> Self {
        TheorySuiteConfig {
            uniform_sizes: vec![8],
            i_max_targets: vec![0.0, 0.52, 1.04, 1.56, 2.079],
            random_cases: 20,
            random_space: 12,
            factorization_cases: 200,
            seed: 0,
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TheoryCase {
    pub label: String,
    pub i_max: f64,
    pub passed: bool,
    pub report: VerificationReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TheorySuiteReport {
    pub cases: Vec<TheoryCase>,
    pub factorization_total: usize,
    pub factorization_respected: usize,
    pub all_passed: bool,
}

fn symbol_space(n: usize) -> Result<std::sync::Arc<SentenceSpace>> {
    SentenceSpace::enumerate(&letters(n), 1)
}

fn random_prior<R: Rng>(
    space: &std::sync::Arc<SentenceSpace>,
    rng: &mut R,
) -> Result<Categorical> {
    let weights: Vec<f64> = (0..space.size()).map(|_| rng.random::<f64>() + 0.05).collect();
    Categorical::from_weights(space.clone(), &weights)
}

/// Runs the whole suite: every case constructs an optimum (or a
/// factorization probe) and measures its residuals exactly.
pub fn run_theory_suite(cfg: &TheorySuiteConfig) -> Result<TheorySuiteReport> {
    let mut cases = Vec::new();

    for &n in &cfg.uniform_sizes {
        let space = symbol_space(n)?;
        let uniform = Categorical::uniform(space);
        for &i_max in &cfg.i_max_targets {
            let construction = construct_optimum(&uniform, &uniform, i_max)?;
            let report = verify_optimum(&construction, &uniform, &uniform, i_max, cfg.tolerance)?;
            cases.push(TheoryCase {
                label: format!("uniform-{n}"),
                i_max,
                passed: report.passed,
                report,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if cfg.random_cases > 0 {
        let space = symbol_space(cfg.random_space)?;
        for k in 0..cfg.random_cases {
            let q = random_prior(&space, &mut rng)?;
            let p = random_prior(&space, &mut rng)?;
            let search = max_mi_coupling_search(&q, &p)?;
            let i_max = rng.random::<f64>() * search.achieved_mi;
            let construction = construct_optimum(&q, &p, i_max)?;
            let report = verify_optimum(&construction, &q, &p, i_max, cfg.tolerance)?;
            cases.push(TheoryCase {
                label: format!("random-{k}"),
                i_max,
                passed: report.passed,
                report,
            });
        }
    }

    // Factorization uniqueness: even cases rebuild the factors from the
    // product's own marginals (the premise holds by construction, so the
    // factors must come back unchanged); odd cases perturb one factor and
    // must never present a premise-satisfying counterexample.
    let space2 = symbol_space(2)?;
    let mut respected = 0usize;
    for k in 0..cfg.factorization_cases {
        let p = random_prior(&space2, &mut rng)?;
        let q = random_prior(&space2, &mut rng)?;
        let (p_alt, q_alt) = if k % 2 == 0 {
            let product: Vec<Vec<f64>> = (0..2)
                .map(|i| (0..2).map(|j| p.prob(i) * q.prob(j)).collect())
                .collect();
            let p_alt = Categorical::from_weights(
                space2.clone(),
                &[product[0][0] + product[0][1], product[1][0] + product[1][1]],
            )?;
            let q_alt = Categorical::from_weights(
                space2.clone(),
                &[product[0][0] + product[1][0], product[0][1] + product[1][1]],
            )?;
            (p_alt, q_alt)
        } else {
            let delta = 0.01 + 0.15 * rng.random::<f64>();
            let shifted = [p.prob(0) + delta, (p.prob(1) - delta).max(1e-9)];
            (Categorical::from_weights(space2.clone(), &shifted)?, q.clone())
        };
        let check = check_factorization_uniqueness(&p, &p_alt, &q, &q_alt)?;
        if check.respected {
            respected += 1;
        }
        if k % 2 == 0 && check.conclusion_holds != Some(true) {
            respected = respected.saturating_sub(1);
        }
    }

    let all_passed =
        cases.iter().all(|c| c.passed) && respected == cfg.factorization_cases;
    Ok(TheorySuiteReport {
        cases,
        factorization_total: cfg.factorization_cases,
        factorization_respected: respected,
        all_passed,
    })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;

    fn tiny_config() -> ExperimentConfig {
        let spec = TaskSpec {
            src_alphabet: letters(4),
            dst_alphabet: letters(4).iter().map(|s| s.to_uppercase()).collect(),
            permutation: vec![1, 0, 3, 2],
            noise_eps: 0.1,
            length_dist: vec![0.4, 0.6],
            seed: 0,
        };
        ExperimentConfig {
            task: TaskSelection::Custom(spec),
            sizes: Some(CorpusSizes {
                parallel: 24,
                mono_x: 40,
                mono_y: 40,
                validation: 0,
                test: 30,
            }),
            strategies: vec![Strategy::Supervised, Strategy::IbtBatch],
            seeds: vec![0, 1],
            train: TrainConfig {
                model_kind: ModelKind::Autoregressive,
                batch_size: 8,
                max_updates: 30,
                checkpoint_every: 10,
                ..TrainConfig::default()
            },
            mi_samples: 500,
            formats: default_formats(),
        }
    }

    #[test]
    fn config_validation_catches_grid_mistakes() {
        let good = tiny_config();
        assert!(good.validate().is_ok());

        let mut empty = good.clone();
        empty.strategies.clear();
        assert!(empty.validate().is_err());

        let mut dup = good.clone();
        dup.seeds = vec![3, 3];
        assert!(dup.validate().is_err());

        let mut unknown = good.clone();
        unknown.task = TaskSelection::Preset("medium-resource".into());
        assert!(unknown.validate().is_err());

        let mut no_sizes = good.clone();
        no_sizes.sizes = None;
        assert!(no_sizes.validate().is_err());

        let mut bad_train = good;
        bad_train.strategies = vec![Strategy::DualLearning { alpha_lm: 1.5 }];
        assert!(bad_train.validate().is_err());
    }

    #[test]
    fn config_parsing_rejects_unknown_keys() {
        // Typos must fail loudly instead of silently training on defaults.
        let typo_train = r#"{"task":"low-resource","strategies":["bt"],"seeds":[0],
            "train":{"max_updtaes":50}}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(typo_train).is_err());
        let typo_top = r#"{"task":"low-resource","strategies":["bt"],"seeds":[0],"see":[1]}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(typo_top).is_err());
    }

    #[test]
    fn presets_resolve_with_size_overrides() {
        let low = resolve_task(&TaskSelection::Preset("low-resource".into()), None).unwrap();
        assert_eq!(low.sizes.parallel, 200);
        assert_eq!(low.sizes.mono_x, 2000);
        assert!(low.eval_spec.is_none());

        let shrunk = resolve_task(
            &TaskSelection::Preset("low-resource".into()),
            Some(CorpusSizes { parallel: 10, mono_x: 20, mono_y: 20, validation: 5, test: 5 }),
        )
        .unwrap();
        assert_eq!(shrunk.sizes.parallel, 10);
        // Sizes are part of the fingerprint.
        assert_ne!(shrunk.hash, low.hash);

        let cross = resolve_task(&TaskSelection::Preset("cross-domain".into()), None).unwrap();
        let eval = cross.eval_spec.expect("cross-domain evaluates on a shifted channel");
        assert_ne!(eval.length_dist, cross.spec.length_dist);
    }

    #[test]
    fn experiment_config_json_round_trip() {
        let cfg = tiny_config();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.strategies, cfg.strategies);
        assert_eq!(back.seeds, cfg.seeds);
        assert_eq!(back.mi_samples, 500);
        // A preset task serializes as a bare string.
        let preset: ExperimentConfig = serde_json::from_str(
            r#"{"task":"low-resource","strategies":["bt"],"seeds":[0]}"#,
        )
        .unwrap();
        assert!(matches!(preset.task, TaskSelection::Preset(ref n) if n == "low-resource"));
        assert_eq!(preset.mi_samples, 10_000);
        assert_eq!(preset.formats, default_formats());
    }

    #[test]
    fn generate_data_writes_corpora_and_descriptor() {
        let cfg = tiny_config();
        let dir = tempfile::tempdir().unwrap();
        let desc = generate_data(&cfg.task, cfg.sizes, 5, dir.path()).unwrap();
        assert_eq!(desc.sizes.parallel, 24);
        let gt = build_ground_truth(&desc.spec).unwrap();
        let corpora = files::load_corpora(dir.path(), &gt).unwrap();
        assert_eq!(corpora.parallel.len(), 24);
        assert_eq!(corpora.mono_x.len(), 40);
        assert_eq!(corpora.test.len(), 30);
        let reread: DataDescriptor = files::read_json(&dir.path().join("task.json")).unwrap();
        assert_eq!(reread.task_hash, desc.task_hash);
    }

    #[test]
    fn grid_writes_every_artifact_and_is_reproducible() {
        let cfg = tiny_config();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let manifest = run_grid(&cfg, dir_a.path(), 2).unwrap();
        assert_eq!(manifest.runs.len(), 4);
        assert_eq!(manifest.strategies, vec!["supervised", "ibt-batch"]);

        for run in &manifest.runs {
            let dir = dir_a.path().join(&run.dir);
            for name in &run.outputs {
                assert!(dir.join(name).is_file(), "{}/{name} missing", run.dir);
            }
            assert!(run.outputs.contains(&"mi.json".to_string()));
        }
        for data in &manifest.data_dirs {
            assert!(dir_a.path().join(data).join("parallel.tsv").is_file());
        }

        // Re-running the identical config must reproduce every run artifact
        // byte for byte (the manifest carries the only timestamps).
        run_grid(&cfg, dir_b.path(), 2).unwrap();
        for run in &manifest.runs {
            for name in &run.outputs {
                let a = fs::read(dir_a.path().join(&run.dir).join(name)).unwrap();
                let b = fs::read(dir_b.path().join(&run.dir).join(name)).unwrap();
                assert_eq!(a, b, "{}/{name} differs between identical grids", run.dir);
            }
        }

        // The persisted files drive reporting end to end.
        let bundle = write_report(dir_a.path(), &default_formats()).unwrap();
        assert_eq!(bundle.curve_files.len(), 4);
        assert_eq!(bundle.mi_files.len(), 4);
        let table: AggregateTable =
            files::read_json(&dir_a.path().join(&bundle.aggregate_json)).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.task_hash, manifest.task_hash);
        assert!(table.rows.iter().all(|r| r.n_runs == 2));
        assert!(table.rows.iter().all(|r| r.marginal_kl.mean.is_finite()));
    }

    #[test]
    fn single_run_is_a_one_cell_grid() {
        let mut cfg = tiny_config();
        cfg.mi_samples = 0;
        let dir = tempfile::tempdir().unwrap();
        let manifest = run_single(&cfg, dir.path(), Strategy::Supervised, 1).unwrap();
        assert_eq!(manifest.runs.len(), 1);
        assert_eq!(manifest.runs[0].strategy, "supervised");
        assert_eq!(manifest.runs[0].seed, 1);
        assert!(!manifest.runs[0].outputs.contains(&"mi.json".to_string()));
        let record: RunRecord =
            files::read_json(&dir.path().join(&manifest.runs[0].dir).join("run.json")).unwrap();
        assert!(record.final_eval.is_some());
        assert!(record.pretrain_steps > 0);
    }

    #[test]
    fn cross_domain_scores_against_the_shifted_channel() {
        let mut cfg = tiny_config();
        cfg.task = TaskSelection::Preset("cross-domain".into());
        cfg.sizes = Some(CorpusSizes {
            parallel: 24,
            mono_x: 20,
            mono_y: 20,
            validation: 0,
            test: 40,
        });
        cfg.strategies = vec![Strategy::Supervised];
        cfg.seeds = vec![0];
        cfg.mi_samples = 0;
        let dir = tempfile::tempdir().unwrap();
        let manifest = run_grid(&cfg, dir.path(), 1).unwrap();
        let record: RunRecord =
            files::read_json(&dir.path().join(&manifest.runs[0].dir).join("run.json")).unwrap();
        let eval = record.final_eval.expect("cross-domain run must be evaluated");
        assert!(eval.token_accuracy.is_finite());
        // The shifted test split skews long; the data files must reflect it.
        let resolved = resolve_task(&cfg.task, cfg.sizes).unwrap();
        let gt = build_ground_truth(&resolved.spec).unwrap();
        let corpora = files::load_corpora(&dir.path().join("data/seed0"), &gt).unwrap();
        let mean_test_len: f64 = corpora.test.iter().map(|(x, _)| x.len() as f64).sum::<f64>()
            / corpora.test.len() as f64;
        let mean_par_len: f64 =
            corpora.parallel.iter().map(|(x, _)| x.len() as f64).sum::<f64>()
                / corpora.parallel.len() as f64;
        assert!(
            mean_test_len > mean_par_len,
            "test {mean_test_len} should skew longer than train {mean_par_len}"
        );
    }

    #[test]
    fn theory_suite_passes_its_default_style_cases() {
        let cfg = TheorySuiteConfig {
            uniform_sizes: vec![8],
            i_max_targets: vec![0.0, 0.52, 1.04, 1.56, 2.079],
            random_cases: 6,
            random_space: 12,
            factorization_cases: 40,
            seed: 1,
            tolerance: 1e-6,
        };
        let report = run_theory_suite(&cfg).unwrap();
        assert_eq!(report.cases.len(), 5 + 6);
        assert!(report.all_passed, "failing cases: {:?}", report
            .cases
            .iter()
            .filter(|c| !c.passed)
            .map(|c| (&c.label, c.i_max))
            .collect::<Vec<_>>());
        assert_eq!(report.factorization_respected, 40);
        for case in report.cases.iter().filter(|c| c.label == "uniform-8") {
            assert!(case.report.bound_gap < 1e-6);
            assert!(case.report.mi_residual_theta < 1e-9);
            assert!(case.report.marginal_residual_p < 1e-9);
        }
    }
}
