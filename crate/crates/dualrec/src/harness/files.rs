//! On-disk formats for experiments: corpora, model checkpoints, learning
//! curves, and per-run records.
//!
//! Everything here is deterministic given identical inputs — floats are
//! written in their shortest round-trip form, so re-running a seeded
//! experiment reproduces every file byte for byte. Timestamps are banned from
//! these formats; they live only in the experiment manifest.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelKind};
use crate::space::{Sentence, SentenceSpace};
use crate::synth::{Corpora, EvalReport, GroundTruth};
use crate::train::{CurveRecord, TrainConfig};

// ---------------------------------------------------------------------------
// Hashing & JSON helpers
// ---------------------------------------------------------------------------

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stable fingerprint of any serializable value (FNV-1a of its compact JSON).
pub fn config_hash<T: Serialize>(value: &T) -> Result<u64> {
    Ok(fnv1a(serde_json::to_string(value)?.as_bytes()))
}

fn annotate(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| annotate(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| annotate(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

// ---------------------------------------------------------------------------
// Corpus files
// ---------------------------------------------------------------------------

const PARALLEL_FILE: &str = "parallel.tsv";
const MONO_X_FILE: &str = "mono_x.txt";
const MONO_Y_FILE: &str = "mono_y.txt";
const VALIDATION_FILE: &str = "validation.tsv";
const TEST_FILE: &str = "test.tsv";

fn render_pairs(
    src: &SentenceSpace,
    dst: &SentenceSpace,
    pairs: &[(Sentence, Sentence)],
) -> String {
    let mut out = String::new();
    for (x, y) in pairs {
        out.push_str(&src.render(x));
        out.push('\t');
        out.push_str(&dst.render(y));
        out.push('\n');
    }
    out
}

fn render_mono(space: &SentenceSpace, sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push_str(&space.render(s));
        out.push('\n');
    }
    out
}

fn parse_pairs(
    path: &Path,
    src: &SentenceSpace,
    dst: &SentenceSpace,
) -> Result<Vec<(Sentence, Sentence)>> {
    let text = fs::read_to_string(path).map_err(|e| annotate(path, e))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (a, b) = line.split_once('\t').ok_or_else(|| {
            Error::InvalidConfig(format!(
                "{}:{}: expected two tab-separated sentences",
                path.display(),
                lineno + 1
            ))
        })?;
        pairs.push((src.parse(a)?, dst.parse(b)?));
    }
    Ok(pairs)
}

fn parse_mono(path: &Path, space: &SentenceSpace) -> Result<Vec<Sentence>> {
    let text = fs::read_to_string(path).map_err(|e| annotate(path, e))?;
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| space.parse(l))
        .collect()
}

/// Writes all five corpus files into `dir` (one sentence per line, symbols
/// space-separated; pair files tab-separated).
pub fn save_corpora(dir: &Path, gt: &GroundTruth, corpora: &Corpora) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| annotate(dir, e))?;
    let (sx, sy) = (&gt.src_space, &gt.dst_space);
    let write = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| annotate(&path, e))
    };
    write(PARALLEL_FILE, render_pairs(sx, sy, &corpora.parallel))?;
    write(MONO_X_FILE, render_mono(sx, &corpora.mono_x))?;
    write(MONO_Y_FILE, render_mono(sy, &corpora.mono_y))?;
    write(VALIDATION_FILE, render_pairs(sx, sy, &corpora.validation))?;
    write(TEST_FILE, render_pairs(sx, sy, &corpora.test))?;
    Ok(())
}

/// Reads the five corpus files back, parsing against the task's spaces.
pub fn load_corpora(dir: &Path, gt: &GroundTruth) -> Result<Corpora> {
    let (sx, sy) = (&gt.src_space, &gt.dst_space);
    Ok(Corpora {
        parallel: parse_pairs(&dir.join(PARALLEL_FILE), sx, sy)?,
        mono_x: parse_mono(&dir.join(MONO_X_FILE), sx)?,
        mono_y: parse_mono(&dir.join(MONO_Y_FILE), sy)?,
        validation: parse_pairs(&dir.join(VALIDATION_FILE), sx, sy)?,
        test: parse_pairs(&dir.join(TEST_FILE), sx, sy)?,
    })
}

// ---------------------------------------------------------------------------
// Model checkpoints
// ---------------------------------------------------------------------------

pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned, self-describing model container: the spaces are stored as
/// alphabets plus length caps, so a checkpoint loads without the original
/// task definition. Parameters round-trip exactly (shortest-form JSON floats
/// recover the same bits).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub version: u32,
    pub kind: ModelKind,
    pub src_alphabet: Vec<String>,
    pub dst_alphabet: Vec<String>,
    pub src_max_len: usize,
    pub dst_max_len: usize,
    pub params: Vec<f64>,
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    let ck = ModelCheckpoint {
        version: CHECKPOINT_VERSION,
        kind: model.kind(),
        src_alphabet: model.src_space().alphabet().to_vec(),
        dst_alphabet: model.dst_space().alphabet().to_vec(),
        src_max_len: model.src_space().max_len(),
        dst_max_len: model.dst_space().max_len(),
        params: model.params().to_vec(),
    };
    write_json(path, &ck)
}

pub fn load_model(path: &Path) -> Result<Model> {
    let ck: ModelCheckpoint = read_json(path)?;
    if ck.version != CHECKPOINT_VERSION {
        return Err(Error::InvalidConfig(format!(
            "{}: unsupported checkpoint version {} (this build reads {})",
            path.display(),
            ck.version,
            CHECKPOINT_VERSION
        )));
    }
    let src = SentenceSpace::enumerate(&ck.src_alphabet, ck.src_max_len)?;
    let dst = SentenceSpace::enumerate(&ck.dst_alphabet, ck.dst_max_len)?;
    // The parameter count is a function of (kind, spaces); build a fresh
    // model of that shape and overwrite its parameters.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = Model::init(ck.kind, src, dst, 0.0, &mut rng);
    if model.param_len() != ck.params.len() {
        return Err(Error::InvalidConfig(format!(
            "{}: checkpoint holds {} parameters but the declared shape needs {}",
            path.display(),
            ck.params.len(),
            model.param_len()
        )));
    }
    model.params_mut().copy_from_slice(&ck.params);
    Ok(model)
}

// ---------------------------------------------------------------------------
// Learning-curve CSV (long format)
// ---------------------------------------------------------------------------

pub const CURVE_HEADER: &str = "step,direction,loss_name,value,seed,strategy";

/// One cell of the long-format curve table. `direction` is `x2y` for the
/// forward model, `y2x` for the reverse model, and `both` for joint or
/// direction-averaged quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub step: usize,
    pub direction: String,
    pub loss_name: String,
    pub value: f64,
    pub seed: u64,
    pub strategy: String,
}

/// Explodes one checkpoint record into long-format rows.
pub fn curve_rows(strategy: &str, seed: u64, rec: &CurveRecord) -> Vec<CurveRow> {
    let mk = |direction: &str, loss_name: &str, value: f64| CurveRow {
        step: rec.step,
        direction: direction.into(),
        loss_name: loss_name.into(),
        value,
        seed,
        strategy: strategy.into(),
    };
    vec![
        mk("x2y", "recon_loss", rec.recon_loss_tst),
        mk("y2x", "recon_loss", rec.recon_loss_sts),
        mk("both", "recon_loss", rec.recon_loss_avg),
        mk("both", "supervised_loss", rec.supervised_loss),
        mk("both", "j_dual", rec.j_dual),
        mk("x2y", "mi", rec.mi_theta),
        mk("y2x", "mi", rec.mi_phi),
        mk("x2y", "token_accuracy", rec.token_accuracy),
    ]
}

pub fn save_curves(
    path: &Path,
    strategy: &str,
    seed: u64,
    curves: &[CurveRecord],
) -> Result<()> {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for rec in curves {
        for row in curve_rows(strategy, seed, rec) {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.step, row.direction, row.loss_name, row.value, row.seed, row.strategy
            ));
        }
    }
    fs::write(path, out).map_err(|e| annotate(path, e))
}

pub fn load_curves(path: &Path) -> Result<Vec<CurveRow>> {
    let text = fs::read_to_string(path).map_err(|e| annotate(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CURVE_HEADER => {}
        other => {
            return Err(Error::InvalidConfig(format!(
                "{}: expected curve header '{CURVE_HEADER}', found {other:?}",
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::InvalidConfig(format!(
                "{}:{}: expected 6 fields, found {}",
                path.display(),
                lineno + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| {
            Error::InvalidConfig(format!("{}:{}: bad {what}", path.display(), lineno + 2))
        };
        rows.push(CurveRow {
            step: fields[0].parse().map_err(|_| bad("step"))?,
            direction: fields[1].into(),
            loss_name: fields[2].into(),
            value: fields[3].parse().map_err(|_| bad("value"))?,
            seed: fields[4].parse().map_err(|_| bad("seed"))?,
            strategy: fields[5].into(),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

/// Everything a finished run persists besides its curves and checkpoints.
/// Wall-clock duration is deliberately absent — it lives in the manifest so
/// that record files stay byte-identical across repeated seeded runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub strategy: String,
    pub seed: u64,
    /// Fingerprint of the resolved task and corpus sizes; aggregation
    /// refuses to mix runs with different fingerprints.
    pub task_hash: u64,
    pub train: TrainConfig,
    pub pretrain_steps: usize,
    /// The last checkpoint row, duplicated here for cheap access; the full
    /// history lives in the run's curve file.
    pub final_metrics: CurveRecord,
    pub final_eval: Option<EvalReport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{build_ground_truth, sample_corpora, CorpusSizes, TaskSpec};
    use crate::train::Strategy;
    use rand::Rng;

    fn tiny_gt() -> GroundTruth {
        let src = crate::space::letters(3);
        let spec = TaskSpec {
            dst_alphabet: src.iter().map(|s| s.to_uppercase()).collect(),
            src_alphabet: src,
            permutation: vec![2, 0, 1],
            noise_eps: 0.05,
            length_dist: vec![0.5, 0.5],
            seed: 1,
        };
        build_ground_truth(&spec).unwrap()
    }

    #[test]
    fn fnv1a_matches_reference_vectors() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn corpora_round_trip_through_text_files() {
        let gt = tiny_gt();
        let sizes = CorpusSizes {
            parallel: 12,
            mono_x: 7,
            mono_y: 5,
            validation: 3,
            test: 4,
        };
        let corpora = sample_corpora(&gt, &sizes, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_corpora(dir.path(), &gt, &corpora).unwrap();
        let loaded = load_corpora(dir.path(), &gt).unwrap();
        assert_eq!(loaded.parallel, corpora.parallel);
        assert_eq!(loaded.mono_x, corpora.mono_x);
        assert_eq!(loaded.mono_y, corpora.mono_y);
        assert_eq!(loaded.validation, corpora.validation);
        assert_eq!(loaded.test, corpora.test);
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let gt = tiny_gt();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut model = Model::init(
            ModelKind::Autoregressive,
            gt.src_space.clone(),
            gt.dst_space.clone(),
            0.3,
            &mut rng,
        );
        for p in model.params_mut() {
            *p += rng.random::<f64>();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("theta.json");
        save_model(&path, &model).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.kind(), model.kind());
        assert_eq!(loaded.params(), model.params());
        assert!(loaded.src_space().same_as(model.src_space()));
        let si = 1.min(gt.src_space.size() - 1);
        assert_eq!(loaded.log_prob_idx(si, 2), model.log_prob_idx(si, 2));
    }

    #[test]
    fn checkpoint_version_is_enforced() {
        let gt = tiny_gt();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = Model::init(
            ModelKind::Tabular,
            gt.src_space.clone(),
            gt.dst_space.clone(),
            0.1,
            &mut rng,
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut ck = ModelCheckpoint {
            version: CHECKPOINT_VERSION + 1,
            kind: model.kind(),
            src_alphabet: model.src_space().alphabet().to_vec(),
            dst_alphabet: model.dst_space().alphabet().to_vec(),
            src_max_len: model.src_space().max_len(),
            dst_max_len: model.dst_space().max_len(),
            params: model.params().to_vec(),
        };
        write_json(&path, &ck).unwrap();
        assert!(load_model(&path).is_err());
        ck.version = CHECKPOINT_VERSION;
        ck.params.pop();
        write_json(&path, &ck).unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn curves_round_trip_and_rerenders_identically() {
        let rec = CurveRecord {
            step: 250,
            recon_loss_tst: 1.25,
            recon_loss_sts: 0.5,
            recon_loss_avg: 0.875,
            supervised_loss: 2.0,
            j_dual: -1.75,
            mi_theta: 0.6931471805599453,
            mi_phi: 0.1,
            token_accuracy: 0.75,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        save_curves(&path, "ibt-batch", 3, &[rec.clone()]).unwrap();
        let rows = load_curves(&path).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows, curve_rows("ibt-batch", 3, &rec));
        // Shortest round-trip float text: writing the parsed rows again must
        // reproduce the file exactly.
        let first = fs::read(&path).unwrap();
        save_curves(&path, "ibt-batch", 3, &[rec]).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
        let ln2 = rows.iter().find(|r| r.loss_name == "mi" && r.direction == "x2y").unwrap();
        assert_eq!(ln2.value, 0.6931471805599453);
    }

    #[test]
    fn run_record_round_trips_with_strategy_strings() {
        let mut train = TrainConfig::default();
        train.strategy = Strategy::DualLearning { alpha_lm: 0.5 };
        train.seed = 11;
        let record = RunRecord {
            strategy: train.strategy.to_string(),
            seed: 11,
            task_hash: 42,
            train,
            pretrain_steps: 120,
            final_metrics: CurveRecord {
                step: 500,
                recon_loss_tst: 0.9,
                recon_loss_sts: 1.1,
                recon_loss_avg: 1.0,
                supervised_loss: 1.5,
                j_dual: -2.0,
                mi_theta: 0.4,
                mi_phi: 0.5,
                token_accuracy: 0.8,
            },
            final_eval: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        write_json(&path, &record).unwrap();
        let loaded: RunRecord = read_json(&path).unwrap();
        assert_eq!(loaded.strategy, "dl-0.5");
        assert_eq!(loaded.train.strategy.to_string(), "dl-0.5");
        assert_eq!(loaded.final_metrics, record.final_metrics);
    }
}
