//! Parameterized translation models.
//!
//! Two families share one interface: a [`TabularModel`] holds an unconstrained
//! logit per (source, destination) pair and is the maximal-capacity reference;
//! an [`AutoregressiveModel`] factorizes the destination sentence symbol by
//! symbol under a deliberately small context and is the capacity-limited
//! model that training experiments exercise. Both expose exact log
//! probabilities, exact parameter gradients of them, decoding, and full
//! materialization into a [`ConditionalTable`], so every training-time
//! quantity can be cross-checked against direct summation.

mod autoregressive;
mod lm;
mod tabular;

pub use autoregressive::AutoregressiveModel;
pub use lm::{fit_lm, LanguageModel};
pub use tabular::TabularModel;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::ConditionalTable;
use crate::error::{Error, Result};
use crate::space::{Sentence, SentenceSpace};
use std::sync::Arc;

/// How `decode` picks a destination sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeMode {
    /// Argmax by steps (autoregressive) or argmax of the row (tabular).
    /// Ties break toward the earlier sentence in space order.
    Greedy,
    /// Beam search over raw step log-probabilities keeping `k` live
    /// hypotheses; returns the best finished sentence. On a tabular model the
    /// row is already exact, so any `k >= 1` returns the argmax.
    Beam(usize),
    /// A draw from the exact conditional distribution.
    Sample,
}

/// A decoded sentence with its exact conditional log-probability.
#[derive(Clone, Debug)]
pub struct Decoded {
    pub dst_idx: usize,
    pub log_prob: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tabular,
    Autoregressive,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Tabular => "tabular",
            ModelKind::Autoregressive => "autoregressive",
        }
    }
}

/// A differentiable conditional distribution over sentences, either tabular
/// or autoregressive.
#[derive(Clone, Debug)]
pub enum Model {
    Tabular(TabularModel),
    Autoregressive(AutoregressiveModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Tabular(_) => ModelKind::Tabular,
            Model::Autoregressive(_) => ModelKind::Autoregressive,
        }
    }

    pub fn src_space(&self) -> &Arc<SentenceSpace> {
        match self {
            Model::Tabular(m) => m.src_space(),
            Model::Autoregressive(m) => m.src_space(),
        }
    }

    pub fn dst_space(&self) -> &Arc<SentenceSpace> {
        match self {
            Model::Tabular(m) => m.dst_space(),
            Model::Autoregressive(m) => m.dst_space(),
        }
    }

    pub fn param_len(&self) -> usize {
        match self {
            Model::Tabular(m) => m.param_len(),
            Model::Autoregressive(m) => m.param_len(),
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Model::Tabular(m) => m.params(),
            Model::Autoregressive(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Model::Tabular(m) => m.params_mut(),
            Model::Autoregressive(m) => m.params_mut(),
        }
    }

    /// Exact log p(dst | src) by space index.
    pub fn log_prob_idx(&self, src_idx: usize, dst_idx: usize) -> f64 {
        match self {
            Model::Tabular(m) => m.log_prob_idx(src_idx, dst_idx),
            Model::Autoregressive(m) => m.log_prob_idx(src_idx, dst_idx),
        }
    }

    /// Exact log p(dst | src); errors if either sentence is out of its space.
    pub fn log_prob(&self, src: &Sentence, dst: &Sentence) -> Result<f64> {
        let si = self.src_space().require_index(src)?;
        let di = self.dst_space().require_index(dst)?;
        Ok(self.log_prob_idx(si, di))
    }

    /// Accumulates `scale * ∇ log p(dst | src)` into `acc` (one slot per
    /// parameter).
    pub fn add_grad_log_prob(&self, src_idx: usize, dst_idx: usize, scale: f64, acc: &mut [f64]) {
        debug_assert_eq!(acc.len(), self.param_len());
        match self {
            Model::Tabular(m) => m.add_grad_log_prob(src_idx, dst_idx, scale, acc),
            Model::Autoregressive(m) => m.add_grad_log_prob(src_idx, dst_idx, scale, acc),
        }
    }

    /// Dense gradient of log p(dst | src); convenience for tests.
    pub fn grad_log_prob_idx(&self, src_idx: usize, dst_idx: usize) -> Vec<f64> {
        let mut acc = vec![0.0; self.param_len()];
        self.add_grad_log_prob(src_idx, dst_idx, 1.0, &mut acc);
        acc
    }

    /// One full conditional row p(· | src) over the destination space.
    pub fn conditional_row(&self, src_idx: usize) -> Vec<f64> {
        match self {
            Model::Tabular(m) => m.conditional_row(src_idx),
            Model::Autoregressive(m) => m.conditional_row(src_idx),
        }
    }

    /// The whole model as an exact conditional table.
    pub fn materialize(&self) -> Result<ConditionalTable> {
        let rows: Vec<Vec<f64>> = (0..self.src_space().size())
            .map(|i| self.conditional_row(i))
            .collect();
        ConditionalTable::from_rows(self.src_space().clone(), self.dst_space().clone(), rows)
    }

    pub fn decode_idx<R: Rng>(&self, src_idx: usize, mode: DecodeMode, rng: &mut R) -> Result<Decoded> {
        if let DecodeMode::Beam(0) = mode {
            return Err(Error::InvalidConfig("beam width must be at least 1".into()));
        }
        Ok(match self {
            Model::Tabular(m) => m.decode_idx(src_idx, mode, rng),
            Model::Autoregressive(m) => m.decode_idx(src_idx, mode, rng),
        })
    }

    pub fn decode<R: Rng>(
        &self,
        src: &Sentence,
        mode: DecodeMode,
        rng: &mut R,
    ) -> Result<(Sentence, f64)> {
        let si = self.src_space().require_index(src)?;
        let d = self.decode_idx(si, mode, rng)?;
        Ok((self.dst_space().sentence(d.dst_idx).clone(), d.log_prob))
    }

    /// Fresh model with logits drawn uniformly from [-scale, scale].
    pub fn init<R: Rng>(
        kind: ModelKind,
        src_space: Arc<SentenceSpace>,
        dst_space: Arc<SentenceSpace>,
        scale: f64,
        rng: &mut R,
    ) -> Model {
        match kind {
            ModelKind::Tabular => Model::Tabular(TabularModel::init(src_space, dst_space, scale, rng)),
            ModelKind::Autoregressive => {
                Model::Autoregressive(AutoregressiveModel::init(src_space, dst_space, scale, rng))
            }
        }
    }
}

pub(crate) fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Compares sentences by space enumeration order: length first, then
/// lexicographically by symbol index.
pub(crate) fn space_order(a: &[crate::space::SymbolId], b: &[crate::space::SymbolId]) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::letters;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grad_log_prob_matches_finite_differences_for_both_kinds() {
        let src = SentenceSpace::enumerate(&letters(3), 2).unwrap();
        let dst = SentenceSpace::enumerate(&letters(3), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for kind in [ModelKind::Tabular, ModelKind::Autoregressive] {
            for _ in 0..6 {
                let model = Model::init(kind, src.clone(), dst.clone(), 0.8, &mut rng);
                let si = rng.random_range(0..src.size());
                let di = rng.random_range(0..dst.size());
                let grad = model.grad_log_prob_idx(si, di);
                let h = 1e-5;
                // Probe a deterministic subset of coordinates.
                for probe in 0..20 {
                    let k = (probe * 7919) % model.param_len();
                    let mut plus = model.clone();
                    plus.params_mut()[k] += h;
                    let mut minus = model.clone();
                    minus.params_mut()[k] -= h;
                    let fd = (plus.log_prob_idx(si, di) - minus.log_prob_idx(si, di)) / (2.0 * h);
                    let denom = fd.abs().max(grad[k].abs()).max(1e-6);
                    assert!(
                        (fd - grad[k]).abs() / denom < 1e-4,
                        "{kind:?} param {k}: analytic {} vs fd {fd}",
                        grad[k]
                    );
                }
            }
        }
    }

    #[test]
    fn materialized_rows_agree_with_log_prob() {
        let src = SentenceSpace::enumerate(&letters(2), 2).unwrap();
        let dst = SentenceSpace::enumerate(&letters(3), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [ModelKind::Tabular, ModelKind::Autoregressive] {
            let model = Model::init(kind, src.clone(), dst.clone(), 1.0, &mut rng);
            let table = model.materialize().unwrap();
            for i in 0..src.size() {
                for j in 0..dst.size() {
                    let lp = model.log_prob_idx(i, j);
                    assert!(
                        (table.prob(i, j).ln() - lp).abs() < 1e-12,
                        "{kind:?} ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn sample_decode_is_deterministic_given_seed() {
        let space = SentenceSpace::enumerate(&letters(3), 2).unwrap();
        let mut init_rng = ChaCha8Rng::seed_from_u64(77);
        for kind in [ModelKind::Tabular, ModelKind::Autoregressive] {
            let model = Model::init(kind, space.clone(), space.clone(), 1.0, &mut init_rng);
            let mut a = ChaCha8Rng::seed_from_u64(3);
            let mut b = ChaCha8Rng::seed_from_u64(3);
            for si in 0..space.size() {
                let da = model.decode_idx(si, DecodeMode::Sample, &mut a).unwrap();
                let db = model.decode_idx(si, DecodeMode::Sample, &mut b).unwrap();
                assert_eq!(da.dst_idx, db.dst_idx);
                assert_eq!(da.log_prob, db.log_prob);
            }
        }
    }

    #[test]
    fn sample_decode_matches_exact_conditional_frequencies() {
        let space = SentenceSpace::enumerate(&letters(2), 2).unwrap(); // 6 sentences
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for kind in [ModelKind::Tabular, ModelKind::Autoregressive] {
            let model = Model::init(kind, space.clone(), space.clone(), 1.0, &mut rng);
            let si = 3;
            let row = model.conditional_row(si);
            let n = 200_000;
            let mut counts = vec![0usize; space.size()];
            let mut srng = ChaCha8Rng::seed_from_u64(99);
            for _ in 0..n {
                let d = model.decode_idx(si, DecodeMode::Sample, &mut srng).unwrap();
                counts[d.dst_idx] += 1;
            }
            for j in 0..space.size() {
                let freq = counts[j] as f64 / n as f64;
                assert!(
                    (freq - row[j]).abs() < 0.01,
                    "{kind:?} dst {j}: freq {freq} vs exact {}",
                    row[j]
                );
            }
        }
    }

    #[test]
    fn beam_as_wide_as_the_space_finds_the_exact_argmax() {
        let src = SentenceSpace::enumerate(&letters(3), 3).unwrap();
        let dst = SentenceSpace::enumerate(&letters(3), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..20 {
            let model = Model::init(
                ModelKind::Autoregressive,
                src.clone(),
                dst.clone(),
                1.5,
                &mut rng,
            );
            let si = trial % src.size();
            let d = model
                .decode_idx(si, DecodeMode::Beam(dst.size()), &mut rng)
                .unwrap();
            let row = model.conditional_row(si);
            let best = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                .unwrap()
                .0;
            assert_eq!(d.dst_idx, best, "trial {trial}");
            assert!((d.log_prob - row[best].ln()).abs() < 1e-12);
        }
    }
}
