//! Bigram language model with additive smoothing, used as a fluency reward.
//!
//! The model scores sentences over one space's alphabet with BOS/EOS
//! transitions. Smoothing keeps every next-symbol distribution strictly
//! positive, so every in-space sentence has a finite log probability. The
//! event space is unbounded-length strings (no truncation at the space's
//! max_len); that is fine for a reward signal, which only ever compares
//! scores of in-space sentences.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::space::{Sentence, SentenceSpace, SymbolId};

#[derive(Clone, Debug)]
pub struct LanguageModel {
    space: Arc<SentenceSpace>,
    smoothing: f64,
    /// (n_sym + 1 BOS) x (n_sym + 1 EOS) transition log-probabilities.
    /// BOS -> EOS is structurally impossible (empty sentences excluded) and
    /// stays at -inf; it is never queried by in-space scoring.
    log_trans: Vec<f64>,
}

/// Fits a smoothed bigram model on a corpus. `smoothing` must be positive so
/// the model assigns mass to unseen transitions.
pub fn fit_lm(space: Arc<SentenceSpace>, corpus: &[Sentence], smoothing: f64) -> Result<LanguageModel> {
    if !(smoothing > 0.0) || !smoothing.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "lm smoothing must be positive and finite, got {smoothing}"
        )));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus("language model fit".into()));
    }
    let n = space.alphabet_size();
    let bos = n;
    let eos = n;
    let dim = n + 1;
    let mut counts = vec![0.0f64; dim * dim];
    for s in corpus {
        space.require_index(s)?;
        let syms = s.symbols();
        counts[bos * dim + syms[0] as usize] += 1.0;
        for t in 1..syms.len() {
            counts[syms[t - 1] as usize * dim + syms[t] as usize] += 1.0;
        }
        counts[syms[syms.len() - 1] as usize * dim + eos] += 1.0;
    }

    let mut log_trans = vec![f64::NEG_INFINITY; dim * dim];
    for prev in 0..dim {
        // BOS can only be followed by a symbol; symbols by a symbol or EOS.
        let outcomes = if prev == bos { n } else { n + 1 };
        let row = &counts[prev * dim..(prev + 1) * dim];
        let total: f64 = row[..outcomes].iter().sum::<f64>() + smoothing * outcomes as f64;
        for next in 0..outcomes {
            log_trans[prev * dim + next] = ((row[next] + smoothing) / total).ln();
        }
    }

    Ok(LanguageModel {
        space,
        smoothing,
        log_trans,
    })
}

impl LanguageModel {
    pub fn space(&self) -> &Arc<SentenceSpace> {
        &self.space
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// Log-probability of one transition; `None` is BOS on the left and EOS
    /// on the right.
    pub fn transition_log_prob(&self, prev: Option<SymbolId>, next: Option<SymbolId>) -> f64 {
        let n = self.space.alphabet_size();
        let dim = n + 1;
        let p = prev.map_or(n, |s| s as usize);
        let q = next.map_or(n, |s| s as usize);
        self.log_trans[p * dim + q]
    }

    pub fn log_prob_idx(&self, idx: usize) -> f64 {
        self.score(self.space.sentence(idx).symbols())
    }

    pub fn log_prob(&self, sentence: &Sentence) -> Result<f64> {
        self.space.require_index(sentence)?;
        Ok(self.score(sentence.symbols()))
    }

    fn score(&self, syms: &[SymbolId]) -> f64 {
        let n = self.space.alphabet_size();
        let dim = n + 1;
        let mut lp = self.log_trans[n * dim + syms[0] as usize];
        for t in 1..syms.len() {
            lp += self.log_trans[syms[t - 1] as usize * dim + syms[t] as usize];
        }
        lp + self.log_trans[syms[syms.len() - 1] as usize * dim + n]
    }
}
