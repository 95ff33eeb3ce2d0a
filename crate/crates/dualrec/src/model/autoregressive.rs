//! Capacity-limited conditional that factorizes the destination sentence
//! symbol by symbol.
//!
//! The context at step `t` is (t, previous destination symbol or BOS, source
//! symbol at position `t` or PAD), and each context softmaxes over
//! destination symbols plus EOS. Two boundary rules make the raw step
//! distributions a proper measure split between the space and a truncation
//! remainder:
//!
//! * EOS is masked out of the step-0 softmax, so the empty sentence (which no
//!   space contains) gets zero mass;
//! * steps beyond `max_len` are never taken, so mass on continuations past
//!   `max_len` ("overflow") is renormalized away proportionally across
//!   in-space sentences.
//!
//! A suffix dynamic program computes the in-space mass exactly; log
//! probabilities, sampling, and gradients all share it, so `sample` draws
//! from the exact renormalized conditional and `grad` differentiates through
//! the normalizer.

use std::sync::Arc;

use rand::Rng;

use super::{space_order, DecodeMode, Decoded};
use crate::dist::{kahan_sum, sample_index};
use crate::space::{Sentence, SentenceSpace, SymbolId};

#[derive(Clone, Debug)]
pub struct AutoregressiveModel {
    src_space: Arc<SentenceSpace>,
    dst_space: Arc<SentenceSpace>,
    n_src_sym: usize,
    n_dst_sym: usize,
    /// dst max_len + 1: step t emits the symbol at position t, or EOS.
    steps: usize,
    prev_dim: usize,
    src_dim: usize,
    out_dim: usize,
    params: Vec<f64>,
}

/// Step probabilities for one source sentence: [t][prev][out], masked and
/// normalized.
struct StepTable {
    probs: Vec<f64>,
    prev_dim: usize,
    out_dim: usize,
}

impl StepTable {
    fn row(&self, t: usize, prev: usize) -> &[f64] {
        let base = (t * self.prev_dim + prev) * self.out_dim;
        &self.probs[base..base + self.out_dim]
    }
}

impl AutoregressiveModel {
    pub fn new(
        src_space: Arc<SentenceSpace>,
        dst_space: Arc<SentenceSpace>,
        params: Vec<f64>,
    ) -> Self {
        let n_src_sym = src_space.alphabet_size();
        let n_dst_sym = dst_space.alphabet_size();
        let steps = dst_space.max_len() + 1;
        let prev_dim = n_dst_sym + 1; // last = BOS
        let src_dim = n_src_sym + 1; // last = PAD
        let out_dim = n_dst_sym + 1; // last = EOS
        assert_eq!(params.len(), steps * prev_dim * src_dim * out_dim);
        AutoregressiveModel {
            src_space,
            dst_space,
            n_src_sym,
            n_dst_sym,
            steps,
            prev_dim,
            src_dim,
            out_dim,
            params,
        }
    }

    pub fn zeros(src_space: Arc<SentenceSpace>, dst_space: Arc<SentenceSpace>) -> Self {
        let steps = dst_space.max_len() + 1;
        let n = steps
            * (dst_space.alphabet_size() + 1)
            * (src_space.alphabet_size() + 1)
            * (dst_space.alphabet_size() + 1);
        AutoregressiveModel::new(src_space, dst_space, vec![0.0; n])
    }

    pub fn init<R: Rng>(
        src_space: Arc<SentenceSpace>,
        dst_space: Arc<SentenceSpace>,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut m = AutoregressiveModel::zeros(src_space, dst_space);
        for p in m.params.iter_mut() {
            *p = (rng.random::<f64>() * 2.0 - 1.0) * scale;
        }
        m
    }

    pub fn src_space(&self) -> &Arc<SentenceSpace> {
        &self.src_space
    }

    pub fn dst_space(&self) -> &Arc<SentenceSpace> {
        &self.dst_space
    }

    pub fn param_len(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn bos(&self) -> usize {
        self.n_dst_sym
    }

    fn eos(&self) -> usize {
        self.n_dst_sym
    }

    fn pad(&self) -> usize {
        self.n_src_sym
    }

    fn max_len(&self) -> usize {
        self.steps - 1
    }

    fn param_index(&self, t: usize, prev: usize, src: usize, out: usize) -> usize {
        ((t * self.prev_dim + prev) * self.src_dim + src) * self.out_dim + out
    }

    fn src_symbol_at(&self, x: &[SymbolId], t: usize) -> usize {
        if t < x.len() {
            x[t] as usize
        } else {
            self.pad()
        }
    }

    /// The step distribution at (t, prev) for the given source, normalized
    /// over the allowed outputs (EOS is masked at t = 0).
    pub fn step_distribution(&self, src_idx: usize, t: usize, prev: Option<SymbolId>) -> Vec<f64> {
        let x = self.src_space.sentence(src_idx).symbols().to_vec();
        let prev_idx = match prev {
            Some(s) => s as usize,
            None => self.bos(),
        };
        let st = self.step_table(&x);
        st.row(t, prev_idx).to_vec()
    }

    fn step_table(&self, x: &[SymbolId]) -> StepTable {
        let mut probs = vec![0.0; self.steps * self.prev_dim * self.out_dim];
        for t in 0..self.steps {
            let src = self.src_symbol_at(x, t);
            let allowed_outs = if t == 0 { self.n_dst_sym } else { self.out_dim };
            for prev in 0..self.prev_dim {
                let pbase = self.param_index(t, prev, src, 0);
                let logits = &self.params[pbase..pbase + self.out_dim];
                let out = &mut probs[(t * self.prev_dim + prev) * self.out_dim..][..self.out_dim];
                let m = logits[..allowed_outs]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for o in 0..allowed_outs {
                    let e = (logits[o] - m).exp();
                    out[o] = e;
                    total += e;
                }
                for o in 0..allowed_outs {
                    out[o] /= total;
                }
                // Masked entries stay exactly zero.
            }
        }
        StepTable {
            probs,
            prev_dim: self.prev_dim,
            out_dim: self.out_dim,
        }
    }

    /// Suffix in-space masses pin[t][prev] for t in 1..=max_len (flat, real
    /// previous symbols only), plus the total in-space mass z.
    fn in_space_dp(&self, st: &StepTable) -> (Vec<f64>, f64) {
        let n = self.n_dst_sym;
        let max_len = self.max_len();
        let eos = self.eos();
        let mut pin = vec![0.0; max_len * n];
        for prev in 0..n {
            pin[(max_len - 1) * n + prev] = st.row(max_len, prev)[eos];
        }
        for t in (1..max_len).rev() {
            for prev in 0..n {
                let row = st.row(t, prev);
                let mut total = row[eos];
                for s in 0..n {
                    total += row[s] * pin[t * n + s];
                }
                pin[(t - 1) * n + prev] = total;
            }
        }
        let row0 = st.row(0, self.bos());
        let mut z = 0.0;
        for s in 0..n {
            z += row0[s] * pin[s];
        }
        (pin, z)
    }

    /// Total raw probability the step model places on the destination space
    /// for this source; the remainder is truncation overflow.
    pub fn in_space_mass(&self, src_idx: usize) -> f64 {
        let x = self.src_space.sentence(src_idx).symbols().to_vec();
        let st = self.step_table(&x);
        self.in_space_dp(&st).1
    }

    fn raw_log_prob(&self, st: &StepTable, y: &[SymbolId]) -> f64 {
        let mut lp = st.row(0, self.bos())[y[0] as usize].ln();
        for t in 1..y.len() {
            lp += st.row(t, y[t - 1] as usize)[y[t] as usize].ln();
        }
        lp += st.row(y.len(), y[y.len() - 1] as usize)[self.eos()].ln();
        lp
    }

    pub fn log_prob_idx(&self, src_idx: usize, dst_idx: usize) -> f64 {
        let x = self.src_space.sentence(src_idx).symbols().to_vec();
        let y = self.dst_space.sentence(dst_idx).symbols().to_vec();
        let st = self.step_table(&x);
        let (_, z) = self.in_space_dp(&st);
        self.raw_log_prob(&st, &y) - z.ln()
    }

    pub fn conditional_row(&self, src_idx: usize) -> Vec<f64> {
        let x = self.src_space.sentence(src_idx).symbols().to_vec();
        let st = self.step_table(&x);
        let eos = self.eos();
        let bos = self.bos();
        let mut raw = Vec::with_capacity(self.dst_space.size());
        for y in self.dst_space.sentences() {
            let ys = y.symbols();
            let mut p = st.row(0, bos)[ys[0] as usize];
            for t in 1..ys.len() {
                p *= st.row(t, ys[t - 1] as usize)[ys[t] as usize];
            }
            p *= st.row(ys.len(), ys[ys.len() - 1] as usize)[eos];
            raw.push(p);
        }
        let total = kahan_sum(raw.iter().copied());
        for p in raw.iter_mut() {
            *p /= total;
        }
        raw
    }

    pub fn add_grad_log_prob(&self, src_idx: usize, dst_idx: usize, scale: f64, acc: &mut [f64]) {
        let x = self.src_space.sentence(src_idx).symbols().to_vec();
        let y = self.dst_space.sentence(dst_idx).symbols().to_vec();
        let st = self.step_table(&x);
        let (pin, z) = self.in_space_dp(&st);
        let n = self.n_dst_sym;
        let eos = self.eos();
        let bos = self.bos();
        let max_len = self.max_len();

        // Chosen-path softmax gradients: (one-hot − p) at each visited
        // context. Masked outputs have p = 0 and are never the choice, so the
        // uniform loop is exact for them too.
        let mut visit = |t: usize, prev: usize, choice: usize| {
            let src = self.src_symbol_at(&x, t);
            let row = st.row(t, prev);
            for o in 0..self.out_dim {
                let indicator = if o == choice { 1.0 } else { 0.0 };
                acc[self.param_index(t, prev, src, o)] += scale * (indicator - row[o]);
            }
        };
        visit(0, bos, y[0] as usize);
        for t in 1..y.len() {
            visit(t, y[t - 1] as usize, y[t] as usize);
        }
        visit(y.len(), y[y.len() - 1] as usize, eos);

        // Reverse pass for -∇ log z. dz[.] holds ∂z/∂(step probability);
        // alpha[t][prev] is ∂z/∂pin[t][prev].
        let mut dz = vec![0.0; st.probs.len()];
        let mut alpha = vec![0.0; max_len * n];
        {
            let row0 = st.row(0, bos);
            let base0 = (0 * self.prev_dim + bos) * self.out_dim;
            for s in 0..n {
                dz[base0 + s] = pin[s];
                alpha[s] = row0[s];
            }
        }
        for t in 1..=max_len {
            for prev in 0..n {
                let a = alpha[(t - 1) * n + prev];
                if a == 0.0 {
                    continue;
                }
                let base = (t * self.prev_dim + prev) * self.out_dim;
                dz[base + eos] += a;
                if t < max_len {
                    let row = st.row(t, prev);
                    for s in 0..n {
                        dz[base + s] += a * pin[t * n + s];
                        alpha[t * n + s] += a * row[s];
                    }
                }
            }
        }
        // Chain through each context's softmax: dz/dlogit_o = p_o (g_o − Σ g p).
        for t in 0..=max_len {
            let src = self.src_symbol_at(&x, t);
            for prev in 0..self.prev_dim {
                let base = (t * self.prev_dim + prev) * self.out_dim;
                let row = st.row(t, prev);
                let mut inner = 0.0;
                for o in 0..self.out_dim {
                    inner += dz[base + o] * row[o];
                }
                if inner == 0.0 && dz[base..base + self.out_dim].iter().all(|&g| g == 0.0) {
                    continue;
                }
                for o in 0..self.out_dim {
                    let d = row[o] * (dz[base + o] - inner);
                    acc[self.param_index(t, prev, src, o)] += scale * (-d / z);
                }
            }
        }
    }

    pub fn decode_idx<R: Rng>(&self, src_idx: usize, mode: DecodeMode, rng: &mut R) -> Decoded {
        let x = self.src_space.sentence(src_idx).symbols().to_vec();
        let st = self.step_table(&x);
        let (pin, z) = self.in_space_dp(&st);
        let n = self.n_dst_sym;
        let eos = self.eos();
        let bos = self.bos();
        let max_len = self.max_len();

        let (symbols, raw_lp) = match mode {
            DecodeMode::Greedy => {
                // Argmax by steps over the raw step distribution, restricted
                // to in-space choices. Candidate order EOS-then-symbols plus
                // strict improvement implements the space-order tie-break.
                let row0 = st.row(0, bos);
                let mut s0 = 0;
                for s in 1..n {
                    if row0[s] > row0[s0] {
                        s0 = s;
                    }
                }
                let mut symbols = vec![s0 as SymbolId];
                let mut lp = row0[s0].ln();
                for t in 1..=max_len {
                    let prev = *symbols.last().unwrap() as usize;
                    let row = st.row(t, prev);
                    let mut choice = eos;
                    if t < max_len {
                        for s in 0..n {
                            if row[s] > row[choice] {
                                choice = s;
                            }
                        }
                    }
                    lp += row[choice].ln();
                    if choice == eos {
                        break;
                    }
                    symbols.push(choice as SymbolId);
                }
                (symbols, lp)
            }
            DecodeMode::Beam(k) => {
                let mut live: Vec<(Vec<SymbolId>, f64)> = vec![(Vec::new(), 0.0)];
                let mut best: Option<(Vec<SymbolId>, f64)> = None;
                for t in 0..=max_len {
                    let mut next: Vec<(Vec<SymbolId>, f64)> = Vec::new();
                    for (prefix, lp) in &live {
                        let prev = if t == 0 { bos } else { *prefix.last().unwrap() as usize };
                        let row = st.row(t, prev);
                        if t >= 1 {
                            let cand = lp + row[eos].ln();
                            let replace = match &best {
                                None => true,
                                Some((bp, bl)) => {
                                    cand > *bl
                                        || (cand == *bl
                                            && space_order(prefix, bp) == std::cmp::Ordering::Less)
                                }
                            };
                            if replace {
                                best = Some((prefix.clone(), cand));
                            }
                        }
                        if t < max_len {
                            for s in 0..n {
                                let mut p = prefix.clone();
                                p.push(s as SymbolId);
                                next.push((p, lp + row[s].ln()));
                            }
                        }
                    }
                    if next.is_empty() {
                        break;
                    }
                    next.sort_by(|a, b| {
                        b.1.partial_cmp(&a.1)
                            .unwrap()
                            .then_with(|| space_order(&a.0, &b.0))
                    });
                    next.truncate(k);
                    live = next;
                }
                best.expect("beam always finishes at least one hypothesis")
            }
            DecodeMode::Sample => {
                // Exact ancestral draw from the renormalized conditional:
                // continuation weights fold in the suffix in-space mass.
                let row0 = st.row(0, bos);
                let weights: Vec<f64> = (0..n).map(|s| row0[s] * pin[s]).collect();
                let s0 = sample_index(&weights, rng);
                let mut symbols = vec![s0 as SymbolId];
                let mut lp = row0[s0].ln();
                for t in 1..=max_len {
                    let prev = *symbols.last().unwrap() as usize;
                    let row = st.row(t, prev);
                    if t == max_len {
                        lp += row[eos].ln();
                        break;
                    }
                    let mut weights = Vec::with_capacity(n + 1);
                    weights.push(row[eos]);
                    for s in 0..n {
                        weights.push(row[s] * pin[t * n + s]);
                    }
                    let k = sample_index(&weights, rng);
                    if k == 0 {
                        lp += row[eos].ln();
                        break;
                    }
                    let s = k - 1;
                    lp += row[s].ln();
                    symbols.push(s as SymbolId);
                }
                (symbols, lp)
            }
        };

        let sentence = Sentence::new(symbols);
        let dst_idx = self
            .dst_space
            .index_of(&sentence)
            .expect("decoded sentence is always in the destination space");
        Decoded {
            dst_idx,
            log_prob: raw_lp - z.ln(),
        }
    }
}
