//! Maximal-capacity conditional: one free logit per sentence pair.

use std::sync::Arc;

use rand::Rng;

use super::{logsumexp, DecodeMode, Decoded};
use crate::dist::{sample_index, ConditionalTable};
use crate::error::Result;
use crate::space::SentenceSpace;

/// Row-major |src| x |dst| logit matrix; each row softmaxes into the exact
/// conditional p(dst | src).
#[derive(Clone, Debug)]
pub struct TabularModel {
    src_space: Arc<SentenceSpace>,
    dst_space: Arc<SentenceSpace>,
    logits: Vec<f64>,
}

impl TabularModel {
    pub fn new(src_space: Arc<SentenceSpace>, dst_space: Arc<SentenceSpace>, logits: Vec<f64>) -> Self {
        assert_eq!(logits.len(), src_space.size() * dst_space.size());
        TabularModel {
            src_space,
            dst_space,
            logits,
        }
    }

    pub fn zeros(src_space: Arc<SentenceSpace>, dst_space: Arc<SentenceSpace>) -> Self {
        let n = src_space.size() * dst_space.size();
        TabularModel::new(src_space, dst_space, vec![0.0; n])
    }

    pub fn init<R: Rng>(
        src_space: Arc<SentenceSpace>,
        dst_space: Arc<SentenceSpace>,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let n = src_space.size() * dst_space.size();
        let logits = (0..n)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale)
            .collect();
        TabularModel::new(src_space, dst_space, logits)
    }

    /// Recovers logits from an exact table as ln p; zero entries become
    /// -inf logits, which round-trip through softmax but are not trainable.
    pub fn from_table(table: &ConditionalTable) -> Self {
        let (n_src, n_dst) = (table.n_src(), table.n_dst());
        let mut logits = Vec::with_capacity(n_src * n_dst);
        for i in 0..n_src {
            for j in 0..n_dst {
                logits.push(table.prob(i, j).ln());
            }
        }
        TabularModel::new(table.src_space().clone(), table.dst_space().clone(), logits)
    }

    pub fn src_space(&self) -> &Arc<SentenceSpace> {
        &self.src_space
    }

    pub fn dst_space(&self) -> &Arc<SentenceSpace> {
        &self.dst_space
    }

    pub fn param_len(&self) -> usize {
        self.logits.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.logits
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    fn n_dst(&self) -> usize {
        self.dst_space.size()
    }

    fn row_logits(&self, src_idx: usize) -> &[f64] {
        let n = self.n_dst();
        &self.logits[src_idx * n..(src_idx + 1) * n]
    }

    pub fn log_prob_idx(&self, src_idx: usize, dst_idx: usize) -> f64 {
        let row = self.row_logits(src_idx);
        row[dst_idx] - logsumexp(row)
    }

    pub fn conditional_row(&self, src_idx: usize) -> Vec<f64> {
        let row = self.row_logits(src_idx);
        let lse = logsumexp(row);
        row.iter().map(|&l| (l - lse).exp()).collect()
    }

    pub fn add_grad_log_prob(&self, src_idx: usize, dst_idx: usize, scale: f64, acc: &mut [f64]) {
        let n = self.n_dst();
        let probs = self.conditional_row(src_idx);
        let base = src_idx * n;
        for (j, &p) in probs.iter().enumerate() {
            let indicator = if j == dst_idx { 1.0 } else { 0.0 };
            acc[base + j] += scale * (indicator - p);
        }
    }

    pub fn decode_idx<R: Rng>(&self, src_idx: usize, mode: DecodeMode, rng: &mut R) -> Decoded {
        let row = self.row_logits(src_idx);
        let dst_idx = match mode {
            // The row is exact, so beam search of any width is the argmax;
            // ties break toward the lower space index.
            DecodeMode::Greedy | DecodeMode::Beam(_) => {
                let mut best = 0;
                for (j, &l) in row.iter().enumerate() {
                    if l > row[best] {
                        best = j;
                    }
                }
                best
            }
            DecodeMode::Sample => {
                let probs = self.conditional_row(src_idx);
                sample_index(&probs, rng)
            }
        };
        Decoded {
            dst_idx,
            log_prob: self.log_prob_idx(src_idx, dst_idx),
        }
    }

    pub fn materialize(&self) -> Result<ConditionalTable> {
        let rows: Vec<Vec<f64>> = (0..self.src_space.size())
            .map(|i| self.conditional_row(i))
            .collect();
        ConditionalTable::from_rows(self.src_space.clone(), self.dst_space.clone(), rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::letters;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spaces_12() -> (Arc<SentenceSpace>, Arc<SentenceSpace>) {
        // 3 symbols, max_len 2 -> 12 sentences on each side
        let s = SentenceSpace::enumerate(&letters(3), 2).unwrap();
        (s.clone(), s)
    }

    #[test]
    fn zero_logits_give_uniform_log_prob() {
        let (src, dst) = spaces_12();
        let m = TabularModel::zeros(src.clone(), dst.clone());
        for i in 0..src.size() {
            for j in 0..dst.size() {
                assert!((m.log_prob_idx(i, j) - (-2.484_906_649_788_000_4)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn greedy_picks_argmax_and_breaks_ties_low() {
        let (src, dst) = spaces_12();
        let mut m = TabularModel::zeros(src, dst);
        // Row 0: strict argmax at 7.
        m.params_mut()[7] = 2.0;
        // Row 1: exact tie between 4 and 9; the lower index must win.
        let n = 12;
        m.params_mut()[n + 4] = 3.0;
        m.params_mut()[n + 9] = 3.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(m.decode_idx(0, DecodeMode::Greedy, &mut rng).dst_idx, 7);
        assert_eq!(m.decode_idx(1, DecodeMode::Greedy, &mut rng).dst_idx, 4);
        assert_eq!(m.decode_idx(1, DecodeMode::Beam(3), &mut rng).dst_idx, 4);
    }

    #[test]
    fn from_table_round_trips_within_1e12() {
        let (src, dst) = spaces_12();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for _ in 0..src.size() {
            let w: Vec<f64> = (0..dst.size()).map(|_| rng.random::<f64>()).collect();
            let t: f64 = w.iter().sum();
            rows.push(w.into_iter().map(|x| x / t).collect());
        }
        // Include an exact zero to exercise the -inf logit path.
        let scale: f64 = 1.0 - rows[0][3];
        rows[0][3] = 0.0;
        for (j, v) in rows[0].iter_mut().enumerate() {
            if j != 3 {
                *v /= scale;
            }
        }
        let table = ConditionalTable::from_rows(src, dst, rows).unwrap();
        let refit = TabularModel::from_table(&table).materialize().unwrap();
        for i in 0..table.n_src() {
            for j in 0..table.n_dst() {
                assert!((refit.prob(i, j) - table.prob(i, j)).abs() < 1e-12);
            }
        }
        assert_eq!(refit.prob(0, 3), 0.0);
    }
}
