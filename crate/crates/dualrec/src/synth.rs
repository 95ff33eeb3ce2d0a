//! Synthetic translation tasks with exactly known ground truth.
//!
//! The task family is the noisy substitution cipher: a bijection between two
//! equal-size alphabets applied position-wise, where each output symbol
//! survives with probability 1 − eps and is otherwise replaced uniformly by
//! one of the remaining symbols. The channel preserves length, so the joint
//! distribution is block-diagonal by length and every quantity of interest —
//! the true conditional, its exact Bayes inverse, both marginals, and the
//! channel mutual information — has a closed form that the enumeration-based
//! machinery can be checked against.
//!
//! Because the per-symbol kernel is doubly stochastic, the destination
//! marginal has the same shape as the source prior: probability
//! length_dist[L] / |A|^L for any sentence of length L.

use crate::dist::{kahan_sum, kl, push_forward, Categorical, ConditionalTable, JointTable};
use crate::error::{Error, Result};
use crate::model::{DecodeMode, Model};
use crate::space::{Sentence, SentenceSpace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::sync::Arc;

/// Largest joint table (in cells) that ground-truth construction will
/// materialize.
pub const MAX_JOINT_CELLS: usize = 8_000_000;

/// Declarative description of a cipher task.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub src_alphabet: Vec<String>,
    pub dst_alphabet: Vec<String>,
    /// Maps each source symbol index to its enciphered destination index.
    pub permutation: Vec<usize>,
    /// Per-symbol corruption probability, in [0, 1).
    pub noise_eps: f64,
    /// Probability of each sentence length 1..=max_len; every entry must be
    /// positive so the exact inverse channel is defined on the whole space.
    pub length_dist: Vec<f64>,
    pub seed: u64,
}

impl TaskSpec {
    pub fn max_len(&self) -> usize {
        self.length_dist.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.src_alphabet.len();
        if n == 0 || self.dst_alphabet.len() != n {
            return Err(Error::InvalidConfig(format!(
                "alphabets must be nonempty and equal-size, got {} and {}",
                n,
                self.dst_alphabet.len()
            )));
        }
        if self.permutation.len() != n {
            return Err(Error::InvalidConfig(format!(
                "permutation length {} does not cover the alphabet of {n}",
                self.permutation.len()
            )));
        }
        let mut seen = vec![false; n];
        for &t in &self.permutation {
            if t >= n || seen[t] {
                return Err(Error::InvalidConfig(format!(
                    "permutation is not a bijection (offending target {t})"
                )));
            }
            seen[t] = true;
        }
        if !(0.0..1.0).contains(&self.noise_eps) {
            return Err(Error::InvalidConfig(format!(
                "noise_eps must lie in [0, 1), got {}",
                self.noise_eps
            )));
        }
        if n == 1 && self.noise_eps > 0.0 {
            return Err(Error::InvalidConfig(
                "a single-symbol alphabet leaves no room for corruption; use noise_eps = 0"
                    .into(),
            ));
        }
        if self.length_dist.is_empty() {
            return Err(Error::InvalidDistribution("empty length distribution".into()));
        }
        for &w in &self.length_dist {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "length probabilities must be positive and finite, got {w}"
                )));
            }
        }
        let total = kahan_sum(self.length_dist.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "length distribution sums to {total}"
            )));
        }
        Ok(())
    }
}

/// Exact distributional description of a task: the joint, both conditionals,
/// and both marginals, all mutually consistent within 1e-12.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub spec: TaskSpec,
    pub src_space: Arc<SentenceSpace>,
    pub dst_space: Arc<SentenceSpace>,
    pub true_conditional: ConditionalTable,
    /// Exact Bayes inverse of the channel under `prior_q`.
    pub true_inverse: ConditionalTable,
    pub prior_q: Categorical,
    pub prior_p: Categorical,
    pub joint: JointTable,
    /// Closed-form channel MI: H(length) + E[length] · (ln |A| − H_row).
    pub channel_mi: f64,
}

/// Closed-form mutual information of the cipher channel under its own prior.
pub fn channel_mi_closed_form(spec: &TaskSpec) -> f64 {
    let n = spec.src_alphabet.len() as f64;
    let eps = spec.noise_eps;
    let h_row = if eps == 0.0 {
        0.0
    } else {
        -(1.0 - eps) * (1.0 - eps).ln() - eps * (eps / (n - 1.0)).ln()
    };
    let mut h_len = 0.0;
    let mut e_len = 0.0;
    for (i, &w) in spec.length_dist.iter().enumerate() {
        h_len -= w * w.ln();
        e_len += w * (i + 1) as f64;
    }
    h_len + e_len * (n.ln() - h_row)
}

/// Sentence prior induced by a length distribution with i.i.d. uniform
/// symbols given the length.
fn length_prior(space: &Arc<SentenceSpace>, length_dist: &[f64]) -> Result<Categorical> {
    let n = space.alphabet_size() as f64;
    let probs: Vec<f64> = space
        .sentences()
        .iter()
        .map(|s| length_dist[s.len() - 1] / n.powi(s.len() as i32))
        .collect();
    Categorical::new(space.clone(), probs)
}

/// Materializes the exact channel tables for a task.
pub fn build_ground_truth(spec: &TaskSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let max_len = spec.max_len();
    let src_space = SentenceSpace::enumerate(&spec.src_alphabet, max_len)?;
    let dst_space = SentenceSpace::enumerate(&spec.dst_alphabet, max_len)?;
    let cells = src_space.size() * dst_space.size();
    if cells > MAX_JOINT_CELLS {
        return Err(Error::SupportTooLarge {
            found: cells,
            cap: MAX_JOINT_CELLS,
        });
    }

    let n = spec.src_alphabet.len();
    let eps = spec.noise_eps;
    let off = if n > 1 { eps / (n - 1) as f64 } else { 0.0 };
    // Per-symbol kernel: destination d given source c.
    let kernel = |c: usize, d: usize| -> f64 {
        if spec.permutation[c] == d {
            1.0 - eps
        } else {
            off
        }
    };

    let n_dst = dst_space.size();
    let mut rows = Vec::with_capacity(src_space.size());
    for x in src_space.sentences() {
        let mut row = vec![0.0_f64; n_dst];
        for (yi, y) in dst_space.sentences().iter().enumerate() {
            if y.len() != x.len() {
                continue;
            }
            let mut p = 1.0;
            for (cs, ds) in x.symbols().iter().zip(y.symbols()) {
                p *= kernel(*cs as usize, *ds as usize);
            }
            row[yi] = p;
        }
        // Rows sum to 1 analytically; dividing by the computed sum only
        // absorbs float rounding.
        let z = kahan_sum(row.iter().copied());
        for v in &mut row {
            *v /= z;
        }
        rows.push(row);
    }
    let true_conditional = ConditionalTable::from_rows(src_space.clone(), dst_space.clone(), rows)?;

    let prior_q = length_prior(&src_space, &spec.length_dist)?;
    let mut joint_probs = Vec::with_capacity(cells);
    for (xi, _) in src_space.sentences().iter().enumerate() {
        let qx = prior_q.prob(xi);
        joint_probs.extend(true_conditional.row(xi).iter().map(|&c| qx * c));
    }
    let joint = JointTable::new(src_space.clone(), dst_space.clone(), joint_probs)?;
    let prior_p = joint.dst_marginal()?;

    // Exact Bayes inverse: every destination sentence has positive marginal
    // mass (positive length probabilities, eps < 1), so all rows are defined.
    let (_, posterior) = crate::dist::marginal_and_posterior(&true_conditional, &prior_q)?;
    let true_inverse = posterior.to_conditional()?;

    Ok(GroundTruth {
        channel_mi: channel_mi_closed_form(spec),
        spec: spec.clone(),
        src_space,
        dst_space,
        true_conditional,
        true_inverse,
        prior_q,
        prior_p,
        joint,
    })
}

/// How many sentences or pairs to draw for each split.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct CorpusSizes {
    pub parallel: usize,
    pub mono_x: usize,
    pub mono_y: usize,
    pub validation: usize,
    pub test: usize,
}

/// Sampled corpora. Monolingual sides are drawn independently (never aligned
/// with each other), and the three pair splits are mutually disjoint at the
/// pair level.
#[derive(Clone, Debug)]
pub struct Corpora {
    pub parallel: Vec<(Sentence, Sentence)>,
    pub mono_x: Vec<Sentence>,
    pub mono_y: Vec<Sentence>,
    pub validation: Vec<(Sentence, Sentence)>,
    pub test: Vec<(Sentence, Sentence)>,
}

/// Draws all corpus splits from the exact joint, deterministically per seed.
pub fn sample_corpora(gt: &GroundTruth, sizes: &CorpusSizes, seed: u64) -> Result<Corpora> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw_pair = |rng: &mut ChaCha8Rng| -> (usize, usize) {
        let xi = gt.prior_q.sample(rng);
        let yi = crate::dist::sample_index(gt.true_conditional.row(xi), rng);
        (xi, yi)
    };
    let to_pair = |(xi, yi): (usize, usize)| -> (Sentence, Sentence) {
        (
            gt.src_space.sentence(xi).clone(),
            gt.dst_space.sentence(yi).clone(),
        )
    };

    let mut used: HashSet<(usize, usize)> = HashSet::new();
    let mut parallel = Vec::with_capacity(sizes.parallel);
    for _ in 0..sizes.parallel {
        let pair = draw_pair(&mut rng);
        used.insert(pair);
        parallel.push(to_pair(pair));
    }

    let mono_x: Vec<Sentence> = (0..sizes.mono_x)
        .map(|_| gt.src_space.sentence(gt.prior_q.sample(&mut rng)).clone())
        .collect();
    let mono_y: Vec<Sentence> = (0..sizes.mono_y)
        .map(|_| gt.dst_space.sentence(gt.prior_p.sample(&mut rng)).clone())
        .collect();

    // Held-out splits are resampled until they avoid every pair already
    // claimed by an earlier split.
    let draw_fresh = |rng: &mut ChaCha8Rng,
                          used: &HashSet<(usize, usize)>|
     -> Result<(usize, usize)> {
        for _ in 0..10_000 {
            let pair = draw_pair(rng);
            if !used.contains(&pair) {
                return Ok(pair);
            }
        }
        Err(Error::InvalidConfig(
            "could not draw a held-out pair disjoint from earlier splits; \
             the joint support is too small for the requested sizes"
                .into(),
        ))
    };
    let mut validation = Vec::with_capacity(sizes.validation);
    let mut val_set = HashSet::new();
    for _ in 0..sizes.validation {
        let pair = draw_fresh(&mut rng, &used)?;
        val_set.insert(pair);
        validation.push(to_pair(pair));
    }
    used.extend(val_set);
    let mut test = Vec::with_capacity(sizes.test);
    for _ in 0..sizes.test {
        let pair = draw_fresh(&mut rng, &used)?;
        test.push(to_pair(pair));
    }

    Ok(Corpora {
        parallel,
        mono_x,
        mono_y,
        validation,
        test,
    })
}

/// Exact and decoded quality metrics against the ground truth.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    /// Fraction of aligned token positions the beam decode got right,
    /// averaged over pairs (positions / max of the two lengths).
    pub token_accuracy: f64,
    /// Mean over test sources of −Σ_y true(y|x) ln model(y|x); floored at
    /// the channel's own conditional entropy.
    pub mean_cross_entropy: f64,
    /// KL(model marginal under q ‖ true p): the marginal-matching
    /// diagnostic.
    pub marginal_kl: f64,
    /// Smoothed corpus n-gram overlap (order 4, add-1), in [0, 1].
    pub ngram_overlap: f64,
}

fn ngram_counts(s: &Sentence, k: usize) -> Vec<&[u16]> {
    let sym = s.symbols();
    if sym.len() < k {
        return Vec::new();
    }
    (0..=sym.len() - k).map(|i| &sym[i..i + k]).collect()
}

/// Order-4 add-1-smoothed geometric-mean n-gram precision with a brevity
/// penalty. A coarse overlap score, not a calibrated quality metric.
pub fn corpus_ngram_overlap(pairs: &[(Sentence, Sentence)]) -> f64 {
    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;
    let mut log_precisions = 0.0;
    for k in 1..=4 {
        let mut matches = 0usize;
        let mut total = 0usize;
        for (hyp, reference) in pairs {
            if k == 1 {
                hyp_len += hyp.len();
                ref_len += reference.len();
            }
            let hgrams = ngram_counts(hyp, k);
            let rgrams = ngram_counts(reference, k);
            total += hgrams.len();
            let mut avail: Vec<&[u16]> = rgrams;
            for g in hgrams {
                if let Some(pos) = avail.iter().position(|r| *r == g) {
                    avail.swap_remove(pos);
                    matches += 1;
                }
            }
        }
        log_precisions += (((matches + 1) as f64) / ((total + 1) as f64)).ln();
    }
    let brevity = if hyp_len >= ref_len || hyp_len == 0 {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    brevity * (log_precisions / 4.0).exp()
}

/// Evaluates a source→destination model against the exact channel.
pub fn oracle_eval(
    model: &Model,
    gt: &GroundTruth,
    test_pairs: &[(Sentence, Sentence)],
    eval_beam: usize,
) -> Result<EvalReport> {
    if test_pairs.is_empty() {
        return Err(Error::EmptyCorpus("oracle evaluation".into()));
    }
    if !model.src_space().same_as(&gt.src_space) || !model.dst_space().same_as(&gt.dst_space) {
        return Err(Error::SpaceMismatch(
            "oracle evaluation expects a source→destination model on the task spaces".into(),
        ));
    }
    // Beam decoding is deterministic; the generator is only a signature
    // requirement of the decode entry point.
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let mut correct = 0.0;
    let mut decoded_pairs = Vec::with_capacity(test_pairs.len());
    let mut ce_terms = Vec::with_capacity(test_pairs.len());
    for (x, y) in test_pairs {
        let xi = gt.src_space.require_index(x)?;
        let decoded = model.decode_idx(xi, DecodeMode::Beam(eval_beam), &mut rng)?;
        let hyp = gt.dst_space.sentence(decoded.dst_idx).clone();
        let matches = hyp
            .symbols()
            .iter()
            .zip(y.symbols())
            .filter(|(a, b)| a == b)
            .count();
        correct += matches as f64 / hyp.len().max(y.len()) as f64;

        let true_row = gt.true_conditional.row(xi);
        let model_row = model.conditional_row(xi);
        let mut ce = 0.0;
        for (yi, &t) in true_row.iter().enumerate() {
            if t > 0.0 {
                let m = model_row[yi];
                if m == 0.0 {
                    ce = f64::INFINITY;
                    break;
                }
                ce -= t * m.ln();
            }
        }
        ce_terms.push(ce);
        decoded_pairs.push((hyp, y.clone()));
    }

    let model_cond = model.materialize()?;
    let model_marginal = push_forward(&model_cond, &gt.prior_q)?;
    let marginal_kl = kl(&model_marginal, &gt.prior_p)?;

    Ok(EvalReport {
        token_accuracy: correct / test_pairs.len() as f64,
        mean_cross_entropy: kahan_sum(ce_terms.iter().copied()) / test_pairs.len() as f64,
        marginal_kl,
        ngram_overlap: corpus_ngram_overlap(&decoded_pairs),
    })
}

fn uppercase(alphabet: &[String]) -> Vec<String> {
    alphabet.iter().map(|s| s.to_uppercase()).collect()
}

/// Six symbols, lengths 1..=4 skewed long, 10% noise, 200 parallel pairs and
/// 2000 sentences per monolingual side.
pub fn low_resource_preset() -> (TaskSpec, CorpusSizes) {
    let src = crate::space::letters(6);
    let spec = TaskSpec {
        dst_alphabet: uppercase(&src),
        src_alphabet: src,
        permutation: vec![3, 0, 5, 2, 1, 4],
        noise_eps: 0.1,
        length_dist: vec![0.1, 0.2, 0.3, 0.4],
        seed: 0,
    };
    let sizes = CorpusSizes {
        parallel: 200,
        mono_x: 2000,
        mono_y: 2000,
        validation: 200,
        test: 500,
    };
    (spec, sizes)
}

/// Same task with ten times the parallel data.
pub fn high_resource_preset() -> (TaskSpec, CorpusSizes) {
    let (spec, mut sizes) = low_resource_preset();
    sizes.parallel = 2000;
    (spec, sizes)
}

/// Same channel, but training draws lengths skewed short while the returned
/// second spec skews long — evaluate models from the first task on corpora
/// from the second.
pub fn cross_domain_preset() -> (TaskSpec, TaskSpec, CorpusSizes) {
    let (mut train, sizes) = low_resource_preset();
    train.length_dist = vec![0.4, 0.3, 0.2, 0.1];
    let mut test = train.clone();
    test.length_dist = vec![0.1, 0.2, 0.3, 0.4];
    (train, test, sizes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{entropy, mutual_information_exact};
    use crate::model::TabularModel;
    use crate::space::letters;

    fn small_spec(eps: f64) -> TaskSpec {
        let src = letters(4);
        TaskSpec {
            dst_alphabet: uppercase(&src),
            src_alphabet: src,
            permutation: vec![2, 0, 3, 1],
            noise_eps: eps,
            length_dist: vec![0.3, 0.7],
            seed: 7,
        }
    }

    #[test]
    fn noiseless_cipher_is_deterministic_with_mi_equal_to_source_entropy() {
        let gt = build_ground_truth(&small_spec(0.0)).unwrap();
        for xi in 0..gt.src_space.size() {
            let live: Vec<usize> = (0..gt.dst_space.size())
                .filter(|&yi| gt.true_conditional.prob(xi, yi) > 0.0)
                .collect();
            assert_eq!(live.len(), 1);
            assert_eq!(gt.true_conditional.prob(xi, live[0]), 1.0);
        }
        let mi = mutual_information_exact(&gt.true_conditional, &gt.prior_q).unwrap();
        assert!((mi - entropy(&gt.prior_q)).abs() < 1e-9);
        assert!((gt.channel_mi - entropy(&gt.prior_q)).abs() < 1e-12);
    }

    #[test]
    fn fully_scrambled_single_length_channel_carries_no_information() {
        let src = letters(4);
        let spec = TaskSpec {
            dst_alphabet: uppercase(&src),
            src_alphabet: src,
            permutation: vec![0, 1, 2, 3],
            noise_eps: 0.75, // (|A|−1)/|A|
            length_dist: vec![1.0],
            seed: 0,
        };
        let gt = build_ground_truth(&spec).unwrap();
        for xi in 0..gt.src_space.size() {
            for yi in 0..gt.dst_space.size() {
                assert!((gt.true_conditional.prob(xi, yi) - 0.25).abs() < 1e-15);
            }
        }
        let mi = mutual_information_exact(&gt.true_conditional, &gt.prior_q).unwrap();
        assert!(mi.abs() < 1e-12);
        assert!(gt.channel_mi.abs() < 1e-12);
    }

    #[test]
    fn closed_form_mi_matches_exact_enumeration_on_the_preset() {
        let (spec, _) = low_resource_preset();
        let gt = build_ground_truth(&spec).unwrap();
        let mi = mutual_information_exact(&gt.true_conditional, &gt.prior_q).unwrap();
        assert!(
            (mi - gt.channel_mi).abs() < 1e-9,
            "enumerated {mi} vs closed form {}",
            gt.channel_mi
        );
        // H(length) ≈ 1.2799 plus 3.0 expected symbols × ≈ 1.3057 nats each.
        assert!(gt.channel_mi > 5.19 && gt.channel_mi < 5.21);
    }

    #[test]
    fn joint_marginals_match_the_stored_priors_and_the_length_formula() {
        let gt = build_ground_truth(&small_spec(0.2)).unwrap();
        let src_m = gt.joint.src_marginal().unwrap();
        let dst_m = gt.joint.dst_marginal().unwrap();
        for i in 0..gt.src_space.size() {
            assert!((src_m.prob(i) - gt.prior_q.prob(i)).abs() < 1e-12);
        }
        let n = 4.0_f64;
        for (yi, y) in gt.dst_space.sentences().iter().enumerate() {
            assert!((dst_m.prob(yi) - gt.prior_p.prob(yi)).abs() < 1e-12);
            let expect = gt.spec.length_dist[y.len() - 1] / n.powi(y.len() as i32);
            assert!((gt.prior_p.prob(yi) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_preserves_length() {
        let gt = build_ground_truth(&small_spec(0.3)).unwrap();
        for (xi, x) in gt.src_space.sentences().iter().enumerate() {
            for (yi, y) in gt.dst_space.sentences().iter().enumerate() {
                if gt.true_conditional.prob(xi, yi) > 0.0 {
                    assert_eq!(x.len(), y.len());
                }
            }
        }
    }

    #[test]
    fn noiseless_inverse_is_the_deciphering_map() {
        let gt = build_ground_truth(&small_spec(0.0)).unwrap();
        // permutation [2,0,3,1]: src c enciphers to dst perm[c], so each
        // single-symbol destination must invert to its unique preimage.
        for (yi, y) in gt.dst_space.sentences().iter().enumerate() {
            if y.len() != 1 {
                continue;
            }
            let d = y.symbols()[0] as usize;
            let c = gt.spec.permutation.iter().position(|&t| t == d).unwrap();
            let expect_x = gt
                .src_space
                .index_of(&Sentence::new(vec![c as u16]))
                .unwrap();
            assert_eq!(gt.true_inverse.prob(yi, expect_x), 1.0);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed_and_splits_are_disjoint() {
        let gt = build_ground_truth(&small_spec(0.1)).unwrap();
        let sizes = CorpusSizes {
            parallel: 50,
            mono_x: 80,
            mono_y: 80,
            validation: 30,
            test: 40,
        };
        let a = sample_corpora(&gt, &sizes, 5).unwrap();
        let b = sample_corpora(&gt, &sizes, 5).unwrap();
        assert_eq!(a.parallel, b.parallel);
        assert_eq!(a.mono_x, b.mono_x);
        assert_eq!(a.mono_y, b.mono_y);
        assert_eq!(a.test, b.test);
        let c = sample_corpora(&gt, &sizes, 6).unwrap();
        assert_ne!(a.parallel, c.parallel);

        let train: HashSet<_> = a.parallel.iter().collect();
        let val: HashSet<_> = a.validation.iter().collect();
        for pair in &a.validation {
            assert!(!train.contains(pair));
        }
        for pair in &a.test {
            assert!(!train.contains(pair) && !val.contains(pair));
        }
        assert_eq!(a.parallel.len(), 50);
        assert_eq!(a.test.len(), 40);
    }

    #[test]
    fn mono_destination_frequencies_converge_to_the_marginal() {
        let gt = build_ground_truth(&small_spec(0.1)).unwrap();
        let sizes = CorpusSizes {
            parallel: 0,
            mono_x: 0,
            mono_y: 100_000,
            validation: 0,
            test: 0,
        };
        let corpora = sample_corpora(&gt, &sizes, 9).unwrap();
        let mut counts = vec![0usize; gt.dst_space.size()];
        for y in &corpora.mono_y {
            counts[gt.dst_space.index_of(y).unwrap()] += 1;
        }
        let l1: f64 = counts
            .iter()
            .enumerate()
            .map(|(yi, &c)| (c as f64 / 100_000.0 - gt.prior_p.prob(yi)).abs())
            .sum();
        assert!(l1 < 0.02, "L1 distance {l1}");
    }

    #[test]
    fn true_model_achieves_the_entropy_floor_and_zero_marginal_kl() {
        let gt = build_ground_truth(&small_spec(0.1)).unwrap();
        let sizes = CorpusSizes {
            parallel: 0,
            mono_x: 0,
            mono_y: 0,
            validation: 0,
            test: 300,
        };
        let corpora = sample_corpora(&gt, &sizes, 3).unwrap();
        let truth = Model::Tabular(TabularModel::from_table(&gt.true_conditional));
        let report = oracle_eval(&truth, &gt, &corpora.test, 5).unwrap();

        // Floor: mean conditional entropy of the true rows over the test set.
        let mut floor = 0.0;
        for (x, _) in &corpora.test {
            let xi = gt.src_space.require_index(x).unwrap();
            floor += crate::dist::entropy_of(gt.true_conditional.row(xi));
        }
        floor /= corpora.test.len() as f64;
        assert!((report.mean_cross_entropy - floor).abs() < 1e-10);
        assert!(report.marginal_kl < 1e-12);
        // Decodes apply the cipher's mode; references keep 90% of symbols.
        assert!(report.token_accuracy > 0.8 && report.token_accuracy < 0.98);
        assert!(report.ngram_overlap > 0.5);
    }

    #[test]
    fn length_matched_uniform_model_scores_chance_accuracy() {
        let gt = build_ground_truth(&small_spec(0.1)).unwrap();
        let sizes = CorpusSizes {
            parallel: 0,
            mono_x: 0,
            mono_y: 0,
            validation: 0,
            test: 500,
        };
        let corpora = sample_corpora(&gt, &sizes, 4).unwrap();
        // Uniform over same-length destinations: chance per position is
        // 1/|alphabet| with aligned lengths.
        let rows: Vec<Vec<f64>> = gt
            .src_space
            .sentences()
            .iter()
            .map(|x| {
                let live: Vec<usize> = (0..gt.dst_space.size())
                    .filter(|&yi| gt.dst_space.sentence(yi).len() == x.len())
                    .collect();
                let w = 1.0 / live.len() as f64;
                let mut row = vec![0.0; gt.dst_space.size()];
                for yi in live {
                    row[yi] = w;
                }
                row
            })
            .collect();
        let table =
            ConditionalTable::from_rows(gt.src_space.clone(), gt.dst_space.clone(), rows).unwrap();
        let model = Model::Tabular(TabularModel::from_table(&table));
        let report = oracle_eval(&model, &gt, &corpora.test, 5).unwrap();
        assert!(
            (report.token_accuracy - 0.25).abs() < 0.05,
            "chance accuracy came out {}",
            report.token_accuracy
        );
        let truth = Model::Tabular(TabularModel::from_table(&gt.true_conditional));
        let truth_report = oracle_eval(&truth, &gt, &corpora.test, 5).unwrap();
        assert!(truth_report.ngram_overlap > report.ngram_overlap);
    }

    #[test]
    fn identical_corpora_overlap_perfectly() {
        let gt = build_ground_truth(&small_spec(0.1)).unwrap();
        let pairs: Vec<(Sentence, Sentence)> = gt
            .dst_space
            .sentences()
            .iter()
            .map(|y| (y.clone(), y.clone()))
            .collect();
        assert_eq!(corpus_ngram_overlap(&pairs), 1.0);
    }

    #[test]
    fn spec_validation_rejects_malformed_tasks() {
        let mut bad = small_spec(0.1);
        bad.permutation = vec![0, 0, 3, 1];
        assert!(build_ground_truth(&bad).is_err());

        let mut bad = small_spec(0.1);
        bad.noise_eps = 1.0;
        assert!(build_ground_truth(&bad).is_err());

        let mut bad = small_spec(0.1);
        bad.length_dist = vec![0.5, 0.0, 0.5];
        assert!(build_ground_truth(&bad).is_err());

        let mut bad = small_spec(0.1);
        bad.dst_alphabet.pop();
        assert!(build_ground_truth(&bad).is_err());

        let src = letters(1);
        let one = TaskSpec {
            dst_alphabet: uppercase(&src),
            src_alphabet: src,
            permutation: vec![0],
            noise_eps: 0.1,
            length_dist: vec![1.0],
            seed: 0,
        };
        assert!(build_ground_truth(&one).is_err());
    }

    #[test]
    fn task_spec_round_trips_through_json() {
        let (spec, sizes) = low_resource_preset();
        let js = serde_json::to_string(&spec).unwrap();
        let back: TaskSpec = serde_json::from_str(&js).unwrap();
        assert_eq!(back, spec);
        let js = serde_json::to_string(&sizes).unwrap();
        let back: CorpusSizes = serde_json::from_str(&js).unwrap();
        assert_eq!(back, sizes);
    }
}
