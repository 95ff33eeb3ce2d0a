//! Exact probability machinery over sentence spaces.
//!
//! Everything here is computed by direct summation over the enumerated space:
//! entropy, KL divergence, Bayes inversion, and mutual information. There is
//! no sampling and no approximation; these functions are the ground truth that
//! the rest of the crate is tested against.
//!
//! Conventions:
//! * all information quantities are in nats;
//! * `0 · ln 0` terms are dropped, never evaluated;
//! * a KL support violation (mass where the reference has none) returns
//!   `f64::INFINITY` as an explicit sentinel rather than an error;
//! * Bayes-posterior rows for outcomes with zero marginal mass are reported
//!   as undefined, never fabricated.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::space::{Sentence, SentenceSpace};

/// Tolerance for "sums to one" validation on distribution constructors.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Compensated (Kahan) sum; keeps long reductions accurate enough that
/// computed marginals re-validate under [`PROB_SUM_TOL`].
pub fn kahan_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let y = x - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

fn check_space(a: &SentenceSpace, b: &SentenceSpace, what: &str) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::SpaceMismatch(format!(
            "{what}: got {:?} vs {:?}",
            a, b
        )))
    }
}

fn check_probs(probs: &[f64], expected_len: usize, what: &str) -> Result<()> {
    if probs.len() != expected_len {
        return Err(Error::InvalidDistribution(format!(
            "{what}: {} entries for a space of size {expected_len}",
            probs.len()
        )));
    }
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "{what}: entry {i} is {p}"
            )));
        }
    }
    let total = kahan_sum(probs.iter().copied());
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{what}: sums to {total}, off by {}",
            total - 1.0
        )));
    }
    Ok(())
}

/// An exact distribution over one sentence space.
#[derive(Clone, Debug)]
pub struct Categorical {
    space: Arc<SentenceSpace>,
    probs: Vec<f64>,
}

impl Categorical {
    /// Validates that `probs` is a distribution over `space`.
    pub fn new(space: Arc<SentenceSpace>, probs: Vec<f64>) -> Result<Self> {
        check_probs(&probs, space.size(), "categorical")?;
        Ok(Categorical { space, probs })
    }

    pub fn uniform(space: Arc<SentenceSpace>) -> Self {
        let n = space.size();
        Categorical {
            space,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(space: Arc<SentenceSpace>, idx: usize) -> Result<Self> {
        if idx >= space.size() {
            return Err(Error::InvalidDistribution(format!(
                "point mass index {idx} out of range {}",
                space.size()
            )));
        }
        let mut probs = vec![0.0; space.size()];
        probs[idx] = 1.0;
        Ok(Categorical { space, probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(space: Arc<SentenceSpace>, weights: &[f64]) -> Result<Self> {
        if weights.len() != space.size() {
            return Err(Error::InvalidDistribution(format!(
                "{} weights for a space of size {}",
                weights.len(),
                space.size()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total = kahan_sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        let probs = weights.iter().map(|w| w / total).collect();
        Ok(Categorical { space, probs })
    }

    /// Empirical distribution of a corpus (duplicates allowed).
    pub fn empirical(space: Arc<SentenceSpace>, corpus: &[Sentence]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus("empirical distribution".into()));
        }
        let mut counts = vec![0.0; space.size()];
        for s in corpus {
            let idx = space.require_index(s)?;
            counts[idx] += 1.0;
        }
        Categorical::from_weights(space, &counts)
    }

    pub fn space(&self) -> &Arc<SentenceSpace> {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, idx: usize) -> f64 {
        self.probs[idx]
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }

    /// Inverse-CDF draw of a sentence index.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        sample_index(&self.probs, rng)
    }
}

/// Inverse-CDF draw from an unnormalized non-negative weight slice.
pub fn sample_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0, "sampling from all-zero weights");
    let mut u = rng.random::<f64>() * total;
    let mut last_nonzero = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_nonzero = i;
            if u < w {
                return i;
            }
            u -= w;
        }
    }
    // Rounding can exhaust u a hair past the final positive weight.
    last_nonzero
}

/// A row-stochastic table: one distribution over `dst_space` per sentence of
/// `src_space`. Stored flat, row-major.
#[derive(Clone, Debug)]
pub struct ConditionalTable {
    src_space: Arc<SentenceSpace>,
    dst_space: Arc<SentenceSpace>,
    probs: Vec<f64>,
}

impl ConditionalTable {
    pub fn new(
        src_space: Arc<SentenceSpace>,
        dst_space: Arc<SentenceSpace>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        let (n_src, n_dst) = (src_space.size(), dst_space.size());
        if probs.len() != n_src * n_dst {
            return Err(Error::InvalidDistribution(format!(
                "conditional table: {} entries for {n_src}x{n_dst}",
                probs.len()
            )));
        }
        for i in 0..n_src {
            check_probs(&probs[i * n_dst..(i + 1) * n_dst], n_dst, "conditional row")?;
        }
        Ok(ConditionalTable {
            src_space,
            dst_space,
            probs,
        })
    }

    pub fn from_rows(
        src_space: Arc<SentenceSpace>,
        dst_space: Arc<SentenceSpace>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if rows.len() != src_space.size() {
            return Err(Error::InvalidDistribution(format!(
                "conditional table: {} rows for a source space of size {}",
                rows.len(),
                src_space.size()
            )));
        }
        let probs = rows.into_iter().flatten().collect();
        ConditionalTable::new(src_space, dst_space, probs)
    }

    pub fn uniform(src_space: Arc<SentenceSpace>, dst_space: Arc<SentenceSpace>) -> Self {
        let (n_src, n_dst) = (src_space.size(), dst_space.size());
        ConditionalTable {
            src_space,
            dst_space,
            probs: vec![1.0 / n_dst as f64; n_src * n_dst],
        }
    }

    pub fn src_space(&self) -> &Arc<SentenceSpace> {
        &self.src_space
    }

    pub fn dst_space(&self) -> &Arc<SentenceSpace> {
        &self.dst_space
    }

    pub fn n_src(&self) -> usize {
        self.src_space.size()
    }

    pub fn n_dst(&self) -> usize {
        self.dst_space.size()
    }

    pub fn row(&self, src_idx: usize) -> &[f64] {
        let n = self.n_dst();
        &self.probs[src_idx * n..(src_idx + 1) * n]
    }

    pub fn prob(&self, src_idx: usize, dst_idx: usize) -> f64 {
        self.probs[src_idx * self.n_dst() + dst_idx]
    }
}

/// An exact joint distribution over a pair of spaces, row-major over
/// (src, dst).
#[derive(Clone, Debug)]
pub struct JointTable {
    src_space: Arc<SentenceSpace>,
    dst_space: Arc<SentenceSpace>,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(
        src_space: Arc<SentenceSpace>,
        dst_space: Arc<SentenceSpace>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        if probs.len() != src_space.size() * dst_space.size() {
            return Err(Error::InvalidDistribution(format!(
                "joint table: {} entries for {}x{}",
                probs.len(),
                src_space.size(),
                dst_space.size()
            )));
        }
        check_probs(&probs, probs.len(), "joint table")?;
        Ok(JointTable {
            src_space,
            dst_space,
            probs,
        })
    }

    /// Independent coupling q ⊗ p.
    pub fn from_product(q: &Categorical, p: &Categorical) -> Self {
        let mut probs = Vec::with_capacity(q.probs.len() * p.probs.len());
        for &qx in &q.probs {
            for &py in &p.probs {
                probs.push(qx * py);
            }
        }
        JointTable {
            src_space: q.space.clone(),
            dst_space: p.space.clone(),
            probs,
        }
    }

    pub fn src_space(&self) -> &Arc<SentenceSpace> {
        &self.src_space
    }

    pub fn dst_space(&self) -> &Arc<SentenceSpace> {
        &self.dst_space
    }

    pub fn n_src(&self) -> usize {
        self.src_space.size()
    }

    pub fn n_dst(&self) -> usize {
        self.dst_space.size()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, src_idx: usize) -> &[f64] {
        let n = self.n_dst();
        &self.probs[src_idx * n..(src_idx + 1) * n]
    }

    pub fn prob(&self, src_idx: usize, dst_idx: usize) -> f64 {
        self.probs[src_idx * self.n_dst() + dst_idx]
    }

    pub fn src_marginal(&self) -> Result<Categorical> {
        let sums: Vec<f64> = (0..self.n_src())
            .map(|i| kahan_sum(self.row(i).iter().copied()))
            .collect();
        Categorical::new(self.src_space.clone(), sums)
    }

    pub fn dst_marginal(&self) -> Result<Categorical> {
        let n_dst = self.n_dst();
        let sums: Vec<f64> = (0..n_dst)
            .map(|j| kahan_sum((0..self.n_src()).map(|i| self.probs[i * n_dst + j])))
            .collect();
        Categorical::new(self.dst_space.clone(), sums)
    }

    /// Mutual information of the coupling against its own marginals.
    pub fn mutual_information(&self) -> Result<f64> {
        let q = self.src_marginal()?;
        let p = self.dst_marginal()?;
        let n_dst = self.n_dst();
        let mut terms = Vec::with_capacity(self.probs.len());
        for i in 0..self.n_src() {
            for j in 0..n_dst {
                let pij = self.probs[i * n_dst + j];
                if pij > 0.0 {
                    terms.push(pij * (pij / (q.prob(i) * p.prob(j))).ln());
                }
            }
        }
        Ok(kahan_sum(terms))
    }
}

/// Bayes posterior rows, indexed by the destination sentence. Rows whose
/// marginal mass is zero are undefined, not fabricated.
#[derive(Clone, Debug)]
pub struct PosteriorTable {
    src_space: Arc<SentenceSpace>,
    dst_space: Arc<SentenceSpace>,
    rows: Vec<Option<Vec<f64>>>,
}

impl PosteriorTable {
    pub fn src_space(&self) -> &Arc<SentenceSpace> {
        &self.src_space
    }

    pub fn dst_space(&self) -> &Arc<SentenceSpace> {
        &self.dst_space
    }

    /// Posterior over sources given destination `dst_idx`, or None when the
    /// destination has zero marginal mass.
    pub fn row(&self, dst_idx: usize) -> Option<&[f64]> {
        self.rows[dst_idx].as_deref()
    }

    pub fn is_defined(&self, dst_idx: usize) -> bool {
        self.rows[dst_idx].is_some()
    }

    pub fn defined_count(&self) -> usize {
        self.rows.iter().filter(|r| r.is_some()).count()
    }

    /// Converts to a dst→src conditional table; errors if any row is
    /// undefined.
    pub fn to_conditional(&self) -> Result<ConditionalTable> {
        let mut rows = Vec::with_capacity(self.rows.len());
        for (j, row) in self.rows.iter().enumerate() {
            match row {
                Some(r) => rows.push(r.clone()),
                None => {
                    return Err(Error::InvalidDistribution(format!(
                        "posterior row {j} is undefined (zero marginal mass)"
                    )))
                }
            }
        }
        ConditionalTable::from_rows(self.dst_space.clone(), self.src_space.clone(), rows)
    }
}

/// Shannon entropy in nats; zero-probability terms contribute nothing.
pub fn entropy(d: &Categorical) -> f64 {
    entropy_of(&d.probs)
}

/// Entropy of a raw probability slice.
pub fn entropy_of(probs: &[f64]) -> f64 {
    kahan_sum(probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()))
}

/// KL(p ‖ q) in nats. Support violations return `f64::INFINITY`.
pub fn kl(p: &Categorical, q: &Categorical) -> Result<f64> {
    check_space(&p.space, &q.space, "kl divergence")?;
    Ok(kl_of(&p.probs, &q.probs))
}

/// KL over raw slices of equal length.
pub fn kl_of(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut terms = Vec::with_capacity(p.len());
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            terms.push(pi * (pi / qi).ln());
        }
    }
    kahan_sum(terms)
}

/// Pushes a prior through a conditional: returns the destination marginal and
/// the Bayes posterior dst→src.
pub fn marginal_and_posterior(
    cond: &ConditionalTable,
    prior: &Categorical,
) -> Result<(Categorical, PosteriorTable)> {
    check_space(&cond.src_space, &prior.space, "marginal_and_posterior prior")?;
    let (n_src, n_dst) = (cond.n_src(), cond.n_dst());
    let marg: Vec<f64> = (0..n_dst)
        .map(|j| kahan_sum((0..n_src).map(|i| prior.probs[i] * cond.prob(i, j))))
        .collect();

    let mut rows = Vec::with_capacity(n_dst);
    for j in 0..n_dst {
        if marg[j] > 0.0 {
            let row: Vec<f64> = (0..n_src)
                .map(|i| prior.probs[i] * cond.prob(i, j) / marg[j])
                .collect();
            rows.push(Some(row));
        } else {
            rows.push(None);
        }
    }

    let marginal = Categorical::new(cond.dst_space.clone(), marg)?;
    let posterior = PosteriorTable {
        src_space: cond.src_space.clone(),
        dst_space: cond.dst_space.clone(),
        rows,
    };
    Ok((marginal, posterior))
}

/// Destination marginal only (no posterior).
pub fn push_forward(cond: &ConditionalTable, prior: &Categorical) -> Result<Categorical> {
    check_space(&cond.src_space, &prior.space, "push_forward prior")?;
    let (n_src, n_dst) = (cond.n_src(), cond.n_dst());
    let marg: Vec<f64> = (0..n_dst)
        .map(|j| kahan_sum((0..n_src).map(|i| prior.probs[i] * cond.prob(i, j))))
        .collect();
    Categorical::new(cond.dst_space.clone(), marg)
}

/// I(X;Y) of the channel `cond` driven by `prior`, as the prior-weighted KL
/// of each row against the output marginal.
pub fn mutual_information_exact(cond: &ConditionalTable, prior: &Categorical) -> Result<f64> {
    check_space(&cond.src_space, &prior.space, "mutual information prior")?;
    let marginal = push_forward(cond, prior)?;
    let mut terms = Vec::new();
    for i in 0..cond.n_src() {
        let px = prior.probs[i];
        if px == 0.0 {
            continue;
        }
        let row = cond.row(i);
        for (j, &c) in row.iter().enumerate() {
            if c > 0.0 {
                terms.push(px * c * (c / marginal.prob(j)).ln());
            }
        }
    }
    Ok(kahan_sum(terms))
}

/// Largest mutual information any coupling of the two marginals can achieve:
/// min(H(q), H(p)).
pub fn max_mi_bound(q: &Categorical, p: &Categorical) -> f64 {
    entropy(q).min(entropy(p))
}
