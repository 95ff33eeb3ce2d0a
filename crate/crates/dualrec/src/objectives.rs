//! Exact training objectives over materialized conditionals.
//!
//! Every function here is a finite double (or single) sum over sentence
//! spaces. The dual reconstruction objective J_dual = J1 + J2 couples two
//! conditionals through each other's inference direction:
//!
//! * J1: expected reconstruction log-likelihood of destination sentences
//!   through the inference model, E_{y~p} E_{x~q_phi(x|y)} ln p_theta(y|x);
//! * J2: the mirror image, E_{x~q} E_{y~p_theta(y|x)} ln q_phi(x|y).
//!
//! J1 decomposes exactly as I(q_phi) − H(p) − KL(q_phi(x|y) p(y) ‖
//! p_theta(y|x) q_phi(x)), which bounds it by I(q_phi) − H(p); the symmetric
//! statement holds for J2. Those two bounds give the ceiling computed by
//! [`dual_upper_bound`], and [`j1_decomposition`] exposes all three pieces so
//! tests can check the identity to machine precision.
//!
//! Sentinels: a reconstruction probability of zero under a supported
//! inference pair sends an objective to -inf (with the first offending pair
//! reported), never to an error; errors are reserved for structural problems
//! such as mismatched spaces.

use crate::dist::{
    entropy, kahan_sum, mutual_information_exact, push_forward, Categorical, ConditionalTable,
};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::space::Sentence;

/// Mutual-information box constraint for penalized training and bound
/// evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MiConstraint {
    i_min: f64,
    i_max: f64,
}

impl MiConstraint {
    pub fn new(i_min: f64, i_max: f64) -> Result<Self> {
        if !(0.0 <= i_min && i_min <= i_max) || !i_max.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "mi constraint needs 0 <= i_min <= i_max < inf, got [{i_min}, {i_max}]"
            )));
        }
        Ok(MiConstraint { i_min, i_max })
    }

    pub fn max_only(i_max: f64) -> Result<Self> {
        MiConstraint::new(0.0, i_max)
    }

    pub fn i_min(&self) -> f64 {
        self.i_min
    }

    pub fn i_max(&self) -> f64 {
        self.i_max
    }
}

/// The three exact pieces of the J1 identity; `value()` reassembles them.
#[derive(Clone, Copy, Debug)]
pub struct J1Decomposition {
    pub mutual_information: f64,
    pub prior_entropy: f64,
    pub joint_kl: f64,
}

impl J1Decomposition {
    pub fn value(&self) -> f64 {
        self.mutual_information - self.prior_entropy - self.joint_kl
    }
}

/// Both halves of the dual objective with their decompositions.
#[derive(Clone, Debug)]
pub struct ObjectiveReport {
    pub j1: f64,
    pub j2: f64,
    pub j_dual: f64,
    pub decomp_j1: J1Decomposition,
    pub decomp_j2: J1Decomposition,
    /// First (dst, src) pair where the inference weight was positive but the
    /// reconstruction probability zero, if any.
    pub violation_j1: Option<(usize, usize)>,
    /// First (src, dst) pair, symmetric direction.
    pub violation_j2: Option<(usize, usize)>,
}

/// Mean exact log-likelihood of a parallel corpus under a model.
pub fn supervised_objective(model: &Model, pairs: &[(Sentence, Sentence)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus("supervised objective".into()));
    }
    let mut total = 0.0;
    for (x, y) in pairs {
        total += model.log_prob(x, y)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Same, over pre-resolved space indices.
pub fn supervised_objective_idx(model: &Model, pairs: &[(usize, usize)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus("supervised objective".into()));
    }
    let total = kahan_sum(pairs.iter().map(|&(xi, yi)| model.log_prob_idx(xi, yi)));
    Ok(total / pairs.len() as f64)
}

/// Expected marginal log-likelihood of the target distribution under the
/// model-induced destination marginal: E_{y~target} ln Σ_x q(x) cond(y|x).
/// Returns -inf if the target supports a destination the marginal misses.
pub fn marginal_log_likelihood(
    cond: &ConditionalTable,
    prior_q: &Categorical,
    target_p: &Categorical,
) -> Result<f64> {
    if !cond.dst_space().same_as(target_p.space()) {
        return Err(Error::SpaceMismatch(
            "marginal_log_likelihood target lives on the conditional's destination space".into(),
        ));
    }
    let marginal = push_forward(cond, prior_q)?;
    let mut terms = Vec::new();
    for (y, &py) in target_p.probs().iter().enumerate() {
        if py > 0.0 {
            let m = marginal.prob(y);
            if m == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            terms.push(py * m.ln());
        }
    }
    Ok(kahan_sum(terms))
}

/// Exact ln p(y) under the joint prior_q ⊗ cond.
pub fn log_marginal(cond: &ConditionalTable, prior_q: &Categorical, y_idx: usize) -> Result<f64> {
    if !cond.src_space().same_as(prior_q.space()) {
        return Err(Error::SpaceMismatch("log_marginal prior".into()));
    }
    let m = kahan_sum(
        (0..cond.n_src()).map(|x| prior_q.prob(x) * cond.prob(x, y_idx)),
    );
    Ok(m.ln())
}

/// Evidence lower bound for one destination sentence:
/// E_{x~inference(x|y)} ln theta(y|x) − KL(inference(·|y) ‖ prior_q).
/// Support violations in either term send the bound to -inf.
pub fn elbo(
    theta: &ConditionalTable,
    inference: &ConditionalTable,
    prior_q: &Categorical,
    y: &Sentence,
) -> Result<f64> {
    if !theta.src_space().same_as(inference.dst_space())
        || !theta.dst_space().same_as(inference.src_space())
    {
        return Err(Error::SpaceMismatch(
            "elbo models must be mutually inverse in their spaces".into(),
        ));
    }
    if !theta.src_space().same_as(prior_q.space()) {
        return Err(Error::SpaceMismatch("elbo prior".into()));
    }
    let y_idx = theta.dst_space().require_index(y)?;
    let psi = inference.row(y_idx);
    let mut recon_terms = Vec::new();
    let mut kl_terms = Vec::new();
    for (x, &w) in psi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let t = theta.prob(x, y_idx);
        if t == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let q = prior_q.prob(x);
        if q == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        recon_terms.push(w * t.ln());
        kl_terms.push(w * (w / q).ln());
    }
    Ok(kahan_sum(recon_terms) - kahan_sum(kl_terms))
}

/// The exact J1 identity pieces for a reconstruction model logged under an
/// inference model: value = I(inference) − H(prior) − joint KL.
///
/// For J1 pass (p_theta, q_phi, prior_p); for J2 pass the mirrored triple
/// (q_phi, p_theta, prior_q).
pub fn j1_decomposition(
    recon: &ConditionalTable,
    inference: &ConditionalTable,
    prior: &Categorical,
) -> Result<J1Decomposition> {
    check_dual_pair(recon, inference)?;
    if !inference.src_space().same_as(prior.space()) {
        return Err(Error::SpaceMismatch(
            "decomposition prior lives on the inference model's source space".into(),
        ));
    }
    let mutual_information = mutual_information_exact(inference, prior)?;
    let prior_entropy = entropy(prior);
    // KL( inference(s|t)·prior(t) ‖ recon(t|s)·inf_marginal(s) ) over (t, s).
    let inf_marginal = push_forward(inference, prior)?;
    let mut terms = Vec::new();
    let mut infinite = false;
    'outer: for t in 0..inference.n_src() {
        let pt = prior.prob(t);
        if pt == 0.0 {
            continue;
        }
        let row = inference.row(t);
        for (s, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let w = pt * c;
            let denom = recon.prob(s, t) * inf_marginal.prob(s);
            if denom == 0.0 {
                infinite = true;
                break 'outer;
            }
            terms.push(w * (w / denom).ln());
        }
    }
    let joint_kl = if infinite {
        f64::INFINITY
    } else {
        kahan_sum(terms)
    };
    Ok(J1Decomposition {
        mutual_information,
        prior_entropy,
        joint_kl,
    })
}

fn check_dual_pair(p_theta: &ConditionalTable, q_phi: &ConditionalTable) -> Result<()> {
    if p_theta.src_space().same_as(q_phi.dst_space())
        && p_theta.dst_space().same_as(q_phi.src_space())
    {
        Ok(())
    } else {
        Err(Error::SpaceMismatch(
            "dual pair must run in opposite directions over the same two spaces".into(),
        ))
    }
}

/// Exact dual reconstruction objective J_dual = J1 + J2 with both
/// decompositions.
pub fn dual_objective_exact(
    p_theta: &ConditionalTable,
    q_phi: &ConditionalTable,
    prior_q: &Categorical,
    prior_p: &Categorical,
) -> Result<ObjectiveReport> {
    check_dual_pair(p_theta, q_phi)?;
    if !p_theta.src_space().same_as(prior_q.space())
        || !p_theta.dst_space().same_as(prior_p.space())
    {
        return Err(Error::SpaceMismatch(
            "dual objective priors must match the model spaces".into(),
        ));
    }

    // J1 = Σ_y p(y) Σ_x q_phi(x|y) ln p_theta(y|x)
    let mut violation_j1 = None;
    let mut terms = Vec::new();
    'j1: for y in 0..prior_p.space().size() {
        let py = prior_p.prob(y);
        if py == 0.0 {
            continue;
        }
        let row = q_phi.row(y);
        for (x, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let t = p_theta.prob(x, y);
            if t == 0.0 {
                violation_j1 = Some((y, x));
                break 'j1;
            }
            terms.push(py * c * t.ln());
        }
    }
    let j1 = if violation_j1.is_some() {
        f64::NEG_INFINITY
    } else {
        kahan_sum(terms.drain(..))
    };

    // J2 = Σ_x q(x) Σ_y p_theta(y|x) ln q_phi(x|y)
    let mut violation_j2 = None;
    'j2: for x in 0..prior_q.space().size() {
        let qx = prior_q.prob(x);
        if qx == 0.0 {
            continue;
        }
        let row = p_theta.row(x);
        for (y, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let t = q_phi.prob(y, x);
            if t == 0.0 {
                violation_j2 = Some((x, y));
                break 'j2;
            }
            terms.push(qx * c * t.ln());
        }
    }
    let j2 = if violation_j2.is_some() {
        f64::NEG_INFINITY
    } else {
        kahan_sum(terms)
    };

    Ok(ObjectiveReport {
        j1,
        j2,
        j_dual: j1 + j2,
        decomp_j1: j1_decomposition(p_theta, q_phi, prior_p)?,
        decomp_j2: j1_decomposition(q_phi, p_theta, prior_q)?,
        violation_j1,
        violation_j2,
    })
}

/// Ceiling of J_dual under an MI constraint: 2 i_max − H(q) − H(p).
pub fn dual_upper_bound(prior_q: &Categorical, prior_p: &Categorical, c: &MiConstraint) -> f64 {
    2.0 * c.i_max() - entropy(prior_q) - entropy(prior_p)
}

/// Convex mix of reconstruction and fluency rewards.
pub fn lm_augmented_reward(recon_logprob: f64, lm_logprob: f64, alpha_lm: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&alpha_lm));
    (1.0 - alpha_lm) * recon_logprob + alpha_lm * lm_logprob
}

#[derive(Clone, Copy, Debug)]
pub struct MiCheck {
    pub mi: f64,
    pub satisfied: bool,
}

/// Computes the channel's exact MI under `prior` and compares against the
/// constraint box with 1e-12 slack.
pub fn mi_constraint_check(
    cond: &ConditionalTable,
    prior: &Categorical,
    c: &MiConstraint,
) -> Result<MiCheck> {
    let mi = mutual_information_exact(cond, prior)?;
    let satisfied = mi >= c.i_min() - 1e-12 && mi <= c.i_max() + 1e-12;
    Ok(MiCheck { mi, satisfied })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::marginal_and_posterior;
    use crate::model::TabularModel;
    use crate::space::{letters, SentenceSpace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn space_of(n: usize) -> Arc<SentenceSpace> {
        SentenceSpace::enumerate(&letters(n), 1).unwrap()
    }

    fn random_dist<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
        let t: f64 = w.iter().sum();
        w.into_iter().map(|x| x / t).collect()
    }

    fn random_cond<R: Rng>(
        rng: &mut R,
        src: &Arc<SentenceSpace>,
        dst: &Arc<SentenceSpace>,
    ) -> ConditionalTable {
        let rows: Vec<Vec<f64>> = (0..src.size())
            .map(|_| random_dist(rng, dst.size()))
            .collect();
        ConditionalTable::from_rows(src.clone(), dst.clone(), rows).unwrap()
    }

    fn identity_cond(s: &Arc<SentenceSpace>) -> ConditionalTable {
        let n = s.size();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        ConditionalTable::from_rows(s.clone(), s.clone(), rows).unwrap()
    }

    #[test]
    fn uniform_model_supervised_objective_is_log_recip_dst() {
        let s = SentenceSpace::enumerate(&letters(3), 2).unwrap(); // 12 sentences
        let model = Model::Tabular(TabularModel::zeros(s.clone(), s.clone()));
        let pairs = vec![
            (s.sentence(0).clone(), s.sentence(5).clone()),
            (s.sentence(3).clone(), s.sentence(3).clone()),
        ];
        let j = supervised_objective(&model, &pairs).unwrap();
        assert!((j - (-2.484_906_649_788_000_4)).abs() < 1e-12);
    }

    #[test]
    fn identity_channel_marginal_likelihood_is_log_recip_n() {
        let s = space_of(8);
        let ident = identity_cond(&s);
        let u = Categorical::uniform(s);
        let ju = marginal_log_likelihood(&ident, &u, &u).unwrap();
        assert!((ju - (-(8.0_f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn marginal_likelihood_hits_sentinel_on_missing_support() {
        let s = space_of(2);
        // Conditional that never produces destination 1.
        let cond = ConditionalTable::from_rows(
            s.clone(),
            s.clone(),
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let q = Categorical::uniform(s.clone());
        let p = Categorical::uniform(s);
        assert_eq!(
            marginal_log_likelihood(&cond, &q, &p).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn elbo_with_exact_posterior_is_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..30 {
            let s = space_of(6);
            let theta = random_cond(&mut rng, &s, &s);
            let q = Categorical::new(s.clone(), random_dist(&mut rng, 6)).unwrap();
            let (_, posterior) = marginal_and_posterior(&theta, &q).unwrap();
            let inference = posterior.to_conditional().unwrap();
            for y_idx in 0..s.size() {
                let y = s.sentence(y_idx).clone();
                let bound = elbo(&theta, &inference, &q, &y).unwrap();
                let lm = log_marginal(&theta, &q, y_idx).unwrap();
                assert!((bound - lm).abs() < 1e-10, "slack {}", bound - lm);
            }
        }
    }

    #[test]
    fn elbo_gap_equals_kl_to_posterior() {
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        for _ in 0..50 {
            let s = space_of(5);
            let theta = random_cond(&mut rng, &s, &s);
            let inference = random_cond(&mut rng, &s, &s);
            let q = Categorical::new(s.clone(), random_dist(&mut rng, 5)).unwrap();
            let y_idx = rng.random_range(0..s.size());
            let y = s.sentence(y_idx).clone();

            let bound = elbo(&theta, &inference, &q, &y).unwrap();
            let lm = log_marginal(&theta, &q, y_idx).unwrap();
            assert!(bound <= lm + 1e-10);

            let (_, posterior) = marginal_and_posterior(&theta, &q).unwrap();
            let post_row = posterior.row(y_idx).unwrap();
            let gap = crate::dist::kl_of(inference.row(y_idx), post_row);
            assert!(((lm - bound) - gap).abs() < 1e-9);
        }
    }

    #[test]
    fn elbo_with_prior_shaped_inference_drops_the_kl_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(300);
        let s = space_of(4);
        let theta = random_cond(&mut rng, &s, &s);
        let q = Categorical::new(s.clone(), random_dist(&mut rng, 4)).unwrap();
        let rows: Vec<Vec<f64>> = (0..4).map(|_| q.probs().to_vec()).collect();
        let inference = ConditionalTable::from_rows(s.clone(), s.clone(), rows).unwrap();
        let y = s.sentence(2).clone();
        let bound = elbo(&theta, &inference, &q, &y).unwrap();
        let expected =
            kahan_sum((0..4).map(|x| q.prob(x) * theta.prob(x, 2).ln()));
        assert!((bound - expected).abs() < 1e-12);
    }

    #[test]
    fn dual_objective_of_matched_identities_attains_zero_bound() {
        let s = space_of(8);
        let ident = identity_cond(&s);
        let u = Categorical::uniform(s);
        let report = dual_objective_exact(&ident, &ident, &u, &u).unwrap();
        assert!(report.j1.abs() < 1e-12);
        assert!(report.j2.abs() < 1e-12);
        let c = MiConstraint::max_only(8.0_f64.ln()).unwrap();
        let bound = dual_upper_bound(&u, &u, &c);
        assert!((report.j_dual - bound).abs() < 1e-12);
    }

    #[test]
    fn decomposition_identity_holds_on_random_pairs() {
        // J1 = I(q_phi) − H(p) − joint KL, checked both directions on random
        // full-support 12x12 tables.
        let sx = SentenceSpace::enumerate(&letters(3), 2).unwrap();
        let sy = SentenceSpace::enumerate(&letters(3), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(400);
        for _ in 0..200 {
            let p_theta = random_cond(&mut rng, &sx, &sy);
            let q_phi = random_cond(&mut rng, &sy, &sx);
            let q = Categorical::new(sx.clone(), random_dist(&mut rng, sx.size())).unwrap();
            let p = Categorical::new(sy.clone(), random_dist(&mut rng, sy.size())).unwrap();
            let report = dual_objective_exact(&p_theta, &q_phi, &q, &p).unwrap();
            assert!((report.j1 - report.decomp_j1.value()).abs() < 1e-9);
            assert!((report.j2 - report.decomp_j2.value()).abs() < 1e-9);
            assert!((report.j_dual - (report.j1 + report.j2)).abs() < 1e-12);
            // The decomposition also certifies the MI bound on each half.
            assert!(
                report.j1
                    <= report.decomp_j1.mutual_information - report.decomp_j1.prior_entropy
                        + 1e-9
            );
        }
    }

    #[test]
    fn dual_objective_never_exceeds_the_ceiling_at_the_models_own_mi() {
        // With i_max taken as the larger of the two channels' own MI, the
        // ceiling holds for every model pair, trained or random.
        let sx = space_of(7);
        let sy = space_of(5);
        let mut rng = ChaCha8Rng::seed_from_u64(500);
        for _ in 0..500 {
            let p_theta = random_cond(&mut rng, &sx, &sy);
            let q_phi = random_cond(&mut rng, &sy, &sx);
            let q = Categorical::new(sx.clone(), random_dist(&mut rng, sx.size())).unwrap();
            let p = Categorical::new(sy.clone(), random_dist(&mut rng, sy.size())).unwrap();
            let report = dual_objective_exact(&p_theta, &q_phi, &q, &p).unwrap();
            let i_theta = crate::dist::mutual_information_exact(&p_theta, &q).unwrap();
            let i_phi = crate::dist::mutual_information_exact(&q_phi, &p).unwrap();
            let c = MiConstraint::max_only(i_theta.max(i_phi)).unwrap();
            assert!(report.j_dual <= dual_upper_bound(&q, &p, &c) + 1e-9);
        }
    }

    #[test]
    fn dual_objective_reports_support_violations() {
        let s = space_of(3);
        let mut rows = vec![
            vec![0.5, 0.5, 0.0],
            vec![0.2, 0.3, 0.5],
            vec![0.1, 0.1, 0.8],
        ];
        let p_theta = ConditionalTable::from_rows(s.clone(), s.clone(), rows.clone()).unwrap();
        rows = vec![
            vec![0.4, 0.3, 0.3],
            vec![0.6, 0.2, 0.2],
            vec![0.5, 0.25, 0.25],
        ];
        let q_phi = ConditionalTable::from_rows(s.clone(), s.clone(), rows).unwrap();
        let u = Categorical::uniform(s);
        let report = dual_objective_exact(&p_theta, &q_phi, &u, &u).unwrap();
        // q_phi(x=0 | y=2) > 0 while p_theta(y=2 | x=0) = 0.
        assert_eq!(report.j1, f64::NEG_INFINITY);
        assert_eq!(report.violation_j1, Some((2, 0)));
        assert_eq!(report.j_dual, f64::NEG_INFINITY);
        assert!(report.decomp_j1.joint_kl.is_infinite());
        assert!(report.j2.is_finite());
    }

    #[test]
    fn dual_upper_bound_matches_hand_value_for_uniform_eight() {
        let s = space_of(8);
        let u = Categorical::uniform(s.clone());
        let c = MiConstraint::max_only(8.0_f64.ln() / 2.0).unwrap();
        let bound = dual_upper_bound(&u, &u, &c);
        assert!((bound - (-2.079_441_541_679_835_7)).abs() < 1e-12);
    }

    #[test]
    fn lm_reward_is_a_convex_mix() {
        assert_eq!(lm_augmented_reward(-2.0, -6.0, 0.0), -2.0);
        assert_eq!(lm_augmented_reward(-2.0, -6.0, 1.0), -6.0);
        assert!((lm_augmented_reward(-2.0, -6.0, 0.5) - (-4.0)).abs() < 1e-15);
    }

    #[test]
    fn mi_constraint_check_reports_mi_and_verdict() {
        let s = space_of(4);
        let ident = identity_cond(&s);
        let u = Categorical::uniform(s);
        let tight = MiConstraint::max_only(1.0).unwrap();
        let loose = MiConstraint::max_only(2.0).unwrap();
        let c1 = mi_constraint_check(&ident, &u, &tight).unwrap();
        assert!(!c1.satisfied);
        assert!((c1.mi - 4.0_f64.ln()).abs() < 1e-12);
        let c2 = mi_constraint_check(&ident, &u, &loose).unwrap();
        assert!(c2.satisfied);
    }

    #[test]
    fn constraint_constructor_validates_ordering() {
        assert!(MiConstraint::new(0.5, 0.2).is_err());
        assert!(MiConstraint::new(-0.1, 0.2).is_err());
        assert!(MiConstraint::new(0.1, 0.2).is_ok());
    }
}
