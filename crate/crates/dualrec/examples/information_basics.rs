//! Exact information quantities on an enumerable sentence space: entropies,
//! KL divergences, joints, marginals, and mutual information, all computed by
//! full summation rather than sampling.

use dualrec::dist::{
    entropy, kl, max_mi_bound, mutual_information_exact, push_forward, Categorical,
    ConditionalTable, JointTable,
};
use dualrec::space::{letters, SentenceSpace};
use dualrec::Result;

fn main() -> Result<()> {
    // Every sentence of length 1..=2 over {a, b, c}: 3 + 9 = 12 sentences.
    let space = SentenceSpace::enumerate(&letters(3), 2)?;
    println!("space: {} sentences over {:?}", space.size(), space.alphabet());
    for idx in [0, 3, space.size() - 1] {
        println!("  sentence {idx}: \"{}\"", space.render(space.sentence(idx)));
    }

    let uniform = Categorical::uniform(space.clone());
    println!("\nH(uniform)     = {:.6} nats (ln 12 = {:.6})", entropy(&uniform), 12f64.ln());

    // A prior that prefers short sentences.
    let weights: Vec<f64> = space
        .sentences()
        .iter()
        .map(|s| if s.len() == 1 { 3.0 } else { 1.0 })
        .collect();
    let skewed = Categorical::from_weights(space.clone(), &weights)?;
    println!("H(short-heavy) = {:.6} nats", entropy(&skewed));
    println!("KL(short-heavy || uniform) = {:.6} nats", kl(&skewed, &uniform)?);

    // A noisy "copy" channel: mass 0.7 on the identity, the rest uniform.
    let n = space.size();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![0.3 / (n - 1) as f64; n];
        row[i] = 0.7;
        rows.push(row);
    }
    let channel = ConditionalTable::from_rows(space.clone(), space.clone(), rows)?;

    // The joint it induces under the skewed prior, and both exact MI paths.
    let joint = JointTable::new(space.clone(), space.clone(), {
        let mut cells = Vec::with_capacity(n * n);
        for x in 0..n {
            for y in 0..n {
                cells.push(skewed.prob(x) * channel.prob(x, y));
            }
        }
        cells
    })?;
    let mi_joint = joint.mutual_information()?;
    let mi_direct = mutual_information_exact(&channel, &skewed)?;
    println!("\nI(X;Y) from joint table    = {:.9}", mi_joint);
    println!("I(X;Y) from channel + prior = {:.9}", mi_direct);
    println!("agreement residual          = {:.3e}", (mi_joint - mi_direct).abs());

    // The push-forward marginal matches the joint's column sums.
    let marginal = push_forward(&channel, &skewed)?;
    let col = joint.dst_marginal()?;
    let max_dev = marginal
        .probs()
        .iter()
        .zip(col.probs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    println!("push-forward vs joint column marginal: max dev {:.3e}", max_dev);

    // No channel can carry more than min(H(q), H(p)) nats between these priors.
    println!(
        "\nMI ceiling min(H,H) = {:.6}; this channel uses {:.1}% of it",
        max_mi_bound(&skewed, &marginal),
        100.0 * mi_direct / max_mi_bound(&skewed, &marginal)
    );
    Ok(())
}
