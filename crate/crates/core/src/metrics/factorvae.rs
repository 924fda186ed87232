use super::{MetricsError, Representation, Result, K};
use crate::data::{Factors, CARDINALITIES, NUM_SCENES};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorVaeConfig {
    pub votes_train: usize,
    pub votes_eval: usize,
    pub vote_batch: usize,
    pub prune_std: f64,
}

impl Default for FactorVaeConfig {
    fn default() -> Self {
        Self {
            votes_train: 800,
            votes_eval: 200,
            vote_batch: 64,
            prune_std: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorVaeResult {
    pub score: f64,
    /// Training vote counts, `[dims × factors]`.
    pub votes: Vec<Vec<usize>>,
    /// Dimensions kept after pruning.
    pub active: Vec<usize>,
}

/// Draws one vote: the fixed factor and the least-variant active dimension
/// of a batch sharing that factor's value.
fn vote(rep: &Representation, std: &[f64], active: &[usize], batch: usize, rng: &mut Rng) -> (usize, usize) {
    let k = rng.below(K);
    let fixed = rng.below(CARDINALITIES[k]);
    let dims = rep.dims();
    let mut sum = vec![0.0; dims];
    let mut sq = vec![0.0; dims];
    for _ in 0..batch {
        let mut f = Factors::from_index(rng.below(NUM_SCENES)).expect("scene in range");
        f.0[k] = fixed;
        let row = rep.row(f.to_index());
        for &d in active {
            let x = row[d] / std[d];
            sum[d] += x;
            sq[d] += x * x;
        }
    }
    let n = batch as f64;
    let var = |d: usize| sq[d] / n - (sum[d] / n).powi(2);
    let best = active
        .iter()
        .copied()
        .min_by(|&a, &b| var(a).total_cmp(&var(b)).then(a.cmp(&b)))
        .expect("at least one active dimension");
    (best, k)
}

/// Majority-vote accuracy of predicting the fixed factor from the
/// least-variant normalised dimension.
pub fn factorvae_score(rep: &Representation, cfg: &FactorVaeConfig, rng: &mut Rng) -> Result<FactorVaeResult> {
    let std = rep.std();
    let active: Vec<usize> = (0..rep.dims()).filter(|&d| std[d] >= cfg.prune_std).collect();
    if active.is_empty() {
        return Err(MetricsError::CollapsedRepresentation(cfg.prune_std));
    }
    let mut votes = vec![vec![0usize; K]; rep.dims()];
    for _ in 0..cfg.votes_train {
        let (d, k) = vote(rep, &std, &active, cfg.vote_batch, rng);
        votes[d][k] += 1;
    }
    let classifier: Vec<usize> = votes
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(0, |best, (k, &c)| if c > row[best] { k } else { best })
        })
        .collect();
    let mut correct = 0;
    for _ in 0..cfg.votes_eval {
        let (d, k) = vote(rep, &std, &active, cfg.vote_batch, rng);
        if classifier[d] == k {
            correct += 1;
        }
    }
    Ok(FactorVaeResult {
        score: correct as f64 / cfg.votes_eval as f64,
        votes,
        active,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_representation_scores_one() {
        let r = factorvae_score(&Representation::planted(), &FactorVaeConfig::default(), &mut Rng::new(1)).unwrap();
        assert_eq!(r.score, 1.0);
        for (d, row) in r.votes.iter().enumerate() {
            assert!(row.iter().enumerate().all(|(k, &c)| k == d || c == 0));
        }
    }

    #[test]
    fn confounded_representation_scores_below_one() {
        // Dim 0 mixes x and y; hue has no dimension of its own.
        let rep = Representation::from_fn(4, |_, f| {
            vec![
                f.0[2] as f64 + 8.0 * f.0[3] as f64,
                f.0[0] as f64,
                f.0[1] as f64,
                f.0[5] as f64,
            ]
        });
        let r = factorvae_score(&rep, &FactorVaeConfig::default(), &mut Rng::new(2)).unwrap();
        assert!(r.score < 1.0, "{}", r.score);
    }

    #[test]
    fn constant_representation_is_collapsed() {
        let rep = Representation::from_fn(2, |_, _| vec![1.0, 2.0]);
        let err = factorvae_score(&rep, &FactorVaeConfig::default(), &mut Rng::new(3)).unwrap_err();
        assert_eq!(err, MetricsError::CollapsedRepresentation(0.05));
    }

    #[test]
    fn low_variance_dims_are_pruned() {
        let rep = Representation::from_fn(3, |_, f| vec![f.0[0] as f64, 0.001 * f.0[1] as f64, f.0[4] as f64]);
        let r = factorvae_score(&rep, &FactorVaeConfig::default(), &mut Rng::new(4)).unwrap();
        assert_eq!(r.active, vec![0, 2]);
        assert!(r.votes[1].iter().all(|&c| c == 0));
    }
}
