use super::{check_rows, MetricsError, Result, K};
use crate::data::{Factors, CARDINALITIES};

const MIN_SAMPLES: usize = 1000;

/// Equal-frequency bin of each value: the number of quantile edges at or
/// below it. Ties share a bin.
pub fn quantile_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let edges: Vec<f64> = (1..bins).map(|b| sorted[b * n / bins]).collect();
    values
        .iter()
        .map(|v| edges.partition_point(|e| e <= v))
        .collect()
}

fn mutual_information(a: &[usize], a_card: usize, b: &[usize], b_card: usize) -> f64 {
    let n = a.len() as f64;
    let mut joint = vec![0usize; a_card * b_card];
    let mut pa = vec![0usize; a_card];
    let mut pb = vec![0usize; b_card];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * b_card + y] += 1;
        pa[x] += 1;
        pb[y] += 1;
    }
    let mut mi = 0.0;
    for x in 0..a_card {
        for y in 0..b_card {
            let c = joint[x * b_card + y];
            if c > 0 {
                let pxy = c as f64 / n;
                mi += pxy * (pxy * n * n / (pa[x] as f64 * pb[y] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Mean over factors of the gap between the two largest dimension-factor
/// mutual informations, normalised by `ln(cardinality)`. Returns the score
/// and the `[dims × factors]` MI matrix.
pub fn mig(rows: &[f64], dims: usize, factors: &[Factors], bins: usize) -> Result<(f64, Vec<Vec<f64>>)> {
    let n = check_rows(rows, dims, factors.len())?;
    if n < MIN_SAMPLES {
        return Err(MetricsError::TooFewSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let binned: Vec<Vec<usize>> = (0..dims)
        .map(|d| {
            let col: Vec<f64> = (0..n).map(|i| rows[i * dims + d]).collect();
            quantile_bins(&col, bins)
        })
        .collect();
    let mut mi = vec![vec![0.0; K]; dims];
    let mut score = 0.0;
    for k in 0..K {
        let labels: Vec<usize> = factors.iter().map(|f| f.0[k]).collect();
        let mut col: Vec<f64> = Vec::with_capacity(dims);
        for d in 0..dims {
            let v = mutual_information(&binned[d], bins, &labels, CARDINALITIES[k]);
            mi[d][k] = v;
            col.push(v);
        }
        col.sort_by(|a, b| b.total_cmp(a));
        let top2 = col.get(1).copied().unwrap_or(0.0);
        score += (col[0] - top2) / (CARDINALITIES[k] as f64).ln();
    }
    Ok((score / K as f64, mi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::NUM_SCENES;
    use crate::rng::Rng;

    fn draw(n: usize, seed: u64) -> Vec<Factors> {
        let mut rng = Rng::new(seed);
        (0..n).map(|_| Factors::from_index(rng.below(NUM_SCENES)).unwrap()).collect()
    }

    #[test]
    fn bins_are_equal_frequency() {
        let v: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let b = quantile_bins(&v, 4);
        for bin in 0..4 {
            assert_eq!(b.iter().filter(|&&x| x == bin).count(), 25);
        }
        assert!(quantile_bins(&[3.0; 10], 5).iter().all(|&x| x == 4));
    }

    #[test]
    fn mi_oracle_for_identical_labels() {
        // I(X; X) = H(X) for a uniform 4-way label.
        let a: Vec<usize> = (0..400).map(|i| i % 4).collect();
        assert!((mutual_information(&a, 4, &a, 4) - 4f64.ln()).abs() < 1e-12);
        let b: Vec<usize> = (0..400).map(|i| (i / 4) % 2).collect();
        assert!(mutual_information(&a, 4, &b, 2).abs() < 1e-12);
    }

    #[test]
    fn copies_score_high_and_duplicates_lower_the_gap() {
        let f = draw(5000, 1);
        let rows: Vec<f64> = f.iter().flat_map(|x| x.0.map(|v| v as f64)).collect();
        let (score, _) = mig(&rows, 6, &f, 20).unwrap();
        assert!(score >= 0.9, "{score}");
        let dup: Vec<f64> = f
            .iter()
            .flat_map(|x| {
                let mut r: Vec<f64> = x.0.map(|v| v as f64).to_vec();
                r.push(x.0[4] as f64);
                r
            })
            .collect();
        let (lower, mi) = mig(&dup, 7, &f, 20).unwrap();
        assert!(lower < score - 0.1);
        assert!((mi[4][4] - mi[6][4]).abs() < 1e-12);
    }
}
