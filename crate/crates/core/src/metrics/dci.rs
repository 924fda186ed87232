use super::{check_rows, MetricsError, Result, K};
use crate::data::{Factors, CARDINALITIES, SHAPE};

const MIN_SAMPLES: usize = 1000;

/// Standardises each column to zero mean and unit population variance;
/// constant columns become zero.
fn standardize(data: &[f64], dims: usize) -> Vec<f64> {
    let n = data.len() / dims;
    let mut out = data.to_vec();
    for d in 0..dims {
        let mean = (0..n).map(|i| data[i * dims + d]).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (data[i * dims + d] - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        for i in 0..n {
            out[i * dims + d] = if sd > 1e-12 { (data[i * dims + d] - mean) / sd } else { 0.0 };
        }
    }
    out
}

fn soft_threshold(x: f64, a: f64) -> f64 {
    if x > a {
        x - a
    } else if x < -a {
        x + a
    } else {
        0.0
    }
}

/// Coefficients minimising `‖y − Xw‖²/(2n) + alpha·‖w‖₁` by cyclic
/// coordinate descent, for row-major `x` with `dims` columns.
pub fn lasso(x: &[f64], dims: usize, y: &[f64], alpha: f64) -> Vec<f64> {
    let n = y.len();
    let mut gram = vec![0.0; dims * dims];
    let mut xty = vec![0.0; dims];
    crate::tensor::gemm(dims, n, dims, x, true, x, false, 0.0, &mut gram);
    for i in 0..n {
        let row = &x[i * dims..(i + 1) * dims];
        for d in 0..dims {
            xty[d] += row[d] * y[i];
        }
    }
    gram.iter_mut().for_each(|g| *g /= n as f64);
    xty.iter_mut().for_each(|g| *g /= n as f64);

    let mut w = vec![0.0; dims];
    for _ in 0..10_000 {
        let mut change = 0.0f64;
        for j in 0..dims {
            let gjj = gram[j * dims + j];
            if gjj <= 0.0 {
                continue;
            }
            let mut rho = xty[j];
            for l in 0..dims {
                if l != j {
                    rho -= gram[j * dims + l] * w[l];
                }
            }
            let new = soft_threshold(rho, alpha) / gjj;
            change = change.max((new - w[j]).abs());
            w[j] = new;
        }
        if change < 1e-10 {
            break;
        }
    }
    w
}

/// Importance-weighted mean over dimensions of `1 − H(P_d)/ln K`, where
/// `P_d` is row `d` of `importance` normalised. All-zero rows are skipped.
pub fn dci_from_importance(importance: &[Vec<f64>]) -> Result<f64> {
    let total: f64 = importance.iter().flatten().sum();
    if !(total > 0.0) {
        return Err(MetricsError::DegenerateImportance);
    }
    let mut score = 0.0;
    for row in importance {
        let mass: f64 = row.iter().sum();
        if mass <= 0.0 {
            continue;
        }
        let k = row.len() as f64;
        let entropy: f64 = row
            .iter()
            .filter(|&&r| r > 0.0)
            .map(|&r| {
                let p = r / mass;
                -p * p.ln()
            })
            .sum();
        let disentanglement = if row.len() > 1 { 1.0 - entropy / k.ln() } else { 1.0 };
        score += mass / total * disentanglement;
    }
    Ok(score)
}

/// DCI disentanglement from L1-regularised linear regressions of each
/// factor on the standardised representation. Shape is one-hot regressed
/// and its three importances summed.
pub fn dci_disentanglement(
    rows: &[f64],
    dims: usize,
    factors: &[Factors],
    l1_strength: f64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let n = check_rows(rows, dims, factors.len())?;
    if n < MIN_SAMPLES {
        return Err(MetricsError::TooFewSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let x = standardize(rows, dims);
    let mut importance = vec![vec![0.0; K]; dims];
    for k in 0..K {
        let targets: Vec<Vec<f64>> = if k == SHAPE {
            (0..CARDINALITIES[SHAPE])
                .map(|s| factors.iter().map(|f| (f.0[SHAPE] == s) as u8 as f64).collect())
                .collect()
        } else {
            vec![factors.iter().map(|f| f.0[k] as f64).collect()]
        };
        for y in targets {
            let y = standardize(&y, 1);
            let w = lasso(&x, dims, &y, l1_strength);
            for d in 0..dims {
                importance[d][k] += w[d].abs();
            }
        }
    }
    Ok((dci_from_importance(&importance)?, importance))
}
