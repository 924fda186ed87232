use crate::tensor::{Result, Tape, Tensor, TensorError};

/// Point on the straight line from `z0` to `z1` at time `t`, and the
/// constant velocity `z1 − z0` along it.
pub fn make_bridge(z0: &[f64], z1: &[f64], t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..=1.0).contains(&t) {
        return Err(TensorError::Domain {
            op: "make_bridge",
            index: 0,
            value: t,
        });
    }
    if z0.len() != z1.len() {
        return Err(TensorError::ShapeMismatch {
            op: "make_bridge",
            shapes: vec![vec![z0.len()], vec![z1.len()]],
        });
    }
    let zt = z0.iter().zip(z1).map(|(a, b)| (1.0 - t) * a + t * b).collect();
    let u = z0.iter().zip(z1).map(|(a, b)| b - a).collect();
    Ok((zt, u))
}

/// Batch mean of the per-sample squared error `‖v − u‖²`; both `[B, ..]`.
pub fn fm_loss(tape: &Tape, v: &Tensor, u: &Tensor) -> Result<Tensor> {
    let batch = v.shape()[0];
    let err = tape.sum(&tape.square(&tape.sub(v, u)?)?)?;
    tape.scale(&err, 1.0 / batch as f64)
}

/// Mean over ordered factor pairs `i ≠ j` of the squared cosine similarity
/// between flattened factor velocities, averaged over the batch.
/// `velocities` is `[B, N, D]`.
pub fn orth_loss(tape: &Tape, velocities: &Tensor, eps: f64) -> Result<Tensor> {
    let [batch, n, d] = *velocities.shape() else {
        return Err(TensorError::ShapeMismatch {
            op: "orth_loss",
            shapes: vec![velocities.shape().to_vec()],
        });
    };
    if n < 2 {
        return Ok(Tensor::scalar(0.0));
    }
    let gram = tape.bmm(velocities, &tape.transpose(velocities)?)?;
    let sq = tape.reshape(&tape.square(velocities)?, &[batch * n, d])?;
    let norms = tape.sqrt(&tape.matmul(&sq, &Tensor::full(&[d, 1], 1.0))?)?;
    let norms = tape.reshape(&norms, &[batch, n, 1])?;
    let outer = tape.bmm(&norms, &tape.transpose(&norms)?)?;
    let denom = tape.add(&outer, &Tensor::full(&[batch, n, n], eps))?;
    let cos2 = tape.square(&tape.div(&gram, &denom)?)?;
    let mut mask = vec![1.0; batch * n * n];
    for b in 0..batch {
        for i in 0..n {
            mask[(b * n + i) * n + i] = 0.0;
        }
    }
    let mask = Tensor::new(vec![batch, n, n], mask)?;
    let total = tape.sum(&tape.mul(&cos2, &mask)?)?;
    tape.scale(&total, 1.0 / (n * (n - 1) * batch) as f64)
}

/// [`orth_loss`] for one sample given as separate flattened components.
pub fn orth_loss_single(components: &[Vec<f64>], eps: f64) -> f64 {
    let n = components.len();
    if n < 2 {
        return 0.0;
    }
    let norm = |a: &[f64]| a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dot: f64 = components[i].iter().zip(&components[j]).map(|(a, b)| a * b).sum();
                let cos = dot / (norm(&components[i]) * norm(&components[j]) + eps);
                total += cos * cos;
            }
        }
    }
    total / (n * (n - 1)) as f64
}

pub fn total_loss(tape: &Tape, fm: &Tensor, orth: &Tensor, lambda_orth: f64) -> Result<Tensor> {
    tape.add(fm, &tape.scale(orth, lambda_orth)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bridge_endpoints_and_rejection() {
        let z0 = [1.0, -2.0];
        let z1 = [3.0, 5.0];
        assert_eq!(make_bridge(&z0, &z1, 0.0).unwrap().0, z0);
        assert_eq!(make_bridge(&z0, &z1, 1.0).unwrap().0, z1);
        assert_eq!(make_bridge(&z0, &z1, 0.5).unwrap().1, vec![2.0, 7.0]);
        assert!(make_bridge(&z0, &z1, 1.5).is_err());
        assert!(make_bridge(&z0, &z1, -0.1).is_err());
        assert!(make_bridge(&z0, &z1, f64::NAN).is_err());
    }

    #[test]
    fn fm_loss_by_hand() {
        // v = [[1, 2], [3, 4]], u = [[0, 2], [1, 1]]: squared error 1 + 0 + 4 + 9.
        let tape = Tape::new();
        let v = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let u = Tensor::new(vec![1, 2, 2], vec![0.0, 2.0, 1.0, 1.0]).unwrap();
        assert_eq!(fm_loss(&tape, &v, &u).unwrap().item(), 14.0);
        assert_eq!(fm_loss(&tape, &u, &u).unwrap().item(), 0.0);
    }

    #[test]
    fn orth_loss_limits() {
        let tape = Tape::new();
        let same = Tensor::new(vec![1, 2, 3], vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]).unwrap();
        assert!((orth_loss(&tape, &same, 1e-8).unwrap().item() - 1.0).abs() < 1e-6);
        let perp = Tensor::new(vec![1, 2, 3], vec![1.0, 0.0, 0.0, 0.0, 4.0, 0.0]).unwrap();
        assert!(orth_loss(&tape, &perp, 1e-8).unwrap().item().abs() < 1e-12);
        let one = Tensor::new(vec![2, 1, 3], vec![1.0; 6]).unwrap();
        assert_eq!(orth_loss(&tape, &one, 1e-8).unwrap().item(), 0.0);
        let zero = Tensor::zeros(&[2, 3, 4]);
        assert_eq!(orth_loss(&tape, &zero, 1e-8).unwrap().item(), 0.0);
    }

    #[test]
    fn total_is_weighted_sum() {
        let tape = Tape::new();
        let t = total_loss(&tape, &Tensor::scalar(0.5), &Tensor::scalar(0.2), 1e-2).unwrap();
        assert!((t.item() - 0.502).abs() < 1e-15);
        let t = total_loss(&tape, &Tensor::scalar(0.5), &Tensor::scalar(0.2), 0.0).unwrap();
        assert_eq!(t.item(), 0.5);
    }
}
