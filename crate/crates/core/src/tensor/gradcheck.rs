use super::{Result, Tape, Tensor};

/// Worst relative disagreement between the tape gradient of a scalar `f`
/// at `x` and central differences with step `h`.
///
/// The relative error of each coordinate uses the denominator
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&Tape, &Tensor) -> Result<Tensor>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let tape = Tape::new();
    let leaf = tape.param(x);
    let y = f(&tape, &leaf)?;
    let analytic = if y.requires_grad() {
        tape.backward(&y)?.wrt_or_zero(&leaf)
    } else {
        vec![0.0; x.numel()]
    };

    let eval = |probe: &Tensor| -> Result<f64> {
        let tape = Tape::new();
        Ok(f(&tape, probe)?.item())
    };

    let mut worst = 0.0f64;
    let mut probe = x.detach();
    for (i, &a) in analytic.iter().enumerate() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = eval(&probe)?;
        probe.data_mut()[i] = orig - h;
        let down = eval(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
