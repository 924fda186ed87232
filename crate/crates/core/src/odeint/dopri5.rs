//! Dormand–Prince 5(4) with first-same-as-last stage reuse.

use super::{checked, OdeError, Result, SolverSpec, Trajectory};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Clone, Debug, PartialEq)]
pub struct Dopri5Step {
    pub z5: Vec<f64>,
    pub z4: Vec<f64>,
    /// RMS of `|z5 − z4| / (atol + rtol·max(|z|, |z5|))`.
    pub error: f64,
    /// Field at `(t + h, z5)`, the next step's first stage.
    pub last_stage: Vec<f64>,
}

/// One Dormand–Prince step. `first_stage` is `field(t, z)`.
pub fn step_dopri5<F>(
    field: &mut F,
    z: &[f64],
    t: f64,
    h: f64,
    first_stage: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Dopri5Step>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let n = z.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(first_stage.to_vec());
    for s in 1..7 {
        let mut arg = z.to_vec();
        for (j, a) in A[s].iter().enumerate() {
            if *a != 0.0 {
                for i in 0..n {
                    arg[i] += h * a * k[j][i];
                }
            }
        }
        let ts = t + C[s] * h;
        k.push(checked(ts, field(ts, &arg)?)?);
    }
    let combine = |b: &[f64; 7]| -> Vec<f64> {
        (0..n)
            .map(|i| z[i] + h * (0..7).map(|s| b[s] * k[s][i]).sum::<f64>())
            .collect()
    };
    let z5 = combine(&B5);
    let z4 = combine(&B4);
    let mut acc = 0.0;
    for i in 0..n {
        let scale = atol + rtol * z[i].abs().max(z5[i].abs());
        let e = (z5[i] - z4[i]) / scale;
        acc += e * e;
    }
    let error = if n == 0 { 0.0 } else { (acc / n as f64).sqrt() };
    let last_stage = k.pop().expect("seven stages");
    Ok(Dopri5Step {
        z5,
        z4,
        error,
        last_stage,
    })
}

pub(super) fn integrate<F>(mut field: F, z0: &[f64], spec: &SolverSpec) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let mut tr = Trajectory {
        times: vec![0.0],
        states: vec![z0.to_vec()],
        errors: Vec::new(),
        evaluations: 1,
        accepted: 0,
        rejected: 0,
    };
    let mut t = 0.0f64;
    let mut z = z0.to_vec();
    let mut k1 = checked(0.0, field(0.0, &z)?)?;
    let mut h = spec.initial_step.min(1.0);
    let exponent = -1.0 / 5.0;
    while t < 1.0 {
        if tr.accepted + tr.rejected >= spec.max_steps {
            return Err(OdeError::MaxSteps {
                max_steps: spec.max_steps,
                t,
            });
        }
        let last = t + h >= 1.0;
        if last {
            h = 1.0 - t;
        }
        tr.evaluations += 6;
        let attempt = match step_dopri5(&mut field, &z, t, h, &k1, spec.rtol, spec.atol) {
            Ok(s) => Some(s),
            Err(OdeError::NonFinite { .. }) => None,
            Err(e) => return Err(e),
        };
        match attempt {
            Some(s) if s.error <= 1.0 => {
                t = if last { 1.0 } else { t + h };
                z = s.z5;
                k1 = s.last_stage;
                tr.times.push(t);
                tr.states.push(z.clone());
                tr.errors.push(s.error);
                tr.accepted += 1;
                let factor = if s.error == 0.0 {
                    spec.max_factor
                } else {
                    (spec.safety * s.error.powf(exponent)).clamp(spec.min_factor, spec.max_factor)
                };
                h *= factor;
            }
            Some(s) => {
                tr.rejected += 1;
                h *= (spec.safety * s.error.powf(exponent)).clamp(spec.min_factor, spec.max_factor);
            }
            None => {
                tr.rejected += 1;
                h *= spec.min_factor;
            }
        }
    }
    Ok(tr)
}
