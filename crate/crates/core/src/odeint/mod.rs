//! Fixed-step and adaptive Runge–Kutta integration over `t ∈ [0, 1]`, and
//! sampling / factor swapping through the learned velocity field.

mod dopri5;
mod sampling;

pub use dopri5::{step_dopri5, Dopri5Step};
pub use sampling::{sample, swap_factors, velocity_field, Sample};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OdeError {
    #[error("non-finite field value at t = {t}")]
    NonFinite { t: f64 },
    #[error("exceeded {max_steps} steps; last accepted t = {t}")]
    MaxSteps { max_steps: usize, t: f64 },
    #[error("invalid solver settings: {0}")]
    Spec(String),
    #[error("velocity field failed: {0}")]
    Field(String),
}

pub type Result<T> = std::result::Result<T, OdeError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Euler,
    Rk4,
    Dopri5,
}

impl std::str::FromStr for SolverKind {
    type Err = OdeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Self::Euler),
            "rk4" => Ok(Self::Rk4),
            "dopri5" => Ok(Self::Dopri5),
            other => Err(OdeError::Spec(format!("unknown solver {other:?}"))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Euler => "euler",
            Self::Rk4 => "rk4",
            Self::Dopri5 => "dopri5",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSpec {
    pub kind: SolverKind,
    /// Step count for the fixed-step kinds.
    pub steps: usize,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub safety: f64,
    pub min_factor: f64,
    pub max_factor: f64,
    pub initial_step: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            kind: SolverKind::Dopri5,
            steps: 50,
            rtol: 1e-5,
            atol: 1e-5,
            max_steps: 10_000,
            safety: 0.9,
            min_factor: 0.2,
            max_factor: 5.0,
            initial_step: 0.05,
        }
    }
}

impl SolverSpec {
    pub fn fixed(kind: SolverKind, steps: usize) -> Self {
        Self {
            kind,
            steps,
            ..Self::default()
        }
    }

    pub fn dopri5(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            SolverKind::Euler | SolverKind::Rk4 => self.steps > 0,
            SolverKind::Dopri5 => {
                self.rtol > 0.0
                    && self.atol > 0.0
                    && self.initial_step > 0.0
                    && self.max_steps > 0
                    && 0.0 < self.min_factor
                    && self.min_factor <= 1.0
                    && self.max_factor >= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(OdeError::Spec(format!("{self:?}")))
        }
    }
}

/// Accepted states from `t = 0` to `t = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Error estimate of each accepted adaptive step (empty for fixed steps).
    pub errors: Vec<f64>,
    pub evaluations: usize,
    pub accepted: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory has a start state")
    }

    /// Diagnostics CSV: `t,step_size,error` per accepted step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,step_size,error\n");
        for i in 1..self.times.len() {
            let err = self.errors.get(i - 1).copied().unwrap_or(0.0);
            out.push_str(&format!(
                "{:e},{:e},{:e}\n",
                self.times[i],
                self.times[i] - self.times[i - 1],
                err
            ));
        }
        out
    }
}

fn checked(t: f64, v: Vec<f64>) -> Result<Vec<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(OdeError::NonFinite { t })
    }
}

fn axpy(z: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    z.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// One Euler or classical RK4 step of size `h` from `(t, z)`.
pub fn step_fixed<F>(field: &mut F, z: &[f64], t: f64, h: f64, kind: SolverKind) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let mut eval = |t: f64, z: &[f64]| -> Result<Vec<f64>> { checked(t, field(t, z)?) };
    match kind {
        SolverKind::Euler => Ok(axpy(z, h, &eval(t, z)?)),
        SolverKind::Rk4 => {
            let k1 = eval(t, z)?;
            let k2 = eval(t + h / 2.0, &axpy(z, h / 2.0, &k1))?;
            let k3 = eval(t + h / 2.0, &axpy(z, h / 2.0, &k2))?;
            let k4 = eval(t + h, &axpy(z, h, &k3))?;
            Ok(z
                .iter()
                .enumerate()
                .map(|(i, x)| x + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect())
        }
        SolverKind::Dopri5 => Err(OdeError::Spec("step_fixed needs euler or rk4".into())),
    }
}

/// Integrates `dz/dt = field(t, z)` from `t = 0` to `t = 1`.
pub fn integrate<F>(mut field: F, z0: &[f64], spec: &SolverSpec) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    spec.validate()?;
    match spec.kind {
        SolverKind::Euler | SolverKind::Rk4 => {
            let n = spec.steps;
            let per_step = if spec.kind == SolverKind::Euler { 1 } else { 4 };
            let mut tr = Trajectory {
                times: vec![0.0],
                states: vec![z0.to_vec()],
                errors: Vec::new(),
                evaluations: 0,
                accepted: 0,
                rejected: 0,
            };
            let mut z = z0.to_vec();
            for i in 0..n {
                let t = i as f64 / n as f64;
                let next = (i + 1) as f64 / n as f64;
                z = step_fixed(&mut field, &z, t, next - t, spec.kind)?;
                tr.times.push(next);
                tr.states.push(z.clone());
                tr.evaluations += per_step;
                tr.accepted += 1;
            }
            Ok(tr)
        }
        SolverKind::Dopri5 => dopri5::integrate(field, z0, spec),
    }
}
