use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::{Factors, ToyDataset, NUM_SCENES};
use crate::model::{ModelError, ModelParams};
use crate::rng::Rng;
use crate::tensor::{Tape, Tensor};

/// One row per toy scene, in lexicographic factor order.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    dims: usize,
    data: Vec<f64>,
}

impl Representation {
    pub fn new(dims: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dims * NUM_SCENES, "one row per scene");
        Self { dims, data }
    }

    pub fn from_fn(dims: usize, mut f: impl FnMut(usize, &Factors) -> Vec<f64>) -> Self {
        let ds = ToyDataset;
        let mut data = Vec::with_capacity(dims * NUM_SCENES);
        for i in 0..NUM_SCENES {
            let row = f(i, &ds.factors(i));
            assert_eq!(row.len(), dims);
            data.extend(row);
        }
        Self { dims, data }
    }

    /// Each dimension a copy of one factor's index.
    pub fn planted() -> Self {
        Self::from_fn(super::K, |_, f| f.0.iter().map(|&v| v as f64).collect())
    }

    /// Independent standard normal entries.
    pub fn noise(dims: usize, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        Self::new(dims, rng.gaussian_vec(dims * NUM_SCENES))
    }

    /// Concatenated factor tokens of every scene, optionally projected onto
    /// their top `N` principal directions.
    pub fn learned(params: &ModelParams, reduce: bool) -> Result<Self, ModelError> {
        let c = params.config();
        let dims = c.factors * c.factor_dim;
        let ds = ToyDataset;
        let mut data = Vec::with_capacity(dims * NUM_SCENES);
        for start in (0..NUM_SCENES).step_by(512) {
            let count = 512.min(NUM_SCENES - start);
            let tape = Tape::new();
            let net = params.frozen(&tape);
            let images = Tensor::matrix(count, crate::data::PIXELS, ds.image_block(start, count))?;
            data.extend_from_slice(net.encode_factors(&images)?.data());
        }
        let full = Self { dims, data };
        Ok(if reduce { full.reduced(c.factors) } else { full })
    }

    /// Projection onto the top `k` principal directions.
    pub fn reduced(&self, k: usize) -> Self {
        let (mean, basis) = principal_projection(&self.data, self.dims, k);
        let k = basis.len();
        let mut data = Vec::with_capacity(k * self.rows());
        for row in self.data.chunks(self.dims) {
            for dir in &basis {
                data.push(row.iter().zip(&mean).zip(dir).map(|((x, m), d)| (x - m) * d).sum());
            }
        }
        Self { dims: k, data }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    /// Per-dimension population standard deviation over all scenes.
    pub fn std(&self) -> Vec<f64> {
        let n = self.rows() as f64;
        (0..self.dims)
            .map(|d| {
                let mean = self.data.iter().skip(d).step_by(self.dims).sum::<f64>() / n;
                let var = self
                    .data
                    .iter()
                    .skip(d)
                    .step_by(self.dims)
                    .map(|x| (x - mean) * (x - mean))
                    .sum::<f64>()
                    / n;
                var.sqrt()
            })
            .collect()
    }

    /// `n` scenes drawn uniformly with replacement: their rows and factors.
    pub fn sample_rows(&self, n: usize, rng: &mut Rng) -> (Vec<f64>, Vec<Factors>) {
        let ds = ToyDataset;
        let mut rows = Vec::with_capacity(n * self.dims);
        let mut factors = Vec::with_capacity(n);
        for _ in 0..n {
            let i = rng.below(NUM_SCENES);
            rows.extend_from_slice(self.row(i));
            factors.push(ds.factors(i));
        }
        (rows, factors)
    }
}

/// Mean and top-`k` principal directions of row-major `data` with `dims`
/// columns, ordered by decreasing variance. Each direction's
/// largest-magnitude coordinate is positive.
pub fn principal_projection(data: &[f64], dims: usize, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = data.len() / dims;
    let mut mean = vec![0.0; dims];
    for row in data.chunks(dims) {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(dims, dims);
    let mut centered = vec![0.0; dims];
    for row in data.chunks(dims) {
        for (c, (x, m)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
            *c = x - m;
        }
        for i in 0..dims {
            for j in 0..=i {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..dims {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dims).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let basis = order
        .into_iter()
        .take(k.min(dims))
        .map(|j| {
            let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
            let lead = v
                .iter()
                .enumerate()
                .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    (mean, basis)
}
