#![allow(dead_code)]

use flowfactor::data::PIXELS;
use flowfactor::model::{ModelConfig, ModelParams};
use flowfactor::rng::Rng;
use flowfactor::tensor::{grad_check, Primitive, Tape, Tensor};
use flowfactor::training::{objective, Batch};

pub const H: f64 = 1e-5;

pub fn random(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.range(lo, hi)).collect()).unwrap()
}

/// Uniform in `lo..hi` with a random sign.
fn signed(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let mut t = random(rng, shape, lo, hi);
    for v in t.data_mut() {
        if rng.uniform() < 0.5 {
            *v = -*v;
        }
    }
    t
}

fn dim(rng: &mut Rng) -> usize {
    1 + rng.below(5)
}

pub const PRIMITIVES: [&str; 23] = [
    "matmul", "bmm", "add", "sub", "mul", "div", "scale", "relu", "tanh", "exp", "log", "sqrt",
    "square", "softmax", "sum", "mean", "dot", "concat", "slice", "transpose", "transpose3",
    "bias_add", "reshape",
];

/// Random inputs (dims ≤ 5) for one primitive, kept away from kinks and
/// domain edges.
fn case(name: &str, rng: &mut Rng) -> (Primitive, Vec<Tensor>) {
    let (a, b, c) = (dim(rng), dim(rng), dim(rng));
    let g = |rng: &mut Rng, s: &[usize]| random(rng, s, -1.0, 1.0);
    match name {
        "matmul" => (Primitive::MatMul, vec![g(rng, &[a, b]), g(rng, &[b, c])]),
        "bmm" => {
            let s = dim(rng);
            (Primitive::BatchMatMul, vec![g(rng, &[s, a, b]), g(rng, &[s, b, c])])
        }
        "add" => (Primitive::Add, vec![g(rng, &[a, b]), g(rng, &[a, b])]),
        "sub" => (Primitive::Sub, vec![g(rng, &[a, b]), g(rng, &[a, b])]),
        "mul" => (Primitive::Mul, vec![g(rng, &[a, b]), g(rng, &[a, b])]),
        "div" => (Primitive::Div, vec![g(rng, &[a, b]), signed(rng, &[a, b], 0.5, 2.0)]),
        "scale" => (Primitive::Scale(rng.range(-3.0, 3.0)), vec![g(rng, &[a, b])]),
        "relu" => (Primitive::Relu, vec![signed(rng, &[a, b], 0.1, 1.0)]),
        "tanh" => (Primitive::Tanh, vec![random(rng, &[a, b], -2.0, 2.0)]),
        "exp" => (Primitive::Exp, vec![random(rng, &[a, b], -2.0, 2.0)]),
        "log" => (Primitive::Log, vec![random(rng, &[a, b], 0.5, 2.0)]),
        "sqrt" => (Primitive::Sqrt, vec![random(rng, &[a, b], 0.5, 2.0)]),
        "square" => (Primitive::Square, vec![g(rng, &[a, b])]),
        "softmax" => (Primitive::SoftmaxRows, vec![random(rng, &[a, b], -1.0, 1.0)]),
        "sum" => (Primitive::Sum, vec![g(rng, &[a, b])]),
        "mean" => (Primitive::Mean, vec![g(rng, &[a, b])]),
        "dot" => (Primitive::Dot, vec![g(rng, &[a, b]), g(rng, &[a, b])]),
        "concat" => {
            let axis = rng.below(2);
            let other = if axis == 0 { [c, b] } else { [a, c] };
            (Primitive::Concat { axis }, vec![g(rng, &[a, b]), g(rng, &other)])
        }
        "slice" => {
            let axis = rng.below(2);
            let full = [a, b][axis];
            let start = rng.below(full);
            let len = 1 + rng.below(full - start);
            (Primitive::Slice { axis, start, len }, vec![g(rng, &[a, b])])
        }
        "transpose" => (Primitive::Transpose, vec![g(rng, &[a, b])]),
        "transpose3" => (Primitive::Transpose, vec![g(rng, &[c, a, b])]),
        "bias_add" => (Primitive::BiasAdd, vec![g(rng, &[a, b]), g(rng, &[b])]),
        "reshape" => (Primitive::Reshape, vec![g(rng, &[a, b]), Tensor::zeros(&[b, a])]),
        other => panic!("unknown primitive {other}"),
    }
}

/// Worst relative gradient error of `name` over all differentiable inputs,
/// probed through a random linear read-out so no gradient vanishes by
/// symmetry.
pub fn check_primitive(name: &str, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let (kind, inputs) = case(name, &mut rng);
    let probe_shape = {
        let tape = Tape::new();
        let refs: Vec<&Tensor> = inputs.iter().collect();
        tape.apply(kind, &refs).unwrap().shape().to_vec()
    };
    let weights = if name == "softmax" {
        // One selected output per row: every Jacobian entry s_k (δ_kj − s_j)
        // is then bounded away from zero.
        let cols = probe_shape[1];
        let mut w = Tensor::zeros(&probe_shape);
        for row in w.data_mut().chunks_mut(cols) {
            row[rng.below(cols)] = 1.0;
        }
        w
    } else {
        signed(&mut rng, &probe_shape, 0.5, 1.5)
    };
    let differentiable = if name == "reshape" { 1 } else { inputs.len() };
    let mut worst = 0.0f64;
    for which in 0..differentiable {
        let f = |tape: &Tape, x: &Tensor| {
            let refs: Vec<&Tensor> = inputs
                .iter()
                .enumerate()
                .map(|(i, t)| if i == which { x } else { t })
                .collect();
            let y = tape.apply(kind, &refs)?;
            tape.dot(&y, &weights)
        };
        worst = worst.max(grad_check(f, &inputs[which], H).unwrap());
    }
    worst
}

/// Two latent tokens and a narrow network, small enough for exhaustive
/// finite differences.
pub fn toy_config() -> ModelConfig {
    ModelConfig {
        tokens: 2,
        channels: 2,
        factors: 3,
        factor_dim: 4,
        hidden: 6,
        blocks: 2,
        key_dim: 3,
        time_dim: 4,
        encoder_hidden: 5,
    }
}

/// Parameters with every tensor, including the zero-initialised ones,
/// filled with random values.
pub fn random_params(config: ModelConfig, seed: u64) -> ModelParams {
    let mut p = ModelParams::init(config, seed).unwrap();
    let mut rng = Rng::new(seed ^ 0x5eed);
    let names = p.names().to_vec();
    for (name, v) in names.iter().zip(p.values_mut()) {
        let shape = v.shape().to_vec();
        // Sharper routing keeps the factor velocities away from the flat
        // all-collinear corner where cos² ≈ 1.
        let scale = match () {
            _ if shape.first() == Some(&PIXELS) => 0.05,
            _ if name.starts_with("routing.") => 1.5,
            _ => 0.6,
        };
        *v = random(&mut rng, &shape, -scale, scale);
    }
    p
}

pub fn random_batch(config: &ModelConfig, batch: usize, seed: u64) -> Batch {
    let mut rng = Rng::new(seed);
    let (m, d) = (config.tokens, config.channels);
    Batch {
        scenes: vec![0; batch],
        images: random(&mut rng, &[batch, PIXELS], 0.5, 1.0),
        ts: (0..batch).map(|_| rng.uniform()).collect(),
        zt: Tensor::new(vec![batch, m, d], rng.gaussian_vec(batch * m * d)).unwrap(),
        target: Tensor::new(vec![batch, m, d], rng.gaussian_vec(batch * m * d)).unwrap(),
    }
}

/// Tape gradient of the combined objective against central differences on
/// `coords` random parameter coordinates.
pub fn objective_fd_error(seed: u64, coords: usize, lambda_orth: f64) -> f64 {
    let config = toy_config();
    let mut params = random_params(config, seed);
    let mut batch = random_batch(&config, 2, seed.wrapping_add(1));
    // Targets near the current prediction keep the loss value small, so the
    // differences' round-off (about 1e-16·|loss|/h) stays far below the
    // smallest gradients, which come from the λ-weighted routing term.
    {
        let tape = Tape::new();
        let net = params.frozen(&tape);
        let factors = net.encode_factors(&batch.images).unwrap();
        let (v, _) = net.predict_velocity(&batch.zt, &batch.ts, &factors).unwrap();
        let mut rng = Rng::new(seed ^ 0x7a7);
        let mut target = v.detach();
        for x in target.data_mut() {
            *x += 0.01 * rng.gaussian();
        }
        batch.target = target;
    }
    let eps = 1e-8;

    let tape = Tape::new();
    let net = params.trainable(&tape);
    let obj = objective(&net, &batch, lambda_orth, eps).unwrap();
    let grads = tape.backward(&obj.total).unwrap();
    let analytic: Vec<Vec<f64>> = net.values().iter().map(|v| grads.wrt_or_zero(v)).collect();
    drop(net);

    let eval = |p: &ModelParams| {
        let tape = Tape::new();
        objective(&p.frozen(&tape), &batch, lambda_orth, eps).unwrap().total.item()
    };
    let mut rng = Rng::new(seed ^ 0xc0de);
    let mut worst = 0.0f64;
    for _ in 0..coords {
        let p = rng.below(params.values().len());
        let j = rng.below(params.values()[p].numel());
        let orig = params.values()[p].data()[j];
        params.values_mut()[p].data_mut()[j] = orig + H;
        let up = eval(&params);
        params.values_mut()[p].data_mut()[j] = orig - H;
        let down = eval(&params);
        params.values_mut()[p].data_mut()[j] = orig;
        let numeric = (up - down) / (2.0 * H);
        let a = analytic[p][j];
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8));
    }
    worst
}

/// Largest violation of `Σ_i v^(i) = v_agg` and of the routing simplex
/// over one random draw.
pub fn routing_defects(config: ModelConfig, seed: u64) -> (f64, f64) {
    let params = random_params(config, seed);
    let batch = random_batch(&config, 2, seed ^ 3);
    let tape = Tape::new();
    let net = params.frozen(&tape);
    let factors = net.encode_factors(&batch.images).unwrap();
    let (v, h) = net.predict_velocity(&batch.zt, &batch.ts, &factors).unwrap();
    let routing = net.route_velocity(&h, &factors, &v).unwrap();
    let (n, dl) = (config.factors, config.latent_dim());
    let vel = routing.velocities.data();
    let mut mass = 0.0f64;
    for b in 0..2 {
        for k in 0..dl {
            let sum: f64 = (0..n).map(|i| vel[(b * n + i) * dl + k]).sum();
            mass = mass.max((sum - v.data()[b * dl + k]).abs());
        }
    }
    let mut simplex = 0.0f64;
    for row in routing.attn.data().chunks(n) {
        assert!(row.iter().all(|&a| a >= 0.0));
        simplex = simplex.max((row.iter().sum::<f64>() - 1.0).abs());
    }
    (mass, simplex)
}
