use flowfactor::data::NUM_FACTORS;
use flowfactor::metrics::{
    dci_disentanglement, evaluate, factorvae_score, mig, FactorVaeConfig, MetricsConfig, Representation,
};
use flowfactor::rng::Rng;
use proptest::prelude::*;

/// Factor indices plus Gaussian noise of scale `noise`, then `extra` pure
/// noise dimensions.
fn noisy_planted(noise: f64, extra: usize, seed: u64) -> Representation {
    let mut rng = Rng::new(seed);
    Representation::from_fn(NUM_FACTORS + extra, |_, f| {
        let mut row: Vec<f64> = f.0.iter().map(|&v| v as f64 + noise * rng.gaussian()).collect();
        row.extend(rng.gaussian_vec(extra));
        row
    })
}

fn map_rows(rep: &Representation, f: impl Fn(&[f64]) -> Vec<f64>) -> Representation {
    let rows: Vec<f64> = (0..rep.rows()).flat_map(|i| f(rep.row(i))).collect();
    let dims = rows.len() / rep.rows();
    Representation::new(dims, rows)
}

fn small_metrics() -> MetricsConfig {
    MetricsConfig {
        factorvae: FactorVaeConfig {
            votes_train: 200,
            votes_eval: 100,
            ..FactorVaeConfig::default()
        },
        samples: 2000,
        ..MetricsConfig::default()
    }
}

fn permutation(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.below(i + 1));
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn metrics_ignore_dimension_order(seed in any::<u64>()) {
        let rep = noisy_planted(0.4, 2, seed);
        let mut rng = Rng::new(seed);
        let perm = permutation(rep.dims(), &mut rng);
        let shuffled = map_rows(&rep, |r| perm.iter().map(|&d| r[d]).collect());
        let cfg = small_metrics();
        let a = evaluate(&rep, &cfg, seed).unwrap();
        let b = evaluate(&shuffled, &cfg, seed).unwrap();
        prop_assert_eq!(a.factorvae_score, b.factorvae_score);
        prop_assert!((a.dci_disentanglement - b.dci_disentanglement).abs() < 1e-6);
        prop_assert!((a.mig - b.mig).abs() < 1e-12);
        for s in [a.factorvae_score, a.dci_disentanglement, a.mig] {
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn factorvae_ignores_per_dimension_affine_maps(seed in any::<u64>()) {
        let rep = noisy_planted(0.4, 2, seed);
        let mut rng = Rng::new(seed ^ 9);
        let coeffs: Vec<(f64, f64)> = (0..rep.dims())
            .map(|_| {
                let a = rng.range(0.5, 3.0);
                (if rng.uniform() < 0.5 { -a } else { a }, rng.range(-10.0, 10.0))
            })
            .collect();
        let mapped = map_rows(&rep, |r| r.iter().zip(&coeffs).map(|(x, (a, b))| a * x + b).collect());
        let cfg = small_metrics().factorvae;
        let a = factorvae_score(&rep, &cfg, &mut Rng::new(seed)).unwrap();
        let b = factorvae_score(&mapped, &cfg, &mut Rng::new(seed)).unwrap();
        prop_assert_eq!(a.score, b.score);
        prop_assert_eq!(a.votes, b.votes);
    }

    #[test]
    fn mig_ignores_strictly_increasing_maps(seed in any::<u64>()) {
        let rep = noisy_planted(0.4, 2, seed);
        let mut rng = Rng::new(seed ^ 5);
        let (rows, factors) = rep.sample_rows(2000, &mut rng);
        let dims = rep.dims();
        let warped: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(i, &x)| match i % dims % 3 {
                0 => x.powi(3),
                1 => (0.7 * x).exp(),
                _ => x.atan() + 2.0,
            })
            .collect();
        let (a, _) = mig(&rows, dims, &factors, 20).unwrap();
        let (b, _) = mig(&warped, dims, &factors, 20).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn planted_representation_is_perfect() {
    let rep = Representation::planted();
    let r = evaluate(&rep, &MetricsConfig::default(), 0).unwrap();
    assert_eq!(r.factorvae_score, 1.0);
    assert!(r.dci_disentanglement >= 0.95, "{}", r.dci_disentanglement);
    assert!(r.mig >= 0.9, "{}", r.mig);
}

#[test]
fn pure_noise_scores_at_chance() {
    let cfg = MetricsConfig::default();
    let mut fv = 0.0;
    for seed in 0..10 {
        let rep = Representation::noise(NUM_FACTORS, 1000 + seed);
        let f = factorvae_score(&rep, &cfg.factorvae, &mut Rng::new(seed)).unwrap();
        fv += f.score / 10.0;
        let (rows, factors) = rep.sample_rows(cfg.samples, &mut Rng::new(seed));
        let (m, _) = mig(&rows, rep.dims(), &factors, cfg.bins).unwrap();
        assert!(m <= 0.05, "seed {seed}: mig {m}");
    }
    assert!((fv - 1.0 / 6.0).abs() <= 0.05, "mean factorvae {fv}");
}

#[test]
fn metrics_are_deterministic_given_the_seed() {
    let rep = noisy_planted(0.8, 1, 3);
    let cfg = small_metrics();
    assert_eq!(evaluate(&rep, &cfg, 4).unwrap().to_text(), evaluate(&rep, &cfg, 4).unwrap().to_text());
}

#[test]
fn dci_requires_enough_samples() {
    let rep = Representation::planted();
    let (rows, factors) = rep.sample_rows(999, &mut Rng::new(0));
    assert!(dci_disentanglement(&rows, rep.dims(), &factors, 0.01).is_err());
    assert!(mig(&rows, rep.dims(), &factors, 20).is_err());
}
