use std::collections::HashMap;

use qb_core::barycenter::SgdConfig;
use qb_core::group::GroupSpec;
use qb_core::samplers::{
    cyclic_shift, default_template, gmm5_scenario, mra_generate, mra_generate_labeled, mra_gibbs,
    mra_reconstruct, relative_error, sigma_for_snr, GmmScenario, MraGibbs, MraScenario,
};

// Upper 1% points of the chi-square distribution.
const CHI2_99_DF5: f64 = 15.086;
const CHI2_99_DF9: f64 = 21.666;

fn chi_square(counts: &[usize], total: usize) -> f64 {
    let expected = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

fn three_component(seed: u64) -> GmmScenario {
    let mut s = gmm5_scenario(seed);
    let comps: Vec<_> = s.true_components.factors()[..3].to_vec();
    s.true_components = qb_core::manifold::ProductPoint::new(comps).unwrap();
    s.group = GroupSpec::symmetric(3).unwrap();
    s
}

#[test]
fn relabelings_are_uniform() {
    let mut sampler = three_component(31).sampler().unwrap();
    let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
    for _ in 0..6000 {
        *seen.entry(sampler.next_labeled().element.mapping().to_vec()).or_default() += 1;
    }
    assert_eq!(seen.len(), 6);
    let counts: Vec<usize> = seen.values().copied().collect();
    assert!(chi_square(&counts, 6000) < CHI2_99_DF5);
}

#[test]
fn samplers_are_deterministic() {
    let s = gmm5_scenario(32);
    let a: Vec<_> = s.sampler().unwrap().take(20).collect();
    let b: Vec<_> = s.sampler().unwrap().take(20).collect();
    assert_eq!(a, b);
    let m = MraScenario {
        template: default_template(),
        noise_std: 0.5,
        num_observations: 30,
        seed: 33,
    };
    assert_eq!(mra_generate(&m).unwrap(), mra_generate(&m).unwrap());
    let obs = mra_generate(&m).unwrap();
    let c1: Vec<_> = mra_gibbs(obs.clone(), 0.5, 50, 34).unwrap().collect();
    let c2: Vec<_> = mra_gibbs(obs, 0.5, 50, 34).unwrap().collect();
    assert_eq!(c1, c2);
}

#[test]
fn shifts_are_uniform() {
    let m = MraScenario {
        template: default_template(),
        noise_std: 1.0,
        num_observations: 10_000,
        seed: 35,
    };
    let data = mra_generate_labeled(&m).unwrap();
    let mut counts = vec![0; 10];
    for s in data.shifts {
        counts[s] += 1;
    }
    assert!(chi_square(&counts, 10_000) < CHI2_99_DF9);
}

#[test]
fn single_observation_at_tiny_noise() {
    let y = cyclic_shift(&default_template(), 4);
    let g = GroupSpec::cyclic(10).unwrap();
    for x in mra_gibbs(vec![y.clone()], 1e-6, 20, 36).unwrap() {
        assert!(relative_error(&x, &y, &g).unwrap() < 1e-3);
    }
}

#[test]
fn signal_step_matches_the_conjugate_mean() {
    let sigma = 0.8;
    let m = MraScenario {
        template: default_template(),
        noise_std: sigma,
        num_observations: 40,
        seed: 37,
    };
    let mut gibbs = MraGibbs::new(mra_generate(&m).unwrap(), sigma, 1, 0, 38).unwrap();
    let target = gibbs.aligned_average();
    let n = 10_000;
    let mut acc = vec![0.0; 10];
    for _ in 0..n {
        gibbs.sample_signal();
        for (a, v) in acc.iter_mut().zip(gibbs.signal()) {
            *a += v / n as f64;
        }
    }
    let se = sigma / (40.0f64).sqrt() / (n as f64).sqrt();
    for (a, t) in acc.iter().zip(&target) {
        assert!((a - t).abs() < 3.0 * se, "{a} vs {t}");
    }
}

#[test]
fn shift_step_recovers_generating_shifts() {
    let x = default_template();
    let sigma = sigma_for_snr(&x, 16.0).unwrap();
    let m = MraScenario {
        template: x.clone(),
        noise_std: sigma,
        num_observations: 300,
        seed: 39,
    };
    let data = mra_generate_labeled(&m).unwrap();
    let mut gibbs = MraGibbs::new(data.observations, sigma, 1, 0, 40).unwrap();
    gibbs.set_signal(x).unwrap();
    let mut votes = vec![vec![0usize; 10]; 300];
    for _ in 0..25 {
        gibbs.sample_shifts();
        for (j, &s) in gibbs.shifts().iter().enumerate() {
            votes[j][s] += 1;
        }
    }
    let hits = votes
        .iter()
        .zip(&data.shifts)
        .filter(|(v, &s)| v.iter().enumerate().max_by_key(|(_, c)| **c).unwrap().0 == s)
        .count();
    assert!(hits as f64 >= 0.99 * 300.0, "{hits} of 300");
}

#[test]
fn reconstruction_of_an_exact_orbit() {
    let v = default_template();
    let draws: Vec<_> = (0..50).map(|i| cyclic_shift(&v, (i * 7) % 10)).collect();
    let mut cfg = SgdConfig::new(100);
    cfg.eval_samples = 0;
    let rec = mra_reconstruct(&draws, &cfg).unwrap();
    assert!(relative_error(&rec, &v, &GroupSpec::cyclic(10).unwrap()).unwrap() < 1e-10);
}

#[test]
fn noiseless_pipeline() {
    let x = default_template();
    let m = MraScenario {
        template: x.clone(),
        noise_std: 1e-6,
        num_observations: 50,
        seed: 41,
    };
    let draws: Vec<_> = mra_gibbs(mra_generate(&m).unwrap(), 1e-6, 200, 42).unwrap().collect();
    let mut cfg = SgdConfig::new(200);
    cfg.eval_samples = 0;
    let rec = mra_reconstruct(&draws, &cfg).unwrap();
    assert!(relative_error(&rec, &x, &GroupSpec::cyclic(10).unwrap()).unwrap() < 1e-3);
}
