use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qb_core::barycenter::{
    sgd_gaussian_mixture, sgd_gaussian_mixture_from, sgd_quotient, SgdConfig, StepSchedule,
};
use qb_core::bures::{GaussianComponent, GaussianManifold, SpdMatrix};
use qb_core::group::{quotient_distance, GroupSpec};
use qb_core::manifold::{Euclidean, Point, ProductPoint};
use qb_core::samplers::{gmm5_scenario, EmpiricalStream};

fn quiet(iterations: usize) -> SgdConfig {
    SgdConfig {
        eval_samples: 0,
        ..SgdConfig::new(iterations)
    }
}

fn random_tuples(seed: u64, n: usize, k: usize, d: usize) -> Vec<ProductPoint<Point>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            ProductPoint::from_rows(
                (0..k)
                    .map(|i| (0..d).map(|_| i as f64 + rng.random_range(-0.8..0.8)).collect())
                    .collect(),
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn identical_runs_give_identical_reports() {
    let s = gmm5_scenario(4);
    let mut cfg = SgdConfig::new(300);
    cfg.eval_samples = 16;
    let a = sgd_gaussian_mixture(s.sampler().unwrap(), &s.group, &cfg).unwrap();
    let b = sgd_gaussian_mixture(s.sampler().unwrap(), &s.group, &cfg).unwrap();
    assert_eq!(a.estimate, b.estimate);
    assert_eq!(a.objective_trace, b.objective_trace);
}

#[test]
fn trace_iterations_strictly_increase() {
    let s = gmm5_scenario(5);
    let mut cfg = SgdConfig::new(250);
    cfg.eval_samples = 8;
    cfg.trace_every = 30;
    let r = sgd_gaussian_mixture(s.sampler().unwrap(), &s.group, &cfg).unwrap();
    let its: Vec<usize> = r.objective_trace.iter().map(|t| t.iteration).collect();
    assert_eq!(its.first(), Some(&0));
    assert_eq!(its.last(), Some(&250));
    assert!(its.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn acting_on_draws_does_not_change_the_orbit() {
    let e = Euclidean::new(2);
    for group in [GroupSpec::symmetric(4).unwrap(), GroupSpec::cyclic(4).unwrap()] {
        let draws = random_tuples(21, 301, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let acted: Vec<_> = draws
            .iter()
            .map(|d| group.random_element(&mut rng).apply(d).unwrap())
            .collect();
        let a = sgd_quotient(draws, &e, &group, &quiet(300)).unwrap();
        let b = sgd_quotient(acted, &e, &group, &quiet(300)).unwrap();
        assert!(quotient_distance(&e, &a.estimate, &b.estimate, &group).unwrap() < 1e-10);
    }
}

#[test]
fn trivial_group_reproduces_the_sample_mean() {
    let draws = random_tuples(23, 401, 3, 2);
    let g = GroupSpec::trivial(3).unwrap();
    let r = sgd_quotient(draws.clone(), &Euclidean::new(2), &g, &quiet(400)).unwrap();
    let mut mean = vec![0.0; 6];
    for d in &draws[1..] {
        for (m, v) in mean.iter_mut().zip(d.flatten()) {
            *m += v / 400.0;
        }
    }
    for (a, b) in r.estimate.flatten().iter().zip(&mean) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn constant_mixture_is_recovered() {
    let s = gmm5_scenario(6);
    let g = s.group.clone();
    let truth = s.true_components.clone();
    let r = sgd_gaussian_mixture(std::iter::repeat(truth.clone()), &g, &SgdConfig::new(50)).unwrap();
    let space = GaussianManifold::new(5);
    assert!(quotient_distance(&space, &r.estimate, &truth, &g).unwrap() < 1e-8);
}

#[test]
fn shared_covariance_reduces_to_the_means() {
    let cov = SpdMatrix::from_row_slice(2, &[0.7, 0.2, 0.2, 0.5]).unwrap();
    let means = random_tuples(25, 200, 3, 2);
    let mixtures: Vec<_> = means
        .iter()
        .map(|m| {
            ProductPoint::new(
                m.factors()
                    .iter()
                    .map(|p| GaussianComponent::new(DVector::from_row_slice(p.coords()), cov.clone()).unwrap())
                    .collect(),
            )
            .unwrap()
        })
        .collect();
    let g = GroupSpec::symmetric(3).unwrap();
    let a = sgd_gaussian_mixture(mixtures, &g, &quiet(199)).unwrap();
    let b = sgd_quotient(means, &Euclidean::new(2), &g, &quiet(199)).unwrap();
    for (ga, pb) in a.estimate.factors().iter().zip(b.estimate.factors()) {
        for (x, y) in ga.mean().iter().zip(pb.coords()) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!((ga.covariance().matrix() - cov.matrix()).norm() < 1e-10);
    }
}

#[test]
fn trailing_objective_ends_below_the_start() {
    let s = gmm5_scenario(7);
    let draws: Vec<_> = s.sampler().unwrap().take(500).collect();
    let mut cfg = SgdConfig::new(1000);
    cfg.eval_samples = 64;
    let r = sgd_gaussian_mixture(EmpiricalStream::new(draws, 1).unwrap(), &s.group, &cfg).unwrap();
    assert!(r.trailing_objective(0.1).unwrap() <= r.objective_trace[0].objective);
}

#[test]
fn explicit_start_is_used() {
    let s = gmm5_scenario(8);
    let start = s.true_components.clone();
    let cfg = SgdConfig {
        schedule: StepSchedule::shifted(1.0, 1_000_000),
        ..quiet(1)
    };
    let r = sgd_gaussian_mixture_from(s.sampler().unwrap(), &s.group, &cfg, Some(start.clone())).unwrap();
    // A tiny first step barely moves the start.
    let space = GaussianManifold::new(5);
    assert!(quotient_distance(&space, &r.estimate, &start, &s.group).unwrap() < 1e-5);
}

#[test]
fn tail_averaging_stays_near_the_last_iterates() {
    let draws = random_tuples(26, 2001, 3, 1);
    let g = GroupSpec::symmetric(3).unwrap();
    let e = Euclidean::new(1);
    let plain = sgd_quotient(draws.clone(), &e, &g, &quiet(2000)).unwrap();
    let cfg = SgdConfig {
        tail_average: Some(0.5),
        ..quiet(2000)
    };
    let averaged = sgd_quotient(draws, &e, &g, &cfg).unwrap();
    assert!(quotient_distance(&e, &plain.estimate, &averaged.estimate, &g).unwrap() < 0.05);
}

#[test]
fn ill_conditioned_draws_still_converge() {
    let g = GroupSpec::trivial(1).unwrap();
    let thin = |v: f64| {
        ProductPoint::new(vec![GaussianComponent::new(
            DVector::zeros(2),
            SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[v, 0.0, 0.0, 1.0 / v])).unwrap(),
        )
        .unwrap()])
        .unwrap()
    };
    let draws: Vec<_> = (0..400).map(|i| thin(if i % 2 == 0 { 1e-4 } else { 1e4 })).collect();
    let r = sgd_gaussian_mixture(draws, &g, &quiet(399)).unwrap();
    let cov = r.estimate.factors()[0].covariance();
    assert!(cov.min_eigenvalue() > 0.0);
    assert!(cov.matrix().iter().all(|x| x.is_finite()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn one_dimensional_estimate_is_the_mean_of_sorted_draws(seed in 0u64..1000, k in 2usize..6) {
        let draws = random_tuples(seed, 101, k, 1);
        let g = GroupSpec::symmetric(k).unwrap();
        let r = sgd_quotient(draws.clone(), &Euclidean::new(1), &g, &quiet(100)).unwrap();
        let mut est = r.estimate.flatten();
        est.sort_by(f64::total_cmp);
        let mut mean = vec![0.0; k];
        for d in &draws[1..] {
            let mut s = d.flatten();
            s.sort_by(f64::total_cmp);
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v / 100.0;
            }
        }
        for (a, b) in est.iter().zip(&mean) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
