//! Seeded synthetic posteriors.
//!
//! [`GmmSampler`] stands in for an MCMC run over a `K`-component Gaussian
//! mixture: each draw jitters the true components and then relabels them by
//! a uniformly random group element, which is exactly what label switching
//! looks like in a sampler's output. The multi-reference alignment pipeline
//! ([`mra_generate`], [`MraGibbs`], [`mra_reconstruct`]) recovers a signal
//! from noisy cyclic shifts.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::barycenter::{sgd_quotient, SgdConfig};
use crate::bures::{GaussianComponent, GaussianManifold, SpdMatrix};
use crate::group::{align, quotient_distance, GroupElement, GroupSpec};
use crate::manifold::{Euclidean, Manifold, Point, ProductPoint};
use crate::{Error, Result};

fn check_std(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::Config(format!("{name} must be finite and nonnegative, got {v}")));
    }
    Ok(())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// A label-switched posterior over Gaussian mixtures.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmScenario {
    pub true_components: ProductPoint<GaussianComponent>,
    pub jitter_mean_std: f64,
    /// Standard deviation of the multiplicative jitter on covariance eigenvalues, in log space.
    pub jitter_cov_log_std: f64,
    pub group: GroupSpec,
    pub seed: u64,
}

impl GmmScenario {
    pub fn validate(&self) -> Result<()> {
        check_std("jitter_mean_std", self.jitter_mean_std)?;
        check_std("jitter_cov_log_std", self.jitter_cov_log_std)?;
        if self.group.degree != self.true_components.len() {
            return Err(Error::Config(format!(
                "group acts on {} components but the scenario has {}",
                self.group.degree,
                self.true_components.len()
            )));
        }
        let d = self.true_components.factors()[0].dim();
        let space = GaussianManifold::new(d);
        for c in self.true_components.factors() {
            space.check_point(c)?;
        }
        crate::manifold::validate_configuration(&space, &self.true_components)
    }

    pub fn dim(&self) -> usize {
        self.true_components.factors()[0].dim()
    }

    pub fn sampler(&self) -> Result<GmmSampler> {
        GmmSampler::new(self.clone())
    }
}

/// One draw together with how it was produced.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDraw {
    pub draw: ProductPoint<GaussianComponent>,
    /// The relabeling applied to the jittered components.
    pub element: GroupElement,
    /// Log density of the jitter under the generator, up to a constant.
    pub log_density: f64,
}

#[derive(Clone, Debug)]
pub struct GmmSampler {
    scenario: GmmScenario,
    eigen: Vec<(DVector<f64>, DMatrix<f64>)>,
    rng: ChaCha8Rng,
    apply_action: bool,
}

impl GmmSampler {
    pub fn new(scenario: GmmScenario) -> Result<Self> {
        scenario.validate()?;
        let eigen = scenario
            .true_components
            .factors()
            .iter()
            .map(|c| {
                let e = c.covariance().eigen();
                (e.eigenvalues, e.eigenvectors)
            })
            .collect();
        let rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        Ok(GmmSampler {
            scenario,
            eigen,
            rng,
            apply_action: true,
        })
    }

    /// Same stream with the relabeling step skipped. The group element is
    /// still drawn, so the jitter stays in lockstep with the acted stream.
    pub fn without_action(mut self) -> Self {
        self.apply_action = false;
        self
    }

    pub fn next_labeled(&mut self) -> LabeledDraw {
        let s = &self.scenario;
        let mut log_density = 0.0;
        let mut components = Vec::with_capacity(s.true_components.len());
        for (c, (values, vectors)) in s.true_components.factors().iter().zip(&self.eigen) {
            let mut mean = c.mean().clone();
            for m in mean.iter_mut() {
                let z = normal(&mut self.rng);
                *m += s.jitter_mean_std * z;
                if s.jitter_mean_std > 0.0 {
                    log_density -= 0.5 * z * z;
                }
            }
            let jittered = values.map(|l| {
                let z = normal(&mut self.rng);
                if s.jitter_cov_log_std > 0.0 {
                    log_density -= 0.5 * z * z;
                }
                l * (s.jitter_cov_log_std * z).exp()
            });
            let cov = vectors * DMatrix::from_diagonal(&jittered) * vectors.transpose();
            let cov = SpdMatrix::new((&cov + cov.transpose()) * 0.5)
                .expect("positive eigenvalues keep the covariance SPD");
            components.push(GaussianComponent::new(mean, cov).expect("dimensions match the truth"));
        }
        let element = s.group.random_element(&mut self.rng);
        let draw = ProductPoint::new(components).expect("K >= 1");
        let draw = if self.apply_action {
            element.apply(&draw).expect("degree checked at construction")
        } else {
            draw
        };
        LabeledDraw {
            draw,
            element,
            log_density,
        }
    }
}

impl Iterator for GmmSampler {
    type Item = ProductPoint<GaussianComponent>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_labeled().draw)
    }
}

fn component(mean: &[f64], cov: DMatrix<f64>) -> GaussianComponent {
    GaussianComponent::new(DVector::from_row_slice(mean), SpdMatrix::new(cov).expect("SPD"))
        .expect("dimensions agree")
}

/// Five Gaussians in `R^5` with means `0.5 e_i` and covariances `0.4 I`,
/// jittered by 0.05 and relabeled by the full symmetric group.
pub fn gmm5_scenario(seed: u64) -> GmmScenario {
    let components = (0..5)
        .map(|i| {
            let mut mean = [0.0; 5];
            mean[i] = 0.5;
            component(&mean, DMatrix::identity(5, 5) * 0.4)
        })
        .collect();
    GmmScenario {
        true_components: ProductPoint::new(components).expect("five components"),
        jitter_mean_std: 0.05,
        jitter_cov_log_std: 0.05,
        group: GroupSpec::symmetric(5).expect("degree 5"),
        seed,
    }
}

pub const ELLIPSE_ANGLES: [f64; 5] = [-PI / 12.0, -PI / 24.0, 0.0, PI / 24.0, PI / 12.0];
pub const ELLIPSE_SEED: u64 = 20;

/// Covariance of an ellipse with axes `(1, 0.1)` rotated by `theta`.
pub fn rotated_covariance(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.1]));
    &r * m * r.transpose()
}

/// Five centered planar Gaussians whose covariances are `diag(1, 0.1)`
/// rotated by each of [`ELLIPSE_ANGLES`].
pub fn ellipse_scenario() -> GmmScenario {
    let components = ELLIPSE_ANGLES
        .iter()
        .map(|&theta| component(&[0.0, 0.0], rotated_covariance(theta)))
        .collect();
    GmmScenario {
        true_components: ProductPoint::new(components).expect("five components"),
        jitter_mean_std: 0.05,
        jitter_cov_log_std: 0.1,
        group: GroupSpec::symmetric(5).expect("degree 5"),
        seed: ELLIPSE_SEED,
    }
}

/// A label-switched posterior over tuples of points.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanScenario {
    pub true_means: ProductPoint<Point>,
    pub jitter_std: f64,
    pub group: GroupSpec,
    pub seed: u64,
}

impl MeanScenario {
    pub fn validate(&self) -> Result<()> {
        check_std("jitter_std", self.jitter_std)?;
        if self.group.degree != self.true_means.len() {
            return Err(Error::Config(format!(
                "group acts on {} components but the scenario has {}",
                self.group.degree,
                self.true_means.len()
            )));
        }
        let space = Euclidean::new(self.true_means.factors()[0].dim());
        crate::manifold::validate_configuration(&space, &self.true_means)
    }

    pub fn sampler(&self) -> Result<MeanSampler> {
        self.validate()?;
        Ok(MeanSampler {
            scenario: self.clone(),
            rng: ChaCha8Rng::seed_from_u64(self.seed),
        })
    }
}

/// `K` scalar means `0, 1, ..., K-1` with unit jitter under `S_K`.
pub fn line_scenario(k: usize, seed: u64) -> Result<MeanScenario> {
    let means: Vec<f64> = (0..k).map(|i| i as f64).collect();
    Ok(MeanScenario {
        true_means: ProductPoint::from_scalars(&means)?,
        jitter_std: 1.0,
        group: GroupSpec::symmetric(k)?,
        seed,
    })
}

#[derive(Clone, Debug)]
pub struct MeanSampler {
    scenario: MeanScenario,
    rng: ChaCha8Rng,
}

impl Iterator for MeanSampler {
    type Item = ProductPoint<Point>;

    fn next(&mut self) -> Option<Self::Item> {
        let s = &self.scenario;
        let jittered = s
            .true_means
            .factors()
            .iter()
            .map(|p| {
                let coords = p
                    .coords()
                    .iter()
                    .map(|x| x + s.jitter_std * normal(&mut self.rng))
                    .collect();
                Point::new(coords).expect("finite")
            })
            .collect();
        let draw = ProductPoint::new(jittered).expect("K >= 1");
        Some(s.group.random_element(&mut self.rng).apply(&draw).expect("degree checked"))
    }
}

/// Endless stream over a finite set of draws, reshuffled every pass.
#[derive(Clone, Debug)]
pub struct EmpiricalStream<T> {
    items: Vec<T>,
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl<T: Clone> EmpiricalStream<T> {
    pub fn new(items: Vec<T>, seed: u64) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::contract("empirical stream needs at least one item"));
        }
        let order = (0..items.len()).collect();
        Ok(EmpiricalStream {
            items,
            order,
            pos: usize::MAX,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl<T: Clone> Iterator for EmpiricalStream<T> {
    type Item = T;

    fn next(&mut self) -> Option<T> {
        if self.pos >= self.items.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        self.pos += 1;
        Some(self.items[self.order[self.pos - 1]].clone())
    }
}

/// Noisy cyclically shifted copies of a template signal.
#[derive(Clone, Debug, PartialEq)]
pub struct MraScenario {
    pub template: Vec<f64>,
    pub noise_std: f64,
    pub num_observations: usize,
    pub seed: u64,
}

impl MraScenario {
    pub fn validate(&self) -> Result<()> {
        if self.template.len() < 2 {
            return Err(Error::Config(format!(
                "template needs at least 2 entries, got {}",
                self.template.len()
            )));
        }
        if self.template.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("template has non-finite entries".into()));
        }
        check_std("noise_std", self.noise_std)?;
        if self.num_observations == 0 {
            return Err(Error::Config("num_observations must be at least 1".into()));
        }
        Ok(())
    }
}

/// A fixed signal of length 10 with no cyclic symmetry.
pub fn default_template() -> Vec<f64> {
    vec![1.6, 1.1, 0.3, -0.4, -0.9, -1.2, -0.6, 0.2, 0.9, 0.0]
}

/// Observations with their generating shifts.
#[derive(Clone, Debug, PartialEq)]
pub struct MraData {
    pub observations: Vec<Vec<f64>>,
    pub shifts: Vec<usize>,
}

/// `(shift_s . x)_i = x_{(i + s) mod K}`.
pub fn cyclic_shift(x: &[f64], s: usize) -> Vec<f64> {
    let k = x.len();
    (0..k).map(|i| x[(i + s) % k]).collect()
}

pub fn mra_generate_labeled(scenario: &MraScenario) -> Result<MraData> {
    scenario.validate()?;
    let k = scenario.template.len();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut observations = Vec::with_capacity(scenario.num_observations);
    let mut shifts = Vec::with_capacity(scenario.num_observations);
    for _ in 0..scenario.num_observations {
        let s = rng.random_range(0..k);
        let mut y = cyclic_shift(&scenario.template, s);
        for v in &mut y {
            *v += scenario.noise_std * normal(&mut rng);
        }
        observations.push(y);
        shifts.push(s);
    }
    Ok(MraData {
        observations,
        shifts,
    })
}

pub fn mra_generate(scenario: &MraScenario) -> Result<Vec<Vec<f64>>> {
    Ok(mra_generate_labeled(scenario)?.observations)
}

pub const DEFAULT_BURN_IN: usize = 100;
pub const DEFAULT_SWEEPS: usize = 2000;
pub const DEFAULT_OBSERVATIONS: usize = 200;

/// Gibbs sampler for the signal given cyclically shifted observations,
/// under a flat prior. Each sweep resamples every shift and then the
/// signal; the iterator yields the signal after each post-burn-in sweep.
#[derive(Clone, Debug)]
pub struct MraGibbs {
    observations: Vec<Vec<f64>>,
    sigma: f64,
    rng: ChaCha8Rng,
    signal: Vec<f64>,
    shifts: Vec<usize>,
    remaining: usize,
}

impl MraGibbs {
    /// Starts at the first observation with all shifts zero.
    pub fn new(observations: Vec<Vec<f64>>, sigma: f64, sweeps: usize, burn_in: usize, seed: u64) -> Result<Self> {
        let first = observations
            .first()
            .ok_or_else(|| Error::contract("Gibbs sampler needs at least one observation"))?;
        let k = first.len();
        if k < 2 {
            return Err(Error::contract("observations need at least 2 entries"));
        }
        if let Some(bad) = observations.iter().find(|y| y.len() != k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: bad.len(),
            });
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::contract(format!("noise level must be positive, got {sigma}")));
        }
        if sweeps == 0 {
            return Err(Error::contract("need at least one sweep"));
        }
        let mut sampler = MraGibbs {
            signal: first.clone(),
            shifts: vec![0; observations.len()],
            observations,
            sigma,
            rng: ChaCha8Rng::seed_from_u64(seed),
            remaining: sweeps,
        };
        for _ in 0..burn_in {
            sampler.sweep();
        }
        Ok(sampler)
    }

    pub fn signal(&self) -> &[f64] {
        &self.signal
    }

    pub fn shifts(&self) -> &[usize] {
        &self.shifts
    }

    pub fn set_signal(&mut self, x: Vec<f64>) -> Result<()> {
        if x.len() != self.signal.len() {
            return Err(Error::DimensionMismatch {
                expected: self.signal.len(),
                found: x.len(),
            });
        }
        self.signal = x;
        Ok(())
    }

    /// Shift log weights `-|y_j - shift_s . x|^2 / (2 sigma^2)` for observation `j`.
    pub fn shift_log_weights(&self, j: usize) -> Vec<f64> {
        let y = &self.observations[j];
        let k = y.len();
        (0..k)
            .map(|s| {
                let sq: f64 = (0..k).map(|i| (y[i] - self.signal[(i + s) % k]).powi(2)).sum();
                -sq / (2.0 * self.sigma * self.sigma)
            })
            .collect()
    }

    /// Resamples every shift given the current signal.
    pub fn sample_shifts(&mut self) {
        for j in 0..self.observations.len() {
            let logw = self.shift_log_weights(j);
            let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
            let mut u = self.rng.random::<f64>() * w.iter().sum::<f64>();
            let mut pick = w.len() - 1;
            for (s, wi) in w.iter().enumerate() {
                if u < *wi {
                    pick = s;
                    break;
                }
                u -= wi;
            }
            self.shifts[j] = pick;
        }
    }

    /// Average of the observations with their current shifts undone.
    pub fn aligned_average(&self) -> Vec<f64> {
        let k = self.signal.len();
        let mut acc = vec![0.0; k];
        for (y, &s) in self.observations.iter().zip(&self.shifts) {
            for i in 0..k {
                acc[(i + s) % k] += y[i];
            }
        }
        let m = self.observations.len() as f64;
        acc.iter().map(|a| a / m).collect()
    }

    /// Resamples the signal from `N(aligned average, sigma^2 / M I)`.
    pub fn sample_signal(&mut self) {
        let sd = self.sigma / (self.observations.len() as f64).sqrt();
        self.signal = self
            .aligned_average()
            .into_iter()
            .map(|m| m + sd * normal(&mut self.rng))
            .collect();
    }

    fn sweep(&mut self) {
        self.sample_shifts();
        self.sample_signal();
    }
}

impl Iterator for MraGibbs {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        self.sweep();
        Some(self.signal.clone())
    }
}

pub fn mra_gibbs(observations: Vec<Vec<f64>>, sigma: f64, sweeps: usize, seed: u64) -> Result<MraGibbs> {
    MraGibbs::new(observations, sigma, sweeps, DEFAULT_BURN_IN, seed)
}

/// Barycenter of the draws under cyclic shifts, used as a reference to
/// align every draw before averaging. The solver cycles through the draws
/// in a seeded random order for `cfg.iterations` steps.
pub fn mra_reconstruct(draws: &[Vec<f64>], cfg: &SgdConfig) -> Result<Vec<f64>> {
    let first = draws
        .first()
        .ok_or_else(|| Error::contract("reconstruction needs at least one draw"))?;
    let k = first.len();
    let tuples = draws
        .iter()
        .map(|d| {
            if d.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: d.len(),
                });
            }
            ProductPoint::from_scalars(d)
        })
        .collect::<Result<Vec<_>>>()?;
    let group = GroupSpec::cyclic(k)?;
    let line = Euclidean::new(1);
    let stream = EmpiricalStream::new(tuples.clone(), cfg.seed)?;
    let reference = sgd_quotient(stream, &line, &group, cfg)?.estimate;
    let mut acc = vec![0.0; k];
    for t in &tuples {
        let aligned = align(&line, &reference, t, &group)?.element.apply(t)?;
        for (a, v) in acc.iter_mut().zip(aligned.flatten()) {
            *a += v;
        }
    }
    Ok(acc.iter().map(|a| a / tuples.len() as f64).collect())
}

/// `|x|^2 / (K sigma^2)`.
pub fn snr(x: &[f64], sigma: f64) -> Result<f64> {
    let sq: f64 = x.iter().map(|v| v * v).sum();
    if x.is_empty() || sq == 0.0 {
        return Err(Error::contract("signal must be nonzero"));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::contract(format!("noise level must be positive, got {sigma}")));
    }
    Ok(sq / (x.len() as f64 * sigma * sigma))
}

/// Noise level giving the requested SNR for `x`.
pub fn sigma_for_snr(x: &[f64], snr: f64) -> Result<f64> {
    if !(snr.is_finite() && snr > 0.0) {
        return Err(Error::contract(format!("SNR must be positive, got {snr}")));
    }
    let sq: f64 = x.iter().map(|v| v * v).sum();
    if x.is_empty() || sq == 0.0 {
        return Err(Error::contract("signal must be nonzero"));
    }
    Ok((sq / (x.len() as f64 * snr)).sqrt())
}

/// `min_g |estimate - g . truth| / |truth|`.
pub fn relative_error(estimate: &[f64], truth: &[f64], group: &GroupSpec) -> Result<f64> {
    let norm = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::contract("truth must be nonzero"));
    }
    let e = ProductPoint::from_scalars(estimate)?;
    let t = ProductPoint::from_scalars(truth)?;
    Ok(quotient_distance(&Euclidean::new(1), &e, &t, group)? / norm)
}
