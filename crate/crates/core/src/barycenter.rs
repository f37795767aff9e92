//! Stochastic gradient barycenters.
//!
//! * [`sgd_mean`]: Fréchet mean of a distribution on a manifold, stepping
//!   `p <- exp_p(eta_t log_p(q))` toward every fresh draw `q`.
//! * [`sgd_quotient`]: the same on `M^K` modulo a finite group; each draw is
//!   first aligned to the current estimate, then every factor steps toward
//!   its matched counterpart. The orbit of the final estimate is the
//!   barycenter of the orbit measures.
//! * [`sgd_gaussian_mixture`]: the Gaussian-mixture specialization that moves
//!   means in Euclidean space and covariance factors by `L <- L - eta (I - T) L`.
//!
//! All three are deterministic functions of the draw sequence.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bures::{self, GaussianComponent, GaussianManifold, SpdMatrix};
use crate::group::{align, AlignmentResult, GroupSpec};
use crate::manifold::{validate_configuration, Manifold, Product, ProductPoint};
use crate::{Error, Result};

/// How many times a step is halved after a singular update before giving up.
pub const MAX_STEP_HALVINGS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `eta_t = c / t`
    Harmonic,
    /// `eta_t = c / (t + t0)`
    ShiftedHarmonic,
}

/// Step sizes `eta_t` for iterations `t = 1, 2, ...`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    pub scale: f64,
    pub offset: u64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule {
            kind: ScheduleKind::Harmonic,
            scale: 1.0,
            offset: 0,
        }
    }
}

impl StepSchedule {
    pub fn shifted(scale: f64, offset: u64) -> Self {
        StepSchedule {
            kind: ScheduleKind::ShiftedHarmonic,
            scale,
            offset,
        }
    }

    pub fn step(&self, t: usize) -> f64 {
        match self.kind {
            ScheduleKind::Harmonic => self.scale / t as f64,
            ScheduleKind::ShiftedHarmonic => self.scale / (t as f64 + self.offset as f64),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Config(format!(
                "step scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    /// Number of gradient steps `T`.
    pub iterations: usize,
    /// Seed for any resampling done on behalf of the solver.
    pub seed: u64,
    pub schedule: StepSchedule,
    /// Record the objective every this many iterations.
    pub trace_every: usize,
    /// Size of the held-out set used for the objective trace. Zero disables tracing.
    pub eval_samples: usize,
    /// Average the iterates over this trailing fraction of the run.
    pub tail_average: Option<f64>,
    /// Check every iterate for coinciding factors.
    pub check_configuration: bool,
}

impl SgdConfig {
    pub fn new(iterations: usize) -> Self {
        SgdConfig {
            iterations,
            seed: 0,
            schedule: StepSchedule::default(),
            trace_every: (iterations / 50).max(1),
            eval_samples: 256,
            tail_average: None,
            check_configuration: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.trace_every == 0 {
            return Err(Error::Config("trace_every must be at least 1".into()));
        }
        if let Some(f) = self.tail_average {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!(
                    "tail_average must lie in (0, 1], got {f}"
                )));
            }
        }
        self.schedule.validate()
    }

    fn should_trace(&self, t: usize) -> bool {
        self.eval_samples > 0 && (t % self.trace_every == 0 || t == self.iterations)
    }

    fn tail_start(&self) -> Option<usize> {
        self.tail_average.map(|f| {
            let len = ((self.iterations as f64) * f).ceil() as usize;
            self.iterations - len.clamp(1, self.iterations) + 1
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarycenterReport<P> {
    pub estimate: P,
    /// Monte Carlo objective on the held-out set, starting at iteration 0.
    pub objective_trace: Vec<TracePoint>,
    /// Seconds spent in the iteration loop.
    pub wall_time: f64,
    pub config: SgdConfig,
    /// Steps that had to be halved at least once.
    pub halved_steps: usize,
}

impl<P> BarycenterReport<P> {
    /// Mean objective over the trace points in the last `fraction` of the run.
    pub fn trailing_objective(&self, fraction: f64) -> Option<f64> {
        let cutoff = (self.config.iterations as f64 * (1.0 - fraction)).floor() as usize;
        let tail: Vec<f64> = self
            .objective_trace
            .iter()
            .filter(|tp| tp.iteration >= cutoff)
            .map(|tp| tp.objective)
            .collect();
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

/// Monte Carlo estimate of the barycenter objective for the orbit of
/// `candidate`: the mean squared quotient distance to `samples`.
pub fn estimate_objective<M: Manifold>(
    factor: &M,
    candidate: &ProductPoint<M::Point>,
    samples: &[ProductPoint<M::Point>],
    group: &GroupSpec,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::contract("objective needs at least one sample"));
    }
    let mut total = 0.0;
    for s in samples {
        total += align(factor, candidate, s, group)?.cost;
    }
    Ok(total / samples.len() as f64)
}

fn draw<T>(it: &mut impl Iterator<Item = T>, drawn: &mut usize, needed: usize) -> Result<T> {
    let next = it.next().ok_or(Error::SamplerExhausted {
        drawn: *drawn,
        needed,
    })?;
    *drawn += 1;
    Ok(next)
}

/// `exp_p(eta log_p(q))`, halving `eta` whenever the exponential map reports
/// a singular step. Returns the new point and whether a halving happened.
fn geodesic_step<M: Manifold>(
    m: &M,
    p: &M::Point,
    q: &M::Point,
    eta: f64,
) -> Result<(M::Point, bool)> {
    let direction = m.log(p, q)?;
    let mut eta = eta;
    for attempt in 0..=MAX_STEP_HALVINGS {
        match m.exp(p, &m.scale(&direction, eta)) {
            Ok(next) => return Ok((next, attempt > 0)),
            Err(Error::StepTooLarge { eigenvalue }) if attempt < MAX_STEP_HALVINGS => {
                log::warn!("singular step (eigenvalue {eigenvalue:e}); halving eta to {}", eta / 2.0);
                eta *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!("the last attempt returns")
}

/// Running geodesic average of iterates, used for tail averaging.
struct IterateAverage<P> {
    mean: Option<P>,
    count: usize,
}

impl<P: Clone> IterateAverage<P> {
    fn new() -> Self {
        IterateAverage {
            mean: None,
            count: 0,
        }
    }

    fn push<M: Manifold<Point = P>>(&mut self, m: &M, p: &P) -> Result<()> {
        self.count += 1;
        self.mean = Some(match &self.mean {
            None => p.clone(),
            Some(mean) => geodesic_step(m, mean, p, 1.0 / self.count as f64)?.0,
        });
        Ok(())
    }
}

struct Engine<'a, M: Manifold> {
    manifold: &'a M,
    cfg: &'a SgdConfig,
}

impl<M: Manifold> Engine<'_, M> {
    /// Shared driver: `align` maps a draw onto the representative closest to
    /// the current estimate, `objective` scores an estimate on the held-out set.
    fn run<I>(
        &self,
        sampler: I,
        start: Option<M::Point>,
        mut align: impl FnMut(&M::Point, M::Point) -> Result<M::Point>,
        objective: impl Fn(&M::Point, &[M::Point]) -> Result<f64>,
        check: impl Fn(&M::Point) -> Result<()>,
    ) -> Result<BarycenterReport<M::Point>>
    where
        I: IntoIterator<Item = M::Point>,
    {
        let cfg = self.cfg;
        cfg.validate()?;
        let needed = cfg.eval_samples + cfg.iterations + usize::from(start.is_none());
        let mut it = sampler.into_iter();
        let mut drawn = 0;
        let eval: Vec<M::Point> = (0..cfg.eval_samples)
            .map(|_| draw(&mut it, &mut drawn, needed))
            .collect::<Result<_>>()?;

        let clock = Instant::now();
        let mut p = match start {
            Some(p) => p,
            None => draw(&mut it, &mut drawn, needed)?,
        };
        self.manifold.check_point(&p)?;
        let mut trace = Vec::new();
        if cfg.eval_samples > 0 {
            trace.push(TracePoint {
                iteration: 0,
                objective: objective(&p, &eval)?,
            });
        }
        let tail_start = cfg.tail_start();
        let mut average = IterateAverage::new();
        let mut halved_steps = 0;
        for t in 1..=cfg.iterations {
            let q = draw(&mut it, &mut drawn, needed)?;
            let q = align(&p, q)?;
            let (next, halved) = geodesic_step(self.manifold, &p, &q, cfg.schedule.step(t))?;
            p = next;
            halved_steps += usize::from(halved);
            if cfg.check_configuration {
                check(&p)?;
            }
            if tail_start.is_some_and(|s| t >= s) {
                let representative = match &average.mean {
                    Some(mean) => align(mean, p.clone())?,
                    None => p.clone(),
                };
                average.push(self.manifold, &representative)?;
            }
            if cfg.should_trace(t) {
                trace.push(TracePoint {
                    iteration: t,
                    objective: objective(&p, &eval)?,
                });
            }
        }
        let wall_time = clock.elapsed().as_secs_f64();
        Ok(BarycenterReport {
            estimate: average.mean.unwrap_or(p),
            objective_trace: trace,
            wall_time,
            config: cfg.clone(),
            halved_steps,
        })
    }
}

/// Fréchet mean of a distribution on `manifold` by stochastic gradient descent,
/// initialized at the first draw.
pub fn sgd_mean<M, I>(sampler: I, manifold: &M, cfg: &SgdConfig) -> Result<BarycenterReport<M::Point>>
where
    M: Manifold,
    I: IntoIterator<Item = M::Point>,
{
    sgd_mean_from(sampler, manifold, cfg, None)
}

/// [`sgd_mean`] with an optional explicit starting point.
pub fn sgd_mean_from<M, I>(
    sampler: I,
    manifold: &M,
    cfg: &SgdConfig,
    start: Option<M::Point>,
) -> Result<BarycenterReport<M::Point>>
where
    M: Manifold,
    I: IntoIterator<Item = M::Point>,
{
    let engine = Engine { manifold, cfg };
    engine.run(
        sampler,
        start,
        |_, q| Ok(q),
        |p, eval| {
            let mut total = 0.0;
            for q in eval {
                total += manifold.dist_sq(p, q)?;
            }
            Ok(total / eval.len() as f64)
        },
        |_| Ok(()),
    )
}

/// Barycenter of a distribution on `M^K / G`: the returned tuple is one
/// representative of the barycenter orbit.
pub fn sgd_quotient<M, I>(
    sampler: I,
    factor: &M,
    group: &GroupSpec,
    cfg: &SgdConfig,
) -> Result<BarycenterReport<ProductPoint<M::Point>>>
where
    M: Manifold + Clone,
    I: IntoIterator<Item = ProductPoint<M::Point>>,
{
    sgd_quotient_from(sampler, factor, group, cfg, None)
}

/// [`sgd_quotient`] with an optional explicit starting tuple.
pub fn sgd_quotient_from<M, I>(
    sampler: I,
    factor: &M,
    group: &GroupSpec,
    cfg: &SgdConfig,
    start: Option<ProductPoint<M::Point>>,
) -> Result<BarycenterReport<ProductPoint<M::Point>>>
where
    M: Manifold + Clone,
    I: IntoIterator<Item = ProductPoint<M::Point>>,
{
    let product = Product::new(factor.clone(), group.degree);
    let engine = Engine {
        manifold: &product,
        cfg,
    };
    engine.run(
        sampler,
        start,
        |p, q| align(factor, p, &q, group)?.element.apply(&q),
        |p, eval| estimate_objective(factor, p, eval, group),
        |p| validate_configuration(factor, p),
    )
}

/// Barycenter of a distribution over `K`-component Gaussian mixtures.
///
/// Each draw is aligned to the estimate with the `W2` cost; then means step
/// `m <- m - eta (m - m')` and covariance factors step `L <- L - eta (I - T) L`
/// where `T` transports the estimate's covariance onto the matched one.
pub fn sgd_gaussian_mixture<I>(
    sampler: I,
    group: &GroupSpec,
    cfg: &SgdConfig,
) -> Result<BarycenterReport<ProductPoint<GaussianComponent>>>
where
    I: IntoIterator<Item = ProductPoint<GaussianComponent>>,
{
    sgd_gaussian_mixture_from(sampler, group, cfg, None)
}

/// [`sgd_gaussian_mixture`] with an optional explicit starting mixture.
pub fn sgd_gaussian_mixture_from<I>(
    sampler: I,
    group: &GroupSpec,
    cfg: &SgdConfig,
    start: Option<ProductPoint<GaussianComponent>>,
) -> Result<BarycenterReport<ProductPoint<GaussianComponent>>>
where
    I: IntoIterator<Item = ProductPoint<GaussianComponent>>,
{
    cfg.validate()?;
    let needed = cfg.eval_samples + cfg.iterations + usize::from(start.is_none());
    let mut it = sampler.into_iter();
    let mut drawn = 0;
    let eval: Vec<_> = (0..cfg.eval_samples)
        .map(|_| draw(&mut it, &mut drawn, needed))
        .collect::<Result<_>>()?;

    let clock = Instant::now();
    let mut p = match start {
        Some(p) => p,
        None => draw(&mut it, &mut drawn, needed)?,
    };
    let d = p.factors()[0].dim();
    let factor = GaussianManifold::new(d);
    let product = Product::new(factor, group.degree);
    product.check_point(&p)?;

    let mut trace = Vec::new();
    if cfg.eval_samples > 0 {
        trace.push(TracePoint {
            iteration: 0,
            objective: estimate_objective(&factor, &p, &eval, group)?,
        });
    }
    let tail_start = cfg.tail_start();
    let mut average = IterateAverage::new();
    let mut halved_steps = 0;
    for t in 1..=cfg.iterations {
        let q = draw(&mut it, &mut drawn, needed)?;
        let AlignmentResult { element, .. } = align(&factor, &p, &q, group)?;
        let q = element.apply(&q)?;
        let mut eta = cfg.schedule.step(t);
        let mut attempt = 0;
        p = loop {
            match mixture_step(&p, &q, eta) {
                Ok(next) => break next,
                Err(Error::StepTooLarge { eigenvalue }) if attempt < MAX_STEP_HALVINGS => {
                    log::warn!(
                        "iteration {t}: singular factor update (eigenvalue {eigenvalue:e}); halving eta"
                    );
                    eta *= 0.5;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        halved_steps += usize::from(attempt > 0);
        if cfg.check_configuration {
            validate_configuration(&factor, &p)?;
        }
        if tail_start.is_some_and(|s| t >= s) {
            let representative = match &average.mean {
                Some(mean) => align(&factor, mean, &p, group)?.element.apply(&p)?,
                None => p.clone(),
            };
            average.push(&product, &representative)?;
        }
        if cfg.should_trace(t) {
            trace.push(TracePoint {
                iteration: t,
                objective: estimate_objective(&factor, &p, &eval, group)?,
            });
        }
    }
    Ok(BarycenterReport {
        estimate: average.mean.unwrap_or(p),
        objective_trace: trace,
        wall_time: clock.elapsed().as_secs_f64(),
        config: cfg.clone(),
        halved_steps,
    })
}

/// One factor-parameterized update of every component toward its match.
fn mixture_step(
    p: &ProductPoint<GaussianComponent>,
    q: &ProductPoint<GaussianComponent>,
    eta: f64,
) -> Result<ProductPoint<GaussianComponent>> {
    let mut out = Vec::with_capacity(p.len());
    for (i, (pi, qi)) in p.factors().iter().zip(q.factors()).enumerate() {
        let mean = pi.mean() - (pi.mean() - qi.mean()) * eta;
        let d = pi.dim();
        let t = bures::transport_map(pi.covariance(), qi.covariance())?;
        let identity = DMatrix::<f64>::identity(d, d);
        let update = &identity - (&identity - t) * eta;
        check_step(&update)?;
        let factor = &update * pi.factor();
        let mut next = GaussianComponent::from_factor(mean, factor)?;
        let (floored, clamped) = next.covariance().with_eigen_floor();
        if clamped {
            log::warn!("component {i}: covariance fell below the eigenvalue floor; clamped");
            next = GaussianComponent::new(next.mean().clone(), floored)?;
        }
        out.push(next);
    }
    ProductPoint::new(out)
}

fn check_step(update: &DMatrix<f64>) -> Result<()> {
    let sym = SpdMatrix::from_gram((update + update.transpose()) * 0.5);
    let smallest = sym
        .eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, l| acc.min(l.abs()));
    if smallest < 1e-12 {
        return Err(Error::StepTooLarge {
            eigenvalue: smallest,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bures::Bures;
    use crate::group::quotient_distance;
    use crate::manifold::{Euclidean, Point};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quiet(iterations: usize) -> SgdConfig {
        SgdConfig {
            eval_samples: 0,
            ..SgdConfig::new(iterations)
        }
    }

    #[test]
    fn schedule_values() {
        let h = StepSchedule::default();
        assert_eq!(h.step(1), 1.0);
        assert_eq!(h.step(4), 0.25);
        let s = StepSchedule::shifted(2.0, 3);
        assert_eq!(s.step(1), 0.5);
        assert!(StepSchedule::shifted(0.0, 0).validate().is_err());
    }

    #[test]
    fn point_mass_is_reached_in_one_step() {
        let m = Euclidean::new(2);
        let x = Point::new(vec![1.5, -0.5]).unwrap();
        let start = Point::new(vec![9.0, 9.0]).unwrap();
        let r = sgd_mean_from(std::iter::repeat(x.clone()), &m, &quiet(1), Some(start)).unwrap();
        assert_eq!(r.estimate, x);
    }

    #[test]
    fn harmonic_steps_give_the_running_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws: Vec<Point> = (0..501)
            .map(|_| Point::new(vec![rng.random_range(-3.0..3.0), rng.random_range(0.0..1.0)]).unwrap())
            .collect();
        let r = sgd_mean(draws.clone(), &Euclidean::new(2), &quiet(500)).unwrap();
        for c in 0..2 {
            let mean = draws[1..].iter().map(|p| p.coords()[c]).sum::<f64>() / 500.0;
            assert!((r.estimate.coords()[c] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_bures_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let one = SpdMatrix::from_diagonal(&[1.0]).unwrap();
        let nine = SpdMatrix::from_diagonal(&[9.0]).unwrap();
        let draws = (0..10_001).map(|_| if rng.random_bool(0.5) { one.clone() } else { nine.clone() });
        let r = sgd_mean(draws, &Bures::new(1), &quiet(10_000)).unwrap();
        assert!((r.estimate.matrix()[(0, 0)] - 4.0).abs() < 0.1);
    }

    #[test]
    fn exhaustion_is_reported() {
        let draws = vec![Point::new(vec![0.0]).unwrap(); 3];
        let err = sgd_mean(draws, &Euclidean::new(1), &quiet(5)).unwrap_err();
        assert_eq!(err, Error::SamplerExhausted { drawn: 3, needed: 6 });
    }

    #[test]
    fn single_orbit_sampler() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let e = Euclidean::new(2);
        let x = ProductPoint::from_rows(vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]]).unwrap();
        let g = GroupSpec::symmetric(3).unwrap();
        let draws: Vec<_> = (0..400).map(|_| g.random_element(&mut rng).apply(&x).unwrap()).collect();
        let r = sgd_quotient(draws, &e, &g, &SgdConfig::new(100)).unwrap();
        assert!(quotient_distance(&e, &r.estimate, &x, &g).unwrap() < 1e-10);
        assert!(r.objective_trace.iter().all(|tp| tp.objective < 1e-20));
    }

    #[test]
    fn trivial_group_is_the_product_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let draws: Vec<_> = (0..201)
            .map(|_| ProductPoint::from_scalars(&[rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).unwrap())
            .collect();
        let g = GroupSpec::trivial(2).unwrap();
        let r = sgd_quotient(draws.clone(), &Euclidean::new(1), &g, &quiet(200)).unwrap();
        for i in 0..2 {
            let mean = draws[1..].iter().map(|d| d.factors()[i].coords()[0]).sum::<f64>() / 200.0;
            assert!((r.estimate.factors()[i].coords()[0] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_example() {
        let e = Euclidean::new(1);
        let g = GroupSpec::symmetric(2).unwrap();
        let samples = vec![
            ProductPoint::from_scalars(&[0.0, 2.0]).unwrap(),
            ProductPoint::from_scalars(&[4.0, 6.0]).unwrap(),
        ];
        let c = ProductPoint::from_scalars(&[2.0, 4.0]).unwrap();
        assert_eq!(estimate_objective(&e, &c, &samples, &g).unwrap(), 8.0);
        assert_eq!(estimate_objective(&e, &samples[0], &samples[..1], &g).unwrap(), 0.0);
        assert!(estimate_objective(&e, &c, &[], &g).is_err());
    }

    #[test]
    fn mixture_factor_step_matches_bures_geodesic() {
        let a = GaussianComponent::new(
            DVector::from_vec(vec![0.0, 1.0]),
            SpdMatrix::from_row_slice(2, &[2.0, 0.3, 0.3, 1.0]).unwrap(),
        )
        .unwrap();
        let b = GaussianComponent::new(
            DVector::from_vec(vec![1.0, 0.0]),
            SpdMatrix::from_row_slice(2, &[0.5, -0.1, -0.1, 0.7]).unwrap(),
        )
        .unwrap();
        let p = ProductPoint::new(vec![a.clone()]).unwrap();
        let q = ProductPoint::new(vec![b.clone()]).unwrap();
        let eta = 0.3;
        let stepped = mixture_step(&p, &q, eta).unwrap();
        let m = GaussianManifold::new(2);
        let geodesic = m.exp(&a, &m.scale(&m.log(&a, &b).unwrap(), eta)).unwrap();
        assert!(m.dist(&stepped.factors()[0], &geodesic).unwrap() < 1e-10);
    }

    #[test]
    fn oversized_steps_are_halved() {
        let a = GaussianComponent::new(DVector::zeros(1), SpdMatrix::from_diagonal(&[4.0]).unwrap()).unwrap();
        let b = GaussianComponent::new(DVector::zeros(1), SpdMatrix::from_diagonal(&[1.0]).unwrap()).unwrap();
        // T = 1/2, so I - eta (I - T) vanishes at eta = 2.
        let p = ProductPoint::new(vec![a]).unwrap();
        let q = ProductPoint::new(vec![b]).unwrap();
        assert!(matches!(mixture_step(&p, &q, 2.0), Err(Error::StepTooLarge { .. })));
        let cfg = SgdConfig {
            schedule: StepSchedule::shifted(2.0, 0),
            ..quiet(1)
        };
        let g = GroupSpec::trivial(1).unwrap();
        let r = sgd_gaussian_mixture_from(std::iter::repeat(q), &g, &cfg, Some(p)).unwrap();
        assert_eq!(r.halved_steps, 1);
        assert!((r.estimate.factors()[0].covariance().matrix()[(0, 0)] - 1.0).abs() < 1e-12);
    }
}
