//! Python module `qb`.
//!
//! Matrices are lists of rows. A tuple of points is a list of `K` coordinate
//! lists. A Gaussian mixture is a list of `(mean, covariance)` pairs.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use qb_core::barycenter::{self, BarycenterReport, SgdConfig};
use qb_core::baselines;
use qb_core::bures::{self, GaussianComponent, GaussianManifold, SpdMatrix};
use qb_core::group::{self, GroupElement, GroupKind, GroupSpec};
use qb_core::manifold::{Euclidean, Point, ProductPoint};
use qb_core::samplers::{self, EmpiricalStream, MraScenario};

type Rows = Vec<Vec<f64>>;
type Mixture = Vec<(Vec<f64>, Rows)>;

fn err(e: qb_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: &Rows) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    Ok(DMatrix::from_row_iterator(n, m, rows.iter().flatten().copied()))
}

fn from_matrix(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn to_spd(rows: &Rows) -> PyResult<SpdMatrix> {
    SpdMatrix::new(to_matrix(rows)?).map_err(err)
}

fn to_tuple(rows: &Rows) -> PyResult<ProductPoint<Point>> {
    ProductPoint::from_rows(rows.clone()).map_err(err)
}

fn from_tuple(p: &ProductPoint<Point>) -> Rows {
    p.factors().iter().map(|f| f.coords().to_vec()).collect()
}

fn to_mixture(m: &Mixture) -> PyResult<ProductPoint<GaussianComponent>> {
    let comps = m
        .iter()
        .map(|(mean, cov)| GaussianComponent::new(DVector::from_row_slice(mean), to_spd(cov)?).map_err(err))
        .collect::<PyResult<Vec<_>>>()?;
    ProductPoint::new(comps).map_err(err)
}

fn from_mixture(p: &ProductPoint<GaussianComponent>) -> Mixture {
    p.factors()
        .iter()
        .map(|c| (c.mean().iter().copied().collect(), from_matrix(c.covariance().matrix())))
        .collect()
}

fn point_dim(tuples: &[ProductPoint<Point>]) -> PyResult<usize> {
    tuples
        .first()
        .and_then(|t| t.factors().first())
        .map(Point::dim)
        .ok_or_else(|| PyValueError::new_err("need at least one nonempty tuple"))
}

fn mixture_dim(mixtures: &[ProductPoint<GaussianComponent>]) -> PyResult<usize> {
    mixtures
        .first()
        .and_then(|t| t.factors().first())
        .map(GaussianComponent::dim)
        .ok_or_else(|| PyValueError::new_err("need at least one nonempty mixture"))
}

/// A label-switching group acting on `degree` factors.
#[pyclass(name = "Group", frozen)]
struct PyGroup {
    spec: GroupSpec,
}

#[pymethods]
impl PyGroup {
    /// `kind` is one of `sym`, `cyc` or `none`.
    #[new]
    fn new(kind: &str, degree: usize) -> PyResult<Self> {
        let kind: GroupKind = kind.parse().map_err(err)?;
        Ok(PyGroup {
            spec: GroupSpec::new(kind, degree).map_err(err)?,
        })
    }

    #[getter]
    fn kind(&self) -> String {
        self.spec.kind.to_string()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.spec.degree
    }

    fn order(&self) -> u128 {
        self.spec.order()
    }

    /// Every element as a mapping list; factor `i` of `g·p` is factor `g[i]` of `p`.
    fn elements(&self) -> PyResult<Vec<Vec<usize>>> {
        Ok(self
            .spec
            .elements()
            .map_err(err)?
            .iter()
            .map(|g| g.mapping().to_vec())
            .collect())
    }

    /// Applies the element `mapping` to a list of factors.
    fn apply(&self, py: Python<'_>, mapping: Vec<usize>, values: Vec<Py<PyAny>>) -> PyResult<Vec<Py<PyAny>>> {
        let g = GroupElement::new(mapping).map_err(err)?;
        if g.degree() != self.spec.degree {
            return Err(PyValueError::new_err(format!(
                "element has degree {}, group has degree {}",
                g.degree(),
                self.spec.degree
            )));
        }
        let idx: Vec<usize> = (0..values.len()).collect();
        Ok(g.apply_slice(&idx)
            .map_err(err)?
            .into_iter()
            .map(|i| values[i].clone_ref(py))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!("Group('{}', {})", self.spec.kind, self.spec.degree)
    }
}

/// Outcome of a barycenter run.
#[pyclass(name = "Report", frozen)]
struct PyReport {
    #[pyo3(get)]
    estimate: Py<PyAny>,
    /// `(iteration, objective)` pairs.
    #[pyo3(get)]
    objective_trace: Vec<(usize, f64)>,
    #[pyo3(get)]
    wall_time: f64,
    #[pyo3(get)]
    halved_steps: usize,
    trailing: Option<f64>,
}

#[pymethods]
impl PyReport {
    /// Mean objective over the last tenth of the run, if any was traced.
    #[getter]
    fn trailing_objective(&self) -> Option<f64> {
        self.trailing
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(trace points={}, wall_time={:.3}s, halved_steps={})",
            self.objective_trace.len(),
            self.wall_time,
            self.halved_steps
        )
    }
}

fn report<P>(r: BarycenterReport<P>, estimate: Py<PyAny>) -> PyReport {
    PyReport {
        estimate,
        objective_trace: r.objective_trace.iter().map(|t| (t.iteration, t.objective)).collect(),
        wall_time: r.wall_time,
        halved_steps: r.halved_steps,
        trailing: r.trailing_objective(0.1),
    }
}

fn sgd_config(iterations: usize, seed: u64, eval_samples: usize, tail_average: Option<f64>) -> PyResult<SgdConfig> {
    let cfg = SgdConfig {
        seed,
        eval_samples,
        tail_average,
        ..SgdConfig::new(iterations)
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

#[pyfunction]
fn bures_distance(a: Rows, b: Rows) -> PyResult<f64> {
    Ok(bures::bures_distance_sq(&to_spd(&a)?, &to_spd(&b)?).map_err(err)?.max(0.0).sqrt())
}

#[pyfunction]
fn spd_sqrt(a: Rows) -> PyResult<Rows> {
    Ok(from_matrix(bures::spd_sqrt(&to_spd(&a)?).matrix()))
}

/// Optimal transport map `T` with `T a T = b`.
#[pyfunction]
fn transport_map(a: Rows, b: Rows) -> PyResult<Rows> {
    Ok(from_matrix(&bures::transport_map(&to_spd(&a)?, &to_spd(&b)?).map_err(err)?))
}

#[pyfunction]
fn bures_exp(base: Rows, tangent: Rows) -> PyResult<Rows> {
    let s = bures::bures_exp(&to_spd(&base)?, &to_matrix(&tangent)?).map_err(err)?;
    Ok(from_matrix(s.matrix()))
}

#[pyfunction]
fn bures_log(base: Rows, target: Rows) -> PyResult<Rows> {
    Ok(from_matrix(&bures::bures_log(&to_spd(&base)?, &to_spd(&target)?).map_err(err)?))
}

/// Squared 2-Wasserstein distance between two Gaussians.
#[pyfunction]
fn gaussian_w2_sq(mean_a: Vec<f64>, cov_a: Rows, mean_b: Vec<f64>, cov_b: Rows) -> PyResult<f64> {
    let a = GaussianComponent::new(DVector::from_vec(mean_a), to_spd(&cov_a)?).map_err(err)?;
    let b = GaussianComponent::new(DVector::from_vec(mean_b), to_spd(&cov_b)?).map_err(err)?;
    bures::gaussian_w2_sq(&a, &b).map_err(err)
}

/// Minimizes `sum_i cost[i][s(i)]`; returns `(s, total cost)`.
#[pyfunction]
fn solve_lap(cost: Rows) -> PyResult<(Vec<usize>, f64)> {
    let r = group::solve_lap(&to_matrix(&cost)?).map_err(err)?;
    Ok((r.element.mapping().to_vec(), r.cost))
}

/// Aligns tuple `q` to tuple `p`; returns `(element, squared distance)`.
#[pyfunction]
fn align(p: Rows, q: Rows, group: &PyGroup) -> PyResult<(Vec<usize>, f64)> {
    let (p, q) = (to_tuple(&p)?, to_tuple(&q)?);
    let space = Euclidean::new(point_dim(std::slice::from_ref(&p))?);
    let r = group::align(&space, &p, &q, &group.spec).map_err(err)?;
    Ok((r.element.mapping().to_vec(), r.cost))
}

#[pyfunction]
fn quotient_distance(p: Rows, q: Rows, group: &PyGroup) -> PyResult<f64> {
    let (p, q) = (to_tuple(&p)?, to_tuple(&q)?);
    let space = Euclidean::new(point_dim(std::slice::from_ref(&p))?);
    group::quotient_distance(&space, &p, &q, &group.spec).map_err(err)
}

#[pyfunction]
fn mixture_distance(p: Mixture, q: Mixture, group: &PyGroup) -> PyResult<f64> {
    let (p, q) = (to_mixture(&p)?, to_mixture(&q)?);
    let space = GaussianManifold::new(mixture_dim(std::slice::from_ref(&p))?);
    group::quotient_distance(&space, &p, &q, &group.spec).map_err(err)
}

/// Barycenter of tuples of points, cycling through `draws` in a seeded order.
#[pyfunction]
#[pyo3(signature = (draws, group, iterations, seed=0, eval_samples=256, tail_average=None))]
fn sgd_quotient(
    py: Python<'_>,
    draws: Vec<Rows>,
    group: &PyGroup,
    iterations: usize,
    seed: u64,
    eval_samples: usize,
    tail_average: Option<f64>,
) -> PyResult<PyReport> {
    let cfg = sgd_config(iterations, seed, eval_samples, tail_average)?;
    let tuples = draws.iter().map(to_tuple).collect::<PyResult<Vec<_>>>()?;
    let space = Euclidean::new(point_dim(&tuples)?);
    let spec = group.spec;
    let r = py
        .detach(|| {
            let stream = EmpiricalStream::new(tuples, seed)?;
            barycenter::sgd_quotient(stream, &space, &spec, &cfg)
        })
        .map_err(err)?;
    let estimate = from_tuple(&r.estimate).into_pyobject(py)?.into_any().unbind();
    Ok(report(r, estimate))
}

/// Barycenter of Gaussian mixtures, cycling through `draws` in a seeded order.
#[pyfunction]
#[pyo3(signature = (draws, group, iterations, seed=0, eval_samples=256, tail_average=None))]
fn sgd_gaussian_mixture(
    py: Python<'_>,
    draws: Vec<Mixture>,
    group: &PyGroup,
    iterations: usize,
    seed: u64,
    eval_samples: usize,
    tail_average: Option<f64>,
) -> PyResult<PyReport> {
    let cfg = sgd_config(iterations, seed, eval_samples, tail_average)?;
    let mixtures = draws.iter().map(to_mixture).collect::<PyResult<Vec<_>>>()?;
    let spec = group.spec;
    let r = py
        .detach(|| {
            let stream = EmpiricalStream::new(mixtures, seed)?;
            barycenter::sgd_gaussian_mixture(stream, &spec, &cfg)
        })
        .map_err(err)?;
    let estimate = from_mixture(&r.estimate).into_pyobject(py)?.into_any().unbind();
    Ok(report(r, estimate))
}

/// Index of the mixture draw whose two closest components are closest.
#[pyfunction]
fn boundary_index(draws: Vec<Mixture>) -> PyResult<usize> {
    let mixtures = draws.iter().map(to_mixture).collect::<PyResult<Vec<_>>>()?;
    baselines::boundary_index(&mixtures).map_err(err)
}

/// Relabels every mixture against `draws[pivot]`; returns `(relabeled, mean)`.
#[pyfunction]
fn pivot_relabel(draws: Vec<Mixture>, pivot: usize, group: &PyGroup) -> PyResult<(Vec<Mixture>, Mixture)> {
    let mixtures = draws.iter().map(to_mixture).collect::<PyResult<Vec<_>>>()?;
    let (relabeled, mean) = baselines::pivot_relabel(&mixtures, pivot, &group.spec).map_err(err)?;
    Ok((relabeled.iter().map(from_mixture).collect(), from_mixture(&mean)))
}

/// Draws from the five-component planar mixture posterior, with log densities.
#[pyfunction]
fn gmm5_samples(n: usize, seed: u64) -> PyResult<(Vec<Mixture>, Vec<f64>)> {
    let mut sampler = samplers::gmm5_scenario(seed).sampler().map_err(err)?;
    Ok((0..n)
        .map(|_| {
            let l = sampler.next_labeled();
            (from_mixture(&l.draw), l.log_density)
        })
        .unzip())
}

/// Draws from the rotated-ellipse posterior, with log densities.
#[pyfunction]
fn ellipse_samples(n: usize) -> PyResult<(Vec<Mixture>, Vec<f64>)> {
    let mut sampler = samplers::ellipse_scenario().sampler().map_err(err)?;
    Ok((0..n)
        .map(|_| {
            let l = sampler.next_labeled();
            (from_mixture(&l.draw), l.log_density)
        })
        .unzip())
}

#[pyfunction]
fn gmm5_truth() -> Mixture {
    from_mixture(&samplers::gmm5_scenario(0).true_components)
}

#[pyfunction]
fn ellipse_truth() -> Mixture {
    from_mixture(&samplers::ellipse_scenario().true_components)
}

#[pyfunction]
fn default_template() -> Vec<f64> {
    samplers::default_template()
}

#[pyfunction]
fn sigma_for_snr(x: Vec<f64>, snr: f64) -> PyResult<f64> {
    samplers::sigma_for_snr(&x, snr).map_err(err)
}

/// Randomly shifted noisy copies of `template`.
#[pyfunction]
fn mra_generate(template: Vec<f64>, sigma: f64, n: usize, seed: u64) -> PyResult<Rows> {
    samplers::mra_generate(&MraScenario {
        template,
        noise_std: sigma,
        num_observations: n,
        seed,
    })
    .map_err(err)
}

/// Signal draws from the Gibbs sampler over signal and shifts.
#[pyfunction]
#[pyo3(signature = (observations, sigma, sweeps, seed, burn_in=samplers::DEFAULT_BURN_IN))]
fn mra_gibbs(
    py: Python<'_>,
    observations: Rows,
    sigma: f64,
    sweeps: usize,
    seed: u64,
    burn_in: usize,
) -> PyResult<Rows> {
    let chain = samplers::MraGibbs::new(observations, sigma, sweeps, burn_in, seed).map_err(err)?;
    Ok(py.detach(|| chain.collect()))
}

/// Aligns signal draws to their cyclic barycenter and averages them.
#[pyfunction]
#[pyo3(signature = (draws, iterations=None, seed=0))]
fn mra_reconstruct(py: Python<'_>, draws: Rows, iterations: Option<usize>, seed: u64) -> PyResult<Vec<f64>> {
    let cfg = sgd_config(iterations.unwrap_or(draws.len()), seed, 0, None)?;
    py.detach(|| samplers::mra_reconstruct(&draws, &cfg)).map_err(err)
}

/// `min_s |estimate - shift_s truth| / |truth|`.
#[pyfunction]
fn relative_error(estimate: Vec<f64>, truth: Vec<f64>) -> PyResult<f64> {
    let g = GroupSpec::cyclic(truth.len()).map_err(err)?;
    samplers::relative_error(&estimate, &truth, &g).map_err(err)
}

#[pymodule]
fn qb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGroup>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(bures_distance, m)?)?;
    m.add_function(wrap_pyfunction!(spd_sqrt, m)?)?;
    m.add_function(wrap_pyfunction!(transport_map, m)?)?;
    m.add_function(wrap_pyfunction!(bures_exp, m)?)?;
    m.add_function(wrap_pyfunction!(bures_log, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_w2_sq, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lap, m)?)?;
    m.add_function(wrap_pyfunction!(align, m)?)?;
    m.add_function(wrap_pyfunction!(quotient_distance, m)?)?;
    m.add_function(wrap_pyfunction!(mixture_distance, m)?)?;
    m.add_function(wrap_pyfunction!(sgd_quotient, m)?)?;
    m.add_function(wrap_pyfunction!(sgd_gaussian_mixture, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_index, m)?)?;
    m.add_function(wrap_pyfunction!(pivot_relabel, m)?)?;
    m.add_function(wrap_pyfunction!(gmm5_samples, m)?)?;
    m.add_function(wrap_pyfunction!(ellipse_samples, m)?)?;
    m.add_function(wrap_pyfunction!(gmm5_truth, m)?)?;
    m.add_function(wrap_pyfunction!(ellipse_truth, m)?)?;
    m.add_function(wrap_pyfunction!(default_template, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_for_snr, m)?)?;
    m.add_function(wrap_pyfunction!(mra_generate, m)?)?;
    m.add_function(wrap_pyfunction!(mra_gibbs, m)?)?;
    m.add_function(wrap_pyfunction!(mra_reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    Ok(())
}
