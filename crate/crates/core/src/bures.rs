//! Bures-Wasserstein geometry of Gaussian components.
//!
//! The 2-Wasserstein distance between `N(m1, S1)` and `N(m2, S2)` splits into
//! a Euclidean mean term and the Bures term
//! `B^2(S1, S2) = tr(S1 + S2 - 2 (S1^½ S2 S1^½)^½)`.
//! Every matrix function here goes through a symmetric eigendecomposition with
//! eigenvalues clamped at [`EIGEN_FLOOR`].

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::manifold::Manifold;
use crate::{Error, Result};

/// Smallest eigenvalue an SPD matrix is allowed to carry.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Relative Frobenius asymmetry tolerated on input matrices.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// `I + L` with an eigenvalue this close to zero is treated as singular.
const STEP_SINGULARITY: f64 = 1e-12;

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::contract(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::contract("matrix has non-finite entries"));
    }
    Ok(())
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    check_square(m)?;
    let norm = m.norm();
    if norm > 0.0 {
        let asym = (m - m.transpose()).norm() / norm;
        if asym > SYMMETRY_TOL {
            return Err(Error::contract(format!(
                "matrix is not symmetric (relative asymmetry {asym:e})"
            )));
        }
    }
    Ok(())
}

fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// `U f(Λ) Uᵀ` for a symmetric matrix with eigendecomposition `U Λ Uᵀ`.
fn spectral_map(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let fj = f(lambda);
        scaled.column_mut(j).scale_mut(fj);
    }
    symmetrize(&(scaled * u.transpose()))
}

/// A symmetric positive semi-definite covariance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    /// Validates symmetry and positive semi-definiteness. The stored matrix is
    /// the symmetrized input.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&m)?;
        let s = symmetrize(&m);
        let eig = SymmetricEigen::new(s.clone());
        let scale = eig.eigenvalues.iter().fold(1.0f64, |acc, l| acc.max(l.abs()));
        let min = eig.eigenvalues.min();
        if min < -SYMMETRY_TOL * scale {
            return Err(Error::contract(format!(
                "matrix is not positive semi-definite (eigenvalue {min:e})"
            )));
        }
        Ok(SpdMatrix(s))
    }

    /// Wraps a matrix known to be symmetric PSD by construction (e.g. `L Lᵀ`).
    pub(crate) fn from_gram(m: DMatrix<f64>) -> Self {
        SpdMatrix(symmetrize(&m))
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        SpdMatrix::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        SpdMatrix::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        SymmetricEigen::new(self.0.clone())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().eigenvalues.min()
    }

    /// Returns the matrix with every eigenvalue below [`EIGEN_FLOOR`] raised to
    /// it, and whether anything had to be clamped.
    pub fn with_eigen_floor(&self) -> (SpdMatrix, bool) {
        let eig = self.eigen();
        if eig.eigenvalues.min() >= EIGEN_FLOOR {
            return (self.clone(), false);
        }
        (SpdMatrix(spectral_map(&eig, |l| l.max(EIGEN_FLOOR))), true)
    }
}

/// Principal square root.
pub fn spd_sqrt(s: &SpdMatrix) -> SpdMatrix {
    SpdMatrix(spectral_map(&s.eigen(), |l| l.max(EIGEN_FLOOR).sqrt()))
}

/// Squared Bures distance `tr(S1 + S2 - 2 (S1^½ S2 S1^½)^½)`.
pub fn bures_distance_sq(s1: &SpdMatrix, s2: &SpdMatrix) -> Result<f64> {
    check_same_dim(s1.dim(), s2.dim())?;
    if s1 == s2 {
        return Ok(0.0);
    }
    let root = spd_sqrt(s1);
    let inner = symmetrize(&(root.matrix() * s2.matrix() * root.matrix()));
    let cross: f64 = SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    Ok((s1.0.trace() + s2.0.trace() - 2.0 * cross).max(0.0))
}

/// The symmetric matrix `T` with `T S1 T = S2` pushing `N(0, S1)` onto `N(0, S2)`.
pub fn transport_map(s1: &SpdMatrix, s2: &SpdMatrix) -> Result<DMatrix<f64>> {
    check_same_dim(s1.dim(), s2.dim())?;
    let eig = s1.eigen();
    let min = eig.eigenvalues.min();
    if min < EIGEN_FLOOR {
        return Err(Error::Singular {
            eigenvalue: min,
            floor: EIGEN_FLOOR,
        });
    }
    let root = spectral_map(&eig, f64::sqrt);
    let inv_root = spectral_map(&eig, |l| 1.0 / l.sqrt());
    let inner = symmetrize(&(&root * s2.matrix() * &root));
    let inner_root = spectral_map(&SymmetricEigen::new(inner), |l| l.max(0.0).sqrt());
    Ok(symmetrize(&(&inv_root * inner_root * &inv_root)))
}

/// Solves `L S + S L = xi` for symmetric `L` in the eigenbasis of `S`.
pub fn lyapunov_solve(s: &SpdMatrix, xi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(xi)?;
    check_same_dim(s.dim(), xi.nrows())?;
    let eig = s.eigen();
    let u = &eig.eigenvectors;
    let lambda: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(EIGEN_FLOOR)).collect();
    let mut rotated = u.transpose() * xi * u;
    for i in 0..s.dim() {
        for j in 0..s.dim() {
            rotated[(i, j)] /= lambda[i] + lambda[j];
        }
    }
    Ok(symmetrize(&(u * rotated * u.transpose())))
}

/// Bures exponential map `(I + L) S (I + L)` with `L` the Lyapunov solution for `xi`.
pub fn bures_exp(s: &SpdMatrix, xi: &DMatrix<f64>) -> Result<SpdMatrix> {
    let l = lyapunov_solve(s, xi)?;
    let step = DMatrix::identity(s.dim(), s.dim()) + l;
    push_through(s, &step)
}

/// `A S A` for symmetric `A`, refusing a (numerically) singular `A`, with the
/// result clamped to the eigenvalue floor.
pub(crate) fn push_through(s: &SpdMatrix, step: &DMatrix<f64>) -> Result<SpdMatrix> {
    let smallest = SymmetricEigen::new(symmetrize(step))
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, l| acc.min(l.abs()));
    if smallest < STEP_SINGULARITY {
        return Err(Error::StepTooLarge {
            eigenvalue: smallest,
        });
    }
    let out = SpdMatrix::from_gram(step * s.matrix() * step.transpose());
    let (out, clamped) = out.with_eigen_floor();
    if clamped {
        log::debug!("bures step result clamped to the eigenvalue floor");
    }
    Ok(out)
}

/// Bures logarithm `T S1 + S1 T - 2 S1`, the tangent at `S1` whose Lyapunov
/// solution is `T - I`.
pub fn bures_log(s1: &SpdMatrix, s2: &SpdMatrix) -> Result<DMatrix<f64>> {
    let t = transport_map(s1, s2)?;
    let a = s1.matrix();
    Ok(symmetrize(&(&t * a + a * &t - a * 2.0)))
}

/// Length of a tangent vector `xi` at `S`: `sqrt(tr(L xi) / 2)`.
pub fn bures_tangent_norm(s: &SpdMatrix, xi: &DMatrix<f64>) -> Result<f64> {
    let l = lyapunov_solve(s, xi)?;
    Ok((0.5 * l.dot(xi)).max(0.0).sqrt())
}

/// Gradient of `L -> B^2(L Lᵀ, target) / 2`, namely `(I - T) L`.
pub fn bures_grad_cholesky(c: &GaussianComponent, target: &SpdMatrix) -> Result<DMatrix<f64>> {
    let t = transport_map(&c.covariance, target)?;
    let d = c.dim();
    Ok((DMatrix::identity(d, d) - t) * &c.factor)
}

/// A Gaussian `N(mean, covariance)` carried together with a square factor
/// `covariance = factor · factorᵀ`. The factor need not stay triangular.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianComponent {
    mean: DVector<f64>,
    covariance: SpdMatrix,
    factor: DMatrix<f64>,
}

impl GaussianComponent {
    pub fn new(mean: DVector<f64>, covariance: SpdMatrix) -> Result<Self> {
        check_same_dim(covariance.dim(), mean.len())?;
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::contract("mean has non-finite entries"));
        }
        let factor = match Cholesky::new(covariance.0.clone()) {
            Some(ch) => ch.l(),
            None => spd_sqrt(&covariance).0,
        };
        Ok(GaussianComponent {
            mean,
            covariance,
            factor,
        })
    }

    pub fn from_factor(mean: DVector<f64>, factor: DMatrix<f64>) -> Result<Self> {
        check_square(&factor)?;
        check_same_dim(factor.nrows(), mean.len())?;
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::contract("mean has non-finite entries"));
        }
        let covariance = SpdMatrix::from_gram(&factor * factor.transpose());
        Ok(GaussianComponent {
            mean,
            covariance,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &SpdMatrix {
        &self.covariance
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// A lower-triangular Cholesky factor of the covariance, recomputed.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        match Cholesky::new(self.covariance.0.clone()) {
            Some(ch) => ch.l(),
            None => self.factor.clone(),
        }
    }
}

/// `W2^2` between two Gaussians: `|m1 - m2|^2 + B^2(S1, S2)`.
pub fn gaussian_w2_sq(a: &GaussianComponent, b: &GaussianComponent) -> Result<f64> {
    check_same_dim(a.dim(), b.dim())?;
    let mean_term = (&a.mean - &b.mean).norm_squared();
    Ok(mean_term + bures_distance_sq(&a.covariance, &b.covariance)?)
}

/// The Bures manifold of `dim x dim` covariance matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bures {
    dim: usize,
}

impl Bures {
    pub fn new(dim: usize) -> Self {
        Bures { dim }
    }
}

impl Manifold for Bures {
    type Point = SpdMatrix;
    type Tangent = DMatrix<f64>;

    fn dist_sq(&self, p: &SpdMatrix, q: &SpdMatrix) -> Result<f64> {
        check_same_dim(self.dim, p.dim())?;
        bures_distance_sq(p, q)
    }

    fn exp(&self, p: &SpdMatrix, v: &DMatrix<f64>) -> Result<SpdMatrix> {
        check_same_dim(self.dim, p.dim())?;
        bures_exp(p, v)
    }

    fn log(&self, p: &SpdMatrix, q: &SpdMatrix) -> Result<DMatrix<f64>> {
        check_same_dim(self.dim, p.dim())?;
        bures_log(p, q)
    }

    fn scale(&self, v: &DMatrix<f64>, factor: f64) -> DMatrix<f64> {
        v * factor
    }

    fn norm(&self, p: &SpdMatrix, v: &DMatrix<f64>) -> Result<f64> {
        bures_tangent_norm(p, v)
    }

    fn check_point(&self, p: &SpdMatrix) -> Result<()> {
        check_same_dim(self.dim, p.dim())
    }
}

/// Tangent vector of the Gaussian manifold: a mean displacement and a
/// symmetric covariance direction.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianTangent {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Gaussians over `R^dim` with the 2-Wasserstein metric, `R^dim x Bures`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussianManifold {
    dim: usize,
}

impl GaussianManifold {
    pub fn new(dim: usize) -> Self {
        GaussianManifold { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl Manifold for GaussianManifold {
    type Point = GaussianComponent;
    type Tangent = GaussianTangent;

    fn dist_sq(&self, p: &GaussianComponent, q: &GaussianComponent) -> Result<f64> {
        check_same_dim(self.dim, p.dim())?;
        gaussian_w2_sq(p, q)
    }

    fn exp(&self, p: &GaussianComponent, v: &GaussianTangent) -> Result<GaussianComponent> {
        check_same_dim(self.dim, p.dim())?;
        check_same_dim(self.dim, v.mean.len())?;
        let covariance = bures_exp(&p.covariance, &v.cov)?;
        GaussianComponent::new(&p.mean + &v.mean, covariance)
    }

    fn log(&self, p: &GaussianComponent, q: &GaussianComponent) -> Result<GaussianTangent> {
        check_same_dim(self.dim, p.dim())?;
        check_same_dim(self.dim, q.dim())?;
        Ok(GaussianTangent {
            mean: &q.mean - &p.mean,
            cov: bures_log(&p.covariance, &q.covariance)?,
        })
    }

    fn scale(&self, v: &GaussianTangent, factor: f64) -> GaussianTangent {
        GaussianTangent {
            mean: &v.mean * factor,
            cov: &v.cov * factor,
        }
    }

    fn norm(&self, p: &GaussianComponent, v: &GaussianTangent) -> Result<f64> {
        let cov = bures_tangent_norm(&p.covariance, &v.cov)?;
        Ok((v.mean.norm_squared() + cov * cov).sqrt())
    }

    fn check_point(&self, p: &GaussianComponent) -> Result<()> {
        check_same_dim(self.dim, p.dim())
    }
}
