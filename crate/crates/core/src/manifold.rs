//! Riemannian manifold contract (distance, exponential and logarithm maps)
//! and the flat instances every solver builds on.
//!
//! The stochastic gradient step toward a draw `q` from an estimate `p` is
//! always `exp_p(eta * log_p(q))`: the Riemannian gradient of `d(p, q)^2 / 2`
//! is `-log_p(q)`. Curved instances (Bures, Gaussian) live in [`crate::bures`].

use std::fmt;

use crate::{Error, Result};

/// Numerical tolerances shared by the library and its tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative error allowed for `exp_p(log_p(q)) = q`.
    pub roundtrip: f64,
    /// Distance below which two points count as identical.
    pub identity: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    roundtrip: 1e-10,
    identity: 1e-12,
};

/// A point of a Euclidean manifold: a dense vector of finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::contract(format!("non-finite coordinate {bad}")));
        }
        Ok(Point(coords))
    }

    pub fn scalar(x: f64) -> Result<Self> {
        Point::new(vec![x])
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }
}

/// A tangent vector together with the point it is attached to.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    components: Vec<f64>,
    base: Point,
}

impl TangentVector {
    pub fn new(base: Point, components: Vec<f64>) -> Result<Self> {
        if components.len() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: components.len(),
            });
        }
        Ok(TangentVector { components, base })
    }

    pub fn zero(base: Point) -> Self {
        let components = vec![0.0; base.dim()];
        TangentVector { components, base }
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn base(&self) -> &Point {
        &self.base
    }
}

/// An ordered tuple of `K` factor points, i.e. one point of `M^K`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductPoint<P> {
    factors: Vec<P>,
}

impl<P> ProductPoint<P> {
    pub fn new(factors: Vec<P>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::contract("a product point needs at least one factor"));
        }
        Ok(ProductPoint { factors })
    }

    pub fn factors(&self) -> &[P] {
        &self.factors
    }

    pub fn into_factors(self) -> Vec<P> {
        self.factors
    }

    /// Number of factors `K`.
    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

impl ProductPoint<Point> {
    /// A tuple of one-dimensional factors.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        let factors = values.iter().map(|&v| Point::scalar(v)).collect::<Result<_>>()?;
        ProductPoint::new(factors)
    }

    /// A tuple of Euclidean factors, one row per factor.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let factors = rows.into_iter().map(Point::new).collect::<Result<_>>()?;
        ProductPoint::new(factors)
    }

    /// Concatenated coordinates of all factors.
    pub fn flatten(&self) -> Vec<f64> {
        self.factors.iter().flat_map(|f| f.coords().iter().copied()).collect()
    }
}

/// Tangent vector of a product manifold: one factor tangent per factor.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductTangent<T>(pub Vec<T>);

/// The exponential/logarithm/distance contract of a Riemannian manifold.
pub trait Manifold {
    type Point: Clone + fmt::Debug;
    type Tangent: Clone + fmt::Debug;

    /// Squared geodesic distance.
    fn dist_sq(&self, p: &Self::Point, q: &Self::Point) -> Result<f64>;

    fn dist(&self, p: &Self::Point, q: &Self::Point) -> Result<f64> {
        Ok(self.dist_sq(p, q)?.sqrt())
    }

    fn exp(&self, p: &Self::Point, v: &Self::Tangent) -> Result<Self::Point>;

    fn log(&self, p: &Self::Point, q: &Self::Point) -> Result<Self::Tangent>;

    fn scale(&self, v: &Self::Tangent, factor: f64) -> Self::Tangent;

    /// Length of `v` in the metric at `p`.
    fn norm(&self, p: &Self::Point, v: &Self::Tangent) -> Result<f64>;

    /// Checks that `p` belongs to this manifold instance.
    fn check_point(&self, p: &Self::Point) -> Result<()>;
}

/// `R^dim` with the standard metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Euclidean {
    dim: usize,
}

impl Euclidean {
    pub fn new(dim: usize) -> Self {
        Euclidean { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }
}

impl Manifold for Euclidean {
    type Point = Point;
    type Tangent = TangentVector;

    fn dist_sq(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check_dim(p.dim())?;
        self.check_dim(q.dim())?;
        Ok(p.0.iter().zip(&q.0).map(|(a, b)| (a - b) * (a - b)).sum())
    }

    fn exp(&self, p: &Point, v: &TangentVector) -> Result<Point> {
        self.check_dim(p.dim())?;
        if v.base != *p {
            return Err(Error::contract("tangent vector is not based at the given point"));
        }
        Ok(Point(p.0.iter().zip(&v.components).map(|(a, b)| a + b).collect()))
    }

    fn log(&self, p: &Point, q: &Point) -> Result<TangentVector> {
        self.check_dim(p.dim())?;
        self.check_dim(q.dim())?;
        let components = q.0.iter().zip(&p.0).map(|(b, a)| b - a).collect();
        Ok(TangentVector {
            components,
            base: p.clone(),
        })
    }

    fn scale(&self, v: &TangentVector, factor: f64) -> TangentVector {
        TangentVector {
            components: v.components.iter().map(|c| c * factor).collect(),
            base: v.base.clone(),
        }
    }

    fn norm(&self, p: &Point, v: &TangentVector) -> Result<f64> {
        self.check_dim(p.dim())?;
        self.check_dim(v.components.len())?;
        Ok(v.components.iter().map(|c| c * c).sum::<f64>().sqrt())
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        self.check_dim(p.dim())
    }
}

/// The product manifold `M^K` with the product metric.
#[derive(Clone, Debug, PartialEq)]
pub struct Product<M> {
    factor: M,
    k: usize,
}

impl<M: Manifold> Product<M> {
    pub fn new(factor: M, k: usize) -> Self {
        Product { factor, k }
    }

    pub fn factor(&self) -> &M {
        &self.factor
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found,
            });
        }
        Ok(())
    }
}

impl<M: Manifold> Manifold for Product<M> {
    type Point = ProductPoint<M::Point>;
    type Tangent = ProductTangent<M::Tangent>;

    fn dist_sq(&self, p: &Self::Point, q: &Self::Point) -> Result<f64> {
        self.check_len(p.len())?;
        self.check_len(q.len())?;
        let mut total = 0.0;
        for (a, b) in p.factors.iter().zip(&q.factors) {
            total += self.factor.dist_sq(a, b)?;
        }
        Ok(total)
    }

    fn exp(&self, p: &Self::Point, v: &Self::Tangent) -> Result<Self::Point> {
        self.check_len(p.len())?;
        self.check_len(v.0.len())?;
        let factors = p
            .factors
            .iter()
            .zip(&v.0)
            .map(|(pi, vi)| self.factor.exp(pi, vi))
            .collect::<Result<_>>()?;
        Ok(ProductPoint { factors })
    }

    fn log(&self, p: &Self::Point, q: &Self::Point) -> Result<Self::Tangent> {
        self.check_len(p.len())?;
        self.check_len(q.len())?;
        let parts = p
            .factors
            .iter()
            .zip(&q.factors)
            .map(|(pi, qi)| self.factor.log(pi, qi))
            .collect::<Result<_>>()?;
        Ok(ProductTangent(parts))
    }

    fn scale(&self, v: &Self::Tangent, factor: f64) -> Self::Tangent {
        ProductTangent(v.0.iter().map(|vi| self.factor.scale(vi, factor)).collect())
    }

    fn norm(&self, p: &Self::Point, v: &Self::Tangent) -> Result<f64> {
        self.check_len(p.len())?;
        self.check_len(v.0.len())?;
        let mut total = 0.0;
        for (pi, vi) in p.factors.iter().zip(&v.0) {
            let n = self.factor.norm(pi, vi)?;
            total += n * n;
        }
        Ok(total.sqrt())
    }

    fn check_point(&self, p: &Self::Point) -> Result<()> {
        self.check_len(p.len())?;
        p.factors.iter().try_for_each(|f| self.factor.check_point(f))
    }
}

/// Checks that the factors of `p` are pairwise distinct, i.e. that `p` lies in
/// the ordered configuration space of `M`.
pub fn validate_configuration<M: Manifold>(
    factor: &M,
    p: &ProductPoint<M::Point>,
) -> Result<()> {
    let threshold = TOLERANCES.identity * TOLERANCES.identity;
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            if factor.dist_sq(&p.factors[i], &p.factors[j])? <= threshold {
                return Err(Error::contract(format!(
                    "factors {i} and {j} coincide; tuple is outside the configuration space"
                )));
            }
        }
    }
    Ok(())
}
