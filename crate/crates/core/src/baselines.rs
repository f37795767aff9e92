//! Pivotal reordering: relabel every draw by optimal assignment to one
//! chosen draw, then average.

use nalgebra::{DMatrix, DVector};

use crate::bures::{GaussianComponent, GaussianManifold, SpdMatrix};
use crate::group::{align, GroupSpec};
use crate::manifold::{Euclidean, Manifold, Point, ProductPoint};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum PivotChoice {
    /// The draw with the largest log density.
    MapSample { log_density: Vec<f64> },
    Index(usize),
}

/// Index of the pivot draw.
pub fn pivot_select<P>(samples: &[ProductPoint<P>], choice: &PivotChoice) -> Result<usize> {
    if samples.is_empty() {
        return Err(Error::contract("pivot selection needs at least one sample"));
    }
    match choice {
        PivotChoice::Index(i) if *i < samples.len() => Ok(*i),
        PivotChoice::Index(i) => Err(Error::Config(format!(
            "pivot index {i} out of range for {} samples",
            samples.len()
        ))),
        PivotChoice::MapSample { log_density } => {
            if log_density.is_empty() {
                return Err(Error::Config("MAP pivot needs per-sample log densities".into()));
            }
            if log_density.len() != samples.len() {
                return Err(Error::Config(format!(
                    "{} log densities for {} samples",
                    log_density.len(),
                    samples.len()
                )));
            }
            let mut best = 0;
            for (i, &lp) in log_density.iter().enumerate() {
                if lp.is_nan() {
                    return Err(Error::Config(format!("log density of sample {i} is NaN")));
                }
                if lp > log_density[best] {
                    best = i;
                }
            }
            Ok(best)
        }
    }
}

/// Factor types the baseline knows how to average naively.
pub trait NaiveMean: Sized {
    type Space: Manifold<Point = Self>;

    fn space(&self) -> Self::Space;

    /// Plain average of `items`, which must be nonempty.
    fn naive_mean(items: &[&Self]) -> Result<Self>;
}

impl NaiveMean for Point {
    type Space = Euclidean;

    fn space(&self) -> Euclidean {
        Euclidean::new(self.dim())
    }

    fn naive_mean(items: &[&Point]) -> Result<Point> {
        let d = items[0].dim();
        let mut acc = vec![0.0; d];
        for p in items {
            if p.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.dim(),
                });
            }
            for (a, x) in acc.iter_mut().zip(p.coords()) {
                *a += x;
            }
        }
        Point::new(acc.into_iter().map(|a| a / items.len() as f64).collect())
    }
}

impl NaiveMean for GaussianComponent {
    type Space = GaussianManifold;

    fn space(&self) -> GaussianManifold {
        GaussianManifold::new(self.dim())
    }

    /// Mean of the means and entrywise mean of the covariances.
    fn naive_mean(items: &[&GaussianComponent]) -> Result<GaussianComponent> {
        let d = items[0].dim();
        let mut mean = DVector::zeros(d);
        let mut cov = DMatrix::zeros(d, d);
        for c in items {
            if c.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: c.dim(),
                });
            }
            mean += c.mean();
            cov += c.covariance().matrix();
        }
        let n = items.len() as f64;
        GaussianComponent::new(mean / n, SpdMatrix::new(cov / n)?)
    }
}

/// Aligns every sample to `samples[pivot]` and averages the result
/// factor by factor. Returns the relabeled samples and the mean.
pub fn pivot_relabel<P>(
    samples: &[ProductPoint<P>],
    pivot: usize,
    group: &GroupSpec,
) -> Result<(Vec<ProductPoint<P>>, ProductPoint<P>)>
where
    P: NaiveMean + Clone,
{
    let reference = samples.get(pivot).ok_or_else(|| {
        Error::Config(format!(
            "pivot index {pivot} out of range for {} samples",
            samples.len()
        ))
    })?;
    let space = reference.factors()[0].space();
    let relabeled = samples
        .iter()
        .map(|s| align(&space, reference, s, group)?.element.apply(s))
        .collect::<Result<Vec<_>>>()?;
    let mean = (0..reference.len())
        .map(|i| {
            let column: Vec<&P> = relabeled.iter().map(|s| &s.factors()[i]).collect();
            P::naive_mean(&column)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((relabeled, ProductPoint::new(mean)?))
}

/// Index of the draw nearest the boundary of configuration space: the one
/// whose two closest components are closest together. Relabeling against
/// such a draw is maximally ambiguous.
pub fn boundary_index<P: NaiveMean>(samples: &[ProductPoint<P>]) -> Result<usize> {
    if samples.is_empty() {
        return Err(Error::contract("need at least one sample"));
    }
    let mut best = (f64::INFINITY, 0);
    for (n, s) in samples.iter().enumerate() {
        let f = s.factors();
        let space = f[0].space();
        let mut closest = f64::INFINITY;
        for i in 0..f.len() {
            for j in i + 1..f.len() {
                closest = closest.min(space.dist_sq(&f[i], &f[j])?);
            }
        }
        if closest < best.0 {
            best = (closest, n);
        }
    }
    Ok(best.1)
}
