//! Label-invariant error measures against a known truth.

use nalgebra::DMatrix;

use crate::bures::GaussianComponent;
use crate::group::solve_lap;
use crate::manifold::{Point, ProductPoint};
use crate::{Error, Result};

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: b,
            found: a,
        });
    }
    if a == 0 {
        return Err(Error::contract("need at least one component"));
    }
    Ok(())
}

/// Optimal matching of estimated to true components under `cost(i, j)`.
/// Returns `matched[i]`, the truth index assigned to estimate `i`.
fn match_by(
    n: usize,
    cost: impl Fn(usize, usize) -> Result<f64>,
) -> Result<(Vec<usize>, DMatrix<f64>)> {
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] = cost(i, j)?;
        }
    }
    let assignment = solve_lap(&c)?;
    Ok((assignment.element.mapping().to_vec(), c))
}

/// Euclidean distance from each estimated mean to the true mean it is
/// matched with, matching by minimal total squared distance.
pub fn matched_mean_errors(
    estimate: &ProductPoint<GaussianComponent>,
    truth: &ProductPoint<GaussianComponent>,
) -> Result<Vec<f64>> {
    check_lengths(estimate.len(), truth.len())?;
    let (e, t) = (estimate.factors(), truth.factors());
    let (matched, cost) = match_by(e.len(), |i, j| {
        check_lengths(e[i].dim(), t[j].dim())?;
        Ok((e[i].mean() - t[j].mean()).norm_squared())
    })?;
    Ok(matched.iter().enumerate().map(|(i, &j)| cost[(i, j)].sqrt()).collect())
}

/// [`matched_mean_errors`] for tuples of Euclidean points.
pub fn matched_point_errors(estimate: &ProductPoint<Point>, truth: &ProductPoint<Point>) -> Result<Vec<f64>> {
    check_lengths(estimate.len(), truth.len())?;
    let (e, t) = (estimate.factors(), truth.factors());
    let (matched, cost) = match_by(e.len(), |i, j| {
        check_lengths(e[i].dim(), t[j].dim())?;
        Ok(e[i]
            .coords()
            .iter()
            .zip(t[j].coords())
            .map(|(a, b)| (a - b).powi(2))
            .sum())
    })?;
    Ok(matched.iter().enumerate().map(|(i, &j)| cost[(i, j)].sqrt()).collect())
}

/// `min_sigma sqrt(sum_i |S_i - S*_sigma(i)|_F^2)` over component relabelings.
pub fn covariance_error(
    estimate: &ProductPoint<GaussianComponent>,
    truth: &ProductPoint<GaussianComponent>,
) -> Result<f64> {
    check_lengths(estimate.len(), truth.len())?;
    let (e, t) = (estimate.factors(), truth.factors());
    let (matched, cost) = match_by(e.len(), |i, j| {
        check_lengths(e[i].dim(), t[j].dim())?;
        Ok((e[i].covariance().matrix() - t[j].covariance().matrix()).norm_squared())
    })?;
    Ok(matched.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum::<f64>().sqrt())
}
