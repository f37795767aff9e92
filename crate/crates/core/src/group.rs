//! Finite groups acting on `K`-tuples by permuting factors, and the quotient
//! distance `d([p], [q]) = min_g d(p, g·q)`.
//!
//! For the symmetric group the minimizing element is found with an `O(K^3)`
//! assignment solver on the cost matrix `c_ij = d(p_i, q_j)^2`; for the cyclic
//! group all `K` shifts are enumerated. Ties always resolve to the lowest index
//! (lexicographically smallest mapping).

use std::fmt;

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::manifold::{Euclidean, Manifold, Point, ProductPoint};
use crate::{Error, Result};

/// Largest group order that [`orbit`] and [`brute_force_align`] will enumerate.
pub const ENUMERATION_LIMIT: u128 = 5040;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroupKind {
    /// All `K!` permutations.
    Symmetric,
    /// The `K` cyclic shifts.
    Cyclic,
    /// Only the identity; alignment is disabled.
    Trivial,
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupKind::Symmetric => "sym",
            GroupKind::Cyclic => "cyc",
            GroupKind::Trivial => "none",
        })
    }
}

impl std::str::FromStr for GroupKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sym" | "symmetric" => Ok(GroupKind::Symmetric),
            "cyc" | "cyclic" => Ok(GroupKind::Cyclic),
            "none" | "trivial" => Ok(GroupKind::Trivial),
            other => Err(Error::Config(format!(
                "unknown group '{other}' (expected sym, cyc or none)"
            ))),
        }
    }
}

/// Which group acts, and on how many factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GroupSpec {
    pub kind: GroupKind,
    pub degree: usize,
}

impl GroupSpec {
    pub fn new(kind: GroupKind, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::contract("group degree must be at least 1"));
        }
        Ok(GroupSpec { kind, degree })
    }

    pub fn symmetric(degree: usize) -> Result<Self> {
        GroupSpec::new(GroupKind::Symmetric, degree)
    }

    pub fn cyclic(degree: usize) -> Result<Self> {
        GroupSpec::new(GroupKind::Cyclic, degree)
    }

    pub fn trivial(degree: usize) -> Result<Self> {
        GroupSpec::new(GroupKind::Trivial, degree)
    }

    /// Group order, saturating at `u128::MAX`.
    pub fn order(&self) -> u128 {
        match self.kind {
            GroupKind::Symmetric => (1..=self.degree as u128)
                .try_fold(1u128, |acc, k| acc.checked_mul(k))
                .unwrap_or(u128::MAX),
            GroupKind::Cyclic => self.degree as u128,
            GroupKind::Trivial => 1,
        }
    }

    /// All elements, in lexicographic order of their mappings.
    pub fn elements(&self) -> Result<Vec<GroupElement>> {
        let order = self.order();
        if order > ENUMERATION_LIMIT {
            return Err(Error::EnumerationTooLarge {
                order,
                limit: ENUMERATION_LIMIT,
            });
        }
        let k = self.degree;
        Ok(match self.kind {
            GroupKind::Symmetric => (0..k)
                .permutations(k)
                .map(|mapping| GroupElement { mapping })
                .collect(),
            GroupKind::Cyclic => (0..k).map(|s| GroupElement::shift(k, s)).collect(),
            GroupKind::Trivial => vec![GroupElement::identity(k)],
        })
    }

    /// A uniformly random element.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        let k = self.degree;
        match self.kind {
            GroupKind::Symmetric => {
                let mut mapping: Vec<usize> = (0..k).collect();
                mapping.shuffle(rng);
                GroupElement { mapping }
            }
            GroupKind::Cyclic => GroupElement::shift(k, rng.random_range(0..k)),
            GroupKind::Trivial => GroupElement::identity(k),
        }
    }

    fn check_degree(&self, found: usize) -> Result<()> {
        if found != self.degree {
            return Err(Error::DimensionMismatch {
                expected: self.degree,
                found,
            });
        }
        Ok(())
    }
}

/// A group element, stored as the permutation of factor indices it induces.
/// Acting on a tuple, factor `i` of `g·p` is factor `g(i)` of `p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement {
    mapping: Vec<usize>,
}

impl GroupElement {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; mapping.len()];
        for &m in &mapping {
            if m >= mapping.len() || seen[m] {
                return Err(Error::contract(format!("{mapping:?} is not a permutation")));
            }
            seen[m] = true;
        }
        Ok(GroupElement { mapping })
    }

    pub fn identity(k: usize) -> Self {
        GroupElement {
            mapping: (0..k).collect(),
        }
    }

    /// The cyclic shift `i -> (i + s) mod k`.
    pub fn shift(k: usize, s: usize) -> Self {
        GroupElement {
            mapping: (0..k).map(|i| (i + s) % k).collect(),
        }
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn degree(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &m)| i == m)
    }

    /// The element `g∘h` with `(g∘h)·p = g·(h·p)`.
    pub fn compose(&self, h: &GroupElement) -> Result<GroupElement> {
        if h.degree() != self.degree() {
            return Err(Error::DimensionMismatch {
                expected: self.degree(),
                found: h.degree(),
            });
        }
        Ok(GroupElement {
            mapping: self.mapping.iter().map(|&i| h.mapping[i]).collect(),
        })
    }

    pub fn inverse(&self) -> GroupElement {
        let mut mapping = vec![0; self.degree()];
        for (i, &m) in self.mapping.iter().enumerate() {
            mapping[m] = i;
        }
        GroupElement { mapping }
    }

    pub fn apply<P: Clone>(&self, p: &ProductPoint<P>) -> Result<ProductPoint<P>> {
        if p.len() != self.degree() {
            return Err(Error::DimensionMismatch {
                expected: self.degree(),
                found: p.len(),
            });
        }
        let factors = self.mapping.iter().map(|&i| p.factors()[i].clone()).collect();
        ProductPoint::new(factors)
    }

    /// Permutes a plain slice the same way [`GroupElement::apply`] permutes factors.
    pub fn apply_slice<T: Clone>(&self, values: &[T]) -> Result<Vec<T>> {
        if values.len() != self.degree() {
            return Err(Error::DimensionMismatch {
                expected: self.degree(),
                found: values.len(),
            });
        }
        Ok(self.mapping.iter().map(|&i| values[i].clone()).collect())
    }
}

/// The aligning element `g` for a pair `(p, q)` and the squared distance
/// `sum_i d(p_i, q_g(i))^2` it attains.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentResult {
    pub element: GroupElement,
    pub cost: f64,
}

/// The full orbit `{g·p : g in G}` in lexicographic element order.
pub fn orbit<P: Clone>(p: &ProductPoint<P>, group: &GroupSpec) -> Result<Vec<ProductPoint<P>>> {
    group.check_degree(p.len())?;
    group.elements()?.iter().map(|g| g.apply(p)).collect()
}

/// Solves the square linear assignment problem `min_s sum_i cost[i][s(i)]`
/// with the shortest-augmenting-path Hungarian method.
pub fn solve_lap(cost: &DMatrix<f64>) -> Result<AlignmentResult> {
    let n = cost.nrows();
    if n != cost.ncols() {
        return Err(Error::contract(format!(
            "assignment cost matrix must be square, got {}x{}",
            n,
            cost.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::contract("assignment cost matrix is empty"));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::contract("assignment cost matrix has non-finite entries"));
    }

    // 1-based potentials; column 0 is the virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        row_of_col[0] = row;
        let mut col0 = 0;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let i0 = row_of_col[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = col0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            col0 = col1;
            if row_of_col[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            row_of_col[col0] = row_of_col[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut mapping = vec![0; n];
    for j in 1..=n {
        mapping[row_of_col[j] - 1] = j - 1;
    }
    let total = mapping.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
    Ok(AlignmentResult {
        element: GroupElement { mapping },
        cost: total,
    })
}

fn check_pair<P>(p: &ProductPoint<P>, q: &ProductPoint<P>) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(())
}

/// `sum_i d(p_i, q_g(i))^2`.
pub fn alignment_cost<M: Manifold>(
    factor: &M,
    p: &ProductPoint<M::Point>,
    q: &ProductPoint<M::Point>,
    g: &GroupElement,
) -> Result<f64> {
    check_pair(p, q)?;
    if g.degree() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: g.degree(),
        });
    }
    let mut total = 0.0;
    for (pi, &j) in p.factors().iter().zip(g.mapping()) {
        total += factor.dist_sq(pi, &q.factors()[j])?;
    }
    Ok(total)
}

/// Exhaustive minimization over every group element.
pub fn brute_force_align<M: Manifold>(
    factor: &M,
    p: &ProductPoint<M::Point>,
    q: &ProductPoint<M::Point>,
    group: &GroupSpec,
) -> Result<AlignmentResult> {
    check_pair(p, q)?;
    group.check_degree(p.len())?;
    let mut best: Option<AlignmentResult> = None;
    for g in group.elements()? {
        let cost = alignment_cost(factor, p, q, &g)?;
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(AlignmentResult { element: g, cost });
        }
    }
    Ok(best.expect("a group has at least one element"))
}

/// Pairwise squared-distance matrix `c_ij = d(p_i, q_j)^2`.
pub fn cost_matrix<M: Manifold>(
    factor: &M,
    p: &ProductPoint<M::Point>,
    q: &ProductPoint<M::Point>,
) -> Result<DMatrix<f64>> {
    check_pair(p, q)?;
    let k = p.len();
    let mut cost = DMatrix::zeros(k, k);
    for (i, pi) in p.factors().iter().enumerate() {
        for (j, qj) in q.factors().iter().enumerate() {
            cost[(i, j)] = factor.dist_sq(pi, qj)?;
        }
    }
    Ok(cost)
}

/// Best permutation of `q` against `p` via the assignment solver.
pub fn align_symmetric<M: Manifold>(
    factor: &M,
    p: &ProductPoint<M::Point>,
    q: &ProductPoint<M::Point>,
) -> Result<AlignmentResult> {
    solve_lap(&cost_matrix(factor, p, q)?)
}

/// Best cyclic shift of `q` against `p`; ties go to the smallest shift.
pub fn align_cyclic<M: Manifold>(
    factor: &M,
    p: &ProductPoint<M::Point>,
    q: &ProductPoint<M::Point>,
) -> Result<AlignmentResult> {
    check_pair(p, q)?;
    let k = p.len();
    let mut best: Option<AlignmentResult> = None;
    for s in 0..k {
        let g = GroupElement::shift(k, s);
        let cost = alignment_cost(factor, p, q, &g)?;
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(AlignmentResult { element: g, cost });
        }
    }
    Ok(best.expect("k >= 1"))
}

/// Aligns `q` to `p` under `group`.
pub fn align<M: Manifold>(
    factor: &M,
    p: &ProductPoint<M::Point>,
    q: &ProductPoint<M::Point>,
    group: &GroupSpec,
) -> Result<AlignmentResult> {
    check_pair(p, q)?;
    group.check_degree(p.len())?;
    match group.kind {
        GroupKind::Symmetric => align_symmetric(factor, p, q),
        GroupKind::Cyclic => align_cyclic(factor, p, q),
        GroupKind::Trivial => {
            let element = GroupElement::identity(p.len());
            let cost = alignment_cost(factor, p, q, &element)?;
            Ok(AlignmentResult { element, cost })
        }
    }
}

/// Distance between the orbits of `p` and `q`.
pub fn quotient_distance<M: Manifold>(
    factor: &M,
    p: &ProductPoint<M::Point>,
    q: &ProductPoint<M::Point>,
    group: &GroupSpec,
) -> Result<f64> {
    Ok(align(factor, p, q, group)?.cost.sqrt())
}

/// Symmetric-group alignment of one-dimensional tuples by sorting: matching
/// order statistics is optimal on the line.
pub fn sort_align_1d(
    p: &ProductPoint<Point>,
    q: &ProductPoint<Point>,
) -> Result<AlignmentResult> {
    check_pair(p, q)?;
    if let Some(bad) = p.factors().iter().chain(q.factors()).find(|f| f.dim() != 1) {
        return Err(Error::contract(format!(
            "sort alignment needs one-dimensional factors, found dimension {}",
            bad.dim()
        )));
    }
    let order = |t: &ProductPoint<Point>| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..t.len()).collect();
        idx.sort_by(|&a, &b| t.factors()[a].coords()[0].total_cmp(&t.factors()[b].coords()[0]));
        idx
    };
    let (p_order, q_order) = (order(p), order(q));
    let mut mapping = vec![0; p.len()];
    for (&pi, &qi) in p_order.iter().zip(&q_order) {
        mapping[pi] = qi;
    }
    let element = GroupElement { mapping };
    let cost = alignment_cost(&Euclidean::new(1), p, q, &element)?;
    Ok(AlignmentResult { element, cost })
}
