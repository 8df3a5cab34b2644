//! Cost functions of the batch rekeying model.
//!
//! Rows of every decision matrix are ordered as in [`RekeyInstance`]: the
//! remaining leaves `L'` first, then the departed slots `A`. Column `j` is the
//! `j`-th joining member.
//!
//! * Placing `m_i > 0` joiners below a remaining leaf at depth `d_i` costs
//!   `d_i + 2 m_i - 1` key updates (path to the leaf plus a new subtree).
//! * A departed slot at depth `d_k` always costs `d_k - 1` (the path above the
//!   removed parent), plus `2 m_k - 1` when `m_k > 0` joiners take it over.
//!
//! Summing these ignores keys shared between paths; that approximation is the
//! total cost `F(x, y)` optimized by the solvers. The step functions `|s|_0`
//! are replaced by binary `u`, `v` in the lifted model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keytree::{KeyTree, RekeyInstance};

/// Tolerance used when deciding whether a relaxed coordinate is binary or a
/// point satisfies the lifted constraints.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Where a joining member is placed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Target {
    /// Below remaining leaf `L'[i]`.
    Leaf(usize),
    /// Into departed slot `A[k]`.
    Slot(usize),
}

/// A binary placement `(x, y)` of every joiner.
///
/// Stored as one target per joiner, which makes the column constraint
/// `sum_i x_ij + sum_k y_kj = 1` hold by construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    l1: usize,
    l2: usize,
    targets: Vec<Target>,
}

impl Assignment {
    pub fn from_targets(l1: usize, l2: usize, targets: Vec<Target>) -> Result<Self> {
        for (j, target) in targets.iter().enumerate() {
            let ok = match *target {
                Target::Leaf(i) => i < l1,
                Target::Slot(k) => k < l2,
            };
            if !ok {
                return Err(Error::InfeasibleAssignment(format!(
                    "joiner {j} targets {target:?}, outside {l1} leaves / {l2} slots"
                )));
            }
        }
        Ok(Self { l1, l2, targets })
    }

    /// Assignment with no joiners.
    pub fn empty(l1: usize, l2: usize) -> Self {
        Self {
            l1,
            l2,
            targets: Vec::new(),
        }
    }

    /// Builds the assignment from explicit 0/1 matrices (`x` is `l1 x m`,
    /// `y` is `l2 x m`).
    pub fn from_matrices(m: usize, x: &[Vec<u8>], y: &[Vec<u8>]) -> Result<Self> {
        if x.iter().chain(y).any(|row| row.len() != m) {
            return Err(Error::DimensionMismatch(format!(
                "every row must have {m} columns"
            )));
        }
        let mut targets = Vec::with_capacity(m);
        for j in 0..m {
            let mut chosen = Vec::new();
            for (i, row) in x.iter().enumerate() {
                match row[j] {
                    0 => {}
                    1 => chosen.push(Target::Leaf(i)),
                    v => {
                        return Err(Error::InfeasibleAssignment(format!(
                            "x[{i}][{j}] = {v} is not binary"
                        )))
                    }
                }
            }
            for (k, row) in y.iter().enumerate() {
                match row[j] {
                    0 => {}
                    1 => chosen.push(Target::Slot(k)),
                    v => {
                        return Err(Error::InfeasibleAssignment(format!(
                            "y[{k}][{j}] = {v} is not binary"
                        )))
                    }
                }
            }
            if chosen.len() != 1 {
                return Err(Error::InfeasibleAssignment(format!(
                    "joiner {j} is placed {} times",
                    chosen.len()
                )));
            }
            targets.push(chosen[0]);
        }
        Ok(Self {
            l1: x.len(),
            l2: y.len(),
            targets,
        })
    }

    /// Places joiners in order: the first `counts[0]` go to row 0, the next
    /// `counts[1]` to row 1, and so on (rows as in [`RekeyInstance`]).
    pub fn from_row_counts(l1: usize, l2: usize, counts: &[usize]) -> Result<Self> {
        if counts.len() != l1 + l2 {
            return Err(Error::DimensionMismatch(format!(
                "{} row counts for {} rows",
                counts.len(),
                l1 + l2
            )));
        }
        let targets = counts
            .iter()
            .enumerate()
            .flat_map(|(r, &c)| {
                let target = if r < l1 {
                    Target::Leaf(r)
                } else {
                    Target::Slot(r - l1)
                };
                std::iter::repeat_n(target, c)
            })
            .collect();
        Ok(Self { l1, l2, targets })
    }

    pub fn l1(&self) -> usize {
        self.l1
    }

    pub fn l2(&self) -> usize {
        self.l2
    }

    pub fn join_count(&self) -> usize {
        self.targets.len()
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn x(&self, i: usize, j: usize) -> bool {
        self.targets[j] == Target::Leaf(i)
    }

    pub fn y(&self, k: usize, j: usize) -> bool {
        self.targets[j] == Target::Slot(k)
    }

    /// `m_i = sum_j x_ij` per remaining leaf.
    pub fn leaf_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.l1];
        for t in &self.targets {
            if let Target::Leaf(i) = *t {
                counts[i] += 1;
            }
        }
        counts
    }

    /// `m_k = sum_j y_kj` per departed slot.
    pub fn slot_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.l2];
        for t in &self.targets {
            if let Target::Slot(k) = *t {
                counts[k] += 1;
            }
        }
        counts
    }

    /// Leaf counts followed by slot counts.
    pub fn row_counts(&self) -> Vec<usize> {
        let mut counts = self.leaf_counts();
        counts.extend(self.slot_counts());
        counts
    }

    /// Same placement with joiner columns reordered: joiner `j` of the result
    /// is joiner `perm[j]` of `self`.
    pub fn permute_joiners(&self, perm: &[usize]) -> Self {
        Self {
            l1: self.l1,
            l2: self.l2,
            targets: perm.iter().map(|&j| self.targets[j]).collect(),
        }
    }
}

/// A point `(x, y, u, v)` of the relaxed lifted model, all blocks row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedPoint {
    l1: usize,
    l2: usize,
    m: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl LiftedPoint {
    pub fn new(
        l1: usize,
        l2: usize,
        m: usize,
        x: Vec<f64>,
        y: Vec<f64>,
        u: Vec<f64>,
        v: Vec<f64>,
    ) -> Result<Self> {
        if x.len() != l1 * m || y.len() != l2 * m || u.len() != l1 || v.len() != l2 {
            return Err(Error::DimensionMismatch(format!(
                "lifted point blocks {}/{}/{}/{} do not match l1={l1}, l2={l2}, m={m}",
                x.len(),
                y.len(),
                u.len(),
                v.len()
            )));
        }
        Ok(Self {
            l1,
            l2,
            m,
            x,
            y,
            u,
            v,
        })
    }

    pub fn zeros(l1: usize, l2: usize, m: usize) -> Self {
        Self {
            l1,
            l2,
            m,
            x: vec![0.0; l1 * m],
            y: vec![0.0; l2 * m],
            u: vec![0.0; l1],
            v: vec![0.0; l2],
        }
    }

    pub fn l1(&self) -> usize {
        self.l1
    }

    pub fn l2(&self) -> usize {
        self.l2
    }

    pub fn join_count(&self) -> usize {
        self.m
    }

    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.m + j]
    }

    pub fn y(&self, k: usize, j: usize) -> f64 {
        self.y[k * self.m + j]
    }

    pub fn x_block(&self) -> &[f64] {
        &self.x
    }

    pub fn y_block(&self) -> &[f64] {
        &self.y
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn x_block_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub fn y_block_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    pub fn u_mut(&mut self) -> &mut [f64] {
        &mut self.u
    }

    pub fn v_mut(&mut self) -> &mut [f64] {
        &mut self.v
    }

    /// All coordinates in the order x, y, u, v.
    pub fn coordinates(&self) -> impl Iterator<Item = f64> + '_ {
        self.x
            .iter()
            .chain(&self.y)
            .chain(&self.u)
            .chain(&self.v)
            .copied()
    }

    pub fn dimension(&self) -> usize {
        self.x.len() + self.y.len() + self.u.len() + self.v.len()
    }

    /// Rebuilds a point from a flat coordinate vector in [`Self::coordinates`] order.
    pub fn from_coordinates(l1: usize, l2: usize, m: usize, flat: &[f64]) -> Result<Self> {
        let sizes = [l1 * m, l2 * m, l1, l2];
        if flat.len() != sizes.iter().sum::<usize>() {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates for l1={l1}, l2={l2}, m={m}",
                flat.len()
            )));
        }
        let (x, rest) = flat.split_at(sizes[0]);
        let (y, rest) = rest.split_at(sizes[1]);
        let (u, v) = rest.split_at(sizes[2]);
        Self::new(l1, l2, m, x.to_vec(), y.to_vec(), u.to_vec(), v.to_vec())
    }

    /// Every coordinate within `tol` of 0 or 1.
    pub fn is_binary(&self, tol: f64) -> bool {
        self.coordinates()
            .all(|z| z.abs() <= tol || (z - 1.0).abs() <= tol)
    }

    /// Checks membership in the lifted feasible set: unit column sums, the box
    /// `[0, 1]`, `sum_j x_ij <= m u_i` and `sum_j y_kj >= v_k`.
    pub fn check_feasible(&self, tol: f64) -> Result<()> {
        if let Some(z) = self
            .coordinates()
            .find(|&z| !(-tol..=1.0 + tol).contains(&z))
        {
            return Err(Error::OutsideFeasibleSet(format!(
                "coordinate {z} outside [0, 1]"
            )));
        }
        for j in 0..self.m {
            let col: f64 = (0..self.l1).map(|i| self.x(i, j)).sum::<f64>()
                + (0..self.l2).map(|k| self.y(k, j)).sum::<f64>();
            if (col - 1.0).abs() > tol * (self.l1 + self.l2).max(1) as f64 {
                return Err(Error::OutsideFeasibleSet(format!(
                    "column {j} sums to {col}"
                )));
            }
        }
        for (i, s) in self.leaf_sums().into_iter().enumerate() {
            if s > self.m as f64 * self.u[i] + tol * self.m.max(1) as f64 {
                return Err(Error::OutsideFeasibleSet(format!(
                    "row {i}: sum x = {s} exceeds m * u = {}",
                    self.m as f64 * self.u[i]
                )));
            }
        }
        for (k, s) in self.slot_sums().into_iter().enumerate() {
            if s + tol * (self.m.max(1) as f64) < self.v[k] {
                return Err(Error::OutsideFeasibleSet(format!(
                    "slot {k}: sum y = {s} is below v = {}",
                    self.v[k]
                )));
            }
        }
        Ok(())
    }
}

/// Row sums of a (binary or relaxed) placement.
pub trait Placement {
    /// `sum_j x_ij` per remaining leaf.
    fn leaf_sums(&self) -> Vec<f64>;
    /// `sum_j y_kj` per departed slot.
    fn slot_sums(&self) -> Vec<f64>;
}

impl Placement for Assignment {
    fn leaf_sums(&self) -> Vec<f64> {
        self.leaf_counts().into_iter().map(|c| c as f64).collect()
    }

    fn slot_sums(&self) -> Vec<f64> {
        self.slot_counts().into_iter().map(|c| c as f64).collect()
    }
}

impl Placement for LiftedPoint {
    fn leaf_sums(&self) -> Vec<f64> {
        if self.m == 0 {
            return vec![0.0; self.l1];
        }
        self.x.chunks(self.m).map(|row| row.iter().sum()).collect()
    }

    fn slot_sums(&self) -> Vec<f64> {
        if self.m == 0 {
            return vec![0.0; self.l2];
        }
        self.y.chunks(self.m).map(|row| row.iter().sum()).collect()
    }
}

/// Trade-off weight and penalty weight of the objectives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParams {
    pub lambda: f64,
    pub t: f64,
}

impl ObjectiveParams {
    pub fn new(lambda: f64, t: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t must be positive, got {t}"
            )));
        }
        Ok(Self { lambda, t })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )))
    }
}

/// Default balance weight: `0.1 / (largest leaf index)`, which keeps
/// `lambda * balance coefficient` on the scale of a few key updates whatever
/// the tree height.
pub fn default_lambda(tree: &KeyTree) -> f64 {
    0.1 / tree.max_leaf_index().max(1) as f64
}

/// Cost at remaining leaf with depth `d` receiving `joiners` new members.
pub fn per_node_insertion_cost(d: u32, joiners: usize) -> i64 {
    if joiners == 0 {
        0
    } else {
        i64::from(d) + 2 * joiners as i64 - 1
    }
}

/// Cost at a departed slot with depth `d` receiving `joiners` new members.
pub fn per_node_departure_cost(d: u32, joiners: usize) -> i64 {
    let above = i64::from(d) - 1;
    if joiners == 0 {
        above
    } else {
        above + 2 * joiners as i64 - 1
    }
}

/// `sum_k (d_k - 1)`: the part of the total cost no placement can change.
pub fn deletion_constant(instance: &RekeyInstance) -> i64 {
    instance
        .depths_departing()
        .iter()
        .map(|&d| i64::from(d) - 1)
        .sum()
}

/// Approximate total cost
/// `F(x, y) = sum_k (d_k - 1) + sum_i (d_i - 1)|sum_j x_ij|_0 - sum_k |sum_j y_kj|_0 + 2m`.
pub fn total_cost(instance: &RekeyInstance, assignment: &Assignment) -> Result<i64> {
    instance.check_assignment(assignment)?;
    let opened: i64 = instance
        .depths_remaining()
        .iter()
        .zip(assignment.leaf_counts())
        .filter(|&(_, c)| c > 0)
        .map(|(&d, _)| i64::from(d) - 1)
        .sum();
    let reused = assignment.slot_counts().iter().filter(|&&c| c > 0).count() as i64;
    Ok(deletion_constant(instance) + opened - reused + 2 * assignment.join_count() as i64)
}

/// Sum of the per-node case costs over all rows.
pub fn per_node_cost_sum(instance: &RekeyInstance, assignment: &Assignment) -> Result<i64> {
    instance.check_assignment(assignment)?;
    let insertion: i64 = instance
        .depths_remaining()
        .iter()
        .zip(assignment.leaf_counts())
        .map(|(&d, c)| per_node_insertion_cost(d, c))
        .sum();
    let departure: i64 = instance
        .depths_departing()
        .iter()
        .zip(assignment.slot_counts())
        .map(|(&d, c)| per_node_departure_cost(d, c))
        .sum();
    Ok(insertion + departure)
}

/// Post-rekey index positions `L'[i] (s_i + 1)` and `(A[k] / 2)(r_k + 1)`.
fn positions(instance: &RekeyInstance, placement: &impl Placement) -> Result<Vec<f64>> {
    let leaf = placement.leaf_sums();
    let slot = placement.slot_sums();
    if leaf.len() != instance.l1() || slot.len() != instance.l2() {
        return Err(Error::DimensionMismatch(format!(
            "placement has {}+{} rows, instance {}+{}",
            leaf.len(),
            slot.len(),
            instance.l1(),
            instance.l2()
        )));
    }
    Ok(instance
        .position_weights()
        .into_iter()
        .zip(leaf.into_iter().chain(slot))
        .map(|(w, s)| w * (s + 1.0))
        .collect())
}

/// Largest minus smallest post-rekey position index (0 when there are no rows).
pub fn balance_coefficient(instance: &RekeyInstance, placement: &impl Placement) -> Result<f64> {
    let pos = positions(instance, placement)?;
    if pos.is_empty() {
        return Ok(0.0);
    }
    let max = pos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = pos.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// The step-function objective
/// `sum_i (d_i - 1)|sum_j x_ij|_0 - sum_k |sum_j y_kj|_0 + lambda * balance`.
///
/// It differs from [`total_cost`] by the placement-independent
/// `sum_k (d_k - 1) + 2m` and the balance term.
pub fn objective_eq4(
    instance: &RekeyInstance,
    assignment: &Assignment,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    let cost = total_cost(instance, assignment)?
        - deletion_constant(instance)
        - 2 * assignment.join_count() as i64;
    Ok(cost as f64 + lambda * balance_coefficient(instance, assignment)?)
}

/// Tightest lifting: `u_i = |sum_j x_ij|_0`, `v_k = |sum_j y_kj|_0`.
pub fn lift(assignment: &Assignment) -> LiftedPoint {
    let (l1, l2, m) = (assignment.l1(), assignment.l2(), assignment.join_count());
    let mut point = LiftedPoint::zeros(l1, l2, m);
    for (j, target) in assignment.targets().iter().enumerate() {
        match *target {
            Target::Leaf(i) => {
                point.x[i * m + j] = 1.0;
                point.u[i] = 1.0;
            }
            Target::Slot(k) => {
                point.y[k * m + j] = 1.0;
                point.v[k] = 1.0;
            }
        }
    }
    point
}

/// Balance term of the lifted objective: `lambda * (max positions + max(-positions))`.
pub fn zeta(instance: &RekeyInstance, point: &LiftedPoint, lambda: f64) -> Result<f64> {
    Ok(lambda * balance_coefficient(instance, point)?)
}

/// `sum_i (d_i - 1) u_i - sum_k v_k + lambda * (max + max-of-negatives)` at a
/// point of the relaxed lifted feasible set.
pub fn lifted_objective(instance: &RekeyInstance, point: &LiftedPoint, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if point.l1() != instance.l1()
        || point.l2() != instance.l2()
        || point.join_count() != instance.join_count()
    {
        return Err(Error::DimensionMismatch(
            "lifted point does not match the instance".into(),
        ));
    }
    point.check_feasible(FEASIBILITY_TOL)?;
    Ok(linear_part(instance, point) + zeta(instance, point, lambda)?)
}

/// `sum_i (d_i - 1) u_i - sum_k v_k`.
pub(crate) fn linear_part(instance: &RekeyInstance, point: &LiftedPoint) -> f64 {
    let opened: f64 = instance
        .depths_remaining()
        .iter()
        .zip(point.u())
        .map(|(&d, &u)| (f64::from(d) - 1.0) * u)
        .sum();
    opened - point.v().iter().sum::<f64>()
}

/// Exact penalty `p = sum min(z, 1 - z)` over every coordinate.
pub fn penalty_p(point: &LiftedPoint) -> f64 {
    point.coordinates().map(|z| z.min(1.0 - z)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete2(departing: &[u64], m: usize) -> RekeyInstance {
        RekeyInstance::new(KeyTree::complete(2).unwrap(), departing.iter().copied(), m).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn per_node_cases() {
        assert_eq!(per_node_insertion_cost(3, 0), 0);
        assert_eq!(per_node_insertion_cost(2, 1), 3);
        assert_eq!(per_node_insertion_cost(3, 4), 10);
        assert_eq!(per_node_departure_cost(2, 0), 1);
        assert_eq!(per_node_departure_cost(2, 1), 2);
        assert_eq!(per_node_departure_cost(1, 0), 0);
    }

    #[test]
    fn total_cost_examples() {
        let inst = complete2(&[4], 1);
        let replace = Assignment::from_targets(3, 1, vec![Target::Slot(0)]).unwrap();
        let insert = Assignment::from_targets(3, 1, vec![Target::Leaf(0)]).unwrap();
        assert_eq!(total_cost(&inst, &replace), Ok(2));
        assert_eq!(total_cost(&inst, &insert), Ok(4));
        let inst = complete2(&[4], 0);
        assert_eq!(total_cost(&inst, &Assignment::empty(3, 1)), Ok(1));
    }

    #[test]
    fn balance_coefficient_examples() {
        let inst = complete2(&[4], 1);
        let replace = Assignment::from_targets(3, 1, vec![Target::Slot(0)]).unwrap();
        let insert = Assignment::from_targets(3, 1, vec![Target::Leaf(0)]).unwrap();
        assert!(close(balance_coefficient(&inst, &replace).unwrap(), 3.0));
        assert!(close(balance_coefficient(&inst, &insert).unwrap(), 8.0));
        let inst = complete2(&[], 0);
        assert!(close(
            balance_coefficient(&inst, &Assignment::empty(4, 0)).unwrap(),
            3.0
        ));
    }

    #[test]
    fn objective_examples() {
        let inst = complete2(&[4], 1);
        let replace = Assignment::from_targets(3, 1, vec![Target::Slot(0)]).unwrap();
        let insert = Assignment::from_targets(3, 1, vec![Target::Leaf(0)]).unwrap();
        assert!(close(objective_eq4(&inst, &replace, 0.1).unwrap(), -0.7));
        assert!(close(objective_eq4(&inst, &insert, 0.1).unwrap(), 1.8));
        let inst = complete2(&[], 0);
        for lambda in [0.01, 0.5, 3.0] {
            let got = objective_eq4(&inst, &Assignment::empty(4, 0), lambda).unwrap();
            assert!(close(got, lambda * 3.0));
        }
        assert!(objective_eq4(&inst, &Assignment::empty(4, 0), 0.0).is_err());
    }

    #[test]
    fn lifting_matches_the_step_objective() {
        let inst = complete2(&[4], 1);
        let replace = Assignment::from_targets(3, 1, vec![Target::Slot(0)]).unwrap();
        let lifted = lift(&replace);
        assert_eq!(lifted.u(), [0.0, 0.0, 0.0]);
        assert_eq!(lifted.v(), [1.0]);
        assert!(close(lifted_objective(&inst, &lifted, 0.1).unwrap(), -0.7));

        let inst = complete2(&[], 0);
        let lifted = lift(&Assignment::empty(4, 0));
        assert!(close(lifted_objective(&inst, &lifted, 0.2).unwrap(), 0.6));
    }

    #[test]
    fn lifted_objective_rejects_points_outside_the_set() {
        let inst = complete2(&[4], 1);
        // x placed at leaf 0 but u_0 = 0 violates the linking constraint
        let p = LiftedPoint::new(
            3,
            1,
            1,
            vec![1.0, 0.0, 0.0],
            vec![0.0],
            vec![0.0; 3],
            vec![0.0],
        )
        .unwrap();
        assert!(matches!(
            lifted_objective(&inst, &p, 0.1),
            Err(Error::OutsideFeasibleSet(_))
        ));
        // column does not sum to one
        let p = LiftedPoint::new(
            3,
            1,
            1,
            vec![0.5, 0.0, 0.0],
            vec![0.0],
            vec![1.0; 3],
            vec![0.0],
        )
        .unwrap();
        assert!(lifted_objective(&inst, &p, 0.1).is_err());
        // v exceeds the slot sum
        let p = LiftedPoint::new(
            3,
            1,
            1,
            vec![1.0, 0.0, 0.0],
            vec![0.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0],
        )
        .unwrap();
        assert!(lifted_objective(&inst, &p, 0.1).is_err());
    }

    #[test]
    fn penalty_examples() {
        let binary = lift(&Assignment::from_targets(3, 1, vec![Target::Slot(0)]).unwrap());
        assert_eq!(penalty_p(&binary), 0.0);
        let mut half = binary.clone();
        half.u_mut()[1] = 0.5;
        assert!(close(penalty_p(&half), 0.5));
        let quarter =
            LiftedPoint::new(1, 0, 2, vec![0.25, 0.25], vec![], vec![1.0], vec![]).unwrap();
        assert!(close(penalty_p(&quarter), 0.5));
    }

    #[test]
    fn matrices_round_trip_through_targets() {
        let a = Assignment::from_matrices(3, &[vec![1, 0, 0], vec![0, 0, 1]], &[vec![0, 1, 0]])
            .unwrap();
        assert_eq!(
            a.targets(),
            [Target::Leaf(0), Target::Slot(0), Target::Leaf(1)]
        );
        assert!(a.x(1, 2) && a.y(0, 1) && !a.x(0, 1));
        assert!(Assignment::from_matrices(2, &[vec![1, 1]], &[vec![0, 1]]).is_err());
        assert!(Assignment::from_matrices(1, &[vec![0]], &[vec![0]]).is_err());
        assert!(Assignment::from_matrices(1, &[vec![2]], &[]).is_err());
        assert!(Assignment::from_targets(1, 0, vec![Target::Slot(0)]).is_err());
    }

    #[test]
    fn row_counts_fill_in_order() {
        let a = Assignment::from_row_counts(2, 1, &[0, 2, 1]).unwrap();
        assert_eq!(
            a.targets(),
            [Target::Leaf(1), Target::Leaf(1), Target::Slot(0)]
        );
        assert_eq!(a.row_counts(), [0, 2, 1]);
    }
}
