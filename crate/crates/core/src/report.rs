use serde::{Deserialize, Serialize};

use crate::costmodel::{
    balance_coefficient, deletion_constant, objective_eq4, total_cost, Assignment,
};
use crate::error::Result;
use crate::keytree::{apply_rekey, cost_with_overlap, tree_balance, RekeyInstance};

/// Metrics of one rekeying run, shared by the solvers and the baselines.
///
/// `exact_cost` counts every updated key once; `approx_cost` is the sum of
/// per-node costs (shared ancestors counted once per touched position). Both
/// include `rebalance_cost` and, for individual-deletion schemes,
/// `deletion_cost`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RekeyReport {
    pub algorithm: String,
    pub exact_cost: i64,
    pub approx_cost: i64,
    /// Step-function objective of the placement at `lambda`.
    pub objective: f64,
    pub lambda: f64,
    pub balance_coefficient: f64,
    /// Deepest minus shallowest leaf depth of the rekeyed tree.
    pub tree_balance: u32,
    /// `sum_k (d_k - 1)` of the batch model.
    pub deletion_constant: i64,
    /// `2m`.
    pub join_constant: i64,
    pub deletion_cost: Option<i64>,
    pub insertion_cost: Option<i64>,
    pub rebalance_cost: i64,
    pub iterations: usize,
    pub wall_time_secs: f64,
    /// Penalty of the solver's final relaxed point.
    pub final_penalty: Option<f64>,
    /// Solver iterations, over all starts, where `f` rose at fixed `t`.
    pub descent_violations: usize,
    /// The final point was not binary and had to be rounded.
    pub repaired: bool,
    pub converged: bool,
}

impl RekeyReport {
    /// Metrics of executing `assignment` as one batch rekey.
    pub(crate) fn for_assignment(
        algorithm: &str,
        instance: &RekeyInstance,
        assignment: &Assignment,
        lambda: f64,
    ) -> Result<Self> {
        let (per_node, overlap) = cost_with_overlap(instance, assignment)?;
        let rekeyed = apply_rekey(instance.tree(), instance, assignment)?;
        Ok(Self {
            algorithm: algorithm.to_string(),
            exact_cost: per_node - overlap,
            approx_cost: total_cost(instance, assignment)?,
            objective: objective_eq4(instance, assignment, lambda)?,
            lambda,
            balance_coefficient: balance_coefficient(instance, assignment)?,
            tree_balance: tree_balance(&rekeyed),
            deletion_constant: deletion_constant(instance),
            join_constant: 2 * assignment.join_count() as i64,
            deletion_cost: None,
            insertion_cost: None,
            rebalance_cost: 0,
            iterations: 0,
            wall_time_secs: 0.0,
            final_penalty: None,
            descent_violations: 0,
            repaired: false,
            converged: true,
        })
    }
}
