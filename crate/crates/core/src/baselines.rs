//! Comparison heuristics: Marking, Batch Balanced (Merging) and Rotation.
//!
//! Each produces a [`BaselinePlan`] in terms of departed slots and joiner
//! indices `0..J`. [`evaluate_plan`] scores any plan with the same exact key
//! accounting as the solvers. "Shallowest" always breaks ties by the lowest
//! node index.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::costmodel::{
    default_lambda, per_node_departure_cost, per_node_insertion_cost, total_cost, Assignment,
    Target,
};
use crate::error::{Error, Result};
use crate::keytree::{
    apply_rekey, delete_sequentially, depth_of, exact_rekey_cost, tree_balance, KeyTree,
    RekeyInstance,
};
use crate::RekeyReport;

/// A new complete subtree holding `joiners` (and the anchor's current
/// occupant when `carry` is set) that replaces the leaf at `anchor`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graft {
    pub anchor: u64,
    pub joiners: Vec<usize>,
    pub carry: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselinePlan {
    pub algorithm: String,
    /// Departed slot -> joiners taking it over.
    pub replacements: BTreeMap<u64, Vec<usize>>,
    /// Departed slots removed with sibling promotion.
    pub deletions: Vec<u64>,
    pub graft: Option<Graft>,
    /// Run the leaf-moving rebalancing pass after the rekey.
    pub rebalance: bool,
    /// Joiners added after the rebalancing pass, each at the shallowest leaf
    /// of the tree at that moment.
    pub spill: Vec<usize>,
}

impl BaselinePlan {
    fn new(algorithm: &str) -> Self {
        Self {
            algorithm: algorithm.to_string(),
            replacements: BTreeMap::new(),
            deletions: Vec::new(),
            graft: None,
            rebalance: false,
            spill: Vec::new(),
        }
    }
}

fn by_depth(nodes: impl IntoIterator<Item = u64>) -> Vec<u64> {
    let mut nodes: Vec<u64> = nodes.into_iter().collect();
    nodes.sort_by_key(|&t| (depth_of(t), t));
    nodes
}

/// Shared `J <= D` rule: the `J` shallowest departed slots take one joiner
/// each, the rest are deleted.
fn replace_shallowest(instance: &RekeyInstance, plan: &mut BaselinePlan) {
    let order = by_depth(instance.departing().iter().copied());
    let j = instance.join_count();
    for (joiner, &slot) in order.iter().take(j).enumerate() {
        plan.replacements.insert(slot, vec![joiner]);
    }
    plan.deletions = order[j.min(order.len())..].to_vec();
    plan.deletions.sort_unstable();
}

/// `J > D`: joiner `k` takes departed slot `A[k]`; returns the joiners left over.
fn replace_all(instance: &RekeyInstance, plan: &mut BaselinePlan) -> Vec<usize> {
    for (joiner, &slot) in instance.departing().iter().enumerate() {
        plan.replacements.insert(slot, vec![joiner]);
    }
    (instance.l2()..instance.join_count()).collect()
}

/// Leaves of the tree once every departed slot is occupied again.
fn occupied_leaves(instance: &RekeyInstance) -> Vec<u64> {
    by_depth(
        instance
            .remaining()
            .iter()
            .chain(instance.departing())
            .copied(),
    )
}

pub fn marking(instance: &RekeyInstance) -> BaselinePlan {
    let mut plan = BaselinePlan::new("marking");
    let (j, d) = (instance.join_count(), instance.l2());
    if j <= d {
        replace_shallowest(instance, &mut plan);
    } else if d == 0 {
        let anchor = by_depth(instance.remaining().iter().copied())[0];
        plan.graft = Some(Graft {
            anchor,
            joiners: (0..j).collect(),
            carry: true,
        });
    } else {
        let extra = replace_all(instance, &mut plan);
        let anchor = by_depth(instance.departing().iter().copied())[0];
        plan.graft = Some(Graft {
            anchor,
            joiners: extra,
            carry: true,
        });
    }
    plan
}

pub fn batch_balanced(instance: &RekeyInstance) -> BaselinePlan {
    let mut plan = BaselinePlan::new("merging");
    if instance.join_count() <= instance.l2() {
        replace_shallowest(instance, &mut plan);
    } else {
        let extra = replace_all(instance, &mut plan);
        plan.graft = Some(Graft {
            anchor: occupied_leaves(instance)[0],
            joiners: extra,
            carry: true,
        });
    }
    plan
}

/// `J > D`: every departed slot is taken over, the tree is rebalanced, and
/// the extra joiners then go one by one to the shallowest leaf, which never
/// grows the height while a shallower leaf exists.
pub fn rotation(instance: &RekeyInstance) -> BaselinePlan {
    let mut plan = BaselinePlan::new("rotation");
    if instance.join_count() <= instance.l2() {
        replace_shallowest(instance, &mut plan);
        return plan;
    }
    plan.spill = replace_all(instance, &mut plan);
    plan.rebalance = true;
    plan
}

/// Turns the batch part of a plan into an assignment. Spilled joiners are
/// left out; the others keep their relative order.
pub fn plan_assignment(instance: &RekeyInstance, plan: &BaselinePlan) -> Result<Assignment> {
    let m = instance.join_count();
    let mut targets: Vec<Option<Target>> = vec![None; m];
    let mut spilled = vec![false; m];
    for &j in &plan.spill {
        match spilled.get_mut(j) {
            Some(seen @ false) => *seen = true,
            Some(true) => return Err(Error::InvalidPlan(format!("joiner {j} spilled twice"))),
            None => return Err(Error::InvalidPlan(format!("joiner {j} out of range"))),
        }
    }
    let mut place = |joiner: usize, target: Target| -> Result<()> {
        if spilled.get(joiner) == Some(&true) {
            return Err(Error::InvalidPlan(format!("joiner {joiner} placed twice")));
        }
        match targets.get_mut(joiner) {
            Some(slot @ None) => {
                *slot = Some(target);
                Ok(())
            }
            Some(Some(_)) => Err(Error::InvalidPlan(format!("joiner {joiner} placed twice"))),
            None => Err(Error::InvalidPlan(format!("joiner {joiner} out of range"))),
        }
    };
    let slot_of = |a: u64| instance.departing().binary_search(&a).ok();
    let mut handled = vec![false; instance.l2()];
    for (&a, joiners) in &plan.replacements {
        let k =
            slot_of(a).ok_or_else(|| Error::InvalidPlan(format!("{a} is not a departed slot")))?;
        if joiners.is_empty() {
            return Err(Error::InvalidPlan(format!("slot {a} replaced by nobody")));
        }
        handled[k] = true;
        for &j in joiners {
            place(j, Target::Slot(k))?;
        }
    }
    for &a in &plan.deletions {
        let k =
            slot_of(a).ok_or_else(|| Error::InvalidPlan(format!("{a} is not a departed slot")))?;
        if std::mem::replace(&mut handled[k], true) {
            return Err(Error::InvalidPlan(format!("slot {a} handled twice")));
        }
    }
    if let Some(k) = handled.iter().position(|h| !h) {
        return Err(Error::InvalidPlan(format!(
            "slot {} not handled",
            instance.departing()[k]
        )));
    }
    if let Some(graft) = &plan.graft {
        if !graft.carry {
            return Err(Error::InvalidPlan("a graft must keep its anchor".into()));
        }
        let target = if let Ok(i) = instance.remaining().binary_search(&graft.anchor) {
            Target::Leaf(i)
        } else if plan.replacements.contains_key(&graft.anchor) {
            Target::Slot(slot_of(graft.anchor).expect("replaced slots are departed"))
        } else {
            return Err(Error::InvalidPlan(format!(
                "cannot graft at {}",
                graft.anchor
            )));
        };
        for &j in &graft.joiners {
            place(j, target)?;
        }
    }
    let targets = targets
        .into_iter()
        .enumerate()
        .filter(|&(j, _)| !spilled[j])
        .map(|(j, t)| t.ok_or_else(|| Error::InvalidPlan(format!("joiner {j} not placed"))))
        .collect::<Result<Vec<_>>>()?;
    Assignment::from_targets(instance.l1(), instance.l2(), targets)
}

fn shallowest_leaf(tree: &KeyTree) -> u64 {
    by_depth(tree.leaves())[0]
}

fn deepest_leaf(tree: &KeyTree) -> u64 {
    tree.leaves()
        .into_iter()
        .min_by_key(|&t| (std::cmp::Reverse(depth_of(t)), t))
        .expect("non-empty tree")
}

/// Moves the deepest leaf under the shallowest one while their depths differ
/// by more than one, at most `max_moves` times. Each move costs the keys
/// above the removed leaf's vanishing parent plus a one-member insertion at
/// the shallowest leaf. Returns the tree and the total cost.
pub fn rebalance(tree: &KeyTree, max_moves: usize) -> Result<(KeyTree, i64)> {
    let mut tree = tree.clone();
    let mut cost = 0;
    for _ in 0..max_moves {
        if tree.len() < 3 {
            break;
        }
        let deep = deepest_leaf(&tree);
        if depth_of(deep) - depth_of(shallowest_leaf(&tree)) <= 1 {
            break;
        }
        cost += per_node_departure_cost(depth_of(deep), 0);
        let (shrunk, _) = delete_sequentially(&tree, &[deep])?;
        let s = shallowest_leaf(&shrunk);
        cost += per_node_insertion_cost(depth_of(s), 1);
        let mut nodes = shrunk.nodes().clone();
        nodes.insert(2 * s);
        nodes.insert(2 * s + 1);
        tree = KeyTree::from_nodes(nodes)?;
    }
    Ok((tree, cost))
}

/// Where `n` members land when each is added at the shallowest leaf (lowest
/// index on ties): joiner counts per leaf of `tree`, in leaf order.
fn shallowest_first(tree: &KeyTree, n: usize) -> Vec<usize> {
    let leaves = tree.leaves();
    let mut counts = vec![0; leaves.len()];
    // (depth, index, owning leaf) of every current leaf
    let mut open: BTreeSet<(u32, u64, usize)> = leaves
        .iter()
        .enumerate()
        .map(|(i, &t)| (depth_of(t), t, i))
        .collect();
    for _ in 0..n {
        let (d, t, owner) = open.pop_first().expect("a tree has leaves");
        counts[owner] += 1;
        open.insert((d + 1, 2 * t, owner));
        open.insert((d + 1, 2 * t + 1, owner));
    }
    counts
}

/// Scores a plan: exact and per-node cost of the equivalent batch rekey, plus
/// the rebalancing moves and the spilled insertions when the plan has them.
pub fn evaluate_plan(instance: &RekeyInstance, plan: &BaselinePlan) -> Result<RekeyReport> {
    let assignment = plan_assignment(instance, plan)?;
    let batch = if plan.spill.is_empty() {
        instance.clone()
    } else {
        RekeyInstance::new(
            instance.tree().clone(),
            instance.departing().iter().copied(),
            assignment.join_count(),
        )?
    };
    let lambda = default_lambda(instance.tree());
    let mut report = RekeyReport::for_assignment(&plan.algorithm, &batch, &assignment, lambda)?;
    if !plan.rebalance && plan.spill.is_empty() {
        return Ok(report);
    }
    let mut tree = apply_rekey(instance.tree(), &batch, &assignment)?;
    if plan.rebalance {
        let (balanced, extra) = rebalance(&tree, instance.rows())?;
        report.rebalance_cost = extra;
        report.exact_cost += extra;
        report.approx_cost += extra;
        tree = balanced;
    }
    if !plan.spill.is_empty() {
        let insertion = RekeyInstance::new(tree.clone(), [], plan.spill.len())?;
        let counts = shallowest_first(&tree, plan.spill.len());
        let placed = Assignment::from_row_counts(insertion.l1(), 0, &counts)?;
        let exact = exact_rekey_cost(&insertion, &placed)?;
        report.insertion_cost = Some(exact);
        report.exact_cost += exact;
        report.approx_cost += total_cost(&insertion, &placed)?;
        tree = apply_rekey(&tree, &insertion, &placed)?;
    }
    report.tree_balance = tree_balance(&tree);
    Ok(report)
}
