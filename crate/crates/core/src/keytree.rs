//! Full binary key trees in heap numbering.
//!
//! The root is node `1` and the children of node `t` are `2t` and `2t + 1`, so a
//! tree is just the set of occupied indices. Leaves hold members; every interior
//! node holds a key-encryption key shared by the members below it. The depth of
//! a node is `floor(log2 t)`.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costmodel::{per_node_departure_cost, per_node_insertion_cost, Assignment};
use crate::error::{Error, Result};

/// Deepest depth whose indices still fit in a `u64`.
pub const MAX_DEPTH: u32 = 62;

/// Default fraction of the leaf capacity filled by [`TreeGenerator`].
pub const DEFAULT_FILL: f64 = 0.75;

/// Depth of a node: `floor(log2 index)`.
pub fn depth(index: u64) -> Result<u32> {
    if index == 0 {
        return Err(Error::InvalidIndex(index));
    }
    Ok(depth_of(index))
}

#[inline]
pub(crate) fn depth_of(index: u64) -> u32 {
    debug_assert!(index >= 1);
    63 - index.leading_zeros()
}

/// Strict ancestors of `index`, nearest first (parent, grandparent, ..., root).
pub(crate) fn ancestors(index: u64) -> impl Iterator<Item = u64> {
    std::iter::successors(Some(index), |&t| if t > 1 { Some(t / 2) } else { None }).skip(1)
}

/// A full binary tree stored as its set of heap indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TreeDocument", into = "TreeDocument")]
pub struct KeyTree {
    nodes: BTreeSet<u64>,
    height: u32,
}

/// On-disk form: `{"nodes": [sorted indices]}`.
#[derive(Serialize, Deserialize)]
struct TreeDocument {
    nodes: Vec<u64>,
}

impl TryFrom<TreeDocument> for KeyTree {
    type Error = Error;

    fn try_from(doc: TreeDocument) -> Result<Self> {
        KeyTree::from_nodes(doc.nodes)
    }
}

impl From<KeyTree> for TreeDocument {
    fn from(tree: KeyTree) -> Self {
        TreeDocument {
            nodes: tree.nodes.into_iter().collect(),
        }
    }
}

impl KeyTree {
    /// The tree with no members.
    pub fn empty() -> Self {
        Self::default()
    }

    /// A single-member tree, `{1}`.
    pub fn singleton() -> Self {
        Self {
            nodes: BTreeSet::from([1]),
            height: 0,
        }
    }

    /// The complete tree with every leaf at depth `height`.
    pub fn complete(height: u32) -> Result<Self> {
        if height > MAX_DEPTH {
            return Err(Error::TooDeep(height));
        }
        Ok(Self {
            nodes: (1..(1u64 << (height + 1))).collect(),
            height,
        })
    }

    /// Builds a tree from arbitrary indices, checking that they form a full,
    /// parent-closed binary tree.
    pub fn from_nodes(nodes: impl IntoIterator<Item = u64>) -> Result<Self> {
        let nodes: BTreeSet<u64> = nodes.into_iter().collect();
        if nodes.contains(&0) {
            return Err(Error::InvalidIndex(0));
        }
        if !nodes.is_empty() && !nodes.contains(&1) {
            return Err(Error::MalformedTree("root 1 is missing".into()));
        }
        let mut height = 0;
        for &t in &nodes {
            let d = depth_of(t);
            if d > MAX_DEPTH {
                return Err(Error::TooDeep(d));
            }
            if t > 1 && !nodes.contains(&(t / 2)) {
                return Err(Error::MalformedTree(format!(
                    "node {t} has no parent {}",
                    t / 2
                )));
            }
            if t > 1 && !nodes.contains(&(t ^ 1)) {
                return Err(Error::MalformedTree(format!(
                    "node {t} has no sibling {}",
                    t ^ 1
                )));
            }
            height = height.max(d);
        }
        Ok(Self { nodes, height })
    }

    pub fn nodes(&self) -> &BTreeSet<u64> {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, index: u64) -> bool {
        self.nodes.contains(&index)
    }

    /// Depth of the deepest leaf (0 for the empty and the singleton tree).
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn is_leaf(&self, index: u64) -> bool {
        self.nodes.contains(&index) && !self.nodes.contains(&(2 * index))
    }

    /// Leaves in ascending index order.
    pub fn leaves(&self) -> Vec<u64> {
        find_leaves(self)
    }

    /// Largest leaf index, or 0 for the empty tree.
    pub fn max_leaf_index(&self) -> u64 {
        self.nodes
            .iter()
            .rev()
            .find(|&&t| self.is_leaf(t))
            .copied()
            .unwrap_or(0)
    }

    /// Deepest minus shallowest leaf depth.
    pub fn balance(&self) -> u32 {
        tree_balance(self)
    }

    fn from_shape(shape: &Shape) -> Result<Self> {
        let mut nodes = BTreeSet::new();
        shape.collect_indices(1, &mut nodes)?;
        let height = nodes.iter().next_back().map_or(0, |&t| depth_of(t));
        Ok(Self { nodes, height })
    }
}

/// Leaves of `tree`: indices `t` with neither `2t` nor `2t + 1` present.
pub fn find_leaves(tree: &KeyTree) -> Vec<u64> {
    tree.nodes
        .iter()
        .copied()
        .filter(|&t| !tree.nodes.contains(&(2 * t)) && !tree.nodes.contains(&(2 * t + 1)))
        .collect()
}

/// Deepest leaf depth minus shallowest leaf depth; 0 for trees with at most one node.
pub fn tree_balance(tree: &KeyTree) -> u32 {
    let mut min = u32::MAX;
    let mut max = 0;
    for leaf in find_leaves(tree) {
        let d = depth_of(leaf);
        min = min.min(d);
        max = max.max(d);
    }
    if min == u32::MAX {
        0
    } else {
        max - min
    }
}

/// Random full binary trees with a prescribed height and leaf-depth spread.
///
/// Construction, all driven by one seeded ChaCha stream:
///
/// 1. grow from the root by splitting uniformly chosen leaves shallower than
///    `height` until some leaf reaches `height`;
/// 2. split every leaf shallower than `height - balance`;
/// 3. keep splitting uniformly chosen leaves shallower than `height` until the
///    leaf count reaches `ceil(fill * capacity)`.
///
/// Throughout, the last leaf at depth `height - balance` is never split, so the
/// result has its deepest leaf at `height` and its shallowest at exactly
/// `height - balance`. `capacity = 2^height - 2^balance + 1` is the largest leaf
/// count such a tree can have.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeGenerator {
    pub height: u32,
    pub balance: u32,
    pub fill: f64,
}

impl TreeGenerator {
    pub fn new(height: u32, balance: u32) -> Self {
        Self {
            height,
            balance,
            fill: DEFAULT_FILL,
        }
    }

    pub fn with_fill(mut self, fill: f64) -> Self {
        self.fill = fill;
        self
    }

    /// Maximum number of leaves of a tree with this height and balance.
    pub fn capacity(&self) -> u64 {
        (1u64 << self.height) - (1u64 << self.balance) + 1
    }

    pub fn generate(&self, seed: u64) -> Result<KeyTree> {
        let (height, balance) = (self.height, self.balance);
        if height > 30 {
            return Err(Error::TooDeep(height));
        }
        if height == 0 {
            return if balance == 0 {
                Ok(KeyTree::singleton())
            } else {
                Err(Error::InfeasibleConfiguration { height, balance })
            };
        }
        if balance >= height {
            return Err(Error::InfeasibleConfiguration { height, balance });
        }
        if !(0.0..=1.0).contains(&self.fill) {
            return Err(Error::InvalidParameter(format!(
                "fill must lie in [0, 1], got {}",
                self.fill
            )));
        }
        let shallow = height - balance;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut grower = Grower::new(height, shallow);

        while grower.max_depth < height {
            grower.split_random(&mut rng);
        }
        while let Some(pos) = grower.leaves.iter().position(|&t| depth_of(t) < shallow) {
            grower.split_at(pos);
        }
        let target = (self.fill * self.capacity() as f64).ceil() as usize;
        while grower.leaves.len() < target {
            if !grower.split_random(&mut rng) {
                break;
            }
        }
        KeyTree::from_nodes(grower.nodes)
    }
}

/// One realization of [`TreeGenerator`] with the default fill.
pub fn generate_random_tree(height: u32, balance: u32, seed: u64) -> Result<KeyTree> {
    TreeGenerator::new(height, balance).generate(seed)
}

struct Grower {
    nodes: BTreeSet<u64>,
    leaves: Vec<u64>,
    per_depth: Vec<usize>,
    height: u32,
    shallow: u32,
    max_depth: u32,
}

impl Grower {
    fn new(height: u32, shallow: u32) -> Self {
        let mut per_depth = vec![0; height as usize + 2];
        per_depth[0] = 1;
        Self {
            nodes: BTreeSet::from([1]),
            leaves: vec![1],
            per_depth,
            height,
            shallow,
            max_depth: 0,
        }
    }

    fn splittable(&self, leaf: u64) -> bool {
        let d = depth_of(leaf);
        if d >= self.height {
            return false;
        }
        // keep at least one leaf at depth <= shallow
        let at_or_above: usize = self.per_depth[..=self.shallow as usize].iter().sum();
        !(d == self.shallow && at_or_above == 1)
    }

    fn split_random(&mut self, rng: &mut ChaCha8Rng) -> bool {
        let candidates: Vec<usize> = (0..self.leaves.len())
            .filter(|&i| self.splittable(self.leaves[i]))
            .collect();
        if candidates.is_empty() {
            return false;
        }
        let pos = candidates[rng.gen_range(0..candidates.len())];
        self.split_at(pos);
        true
    }

    fn split_at(&mut self, pos: usize) {
        let leaf = self.leaves[pos];
        let d = depth_of(leaf) as usize;
        self.leaves[pos] = 2 * leaf;
        self.leaves.push(2 * leaf + 1);
        self.nodes.insert(2 * leaf);
        self.nodes.insert(2 * leaf + 1);
        self.per_depth[d] -= 1;
        self.per_depth[d + 1] += 2;
        self.max_depth = self.max_depth.max(d as u32 + 1);
    }
}

/// One batch of departures and arrivals against a fixed tree.
///
/// Rows of the decision model are the remaining leaves `L'` (in ascending
/// order) followed by the departing leaves `A` (ascending).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RekeyInstance {
    tree: KeyTree,
    departing: Vec<u64>,
    remaining: Vec<u64>,
    depths_remaining: Vec<u32>,
    depths_departing: Vec<u32>,
    join_count: usize,
}

impl RekeyInstance {
    pub fn new(
        tree: KeyTree,
        departing: impl IntoIterator<Item = u64>,
        join_count: usize,
    ) -> Result<Self> {
        let mut departing: Vec<u64> = departing.into_iter().collect();
        departing.sort_unstable();
        if departing.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInstance("duplicate departing leaf".into()));
        }
        for &a in &departing {
            if !tree.is_leaf(a) {
                return Err(Error::NotALeaf(a));
            }
            if a == 1 {
                return Err(Error::InvalidInstance(
                    "the root cannot depart through a batch rekey".into(),
                ));
            }
        }
        let remaining: Vec<u64> = find_leaves(&tree)
            .into_iter()
            .filter(|t| departing.binary_search(t).is_err())
            .collect();
        if remaining.is_empty() && departing.is_empty() && join_count > 0 {
            return Err(Error::InvalidInstance(
                "joiners need at least one leaf or departed slot".into(),
            ));
        }
        let depths_remaining = remaining.iter().map(|&t| depth_of(t)).collect();
        let depths_departing = departing.iter().map(|&t| depth_of(t)).collect();
        Ok(Self {
            tree,
            departing,
            remaining,
            depths_remaining,
            depths_departing,
            join_count,
        })
    }

    pub fn tree(&self) -> &KeyTree {
        &self.tree
    }

    /// `A`, ascending.
    pub fn departing(&self) -> &[u64] {
        &self.departing
    }

    /// `L' = L \ A`, ascending.
    pub fn remaining(&self) -> &[u64] {
        &self.remaining
    }

    pub fn depths_remaining(&self) -> &[u32] {
        &self.depths_remaining
    }

    pub fn depths_departing(&self) -> &[u32] {
        &self.depths_departing
    }

    /// Number of joining members `m`.
    pub fn join_count(&self) -> usize {
        self.join_count
    }

    /// `l1 = |L'|`.
    pub fn l1(&self) -> usize {
        self.remaining.len()
    }

    /// `l2 = |A|`.
    pub fn l2(&self) -> usize {
        self.departing.len()
    }

    pub fn rows(&self) -> usize {
        self.l1() + self.l2()
    }

    /// Index weights of the balance coefficient: `L'[i]` for remaining leaves
    /// and `A[k] / 2` for departed slots, in row order.
    pub fn position_weights(&self) -> Vec<f64> {
        self.remaining
            .iter()
            .map(|&t| t as f64)
            .chain(self.departing.iter().map(|&t| t as f64 / 2.0))
            .collect()
    }

    /// Row depths, `d_i` then `d_k`.
    pub fn row_depths(&self) -> impl Iterator<Item = u32> + '_ {
        self.depths_remaining
            .iter()
            .chain(self.depths_departing.iter())
            .copied()
    }

    pub(crate) fn check_assignment(&self, assignment: &Assignment) -> Result<()> {
        if assignment.l1() != self.l1()
            || assignment.l2() != self.l2()
            || assignment.join_count() != self.join_count
        {
            return Err(Error::InfeasibleAssignment(format!(
                "assignment is {}x{}x{}, instance is {}x{}x{}",
                assignment.l1(),
                assignment.l2(),
                assignment.join_count(),
                self.l1(),
                self.l2(),
                self.join_count
            )));
        }
        Ok(())
    }
}

/// Explicit tree used while restructuring.
enum Shape {
    Leaf,
    Node(Box<Shape>, Box<Shape>),
}

impl Shape {
    /// Left-filled complete subtree with `leaves` leaves (heap indices
    /// `1..2 * leaves` relative to its root).
    fn complete(leaves: usize) -> Shape {
        fn build(r: usize, n: usize) -> Shape {
            if r >= n {
                Shape::Leaf
            } else {
                Shape::Node(Box::new(build(2 * r, n)), Box::new(build(2 * r + 1, n)))
            }
        }
        debug_assert!(leaves >= 1);
        build(1, leaves)
    }

    fn collect_indices(&self, index: u64, out: &mut BTreeSet<u64>) -> Result<()> {
        let d = depth_of(index);
        if d > MAX_DEPTH {
            return Err(Error::TooDeep(d));
        }
        out.insert(index);
        if let Shape::Node(left, right) = self {
            left.collect_indices(2 * index, out)?;
            right.collect_indices(2 * index + 1, out)?;
        }
        Ok(())
    }
}

/// The tree after executing `assignment`.
///
/// Remaining leaves that receive `m_i > 0` joiners become the root of a
/// left-filled complete subtree with `m_i + 1` leaves; departed slots that
/// receive `m_k > 0` joiners are replaced by such a subtree with `m_k` leaves;
/// departed slots with no joiner are removed with sibling promotion (the parent
/// key node disappears and the sibling subtree takes its place). The result is
/// renumbered canonically from the root.
pub fn apply_rekey(
    tree: &KeyTree,
    instance: &RekeyInstance,
    assignment: &Assignment,
) -> Result<KeyTree> {
    instance.check_assignment(assignment)?;
    for &a in instance.departing() {
        if !tree.is_leaf(a) {
            return Err(Error::NotALeaf(a));
        }
    }
    let leaves = find_leaves(tree);
    let expected: Vec<u64> = leaves
        .iter()
        .copied()
        .filter(|t| instance.departing().binary_search(t).is_err())
        .collect();
    if expected != instance.remaining() {
        return Err(Error::InvalidInstance(
            "instance does not describe this tree".into(),
        ));
    }

    // leaf index -> number of leaves that replace it (0 = delete)
    let mut replacement: BTreeMap<u64, usize> = BTreeMap::new();
    for (&t, &mi) in instance.remaining().iter().zip(&assignment.leaf_counts()) {
        replacement.insert(t, mi + 1);
    }
    for (&a, &mk) in instance.departing().iter().zip(&assignment.slot_counts()) {
        replacement.insert(a, mk);
    }

    fn build(tree: &KeyTree, t: u64, replacement: &BTreeMap<u64, usize>) -> Option<Shape> {
        if tree.is_leaf(t) {
            return match replacement.get(&t).copied().unwrap_or(1) {
                0 => None,
                n => Some(Shape::complete(n)),
            };
        }
        match (
            build(tree, 2 * t, replacement),
            build(tree, 2 * t + 1, replacement),
        ) {
            (Some(l), Some(r)) => Some(Shape::Node(Box::new(l), Box::new(r))),
            (Some(only), None) | (None, Some(only)) => Some(only),
            (None, None) => None,
        }
    }

    if tree.is_empty() {
        return Ok(KeyTree::empty());
    }
    match build(tree, 1, &replacement) {
        Some(shape) => KeyTree::from_shape(&shape),
        None => Ok(KeyTree::empty()),
    }
}

/// Where node `index` ends up after leaf `deleted` is removed with sibling
/// promotion; `None` for the deleted leaf and its parent.
fn remap_after_deletion(deleted: u64, index: u64) -> Option<u64> {
    if deleted == 1 {
        return if index == 1 { None } else { Some(index) };
    }
    let parent = deleted / 2;
    let sibling = deleted ^ 1;
    if index == deleted || index == parent {
        return None;
    }
    let (d_idx, d_sib) = (depth_of(index), depth_of(sibling));
    if d_idx >= d_sib {
        let k = d_idx - d_sib;
        if index >> k == sibling {
            return Some((parent << k) + (index - (sibling << k)));
        }
    }
    Some(index)
}

/// Removes `departing` one after another (ascending original index), each
/// with sibling promotion. Returns the final tree and the depth each leaf had
/// at the moment it was removed.
pub fn delete_sequentially(tree: &KeyTree, departing: &[u64]) -> Result<(KeyTree, Vec<u32>)> {
    let mut order: Vec<u64> = departing.to_vec();
    order.sort_unstable();
    if order.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInstance("duplicate departing leaf".into()));
    }
    for &a in &order {
        if !tree.is_leaf(a) {
            return Err(Error::NotALeaf(a));
        }
    }
    let mut nodes = tree.nodes.clone();
    let mut pending = order;
    let mut depths = Vec::with_capacity(pending.len());
    for step in 0..pending.len() {
        let current = pending[step];
        depths.push(depth_of(current));
        nodes = nodes
            .iter()
            .filter_map(|&t| remap_after_deletion(current, t))
            .collect();
        for later in pending.iter_mut().skip(step + 1) {
            *later = remap_after_deletion(current, *later)
                .expect("a pending departure is never the deleted leaf or its parent");
        }
    }
    Ok((KeyTree::from_nodes(nodes)?, depths))
}

/// Key updates after executing `assignment`, counting shared ancestor keys once.
///
/// Each touched position contributes its per-node cost (see
/// [`per_node_insertion_cost`] and [`per_node_departure_cost`]). The keys on
/// its path are the `d_i` strict ancestors for a remaining leaf, and the
/// `d_k - 1` strict ancestors above the parent for a departed slot (the
/// parent's key is part of the slot's own term). Every key that appears on
/// `c > 1` of these paths is then refunded `c - 1` times.
pub fn exact_rekey_cost(instance: &RekeyInstance, assignment: &Assignment) -> Result<i64> {
    let (approximate, correction) = cost_with_overlap(instance, assignment)?;
    Ok(approximate - correction)
}

/// Sum of per-node costs and the overlap refund.
pub(crate) fn cost_with_overlap(
    instance: &RekeyInstance,
    assignment: &Assignment,
) -> Result<(i64, i64)> {
    instance.check_assignment(assignment)?;
    let mut multiplicity: BTreeMap<u64, i64> = BTreeMap::new();
    let mut approximate = 0;
    for ((&t, &d), &mi) in instance
        .remaining()
        .iter()
        .zip(instance.depths_remaining())
        .zip(&assignment.leaf_counts())
    {
        if mi == 0 {
            continue;
        }
        approximate += per_node_insertion_cost(d, mi);
        for key in ancestors(t) {
            *multiplicity.entry(key).or_default() += 1;
        }
    }
    for ((&a, &d), &mk) in instance
        .departing()
        .iter()
        .zip(instance.depths_departing())
        .zip(&assignment.slot_counts())
    {
        approximate += per_node_departure_cost(d, mk);
        for key in ancestors(a).skip(1) {
            *multiplicity.entry(key).or_default() += 1;
        }
    }
    let correction = multiplicity.values().map(|&c| c - 1).sum();
    Ok((approximate, correction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmodel::{total_cost, Target};

    fn tree(nodes: &[u64]) -> KeyTree {
        KeyTree::from_nodes(nodes.iter().copied()).unwrap()
    }

    fn nodes(t: &KeyTree) -> Vec<u64> {
        t.nodes().iter().copied().collect()
    }

    #[test]
    fn leaves_follow_the_set_definition() {
        assert_eq!(find_leaves(&tree(&[1])), vec![1]);
        assert_eq!(find_leaves(&tree(&[1, 2, 3, 4, 5, 6, 7])), vec![4, 5, 6, 7]);
        assert_eq!(find_leaves(&tree(&[1, 2, 3, 6, 7])), vec![2, 6, 7]);
        assert!(find_leaves(&KeyTree::empty()).is_empty());
    }

    #[test]
    fn depth_is_floor_log2() {
        assert_eq!(depth(1), Ok(0));
        assert_eq!(depth(7), Ok(2));
        assert_eq!(depth(1024), Ok(10));
        assert_eq!(depth(0), Err(Error::InvalidIndex(0)));
        for t in 1..5000u64 {
            assert_eq!(depth(2 * t).unwrap(), depth(t).unwrap() + 1);
        }
    }

    #[test]
    fn malformed_trees_are_rejected() {
        assert!(KeyTree::from_nodes([2, 3]).is_err());
        assert!(KeyTree::from_nodes([1, 2]).is_err());
        assert!(KeyTree::from_nodes([1, 2, 3, 8, 9]).is_err());
        assert!(KeyTree::from_nodes([0, 1]).is_err());
    }

    #[test]
    fn balance_examples() {
        assert_eq!(tree_balance(&tree(&[1, 2, 3, 4, 5, 6, 7])), 0);
        assert_eq!(tree_balance(&tree(&[1, 2, 3, 6, 7])), 1);
        assert_eq!(tree_balance(&tree(&[1])), 0);
    }

    #[test]
    fn generator_shapes() {
        for seed in 0..20 {
            assert_eq!(
                nodes(&generate_random_tree(2, 0, seed).unwrap()),
                (1..=7).collect::<Vec<_>>()
            );
            let t = generate_random_tree(2, 1, seed).unwrap();
            assert_eq!(t.len(), 5);
            assert!(nodes(&t) == [1, 2, 3, 4, 5] || nodes(&t) == [1, 2, 3, 6, 7]);
        }
        let t = generate_random_tree(8, 5, 3).unwrap();
        assert_eq!(t.height(), 8);
        assert_eq!(t.balance(), 5);
        let depths: Vec<u32> = t.leaves().iter().map(|&l| depth_of(l)).collect();
        assert_eq!(depths.iter().min(), Some(&3));
        assert!(t.leaves().len() >= 150);
    }

    #[test]
    fn generator_is_deterministic_and_rejects_infeasible() {
        let g = TreeGenerator::new(9, 4);
        assert_eq!(g.generate(11).unwrap(), g.generate(11).unwrap());
        assert_ne!(g.generate(11).unwrap(), g.generate(12).unwrap());
        assert_eq!(
            generate_random_tree(3, 3, 0),
            Err(Error::InfeasibleConfiguration {
                height: 3,
                balance: 3
            })
        );
    }

    #[test]
    fn generator_hits_every_feasible_pair() {
        for height in 1..=9 {
            for balance in 0..height {
                for fill in [0.0, 0.5, 1.0] {
                    let t = TreeGenerator::new(height, balance)
                        .with_fill(fill)
                        .generate(u64::from(height * 31 + balance))
                        .unwrap();
                    assert_eq!(t.height(), height);
                    assert_eq!(t.balance(), balance, "h={height} b={balance} fill={fill}");
                }
            }
        }
    }

    #[test]
    fn replacing_a_slot_keeps_the_shape() {
        let t = KeyTree::complete(2).unwrap();
        let inst = RekeyInstance::new(t.clone(), [4], 1).unwrap();
        let a = Assignment::from_targets(3, 1, vec![Target::Slot(0)]).unwrap();
        assert_eq!(apply_rekey(&t, &inst, &a).unwrap(), t);
    }

    #[test]
    fn pure_deletion_promotes_the_sibling() {
        let t = KeyTree::complete(2).unwrap();
        let inst = RekeyInstance::new(t.clone(), [4], 0).unwrap();
        let a = Assignment::from_targets(3, 1, vec![]).unwrap();
        assert_eq!(nodes(&apply_rekey(&t, &inst, &a).unwrap()), [1, 2, 3, 6, 7]);
    }

    #[test]
    fn insertion_grafts_a_subtree() {
        let t = KeyTree::complete(2).unwrap();
        let inst = RekeyInstance::new(t.clone(), [], 1).unwrap();
        // leaf 5 is row 1
        let a = Assignment::from_targets(4, 0, vec![Target::Leaf(1)]).unwrap();
        assert_eq!(
            nodes(&apply_rekey(&t, &inst, &a).unwrap()),
            [1, 2, 3, 4, 5, 6, 7, 10, 11]
        );
    }

    #[test]
    fn deleting_everything_empties_the_tree() {
        let t = tree(&[1, 2, 3]);
        let inst = RekeyInstance::new(t.clone(), [2, 3], 0).unwrap();
        let a = Assignment::from_targets(0, 2, vec![]).unwrap();
        assert!(apply_rekey(&t, &inst, &a).unwrap().is_empty());
    }

    #[test]
    fn sequential_deletion_examples() {
        let t = KeyTree::complete(2).unwrap();
        let (after, depths) = delete_sequentially(&t, &[4]).unwrap();
        assert_eq!(nodes(&after), [1, 2, 3, 6, 7]);
        assert_eq!(depths, [2]);
        let (after, depths) = delete_sequentially(&t, &[4, 5]).unwrap();
        assert_eq!(nodes(&after), [1, 2, 3]);
        assert_eq!(depths, [2, 1]);
        assert_eq!(delete_sequentially(&t, &[2]), Err(Error::NotALeaf(2)));
    }

    #[test]
    fn exact_cost_examples() {
        let t = KeyTree::complete(2).unwrap();
        let inst = RekeyInstance::new(t.clone(), [4], 1).unwrap();
        let a = Assignment::from_targets(3, 1, vec![Target::Slot(0)]).unwrap();
        assert_eq!(exact_rekey_cost(&inst, &a), Ok(2));
        assert_eq!(total_cost(&inst, &a), Ok(2));

        let inst = RekeyInstance::new(t.clone(), [], 0).unwrap();
        let a = Assignment::from_targets(4, 0, vec![]).unwrap();
        assert_eq!(exact_rekey_cost(&inst, &a), Ok(0));

        let inst = RekeyInstance::new(t.clone(), [4, 5], 2).unwrap();
        let a = Assignment::from_targets(2, 2, vec![Target::Slot(0), Target::Slot(1)]).unwrap();
        assert_eq!(total_cost(&inst, &a), Ok(4));
        assert_eq!(exact_rekey_cost(&inst, &a), Ok(3));
    }

    #[test]
    fn instance_validation() {
        let t = KeyTree::complete(2).unwrap();
        assert_eq!(
            RekeyInstance::new(t.clone(), [2], 0),
            Err(Error::NotALeaf(2))
        );
        assert!(RekeyInstance::new(t.clone(), [4, 4], 0).is_err());
        assert!(RekeyInstance::new(KeyTree::singleton(), [1], 0).is_err());
        assert!(RekeyInstance::new(KeyTree::empty(), [], 1).is_err());
        let inst = RekeyInstance::new(t, [6, 4], 3).unwrap();
        assert_eq!(inst.departing(), [4, 6]);
        assert_eq!(inst.remaining(), [5, 7]);
        assert_eq!(inst.position_weights(), [5.0, 7.0, 2.0, 3.0]);
    }

    #[test]
    fn mismatched_assignment_is_rejected() {
        let t = KeyTree::complete(2).unwrap();
        let inst = RekeyInstance::new(t.clone(), [4], 1).unwrap();
        let a = Assignment::from_targets(4, 0, vec![Target::Leaf(0)]).unwrap();
        assert!(matches!(
            exact_rekey_cost(&inst, &a),
            Err(Error::InfeasibleAssignment(_))
        ));
        assert!(apply_rekey(&t, &inst, &a).is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = generate_random_tree(5, 2, 9).unwrap();
        let text = serde_json::to_string(&t).unwrap();
        assert!(text.starts_with("{\"nodes\":[1,2,3"));
        let back: KeyTree = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<KeyTree>("{\"nodes\":[1,2]}").is_err());
    }
}
