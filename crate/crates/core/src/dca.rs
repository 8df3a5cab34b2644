//! DCA with exact penalty for the lifted rekeying program.
//!
//! With penalty weight `t` the relaxed objective
//! `f = sum_i (d_i - 1) u_i - sum_k v_k + zeta + t p` is split as `g - h` with
//! `g = zeta` (plus the indicator of the lifted feasible set) and
//! `h = -sum_i (d_i - 1) u_i + sum_k v_k - t p`, both convex. Each iteration
//! linearizes `h` at the current point and solves the resulting LP; `t` grows
//! by `theta` while iterates stay fractional and is frozen at the first
//! binary iterate.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costmodel::{
    default_lambda, linear_part, objective_eq4, penalty_p, zeta, Assignment, LiftedPoint,
    Placement, Target,
};
use crate::error::{Error, Result};
use crate::keytree::{
    apply_rekey, cost_with_overlap, delete_sequentially, exact_rekey_cost, tree_balance, KeyTree,
    RekeyInstance,
};
use crate::lp::{build_lp, solve_lp};
use crate::RekeyReport;

/// Penalty below which an iterate counts as binary.
pub const BINARY_TOL: f64 = 1e-9;

/// Allowed rise of `f` per iteration at fixed `t`.
pub const DESCENT_SLACK: f64 = 1e-9;

/// A subgradient of `h`, blocks laid out like [`LiftedPoint`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgradientBundle {
    l1: usize,
    l2: usize,
    m: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl SubgradientBundle {
    pub fn zeros(l1: usize, l2: usize, m: usize) -> Self {
        Self {
            l1,
            l2,
            m,
            alpha: vec![0.0; l1 * m],
            beta: vec![0.0; l2 * m],
            gamma: vec![0.0; l1],
            sigma: vec![0.0; l2],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.l1, self.l2, self.m)
    }

    /// Coordinates in the order x, y, u, v.
    pub fn flat(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .chain(&self.beta)
            .chain(&self.gamma)
            .chain(&self.sigma)
            .copied()
            .collect()
    }
}

fn branch(z: f64, t: f64) -> f64 {
    if z >= 0.5 {
        t
    } else {
        -t
    }
}

/// Subgradient of `h` at `point`: `+t` or `-t` on every `x`/`y` coordinate
/// (at or above one half gives `+t`), `(1 - d_i) +- t` on `u`, `1 +- t` on `v`.
pub fn subgradient(point: &LiftedPoint, instance: &RekeyInstance, t: f64) -> SubgradientBundle {
    SubgradientBundle {
        l1: point.l1(),
        l2: point.l2(),
        m: point.join_count(),
        alpha: point.x_block().iter().map(|&z| branch(z, t)).collect(),
        beta: point.y_block().iter().map(|&z| branch(z, t)).collect(),
        gamma: point
            .u()
            .iter()
            .zip(instance.depths_remaining())
            .map(|(&z, &d)| 1.0 - f64::from(d) + branch(z, t))
            .collect(),
        sigma: point.v().iter().map(|&z| 1.0 + branch(z, t)).collect(),
    }
}

/// `h = -sum_i (d_i - 1) u_i + sum_k v_k - t p`.
pub fn h_component(instance: &RekeyInstance, point: &LiftedPoint, t: f64) -> f64 {
    -linear_part(instance, point) - t * penalty_p(point)
}

/// `f = g - h` on the lifted feasible set.
pub fn dc_objective(
    instance: &RekeyInstance,
    point: &LiftedPoint,
    lambda: f64,
    t: f64,
) -> Result<f64> {
    Ok(linear_part(instance, point) + zeta(instance, point, lambda)? + t * penalty_p(point))
}

/// Parameters of [`dcaep_plus`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    /// Initial penalty weight.
    pub t0: f64,
    /// Penalty increment while iterates are fractional.
    pub theta: f64,
    /// Relative tolerance of the stop test.
    pub epsilon: f64,
    /// Iteration cap per start.
    pub max_iters: usize,
    pub starts: usize,
    pub seed: u64,
}

/// `2 (max depth + lambda * largest leaf index)`.
pub fn default_t0(instance: &RekeyInstance, lambda: f64) -> f64 {
    let max_depth = instance.row_depths().max().unwrap_or(0);
    2.0 * (f64::from(max_depth) + lambda * instance.tree().max_leaf_index() as f64)
}

/// Penalty weight from which a binary iterate provably stays binary: one
/// more than the largest per-unit objective change available without `t`
/// (`d_i - 1` on `u`, `1` on `v`, `2 lambda w` through the spread).
pub fn persistence_threshold(instance: &RekeyInstance, lambda: f64) -> f64 {
    let depth_term = instance
        .depths_remaining()
        .iter()
        .map(|&d| f64::from(d) - 1.0)
        .fold(1.0, f64::max);
    let max_w = instance.position_weights().into_iter().fold(0.0, f64::max);
    1.0 + depth_term.max(2.0 * lambda * max_w)
}

impl SolverConfig {
    /// Defaults for `instance`: lambda from the tree, `t0` from
    /// [`default_t0`], `theta = t0 / 2`, `epsilon = 1e-5`, 500 iterations,
    /// 10 starts, seed 0.
    pub fn for_instance(instance: &RekeyInstance) -> Self {
        let lambda = default_lambda(instance.tree());
        let t0 = default_t0(instance, lambda).max(1.0);
        Self {
            lambda,
            t0,
            theta: t0 / 2.0,
            epsilon: 1e-5,
            max_iters: 500,
            starts: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("lambda", self.lambda)?;
        positive("t0", self.t0)?;
        positive("theta", self.theta)?;
        positive("epsilon", self.epsilon)?;
        if self.max_iters == 0 || self.starts == 0 {
            return Err(Error::InvalidParameter(
                "max_iters and starts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One DCA iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `f` at the new iterate.
    pub objective: f64,
    /// `f` at the previous iterate, same `t`.
    pub previous_objective: f64,
    pub penalty: f64,
    /// Penalty weight the LP of this iteration was built with.
    pub t: f64,
    pub is_binary: bool,
}

/// History of one DCA run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcaTrace {
    pub start: usize,
    pub records: Vec<IterationRecord>,
    pub final_point: LiftedPoint,
    pub assignment: Assignment,
    pub iterations: usize,
    pub wall_time_secs: f64,
    pub converged: bool,
    pub repaired: bool,
    /// An iterate was fractional after `t` had been frozen.
    pub fractional_recurred: bool,
}

impl DcaTrace {
    /// One JSON object per iteration: `l`, `f`, `p`, `t`, `is_binary`.
    pub fn to_json_lines(&self) -> String {
        self.records
            .iter()
            .map(|r| {
                serde_json::json!({
                    "l": r.iteration,
                    "f": r.objective,
                    "p": r.penalty,
                    "t": r.t,
                    "is_binary": r.is_binary,
                })
                .to_string()
                    + "\n"
            })
            .collect()
    }

    /// Iterations where `f` rose by more than `slack` at fixed `t`.
    pub fn descent_violations(&self, slack: f64) -> usize {
        self.records
            .iter()
            .filter(|r| r.objective > r.previous_objective + slack)
            .count()
    }
}

/// Random start: every joiner column uniform on the simplex, then
/// `u_i = min(1, m sum_j x_ij)` and `v_k = min(1, sum_j y_kj)`.
pub fn initial_point(instance: &RekeyInstance, rng: &mut impl Rng) -> LiftedPoint {
    let (l1, l2, m) = (instance.l1(), instance.l2(), instance.join_count());
    let rows = l1 + l2;
    let mut point = LiftedPoint::zeros(l1, l2, m);
    let mut column = vec![0.0; rows];
    for j in 0..m {
        for e in column.iter_mut() {
            *e = -(1.0 - rng.gen::<f64>()).ln();
        }
        let total: f64 = column.iter().sum();
        for (r, &e) in column.iter().enumerate() {
            if r < l1 {
                point.x_block_mut()[r * m + j] = e / total;
            } else {
                point.y_block_mut()[(r - l1) * m + j] = e / total;
            }
        }
    }
    let leaf = point.leaf_sums();
    let slot = point.slot_sums();
    for (u, s) in point.u_mut().iter_mut().zip(leaf) {
        *u = (m as f64 * s).min(1.0);
    }
    for (v, s) in point.v_mut().iter_mut().zip(slot) {
        *v = s.min(1.0);
    }
    point
}

/// Result of [`dca_step`].
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub point: LiftedPoint,
    pub objective: f64,
    pub previous_objective: f64,
}

/// One DCA iteration at penalty weight `t`.
pub fn dca_step(
    instance: &RekeyInstance,
    point: &LiftedPoint,
    lambda: f64,
    t: f64,
) -> Result<Step> {
    let previous_objective = dc_objective(instance, point, lambda, t)?;
    let lp = build_lp(instance, &subgradient(point, instance, t), lambda)?;
    let next = solve_lp(&lp)?.point;
    Ok(Step {
        objective: dc_objective(instance, &next, lambda, t)?,
        previous_objective,
        point: next,
    })
}

/// Runs DCA from `start_point` until the relative change of `f` drops
/// below `epsilon` or `max_iters` is reached.
pub fn run_from(
    instance: &RekeyInstance,
    config: &SolverConfig,
    start_point: LiftedPoint,
    start: usize,
) -> Result<DcaTrace> {
    let clock = Instant::now();
    let mut z = start_point;
    let mut t = config.t0;
    let mut frozen = false;
    let mut fractional_recurred = false;
    let mut converged = false;
    let mut records = Vec::new();
    for l in 0..config.max_iters {
        let step = dca_step(instance, &z, config.lambda, t)?;
        let p = penalty_p(&step.point);
        let is_binary = p <= BINARY_TOL;
        records.push(IterationRecord {
            iteration: l + 1,
            objective: step.objective,
            previous_objective: step.previous_objective,
            penalty: p,
            t,
            is_binary,
        });
        if is_binary {
            frozen = true;
        } else if frozen {
            fractional_recurred = true;
        } else {
            t += config.theta;
        }
        let settled = (step.objective - step.previous_objective).abs()
            <= config.epsilon * (step.previous_objective.abs() + 1.0);
        z = step.point;
        if settled {
            converged = true;
            break;
        }
    }
    let repaired = penalty_p(&z) > BINARY_TOL;
    let assignment = repair_to_binary(&z);
    Ok(DcaTrace {
        start,
        iterations: records.len(),
        records,
        final_point: z,
        assignment,
        wall_time_secs: clock.elapsed().as_secs_f64(),
        converged,
        repaired,
        fractional_recurred,
    })
}

/// Rounds every joiner column to its largest coordinate over `(x_.j, y_.j)`,
/// lowest row on ties.
pub fn repair_to_binary(point: &LiftedPoint) -> Assignment {
    let (l1, l2, m) = (point.l1(), point.l2(), point.join_count());
    let targets = (0..m)
        .map(|j| {
            let mut best = (f64::NEG_INFINITY, Target::Leaf(0));
            for i in 0..l1 {
                if point.x(i, j) > best.0 {
                    best = (point.x(i, j), Target::Leaf(i));
                }
            }
            for k in 0..l2 {
                if point.y(k, j) > best.0 {
                    best = (point.y(k, j), Target::Slot(k));
                }
            }
            best.1
        })
        .collect();
    Assignment::from_targets(l1, l2, targets).expect("argmax targets are in range")
}

/// RNG of start `start`: the stream `start` of the ChaCha generator seeded with `seed`.
pub fn start_rng(seed: u64, start: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64);
    rng
}

/// Every start of the multi-start loop, in start order.
pub fn multi_start(instance: &RekeyInstance, config: &SolverConfig) -> Result<Vec<DcaTrace>> {
    config.validate()?;
    (0..config.starts)
        .map(|start| {
            let z0 = initial_point(instance, &mut start_rng(config.seed, start));
            run_from(instance, config, z0, start)
        })
        .collect()
}

/// Multi-start DCA on the batch model; keeps the start with the smallest
/// step-function objective (lowest start index on ties).
pub fn dcaep_plus(
    instance: &RekeyInstance,
    config: &SolverConfig,
) -> Result<(Assignment, DcaTrace, RekeyReport)> {
    let clock = Instant::now();
    let traces = multi_start(instance, config)?;
    let iterations = traces.iter().map(|t| t.iterations).sum();
    let violations = traces
        .iter()
        .map(|t| t.descent_violations(DESCENT_SLACK))
        .sum();
    let mut best: Option<(f64, DcaTrace)> = None;
    for trace in traces {
        let value = objective_eq4(instance, &trace.assignment, config.lambda)?;
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, trace));
        }
    }
    let (_, trace) = best.expect("at least one start");
    let mut report =
        RekeyReport::for_assignment("dcaep+", instance, &trace.assignment, config.lambda)?;
    report.iterations = iterations;
    report.descent_violations = violations;
    report.wall_time_secs = clock.elapsed().as_secs_f64();
    report.final_penalty = Some(penalty_p(&trace.final_point));
    report.repaired = trace.repaired;
    report.converged = trace.converged;
    Ok((trace.assignment.clone(), trace, report))
}

/// The individual-deletion scheme: departing leaves are removed one at a
/// time, then all joiners are placed on the shrunken tree by the DCA solver
/// with no departed slots.
///
/// `deletion_cost` is the per-departure sum `sum (depth at removal - 1)`.
/// `exact_cost` scores each phase by distinct keys: the departures as one
/// key-refresh set on the original tree plus the exact insertion cost.
/// `approx_cost` adds the same two phases before the overlap refund, so it
/// never falls below `exact_cost`; removal one at a time can be cheaper than
/// either, since survivors move up as their siblings leave.
pub fn dcaep_insertion_only(
    tree: &KeyTree,
    departing: &[u64],
    m: usize,
    config: &SolverConfig,
) -> Result<(Assignment, RekeyReport)> {
    config.validate()?;
    // validates `departing` against `tree`
    let departures = RekeyInstance::new(tree.clone(), departing.iter().copied(), 0)?;
    let clock = Instant::now();
    let (shrunk, depths) = delete_sequentially(tree, departures.departing())?;
    // the last member leaving a one-leaf tree refreshes nothing
    let deletion_cost: i64 = depths.iter().map(|&d| (i64::from(d) - 1).max(0)).sum();
    let (deletion_approx, refund) = cost_with_overlap(
        &departures,
        &Assignment::empty(departures.l1(), departures.l2()),
    )?;
    let instance = RekeyInstance::new(shrunk.clone(), [], m)?;
    let (assignment, trace, inner) = if instance.rows() == 0 {
        // every leaf departed, so there is nothing to insert under
        if m > 0 {
            return Err(Error::InvalidInstance(
                "no leaf left to insert under".into(),
            ));
        }
        let a = Assignment::empty(0, 0);
        let report = RekeyReport::for_assignment("dcaep", &instance, &a, config.lambda)?;
        (a, None, report)
    } else {
        let (a, trace, report) = dcaep_plus(&instance, config)?;
        (a, Some(trace), report)
    };
    let insertion_cost = exact_rekey_cost(&instance, &assignment)?;
    let rekeyed = if instance.rows() == 0 {
        shrunk
    } else {
        apply_rekey(&shrunk, &instance, &assignment)?
    };
    let report = RekeyReport {
        algorithm: "dcaep".into(),
        exact_cost: deletion_approx - refund + insertion_cost,
        approx_cost: deletion_approx + inner.approx_cost,
        tree_balance: tree_balance(&rekeyed),
        deletion_cost: Some(deletion_cost),
        insertion_cost: Some(insertion_cost),
        wall_time_secs: clock.elapsed().as_secs_f64(),
        repaired: trace.as_ref().is_some_and(|t| t.repaired),
        ..inner
    };
    Ok((assignment, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmodel::lift;

    fn instance(departing: &[u64], m: usize) -> RekeyInstance {
        RekeyInstance::new(KeyTree::complete(2).unwrap(), departing.iter().copied(), m).unwrap()
    }

    #[test]
    fn subgradient_branches() {
        let inst = instance(&[4], 1);
        let p = LiftedPoint::new(
            3,
            1,
            1,
            vec![0.5, 0.49, 0.01],
            vec![0.0],
            vec![0.0, 1.0, 0.5],
            vec![1.0],
        )
        .unwrap();
        let g = subgradient(&p, &inst, 10.0);
        assert_eq!(g.alpha, [10.0, -10.0, -10.0]);
        assert_eq!(g.beta, [-10.0]);
        // leaves 5, 6, 7 sit at depth 2
        assert_eq!(g.gamma, [-11.0, 9.0, 9.0]);
        assert_eq!(g.sigma, [11.0]);

        let deep = RekeyInstance::new(KeyTree::complete(3).unwrap(), [], 0).unwrap();
        let g = subgradient(&LiftedPoint::zeros(8, 0, 0), &deep, 10.0);
        assert!(g.gamma.iter().all(|&v| v == -12.0));
    }

    #[test]
    fn replace_is_found_from_any_start() {
        let inst = instance(&[4], 1);
        let mut config = SolverConfig::for_instance(&inst);
        config.lambda = 0.1;
        for seed in 0..5 {
            config.seed = seed;
            let (a, trace, report) = dcaep_plus(&inst, &config).unwrap();
            assert_eq!(a.targets(), [Target::Slot(0)]);
            assert!((report.objective + 0.7).abs() < 1e-12);
            assert_eq!(report.exact_cost, 2);
            assert_eq!(trace.descent_violations(1e-9), 0);
        }
    }

    #[test]
    fn no_joiners_takes_one_iteration() {
        let inst = instance(&[4, 6], 0);
        let config = SolverConfig::for_instance(&inst);
        let (a, trace, report) = dcaep_plus(&inst, &config).unwrap();
        assert_eq!(a.join_count(), 0);
        assert_eq!(trace.iterations, 1);
        assert_eq!(report.approx_cost, 2);
    }

    #[test]
    fn repair_takes_the_column_argmax() {
        let p = LiftedPoint::new(
            2,
            1,
            1,
            vec![0.4, 0.35],
            vec![0.25],
            vec![1.0, 1.0],
            vec![0.25],
        )
        .unwrap();
        assert_eq!(repair_to_binary(&p).targets(), [Target::Leaf(0)]);
        let p = LiftedPoint::new(1, 1, 1, vec![0.5], vec![0.5], vec![1.0], vec![0.5]).unwrap();
        assert_eq!(repair_to_binary(&p).targets(), [Target::Leaf(0)]);
        let a = Assignment::from_targets(2, 1, vec![Target::Slot(0), Target::Leaf(1)]).unwrap();
        assert_eq!(repair_to_binary(&lift(&a)), a);
    }

    #[test]
    fn insertion_only_examples() {
        let tree = KeyTree::complete(2).unwrap();
        let config = SolverConfig::for_instance(&instance(&[], 1));
        let (_, report) = dcaep_insertion_only(&tree, &[4], 0, &config).unwrap();
        assert_eq!(
            (report.deletion_cost, report.insertion_cost),
            (Some(1), Some(0))
        );
        let (_, report) = dcaep_insertion_only(&tree, &[4, 5], 0, &config).unwrap();
        assert_eq!(report.deletion_cost, Some(1));
        assert_eq!(report.exact_cost, 1);

        let (a, report) = dcaep_insertion_only(&tree, &[], 1, &config).unwrap();
        let (b, _, plus) = dcaep_plus(&instance(&[], 1), &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(report.exact_cost, plus.exact_cost);
        assert_eq!(report.deletion_cost, Some(0));
    }

    #[test]
    fn identical_seeds_give_identical_runs() {
        let tree = crate::keytree::generate_random_tree(5, 2, 3).unwrap();
        let leaves = tree.leaves();
        let inst = RekeyInstance::new(tree, leaves.iter().step_by(3).copied(), 7).unwrap();
        let config = SolverConfig::for_instance(&inst);
        let (a1, t1, _) = dcaep_plus(&inst, &config).unwrap();
        let (a2, t2, _) = dcaep_plus(&inst, &config).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(t1.records, t2.records);
        assert_eq!(t1.final_point, t2.final_point);
    }

    #[test]
    fn trace_exports_one_line_per_iteration() {
        let inst = instance(&[4], 2);
        let (_, trace, _) = dcaep_plus(&inst, &SolverConfig::for_instance(&inst)).unwrap();
        let text = trace.to_json_lines();
        assert_eq!(text.lines().count(), trace.iterations);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for key in ["l", "f", "p", "t", "is_binary"] {
            assert!(first.get(key).is_some());
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let inst = instance(&[4], 1);
        let mut config = SolverConfig::for_instance(&inst);
        config.starts = 0;
        assert!(dcaep_plus(&inst, &config).is_err());
        let mut config = SolverConfig::for_instance(&inst);
        config.theta = -1.0;
        assert!(dcaep_plus(&inst, &config).is_err());
    }
}
