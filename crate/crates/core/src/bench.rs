//! Seeded scenarios, the exhaustive oracle and the benchmark runner.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{batch_balanced, evaluate_plan, marking, rotation};
use crate::costmodel::{objective_eq4, Assignment};
use crate::dca::{dcaep_insertion_only, dcaep_plus, default_t0, SolverConfig};
use crate::error::{Error, Result};
use crate::keytree::{generate_random_tree, KeyTree, RekeyInstance};
use crate::RekeyReport;

/// Largest number of candidate assignments the oracle accepts, `(l1 + l2)^m`.
pub const ORACLE_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "dcaep+")]
    DcaepPlus,
    #[serde(rename = "dcaep")]
    Dcaep,
    #[serde(rename = "marking")]
    Marking,
    #[serde(rename = "merging")]
    Merging,
    #[serde(rename = "rotation")]
    Rotation,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::DcaepPlus,
        Algorithm::Dcaep,
        Algorithm::Rotation,
        Algorithm::Marking,
        Algorithm::Merging,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::DcaepPlus => "dcaep+",
            Algorithm::Dcaep => "dcaep",
            Algorithm::Marking => "marking",
            Algorithm::Merging => "merging",
            Algorithm::Rotation => "rotation",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm {s:?}")))
    }
}

/// Optional replacements for the solver defaults of an instance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub lambda: Option<f64>,
    pub t0: Option<f64>,
    pub theta: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iters: Option<usize>,
    pub starts: Option<usize>,
    pub seed: Option<u64>,
}

impl SolverOverrides {
    /// Defaults of [`SolverConfig::for_instance`] with the set fields
    /// replaced; `t0` and `theta` follow an overridden `lambda` unless given.
    pub fn config_for(&self, instance: &RekeyInstance) -> SolverConfig {
        let mut config = SolverConfig::for_instance(instance);
        if let Some(lambda) = self.lambda {
            config.lambda = lambda;
            config.t0 = default_t0(instance, lambda).max(1.0);
        }
        if let Some(t0) = self.t0 {
            config.t0 = t0;
        }
        config.theta = self.theta.unwrap_or(config.t0 / 2.0);
        if let Some(v) = self.epsilon {
            config.epsilon = v;
        }
        if let Some(v) = self.max_iters {
            config.max_iters = v;
        }
        if let Some(v) = self.starts {
            config.starts = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        config
    }

    /// `other`'s set fields win.
    pub fn merged(&self, other: &SolverOverrides) -> SolverOverrides {
        SolverOverrides {
            lambda: other.lambda.or(self.lambda),
            t0: other.t0.or(self.t0),
            theta: other.theta.or(self.theta),
            epsilon: other.epsilon.or(self.epsilon),
            max_iters: other.max_iters.or(self.max_iters),
            starts: other.starts.or(self.starts),
            seed: other.seed.or(self.seed),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub height: u32,
    pub balance: u32,
    pub seed: u64,
    /// `D`.
    pub departing: usize,
    /// `J`.
    pub joins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    #[serde(flatten)]
    pub params: ScenarioParams,
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub solver: SolverOverrides,
}

/// Builds the seeded tree and draws `D` distinct departing leaves uniformly.
pub fn generate_scenario(params: &ScenarioParams) -> Result<(KeyTree, RekeyInstance)> {
    let tree = generate_random_tree(params.height, params.balance, params.seed)?;
    let leaves = tree.leaves();
    if params.departing > leaves.len() || (tree.len() == 1 && params.departing > 0) {
        return Err(Error::InvalidInstance(format!(
            "{} departing members but the tree has {} leaves",
            params.departing,
            leaves.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(1);
    let departing: Vec<u64> = sample(&mut rng, leaves.len(), params.departing)
        .into_iter()
        .map(|i| leaves[i])
        .collect();
    let instance = RekeyInstance::new(tree.clone(), departing, params.joins)?;
    Ok((tree, instance))
}

/// Global minimizer of the step-function objective by enumerating every
/// row-count vector (only row sums matter). Ties keep the lexicographically
/// smallest vector.
pub fn brute_force_optimum(instance: &RekeyInstance, lambda: f64) -> Result<(Assignment, f64)> {
    let (rows, m) = (instance.rows(), instance.join_count());
    let size = (rows as f64).powi(m as i32);
    if size > ORACLE_LIMIT {
        return Err(Error::TooLarge(size));
    }
    let mut counts = vec![0; rows];
    let mut best: Option<(Vec<usize>, f64)> = None;

    fn visit(
        r: usize,
        left: usize,
        counts: &mut Vec<usize>,
        instance: &RekeyInstance,
        lambda: f64,
        best: &mut Option<(Vec<usize>, f64)>,
    ) -> Result<()> {
        if r + 1 >= counts.len() {
            if let Some(last) = counts.last_mut() {
                *last = left;
            }
            let a = Assignment::from_row_counts(instance.l1(), instance.l2(), counts)?;
            let value = objective_eq4(instance, &a, lambda)?;
            if best.as_ref().is_none_or(|(_, b)| value < *b - 1e-12) {
                *best = Some((counts.clone(), value));
            }
            return Ok(());
        }
        for c in 0..=left {
            counts[r] = c;
            visit(r + 1, left - c, counts, instance, lambda, best)?;
        }
        counts[r] = 0;
        Ok(())
    }

    visit(0, m, &mut counts, instance, lambda, &mut best)?;
    let (counts, value) = best.expect("at least one assignment");
    Ok((
        Assignment::from_row_counts(instance.l1(), instance.l2(), &counts)?,
        value,
    ))
}

/// Runs one algorithm; the reported time covers the solve call only.
pub fn run_algorithm(
    instance: &RekeyInstance,
    algorithm: Algorithm,
    overrides: &SolverOverrides,
) -> Result<RekeyReport> {
    let config = overrides.config_for(instance);
    let clock = Instant::now();
    let mut report = match algorithm {
        Algorithm::DcaepPlus => dcaep_plus(instance, &config)?.2,
        Algorithm::Dcaep => {
            dcaep_insertion_only(
                instance.tree(),
                instance.departing(),
                instance.join_count(),
                &config,
            )?
            .1
        }
        Algorithm::Marking => evaluate_plan(instance, &marking(instance))?,
        Algorithm::Merging => evaluate_plan(instance, &batch_balanced(instance))?,
        Algorithm::Rotation => evaluate_plan(instance, &rotation(instance))?,
    };
    report.wall_time_secs = clock.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: String,
    pub height: u32,
    pub departing: usize,
    pub joins: usize,
    pub algorithm: String,
    pub report: Option<RekeyReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
}

/// Mean metrics of one algorithm over the scenarios sharing `(H, D)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub height: u32,
    pub departing: usize,
    pub algorithm: String,
    pub rows: usize,
    pub mean_exact_cost: f64,
    pub mean_tree_balance: f64,
    pub mean_time_secs: f64,
}

/// `100 (1 - mean dcaep+ / mean dcaep)` per `(H, D)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub height: u32,
    pub departing: usize,
    pub dcaep_plus_mean: f64,
    pub dcaep_mean: f64,
    pub percent: f64,
}

pub const CSV_HEADER: [&str; 12] = [
    "scenario",
    "H",
    "D",
    "J",
    "algorithm",
    "exact_cost",
    "approx_cost",
    "balance_coefficient",
    "tree_balance",
    "time",
    "repaired",
    "error",
];

impl BenchTable {
    /// Canonical CSV; the time column stays empty unless `timing` is set,
    /// which keeps the output byte-identical across reruns.
    pub fn to_csv(&self, timing: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidParameter(format!("csv: {e}"));
        w.write_record(CSV_HEADER).map_err(io)?;
        for row in &self.rows {
            let mut rec = vec![
                row.scenario.clone(),
                row.height.to_string(),
                row.departing.to_string(),
                row.joins.to_string(),
                row.algorithm.clone(),
            ];
            match &row.report {
                Some(r) => rec.extend([
                    r.exact_cost.to_string(),
                    r.approx_cost.to_string(),
                    r.balance_coefficient.to_string(),
                    r.tree_balance.to_string(),
                    if timing {
                        format!("{:.2}", r.wall_time_secs)
                    } else {
                        String::new()
                    },
                    r.repaired.to_string(),
                    String::new(),
                ]),
                None => {
                    rec.extend(std::iter::repeat_n(String::new(), 6));
                    rec.push(row.error.clone().unwrap_or_default());
                }
            }
            w.write_record(&rec).map_err(io)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// JSON mirror: rows, aggregates and reductions. Times are zeroed unless
    /// `timing` is set.
    pub fn to_json(&self, timing: bool) -> String {
        let mut table = self.clone();
        if !timing {
            for r in table.rows.iter_mut().filter_map(|r| r.report.as_mut()) {
                r.wall_time_secs = 0.0;
            }
        }
        serde_json::to_string_pretty(&serde_json::json!({
            "rows": table.rows,
            "aggregates": table.aggregates(),
            "reductions": table.reductions(),
        }))
        .expect("bench table serializes")
    }

    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut groups: BTreeMap<(u32, usize, String), Vec<&RekeyReport>> = BTreeMap::new();
        for row in &self.rows {
            if let Some(r) = &row.report {
                groups
                    .entry((row.height, row.departing, row.algorithm.clone()))
                    .or_default()
                    .push(r);
            }
        }
        groups
            .into_iter()
            .map(|((height, departing, algorithm), reports)| {
                let n = reports.len() as f64;
                let mean =
                    |f: &dyn Fn(&RekeyReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
                Aggregate {
                    height,
                    departing,
                    algorithm,
                    rows: reports.len(),
                    mean_exact_cost: mean(&|r| r.exact_cost as f64),
                    mean_tree_balance: mean(&|r| f64::from(r.tree_balance)),
                    mean_time_secs: mean(&|r| r.wall_time_secs),
                }
            })
            .collect()
    }

    pub fn reductions(&self) -> Vec<Reduction> {
        let aggregates = self.aggregates();
        let find = |h: u32, d: usize, name: &str| {
            aggregates
                .iter()
                .find(|a| a.height == h && a.departing == d && a.algorithm == name)
                .map(|a| a.mean_exact_cost)
        };
        let mut keys: Vec<(u32, usize)> =
            aggregates.iter().map(|a| (a.height, a.departing)).collect();
        keys.dedup();
        keys.into_iter()
            .filter_map(|(h, d)| {
                let plus = find(h, d, Algorithm::DcaepPlus.name())?;
                let base = find(h, d, Algorithm::Dcaep.name())?;
                Some(Reduction {
                    height: h,
                    departing: d,
                    dcaep_plus_mean: plus,
                    dcaep_mean: base,
                    percent: 100.0 * (1.0 - plus / base),
                })
            })
            .collect()
    }
}

/// Runs every scenario x algorithm in suite order; failures are recorded
/// in the row and the run continues.
pub fn run_benchmark(suite: &[Scenario]) -> BenchTable {
    let mut rows = Vec::new();
    for scenario in suite {
        let p = scenario.params;
        let row = |algorithm: String, outcome: Result<RekeyReport>| BenchRow {
            scenario: scenario.id.clone(),
            height: p.height,
            departing: p.departing,
            joins: p.joins,
            algorithm,
            error: outcome.as_ref().err().map(|e| e.to_string()),
            report: outcome.ok(),
        };
        match generate_scenario(&p) {
            Ok((_, instance)) => {
                for &algorithm in &scenario.algorithms {
                    let outcome = run_algorithm(&instance, algorithm, &scenario.solver);
                    rows.push(row(algorithm.name().to_string(), outcome));
                }
            }
            Err(e) => {
                for &algorithm in &scenario.algorithms {
                    rows.push(row(algorithm.name().to_string(), Err(e.clone())));
                }
            }
        }
    }
    BenchTable { rows }
}

/// A family of scenarios: every seed crossed with every join count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub height: u32,
    pub balance: u32,
    pub departing: usize,
    pub joins: Vec<usize>,
    pub seeds: Vec<u64>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub solver: Option<SolverOverrides>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: Option<String>,
    pub height: u32,
    pub balance: u32,
    pub seed: u64,
    pub departing: usize,
    pub joins: usize,
    pub algorithms: Option<Vec<Algorithm>>,
    pub solver: Option<SolverOverrides>,
}

/// Benchmark configuration as read from a config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Fill the time column (makes the CSV vary between runs).
    #[serde(default)]
    pub timing: bool,
    /// Algorithms of every scenario that does not list its own; all five when empty.
    #[serde(default)]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default, rename = "sweep")]
    pub sweeps: Vec<Sweep>,
}

fn scenario_id(p: &ScenarioParams) -> String {
    format!(
        "h{}-b{}-d{}-j{}-s{}",
        p.height, p.balance, p.departing, p.joins, p.seed
    )
}

impl BenchConfig {
    /// Explicit scenarios first, then sweeps expanded seed-major.
    pub fn suite(&self) -> Vec<Scenario> {
        let default_algorithms = if self.algorithms.is_empty() {
            Algorithm::ALL.to_vec()
        } else {
            self.algorithms.clone()
        };
        let build = |params: ScenarioParams,
                     id: Option<String>,
                     algorithms: &Option<Vec<Algorithm>>,
                     solver: &Option<SolverOverrides>| Scenario {
            id: id.unwrap_or_else(|| scenario_id(&params)),
            params,
            algorithms: algorithms
                .clone()
                .unwrap_or_else(|| default_algorithms.clone()),
            solver: solver
                .as_ref()
                .map_or_else(|| self.solver.clone(), |s| self.solver.merged(s)),
        };
        let mut suite = Vec::new();
        for s in &self.scenarios {
            let params = ScenarioParams {
                height: s.height,
                balance: s.balance,
                seed: s.seed,
                departing: s.departing,
                joins: s.joins,
            };
            suite.push(build(params, s.id.clone(), &s.algorithms, &s.solver));
        }
        for sweep in &self.sweeps {
            for &seed in &sweep.seeds {
                for &joins in &sweep.joins {
                    let params = ScenarioParams {
                        height: sweep.height,
                        balance: sweep.balance,
                        seed,
                        departing: sweep.departing,
                        joins,
                    };
                    suite.push(build(params, None, &sweep.algorithms, &sweep.solver));
                }
            }
        }
        suite
    }
}
