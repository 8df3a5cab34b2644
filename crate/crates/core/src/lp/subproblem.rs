//! The convex subproblem solved at every DCA iteration:
//!
//! ```text
//! min  lambda (xi + mu) - <x, alpha> - <y, beta> - <u, gamma> - <v, sigma>
//! s.t. sum_i x_ij + sum_k y_kj = 1                 every joiner j
//!      sum_j x_ij <= m u_i,   v_k <= sum_j y_kj
//!      w_r (s_r + 1) <= xi,  -w_r (s_r + 1) <= mu   every row r
//!      x, y, u, v in [0, 1]
//! ```
//!
//! where `s_r` is the row sum and `w_r` the position weight of row `r`.
//!
//! Everything except the joiner costs depends on the row sums only, so joiner
//! columns with equal cost vectors are interchangeable. [`solve_lp`] exploits
//! that: it solves an aggregated LP over flows from column groups to rows and
//! splits the flows back over the columns. When every joiner cost is `+T` or
//! `-T` (the DCA case) a joiner column is characterized by its set of `-T`
//! ("hot") rows, and all `+T` mass shares one pool per row. The aggregated LP
//! has the same optimal value, and the split solution is optimal for the full
//! LP: any full solution aggregates to one of equal cost, and splitting never
//! increases the cost (a pooled unit landing on one of its own hot rows only
//! gets cheaper). [`solve_lp_direct`] solves the full LP instead.

use std::collections::HashMap;

use super::problem::{LinearProgram, RowKind};
use super::simplex;
use crate::costmodel::LiftedPoint;
use crate::dca::SubgradientBundle;
use crate::error::{Error, Result};
use crate::keytree::RekeyInstance;

const INTEGRAL_SNAP: f64 = 1e-9;

/// Data of one subproblem; rows ordered as in [`RekeyInstance`].
#[derive(Clone, Debug, PartialEq)]
pub struct LpSubproblem {
    l1: usize,
    l2: usize,
    m: usize,
    lambda: f64,
    weights: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    sigma: Vec<f64>,
}

/// Optimal solution of a subproblem.
#[derive(Clone, Debug, PartialEq)]
pub struct LpOutcome {
    pub point: LiftedPoint,
    pub xi: f64,
    pub mu: f64,
    pub objective: f64,
    pub pivots: usize,
    /// Variables of the LP actually handed to the simplex.
    pub solved_variables: usize,
}

pub fn build_lp(
    instance: &RekeyInstance,
    subgrad: &SubgradientBundle,
    lambda: f64,
) -> Result<LpSubproblem> {
    let (l1, l2, m) = (instance.l1(), instance.l2(), instance.join_count());
    if subgrad.dims() != (l1, l2, m) {
        return Err(Error::DimensionMismatch(format!(
            "subgradient has dimensions {:?}, instance ({l1}, {l2}, {m})",
            subgrad.dims()
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(LpSubproblem {
        l1,
        l2,
        m,
        lambda,
        weights: instance.position_weights(),
        alpha: subgrad.alpha.clone(),
        beta: subgrad.beta.clone(),
        gamma: subgrad.gamma.clone(),
        sigma: subgrad.sigma.clone(),
    })
}

impl LpSubproblem {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.l1, self.l2, self.m)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn rows(&self) -> usize {
        self.l1 + self.l2
    }

    /// `l1 m + l2 m + l1 + l2 + 2`.
    pub fn num_variables(&self) -> usize {
        self.rows() * self.m + self.rows() + 2
    }

    pub fn num_column_rows(&self) -> usize {
        self.m
    }

    pub fn num_linking_rows(&self) -> usize {
        self.rows()
    }

    pub fn num_epigraph_rows(&self) -> usize {
        2 * self.rows()
    }

    /// The same problem with every objective coefficient multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let scale = |v: &[f64]| v.iter().map(|a| a * c).collect();
        Self {
            lambda: self.lambda * c,
            alpha: scale(&self.alpha),
            beta: scale(&self.beta),
            gamma: scale(&self.gamma),
            sigma: scale(&self.sigma),
            ..self.clone()
        }
    }

    /// Objective coefficient of joiner `j` in row `r`.
    fn joiner_cost(&self, r: usize, j: usize) -> f64 {
        if r < self.l1 {
            -self.alpha[r * self.m + j]
        } else {
            -self.beta[(r - self.l1) * self.m + j]
        }
    }

    fn u_cost(&self, r: usize) -> f64 {
        if r < self.l1 {
            -self.gamma[r]
        } else {
            -self.sigma[r - self.l1]
        }
    }

    /// Objective value at `(point, xi, mu)`.
    pub fn objective_at(&self, point: &LiftedPoint, xi: f64, mu: f64) -> f64 {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        self.lambda * (xi + mu)
            - dot(point.x_block(), &self.alpha)
            - dot(point.y_block(), &self.beta)
            - dot(point.u(), &self.gamma)
            - dot(point.v(), &self.sigma)
    }

    /// Bounds of `xi` and `mu`. Positions are at least `w_r`, so `xi >= max w`
    /// holds on the whole feasible set and `mu <= -min w` at every optimum.
    fn epigraph_bounds(&self) -> ((f64, f64), (f64, f64)) {
        if self.weights.is_empty() {
            return ((0.0, 0.0), (0.0, 0.0));
        }
        let max_w = self
            .weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let min_w = self.weights.iter().copied().fold(f64::INFINITY, f64::min);
        ((max_w, f64::INFINITY), (f64::NEG_INFINITY, -min_w))
    }

    /// Adds `u`/`v`, `xi`/`mu`, the linking and epigraph rows, given the
    /// variables making up each row sum.
    fn add_row_structure(
        &self,
        lp: &mut LinearProgram,
        row_terms: &[Vec<usize>],
    ) -> (usize, usize, usize) {
        let m = self.m as f64;
        let first_uv = lp.num_variables();
        for r in 0..self.rows() {
            let name = if r < self.l1 {
                format!("u_{r}")
            } else {
                format!("v_{}", r - self.l1)
            };
            lp.add_variable(name, self.u_cost(r), 0.0, 1.0);
        }
        let ((xlo, xhi), (mlo, mhi)) = self.epigraph_bounds();
        let xi = lp.add_variable("xi", self.lambda, xlo, xhi);
        let mu = lp.add_variable("mu", self.lambda, mlo, mhi);
        for (r, terms) in row_terms.iter().enumerate() {
            let uv = first_uv + r;
            if r < self.l1 {
                let mut coeffs: Vec<(usize, f64)> = terms.iter().map(|&v| (v, 1.0)).collect();
                coeffs.push((uv, -m));
                lp.add_row(format!("link_u_{r}"), coeffs, RowKind::Le, 0.0);
            } else {
                let mut coeffs: Vec<(usize, f64)> = vec![(uv, 1.0)];
                coeffs.extend(terms.iter().map(|&v| (v, -1.0)));
                lp.add_row(format!("link_v_{}", r - self.l1), coeffs, RowKind::Le, 0.0);
            }
        }
        for (r, terms) in row_terms.iter().enumerate() {
            let w = self.weights[r];
            let mut up: Vec<(usize, f64)> = terms.iter().map(|&v| (v, w)).collect();
            up.push((xi, -1.0));
            lp.add_row(format!("top_{r}"), up, RowKind::Le, -w);
            let mut down: Vec<(usize, f64)> = terms.iter().map(|&v| (v, -w)).collect();
            down.push((mu, -1.0));
            lp.add_row(format!("bottom_{r}"), down, RowKind::Le, w);
        }
        (first_uv, xi, mu)
    }

    /// The full LP: `x` (row-major), `y`, `u`, `v`, `xi`, `mu`.
    pub fn to_linear_program(&self) -> LinearProgram {
        let mut lp = LinearProgram::new();
        let mut row_terms = vec![Vec::with_capacity(self.m); self.rows()];
        for (r, terms) in row_terms.iter_mut().enumerate() {
            for j in 0..self.m {
                let name = if r < self.l1 {
                    format!("x_{r}_{j}")
                } else {
                    format!("y_{}_{j}", r - self.l1)
                };
                terms.push(lp.add_variable(name, self.joiner_cost(r, j), 0.0, 1.0));
            }
        }
        for j in 0..self.m {
            let coeffs = row_terms.iter().map(|t| (t[j], 1.0)).collect();
            lp.add_row(format!("joiner_{j}"), coeffs, RowKind::Eq, 1.0);
        }
        self.add_row_structure(&mut lp, &row_terms);
        lp
    }

    /// The full LP in CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        self.to_linear_program().to_lp_format()
    }

    /// `Some(T)` when every joiner cost is `+T` or `-T`.
    fn two_valued(&self) -> Option<f64> {
        let mut it = self.alpha.iter().chain(&self.beta).map(|a| a.abs());
        let t = it.next()?;
        (t > 0.0 && it.all(|a| a == t)).then_some(t)
    }
}

/// Column groups in order of first appearance.
fn group_columns<K: std::hash::Hash + Eq>(
    m: usize,
    key: impl Fn(usize) -> K,
) -> Vec<(Vec<usize>, usize)> {
    let mut index: HashMap<K, usize> = HashMap::new();
    let mut groups: Vec<(Vec<usize>, usize)> = Vec::new();
    for j in 0..m {
        let g = *index.entry(key(j)).or_insert_with(|| {
            groups.push((Vec::new(), j));
            groups.len() - 1
        });
        groups[g].0.push(j);
    }
    groups
}

/// Spreads `amount` of row `r` over `columns`, filling each up to one.
struct Splitter {
    residual: Vec<f64>,
    cursor: usize,
}

impl Splitter {
    fn new(len: usize) -> Self {
        Self {
            residual: vec![1.0; len],
            cursor: 0,
        }
    }

    fn pour(&mut self, mut amount: f64, mut put: impl FnMut(usize, f64)) {
        while amount > INTEGRAL_SNAP && self.cursor < self.residual.len() {
            let take = amount.min(self.residual[self.cursor]);
            put(self.cursor, take);
            amount -= take;
            self.residual[self.cursor] -= take;
            if self.residual[self.cursor] <= INTEGRAL_SNAP {
                self.cursor += 1;
            }
        }
    }
}

/// Solves the subproblem through the aggregated LP.
pub fn solve_lp(lp: &LpSubproblem) -> Result<LpOutcome> {
    let (l1, l2, m) = lp.dims();
    let rows = lp.rows();
    if m == 0 || rows == 0 {
        return solve_lp_direct(lp);
    }
    let mut prog = LinearProgram::new();
    let mut row_terms: Vec<Vec<usize>> = vec![Vec::new(); rows];
    // (group columns, flow variable per row or usize::MAX)
    let mut flows: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut pool: Vec<usize> = Vec::new();

    if let Some(t) = lp.two_valued() {
        let hot = |j: usize| -> Vec<usize> {
            (0..rows).filter(|&r| lp.joiner_cost(r, j) < 0.0).collect()
        };
        let groups = group_columns(m, hot);
        let mut total = Vec::new();
        for (g, (cols, first)) in groups.into_iter().enumerate() {
            let n = cols.len() as f64;
            let mut vars = vec![usize::MAX; rows];
            let mut own = Vec::new();
            for r in (0..rows).filter(|&r| lp.joiner_cost(r, first) < 0.0) {
                let v = prog.add_variable(format!("hot_{g}_{r}"), -t, 0.0, n);
                vars[r] = v;
                row_terms[r].push(v);
                own.push((v, 1.0));
                total.push((v, 1.0));
            }
            if own.len() > 1 {
                prog.add_row(format!("group_{g}"), own, RowKind::Le, n);
            }
            flows.push((cols, vars));
        }
        for (r, terms) in row_terms.iter_mut().enumerate() {
            let v = prog.add_variable(format!("pool_{r}"), t, 0.0, m as f64);
            terms.push(v);
            pool.push(v);
            total.push((v, 1.0));
        }
        prog.add_row("joiners", total, RowKind::Eq, m as f64);
    } else {
        let key =
            |j: usize| -> Vec<u64> { (0..rows).map(|r| lp.joiner_cost(r, j).to_bits()).collect() };
        let groups = group_columns(m, key);
        for (g, (cols, first)) in groups.into_iter().enumerate() {
            let n = cols.len() as f64;
            let mut vars = Vec::with_capacity(rows);
            for (r, terms) in row_terms.iter_mut().enumerate() {
                let v =
                    prog.add_variable(format!("flow_{g}_{r}"), lp.joiner_cost(r, first), 0.0, n);
                terms.push(v);
                vars.push(v);
            }
            prog.add_row(
                format!("group_{g}"),
                vars.iter().map(|&v| (v, 1.0)).collect(),
                RowKind::Eq,
                n,
            );
            flows.push((cols, vars));
        }
    }
    let (first_uv, xi, mu) = lp.add_row_structure(&mut prog, &row_terms);
    let sol = simplex::solve(&prog)?;
    let val = &sol.values;

    let mut x = vec![0.0; rows * m];
    let mut splitter = Splitter::new(m);
    // Group columns are contiguous in the order below, so one splitter walks
    // every group's hot flows first and the pooled mass fills the remainder.
    let order: Vec<usize> = flows
        .iter()
        .flat_map(|(cols, _)| cols.iter().copied())
        .collect();
    let mut offset = 0;
    for (cols, vars) in &flows {
        let mut local = Splitter::new(cols.len());
        for (r, &v) in vars.iter().enumerate() {
            if v != usize::MAX {
                local.pour(val[v], |c, amount| x[r * m + cols[c]] += amount);
            }
        }
        for (c, res) in local.residual.iter().enumerate() {
            splitter.residual[offset + c] = *res;
        }
        offset += cols.len();
    }
    for (r, &v) in pool.iter().enumerate() {
        splitter.pour(val[v], |c, amount| x[r * m + order[c]] += amount);
    }
    for e in x.iter_mut() {
        let rounded = e.round();
        if (*e - rounded).abs() <= INTEGRAL_SNAP {
            *e = rounded;
        }
    }
    let (xs, ys) = x.split_at(l1 * m);
    let uv = &val[first_uv..first_uv + rows];
    let point = LiftedPoint::new(
        l1,
        l2,
        m,
        xs.to_vec(),
        ys.to_vec(),
        uv[..l1].to_vec(),
        uv[l1..].to_vec(),
    )?;
    Ok(LpOutcome {
        objective: lp.objective_at(&point, val[xi], val[mu]),
        xi: val[xi],
        mu: val[mu],
        point,
        pivots: sol.pivots,
        solved_variables: prog.num_variables(),
    })
}

/// Solves the full LP without aggregation.
pub fn solve_lp_direct(lp: &LpSubproblem) -> Result<LpOutcome> {
    let (l1, l2, m) = lp.dims();
    let prog = lp.to_linear_program();
    let sol = simplex::solve(&prog)?;
    let point = LiftedPoint::from_coordinates(l1, l2, m, &sol.values[..sol.values.len() - 2])?;
    let (xi, mu) = (
        sol.values[sol.values.len() - 2],
        sol.values[sol.values.len() - 1],
    );
    Ok(LpOutcome {
        objective: lp.objective_at(&point, xi, mu),
        xi,
        mu,
        point,
        pivots: sol.pivots,
        solved_variables: prog.num_variables(),
    })
}
