//! Two-phase primal simplex on a dense tableau with bounded variables.
//!
//! Rows get a slack (`<=` / `>=`) or an artificial (`=`, or a slack that
//! cannot absorb the initial residual). Artificial columns are never stored:
//! once one leaves the basis it is gone for good. Pricing is Dantzig's rule,
//! switching to Bland's rule after a run of degenerate pivots; every tie is
//! broken by index, so identical input gives identical output.

use super::problem::{LinearProgram, RowKind};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const SNAP_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows x cols`, row-major: `B^-1 [A | S]`.
    t: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<State>,
    /// Value of each column when nonbasic.
    value: Vec<f64>,
    /// Basic column per row; `None` is that row's artificial.
    head: Vec<Option<usize>>,
    xb: Vec<f64>,
    /// Upper bound of artificials: infinite in phase one, zero afterwards.
    art_upper: f64,
    pivots: usize,
}

impl Tableau {
    fn basic_bounds(&self, row: usize) -> (f64, f64) {
        match self.head[row] {
            Some(j) => (self.lower[j], self.upper[j]),
            None => (0.0, self.art_upper),
        }
    }

    fn reduced_costs(&self, cost: &[f64], art_cost: f64) -> Vec<f64> {
        let mut d = cost.to_vec();
        for i in 0..self.rows {
            let cb = match self.head[i] {
                Some(j) => cost[j],
                None => art_cost,
            };
            if cb != 0.0 {
                let row = &self.t[i * self.cols..(i + 1) * self.cols];
                for (dj, a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        for i in 0..self.rows {
            if let Some(j) = self.head[i] {
                d[j] = 0.0;
            }
        }
        d
    }

    fn choose_entering(&self, d: &[f64], bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols {
            let dir = match self.state[j] {
                State::Basic => continue,
                State::Lower if d[j] < -COST_TOL && self.upper[j] > self.lower[j] => 1.0,
                State::Upper if d[j] > COST_TOL && self.upper[j] > self.lower[j] => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(b, _)| d[j].abs() > d[b].abs()) {
                best = Some((j, dir));
            }
        }
        best
    }

    /// Runs the simplex on `cost`; returns `Err(LpUnbounded)` on an unbounded ray.
    fn optimize(&mut self, cost: &[f64], art_cost: f64, limit: usize) -> Result<()> {
        let mut d = self.reduced_costs(cost, art_cost);
        let mut degenerate = 0;
        let mut steps = 0;
        loop {
            let bland = degenerate >= DEGENERATE_RUN;
            let Some((q, dir)) = self.choose_entering(&d, bland) else {
                return Ok(());
            };
            steps += 1;
            if steps > limit {
                return Err(Error::LpIterationLimit);
            }

            let range = self.upper[q] - self.lower[q];
            let mut theta = f64::INFINITY;
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let g = dir * self.t[i * self.cols + q];
                if g.abs() <= PIVOT_TOL {
                    continue;
                }
                let (lo, hi) = self.basic_bounds(i);
                let limit = if g > 0.0 {
                    (self.xb[i] - lo) / g
                } else {
                    (hi - self.xb[i]) / -g
                };
                if limit.is_nan() || limit == f64::INFINITY {
                    continue;
                }
                let limit = limit.max(0.0);
                let better = match leave {
                    None => true,
                    Some(_) if limit < theta - 1e-12 => true,
                    Some(_) if limit > theta + 1e-12 => false,
                    Some((p, gp)) => {
                        if bland {
                            self.head_key(i) < self.head_key(p)
                        } else {
                            g.abs() > gp.abs()
                        }
                    }
                };
                if better {
                    theta = theta.min(limit);
                    leave = Some((i, g));
                }
            }
            // A bound flip wins ties with a row so the basis changes less often.
            let flip = range <= theta + 1e-12;
            if flip {
                theta = range;
            }
            if theta.is_infinite() {
                return Err(Error::LpUnbounded);
            }
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            for i in 0..self.rows {
                let a = self.t[i * self.cols + q];
                if a != 0.0 {
                    self.xb[i] -= dir * theta * a;
                }
            }
            let entering_value = self.value[q] + dir * theta;

            if flip {
                self.state[q] = if dir > 0.0 {
                    State::Upper
                } else {
                    State::Lower
                };
                self.value[q] = if dir > 0.0 {
                    self.upper[q]
                } else {
                    self.lower[q]
                };
                continue;
            }
            let (p, g) = leave.expect("no flip implies a leaving row");
            if let Some(old) = self.head[p] {
                if g > 0.0 {
                    self.state[old] = State::Lower;
                    self.value[old] = self.lower[old];
                } else {
                    self.state[old] = State::Upper;
                    self.value[old] = self.upper[old];
                }
            }
            self.pivot(p, q, &mut d);
            self.state[q] = State::Basic;
            self.head[p] = Some(q);
            self.xb[p] = entering_value;
        }
    }

    fn head_key(&self, row: usize) -> usize {
        // artificials sort after every real column
        self.head[row].unwrap_or(self.cols + row)
    }

    fn pivot(&mut self, p: usize, q: usize, d: &mut [f64]) {
        self.pivots += 1;
        let cols = self.cols;
        let piv = self.t[p * cols + q];
        {
            let row = &mut self.t[p * cols..(p + 1) * cols];
            for a in row.iter_mut() {
                *a /= piv;
            }
            row[q] = 1.0;
        }
        let (before, rest) = self.t.split_at_mut(p * cols);
        let (prow, after) = rest.split_at_mut(cols);
        let eliminate = |row: &mut [f64]| {
            let f = row[q];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
                row[q] = 0.0;
            }
        };
        before.chunks_exact_mut(cols).for_each(eliminate);
        after.chunks_exact_mut(cols).for_each(eliminate);
        let f = d[q];
        if f != 0.0 {
            for (a, b) in d.iter_mut().zip(prow.iter()) {
                *a -= f * b;
            }
            d[q] = 0.0;
        }
    }
}

/// Solves `lp` to optimality and returns a basic optimal solution.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_variables();
    let m = lp.num_rows();
    let slack_of: Vec<Option<usize>> = {
        let mut next = n;
        lp.rows
            .iter()
            .map(|r| {
                (r.kind != RowKind::Eq).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    let cols = n + slack_of.iter().flatten().count();

    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    lower.resize(cols, 0.0);
    upper.resize(cols, f64::INFINITY);
    let value: Vec<f64> = (0..cols)
        .map(|j| {
            if lower[j].is_finite() {
                lower[j]
            } else {
                upper[j]
            }
        })
        .collect();
    let mut state: Vec<State> = value
        .iter()
        .zip(&lower)
        .map(|(v, lo)| if v == lo { State::Lower } else { State::Upper })
        .collect();

    let mut t = vec![0.0; m * cols];
    let mut head = vec![None; m];
    let mut xb = vec![0.0; m];
    for (i, row) in lp.rows.iter().enumerate() {
        let line = &mut t[i * cols..(i + 1) * cols];
        let mut residual = row.rhs;
        for &(j, a) in &row.coeffs {
            line[j] += a;
            residual -= a * value[j];
        }
        let slack_sign = match row.kind {
            RowKind::Le => 1.0,
            RowKind::Ge => -1.0,
            RowKind::Eq => 0.0,
        };
        if let Some(s) = slack_of[i] {
            line[s] = slack_sign;
        }
        let slack_fits = slack_of[i].is_some() && slack_sign * residual >= 0.0;
        let scale = if slack_fits {
            slack_sign
        } else if residual < 0.0 {
            -1.0
        } else {
            1.0
        };
        if scale != 1.0 {
            line.iter_mut().for_each(|a| *a *= scale);
        }
        xb[i] = residual * scale;
        if slack_fits {
            let s = slack_of[i].expect("slack exists");
            head[i] = Some(s);
            state[s] = State::Basic;
        }
    }

    let mut tab = Tableau {
        rows: m,
        cols,
        t,
        lower,
        upper,
        state,
        value,
        head,
        xb,
        art_upper: f64::INFINITY,
        pivots: 0,
    };
    let limit = 50 * (m + cols) + 1000;

    if tab.head.iter().any(Option::is_none) {
        let zero = vec![0.0; cols];
        tab.optimize(&zero, 1.0, limit)?;
        let infeasibility: f64 = (0..m)
            .filter(|&i| tab.head[i].is_none())
            .map(|i| tab.xb[i])
            .sum();
        let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        if infeasibility > FEAS_TOL * scale {
            return Err(Error::LpInfeasible);
        }
    }
    tab.art_upper = 0.0;

    let mut cost = lp.cost.clone();
    cost.resize(cols, 0.0);
    tab.optimize(&cost, 0.0, limit)?;

    let mut values: Vec<f64> = tab.value[..n].to_vec();
    for i in 0..m {
        if let Some(j) = tab.head[i] {
            if j < n {
                values[j] = tab.xb[i];
            }
        }
    }
    for (j, v) in values.iter_mut().enumerate() {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if (*v - lo).abs() <= SNAP_TOL {
            *v = lo;
        } else if (*v - hi).abs() <= SNAP_TOL {
            *v = hi;
        }
    }
    Ok(LpSolution {
        objective: lp.objective_value(&values),
        values,
        pivots: tab.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn textbook_maximization() {
        // max 3a + 5b, a <= 4, 2b <= 12, 3a + 2b <= 18  ->  36 at (2, 6)
        let mut lp = LinearProgram::new();
        let a = lp.add_variable("a", -3.0, 0.0, f64::INFINITY);
        let b = lp.add_variable("b", -5.0, 0.0, f64::INFINITY);
        lp.add_row("r1", vec![(a, 1.0)], RowKind::Le, 4.0);
        lp.add_row("r2", vec![(b, 2.0)], RowKind::Le, 12.0);
        lp.add_row("r3", vec![(a, 3.0), (b, 2.0)], RowKind::Le, 18.0);
        let sol = solve(&lp).unwrap();
        assert!(close(sol.objective, -36.0));
        assert!(close(sol.values[0], 2.0) && close(sol.values[1], 6.0));
    }

    #[test]
    fn equality_and_ge_rows_need_phase_one() {
        // min a + 2b + 3c, a + b + c = 1, b + c >= 0.5, c in [0, 1]
        let mut lp = LinearProgram::new();
        let a = lp.add_variable("a", 1.0, 0.0, 1.0);
        let b = lp.add_variable("b", 2.0, 0.0, 1.0);
        let c = lp.add_variable("c", 3.0, 0.0, 1.0);
        lp.add_row("sum", vec![(a, 1.0), (b, 1.0), (c, 1.0)], RowKind::Eq, 1.0);
        lp.add_row("cover", vec![(b, 1.0), (c, 1.0)], RowKind::Ge, 0.5);
        let sol = solve(&lp).unwrap();
        assert!(close(sol.objective, 1.5));
        assert!(lp.max_violation(&sol.values) < 1e-9);
    }

    #[test]
    fn upper_bounded_variable_starts_at_its_upper_bound() {
        // min z, z >= -3, z <= 10 with z only bounded above
        let mut lp = LinearProgram::new();
        let z = lp.add_variable("z", 1.0, f64::NEG_INFINITY, 10.0);
        lp.add_row("floor", vec![(z, 1.0)], RowKind::Ge, -3.0);
        let sol = solve(&lp).unwrap();
        assert!(close(sol.values[0], -3.0));
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new();
        let a = lp.add_variable("a", 1.0, 0.0, 1.0);
        lp.add_row("r", vec![(a, 1.0)], RowKind::Ge, 2.0);
        assert_eq!(solve(&lp), Err(Error::LpInfeasible));

        let mut lp = LinearProgram::new();
        let a = lp.add_variable("a", -1.0, 0.0, f64::INFINITY);
        lp.add_row("r", vec![(a, -1.0)], RowKind::Le, 0.0);
        assert_eq!(solve(&lp), Err(Error::LpUnbounded));
    }

    #[test]
    fn bound_flips_without_rows() {
        let mut lp = LinearProgram::new();
        lp.add_variable("a", -1.0, 0.0, 1.0);
        lp.add_variable("b", 1.0, 0.0, 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.values, vec![1.0, 0.0]);
        assert_eq!(sol.pivots, 0);
    }

    #[test]
    fn identical_input_gives_identical_output() {
        let mut lp = LinearProgram::new();
        let vars: Vec<usize> = (0..6)
            .map(|j| lp.add_variable(format!("v{j}"), -1.0, 0.0, 1.0))
            .collect();
        lp.add_row(
            "cap",
            vars.iter().map(|&v| (v, 1.0)).collect(),
            RowKind::Le,
            2.5,
        );
        let first = solve(&lp).unwrap();
        assert!(close(first.objective, -2.5));
        assert_eq!(first, solve(&lp).unwrap());
    }
}
