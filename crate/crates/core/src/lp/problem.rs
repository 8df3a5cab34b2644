use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// `min c'x` subject to linear rows and per-variable bounds.
///
/// Every variable needs at least one finite bound.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub(crate) names: Vec<String>,
    pub(crate) cost: Vec<f64>,
    pub(crate) lower: Vec<f64>,
    pub(crate) upper: Vec<f64>,
    pub(crate) rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        cost: f64,
        lower: f64,
        upper: f64,
    ) -> usize {
        self.names.push(name.into());
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.len() - 1
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        kind: RowKind,
        rhs: f64,
    ) {
        self.rows.push(Row {
            name: name.into(),
            coeffs,
            kind,
            rhs,
        });
    }

    pub fn num_variables(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    /// Rows as `(coefficients, kind, rhs)`.
    pub fn rows(&self) -> impl Iterator<Item = (&[(usize, f64)], RowKind, f64)> {
        self.rows
            .iter()
            .map(|r| (r.coeffs.as_slice(), r.kind, r.rhs))
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of a row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, (&lo, &hi)) in x.iter().zip(self.lower.iter().zip(&self.upper)) {
            worst = worst.max(lo - v).max(v - hi);
        }
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let gap = match row.kind {
                RowKind::Le => lhs - row.rhs,
                RowKind::Ge => row.rhs - lhs,
                RowKind::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(gap);
        }
        worst
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || (lo.is_infinite() && hi.is_infinite()) {
                return Err(Error::InvalidParameter(format!(
                    "variable {} has bounds [{lo}, {hi}]",
                    self.names[j]
                )));
            }
        }
        for row in &self.rows {
            if row
                .coeffs
                .iter()
                .any(|&(j, a)| j >= self.cost.len() || !a.is_finite())
                || !row.rhs.is_finite()
            {
                return Err(Error::InvalidParameter(format!(
                    "row {} is malformed",
                    row.name
                )));
            }
        }
        if self.cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite objective coefficient".into(),
            ));
        }
        Ok(())
    }

    /// Text in CPLEX LP format, rows and columns in insertion order.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::from("\\ rekey subproblem\nMinimize\n obj:");
        write_terms(&mut out, self.cost.iter().copied().enumerate(), &self.names);
        out.push_str("\nSubject To\n");
        for row in &self.rows {
            let _ = write!(out, " {}:", row.name);
            write_terms(&mut out, row.coeffs.iter().copied(), &self.names);
            let op = match row.kind {
                RowKind::Le => "<=",
                RowKind::Ge => ">=",
                RowKind::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", fmt_num(row.rhs));
        }
        out.push_str("Bounds\n");
        for (j, name) in self.names.iter().enumerate() {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            let lo = if lo.is_infinite() {
                "-inf".to_string()
            } else {
                fmt_num(lo)
            };
            let hi = if hi.is_infinite() {
                "+inf".to_string()
            } else {
                fmt_num(hi)
            };
            let _ = writeln!(out, " {lo} <= {name} <= {hi}");
        }
        out.push_str("End\n");
        out
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (usize, f64)>, names: &[String]) {
    let mut any = false;
    for (j, a) in terms {
        if a == 0.0 {
            continue;
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", fmt_num(a.abs()), names[j]);
        any = true;
    }
    if !any {
        out.push_str(" 0");
    }
}
