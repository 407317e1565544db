use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Handle to a variable of a [`LinearModel`]. Handles are dense indices in
/// insertion order and stay valid for the lifetime of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(usize);

impl VarId {
    pub(crate) fn from_index(i: usize) -> Self {
        Self(i)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintId(usize);

impl ConstraintId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrality {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintSense {
    Le,
    Eq,
    Ge,
}

impl ConstraintSense {
    fn symbol(self) -> &'static str {
        match self {
            ConstraintSense::Le => "<=",
            ConstraintSense::Eq => "=",
            ConstraintSense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ObjectiveSense {
    #[default]
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integrality: Integrality,
}

impl Variable {
    pub fn is_binary(&self) -> bool {
        self.integrality == Integrality::Binary
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Sparse row, sorted by variable index, no duplicate indices.
    pub row: Vec<(VarId, f64)>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.row.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violate this constraint (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            ConstraintSense::Le => (lhs - self.rhs).max(0.0),
            ConstraintSense::Ge => (self.rhs - lhs).max(0.0),
            ConstraintSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Objective {
    pub sense: ObjectiveSense,
    pub row: Vec<(VarId, f64)>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variable `{name}`: invalid bounds [{lower}, {upper}]")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("variable `{name}`: binary variables need bounds within [0, 1], got [{lower}, {upper}]")]
    BinaryBounds { name: String, lower: f64, upper: f64 },
    #[error("unknown variable index {index} (model has {count} variables)")]
    UnknownVariable { index: usize, count: usize },
    #[error("non-finite coefficient {value} on variable index {index}")]
    NonFiniteCoefficient { index: usize, value: f64 },
    #[error("non-finite right-hand side {0}")]
    NonFiniteRhs(f64),
}

/// Worst constraint and bound violations of a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Violation {
    pub constraint: f64,
    pub bound: f64,
    pub integrality: f64,
}

/// A sparse linear (or mixed-binary) program.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearModel {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Objective,
}

impl LinearModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        integrality: Integrality,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        check_bounds(&name, lower, upper, integrality)?;
        self.variables.push(Variable {
            name,
            lower,
            upper,
            integrality,
        });
        Ok(VarId(self.variables.len() - 1))
    }

    /// Adds `sum(row) sense rhs`. Repeated variables in `row` are summed.
    pub fn add_constraint(
        &mut self,
        row: impl IntoIterator<Item = (VarId, f64)>,
        sense: ConstraintSense,
        rhs: f64,
    ) -> Result<ConstraintId, ModelError> {
        if !rhs.is_finite() {
            return Err(ModelError::NonFiniteRhs(rhs));
        }
        let row = self.normalize_row(row)?;
        self.constraints.push(Constraint { row, sense, rhs });
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    pub fn set_objective(
        &mut self,
        sense: ObjectiveSense,
        row: impl IntoIterator<Item = (VarId, f64)>,
    ) -> Result<(), ModelError> {
        let row = self.normalize_row(row)?;
        self.objective = Objective { sense, row };
        Ok(())
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) -> Result<(), ModelError> {
        let count = self.variables.len();
        let v = self
            .variables
            .get_mut(var.0)
            .ok_or(ModelError::UnknownVariable { index: var.0, count })?;
        check_bounds(&v.name, lower, upper, v.integrality)?;
        v.lower = lower;
        v.upper = upper;
        Ok(())
    }

    fn normalize_row(
        &self,
        row: impl IntoIterator<Item = (VarId, f64)>,
    ) -> Result<Vec<(VarId, f64)>, ModelError> {
        let mut out: Vec<(VarId, f64)> = Vec::new();
        for (v, a) in row {
            if v.0 >= self.variables.len() {
                return Err(ModelError::UnknownVariable {
                    index: v.0,
                    count: self.variables.len(),
                });
            }
            if !a.is_finite() {
                return Err(ModelError::NonFiniteCoefficient { index: v.0, value: a });
            }
            out.push((v, a));
        }
        out.sort_by_key(|&(v, _)| v);
        out.dedup_by(|next, kept| {
            if next.0 == kept.0 {
                kept.1 += next.1;
                true
            } else {
                false
            }
        });
        out.retain(|&(_, a)| a != 0.0);
        Ok(out)
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, var: VarId) -> &Variable {
        &self.variables[var.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn has_integers(&self) -> bool {
        self.variables.iter().any(Variable::is_binary)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.row.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    pub fn violation(&self, values: &[f64]) -> Violation {
        let mut out = Violation::default();
        for c in &self.constraints {
            out.constraint = out.constraint.max(c.violation(values));
        }
        for (v, &x) in self.variables.iter().zip(values) {
            out.bound = out.bound.max(v.lower - x).max(x - v.upper);
            if v.is_binary() {
                out.integrality = out.integrality.max((x - x.round()).abs());
            }
        }
        out
    }

    /// Writes a plain-text LP-style listing of the model.
    pub fn write_lp<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "\\ railyard-lp v1")?;
        let sense = match self.objective.sense {
            ObjectiveSense::Minimize => "minimize",
            ObjectiveSense::Maximize => "maximize",
        };
        writeln!(w, "{sense}")?;
        writeln!(w, "  obj: {}", self.format_row(&self.objective.row))?;
        writeln!(w, "subject to")?;
        for (i, c) in self.constraints.iter().enumerate() {
            writeln!(
                w,
                "  c{i}: {} {} {}",
                self.format_row(&c.row),
                c.sense.symbol(),
                c.rhs
            )?;
        }
        writeln!(w, "bounds")?;
        for v in &self.variables {
            writeln!(w, "  {} <= {} <= {}", v.lower, v.name, v.upper)?;
        }
        let binaries: Vec<&str> = self
            .variables
            .iter()
            .filter(|v| v.is_binary())
            .map(|v| v.name.as_str())
            .collect();
        if !binaries.is_empty() {
            writeln!(w, "binary")?;
            for chunk in binaries.chunks(8) {
                writeln!(w, "  {}", chunk.join(" "))?;
            }
        }
        writeln!(w, "end")
    }

    fn format_row(&self, row: &[(VarId, f64)]) -> String {
        if row.is_empty() {
            return "0".to_string();
        }
        let mut s = String::new();
        for (k, &(v, a)) in row.iter().enumerate() {
            let name = &self.variables[v.0].name;
            if k == 0 {
                s.push_str(&format!("{a} {name}"));
            } else if a < 0.0 {
                s.push_str(&format!(" - {} {name}", -a));
            } else {
                s.push_str(&format!(" + {a} {name}"));
            }
        }
        s
    }
}

impl fmt::Display for LinearModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        self.write_lp(&mut buf).map_err(|_| fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&buf))
    }
}

fn check_bounds(
    name: &str,
    lower: f64,
    upper: f64,
    integrality: Integrality,
) -> Result<(), ModelError> {
    if !lower.is_finite() || upper.is_nan() || lower > upper || upper == f64::NEG_INFINITY {
        return Err(ModelError::InvalidBounds {
            name: name.to_string(),
            lower,
            upper,
        });
    }
    if integrality == Integrality::Binary && (lower < 0.0 || upper > 1.0) {
        return Err(ModelError::BinaryBounds {
            name: name.to_string(),
            lower,
            upper,
        });
    }
    Ok(())
}
