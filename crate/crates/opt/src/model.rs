use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Violation divided by the row's largest coefficient magnitude (at least 1).
    pub fn scaled_violation(&self, values: &[f64]) -> f64 {
        let scale = self.terms.iter().map(|(_, a)| a.abs()).fold(1.0_f64, f64::max);
        let act = self.activity(values);
        let raw = match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        };
        raw / scale
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("variable {name} has lower bound {lower} above upper bound {upper}")]
    InvertedBounds { name: String, lower: f64, upper: f64 },
    #[error("variable {name} has a non-finite cost")]
    BadCost { name: String },
    #[error("constraint {name} references undeclared variable {var}")]
    UnknownVariable { name: String, var: VarId },
    #[error("constraint {name} has a non-finite coefficient or right-hand side")]
    NonFinite { name: String },
    #[error("binary variable {name} has bounds outside [0, 1]")]
    BinaryBounds { name: String },
    #[error("relative gap must be non-negative, got {0}")]
    NegativeGap(f64),
}

/// Minimize `c·x + offset` subject to sparse linear rows and variable bounds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective_offset: f64,
}

impl LinearProgram {
    pub fn new(name: impl Into<String>) -> Self {
        LinearProgram {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            cost,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.variables[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn add_objective_constant(&mut self, value: f64) {
        self.objective_offset += value;
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(ModelError::InvertedBounds {
                    name: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            if !v.cost.is_finite() {
                return Err(ModelError::BadCost { name: v.name.clone() });
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFinite { name: c.name.clone() });
            }
            for &(var, a) in &c.terms {
                if var.0 >= self.variables.len() {
                    return Err(ModelError::UnknownVariable {
                        name: c.name.clone(),
                        var,
                    });
                }
                if !a.is_finite() {
                    return Err(ModelError::NonFinite { name: c.name.clone() });
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_offset
            + self
                .variables
                .iter()
                .zip(values)
                .map(|(v, x)| v.cost * x)
                .sum::<f64>()
    }

    /// Largest row-scaled constraint violation or absolute bound violation.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.scaled_violation(values))
            .fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}

/// A linear program in which some variables are restricted to {0, 1}.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MixedIntegerProgram {
    pub lp: LinearProgram,
    /// Sorted, deduplicated binary variable ids.
    pub binaries: Vec<VarId>,
}

impl MixedIntegerProgram {
    pub fn new(name: impl Into<String>) -> Self {
        MixedIntegerProgram {
            lp: LinearProgram::new(name),
            binaries: Vec::new(),
        }
    }

    pub fn from_lp(lp: LinearProgram) -> Self {
        MixedIntegerProgram {
            lp,
            binaries: Vec::new(),
        }
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        let id = self.lp.add_var(name, 0.0, 1.0, cost);
        self.binaries.push(id);
        id
    }

    pub fn mark_binary(&mut self, var: VarId) {
        if let Err(pos) = self.binaries.binary_search(&var) {
            self.binaries.insert(pos, var);
        }
    }

    pub fn is_binary(&self, var: VarId) -> bool {
        self.binaries.binary_search(&var).is_ok()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.lp.validate()?;
        for &b in &self.binaries {
            let v = &self.lp.variables[b.0];
            if v.lower < 0.0 || v.upper > 1.0 {
                return Err(ModelError::BinaryBounds { name: v.name.clone() });
            }
        }
        Ok(())
    }
}
