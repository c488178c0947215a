//! LP/MILP kernel.
//!
//! Everything above this module talks to the solver through [`SolverModel`],
//! [`solve_lp`] and [`solve_milp`]. The LP engine is a bounded-variable
//! simplex on a dense, row-scaled tableau; the MILP engine is a depth-first
//! branch-and-bound over binary variables with a solution pool.

mod dump;
mod milp;
mod simplex;

pub use dump::{read_model, write_model, DumpError};
pub use milp::{solve_milp, MilpOptions, MilpResult, MilpStatus, PoolSolution};
pub use simplex::{solve_lp, LpOptions, LpResult, LpStatus};

/// Row sense of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarType {
    Continuous,
    Binary,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
    pub var_type: VarType,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization problem `min c'x  s.t.  rows, lower <= x <= upper`.
#[derive(Debug, Clone, Default)]
pub struct SolverModel {
    pub name: String,
    pub vars: Vec<Variable>,
    pub cons: Vec<Constraint>,
    /// Constant added to the objective (reporting only).
    pub objective_offset: f64,
}

impl SolverModel {
    pub fn new(name: impl Into<String>) -> Self {
        SolverModel {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            cost,
            var_type: VarType::Continuous,
        });
        self.vars.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            cost,
            var_type: VarType::Binary,
        });
        self.vars.len() - 1
    }

    pub fn add_con(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.cons.push(Constraint {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
        self.cons.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_cons(&self) -> usize {
        self.cons.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.var_type == VarType::Binary)
            .map(|(j, _)| j)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset
            + self
                .vars
                .iter()
                .zip(x)
                .map(|(v, xi)| v.cost * xi)
                .sum::<f64>()
    }

    /// Activity `a_i' x` of every row.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.cons
            .iter()
            .map(|c| c.coeffs.iter().map(|&(j, a)| a * x[j]).sum())
            .collect()
    }

    /// Largest bound or row violation of `x` (absolute).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, &xi) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - xi).max(xi - v.upper);
        }
        for (c, act) in self.cons.iter().zip(self.row_activity(x)) {
            let viol = match c.sense {
                Sense::Le => act - c.rhs,
                Sense::Ge => c.rhs - act,
                Sense::Eq => (act - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), String> {
        for (j, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || !v.cost.is_finite() {
                return Err(format!("variable {} ({}) has invalid data", j, v.name));
            }
            if v.lower > v.upper {
                return Err(format!(
                    "variable {} ({}) has lower {} > upper {}",
                    j, v.name, v.lower, v.upper
                ));
            }
        }
        for (i, c) in self.cons.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(format!("row {} ({}) has non-finite rhs", i, c.name));
            }
            for &(j, a) in &c.coeffs {
                if j >= self.vars.len() || !a.is_finite() {
                    return Err(format!("row {} ({}) references bad column {}", i, c.name, j));
                }
            }
        }
        Ok(())
    }
}
