//! Solver-agnostic conic programs.
//!
//! A [`ConicProgram`] is a linear objective over real scalar variables plus
//! an ordered list of constraints `A x + b in K`, where `K` is one of the
//! cones in [`Cone`]. Complex quantities are split into real and imaginary
//! parts by the callers (see [`embed`]) before they reach this layer.

mod clarabel_backend;
pub mod embed;

use serde::{Deserialize, Serialize};

pub use clarabel_backend::ClarabelBackend;
pub use embed::{embed_hermitian, quadratic_epigraph, rate_log_constraint, HermitianEmbedding, HermitianVars};

use crate::error::{invalid, Result};

/// Default feasibility and duality-gap tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cone {
    /// `s = 0`.
    Zero(usize),
    /// `s >= 0` componentwise.
    Nonnegative(usize),
    /// `(t, x)` with `||x|| <= t`; the argument is the total dimension.
    SecondOrder(usize),
    /// `(x, y, z)` with `y exp(x / y) <= z`, `y > 0`.
    Exponential,
    /// Symmetric PSD matrix of the given order, entries listed as the upper
    /// triangle in column-major order: `(0,0), (0,1), (1,1), (0,2), ...`.
    Psd(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::Nonnegative(d) | Cone::SecondOrder(d) => d,
            Cone::Exponential => 3,
            Cone::Psd(n) => n * (n + 1) / 2,
        }
    }
}

/// Sparse affine expression `sum_i c_i x_i + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(i: usize) -> Self {
        Self::term(i, 1.0)
    }

    pub fn term(i: usize, c: f64) -> Self {
        Self { terms: vec![(i, c)], constant: 0.0 }
    }

    pub fn add_term(&mut self, i: usize, c: f64) -> &mut Self {
        if c != 0.0 {
            self.terms.push((i, c));
        }
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn add_scaled(&mut self, other: &LinExpr, s: f64) -> &mut Self {
        if s != 0.0 {
            self.terms.extend(other.terms.iter().map(|&(i, c)| (i, c * s)));
            self.constant += other.constant * s;
        }
        self
    }

    pub fn plus(mut self, other: &LinExpr) -> Self {
        self.add_scaled(other, 1.0);
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.terms.iter_mut().for_each(|t| t.1 *= s);
        self.constant *= s;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }
}

/// `rows` (one affine expression per cone coordinate) must lie in `cone`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeConstraint {
    pub rows: Vec<LinExpr>,
    pub cone: Cone,
}

impl ConeConstraint {
    pub fn new(cone: Cone, rows: Vec<LinExpr>) -> Self {
        Self { rows, cone }
    }

    /// Smallest signed distance of the affine image from the cone boundary,
    /// negative when violated. Used for independent feasibility checks.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let s: Vec<f64> = self.rows.iter().map(|r| r.eval(x)).collect();
        match self.cone {
            Cone::Zero(_) => -s.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            Cone::Nonnegative(_) => s.iter().copied().fold(f64::INFINITY, f64::min),
            Cone::SecondOrder(_) => s[0] - s[1..].iter().map(|v| v * v).sum::<f64>().sqrt(),
            Cone::Exponential => {
                let (a, b, c) = (s[0], s[1], s[2]);
                if b > 0.0 {
                    c - b * (a / b).exp()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Cone::Psd(n) => {
                let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
                let mut idx = 0;
                for j in 0..n {
                    for i in 0..=j {
                        m[(i, j)] = s[idx];
                        m[(j, i)] = s[idx];
                        idx += 1;
                    }
                }
                m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub sense: Sense,
    pub constraints: Vec<ConeConstraint>,
}

impl ConicProgram {
    pub fn new(n_vars: usize, sense: Sense) -> Self {
        Self { n_vars, objective: vec![0.0; n_vars], objective_constant: 0.0, sense, constraints: Vec::new() }
    }

    /// Allocate `count` fresh variables, returning the index of the first.
    pub fn add_vars(&mut self, count: usize) -> usize {
        let first = self.n_vars;
        self.n_vars += count;
        self.objective.resize(self.n_vars, 0.0);
        first
    }

    pub fn set_objective(&mut self, expr: &LinExpr) {
        self.objective.iter_mut().for_each(|c| *c = 0.0);
        for &(i, c) in &expr.terms {
            self.objective[i] += c;
        }
        self.objective_constant = expr.constant;
    }

    pub fn add(&mut self, cone: Cone, rows: Vec<LinExpr>) {
        self.constraints.push(ConeConstraint::new(cone, rows));
    }

    pub fn push(&mut self, c: ConeConstraint) {
        self.constraints.push(c);
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.objective_constant
    }

    pub fn count_rows(&self, pred: impl Fn(&Cone) -> bool) -> usize {
        self.constraints.iter().filter(|c| pred(&c.cone)).map(|c| c.rows.len()).sum()
    }

    /// Worst cone residual over all constraints at `x`.
    pub fn min_residual(&self, x: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.residual(x)).fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.n_vars {
            return invalid("objective length differs from the variable count");
        }
        for (idx, c) in self.constraints.iter().enumerate() {
            if c.rows.len() != c.cone.dim() {
                return invalid(format!("constraint {idx} has {} rows for a cone of dimension {}", c.rows.len(), c.cone.dim()));
            }
            match c.cone {
                Cone::Psd(0) | Cone::SecondOrder(0) => return invalid(format!("constraint {idx} has an empty cone")),
                _ => {}
            }
            if c.rows.iter().flat_map(|r| &r.terms).any(|&(i, v)| i >= self.n_vars || !v.is_finite())
                || c.rows.iter().any(|r| !r.constant.is_finite())
            {
                return invalid(format!("constraint {idx} references an unknown variable or a non-finite coefficient"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// The backend stopped at reduced accuracy; the point may still be usable
    /// after an independent check.
    Inaccurate,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
}

impl ConicSolution {
    pub fn is_usable(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::Inaccurate)
    }
}

/// Anything that can solve a [`ConicProgram`].
pub trait ConicBackend: Send + Sync {
    fn solve(&self, program: &ConicProgram, tol: f64) -> Result<ConicSolution>;
}

/// Solve with the default backend.
pub fn solve(program: &ConicProgram, tol: f64) -> Result<ConicSolution> {
    ClarabelBackend::default().solve(program, tol)
}
