use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::{Cone, ConicBackend, ConicProgram, ConicSolution, Sense, SolveStatus};
use crate::error::{Error, Result};

/// Interior-point backend built on Clarabel.
#[derive(Debug, Clone)]
pub struct ClarabelBackend {
    pub max_iter: u32,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self { max_iter: 200 }
    }
}

fn map_status(status: SolverStatus) -> SolveStatus {
    match status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::AlmostSolved | SolverStatus::MaxIterations | SolverStatus::MaxTime | SolverStatus::InsufficientProgress => {
            SolveStatus::Inaccurate
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        _ => SolveStatus::Failed,
    }
}

impl ConicBackend for ClarabelBackend {
    fn solve(&self, program: &ConicProgram, tol: f64) -> Result<ConicSolution> {
        program.validate()?;
        let n = program.n_vars;
        let sign = match program.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let q: Vec<f64> = program.objective.iter().map(|c| sign * c).collect();

        // Clarabel wants s = b - A x; ours is s = A x + b.
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::with_capacity(program.constraints.len());
        let mut row = 0;
        for c in &program.constraints {
            let off_diag = |local: usize| -> bool {
                match c.cone {
                    Cone::Psd(_) => {
                        // Column j of the upper triangle covers local indices
                        // j(j+1)/2 ..= j(j+1)/2 + j; the last one is diagonal.
                        let mut j = 0;
                        while (j + 1) * (j + 2) / 2 <= local {
                            j += 1;
                        }
                        local != j * (j + 1) / 2 + j
                    }
                    _ => false,
                }
            };
            for (local, expr) in c.rows.iter().enumerate() {
                let scale = if off_diag(local) { std::f64::consts::SQRT_2 } else { 1.0 };
                for &(var, coef) in &expr.terms {
                    triplets.push((row, var, -coef * scale));
                }
                b.push(expr.constant * scale);
                row += 1;
            }
            cones.push(match c.cone {
                Cone::Zero(d) => SupportedConeT::ZeroConeT(d),
                Cone::Nonnegative(d) => SupportedConeT::NonnegativeConeT(d),
                Cone::SecondOrder(d) => SupportedConeT::SecondOrderConeT(d),
                Cone::Exponential => SupportedConeT::ExponentialConeT(),
                Cone::Psd(k) => SupportedConeT::PSDTriangleConeT(k),
            });
        }
        let a = csc_from_triplets(row, n, triplets);
        let p = CscMatrix::<f64>::zeros((n, n));

        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .tol_feas(tol)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .build()
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).map_err(|e| Error::Solver(format!("{e:?}")))?;
        solver.solve();
        let status = map_status(solver.solution.status);
        let x = solver.solution.x.clone();
        let objective = program.objective_value(&x);
        Ok(ConicSolution { status, x, objective, iterations: solver.solution.iterations })
    }
}

/// Column-compressed matrix from (row, col, value) triplets; duplicates are summed.
fn csc_from_triplets(m: usize, n: usize, mut t: Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    t.sort_by_key(|a| (a.1, a.0));
    let mut colptr = vec![0usize; n + 1];
    let mut rowval = Vec::with_capacity(t.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(t.len());
    let mut last: Option<(usize, usize)> = None;
    for (r, c, v) in t {
        if last == Some((r, c)) {
            *nzval.last_mut().unwrap() += v;
            continue;
        }
        rowval.push(r);
        nzval.push(v);
        colptr[c + 1] += 1;
        last = Some((r, c));
    }
    for j in 0..n {
        colptr[j + 1] += colptr[j];
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}
