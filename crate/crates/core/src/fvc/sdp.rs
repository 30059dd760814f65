//! Semidefinite-programming backend interface.
//!
//! Problems are expressed as `minimize c^T x` subject to a list of affine
//! symmetric blocks `F0 + sum_k x_k F_k` being positive semidefinite.
//! Blocks cross the solver boundary in svec form (upper triangle,
//! column-major, off-diagonal entries scaled by sqrt(2)), which preserves
//! inner products. The default backend is Clarabel's interior-point solver.

use super::{Result, SynthError};
use nalgebra::DMatrix;
use std::collections::BTreeMap;

/// Upper-triangle entries `(row, col, value)` with `row <= col` of a
/// symmetric matrix.
pub type SymEntries = Vec<(usize, usize, f64)>;

#[derive(Debug, Clone)]
pub struct SdpBlock {
    pub dim: usize,
    pub f0: SymEntries,
    /// Per-variable coefficient matrices, sparse, variable-sorted.
    pub terms: Vec<(usize, SymEntries)>,
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub blocks: Vec<SdpBlock>,
}

#[derive(Debug, Clone)]
pub struct SdpSettings {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
    /// Symmetric diagonal equilibration of each block before solving.
    pub equilibrate: bool,
}

impl Default for SdpSettings {
    fn default() -> Self {
        SdpSettings {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
            verbose: false,
            equilibrate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure(String),
}

#[derive(Debug, Clone)]
pub struct SdpOutcome {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
    pub solve_time_s: f64,
}

pub trait SdpBackend {
    fn solve(&self, problem: &SdpProblem, settings: &SdpSettings) -> Result<SdpOutcome>;
}

/// svec index of upper-triangle entry `(i, j)`, `i <= j`, column-major.
pub fn svec_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

pub fn svec_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Scaled vectorization of a symmetric matrix.
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = vec![0.0; svec_len(n)];
    let s2 = 2f64.sqrt();
    for j in 0..n {
        for i in 0..=j {
            out[svec_index(i, j)] = if i == j { m[(i, j)] } else { s2 * m[(i, j)] };
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    let s2 = 2f64.sqrt();
    for j in 0..dim {
        for i in 0..=j {
            let val = v[svec_index(i, j)];
            if i == j {
                m[(i, j)] = val;
            } else {
                m[(i, j)] = val / s2;
                m[(j, i)] = val / s2;
            }
        }
    }
    m
}

/// Per-block symmetric diagonal scaling `D M D`, derived from the largest
/// absolute row entry across the constant and coefficient matrices.
fn equilibration_scale(block: &SdpBlock) -> Vec<f64> {
    let mut rowmax = vec![0.0f64; block.dim];
    let mut absorb = |entries: &SymEntries| {
        for &(i, j, v) in entries {
            let a = v.abs();
            if a > rowmax[i] {
                rowmax[i] = a;
            }
            if a > rowmax[j] {
                rowmax[j] = a;
            }
        }
    };
    absorb(&block.f0);
    for (_, t) in &block.terms {
        absorb(t);
    }
    rowmax
        .iter()
        .map(|&r| 1.0 / r.clamp(1e-8, 1e8).sqrt())
        .collect()
}

/// Interior-point backend built on Clarabel with PSD triangle cones.
#[derive(Debug, Default, Clone)]
pub struct ClarabelBackend;

impl SdpBackend for ClarabelBackend {
    fn solve(&self, problem: &SdpProblem, settings: &SdpSettings) -> Result<SdpOutcome> {
        use clarabel::algebra::CscMatrix;
        use clarabel::solver::{
            DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
        };

        let n = problem.n_vars;
        let total_rows: usize = problem.blocks.iter().map(|b| svec_len(b.dim)).sum();
        let mut b_vec = vec![0.0f64; total_rows];
        // (col, row) -> accumulated coefficient of -F_k.
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let s2 = 2f64.sqrt();
        let mut row0 = 0usize;
        let mut cones = Vec::with_capacity(problem.blocks.len());
        for block in &problem.blocks {
            let d = if settings.equilibrate {
                equilibration_scale(block)
            } else {
                vec![1.0; block.dim]
            };
            for &(i, j, v) in &block.f0 {
                let scaled = v * d[i] * d[j];
                b_vec[row0 + svec_index(i, j)] += if i == j { scaled } else { s2 * scaled };
            }
            for (var, entries) in &block.terms {
                for &(i, j, v) in entries {
                    let scaled = v * d[i] * d[j];
                    let coeff = if i == j { scaled } else { s2 * scaled };
                    *acc.entry((*var, row0 + svec_index(i, j))).or_insert(0.0) -= coeff;
                }
            }
            cones.push(SupportedConeT::PSDTriangleConeT(block.dim));
            row0 += svec_len(block.dim);
        }

        // CSC assembly (acc is already (col, row)-sorted).
        let mut colptr = vec![0usize; n + 1];
        let mut rowval = Vec::with_capacity(acc.len());
        let mut nzval = Vec::with_capacity(acc.len());
        {
            let mut counts = vec![0usize; n];
            for (&(c, _), _) in acc.iter() {
                counts[c] += 1;
            }
            for c in 0..n {
                colptr[c + 1] = colptr[c] + counts[c];
            }
            for (&(_, r), &v) in acc.iter() {
                rowval.push(r);
                nzval.push(v);
            }
        }
        let a = CscMatrix::new(total_rows, n, colptr, rowval, nzval);
        let p = CscMatrix::zeros((n, n));

        let clarabel_settings = DefaultSettingsBuilder::default()
            .verbose(settings.verbose)
            .tol_feas(settings.feas_tol)
            .tol_gap_abs(settings.gap_tol)
            .tol_gap_rel(settings.gap_tol)
            .max_iter(settings.max_iter)
            .build()
            .map_err(|e| SynthError::Solver(format!("settings: {e}")))?;

        let mut solver =
            DefaultSolver::new(&p, &problem.objective, &a, &b_vec, &cones, clarabel_settings)
                .map_err(|e| SynthError::Solver(format!("problem setup: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::DualInfeasible => {
                SolveStatus::Infeasible
            }
            other => SolveStatus::NumericalFailure(format!("{other:?}")),
        };
        Ok(SdpOutcome {
            status,
            x: sol.x.clone(),
            objective: sol.obj_val,
            iterations: sol.iterations,
            solve_time_s: sol.solve_time,
        })
    }
}
