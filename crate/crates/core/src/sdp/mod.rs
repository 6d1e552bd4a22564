//! Block-diagonal semidefinite programs in standard primal form
//!
//! ```text
//! minimize    <c_f, x_f> + sum_j <C_j, X_j> + offset
//! subject to  <a_if, x_f> + sum_j <A_ij, X_j> = b_i      i = 1..m
//!             X_j PSD,  x_f free
//! ```
//!
//! and its dual `maximize b'y + offset` s.t. `A_f' y = c_f`,
//! `C_j - sum_i y_i A_ij = S_j` PSD. Coefficient matrices are symmetric and
//! stored as upper-triangular entry lists.

mod sdpa;
mod solver;

pub use sdpa::write_sdpa;
pub use solver::solve_sdp;

/// One entry of a symmetric coefficient matrix. `row <= col`; the entry
/// stands for both `(row, col)` and `(col, row)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// A linear functional over the free variables and PSD blocks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearFunctional {
    pub free: Vec<(usize, f64)>,
    pub entries: Vec<MatrixEntry>,
}

impl LinearFunctional {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_free(&mut self, var: usize, value: f64) {
        if value != 0.0 {
            self.free.push((var, value));
        }
    }

    /// Adds `value` to the symmetric coefficient at `(row, col)` of `block`.
    pub fn add_entry(&mut self, block: usize, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            let (row, col) = if row <= col { (row, col) } else { (col, row) };
            self.entries.push(MatrixEntry {
                block,
                row,
                col,
                value,
            });
        }
    }

    /// Merges duplicate coordinates and drops cancelled entries.
    pub fn compact(&mut self) {
        self.free.sort_by_key(|&(v, _)| v);
        let mut free: Vec<(usize, f64)> = Vec::with_capacity(self.free.len());
        for &(v, c) in &self.free {
            match free.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => free.push((v, c)),
            }
        }
        free.retain(|&(_, c)| c != 0.0);
        self.free = free;

        self.entries.sort_by_key(|e| (e.block, e.row, e.col));
        let mut entries: Vec<MatrixEntry> = Vec::with_capacity(self.entries.len());
        for &e in &self.entries {
            match entries.last_mut() {
                Some(last) if (last.block, last.row, last.col) == (e.block, e.row, e.col) => {
                    last.value += e.value
                }
                _ => entries.push(e),
            }
        }
        entries.retain(|e| e.value != 0.0);
        self.entries = entries;
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty() && self.entries.is_empty()
    }

    /// Evaluates the functional at `(x_f, X)`.
    pub fn eval(&self, free: &[f64], blocks: &[nalgebra::DMatrix<f64>]) -> f64 {
        let f: f64 = self.free.iter().map(|&(v, c)| c * free[v]).sum();
        let m: f64 = self
            .entries
            .iter()
            .map(|e| {
                let x = blocks[e.block][(e.row, e.col)];
                if e.row == e.col {
                    e.value * x
                } else {
                    2.0 * e.value * x
                }
            })
            .sum();
        f + m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub lhs: LinearFunctional,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub free_vars: usize,
    pub objective: LinearFunctional,
    pub objective_offset: f64,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new(block_dims: Vec<usize>, free_vars: usize) -> Self {
        SdpProblem {
            block_dims,
            free_vars,
            objective: LinearFunctional::new(),
            objective_offset: 0.0,
            constraints: Vec::new(),
        }
    }

    pub fn add_constraint(&mut self, mut lhs: LinearFunctional, rhs: f64) {
        lhs.compact();
        self.constraints.push(Constraint { lhs, rhs });
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.block_dims.contains(&0) {
            return Err("PSD block of dimension 0".into());
        }
        let check = |f: &LinearFunctional| -> Result<(), String> {
            for &(v, c) in &f.free {
                if v >= self.free_vars || !c.is_finite() {
                    return Err(format!("bad free-variable coefficient ({v}, {c})"));
                }
            }
            for e in &f.entries {
                let ok = e.block < self.block_dims.len()
                    && e.row <= e.col
                    && e.col < self.block_dims[e.block]
                    && e.value.is_finite();
                if !ok {
                    return Err(format!("bad matrix entry {e:?}"));
                }
            }
            Ok(())
        };
        check(&self.objective)?;
        for c in &self.constraints {
            check(&c.lhs)?;
            if !c.rhs.is_finite() {
                return Err("non-finite right-hand side".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    /// Relative duality gap tolerance: `|p - d| <= gap_tol * (1 + |p|)`.
    pub gap_tol: f64,
    /// Relative primal and dual residual tolerance.
    pub feas_tol: f64,
    /// Minimum eigenvalue allowed in returned PSD blocks.
    pub psd_tol: f64,
    /// Residual tolerance of infeasibility certificates.
    pub infeas_tol: f64,
    pub max_iter: usize,
    /// Accept the best iterate as `NearOptimal` when it is within this factor
    /// of the tolerances after progress stalls.
    pub near_factor: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            psd_tol: 1e-9,
            infeas_tol: 1e-8,
            max_iter: 200,
            near_factor: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SdpStatus {
    Optimal,
    /// Progress stalled before the requested accuracy; the best iterate meets
    /// `SdpOptions::near_factor` times the tolerances.
    NearOptimal,
    /// A dual ray `y` with `b'y > 0`, `A'y + s = 0`, `s` PSD was found.
    PrimalInfeasible,
    /// A primal ray `x` with `c'x < 0`, `Ax = 0`, `x` in the cone was found.
    DualInfeasibleOrUnbounded,
    NumericalFailure,
    IterationLimit,
}

impl std::fmt::Display for SdpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::NearOptimal => "optimal to reduced accuracy",
            SdpStatus::PrimalInfeasible => "primal infeasible",
            SdpStatus::DualInfeasibleOrUnbounded => "dual infeasible or unbounded",
            SdpStatus::NumericalFailure => "numerical failure",
            SdpStatus::IterationLimit => "iteration limit",
        };
        f.write_str(s)
    }
}

/// On `NumericalFailure` and `IterationLimit` the point fields hold the
/// iterate with the smallest tolerance ratio seen.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub free: Vec<f64>,
    pub blocks: Vec<nalgebra::DMatrix<f64>>,
    /// Equality multipliers `y`.
    pub dual: Vec<f64>,
    /// Dual slack blocks `S_j`.
    pub dual_slacks: Vec<nalgebra::DMatrix<f64>>,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Normalized residual of the infeasibility certificate, when one was returned.
    pub certificate_residual: Option<f64>,
    pub iterations: usize,
    /// On failure with `tau < kappa`: the last iterate as a candidate
    /// primal ray `(x_f, X)` normalized to `c'x = -1`, for callers that can
    /// verify it with problem-specific arguments.
    pub primal_ray: Option<(Vec<f64>, Vec<nalgebra::DMatrix<f64>>)>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    /// `Optimal` or `NearOptimal`.
    pub fn has_solution(&self) -> bool {
        matches!(self.status, SdpStatus::Optimal | SdpStatus::NearOptimal)
    }
}

#[cfg(test)]
mod tests;
