//! Interior-point solve of a [`ConicProblem`] through the real symmetric
//! embedding of its Hermitian variables.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::problem::{ConicProblem, LinExpr, Objective, PsdExpr};
use crate::error::{DfrcError, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Feasibility tolerance relative to constraint scale.
    pub feas_tol: f64,
    /// Relative optimality gap tolerance.
    pub opt_tol: f64,
    pub max_iterations: u32,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feas_tol: 1e-6,
            opt_tol: 1e-6,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicStatus {
    Feasible,
    Infeasible,
    NumericalFailure,
}

/// Solver verdict plus packed solution when feasible.
#[derive(Debug, Clone)]
pub struct ConicOutcome {
    pub status: ConicStatus,
    pub x: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub max_violation: f64,
    pub iterations: u32,
}

impl ConicOutcome {
    pub fn is_feasible(&self) -> bool {
        self.status == ConicStatus::Feasible
    }
}

/// Accumulates triplets for a compressed-sparse-column matrix.
struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    fn new(ncols: usize) -> Self {
        Self {
            nrows: 0,
            ncols,
            entries: Vec::new(),
        }
    }

    fn push_row(&mut self, expr_terms: &[(usize, f64)]) -> usize {
        let row = self.nrows;
        self.nrows += 1;
        for &(col, val) in expr_terms {
            if val != 0.0 {
                self.entries.push((row, col, val));
            }
        }
        row
    }

    fn push(&mut self, row: usize, col: usize, val: f64) {
        if val != 0.0 {
            self.nrows = self.nrows.max(row + 1);
            self.entries.push((row, col, val));
        }
    }

    fn set_nrows(&mut self, n: usize) {
        self.nrows = self.nrows.max(n);
    }

    fn build(mut self) -> CscMatrix<f64> {
        self.entries.sort_by_key(|&(r, c, _)| (c, r));
        let mut rowval: Vec<usize> = Vec::with_capacity(self.entries.len());
        let mut nzval: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut counts = vec![0usize; self.ncols];
        let mut i = 0;
        while i < self.entries.len() {
            let (r, c, mut v) = self.entries[i];
            let mut j = i + 1;
            while j < self.entries.len() && self.entries[j].0 == r && self.entries[j].1 == c {
                v += self.entries[j].2;
                j += 1;
            }
            rowval.push(r);
            nzval.push(v);
            counts[c] += 1;
            i = j;
        }
        let mut colptr = vec![0usize; self.ncols + 1];
        for c in 0..self.ncols {
            colptr[c + 1] = colptr[c] + counts[c];
        }
        CscMatrix::new(self.nrows, self.ncols, colptr, rowval, nzval)
    }
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Append the rows of one PSD cone (the 2m-dimensional real embedding of
/// a Hermitian affine expression) to the constraint matrix. Rows follow
/// the scaled upper-triangle vectorization the PSD cone expects.
fn push_psd_block(
    problem: &ConicProblem,
    expr: &PsdExpr,
    a: &mut TripletBuilder,
    b: &mut Vec<f64>,
) {
    let m = expr.dim;
    let dim = 2 * m;
    // Linear coefficients of Re E_ij / Im E_ij in the decision vector.
    let re_coeffs = |i: usize, j: usize| -> Vec<(usize, f64)> {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        expr.terms
            .iter()
            .map(|&(v, c)| (problem.re_col(v, i, j), c))
            .collect()
    };
    let im_coeffs = |i: usize, j: usize| -> Vec<(usize, f64)> {
        if i == j {
            return Vec::new();
        }
        let sign = if i < j { 1.0 } else { -1.0 };
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        expr.terms
            .iter()
            .map(|&(v, c)| (problem.im_col(v, i, j), sign * c))
            .collect()
    };
    let kmat = &expr.constant;
    for col in 0..dim {
        for row in 0..=col {
            let scale = if row == col { 1.0 } else { SQRT2 };
            // embedding entry T[row, col] of E = [[Re, -Im], [Im, Re]]
            let (coeffs, konst): (Vec<(usize, f64)>, f64) = if col < m {
                (re_coeffs(row, col), kmat[(row, col)].re)
            } else if row < m {
                let j2 = col - m;
                (
                    im_coeffs(row, j2)
                        .into_iter()
                        .map(|(c, v)| (c, -v))
                        .collect(),
                    -kmat[(row, j2)].im,
                )
            } else {
                let (i2, j2) = (row - m, col - m);
                (re_coeffs(i2, j2), kmat[(i2, j2)].re)
            };
            let r = a.push_row(&[]);
            for (c, v) in coeffs {
                a.push(r, c, -scale * v);
            }
            b.push(scale * konst);
        }
    }
}

/// Solve the problem. Feasible outcomes satisfy every constraint within
/// `tol.feas_tol` of its scale; deterministic given identical inputs.
pub fn solve(problem: &ConicProblem, tol: Tolerances) -> Result<ConicOutcome> {
    problem.validate()?;
    let n = problem.num_cols();

    // objective
    let mut q = vec![0.0; n];
    let mut p_builder = TripletBuilder::new(n);
    p_builder.set_nrows(n);
    match &problem.objective {
        Objective::Feasibility => {}
        Objective::Maximize(e) => {
            for &(c, v) in &e.terms {
                q[c] -= v;
            }
        }
        Objective::MinimizeSumSquares(residuals) => {
            // (1/2) x^T P x with P = 2 sum w r r^T, upper triangle only
            for (w, r) in residuals {
                for &(c1, v1) in &r.terms {
                    for &(c2, v2) in &r.terms {
                        if c1 <= c2 {
                            p_builder.push(c1, c2, 2.0 * w * v1 * v2);
                        }
                    }
                }
            }
        }
    }
    let p = p_builder.build();

    let mut a = TripletBuilder::new(n);
    let mut b: Vec<f64> = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

    // zero cone: equalities
    for (expr, rhs) in &problem.eq_constraints {
        a.push_row(&expr.terms);
        b.push(*rhs);
    }
    if !problem.eq_constraints.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(problem.eq_constraints.len()));
    }

    // nonnegative cone: expr >= rhs  ->  -expr + s = -rhs
    for (expr, rhs) in &problem.ineq_constraints {
        let negated: Vec<(usize, f64)> = expr.terms.iter().map(|&(c, v)| (c, -v)).collect();
        a.push_row(&negated);
        b.push(-rhs);
    }
    if !problem.ineq_constraints.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(
            problem.ineq_constraints.len(),
        ));
    }

    // PSD cones: every Hermitian variable, then every combination constraint
    for v in 0..problem.num_herm_vars() {
        let var = super::problem::HermVarId(v);
        let expr = PsdExpr {
            terms: vec![(var, 1.0)],
            constant: nalgebra::DMatrix::zeros(problem.herm_dim(var), problem.herm_dim(var)),
            dim: problem.herm_dim(var),
        };
        push_psd_block(problem, &expr, &mut a, &mut b);
        cones.push(SupportedConeT::PSDTriangleConeT(2 * problem.herm_dim(var)));
    }
    for expr in &problem.psd_constraints {
        push_psd_block(problem, expr, &mut a, &mut b);
        cones.push(SupportedConeT::PSDTriangleConeT(2 * expr.dim));
    }

    let a = a.build();
    // target accuracy one order tighter than the acceptance check so the
    // post-solve violation measure has headroom; stalls that met the
    // reduced tolerances surface as AlmostSolved and are vetted below
    let settings = DefaultSettingsBuilder::default()
        .verbose(std::env::var("DFRC_SOLVER_VERBOSE").is_ok())
        .max_iter(tol.max_iterations)
        .tol_feas(0.1 * tol.feas_tol)
        .tol_gap_abs(0.1 * tol.opt_tol)
        .tol_gap_rel(0.1 * tol.opt_tol)
        .reduced_tol_feas(1e-5)
        .reduced_tol_gap_abs(1e-3)
        .reduced_tol_gap_rel(1e-3)
        .build()
        .map_err(|e| DfrcError::Solver(format!("settings: {e:?}")))?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
        .map_err(|e| DfrcError::Solver(format!("setup: {e:?}")))?;
    solver.solve();

    let iterations = solver.solution.iterations;
    log::debug!(
        "clarabel: {:?} after {} iterations",
        solver.solution.status,
        iterations
    );
    let status = match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => ConicStatus::Feasible,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            ConicStatus::Infeasible
        }
        _ => ConicStatus::NumericalFailure,
    };

    if status != ConicStatus::Feasible {
        return Ok(ConicOutcome {
            status,
            x: None,
            objective: None,
            max_violation: f64::INFINITY,
            iterations,
        });
    }

    let x = solver.solution.x.clone();
    let max_violation = measure_violation(problem, &x);
    let objective = match &problem.objective {
        Objective::Feasibility => None,
        Objective::Maximize(e) => Some(e.eval(&x)),
        Objective::MinimizeSumSquares(res) => Some(
            res.iter()
                .map(|(w, r)| {
                    let v = r.eval(&x);
                    w * v * v
                })
                .sum(),
        ),
    };
    // preserve the outcome invariant: Feasible implies within tolerance
    let status = if max_violation <= Tolerances::default().feas_tol.max(tol.feas_tol) {
        ConicStatus::Feasible
    } else {
        ConicStatus::NumericalFailure
    };
    Ok(ConicOutcome {
        status,
        x: Some(x),
        objective,
        max_violation,
        iterations,
    })
}

/// Worst relative constraint violation of a candidate solution.
fn measure_violation(problem: &ConicProblem, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    let scale_of = |expr: &LinExpr, rhs: f64| -> f64 {
        let coeff_scale = expr
            .terms
            .iter()
            .map(|&(_, v)| v.abs())
            .fold(0.0f64, f64::max);
        coeff_scale.max(rhs.abs()).max(1.0)
    };
    for (expr, rhs) in &problem.eq_constraints {
        worst = worst.max((expr.eval(x) - rhs).abs() / scale_of(expr, *rhs));
    }
    for (expr, rhs) in &problem.ineq_constraints {
        worst = worst.max((rhs - expr.eval(x)).max(0.0) / scale_of(expr, *rhs));
    }
    for v in 0..problem.num_herm_vars() {
        let h = problem.extract_herm(super::problem::HermVarId(v), x);
        let min_eig = h.eigenvalues()[0];
        let scale = h.trace_re().abs().max(1.0);
        worst = worst.max((-min_eig).max(0.0) / scale);
    }
    for expr in &problem.psd_constraints {
        let e = problem.eval_psd_expr(expr, x);
        let h = super::herm::HermitianMatrix::from_nearly_hermitian(e);
        let min_eig = h.eigenvalues()[0];
        let scale = h.trace_re().abs().max(1.0);
        worst = worst.max((-min_eig).max(0.0) / scale);
    }
    worst
}
