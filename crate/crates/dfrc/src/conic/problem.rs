//! Abstract conic problem description: Hermitian PSD variables, free
//! scalars, affine constraints and affine-PSD combination constraints.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::io::Write;

use super::herm::HermitianMatrix;
use crate::error::{DfrcError, Result};

/// Handle to a Hermitian PSD matrix variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermVarId(pub(crate) usize);

/// Handle to a free scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalarId(pub(crate) usize);

/// Real linear functional of the decision vector.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub(crate) terms: Vec<(usize, f64)>,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn push(&mut self, col: usize, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((col, coeff));
        }
    }

    pub fn add(mut self, other: &LinExpr, scale: f64) -> Self {
        for &(c, v) in &other.terms {
            self.push(c, v * scale);
        }
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(c, v)| v * x[c]).sum()
    }
}

/// Affine Hermitian expression sum_t coeff_t * V_t + constant, required PSD.
#[derive(Debug, Clone)]
pub struct PsdExpr {
    pub terms: Vec<(HermVarId, f64)>,
    pub constant: DMatrix<Complex64>,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub enum Objective {
    /// Pure feasibility.
    Feasibility,
    /// Maximize a linear functional.
    Maximize(LinExpr),
    /// Minimize a weighted sum of squared linear functionals (convex
    /// quadratic, used by the beampattern-MSE baselines).
    MinimizeSumSquares(Vec<(f64, LinExpr)>),
}

struct HermVarInfo {
    name: String,
    dim: usize,
    offset: usize,
}

struct ScalarInfo {
    name: String,
    col: usize,
}

/// Abstract SDP over complex Hermitian PSD variables and free scalars.
///
/// Internally each Hermitian variable of dimension m is parameterized by
/// its m(m+1)/2 real upper-triangle entries followed by its m(m-1)/2
/// strict-upper imaginary parts, so every constraint is a real affine
/// statement about the packed decision vector.
pub struct ConicProblem {
    herm_vars: Vec<HermVarInfo>,
    scalars: Vec<ScalarInfo>,
    num_cols: usize,
    pub(crate) objective: Objective,
    pub(crate) eq_constraints: Vec<(LinExpr, f64)>,
    /// expr >= rhs
    pub(crate) ineq_constraints: Vec<(LinExpr, f64)>,
    pub(crate) psd_constraints: Vec<PsdExpr>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self {
            herm_vars: Vec::new(),
            scalars: Vec::new(),
            num_cols: 0,
            objective: Objective::Feasibility,
            eq_constraints: Vec::new(),
            ineq_constraints: Vec::new(),
            psd_constraints: Vec::new(),
        }
    }

    pub fn add_herm_var(&mut self, name: impl Into<String>, dim: usize) -> HermVarId {
        let offset = self.num_cols;
        self.num_cols += dim * dim;
        self.herm_vars.push(HermVarInfo {
            name: name.into(),
            dim,
            offset,
        });
        HermVarId(self.herm_vars.len() - 1)
    }

    pub fn add_scalar_var(&mut self, name: impl Into<String>) -> ScalarId {
        let col = self.num_cols;
        self.num_cols += 1;
        self.scalars.push(ScalarInfo {
            name: name.into(),
            col,
        });
        ScalarId(self.scalars.len() - 1)
    }

    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn num_herm_vars(&self) -> usize {
        self.herm_vars.len()
    }

    pub(crate) fn herm_dim(&self, var: HermVarId) -> usize {
        self.herm_vars[var.0].dim
    }

    /// Column of Re V_ij (i <= j) in the packed decision vector.
    pub(crate) fn re_col(&self, var: HermVarId, i: usize, j: usize) -> usize {
        debug_assert!(i <= j);
        let info = &self.herm_vars[var.0];
        info.offset + j * (j + 1) / 2 + i
    }

    /// Column of Im V_ij (i < j) in the packed decision vector.
    pub(crate) fn im_col(&self, var: HermVarId, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        let info = &self.herm_vars[var.0];
        let n_re = info.dim * (info.dim + 1) / 2;
        info.offset + n_re + j * (j - 1) / 2 + i
    }

    pub fn scalar_expr(&self, s: ScalarId) -> LinExpr {
        let mut e = LinExpr::new();
        e.push(self.scalars[s.0].col, 1.0);
        e
    }

    /// Real linear functional tr(C V) of Hermitian variable V for a
    /// Hermitian coefficient matrix C.
    pub fn trace_form(&self, var: HermVarId, c: &DMatrix<Complex64>) -> LinExpr {
        let dim = self.herm_dim(var);
        assert_eq!(c.nrows(), dim);
        let mut e = LinExpr::new();
        for j in 0..dim {
            e.push(self.re_col(var, j, j), c[(j, j)].re);
            for i in 0..j {
                // C_ij conj(V_ij) + conj(C_ij) V_ij = 2(Re C Re V + Im C Im V)
                e.push(self.re_col(var, i, j), 2.0 * c[(i, j)].re);
                e.push(self.im_col(var, i, j), 2.0 * c[(i, j)].im);
            }
        }
        e
    }

    /// v^H V v as a real linear functional of V.
    pub fn quad_form(&self, var: HermVarId, v: &DVector<Complex64>) -> LinExpr {
        self.trace_form(var, &(v * v.adjoint()))
    }

    /// Single diagonal entry [V]_mm.
    pub fn diag_entry(&self, var: HermVarId, m: usize) -> LinExpr {
        let mut e = LinExpr::new();
        e.push(self.re_col(var, m, m), 1.0);
        e
    }

    pub fn add_eq(&mut self, expr: LinExpr, rhs: f64) {
        self.eq_constraints.push((expr, rhs));
    }

    /// expr >= rhs
    pub fn add_ineq_ge(&mut self, expr: LinExpr, rhs: f64) {
        self.ineq_constraints.push((expr, rhs));
    }

    /// sum_t coeff_t V_t + constant PSD. `constant` may be empty (zero).
    pub fn add_psd(&mut self, terms: Vec<(HermVarId, f64)>, constant: Option<DMatrix<Complex64>>) {
        let dim = self.herm_dim(terms[0].0);
        for &(v, _) in &terms {
            assert_eq!(self.herm_dim(v), dim, "mixed dimensions in PSD expression");
        }
        let constant = constant.unwrap_or_else(|| DMatrix::zeros(dim, dim));
        self.psd_constraints.push(PsdExpr {
            terms,
            constant,
            dim,
        });
    }

    pub fn set_objective(&mut self, objective: Objective) {
        self.objective = objective;
    }

    /// Recover the Hermitian value of `var` from a packed solution vector.
    pub fn extract_herm(&self, var: HermVarId, x: &[f64]) -> HermitianMatrix {
        let dim = self.herm_dim(var);
        let mut m = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            m[(j, j)] = Complex64::new(x[self.re_col(var, j, j)], 0.0);
            for i in 0..j {
                let e = Complex64::new(x[self.re_col(var, i, j)], x[self.im_col(var, i, j)]);
                m[(i, j)] = e;
                m[(j, i)] = e.conj();
            }
        }
        HermitianMatrix::from_nearly_hermitian(m)
    }

    pub fn extract_scalar(&self, s: ScalarId, x: &[f64]) -> f64 {
        x[self.scalars[s.0].col]
    }

    /// Evaluate the Hermitian value of a PSD expression at a solution.
    pub(crate) fn eval_psd_expr(&self, expr: &PsdExpr, x: &[f64]) -> DMatrix<Complex64> {
        let mut m = expr.constant.clone();
        for &(var, coeff) in &expr.terms {
            m += self.extract_herm(var, x).entries() * Complex64::new(coeff, 0.0);
        }
        m
    }

    /// Dump the problem in a sparse text format for offline inspection.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# conic problem: {} columns", self.num_cols)?;
        for v in &self.herm_vars {
            writeln!(out, "hermvar {} dim={} offset={}", v.name, v.dim, v.offset)?;
        }
        for s in &self.scalars {
            writeln!(out, "scalar {} col={}", s.name, s.col)?;
        }
        match &self.objective {
            Objective::Feasibility => writeln!(out, "objective feasibility")?,
            Objective::Maximize(e) => {
                write!(out, "objective maximize")?;
                for (c, v) in &e.terms {
                    write!(out, " {c}:{v}")?;
                }
                writeln!(out)?;
            }
            Objective::MinimizeSumSquares(terms) => {
                writeln!(out, "objective minimize-sum-squares ({} residuals)", terms.len())?
            }
        }
        for (e, rhs) in &self.eq_constraints {
            write!(out, "eq rhs={rhs}")?;
            for (c, v) in &e.terms {
                write!(out, " {c}:{v}")?;
            }
            writeln!(out)?;
        }
        for (e, rhs) in &self.ineq_constraints {
            write!(out, "ge rhs={rhs}")?;
            for (c, v) in &e.terms {
                write!(out, " {c}:{v}")?;
            }
            writeln!(out)?;
        }
        for p in &self.psd_constraints {
            write!(out, "psd dim={}", p.dim)?;
            for (v, c) in &p.terms {
                write!(out, " {}:{c}", self.herm_vars[v.0].name)?;
            }
            writeln!(out, " const_norm={}", p.constant.norm())?;
        }
        Ok(())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.num_cols == 0 {
            return Err(DfrcError::domain("conic problem has no variables"));
        }
        Ok(())
    }
}

impl Default for ConicProblem {
    fn default() -> Self {
        Self::new()
    }
}
