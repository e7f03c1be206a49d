//! Hermitian matrices, real symmetric embedding and PSD factorization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{DfrcError, Result};

const HERMITIAN_TOL: f64 = 1e-12;

/// Complex matrix validated to equal its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    entries: DMatrix<Complex64>,
}

impl HermitianMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(DfrcError::domain("Hermitian matrix must be square"));
        }
        let scale = entries.norm().max(1.0);
        let dev = (&entries - entries.adjoint()).norm();
        if dev > HERMITIAN_TOL * scale {
            return Err(DfrcError::domain(format!(
                "matrix deviates from Hermitian by {dev:.3e}"
            )));
        }
        // symmetrize so downstream arithmetic sees an exact Hermitian
        let sym = (&entries + entries.adjoint()).scale(0.5);
        Ok(Self { entries: sym })
    }

    /// Symmetrize without the deviation check (for solver output that is
    /// Hermitian only up to solve tolerance).
    pub fn from_nearly_hermitian(entries: DMatrix<Complex64>) -> Self {
        let sym = (&entries + entries.adjoint()).scale(0.5);
        Self { entries: sym }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn trace_re(&self) -> f64 {
        self.entries.diagonal().iter().map(|e| e.re).sum()
    }

    /// Real quadratic form v^H H v.
    pub fn quad_form(&self, v: &DVector<Complex64>) -> f64 {
        (v.adjoint() * &self.entries * v)[(0, 0)].re
    }

    /// Real eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = self.entries.clone().symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals
    }
}

impl std::ops::Deref for HermitianMatrix {
    type Target = DMatrix<Complex64>;
    fn deref(&self) -> &Self::Target {
        &self.entries
    }
}

/// Real symmetric embedding [[Re H, -Im H], [Im H, Re H]] of a Hermitian
/// matrix. The embedding is PSD iff H is, with each eigenvalue doubled in
/// multiplicity.
pub fn real_embedding(h: &HermitianMatrix) -> DMatrix<f64> {
    let m = h.dim();
    let mut out = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let e = h.entries()[(i, j)];
            out[(i, j)] = e.re;
            out[(m + i, m + j)] = e.re;
            out[(i, m + j)] = -e.im;
            out[(m + i, j)] = e.im;
        }
    }
    out
}

/// Factor a PSD Hermitian matrix as F F^H via eigendecomposition, keeping
/// eigenvalues above `rank_tol * trace` and optionally only the
/// `rank_cap` largest. Small negative eigenvalues within tolerance are
/// clipped to zero.
pub fn psd_factor(h: &HermitianMatrix, rank_cap: Option<usize>) -> Result<DMatrix<Complex64>> {
    let trace = h.trace_re().max(f64::MIN_POSITIVE);
    let rank_tol = 1e-9 * trace;
    let eig = h.entries().clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-6 * trace {
        return Err(DfrcError::domain(format!(
            "matrix is not PSD: min eigenvalue {min:.3e} (trace {trace:.3e})"
        )));
    }
    // (eigenvalue, column) pairs sorted descending
    let mut pairs: Vec<(f64, usize)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &l)| (l.max(0.0), i))
        .filter(|&(l, _)| l > rank_tol)
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    if let Some(cap) = rank_cap {
        pairs.truncate(cap);
    }
    let m = h.dim();
    let rank = pairs.len();
    let mut f = DMatrix::zeros(m, rank.max(1));
    for (col, &(lambda, idx)) in pairs.iter().enumerate() {
        let scaled = eig.eigenvectors.column(idx) * Complex64::new(lambda.sqrt(), 0.0);
        f.set_column(col, &scaled);
    }
    if rank == 0 {
        f = DMatrix::zeros(m, 1);
    }
    Ok(f)
}

/// Dominant rank-one factor sqrt(lambda_1) u_1, phase fixed so the first
/// entry of nonnegligible magnitude is real positive.
pub fn rank1_approx(h: &HermitianMatrix) -> Result<DVector<Complex64>> {
    let f = psd_factor(h, Some(1))?;
    let mut v: DVector<Complex64> = f.column(0).into();
    let thresh = 1e-12 * v.norm().max(f64::MIN_POSITIVE);
    if let Some(first) = v.iter().find(|e| e.norm() > thresh) {
        let phase = first / first.norm();
        v = v.map(|e| e / phase);
    }
    Ok(v)
}

/// Dominant-eigenvalue fraction diagnostics for covariance eigenspectra.
pub fn eigen_spectrum(h: &HermitianMatrix) -> Vec<f64> {
    let mut vals = h.eigenvalues();
    vals.reverse();
    vals
}
