//! Radar and communication output SINRs in precoder and covariance form,
//! plus the analytic upper bounds that seed the bisection searches.
//!
//! Channels are stored pre-normalized: a node's channel g_k absorbs the
//! transmit power and noise variance (g_k = sqrt(P_e)/sigma_k * h_k), so
//! the communication SINR denominator carries a unit noise term. For a
//! line-of-sight node, g_k = sqrt(input SNR) * a(theta_k).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::array_model::{steering, AngleGrid, ArrayGeometry, Precoder};
use crate::conic::HermitianMatrix;
use crate::error::{DfrcError, Result};

/// Relative tolerance on the PSD ordering of covariance-form metrics;
/// interior-point solutions carry constraint slack around 1e-8.
const PSD_ORDER_TOL: f64 = 1e-7;

/// A downlink communications receiver served by the primary node.
#[derive(Debug, Clone)]
pub struct SecondaryNode {
    /// Normalized channel g_k (see module docs).
    pub channel: DVector<Complex64>,
    /// Input SNR, linear.
    pub input_snr: f64,
    /// Communication symbol pulse length N_c (matched-filter gain).
    pub symbol_len: usize,
    /// Line-of-sight angle, radians, if applicable.
    pub los_angle: Option<f64>,
}

impl SecondaryNode {
    /// Line-of-sight node: channel sqrt(input_snr) * a(angle), zero phase.
    pub fn line_of_sight(
        geometry: &ArrayGeometry,
        angle: f64,
        input_snr: f64,
        symbol_len: usize,
    ) -> Result<Self> {
        if !(input_snr > 0.0) {
            return Err(DfrcError::domain("node input SNR must be positive"));
        }
        if symbol_len == 0 {
            return Err(DfrcError::domain("symbol length must be >= 1"));
        }
        let a = steering(geometry, angle)?;
        Ok(Self {
            channel: a * Complex64::new(input_snr.sqrt(), 0.0),
            input_snr,
            symbol_len,
            los_angle: Some(angle),
        })
    }

    pub fn from_channel(
        channel: DVector<Complex64>,
        input_snr: f64,
        symbol_len: usize,
    ) -> Result<Self> {
        if channel.norm_squared() == 0.0 {
            return Err(DfrcError::domain("node channel must be nonzero"));
        }
        if symbol_len == 0 {
            return Err(DfrcError::domain("symbol length must be >= 1"));
        }
        Ok(Self {
            channel,
            input_snr,
            symbol_len,
            los_angle: None,
        })
    }
}

/// Radar-side requirements: search sector, pulse length and worst-case
/// target input SNR (all SNRs linear).
#[derive(Debug, Clone)]
pub struct RadarSpec {
    pub sector: AngleGrid,
    pub pulse_len: usize,
    pub worst_case_input_snr: f64,
    /// Required radar SINR (linear) when acting as a guarantee.
    pub required_sinr: Option<f64>,
}

impl RadarSpec {
    pub fn new(
        sector: AngleGrid,
        pulse_len: usize,
        worst_case_input_snr: f64,
        required_sinr: Option<f64>,
    ) -> Result<Self> {
        if pulse_len == 0 {
            return Err(DfrcError::domain("radar pulse length must be >= 1"));
        }
        if !(worst_case_input_snr > 0.0) {
            return Err(DfrcError::domain("worst-case input SNR must be positive"));
        }
        Ok(Self {
            sector,
            pulse_len,
            worst_case_input_snr,
            required_sinr,
        })
    }
}

/// Matched-filter radar output SINR
/// N_r M xi_ir a^H W_r W_r^H a / (M xi_ir a^H W_c W_c^H a + 1).
pub fn radar_sinr(
    geometry: &ArrayGeometry,
    comm: &DMatrix<Complex64>,
    radar: &DMatrix<Complex64>,
    angle: f64,
    xi_ir: f64,
    pulse_len: usize,
) -> Result<f64> {
    let a = steering(geometry, angle)?;
    let m = geometry.num_elements() as f64;
    let sig = (a.adjoint() * radar).norm_squared();
    let interference = (a.adjoint() * comm).norm_squared();
    Ok(pulse_len as f64 * m * xi_ir * sig / (m * xi_ir * interference + 1.0))
}

/// Symbol-level communication output SINR for node `k` of the precoder:
/// N_c |g_k^H w_k|^2 / (sum_{j != k} |g_k^H w_j|^2 + 1).
pub fn comm_sinr(precoder: &Precoder, k: usize, node: &SecondaryNode) -> Result<f64> {
    if k >= precoder.comm.ncols() {
        return Err(DfrcError::domain(format!(
            "node index {k} out of range for {} comm columns",
            precoder.comm.ncols()
        )));
    }
    let g = &node.channel;
    let full = precoder.full();
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (j, col) in full.column_iter().enumerate() {
        let gain = g.dotc(&col.clone_owned()).norm_sqr();
        if j == k {
            signal = gain;
        } else {
            interference += gain;
        }
    }
    Ok(node.symbol_len as f64 * signal / (interference + 1.0))
}

/// Covariance-form radar SINR
/// N_r M xi_ir a^H (R - R_sum) a / (M xi_ir a^H R_sum a + 1).
pub fn radar_sinr_cov(
    geometry: &ArrayGeometry,
    r: &HermitianMatrix,
    r_sum: &HermitianMatrix,
    angle: f64,
    xi_ir: f64,
    pulse_len: usize,
) -> Result<f64> {
    let a = steering(geometry, angle)?;
    let total = r.quad_form(&a);
    let comm = r_sum.quad_form(&a);
    let num = total - comm;
    let scale = r.trace_re().abs().max(1.0);
    if num < -PSD_ORDER_TOL * scale {
        return Err(DfrcError::domain(format!(
            "PSD ordering violated: a^H (R - R_sum) a = {num:.3e}"
        )));
    }
    let m = geometry.num_elements() as f64;
    Ok(pulse_len as f64 * m * xi_ir * num.max(0.0) / (m * xi_ir * comm + 1.0))
}

/// Covariance-form communication SINR
/// N_c g^H R_k g / (g^H R g - g^H R_k g + 1).
pub fn comm_sinr_cov(
    r: &HermitianMatrix,
    r_k: &HermitianMatrix,
    node: &SecondaryNode,
) -> Result<f64> {
    let g = &node.channel;
    let total = r.quad_form(g);
    let signal = r_k.quad_form(g);
    let scale = r.trace_re().abs().max(1.0) * g.norm_squared().max(1.0);
    if total < signal - PSD_ORDER_TOL * scale {
        return Err(DfrcError::domain(format!(
            "PSD ordering violated: g^H R g - g^H R_k g = {:.3e}",
            total - signal
        )));
    }
    Ok(node.symbol_len as f64 * signal / ((total - signal).max(0.0) + 1.0))
}

/// Largest achievable communication SINR across nodes: min_k M N_c^k ||g_k||^2.
pub fn gamma_c_max(geometry: &ArrayGeometry, nodes: &[SecondaryNode]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(DfrcError::domain("gamma_c_max needs at least one node"));
    }
    let m = geometry.num_elements() as f64;
    Ok(nodes
        .iter()
        .map(|n| m * n.symbol_len as f64 * n.channel.norm_squared())
        .fold(f64::INFINITY, f64::min))
}

/// Maximum radar processing gain N_r M^3 xi_ir.
pub fn gamma_r_max(geometry: &ArrayGeometry, pulse_len: usize, xi_ir: f64) -> f64 {
    let m = geometry.num_elements() as f64;
    pulse_len as f64 * m * m * m * xi_ir
}
