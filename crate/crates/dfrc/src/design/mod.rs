//! Precoder design methods: SINR-guarantee bisection designs and
//! radar-priority link selection, built on the shared covariance
//! feasibility problem.

mod guarantee;
mod priority;

pub(crate) use guarantee::achieved_metrics;
pub use guarantee::{
    build_feasibility, comm_guarantee, comm_guarantee_subset, radar_guarantee, recover_precoders,
    reduce_radar_waveforms, FeasibilityProblem, SurplusMode,
};
pub use priority::{priority_combinatorial, priority_greedy, subset_feasible, PrioritySpec};

use crate::array_model::{ArrayGeometry, Precoder};
use crate::conic::HermitianMatrix;
use crate::link_metrics::{RadarSpec, SecondaryNode};

/// Physical setup a design method operates on: the transmit array, the
/// radar requirements, and the secondary nodes to serve.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub geometry: ArrayGeometry,
    pub radar: RadarSpec,
    pub nodes: Vec<SecondaryNode>,
}

/// Which subsystem's SINR threshold is held fixed during bisection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuaranteeMode {
    /// Fix the radar threshold, maximize the worst comm SINR.
    RadarGuarantee,
    /// Fix the comm threshold, maximize the worst radar SINR.
    CommGuarantee,
}

/// Bisection settings for a guarantee design.
#[derive(Debug, Clone)]
pub struct GuaranteeConfig {
    pub mode: GuaranteeMode,
    /// Fixed threshold, linear (radar SINR in RadarGuarantee mode, comm
    /// SINR in CommGuarantee mode).
    pub fixed_threshold: f64,
    /// Bisection stops when the dB bracket is at most this wide.
    pub bisection_tol_db: f64,
    /// Lower end of the bisected threshold range, dB.
    pub floor_db: f64,
    /// Cap on the number of radar waveform columns after recovery.
    pub radar_rank_cap: Option<usize>,
}

impl GuaranteeConfig {
    pub fn radar_guarantee(gamma_r: f64) -> Self {
        Self {
            mode: GuaranteeMode::RadarGuarantee,
            fixed_threshold: gamma_r,
            bisection_tol_db: 0.1,
            floor_db: -20.0,
            radar_rank_cap: None,
        }
    }

    pub fn comm_guarantee(gamma_c: f64) -> Self {
        Self {
            mode: GuaranteeMode::CommGuarantee,
            fixed_threshold: gamma_c,
            bisection_tol_db: 0.1,
            floor_db: 0.0,
            radar_rank_cap: None,
        }
    }
}

/// Covariance-relaxation solution: total covariance R and per-node
/// covariances R_k keyed by node index.
#[derive(Debug, Clone)]
pub struct CovarianceSolution {
    pub r: HermitianMatrix,
    pub node_covs: Vec<(usize, HermitianMatrix)>,
}

impl CovarianceSolution {
    pub fn empty(dim: usize) -> Self {
        Self {
            r: HermitianMatrix::zeros(dim),
            node_covs: Vec::new(),
        }
    }
}

/// One bisection step: tested threshold and whether it was feasible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub threshold_db: f64,
    pub feasible: bool,
}

/// Outcome of a design method.
#[derive(Debug, Clone)]
pub struct DesignReport {
    pub precoder: Precoder,
    pub covariances: CovarianceSolution,
    /// Symbol-level comm SINR per scenario node (0 for unserved nodes).
    pub achieved_comm_sinr: Vec<f64>,
    /// Worst radar SINR over the search sector.
    pub achieved_radar_sinr_min: f64,
    /// (radar_fraction, comm_fraction) of total transmit power.
    pub power_split: (f64, f64),
    pub bisection_trace: Vec<TraceEntry>,
    /// Node indices with a nonzero comm column.
    pub served: Vec<usize>,
    pub feasible: bool,
    /// Threshold (dB) of the final solve, when bisection ran.
    pub solved_threshold_db: Option<f64>,
    /// Metrics before radar rank reduction, when a reduction was applied.
    pub pre_reduction_comm_sinr: Option<Vec<f64>>,
    pub pre_reduction_radar_sinr_min: Option<f64>,
    /// Whether the fixed guarantee threshold holds in the final precoder.
    pub guarantee_met: bool,
}

impl DesignReport {
    /// Report for a design that terminated infeasible at the floor.
    pub fn infeasible(num_antennas: usize, num_nodes: usize, trace: Vec<TraceEntry>) -> Self {
        Self {
            precoder: Precoder {
                comm: nalgebra::DMatrix::zeros(num_antennas, 0),
                radar: nalgebra::DMatrix::zeros(num_antennas, 0),
            },
            covariances: CovarianceSolution::empty(num_antennas),
            achieved_comm_sinr: vec![0.0; num_nodes],
            achieved_radar_sinr_min: 0.0,
            power_split: (0.0, 0.0),
            bisection_trace: trace,
            served: Vec::new(),
            feasible: false,
            solved_threshold_db: None,
            pre_reduction_comm_sinr: None,
            pre_reduction_radar_sinr_min: None,
            guarantee_met: false,
        }
    }
}
