//! Covariance feasibility core, the two guarantee bisections, precoder
//! recovery from covariances, and radar waveform-count reduction.

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::array_model::{steering, Precoder};
use crate::conic::{
    psd_factor, solve, ConicOutcome, ConicProblem, HermVarId, HermitianMatrix, LinExpr, Objective,
    ScalarId, Tolerances,
};
use crate::design::{
    CovarianceSolution, DesignReport, GuaranteeConfig, GuaranteeMode, SystemModel, TraceEntry,
};
use crate::error::{DfrcError, Result};
use crate::link_metrics::{comm_sinr, gamma_c_max, gamma_r_max, radar_sinr};
use crate::{from_db, to_db};

/// Which SINR constraint family carries the maximized surplus variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurplusMode {
    /// Plain feasibility, no surplus.
    None,
    /// Comm constraints get "... - gamma_c >= t", t maximized.
    Comm,
    /// Radar constraints get "... - gamma_r >= t", t maximized.
    Radar,
}

/// Feasibility problem plus the handles needed to read a solution back.
pub struct FeasibilityProblem {
    pub problem: ConicProblem,
    pub r: HermVarId,
    /// (node index, covariance variable) per subset member.
    pub node_vars: Vec<(usize, HermVarId)>,
    pub surplus: Option<ScalarId>,
}

impl FeasibilityProblem {
    pub fn extract(&self, x: &[f64]) -> CovarianceSolution {
        CovarianceSolution {
            r: self.problem.extract_herm(self.r, x),
            node_covs: self
                .node_vars
                .iter()
                .map(|&(k, v)| (k, self.problem.extract_herm(v, x)))
                .collect(),
        }
    }
}

/// Builds the covariance feasibility problem: find R, {R_k} PSD with
/// R - sum R_k PSD, unit diagonal on R, per-node comm SINR >= gamma_c and
/// sector-wide radar SINR >= gamma_r, both linearized in the covariances.
pub fn build_feasibility(
    system: &SystemModel,
    gamma_c: f64,
    gamma_r: f64,
    subset: &[usize],
    surplus: SurplusMode,
) -> Result<FeasibilityProblem> {
    if !(gamma_c > 0.0) || !(gamma_r > 0.0) {
        return Err(DfrcError::domain("SINR thresholds must be positive"));
    }
    if system.radar.sector.is_empty() {
        return Err(DfrcError::domain("radar search sector is empty"));
    }
    for &k in subset {
        if k >= system.nodes.len() {
            return Err(DfrcError::domain(format!("node index {k} out of range")));
        }
    }

    let m = system.geometry.num_elements();
    let mut problem = ConicProblem::new();
    let r = problem.add_herm_var("R", m);
    let node_vars: Vec<(usize, HermVarId)> = subset
        .iter()
        .map(|&k| (k, problem.add_herm_var(format!("R_{k}"), m)))
        .collect();
    let t = match surplus {
        SurplusMode::None => None,
        _ => Some(problem.add_scalar_var("t")),
    };

    // per-antenna power: [R]_mm = 1
    for i in 0..m {
        problem.add_eq(problem.diag_entry(r, i), 1.0);
    }

    // R - sum_k R_k PSD (the herm vars themselves are PSD by construction)
    if !node_vars.is_empty() {
        let mut terms = vec![(r, 1.0)];
        terms.extend(node_vars.iter().map(|&(_, v)| (v, -1.0)));
        problem.add_psd(terms, None);
    }

    // comm: (N_c + gamma_c) g^H R_k g - gamma_c g^H R g >= gamma_c [+ t]
    for &(k, var) in &node_vars {
        let node = &system.nodes[k];
        let g = &node.channel;
        let mut expr = LinExpr::new()
            .add(&problem.quad_form(var, g), node.symbol_len as f64 + gamma_c)
            .add(&problem.quad_form(r, g), -gamma_c);
        if surplus == SurplusMode::Comm {
            expr = expr.add(&problem.scalar_expr(t.unwrap()), -1.0);
        }
        problem.add_ineq_ge(expr, gamma_c);
    }

    // radar, per sector angle:
    // M xi (N_r a^H R a - (N_r + gamma_r) a^H (sum R_k) a) >= gamma_r [+ t]
    let xi = system.radar.worst_case_input_snr;
    let n_r = system.radar.pulse_len as f64;
    for &angle in system.radar.sector.angles() {
        let a = steering(&system.geometry, angle)?;
        let mut expr = LinExpr::new().add(&problem.quad_form(r, &a), m as f64 * xi * n_r);
        for &(_, var) in &node_vars {
            expr = expr.add(&problem.quad_form(var, &a), -(m as f64) * xi * (n_r + gamma_r));
        }
        if surplus == SurplusMode::Radar {
            expr = expr.add(&problem.scalar_expr(t.unwrap()), -1.0);
        }
        problem.add_ineq_ge(expr, gamma_r);
    }

    match t {
        Some(s) => {
            let obj = problem.scalar_expr(s);
            problem.set_objective(Objective::Maximize(obj));
        }
        None => problem.set_objective(Objective::Feasibility),
    }

    Ok(FeasibilityProblem {
        problem,
        r,
        node_vars,
        surplus: t,
    })
}

fn solve_probe(fp: &FeasibilityProblem) -> Result<ConicOutcome> {
    solve(&fp.problem, Tolerances::default())
}

/// Log-space bisection. Probes the floor first; the ceiling is treated as
/// unachievable. Returns the lower limit of the final bracket (None when
/// the floor itself is infeasible) and the probe trace.
fn bisect(
    floor_db: f64,
    ceil_db: f64,
    tol_db: f64,
    mut probe: impl FnMut(f64) -> Result<bool>,
) -> Result<(Option<f64>, Vec<TraceEntry>)> {
    let mut trace = Vec::new();
    let floor_ok = probe(floor_db)?;
    trace.push(TraceEntry {
        threshold_db: floor_db,
        feasible: floor_ok,
    });
    if !floor_ok {
        return Ok((None, trace));
    }
    let mut lo = floor_db;
    let mut hi = ceil_db.max(floor_db);
    while hi - lo > tol_db {
        let mid = 0.5 * (lo + hi);
        let ok = probe(mid)?;
        trace.push(TraceEntry {
            threshold_db: mid,
            feasible: ok,
        });
        if ok {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((Some(lo), trace))
}

/// Fix the radar SINR threshold and maximize the worst comm SINR over all
/// nodes by bisecting the comm threshold in dB.
pub fn radar_guarantee(system: &SystemModel, config: &GuaranteeConfig) -> Result<DesignReport> {
    if config.mode != GuaranteeMode::RadarGuarantee {
        return Err(DfrcError::domain("config mode must be RadarGuarantee"));
    }
    let gamma_r = config.fixed_threshold;
    let m = system.geometry.num_elements();
    let bound = gamma_r_max(&system.geometry, system.radar.pulse_len, system.radar.worst_case_input_snr);
    if gamma_r > bound {
        // exceeds the maximum radar processing gain: nothing to search
        return Ok(DesignReport::infeasible(
            m,
            system.nodes.len(),
            vec![TraceEntry {
                threshold_db: config.floor_db,
                feasible: false,
            }],
        ));
    }
    let subset: Vec<usize> = (0..system.nodes.len()).collect();
    if subset.is_empty() {
        return Err(DfrcError::domain(
            "radar guarantee needs at least one secondary node",
        ));
    }
    let ceil_db = to_db(gamma_c_max(&system.geometry, &system.nodes)?);

    let probe = |gamma_c_db: f64| -> Result<bool> {
        let fp = build_feasibility(system, from_db(gamma_c_db), gamma_r, &subset, SurplusMode::Comm)?;
        Ok(probe_feasible(&solve_probe(&fp)?, gamma_c_db))
    };
    let (lo, trace) = bisect(config.floor_db, ceil_db, config.bisection_tol_db, probe)?;
    let Some(lo_db) = lo else {
        return Ok(DesignReport::infeasible(m, system.nodes.len(), trace));
    };

    let fp = build_feasibility(system, from_db(lo_db), gamma_r, &subset, SurplusMode::Comm)?;
    let outcome = solve_probe(&fp)?;
    let x = outcome
        .x
        .ok_or_else(|| DfrcError::Solver("final solve returned no point".into()))?;
    finish_report(system, config, fp.extract(&x), trace, lo_db)
}

/// Fix the comm SINR threshold and maximize the worst radar SINR over the
/// sector by bisecting the radar threshold in dB, serving every node.
pub fn comm_guarantee(system: &SystemModel, config: &GuaranteeConfig) -> Result<DesignReport> {
    let subset: Vec<usize> = (0..system.nodes.len()).collect();
    comm_guarantee_subset(system, config, &subset)
}

/// Comm guarantee restricted to a node subset; an empty subset degenerates
/// to a pure radar design (no comm columns).
pub fn comm_guarantee_subset(
    system: &SystemModel,
    config: &GuaranteeConfig,
    subset: &[usize],
) -> Result<DesignReport> {
    if config.mode != GuaranteeMode::CommGuarantee {
        return Err(DfrcError::domain("config mode must be CommGuarantee"));
    }
    let gamma_c = config.fixed_threshold;
    let m = system.geometry.num_elements();
    let ceil_db = to_db(gamma_r_max(
        &system.geometry,
        system.radar.pulse_len,
        system.radar.worst_case_input_snr,
    ));

    let probe = |gamma_r_db: f64| -> Result<bool> {
        let fp = build_feasibility(system, gamma_c, from_db(gamma_r_db), subset, SurplusMode::Radar)?;
        Ok(probe_feasible(&solve_probe(&fp)?, gamma_r_db))
    };
    let (lo, trace) = bisect(config.floor_db, ceil_db, config.bisection_tol_db, probe)?;
    let Some(lo_db) = lo else {
        return Ok(DesignReport::infeasible(m, system.nodes.len(), trace));
    };

    let fp = build_feasibility(system, gamma_c, from_db(lo_db), subset, SurplusMode::Radar)?;
    let outcome = solve_probe(&fp)?;
    let x = outcome
        .x
        .ok_or_else(|| DfrcError::Solver("final solve returned no point".into()))?;
    finish_report(system, config, fp.extract(&x), trace, lo_db)
}

// with a free surplus variable the probe is always solvable, so feasibility
// of the threshold itself means the maximized surplus is nonnegative
const SURPLUS_TOL: f64 = 1e-6;

fn probe_feasible(outcome: &ConicOutcome, threshold_db: f64) -> bool {
    match outcome.status {
        crate::conic::ConicStatus::Feasible => {
            outcome.objective.map_or(true, |t| t >= -SURPLUS_TOL)
        }
        crate::conic::ConicStatus::Infeasible => false,
        crate::conic::ConicStatus::NumericalFailure => {
            warn!("solver failed numerically at {threshold_db:.2} dB; treating as infeasible");
            false
        }
    }
}

/// Theorem-1 recovery: comm columns w_k = R_k g_k / sqrt(g_k^H R_k g_k),
/// radar block a PSD factor of R - W_c W_c^H. Returns the precoder and the
/// node indices actually served (g^H R_k g above tolerance).
pub fn recover_precoders(
    solution: &CovarianceSolution,
    nodes: &[crate::link_metrics::SecondaryNode],
    radar_rank_cap: Option<usize>,
) -> Result<(Precoder, Vec<usize>)> {
    let m = solution.r.dim();
    let rank_tol = 1e-9 * solution.r.trace_re().max(f64::MIN_POSITIVE);
    let mut served = Vec::new();
    let mut cols: Vec<nalgebra::DVector<Complex64>> = Vec::new();
    for &(k, ref rk) in &solution.node_covs {
        let g = &nodes[k].channel;
        let q = rk.quad_form(g);
        if q <= rank_tol {
            cols.push(nalgebra::DVector::zeros(m));
            continue;
        }
        let w = (rk.entries() * g).scale(1.0 / q.sqrt());
        cols.push(w);
        served.push(k);
    }
    let comm = if cols.is_empty() {
        DMatrix::zeros(m, 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    let residual =
        HermitianMatrix::from_nearly_hermitian(solution.r.entries() - &comm * comm.adjoint());
    let radar = psd_factor(&residual, radar_rank_cap)?;
    Ok((Precoder::new(comm, radar)?, served))
}

/// Replaces the radar block with a rank-capped PSD factor of W_r W_r^H,
/// then rescales every antenna row of the full precoder back to unit
/// power. Rescaling only the radar block would break the comm guarantee.
pub fn reduce_radar_waveforms(precoder: &Precoder, target_rank: usize) -> Result<Precoder> {
    if target_rank == 0 {
        return Err(DfrcError::domain("target rank must be >= 1"));
    }
    let gram = HermitianMatrix::from_nearly_hermitian(&precoder.radar * precoder.radar.adjoint());
    let mut radar = psd_factor(&gram, Some(target_rank))?;
    let mut comm = precoder.comm.clone();
    for i in 0..comm.nrows() {
        let power = comm.row(i).norm_squared() + radar.row(i).norm_squared();
        if power <= f64::MIN_POSITIVE {
            return Err(DfrcError::domain(format!(
                "antenna row {i} has zero power; cannot renormalize"
            )));
        }
        let s = Complex64::new(1.0 / power.sqrt(), 0.0);
        comm.row_mut(i).scale_mut(s.re);
        radar.row_mut(i).scale_mut(s.re);
    }
    Precoder::new(comm, radar)
}

/// Evaluates achieved SINRs of a recovered precoder, applies any rank
/// reduction, and assembles the report.
fn finish_report(
    system: &SystemModel,
    config: &GuaranteeConfig,
    covariances: CovarianceSolution,
    trace: Vec<TraceEntry>,
    solved_db: f64,
) -> Result<DesignReport> {
    let (precoder, served) = recover_precoders(&covariances, &system.nodes, None)?;
    let (pre_comm, pre_radar_min) = achieved_metrics(system, &covariances, &precoder)?;

    let needs_reduction = config
        .radar_rank_cap
        .is_some_and(|cap| precoder.radar.ncols() > cap);
    let (precoder, achieved_comm, radar_min, pre_c, pre_r) = if needs_reduction {
        let reduced = reduce_radar_waveforms(&precoder, config.radar_rank_cap.unwrap())?;
        let (comm, radar_min) = achieved_metrics(system, &covariances, &reduced)?;
        (reduced, comm, radar_min, Some(pre_comm), Some(pre_radar_min))
    } else {
        (precoder, pre_comm, pre_radar_min, None, None)
    };

    // 0.01 dB slack absorbs interior-point constraint slack
    let slack = from_db(-0.01);
    let guarantee_met = match config.mode {
        GuaranteeMode::RadarGuarantee => radar_min >= config.fixed_threshold * slack,
        GuaranteeMode::CommGuarantee => served
            .iter()
            .all(|&k| achieved_comm[k] >= config.fixed_threshold * slack),
    };

    let comm_frac = precoder.comm_power_fraction();
    Ok(DesignReport {
        achieved_comm_sinr: achieved_comm,
        achieved_radar_sinr_min: radar_min,
        power_split: (1.0 - comm_frac, comm_frac),
        bisection_trace: trace,
        served,
        feasible: true,
        solved_threshold_db: Some(solved_db),
        pre_reduction_comm_sinr: pre_c,
        pre_reduction_radar_sinr_min: pre_r,
        guarantee_met,
        precoder,
        covariances,
    })
}

/// Per-node comm SINRs (0 for nodes without a comm column) and the worst
/// sector radar SINR, both in precoder form.
pub(crate) fn achieved_metrics(
    system: &SystemModel,
    covariances: &CovarianceSolution,
    precoder: &Precoder,
) -> Result<(Vec<f64>, f64)> {
    let mut comm = vec![0.0; system.nodes.len()];
    for (col, &(k, _)) in covariances.node_covs.iter().enumerate() {
        comm[k] = comm_sinr(precoder, col, &system.nodes[k])?;
    }
    let mut radar_min = f64::INFINITY;
    for &angle in system.radar.sector.angles() {
        let s = radar_sinr(
            &system.geometry,
            &precoder.comm,
            &precoder.radar,
            angle,
            system.radar.worst_case_input_snr,
            system.radar.pulse_len,
        )?;
        radar_min = radar_min.min(s);
    }
    Ok((comm, radar_min))
}
