//! Radar-priority link selection: maximize the number of closed
//! communication links under a fixed radar guarantee, then finish with the
//! communication-guarantee design on the chosen subset.

use log::warn;

use crate::conic::{solve, ConicStatus, Tolerances};
use crate::design::{
    build_feasibility, comm_guarantee_subset, DesignReport, GuaranteeConfig, GuaranteeMode,
    SurplusMode, SystemModel,
};
use crate::error::{DfrcError, Result};
use crate::to_db;

/// Thresholds and settings for the radar-priority designs. Both the radar
/// and comm thresholds are required inputs (linear).
#[derive(Debug, Clone)]
pub struct PrioritySpec {
    pub gamma_r: f64,
    pub gamma_c: f64,
    /// Bisection tolerance for the finishing comm-guarantee design, dB.
    pub bisection_tol_db: f64,
    pub radar_rank_cap: Option<usize>,
}

impl PrioritySpec {
    pub fn new(gamma_r: f64, gamma_c: f64) -> Result<Self> {
        if !(gamma_r > 0.0) || !(gamma_c > 0.0) {
            return Err(DfrcError::domain("priority thresholds must be positive"));
        }
        Ok(Self {
            gamma_r,
            gamma_c,
            bisection_tol_db: 0.1,
            radar_rank_cap: None,
        })
    }
}

/// Whether both guarantees can hold simultaneously when serving exactly
/// `subset`. Solver numerical failures count as infeasible.
pub fn subset_feasible(
    system: &SystemModel,
    subset: &[usize],
    gamma_c: f64,
    gamma_r: f64,
) -> Result<bool> {
    let fp = build_feasibility(system, gamma_c, gamma_r, subset, SurplusMode::None)?;
    let out = solve(&fp.problem, Tolerances::default())?;
    match out.status {
        ConicStatus::Feasible => Ok(true),
        ConicStatus::Infeasible => Ok(false),
        ConicStatus::NumericalFailure => {
            warn!("feasibility check failed numerically for subset {subset:?}; treating as infeasible");
            Ok(false)
        }
    }
}

/// Comm-guarantee finish on a chosen subset: the radar floor is the
/// required gamma_r, so the returned design keeps the radar guarantee.
fn finish(system: &SystemModel, spec: &PrioritySpec, subset: &[usize]) -> Result<DesignReport> {
    let config = GuaranteeConfig {
        mode: GuaranteeMode::CommGuarantee,
        fixed_threshold: spec.gamma_c,
        bisection_tol_db: spec.bisection_tol_db,
        floor_db: to_db(spec.gamma_r),
        radar_rank_cap: spec.radar_rank_cap,
    };
    comm_guarantee_subset(system, &config, subset)
}

/// Exhaustive subset search. Among maximum-cardinality feasible subsets,
/// ties go to the finished design using the least comm power.
pub fn priority_combinatorial(system: &SystemModel, spec: &PrioritySpec) -> Result<DesignReport> {
    let k_c = system.nodes.len();
    if k_c > 20 {
        return Err(DfrcError::domain(
            "combinatorial search is capped at 20 nodes; use the greedy variant",
        ));
    }

    // enumerate by ascending cardinality, lexicographic within; an
    // infeasible subset rules out every superset
    let mut subsets: Vec<Vec<usize>> = (0..(1u32 << k_c))
        .map(|mask| (0..k_c).filter(|&k| mask & (1 << k) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));

    let mut infeasible: Vec<u32> = Vec::new();
    let mut best: Vec<Vec<usize>> = Vec::new();
    for subset in subsets {
        let mask: u32 = subset.iter().map(|&k| 1 << k).sum();
        if infeasible.iter().any(|&im| im & mask == im) {
            continue;
        }
        if subset_feasible(system, &subset, spec.gamma_c, spec.gamma_r)? {
            match best.first().map(|b| b.len()) {
                Some(n) if subset.len() > n => best = vec![subset],
                Some(n) if subset.len() == n => best.push(subset),
                None => best = vec![subset],
                _ => {}
            }
        } else {
            infeasible.push(mask);
        }
    }

    // empty set not feasible means even the radar guarantee alone fails
    if best.is_empty() {
        return Ok(DesignReport::infeasible(
            system.geometry.num_elements(),
            k_c,
            Vec::new(),
        ));
    }

    let mut chosen: Option<(DesignReport, f64)> = None;
    for subset in &best {
        let report = finish(system, spec, subset)?;
        let power = report.precoder.comm_power_fraction();
        let better = match &chosen {
            None => true,
            Some((_, p)) => power < *p,
        };
        if better {
            chosen = Some((report, power));
        }
    }
    Ok(chosen.unwrap().0)
}

/// Greedy variant: rank individually feasible nodes by the comm power
/// their singleton design needs, then admit them in that order when the
/// joint problem stays feasible.
pub fn priority_greedy(system: &SystemModel, spec: &PrioritySpec) -> Result<DesignReport> {
    let k_c = system.nodes.len();

    let mut ranked: Vec<(usize, f64)> = Vec::new();
    for k in 0..k_c {
        if subset_feasible(system, &[k], spec.gamma_c, spec.gamma_r)? {
            let report = finish(system, spec, &[k])?;
            ranked.push((k, report.precoder.comm_power_fraction()));
        }
    }
    // ascending power need; ties (within 1e-6) by node index
    ranked.sort_by(|a, b| {
        if (a.1 - b.1).abs() <= 1e-6 {
            a.0.cmp(&b.0)
        } else {
            a.1.partial_cmp(&b.1).unwrap()
        }
    });

    let mut accepted: Vec<usize> = Vec::new();
    for &(k, _) in &ranked {
        let mut candidate = accepted.clone();
        candidate.push(k);
        candidate.sort_unstable();
        if accepted.is_empty() || subset_feasible(system, &candidate, spec.gamma_c, spec.gamma_r)? {
            accepted = candidate;
        }
    }

    if accepted.is_empty() && !subset_feasible(system, &[], spec.gamma_c, spec.gamma_r)? {
        return Ok(DesignReport::infeasible(
            system.geometry.num_elements(),
            k_c,
            Vec::new(),
        ));
    }
    finish(system, spec, &accepted)
}
