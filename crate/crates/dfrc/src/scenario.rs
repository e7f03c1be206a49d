//! Scenario configuration (JSON, angles in degrees and ratios in dB at the
//! boundary) and structured result export.

use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::array_model::{beampattern_sweep, AngleGrid, ArrayGeometry};
use crate::baselines::{build_desired_pattern, DesiredPattern};
use crate::conic::{eigen_spectrum, HermitianMatrix};
use crate::design::{DesignReport, GuaranteeConfig, GuaranteeMode, PrioritySpec, SystemModel};
use crate::error::{DfrcError, Result};
use crate::link_metrics::{RadarSpec, SecondaryNode};
use crate::waveform::CommSignalingSpec;
use crate::{from_db, to_db};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub array: ArrayConfig,
    pub radar: RadarConfig,
    #[serde(default)]
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub signaling: SignalingConfig,
    pub design: DesignConfig,
    #[serde(default)]
    pub waveform: WaveformConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub num_elements: usize,
    #[serde(default = "default_spacing")]
    pub spacing_wavelengths: f64,
}

fn default_spacing() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarConfig {
    pub sector: SectorConfig,
    pub pulse_len: usize,
    pub worst_case_input_snr_db: f64,
    /// Required radar SINR, dB; takes precedence over design.gamma_r_db.
    #[serde(default)]
    pub required_sinr_db: Option<f64>,
}

/// Sector either as an explicit angle list or as a centered span measured
/// in beamwidths, sampled in sine space.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum SectorConfig {
    Angles {
        angles_deg: Vec<f64>,
    },
    Span {
        center_deg: f64,
        width_beamwidths: f64,
        step_beamwidths: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub angle_deg: f64,
    pub input_snr_db: f64,
    pub symbol_len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalingConfig {
    pub pulse_len: usize,
    pub rolloff: f64,
    pub seed: u64,
}

impl Default for SignalingConfig {
    fn default() -> Self {
        Self {
            pulse_len: 7,
            rolloff: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RadarGuarantee,
    CommGuarantee,
    PriorityCombinatorial,
    PriorityGreedy,
    Mse,
    Zf,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::RadarGuarantee => "radar_guarantee",
            Method::CommGuarantee => "comm_guarantee",
            Method::PriorityCombinatorial => "priority_combinatorial",
            Method::PriorityGreedy => "priority_greedy",
            Method::Mse => "mse",
            Method::Zf => "zf",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub method: Method,
    /// Radar SINR threshold (fixed or required), dB.
    #[serde(default)]
    pub gamma_r_db: Option<f64>,
    /// Comm SINR threshold (fixed or required), dB.
    #[serde(default)]
    pub gamma_c_db: Option<f64>,
    #[serde(default = "default_tol")]
    pub bisection_tol_db: f64,
    /// Floor of the bisected threshold, dB; method-specific default.
    #[serde(default)]
    pub floor_db: Option<f64>,
    #[serde(default)]
    pub radar_rank_cap: Option<usize>,
    /// Desired-pattern widening margin in sine units (baselines).
    #[serde(default = "default_margin")]
    pub pattern_margin_sine: f64,
    #[serde(default = "default_grid_points")]
    pub pattern_grid_points: usize,
    /// Additional methods for side-by-side comparison runs.
    #[serde(default)]
    pub compare_methods: Vec<Method>,
}

fn default_tol() -> f64 {
    0.1
}

fn default_margin() -> f64 {
    0.05
}

fn default_grid_points() -> usize {
    181
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveformConfig {
    pub chirp_duration_s: f64,
    pub chirp_f_start_hz: f64,
    pub chirp_f_end_hz: f64,
    pub sample_rate_hz: f64,
    pub trials: usize,
    pub target_angle_deg: f64,
    pub delay_max: i64,
    pub delay_step: i64,
    pub doppler_max_hz: f64,
    pub doppler_step_hz: f64,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self {
            chirp_duration_s: 25e-6,
            chirp_f_start_hz: -500e3,
            chirp_f_end_hz: 500e3,
            sample_rate_hz: 4e6,
            trials: 100,
            target_angle_deg: 0.0,
            delay_max: 100,
            delay_step: 1,
            doppler_max_hz: 200e3,
            doppler_step_hz: 2e3,
        }
    }
}

impl WaveformConfig {
    pub fn delays(&self) -> Vec<i64> {
        (-self.delay_max..=self.delay_max)
            .step_by(self.delay_step.max(1) as usize)
            .collect()
    }

    pub fn dopplers_hz(&self) -> Vec<f64> {
        let n = (self.doppler_max_hz / self.doppler_step_hz).round() as i64;
        (-n..=n).map(|k| k as f64 * self.doppler_step_hz).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub beampattern_points: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            beampattern_points: 181,
        }
    }
}

impl Scenario {
    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.array.num_elements, self.array.spacing_wavelengths)
    }

    pub fn sector(&self) -> Result<AngleGrid> {
        let geometry = self.geometry()?;
        match &self.radar.sector {
            SectorConfig::Angles { angles_deg } => {
                AngleGrid::new(angles_deg.iter().map(|a| a.to_radians()).collect())
            }
            SectorConfig::Span {
                center_deg,
                width_beamwidths,
                step_beamwidths,
            } => AngleGrid::sector(
                &geometry,
                center_deg.to_radians(),
                *width_beamwidths,
                *step_beamwidths,
            ),
        }
    }

    /// Physical system model with channels normalized from the dB inputs.
    pub fn system(&self) -> Result<SystemModel> {
        let geometry = self.geometry()?;
        let sector = self.sector()?;
        let radar = RadarSpec::new(
            sector,
            self.radar.pulse_len,
            from_db(self.radar.worst_case_input_snr_db),
            self.gamma_r_db().map(from_db),
        )?;
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                SecondaryNode::line_of_sight(
                    &geometry,
                    n.angle_deg.to_radians(),
                    from_db(n.input_snr_db),
                    n.symbol_len,
                )
            })
            .collect::<Result<_>>()?;
        Ok(SystemModel {
            geometry,
            radar,
            nodes,
        })
    }

    pub fn guarantee_config(&self) -> Result<GuaranteeConfig> {
        match self.design.method {
            Method::RadarGuarantee => {
                let gamma_r = self.required_db("gamma_r_db", self.gamma_r_db())?;
                Ok(GuaranteeConfig {
                    mode: GuaranteeMode::RadarGuarantee,
                    fixed_threshold: from_db(gamma_r),
                    bisection_tol_db: self.design.bisection_tol_db,
                    floor_db: self.design.floor_db.unwrap_or(-20.0),
                    radar_rank_cap: self.design.radar_rank_cap,
                })
            }
            Method::CommGuarantee => {
                let gamma_c = self.required_db("gamma_c_db", self.design.gamma_c_db)?;
                Ok(GuaranteeConfig {
                    mode: GuaranteeMode::CommGuarantee,
                    fixed_threshold: from_db(gamma_c),
                    bisection_tol_db: self.design.bisection_tol_db,
                    floor_db: self.design.floor_db.unwrap_or(0.0),
                    radar_rank_cap: self.design.radar_rank_cap,
                })
            }
            other => Err(DfrcError::domain(format!(
                "method {} carries no guarantee config",
                other.name()
            ))),
        }
    }

    /// Radar threshold in dB: radar.required_sinr_db wins over
    /// design.gamma_r_db.
    pub fn gamma_r_db(&self) -> Option<f64> {
        self.radar.required_sinr_db.or(self.design.gamma_r_db)
    }

    pub fn priority_spec(&self) -> Result<PrioritySpec> {
        let gamma_r = self.required_db("gamma_r_db", self.gamma_r_db())?;
        let gamma_c = self.required_db("gamma_c_db", self.design.gamma_c_db)?;
        let mut spec = PrioritySpec::new(from_db(gamma_r), from_db(gamma_c))?;
        spec.bisection_tol_db = self.design.bisection_tol_db;
        spec.radar_rank_cap = self.design.radar_rank_cap;
        Ok(spec)
    }

    pub fn desired_pattern(&self) -> Result<DesiredPattern> {
        let sector = self.sector()?;
        let grid = AngleGrid::uniform_sine(self.design.pattern_grid_points)?;
        build_desired_pattern(&sector, self.design.pattern_margin_sine, grid)
    }

    pub fn signaling_spec(&self) -> Result<CommSignalingSpec> {
        CommSignalingSpec::new(
            self.signaling.pulse_len,
            self.signaling.rolloff,
            self.signaling.seed,
        )
    }

    fn required_db(&self, field: &str, value: Option<f64>) -> Result<f64> {
        value.ok_or_else(|| DfrcError::Validation {
            path: format!("design.{field}"),
            message: format!("required by method {}", self.design.method.name()),
        })
    }

    /// Full validation beyond what parsing enforces.
    pub fn validate(&self) -> Result<()> {
        self.system().map_err(|e| DfrcError::Validation {
            path: "scenario".into(),
            message: e.to_string(),
        })?;
        match self.design.method {
            Method::RadarGuarantee | Method::CommGuarantee => {
                self.guarantee_config()?;
            }
            Method::PriorityCombinatorial | Method::PriorityGreedy => {
                self.priority_spec()?;
            }
            Method::Mse | Method::Zf => {
                self.required_db("gamma_c_db", self.design.gamma_c_db)?;
                self.desired_pattern()?;
            }
        }
        Ok(())
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DfrcError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let scenario: Scenario = serde_json::from_str(&text).map_err(|e| DfrcError::Parse(format!(
        "{}: {e}",
        path.display()
    )))?;
    scenario.validate()?;
    Ok(scenario)
}

/// Scalar summary written alongside the CSVs; all ratios in dB (absent for
/// zero/unserved values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub status: String,
    pub method: String,
    pub served: Vec<usize>,
    pub achieved_comm_sinr_db: Vec<Option<f64>>,
    pub achieved_radar_sinr_min_db: Option<f64>,
    pub radar_power_fraction: f64,
    pub comm_power_fraction: f64,
    pub solved_threshold_db: Option<f64>,
    pub guarantee_met: bool,
    pub pre_reduction_radar_sinr_min_db: Option<f64>,
}

fn db_or_none(v: f64) -> Option<f64> {
    if v > 0.0 {
        Some(to_db(v))
    } else {
        None
    }
}

pub fn build_manifest(report: &DesignReport, method: Method) -> Manifest {
    Manifest {
        status: if report.feasible {
            "feasible".into()
        } else {
            "infeasible".into()
        },
        method: method.name().into(),
        served: report.served.clone(),
        achieved_comm_sinr_db: report
            .achieved_comm_sinr
            .iter()
            .map(|&v| db_or_none(v))
            .collect(),
        achieved_radar_sinr_min_db: db_or_none(report.achieved_radar_sinr_min),
        radar_power_fraction: report.power_split.0,
        comm_power_fraction: report.power_split.1,
        solved_threshold_db: report.solved_threshold_db,
        guarantee_met: report.guarantee_met,
        pre_reduction_radar_sinr_min_db: report
            .pre_reduction_radar_sinr_min
            .and_then(db_or_none),
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DfrcError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| DfrcError::Parse(format!("{}: {e}", path.display())))
}

/// Writes the report artifacts into `out_dir`: manifest.json always;
/// beampattern, power split, per-node SINR, radar eigenspectrum and
/// bisection trace CSVs when the design is feasible. Returns the paths
/// written, deterministically ordered.
pub fn export_report(
    report: &DesignReport,
    scenario: &Scenario,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|source| DfrcError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();

    let manifest = build_manifest(report, scenario.design.method);
    let manifest_path = out_dir.join("manifest.json");
    write_file(
        &manifest_path,
        &(serde_json::to_string_pretty(&manifest)
            .map_err(|e| DfrcError::Parse(e.to_string()))?
            + "\n"),
    )?;
    written.push(manifest_path);

    if !report.feasible {
        return Ok(written);
    }

    let geometry = scenario.geometry()?;
    let grid = AngleGrid::uniform_sine(scenario.output.beampattern_points)?;
    let rows = beampattern_sweep(&geometry, &report.precoder, &grid)?;
    let mut bp = String::from("angle_deg,total_db,comm_db,radar_db\n");
    for row in rows {
        bp.push_str(&format!(
            "{:.6},{},{},{}\n",
            row.angle.to_degrees(),
            fmt_db(Some(row.total)),
            fmt_db(row.comm),
            fmt_db(row.radar),
        ));
    }
    written.push(write_named(out_dir, "beampattern.csv", &bp)?);

    let ps = format!(
        "radar_fraction,comm_fraction\n{:.12e},{:.12e}\n",
        report.power_split.0, report.power_split.1
    );
    written.push(write_named(out_dir, "power_split.csv", &ps)?);

    let mut ns = String::from("node,angle_deg,served,comm_sinr_db\n");
    for (k, node) in scenario.nodes.iter().enumerate() {
        ns.push_str(&format!(
            "{},{:.6},{},{}\n",
            k,
            node.angle_deg,
            report.served.contains(&k),
            fmt_db(Some(report.achieved_comm_sinr[k])),
        ));
    }
    written.push(write_named(out_dir, "node_sinr.csv", &ns)?);

    let gram = HermitianMatrix::from_nearly_hermitian(
        &report.precoder.radar * report.precoder.radar.adjoint(),
    );
    let mut es = String::from("index,eigenvalue\n");
    for (i, v) in eigen_spectrum(&gram).iter().enumerate() {
        es.push_str(&format!("{i},{v:.12e}\n"));
    }
    written.push(write_named(out_dir, "eigenspectrum.csv", &es)?);

    let mut tr = String::from("threshold_db,feasible\n");
    for e in &report.bisection_trace {
        tr.push_str(&format!("{:.12e},{}\n", e.threshold_db, e.feasible));
    }
    written.push(write_named(out_dir, "bisection_trace.csv", &tr)?);

    Ok(written)
}

fn fmt_db(v: Option<f64>) -> String {
    match v {
        Some(x) if x > 0.0 => format!("{:.12e}", to_db(x)),
        _ => String::from(""),
    }
}

fn write_named(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    write_file(&path, contents)?;
    Ok(path)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|source| DfrcError::Io {
        path: path.display().to_string(),
        source,
    })?;
    f.write_all(contents.as_bytes()).map_err(|source| DfrcError::Io {
        path: path.display().to_string(),
        source,
    })
}
