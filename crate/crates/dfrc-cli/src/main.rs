//! Command-line frontend: runs scenario files through the design methods
//! and writes CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 2 design infeasible, 1 any other failure.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use dfrc::baselines::{mse_design, zf_design};
use dfrc::design::{
    comm_guarantee, priority_combinatorial, priority_greedy, radar_guarantee,
    reduce_radar_waveforms, DesignReport, SystemModel,
};
use dfrc::error::{DfrcError, Result};
use dfrc::scenario::{export_report, Method, Scenario};
use dfrc::waveform::{ambiguity, chirp_similarity, lfm_chirp, monte_carlo_ambiguity};

#[derive(Parser)]
#[command(name = "dfrc", about = "Dual-function radar-communication precoder design")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the scenario's design method and export its report.
    Design(RunArgs),
    /// Run several methods on one scenario and emit a side-by-side summary.
    Compare(RunArgs),
    /// Averaged squared ambiguity surfaces and chirp-similarity scores.
    Ambiguity(RunArgs),
    /// Re-run the design over a list of values for one scenario key.
    Sweep(SweepArgs),
    /// Check a scenario file and run the internal property suite on it.
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file.
    scenario: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the signaling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-path override applied before validation, e.g.
    /// design.gamma_c_db=5 (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Overrides the Monte-Carlo trial count.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Dotted path of the swept key, e.g. design.gamma_c_db.
    #[arg(long)]
    param: String,
    /// Comma-separated values substituted into the swept key.
    #[arg(long, value_delimiter = ',')]
    values: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Design(args) => run_design(&args),
        Cmd::Compare(args) => run_compare(&args),
        Cmd::Ambiguity(args) => run_ambiguity(&args),
        Cmd::Sweep(args) => run_sweep(&args),
        Cmd::Validate(args) => run_validate(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Loads the scenario with overrides applied to the raw JSON before
/// validation.
fn load_with_overrides(args: &RunArgs) -> Result<Scenario> {
    let text = std::fs::read_to_string(&args.scenario).map_err(|source| DfrcError::Io {
        path: args.scenario.display().to_string(),
        source,
    })?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| DfrcError::Parse(e.to_string()))?;
    for spec in &args.overrides {
        apply_override(&mut value, spec)?;
    }
    let mut scenario: Scenario =
        serde_json::from_value(value).map_err(|e| DfrcError::Parse(e.to_string()))?;
    if let Some(seed) = args.seed {
        scenario.signaling.seed = seed;
    }
    if let Some(trials) = args.trials {
        scenario.waveform.trials = trials;
    }
    scenario.validate()?;
    Ok(scenario)
}

fn apply_override(root: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| DfrcError::Parse(format!("override `{spec}` is not KEY=VALUE")))?;
    let value: serde_json::Value =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = cursor
            .as_object_mut()
            .ok_or_else(|| DfrcError::Parse(format!("override path `{key}` hits a non-object")))?;
        if i == parts.len() - 1 {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        cursor = map
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!("split produces at least one part")
}

fn execute_method(scenario: &Scenario, system: &SystemModel, method: Method) -> Result<DesignReport> {
    let mut sc = scenario.clone();
    sc.design.method = method;
    match method {
        Method::RadarGuarantee => radar_guarantee(system, &sc.guarantee_config()?),
        Method::CommGuarantee => comm_guarantee(system, &sc.guarantee_config()?),
        Method::PriorityCombinatorial => priority_combinatorial(system, &sc.priority_spec()?),
        Method::PriorityGreedy => priority_greedy(system, &sc.priority_spec()?),
        Method::Mse | Method::Zf => {
            let gamma_c_db = sc.design.gamma_c_db.ok_or_else(|| DfrcError::Validation {
                path: "design.gamma_c_db".into(),
                message: "required by the baseline methods".into(),
            })?;
            let pattern = sc.desired_pattern()?;
            let gamma_c = dfrc::from_db(gamma_c_db);
            if method == Method::Mse {
                mse_design(system, gamma_c, &pattern, sc.design.radar_rank_cap)
            } else {
                zf_design(system, gamma_c, &pattern, sc.design.radar_rank_cap)
            }
        }
    }
}

fn run_design(args: &RunArgs) -> Result<u8> {
    let scenario = load_with_overrides(args)?;
    let system = scenario.system()?;
    let report = execute_method(&scenario, &system, scenario.design.method)?;
    export_report(&report, &scenario, &args.out)?;
    print_summary(scenario.design.method, &report);
    Ok(if report.feasible { 0 } else { 2 })
}

fn print_summary(method: Method, report: &DesignReport) {
    if !report.feasible {
        println!("{}: infeasible", method.name());
        return;
    }
    let comm: Vec<String> = report
        .achieved_comm_sinr
        .iter()
        .map(|&v| {
            if v > 0.0 {
                format!("{:.2}", dfrc::to_db(v))
            } else {
                "-".into()
            }
        })
        .collect();
    println!(
        "{}: radar_power={:.4} comm_sinr_db=[{}] radar_sinr_min_db={:.2} served={:?}",
        method.name(),
        report.power_split.0,
        comm.join(","),
        dfrc::to_db(report.achieved_radar_sinr_min),
        report.served
    );
}

fn method_list(scenario: &Scenario) -> Vec<Method> {
    let mut methods = vec![scenario.design.method];
    for &m in &scenario.design.compare_methods {
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    methods
}

fn run_compare(args: &RunArgs) -> Result<u8> {
    let scenario = load_with_overrides(args)?;
    let system = scenario.system()?;
    let methods = method_list(&scenario);

    let mut summary = String::from(
        "method,status,radar_power_fraction,comm_power_fraction,radar_sinr_min_db,min_comm_sinr_db,chirp_similarity\n",
    );
    let mut any_feasible = false;
    for method in methods {
        let out = args.out.join(method.name());
        match execute_method(&scenario, &system, method) {
            Ok(report) => {
                export_report(&report, &scenario, &out)?;
                print_summary(method, &report);
                any_feasible |= report.feasible;
                let similarity = if report.feasible {
                    match similarity_score(&scenario, &system, &report) {
                        Ok(s) => format!("{s:.6}"),
                        Err(e) => {
                            log::warn!("{}: similarity skipped: {e}", method.name());
                            String::new()
                        }
                    }
                } else {
                    String::new()
                };
                let min_comm = report
                    .served
                    .iter()
                    .map(|&k| report.achieved_comm_sinr[k])
                    .fold(f64::INFINITY, f64::min);
                summary.push_str(&format!(
                    "{},{},{:.6},{:.6},{},{},{}\n",
                    method.name(),
                    if report.feasible { "feasible" } else { "infeasible" },
                    report.power_split.0,
                    report.power_split.1,
                    if report.achieved_radar_sinr_min > 0.0 {
                        format!("{:.4}", dfrc::to_db(report.achieved_radar_sinr_min))
                    } else {
                        String::new()
                    },
                    if min_comm.is_finite() && min_comm > 0.0 {
                        format!("{:.4}", dfrc::to_db(min_comm))
                    } else {
                        String::new()
                    },
                    similarity,
                ));
            }
            Err(e) => {
                // one failing member must not sink the comparison
                eprintln!("{} failed: {e}", method.name());
                summary.push_str(&format!("{},error,,,,,\n", method.name()));
            }
        }
    }
    write_text(&args.out.join("methods_summary.csv"), &summary)?;
    Ok(if any_feasible { 0 } else { 2 })
}

/// Averaged squared ambiguity of the design at the scenario target versus
/// the pure chirp, reduced to a single radar waveform first.
fn similarity_score(
    scenario: &Scenario,
    system: &SystemModel,
    report: &DesignReport,
) -> Result<f64> {
    let wf = &scenario.waveform;
    let chirp = lfm_chirp(
        wf.chirp_duration_s,
        wf.chirp_f_start_hz,
        wf.chirp_f_end_hz,
        wf.sample_rate_hz,
    )?;
    let delays = wf.delays();
    let dopplers = wf.dopplers_hz();
    let reference = ambiguity(&chirp, &delays, &dopplers)?.map(|v| v * v);
    let precoder = if report.precoder.radar.ncols() > 1 {
        reduce_radar_waveforms(&report.precoder, 1)?
    } else {
        report.precoder.clone()
    };
    let avg = monte_carlo_ambiguity(
        &system.geometry,
        &precoder,
        wf.target_angle_deg.to_radians(),
        &chirp,
        &scenario.signaling_spec()?,
        wf.trials,
        &delays,
        &dopplers,
    )?;
    chirp_similarity(&avg, &reference)
}

fn run_ambiguity(args: &RunArgs) -> Result<u8> {
    let scenario = load_with_overrides(args)?;
    let system = scenario.system()?;
    let methods = method_list(&scenario);
    let wf = &scenario.waveform;
    let chirp = lfm_chirp(
        wf.chirp_duration_s,
        wf.chirp_f_start_hz,
        wf.chirp_f_end_hz,
        wf.sample_rate_hz,
    )?;
    let delays = wf.delays();
    let dopplers = wf.dopplers_hz();
    let reference = ambiguity(&chirp, &delays, &dopplers)?.map(|v| v * v);
    write_surface(
        &args.out.join("chirp_ambiguity.csv"),
        &reference,
        &delays,
        &dopplers,
    )?;

    let mut scores = String::from("method,chirp_similarity\n");
    let mut any_feasible = false;
    for method in methods {
        let report = execute_method(&scenario, &system, method)?;
        if !report.feasible {
            println!("{}: infeasible, no ambiguity surface", method.name());
            continue;
        }
        any_feasible = true;
        let precoder = if report.precoder.radar.ncols() > 1 {
            reduce_radar_waveforms(&report.precoder, 1)?
        } else {
            report.precoder.clone()
        };
        let avg = monte_carlo_ambiguity(
            &system.geometry,
            &precoder,
            wf.target_angle_deg.to_radians(),
            &chirp,
            &scenario.signaling_spec()?,
            wf.trials,
            &delays,
            &dopplers,
        )?;
        let score = chirp_similarity(&avg, &reference)?;
        println!("{}: chirp similarity {score:.6}", method.name());
        write_surface(
            &args.out.join(format!("{}_ambiguity.csv", method.name())),
            &avg,
            &delays,
            &dopplers,
        )?;
        scores.push_str(&format!("{},{score:.12e}\n", method.name()));
    }
    write_text(&args.out.join("similarity.csv"), &scores)?;
    Ok(if any_feasible { 0 } else { 2 })
}

fn run_sweep(args: &SweepArgs) -> Result<u8> {
    if args.values.is_empty() {
        return Err(DfrcError::Parse("sweep needs at least one value".into()));
    }
    let mut summary = String::from("value,status,radar_power_fraction,comm_power_fraction,radar_sinr_min_db\n");
    let mut any_feasible = false;
    for value in &args.values {
        let mut run = RunArgs {
            scenario: args.run.scenario.clone(),
            out: args.run.out.join(format!("{}={}", args.param, value)),
            seed: args.run.seed,
            overrides: args.run.overrides.clone(),
            trials: args.run.trials,
        };
        run.overrides.push(format!("{}={}", args.param, value));
        let scenario = load_with_overrides(&run)?;
        let system = scenario.system()?;
        let report = execute_method(&scenario, &system, scenario.design.method)?;
        export_report(&report, &scenario, &run.out)?;
        any_feasible |= report.feasible;
        summary.push_str(&format!(
            "{},{},{:.6},{:.6},{}\n",
            value,
            if report.feasible { "feasible" } else { "infeasible" },
            report.power_split.0,
            report.power_split.1,
            if report.achieved_radar_sinr_min > 0.0 {
                format!("{:.4}", dfrc::to_db(report.achieved_radar_sinr_min))
            } else {
                String::new()
            },
        ));
    }
    write_text(&args.run.out.join("sweep_summary.csv"), &summary)?;
    Ok(if any_feasible { 0 } else { 2 })
}

/// Field-debugging checks: solves the scenario once and verifies the core
/// design invariants on the result.
fn run_validate(args: &RunArgs) -> Result<u8> {
    let scenario = load_with_overrides(args)?;
    println!("scenario: ok");
    let system = scenario.system()?;

    // bound saturation for the constructed all-power radar precoder
    let bound = dfrc::link_metrics::gamma_r_max(
        &system.geometry,
        system.radar.pulse_len,
        system.radar.worst_case_input_snr,
    );
    let a = dfrc::array_model::steering(&system.geometry, system.radar.sector.angles()[0])?;
    let radar_only = nalgebra::DMatrix::from_columns(&[a]);
    let sinr = dfrc::link_metrics::radar_sinr(
        &system.geometry,
        &nalgebra::DMatrix::zeros(system.geometry.num_elements(), 0),
        &radar_only,
        system.radar.sector.angles()[0],
        system.radar.worst_case_input_snr,
        system.radar.pulse_len,
    )?;
    check(
        "bound saturation",
        ((sinr - bound) / bound).abs() <= 1e-10,
    )?;

    let report = execute_method(&scenario, &system, scenario.design.method)?;
    if !report.feasible {
        println!("design: infeasible (skipping precoder checks)");
        return Ok(2);
    }
    let powers = report.precoder.antenna_powers();
    check(
        "per-antenna power",
        powers.iter().all(|p| (p - 1.0).abs() <= 1e-6),
    )?;
    // Theorem-1 round trip on the solved covariances
    let (recovered, _) =
        dfrc::design::recover_precoders(&report.covariances, &system.nodes, None)?;
    let ok = report
        .covariances
        .node_covs
        .iter()
        .enumerate()
        .all(|(col, (k, rk))| {
            let pc = dfrc::link_metrics::comm_sinr(&recovered, col, &system.nodes[*k]).unwrap();
            let cc =
                dfrc::link_metrics::comm_sinr_cov(&report.covariances.r, rk, &system.nodes[*k])
                    .unwrap();
            let scale = pc.abs().max(cc.abs()).max(1e-12);
            (pc - cc).abs() / scale <= 1e-6
        });
    check("recovery SINR equality", ok)?;
    println!("all checks passed");
    Ok(0)
}

fn check(name: &str, ok: bool) -> Result<()> {
    if ok {
        println!("{name}: ok");
        Ok(())
    } else {
        Err(DfrcError::Domain(format!("{name}: failed")))
    }
}

/// CSV with a header row of Doppler frequencies and one row per delay.
fn write_surface(
    path: &Path,
    surface: &nalgebra::DMatrix<f64>,
    delays: &[i64],
    dopplers: &[f64],
) -> Result<()> {
    let mut text = String::from("delay");
    for f in dopplers {
        text.push_str(&format!(",{f}"));
    }
    text.push('\n');
    for (di, &d) in delays.iter().enumerate() {
        text.push_str(&d.to_string());
        for fi in 0..dopplers.len() {
            text.push_str(&format!(",{:.12e}", surface[(di, fi)]));
        }
        text.push('\n');
    }
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| DfrcError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| DfrcError::Io {
        path: path.display().to_string(),
        source,
    })
}
