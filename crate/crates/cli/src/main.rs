//! Command-line front end for the converter toolkit.
//!
//! Configuration is a single flat JSON file of SI-unit numbers; every field
//! can be overridden with a flag of the same name. Each command writes its
//! results as machine-readable artifacts (`summary.json`, `waveforms.csv`,
//! `sweep.csv`) plus the summary schema, so identical configurations produce
//! byte-identical outputs.
//!
//! Exit codes: 0 success, 1 configuration/feasibility error, 2 model
//! validation failure, 3 convergence failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use stepup_core::steady_state::{analytic_operating_point, solve_duty, OperatingPoint};
use stepup_core::{
    balance_checks, build_interleaved_vmc_converter, check_diode_consistency, gate_schedule,
    loss_breakdown, periodic_metrics, run_to_steady_state, stress_report, validate_model,
    write_waveform_csv, ConverterParams, Error, InitialState, LossReport, Parasitics,
    PeriodicMetrics, SimConfig, SteadyStateResult, SweepPoint,
};

const SCHEMA: &str = include_str!("../schema.json");

const EXIT_CONFIG: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_CONVERGENCE: u8 = 3;

/// Flat run configuration: converter electricals, parasitics, and
/// simulation controls. Defaults reproduce the reference 30 V -> 480 V /
/// 360 W design.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    v_in: f64,
    duty: f64,
    f_sw: f64,
    l1: f64,
    l2: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    c4: f64,
    c_out: f64,
    r_load: f64,
    r_ds_on: f64,
    v_f: f64,
    dcr: f64,
    esr: f64,
    t_on: f64,
    t_off: f64,
    samples_per_period: usize,
    max_cycles: usize,
    steady_tol: f64,
    initial_state: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ConverterParams::default();
        let s = SimConfig::default();
        Self {
            v_in: p.v_in,
            duty: p.duty,
            f_sw: p.f_sw,
            l1: p.l1,
            l2: p.l2,
            c1: p.c1,
            c2: p.c2,
            c3: p.c3,
            c4: p.c4,
            c_out: p.c_out,
            r_load: p.r_load,
            r_ds_on: p.parasitics.r_ds_on,
            v_f: p.parasitics.v_f,
            dcr: p.parasitics.dcr,
            esr: p.parasitics.esr,
            t_on: p.parasitics.t_on,
            t_off: p.parasitics.t_off,
            samples_per_period: s.samples_per_period,
            max_cycles: s.max_cycles,
            steady_tol: s.steady_tol,
            initial_state: "preload".into(),
        }
    }
}

impl RunConfig {
    fn converter(&self) -> ConverterParams {
        ConverterParams {
            v_in: self.v_in,
            duty: self.duty,
            f_sw: self.f_sw,
            l1: self.l1,
            l2: self.l2,
            c1: self.c1,
            c2: self.c2,
            c3: self.c3,
            c4: self.c4,
            c_out: self.c_out,
            r_load: self.r_load,
            parasitics: Parasitics {
                r_ds_on: self.r_ds_on,
                v_f: self.v_f,
                dcr: self.dcr,
                esr: self.esr,
                t_on: self.t_on,
                t_off: self.t_off,
            },
        }
    }

    fn sim(&self) -> Result<SimConfig, Error> {
        let initial_state = match self.initial_state.as_str() {
            "preload" => InitialState::AnalyticPreload,
            "zero" => InitialState::Zero,
            other => {
                return Err(Error::InvalidConfig {
                    field: "initial_state",
                    message: format!("expected \"preload\" or \"zero\", got \"{other}\""),
                })
            }
        };
        Ok(SimConfig {
            samples_per_period: self.samples_per_period,
            max_cycles: self.max_cycles,
            steady_tol: self.steady_tol,
            initial_state,
        })
    }
}

/// Per-field overrides; flag names mirror the config fields.
#[derive(Args, Debug)]
struct Overrides {
    #[arg(long, global = true)]
    v_in: Option<f64>,
    #[arg(long, global = true)]
    duty: Option<f64>,
    #[arg(long, global = true)]
    f_sw: Option<f64>,
    #[arg(long, global = true)]
    l1: Option<f64>,
    #[arg(long, global = true)]
    l2: Option<f64>,
    #[arg(long, global = true)]
    c1: Option<f64>,
    #[arg(long, global = true)]
    c2: Option<f64>,
    #[arg(long, global = true)]
    c3: Option<f64>,
    #[arg(long, global = true)]
    c4: Option<f64>,
    #[arg(long, global = true)]
    c_out: Option<f64>,
    #[arg(long, global = true)]
    r_load: Option<f64>,
    #[arg(long, global = true)]
    r_ds_on: Option<f64>,
    #[arg(long, global = true)]
    v_f: Option<f64>,
    #[arg(long, global = true)]
    dcr: Option<f64>,
    #[arg(long, global = true)]
    esr: Option<f64>,
    #[arg(long, global = true)]
    t_on: Option<f64>,
    #[arg(long, global = true)]
    t_off: Option<f64>,
    #[arg(long, global = true)]
    samples_per_period: Option<usize>,
    #[arg(long, global = true)]
    max_cycles: Option<usize>,
    #[arg(long, global = true)]
    steady_tol: Option<f64>,
    /// Initial state for simulation runs: "preload" or "zero".
    #[arg(long, global = true)]
    initial_state: Option<String>,
    /// Zero every parasitic mechanism (ideal devices).
    #[arg(long, global = true)]
    ideal: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if self.ideal {
            cfg.r_ds_on = 0.0;
            cfg.v_f = 0.0;
            cfg.dcr = 0.0;
            cfg.esr = 0.0;
            cfg.t_on = 0.0;
            cfg.t_off = 0.0;
        }
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$field = v; })*
            };
        }
        set!(
            v_in,
            duty,
            f_sw,
            l1,
            l2,
            c1,
            c2,
            c3,
            c4,
            c_out,
            r_load,
            r_ds_on,
            v_f,
            dcr,
            esr,
            t_on,
            t_off,
            samples_per_period,
            max_cycles,
            steady_tol,
            initial_state
        );
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "stepup",
    version,
    about = "High step-up interleaved multiplier-boost converter: analysis, simulation, losses, design"
)]
struct Cli {
    /// JSON configuration file (flat SI-unit fields); flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form operating point (voltages, stresses, currents, ripple).
    Analyze,
    /// Run to periodic steady state; write the waveform CSV and a summary
    /// with metrics, stress, balance, and conduction-consistency reports.
    Simulate,
    /// Solve the duty cycle for a target output voltage and report device
    /// rating requirements with a margin.
    Design {
        /// Target output voltage, volts.
        #[arg(long, value_name = "VOLTS")]
        target_v_out: f64,
        /// Rating margin as a fraction (0.25 = 25%).
        #[arg(long, default_value_t = 0.25)]
        margin: f64,
    },
    /// Itemized loss breakdown and efficiency at the configured point.
    Losses,
    /// Efficiency vs output power at fixed duty; writes sweep.csv.
    Sweep {
        /// Lowest output power, watts.
        #[arg(long, default_value_t = 50.0)]
        p_min: f64,
        /// Highest output power, watts.
        #[arg(long, default_value_t = 360.0)]
        p_max: f64,
        /// Number of sweep points.
        #[arg(long, default_value_t = 20)]
        points: usize,
    },
}

#[derive(Serialize)]
struct DesignRatings {
    switch_voltage: f64,
    switch_current: f64,
    diode_voltage: f64,
    diode_current: f64,
}

#[derive(Serialize)]
struct DesignReport {
    target_v_out: f64,
    solved_duty: f64,
    margin: f64,
    ratings: DesignRatings,
}

#[derive(Serialize)]
struct ConsistencySummary {
    violation_count: usize,
    samples_checked: usize,
    first_violations: Vec<stepup_core::sim::ConsistencyViolation>,
}

#[derive(Serialize)]
struct SimulationSummary {
    converged: bool,
    cycles_used: usize,
    metrics: BTreeMap<String, PeriodicMetrics>,
    stress: stepup_core::StressReport,
    balance: stepup_core::BalanceReport,
    consistency: ConsistencySummary,
}

#[derive(Serialize)]
struct SweepSummary {
    points: Vec<SweepPoint>,
}

/// The single summary document every command emits.
#[derive(Serialize)]
struct Summary {
    command: &'static str,
    config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    analysis: Option<OperatingPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    design: Option<DesignReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulation: Option<SimulationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    losses: Option<LossReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepSummary>,
}

impl Summary {
    fn new(command: &'static str, config: RunConfig) -> Self {
        Self {
            command,
            config,
            analysis: None,
            design: None,
            simulation: None,
            losses: None,
            sweep: None,
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::InvalidConfig { field, .. } if *field == "model" => EXIT_VALIDATION,
            Error::NotConverged { .. } => EXIT_CONVERGENCE,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Self::config(format!("i/o error: {err}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::config(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                Failure::config(format!("cannot parse config {}: {e}", path.display()))
            })?
        }
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    Ok(cfg)
}

fn write_json(path: &std::path::Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::config(format!("serialization: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn emit(out_dir: &std::path::Path, summary: &Summary) -> Result<(), Failure> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("schema.json"), SCHEMA)?;
    write_json(&out_dir.join("summary.json"), summary)?;
    Ok(())
}

/// Builds the model, schedule, and a converged-or-not steady state.
fn run_steady(
    cfg: &RunConfig,
) -> Result<
    (
        ConverterParams,
        stepup_core::SwitchedModel,
        SteadyStateResult,
    ),
    Failure,
> {
    let params = cfg.converter();
    let model = build_interleaved_vmc_converter(&params)?;
    let report = validate_model(&model);
    if !report.all_passed() {
        let details: Vec<String> = report.failures().iter().map(|c| c.detail.clone()).collect();
        return Err(Failure {
            code: EXIT_VALIDATION,
            message: format!("model validation failed: {}", details.join("; ")),
        });
    }
    let schedule = gate_schedule(params.duty, params.f_sw)?;
    let steady = run_to_steady_state(&model, &schedule, &params, &cfg.sim()?)?;
    Ok((params, model, steady))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli)?;
    let out_dir = cli.out.clone();
    match cli.command {
        Command::Analyze => {
            let params = cfg.converter();
            let op = analytic_operating_point(&params)?;
            let mut summary = Summary::new("analyze", cfg);
            summary.analysis = Some(op);
            emit(&out_dir, &summary)?;
            println!(
                "v_out {:.1} V, v_sw {:.1} V, v_d {:.1} V, i_l_avg {:.2} A",
                op.v_out, op.v_sw, op.v_d, op.i_l_avg
            );
            println!("wrote {}", out_dir.join("summary.json").display());
            Ok(())
        }
        Command::Simulate => {
            let (params, model, steady) = run_steady(&cfg)?;
            let wf = &steady.final_cycle;
            let mut metrics = BTreeMap::new();
            for name in ["vout", "iL1", "iL2", "iin", "vsw1", "vsw2"] {
                metrics.insert(name.to_string(), periodic_metrics(wf.column(name)?, wf.dt)?);
            }
            let consistency = check_diode_consistency(&model, &steady);
            let simulation = SimulationSummary {
                converged: steady.converged,
                cycles_used: steady.cycles_used,
                metrics,
                stress: stress_report(&steady)?,
                balance: balance_checks(&steady, &params)?,
                consistency: ConsistencySummary {
                    violation_count: consistency.violations.len(),
                    samples_checked: consistency.samples_checked,
                    first_violations: consistency.violations.into_iter().take(5).collect(),
                },
            };
            let converged = steady.converged;
            let cycles = steady.cycles_used;
            let mut summary = Summary::new("simulate", cfg);
            summary.simulation = Some(simulation);
            emit(&out_dir, &summary)?;
            let csv_path = out_dir.join("waveforms.csv");
            let mut file = fs::File::create(&csv_path)?;
            write_waveform_csv(&mut file, wf)
                .map_err(|e| Failure::config(format!("csv write: {e}")))?;
            file.flush()?;
            println!(
                "wrote {} and {}",
                out_dir.join("summary.json").display(),
                csv_path.display()
            );
            if !converged {
                return Err(Failure {
                    code: EXIT_CONVERGENCE,
                    message: format!(
                        "did not reach steady state within {cycles} cycles (artifacts written)"
                    ),
                });
            }
            Ok(())
        }
        Command::Design {
            target_v_out,
            margin,
        } => {
            if !(margin.is_finite() && (0.0..10.0).contains(&margin)) {
                return Err(Failure::config(format!(
                    "margin must lie in [0, 10), got {margin}"
                )));
            }
            let duty = solve_duty(cfg.v_in, target_v_out)?;
            let mut design_cfg = cfg.clone();
            design_cfg.duty = duty;
            let params = design_cfg.converter();
            let op = analytic_operating_point(&params)?;
            // Peak leg current bounds every semiconductor branch current in
            // this topology, so it sizes both device ratings.
            let i_peak = op.i_l_avg + op.delta_i_l / 2.0;
            let ratings = DesignRatings {
                switch_voltage: op.v_sw * (1.0 + margin),
                switch_current: i_peak * (1.0 + margin),
                diode_voltage: op.v_d * (1.0 + margin),
                diode_current: i_peak * (1.0 + margin),
            };
            let mut summary = Summary::new("design", design_cfg);
            summary.analysis = Some(op);
            summary.design = Some(DesignReport {
                target_v_out,
                solved_duty: duty,
                margin,
                ratings,
            });
            emit(&out_dir, &summary)?;
            println!("duty {duty:.6} reaches {target_v_out} V; switch rating {:.1} V, diode rating {:.1} V", op.v_sw * (1.0 + margin), op.v_d * (1.0 + margin));
            println!("wrote {}", out_dir.join("summary.json").display());
            Ok(())
        }
        Command::Losses => {
            let (params, _model, steady) = run_steady(&cfg)?;
            if !steady.converged {
                return Err(Failure {
                    code: EXIT_CONVERGENCE,
                    message: format!(
                        "did not reach steady state within {} cycles",
                        steady.cycles_used
                    ),
                });
            }
            let report = loss_breakdown(&params, &steady)?;
            let eta = report.efficiency;
            let total = report.p_total;
            let mut summary = Summary::new("losses", cfg);
            summary.losses = Some(report);
            emit(&out_dir, &summary)?;
            println!("total loss {total:.3} W, efficiency {eta:.4}");
            println!("wrote {}", out_dir.join("summary.json").display());
            Ok(())
        }
        Command::Sweep {
            p_min,
            p_max,
            points,
        } => {
            if points < 2 || !(p_min.is_finite() && p_max.is_finite() && p_min < p_max) {
                return Err(Failure::config(format!(
                    "sweep needs p_min < p_max and at least 2 points, got [{p_min}, {p_max}] x {points}"
                )));
            }
            let params = cfg.converter();
            let range: Vec<f64> = (0..points)
                .map(|k| p_min + (p_max - p_min) * k as f64 / (points - 1) as f64)
                .collect();
            let sweep_points = stepup_core::efficiency_sweep(&params, &cfg.sim()?, &range)?;
            let csv_path = out_dir.join("sweep.csv");
            fs::create_dir_all(&out_dir)?;
            let mut csv = String::from("p_out,efficiency\n");
            for point in &sweep_points {
                match point.efficiency {
                    Some(eta) => csv.push_str(&format!("{},{}\n", point.p_out, eta)),
                    None => eprintln!(
                        "warning: skipped {} W: {}",
                        point.p_out,
                        point.warning.as_deref().unwrap_or("infeasible")
                    ),
                }
            }
            fs::write(&csv_path, csv)?;
            let mut summary = Summary::new("sweep", cfg);
            summary.sweep = Some(SweepSummary {
                points: sweep_points,
            });
            emit(&out_dir, &summary)?;
            println!(
                "wrote {} and {}",
                out_dir.join("summary.json").display(),
                csv_path.display()
            );
            Ok(())
        }
    }
}
