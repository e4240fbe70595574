//! Itemized loss model and efficiency analysis.
//!
//! Five categories: inductor winding (DCR), switch conduction, switch
//! switching transitions, diode forward conduction, and capacitor ESR.
//! The breakdown feeds on simulated RMS/average currents rather than
//! flat-top approximations. Switching transitions are not part of the
//! simulated dynamics, so the power-accounting gap between `P_in - P_out`
//! and the itemized total is bounded by the switching share.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{periodic_metrics, stress_report};
use crate::model::DiodeId;
use crate::params::{ConverterParams, Parasitics};
use crate::schedule::gate_schedule;
use crate::sim::{run_to_steady_state, SimConfig, SteadyStateResult};
use crate::steady_state::output_voltage;

/// Known part data usable as a parasitics source.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentLibraryEntry {
    pub part: &'static str,
    pub description: &'static str,
    /// Parasitics values implied by the part's datasheet figures; fields the
    /// part does not determine are zero.
    pub parasitics: Parasitics,
}

/// The reference build's semiconductor selections.
pub fn component_library() -> Vec<ComponentLibraryEntry> {
    vec![
        ComponentLibraryEntry {
            part: "IPA075N15N3GXKSA1",
            description: "150 V / 43 A MOSFET, 7.5 mOhm on-resistance",
            parasitics: Parasitics {
                r_ds_on: 7.5e-3,
                ..Parasitics::ideal()
            },
        },
        ComponentLibraryEntry {
            part: "40CPQ100",
            description: "100 V / 40 A Schottky pair, 0.61 V forward drop",
            parasitics: Parasitics {
                v_f: 0.61,
                ..Parasitics::ideal()
            },
        },
    ]
}

fn check_nonnegative(what: &str, values: &[f64]) -> Result<()> {
    for &v in values {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidInput {
                message: format!("{what} must be finite and >= 0, got {v}"),
            });
        }
    }
    Ok(())
}

/// Winding loss `count * i_rms^2 * dcr`.
pub fn inductor_dcr_loss(i_rms: f64, dcr: f64, count: usize) -> Result<f64> {
    check_nonnegative("inductor_dcr_loss inputs", &[i_rms, dcr])?;
    Ok(count as f64 * i_rms * i_rms * dcr)
}

/// Conduction loss of both switches, `r_ds_on * (i_s1_rms^2 + i_s2_rms^2)`.
pub fn switch_conduction_loss(r_ds_on: f64, i_s1_rms: f64, i_s2_rms: f64) -> Result<f64> {
    check_nonnegative(
        "switch_conduction_loss inputs",
        &[r_ds_on, i_s1_rms, i_s2_rms],
    )?;
    Ok(r_ds_on * (i_s1_rms * i_s1_rms + i_s2_rms * i_s2_rms))
}

/// Transition loss of one switch, `v_s * i_l_avg * (t_on + t_off) * f_sw / 2`.
pub fn switch_switching_loss(
    v_s: f64,
    i_l_avg: f64,
    t_on: f64,
    t_off: f64,
    f_sw: f64,
) -> Result<f64> {
    check_nonnegative(
        "switch_switching_loss inputs",
        &[v_s, i_l_avg, t_on, t_off, f_sw],
    )?;
    Ok(v_s * i_l_avg * (t_on + t_off) * f_sw / 2.0)
}

/// Diode forward-conduction loss `diode_count * v_f * i_d_avg`.
pub fn diode_conduction_loss(v_f: f64, i_d_avg: f64, diode_count: usize) -> Result<f64> {
    check_nonnegative("diode_conduction_loss inputs", &[v_f, i_d_avg])?;
    Ok(diode_count as f64 * v_f * i_d_avg)
}

/// Total ESR loss `sum_k i_c_rms_k^2 * esr`.
pub fn capacitor_esr_loss(i_c_rms: &[f64], esr: f64) -> Result<f64> {
    check_nonnegative("capacitor_esr_loss inputs", i_c_rms)?;
    check_nonnegative("capacitor_esr_loss esr", &[esr])?;
    Ok(i_c_rms.iter().map(|i| i * i * esr).sum())
}

/// Fraction of the total carried by each category (zeros when lossless).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossShares {
    pub inductor_dcr: f64,
    pub switch_conduction: f64,
    pub switch_switching: f64,
    pub diode: f64,
    pub capacitor_esr: f64,
}

/// Itemized losses and efficiency at one operating point.
#[derive(Debug, Clone, Serialize)]
pub struct LossReport {
    pub p_inductor_dcr: f64,
    pub p_switch_conduction: f64,
    pub p_switch_switching: f64,
    pub p_diode: f64,
    pub p_capacitor_esr: f64,
    pub p_total: f64,
    pub shares: LossShares,
    /// Simulated mean output power, watts.
    pub p_out: f64,
    /// Simulated mean input power, watts.
    pub p_in_sim: f64,
    /// `p_out / (p_out + p_total)` from the itemized categories.
    pub efficiency: f64,
    /// `p_out / p_in` from the simulated power balance (excludes switching
    /// transitions, which the dynamics do not model).
    pub efficiency_power_balance: f64,
    /// True when every parasitic mechanism is disabled; shares are reported
    /// as zeros in that case.
    pub lossless: bool,
}

/// Computes the loss breakdown from a converged steady-state result.
pub fn loss_breakdown(params: &ConverterParams, steady: &SteadyStateResult) -> Result<LossReport> {
    if !steady.converged {
        return Err(Error::NotConverged {
            cycles: steady.cycles_used,
        });
    }
    let wf = &steady.final_cycle;
    let dt = wf.dt;
    let pr = &params.parasitics;

    let i_l1 = periodic_metrics(wf.column("iL1")?, dt)?;
    let i_l2 = periodic_metrics(wf.column("iL2")?, dt)?;
    let p_inductor_dcr =
        inductor_dcr_loss(i_l1.rms, pr.dcr, 1)? + inductor_dcr_loss(i_l2.rms, pr.dcr, 1)?;

    let i_s1 = periodic_metrics(wf.column("is1")?, dt)?;
    let i_s2 = periodic_metrics(wf.column("is2")?, dt)?;
    let p_switch_conduction = switch_conduction_loss(pr.r_ds_on, i_s1.rms, i_s2.rms)?;

    let stress = stress_report(steady)?;
    let p_switch_switching = switch_switching_loss(
        stress.switch_peak_voltage[0],
        i_l1.mean.abs(),
        pr.t_on,
        pr.t_off,
        params.f_sw,
    )? + switch_switching_loss(
        stress.switch_peak_voltage[1],
        i_l2.mean.abs(),
        pr.t_on,
        pr.t_off,
        params.f_sw,
    )?;

    let p_diode: f64 = DiodeId::ALL
        .iter()
        .map(|d| diode_conduction_loss(pr.v_f, stress.diode_mean_current[d.index()].max(0.0), 1))
        .sum::<Result<f64>>()?;

    let mut cap_columns = vec!["ic1", "ic2", "ic3", "ic4"];
    if params.c_out > 0.0 {
        cap_columns.push("icout");
    }
    let cap_rms: Vec<f64> = cap_columns
        .iter()
        .map(|n| periodic_metrics(wf.column(n)?, dt).map(|m| m.rms))
        .collect::<Result<_>>()?;
    let p_capacitor_esr = capacitor_esr_loss(&cap_rms, pr.esr)?;

    let p_total =
        p_inductor_dcr + p_switch_conduction + p_switch_switching + p_diode + p_capacitor_esr;

    let vout = wf.column("vout")?;
    let p_out = if params.r_load.is_finite() {
        let inst: Vec<f64> = vout.iter().map(|v| v * v / params.r_load).collect();
        periodic_metrics(&inst, dt)?.mean
    } else {
        0.0
    };
    let p_in_sim = params.v_in * periodic_metrics(wf.column("iin")?, dt)?.mean;

    let lossless = p_total == 0.0;
    let shares = if lossless {
        LossShares {
            inductor_dcr: 0.0,
            switch_conduction: 0.0,
            switch_switching: 0.0,
            diode: 0.0,
            capacitor_esr: 0.0,
        }
    } else {
        LossShares {
            inductor_dcr: p_inductor_dcr / p_total,
            switch_conduction: p_switch_conduction / p_total,
            switch_switching: p_switch_switching / p_total,
            diode: p_diode / p_total,
            capacitor_esr: p_capacitor_esr / p_total,
        }
    };
    let efficiency = if p_out + p_total > 0.0 {
        p_out / (p_out + p_total)
    } else {
        1.0
    };
    let efficiency_power_balance = if p_in_sim > 0.0 {
        p_out / p_in_sim
    } else {
        1.0
    };

    Ok(LossReport {
        p_inductor_dcr,
        p_switch_conduction,
        p_switch_switching,
        p_diode,
        p_capacitor_esr,
        p_total,
        shares,
        p_out,
        p_in_sim,
        efficiency,
        efficiency_power_balance,
        lossless,
    })
}

/// One point of an efficiency-vs-power sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    /// Requested output power, watts.
    pub p_out: f64,
    /// Itemized efficiency at that load, when the point ran.
    pub efficiency: Option<f64>,
    /// Populated when the point was skipped.
    pub warning: Option<String>,
}

/// Efficiency at each requested load, holding the duty cycle fixed and
/// realizing each power with `r_load = v_out^2 / p_out`. Points run
/// concurrently; results keep the input order. Infeasible points are
/// reported with a warning instead of aborting the sweep.
pub fn efficiency_sweep(
    params: &ConverterParams,
    sim: &SimConfig,
    p_out_range: &[f64],
) -> Result<Vec<SweepPoint>> {
    params.validate()?;
    let v_out = output_voltage(params.v_in, params.duty)?;
    let run_point = |p: f64| -> Result<f64> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidInput {
                message: format!("output power must be finite and > 0, got {p}"),
            });
        }
        let point_params = ConverterParams {
            r_load: v_out * v_out / p,
            ..*params
        };
        let model = crate::model::build_interleaved_vmc_converter(&point_params)?;
        let schedule = gate_schedule(point_params.duty, point_params.f_sw)?;
        let steady = run_to_steady_state(&model, &schedule, &point_params, sim)?;
        if !steady.converged {
            return Err(Error::NotConverged {
                cycles: steady.cycles_used,
            });
        }
        Ok(loss_breakdown(&point_params, &steady)?.efficiency)
    };
    let mut points: Vec<Option<SweepPoint>> = vec![None; p_out_range.len()];
    std::thread::scope(|scope| {
        let handles: Vec<_> = p_out_range
            .iter()
            .map(|&p| scope.spawn(move || run_point(p)))
            .collect();
        for (slot, (handle, &p)) in points.iter_mut().zip(handles.into_iter().zip(p_out_range)) {
            *slot = Some(match handle.join().expect("sweep worker panicked") {
                Ok(eta) => SweepPoint {
                    p_out: p,
                    efficiency: Some(eta),
                    warning: None,
                },
                Err(err) => SweepPoint {
                    p_out: p,
                    efficiency: None,
                    warning: Some(err.to_string()),
                },
            });
        }
    });
    Ok(points
        .into_iter()
        .map(|p| p.expect("all points filled"))
        .collect())
}
