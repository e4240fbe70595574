//! Post-processing of steady-state waveforms: averages, RMS, ripple, device
//! stress extraction, and conservation checks.
//!
//! Quadrature is trapezoidal on the uniform recording grid. The balance
//! checks avoid differentiating sampled signals: the volt-second integral of
//! an inductor over one period is `L * delta\_i` and the net capacitor charge
//! is `C * delta\_v`, both exact in the recorded states, so the residuals
//! measure periodicity rather than quadrature noise.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::DiodeId;
use crate::params::ConverterParams;
use crate::sim::SteadyStateResult;

/// Summary statistics of one sampled column over exactly one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodicMetrics {
    pub mean: f64,
    pub rms: f64,
    /// Peak-to-peak excursion, `max - min`.
    pub ripple_pp: f64,
    pub min: f64,
    pub max: f64,
}

/// Trapezoidal mean/RMS and extrema of a series sampled at spacing `dt`
/// covering exactly one period.
pub fn periodic_metrics(column: &[f64], dt: f64) -> Result<PeriodicMetrics> {
    if column.len() < 2 {
        return Err(Error::InvalidInput {
            message: format!(
                "periodic metrics need at least two samples, got {}",
                column.len()
            ),
        });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput {
            message: format!("dt must be finite and > 0, got {dt}"),
        });
    }
    let span = dt * (column.len() - 1) as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for pair in column.windows(2) {
        sum += 0.5 * (pair[0] + pair[1]) * dt;
        sum_sq += 0.5 * (pair[0] * pair[0] + pair[1] * pair[1]) * dt;
    }
    for &v in column {
        min = min.min(v);
        max = max.max(v);
    }
    Ok(PeriodicMetrics {
        mean: sum / span,
        rms: (sum_sq / span).sqrt(),
        ripple_pp: max - min,
        min,
        max,
    })
}

/// Peak device voltages and mean diode currents at steady state.
#[derive(Debug, Clone, Serialize)]
pub struct StressReport {
    /// Peak off-state voltage per switch, volts.
    pub switch_peak_voltage: [f64; 2],
    /// Peak reverse (blocking) voltage per diode, volts.
    pub diode_peak_reverse_voltage: [f64; 4],
    /// Mean current per diode, amperes. Includes the charge moved by
    /// mode-entry redistributions so the averages reflect the full charge
    /// transported through each device.
    pub diode_mean_current: [f64; 4],
}

/// Extracts device stress quantities from a recorded steady-state period.
pub fn stress_report(result: &SteadyStateResult) -> Result<StressReport> {
    let wf = &result.final_cycle;
    let dt = wf.dt;
    let period = result.period();
    let mut switch_peak = [0.0f64; 2];
    for (i, name) in ["vsw1", "vsw2"].iter().enumerate() {
        let col = wf.column(name)?;
        switch_peak[i] = col.iter().copied().fold(0.0f64, f64::max);
    }
    let mut diode_peak = [0.0f64; 4];
    let mut diode_mean = [0.0f64; 4];
    for diode in DiodeId::ALL {
        let i = diode.index();
        let vd = wf.column(&format!("vd{}", i + 1))?;
        // Reverse bias is a negative anode-cathode voltage.
        diode_peak[i] = vd.iter().map(|v| -v).fold(0.0f64, f64::max);
        let id = wf.column(&format!("id{}", i + 1))?;
        let m = periodic_metrics(id, dt)?;
        diode_mean[i] = m.mean + result.diode_entry_charge[i] / period;
    }
    Ok(StressReport {
        switch_peak_voltage: switch_peak,
        diode_peak_reverse_voltage: diode_peak,
        diode_mean_current: diode_mean,
    })
}

/// Normalized steady-state conservation residuals.
#[derive(Debug, Clone, Serialize)]
pub struct BalanceReport {
    /// Per-inductor volt-second residual over one period, normalized by
    /// `v_in * T`.
    pub volt_second_residual: [f64; 2],
    /// Per-capacitor net charge over one period, normalized by `i_out * T`
    /// (ordered C1..C4 then c_out when present).
    pub charge_residual: Vec<f64>,
    /// `(P_in - P_out - P_loss) / P_in` with the conduction losses embedded
    /// in the dynamics (switching transitions are not simulated).
    pub power_residual: f64,
}

impl BalanceReport {
    pub fn max_abs_residual(&self) -> f64 {
        let mut m = self.power_residual.abs();
        for r in self.volt_second_residual {
            m = m.max(r.abs());
        }
        for r in &self.charge_residual {
            m = m.max(r.abs());
        }
        m
    }
}

/// Volt-second, charge, and power balance over the recorded period.
pub fn balance_checks(
    result: &SteadyStateResult,
    params: &ConverterParams,
) -> Result<BalanceReport> {
    let wf = &result.final_cycle;
    let dt = wf.dt;
    let period = result.period();
    let last = wf.len() - 1;

    let mut volt_second = [0.0f64; 2];
    for (i, (name, l)) in [("iL1", params.l1), ("iL2", params.l2)].iter().enumerate() {
        let col = wf.column(name)?;
        volt_second[i] = *l * (col[last] - col[0]) / (params.v_in * period);
    }

    let vout = wf.column("vout")?;
    let vout_m = periodic_metrics(vout, dt)?;
    let i_out = if params.r_load.is_finite() {
        vout_m.mean / params.r_load
    } else {
        0.0
    };
    let charge_scale = if i_out > 0.0 { i_out * period } else { 1.0 };
    let mut charge = vec![];
    let caps: Vec<(&str, f64)> = vec![
        ("vC1", params.c1),
        ("vC2", params.c2),
        ("vC3", params.c3),
        ("vC4", params.c4),
    ];
    for (name, c) in caps {
        let col = wf.column(name)?;
        charge.push(c * (col[last] - col[0]) / charge_scale);
    }
    if params.c_out > 0.0 {
        let col = wf.column("vCout")?;
        charge.push(params.c_out * (col[last] - col[0]) / charge_scale);
    }

    let iin = wf.column("iin")?;
    let p_in = params.v_in * periodic_metrics(iin, dt)?.mean;
    let p_out = if params.r_load.is_finite() {
        let sq: Vec<f64> = vout.iter().map(|v| v * v / params.r_load).collect();
        periodic_metrics(&sq, dt)?.mean
    } else {
        0.0
    };
    let p_loss = embedded_conduction_loss(result, params)?;
    let power_residual = if p_in.abs() > 0.0 {
        (p_in - p_out - p_loss) / p_in
    } else {
        0.0
    };

    Ok(BalanceReport {
        volt_second_residual: volt_second,
        charge_residual: charge,
        power_residual,
    })
}

/// Conduction dissipation embedded in the simulated dynamics: winding and
/// switch resistance, capacitor ESR, and diode forward drops.
fn embedded_conduction_loss(result: &SteadyStateResult, params: &ConverterParams) -> Result<f64> {
    let wf = &result.final_cycle;
    let dt = wf.dt;
    let period = result.period();
    let pr = &params.parasitics;
    let mut p = 0.0;
    for name in ["iL1", "iL2"] {
        let m = periodic_metrics(wf.column(name)?, dt)?;
        p += pr.dcr * m.rms * m.rms;
    }
    for name in ["is1", "is2"] {
        let m = periodic_metrics(wf.column(name)?, dt)?;
        p += pr.r_ds_on * m.rms * m.rms;
    }
    let mut cap_columns = vec!["ic1", "ic2", "ic3", "ic4"];
    if params.c_out > 0.0 {
        cap_columns.push("icout");
    }
    for name in cap_columns {
        let m = periodic_metrics(wf.column(name)?, dt)?;
        p += pr.esr * m.rms * m.rms;
    }
    for diode in DiodeId::ALL {
        let i = diode.index();
        let m = periodic_metrics(wf.column(&format!("id{}", i + 1))?, dt)?;
        p += pr.v_f * (m.mean + result.diode_entry_charge[i] / period);
    }
    Ok(p)
}
