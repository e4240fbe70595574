//! Acceptance suite: one test per numbered criterion, each printing a
//! PASS/FAIL line with the measured values.
//!
//! Criteria 7 and 8 encode loss-model targets that are mutually
//! inconsistent with the itemized loss formulas (see the notes on those
//! tests); they are asserted as stated rather than weakened, so their
//! failures are expected and documented.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stepup_core::model::ModeDynamics;
use stepup_core::*;

fn ideal_params() -> ConverterParams {
    ConverterParams::ideal()
}

fn steady(params: &ConverterParams, config: &SimConfig) -> SteadyStateResult {
    let model = build_interleaved_vmc_converter(params).expect("model builds");
    let schedule = gate_schedule(params.duty, params.f_sw).expect("schedule builds");
    run_to_steady_state(&model, &schedule, params, config).expect("simulation runs")
}

fn mean(result: &SteadyStateResult, column: &str) -> f64 {
    periodic_metrics(
        result.final_cycle.column(column).unwrap(),
        result.final_cycle.dt,
    )
    .unwrap()
    .mean
}

#[test]
fn criterion_01_analytic_point_exact() {
    let params = ideal_params();
    let op = steady_state::analytic_operating_point(&params).unwrap();
    assert_eq!(op.v_out, 480.0);
    assert_eq!(
        (op.v_c1, op.v_c2, op.v_c3, op.v_c4),
        (240.0, 120.0, 120.0, 240.0)
    );
    assert_eq!(op.v_sw, 120.0);
    assert_eq!(op.v_d, 240.0);
    assert_eq!(op.i_out, 0.75);
    assert_eq!(op.i_l_avg, 6.0);
    println!(
        "[criterion 1] PASS: analytic point exact (v_out {}, caps ({}, {}, {}, {}), v_sw {}, v_d {}, i_out {}, i_l {})",
        op.v_out, op.v_c1, op.v_c2, op.v_c3, op.v_c4, op.v_sw, op.v_d, op.i_out, op.i_l_avg
    );
}

#[test]
fn criterion_02_simulation_matches_analytics() {
    let params = ideal_params();
    let result = steady(&params, &SimConfig::default());
    assert!(result.converged);
    let wf = &result.final_cycle;
    let dt = wf.dt;

    let vout = mean(&result, "vout");
    assert!(
        (vout - 480.0).abs() / 480.0 < 0.02,
        "mean vout {vout} outside 2% of 480"
    );

    let il1 = periodic_metrics(wf.column("iL1").unwrap(), dt).unwrap();
    assert!(
        (il1.mean - 6.0).abs() / 6.0 < 0.03,
        "mean iL1 {} outside 3% of 6",
        il1.mean
    );
    assert!(
        (il1.ripple_pp - 1.875).abs() / 1.875 < 0.10,
        "iL1 ripple {} outside 10% of 1.875",
        il1.ripple_pp
    );

    let stress = stress_report(&result).unwrap();
    let vsw_peak = stress.switch_peak_voltage[0].max(stress.switch_peak_voltage[1]);
    assert!(
        (vsw_peak - 120.0).abs() / 120.0 < 0.02,
        "switch peak {vsw_peak} outside 2% of 120"
    );
    let vd_peak = stress
        .diode_peak_reverse_voltage
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    assert!(
        (vd_peak - 240.0).abs() / 240.0 < 0.03,
        "diode peak {vd_peak} outside 3% of 240"
    );

    let iin = periodic_metrics(wf.column("iin").unwrap(), dt).unwrap();
    assert!(
        (1.0..=2.0).contains(&iin.ripple_pp),
        "input ripple {} outside the [1.0, 2.0] A bracket",
        iin.ripple_pp
    );
    println!(
        "[criterion 2] PASS: vout {vout:.2}, iL1 {:.3} / pp {:.4}, vsw peak {vsw_peak:.2}, vd peak {vd_peak:.2}, iin pp {:.3}",
        il1.mean, il1.ripple_pp, iin.ripple_pp
    );
}

#[test]
fn criterion_03_gain_law_across_duty() {
    let mut worst = 0.0f64;
    for k in 0..20 {
        let duty = 0.55 + 0.35 * k as f64 / 19.0;
        let params = ConverterParams {
            duty,
            ..ideal_params()
        };
        let result = steady(&params, &SimConfig::default());
        assert!(result.converged, "duty {duty} did not converge");
        let gain = mean(&result, "vout") / params.v_in;
        let ideal = 4.0 / (1.0 - duty);
        let err = (gain - ideal).abs() / ideal;
        worst = worst.max(err);
        assert!(
            err < 0.02,
            "duty {duty}: simulated gain {gain} vs {ideal} off by {:.3}%",
            100.0 * err
        );
    }
    println!(
        "[criterion 3] PASS: 20 duty points in [0.55, 0.9], worst gain error {:.4}%",
        100.0 * worst
    );
}

#[test]
fn criterion_04_symmetry_and_balance() {
    let params = ideal_params();
    let result = steady(&params, &SimConfig::default());
    let wf = &result.final_cycle;

    let il1 = wf.column("iL1").unwrap();
    let il2 = wf.column("iL2").unwrap();
    let n = il1.len() - 1;
    let mut worst = 0.0f64;
    for k in 0..n {
        worst = worst.max((il1[k] - il2[(k + n / 2) % n]).abs());
    }
    let sym = worst / 6.0;
    assert!(
        sym < 0.01,
        "interleave symmetry violated: {:.4}%",
        100.0 * sym
    );

    let balance = balance_checks(&result, &params).unwrap();
    for r in balance.volt_second_residual {
        assert!(r.abs() < 1e-3, "volt-second residual {r}");
    }
    for r in &balance.charge_residual {
        assert!(r.abs() < 1e-3, "charge residual {r}");
    }
    assert!(
        balance.power_residual.abs() < 1e-3,
        "lossless power residual {}",
        balance.power_residual
    );

    let ccm_floor = il1.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(ccm_floor > 0.0, "CCM violated: min iL1 {ccm_floor}");
    println!(
        "[criterion 4] PASS: symmetry {:.4}%, max residual {:.2e}, min iL1 {ccm_floor:.3} A",
        100.0 * sym,
        balance.max_abs_residual()
    );
}

/// Buffered fixed-step RK4 on one mode's affine dynamics.
fn rk4_advance(dyn_: &ModeDynamics, x: &mut DVector<f64>, v_in: f64, dt: f64, steps: usize) {
    let c = &dyn_.b_vin * v_in + &dyn_.b_const;
    let h = dt / steps as f64;
    let n = x.len();
    let mut k1 = DVector::zeros(n);
    let mut k2 = DVector::zeros(n);
    let mut k3 = DVector::zeros(n);
    let mut k4 = DVector::zeros(n);
    let mut tmp = DVector::zeros(n);
    for _ in 0..steps {
        dyn_.a.mul_to(x, &mut k1);
        k1 += &c;
        tmp.copy_from(x);
        tmp.axpy(h / 2.0, &k1, 1.0);
        dyn_.a.mul_to(&tmp, &mut k2);
        k2 += &c;
        tmp.copy_from(x);
        tmp.axpy(h / 2.0, &k2, 1.0);
        dyn_.a.mul_to(&tmp, &mut k3);
        k3 += &c;
        tmp.copy_from(x);
        tmp.axpy(h, &k3, 1.0);
        dyn_.a.mul_to(&tmp, &mut k4);
        k4 += &c;
        x.axpy(h / 6.0, &k1, 1.0);
        x.axpy(h / 3.0, &k2, 1.0);
        x.axpy(h / 3.0, &k3, 1.0);
        x.axpy(h / 6.0, &k4, 1.0);
    }
}

#[test]
fn criterion_05_oracle_equivalence() {
    let params = ideal_params();
    let model = build_interleaved_vmc_converter(&params).unwrap();
    let schedule = gate_schedule(params.duty, params.f_sw).unwrap();
    let result = steady(&params, &SimConfig::default());

    let grid = 512usize;
    let fine = 1000usize; // reference step = (T / grid) / fine
    let dt_grid = schedule.period / grid as f64;
    let mut x_exact = DVector::from_column_slice(&result.state_snapshot);
    let mut x_ref = x_exact.clone();
    let mut max_diff = 0.0f64;
    let mut max_scale = 1.0f64;
    for tile in &schedule.tiles {
        let dyn_ = model.mode(tile.mode);
        x_exact = &dyn_.entry_projection * x_exact;
        x_ref = &dyn_.entry_projection * x_ref;
        let mut t_local = tile.start;
        loop {
            let t_next = (t_local + dt_grid).min(tile.end());
            let h = t_next - t_local;
            if h <= 0.0 {
                break;
            }
            x_exact = step_mode(&model, tile.mode, &x_exact, params.v_in, h).unwrap();
            rk4_advance(dyn_, &mut x_ref, params.v_in, h, fine);
            max_diff = max_diff.max((&x_exact - &x_ref).amax());
            max_scale = max_scale.max(x_exact.amax());
            t_local = t_next;
            if t_local >= tile.end() {
                break;
            }
        }
    }
    let rel = max_diff / max_scale;
    assert!(
        rel < 1e-6,
        "exact discretization vs dense RK4 reference: relative max-norm {rel:.3e}"
    );
    println!("[criterion 5] PASS: exact vs dense RK4 over one period, relative max-norm {rel:.3e}");
}

#[test]
fn criterion_06_design_solver_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let v_in = rng.gen_range(1.0..120.0);
        let gain = rng.gen_range(8.0_f64..40.0).max(8.0 + 1e-12);
        let target = gain * v_in;
        let duty = steady_state::solve_duty(v_in, target).unwrap();
        let back = steady_state::output_voltage(v_in, duty).unwrap();
        assert!(
            (back - target).abs() <= 1e-12 * target,
            "roundtrip failed: v_in {v_in}, target {target}, got {back}"
        );
    }
    for gain in [8.0, 7.5, 1.0] {
        assert!(
            steady_state::solve_duty(30.0, 30.0 * gain).is_err(),
            "gain {gain} must be rejected (three-mode floor is 8)"
        );
    }
    println!("[criterion 6] PASS: 100 random targets with gain in (8, 40] round-trip within 1e-12; gain <= 8 rejected");
}

/// NOTE: the clauses of this criterion cannot all hold for any parasitic
/// choice. The diode category follows the simulated diode average, which
/// equals the actual output current; with the parasitics themselves sagging
/// the output a little over 1%, that average lands near 0.741 A rather than
/// the ideal 0.75 A, so the 1.83 W +/- 1% target is missed by a fraction of
/// a percent. More fundamentally, "diodes largest" caps the itemized total
/// below 5 * 1.83 W = 9.15 W while "efficiency 96% +/- 1 pt at 360 W"
/// demands 11.1 - 18.9 W of loss. The shipped defaults honor the category
/// ordering; every clause is evaluated and the test reports the full
/// scorecard before failing.
#[test]
fn criterion_07_loss_calibration() {
    let params = ConverterParams::default();
    let config = SimConfig {
        samples_per_period: 1024,
        ..SimConfig::default()
    };
    let result = steady(&params, &config);
    let report = loss_breakdown(&params, &result).unwrap();

    let mut failures: Vec<String> = vec![];

    let diode_err = (report.p_diode - 1.83).abs() / 1.83;
    if diode_err >= 0.01 {
        failures.push(format!(
            "diode conduction loss {:.4} W misses 1.83 W +/- 1% by {:.2}% (the simulated diode \
             average is the actual output current, {:.4} A, which the parasitic sag pulls below \
             the ideal 0.75 A)",
            report.p_diode,
            100.0 * diode_err,
            report.p_diode / (4.0 * params.parasitics.v_f)
        ));
    }

    let others = [
        ("inductor_dcr", report.p_inductor_dcr),
        ("switch_conduction", report.p_switch_conduction),
        ("switch_switching", report.p_switch_switching),
        ("capacitor_esr", report.p_capacitor_esr),
    ];
    for (name, p) in others {
        if report.p_diode <= p {
            failures.push(format!(
                "diode category ({:.3} W) does not exceed {name} ({p:.3} W)",
                report.p_diode
            ));
        }
        if report.p_capacitor_esr > p {
            failures.push(format!(
                "capacitor category ({:.3} W) is not the smallest vs {name} ({p:.3} W)",
                report.p_capacitor_esr
            ));
        }
    }

    if !(0.95..=0.97).contains(&report.efficiency) {
        failures.push(format!(
            "efficiency at 360 W is {:.4}, outside 0.96 +/- 0.01 (with the diode category pinned \
             near 1.83 W and required to dominate, the itemized total cannot reach the \
             11.1-18.9 W band that 96% +/- 1 pt implies)",
            report.efficiency
        ));
    }

    println!(
        "[criterion 7] measured: diode {:.4} W, winding {:.4} W, switching {:.4} W, conduction {:.4} W, \
         ESR {:.4} W, efficiency {:.4}",
        report.p_diode,
        report.p_inductor_dcr,
        report.p_switch_switching,
        report.p_switch_conduction,
        report.p_capacitor_esr,
        report.efficiency
    );
    assert!(
        failures.is_empty(),
        "[criterion 7] FAIL (expected, see module notes):\n  - {}",
        failures.join("\n  - ")
    );
    println!("[criterion 7] PASS");
}

/// NOTE: the itemized losses have no meaningful load-independent term (the
/// only one is the ripple portion of the winding loss, about 2*dcr*dI^2/12 =
/// 0.03 W), so peak efficiency sits near sqrt(a/c) = 32 W regardless of the
/// parasitic values - below the sweep's 50 W floor. Efficiency is therefore
/// monotone decreasing on [50, 360] W and the interior-maximum clause cannot
/// be met; it is asserted as stated and fails honestly.
#[test]
fn criterion_08_efficiency_sweep_shape() {
    let params = ConverterParams::default();
    let range: Vec<f64> = (0..20)
        .map(|k| 50.0 + (360.0 - 50.0) * k as f64 / 19.0)
        .collect();
    let points = efficiency_sweep(&params, &SimConfig::default(), &range).unwrap();
    let etas: Vec<f64> = points
        .iter()
        .map(|p| p.efficiency.expect("all points feasible"))
        .collect();
    let argmax = etas
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    for k in argmax + 1..etas.len() {
        assert!(
            etas[k] <= etas[k - 1] + 1e-12,
            "efficiency must decrease past the peak"
        );
    }
    println!(
        "[criterion 8] measured: efficiency spans {:.4} (50 W) .. {:.4} (360 W), peak at index {argmax}",
        etas[0],
        etas[19]
    );
    assert!(
        argmax > 0 && argmax + 1 < etas.len(),
        "[criterion 8] FAIL (expected): the efficiency maximum sits at the {} edge of the sweep, \
         not strictly inside it. The loss model's only load-independent term is the ripple part of \
         the winding loss (~0.03 W), which puts the analytic peak near 32 W, below the sweep's 50 W \
         floor, for every parasitic choice.",
        if argmax == 0 { "low-power" } else { "high-power" }
    );
    println!("[criterion 8] PASS");
}

#[test]
fn criterion_09_settling_from_zero() {
    let params = ideal_params();
    let config = SimConfig {
        initial_state: InitialState::Zero,
        ..SimConfig::default()
    };
    let result = steady(&params, &config);
    assert!(
        result.converged,
        "cold start must converge within the cycle budget"
    );
    assert!(
        result.cycles_used <= 50_000,
        "cold start took {} cycles, budget is 50000 (0.5 s simulated)",
        result.cycles_used
    );
    println!(
        "[criterion 9] PASS: cold start converged in {} cycles ({:.3} s simulated)",
        result.cycles_used,
        result.cycles_used as f64 * params.period()
    );
}
