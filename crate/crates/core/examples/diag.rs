use stepup_core::*;

fn main() {
    for (label, params) in [
        ("ideal", ConverterParams::ideal()),
        ("default", ConverterParams::default()),
    ] {
        let model = build_interleaved_vmc_converter(&params).unwrap();
        let schedule = gate_schedule(params.duty, params.f_sw).unwrap();
        let cfg = SimConfig::default();
        let steady = run_to_steady_state(&model, &schedule, &params, &cfg).unwrap();
        println!(
            "=== {label} converged={} cycles={}",
            steady.converged, steady.cycles_used
        );
        let wf = &steady.final_cycle;
        let dt = wf.dt;
        for name in ["vout", "iL1", "iL2", "iin", "vsw1", "vsw2", "is1", "is2"] {
            let m = periodic_metrics(wf.column(name).unwrap(), dt).unwrap();
            println!(
                "  {name:5} mean {:9.4} rms {:9.4} pp {:8.4} min {:9.4} max {:9.4}",
                m.mean, m.rms, m.ripple_pp, m.min, m.max
            );
        }
        let stress = stress_report(&steady).unwrap();
        println!("  sw peak {:?}", stress.switch_peak_voltage);
        println!("  vd peak {:?}", stress.diode_peak_reverse_voltage);
        println!("  id mean {:?}", stress.diode_mean_current);
        println!("  entry charge {:?}", steady.diode_entry_charge);
        let bal = balance_checks(&steady, &params).unwrap();
        println!(
            "  volt-sec {:?} power {:.3e}",
            bal.volt_second_residual, bal.power_residual
        );
        println!("  charge {:?}", bal.charge_residual);
        // interleave symmetry
        let il1 = wf.column("iL1").unwrap();
        let il2 = wf.column("iL2").unwrap();
        let n = il1.len() - 1;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let shifted = il2[(k + n / 2) % n];
            worst = worst.max((il1[k] - shifted).abs());
        }
        println!(
            "  symmetry max|iL1(t)-iL2(t-T/2)| = {worst:.5} A ({:.3}%)",
            100.0 * worst / 6.0
        );
        let report = check_diode_consistency(&model, &steady);
        println!("  consistency violations: {}", report.violations.len());
        if let Ok(loss) = loss_breakdown(&params, &steady) {
            println!(
                "  loss: dcr {:.4} swc {:.4} sws {:.4} diode {:.4} esr {:.4} total {:.4}",
                loss.p_inductor_dcr,
                loss.p_switch_conduction,
                loss.p_switch_switching,
                loss.p_diode,
                loss.p_capacitor_esr,
                loss.p_total
            );
            println!(
                "  p_out {:.3} p_in {:.3} eta_items {:.5} eta_balance {:.5}",
                loss.p_out, loss.p_in_sim, loss.efficiency, loss.efficiency_power_balance
            );
        }
    }

    // gain law across duty
    println!("=== gain law");
    for k in 0..20 {
        let duty = 0.55 + 0.35 * k as f64 / 19.0;
        let params = ConverterParams {
            duty,
            ..ConverterParams::ideal()
        };
        let model = build_interleaved_vmc_converter(&params).unwrap();
        let schedule = gate_schedule(duty, params.f_sw).unwrap();
        let steady =
            run_to_steady_state(&model, &schedule, &params, &SimConfig::default()).unwrap();
        let m = periodic_metrics(
            steady.final_cycle.column("vout").unwrap(),
            steady.final_cycle.dt,
        )
        .unwrap();
        let gain = m.mean / params.v_in;
        let ideal = 4.0 / (1.0 - duty);
        println!(
            "  D={duty:.4} conv={} gain {gain:8.4} vs {ideal:8.4} err {:+.3}%",
            steady.converged,
            100.0 * (gain - ideal) / ideal
        );
    }

    // efficiency sweep shape with defaults
    println!("=== sweep 50..360 W (defaults)");
    let params = ConverterParams::default();
    let range: Vec<f64> = (0..20)
        .map(|k| 50.0 + (360.0 - 50.0) * k as f64 / 19.0)
        .collect();
    let points = efficiency_sweep(&params, &SimConfig::default(), &range).unwrap();
    for p in &points {
        println!(
            "  p={:7.2} eta={:?} warn={:?}",
            p.p_out, p.efficiency, p.warning
        );
    }

    // settling from zero
    println!("=== settling from zero (ideal)");
    let params = ConverterParams::ideal();
    let model = build_interleaved_vmc_converter(&params).unwrap();
    let schedule = gate_schedule(params.duty, params.f_sw).unwrap();
    let cfg = SimConfig {
        initial_state: InitialState::Zero,
        ..SimConfig::default()
    };
    let steady = run_to_steady_state(&model, &schedule, &params, &cfg).unwrap();
    println!(
        "  converged={} cycles={}",
        steady.converged, steady.cycles_used
    );
}
