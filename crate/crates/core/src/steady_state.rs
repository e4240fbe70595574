//! Closed-form steady-state analysis and inverse design.
//!
//! All relations here are the ideal (lossless) ones; parasitic corrections
//! live exclusively in the loss model so this module can serve as an
//! independent oracle for the simulation. Voltage gain is `4/(1-D)`, switch
//! stress `v_in/(1-D)`, diode stress twice that, and each leg carries
//! `2 i_out / (1-D)` on average.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ConverterParams;
use crate::schedule::gate_schedule;

/// Analytic operating point of the ideal converter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub v_out: f64,
    pub v_c1: f64,
    pub v_c2: f64,
    pub v_c3: f64,
    pub v_c4: f64,
    /// Switch off-state stress, volts.
    pub v_sw: f64,
    /// Diode reverse stress, volts.
    pub v_d: f64,
    pub i_out: f64,
    /// Average current per inductor, amperes.
    pub i_l_avg: f64,
    /// Ideal average input current (power balance), amperes.
    pub i_in_avg: f64,
    /// Per-inductor peak-to-peak current ripple, amperes.
    pub delta_i_l: f64,
    /// Peak-to-peak ripple of the summed input current, amperes.
    pub delta_i_in: f64,
    pub p_out: f64,
}

fn check_region(duty: f64) -> Result<()> {
    if !(duty > 0.5 && duty < 1.0) {
        return Err(Error::UnsupportedOperatingRegion {
            message: format!("three-mode operation requires 0.5 < duty < 1, got {duty}"),
        });
    }
    Ok(())
}

/// Ideal output voltage `v_in * 4 / (1 - duty)`.
pub fn output_voltage(v_in: f64, duty: f64) -> Result<f64> {
    check_region(duty)?;
    Ok(v_in * 4.0 / (1.0 - duty))
}

/// Steady capacitor voltages `(v_c1, v_c2, v_c3, v_c4)`: the inner pair sits
/// at one clamp level `v_in/(1-D)`, the outer pair at two.
pub fn capacitor_voltages(v_in: f64, duty: f64) -> Result<(f64, f64, f64, f64)> {
    check_region(duty)?;
    let u = v_in / (1.0 - duty);
    Ok((2.0 * u, u, u, 2.0 * u))
}

/// Switch off-state voltage stress `v_in / (1 - duty)`.
pub fn switch_stress(v_in: f64, duty: f64) -> Result<f64> {
    check_region(duty)?;
    Ok(v_in / (1.0 - duty))
}

/// Diode reverse voltage stress, twice the switch stress.
pub fn diode_stress(v_in: f64, duty: f64) -> Result<f64> {
    check_region(duty)?;
    Ok(2.0 * v_in / (1.0 - duty))
}

/// Average inductor current per leg, `2 i_out / (1 - duty)`.
pub fn avg_inductor_current(i_out: f64, duty: f64) -> Result<f64> {
    check_region(duty)?;
    if i_out.is_nan() || i_out < 0.0 {
        return Err(Error::InvalidInput {
            message: format!("i_out must be >= 0, got {i_out}"),
        });
    }
    Ok(2.0 * i_out / (1.0 - duty))
}

/// Peak-to-peak inductor current ripple: the volt-second integral of `v_in`
/// over the switch-on fraction, `v_in * duty / (l * f_sw)`.
pub fn inductor_ripple(v_in: f64, duty: f64, l: f64, f_sw: f64) -> Result<f64> {
    check_region(duty)?;
    if !(l > 0.0 && f_sw > 0.0) {
        return Err(Error::InvalidInput {
            message: "l and f_sw must be > 0".into(),
        });
    }
    Ok(v_in * duty / (l * f_sw))
}

/// Peak-to-peak ripple of the summed input current `i_L1 + i_L2`, from the
/// piecewise-linear superposition of the two phase-shifted triangles. Each
/// leg slews at `v_in/l` while its switch conducts and at
/// `(v_in - v_sw)/l` while clamped off.
pub fn input_ripple_estimate(params: &ConverterParams) -> Result<f64> {
    params.validate()?;
    let schedule = gate_schedule(params.duty, params.f_sw)?;
    let v_sw = switch_stress(params.v_in, params.duty)?;
    let slope = |on: bool, l: f64| {
        if on {
            params.v_in / l
        } else {
            (params.v_in - v_sw) / l
        }
    };
    // Walk the tile sequence accumulating the summed current; extrema of a
    // piecewise-linear signal sit on tile boundaries.
    let mut level = 0.0;
    let mut min = 0.0f64;
    let mut max = 0.0f64;
    for tile in &schedule.tiles {
        let (s1_on, s2_on) = match tile.mode {
            crate::schedule::Mode::I => (true, true),
            crate::schedule::Mode::II => (false, true),
            crate::schedule::Mode::III => (true, false),
        };
        let total_slope = slope(s1_on, params.l1) + slope(s2_on, params.l2);
        level += total_slope * tile.duration;
        min = min.min(level);
        max = max.max(level);
    }
    Ok(max - min)
}

/// Full analytic operating point at the configured load.
pub fn analytic_operating_point(params: &ConverterParams) -> Result<OperatingPoint> {
    params.validate()?;
    let v_out = output_voltage(params.v_in, params.duty)?;
    let (v_c1, v_c2, v_c3, v_c4) = capacitor_voltages(params.v_in, params.duty)?;
    let v_sw = switch_stress(params.v_in, params.duty)?;
    let v_d = diode_stress(params.v_in, params.duty)?;
    let i_out = if params.r_load.is_finite() {
        v_out / params.r_load
    } else {
        0.0
    };
    let i_l_avg = avg_inductor_current(i_out, params.duty)?;
    let p_out = v_out * i_out;
    let i_in_avg = p_out / params.v_in;
    let delta_i_l = inductor_ripple(params.v_in, params.duty, params.l1, params.f_sw)?;
    let delta_i_in = input_ripple_estimate(params)?;
    Ok(OperatingPoint {
        v_out,
        v_c1,
        v_c2,
        v_c3,
        v_c4,
        v_sw,
        v_d,
        i_out,
        i_l_avg,
        i_in_avg,
        delta_i_l,
        delta_i_in,
        p_out,
    })
}

/// Inverts the gain law: the duty cycle that reaches `v_out_target`.
/// Feasible targets exceed eight times the source voltage (the gain at the
/// `duty -> 0.5` edge of the three-mode region).
pub fn solve_duty(v_in: f64, v_out_target: f64) -> Result<f64> {
    if v_in.is_nan() || v_in <= 0.0 || !v_in.is_finite() {
        return Err(Error::InvalidInput {
            message: format!("v_in must be finite and > 0, got {v_in}"),
        });
    }
    if v_out_target.is_nan() || v_out_target <= 8.0 * v_in {
        return Err(Error::InfeasibleTarget {
            message: format!(
                "target {v_out_target} V needs gain {:.3}; the minimum achievable gain in three-mode operation is 8 (duty just above 0.5)",
                v_out_target / v_in
            ),
        });
    }
    Ok(1.0 - 4.0 * v_in / v_out_target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gain_law_reference_points() {
        assert_eq!(output_voltage(30.0, 0.75).unwrap(), 480.0);
        assert_eq!(output_voltage(30.0, 0.6).unwrap(), 300.0);
        assert_eq!(output_voltage(12.0, 0.75).unwrap(), 192.0);
        assert!(matches!(
            output_voltage(30.0, 0.5),
            Err(Error::UnsupportedOperatingRegion { .. })
        ));
        assert!(matches!(
            output_voltage(30.0, 1.0),
            Err(Error::UnsupportedOperatingRegion { .. })
        ));
    }

    #[test]
    fn capacitor_voltage_pattern() {
        let (c1, c2, c3, c4) = capacitor_voltages(30.0, 0.75).unwrap();
        assert_eq!((c1, c2, c3, c4), (240.0, 120.0, 120.0, 240.0));
        // Limit toward the duty = 0.5 edge.
        let (c1, c2, c3, c4) = capacitor_voltages(30.0, 0.5 + 1e-9).unwrap();
        assert!((c1 - 120.0).abs() < 1e-5);
        assert!((c2 - 60.0).abs() < 1e-6);
        assert!((c3 - 60.0).abs() < 1e-6);
        assert!((c4 - 120.0).abs() < 1e-5);
    }

    #[test]
    fn cross_identities_hold_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let v_in = rng.gen_range(1.0..200.0);
            let duty = rng.gen_range(0.5001..0.9999);
            let (c1, c2, c3, c4) = capacitor_voltages(v_in, duty).unwrap();
            let v_out = output_voltage(v_in, duty).unwrap();
            let v_sw = switch_stress(v_in, duty).unwrap();
            let v_d = diode_stress(v_in, duty).unwrap();
            assert_eq!(c1 + c4, v_out);
            assert_eq!(c2, v_sw);
            assert_eq!(c3, v_sw);
            assert_eq!(v_d, 2.0 * v_sw);
            assert_eq!(c1, 2.0 * c2);
        }
    }

    #[test]
    fn stresses_reference_points() {
        assert_eq!(switch_stress(30.0, 0.75).unwrap(), 120.0);
        assert_eq!(switch_stress(30.0, 0.875).unwrap(), 240.0);
        assert_eq!(diode_stress(30.0, 0.75).unwrap(), 240.0);
        assert!((diode_stress(10.0, 0.6).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn average_inductor_current_examples() {
        assert_eq!(avg_inductor_current(0.75, 0.75).unwrap(), 6.0);
        assert_eq!(avg_inductor_current(0.0, 0.8).unwrap(), 0.0);
        assert_eq!(avg_inductor_current(1.5, 0.75).unwrap(), 12.0);
        assert!(avg_inductor_current(-1.0, 0.75).is_err());
    }

    #[test]
    fn inductor_ripple_examples() {
        // Oracle: integrate v_in/L over the total S1-on time of the schedule.
        let schedule = gate_schedule(0.75, 100e3).unwrap();
        let occ = schedule.mode_occupancy();
        let s1_on = occ[0] + occ[2]; // Modes I and III
        let oracle = 30.0 / 120e-6 * s1_on;
        let got = inductor_ripple(30.0, 0.75, 120e-6, 100e3).unwrap();
        assert!((got - oracle).abs() < 1e-12);
        assert!((got - 1.875).abs() < 1e-12);
        assert!((inductor_ripple(30.0, 0.75, 240e-6, 100e3).unwrap() - 0.9375).abs() < 1e-12);
        assert!(inductor_ripple(30.0, 0.75, 1e12, 100e3).unwrap() < 1e-13);
    }

    #[test]
    fn input_ripple_reference_value() {
        // At duty 0.75 the summed current slews at +-2 v_in/l over
        // quarter-period tiles: peak-to-peak 2*30/120e-6*2.5e-6 = 1.25 A.
        let got = input_ripple_estimate(&ConverterParams::ideal()).unwrap();
        assert!((got - 1.25).abs() < 1e-12, "got {got}");
        assert!((1.0..=2.0).contains(&got));
    }

    #[test]
    fn input_ripple_repeats_at_twice_the_switching_frequency() {
        // Equal legs at duty 0.75 give two identical sub-periods; the
        // summed-current excursion over each half period is the full ripple.
        let params = ConverterParams::ideal();
        let full = input_ripple_estimate(&params).unwrap();
        let v_sw = switch_stress(params.v_in, params.duty).unwrap();
        let on = params.v_in / params.l1;
        let off = (params.v_in - v_sw) / params.l1;
        // Half period = one Mode I tile + one off tile.
        let t_quarter = 0.25 * params.period();
        let half_excursion: f64 = (2.0 * on * t_quarter).abs();
        let half_return = ((on + off) * t_quarter).abs();
        assert!((full - half_excursion.max(half_return)).abs() < 1e-12);
    }

    #[test]
    fn operating_point_reference_design() {
        let op = analytic_operating_point(&ConverterParams::ideal()).unwrap();
        assert_eq!(op.v_out, 480.0);
        assert_eq!(op.i_out, 0.75);
        assert_eq!(op.i_l_avg, 6.0);
        assert_eq!(op.p_out, 360.0);
        assert_eq!(op.i_in_avg, 12.0);
        // Invariants.
        assert_eq!(op.v_c1 + op.v_c4, op.v_out);
        assert_eq!(op.v_d, 2.0 * op.v_sw);
        assert_eq!(op.v_c2, op.v_sw);
    }

    #[test]
    fn operating_point_no_load_limit() {
        let params = ConverterParams {
            r_load: f64::INFINITY,
            ..ConverterParams::ideal()
        };
        let op = analytic_operating_point(&params).unwrap();
        assert_eq!(op.i_out, 0.0);
        assert_eq!(op.i_l_avg, 0.0);
        assert_eq!(op.v_out, 480.0);
        assert_eq!(op.p_out, 0.0);
    }

    #[test]
    fn voltage_scaling_is_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let v_in = rng.gen_range(0.5..80.0);
            let duty = rng.gen_range(0.51..0.99);
            let k = rng.gen_range(0.1..10.0);
            let a = output_voltage(v_in, duty).unwrap();
            let b = output_voltage(k * v_in, duty).unwrap();
            assert!((b - k * a).abs() <= 1e-9 * b.abs().max(1.0));
            let s = avg_inductor_current(v_in, duty).unwrap();
            let t = avg_inductor_current(k * v_in, duty).unwrap();
            assert!((t - k * s).abs() <= 1e-9 * t.abs().max(1.0));
        }
    }

    #[test]
    fn gain_is_strictly_monotone_in_duty() {
        let mut prev = output_voltage(30.0, 0.500001).unwrap();
        for k in 1..=1000 {
            let duty = 0.500001 + 0.499 * k as f64 / 1000.0;
            let v = output_voltage(30.0, duty).unwrap();
            assert!(v > prev, "gain must increase with duty (duty {duty})");
            prev = v;
        }
    }

    #[test]
    fn duty_solver_roundtrip_and_feasibility() {
        assert_eq!(solve_duty(30.0, 480.0).unwrap(), 0.75);
        assert_eq!(solve_duty(30.0, 960.0).unwrap(), 0.875);
        match solve_duty(30.0, 240.0) {
            Err(Error::InfeasibleTarget { message }) => {
                assert!(message.contains("minimum achievable gain"))
            }
            other => panic!("gain 8 must be rejected, got {other:?}"),
        }
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let v_in = rng.gen_range(1.0..100.0);
            let gain = rng.gen_range(8.0_f64..40.0).max(8.0 + 1e-9);
            let target = gain * v_in;
            let duty = solve_duty(v_in, target).unwrap();
            let back = output_voltage(v_in, duty).unwrap();
            assert!(
                (back - target).abs() <= 1e-12 * target,
                "roundtrip {back} vs {target}"
            );
        }
    }
}
