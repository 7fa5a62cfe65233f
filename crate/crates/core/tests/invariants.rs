//! Randomized checks of the pipeline's structural properties on synthetic cycles.

use std::f64::consts::TAU;

use losslab_core::losses::{leakage, volumetric_efficiency, LeakTemperature};
use losslab_core::power::w_real_samples;
use losslab_core::report::{efficiency_chain, net_effect, NetFactor};
use losslab_core::synth::LeakClearances;
use losslab_core::{
    align_phase, analyze, parse_trace, resample, synthesize, valve_events, write_trace, AlignOptions, AnalysisConfig,
    CycleTrace, GasModel, Geometry, Report, RunMeta, Scenario,
};
use proptest::prelude::*;

const P_S: f64 = 5e5;
const P_D: f64 = 2.1e6;
const T_S: f64 = 267.15;
const GRID: usize = 360;

fn model() -> GasModel {
    GasModel::r32_ideal(1.200_441_581_332_014_8).unwrap()
}

fn meta(n_rps: f64) -> RunMeta {
    RunMeta {
        n_rps,
        omega: TAU * n_rps,
        m_dot_meas: 0.0,
        w_in: 0.0,
        t_s: T_S,
        t_0: 308.15,
        t_os: T_S,
        t_a: T_S,
        t_b: T_S,
        t_c: T_S,
        l_a: 0.1,
        l_b: 0.1,
        l_c: 0.1,
        d: 0.01,
        w_shaft: None,
    }
}

prop_compose! {
    fn scenarios()(
        amp in 0.0f64..0.1,
        phase_deg in 0.0f64..40.0,
        delay_deg in 0.0f64..12.0,
        lag_deg in 0.0f64..15.0,
        leaky in any::<bool>(),
        dt in 0.0f64..15.0,
        over in 0.0f64..0.04,
        n_rps in 60.0f64..220.0,
    ) -> Scenario {
        Scenario {
            pulsation_amp: amp,
            pulsation_phase: phase_deg.to_radians(),
            valve_delay: delay_deg.to_radians(),
            valve_lag_close: lag_deg.to_radians(),
            leak_clearances: if leaky { None } else { Some(LeakClearances { delta_rc: 0.0, delta_vc: 0.0 }) },
            heating_dT: dt,
            discharge_overpressure: over,
            n_rps: Some(n_rps),
            ..Scenario::zero()
        }
    }
}

fn synth(sc: &Scenario) -> CycleTrace {
    synthesize(&Geometry::reference(), &model(), &meta(100.0), P_S, P_D, sc, GRID).unwrap()
}

fn round_trip(trace: &CycleTrace) -> CycleTrace {
    let mut csv = Vec::new();
    write_trace(trace, &mut csv).unwrap();
    align_phase(&parse_trace(csv.as_slice(), "t.csv").unwrap(), &AlignOptions::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn volume_increases_once_chamber_opens(a in 0.05f64..TAU, b in 0.05f64..TAU) {
        let g = Geometry::reference();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        let (v0, v1) = (g.chamber_volume(lo).unwrap(), g.chamber_volume(hi).unwrap());
        prop_assert!(v1 >= v0);
        if v0 > 0.0 {
            prop_assert!(v1 > v0);
        }
        prop_assert!(g.volume_rate(lo).unwrap() >= 0.0);
    }

    #[test]
    fn synthetic_cycles_pass_validation_and_align_idempotently(sc in scenarios()) {
        let t = synth(&sc);
        prop_assert!(t.validate().is_ok());
        let again = round_trip(&t);
        prop_assert_eq!(&again.p_st, &t.p_st);
        prop_assert_eq!(&again.x_vane, &t.x_vane);
        prop_assert_eq!(&again.y_p, &t.y_p);
    }

    #[test]
    fn valve_events_are_ordered(sc in scenarios()) {
        let ev = valve_events(&synth(&sc), 2e-6).unwrap();
        prop_assert!(ev.alpha_o >= 0.0 && ev.alpha_o < TAU);
        prop_assert!(ev.alpha_c > ev.alpha_o && ev.alpha_c < 2.0 * TAU);
        prop_assert_eq!(ev.delayed_closing, ev.alpha_c > TAU);
    }

    #[test]
    fn power_identity_and_report_round_trip(sc in scenarios()) {
        let t = synth(&sc);
        let cfg = AnalysisConfig::new(sc.geometry(&Geometry::reference()), model(), P_S, P_D);
        let r = analyze(&cfg, &t).unwrap().report;
        let pw = &r.power_losses;
        prop_assert!(pw.identity_residual().abs() <= 1e-12 * pw.W_real.abs());
        let m = &r.mass_losses;
        let sum = m.lambda_sh + m.lambda_lk + m.lambda_cv + m.lambda_bf + m.lambda_sc;
        prop_assert_eq!(m.eta_v_pred, 1.0 - sum);
        prop_assert!((m.eta_v_pred - m.eta_v_meas).abs() <= 0.05);
        let json = r.to_json().unwrap();
        prop_assert_eq!(Report::from_json(&json).unwrap(), r);
    }

    #[test]
    fn indicated_power_ignores_start_index(sc in scenarios(), k in 0usize..GRID) {
        let t = synth(&sc);
        let g = Geometry::reference();
        let rot = |y: &[f64]| -> Vec<f64> { (0..y.len()).map(|j| y[(j + k) % y.len()]).collect() };
        let base = w_real_samples(&t.alpha, &t.p_st, &t.p_dt, &g, 100.0);
        let rotated = w_real_samples(&rot(&t.alpha), &rot(&t.p_st), &rot(&t.p_dt), &g, 100.0);
        prop_assert!((rotated - base).abs() <= 1e-12 * base.abs());
    }

    #[test]
    fn leakage_is_linear_in_pressure_at_fixed_temperature(sc in scenarios(), c in 0.5f64..2.0) {
        let t = synth(&sc);
        let g = Geometry::reference();
        let mut scaled = t.clone();
        for p in scaled.p_dt.iter_mut() {
            *p *= c;
        }
        let temp = LeakTemperature::Fixed(300.0);
        let a = leakage(&t, &g, &model(), temp, 11.7).unwrap();
        let b = leakage(&scaled, &g, &model(), temp, 11.7).unwrap();
        prop_assert!((b.lambda_lk - c * a.lambda_lk).abs() <= 1e-12 * b.lambda_lk.abs());
    }

    #[test]
    fn resample_preserves_band_limited_means(
        coef in proptest::collection::vec(-1.0f64..1.0, 8),
        n_target in 64usize..2000,
    ) {
        let n = 3600;
        let wave = |a: f64| {
            1.0 + 0.1 * coef.iter().enumerate().map(|(i, c)| {
                let k = (i / 2 + 1) as f64;
                if i % 2 == 0 { c * (k * a).sin() } else { c * (k * a).cos() }
            }).sum::<f64>()
        };
        let y: Vec<f64> = (0..n).map(|j| wave(j as f64 * TAU / n as f64)).collect();
        let x: Vec<f64> = (0..n).map(|j| 1e-3 * (1.0 - (j as f64 * TAU / n as f64).cos())).collect();
        let t = CycleTrace::new(y.iter().map(|v| P_S * v).collect(), y.iter().map(|v| P_D * v).collect(), x, vec![0.0; n], meta(100.0)).unwrap();
        let r = resample(&t, n_target).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        prop_assert!((mean(&r.p_st) / mean(&t.p_st) - 1.0).abs() < 1e-6);
        prop_assert!((mean(&r.p_dt) / mean(&t.p_dt) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn efficiency_chain_matches_first_principles(sc in scenarios(), eta_mf in 0.5f64..0.99) {
        let t = synth(&Scenario { eta_mf, ..sc });
        let cfg = AnalysisConfig::new(sc.geometry(&Geometry::reference()), model(), P_S, P_D);
        let r = analyze(&cfg, &t).unwrap().report;
        let ch = efficiency_chain(&r.mass_losses, &r.power_losses, &r.meta.run).unwrap();
        let m_ideal = r.meta.rho_s * r.meta.run.n_rps * r.meta.V_2;
        let direct = (r.meta.run.m_dot_meas / m_ideal) * (r.power_losses.W_ideal / r.meta.run.w_in);
        prop_assert!((ch.eta_total - direct).abs() <= 1e-12 * direct);
        prop_assert!((ch.eta_mf - eta_mf).abs() < 1e-9);
        let ideal = net_effect(NetFactor::Ideal, m_ideal, 0.0, r.power_losses.W_ideal, 0.0).unwrap();
        prop_assert_eq!(ideal.rate, m_ideal / r.power_losses.W_ideal);
    }
}

#[test]
fn vane_free_volume_is_strictly_increasing() {
    let g = Geometry { b_v: 0.0, ..Geometry::reference() };
    let mut prev = 0.0;
    for j in 1..=720 {
        let v = g.chamber_volume(j as f64 * TAU / 720.0).unwrap();
        assert!(v > prev, "step {j}");
        prev = v;
    }
    let (pred, _) = volumetric_efficiency([0.01, 0.02, 0.03, 0.0, -0.05], 1.0, 1.0, 1.0, 1.0);
    assert_eq!(pred, 1.0 - (0.01 + 0.02 + 0.03 + 0.0 - 0.05));
}
