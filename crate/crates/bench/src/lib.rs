//! Shared workloads for the pipeline benchmarks.

use std::f64::consts::TAU;

use losslab_core::{synthesize, AnalysisConfig, CycleTrace, GasModel, Geometry, RunMeta, Scenario};

pub const P_S: f64 = 5e5;
pub const P_D: f64 = 2.1e6;
pub const T_S: f64 = 267.15;
pub const GAMMA_R32: f64 = 1.200_441_581_332_014_8;

pub fn model() -> GasModel {
    GasModel::r32_ideal(GAMMA_R32).expect("reference gamma is valid")
}

/// Operating point at `n_rps`; measured rate and shaft power are filled in by synthesis.
pub fn meta(n_rps: f64) -> RunMeta {
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

/// Pulsating, delayed-opening, leaky cycle: every loss path is active.
pub fn loaded_scenario() -> Scenario {
    Scenario {
        pulsation_amp: 0.08,
        valve_delay: 5f64.to_radians(),
        leak_clearances: None,
        heating_dT: 10.0,
        discharge_overpressure: 0.02,
        ..Scenario::zero()
    }
}

pub struct Workload {
    pub config: AnalysisConfig,
    pub trace: CycleTrace,
}

pub fn workload(n_grid: usize) -> Workload {
    let sc = loaded_scenario();
    let base = Geometry::reference();
    let trace = synthesize(&base, &model(), &meta(120.0), P_S, P_D, &sc, n_grid).expect("reference synthesis");
    Workload {
        config: AnalysisConfig::new(sc.geometry(&base), model(), P_S, P_D),
        trace,
    }
}
