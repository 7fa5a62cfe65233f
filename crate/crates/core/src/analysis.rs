//! End-to-end pipeline: one aligned cycle in, one report out.

#![allow(non_snake_case)]

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::losses::{
    backflow, discharge_density, lambda_clearance, lambda_suction_heating, leakage, supercharge_gain,
    volumetric_efficiency, LeakTemperature, MassLossBreakdown, DEFAULT_EPS_B,
};
use crate::power::{power_breakdown, pv_diagram, CompressionVariant, PowerOptions, PvPoint, SuctionSign};
use crate::props::GasModel;
use crate::report::{efficiency_chain, net_effects, Report, ReportMeta, SweepReport};
use crate::thermo::{solve_suction_chamber, suction_pipe_heating, ChamberState, SolverSettings};
use crate::traces::{align_phase, valve_events, AlignOptions, CycleTrace, RawTrace, DEFAULT_LIFT_THRESHOLD};

/// Everything the pipeline needs besides the trace.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub geometry: Geometry,
    pub model: GasModel,
    pub p_s: f64,
    pub p_d: f64,
    pub solver: SolverSettings,
    pub eps_b: f64,
    pub lift_threshold: f64,
    pub power: PowerOptions,
    /// Moving-average window on both pressure channels; 1 disables
    pub smoothing_window: usize,
    pub align: AlignOptions,
}

impl AnalysisConfig {
    pub fn new(geometry: Geometry, model: GasModel, p_s: f64, p_d: f64) -> Self {
        AnalysisConfig {
            geometry,
            model,
            p_s,
            p_d,
            solver: SolverSettings::default(),
            eps_b: DEFAULT_EPS_B,
            lift_threshold: DEFAULT_LIFT_THRESHOLD,
            power: PowerOptions::default(),
            smoothing_window: 1,
            align: AlignOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.solver.validate()?;
        if !(self.p_s > 0.0 && self.p_d > self.p_s) {
            return Err(Error::Config(format!("need p_d > p_s > 0 (p_s = {}, p_d = {})", self.p_s, self.p_d)));
        }
        if !(self.eps_b > 0.0) || !(self.lift_threshold > 0.0) {
            return Err(Error::Config(format!(
                "eps_b and lift_threshold must be positive (eps_b = {}, lift_threshold = {})",
                self.eps_b, self.lift_threshold
            )));
        }
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(Error::Config(format!("smoothing window must be odd, got {}", self.smoothing_window)));
        }
        Ok(())
    }
}

/// Report plus the per-angle diagnostics behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub report: Report,
    pub states: Vec<ChamberState>,
    #[serde(skip)]
    pub pv: Vec<PvPoint>,
}

/// Aligns, optionally smooths, then analyzes a raw trace.
pub fn analyze_raw(cfg: &AnalysisConfig, raw: &RawTrace) -> Result<Analysis> {
    let trace = align_phase(raw, &cfg.align)?;
    analyze(cfg, &trace)
}

/// Runs the full decomposition on one aligned cycle.
pub fn analyze(cfg: &AnalysisConfig, trace: &CycleTrace) -> Result<Analysis> {
    cfg.validate()?;
    trace.validate()?;
    let mut warnings = Vec::new();
    let trace = if cfg.smoothing_window > 1 {
        let mut t = trace.clone();
        t.smooth_pressures(cfg.smoothing_window)?;
        warnings.push(format!("pressure channels smoothed with a {}-point moving average", cfg.smoothing_window));
        t
    } else {
        trace.clone()
    };
    let (geom, model, meta) = (&cfg.geometry, &cfg.model, &trace.meta);
    let (p_s, p_d, n_rps) = (cfg.p_s, cfg.p_d, meta.n_rps);
    let v_2 = geom.swept_volume();

    let rho_s = model.density(p_s, meta.t_s)?;
    let m_dot_ideal = rho_s * n_rps * v_2;
    let pipe = suction_pipe_heating(meta, model, p_s, meta.m_dot_meas)?;
    let t_s3 = pipe.t_s3;
    if pipe.htc.laminar {
        warnings.push(format!(
            "suction pipe flow is laminar (Re_D = {:.1}); turbulent correlation applied outside its range",
            pipe.htc.re
        ));
    }

    let main = solve_suction_chamber(&trace, geom, model, &cfg.solver, t_s3)?;
    let mut flat = trace.clone();
    flat.p_st.iter_mut().for_each(|p| *p = p_s);
    let heated = solve_suction_chamber(&flat, geom, model, &cfg.solver, t_s3)?;
    let rho_sh = model.density(p_s, heated.t_2)?;
    if !main.residuals_monotone || !heated.residuals_monotone {
        warnings.push("density iteration residuals were not monotone at every step".into());
    }

    let events = valve_events(&trace, cfg.lift_threshold)?;
    if events.delayed_closing {
        warnings.push(format!(
            "delayed closing: discharge valve closes at {:.2} deg, past the vane line",
            events.alpha_c.to_degrees()
        ));
    }

    let lambda_sh = lambda_suction_heating(rho_s, rho_sh)?;
    let lk = leakage(&trace, geom, model, LeakTemperature::Isentropic { p_ref: p_s, t_ref: t_s3 }, rho_s)?;
    let rho_d = discharge_density(model, p_s, meta.t_s, p_d)?;
    let cv = lambda_clearance(rho_d, main.rho_2, geom.v_clearance, v_2, rho_s, n_rps)?;
    let bf = backflow(&trace, geom, model, &events, p_d, rho_d, cfg.eps_b, rho_s)?;
    let p_2 = trace.p_suction_end();
    let sc = supercharge_gain(model, p_s, meta.t_s, p_2, v_2, n_rps)?;
    let lambdas = [lambda_sh, lk.lambda_lk, cv.lambda_cv, bf.lambda_bf, sc.lambda_sc];
    let (eta_v_pred, eta_v_meas) = volumetric_efficiency(lambdas, meta.m_dot_meas, rho_s, n_rps, v_2);
    let mass = MassLossBreakdown {
        lambda_sh,
        lambda_lk: lk.lambda_lk,
        lambda_cv: cv.lambda_cv,
        lambda_bf: bf.lambda_bf,
        lambda_sc: sc.lambda_sc,
        m_dot_Lrc: lk.m_dot_Lrc,
        m_dot_Lve: lk.m_dot_Lve,
        m_dot_Llk: lk.m_dot_Llk,
        m_dot_Lcv: cv.m_dot_Lcv,
        m_dot_Lbf: bf.m_dot_Lbf,
        m_dot_sc: sc.m_dot_sc,
        eta_v_pred,
        eta_v_meas,
    };

    let power = power_breakdown(&trace, geom, model, p_s, p_d, &events, cfg.power)?;
    warnings.push(match cfg.power.suction_sign {
        SuctionSign::Corrected => "suction loss sign corrected: dW_s = N*int(p_s - p_st)dV, positive below p_s".into(),
        SuctionSign::Printed => "suction loss uses the uncorrected sign N*int(p_st - p_s)dV; dW_s is negative for a loss".into(),
    });
    warnings.push(match cfg.power.compression_variant {
        CompressionVariant::DischargeOverEnd => {
            "compression loss uses the p_d/p_2 pressure ratio, closing the power identity".to_string()
        }
        CompressionVariant::Printed => format!(
            "compression loss uses the p_d/p_s pressure ratio; power identity residual {:.6e} W",
            power.identity_residual()
        ),
    });
    warnings.push("backflow pressure ratio taken downstream over upstream, r = p_st/p_d".into());
    if cfg.solver.adiabatic {
        warnings.push("suction chamber solved adiabatically".into());
    }
    if (eta_v_pred - eta_v_meas).abs() > 0.05 {
        warnings.push(format!(
            "decomposition does not close: eta_v_pred = {eta_v_pred:.4}, eta_v_meas = {eta_v_meas:.4}"
        ));
    }

    let efficiencies = efficiency_chain(&mass, &power, meta)?;
    let effects = net_effects(&mass, &power, m_dot_ideal, meta.m_dot_meas)?;
    let max_iterations = main.max_iterations.max(heated.max_iterations);
    let report = Report {
        meta: ReportMeta {
            run: meta.clone(),
            p_s,
            p_d,
            gamma: model.gamma(),
            V_2: v_2,
            rho_s,
            rho_d,
            rho_2: main.rho_2,
            T_2: main.t_2,
            T_sh: heated.t_2,
            T_s3: t_s3,
            m_dot_ideal,
            alpha_o_deg: events.alpha_o.to_degrees(),
            alpha_c_deg: events.alpha_c.to_degrees(),
            delayed_closing: events.delayed_closing,
            grid_points: trace.len(),
            max_iterations,
        },
        mass_losses: mass,
        power_losses: power,
        efficiencies,
        net_effects: effects,
        warnings,
    };
    Ok(Analysis {
        report,
        pv: pv_diagram(&trace, geom),
        states: main.states,
    })
}

/// Analyzes every point concurrently on the current rayon pool; failures
/// become error records and never abort the sweep.
pub fn sweep(cfg: &AnalysisConfig, points: Vec<(String, Result<RawTrace>)>) -> Result<SweepReport> {
    if points.is_empty() {
        return Err(Error::Config("sweep needs at least one operating point".into()));
    }
    let results: Vec<(String, Result<Report>)> = points
        .into_par_iter()
        .map(|(label, raw)| {
            let r = raw.and_then(|raw| analyze_raw(cfg, &raw)).map(|a| a.report);
            if let Err(e) = &r {
                log::warn!("sweep point {label} failed: {e}");
            }
            (label, r)
        })
        .collect();
    Ok(SweepReport::from_results(results))
}
