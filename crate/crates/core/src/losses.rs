//! Mass-flow loss coefficients λ and the volumetric-efficiency balance.
//!
//! Every λ is a mass rate normalised by the ideal swept rate ρ_s·N·V₂.
//! λ_sc is negative when supercharging packs extra mass into the chamber.

// field names follow the loss symbols: ṁ_Lrc, ṁ_Lve, ...
#![allow(non_snake_case)]

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::props::GasModel;
use crate::quad::gauss_cells;
use crate::traces::{Channel, CycleTrace, ValveEvents};

pub const DEFAULT_EPS_B: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassLossBreakdown {
    pub lambda_sh: f64,
    pub lambda_lk: f64,
    pub lambda_cv: f64,
    pub lambda_bf: f64,
    pub lambda_sc: f64,
    pub m_dot_Lrc: f64,
    pub m_dot_Lve: f64,
    pub m_dot_Llk: f64,
    pub m_dot_Lcv: f64,
    pub m_dot_Lbf: f64,
    pub m_dot_sc: f64,
    pub eta_v_pred: f64,
    pub eta_v_meas: f64,
}

/// λ_sh = (ρ_s − ρ_sh)/ρ_s.
pub fn lambda_suction_heating(rho_s: f64, rho_sh: f64) -> Result<f64> {
    if !(rho_s > 0.0) {
        return Err(Error::domain(format!("reference density must be positive, got {rho_s}")));
    }
    Ok((rho_s - rho_sh) / rho_s)
}

/// Gas temperature assigned to the compression chamber in the leakage law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeakTemperature {
    /// Isentrope from (p_ref, t_ref) through the local p_dt
    Isentropic { p_ref: f64, t_ref: f64 },
    /// One temperature at every angle
    Fixed(f64),
}

impl LeakTemperature {
    fn at(&self, model: &GasModel, p: f64) -> f64 {
        match *self {
            LeakTemperature::Isentropic { p_ref, t_ref } => model.isentropic_temperature(t_ref, p_ref, p),
            LeakTemperature::Fixed(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leakage {
    pub m_dot_Lrc: f64,
    pub m_dot_Lve: f64,
    pub m_dot_Llk: f64,
    pub lambda_lk: f64,
}

/// Choked mass flux per unit area at upstream (p, T): p·√(γ/(R·T)·(2/(γ+1))^((γ+1)/(γ−1))).
pub fn choked_mass_flux(model: &GasModel, p: f64, t: f64) -> f64 {
    p * (model.gamma() / (model.gas_constant() * t) * model.critical_flow_factor()).sqrt()
}

/// Roller-cylinder and vane-edge leakage out of the compression chamber.
///
/// ṁ_Lrc integrates δ_rc over [α_s, 2π − α_d] across the height H; ṁ_Lve
/// integrates δ_vc over [α_s, 2π] across the vane extension H_v(α). Both use
/// the choked nozzle flux at the local compression-chamber state.
pub fn leakage(
    trace: &CycleTrace,
    geom: &Geometry,
    model: &GasModel,
    temperature: LeakTemperature,
    rho_s: f64,
) -> Result<Leakage> {
    if geom.delta_rc < 0.0 || geom.delta_vc < 0.0 {
        return Err(Error::Config("negative clearance in leakage model".into()));
    }
    let n_rps = trace.meta.n_rps;
    let omega = trace.meta.omega;
    let step = trace.step();
    let flux = |alpha: f64| {
        let p = trace.at_leg(Channel::DischargePressure, alpha);
        choked_mass_flux(model, p, temperature.at(model, p))
    };
    let rc = gauss_cells(step, geom.alpha_s, TAU - geom.alpha_d, |a| geom.delta_rc_at(a) * flux(a));
    let ve = gauss_cells(step, geom.alpha_s, TAU, |a| geom.delta_vc_at(a) * geom.vane_extension(a) * flux(a));
    let m_dot_Lrc = n_rps * geom.h / omega * rc;
    let m_dot_Lve = n_rps / omega * ve;
    let m_dot_Llk = m_dot_Lrc + m_dot_Lve;
    Ok(Leakage {
        m_dot_Lrc,
        m_dot_Lve,
        m_dot_Llk,
        lambda_lk: m_dot_Llk / (rho_s * n_rps * geom.swept_volume()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clearance {
    pub m_dot_Lcv: f64,
    pub lambda_cv: f64,
}

/// ṁ_Lcv = N·(ρ_d − ρ₂)·V_cl, λ_cv = ṁ_Lcv/(ρ_s·N·V₂).
pub fn lambda_clearance(rho_d: f64, rho_2: f64, v_clearance: f64, v_2: f64, rho_s: f64, n_rps: f64) -> Result<Clearance> {
    if !(rho_d > 0.0 && rho_2 > 0.0 && rho_s > 0.0) {
        return Err(Error::domain("clearance loss needs positive densities"));
    }
    let m_dot_Lcv = n_rps * (rho_d - rho_2) * v_clearance;
    Ok(Clearance {
        m_dot_Lcv,
        lambda_cv: m_dot_Lcv / (rho_s * n_rps * v_2),
    })
}

/// Orifice mass flow from an upstream reservoir (ρ_d, p_d) at pressure ratio
/// r = p_down/p_d. Below the critical ratio the flow is choked.
pub fn orifice_flow(gamma: f64, area: f64, eps: f64, rho_d: f64, p_d: f64, r: f64) -> f64 {
    let g = gamma;
    if r >= 1.0 {
        return 0.0;
    }
    if r <= crate::props::critical_pressure_ratio(g) {
        eps * area * (2.0 / (g + 1.0)).powf(1.0 / (g - 1.0)) * (2.0 * g / (g + 1.0) * rho_d * p_d).sqrt()
    } else {
        let bracket = r.powf(2.0 / g) - r.powf((g + 1.0) / g);
        eps * area * (2.0 * g / (g - 1.0) * rho_d * p_d * bracket.max(0.0)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Backflow {
    pub m_dot_Lbf: f64,
    pub lambda_bf: f64,
}

/// Gas returning through a discharge valve that is still open after the vane
/// line. Only the part of the event past 2π counts: the port then faces the
/// new suction chamber at p_st(α − 2π).
#[allow(clippy::too_many_arguments)]
pub fn backflow(
    trace: &CycleTrace,
    geom: &Geometry,
    model: &GasModel,
    events: &ValveEvents,
    p_d: f64,
    rho_d: f64,
    eps_b: f64,
    rho_s: f64,
) -> Result<Backflow> {
    if !(eps_b > 0.0) {
        return Err(Error::Config(format!("flow coefficient eps_b must be positive, got {eps_b}")));
    }
    let n_rps = trace.meta.n_rps;
    let start = events.alpha_o.max(TAU);
    let integral = gauss_cells(trace.step(), start, events.alpha_c, |a| {
        let local = a - TAU;
        let p_st = trace.at(Channel::SuctionPressure, local);
        if p_d <= p_st {
            return 0.0;
        }
        let area = geom.valve_flow_area(trace.at(Channel::Lift, local));
        orifice_flow(model.gamma(), area, eps_b, rho_d, p_d, p_st / p_d)
    });
    let m_dot_Lbf = n_rps / trace.meta.omega * integral;
    Ok(Backflow {
        m_dot_Lbf,
        lambda_bf: m_dot_Lbf / (rho_s * n_rps * geom.swept_volume()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Supercharge {
    pub rho_sc: f64,
    pub m_dot_sc: f64,
    pub lambda_sc: f64,
}

/// Density gain of a charge lifted isentropically from (p_s, t_s) to p₂.
pub fn supercharge_gain(model: &GasModel, p_s: f64, t_s: f64, p_2: f64, v_2: f64, n_rps: f64) -> Result<Supercharge> {
    if !(p_2 > 0.0) {
        return Err(Error::domain(format!("end-of-suction pressure must be positive, got {p_2}")));
    }
    let rho_s = model.density(p_s, t_s)?;
    let rho_sc = model.density(p_2, model.isentropic_temperature(t_s, p_s, p_2))?;
    Ok(Supercharge {
        rho_sc,
        m_dot_sc: n_rps * (rho_sc - rho_s) * v_2,
        lambda_sc: (rho_s - rho_sc) / rho_s,
    })
}

/// Discharged-gas density at p_d on the isentrope from the suction reference state.
pub fn discharge_density(model: &GasModel, p_s: f64, t_s: f64, p_d: f64) -> Result<f64> {
    model.density(p_d, model.isentropic_temperature(t_s, p_s, p_d))
}

/// η_v_pred = 1 − Σλ and η_v_meas = ṁ_meas/(ρ_s·N·V₂).
pub fn volumetric_efficiency(lambdas: [f64; 5], m_dot_meas: f64, rho_s: f64, n_rps: f64, v_2: f64) -> (f64, f64) {
    let pred = 1.0 - lambdas.iter().sum::<f64>();
    (pred, m_dot_meas / (rho_s * n_rps * v_2))
}
