//! P-V power accounting. All terms are cycle works times N, in watts, with
//! losses positive.

#![allow(non_snake_case)]

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::props::GasModel;
use crate::traces::{Channel, CycleTrace, ValveEvents};

/// Which pressure ratio the compression-loss bracket uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompressionVariant {
    /// (p_d/p₂) with the p₂V₂ prefactor; closes the power identity exactly
    #[default]
    DischargeOverEnd,
    /// (p_d/p_s) with the p₂V₂ prefactor
    Printed,
}

/// Sign of the suction-loss integrand.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuctionSign {
    /// N·∫(p_s − p_st)dV, positive for sub-reference suction pressure
    #[default]
    Corrected,
    /// N·∫(p_st − p_s)dV
    Printed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerOptions {
    pub compression_variant: CompressionVariant,
    pub suction_sign: SuctionSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub W_ideal: f64,
    pub W_real: f64,
    pub dW_s: f64,
    pub dW_d: f64,
    pub dW_c: f64,
    pub dW_p: f64,
    pub p_2: f64,
}

impl PowerBreakdown {
    /// W_real − (W_ideal + ΣΔW), zero up to rounding with the default variant.
    pub fn identity_residual(&self) -> f64 {
        self.W_real - (self.W_ideal + self.dW_s + self.dW_d + self.dW_c + self.dW_p)
    }
}

/// Flow work ∫V dp along the isentrope from p_a to p_b for the volume `v` at p_a.
pub fn isentropic_work(gamma: f64, p_a: f64, p_b: f64, v: f64) -> f64 {
    let k = (gamma - 1.0) / gamma;
    gamma / (gamma - 1.0) * p_a * v * ((p_b / p_a).powf(k) - 1.0)
}

/// W_ideal = N·p_s·V₂·γ/(γ−1)·[(p_d/p_s)^((γ−1)/γ) − 1].
pub fn w_ideal(model: &GasModel, p_s: f64, p_d: f64, v_2: f64, n_rps: f64) -> Result<f64> {
    if !(p_s > 0.0) || !(p_d > p_s) {
        return Err(Error::domain(format!("ideal work needs p_d > p_s > 0 (p_s = {p_s}, p_d = {p_d})")));
    }
    Ok(n_rps * isentropic_work(model.gamma(), p_s, p_d, v_2))
}

/// Trapezoid of q·dV between two angles, on the trace nodes inside the span
/// plus both end points.
fn pv_trapezoid(step: f64, a: f64, b: f64, q: impl Fn(f64) -> f64, v: impl Fn(f64) -> f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut x0 = a;
    let (mut q0, mut v0) = (q(a), v(a));
    let mut k = (a / step).floor() + 1.0;
    loop {
        let x1 = (k * step).min(b);
        if x1 > x0 {
            let (q1, v1) = (q(x1), v(x1));
            sum += 0.5 * (q0 + q1) * (v1 - v0);
            x0 = x1;
            q0 = q1;
            v0 = v1;
        }
        if x1 >= b {
            break;
        }
        k += 1.0;
    }
    sum
}

/// Indicated power N·∮(p_dt − p_st)dV over the sampled cycle.
///
/// Angles may start anywhere: cell volumes come from the unwrapped chamber
/// volume, so the sum is the same for every cyclic start index.
pub fn w_real_samples(alpha: &[f64], p_st: &[f64], p_dt: &[f64], geom: &Geometry, n_rps: f64) -> f64 {
    let n = alpha.len();
    let mut sum = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        let a0 = alpha[i];
        let mut a1 = alpha[j];
        while a1 <= a0 {
            a1 += TAU;
        }
        let dv = geom.unwrapped_volume(a1) - geom.unwrapped_volume(a0);
        let q0 = p_dt[i] - p_st[i];
        let q1 = p_dt[j] - p_st[j];
        sum += 0.5 * (q0 + q1) * dv;
    }
    n_rps * sum
}

pub fn w_real_indicated(trace: &CycleTrace, geom: &Geometry, n_rps: f64) -> f64 {
    w_real_samples(&trace.alpha, &trace.p_st, &trace.p_dt, geom, n_rps)
}

/// ΔW_s over the suction span [0, 2π].
pub fn dw_suction(trace: &CycleTrace, geom: &Geometry, p_s: f64, n_rps: f64, sign: SuctionSign) -> f64 {
    let s = match sign {
        SuctionSign::Corrected => 1.0,
        SuctionSign::Printed => -1.0,
    };
    let q = |a: f64| s * (p_s - trace.at_leg(Channel::SuctionPressure, a));
    n_rps * pv_trapezoid(trace.step(), 0.0, TAU, q, |a| geom.volume_at(a))
}

/// ΔW_d = N·∫(p_dt − p_d)dV over the open valve, cut at the vane line.
pub fn dw_discharge(trace: &CycleTrace, geom: &Geometry, p_d: f64, events: &ValveEvents, n_rps: f64) -> f64 {
    let q = |a: f64| trace.at_leg(Channel::DischargePressure, a) - p_d;
    n_rps * pv_trapezoid(trace.step(), events.alpha_o, events.alpha_c.min(TAU), q, |a| geom.volume_at(a))
}

/// ΔW_p, the extra isentropic work of compressing a supercharged charge.
pub fn dw_supercharge(model: &GasModel, p_s: f64, p_2: f64, p_d: f64, v_2: f64, n_rps: f64) -> f64 {
    let g = model.gamma();
    n_rps * (isentropic_work(g, p_2, p_d, v_2) - isentropic_work(g, p_s, p_d, v_2) + (p_2 - p_s) * v_2)
}

/// ΔW_c as the residual of the real work over the other terms.
#[allow(clippy::too_many_arguments)]
pub fn dw_compression(
    model: &GasModel,
    variant: CompressionVariant,
    p_s: f64,
    p_2: f64,
    p_d: f64,
    v_2: f64,
    n_rps: f64,
    w_real: f64,
    dw_s: f64,
    dw_d: f64,
) -> f64 {
    let g = model.gamma();
    let iso = match variant {
        CompressionVariant::DischargeOverEnd => isentropic_work(g, p_2, p_d, v_2),
        // p₂V₂ prefactor on the suction-referenced ratio
        CompressionVariant::Printed => g / (g - 1.0) * p_2 * v_2 * ((p_d / p_s).powf((g - 1.0) / g) - 1.0),
    };
    w_real - (dw_s + dw_d) - n_rps * (iso + (p_2 - p_s) * v_2)
}

/// Full breakdown for one aligned trace.
pub fn power_breakdown(
    trace: &CycleTrace,
    geom: &Geometry,
    model: &GasModel,
    p_s: f64,
    p_d: f64,
    events: &ValveEvents,
    opts: PowerOptions,
) -> Result<PowerBreakdown> {
    let n = trace.meta.n_rps;
    let v2 = geom.swept_volume();
    let p_2 = trace.p_suction_end();
    let W_ideal = w_ideal(model, p_s, p_d, v2, n)?;
    let W_real = w_real_indicated(trace, geom, n);
    let dW_s = dw_suction(trace, geom, p_s, n, opts.suction_sign);
    let dW_d = dw_discharge(trace, geom, p_d, events, n);
    let dW_p = dw_supercharge(model, p_s, p_2, p_d, v2, n);
    let dW_c = dw_compression(model, opts.compression_variant, p_s, p_2, p_d, v2, n, W_real, dW_s, dW_d);
    Ok(PowerBreakdown {
        W_ideal,
        W_real,
        dW_s,
        dW_d,
        dW_c,
        dW_p,
        p_2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PvPoint {
    pub volume: f64,
    pub p: f64,
    pub leg: &'static str,
}

/// Indicator-diagram points: the suction chamber V(α) with p_st and the
/// compression chamber V₂ − V(α) with p_dt.
pub fn pv_diagram(trace: &CycleTrace, geom: &Geometry) -> Vec<PvPoint> {
    let v2 = geom.swept_volume();
    let mut out = Vec::with_capacity(2 * trace.len());
    for (a, p) in trace.alpha.iter().zip(&trace.p_st) {
        out.push(PvPoint { volume: geom.volume_at(*a), p: *p, leg: "suction" });
    }
    for (a, p) in trace.alpha.iter().zip(&trace.p_dt) {
        out.push(PvPoint { volume: v2 - geom.volume_at(*a), p: *p, leg: "compression" });
    }
    out
}
