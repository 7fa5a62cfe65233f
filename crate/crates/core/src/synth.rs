//! Forward oracle: cycle traces with known, injected losses.
//!
//! The suction leg dips early and rises to p₂ = p_s(1 + a) at the vane line.
//! The compression leg follows the isentrope from p₂, less whatever mass the
//! roller and vane clearances leak away. The discharge valve opens a
//! configurable delay after the isentrope crosses p_d, the over-compression
//! spike decays over a raised cosine, and valve lift is a half-sine.
//! [`inject_measured_rates`] then fills in the flow and power a test rig would
//! have measured for that cycle.

#![allow(non_snake_case)]

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::losses::{choked_mass_flux, discharge_density, orifice_flow, DEFAULT_EPS_B};
use crate::power::w_real_indicated;
use crate::props::GasModel;
use crate::quad::simpson;
use crate::thermo::{heat_rate, pipe_htc, solve_suction_chamber, SolverSettings};
use crate::traces::{uniform_grid, CycleTrace, RunMeta, MIN_RESAMPLE};

/// Length of the early suction dip window.
pub const DIP_SPAN_DEG: f64 = 200.0;
/// Start of the late suction rise; it completes at 360°.
pub const RISE_START_DEG: f64 = 270.0;
/// Valve closing angle before any lag.
pub const NOMINAL_CLOSE_DEG: f64 = 350.0;
/// Span over which the opening over-compression decays.
pub const SPIKE_DECAY_DEG: f64 = 15.0;
/// Full valve lift as a fraction of the port diameter. At d/4 the curtain
/// area equals the port area.
pub const LIFT_FRACTION: f64 = 0.25;
/// Discharge-shell temperature written into synthetic metadata; the wall
/// correlation's polynomial terms vanish there.
pub const SYNTH_T_0: f64 = 308.15;

/// Internal refinement of the compression march and truth integrals.
const FINE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakClearances {
    pub delta_rc: f64,
    pub delta_vc: f64,
}

/// Standard deviation of additive Gaussian noise per channel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSigma {
    /// Both pressure channels [Pa]
    pub pressure: f64,
    pub vane: f64,
    pub lift: f64,
}

/// Loss injections of one synthetic cycle. Angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub pulsation_amp: f64,
    pub pulsation_phase: f64,
    pub valve_delay: f64,
    pub valve_lag_close: f64,
    /// Overrides the geometry clearances when set
    pub leak_clearances: Option<LeakClearances>,
    pub heating_dT: f64,
    pub discharge_overpressure: f64,
    pub noise_sigma: NoiseSigma,
    /// W_in = W_real/eta_mf
    pub eta_mf: f64,
    /// Overrides the metadata speed when set
    pub n_rps: Option<f64>,
    pub noise_seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario::zero()
    }
}

impl Scenario {
    /// No injected loss of any kind: sealed clearances, no heating, ideal valve.
    pub fn zero() -> Self {
        Scenario {
            pulsation_amp: 0.0,
            pulsation_phase: 0.0,
            valve_delay: 0.0,
            valve_lag_close: 0.0,
            leak_clearances: Some(LeakClearances { delta_rc: 0.0, delta_vc: 0.0 }),
            heating_dT: 0.0,
            discharge_overpressure: 0.0,
            noise_sigma: NoiseSigma::default(),
            eta_mf: 1.0,
            n_rps: None,
            noise_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Config(format!("scenario {what} out of range: {v}")));
        if !(0.0..1.0).contains(&self.pulsation_amp) {
            return bad("pulsation_amp", self.pulsation_amp);
        }
        if !(0.0..TAU).contains(&self.pulsation_phase) {
            return bad("pulsation_phase", self.pulsation_phase);
        }
        for (what, v) in [("valve_delay", self.valve_delay), ("valve_lag_close", self.valve_lag_close)] {
            if !(0.0..=PI / 2.0).contains(&v) {
                return bad(what, v);
            }
        }
        for (what, v) in [
            ("heating_dT", self.heating_dT),
            ("discharge_overpressure", self.discharge_overpressure),
            ("noise_sigma.pressure", self.noise_sigma.pressure),
            ("noise_sigma.vane", self.noise_sigma.vane),
            ("noise_sigma.lift", self.noise_sigma.lift),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(what, v);
            }
        }
        if let Some(l) = self.leak_clearances {
            if !(l.delta_rc >= 0.0 && l.delta_vc >= 0.0) {
                return Err(Error::Config(format!(
                    "scenario leak clearances must be >= 0 (delta_rc = {}, delta_vc = {})",
                    l.delta_rc, l.delta_vc
                )));
            }
        }
        if !(self.eta_mf > 0.0 && self.eta_mf <= 1.0) {
            return bad("eta_mf", self.eta_mf);
        }
        if let Some(n) = self.n_rps {
            if !(n > 0.0 && n.is_finite()) {
                return bad("n_rps", n);
            }
        }
        Ok(())
    }

    /// Geometry the analysis must use to see this scenario's clearances.
    pub fn geometry(&self, base: &Geometry) -> Geometry {
        let mut g = base.clone();
        if let Some(l) = self.leak_clearances {
            g.delta_rc = l.delta_rc;
            g.delta_vc = l.delta_vc;
            g.clearance_profile = None;
        }
        g
    }

    /// p_st/p_s − 1 at angle α in [0, 2π].
    pub fn pulsation(&self, alpha: f64) -> f64 {
        let a = self.pulsation_amp;
        if a == 0.0 {
            return 0.0;
        }
        let w = (alpha - self.pulsation_phase) / DIP_SPAN_DEG.to_radians();
        let dip = if (0.0..=1.0).contains(&w) { (PI * w).sin().powi(2) } else { 0.0 };
        let r0 = RISE_START_DEG.to_radians();
        let rise = if alpha <= r0 {
            0.0
        } else {
            (0.5 * PI * ((alpha - r0) / (TAU - r0)).min(1.0)).sin().powi(2)
        };
        a * (rise - dip)
    }
}

/// Quantities the synthetic cycle was built to have.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub p_2: f64,
    pub t_s3: f64,
    /// Density of the trapped charge, heated and supercharged
    pub rho_2: f64,
    pub rho_d: f64,
    /// Isentrope crossing of p_d
    pub alpha_cross: f64,
    pub alpha_o: f64,
    /// Unwrapped; past 2π when the valve lags
    pub alpha_c: f64,
    pub m_dot_trapped: f64,
    pub m_dot_Llk: f64,
    pub m_dot_Lcv: f64,
    pub m_dot_Lbf: f64,
    pub m_dot_meas: f64,
}

struct Forward {
    trace: CycleTrace,
    geom: Geometry,
    truth: Truth,
}

/// Valve lift schedule on the unwrapped angle.
struct Valve {
    alpha_o: f64,
    alpha_c: f64,
    y_max: f64,
}

impl Valve {
    fn lift(&self, alpha: f64) -> f64 {
        if alpha < self.alpha_o || alpha > self.alpha_c {
            return 0.0;
        }
        self.y_max * (PI * (alpha - self.alpha_o) / (self.alpha_c - self.alpha_o)).sin()
    }

    /// Lift seen at a trace angle in [0, 2π): the tail of a lagging event
    /// wraps onto the start of the revolution.
    fn lift_periodic(&self, alpha: f64) -> f64 {
        self.lift(alpha).max(self.lift(alpha + TAU))
    }
}

fn forward(
    geom: &Geometry,
    model: &GasModel,
    meta: &RunMeta,
    p_s: f64,
    p_d: f64,
    sc: &Scenario,
    n: usize,
) -> Result<Forward> {
    sc.validate()?;
    let geom = sc.geometry(geom);
    geom.validate()?;
    if n < MIN_RESAMPLE {
        return Err(Error::Config(format!("synthetic grid needs at least {MIN_RESAMPLE} points, got {n}")));
    }
    if !(p_s > 0.0 && p_d > p_s) {
        return Err(Error::Config(format!("synthesis needs p_d > p_s > 0 (p_s = {p_s}, p_d = {p_d})")));
    }
    let mut meta = meta.with_speed(sc.n_rps.unwrap_or(meta.n_rps));
    meta.t_0 = SYNTH_T_0;
    meta.validate()?;
    let (n_rps, omega, t_s) = (meta.n_rps, meta.omega, meta.t_s);
    let gamma = model.gamma();
    let v2 = geom.swept_volume();

    let t_s3 = meta.t_s + sc.heating_dT;
    let p_2 = p_s * (1.0 + sc.pulsation_amp);
    let rho_2 = model.density(p_2, model.isentropic_temperature(t_s3, p_s, p_2))?;
    let m_2 = rho_2 * v2;
    let leak_t = |p: f64| model.isentropic_temperature(t_s3, p_s, p);
    // Leak rate per radian of shaft angle [kg/rad].
    let leak_rate = |alpha: f64, p: f64| {
        let flux = choked_mass_flux(model, p, leak_t(p));
        let mut w = 0.0;
        if alpha >= geom.alpha_s && alpha <= TAU - geom.alpha_d {
            w += geom.h * geom.delta_rc_at(alpha);
        }
        if alpha >= geom.alpha_s {
            w += geom.delta_vc_at(alpha) * geom.vane_extension(alpha);
        }
        w * flux / omega
    };
    let compressed = |alpha: f64, m: f64| {
        let vc = v2 - geom.volume_at(alpha);
        if vc <= 0.0 {
            f64::INFINITY
        } else {
            p_2 * (m / m_2 * v2 / vc).powf(gamma)
        }
    };

    // Closed compression with leakage, Heun steps on the fine grid, up to the
    // isentrope crossing plus the opening delay.
    let nf = FINE * n;
    let hf = TAU / nf as f64;
    let mut pf = vec![0.0; nf + 1];
    let mut m = m_2;
    pf[0] = p_2;
    let mut alpha_cross = None;
    let mut opened = None;
    for j in 0..nf {
        let a0 = j as f64 * hf;
        let a1 = a0 + hf;
        let k1 = leak_rate(a0, compressed(a0, m));
        let m_pred = m - hf * k1;
        let k2 = leak_rate(a1, compressed(a1, m_pred));
        let m1 = m - 0.5 * hf * (k1 + k2);
        let (p0, p1) = (compressed(a0, m), compressed(a1, m1));
        if alpha_cross.is_none() && p1 >= p_d {
            let cross = a0 + hf * (p_d - p0) / (p1 - p0);
            alpha_cross = Some(cross);
        }
        if let Some(cross) = alpha_cross {
            let a_o = cross + sc.valve_delay;
            if a1 >= a_o {
                let frac = (a_o - a0) / hf;
                let p_peak = p0 * (p1 / p0).powf(frac.clamp(0.0, 1.0));
                opened = Some((j, a_o, p_peak));
                break;
            }
        }
        pf[j + 1] = p1;
        m = m1;
    }
    let alpha_cross = alpha_cross
        .ok_or_else(|| Error::domain("synthetic compression never reaches the discharge pressure"))?;
    let (j_open, alpha_o, p_peak) =
        opened.ok_or_else(|| Error::domain("valve delay pushes the opening past the vane line"))?;
    let alpha_c = NOMINAL_CLOSE_DEG.to_radians() + sc.valve_lag_close;
    if alpha_o >= alpha_c {
        return Err(Error::domain(format!(
            "valve would open at {:.2} deg, after closing at {:.2} deg",
            alpha_o.to_degrees(),
            alpha_c.to_degrees()
        )));
    }
    let valve = Valve {
        alpha_o,
        alpha_c,
        y_max: LIFT_FRACTION * geom.d_port,
    };
    let decay = SPIKE_DECAY_DEG.to_radians();
    let discharge = |alpha: f64| {
        let mut p = p_d * (1.0 + sc.discharge_overpressure * valve.lift(alpha) / valve.y_max);
        let s = alpha - alpha_o;
        if s < decay {
            p += (p_peak - p_d) * 0.5 * (1.0 + (PI * s / decay).cos());
        }
        p
    };
    for (j, slot) in pf.iter_mut().enumerate().skip(j_open + 1) {
        *slot = discharge(j as f64 * hf);
    }
    let p_leg = |alpha: f64| {
        if alpha >= alpha_o {
            return discharge(alpha);
        }
        let x = (alpha / hf).clamp(0.0, nf as f64);
        let j = (x.floor() as usize).min(nf - 1);
        let t = x - j as f64;
        pf[j] + t * (pf[j + 1] - pf[j])
    };

    let grid = uniform_grid(n);
    let p_st: Vec<f64> = grid.iter().map(|&a| p_s * (1.0 + sc.pulsation(a))).collect();
    let p_dt: Vec<f64> = (0..n).map(|i| pf[FINE * i]).collect();
    let x_vane: Vec<f64> = grid.iter().map(|&a| geom.vane_extension(a)).collect();
    let y_p: Vec<f64> = grid.iter().map(|&a| valve.lift_periodic(a)).collect();
    let trace = CycleTrace::new(p_st, p_dt, x_vane, y_p, meta)?;

    // Truth integrals on a fine Simpson grid, split at the kinks of the leak
    // indicator.
    let integrate = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| {
        if b <= a {
            return 0.0;
        }
        let cells = ((FINE * n) as f64 * (b - a) / TAU).ceil() as usize;
        let cells = (cells.max(2) + 1) & !1;
        let h = (b - a) / cells as f64;
        let y: Vec<f64> = (0..=cells).map(|i| f(a + i as f64 * h)).collect();
        simpson(&y, h)
    };
    let kink = TAU - geom.alpha_d;
    let leak_per_rev = integrate(geom.alpha_s, kink, &|a| leak_rate(a, p_leg(a)))
        + integrate(kink, TAU, &|a| leak_rate(a, p_leg(a)));
    let m_dot_Llk = n_rps * leak_per_rev;

    let rho_d = discharge_density(model, p_s, t_s, p_d)?;
    let m_dot_Lcv = n_rps * (rho_d - rho_2) * geom.v_clearance;
    let bf = integrate(alpha_o.max(TAU), alpha_c, &|a| {
        let p_st = p_s * (1.0 + sc.pulsation(a - TAU));
        if p_st >= p_d {
            return 0.0;
        }
        let area = geom.valve_flow_area(valve.lift(a));
        orifice_flow(gamma, area, DEFAULT_EPS_B, rho_d, p_d, p_st / p_d) / omega
    });
    let m_dot_Lbf = n_rps * bf;
    let m_dot_trapped = n_rps * rho_2 * v2;

    Ok(Forward {
        trace,
        geom,
        truth: Truth {
            p_2,
            t_s3,
            rho_2,
            rho_d,
            alpha_cross,
            alpha_o,
            alpha_c,
            m_dot_trapped,
            m_dot_Llk,
            m_dot_Lcv,
            m_dot_Lbf,
            m_dot_meas: m_dot_trapped - m_dot_Lcv - m_dot_Llk - m_dot_Lbf,
        },
    })
}

/// Ground-truth quantities of the cycle [`generate`] would build.
pub fn ground_truth(
    geom: &Geometry,
    model: &GasModel,
    meta: &RunMeta,
    p_s: f64,
    p_d: f64,
    scenario: &Scenario,
    n: usize,
) -> Result<Truth> {
    Ok(forward(geom, model, meta, p_s, p_d, scenario, n)?.truth)
}

/// Synthetic cycle on a uniform `n`-grid, with seeded noise. The metadata
/// flow and power fields are left as given; see [`inject_measured_rates`].
pub fn generate(
    geom: &Geometry,
    model: &GasModel,
    meta: &RunMeta,
    p_s: f64,
    p_d: f64,
    scenario: &Scenario,
    n: usize,
) -> Result<CycleTrace> {
    let mut trace = forward(geom, model, meta, p_s, p_d, scenario, n)?.trace;
    let s = scenario.noise_sigma;
    if s.pressure > 0.0 || s.vane > 0.0 || s.lift > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.noise_seed);
        let mut add = |v: &mut [f64], sigma: f64| {
            if sigma > 0.0 {
                let d = Normal::new(0.0, sigma).expect("finite sigma");
                v.iter_mut().for_each(|x| *x += d.sample(&mut rng));
            }
        };
        add(&mut trace.p_st, s.pressure);
        add(&mut trace.p_dt, s.pressure);
        add(&mut trace.x_vane, s.vane);
        add(&mut trace.y_p, s.lift);
        trace.y_p.iter_mut().for_each(|y| *y = y.max(0.0));
        if trace.p_st.iter().chain(&trace.p_dt).any(|&p| !(p > 0.0)) {
            return Err(Error::domain("scenario noise drives a pressure non-positive"));
        }
    }
    trace.validate()?;
    Ok(trace)
}

/// Metadata a rig would have recorded for `trace`: ṁ_meas from the trapped
/// charge less the injected leak, clearance and backflow losses; W_in from
/// the clean indicated work and `eta_mf`; pipe walls that heat the suction
/// gas by `heating_dT`; a shell temperature with zero net wall heat on a
/// flat suction stroke.
pub fn inject_measured_rates(
    trace: &CycleTrace,
    geom: &Geometry,
    model: &GasModel,
    p_s: f64,
    p_d: f64,
    scenario: &Scenario,
) -> Result<RunMeta> {
    let f = forward(geom, model, &trace.meta, p_s, p_d, scenario, trace.len())?;
    let truth = f.truth;
    let mut meta = f.trace.meta.clone();
    meta.m_dot_meas = truth.m_dot_meas;
    meta.w_in = w_real_indicated(&f.trace, &f.geom, meta.n_rps) / scenario.eta_mf;

    let t_w = if scenario.heating_dT == 0.0 {
        meta.t_s
    } else {
        let htc = pipe_htc(model, p_s, meta.t_s, truth.m_dot_meas, meta.d)?;
        let cp = model.transport(p_s, meta.t_s)?.cp;
        let ntu = htc.h_p * PI * meta.d * (meta.l_a + meta.l_b + meta.l_c) / (truth.m_dot_meas * cp);
        let e = (-ntu).exp();
        (truth.t_s3 - meta.t_s * e) / (1.0 - e)
    };
    meta.t_a = t_w;
    meta.t_b = t_w;
    meta.t_c = t_w;
    meta.t_os = neutral_shell_temperature(&f.trace, &f.geom, model, &meta, p_s, truth.t_s3)?;
    Ok(meta)
}

/// Shell temperature at which a flat suction stroke at p_s ends at `t_gas`,
/// i.e. the cylinder walls add no net heat. Seeded from the area-weighted
/// balance at the inlet state, then refined by secant steps on the chamber
/// solver's end temperature, which is close to affine in T_os.
fn neutral_shell_temperature(
    trace: &CycleTrace,
    geom: &Geometry,
    model: &GasModel,
    meta: &RunMeta,
    p_s: f64,
    t_gas: f64,
) -> Result<f64> {
    let settings = SolverSettings::default();
    let n = trace.len();
    let h = TAU / n as f64;
    let net = |t_os: f64| -> Result<f64> {
        let m = RunMeta { t_os, ..meta.clone() };
        let mut q = 0.0;
        for i in 0..n {
            q += heat_rate((i as f64 + 0.5) * h, p_s, t_gas, geom, &m, model, &settings)?;
        }
        Ok(q * h)
    };
    let q0 = net(t_gas)?;
    let q1 = net(t_gas + 1.0)?;
    if q1 == q0 {
        return Ok(t_gas);
    }
    let seed = t_gas - q0 / (q1 - q0);

    let mut flat = trace.clone();
    flat.p_st.iter_mut().for_each(|p| *p = p_s);
    let mut end = |t_os: f64| -> Result<f64> {
        flat.meta = RunMeta { t_os, ..meta.clone() };
        Ok(solve_suction_chamber(&flat, geom, model, &settings, t_gas)?.t_2 - t_gas)
    };
    let (mut x0, mut x1) = (seed, seed + 1.0);
    let (mut f0, mut f1) = (end(x0)?, end(x1)?);
    for _ in 0..SHELL_SECANT_STEPS {
        if f1 == f0 || f1.abs() < SHELL_TOL_K {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        (x0, f0) = (x1, f1);
        x1 = x2;
        f1 = end(x1)?;
    }
    Ok(x1)
}

const SHELL_SECANT_STEPS: usize = 4;
/// End-temperature mismatch worth another solver pass; 1 µK moves λ_sh by ~4e-9.
const SHELL_TOL_K: f64 = 1e-6;

/// [`generate`] followed by [`inject_measured_rates`].
pub fn synthesize(
    geom: &Geometry,
    model: &GasModel,
    meta: &RunMeta,
    p_s: f64,
    p_d: f64,
    scenario: &Scenario,
    n: usize,
) -> Result<CycleTrace> {
    let mut trace = generate(geom, model, meta, p_s, p_d, scenario, n)?;
    trace.meta = inject_measured_rates(&trace, geom, model, p_s, p_d, scenario)?;
    Ok(trace)
}

/// Speeds the lattice cycles through [Hz].
pub const LATTICE_SPEEDS: [f64; 6] = [80.0, 120.0, 140.0, 160.0, 180.0, 200.0];

/// 3 pulsation amplitudes × 3 opening delays × 2 leak levels. The tight
/// level seals both clearances; the leaky one keeps the geometry's.
pub fn lattice() -> Vec<(String, Scenario)> {
    let mut out = Vec::with_capacity(18);
    for amp in [0.0, 0.04, 0.08] {
        for delay_deg in [0.0f64, 5.0, 10.0] {
            for leaky in [false, true] {
                let i = out.len();
                let scenario = Scenario {
                    pulsation_amp: amp,
                    valve_delay: delay_deg.to_radians(),
                    leak_clearances: if leaky { None } else { Scenario::zero().leak_clearances },
                    heating_dT: 10.0,
                    discharge_overpressure: 0.02,
                    n_rps: Some(LATTICE_SPEEDS[i % LATTICE_SPEEDS.len()]),
                    noise_seed: i as u64,
                    ..Scenario::zero()
                };
                let label = format!("a{:02}_d{:02}_{}", (amp * 100.0).round(), delay_deg, if leaky { "leaky" } else { "tight" });
                out.push((label, scenario));
            }
        }
    }
    out
}
