//! Suction-line heating and the suction-chamber control-volume solver.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{hydraulic_from, Geometry};
use crate::props::GasModel;
use crate::traces::{CycleTrace, RunMeta};

pub const LAMINAR_RE: f64 = 2300.0;

/// Convection coefficient of the suction pipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipeHtc {
    /// [W/(m²K)]
    pub h_p: f64,
    pub re: f64,
    /// Re below the turbulent correlation's range
    pub laminar: bool,
}

/// h_p = 0.023·(k/D)·Re^0.8·Pr^0.4 with Re = 4ṁ/(πDμ), transport at (p, t).
pub fn pipe_htc(model: &GasModel, p: f64, t: f64, m_dot: f64, d: f64) -> Result<PipeHtc> {
    if !(m_dot >= 0.0) || !(d > 0.0) {
        return Err(Error::domain(format!("pipe flow needs m_dot >= 0 and D > 0 (m_dot = {m_dot}, D = {d})")));
    }
    let tr = model.transport(p, t)?;
    let re = 4.0 * m_dot / (PI * d * tr.mu);
    let h_p = 0.023 * (tr.k / d) * re.powf(0.8) * tr.pr.powf(0.4);
    Ok(PipeHtc {
        h_p,
        re,
        laminar: re < LAMINAR_RE,
    })
}

/// Outlet temperatures of the three suction-pipe segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipeHeating {
    pub t_s1: f64,
    pub t_s2: f64,
    pub t_s3: f64,
    /// Coefficient of the first segment, carrying the laminar flag
    pub htc: PipeHtc,
}

/// Marches the segment balances h_p·πDL·(T_w − (T_in+T_out)/2) = ṁ·cp·(T_out − T_in)
/// from the suction reference state through walls A, B, C.
pub fn suction_pipe_heating(meta: &RunMeta, model: &GasModel, p_s: f64, m_dot: f64) -> Result<PipeHeating> {
    if !(m_dot > 0.0) {
        return Err(Error::domain(format!("suction pipe heating needs m_dot > 0, got {m_dot}")));
    }
    let segments = [('A', meta.t_a, meta.l_a), ('B', meta.t_b, meta.l_b), ('C', meta.t_c, meta.l_c)];
    let mut t_in = meta.t_s;
    let mut outs = [0.0; 3];
    let mut first = None;
    for (k, (name, t_w, len)) in segments.into_iter().enumerate() {
        let htc = pipe_htc(model, p_s, t_in, m_dot, meta.d)?;
        first.get_or_insert(htc);
        let cp = model.transport(p_s, t_in)?.cp;
        let a = htc.h_p * PI * meta.d * len;
        let b = m_dot * cp;
        if b <= 0.5 * a {
            return Err(Error::SegmentBalanceSingular { segment: name });
        }
        let t_out = (a * t_w + (b - 0.5 * a) * t_in) / (b + 0.5 * a);
        outs[k] = t_out;
        t_in = t_out;
    }
    Ok(PipeHeating {
        t_s1: outs[0],
        t_s2: outs[1],
        t_s3: outs[2],
        htc: first.unwrap(),
    })
}

/// h_c = 0.025·(k/D_h)·Re^0.8·Pr^0.4·(1 + 1.77·D_h/r_ave), Re = ρ·(2ω·r1)·D_h/μ.
pub fn cylinder_htc(model: &GasModel, geom: &Geometry, alpha: f64, omega: f64, p: f64, t: f64) -> Result<f64> {
    htc_at_diameter(model, geom, geom.hydraulic_diameter(alpha)?, omega, p, t)
}

fn htc_at_diameter(model: &GasModel, geom: &Geometry, d_h: f64, omega: f64, p: f64, t: f64) -> Result<f64> {
    if d_h <= 0.0 || omega == 0.0 {
        return Ok(0.0);
    }
    let tr = model.transport(p, t)?;
    let rho = model.density(p, t)?;
    let u = 2.0 * omega.abs() * geom.r1;
    let re = rho * u * d_h / tr.mu;
    Ok(0.025 * (tr.k / d_h) * re.powf(0.8) * tr.pr.powf(0.4) * (1.0 + 1.77 * d_h / geom.r_ave()))
}

/// Empirical cylinder-wall temperature correlation, all temperatures in kelvin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallCorrelation {
    pub offset: f64,
    pub angular_span: f64,
    pub quadratic: f64,
    pub linear: f64,
    pub t_ref: f64,
}

impl Default for WallCorrelation {
    fn default() -> Self {
        WallCorrelation {
            offset: 3.5,
            angular_span: 2.0,
            quadratic: 0.0028,
            linear: 0.178,
            t_ref: 308.15,
        }
    }
}

impl WallCorrelation {
    pub fn at(&self, alpha: f64, t_os: f64, t_0: f64) -> f64 {
        let d0 = t_0 - self.t_ref;
        (t_os - self.offset) + self.angular_span * (alpha - PI) / TAU - self.quadratic * d0 * d0 + self.linear * d0
    }
}

/// T_c(α) with the default correlation constants.
pub fn wall_temperature(alpha: f64, t_os: f64, t_0: f64) -> f64 {
    WallCorrelation::default().at(alpha, t_os, t_0)
}

/// Heat conductance G [J/K] over one step and the area-weighted wall temperature it drives toward.
fn wall_exchange(
    geom: &Geometry,
    model: &GasModel,
    meta: &RunMeta,
    wall: &WallCorrelation,
    alpha: f64,
    p: f64,
    t_gas: f64,
) -> Result<(f64, f64)> {
    // one volume evaluation serves both the areas and D_h
    let alpha = Geometry::check_shaft_angle(alpha)?;
    let v = geom.volume_at(alpha);
    let areas = geom.areas_with_volume(alpha, v);
    if areas.a_c <= 0.0 {
        return Ok((0.0, meta.t_os));
    }
    let h_c = htc_at_diameter(model, geom, hydraulic_from(v, &areas), meta.omega, p, t_gas)?;
    let t_c = wall.at(alpha, meta.t_os, meta.t_0);
    let t_w = ((areas.a_o + areas.a_h) * t_c + (areas.a_p + areas.a_v) * meta.t_os) / areas.a_c;
    Ok((h_c * areas.a_c / meta.omega, t_w))
}

/// dQ/dα = (1/ω)·h_c·[A_o(T_c−T) + A_p(T_os−T) + A_h(T_c−T) + A_v(T_os−T)] [J/rad].
pub fn heat_rate(
    alpha: f64,
    p: f64,
    t_gas: f64,
    geom: &Geometry,
    meta: &RunMeta,
    model: &GasModel,
    settings: &SolverSettings,
) -> Result<f64> {
    if settings.adiabatic {
        return Ok(0.0);
    }
    let (g, t_w) = wall_exchange(geom, model, meta, &settings.wall, alpha, p, t_gas)?;
    Ok(g * (t_w - t_gas))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Relative tolerance on |ρ⁰ − ρᵐ|/ρ⁰
    pub rho_tol: f64,
    pub max_iter: usize,
    /// Zero wall heat flux
    pub adiabatic: bool,
    #[serde(default)]
    pub wall: WallCorrelation,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            rho_tol: 1e-6,
            max_iter: 50,
            adiabatic: false,
            wall: WallCorrelation::default(),
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_tol > 0.0) || self.max_iter < 1 {
            return Err(Error::Config(format!(
                "solver needs rho_tol > 0 and max_iter >= 1 (rho_tol = {}, max_iter = {})",
                self.rho_tol, self.max_iter
            )));
        }
        Ok(())
    }
}

/// Suction-chamber state at the end of one angle step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChamberState {
    pub alpha: f64,
    pub m_c: f64,
    /// Internal energy [J]
    pub u: f64,
    pub t: f64,
    pub rho: f64,
    /// Trace pressure [Pa]
    pub p: f64,
    /// Heat received since α = 0 [J]
    pub dq: f64,
    /// Density iterations spent on this step
    pub iterations: usize,
}

/// Running first-law and mass-flux totals of a march.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bookkeeping {
    pub m_in: f64,
    pub m_out: f64,
    pub heat: f64,
    pub work: f64,
    pub h_in: f64,
    pub h_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuctionSolution {
    /// One state per trace node plus the closing state at 2π
    pub states: Vec<ChamberState>,
    pub rho_2: f64,
    pub t_2: f64,
    pub p_2: f64,
    pub max_iterations: usize,
    /// Every step's density residual shrank at each iteration
    pub residuals_monotone: bool,
    pub book: Bookkeeping,
}

/// Solves T from m·u(p, T) + g·T = rhs.
fn solve_energy(model: &GasModel, p: f64, m: f64, g: f64, rhs: f64) -> Result<f64> {
    if model.is_ideal() {
        let cv = model.internal_energy(p, 1.0)?;
        return Ok(rhs / (m * cv + g));
    }
    let f = |t: f64| model.internal_energy(p, t).map(|u| m * u + g * t - rhs);
    let (mut lo, mut hi) = match model.backend() {
        crate::props::Backend::Table(tab) => tab.temperature_range(),
        crate::props::Backend::IdealGas => unreachable!(),
    };
    let flo = f(lo)?;
    if flo > 0.0 || f(hi)? < 0.0 {
        return Err(Error::OutOfTable { p, t: f64::NAN });
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Marches the suction chamber from α = 0 to 2π on the trace grid.
///
/// Pressure is prescribed by `trace.p_st`. Each step seeds ρ⁰ with the
/// previous density, sets m_j = ρ⁰·V_j, takes the mass change as inflow at
/// (p_st, `t_inlet`) or outflow at the previous chamber state, closes the first
/// law for T and repeats with ρᵐ = ρ(p_j, T) until the relative change drops
/// below `rho_tol`. The wall heat uses midpoint coefficients and the end-of-step
/// gas temperature.
pub fn solve_suction_chamber(
    trace: &CycleTrace,
    geom: &Geometry,
    model: &GasModel,
    settings: &SolverSettings,
    t_inlet: f64,
) -> Result<SuctionSolution> {
    settings.validate()?;
    let meta = &trace.meta;
    let n = trace.len();
    let step = trace.step();
    let pressure = |j: usize| if j < n { trace.p_st[j] } else { trace.p_suction_end() };

    let p0 = pressure(0);
    let mut prev = ChamberState {
        alpha: 0.0,
        m_c: 0.0,
        u: 0.0,
        t: t_inlet,
        rho: model.density(p0, t_inlet)?,
        p: p0,
        dq: 0.0,
        iterations: 0,
    };
    let mut states = Vec::with_capacity(n + 1);
    states.push(prev);
    let mut book = Bookkeeping::default();
    let mut max_iterations = 0;
    let mut residuals_monotone = true;
    let mut v_prev = 0.0;

    for j in 1..=n {
        let alpha = if j < n { trace.alpha[j] } else { TAU };
        let p = pressure(j);
        if !(p > 0.0) {
            return Err(Error::Trace(format!("non-positive suction pressure at 2π extrapolation ({p} Pa)")));
        }
        let v = geom.volume_at(alpha);
        let dv = v - v_prev;
        let p_bar = 0.5 * (prev.p + p);
        let work = -p_bar * dv;
        let h_i = model.enthalpy(p, t_inlet)?;
        let h_o = model.enthalpy(prev.p, prev.t)?;
        let (g, t_w) = if settings.adiabatic {
            (0.0, 0.0)
        } else {
            wall_exchange(geom, model, meta, &settings.wall, alpha - 0.5 * step, p_bar, prev.t)?
        };

        if v <= 0.0 {
            // chamber still sealed under the vane: nothing to solve
            prev = ChamberState {
                alpha,
                m_c: 0.0,
                u: 0.0,
                t: t_inlet,
                rho: model.density(p, t_inlet)?,
                p,
                dq: prev.dq,
                iterations: 0,
            };
            states.push(prev);
            continue;
        }
        let mut rho0 = prev.rho;
        let mut iterations = 0;
        let mut residual = f64::INFINITY;
        let accepted = loop {
            iterations += 1;
            let m = rho0 * v;
            let dm = m - prev.m_c;
            let (dm_in, dm_out) = if dm >= 0.0 { (dm, 0.0) } else { (0.0, -dm) };
            let rhs = prev.u + work + h_i * dm_in - h_o * dm_out + g * t_w;
            let t = solve_energy(model, p, m, g, rhs)?;
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::NonConvergence {
                    step: j,
                    alpha_deg: alpha.to_degrees(),
                    iterations,
                    residual: f64::INFINITY,
                });
            }
            let rho_m = model.density(p, t)?;
            let r = ((rho0 - rho_m) / rho0).abs();
            if r > residual {
                residuals_monotone = false;
            }
            residual = r;
            if residual <= settings.rho_tol {
                let dq = g * (t_w - t);
                break Some((m, dm_in, dm_out, t, dq));
            }
            if iterations >= settings.max_iter {
                break None;
            }
            rho0 = rho_m;
        };
        let Some((m, dm_in, dm_out, t, dq)) = accepted else {
            return Err(Error::NonConvergence {
                step: j,
                alpha_deg: alpha.to_degrees(),
                iterations,
                residual,
            });
        };
        let u = prev.u + dq + work + h_i * dm_in - h_o * dm_out;
        book.m_in += dm_in;
        book.m_out += dm_out;
        book.heat += dq;
        book.work += work;
        book.h_in += h_i * dm_in;
        book.h_out += h_o * dm_out;
        max_iterations = max_iterations.max(iterations);
        prev = ChamberState {
            alpha,
            m_c: m,
            u,
            t,
            rho: rho0,
            p,
            dq: prev.dq + dq,
            iterations,
        };
        states.push(prev);
        v_prev = v;
    }
    let last = *states.last().unwrap();
    Ok(SuctionSolution {
        states,
        rho_2: last.rho,
        t_2: last.t,
        p_2: last.p,
        max_iterations,
        residuals_monotone,
        book,
    })
}

/// State of a closed, adiabatic gas charge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedState {
    pub alpha: f64,
    pub volume: f64,
    pub p: f64,
    pub rho: f64,
    pub t: f64,
}

/// Compresses a fixed mass in the compression chamber V₂ − V(α) from α = 0 to `alpha_end`
/// on `n` uniform steps. Boundary work uses the trapezoidal pressure, iterated on p.
pub fn solve_closed_adiabatic(
    geom: &Geometry,
    model: &GasModel,
    settings: &SolverSettings,
    p0: f64,
    t0: f64,
    alpha_end: f64,
    n: usize,
) -> Result<Vec<ClosedState>> {
    settings.validate()?;
    let v2 = geom.swept_volume();
    if !(alpha_end > 0.0 && alpha_end < TAU) || n < 1 {
        return Err(Error::domain("closed compression needs 0 < alpha_end < 2π and n >= 1"));
    }
    let rho_init = model.density(p0, t0)?;
    let m = rho_init * v2;
    let mut prev = ClosedState {
        alpha: 0.0,
        volume: v2,
        p: p0,
        rho: rho_init,
        t: t0,
    };
    let mut u_total = m * model.internal_energy(p0, t0)?;
    let mut out = vec![prev];
    let h = alpha_end / n as f64;
    for j in 1..=n {
        let alpha = j as f64 * h;
        let vol = v2 - geom.volume_at(alpha);
        let rho = m / vol;
        let dv = vol - prev.volume;
        let mut p = prev.p * (prev.volume / vol);
        let mut iterations = 0;
        loop {
            iterations += 1;
            let u = u_total - 0.5 * (prev.p + p) * dv;
            let t = solve_energy(model, p, m, 0.0, u)?;
            let rho_m = model.density(p, t)?;
            let p_next = p * rho / rho_m;
            let change = ((p_next - p) / p).abs();
            p = p_next;
            if change <= settings.rho_tol {
                let u = u_total - 0.5 * (prev.p + p) * dv;
                let t = solve_energy(model, p, m, 0.0, u)?;
                u_total = u;
                prev = ClosedState { alpha, volume: vol, p, rho, t };
                out.push(prev);
                break;
            }
            if iterations >= settings.max_iter || !p.is_finite() {
                return Err(Error::NonConvergence {
                    step: j,
                    alpha_deg: alpha.to_degrees(),
                    iterations,
                    residual: change,
                });
            }
        }
    }
    Ok(out)
}
