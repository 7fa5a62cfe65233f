//! Rolling-piston kinematics.
//!
//! Angles are shaft angles measured from the vane line, where the roller is
//! tangent to the bore at `alpha = 0`. The suction chamber spans the crescent
//! between the vane and the roller contact point; its volume is the polar
//! integral of the crescent thickness, with half the protruding vane removed.

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TANGENCY_TOL: f64 = 1e-9;
const ANGLE_TOL: f64 = 1e-9;
const GAUSS_ORDER: usize = 16;

/// Per-angle clearance override, periodic in the shaft angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearanceProfile {
    /// Shaft angles [rad], strictly increasing within [0, 2π)
    pub alpha: Vec<f64>,
    pub delta_rc: Vec<f64>,
    pub delta_vc: Vec<f64>,
}

impl ClearanceProfile {
    pub fn new(alpha: Vec<f64>, delta_rc: Vec<f64>, delta_vc: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.len() != delta_rc.len() || alpha.len() != delta_vc.len() {
            return Err(Error::Config("clearance profile columns must be non-empty and equal length".into()));
        }
        if alpha.windows(2).any(|w| w[1] <= w[0]) || alpha[0] < 0.0 || *alpha.last().unwrap() >= TAU {
            return Err(Error::Config("clearance profile angles must increase strictly within [0, 360) deg".into()));
        }
        if delta_rc.iter().chain(&delta_vc).any(|&d| d < 0.0) {
            return Err(Error::Config("negative clearance in clearance profile".into()));
        }
        Ok(ClearanceProfile { alpha, delta_rc, delta_vc })
    }

    /// Reads `alpha_deg,delta_rc_m,delta_vc_m` rows.
    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let (mut a, mut rc, mut vc) = (Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |c: usize| -> Result<f64> {
                rec.get(c).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| Error::Parse {
                    source_name: "clearance profile".into(),
                    row: i + 2,
                    message: format!("column {c} is not a number"),
                })
            };
            a.push(num(0)?.to_radians());
            rc.push(num(1)?);
            vc.push(num(2)?);
        }
        Self::new(a, rc, vc)
    }

    fn at(&self, values: &[f64], alpha: f64) -> f64 {
        periodic_lerp(&self.alpha, values, alpha)
    }
}

fn periodic_lerp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n == 1 {
        return ys[0];
    }
    let x = x.rem_euclid(TAU);
    let idx = xs.partition_point(|&v| v <= x);
    let (x0, y0, x1, y1) = if idx == 0 {
        (xs[n - 1] - TAU, ys[n - 1], xs[0], ys[0])
    } else if idx == n {
        (xs[n - 1], ys[n - 1], xs[0] + TAU, ys[0])
    } else {
        (xs[idx - 1], ys[idx - 1], xs[idx], ys[idx])
    };
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Cylinder, roller and vane dimensions. All lengths in metres, angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Cylinder bore radius
    pub r1: f64,
    /// Roller outer radius
    pub r2: f64,
    /// Eccentricity
    pub e: f64,
    /// Cylinder height
    pub h: f64,
    /// Vane thickness
    pub b_v: f64,
    /// Clearance (dead) volume [m³]
    pub v_clearance: f64,
    /// Radial roller-cylinder sealing clearance
    pub delta_rc: f64,
    /// Vane-edge axial clearance
    pub delta_vc: f64,
    /// Discharge port diameter
    pub d_port: f64,
    /// Suction port angle
    pub alpha_s: f64,
    /// Discharge port angle, measured back from the vane line
    pub alpha_d: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clearance_profile: Option<ClearanceProfile>,
}

/// Heat-exchanging surfaces of the suction chamber [m²].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatingAreas {
    /// Cylinder bore
    pub a_o: f64,
    /// Roller outer surface
    pub a_p: f64,
    /// Upper and lower heads
    pub a_h: f64,
    /// Vane flanks
    pub a_v: f64,
    /// Total
    pub a_c: f64,
}

impl Geometry {
    /// A 10 cm³ machine with R32-typical proportions, used by examples and tests.
    pub fn reference() -> Self {
        Geometry {
            r1: 0.025,
            r2: 0.0215,
            e: 0.0035,
            h: 0.02,
            b_v: 0.004,
            v_clearance: 1.4e-7,
            delta_rc: 15e-6,
            delta_vc: 15e-6,
            d_port: 0.008,
            alpha_s: 20f64.to_radians(),
            alpha_d: 30f64.to_radians(),
            clearance_profile: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("r1", self.r1), ("r2", self.r2), ("e", self.e), ("H", self.h), ("d_port", self.d_port)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("geometry `{name}` must be positive, got {v}")));
            }
        }
        if !(self.r1 > self.r2) {
            return Err(Error::Config(format!("geometry needs r1 > r2 (r1 = {}, r2 = {})", self.r1, self.r2)));
        }
        if (self.e - (self.r1 - self.r2)).abs() > TANGENCY_TOL {
            return Err(Error::Config(format!(
                "geometry `e` = {} must equal r1 - r2 = {} (roller tangency)",
                self.e,
                self.r1 - self.r2
            )));
        }
        for (name, v) in [("b_v", self.b_v), ("V_clearance", self.v_clearance)] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("geometry `{name}` must be non-negative, got {v}")));
            }
        }
        for (name, v) in [("delta_rc", self.delta_rc), ("delta_vc", self.delta_vc)] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("negative clearance `{name}` = {v}")));
            }
        }
        if !(self.alpha_s >= 0.0 && self.alpha_s < self.alpha_d && self.alpha_d < TAU) {
            return Err(Error::Config(format!(
                "port angles need 0 <= alpha_s < alpha_d < 360 deg (alpha_s = {:.3} deg, alpha_d = {:.3} deg)",
                self.alpha_s.to_degrees(),
                self.alpha_d.to_degrees()
            )));
        }
        Ok(())
    }

    /// Same machine with every length multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Geometry {
            r1: self.r1 * s,
            r2: self.r2 * s,
            e: self.e * s,
            h: self.h * s,
            b_v: self.b_v * s,
            v_clearance: self.v_clearance * s * s * s,
            delta_rc: self.delta_rc * s,
            delta_vc: self.delta_vc * s,
            d_port: self.d_port * s,
            ..self.clone()
        }
    }

    pub fn r_ave(&self) -> f64 {
        0.5 * (self.r1 + self.r2)
    }

    /// Distance from the bore centre to the roller surface, `theta` away from the contact direction.
    fn roller_reach(&self, theta: f64) -> f64 {
        let s = theta.sin();
        self.e * theta.cos() + (self.r2 * self.r2 - self.e * self.e * s * s).sqrt()
    }

    fn crescent_integrand(&self, theta: f64) -> f64 {
        let l = self.roller_reach(theta);
        0.5 * (self.r1 * self.r1 - l * l)
    }

    /// Polar area of the crescent from the vane line to the contact point.
    fn crescent_area(&self, alpha: f64) -> f64 {
        if alpha <= 0.0 {
            return 0.0;
        }
        let (nodes, weights) = gauss_legendre();
        let panels = (alpha / FRAC_PI_4).ceil().max(1.0) as usize;
        let width = alpha / panels as f64;
        let mut sum = 0.0;
        for k in 0..panels {
            let mid = (k as f64 + 0.5) * width;
            let half = 0.5 * width;
            let mut panel = 0.0;
            for (x, w) in nodes.iter().zip(weights) {
                panel += w * self.crescent_integrand(mid + half * x);
            }
            sum += panel * half;
        }
        sum
    }

    fn check_angle(alpha: f64) -> Result<f64> {
        if alpha.is_finite() && (-ANGLE_TOL..=TAU + ANGLE_TOL).contains(&alpha) {
            Ok(alpha.clamp(0.0, TAU))
        } else {
            Err(Error::domain(format!("shaft angle {alpha} rad is outside [0, 2π]")))
        }
    }

    /// Suction-chamber volume V(α).
    pub fn chamber_volume(&self, alpha: f64) -> Result<f64> {
        Ok(self.volume_at(Self::check_angle(alpha)?))
    }

    pub(crate) fn volume_at(&self, alpha: f64) -> f64 {
        let raw = self.h * self.crescent_area(alpha) - 0.5 * self.b_v * self.vane_extension(alpha) * self.h;
        raw.max(0.0)
    }

    /// Volume on the angle axis unwrapped across revolutions: V(α mod 2π) + V₂·⌊α/2π⌋.
    pub(crate) fn unwrapped_volume(&self, alpha: f64) -> f64 {
        let turns = (alpha / TAU).floor();
        let local = alpha - turns * TAU;
        self.volume_at(local.clamp(0.0, TAU)) + turns * self.swept_volume()
    }

    /// Full swept volume V₂ = V(2π).
    pub fn swept_volume(&self) -> f64 {
        self.volume_at(TAU)
    }

    /// dV/dα of the suction chamber [m³/rad].
    pub fn volume_rate(&self, alpha: f64) -> Result<f64> {
        let alpha = Self::check_angle(alpha)?;
        if self.volume_at(alpha) <= 0.0 {
            return Ok(0.0);
        }
        let s = alpha.sin();
        let c = alpha.cos();
        let root = (self.r2 * self.r2 - self.e * self.e * s * s).sqrt();
        let dhv = self.e * s + self.e * self.e * s * c / root;
        Ok(self.h * self.crescent_integrand(alpha) - 0.5 * self.b_v * self.h * dhv)
    }

    /// Vane protrusion past the bore, H_v(α) = r1 − (e·cosα + √(r2² − e²sin²α)).
    pub fn vane_extension(&self, alpha: f64) -> f64 {
        let hv = self.r1 - self.roller_reach(alpha);
        // roundoff floor at the tangency point
        if hv < 1e-12 * self.r1 {
            0.0
        } else {
            hv
        }
    }

    pub fn heating_areas(&self, alpha: f64) -> Result<HeatingAreas> {
        let alpha = Self::check_angle(alpha)?;
        Ok(self.areas_with_volume(alpha, self.volume_at(alpha)))
    }

    /// Heating areas given `volume = V(alpha)` already evaluated; `alpha` must be in [0, 2π].
    pub(crate) fn areas_with_volume(&self, alpha: f64, volume: f64) -> HeatingAreas {
        let a_o = self.h * self.r1 * alpha;
        let a_p = self.h * self.r2 * alpha;
        let a_h = 2.0 * volume / self.h;
        let a_v = 2.0 * self.vane_extension(alpha) * self.h;
        HeatingAreas {
            a_o,
            a_p,
            a_h,
            a_v,
            a_c: a_o + a_p + a_h + a_v,
        }
    }

    /// D_h = 4V/A_c, zero at the empty chamber.
    pub fn hydraulic_diameter(&self, alpha: f64) -> Result<f64> {
        let alpha = Self::check_angle(alpha)?;
        let v = self.volume_at(alpha);
        Ok(hydraulic_from(v, &self.areas_with_volume(alpha, v)))
    }

    pub(crate) fn check_shaft_angle(alpha: f64) -> Result<f64> {
        Self::check_angle(alpha)
    }

    pub fn delta_rc_at(&self, alpha: f64) -> f64 {
        match &self.clearance_profile {
            Some(p) => p.at(&p.delta_rc, alpha),
            None => self.delta_rc,
        }
    }

    pub fn delta_vc_at(&self, alpha: f64) -> f64 {
        match &self.clearance_profile {
            Some(p) => p.at(&p.delta_vc, alpha),
            None => self.delta_vc,
        }
    }

    /// Valve flow area, the smaller of the port bore and the lift curtain.
    pub fn valve_flow_area(&self, lift: f64) -> f64 {
        let port = PI * self.d_port * self.d_port / 4.0;
        let curtain = PI * self.d_port * lift.max(0.0);
        port.min(curtain)
    }
}

pub(crate) fn hydraulic_from(volume: f64, areas: &HeatingAreas) -> f64 {
    if areas.a_c <= 0.0 {
        0.0
    } else {
        4.0 * volume / areas.a_c
    }
}

fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(GAUSS_ORDER))
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_vane() -> Geometry {
        Geometry { b_v: 0.0, ..Geometry::reference() }
    }

    /// Closed form of the crescent integral, via the substitution u = e·sinθ.
    fn crescent_closed_form(g: &Geometry, a: f64) -> f64 {
        let (r1, r2, e) = (g.r1, g.r2, g.e);
        let u = e * a.sin();
        0.5 * (r1 * r1 - r2 * r2) * a
            - 0.25 * e * e * (2.0 * a).sin()
            - 0.5 * (u * (r2 * r2 - u * u).sqrt() + r2 * r2 * (u / r2).asin())
    }

    fn trapezoid_crescent(g: &Geometry, a: f64, n: usize) -> f64 {
        let h = a / n as f64;
        let mut s = 0.5 * (g.crescent_integrand(0.0) + g.crescent_integrand(a));
        for i in 1..n {
            s += g.crescent_integrand(i as f64 * h);
        }
        s * h
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let (x, w) = legendre_rule(16);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m30: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((m30 - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn empty_chamber_at_tangency() {
        let g = Geometry::reference();
        assert_eq!(g.chamber_volume(0.0).unwrap(), 0.0);
        assert!(g.vane_extension(0.0) < 1e-15);
        let a = g.heating_areas(0.0).unwrap();
        assert_eq!(a.a_c, 0.0);
        assert_eq!(g.hydraulic_diameter(0.0).unwrap(), 0.0);
    }

    #[test]
    fn full_revolution_is_annulus() {
        let g = Geometry::reference();
        let v2 = PI * g.h * (g.r1 * g.r1 - g.r2 * g.r2);
        let v = g.chamber_volume(TAU).unwrap();
        assert!((v - v2).abs() < 1e-13 * v2, "{v} vs {v2}");
        // vane protrudes zero at 2π so the correction vanishes there
        assert!((v - 1.022_588_408_743_478_9e-5).abs() < 1e-15);
    }

    #[test]
    fn half_revolution_matches_brute_force() {
        let g = no_vane();
        let v = g.chamber_volume(PI).unwrap();
        let trap = g.h * trapezoid_crescent(&g, PI, 1_000_000);
        assert!(((v - trap) / trap).abs() < 1e-10, "{v} vs {trap}");
        let closed = g.h * crescent_closed_form(&g, PI);
        assert!(((v - closed) / closed).abs() < 1e-13);
        // frozen oracle value (scipy trapezoid, 10⁶ + 1 nodes)
        assert!(((v - 5.112_942_043_717_394e-6) / v).abs() < 1e-12);
    }

    #[test]
    fn volume_matches_closed_form_everywhere() {
        let g = Geometry::reference();
        for i in 1..=72 {
            let a = i as f64 * TAU / 72.0;
            let closed = (g.h * crescent_closed_form(&g, a) - 0.5 * g.b_v * g.vane_extension(a) * g.h).max(0.0);
            let v = g.chamber_volume(a).unwrap();
            assert!((v - closed).abs() < 1e-13 * g.swept_volume(), "alpha {a}");
        }
    }

    #[test]
    fn vane_extension_closed_forms() {
        let g = Geometry::reference();
        assert!((g.vane_extension(PI) - 2.0 * g.e).abs() < 1e-15);
        let expect = g.r1 - (g.r2 * g.r2 - g.e * g.e).sqrt();
        assert!((g.vane_extension(PI / 2.0) - expect).abs() < 1e-15);
        assert!((g.vane_extension(PI / 2.0) - 0.003_786_796_564_403_578).abs() < 1e-15);
    }

    #[test]
    fn heating_areas_by_hand() {
        let g = Geometry::reference();
        let a = g.heating_areas(PI).unwrap();
        assert!((a.a_o - g.h * g.r1 * PI).abs() < 1e-18);
        assert!((a.a_p - g.h * g.r2 * PI).abs() < 1e-18);
        let v = g.chamber_volume(PI).unwrap();
        assert!((a.a_h - 2.0 * v / g.h).abs() < 1e-18);
        assert!((a.a_v - 2.0 * 2.0 * g.e * g.h).abs() < 1e-15);
        assert!((a.a_c - (a.a_o + a.a_p + a.a_h + a.a_v)).abs() < 1e-18);
        let full = g.heating_areas(TAU).unwrap();
        assert!((full.a_o - TAU * g.h * g.r1).abs() < 1e-15);
    }

    #[test]
    fn hydraulic_diameter_composition_and_limits() {
        let g = Geometry::reference();
        let dh = g.hydraulic_diameter(PI).unwrap();
        let expect = 4.0 * g.chamber_volume(PI).unwrap() / g.heating_areas(PI).unwrap().a_c;
        assert_eq!(dh, expect);
        assert!(g.hydraulic_diameter(1e-6).unwrap() < 1e-9);
        let tall = Geometry { h: 2.0 * g.h, ..g.clone() };
        for a in [0.5, PI, 5.0] {
            assert!(tall.hydraulic_diameter(a).unwrap() > g.hydraulic_diameter(a).unwrap());
            let ratio = tall.chamber_volume(a).unwrap() / g.chamber_volume(a).unwrap();
            assert!((ratio - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn volume_monotone() {
        let g = no_vane();
        let mut prev = 0.0;
        for i in 1..3600 {
            let v = g.chamber_volume(i as f64 * TAU / 3600.0).unwrap();
            assert!(v > prev, "step {i}");
            prev = v;
        }
        let with_vane = Geometry::reference();
        let mut prev = 0.0;
        for i in 0..=3600 {
            let a = i as f64 * TAU / 3600.0;
            let v = with_vane.chamber_volume(a).unwrap();
            assert!(v >= prev);
            assert!(with_vane.volume_rate(a).unwrap() >= 0.0);
            prev = v;
        }
        // strictly increasing once the crescent clears the vane
        let a0 = 0.6;
        assert!(with_vane.chamber_volume(a0).unwrap() > 0.0);
    }

    #[test]
    fn volume_rate_matches_finite_difference() {
        let g = Geometry::reference();
        for a in [0.9, 2.0, PI, 4.5, 6.0] {
            let h = 1e-6;
            let fd = (g.volume_at(a + h) - g.volume_at(a - h)) / (2.0 * h);
            let dv = g.volume_rate(a).unwrap();
            assert!((dv - fd).abs() < 1e-7 * fd.abs().max(1e-9), "alpha {a}: {dv} vs {fd}");
        }
    }

    #[test]
    fn complementary_chambers_partition_swept_volume() {
        let g = Geometry::reference();
        let v2 = g.swept_volume();
        for i in 0..=36 {
            let a = i as f64 * TAU / 36.0;
            let v = g.chamber_volume(a).unwrap();
            let vc = v2 - v;
            assert!(vc >= 0.0);
            assert!((v + vc - v2).abs() <= 4.0 * f64::EPSILON * v2);
        }
    }

    #[test]
    fn uniform_scaling() {
        let g = Geometry::reference();
        let s = 2.0;
        let big = g.scaled(s);
        for a in [0.7, 2.0, PI, 5.5] {
            let rv = big.chamber_volume(a).unwrap() / g.chamber_volume(a).unwrap();
            assert!((rv - 8.0).abs() < 1e-10);
            let ra = big.heating_areas(a).unwrap().a_c / g.heating_areas(a).unwrap().a_c;
            assert!((ra - 4.0).abs() < 1e-10);
            let rl = big.vane_extension(a) / g.vane_extension(a);
            assert!((rl - 2.0).abs() < 1e-10);
            let rd = big.hydraulic_diameter(a).unwrap() / g.hydraulic_diameter(a).unwrap();
            assert!((rd - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn domain_and_validation_errors() {
        let g = Geometry::reference();
        assert!(g.chamber_volume(-0.1).is_err());
        assert!(g.chamber_volume(7.0).is_err());
        assert!(g.heating_areas(f64::NAN).is_err());
        assert!(g.validate().is_ok());
        let bad_e = Geometry { e: 0.004, ..g.clone() };
        assert!(bad_e.validate().is_err());
        let bad_clear = Geometry { delta_rc: -1e-6, ..g.clone() };
        assert!(bad_clear.validate().unwrap_err().to_string().contains("negative clearance"));
        let bad_ports = Geometry { alpha_s: 0.6, alpha_d: 0.5, ..g };
        assert!(bad_ports.validate().is_err());
    }

    #[test]
    fn clearance_profile_overrides_constants() {
        let prof = ClearanceProfile::new(vec![0.0, PI], vec![10e-6, 20e-6], vec![5e-6, 5e-6]).unwrap();
        let g = Geometry { clearance_profile: Some(prof), ..Geometry::reference() };
        assert!((g.delta_rc_at(PI / 2.0) - 15e-6).abs() < 1e-18);
        assert!((g.delta_rc_at(1.5 * PI) - 15e-6).abs() < 1e-18);
        assert_eq!(g.delta_vc_at(1.0), 5e-6);
        assert_eq!(Geometry::reference().delta_rc_at(1.0), 15e-6);
    }

    #[test]
    fn valve_area_saturates_at_port() {
        let g = Geometry::reference();
        assert_eq!(g.valve_flow_area(0.0), 0.0);
        assert!((g.valve_flow_area(1e-4) - PI * g.d_port * 1e-4).abs() < 1e-18);
        assert!((g.valve_flow_area(1.0) - PI * g.d_port * g.d_port / 4.0).abs() < 1e-18);
    }
}
