//! Crank-angle signal ingest, phase alignment and valve-event detection.

use std::f64::consts::TAU;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bit-exact trace CSV header.
pub const TRACE_HEADER: [&str; 5] = ["alpha_deg", "p_suction_Pa", "p_discharge_Pa", "x_vane_m", "y_valve_m"];

/// Default valve-lift threshold [m], the displacement sensor resolution.
pub const DEFAULT_LIFT_THRESHOLD: f64 = 2e-6;

/// Vane spans below this [m] cannot be phase-aligned.
pub const VANE_NOISE_FLOOR: f64 = 2e-6;

pub const MIN_RESAMPLE: usize = 64;

const SPACING_TOL: f64 = 1e-6;

/// Operating-point metadata of one averaged revolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub n_rps: f64,
    pub omega: f64,
    pub m_dot_meas: f64,
    pub w_in: f64,
    pub t_s: f64,
    pub t_0: f64,
    pub t_os: f64,
    pub t_a: f64,
    pub t_b: f64,
    pub t_c: f64,
    pub l_a: f64,
    pub l_b: f64,
    pub l_c: f64,
    pub d: f64,
    /// Shaft power, when a torque channel exists. Unused by the analysis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_shaft: Option<f64>,
}

impl RunMeta {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_rps > 0.0 && self.n_rps.is_finite()) {
            return Err(Error::Config(format!("N_rps must be positive, got {}", self.n_rps)));
        }
        if (self.omega - TAU * self.n_rps).abs() > 1e-12 * self.omega {
            return Err(Error::Config("omega must equal 2π·N_rps".into()));
        }
        let temps = [
            ("T_s_K", self.t_s),
            ("T_0_K", self.t_0),
            ("T_os_K", self.t_os),
            ("T_A_K", self.t_a),
            ("T_B_K", self.t_b),
            ("T_C_K", self.t_c),
        ];
        let lengths = [("L_A_m", self.l_a), ("L_B_m", self.l_b), ("L_C_m", self.l_c), ("D_m", self.d)];
        for (k, v) in temps.into_iter().chain(lengths) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("run metadata `{k}` must be positive, got {v}")));
            }
        }
        if !(self.m_dot_meas >= 0.0) || !(self.w_in >= 0.0) {
            return Err(Error::Config("m_dot_meas_kgs and W_in_W must be non-negative".into()));
        }
        Ok(())
    }

    /// Same point at another shaft speed.
    pub fn with_speed(&self, n_rps: f64) -> Self {
        RunMeta {
            n_rps,
            omega: TAU * n_rps,
            ..self.clone()
        }
    }
}

/// Metadata as found in a trace header or a config section; any field may be absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialMeta {
    pub n_rps: Option<f64>,
    pub m_dot_meas: Option<f64>,
    pub w_in: Option<f64>,
    pub t_s: Option<f64>,
    pub t_0: Option<f64>,
    pub t_os: Option<f64>,
    pub t_a: Option<f64>,
    pub t_b: Option<f64>,
    pub t_c: Option<f64>,
    pub l_a: Option<f64>,
    pub l_b: Option<f64>,
    pub l_c: Option<f64>,
    pub d: Option<f64>,
    pub w_shaft: Option<f64>,
}

impl PartialMeta {
    /// Key names as written in trace headers and config files.
    pub const KEYS: [&'static str; 14] = [
        "N_rps",
        "m_dot_meas_kgs",
        "W_in_W",
        "T_s_K",
        "T_0_K",
        "T_os_K",
        "T_A_K",
        "T_B_K",
        "T_C_K",
        "L_A_m",
        "L_B_m",
        "L_C_m",
        "D_m",
        "W_shaft_W",
    ];

    fn slot(&mut self, key: &str) -> Option<&mut Option<f64>> {
        Some(match key {
            "N_rps" => &mut self.n_rps,
            "m_dot_meas_kgs" => &mut self.m_dot_meas,
            "W_in_W" => &mut self.w_in,
            "T_s_K" => &mut self.t_s,
            "T_0_K" => &mut self.t_0,
            "T_os_K" => &mut self.t_os,
            "T_A_K" => &mut self.t_a,
            "T_B_K" => &mut self.t_b,
            "T_C_K" => &mut self.t_c,
            "L_A_m" => &mut self.l_a,
            "L_B_m" => &mut self.l_b,
            "L_C_m" => &mut self.l_c,
            "D_m" => &mut self.d,
            "W_shaft_W" => &mut self.w_shaft,
            _ => return None,
        })
    }

    /// Sets a field by key name; returns false for unknown keys.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        match self.slot(key) {
            Some(s) => {
                *s = Some(value);
                true
            }
            None => false,
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.clone().slot(key).and_then(|s| *s)
    }

    /// Fields of `self` win over `base`.
    pub fn overlay(&self, base: &PartialMeta) -> PartialMeta {
        let mut out = base.clone();
        for key in Self::KEYS {
            if let Some(v) = self.get(key) {
                out.set(key, v);
            }
        }
        out
    }

    pub fn from_meta(meta: &RunMeta) -> Self {
        PartialMeta {
            n_rps: Some(meta.n_rps),
            m_dot_meas: Some(meta.m_dot_meas),
            w_in: Some(meta.w_in),
            t_s: Some(meta.t_s),
            t_0: Some(meta.t_0),
            t_os: Some(meta.t_os),
            t_a: Some(meta.t_a),
            t_b: Some(meta.t_b),
            t_c: Some(meta.t_c),
            l_a: Some(meta.l_a),
            l_b: Some(meta.l_b),
            l_c: Some(meta.l_c),
            d: Some(meta.d),
            w_shaft: meta.w_shaft,
        }
    }

    pub fn complete(&self) -> Result<RunMeta> {
        let need = |key: &str| {
            self.get(key).ok_or_else(|| {
                Error::Config(format!(
                    "run metadata `{key}` is missing from both the trace header and the [operating] section"
                ))
            })
        };
        let n_rps = need("N_rps")?;
        let meta = RunMeta {
            n_rps,
            omega: TAU * n_rps,
            m_dot_meas: need("m_dot_meas_kgs")?,
            w_in: need("W_in_W")?,
            t_s: need("T_s_K")?,
            t_0: need("T_0_K")?,
            t_os: need("T_os_K")?,
            t_a: need("T_A_K")?,
            t_b: need("T_B_K")?,
            t_c: need("T_C_K")?,
            l_a: need("L_A_m")?,
            l_b: need("L_B_m")?,
            l_c: need("L_C_m")?,
            d: need("D_m")?,
            w_shaft: self.w_shaft,
        };
        meta.validate()?;
        Ok(meta)
    }
}

/// Trace rows exactly as read: angles in degrees, possibly several revolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrace {
    pub alpha_deg: Vec<f64>,
    pub p_st: Vec<f64>,
    pub p_dt: Vec<f64>,
    pub x_vane: Vec<f64>,
    pub y_p: Vec<f64>,
    pub meta: PartialMeta,
}

impl RawTrace {
    pub fn len(&self) -> usize {
        self.alpha_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_deg.is_empty()
    }
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<RawTrace> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_trace(file, &path.display().to_string())
}

pub fn parse_trace<R: Read>(mut reader: R, source_name: &str) -> Result<RawTrace> {
    let parse_err = |row: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        row,
        message,
    };
    let mut text = String::new();
    reader.read_to_string(&mut text)?;

    let mut meta = PartialMeta::default();
    let mut body_start = 0;
    let mut header_line = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let trimmed = line.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                let (k, v) = (k.trim(), v.trim());
                let value: f64 = v
                    .parse()
                    .map_err(|_| parse_err(i + 1, format!("metadata `{k}` is not a number: `{v}`")))?;
                if !meta.set(k, value) {
                    log::debug!("{source_name}: ignoring unknown metadata key `{k}`");
                }
            }
            body_start += line.len();
            continue;
        }
        if trimmed.is_empty() {
            body_start += line.len();
            continue;
        }
        header_line = i + 1;
        break;
    }
    if header_line == 0 {
        return Err(parse_err(1, "no header row".into()));
    }
    let body = &text[body_start.min(text.len())..];

    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers = rdr.headers()?.clone();
    for col in TRACE_HEADER {
        if !headers.iter().any(|h| h == col) {
            return Err(parse_err(header_line, format!("missing column `{col}`")));
        }
    }
    if headers.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(parse_err(
            header_line,
            format!("header must be exactly `{}`", TRACE_HEADER.join(",")),
        ));
    }

    let mut t = RawTrace {
        alpha_deg: Vec::new(),
        p_st: Vec::new(),
        p_dt: Vec::new(),
        x_vane: Vec::new(),
        y_p: Vec::new(),
        meta,
    };
    for (i, rec) in rdr.records().enumerate() {
        let row = header_line + 1 + i;
        let rec = rec.map_err(|e| parse_err(row, e.to_string()))?;
        if rec.len() != TRACE_HEADER.len() {
            return Err(parse_err(row, format!("expected {} fields, found {}", TRACE_HEADER.len(), rec.len())));
        }
        let mut vals = [0.0; 5];
        for (c, v) in vals.iter_mut().enumerate() {
            let s = &rec[c];
            *v = s
                .parse::<f64>()
                .map_err(|_| parse_err(row, format!("`{}` is not a number: `{s}`", TRACE_HEADER[c])))?;
            if !v.is_finite() {
                return Err(parse_err(row, format!("`{}` is not finite", TRACE_HEADER[c])));
            }
        }
        if let Some(&prev) = t.alpha_deg.last() {
            if vals[0] == prev {
                return Err(parse_err(row, format!("duplicate angle {prev} deg")));
            }
            if vals[0] < prev {
                return Err(parse_err(row, format!("angle decreases from {prev} to {} deg", vals[0])));
            }
        }
        if vals[1] <= 0.0 || vals[2] <= 0.0 {
            return Err(parse_err(row, "pressures must be positive".into()));
        }
        if vals[4] < 0.0 {
            return Err(parse_err(row, "valve lift must be non-negative".into()));
        }
        t.alpha_deg.push(vals[0]);
        t.p_st.push(vals[1]);
        t.p_dt.push(vals[2]);
        t.x_vane.push(vals[3]);
        t.y_p.push(vals[4]);
    }
    if t.len() < 8 {
        return Err(parse_err(header_line, format!("only {} data rows", t.len())));
    }
    Ok(t)
}

/// One averaged revolution on a uniform grid starting at α = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTrace {
    pub alpha: Vec<f64>,
    pub p_st: Vec<f64>,
    pub p_dt: Vec<f64>,
    pub x_vane: Vec<f64>,
    pub y_p: Vec<f64>,
    pub meta: RunMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    SuctionPressure,
    DischargePressure,
    Vane,
    Lift,
}

impl CycleTrace {
    /// Builds a trace on the uniform grid `alpha_j = j·2π/n`.
    pub fn new(p_st: Vec<f64>, p_dt: Vec<f64>, x_vane: Vec<f64>, y_p: Vec<f64>, meta: RunMeta) -> Result<Self> {
        let n = p_st.len();
        if n < 8 || p_dt.len() != n || x_vane.len() != n || y_p.len() != n {
            return Err(Error::Trace("trace channels must share one length of at least 8".into()));
        }
        let alpha = uniform_grid(n);
        let t = CycleTrace { alpha, p_st, p_dt, x_vane, y_p, meta };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.alpha.len();
        if self.alpha[0] != 0.0 {
            return Err(Error::Trace("trace grid must start at alpha = 0".into()));
        }
        let step = TAU / n as f64;
        for (j, a) in self.alpha.iter().enumerate() {
            if (a - j as f64 * step).abs() > SPACING_TOL * step {
                return Err(Error::Trace(format!("trace grid is not uniform at node {j}")));
            }
        }
        if self.p_st.iter().chain(&self.p_dt).any(|&p| !(p > 0.0)) {
            return Err(Error::Trace("trace pressures must be positive".into()));
        }
        if self.y_p.iter().any(|&y| !(y >= 0.0)) {
            return Err(Error::Trace("valve lift must be non-negative".into()));
        }
        self.meta.validate()
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn step(&self) -> f64 {
        TAU / self.len() as f64
    }

    pub fn channel(&self, c: Channel) -> &[f64] {
        match c {
            Channel::SuctionPressure => &self.p_st,
            Channel::DischargePressure => &self.p_dt,
            Channel::Vane => &self.x_vane,
            Channel::Lift => &self.y_p,
        }
    }

    /// Periodic linear interpolation of a channel at any angle.
    pub fn at(&self, c: Channel, alpha: f64) -> f64 {
        lerp_uniform(self.channel(c), self.step(), alpha)
    }

    /// Linear interpolation that treats the grid as one open leg: beyond the
    /// last node the final two samples are extrapolated instead of wrapping to
    /// α = 0, where chamber pressures jump.
    pub fn at_leg(&self, c: Channel, alpha: f64) -> f64 {
        let y = self.channel(c);
        let n = y.len();
        let step = self.step();
        let s = alpha / step;
        if s >= (n - 1) as f64 {
            let f = s - (n - 1) as f64;
            return y[n - 1] + (y[n - 1] - y[n - 2]) * f;
        }
        let s = s.max(0.0);
        let i = s.floor() as usize;
        let f = s - i as f64;
        y[i] + (y[i + 1] - y[i]) * f
    }

    /// Suction pressure at suction close (α = 2π), extrapolated from the last two nodes.
    pub fn p_suction_end(&self) -> f64 {
        let n = self.len();
        2.0 * self.p_st[n - 1] - self.p_st[n - 2]
    }

    /// Moving average of both pressure channels over an odd periodic window.
    pub fn smooth_pressures(&mut self, window: usize) -> Result<()> {
        if window <= 1 {
            return Ok(());
        }
        if window.is_multiple_of(2) || window >= self.len() {
            return Err(Error::Config(format!("smoothing window {window} must be odd and shorter than the trace")));
        }
        self.p_st = moving_average(&self.p_st, window);
        self.p_dt = moving_average(&self.p_dt, window);
        Ok(())
    }
}

fn moving_average(x: &[f64], window: usize) -> Vec<f64> {
    let n = x.len() as isize;
    let half = (window / 2) as isize;
    (0..n)
        .map(|i| (-half..=half).map(|k| x[(i + k).rem_euclid(n) as usize]).sum::<f64>() / window as f64)
        .collect()
}

pub(crate) fn uniform_grid(n: usize) -> Vec<f64> {
    let step = TAU / n as f64;
    (0..n).map(|j| j as f64 * step).collect()
}

/// Periodic linear interpolation of samples on the grid `j·step`.
pub(crate) fn lerp_uniform(y: &[f64], step: f64, alpha: f64) -> f64 {
    let n = y.len();
    let s = alpha.rem_euclid(TAU) / step;
    let i = (s.floor() as usize).min(n - 1);
    let f = s - i as f64;
    let y0 = y[i];
    let y1 = y[(i + 1) % n];
    y0 + (y1 - y0) * f
}

/// Collapses a multi-revolution record onto one revolution.
///
/// Complete revolutions are interpolated onto a common grid of the median
/// sample spacing and averaged; `max_revolutions` caps how many are used.
/// Returns angles in radians relative to the first sample.
fn phase_average(raw: &RawTrace, max_revolutions: Option<usize>) -> Result<[Vec<f64>; 5]> {
    let a: Vec<f64> = raw.alpha_deg.iter().map(|d| (d - raw.alpha_deg[0]).to_radians()).collect();
    let mut gaps: Vec<f64> = a.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let spacing = gaps[gaps.len() / 2];
    let span = *a.last().unwrap() + spacing;
    if span < TAU * (1.0 - 1e-9) {
        return Err(Error::Trace(format!(
            "trace covers {:.2} deg, less than one revolution",
            span.to_degrees()
        )));
    }
    let n = (TAU / spacing).round() as usize;
    let complete = ((span / TAU) + 1e-9).floor() as usize;
    let revs = max_revolutions.map_or(complete, |m| m.clamp(1, complete));
    let chans = [&raw.p_st, &raw.p_dt, &raw.x_vane, &raw.y_p];
    let mut out: [Vec<f64>; 5] = Default::default();
    out[0] = uniform_grid(n);

    if revs == 1 && (n as f64 * spacing - TAU).abs() < SPACING_TOL * spacing && a.len() >= n {
        let uniform = a.iter().take(n).enumerate().all(|(j, &v)| (v - j as f64 * spacing).abs() < SPACING_TOL * spacing);
        if uniform {
            for (k, c) in chans.iter().enumerate() {
                out[k + 1] = c[..n].to_vec();
            }
            return Ok(out);
        }
    }

    let step = TAU / n as f64;
    for (k, c) in chans.iter().enumerate() {
        let mut acc = vec![0.0; n];
        for r in 0..revs {
            for (j, slot) in acc.iter_mut().enumerate() {
                *slot += lerp_irregular(&a, c, r as f64 * TAU + j as f64 * step);
            }
        }
        out[k + 1] = acc.into_iter().map(|v| v / revs as f64).collect();
    }
    Ok(out)
}

/// Linear interpolation on increasing abscissae; beyond the last sample the
/// record is assumed periodic in 2π.
fn lerp_irregular(x: &[f64], y: &[f64], at: f64) -> f64 {
    let last = *x.last().unwrap();
    if at > last {
        // closing gap back to the first sample one revolution later
        let (x0, y0) = (last, *y.last().unwrap());
        let x1 = (x0 / TAU).floor() * TAU + TAU;
        let y1 = y[0];
        if x1 <= x0 {
            return y0;
        }
        return y0 + (y1 - y0) * ((at - x0) / (x1 - x0)).min(1.0);
    }
    let i = x.partition_point(|&v| v <= at).max(1);
    let (x0, x1) = (x[i - 1], x[i.min(x.len() - 1)]);
    let (y0, y1) = (y[i - 1], y[i.min(x.len() - 1)]);
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (at - x0) / (x1 - x0)
}

/// Options for turning a raw record into a [`CycleTrace`].
#[derive(Debug, Clone, Default)]
pub struct AlignOptions {
    /// Cap on averaged revolutions; all complete revolutions when `None`.
    pub max_revolutions: Option<usize>,
    /// Metadata used where the trace header is silent.
    pub defaults: PartialMeta,
}

/// Phase-averages `raw` and rotates it so the vane-displacement minimum sits at α = 0.
///
/// The minimum is located from the phase of the first Fourier harmonic of the
/// vane signal, which is even about the true zero, so sample noise averages out
/// instead of moving a raw argmin along the flat bottom.
pub fn align_phase(raw: &RawTrace, opts: &AlignOptions) -> Result<CycleTrace> {
    let meta = raw.meta.overlay(&opts.defaults).complete()?;
    let [grid, p_st, p_dt, x_vane, y_p] = phase_average(raw, opts.max_revolutions)?;
    let (lo, hi) = x_vane
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    if !(span >= VANE_NOISE_FLOOR) {
        return Err(Error::CannotAlign { span, floor: VANE_NOISE_FLOOR });
    }
    let zero = vane_zero(&grid, &x_vane);
    let n = grid.len();
    let step = TAU / n as f64;
    let shift_nodes = zero / step;
    let rotate = |y: &[f64]| -> Vec<f64> {
        // sub-millistep residuals are estimator noise; snap so aligned input stays untouched
        if (shift_nodes - shift_nodes.round()).abs() < 1e-3 {
            let k = shift_nodes.round() as usize % n;
            (0..n).map(|j| y[(j + k) % n]).collect()
        } else {
            (0..n).map(|j| lerp_uniform(y, step, zero + j as f64 * step)).collect()
        }
    };
    let y_p = rotate(&y_p).into_iter().map(|v| v.max(0.0)).collect();
    CycleTrace::new(rotate(&p_st), rotate(&p_dt), rotate(&x_vane), y_p, meta)
}

/// Angle of the vane minimum from the first-harmonic phase of a uniform revolution.
pub(crate) fn vane_zero(grid: &[f64], x_vane: &[f64]) -> f64 {
    let (mut sc, mut cc) = (0.0, 0.0);
    for (a, x) in grid.iter().zip(x_vane) {
        sc += x * a.sin();
        cc += x * a.cos();
    }
    (sc.atan2(cc) + std::f64::consts::PI).rem_euclid(TAU)
}

/// Periodic linear resampling onto `n_target` uniform nodes.
pub fn resample(trace: &CycleTrace, n_target: usize) -> Result<CycleTrace> {
    if n_target < MIN_RESAMPLE {
        return Err(Error::domain(format!("resample target {n_target} is below the minimum of {MIN_RESAMPLE}")));
    }
    if n_target == trace.len() {
        return Ok(trace.clone());
    }
    let step = TAU / n_target as f64;
    let src = trace.step();
    let map = |y: &[f64]| -> Vec<f64> { (0..n_target).map(|j| lerp_uniform(y, src, j as f64 * step)).collect() };
    CycleTrace::new(
        map(&trace.p_st),
        map(&trace.p_dt),
        map(&trace.x_vane),
        map(&trace.y_p),
        trace.meta.clone(),
    )
}

/// Discharge-valve opening and closing angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValveEvents {
    /// Opening angle [rad], in [0, 2π)
    pub alpha_o: f64,
    /// Closing angle [rad], unwrapped so that `alpha_c > alpha_o`; exceeds 2π on delayed closing
    pub alpha_c: f64,
    /// The valve is still open at the vane line (α = 0 ≡ 2π)
    pub delayed_closing: bool,
}

/// Threshold crossings of the lift channel with linear sub-grid interpolation.
pub fn valve_events(trace: &CycleTrace, lift_threshold: f64) -> Result<ValveEvents> {
    let y = &trace.y_p;
    let n = y.len();
    let step = trace.step();
    let open: Vec<bool> = y.iter().map(|&v| v > lift_threshold).collect();
    if !open.iter().any(|&o| o) {
        return Err(Error::NoDischargeEvent { threshold: lift_threshold });
    }
    if open.iter().all(|&o| o) {
        return Err(Error::Trace(format!("valve lift never falls below {lift_threshold:e} m")));
    }
    let mut ups = Vec::new();
    let mut downs = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        if open[i] == open[j] {
            continue;
        }
        let f = (lift_threshold - y[i]) / (y[j] - y[i]);
        let at = (i as f64 + f) * step;
        if open[j] {
            ups.push(at);
        } else {
            downs.push(at);
        }
    }
    let alpha_o = ups[0];
    if open[0] && alpha_o > downs[0] {
        // tail of the event runs into the next revolution
        let close = downs.iter().copied().filter(|&d| d < alpha_o).fold(f64::NEG_INFINITY, f64::max);
        return Ok(ValveEvents {
            alpha_o,
            alpha_c: close + TAU,
            delayed_closing: true,
        });
    }
    let alpha_c = *downs.last().unwrap();
    Ok(ValveEvents {
        alpha_o,
        alpha_c,
        delayed_closing: alpha_c > TAU,
    })
}

/// Writes the trace CSV with a `# key = value` metadata block.
pub fn write_trace<W: Write>(trace: &CycleTrace, mut out: W) -> Result<()> {
    let m = &trace.meta;
    let fields = [
        ("N_rps", m.n_rps),
        ("m_dot_meas_kgs", m.m_dot_meas),
        ("W_in_W", m.w_in),
        ("T_s_K", m.t_s),
        ("T_0_K", m.t_0),
        ("T_os_K", m.t_os),
        ("T_A_K", m.t_a),
        ("T_B_K", m.t_b),
        ("T_C_K", m.t_c),
        ("L_A_m", m.l_a),
        ("L_B_m", m.l_b),
        ("L_C_m", m.l_c),
        ("D_m", m.d),
    ];
    for (k, v) in fields {
        writeln!(out, "# {k} = {v:?}")?;
    }
    if let Some(w) = m.w_shaft {
        writeln!(out, "# W_shaft_W = {w:?}")?;
    }
    writeln!(out, "{}", TRACE_HEADER.join(","))?;
    for j in 0..trace.len() {
        writeln!(
            out,
            "{:?},{:?},{:?},{:?},{:?}",
            trace.alpha[j].to_degrees(),
            trace.p_st[j],
            trace.p_dt[j],
            trace.x_vane[j],
            trace.y_p[j]
        )?;
    }
    Ok(())
}
