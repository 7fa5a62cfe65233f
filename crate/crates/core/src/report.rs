//! Efficiency chain, per-factor net effects and serialized outputs.

#![allow(non_snake_case)]

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorCategory, Result};
use crate::losses::MassLossBreakdown;
use crate::power::PowerBreakdown;
use crate::traces::RunMeta;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyChain {
    pub eta_v: f64,
    pub eta_c: f64,
    /// Combined motor and mechanical efficiency W_real/W_in
    pub eta_mf: f64,
    pub eta_total: f64,
}

/// η_c = W_ideal/W_real, η_mf = W_real/W_in, η = η_v·η_c·η_mf with the
/// measured η_v.
pub fn efficiency_chain(mass: &MassLossBreakdown, power: &PowerBreakdown, meta: &RunMeta) -> Result<EfficiencyChain> {
    let (eta_v, w_in) = (mass.eta_v_meas, meta.w_in);
    if !(power.W_real > 0.0) {
        return Err(Error::domain(format!("indicated work must be positive, got {} W", power.W_real)));
    }
    if !(w_in > 0.0) {
        return Err(Error::domain(format!("input power must be positive, got {w_in} W")));
    }
    let eta_c = power.W_ideal / power.W_real;
    let eta_mf = power.W_real / w_in;
    Ok(EfficiencyChain {
        eta_v,
        eta_c,
        eta_mf,
        eta_total: eta_v * eta_c * eta_mf,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetFactor {
    Ideal,
    SuctionHeating,
    Leakage,
    Clearance,
    Backflow,
    Supercharging,
    Actual,
}

impl NetFactor {
    pub const ALL: [NetFactor; 7] = [
        NetFactor::Ideal,
        NetFactor::SuctionHeating,
        NetFactor::Leakage,
        NetFactor::Clearance,
        NetFactor::Backflow,
        NetFactor::Supercharging,
        NetFactor::Actual,
    ];

    /// Column name in the sweep rate table.
    pub fn column(self) -> &'static str {
        match self {
            NetFactor::Ideal => "rate_ideal",
            NetFactor::SuctionHeating => "rate_sh",
            NetFactor::Leakage => "rate_lk",
            NetFactor::Clearance => "rate_cv",
            NetFactor::Backflow => "rate_bf",
            NetFactor::Supercharging => "rate_sc",
            NetFactor::Actual => "rate_actual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetEffect {
    pub factor: NetFactor,
    /// Delivered mass per unit work [kg/J]
    pub rate: f64,
}

/// rate = (ṁ_ideal + ṁ_loss)/(W_ideal + ΔW_loss).
pub fn net_effect(factor: NetFactor, m_ideal: f64, m_loss: f64, w_ideal: f64, dw_loss: f64) -> Result<NetEffect> {
    let den = w_ideal + dw_loss;
    if !(den > 0.0) {
        return Err(Error::domain(format!("net effect of {factor:?} has non-positive work {den} W")));
    }
    Ok(NetEffect {
        factor,
        rate: (m_ideal + m_loss) / den,
    })
}

/// Net effects of every factor. Losses remove mass at unchanged work;
/// supercharging adds ṁ_sc and costs ΔW_s + ΔW_p.
pub fn net_effects(mass: &MassLossBreakdown, power: &PowerBreakdown, m_ideal: f64, m_meas: f64) -> Result<Vec<NetEffect>> {
    let w = power.W_ideal;
    Ok(vec![
        net_effect(NetFactor::Ideal, m_ideal, 0.0, w, 0.0)?,
        net_effect(NetFactor::SuctionHeating, m_ideal, -mass.lambda_sh * m_ideal, w, 0.0)?,
        net_effect(NetFactor::Leakage, m_ideal, -mass.m_dot_Llk, w, 0.0)?,
        net_effect(NetFactor::Clearance, m_ideal, -mass.m_dot_Lcv, w, 0.0)?,
        net_effect(NetFactor::Backflow, m_ideal, -mass.m_dot_Lbf, w, 0.0)?,
        net_effect(NetFactor::Supercharging, m_ideal, mass.m_dot_sc, w, power.dW_s + power.dW_p)?,
        net_effect(NetFactor::Actual, m_meas, 0.0, power.W_real, 0.0)?,
    ])
}

/// Reference states and solver figures behind a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub run: RunMeta,
    pub p_s: f64,
    pub p_d: f64,
    pub gamma: f64,
    pub V_2: f64,
    pub rho_s: f64,
    pub rho_d: f64,
    pub rho_2: f64,
    pub T_2: f64,
    pub T_sh: f64,
    pub T_s3: f64,
    pub m_dot_ideal: f64,
    pub alpha_o_deg: f64,
    pub alpha_c_deg: f64,
    pub delayed_closing: bool,
    pub grid_points: usize,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub meta: ReportMeta,
    pub mass_losses: MassLossBreakdown,
    pub power_losses: PowerBreakdown,
    pub efficiencies: EfficiencyChain,
    pub net_effects: Vec<NetEffect>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn rate(&self, factor: NetFactor) -> f64 {
        self.net_effects.iter().find(|e| e.factor == factor).map_or(f64::NAN, |e| e.rate)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// A sweep point that failed, kept alongside the successful rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub label: String,
    pub category: String,
    pub message: String,
}

impl PointError {
    pub fn new(label: impl Into<String>, err: &Error) -> Self {
        let category = match err.category() {
            ErrorCategory::Config => "config",
            ErrorCategory::Trace => "trace",
            ErrorCategory::Solver => "solver",
            ErrorCategory::Io => "io",
        };
        PointError {
            label: label.into(),
            category: category.into(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub report: Report,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub errors: Vec<PointError>,
}

impl SweepReport {
    /// Splits per-point outcomes, keeping input order.
    pub fn from_results(results: Vec<(String, Result<Report>)>) -> Self {
        let mut out = SweepReport::default();
        for (label, r) in results {
            match r {
                Ok(report) => out.rows.push(SweepRow { label, report }),
                Err(e) => out.errors.push(PointError::new(label, &e)),
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_lambdas<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "label", "N_rps", "lambda_sh", "lambda_lk", "lambda_cv", "lambda_bf", "lambda_sc", "eta_v_pred", "eta_v_meas",
        ])?;
        for row in &self.rows {
            let m = &row.report.mass_losses;
            let vals = [
                row.report.meta.run.n_rps,
                m.lambda_sh,
                m.lambda_lk,
                m.lambda_cv,
                m.lambda_bf,
                m.lambda_sc,
                m.eta_v_pred,
                m.eta_v_meas,
            ];
            write_row(&mut w, &row.label, &vals)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_power<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "label", "N_rps", "W_ideal", "W_real", "dW_s", "dW_d", "dW_c", "dW_p", "eta_c", "eta_mf", "eta_total",
        ])?;
        for row in &self.rows {
            let p = &row.report.power_losses;
            let e = &row.report.efficiencies;
            let vals = [
                row.report.meta.run.n_rps,
                p.W_ideal,
                p.W_real,
                p.dW_s,
                p.dW_d,
                p.dW_c,
                p.dW_p,
                e.eta_c,
                e.eta_mf,
                e.eta_total,
            ];
            write_row(&mut w, &row.label, &vals)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_rates<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["label", "N_rps"];
        header.extend(NetFactor::ALL.iter().map(|f| f.column()));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut vals = vec![row.report.meta.run.n_rps];
            vals.extend(NetFactor::ALL.iter().map(|&f| row.report.rate(f)));
            write_row(&mut w, &row.label, &vals)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn write_row<W: Write>(w: &mut csv::Writer<W>, label: &str, vals: &[f64]) -> Result<()> {
    let mut rec = vec![label.to_string()];
    rec.extend(vals.iter().map(|v| format!("{v:?}")));
    w.write_record(&rec)?;
    Ok(())
}
