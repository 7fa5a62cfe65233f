//! Loss decomposition for rolling-piston compressors.
//!
//! The pipeline runs from crank-angle traces ([`traces`]) through the
//! suction-chamber energy balance ([`thermo`]) to mass-flow losses
//! ([`losses`]), P-V power terms ([`power`]) and the efficiency report
//! ([`report`]). [`synth`] generates consistent traces with known losses.

// `!(x > 0.0)` guards are deliberate: they reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod power;
pub mod props;
pub mod report;
pub mod synth;
mod quad;
pub mod thermo;
pub mod traces;

pub use error::{Error, ErrorCategory, Result};
pub use geometry::{ClearanceProfile, Geometry, HeatingAreas};
pub use props::{gamma_isentropic, Backend, GasModel, GasState, PropertyTable, Transport};
pub use traces::{
    align_phase, load_trace, parse_trace, resample, valve_events, write_trace, AlignOptions, Channel, CycleTrace,
    PartialMeta, RawTrace, RunMeta, ValveEvents,
};
pub use thermo::{ChamberState, SolverSettings, SuctionSolution};
pub use losses::MassLossBreakdown;
pub use power::{PowerBreakdown, PowerOptions};
pub use report::{efficiency_chain, net_effect, EfficiencyChain, NetEffect, NetFactor, PointError, Report, ReportMeta, SweepReport, SweepRow};
pub use synth::{generate, inject_measured_rates, synthesize, Scenario};
pub use analysis::{analyze, analyze_raw, sweep, Analysis, AnalysisConfig};
