//! Front end for the `losslab` binary: argument model, commands, exit codes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use losslab_core::analysis::{analyze_raw, sweep};
use losslab_core::{load_trace, synthesize, write_trace, Error, ErrorCategory, PartialMeta};
use thiserror::Error;

pub mod config;

pub use config::{load_config, load_scenario, RunConfig};

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_TRACE: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;

/// A failed command: the exit status plus a one-line diagnostic.
#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    /// Maps a core error; I/O failures take `io_code` because only the caller
    /// knows whether a config, a trace or an output path was involved.
    pub fn from_core(e: &Error, io_code: u8) -> Self {
        let code = match e.category() {
            ErrorCategory::Config => EXIT_CONFIG,
            ErrorCategory::Trace => EXIT_TRACE,
            ErrorCategory::Solver => EXIT_SOLVER,
            ErrorCategory::Io => io_code,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "losslab", version, about = "Loss decomposition for rolling-piston compressor cycles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose one measured cycle into mass and power losses
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write chamber_states.csv
        #[arg(long)]
        dump_states: bool,
        /// Zero wall heat flux in the suction-chamber solver
        #[arg(long)]
        adiabatic: bool,
    },
    /// Analyze every trace matching a glob and tabulate the results
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        traces: String,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; all cores when omitted
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Write a synthetic trace with known, injected losses
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> u8 {
    let r = match cli.command {
        Command::Analyze {
            config,
            trace,
            out,
            dump_states,
            adiabatic,
        } => cmd_analyze(&config, &trace, &out, dump_states, adiabatic),
        Command::Sweep {
            config,
            traces,
            out,
            jobs,
        } => cmd_sweep(&config, &traces, &out, jobs),
        Command::Synth { config, scenario, out } => cmd_synth(&config, &scenario, &out),
    };
    match r {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("losslab: {}", e.message);
            e.code
        }
    }
}

/// Writes through a sibling temp file and renames it into place, so readers
/// never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::config(format!("cannot write {}: {e}", path.display()));
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(fail)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(fail)?;
    f.write_all(bytes).map_err(fail)?;
    f.sync_all().map_err(fail)?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        fail(e)
    })
}

fn csv_bytes(header: &str, rows: impl Iterator<Item = String>) -> Vec<u8> {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s.into_bytes()
}

pub fn cmd_analyze(config: &Path, trace: &Path, out: &Path, dump_states: bool, adiabatic: bool) -> Result<(), CliError> {
    let mut cfg = load_config(config)?;
    if adiabatic {
        cfg.analysis.solver.adiabatic = true;
    }
    let raw = load_trace(trace).map_err(|e| CliError::from_core(&e, EXIT_TRACE))?;
    let a = analyze_raw(&cfg.analysis, &raw).map_err(|e| CliError::from_core(&e, EXIT_TRACE))?;
    for w in &a.report.warnings {
        log::info!("{w}");
    }
    let json = a.report.to_json().map_err(|e| CliError::from_core(&e, EXIT_CONFIG))?;
    write_atomic(&out.join("report.json"), json.as_bytes())?;
    let pv = csv_bytes("V_m3,p_Pa,leg", a.pv.iter().map(|p| format!("{:?},{:?},{}", p.volume, p.p, p.leg)));
    write_atomic(&out.join("pv_diagram.csv"), &pv)?;
    if dump_states {
        let rows = a.states.iter().map(|s| {
            format!("{:?},{:?},{:?},{:?},{:?}", s.alpha.to_degrees(), s.t, s.rho, s.m_c, s.dq)
        });
        write_atomic(&out.join("chamber_states.csv"), &csv_bytes("alpha_deg,T_K,rho_kgm3,m_c_kg,dQ_J", rows))?;
    }
    log::info!(
        "eta_v pred {:.4} meas {:.4}, eta {:.4}",
        a.report.mass_losses.eta_v_pred,
        a.report.mass_losses.eta_v_meas,
        a.report.efficiencies.eta_total
    );
    Ok(())
}

/// Exits 0 when at least one point succeeds; otherwise with the first point's code.
pub fn cmd_sweep(config: &Path, pattern: &str, out: &Path, jobs: Option<usize>) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| CliError::config(format!("bad trace glob `{pattern}`: {e}")))?
        .filter_map(std::result::Result::ok)
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError {
            code: EXIT_TRACE,
            message: format!("no trace matches `{pattern}`"),
        });
    }
    let points = paths
        .iter()
        .map(|p| {
            let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            (label, load_trace(p))
        })
        .collect();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::config("--jobs must be at least 1"));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::config(format!("cannot start worker pool: {e}")))?;
    let report = pool
        .install(|| sweep(&cfg.analysis, points))
        .map_err(|e| CliError::from_core(&e, EXIT_TRACE))?;

    let core = |e: Error| CliError::from_core(&e, EXIT_CONFIG);
    let mut buf = Vec::new();
    report.write_lambdas(&mut buf).map_err(core)?;
    write_atomic(&out.join("sweep_lambdas.csv"), &buf)?;
    buf.clear();
    report.write_power(&mut buf).map_err(core)?;
    write_atomic(&out.join("sweep_power.csv"), &buf)?;
    buf.clear();
    report.write_rates(&mut buf).map_err(core)?;
    write_atomic(&out.join("sweep_rates.csv"), &buf)?;
    write_atomic(&out.join("sweep_report.json"), report.to_json().map_err(core)?.as_bytes())?;

    for e in &report.errors {
        eprintln!("losslab: point {}: {}", e.label, e.message);
    }
    log::info!("{} of {} points analyzed", report.rows.len(), paths.len());
    if report.rows.is_empty() {
        let code = match report.errors.first().map(|e| e.category.as_str()) {
            Some("config") => EXIT_CONFIG,
            Some("solver") => EXIT_SOLVER,
            _ => EXIT_TRACE,
        };
        return Err(CliError {
            code,
            message: "every sweep point failed".into(),
        });
    }
    Ok(())
}

/// Fields [`losslab_core::inject_measured_rates`] overwrites; a config need not set them.
const SYNTH_FILLED: [(&str, f64); 2] = [("m_dot_meas_kgs", 0.0), ("W_in_W", 0.0)];

pub fn cmd_synth(config: &Path, scenario: &Path, out: &Path) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let (sc, grid) = load_scenario(scenario)?;
    let mut meta = cfg.operating.clone();
    if let Some(n) = sc.n_rps {
        meta.set("N_rps", n);
    }
    let t_s = meta.get("T_s_K");
    let mut filler = PartialMeta::default();
    for (k, v) in SYNTH_FILLED {
        filler.set(k, v);
    }
    if let Some(t) = t_s {
        for k in ["T_0_K", "T_os_K", "T_A_K", "T_B_K", "T_C_K"] {
            filler.set(k, t);
        }
    }
    let meta = meta.overlay(&filler).complete().map_err(|e| CliError::from_core(&e, EXIT_CONFIG))?;
    let a = &cfg.analysis;
    let n = grid.unwrap_or(cfg.synth_grid);
    let trace = synthesize(&a.geometry, &a.model, &meta, a.p_s, a.p_d, &sc, n).map_err(|e| CliError {
        code: EXIT_CONFIG,
        message: format!("{}: {e}", scenario.display()),
    })?;
    let mut buf = Vec::new();
    write_trace(&trace, &mut buf).map_err(|e| CliError::from_core(&e, EXIT_CONFIG))?;
    write_atomic(out, &buf)
}
