//! INI run configuration and scenario files.
//!
//! Keys carry their unit as a suffix; angles are degrees here and radians
//! everywhere past this module. Unknown keys are rejected so a typo cannot
//! silently fall back to a default.

use std::fs::File;
use std::path::{Path, PathBuf};

use ini::{Ini, Properties};
use losslab_core::analysis::AnalysisConfig;
use losslab_core::power::{CompressionVariant, SuctionSign};
use losslab_core::synth::{LeakClearances, NoiseSigma};
use losslab_core::{gamma_isentropic, ClearanceProfile, GasModel, Geometry, PartialMeta, PropertyTable, Scenario};

use crate::CliError;

/// Grid of synthesized traces when neither config nor scenario says otherwise.
pub const DEFAULT_SYNTH_GRID: usize = 3600;

const R32_GAS_CONSTANT: f64 = 159.819_748_923_573_74;

pub const GEOMETRY_KEYS: [&str; 11] = [
    "r1",
    "r2",
    "e",
    "H",
    "b_v",
    "V_clearance",
    "delta_rc",
    "delta_vc",
    "d_port",
    "alpha_s_deg",
    "alpha_d_deg",
];
const GEOMETRY_OPTIONAL: [&str; 1] = ["clearance_profile"];
const GAS_KEYS: [&str; 9] = ["backend", "R_JkgK", "cp_JkgK", "k_WmK", "mu_Pas", "Pr", "gamma", "table", "T_d_K"];
const SOLVER_KEYS: [&str; 3] = ["rho_tol", "max_iter", "adiabatic"];
const ANALYSIS_KEYS: [&str; 6] = [
    "eps_b",
    "lift_threshold_m",
    "suction_sign",
    "compression_variant",
    "smoothing_window",
    "max_revolutions",
];
const SYNTH_KEYS: [&str; 1] = ["n_grid"];
const SCENARIO_KEYS: [&str; 15] = [
    "pulsation_amp",
    "pulsation_phase_deg",
    "valve_delay_deg",
    "valve_lag_close_deg",
    "delta_rc_m",
    "delta_vc_m",
    "heating_dT_K",
    "discharge_overpressure",
    "noise_p_Pa",
    "noise_x_m",
    "noise_y_m",
    "eta_mf",
    "N_rps",
    "noise_seed",
    "n_grid",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub analysis: AnalysisConfig,
    /// Metadata defaults; a trace header overrides each key it sets
    pub operating: PartialMeta,
    pub synth_grid: usize,
}

struct Section<'a> {
    name: &'a str,
    props: Option<&'a Properties>,
    file: &'a str,
}

impl<'a> Section<'a> {
    fn of(ini: &'a Ini, name: &'a str, file: &'a str) -> Self {
        Section {
            name,
            props: ini.section(Some(name)),
            file,
        }
    }

    fn err(&self, msg: String) -> CliError {
        CliError::config(format!("{}: [{}] {msg}", self.file, self.name))
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        if let Some(p) = self.props {
            for (k, _) in p.iter() {
                if !allowed.contains(&k) {
                    return Err(self.err(format!("unknown key `{k}`")));
                }
            }
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.props.and_then(|p| p.get(key)).map(str::trim)
    }

    fn opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Some)
                .ok_or_else(|| self.err(format!("key `{key}` is not a finite number: `{s}`"))),
        }
    }

    fn req(&self, key: &str) -> Result<f64, CliError> {
        self.opt(key)?.ok_or_else(|| self.err(format!("missing key `{key}`")))
    }

    fn count(&self, key: &str) -> Result<Option<usize>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<usize>()
                .map(Some)
                .map_err(|_| self.err(format!("key `{key}` is not a non-negative integer: `{s}`"))),
        }
    }

    fn flag(&self, key: &str) -> Result<Option<bool>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some("true" | "yes" | "1") => Ok(Some(true)),
            Some("false" | "no" | "0") => Ok(Some(false)),
            Some(s) => Err(self.err(format!("key `{key}` is not a boolean: `{s}`"))),
        }
    }
}

fn read_ini(path: &Path) -> Result<Ini, CliError> {
    Ini::load_from_file(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let ini = read_ini(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&ini, &path.display().to_string(), base)
}

/// `file` labels diagnostics; relative table and profile paths resolve against `base`.
pub fn parse_config(ini: &Ini, file: &str, base: &Path) -> Result<RunConfig, CliError> {
    for (name, _) in ini.iter() {
        match name {
            None | Some("geometry" | "gas" | "operating" | "solver" | "analysis" | "synth") => {}
            Some(other) => return Err(CliError::config(format!("{file}: unknown section [{other}]"))),
        }
    }
    let geometry = parse_geometry(&Section::of(ini, "geometry", file), base)?;

    let op = Section::of(ini, "operating", file);
    let mut allowed: Vec<&str> = vec!["p_s_Pa", "p_d_Pa"];
    allowed.extend(PartialMeta::KEYS);
    op.check_keys(&allowed)?;
    let p_s = op.req("p_s_Pa")?;
    let p_d = op.req("p_d_Pa")?;
    let mut operating = PartialMeta::default();
    for key in PartialMeta::KEYS {
        if let Some(v) = op.opt(key)? {
            operating.set(key, v);
        }
    }

    let gas = Section::of(ini, "gas", file);
    let model = parse_gas(&gas, base, p_s, p_d, operating.get("T_s_K"))?;

    let mut analysis = AnalysisConfig::new(geometry, model, p_s, p_d);
    analysis.align.defaults = operating.clone();

    let solver = Section::of(ini, "solver", file);
    solver.check_keys(&SOLVER_KEYS)?;
    if let Some(v) = solver.opt("rho_tol")? {
        analysis.solver.rho_tol = v;
    }
    if let Some(v) = solver.count("max_iter")? {
        analysis.solver.max_iter = v;
    }
    if let Some(v) = solver.flag("adiabatic")? {
        analysis.solver.adiabatic = v;
    }

    let an = Section::of(ini, "analysis", file);
    an.check_keys(&ANALYSIS_KEYS)?;
    if let Some(v) = an.opt("eps_b")? {
        analysis.eps_b = v;
    }
    if let Some(v) = an.opt("lift_threshold_m")? {
        analysis.lift_threshold = v;
    }
    if let Some(s) = an.raw("suction_sign") {
        analysis.power.suction_sign = match s {
            "corrected" => SuctionSign::Corrected,
            "printed" => SuctionSign::Printed,
            _ => return Err(an.err(format!("suction_sign must be `corrected` or `printed`, got `{s}`"))),
        };
    }
    if let Some(s) = an.raw("compression_variant") {
        analysis.power.compression_variant = match s {
            "discharge_over_end" => CompressionVariant::DischargeOverEnd,
            "printed" => CompressionVariant::Printed,
            _ => {
                return Err(an.err(format!(
                    "compression_variant must be `discharge_over_end` or `printed`, got `{s}`"
                )))
            }
        };
    }
    if let Some(v) = an.count("smoothing_window")? {
        analysis.smoothing_window = v;
    }
    analysis.align.max_revolutions = an.count("max_revolutions")?;

    let synth = Section::of(ini, "synth", file);
    synth.check_keys(&SYNTH_KEYS)?;
    let synth_grid = synth.count("n_grid")?.unwrap_or(DEFAULT_SYNTH_GRID);

    analysis.validate().map_err(|e| CliError::config(format!("{file}: {e}")))?;
    Ok(RunConfig {
        analysis,
        operating,
        synth_grid,
    })
}

fn parse_geometry(sec: &Section, base: &Path) -> Result<Geometry, CliError> {
    if sec.props.is_none() {
        return Err(sec.err("section is missing".into()));
    }
    let mut allowed = GEOMETRY_KEYS.to_vec();
    allowed.extend(GEOMETRY_OPTIONAL);
    sec.check_keys(&allowed)?;
    let clearance_profile = match sec.raw("clearance_profile") {
        None => None,
        Some(p) => {
            let path = resolve(base, p);
            let f = File::open(&path).map_err(|e| sec.err(format!("clearance profile {}: {e}", path.display())))?;
            Some(ClearanceProfile::from_csv(f).map_err(|e| sec.err(format!("clearance profile: {e}")))?)
        }
    };
    let g = Geometry {
        r1: sec.req("r1")?,
        r2: sec.req("r2")?,
        e: sec.req("e")?,
        h: sec.req("H")?,
        b_v: sec.req("b_v")?,
        v_clearance: sec.req("V_clearance")?,
        delta_rc: sec.req("delta_rc")?,
        delta_vc: sec.req("delta_vc")?,
        d_port: sec.req("d_port")?,
        alpha_s: sec.req("alpha_s_deg")?.to_radians(),
        alpha_d: sec.req("alpha_d_deg")?.to_radians(),
        clearance_profile,
    };
    g.validate().map_err(|e| sec.err(e.to_string()))?;
    Ok(g)
}

fn parse_gas(sec: &Section, base: &Path, p_s: f64, p_d: f64, t_s: Option<f64>) -> Result<GasModel, CliError> {
    sec.check_keys(&GAS_KEYS)?;
    let wrap = |e: losslab_core::Error| sec.err(e.to_string());
    let r = sec.opt("R_JkgK")?.unwrap_or(R32_GAS_CONSTANT);
    let t_d = sec.opt("T_d_K")?;
    let gamma = match (sec.opt("gamma")?, t_d) {
        (_, Some(_)) => None,
        (Some(g), None) => Some(g),
        (None, None) => return Err(sec.err("missing key `gamma` (or `T_d_K` to derive it)".into())),
    };
    // Placeholder until the reference states fix it.
    let g0 = gamma.unwrap_or(1.2);
    let model = match sec.raw("backend").unwrap_or("ideal") {
        "ideal" => {
            let cp = sec.opt("cp_JkgK")?.unwrap_or(900.0);
            let k = sec.opt("k_WmK")?.unwrap_or(0.0125);
            let mu = sec.opt("mu_Pas")?.unwrap_or(1.2e-5);
            let pr = sec.opt("Pr")?.unwrap_or(cp * mu / k);
            GasModel::ideal(r, cp, k, mu, pr, g0).map_err(wrap)?
        }
        "table" => {
            let p = sec.raw("table").ok_or_else(|| sec.err("missing key `table` for the table backend".into()))?;
            let table = PropertyTable::from_path(resolve(base, p)).map_err(wrap)?;
            GasModel::tabulated(table, r, g0).map_err(wrap)?
        }
        other => return Err(sec.err(format!("backend must be `ideal` or `table`, got `{other}`"))),
    };
    let Some(t_d) = t_d else {
        return Ok(model);
    };
    let t_s = t_s.ok_or_else(|| sec.err("`T_d_K` needs `T_s_K` in [operating]".into()))?;
    let v_s = 1.0 / model.density(p_s, t_s).map_err(wrap)?;
    let v_d = 1.0 / model.density(p_d, t_d).map_err(wrap)?;
    let g = gamma_isentropic(p_s, v_s, p_d, v_d).map_err(wrap)?;
    log::info!("gamma {g:.6} from reference states ({p_s} Pa, {t_s} K) -> ({p_d} Pa, {t_d} K)");
    model.with_gamma(g).map_err(wrap)
}

/// A scenario file plus its optional grid override.
pub fn load_scenario(path: &Path) -> Result<(Scenario, Option<usize>), CliError> {
    let ini = read_ini(path)?;
    parse_scenario(&ini, &path.display().to_string())
}

pub fn parse_scenario(ini: &Ini, file: &str) -> Result<(Scenario, Option<usize>), CliError> {
    let sec = Section::of(ini, "scenario", file);
    if sec.props.is_none() {
        return Err(sec.err("section is missing".into()));
    }
    sec.check_keys(&SCENARIO_KEYS)?;
    let deg = |k: &str| -> Result<f64, CliError> { Ok(sec.opt(k)?.unwrap_or(0.0).to_radians()) };
    let leak_clearances = match (sec.opt("delta_rc_m")?, sec.opt("delta_vc_m")?) {
        (None, None) => None,
        (Some(delta_rc), Some(delta_vc)) => Some(LeakClearances { delta_rc, delta_vc }),
        _ => return Err(sec.err("set both `delta_rc_m` and `delta_vc_m`, or neither".into())),
    };
    let scenario = Scenario {
        pulsation_amp: sec.opt("pulsation_amp")?.unwrap_or(0.0),
        pulsation_phase: deg("pulsation_phase_deg")?,
        valve_delay: deg("valve_delay_deg")?,
        valve_lag_close: deg("valve_lag_close_deg")?,
        leak_clearances,
        heating_dT: sec.opt("heating_dT_K")?.unwrap_or(0.0),
        discharge_overpressure: sec.opt("discharge_overpressure")?.unwrap_or(0.0),
        noise_sigma: NoiseSigma {
            pressure: sec.opt("noise_p_Pa")?.unwrap_or(0.0),
            vane: sec.opt("noise_x_m")?.unwrap_or(0.0),
            lift: sec.opt("noise_y_m")?.unwrap_or(0.0),
        },
        eta_mf: sec.opt("eta_mf")?.unwrap_or(1.0),
        n_rps: sec.opt("N_rps")?,
        noise_seed: sec.count("noise_seed")?.unwrap_or(0) as u64,
    };
    scenario.validate().map_err(|e| sec.err(e.to_string()))?;
    Ok((scenario, sec.count("n_grid")?))
}

/// Writes a scenario in the file format [`parse_scenario`] reads.
pub fn scenario_ini(s: &Scenario, n_grid: Option<usize>) -> String {
    let mut out = String::from("[scenario]\n");
    let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
    put("pulsation_amp", format!("{:?}", s.pulsation_amp));
    put("pulsation_phase_deg", format!("{:?}", s.pulsation_phase.to_degrees()));
    put("valve_delay_deg", format!("{:?}", s.valve_delay.to_degrees()));
    put("valve_lag_close_deg", format!("{:?}", s.valve_lag_close.to_degrees()));
    if let Some(l) = s.leak_clearances {
        put("delta_rc_m", format!("{:?}", l.delta_rc));
        put("delta_vc_m", format!("{:?}", l.delta_vc));
    }
    put("heating_dT_K", format!("{:?}", s.heating_dT));
    put("discharge_overpressure", format!("{:?}", s.discharge_overpressure));
    put("noise_p_Pa", format!("{:?}", s.noise_sigma.pressure));
    put("noise_x_m", format!("{:?}", s.noise_sigma.vane));
    put("noise_y_m", format!("{:?}", s.noise_sigma.lift));
    put("eta_mf", format!("{:?}", s.eta_mf));
    if let Some(n) = s.n_rps {
        put("N_rps", format!("{n:?}"));
    }
    put("noise_seed", s.noise_seed.to_string());
    if let Some(n) = n_grid {
        put("n_grid", n.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = "\
[geometry]
r1 = 0.025
r2 = 0.0215
e = 0.0035
H = 0.02
b_v = 0.004
V_clearance = 1.4e-7
delta_rc = 15e-6
delta_vc = 15e-6
d_port = 0.008
alpha_s_deg = 20
alpha_d_deg = 30

[gas]
gamma = 1.25

[operating]
p_s_Pa = 5e5
p_d_Pa = 2.1e6
N_rps = 80
T_s_K = 267.15
";

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        let ini = Ini::load_from_str(text).unwrap();
        parse_config(&ini, "test.ini", Path::new("."))
    }

    #[test]
    fn reference_config_matches_reference_geometry() {
        let c = parse(REFERENCE).unwrap();
        let g = Geometry::reference();
        assert_eq!(c.analysis.geometry.r1, g.r1);
        assert!((c.analysis.geometry.alpha_s - g.alpha_s).abs() < 1e-15);
        assert_eq!(c.operating.get("N_rps"), Some(80.0));
        assert_eq!(c.analysis.model.gamma(), 1.25);
        assert_eq!(c.synth_grid, DEFAULT_SYNTH_GRID);
    }

    #[test]
    fn missing_geometry_key_is_named() {
        let text = REFERENCE.replace("r1 = 0.025\n", "");
        let e = parse(&text).unwrap_err();
        assert_eq!(e.code, crate::EXIT_CONFIG);
        assert!(e.message.contains("`r1`"), "{}", e.message);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse(&REFERENCE.replace("H = 0.02", "H_m = 0.02")).unwrap_err();
        assert!(e.message.contains("H_m"));
        let e = parse(&format!("{REFERENCE}\n[extra]\nx = 1\n")).unwrap_err();
        assert!(e.message.contains("[extra]"));
    }

    #[test]
    fn gamma_from_reference_states() {
        let text = REFERENCE.replace("gamma = 1.25", "T_d_K = 345.0");
        let c = parse(&text).unwrap();
        let expect = (2.1e6f64 / 5e5).ln() / (2.1e6f64 / 5e5 * 267.15 / 345.0).ln();
        assert!((c.analysis.model.gamma() - expect).abs() < 1e-12);
    }

    #[test]
    fn switches_parse() {
        let text = format!("{REFERENCE}\n[analysis]\nsuction_sign = printed\ncompression_variant = printed\n[solver]\nadiabatic = true\n");
        let c = parse(&text).unwrap();
        assert_eq!(c.analysis.power.suction_sign, SuctionSign::Printed);
        assert_eq!(c.analysis.power.compression_variant, CompressionVariant::Printed);
        assert!(c.analysis.solver.adiabatic);
        assert!(parse(&format!("{REFERENCE}\n[analysis]\nsuction_sign = flipped\n")).is_err());
    }

    #[test]
    fn scenario_round_trips() {
        let s = Scenario {
            pulsation_amp: 0.08,
            valve_delay: 10f64.to_radians(),
            n_rps: Some(160.0),
            leak_clearances: None,
            ..Scenario::zero()
        };
        let text = scenario_ini(&s, Some(720));
        let (back, n) = parse_scenario(&Ini::load_from_str(&text).unwrap(), "s.ini").unwrap();
        assert_eq!(n, Some(720));
        assert_eq!(back.pulsation_amp, s.pulsation_amp);
        assert!((back.valve_delay - s.valve_delay).abs() < 1e-15);
        assert_eq!(back.leak_clearances, None);
        assert_eq!(back.n_rps, Some(160.0));
    }

    #[test]
    fn negative_amplitude_is_a_config_error() {
        let ini = Ini::load_from_str("[scenario]\npulsation_amp = -0.1\n").unwrap();
        let e = parse_scenario(&ini, "s.ini").unwrap_err();
        assert_eq!(e.code, crate::EXIT_CONFIG);
    }
}
