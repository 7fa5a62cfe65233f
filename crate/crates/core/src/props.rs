//! Refrigerant property backends.
//!
//! Two backends are provided: a calorically perfect ideal gas with constant
//! transport properties, and a rectangular `(p, T)` grid loaded from CSV and
//! queried by bilinear interpolation. The isentropic exponent is held on the
//! model and used by every isentropic mapping downstream; it is normally set
//! once per run with [`gamma_isentropic`].

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Universal gas constant [J/(mol·K)].
pub const UNIVERSAL_GAS_CONSTANT: f64 = 8.314_462_618;
/// Molar mass of R32 (difluoromethane) [kg/mol].
pub const R32_MOLAR_MASS: f64 = 0.052_024;

/// Header of the property-table CSV, in column order.
pub const TABLE_HEADER: [&str; 7] = [
    "p_Pa", "T_K", "rho_kgm3", "h_Jkg", "k_WmK", "mu_Pas", "cp_JkgK",
];

/// Thermodynamic state of the refrigerant at one point of the cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasState {
    /// Pressure [Pa]
    pub p: f64,
    /// Temperature [K]
    pub t: f64,
    /// Density [kg/m³]
    pub rho: f64,
    /// Specific enthalpy [J/kg]
    pub h: f64,
}

/// Transport and caloric properties feeding the convection correlations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transport {
    /// Thermal conductivity [W/(m·K)]
    pub k: f64,
    /// Prandtl number [-]
    pub pr: f64,
    /// Isobaric specific heat [J/(kg·K)]
    pub cp: f64,
    /// Dynamic viscosity [Pa·s]
    pub mu: f64,
}

/// Rectangular property grid, stored row-major with pressure as the outer index.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyTable {
    pressures: Vec<f64>,
    temperatures: Vec<f64>,
    rho: Vec<f64>,
    h: Vec<f64>,
    k: Vec<f64>,
    mu: Vec<f64>,
    cp: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    i: usize,
    j: usize,
    fp: f64,
    ft: f64,
}

impl PropertyTable {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: Read>(reader: R, source_name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let header: Vec<&str> = headers.iter().collect();
        if header != TABLE_HEADER {
            return Err(Error::Parse {
                source_name: source_name.to_string(),
                row: 1,
                message: format!(
                    "property table header must be `{}`, found `{}`",
                    TABLE_HEADER.join(","),
                    header.join(",")
                ),
            });
        }

        let mut rows: Vec<[f64; 7]> = Vec::new();
        for (idx, record) in rdr.records().enumerate() {
            let row = idx + 2;
            let record = record?;
            let mut vals = [0.0; 7];
            for (c, v) in vals.iter_mut().enumerate() {
                let field = record.get(c).ok_or_else(|| Error::Parse {
                    source_name: source_name.to_string(),
                    row,
                    message: format!("missing column `{}`", TABLE_HEADER[c]),
                })?;
                *v = field.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                    Error::Parse {
                        source_name: source_name.to_string(),
                        row,
                        message: format!("column `{}`: `{field}` is not a finite number", TABLE_HEADER[c]),
                    }
                })?;
            }
            rows.push(vals);
        }
        Self::from_rows(&rows).map_err(|e| match e {
            Error::Config(message) => Error::Parse {
                source_name: source_name.to_string(),
                row: 0,
                message,
            },
            other => other,
        })
    }

    /// Builds a table from `[p, T, rho, h, k, mu, cp]` rows ordered p-major.
    pub fn from_rows(rows: &[[f64; 7]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Config("property table is empty".into()));
        }
        let mut temperatures = Vec::new();
        for r in rows {
            if r[0] != rows[0][0] {
                break;
            }
            temperatures.push(r[1]);
        }
        let nt = temperatures.len();
        if !rows.len().is_multiple_of(nt) {
            return Err(Error::Config(format!(
                "property table has {} rows, not a multiple of the {nt} temperatures of the first pressure block",
                rows.len()
            )));
        }
        let np = rows.len() / nt;
        if np < 2 || nt < 2 {
            return Err(Error::Config("property table needs at least 2 pressures and 2 temperatures".into()));
        }
        let mut pressures = Vec::with_capacity(np);
        for i in 0..np {
            let p = rows[i * nt][0];
            for j in 0..nt {
                let r = &rows[i * nt + j];
                if r[0] != p || r[1] != temperatures[j] {
                    return Err(Error::Config(format!(
                        "property table is not a rectangular p-major grid at data row {}",
                        i * nt + j + 1
                    )));
                }
            }
            pressures.push(p);
        }
        if !strictly_increasing(&pressures) || !strictly_increasing(&temperatures) {
            return Err(Error::Config("property table pressures and temperatures must be strictly increasing".into()));
        }
        let col = |c: usize| rows.iter().map(|r| r[c]).collect::<Vec<_>>();
        let rho = col(2);
        let k = col(4);
        let mu = col(5);
        let cp = col(6);
        if rho.iter().chain(&k).chain(&mu).chain(&cp).any(|&v| v <= 0.0) {
            return Err(Error::Config("property table has non-positive rho, k, mu or cp".into()));
        }
        if pressures[0] <= 0.0 || temperatures[0] <= 0.0 {
            return Err(Error::Config("property table grid must be in positive p and T".into()));
        }
        Ok(PropertyTable {
            pressures,
            temperatures,
            rho,
            h: col(3),
            k,
            mu,
            cp,
        })
    }

    pub fn pressure_range(&self) -> (f64, f64) {
        (self.pressures[0], *self.pressures.last().unwrap())
    }

    pub fn temperature_range(&self) -> (f64, f64) {
        (self.temperatures[0], *self.temperatures.last().unwrap())
    }

    fn cell(&self, p: f64, t: f64) -> Result<Cell> {
        let (p0, p1) = self.pressure_range();
        let (t0, t1) = self.temperature_range();
        if !(p >= p0 && p <= p1 && t >= t0 && t <= t1) {
            return Err(Error::OutOfTable { p, t });
        }
        let (i, fp) = locate(&self.pressures, p);
        let (j, ft) = locate(&self.temperatures, t);
        Ok(Cell { i, j, fp, ft })
    }

    fn interp(&self, values: &[f64], c: Cell) -> f64 {
        let nt = self.temperatures.len();
        let v = |i: usize, j: usize| values[i * nt + j];
        if c.fp == 0.0 && c.ft == 0.0 {
            return v(c.i, c.j);
        }
        let i1 = (c.i + 1).min(self.pressures.len() - 1);
        let j1 = (c.j + 1).min(nt - 1);
        let lo = v(c.i, c.j) * (1.0 - c.ft) + v(c.i, j1) * c.ft;
        let hi = v(i1, c.j) * (1.0 - c.ft) + v(i1, j1) * c.ft;
        lo * (1.0 - c.fp) + hi * c.fp
    }
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

/// Index of the lower grid node and fractional position within the cell.
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let n = grid.len();
    let idx = grid.partition_point(|&g| g <= x);
    if idx == 0 {
        return (0, 0.0);
    }
    let i = (idx - 1).min(n - 2);
    if grid[i] == x {
        return (i, 0.0);
    }
    let f = (x - grid[i]) / (grid[i + 1] - grid[i]);
    (i, f.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    IdealGas,
    Table(PropertyTable),
}

/// Property model for one run. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GasModel {
    backend: Backend,
    /// Specific gas constant [J/(kg·K)]
    r: f64,
    cp: f64,
    k: f64,
    mu: f64,
    pr: f64,
    gamma: f64,
}

impl GasModel {
    /// Ideal gas with constant properties.
    pub fn ideal(r: f64, cp: f64, k: f64, mu: f64, pr: f64, gamma: f64) -> Result<Self> {
        if !(r > 0.0) || !(cp > r) {
            return Err(Error::Config(format!("ideal gas needs R > 0 and cp > R (R = {r}, cp = {cp})")));
        }
        if !(k > 0.0) || !(mu > 0.0) || !(pr > 0.0) {
            return Err(Error::Config("ideal gas needs k, mu and Pr > 0".into()));
        }
        check_gamma(gamma)?;
        Ok(GasModel {
            backend: Backend::IdealGas,
            r,
            cp,
            k,
            mu,
            pr,
            gamma,
        })
    }

    /// Ideal-gas R32 with representative vapour transport properties.
    pub fn r32_ideal(gamma: f64) -> Result<Self> {
        let r = UNIVERSAL_GAS_CONSTANT / R32_MOLAR_MASS;
        let cp = 900.0;
        let k = 0.0125;
        let mu = 1.2e-5;
        Self::ideal(r, cp, k, mu, cp * mu / k, gamma)
    }

    /// Tabulated backend. `r` is still needed by the choked-flow leakage law.
    pub fn tabulated(table: PropertyTable, r: f64, gamma: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::Config("specific gas constant must be positive".into()));
        }
        check_gamma(gamma)?;
        Ok(GasModel {
            backend: Backend::Table(table),
            r,
            cp: f64::NAN,
            k: f64::NAN,
            mu: f64::NAN,
            pr: f64::NAN,
            gamma,
        })
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        self.gamma = gamma;
        Ok(self)
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn gas_constant(&self) -> f64 {
        self.r
    }

    pub fn is_ideal(&self) -> bool {
        matches!(self.backend, Backend::IdealGas)
    }

    pub fn density(&self, p: f64, t: f64) -> Result<f64> {
        check_state(p, t)?;
        match &self.backend {
            Backend::IdealGas => Ok(p / (self.r * t)),
            Backend::Table(tab) => {
                let c = tab.cell(p, t)?;
                Ok(tab.interp(&tab.rho, c))
            }
        }
    }

    /// Specific enthalpy. The ideal backend takes h = cp·T (zero at 0 K).
    pub fn enthalpy(&self, p: f64, t: f64) -> Result<f64> {
        check_state(p, t)?;
        match &self.backend {
            Backend::IdealGas => Ok(self.cp * t),
            Backend::Table(tab) => {
                let c = tab.cell(p, t)?;
                Ok(tab.interp(&tab.h, c))
            }
        }
    }

    pub fn internal_energy(&self, p: f64, t: f64) -> Result<f64> {
        match &self.backend {
            Backend::IdealGas => {
                check_state(p, t)?;
                Ok((self.cp - self.r) * t)
            }
            Backend::Table(_) => Ok(self.enthalpy(p, t)? - p / self.density(p, t)?),
        }
    }

    pub fn transport(&self, p: f64, t: f64) -> Result<Transport> {
        check_state(p, t)?;
        match &self.backend {
            Backend::IdealGas => Ok(Transport {
                k: self.k,
                pr: self.pr,
                cp: self.cp,
                mu: self.mu,
            }),
            Backend::Table(tab) => {
                let c = tab.cell(p, t)?;
                let k = tab.interp(&tab.k, c);
                let mu = tab.interp(&tab.mu, c);
                let cp = tab.interp(&tab.cp, c);
                Ok(Transport { k, pr: cp * mu / k, cp, mu })
            }
        }
    }

    pub fn state(&self, p: f64, t: f64) -> Result<GasState> {
        Ok(GasState {
            p,
            t,
            rho: self.density(p, t)?,
            h: self.enthalpy(p, t)?,
        })
    }

    /// Temperature at pressure `p` whose specific internal energy is `u`.
    pub fn temperature_from_internal_energy(&self, p: f64, u: f64) -> Result<f64> {
        match &self.backend {
            Backend::IdealGas => {
                let t = u / (self.cp - self.r);
                if t > 0.0 && t.is_finite() {
                    Ok(t)
                } else {
                    Err(Error::domain(format!("internal energy {u} J/kg gives non-positive temperature")))
                }
            }
            Backend::Table(tab) => {
                let (mut lo, mut hi) = tab.temperature_range();
                let f = |t: f64| self.internal_energy(p, t).map(|v| v - u);
                let flo = f(lo)?;
                let fhi = f(hi)?;
                if flo.signum() == fhi.signum() && flo != 0.0 {
                    return Err(Error::OutOfTable { p, t: f64::NAN });
                }
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let fm = f(mid)?;
                    if fm.signum() == flo.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-10 {
                        break;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }

    /// T0·(p/p0)^((γ−1)/γ).
    pub fn isentropic_temperature(&self, t0: f64, p0: f64, p: f64) -> f64 {
        t0 * (p / p0).powf((self.gamma - 1.0) / self.gamma)
    }

    /// (2/(γ+1))^((γ+1)/(γ−1)), the choked-flow factor under the square root.
    pub fn critical_flow_factor(&self) -> f64 {
        let g = self.gamma;
        (2.0 / (g + 1.0)).powf((g + 1.0) / (g - 1.0))
    }

    /// Critical pressure ratio (2/(γ+1))^(γ/(γ−1)).
    pub fn critical_pressure_ratio(&self) -> f64 {
        critical_pressure_ratio(self.gamma)
    }
}

pub fn critical_pressure_ratio(gamma: f64) -> f64 {
    (2.0 / (gamma + 1.0)).powf(gamma / (gamma - 1.0))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 1.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("isentropic exponent must exceed 1, got {gamma}")))
    }
}

fn check_state(p: f64, t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("temperature must be positive, got {t} K")));
    }
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::domain(format!("pressure must be non-negative, got {p} Pa")));
    }
    Ok(())
}

/// Isentropic exponent from two reference states: ln(p_d/p_s) / ln(v_s/v_d).
pub fn gamma_isentropic(p_s: f64, v_s: f64, p_d: f64, v_d: f64) -> Result<f64> {
    if [p_s, v_s, p_d, v_d].iter().any(|&x| !(x > 0.0)) {
        return Err(Error::UndefinedExponent("pressures and specific volumes must be positive".into()));
    }
    if p_d == p_s || v_d == v_s {
        return Err(Error::UndefinedExponent(format!(
            "degenerate reference states (p_s = {p_s}, p_d = {p_d}, v_s = {v_s}, v_d = {v_d})"
        )));
    }
    let g = (p_d / p_s).ln() / (v_s / v_d).ln();
    if g.is_finite() {
        Ok(g)
    } else {
        Err(Error::UndefinedExponent(format!("non-finite exponent {g}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_table() -> PropertyTable {
        // rho = p/(100 T), h = 1000 T, k = 0.01 + 1e-5 T, mu = 1e-5, cp = 1000 + p*1e-4
        let mut rows = Vec::new();
        for &p in &[1e5, 2e5, 4e5] {
            for &t in &[250.0, 300.0, 350.0, 400.0] {
                rows.push([p, t, p / (100.0 * t), 1000.0 * t, 0.01 + 1e-5 * t, 1e-5, 1000.0 + p * 1e-4]);
            }
        }
        PropertyTable::from_rows(&rows).unwrap()
    }

    #[test]
    fn gamma_of_constructed_isentrope() {
        let (p_s, p_d) = (5e5_f64, 2.1e6_f64);
        let v_s = 0.08;
        let v_d = v_s * (p_s / p_d).powf(1.0 / 1.25);
        let g = gamma_isentropic(p_s, v_s, p_d, v_d).unwrap();
        assert!((g - 1.25).abs() < 1e-12, "{g}");
    }

    #[test]
    fn gamma_degenerate_states_error() {
        assert!(matches!(gamma_isentropic(5e5, 0.08, 5e5, 0.02), Err(Error::UndefinedExponent(_))));
        assert!(matches!(gamma_isentropic(5e5, 0.08, 2e6, 0.08), Err(Error::UndefinedExponent(_))));
    }

    #[test]
    fn gamma_from_r32_reference_states() {
        // v_s at (0.5 MPa, 267.15 K); v_d on the isentrope at 2.1 MPa (R32 property oracle).
        let v_s = 0.076_873_192_347_090_47;
        let v_d = 0.023_259_027_882_658_125;
        let g = gamma_isentropic(5e5, v_s, 2.1e6, v_d).unwrap();
        assert!((g - 1.200_441_581_332_014_8).abs() < 1e-12, "{g}");
    }

    #[test]
    fn ideal_density_at_suction_reference() {
        let m = GasModel::r32_ideal(1.25).unwrap();
        let rho = m.density(0.5e6, 267.15).unwrap();
        assert!((rho - 11.710_741_154_516_377).abs() < 1e-9, "{rho}");
        assert_eq!(m.density(0.0, 267.15).unwrap(), 0.0);
        assert!(m.density(1e5, 0.0).is_err());
        assert!(m.density(1e5, -3.0).is_err());
    }

    #[test]
    fn ideal_transport_is_configured_constants() {
        let m = GasModel::ideal(160.0, 900.0, 0.012, 1.1e-5, 0.8, 1.25).unwrap();
        let t = m.transport(3e5, 280.0).unwrap();
        assert_eq!(t, Transport { k: 0.012, pr: 0.8, cp: 900.0, mu: 1.1e-5 });
    }

    #[test]
    fn ideal_model_validation() {
        assert!(GasModel::ideal(160.0, 150.0, 0.01, 1e-5, 1.0, 1.2).is_err());
        assert!(GasModel::ideal(160.0, 900.0, 0.01, 1e-5, 1.0, 1.0).is_err());
        assert!(GasModel::ideal(160.0, 900.0, 0.01, 1e-5, 0.0, 1.2).is_err());
    }

    #[test]
    fn table_exact_on_nodes() {
        let m = GasModel::tabulated(small_table(), 100.0, 1.3).unwrap();
        assert_eq!(m.density(2e5, 300.0).unwrap(), 2e5 / (100.0 * 300.0));
        assert_eq!(m.enthalpy(4e5, 400.0).unwrap(), 400_000.0);
        let tr = m.transport(1e5, 250.0).unwrap();
        assert_eq!(tr.cp, 1010.0);
        assert_eq!(tr.k, 0.01 + 1e-5 * 250.0);
    }

    #[test]
    fn table_mid_cell_bracketed() {
        let m = GasModel::tabulated(small_table(), 100.0, 1.3).unwrap();
        let (p, t) = (1.4e5, 321.0);
        let rho = m.density(p, t).unwrap();
        let corners = [1e5 / 30000.0, 1e5 / 35000.0, 2e5 / 30000.0, 2e5 / 35000.0];
        let lo = corners.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(rho > lo && rho < hi);
        let tr = m.transport(p, t).unwrap();
        assert!(tr.cp > 1010.0 && tr.cp < 1020.0);
        assert!(tr.k > 0.01 + 1e-5 * 300.0 && tr.k < 0.01 + 1e-5 * 350.0);
    }

    #[test]
    fn table_out_of_range_is_explicit() {
        let m = GasModel::tabulated(small_table(), 100.0, 1.3).unwrap();
        assert!(matches!(m.density(5e5, 300.0), Err(Error::OutOfTable { .. })));
        assert!(matches!(m.density(2e5, 200.0), Err(Error::OutOfTable { .. })));
    }

    #[test]
    fn table_rejects_ragged_grid() {
        let rows = vec![
            [1e5, 250.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            [1e5, 300.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            [2e5, 250.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            [2e5, 310.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        ];
        assert!(PropertyTable::from_rows(&rows).is_err());
    }

    #[test]
    fn table_csv_header_is_checked() {
        let csv = "p,T,rho,h,k,mu,cp\n1,2,3,4,5,6,7\n";
        let err = PropertyTable::from_reader(csv.as_bytes(), "t.csv").unwrap_err();
        assert!(err.to_string().contains("header"), "{err}");
    }

    #[test]
    fn table_energy_inversion() {
        let m = GasModel::tabulated(small_table(), 100.0, 1.3).unwrap();
        let u = m.internal_energy(2e5, 333.0).unwrap();
        let t = m.temperature_from_internal_energy(2e5, u).unwrap();
        assert!((t - 333.0).abs() < 1e-6, "{t}");
    }

    proptest! {
        #[test]
        fn ideal_gas_law_holds(p in 1e3f64..5e6, t in 150.0f64..500.0) {
            let m = GasModel::r32_ideal(1.25).unwrap();
            let rho = m.density(p, t).unwrap();
            let r = m.gas_constant();
            prop_assert!((rho * r * t - p).abs() <= 4.0 * f64::EPSILON * p);
        }

        #[test]
        fn gamma_is_scale_invariant(
            g in 1.05f64..1.6, c in 0.1f64..10.0, cv in 0.1f64..10.0
        ) {
            let (p_s, p_d, v_s) = (5e5_f64, 2.1e6_f64, 0.08);
            let v_d = v_s * (p_s / p_d).powf(1.0 / g);
            let base = gamma_isentropic(p_s, v_s, p_d, v_d).unwrap();
            let scaled = gamma_isentropic(c * p_s, cv * v_s, c * p_d, cv * v_d).unwrap();
            prop_assert!((base - scaled).abs() < 1e-10 * base);
        }

        #[test]
        fn table_interpolation_monotone_in_cell(f1 in 0.0f64..1.0, f2 in 0.0f64..1.0, ft in 0.0f64..1.0) {
            // density falls with T and rises with p at every node, so it must inside a cell too.
            let m = GasModel::tabulated(small_table(), 100.0, 1.3).unwrap();
            let (a, b) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
            let t = 300.0 + 50.0 * ft;
            let ra = m.density(2e5 + 2e5 * a, t).unwrap();
            let rb = m.density(2e5 + 2e5 * b, t).unwrap();
            prop_assert!(rb >= ra);
            let p = 2e5 + 2e5 * ft;
            let ta = m.density(p, 300.0 + 50.0 * a).unwrap();
            let tb = m.density(p, 300.0 + 50.0 * b).unwrap();
            prop_assert!(tb <= ta);
        }
    }
}
