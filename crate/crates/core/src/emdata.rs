//! Electromagnetic dataset: impedance matrices, open-circuit voltages and
//! port patterns for both antenna arrays, with a synthetic generator and a
//! JSON loader.
//!
//! Port ordering is the M antenna ports followed by the Q internal ports;
//! internal port `M + 6·m + s` is switch `S(s+1)` of cell `m`.
//!
//! Pattern convention: a port pattern is the far field radiated under unit
//! port current with the spherical factor e^{−jkr}/r removed. The synthetic
//! element is `a·cos^q(θ_local)·e^{jk r̂·r_m}` with `a` chosen so that the
//! hemisphere-integrated radiation resistance equals z0.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::antenna::{DiodeModel, ElementPattern, Side, SwitchState};
use crate::error::{Error, Result};
use crate::netalg::{ComplexMatrix, C64, ONE, ZERO, J, Z0};
use crate::pattern::{unit_vector, AngleGrid, FieldPattern, ETA0};

pub const SCHEMA_VERSION: u32 = 1;
pub const C_LIGHT: f64 = 299_792_458.0;
pub const Q_PER_ANTENNA: usize = 6;

/// Relative ‖Z − Zᵀ‖/‖Z‖ tolerated on load.
pub const RECIPROCITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    /// Antenna ports only; states act as ideal phase shifters.
    Behavioral,
    /// Six switch ports per antenna loaded with diode impedances.
    InternalPorts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Uncoupled z0 ports.
    #[default]
    None,
    /// Mutual resistance from the overlap integral of the element patterns.
    Radiation,
}

/// Plane-wave illumination arriving from (θ, φ) in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Incidence {
    pub theta: f64,
    pub phi: f64,
    /// Field amplitude (V/m).
    pub amplitude: f64,
}

impl Default for Incidence {
    fn default() -> Self {
        Self::normal()
    }
}

impl Incidence {
    pub fn normal() -> Self {
        Self {
            theta: 0.0,
            phi: 0.0,
            amplitude: 1.0,
        }
    }

    pub fn new(theta: f64, phi: f64, amplitude: f64) -> Self {
        Self { theta, phi, amplitude }
    }

    /// Same direction (amplitudes may differ).
    pub fn same_direction(&self, other: &Incidence) -> bool {
        crate::pattern::angular_distance((self.theta, self.phi), (other.theta, other.phi)) < 1e-9
    }
}

/// Construction constants of the internal-port tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InternalPortParams {
    /// Self impedance of each switch port (ohm).
    pub zeta: C64,
    /// Antenna-to-switch trans-impedance (ohm).
    pub kappa: f64,
}

impl Default for InternalPortParams {
    fn default() -> Self {
        Self {
            zeta: C64::new(10.0, 20.0),
            kappa: 50.0,
        }
    }
}

/// Analytic description of synthetic port patterns, used to evaluate ports
/// off the stored grid (plane-wave excitation, exact target sampling).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPorts {
    pub element: ElementPattern,
    /// Element amplitude `a` (V/A).
    pub amplitude: f64,
    /// Per-port complex weight on the reflecting side.
    pub coeff_r: Vec<C64>,
    /// Per-port complex weight on the transmitting side.
    pub coeff_t: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub m_x: usize,
    pub m_y: usize,
    /// Element spacing (m).
    pub spacing: f64,
    pub f_hz: f64,
    pub element: ElementPattern,
    pub tier: Tier,
    pub coupling: Coupling,
    pub grid: AngleGrid,
    pub incidence: Incidence,
    pub internal: InternalPortParams,
    pub diode: DiodeModel,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            m_x: 4,
            m_y: 4,
            spacing: 62.5e-3,
            f_hz: 2.4e9,
            element: ElementPattern::default(),
            tier: Tier::Behavioral,
            coupling: Coupling::None,
            grid: AngleGrid::yoz(),
            incidence: Incidence::normal(),
            internal: InternalPortParams::default(),
            diode: DiodeModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmDataset {
    pub f_hz: f64,
    pub m: usize,
    /// Total internal ports per side.
    pub q: usize,
    pub tier: Tier,
    pub coupling: Coupling,
    /// Cell centers (x, y) in metres.
    pub layout: Vec<[f64; 2]>,
    pub z_r: ComplexMatrix,
    pub z_t: ComplexMatrix,
    /// Reference excitation used for `v_oc`, `e_oc` and `e_r_str`.
    pub incidence: Incidence,
    pub v_oc: Vec<C64>,
    pub grid: AngleGrid,
    pub e_r_ports: Vec<FieldPattern>,
    pub e_t_ports: Vec<FieldPattern>,
    pub e_oc: FieldPattern,
    pub e_r_str: FieldPattern,
    pub diode: DiodeModel,
    /// Effective length used for antenna-port excitation when no analytic
    /// port model is present (m).
    pub l_eff: f64,
    /// Internal-port open-circuit voltage relative to its antenna port, used
    /// when no analytic port model is present.
    pub internal_voc_factor: C64,
    pub analytic: Option<AnalyticPorts>,
}

impl EmDataset {
    pub fn n_ports(&self) -> usize {
        self.m + self.q
    }

    pub fn q_per_cell(&self) -> usize {
        self.q / self.m
    }

    pub fn wavelength(&self) -> f64 {
        C_LIGHT / self.f_hz
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength()
    }

    /// Cell index owning port `n`.
    pub fn cell_of_port(&self, n: usize) -> usize {
        if n < self.m {
            n
        } else {
            (n - self.m) / self.q_per_cell()
        }
    }

    pub fn ports(&self, side: Side) -> &[FieldPattern] {
        match side {
            Side::Reflect => &self.e_r_ports,
            Side::Transmit => &self.e_t_ports,
        }
    }

    /// Pattern of port `n` on `side` at an arbitrary direction. Uses the
    /// analytic model when present, else the nearest stored sample.
    pub fn port_field(&self, side: Side, n: usize, theta: f64, phi: f64) -> C64 {
        match &self.analytic {
            Some(a) => {
                let coeff = match side {
                    Side::Reflect => a.coeff_r[n],
                    Side::Transmit => a.coeff_t[n],
                };
                coeff * element_field(a, self.wavenumber(), self.layout[self.cell_of_port(n)], side, theta, phi)
            }
            None => {
                let k = self.grid.sample_index(theta, phi).unwrap_or_else(|| self.grid.nearest_index(theta, phi));
                self.ports(side)[n].values[k]
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Schema("cell count must be positive".into()));
        }
        if !(self.f_hz > 0.0 && self.f_hz.is_finite()) {
            return Err(Error::Schema("frequency must be positive".into()));
        }
        if self.layout.len() != self.m {
            return Err(Error::Schema(format!("layout has {} cells, m = {}", self.layout.len(), self.m)));
        }
        if self.q % self.m != 0 {
            return Err(Error::Schema(format!("q = {} is not a multiple of m = {}", self.q, self.m)));
        }
        let n = self.n_ports();
        for (name, z) in [("z_r", &self.z_r), ("z_t", &self.z_t)] {
            if z.nrows() != n || z.ncols() != n {
                return Err(Error::Schema(format!("{name} is {}x{}, expected {n}x{n}", z.nrows(), z.ncols())));
            }
            if !z.is_finite() {
                return Err(Error::NonFinite("impedance matrix"));
            }
            let rel = z.asymmetry();
            if rel > RECIPROCITY_TOL {
                return Err(Error::Reciprocity { matrix: name, rel });
            }
            if (0..self.m).any(|i| !(z[(i, i)].re > 0.0)) {
                return Err(Error::Schema(format!("{name} has a non-positive antenna-port resistance")));
            }
        }
        if self.v_oc.len() != n {
            return Err(Error::Schema(format!("v_oc has {} entries, expected {n}", self.v_oc.len())));
        }
        if self.v_oc.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("v_oc"));
        }
        self.grid.validate()?;
        for (name, set) in [("e_r_ports", &self.e_r_ports), ("e_t_ports", &self.e_t_ports)] {
            if set.len() != n {
                return Err(Error::Schema(format!("{name} has {} patterns, expected {n}", set.len())));
            }
        }
        for p in self.all_patterns() {
            if p.grid != self.grid || p.values.len() != self.grid.len() {
                return Err(Error::GridMismatch(format!(
                    "pattern with {} samples on a grid of {}",
                    p.values.len(),
                    self.grid.len()
                )));
            }
        }
        if let Some(a) = &self.analytic {
            if a.coeff_r.len() != n || a.coeff_t.len() != n {
                return Err(Error::Schema("analytic port weights have the wrong length".into()));
            }
        }
        Ok(())
    }

    fn all_patterns(&self) -> impl Iterator<Item = &FieldPattern> {
        self.e_r_ports
            .iter()
            .chain(&self.e_t_ports)
            .chain([&self.e_oc, &self.e_r_str])
    }

    /// Dataset seen from the other side: arrays swapped, patterns mirrored
    /// through the aperture plane. Structural terms are mirrored as-is, which
    /// presumes a side-symmetric structure.
    pub fn mirrored(&self) -> Result<Self> {
        let mirror_all = |v: &[FieldPattern]| v.iter().map(FieldPattern::mirrored).collect::<Result<Vec<_>>>();
        let mut out = Self {
            z_r: self.z_t.clone(),
            z_t: self.z_r.clone(),
            e_r_ports: mirror_all(&self.e_t_ports)?,
            e_t_ports: mirror_all(&self.e_r_ports)?,
            e_oc: self.e_oc.mirrored()?,
            e_r_str: self.e_r_str.mirrored()?,
            analytic: self.analytic.as_ref().map(|a| AnalyticPorts {
                coeff_r: a.coeff_t.clone(),
                coeff_t: a.coeff_r.clone(),
                ..a.clone()
            }),
            ..self.clone()
        };
        if out.analytic.is_some() {
            out.v_oc = plane_wave_voc(&out, out.incidence)?;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&DatasetFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        let ds = file.into_dataset()?;
        ds.validate()?;
        Ok(ds)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Reads and validates a dataset file.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<EmDataset> {
    EmDataset::from_json(&fs::read_to_string(path)?)
}

/// Unit-weight element field of a cell at (θ, φ).
fn element_field(a: &AnalyticPorts, k: f64, pos: [f64; 2], side: Side, theta: f64, phi: f64) -> C64 {
    let g = a.element.gain(theta, side);
    if g == 0.0 {
        return ZERO;
    }
    let u = unit_vector(theta, phi);
    C64::from_polar(a.amplitude * g, k * (u[0] * pos[0] + u[1] * pos[1]))
}

/// Open-circuit voltages at all reflecting-side ports for a plane wave.
///
/// With an analytic port model the voltages follow from reciprocity,
/// v_n = (2λ/η)·A·E_n(r̂_inc). Otherwise antenna ports get
/// A·l_eff·e^{jk r̂_inc·r_m} and internal ports that value times
/// `internal_voc_factor`.
pub fn plane_wave_voc(ds: &EmDataset, inc: Incidence) -> Result<Vec<C64>> {
    if !(inc.theta < 90.0) || inc.theta < 0.0 {
        return Err(Error::WrongSide(inc.theta));
    }
    let n = ds.n_ports();
    if inc.amplitude == 0.0 {
        return Ok(vec![ZERO; n]);
    }
    if ds.analytic.is_some() {
        let scale = 2.0 * ds.wavelength() / ETA0 * inc.amplitude;
        return Ok((0..n)
            .map(|p| scale * ds.port_field(Side::Reflect, p, inc.theta, inc.phi))
            .collect());
    }
    let u = unit_vector(inc.theta, inc.phi);
    let k = ds.wavenumber();
    let antenna: Vec<C64> = ds
        .layout
        .iter()
        .map(|r| C64::from_polar(inc.amplitude * ds.l_eff, k * (u[0] * r[0] + u[1] * r[1])))
        .collect();
    Ok((0..n)
        .map(|p| {
            let v = antenna[ds.cell_of_port(p)];
            if p < ds.m {
                v
            } else {
                v * ds.internal_voc_factor
            }
        })
        .collect())
}

/// Element amplitude giving a hemisphere radiation resistance of `z0`.
pub fn element_amplitude(element: &ElementPattern, z0: f64) -> f64 {
    (ETA0 * z0 / element.hemisphere_integral()).sqrt()
}

/// J0(x) via the trapezoid rule on its integral representation.
fn bessel_j0(x: f64) -> f64 {
    const N: usize = 128;
    (0..N)
        .map(|i| (x * (2.0 * PI * i as f64 / N as f64).cos()).cos())
        .sum::<f64>()
        / N as f64
}

/// (1/η)∫ a²·cos^{2q}θ·e^{jk r̂·Δr} dΩ over one hemisphere for lateral
/// separation ρ; integrated in u = cos θ by composite Simpson.
fn mutual_resistance(a: f64, element: &ElementPattern, k: f64, rho: f64) -> f64 {
    const N: usize = 2000;
    let h = 1.0 / N as f64;
    let f = |u: f64| u.powf(2.0 * element.q) * bessel_j0(k * rho * (1.0 - u * u).max(0.0).sqrt());
    let mut s = f(0.0) + f(1.0);
    for i in 1..N {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    a * a / ETA0 * 2.0 * PI * s * h / 3.0
}

/// Real symmetric radiation-resistance matrix of the array.
pub fn radiation_resistance(layout: &[[f64; 2]], element: &ElementPattern, k: f64, z0: f64) -> ComplexMatrix {
    let a = element_amplitude(element, z0);
    let m = layout.len();
    let mut cache: Vec<(f64, f64)> = Vec::new();
    let mut r = ComplexMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let rho = ((layout[i][0] - layout[j][0]).powi(2) + (layout[i][1] - layout[j][1]).powi(2)).sqrt();
            let v = match cache.iter().find(|(d, _)| (d - rho).abs() < 1e-12) {
                Some(&(_, v)) => v,
                None => {
                    let v = if rho == 0.0 { z0 } else { mutual_resistance(a, element, k, rho) };
                    cache.push((rho, v));
                    v
                }
            };
            r[(i, j)] = C64::new(v, 0.0);
            r[(j, i)] = C64::new(v, 0.0);
        }
    }
    r
}

/// Centered rectangular layout, x index fastest.
pub fn rect_layout(m_x: usize, m_y: usize, spacing: f64) -> Vec<[f64; 2]> {
    let cx = (m_x as f64 - 1.0) / 2.0;
    let cy = (m_y as f64 - 1.0) / 2.0;
    (0..m_y)
        .flat_map(|iy| (0..m_x).map(move |ix| [(ix as f64 - cx) * spacing, (iy as f64 - cy) * spacing]))
        .collect()
}

/// Per-switch phase weights: the on-pair of each state sums to e^{jφ_state}.
const SWITCH_WEIGHTS: [C64; 6] = [ZERO, ZERO, ONE, C64::new(-1.0, 0.0), C64::new(0.0, -1.0), J];

/// Internal-port construction: (antenna self-impedance, antenna weight,
/// switch weights). With these, reducing the six loaded switch ports leaves
/// an antenna-port impedance of exactly `z_ant` plus the ideal state phase
/// on the pattern and open-circuit voltage.
fn internal_port_weights(
    params: &InternalPortParams,
    diode: &DiodeModel,
    f: f64,
) -> Result<(C64, C64, [C64; 6])> {
    let z_on = diode.load(SwitchState::On, f);
    let z_off = diode.load(SwitchState::Off, f);
    let kappa = C64::new(params.kappa, 0.0);
    let g_on = kappa / (params.zeta + z_on);
    let g_off = kappa / (params.zeta + z_off);
    let delta = g_on - g_off;
    if delta.norm() < 1e-12 {
        return Err(Error::InvalidParameter("switch states are indistinguishable".into()));
    }
    let p = SWITCH_WEIGHTS.map(|u| -u / delta);
    let a0 = g_off * p.iter().sum::<C64>();
    // two switches on, four off in every state
    let z_self = 2.0 * kappa * g_on + 4.0 * kappa * g_off;
    Ok((z_self, a0, p))
}

/// Builds a self-consistent synthetic dataset.
pub fn generate_synthetic(params: &SyntheticParams) -> Result<EmDataset> {
    let SyntheticParams {
        m_x,
        m_y,
        spacing,
        f_hz,
        element,
        tier,
        coupling,
        grid,
        incidence,
        internal,
        diode,
    } = params.clone();
    if m_x == 0 || m_y == 0 {
        return Err(Error::InvalidLayout(format!("{m_x}x{m_y} array has no cells")));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidLayout(format!("spacing {spacing} m must be positive")));
    }
    if !(f_hz > 0.0 && f_hz.is_finite()) {
        return Err(Error::InvalidParameter(format!("frequency {f_hz} Hz must be positive")));
    }
    if !(element.q >= 0.0 && element.q.is_finite()) {
        return Err(Error::InvalidParameter(format!("element exponent {} must be non-negative", element.q)));
    }
    grid.validate()?;
    let m = m_x * m_y;
    let layout = rect_layout(m_x, m_y, spacing);
    let k = 2.0 * PI * f_hz / C_LIGHT;
    let amplitude = element_amplitude(&element, Z0);

    let z_ant = match coupling {
        Coupling::None => ComplexMatrix::from_real_diagonal(&vec![Z0; m]),
        Coupling::Radiation => radiation_resistance(&layout, &element, k, Z0),
    };

    let (q, z, coeff) = match tier {
        Tier::Behavioral => (0, z_ant, vec![ONE; m]),
        Tier::InternalPorts => {
            let (z_self, a0, p) = internal_port_weights(&internal, &diode, f_hz)?;
            let q = Q_PER_ANTENNA * m;
            let n = m + q;
            let mut z = ComplexMatrix::zeros(n, n);
            for i in 0..m {
                for j in 0..m {
                    z[(i, j)] = z_ant[(i, j)];
                }
                z[(i, i)] += z_self;
                for s in 0..Q_PER_ANTENNA {
                    let pi = m + Q_PER_ANTENNA * i + s;
                    z[(i, pi)] = C64::new(internal.kappa, 0.0);
                    z[(pi, i)] = C64::new(internal.kappa, 0.0);
                    z[(pi, pi)] = internal.zeta;
                }
            }
            let mut coeff = vec![a0; m];
            for _ in 0..m {
                coeff.extend_from_slice(&p);
            }
            (q, z, coeff)
        }
    };

    let analytic = AnalyticPorts {
        element,
        amplitude,
        coeff_r: coeff.clone(),
        coeff_t: coeff,
    };
    let n = m + q;
    let cell_of = |p: usize| if p < m { p } else { (p - m) / Q_PER_ANTENNA };
    let port_patterns = |side: Side, weights: &[C64]| -> Vec<FieldPattern> {
        (0..n)
            .map(|p| {
                let w = weights[p];
                let pos = layout[cell_of(p)];
                FieldPattern::from_fn(grid, f_hz, |t, ph| w * element_field(&analytic, k, pos, side, t, ph))
            })
            .collect()
    };
    let e_r_ports = port_patterns(Side::Reflect, &analytic.coeff_r);
    let e_t_ports = port_patterns(Side::Transmit, &analytic.coeff_t);

    let mut ds = EmDataset {
        f_hz,
        m,
        q,
        tier,
        coupling,
        layout: layout.clone(),
        z_r: z.clone(),
        z_t: z,
        incidence,
        v_oc: Vec::new(),
        grid,
        e_r_ports,
        e_t_ports,
        e_oc: FieldPattern::zeros(grid, f_hz),
        e_r_str: FieldPattern::zeros(grid, f_hz),
        diode,
        l_eff: 1.0,
        internal_voc_factor: ZERO,
        analytic: Some(analytic),
    };
    ds.v_oc = plane_wave_voc(&ds, incidence)?;

    // structural part: specular re-radiation of the illuminated elements
    let unit = AnalyticPorts {
        coeff_r: vec![ONE; m],
        ..ds.analytic.clone().expect("set above")
    };
    let scale = 2.0 * ds.wavelength() / ETA0 * incidence.amplitude;
    let drive: Vec<C64> = layout
        .iter()
        .map(|&r| -scale * element_field(&unit, k, r, Side::Reflect, incidence.theta, incidence.phi) / (2.0 * Z0))
        .collect();
    ds.e_r_str = FieldPattern::from_fn(grid, f_hz, |t, ph| {
        layout
            .iter()
            .zip(&drive)
            .map(|(&r, &d)| d * element_field(&unit, k, r, Side::Reflect, t, ph))
            .sum()
    });
    let delta = conjugate_match_drive(&ds.z_r, &ds.v_oc)?;
    let mut e_oc = ds.e_r_str.clone();
    for (p, d) in delta.iter().enumerate() {
        e_oc.add_scaled(&ds.e_r_ports[p], *d)?;
    }
    ds.e_oc = e_oc;
    ds.validate()?;
    Ok(ds)
}

/// (Z + Zᴴ)⁻¹·v, the port-current weights of E_oc − E_str.
pub fn conjugate_match_drive(z: &ComplexMatrix, v: &[C64]) -> Result<Vec<C64>> {
    let h = z + &z.adjoint();
    crate::netalg::solve(&h, v)
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    schema_version: u32,
    f_hz: f64,
    m: usize,
    q: usize,
    tier: Tier,
    coupling: Coupling,
    layout: Vec<[f64; 2]>,
    z_r: Vec<Vec<C64>>,
    z_t: Vec<Vec<C64>>,
    incidence: Incidence,
    v_oc: Vec<C64>,
    grid: AngleGrid,
    e_r_ports: Vec<Vec<C64>>,
    e_t_ports: Vec<Vec<C64>>,
    e_oc: Vec<C64>,
    e_r_str: Vec<C64>,
    #[serde(default)]
    diode: DiodeModel,
    #[serde(default = "one")]
    l_eff: f64,
    #[serde(default)]
    internal_voc_factor: C64,
    #[serde(default)]
    analytic: Option<AnalyticPorts>,
}

fn one() -> f64 {
    1.0
}

fn matrix_rows(z: &ComplexMatrix) -> Vec<Vec<C64>> {
    (0..z.nrows()).map(|i| z.row(i)).collect()
}

impl From<&EmDataset> for DatasetFile {
    fn from(d: &EmDataset) -> Self {
        let vals = |v: &[FieldPattern]| v.iter().map(|p| p.values.clone()).collect();
        Self {
            schema_version: SCHEMA_VERSION,
            f_hz: d.f_hz,
            m: d.m,
            q: d.q,
            tier: d.tier,
            coupling: d.coupling,
            layout: d.layout.clone(),
            z_r: matrix_rows(&d.z_r),
            z_t: matrix_rows(&d.z_t),
            incidence: d.incidence,
            v_oc: d.v_oc.clone(),
            grid: d.grid,
            e_r_ports: vals(&d.e_r_ports),
            e_t_ports: vals(&d.e_t_ports),
            e_oc: d.e_oc.values.clone(),
            e_r_str: d.e_r_str.values.clone(),
            diode: d.diode,
            l_eff: d.l_eff,
            internal_voc_factor: d.internal_voc_factor,
            analytic: d.analytic.clone(),
        }
    }
}

impl DatasetFile {
    fn into_dataset(self) -> Result<EmDataset> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!("unsupported schema version {}", self.schema_version)));
        }
        self.grid.validate()?;
        let (grid, f) = (self.grid, self.f_hz);
        let pattern = |v: Vec<C64>| -> Result<FieldPattern> {
            if v.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "pattern with {} samples on a grid of {}",
                    v.len(),
                    grid.len()
                )));
            }
            FieldPattern::new(grid, v, f)
        };
        let patterns = |v: Vec<Vec<C64>>| v.into_iter().map(pattern).collect::<Result<Vec<_>>>();
        let matrix = |rows: Vec<Vec<C64>>| ComplexMatrix::from_rows(&rows).map_err(|e| Error::Schema(e.to_string()));
        Ok(EmDataset {
            f_hz: self.f_hz,
            m: self.m,
            q: self.q,
            tier: self.tier,
            coupling: self.coupling,
            layout: self.layout,
            z_r: matrix(self.z_r)?,
            z_t: matrix(self.z_t)?,
            incidence: self.incidence,
            v_oc: self.v_oc,
            grid,
            e_r_ports: patterns(self.e_r_ports)?,
            e_t_ports: patterns(self.e_t_ports)?,
            e_oc: pattern(self.e_oc)?,
            e_r_str: pattern(self.e_r_str)?,
            diode: self.diode,
            l_eff: self.l_eff,
            internal_voc_factor: self.internal_voc_factor,
            analytic: self.analytic,
        })
    }
}
