//! 2-bit phase-reconfigurable antenna: switch table, diode loads, element
//! pattern and single-antenna scattering decomposition.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netalg::{C64, J};
use crate::pattern::FieldPattern;

/// One of the four antenna phase states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum PhaseState {
    #[default]
    S00,
    S01,
    S10,
    S11,
}

impl PhaseState {
    pub const ALL: [PhaseState; 4] = [PhaseState::S00, PhaseState::S01, PhaseState::S10, PhaseState::S11];

    /// Two-bit code 0..=3.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("phase code {code} is not a 2-bit value")))
    }

    /// Ideal phase in degrees: 0, 90, 180, 270.
    pub fn phase_deg(self) -> f64 {
        90.0 * self.code() as f64
    }

    pub fn phase_rad(self) -> f64 {
        self.phase_deg().to_radians()
    }

    /// e^{jφ}, exact for the four quadrant values.
    pub fn phasor(self) -> C64 {
        match self {
            PhaseState::S00 => C64::new(1.0, 0.0),
            PhaseState::S01 => J,
            PhaseState::S10 => C64::new(-1.0, 0.0),
            PhaseState::S11 => -J,
        }
    }

    /// State whose ideal phase is nearest to `deg`.
    pub fn nearest(deg: f64) -> Self {
        let k = (deg.rem_euclid(360.0) / 90.0).round() as u8 % 4;
        Self::ALL[k as usize]
    }

    /// State shifted by `quarter_turns` × 90°.
    pub fn rotated(self, quarter_turns: i32) -> Self {
        Self::ALL[(self.code() as i32 + quarter_turns).rem_euclid(4) as usize]
    }
}

impl fmt::Display for PhaseState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02b}", self.code())
    }
}

impl FromStr for PhaseState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "00" => Ok(PhaseState::S00),
            "01" => Ok(PhaseState::S01),
            "10" => Ok(PhaseState::S10),
            "11" => Ok(PhaseState::S11),
            other => Err(Error::InvalidParameter(format!("phase state '{other}' (expected 00/01/10/11)"))),
        }
    }
}

impl Serialize for PhaseState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PhaseState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchState {
    On,
    Off,
}

use SwitchState::{Off, On};

/// Switch pattern S1..S6 for a state.
pub fn switch_states(state: PhaseState) -> [SwitchState; 6] {
    match state {
        PhaseState::S00 => [On, Off, On, Off, Off, Off],
        PhaseState::S01 => [Off, On, Off, Off, Off, On],
        PhaseState::S10 => [On, Off, Off, On, Off, Off],
        PhaseState::S11 => [Off, On, Off, Off, On, Off],
    }
}

/// PIN-diode equivalent circuit constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiodeModel {
    pub r_on: f64,
    pub l: f64,
    pub r_off: f64,
    pub c_off: f64,
}

impl Default for DiodeModel {
    fn default() -> Self {
        Self {
            r_on: 1.5,
            l: 0.7e-9,
            r_off: 2.5e3,
            c_off: 0.12e-12,
        }
    }
}

impl DiodeModel {
    /// On: R_on + jωL. Off: (R_off ∥ 1/(jωC)) + jωL.
    pub fn load(&self, state: SwitchState, f: f64) -> C64 {
        let w = 2.0 * std::f64::consts::PI * f;
        let xl = C64::new(0.0, w * self.l);
        match state {
            On => C64::new(self.r_on, 0.0) + xl,
            Off => {
                let y = C64::new(1.0 / self.r_off, w * self.c_off);
                y.inv() + xl
            }
        }
    }
}

/// Diode load with the default constants.
pub fn diode_load(state: SwitchState, f: f64) -> C64 {
    DiodeModel::default().load(state, f)
}

/// Loads on S1..S6 for a phase state.
pub fn state_load_vector(state: PhaseState, f: f64) -> [C64; 6] {
    state_load_vector_with(&DiodeModel::default(), state, f)
}

pub fn state_load_vector_with(diode: &DiodeModel, state: PhaseState, f: f64) -> [C64; 6] {
    switch_states(state).map(|s| diode.load(s, f))
}

/// Uni-directional cos^q element pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementPattern {
    pub q: f64,
}

impl Default for ElementPattern {
    fn default() -> Self {
        Self { q: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Radiates into θ < 90°.
    Reflect,
    /// Radiates into θ > 90°.
    Transmit,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Reflect => Side::Transmit,
            Side::Transmit => Side::Reflect,
        }
    }
}

impl ElementPattern {
    /// Real amplitude at polar angle θ (degrees) for an element facing `side`.
    pub fn gain(&self, theta_deg: f64, side: Side) -> f64 {
        let local = match side {
            Side::Reflect if theta_deg < 90.0 => theta_deg,
            Side::Transmit if theta_deg > 90.0 => 180.0 - theta_deg,
            _ => return 0.0,
        };
        local.to_radians().cos().max(0.0).powf(self.q)
    }

    /// ∫ gain² dΩ over the facing hemisphere: 2π/(2q + 1).
    pub fn hemisphere_integral(&self) -> f64 {
        2.0 * std::f64::consts::PI / (2.0 * self.q + 1.0)
    }
}

/// Single antenna described by its input impedance, structural pattern,
/// unit-current pattern and short-circuit current.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaScatterModel {
    pub z_a: C64,
    pub e_structural: FieldPattern,
    pub e_unit: FieldPattern,
    pub i_s: C64,
}

impl AntennaScatterModel {
    pub fn new(z_a: C64, e_structural: FieldPattern, e_unit: FieldPattern, i_s: C64) -> Result<Self> {
        if !(z_a.re > 0.0) {
            return Err(Error::InvalidParameter(format!("antenna resistance {} must be positive", z_a.re)));
        }
        e_structural.check_compatible(&e_unit)?;
        Ok(Self {
            z_a,
            e_structural,
            e_unit,
            i_s,
        })
    }
}

/// Γ* = (Z_load − Z_A*)/(Z_load + Z_A), the power-wave reflection coefficient
/// referenced to the conjugate-matched load.
pub fn conjugate_reflection(z_load: C64, z_a: C64) -> Result<C64> {
    let den = z_load + z_a;
    if den.norm() <= 1e-12 * (z_load.norm() + z_a.norm()).max(1.0) {
        return Err(Error::DegenerateLoad);
    }
    Ok((z_load - z_a.conj()) / den)
}

/// Pattern scattered by the antenna when loaded with `z_load`.
pub fn scattered_field(model: &AntennaScatterModel, z_load: C64) -> Result<FieldPattern> {
    let g = conjugate_reflection(z_load, model.z_a)?;
    scattered_with_gamma(model, g)
}

/// Open-circuited antenna (Γ* = 1).
pub fn scattered_field_open(model: &AntennaScatterModel) -> Result<FieldPattern> {
    scattered_with_gamma(model, C64::new(1.0, 0.0))
}

fn scattered_with_gamma(model: &AntennaScatterModel, gamma: C64) -> Result<FieldPattern> {
    let k = -gamma * model.z_a * model.i_s / (2.0 * model.z_a.re);
    let mut out = model.e_structural.clone();
    out.add_scaled(&model.e_unit, k)?;
    Ok(out)
}
