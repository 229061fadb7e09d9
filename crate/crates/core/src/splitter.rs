//! Tunable two-port power splitter: a varactor/inductor tank placed in series
//! between two matched lines.
//!
//! The splitter is keyed on junction capacitance. Mode presets are found by
//! inverting the forward model for a target reflected/transmitted power ratio;
//! the bias voltage is only a display quantity (see [`VoltageMap`]).

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netalg::{TwoPortNetwork, C64, J, ONE, Z0, ZERO};

/// Lower end of the varactor capacitance range (F).
pub const C_MIN: f64 = 0.35e-12;
/// Upper end of the varactor capacitance range (F).
pub const C_MAX: f64 = 3.2e-12;

/// Model validity band for mode presets (Hz).
pub const BAND: (f64, f64) = (2.3e9, 2.5e9);

/// Design targets for the three modes (dB).
pub const REFLECTION_TARGET_DB: f64 = 20.0;
pub const HYBRID_TARGET_DB: f64 = 0.0;

/// Varactor with package parasitics in parallel with a bias inductor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaractorCircuit {
    /// Junction capacitance (F).
    pub c_j0: f64,
    /// Series parasitic inductance (H).
    pub l_s: f64,
    /// Series parasitic resistance (ohm).
    pub r_s: f64,
    /// Parallel bias inductance (H).
    pub l_c: f64,
}

impl Default for VaractorCircuit {
    fn default() -> Self {
        Self {
            c_j0: C_MAX,
            l_s: 0.7e-9,
            r_s: 2.5,
            l_c: 3.9e-9,
        }
    }
}

impl VaractorCircuit {
    pub fn with_capacitance(self, c_j0: f64) -> Self {
        Self { c_j0, ..self }
    }

    pub fn lossless(self) -> Self {
        Self { r_s: 0.0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.c_j0 > 0.0
            && self.l_s >= 0.0
            && self.r_s >= 0.0
            && self.l_c > 0.0
            && [self.c_j0, self.l_s, self.r_s, self.l_c].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid varactor circuit {self:?}")))
        }
    }
}

/// Series (varactor branch) ∥ bias inductor impedance at frequency `f`.
pub fn varactor_impedance(circuit: &VaractorCircuit, f: f64) -> Result<C64> {
    circuit.validate()?;
    if !(f > 0.0) {
        return Err(Error::InvalidParameter(format!("frequency {f} must be > 0")));
    }
    let w = 2.0 * PI * f;
    let branch = ONE / (J * w * circuit.c_j0) + J * (w * circuit.l_s) + circuit.r_s;
    let choke = J * (w * circuit.l_c);
    let den = branch + choke;
    if den.norm() < 1e-9 {
        return Err(Error::DegenerateCircuit(format!(
            "varactor branch resonates with the bias inductor at {f} Hz"
        )));
    }
    Ok(branch * choke / den)
}

/// S-matrix of an impedance `z` in series between two lines of impedance `z0`.
pub fn series_impedance_network(z: C64, z0: f64) -> Result<TwoPortNetwork> {
    if !z.is_finite() {
        return Err(Error::NonFinite("series impedance"));
    }
    if z.re < 0.0 {
        return Err(Error::NonPassive { re: z.re, im: z.im });
    }
    let d = z + 2.0 * z0;
    let t = C64::new(2.0 * z0, 0.0) / d;
    TwoPortNetwork::new([[z / d, t], [t, z / d]], z0)
}

/// Idealized splitters used for bounding studies and measurement baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdealSplit {
    /// Open series element: S = I.
    Open,
    /// Short series element: S = antidiag(1, 1).
    Short,
    /// Series j2·z0: lossless equal split.
    EqualSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitterMode {
    Reflection,
    Hybrid,
    Transmission,
    /// Explicit junction capacitance (F).
    Custom(f64),
    Ideal(IdealSplit),
}

impl fmt::Display for SplitterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitterMode::Reflection => f.write_str("reflection"),
            SplitterMode::Hybrid => f.write_str("hybrid"),
            SplitterMode::Transmission => f.write_str("transmission"),
            SplitterMode::Custom(c) => write!(f, "custom({:.4} pF)", c * 1e12),
            SplitterMode::Ideal(k) => write!(f, "ideal-{k:?}"),
        }
    }
}

/// A splitter at one frequency: series impedance, S-matrix and (when they
/// exist) z-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitterState {
    pub mode: SplitterMode,
    /// Resolved junction capacitance (F); `None` for ideal splitters.
    pub c_j0: Option<f64>,
    /// Series impedance (ohm); `None` for an ideal open.
    pub z: Option<C64>,
    pub s: TwoPortNetwork,
    /// z-parameters, `None` when (I − S) is singular (always the case for a
    /// pure series element).
    pub z_params: Option<[[C64; 2]; 2]>,
}

impl SplitterState {
    /// Splitter realized by `circuit` at frequency `f`.
    pub fn from_circuit(mode: SplitterMode, circuit: &VaractorCircuit, f: f64) -> Result<Self> {
        let z = varactor_impedance(circuit, f)?;
        let s = series_impedance_network(z, Z0)?;
        Ok(Self {
            mode,
            c_j0: Some(circuit.c_j0),
            z: Some(z),
            s,
            z_params: s.z_params().ok(),
        })
    }

    /// Splitter from an explicit series impedance.
    pub fn from_impedance(z: C64) -> Result<Self> {
        let s = series_impedance_network(z, Z0)?;
        Ok(Self {
            mode: SplitterMode::Custom(f64::NAN),
            c_j0: None,
            z: Some(z),
            s,
            z_params: s.z_params().ok(),
        })
    }

    /// Arbitrary two-port (e.g. a fabricated splitter's measured S-matrix).
    pub fn from_network(s: TwoPortNetwork) -> Self {
        Self {
            mode: SplitterMode::Custom(f64::NAN),
            c_j0: None,
            z: None,
            s,
            z_params: s.z_params().ok(),
        }
    }

    pub fn ideal(kind: IdealSplit) -> Self {
        let (z, s) = match kind {
            IdealSplit::Open => (None, [[ONE, ZERO], [ZERO, ONE]]),
            IdealSplit::Short => (Some(ZERO), [[ZERO, ONE], [ONE, ZERO]]),
            IdealSplit::EqualSplit => {
                let z = C64::new(0.0, 2.0 * Z0);
                let s = series_impedance_network(z, Z0).expect("reactive element is passive");
                (Some(z), s.s)
            }
        };
        let s = TwoPortNetwork { s, z0: Z0 };
        Self {
            mode: SplitterMode::Ideal(kind),
            c_j0: None,
            z,
            s,
            z_params: s.z_params().ok(),
        }
    }

    /// Reflected-over-transmitted power ratio in dB.
    pub fn power_ratio_db(&self) -> Result<f64> {
        power_ratio_db(self)
    }

    /// |s11|² + |s21|², the fraction of incident power not dissipated.
    pub fn power_balance(&self) -> f64 {
        self.s.s11().norm_sqr() + self.s.s21().norm_sqr()
    }
}

/// P = 20·log10(|s11| / |s21|).
pub fn power_ratio_db(state: &SplitterState) -> Result<f64> {
    let s21 = state.s.s21().norm();
    if s21 == 0.0 {
        return Err(Error::InfiniteRatio);
    }
    Ok(20.0 * (state.s.s11().norm() / s21).log10())
}

fn ratio_db_at(template: &VaractorCircuit, c: f64, f: f64) -> Result<f64> {
    let z = match varactor_impedance(&template.with_capacitance(c), f) {
        // lossless tank at parallel resonance: open circuit
        Err(Error::DegenerateCircuit(_)) => return Ok(f64::INFINITY),
        z => z?,
    };
    // |s11/s21| = |Z| / (2 z0)
    Ok(20.0 * (z.norm() / (2.0 * Z0)).log10())
}

/// Capacitance maximizing |Z| over [C_MIN, C_MAX] (golden-section search on a
/// coarse-bracketed interval).
fn peak_capacitance(template: &VaractorCircuit, f: f64) -> Result<f64> {
    if template.r_s == 0.0 {
        let w = 2.0 * PI * f;
        let c_res = 1.0 / (w * w * (template.l_s + template.l_c));
        if (C_MIN..=C_MAX).contains(&c_res) {
            return Ok(c_res);
        }
    }
    const N: usize = 400;
    let grid: Vec<f64> = (0..=N)
        .map(|i| C_MIN * (C_MAX / C_MIN).powf(i as f64 / N as f64))
        .collect();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &c) in grid.iter().enumerate() {
        let r = ratio_db_at(template, c, f)?;
        if r > best.1 {
            best = (i, r);
        }
    }
    let (mut a, mut b) = (grid[best.0.saturating_sub(1)], grid[(best.0 + 1).min(N)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if ratio_db_at(template, x1, f)? < ratio_db_at(template, x2, f)? {
            a = x1;
        } else {
            b = x2;
        }
        if (b - a) < 1e-9 * b {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

fn bisect(template: &VaractorCircuit, f: f64, target: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut flo = ratio_db_at(template, lo, f)? - target;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = ratio_db_at(template, mid, f)? - target;
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Attainable ratio range over the capacitance span: (min dB, max dB, peak capacitance).
pub fn ratio_range_db(template: &VaractorCircuit, f: f64) -> Result<(f64, f64, f64)> {
    let cp = peak_capacitance(template, f)?;
    let max = ratio_db_at(template, cp, f)?;
    let min = ratio_db_at(template, C_MIN, f)?.min(ratio_db_at(template, C_MAX, f)?);
    Ok((min, max, cp))
}

/// Capacitances in [C_MIN, C_MAX] that realize `target_ratio_db`, sorted
/// ascending: the branch below the tank resonance first, then the branch above.
pub fn solve_capacitance(target_ratio_db: f64, f: f64, template: &VaractorCircuit) -> Result<Vec<f64>> {
    template.validate()?;
    let (min, max, cp) = ratio_range_db(template, f)?;
    let mut roots = Vec::with_capacity(2);
    for (lo, hi) in [(C_MIN, cp), (cp, C_MAX)] {
        let (flo, fhi) = (
            ratio_db_at(template, lo, f)? - target_ratio_db,
            ratio_db_at(template, hi, f)? - target_ratio_db,
        );
        if flo == 0.0 {
            roots.push(lo);
        } else if (flo < 0.0) != (fhi < 0.0) || fhi == 0.0 {
            roots.push(bisect(template, f, target_ratio_db, lo, hi)?);
        }
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-18);
    if roots.is_empty() {
        return Err(Error::Unachievable {
            target_db: target_ratio_db,
            min_db: min,
            max_db: max,
        });
    }
    Ok(roots)
}

/// Resolved capacitance for a mode at frequency `f`.
///
/// Hybrid and Reflection take the root above the tank resonance, which keeps
/// capacitance ordered Reflection < Hybrid < Transmission like the bias
/// voltages −10.8 V / −7.4 V / 0 V of the fabricated splitter.
pub fn mode_capacitance(mode: SplitterMode, f: f64, template: &VaractorCircuit) -> Result<f64> {
    match mode {
        SplitterMode::Transmission => Ok(C_MAX),
        SplitterMode::Hybrid => upper_root(HYBRID_TARGET_DB, f, template),
        SplitterMode::Reflection => upper_root(REFLECTION_TARGET_DB, f, template),
        SplitterMode::Custom(c) => Ok(c),
        SplitterMode::Ideal(_) => Err(Error::InvalidParameter("ideal splitters have no capacitance".into())),
    }
}

fn upper_root(target: f64, f: f64, template: &VaractorCircuit) -> Result<f64> {
    let roots = solve_capacitance(target, f, template)?;
    Ok(*roots.last().expect("solve_capacitance returns at least one root"))
}

/// Splitter state for a mode preset using the default varactor circuit.
pub fn mode_preset(mode: SplitterMode, f: f64) -> Result<SplitterState> {
    mode_preset_with(mode, f, &VaractorCircuit::default())
}

pub fn mode_preset_with(mode: SplitterMode, f: f64, template: &VaractorCircuit) -> Result<SplitterState> {
    if let SplitterMode::Ideal(kind) = mode {
        return Ok(SplitterState::ideal(kind));
    }
    if !(BAND.0..=BAND.1).contains(&f) {
        return Err(Error::InvalidParameter(format!(
            "preset frequency {:.4} GHz outside the {:.1}-{:.1} GHz model band",
            f / 1e9,
            BAND.0 / 1e9,
            BAND.1 / 1e9
        )));
    }
    let c = mode_capacitance(mode, f, template)?;
    SplitterState::from_circuit(mode, &template.with_capacitance(c), f)
}

/// Bias voltage ↔ capacitance display map: linear in ln(C) between
/// (−20 V, C_MIN) and (0 V, C_MAX).
#[derive(Debug, Clone, Copy)]
pub struct VoltageMap {
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for VoltageMap {
    fn default() -> Self {
        Self { v_min: -20.0, v_max: 0.0 }
    }
}

impl VoltageMap {
    pub fn capacitance(&self, v: f64) -> f64 {
        let t = ((v - self.v_min) / (self.v_max - self.v_min)).clamp(0.0, 1.0);
        C_MIN * (C_MAX / C_MIN).powf(t)
    }

    pub fn voltage(&self, c: f64) -> f64 {
        let t = ((c / C_MIN).ln() / (C_MAX / C_MIN).ln()).clamp(0.0, 1.0);
        self.v_min + t * (self.v_max - self.v_min)
    }
}

/// One row of a capacitance/frequency sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub freq_hz: f64,
    pub c_pf: f64,
    pub z: C64,
    pub s11_db: f64,
    pub s21_db: f64,
    pub ratio_db: f64,
}

pub const SWEEP_CSV_HEADER: &str = "freq_hz,c_pf,re_z,im_z,s11_db,s21_db,ratio_db";

impl SweepPoint {
    pub fn evaluate(template: &VaractorCircuit, c: f64, f: f64) -> Result<Self> {
        let st = SplitterState::from_circuit(SplitterMode::Custom(c), &template.with_capacitance(c), f)?;
        Ok(Self::from_state(&st, f))
    }

    pub fn from_state(st: &SplitterState, f: f64) -> Self {
        let db = |x: f64| 20.0 * x.max(1e-300).log10();
        Self {
            freq_hz: f,
            c_pf: st.c_j0.map_or(f64::NAN, |c| c * 1e12),
            z: st.z.unwrap_or(C64::new(f64::INFINITY, 0.0)),
            s11_db: db(st.s.s11().norm()),
            s21_db: db(st.s.s21().norm()),
            ratio_db: db(st.s.s11().norm()) - db(st.s.s21().norm()),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.freq_hz, self.c_pf, self.z.re, self.z.im, self.s11_db, self.s21_db, self.ratio_db
        )
    }
}
