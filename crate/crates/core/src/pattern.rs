//! Far-field pattern container, cut-plane beam metrics, and the
//! structural-subtraction arithmetic used to emulate range measurements.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netalg::{C64, ZERO};

/// Free-space wave impedance (ohm).
pub const ETA0: f64 = 376.730_313_668;

/// Export floor relative to the pattern peak (dB).
pub const DB_FLOOR: f64 = -80.0;

/// Sector peak more than this far below the global peak means no beam (dB).
pub const NO_BEAM_DB: f64 = 40.0;

/// Samples within this relative power of the maximum count as tied peaks.
const PEAK_TIE_REL: f64 = 1e-9;

/// Uniformly sampled axis in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(start: f64, step: f64, count: usize) -> Self {
        Self { start, step, count }
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn last(&self) -> f64 {
        self.value(self.count.saturating_sub(1))
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.value(i))
    }

    /// Index of the sample within `tol` degrees of `v`.
    pub fn index_of(&self, v: f64, tol: f64) -> Option<usize> {
        if self.count == 1 {
            return ((v - self.start).abs() <= tol).then_some(0);
        }
        let k = ((v - self.start) / self.step).round();
        if k < 0.0 || k >= self.count as f64 {
            return None;
        }
        let k = k as usize;
        ((self.value(k) - v).abs() <= tol).then_some(k)
    }
}

/// (θ, φ) sampling grid in degrees; values are stored θ-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub theta: Axis,
    pub phi: Axis,
}

impl Default for AngleGrid {
    /// 1° in θ over [0°, 180°], 5° in φ over [0°, 360°).
    fn default() -> Self {
        Self {
            theta: Axis::new(0.0, 1.0, 181),
            phi: Axis::new(0.0, 5.0, 72),
        }
    }
}

impl AngleGrid {
    pub fn new(theta: Axis, phi: Axis) -> Result<Self> {
        let g = Self { theta, phi };
        g.validate()?;
        Ok(g)
    }

    /// Full sphere with the given steps.
    pub fn full(theta_step: f64, phi_step: f64) -> Result<Self> {
        let nt = (180.0 / theta_step).round() as usize + 1;
        let np = (360.0 / phi_step).round() as usize;
        Self::new(Axis::new(0.0, theta_step, nt), Axis::new(0.0, phi_step, np))
    }

    /// Two half-planes φ0 and φ0 + 180° covering a full great-circle cut.
    pub fn cut(phi0: f64, theta_step: f64) -> Result<Self> {
        let nt = (180.0 / theta_step).round() as usize + 1;
        Self::new(Axis::new(0.0, theta_step, nt), Axis::new(phi0, 180.0, 2))
    }

    /// The YOZ cut at 1° resolution.
    pub fn yoz() -> Self {
        Self::cut(90.0, 1.0).expect("static grid is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let axis_ok = |a: &Axis| a.count >= 1 && a.start.is_finite() && (a.count == 1 || a.step > 0.0);
        if !axis_ok(&self.theta) || !axis_ok(&self.phi) {
            return Err(Error::Schema(format!("invalid angle grid {self:?}")));
        }
        let eps = 1e-9;
        if self.theta.start < -eps || self.theta.last() > 180.0 + eps {
            return Err(Error::Schema("theta samples must lie in [0, 180]".into()));
        }
        if self.phi.start < -eps || self.phi.last() >= 360.0 - eps {
            return Err(Error::Schema("phi samples must lie in [0, 360)".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.theta.count * self.phi.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, it: usize, ip: usize) -> usize {
        it * self.phi.count + ip
    }

    /// (θ, φ) in degrees of flat sample `k`.
    pub fn angles(&self, k: usize) -> (f64, f64) {
        (self.theta.value(k / self.phi.count), self.phi.value(k % self.phi.count))
    }

    pub fn directions(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(|k| self.angles(k))
    }

    /// Flat index of the sample at exactly (θ, φ) (within 1e-6°).
    pub fn sample_index(&self, theta: f64, phi: f64) -> Option<usize> {
        let it = self.theta.index_of(theta, 1e-6)?;
        if theta.abs() < 1e-9 || (theta - 180.0).abs() < 1e-9 {
            // poles: any φ column represents the same direction
            let ip = self.phi.index_of(wrap_phi(phi), 1e-6).unwrap_or(0);
            return Some(self.index(it, ip));
        }
        let ip = self.phi.index_of(wrap_phi(phi), 1e-6)?;
        Some(self.index(it, ip))
    }

    /// Flat index of the sample angularly closest to (θ, φ).
    pub fn nearest_index(&self, theta: f64, phi: f64) -> usize {
        let mut best = (0, f64::INFINITY);
        for k in 0..self.len() {
            let (t, p) = self.angles(k);
            let d = angular_distance((t, p), (theta, phi));
            if d < best.1 {
                best = (k, d);
            }
        }
        best.0
    }

    /// True when φ samples cover the full circle uniformly.
    pub fn is_full_azimuth(&self) -> bool {
        self.phi.count > 1 && (self.phi.step * self.phi.count as f64 - 360.0).abs() < 1e-6
    }
}

pub fn wrap_phi(phi: f64) -> f64 {
    let p = phi.rem_euclid(360.0);
    if p >= 360.0 - 1e-12 {
        0.0
    } else {
        p
    }
}

/// Unit direction vector for (θ, φ) in degrees.
pub fn unit_vector(theta_deg: f64, phi_deg: f64) -> [f64; 3] {
    let (t, p) = (theta_deg.to_radians(), phi_deg.to_radians());
    [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]
}

/// Great-circle angle between two directions (degrees).
pub fn angular_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (u, v) = (unit_vector(a.0, a.1), unit_vector(b.0, b.1));
    let dot: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Maps a signed cut angle to (θ, φ): positive angles lie in the φ0 half-plane,
/// negative ones in φ0 + 180°.
pub fn signed_cut_direction(signed_theta: f64, phi0: f64) -> (f64, f64) {
    if signed_theta >= 0.0 {
        (signed_theta, wrap_phi(phi0))
    } else {
        (-signed_theta, wrap_phi(phi0 + 180.0))
    }
}

/// Complex far-field samples on an [`AngleGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPattern {
    pub grid: AngleGrid,
    pub values: Vec<C64>,
    pub f_hz: f64,
    pub normalized: bool,
}

impl FieldPattern {
    pub fn new(grid: AngleGrid, values: Vec<C64>, f_hz: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pattern samples"));
        }
        Ok(Self {
            grid,
            values,
            f_hz,
            normalized: false,
        })
    }

    pub fn zeros(grid: AngleGrid, f_hz: f64) -> Self {
        Self {
            grid,
            values: vec![ZERO; grid.len()],
            f_hz,
            normalized: false,
        }
    }

    pub fn from_fn(grid: AngleGrid, f_hz: f64, mut f: impl FnMut(f64, f64) -> C64) -> Self {
        let values = grid.directions().map(|(t, p)| f(t, p)).collect();
        Self {
            grid,
            values,
            f_hz,
            normalized: false,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn at(&self, theta: f64, phi: f64) -> Option<C64> {
        self.grid.sample_index(theta, phi).map(|k| self.values[k])
    }

    pub fn check_compatible(&self, other: &FieldPattern) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        if (self.f_hz - other.f_hz).abs() > 1e-9 * self.f_hz.abs().max(1.0) {
            return Err(Error::GridMismatch(format!(
                "frequency {} vs {} Hz",
                self.f_hz, other.f_hz
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, k: C64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * k).collect(),
            normalized: false,
            ..self.clone()
        }
    }

    /// Accumulates `k · other` into `self`.
    pub fn add_scaled(&mut self, other: &FieldPattern, k: C64) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += k * b;
        }
        self.normalized = false;
        Ok(())
    }

    /// Mirror through the aperture plane (θ → 180° − θ). The θ axis must be
    /// symmetric about 90°.
    pub fn mirrored(&self) -> Result<Self> {
        let t = &self.grid.theta;
        if (t.start + t.last() - 180.0).abs() > 1e-9 {
            return Err(Error::GridMismatch("theta axis not symmetric about 90 deg".into()));
        }
        let (nt, np) = (t.count, self.grid.phi.count);
        let mut values = vec![ZERO; self.values.len()];
        for it in 0..nt {
            for ip in 0..np {
                values[self.grid.index(nt - 1 - it, ip)] = self.values[self.grid.index(it, ip)];
            }
        }
        Ok(Self { values, ..self.clone() })
    }

    /// Power ∫|E|²/(2η) dΩ over the sphere. Requires a full-azimuth grid; θ is
    /// integrated by the trapezoid rule with the sin θ weight.
    pub fn radiated_power(&self) -> Result<f64> {
        if !self.grid.is_full_azimuth() {
            return Err(Error::GridMismatch("power integration needs full azimuth coverage".into()));
        }
        let (th, ph) = (&self.grid.theta, &self.grid.phi);
        let dphi = ph.step.to_radians();
        let dth = th.step.to_radians();
        let mut total = 0.0;
        for it in 0..th.count {
            let w = if it == 0 || it + 1 == th.count { 0.5 } else { 1.0 };
            let s = th.value(it).to_radians().sin();
            let ring: f64 = (0..ph.count).map(|ip| self.values[self.grid.index(it, ip)].norm_sqr()).sum();
            total += w * s * ring;
        }
        Ok(total * dth * dphi / (2.0 * ETA0))
    }

    /// CSV rows `theta_deg,phi_deg,re,im,mag_db` with magnitude relative to
    /// the pattern peak, floored at [`DB_FLOOR`].
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "theta_deg,phi_deg,re,im,mag_db")?;
        let peak = self.max_abs();
        for (k, v) in self.values.iter().enumerate() {
            let (t, p) = self.grid.angles(k);
            writeln!(w, "{},{},{},{},{}", t, p, v.re, v.im, rel_db(v.norm(), peak))?;
        }
        Ok(())
    }
}

fn rel_db(mag: f64, peak: f64) -> f64 {
    if peak <= 0.0 || mag <= 0.0 {
        return DB_FLOOR;
    }
    (20.0 * (mag / peak).log10()).max(DB_FLOOR)
}

/// Peak magnitude scaled to one.
pub fn normalize(p: &FieldPattern) -> Result<FieldPattern> {
    let peak = p.max_abs();
    if peak == 0.0 {
        return Err(Error::ZeroPattern);
    }
    let mut out = p.scaled(C64::new(1.0 / peak, 0.0));
    out.normalized = true;
    Ok(out)
}

/// Pointwise `total − structural`.
pub fn structural_subtract(total: &FieldPattern, structural: &FieldPattern) -> Result<FieldPattern> {
    total.check_compatible(structural)?;
    let values = total
        .values
        .iter()
        .zip(&structural.values)
        .map(|(a, b)| a - b)
        .collect();
    Ok(FieldPattern {
        values,
        normalized: false,
        ..total.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// θ ∈ [0°, 90°)
    Reflection,
    /// θ ∈ (90°, 180°]
    Transmission,
}

impl Sector {
    pub fn contains(&self, theta: f64) -> bool {
        match self {
            Sector::Reflection => theta < 90.0,
            Sector::Transmission => theta > 90.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamMetrics {
    /// (θ, φ) in degrees.
    pub peak_direction: (f64, f64),
    /// Signed angle of the peak within the cut (degrees).
    pub peak_cut_angle: f64,
    /// Sector peak relative to the global pattern peak (dB).
    pub peak_level_db: f64,
    pub hpbw_deg: f64,
    /// Largest sidelobe relative to the sector peak (dB); [`DB_FLOOR`] when
    /// there is none.
    pub max_sidelobe_db: f64,
}

/// A great-circle cut through one sector, parametrized by a signed angle ψ
/// measured from the sector's broadside (+z for reflection, −z for
/// transmission). ψ > 0 lies in the φ0 half-plane.
#[derive(Debug, Clone)]
pub struct SectorCut {
    pub sector: Sector,
    pub phi0: f64,
    /// (ψ, power, flat sample index), sorted by ψ.
    pub samples: Vec<(f64, f64, usize)>,
}

impl SectorCut {
    pub fn extract(p: &FieldPattern, sector: Sector, phi0: f64) -> Result<Self> {
        let g = &p.grid;
        let ip_pos = g.phi.index_of(wrap_phi(phi0), 1e-6).ok_or_else(|| {
            Error::GridMismatch(format!("grid has no phi = {phi0} deg half-plane"))
        })?;
        let ip_neg = g.phi.index_of(wrap_phi(phi0 + 180.0), 1e-6);
        let mut samples = Vec::new();
        for it in 0..g.theta.count {
            let theta = g.theta.value(it);
            if !sector.contains(theta) {
                continue;
            }
            let psi = match sector {
                Sector::Reflection => theta,
                Sector::Transmission => 180.0 - theta,
            };
            let kp = g.index(it, ip_pos);
            samples.push((psi, p.values[kp].norm_sqr(), kp));
            if let Some(ipn) = ip_neg {
                if psi > 1e-9 {
                    let kn = g.index(it, ipn);
                    samples.push((-psi, p.values[kn].norm_sqr(), kn));
                }
            }
        }
        if samples.is_empty() {
            return Err(Error::GridMismatch("no samples in sector".into()));
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { sector, phi0, samples })
    }

    /// (θ, φ) for a signed cut angle.
    pub fn direction(&self, psi: f64) -> (f64, f64) {
        let (t, p) = signed_cut_direction(psi, self.phi0);
        match self.sector {
            Sector::Reflection => (t, p),
            Sector::Transmission => (180.0 - t, p),
        }
    }

    /// Signed cut angle of a direction in this cut.
    pub fn psi_of(&self, dir: (f64, f64)) -> f64 {
        let off = match self.sector {
            Sector::Reflection => dir.0,
            Sector::Transmission => 180.0 - dir.0,
        };
        if off.abs() < 1e-9 || angular_distance((90.0, dir.1), (90.0, self.phi0)) < 90.0 {
            off
        } else {
            -off
        }
    }
}

/// Beam metrics in the φ = 90° (YOZ) cut.
pub fn beam_metrics(p: &FieldPattern, sector: Sector) -> Result<BeamMetrics> {
    beam_metrics_in_cut(p, sector, 90.0, None)
}

/// Beam metrics in the φ0 cut. When several samples tie for the sector peak
/// (e.g. the symmetric twin lobes of a 1-bit aperture), `prefer` selects the
/// tied sample closest to that direction; otherwise the lowest signed angle wins.
pub fn beam_metrics_in_cut(
    p: &FieldPattern,
    sector: Sector,
    phi0: f64,
    prefer: Option<(f64, f64)>,
) -> Result<BeamMetrics> {
    let global = p.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let cut = SectorCut::extract(p, sector, phi0)?;
    let pw: Vec<f64> = cut.samples.iter().map(|s| s.1).collect();
    let smax = pw.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Err(Error::NoBeam(f64::INFINITY));
    }
    let below = 10.0 * (global / smax).log10();
    if below > NO_BEAM_DB {
        return Err(Error::NoBeam(below));
    }
    let tied: Vec<usize> = (0..pw.len()).filter(|&i| pw[i] >= smax * (1.0 - PEAK_TIE_REL)).collect();
    let ipk = match prefer {
        Some(dir) => *tied
            .iter()
            .min_by(|&&a, &&b| {
                let da = angular_distance(cut.direction(cut.samples[a].0), dir);
                let db = angular_distance(cut.direction(cut.samples[b].0), dir);
                da.total_cmp(&db)
            })
            .expect("at least one tied sample"),
        None => tied[0],
    };
    let psi = |i: usize| cut.samples[i].0;
    let half = pw[ipk] / 2.0;
    let db = |x: f64| 10.0 * x.max(1e-300).log10();

    // −3 dB crossings, interpolated linearly in dB
    let crossing = |dir: isize| -> f64 {
        let mut i = ipk as isize;
        loop {
            let j = i + dir;
            if j < 0 || j as usize >= pw.len() {
                return psi(i as usize);
            }
            let (a, b) = (i as usize, j as usize);
            if pw[b] < half {
                let (da, dbb) = (db(pw[a]), db(pw[b]));
                let t = (da - db(half)) / (da - dbb);
                return psi(a) + t * (psi(b) - psi(a));
            }
            i = j;
        }
    };
    let hpbw = crossing(1) - crossing(-1);

    // main lobe extends to the first local minimum on each side
    let mut lo = ipk;
    while lo > 0 && pw[lo - 1] <= pw[lo] {
        lo -= 1;
    }
    let mut hi = ipk;
    while hi + 1 < pw.len() && pw[hi + 1] <= pw[hi] {
        hi += 1;
    }
    let mut sidelobe: f64 = 0.0;
    for i in (0..lo).chain(hi + 1..pw.len()) {
        let left_ok = i == 0 || pw[i] >= pw[i - 1];
        let right_ok = i + 1 == pw.len() || pw[i] >= pw[i + 1];
        if left_ok && right_ok {
            sidelobe = sidelobe.max(pw[i]);
        }
    }
    let max_sidelobe_db = if sidelobe > 0.0 {
        (db(sidelobe) - db(pw[ipk])).max(DB_FLOOR).min(0.0)
    } else {
        DB_FLOOR
    };
    Ok(BeamMetrics {
        peak_direction: cut.direction(psi(ipk)),
        peak_cut_angle: psi(ipk),
        peak_level_db: db(pw[ipk]) - db(global),
        hpbw_deg: hpbw,
        max_sidelobe_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cut_grid(step: f64) -> AngleGrid {
        AngleGrid::cut(90.0, step).unwrap()
    }

    /// N-element uniform λ/2 array along y with isotropic elements, reflection side only.
    fn uniform_array(grid: AngleGrid, n: usize) -> FieldPattern {
        FieldPattern::from_fn(grid, 2.4e9, |t, p| {
            if t >= 90.0 {
                return ZERO;
            }
            let u = unit_vector(t, p)[1];
            (0..n).map(|i| C64::from_polar(1.0, std::f64::consts::PI * i as f64 * u)).sum()
        })
    }

    #[test]
    fn normalize_properties() {
        let g = cut_grid(1.0);
        let c = FieldPattern::from_fn(g, 1.0, |_, _| C64::new(3.0, 4.0));
        let n = normalize(&c).unwrap();
        assert!(n.values.iter().all(|v| (v.norm() - 1.0).abs() < 1e-15));
        let p = uniform_array(g, 4);
        let once = normalize(&p).unwrap();
        let twice = normalize(&once).unwrap();
        assert_eq!(once.values, twice.values);
        let scaled = normalize(&p.scaled(C64::new(10.0, 0.0))).unwrap();
        for (a, b) in once.values.iter().zip(&scaled.values) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!(matches!(normalize(&FieldPattern::zeros(g, 1.0)), Err(Error::ZeroPattern)));
    }

    #[test]
    fn uniform_four_element_sidelobe() {
        let p = uniform_array(cut_grid(0.1), 4);
        let m = beam_metrics(&p, Sector::Reflection).unwrap();
        assert_abs_diff_eq!(m.peak_direction.0, 0.0, epsilon = 1e-9);
        // analytic first sidelobe of a 4-element uniform array: −11.3 dB
        assert_abs_diff_eq!(m.max_sidelobe_db, -11.3, epsilon = 0.1);
        assert_abs_diff_eq!(m.peak_level_db, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cosine_element_hpbw() {
        let p = FieldPattern::from_fn(cut_grid(0.05), 1.0, |t, _| {
            C64::new(if t < 90.0 { t.to_radians().cos() } else { 0.0 }, 0.0)
        });
        let m = beam_metrics(&p, Sector::Reflection).unwrap();
        assert_abs_diff_eq!(m.hpbw_deg, 90.0, epsilon = 0.05);
        assert_eq!(m.max_sidelobe_db, DB_FLOOR);
    }

    #[test]
    fn empty_sector_has_no_beam() {
        let p = uniform_array(cut_grid(1.0), 4);
        assert!(matches!(beam_metrics(&p, Sector::Transmission), Err(Error::NoBeam(_))));
    }

    #[test]
    fn transmission_sector_wraps_through_180() {
        let g = cut_grid(1.0);
        let p = FieldPattern::from_fn(g, 1.0, |t, p| {
            let d = angular_distance((t, p), (165.0, 270.0));
            C64::new((-d * d / 200.0).exp(), 0.0)
        });
        let m = beam_metrics(&p, Sector::Transmission).unwrap();
        assert_abs_diff_eq!(m.peak_direction.0, 165.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.peak_direction.1, 270.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.peak_cut_angle, -15.0, epsilon = 1e-9);
    }

    #[test]
    fn tied_peaks_follow_preference() {
        let g = cut_grid(1.0);
        let p = FieldPattern::from_fn(g, 1.0, |t, p| {
            let a = angular_distance((t, p), (20.0, 90.0));
            let b = angular_distance((t, p), (20.0, 270.0));
            C64::new((-a * a / 50.0).exp() + (-b * b / 50.0).exp(), 0.0)
        });
        let m = beam_metrics_in_cut(&p, Sector::Reflection, 90.0, Some((20.0, 90.0))).unwrap();
        assert_eq!(m.peak_direction, (20.0, 90.0));
        let m = beam_metrics_in_cut(&p, Sector::Reflection, 90.0, Some((20.0, 270.0))).unwrap();
        assert_eq!(m.peak_direction, (20.0, 270.0));
    }

    #[test]
    fn subtract_examples() {
        let g = cut_grid(2.0);
        let a = uniform_array(g, 3);
        let d = structural_subtract(&a, &a).unwrap();
        assert!(d.values.iter().all(|v| v.norm() == 0.0));
        let other = FieldPattern::zeros(cut_grid(1.0), a.f_hz);
        assert!(matches!(structural_subtract(&a, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn isotropic_power_integral() {
        let g = AngleGrid::full(1.0, 5.0).unwrap();
        let p = FieldPattern::from_fn(g, 1.0, |_, _| C64::new(1.0, 0.0));
        let expected = 4.0 * std::f64::consts::PI / (2.0 * ETA0);
        assert!((p.radiated_power().unwrap() - expected).abs() / expected < 1e-4);
    }

    #[test]
    fn csv_floor() {
        let g = cut_grid(45.0);
        let p = FieldPattern::from_fn(g, 1.0, |t, _| C64::new(if t == 0.0 { 1.0 } else { 0.0 }, 0.0));
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("theta_deg,phi_deg,re,im,mag_db\n"));
        assert!(s.lines().skip(3).all(|l| l.ends_with(",-80")));
    }

    proptest! {
        #[test]
        fn subtract_is_antisymmetric(seed in 0u64..1000) {
            let g = cut_grid(10.0);
            let mk = |s: u64| FieldPattern::from_fn(g, 1.0, |t, p| C64::new((t * (s as f64 + 1.0)).sin(), (p + s as f64).cos()));
            let (a, b) = (mk(seed), mk(seed + 7));
            let ab = structural_subtract(&a, &b).unwrap();
            let ba = structural_subtract(&b, &a).unwrap();
            for (x, y) in ab.values.iter().zip(&ba.values) {
                prop_assert!((x + y).norm() < 1e-15);
            }
        }

        #[test]
        fn peak_invariant_under_phase_and_scale(phase in -3.1f64..3.1, scale in 0.01f64..100.0, steer in -40.0f64..40.0) {
            let g = cut_grid(1.0);
            let p = FieldPattern::from_fn(g, 1.0, |t, ph| {
                if t >= 90.0 { return ZERO; }
                let u = unit_vector(t, ph)[1];
                let u0 = steer.to_radians().sin();
                (0..6).map(|i| C64::from_polar(1.0, std::f64::consts::PI * i as f64 * (u - u0))).sum()
            });
            let m0 = beam_metrics(&p, Sector::Reflection).unwrap();
            let q = p.scaled(C64::from_polar(scale, phase));
            let m1 = beam_metrics(&q, Sector::Reflection).unwrap();
            let m2 = beam_metrics(&normalize(&q).unwrap(), Sector::Reflection).unwrap();
            prop_assert_eq!(m0.peak_direction, m1.peak_direction);
            prop_assert_eq!(m0.peak_direction, m2.peak_direction);
        }
    }
}
