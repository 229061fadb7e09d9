//! Cell-level scattering: phase shifter / splitter / phase shifter cascade and
//! the 2M-port surface matrix.

use std::f64::consts::TAU;

use crate::antenna::PhaseState;
use crate::error::{Error, Result};
use crate::netalg::{ComplexMatrix, TwoPortNetwork, C64, Z0};
use crate::splitter::SplitterState;

/// Magnitudes below this make a phase meaningless.
pub const PHASE_MAG_MIN: f64 = 1e-12;

/// Splitter description used by a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellSplit {
    Circuit(SplitterState),
    /// Symmetric reciprocal splitter given directly as |S11|, |S21|, arg S11, arg S21.
    Abstract { r: f64, t: f64, c1: f64, c2: f64 },
}

impl CellSplit {
    pub fn network(&self) -> TwoPortNetwork {
        match *self {
            CellSplit::Circuit(st) => st.s,
            CellSplit::Abstract { r, t, c1, c2 } => {
                let (a, b) = (C64::from_polar(r, c1), C64::from_polar(t, c2));
                TwoPortNetwork { s: [[a, b], [b, a]], z0: Z0 }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellConfig {
    pub split: CellSplit,
    pub theta1: PhaseState,
    pub theta2: PhaseState,
}

impl CellConfig {
    pub fn new(splitter: SplitterState, theta1: PhaseState, theta2: PhaseState) -> Self {
        Self {
            split: CellSplit::Circuit(splitter),
            theta1,
            theta2,
        }
    }

    pub fn from_abstract(r: f64, t: f64, c1: f64, c2: f64, theta1: PhaseState, theta2: PhaseState) -> Self {
        Self {
            split: CellSplit::Abstract { r, t, c1, c2 },
            theta1,
            theta2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellScattering {
    pub phi_r: C64,
    pub phi_t: C64,
    pub phi_r_back: C64,
}

/// S_total = [[S11·e^{j2θ1}, S12·e^{j(θ1+θ2)}], [S21·e^{j(θ1+θ2)}, S22·e^{j2θ2}]].
pub fn cell_total_matrix(cfg: &CellConfig) -> CellScattering {
    let s = cfg.split.network();
    let (p1, p2) = (cfg.theta1.phasor(), cfg.theta2.phasor());
    CellScattering {
        phi_r: s.s11() * p1 * p1,
        phi_t: s.s21() * p1 * p2,
        phi_r_back: s.s22() * p2 * p2,
    }
}

fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU - 1e-15 {
        0.0
    } else {
        r
    }
}

/// (θ_r, θ_t) in [0, 2π): θ_r = 2θ1 + c1, θ_t = θ1 + θ2 + c2.
pub fn cell_phases(cfg: &CellConfig) -> Result<(f64, f64)> {
    let s = cfg.split.network();
    let (r, t) = (s.s11(), s.s21());
    if r.norm() < PHASE_MAG_MIN {
        return Err(Error::PhaseUndefined(r.norm()));
    }
    if t.norm() < PHASE_MAG_MIN {
        return Err(Error::PhaseUndefined(t.norm()));
    }
    let (t1, t2) = (cfg.theta1.phase_rad(), cfg.theta2.phase_rad());
    Ok((wrap(2.0 * t1 + r.arg()), wrap(t1 + t2 + t.arg())))
}

/// |φ_r / φ_t|².
pub fn power_ratio(cfg: &CellConfig) -> Result<f64> {
    let c = cell_total_matrix(cfg);
    if c.phi_t.norm() == 0.0 {
        return Err(Error::InfiniteRatio);
    }
    Ok((c.phi_r / c.phi_t).norm_sqr())
}

/// 2M-port surface scattering matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePhi {
    pub m: usize,
    pub matrix: ComplexMatrix,
}

pub fn assemble_phi(cells: &[CellScattering]) -> Result<SurfacePhi> {
    let m = cells.len();
    if m == 0 {
        return Err(Error::InvalidParameter("surface needs at least one cell".into()));
    }
    let mut phi = ComplexMatrix::zeros(2 * m, 2 * m);
    for (i, c) in cells.iter().enumerate() {
        phi[(i, i)] = c.phi_r;
        phi[(i + m, i + m)] = c.phi_r_back;
        phi[(i, i + m)] = c.phi_t;
        phi[(i + m, i)] = c.phi_t;
    }
    Ok(SurfacePhi { m, matrix: phi })
}

/// Same cell through the two-port cascade primitive.
pub fn cell_by_cascade(cfg: &CellConfig) -> Result<TwoPortNetwork> {
    let s = cfg.split.network();
    let a = TwoPortNetwork::phase_shifter(cfg.theta1.phase_rad(), s.z0);
    let b = TwoPortNetwork::phase_shifter(cfg.theta2.phase_rad(), s.z0);
    crate::netalg::cascade(&crate::netalg::cascade(&a, &s)?, &b)
}
