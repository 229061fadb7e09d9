//! Dense complex matrices and two-port / N-port network conversions.
//!
//! All conversions use a single real reference impedance `z0`. Linear solves
//! go through an LU factorization and reject systems whose reciprocal
//! 1-norm condition number falls below [`RCOND_MIN`].

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default reference impedance (ohm).
pub const Z0: f64 = 50.0;

/// Reciprocal condition number below which a system counts as singular.
pub const RCOND_MIN: f64 = 1e-12;

/// Two-ports with |s21| below this are not cascaded.
pub const CASCADE_S21_MIN: f64 = 1e-12;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const J: C64 = C64::new(0.0, 1.0);

/// e^{j phase}
#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// Dense complex matrix with at least one row and column.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    /// Builds a matrix from row slices; all rows must have equal length and
    /// all entries must be finite.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if nrows == 0 || ncols == 0 {
            return Err(Error::DimensionMismatch("matrix must be at least 1x1".into()));
        }
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        if rows.iter().flatten().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j])))
    }

    pub fn from_fn(nrows: usize, ncols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(nrows > 0 && ncols > 0, "matrix must be at least 1x1");
        Self(DMatrix::from_fn(nrows, ncols, f))
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_fn(nrows, ncols, |_, _| ZERO)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { ZERO })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { C64::new(diag[i], 0.0) } else { ZERO })
    }

    pub fn from_two_port(s: &[[C64; 2]; 2]) -> Self {
        Self::from_fn(2, 2, |i, j| s[i][j])
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, k: C64) -> Self {
        Self(&self.0 * k)
    }

    pub fn diagonal(&self) -> Vec<C64> {
        self.0.diagonal().iter().copied().collect()
    }

    pub fn row(&self, i: usize) -> Vec<C64> {
        self.0.row(i).iter().copied().collect()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn norm1(&self) -> f64 {
        (0..self.ncols())
            .map(|j| self.0.column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Sub-block `[r0, r0+nr) x [c0, c0+nc)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        Self(self.0.view((r0, c0), (nr, nc)).into_owned())
    }

    /// Block-diagonal composition of `a` and `b`.
    pub fn block_diag(a: &Self, b: &Self) -> Self {
        let (n1, n2) = (a.nrows(), b.nrows());
        let (m1, m2) = (a.ncols(), b.ncols());
        Self::from_fn(n1 + n2, m1 + m2, |i, j| {
            if i < n1 && j < m1 {
                a[(i, j)]
            } else if i >= n1 && j >= m1 {
                b[(i - n1, j - m1)]
            } else {
                ZERO
            }
        })
    }

    /// Relative asymmetry ‖A − Aᵀ‖_F / ‖A‖_F (0 for the zero matrix).
    pub fn asymmetry(&self) -> f64 {
        let n = self.norm();
        if n == 0.0 {
            return 0.0;
        }
        (&self.0 - self.0.transpose()).norm() / n
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols(), "vector length mismatch");
        (0..self.nrows())
            .map(|i| (0..self.ncols()).map(|j| self.0[(i, j)] * x[j]).sum())
            .collect()
    }

    /// Inverse with condition check.
    pub fn inverse(&self) -> Result<Self> {
        Ok(Factorized::new(self)?.inverse)
    }

    /// Solves `self · X = rhs` for a matrix right-hand side.
    pub fn solve_matrix(&self, rhs: &Self) -> Result<Self> {
        let f = Factorized::new(self)?;
        if rhs.nrows() != self.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "rhs has {} rows, matrix has {}",
                rhs.nrows(),
                self.nrows()
            )));
        }
        Ok(Self(&f.inverse.0 * &rhs.0))
    }

    /// Reciprocal 1-norm condition number (0 when exactly singular).
    pub fn rcond(&self) -> f64 {
        match Factorized::new(self) {
            Ok(f) => f.rcond,
            Err(Error::SingularSystem { rcond }) => rcond,
            Err(_) => 0.0,
        }
    }
}

struct Factorized {
    inverse: ComplexMatrix,
    rcond: f64,
}

impl Factorized {
    fn new(a: &ComplexMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "expected square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let anorm = a.norm1();
        if anorm == 0.0 || !anorm.is_finite() {
            return Err(Error::SingularSystem { rcond: 0.0 });
        }
        let inv = a
            .0
            .clone()
            .lu()
            .try_inverse()
            .ok_or(Error::SingularSystem { rcond: 0.0 })?;
        let inv = ComplexMatrix(inv);
        let inorm = inv.norm1();
        let rcond = if inorm.is_finite() { 1.0 / (anorm * inorm) } else { 0.0 };
        if !(rcond >= RCOND_MIN) {
            return Err(Error::SingularSystem { rcond });
        }
        Ok(Self { inverse: inv, rcond })
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.0[idx]
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.ncols(), rhs.nrows(), "matrix product dimension mismatch");
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

/// Solves `a · x = b`.
pub fn solve(a: &ComplexMatrix, b: &[C64]) -> Result<Vec<C64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("solve needs a square matrix".into()));
    }
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "rhs length {} != {}",
            b.len(),
            a.nrows()
        )));
    }
    let f = Factorized::new(a)?;
    let x = &f.inverse.0 * DVector::from_column_slice(b);
    Ok(x.iter().copied().collect())
}

/// Z = z0 (I + S)(I − S)⁻¹
pub fn s_to_z(s: &ComplexMatrix, z0: f64) -> Result<ComplexMatrix> {
    check_z0(z0)?;
    let n = square_dim(s)?;
    let id = ComplexMatrix::identity(n);
    let inv = (&id - s).inverse().map_err(|e| match e {
        Error::SingularSystem { rcond } => Error::SingularConversion(format!(
            "S->Z: (I - S) is singular (rcond {rcond:.2e}) for S = {:?}",
            s.inner().as_slice()
        )),
        other => other,
    })?;
    Ok((&(&id + s) * &inv).scale(C64::new(z0, 0.0)))
}

/// S = (Z − z0 I)(Z + z0 I)⁻¹
pub fn z_to_s(z: &ComplexMatrix, z0: f64) -> Result<ComplexMatrix> {
    check_z0(z0)?;
    let n = square_dim(z)?;
    let zi = ComplexMatrix::identity(n).scale(C64::new(z0, 0.0));
    let inv = (z + &zi).inverse().map_err(|e| match e {
        Error::SingularSystem { rcond } => Error::SingularConversion(format!(
            "Z->S: (Z + z0 I) is singular (rcond {rcond:.2e}) for Z = {:?}",
            z.inner().as_slice()
        )),
        other => other,
    })?;
    Ok(&(z - &zi) * &inv)
}

/// True iff ‖SᴴS − I‖_max ≤ tol.
pub fn is_lossless(s: &ComplexMatrix, tol: f64) -> bool {
    if !s.is_square() {
        return false;
    }
    let g = &s.adjoint() * s;
    let dev = &g - &ComplexMatrix::identity(s.nrows());
    dev.max_abs() <= tol
}

fn check_z0(z0: f64) -> Result<()> {
    if z0 > 0.0 && z0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("reference impedance {z0} must be > 0")))
    }
}

fn square_dim(m: &ComplexMatrix) -> Result<usize> {
    if m.is_square() {
        Ok(m.nrows())
    } else {
        Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// A 2×2 scattering matrix with its real reference impedance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPortNetwork {
    pub s: [[C64; 2]; 2],
    pub z0: f64,
}

impl TwoPortNetwork {
    pub fn new(s: [[C64; 2]; 2], z0: f64) -> Result<Self> {
        check_z0(z0)?;
        if s.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("two-port S-parameters"));
        }
        Ok(Self { s, z0 })
    }

    /// Matched through line, S = antidiag(1, 1).
    pub fn through(z0: f64) -> Self {
        Self { s: [[ZERO, ONE], [ONE, ZERO]], z0 }
    }

    /// Ideal matched phase shifter, S = antidiag(e^{jθ}, e^{jθ}).
    pub fn phase_shifter(theta: f64, z0: f64) -> Self {
        let t = cis(theta);
        Self { s: [[ZERO, t], [t, ZERO]], z0 }
    }

    pub fn s11(&self) -> C64 {
        self.s[0][0]
    }
    pub fn s12(&self) -> C64 {
        self.s[0][1]
    }
    pub fn s21(&self) -> C64 {
        self.s[1][0]
    }
    pub fn s22(&self) -> C64 {
        self.s[1][1]
    }

    pub fn is_reciprocal(&self, tol: f64) -> bool {
        (self.s12() - self.s21()).norm() <= tol
    }

    pub fn matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_two_port(&self.s)
    }

    /// Port-2 reversed network (ports swapped).
    pub fn flipped(&self) -> Self {
        Self {
            s: [[self.s22(), self.s21()], [self.s12(), self.s11()]],
            z0: self.z0,
        }
    }

    /// Reflection seen at port 1 when port 2 is terminated with `gamma_load`.
    pub fn input_reflection(&self, gamma_load: C64) -> C64 {
        self.s11() + self.s12() * self.s21() * gamma_load / (ONE - self.s22() * gamma_load)
    }

    /// z-parameters, when they exist.
    pub fn z_params(&self) -> Result<[[C64; 2]; 2]> {
        let z = s_to_z(&self.matrix(), self.z0)?;
        Ok([[z[(0, 0)], z[(0, 1)]], [z[(1, 0)], z[(1, 1)]]])
    }

    /// Transfer (chain) matrix with `[a1; b1] = T [b2; a2]`.
    fn transfer(&self) -> Result<[[C64; 2]; 2]> {
        let s21 = self.s21();
        if s21.norm() < CASCADE_S21_MIN {
            return Err(Error::NonCascadable { s21: s21.norm() });
        }
        let det = self.s11() * self.s22() - self.s12() * s21;
        Ok([
            [ONE / s21, -self.s22() / s21],
            [self.s11() / s21, -det / s21],
        ])
    }

    fn from_transfer(t: [[C64; 2]; 2], z0: f64) -> Result<Self> {
        let t11 = t[0][0];
        if t11.norm() == 0.0 {
            return Err(Error::NonCascadable { s21: f64::INFINITY });
        }
        let det_t = t[0][0] * t[1][1] - t[0][1] * t[1][0];
        Self::new(
            [[t[1][0] / t11, det_t / t11], [ONE / t11, -t[0][1] / t11]],
            z0,
        )
    }
}

/// Chains `a` (ports 1-2) into `b` (ports 1-2); `a`'s port 2 connects to `b`'s port 1.
pub fn cascade(a: &TwoPortNetwork, b: &TwoPortNetwork) -> Result<TwoPortNetwork> {
    if (a.z0 - b.z0).abs() > 1e-12 * a.z0.max(b.z0) {
        return Err(Error::MismatchedReference { a: a.z0, b: b.z0 });
    }
    let ta = a.transfer()?;
    let tb = b.transfer()?;
    let mut t = [[ZERO; 2]; 2];
    for (i, row) in t.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = ta[i][0] * tb[0][j] + ta[i][1] * tb[1][j];
        }
    }
    TwoPortNetwork::from_transfer(t, a.z0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn series(z: C64) -> TwoPortNetwork {
        let d = z + 2.0 * Z0;
        TwoPortNetwork::new([[z / d, 2.0 * Z0 / d], [2.0 * Z0 / d, z / d]], Z0).unwrap()
    }

    #[test]
    fn matched_network_converts_to_reference_diagonal() {
        let z = s_to_z(&ComplexMatrix::zeros(2, 2), 50.0).unwrap();
        assert_abs_diff_eq!(z[(0, 0)].re, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[(1, 1)].re, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[(0, 1)].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_scattering_is_singular() {
        let err = s_to_z(&ComplexMatrix::identity(2), 50.0).unwrap_err();
        assert!(matches!(err, Error::SingularConversion(_)), "{err}");
    }

    #[test]
    fn series_element_has_no_z_parameters() {
        // I - S is rank one for any series element.
        let err = series(c(100.0, 0.0)).z_params().unwrap_err();
        assert!(matches!(err, Error::SingularConversion(_)));
    }

    #[test]
    fn z_to_s_trivial_cases() {
        let s = z_to_s(&ComplexMatrix::from_real_diagonal(&[50.0, 50.0]), 50.0).unwrap();
        assert!(s.max_abs() < 1e-15);
        let s = z_to_s(&ComplexMatrix::zeros(2, 2), 50.0).unwrap();
        assert_abs_diff_eq!(s[(0, 0)].re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[(1, 1)].re, -1.0, epsilon = 1e-15);
        assert!(s[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn tee_network_round_trip() {
        // Tee: series arms za, zb, shunt zc.
        let (za, zb, zc) = (c(30.0, 20.0), c(10.0, -40.0), c(80.0, 15.0));
        let z = ComplexMatrix::from_rows(&[vec![za + zc, zc], vec![zc, zb + zc]]).unwrap();
        let s = z_to_s(&z, 50.0).unwrap();
        let back = s_to_z(&s, 50.0).unwrap();
        assert!((&back - &z).max_abs() / z.max_abs() < 1e-12);
    }

    #[test]
    fn cascade_adds_phases() {
        let (t1, t2) = (0.3, 1.1);
        let a = TwoPortNetwork::phase_shifter(t1, Z0);
        let b = TwoPortNetwork::phase_shifter(t2, Z0);
        let ab = cascade(&a, &b).unwrap();
        assert!((ab.s21() - cis(t1 + t2)).norm() < 1e-14);
        assert!((ab.s12() - cis(t1 + t2)).norm() < 1e-14);
        assert!(ab.s11().norm() < 1e-14 && ab.s22().norm() < 1e-14);
    }

    #[test]
    fn through_is_cascade_identity() {
        let a = series(c(20.0, 70.0));
        let r = cascade(&a, &TwoPortNetwork::through(Z0)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((r.s[i][j] - a.s[i][j]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn cascade_rejects_mismatch_and_blocked_paths() {
        let a = TwoPortNetwork::through(50.0);
        let b = TwoPortNetwork::through(75.0);
        assert!(matches!(cascade(&a, &b), Err(Error::MismatchedReference { .. })));
        let open = TwoPortNetwork::new([[ONE, ZERO], [ZERO, ONE]], 50.0).unwrap();
        assert!(matches!(cascade(&open, &a), Err(Error::NonCascadable { .. })));
    }

    #[test]
    fn cascade_matches_symbolic_cell_matrix() {
        let (t1, t2) = (0.7, 2.2);
        let mode = series(c(3.0, 85.0));
        let r = cascade(
            &cascade(&TwoPortNetwork::phase_shifter(t1, Z0), &mode).unwrap(),
            &TwoPortNetwork::phase_shifter(t2, Z0),
        )
        .unwrap();
        let expected = [
            [mode.s11() * cis(2.0 * t1), mode.s12() * cis(t1 + t2)],
            [mode.s21() * cis(t1 + t2), mode.s22() * cis(2.0 * t2)],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert!((r.s[i][j] - expected[i][j]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn lossless_examples() {
        assert!(is_lossless(&series(c(0.0, 100.0)).matrix(), 1e-10));
        let lossy = series(c(100.0, 0.0)).matrix();
        assert!(!is_lossless(&lossy, 1e-10));
        let g = &lossy.adjoint() * &lossy;
        assert_abs_diff_eq!(g[(0, 0)].re, 0.5, epsilon = 1e-12);
        let t = cis(0.4);
        let anti = ComplexMatrix::from_rows(&[vec![ZERO, t], vec![t, ZERO]]).unwrap();
        assert!(is_lossless(&anti, 1e-12));
    }

    #[test]
    fn solve_examples() {
        let b = vec![c(1.0, 2.0), c(-3.0, 0.5)];
        let x = solve(&ComplexMatrix::identity(2), &b).unwrap();
        assert_eq!(x, b);
        let x = solve(&ComplexMatrix::from_real_diagonal(&[100.0, 100.0]), &[ONE, ONE]).unwrap();
        assert_abs_diff_eq!(x[0].re, 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1].re, 0.01, epsilon = 1e-15);
    }

    #[test]
    fn solve_reports_singularity() {
        let a = ComplexMatrix::from_rows(&[vec![ONE, ONE], vec![ONE, ONE]]).unwrap();
        assert!(matches!(solve(&a, &[ONE, ONE]), Err(Error::SingularSystem { .. })));
        let a = ComplexMatrix::from_real_diagonal(&[1.0, 1e-14]);
        match solve(&a, &[ONE, ONE]) {
            Err(Error::SingularSystem { rcond }) => assert!(rcond < 1e-12),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn from_rows_validates() {
        assert!(ComplexMatrix::from_rows(&[]).is_err());
        assert!(ComplexMatrix::from_rows(&[vec![ONE], vec![ONE, ONE]]).is_err());
        assert!(ComplexMatrix::from_rows(&[vec![C64::new(f64::NAN, 0.0)]]).is_err());
    }
}
