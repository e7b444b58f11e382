//! Dense symmetric and SPD matrix calculus.
//!
//! Matrix functions of symmetric arguments (square root, logarithm, powers,
//! exponential) go through a full symmetric eigendecomposition. The general
//! matrix exponential uses scaling and squaring with a degree-13 Padé
//! approximant.

use alloc::vec::Vec;
use core::ops::Deref;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Relative eigenvalue floor for SPD matrices.
pub const SPD_TOL: f64 = 1e-10;

/// Largest relative asymmetry accepted when building a symmetric matrix.
pub const SYMMETRY_TOL: f64 = 1e-8;

pub type Mat = DMatrix<f64>;

/// Symmetric matrix, not necessarily definite. Stored exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Mat);

/// Symmetric positive-definite matrix. Stored exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(Mat);

/// General real square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix(Mat);

fn check_square(m: &Mat) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// `½(M + M')`
pub fn symmetrize(m: &Mat) -> Mat {
    let mut s = m + m.transpose();
    s *= 0.5;
    s
}

/// `‖M - M'‖_F / ‖M‖_F`, zero for the zero matrix.
pub fn relative_asymmetry(m: &Mat) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / norm
}

impl SymMatrix {
    /// Symmetrizes `m`, rejecting relative asymmetry above [`SYMMETRY_TOL`].
    pub fn new(m: Mat) -> Result<Self> {
        check_square(&m)?;
        let asymmetry = relative_asymmetry(&m);
        if asymmetry > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry });
        }
        Ok(Self(symmetrize(&m)))
    }

    /// Projects an arbitrary square matrix onto its symmetric part.
    pub fn from_symmetric_part(m: &Mat) -> Self {
        Self(symmetrize(m))
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: data.len() });
        }
        Self::new(Mat::from_row_slice(n, n, data))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Mat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(Mat::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(Mat::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// Rebuilds from the upper triangle packed row by row (see [`pack_upper`]).
    pub fn from_upper(n: usize, packed: &[f64]) -> Result<Self> {
        Ok(Self(unpack_upper(n, packed)?))
    }

    pub fn to_upper(&self) -> Vec<f64> {
        pack_upper(&self.0)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigen(&self) -> (Vec<f64>, Mat) {
        sorted_eigen(&self.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let (vals, _) = self.eigen();
        vals[vals.len() - 1]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }
}

impl SpdMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        Self::from_sym(SymMatrix::new(m)?)
    }

    pub fn from_sym(s: SymMatrix) -> Result<Self> {
        let (min_eig, max_eig) = extreme_eigenvalues(&s.0);
        if !(max_eig > 0.0 && min_eig > SPD_TOL * max_eig) {
            return Err(Error::NotSpd { min_eig, max_eig });
        }
        Ok(Self(s.0))
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        Self::from_sym(SymMatrix::from_row_slice(n, data)?)
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::from_sym(SymMatrix::from_diagonal(d))
    }

    pub fn scalar(p: f64) -> Result<Self> {
        Self::from_diagonal(&[p])
    }

    pub fn identity(n: usize) -> Self {
        Self(Mat::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }

    pub fn to_sym(&self) -> SymMatrix {
        SymMatrix(self.0.clone())
    }

    pub fn to_upper(&self) -> Vec<f64> {
        pack_upper(&self.0)
    }

    pub fn eigen(&self) -> (Vec<f64>, Mat) {
        sorted_eigen(&self.0)
    }

    /// Inverse through the eigendecomposition.
    pub fn inverse(&self) -> SpdMatrix {
        SpdMatrix(spectral_map(&self.0, |x| 1.0 / x))
    }
}

impl SquareMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        check_square(&m)?;
        Ok(Self(m))
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: data.len() });
        }
        Self::new(Mat::from_row_slice(n, n, data))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Mat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(Mat::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }
}

macro_rules! matrix_views {
    ($($ty:ty),*) => {$(
        impl Deref for $ty {
            type Target = Mat;
            fn deref(&self) -> &Mat {
                &self.0
            }
        }

        impl AsRef<Mat> for $ty {
            fn as_ref(&self) -> &Mat {
                &self.0
            }
        }
    )*};
}

matrix_views!(SymMatrix, SpdMatrix, SquareMatrix);

impl From<SymMatrix> for SquareMatrix {
    fn from(s: SymMatrix) -> Self {
        SquareMatrix(s.0)
    }
}

impl From<SpdMatrix> for SymMatrix {
    fn from(s: SpdMatrix) -> Self {
        SymMatrix(s.0)
    }
}

/// Number of entries in the packed upper triangle of an `n x n` matrix.
pub fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Inverse of [`packed_len`], if `len` is a triangular number.
pub fn dim_from_packed_len(len: usize) -> Option<usize> {
    (1..=len).find(|&n| packed_len(n) >= len).filter(|&n| packed_len(n) == len)
}

/// Upper triangle `(i <= j)` in row-major order.
pub fn pack_upper(m: &Mat) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(packed_len(n));
    for i in 0..n {
        for j in i..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn unpack_upper(n: usize, packed: &[f64]) -> Result<Mat> {
    if packed.len() != packed_len(n) {
        return Err(Error::DimensionMismatch { expected: packed_len(n), found: packed.len() });
    }
    let mut m = Mat::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = packed[k];
            m[(j, i)] = packed[k];
            k += 1;
        }
    }
    Ok(m)
}

fn sorted_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

fn extreme_eigenvalues(m: &Mat) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// `V f(Λ) V'` for a symmetric `m = V Λ V'`.
pub fn spectral_map(m: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let eig = m.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let fk = f(*lambda);
        scaled.column_mut(k).iter_mut().for_each(|x| *x *= fk);
    }
    symmetrize(&(scaled * v.transpose()))
}

pub fn sqrt_spd(p: &SpdMatrix) -> SpdMatrix {
    SpdMatrix(spectral_map(p, |x| x.sqrt()))
}

pub fn inv_sqrt_spd(p: &SpdMatrix) -> SpdMatrix {
    SpdMatrix(spectral_map(p, |x| 1.0 / x.sqrt()))
}

pub fn log_spd(p: &SpdMatrix) -> SymMatrix {
    SymMatrix(spectral_map(p, |x| x.ln()))
}

/// `P^t` for real `t`.
pub fn powm_spd(p: &SpdMatrix, t: f64) -> SpdMatrix {
    SpdMatrix(spectral_map(p, |x| x.powf(t)))
}

pub fn exp_sym(s: &SymMatrix) -> SpdMatrix {
    SpdMatrix(spectral_map(s, |x| x.exp()))
}

/// `A P A'`, symmetrized.
pub fn congruence(a: &Mat, p: &Mat) -> Mat {
    symmetrize(&(a * p * a.transpose()))
}

/// `(½(A + A'), ½(A - A'))`
pub fn sym_split(a: &SquareMatrix) -> (SymMatrix, SquareMatrix) {
    let at = a.transpose();
    let mut s = &a.0 + &at;
    s *= 0.5;
    let mut k = &a.0 - &at;
    k *= 0.5;
    (SymMatrix(s), SquareMatrix(k))
}

pub fn frobenius_sq(m: &Mat) -> f64 {
    m.iter().map(|x| x * x).sum()
}

/// Ratio of smallest to largest eigenvalue of a symmetric matrix.
pub fn spectral_check(p: &Mat) -> f64 {
    let (min, max) = extreme_eigenvalues(&symmetrize(p));
    min / max
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const PADE13_THETA: f64 = 5.371920351148152;

fn one_norm(m: &Mat) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential of a general square matrix.
pub fn expm(m: &SquareMatrix) -> SquareMatrix {
    SquareMatrix(expm_mat(m))
}

pub fn expm_mat(a: &Mat) -> Mat {
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > PADE13_THETA { (norm / PADE13_THETA).log2().ceil() as i32 } else { 0 };
    let a = a * 2f64.powi(-squarings);
    let b = &PADE13;
    let id = Mat::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is nonsingular for scaled input");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// Solves `M X = B` by LU; `None` when `M` is numerically singular.
pub fn solve(m: &Mat, b: &Mat) -> Option<Mat> {
    let lu = m.clone().lu();
    let x = lu.solve(b)?;
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Frobenius distance relative to `‖reference‖_F`.
pub fn relative_frobenius(m: &Mat, reference: &Mat) -> f64 {
    (m - reference).norm() / reference.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(n: usize, d: &[f64]) -> Mat {
        Mat::from_row_slice(n, n, d)
    }

    #[test]
    fn sqrt_of_identity_and_diagonal() {
        let i2 = SpdMatrix::identity(2);
        assert!((sqrt_spd(&i2).as_mat() - Mat::identity(2, 2)).norm() < 1e-15);
        let d = SpdMatrix::from_diagonal(&[4.0, 9.0]).unwrap();
        assert!((sqrt_spd(&d).as_mat() - mat(2, &[2.0, 0.0, 0.0, 3.0])).norm() < 1e-14);
    }

    #[test]
    fn sqrt_of_coupled_matrix_matches_eigen_oracle() {
        // eigenvalues 1 and 3 on (1,-1)/√2 and (1,1)/√2
        let p = SpdMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let s = sqrt_spd(&p);
        let r3 = 3f64.sqrt();
        let expected = mat(2, &[(1.0 + r3) / 2.0, (r3 - 1.0) / 2.0, (r3 - 1.0) / 2.0, (1.0 + r3) / 2.0]);
        assert!((s.as_mat() - &expected).norm() < 1e-14);
        assert!(relative_frobenius(&(s.as_mat() * s.as_mat()), p.as_mat()) < 1e-12);
    }

    #[test]
    fn log_cases() {
        assert!(log_spd(&SpdMatrix::identity(3)).as_mat().norm() < 1e-15);
        let e = core::f64::consts::E;
        let d = SpdMatrix::from_diagonal(&[e, e * e]).unwrap();
        assert!((log_spd(&d).as_mat() - mat(2, &[1.0, 0.0, 0.0, 2.0])).norm() < 1e-14);
        let p = SpdMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let l3 = 3f64.ln();
        let expected = mat(2, &[l3 / 2.0, l3 / 2.0, l3 / 2.0, l3 / 2.0]);
        assert!((log_spd(&p).as_mat() - expected).norm() < 1e-14);
        let back = exp_sym(&log_spd(&p));
        assert!(relative_frobenius(back.as_mat(), p.as_mat()) < 1e-12);
    }

    #[test]
    fn expm_known_values() {
        let z = SquareMatrix::zeros(3);
        assert_eq!(expm(&z).as_mat(), &Mat::identity(3, 3));
        for theta in [0.3, 2.0, 7.5, 40.0] {
            let a = SquareMatrix::from_row_slice(2, &[0.0, theta, -theta, 0.0]).unwrap();
            let (c, s) = (theta.cos(), theta.sin());
            let rot = mat(2, &[c, s, -s, c]);
            assert!((expm(&a).as_mat() - rot).norm() < 1e-12 * (1.0 + theta), "theta={theta}");
        }
        let d = SquareMatrix::from_row_slice(2, &[0.7, 0.0, 0.0, -3.0]).unwrap();
        let e = expm(&d);
        assert!(((e[(0, 0)] - 0.7f64.exp()) / 0.7f64.exp()).abs() < 1e-14);
        assert!(((e[(1, 1)] - (-3f64).exp()) / (-3f64).exp()).abs() < 1e-13);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn expm_jordan_block() {
        // exp([[a, 1], [0, a]]) = e^a [[1, 1], [0, 1]]
        let a = 1.3;
        let m = SquareMatrix::from_row_slice(2, &[a, 1.0, 0.0, a]).unwrap();
        let expected = mat(2, &[1.0, 1.0, 0.0, 1.0]) * a.exp();
        assert!(relative_frobenius(expm(&m).as_mat(), &expected) < 1e-13);
    }

    #[test]
    fn sym_split_cases() {
        let a = SquareMatrix::from_row_slice(2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        let (s, k) = sym_split(&a);
        assert_eq!(s.as_mat(), &mat(2, &[1.0, 1.0, 1.0, 1.0]));
        assert_eq!(k.as_mat(), &mat(2, &[0.0, 1.0, -1.0, 0.0]));

        let sym = SquareMatrix::from_row_slice(2, &[1.0, 3.0, 3.0, 2.0]).unwrap();
        let (s, k) = sym_split(&sym);
        assert_eq!(s.as_mat(), sym.as_mat());
        assert_eq!(k.as_mat().norm(), 0.0);

        let skew = SquareMatrix::from_row_slice(2, &[0.0, 3.0, -3.0, 0.0]).unwrap();
        let (s, k) = sym_split(&skew);
        assert_eq!(s.as_mat().norm(), 0.0);
        assert_eq!(k.as_mat(), skew.as_mat());
    }

    #[test]
    fn frobenius_values() {
        assert_eq!(frobenius_sq(&Mat::identity(3, 3)), 3.0);
        assert_eq!(frobenius_sq(&mat(2, &[1.0, 0.0, 0.0, 2.0])), 5.0);
        assert_eq!(frobenius_sq(&mat(2, &[0.0, 1.0, -1.0, 0.0])), 2.0);
        assert_eq!(frobenius_sq(&Mat::zeros(4, 4)), 0.0);
        assert!((spectral_check(&mat(2, &[1.0, 0.0, 0.0, 4.0])) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn construction_rejects_bad_inputs() {
        assert!(matches!(SpdMatrix::from_row_slice(2, &[1.0, 2.0, 2.0, 1.0]), Err(Error::NotSpd { .. })));
        assert!(matches!(SpdMatrix::from_diagonal(&[1.0, 1e-11]), Err(Error::NotSpd { .. })));
        assert!(matches!(SymMatrix::from_row_slice(2, &[1.0, 2.0, 2.1, 1.0]), Err(Error::NotSymmetric { .. })));
        assert!(matches!(SquareMatrix::new(Mat::zeros(2, 3)), Err(Error::NotSquare { .. })));
        // tiny asymmetry is averaged away
        let s = SymMatrix::from_row_slice(2, &[1.0, 2.0, 2.0 + 1e-12, 1.0]).unwrap();
        assert_eq!(s[(0, 1)], s[(1, 0)]);
    }

    #[test]
    fn packing_layout() {
        let m = mat(3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        assert_eq!(pack_upper(&m), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(unpack_upper(3, &pack_upper(&m)).unwrap(), m);
        assert_eq!(dim_from_packed_len(6), Some(3));
        assert_eq!(dim_from_packed_len(5), None);
        assert_eq!(dim_from_packed_len(1), Some(1));
    }
}
