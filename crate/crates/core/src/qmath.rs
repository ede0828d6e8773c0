//! Minimal complex linear algebra shared by every other module.
//!
//! Everything in scope is small (2x2 up to 16x16) and dense with entries
//! of order one, so the implementations favour robustness over speed. The
//! Hermitian eigensolver is a cyclic complex Jacobi iteration, which
//! converges to machine precision at these sizes and has no trouble with
//! degenerate spectra. All tolerances are absolute.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

/// Absolute tolerance for treating a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues above `-PSD_CLIP` are treated as numerically nonnegative
/// and clipped to zero; anything below is a genuine negativity.
pub const PSD_CLIP: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum QmathError {
    #[error("matrix is not Hermitian: max|A - A^H| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not positive semidefinite: min eigenvalue = {min_eigenvalue:.3e}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("Bloch vector is not unit length: |n| = {norm:.12}")]
    NotUnitVector { norm: f64 },
}

/// Dense complex matrix with row-major storage and dimensions fixed at
/// construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![C64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, C64::ONE);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds a matrix from nested row slices; all rows must share a length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        assert!(!rows.is_empty(), "matrix needs at least one row");
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, C64::new(d, 0.0));
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "add: dimension mismatch"
        );
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "sub: dimension mismatch"
        );
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        let data = self.data.iter().map(|a| a * s).collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul: dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == C64::ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn conjugate(&self) -> Self {
        let data = self.data.iter().map(|a| a.conj()).collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn trace(&self) -> C64 {
        assert_eq!(self.rows, self.cols, "trace: matrix not square");
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "diff: dimension mismatch"
        );
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// max|A - A^H|; zero for exactly Hermitian matrices.
    pub fn hermiticity_error(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "hermiticity: matrix not square");
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.rows == self.cols && self.hermiticity_error() <= tol
    }

    /// (A + A^H)/2 — removes round-off asymmetry before eigensolving.
    pub fn hermitized(&self) -> Self {
        self.add(&self.adjoint()).scale_re(0.5)
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl std::ops::Mul<&ComplexMatrix> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Tensor product with block layout `a[i][j] * b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (m, n) = (a.rows(), a.cols());
    let (p, q) = (b.rows(), b.cols());
    let mut out = ComplexMatrix::zeros(m * p, n * q);
    for i in 0..m {
        for j in 0..n {
            let aij = a.get(i, j);
            if aij == C64::ZERO {
                continue;
            }
            for k in 0..p {
                for l in 0..q {
                    out.set(i * p + k, j * q + l, aij * b.get(k, l));
                }
            }
        }
    }
    out
}

/// Eigendecomposition of a Hermitian matrix: `values` descending,
/// `vectors` holding the matching orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Cyclic complex Jacobi diagonalization. Rejects inputs whose
/// hermiticity error exceeds [`HERMITIAN_TOL`].
pub fn hermitian_eig(h: &ComplexMatrix) -> Result<Eigensystem, QmathError> {
    if h.rows() != h.cols() {
        return Err(QmathError::DimensionMismatch {
            context: format!(
                "eigendecomposition needs a square matrix, got {}x{}",
                h.rows(),
                h.cols()
            ),
        });
    }
    let deviation = h.hermiticity_error();
    if deviation > HERMITIAN_TOL {
        return Err(QmathError::NotHermitian { deviation });
    }
    let n = h.rows();
    let mut a = h.hermitized();
    let mut v = ComplexMatrix::identity(n);
    let thresh = 1e-15 * a.max_abs().max(1.0);

    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let m = apq.norm();
                if m <= thresh {
                    continue;
                }
                rotated = true;
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let theta = 0.5 * (2.0 * m).atan2(app - aqq);
                let (s, c) = theta.sin_cos();
                let phase = apq / m;
                // A <- G^H A G with the rotation confined to the (p, q) plane.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp * c + akq * (phase.conj() * s));
                    a.set(k, q, akq * c - akp * (phase * s));
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, apk * c + aqk * (phase * s));
                    a.set(q, k, aqk * c - apk * (phase.conj() * s));
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp * c + vkq * (phase.conj() * s));
                    v.set(k, q, vkq * c - vkp * (phase * s));
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).expect("eigenvalue is NaN"));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok(Eigensystem { values, vectors })
}

/// Principal square root of a Hermitian positive semidefinite matrix.
/// Eigenvalues within [`PSD_CLIP`] of zero are clipped; anything more
/// negative is rejected.
pub fn psd_sqrt(rho: &ComplexMatrix) -> Result<ComplexMatrix, QmathError> {
    let eig = hermitian_eig(rho)?;
    let min_eigenvalue = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eigenvalue < -PSD_CLIP {
        return Err(QmathError::NotPositiveSemidefinite { min_eigenvalue });
    }
    let n = rho.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &lambda) in eig.values.iter().enumerate() {
        let root = lambda.max(0.0).sqrt();
        if root == 0.0 {
            continue;
        }
        for i in 0..n {
            let vi = eig.vectors.get(i, k);
            for j in 0..n {
                let v = out.get(i, j) + vi * eig.vectors.get(j, k).conj() * root;
                out.set(i, j, v);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Pauli basis
// ---------------------------------------------------------------------------

pub fn identity2() -> ComplexMatrix {
    ComplexMatrix::identity(2)
}

pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[vec![C64::ZERO, C64::ONE], vec![C64::ONE, C64::ZERO]])
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[vec![C64::ZERO, -C64::I], vec![C64::I, C64::ZERO]])
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[vec![C64::ONE, C64::ZERO], vec![C64::ZERO, -C64::ONE]])
}

/// The fixed ordered single-qubit operator basis {I, sigma_x, sigma_y, sigma_z}.
#[derive(Clone, Debug)]
pub struct PauliBasis {
    mats: [ComplexMatrix; 4],
}

impl PauliBasis {
    pub fn new() -> Self {
        Self {
            mats: [identity2(), sigma_x(), sigma_y(), sigma_z()],
        }
    }

    /// Basis element by zero-based index; 0 is the identity.
    pub fn get(&self, i: usize) -> &ComplexMatrix {
        &self.mats[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ComplexMatrix> {
        self.mats.iter()
    }
}

impl Default for PauliBasis {
    fn default() -> Self {
        Self::new()
    }
}

// ---------------------------------------------------------------------------
// State vectors
// ---------------------------------------------------------------------------

/// Hermitian inner product `<a|b>` (conjugate-linear in the first slot).
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    assert_eq!(a.len(), b.len(), "inner: length mismatch");
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Projector `|v><v|`.
pub fn outer(v: &[C64]) -> ComplexMatrix {
    let n = v.len();
    ComplexMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj())
}

pub fn matvec(m: &ComplexMatrix, v: &[C64]) -> Vec<C64> {
    assert_eq!(m.cols(), v.len(), "matvec: dimension mismatch");
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j) * v[j]).sum())
        .collect()
}

/// Binary entropy in bits with the 0*log2(0) = 0 continuity convention.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

// ---------------------------------------------------------------------------
// Bloch vectors
// ---------------------------------------------------------------------------

/// Unit vector on the Bloch sphere; doubles as an analyzer axis. The
/// components are kept private so every value is unit length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    x: f64,
    y: f64,
    z: f64,
}

impl BlochVector {
    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, QmathError> {
        let norm = (x * x + y * y + z * z).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(QmathError::NotUnitVector { norm });
        }
        Ok(Self { x, y, z })
    }

    /// Rescales an arbitrary nonzero vector onto the sphere.
    pub fn normalized(x: f64, y: f64, z: f64) -> Option<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if norm < 1e-14 {
            return None;
        }
        Some(Self {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    pub fn x_axis() -> Self {
        Self {
            x: 1.0,
            y: 0.0,
            z: 0.0,
        }
    }

    pub fn y_axis() -> Self {
        Self {
            x: 0.0,
            y: 1.0,
            z: 0.0,
        }
    }

    pub fn z_axis() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            z: 1.0,
        }
    }

    /// `n . sigma`.
    pub fn operator(&self) -> ComplexMatrix {
        let sx = sigma_x().scale_re(self.x);
        let sy = sigma_y().scale_re(self.y);
        let sz = sigma_z().scale_re(self.z);
        sx.add(&sy).add(&sz)
    }

    /// Projectors onto the +1 / -1 eigenspaces of `n . sigma`.
    pub fn projectors(&self) -> (ComplexMatrix, ComplexMatrix) {
        let op = self.operator();
        let id = identity2();
        let plus = id.add(&op).scale_re(0.5);
        let minus = id.sub(&op).scale_re(0.5);
        (plus, minus)
    }
}

// ---------------------------------------------------------------------------
// JSON mirror types (row-major {re, im} pairs)
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<ComplexJson>,
}

impl From<&ComplexMatrix> for MatrixJson {
    fn from(m: &ComplexMatrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            data: m
                .data()
                .iter()
                .map(|c| ComplexJson { re: c.re, im: c.im })
                .collect(),
        }
    }
}

impl TryFrom<&MatrixJson> for ComplexMatrix {
    type Error = QmathError;

    fn try_from(j: &MatrixJson) -> Result<Self, QmathError> {
        if j.data.len() != j.rows * j.cols || j.rows == 0 || j.cols == 0 {
            return Err(QmathError::DimensionMismatch {
                context: format!(
                    "matrix JSON claims {}x{} but carries {} entries",
                    j.rows,
                    j.cols,
                    j.data.len()
                ),
            });
        }
        let data = j.data.iter().map(|c| C64::new(c.re, c.im)).collect();
        Ok(ComplexMatrix {
            rows: j.rows,
            cols: j.cols,
            data,
        })
    }
}
