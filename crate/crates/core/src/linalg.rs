//! Dense complex linear algebra for small matrices.
//!
//! Everything here works on [`ComplexMatrix`], a plain row-major buffer of
//! `Complex64`. The dimensions that show up in practice are tiny (a spin-5
//! multiplet is 11×11), so the eigensolver is a cyclic complex Jacobi method:
//! slow asymptotically, but unconditionally stable and accurate to a few ulps
//! on the orthonormality of the returned basis.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_THRESHOLD: f64 = 1e-14;
const HERMITIAN_REL_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;
const ANTIHERMITIAN_TOL: f64 = 1e-10;
const UNITARIZE_MIN_SINGULAR: f64 = 1e-12;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} entries supplied for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::from_row_major(nrows, ncols, rows.concat())
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO })
    }

    pub fn from_columns(columns: &[Vec<C64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::ShapeMismatch("ragged columns".into()));
        }
        Ok(Self::from_fn(rows, cols, |i, j| columns[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Columns `start..start + count` as a new matrix.
    pub fn column_block(&self, start: usize, count: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rows, count, |i, j| self[(i, start + j)])
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, z: C64) -> ComplexMatrix {
        ComplexMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * z).collect() }
    }

    pub fn scale_real(&self, x: f64) -> ComplexMatrix {
        self.scale(C64::new(x, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// (M + M†)/2
    pub fn hermitian_part(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// (M − M†)/2
    pub fn antihermitian_part(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] - self[(j, i)].conj()) * 0.5)
    }

    /// ‖M − M†‖_max
    pub fn hermiticity_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                r = r.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        r
    }

    /// ‖M + M†‖_max
    pub fn antihermiticity_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                r = r.max((self[(i, j)] + self[(j, i)].conj()).norm());
            }
        }
        r
    }

    /// ‖M†M − I‖_max, which for an n×K frame measures column orthonormality.
    pub fn unitarity_residual(&self) -> f64 {
        let g = &self.adjoint() * self;
        (&g - &ComplexMatrix::identity(self.cols)).max_norm()
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in max_abs_diff");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum()).collect()
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn determinant(&self) -> C64 {
        assert!(self.is_square(), "determinant of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut det = ONE;
        for col in 0..n {
            let pivot = (col..n).max_by(|&x, &y| a[(x, col)].norm().total_cmp(&a[(y, col)].norm())).unwrap();
            if a[(pivot, col)].norm() == 0.0 {
                return ZERO;
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                }
                det = -det;
            }
            let p = a[(col, col)];
            det *= p;
            for row in col + 1..n {
                let f = a[(row, col)] / p;
                for j in col..n {
                    let v = a[(col, j)];
                    a[(row, j)] -= f * v;
                }
            }
        }
        det
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape());
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape());
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// A square matrix equal to its adjoint up to `1e-12·‖M‖_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator(ComplexMatrix);

impl HermitianOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::ShapeMismatch(format!("Hermitian operator must be square, got {:?}", m.shape())));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        let residual = m.hermiticity_residual();
        if residual > HERMITIAN_REL_TOL * m.max_norm() {
            return Err(Error::NonHermitianInput { residual });
        }
        Ok(Self(m))
    }

    /// Replaces `m` by its Hermitian part. Used for operators that are
    /// Hermitian by construction but carry rounding noise (projectors, M†M).
    pub fn hermitize(m: &ComplexMatrix) -> Self {
        assert!(m.is_square());
        Self(m.hermitian_part())
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }
}

/// A square matrix with `‖U†U − I‖_max ≤ 1e-10`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix(ComplexMatrix);

impl UnitaryMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::ShapeMismatch(format!("unitary must be square, got {:?}", m.shape())));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        let residual = m.unitarity_residual();
        if residual > UNITARY_TOL {
            return Err(Error::NonUnitary { residual });
        }
        Ok(Self(m))
    }

    pub fn identity(k: usize) -> Self {
        Self(ComplexMatrix::identity(k))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn residual(&self) -> f64 {
        self.0.unitarity_residual()
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        UnitaryMatrix(self.0.adjoint())
    }
}

/// Spectral decomposition `H = V diag(values) V†` with ascending values.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Eigen {
    /// Orthogonal projector onto the span of eigenvectors `start..start + count`.
    pub fn projector(&self, start: usize, count: usize) -> ComplexMatrix {
        let v = self.vectors.column_block(start, count);
        &v * &v.adjoint()
    }
}

/// Cyclic complex Jacobi diagonalization of a Hermitian operator.
pub fn eig_hermitian(h: &HermitianOperator) -> Result<Eigen> {
    let n = h.dim();
    let mut a = h.matrix().hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.max_norm();
    if scale == 0.0 || n <= 1 {
        return Ok(Eigen { values: (0..n).map(|i| a[(i, i)].re).collect(), vectors: v });
    }
    let threshold = JACOBI_REL_THRESHOLD * scale;

    let off_diagonal_max = |a: &ComplexMatrix| {
        let mut m: f64 = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                m = m.max(a[(p, q)].norm());
            }
        }
        m
    };

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_max(&a) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let g = a[(p, q)];
                let modulus = g.norm();
                if modulus == 0.0 {
                    continue;
                }
                let phase_conj = (g / modulus).conj();
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = 0.5 * (2.0 * modulus).atan2(aqq - app);
                let (s, c) = theta.sin_cos();
                // G = diag(1, e^{-iα}) · [[c, s], [-s, c]] acting on (p, q)
                let gpp = C64::new(c, 0.0);
                let gpq = C64::new(s, 0.0);
                let gqp = phase_conj * (-s);
                let gqq = phase_conj * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * gpp + akq * gqp;
                    a[(k, q)] = akp * gpq + akq * gqq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = gpp.conj() * apk + gqp.conj() * aqk;
                    a[(q, k)] = gpq.conj() * apk + gqq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)].im = 0.0;
                a[(q, q)].im = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * gpp + vkq * gqp;
                    v[(k, q)] = vkp * gpq + vkq * gqq;
                }
            }
        }
    }
    if !converged && off_diagonal_max(&a) > threshold {
        return Err(Error::NoConvergence { sweeps: JACOBI_MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(x, x)].re.total_cmp(&a[(y, y)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(Eigen { values, vectors })
}

/// Polar factor `M (M†M)^{-1/2}` of an n×K matrix with full column rank.
///
/// Fails with `SingularInput` when the smallest singular value is at or below
/// `min_singular`.
pub fn polar_factor(m: &ComplexMatrix, min_singular: f64) -> Result<ComplexMatrix> {
    if m.cols() > m.rows() {
        return Err(Error::ShapeMismatch(format!("polar factor needs rows >= cols, got {:?}", m.shape())));
    }
    let gram = HermitianOperator::hermitize(&(&m.adjoint() * m));
    let eig = eig_hermitian(&gram)?;
    let min_sv = eig.values.first().copied().unwrap_or(0.0).max(0.0).sqrt();
    if !(min_sv > min_singular) {
        return Err(Error::SingularInput { min_singular: min_sv });
    }
    let inv_sqrt: Vec<f64> = eig.values.iter().map(|&l| 1.0 / l.sqrt()).collect();
    let v = &eig.vectors;
    let mid = ComplexMatrix::from_fn(v.rows(), v.cols(), |i, j| v[(i, j)] * inv_sqrt[j]);
    let root = &mid * &v.adjoint();
    Ok(m * &root)
}

/// Closest unitary (Frobenius norm) to a nonsingular square matrix.
pub fn unitarize(m: &ComplexMatrix) -> Result<UnitaryMatrix> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!("unitarize needs a square matrix, got {:?}", m.shape())));
    }
    polar_factor(m, UNITARIZE_MIN_SINGULAR).map(UnitaryMatrix)
}

/// `exp(A)` for anti-Hermitian `A`, through the spectrum of the Hermitian `iA`.
pub fn exp_antihermitian(a: &ComplexMatrix) -> Result<UnitaryMatrix> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch(format!("exp needs a square matrix, got {:?}", a.shape())));
    }
    let residual = a.antihermiticity_residual();
    if residual > ANTIHERMITIAN_TOL {
        return Err(Error::NonAntiHermitian { residual });
    }
    let h = HermitianOperator::hermitize(&a.scale(I));
    let eig = eig_hermitian(&h)?;
    let phases: Vec<C64> = eig.values.iter().map(|&l| C64::from_polar(1.0, -l)).collect();
    Ok(UnitaryMatrix(spectral_sum(&eig.vectors, &phases)))
}

/// Principal logarithm of a unitary, returned as an anti-Hermitian matrix.
///
/// Errors with `LogBranch` when an eigenvalue sits within 1e-8 of −1.
pub fn log_unitary(u: &UnitaryMatrix) -> Result<ComplexMatrix> {
    let m = u.matrix();
    let re_part = m.hermitian_part();
    let im_part = m.antihermitian_part().scale(-I);
    // Any generic real combination of the two commuting Hermitian parts shares
    // the unitary's eigenvectors; retry on an unlucky accidental degeneracy.
    for mix in [0.577_215_664_901_532_9, 1.379_164_2, -2.213_704_5, 0.318_903_1] {
        let h = HermitianOperator::hermitize(&(&re_part + &im_part.scale_real(mix)));
        let eig = eig_hermitian(&h)?;
        let vecs = &eig.vectors;
        let lambdas: Vec<C64> = (0..m.rows())
            .map(|j| {
                let col = vecs.column(j);
                let mv = m.matvec(&col);
                col.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum()
            })
            .collect();
        let rebuilt = spectral_sum(vecs, &lambdas);
        if rebuilt.max_abs_diff(m) > 1e-9 {
            continue;
        }
        if lambdas.iter().any(|l| (l + ONE).norm() < 1e-8) {
            return Err(Error::LogBranch);
        }
        let logs: Vec<C64> = lambdas.iter().map(|l| C64::new(0.0, l.arg())).collect();
        return Ok(spectral_sum(vecs, &logs));
    }
    Err(Error::NoConvergence { sweeps: JACOBI_MAX_SWEEPS })
}

/// Overlap matrix with entry (j, i) = ⟨b_j | a_i⟩, i.e. `B† A`.
pub fn overlap(frame_a: &ComplexMatrix, frame_b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if frame_a.shape() != frame_b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "overlap of frames with shapes {:?} and {:?}",
            frame_a.shape(),
            frame_b.shape()
        )));
    }
    Ok(&frame_b.adjoint() * frame_a)
}

/// Operator 2-norm of a Hermitian matrix (largest |eigenvalue|).
pub fn hermitian_spectral_norm(m: &ComplexMatrix) -> Result<f64> {
    let eig = eig_hermitian(&HermitianOperator::hermitize(m))?;
    Ok(eig.values.iter().map(|x| x.abs()).fold(0.0, f64::max))
}

/// `V diag(d) V†`
fn spectral_sum(v: &ComplexMatrix, d: &[C64]) -> ComplexMatrix {
    let scaled = ComplexMatrix::from_fn(v.rows(), v.cols(), |i, j| v[(i, j)] * d[j]);
    &scaled * &v.adjoint()
}
