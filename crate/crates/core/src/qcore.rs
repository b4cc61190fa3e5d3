//! Dense complex linear algebra for three qubits.
//!
//! Basis states are indexed `|abc⟩ ↦ 4a + 2b + c`, so Alice owns the most
//! significant bit and Charlie the least significant one.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

/// Default absolute tolerance for elementwise matrix comparisons.
pub const MATRIX_TOL: f64 = 1e-12;

/// Tolerance used by the Hermiticity, PSD and trace checks on states.
pub const STATE_TOL: f64 = 1e-10;

/// Dimension of the three-qubit Hilbert space.
pub const DIM: usize = 8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major dense square matrix over `Complex64`.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from a row-major buffer of length `dim * dim`.
    pub fn from_vec(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<const N: usize>(rows: [[Complex64; N]; N]) -> Self {
        Self {
            dim: N,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    /// Outer product `|v⟩⟨v|`.
    pub fn outer(v: &[Complex64]) -> Self {
        let dim = v.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let n = self.dim * rhs.dim;
        let mut out = Self::zeros(n);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..rhs.dim {
                    for l in 0..rhs.dim {
                        out[(i * rhs.dim + k, j * rhs.dim + l)] = a * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Largest elementwise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, rhs: &Self, tol: f64) -> bool {
        self.dim == rhs.dim && self.max_abs_diff(rhs) <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Eigenvalues of the Hermitian part of the matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let n = self.dim;
        let h = DMatrix::from_fn(n, n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// One of the three parties, each holding one qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Alice = 0,
    Bob = 1,
    Charlie = 2,
}

impl Site {
    pub const ALL: [Site; 3] = [Site::Alice, Site::Bob, Site::Charlie];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("site index {i} not in 0..3")))
    }

    /// Bit position of this qubit in a basis-state index.
    pub(crate) fn bit(self) -> usize {
        2 - self.index()
    }
}

/// Result of a dichotomic measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    /// `+1 ↦ 0`, `-1 ↦ 1`.
    pub fn bit(self) -> usize {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }

    pub fn from_bit(bit: usize) -> Self {
        if bit & 1 == 0 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

impl TryFrom<i32> for Outcome {
    type Error = Error;
    fn try_from(v: i32) -> Result<Self> {
        match v {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(Error::InvalidOutcome(other)),
        }
    }
}

/// Direction `ξ` on the Bloch sphere given by polar angle `theta` and azimuth `phi`.
///
/// The azimuth is stored normalized into `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    theta: f64,
    phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidDirection(format!(
                "non-finite angle (theta={theta}, phi={phi})"
            )));
        }
        if !(-MATRIX_TOL..=PI + MATRIX_TOL).contains(&theta) {
            return Err(Error::InvalidDirection(format!(
                "theta={theta} outside [0, pi]"
            )));
        }
        Ok(Self {
            theta: theta.clamp(0.0, PI),
            phi: normalize_azimuth(phi),
        })
    }

    /// Direction in the X-Y plane.
    pub fn equatorial(phi: f64) -> Result<Self> {
        Self::new(PI / 2.0, phi)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn bloch(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// Wraps an azimuth into `[0, 2π)`.
pub fn normalize_azimuth(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_rows([[ZERO, ONE], [ONE, ZERO]])
}

pub fn pauli_y() -> CMatrix {
    let i = Complex64::i();
    CMatrix::from_rows([[ZERO, -i], [i, ZERO]])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_rows([[ONE, ZERO], [ZERO, -ONE]])
}

/// The observable `ξ·σ` for a Bloch direction.
pub fn pauli_observable(dir: &Direction) -> CMatrix {
    let [x, y, z] = dir.bloch();
    CMatrix::from_rows([
        [Complex64::new(z, 0.0), Complex64::new(x, -y)],
        [Complex64::new(x, y), Complex64::new(-z, 0.0)],
    ])
}

/// Eigenprojector `(I + a ξ·σ) / 2`.
pub fn projector(dir: &Direction, outcome: Outcome) -> CMatrix {
    let obs = pauli_observable(dir).scale_re(outcome.sign());
    (&CMatrix::identity(2) + &obs).scale_re(0.5)
}

/// Places a single-qubit operator on `site`, identities elsewhere.
pub fn embed(op: &CMatrix, site: Site) -> Result<CMatrix> {
    if op.dim() != 2 {
        return Err(Error::Dimension {
            expected: 4,
            found: op.dim() * op.dim(),
        });
    }
    let id = CMatrix::identity(2);
    let factors: [&CMatrix; 3] = match site {
        Site::Alice => [op, &id, &id],
        Site::Bob => [&id, op, &id],
        Site::Charlie => [&id, &id, op],
    };
    Ok(factors[0].kron(factors[1]).kron(factors[2]))
}

/// `(O ⊗ I ⊗ I) ρ (O ⊗ I ⊗ I)†` for a 2×2 `op` acting on `site`, without forming
/// the 8×8 embedding.
pub(crate) fn conjugate_on_site(rho: &CMatrix, op: &[[Complex64; 2]; 2], site: Site) -> CMatrix {
    debug_assert_eq!(rho.dim(), DIM);
    let mask = 1usize << site.bit();
    let shift = site.bit();
    // left = O_site · ρ
    let mut left = CMatrix::zeros(DIM);
    for i in 0..DIM {
        let bi = (i >> shift) & 1;
        let i0 = i & !mask;
        let i1 = i | mask;
        let (w0, w1) = (op[bi][0], op[bi][1]);
        for j in 0..DIM {
            left.data[i * DIM + j] = w0 * rho.data[i0 * DIM + j] + w1 * rho.data[i1 * DIM + j];
        }
    }
    // out = left · O_site†
    let mut out = CMatrix::zeros(DIM);
    for j in 0..DIM {
        let bj = (j >> shift) & 1;
        let j0 = j & !mask;
        let j1 = j | mask;
        let (w0, w1) = (op[bj][0].conj(), op[bj][1].conj());
        for i in 0..DIM {
            out.data[i * DIM + j] = left.data[i * DIM + j0] * w0 + left.data[i * DIM + j1] * w1;
        }
    }
    out
}

/// `Tr[(O ⊗ I ⊗ I) ρ]` for a 2×2 `op` acting on `site`.
pub(crate) fn site_expectation(rho: &CMatrix, op: &[[Complex64; 2]; 2], site: Site) -> f64 {
    let mask = 1usize << site.bit();
    let shift = site.bit();
    let mut acc = ZERO;
    for i in 0..DIM {
        let bi = (i >> shift) & 1;
        acc += op[bi][0] * rho.data[(i & !mask) * DIM + i] + op[bi][1] * rho.data[(i | mask) * DIM + i];
    }
    acc.re
}

pub(crate) fn to_array2(m: &CMatrix) -> [[Complex64; 2]; 2] {
    debug_assert_eq!(m.dim(), 2);
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

/// A three-qubit density operator.
///
/// Intermediate states of the measurement pipeline are left unnormalized;
/// their trace is the probability of the outcomes recorded so far.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
    normalized: bool,
}

impl DensityOperator {
    /// Validates Hermiticity, positivity and trace of an 8×8 matrix.
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        if matrix.dim() != DIM {
            return Err(Error::Dimension {
                expected: DIM * DIM,
                found: matrix.dim() * matrix.dim(),
            });
        }
        let herm = matrix.max_abs_diff(&matrix.adjoint());
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (max |M - M†| = {herm:e})"
            )));
        }
        let tr = matrix.trace();
        if tr.im.abs() > STATE_TOL || tr.re <= 0.0 || tr.re > 1.0 + STATE_TOL {
            return Err(Error::InvalidState(format!(
                "trace {:.12} + {:.3e}i outside (0, 1]",
                tr.re, tr.im
            )));
        }
        let min_ev = matrix.hermitian_eigenvalues()[0];
        if min_ev < -STATE_TOL {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (min eigenvalue {min_ev:e})"
            )));
        }
        let normalized = (tr.re - 1.0).abs() <= STATE_TOL;
        Ok(Self { matrix, normalized })
    }

    /// Pure state `|ψ⟩⟨ψ|`.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        if amplitudes.len() != DIM {
            return Err(Error::Dimension {
                expected: DIM,
                found: amplitudes.len(),
            });
        }
        Self::from_matrix(CMatrix::outer(amplitudes))
    }

    /// `I / 8`.
    pub fn maximally_mixed() -> Self {
        Self {
            matrix: CMatrix::identity(DIM).scale_re(1.0 / DIM as f64),
            normalized: true,
        }
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(index: usize) -> Result<Self> {
        if index >= DIM {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} not in 0..{DIM}"
            )));
        }
        let mut m = CMatrix::zeros(DIM);
        m[(index, index)] = ONE;
        Ok(Self {
            matrix: m,
            normalized: true,
        })
    }

    /// Wraps the output of a trace-non-increasing map on a valid state.
    pub(crate) fn unnormalized(matrix: CMatrix) -> Self {
        Self {
            matrix,
            normalized: false,
        }
    }

    #[cfg(test)]
    pub(crate) fn assume_valid(matrix: CMatrix) -> Self {
        Self {
            matrix,
            normalized: true,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix.hermitian_eigenvalues()[0]
    }

    /// Re-checks Hermiticity, PSD and the trace bound; `Ok` for zero-trace
    /// states, which arise from projecting onto an orthogonal subspace.
    pub fn check_invariants(&self) -> Result<()> {
        let herm = self.matrix.max_abs_diff(&self.matrix.adjoint());
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian ({herm:e})")));
        }
        let tr = self.matrix.trace();
        if tr.im.abs() > STATE_TOL || tr.re < -STATE_TOL || tr.re > 1.0 + STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} out of range")));
        }
        let min_ev = self.min_eigenvalue();
        if min_ev < -STATE_TOL {
            return Err(Error::InvalidState(format!("min eigenvalue {min_ev:e}")));
        }
        Ok(())
    }

    /// Fidelity `Tr(ρσ)`, valid when one of the two states is pure.
    pub fn overlap(&self, other: &Self) -> f64 {
        (&self.matrix * &other.matrix).trace().re
    }
}

/// The GHZ state `(|000⟩ + |111⟩) / √2`.
pub fn ghz() -> DensityOperator {
    let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut v = [ZERO; DIM];
    v[0] = amp;
    v[DIM - 1] = amp;
    DensityOperator {
        matrix: CMatrix::outer(&v),
        normalized: true,
    }
}
