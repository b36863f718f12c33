//! Dense complex linear algebra for one- and two-qubit systems.
//!
//! Matrices are small (at most 4x4), so everything is stored row-major in a
//! flat `Vec<Complex64>` and multiplied naively. Global phase is never
//! stripped from stored matrices; the fidelity measures are phase-blind.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;
use std::ops::{Index, IndexMut, Mul};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Hermiticity tolerance accepted by [`matexp_hermitian`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Normalization tolerance for [`StateVector`].
pub const NORM_TOL: f64 = 1e-12;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionError(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::DimensionError("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real-valued rows. Panics on ragged input; meant
    /// for literal constants.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows
            .iter()
            .flat_map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)))
            .collect();
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn diag(entries: &[Complex64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionError(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        self.matmul_into(other, &mut out);
        Ok(out)
    }

    /// `out = self * other` without shape checks or allocation.
    pub(crate) fn matmul_into(&self, other: &Self, out: &mut Self) {
        debug_assert_eq!(self.cols, other.rows);
        debug_assert_eq!((out.rows, out.cols), (self.rows, other.cols));
        let n = other.cols;
        for r in 0..self.rows {
            for c in 0..n {
                let mut acc = ZERO;
                for k in 0..self.cols {
                    acc += self.data[r * self.cols + k] * other.data[k * n + c];
                }
                out.data[r * n + c] = acc;
            }
        }
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if self.cols != v.dim() || self.rows != v.dim() {
            return Err(Error::DimensionError(format!(
                "{}x{} operator applied to a {}-dimensional state",
                self.rows,
                self.cols,
                v.dim()
            )));
        }
        Ok(StateVector {
            amplitudes: self.apply_raw(v.amplitudes()),
        })
    }

    pub(crate) fn apply_raw(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Largest entry-wise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |A - B|` entry-wise.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    /// `max |H - H^dagger|` entry-wise; `None` for non-square input.
    pub fn hermiticity_deviation(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let mut dev: f64 = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                dev = dev.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        Some(dev)
    }

    /// `max |U^dagger U - I|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let prod = self.dagger().matmul(self).expect("square by construction");
        prod.max_abs_diff(&Self::identity(self.cols))
            .expect("same shape")
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionError(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    /// Panics on incompatible shapes; use [`ComplexMatrix::matmul`] for a
    /// checked product.
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("incompatible matrix shapes")
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Normalized pure state of one or two qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::DimensionError(format!(
                "state dimension {dim} is not a power of two"
            )));
        }
        let s = Self { amplitudes };
        let n = s.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NormalizationError(n));
        }
        Ok(s)
    }

    /// Computational basis state `|index>` in dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(dim.is_power_of_two() && index < dim);
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionError(format!(
                "inner product of {}- and {}-dimensional states",
                self.dim(),
                other.dim()
            )));
        }
        Ok(inner_raw(&self.amplitudes, &other.amplitudes))
    }

    /// Kronecker product `|self> (x) |other>`.
    pub fn tensor(&self, other: &Self) -> Self {
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        Self { amplitudes }
    }
}

pub(crate) fn inner_raw(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi sweeps.
///
/// Returns real eigenvalues and the unitary whose columns are the matching
/// eigenvectors.
pub fn hermitian_eigen(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let dev = h
        .hermiticity_deviation()
        .ok_or_else(|| Error::DimensionError("eigendecomposition needs a square matrix".into()))?;
    if dev >= HERMITIAN_TOL {
        return Err(Error::HermiticityViolation { deviation: dev });
    }
    let n = h.rows();
    let mut a = h.clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);

    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)].norm_sqr())
            .sum();
        if off.sqrt() <= 1e-16 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                // Phase-rotate so the (p, q) entry is real, then apply a real
                // Jacobi rotation to annihilate it.
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                let mut g = ComplexMatrix::identity(n);
                g[(p, p)] = Complex64::new(c, 0.0);
                g[(p, q)] = Complex64::new(s, 0.0);
                g[(q, p)] = -phase.conj() * s;
                g[(q, q)] = phase.conj() * c;

                a = &(&g.dagger() * &a) * &g;
                // Restore exact Hermitian structure lost to rounding.
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                v = &v * &g;
            }
        }
    }
    let eigenvalues = (0..n).map(|i| a[(i, i)].re).collect();
    Ok((eigenvalues, v))
}

/// `exp(-i * scale * H)` for Hermitian `H` of dimension 2 or 4.
pub fn matexp_hermitian(h: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
    if !h.is_square() || !matches!(h.rows(), 2 | 4) {
        return Err(Error::DimensionError(format!(
            "matrix exponential supports 2x2 and 4x4, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let (eigenvalues, v) = hermitian_eigen(h)?;
    let phases: Vec<Complex64> = eigenvalues
        .iter()
        .map(|&lambda| Complex64::from_polar(1.0, -scale * lambda))
        .collect();
    let d = ComplexMatrix::diag(&phases);
    Ok(&(&v * &d) * &v.dagger())
}

/// Kronecker product `A (x) B`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows() * b.rows();
    let cols = a.cols() * b.cols();
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ar in 0..a.rows() {
        for ac in 0..a.cols() {
            let x = a[(ar, ac)];
            for br in 0..b.rows() {
                for bc in 0..b.cols() {
                    out[(ar * b.rows() + br, ac * b.cols() + bc)] = x * b[(br, bc)];
                }
            }
        }
    }
    out
}

/// `|Tr(Uf^dagger UT) / 2^d|^2`.
pub fn gate_fidelity(uf: &ComplexMatrix, ut: &ComplexMatrix, qubits: u32) -> Result<f64> {
    let dim = 1usize << qubits;
    for m in [uf, ut] {
        if m.rows() != dim || m.cols() != dim {
            return Err(Error::DimensionError(format!(
                "expected {dim}x{dim} for {qubits} qubit(s), got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
    }
    Ok(trace_overlap(uf, ut))
}

/// `|Tr(A^dagger B)|^2 / dim^2` with no shape checking.
pub(crate) fn trace_overlap(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let tr: Complex64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x.conj() * y)
        .sum();
    (tr / a.rows() as f64).norm_sqr()
}

/// `|<psi_f|psi_T>|^2`.
pub fn state_fidelity(psi_f: &StateVector, psi_t: &StateVector) -> Result<f64> {
    Ok(psi_f.inner(psi_t)?.norm_sqr())
}

pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[&[ZERO, -I], &[I, ZERO]])
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
}

/// Rotation about x: `exp(-i theta X / 2)`.
pub fn rx(theta: f64) -> ComplexMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    ComplexMatrix::from_rows(&[
        &[Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
        &[Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
    ])
}

/// Rotation about y: `exp(-i theta Y / 2)`.
pub fn ry(theta: f64) -> ComplexMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    ComplexMatrix::from_real_rows(&[&[c, -s], &[s, c]])
}

/// Standard gates. `SDagger` is the conjugate transpose of `S`; a sequence
/// written with a trailing `S^t` means `S^dagger`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H,
    T,
    S,
    SDagger,
    Z,
    X,
    I,
    Cnot,
    Phase(f64),
}

impl Gate {
    pub fn matrix(self) -> ComplexMatrix {
        match self {
            Gate::H => ComplexMatrix::from_real_rows(&[
                &[FRAC_1_SQRT_2, FRAC_1_SQRT_2],
                &[FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
            ]),
            Gate::T => ComplexMatrix::diag(&[ONE, Complex64::from_polar(1.0, FRAC_PI_4)]),
            Gate::S => ComplexMatrix::diag(&[ONE, I]),
            Gate::SDagger => ComplexMatrix::diag(&[ONE, -I]),
            Gate::Z => sigma_z(),
            Gate::X => sigma_x(),
            Gate::I => ComplexMatrix::identity(2),
            Gate::Cnot => ComplexMatrix::from_real_rows(&[
                &[1.0, 0.0, 0.0, 0.0],
                &[0.0, 1.0, 0.0, 0.0],
                &[0.0, 0.0, 0.0, 1.0],
                &[0.0, 0.0, 1.0, 0.0],
            ]),
            Gate::Phase(theta) => ComplexMatrix::diag(&[ONE, Complex64::from_polar(1.0, theta)]),
        }
    }

    pub fn qubits(self) -> u32 {
        match self {
            Gate::Cnot => 2,
            _ => 1,
        }
    }
}

impl FromStr for Gate {
    type Err = Error;

    /// Accepts `H, T, S, S_dagger (Sdg, S^t), Z, X, I, CNOT, Phase(theta)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let gate = match t.to_ascii_lowercase().as_str() {
            "h" => Gate::H,
            "t" => Gate::T,
            "s" => Gate::S,
            "s_dagger" | "sdg" | "sdagger" | "s^t" | "s^dagger" => Gate::SDagger,
            "z" => Gate::Z,
            "x" => Gate::X,
            "i" | "id" => Gate::I,
            "cnot" | "cx" => Gate::Cnot,
            lower => {
                let arg = lower
                    .strip_prefix("phase(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::UnknownGate(t.to_string()))?;
                let theta = arg
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::UnknownGate(t.to_string()))?;
                Gate::Phase(theta)
            }
        };
        Ok(gate)
    }
}

/// Looks up a gate by name, see [`Gate::from_str`].
pub fn standard_gate(name: &str) -> Result<ComplexMatrix> {
    Ok(name.parse::<Gate>()?.matrix())
}

/// Operator of a gate sequence written in circuit order (first gate acts
/// first), i.e. `[A, B, C]` yields `C * B * A`.
pub fn circuit_operator(gates: &[Gate]) -> Result<ComplexMatrix> {
    let first = gates
        .first()
        .ok_or(Error::EmptySetError("gate sequence"))?;
    let mut acc = ComplexMatrix::identity(1 << first.qubits());
    for g in gates {
        acc = g.matrix().matmul(&acc)?;
    }
    Ok(acc)
}
