//! Linear sensing operators used by the sparse solver: the partial unitary
//! DFT and dense Gaussian/Bernoulli matrices.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use crate::dft::{DftOperator, SamplingSet};
use crate::error::{invalid, CprError, Result};
use crate::signal::complex_gaussian;

/// A linear map `C^cols -> C^rows` given only by its forward and adjoint
/// actions.
pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn forward(&self, x: &[Complex64]) -> Vec<Complex64>;
    fn adjoint(&self, v: &[Complex64]) -> Vec<Complex64>;

    /// True when `A A* = I`, which makes projections onto `{z : Az = y}`
    /// closed-form.
    fn has_orthonormal_rows(&self) -> bool {
        false
    }
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return invalid(format!(
                "dense matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// 1-based entry access.
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[(row - 1) * self.cols + (col - 1)]
    }

    fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

impl LinearOperator for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn forward(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * vi;
            }
        }
        out
    }
}

impl LinearOperator for DftOperator {
    fn rows(&self) -> usize {
        self.output_len()
    }

    fn cols(&self) -> usize {
        self.dimension()
    }

    fn forward(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.apply(x)
    }

    fn adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.apply_adjoint(v)
    }

    fn has_orthonormal_rows(&self) -> bool {
        true
    }
}

/// Which sensing path produced (or will consume) a measurement set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensingMode {
    Fourier,
    Gaussian,
    Bernoulli,
}

impl SensingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SensingMode::Fourier => "fourier",
            SensingMode::Gaussian => "gaussian",
            SensingMode::Bernoulli => "bernoulli",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            SensingMode::Fourier => 0,
            SensingMode::Gaussian => 1,
            SensingMode::Bernoulli => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(SensingMode::Fourier),
            1 => Ok(SensingMode::Gaussian),
            2 => Ok(SensingMode::Bernoulli),
            _ => Err(CprError::Format(format!("unknown mode code {code}"))),
        }
    }
}

impl fmt::Display for SensingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensingMode {
    type Err = CprError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fourier" => Ok(SensingMode::Fourier),
            "gaussian" => Ok(SensingMode::Gaussian),
            "bernoulli" => Ok(SensingMode::Bernoulli),
            other => invalid(format!("unknown sensing mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Fourier(DftOperator),
    Dense(DenseMatrix),
}

/// The stage-2 operator `A`: a partial unitary DFT `F_𝓛` (Fourier mode) or a
/// dense random matrix (Gaussian/Bernoulli modes).
#[derive(Debug, Clone)]
pub struct SensingOperator {
    mode: SensingMode,
    kind: Kind,
}

impl SensingOperator {
    pub fn fourier(n: usize, rows: SamplingSet) -> Result<Self> {
        Ok(Self {
            mode: SensingMode::Fourier,
            kind: Kind::Fourier(DftOperator::partial(n, rows)?),
        })
    }

    /// `rows x n` matrix with i.i.d. circular complex Gaussian entries of
    /// variance `1/rows`, drawn in row-major order.
    pub fn gaussian<R: Rng + ?Sized>(rows: usize, n: usize, rng: &mut R) -> Result<Self> {
        if rows == 0 {
            return invalid("operator needs at least one row");
        }
        let var = 1.0 / rows as f64;
        let data = (0..rows * n).map(|_| complex_gaussian(rng, var)).collect();
        Ok(Self {
            mode: SensingMode::Gaussian,
            kind: Kind::Dense(DenseMatrix::new(rows, n, data)?),
        })
    }

    /// `rows x n` real matrix with entries `±1/sqrt(rows)`, equiprobable,
    /// drawn in row-major order.
    pub fn bernoulli<R: Rng + ?Sized>(rows: usize, n: usize, rng: &mut R) -> Result<Self> {
        if rows == 0 {
            return invalid("operator needs at least one row");
        }
        let amp = 1.0 / (rows as f64).sqrt();
        let data = (0..rows * n)
            .map(|_| Complex64::new(if rng.random::<bool>() { amp } else { -amp }, 0.0))
            .collect();
        Ok(Self {
            mode: SensingMode::Bernoulli,
            kind: Kind::Dense(DenseMatrix::new(rows, n, data)?),
        })
    }

    pub fn dense(mode: SensingMode, matrix: DenseMatrix) -> Result<Self> {
        if mode == SensingMode::Fourier {
            return invalid("a dense matrix cannot carry the fourier mode");
        }
        Ok(Self {
            mode,
            kind: Kind::Dense(matrix),
        })
    }

    pub fn mode(&self) -> SensingMode {
        self.mode
    }

    pub fn sampling_set(&self) -> Option<&SamplingSet> {
        match &self.kind {
            Kind::Fourier(op) => op.rows(),
            Kind::Dense(_) => None,
        }
    }

    pub fn dft(&self) -> Option<&DftOperator> {
        match &self.kind {
            Kind::Fourier(op) => Some(op),
            Kind::Dense(_) => None,
        }
    }

    pub fn matrix(&self) -> Option<&DenseMatrix> {
        match &self.kind {
            Kind::Fourier(_) => None,
            Kind::Dense(m) => Some(m),
        }
    }

    fn inner(&self) -> &dyn LinearOperator {
        match &self.kind {
            Kind::Fourier(op) => op,
            Kind::Dense(m) => m,
        }
    }
}

impl LinearOperator for SensingOperator {
    fn rows(&self) -> usize {
        self.inner().rows()
    }

    fn cols(&self) -> usize {
        self.inner().cols()
    }

    fn forward(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.inner().forward(x)
    }

    fn adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.inner().adjoint(v)
    }

    fn has_orthonormal_rows(&self) -> bool {
        self.inner().has_orthonormal_rows()
    }
}

/// `[e_1^T; A]`: prepends a row reading off the first signal entry.
pub struct WithFirstEntryRow<'a> {
    base: &'a dyn LinearOperator,
}

impl<'a> WithFirstEntryRow<'a> {
    pub fn new(base: &'a dyn LinearOperator) -> Self {
        Self { base }
    }
}

impl LinearOperator for WithFirstEntryRow<'_> {
    fn rows(&self) -> usize {
        self.base.rows() + 1
    }

    fn cols(&self) -> usize {
        self.base.cols()
    }

    fn forward(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows());
        out.push(x[0]);
        out.extend(self.base.forward(x));
        out
    }

    fn adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.base.adjoint(&v[1..]);
        out[0] += v[0];
        out
    }
}
