//! Unitary DFT, full and row-restricted.
//!
//! `[F]_{m,n} = N^{-1/2} exp(-i 2π (m-1)(n-1) / N)`. Transforms run through
//! `rustfft` for every length; the planner picks radix kernels for powers of
//! two and Bluestein/Rader otherwise.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::signal::ComplexSignal;

/// A sorted set of distinct 1-based frequency indices `𝓛 ⊆ {1..N}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SamplingSet {
    indices: Vec<usize>,
}

impl SamplingSet {
    /// Builds the set from 1-based indices, sorting them. Duplicates or
    /// indices outside `1..=n` are rejected.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return invalid("sampling set must be non-empty");
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return invalid("sampling set contains duplicate indices");
        }
        if indices[0] == 0 || *indices.last().unwrap() > n {
            return invalid(format!("sampling set is not a subset of 1..={n}"));
        }
        Ok(Self { indices })
    }

    /// `{1..=l}`.
    pub fn first(l: usize, n: usize) -> Result<Self> {
        Self::new((1..=l).collect(), n)
    }

    /// Uniform draw of `l` distinct indices from `1..=n`, returned sorted.
    pub fn random<R: Rng + ?Sized>(n: usize, l: usize, rng: &mut R) -> Result<Self> {
        if l == 0 || l > n {
            return invalid(format!("cannot draw {l} sampling points from 1..={n}"));
        }
        let picked = sample(rng, n, l).into_iter().map(|i| i + 1).collect();
        Self::new(picked, n)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// 1-based indices in ascending order.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub(crate) fn zero_based(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().map(|i| i - 1)
    }
}

impl fmt::Display for SamplingSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Unitary DFT of size `N`, optionally restricted to the rows in a sampling
/// set. Immutable once built and cheap to clone; safe to share across threads.
#[derive(Clone)]
pub struct DftOperator {
    n: usize,
    rows: Option<SamplingSet>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for DftOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DftOperator")
            .field("n", &self.n)
            .field("rows", &self.rows)
            .finish()
    }
}

impl DftOperator {
    pub fn full(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("DFT dimension must be positive");
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            rows: None,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        })
    }

    pub fn partial(n: usize, rows: SamplingSet) -> Result<Self> {
        if rows.indices().last().copied().unwrap_or(0) > n {
            return invalid(format!("sampling set is not a subset of 1..={n}"));
        }
        let mut op = Self::full(n)?;
        op.rows = Some(rows);
        Ok(op)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Option<&SamplingSet> {
        self.rows.as_ref()
    }

    /// Number of output entries: `L` for a partial operator, `N` otherwise.
    pub fn output_len(&self) -> usize {
        self.rows.as_ref().map_or(self.n, SamplingSet::len)
    }

    /// Full unitary transform of a raw slice of length `N`.
    pub(crate) fn transform_full(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.to_vec();
        self.forward.process(&mut buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
        buf
    }

    pub(crate) fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let full = self.transform_full(x);
        match &self.rows {
            None => full,
            Some(rows) => rows.zero_based().map(|i| full[i]).collect(),
        }
    }

    pub(crate) fn apply_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut buf = match &self.rows {
            None => v.to_vec(),
            Some(rows) => {
                let mut b = vec![Complex64::new(0.0, 0.0); self.n];
                for (i, &val) in rows.zero_based().zip(v) {
                    b[i] = val;
                }
                b
            }
        };
        self.inverse.process(&mut buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
        buf
    }
}

/// `F x`, or `F_𝓛 x` when the operator carries a sampling set.
pub fn dft_forward(x: &ComplexSignal, op: &DftOperator) -> Result<ComplexSignal> {
    if x.len() != op.n {
        return invalid(format!(
            "signal length {} does not match DFT dimension {}",
            x.len(),
            op.n
        ));
    }
    ComplexSignal::new(op.apply(x.as_slice()))
}

/// `F* v`, or `F_𝓛* v` (zero-filled outside 𝓛) for a partial operator.
pub fn dft_adjoint(v: &ComplexSignal, op: &DftOperator) -> Result<ComplexSignal> {
    if v.len() != op.output_len() {
        return invalid(format!(
            "vector length {} does not match operator output length {}",
            v.len(),
            op.output_len()
        ));
    }
    ComplexSignal::new(op.apply_adjoint(v.as_slice()))
}
