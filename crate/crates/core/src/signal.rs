//! Dense complex signals, k-sparse test signals and the small set of vector
//! helpers shared by the other modules.
//!
//! Indices in every public signature are 1-based; storage is a plain
//! zero-based `Vec`.

use std::collections::BTreeSet;
use std::ops::Index;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};

/// A finite, non-empty vector of complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal(Vec<Complex64>);

impl ComplexSignal {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("signal must have at least one entry");
        }
        if let Some(pos) = values.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid(format!("signal entry {} is not finite", pos + 1));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); len])
    }

    /// Canonical basis vector `e_index` (1-based) of length `len`.
    pub fn basis(len: usize, index: usize) -> Result<Self> {
        if index == 0 || index > len {
            return invalid(format!("basis index {index} outside 1..={len}"));
        }
        let mut v = vec![Complex64::new(0.0, 0.0); len];
        v[index - 1] = Complex64::new(1.0, 0.0);
        Ok(Self(v))
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&r| Complex64::new(r, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entry at 1-based position `index`.
    pub fn get(&self, index: usize) -> Option<Complex64> {
        index.checked_sub(1).and_then(|i| self.0.get(i).copied())
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn l1_norm(&self) -> f64 {
        l1_norm(&self.0)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self(self.0.iter().map(|&z| z * c).collect())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.iter().map(|z| z.conj()).collect())
    }

    /// Entrywise product `self ⊙ other`.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return invalid(format!(
                "pointwise product of lengths {} and {}",
                self.len(),
                other.len()
            ));
        }
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect()))
    }

    /// `⟨self, other⟩ = Σ self[n]·conj(other[n])`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.len() != other.len() {
            return invalid(format!(
                "inner product of lengths {} and {}",
                self.len(),
                other.len()
            ));
        }
        Ok(inner(&self.0, &other.0))
    }

    /// Support as 1-based indices of the nonzero entries.
    pub fn support(&self) -> BTreeSet<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, z)| **z != Complex64::new(0.0, 0.0))
            .map(|(i, _)| i + 1)
            .collect()
    }
}

impl Index<usize> for ComplexSignal {
    type Output = Complex64;

    /// Zero-based indexing for internal arithmetic.
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl AsRef<[Complex64]> for ComplexSignal {
    fn as_ref(&self) -> &[Complex64] {
        &self.0
    }
}

/// How the first entry of a random test signal is drawn.
///
/// The recovery model needs `x[1] != 0`, so the experiment harness always
/// uses one of the forcing variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FirstEntry {
    /// Index 1 is treated like any other index.
    #[default]
    Free,
    /// Index 1 is forced into the support with a complex Gaussian value.
    Gaussian,
    /// Index 1 is forced into the support with `|x[1]| = 1` and uniform phase.
    UnitModulus,
}

/// A k-sparse signal together with its support.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    signal: ComplexSignal,
    support: BTreeSet<usize>,
    sparsity: usize,
}

impl SparseSignal {
    pub fn new(signal: ComplexSignal, sparsity: usize) -> Result<Self> {
        let support = signal.support();
        if sparsity == 0 {
            return invalid("sparsity must be positive");
        }
        if support.len() > sparsity {
            return invalid(format!(
                "signal has {} nonzeros, more than k = {sparsity}",
                support.len()
            ));
        }
        Ok(Self {
            signal,
            support,
            sparsity,
        })
    }

    pub fn signal(&self) -> &ComplexSignal {
        &self.signal
    }

    pub fn into_signal(self) -> ComplexSignal {
        self.signal
    }

    pub fn support(&self) -> &BTreeSet<usize> {
        &self.support
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }
}

/// One draw of a circularly-symmetric complex Gaussian with `E|z|^2 = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Draws a k-sparse signal of length `n` with a uniformly random support and
/// i.i.d. unit-variance complex Gaussian nonzeros.
///
/// The support is drawn first (ascending order), then the values in support
/// order, so the output is a deterministic function of the generator state.
pub fn random_sparse_signal<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    rng: &mut R,
    first: FirstEntry,
) -> Result<SparseSignal> {
    if n == 0 {
        return invalid("signal length must be positive");
    }
    if k == 0 || k > n {
        return invalid(format!("sparsity k = {k} must lie in 1..={n}"));
    }
    let mut support: Vec<usize> = match first {
        FirstEntry::Free => sample(rng, n, k).into_iter().collect(),
        FirstEntry::Gaussian | FirstEntry::UnitModulus => {
            let mut s: Vec<usize> = sample(rng, n - 1, k - 1).into_iter().map(|i| i + 1).collect();
            s.push(0);
            s
        }
    };
    support.sort_unstable();

    let mut values = vec![Complex64::new(0.0, 0.0); n];
    for &i in &support {
        let mut z = complex_gaussian(rng, 1.0);
        if i == 0 && first == FirstEntry::UnitModulus {
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            z = Complex64::from_polar(1.0, phase);
        }
        values[i] = z;
    }
    SparseSignal::new(ComplexSignal::new(values)?, k)
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub(crate) fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub(crate) fn norm(a: &[Complex64]) -> f64 {
    norm_sqr(a).sqrt()
}

pub(crate) fn l1_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm()).sum()
}

pub(crate) fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
