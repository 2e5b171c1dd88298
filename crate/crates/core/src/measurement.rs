//! Coded-mask and vector measurement models.
//!
//! Both paths produce `4·L` intensities indexed by mask `s = 1..4` and sample
//! `l = 1..L`. The vector path measures `b_{s,l} = |⟨y, ψ_{s,l}⟩|²` for a
//! vector `y ∈ C^{L+1}` with
//!
//! ```text
//! ψ_{s,l} = a_s e_1 + b_s e_{l+1}
//! (a,b) = (α, β), (β, α), (α, -β), (-β, α)        for s = 1..4
//! α = sqrt((1 - 1/√3)/2),  β = exp(-i5π/4) sqrt((1 + 1/√3)/2)
//! ```
//!
//! The mask path measures `|F(x ⊙ p_s)[l]|²` with `p_s = a_s δ + b_s`.
//! Expanding the transform gives `F(x ⊙ p_s)[l] = a_s x[1]/√N + b_s (Fx)[l]`,
//! which is `⟨w, ψ_{s,l}⟩` conjugated, for the lifted vector
//! `w = conj((x[1]/√N, F_𝓛 x))`. So the mask path is the vector path applied
//! to [`mask_lift`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::dft::{DftOperator, SamplingSet};
use crate::error::{invalid, Result};
use crate::operator::{LinearOperator, SensingMode, SensingOperator};
use crate::signal::{complex_gaussian, ComplexSignal};

/// The constants `α`, `β` and the per-mask pairs `(a_s, b_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskConstants {
    pub alpha: f64,
    pub beta: Complex64,
    pub a: [Complex64; 4],
    pub b: [Complex64; 4],
}

impl MaskConstants {
    pub fn new() -> Self {
        let inv_sqrt3 = 1.0 / 3f64.sqrt();
        let alpha = ((1.0 - inv_sqrt3) / 2.0).sqrt();
        let beta = Complex64::from_polar(((1.0 + inv_sqrt3) / 2.0).sqrt(), -5.0 * PI / 4.0);
        let al = Complex64::new(alpha, 0.0);
        Self {
            alpha,
            beta,
            a: [al, beta, al, -beta],
            b: [beta, al, -beta, al],
        }
    }

    /// `(a_s, b_s)` for 1-based mask index `s`.
    pub fn pair(&self, s: usize) -> (Complex64, Complex64) {
        (self.a[s - 1], self.b[s - 1])
    }
}

impl Default for MaskConstants {
    fn default() -> Self {
        Self::new()
    }
}

/// The four transmittance vectors `p_s[n] = a_s δ[n] + b_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    constants: MaskConstants,
    masks: [ComplexSignal; 4],
}

impl MaskSet {
    pub fn constants(&self) -> &MaskConstants {
        &self.constants
    }

    /// Mask `p_s` for 1-based `s`.
    pub fn mask(&self, s: usize) -> &ComplexSignal {
        &self.masks[s - 1]
    }

    pub fn len(&self) -> usize {
        self.masks[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn build_masks(n: usize) -> Result<MaskSet> {
    if n < 2 {
        return invalid(format!("masks need N >= 2, got {n}"));
    }
    let constants = MaskConstants::new();
    let make = |s: usize| {
        let (a, b) = constants.pair(s);
        let mut p = vec![b; n];
        p[0] = a + b;
        ComplexSignal::new(p)
    };
    Ok(MaskSet {
        constants,
        masks: [make(1)?, make(2)?, make(3)?, make(4)?],
    })
}

/// Measurement vector `ψ_{s,l} ∈ C^len` (1-based `s`, `l`).
pub fn measurement_vector(s: usize, l: usize, len: usize) -> Result<ComplexSignal> {
    if !(1..=4).contains(&s) || l == 0 || l + 1 > len {
        return invalid(format!("no measurement vector (s={s}, l={l}) in C^{len}"));
    }
    let (a, b) = MaskConstants::new().pair(s);
    let mut v = vec![Complex64::new(0.0, 0.0); len];
    v[0] = a;
    v[l] = b;
    ComplexSignal::new(v)
}

/// Intensities `b_{s,l}`, `s = 1..4`, `l = 1..L`, stored row-major in `(s, l)`
/// order, plus the acquisition metadata needed to rebuild the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMeasurements {
    /// Ambient signal dimension (length of the measured vector for the pure
    /// vector path).
    pub n: usize,
    pub mode: SensingMode,
    /// Fourier sampling set; `None` for the dense modes.
    pub sampling: Option<SamplingSet>,
    /// Variance `σ²_ν` of the complex field noise (0 when noiseless).
    pub noise_variance: f64,
    /// Seed the operator (and noise) were generated from.
    pub seed: u64,
    values: Vec<f64>,
}

impl IntensityMeasurements {
    pub fn new(
        n: usize,
        mode: SensingMode,
        sampling: Option<SamplingSet>,
        noise_variance: f64,
        seed: u64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.is_empty() || !values.len().is_multiple_of(4) {
            return invalid(format!("need 4·L values with L >= 1, got {}", values.len()));
        }
        if let Some(pos) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid(format!("measurement {} is negative or not finite", pos + 1));
        }
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return invalid("noise variance must be finite and nonnegative");
        }
        let l = values.len() / 4;
        match (mode, &sampling) {
            (SensingMode::Fourier, Some(set)) => {
                if set.len() != l {
                    return invalid(format!("sampling set has {} points but L = {l}", set.len()));
                }
                if set.indices().last().copied().unwrap_or(0) > n {
                    return invalid(format!("sampling set is not a subset of 1..={n}"));
                }
            }
            (SensingMode::Fourier, None) => return invalid("fourier measurements need a sampling set"),
            (_, Some(_)) => return invalid("dense-mode measurements carry no sampling set"),
            (_, None) => {}
        }
        Ok(Self {
            n,
            mode,
            sampling,
            noise_variance,
            seed,
            values,
        })
    }

    /// Number of samples per mask.
    pub fn l(&self) -> usize {
        self.values.len() / 4
    }

    /// Total number of intensities `M = 4L`.
    pub fn count(&self) -> usize {
        self.values.len()
    }

    /// `b_{s,l}` for 1-based `s` and `l`.
    pub fn get(&self, s: usize, l: usize) -> f64 {
        self.values[(s - 1) * self.l() + (l - 1)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Noiseless fields `⟨y, ψ_{s,l}⟩`, row-major in `(s, l)`.
fn vector_fields(y: &[Complex64]) -> Vec<Complex64> {
    let c = MaskConstants::new();
    let l = y.len() - 1;
    let mut out = Vec::with_capacity(4 * l);
    for s in 1..=4 {
        let (a, b) = c.pair(s);
        out.extend(y[1..].iter().map(|&q| a.conj() * y[0] + b.conj() * q));
    }
    out
}

/// Adds i.i.d. circular noise of variance `sigma²` to each field (order
/// `s` then `l`) and returns intensities.
fn intensities<R: Rng + ?Sized>(fields: &[Complex64], rng: &mut R, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return invalid("noise level must be finite and nonnegative");
    }
    let var = sigma * sigma;
    Ok(fields
        .iter()
        .map(|&f| {
            if var > 0.0 {
                (f + complex_gaussian(rng, var)).norm_sqr()
            } else {
                f.norm_sqr()
            }
        })
        .collect())
}

/// `b_{s,l} = |⟨y, ψ_{s,l}⟩|²` for `y ∈ C^{L'}`, `l = 1..L'-1`.
pub fn measure_vectors(y: &ComplexSignal) -> Result<IntensityMeasurements> {
    if y.len() < 2 {
        return invalid(format!("vector path needs length >= 2, got {}", y.len()));
    }
    let values = vector_fields(y.as_slice()).iter().map(|f| f.norm_sqr()).collect();
    IntensityMeasurements::new(y.len(), SensingMode::Gaussian, None, 0.0, 0, values)
}

/// Vector path with complex field noise of standard deviation `sigma`.
pub fn measure_vectors_noisy<R: Rng + ?Sized>(
    y: &ComplexSignal,
    rng: &mut R,
    sigma: f64,
) -> Result<IntensityMeasurements> {
    if y.len() < 2 {
        return invalid(format!("vector path needs length >= 2, got {}", y.len()));
    }
    let values = intensities(&vector_fields(y.as_slice()), rng, sigma)?;
    IntensityMeasurements::new(y.len(), SensingMode::Gaussian, None, sigma * sigma, 0, values)
}

/// Noiseless mask-path fields `F(x ⊙ p_s)[l]`, row-major in `(s, l)`.
pub fn mask_fields(x: &ComplexSignal, masks: &MaskSet, sampling: &SamplingSet) -> Result<Vec<Complex64>> {
    let n = x.len();
    if masks.len() != n {
        return invalid(format!("mask length {} does not match signal length {n}", masks.len()));
    }
    let op = DftOperator::partial(n, sampling.clone())?;
    let mut out = Vec::with_capacity(4 * sampling.len());
    for s in 1..=4 {
        let modulated = x.hadamard(masks.mask(s))?;
        out.extend(op.apply(modulated.as_slice()));
    }
    Ok(out)
}

/// `b_{s,l} = |F(x ⊙ p_s)[l] + ν_{s,l}|²` for `l ∈ 𝓛`, with `ν` i.i.d.
/// circular complex Gaussian of variance `sigma²`.
pub fn measure_fourier<R: Rng + ?Sized>(
    x: &ComplexSignal,
    masks: &MaskSet,
    sampling: &SamplingSet,
    rng: &mut R,
    sigma: f64,
) -> Result<IntensityMeasurements> {
    let fields = mask_fields(x, masks, sampling)?;
    let values = intensities(&fields, rng, sigma)?;
    IntensityMeasurements::new(
        x.len(),
        SensingMode::Fourier,
        Some(sampling.clone()),
        sigma * sigma,
        0,
        values,
    )
}

/// Dense-mode measurements: the vector path applied to `y = A x`.
pub fn measure_dense<R: Rng + ?Sized>(
    x: &ComplexSignal,
    op: &SensingOperator,
    rng: &mut R,
    sigma: f64,
) -> Result<IntensityMeasurements> {
    if op.mode() == SensingMode::Fourier {
        return invalid("measure_dense needs a gaussian or bernoulli operator");
    }
    if x.len() != op.cols() {
        return invalid(format!("signal length {} does not match operator width {}", x.len(), op.cols()));
    }
    if op.rows() < 2 {
        return invalid("dense operator needs at least two rows");
    }
    let y = op.forward(x.as_slice());
    let values = intensities(&vector_fields(&y), rng, sigma)?;
    IntensityMeasurements::new(x.len(), op.mode(), None, sigma * sigma, 0, values)
}

/// Measures `x` through `op`, using the four masks in Fourier mode.
pub fn measure<R: Rng + ?Sized>(
    x: &ComplexSignal,
    op: &SensingOperator,
    rng: &mut R,
    sigma: f64,
) -> Result<IntensityMeasurements> {
    match op.sampling_set() {
        Some(set) => measure_fourier(x, &build_masks(x.len())?, set, rng, sigma),
        None => measure_dense(x, op, rng, sigma),
    }
}

/// The vector the mask path actually measures: `conj((x[1]/√N, F_𝓛 x))`.
pub fn mask_lift(x: &ComplexSignal, sampling: &SamplingSet) -> Result<ComplexSignal> {
    Ok(lifted_vector(x, &SensingOperator::fourier(x.len(), sampling.clone())?)?.conj())
}

/// The vector stage 1 recovers and stage 2 inverts: `(x[1]/√N, F_𝓛 x)` in
/// Fourier mode, `A x` in the dense modes.
pub fn lifted_vector(x: &ComplexSignal, op: &SensingOperator) -> Result<ComplexSignal> {
    if x.len() != op.cols() {
        return invalid(format!("signal length {} does not match operator width {}", x.len(), op.cols()));
    }
    let ax = op.forward(x.as_slice());
    if op.mode() == SensingMode::Fourier {
        let mut v = Vec::with_capacity(ax.len() + 1);
        v.push(x[0] / (x.len() as f64).sqrt());
        v.extend(ax);
        ComplexSignal::new(v)
    } else {
        ComplexSignal::new(ax)
    }
}

/// Total noiseless field energy `Σ_s Σ_l |field_{s,l}|²` of `x` under `op`.
pub fn field_energy(x: &ComplexSignal, op: &SensingOperator) -> Result<f64> {
    let fields = match op.sampling_set() {
        Some(set) => mask_fields(x, &build_masks(x.len())?, set)?,
        None => vector_fields(&lifted_vector(x, op)?.into_vec()),
    };
    Ok(fields.iter().map(|f| f.norm_sqr()).sum())
}

/// `10·log10(S / E)` with `S = Σ_s ‖F(x ⊙ p_s)‖²` over the sampled points and
/// `E = 4·L·σ²`. Returns `+∞` when `sigma_nu == 0`.
pub fn snr_db(x: &ComplexSignal, masks: &MaskSet, sampling: &SamplingSet, sigma_nu: f64) -> Result<f64> {
    if !(sigma_nu.is_finite() && sigma_nu >= 0.0) {
        return invalid("noise level must be finite and nonnegative");
    }
    let s: f64 = mask_fields(x, masks, sampling)?.iter().map(|f| f.norm_sqr()).sum();
    if sigma_nu == 0.0 {
        return Ok(f64::INFINITY);
    }
    let e = 4.0 * sampling.len() as f64 * sigma_nu * sigma_nu;
    Ok(10.0 * (s / e).log10())
}

/// Field noise standard deviation that puts `x` at `snr_db` under `op`.
pub fn sigma_for_snr(x: &ComplexSignal, op: &SensingOperator, snr_db: f64) -> Result<f64> {
    if snr_db.is_nan() {
        return invalid("SNR must not be NaN");
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    let energy = field_energy(x, op)?;
    let count = 4.0 * (lifted_vector(x, op)?.len() - 1) as f64;
    Ok((energy / (count * 10f64.powf(snr_db / 10.0))).sqrt())
}
