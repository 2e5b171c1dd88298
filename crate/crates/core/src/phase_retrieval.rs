//! Stage 1: closed-form recovery of the lifted vector from four-mask
//! intensities.
//!
//! For one sample `l`, write `p = y[1]`, `q = y[l+1]`, `z = p·conj(q)`,
//! `u = |p|²` and `v = |q|²`. With `α|β| = 1/√6` the four intensities expand
//! to
//!
//! ```text
//! b1 = α²u + |β|²v + 2α Re(β z)      b3 = α²u + |β|²v − 2α Re(β z)
//! b2 = |β|²u + α²v + 2α Re(β̄ z)      b4 = |β|²u + α²v − 2α Re(β̄ z)
//! ```
//!
//! so the sums give a 2x2 system for `(u, v)` (determinant `α⁴ − |β|⁴ =
//! −1/√3`) and the differences give
//!
//! ```text
//! Re z = −√3 (b1 − b3 + b2 − b4) / 4
//! Im z = −√3 (b1 − b3 − b2 + b4) / 4
//! ```
//!
//! The output fixes the global phase by making `y[1]` real and nonnegative,
//! then `y[l+1] = conj(z_l) / y[1]`. Work is linear in `L`.

use num_complex::Complex64;

use crate::error::{invalid, CprError, Result};
use crate::measurement::{measure_vectors, IntensityMeasurements, MaskConstants};
use crate::signal::ComplexSignal;

/// The four intensities that couple `y[1]` and `y[l+1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMeasurementBlock {
    pub l: usize,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
}

impl PairMeasurementBlock {
    /// Blocks for `l = 1..L` in order.
    pub fn all(b: &IntensityMeasurements) -> impl Iterator<Item = PairMeasurementBlock> + '_ {
        (1..=b.l()).map(move |l| PairMeasurementBlock {
            l,
            b1: b.get(1, l),
            b2: b.get(2, l),
            b3: b.get(3, l),
            b4: b.get(4, l),
        })
    }

    /// `(u, v)` from the sums, before any bias correction.
    fn magnitudes(&self, k: &MaskConstants) -> (f64, f64) {
        let a2 = k.alpha * k.alpha;
        let c2 = k.beta.norm_sqr();
        let det = a2 * a2 - c2 * c2;
        let s1 = 0.5 * (self.b1 + self.b3);
        let s2 = 0.5 * (self.b2 + self.b4);
        ((a2 * s1 - c2 * s2) / det, (a2 * s2 - c2 * s1) / det)
    }

    /// `z = y[1]·conj(y[l+1])` from the differences.
    fn cross_term(&self) -> Complex64 {
        let w = -(3f64.sqrt()) / 4.0;
        let d13 = self.b1 - self.b3;
        let d24 = self.b2 - self.b4;
        Complex64::new(w * (d13 + d24), w * (d13 - d24))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalOptions {
    /// `|y[1]|²` estimates below `vanish_tolerance · mean(b)` are rejected.
    pub vanish_tolerance: f64,
    /// Rescale each `y[l+1]` to the magnitude `sqrt(max(v_l, 0))` from the
    /// sum equations instead of `|z_l| / y[1]`.
    pub renormalize: bool,
    /// Subtract the known noise variance from the magnitude estimates
    /// (each intensity carries a `+σ²` bias from `|ν|²`).
    pub debias: bool,
}

impl Default for RetrievalOptions {
    fn default() -> Self {
        Self {
            vanish_tolerance: 1e-12,
            renormalize: false,
            debias: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRetrievalResult {
    /// Recovered lifted vector with `y_tilde[1]` real and nonnegative.
    pub y_tilde: ComplexSignal,
    pub first_entry_magnitude: f64,
    /// `‖b − |⟨ỹ, ψ⟩|²‖ / ‖b‖`.
    pub residual: f64,
    /// Set when a magnitude estimate went negative beyond tolerance and was
    /// clamped to zero.
    pub clamped: bool,
}

pub fn recover_phases(
    b: &IntensityMeasurements,
    opts: &RetrievalOptions,
) -> Result<PhaseRetrievalResult> {
    if !(opts.vanish_tolerance.is_finite() && opts.vanish_tolerance >= 0.0) {
        return invalid("vanish tolerance must be finite and nonnegative");
    }
    let k = MaskConstants::new();
    let l_count = b.l();
    let bias = if opts.debias { b.noise_variance } else { 0.0 };
    let scale_tol = opts.vanish_tolerance * b.mean();

    let mut u_sum = 0.0;
    let mut v = Vec::with_capacity(l_count);
    let mut z = Vec::with_capacity(l_count);
    for block in PairMeasurementBlock::all(b) {
        let (ul, vl) = block.magnitudes(&k);
        u_sum += ul - bias;
        v.push(vl - bias);
        z.push(block.cross_term());
    }
    let u = u_sum / l_count as f64;
    if u <= scale_tol || u <= 0.0 {
        return Err(CprError::FirstEntryVanishes {
            estimate: u,
            threshold: scale_tol,
        });
    }
    let first = u.sqrt();

    let mut clamped = false;
    let mut y = Vec::with_capacity(l_count + 1);
    y.push(Complex64::new(first, 0.0));
    for (zl, vl) in z.iter().zip(&v) {
        if *vl < -scale_tol {
            clamped = true;
        }
        let mut q = zl.conj() / first;
        if opts.renormalize {
            let target = vl.max(0.0).sqrt();
            let mag = q.norm();
            q = if mag > 0.0 { q * (target / mag) } else { q };
        }
        y.push(q);
    }
    let y_tilde = ComplexSignal::new(y)?;

    let remeasured = measure_vectors(&y_tilde)?;
    let num: f64 = b
        .values()
        .iter()
        .zip(remeasured.values())
        .map(|(p, q)| (p - q) * (p - q))
        .sum();
    let den: f64 = b.values().iter().map(|p| p * p).sum();
    let residual = if den > 0.0 { (num / den).sqrt() } else { 0.0 };

    Ok(PhaseRetrievalResult {
        y_tilde,
        first_entry_magnitude: first,
        residual,
        clamped,
    })
}

/// Splits `ỹ` into `√N·ỹ[1]` (the candidate `x[1]`) and the sampled spectrum
/// `ỹ[2..]`.
pub fn split_result(r: &PhaseRetrievalResult, n: usize) -> (Complex64, ComplexSignal) {
    let y = r.y_tilde.as_slice();
    let x1 = y[0] * (n as f64).sqrt();
    // L >= 1 is guaranteed by IntensityMeasurements.
    let rest = ComplexSignal::new(y[1..].to_vec()).expect("lifted vector has length >= 2");
    (x1, rest)
}

/// Linearised second-order statistics of the error in `ỹ[2..]` under complex
/// field noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage1Noise {
    /// `E‖δỹ[2..]‖²`.
    pub mean_sq: f64,
    /// `Var ‖δỹ[2..]‖²`.
    pub var_sq: f64,
    /// Variance of the candidate `√N·ỹ[1]` per unit `N`, i.e. `Var(√ū)`.
    pub first_entry_var: f64,
}

/// Each intensity error `δb_s ≈ 2 Re(conj(f_s)ν_s) + |ν_s|² − σ²` has variance
/// `V_s = 2σ²|f_s|² + σ⁴`, with `|f_s|²` taken from re-measuring the
/// recovered vector. Since `Re δz = w(δ₁₃ + δ₂₄)` and `Im δz = w(δ₁₃ − δ₂₄)`
/// with `w = −√3/4`, the error of `ỹ[l+1] = conj(z_l)/√u` is a non-circular
/// Gaussian with covariance eigenvalues `w²(ΣV ± |V₁ + V₃ − V₂ − V₄|)/u`.
/// The shared estimate of `u` adds a fully correlated real scalar error
/// contributing `T = Σ v_l · Var(ū) / (4u²)` with variance `2T²`.
pub fn stage1_noise(r: &PhaseRetrievalResult, noise_variance: f64) -> Stage1Noise {
    if noise_variance <= 0.0 {
        return Stage1Noise {
            mean_sq: 0.0,
            var_sq: 0.0,
            first_entry_var: 0.0,
        };
    }
    let k = MaskConstants::new();
    let a2 = k.alpha * k.alpha;
    let c2 = k.beta.norm_sqr();
    let s2 = noise_variance;
    let y = r.y_tilde.as_slice();
    let u = y[0].norm_sqr();
    let l = (y.len() - 1) as f64;
    let w2 = 3.0 / 16.0;
    let fields = measure_vectors(&r.y_tilde).expect("lifted vector has length >= 2");

    let mut mean = 0.0;
    let mut var = 0.0;
    let mut u_var = 0.0;
    let mut v_total = 0.0;
    for (i, q) in y[1..].iter().enumerate() {
        let vs: [f64; 4] = std::array::from_fn(|s| 2.0 * s2 * fields.get(s + 1, i + 1) + s2 * s2);
        let total = vs.iter().sum::<f64>();
        let skew = (vs[0] + vs[2] - vs[1] - vs[3]).abs();
        let hi = w2 * (total + skew) / u;
        let lo = w2 * (total - skew) / u;
        mean += hi + lo;
        var += 2.0 * (hi * hi + lo * lo);
        let v = q.norm_sqr();
        u_var += 3.0 * s2 * (a2 * a2 * (a2 * u + c2 * v) + c2 * c2 * (c2 * u + a2 * v))
            + 1.5 * (a2 * a2 + c2 * c2) * s2 * s2;
        v_total += v;
    }
    let u_var = u_var / (l * l);
    let shared = v_total * u_var / (4.0 * u * u);
    Stage1Noise {
        mean_sq: mean + shared,
        var_sq: var + 2.0 * shared * shared,
        first_entry_var: u_var / (4.0 * u),
    }
}
