//! Test-only reference implementations, independent of the library solver.
#![allow(dead_code)]

use cpr_core::{Complex64, ComplexSignal, LinearOperator};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Dense copy of an operator, one column per basis vector.
pub fn dense_columns(op: &dyn LinearOperator) -> DMatrix<Complex64> {
    let (m, n) = (op.rows(), op.cols());
    let mut a = DMatrix::zeros(m, n);
    let mut e = vec![c(0.0, 0.0); n];
    for j in 0..n {
        e[j] = c(1.0, 0.0);
        for (i, v) in op.forward(&e).into_iter().enumerate() {
            a[(i, j)] = v;
        }
        e[j] = c(0.0, 0.0);
    }
    a
}

/// All size-`k` subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub struct OracleSolution {
    pub support: Vec<usize>,
    pub values: Vec<Complex64>,
    /// Exactly one support of minimal size fits, with full column rank.
    pub unique: bool,
}

/// Exhaustive minimum-ℓ₀ search: for sizes `0..=max_k`, least-squares fit on
/// every support and keep those that reproduce `y` to `rel_tol·‖y‖`.
pub fn l0_oracle(a: &DMatrix<Complex64>, y: &[Complex64], max_k: usize, rel_tol: f64) -> Option<OracleSolution> {
    let n = a.ncols();
    let yv = DVector::from_column_slice(y);
    let tol = rel_tol * yv.norm();
    if yv.norm() == 0.0 {
        return Some(OracleSolution { support: vec![], values: vec![], unique: true });
    }
    for k in 1..=max_k {
        let mut fits = Vec::new();
        for s in subsets(n, k) {
            let sub = a.select_columns(&s);
            let svd = sub.clone().svd(true, true);
            let rank = svd.rank(1e-10 * svd.singular_values[0]);
            let coef = svd.solve(&yv, 1e-12).expect("svd has both factors");
            if (&sub * &coef - &yv).norm() <= tol {
                fits.push((s, coef.iter().copied().collect::<Vec<_>>(), rank == k));
            }
        }
        if !fits.is_empty() {
            let unique = fits.len() == 1 && fits[0].2;
            let (support, values, _) = fits.swap_remove(0);
            return Some(OracleSolution { support, values, unique });
        }
    }
    None
}

pub fn embed(n: usize, sol: &OracleSolution) -> Vec<Complex64> {
    let mut x = vec![c(0.0, 0.0); n];
    for (&i, &v) in sol.support.iter().zip(&sol.values) {
        x[i] = v;
    }
    x
}

pub fn random_vector<R: Rng>(rng: &mut R, len: usize) -> ComplexSignal {
    ComplexSignal::new((0..len).map(|_| cpr_core::signal::complex_gaussian(rng, 1.0)).collect()).unwrap()
}

pub fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt()
}

pub fn nrm(a: &[Complex64]) -> f64 {
    a.iter().map(|p| p.norm_sqr()).sum::<f64>().sqrt()
}

/// `min_c ‖a − c·b‖ / ‖a‖` over unimodular `c`, computed by brute force on a
/// grid refined around the best point.
pub fn phase_free_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let err = |t: f64| dist(a, &b.iter().map(|v| v * Complex64::from_polar(1.0, t)).collect::<Vec<_>>());
    let mut best = (0.0, f64::INFINITY);
    for i in 0..720 {
        let t = i as f64 * std::f64::consts::TAU / 720.0;
        let e = err(t);
        if e < best.1 {
            best = (t, e);
        }
    }
    // Golden-section refinement in the winning bracket.
    let (mut lo, mut hi) = (best.0 - 0.01, best.0 + 0.01);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if err(m1) < err(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    err((lo + hi) / 2.0) / nrm(a)
}
