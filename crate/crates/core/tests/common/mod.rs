//! Independent oracles shared by the integration and acceptance tests. Each
//! is written from the defining formula with plain loops and does not call
//! into the library's own numerical code.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sgtvar::data::Period;
use sgtvar::posterior::StructuralModel;
use sgtvar::sgt::SgtParams;
use sgtvar::var::{Dataset, VarParams};
use statrs::function::gamma::ln_gamma;

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `∫ f` over the real line via `x = center + scale·tan θ`, split at
/// `center` and integrated with tanh-sinh on each half.
pub fn real_line<F: Fn(f64) -> f64>(f: F, center: f64, scale: f64, tol: f64) -> f64 {
    let g = |t: f64| {
        let c = t.cos();
        if c <= 0.0 {
            return 0.0;
        }
        let v = f(center + scale * t.tan()) * scale / (c * c);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let left = quadrature::double_exponential::integrate(&g, -FRAC_PI_2, 0.0, tol).integral;
    let right = quadrature::double_exponential::integrate(&g, 0.0, FRAC_PI_2, tol).integral;
    left + right
}

/// Mean shift `m = 2 λ q^{1/p} B(2/p, q - 1/p) / B(1/p, q)` with unit scale.
pub fn sgt_shift(lambda: f64, p: f64, q: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    2.0 * lambda * q.powf(1.0 / p) * (ln_beta(2.0 / p, q - 1.0 / p) - ln_beta(1.0 / p, q)).exp()
}

/// Unit-scale sgt density evaluated at `x + shift`.
pub fn sgt_pdf_at(y: f64, lambda: f64, p: f64, q: f64) -> f64 {
    let norm = p / (2.0 * q.powf(1.0 / p) * ln_beta(1.0 / p, q).exp());
    let side = 1.0 + lambda * y.signum();
    norm * (1.0 + y.abs().powf(p) / (q * side.powf(p))).powf(-(1.0 / p + q))
}

/// Zero-mean sgt density.
pub fn sgt_pdf(x: f64, lambda: f64, p: f64, q: f64) -> f64 {
    sgt_pdf_at(x + sgt_shift(lambda, p, q), lambda, p, q)
}

pub fn sgt_log_pdf(x: f64, lambda: f64, p: f64, q: f64) -> f64 {
    let m = sgt_shift(lambda, p, q);
    let y = x + m;
    let side = 1.0 + lambda * y.signum();
    (p / 2.0).ln() - q.ln() / p - ln_beta(1.0 / p, q)
        - (1.0 / p + q) * (1.0 + y.abs().powf(p) / (q * side.powf(p))).ln()
}

/// Row-by-row structural log-likelihood. `y` is `T × n`; `intercept` and
/// `lags[l][i][j]` give the reduced form; `b_inv` is `n × n`; shapes are
/// `(λ, p, q)` per shock.
pub fn naive_log_likelihood(
    y: &DMatrix<f64>,
    intercept: &[f64],
    lags: &[DMatrix<f64>],
    b_inv: &DMatrix<f64>,
    shapes: &[(f64, f64, f64)],
) -> f64 {
    let n = y.ncols();
    let p = lags.len();
    let t_total = y.nrows();
    let det = b_inv.clone().determinant();
    let mut total = (t_total - p) as f64 * det.abs().ln();
    for t in p..t_total {
        let mut u = vec![0.0; n];
        for i in 0..n {
            let mut fitted = intercept[i];
            for (l, a) in lags.iter().enumerate() {
                for j in 0..n {
                    fitted += a[(i, j)] * y[(t - l - 1, j)];
                }
            }
            u[i] = y[(t, i)] - fitted;
        }
        for k in 0..n {
            let mut e = 0.0;
            for i in 0..n {
                e += b_inv[(k, i)] * u[i];
            }
            let (lambda, pp, qq) = shapes[k];
            total += sgt_log_pdf(e, lambda, pp, qq);
        }
    }
    total
}

fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * (2.0 * std::f64::consts::PI).ln() - sd.ln() - 0.5 * z * z
}

/// Minnesota (default hyperparameters) plus shape log-prior, written from
/// the prior's definition with explicit loops.
pub fn naive_log_prior(
    intercept: &[f64],
    lags: &[DMatrix<f64>],
    sigma_ar: &[f64],
    shapes: &[(f64, f64, f64)],
) -> f64 {
    let (k1, k2, k3, k4) = (0.2, 1.0, 1.0, 10_000.0);
    let n = intercept.len();
    let mut total = 0.0;
    for i in 0..n {
        total += normal_logpdf(intercept[i], 0.0, sigma_ar[i] * k4);
        for (l0, a) in lags.iter().enumerate() {
            let l = (l0 + 1) as f64;
            for j in 0..n {
                let (mean, sd) = if i == j {
                    (if l0 == 0 { 1.0 } else { 0.0 }, k1 / l.powf(k3))
                } else {
                    (0.0, k1 * k2 * sigma_ar[i] / (l.powf(k3) * sigma_ar[j]))
                };
                total += normal_logpdf(a[(i, j)], mean, sd);
            }
        }
    }
    for &(lambda, p, q) in shapes {
        if lambda.abs() > 0.99 || !(0.1..=20.0).contains(&p) || !(0.1..=200.0).contains(&q) || p * q <= 1.0 {
            return f64::NEG_INFINITY;
        }
        total += normal_logpdf(p.ln(), 2f64.ln(), 0.5) + normal_logpdf(q.ln(), 0.0, 1.5);
    }
    total
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// Exhaustive search over all `n! 2ⁿ` signed column permutations of `b`:
/// among candidates with a positive diagonal, the one maximizing
/// `Σ log|diag|`.
pub fn brute_force_normalize(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for perm in permutations(n) {
        for mask in 0..(1u32 << n) {
            let signs: Vec<f64> = (0..n)
                .map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            let cand = DMatrix::from_fn(n, n, |i, j| signs[j] * b[(i, perm[j])]);
            if (0..n).any(|j| cand[(j, j)] <= 0.0) {
                continue;
            }
            let score: f64 = (0..n).map(|j| cand[(j, j)].ln()).sum();
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, cand));
            }
        }
    }
    best.expect("a nonsingular matrix has a permutation with nonzero diagonal").1
}

/// Stationary covariance of a VAR(1): solves `Γ = A Γ A' + Σ` by iteration.
pub fn var1_covariance(a: &DMatrix<f64>, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let mut gamma = sigma.clone();
    let mut term = sigma.clone();
    for _ in 0..2000 {
        term = a * term * a.transpose();
        gamma += &term;
        if term.amax() < 1e-15 {
            break;
        }
    }
    gamma
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Random admissible model with Gaussian data of `t` rows.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, p: usize, t: usize) -> (StructuralModel, Dataset) {
    let intercept = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let lags = (0..p).map(|_| random_matrix(rng, n, 0.2)).collect();
    let b_inv = DMatrix::identity(n, n) + random_matrix(rng, n, 0.3);
    let shapes = (0..n)
        .map(|_| loop {
            let s = SgtParams {
                lambda: rng.random_range(-0.9..0.9),
                p: rng.random_range(1.0..4.0),
                q: rng.random_range(0.6..8.0),
            };
            if s.is_admissible() {
                break s;
            }
        })
        .collect();
    let values = DMatrix::from_fn(t, n, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
    let index = std::iter::successors(Some(Period::month(2000, 1)), |p| Some(p.succ()))
        .take(t)
        .collect();
    let names = (1..=n).map(|i| format!("v{i}")).collect();
    (
        StructuralModel {
            var: VarParams::new(intercept, lags).unwrap(),
            b_inv,
            shapes,
        },
        Dataset::new(values, names, index).unwrap(),
    )
}
