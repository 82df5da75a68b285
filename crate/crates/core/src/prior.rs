//! Joint log-prior: Minnesota-type Gaussian prior on the VAR coefficients,
//! a flat (improper limit) prior on `vec(B⁻¹)`, a uniform prior on each `λ`
//! and normal priors on `log p` and `log q`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::StructuralModel;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinnesotaConfig {
    /// Overall tightness.
    pub kappa1: f64,
    /// Cross-variable tightness.
    pub kappa2: f64,
    /// Lag decay.
    pub kappa3: f64,
    /// Intercept looseness.
    pub kappa4: f64,
    /// Residual standard errors `s_i` of univariate AR(p) fits.
    pub sigma_ar: Vec<f64>,
}

impl MinnesotaConfig {
    pub fn new(sigma_ar: Vec<f64>) -> Self {
        MinnesotaConfig {
            kappa1: 0.2,
            kappa2: 1.0,
            kappa3: 1.0,
            kappa4: 10_000.0,
            sigma_ar,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, k) in [
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("kappa3", self.kappa3),
            ("kappa4", self.kappa4),
        ] {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {k} must be positive")));
            }
        }
        if let Some(s) = self.sigma_ar.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "AR standard error {s} must be positive"
            )));
        }
        Ok(())
    }

    /// Estimate `s_i` for every column of `data`.
    pub fn from_data(data: &DMatrix<f64>, p: usize) -> Result<Self> {
        let sigma = (0..data.ncols())
            .map(|j| ar_sigma(data.column(j).as_slice(), p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(sigma))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapePriorConfig {
    pub logp_mean: f64,
    pub logp_sd: f64,
    pub logq_mean: f64,
    pub logq_sd: f64,
}

impl Default for ShapePriorConfig {
    fn default() -> Self {
        ShapePriorConfig {
            logp_mean: std::f64::consts::LN_2,
            logp_sd: 0.5,
            logq_mean: 0.0,
            logq_sd: 1.5,
        }
    }
}

impl ShapePriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.logp_sd > 0.0 && self.logq_sd > 0.0) {
            return Err(Error::InvalidParameter(
                "shape prior standard deviations must be positive".into(),
            ));
        }
        if !(self.logp_mean.is_finite() && self.logq_mean.is_finite()) {
            return Err(Error::InvalidParameter("shape prior means must be finite".into()));
        }
        Ok(())
    }
}

/// Residual standard error of an OLS AR(p) with intercept.
pub fn ar_sigma(series: &[f64], p: usize) -> Result<f64> {
    let t = series.len();
    if p == 0 || t <= p + 2 {
        return Err(Error::Degenerate(format!(
            "{t} observations are too few for an AR({p})"
        )));
    }
    let rows = t - p;
    let k = p + 1;
    if rows <= k {
        return Err(Error::Degenerate(format!("{rows} usable rows for {k} regressors")));
    }
    let x = DMatrix::from_fn(rows, k, |r, c| if c == 0 { 1.0 } else { series[p + r - c] });
    let y = DVector::from_column_slice(&series[p..]);
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-10 * scale.max(1.0)) {
        return Err(Error::Degenerate("AR regressor matrix is rank deficient".into()));
    }
    let beta = r
        .solve_upper_triangular(&(qr.q().transpose() * &y))
        .ok_or_else(|| Error::Degenerate("AR regressor matrix is rank deficient".into()))?;
    let resid = &y - &x * beta;
    let s = (resid.norm_squared() / (rows - k) as f64).sqrt();
    let mean = y.mean();
    let spread = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64).sqrt();
    if !(s > 1e-10 * spread.max(f64::MIN_POSITIVE)) {
        return Err(Error::Degenerate(format!(
            "AR({p}) fits the series exactly (residual standard error {s:e})"
        )));
    }
    Ok(s)
}

/// Prior mean and variance of every element of `π` (see
/// [`VarParams::to_vec`](crate::var::VarParams::to_vec) for the layout).
///
/// The mean puts `A_1 = I` and zeros elsewhere. For equation `i`, variable
/// `j`, lag `l`: own lags get `(κ₁ / l^κ₃)²`, cross lags
/// `(κ₁ κ₂ s_i / (l^κ₃ s_j))²`, the intercept `(s_i κ₄)²`.
pub fn minnesota_moments(config: &MinnesotaConfig, n: usize, p: usize) -> (Vec<f64>, Vec<f64>) {
    let k = 1 + n * p;
    let mut mean = vec![0.0; k * n];
    let mut var = vec![0.0; k * n];
    let s = &config.sigma_ar;
    for i in 0..n {
        let base = i * k;
        var[base] = (s[i] * config.kappa4).powi(2);
        for l in 1..=p {
            let decay = (l as f64).powf(config.kappa3);
            for j in 0..n {
                let idx = base + 1 + (l - 1) * n + j;
                if i == j {
                    var[idx] = (config.kappa1 / decay).powi(2);
                    if l == 1 {
                        mean[idx] = 1.0;
                    }
                } else {
                    var[idx] = (config.kappa1 * config.kappa2 * s[i] / (decay * s[j])).powi(2);
                }
            }
        }
    }
    (mean, var)
}

/// Fully specified prior for a VAR(p) in `n` variables.
#[derive(Clone, Debug)]
pub struct Prior {
    pub minnesota: MinnesotaConfig,
    pub shape: ShapePriorConfig,
    pi_mean: Vec<f64>,
    pi_var: Vec<f64>,
    pi_log_norm: f64,
}

impl Prior {
    pub fn new(minnesota: MinnesotaConfig, shape: ShapePriorConfig, p: usize) -> Result<Self> {
        minnesota.validate()?;
        shape.validate()?;
        let n = minnesota.sigma_ar.len();
        let (pi_mean, pi_var) = minnesota_moments(&minnesota, n, p);
        let pi_log_norm = pi_var.iter().map(|v| -0.5 * (LN_2PI + v.ln())).sum();
        Ok(Prior {
            minnesota,
            shape,
            pi_mean,
            pi_var,
            pi_log_norm,
        })
    }

    pub fn n(&self) -> usize {
        self.minnesota.sigma_ar.len()
    }

    pub fn pi_mean(&self) -> &[f64] {
        &self.pi_mean
    }

    pub fn pi_var(&self) -> &[f64] {
        &self.pi_var
    }

    /// Gaussian log-density of the coefficient vector.
    pub fn log_prior_pi(&self, pi: &[f64]) -> f64 {
        let quad: f64 = pi
            .iter()
            .zip(&self.pi_mean)
            .zip(&self.pi_var)
            .map(|((x, m), v)| (x - m) * (x - m) / v)
            .sum();
        self.pi_log_norm - 0.5 * quad
    }

    /// Shape block, as a density over `(λ, log p, log q)`. Zero for `λ`
    /// inside the admissible set; `-∞` for any inadmissible shape.
    pub fn log_prior_shapes(&self, shapes: &[crate::sgt::SgtParams]) -> f64 {
        let c = &self.shape;
        let mut total = 0.0;
        for s in shapes {
            if !s.is_admissible() {
                return f64::NEG_INFINITY;
            }
            total += normal_logpdf(s.p.ln(), c.logp_mean, c.logp_sd)
                + normal_logpdf(s.q.ln(), c.logq_mean, c.logq_sd);
        }
        total
    }

    /// Log prior of a structural model. The `vec(B⁻¹)` block contributes
    /// zero (the limit of an infinitely diffuse Gaussian).
    pub fn log_prior(&self, model: &StructuralModel) -> f64 {
        let shapes = self.log_prior_shapes(&model.shapes);
        if shapes == f64::NEG_INFINITY {
            return shapes;
        }
        self.log_prior_pi(&model.var.to_vec()) + shapes
    }
}

pub(crate) fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * (LN_2PI + z * z) - sd.ln()
}

pub fn log_prior(model: &StructuralModel, prior: &Prior) -> f64 {
    prior.log_prior(model)
}
