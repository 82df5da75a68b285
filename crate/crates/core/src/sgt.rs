//! Skewed generalized t (sgt) distribution with unit scale, shifted so that
//! every admissible member has mean zero.
//!
//! With `y = x + m` the density is
//!
//! ```text
//! f(x) = p / (2 q^(1/p) B(1/p, q)) * (1 + |y|^p / (q (1 + λ sign(y))^p))^-(1/p + q)
//! ```
//!
//! and `m = 2 λ q^(1/p) B(2/p, q - 1/p) / B(1/p, q)`. All Beta functions are
//! evaluated as log-gamma differences and the density is kept in log space.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{Error, Result};

/// Largest admissible |λ|.
pub const LAMBDA_BOUND: f64 = 0.99;
pub const P_BOUNDS: (f64, f64) = (0.1, 20.0);
pub const Q_BOUNDS: (f64, f64) = (0.1, 200.0);

/// Shape of a single structural shock. The scale is fixed at one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgtParams {
    pub lambda: f64,
    pub p: f64,
    pub q: f64,
}

impl SgtParams {
    /// Scale parameter `v`; pinned to unity so the impact matrix carries all
    /// of the scale information.
    pub const SCALE: f64 = 1.0;

    pub fn new(lambda: f64, p: f64, q: f64) -> Result<Self> {
        let params = SgtParams { lambda, p, q };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let SgtParams { lambda, p, q } = *self;
        if !(lambda.is_finite() && lambda.abs() <= LAMBDA_BOUND) {
            return Err(Error::InvalidParameter(format!(
                "lambda = {lambda} outside [-{LAMBDA_BOUND}, {LAMBDA_BOUND}]"
            )));
        }
        if !(p >= P_BOUNDS.0 && p <= P_BOUNDS.1) {
            return Err(Error::InvalidParameter(format!(
                "p = {p} outside [{}, {}]",
                P_BOUNDS.0, P_BOUNDS.1
            )));
        }
        if !(q >= Q_BOUNDS.0 && q <= Q_BOUNDS.1) {
            return Err(Error::InvalidParameter(format!(
                "q = {q} outside [{}, {}]",
                Q_BOUNDS.0, Q_BOUNDS.1
            )));
        }
        if p * q <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "p * q = {} must exceed 1 for the mean to exist",
                p * q
            )));
        }
        Ok(())
    }

    pub fn is_admissible(&self) -> bool {
        self.validate().is_ok()
    }

    /// Tail exponent `α = p q`; the shock has a finite variance iff `α > 2`.
    pub fn tail_exponent(&self) -> f64 {
        self.p * self.q
    }

    /// Location shift `m` that gives the shifted density a zero mean.
    pub fn mean_shift(&self) -> Result<f64> {
        let SgtParams { lambda, p, q } = *self;
        if !(p > 0.0 && q > 0.0) || q - 1.0 / p <= 0.0 {
            return Err(Error::Domain(format!(
                "mean of sgt(p = {p}, q = {q}) does not exist: q - 1/p <= 0"
            )));
        }
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let log_ratio = q.ln() / p + ln_beta(2.0 / p, q - 1.0 / p) - ln_beta(1.0 / p, q);
        Ok(2.0 * Self::SCALE * lambda * log_ratio.exp())
    }

    /// Same distribution mirrored about zero. Flipping the sign of a shock
    /// maps `λ` to `-λ` and leaves `p`, `q` untouched.
    pub fn mirrored(&self) -> Self {
        SgtParams {
            lambda: -self.lambda,
            ..*self
        }
    }

    pub fn density(&self) -> Result<SgtDensity> {
        SgtDensity::new(*self)
    }

    /// Convenience wrapper; build an [`SgtDensity`] once when evaluating many
    /// points with the same parameters.
    pub fn log_pdf(&self, x: f64) -> Result<f64> {
        Ok(self.density()?.log_pdf(x))
    }
}

/// Precomputed sgt density: normalizing constant, mean shift and the two
/// gamma variates used for exact sampling.
#[derive(Clone, Debug)]
pub struct SgtDensity {
    params: SgtParams,
    shift: f64,
    log_norm: f64,
    exponent: f64,
    ln_q: f64,
    ln_right: f64,
    ln_left: f64,
    numer: Gamma<f64>,
    denom: Gamma<f64>,
}

impl SgtDensity {
    /// Zero-mean density for admissible parameters.
    pub fn new(params: SgtParams) -> Result<Self> {
        params.validate()?;
        let shift = params.mean_shift()?;
        Self::with_shift(params, shift)
    }

    /// Density with `m = 0`, i.e. the mode sits at the origin. Only requires
    /// `|λ| < 1`, `p > 0`, `q > 0`, so it also covers members whose mean does
    /// not exist.
    pub fn uncentered(params: SgtParams) -> Result<Self> {
        Self::with_shift(params, 0.0)
    }

    fn with_shift(params: SgtParams, shift: f64) -> Result<Self> {
        let SgtParams { lambda, p, q } = params;
        if !(lambda.abs() < 1.0 && p > 0.0 && q > 0.0 && p.is_finite() && q.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sgt kernel needs |lambda| < 1, p > 0, q > 0; got ({lambda}, {p}, {q})"
            )));
        }
        let log_norm = p.ln()
            - std::f64::consts::LN_2
            - (Self::scale_ln() + q.ln() / p)
            - ln_beta(1.0 / p, q);
        let gamma = |shape: f64| {
            Gamma::new(shape, 1.0)
                .map_err(|e| Error::InvalidParameter(format!("gamma shape {shape}: {e}")))
        };
        Ok(SgtDensity {
            params,
            shift,
            log_norm,
            exponent: 1.0 / p + q,
            ln_q: q.ln(),
            ln_right: lambda.ln_1p(),
            ln_left: (-lambda).ln_1p(),
            numer: gamma(1.0 / p)?,
            denom: gamma(q)?,
        })
    }

    fn scale_ln() -> f64 {
        SgtParams::SCALE.ln()
    }

    pub fn params(&self) -> SgtParams {
        self.params
    }

    /// The mean shift `m`; the mode of the density is at `-m`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `log(1 + |y|^p / (q (1 ± λ)^p))` in overflow-safe form.
    #[inline]
    fn log_kernel(&self, y: f64) -> f64 {
        let side = if y >= 0.0 { self.ln_right } else { self.ln_left };
        let z = self.params.p * (y.abs().ln() - side - Self::scale_ln()) - self.ln_q;
        log1p_exp(z)
    }

    #[inline]
    pub fn log_pdf(&self, x: f64) -> f64 {
        self.log_norm - self.exponent * self.log_kernel(x + self.shift)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    /// Distribution function via the regularized incomplete beta function.
    ///
    /// On each side of the mode `w = (|y| / (1 ± λ))^p / q` and
    /// `w / (1 + w) ~ Beta(1/p, q)`, with mass `(1 ± λ) / 2` on that side.
    pub fn cdf(&self, x: f64) -> f64 {
        let y = x + self.shift;
        let SgtParams { lambda, p, q } = self.params;
        let tail = (-self.log_kernel(y)).exp();
        let upper = beta_reg(q, 1.0 / p, tail.clamp(0.0, 1.0));
        if y >= 0.0 {
            1.0 - 0.5 * (1.0 + lambda) * upper
        } else {
            0.5 * (1.0 - lambda) * upper
        }
    }
}

impl Distribution<f64> for SgtDensity {
    /// Exact draw: pick the side of the mode with probability `(1 ± λ)/2`,
    /// then `w = G₁ / G₂` with `G₁ ~ Gamma(1/p)`, `G₂ ~ Gamma(q)` is beta-prime
    /// distributed and `|y| = (1 ± λ) (q w)^(1/p)`.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let SgtParams { lambda, p, q } = self.params;
        let right = rng.random::<f64>() < 0.5 * (1.0 + lambda);
        let ln_w = self.numer.sample(rng).ln() - self.denom.sample(rng).ln();
        let magnitude = ((q.ln() + ln_w) / p).exp() * SgtParams::SCALE;
        let y = if right {
            (1.0 + lambda) * magnitude
        } else {
            -(1.0 - lambda) * magnitude
        };
        y - self.shift
    }
}

/// Draw one zero-mean sgt variate.
pub fn sample<R: Rng + ?Sized>(params: &SgtParams, rng: &mut R) -> Result<f64> {
    Ok(params.density()?.sample(rng))
}

#[inline]
fn log1p_exp(z: f64) -> f64 {
    if z > 36.0 {
        z + (-z).exp()
    } else {
        z.exp().ln_1p()
    }
}
