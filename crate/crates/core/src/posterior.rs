//! Structural log-likelihood and unnormalized log-posterior, parameterized by
//! the inverse impact matrix `B⁻¹`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::prior::Prior;
use crate::sgt::{SgtDensity, SgtParams, LAMBDA_BOUND};
use crate::var::{Dataset, LaggedDesign, VarParams};

/// Reduced-form coefficients, inverse impact matrix and shock shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuralModel {
    pub var: VarParams,
    pub b_inv: DMatrix<f64>,
    pub shapes: Vec<SgtParams>,
}

impl StructuralModel {
    pub fn n(&self) -> usize {
        self.var.n()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.b_inv.nrows() != n || self.b_inv.ncols() != n || self.shapes.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "B⁻¹ is {}x{} with {} shapes for a {n}-variable VAR",
                self.b_inv.nrows(),
                self.b_inv.ncols(),
                self.shapes.len()
            )));
        }
        if log_abs_det(&self.b_inv).is_none() {
            return Err(Error::Singular("B⁻¹".into()));
        }
        for s in &self.shapes {
            s.validate()?;
        }
        Ok(())
    }

    /// The impact matrix `B`.
    pub fn impact(&self) -> Result<DMatrix<f64>> {
        self.b_inv
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("B⁻¹".into()))
    }
}

/// `log |det M|` from a partially pivoted LU factorization; `None` when the
/// matrix is numerically singular or not finite.
pub fn log_abs_det(m: &DMatrix<f64>) -> Option<f64> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let diag = u.diagonal();
    let scale = diag.amax();
    if !(scale > 0.0) {
        return None;
    }
    let tol = scale * m.nrows() as f64 * f64::EPSILON;
    let mut total = 0.0;
    for d in diag.iter() {
        if d.abs() <= tol {
            return None;
        }
        total += d.abs().ln();
    }
    Some(total)
}

/// Likelihood evaluator with the lagged design precomputed.
#[derive(Clone, Debug)]
pub struct Likelihood {
    design: LaggedDesign,
}

impl Likelihood {
    pub fn new(data: &Dataset, p: usize) -> Result<Self> {
        data.check_lag_order(p)?;
        Ok(Likelihood {
            design: LaggedDesign::new(&data.values, p)?,
        })
    }

    pub fn design(&self) -> &LaggedDesign {
        &self.design
    }

    pub fn n(&self) -> usize {
        self.design.y.ncols()
    }

    pub fn order(&self) -> usize {
        self.design.p
    }

    /// `ε_t = B⁻¹ u_t`, one row per usable observation.
    pub fn structural_shocks(&self, model: &StructuralModel) -> Result<DMatrix<f64>> {
        let u = self.design.residuals(&model.var)?;
        if model.b_inv.nrows() != u.ncols() || model.b_inv.ncols() != u.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "B⁻¹ is {}x{}, residuals have {} columns",
                model.b_inv.nrows(),
                model.b_inv.ncols(),
                u.ncols()
            )));
        }
        Ok(u * model.b_inv.transpose())
    }

    /// `T_eff log|det B⁻¹| + Σ_i Σ_t log f_i(ι_i' B⁻¹ u_t)` with
    /// `T_eff = T - p`. Returns `-∞` for singular `B⁻¹` or inadmissible
    /// shapes, which the sampler treats as a rejection.
    pub fn log_likelihood(&self, model: &StructuralModel) -> f64 {
        let Some(log_det) = log_abs_det(&model.b_inv) else {
            return f64::NEG_INFINITY;
        };
        let densities: Option<Vec<SgtDensity>> =
            model.shapes.iter().map(|s| s.density().ok()).collect();
        let Some(densities) = densities else {
            return f64::NEG_INFINITY;
        };
        let eps = match self.structural_shocks(model) {
            Ok(e) => e,
            Err(_) => return f64::NEG_INFINITY,
        };
        let mut total = eps.nrows() as f64 * log_det;
        for (i, dens) in densities.iter().enumerate() {
            total += eps.column(i).iter().map(|&e| dens.log_pdf(e)).sum::<f64>();
        }
        if total.is_nan() {
            f64::NEG_INFINITY
        } else {
            total
        }
    }
}

pub fn log_likelihood(model: &StructuralModel, data: &Dataset) -> Result<f64> {
    if model.n() != data.n_vars() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} variables, data has {}",
            model.n(),
            data.n_vars()
        )));
    }
    Ok(Likelihood::new(data, model.var.order())?.log_likelihood(model))
}

pub fn log_posterior(model: &StructuralModel, data: &Dataset, prior: &Prior) -> Result<f64> {
    let lp = prior.log_prior(model);
    if lp == f64::NEG_INFINITY {
        return Ok(lp);
    }
    Ok(lp + log_likelihood(model, data)?)
}

pub fn structural_shocks(model: &StructuralModel, data: &Dataset) -> Result<DMatrix<f64>> {
    if log_abs_det(&model.b_inv).is_none() {
        return Err(Error::Singular("B⁻¹".into()));
    }
    Likelihood::new(data, model.var.order())?.structural_shocks(model)
}

/// Flat parameter vector layout: `π`, then `vec(B⁻¹)` (column-major), then
/// `(λ_i, log p_i, log q_i)` for each shock.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub n: usize,
    pub p: usize,
}

impl ParamLayout {
    pub fn new(n: usize, p: usize) -> Self {
        ParamLayout { n, p }
    }

    pub fn pi_len(&self) -> usize {
        self.n * (1 + self.n * self.p)
    }

    pub fn b_offset(&self) -> usize {
        self.pi_len()
    }

    pub fn shape_offset(&self) -> usize {
        self.pi_len() + self.n * self.n
    }

    pub fn dim(&self) -> usize {
        self.shape_offset() + 3 * self.n
    }

    pub fn lambda_index(&self, shock: usize) -> usize {
        self.shape_offset() + 3 * shock
    }

    /// Column names with one-based indices: `pi_<eq>_const`,
    /// `pi_<eq>_l<lag>_<var>`, `binv_<row>_<col>`, `lambda_<i>`, `logp_<i>`,
    /// `logq_<i>`.
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        for eq in 1..=self.n {
            names.push(format!("pi_{eq}_const"));
            for lag in 1..=self.p {
                for var in 1..=self.n {
                    names.push(format!("pi_{eq}_l{lag}_{var}"));
                }
            }
        }
        for col in 1..=self.n {
            for row in 1..=self.n {
                names.push(format!("binv_{row}_{col}"));
            }
        }
        for i in 1..=self.n {
            names.push(format!("lambda_{i}"));
            names.push(format!("logp_{i}"));
            names.push(format!("logq_{i}"));
        }
        names
    }

    /// Decode a natural-coordinate vector (`λ` itself, not its transform).
    pub fn unpack(&self, theta: &[f64]) -> Result<StructuralModel> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "parameter vector has length {}, layout expects {}",
                theta.len(),
                self.dim()
            )));
        }
        let var = VarParams::from_vec(&theta[..self.pi_len()], self.n, self.p)?;
        let b_inv = DMatrix::from_column_slice(
            self.n,
            self.n,
            &theta[self.b_offset()..self.shape_offset()],
        );
        let shapes = theta[self.shape_offset()..]
            .chunks_exact(3)
            .map(|c| SgtParams {
                lambda: c[0],
                p: c[1].exp(),
                q: c[2].exp(),
            })
            .collect();
        Ok(StructuralModel { var, b_inv, shapes })
    }

    pub fn pack(&self, model: &StructuralModel) -> Vec<f64> {
        let mut theta = model.var.to_vec();
        theta.extend_from_slice(model.b_inv.as_slice());
        for s in &model.shapes {
            theta.extend_from_slice(&[s.lambda, s.p.ln(), s.q.ln()]);
        }
        theta
    }

    /// Natural coordinates to sampling coordinates: `λ ↦ atanh(λ)`.
    pub fn to_sampling(&self, theta: &mut [f64]) {
        for i in 0..self.n {
            let k = self.lambda_index(i);
            theta[k] = theta[k].atanh();
        }
    }

    pub fn to_natural(&self, theta: &mut [f64]) {
        for i in 0..self.n {
            let k = self.lambda_index(i);
            theta[k] = theta[k].tanh();
        }
    }
}

/// Log-posterior on the unconstrained sampling coordinates, with the
/// `atanh` Jacobian `log(1 - λ²)` folded in.
#[derive(Clone, Debug)]
pub struct PosteriorTarget {
    pub layout: ParamLayout,
    pub likelihood: Likelihood,
    pub prior: Prior,
}

impl PosteriorTarget {
    pub fn new(data: &Dataset, p: usize, prior: Prior) -> Result<Self> {
        if prior.n() != data.n_vars() {
            return Err(Error::DimensionMismatch(format!(
                "prior for {} variables, data has {}",
                prior.n(),
                data.n_vars()
            )));
        }
        Ok(PosteriorTarget {
            layout: ParamLayout::new(data.n_vars(), p),
            likelihood: Likelihood::new(data, p)?,
            prior,
        })
    }

    pub fn log_posterior(&self, model: &StructuralModel) -> f64 {
        let lp = self.prior.log_prior(model);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.likelihood.log_likelihood(model)
    }

    pub fn log_density(&self, sampling: &[f64]) -> f64 {
        if sampling.len() != self.layout.dim() || sampling.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let mut theta = sampling.to_vec();
        self.layout.to_natural(&mut theta);
        let mut jacobian = 0.0;
        for i in 0..self.layout.n {
            let lambda = theta[self.layout.lambda_index(i)];
            if lambda.abs() > LAMBDA_BOUND {
                return f64::NEG_INFINITY;
            }
            jacobian += (1.0 - lambda * lambda).ln();
        }
        match self.layout.unpack(&theta) {
            Ok(model) => self.log_posterior(&model) + jacobian,
            Err(_) => f64::NEG_INFINITY,
        }
    }
}
