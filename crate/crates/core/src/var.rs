//! Reduced-form VAR machinery: coefficient containers, lagged design,
//! residuals, companion form and forward simulation.

use nalgebra::{DMatrix, DVector};

use crate::data::Period;
use crate::error::{Error, Result};

/// Intercept and lag matrices of `y_t = a + A_1 y_{t-1} + ... + A_p y_{t-p} + u_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarParams {
    pub intercept: DVector<f64>,
    pub lags: Vec<DMatrix<f64>>,
}

impl VarParams {
    pub fn new(intercept: DVector<f64>, lags: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = intercept.len();
        if lags.is_empty() {
            return Err(Error::InvalidParameter("lag order must be at least 1".into()));
        }
        for (l, a) in lags.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "lag matrix {} is {}x{}, expected {n}x{n}",
                    l + 1,
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
        Ok(VarParams { intercept, lags })
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        VarParams {
            intercept: DVector::zeros(n),
            lags: vec![DMatrix::zeros(n, n); p],
        }
    }

    pub fn n(&self) -> usize {
        self.intercept.len()
    }

    pub fn order(&self) -> usize {
        self.lags.len()
    }

    /// Number of coefficients per equation (`1 + n p`).
    pub fn coefs_per_equation(&self) -> usize {
        1 + self.n() * self.order()
    }

    /// `Π = [a, A_1', ..., A_p']'`, shape `(1 + n p) × n`. Column `i` holds
    /// the coefficients of equation `i`.
    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let k = self.coefs_per_equation();
        DMatrix::from_fn(k, n, |row, eq| {
            if row == 0 {
                self.intercept[eq]
            } else {
                let lag = (row - 1) / n;
                let var = (row - 1) % n;
                self.lags[lag][(eq, var)]
            }
        })
    }

    pub fn from_coefficient_matrix(pi: &DMatrix<f64>, p: usize) -> Result<Self> {
        let n = pi.ncols();
        if pi.nrows() != 1 + n * p {
            return Err(Error::DimensionMismatch(format!(
                "coefficient matrix has {} rows, expected {}",
                pi.nrows(),
                1 + n * p
            )));
        }
        let intercept = DVector::from_iterator(n, pi.row(0).iter().copied());
        let lags = (0..p)
            .map(|l| DMatrix::from_fn(n, n, |eq, var| pi[(1 + l * n + var, eq)]))
            .collect();
        VarParams::new(intercept, lags)
    }

    /// `π = vec(Π)`: equation by equation, intercept first, then lag 1
    /// coefficients on variables `1..n`, lag 2, and so on.
    pub fn to_vec(&self) -> Vec<f64> {
        self.coefficient_matrix().as_slice().to_vec()
    }

    pub fn from_vec(pi: &[f64], n: usize, p: usize) -> Result<Self> {
        let k = 1 + n * p;
        if pi.len() != k * n {
            return Err(Error::DimensionMismatch(format!(
                "coefficient vector has length {}, expected {}",
                pi.len(),
                k * n
            )));
        }
        Self::from_coefficient_matrix(&DMatrix::from_column_slice(k, n, pi), p)
    }
}

/// Observations `y_t` in rows, with variable names and time stamps.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub values: DMatrix<f64>,
    pub names: Vec<String>,
    pub index: Vec<Period>,
}

impl Dataset {
    pub fn new(values: DMatrix<f64>, names: Vec<String>, index: Vec<Period>) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        if index.len() != values.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} time stamps for {} rows",
                index.len(),
                values.nrows()
            )));
        }
        if let Some((pos, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value at row {}, column {}",
                pos % values.nrows(),
                pos / values.nrows()
            )));
        }
        Ok(Dataset {
            values,
            names,
            index,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Enough observations to estimate a VAR(p): `T > n p + 1`.
    pub fn check_lag_order(&self, p: usize) -> Result<()> {
        let need = self.n_vars() * p + 1;
        if self.n_obs() <= need {
            return Err(Error::Data(format!(
                "{} observations cannot support a VAR({p}) in {} variables (need more than {need})",
                self.n_obs(),
                self.n_vars()
            )));
        }
        Ok(())
    }
}

/// Regressand and regressor matrices of the conditional likelihood: rows
/// `t = p+1..T` of `y`, and `[1, y_{t-1}', ..., y_{t-p}']`.
#[derive(Clone, Debug)]
pub struct LaggedDesign {
    pub y: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub p: usize,
}

impl LaggedDesign {
    pub fn new(values: &DMatrix<f64>, p: usize) -> Result<Self> {
        let t = values.nrows();
        let n = values.ncols();
        if p == 0 {
            return Err(Error::InvalidParameter("lag order must be at least 1".into()));
        }
        if t < p + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{t} rows cannot carry {p} lags"
            )));
        }
        let rows = t - p;
        let y = values.rows(p, rows).into_owned();
        let x = DMatrix::from_fn(rows, 1 + n * p, |r, c| {
            if c == 0 {
                1.0
            } else {
                let lag = (c - 1) / n + 1;
                values[(p + r - lag, (c - 1) % n)]
            }
        });
        Ok(LaggedDesign { y, x, p })
    }

    pub fn rows(&self) -> usize {
        self.y.nrows()
    }

    pub fn residuals(&self, params: &VarParams) -> Result<DMatrix<f64>> {
        if params.n() != self.y.ncols() || params.order() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "VAR({}) in {} variables applied to design for VAR({}) in {}",
                params.order(),
                params.n(),
                self.p,
                self.y.ncols()
            )));
        }
        Ok(&self.y - &self.x * params.coefficient_matrix())
    }

    pub fn residuals_from_coefficients(&self, pi: &DMatrix<f64>) -> DMatrix<f64> {
        &self.y - &self.x * pi
    }
}

/// `u_t = y_t - a - A_1 y_{t-1} - ... - A_p y_{t-p}` for `t = p+1..T`.
pub fn residuals(data: &Dataset, params: &VarParams) -> Result<DMatrix<f64>> {
    if params.n() != data.n_vars() {
        return Err(Error::DimensionMismatch(format!(
            "VAR in {} variables, data has {}",
            params.n(),
            data.n_vars()
        )));
    }
    LaggedDesign::new(&data.values, params.order())?.residuals(params)
}

/// Companion matrix: `[A_1 ... A_p]` on top, identity blocks below.
pub fn companion(params: &VarParams) -> DMatrix<f64> {
    let n = params.n();
    let p = params.order();
    let mut c = DMatrix::zeros(n * p, n * p);
    for (l, a) in params.lags.iter().enumerate() {
        c.view_mut((0, l * n), (n, n)).copy_from(a);
    }
    for i in n..n * p {
        c[(i, i - n)] = 1.0;
    }
    c
}

pub fn spectral_radius(params: &VarParams) -> f64 {
    companion(params)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn is_stable(params: &VarParams) -> bool {
    spectral_radius(params) < 1.0
}

/// Iterate `y_t = a + Σ A_l y_{t-l} + B ε_t` from zero initial conditions and
/// drop the first `burn` rows. The result has `shocks.nrows() - burn` rows
/// stamped monthly from `start`.
pub fn simulate(
    params: &VarParams,
    impact: &DMatrix<f64>,
    shocks: &DMatrix<f64>,
    burn: usize,
    start: Period,
) -> Result<Dataset> {
    let n = params.n();
    let p = params.order();
    if impact.nrows() != n || impact.ncols() != n || shocks.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "impact {}x{} and shocks with {} columns for a {n}-variable VAR",
            impact.nrows(),
            impact.ncols(),
            shocks.ncols()
        )));
    }
    if shocks.nrows() <= burn {
        return Err(Error::DimensionMismatch(format!(
            "{} shock rows leave nothing after a burn-in of {burn}",
            shocks.nrows()
        )));
    }
    if impact.clone().lu().determinant() == 0.0 {
        return Err(Error::Singular("impact matrix".into()));
    }
    let total = shocks.nrows();
    let mut path = DMatrix::<f64>::zeros(total, n);
    for t in 0..total {
        let mut y = &params.intercept + impact * shocks.row(t).transpose();
        for l in 1..=p.min(t) {
            y += &params.lags[l - 1] * path.row(t - l).transpose();
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation { step: t });
        }
        path.set_row(t, &y.transpose());
    }
    let kept = total - burn;
    let values = path.rows(burn, kept).into_owned();
    let names = (1..=n).map(|i| format!("y{i}")).collect();
    let index = std::iter::successors(Some(start), |p| Some(p.succ()))
        .take(kept)
        .collect();
    Dataset::new(values, names, index)
}

/// Equation-by-equation least squares fit of a VAR(p) with intercept.
#[derive(Clone, Debug)]
pub struct OlsFit {
    pub params: VarParams,
    /// Residual covariance with a degrees-of-freedom correction.
    pub sigma: DMatrix<f64>,
    /// Standard errors laid out like [`VarParams::to_vec`].
    pub std_errors: Vec<f64>,
}

pub fn ols(data: &DMatrix<f64>, p: usize) -> Result<OlsFit> {
    let design = LaggedDesign::new(data, p)?;
    let k = design.x.ncols();
    let rows = design.rows();
    if rows <= k {
        return Err(Error::Degenerate(format!(
            "{rows} usable rows for {k} regressors"
        )));
    }
    let xtx = design.x.transpose() * &design.x;
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::Degenerate("regressor matrix is rank deficient".into()))?;
    let pi = chol.solve(&(design.x.transpose() * &design.y));
    let u = design.residuals_from_coefficients(&pi);
    let sigma = (u.transpose() * &u) / (rows - k) as f64;
    let xtx_inv = chol.inverse();
    let n = data.ncols();
    let mut std_errors = Vec::with_capacity(k * n);
    for eq in 0..n {
        for c in 0..k {
            std_errors.push((sigma[(eq, eq)] * xtx_inv[(c, c)]).max(0.0).sqrt());
        }
    }
    Ok(OlsFit {
        params: VarParams::from_coefficient_matrix(&pi, p)?,
        sigma,
        std_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| {
            scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
        })
    }

    fn monthly(t: usize) -> Vec<Period> {
        std::iter::successors(Some(Period::month(2000, 1)), |p| Some(p.succ()))
            .take(t)
            .collect()
    }

    #[test]
    fn zero_model_residuals_are_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values = random_matrix(20, 3, 1.0, &mut rng);
        let data = Dataset::new(values.clone(), vec!["a".into(), "b".into(), "c".into()], monthly(20))
            .unwrap();
        let u = residuals(&data, &VarParams::zeros(3, 2)).unwrap();
        assert_eq!(u, values.rows(2, 18).into_owned());
    }

    #[test]
    fn residuals_match_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, p, t) = (3, 2, 40);
        let values = random_matrix(t, n, 1.0, &mut rng);
        let params = VarParams::new(
            DVector::from_fn(n, |i, _| 0.1 * i as f64 - 0.05),
            (0..p).map(|_| random_matrix(n, n, 0.3, &mut rng)).collect(),
        )
        .unwrap();
        let data = Dataset::new(values.clone(), vec!["a".into(), "b".into(), "c".into()], monthly(t))
            .unwrap();
        let u = residuals(&data, &params).unwrap();
        for row in p..t {
            for i in 0..n {
                let mut fitted = params.intercept[i];
                for l in 1..=p {
                    for j in 0..n {
                        fitted += params.lags[l - 1][(i, j)] * values[(row - l, j)];
                    }
                }
                let expected = values[(row, i)] - fitted;
                assert!((u[(row - p, i)] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn residual_dimension_mismatch() {
        let data = Dataset::new(DMatrix::zeros(10, 2), vec!["a".into(), "b".into()], monthly(10))
            .unwrap();
        assert!(matches!(
            residuals(&data, &VarParams::zeros(3, 1)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn vec_round_trip_and_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = VarParams::new(
            DVector::from_vec(vec![1.0, 2.0]),
            vec![random_matrix(2, 2, 1.0, &mut rng), random_matrix(2, 2, 1.0, &mut rng)],
        )
        .unwrap();
        let pi = params.to_vec();
        // Equation 2: intercept, then A_1[1, :], then A_2[1, :].
        assert_eq!(pi[5], 2.0);
        assert_eq!(pi[6], params.lags[0][(1, 0)]);
        assert_eq!(pi[9], params.lags[1][(1, 1)]);
        assert_eq!(VarParams::from_vec(&pi, 2, 2).unwrap(), params);
    }

    #[test]
    fn companion_forms() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.2, 0.3]);
        let params = VarParams::new(DVector::zeros(2), vec![a.clone()]).unwrap();
        assert_eq!(companion(&params), a);

        let params = VarParams::new(
            DVector::zeros(1),
            vec![DMatrix::from_element(1, 1, 0.5), DMatrix::from_element(1, 1, 0.2)],
        )
        .unwrap();
        assert_eq!(
            companion(&params),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 1.0, 0.0])
        );
    }

    #[test]
    fn spectral_radius_of_scaled_identity() {
        let params =
            VarParams::new(DVector::zeros(3), vec![DMatrix::identity(3, 3) * 0.9]).unwrap();
        assert!((spectral_radius(&params) - 0.9).abs() < 1e-12);
        assert!(is_stable(&params));
    }

    #[test]
    fn simulate_trivial_systems() {
        let params = VarParams::zeros(2, 1);
        let shocks = DMatrix::zeros(30, 2);
        let data = simulate(&params, &DMatrix::identity(2, 2), &shocks, 5, Period::month(2000, 1))
            .unwrap();
        assert!(data.values.iter().all(|&v| v == 0.0));
        assert_eq!(data.n_obs(), 25);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shocks = random_matrix(30, 2, 1.0, &mut rng);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 2.0]);
        let data = simulate(&params, &b, &shocks, 0, Period::month(2000, 1)).unwrap();
        let expected = (&b * shocks.transpose()).transpose();
        assert!((data.values - expected).amax() < 1e-14);
    }

    #[test]
    fn residuals_recover_impact_times_shocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = VarParams::new(
            DVector::from_vec(vec![0.2, -0.1, 0.05]),
            vec![
                DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.0, 0.4, 0.1, 0.1, 0.0, 0.3]),
                DMatrix::from_row_slice(3, 3, &[0.1, 0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.1]),
            ],
        )
        .unwrap();
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.2, 0.8, 0.3, -0.3, 0.2, 1.2]);
        let shocks = random_matrix(120, 3, 1.0, &mut rng);
        let burn = 20;
        let data = simulate(&params, &b, &shocks, burn, Period::month(2000, 1)).unwrap();
        let u = residuals(&data, &params).unwrap();
        let expected = (&b * shocks.rows(burn + 2, 98).transpose()).transpose();
        assert!((u - expected).amax() < 1e-12);
    }

    #[test]
    fn explosive_simulation_fails() {
        let params = VarParams::new(DVector::zeros(1), vec![DMatrix::from_element(1, 1, 1e3)]).unwrap();
        let shocks = DMatrix::from_element(400, 1, 1.0);
        assert!(matches!(
            simulate(&params, &DMatrix::identity(1, 1), &shocks, 0, Period::month(2000, 1)),
            Err(Error::Simulation { .. })
        ));
    }

    #[test]
    fn ols_recovers_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let truth = VarParams::new(
            DVector::from_vec(vec![0.5, -0.2]),
            vec![DMatrix::from_row_slice(2, 2, &[0.6, 0.1, -0.2, 0.3])],
        )
        .unwrap();
        let shocks = random_matrix(5000, 2, 1.0, &mut rng);
        let data = simulate(&truth, &DMatrix::identity(2, 2), &shocks, 100, Period::month(1900, 1))
            .unwrap();
        let fit = ols(&data.values, 1).unwrap();
        for (est, tru) in fit.params.to_vec().iter().zip(truth.to_vec()) {
            assert!((est - tru).abs() < 0.06, "{est} vs {tru}");
        }
        assert!((fit.sigma[(0, 0)] - 1.0).abs() < 0.1);
    }
}
