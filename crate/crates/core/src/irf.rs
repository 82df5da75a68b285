//! Impulse responses to unit structural shocks and point-wise posterior
//! bands.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::var::VarParams;

pub const DEFAULT_HORIZON: usize = 40;
pub const MIN_BAND_DRAWS: usize = 100;

/// Responses `Θ_0 … Θ_H`, each `n × n` with `Θ_h[(variable, shock)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct IrfPath {
    pub theta: Vec<DMatrix<f64>>,
}

impl IrfPath {
    pub fn horizon(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn response(&self, variable: usize, shock: usize, h: usize) -> f64 {
        self.theta[h][(variable, shock)]
    }
}

/// `Θ_0 = B`, `Θ_h = Σ_{l=1}^{min(h,p)} A_l Θ_{h-l}`, which equals
/// `J C^h J' B` for the companion matrix `C`.
pub fn irf_path(var: &VarParams, impact: &DMatrix<f64>, horizon: usize) -> IrfPath {
    let mut theta: Vec<DMatrix<f64>> = Vec::with_capacity(horizon + 1);
    theta.push(impact.clone());
    for h in 1..=horizon {
        let mut next = DMatrix::zeros(impact.nrows(), impact.ncols());
        for (l, a) in var.lags.iter().enumerate().take(h) {
            next += a * &theta[h - l - 1];
        }
        theta.push(next);
    }
    IrfPath { theta }
}

/// Response of every variable to one shock column, `[h][variable]`.
fn shock_path(var: &VarParams, impact_col: DVector<f64>, horizon: usize) -> Vec<DVector<f64>> {
    let mut path: Vec<DVector<f64>> = Vec::with_capacity(horizon + 1);
    path.push(impact_col);
    for h in 1..=horizon {
        let mut next = DVector::zeros(path[0].len());
        for (l, a) in var.lags.iter().enumerate().take(h) {
            next += a * &path[h - l - 1];
        }
        path.push(next);
    }
    path
}

/// Running sums over horizons for flagged variables.
pub fn cumulate(path: &IrfPath, flags: &[bool]) -> IrfPath {
    let mut theta = path.theta.clone();
    for h in 1..theta.len() {
        let (done, rest) = theta.split_at_mut(h);
        let prev = &done[h - 1];
        for (var, &flag) in flags.iter().enumerate() {
            if flag {
                for shock in 0..prev.ncols() {
                    rest[0][(var, shock)] += prev[(var, shock)];
                }
            }
        }
    }
    IrfPath { theta }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BandCell {
    pub q025: f64,
    pub q16: f64,
    pub q50: f64,
    pub q84: f64,
    pub q975: f64,
    pub mean: f64,
}

impl BandCell {
    fn from_values(values: &mut [f64]) -> Self {
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        BandCell {
            q025: quantile_sorted(values, 0.025),
            q16: quantile_sorted(values, 0.16),
            q50: quantile_sorted(values, 0.5),
            q84: quantile_sorted(values, 0.84),
            q975: quantile_sorted(values, 0.975),
            mean,
        }
    }

    pub fn contains95(&self, x: f64) -> bool {
        self.q025 <= x && x <= self.q975
    }
}

/// Linear interpolation between order statistics (`(n - 1) prob` rule).
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let pos = prob * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + w * (sorted[hi] - sorted[lo])
    }
}

/// Point-wise 68% and 95% bands, indexed `[variable][shock][horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct IrfBands {
    pub n: usize,
    pub horizon: usize,
    pub cumulated: Vec<bool>,
    cells: Vec<BandCell>,
}

impl IrfBands {
    fn offset(&self, variable: usize, shock: usize, h: usize) -> usize {
        (variable * self.n + shock) * (self.horizon + 1) + h
    }

    pub fn cell(&self, variable: usize, shock: usize, h: usize) -> &BandCell {
        &self.cells[self.offset(variable, shock, h)]
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, usize, &BandCell)> {
        let n = self.n;
        let hp = self.horizon + 1;
        self.cells
            .iter()
            .enumerate()
            .map(move |(k, c)| (k / (n * hp), (k / hp) % n, k % hp, c))
    }

    /// Long-format CSV: `variable,shock,horizon,q025,q16,q50,q84,q975,mean`.
    /// Shocks are numbered from one; `scale[v]` multiplies every value of
    /// variable `v`.
    pub fn write_csv<W: std::io::Write>(
        &self,
        out: W,
        names: &[String],
        scale: &[f64],
    ) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "variable", "shock", "horizon", "q025", "q16", "q50", "q84", "q975", "mean",
        ])?;
        for (v, s, h, c) in self.cells() {
            let k = scale.get(v).copied().unwrap_or(1.0);
            let row = [
                names[v].clone(),
                (s + 1).to_string(),
                h.to_string(),
                (k * c.q025).to_string(),
                (k * c.q16).to_string(),
                (k * c.q50).to_string(),
                (k * c.q84).to_string(),
                (k * c.q975).to_string(),
                (k * c.mean).to_string(),
            ];
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<irf csv>", e))?;
        Ok(())
    }
}

/// One posterior draw as needed for impulse responses: reduced-form
/// coefficients and the normalized impact matrix.
#[derive(Clone, Debug)]
pub struct IrfDraw {
    pub var: VarParams,
    pub impact: DMatrix<f64>,
}

/// Per draw: responses, optional cumulation, then empirical quantiles per
/// `(variable, shock, horizon)` cell.
pub fn posterior_bands(draws: &[IrfDraw], horizon: usize, cumulate_flags: &[bool]) -> Result<IrfBands> {
    if draws.len() < MIN_BAND_DRAWS {
        return Err(Error::InvalidParameter(format!(
            "{} draws are too few for posterior bands (need {MIN_BAND_DRAWS})",
            draws.len()
        )));
    }
    let n = draws[0].impact.nrows();
    if draws.iter().any(|d| d.impact.nrows() != n || d.var.n() != n) {
        return Err(Error::DimensionMismatch("draws disagree on the variable count".into()));
    }
    let flags: Vec<bool> = (0..n).map(|v| cumulate_flags.get(v).copied().unwrap_or(false)).collect();
    let hp = horizon + 1;
    let mut cells = vec![BandCell::default(); n * n * hp];
    // One shock at a time keeps memory at draws × n × (H + 1).
    for shock in 0..n {
        let paths: Vec<Vec<f64>> = draws
            .par_iter()
            .map(|d| {
                let path = shock_path(&d.var, d.impact.column(shock).into_owned(), horizon);
                let mut flat = vec![0.0; n * hp];
                for v in 0..n {
                    let mut acc = 0.0;
                    for (h, resp) in path.iter().enumerate() {
                        let x = if flags[v] {
                            acc += resp[v];
                            acc
                        } else {
                            resp[v]
                        };
                        flat[v * hp + h] = x;
                    }
                }
                flat
            })
            .collect();
        let summaries: Vec<BandCell> = (0..n * hp)
            .into_par_iter()
            .map(|k| {
                let mut vals: Vec<f64> = paths.iter().map(|p| p[k]).collect();
                BandCell::from_values(&mut vals)
            })
            .collect();
        for (k, cell) in summaries.into_iter().enumerate() {
            let (v, h) = (k / hp, k % hp);
            cells[(v * n + shock) * hp + h] = cell;
        }
    }
    Ok(IrfBands {
        n,
        horizon,
        cumulated: flags,
        cells,
    })
}
