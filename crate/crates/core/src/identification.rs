//! Canonical representative of the permutation/sign equivalence class of
//! the impact matrix, shock labeling and tail-exponent summaries.
//!
//! `B` is identified only up to reordering and sign changes of its columns.
//! The canonical form picks the column permutation maximizing the product of
//! absolute diagonal entries, then flips column signs so the diagonal is
//! positive. A sign flip of shock `j` is mirrored in its shape by `λ_j ↦ -λ_j`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::StructuralModel;
use crate::sgt::SgtParams;

/// Largest dimension solved by enumerating all permutations.
const EXHAUSTIVE_MAX_N: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedDraw {
    /// `B` after normalization; strictly positive diagonal.
    pub impact: DMatrix<f64>,
    /// Column `j` of `impact` is column `permutation[j]` of the raw matrix.
    pub permutation: Vec<usize>,
    pub signs: Vec<f64>,
    pub shapes: Vec<SgtParams>,
}

impl NormalizedDraw {
    /// Apply the same reordering to `B⁻¹`: rows permuted and sign-flipped.
    pub fn transform_inverse(&self, b_inv: &DMatrix<f64>) -> DMatrix<f64> {
        let n = b_inv.nrows();
        DMatrix::from_fn(n, n, |i, k| self.signs[i] * b_inv[(self.permutation[i], k)])
    }
}

/// Permutation maximizing `Σ_j log|b[j, perm[j]]|`, or `None` if every
/// permutation puts a zero on the diagonal.
fn best_permutation(log_abs: &DMatrix<f64>) -> Option<Vec<usize>> {
    let n = log_abs.nrows();
    if n <= EXHAUSTIVE_MAX_N {
        best_permutation_exhaustive(log_abs)
    } else {
        best_permutation_assignment(log_abs)
    }
}

/// Enumerates permutations in lexicographic order; ties keep the first.
fn best_permutation_exhaustive(log_abs: &DMatrix<f64>) -> Option<Vec<usize>> {
    let n = log_abs.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let score: f64 = (0..n).map(|j| log_abs[(j, perm[j])]).sum();
        if score > f64::NEG_INFINITY && best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, perm.clone()));
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    best.map(|(_, p)| p)
}

fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Hungarian algorithm (shortest augmenting path, O(n³)) on cost
/// `-log|b|`. Zero entries get a large finite cost so infeasibility can be
/// detected afterwards.
fn best_permutation_assignment(log_abs: &DMatrix<f64>) -> Option<Vec<usize>> {
    let n = log_abs.nrows();
    let finite_max = log_abs
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let forbidden = 1e6 * (1.0 + finite_max) * n as f64;
    let cost = |i: usize, j: usize| {
        let v = log_abs[(i, j)];
        if v.is_finite() {
            -v
        } else {
            forbidden
        }
    };
    // 1-based potentials over rows (u) and columns (v); way[j] tracks the
    // augmenting path, p[j] the row assigned to column j.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    if (0..n).any(|r| !log_abs[(r, perm[r])].is_finite()) {
        return None;
    }
    Some(perm)
}

/// Canonical form of a raw impact matrix and its shock shapes.
pub fn normalize(b_raw: &DMatrix<f64>, shapes: &[SgtParams]) -> Result<NormalizedDraw> {
    let n = b_raw.nrows();
    if b_raw.ncols() != n || shapes.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "impact {}x{} with {} shapes",
            b_raw.nrows(),
            b_raw.ncols(),
            shapes.len()
        )));
    }
    let log_abs = b_raw.map(|v| v.abs().ln());
    let permutation = best_permutation(&log_abs).ok_or_else(|| {
        Error::Degenerate("every column permutation leaves a zero on the diagonal".into())
    })?;
    let signs: Vec<f64> = (0..n)
        .map(|j| b_raw[(j, permutation[j])].signum())
        .collect();
    let impact = DMatrix::from_fn(n, n, |i, j| signs[j] * b_raw[(i, permutation[j])]);
    let shapes = (0..n)
        .map(|j| {
            let s = shapes[permutation[j]];
            if signs[j] < 0.0 {
                s.mirrored()
            } else {
                s
            }
        })
        .collect();
    Ok(NormalizedDraw {
        impact,
        permutation,
        signs,
        shapes,
    })
}

/// Normalize a full structural model: `B⁻¹` rows and shapes are reordered
/// consistently with the columns of `B`.
pub fn normalize_model(model: &StructuralModel) -> Result<(StructuralModel, NormalizedDraw)> {
    let impact = model.impact()?;
    let norm = normalize(&impact, &model.shapes)?;
    let canonical = StructuralModel {
        var: model.var.clone(),
        b_inv: norm.transform_inverse(&model.b_inv),
        shapes: norm.shapes.clone(),
    };
    Ok((canonical, norm))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShockLabel {
    /// Zero-based shock index.
    pub shock_index: usize,
    /// Ratio of the largest to the second-largest median absolute impact.
    pub margin: f64,
    pub median_impact: f64,
    /// Median absolute impact on the target variable for every shock.
    pub impact_table: Vec<f64>,
}

pub const DEFAULT_LABEL_MARGIN: f64 = 1.25;

/// Assign each label to the shock with the largest posterior median of
/// `|B[target, j]|`.
pub fn label_shocks(
    draws: &[NormalizedDraw],
    targets: &BTreeMap<String, usize>,
    min_margin: f64,
) -> Result<BTreeMap<String, ShockLabel>> {
    let first = draws
        .first()
        .ok_or_else(|| Error::InvalidParameter("no draws to label".into()))?;
    let n = first.impact.nrows();
    let mut labels = BTreeMap::new();
    for (label, &var) in targets {
        if var >= n {
            return Err(Error::InvalidParameter(format!(
                "label '{label}' targets variable {var} of {n}"
            )));
        }
        let table: Vec<f64> = (0..n)
            .map(|j| {
                let mut vals: Vec<f64> = draws.iter().map(|d| d.impact[(var, j)].abs()).collect();
                median(&mut vals)
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| table[b].total_cmp(&table[a]).then(a.cmp(&b)));
        let top = order[0];
        let margin = if n > 1 {
            table[top] / table[order[1]]
        } else {
            f64::INFINITY
        };
        labels.insert(
            label.clone(),
            ShockLabel {
                shock_index: top,
                margin,
                median_impact: table[top],
                impact_table: table,
            },
        );
    }
    let mut seen: BTreeMap<usize, &str> = BTreeMap::new();
    for (label, l) in &labels {
        if let Some(other) = seen.insert(l.shock_index, label) {
            return Err(Error::LabelCollision(format!(
                "labels '{other}' and '{label}' both select shock {}",
                l.shock_index + 1
            )));
        }
    }
    for (label, l) in &labels {
        if !(l.margin >= min_margin) {
            return Err(Error::AmbiguousLabel(format!(
                "label '{label}': top shock {} beats the runner-up by only {:.3} (need {min_margin})",
                l.shock_index + 1,
                l.margin
            )));
        }
    }
    Ok(labels)
}

fn median(vals: &mut [f64]) -> f64 {
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    }
}

/// Per shock, the share of draws with tail exponent `p q > 2`.
pub fn prob_finite_variance(draws: &[Vec<SgtParams>]) -> Result<Vec<f64>> {
    let first = draws
        .first()
        .ok_or_else(|| Error::InvalidParameter("no shape draws".into()))?;
    let n = first.len();
    let mut counts = vec![0usize; n];
    for d in draws {
        if d.len() != n {
            return Err(Error::DimensionMismatch("ragged shape draws".into()));
        }
        for (c, s) in counts.iter_mut().zip(d) {
            if s.tail_exponent() > 2.0 {
                *c += 1;
            }
        }
    }
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / draws.len() as f64)
        .collect())
}
