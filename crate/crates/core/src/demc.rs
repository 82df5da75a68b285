//! Differential evolution Markov chain sampling from past states (DE-MCz)
//! with split-R̂ convergence diagnostics.
//!
//! Every generation each chain proposes
//! `x* = x + γ (z₁ - z₂) + e`, where `z₁ ≠ z₂` are drawn uniformly from the
//! shared history of thinned states, `e ~ N(0, jitter²)` per coordinate and
//! `γ = gamma_scale · 2.38 / √(2d)` except on every `mode_jump_every`-th
//! generation, where `γ = 1` so chains can hop between modes. The proposal
//! is symmetric given the history, so acceptance uses the plain density
//! ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_chains: usize,
    /// Generations per chain, burn-in included.
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub gamma_scale: f64,
    pub jitter_sd: f64,
    /// Generations between `γ = 1` proposals; zero disables them.
    pub mode_jump_every: usize,
    pub seed: u64,
    /// Size of the initial history; defaults to `10 d`.
    pub initial_history: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_chains: 8,
            n_iterations: 20_000,
            burn_in: 5_000,
            thinning: 10,
            gamma_scale: 1.0,
            jitter_sd: 1e-6,
            mode_jump_every: 10,
            seed: 0,
            initial_history: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains < 3 {
            return Err(Error::Config(format!(
                "n_chains = {} (need at least 3)",
                self.n_chains
            )));
        }
        if self.burn_in >= self.n_iterations {
            return Err(Error::Config(format!(
                "burn_in = {} must be below n_iterations = {}",
                self.burn_in, self.n_iterations
            )));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        if !(self.gamma_scale > 0.0 && self.gamma_scale.is_finite()) {
            return Err(Error::Config("gamma_scale must be positive".into()));
        }
        if !(self.jitter_sd > 0.0 && self.jitter_sd.is_finite()) {
            return Err(Error::Config("jitter_sd must be positive".into()));
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.n_iterations - self.burn_in) / self.thinning
    }
}

/// Retained sampler states, stored row-major, with per-row chain id,
/// generation and log-density.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    pub draws: Vec<f64>,
    pub chain: Vec<usize>,
    pub generation: Vec<usize>,
    pub log_density: Vec<f64>,
    /// Acceptance rate per chain over the whole run; empty for draws read
    /// back from disk.
    pub acceptance: Vec<f64>,
}

impl PosteriorDraws {
    pub fn empty(names: Vec<String>) -> Self {
        PosteriorDraws {
            names,
            draws: Vec::new(),
            chain: Vec::new(),
            generation: Vec::new(),
            log_density: Vec::new(),
            acceptance: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.draws[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.draws.chunks_exact(self.dim().max(1))
    }

    pub fn push(&mut self, row: &[f64], chain: usize, generation: usize, log_density: f64) {
        debug_assert_eq!(row.len(), self.dim());
        self.draws.extend_from_slice(row);
        self.chain.push(chain);
        self.generation.push(generation);
        self.log_density.push(log_density);
    }

    pub fn n_chains(&self) -> usize {
        self.chain.iter().max().map_or(0, |c| c + 1)
    }

    /// Values of one parameter, grouped by chain in draw order.
    pub fn chains_for(&self, param: usize) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.n_chains()];
        for (i, &c) in self.chain.iter().enumerate() {
            out[c].push(self.draws[i * self.dim() + param]);
        }
        out
    }

    pub fn column_mean(&self, param: usize) -> f64 {
        self.rows().map(|r| r[param]).sum::<f64>() / self.len() as f64
    }

    /// Same draws with every row mapped through `f` (which may rename
    /// columns, e.g. to a canonical parameterization).
    pub fn map_rows<F>(&self, names: Vec<String>, f: F) -> Result<PosteriorDraws>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    {
        let rows: Vec<Vec<f64>> = self
            .rows()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|r| f(r))
            .collect::<Result<_>>()?;
        let mut out = PosteriorDraws::empty(names);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != out.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "mapped row has {} values for {} names",
                    r.len(),
                    out.dim()
                )));
            }
            out.push(r, self.chain[i], self.generation[i], self.log_density[i]);
        }
        out.acceptance = self.acceptance.clone();
        Ok(out)
    }
}

struct Chain {
    state: Vec<f64>,
    log_density: f64,
    rng: ChaCha8Rng,
    accepted: usize,
}

/// Run DE-MCz on `target`, drawing the initial history and chain starting
/// points from `init`.
///
/// The first `n_chains` starting points must have finite density; up to
/// 1000 draws per point are tried before giving up.
pub fn run<T, I>(target: T, mut init: I, dim: usize, config: &SamplerConfig) -> Result<PosteriorDraws>
where
    T: Fn(&[f64]) -> f64 + Sync,
    I: FnMut(&mut ChaCha8Rng) -> Vec<f64>,
{
    config.validate()?;
    if dim == 0 {
        return Err(Error::InvalidParameter("zero-dimensional target".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let history_len = config
        .initial_history
        .unwrap_or(10 * dim)
        .max(config.n_chains + 2);

    let mut history: Vec<f64> = Vec::with_capacity(history_len * dim);
    for _ in 0..history_len {
        let x = init(&mut master);
        if x.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "initializer returned {} values for a {dim}-dimensional target",
                x.len()
            )));
        }
        history.extend_from_slice(&x);
    }

    let max_attempts = 1000 * config.n_chains;
    let mut attempts = 0;
    let mut chains = Vec::with_capacity(config.n_chains);
    while chains.len() < config.n_chains {
        if attempts >= max_attempts {
            return Err(Error::Initialization { attempts });
        }
        attempts += 1;
        let x = init(&mut master);
        if x.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "initializer returned {} values for a {dim}-dimensional target",
                x.len()
            )));
        }
        let lp = target(&x);
        if lp.is_finite() {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(chains.len() as u64 + 1);
            chains.push(Chain {
                state: x,
                log_density: lp,
                rng,
                accepted: 0,
            });
        }
    }

    let base_gamma = config.gamma_scale * 2.38 / (2.0 * dim as f64).sqrt();
    let mut out = PosteriorDraws::empty((0..dim).map(|i| format!("x{i}")).collect());
    let retained = config.retained_per_chain();
    out.draws.reserve(retained * config.n_chains * dim);

    for generation in 1..=config.n_iterations {
        let gamma = if config.mode_jump_every > 0 && generation % config.mode_jump_every == 0 {
            1.0
        } else {
            base_gamma
        };
        let snapshot: &[f64] = &history;
        let entries = snapshot.len() / dim;
        chains.par_iter_mut().for_each(|chain| {
            let r1 = chain.rng.random_range(0..entries);
            let mut r2 = chain.rng.random_range(0..entries - 1);
            if r2 >= r1 {
                r2 += 1;
            }
            let z1 = &snapshot[r1 * dim..(r1 + 1) * dim];
            let z2 = &snapshot[r2 * dim..(r2 + 1) * dim];
            let proposal: Vec<f64> = (0..dim)
                .map(|k| {
                    let e: f64 = StandardNormal.sample(&mut chain.rng);
                    chain.state[k] + gamma * (z1[k] - z2[k]) + config.jitter_sd * e
                })
                .collect();
            let lp = target(&proposal);
            let u: f64 = chain.rng.random();
            if lp.is_finite() && (lp >= chain.log_density || u.ln() < lp - chain.log_density) {
                chain.state = proposal;
                chain.log_density = lp;
                chain.accepted += 1;
            }
        });
        if generation % config.thinning == 0 {
            for chain in &chains {
                history.extend_from_slice(&chain.state);
            }
        }
        if generation > config.burn_in && (generation - config.burn_in) % config.thinning == 0 {
            for (c, chain) in chains.iter().enumerate() {
                out.push(&chain.state, c, generation, chain.log_density);
            }
        }
    }
    out.acceptance = chains
        .iter()
        .map(|c| c.accepted as f64 / config.n_iterations as f64)
        .collect();
    Ok(out)
}

/// Potential scale reduction for one parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum Rhat {
    Value(f64),
    /// Zero within-chain variance; the statistic is undefined.
    Degenerate,
}

impl Rhat {
    pub fn value(&self) -> Option<f64> {
        match self {
            Rhat::Value(v) => Some(*v),
            Rhat::Degenerate => None,
        }
    }
}

/// Split-R̂: each chain is cut into halves (the middle draw of an odd-length
/// chain is dropped), all chains truncated to the shortest. With `m` half
/// chains of length `n`, `W` the mean within-half variance and `B/n` the
/// variance of half-chain means, `R̂ = √(((n-1)/n W + B/n) / W)`.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<Rhat> {
    if chains.len() < 2 {
        return Err(Error::InvalidParameter("R̂ needs at least two chains".into()));
    }
    let len = chains.iter().map(Vec::len).min().unwrap_or(0);
    if len < 10 {
        return Err(Error::InvalidParameter(format!(
            "R̂ needs at least 10 draws per chain, shortest has {len}"
        )));
    }
    let half = len / 2;
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[len - half..len]])
        .collect();
    let m = halves.len() as f64;
    let n = half as f64;
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let between = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let within = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    let scale = grand.abs().max(1.0);
    if !(within > (f64::EPSILON * scale).powi(2)) {
        return Ok(Rhat::Degenerate);
    }
    let var_plus = (n - 1.0) / n * within + between / n;
    Ok(Rhat::Value((var_plus / within).sqrt()))
}

/// Per-parameter split-R̂ over all chains in `draws`.
pub fn rhat(draws: &PosteriorDraws) -> Result<Vec<Rhat>> {
    (0..draws.dim())
        .map(|k| split_rhat(&draws.chains_for(k)))
        .collect()
}

/// Largest finite R̂; degenerate parameters are skipped.
pub fn max_rhat(values: &[Rhat]) -> Option<f64> {
    values
        .iter()
        .filter_map(Rhat::value)
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal(x: &[f64]) -> f64 {
        -0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn init_wide(dim: usize) -> impl FnMut(&mut ChaCha8Rng) -> Vec<f64> {
        move |rng| {
            (0..dim)
                .map(|_| 3.0 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
                .collect()
        }
    }

    #[test]
    fn config_validation() {
        let mut c = SamplerConfig::default();
        c.n_chains = 2;
        assert!(c.validate().is_err());
        let mut c = SamplerConfig::default();
        c.burn_in = c.n_iterations;
        assert!(c.validate().is_err());
        let mut c = SamplerConfig::default();
        c.thinning = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn retained_count_matches_arithmetic() {
        let config = SamplerConfig {
            n_chains: 3,
            n_iterations: 1_037,
            burn_in: 100,
            thinning: 7,
            seed: 3,
            ..Default::default()
        };
        let draws = run(std_normal, init_wide(2), 2, &config).unwrap();
        assert_eq!(config.retained_per_chain(), 133);
        assert_eq!(draws.len(), 3 * 133);
        assert!(draws.log_density.iter().all(|v| v.is_finite()));
        assert!(draws.generation.iter().all(|&g| g > 100 && (g - 100) % 7 == 0));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let config = SamplerConfig {
            n_chains: 4,
            n_iterations: 2_000,
            burn_in: 500,
            thinning: 5,
            seed: 42,
            ..Default::default()
        };
        let a = run(std_normal, init_wide(3), 3, &config).unwrap();
        let b = run(std_normal, init_wide(3), 3, &config).unwrap();
        assert_eq!(a, b);
        let c = run(
            std_normal,
            init_wide(3),
            3,
            &SamplerConfig {
                seed: 43,
                ..config
            },
        )
        .unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn respects_support() {
        let boxed = |x: &[f64]| {
            if x.iter().all(|v| (0.0..=1.0).contains(v)) {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        };
        let init = |rng: &mut ChaCha8Rng| (0..3).map(|_| rng.random_range(-0.5..1.5)).collect();
        let config = SamplerConfig {
            n_chains: 4,
            n_iterations: 5_000,
            burn_in: 1_000,
            thinning: 5,
            seed: 1,
            ..Default::default()
        };
        let draws = run(boxed, init, 3, &config).unwrap();
        assert!(draws.draws.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn initialization_failure() {
        let config = SamplerConfig {
            n_chains: 3,
            n_iterations: 10,
            burn_in: 0,
            thinning: 1,
            ..Default::default()
        };
        let err = run(|_: &[f64]| f64::NEG_INFINITY, init_wide(2), 2, &config).unwrap_err();
        assert!(matches!(err, Error::Initialization { .. }));
    }

    #[test]
    fn rhat_of_iid_chains_is_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let r = split_rhat(&chains).unwrap().value().unwrap();
        assert!((0.99..=1.05).contains(&r), "R̂ = {r}");
    }

    #[test]
    fn rhat_flags_separated_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let chains: Vec<Vec<f64>> = [-10.0, 10.0]
            .iter()
            .map(|mu| {
                (0..500)
                    .map(|_| mu + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                    .collect()
            })
            .collect();
        let r = split_rhat(&chains).unwrap().value().unwrap();
        assert!(r > 5.0, "R̂ = {r}");
    }

    #[test]
    fn constant_chains_are_degenerate() {
        let chains = vec![vec![1.5; 50]; 3];
        assert_eq!(split_rhat(&chains).unwrap(), Rhat::Degenerate);
        assert!(split_rhat(&[vec![1.0; 50]]).is_err());
        assert!(split_rhat(&[vec![1.0; 5], vec![2.0; 5]]).is_err());
    }
}
