//! Config-driven pipeline behind the command-line tool: estimation, impulse
//! responses, convergence diagnostics and synthetic data generation.
//!
//! Relative paths in a config file resolve against the file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{self, Period, SeriesSpec, Transform};
use crate::demc::{self, PosteriorDraws, Rhat, SamplerConfig};
use crate::error::{Error, Result};
use crate::identification::{self, NormalizedDraw, ShockLabel, DEFAULT_LABEL_MARGIN};
use crate::irf::{self, IrfBands, IrfDraw};
use crate::posterior::{ParamLayout, PosteriorTarget, StructuralModel};
use crate::prior::{MinnesotaConfig, Prior, ShapePriorConfig};
use crate::sgt::{SgtDensity, SgtParams};
use crate::var::{self, Dataset, VarParams};

pub const DRAWS_FILE: &str = "draws.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const LABELS_FILE: &str = "labels.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BANDS_FILE: &str = "irf_bands.csv";
pub const RHAT_FILE: &str = "rhat.csv";
pub const SIM_DATA_FILE: &str = "data.csv";
pub const TRUTH_FILE: &str = "truth.json";

/// Largest R̂ still counted as converged.
pub const RHAT_THRESHOLD: f64 = 1.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    pub model: ModelConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub labels: LabelConfig,
    #[serde(default)]
    pub irf: IrfConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<TruthConfig>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Period>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<Period>,
    pub series: Vec<SeriesSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub lags: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    #[serde(default)]
    pub minnesota: MinnesotaOverrides,
    #[serde(default)]
    pub shape: ShapePriorConfig,
}

/// Minnesota hyperparameters; unset values keep the defaults. The scales
/// `s_i` always come from AR fits on the estimation sample.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinnesotaOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa4: Option<f64>,
}

impl MinnesotaOverrides {
    pub fn apply(&self, mut config: MinnesotaConfig) -> MinnesotaConfig {
        if let Some(k) = self.kappa1 {
            config.kappa1 = k;
        }
        if let Some(k) = self.kappa2 {
            config.kappa2 = k;
        }
        if let Some(k) = self.kappa3 {
            config.kappa3 = k;
        }
        if let Some(k) = self.kappa4 {
            config.kappa4 = k;
        }
        config
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelConfig {
    /// Label name to the series whose impact row decides it.
    #[serde(default)]
    pub targets: BTreeMap<String, String>,
    #[serde(default = "default_margin")]
    pub min_margin: f64,
}

fn default_margin() -> f64 {
    DEFAULT_LABEL_MARGIN
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            targets: BTreeMap::new(),
            min_margin: DEFAULT_LABEL_MARGIN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrfConfig {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Series whose responses are cumulated. Defaults to every
    /// `log_diff_pct` series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cumulate: Option<Vec<String>>,
}

fn default_horizon() -> usize {
    irf::DEFAULT_HORIZON
}

impl Default for IrfConfig {
    fn default() -> Self {
        IrfConfig {
            horizon: irf::DEFAULT_HORIZON,
            cumulate: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_out() }
    }
}

/// Data-generating model for `simulate`. Matrices are lists of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub n_obs: usize,
    #[serde(default = "default_burn")]
    pub burn: usize,
    /// Falls back to the sampler seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub intercept: Vec<f64>,
    pub lags: Vec<Vec<Vec<f64>>>,
    pub impact: Vec<Vec<f64>>,
    pub shapes: Vec<SgtParams>,
}

fn default_burn() -> usize {
    200
}

fn matrix_from_rows(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!("{what} must be {n}x{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl TruthConfig {
    pub fn n(&self) -> usize {
        self.intercept.len()
    }

    pub fn var_params(&self) -> Result<VarParams> {
        let n = self.n();
        let lags = self
            .lags
            .iter()
            .enumerate()
            .map(|(l, m)| matrix_from_rows(m, n, &format!("lag matrix {}", l + 1)))
            .collect::<Result<Vec<_>>>()?;
        VarParams::new(DVector::from_column_slice(&self.intercept), lags)
    }

    pub fn impact_matrix(&self) -> Result<DMatrix<f64>> {
        matrix_from_rows(&self.impact, self.n(), "impact")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::Config("simulate: empty intercept".into()));
        }
        if self.lags.is_empty() {
            return Err(Error::Config("simulate: at least one lag matrix is required".into()));
        }
        if self.n_obs == 0 {
            return Err(Error::Config("simulate: n_obs must be positive".into()));
        }
        if self.shapes.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "simulate: {} shapes for {n} variables",
                self.shapes.len()
            )));
        }
        for s in &self.shapes {
            s.validate()?;
        }
        let params = self.var_params()?;
        let impact = self.impact_matrix()?;
        if impact.clone().lu().determinant() == 0.0 {
            return Err(Error::InvalidParameter("simulate: singular impact matrix".into()));
        }
        let rho = var::spectral_radius(&params);
        if !(rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "simulate: explosive system (spectral radius {rho})"
            )));
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.base_dir = base_dir.into();
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    pub fn data_config(&self) -> Result<&DataConfig> {
        self.data
            .as_ref()
            .ok_or_else(|| Error::Config("missing [data] section".into()))
    }

    /// Series names in model order.
    pub fn variable_names(&self) -> Result<Vec<String>> {
        Ok(self.data_config()?.series.iter().map(|s| s.name.clone()).collect())
    }

    pub fn layout(&self) -> Result<ParamLayout> {
        Ok(ParamLayout::new(self.data_config()?.series.len(), self.model.lags))
    }

    fn variable_index(&self, name: &str) -> Result<usize> {
        self.variable_names()?
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::Config(format!("unknown variable '{name}'")))
    }

    /// Label name to zero-based variable index.
    pub fn label_targets(&self) -> Result<BTreeMap<String, usize>> {
        self.labels
            .targets
            .iter()
            .map(|(label, var)| {
                self.variable_index(var)
                    .map(|i| (label.clone(), i))
                    .map_err(|_| {
                        Error::Config(format!("label '{label}' targets unknown variable '{var}'"))
                    })
            })
            .collect()
    }

    pub fn cumulate_flags(&self) -> Result<Vec<bool>> {
        let series = &self.data_config()?.series;
        match &self.irf.cumulate {
            None => Ok(series
                .iter()
                .map(|s| s.transform == Transform::LogDiffPct)
                .collect()),
            Some(names) => {
                let mut flags = vec![false; series.len()];
                for name in names {
                    flags[self.variable_index(name)?] = true;
                }
                Ok(flags)
            }
        }
    }

    /// Percent for `log_diff_pct` series (already in percent), basis
    /// points for everything else.
    pub fn display_scale(&self) -> Result<Vec<f64>> {
        Ok(self
            .data_config()?
            .series
            .iter()
            .map(|s| if s.transform == Transform::LogDiffPct { 1.0 } else { 100.0 })
            .collect())
    }

    /// Checks for everything `estimate` and `irf` need, run before any
    /// computation.
    pub fn validate(&self) -> Result<()> {
        if self.model.lags == 0 {
            return Err(Error::Config("model.lags must be at least 1".into()));
        }
        let data = self.data_config()?;
        if data.series.is_empty() {
            return Err(Error::Config("no series declared".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &data.series {
            if !seen.insert(&s.name) {
                return Err(Error::Config(format!("duplicate series name '{}'", s.name)));
            }
        }
        if let (Some(a), Some(b)) = (data.start, data.end) {
            if a > b {
                return Err(Error::Config(format!("sample start {a} after end {b}")));
            }
        }
        self.label_targets()?;
        self.cumulate_flags()?;
        if !(self.labels.min_margin >= 1.0) {
            return Err(Error::Config("labels.min_margin must be at least 1".into()));
        }
        self.sampler.validate()?;
        self.prior.shape.validate()?;
        self.prior
            .minnesota
            .apply(MinnesotaConfig::new(vec![1.0; data.series.len()]))
            .validate()?;
        Ok(())
    }

    /// Load and window the estimation sample.
    pub fn load_data(&self) -> Result<Dataset> {
        let cfg = self.data_config()?;
        let specs: Vec<SeriesSpec> = cfg
            .series
            .iter()
            .map(|s| SeriesSpec {
                source: s.source.as_ref().map(|p| self.resolve(p)),
                ..s.clone()
            })
            .collect();
        let mut dataset = data::load(self.resolve(&cfg.path), &specs)?;
        if cfg.start.is_some() || cfg.end.is_some() {
            let start = cfg.start.unwrap_or(dataset.index[0]);
            let end = cfg.end.unwrap_or(*dataset.index.last().expect("non-empty"));
            dataset = data::window(&dataset, start, end)?;
        }
        dataset.check_lag_order(self.model.lags)?;
        Ok(dataset)
    }
}

/// Sampler starting points: OLS coefficients plus noise of twice their
/// standard errors, the inverse Cholesky factor of the OLS residual
/// covariance with 10% row-scaled noise, `λ` uniform on (-0.9, 0.9) and
/// `(log p, log q)` from the prior, redrawn until admissible.
pub struct Initializer {
    layout: ParamLayout,
    pi: Vec<f64>,
    pi_sd: Vec<f64>,
    b_inv: DMatrix<f64>,
    row_sd: Vec<f64>,
    shape: ShapePriorConfig,
}

impl Initializer {
    pub fn new(data: &Dataset, p: usize, shape: ShapePriorConfig) -> Result<Self> {
        let fit = var::ols(&data.values, p)?;
        let chol = fit
            .sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Degenerate("OLS residual covariance is not positive definite".into()))?;
        let b_inv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::Singular("Cholesky factor".into()))?;
        let n = data.n_vars();
        let row_sd = (0..n)
            .map(|i| 0.1 * (b_inv.row(i).norm_squared() / n as f64).sqrt())
            .collect();
        Ok(Initializer {
            layout: ParamLayout::new(n, p),
            pi: fit.params.to_vec(),
            pi_sd: fit.std_errors.iter().map(|s| 2.0 * s).collect(),
            b_inv,
            row_sd,
            shape,
        })
    }

    /// One starting point in sampling coordinates.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.layout.n;
        let mut theta = Vec::with_capacity(self.layout.dim());
        for (m, s) in self.pi.iter().zip(&self.pi_sd) {
            let z: f64 = StandardNormal.sample(rng);
            theta.push(m + s * z);
        }
        for j in 0..n {
            for i in 0..n {
                let z: f64 = StandardNormal.sample(rng);
                theta.push(self.b_inv[(i, j)] + self.row_sd[i] * z);
            }
        }
        for _ in 0..n {
            let lambda: f64 = rng.random_range(-0.9..0.9);
            let (logp, logq) = self.draw_shape(rng);
            theta.extend_from_slice(&[lambda.atanh(), logp, logq]);
        }
        theta
    }

    fn draw_shape<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let c = &self.shape;
        for _ in 0..1000 {
            let zp: f64 = StandardNormal.sample(rng);
            let zq: f64 = StandardNormal.sample(rng);
            let (logp, logq) = (c.logp_mean + c.logp_sd * zp, c.logq_mean + c.logq_sd * zq);
            if SgtParams::new(0.0, logp.exp(), logq.exp()).is_ok() {
                return (logp, logq);
            }
        }
        (2f64.ln(), 2.5f64.ln())
    }
}

/// Map raw sampler output (sampling coordinates) to canonical natural
/// coordinates: `λ` itself, normalized column order and signs of `B`.
pub fn canonicalize(draws: &PosteriorDraws, layout: ParamLayout) -> Result<PosteriorDraws> {
    draws.map_rows(layout.names(), |row| {
        let mut theta = row.to_vec();
        layout.to_natural(&mut theta);
        let model = layout.unpack(&theta)?;
        let (canonical, _) = identification::normalize_model(&model)?;
        Ok(layout.pack(&canonical))
    })
}

/// Normalized draw per row of a natural-coordinate draws table.
pub fn normalized_draws(
    draws: &PosteriorDraws,
    layout: ParamLayout,
) -> Result<Vec<(StructuralModel, NormalizedDraw)>> {
    draws
        .rows()
        .map(|row| identification::normalize_model(&layout.unpack(row)?))
        .collect()
}

pub fn write_draws(draws: &PosteriorDraws, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_to_io(e, path))?;
    let mut header = vec!["chain".to_string(), "generation".into(), "log_density".into()];
    header.extend(draws.names.iter().cloned());
    w.write_record(&header)?;
    for (i, row) in draws.rows().enumerate() {
        let mut record = Vec::with_capacity(row.len() + 3);
        record.push(draws.chain[i].to_string());
        record.push(draws.generation[i].to_string());
        record.push(draws.log_density[i].to_string());
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_draws(path: &Path) -> Result<PosteriorDraws> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_to_io(e, path))?;
    let header = r.headers()?.clone();
    let fixed = ["chain", "generation", "log_density"];
    if header.len() < 4 || header.iter().take(3).ne(fixed.iter().copied()) {
        return Err(Error::Data(format!(
            "{}: expected columns chain,generation,log_density followed by parameters",
            path.display()
        )));
    }
    let mut draws = PosteriorDraws::empty(header.iter().skip(3).map(String::from).collect());
    let bad = |line: usize, what: &str| Error::Data(format!("{}: row {line}: bad {what}", path.display()));
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let chain: usize = record[0].parse().map_err(|_| bad(line + 1, "chain"))?;
        let generation: usize = record[1].parse().map_err(|_| bad(line + 1, "generation"))?;
        let lp: f64 = record[2].parse().map_err(|_| bad(line + 1, "log_density"))?;
        let row = record
            .iter()
            .skip(3)
            .map(|v| v.parse::<f64>().map_err(|_| bad(line + 1, "value")))
            .collect::<Result<Vec<_>>>()?;
        draws.push(&row, chain, generation, lp);
    }
    Ok(draws)
}

fn csv_to_io(e: csv::Error, path: &Path) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhatEntry {
    pub parameter: String,
    pub rhat: Rhat,
}

pub fn rhat_table(draws: &PosteriorDraws) -> Result<Vec<RhatEntry>> {
    Ok(draws
        .names
        .iter()
        .cloned()
        .zip(demc::rhat(draws)?)
        .map(|(parameter, rhat)| RhatEntry { parameter, rhat })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_draws: usize,
    pub n_chains: usize,
    pub acceptance: Vec<f64>,
    pub rhat: Vec<RhatEntry>,
    pub max_rhat: Option<f64>,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    /// Per shock, share of draws with `p q > 2`.
    pub prob_finite_variance: Vec<f64>,
    /// Per shock, posterior median of `p q`.
    pub median_tail_exponent: Vec<f64>,
}

/// Outcome of labeling, as written to the labels report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LabelReport {
    Ok { labels: BTreeMap<String, LabelEntry> },
    Error { kind: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    /// One-based shock number.
    pub shock: usize,
    pub margin: f64,
    pub median_impact: f64,
    pub impact_table: Vec<f64>,
}

impl From<&ShockLabel> for LabelEntry {
    fn from(l: &ShockLabel) -> Self {
        LabelEntry {
            shock: l.shock_index + 1,
            margin: l.margin,
            median_impact: l.median_impact,
            impact_table: l.impact_table.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    /// SHA-256 of the effective configuration in TOML form.
    pub config_sha256: String,
    pub seed: u64,
}

pub fn version_string() -> String {
    format!("sgtvar-v{}", env!("CARGO_PKG_VERSION"))
}

fn write_manifest(config: &RunConfig, command: &str, dir: &Path) -> Result<()> {
    let digest = Sha256::digest(config.to_toml()?.as_bytes());
    let manifest = Manifest {
        command: command.into(),
        version: version_string(),
        config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        seed: config.sampler.seed,
    };
    write_json(&manifest, &dir.join(MANIFEST_FILE))
}

#[derive(Clone, Debug)]
pub struct EstimateOutput {
    /// Canonical draws in natural coordinates.
    pub draws: PosteriorDraws,
    pub summary: Summary,
    pub labels: LabelReport,
    pub dir: PathBuf,
}

/// Load data, sample the posterior, normalize every draw and write
/// `draws.csv`, `summary.json`, `labels.json` and `manifest.json` into
/// `out_dir`.
pub fn cmd_estimate(config: &RunConfig, out_dir: &Path) -> Result<EstimateOutput> {
    config.validate()?;
    let dataset = config.load_data()?;
    let p = config.model.lags;
    let minnesota = config
        .prior
        .minnesota
        .apply(MinnesotaConfig::from_data(&dataset.values, p)?);
    let prior = Prior::new(minnesota, config.prior.shape.clone(), p)?;
    let target = PosteriorTarget::new(&dataset, p, prior)?;
    let layout = target.layout;
    let init = Initializer::new(&dataset, p, config.prior.shape.clone())?;

    let raw = demc::run(
        |x| target.log_density(x),
        |rng| init.draw(rng),
        layout.dim(),
        &config.sampler,
    )?;
    let draws = canonicalize(&raw, layout)?;

    create_dir(out_dir)?;
    write_draws(&draws, &out_dir.join(DRAWS_FILE))?;

    let normalized = normalized_draws(&draws, layout)?;
    let summary = summarize(&draws, &normalized)?;
    write_json(&summary, &out_dir.join(SUMMARY_FILE))?;

    let labels = label_report(config, &normalized)?;
    write_json(&labels, &out_dir.join(LABELS_FILE))?;
    write_manifest(config, "estimate", out_dir)?;

    Ok(EstimateOutput {
        draws,
        summary,
        labels,
        dir: out_dir.to_path_buf(),
    })
}

fn summarize(
    draws: &PosteriorDraws,
    normalized: &[(StructuralModel, NormalizedDraw)],
) -> Result<Summary> {
    let rhat = rhat_table(draws)?;
    let values: Vec<Rhat> = rhat.iter().map(|e| e.rhat).collect();
    let max_rhat = demc::max_rhat(&values);
    let converged = max_rhat.is_some_and(|r| r <= RHAT_THRESHOLD);
    let warning = (!converged).then(|| match max_rhat {
        Some(r) => format!("max R̂ = {r:.4} exceeds {RHAT_THRESHOLD}; chains have not converged"),
        None => "R̂ is undefined for every parameter".to_string(),
    });
    let shapes: Vec<Vec<SgtParams>> = normalized.iter().map(|(_, d)| d.shapes.clone()).collect();
    let prob_finite_variance = identification::prob_finite_variance(&shapes)?;
    let n = shapes[0].len();
    let median_tail_exponent = (0..n)
        .map(|i| {
            let mut a: Vec<f64> = shapes.iter().map(|s| s[i].tail_exponent()).collect();
            a.sort_by(f64::total_cmp);
            irf::quantile_sorted(&a, 0.5)
        })
        .collect();
    Ok(Summary {
        n_draws: draws.len(),
        n_chains: draws.n_chains(),
        acceptance: draws.acceptance.clone(),
        rhat,
        max_rhat,
        converged,
        warning,
        prob_finite_variance,
        median_tail_exponent,
    })
}

fn label_report(
    config: &RunConfig,
    normalized: &[(StructuralModel, NormalizedDraw)],
) -> Result<LabelReport> {
    let targets = config.label_targets()?;
    if targets.is_empty() {
        return Ok(LabelReport::Ok {
            labels: BTreeMap::new(),
        });
    }
    let draws: Vec<NormalizedDraw> = normalized.iter().map(|(_, d)| d.clone()).collect();
    Ok(
        match identification::label_shocks(&draws, &targets, config.labels.min_margin) {
            Ok(labels) => LabelReport::Ok {
                labels: labels.iter().map(|(k, v)| (k.clone(), v.into())).collect(),
            },
            Err(e @ Error::AmbiguousLabel(_)) => LabelReport::Error {
                kind: "ambiguous".into(),
                message: e.to_string(),
            },
            Err(e @ Error::LabelCollision(_)) => LabelReport::Error {
                kind: "collision".into(),
                message: e.to_string(),
            },
            Err(e) => return Err(e),
        },
    )
}

/// Posterior IRF bands from a draws file; writes `irf_bands.csv`.
pub fn cmd_irf(config: &RunConfig, draws_path: &Path, out_dir: &Path) -> Result<IrfBands> {
    config.validate()?;
    let layout = config.layout()?;
    let draws = read_draws(draws_path)?;
    if draws.names != layout.names() {
        return Err(Error::DimensionMismatch(format!(
            "{} has {} parameters; the config implies {} (n = {}, p = {})",
            draws_path.display(),
            draws.dim(),
            layout.dim(),
            layout.n,
            layout.p
        )));
    }
    let irf_draws: Vec<IrfDraw> = normalized_draws(&draws, layout)?
        .into_iter()
        .map(|(m, d)| IrfDraw {
            var: m.var,
            impact: d.impact,
        })
        .collect();
    let bands = irf::posterior_bands(&irf_draws, config.irf.horizon, &config.cumulate_flags()?)?;
    create_dir(out_dir)?;
    let path = out_dir.join(BANDS_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    bands.write_csv(
        std::io::BufWriter::new(file),
        &config.variable_names()?,
        &config.display_scale()?,
    )?;
    Ok(bands)
}

/// R̂ per parameter of a draws file; writes `rhat.csv`.
pub fn cmd_diagnose(draws_path: &Path, out_dir: &Path) -> Result<Vec<RhatEntry>> {
    let draws = read_draws(draws_path)?;
    let table = rhat_table(&draws)?;
    create_dir(out_dir)?;
    let path = out_dir.join(RHAT_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_to_io(e, &path))?;
    w.write_record(["parameter", "rhat"])?;
    for e in &table {
        let v = e.rhat.value().map_or("degenerate".to_string(), |v| v.to_string());
        w.write_record([e.parameter.as_str(), v.as_str()])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(table)
}

/// Truth record written next to simulated data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub intercept: Vec<f64>,
    pub lags: Vec<Vec<Vec<f64>>>,
    pub impact: Vec<Vec<f64>>,
    pub shapes: Vec<SgtParams>,
    /// `impact` and `shapes` after column normalization, comparable with
    /// canonical posterior draws.
    pub normalized_impact: Vec<Vec<f64>>,
    pub normalized_shapes: Vec<SgtParams>,
    pub seed: u64,
}

impl Truth {
    pub fn var_params(&self) -> Result<VarParams> {
        TruthConfig {
            n_obs: 1,
            burn: 0,
            seed: None,
            intercept: self.intercept.clone(),
            lags: self.lags.clone(),
            impact: self.impact.clone(),
            shapes: self.shapes.clone(),
        }
        .var_params()
    }

    pub fn normalized_impact_matrix(&self) -> Result<DMatrix<f64>> {
        matrix_from_rows(&self.normalized_impact, self.intercept.len(), "normalized impact")
    }
}

/// Simulate a dataset from `[simulate]`, stamped monthly from 2000-01 with
/// columns `y1..yn`. Writes `data.csv`, `truth.json` and `manifest.json`.
pub fn cmd_simulate(config: &RunConfig, out_dir: &Path) -> Result<(Dataset, Truth)> {
    let truth = config
        .simulate
        .as_ref()
        .ok_or_else(|| Error::Config("missing [simulate] section".into()))?;
    truth.validate()?;
    let params = truth.var_params()?;
    let impact = truth.impact_matrix()?;
    let seed = truth.seed.unwrap_or(config.sampler.seed);
    let dataset = simulate_dataset(&params, &impact, &truth.shapes, truth.n_obs, truth.burn, seed)?;
    let norm = identification::normalize(&impact, &truth.shapes)?;
    let record = Truth {
        intercept: truth.intercept.clone(),
        lags: truth.lags.clone(),
        impact: truth.impact.clone(),
        shapes: truth.shapes.clone(),
        normalized_impact: matrix_rows(&norm.impact),
        normalized_shapes: norm.shapes,
        seed,
    };
    create_dir(out_dir)?;
    data::write(&dataset, out_dir.join(SIM_DATA_FILE))?;
    write_json(&record, &out_dir.join(TRUTH_FILE))?;
    write_manifest(config, "simulate", out_dir)?;
    Ok((dataset, record))
}

/// `n_obs` observations after `burn` discarded ones; shocks are drawn
/// period by period, variable by variable, from one seeded stream.
pub fn simulate_dataset(
    params: &VarParams,
    impact: &DMatrix<f64>,
    shapes: &[SgtParams],
    n_obs: usize,
    burn: usize,
    seed: u64,
) -> Result<Dataset> {
    let n = params.n();
    if shapes.len() != n {
        return Err(Error::DimensionMismatch(format!("{} shapes for {n} variables", shapes.len())));
    }
    let dists = shapes
        .iter()
        .map(|s| SgtDensity::new(*s))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = n_obs + burn;
    let mut shocks = DMatrix::zeros(total, n);
    for t in 0..total {
        for (i, d) in dists.iter().enumerate() {
            shocks[(t, i)] = d.sample(&mut rng);
        }
    }
    var::simulate(params, impact, &shocks, burn, Period::month(2000, 1))
}
