//! The generalization-measure catalog and its per-run evaluation.

pub mod calibration;
pub mod curvature;
pub mod info;
pub mod norms;
pub mod optimization;
pub mod pac_bayes;
pub mod sharpness;

use std::cell::OnceCell;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::autodiff::{log_softmax, Objective, ParamVector, Tensor};
use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::sandbox::{
    evaluate, evaluate_logits, BatchObjective, DatasetBundle, LabeledBatch, Mode, ModelSpec, RunRecord,
};

use curvature::PowerIteration;
use optimization::GradHistory;
use pac_bayes::PacBayesVariant;
use sharpness::NoiseShape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    BaselineOutput,
    NormMargin,
    Sharpness,
    Optimization,
    InformationCriteria,
    Calibration,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::BaselineOutput,
        Category::NormMargin,
        Category::Sharpness,
        Category::Optimization,
        Category::InformationCriteria,
        Category::Calibration,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::BaselineOutput => "baseline_output",
            Category::NormMargin => "norm_margin",
            Category::Sharpness => "sharpness",
            Category::Optimization => "optimization",
            Category::InformationCriteria => "information_criteria",
            Category::Calibration => "calibration",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Category::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| invalid(format!("unknown category `{s}`")))
    }
}

use Category::*;

/// Every measure name with its category, in report order.
pub const CATALOG: [(&str, Category); 42] = [
    ("vcdim", BaselineOutput),
    ("params", BaselineOutput),
    ("magnitude", BaselineOutput),
    ("cross_entropy", BaselineOutput),
    ("negative_entropy", BaselineOutput),
    ("inverse_margin_p10", NormMargin),
    ("l2_over_margin_p10", NormMargin),
    ("l1_over_margin_p10", NormMargin),
    ("margin_normalized_param_norm", NormMargin),
    ("spectral_norm_per_layer", NormMargin),
    ("spec_sum", NormMargin),
    ("spec_prod", NormMargin),
    ("frobenius_distance", NormMargin),
    ("path_norm", NormMargin),
    ("fisher_rao_norm", NormMargin),
    ("sharpness", Sharpness),
    ("adaptive_sharpness", Sharpness),
    ("sharpness_magnitude", Sharpness),
    ("sharpness_magnitude_init", Sharpness),
    ("sharpness_magflat", Sharpness),
    ("pac_bayes_bound", Sharpness),
    ("pac_bayes_magnitude", Sharpness),
    ("pac_bayes_magnitude_init", Sharpness),
    ("pac_bayes_magflat", Sharpness),
    ("flatness_proxy", Sharpness),
    ("hessian_top_eigenvalue", Sharpness),
    ("hessian_trace", Sharpness),
    ("gradient_noise_var", Optimization),
    ("gradient_noise_final_var", Optimization),
    ("gradient_noise_scale", Optimization),
    ("gradient_norm", Optimization),
    ("input_gradient_norm", Optimization),
    ("aic_bias_term", InformationCriteria),
    ("aicc_bias_term", InformationCriteria),
    ("tic_bias_term", InformationCriteria),
    ("tic_bias_term_bound", InformationCriteria),
    ("waic_bias_term", InformationCriteria),
    ("ece", Calibration),
    ("mce", Calibration),
    ("ace", Calibration),
    ("reliability_diagram", Calibration),
    ("temperature_scaling", Calibration),
];

pub fn category_of(name: &str) -> Option<Category> {
    CATALOG.iter().find(|(n, _)| *n == name).map(|(_, c)| *c)
}

pub fn catalog_listing() -> String {
    Category::ALL
        .iter()
        .map(|c| {
            let names: Vec<&str> = CATALOG.iter().filter(|(_, k)| k == c).map(|(n, _)| *n).collect();
            format!("{c}: {}", names.join(", "))
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Resolve a comma-separated filter of category and measure names to
/// catalog names, in catalog order.
pub fn select(filter: &str) -> Result<Vec<&'static str>> {
    let mut keep = [false; CATALOG.len()];
    for item in filter.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Ok(cat) = item.parse::<Category>() {
            CATALOG.iter().enumerate().filter(|(_, (_, c))| *c == cat).for_each(|(i, _)| keep[i] = true);
        } else if let Some(i) = CATALOG.iter().position(|(n, _)| *n == item) {
            keep[i] = true;
        } else {
            return Err(Error::UnknownMeasure { name: item.to_string(), catalog: catalog_listing() });
        }
    }
    Ok(CATALOG.iter().zip(keep).filter(|(_, k)| *k).map(|((n, _), _)| *n).collect())
}

pub fn all_names() -> Vec<&'static str> {
    CATALOG.iter().map(|(n, _)| *n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub name: String,
    pub category: Category,
    #[serde(with = "crate::serde_real::scalar")]
    pub value: f64,
    pub status: MeasureStatus,
    pub compute_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl MeasureValue {
    /// An `ok` entry, or a `failed` one when `value` is not finite.
    pub fn ok(name: &str, value: f64, compute_seed: u64) -> Result<Self> {
        let category =
            category_of(name).ok_or_else(|| Error::UnknownMeasure { name: name.into(), catalog: catalog_listing() })?;
        if !value.is_finite() {
            return Ok(Self {
                name: name.into(),
                category,
                value,
                status: MeasureStatus::Failed,
                compute_seed,
                detail: Some("non-finite value".into()),
            });
        }
        Ok(Self { name: name.into(), category, value, status: MeasureStatus::Ok, compute_seed, detail: None })
    }

    pub fn failed(name: &str, compute_seed: u64, detail: impl Into<String>) -> Result<Self> {
        let category =
            category_of(name).ok_or_else(|| Error::UnknownMeasure { name: name.into(), catalog: catalog_listing() })?;
        Ok(Self {
            name: name.into(),
            category,
            value: f64::NAN,
            status: MeasureStatus::Failed,
            compute_seed,
            detail: Some(detail.into()),
        })
    }

    pub fn is_ok(&self) -> bool {
        self.status == MeasureStatus::Ok
    }
}

/// Reduction over a list of values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    Mean,
    Max,
    Median,
    Std,
    HarmonicMean,
}

impl Aggregate {
    /// Callers pass a non-empty slice.
    pub fn apply(self, xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        match self {
            Aggregate::Mean => xs.iter().sum::<f64>() / n,
            Aggregate::Max => xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            Aggregate::Median => {
                let mut s = xs.to_vec();
                s.sort_by(f64::total_cmp);
                let m = s.len() / 2;
                if s.len() % 2 == 1 {
                    s[m]
                } else {
                    0.5 * (s[m - 1] + s[m])
                }
            }
            Aggregate::Std => {
                let mean = xs.iter().sum::<f64>() / n;
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
            }
            Aggregate::HarmonicMean => n / xs.iter().map(|x| 1.0 / x).sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorMode {
    McDropout,
    WeightNoise,
}

/// Posterior used by the PAC-Bayes and WAIC measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PosteriorSpec {
    /// `None` picks MC dropout when the model has dropout, weight noise
    /// otherwise.
    pub mode: Option<PosteriorMode>,
    pub samples: usize,
    pub sigma_post: f64,
    pub sigma_prior: f64,
    pub delta: f64,
    /// Bound sample count; `None` uses the measure-pool size.
    pub n: Option<usize>,
}

impl Default for PosteriorSpec {
    fn default() -> Self {
        Self { mode: None, samples: 8, sigma_post: 0.01, sigma_prior: 0.1, delta: 0.05, n: None }
    }
}

impl PosteriorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(invalid("posterior samples must be ≥ 2"));
        }
        if !(self.sigma_post > 0.0 && self.sigma_prior > 0.0) {
            return Err(invalid("posterior and prior σ must be > 0"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("δ must lie in (0, 1)"));
        }
        if self.n == Some(0) {
            return Err(invalid("bound sample count n must be ≥ 1"));
        }
        Ok(())
    }

    pub fn resolved_mode(&self, spec: &ModelSpec) -> PosteriorMode {
        self.mode.unwrap_or(if spec.dropout_p > 0.0 { PosteriorMode::McDropout } else { PosteriorMode::WeightNoise })
    }
}

/// Measure hyperparameters. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    pub seed: u64,
    pub margin_percentile: f64,
    pub batch_size: usize,
    pub curvature_batch: usize,
    pub sam_rho: f64,
    pub adaptive_rho_min: f64,
    pub adaptive_rho_max: f64,
    pub adaptive_radii: usize,
    pub noise_r: f64,
    pub noise_samples: usize,
    pub noise_aggregate: Aggregate,
    pub hutchinson_samples: usize,
    pub power_iters: usize,
    pub power_tol: f64,
    pub spectral_iters: usize,
    pub spectral_tol: f64,
    pub calibration_bins: usize,
    pub flatness_lambda: f64,
    pub flatness_aggregate: Aggregate,
    pub grad_norm_aggregate: Aggregate,
    pub final_var_batches: usize,
    pub diag_exact_limit: usize,
    pub posterior: PosteriorSpec,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            margin_percentile: 0.10,
            batch_size: 32,
            curvature_batch: 128,
            sam_rho: 0.05,
            adaptive_rho_min: 1e-3,
            adaptive_rho_max: 1e-1,
            adaptive_radii: 5,
            noise_r: 0.1,
            noise_samples: 3,
            noise_aggregate: Aggregate::Max,
            hutchinson_samples: 50,
            power_iters: 100,
            power_tol: 1e-6,
            spectral_iters: 500,
            spectral_tol: 1e-10,
            calibration_bins: 15,
            flatness_lambda: 1e-3,
            flatness_aggregate: Aggregate::Mean,
            grad_norm_aggregate: Aggregate::Mean,
            final_var_batches: 10,
            diag_exact_limit: 512,
            posterior: PosteriorSpec::default(),
        }
    }
}

impl MeasureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin_percentile > 0.0 && self.margin_percentile < 1.0) {
            return Err(invalid("margin_percentile must lie in (0, 1)"));
        }
        if self.batch_size == 0 || self.curvature_batch == 0 || self.calibration_bins == 0 {
            return Err(invalid("batch sizes and calibration_bins must be ≥ 1"));
        }
        if self.adaptive_radii < 2 || !(self.adaptive_rho_min > 0.0 && self.adaptive_rho_max > self.adaptive_rho_min) {
            return Err(invalid("adaptive sharpness needs ≥ 2 radii with 0 < min < max"));
        }
        if self.sam_rho.is_nan()
            || self.sam_rho <= 0.0
            || self.noise_r.is_nan()
            || self.noise_r < 0.0
            || self.noise_samples == 0
        {
            return Err(invalid("sam_rho > 0, noise_r ≥ 0 and noise_samples ≥ 1 required"));
        }
        if self.hutchinson_samples == 0 || self.power_iters == 0 || self.spectral_iters == 0 {
            return Err(invalid("iteration and sample counts must be ≥ 1"));
        }
        if self.flatness_lambda.is_nan() || self.flatness_lambda <= 0.0 {
            return Err(invalid("flatness_lambda must be > 0"));
        }
        self.posterior.validate()
    }
}

/// W·ln W for a parameter count W.
pub fn vcdim(w: usize) -> Result<f64> {
    if w == 0 {
        return Err(invalid("vcdim of a model without parameters"));
    }
    let w = w as f64;
    Ok(w * w.ln())
}

/// mean over rows of Σ_k p_k ln p_k.
pub fn negative_entropy(logits: &Tensor) -> f64 {
    let (n, _) = logits.dims2().unwrap_or((0, 0));
    let total: f64 = (0..n)
        .map(|i| {
            let lp = log_softmax(logits.row(i));
            lp.iter().map(|l| l.exp() * l).sum::<f64>()
        })
        .sum();
    total / n.max(1) as f64
}

type Res<T> = std::result::Result<T, String>;

fn s<T>(r: Result<T>) -> Res<T> {
    r.map_err(|e| e.to_string())
}

fn cached<T>(cell: &OnceCell<Res<T>>, f: impl FnOnce() -> Res<T>) -> Res<&T> {
    cell.get_or_init(f).as_ref().map_err(Clone::clone)
}

/// Measures that share one random stream report the same seed.
fn seed_group(name: &str) -> &str {
    match name {
        "sharpness_magnitude_init" => "sharpness_magnitude",
        "spec_sum" | "spec_prod" | "spectral_norm_per_layer" => "spectral",
        "hessian_top_eigenvalue" | "hessian_trace" => name,
        "tic_bias_term" | "tic_bias_term_bound" => "tic",
        other => other,
    }
}

pub fn compute_seed(cfg: &MeasureConfig, run_id: &str, name: &str) -> u64 {
    rng::derive_seed(cfg.seed, &[rng::label_hash(run_id), rng::label_hash(seed_group(name))])
}

struct Ctx<'a> {
    run: &'a RunRecord,
    spec: &'a ModelSpec,
    pool: &'a LabeledBatch,
    cfg: &'a MeasureConfig,
    params: &'a ParamVector,
    theta: Vec<f64>,
    chunks: Vec<LabeledBatch>,
    curvature: LabeledBatch,
    logits: OnceCell<Res<Tensor>>,
    margins: OnceCell<Res<norms::MarginStats>>,
    sample_grads: OnceCell<Res<Vec<Vec<f64>>>>,
    batch_grads: OnceCell<Res<GradHistory>>,
    spectral: OnceCell<Res<norms::SpectralSummary>>,
    noise_std: OnceCell<Res<f64>>,
    calibration: OnceCell<Res<calibration::Calibration>>,
    tic_diags: OnceCell<Res<(Vec<f64>, Vec<f64>)>>,
}

impl<'a> Ctx<'a> {
    fn new(run: &'a RunRecord, pool: &'a LabeledBatch, cfg: &'a MeasureConfig) -> Result<Self> {
        let chunks = pool.chunks(cfg.batch_size)?;
        let curvature = pool.head(cfg.curvature_batch.min(pool.len()))?;
        Ok(Self {
            run,
            spec: &run.model,
            pool,
            cfg,
            params: &run.final_params,
            theta: run.final_params.flatten(),
            chunks,
            curvature,
            logits: OnceCell::new(),
            margins: OnceCell::new(),
            sample_grads: OnceCell::new(),
            batch_grads: OnceCell::new(),
            spectral: OnceCell::new(),
            noise_std: OnceCell::new(),
            calibration: OnceCell::new(),
            tic_diags: OnceCell::new(),
        })
    }

    fn seed(&self, name: &str) -> u64 {
        compute_seed(self.cfg, &self.run.run_id, name)
    }

    fn logits(&self) -> Res<&Tensor> {
        cached(&self.logits, || s(self.spec.logits(self.params, self.pool.inputs())))
    }

    fn margins(&self) -> Res<&norms::MarginStats> {
        cached(&self.margins, || {
            let z = self.logits()?;
            s(norms::margin_stats(z, self.pool.labels(), self.cfg.margin_percentile))
        })
    }

    fn sample_grads(&self) -> Res<&Vec<Vec<f64>>> {
        cached(&self.sample_grads, || {
            s(self.spec.per_sample_grads(self.params, self.pool))
                .map(|gs| gs.iter().map(ParamVector::flatten).collect())
        })
    }

    fn batch_grads(&self) -> Res<&GradHistory> {
        cached(&self.batch_grads, || {
            let grads = self
                .chunks
                .iter()
                .map(|b| s(self.spec.grad(self.params, b, Mode::Eval)).map(|(_, g)| g.flatten()))
                .collect::<Res<Vec<_>>>()?;
            Ok(GradHistory::new(grads))
        })
    }

    fn spectral(&self) -> Res<&norms::SpectralSummary> {
        cached(&self.spectral, || {
            let seed = self.seed("spectral");
            let sigmas = self
                .spec
                .weight_matrices(self.params)
                .into_iter()
                .enumerate()
                .map(|(l, w)| {
                    s(norms::spectral_norm(
                        w,
                        self.cfg.spectral_iters,
                        self.cfg.spectral_tol,
                        rng::derive_seed(seed, &[l as u64]),
                    ))
                })
                .collect::<Res<Vec<_>>>()?;
            s(norms::spectral_summary(&sigmas))
        })
    }

    fn pool_objective(&self) -> BatchObjective<'_> {
        BatchObjective::new(self.spec, self.pool)
    }

    fn noise(&self, shape: NoiseShape, name: &str) -> Res<f64> {
        let mut r = rng::labeled_stream(self.seed(name), "noise");
        let obj = self.pool_objective();
        let out = s(sharpness::noise_sharpness(
            &obj,
            self.params,
            shape,
            self.cfg.noise_r,
            self.cfg.noise_samples,
            self.cfg.noise_aggregate,
            &mut r,
        ))?;
        if out.discarded > 0 {
            log::debug!("{name}: {} perturbation samples discarded", out.discarded);
        }
        Ok(out.raw)
    }

    fn calibration(&self) -> Res<&calibration::Calibration> {
        cached(&self.calibration, || {
            Ok(calibration::calibration_measures(self.logits()?, self.pool.labels(), self.cfg.calibration_bins))
        })
    }

    fn pac_bayes(&self, variant: PacBayesVariant, name: &str) -> Res<f64> {
        let post = &self.cfg.posterior;
        let scales = pac_bayes::posterior_scales(variant, self.params, post.sigma_post);
        let prior_mean = match variant {
            PacBayesVariant::MagnitudeInit => self.run.init_params.flatten(),
            _ => vec![0.0; self.theta.len()],
        };
        if prior_mean.len() != self.theta.len() {
            return Err("initial parameters do not match the final layout".into());
        }
        let kl = pac_bayes::kl_diag_gaussian(&self.theta, &prior_mean, &scales, post.sigma_prior);
        let mut r = rng::labeled_stream(self.seed(name), "posterior");
        let layout = self.params.layout();
        let mut risk = 0.0;
        for _ in 0..post.samples {
            let draw = pac_bayes::posterior_draw(variant, &self.theta, &scales, post.sigma_post, &mut r);
            let p = s(ParamVector::from_flat(&layout, &draw))?;
            risk += 1.0 - s(evaluate(self.spec, &p, self.pool))?.accuracy;
        }
        risk /= post.samples as f64;
        s(pac_bayes::mcallester(risk, kl, post.n.unwrap_or(self.pool.len()), post.delta))
    }

    fn tic_diags(&self) -> Res<&(Vec<f64>, Vec<f64>)> {
        cached(&self.tic_diags, || {
            let j = s(info::empirical_fisher_diag(self.sample_grads()?))?;
            let obj = self.pool_objective();
            let mut r = rng::labeled_stream(self.seed("tic"), "diag");
            let i = s(curvature::hessian_diagonal(
                &obj,
                &self.theta,
                self.cfg.diag_exact_limit,
                self.cfg.hutchinson_samples,
                &mut r,
            ))?;
            Ok((j, i))
        })
    }

    fn waic(&self, name: &str) -> Res<f64> {
        let post = &self.cfg.posterior;
        let seed = self.seed(name);
        let mut r = rng::labeled_stream(seed, "posterior");
        let layout = self.params.layout();
        let mut loglik = Vec::with_capacity(post.samples);
        for k in 0..post.samples {
            let out = match post.resolved_mode(self.spec) {
                PosteriorMode::McDropout => {
                    s(self.spec.forward_loss(self.params, self.pool, Mode::Train { seed, step: k as u64 }))?
                }
                PosteriorMode::WeightNoise => {
                    let scales = vec![post.sigma_post; self.theta.len()];
                    let draw = pac_bayes::posterior_draw(
                        PacBayesVariant::Bound,
                        &self.theta,
                        &scales,
                        post.sigma_post,
                        &mut r,
                    );
                    let p = s(ParamVector::from_flat(&layout, &draw))?;
                    s(self.spec.forward_loss(&p, self.pool, Mode::Eval))?
                }
            };
            loglik.push(out.per_sample.into_iter().map(|ce| -ce).collect());
        }
        s(info::waic_bias(&loglik))
    }

    fn final_var(&self, name: &str) -> Res<f64> {
        let mut r = rng::labeled_stream(self.seed(name), "fresh_batches");
        let size = self.cfg.batch_size.min(self.pool.len());
        let grads = (0..self.cfg.final_var_batches)
            .map(|_| {
                let idx = index::sample(&mut r, self.pool.len(), size).into_vec();
                let b = s(self.pool.select(&idx))?;
                s(self.spec.grad(self.params, &b, Mode::Eval)).map(|(_, g)| g.flatten())
            })
            .collect::<Res<Vec<_>>>()?;
        s(GradHistory::new(grads).mean_variance())
    }

    fn eval(&self, name: &str) -> Res<f64> {
        let cfg = self.cfg;
        let k = self.spec.param_count();
        match name {
            "vcdim" => s(vcdim(k)),
            "params" => Ok(k as f64),
            "magnitude" => Ok(self.params.l2_norm()),
            "cross_entropy" => Ok(evaluate_logits(self.logits()?.clone(), self.pool.labels()).mean_ce),
            "negative_entropy" => Ok(negative_entropy(self.logits()?)),
            "inverse_margin_p10" => Ok(norms::margin_norms(self.params, self.margins()?).inverse_margin_p10),
            "l2_over_margin_p10" => Ok(norms::margin_norms(self.params, self.margins()?).l2_over_margin_p10),
            "l1_over_margin_p10" => Ok(norms::margin_norms(self.params, self.margins()?).l1_over_margin_p10),
            "margin_normalized_param_norm" => {
                Ok(norms::margin_norms(self.params, self.margins()?).margin_normalized_param_norm)
            }
            "spectral_norm_per_layer" => Ok(self.spectral()?.spectral_norm_per_layer),
            "spec_sum" => Ok(self.spectral()?.spec_sum),
            "spec_prod" => Ok(self.spectral()?.spec_prod),
            "frobenius_distance" => s(norms::frobenius_distance(self.params, &self.run.init_params)),
            "path_norm" => s(norms::path_norm(self.spec, self.params)),
            "fisher_rao_norm" => s(norms::fisher_rao_norm(&self.theta, self.sample_grads()?)),
            "sharpness" | "adaptive_sharpness" => {
                let objs: Vec<BatchObjective> = self.chunks.iter().map(|b| BatchObjective::new(self.spec, b)).collect();
                let refs: Vec<&dyn Objective> = objs.iter().map(|o| o as &dyn Objective).collect();
                if name == "sharpness" {
                    s(sharpness::sam_sharpness(&refs, &self.theta, cfg.sam_rho))
                } else {
                    let radii = sharpness::log_spaced(cfg.adaptive_rho_min, cfg.adaptive_rho_max, cfg.adaptive_radii);
                    s(sharpness::adaptive_sharpness(&refs, &self.theta, &radii))
                }
            }
            "sharpness_magnitude" => {
                let raw = *cached(&self.noise_std, || self.noise(NoiseShape::TensorStd, "sharpness_magnitude"))?;
                Ok(raw * sharpness::magnitude_factor(&self.theta))
            }
            "sharpness_magnitude_init" => {
                let raw = *cached(&self.noise_std, || self.noise(NoiseShape::TensorStd, "sharpness_magnitude"))?;
                let theta0 = self.run.init_params.flatten();
                let factor = if theta0.len() == self.theta.len() {
                    sharpness::init_magnitude_factor(&self.theta, &theta0)
                } else {
                    sharpness::magnitude_factor(&self.theta)
                };
                Ok(raw * factor)
            }
            "sharpness_magflat" => self.noise(NoiseShape::Magnitude, name),
            "pac_bayes_bound" => self.pac_bayes(PacBayesVariant::Bound, name),
            "pac_bayes_magnitude" => self.pac_bayes(PacBayesVariant::Magnitude, name),
            "pac_bayes_magnitude_init" => self.pac_bayes(PacBayesVariant::MagnitudeInit, name),
            "pac_bayes_magflat" => self.pac_bayes(PacBayesVariant::Magflat, name),
            "flatness_proxy" => {
                s(curvature::flatness_proxy(self.batch_grads()?.grads(), cfg.flatness_lambda, cfg.flatness_aggregate))
            }
            "hessian_top_eigenvalue" => {
                let obj = BatchObjective::new(self.spec, &self.curvature);
                let mut r = rng::labeled_stream(self.seed(name), "power");
                let pi = PowerIteration { iters: cfg.power_iters, tol: cfg.power_tol };
                s(curvature::hessian_top_eigenvalue(&obj, &self.theta, pi, &mut r))
            }
            "hessian_trace" => {
                let obj = BatchObjective::new(self.spec, &self.curvature);
                let mut r = rng::labeled_stream(self.seed(name), "hutchinson");
                s(curvature::hessian_trace(&obj, &self.theta, cfg.hutchinson_samples, &mut r))
            }
            "gradient_noise_var" => {
                let snaps = self.run.grad_trace.epoch_snapshots.iter().map(|x| x.0.clone()).collect();
                s(GradHistory::new(snaps).mean_variance())
            }
            "gradient_noise_final_var" => self.final_var(name),
            "gradient_noise_scale" => s(self.batch_grads()?.noise_scale(optimization::EPS_GNS)),
            "gradient_norm" => s(self.batch_grads()?.norm(cfg.grad_norm_aggregate)),
            "input_gradient_norm" => s(self.spec.input_grad_norm(self.params, self.pool)),
            "aic_bias_term" => Ok(info::aic_bias(k)),
            "aicc_bias_term" => s(info::aicc_bias(k, self.pool.len())),
            "tic_bias_term" => {
                let (j, i) = self.tic_diags()?;
                s(info::tic_bias(j, i, info::EPS_TIC))
            }
            "tic_bias_term_bound" => {
                let (j, i) = self.tic_diags()?;
                s(info::tic_bias_bound(j, i, info::EPS_TIC))
            }
            "waic_bias_term" => self.waic(name),
            "ece" => Ok(self.calibration()?.ece),
            "mce" => Ok(self.calibration()?.mce),
            "ace" => Ok(self.calibration()?.ace),
            "reliability_diagram" => Ok(self.calibration()?.reliability_diagram),
            "temperature_scaling" => {
                Ok(calibration::temperature_scale(self.logits()?, self.pool.labels(), cfg.calibration_bins).ece_after)
            }
            other => Err(format!("no evaluator for `{other}`")),
        }
    }
}

/// Evaluate `names` on one run, using the training pool as the measure pool.
///
/// Every requested name yields exactly one entry; anything that cannot be
/// computed comes back with status `failed` and a detail message.
pub fn compute_measures(
    run: &RunRecord,
    dataset: &DatasetBundle,
    cfg: &MeasureConfig,
    names: &[&str],
) -> Result<Vec<MeasureValue>> {
    cfg.validate()?;
    for n in names {
        if category_of(n).is_none() {
            return Err(Error::UnknownMeasure { name: (*n).into(), catalog: catalog_listing() });
        }
    }
    if !run.is_done() {
        let why = format!("run failed: {}", run.failure.as_deref().unwrap_or("unknown"));
        return names.iter().map(|n| MeasureValue::failed(n, compute_seed(cfg, &run.run_id, n), why.clone())).collect();
    }
    let ctx = Ctx::new(run, &dataset.train, cfg)?;
    names
        .iter()
        .map(|n| {
            let seed = ctx.seed(n);
            match ctx.eval(n) {
                Ok(v) => MeasureValue::ok(n, v, seed),
                Err(msg) => MeasureValue::failed(n, seed, msg),
            }
        })
        .collect()
}
