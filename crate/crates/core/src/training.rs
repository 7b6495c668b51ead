//! Trainers: CD-k, CD-PercLoss, HashCRBM exact gradients and the
//! per-label logistic regression baseline, driven by mini-batch SGD with
//! validation-based early stopping.
//!
//! Every sampling trainer draws each case's randomness from its own stream,
//! derived from `(seed, epoch, case index)`, so the samples a case sees do
//! not depend on which other cases share its batch.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::bits::{BitVector, CandidateSet};
use crate::error::{check_len, CrbmError, Result};
use crate::hashing::SpectralHashIndex;
use crate::linalg::{log_sum_exp, sigmoid, softmax, softplus};
use crate::metrics::per_label_error;
use crate::model::{Conditioned, CrbmParams, Gradient};
use crate::rng::{derive_seed, seeded};

/// Standard deviation of the Gaussian weight initialization.
pub const INIT_STD: f64 = 0.01;

const INIT_STREAM: u64 = 0x1417;
const SHUFFLE_STREAM: u64 = 0x5a0f;

/// One training or evaluation pair: conditioning input and target.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Vec<f64>,
    pub target: BitVector,
}

impl Example {
    pub fn new(input: Vec<f64>, target: BitVector) -> Self {
        Example { input, target }
    }
}

/// A case inside a mini-batch together with the seed of its random stream.
#[derive(Debug, Clone, Copy)]
pub struct Case<'a> {
    pub target: &'a BitVector,
    pub input: &'a [f64],
    pub stream: u64,
}

impl<'a> Case<'a> {
    pub fn new(example: &'a Example, stream: u64) -> Self {
        Case {
            target: &example.target,
            input: &example.input,
            stream,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// CRBM trained with contrastive divergence.
    Cd,
    /// CRBM trained on the perceptron loss against stochastic-search predictions.
    PercLoss,
    /// CRBM trained by exact gradients over hashed candidate sets.
    HashCrbm,
    /// Independent per-output logistic regressors.
    LogReg,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Cd,
        ModelKind::PercLoss,
        ModelKind::HashCrbm,
        ModelKind::LogReg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cd => "cd",
            ModelKind::PercLoss => "percloss",
            ModelKind::HashCrbm => "hashcrbm",
            ModelKind::LogReg => "logreg",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = CrbmError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CrbmError::invalid(format!("unknown model kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Gibbs steps for CD and for the training-time stochastic search.
    pub gibbs_k: usize,
    /// Mean-field steps used when predicting (validation and test).
    pub predict_k: usize,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub hidden_units: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2f64.powi(-6),
            batch_size: 128,
            max_epochs: 50,
            gibbs_k: 1,
            predict_k: 10,
            patience: 10,
            hidden_units: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(CrbmError::invalid("learning_rate must be finite and non-negative"));
        }
        if self.batch_size == 0 || self.gibbs_k == 0 || self.predict_k == 0 {
            return Err(CrbmError::invalid(
                "batch_size, gibbs_k and predict_k must be at least 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    Patience,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxEpochs => "max_epochs",
            StopReason::Patience => "patience",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-case training objective of each epoch, measured before each
    /// batch's update.
    pub train_objective: Vec<f64>,
    /// Validation task error (%) after each epoch.
    pub valid_error: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainReport {
    pub fn best_valid_error(&self) -> f64 {
        self.valid_error[self.best_epoch - 1]
    }

    /// `key=value` lines.
    pub fn to_records(&self) -> Vec<(String, String)> {
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|x| format!("{x:.6}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        vec![
            ("epochs".into(), self.valid_error.len().to_string()),
            ("best_epoch".into(), self.best_epoch.to_string()),
            ("best_valid_error".into(), format!("{:.6}", self.best_valid_error())),
            ("stop_reason".into(), self.stop_reason.to_string()),
            ("train_objective".into(), join(&self.train_objective)),
            ("valid_error".into(), join(&self.valid_error)),
        ]
    }
}

fn require_batch(batch: &[Case<'_>]) -> Result<()> {
    if batch.is_empty() {
        Err(CrbmError::invalid("mini-batch is empty"))
    } else {
        Ok(())
    }
}

fn conditioned<'p>(params: &'p CrbmParams, case: &Case<'_>) -> Result<Conditioned<'p>> {
    check_len("target v", params.n_visible(), case.target.len())?;
    params.condition(case.input)
}

/// Adds `weight · (∂F(v⁺)/∂θ − ∂F(v⁻)/∂θ)`; identical vectors contribute
/// nothing.
fn accumulate_contrast(
    grad: &mut Gradient,
    cond: &Conditioned<'_>,
    u: &[f64],
    positive: &BitVector,
    negative: &BitVector,
    weight: f64,
) {
    if positive == negative {
        return;
    }
    let (pos, neg) = (positive.to_real(), negative.to_real());
    grad.accumulate_free_energy(cond, u, [(weight, pos.as_slice()), (-weight, neg.as_slice())]);
}

/// Batch mean of `∂F(v, u) − ∂F(v⁻, u)` for given negatives.
pub fn contrastive_gradient(
    batch: &[Case<'_>],
    negatives: &[BitVector],
    params: &CrbmParams,
) -> Result<Gradient> {
    require_batch(batch)?;
    check_len("negatives", batch.len(), negatives.len())?;
    let weight = 1.0 / batch.len() as f64;
    let mut grad = Gradient::zeros_for(params);
    for (case, neg) in batch.iter().zip(negatives) {
        let cond = conditioned(params, case)?;
        check_len("negative v", params.n_visible(), neg.len())?;
        accumulate_contrast(&mut grad, &cond, case.input, case.target, neg, weight);
    }
    Ok(grad)
}

/// Negative samples `v_k` of a CD-k chain started at each target.
pub fn cd_negatives(batch: &[Case<'_>], k: usize, params: &CrbmParams) -> Result<Vec<BitVector>> {
    batch
        .iter()
        .map(|case| {
            let cond = conditioned(params, case)?;
            cond.cd_negative_sample(case.target, k, &mut seeded(case.stream))
        })
        .collect()
}

/// Stochastic-search predictions `v̂` for each case.
pub fn percloss_predictions(
    batch: &[Case<'_>],
    k: usize,
    params: &CrbmParams,
) -> Result<Vec<BitVector>> {
    batch
        .iter()
        .map(|case| {
            conditioned(params, case)?
                .stochastic_search(k, &mut seeded(case.stream))
                .map(|(v, _)| v)
        })
        .collect()
}

/// CD-k gradient: batch mean of `∂F(v,u) − ∂F(v_k,u)`.
pub fn cd_update(batch: &[Case<'_>], k: usize, params: &CrbmParams) -> Result<Gradient> {
    require_batch(batch)?;
    let negatives = cd_negatives(batch, k, params)?;
    contrastive_gradient(batch, &negatives, params)
}

/// Perceptron-loss gradient: batch mean of `∂F(v,u) − ∂F(v̂,u)` with `v̂`
/// from a `k`-step stochastic search, held constant.
pub fn percloss_update(batch: &[Case<'_>], k: usize, params: &CrbmParams) -> Result<Gradient> {
    require_batch(batch)?;
    let predictions = percloss_predictions(batch, k, params)?;
    contrastive_gradient(batch, &predictions, params)
}

/// Diagnostic `L_CD`: batch mean of `F(v,u) − F(v_k,u)`.
pub fn cd_loss_metric(batch: &[Case<'_>], k: usize, params: &CrbmParams) -> Result<f64> {
    require_batch(batch)?;
    let negatives = cd_negatives(batch, k, params)?;
    free_energy_gap(batch, &negatives, params)
}

fn free_energy_gap(batch: &[Case<'_>], negatives: &[BitVector], params: &CrbmParams) -> Result<f64> {
    let mut total = 0.0;
    for (case, neg) in batch.iter().zip(negatives) {
        let cond = conditioned(params, case)?;
        total += cond.free_energy_bits(case.target) - cond.free_energy_bits(neg);
    }
    Ok(total / batch.len() as f64)
}

/// `V(u) = retrieve(u) ∪ {v}`.
pub fn training_candidates(
    index: &SpectralHashIndex,
    input: &[f64],
    target: &BitVector,
) -> Result<CandidateSet> {
    let mut set = index.retrieve(input)?;
    set.insert(target.clone())?;
    Ok(set)
}

/// Adds `weight · ∂(−log p(v|u))/∂θ` under the conditional restricted to
/// `candidates` and returns the case's negative log-likelihood.
fn accumulate_restricted_nll(
    grad: &mut Gradient,
    cond: &Conditioned<'_>,
    u: &[f64],
    target: &BitVector,
    candidates: &CandidateSet,
    weight: f64,
) -> Result<f64> {
    if !candidates.contains(target) {
        return Err(CrbmError::invalid("target missing from its candidate set"));
    }
    let members: Vec<Vec<f64>> = candidates.iter().map(|c| c.to_real()).collect();
    let logits: Vec<f64> = members.iter().map(|v| -cond.free_energy(v)).collect();
    let probs = softmax(&logits);
    let target_real = target.to_real();
    let nll = cond.free_energy(&target_real) + log_sum_exp(&logits);
    let terms = std::iter::once((weight, target_real.as_slice())).chain(
        members
            .iter()
            .zip(&probs)
            .map(|(v, &p)| (-weight * p, v.as_slice())),
    );
    grad.accumulate_free_energy(cond, u, terms);
    Ok(nll)
}

/// Exact gradient of the restricted conditional NLL, batch mean. Each
/// case's candidate set is the index retrieval plus its own target.
pub fn hash_crbm_update(
    batch: &[(&[f64], &BitVector)],
    index: &SpectralHashIndex,
    params: &CrbmParams,
) -> Result<Gradient> {
    let candidates = batch
        .iter()
        .map(|(u, v)| training_candidates(index, u, v))
        .collect::<Result<Vec<_>>>()?;
    let cases: Vec<(&[f64], &BitVector, &CandidateSet)> = batch
        .iter()
        .zip(&candidates)
        .map(|((u, v), c)| (*u, *v, c))
        .collect();
    Ok(hash_crbm_update_with_candidates(&cases, params)?.0)
}

/// As [`hash_crbm_update`] with precomputed candidate sets, each of which
/// must contain its target. Also returns the mean NLL.
pub fn hash_crbm_update_with_candidates(
    batch: &[(&[f64], &BitVector, &CandidateSet)],
    params: &CrbmParams,
) -> Result<(Gradient, f64)> {
    if batch.is_empty() {
        return Err(CrbmError::invalid("mini-batch is empty"));
    }
    let weight = 1.0 / batch.len() as f64;
    let mut grad = Gradient::zeros_for(params);
    let mut nll = 0.0;
    for &(u, v, candidates) in batch {
        check_len("target v", params.n_visible(), v.len())?;
        let cond = params.condition(u)?;
        nll += accumulate_restricted_nll(&mut grad, &cond, u, v, candidates, weight)?;
    }
    Ok((grad, nll * weight))
}

/// Gradient of the mean summed per-output cross-entropy of
/// `σ(b^v + uᵀW^uv)`; touches only `b_v` and `w_uv`.
pub fn logreg_update(batch: &[(&[f64], &BitVector)], params: &CrbmParams) -> Result<Gradient> {
    Ok(logreg_update_with_loss(batch, params)?.0)
}

fn logreg_update_with_loss(
    batch: &[(&[f64], &BitVector)],
    params: &CrbmParams,
) -> Result<(Gradient, f64)> {
    if batch.is_empty() {
        return Err(CrbmError::invalid("mini-batch is empty"));
    }
    if !params.has_uv {
        return Err(CrbmError::invalid("logistic regression needs the input→visible block"));
    }
    let weight = 1.0 / batch.len() as f64;
    let mut grad = Gradient::zeros_for(params);
    let mut loss = 0.0;
    for &(u, v) in batch {
        check_len("target v", params.n_visible(), v.len())?;
        let logits = params.condition(u)?.visible_bias().to_vec();
        let residual: Vec<f64> = logits
            .iter()
            .zip(v.iter())
            .map(|(&z, bit)| sigmoid(z) - f64::from(u8::from(bit)))
            .collect();
        loss += logits
            .iter()
            .zip(v.iter())
            .map(|(&z, bit)| if bit { softplus(-z) } else { softplus(z) })
            .sum::<f64>();
        crate::linalg::axpy(weight, &residual, &mut grad.b_v);
        grad.w_uv.add_outer(weight, u, &residual);
    }
    Ok((grad, loss * weight))
}

/// `θ − η·grad`.
pub fn sgd_step(params: &CrbmParams, grad: &Gradient, learning_rate: f64) -> Result<CrbmParams> {
    let mut next = params.clone();
    next.sgd_step(grad, learning_rate)?;
    Ok(next)
}

/// Fresh parameters for a model kind: `N(0, 0.01²)` weights, zero biases.
pub fn initial_params(
    kind: ModelKind,
    n_visible: usize,
    n_input: usize,
    config: &TrainConfig,
) -> CrbmParams {
    let mut rng = seeded(derive_seed(config.seed, &[INIT_STREAM]));
    match kind {
        ModelKind::LogReg => CrbmParams::random(n_visible, n_input, 0, true, false, INIT_STD, &mut rng),
        _ => CrbmParams::random(
            n_visible,
            n_input,
            config.hidden_units,
            true,
            true,
            INIT_STD,
            &mut rng,
        ),
    }
}

/// The prediction rule matched to each model kind.
#[derive(Debug, Clone, Copy)]
pub struct Predictor<'a> {
    pub kind: ModelKind,
    pub params: &'a CrbmParams,
    pub predict_k: usize,
    pub index: Option<&'a SpectralHashIndex>,
}

impl Predictor<'_> {
    /// CD and PercLoss use mean-field, HashCRBM uses restricted marginal modes
    /// (logistic thresholding when retrieval is empty), LogReg thresholds
    /// `σ(b^v + uᵀW^uv)`.
    pub fn predict(&self, u: &[f64]) -> Result<BitVector> {
        let cond = self.params.condition(u)?;
        match self.kind {
            ModelKind::Cd | ModelKind::PercLoss => cond.mean_field(self.predict_k).map(|(v, _)| v),
            ModelKind::HashCrbm => {
                let index = self
                    .index
                    .ok_or_else(|| CrbmError::invalid("hashcrbm prediction needs an index"))?;
                let candidates = index.retrieve(u)?;
                if candidates.is_empty() {
                    Ok(logistic_threshold(&cond))
                } else {
                    cond.marginal_modes(&candidates)
                }
            }
            ModelKind::LogReg => Ok(logistic_threshold(&cond)),
        }
    }

    pub fn predict_all<'e>(&self, inputs: impl IntoIterator<Item = &'e [f64]>) -> Result<Vec<BitVector>> {
        inputs.into_iter().map(|u| self.predict(u)).collect()
    }

    /// Per-coordinate error (%) on `examples`.
    pub fn error(&self, examples: &[Example]) -> Result<f64> {
        let preds = self.predict_all(examples.iter().map(|e| e.input.as_slice()))?;
        let targets: Vec<BitVector> = examples.iter().map(|e| e.target.clone()).collect();
        per_label_error(&preds, &targets)
    }
}

fn logistic_threshold(cond: &Conditioned<'_>) -> BitVector {
    BitVector::threshold(
        &cond.visible_bias().iter().map(|&x| sigmoid(x)).collect::<Vec<_>>(),
        0.5,
    )
}

/// Mini-batch SGD with early stopping on the validation task error. Returns
/// the parameters of the best validation epoch.
pub fn train(
    kind: ModelKind,
    train_set: &[Example],
    valid_set: &[Example],
    config: &TrainConfig,
    index: Option<&SpectralHashIndex>,
) -> Result<(CrbmParams, TrainReport)> {
    config.validate()?;
    let first = train_set
        .first()
        .ok_or_else(|| CrbmError::invalid("training set is empty"))?;
    if valid_set.is_empty() {
        return Err(CrbmError::invalid("validation set is empty"));
    }
    let (n_visible, n_input) = (first.target.len(), first.input.len());
    for e in train_set.iter().chain(valid_set) {
        check_len("example target", n_visible, e.target.len())?;
        check_len("example input", n_input, e.input.len())?;
    }
    let candidates = match kind {
        ModelKind::HashCrbm => {
            let index = index.ok_or_else(|| CrbmError::invalid("hashcrbm training needs an index"))?;
            check_len("index target width", n_visible, index.n_visible())?;
            Some(
                train_set
                    .iter()
                    .map(|e| training_candidates(index, &e.input, &e.target))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
        _ => None,
    };

    let mut params = initial_params(kind, n_visible, n_input, config);
    let mut best = params.clone();
    let mut report = TrainReport {
        train_objective: Vec::new(),
        valid_error: Vec::new(),
        best_epoch: 0,
        stop_reason: StopReason::MaxEpochs,
    };
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut since_best = 0usize;

    for epoch in 0..config.max_epochs {
        let mut shuffle_rng = seeded(derive_seed(config.seed, &[SHUFFLE_STREAM, epoch as u64]));
        order.shuffle(&mut shuffle_rng);
        let mut objective = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (grad, batch_objective) = match kind {
                ModelKind::Cd | ModelKind::PercLoss => {
                    let cases: Vec<Case<'_>> = chunk
                        .iter()
                        .map(|&i| {
                            Case::new(&train_set[i], derive_seed(config.seed, &[epoch as u64, i as u64]))
                        })
                        .collect();
                    let negatives = if kind == ModelKind::Cd {
                        cd_negatives(&cases, config.gibbs_k, &params)?
                    } else {
                        percloss_predictions(&cases, config.gibbs_k, &params)?
                    };
                    let gap = free_energy_gap(&cases, &negatives, &params)?;
                    (contrastive_gradient(&cases, &negatives, &params)?, gap)
                }
                ModelKind::HashCrbm => {
                    let sets = candidates.as_ref().expect("computed above");
                    let cases: Vec<(&[f64], &BitVector, &CandidateSet)> = chunk
                        .iter()
                        .map(|&i| (train_set[i].input.as_slice(), &train_set[i].target, &sets[i]))
                        .collect();
                    hash_crbm_update_with_candidates(&cases, &params)?
                }
                ModelKind::LogReg => {
                    let cases: Vec<(&[f64], &BitVector)> = chunk
                        .iter()
                        .map(|&i| (train_set[i].input.as_slice(), &train_set[i].target))
                        .collect();
                    logreg_update_with_loss(&cases, &params)?
                }
            };
            objective += batch_objective * chunk.len() as f64;
            params.sgd_step(&grad, config.learning_rate)?;
        }
        report.train_objective.push(objective / train_set.len() as f64);

        let predictor = Predictor {
            kind,
            params: &params,
            predict_k: config.predict_k,
            index,
        };
        let error = predictor.error(valid_set)?;
        report.valid_error.push(error);
        if report.best_epoch == 0 || error < report.best_valid_error() {
            report.best_epoch = epoch + 1;
            best.clone_from(&params);
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience > 0 && since_best >= config.patience {
                report.stop_reason = StopReason::Patience;
                break;
            }
        }
    }
    if report.best_epoch == 0 {
        return Err(CrbmError::invalid("max_epochs must be at least 1"));
    }
    Ok((best, report))
}
