//! Sampling and prediction procedures for a conditioned CRBM.
//!
//! Gibbs steps update the hidden layer first and then the visible layer, so
//! a chain started at a data vector uses that vector's hidden representation
//! immediately.

use rand::Rng;

use crate::bits::{BitVector, CandidateSet};
use crate::error::{check_len, CrbmError, Result};
use crate::model::{Conditioned, CrbmParams};

/// The iterates scored by a prediction procedure, in generation order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTrace {
    pub iterates: Vec<Vec<f64>>,
    pub free_energies: Vec<f64>,
    /// Index of the lowest free energy, first one on ties.
    pub chosen_index: usize,
}

impl PredictionTrace {
    fn from_iterates(cond: &Conditioned<'_>, iterates: Vec<Vec<f64>>) -> Self {
        let free_energies: Vec<f64> = iterates.iter().map(|v| cond.free_energy(v)).collect();
        let chosen_index = argmin_first(&free_energies);
        PredictionTrace {
            iterates,
            free_energies,
            chosen_index,
        }
    }

    pub fn chosen(&self) -> &[f64] {
        &self.iterates[self.chosen_index]
    }
}

fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in values.iter().enumerate().skip(1) {
        if x < values[best] {
            best = i;
        }
    }
    best
}

fn sample_bits<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> BitVector {
    BitVector::from_bools(probs.iter().map(|&p| rng.random::<f64>() < p))
}

fn require_steps(k: usize) -> Result<()> {
    if k == 0 {
        Err(CrbmError::invalid("number of steps k must be at least 1"))
    } else {
        Ok(())
    }
}

impl Conditioned<'_> {
    /// One block Gibbs step from a (possibly real-valued) visible state:
    /// `h ~ p(h|v,u)`, then `v' ~ p(v|h,u)`. Returns `(v', h)`.
    pub fn gibbs_step<R: Rng + ?Sized>(&self, v: &[f64], rng: &mut R) -> (BitVector, BitVector) {
        let h = sample_bits(&self.hidden_probs(v), rng);
        let v_next = sample_bits(&self.visible_probs(&h.to_real()), rng);
        (v_next, h)
    }

    /// Visible state after `k` Gibbs steps started at `v`.
    pub fn cd_negative_sample<R: Rng + ?Sized>(
        &self,
        v: &BitVector,
        k: usize,
        rng: &mut R,
    ) -> Result<BitVector> {
        require_steps(k)?;
        let mut state = v.clone();
        for _ in 0..k {
            state = self.gibbs_step(&state.to_real(), rng).0;
        }
        Ok(state)
    }

    /// Starting visible state for prediction: the logistic probabilities
    /// when `u` connects to `v`, otherwise `None`.
    fn logistic_start(&self) -> Option<Vec<f64>> {
        self.params().has_uv.then(|| {
            self.visible_bias()
                .iter()
                .map(|&x| crate::linalg::sigmoid(x))
                .collect()
        })
    }

    /// Runs `k` Gibbs rounds from the prediction start state and returns the
    /// binary iterate with the lowest free energy. The start state is not a
    /// candidate.
    pub fn stochastic_search<R: Rng + ?Sized>(
        &self,
        k: usize,
        rng: &mut R,
    ) -> Result<(BitVector, PredictionTrace)> {
        require_steps(k)?;
        let mut state = match self.logistic_start() {
            Some(probs) => probs,
            None => (0..self.params().n_visible())
                .map(|_| if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 })
                .collect(),
        };
        let mut iterates = Vec::with_capacity(k);
        for _ in 0..k {
            state = self.gibbs_step(&state, rng).0.to_real();
            iterates.push(state.clone());
        }
        let trace = PredictionTrace::from_iterates(self, iterates);
        let best = BitVector::threshold(trace.chosen(), 0.5);
        Ok((best, trace))
    }

    /// Deterministic counterpart of [`Self::stochastic_search`]: `k` mean-field
    /// rounds `μ_h = σ(·|μ_v)`, `μ_v = σ(·|μ_h)` from the logistic start (or
    /// all 0.5), scored on the real-valued iterates. The chosen iterate is
    /// thresholded at 0.5, ties going to 1.
    pub fn mean_field(&self, k: usize) -> Result<(BitVector, PredictionTrace)> {
        require_steps(k)?;
        let mut mu_v = self
            .logistic_start()
            .unwrap_or_else(|| vec![0.5; self.params().n_visible()]);
        let mut iterates = Vec::with_capacity(k);
        for _ in 0..k {
            let mu_h = self.hidden_probs(&mu_v);
            mu_v = self.visible_probs(&mu_h);
            iterates.push(mu_v.clone());
        }
        let trace = PredictionTrace::from_iterates(self, iterates);
        let best = BitVector::threshold(trace.chosen(), 0.5);
        Ok((best, trace))
    }

    /// The candidate with the lowest free energy, first in canonical order on ties.
    pub fn global_mode(&self, candidates: &CandidateSet) -> Result<BitVector> {
        if candidates.is_empty() {
            return Err(CrbmError::EmptyCandidates);
        }
        check_len(
            "candidate width",
            self.params().n_visible(),
            candidates.width().unwrap_or(0),
        )?;
        let energies: Vec<f64> = candidates.iter().map(|v| self.free_energy_bits(v)).collect();
        let best = argmin_first(&energies);
        Ok(candidates.iter().nth(best).expect("index in range").clone())
    }

    /// Per-coordinate modes of the marginals of the restricted conditional.
    /// A coordinate is 1 when its marginal is at least 0.5. The result need
    /// not be a member of `candidates`.
    pub fn marginal_modes(&self, candidates: &CandidateSet) -> Result<BitVector> {
        let probs = self.conditional_over_set(candidates)?;
        Ok(BitVector::threshold(
            &marginals(candidates, &probs),
            0.5,
        ))
    }
}

/// `p(v_i = 1)` under a distribution supported on `candidates`.
pub fn marginals(candidates: &CandidateSet, probs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; candidates.width().unwrap_or(0)];
    for (v, &p) in candidates.iter().zip(probs) {
        for (i, bit) in v.iter().enumerate() {
            if bit {
                out[i] += p;
            }
        }
    }
    out
}

fn conditioned<'a>(params: &'a CrbmParams, v_len: usize, u: &[f64]) -> Result<Conditioned<'a>> {
    check_len("visible v", params.n_visible(), v_len)?;
    params.condition(u)
}

pub fn gibbs_step<R: Rng + ?Sized>(
    v: &BitVector,
    u: &[f64],
    params: &CrbmParams,
    rng: &mut R,
) -> Result<(BitVector, BitVector)> {
    Ok(conditioned(params, v.len(), u)?.gibbs_step(&v.to_real(), rng))
}

pub fn cd_negative_sample<R: Rng + ?Sized>(
    v: &BitVector,
    u: &[f64],
    k: usize,
    params: &CrbmParams,
    rng: &mut R,
) -> Result<BitVector> {
    conditioned(params, v.len(), u)?.cd_negative_sample(v, k, rng)
}

pub fn stochastic_search_predict<R: Rng + ?Sized>(
    u: &[f64],
    k: usize,
    params: &CrbmParams,
    rng: &mut R,
) -> Result<(BitVector, PredictionTrace)> {
    params.condition(u)?.stochastic_search(k, rng)
}

pub fn mean_field_predict(
    u: &[f64],
    k: usize,
    params: &CrbmParams,
) -> Result<(BitVector, PredictionTrace)> {
    params.condition(u)?.mean_field(k)
}

pub fn predict_global_mode(
    u: &[f64],
    candidates: &CandidateSet,
    params: &CrbmParams,
) -> Result<BitVector> {
    params.condition(u)?.global_mode(candidates)
}

pub fn predict_marginal_modes(
    u: &[f64],
    candidates: &CandidateSet,
    params: &CrbmParams,
) -> Result<BitVector> {
    params.condition(u)?.marginal_modes(candidates)
}
