//! CRBM parameterization and the energy, free-energy and probability
//! computations built on it.
//!
//! The conditioning input `u` only shifts the visible and hidden biases, so
//! every quantity for a fixed `u` is computed on a [`Conditioned`] view that
//! caches the effective biases `b^v + uᵀW^uv` and `b^h + uᵀW^uh`.

mod io;

pub use io::{load_params, read_params, save_params, write_params};

use rand::Rng;

use crate::bits::{BitVector, CandidateSet};
use crate::error::{check_len, CrbmError, Result};
use crate::linalg::{axpy, dot, log_sum_exp, sigmoid, softmax, softplus, Matrix};

/// Largest output dimension the enumeration oracles accept.
pub const MAX_ENUMERATION_BITS: usize = 20;

/// All parameter blocks of the CRBM energy
/// `E(v,h,u) = −vᵀW^vh h − vᵀb^v − uᵀW^uv v − uᵀW^uh h − hᵀb^h`.
///
/// When `has_uv` (resp. `has_uh`) is false the `w_uv` (resp. `w_uh`) block
/// is ignored by every computation, whatever it contains.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbmParams {
    /// visible × hidden
    pub w_vh: Matrix,
    /// input × visible
    pub w_uv: Matrix,
    /// input × hidden
    pub w_uh: Matrix,
    pub b_v: Vec<f64>,
    pub b_h: Vec<f64>,
    pub has_uv: bool,
    pub has_uh: bool,
}

impl CrbmParams {
    pub fn zeros(
        n_visible: usize,
        n_input: usize,
        n_hidden: usize,
        has_uv: bool,
        has_uh: bool,
    ) -> Self {
        CrbmParams {
            w_vh: Matrix::zeros(n_visible, n_hidden),
            w_uv: Matrix::zeros(n_input, n_visible),
            w_uh: Matrix::zeros(n_input, n_hidden),
            b_v: vec![0.0; n_visible],
            b_h: vec![0.0; n_hidden],
            has_uv,
            has_uh,
        }
    }

    /// Weights drawn from `N(0, std_dev²)`, biases zero. Absent blocks stay zero.
    pub fn random<R: Rng + ?Sized>(
        n_visible: usize,
        n_input: usize,
        n_hidden: usize,
        has_uv: bool,
        has_uh: bool,
        std_dev: f64,
        rng: &mut R,
    ) -> Self {
        let mut params = Self::zeros(n_visible, n_input, n_hidden, has_uv, has_uh);
        params.w_vh = Matrix::gaussian(n_visible, n_hidden, std_dev, rng);
        if has_uv {
            params.w_uv = Matrix::gaussian(n_input, n_visible, std_dev, rng);
        }
        if has_uh {
            params.w_uh = Matrix::gaussian(n_input, n_hidden, std_dev, rng);
        }
        params
    }

    pub fn n_visible(&self) -> usize {
        self.b_v.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.b_h.len()
    }

    pub fn n_input(&self) -> usize {
        self.w_uv.rows()
    }

    /// Verifies that all blocks agree on |v|, |h| and |u|.
    pub fn validate(&self) -> Result<()> {
        let (nv, nh, nu) = (self.n_visible(), self.n_hidden(), self.n_input());
        check_len("w_vh rows", nv, self.w_vh.rows())?;
        check_len("w_vh cols", nh, self.w_vh.cols())?;
        check_len("w_uv cols", nv, self.w_uv.cols())?;
        check_len("w_uh rows", nu, self.w_uh.rows())?;
        check_len("w_uh cols", nh, self.w_uh.cols())?;
        Ok(())
    }

    /// Fixes the conditioning input, precomputing the effective biases.
    pub fn condition(&self, u: &[f64]) -> Result<Conditioned<'_>> {
        check_len("input u", self.n_input(), u.len())?;
        let mut visible_bias = self.b_v.clone();
        if self.has_uv {
            self.w_uv.accumulate_left_product(u, &mut visible_bias);
        }
        let mut hidden_bias = self.b_h.clone();
        if self.has_uh {
            self.w_uh.accumulate_left_product(u, &mut hidden_bias);
        }
        Ok(Conditioned {
            params: self,
            visible_bias,
            hidden_bias,
        })
    }

    /// `θ ← θ − η·grad` on every present block.
    pub fn sgd_step(&mut self, grad: &Gradient, learning_rate: f64) -> Result<()> {
        grad.check_compatible(self)?;
        self.w_vh.add_scaled(-learning_rate, &grad.w_vh);
        if self.has_uv {
            self.w_uv.add_scaled(-learning_rate, &grad.w_uv);
        }
        if self.has_uh {
            self.w_uh.add_scaled(-learning_rate, &grad.w_uh);
        }
        axpy(-learning_rate, &grad.b_v, &mut self.b_v);
        axpy(-learning_rate, &grad.b_h, &mut self.b_h);
        Ok(())
    }

    /// Logistic-regression probabilities `σ(b^v + uᵀW^uv)`.
    pub fn logistic_visible(&self, u: &[f64]) -> Result<Vec<f64>> {
        let cond = self.condition(u)?;
        Ok(cond.visible_bias.iter().map(|&x| sigmoid(x)).collect())
    }
}

/// A CRBM with its conditioning input fixed.
#[derive(Debug, Clone)]
pub struct Conditioned<'a> {
    params: &'a CrbmParams,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
}

impl<'a> Conditioned<'a> {
    pub fn params(&self) -> &'a CrbmParams {
        self.params
    }

    /// `b^v + uᵀW^uv`
    pub fn visible_bias(&self) -> &[f64] {
        &self.visible_bias
    }

    /// `b^h + uᵀW^uh`
    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    /// Hidden pre-activations `b^h_j + vᵀW^vh_{·j} + uᵀW^uh_{·j}`.
    pub fn hidden_input(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.hidden_bias.clone();
        self.params.w_vh.accumulate_left_product(v, &mut out);
        out
    }

    /// Visible pre-activations `b^v_i + W^vh_{i·}h + uᵀW^uv_{·i}`.
    pub fn visible_input(&self, h: &[f64]) -> Vec<f64> {
        let mut out = self.visible_bias.clone();
        self.params.w_vh.accumulate_right_product(h, &mut out);
        out
    }

    pub fn hidden_probs(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.hidden_input(v);
        out.iter_mut().for_each(|x| *x = sigmoid(*x));
        out
    }

    pub fn visible_probs(&self, h: &[f64]) -> Vec<f64> {
        let mut out = self.visible_input(h);
        out.iter_mut().for_each(|x| *x = sigmoid(*x));
        out
    }

    pub fn energy(&self, v: &[f64], h: &[f64]) -> f64 {
        let mut vw = vec![0.0; h.len()];
        self.params.w_vh.accumulate_left_product(v, &mut vw);
        -dot(&vw, h) - dot(v, &self.visible_bias) - dot(h, &self.hidden_bias)
    }

    /// `F(v,u) = −Σ_j softplus(b^h_j + vᵀW^vh_{·j} + uᵀW^uh_{·j}) − vᵀ(b^v + uᵀW^uv)`.
    pub fn free_energy(&self, v: &[f64]) -> f64 {
        let hidden_term: f64 = self.hidden_input(v).iter().map(|&x| softplus(x)).sum();
        -hidden_term - dot(v, &self.visible_bias)
    }

    pub fn free_energy_bits(&self, v: &BitVector) -> f64 {
        self.free_energy(&v.to_real())
    }

    /// `p(v|u)` restricted to `candidates`, aligned with their canonical order.
    pub fn conditional_over_set(&self, candidates: &CandidateSet) -> Result<Vec<f64>> {
        if candidates.is_empty() {
            return Err(CrbmError::EmptyCandidates);
        }
        check_len(
            "candidate width",
            self.params.n_visible(),
            candidates.width().unwrap_or(0),
        )?;
        let logits: Vec<f64> = candidates
            .iter()
            .map(|v| -self.free_energy_bits(v))
            .collect();
        Ok(softmax(&logits))
    }
}

/// Gradient with respect to every block of a [`CrbmParams`], same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w_vh: Matrix,
    pub w_uv: Matrix,
    pub w_uh: Matrix,
    pub b_v: Vec<f64>,
    pub b_h: Vec<f64>,
}

impl Gradient {
    pub fn zeros_for(params: &CrbmParams) -> Self {
        Gradient {
            w_vh: Matrix::zeros(params.n_visible(), params.n_hidden()),
            w_uv: Matrix::zeros(params.n_input(), params.n_visible()),
            w_uh: Matrix::zeros(params.n_input(), params.n_hidden()),
            b_v: vec![0.0; params.n_visible()],
            b_h: vec![0.0; params.n_hidden()],
        }
    }

    pub fn clear(&mut self) {
        self.w_vh.fill(0.0);
        self.w_uv.fill(0.0);
        self.w_uh.fill(0.0);
        self.b_v.iter_mut().for_each(|x| *x = 0.0);
        self.b_h.iter_mut().for_each(|x| *x = 0.0);
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, scale: f64, other: &Gradient) {
        self.w_vh.add_scaled(scale, &other.w_vh);
        self.w_uv.add_scaled(scale, &other.w_uv);
        self.w_uh.add_scaled(scale, &other.w_uh);
        axpy(scale, &other.b_v, &mut self.b_v);
        axpy(scale, &other.b_h, &mut self.b_h);
    }

    pub fn scale(&mut self, factor: f64) {
        for block in [
            self.w_vh.as_mut_slice(),
            self.w_uv.as_mut_slice(),
            self.w_uh.as_mut_slice(),
            &mut self.b_v,
            &mut self.b_h,
        ] {
            block.iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// Visits every gradient entry in block order w_vh, w_uv, w_uh, b_v, b_h.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.w_vh
            .as_slice()
            .iter()
            .chain(self.w_uv.as_slice())
            .chain(self.w_uh.as_slice())
            .chain(&self.b_v)
            .chain(&self.b_h)
            .copied()
    }

    pub fn is_zero(&self) -> bool {
        self.values().all(|x| x == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn check_compatible(&self, params: &CrbmParams) -> Result<()> {
        check_len("gradient w_vh", params.w_vh.rows() * params.w_vh.cols(), self.w_vh.as_slice().len())?;
        check_len("gradient w_uv", params.w_uv.rows() * params.w_uv.cols(), self.w_uv.as_slice().len())?;
        check_len("gradient w_uh", params.w_uh.rows() * params.w_uh.cols(), self.w_uh.as_slice().len())?;
        check_len("gradient b_v", params.b_v.len(), self.b_v.len())?;
        check_len("gradient b_h", params.b_h.len(), self.b_h.len())?;
        Ok(())
    }

    /// Adds `Σ_c weight_c · ∂F(v_c, u)/∂θ` for visible configurations sharing
    /// one conditioning input.
    ///
    /// With `s = σ(hidden_input(v))`: `∂F/∂W^vh = −v sᵀ`, `∂F/∂b^h = −s`,
    /// `∂F/∂b^v = −v`, `∂F/∂W^uv = −u vᵀ`, `∂F/∂W^uh = −u sᵀ`. The two input
    /// blocks are linear in the per-term statistics, so they are formed once
    /// from the weighted sums.
    pub fn accumulate_free_energy<'v>(
        &mut self,
        cond: &Conditioned<'_>,
        u: &[f64],
        terms: impl IntoIterator<Item = (f64, &'v [f64])>,
    ) {
        let params = cond.params();
        let mut visible_sum = vec![0.0; params.n_visible()];
        let mut hidden_sum = vec![0.0; params.n_hidden()];
        for (weight, v) in terms {
            if weight == 0.0 {
                continue;
            }
            let s = cond.hidden_probs(v);
            self.w_vh.add_outer(-weight, v, &s);
            axpy(weight, v, &mut visible_sum);
            axpy(weight, &s, &mut hidden_sum);
        }
        axpy(-1.0, &visible_sum, &mut self.b_v);
        axpy(-1.0, &hidden_sum, &mut self.b_h);
        if params.has_uv {
            self.w_uv.add_outer(-1.0, u, &visible_sum);
        }
        if params.has_uh {
            self.w_uh.add_outer(-1.0, u, &hidden_sum);
        }
    }
}

/// `E(v, h, u)`.
pub fn energy(v: &BitVector, h: &BitVector, u: &[f64], params: &CrbmParams) -> Result<f64> {
    check_len("visible v", params.n_visible(), v.len())?;
    check_len("hidden h", params.n_hidden(), h.len())?;
    Ok(params.condition(u)?.energy(&v.to_real(), &h.to_real()))
}

/// `F(v, u)` for `v` with entries in `[0, 1]`.
pub fn free_energy(v: &[f64], u: &[f64], params: &CrbmParams) -> Result<f64> {
    check_len("visible v", params.n_visible(), v.len())?;
    Ok(params.condition(u)?.free_energy(v))
}

/// `p(h_j = 1 | v, u)` for every hidden unit.
pub fn hidden_probs(v: &[f64], u: &[f64], params: &CrbmParams) -> Result<Vec<f64>> {
    check_len("visible v", params.n_visible(), v.len())?;
    Ok(params.condition(u)?.hidden_probs(v))
}

/// `p(v_i = 1 | h, u)` for every visible unit.
pub fn visible_probs(h: &[f64], u: &[f64], params: &CrbmParams) -> Result<Vec<f64>> {
    check_len("hidden h", params.n_hidden(), h.len())?;
    Ok(params.condition(u)?.visible_probs(h))
}

pub fn conditional_over_set(
    u: &[f64],
    candidates: &CandidateSet,
    params: &CrbmParams,
) -> Result<Vec<f64>> {
    params.condition(u)?.conditional_over_set(candidates)
}

/// Exact `p(v|u)` over all `2^|v|` outputs.
pub fn brute_force_conditional(
    u: &[f64],
    params: &CrbmParams,
) -> Result<(CandidateSet, Vec<f64>)> {
    let n = params.n_visible();
    if n > MAX_ENUMERATION_BITS {
        return Err(CrbmError::TooLargeToEnumerate(n));
    }
    let space = CandidateSet::full_space(n)?;
    let probs = conditional_over_set(u, &space, params)?;
    Ok((space, probs))
}

/// `−log p(v|u)` restricted to `candidates`; `v` must be a member.
pub fn restricted_nll(
    v: &BitVector,
    u: &[f64],
    candidates: &CandidateSet,
    params: &CrbmParams,
) -> Result<f64> {
    if !candidates.contains(v) {
        return Err(CrbmError::invalid("target is not in the candidate set"));
    }
    let cond = params.condition(u)?;
    let negated: Vec<f64> = candidates
        .iter()
        .map(|c| -cond.free_energy_bits(c))
        .collect();
    Ok(cond.free_energy_bits(v) + log_sum_exp(&negated))
}

/// `∂F(v, u)/∂θ` for every block.
pub fn free_energy_grad(v: &[f64], u: &[f64], params: &CrbmParams) -> Result<Gradient> {
    check_len("visible v", params.n_visible(), v.len())?;
    let cond = params.condition(u)?;
    let mut grad = Gradient::zeros_for(params);
    grad.accumulate_free_energy(&cond, u, [(1.0, v)]);
    Ok(grad)
}
