//! Oracles shared by the integration tests, coded directly from the model
//! definition without going through the library's own kernels.

#![allow(dead_code)]

use rand::Rng;

use crbm::bits::BitVector;
use crbm::model::{CrbmParams, Gradient};

pub fn oracle_softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn oracle_sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn oracle_log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `−vᵀW^vh h − vᵀb^v − uᵀW^uv v − uᵀW^uh h − hᵀb^h`.
pub fn oracle_energy(p: &CrbmParams, v: &[f64], h: &[f64], u: &[f64]) -> f64 {
    let (nv, nh, nu) = (v.len(), h.len(), u.len());
    let mut e = 0.0;
    for i in 0..nv {
        e -= v[i] * p.b_v[i];
        for j in 0..nh {
            e -= v[i] * p.w_vh.get(i, j) * h[j];
        }
    }
    for j in 0..nh {
        e -= h[j] * p.b_h[j];
    }
    for k in 0..nu {
        if p.has_uv {
            for i in 0..nv {
                e -= u[k] * p.w_uv.get(k, i) * v[i];
            }
        }
        if p.has_uh {
            for j in 0..nh {
                e -= u[k] * p.w_uh.get(k, j) * h[j];
            }
        }
    }
    e
}

pub fn bits_of(index: usize, len: usize) -> Vec<f64> {
    (0..len).map(|i| ((index >> (len - 1 - i)) & 1) as f64).collect()
}

/// `−log Σ_h exp(−E(v, h, u))` by enumerating every hidden configuration.
pub fn oracle_free_energy_enumerated(p: &CrbmParams, v: &[f64], u: &[f64]) -> f64 {
    let nh = p.n_hidden();
    let neg: Vec<f64> = (0..1usize << nh)
        .map(|s| -oracle_energy(p, v, &bits_of(s, nh), u))
        .collect();
    -oracle_log_sum_exp(&neg)
}

pub fn oracle_hidden_input(p: &CrbmParams, v: &[f64], u: &[f64]) -> Vec<f64> {
    (0..p.n_hidden())
        .map(|j| {
            let mut x = p.b_h[j];
            for (i, &vi) in v.iter().enumerate() {
                x += vi * p.w_vh.get(i, j);
            }
            if p.has_uh {
                for (k, &uk) in u.iter().enumerate() {
                    x += uk * p.w_uh.get(k, j);
                }
            }
            x
        })
        .collect()
}

pub fn oracle_visible_bias(p: &CrbmParams, u: &[f64]) -> Vec<f64> {
    (0..p.n_visible())
        .map(|i| {
            let mut x = p.b_v[i];
            if p.has_uv {
                for (k, &uk) in u.iter().enumerate() {
                    x += uk * p.w_uv.get(k, i);
                }
            }
            x
        })
        .collect()
}

/// Closed-form free energy, used as the finite-difference objective.
pub fn oracle_free_energy(p: &CrbmParams, v: &[f64], u: &[f64]) -> f64 {
    let bias = oracle_visible_bias(p, u);
    let linear: f64 = v.iter().zip(&bias).map(|(a, b)| a * b).sum();
    -linear - oracle_hidden_input(p, v, u).into_iter().map(oracle_softplus).sum::<f64>()
}

/// Exact `p(v|u)` over all outputs, in index order.
pub fn oracle_conditional(p: &CrbmParams, u: &[f64]) -> Vec<f64> {
    let nv = p.n_visible();
    let logits: Vec<f64> = (0..1usize << nv)
        .map(|s| -oracle_free_energy(p, &bits_of(s, nv), u))
        .collect();
    let z = oracle_log_sum_exp(&logits);
    logits.iter().map(|l| (l - z).exp()).collect()
}

pub fn bernoulli_product(probs: &[f64], state: &[f64]) -> f64 {
    probs
        .iter()
        .zip(state)
        .map(|(&q, &s)| if s == 1.0 { q } else { 1.0 - q })
        .product()
}

/// `T[a][b] = Σ_h p(h | v=a, u) p(v=b | h, u)`.
pub fn oracle_transition(p: &CrbmParams, u: &[f64]) -> Vec<Vec<f64>> {
    let (nv, nh) = (p.n_visible(), p.n_hidden());
    let bias = oracle_visible_bias(p, u);
    let visible_given = |h: &[f64]| -> Vec<f64> {
        (0..nv)
            .map(|i| oracle_sigmoid(bias[i] + (0..nh).map(|j| p.w_vh.get(i, j) * h[j]).sum::<f64>()))
            .collect()
    };
    (0..1usize << nv)
        .map(|a| {
            let va = bits_of(a, nv);
            let ph: Vec<f64> = oracle_hidden_input(p, &va, u).into_iter().map(oracle_sigmoid).collect();
            let mut row = vec![0.0; 1 << nv];
            for s in 0..1usize << nh {
                let h = bits_of(s, nh);
                let w = bernoulli_product(&ph, &h);
                let pv = visible_given(&h);
                for (b, slot) in row.iter_mut().enumerate() {
                    *slot += w * bernoulli_product(&pv, &bits_of(b, nv));
                }
            }
            row
        })
        .collect()
}

pub fn index_of(v: &BitVector) -> usize {
    v.iter().fold(0, |acc, b| (acc << 1) | usize::from(b))
}

// Finite differences over every parameter of the present blocks.

pub fn param_slices(p: &mut CrbmParams) -> [&mut [f64]; 5] {
    [
        p.w_vh.as_mut_slice(),
        p.w_uv.as_mut_slice(),
        p.w_uh.as_mut_slice(),
        &mut p.b_v,
        &mut p.b_h,
    ]
}

pub fn finite_difference(p: &CrbmParams, f: impl Fn(&CrbmParams) -> f64) -> Vec<f64> {
    const STEP: f64 = 1e-5;
    let mut work = p.clone();
    let mut out = Vec::new();
    for block in 0..5 {
        let len = param_slices(&mut work)[block].len();
        for i in 0..len {
            let orig = param_slices(&mut work)[block][i];
            param_slices(&mut work)[block][i] = orig + STEP;
            let plus = f(&work);
            param_slices(&mut work)[block][i] = orig - STEP;
            let minus = f(&work);
            param_slices(&mut work)[block][i] = orig;
            out.push((plus - minus) / (2.0 * STEP));
        }
    }
    out
}

/// Zeroes finite differences of blocks that the model does not use, since
/// the analytic gradient leaves them untouched.
pub fn mask_absent(p: &CrbmParams, fd: &mut [f64]) {
    let (nv, nu, nh) = (p.n_visible(), p.n_input(), p.n_hidden());
    let uv = nv * nh..nv * nh + nu * nv;
    let uh = uv.end..uv.end + nu * nh;
    if !p.has_uv {
        fd[uv].fill(0.0);
    }
    if !p.has_uh {
        fd[uh].fill(0.0);
    }
}

pub fn relative_error(analytic: &Gradient, fd: &[f64]) -> f64 {
    let a: Vec<f64> = analytic.values().collect();
    assert_eq!(a.len(), fd.len());
    let diff: f64 = a.iter().zip(fd).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(fd.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn random_model<R: Rng>(rng: &mut R, nv: usize, nu: usize, nh: usize, std: f64) -> CrbmParams {
    let mut p = CrbmParams::random(nv, nu, nh, rng.random_bool(0.8), rng.random_bool(0.8), std, rng);
    for b in p.b_v.iter_mut().chain(p.b_h.iter_mut()) {
        *b = rng.random_range(-1.0..1.0);
    }
    p
}

pub fn random_bits<R: Rng>(rng: &mut R, n: usize) -> BitVector {
    BitVector::from_bools((0..n).map(|_| rng.random_bool(0.5)))
}

pub fn random_reals<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()
}
