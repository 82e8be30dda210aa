//! Recurrent Q-network: `FC(in→H) → ReLU → GRU(H→H) → FC(H→|A|)`.
//!
//! Parameters live in one flat vector so that optimizers, target copies and
//! checkpoints handle them uniformly. The GRU follows the reset-gate-after-
//! matmul convention (`n = tanh(W_in·u + b_in + r ⊙ (W_hn·h + b_hn))`) with
//! gate order `r, z, n`. Gradients are truncated at the incoming hidden state.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub input: usize,
    pub hidden: usize,
    pub actions: usize,
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    w1: usize,
    b1: usize,
    w_ih: usize,
    b_ih: usize,
    w_hh: usize,
    b_hh: usize,
    w2: usize,
    b2: usize,
    len: usize,
}

impl NetShape {
    pub fn new(input: usize, hidden: usize, actions: usize) -> Self {
        Self { input, hidden, actions }
    }

    fn layout(&self) -> Layout {
        let (i, h, a) = (self.input, self.hidden, self.actions);
        let w1 = 0;
        let b1 = w1 + h * i;
        let w_ih = b1 + h;
        let b_ih = w_ih + 3 * h * h;
        let w_hh = b_ih + 3 * h;
        let b_hh = w_hh + 3 * h * h;
        let w2 = b_hh + 3 * h;
        let b2 = w2 + a * h;
        Layout { w1, b1, w_ih, b_ih, w_hh, b_hh, w2, b2, len: b2 + a }
    }

    pub fn n_params(&self) -> usize {
        self.layout().len
    }

    /// Uniform `±1/√fan_in` initialisation for every tensor.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let l = self.layout();
        let mut p = vec![0.0; l.len];
        let mut fill = |range: core::ops::Range<usize>, fan_in: usize| {
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            for x in &mut p[range] {
                *x = rng.random_range(-bound..bound);
            }
        };
        fill(l.w1..l.w_ih, self.input);
        fill(l.w_ih..l.w2, self.hidden);
        fill(l.w2..l.len, self.hidden);
        p
    }

    pub fn zero_hidden(&self) -> Vec<f64> {
        vec![0.0; self.hidden]
    }

    /// Q-values and next hidden state.
    pub fn forward(&self, params: &[f64], x: &[f64], h: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let c = self.forward_cached(params, x, h);
        (c.q.clone(), c.h_next)
    }

    pub fn forward_cached(&self, params: &[f64], x: &[f64], h: &[f64]) -> StepCache {
        debug_assert_eq!(params.len(), self.n_params());
        debug_assert_eq!(x.len(), self.input);
        debug_assert_eq!(h.len(), self.hidden);
        let l = self.layout();
        let hd = self.hidden;

        let mut a1 = params[l.b1..l.b1 + hd].to_vec();
        matvec_acc(&params[l.w1..l.b1], hd, self.input, x, &mut a1);
        let u: Vec<f64> = a1.iter().map(|&v| v.max(0.0)).collect();

        let mut gi = params[l.b_ih..l.b_ih + 3 * hd].to_vec();
        matvec_acc(&params[l.w_ih..l.b_ih], 3 * hd, hd, &u, &mut gi);
        let mut gh = params[l.b_hh..l.b_hh + 3 * hd].to_vec();
        matvec_acc(&params[l.w_hh..l.b_hh], 3 * hd, hd, h, &mut gh);

        let mut r = vec![0.0; hd];
        let mut z = vec![0.0; hd];
        let mut n = vec![0.0; hd];
        let mut h_next = vec![0.0; hd];
        for k in 0..hd {
            r[k] = sigmoid(gi[k] + gh[k]);
            z[k] = sigmoid(gi[hd + k] + gh[hd + k]);
            n[k] = libm::tanh(gi[2 * hd + k] + r[k] * gh[2 * hd + k]);
            h_next[k] = (1.0 - z[k]) * n[k] + z[k] * h[k];
        }

        let mut q = params[l.b2..l.len].to_vec();
        matvec_acc(&params[l.w2..l.b2], self.actions, hd, &h_next, &mut q);

        StepCache { x: x.to_vec(), h: h.to_vec(), a1, u, gh, r, z, n, h_next, q }
    }

    /// Accumulates `∂L/∂θ` into `grad` given `∂L/∂q`.
    pub fn backward(&self, params: &[f64], cache: &StepCache, dq: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.n_params());
        let l = self.layout();
        let hd = self.hidden;

        let mut dh = vec![0.0; hd];
        for (a, &g) in dq.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad[l.b2 + a] += g;
            let row = l.w2 + a * hd;
            for k in 0..hd {
                grad[row + k] += g * cache.h_next[k];
                dh[k] += g * params[row + k];
            }
        }

        let mut dgi = vec![0.0; 3 * hd];
        let mut dgh = vec![0.0; 3 * hd];
        for k in 0..hd {
            let (r, z, n) = (cache.r[k], cache.z[k], cache.n[k]);
            let dn = dh[k] * (1.0 - z) * (1.0 - n * n);
            let dz = dh[k] * (cache.h[k] - n) * z * (1.0 - z);
            let dr = dn * cache.gh[2 * hd + k] * r * (1.0 - r);
            dgi[k] = dr;
            dgh[k] = dr;
            dgi[hd + k] = dz;
            dgh[hd + k] = dz;
            dgi[2 * hd + k] = dn;
            dgh[2 * hd + k] = dn * r;
        }

        let mut du = vec![0.0; hd];
        for j in 0..3 * hd {
            let (gi, gh) = (dgi[j], dgh[j]);
            grad[l.b_ih + j] += gi;
            grad[l.b_hh + j] += gh;
            let wi = l.w_ih + j * hd;
            let wh = l.w_hh + j * hd;
            for k in 0..hd {
                grad[wi + k] += gi * cache.u[k];
                du[k] += gi * params[wi + k];
                grad[wh + k] += gh * cache.h[k];
            }
        }

        for k in 0..hd {
            if cache.a1[k] <= 0.0 {
                continue;
            }
            let d = du[k];
            grad[l.b1 + k] += d;
            let row = l.w1 + k * self.input;
            for (i, &xi) in cache.x.iter().enumerate() {
                grad[row + i] += d * xi;
            }
        }
    }
}

/// Activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache {
    x: Vec<f64>,
    h: Vec<f64>,
    a1: Vec<f64>,
    u: Vec<f64>,
    gh: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    pub h_next: Vec<f64>,
    pub q: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// `out += W·x` for row-major `W` of shape `rows × cols`.
fn matvec_acc(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &w[r * cols..(r + 1) * cols];
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from_seed;

    #[test]
    fn param_count() {
        let s = NetShape::new(23, 64, 7);
        assert_eq!(s.n_params(), 64 * 23 + 64 + 2 * (3 * 64 * 64 + 3 * 64) + 7 * 64 + 7);
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let s = NetShape::new(10, 8, 3);
        let p = s.init_params(&mut rng_from_seed(1, 0));
        let l = s.layout();
        assert!(p[l.w1..l.w_ih].iter().all(|x| x.abs() <= 1.0 / libm::sqrt(10.0)));
        assert!(p[l.w_ih..].iter().all(|x| x.abs() <= 1.0 / libm::sqrt(8.0)));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = NetShape::new(5, 6, 4);
        let mut rng = rng_from_seed(7, 0);
        let params = s.init_params(&mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..6).map(|_| rng.random_range(-0.5..0.5)).collect();
        let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        // L = Σ w_a q_a, so ∂L/∂q = w.
        let loss = |p: &[f64]| s.forward(p, &x, &h).0.iter().zip(&w).map(|(q, w)| q * w).sum::<f64>();
        let cache = s.forward_cached(&params, &x, &h);
        let mut grad = vec![0.0; s.n_params()];
        s.backward(&params, &cache, &w, &mut grad);
        let eps = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += eps;
            let up = loss(&p);
            p[i] -= 2.0 * eps;
            let down = loss(&p);
            let numeric = (up - down) / (2.0 * eps);
            let err = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1e-4);
            worst = worst.max(err);
        }
        assert!(worst < 1e-5, "worst relative error {worst}");
    }
}
