use rand::Rng;

use crate::rng::SimRng;
use crate::Scalar;

/// Row-major `C (m x n) = op(A) op(B) + beta C`, where `op` optionally
/// transposes a row-major operand.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<F: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[F],
    a_t: bool,
    b: &[F],
    b_t: bool,
    beta: F,
    c: &mut [F],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slice lengths were checked against the logical shapes and
    // the strides above never address past them.
    unsafe {
        F::gemm_raw(
            m,
            k,
            n,
            F::one(),
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Fully connected layer `y = W x + b` with `W` stored `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<F>,
    pub bias: Vec<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: vec![F::zero(); inputs * outputs],
            bias: vec![F::zero(); outputs],
        }
    }

    /// Zero-mean Gaussian weights with variance `gain / inputs`; zero bias.
    pub fn init(inputs: usize, outputs: usize, gain: f64, rng: &mut SimRng) -> Self {
        let std = (gain / inputs as f64).sqrt();
        let normal = rand_distr::StandardNormal;
        let mut d = Self::zeros(inputs, outputs);
        for w in &mut d.weight {
            let z: f64 = rng.sample(normal);
            *w = F::lit(std * z);
        }
        d
    }

    pub fn forward(&self, x: &[F], batch: usize) -> Vec<F> {
        let mut y = Vec::with_capacity(batch * self.outputs);
        for _ in 0..batch {
            y.extend_from_slice(&self.bias);
        }
        gemm(batch, self.inputs, self.outputs, x, false, &self.weight, true, F::one(), &mut y);
        y
    }

    /// Accumulates parameter gradients and returns `dL/dx` when asked.
    pub fn backward(
        &self,
        x: &[F],
        dy: &[F],
        batch: usize,
        grad_w: &mut [F],
        grad_b: &mut [F],
        want_dx: bool,
    ) -> Option<Vec<F>> {
        gemm(self.outputs, batch, self.inputs, dy, true, x, false, F::one(), grad_w);
        for row in dy.chunks_exact(self.outputs) {
            for (g, &d) in grad_b.iter_mut().zip(row) {
                *g += d;
            }
        }
        want_dx.then(|| {
            let mut dx = vec![F::zero(); batch * self.inputs];
            gemm(batch, self.outputs, self.inputs, dy, false, &self.weight, false, F::zero(), &mut dx);
            dx
        })
    }
}

/// Per-feature batch normalisation with learnable scale `gamma` and shift
/// `eta`, plus exponential running statistics for inference.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<F> {
    pub gamma: Vec<F>,
    pub eta: Vec<F>,
    pub running_mean: Vec<F>,
    pub running_var: Vec<F>,
}

/// Batch statistics kept for the backward pass.
#[derive(Debug, Clone)]
pub struct NormCache<F> {
    /// Normalised input before the affine map.
    pub xhat: Vec<F>,
    pub mean: Vec<F>,
    pub var: Vec<F>,
    pub inv_std: Vec<F>,
}

impl<F: Scalar> BatchNorm<F> {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: vec![F::one(); width],
            eta: vec![F::zero(); width],
            running_mean: vec![F::zero(); width],
            running_var: vec![F::one(); width],
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward_train(&self, a: &[F], batch: usize, eps: F) -> (Vec<F>, NormCache<F>) {
        let d = self.width();
        let inv_b = F::one() / F::from_usize(batch).unwrap();
        let mut mean = vec![F::zero(); d];
        for row in a.chunks_exact(d) {
            for (m, &x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m *= inv_b);
        let mut var = vec![F::zero(); d];
        for row in a.chunks_exact(d) {
            for ((v, &x), &m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        var.iter_mut().for_each(|v| *v *= inv_b);
        let inv_std: Vec<F> = var.iter().map(|&v| F::one() / (v + eps).sqrt()).collect();
        let mut xhat = Vec::with_capacity(a.len());
        let mut y = Vec::with_capacity(a.len());
        for row in a.chunks_exact(d) {
            for j in 0..d {
                let h = (row[j] - mean[j]) * inv_std[j];
                xhat.push(h);
                y.push(self.gamma[j] * h + self.eta[j]);
            }
        }
        (y, NormCache { xhat, mean, var, inv_std })
    }

    pub fn forward_infer(&self, a: &[F], eps: F) -> Vec<F> {
        let d = self.width();
        let scale: Vec<F> = (0..d)
            .map(|j| self.gamma[j] / (self.running_var[j] + eps).sqrt())
            .collect();
        let mut y = Vec::with_capacity(a.len());
        for row in a.chunks_exact(d) {
            for j in 0..d {
                y.push((row[j] - self.running_mean[j]) * scale[j] + self.eta[j]);
            }
        }
        y
    }

    pub fn update_running(&mut self, cache: &NormCache<F>, momentum: F) {
        let keep = F::one() - momentum;
        for j in 0..self.width() {
            self.running_mean[j] = momentum * self.running_mean[j] + keep * cache.mean[j];
            self.running_var[j] = momentum * self.running_var[j] + keep * cache.var[j];
        }
    }

    pub fn backward(
        &self,
        dy: &[F],
        cache: &NormCache<F>,
        batch: usize,
        grad_gamma: &mut [F],
        grad_eta: &mut [F],
    ) -> Vec<F> {
        let d = self.width();
        let mut sum_dy = vec![F::zero(); d];
        let mut sum_dy_xhat = vec![F::zero(); d];
        for (row, xh) in dy.chunks_exact(d).zip(cache.xhat.chunks_exact(d)) {
            for j in 0..d {
                sum_dy[j] += row[j];
                sum_dy_xhat[j] += row[j] * xh[j];
            }
        }
        for j in 0..d {
            grad_gamma[j] += sum_dy_xhat[j];
            grad_eta[j] += sum_dy[j];
        }
        let b = F::from_usize(batch).unwrap();
        let coef: Vec<F> = (0..d).map(|j| self.gamma[j] * cache.inv_std[j] / b).collect();
        let mut dx = Vec::with_capacity(dy.len());
        for (row, xh) in dy.chunks_exact(d).zip(cache.xhat.chunks_exact(d)) {
            for j in 0..d {
                dx.push(coef[j] * (b * row[j] - sum_dy[j] - xh[j] * sum_dy_xhat[j]));
            }
        }
        dx
    }
}

pub(crate) fn relu_in_place<F: Scalar>(x: &mut [F]) {
    for v in x {
        if *v < F::zero() {
            *v = F::zero();
        }
    }
}

/// Zero `grad` wherever the ReLU output was not positive.
pub(crate) fn relu_backward<F: Scalar>(grad: &mut [F], output: &[F]) {
    for (g, &o) in grad.iter_mut().zip(output) {
        if o <= F::zero() {
            *g = F::zero();
        }
    }
}

/// Inverted-dropout mask: `0` with probability `rate`, else `1 / (1 - rate)`.
pub(crate) fn dropout_mask<F: Scalar>(len: usize, rate: f64, rng: &mut SimRng) -> Vec<F> {
    let keep = F::lit(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { F::zero() } else { keep })
        .collect()
}

/// Logistic function kept strictly inside `(0, 1)` even where the exact
/// value rounds to an endpoint.
pub(crate) fn sigmoid<F: Scalar>(x: F) -> F {
    let p = if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    };
    let top = F::one() - F::epsilon() / F::lit(2.0);
    p.max(F::min_positive_value()).min(top)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_transposes() {
        // A = [[1,2],[3,4]], B = [[5,6],[7,8]]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0f64; 4];
        gemm(2, 2, 2, &a, false, &b, false, 0.0, &mut c);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        gemm(2, 2, 2, &a, true, &b, false, 0.0, &mut c);
        assert_eq!(c, [26.0, 30.0, 38.0, 44.0]);
        gemm(2, 2, 2, &a, false, &b, true, 0.0, &mut c);
        assert_eq!(c, [17.0, 23.0, 39.0, 53.0]);
    }

    #[test]
    fn dense_forward_adds_bias() {
        let d = Dense { inputs: 2, outputs: 1, weight: vec![2.0, -1.0], bias: vec![0.5] };
        assert_eq!(d.forward(&[1.0, 1.0, 3.0, 0.0], 2), vec![1.5, 6.5]);
    }

    #[test]
    fn sigmoid_is_stable_and_bounded() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(-800.0f64) > 0.0 && sigmoid(800.0f64) < 1.0);
        assert!(sigmoid(-200.0f32) > 0.0 && sigmoid(40.0f32) < 1.0);
        assert!((sigmoid(2.0f64) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dropout_mask_mean_is_one() {
        let mut rng = crate::rng::seeded(1);
        let m: Vec<f64> = dropout_mask(100_000, 0.5, &mut rng);
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        assert!((mean - 1.0).abs() < 0.02);
        assert!(m.iter().all(|&x| x == 0.0 || x == 2.0));
    }
}
