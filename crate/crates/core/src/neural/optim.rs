use crate::error::{Error, Result};
use crate::Scalar;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam optimiser state: step counter and first/second moments per tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<F>>,
    pub v: Vec<Vec<F>>,
}

impl<F: Scalar> Adam<F> {
    /// Zero moments for tensors of the given lengths.
    pub fn new(config: AdamConfig, shapes: impl IntoIterator<Item = usize>) -> Self {
        let m: Vec<Vec<F>> = shapes.into_iter().map(|n| vec![F::zero(); n]).collect();
        Self {
            config,
            step: 0,
            v: m.clone(),
            m,
        }
    }

    /// Advance the step counter and apply one bias-corrected update.
    pub fn update(&mut self, params: Vec<&mut Vec<F>>, grads: &[Vec<F>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::mismatch("tensor count", self.m.len(), params.len().min(grads.len())));
        }
        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let lr_t = F::lit(c.learning_rate * (1.0 - c.beta2.powi(t)).sqrt() / (1.0 - c.beta1.powi(t)));
        let eps_t = F::lit(c.eps * (1.0 - c.beta2.powi(t)).sqrt());
        let (b1, b2) = (F::lit(c.beta1), F::lit(c.beta2));
        let (k1, k2) = (F::one() - b1, F::one() - b2);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(Error::mismatch("tensor length", m.len(), p.len()));
            }
            for i in 0..p.len() {
                m[i] = b1 * m[i] + k1 * g[i];
                v[i] = b2 * v[i] + k2 * g[i] * g[i];
                // same update as m̂ / (√v̂ + ε) with the corrections folded in
                p[i] -= lr_t * m[i] / (v[i].sqrt() + eps_t);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig { learning_rate: 0.1, ..Default::default() };
        let mut adam = Adam::<f64>::new(cfg, [1]);
        let mut theta = vec![0.0];
        adam.update(vec![&mut theta], &[vec![1.0]]).unwrap();
        assert!((theta[0] + 0.1).abs() < 1e-9);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn zero_gradient_keeps_parameters_and_decays_moments() {
        let mut adam = Adam::<f64>::new(AdamConfig::default(), [2]);
        let mut theta = vec![1.0, -2.0];
        adam.update(vec![&mut theta], &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(theta, vec![1.0, -2.0]);

        adam.update(vec![&mut theta], &[vec![1.0, 1.0]]).unwrap();
        let (m, v) = (adam.m[0][0], adam.v[0][0]);
        adam.update(vec![&mut theta], &[vec![0.0, 0.0]]).unwrap();
        assert!((adam.m[0][0] - 0.9 * m).abs() < 1e-15);
        assert!((adam.v[0][0] - 0.999 * v).abs() < 1e-15);
    }

    #[test]
    fn rejects_mismatched_tensors() {
        let mut adam = Adam::<f32>::new(AdamConfig::default(), [2]);
        let mut p = vec![0.0; 3];
        assert!(adam.update(vec![&mut p], &[vec![0.0; 3]]).is_err());
    }
}
