//! Adam for gradient ascent on exact objectives.

/// Adam with bias correction, stepping in the ascent direction.
///
/// beta1 = 0.9, beta2 = 0.999, eps = 1e-8; only the learning rate is
/// caller-controlled.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(dim: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    /// Drops accumulated moments (used when parameters are rewound to an
    /// earlier snapshot, where stale moments no longer apply).
    pub fn reset(&mut self) {
        self.t = 0;
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
    }

    /// One ascent step: params move along the bias-corrected moment ratio.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] += self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_roughly_the_learning_rate() {
        // With bias correction, m_hat/sqrt(v_hat) = sign(g) up to eps on the
        // first step.
        let mut opt = Adam::new(2, 0.1);
        let mut params = vec![0.0, 0.0];
        opt.step(&mut params, &[3.0, -0.004]);
        assert!((params[0] - 0.1).abs() < 1e-6);
        assert!((params[1] + 0.1).abs() < 1e-4);
    }

    #[test]
    fn maximizes_a_quadratic() {
        // f(x) = −(x − 3)², gradient 2(3 − x).
        let mut opt = Adam::new(1, 0.05);
        let mut params = vec![0.0];
        for _ in 0..2000 {
            let g = 2.0 * (3.0 - params[0]);
            opt.step(&mut params, &[g]);
        }
        assert!((params[0] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn reset_clears_the_moments() {
        let mut opt = Adam::new(1, 0.1);
        let mut params = vec![0.0];
        opt.step(&mut params, &[5.0]);
        opt.reset();
        // After a reset the next step must equal a fresh optimizer's first
        // step (same delta from the same starting point).
        params[0] = 0.0;
        let mut fresh_params = vec![0.0];
        let mut fresh = Adam::new(1, 0.1);
        opt.step(&mut params, &[1.0]);
        fresh.step(&mut fresh_params, &[1.0]);
        assert_eq!(params[0], fresh_params[0]);
    }
}
