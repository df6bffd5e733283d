use super::Real;

/// Adam with bias correction over a fixed list of parameter slices.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
    pub t: i32,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new(lr: F) -> Self {
        Adam {
            lr,
            beta1: F::lit(0.9),
            beta2: F::lit(0.999),
            eps: F::lit(1e-8),
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn with_betas(mut self, beta1: F, beta2: F, eps: F) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self.eps = eps;
        self
    }

    pub fn first_moments(&self) -> &[Vec<F>] {
        &self.m
    }

    pub fn step(&mut self, params: &mut [&mut [F]], grads: &[&[F]]) {
        assert_eq!(params.len(), grads.len());
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![F::zero(); g.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let one = F::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            assert_eq!(p.len(), g.len());
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..g.len() {
                m[j] = self.beta1 * m[j] + (one - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (one - self.beta2) * g[j] * g[j];
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                p[j] = p[j] - self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = vec![1.0f64, -2.0];
        let mut adam = Adam::new(0.1);
        adam.step(&mut [&mut p], &[&[0.5, 0.5]]);
        let m_after_one = adam.first_moments()[0][0];
        for _ in 0..3 {
            let before = p.clone();
            adam.step(&mut [&mut p], &[&[0.0, 0.0]]);
            assert!(adam.first_moments()[0][0] < m_after_one);
            // Moments decay but the update stays nonzero; with lr 0 nothing moves.
            assert_ne!(p, before);
        }
        let mut q = vec![1.0f64, -2.0];
        let mut frozen = Adam::new(0.0);
        frozen.step(&mut [&mut q], &[&[3.0, -4.0]]);
        assert_eq!(q, vec![1.0, -2.0]);
        let mut z = vec![1.0f64];
        let mut fresh = Adam::new(0.1);
        fresh.step(&mut [&mut z], &[&[0.0]]);
        assert_eq!(z, vec![1.0]);
    }

    #[test]
    fn constant_gradient_steps_by_lr() {
        // With a constant gradient the bias-corrected ratio m/sqrt(v) is
        // exactly sign(g), so each step moves by lr (up to eps).
        let mut p = vec![0.0f64, 0.0];
        let mut adam = Adam::new(0.01);
        for step in 1..=200 {
            let before = p.clone();
            adam.step(&mut [&mut p], &[&[2.5, -0.3]]);
            assert!((before[0] - p[0] - 0.01).abs() < 1e-8, "step {step}");
            assert!((p[1] - before[1] - 0.01).abs() < 1e-6, "step {step}");
        }
    }
}
