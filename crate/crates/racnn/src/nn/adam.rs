//! Adam over a flat parameter vector, with bias-corrected moments.

use crate::{lit, Error, Result, Scalar};

#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<T>,
    v: Vec<T>,
    t: u32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        if lr < 0.0 || !lr.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and non-negative, got {lr}"
            )));
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::InvalidArgument(format!(
                "betas must lie in (0, 1), got {beta1} and {beta2}"
            )));
        }
        if eps <= 0.0 {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
        }
        Ok(Adam { lr, beta1, beta2, eps, m: vec![T::zero(); n], v: vec![T::zero(); n], t: 0 })
    }

    pub fn step_count(&self) -> u32 {
        self.t
    }

    /// One bias-corrected update, in place:
    /// `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "optimizer sized for {} parameters, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        self.t += 1;
        let b1: T = lit(self.beta1);
        let b2: T = lit(self.beta2);
        let one = T::one();
        let corr1: T = lit(1.0 - self.beta1.powi(self.t as i32));
        let corr2: T = lit(1.0 - self.beta2.powi(self.t as i32));
        let lr: T = lit(self.lr);
        let eps: T = lit(self.eps);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let m_hat = self.m[i] / corr1;
            let v_hat = self.v[i] / corr2;
            params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
