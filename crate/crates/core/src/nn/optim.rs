use crate::error::{Error, Result};

use super::scalar::Scalar;
use super::tensor::Tensor;

pub const DEFAULT_RHO: f64 = 0.95;
pub const DEFAULT_EPS: f64 = 1e-6;

/// AdaDelta accumulators, one pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct AdaDelta<T> {
    rho: T,
    eps: T,
    sq_grad: Vec<Vec<T>>,
    sq_update: Vec<Vec<T>>,
}

impl<T: Scalar> AdaDelta<T> {
    pub fn new(rho: f64, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) || eps <= 0.0 {
            return Err(Error::invalid("AdaDelta needs 0 <= rho < 1 and eps > 0"));
        }
        Ok(AdaDelta {
            rho: T::of(rho),
            eps: T::of(eps),
            sq_grad: Vec::new(),
            sq_update: Vec::new(),
        })
    }

    /// Accumulated `E[g^2]` of parameter `i`.
    pub fn sq_grad(&self, i: usize) -> &[T] {
        &self.sq_grad[i]
    }

    /// Accumulated `E[dx^2]` of parameter `i`.
    pub fn sq_update(&self, i: usize) -> &[T] {
        &self.sq_update[i]
    }

    /// One update of every parameter from its gradient.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Tensor<T>>, grads: &[Tensor<T>]) -> Result<()> {
        let params: Vec<&mut Tensor<T>> = params.into_iter().collect();
        if params.len() != grads.len() {
            return Err(Error::invalid("parameter and gradient counts differ"));
        }
        if self.sq_grad.is_empty() {
            self.sq_grad = grads.iter().map(|g| vec![T::zero(); g.len()]).collect();
            self.sq_update = self.sq_grad.clone();
        }
        if self.sq_grad.len() != grads.len() {
            return Err(Error::invalid("optimizer state has a different parameter count"));
        }
        let one = T::one();
        for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || self.sq_grad[i].len() != g.len() {
                return Err(Error::invalid(format!("shape mismatch for parameter {i}")));
            }
            let eg = &mut self.sq_grad[i];
            let ex = &mut self.sq_update[i];
            for (((x, &gv), a), b) in p.data_mut().iter_mut().zip(g.data()).zip(eg).zip(ex) {
                *a = self.rho * *a + (one - self.rho) * gv * gv;
                let dx = -((*b + self.eps).sqrt() / (*a + self.eps).sqrt()) * gv;
                *b = self.rho * *b + (one - self.rho) * dx * dx;
                *x = *x + dx;
            }
        }
        Ok(())
    }
}
