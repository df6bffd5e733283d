//! Small dense-numeric kernel with hand-written backward passes.
//!
//! Everything is generic over [`Real`] so the same code runs in `f32` for
//! training and in `f64` for gradient checks.

pub mod adam;
pub mod cell;
pub mod dense;
pub mod gradcheck;
pub mod pool;

use ndarray::Array2;

pub use adam::Adam;
pub use cell::{CellCache, LstmCell};
pub use dense::{Activation, Dense};
pub use gradcheck::{grad_check, relative_error};
pub use pool::{pool_backward, pool_pair, PoolMode};

/// Row-major matrix; a batch of row vectors.
pub type Tensor<F = f32> = Array2<F>;

pub trait Real:
    num_traits::Float
    + num_traits::NumAssign
    + num_traits::FromPrimitive
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("representable constant")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape { expected: (usize, usize), got: (usize, usize) },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub fn check_finite<F: Real>(t: &Tensor<F>, what: &'static str) -> Result<(), NnError> {
    if t.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NnError::NonFinite(what))
    }
}

/// Named parameter tensors, visited in a fixed order.
pub trait ParamSet<F: Real> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a [F])>);
    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [F]>);

    fn named(&self) -> Vec<(String, &[F])> {
        let mut out = Vec::new();
        self.visit("", &mut out);
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [F]> {
        let mut out = Vec::new();
        self.visit_mut(&mut out);
        out
    }

    fn flatten(&self) -> Vec<F> {
        self.named().into_iter().flat_map(|(_, s)| s.iter().copied()).collect()
    }

    fn load_flat(&mut self, flat: &[F]) {
        let mut at = 0;
        for s in self.slices_mut() {
            let n = s.len();
            s.copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        assert_eq!(at, flat.len(), "flat parameter length mismatch");
    }

    fn fill_zero(&mut self) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v = F::zero());
        }
    }

    fn param_count(&self) -> usize {
        self.named().iter().map(|(_, s)| s.len()).sum()
    }
}
