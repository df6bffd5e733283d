use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::{NnError, ParamSet, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply<F: Real>(self, x: F) -> F {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(F::zero()),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    pub fn derivative_from_output<F: Real>(self, y: F) -> F {
        match self {
            Activation::Identity => F::one(),
            Activation::Relu => {
                if y > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Activation::Sigmoid => y * (F::one() - y),
            Activation::Tanh => F::one() - y * y,
        }
    }
}

pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Affine map `y = act(x W^T + b)` applied to every row of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    /// `out x in`.
    pub w: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Real> Dense<F> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            w: Array2::zeros((output, input)),
            b: Array1::zeros(output),
        }
    }

    /// Weights uniform in `±1/sqrt(input)`, zero biases.
    pub fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        Dense {
            w: Array2::from_shape_fn((output, input), |_| F::lit(rng.random_range(-bound..bound))),
            b: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn cast<G: Real>(&self) -> Dense<G> {
        Dense {
            w: self.w.mapv(|v| G::from(v).unwrap()),
            b: self.b.mapv(|v| G::from(v).unwrap()),
        }
    }

    pub fn forward(&self, x: ArrayView2<F>, act: Activation) -> Result<Array2<F>, NnError> {
        if x.ncols() != self.input_dim() {
            return Err(NnError::Shape {
                expected: (x.nrows(), self.input_dim()),
                got: x.dim(),
            });
        }
        let mut y = x.dot(&self.w.t());
        y += &self.b;
        if act != Activation::Identity {
            y.mapv_inplace(|v| act.apply(v));
        }
        Ok(y)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    /// `y` is the forward output.
    pub fn backward(
        &self,
        x: ArrayView2<F>,
        y: ArrayView2<F>,
        act: Activation,
        dy: ArrayView2<F>,
        grad: &mut Dense<F>,
    ) -> Array2<F> {
        let dz = if act == Activation::Identity {
            dy.to_owned()
        } else {
            let mut dz = dy.to_owned();
            dz.zip_mut_with(&y, |d, &yv| *d = *d * act.derivative_from_output(yv));
            dz
        };
        grad.w += &dz.t().dot(&x);
        grad.b += &dz.sum_axis(Axis(0));
        dz.dot(&self.w)
    }
}

impl<F: Real> ParamSet<F> for Dense<F> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a [F])>) {
        out.push((format!("{prefix}w"), self.w.as_slice().expect("contiguous")));
        out.push((format!("{prefix}b"), self.b.as_slice().expect("contiguous")));
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [F]>) {
        out.push(self.w.as_slice_mut().expect("contiguous"));
        out.push(self.b.as_slice_mut().expect("contiguous"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_weights_pass_through() {
        let d = Dense::<f64> {
            w: Array2::eye(3),
            b: Array1::zeros(3),
        };
        let x = array![[1.0, -2.0, 3.0]];
        assert_eq!(d.forward(x.view(), Activation::Identity).unwrap(), x);
        let y = d.forward(array![[-1.0, 2.0, 0.0]].view(), Activation::Relu).unwrap();
        assert_eq!(y, array![[0.0, 2.0, 0.0]]);
    }

    #[test]
    fn matches_scalar_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut d = Dense::<f64>::init(7, 4, &mut rng);
        d.b = Array1::from_shape_fn(4, |_| rng.random_range(-1.0..1.0));
        let x = Array2::from_shape_fn((3, 7), |_| rng.random_range(-1.0..1.0));
        for act in [Activation::Identity, Activation::Relu, Activation::Sigmoid, Activation::Tanh] {
            let y = d.forward(x.view(), act).unwrap();
            for r in 0..3 {
                for o in 0..4 {
                    let mut z = d.b[o];
                    for i in 0..7 {
                        z += d.w[[o, i]] * x[[r, i]];
                    }
                    let want = match act {
                        Activation::Identity => z,
                        Activation::Relu => z.max(0.0),
                        Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
                        Activation::Tanh => z.tanh(),
                    };
                    assert!((y[[r, o]] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let d = Dense::<f32>::zeros(3, 2);
        assert!(d.forward(Array2::zeros((1, 4)).view(), Activation::Relu).is_err());
    }

    #[test]
    fn init_bounds_and_zero_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = Dense::<f32>::init(16, 8, &mut rng);
        assert!(d.w.iter().all(|w| w.abs() <= 0.25));
        assert!(d.b.iter().all(|&b| b == 0.0));
    }
}
