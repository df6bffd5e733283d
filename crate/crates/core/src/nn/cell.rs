//! The tree cell:
//!
//! ```text
//! f  = sigmoid(W_f  [R', x] + b_f)
//! k1 = sigmoid(W_k1 [R', x] + b_k1)
//! r  = tanh   (W_r  [R', x] + b_r)
//! k2 = sigmoid(W_k2 [R', x] + b_k2)
//! G  = f * G' + k1 * r
//! R  = k2 * tanh(G)
//! ```
//!
//! `G'` and `R'` are the averaged child states.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::Rng;

use super::dense::{Activation, Dense};
use super::{NnError, ParamSet, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell<F> {
    pub f: Dense<F>,
    pub k1: Dense<F>,
    pub r: Dense<F>,
    pub k2: Dense<F>,
}

#[derive(Debug, Clone)]
pub struct CellCache<F> {
    xcat: Array2<F>,
    f: Array2<F>,
    k1: Array2<F>,
    r: Array2<F>,
    k2: Array2<F>,
    g_prev: Array2<F>,
    tanh_g: Array2<F>,
}

impl<F: Real> LstmCell<F> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let d = || Dense::zeros(hidden + input, hidden);
        LstmCell {
            f: d(),
            k1: d(),
            r: d(),
            k2: d(),
        }
    }

    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        LstmCell {
            f: Dense::init(hidden + input, hidden, rng),
            k1: Dense::init(hidden + input, hidden, rng),
            r: Dense::init(hidden + input, hidden, rng),
            k2: Dense::init(hidden + input, hidden, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.f.output_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.f.input_dim() - self.hidden()
    }

    pub fn cast<G: Real>(&self) -> LstmCell<G> {
        LstmCell {
            f: self.f.cast(),
            k1: self.k1.cast(),
            r: self.r.cast(),
            k2: self.k2.cast(),
        }
    }

    /// Returns `(G, R)` for every row.
    pub fn forward(
        &self,
        x: ArrayView2<F>,
        g_prev: ArrayView2<F>,
        r_prev: ArrayView2<F>,
    ) -> Result<(Array2<F>, Array2<F>, CellCache<F>), NnError> {
        let h = self.hidden();
        if g_prev.ncols() != h || r_prev.ncols() != h || g_prev.nrows() != x.nrows() || r_prev.nrows() != x.nrows() {
            return Err(NnError::Shape {
                expected: (x.nrows(), h),
                got: g_prev.dim(),
            });
        }
        let xcat = concatenate(Axis(1), &[r_prev, x]).expect("row counts checked");
        let f = self.f.forward(xcat.view(), Activation::Sigmoid)?;
        let k1 = self.k1.forward(xcat.view(), Activation::Sigmoid)?;
        let r = self.r.forward(xcat.view(), Activation::Tanh)?;
        let k2 = self.k2.forward(xcat.view(), Activation::Sigmoid)?;
        let g = &f * &g_prev + &k1 * &r;
        let tanh_g = g.mapv(|v| v.tanh());
        let rep = &k2 * &tanh_g;
        let cache = CellCache {
            xcat,
            f,
            k1,
            r,
            k2,
            g_prev: g_prev.to_owned(),
            tanh_g,
        };
        Ok((g, rep, cache))
    }

    /// Given `dL/dG` and `dL/dR`, accumulates parameter gradients and
    /// returns `(dL/dx, dL/dG', dL/dR')`.
    pub fn backward(
        &self,
        c: &CellCache<F>,
        dg: ArrayView2<F>,
        dr: ArrayView2<F>,
        grad: &mut LstmCell<F>,
    ) -> (Array2<F>, Array2<F>, Array2<F>) {
        let one = F::one();
        let dk2 = &dr * &c.tanh_g;
        let mut dg_total = dg.to_owned();
        ndarray::Zip::from(&mut dg_total)
            .and(&dr)
            .and(&c.k2)
            .and(&c.tanh_g)
            .for_each(|d, &drv, &k2, &t| *d = *d + drv * k2 * (one - t * t));
        let df = &dg_total * &c.g_prev;
        let dk1 = &dg_total * &c.r;
        let drr = &dg_total * &c.k1;
        let dg_prev = &dg_total * &c.f;
        let x = c.xcat.view();
        let mut dx = self.f.backward(x, c.f.view(), Activation::Sigmoid, df.view(), &mut grad.f);
        dx += &self.k1.backward(x, c.k1.view(), Activation::Sigmoid, dk1.view(), &mut grad.k1);
        dx += &self.r.backward(x, c.r.view(), Activation::Tanh, drr.view(), &mut grad.r);
        dx += &self.k2.backward(x, c.k2.view(), Activation::Sigmoid, dk2.view(), &mut grad.k2);
        let h = self.hidden();
        let dr_prev = dx.slice(s![.., ..h]).to_owned();
        let dx_in = dx.slice(s![.., h..]).to_owned();
        (dx_in, dg_prev, dr_prev)
    }
}

impl<F: Real> ParamSet<F> for LstmCell<F> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a [F])>) {
        self.f.visit(&format!("{prefix}f."), out);
        self.k1.visit(&format!("{prefix}k1."), out);
        self.r.visit(&format!("{prefix}r."), out);
        self.k2.visit(&format!("{prefix}k2."), out);
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [F]>) {
        self.f.visit_mut(out);
        self.k1.visit_mut(out);
        self.r.visit_mut(out);
        self.k2.visit_mut(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn zero_params_give_zero_state() {
        let cell = LstmCell::<f64>::zeros(3, 2);
        let x = Array2::from_elem((1, 3), 0.7);
        let z = Array2::zeros((1, 2));
        let (g, r, _) = cell.forward(x.view(), z.view(), z.view()).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn long_memory_pass_through() {
        let mut cell = LstmCell::<f64>::zeros(3, 2);
        cell.f.b.fill(60.0);
        cell.k1.b.fill(-60.0);
        let x = Array2::from_elem((1, 3), 0.3);
        let g_prev = ndarray::array![[0.25, -0.5]];
        let z = Array2::zeros((1, 2));
        let (g, _, _) = cell.forward(x.view(), g_prev.view(), z.view()).unwrap();
        for (a, b) in g.iter().zip(g_prev.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (inp, h) = (4, 3);
        let cell = LstmCell::<f64>::init(inp, h, &mut rng);
        let x: Vec<f64> = (0..inp).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gp: Vec<f64> = (0..h).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rp: Vec<f64> = (0..h).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xin: Vec<f64> = rp.iter().chain(&x).copied().collect();
        let affine = |d: &Dense<f64>, o: usize| d.b[o] + (0..h + inp).map(|i| d.w[[o, i]] * xin[i]).sum::<f64>();
        let (g, r, _) = cell
            .forward(
                Array2::from_shape_vec((1, inp), x.clone()).unwrap().view(),
                Array2::from_shape_vec((1, h), gp.clone()).unwrap().view(),
                Array2::from_shape_vec((1, h), rp.clone()).unwrap().view(),
            )
            .unwrap();
        for o in 0..h {
            let f = sig(affine(&cell.f, o));
            let k1 = sig(affine(&cell.k1, o));
            let rr = affine(&cell.r, o).tanh();
            let k2 = sig(affine(&cell.k2, o));
            let gt = f * gp[o] + k1 * rr;
            assert!((g[[0, o]] - gt).abs() < 1e-12);
            assert!((r[[0, o]] - k2 * gt.tanh()).abs() < 1e-12);
            assert!(r[[0, o]].abs() < 1.0);
        }
    }

    #[test]
    fn backward_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (inp, h, n) = (4, 3, 2);
        let cell = LstmCell::<f64>::init(inp, h, &mut rng);
        let rnd = |rng: &mut ChaCha8Rng, r, c| Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0));
        let x = rnd(&mut rng, n, inp);
        let gp = rnd(&mut rng, n, h);
        let rp = rnd(&mut rng, n, h);
        let wg = rnd(&mut rng, n, h);
        let wr = rnd(&mut rng, n, h);
        // Loss: <wg, G> + <wr, R>, checked over parameters and all inputs.
        let pack = |c: &LstmCell<f64>| {
            let mut v = c.flatten();
            v.extend(x.iter());
            v.extend(gp.iter());
            v.extend(rp.iter());
            v
        };
        let np = cell.param_count();
        let loss = |theta: &[f64]| {
            let mut c = cell.clone();
            c.load_flat(&theta[..np]);
            let mut at = np;
            let mut take = |r, cols| {
                let m = Array2::from_shape_vec((r, cols), theta[at..at + r * cols].to_vec()).unwrap();
                at += r * cols;
                m
            };
            let (xx, gg, rr) = (take(n, inp), take(n, h), take(n, h));
            let (g, r, _) = c.forward(xx.view(), gg.view(), rr.view()).unwrap();
            (&g * &wg).sum() + (&r * &wr).sum()
        };
        let (_, _, cache) = cell.forward(x.view(), gp.view(), rp.view()).unwrap();
        let mut grad = LstmCell::zeros(inp, h);
        let (dx, dgp, drp) = cell.backward(&cache, wg.view(), wr.view(), &mut grad);
        let mut analytic = grad.flatten();
        analytic.extend(dx.iter());
        analytic.extend(dgp.iter());
        analytic.extend(drp.iter());
        let err = grad_check(loss, &pack(&cell), &analytic, 1e-5);
        assert!(err < 1e-6, "max relative error {err}");
    }
}
