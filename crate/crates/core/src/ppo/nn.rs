//! Fully connected tanh networks with hand-written backpropagation, and Adam.

use std::fmt::Debug;
use std::ops::AddAssign;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point type usable for network parameters.
pub trait Real:
    LinalgScalar
    + Float
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + AddAssign
    + Debug
    + Default
    + Send
    + Sync
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Multilayer perceptron: tanh on hidden layers, linear output.
/// Weights are stored `[fan_in, fan_out]` so a batch is `x · W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

/// Layer inputs recorded during the forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    inputs: Vec<Array2<T>>,
}

impl<T: Real> Mlp<T> {
    /// Gaussian init with std `gain / sqrt(fan_in)`; the last layer uses `output_gain`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let n = sizes.len() - 1;
        let mut weights = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        for l in 0..n {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let gain = if l + 1 == n { output_gain } else { 1.0 };
            let std = gain / (fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_in, fan_out), |_| {
                let z: f64 = StandardNormal.sample(rng);
                T::of(std * z)
            });
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Self { weights, biases }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.weights[0].nrows()];
        s.extend(self.weights.iter().map(|w| w.ncols()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().map(|w| w.ncols()).unwrap_or(0)
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    fn layer(&self, l: usize, x: &ArrayView2<T>) -> Array2<T> {
        let mut z = x.dot(&self.weights[l]);
        z += &self.biases[l];
        if l + 1 < self.weights.len() {
            z.mapv_inplace(Float::tanh);
        }
        z
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Array2<T> {
        let mut a = self.layer(0, &x);
        for l in 1..self.weights.len() {
            a = self.layer(l, &a.view());
        }
        a
    }

    pub fn forward_cached(&self, x: ArrayView2<T>) -> (Array2<T>, MlpCache<T>) {
        let mut inputs = Vec::with_capacity(self.weights.len());
        inputs.push(x.to_owned());
        for l in 0..self.weights.len() {
            let a = self.layer(l, &inputs[l].view());
            inputs.push(a);
        }
        let out = inputs.pop().expect("at least one layer");
        (out, MlpCache { inputs })
    }

    /// Accumulates parameter gradients given ∂L/∂output into `grads`.
    pub fn backward(&self, cache: &MlpCache<T>, grad_out: Array2<T>, grads: &mut Self) {
        let mut dz = grad_out;
        for l in (0..self.weights.len()).rev() {
            let a = &cache.inputs[l];
            general_mat_mul(T::one(), &a.t(), &dz, T::one(), &mut grads.weights[l]);
            grads.biases[l] += &dz.sum_axis(Axis(0));
            if l > 0 {
                let mut da = dz.dot(&self.weights[l].t());
                da.zip_mut_with(a, |d, &y| *d = *d * (T::one() - y * y));
                dz = da;
            }
        }
    }

    pub fn slices(&self) -> Vec<&[T]> {
        let mut v: Vec<&[T]> = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.push(w.as_slice().expect("standard layout"));
            v.push(b.as_slice().expect("standard layout"));
        }
        v
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut v: Vec<&mut [T]> = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            v.push(w.as_slice_mut().expect("standard layout"));
            v.push(b.as_slice_mut().expect("standard layout"));
        }
        v
    }

    /// `(suffix, shape)` for each tensor in `slices()` order.
    pub fn tensor_layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut v = Vec::new();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            v.push((format!("{l}.weight"), w.shape().to_vec()));
            v.push((format!("{l}.bias"), b.shape().to_vec()));
        }
        v
    }

    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp {
            weights: self.weights.iter().map(|w| w.mapv(|x| U::of(x.f64()))).collect(),
            biases: self.biases.iter().map(|b| b.mapv(|x| U::of(x.f64()))).collect(),
        }
    }
}

/// Adam with bias correction; moments mirror the parameter slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(shapes: &[usize], eps: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps,
            step: 0,
            m: shapes.iter().map(|n| vec![T::zero(); *n]).collect(),
            v: shapes.iter().map(|n| vec![T::zero(); *n]).collect(),
        }
    }

    pub fn update(&mut self, params: Vec<&mut [T]>, grads: Vec<&[T]>, lr: f64) {
        assert_eq!(params.len(), self.m.len(), "parameter tensor count changed");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (ob1, ob2) = (T::of(1.0 - self.beta1), T::of(1.0 - self.beta2));
        let step = T::of(lr * c2.sqrt() / c1);
        let eps = T::of(self.eps * c2.sqrt());
        for ((p, g), (m, v)) in params
            .into_iter()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + ob1 * g[i];
                v[i] = b2 * v[i] + ob2 * g[i] * g[i];
                p[i] = p[i] - step * m[i] / (v[i].sqrt() + eps);
            }
        }
    }
}

/// Euclidean norm over all slices, accumulated in f64.
pub fn global_norm<T: Real>(slices: &[&[T]]) -> f64 {
    slices
        .iter()
        .flat_map(|s| s.iter())
        .map(|x| {
            let x = x.f64();
            x * x
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forward_matches_hand_computation() {
        let net = Mlp {
            weights: vec![array![[1.0, -1.0], [0.5, 2.0]], array![[2.0], [1.0]]],
            biases: vec![array![0.0, 0.1], array![-0.5]],
        };
        let x = array![[0.3, -0.2]];
        let h0 = (0.3f64 - 0.1).tanh();
        let h1 = (-0.3f64 - 0.4 + 0.1).tanh();
        let y = net.forward(x.view());
        assert!((y[[0, 0]] - (2.0 * h0 + h1 - 0.5)).abs() < 1e-12);
        let (yc, _) = net.forward_cached(x.view());
        assert_eq!(y, yc);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net: Mlp<f64> = Mlp::new(&[3, 5, 4, 2], 1.0, &mut rng);
        let x = Array2::from_shape_fn((6, 3), |(i, j)| ((i * 3 + j) as f64 * 0.7).sin());
        // L = Σ c ⊙ y
        let c = Array2::from_shape_fn((6, 2), |(i, j)| ((i + 2 * j) as f64).cos());
        let loss = |n: &Mlp<f64>| (&n.forward(x.view()) * &c).sum();
        let (_, cache) = net.forward_cached(x.view());
        let mut g = net.zeros_like();
        net.backward(&cache, c.clone(), &mut g);
        let h = 1e-6;
        let grads: Vec<Vec<f64>> = g.slices().iter().map(|s| s.to_vec()).collect();
        for (t, gt) in grads.iter().enumerate() {
            for i in 0..gt.len() {
                let mut p = net.clone();
                p.slices_mut()[t][i] += h;
                let up = loss(&p);
                p.slices_mut()[t][i] -= 2.0 * h;
                let down = loss(&p);
                let fd = (up - down) / (2.0 * h);
                assert!((fd - gt[i]).abs() < 1e-7, "tensor {t} index {i}: {fd} vs {}", gt[i]);
            }
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = vec![1.0f64, -2.0];
        let g = vec![0.5, -3.0];
        let mut adam = Adam::<f64>::new(&[2], 1e-8);
        adam.update(vec![&mut p[..]], vec![&g[..]], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 1.9).abs() < 1e-6);
    }

    #[test]
    fn norm_and_cast() {
        let a = [3.0f32];
        let b = [4.0f32];
        assert!((global_norm(&[&a[..], &b[..]]) - 5.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net: Mlp<f64> = Mlp::new(&[4, 8, 2], 0.01, &mut rng);
        assert_eq!(net.cast::<f32>().sizes(), vec![4, 8, 2]);
        assert_eq!(net.tensor_layout()[2], ("1.weight".to_string(), vec![8, 2]));
    }
}
