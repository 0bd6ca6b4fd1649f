//! Layers, parameter storage, initialization and the Adam optimizer.

use crate::autodiff::{Gradients, NodeId, ParamId, Tape};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
    Softplus,
}

/// Flat store of trainable matrices; [`ParamId`]s index into it.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParamStore {
    mats: Vec<Matrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn register(&mut self, m: Matrix) -> ParamId {
        self.mats.push(m);
        ParamId(self.mats.len() - 1)
    }

    pub fn get(&self, p: ParamId) -> &Matrix {
        &self.mats[p.0]
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn mats(&self) -> &[Matrix] {
        &self.mats
    }

    pub fn mats_mut(&mut self) -> &mut [Matrix] {
        &mut self.mats
    }

    /// All parameter values flattened in registration order.
    pub fn flatten(&self) -> Vec<f64> {
        self.mats.iter().flat_map(|m| m.data().iter().copied()).collect()
    }

    /// Overwrite all parameters from a flat blob produced by [`flatten`].
    pub fn unflatten(&mut self, blob: &[f64]) -> Result<()> {
        let total: usize = self.mats.iter().map(|m| m.data().len()).sum();
        if blob.len() != total {
            return Err(Error::Shape(format!(
                "parameter blob length {} != expected {}",
                blob.len(),
                total
            )));
        }
        let mut at = 0;
        for m in &mut self.mats {
            let n = m.data().len();
            m.data_mut().copy_from_slice(&blob[at..at + n]);
            at += n;
        }
        Ok(())
    }
}

/// Fully connected layer: `activation(x W^T + b)`, weights out x in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub activation: Activation,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero bias.
    pub fn new(
        store: &mut ParamStore,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let data = (0..out_dim * in_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let weight = store.register(Matrix::from_vec(out_dim, in_dim, data).unwrap());
        let bias = store.register(Matrix::zeros(1, out_dim));
        DenseLayer {
            weight,
            bias,
            activation,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let w = tape.param(self.weight, store.get(self.weight).clone());
        let b = tape.param(self.bias, store.get(self.bias).clone());
        let h = tape.matmul_nt(x, w)?;
        let h = tape.add_row(h, b)?;
        Ok(match self.activation {
            Activation::Relu => tape.relu(h),
            Activation::Tanh => tape.tanh(h),
            Activation::Linear => h,
            Activation::Softplus => tape.softplus(h),
        })
    }
}

/// Plain feed-forward stack, used by the baseline models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    pub fn new(
        store: &mut ParamStore,
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let mut layers = Vec::new();
        for i in 0..dims.len() - 1 {
            let act = if i + 2 == dims.len() { output } else { hidden };
            layers.push(DenseLayer::new(store, dims[i], dims[i + 1], act, rng));
        }
        Mlp { layers }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let mut h = x;
        for layer in &self.layers {
            h = layer.forward(tape, store, h)?;
        }
        Ok(h)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub step: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl AdamState {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let m = store
            .mats()
            .iter()
            .map(|p| Matrix::zeros(p.rows(), p.cols()))
            .collect::<Vec<_>>();
        AdamState {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            v: m.clone(),
            m,
        }
    }

    /// One update over every registered parameter. Parameters whose
    /// gradient is absent or zero are still bias-corrected but unchanged.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, p) in store.mats_mut().iter_mut().enumerate() {
            let g = match grads.get(ParamId(i)) {
                Some(g) => g,
                None => continue,
            };
            if !g.is_finite() {
                return Err(Error::Training {
                    step: self.step,
                    reason: format!("NaN gradient for parameter {}", i),
                });
            }
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for j in 0..p.data().len() {
                let gj = g.data()[j];
                let mj = self.beta1 * m.data()[j] + (1.0 - self.beta1) * gj;
                let vj = self.beta2 * v.data()[j] + (1.0 - self.beta2) * gj * gj;
                m.data_mut()[j] = mj;
                v.data_mut()[j] = vj;
                let mhat = mj / bc1;
                let vhat = vj / bc2;
                p.data_mut()[j] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let layer = DenseLayer::new(&mut store, 3, 2, Activation::Linear, &mut rng);
        let before = store.get(layer.weight).clone();

        let mut tape = Tape::new();
        let w = tape.param(layer.weight, before.clone());
        let zero = tape.scale(w, 0.0);
        let loss = tape.sum_all(zero);
        let grads = tape.backward(loss).unwrap();

        let mut adam = AdamState::new(&store, 0.01);
        adam.step(&mut store, &grads).unwrap();
        assert_eq!(store.get(layer.weight), &before);
    }

    #[test]
    fn first_adam_step_moves_by_lr_times_sign() {
        // with constant gradient g, the bias-corrected first step is
        // -lr * g / (|g| + eps) which is -lr * sign(g) up to eps
        let mut store = ParamStore::new();
        let p = store.register(Matrix::from_rows(&[vec![1.0, -2.0]]).unwrap());
        let mut tape = Tape::new();
        let pn = tape.param(p, store.get(p).clone());
        let scaled = {
            let c = tape.leaf(Matrix::from_rows(&[vec![3.0, -0.5]]).unwrap());
            tape.mul(pn, c).unwrap()
        };
        let loss = tape.sum_all(scaled);
        let grads = tape.backward(loss).unwrap();
        let mut adam = AdamState::new(&store, 0.1);
        adam.step(&mut store, &grads).unwrap();
        let got = store.get(p).row(0);
        assert!((got[0] - (1.0 - 0.1)).abs() < 1e-6);
        assert!((got[1] - (-2.0 + 0.1)).abs() < 1e-6);
    }

    #[test]
    fn adam_converges_on_quadratic() {
        // f(w) = (w - 3)^2 from w = 0
        let mut store = ParamStore::new();
        let p = store.register(Matrix::zeros(1, 1));
        let mut adam = AdamState::new(&store, 0.1);
        let mut gaps = Vec::new();
        for _ in 0..100 {
            let mut tape = Tape::new();
            let w = tape.param(p, store.get(p).clone());
            let target = tape.leaf(Matrix::filled(1, 1, 3.0));
            let d = tape.sub(w, target).unwrap();
            let sq = tape.square(d);
            let loss = tape.sum_all(sq);
            let grads = tape.backward(loss).unwrap();
            adam.step(&mut store, &grads).unwrap();
            gaps.push((store.get(p).get(0, 0) - 3.0).abs());
        }
        // monotone approach during the descent phase, before the iterate
        // starts orbiting the optimum
        let burn_in = gaps.iter().position(|&g| g < 0.2).unwrap();
        for w in gaps[..burn_in].windows(2) {
            assert!(w[1] < w[0], "not monotone while approaching the optimum");
        }
        assert!(gaps[99] < 0.2);
    }

    #[test]
    fn nan_gradient_reports_step() {
        let mut store = ParamStore::new();
        let _p = store.register(Matrix::filled(1, 1, 1.0));
        let grads = crate::autodiff::Gradients::from_raw(vec![Some(Matrix::filled(
            1,
            1,
            f64::NAN,
        ))]);
        let mut adam = AdamState::new(&store, 0.1);
        let err = adam.step(&mut store, &grads);
        assert!(matches!(err, Err(Error::Training { step: 1, .. })));
    }

    #[test]
    fn mlp_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let mlp = Mlp::new(
            &mut store,
            &[14, 14, 10],
            Activation::Tanh,
            Activation::Linear,
            &mut rng,
        );
        let mut tape = Tape::new();
        let x = tape.leaf(Matrix::zeros(7, 14));
        let y = mlp.forward(&mut tape, &store, x).unwrap();
        assert_eq!(tape.value(y).shape(), (7, 10));
    }
}
