//! Feed-forward regressor: ReLU hidden layers, identity output, trained by
//! mini-batch SGD with momentum on mean squared error.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![64, 32],
            epochs: 200,
            batch_size: 256,
            step_size: 1e-3,
            seed: 0,
        }
    }
}

/// Dense layer; `weights` is `n_out × n_in`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl MlpModel {
    /// Zero-parameter network with the given shape.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer {
                n_in: w[0],
                n_out: w[1],
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
            })
            .collect();
        Ok(MlpModel {
            layer_sizes: layer_sizes.to_vec(),
            layers,
        })
    }

    /// Uniform in `±1/√fan_in` for weights; zero biases.
    pub fn init(layer_sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let mut m = Self::zeros(layer_sizes)?;
        for l in &mut m.layers {
            let bound = 1.0 / (l.n_in as f64).sqrt();
            for w in &mut l.weights {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(m)
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Parameters flattened layer by layer, weights then biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
    }

    /// Activations of every layer; the first is the input itself.
    fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let input = &acts[li];
            let out: Vec<f64> = (0..l.n_out)
                .map(|o| {
                    let z = l.biases[o]
                        + l.weights[o * l.n_in..(o + 1) * l.n_in]
                            .iter()
                            .zip(input)
                            .map(|(w, v)| w * v)
                            .sum::<f64>();
                    if li < last {
                        z.max(0.0)
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.forward_all(x).last().expect("network has an output")[0]
    }

    /// Mean squared error over `rows` and its gradient in
    /// [`MlpModel::params_flat`] layout.
    pub fn loss_and_grad(&self, x: &DenseMatrix, y: &[f64], rows: &[usize]) -> (f64, Vec<f64>) {
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
            .collect();
        let inv = 1.0 / rows.len() as f64;
        let mut loss = 0.0;
        for &r in rows {
            let acts = self.forward_all(x.row(r));
            let err = acts.last().expect("output")[0] - y[r];
            loss += err * err * inv;
            // dL/dz at the output layer
            let mut delta = vec![2.0 * err * inv];
            for li in (0..self.layers.len()).rev() {
                let l = &self.layers[li];
                let input = &acts[li];
                let (gw, gb) = &mut grads[li];
                for o in 0..l.n_out {
                    gb[o] += delta[o];
                    for i in 0..l.n_in {
                        gw[o * l.n_in + i] += delta[o] * input[i];
                    }
                }
                if li > 0 {
                    let mut prev = vec![0.0; l.n_in];
                    for (i, p) in prev.iter_mut().enumerate() {
                        if input[i] > 0.0 {
                            *p = (0..l.n_out).map(|o| delta[o] * l.weights[o * l.n_in + i]).sum();
                        }
                    }
                    delta = prev;
                }
            }
        }
        let flat = grads.into_iter().flat_map(|(w, b)| w.into_iter().chain(b)).collect();
        (loss, flat)
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) || *sizes.last().unwrap() != 1 {
        return Err(Error::invalid(format!(
            "layer sizes must be non-zero and end with 1, got {sizes:?}"
        )));
    }
    Ok(())
}

pub fn mlp_fit(
    x: &DenseMatrix,
    y: &[f64],
    layer_sizes: &[usize],
    epochs: usize,
    batch_size: usize,
    step_size: f64,
    seed: u64,
) -> Result<MlpModel> {
    check_sizes(layer_sizes)?;
    if layer_sizes[0] != x.cols() {
        return Err(Error::Dimension {
            expected: layer_sizes[0],
            got: x.cols(),
        });
    }
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::invalid("mlp needs matching non-empty inputs"));
    }
    if batch_size == 0 || !(step_size > 0.0) {
        return Err(Error::invalid("mlp batch_size and step_size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = MlpModel::init(layer_sizes, &mut rng)?;
    let mut params = model.params_flat();
    let mut velocity = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..x.rows()).collect();
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            let (loss, grad) = model.loss_and_grad(x, y, batch);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training(format!(
                    "mlp loss became non-finite at epoch {epoch} (step_size {step_size} too large?)"
                )));
            }
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = MOMENTUM * *v - step_size * g;
                *p += *v;
            }
            model.set_params_flat(&params);
        }
    }
    Ok(model)
}

pub fn mlp_fit_params(x: &DenseMatrix, y: &[f64], p: &MlpParams) -> Result<MlpModel> {
    let mut sizes = vec![x.cols()];
    sizes.extend(&p.hidden);
    sizes.push(1);
    mlp_fit(x, y, &sizes, p.epochs, p.batch_size, p.step_size, p.seed)
}

pub fn mlp_predict(model: &MlpModel, x: &DenseMatrix) -> Result<Vec<f64>> {
    if x.cols() != model.n_inputs() {
        return Err(Error::Dimension {
            expected: model.n_inputs(),
            got: x.cols(),
        });
    }
    Ok(x.iter_rows().map(|r| model.forward(r)).collect())
}
