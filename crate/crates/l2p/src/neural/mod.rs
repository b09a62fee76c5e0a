//! Dense-network substrate for the agents: affine layers with tanh hidden
//! activations, exact reverse-mode gradients, Adamax, global gradient-norm
//! clipping and a flat binary checkpoint format.
//!
//! Everything is 64-bit so analytic gradients can be verified against
//! central finite differences.

mod adamax;
mod checkpoint;

pub use adamax::AdamaxState;
pub use checkpoint::{load_checkpoint, save_checkpoint, NamedTensor};

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub input_size: usize,
    pub output_size: usize,
    /// Row-major `[output][input]`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn forward_into(&self, input: &[f64], pre: &mut Vec<f64>, post: &mut Vec<f64>) {
        pre.clear();
        post.clear();
        for o in 0..self.output_size {
            let row = &self.weights[o * self.input_size..(o + 1) * self.input_size];
            let mut z = self.biases[o];
            for (w, x) in row.iter().zip(input) {
                z += w * x;
            }
            pre.push(z);
            post.push(match self.activation {
                Activation::Tanh => z.tanh(),
                Activation::Identity => z,
            });
        }
    }
}

/// Fully connected network; hidden layers use tanh, the output is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    /// Post-activation values per layer; the last entry is the output.
    pub post: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("network has at least one layer")
    }
}

/// Parameter gradients in the same layout as [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &MlpGrads) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in w.iter_mut().zip(ow) {
                *x += y;
            }
            for (x, y) in b.iter_mut().zip(ob) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in self.layers.iter_mut() {
            for x in w.iter_mut() {
                *x *= factor;
            }
            for x in b.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

impl Mlp {
    /// Seeded scaled-uniform fan-in initialization: each weight is drawn
    /// from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases start at zero.
    pub fn init<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (li, pair) in sizes.windows(2).enumerate() {
            let (nin, nout) = (pair[0], pair[1]);
            let bound = 1.0 / (nin as f64).sqrt();
            let weights = (0..nin * nout).map(|_| rng.gen_range(-bound..bound)).collect();
            layers.push(Layer {
                input_size: nin,
                output_size: nout,
                weights,
                biases: vec![0.0; nout],
                activation: if li + 2 == sizes.len() {
                    Activation::Identity
                } else {
                    Activation::Tanh
                },
            });
        }
        Self { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(li, pair)| Layer {
                input_size: pair[0],
                output_size: pair[1],
                weights: vec![0.0; pair[0] * pair[1]],
                biases: vec![0.0; pair[1]],
                activation: if li + 2 == sizes.len() {
                    Activation::Identity
                } else {
                    Activation::Tanh
                },
            })
            .collect();
        Self { layers }
    }

    pub fn input_size(&self) -> usize {
        self.layers.first().expect("non-empty").input_size
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("non-empty").output_size
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_cached(input).post.pop().expect("non-empty")
    }

    pub fn forward_cached(&self, input: &[f64]) -> ForwardCache {
        assert_eq!(input.len(), self.input_size(), "input size mismatch");
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::new();
        let mut act = Vec::new();
        let mut cur: &[f64] = input;
        for layer in &self.layers {
            layer.forward_into(cur, &mut pre, &mut act);
            post.push(act.clone());
            cur = post.last().unwrap();
        }
        ForwardCache { input: input.to_vec(), post }
    }

    /// Exact reverse-mode gradients of `output · upstream` with respect to
    /// every parameter; also returns the gradient w.r.t. the input vector.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> (MlpGrads, Vec<f64>) {
        assert_eq!(upstream.len(), self.output_size(), "upstream size mismatch");
        let mut grads = MlpGrads::zeros_like(self);
        let mut delta: Vec<f64> = upstream.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            // d(activation)/d(pre-activation)
            if layer.activation == Activation::Tanh {
                for (d, y) in delta.iter_mut().zip(&cache.post[li]) {
                    *d *= 1.0 - y * y;
                }
            }
            let input: &[f64] = if li == 0 { &cache.input } else { &cache.post[li - 1] };
            let (gw, gb) = &mut grads.layers[li];
            for o in 0..layer.output_size {
                let dz = delta[o];
                gb[o] = dz;
                let row = &mut gw[o * layer.input_size..(o + 1) * layer.input_size];
                for (g, x) in row.iter_mut().zip(input) {
                    *g = dz * x;
                }
            }
            let mut prev = vec![0.0; layer.input_size];
            for o in 0..layer.output_size {
                let dz = delta[o];
                let row = &layer.weights[o * layer.input_size..(o + 1) * layer.input_size];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += dz * w;
                }
            }
            delta = prev;
        }
        (grads, delta)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "parameter count mismatch");
        let mut off = 0;
        for l in self.layers.iter_mut() {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
    }

    /// Checkpoint view of the parameters, names prefixed per layer.
    pub fn to_tensors(&self, prefix: &str) -> Vec<NamedTensor> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push(NamedTensor {
                name: format!("{prefix}.{i}.weight"),
                shape: vec![l.output_size, l.input_size],
                data: l.weights.clone(),
            });
            out.push(NamedTensor {
                name: format!("{prefix}.{i}.bias"),
                shape: vec![l.output_size],
                data: l.biases.clone(),
            });
        }
        out
    }

    /// Loads parameter values by tensor name, validating shapes.
    pub fn load_tensors(&mut self, prefix: &str, tensors: &[NamedTensor]) -> std::io::Result<()> {
        let find = |name: &str| -> std::io::Result<&NamedTensor> {
            tensors.iter().find(|t| t.name == name).ok_or_else(|| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("checkpoint is missing tensor {name}"),
                )
            })
        };
        for (i, l) in self.layers.iter_mut().enumerate() {
            let w = find(&format!("{prefix}.{i}.weight"))?;
            let b = find(&format!("{prefix}.{i}.bias"))?;
            if w.shape != [l.output_size, l.input_size] || b.shape != [l.output_size] {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("checkpoint shape mismatch at layer {i} of {prefix}"),
                ));
            }
            l.weights.copy_from_slice(&w.data);
            l.biases.copy_from_slice(&b.data);
        }
        Ok(())
    }
}

/// Scales all gradients so their global L2 norm does not exceed `max_norm`;
/// returns the pre-clip norm.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}
