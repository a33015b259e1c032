//! Symmetric two-layer MLP autoencoder trained on the joint loss
//!
//! ```text
//! L = −(1/n) Σ_i log p(f(x_i)) + (1/n) Σ_i ‖x_i − x̂_i‖²
//! ```
//!
//! where `p` is the (frozen) latent mixture density. The encoder is
//! `relu(x·W1 + b1)·W2 + b2` with a linear output; the decoder mirrors it.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mixture::MixtureParams;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub enc_w1: Array2<f64>,
    pub enc_b1: Array1<f64>,
    pub enc_w2: Array2<f64>,
    pub enc_b2: Array1<f64>,
    pub dec_w1: Array2<f64>,
    pub dec_b1: Array1<f64>,
    pub dec_w2: Array2<f64>,
    pub dec_b2: Array1<f64>,
}

/// Gradients share the parameter layout.
pub type Gradients = EncoderParams;

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..bound))
}

impl EncoderParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(input_dim: usize, hidden: usize, latent: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || latent == 0 {
            return Err(Error::InvalidArgument(format!(
                "layer widths must be positive (D={input_dim}, H={hidden}, d={latent})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            enc_w1: glorot(&mut rng, input_dim, hidden),
            enc_b1: Array1::zeros(hidden),
            enc_w2: glorot(&mut rng, hidden, latent),
            enc_b2: Array1::zeros(latent),
            dec_w1: glorot(&mut rng, latent, hidden),
            dec_b1: Array1::zeros(hidden),
            dec_w2: glorot(&mut rng, hidden, input_dim),
            dec_b2: Array1::zeros(input_dim),
        })
    }

    /// An encoder and decoder that are both exactly the identity map, built
    /// from `relu(x) − relu(−x) = x`. Needs `hidden ≥ 2·input_dim`; the latent
    /// width equals `input_dim`.
    pub fn identity(input_dim: usize, hidden: usize) -> Result<Self> {
        if input_dim == 0 || hidden < 2 * input_dim {
            return Err(Error::InvalidArgument(format!(
                "identity encoder needs hidden >= 2*D (D={input_dim}, H={hidden})"
            )));
        }
        let split = |rows: usize, cols: usize, transpose: bool| {
            let mut w = Array2::zeros((rows, cols));
            for j in 0..input_dim {
                let (pos, neg) = if transpose {
                    ((j, j), (input_dim + j, j))
                } else {
                    ((j, j), (j, input_dim + j))
                };
                w[pos] = 1.0;
                w[neg] = -1.0;
            }
            w
        };
        Ok(Self {
            enc_w1: split(input_dim, hidden, false),
            enc_b1: Array1::zeros(hidden),
            enc_w2: split(hidden, input_dim, true),
            enc_b2: Array1::zeros(input_dim),
            dec_w1: split(input_dim, hidden, false),
            dec_b1: Array1::zeros(hidden),
            dec_w2: split(hidden, input_dim, true),
            dec_b2: Array1::zeros(input_dim),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            enc_w1: Array2::zeros(self.enc_w1.raw_dim()),
            enc_b1: Array1::zeros(self.enc_b1.raw_dim()),
            enc_w2: Array2::zeros(self.enc_w2.raw_dim()),
            enc_b2: Array1::zeros(self.enc_b2.raw_dim()),
            dec_w1: Array2::zeros(self.dec_w1.raw_dim()),
            dec_b1: Array1::zeros(self.dec_b1.raw_dim()),
            dec_w2: Array2::zeros(self.dec_w2.raw_dim()),
            dec_b2: Array1::zeros(self.dec_b2.raw_dim()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.enc_w1.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.enc_w1.ncols()
    }

    pub fn latent_dim(&self) -> usize {
        self.enc_w2.ncols()
    }

    /// Flat views of every tensor, in declaration order.
    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            self.enc_w1.as_slice().expect("standard layout"),
            self.enc_b1.as_slice().expect("standard layout"),
            self.enc_w2.as_slice().expect("standard layout"),
            self.enc_b2.as_slice().expect("standard layout"),
            self.dec_w1.as_slice().expect("standard layout"),
            self.dec_b1.as_slice().expect("standard layout"),
            self.dec_w2.as_slice().expect("standard layout"),
            self.dec_b2.as_slice().expect("standard layout"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.enc_w1.as_slice_mut().expect("standard layout"),
            self.enc_b1.as_slice_mut().expect("standard layout"),
            self.enc_w2.as_slice_mut().expect("standard layout"),
            self.enc_b2.as_slice_mut().expect("standard layout"),
            self.dec_w1.as_slice_mut().expect("standard layout"),
            self.dec_b1.as_slice_mut().expect("standard layout"),
            self.dec_w2.as_slice_mut().expect("standard layout"),
            self.dec_b2.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Euclidean norm over all tensors.
    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        Ok(())
    }

    /// Latent embeddings `Z` for the rows of `x`.
    pub fn encode(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let h = relu(x.dot(&self.enc_w1) + &self.enc_b1);
        Ok(h.dot(&self.enc_w2) + &self.enc_b2)
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Forward> {
        let cache = self.forward_cached(x)?;
        let recon_loss = recon_loss(x, cache.x_hat.view());
        Ok(Forward {
            z: cache.z,
            x_hat: cache.x_hat,
            recon_loss,
        })
    }

    fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Result<Cache> {
        self.check_input(x)?;
        let a1 = x.dot(&self.enc_w1) + &self.enc_b1;
        let h1 = relu(a1.clone());
        let z = h1.dot(&self.enc_w2) + &self.enc_b2;
        let a2 = z.dot(&self.dec_w1) + &self.dec_b1;
        let h2 = relu(a2.clone());
        let x_hat = h2.dot(&self.dec_w2) + &self.dec_b2;
        Ok(Cache {
            a1,
            h1,
            z,
            a2,
            h2,
            x_hat,
        })
    }
}

/// Products with a transposed operand may come back column-major.
fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

fn relu(mut a: Array2<f64>) -> Array2<f64> {
    a.mapv_inplace(|v| v.max(0.0));
    a
}

/// Mean over rows of the squared L2 reconstruction error.
fn recon_loss(x: ArrayView2<'_, f64>, x_hat: ArrayView2<'_, f64>) -> f64 {
    let n = x.nrows();
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = Zip::from(&x).and(&x_hat).fold(0.0, |acc, a, b| acc + (a - b) * (a - b));
    sq / n as f64
}

struct Cache {
    a1: Array2<f64>,
    h1: Array2<f64>,
    z: Array2<f64>,
    a2: Array2<f64>,
    h2: Array2<f64>,
    x_hat: Array2<f64>,
}

/// Output of [`EncoderParams::forward`].
#[derive(Debug, Clone)]
pub struct Forward {
    pub z: Array2<f64>,
    pub x_hat: Array2<f64>,
    pub recon_loss: f64,
}

/// The two additive terms of the joint loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLoss {
    /// `−(1/n) Σ log p(z_i)`; zero when the likelihood term is disabled.
    pub likelihood: f64,
    /// `(1/n) Σ ‖x_i − x̂_i‖²`.
    pub recon: f64,
}

impl JointLoss {
    pub fn total(&self) -> f64 {
        self.likelihood + self.recon
    }
}

fn check_mixture(params: &EncoderParams, mixture: Option<&MixtureParams>) -> Result<()> {
    if let Some(m) = mixture {
        if m.latent_dim() != params.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: params.latent_dim(),
                found: m.latent_dim(),
            });
        }
    }
    Ok(())
}

/// Joint loss on `x_kept`. Passing `None` for the mixture drops the likelihood
/// term and leaves a plain autoencoder objective.
pub fn joint_loss(
    params: &EncoderParams,
    mixture: Option<&MixtureParams>,
    x_kept: ArrayView2<'_, f64>,
) -> Result<JointLoss> {
    check_mixture(params, mixture)?;
    let fwd = params.forward(x_kept)?;
    let n = x_kept.nrows();
    let likelihood = match mixture {
        Some(m) if n > 0 => {
            let coeffs = m.log_coefficients();
            let total: f64 = fwd
                .z
                .outer_iter()
                .map(|z| crate::mixture::log_sum_exp(&m.log_forces(z, &coeffs).0))
                .sum();
            -total / n as f64
        }
        _ => 0.0,
    };
    Ok(JointLoss {
        likelihood,
        recon: fwd.recon_loss,
    })
}

/// Analytic gradient of [`joint_loss`] with respect to every encoder and
/// decoder tensor. Mixture parameters are constants here.
pub fn joint_loss_gradient(
    params: &EncoderParams,
    mixture: Option<&MixtureParams>,
    x_kept: ArrayView2<'_, f64>,
) -> Result<(Gradients, JointLoss)> {
    check_mixture(params, mixture)?;
    let n = x_kept.nrows();
    if n == 0 {
        return Ok((
            params.zeros_like(),
            JointLoss {
                likelihood: 0.0,
                recon: 0.0,
            },
        ));
    }
    let inv_n = 1.0 / n as f64;
    let c = params.forward_cached(x_kept)?;
    let recon = recon_loss(x_kept, c.x_hat.view());

    // Decoder.
    let d_xhat = (&c.x_hat - &x_kept) * (2.0 * inv_n);
    let dec_w2 = c.h2.t().dot(&d_xhat);
    let dec_b2 = d_xhat.sum_axis(Axis(0));
    let mut d_a2 = d_xhat.dot(&params.dec_w2.t());
    Zip::from(&mut d_a2).and(&c.a2).for_each(|g, &a| {
        if a <= 0.0 {
            *g = 0.0;
        }
    });
    let dec_w1 = c.z.t().dot(&d_a2);
    let dec_b1 = d_a2.sum_axis(Axis(0));
    let mut d_z = d_a2.dot(&params.dec_w1.t());

    // Likelihood term.
    let mut likelihood = 0.0;
    if let Some(m) = mixture {
        let coeffs = m.log_coefficients();
        let mut g = vec![0.0; params.latent_dim()];
        let mut total = 0.0;
        for (z, mut dz) in c.z.outer_iter().zip(d_z.outer_iter_mut()) {
            total += m.log_likelihood_and_grad(z, &coeffs, &mut g);
            for (dst, gj) in dz.iter_mut().zip(&g) {
                *dst += gj * inv_n;
            }
        }
        likelihood = -total * inv_n;
    }

    // Encoder.
    let enc_w2 = c.h1.t().dot(&d_z);
    let enc_b2 = d_z.sum_axis(Axis(0));
    let mut d_a1 = d_z.dot(&params.enc_w2.t());
    Zip::from(&mut d_a1).and(&c.a1).for_each(|g, &a| {
        if a <= 0.0 {
            *g = 0.0;
        }
    });
    let enc_w1 = x_kept.t().dot(&d_a1);
    let enc_b1 = d_a1.sum_axis(Axis(0));

    let grads = EncoderParams {
        enc_w1: standard(enc_w1),
        enc_b1,
        enc_w2: standard(enc_w2),
        enc_b2,
        dec_w1: standard(dec_w1),
        dec_b1,
        dec_w2: standard(dec_w2),
        dec_b2,
    };
    Ok((grads, JointLoss { likelihood, recon }))
}

/// Adam moments and hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: EncoderParams,
    pub second_moment: EncoderParams,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Zeroed moments with β = (0.9, 0.999) and ε = 1e-8.
    pub fn new(params: &EncoderParams, lr: f64) -> Self {
        Self {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut EncoderParams, grads: &Gradients, state: &mut AdamState) {
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    let (lr, eps) = (state.lr, state.epsilon);
    let p = params.tensors_mut();
    let m = state.first_moment.tensors_mut();
    let v = state.second_moment.tensors_mut();
    let g = grads.tensors();
    for (((p, m), v), g) in p.into_iter().zip(m).zip(v).zip(g) {
        for (((p, m), v), &g) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Batch size rule: one full batch up to 2048 rows, 256-row minibatches above.
pub fn default_batch_size(n: usize) -> usize {
    if n <= 2048 {
        n.max(1)
    } else {
        256
    }
}

/// Runs `epochs` passes of minibatch Adam over `x_kept`. Row order is
/// reshuffled every epoch from a stream keyed by `(seed, epoch)`. Returns the
/// joint loss on all of `x_kept` after the last update.
pub fn train_epochs(
    params: &mut EncoderParams,
    mixture: Option<&MixtureParams>,
    x_kept: ArrayView2<'_, f64>,
    epochs: usize,
    batch_size: usize,
    state: &mut AdamState,
    seed: u64,
) -> Result<JointLoss> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be positive".into()));
    }
    let n = x_kept.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot train on an empty batch".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for epoch in 0..epochs {
        rng.set_stream(epoch as u64);
        rng.set_word_pos(0);
        if batch_size < n {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch_size) {
            let (grads, _) = if chunk.len() == n {
                joint_loss_gradient(params, mixture, x_kept)?
            } else {
                let batch = x_kept.select(Axis(0), chunk);
                joint_loss_gradient(params, mixture, batch.view())?
            };
            adam_step(params, &grads, state);
        }
        if !params.is_finite() {
            return Err(Error::Numeric(format!(
                "encoder parameters became non-finite in epoch {epoch}"
            )));
        }
    }
    joint_loss(params, mixture, x_kept)
}
