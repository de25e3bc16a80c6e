//! Dense encoder/decoder VAE and the standard ELBO losses.
//!
//! ```text
//! x ─ encoder ─▶ [μ | log σ²] ─ z = μ + σ·ε ─ decoder ─▶ x̂
//! ```
//!
//! The encoder's last layer has width `2·D`; columns `0..D` are the means and
//! columns `D..2D` the log-variances. The decoder either emits pixel values
//! through a sigmoid (`OutputHead::Real`) or per-position logits
//! (`OutputHead::Categorical`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numgrad::{log_sum_exp, ParameterSet, SeededRng, Tape, Tensor, UnaryOp, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Selu,
    Tanh,
}

impl Activation {
    fn op(self) -> UnaryOp {
        match self {
            Activation::Relu => UnaryOp::Relu,
            Activation::Selu => UnaryOp::Selu,
            Activation::Tanh => UnaryOp::Tanh,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OutputHead {
    /// Sigmoid outputs compared by squared error.
    Real,
    /// `positions × classes` logits compared by cross-entropy.
    Categorical { positions: usize, classes: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_width: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub latent: usize,
    pub activation: Activation,
    pub head: OutputHead,
}

impl Architecture {
    /// Desk-scale layout: hidden `[128, 64]` mirrored in the decoder, relu.
    pub fn desk_scale(input_width: usize, latent: usize, head: OutputHead) -> Self {
        Architecture {
            input_width,
            encoder_hidden: vec![128, 64],
            decoder_hidden: vec![64, 128],
            latent,
            activation: Activation::Relu,
            head,
        }
    }

    pub fn output_width(&self) -> usize {
        match self.head {
            OutputHead::Real => self.input_width,
            OutputHead::Categorical { positions, classes } => positions * classes,
        }
    }

    fn encoder_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_width];
        s.extend(&self.encoder_hidden);
        s.push(2 * self.latent);
        s
    }

    fn decoder_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.latent];
        s.extend(&self.decoder_hidden);
        s.push(self.output_width());
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent == 0 || self.input_width == 0 {
            return Err(Error::contract("latent and input widths must be positive"));
        }
        if self.encoder_hidden.iter().chain(&self.decoder_hidden).any(|&h| h == 0) {
            return Err(Error::contract("hidden layer of width 0"));
        }
        if let OutputHead::Categorical { positions, classes } = self.head {
            if positions * classes != self.input_width {
                return Err(Error::contract(format!(
                    "categorical head {positions}x{classes} does not match input width {}",
                    self.input_width
                )));
            }
        }
        Ok(())
    }
}

/// Encoder/decoder parameters with their architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpVae {
    arch: Architecture,
    params: ParameterSet,
}

impl MlpVae {
    /// He-uniform weights, zero biases.
    pub fn new(arch: Architecture, rng: &mut SeededRng) -> Result<Self> {
        Self::build(arch, |fan_in, fan_out, out| {
            let bound = (6.0 / fan_in as f64).sqrt();
            debug_assert_eq!(out.len(), fan_in * fan_out);
            for v in out.iter_mut() {
                *v = rng.uniform_range(-bound, bound);
            }
        })
    }

    /// All weights and biases zero.
    pub fn zeroed(arch: Architecture) -> Result<Self> {
        Self::build(arch, |_, _, _| {})
    }

    fn build(arch: Architecture, mut init: impl FnMut(usize, usize, &mut [f64])) -> Result<Self> {
        arch.validate()?;
        let mut params = ParameterSet::new();
        for (prefix, sizes) in [("enc", arch.encoder_sizes()), ("dec", arch.decoder_sizes())] {
            for (i, w) in sizes.windows(2).enumerate() {
                let mut weight = Tensor::zeros(&[w[0], w[1]]);
                init(w[0], w[1], weight.data_mut());
                params.insert(format!("{prefix}.{i}.weight"), weight)?;
                params.insert(format!("{prefix}.{i}.bias"), Tensor::zeros(&[w[1]]))?;
            }
        }
        Ok(MlpVae { arch, params })
    }

    /// Wraps existing parameters, checking names and shapes against `arch`.
    pub fn from_parameters(arch: Architecture, params: ParameterSet) -> Result<Self> {
        let template = MlpVae::zeroed(arch)?;
        let expected: Vec<_> = template.params.iter().map(|(n, t)| (n, t.shape())).collect();
        let actual: Vec<_> = params.iter().map(|(n, t)| (n, t.shape())).collect();
        if expected != actual {
            return Err(Error::format(
                "parameter names or shapes do not match the architecture",
            ));
        }
        Ok(MlpVae {
            arch: template.arch,
            params,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    /// Binds the parameters to a fresh tape.
    pub fn session(&self) -> VaeSession<'_> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape);
        VaeSession {
            model: self,
            tape,
            vars,
        }
    }

    /// Like [`MlpVae::session`] with parameters recorded as constants.
    pub fn frozen_session(&self) -> VaeSession<'_> {
        let mut tape = Tape::new();
        let vars = self.params.bind_frozen(&mut tape);
        VaeSession {
            model: self,
            tape,
            vars,
        }
    }

    /// Posterior means and log-variances for a batch.
    pub fn encode(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut s = self.frozen_session();
        let xv = s.tape.constant(x.clone());
        let (mu, lv) = s.encode(xv)?;
        Ok((s.tape.value(mu).clone(), s.tape.value(lv).clone()))
    }

    /// Decoder output: sigmoid pixels or raw logits.
    pub fn decode(&self, z: &Tensor) -> Result<Tensor> {
        let mut s = self.frozen_session();
        let zv = s.tape.constant(z.clone());
        let out = s.decode(zv)?;
        Ok(s.tape.value(out).clone())
    }

    /// Decodes the encoder means (no sampling).
    pub fn reconstruct(&self, x: &Tensor) -> Result<Tensor> {
        let (mu, _) = self.encode(x)?;
        self.decode(&mu)
    }
}

/// Outputs of one stochastic forward pass, as handles on the session tape.
#[derive(Clone, Copy, Debug)]
pub struct VaeForward {
    pub mu: Var,
    pub logvar: Var,
    pub z: Var,
    pub reconstruction: Var,
}

/// A model bound to a tape for one forward/backward pass.
pub struct VaeSession<'m> {
    model: &'m MlpVae,
    pub tape: Tape,
    vars: Vec<Var>,
}

impl<'m> VaeSession<'m> {
    pub fn model(&self) -> &'m MlpVae {
        self.model
    }

    pub fn parameter_vars(&self) -> &[Var] {
        &self.vars
    }

    fn stack(&mut self, mut h: Var, first: usize, layers: usize) -> Result<Var> {
        for i in 0..layers {
            let w = self.vars[2 * (first + i)];
            let b = self.vars[2 * (first + i) + 1];
            h = self.tape.matmul(h, w)?;
            h = self.tape.add_row(h, b)?;
            if i + 1 < layers {
                h = self.tape.unary(self.model.arch.activation.op(), h)?;
            }
        }
        Ok(h)
    }

    fn encoder_layers(&self) -> usize {
        self.model.arch.encoder_hidden.len() + 1
    }

    pub fn encode(&mut self, x: Var) -> Result<(Var, Var)> {
        let (_, width) = self.tape.value(x).dims2()?;
        if width != self.model.arch.input_width {
            return Err(Error::dim(format!(
                "input width {width}, encoder expects {}",
                self.model.arch.input_width
            )));
        }
        let head = self.stack(x, 0, self.encoder_layers())?;
        let d = self.model.arch.latent;
        let mu = self.tape.slice_cols(head, 0, d)?;
        let logvar = self.tape.slice_cols(head, d, d)?;
        Ok((mu, logvar))
    }

    pub fn decode(&mut self, z: Var) -> Result<Var> {
        let (_, width) = self.tape.value(z).dims2()?;
        if width != self.model.arch.latent {
            return Err(Error::dim(format!(
                "latent width {width}, decoder expects {}",
                self.model.arch.latent
            )));
        }
        let first = self.encoder_layers();
        let layers = self.model.arch.decoder_hidden.len() + 1;
        let out = self.stack(z, first, layers)?;
        match self.model.arch.head {
            OutputHead::Real => self.tape.sigmoid(out),
            OutputHead::Categorical { .. } => Ok(out),
        }
    }

    /// Encode, sample `z` by reparameterization, decode.
    pub fn forward(&mut self, x: Var, rng: &mut SeededRng) -> Result<VaeForward> {
        let (mu, logvar) = self.encode(x)?;
        let z = self.tape.gaussian_sample(mu, logvar, rng)?;
        let reconstruction = self.decode(z)?;
        Ok(VaeForward {
            mu,
            logvar,
            z,
            reconstruction,
        })
    }

    /// Gradients of `loss` for every model parameter, in parameter order.
    pub fn gradients(&self, loss: Var) -> Result<Vec<Tensor>> {
        let mut g = self.tape.backward(loss)?;
        Ok(g.take_all(&self.vars))
    }
}

/// Reconstruction term.
///
/// Real head: batch mean of the per-example squared L2 error. Categorical
/// head: batch mean of the per-position cross-entropy summed over positions,
/// with targets taken as the argmax of each one-hot block of `x`.
pub fn recon_loss(tape: &mut Tape, x_hat: Var, x: Var, head: OutputHead) -> Result<Var> {
    if tape.shape(x_hat) != tape.shape(x) {
        return Err(Error::contract(format!(
            "reconstruction {:?} vs input {:?}",
            tape.shape(x_hat),
            tape.shape(x)
        )));
    }
    let (batch, width) = tape.value(x).dims2()?;
    match head {
        OutputHead::Real => {
            let diff = tape.sub(x_hat, x)?;
            let sq = tape.square(diff)?;
            let total = tape.sum(sq)?;
            Ok(tape.scale(total, 1.0 / batch as f64))
        }
        OutputHead::Categorical { positions, classes } => {
            if positions * classes != width {
                return Err(Error::contract(format!(
                    "categorical head {positions}x{classes} vs width {width}"
                )));
            }
            let targets = argmax_blocks(tape.value(x).data(), classes);
            tape.softmax_cross_entropy(x_hat, targets, classes)
        }
    }
}

/// Closed-form `KL(N(μ, σ²) ‖ N(0, 1))` summed over dimensions, batch mean.
pub fn kld_loss(tape: &mut Tape, mu: Var, logvar: Var) -> Result<Var> {
    if tape.shape(mu) != tape.shape(logvar) {
        return Err(Error::dim("mu and logvar shapes differ"));
    }
    let batch = tape.value(mu).shape()[0];
    let mu2 = tape.square(mu)?;
    let var = tape.exp(logvar)?;
    let t = tape.sub(logvar, mu2)?;
    let t = tape.sub(t, var)?;
    let t = tape.add_scalar(t, 1.0);
    let s = tape.sum(t)?;
    Ok(tape.scale(s, -0.5 / batch as f64))
}

/// Scalar loss components of one β-VAE evaluation.
#[derive(Clone, Copy, Debug)]
pub struct BetaVaeLoss {
    pub total: Var,
    pub recon: Var,
    pub kld: Var,
    pub forward: VaeForward,
}

/// `recon + β·KL` for a batch `x`.
pub fn beta_vae_loss(
    session: &mut VaeSession<'_>,
    x: &Tensor,
    beta: f64,
    rng: &mut SeededRng,
) -> Result<BetaVaeLoss> {
    if !(beta >= 0.0) {
        return Err(Error::contract(format!("beta must be >= 0, got {beta}")));
    }
    let head = session.model.arch.head;
    let xv = session.tape.constant(x.clone());
    let forward = session.forward(xv, rng)?;
    let recon = recon_loss(&mut session.tape, forward.reconstruction, xv, head)?;
    let kld = kld_loss(&mut session.tape, forward.mu, forward.logvar)?;
    let weighted = session.tape.scale(kld, beta);
    let total = session.tape.add(recon, weighted)?;
    Ok(BetaVaeLoss {
        total,
        recon,
        kld,
        forward,
    })
}

/// Fraction of matching outputs.
///
/// Real head: `|x̂ - x| < 0.5` per value (binarized pixel agreement).
/// Categorical head: argmax of each position's logits equals the target.
pub fn reconstruction_accuracy(x_hat: &Tensor, x: &Tensor, head: OutputHead) -> Result<f64> {
    if x_hat.shape() != x.shape() {
        return Err(Error::contract("reconstruction and input shapes differ"));
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    match head {
        OutputHead::Real => {
            let hits = x_hat
                .data()
                .iter()
                .zip(x.data())
                .filter(|(a, b)| (*a - *b).abs() < 0.5)
                .count();
            Ok(hits as f64 / x.len() as f64)
        }
        OutputHead::Categorical { classes, .. } => {
            let pred = argmax_blocks(x_hat.data(), classes);
            let target = argmax_blocks(x.data(), classes);
            let hits = pred.iter().zip(&target).filter(|(a, b)| a == b).count();
            Ok(hits as f64 / target.len() as f64)
        }
    }
}

/// Index of the largest entry in each consecutive block of `classes` values
/// (first index wins ties).
pub fn argmax_blocks(values: &[f64], classes: usize) -> Vec<usize> {
    values
        .chunks(classes)
        .map(|block| {
            let mut best = 0;
            for (i, &v) in block.iter().enumerate() {
                if v > block[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Per-position softmax probabilities from a row of logits.
pub fn softmax_blocks(logits: &[f64], classes: usize) -> Vec<f64> {
    logits
        .chunks(classes)
        .flat_map(|block| {
            let lse = log_sum_exp(block);
            block.iter().map(move |v| (v - lse).exp())
        })
        .collect()
}
