use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{relu, relu_back, sigmoid, train_loop, Dense, Differentiable, OptimizerKind, TrainConfig};
use crate::seed;

pub const LATENT_DIM: usize = 2;
const H1: usize = 128;
const H2: usize = 64;

pub fn default_vae_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        epochs: 30,
        batch_size: 64,
        seed: seed::DEFAULT_SEED,
        optimizer: OptimizerKind::Sgd,
        halve_on_increase: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Layers {
    enc1: Dense,
    enc2: Dense,
    mu: Dense,
    logvar: Dense,
    dec1: Dense,
    dec2: Dense,
    out: Dense,
}

impl Layers {
    fn new(input: usize) -> (Self, usize) {
        let mut at = 0;
        let l = Self {
            enc1: Dense::alloc(&mut at, input, H1),
            enc2: Dense::alloc(&mut at, H1, H2),
            mu: Dense::alloc(&mut at, H2, LATENT_DIM),
            logvar: Dense::alloc(&mut at, H2, LATENT_DIM),
            dec1: Dense::alloc(&mut at, LATENT_DIM, H2),
            dec2: Dense::alloc(&mut at, H2, H1),
            out: Dense::alloc(&mut at, H1, input),
        };
        (l, at)
    }

    fn all(&self) -> [Dense; 7] {
        [self.enc1, self.enc2, self.mu, self.logvar, self.dec1, self.dec2, self.out]
    }
}

/// Fully connected VAE over id sequences scaled into `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeModel {
    layers: Layers,
    params: Vec<f64>,
    input_len: usize,
    /// Ids are divided by this before entering the network.
    alphabet_size: usize,
    pub config: TrainConfig,
    /// Mean batch loss per epoch.
    #[serde(skip)]
    pub loss_trace: Vec<f64>,
}

/// Inputs with the reparameterisation noise fixed, one `eps` per row.
#[derive(Debug, Clone)]
pub struct VaeBatch {
    pub x: Vec<Vec<f64>>,
    pub eps: Vec<[f64; LATENT_DIM]>,
}

/// Per-batch loss split into its two terms, both averaged over rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaeLoss {
    pub reconstruction: f64,
    pub kl: f64,
}

impl VaeLoss {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.kl
    }
}

/// KL divergence of `N(mu, exp(logvar))` from the standard normal, summed
/// over dimensions.
pub fn kl_standard_normal(mu: &[f64], logvar: &[f64]) -> f64 {
    mu.iter().zip(logvar).map(|(m, lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv)).sum()
}

impl VaeModel {
    /// Untrained model at its seeded initial weights.
    pub fn new(input_len: usize, alphabet_size: usize, config: TrainConfig) -> Self {
        let (layers, n) = Layers::new(input_len);
        let mut params = vec![0.0; n];
        let mut rng = seed::rng(seed::derive(config.seed, "vae-init"));
        for l in layers.all() {
            l.init(&mut params, &mut rng);
        }
        Self { layers, params, input_len, alphabet_size, config, loss_trace: Vec::new() }
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn scale(&self, ids: &[u32]) -> Vec<f64> {
        ids.iter().map(|&i| i as f64 / self.alphabet_size as f64).collect()
    }

    fn encode_scaled(&self, x: &[f64]) -> ([f64; LATENT_DIM], [f64; LATENT_DIM], Vec<f64>, Vec<f64>) {
        let p = &self.params;
        let mut h1 = vec![0.0; H1];
        self.layers.enc1.forward(p, x, &mut h1);
        relu(&mut h1);
        let mut h2 = vec![0.0; H2];
        self.layers.enc2.forward(p, &h1, &mut h2);
        relu(&mut h2);
        let mut mu = [0.0; LATENT_DIM];
        let mut lv = [0.0; LATENT_DIM];
        self.layers.mu.forward(p, &h2, &mut mu);
        self.layers.logvar.forward(p, &h2, &mut lv);
        (mu, lv, h1, h2)
    }

    /// Latent mean; no sampling.
    pub fn encode(&self, ids: &[u32]) -> Result<[f64; LATENT_DIM]> {
        if ids.len() != self.input_len {
            return Err(Error::DimensionMismatch { expected: self.input_len, got: ids.len() });
        }
        Ok(self.encode_scaled(&self.scale(ids)).0)
    }

    pub fn encode_all(&self, seqs: &[Vec<u32>]) -> Result<Matrix> {
        let mut m = Matrix::zeros(seqs.len(), LATENT_DIM);
        for (i, s) in seqs.iter().enumerate() {
            m.row_mut(i).copy_from_slice(&self.encode(s)?);
        }
        Ok(m)
    }

    /// Decoder output for a latent point.
    pub fn decode(&self, z: &[f64; LATENT_DIM]) -> Vec<f64> {
        let p = &self.params;
        let mut d1 = vec![0.0; H2];
        self.layers.dec1.forward(p, z, &mut d1);
        relu(&mut d1);
        let mut d2 = vec![0.0; H1];
        self.layers.dec2.forward(p, &d1, &mut d2);
        relu(&mut d2);
        let mut o = vec![0.0; self.input_len];
        self.layers.out.forward(p, &d2, &mut o);
        o.iter_mut().for_each(|v| *v = sigmoid(*v));
        o
    }

    /// Loss terms and (optionally) the parameter gradient of the batch mean.
    fn evaluate(&self, b: &VaeBatch, want_grad: bool) -> (VaeLoss, Vec<f64>) {
        let p = &self.params;
        let l = &self.layers;
        let mut g = if want_grad { vec![0.0; p.len()] } else { Vec::new() };
        let mut rec = 0.0;
        let mut kl = 0.0;
        let inv = 1.0 / b.x.len() as f64;
        for (x, eps) in b.x.iter().zip(&b.eps) {
            let (mu, lv, h1, h2) = self.encode_scaled(x);
            let sd: Vec<f64> = lv.iter().map(|v| (0.5 * v).exp()).collect();
            let z: [f64; LATENT_DIM] = std::array::from_fn(|i| mu[i] + sd[i] * eps[i]);
            let mut d1 = vec![0.0; H2];
            l.dec1.forward(p, &z, &mut d1);
            relu(&mut d1);
            let mut d2 = vec![0.0; H1];
            l.dec2.forward(p, &d1, &mut d2);
            relu(&mut d2);
            let mut o = vec![0.0; self.input_len];
            l.out.forward(p, &d2, &mut o);
            o.iter_mut().for_each(|v| *v = sigmoid(*v));

            rec += o.iter().zip(x).map(|(a, t)| (a - t).powi(2)).sum::<f64>();
            kl += kl_standard_normal(&mu, &lv);
            if !want_grad {
                continue;
            }

            let d_out: Vec<f64> =
                o.iter().zip(x).map(|(a, t)| inv * 2.0 * (a - t) * a * (1.0 - a)).collect();
            let mut dd2 = vec![0.0; H1];
            l.out.backward(p, &d2, &d_out, &mut g, Some(&mut dd2));
            relu_back(&mut dd2, &d2);
            let mut dd1 = vec![0.0; H2];
            l.dec2.backward(p, &d1, &dd2, &mut g, Some(&mut dd1));
            relu_back(&mut dd1, &d1);
            let mut dz = [0.0; LATENT_DIM];
            l.dec1.backward(p, &z, &dd1, &mut g, Some(&mut dz));

            let dmu: [f64; LATENT_DIM] = std::array::from_fn(|i| dz[i] + inv * mu[i]);
            let dlv: [f64; LATENT_DIM] =
                std::array::from_fn(|i| dz[i] * eps[i] * 0.5 * sd[i] + inv * 0.5 * (lv[i].exp() - 1.0));
            let mut dh2 = vec![0.0; H2];
            let mut tmp = vec![0.0; H2];
            l.mu.backward(p, &h2, &dmu, &mut g, Some(&mut dh2));
            l.logvar.backward(p, &h2, &dlv, &mut g, Some(&mut tmp));
            dh2.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
            relu_back(&mut dh2, &h2);
            let mut dh1 = vec![0.0; H1];
            l.enc2.backward(p, &h1, &dh2, &mut g, Some(&mut dh1));
            relu_back(&mut dh1, &h1);
            l.enc1.backward(p, x, &dh1, &mut g, None);
        }
        (VaeLoss { reconstruction: rec * inv, kl: kl * inv }, g)
    }

    pub fn batch_loss(&self, b: &VaeBatch) -> VaeLoss {
        self.evaluate(b, false).0
    }
}

impl Differentiable for VaeModel {
    type Batch = VaeBatch;

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn loss(&self, b: &VaeBatch) -> f64 {
        self.batch_loss(b).total()
    }

    fn loss_and_grad(&self, b: &VaeBatch) -> (f64, Vec<f64>) {
        let (l, g) = self.evaluate(b, true);
        (l.total(), g)
    }
}

/// Sums squared reconstruction error with the KL term; minimised by
/// mini-batch gradient descent with reparameterised sampling.
pub fn fit_vae(seqs: &[Vec<u32>], alphabet_size: usize, config: &TrainConfig) -> Result<VaeModel> {
    config.validate()?;
    let Some(first) = seqs.first() else {
        return Err(Error::data("VAE needs at least one sequence"));
    };
    if seqs.len() < config.batch_size {
        return Err(Error::data(format!(
            "VAE needs at least batch_size={} sequences, got {}",
            config.batch_size,
            seqs.len()
        )));
    }
    let len = first.len();
    if let Some(bad) = seqs.iter().find(|s| s.len() != len) {
        return Err(Error::DimensionMismatch { expected: len, got: bad.len() });
    }
    if alphabet_size == 0 {
        return Err(Error::config("alphabet size must be positive"));
    }
    let mut model = VaeModel::new(len, alphabet_size, *config);
    let scaled: Vec<Vec<f64>> = seqs.iter().map(|s| model.scale(s)).collect();
    let mut params = std::mem::take(&mut model.params);
    let trace = train_loop(seqs.len(), config, &mut params, |rows, p, rng| {
        let batch = VaeBatch {
            x: rows.iter().map(|&r| scaled[r].clone()).collect(),
            eps: rows
                .iter()
                .map(|_| std::array::from_fn(|_| StandardNormal.sample(&mut *rng)))
                .collect(),
        };
        model.params = p.to_vec();
        let (loss, g) = model.evaluate(&batch, true);
        if !loss.total().is_finite() {
            return Err(Error::numerical(format!(
                "VAE loss diverged: reconstruction={} kl={}",
                loss.reconstruction, loss.kl
            )));
        }
        Ok((loss.total(), g))
    })?;
    model.params = params;
    model.loss_trace = trace;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradient_check;

    fn sequences(n: usize, seed: u64) -> Vec<Vec<u32>> {
        use rand::Rng;
        let mut rng = seed::rng(seed);
        (0..n)
            .map(|i| {
                let len = 20 + (i % 3) * 30;
                (0..128).map(|t| if t < len { rng.random_range(2..30) } else { 0 }).collect()
            })
            .collect()
    }

    #[test]
    fn kl_closed_forms() {
        assert_eq!(kl_standard_normal(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(kl_standard_normal(&[1.0], &[0.0]), 0.5);
    }

    #[test]
    fn zero_encoder_has_zero_kl() {
        let mut m = VaeModel::new(128, 30, default_vae_config());
        let l = m.layers;
        for d in [l.enc1, l.enc2, l.mu, l.logvar] {
            m.params[d.off..d.off + d.len()].fill(0.0);
        }
        let s = sequences(3, 1);
        let b = VaeBatch { x: s.iter().map(|q| m.scale(q)).collect(), eps: vec![[0.3, -1.0]; 3] };
        assert_eq!(m.batch_loss(&b).kl, 0.0);
        assert_eq!(m.encode(&s[0]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn gradient_check_four_samples() {
        let mut m = VaeModel::new(128, 30, default_vae_config());
        let s = sequences(4, 2);
        let b = VaeBatch {
            x: s.iter().map(|q| m.scale(q)).collect(),
            eps: vec![[0.5, -0.2], [-1.1, 0.4], [0.0, 1.3], [0.9, 0.9]],
        };
        let err = gradient_check(&mut m, &b, 7);
        assert!(err <= 1e-4, "relative error {err}");
    }

    #[test]
    fn encode_is_deterministic_and_two_dimensional() {
        let s = sequences(64, 3);
        let m = fit_vae(&s, 30, &TrainConfig { epochs: 2, ..default_vae_config() }).unwrap();
        let a = m.encode(&s[5]).unwrap();
        assert_eq!(a, m.encode(&s[5]).unwrap());
        let all = m.encode_all(&s).unwrap();
        assert_eq!(all.cols(), 2);
        assert_eq!(all.row(5), &a);
        assert!(m.encode(&s[0][..100]).is_err());
    }

    #[test]
    fn loss_on_fixed_batch_drops_over_five_epochs() {
        let s = sequences(256, 4);
        let m0 = VaeModel::new(128, 30, default_vae_config());
        let fixed = VaeBatch { x: s[..64].iter().map(|q| m0.scale(q)).collect(), eps: vec![[0.0; 2]; 64] };
        let before = m0.batch_loss(&fixed).total();
        let m = fit_vae(&s, 30, &TrainConfig { epochs: 5, ..default_vae_config() }).unwrap();
        let after = m.batch_loss(&fixed).total();
        assert!(after < before, "{before} -> {after}");
        assert_eq!(m.loss_trace.len(), 5);
    }

    #[test]
    fn training_is_reproducible() {
        let s = sequences(64, 5);
        let cfg = TrainConfig { epochs: 1, ..default_vae_config() };
        assert_eq!(fit_vae(&s, 30, &cfg).unwrap().params, fit_vae(&s, 30, &cfg).unwrap().params);
        assert!(fit_vae(&s[..10], 30, &cfg).is_err());
    }
}
