//! PSCGAN min-max training: Wasserstein critic terms with gradient penalty,
//! the mean-enforcing MSE penalty, and the Ours-MSE / Ours-LAG baselines.
//!
//! Sign convention: the critic is trained by minimizing
//! E[C(G(z,y),y)] - E[C(x,y)] + lambda_gp * GP, and the generator by
//! minimizing mean_penalty - lambda_mm * E[C(G(z,y),y)].

use autodiff::{Adam, Arr, Tape, Var};
use ndarray::Array3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{random_hflip, ImageBatch, NoiseModel};
use crate::error::{Error, Result};
use crate::models::{Critic, CriticConfig, Generator, GeneratorConfig, LatentSpec};
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Pscgan,
    Mse,
    Lag,
}

impl std::str::FromStr for TrainMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pscgan" => Ok(TrainMode::Pscgan),
            "mse" => Ok(TrainMode::Mse),
            "lag" => Ok(TrainMode::Lag),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected pscgan|mse|lag)"
            ))),
        }
    }
}

/// All Algorithm-level hyperparameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Mini-batch size.
    pub b: usize,
    /// Penalty sub-batch: the first `pb` samples of each mini-batch.
    pub pb: usize,
    /// Samples averaged to estimate E[G(z,y)|y].
    pub m: usize,
    pub lambda_mm: f64,
    pub lambda_gp: f64,
    pub lambda_lag: f64,
    pub n_critic: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub total_steps: u64,
    /// Noise level on the 0-255 scale.
    pub sigma: f64,
    pub mode: TrainMode,
    pub seed: u64,
    /// Latent std during training (the method trains at 1).
    pub sigma_z_train: f64,
    pub hflip: bool,
    pub checkpoint_every: u64,
    /// Optional gradient value clipping; off by default.
    pub grad_clip: Option<f64>,
}

impl TrainConfig {
    pub fn default_for(mode: TrainMode) -> Self {
        let (lr, beta1) = match mode {
            TrainMode::Pscgan => (2.5e-4, 0.0),
            TrainMode::Lag => (2.5e-4, 0.0),
            TrainMode::Mse => (5e-4, 0.9),
        };
        Self {
            b: 32,
            pb: 8,
            m: 8,
            lambda_mm: 1e-2,
            lambda_gp: 10.0,
            lambda_lag: 1e-2,
            n_critic: 5,
            learning_rate: lr,
            adam_beta1: beta1,
            adam_beta2: 0.99,
            total_steps: 10_000,
            sigma: 50.0,
            mode,
            seed: 0,
            sigma_z_train: 1.0,
            hflip: true,
            checkpoint_every: 1000,
            grad_clip: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pb > self.b || self.pb == 0 {
            return Err(Error::Config(format!("need 1 <= pb <= b, got pb={} b={}", self.pb, self.b)));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be >= 1".into()));
        }
        if self.lambda_mm < 0.0 || self.lambda_gp < 0.0 || self.lambda_lag < 0.0 {
            return Err(Error::Config("lambda weights must be >= 0".into()));
        }
        if self.sigma < 0.0 {
            return Err(Error::Config("sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Losses recorded for one optimization step.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepLosses {
    pub critic_loss: f64,
    pub gp: f64,
    pub mean_penalty: f64,
    pub gen_adv: f64,
}

/// WGAN gradient penalty: interpolate x_hat = eps*x + (1-eps)*g per sample,
/// return mean over the batch of (||grad_{x_hat} C(x_hat, y)||_2 - 1)^2.
///
/// The returned node participates in the critic loss, so differentiating it
/// with respect to the critic parameters exercises double backprop.
pub fn gradient_penalty<'t, F>(
    tape: &'t Tape,
    critic_fn: F,
    x: &Arr,
    g: &Arr,
    y: &Arr,
    rng: &mut impl Rng,
) -> Result<Var<'t>>
where
    F: FnOnce(Var<'t>, Var<'t>) -> Result<Var<'t>>,
{
    if x.shape() != g.shape() || x.shape() != y.shape() {
        return Err(Error::Shape(format!(
            "gradient_penalty shapes differ: x {:?} g {:?} y {:?}",
            x.shape(),
            g.shape(),
            y.shape()
        )));
    }
    let batch = x.shape()[0];
    let mut x_hat = g.clone();
    for i in 0..batch {
        let eps: f64 = rng.gen();
        let mut row = x_hat.index_axis_mut(ndarray::Axis(0), i);
        let xr = x.index_axis(ndarray::Axis(0), i);
        row.zip_mut_with(&xr, |gv, &xv| *gv = eps * xv + (1.0 - eps) * *gv);
    }
    let vx_hat = tape.leaf(x_hat);
    let vy = tape.leaf(y.clone());
    let scores = critic_fn(vx_hat, vy)?;
    let total = scores.sum_all();
    let grads = tape.grad(total, &[vx_hat]);
    let axes: Vec<usize> = (1..x.ndim()).collect();
    let norm = grads[0].square().sum_axes(&axes).sqrt();
    Ok(norm.add_scalar(-1.0).square().mean_all())
}

/// Mean-enforcing penalty: for each (x,y) pair, average M generated samples
/// and return the mean over the batch of the squared L2 distance (summed
/// over pixels) between x and that average. Gradients flow through all M
/// samples.
pub fn mean_penalty<'t, F>(
    tape: &'t Tape,
    mut gen_fn: F,
    gen_config: &GeneratorConfig,
    x: &Arr,
    y: &Arr,
    m: usize,
    sigma_z: f64,
    rng: &mut impl Rng,
) -> Result<Var<'t>>
where
    F: FnMut(Var<'t>, &LatentSpec) -> Result<Var<'t>>,
{
    if m == 0 {
        return Err(Error::Argument("m must be >= 1".into()));
    }
    if x.shape() != y.shape() {
        return Err(Error::Shape("mean_penalty x/y shape mismatch".into()));
    }
    let batch = x.shape()[0];
    let vy = tape.leaf(y.clone());
    let mut acc: Option<Var<'t>> = None;
    for _ in 0..m {
        let latent = LatentSpec::sample(gen_config, batch, sigma_z, rng)?;
        let out = gen_fn(vy, &latent)?;
        acc = Some(match acc {
            None => out,
            Some(a) => a.add(out),
        });
    }
    let mean = acc.unwrap().scale(1.0 / m as f64);
    let vx = tape.leaf(x.clone());
    Ok(vx.sub(mean).square().sum_all().scale(1.0 / batch as f64))
}

/// Everything owned by one training run.
pub struct TrainState {
    pub generator: Generator,
    pub critic: Option<Critic>,
    pub gen_opt: Adam,
    pub critic_opt: Option<Adam>,
    pub step: u64,
    pub config: TrainConfig,
}

impl TrainState {
    pub fn new(
        config: TrainConfig,
        gen_config: GeneratorConfig,
        critic_config: CriticConfig,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = stream_rng(config.seed, Stream::Init, 0);
        let generator = Generator::new(gen_config, &mut rng)?;
        let gen_opt = Adam::new(
            &generator.params,
            config.learning_rate,
            config.adam_beta1,
            config.adam_beta2,
        );
        let (critic, critic_opt) = if config.mode == TrainMode::Mse {
            (None, None)
        } else {
            let critic = Critic::new(critic_config, &mut rng)?;
            let opt = Adam::new(
                &critic.params,
                config.learning_rate,
                config.adam_beta1,
                config.adam_beta2,
            );
            (Some(critic), Some(opt))
        };
        Ok(Self {
            generator,
            critic,
            gen_opt,
            critic_opt,
            step: 0,
            config,
        })
    }

    /// One optimization step in the configured mode.
    pub fn train_step(&mut self, x: &ImageBatch, y: &ImageBatch) -> Result<StepLosses> {
        let losses = match self.config.mode {
            TrainMode::Pscgan => self.adversarial_step(x, y, false)?,
            TrainMode::Lag => self.adversarial_step(x, y, true)?,
            TrainMode::Mse => self.mse_step(x, y)?,
        };
        self.step += 1;
        Ok(losses)
    }

    fn check_finite(&self, name: &str, v: f64) -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::Numeric(format!(
                "{name} is {v} at step {}; aborting",
                self.step
            )));
        }
        Ok(v)
    }

    fn clip(&self, grads: &mut [Arr]) {
        if let Some(c) = self.config.grad_clip {
            for g in grads {
                g.mapv_inplace(|v| v.clamp(-c, c));
            }
        }
    }

    /// PSCGAN (and LAG, which swaps the distortion term) min-max step.
    fn adversarial_step(&mut self, x: &ImageBatch, y: &ImageBatch, lag: bool) -> Result<StepLosses> {
        let cfg = self.config.clone();
        let mut losses = StepLosses::default();

        // Critic phase.
        for iter in 0..cfg.n_critic {
            let mut zrng = stream_rng(cfg.seed, Stream::Latent, self.step * 64 + iter as u64);
            let latent = LatentSpec::sample(
                &self.generator.config,
                x.batch_size(),
                cfg.sigma_z_train,
                &mut zrng,
            )?;
            let g = self.generator.forward_values(y, &latent)?;

            let critic = self.critic.as_ref().expect("adversarial mode has a critic");
            let tape = Tape::new();
            let bc = critic.params.bind(&tape);
            let vg = tape.leaf(g.data.clone().into_dyn());
            let vx = tape.leaf(x.data.clone().into_dyn());
            let vy = tape.leaf(y.data.clone().into_dyn());
            let score_g = critic.forward(&bc, vg, vy)?.mean_all();
            let score_x = critic.forward(&bc, vx, vy)?.mean_all();
            let mut gprng = stream_rng(cfg.seed, Stream::GpInterp, self.step * 64 + iter as u64);
            let gp = gradient_penalty(
                &tape,
                |xh, yv| critic.forward(&bc, xh, yv),
                &x.data.clone().into_dyn(),
                &g.data.into_dyn(),
                &y.data.clone().into_dyn(),
                &mut gprng,
            )?;
            let loss = score_g.sub(score_x).add(gp.scale(cfg.lambda_gp));
            losses.critic_loss = self.check_finite("critic_loss", loss.scalar_value())?;
            losses.gp = self.check_finite("gp", gp.scalar_value())?;
            let mut grads: Vec<Arr> = tape.grad(loss, &bc.vars).iter().map(|g| g.value()).collect();
            self.clip(&mut grads);
            let critic = self.critic.as_mut().unwrap();
            self.critic_opt
                .as_mut()
                .unwrap()
                .step(&mut critic.params, &grads);
        }

        // Generator phase.
        let critic = self.critic.as_ref().unwrap();
        let tape = Tape::new();
        let bg = self.generator.params.bind(&tape);
        let bc = critic.params.bind(&tape);
        let mut zrng = stream_rng(cfg.seed, Stream::Latent, self.step * 64 + 63);
        let pb = cfg.pb.min(x.batch_size());
        let x_pb = x.data.slice_axis(ndarray::Axis(0), ndarray::Slice::from(0..pb)).to_owned();
        let y_pb = y.data.slice_axis(ndarray::Axis(0), ndarray::Slice::from(0..pb)).to_owned();
        let distortion = if lag {
            // LAG: squared distance on the zero-latent sample, no mean over M.
            let vy = tape.leaf(y_pb.into_dyn());
            let zero = LatentSpec::zeros(&self.generator.config, pb);
            let out = self.generator.forward(&tape, &bg, vy, &zero)?;
            let vx = tape.leaf(x_pb.into_dyn());
            vx.sub(out)
                .square()
                .sum_all()
                .scale(cfg.lambda_lag / pb as f64)
        } else {
            mean_penalty(
                &tape,
                |vy, latent| self.generator.forward(&tape, &bg, vy, latent),
                &self.generator.config,
                &x_pb.into_dyn(),
                &y_pb.into_dyn(),
                cfg.m,
                cfg.sigma_z_train,
                &mut zrng,
            )?
        };
        let latent = LatentSpec::sample(
            &self.generator.config,
            x.batch_size(),
            cfg.sigma_z_train,
            &mut zrng,
        )?;
        let vy_full = tape.leaf(y.data.clone().into_dyn());
        let g_full = self.generator.forward(&tape, &bg, vy_full, &latent)?;
        let adv = critic.forward(&bc, g_full, vy_full)?.mean_all();
        let loss = distortion.sub(adv.scale(cfg.lambda_mm));
        losses.mean_penalty = self.check_finite("mean_penalty", distortion.scalar_value())?;
        losses.gen_adv = self.check_finite("gen_adv", adv.scalar_value())?;
        let mut grads: Vec<Arr> = tape.grad(loss, &bg.vars).iter().map(|g| g.value()).collect();
        self.clip(&mut grads);
        self.gen_opt.step(&mut self.generator.params, &grads);
        Ok(losses)
    }

    /// Ours-MSE: plain MSE on the zero-latent output, no noise injection.
    fn mse_step(&mut self, x: &ImageBatch, y: &ImageBatch) -> Result<StepLosses> {
        let tape = Tape::new();
        let bg = self.generator.params.bind(&tape);
        let vy = tape.leaf(y.data.clone().into_dyn());
        let zero = LatentSpec::zeros(&self.generator.config, x.batch_size());
        let out = self.generator.forward(&tape, &bg, vy, &zero)?;
        let vx = tape.leaf(x.data.clone().into_dyn());
        let loss = vx.sub(out).square().mean_all();
        let value = self.check_finite("mse_loss", loss.scalar_value())?;
        let mut grads: Vec<Arr> = tape.grad(loss, &bg.vars).iter().map(|g| g.value()).collect();
        self.clip(&mut grads);
        self.gen_opt.step(&mut self.generator.params, &grads);
        Ok(StepLosses {
            mean_penalty: value,
            ..Default::default()
        })
    }
}

/// In-memory training set: preprocessed clean images plus the degradation
/// model. Batches, order shuffling, flips, and degradation noise are all
/// derived from (seed, step), so resumption regenerates identical batches.
pub struct BatchProvider {
    pub images: Vec<Array3<f64>>,
    pub sigma: f64,
    pub hflip: bool,
    pub seed: u64,
}

impl BatchProvider {
    pub fn batch(&self, step: u64, b: usize) -> Result<(ImageBatch, ImageBatch)> {
        let n = self.images.len();
        if n == 0 {
            return Err(Error::Data("empty training set".into()));
        }
        let per_epoch = (n / b).max(1);
        let epoch = step / per_epoch as u64;
        let slot = (step % per_epoch as u64) as usize;
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = stream_rng(self.seed, Stream::DataOrder, epoch);
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let picks: Vec<usize> = (0..b).map(|k| order[(slot * b + k) % n]).collect();
        let images: Vec<Array3<f64>> = picks.iter().map(|&i| self.images[i].clone()).collect();
        let mut x = ImageBatch::from_images(&images)?;
        if self.hflip {
            x = random_hflip(&x, 0.5, self.seed ^ step)?;
        }
        let noise = NoiseModel::new(self.sigma, self.seed ^ (step.wrapping_mul(0x9e37_79b9)))?;
        let y = crate::data::add_awgn(&x, &noise);
        Ok((x, y))
    }
}
