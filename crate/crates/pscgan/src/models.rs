//! The conditional generator (denoiser) and critic.
//!
//! The generator is an encoder-decoder network. The encoder is a strided
//! convolution pipeline with per-scale Drip exits (shallow two-layer CNNs
//! carrying low-receptive-field features to the matching decoder stage). The
//! decoder synthesizes the output scale by scale: each stage gets the
//! upsampled features of the coarser stage, its Drip features, and a fresh
//! single-channel noise map concatenated as an extra input channel to the
//! stage's first convolution (the generalized noise-injection convolution).
//! Per-stage residual RGB images are accumulated onto the upsampled RGB of
//! the previous stage.

use autodiff::{conv2d, dense, Arr, Bound, ParamId, ParamSet, Tape, UpsampleKind, Var};
use ndarray::IxDyn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::ImageBatch;
use crate::error::{Error, Result};
use crate::rng::normal;

pub const LRELU_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Upsample {
    Nearest,
    Bilinear,
}

impl From<Upsample> for UpsampleKind {
    fn from(u: Upsample) -> Self {
        match u {
            Upsample::Nearest => UpsampleKind::Nearest,
            Upsample::Bilinear => UpsampleKind::Bilinear,
        }
    }
}

impl std::str::FromStr for Upsample {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(Upsample::Nearest),
            "bilinear" => Ok(Upsample::Bilinear),
            other => Err(Error::Config(format!(
                "unknown upsample mode '{other}' (expected nearest|bilinear)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub image_size: usize,
    pub channels: usize,
    /// Channel width per scale, index 0 = full resolution.
    pub widths: Vec<usize>,
    pub upsample: Upsample,
}

impl GeneratorConfig {
    pub fn n_scales(&self) -> usize {
        self.widths.len()
    }

    pub fn smallest_scale(&self) -> usize {
        self.image_size >> (self.n_scales() - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("generator widths must all be >= 1".into()));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::Config("image channels must be 1 or 3".into()));
        }
        let s = self.smallest_scale();
        if s == 0 || s << (self.n_scales() - 1) != self.image_size {
            return Err(Error::Config(format!(
                "image_size {} is not smallest_scale * 2^(n_scales-1) with {} scales",
                self.image_size,
                self.n_scales()
            )));
        }
        Ok(())
    }

    /// Full-resolution default: 128x128, 5 scales (128 down to 8).
    pub fn default_full(channels: usize) -> Self {
        Self {
            image_size: 128,
            channels,
            widths: vec![64, 128, 256, 512, 512],
            upsample: Upsample::Bilinear,
        }
    }

    /// Spatial size at scale `s` (0 = full resolution).
    pub fn scale_size(&self, s: usize) -> usize {
        self.image_size >> s
    }
}

/// Per-decoder-scale noise maps plus a global scale factor.
///
/// Maps are stored coarse-to-fine (index 0 is the coarsest decoder stage),
/// each of shape (B, 1, h, w) matching its stage, already scaled by sigma_z.
#[derive(Clone, Debug)]
pub struct LatentSpec {
    pub z_maps: Vec<Arr>,
    pub sigma_z: f64,
}

impl LatentSpec {
    /// All-zero maps; sigma_z = 0 means z = 0 exactly.
    pub fn zeros(config: &GeneratorConfig, batch: usize) -> Self {
        let n = config.n_scales();
        let z_maps = (0..n)
            .map(|i| {
                let s = config.scale_size(n - 1 - i);
                Arr::zeros(IxDyn(&[batch, 1, s, s]))
            })
            .collect();
        Self { z_maps, sigma_z: 0.0 }
    }

    /// Unit-variance draws multiplied by `sigma_z`.
    pub fn sample(
        config: &GeneratorConfig,
        batch: usize,
        sigma_z: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if sigma_z < 0.0 {
            return Err(Error::Argument(format!("sigma_z must be >= 0, got {sigma_z}")));
        }
        if sigma_z == 0.0 {
            return Ok(Self::zeros(config, batch));
        }
        let n = config.n_scales();
        let z_maps = (0..n)
            .map(|i| {
                let s = config.scale_size(n - 1 - i);
                crate::rng::normal_array(rng, &[batch, 1, s, s], sigma_z)
            })
            .collect();
        Ok(Self { z_maps, sigma_z })
    }
}

#[derive(Clone, Copy)]
struct ConvIds {
    w: ParamId,
    b: ParamId,
}

struct GenLayers {
    stem: ConvIds,
    down: Vec<ConvIds>,
    drip: Vec<(ConvIds, ConvIds)>,
    /// First decoder conv per stage; consumes the concatenated noise map.
    dec_inject: Vec<ConvIds>,
    dec_refine: Vec<ConvIds>,
    to_rgb: Vec<ConvIds>,
}

pub struct Generator {
    pub config: GeneratorConfig,
    pub params: ParamSet,
    layers: GenLayers,
}

fn he_std(fan_in: usize) -> f64 {
    (2.0 / (fan_in as f64 * (1.0 + LRELU_SLOPE * LRELU_SLOPE))).sqrt()
}

fn init_conv(
    params: &mut ParamSet,
    name: &str,
    out_c: usize,
    in_c: usize,
    k: usize,
    rng: &mut impl Rng,
) -> ConvIds {
    let std = he_std(in_c * k * k);
    let n = out_c * in_c * k * k;
    let data: Vec<f64> = (0..n).map(|_| normal(rng) * std).collect();
    let w = params.add(
        format!("{name}.weight"),
        Arr::from_shape_vec(IxDyn(&[out_c, in_c, k, k]), data).unwrap(),
    );
    let b = params.add(format!("{name}.bias"), Arr::zeros(IxDyn(&[out_c])));
    ConvIds { w, b }
}

impl Generator {
    pub fn new(config: GeneratorConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let mut params = ParamSet::new();
        let w = &config.widths;
        let n = w.len();
        let stem = init_conv(&mut params, "enc.stem", w[0], config.channels, 3, rng);
        let down: Vec<ConvIds> = (1..n)
            .map(|s| init_conv(&mut params, &format!("enc.down{s}"), w[s], w[s - 1], 3, rng))
            .collect();
        let drip: Vec<(ConvIds, ConvIds)> = (0..n)
            .map(|s| {
                (
                    init_conv(&mut params, &format!("drip{s}.conv0"), w[s], w[s], 3, rng),
                    init_conv(&mut params, &format!("drip{s}.conv1"), w[s], w[s], 3, rng),
                )
            })
            .collect();
        let mut dec_inject = Vec::new();
        let mut dec_refine = Vec::new();
        let mut to_rgb = Vec::new();
        for s in (0..n).rev() {
            // Stage input: features from the coarser stage (or the pipeline
            // end at the coarsest), plus drip output, plus one noise channel.
            let feat_in = if s == n - 1 { w[n - 1] } else { w[s + 1] };
            let in_c = feat_in + w[s] + 1;
            dec_inject.push(init_conv(&mut params, &format!("dec{s}.inject"), w[s], in_c, 3, rng));
            dec_refine.push(init_conv(&mut params, &format!("dec{s}.refine"), w[s], w[s], 3, rng));
            to_rgb.push(init_conv(&mut params, &format!("dec{s}.to_rgb"), config.channels, w[s], 1, rng));
        }
        Ok(Self {
            config,
            params,
            layers: GenLayers {
                stem,
                down,
                drip,
                dec_inject,
                dec_refine,
                to_rgb,
            },
        })
    }

    fn check_input(&self, y: &[usize]) -> Result<()> {
        if y.len() != 4 || y[1] != self.config.channels || y[2] != self.config.image_size || y[3] != self.config.image_size {
            return Err(Error::Shape(format!(
                "generator expects (B,{},{},{}), got {:?}",
                self.config.channels, self.config.image_size, self.config.image_size, y
            )));
        }
        Ok(())
    }

    fn check_latent(&self, batch: usize, latent: &LatentSpec) -> Result<()> {
        let n = self.config.n_scales();
        if latent.z_maps.len() != n {
            return Err(Error::Shape(format!(
                "latent has {} maps, generator has {} decoder stages",
                latent.z_maps.len(),
                n
            )));
        }
        for (i, z) in latent.z_maps.iter().enumerate() {
            let s = self.config.scale_size(n - 1 - i);
            if z.shape() != [batch, 1, s, s] {
                return Err(Error::Shape(format!(
                    "latent map {i} has shape {:?}, expected ({batch},1,{s},{s})",
                    z.shape()
                )));
            }
        }
        Ok(())
    }

    /// Forward pass on an existing tape with bound parameters.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        bound: &Bound<'t>,
        y: Var<'t>,
        latent: &LatentSpec,
    ) -> Result<Var<'t>> {
        self.check_input(&y.shape())?;
        self.check_latent(y.shape()[0], latent)?;
        let up: UpsampleKind = self.config.upsample.into();
        let n = self.config.n_scales();
        let conv = |x: Var<'t>, ids: &ConvIds, stride: usize, pad: usize| {
            conv2d(x, bound.get(ids.w), Some(bound.get(ids.b)), stride, pad)
        };

        // Encoder pipeline with per-scale exits.
        let mut enc = Vec::with_capacity(n);
        let mut h = conv(y, &self.layers.stem, 1, 1).leaky_relu(LRELU_SLOPE);
        enc.push(h);
        for ids in &self.layers.down {
            h = conv(h, ids, 2, 1).leaky_relu(LRELU_SLOPE);
            enc.push(h);
        }
        // Drips: shallow low-receptive-field side networks.
        let drips: Vec<Var<'t>> = (0..n)
            .map(|s| {
                let (c0, c1) = &self.layers.drip[s];
                let d = conv(enc[s], c0, 1, 1).leaky_relu(LRELU_SLOPE);
                conv(d, c1, 1, 1).leaky_relu(LRELU_SLOPE)
            })
            .collect();

        // Decoder, coarse to fine, with residual RGB accumulation.
        let mut feat: Option<Var<'t>> = None;
        let mut rgb: Option<Var<'t>> = None;
        for (stage, s) in (0..n).rev().enumerate() {
            let stage_in = match feat {
                None => enc[n - 1],
                Some(f) => f.upsample2x(up),
            };
            let z = tape.leaf(latent.z_maps[stage].clone());
            let cat = tape.concat_c(&[stage_in, drips[s], z]);
            let a = conv(cat, &self.layers.dec_inject[stage], 1, 1).leaky_relu(LRELU_SLOPE);
            let b = conv(a, &self.layers.dec_refine[stage], 1, 1).leaky_relu(LRELU_SLOPE);
            let res = conv(b, &self.layers.to_rgb[stage], 1, 0);
            rgb = Some(match rgb {
                None => res,
                Some(r) => r.upsample2x(up).add(res),
            });
            feat = Some(b);
        }
        Ok(rgb.unwrap())
    }

    /// Convenience forward on a throwaway tape.
    pub fn forward_values(&self, y: &ImageBatch, latent: &LatentSpec) -> Result<ImageBatch> {
        let tape = Tape::new();
        let bound = self.params.bind(&tape);
        let vy = tape.leaf(y.data.clone().into_dyn());
        let out = self.forward(&tape, &bound, vy, latent)?;
        Ok(ImageBatch::new(
            out.value().into_dimensionality().unwrap(),
        ))
    }
}

/// The generalized noise-injection convolution: sum_i h_i * x_i + h_{c+1} * z,
/// implemented by concatenating z as an extra input channel.
pub fn noise_inject_conv<'t>(
    tape: &'t Tape,
    features: Var<'t>,
    z: Var<'t>,
    w: Var<'t>,
    bias: Option<Var<'t>>,
) -> Result<Var<'t>> {
    let fs = features.shape();
    let zs = z.shape();
    if fs[0] != zs[0] || zs[1] != 1 || fs[2] != zs[2] || fs[3] != zs[3] {
        return Err(Error::Shape(format!(
            "noise map shape {:?} does not match features {:?}",
            zs, fs
        )));
    }
    let ws = w.shape();
    if ws[1] != fs[1] + 1 {
        return Err(Error::Shape(format!(
            "kernel expects {} input channels, features+noise give {}",
            ws[1],
            fs[1] + 1
        )));
    }
    let cat = tape.concat_c(&[features, z]);
    Ok(conv2d(cat, w, bias, 1, ws[2] / 2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticConfig {
    pub image_size: usize,
    pub channels: usize,
    /// Channel width per scale, index 0 = full resolution.
    pub widths: Vec<usize>,
}

impl CriticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("critic widths must all be >= 1".into()));
        }
        let s = self.image_size >> (self.widths.len() - 1);
        if s == 0 || s << (self.widths.len() - 1) != self.image_size {
            return Err(Error::Config(format!(
                "critic image_size {} incompatible with {} scales",
                self.image_size,
                self.widths.len()
            )));
        }
        Ok(())
    }

    fn head_spatial(&self) -> usize {
        self.image_size >> (self.widths.len() - 1)
    }
}

struct CriticLayers {
    stem: ConvIds,
    down: Vec<ConvIds>,
    head_w: ParamId,
    head_b: ParamId,
}

/// Conditional critic: strided-convolution stack over channel-concatenated
/// (x_hat, y), dense scalar head, no normalization layers.
pub struct Critic {
    pub config: CriticConfig,
    pub params: ParamSet,
    layers: CriticLayers,
}

impl Critic {
    pub fn new(config: CriticConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let mut params = ParamSet::new();
        let w = &config.widths;
        let stem = init_conv(&mut params, "critic.stem", w[0], config.channels * 2, 3, rng);
        let down: Vec<ConvIds> = (1..w.len())
            .map(|s| init_conv(&mut params, &format!("critic.down{s}"), w[s], w[s - 1], 3, rng))
            .collect();
        let sp = config.head_spatial();
        let head_in = w[w.len() - 1] * sp * sp;
        let std = (1.0 / head_in as f64).sqrt();
        let data: Vec<f64> = (0..head_in).map(|_| normal(rng) * std).collect();
        let head_w = params.add(
            "critic.head.weight",
            Arr::from_shape_vec(IxDyn(&[head_in, 1]), data).unwrap(),
        );
        let head_b = params.add("critic.head.bias", Arr::zeros(IxDyn(&[1])));
        Ok(Self {
            config,
            params,
            layers: CriticLayers {
                stem,
                down,
                head_w,
                head_b,
            },
        })
    }

    /// One unbounded real score per batch element, shape (B, 1).
    pub fn forward<'t>(
        &self,
        bound: &Bound<'t>,
        x_hat: Var<'t>,
        y: Var<'t>,
    ) -> Result<Var<'t>> {
        let xs = x_hat.shape();
        if xs != y.shape() {
            return Err(Error::Shape(format!(
                "critic inputs differ: {:?} vs {:?}",
                xs,
                y.shape()
            )));
        }
        if xs[1] != self.config.channels || xs[2] != self.config.image_size {
            return Err(Error::Shape(format!(
                "critic expects (B,{},{s},{s}), got {:?}",
                self.config.channels,
                xs,
                s = self.config.image_size
            )));
        }
        let conv = |x: Var<'t>, ids: &ConvIds, stride: usize| {
            conv2d(x, bound.get(ids.w), Some(bound.get(ids.b)), stride, 1)
        };
        let cat = x_hat.tape().concat_c(&[x_hat, y]);
        let mut h = conv(cat, &self.layers.stem, 1).leaky_relu(LRELU_SLOPE);
        for ids in &self.layers.down {
            h = conv(h, ids, 2).leaky_relu(LRELU_SLOPE);
        }
        let b = xs[0];
        let sp = self.config.head_spatial();
        let flat = h.reshape(&[b, self.config.widths[self.config.widths.len() - 1] * sp * sp]);
        Ok(dense(flat, bound.get(self.layers.head_w), Some(bound.get(self.layers.head_b))))
    }

    pub fn forward_values(&self, x_hat: &ImageBatch, y: &ImageBatch) -> Result<Vec<f64>> {
        let tape = Tape::new();
        let bound = self.params.bind(&tape);
        let vx = tape.leaf(x_hat.data.clone().into_dyn());
        let vy = tape.leaf(y.data.clone().into_dyn());
        let out = self.forward(&bound, vx, vy)?;
        Ok(out.value().iter().copied().collect())
    }
}

