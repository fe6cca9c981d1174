//! Inference-time sampling: single posterior samples, N-averages (the "-A"
//! estimator), and per-pixel std-dev maps. All latent draws derive from
//! (seed, sample index), so outputs are deterministic and parameters are
//! never mutated.

use ndarray::Array4;

use crate::data::ImageBatch;
use crate::error::{Error, Result};
use crate::models::{Generator, LatentSpec};
use crate::oracle::{posterior_params, GaussianPrior};
use crate::rng::{normal, stream_rng, Stream};

/// Anything that can draw one stochastic denoised batch for a noisy batch.
/// `index` decorrelates repeated draws under one seed.
pub trait Sampler {
    fn sample_indexed(&self, y: &ImageBatch, sigma_z: f64, seed: u64, index: u64) -> Result<ImageBatch>;
}

/// A trained generator with latent injection scaled by sigma_z.
pub struct GeneratorSampler<'a> {
    pub generator: &'a Generator,
}

impl Sampler for GeneratorSampler<'_> {
    fn sample_indexed(&self, y: &ImageBatch, sigma_z: f64, seed: u64, index: u64) -> Result<ImageBatch> {
        let mut rng = stream_rng(seed, Stream::Inference, index);
        let latent = LatentSpec::sample(&self.generator.config, y.batch_size(), sigma_z, &mut rng)?;
        self.generator.forward_values(y, &latent)
    }
}

/// Exact conjugate-posterior sampler for the white Gaussian prior:
/// x_tilde = mu_post + sigma_z * sigma_post * zeta. sigma_z=1 samples the
/// true posterior; sigma_z=0 returns the MMSE estimate.
pub struct OracleSampler {
    pub prior: GaussianPrior,
    pub sigma: f64,
}

impl Sampler for OracleSampler {
    fn sample_indexed(&self, y: &ImageBatch, sigma_z: f64, seed: u64, index: u64) -> Result<ImageBatch> {
        if y.channels() != 1 {
            return Err(Error::Argument("oracle sampler expects single-channel batches".into()));
        }
        let mut rng = stream_rng(seed, Stream::Inference, index);
        let (b, _, h, w) = y.data.dim();
        let mut out = Array4::zeros((b, 1, h, w));
        for i in 0..b {
            let yi = y.data.index_axis(ndarray::Axis(0), i);
            let y2 = yi.index_axis(ndarray::Axis(0), 0).to_owned();
            let post = posterior_params(&self.prior, &y2, self.sigma)?;
            let mut oi = out.index_axis_mut(ndarray::Axis(0), i);
            for r in 0..h {
                for c in 0..w {
                    oi[(0, r, c)] = post.mu_post[(r, c)] + sigma_z * post.sigma_post * normal(&mut rng);
                }
            }
        }
        Ok(ImageBatch::new(out))
    }
}

/// One posterior sample (index 0 of the seed's stream).
pub fn sample(s: &impl Sampler, y: &ImageBatch, sigma_z: f64, seed: u64) -> Result<ImageBatch> {
    s.sample_indexed(y, sigma_z, seed, 0)
}

/// Arithmetic mean of N independent samples; N=1 equals `sample`.
pub fn average(s: &impl Sampler, y: &ImageBatch, n: usize, sigma_z: f64, seed: u64) -> Result<ImageBatch> {
    if n == 0 {
        return Err(Error::Argument("n must be >= 1".into()));
    }
    let mut acc = s.sample_indexed(y, sigma_z, seed, 0)?.data;
    for i in 1..n {
        acc += &s.sample_indexed(y, sigma_z, seed, i as u64)?.data;
    }
    acc.mapv_inplace(|v| v / n as f64);
    Ok(ImageBatch::new(acc))
}

/// Per-pixel sample standard deviation over K draws at sigma_z, returned as
/// (raw, fourth-root) maps.
pub fn stddev_map(
    s: &impl Sampler,
    y: &ImageBatch,
    k: usize,
    sigma_z: f64,
    seed: u64,
) -> Result<(ImageBatch, ImageBatch)> {
    if k < 2 {
        return Err(Error::Argument(format!("stddev_map needs K >= 2, got {k}")));
    }
    let first = s.sample_indexed(y, sigma_z, seed, 0)?.data;
    let mut mean = first.clone();
    let mut m2 = Array4::zeros(first.raw_dim());
    for i in 1..k {
        let x = s.sample_indexed(y, sigma_z, seed, i as u64)?.data;
        // Welford update.
        let delta = &x - &mean;
        mean.scaled_add(1.0 / (i as f64 + 1.0), &delta);
        let delta2 = &x - &mean;
        m2 += &(&delta * &delta2);
    }
    let raw = m2.mapv(|v| (v / (k as f64 - 1.0)).sqrt());
    let root = raw.mapv(|v| v.powf(0.25));
    Ok((ImageBatch::new(raw), ImageBatch::new(root)))
}

/// One manifest row per denoised image.
pub struct ManifestRow {
    pub input: String,
    pub seed: u64,
    pub sigma_z: f64,
    pub n: usize,
    pub output: String,
}

pub fn write_manifest_csv(path: &std::path::Path, rows: &[ManifestRow]) -> Result<()> {
    let mut s = String::from("input,seed,sigma_z,n,output\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{}\n", r.input, r.seed, r.sigma_z, r.n, r.output));
    }
    std::fs::write(path, s)?;
    Ok(())
}
