//! Dataset ingestion, preprocessing, splits, and the additive white Gaussian
//! noise degradation model.
//!
//! Convention used across the whole crate: images are stored in [0,1], and
//! noise levels are quoted on the 0-255 pixel scale and divided by 255 at the
//! single conversion point inside [`add_awgn`]. Degraded images are *not*
//! clamped; clamping happens only when writing image files.

use std::path::{Path, PathBuf};

use ndarray::{Array3, Array4, Axis, Slice};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{normal, stream_rng, Stream};

/// A batch of images, shape (batch, channels, height, width), values in [0,1]
/// for clean data; degraded data may exceed the range by design.
#[derive(Clone, Debug)]
pub struct ImageBatch {
    pub data: Array4<f64>,
}

impl ImageBatch {
    pub fn new(data: Array4<f64>) -> Self {
        Self { data }
    }

    pub fn batch_size(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn height(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[3]
    }

    pub fn image(&self, i: usize) -> Array3<f64> {
        self.data.index_axis(Axis(0), i).to_owned()
    }

    pub fn from_images(images: &[Array3<f64>]) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Argument("empty image list".into()));
        }
        let s = images[0].dim();
        let mut data = Array4::zeros((images.len(), s.0, s.1, s.2));
        for (i, img) in images.iter().enumerate() {
            if img.dim() != s {
                return Err(Error::Shape(format!(
                    "image {} has shape {:?}, expected {:?}",
                    i,
                    img.dim(),
                    s
                )));
            }
            data.index_axis_mut(Axis(0), i).assign(img);
        }
        Ok(Self { data })
    }
}

/// Additive white Gaussian noise, with sigma on the 0-255 scale.
#[derive(Clone, Copy, Debug)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if sigma < 0.0 {
            return Err(Error::Argument(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { sigma, seed })
    }

    /// Noise std in [0,1] units.
    pub fn sigma_unit(&self) -> f64 {
        self.sigma / 255.0
    }
}

/// y = x + n with n i.i.d. zero-mean Gaussian of std sigma/255. Not clamped.
pub fn add_awgn(x: &ImageBatch, model: &NoiseModel) -> ImageBatch {
    let mut rng = stream_rng(model.seed, Stream::DegradationNoise, 0);
    let std = model.sigma_unit();
    let mut data = x.data.clone();
    if std > 0.0 {
        data.mapv_inplace(|v| v + normal(&mut rng) * std);
    }
    ImageBatch { data }
}

/// Interpolation kernel used for dataset resizing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Interp {
    Nearest,
    Bilinear,
}

impl std::str::FromStr for Interp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(Interp::Nearest),
            "bilinear" => Ok(Interp::Bilinear),
            other => Err(Error::Config(format!(
                "unknown interpolation '{other}' (expected nearest|bilinear)"
            ))),
        }
    }
}

/// Center crop to a square on the smaller dimension, then resize to
/// `target` x `target`.
pub fn center_crop_resize(img: &Array3<f64>, target: usize, interp: Interp) -> Array3<f64> {
    let (c, h, w) = img.dim();
    let side = h.min(w);
    let top = (h - side) / 2;
    let left = (w - side) / 2;
    let cropped = img
        .slice_axis(Axis(1), Slice::from(top..top + side))
        .slice_axis(Axis(2), Slice::from(left..left + side))
        .to_owned();
    if side == target {
        return cropped;
    }
    let mut out = Array3::zeros((c, target, target));
    let scale = side as f64 / target as f64;
    for ch in 0..c {
        for oy in 0..target {
            for ox in 0..target {
                out[[ch, oy, ox]] = match interp {
                    Interp::Nearest => {
                        let iy = ((oy as f64 + 0.5) * scale) as usize;
                        let ix = ((ox as f64 + 0.5) * scale) as usize;
                        cropped[[ch, iy.min(side - 1), ix.min(side - 1)]]
                    }
                    Interp::Bilinear => {
                        let sy = (oy as f64 + 0.5) * scale - 0.5;
                        let sx = (ox as f64 + 0.5) * scale - 0.5;
                        let y0 = sy.floor().max(0.0) as usize;
                        let x0 = sx.floor().max(0.0) as usize;
                        let y1 = (y0 + 1).min(side - 1);
                        let x1 = (x0 + 1).min(side - 1);
                        let fy = (sy - sy.floor()).clamp(0.0, 1.0);
                        let fx = (sx - sx.floor()).clamp(0.0, 1.0);
                        let y0 = y0.min(side - 1);
                        let x0 = x0.min(side - 1);
                        (1.0 - fy) * ((1.0 - fx) * cropped[[ch, y0, x0]] + fx * cropped[[ch, y0, x1]])
                            + fy * ((1.0 - fx) * cropped[[ch, y1, x0]] + fx * cropped[[ch, y1, x1]])
                    }
                };
            }
        }
    }
    out
}

/// Mirror each image left-right independently with probability `p`.
pub fn random_hflip(x: &ImageBatch, p: f64, seed: u64) -> Result<ImageBatch> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument(format!("flip probability {p} outside [0,1]")));
    }
    let mut rng = stream_rng(seed, Stream::DataOrder, u64::MAX);
    let mut data = x.data.clone();
    for i in 0..x.batch_size() {
        if rng.gen::<f64>() < p {
            let flipped = data
                .index_axis(Axis(0), i)
                .slice_axis(Axis(2), Slice::new(0, None, -1))
                .to_owned();
            data.index_axis_mut(Axis(0), i).assign(&flipped);
        }
    }
    Ok(ImageBatch { data })
}

/// How a dataset is partitioned into train and test indices.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub enum SplitRule {
    /// Fixed index range \[start, end\] is the test set, remainder trains.
    IndexRange { test_start: usize, test_end: usize },
    /// Random disjoint picks, reproducible under seed.
    Random { n_train: usize, n_test: usize, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct DatasetSpec {
    pub root: PathBuf,
    pub rule: SplitRule,
    pub image_size: usize,
}

/// Split `count` items into disjoint (train, test) index lists.
pub fn split_indices(count: usize, rule: &SplitRule) -> Result<(Vec<usize>, Vec<usize>)> {
    match rule {
        SplitRule::IndexRange { test_start, test_end } => {
            if *test_end >= count || test_start > test_end {
                return Err(Error::Config(format!(
                    "test range {test_start}-{test_end} infeasible for {count} files"
                )));
            }
            let test: Vec<usize> = (*test_start..=*test_end).collect();
            let train: Vec<usize> = (0..count)
                .filter(|i| !(test_start..=test_end).contains(&i))
                .collect();
            Ok((train, test))
        }
        SplitRule::Random { n_train, n_test, seed } => {
            if n_train + n_test > count {
                return Err(Error::Config(format!(
                    "requested {} train + {} test > {} available files",
                    n_train, n_test, count
                )));
            }
            let mut order: Vec<usize> = (0..count).collect();
            let mut rng = stream_rng(*seed, Stream::DataOrder, 0);
            // Fisher-Yates
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            let train = order[..*n_train].to_vec();
            let mut test = order[*n_train..*n_train + *n_test].to_vec();
            test.sort_unstable();
            Ok((train, test))
        }
    }
}

/// Apply the split rule to the files under `spec.root`.
pub fn make_splits(spec: &DatasetSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let files = list_images(&spec.root)?;
    split_indices(files.len(), &spec.rule)
}

/// Sorted image files (png/jpg/jpeg) directly under `root`.
pub fn list_images(root: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| Error::Data(format!("cannot read dataset dir {}: {e}", root.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Data(format!(
            "no images found under {}",
            root.display()
        )));
    }
    Ok(files)
}

/// Load one image as (C,H,W) in [0,1]. `channels` must be 1 or 3.
pub fn load_image(path: &Path, channels: usize) -> Result<Array3<f64>> {
    let img = image::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    match channels {
        1 => {
            let gray = img.to_luma8();
            let (w, h) = gray.dimensions();
            Ok(Array3::from_shape_fn((1, h as usize, w as usize), |(_, y, x)| {
                gray.get_pixel(x as u32, y as u32)[0] as f64 / 255.0
            }))
        }
        3 => {
            let rgb = img.to_rgb8();
            let (w, h) = rgb.dimensions();
            Ok(Array3::from_shape_fn((3, h as usize, w as usize), |(c, y, x)| {
                rgb.get_pixel(x as u32, y as u32)[c] as f64 / 255.0
            }))
        }
        n => Err(Error::Argument(format!("channels must be 1 or 3, got {n}"))),
    }
}

/// Write one image as 8-bit PNG; this is the only place values are clamped.
pub fn save_image(img: &Array3<f64>, path: &Path) -> Result<()> {
    let (c, h, w) = img.dim();
    let to_u8 = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    match c {
        1 => {
            let buf = image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
                image::Luma([to_u8(img[[0, y as usize, x as usize]])])
            });
            buf.save(path)
                .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
        }
        3 => {
            let buf = image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
                image::Rgb([
                    to_u8(img[[0, y as usize, x as usize]]),
                    to_u8(img[[1, y as usize, x as usize]]),
                    to_u8(img[[2, y as usize, x as usize]]),
                ])
            });
            buf.save(path)
                .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
        }
        n => Err(Error::Argument(format!("cannot save {n}-channel image"))),
    }
}

/// Write a split manifest as one index per line.
pub fn write_manifest(indices: &[usize], path: &Path) -> Result<()> {
    let body: String = indices.iter().map(|i| format!("{i}\n")).collect();
    std::fs::write(path, body)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<usize>> {
    let body = std::fs::read_to_string(path)?;
    body.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<usize>()
                .map_err(|e| Error::Data(format!("bad manifest line '{l}': {e}")))
        })
        .collect()
}

/// An on-disk image folder restricted to a list of indices, preprocessed to a
/// fixed square size on load.
pub struct ImageFolder {
    pub files: Vec<PathBuf>,
    pub indices: Vec<usize>,
    pub image_size: usize,
    pub channels: usize,
    pub interp: Interp,
}

impl ImageFolder {
    pub fn open(
        root: &Path,
        indices: Vec<usize>,
        image_size: usize,
        channels: usize,
        interp: Interp,
    ) -> Result<Self> {
        let files = list_images(root)?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= files.len()) {
            return Err(Error::Data(format!(
                "index {bad} out of range for {} files",
                files.len()
            )));
        }
        Ok(Self {
            files,
            indices,
            image_size,
            channels,
            interp,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn load(&self, i: usize) -> Result<Array3<f64>> {
        let img = load_image(&self.files[self.indices[i]], self.channels)?;
        Ok(center_crop_resize(&img, self.image_size, self.interp))
    }

    pub fn load_batch(&self, items: &[usize]) -> Result<ImageBatch> {
        let images: Vec<Array3<f64>> = items
            .iter()
            .map(|&i| self.load(i))
            .collect::<Result<_>>()?;
        ImageBatch::from_images(&images)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn awgn_zero_sigma_is_identity() {
        let x = ImageBatch::new(Array4::from_elem((2, 1, 4, 4), 0.5));
        let y = add_awgn(&x, &NoiseModel::new(0.0, 7).unwrap());
        assert_eq!(x.data, y.data);
    }

    #[test]
    fn awgn_negative_sigma_rejected() {
        assert!(NoiseModel::new(-1.0, 0).is_err());
    }

    #[test]
    fn awgn_empirical_std_matches_sigma() {
        // sigma=50 over 10^6 samples: empirical std of (y-x)*255 within 50 +- 0.5.
        let x = ImageBatch::new(Array4::zeros((1, 1, 1000, 1000)));
        let y = add_awgn(&x, &NoiseModel::new(50.0, 123).unwrap());
        let resid = (&y.data - &x.data) * 255.0;
        let n = resid.len() as f64;
        let mean = resid.sum() / n;
        let var = resid.mapv(|v| (v - mean) * (v - mean)).sum() / (n - 1.0);
        let std = var.sqrt();
        assert!((std - 50.0).abs() < 0.5, "std {std}");
        // mean -> 0 at 3-sigma bounds: SE = 50/sqrt(n)
        assert!(mean.abs() < 3.0 * 50.0 / n.sqrt(), "mean {mean}");
    }

    #[test]
    fn supported_experiment_sigmas_convert() {
        for sigma in [25.0, 50.0, 75.0] {
            let m = NoiseModel::new(sigma, 0).unwrap();
            assert!((m.sigma_unit() - sigma / 255.0).abs() < 1e-15);
        }
    }

    #[test]
    fn crop_resize_noop_is_bit_identical() {
        let img = Array3::from_shape_fn((3, 128, 128), |(c, y, x)| {
            (c * 1000 + y * 7 + x) as f64 / 5000.0
        });
        let out = center_crop_resize(&img, 128, Interp::Bilinear);
        assert_eq!(img, out);
    }

    #[test]
    fn crop_resize_rectangular_crops_center_square() {
        // 256x192 -> crop to 192x192 centered -> resize.
        let img = Array3::from_shape_fn((1, 192, 256), |(_, y, x)| (y * 256 + x) as f64);
        let out = center_crop_resize(&img, 192, Interp::Nearest);
        // crop only: left offset (256-192)/2 = 32
        assert_eq!(out[[0, 0, 0]], img[[0, 0, 32]]);
        assert_eq!(out.dim(), (1, 192, 192));
        let resized = center_crop_resize(&img, 96, Interp::Nearest);
        assert_eq!(resized.dim(), (1, 96, 96));
    }

    #[test]
    fn crop_resize_checkerboard_hand_case() {
        // 4x2 checkerboard, target 2, nearest: centered 2x2 crop of rows 1..3.
        let img = array![[
            [0.0, 1.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [1.0, 0.0],
        ]]
        .into_dyn()
        .into_dimensionality()
        .unwrap();
        let out = center_crop_resize(&img, 2, Interp::Nearest);
        assert_eq!(out, array![[[1.0, 0.0], [0.0, 1.0]]].into_dyn().into_dimensionality().unwrap());
    }

    #[test]
    fn degenerate_input_upscales() {
        let img = Array3::from_elem((1, 1, 1), 0.3);
        let out = center_crop_resize(&img, 4, Interp::Bilinear);
        assert_eq!(out.dim(), (1, 4, 4));
        assert!(out.iter().all(|&v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn hflip_edge_probabilities() {
        let x = ImageBatch::new(Array4::from_shape_fn((3, 1, 2, 4), |(b, _, y, x)| {
            (b * 8 + y * 4 + x) as f64
        }));
        let same = random_hflip(&x, 0.0, 1).unwrap();
        assert_eq!(same.data, x.data);
        let flipped = random_hflip(&x, 1.0, 1).unwrap();
        assert_ne!(flipped.data, x.data);
        let twice = random_hflip(&flipped, 1.0, 2).unwrap();
        assert_eq!(twice.data, x.data, "double flip is identity");
    }

    #[test]
    fn hflip_fraction_calibrated() {
        // p=0.5 over 10^4 draws -> flip fraction in 0.5 +- 0.02.
        let x = ImageBatch::new(Array4::from_shape_fn((10_000, 1, 1, 2), |(_, _, _, x)| x as f64));
        let y = random_hflip(&x, 0.5, 99).unwrap();
        let flips = (0..10_000)
            .filter(|&i| y.data[[i, 0, 0, 0]] != x.data[[i, 0, 0, 0]])
            .count();
        let frac = flips as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "flip fraction {frac}");
    }

    #[test]
    fn ffhq_style_split() {
        let rule = SplitRule::IndexRange {
            test_start: 3000,
            test_end: 4999,
        };
        let (train, test) = split_indices(70_000, &rule).unwrap();
        assert_eq!(test.len(), 2000);
        assert_eq!(train.len(), 68_000);
        assert_eq!(test[0], 3000);
        assert_eq!(*test.last().unwrap(), 4999);
        assert!(train.iter().all(|i| !(3000..=4999).contains(i)));
    }

    #[test]
    fn infeasible_split_errors() {
        let rule = SplitRule::Random {
            n_train: 90,
            n_test: 20,
            seed: 0,
        };
        assert!(split_indices(100, &rule).is_err());
    }

    #[test]
    fn random_split_deterministic_and_disjoint() {
        let rule = SplitRule::Random {
            n_train: 70,
            n_test: 20,
            seed: 5,
        };
        let (tr1, te1) = split_indices(100, &rule).unwrap();
        let (tr2, te2) = split_indices(100, &rule).unwrap();
        assert_eq!(tr1, tr2);
        assert_eq!(te1, te2);
        assert!(tr1.iter().all(|i| !te1.contains(i)));
    }
}
