//! Self-describing JSON checkpoints. Everything needed to resume a run —
//! model shapes, parameter values, optimizer moments, step counter, and the
//! full training configuration — lives in one file. f64 values round-trip
//! exactly through the JSON encoder, so save/load/resume is bit-identical.

use std::path::Path;

use autodiff::{Adam, Arr, ParamSet};
use ndarray::IxDyn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Critic, CriticConfig, Generator, GeneratorConfig};
use crate::rng::{stream_rng, Stream};
use crate::training::{TrainConfig, TrainMode, TrainState};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AdamRecord {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<TensorRecord>,
    v: Vec<TensorRecord>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    step: u64,
    config: TrainConfig,
    generator_config: GeneratorConfig,
    critic_config: Option<CriticConfig>,
    generator: Vec<TensorRecord>,
    critic: Option<Vec<TensorRecord>>,
    gen_opt: AdamRecord,
    critic_opt: Option<AdamRecord>,
}

fn tensor_records(params: &ParamSet) -> Vec<TensorRecord> {
    params
        .iter()
        .map(|(name, value)| TensorRecord {
            name: name.to_string(),
            shape: value.shape().to_vec(),
            data: value.iter().copied().collect(),
        })
        .collect()
}

fn plain_records(values: &[Arr]) -> Vec<TensorRecord> {
    values
        .iter()
        .map(|value| TensorRecord {
            name: String::new(),
            shape: value.shape().to_vec(),
            data: value.iter().copied().collect(),
        })
        .collect()
}

fn record_to_arr(rec: &TensorRecord) -> Result<Arr> {
    Arr::from_shape_vec(IxDyn(&rec.shape), rec.data.clone())
        .map_err(|e| Error::Checkpoint(format!("tensor '{}' malformed: {e}", rec.name)))
}

/// Restore parameter values into a freshly initialized set, matching by name.
fn restore_params(params: &mut ParamSet, records: &[TensorRecord], what: &str) -> Result<()> {
    if records.len() != params.len() {
        return Err(Error::Checkpoint(format!(
            "{what}: checkpoint has {} tensors, model has {}",
            records.len(),
            params.len()
        )));
    }
    let mut values = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let expected = params.name(autodiff::ParamId(i));
        if rec.name != expected {
            return Err(Error::Checkpoint(format!(
                "{what}: tensor {i} named '{}', expected '{expected}'",
                rec.name
            )));
        }
        let arr = record_to_arr(rec)?;
        if arr.shape() != params.value(autodiff::ParamId(i)).shape() {
            return Err(Error::Checkpoint(format!(
                "{what}: tensor '{}' shape {:?} does not match model {:?}",
                rec.name,
                arr.shape(),
                params.value(autodiff::ParamId(i)).shape()
            )));
        }
        values.push(arr);
    }
    params.set_all(values);
    Ok(())
}

fn adam_record(opt: &Adam) -> AdamRecord {
    AdamRecord {
        lr: opt.lr,
        beta1: opt.beta1,
        beta2: opt.beta2,
        eps: opt.eps,
        t: opt.t,
        m: plain_records(&opt.m),
        v: plain_records(&opt.v),
    }
}

fn restore_adam(opt: &mut Adam, rec: &AdamRecord, what: &str) -> Result<()> {
    if rec.m.len() != opt.m.len() || rec.v.len() != opt.v.len() {
        return Err(Error::Checkpoint(format!("{what}: optimizer tensor count mismatch")));
    }
    opt.lr = rec.lr;
    opt.beta1 = rec.beta1;
    opt.beta2 = rec.beta2;
    opt.eps = rec.eps;
    opt.t = rec.t;
    for (slot, r) in opt.m.iter_mut().zip(rec.m.iter()) {
        *slot = record_to_arr(r)?;
    }
    for (slot, r) in opt.v.iter_mut().zip(rec.v.iter()) {
        *slot = record_to_arr(r)?;
    }
    Ok(())
}

pub fn save(state: &TrainState, path: &Path) -> Result<()> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        step: state.step,
        config: state.config.clone(),
        generator_config: state.generator.config.clone(),
        critic_config: state.critic.as_ref().map(|c| c.config.clone()),
        generator: tensor_records(&state.generator.params),
        critic: state.critic.as_ref().map(|c| tensor_records(&c.params)),
        gen_opt: adam_record(&state.gen_opt),
        critic_opt: state.critic_opt.as_ref().map(adam_record),
    };
    let json = serde_json::to_string(&file)
        .map_err(|e| Error::Checkpoint(format!("serialize failed: {e}")))?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, json)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<TrainState> {
    let json = std::fs::read_to_string(path)
        .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
    let file: CheckpointFile = serde_json::from_str(&json)
        .map_err(|e| Error::Checkpoint(format!("cannot parse {}: {e}", path.display())))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            file.version
        )));
    }
    file.config.validate()?;
    let mut init_rng = stream_rng(file.config.seed, Stream::Init, 0);
    let mut generator = Generator::new(file.generator_config.clone(), &mut init_rng)?;
    restore_params(&mut generator.params, &file.generator, "generator")?;
    let mut gen_opt = Adam::new(
        &generator.params,
        file.config.learning_rate,
        file.config.adam_beta1,
        file.config.adam_beta2,
    );
    restore_adam(&mut gen_opt, &file.gen_opt, "generator optimizer")?;

    let (critic, critic_opt) = match (&file.critic_config, &file.critic, &file.critic_opt) {
        (Some(cc), Some(records), Some(opt_rec)) => {
            let mut critic = Critic::new(cc.clone(), &mut init_rng)?;
            restore_params(&mut critic.params, records, "critic")?;
            let mut opt = Adam::new(
                &critic.params,
                file.config.learning_rate,
                file.config.adam_beta1,
                file.config.adam_beta2,
            );
            restore_adam(&mut opt, opt_rec, "critic optimizer")?;
            (Some(critic), Some(opt))
        }
        (None, None, None) => {
            if file.config.mode != TrainMode::Mse {
                return Err(Error::Checkpoint(
                    "adversarial-mode checkpoint is missing the critic".into(),
                ));
            }
            (None, None)
        }
        _ => {
            return Err(Error::Checkpoint(
                "checkpoint critic fields are inconsistent".into(),
            ))
        }
    };
    Ok(TrainState {
        generator,
        critic,
        gen_opt,
        critic_opt,
        step: file.step,
        config: file.config,
    })
}

/// Load only the generator (for inference, where no critic is needed).
pub fn load_generator(path: &Path) -> Result<(Generator, TrainConfig, u64)> {
    let state = load(path)?;
    Ok((state.generator, state.config, state.step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ImageBatch;
    use crate::models::Upsample;

    fn small_state(mode: TrainMode) -> TrainState {
        let cfg = TrainConfig {
            b: 2,
            pb: 2,
            m: 2,
            n_critic: 1,
            total_steps: 4,
            ..TrainConfig::default_for(mode)
        };
        let gc = GeneratorConfig {
            image_size: 8,
            channels: 1,
            widths: vec![4, 8],
            upsample: Upsample::Bilinear,
        };
        let cc = CriticConfig {
            image_size: 8,
            channels: 1,
            widths: vec![4, 8],
        };
        TrainState::new(cfg, gc, cc).unwrap()
    }

    fn batch(fill_x: f64, fill_y: f64) -> (ImageBatch, ImageBatch) {
        (
            ImageBatch::new(ndarray::Array4::from_elem((2, 1, 8, 8), fill_x)),
            ImageBatch::new(ndarray::Array4::from_elem((2, 1, 8, 8), fill_y)),
        )
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut state = small_state(TrainMode::Pscgan);
        let (x, y) = batch(0.4, 0.5);
        state.train_step(&x, &y).unwrap();
        let path = dir.path().join("ckpt.json");
        save(&state, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded.step, state.step);
        for (a, b) in state
            .generator
            .params
            .values()
            .iter()
            .zip(loaded.generator.params.values())
        {
            assert_eq!(a, b);
        }
        for (a, b) in state.gen_opt.m.iter().zip(loaded.gen_opt.m.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        // Train 4 steps straight vs 2 steps + save/load + 2 steps: identical.
        let dir = tempfile::tempdir().unwrap();
        let mut full = small_state(TrainMode::Pscgan);
        let mut half = small_state(TrainMode::Pscgan);
        let batches: Vec<_> = (0..4)
            .map(|i| batch(0.1 * i as f64 + 0.2, 0.1 * i as f64 + 0.3))
            .collect();
        for (x, y) in &batches {
            full.train_step(x, y).unwrap();
        }
        for (x, y) in &batches[..2] {
            half.train_step(x, y).unwrap();
        }
        let path = dir.path().join("mid.json");
        save(&half, &path).unwrap();
        let mut resumed = load(&path).unwrap();
        for (x, y) in &batches[2..] {
            resumed.train_step(x, y).unwrap();
        }
        for (a, b) in full
            .generator
            .params
            .values()
            .iter()
            .zip(resumed.generator.params.values())
        {
            assert_eq!(a, b, "resumed run diverged");
        }
    }

    #[test]
    fn corrupted_file_reports_checkpoint_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{\"version\": 99}").unwrap();
        match load(&path) {
            Err(Error::Checkpoint(_)) => {}
            Err(other) => panic!("expected checkpoint error, got {other:?}"),
            Ok(_) => panic!("expected checkpoint error, got success"),
        }
    }

    #[test]
    fn mse_checkpoint_has_no_critic() {
        let dir = tempfile::tempdir().unwrap();
        let state = small_state(TrainMode::Mse);
        assert!(state.critic.is_none());
        let path = dir.path().join("mse.json");
        save(&state, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert!(loaded.critic.is_none());
    }
}
