//! Two-point ℓ1 loss, the Adam training loop and training telemetry.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{generate_mask, MaskScheme, MeasurementOp, SamplingMask};
use crate::imaging::{load_pgm_dir, synthetic_set};
use crate::metrics::{psnr, ssim, SSIM_WINDOW};
use crate::model::{forward, save_checkpoint, DgdnConfig, DgdnModel, ForwardTrace};
use crate::tensor::{AdamConfig, AdamState, Tape, Tensor, Var};

/// `(‖x_mid − x‖₁ + ‖x_f − x‖₁) / N` for one sample, where `x_mid` is the
/// output of stage ceil((N_stages + 1) / 2) and N the pixel count.
pub fn total_loss<'t>(tape: &'t Tape, trace: &ForwardTrace<'t>, x_true: Var<'t>) -> Result<Var<'t>> {
    if trace.is_empty() {
        return Err(Error::invalid("empty forward trace"));
    }
    let mid = mid_stage_index(trace.len());
    let n = x_true.value().len() as f64;
    let mid_term = tape.l1_loss(trace.stage_output(mid), x_true)?;
    let final_term = tape.l1_loss(trace.output(), x_true)?;
    let both = tape.add(mid_term, final_term)?;
    tape.mul_const(both, 1.0 / n)
}

/// 1-based mid stage, ceil((stages + 1) / 2).
pub fn mid_stage_index(stages: usize) -> usize {
    (stages + 2) / 2
}

fn default_epochs() -> usize {
    100
}
fn default_batch() -> usize {
    1
}
fn default_lr() -> f64 {
    1e-4
}
fn default_true() -> bool {
    true
}
fn default_p() -> usize {
    32
}
fn default_k() -> usize {
    8
}
fn default_stages() -> usize {
    11
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    pub train: usize,
    #[serde(default)]
    pub val: usize,
    pub height: usize,
    pub width: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    pub cs_ratio: f64,
    #[serde(default)]
    pub mask_scheme: MaskScheme,
    #[serde(default)]
    pub mask_seed: u64,
    /// Draw a fresh mask for every sample instead of one per run.
    #[serde(default)]
    pub per_image_masks: bool,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_stages")]
    pub stages: usize,
    #[serde(default = "default_true")]
    pub shared_b: bool,
    #[serde(default)]
    pub seed: u64,
    /// Save a checkpoint every this many epochs (0 disables).
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub train_dir: Option<PathBuf>,
    #[serde(default)]
    pub val_dir: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticData>,
}

impl TrainConfig {
    /// Default hyperparameters at the given sampling ratio.
    pub fn new(cs_ratio: f64) -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: 1,
            lr: default_lr(),
            cs_ratio,
            mask_scheme: MaskScheme::PseudoRadial,
            mask_seed: 0,
            per_image_masks: false,
            p: default_p(),
            k: default_k(),
            stages: default_stages(),
            shared_b: true,
            seed: 0,
            checkpoint_every: 0,
            train_dir: None,
            val_dir: None,
            synthetic: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model_config(&self) -> DgdnConfig {
        DgdnConfig {
            p: self.p,
            k: self.k,
            stages: self.stages,
            shared_b: self.shared_b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate {} must be finite and ≥ 0", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be ≥ 1"));
        }
        if self.batch_size != 1 {
            return Err(Error::invalid(format!(
                "batch_size is fixed at 1, got {}",
                self.batch_size
            )));
        }
        if !(self.cs_ratio > 0.0 && self.cs_ratio <= 1.0) {
            return Err(Error::invalid(format!("cs_ratio {} outside (0, 1]", self.cs_ratio)));
        }
        self.model_config().validate()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub train: Vec<Tensor>,
    pub val: Vec<Tensor>,
}

impl Dataset {
    /// Images named by a config: PGM directories, or seeded phantoms when
    /// `synthetic` is set (validation phantoms follow the training ones in
    /// the same stream).
    pub fn from_config(cfg: &TrainConfig) -> Result<Self> {
        if let Some(s) = &cfg.synthetic {
            let mut all = synthetic_set(s.train + s.val, s.height, s.width, s.seed);
            let val = all.split_off(s.train);
            return Ok(Self { train: all, val });
        }
        let dir = cfg
            .train_dir
            .as_ref()
            .ok_or_else(|| Error::invalid("config needs train_dir or synthetic"))?;
        let strip = |v: Vec<(String, Tensor)>| v.into_iter().map(|(_, t)| t).collect::<Vec<_>>();
        let train = strip(load_pgm_dir(dir)?);
        let val = match &cfg.val_dir {
            Some(d) => strip(load_pgm_dir(d)?),
            None => Vec::new(),
        };
        Ok(Self { train, val })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterRecord {
    pub epoch: usize,
    pub iter: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_psnr: Option<f64>,
    pub val_ssim: Option<f64>,
    pub step_lengths: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub iterations: Vec<IterRecord>,
    pub epochs: Vec<EpochSummary>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,iter,loss\n");
        for r in &self.iterations {
            let _ = writeln!(s, "{},{},{:.17e}", r.epoch, r.iter, r.loss);
        }
        s
    }

    /// One JSON object per epoch, newline separated.
    pub fn epochs_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.epochs {
            s.push_str(&serde_json::to_string(e).expect("summary serializes"));
            s.push('\n');
        }
        s
    }

    pub fn first_epoch_loss(&self) -> Option<f64> {
        self.epochs.first().map(|e| e.mean_loss)
    }

    pub fn last_epoch_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }
}

fn check_extents(images: &[Tensor], h: usize, w: usize, what: &str) -> Result<()> {
    for (i, img) in images.iter().enumerate() {
        if img.shape() != [1, h, w] {
            return Err(Error::shape(
                "train",
                format!("{what} image {i} has shape {:?}, expected [1, {h}, {w}]", img.shape()),
            ));
        }
    }
    Ok(())
}

/// Mean PSNR/SSIM of the model on `images` under `op`.
pub fn validate_model(model: &DgdnModel, images: &[Tensor], op: &MeasurementOp) -> Result<(f64, Option<f64>)> {
    let (h, w) = op.extents();
    let mut p_sum = 0.0;
    let mut s_sum = 0.0;
    let with_ssim = h >= SSIM_WINDOW && w >= SSIM_WINDOW;
    for x in images {
        let y = op.apply_forward(x)?;
        let xhat = model.reconstruct(&y, op, None)?;
        p_sum += psnr(&xhat, x, 1.0)?;
        if with_ssim {
            s_sum += ssim(&xhat, x)?;
        }
    }
    let n = images.len() as f64;
    Ok((p_sum / n, with_ssim.then_some(s_sum / n)))
}

pub fn train(model: DgdnModel, data: &Dataset, cfg: &TrainConfig, out_dir: Option<&Path>) -> Result<(DgdnModel, TrainLog)> {
    train_with_progress(model, data, cfg, out_dir, |_| {})
}

/// Batch-size-1 Adam over the training set, reshuffled every epoch.
/// `progress` sees each epoch summary as it is produced.
pub fn train_with_progress(
    mut model: DgdnModel,
    data: &Dataset,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
    mut progress: impl FnMut(&EpochSummary),
) -> Result<(DgdnModel, TrainLog)> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let (_, h, w) = data.train[0].chw("train")?;
    check_extents(&data.train, h, w, "training")?;
    check_extents(&data.val, h, w, "validation")?;

    let fixed_op = MeasurementOp::new(generate_mask(h, w, cfg.cs_ratio, cfg.mask_scheme, cfg.mask_seed)?)?;
    let mut mask_counter = cfg.mask_seed;
    let mut next_op = |fixed: &MeasurementOp| -> Result<MeasurementOp> {
        if cfg.per_image_masks {
            mask_counter = mask_counter.wrapping_add(1);
            MeasurementOp::new(generate_mask(h, w, cfg.cs_ratio, cfg.mask_scheme, mask_counter)?)
        } else {
            Ok(fixed.clone())
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = AdamState::new(
        model.params(),
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sum = 0.0;
        for (iter, &idx) in order.iter().enumerate() {
            let x_true = &data.train[idx];
            let op = next_op(&fixed_op)?;
            let y = op.apply_forward(x_true)?;

            let tape = Tape::new();
            let vars = model.bind(&tape);
            let trace = forward(&tape, &vars, &y, &op, None)?;
            let target = tape.constant(x_true.clone());
            let loss = total_loss(&tape, &trace, target)?;
            let loss_value = loss.value().item();
            let grads = tape.backward(loss)?;
            let grad_refs = vars
                .all()
                .into_iter()
                .map(|v| grads.expect(v))
                .collect::<Result<Vec<&Tensor>>>()?;
            adam.step(&mut model.params_mut(), &grad_refs)?;

            epoch_sum += loss_value;
            log.iterations.push(IterRecord {
                epoch,
                iter,
                loss: loss_value,
            });
        }

        let step_lengths = model.step_lengths();
        if let Some(bad) = step_lengths.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::invalid(format!("step length became {bad} in epoch {epoch}")));
        }
        let (val_psnr, val_ssim) = if data.val.is_empty() {
            (None, None)
        } else {
            let (p, s) = validate_model(&model, &data.val, &fixed_op)?;
            (Some(p), s)
        };
        let summary = EpochSummary {
            epoch,
            mean_loss: epoch_sum / order.len() as f64,
            val_psnr,
            val_ssim,
            step_lengths,
        };
        progress(&summary);
        log.epochs.push(summary);

        if let Some(dir) = out_dir {
            if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
                save_checkpoint(&model, dir.join(format!("checkpoint_epoch_{epoch:04}.dgdn")))?;
            }
        }
    }
    Ok((model, log))
}

/// Training mask for a config and image extents.
pub fn training_mask(cfg: &TrainConfig, h: usize, w: usize) -> Result<SamplingMask> {
    generate_mask(h, w, cfg.cs_ratio, cfg.mask_scheme, cfg.mask_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::synthetic_set;

    #[test]
    fn mid_index() {
        assert_eq!(mid_stage_index(11), 6);
        assert_eq!(mid_stage_index(5), 3);
        assert_eq!(mid_stage_index(2), 2);
        assert_eq!(mid_stage_index(1), 1);
    }

    #[test]
    fn loss_arithmetic() {
        // 2×2 image, mid stage off by 0.1 everywhere, final exact → 0.1
        let tape = Tape::new();
        let x = Tensor::from_fn(&[1, 2, 2], |i| i as f64 * 0.25);
        let truth = tape.constant(x.clone());
        let off = tape.constant(x.map(|v| v + 0.1));
        let exact = tape.constant(x.clone());
        let trace = ForwardTrace {
            x0: exact,
            m: vec![exact; 3],
            x: vec![exact, off, exact],
        };
        let loss = total_loss(&tape, &trace, truth).unwrap();
        assert!((loss.value().item() - 0.1).abs() < 1e-15);

        let perfect = ForwardTrace {
            x0: exact,
            m: vec![exact; 3],
            x: vec![exact; 3],
        };
        assert_eq!(total_loss(&tape, &perfect, truth).unwrap().value().item(), 0.0);
    }

    #[test]
    fn config_json_rejects_unknown_keys_and_bad_values() {
        assert!(TrainConfig::from_json(r#"{"cs_ratio": 0.2, "bogus": 1}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"cs_ratio": 0.2, "batch_size": 4}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"cs_ratio": 0.0}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"cs_ratio": 0.2, "lr": -1.0}"#).is_err());
        let cfg = TrainConfig::from_json(r#"{"cs_ratio": 0.2}"#).unwrap();
        assert_eq!(cfg, TrainConfig::new(0.2));
    }

    #[test]
    fn empty_dataset_rejected() {
        let model = crate::model::init_model(2, 1, 1, 0).unwrap();
        let cfg = TrainConfig::new(0.5);
        assert!(train(model, &Dataset::default(), &cfg, None).is_err());
    }

    #[test]
    fn zero_lr_keeps_parameters() {
        let mut cfg = TrainConfig::new(0.3);
        cfg.lr = 0.0;
        cfg.epochs = 2;
        cfg.p = 2;
        cfg.k = 2;
        cfg.stages = 2;
        let data = Dataset {
            train: synthetic_set(3, 12, 12, 4),
            val: Vec::new(),
        };
        let model = DgdnModel::init(cfg.model_config(), 1).unwrap();
        let (trained, log) = train(model.clone(), &data, &cfg, None).unwrap();
        assert_eq!(trained, model);
        assert_eq!(log.iterations.len(), 6);
    }

    #[test]
    fn per_image_masks_option_runs() {
        let mut cfg = TrainConfig::new(0.3);
        cfg.epochs = 1;
        cfg.p = 2;
        cfg.k = 1;
        cfg.stages = 1;
        cfg.per_image_masks = true;
        let data = Dataset {
            train: synthetic_set(2, 12, 12, 4),
            val: synthetic_set(1, 12, 12, 5),
        };
        let model = DgdnModel::init(cfg.model_config(), 1).unwrap();
        let (_, log) = train(model, &data, &cfg, None).unwrap();
        assert!(log.epochs[0].val_psnr.is_some() && log.epochs[0].val_ssim.is_some());
    }
}
