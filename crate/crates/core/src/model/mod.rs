//! The unrolled deep geometric distillation network.
//!
//! Each stage performs a gradient step on the data-fidelity term with a
//! learned positive step length, then a distillation block that stacks
//! `m, A(m), B(A(m)), …, B^{k−1}(A(m))` and fuses them with a linear 1×1
//! convolution. The stack is a learned span of operator powers applied to
//! `m`, standing in for a truncated Neumann series of `(I − W)⁻¹`.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{KSpaceData, MeasurementOp};
use crate::tensor::{softplus_value, Tape, Tensor, Var};

/// Step-length initialization `raw_eta(ℓ) = C1·ℓ + C2`.
pub const ETA_INIT_C1: f64 = -0.2;
pub const ETA_INIT_C2: f64 = 0.1;

/// Spatial kernel extent of the A and B blocks.
pub const KERNEL_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgdnConfig {
    /// Feature width of the A/B blocks.
    pub p: usize,
    /// Distillation depth (number of appended feature groups).
    pub k: usize,
    /// Stage count.
    pub stages: usize,
    /// One B block per stage reused k−1 times (default), or k−1 distinct ones.
    #[serde(default = "default_true")]
    pub shared_b: bool,
}

fn default_true() -> bool {
    true
}

impl Default for DgdnConfig {
    fn default() -> Self {
        Self {
            p: 32,
            k: 8,
            stages: 11,
            shared_b: true,
        }
    }
}

impl DgdnConfig {
    pub fn new(p: usize, k: usize, stages: usize) -> Self {
        Self {
            p,
            k,
            stages,
            shared_b: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.k == 0 || self.stages == 0 {
            return Err(Error::invalid(format!(
                "p, k and stage count must be ≥ 1 (got p={}, k={}, stages={})",
                self.p, self.k, self.stages
            )));
        }
        Ok(())
    }

    /// Input channels of the fusion convolution.
    pub fn fuse_channels(&self) -> usize {
        1 + self.k * self.p
    }

    pub fn b_blocks(&self) -> usize {
        if self.shared_b {
            1
        } else {
            self.k - 1
        }
    }

    /// 1-based index of the intermediate stage supervised by the loss:
    /// ceil((N + 1) / 2).
    pub fn mid_stage(&self) -> usize {
        (self.stages + 2) / 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Conv {
    pub fn zeros(cout: usize, cin: usize, kh: usize, kw: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[cout, cin, kh, kw]),
            bias: Tensor::zeros(&[cout]),
        }
    }

    /// Xavier-uniform weights, zero bias.
    pub fn xavier(cout: usize, cin: usize, kh: usize, kw: usize, rng: &mut impl Rng) -> Self {
        let fan_in = (cin * kh * kw) as f64;
        let fan_out = (cout * kh * kw) as f64;
        let bound = (6.0 / (fan_in + fan_out)).sqrt();
        Self {
            weight: Tensor::from_fn(&[cout, cin, kh, kw], |_| rng.gen_range(-bound..=bound)),
            bias: Tensor::zeros(&[cout]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageParams {
    /// Pre-softplus step length (rank 0).
    pub raw_eta: Tensor,
    pub conv_a: Conv,
    pub conv_b: Vec<Conv>,
    pub fuse: Conv,
}

impl StageParams {
    pub fn step_length(&self) -> f64 {
        softplus_value(self.raw_eta.item())
    }

    /// Sets the fusion to pass `m` straight through (weight 1 on channel 0).
    pub fn set_identity_fuse(&mut self) {
        self.fuse.weight.data_mut().fill(0.0);
        self.fuse.weight.data_mut()[0] = 1.0;
        self.fuse.bias.data_mut().fill(0.0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgdnModel {
    config: DgdnConfig,
    pub stages: Vec<StageParams>,
}

/// Xavier-initialized model with the default step-length schedule.
pub fn init_model(p: usize, k: usize, stages: usize, seed: u64) -> Result<DgdnModel> {
    DgdnModel::init(DgdnConfig::new(p, k, stages), seed)
}

impl DgdnModel {
    pub fn init(config: DgdnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, ks) = (config.p, KERNEL_SIZE);
        let stages = (1..=config.stages)
            .map(|l| StageParams {
                raw_eta: Tensor::scalar(ETA_INIT_C1 * l as f64 + ETA_INIT_C2),
                conv_a: Conv::xavier(p, 1, ks, ks, &mut rng),
                conv_b: (0..config.b_blocks())
                    .map(|_| Conv::xavier(p, p, ks, ks, &mut rng))
                    .collect(),
                fuse: Conv::xavier(1, config.fuse_channels(), 1, 1, &mut rng),
            })
            .collect();
        Ok(Self { config, stages })
    }

    /// Builds a model from explicit stage parameters, checking every shape.
    pub fn from_stages(config: DgdnConfig, stages: Vec<StageParams>) -> Result<Self> {
        config.validate()?;
        if stages.len() != config.stages {
            return Err(Error::shape(
                "dgdn_model",
                format!("{} stages for config with {}", stages.len(), config.stages),
            ));
        }
        let template = Self::zeroed(config)?;
        for (got, want) in stages.iter().zip(&template.stages) {
            let same = got.raw_eta.shape() == want.raw_eta.shape()
                && got.conv_b.len() == want.conv_b.len()
                && got
                    .params()
                    .iter()
                    .zip(want.params())
                    .all(|(a, b)| a.shape() == b.shape());
            if !same {
                return Err(Error::shape("dgdn_model", "stage parameter shapes do not match config"));
            }
        }
        Ok(Self { config, stages })
    }

    /// All-zero parameters with the given layout.
    pub fn zeroed(config: DgdnConfig) -> Result<Self> {
        config.validate()?;
        let (p, ks) = (config.p, KERNEL_SIZE);
        let stages = (0..config.stages)
            .map(|_| StageParams {
                raw_eta: Tensor::scalar(0.0),
                conv_a: Conv::zeros(p, 1, ks, ks),
                conv_b: (0..config.b_blocks()).map(|_| Conv::zeros(p, p, ks, ks)).collect(),
                fuse: Conv::zeros(1, config.fuse_channels(), 1, 1),
            })
            .collect();
        Ok(Self { config, stages })
    }

    pub fn config(&self) -> &DgdnConfig {
        &self.config
    }

    pub fn step_lengths(&self) -> Vec<f64> {
        self.stages.iter().map(StageParams::step_length).collect()
    }

    /// Parameters in canonical order: per stage raw_eta, A weight/bias,
    /// each B weight/bias, fuse weight/bias.
    pub fn params(&self) -> Vec<&Tensor> {
        self.stages.iter().flat_map(StageParams::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.stages.iter_mut().flat_map(StageParams::params_mut).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Registers every parameter on `tape` as a trainable leaf.
    pub fn bind<'t>(&self, tape: &'t Tape) -> ModelVars<'t> {
        let vars: Vec<Var<'t>> = self.params().into_iter().map(|t| tape.param(t.clone())).collect();
        ModelVars::from_vars(&self.config, &vars).expect("canonical parameter order")
    }

    /// Inference without keeping gradients around; returns `x_f`.
    pub fn reconstruct(&self, y: &KSpaceData, op: &MeasurementOp, x0: Option<&Tensor>) -> Result<Tensor> {
        let tape = Tape::new();
        let vars = self.bind(&tape);
        let trace = forward(&tape, &vars, y, op, x0)?;
        Ok((*trace.output().value()).clone())
    }
}

impl StageParams {
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.raw_eta, &self.conv_a.weight, &self.conv_a.bias];
        for b in &self.conv_b {
            out.push(&b.weight);
            out.push(&b.bias);
        }
        out.push(&self.fuse.weight);
        out.push(&self.fuse.bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![
            &mut self.raw_eta,
            &mut self.conv_a.weight,
            &mut self.conv_a.bias,
        ];
        for b in &mut self.conv_b {
            out.push(&mut b.weight);
            out.push(&mut b.bias);
        }
        out.push(&mut self.fuse.weight);
        out.push(&mut self.fuse.bias);
        out
    }
}

/// Tape handles for one stage's parameters.
#[derive(Debug, Clone)]
pub struct StageVars<'t> {
    pub raw_eta: Var<'t>,
    pub conv_a: (Var<'t>, Var<'t>),
    pub conv_b: Vec<(Var<'t>, Var<'t>)>,
    pub fuse: (Var<'t>, Var<'t>),
}

#[derive(Debug, Clone)]
pub struct ModelVars<'t> {
    pub config: DgdnConfig,
    pub stages: Vec<StageVars<'t>>,
}

impl<'t> ModelVars<'t> {
    /// Splits vars given in canonical parameter order.
    pub fn from_vars(config: &DgdnConfig, vars: &[Var<'t>]) -> Result<Self> {
        let per_stage = 5 + 2 * config.b_blocks();
        if vars.len() != per_stage * config.stages {
            return Err(Error::shape(
                "model_vars",
                format!("{} vars, expected {}", vars.len(), per_stage * config.stages),
            ));
        }
        let stages = vars
            .chunks(per_stage)
            .map(|c| StageVars {
                raw_eta: c[0],
                conv_a: (c[1], c[2]),
                conv_b: c[3..per_stage - 2].chunks(2).map(|b| (b[0], b[1])).collect(),
                fuse: (c[per_stage - 2], c[per_stage - 1]),
            })
            .collect();
        Ok(Self {
            config: *config,
            stages,
        })
    }

    pub fn all(&self) -> Vec<Var<'t>> {
        let mut out = Vec::new();
        for s in &self.stages {
            out.extend([s.raw_eta, s.conv_a.0, s.conv_a.1]);
            for b in &s.conv_b {
                out.extend([b.0, b.1]);
            }
            out.extend([s.fuse.0, s.fuse.1]);
        }
        out
    }
}

/// η = softplus(raw_eta), positive by construction.
pub fn step_length<'t>(tape: &'t Tape, raw_eta: Var<'t>) -> Result<Var<'t>> {
    tape.softplus(raw_eta)
}

/// `m = x_prev − η · Fᴴ(F x_prev − y)` with `y` given as 2×H×W planes.
pub fn linear_recon<'t>(
    tape: &'t Tape,
    x_prev: Var<'t>,
    eta: Var<'t>,
    y: Var<'t>,
    op: &MeasurementOp,
) -> Result<Var<'t>> {
    let fx = op.forward_var(tape, x_prev)?;
    let residual = tape.sub(fx, y)?;
    let grad = op.adjoint_var(tape, residual)?;
    let step = tape.scale(eta, grad)?;
    tape.sub(x_prev, step)
}

/// Feature maps `F_0 … F_k` where `F_0 = m` and each `F_i` appends the
/// p-channel group `B^{i−1}(A(m))` to `F_{i−1}`.
pub fn distill_features<'t>(tape: &'t Tape, stage: &StageVars<'t>, m: Var<'t>) -> Result<Vec<Var<'t>>> {
    let channels = m.shape()[0];
    if channels != 1 {
        return Err(Error::shape(
            "distill_stage",
            format!("expected a single-channel input, got {channels}"),
        ));
    }
    let k = stage.fuse_k()?;
    let mut features = Vec::with_capacity(k + 1);
    features.push(m);
    let mut g = tape.relu(tape.conv2d(m, stage.conv_a.0, stage.conv_a.1)?)?;
    for i in 1..=k {
        if i > 1 {
            let (w, b) = if stage.conv_b.len() == 1 {
                stage.conv_b[0]
            } else {
                stage.conv_b[i - 2]
            };
            g = tape.relu(tape.conv2d(g, w, b)?)?;
        }
        let next = tape.concat_channels(&[features[i - 1], g])?;
        features.push(next);
    }
    Ok(features)
}

impl StageVars<'_> {
    /// Depth implied by the fusion width `1 + k·p`.
    fn fuse_k(&self) -> Result<usize> {
        let fuse_in = self.fuse.0.shape()[1];
        let p = self.conv_a.0.shape()[0];
        if fuse_in < 1 || !(fuse_in - 1).is_multiple_of(p) {
            return Err(Error::shape(
                "distill_stage",
                format!("fuse expects {fuse_in} channels, not of the form 1 + k·{p}"),
            ));
        }
        Ok((fuse_in - 1) / p)
    }
}

/// Distillation block: linear 1×1 fusion of `F_k`.
pub fn distill_stage<'t>(tape: &'t Tape, stage: &StageVars<'t>, m: Var<'t>) -> Result<Var<'t>> {
    let features = distill_features(tape, stage, m)?;
    let fk = *features.last().expect("F_0 always present");
    tape.conv2d(fk, stage.fuse.0, stage.fuse.1)
}

/// Per-stage outputs of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<'t> {
    pub x0: Var<'t>,
    pub m: Vec<Var<'t>>,
    pub x: Vec<Var<'t>>,
}

impl<'t> ForwardTrace<'t> {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Final reconstruction `x_f = x_N`.
    pub fn output(&self) -> Var<'t> {
        *self.x.last().expect("at least one stage")
    }

    /// Output of stage `l` (1-based).
    pub fn stage_output(&self, l: usize) -> Var<'t> {
        self.x[l - 1]
    }
}

/// Runs every stage. `x0` defaults to the zero-filled reconstruction `Fᴴy`.
pub fn forward<'t>(
    tape: &'t Tape,
    model: &ModelVars<'t>,
    y: &KSpaceData,
    op: &MeasurementOp,
    x0: Option<&Tensor>,
) -> Result<ForwardTrace<'t>> {
    let x0 = match x0 {
        Some(x) => x.clone(),
        None => op.apply_adjoint(y)?,
    };
    let (h, w) = op.extents();
    if x0.shape() != [1, h, w] {
        return Err(Error::shape(
            "forward",
            format!("x0 has shape {:?}, operator expects [1, {h}, {w}]", x0.shape()),
        ));
    }
    if y.extents() != (h, w) {
        return Err(Error::shape("forward", "k-space extents differ from operator"));
    }
    let y = tape.constant(y.to_tensor());
    let x0 = tape.constant(x0);
    let mut x = x0;
    let mut ms = Vec::with_capacity(model.stages.len());
    let mut xs = Vec::with_capacity(model.stages.len());
    for stage in &model.stages {
        let eta = step_length(tape, stage.raw_eta)?;
        let m = linear_recon(tape, x, eta, y, op)?;
        x = distill_stage(tape, stage, m)?;
        ms.push(m);
        xs.push(x);
    }
    Ok(ForwardTrace { x0, m: ms, x: xs })
}
