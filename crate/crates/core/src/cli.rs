//! Command-line front end: `mask-gen`, `train`, `reconstruct`, `baseline`
//! and `eval`.
//!
//! Every subcommand re-reads what it wrote before reporting success, so a
//! zero exit status means the artifacts on disk are complete and parse.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::baselines::{ista_reconstruct, zero_filling, IstaConfig, SparsifyingTransform};
use crate::error::Error;
use crate::eval::{evaluate_dataset, EvalReport, MaskSpec, Method};
use crate::fourier::{generate_mask, MaskScheme, MeasurementOp, SamplingMask};
use crate::imaging::{load_pgm, load_pgm_dir, save_pgm, synthetic_set, BitDepth};
use crate::model::{load_checkpoint, save_checkpoint, DgdnModel};
use crate::tensor::Tensor;
use crate::training::{train_with_progress, Dataset, SyntheticData, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(#[from] clap::Error),
    #[error(transparent)]
    Run(#[from] Error),
    #[error("verification failed: {0}")]
    Verify(String),
}

#[derive(Debug, Parser)]
#[command(name = "dgdn", version, about = "Compressed-sensing MRI reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a k-space sampling mask.
    MaskGen(MaskGenArgs),
    /// Train a network from a JSON config.
    Train(TrainArgs),
    /// Reconstruct one image with a trained checkpoint.
    Reconstruct(ReconstructArgs),
    /// Reconstruct one image with zero-filling or ISTA.
    Baseline(BaselineArgs),
    /// Evaluate methods over a test set and write report tables.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Size {
    pub height: usize,
    pub width: usize,
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (h, w) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
        Ok(Size {
            height: parse(h)?,
            width: parse(w)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bits {
    #[value(name = "8")]
    Eight,
    #[value(name = "16")]
    Sixteen,
}

impl From<Bits> for BitDepth {
    fn from(b: Bits) -> Self {
        match b {
            Bits::Eight => BitDepth::Eight,
            Bits::Sixteen => BitDepth::Sixteen,
        }
    }
}

#[derive(Debug, Args)]
pub struct MaskGenArgs {
    #[arg(long)]
    pub size: Size,
    #[arg(long)]
    pub ratio: f64,
    #[arg(long, default_value = "pseudo-radial")]
    pub scheme: MaskScheme,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for the model, checkpoints and logs.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's initialization/shuffle seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train on N seeded phantoms instead of the configured images.
    #[arg(long, value_name = "N")]
    pub synthetic: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    /// Ground-truth image; its k-space is simulated through the mask.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "16")]
    pub bits: Bits,
    /// Also write the simulated measurements.
    #[arg(long, value_name = "PATH")]
    pub save_kspace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineMethod {
    ZeroFilling,
    Ista,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = IstaConfig::default().gamma)]
    pub gamma: f64,
    #[arg(long, default_value_t = IstaConfig::default().eta)]
    pub eta: f64,
    #[arg(long, default_value_t = IstaConfig::default().steps)]
    pub steps: usize,
    #[arg(long, default_value = "dct2")]
    pub transform: SparsifyingTransform,
    /// CSV of the ISTA objective (and PSNR against the input) per step.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "16")]
    pub bits: Bits,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Evaluate on N seeded phantoms instead of the configured test set.
    #[arg(long, value_name = "N")]
    pub synthetic: Option<usize>,
    /// Seed for `--synthetic` phantoms.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub quiet: bool,
}

/// Evaluation document.
///
/// ```json
/// {"ratios": [0.1, 0.2], "mask_scheme": "pseudo-radial", "mask_seed": 0,
///  "test_dir": "test/",
///  "methods": [{"kind": "zero-filling"},
///              {"kind": "ista", "gamma": 0.001},
///              {"kind": "dgdn", "name": "proposed",
///               "checkpoints": [{"ratio": 0.2, "path": "r20/model.dgdn"}]}]}
/// ```
///
/// Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub ratios: Vec<f64>,
    #[serde(default)]
    pub mask_scheme: MaskScheme,
    #[serde(default)]
    pub mask_seed: u64,
    #[serde(default)]
    pub test_dir: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticTest>,
    pub methods: Vec<MethodConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTest {
    pub count: usize,
    pub height: usize,
    pub width: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MethodConfig {
    ZeroFilling,
    Ista {
        #[serde(default)]
        steps: Option<usize>,
        #[serde(default)]
        eta: Option<f64>,
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default)]
        transform: Option<SparsifyingTransform>,
    },
    Dgdn {
        #[serde(default = "default_dgdn_name")]
        name: String,
        checkpoints: Vec<CheckpointRef>,
    },
}

fn default_dgdn_name() -> String {
    "dgdn".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointRef {
    pub ratio: f64,
    pub path: PathBuf,
}

/// Parses `args` (program name first) and runs the chosen subcommand.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    match cli.command {
        Command::MaskGen(a) => mask_gen(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Reconstruct(a) => reconstruct_cmd(&a),
        Command::Baseline(a) => baseline_cmd(&a),
        Command::Eval(a) => eval_cmd(&a),
    }
}

/// [`run`] with process conventions: clap handles help, version and usage
/// errors; everything else prints `error: …` and exits 1.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            ExitCode::from(e.exit_code().clamp(0, 255) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn read_file(path: &Path) -> Result<String, CliError> {
    Ok(fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn config_dir(config: &Path) -> PathBuf {
    config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn mask_gen(a: &MaskGenArgs) -> Result<(), CliError> {
    let mask = generate_mask(a.size.height, a.size.width, a.ratio, a.scheme, a.seed)?;
    mask.save(&a.out)?;
    if SamplingMask::load(&a.out)? != mask {
        return Err(CliError::Verify(format!("{} does not read back", a.out.display())));
    }
    println!(
        "{}: {}x{} {} mask, {} samples ({:.4})",
        a.out.display(),
        a.size.height,
        a.size.width,
        a.scheme,
        mask.count(),
        mask.sampled_fraction()
    );
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Result<(), CliError> {
    let mut cfg = TrainConfig::from_json(&read_file(&a.config)?)?;
    let base = config_dir(&a.config);
    cfg.train_dir = cfg.train_dir.map(|d| resolve(&base, &d));
    cfg.val_dir = cfg.val_dir.map(|d| resolve(&base, &d));
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(n) = a.synthetic {
        let prev = cfg.synthetic.take();
        cfg.synthetic = Some(SyntheticData {
            train: n,
            val: prev.as_ref().map_or(0, |s| s.val),
            height: prev.as_ref().map_or(32, |s| s.height),
            width: prev.as_ref().map_or(32, |s| s.width),
            seed: prev.map_or(cfg.seed, |s| s.seed),
        });
    }
    cfg.validate()?;
    let data = Dataset::from_config(&cfg)?;
    create_dir(&a.out)?;
    write_file(
        &a.out.join("config.json"),
        serde_json::to_string_pretty(&cfg).map_err(Error::from)?,
    )?;

    let model = DgdnModel::init(cfg.model_config(), cfg.seed)?;
    let quiet = a.quiet;
    let (model, log) = train_with_progress(model, &data, &cfg, Some(&a.out), |e| {
        if quiet {
            return;
        }
        match e.val_psnr {
            Some(p) => println!("epoch {:>4}  loss {:.6}  val psnr {:.3} dB", e.epoch, e.mean_loss, p),
            None => println!("epoch {:>4}  loss {:.6}", e.epoch, e.mean_loss),
        }
    })?;

    let model_path = a.out.join("model.dgdn");
    save_checkpoint(&model, &model_path)?;
    write_file(&a.out.join("train_log.csv"), log.to_csv())?;
    write_file(&a.out.join("epochs.jsonl"), log.epochs_jsonl())?;

    let back = load_checkpoint(&model_path)?;
    if back.to_checkpoint_bytes() != model.to_checkpoint_bytes() {
        return Err(CliError::Verify(format!("{} does not read back", model_path.display())));
    }
    if cfg.checkpoint_every > 0 {
        for epoch in (cfg.checkpoint_every..=cfg.epochs).step_by(cfg.checkpoint_every) {
            load_checkpoint(a.out.join(format!("checkpoint_epoch_{epoch:04}.dgdn")))?;
        }
    }
    println!("{}: {} parameters", model_path.display(), model.num_parameters());
    Ok(())
}

fn load_op(mask: &Path, image: &Tensor) -> Result<MeasurementOp, CliError> {
    let mask = SamplingMask::load(mask)?;
    let (_, h, w) = image.chw("input")?;
    if mask.extents() != (h, w) {
        return Err(Error::shape(
            "input",
            format!("mask is {:?} but image is {h}×{w}", mask.extents()),
        )
        .into());
    }
    Ok(MeasurementOp::new(mask)?)
}

fn save_verified(path: &Path, image: &Tensor, bits: Bits) -> Result<(), CliError> {
    save_pgm(path, image, bits.into())?;
    let back = load_pgm(path)?;
    if back.shape() != image.shape() {
        return Err(CliError::Verify(format!("{} does not read back", path.display())));
    }
    Ok(())
}

fn reconstruct_cmd(a: &ReconstructArgs) -> Result<(), CliError> {
    let model = load_checkpoint(&a.checkpoint)?;
    let x = load_pgm(&a.input)?;
    let op = load_op(&a.mask, &x)?;
    let y = op.apply_forward(&x)?;
    if let Some(p) = &a.save_kspace {
        y.save(p)?;
    }
    let xhat = model.reconstruct(&y, &op, None)?;
    save_verified(&a.out, &xhat, a.bits)?;
    report_quality(&a.out, &xhat, &x)
}

fn baseline_cmd(a: &BaselineArgs) -> Result<(), CliError> {
    let x = load_pgm(&a.input)?;
    let op = load_op(&a.mask, &x)?;
    let y = op.apply_forward(&x)?;
    let xhat = match a.method {
        BaselineMethod::ZeroFilling => zero_filling(&y, &op)?,
        BaselineMethod::Ista => {
            let cfg = IstaConfig {
                steps: a.steps,
                eta: a.eta,
                gamma: a.gamma,
                transform: a.transform,
            };
            let res = ista_reconstruct(&y, &op, &cfg, Some(&x))?;
            if let Some(p) = &a.trace {
                write_file(p, res.trace_csv())?;
            }
            res.image
        }
    };
    save_verified(&a.out, &xhat, a.bits)?;
    report_quality(&a.out, &xhat, &x)
}

fn report_quality(out: &Path, xhat: &Tensor, x: &Tensor) -> Result<(), CliError> {
    let p = crate::metrics::psnr(xhat, x, 1.0)?;
    println!("{}: psnr {} dB", out.display(), crate::metrics::format_db(p));
    Ok(())
}

fn build_methods(cfg: &EvalConfig, base: &Path) -> Result<Vec<Method>, CliError> {
    cfg.methods
        .iter()
        .map(|m| {
            Ok(match m {
                MethodConfig::ZeroFilling => Method::ZeroFilling,
                MethodConfig::Ista {
                    steps,
                    eta,
                    gamma,
                    transform,
                } => {
                    let d = IstaConfig::default();
                    let c = IstaConfig {
                        steps: steps.unwrap_or(d.steps),
                        eta: eta.unwrap_or(d.eta),
                        gamma: gamma.unwrap_or(d.gamma),
                        transform: transform.unwrap_or(d.transform),
                    };
                    c.validate()?;
                    Method::Ista(c)
                }
                MethodConfig::Dgdn { name, checkpoints } => Method::Dgdn {
                    name: name.clone(),
                    checkpoints: checkpoints
                        .iter()
                        .map(|c| Ok((c.ratio, load_checkpoint(resolve(base, &c.path))?)))
                        .collect::<Result<_, Error>>()?,
                },
            })
        })
        .collect()
}

fn eval_cmd(a: &EvalArgs) -> Result<(), CliError> {
    let cfg: EvalConfig = serde_json::from_str(&read_file(&a.config)?).map_err(Error::from)?;
    if cfg.ratios.is_empty() || cfg.methods.is_empty() {
        return Err(Error::invalid("eval config needs at least one ratio and one method").into());
    }
    let base = config_dir(&a.config);
    let test: Vec<(String, Tensor)> = match (a.synthetic, &cfg.synthetic, &cfg.test_dir) {
        (Some(n), s, _) => {
            let (h, w) = s.as_ref().map_or((32, 32), |s| (s.height, s.width));
            let seed = a.seed.or(s.as_ref().map(|s| s.seed)).unwrap_or(0);
            named_phantoms(n, h, w, seed)
        }
        (None, Some(s), _) => named_phantoms(s.count, s.height, s.width, a.seed.unwrap_or(s.seed)),
        (None, None, Some(dir)) => load_pgm_dir(resolve(&base, dir))?,
        (None, None, None) => {
            return Err(Error::invalid("eval config needs test_dir or synthetic").into());
        }
    };
    let methods = build_methods(&cfg, &base)?;
    let spec = MaskSpec {
        scheme: cfg.mask_scheme,
        seed: cfg.mask_seed,
    };
    let report = evaluate_dataset(&methods, &test, &cfg.ratios, spec)?;

    create_dir(&a.out)?;
    let rows_path = a.out.join("report.csv");
    write_file(&rows_path, report.rows_csv())?;
    write_file(&a.out.join("aggregate.csv"), report.aggregates_csv())?;
    let table = report.render_table();
    write_file(&a.out.join("table.txt"), &table)?;
    verify_row_count(&rows_path, &report, methods.len() * cfg.ratios.len() * test.len())?;
    if !a.quiet {
        print!("{table}");
    }
    Ok(())
}

fn verify_row_count(path: &Path, report: &EvalReport, expected: usize) -> Result<(), CliError> {
    let written = read_file(path)?.lines().count().saturating_sub(1);
    if written != expected || report.rows.len() != expected {
        return Err(CliError::Verify(format!(
            "{} has {written} rows, expected {expected}",
            path.display()
        )));
    }
    Ok(())
}

fn named_phantoms(n: usize, h: usize, w: usize, seed: u64) -> Vec<(String, Tensor)> {
    synthetic_set(n, h, w, seed)
        .into_iter()
        .enumerate()
        .map(|(i, t)| (format!("phantom_{i:03}"), t))
        .collect()
}
