//! Dataset-level evaluation producing per-image rows and mean ± std
//! aggregates per (method, ratio).

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{ista_reconstruct, zero_filling, IstaConfig};
use crate::error::{Error, Result};
use crate::fourier::{generate_mask, MaskScheme, MeasurementOp};
use crate::metrics::{format_db, psnr, ssim};
use crate::model::DgdnModel;
use crate::tensor::Tensor;

const RATIO_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub enum Method {
    ZeroFilling,
    Ista(IstaConfig),
    /// A trained network, one checkpoint per sampling ratio.
    Dgdn {
        name: String,
        checkpoints: Vec<(f64, DgdnModel)>,
    },
}

impl Method {
    pub fn name(&self) -> &str {
        match self {
            Method::ZeroFilling => "zero-filling",
            Method::Ista(_) => "ista",
            Method::Dgdn { name, .. } => name,
        }
    }

    fn model_for(&self, ratio: f64) -> Result<Option<&DgdnModel>> {
        match self {
            Method::Dgdn { name, checkpoints } => checkpoints
                .iter()
                .find(|(r, _)| (r - ratio).abs() < RATIO_TOL)
                .map(|(_, m)| Some(m))
                .ok_or_else(|| Error::MissingCheckpoint {
                    method: name.clone(),
                    ratio,
                }),
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub scheme: MaskScheme,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRow {
    pub method: String,
    pub ratio: f64,
    pub image: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: String,
    pub ratio: f64,
    pub count: usize,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<ImageRow>,
    pub aggregates: Vec<AggregateRow>,
}

/// Mean and sample standard deviation. An all-`+inf` column (perfect
/// reconstructions) reports `(inf, 0)`; a partially infinite one `(inf, NaN)`.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let infinite = values.iter().filter(|v| v.is_infinite()).count();
    if infinite == n && values.iter().all(|v| *v > 0.0) {
        return (f64::INFINITY, 0.0);
    }
    if infinite > 0 {
        return (f64::INFINITY, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

impl EvalReport {
    pub fn from_rows(rows: Vec<ImageRow>) -> Self {
        let mut keys: Vec<(String, f64)> = Vec::new();
        for r in &rows {
            if !keys.iter().any(|(m, q)| *m == r.method && *q == r.ratio) {
                keys.push((r.method.clone(), r.ratio));
            }
        }
        let aggregates = keys
            .into_iter()
            .map(|(method, ratio)| {
                let sel: Vec<&ImageRow> = rows
                    .iter()
                    .filter(|r| r.method == method && r.ratio == ratio)
                    .collect();
                let p: Vec<f64> = sel.iter().map(|r| r.psnr).collect();
                let s: Vec<f64> = sel.iter().map(|r| r.ssim).collect();
                let (psnr_mean, psnr_std) = mean_std(&p);
                let (ssim_mean, ssim_std) = mean_std(&s);
                AggregateRow {
                    method,
                    ratio,
                    count: sel.len(),
                    psnr_mean,
                    psnr_std,
                    ssim_mean,
                    ssim_std,
                }
            })
            .collect();
        Self { rows, aggregates }
    }

    pub fn aggregate(&self, method: &str, ratio: f64) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && (a.ratio - ratio).abs() < RATIO_TOL)
    }

    /// `method,ratio,image,psnr,ssim`
    pub fn rows_csv(&self) -> String {
        let mut s = String::from("method,ratio,image,psnr,ssim\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6}",
                r.method,
                r.ratio,
                r.image,
                format_db(r.psnr),
                r.ssim
            );
        }
        s
    }

    pub fn aggregates_csv(&self) -> String {
        let mut s = String::from("method,ratio,count,psnr_mean,psnr_std,ssim_mean,ssim_std\n");
        for a in &self.aggregates {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6},{:.6},{:.6}",
                a.method,
                a.ratio,
                a.count,
                format_db(a.psnr_mean),
                a.psnr_std,
                a.ssim_mean,
                a.ssim_std
            );
        }
        s
    }

    /// Methods down, ratios across, `mean±std` cells; one PSNR block and
    /// one SSIM block.
    pub fn render_table(&self) -> String {
        let mut methods: Vec<&str> = Vec::new();
        let mut ratios: Vec<f64> = Vec::new();
        for a in &self.aggregates {
            if !methods.contains(&a.method.as_str()) {
                methods.push(&a.method);
            }
            if !ratios.iter().any(|r| (r - a.ratio).abs() < RATIO_TOL) {
                ratios.push(a.ratio);
            }
        }
        ratios.sort_by(f64::total_cmp);

        let cell = |a: Option<&AggregateRow>, which: &str| -> String {
            match (a, which) {
                (None, _) => "-".into(),
                (Some(a), "PSNR") if a.psnr_mean.is_infinite() => "inf".into(),
                (Some(a), "PSNR") => format!("{:.2}±{:.2}", a.psnr_mean, a.psnr_std),
                (Some(a), _) => format!("{:.4}±{:.4}", a.ssim_mean, a.ssim_std),
            }
        };
        let name_w = methods.iter().map(|m| m.len()).max().unwrap_or(6).max(6);
        let col_w = 15;
        let mut out = String::new();
        let _ = write!(out, "{:<6}  {:<name_w$}", "Index", "Method");
        for r in &ratios {
            let _ = write!(out, "  {:>col_w$}", format!("{:.0}%", r * 100.0));
        }
        out.push('\n');
        for which in ["PSNR", "SSIM"] {
            for m in &methods {
                let _ = write!(out, "{which:<6}  {m:<name_w$}");
                for r in &ratios {
                    let _ = write!(out, "  {:>col_w$}", cell(self.aggregate(m, *r), which));
                }
                out.push('\n');
            }
        }
        out
    }
}

fn reconstruct(method: &Method, model: Option<&DgdnModel>, x: &Tensor, op: &MeasurementOp) -> Result<Tensor> {
    let y = op.apply_forward(x)?;
    match method {
        Method::ZeroFilling => zero_filling(&y, op),
        Method::Ista(cfg) => Ok(ista_reconstruct(&y, op, cfg, None)?.image),
        Method::Dgdn { .. } => model.expect("resolved above").reconstruct(&y, op, None),
    }
}

/// Every (method, ratio, image) triple; images are processed in parallel
/// and rows come back in input order.
pub fn evaluate_dataset(
    methods: &[Method],
    test: &[(String, Tensor)],
    ratios: &[f64],
    masks: MaskSpec,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    let mut rows = Vec::new();
    for method in methods {
        for &ratio in ratios {
            let model = method.model_for(ratio)?;
            let results: Vec<Result<ImageRow>> = test
                .par_iter()
                .map(|(name, x)| {
                    let (_, h, w) = x.chw("evaluate_dataset")?;
                    let op = MeasurementOp::new(generate_mask(h, w, ratio, masks.scheme, masks.seed)?)?;
                    let xhat = reconstruct(method, model, x, &op)?;
                    Ok(ImageRow {
                        method: method.name().to_string(),
                        ratio,
                        image: name.clone(),
                        psnr: psnr(&xhat, x, 1.0)?,
                        ssim: ssim(&xhat, x)?,
                    })
                })
                .collect();
            for r in results {
                rows.push(r?);
            }
        }
    }
    Ok(EvalReport::from_rows(rows))
}
