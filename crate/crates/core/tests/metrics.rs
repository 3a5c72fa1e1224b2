mod common;

use common::*;
use dgdn::eval::{evaluate_dataset, mean_std, EvalReport, ImageRow, MaskSpec, Method};
use dgdn::imaging::synthetic_set;
use dgdn::metrics::{mse, psnr, ssim};
use dgdn::{MaskScheme, Tensor};
use proptest::prelude::*;
use rand::Rng;

fn pair(h: usize, w: usize, noise: f64, seed: u64) -> (Tensor, Tensor) {
    let mut r = rng(seed);
    let a = Tensor::from_fn(&[1, h, w], |_| r.gen_range(0.0..1.0));
    let jitter = Tensor::from_fn(&[1, h, w], |_| noise * r.gen_range(-1.0..1.0));
    let b = a.zip_map(&jitter, "pair", |x, d| x + d).unwrap();
    (a, b)
}

#[test]
fn uniform_deviation_gives_twenty_db() {
    let x = Tensor::from_fn(&[1, 8, 8], |i| 0.3 + 0.005 * i as f64);
    let up = x.map(|v| v + 0.1);
    assert!((psnr(&up, &x, 1.0).unwrap() - 20.0).abs() < 1e-9);
    assert!((mse(&up, &x).unwrap() - 0.01).abs() < 1e-15);
}

#[test]
fn metrics_match_literal_implementations() {
    for (i, &(h, w)) in [(11, 11), (16, 24), (31, 13)].iter().enumerate() {
        let (a, b) = pair(h, w, 0.15, i as u64);
        assert!((psnr(&b, &a, 1.0).unwrap() - literal_psnr(&b, &a)).abs() < 1e-9);
        assert!((ssim(&b, &a).unwrap() - literal_ssim(&b, &a)).abs() < 1e-9);
    }
}

#[test]
fn structured_distortions_lower_ssim() {
    let x = synthetic_set(1, 32, 32, 3).remove(0);
    let blurred = {
        let k = Tensor::filled(&[1, 1, 3, 3], 1.0 / 9.0);
        dgdn::tensor::conv2d_forward(&x, &k, &Tensor::zeros(&[1])).unwrap()
    };
    let s = ssim(&blurred, &x).unwrap();
    assert!(s < 1.0 && s > 0.0, "{s}");
    assert!((s - literal_ssim(&blurred, &x)).abs() < 1e-9);
}

#[test]
fn aggregates_equal_direct_recomputation() {
    let test: Vec<(String, Tensor)> = synthetic_set(5, 16, 16, 9)
        .into_iter()
        .enumerate()
        .map(|(i, t)| (format!("img{i}"), t))
        .collect();
    let spec = MaskSpec {
        scheme: MaskScheme::PseudoRadial,
        seed: 2,
    };
    let rep = evaluate_dataset(&[Method::ZeroFilling], &test, &[0.1, 0.3, 0.5], spec).unwrap();
    assert_eq!(rep.rows.len(), 15);
    for agg in &rep.aggregates {
        let rows: Vec<&ImageRow> = rep.rows.iter().filter(|r| r.ratio == agg.ratio).collect();
        let (pm, ps) = sample_mean_std(&rows.iter().map(|r| r.psnr).collect::<Vec<_>>());
        let (sm, ss) = sample_mean_std(&rows.iter().map(|r| r.ssim).collect::<Vec<_>>());
        assert!((pm - agg.psnr_mean).abs() < 1e-9 && (ps - agg.psnr_std).abs() < 1e-9);
        assert!((sm - agg.ssim_mean).abs() < 1e-9 && (ss - agg.ssim_std).abs() < 1e-9);
    }
    // more samples of k-space can only help zero-filling here
    let means: Vec<f64> = rep.aggregates.iter().map(|a| a.psnr_mean).collect();
    assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
}

#[test]
fn report_csv_layout() {
    let rep = EvalReport::from_rows(vec![ImageRow {
        method: "zero-filling".into(),
        ratio: 1.0,
        image: "a".into(),
        psnr: f64::INFINITY,
        ssim: 1.0,
    }]);
    assert_eq!(rep.rows_csv(), "method,ratio,image,psnr,ssim\nzero-filling,1,a,inf,1.000000\n");
    assert_eq!(mean_std(&[f64::INFINITY]), (f64::INFINITY, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn psnr_symmetric(seed: u64, noise in 0.001f64..0.5) {
        let (a, b) = pair(6, 5, noise, seed);
        prop_assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
    }

    #[test]
    fn psnr_strictly_decreasing_in_mse(seed: u64, d1 in 0.001f64..0.5, extra in 0.001f64..0.5) {
        let x = Tensor::from_fn(&[1, 4, 4], |i| (i as f64 * 0.1 + seed as f64 % 1.0).fract());
        let near = x.map(|v| v + d1);
        let far = x.map(|v| v + d1 + extra);
        prop_assert!(psnr(&far, &x, 1.0).unwrap() < psnr(&near, &x, 1.0).unwrap());
    }

    #[test]
    fn ssim_identity_and_symmetry(seed: u64, noise in 0.0f64..0.4, h in 11usize..20, w in 11usize..20) {
        let (a, b) = pair(h, w, noise, seed);
        prop_assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
    }
}
