mod common;

use common::*;
use dgdn::tensor::{conv2d_forward, finite_diff_check, finite_diff_check_many, softplus_value, AdamConfig, AdamState, DEFAULT_FD_STEP};
use dgdn::{Tape, Tensor};
use proptest::prelude::*;

#[test]
fn conv_matches_quadruple_loop() {
    let mut r = rng(1);
    for &(cin, cout, h, w, k) in &[(1, 4, 5, 6, 3), (3, 2, 4, 4, 1), (2, 3, 7, 3, 5), (4, 4, 1, 1, 3)] {
        let x = random_tensor(&[cin, h, w], &mut r);
        let kern = random_tensor(&[cout, cin, k, k], &mut r);
        let b = random_tensor(&[cout], &mut r);
        let got = conv2d_forward(&x, &kern, &b).unwrap();
        assert!(got.max_abs_diff(&naive_conv(&x, &kern, &b)) < 1e-12);
    }
}

#[test]
fn conv_is_linear_without_bias() {
    let mut r = rng(2);
    let (x, y) = (random_tensor(&[3, 6, 5], &mut r), random_tensor(&[3, 6, 5], &mut r));
    let kern = random_tensor(&[2, 3, 3, 3], &mut r);
    let zero = Tensor::zeros(&[2]);
    let (a, b) = (0.7, -1.9);
    let mix = x.zip_map(&y, "mix", |u, v| a * u + b * v).unwrap();
    let lhs = conv2d_forward(&mix, &kern, &zero).unwrap();
    let cx = conv2d_forward(&x, &kern, &zero).unwrap();
    let cy = conv2d_forward(&y, &kern, &zero).unwrap();
    let rhs = cx.zip_map(&cy, "mix", |u, v| a * u + b * v).unwrap();
    assert!(lhs.max_abs_diff(&rhs) < 1e-12);
}

#[test]
fn concat_then_slice_is_bit_exact() {
    let mut r = rng(3);
    let parts = [random_tensor(&[1, 3, 4], &mut r), random_tensor(&[2, 3, 4], &mut r), random_tensor(&[3, 3, 4], &mut r)];
    let tape = Tape::new();
    let vars: Vec<_> = parts.iter().map(|p| tape.constant(p.clone())).collect();
    let joined = tape.concat_channels(&vars).unwrap();
    assert_eq!(joined.shape(), vec![6, 3, 4]);
    let mut start = 0;
    for p in &parts {
        let c = p.shape()[0];
        let back = tape.slice_channels(joined, start, c).unwrap();
        assert_eq!(*back.value(), *p);
        start += c;
    }
}

#[test]
fn chained_network_gradient() {
    // relu(conv(relu(conv(x)))) → weighted sum, gradient w.r.t. every input
    let mut r = rng(4);
    let inputs = vec![
        random_tensor(&[1, 5, 5], &mut r),
        random_tensor(&[3, 1, 3, 3], &mut r),
        random_tensor(&[3], &mut r),
        random_tensor(&[2, 3, 3, 3], &mut r),
        random_tensor(&[2], &mut r),
    ];
    let weights = random_tensor(&[2, 5, 5], &mut r);
    let errs = finite_diff_check_many(
        |tape, v| {
            let a = tape.relu(tape.conv2d(v[0], v[1], v[2])?)?;
            let b = tape.relu(tape.conv2d(a, v[3], v[4])?)?;
            let wv = tape.constant(weights.clone());
            tape.sum(tape.mul(b, wv)?)
        },
        &inputs,
        DEFAULT_FD_STEP,
    )
    .unwrap();
    assert!(errs.iter().all(|&e| e < 1e-5), "{errs:?}");
}

#[test]
fn softplus_gradient_over_wide_range() {
    let x = Tensor::new(vec![7], vec![-30.0, -5.0, -0.1, 0.0, 0.3, 8.0, 40.0]).unwrap();
    let e = finite_diff_check(|tape, v| tape.sum(tape.softplus(v)?), &x, DEFAULT_FD_STEP).unwrap();
    assert!(e < 1e-5, "{e}");
}

#[test]
fn identical_runs_are_bit_identical() {
    let run = || {
        let mut r = rng(5);
        let mut params = vec![random_tensor(&[2, 1, 3, 3], &mut r), random_tensor(&[2], &mut r)];
        let x = random_tensor(&[1, 6, 6], &mut r);
        let target = random_tensor(&[2, 6, 6], &mut r);
        let mut adam = AdamState::new(params.iter(), AdamConfig::default());
        let mut trail = Vec::new();
        for _ in 0..5 {
            let tape = Tape::new();
            let (k, b) = (tape.param(params[0].clone()), tape.param(params[1].clone()));
            let out = tape.conv2d(tape.constant(x.clone()), k, b).unwrap();
            let loss = tape.l1_loss(out, tape.constant(target.clone())).unwrap();
            let g = tape.backward(loss).unwrap();
            let grads = [g.expect(k).unwrap().clone(), g.expect(b).unwrap().clone()];
            let mut refs: Vec<&mut Tensor> = params.iter_mut().collect();
            adam.step(&mut refs, &[&grads[0], &grads[1]]).unwrap();
            trail.push(loss.value().item().to_bits());
        }
        (trail, params)
    };
    assert_eq!(run(), run());
}

#[test]
fn adam_first_step_is_lr_sized() {
    let mut p = Tensor::scalar(0.0);
    let mut adam = AdamState::new([&p], AdamConfig::default());
    adam.step(&mut [&mut p], &[&Tensor::scalar(1.0)]).unwrap();
    assert!((p.item() + 1e-4).abs() < 1e-11, "{}", p.item());
}

proptest! {
    #[test]
    fn softplus_positive_and_increasing(a in -700.0f64..700.0, d in 1e-6f64..10.0) {
        let (lo, hi) = (softplus_value(a), softplus_value(a + d));
        prop_assert!(lo > 0.0);
        prop_assert!(hi > lo);
    }

    #[test]
    fn conv_gradients_random_shapes(cin in 1usize..3, cout in 1usize..3, h in 1usize..5, w in 1usize..5, seed: u64) {
        let mut r = rng(seed);
        let inputs = vec![random_tensor(&[cin, h, w], &mut r), random_tensor(&[cout, cin, 3, 3], &mut r), random_tensor(&[cout], &mut r)];
        let weights = random_tensor(&[cout, h, w], &mut r);
        let errs = finite_diff_check_many(
            |tape, v| tape.sum(tape.mul(tape.conv2d(v[0], v[1], v[2])?, tape.constant(weights.clone()))?),
            &inputs,
            DEFAULT_FD_STEP,
        ).unwrap();
        prop_assert!(errs.iter().all(|&e| e < 1e-5), "{:?}", errs);
    }
}
