use forgeda_core::tensor_nn::*;
use proptest::prelude::*;

fn naive_conv(x: &[f64], (n, c, h, w): (usize, usize, usize, usize), wt: &[f64], (k, kh, kw): (usize, usize, usize), b: &[f64], s: usize, p: usize) -> (Vec<f64>, usize, usize) {
    let oh = (h + 2 * p - kh) / s + 1;
    let ow = (w + 2 * p - kw) / s + 1;
    let mut out = vec![0.0; n * k * oh * ow];
    for ni in 0..n {
        for ki in 0..k {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b[ki];
                    for ci in 0..c {
                        for dy in 0..kh {
                            for dx in 0..kw {
                                let iy = (oy * s + dy) as isize - p as isize;
                                let ix = (ox * s + dx) as isize - p as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += x[((ni * c + ci) * h + iy as usize) * w + ix as usize]
                                    * wt[((ki * c + ci) * kh + dy) * kw + dx];
                            }
                        }
                    }
                    out[((ni * k + ki) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    (out, oh, ow)
}

fn vals(n: usize, seed: u64) -> Vec<f64> {
    (0..n).map(|i| (((i as u64 + 1) * (seed * 2 + 7919)) % 97) as f64 / 48.0 - 1.0).collect()
}

#[test]
fn gradient_suite_passes() {
    let rows = run_gradient_suite(11, 5).unwrap();
    assert!(!rows.is_empty());
    for r in &rows {
        assert!(r.passed, "{} {}: {} > {}", r.layer, r.precision, r.max_rel_error, r.tolerance);
    }
}

#[test]
fn zero_logits_cross_entropy_is_ln_classes() {
    let logits = Tensor::<f64>::zeros(&[4, 2]);
    let (loss, grad) = softmax_cross_entropy(&logits, &[0, 1, 1, 0]).unwrap();
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    assert!((grad.data()[0] - (0.5 - 1.0) / 4.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conv_matches_direct_loop(n in 1usize..3, c in 1usize..3, h in 3usize..8, w in 3usize..8,
                                k in 1usize..4, ks in 1usize..4, s in 1usize..3, p in 0usize..2, seed in 0u64..50) {
        prop_assume!(ks <= h + 2 * p && ks <= w + 2 * p);
        let x = vals(n * c * h * w, seed);
        let wt = vals(k * c * ks * ks, seed + 1);
        let b = vals(k, seed + 2);
        let (want, oh, ow) = naive_conv(&x, (n, c, h, w), &wt, (k, ks, ks), &b, s, p);
        let got = conv2d_forward(
            &Tensor::new(vec![n, c, h, w], x).unwrap(),
            &Tensor::new(vec![k, c, ks, ks], wt).unwrap(),
            &Tensor::new(vec![k], b).unwrap(),
            s,
            p,
        ).unwrap();
        prop_assert_eq!(got.shape(), &[n, k, oh, ow][..]);
        prop_assert_eq!(oh, (h + 2 * p - ks) / s + 1);
        for (a, e) in got.data().iter().zip(&want) {
            prop_assert!((a - e).abs() < 1e-9);
        }
    }

    #[test]
    fn fc_matches_direct_loop(n in 1usize..5, i in 1usize..6, o in 1usize..6, seed in 0u64..50) {
        let x = vals(n * i, seed);
        let wt = vals(o * i, seed + 3);
        let b = vals(o, seed + 4);
        let got = fc_forward(
            &Tensor::new(vec![n, i], x.clone()).unwrap(),
            &Tensor::new(vec![i, o], wt.clone()).unwrap(),
            &Tensor::new(vec![o], b.clone()).unwrap(),
        ).unwrap();
        for r in 0..n {
            for j in 0..o {
                let e: f64 = b[j] + (0..i).map(|q| x[r * i + q] * wt[q * o + j]).sum::<f64>();
                prop_assert!((got.data()[r * o + j] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grl_forward_is_identity_and_backward_scales(v in proptest::collection::vec(-1e3f64..1e3, 1..40), lambda in 0.0f64..2.0) {
        let t = Tensor::new(vec![v.len()], v.clone()).unwrap();
        let fwd = grl_forward(&t);
        prop_assert_eq!(fwd.data(), &v[..]);
        let g = grl_backward(&t, lambda);
        for (a, b) in g.data().iter().zip(&v) {
            prop_assert_eq!(*a, -lambda * b);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(rows in 1usize..6, cols in 1usize..6, v in proptest::collection::vec(-50.0f64..50.0, 36)) {
        let t = Tensor::new(vec![rows, cols], v[..rows * cols].to_vec()).unwrap();
        let s = softmax_rows(&t).unwrap();
        for r in 0..rows {
            let row = &s.data()[r * cols..(r + 1) * cols];
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn relu_backward_masks_negative_inputs(v in proptest::collection::vec(-5.0f64..5.0, 1..30)) {
        let x = Tensor::new(vec![v.len()], v.clone()).unwrap();
        let y = relu_forward(&x);
        let g = relu_backward(&x, &Tensor::new(vec![v.len()], vec![1.0; v.len()]).unwrap()).unwrap();
        for i in 0..v.len() {
            prop_assert_eq!(y.data()[i], v[i].max(0.0));
            prop_assert_eq!(g.data()[i], if v[i] > 0.0 { 1.0 } else { 0.0 });
        }
    }
}
