//! Central finite differences and the per-layer gradient check suite used by
//! both the test suite and the `gradcheck` CLI command.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::layers::{Conv2d, Dense, Layer};
use super::loss::softmax_cross_entropy;
use super::tensor::{Scalar, Tensor};
use crate::error::{usage, Error, Result};
use crate::rng::rng_from;

/// `(f(p + eps e_i) - f(p - eps e_i)) / (2 eps)` for every coordinate `i`.
///
/// The denominator uses the perturbation actually representable in `T`, which
/// matters for `f32` parameters.
pub fn finite_difference_gradient<T: Scalar>(
    mut loss_fn: impl FnMut(&[T]) -> f64,
    params: &[T],
    epsilon: f64,
) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(usage!("finite difference epsilon must be > 0, got {epsilon}"));
    }
    let mut work = params.to_vec();
    let mut grads = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = params[i].to_f64_lossy();
        let plus = T::from_f64_lossy(orig + epsilon);
        let minus = T::from_f64_lossy(orig - epsilon);
        work[i] = plus;
        let f_plus = loss_fn(&work);
        work[i] = minus;
        let f_minus = loss_fn(&work);
        work[i] = params[i];
        if !f_plus.is_finite() || !f_minus.is_finite() {
            return Err(Error::Numeric(format!(
                "loss is not finite around coordinate {i}"
            )));
        }
        let h = plus.to_f64_lossy() - minus.to_f64_lossy();
        grads.push((f_plus - f_minus) / h);
    }
    Ok(grads)
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, b)| a - b));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
    if scale < 1e-300 {
        diff
    } else {
        diff / scale
    }
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

fn projected(y: &Tensor<impl Scalar>, weights: &[f64]) -> f64 {
    y.data()
        .iter()
        .zip(weights)
        .map(|(a, w)| a.to_f64_lossy() * w)
        .sum()
}

/// Checks a layer's input and parameter gradients against finite differences
/// of the scalar `sum(weights * layer(input))`. Returns the worst relative
/// error over the input and every parameter tensor.
pub fn check_layer<T: Scalar>(layer: &Layer<T>, input: &Tensor<T>, weights: &[f64], epsilon: f64) -> Result<f64> {
    let mut analytic = layer.clone();
    for p in analytic.params_mut() {
        p.clear_grad();
    }
    let y = analytic.forward(input)?;
    if weights.len() != y.len() {
        return Err(usage!("projection has {} weights for {} outputs", weights.len(), y.len()));
    }
    let upstream = Tensor::new(
        y.shape().to_vec(),
        weights.iter().map(|&w| T::from_f64_lossy(w)).collect(),
    )?;
    let grad_input = analytic.backward(&upstream)?;

    let eval = |l: &Layer<T>, x: &Tensor<T>| -> f64 {
        let mut l = l.clone();
        match l.forward(x) {
            Ok(out) => projected(&out, weights),
            Err(_) => f64::NAN,
        }
    };

    let numeric_input = finite_difference_gradient(
        |p| {
            let x = Tensor::new(input.shape().to_vec(), p.to_vec()).expect("same shape");
            eval(layer, &x)
        },
        input.data(),
        epsilon,
    )?;
    let mut worst = relative_error(&to_f64(grad_input.data()), &numeric_input);

    let n_params = layer.params().len();
    for j in 0..n_params {
        let base = layer.params()[j].clone();
        let numeric = finite_difference_gradient(
            |p| {
                let mut l = layer.clone();
                l.params_mut()[j].data_mut().copy_from_slice(p);
                eval(&l, input)
            },
            base.data(),
            epsilon,
        )?;
        let analytic_grad = analytic.params()[j]
            .grad()
            .map(to_f64)
            .unwrap_or_else(|| vec![0.0; base.len()]);
        worst = worst.max(relative_error(&analytic_grad, &numeric));
    }
    Ok(worst)
}

/// Checks the cross-entropy gradient with respect to the logits.
pub fn check_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize], epsilon: f64) -> Result<f64> {
    let (_, grad) = softmax_cross_entropy(logits, labels)?;
    let numeric = finite_difference_gradient(
        |p| {
            let x = Tensor::new(logits.shape().to_vec(), p.to_vec()).expect("same shape");
            softmax_cross_entropy(&x, labels)
                .map(|(l, _)| l.to_f64_lossy())
                .unwrap_or(f64::NAN)
        },
        logits.data(),
        epsilon,
    )?;
    Ok(relative_error(&to_f64(grad.data()), &numeric))
}

/// Precision-dependent settings for one run of the suite.
#[derive(Clone, Copy, Debug)]
pub struct Precision {
    pub name: &'static str,
    pub epsilon: f64,
    pub tolerance: f64,
}

pub const F32_CHECK: Precision = Precision {
    name: "f32",
    epsilon: 1e-2,
    tolerance: 1e-3,
};

pub const F64_CHECK: Precision = Precision {
    name: "f64",
    epsilon: 1e-6,
    tolerance: 1e-6,
};

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckRow {
    pub layer: &'static str,
    pub precision: &'static str,
    pub cases: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn uniform<R: Rng>(rng: &mut R, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Values bounded away from zero so the ReLU kink is never straddled.
fn away_from_zero<R: Rng>(rng: &mut R, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let mag = rng.random_range(0.1..1.0);
        if rng.random_bool(0.5) {
            mag
        } else {
            -mag
        }
    })
}

/// Distinct values spaced 0.1 apart in random order, so every pooling window
/// has a unique maximum separated from the runner-up by more than epsilon.
fn spaced_distinct<R: Rng>(rng: &mut R, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut vals: Vec<f64> = (0..n).map(|i| i as f64 * 0.1 - n as f64 * 0.05).collect();
    vals.shuffle(rng);
    Tensor::new(shape.to_vec(), vals).expect("sized")
}

type CaseFn = fn(&mut crate::rng::Rng) -> (Layer<f64>, Tensor<f64>);

fn conv_case(rng: &mut crate::rng::Rng) -> (Layer<f64>, Tensor<f64>) {
    let n = rng.random_range(1..=2);
    let c = rng.random_range(1..=3);
    let h = rng.random_range(4..=8);
    let w = rng.random_range(4..=8);
    let k = rng.random_range(1..=4);
    let kernel = rng.random_range(1..=3);
    let stride = rng.random_range(1..=2);
    let pad = rng.random_range(0..=1);
    let mut layer = Conv2d::<f64>::new(c, k, kernel, stride, pad, rng);
    layer.bias = uniform(rng, &[k], -0.5, 0.5);
    (Layer::Conv2d(layer), uniform(rng, &[n, c, h, w], -1.0, 1.0))
}

fn fc_case(rng: &mut crate::rng::Rng) -> (Layer<f64>, Tensor<f64>) {
    let n = rng.random_range(1..=4);
    let d = rng.random_range(1..=8);
    let m = rng.random_range(1..=6);
    let mut layer = Dense::<f64>::new(d, m, rng);
    layer.bias = uniform(rng, &[m], -0.5, 0.5);
    (Layer::FullyConnected(layer), uniform(rng, &[n, d], -1.0, 1.0))
}

fn relu_case(rng: &mut crate::rng::Rng) -> (Layer<f64>, Tensor<f64>) {
    let shape = [rng.random_range(1..=3), rng.random_range(1..=12)];
    (Layer::relu(), away_from_zero(rng, &shape))
}

fn maxpool_case(rng: &mut crate::rng::Rng) -> (Layer<f64>, Tensor<f64>) {
    let size = rng.random_range(1..=3);
    let shape = [
        rng.random_range(1..=2),
        rng.random_range(1..=2),
        rng.random_range(size..=7),
        rng.random_range(size..=7),
    ];
    (Layer::maxpool(size), spaced_distinct(rng, &shape))
}

fn flatten_case(rng: &mut crate::rng::Rng) -> (Layer<f64>, Tensor<f64>) {
    let shape = [
        rng.random_range(1..=3),
        rng.random_range(1..=3),
        rng.random_range(1..=4),
        rng.random_range(1..=4),
    ];
    (Layer::flatten(), uniform(rng, &shape, -1.0, 1.0))
}

fn softmax_case(rng: &mut crate::rng::Rng) -> (Layer<f64>, Tensor<f64>) {
    let shape = [rng.random_range(1..=4), rng.random_range(2..=6)];
    (Layer::softmax(), uniform(rng, &shape, -2.0, 2.0))
}

fn cast_layer(layer: &Layer<f64>) -> Layer<f32> {
    match layer {
        Layer::Conv2d(l) => Layer::Conv2d(
            Conv2d::from_params(l.weight.cast(), l.bias.cast(), l.stride, l.padding).expect("valid"),
        ),
        Layer::FullyConnected(l) => {
            Layer::FullyConnected(Dense::from_params(l.weight.cast(), l.bias.cast()).expect("valid"))
        }
        Layer::Relu(_) => Layer::relu(),
        Layer::MaxPool2d(p) => Layer::maxpool(p.size),
        Layer::Flatten(_) => Layer::flatten(),
        Layer::GradientReversal(g) => Layer::grl(g.lambda),
        Layer::Softmax(_) => Layer::softmax(),
    }
}

/// Runs every differentiable layer type plus softmax cross-entropy on
/// `cases` random shapes in both precisions.
pub fn run_gradient_suite(seed: u64, cases: usize) -> Result<Vec<GradCheckRow>> {
    let layer_cases: [(&'static str, CaseFn); 6] = [
        ("conv2d", conv_case),
        ("fully_connected", fc_case),
        ("relu", relu_case),
        ("maxpool2d", maxpool_case),
        ("flatten", flatten_case),
        ("softmax", softmax_case),
    ];
    let mut rows = Vec::new();
    for (idx, (name, make)) in layer_cases.iter().enumerate() {
        let mut worst = [0.0f64; 2];
        for case in 0..cases {
            let mut rng = rng_from(seed, &[idx as u64, case as u64]);
            let (layer, input) = make(&mut rng);
            let mut probe = layer.clone();
            let out_len = probe.forward(&input)?.len();
            let weights: Vec<f64> = (0..out_len).map(|_| rng.random_range(-1.0..1.0)).collect();
            worst[0] = worst[0].max(check_layer(
                &cast_layer(&layer),
                &input.cast::<f32>(),
                &weights,
                F32_CHECK.epsilon,
            )?);
            worst[1] = worst[1].max(check_layer(&layer, &input, &weights, F64_CHECK.epsilon)?);
        }
        push_rows(&mut rows, name, cases, worst);
    }

    let mut worst = [0.0f64; 2];
    for case in 0..cases {
        let mut rng = rng_from(seed, &[layer_cases.len() as u64, case as u64]);
        let n = rng.random_range(1..=5);
        let k = rng.random_range(2..=5);
        let logits = uniform(&mut rng, &[n, k], -3.0, 3.0);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        worst[0] = worst[0].max(check_cross_entropy(&logits.cast::<f32>(), &labels, F32_CHECK.epsilon)?);
        worst[1] = worst[1].max(check_cross_entropy(&logits, &labels, F64_CHECK.epsilon)?);
    }
    push_rows(&mut rows, "softmax_cross_entropy", cases, worst);
    Ok(rows)
}

fn push_rows(rows: &mut Vec<GradCheckRow>, layer: &'static str, cases: usize, worst: [f64; 2]) {
    for (prec, err) in [F32_CHECK, F64_CHECK].iter().zip(worst) {
        rows.push(GradCheckRow {
            layer,
            precision: prec.name,
            cases,
            max_rel_error: err,
            tolerance: prec.tolerance,
            passed: err <= prec.tolerance,
        });
    }
}
