//! Layers with hand-written forward/backward passes.
//!
//! Every layer keeps what its backward pass needs from the most recent
//! forward call. Calling `backward` without a preceding `forward` is a usage
//! error, and the cache is dropped once consumed. Parameter gradients are
//! *accumulated* into each parameter's grad buffer so several losses can
//! contribute before an optimizer step; call `zero_grad` between steps.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernels::{axpy, col2im, dot, im2col, ConvGeom};
use super::tensor::{Scalar, Tensor};
use crate::error::{usage, Result};

/// Discriminant of a [`Layer`], used for reporting and checkpoint layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv2d,
    FullyConnected,
    Relu,
    MaxPool2d,
    Flatten,
    GradientReversal,
    Softmax,
}

fn kaiming_uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| T::from_f64_lossy(rng.random_range(-bound..bound)))
}

fn conv_geom(input: &[usize], weights: &[usize], stride: usize, padding: usize) -> Result<ConvGeom> {
    if input.len() != 4 || weights.len() != 4 {
        return Err(usage!(
            "conv2d expects input [N,C,H,W] and weights [K,C,kh,kw], got {input:?} and {weights:?}"
        ));
    }
    if stride == 0 {
        return Err(usage!("conv2d stride must be >= 1"));
    }
    let (c, h, w) = (input[1], input[2], input[3]);
    let (wc, kh, kw) = (weights[1], weights[2], weights[3]);
    if c != wc {
        return Err(usage!("conv2d input has {c} channels, weights expect {wc}"));
    }
    if kh > h + 2 * padding || kw > w + 2 * padding {
        return Err(usage!(
            "conv2d kernel {kh}x{kw} larger than padded input {}x{}",
            h + 2 * padding,
            w + 2 * padding
        ));
    }
    Ok(ConvGeom {
        channels: c,
        height: h,
        width: w,
        kh,
        kw,
        stride,
        padding,
        out_h: (h + 2 * padding - kh) / stride + 1,
        out_w: (w + 2 * padding - kw) / stride + 1,
    })
}

/// Cross-correlation of `[N,C,H,W]` input with `[K,C,kh,kw]` weights.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let g = conv_geom(input.shape(), weights.shape(), stride, padding)?;
    let n = input.dim(0);
    let k = weights.dim(0);
    if bias.shape() != [k] {
        return Err(usage!("conv2d bias must be [{k}], got {:?}", bias.shape()));
    }
    let (patch, p) = (g.patch_len(), g.out_len());
    let sample_len = g.channels * g.height * g.width;
    let mut out = vec![T::zero(); n * k * p];
    let mut cols = vec![T::zero(); patch * p];
    let w = weights.data();
    for s in 0..n {
        im2col(&input.data()[s * sample_len..(s + 1) * sample_len], &g, &mut cols);
        let dst = &mut out[s * k * p..(s + 1) * k * p];
        for kk in 0..k {
            let row = &mut dst[kk * p..(kk + 1) * p];
            row.iter_mut().for_each(|v| *v = bias.data()[kk]);
            for r in 0..patch {
                axpy(w[kk * patch + r], &cols[r * p..(r + 1) * p], row);
            }
        }
    }
    Tensor::new(vec![n, k, g.out_h, g.out_w], out)
}

/// Analytic gradients of [`conv2d_forward`] given the upstream gradient.
/// Returns `(grad_input, grad_weights, grad_bias)`.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    stride: usize,
    padding: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let g = conv_geom(input.shape(), weights.shape(), stride, padding)?;
    let n = input.dim(0);
    let k = weights.dim(0);
    if grad_out.shape() != [n, k, g.out_h, g.out_w] {
        return Err(usage!(
            "conv2d grad_out shape {:?} does not match forward output {:?}",
            grad_out.shape(),
            [n, k, g.out_h, g.out_w]
        ));
    }
    let (patch, p) = (g.patch_len(), g.out_len());
    let sample_len = g.channels * g.height * g.width;
    let w = weights.data();
    let mut gi = vec![T::zero(); input.len()];
    let mut gw = vec![T::zero(); weights.len()];
    let mut gb = vec![T::zero(); k];
    let mut cols = vec![T::zero(); patch * p];
    let mut gcols = vec![T::zero(); patch * p];
    for s in 0..n {
        im2col(&input.data()[s * sample_len..(s + 1) * sample_len], &g, &mut cols);
        gcols.iter_mut().for_each(|v| *v = T::zero());
        let go = &grad_out.data()[s * k * p..(s + 1) * k * p];
        for kk in 0..k {
            let grow = &go[kk * p..(kk + 1) * p];
            gb[kk] = gb[kk] + grow.iter().copied().sum::<T>();
            for r in 0..patch {
                let idx = kk * patch + r;
                gw[idx] = gw[idx] + dot(grow, &cols[r * p..(r + 1) * p]);
                axpy(w[idx], grow, &mut gcols[r * p..(r + 1) * p]);
            }
        }
        col2im(&gcols, &g, &mut gi[s * sample_len..(s + 1) * sample_len]);
    }
    Ok((
        Tensor::new(input.shape().to_vec(), gi)?,
        Tensor::new(weights.shape().to_vec(), gw)?,
        Tensor::new(vec![k], gb)?,
    ))
}

/// `input · weights + bias` for `[N,D]` input and `[D,M]` weights.
pub fn fc_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    if input.ndim() != 2 || weights.ndim() != 2 || input.dim(1) != weights.dim(0) {
        return Err(usage!(
            "fc expects input [N,D] and weights [D,M], got {:?} and {:?}",
            input.shape(),
            weights.shape()
        ));
    }
    let (n, d, m) = (input.dim(0), weights.dim(0), weights.dim(1));
    if bias.shape() != [m] {
        return Err(usage!("fc bias must be [{m}], got {:?}", bias.shape()));
    }
    let mut out = vec![T::zero(); n * m];
    let (x, w) = (input.data(), weights.data());
    for s in 0..n {
        let row = &mut out[s * m..(s + 1) * m];
        row.copy_from_slice(bias.data());
        for j in 0..d {
            axpy(x[s * d + j], &w[j * m..(j + 1) * m], row);
        }
    }
    Tensor::new(vec![n, m], out)
}

/// Returns `(grad_input, grad_weights, grad_bias)` for [`fc_forward`].
pub fn fc_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (n, d, m) = (input.dim(0), weights.dim(0), weights.dim(1));
    if grad_out.shape() != [n, m] {
        return Err(usage!(
            "fc grad_out shape {:?} does not match forward output [{n}, {m}]",
            grad_out.shape()
        ));
    }
    let (x, w, go) = (input.data(), weights.data(), grad_out.data());
    let mut gi = vec![T::zero(); n * d];
    let mut gw = vec![T::zero(); d * m];
    let mut gb = vec![T::zero(); m];
    for s in 0..n {
        let grow = &go[s * m..(s + 1) * m];
        for (b, &g) in gb.iter_mut().zip(grow) {
            *b = *b + g;
        }
        for j in 0..d {
            axpy(x[s * d + j], grow, &mut gw[j * m..(j + 1) * m]);
            gi[s * d + j] = dot(grow, &w[j * m..(j + 1) * m]);
        }
    }
    Ok((
        Tensor::new(vec![n, d], gi)?,
        Tensor::new(vec![d, m], gw)?,
        Tensor::new(vec![m], gb)?,
    ))
}

pub fn relu_forward<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn relu_backward<T: Scalar>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != grad_out.shape() {
        return Err(usage!("relu grad shape mismatch"));
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.shape().to_vec(), data)
}

/// Max pooling over `[N,C,H,W]`. Returns the output and, per output cell,
/// the flat input index of the selected (first row-major) maximum.
pub fn maxpool2d_forward<T: Scalar>(input: &Tensor<T>, size: usize, stride: usize) -> Result<(Tensor<T>, Vec<usize>)> {
    if input.ndim() != 4 {
        return Err(usage!("maxpool2d expects [N,C,H,W], got {:?}", input.shape()));
    }
    if size == 0 || stride == 0 {
        return Err(usage!("maxpool2d size and stride must be >= 1"));
    }
    let (n, c, h, w) = (input.dim(0), input.dim(1), input.dim(2), input.dim(3));
    if size > h || size > w {
        return Err(usage!("maxpool2d window {size} larger than input {h}x{w}"));
    }
    let (oh, ow) = ((h - size) / stride + 1, (w - size) / stride + 1);
    let x = input.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * stride * w + ox * stride;
                for ky in 0..size {
                    for kx in 0..size {
                        let idx = base + (oy * stride + ky) * w + ox * stride + kx;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![n, c, oh, ow], out)?, argmax))
}

pub fn maxpool2d_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    if grad_out.len() != argmax.len() {
        return Err(usage!("maxpool2d grad_out does not match cached forward"));
    }
    let mut gi = Tensor::zeros(input_shape);
    let d = gi.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        d[idx] = d[idx] + g;
    }
    Ok(gi)
}

/// Gradient reversal, forward direction: the identity.
pub fn grl_forward<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let mut out = input.clone();
    out.clear_grad();
    out
}

/// Gradient reversal, backward direction: `-lambda * grad_out`.
pub fn grl_backward<T: Scalar>(grad_out: &Tensor<T>, lambda: f64) -> Tensor<T> {
    let l = T::from_f64_lossy(lambda);
    grad_out.map(|g| -(l * g))
}

/// Row-wise softmax of a `[N,K]` tensor, stabilized by max subtraction.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if logits.ndim() != 2 {
        return Err(usage!("softmax expects [N,K], got {:?}", logits.shape()));
    }
    let k = logits.dim(1);
    let mut out = logits.data().to_vec();
    if k > 0 {
        for row in out.chunks_mut(k) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut sum = T::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum = sum + *v;
            }
            row.iter_mut().for_each(|v| *v = *v / sum);
        }
    }
    Tensor::new(logits.shape().to_vec(), out)
}

#[derive(Clone, Debug)]
pub struct Conv2d<T: Scalar = f32> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        Self {
            weight: kaiming_uniform(rng, &[out_channels, in_channels, kernel, kernel], fan_in),
            bias: Tensor::zeros(&[out_channels]),
            stride,
            padding,
            cache: None,
        }
    }

    pub fn from_params(weight: Tensor<T>, bias: Tensor<T>, stride: usize, padding: usize) -> Result<Self> {
        if weight.ndim() != 4 || bias.shape() != [weight.dim(0)] {
            return Err(usage!(
                "conv2d params must be [K,C,kh,kw] and [K], got {:?} and {:?}",
                weight.shape(),
                bias.shape()
            ));
        }
        Ok(Self {
            weight,
            bias,
            stride,
            padding,
            cache: None,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn kernel(&self) -> usize {
        self.weight.dim(2)
    }
}

#[derive(Clone, Debug)]
pub struct Dense<T: Scalar = f32> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self {
            weight: kaiming_uniform(rng, &[inputs, outputs], inputs),
            bias: Tensor::zeros(&[outputs]),
            cache: None,
        }
    }

    pub fn from_params(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weight.ndim() != 2 || bias.shape() != [weight.dim(1)] {
            return Err(usage!(
                "fc params must be [D,M] and [M], got {:?} and {:?}",
                weight.shape(),
                bias.shape()
            ));
        }
        Ok(Self {
            weight,
            bias,
            cache: None,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn outputs(&self) -> usize {
        self.weight.dim(1)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Relu<T: Scalar = f32> {
    cache: Option<Tensor<T>>,
}

#[derive(Clone, Debug)]
pub struct MaxPool2d {
    pub size: usize,
    pub stride: usize,
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool2d {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            stride: size,
            cache: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Flatten {
    cache: Option<Vec<usize>>,
}

/// Identity on the way forward; scales gradients by `-lambda` on the way back.
#[derive(Clone, Debug, Default)]
pub struct GradientReversal {
    pub lambda: f64,
    primed: bool,
}

impl GradientReversal {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            primed: false,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Softmax<T: Scalar = f32> {
    cache: Option<Tensor<T>>,
}

#[derive(Clone, Debug)]
pub enum Layer<T: Scalar = f32> {
    Conv2d(Conv2d<T>),
    FullyConnected(Dense<T>),
    Relu(Relu<T>),
    MaxPool2d(MaxPool2d),
    Flatten(Flatten),
    GradientReversal(GradientReversal),
    Softmax(Softmax<T>),
}

fn missing_cache(kind: LayerKind) -> crate::error::Error {
    usage!("{kind:?} backward called without a matching forward")
}

impl<T: Scalar> Layer<T> {
    pub fn relu() -> Self {
        Layer::Relu(Relu { cache: None })
    }

    pub fn maxpool(size: usize) -> Self {
        Layer::MaxPool2d(MaxPool2d::new(size))
    }

    pub fn flatten() -> Self {
        Layer::Flatten(Flatten::default())
    }

    pub fn grl(lambda: f64) -> Self {
        Layer::GradientReversal(GradientReversal::new(lambda))
    }

    pub fn softmax() -> Self {
        Layer::Softmax(Softmax { cache: None })
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv2d(_) => LayerKind::Conv2d,
            Layer::FullyConnected(_) => LayerKind::FullyConnected,
            Layer::Relu(_) => LayerKind::Relu,
            Layer::MaxPool2d(_) => LayerKind::MaxPool2d,
            Layer::Flatten(_) => LayerKind::Flatten,
            Layer::GradientReversal(_) => LayerKind::GradientReversal,
            Layer::Softmax(_) => LayerKind::Softmax,
        }
    }

    pub fn forward(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv2d(l) => {
                let out = conv2d_forward(input, &l.weight, &l.bias, l.stride, l.padding)?;
                l.cache = Some(input.clone());
                Ok(out)
            }
            Layer::FullyConnected(l) => {
                let out = fc_forward(input, &l.weight, &l.bias)?;
                l.cache = Some(input.clone());
                Ok(out)
            }
            Layer::Relu(l) => {
                let out = relu_forward(input);
                l.cache = Some(input.clone());
                Ok(out)
            }
            Layer::MaxPool2d(l) => {
                let (out, argmax) = maxpool2d_forward(input, l.size, l.stride)?;
                l.cache = Some((input.shape().to_vec(), argmax));
                Ok(out)
            }
            Layer::Flatten(l) => {
                if input.ndim() < 2 {
                    return Err(usage!("flatten expects at least 2 dims, got {:?}", input.shape()));
                }
                let n = input.dim(0);
                let rest = input.shape()[1..].iter().product();
                l.cache = Some(input.shape().to_vec());
                input.clone().reshape(&[n, rest])
            }
            Layer::GradientReversal(l) => {
                l.primed = true;
                Ok(grl_forward(input))
            }
            Layer::Softmax(l) => {
                let out = softmax_rows(input)?;
                l.cache = Some(out.clone());
                Ok(out)
            }
        }
    }

    /// Propagates `grad_out` to the layer input and accumulates parameter
    /// gradients. Consumes the forward cache.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let kind = self.kind();
        match self {
            Layer::Conv2d(l) => {
                let input = l.cache.take().ok_or_else(|| missing_cache(kind))?;
                let (gi, gw, gb) = conv2d_backward(&input, &l.weight, l.stride, l.padding, grad_out)?;
                accumulate(&mut l.weight, &gw);
                accumulate(&mut l.bias, &gb);
                Ok(gi)
            }
            Layer::FullyConnected(l) => {
                let input = l.cache.take().ok_or_else(|| missing_cache(kind))?;
                let (gi, gw, gb) = fc_backward(&input, &l.weight, grad_out)?;
                accumulate(&mut l.weight, &gw);
                accumulate(&mut l.bias, &gb);
                Ok(gi)
            }
            Layer::Relu(l) => {
                let input = l.cache.take().ok_or_else(|| missing_cache(kind))?;
                relu_backward(&input, grad_out)
            }
            Layer::MaxPool2d(l) => {
                let (shape, argmax) = l.cache.take().ok_or_else(|| missing_cache(kind))?;
                maxpool2d_backward(&shape, &argmax, grad_out)
            }
            Layer::Flatten(l) => {
                let shape = l.cache.take().ok_or_else(|| missing_cache(kind))?;
                grad_out.clone().reshape(&shape)
            }
            Layer::GradientReversal(l) => {
                if !std::mem::take(&mut l.primed) {
                    return Err(missing_cache(kind));
                }
                Ok(grl_backward(grad_out, l.lambda))
            }
            Layer::Softmax(l) => {
                let y = l.cache.take().ok_or_else(|| missing_cache(kind))?;
                if y.shape() != grad_out.shape() {
                    return Err(usage!("softmax grad shape mismatch"));
                }
                let k = y.dim(1).max(1);
                let mut gi = Vec::with_capacity(y.len());
                for (yr, gr) in y.data().chunks(k).zip(grad_out.data().chunks(k)) {
                    let inner: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    gi.extend(yr.iter().zip(gr).map(|(&a, &b)| a * (b - inner)));
                }
                Tensor::new(y.shape().to_vec(), gi)
            }
        }
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::Conv2d(l) => vec![&l.weight, &l.bias],
            Layer::FullyConnected(l) => vec![&l.weight, &l.bias],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Conv2d(l) => vec![&mut l.weight, &mut l.bias],
            Layer::FullyConnected(l) => vec![&mut l.weight, &mut l.bias],
            _ => vec![],
        }
    }

    pub fn clear_cache(&mut self) {
        match self {
            Layer::Conv2d(l) => l.cache = None,
            Layer::FullyConnected(l) => l.cache = None,
            Layer::Relu(l) => l.cache = None,
            Layer::MaxPool2d(l) => l.cache = None,
            Layer::Flatten(l) => l.cache = None,
            Layer::GradientReversal(l) => l.primed = false,
            Layer::Softmax(l) => l.cache = None,
        }
    }
}

fn accumulate<T: Scalar>(param: &mut Tensor<T>, grad: &Tensor<T>) {
    for (a, &g) in param.grad_mut().iter_mut().zip(grad.data()) {
        *a = *a + g;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn conv_identity_kernel_copies_input() {
        let x = Tensor::<f64>::from_fn(&[2, 1, 3, 4], |i| i as f64 - 5.0);
        let w = t(&[1, 1, 1, 1], &[1.0]);
        let b = t(&[1], &[0.0]);
        let y = conv2d_forward(&x, &w, &b, 1, 0).unwrap();
        assert_eq!(y.data(), x.data());
        let g = Tensor::from_fn(&[2, 1, 3, 4], |i| (i as f64).sin());
        let (gi, _, _) = conv2d_backward(&x, &w, 1, 0, &g).unwrap();
        assert_eq!(gi.data(), g.data());
    }

    #[test]
    fn conv_hand_arithmetic() {
        let x = t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let w = t(&[1, 1, 2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let y = conv2d_forward(&x, &w, &t(&[1], &[0.0]), 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[5.0]);
    }

    #[test]
    fn conv_output_size_formula() {
        let x = Tensor::<f32>::zeros(&[1, 3, 64, 64]);
        let w = Tensor::<f32>::zeros(&[16, 3, 5, 5]);
        let y = conv2d_forward(&x, &w, &Tensor::zeros(&[16]), 2, 0).unwrap();
        assert_eq!(y.shape(), &[1, 16, 30, 30]);
        let w3 = Tensor::<f32>::zeros(&[4, 3, 3, 3]);
        let y = conv2d_forward(&x, &w3, &Tensor::zeros(&[4]), 1, 1).unwrap();
        assert_eq!(y.shape(), &[1, 4, 64, 64]);
    }

    #[test]
    fn conv_rejects_bad_shapes() {
        let x = Tensor::<f32>::zeros(&[1, 3, 4, 4]);
        let w = Tensor::<f32>::zeros(&[2, 2, 3, 3]);
        assert!(conv2d_forward(&x, &w, &Tensor::zeros(&[2]), 1, 0).is_err());
        let w = Tensor::<f32>::zeros(&[2, 3, 5, 5]);
        assert!(conv2d_forward(&x, &w, &Tensor::zeros(&[2]), 1, 0).is_err());
        let w = Tensor::<f32>::zeros(&[2, 3, 3, 3]);
        assert!(conv2d_forward(&x, &w, &Tensor::zeros(&[2]), 0, 0).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let x = Tensor::<f64>::from_fn(&[2, 2, 5, 5], |i| (i as f64 * 0.37).cos());
        let w = Tensor::<f64>::from_fn(&[3, 2, 3, 3], |i| (i as f64 * 0.11).sin());
        let g = Tensor::zeros(&[2, 3, 3, 3]);
        let (gi, gw, gb) = conv2d_backward(&x, &w, 1, 0, &g).unwrap();
        for v in gi.data().iter().chain(gw.data()).chain(gb.data()) {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn fc_examples() {
        let x = t(&[1, 2], &[1.0, 2.0]);
        let y = fc_forward(&x, &t(&[2, 1], &[1.0, 1.0]), &t(&[1], &[1.0])).unwrap();
        assert_eq!(y.data(), &[4.0]);
        let eye = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let y = fc_forward(&x, &eye, &t(&[2], &[0.0, 0.0])).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn relu_example() {
        let y = relu_forward(&t(&[3], &[-1.0, 0.0, 2.0]));
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn maxpool_routes_to_max() {
        let mut l = Layer::<f64>::maxpool(2);
        let y = l.forward(&t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(y.data(), &[4.0]);
        let gi = l.backward(&t(&[1, 1, 1, 1], &[7.0])).unwrap();
        assert_eq!(gi.data(), &[0.0, 0.0, 0.0, 7.0]);
    }

    #[test]
    fn maxpool_ties_go_to_first_row_major() {
        let mut l = Layer::<f64>::maxpool(2);
        l.forward(&t(&[1, 1, 2, 2], &[5.0, 5.0, 5.0, 5.0])).unwrap();
        let gi = l.backward(&t(&[1, 1, 1, 1], &[1.0])).unwrap();
        assert_eq!(gi.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn backward_without_forward_is_usage_error() {
        let mut rng = crate::rng::rng_from(0, &[]);
        let mut layers: Vec<Layer<f32>> = vec![
            Layer::Conv2d(Conv2d::new(1, 1, 1, 1, 0, &mut rng)),
            Layer::FullyConnected(Dense::new(2, 2, &mut rng)),
            Layer::relu(),
            Layer::maxpool(2),
            Layer::flatten(),
            Layer::grl(1.0),
            Layer::softmax(),
        ];
        for l in &mut layers {
            let err = l.backward(&Tensor::zeros(&[1, 1])).unwrap_err();
            assert!(matches!(err, crate::error::Error::Usage(_)), "{err}");
        }
    }

    #[test]
    fn cache_is_consumed_by_backward() {
        let mut l = Layer::<f64>::relu();
        let x = t(&[2], &[1.0, -1.0]);
        l.forward(&x).unwrap();
        l.backward(&x).unwrap();
        assert!(l.backward(&x).is_err());
    }

    #[test]
    fn grl_examples() {
        let g = t(&[2], &[2.0, -3.0]);
        assert_eq!(grl_backward(&g, 1.0).data(), &[-2.0, 3.0]);
        assert!(grl_backward(&g, 0.0).data().iter().all(|v| *v == 0.0));
        let half = grl_backward(&g, 0.5);
        for (a, b) in half.data().iter().zip(g.data()) {
            assert_eq!(*a, -0.5 * b);
        }
        let empty = Tensor::<f32>::zeros(&[0]);
        assert_eq!(grl_forward(&empty), empty);
        let x = t(&[3], &[1.5, -0.0, f64::MIN_POSITIVE]);
        let twice = grl_forward(&grl_forward(&x));
        let bits: Vec<u64> = twice.data().iter().map(|v| v.to_bits()).collect();
        let orig: Vec<u64> = x.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits, orig);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let y = softmax_rows(&t(&[2, 3], &[1.0, 2.0, 3.0, 1000.0, 0.0, -5.0])).unwrap();
        for row in y.data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn parameters_accumulate_gradients() {
        let mut rng = crate::rng::rng_from(3, &[]);
        let mut l = Layer::FullyConnected(Dense::<f64>::new(2, 2, &mut rng));
        let x = t(&[1, 2], &[1.0, 1.0]);
        let g = t(&[1, 2], &[1.0, 1.0]);
        l.forward(&x).unwrap();
        l.backward(&g).unwrap();
        l.forward(&x).unwrap();
        l.backward(&g).unwrap();
        assert_eq!(l.params()[1].grad().unwrap(), &[2.0, 2.0]);
    }
}
