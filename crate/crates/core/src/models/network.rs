use crate::error::{usage, Result};
use crate::rng::rng_from;
use crate::tensor_nn::{Conv2d, Dense, Layer, Tensor};

use super::spec::{conv_plan, NetworkSpec, Preset};

/// Feature extractor (θ_f) feeding a class head (θ_s) and, through a
/// gradient-reversal layer, a domain head (θ_d).
#[derive(Clone, Debug)]
pub struct TwoHeadNetwork {
    pub spec: NetworkSpec,
    pub extractor: Vec<Layer>,
    pub source_head: Vec<Layer>,
    /// Starts with the gradient-reversal layer.
    pub domain_head: Vec<Layer>,
}

#[derive(Clone, Debug)]
pub struct FullOutput {
    pub class_logits: Tensor,
    pub domain_logits: Tensor,
    pub features: Tensor,
}

const DOMAIN_OUTPUT_INIT_SCALE: f32 = 0.01;

/// Builds and initializes a network. Each part draws from its own stream,
/// so the extractor and class head do not depend on the domain head's shape.
pub fn build_network(spec: &NetworkSpec, seed: u64) -> Result<TwoHeadNetwork> {
    spec.validate()?;
    let mut rng = rng_from(seed, &[1]);
    let mut extractor = Vec::new();
    match spec.preset {
        Preset::Mlp => {
            let mut width = spec.input_dim;
            for &h in &spec.hidden {
                extractor.push(Layer::FullyConnected(Dense::new(width, h, &mut rng)));
                extractor.push(Layer::relu());
                width = h;
            }
        }
        preset => {
            let mut c = spec.input_channels;
            for &(out, k, stride, pad, pool) in conv_plan(preset) {
                extractor.push(Layer::Conv2d(Conv2d::new(c, out, k, stride, pad, &mut rng)));
                extractor.push(Layer::relu());
                if pool {
                    extractor.push(Layer::maxpool(2));
                }
                c = out;
            }
            extractor.push(Layer::flatten());
        }
    }
    let flat = spec.flattened_dim()?;
    extractor.push(Layer::FullyConnected(Dense::new(flat, spec.feature_dim, &mut rng)));
    extractor.push(Layer::relu());

    let mut rng = rng_from(seed, &[2]);
    let mut source_head = Vec::new();
    if spec.source_hidden > 0 {
        source_head.push(Layer::FullyConnected(Dense::new(spec.feature_dim, spec.source_hidden, &mut rng)));
        source_head.push(Layer::relu());
        source_head.push(Layer::FullyConnected(Dense::new(spec.source_hidden, spec.classes, &mut rng)));
    } else {
        source_head.push(Layer::FullyConnected(Dense::new(spec.feature_dim, spec.classes, &mut rng)));
    }

    let mut rng = rng_from(seed, &[3]);
    let hidden = Dense::new(spec.feature_dim, spec.domain_hidden, &mut rng);
    // near-zero output weights start the discriminator at uniform predictions
    let mut out = Dense::new(spec.domain_hidden, 2, &mut rng);
    out.weight = out.weight.map(|w| w * DOMAIN_OUTPUT_INIT_SCALE);
    let domain_head = vec![
        Layer::grl(0.0),
        Layer::FullyConnected(hidden),
        Layer::relu(),
        Layer::FullyConnected(out),
    ];
    Ok(TwoHeadNetwork {
        spec: spec.clone(),
        extractor,
        source_head,
        domain_head,
    })
}

fn forward_all(layers: &mut [Layer], x: &Tensor) -> Result<Tensor> {
    let mut h = x.clone();
    for l in layers.iter_mut() {
        h = l.forward(&h)?;
    }
    Ok(h)
}

fn backward_all(layers: &mut [Layer], g: &Tensor) -> Result<Tensor> {
    let mut g = g.clone();
    for l in layers.iter_mut().rev() {
        g = l.backward(&g)?;
    }
    Ok(g)
}

fn params_of(layers: &mut [Layer]) -> Vec<&mut Tensor> {
    layers.iter_mut().flat_map(|l| l.params_mut()).collect()
}

impl TwoHeadNetwork {
    fn check_input(&self, x: &Tensor) -> Result<()> {
        let want = self.spec.sample_shape();
        if x.ndim() != want.len() + 1 || x.shape()[1..] != want[..] || x.dim(0) == 0 {
            return Err(usage!("network expects [N, {want:?}], got {:?}", x.shape()));
        }
        Ok(())
    }

    /// Extractor forward; caches activations for [`Self::backward_extractor`].
    pub fn features(&mut self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        forward_all(&mut self.extractor, x)
    }

    pub fn class_logits(&mut self, features: &Tensor) -> Result<Tensor> {
        forward_all(&mut self.source_head, features)
    }

    pub fn domain_logits(&mut self, features: &Tensor, lambda: f64) -> Result<Tensor> {
        self.set_lambda(lambda);
        forward_all(&mut self.domain_head, features)
    }

    pub fn set_lambda(&mut self, lambda: f64) {
        if let Some(Layer::GradientReversal(g)) = self.domain_head.first_mut() {
            g.lambda = lambda;
        }
    }

    /// Features computed once and shared by both heads.
    pub fn forward_full(&mut self, x: &Tensor, lambda: f64) -> Result<FullOutput> {
        let features = self.features(x)?;
        let class_logits = self.class_logits(&features)?;
        let domain_logits = self.domain_logits(&features, lambda)?;
        Ok(FullOutput {
            class_logits,
            domain_logits,
            features,
        })
    }

    /// Returns the gradient with respect to the features.
    pub fn backward_source_head(&mut self, grad_logits: &Tensor) -> Result<Tensor> {
        backward_all(&mut self.source_head, grad_logits)
    }

    /// Returns the (already reversed) gradient with respect to the features.
    pub fn backward_domain_head(&mut self, grad_logits: &Tensor) -> Result<Tensor> {
        backward_all(&mut self.domain_head, grad_logits)
    }

    pub fn backward_extractor(&mut self, grad_features: &Tensor) -> Result<()> {
        backward_all(&mut self.extractor, grad_features).map(|_| ())
    }

    /// Class logits without keeping any activation caches.
    pub fn predict_logits(&mut self, x: &Tensor) -> Result<Tensor> {
        let out = self.features(x).and_then(|f| self.class_logits(&f));
        self.clear_caches();
        out
    }

    pub fn clear_caches(&mut self) {
        for l in self.extractor.iter_mut().chain(&mut self.source_head).chain(&mut self.domain_head) {
            l.clear_cache();
        }
    }

    pub fn extractor_params_mut(&mut self) -> Vec<&mut Tensor> {
        params_of(&mut self.extractor)
    }

    pub fn source_params_mut(&mut self) -> Vec<&mut Tensor> {
        params_of(&mut self.source_head)
    }

    pub fn domain_params_mut(&mut self) -> Vec<&mut Tensor> {
        params_of(&mut self.domain_head)
    }

    /// θ_f followed by θ_s.
    pub fn classifier_params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = params_of(&mut self.extractor);
        p.extend(params_of(&mut self.source_head));
        p
    }

    /// θ_f, θ_s, θ_d in that order.
    pub fn all_params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = params_of(&mut self.extractor);
        p.extend(params_of(&mut self.source_head));
        p.extend(params_of(&mut self.domain_head));
        p
    }

    /// Named parameters in checkpoint order.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (part, layers) in [
            ("extractor", &self.extractor),
            ("source_head", &self.source_head),
            ("domain_head", &self.domain_head),
        ] {
            for (i, l) in layers.iter().enumerate() {
                for (p, t) in ["weight", "bias"].iter().zip(l.params()) {
                    out.push((format!("{part}.{i}.{p}"), t));
                }
            }
        }
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.all_params_mut() {
            p.zero_grad();
        }
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn classifier_param_count(&self) -> usize {
        self.named_params()
            .iter()
            .filter(|(n, _)| !n.starts_with("domain_head"))
            .map(|(_, t)| t.len())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(n: usize, side: usize) -> Tensor {
        Tensor::from_fn(&[n, 3, side, side], |i| ((i * 37 % 101) as f32) / 101.0)
    }

    #[test]
    fn alexnet_features_are_256() {
        let mut net = build_network(&NetworkSpec::alexnet(64), 1).unwrap();
        let out = net.forward_full(&input(2, 64), 0.5).unwrap();
        assert_eq!(out.features.shape(), [2, 256]);
        assert_eq!(out.class_logits.shape(), [2, 2]);
        assert_eq!(out.domain_logits.shape(), [2, 2]);
    }

    #[test]
    fn same_seed_same_params() {
        let a = build_network(&NetworkSpec::alexnet(32), 4).unwrap();
        let b = build_network(&NetworkSpec::alexnet(32), 4).unwrap();
        for ((_, x), (_, y)) in a.named_params().iter().zip(b.named_params()) {
            assert_eq!(x.data(), y.data());
        }
    }

    #[test]
    fn vgg_is_larger() {
        let a = build_network(&NetworkSpec::alexnet(64), 0).unwrap();
        let v = build_network(&NetworkSpec::vgg7(64), 0).unwrap();
        assert!(v.classifier_param_count() > a.classifier_param_count());
    }

    #[test]
    fn wrong_input_shape_is_usage_error() {
        let mut net = build_network(&NetworkSpec::alexnet(32), 0).unwrap();
        assert!(net.features(&input(1, 40)).is_err());
    }

    #[test]
    fn features_do_not_depend_on_domain_head() {
        let mut a = build_network(&NetworkSpec::alexnet(32), 2).unwrap();
        let mut spec = NetworkSpec::alexnet(32);
        spec.domain_hidden = 8;
        let mut b = build_network(&spec, 2).unwrap();
        let x = input(3, 32);
        assert_eq!(a.forward_full(&x, 1.0).unwrap().features.data(), b.features(&x).unwrap().data());
    }
}
