//! The tiny residual network: stem convolution, residual blocks, global
//! average pooling and an affine map to six logits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{ClassLabel, NUM_CLASSES};
use crate::nnet::block::{BlockCache, ResidualBlock, Shortcut};
use crate::nnet::conv::ConvLayer;
use crate::nnet::loss::softmax_xent;
use crate::nnet::optim::sgd_step;
use crate::nnet::tensor::Tensor;
use crate::random::RandomStream;
use crate::raster::{TensorImage, CHANNELS};

/// Scale applied to the initial weights of the second convolution in each
/// residual body. Keeps activations from growing block over block in the
/// absence of normalization layers.
pub const RESIDUAL_INIT_SCALE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub out_channels: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub in_channels: usize,
    pub stem_channels: usize,
    pub blocks: Vec<BlockSpec>,
}

impl Default for ArchConfig {
    /// Stem plus four blocks; the two stride-2 blocks change width and use
    /// projection shortcuts.
    fn default() -> Self {
        ArchConfig {
            in_channels: CHANNELS,
            stem_channels: 8,
            blocks: vec![
                BlockSpec { out_channels: 8, stride: 1 },
                BlockSpec { out_channels: 16, stride: 2 },
                BlockSpec { out_channels: 16, stride: 1 },
                BlockSpec { out_channels: 24, stride: 2 },
            ],
        }
    }
}

impl ArchConfig {
    pub fn feature_channels(&self) -> usize {
        self.blocks
            .last()
            .map_or(self.stem_channels, |b| b.out_channels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyResNet {
    arch: ArchConfig,
    pub stem: ConvLayer,
    pub blocks: Vec<ResidualBlock>,
    /// `[class][feature]`.
    pub fc_weights: Vec<f64>,
    pub fc_biases: Vec<f64>,
}

/// Everything the backward pass needs from a forward pass.
pub struct ForwardCache {
    input: Tensor,
    stem_out: Tensor,
    blocks: Vec<BlockCache>,
    pooled: Vec<f64>,
    logits: [f64; NUM_CLASSES],
}

impl ForwardCache {
    pub fn logits(&self) -> &[f64; NUM_CLASSES] {
        &self.logits
    }
}

impl TinyResNet {
    /// All parameters zero.
    pub fn zeros(arch: &ArchConfig) -> Result<Self> {
        if arch.in_channels == 0 || arch.stem_channels == 0 {
            return Err(Error::Shape("channel counts must be positive".into()));
        }
        let stem = ConvLayer::zeros(3, arch.in_channels, arch.stem_channels, 1)?;
        let mut blocks = Vec::with_capacity(arch.blocks.len());
        let mut channels = arch.stem_channels;
        for spec in &arch.blocks {
            blocks.push(ResidualBlock::zeros(channels, spec.out_channels, spec.stride)?);
            channels = spec.out_channels;
        }
        Ok(TinyResNet {
            arch: arch.clone(),
            stem,
            blocks,
            fc_weights: vec![0.0; NUM_CLASSES * channels],
            fc_biases: vec![0.0; NUM_CLASSES],
        })
    }

    /// Fan-in scaled uniform initialization (see [`ConvLayer::init_uniform`]);
    /// the last body convolution of each block is further scaled by
    /// [`RESIDUAL_INIT_SCALE`] and the classifier uses bound `sqrt(1/fan_in)`.
    pub fn new(arch: &ArchConfig, rng: &mut RandomStream) -> Result<Self> {
        let mut model = Self::zeros(arch)?;
        model.stem.init_uniform(rng, 1.0);
        for block in &mut model.blocks {
            block.conv1.init_uniform(rng, 1.0);
            block.conv2.init_uniform(rng, RESIDUAL_INIT_SCALE);
            if let Shortcut::Projection(p) = &mut block.shortcut {
                p.init_uniform(rng, 1.0);
            }
        }
        let bound = (1.0 / arch.feature_channels() as f64).sqrt();
        for w in &mut model.fc_weights {
            *w = rng.uniform_range(-bound, bound);
        }
        Ok(model)
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    /// A zero-valued model of the same shape, used for gradients and
    /// velocities.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.arch).expect("architecture already validated")
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.stem.weights, &self.stem.biases];
        for b in &self.blocks {
            out.push(&b.conv1.weights);
            out.push(&b.conv1.biases);
            out.push(&b.conv2.weights);
            out.push(&b.conv2.biases);
            if let Shortcut::Projection(p) = &b.shortcut {
                out.push(&p.weights);
                out.push(&p.biases);
            }
        }
        out.push(&self.fc_weights);
        out.push(&self.fc_biases);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.stem.weights, &mut self.stem.biases];
        for b in &mut self.blocks {
            out.push(&mut b.conv1.weights);
            out.push(&mut b.conv1.biases);
            out.push(&mut b.conv2.weights);
            out.push(&mut b.conv2.biases);
            if let Shortcut::Projection(p) = &mut b.shortcut {
                out.push(&mut p.weights);
                out.push(&mut p.biases);
            }
        }
        out.push(&mut self.fc_weights);
        out.push(&mut self.fc_biases);
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// All parameters concatenated in [`params`](Self::params) order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.params().concat()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut offset = 0;
        for p in self.params_mut() {
            let n = p.len();
            p.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// `self += other`, parameter by parameter.
    pub fn add_assign(&mut self, other: &TinyResNet) {
        for (a, b) in self.params_mut().into_iter().zip(other.params()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for p in self.params_mut() {
            for x in p.iter_mut() {
                *x *= factor;
            }
        }
    }

    /// One momentum step over every parameter tensor.
    pub fn sgd_step(&mut self, grads: &TinyResNet, velocity: &mut TinyResNet, rate: f64, momentum: f64) -> Result<()> {
        for ((w, g), v) in self
            .params_mut()
            .into_iter()
            .zip(grads.params())
            .zip(velocity.params_mut())
        {
            sgd_step(w, g, v, rate, momentum)?;
        }
        Ok(())
    }

    pub fn input_tensor(image: &TensorImage) -> Tensor {
        Tensor::new(
            vec![CHANNELS, image.height(), image.width()],
            image.to_planar(),
        )
        .expect("tensor image layout is consistent")
    }

    pub fn forward_cached(&self, input: &Tensor) -> Result<ForwardCache> {
        let (c, _, _) = input.chw()?;
        if c != self.arch.in_channels {
            return Err(Error::Shape(format!(
                "model expects {} input channels, got {c}",
                self.arch.in_channels
            )));
        }
        let mut stem_out = self.stem.forward(input)?;
        stem_out.relu_in_place();
        let mut caches: Vec<BlockCache> = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let x = caches.last().map_or(&stem_out, |c| c.output());
            let cache = block.forward_cached(x)?;
            caches.push(cache);
        }
        let features = caches.last().map_or(&stem_out, |c| c.output());
        let (fc, fh, fw) = features.chw()?;
        let area = (fh * fw) as f64;
        let pooled: Vec<f64> = features
            .data()
            .chunks(fh * fw)
            .map(|plane| plane.iter().sum::<f64>() / area)
            .collect();
        let mut logits = [0.0; NUM_CLASSES];
        for (k, z) in logits.iter_mut().enumerate() {
            *z = self.fc_biases[k]
                + self.fc_weights[k * fc..(k + 1) * fc]
                    .iter()
                    .zip(&pooled)
                    .map(|(w, p)| w * p)
                    .sum::<f64>();
        }
        Ok(ForwardCache {
            input: input.clone(),
            stem_out,
            blocks: caches,
            pooled,
            logits,
        })
    }

    pub fn logits(&self, input: &Tensor) -> Result<[f64; NUM_CLASSES]> {
        Ok(self.forward_cached(input)?.logits)
    }

    /// Back-propagates `d loss / d logits`; returns parameter gradients and
    /// the gradient with respect to the input.
    pub fn backward_from_logits(
        &self,
        cache: &ForwardCache,
        d_logits: &[f64; NUM_CLASSES],
    ) -> Result<(TinyResNet, Tensor)> {
        let mut grads = self.zeros_like();
        let features = cache.blocks.last().map_or(&cache.stem_out, |c| c.output());
        let (fc, fh, fw) = features.chw()?;
        let area = (fh * fw) as f64;
        let mut d_pooled = vec![0.0; fc];
        for (k, &dz) in d_logits.iter().enumerate() {
            grads.fc_biases[k] += dz;
            for j in 0..fc {
                grads.fc_weights[k * fc + j] += dz * cache.pooled[j];
                d_pooled[j] += dz * self.fc_weights[k * fc + j];
            }
        }
        let d_features: Vec<f64> = d_pooled
            .iter()
            .flat_map(|&d| std::iter::repeat_n(d / area, fh * fw))
            .collect();
        let mut grad = Tensor::new(vec![fc, fh, fw], d_features)?;
        for (i, block) in self.blocks.iter().enumerate().rev() {
            let x = if i == 0 {
                &cache.stem_out
            } else {
                cache.blocks[i - 1].output()
            };
            grad = block.backward(x, &cache.blocks[i], &grad, &mut grads.blocks[i])?;
        }
        for (d, &s) in grad.data_mut().iter_mut().zip(cache.stem_out.data()) {
            if s <= 0.0 {
                *d = 0.0;
            }
        }
        let d_input = self.stem.backward(&cache.input, &grad, &mut grads.stem)?;
        Ok((grads, d_input))
    }

    /// Loss of one example and the gradients of every parameter.
    pub fn backward(&self, input: &Tensor, label: ClassLabel) -> Result<(f64, TinyResNet)> {
        let cache = self.forward_cached(input)?;
        let (loss, d_logits) = softmax_xent(&cache.logits, label);
        let (grads, _) = self.backward_from_logits(&cache, &d_logits)?;
        Ok((loss, grads))
    }

    pub fn loss(&self, input: &Tensor, label: ClassLabel) -> Result<f64> {
        let logits = self.logits(input)?;
        Ok(softmax_xent(&logits, label).0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_arch() -> ArchConfig {
        ArchConfig {
            in_channels: 3,
            stem_channels: 2,
            blocks: vec![
                BlockSpec { out_channels: 2, stride: 1 },
                BlockSpec { out_channels: 3, stride: 2 },
            ],
        }
    }

    #[test]
    fn output_has_six_logits_and_shapes_chain() {
        let model = TinyResNet::new(&ArchConfig::default(), &mut RandomStream::new(0)).unwrap();
        let mut rng = RandomStream::new(1);
        let x = Tensor::new(vec![3, 16, 16], (0..768).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).unwrap();
        let logits = model.logits(&x).unwrap();
        assert!(logits.iter().all(|z| z.is_finite()));
        let projections = model
            .blocks
            .iter()
            .filter(|b| matches!(b.shortcut, Shortcut::Projection(_)))
            .count();
        assert_eq!(model.blocks.len(), 4);
        assert_eq!(projections, 2);
    }

    #[test]
    fn flat_params_round_trip() {
        let model = TinyResNet::new(&tiny_arch(), &mut RandomStream::new(3)).unwrap();
        let flat = model.flat_params();
        let mut other = model.zeros_like();
        other.set_flat_params(&flat).unwrap();
        assert_eq!(other, model);
        assert!(other.set_flat_params(&flat[1..]).is_err());
    }

    #[test]
    fn saturated_correct_logit_has_tiny_gradient() {
        let mut model = TinyResNet::new(&tiny_arch(), &mut RandomStream::new(4)).unwrap();
        model.fc_weights.fill(0.0);
        model.fc_biases = vec![0.0, 0.0, 60.0, 0.0, 0.0, 0.0];
        let x = Tensor::new(vec![3, 4, 4], vec![0.5; 48]).unwrap();
        let (loss, grads) = model.backward(&x, ClassLabel::Tsa).unwrap();
        assert!(loss < 1e-12);
        let norm: f64 = grads.flat_params().iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm < 1e-6, "{norm}");
    }

    #[test]
    fn rejects_wrong_channels() {
        let model = TinyResNet::new(&tiny_arch(), &mut RandomStream::new(4)).unwrap();
        let x = Tensor::new(vec![1, 4, 4], vec![0.5; 16]).unwrap();
        assert!(matches!(model.logits(&x), Err(Error::Shape(_))));
    }
}
