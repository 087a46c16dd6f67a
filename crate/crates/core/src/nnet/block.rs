use crate::error::{Error, Result};
use crate::nnet::conv::ConvLayer;
use crate::nnet::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum Shortcut {
    Identity,
    /// 1x1 convolution carrying the stride and channel change.
    Projection(ConvLayer),
}

/// `relu(conv2(relu(conv1(x))) + shortcut(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub conv1: ConvLayer,
    pub conv2: ConvLayer,
    pub shortcut: Shortcut,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BlockCache {
    hidden: Tensor,
    output: Tensor,
}

impl BlockCache {
    pub fn output(&self) -> &Tensor {
        &self.output
    }
}

impl ResidualBlock {
    /// Zero-weight block; the shortcut is a projection exactly when the
    /// channel count or stride changes.
    pub fn zeros(in_channels: usize, out_channels: usize, stride: usize) -> Result<Self> {
        let shortcut = if in_channels == out_channels && stride == 1 {
            Shortcut::Identity
        } else {
            Shortcut::Projection(ConvLayer::zeros(1, in_channels, out_channels, stride)?)
        };
        Self::new(
            ConvLayer::zeros(3, in_channels, out_channels, stride)?,
            ConvLayer::zeros(3, out_channels, out_channels, 1)?,
            shortcut,
        )
    }

    pub fn new(conv1: ConvLayer, conv2: ConvLayer, shortcut: Shortcut) -> Result<Self> {
        if conv1.out_channels != conv2.in_channels || conv2.stride != 1 {
            return Err(Error::Shape("block body layers do not chain".into()));
        }
        match &shortcut {
            Shortcut::Identity => {
                if conv1.in_channels != conv2.out_channels || conv1.stride != 1 {
                    return Err(Error::Shape(
                        "identity shortcut requires matching input and output shapes".into(),
                    ));
                }
            }
            Shortcut::Projection(p) => {
                if p.kernel != 1
                    || p.in_channels != conv1.in_channels
                    || p.out_channels != conv2.out_channels
                    || p.stride != conv1.stride
                {
                    return Err(Error::Shape("projection shortcut does not match the body".into()));
                }
            }
        }
        Ok(ResidualBlock {
            conv1,
            conv2,
            shortcut,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.conv1.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.conv2.out_channels
    }

    pub fn stride(&self) -> usize {
        self.conv1.stride
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_cached(x)?.output)
    }

    pub fn forward_cached(&self, x: &Tensor) -> Result<BlockCache> {
        let mut hidden = self.conv1.forward(x)?;
        hidden.relu_in_place();
        let mut output = self.conv2.forward(&hidden)?;
        match &self.shortcut {
            Shortcut::Identity => {
                for (o, s) in output.data_mut().iter_mut().zip(x.data()) {
                    *o += s;
                }
            }
            Shortcut::Projection(p) => {
                let proj = p.forward(x)?;
                for (o, s) in output.data_mut().iter_mut().zip(proj.data()) {
                    *o += s;
                }
            }
        }
        output.relu_in_place();
        Ok(BlockCache { hidden, output })
    }

    /// Accumulates parameter gradients into `grad` (a block of identical
    /// shape) and returns the gradient with respect to `x`.
    pub fn backward(
        &self,
        x: &Tensor,
        cache: &BlockCache,
        grad_out: &Tensor,
        grad: &mut ResidualBlock,
    ) -> Result<Tensor> {
        // Through the final rectifier.
        let mut d_sum = grad_out.clone();
        for (d, &y) in d_sum.data_mut().iter_mut().zip(cache.output.data()) {
            if y <= 0.0 {
                *d = 0.0;
            }
        }
        let mut d_hidden = self.conv2.backward(&cache.hidden, &d_sum, &mut grad.conv2)?;
        for (d, &h) in d_hidden.data_mut().iter_mut().zip(cache.hidden.data()) {
            if h <= 0.0 {
                *d = 0.0;
            }
        }
        let mut dx = self.conv1.backward(x, &d_hidden, &mut grad.conv1)?;
        match (&self.shortcut, &mut grad.shortcut) {
            (Shortcut::Identity, _) => {
                for (d, s) in dx.data_mut().iter_mut().zip(d_sum.data()) {
                    *d += s;
                }
            }
            (Shortcut::Projection(p), Shortcut::Projection(gp)) => {
                let ds = p.backward(x, &d_sum, gp)?;
                for (d, s) in dx.data_mut().iter_mut().zip(ds.data()) {
                    *d += s;
                }
            }
            (Shortcut::Projection(_), Shortcut::Identity) => {
                return Err(Error::Shape("gradient block lacks a projection".into()));
            }
        }
        Ok(dx)
    }
}
