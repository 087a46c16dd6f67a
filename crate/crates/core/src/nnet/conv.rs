//! 3x3 and 1x1 convolutions (cross-correlation) with size-preserving
//! padding and stride 1 or 2.

use crate::error::{Error, Result};
use crate::nnet::tensor::Tensor;
use crate::random::RandomStream;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    /// `[out][in][ky][kx]`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Output positions `[start, end)` along one axis for which input index
/// `o * stride + k - pad` is in range.
fn valid_range(out_len: usize, in_len: usize, k: usize, pad: usize, stride: usize) -> (usize, usize) {
    // o * stride + k >= pad
    let start = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
    // o * stride + k - pad <= in_len - 1
    let limit = in_len - 1 + pad;
    let end = if k > limit { 0 } else { ((limit - k) / stride + 1).min(out_len) };
    (start, end.max(start))
}

impl ConvLayer {
    pub fn zeros(kernel: usize, in_channels: usize, out_channels: usize, stride: usize) -> Result<Self> {
        if kernel != 1 && kernel != 3 {
            return Err(Error::Shape(format!("kernel {kernel} must be 1 or 3")));
        }
        if stride != 1 && stride != 2 {
            return Err(Error::Shape(format!("stride {stride} must be 1 or 2")));
        }
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::Shape("channel counts must be positive".into()));
        }
        Ok(ConvLayer {
            kernel,
            in_channels,
            out_channels,
            stride,
            weights: vec![0.0; kernel * kernel * in_channels * out_channels],
            biases: vec![0.0; out_channels],
        })
    }

    /// Uniform weights in `±scale * sqrt(6 / fan_in)`, zero biases.
    pub fn init_uniform(&mut self, rng: &mut RandomStream, scale: f64) {
        let bound = scale * (6.0 / self.fan_in() as f64).sqrt();
        for w in &mut self.weights {
            *w = rng.uniform_range(-bound, bound);
        }
        self.biases.fill(0.0);
    }

    pub fn fan_in(&self) -> usize {
        self.kernel * self.kernel * self.in_channels
    }

    pub fn pad(&self) -> usize {
        self.kernel / 2
    }

    pub fn output_extent(&self, extent: usize) -> usize {
        (extent + 2 * self.pad() - self.kernel) / self.stride + 1
    }

    fn check_input(&self, input: &Tensor) -> Result<(usize, usize, usize)> {
        let (c, h, w) = input.chw()?;
        if c != self.in_channels {
            return Err(Error::Shape(format!(
                "layer expects {} input channels, got {c}",
                self.in_channels
            )));
        }
        if h == 0 || w == 0 {
            return Err(Error::Shape("empty spatial extent".into()));
        }
        Ok((c, h, w))
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (cin, h, w) = self.check_input(input)?;
        let (oh, ow) = (self.output_extent(h), self.output_extent(w));
        let (k, s, p) = (self.kernel, self.stride, self.pad());
        let src = input.data();
        let mut out = vec![0.0; self.out_channels * oh * ow];
        for o in 0..self.out_channels {
            let plane = &mut out[o * oh * ow..(o + 1) * oh * ow];
            plane.fill(self.biases[o]);
            for i in 0..cin {
                let in_plane = &src[i * h * w..(i + 1) * h * w];
                for ky in 0..k {
                    let (y0, y1) = valid_range(oh, h, ky, p, s);
                    for kx in 0..k {
                        let wv = self.weights[((o * cin + i) * k + ky) * k + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let (x0, x1) = valid_range(ow, w, kx, p, s);
                        for y in y0..y1 {
                            let iy = y * s + ky - p;
                            let row = &in_plane[iy * w..(iy + 1) * w];
                            let orow = &mut plane[y * ow..(y + 1) * ow];
                            if s == 1 {
                                let src_row = &row[x0 + kx - p..x1 + kx - p];
                                for (o, v) in orow[x0..x1].iter_mut().zip(src_row) {
                                    *o += wv * v;
                                }
                            } else {
                                for x in x0..x1 {
                                    orow[x] += wv * row[x * s + kx - p];
                                }
                            }
                        }
                    }
                }
            }
        }
        Tensor::new(vec![self.out_channels, oh, ow], out)
    }

    /// Accumulates weight and bias gradients into `grad` and returns the
    /// gradient with respect to `input`.
    pub fn backward(&self, input: &Tensor, grad_out: &Tensor, grad: &mut ConvLayer) -> Result<Tensor> {
        let (cin, h, w) = self.check_input(input)?;
        let (oh, ow) = (self.output_extent(h), self.output_extent(w));
        if grad_out.shape() != [self.out_channels, oh, ow] {
            return Err(Error::Shape(format!(
                "output gradient {:?} does not match [{}, {oh}, {ow}]",
                grad_out.shape(),
                self.out_channels
            )));
        }
        let (k, s, p) = (self.kernel, self.stride, self.pad());
        let src = input.data();
        let dout = grad_out.data();
        let mut din = vec![0.0; cin * h * w];
        for o in 0..self.out_channels {
            let dplane = &dout[o * oh * ow..(o + 1) * oh * ow];
            grad.biases[o] += dplane.iter().sum::<f64>();
            for i in 0..cin {
                let in_plane = &src[i * h * w..(i + 1) * h * w];
                let din_plane = &mut din[i * h * w..(i + 1) * h * w];
                for ky in 0..k {
                    let (y0, y1) = valid_range(oh, h, ky, p, s);
                    for kx in 0..k {
                        let widx = ((o * cin + i) * k + ky) * k + kx;
                        let wv = self.weights[widx];
                        let (x0, x1) = valid_range(ow, w, kx, p, s);
                        let mut gw = 0.0;
                        for y in y0..y1 {
                            let iy = y * s + ky - p;
                            let drow = &dplane[y * ow..(y + 1) * ow];
                            let row = &in_plane[iy * w..(iy + 1) * w];
                            let dinrow = &mut din_plane[iy * w..(iy + 1) * w];
                            if s == 1 {
                                let (a, b) = (x0 + kx - p, x1 + kx - p);
                                for ((d, v), di) in drow[x0..x1].iter().zip(&row[a..b]).zip(&mut dinrow[a..b]) {
                                    gw += d * v;
                                    *di += wv * d;
                                }
                            } else {
                                for x in x0..x1 {
                                    let ix = x * s + kx - p;
                                    gw += drow[x] * row[ix];
                                    dinrow[ix] += wv * drow[x];
                                }
                            }
                        }
                        grad.weights[widx] += gw;
                    }
                }
            }
        }
        Tensor::new(vec![cin, h, w], din)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(c: usize, h: usize, w: usize, seed: u64) -> Tensor {
        let mut rng = RandomStream::new(seed);
        Tensor::new(vec![c, h, w], (0..c * h * w).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).unwrap()
    }

    /// Direct definition of cross-correlation with explicit zero padding.
    fn conv_oracle(layer: &ConvLayer, input: &Tensor) -> Vec<f64> {
        let (c, h, w) = input.chw().unwrap();
        let (k, s, p) = (layer.kernel as isize, layer.stride, layer.pad() as isize);
        let (oh, ow) = (layer.output_extent(h), layer.output_extent(w));
        let mut out = Vec::new();
        for o in 0..layer.out_channels {
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = layer.biases[o];
                    for i in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (y * s) as isize + ky - p;
                                let ix = (x * s) as isize + kx - p;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let wi = ((o * c + i) * k as usize + ky as usize) * k as usize + kx as usize;
                                acc += layer.weights[wi] * input.data()[(i * h + iy as usize) * w + ix as usize];
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
        out
    }

    #[test]
    fn one_by_one_identity() {
        let mut layer = ConvLayer::zeros(1, 1, 1, 1).unwrap();
        layer.weights[0] = 1.0;
        let x = random_input(1, 4, 5, 1);
        assert_eq!(layer.forward(&x).unwrap(), x);
    }

    #[test]
    fn zero_kernel_gives_bias() {
        let mut layer = ConvLayer::zeros(3, 2, 3, 1).unwrap();
        layer.biases = vec![0.5, -1.0, 2.0];
        let y = layer.forward(&random_input(2, 4, 4, 2)).unwrap();
        for (o, plane) in y.data().chunks(16).enumerate() {
            assert!(plane.iter().all(|&v| v == layer.biases[o]));
        }
    }

    #[test]
    fn centred_kernel_is_identity() {
        let mut layer = ConvLayer::zeros(3, 1, 1, 1).unwrap();
        layer.weights[4] = 1.0;
        let x = random_input(1, 5, 5, 3);
        assert_eq!(conv_oracle(&layer, &x), x.data());
        assert_eq!(layer.forward(&x).unwrap(), x);
    }

    #[test]
    fn matches_direct_oracle() {
        for (seed, (k, s, h, w)) in [(3, 1, 5, 6), (3, 2, 7, 5), (1, 2, 6, 6), (1, 1, 3, 2), (3, 2, 1, 1)]
            .into_iter()
            .enumerate()
        {
            let mut layer = ConvLayer::zeros(k, 2, 3, s).unwrap();
            layer.init_uniform(&mut RandomStream::new(seed as u64), 1.0);
            layer.biases = vec![0.1, -0.2, 0.3];
            let x = random_input(2, h, w, 100 + seed as u64);
            let y = layer.forward(&x).unwrap();
            assert_eq!(y.shape(), [3, h.div_ceil(s), w.div_ceil(s)]);
            for (a, b) in y.data().iter().zip(conv_oracle(&layer, &x)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let layer = ConvLayer::zeros(3, 2, 3, 1).unwrap();
        assert!(matches!(layer.forward(&random_input(3, 4, 4, 0)), Err(Error::Shape(_))));
        assert!(ConvLayer::zeros(5, 1, 1, 1).is_err());
        assert!(ConvLayer::zeros(3, 1, 1, 3).is_err());
    }
}
