//! Layer primitives: valid (unpadded) 2-D convolution, dense layers, and the
//! two nonlinearities in use. Forward passes write into caller buffers;
//! backward passes add into the layer's gradient tensors and return the
//! gradient with respect to the layer input.

use rand::Rng;

use super::Param;

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, xs: &mut [f32]) {
        match self {
            Activation::Relu => {
                for x in xs {
                    if *x < 0.0 {
                        *x = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for x in xs {
                    *x = (1.0 / (1.0 + (-f64::from(*x)).exp())) as f32;
                }
            }
        }
    }

    /// Masks an upstream gradient in place, given the post-activation values.
    pub fn backprop(self, post: &[f32], d: &mut [f32]) {
        match self {
            Activation::Relu => {
                for (y, g) in post.iter().zip(d.iter_mut()) {
                    if *y <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for (y, g) in post.iter().zip(d.iter_mut()) {
                    *g *= *y * (1.0 - *y);
                }
            }
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
        }
    }
}

fn glorot_limit(fan_in: usize, fan_out: usize) -> f32 {
    (6.0 / (fan_in + fan_out) as f32).sqrt()
}

fn init_uniform(param: &mut Param, limit: f32, rng: &mut impl Rng) {
    for w in param.value.data_mut() {
        *w = rng.random_range(-limit..limit);
    }
}

/// Valid 2-D convolution over `[channels, height, width]` input.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    /// Weights, shaped `[out_c, in_c, k, k]`.
    pub w: Param,
    /// Per-filter bias.
    pub b: Param,
    pub stride: usize,
    pub kernel: usize,
    pub in_shape: [usize; 3],
    pub out_shape: [usize; 3],
}

impl Conv2d {
    pub fn new(
        in_shape: [usize; 3],
        out_channels: usize,
        kernel: usize,
        stride: usize,
        rng: &mut impl Rng,
    ) -> Conv2d {
        let [in_c, h, w] = in_shape;
        assert!(kernel >= 1 && stride >= 1);
        assert!(h >= kernel && w >= kernel, "kernel larger than input");
        let oh = (h - kernel) / stride + 1;
        let ow = (w - kernel) / stride + 1;
        let mut weights = Param::zeros(&[out_channels, in_c, kernel, kernel]);
        let fan_in = in_c * kernel * kernel;
        let fan_out = out_channels * kernel * kernel;
        init_uniform(&mut weights, glorot_limit(fan_in, fan_out), rng);
        Conv2d {
            w: weights,
            b: Param::zeros(&[out_channels]),
            stride,
            kernel,
            in_shape,
            out_shape: [out_channels, oh, ow],
        }
    }

    pub fn out_len(&self) -> usize {
        self.out_shape.iter().product()
    }

    pub fn in_len(&self) -> usize {
        self.in_shape.iter().product()
    }

    pub fn forward(&self, x: &[f32], out: &mut [f32]) {
        let [in_c, h, w] = self.in_shape;
        let [oc, oh, ow] = self.out_shape;
        debug_assert_eq!(x.len(), in_c * h * w);
        debug_assert_eq!(out.len(), oc * oh * ow);
        let k = self.kernel;
        let s = self.stride;
        let wd = self.w.value.data();
        let bd = self.b.value.data();
        for f in 0..oc {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = f64::from(bd[f]);
                    for c in 0..in_c {
                        for ky in 0..k {
                            let iy = oy * s + ky;
                            let xrow = (c * h + iy) * w + ox * s;
                            let wrow = ((f * in_c + c) * k + ky) * k;
                            for kx in 0..k {
                                acc += f64::from(wd[wrow + kx]) * f64::from(x[xrow + kx]);
                            }
                        }
                    }
                    out[(f * oh + oy) * ow + ox] = acc as f32;
                }
            }
        }
    }

    /// Accumulates weight/bias gradients for upstream gradient `d_out` and
    /// returns the gradient with respect to the input.
    pub fn backward(&mut self, x: &[f32], d_out: &[f32]) -> Vec<f32> {
        let [in_c, h, w] = self.in_shape;
        let [oc, oh, ow] = self.out_shape;
        debug_assert_eq!(d_out.len(), oc * oh * ow);
        let k = self.kernel;
        let s = self.stride;
        let mut d_in = vec![0.0f64; in_c * h * w];
        let mut d_w = vec![0.0f64; self.w.len()];
        let wd = self.w.value.data();
        for f in 0..oc {
            let mut d_b = 0.0f64;
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = f64::from(d_out[(f * oh + oy) * ow + ox]);
                    if g == 0.0 {
                        continue;
                    }
                    d_b += g;
                    for c in 0..in_c {
                        for ky in 0..k {
                            let iy = oy * s + ky;
                            let xrow = (c * h + iy) * w + ox * s;
                            let wrow = ((f * in_c + c) * k + ky) * k;
                            for kx in 0..k {
                                d_w[wrow + kx] += g * f64::from(x[xrow + kx]);
                                d_in[xrow + kx] += g * f64::from(wd[wrow + kx]);
                            }
                        }
                    }
                }
            }
            self.b.grad.data_mut()[f] += d_b as f32;
        }
        for (dst, src) in self.w.grad.data_mut().iter_mut().zip(&d_w) {
            *dst += *src as f32;
        }
        d_in.into_iter().map(|v| v as f32).collect()
    }
}

/// Fully-connected layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// Weights, shaped `[out, in]`.
    pub w: Param,
    pub b: Param,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Dense {
        let mut w = Param::zeros(&[out_dim, in_dim]);
        init_uniform(&mut w, glorot_limit(in_dim, out_dim), rng);
        Dense {
            w,
            b: Param::zeros(&[out_dim]),
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, x: &[f32], out: &mut [f32]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        let wd = self.w.value.data();
        let bd = self.b.value.data();
        for o in 0..self.out_dim {
            let row = &wd[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = f64::from(bd[o]);
            for (wi, xi) in row.iter().zip(x) {
                acc += f64::from(*wi) * f64::from(*xi);
            }
            out[o] = acc as f32;
        }
    }

    pub fn backward(&mut self, x: &[f32], d_out: &[f32]) -> Vec<f32> {
        debug_assert_eq!(d_out.len(), self.out_dim);
        let mut d_in = vec![0.0f64; self.in_dim];
        let wd = self.w.value.data();
        {
            let gw = self.w.grad.data_mut();
            for o in 0..self.out_dim {
                let g = d_out[o];
                if g == 0.0 {
                    continue;
                }
                let gf = f64::from(g);
                let row = o * self.in_dim;
                for i in 0..self.in_dim {
                    gw[row + i] += (gf * f64::from(x[i])) as f32;
                    d_in[i] += gf * f64::from(wd[row + i]);
                }
            }
        }
        for (o, g) in d_out.iter().enumerate() {
            self.b.grad.data_mut()[o] += *g;
        }
        d_in.into_iter().map(|v| v as f32).collect()
    }
}
