use candle_core::{Tensor, Var, D};

use super::ops::{depthwise_conv2d, max_pool2d, same_padding};
use super::params::{Init, ParamStore};
use crate::error::Result;

/// Forward pass mode; batch normalization behaves differently in each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
    /// Like `Train`, but batch norm overwrites its running statistics with
    /// the batch statistics instead of averaging them in.
    Calibrate,
}

/// `(top, left, bottom, right)`
pub type Padding = (usize, usize, usize, usize);

pub fn symmetric(p: usize) -> Padding {
    (p, p, p, p)
}

fn pad(x: &Tensor, p: Padding) -> candle_core::Result<Tensor> {
    let (t, l, b, r) = p;
    let x = if t + b > 0 { x.pad_with_zeros(2, t, b)? } else { x.clone() };
    if l + r > 0 {
        x.pad_with_zeros(3, l, r)
    } else {
        Ok(x)
    }
}

/// Bias-free convolution (every conv here feeds a batch norm).
#[derive(Debug, Clone)]
pub struct Conv2d {
    weight: Var,
    stride: usize,
    padding: Padding,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_c: usize,
        out_c: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: Padding,
    ) -> Result<Self> {
        let fan_in = in_c * kernel.0 * kernel.1;
        let weight = store.get(
            &format!("{name}.weight"),
            &[out_c, in_c, kernel.0, kernel.1],
            Init::HeNormal { fan_in },
        )?;
        Ok(Self {
            weight,
            stride,
            padding,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(pad(x, self.padding)?.conv2d(&self.weight, 0, self.stride, 1, 1)?)
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm {
    gamma: Var,
    beta: Var,
    running_mean: Var,
    running_var: Var,
    eps: f64,
    momentum: f64,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Result<Self> {
        Ok(Self {
            gamma: store.get(&format!("{name}.gamma"), &[channels], Init::Ones)?,
            beta: store.get(&format!("{name}.beta"), &[channels], Init::Zeros)?,
            running_mean: store.get(&format!("{name}.running_mean"), &[channels], Init::Zeros)?,
            running_var: store.get(&format!("{name}.running_var"), &[channels], Init::Ones)?,
            eps: 1e-3,
            momentum: 0.99,
        })
    }

    pub fn forward(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        let c = x.dim(1)?;
        let as_channel = |t: &Tensor| t.reshape((1, c, 1, 1));
        match phase {
            Phase::Eval => {
                let scale = (self.gamma.as_tensor() / (self.running_var.as_tensor() + self.eps)?.sqrt()?)?;
                let shift = (self.beta.as_tensor() - (self.running_mean.as_tensor() * &scale)?)?;
                Ok(x.broadcast_mul(&as_channel(&scale)?)?
                    .broadcast_add(&as_channel(&shift)?)?)
            }
            Phase::Train | Phase::Calibrate => {
                let flat = x.transpose(0, 1)?.contiguous()?.flatten_from(1)?;
                let mean = flat.mean_keepdim(D::Minus1)?;
                let centered = flat.broadcast_sub(&mean)?;
                let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
                let m = if phase == Phase::Calibrate { 0.0 } else { self.momentum };
                let mean_d = mean.flatten_all()?.detach();
                let var_d = var.flatten_all()?.detach();
                self.running_mean
                    .set(&((self.running_mean.as_tensor() * m)? + (mean_d * (1.0 - m))?)?)?;
                self.running_var
                    .set(&((self.running_var.as_tensor() * m)? + (var_d * (1.0 - m))?)?)?;
                let inv = (var + self.eps)?.sqrt()?.recip()?;
                let scale = inv.flatten_all()?.mul(self.gamma.as_tensor())?;
                let shift = (self.beta.as_tensor() - (mean.flatten_all()? * &scale)?)?;
                Ok(x.broadcast_mul(&as_channel(&scale)?)?
                    .broadcast_add(&as_channel(&shift)?)?)
            }
        }
    }
}

/// Convolution, batch norm, optional ReLU.
#[derive(Debug, Clone)]
pub struct ConvBn {
    conv: Conv2d,
    bn: BatchNorm,
    relu: bool,
}

impl ConvBn {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_c: usize,
        out_c: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: Padding,
        relu: bool,
    ) -> Result<Self> {
        Ok(Self {
            conv: Conv2d::new(store, &format!("{name}.conv"), in_c, out_c, kernel, stride, padding)?,
            bn: BatchNorm::new(store, &format!("{name}.bn"), out_c)?,
            relu,
        })
    }

    pub fn forward(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        let y = self.bn.forward(&self.conv.forward(x)?, phase)?;
        Ok(if self.relu { y.relu()? } else { y })
    }
}

/// 3x3 depthwise (same padding) followed by a 1x1 pointwise projection.
#[derive(Debug, Clone)]
pub struct SeparableConv2d {
    depthwise: Var,
    pointwise: Conv2d,
}

impl SeparableConv2d {
    pub fn new(store: &mut ParamStore, name: &str, in_c: usize, out_c: usize) -> Result<Self> {
        let depthwise = store.get(
            &format!("{name}.depthwise"),
            &[in_c, 1, 3, 3],
            Init::HeNormal { fan_in: 9 },
        )?;
        let pointwise =
            Conv2d::new(store, &format!("{name}.pointwise"), in_c, out_c, (1, 1), 1, symmetric(0))?;
        Ok(Self {
            depthwise,
            pointwise,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = depthwise_conv2d(x, &self.depthwise, 1, symmetric(1))?;
        self.pointwise.forward(&y)
    }
}

/// Keras-style "same" 3x3/2 max pooling.
pub fn max_pool_same(x: &Tensor) -> Result<Tensor> {
    let (h, w) = (x.dim(2)?, x.dim(3)?);
    let (t, b) = same_padding(h, 3, 2);
    let (l, r) = same_padding(w, 3, 2);
    Ok(max_pool2d(x, 3, 2, (t, l, b, r))?)
}

/// Unpadded 3x3/2 max pooling.
pub fn max_pool_valid(x: &Tensor) -> Result<Tensor> {
    Ok(max_pool2d(x, 3, 2, symmetric(0))?)
}

/// 3x3/1 average pooling with zero padding counted in the divisor.
pub fn avg_pool_3x3(x: &Tensor) -> Result<Tensor> {
    let c = x.dim(1)?;
    let kernel = Tensor::full(1.0f32 / 9.0, (c, 1, 3, 3), x.device())?;
    Ok(depthwise_conv2d(x, &kernel, 1, symmetric(1))?)
}

pub fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    Ok(x.mean(D::Minus1)?.mean(D::Minus1)?)
}

/// Fully connected layer producing class scores.
#[derive(Debug, Clone)]
pub struct Linear {
    weight: Var,
    bias: Var,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, in_f: usize, out_f: usize) -> Result<Self> {
        Ok(Self {
            weight: store.get(
                &format!("{name}.weight"),
                &[out_f, in_f],
                Init::GlorotUniform {
                    fan_in: in_f,
                    fan_out: out_f,
                },
            )?,
            bias: store.get(&format!("{name}.bias"), &[out_f], Init::Zeros)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.matmul(&self.weight.as_tensor().t()?)?
            .broadcast_add(self.bias.as_tensor())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    #[test]
    fn batch_norm_train_normalizes_and_updates_stats() {
        let mut store = ParamStore::new(0);
        let bn = BatchNorm::new(&mut store, "bn", 2).unwrap();
        let x = Tensor::from_vec(
            vec![1f32, 3., 5., 7., 10., 10., 10., 10.],
            (2, 2, 1, 2),
            &Device::Cpu,
        )
        .unwrap();
        let y = bn.forward(&x, Phase::Train).unwrap();
        let ch0: Vec<f32> = y.narrow(1, 0, 1).unwrap().flatten_all().unwrap().to_vec1().unwrap();
        let mean: f32 = ch0.iter().sum::<f32>() / 4.0;
        assert!(mean.abs() < 1e-5);
        let rm = store.var("bn.running_mean").unwrap().as_tensor().to_vec1::<f32>().unwrap();
        // channel 0 values 1,3,10,10 -> mean 6 -> 0.01 * 6
        assert!((rm[0] - 0.06).abs() < 1e-6);
    }

    #[test]
    fn eval_batch_norm_with_default_stats_is_near_identity() {
        let mut store = ParamStore::new(0);
        let bn = BatchNorm::new(&mut store, "bn", 1).unwrap();
        let x = Tensor::new(&[[[[2f32]]]], &Device::Cpu).unwrap();
        let y = bn.forward(&x, Phase::Eval).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert!((y[0] - 2.0 / (1.001f32).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn avg_pool_counts_padding() {
        let x = Tensor::ones((1, 1, 3, 3), candle_core::DType::F32, &Device::Cpu).unwrap();
        let y = avg_pool_3x3(&x).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert!((y[0] - 4.0 / 9.0).abs() < 1e-6);
        assert!((y[4] - 1.0).abs() < 1e-6);
    }
}
