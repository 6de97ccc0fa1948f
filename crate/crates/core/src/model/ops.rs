//! Tensor kernels the stock CPU backend lacks or differentiates poorly:
//! depthwise convolution and padded, strided max pooling.

use candle_core::{CpuStorage, CustomOp1, CustomOp2, Layout, Shape, Tensor};

type CResult<T> = candle_core::Result<T>;

fn contiguous_f32<'a>(storage: &'a CpuStorage, layout: &Layout) -> CResult<&'a [f32]> {
    let data = storage.as_slice::<f32>()?;
    match layout.contiguous_offsets() {
        Some((start, end)) => Ok(&data[start..end]),
        None => candle_core::bail!("kernel input must be contiguous"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Geometry {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad_top: usize,
    pad_left: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn new(
        dims: &[usize],
        kernel: (usize, usize),
        stride: usize,
        pad: (usize, usize, usize, usize),
    ) -> CResult<Self> {
        let &[n, c, h, w] = dims else {
            candle_core::bail!("expected an NCHW tensor, got {dims:?}")
        };
        let (kh, kw) = kernel;
        let (pt, pl, pb, pr) = pad;
        if h + pt + pb < kh || w + pl + pr < kw || stride == 0 {
            candle_core::bail!("window {kernel:?} does not fit input {h}x{w}");
        }
        Ok(Self {
            n,
            c,
            h,
            w,
            kh,
            kw,
            stride,
            pad_top: pt,
            pad_left: pl,
            oh: (h + pt + pb - kh) / stride + 1,
            ow: (w + pl + pr - kw) / stride + 1,
        })
    }

    /// Input coordinate hit by output `(oy, ox)` at kernel offset `(ky, kx)`.
    #[inline]
    fn source(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<(usize, usize)> {
        let iy = (oy * self.stride + ky).checked_sub(self.pad_top)?;
        let ix = (ox * self.stride + kx).checked_sub(self.pad_left)?;
        (iy < self.h && ix < self.w).then_some((iy, ix))
    }

    fn out_shape(&self) -> Shape {
        Shape::from((self.n, self.c, self.oh, self.ow))
    }
}

/// Per-channel convolution with a `(C, 1, kh, kw)` kernel and zero padding.
struct DepthwiseConv {
    stride: usize,
    pad: (usize, usize, usize, usize),
}

impl DepthwiseConv {
    fn geometry(&self, x: &[usize], k: &[usize]) -> CResult<Geometry> {
        let g = Geometry::new(x, (k[2], k[3]), self.stride, self.pad)?;
        if k[0] != g.c || k[1] != 1 {
            candle_core::bail!("depthwise kernel {k:?} does not match {} channels", g.c);
        }
        Ok(g)
    }
}

impl CustomOp2 for DepthwiseConv {
    fn name(&self) -> &'static str {
        "depthwise-conv2d"
    }

    fn cpu_fwd(
        &self,
        s1: &CpuStorage,
        l1: &Layout,
        s2: &CpuStorage,
        l2: &Layout,
    ) -> CResult<(CpuStorage, Shape)> {
        let x = contiguous_f32(s1, l1)?;
        let k = contiguous_f32(s2, l2)?;
        let g = self.geometry(l1.dims(), l2.dims())?;
        let mut out = vec![0f32; g.n * g.c * g.oh * g.ow];
        for nc in 0..g.n * g.c {
            let c = nc % g.c;
            let xin = &x[nc * g.h * g.w..(nc + 1) * g.h * g.w];
            let ker = &k[c * g.kh * g.kw..(c + 1) * g.kh * g.kw];
            let dst = &mut out[nc * g.oh * g.ow..(nc + 1) * g.oh * g.ow];
            for oy in 0..g.oh {
                for ox in 0..g.ow {
                    let mut acc = 0f32;
                    for ky in 0..g.kh {
                        for kx in 0..g.kw {
                            if let Some((iy, ix)) = g.source(oy, ox, ky, kx) {
                                acc += xin[iy * g.w + ix] * ker[ky * g.kw + kx];
                            }
                        }
                    }
                    dst[oy * g.ow + ox] = acc;
                }
            }
        }
        Ok((CpuStorage::F32(out), g.out_shape()))
    }

    fn bwd(
        &self,
        arg: &Tensor,
        kernel: &Tensor,
        _res: &Tensor,
        grad: &Tensor,
    ) -> CResult<(Option<Tensor>, Option<Tensor>)> {
        let g = self.geometry(arg.dims(), kernel.dims())?;
        let x = arg.flatten_all()?.to_vec1::<f32>()?;
        let k = kernel.flatten_all()?.to_vec1::<f32>()?;
        let go = grad.flatten_all()?.to_vec1::<f32>()?;
        let mut gx = vec![0f32; x.len()];
        let mut gk = vec![0f32; k.len()];
        for nc in 0..g.n * g.c {
            let c = nc % g.c;
            let xoff = nc * g.h * g.w;
            let koff = c * g.kh * g.kw;
            let goff = nc * g.oh * g.ow;
            for oy in 0..g.oh {
                for ox in 0..g.ow {
                    let d = go[goff + oy * g.ow + ox];
                    if d == 0.0 {
                        continue;
                    }
                    for ky in 0..g.kh {
                        for kx in 0..g.kw {
                            if let Some((iy, ix)) = g.source(oy, ox, ky, kx) {
                                gx[xoff + iy * g.w + ix] += d * k[koff + ky * g.kw + kx];
                                gk[koff + ky * g.kw + kx] += d * x[xoff + iy * g.w + ix];
                            }
                        }
                    }
                }
            }
        }
        let gx = Tensor::from_vec(gx, arg.shape(), arg.device())?;
        let gk = Tensor::from_vec(gk, kernel.shape(), kernel.device())?;
        Ok((Some(gx), Some(gk)))
    }
}

/// Depthwise 2-D convolution. `pad` is `(top, left, bottom, right)`.
pub fn depthwise_conv2d(
    x: &Tensor,
    kernel: &Tensor,
    stride: usize,
    pad: (usize, usize, usize, usize),
) -> CResult<Tensor> {
    x.contiguous()?
        .apply_op2(&kernel.contiguous()?, DepthwiseConv { stride, pad })
}

/// Max pooling where padded cells never win.
struct MaxPool {
    kernel: usize,
    stride: usize,
    pad: (usize, usize, usize, usize),
}

impl MaxPool {
    fn geometry(&self, dims: &[usize]) -> CResult<Geometry> {
        Geometry::new(dims, (self.kernel, self.kernel), self.stride, self.pad)
    }

    /// Flat input index of each output's maximum (first one on ties).
    fn argmax(&self, g: &Geometry, x: &[f32]) -> Vec<usize> {
        let mut idx = Vec::with_capacity(g.n * g.c * g.oh * g.ow);
        for nc in 0..g.n * g.c {
            let off = nc * g.h * g.w;
            for oy in 0..g.oh {
                for ox in 0..g.ow {
                    let mut best = usize::MAX;
                    let mut best_v = f32::NEG_INFINITY;
                    for ky in 0..g.kh {
                        for kx in 0..g.kw {
                            if let Some((iy, ix)) = g.source(oy, ox, ky, kx) {
                                let v = x[off + iy * g.w + ix];
                                if best == usize::MAX || v > best_v {
                                    best = off + iy * g.w + ix;
                                    best_v = v;
                                }
                            }
                        }
                    }
                    idx.push(best);
                }
            }
        }
        idx
    }
}

impl CustomOp1 for MaxPool {
    fn name(&self) -> &'static str {
        "max-pool2d-padded"
    }

    fn cpu_fwd(&self, storage: &CpuStorage, layout: &Layout) -> CResult<(CpuStorage, Shape)> {
        let x = contiguous_f32(storage, layout)?;
        let g = self.geometry(layout.dims())?;
        let out = self.argmax(&g, x).into_iter().map(|i| x[i]).collect();
        Ok((CpuStorage::F32(out), g.out_shape()))
    }

    fn bwd(&self, arg: &Tensor, _res: &Tensor, grad: &Tensor) -> CResult<Option<Tensor>> {
        let g = self.geometry(arg.dims())?;
        let x = arg.flatten_all()?.to_vec1::<f32>()?;
        let go = grad.flatten_all()?.to_vec1::<f32>()?;
        let mut gx = vec![0f32; x.len()];
        for (o, i) in self.argmax(&g, &x).into_iter().enumerate() {
            gx[i] += go[o];
        }
        Ok(Some(Tensor::from_vec(gx, arg.shape(), arg.device())?))
    }
}

pub fn max_pool2d(
    x: &Tensor,
    kernel: usize,
    stride: usize,
    pad: (usize, usize, usize, usize),
) -> CResult<Tensor> {
    x.contiguous()?.apply_op1(MaxPool {
        kernel,
        stride,
        pad,
    })
}

/// `(before, after)` padding that gives `ceil(size / stride)` outputs, with
/// the odd cell on the trailing side.
pub fn same_padding(size: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = size.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(size);
    (total / 2, total - total / 2)
}
