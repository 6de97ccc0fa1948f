//! InceptionV3: a convolutional stem followed by eleven multi-branch mixed
//! blocks whose branch outputs are concatenated along channels. Large
//! kernels are factorized into 1xn / nx1 pairs.

use candle_core::Tensor;

use super::backbone::{Stage, Stages, Widths};
use super::layers::{avg_pool_3x3, max_pool_valid, symmetric, ConvBn, Padding, Phase};
use super::params::ParamStore;
use crate::error::Result;

/// conv + BN + ReLU with `(kh, kw)` kernel and the given padding.
fn basic(
    store: &mut ParamStore,
    name: &str,
    in_c: usize,
    out_c: usize,
    kernel: (usize, usize),
    stride: usize,
    padding: Padding,
) -> Result<ConvBn> {
    ConvBn::new(store, name, in_c, out_c, kernel, stride, padding, true)
}

/// Padding that keeps spatial size for an odd `(kh, kw)` kernel at stride 1.
fn keep(kernel: (usize, usize)) -> Padding {
    let (ph, pw) = (kernel.0 / 2, kernel.1 / 2);
    (ph, pw, ph, pw)
}

fn chain(convs: &[ConvBn], x: &Tensor, phase: Phase) -> Result<Tensor> {
    let mut y = x.clone();
    for conv in convs {
        y = conv.forward(&y, phase)?;
    }
    Ok(y)
}

fn cat(parts: &[Tensor]) -> Result<Tensor> {
    Ok(Tensor::cat(parts, 1)?)
}

#[derive(Debug)]
struct StemStage {
    before_pool1: Vec<ConvBn>,
    before_pool2: Vec<ConvBn>,
}

impl Stage for StemStage {
    fn forward(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        let y = max_pool_valid(&chain(&self.before_pool1, x, phase)?)?;
        max_pool_valid(&chain(&self.before_pool2, &y, phase)?)
    }
}

#[derive(Debug)]
struct InceptionA {
    b1: ConvBn,
    b5: Vec<ConvBn>,
    b3dbl: Vec<ConvBn>,
    pool: ConvBn,
}

impl Stage for InceptionA {
    fn forward(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        cat(&[
            self.b1.forward(x, phase)?,
            chain(&self.b5, x, phase)?,
            chain(&self.b3dbl, x, phase)?,
            self.pool.forward(&avg_pool_3x3(x)?, phase)?,
        ])
    }
}

#[derive(Debug)]
struct InceptionB {
    b3: ConvBn,
    b3dbl: Vec<ConvBn>,
}

impl Stage for InceptionB {
    fn forward(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        cat(&[
            self.b3.forward(x, phase)?,
            chain(&self.b3dbl, x, phase)?,
            max_pool_valid(x)?,
        ])
    }
}

#[derive(Debug)]
struct InceptionC {
    b1: ConvBn,
    b7: Vec<ConvBn>,
    b7dbl: Vec<ConvBn>,
    pool: ConvBn,
}

impl Stage for InceptionC {
    fn forward(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        cat(&[
            self.b1.forward(x, phase)?,
            chain(&self.b7, x, phase)?,
            chain(&self.b7dbl, x, phase)?,
            self.pool.forward(&avg_pool_3x3(x)?, phase)?,
        ])
    }
}

#[derive(Debug)]
struct InceptionD {
    b3: Vec<ConvBn>,
    b7x3: Vec<ConvBn>,
}

impl Stage for InceptionD {
    fn forward(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        cat(&[
            chain(&self.b3, x, phase)?,
            chain(&self.b7x3, x, phase)?,
            max_pool_valid(x)?,
        ])
    }
}

#[derive(Debug)]
struct InceptionE {
    b1: ConvBn,
    b3_stem: ConvBn,
    b3_a: ConvBn,
    b3_b: ConvBn,
    dbl_stem: Vec<ConvBn>,
    dbl_a: ConvBn,
    dbl_b: ConvBn,
    pool: ConvBn,
}

impl Stage for InceptionE {
    fn forward(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        let s = self.b3_stem.forward(x, phase)?;
        let d = chain(&self.dbl_stem, x, phase)?;
        cat(&[
            self.b1.forward(x, phase)?,
            self.b3_a.forward(&s, phase)?,
            self.b3_b.forward(&s, phase)?,
            self.dbl_a.forward(&d, phase)?,
            self.dbl_b.forward(&d, phase)?,
            self.pool.forward(&avg_pool_3x3(x)?, phase)?,
        ])
    }
}

pub(super) fn build(
    store: &mut ParamStore,
    widths: Widths,
) -> Result<(Stages, usize)> {
    let w = |c| widths.scale(c);
    let mut stages: Stages = Vec::new();
    let p = "backbone";
    let v = symmetric(0);

    let n = |s: &str| format!("{p}.stem.{s}");
    let stem = StemStage {
        before_pool1: vec![
            basic(store, &n("conv1a"), 3, w(32), (3, 3), 2, v)?,
            basic(store, &n("conv2a"), w(32), w(32), (3, 3), 1, v)?,
            basic(store, &n("conv2b"), w(32), w(64), (3, 3), 1, symmetric(1))?,
        ],
        before_pool2: vec![
            basic(store, &n("conv3b"), w(64), w(80), (1, 1), 1, v)?,
            basic(store, &n("conv4a"), w(80), w(192), (3, 3), 1, v)?,
        ],
    };
    stages.push(("stem".into(), Box::new(stem)));
    let mut c = w(192);

    for (name, pool_features) in [("mixed_5b", 32), ("mixed_5c", 64), ("mixed_5d", 64)] {
        let n = |s: &str| format!("{p}.{name}.{s}");
        let block = InceptionA {
            b1: basic(store, &n("b1"), c, w(64), (1, 1), 1, v)?,
            b5: vec![
                basic(store, &n("b5_1"), c, w(48), (1, 1), 1, v)?,
                basic(store, &n("b5_2"), w(48), w(64), (5, 5), 1, keep((5, 5)))?,
            ],
            b3dbl: vec![
                basic(store, &n("b3dbl_1"), c, w(64), (1, 1), 1, v)?,
                basic(store, &n("b3dbl_2"), w(64), w(96), (3, 3), 1, keep((3, 3)))?,
                basic(store, &n("b3dbl_3"), w(96), w(96), (3, 3), 1, keep((3, 3)))?,
            ],
            pool: basic(store, &n("pool"), c, w(pool_features), (1, 1), 1, v)?,
        };
        stages.push((name.into(), Box::new(block)));
        c = w(64) + w(64) + w(96) + w(pool_features);
    }

    {
        let n = |s: &str| format!("{p}.mixed_6a.{s}");
        let block = InceptionB {
            b3: basic(store, &n("b3"), c, w(384), (3, 3), 2, v)?,
            b3dbl: vec![
                basic(store, &n("b3dbl_1"), c, w(64), (1, 1), 1, v)?,
                basic(store, &n("b3dbl_2"), w(64), w(96), (3, 3), 1, keep((3, 3)))?,
                basic(store, &n("b3dbl_3"), w(96), w(96), (3, 3), 2, v)?,
            ],
        };
        stages.push(("mixed_6a".into(), Box::new(block)));
        c += w(384) + w(96);
    }

    for (name, c7) in [("mixed_6b", 128), ("mixed_6c", 160), ("mixed_6d", 160), ("mixed_6e", 192)] {
        let n = |s: &str| format!("{p}.{name}.{s}");
        let c7 = w(c7);
        let block = InceptionC {
            b1: basic(store, &n("b1"), c, w(192), (1, 1), 1, v)?,
            b7: vec![
                basic(store, &n("b7_1"), c, c7, (1, 1), 1, v)?,
                basic(store, &n("b7_2"), c7, c7, (1, 7), 1, keep((1, 7)))?,
                basic(store, &n("b7_3"), c7, w(192), (7, 1), 1, keep((7, 1)))?,
            ],
            b7dbl: vec![
                basic(store, &n("b7dbl_1"), c, c7, (1, 1), 1, v)?,
                basic(store, &n("b7dbl_2"), c7, c7, (7, 1), 1, keep((7, 1)))?,
                basic(store, &n("b7dbl_3"), c7, c7, (1, 7), 1, keep((1, 7)))?,
                basic(store, &n("b7dbl_4"), c7, c7, (7, 1), 1, keep((7, 1)))?,
                basic(store, &n("b7dbl_5"), c7, w(192), (1, 7), 1, keep((1, 7)))?,
            ],
            pool: basic(store, &n("pool"), c, w(192), (1, 1), 1, v)?,
        };
        stages.push((name.into(), Box::new(block)));
        c = 4 * w(192);
    }

    {
        let n = |s: &str| format!("{p}.mixed_7a.{s}");
        let block = InceptionD {
            b3: vec![
                basic(store, &n("b3_1"), c, w(192), (1, 1), 1, v)?,
                basic(store, &n("b3_2"), w(192), w(320), (3, 3), 2, v)?,
            ],
            b7x3: vec![
                basic(store, &n("b7x3_1"), c, w(192), (1, 1), 1, v)?,
                basic(store, &n("b7x3_2"), w(192), w(192), (1, 7), 1, keep((1, 7)))?,
                basic(store, &n("b7x3_3"), w(192), w(192), (7, 1), 1, keep((7, 1)))?,
                basic(store, &n("b7x3_4"), w(192), w(192), (3, 3), 2, v)?,
            ],
        };
        stages.push(("mixed_7a".into(), Box::new(block)));
        c += w(320) + w(192);
    }

    for name in ["mixed_7b", "mixed_7c"] {
        let n = |s: &str| format!("{p}.{name}.{s}");
        let block = InceptionE {
            b1: basic(store, &n("b1"), c, w(320), (1, 1), 1, v)?,
            b3_stem: basic(store, &n("b3_1"), c, w(384), (1, 1), 1, v)?,
            b3_a: basic(store, &n("b3_2a"), w(384), w(384), (1, 3), 1, keep((1, 3)))?,
            b3_b: basic(store, &n("b3_2b"), w(384), w(384), (3, 1), 1, keep((3, 1)))?,
            dbl_stem: vec![
                basic(store, &n("b3dbl_1"), c, w(448), (1, 1), 1, v)?,
                basic(store, &n("b3dbl_2"), w(448), w(384), (3, 3), 1, keep((3, 3)))?,
            ],
            dbl_a: basic(store, &n("b3dbl_3a"), w(384), w(384), (1, 3), 1, keep((1, 3)))?,
            dbl_b: basic(store, &n("b3dbl_3b"), w(384), w(384), (3, 1), 1, keep((3, 1)))?,
            pool: basic(store, &n("pool"), c, w(192), (1, 1), 1, v)?,
        };
        stages.push((name.into(), Box::new(block)));
        c = w(320) + 4 * w(384) + w(192);
    }

    Ok((stages, c))
}
