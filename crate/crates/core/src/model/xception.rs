//! Xception: an entry flow of strided residual blocks, eight identical
//! middle-flow blocks at 728 channels, and an exit flow widening to 2048.
//! Every convolution after the stem is depthwise separable.

use candle_core::Tensor;

use super::backbone::{Stage, Stages, Widths};
use super::layers::{max_pool_same, symmetric, BatchNorm, ConvBn, Phase, SeparableConv2d};
use super::params::ParamStore;
use crate::error::Result;

#[derive(Debug)]
struct Stem {
    conv1: ConvBn,
    conv2: ConvBn,
}

impl Stage for Stem {
    fn forward(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        self.conv2.forward(&self.conv1.forward(x, phase)?, phase)
    }
}

#[derive(Debug)]
struct SepBn {
    relu_before: bool,
    sep: SeparableConv2d,
    bn: BatchNorm,
}

impl SepBn {
    fn new(store: &mut ParamStore, name: &str, in_c: usize, out_c: usize, relu_before: bool) -> Result<Self> {
        Ok(Self {
            relu_before,
            sep: SeparableConv2d::new(store, &format!("{name}.sepconv"), in_c, out_c)?,
            bn: BatchNorm::new(store, &format!("{name}.bn"), out_c)?,
        })
    }

    fn forward(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        let x = if self.relu_before { x.relu()? } else { x.clone() };
        self.bn.forward(&self.sep.forward(&x)?, phase)
    }
}

/// Two separable convs, a strided max pool, and a strided 1x1 shortcut.
#[derive(Debug)]
struct DownBlock {
    shortcut: ConvBn,
    first: SepBn,
    second: SepBn,
}

impl DownBlock {
    fn new(
        store: &mut ParamStore,
        name: &str,
        in_c: usize,
        mid_c: usize,
        out_c: usize,
        relu_first: bool,
    ) -> Result<Self> {
        Ok(Self {
            shortcut: ConvBn::new(store, &format!("{name}.shortcut"), in_c, out_c, (1, 1), 2, symmetric(0), false)?,
            first: SepBn::new(store, &format!("{name}.sep1"), in_c, mid_c, relu_first)?,
            second: SepBn::new(store, &format!("{name}.sep2"), mid_c, out_c, true)?,
        })
    }
}

impl Stage for DownBlock {
    fn forward(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        let residual = self.shortcut.forward(x, phase)?;
        let y = self.second.forward(&self.first.forward(x, phase)?, phase)?;
        Ok((max_pool_same(&y)? + residual)?)
    }
}

#[derive(Debug)]
struct MiddleBlock {
    convs: [SepBn; 3],
}

impl Stage for MiddleBlock {
    fn forward(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        let mut y = x.clone();
        for conv in &self.convs {
            y = conv.forward(&y, phase)?;
        }
        Ok((y + x)?)
    }
}

#[derive(Debug)]
struct ExitConvs {
    first: SepBn,
    second: SepBn,
}

impl Stage for ExitConvs {
    fn forward(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        let y = self.first.forward(x, phase)?.relu()?;
        Ok(self.second.forward(&y, phase)?.relu()?)
    }
}

pub(super) fn build(
    store: &mut ParamStore,
    widths: Widths,
) -> Result<(Stages, usize)> {
    let w = |c| widths.scale(c);
    let mut stages: Stages = Vec::new();
    let p = "backbone";

    stages.push((
        "block1".into(),
        Box::new(Stem {
            conv1: ConvBn::new(store, &format!("{p}.block1.conv1"), 3, w(32), (3, 3), 2, symmetric(0), true)?,
            conv2: ConvBn::new(store, &format!("{p}.block1.conv2"), w(32), w(64), (3, 3), 1, symmetric(0), true)?,
        }),
    ));

    let mut c = w(64);
    for (i, out, relu_first) in [(2, 128, false), (3, 256, true), (4, 728, true)] {
        let name = format!("block{i}");
        let block = DownBlock::new(store, &format!("{p}.{name}"), c, w(out), w(out), relu_first)?;
        stages.push((name, Box::new(block)));
        c = w(out);
    }

    for i in 5..=12 {
        let name = format!("block{i}");
        let mk = |store: &mut ParamStore, j: usize| {
            SepBn::new(store, &format!("{p}.{name}.sep{j}"), c, c, true)
        };
        let block = MiddleBlock {
            convs: [mk(store, 1)?, mk(store, 2)?, mk(store, 3)?],
        };
        stages.push((name, Box::new(block)));
    }

    let block13 = DownBlock::new(store, &format!("{p}.block13"), c, w(728), w(1024), true)?;
    stages.push(("block13".into(), Box::new(block13)));

    let block14 = ExitConvs {
        first: SepBn::new(store, &format!("{p}.block14.sep1"), w(1024), w(1536), false)?,
        second: SepBn::new(store, &format!("{p}.block14.sep2"), w(1536), w(2048), false)?,
    };
    stages.push(("block14".into(), Box::new(block14)));

    Ok((stages, w(2048)))
}
