use rand::Rng;

use crate::nn::{forward_all, Activation, GroupBuilder, Layer};
use crate::tensor::{Result, Var};

pub(crate) const LEAKY_SLOPE: f64 = 0.2;
/// Spatial extent at the bottleneck of the conv stacks.
pub(crate) const BOTTLENECK: usize = 4;

/// Number of stride-2 stages taking `image_size` down to the bottleneck.
pub(crate) fn down_levels(image_size: usize) -> usize {
    (image_size / BOTTLENECK).trailing_zeros() as usize
}

fn width(base: usize, level: usize) -> usize {
    base << level
}

/// Stride-2 4×4 conv stack from `cin` channels at full size down to 4×4.
/// Returns the layers and the channel count at the bottleneck.
pub(crate) fn conv_down<R: Rng>(
    b: &mut GroupBuilder<'_, R>,
    prefix: &str,
    cin: usize,
    base: usize,
    levels: usize,
) -> (Vec<Layer>, usize) {
    let mut layers = Vec::new();
    let mut c = cin;
    for l in 0..levels {
        let out = width(base, l);
        layers.push(b.conv2d(&format!("{prefix}.conv{l}"), c, out, 4, 2, 1));
        layers.push(Layer::Activation(Activation::LeakyRelu(LEAKY_SLOPE)));
        c = out;
    }
    (layers, c)
}

/// Mirror of [`conv_down`]: transposed convs from the bottleneck to full size
/// ending in `cout` channels with no final activation.
pub(crate) fn conv_up<R: Rng>(
    b: &mut GroupBuilder<'_, R>,
    prefix: &str,
    base: usize,
    levels: usize,
    cout: usize,
) -> Vec<Layer> {
    let mut layers = Vec::new();
    for l in (0..levels).rev() {
        let cin = width(base, l);
        let out = if l == 0 { cout } else { width(base, l - 1) };
        layers.push(b.conv_transpose2d(&format!("{prefix}.deconv{l}"), cin, out, 4, 2, 1));
        if l != 0 {
            layers.push(Layer::Activation(Activation::LeakyRelu(LEAKY_SLOPE)));
        }
    }
    layers
}

/// Channel count at the bottleneck of a `levels`-deep stack.
pub(crate) fn bottleneck_channels(base: usize, levels: usize) -> usize {
    width(base, levels.saturating_sub(1))
}

/// Dense projection to the bottleneck, reshape to `[N, C, 4, 4]`, then the
/// transposed-conv stack and tanh.
pub(crate) struct ImageDecoder {
    pub project: Layer,
    pub up: Vec<Layer>,
    pub channels: usize,
}

impl ImageDecoder {
    pub fn new<R: Rng>(
        b: &mut GroupBuilder<'_, R>,
        prefix: &str,
        inputs: usize,
        base: usize,
        levels: usize,
        cout: usize,
    ) -> Self {
        let channels = bottleneck_channels(base, levels);
        let project = b.dense(&format!("{prefix}.project"), inputs, channels * BOTTLENECK * BOTTLENECK);
        let up = conv_up(b, prefix, base, levels, cout);
        ImageDecoder { project, up, channels }
    }

    pub fn forward<'t>(&self, z: Var<'t>, params: &[Var<'t>]) -> Result<Var<'t>> {
        let n = z.shape()[0];
        let h = self.project.forward(z, params)?.reshape(&[n, self.channels, BOTTLENECK, BOTTLENECK])?;
        let h = h.leaky_relu(LEAKY_SLOPE);
        Ok(forward_all(&self.up, h, params)?.tanh())
    }
}

/// Conv stack to the bottleneck, flattened to `[N, C·16]`.
pub(crate) struct ImageEncoder {
    pub down: Vec<Layer>,
    pub features: usize,
}

impl ImageEncoder {
    pub fn new<R: Rng>(b: &mut GroupBuilder<'_, R>, prefix: &str, cin: usize, base: usize, levels: usize) -> Self {
        let (down, c) = conv_down(b, prefix, cin, base, levels);
        ImageEncoder { down, features: c * BOTTLENECK * BOTTLENECK }
    }

    pub fn forward<'t>(&self, x: Var<'t>, params: &[Var<'t>]) -> Result<Var<'t>> {
        let n = x.shape()[0];
        forward_all(&self.down, x, params)?.reshape(&[n, self.features])
    }
}
