use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::tensor::{conv_out_extent, conv_transpose_out_extent, Result, Tape, Tensor, TensorError, Var};

/// Standard deviation of the normal initializer for (transposed) convolutions.
pub const CONV_INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

/// Named, ordered list of parameter tensors updated by one optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    pub name: String,
    pub params: Vec<Param>,
}

impl ParamGroup {
    pub fn new(name: impl Into<String>) -> Self {
        ParamGroup { name: name.into(), params: Vec::new() }
    }

    /// Places every parameter on `tape`, differentiable only when `trainable`.
    pub fn bind<'t>(&self, tape: &'t Tape, trainable: bool) -> Vec<Var<'t>> {
        self.params
            .iter()
            .map(|p| if trainable { tape.leaf(p.value.clone()) } else { tape.constant(p.value.clone()) })
            .collect()
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.params.iter().map(|p| p.value.shape().to_vec()).collect()
    }

    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    fn push(&mut self, name: String, value: Tensor) -> usize {
        self.params.push(Param { name, value });
        self.params.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply<'t>(&self, x: Var<'t>) -> Var<'t> {
        match *self {
            Activation::Relu => x.relu(),
            Activation::LeakyRelu(alpha) => x.leaky_relu(alpha),
            Activation::Sigmoid => x.sigmoid(),
            Activation::Tanh => x.tanh(),
        }
    }
}

/// One network layer. Parameterized layers hold indices into their [`ParamGroup`].
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense { weight: usize, bias: usize, inputs: usize, outputs: usize },
    Conv2d { kernel: usize, bias: usize, in_channels: usize, out_channels: usize, size: usize, stride: usize, pad: usize },
    ConvTranspose2d { kernel: usize, bias: usize, in_channels: usize, out_channels: usize, size: usize, stride: usize, pad: usize },
    Activation(Activation),
}

impl Layer {
    pub fn forward<'t>(&self, x: Var<'t>, params: &[Var<'t>]) -> Result<Var<'t>> {
        match *self {
            Layer::Dense { weight, bias, .. } => dense_forward(x, params[weight], params[bias]),
            Layer::Conv2d { kernel, bias, stride, pad, .. } => {
                x.conv2d(params[kernel], stride, pad)?.channel_bias(params[bias])
            }
            Layer::ConvTranspose2d { kernel, bias, stride, pad, .. } => {
                x.conv_transpose2d(params[kernel], stride, pad)?.channel_bias(params[bias])
            }
            Layer::Activation(a) => Ok(a.apply(x)),
        }
    }

    /// Output shape for a given input shape, without running the layer.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = || TensorError::dim("Layer::output_shape", format!("{self:?} cannot take input {input:?}"));
        match *self {
            Layer::Dense { inputs, outputs, .. } => match input {
                [n, i] if *i == inputs => Ok(vec![*n, outputs]),
                _ => Err(mismatch()),
            },
            Layer::Conv2d { in_channels, out_channels, size, stride, pad, .. } => match input {
                [n, c, h, w] if *c == in_channels => Ok(vec![
                    *n,
                    out_channels,
                    conv_out_extent(*h, size, stride, pad)?,
                    conv_out_extent(*w, size, stride, pad)?,
                ]),
                _ => Err(mismatch()),
            },
            Layer::ConvTranspose2d { in_channels, out_channels, size, stride, pad, .. } => match input {
                [n, c, h, w] if *c == in_channels => Ok(vec![
                    *n,
                    out_channels,
                    conv_transpose_out_extent(*h, size, stride, pad)?,
                    conv_transpose_out_extent(*w, size, stride, pad)?,
                ]),
                _ => Err(mismatch()),
            },
            Layer::Activation(_) => Ok(input.to_vec()),
        }
    }
}

/// x·W + b with `b` broadcast over rows.
pub fn dense_forward<'t>(x: Var<'t>, weight: Var<'t>, bias: Var<'t>) -> Result<Var<'t>> {
    x.matmul(weight)?.add(bias)
}

pub fn forward_all<'t>(layers: &[Layer], mut x: Var<'t>, params: &[Var<'t>]) -> Result<Var<'t>> {
    for layer in layers {
        x = layer.forward(x, params)?;
    }
    Ok(x)
}

pub fn normal_init<R: Rng + ?Sized>(shape: &[usize], std: f64, rng: &mut R) -> Tensor {
    let dist = Normal::new(0.0, std).expect("finite positive std");
    let data = (0..shape.iter().product()).map(|_| dist.sample(rng)).collect();
    Tensor::new(shape.to_vec(), data).expect("sized from shape")
}

/// He/Kaiming uniform: U(−b, b) with b = √(6 / fan_in).
pub fn kaiming_uniform<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("valid bound");
    let data = (0..shape.iter().product()).map(|_| dist.sample(rng)).collect();
    Tensor::new(shape.to_vec(), data).expect("sized from shape")
}

/// Allocates and initializes layers into one parameter group.
///
/// Convolution kernels default to N(0, [`CONV_INIT_STD`]²); dense weights use
/// Kaiming-uniform.
pub struct GroupBuilder<'r, R: Rng> {
    group: ParamGroup,
    rng: &'r mut R,
    kaiming_convs: bool,
}

impl<'r, R: Rng> GroupBuilder<'r, R> {
    pub fn new(name: impl Into<String>, rng: &'r mut R) -> Self {
        GroupBuilder { group: ParamGroup::new(name), rng, kaiming_convs: false }
    }

    /// Initializes convolution kernels with Kaiming-uniform by effective fan-in instead.
    pub fn kaiming_convs(mut self) -> Self {
        self.kaiming_convs = true;
        self
    }

    fn conv_kernel(&mut self, shape: [usize; 4], fan_in: usize) -> Tensor {
        if self.kaiming_convs {
            kaiming_uniform(&shape, fan_in, self.rng)
        } else {
            normal_init(&shape, CONV_INIT_STD, self.rng)
        }
    }

    pub fn dense(&mut self, name: &str, inputs: usize, outputs: usize) -> Layer {
        let w = kaiming_uniform(&[inputs, outputs], inputs, self.rng);
        let weight = self.group.push(format!("{name}.weight"), w);
        let bias = self.group.push(format!("{name}.bias"), Tensor::zeros(&[outputs]));
        Layer::Dense { weight, bias, inputs, outputs }
    }

    pub fn conv2d(&mut self, name: &str, cin: usize, cout: usize, size: usize, stride: usize, pad: usize) -> Layer {
        let k = self.conv_kernel([cout, cin, size, size], cin * size * size);
        let kernel = self.group.push(format!("{name}.weight"), k);
        let bias = self.group.push(format!("{name}.bias"), Tensor::zeros(&[cout]));
        Layer::Conv2d { kernel, bias, in_channels: cin, out_channels: cout, size, stride, pad }
    }

    pub fn conv_transpose2d(
        &mut self,
        name: &str,
        cin: usize,
        cout: usize,
        size: usize,
        stride: usize,
        pad: usize,
    ) -> Layer {
        // each output pixel sees about (size/stride)² taps per input channel
        let k = self.conv_kernel([cin, cout, size, size], (cin * size * size / (stride * stride).max(1)).max(1));
        let kernel = self.group.push(format!("{name}.weight"), k);
        let bias = self.group.push(format!("{name}.bias"), Tensor::zeros(&[cout]));
        Layer::ConvTranspose2d { kernel, bias, in_channels: cin, out_channels: cout, size, stride, pad }
    }

    /// Zeroes a layer's weight tensor, e.g. so a residual branch starts as a no-op.
    pub fn zero_weights(&mut self, layer: &Layer) {
        let idx = match *layer {
            Layer::Dense { weight, .. } => weight,
            Layer::Conv2d { kernel, .. } | Layer::ConvTranspose2d { kernel, .. } => kernel,
            Layer::Activation(_) => return,
        };
        let p = &mut self.group.params[idx];
        p.value = Tensor::zeros(p.value.shape());
    }

    pub fn finish(self) -> ParamGroup {
        self.group
    }
}
