use std::cell::{Cell, Ref, RefCell};
use std::fmt;

use super::kernels::{self, col2im, gemm_nn, gemm_nt, gemm_tn, im2col, Geometry};
use super::{Result, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Unary {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
    Exp,
    Log,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: usize, b: usize },
    Conv2d { x: usize, k: usize, geom: Geometry, cols: Vec<f64> },
    // `geom` describes the output plane; its window grid is the input plane.
    ConvTranspose2d { x: usize, k: usize, geom: Geometry },
    Binary { a: usize, b: usize, kind: Binary },
    Scale { a: usize, factor: f64 },
    AddScalar { a: usize },
    Unary { a: usize, kind: Unary },
    Clamp { a: usize, lo: f64, hi: f64 },
    Reduce { a: usize, map: Vec<usize>, scale: f64 },
    Reshape { a: usize },
    Concat { inputs: Vec<usize>, axis: usize },
    ChannelBias { x: usize, b: usize },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations for one forward pass. Confined to the thread that owns it.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    track_regions: Cell<bool>,
    regions: RefCell<Vec<u8>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

/// Gradients produced by [`Tape::backward`], indexed by node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    /// Gradient for `var`, or zeros when nothing flowed into it.
    pub fn wrt(&self, var: Var<'_>) -> Tensor {
        self.get(var).cloned().unwrap_or_else(|| Tensor::zeros(&self.shapes[var.id]))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tape that also records which side of every kink (relu, clamp) each
    /// element fell on. Used by the finite-difference checker.
    pub fn with_region_tracking() -> Self {
        let tape = Self::default();
        tape.track_regions.set(true);
        tape
    }

    pub fn region_signature(&self) -> Vec<u8> {
        self.regions.borrow().clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers a differentiable leaf.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// Registers a leaf that receives no gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, requires_grad });
        Var { tape: self, id: nodes.len() - 1 }
    }

    fn value(&self, id: usize) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    fn needs_grad(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    fn record_region(&self, f: impl FnOnce(&mut Vec<u8>)) {
        if self.track_regions.get() {
            f(&mut self.regions.borrow_mut());
        }
    }

    fn check_same_tape(&self, other: &Var<'_>) {
        assert!(std::ptr::eq(self, other.tape), "variables belong to different tapes");
    }

    /// Stacks variables along `axis`; all other extents must agree.
    pub fn concat<'t>(&'t self, vars: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        let Some(first) = vars.first() else {
            return Err(TensorError::arg("concat", "no inputs"));
        };
        vars.iter().for_each(|v| self.check_same_tape(v));
        let base = first.shape();
        if axis >= base.len() {
            return Err(TensorError::arg("concat", format!("axis {axis} out of range for {base:?}")));
        }
        let mut out_shape = base.clone();
        out_shape[axis] = 0;
        for v in vars {
            let s = v.shape();
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(TensorError::dim("concat", format!("{base:?} vs {s:?} along axis {axis}")));
            }
            out_shape[axis] += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let ids: Vec<usize> = vars.iter().map(|v| v.id).collect();
        let data = {
            let nodes = self.nodes.borrow();
            let mut data = Vec::with_capacity(out_shape.iter().product());
            for o in 0..outer {
                for &id in &ids {
                    let t = &nodes[id].value;
                    let chunk = t.shape()[axis] * inner;
                    data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
                }
            }
            data
        };
        let rg = self.needs_grad(&ids);
        Ok(self.push(Tensor::new(out_shape, data)?, Op::Concat { inputs: ids, axis }, rg))
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        self.check_same_tape(&loss);
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id].value;
        if root.numel() != 1 {
            return Err(TensorError::arg(
                "backward",
                format!("loss must be a scalar, got shape {:?}", root.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(Tensor::full(root.shape(), 1.0));
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            if nodes[id].requires_grad {
                propagate(&nodes, id, &g, &mut grads);
            }
            grads[id] = Some(g);
        }
        let shapes = nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate(nodes: &[Node], grads: &mut [Option<Tensor>], id: usize, contribution: Tensor) {
    if !nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(existing) => {
            for (e, c) in existing.data_mut().iter_mut().zip(contribution.data()) {
                *e += c;
            }
        }
        slot => *slot = Some(contribution),
    }
}

fn propagate(nodes: &[Node], id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
    let node = &nodes[id];
    let out = &node.value;
    match &node.op {
        Op::Leaf => {}
        Op::MatMul { a, b } => {
            let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
            let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
            if nodes[*a].requires_grad {
                let mut ga = vec![0.0; m * k];
                gemm_nt(m, n, k, g.data(), bv.data(), &mut ga);
                accumulate(nodes, grads, *a, tensor(av.shape(), ga));
            }
            if nodes[*b].requires_grad {
                let mut gb = vec![0.0; k * n];
                gemm_tn(k, m, n, av.data(), g.data(), &mut gb);
                accumulate(nodes, grads, *b, tensor(bv.shape(), gb));
            }
        }
        Op::Conv2d { x, k, geom, cols } => {
            let (xv, kv) = (&nodes[*x].value, &nodes[*k].value);
            let batch = xv.shape()[0];
            let cout = kv.shape()[0];
            let (rows, ncols) = (geom.col_rows(), geom.col_cols());
            let plane = geom.channels * geom.height * geom.width;
            let mut gk = vec![0.0; kv.numel()];
            let mut gx = vec![0.0; xv.numel()];
            let mut dcols = vec![0.0; rows * ncols];
            for n in 0..batch {
                let g_n = &g.data()[n * cout * ncols..(n + 1) * cout * ncols];
                if nodes[*k].requires_grad {
                    let cols_n = &cols[n * rows * ncols..(n + 1) * rows * ncols];
                    gemm_nt(cout, ncols, rows, g_n, cols_n, &mut gk);
                }
                if nodes[*x].requires_grad {
                    dcols.fill(0.0);
                    gemm_tn(rows, cout, ncols, kv.data(), g_n, &mut dcols);
                    col2im(geom, &dcols, &mut gx[n * plane..(n + 1) * plane]);
                }
            }
            accumulate(nodes, grads, *k, tensor(kv.shape(), gk));
            accumulate(nodes, grads, *x, tensor(xv.shape(), gx));
        }
        Op::ConvTranspose2d { x, k, geom } => {
            let (xv, kv) = (&nodes[*x].value, &nodes[*k].value);
            let batch = xv.shape()[0];
            let cin = kv.shape()[0];
            let (rows, ncols) = (geom.col_rows(), geom.col_cols());
            let out_plane = geom.channels * geom.height * geom.width;
            let mut gk = vec![0.0; kv.numel()];
            let mut gx = vec![0.0; xv.numel()];
            let mut dcols = vec![0.0; rows * ncols];
            for n in 0..batch {
                im2col(geom, &g.data()[n * out_plane..(n + 1) * out_plane], &mut dcols);
                if nodes[*x].requires_grad {
                    let gx_n = &mut gx[n * cin * ncols..(n + 1) * cin * ncols];
                    gemm_nn(cin, rows, ncols, kv.data(), &dcols, gx_n);
                }
                if nodes[*k].requires_grad {
                    let x_n = &xv.data()[n * cin * ncols..(n + 1) * cin * ncols];
                    gemm_nt(cin, ncols, rows, x_n, &dcols, &mut gk);
                }
            }
            accumulate(nodes, grads, *k, tensor(kv.shape(), gk));
            accumulate(nodes, grads, *x, tensor(xv.shape(), gx));
        }
        Op::Binary { a, b, kind } => {
            let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
            let (al, bl) = (av.numel(), bv.numel());
            let mut ga = vec![0.0; al];
            let mut gb = vec![0.0; bl];
            for (i, &gi) in g.data().iter().enumerate() {
                let (ia, ib) = (i % al, i % bl);
                match kind {
                    Binary::Add => {
                        ga[ia] += gi;
                        gb[ib] += gi;
                    }
                    Binary::Sub => {
                        ga[ia] += gi;
                        gb[ib] -= gi;
                    }
                    Binary::Mul => {
                        ga[ia] += gi * bv.data()[ib];
                        gb[ib] += gi * av.data()[ia];
                    }
                }
            }
            accumulate(nodes, grads, *a, tensor(av.shape(), ga));
            accumulate(nodes, grads, *b, tensor(bv.shape(), gb));
        }
        Op::Scale { a, factor } => accumulate(nodes, grads, *a, g.map(|v| v * factor)),
        Op::AddScalar { a } => accumulate(nodes, grads, *a, g.clone()),
        Op::Unary { a, kind } => {
            let x = &nodes[*a].value;
            let data = g
                .data()
                .iter()
                .zip(x.data())
                .zip(out.data())
                .map(|((&gi, &xi), &yi)| match kind {
                    Unary::Relu => {
                        if xi > 0.0 {
                            gi
                        } else {
                            0.0
                        }
                    }
                    Unary::LeakyRelu(alpha) => {
                        if xi > 0.0 {
                            gi
                        } else {
                            alpha * gi
                        }
                    }
                    Unary::Sigmoid => gi * yi * (1.0 - yi),
                    Unary::Tanh => gi * (1.0 - yi * yi),
                    Unary::Exp => gi * yi,
                    Unary::Log => gi / xi,
                    Unary::Neg => -gi,
                })
                .collect();
            accumulate(nodes, grads, *a, tensor(x.shape(), data));
        }
        Op::Clamp { a, lo, hi } => {
            let x = &nodes[*a].value;
            let data = g
                .data()
                .iter()
                .zip(x.data())
                .map(|(&gi, &xi)| if xi >= *lo && xi <= *hi { gi } else { 0.0 })
                .collect();
            accumulate(nodes, grads, *a, tensor(x.shape(), data));
        }
        Op::Reduce { a, map, scale } => {
            let x = &nodes[*a].value;
            let data = map.iter().map(|&o| g.data()[o] * scale).collect();
            accumulate(nodes, grads, *a, tensor(x.shape(), data));
        }
        Op::Reshape { a } => {
            let x = &nodes[*a].value;
            accumulate(nodes, grads, *a, tensor(x.shape(), g.data().to_vec()));
        }
        Op::Concat { inputs, axis } => {
            let shape = out.shape();
            let outer: usize = shape[..*axis].iter().product();
            let inner: usize = shape[axis + 1..].iter().product();
            let mut parts: Vec<Vec<f64>> =
                inputs.iter().map(|&i| Vec::with_capacity(nodes[i].value.numel())).collect();
            let mut offset = 0;
            for _ in 0..outer {
                for (slot, &i) in inputs.iter().enumerate() {
                    let chunk = nodes[i].value.shape()[*axis] * inner;
                    parts[slot].extend_from_slice(&g.data()[offset..offset + chunk]);
                    offset += chunk;
                }
            }
            for (part, &i) in parts.into_iter().zip(inputs) {
                accumulate(nodes, grads, i, tensor(nodes[i].value.shape(), part));
            }
        }
        Op::ChannelBias { x, b } => {
            let xv = &nodes[*x].value;
            let bv = &nodes[*b].value;
            accumulate(nodes, grads, *x, g.clone());
            let s = xv.shape();
            let (n, c, plane) = (s[0], s[1], s[2] * s[3]);
            let per_sample = bv.ndim() == 2;
            let mut gb = vec![0.0; bv.numel()];
            for ni in 0..n {
                for ci in 0..c {
                    let start = (ni * c + ci) * plane;
                    let total: f64 = g.data()[start..start + plane].iter().sum();
                    gb[if per_sample { ni * c + ci } else { ci }] += total;
                }
            }
            accumulate(nodes, grads, *b, tensor(bv.shape(), gb));
        }
    }
}

fn tensor(shape: &[usize], data: Vec<f64>) -> Tensor {
    Tensor::new(shape.to_vec(), data).expect("gradient shape mirrors its node")
}

fn broadcast_shape(a: &Tensor, b: &Tensor) -> Option<Vec<usize>> {
    let (sa, sb) = (a.shape(), b.shape());
    let is_suffix = |small: &[usize], big: &[usize]| {
        small.len() <= big.len() && big[big.len() - small.len()..] == *small
    };
    if sa == sb || b.numel() == 1 && a.numel() >= 1 || is_suffix(sb, sa) {
        Some(sa.to_vec())
    } else if a.numel() == 1 || is_suffix(sa, sb) {
        Some(sb.to_vec())
    } else {
        None
    }
}

/// Output shape and per-input-element output index for a reduction.
fn reduce_map(shape: &[usize], axes: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut keep_stride = vec![0usize; shape.len()];
    let mut out_shape = Vec::new();
    let mut stride = 1;
    for d in (0..shape.len()).rev() {
        if !axes.contains(&d) {
            keep_stride[d] = stride;
            stride *= shape[d];
        }
    }
    for (d, &e) in shape.iter().enumerate() {
        if !axes.contains(&d) {
            out_shape.push(e);
        }
    }
    let numel: usize = shape.iter().product();
    let mut map = Vec::with_capacity(numel);
    let mut coord = vec![0usize; shape.len()];
    for _ in 0..numel {
        map.push(coord.iter().zip(&keep_stride).map(|(c, s)| c * s).sum());
        for d in (0..shape.len()).rev() {
            coord[d] += 1;
            if coord[d] < shape[d] {
                break;
            }
            coord[d] = 0;
        }
    }
    (out_shape, map)
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Tensor {
        self.tape.value(self.id).clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.value(self.id).shape().to_vec()
    }

    pub fn item(&self) -> Result<f64> {
        self.tape.value(self.id).item()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    fn push(&self, value: Tensor, op: Op, inputs: &[usize]) -> Var<'t> {
        let rg = self.tape.needs_grad(inputs);
        self.tape.push(value, op, rg)
    }

    /// Matrix product of [M,K] and [K,N].
    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.tape.check_same_tape(&other);
        let value = {
            let (a, b) = (self.tape.value(self.id), self.tape.value(other.id));
            if a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0] {
                return Err(TensorError::dim(
                    "matmul",
                    format!("cannot multiply {:?} by {:?}", a.shape(), b.shape()),
                ));
            }
            let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
            let mut c = vec![0.0; m * n];
            gemm_nn(m, k, n, a.data(), b.data(), &mut c);
            tensor(&[m, n], c)
        };
        Ok(self.push(value, Op::MatMul { a: self.id, b: other.id }, &[self.id, other.id]))
    }

    /// Cross-correlation of [N,Cin,H,W] with a [Cout,Cin,kH,kW] kernel.
    pub fn conv2d(self, kernel: Var<'t>, stride: usize, pad: usize) -> Result<Var<'t>> {
        self.tape.check_same_tape(&kernel);
        let (value, geom, cols) = {
            let (x, k) = (self.tape.value(self.id), self.tape.value(kernel.id));
            if x.ndim() != 4 || k.ndim() != 4 || x.shape()[1] != k.shape()[1] {
                return Err(TensorError::dim(
                    "conv2d",
                    format!("input {:?} incompatible with kernel {:?}", x.shape(), k.shape()),
                ));
            }
            let (n, cin, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
            let (cout, kh, kw) = (k.shape()[0], k.shape()[2], k.shape()[3]);
            let geom = Geometry {
                channels: cin,
                height: h,
                width: w,
                kh,
                kw,
                stride,
                pad,
                out_h: kernels::conv_out_extent(h, kh, stride, pad)?,
                out_w: kernels::conv_out_extent(w, kw, stride, pad)?,
            };
            let (rows, ncols) = (geom.col_rows(), geom.col_cols());
            let mut cols = vec![0.0; n * rows * ncols];
            let mut out = vec![0.0; n * cout * ncols];
            let plane = cin * h * w;
            for i in 0..n {
                let cols_i = &mut cols[i * rows * ncols..(i + 1) * rows * ncols];
                im2col(&geom, &x.data()[i * plane..(i + 1) * plane], cols_i);
                gemm_nn(cout, rows, ncols, k.data(), cols_i, &mut out[i * cout * ncols..(i + 1) * cout * ncols]);
            }
            (tensor(&[n, cout, geom.out_h, geom.out_w], out), geom, cols)
        };
        let op = Op::Conv2d { x: self.id, k: kernel.id, geom, cols };
        Ok(self.push(value, op, &[self.id, kernel.id]))
    }

    /// Transposed convolution of [N,Cin,H,W] with a [Cin,Cout,kH,kW] kernel.
    pub fn conv_transpose2d(self, kernel: Var<'t>, stride: usize, pad: usize) -> Result<Var<'t>> {
        self.tape.check_same_tape(&kernel);
        let (value, geom) = {
            let (x, k) = (self.tape.value(self.id), self.tape.value(kernel.id));
            if x.ndim() != 4 || k.ndim() != 4 || x.shape()[1] != k.shape()[0] {
                return Err(TensorError::dim(
                    "conv_transpose2d",
                    format!("input {:?} incompatible with kernel {:?}", x.shape(), k.shape()),
                ));
            }
            let (n, cin, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
            let (cout, kh, kw) = (k.shape()[1], k.shape()[2], k.shape()[3]);
            let geom = Geometry {
                channels: cout,
                height: kernels::conv_transpose_out_extent(h, kh, stride, pad)?,
                width: kernels::conv_transpose_out_extent(w, kw, stride, pad)?,
                kh,
                kw,
                stride,
                pad,
                out_h: h,
                out_w: w,
            };
            let (rows, ncols) = (geom.col_rows(), geom.col_cols());
            let out_plane = cout * geom.height * geom.width;
            let mut out = vec![0.0; n * out_plane];
            let mut cols = vec![0.0; rows * ncols];
            for i in 0..n {
                cols.fill(0.0);
                gemm_tn(rows, cin, ncols, k.data(), &x.data()[i * cin * ncols..(i + 1) * cin * ncols], &mut cols);
                col2im(&geom, &cols, &mut out[i * out_plane..(i + 1) * out_plane]);
            }
            (tensor(&[n, cout, geom.height, geom.width], out), geom)
        };
        let op = Op::ConvTranspose2d { x: self.id, k: kernel.id, geom };
        Ok(self.push(value, op, &[self.id, kernel.id]))
    }

    fn binary(self, other: Var<'t>, kind: Binary, name: &'static str) -> Result<Var<'t>> {
        self.tape.check_same_tape(&other);
        let value = {
            let (a, b) = (self.tape.value(self.id), self.tape.value(other.id));
            let shape = broadcast_shape(&a, &b).ok_or_else(|| {
                TensorError::dim(name, format!("shapes {:?} and {:?} do not broadcast", a.shape(), b.shape()))
            })?;
            let numel: usize = shape.iter().product();
            let (al, bl) = (a.numel(), b.numel());
            let data = (0..numel)
                .map(|i| {
                    let (x, y) = (a.data()[i % al], b.data()[i % bl]);
                    match kind {
                        Binary::Add => x + y,
                        Binary::Sub => x - y,
                        Binary::Mul => x * y,
                    }
                })
                .collect();
            tensor(&shape, data)
        };
        Ok(self.push(value, Op::Binary { a: self.id, b: other.id, kind }, &[self.id, other.id]))
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Binary::Add, "add")
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Binary::Sub, "sub")
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Binary::Mul, "mul")
    }

    pub fn square(self) -> Var<'t> {
        self.mul(self).expect("identical shapes broadcast")
    }

    pub fn scale(self, factor: f64) -> Var<'t> {
        let value = self.tape.value(self.id).map(|v| v * factor);
        self.push(value, Op::Scale { a: self.id, factor }, &[self.id])
    }

    pub fn add_scalar(self, c: f64) -> Var<'t> {
        let value = self.tape.value(self.id).map(|v| v + c);
        self.push(value, Op::AddScalar { a: self.id }, &[self.id])
    }

    fn unary(self, kind: Unary) -> Var<'t> {
        let value = {
            let x = self.tape.value(self.id);
            if let Unary::Relu | Unary::LeakyRelu(_) = kind {
                self.tape.record_region(|r| {
                    r.extend(x.data().iter().map(|&v| (v > 0.0) as u8 + (v >= 0.0) as u8))
                });
            }
            x.map(|v| match kind {
                Unary::Relu => v.max(0.0),
                Unary::LeakyRelu(alpha) => {
                    if v > 0.0 {
                        v
                    } else {
                        alpha * v
                    }
                }
                Unary::Sigmoid => {
                    if v >= 0.0 {
                        1.0 / (1.0 + (-v).exp())
                    } else {
                        let e = v.exp();
                        e / (1.0 + e)
                    }
                }
                Unary::Tanh => v.tanh(),
                Unary::Exp => v.exp(),
                Unary::Log => v.ln(),
                Unary::Neg => -v,
            })
        };
        self.push(value, Op::Unary { a: self.id, kind }, &[self.id])
    }

    pub fn relu(self) -> Var<'t> {
        self.unary(Unary::Relu)
    }

    pub fn leaky_relu(self, alpha: f64) -> Var<'t> {
        self.unary(Unary::LeakyRelu(alpha))
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary(Unary::Sigmoid)
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(Unary::Tanh)
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(Unary::Exp)
    }

    pub fn neg(self) -> Var<'t> {
        self.unary(Unary::Neg)
    }

    /// Natural log; every element must be strictly positive.
    pub fn log(self) -> Result<Var<'t>> {
        {
            let x = self.tape.value(self.id);
            if let Some(bad) = x.data().iter().find(|&&v| !(v > 0.0)) {
                return Err(TensorError::Domain {
                    op: "log",
                    detail: format!("non-positive input {bad}"),
                });
            }
        }
        Ok(self.unary(Unary::Log))
    }

    /// Elementwise clamp to [lo, hi]; gradient passes only inside the interval.
    pub fn clamp(self, lo: f64, hi: f64) -> Var<'t> {
        let value = {
            let x = self.tape.value(self.id);
            self.tape.record_region(|r| {
                r.extend(x.data().iter().map(|&v| {
                    (v >= lo) as u8 + (v > lo) as u8 + (v >= hi) as u8 + (v > hi) as u8
                }))
            });
            x.map(|v| v.clamp(lo, hi))
        };
        self.push(value, Op::Clamp { a: self.id, lo, hi }, &[self.id])
    }

    fn reduce(self, axes: Option<&[usize]>, mean: bool) -> Result<Var<'t>> {
        let name = if mean { "mean" } else { "sum" };
        let (value, map, scale) = {
            let x = self.tape.value(self.id);
            let all: Vec<usize> = (0..x.ndim()).collect();
            let axes = axes.unwrap_or(&all);
            for (i, &a) in axes.iter().enumerate() {
                if a >= x.ndim() {
                    return Err(TensorError::arg(name, format!("axis {a} out of range for {:?}", x.shape())));
                }
                if axes[..i].contains(&a) {
                    return Err(TensorError::arg(name, format!("duplicate axis {a}")));
                }
            }
            let (out_shape, map) = reduce_map(x.shape(), axes);
            let count: usize = axes.iter().map(|&a| x.shape()[a]).product();
            let scale = if mean {
                if count == 0 {
                    return Err(TensorError::arg(name, "mean over an empty extent"));
                }
                1.0 / count as f64
            } else {
                1.0
            };
            let mut out = vec![0.0; out_shape.iter().product()];
            for (&o, &v) in map.iter().zip(x.data()) {
                out[o] += v;
            }
            if mean {
                out.iter_mut().for_each(|v| *v *= scale);
            }
            (tensor(&out_shape, out), map, scale)
        };
        Ok(self.push(value, Op::Reduce { a: self.id, map, scale }, &[self.id]))
    }

    /// Sum of all elements, as a shape-[] scalar.
    pub fn sum(self) -> Var<'t> {
        self.reduce(None, false).expect("full reduction is always valid")
    }

    pub fn sum_axes(self, axes: &[usize]) -> Result<Var<'t>> {
        self.reduce(Some(axes), false)
    }

    pub fn mean(self) -> Result<Var<'t>> {
        self.reduce(None, true)
    }

    pub fn mean_axes(self, axes: &[usize]) -> Result<Var<'t>> {
        self.reduce(Some(axes), true)
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let value = self.tape.value(self.id).reshape(shape)?;
        Ok(self.push(value, Op::Reshape { a: self.id }, &[self.id]))
    }

    /// Adds a per-channel bias to [N,C,H,W]; `bias` is [C] or per-sample [N,C].
    pub fn channel_bias(self, bias: Var<'t>) -> Result<Var<'t>> {
        self.tape.check_same_tape(&bias);
        let value = {
            let (x, b) = (self.tape.value(self.id), self.tape.value(bias.id));
            let s = x.shape();
            let ok = s.len() == 4
                && (b.shape() == [s[1]] || (b.ndim() == 2 && b.shape() == [s[0], s[1]]));
            if !ok {
                return Err(TensorError::dim(
                    "channel_bias",
                    format!("bias {:?} does not match input {:?}", b.shape(), s),
                ));
            }
            let (c, plane) = (s[1], s[2] * s[3]);
            let per_sample = b.ndim() == 2;
            let mut data = x.data().to_vec();
            for (chunk_idx, chunk) in data.chunks_mut(plane).enumerate() {
                let (n, ci) = (chunk_idx / c, chunk_idx % c);
                let bv = b.data()[if per_sample { n * c + ci } else { ci }];
                chunk.iter_mut().for_each(|v| *v += bv);
            }
            tensor(s, data)
        };
        Ok(self.push(value, Op::ChannelBias { x: self.id, b: bias.id }, &[self.id, bias.id]))
    }
}
