//! Wengert-list reverse-mode differentiation over the seven op kinds the
//! reconstructor networks are built from.
//!
//! Image-shaped tensors are `[batch, channels, height, width]`. Convolutions
//! are stride 1 with zero "same" padding; resolution only changes through
//! `stride2_downsample` (2x2 mean) and `nearest_upsample2x`.

use rayon::prelude::*;

use super::tensor::Tensor;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Conv2d,
    Stride2Downsample,
    NearestUpsample2x,
    ConcatChannels,
    LeakyRelu,
    Add,
    MseLoss,
}

impl OpKind {
    pub const ALL: [OpKind; 7] = [
        OpKind::Conv2d,
        OpKind::Stride2Downsample,
        OpKind::NearestUpsample2x,
        OpKind::ConcatChannels,
        OpKind::LeakyRelu,
        OpKind::Add,
        OpKind::MseLoss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Conv2d => "conv2d",
            OpKind::Stride2Downsample => "stride2_downsample",
            OpKind::NearestUpsample2x => "nearest_upsample2x",
            OpKind::ConcatChannels => "concat_channels",
            OpKind::LeakyRelu => "leaky_relu",
            OpKind::Add => "add",
            OpKind::MseLoss => "mse_loss",
        }
    }

    fn arity(self) -> usize {
        match self {
            OpKind::Conv2d => 3,
            OpKind::Stride2Downsample | OpKind::NearestUpsample2x | OpKind::LeakyRelu => 1,
            OpKind::ConcatChannels | OpKind::Add | OpKind::MseLoss => 2,
        }
    }
}

/// Per-op attributes. Only `leaky_relu` has one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpAttrs {
    pub slope: f64,
}

impl Default for OpAttrs {
    fn default() -> Self {
        OpAttrs { slope: 0.2 }
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    Conv2d { x: Var, w: Var, b: Var },
    Down(Var),
    Up(Var),
    Concat(Var, Var),
    Leaky(Var, f64),
    Add(Var, Var),
    Mse(Var, Var),
}

impl Op {
    fn kind(&self) -> Option<OpKind> {
        Some(match self {
            Op::Leaf => return None,
            Op::Conv2d { .. } => OpKind::Conv2d,
            Op::Down(_) => OpKind::Stride2Downsample,
            Op::Up(_) => OpKind::NearestUpsample2x,
            Op::Concat(..) => OpKind::ConcatChannels,
            Op::Leaky(..) => OpKind::LeakyRelu,
            Op::Add(..) => OpKind::Add,
            Op::Mse(..) => OpKind::MseLoss,
        })
    }
}

struct Node {
    op: Op,
    shape: Vec<usize>,
    value: Vec<f64>,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    fault: Option<OpKind>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    leaf_sizes: Vec<Option<usize>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `v`. Leaves that require grad but do not
    /// influence the loss get an all-zero gradient.
    pub fn get(&self, v: Var) -> Option<std::borrow::Cow<'_, [f64]>> {
        match (&self.grads[v.0], self.leaf_sizes[v.0]) {
            (Some(g), _) => Some(std::borrow::Cow::Borrowed(g)),
            (None, Some(n)) => Some(std::borrow::Cow::Owned(vec![0.0; n])),
            (None, None) => None,
        }
    }

    /// Adds the gradient of `v` into `t.grad`.
    pub fn accumulate_into(&self, v: Var, t: &mut Tensor) -> Result<()> {
        let g = self
            .get(v)
            .ok_or_else(|| invalid("variable does not require grad"))?;
        if g.len() != t.numel() {
            return Err(Error::ShapeMismatch {
                op: "accumulate_grad",
                left: vec![g.len()],
                right: t.shape().to_vec(),
            });
        }
        t.accumulate_grad(&g);
        Ok(())
    }
}

fn mismatch(kind: OpKind, left: &[usize], right: &[usize]) -> Error {
    Error::ShapeMismatch {
        op: kind.name(),
        left: left.to_vec(),
        right: right.to_vec(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a tensor; it is differentiated iff `t.needs_grad()`.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(Op::Leaf, t.shape().to_vec(), t.data().to_vec(), t.needs_grad())
    }

    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<Var> {
        let t = Tensor::new(shape, data)?;
        Ok(self.leaf(&t))
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        Tensor::new(self.shape(v).to_vec(), self.value(v).to_vec()).expect("recorded shapes are valid")
    }

    /// Makes the backward rule of `kind` wrong by a factor of 1.5. Only for
    /// exercising the gradient checker.
    #[doc(hidden)]
    pub fn inject_backward_fault(&mut self, kind: OpKind) {
        self.fault = Some(kind);
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, value: Vec<f64>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            shape,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, op: Op, inputs: &[Var], shape: Vec<usize>, value: Vec<f64>) -> Result<Var> {
        let kind = op.kind().expect("non-leaf");
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                op: kind.name(),
                node: self.nodes.len(),
            });
        }
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(op, shape, value, rg))
    }

    /// Generic entry point: applies `kind` to `inputs`.
    pub fn apply(&mut self, kind: OpKind, inputs: &[Var], attrs: OpAttrs) -> Result<Var> {
        if inputs.len() != kind.arity() {
            return Err(invalid(format!(
                "{} takes {} inputs, got {}",
                kind.name(),
                kind.arity(),
                inputs.len()
            )));
        }
        match kind {
            OpKind::Conv2d => self.conv2d(inputs[0], inputs[1], inputs[2]),
            OpKind::Stride2Downsample => self.stride2_downsample(inputs[0]),
            OpKind::NearestUpsample2x => self.nearest_upsample2x(inputs[0]),
            OpKind::ConcatChannels => self.concat_channels(inputs[0], inputs[1]),
            OpKind::LeakyRelu => self.leaky_relu(inputs[0], attrs.slope),
            OpKind::Add => self.add(inputs[0], inputs[1]),
            OpKind::MseLoss => self.mse_loss(inputs[0], inputs[1]),
        }
    }

    fn image_shape(&self, kind: OpKind, v: Var) -> Result<[usize; 4]> {
        let s = self.shape(v);
        match s {
            [n, c, h, w] => Ok([*n, *c, *h, *w]),
            _ => Err(Error::ShapeMismatch {
                op: kind.name(),
                left: s.to_vec(),
                right: vec![],
            }),
        }
    }

    /// Same-padded stride-1 convolution. `w` is `[out, in, k, k]` with odd `k`, `b` is `[out]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let kind = OpKind::Conv2d;
        let [n, ci, h, wd] = self.image_shape(kind, x)?;
        let ws = self.shape(w).to_vec();
        let (co, k) = match ws.as_slice() {
            [co, wci, k, k2] if *wci == ci && k == k2 && k % 2 == 1 => (*co, *k),
            _ => return Err(mismatch(kind, self.shape(x), &ws)),
        };
        if self.shape(b) != [co] {
            return Err(mismatch(kind, &ws, self.shape(b)));
        }
        let geo = ConvGeom { ci, co, h, w: wd, k };
        let out = conv_forward(&geo, n, self.value(x), self.value(w), self.value(b));
        self.record(Op::Conv2d { x, w, b }, &[x, w, b], vec![n, co, h, wd], out)
    }

    /// 2x2 mean pooling with stride 2.
    pub fn stride2_downsample(&mut self, x: Var) -> Result<Var> {
        let kind = OpKind::Stride2Downsample;
        let [n, c, h, w] = self.image_shape(kind, x)?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(mismatch(kind, self.shape(x), &[n, c, h / 2, w / 2]));
        }
        let (oh, ow) = (h / 2, w / 2);
        let src = self.value(x);
        let mut out = vec![0.0; n * c * oh * ow];
        for (p, plane) in out.chunks_exact_mut(oh * ow).enumerate() {
            let s = &src[p * h * w..(p + 1) * h * w];
            for y in 0..oh {
                for xx in 0..ow {
                    let i = 2 * y * w + 2 * xx;
                    plane[y * ow + xx] = 0.25 * (s[i] + s[i + 1] + s[i + w] + s[i + w + 1]);
                }
            }
        }
        self.record(Op::Down(x), &[x], vec![n, c, oh, ow], out)
    }

    pub fn nearest_upsample2x(&mut self, x: Var) -> Result<Var> {
        let kind = OpKind::NearestUpsample2x;
        let [n, c, h, w] = self.image_shape(kind, x)?;
        let (oh, ow) = (2 * h, 2 * w);
        let src = self.value(x);
        let mut out = vec![0.0; n * c * oh * ow];
        for (p, plane) in out.chunks_exact_mut(oh * ow).enumerate() {
            let s = &src[p * h * w..(p + 1) * h * w];
            for y in 0..oh {
                for xx in 0..ow {
                    plane[y * ow + xx] = s[(y / 2) * w + xx / 2];
                }
            }
        }
        self.record(Op::Up(x), &[x], vec![n, c, oh, ow], out)
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let kind = OpKind::ConcatChannels;
        let [n, ca, h, w] = self.image_shape(kind, a)?;
        let [nb, cb, hb, wb] = self.image_shape(kind, b)?;
        if (n, h, w) != (nb, hb, wb) {
            return Err(mismatch(kind, self.shape(a), self.shape(b)));
        }
        let plane = h * w;
        let (va, vb) = (self.value(a), self.value(b));
        let mut out = Vec::with_capacity(n * (ca + cb) * plane);
        for i in 0..n {
            out.extend_from_slice(&va[i * ca * plane..(i + 1) * ca * plane]);
            out.extend_from_slice(&vb[i * cb * plane..(i + 1) * cb * plane]);
        }
        self.record(Op::Concat(a, b), &[a, b], vec![n, ca + cb, h, w], out)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        let out = self
            .value(x)
            .iter()
            .map(|&v| if v > 0.0 { v } else { slope * v })
            .collect();
        let shape = self.shape(x).to_vec();
        self.record(Op::Leaky(x, slope), &[x], shape, out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch(OpKind::Add, self.shape(a), self.shape(b)));
        }
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        let shape = self.shape(a).to_vec();
        self.record(Op::Add(a, b), &[a, b], shape, out)
    }

    /// Mean squared difference, a scalar (rank-0) result.
    pub fn mse_loss(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch(OpKind::MseLoss, self.shape(a), self.shape(b)));
        }
        let va = self.value(a);
        let sum: f64 = va.iter().zip(self.value(b)).map(|(x, y)| (x - y) * (x - y)).sum();
        let mean = sum / va.len() as f64;
        self.record(Op::Mse(a, b), &[a, b], vec![], vec![mean])
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let ln = &self.nodes[loss.0];
        if ln.value.len() != 1 {
            return Err(invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                ln.shape
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(gy) = grads[idx].take() else { continue };
            let scale = if node.op.kind() == self.fault { 1.5 } else { 1.0 };
            let send = |v: Var, g: Vec<f64>, grads: &mut Vec<Option<Vec<f64>>>| {
                if !self.nodes[v.0].requires_grad {
                    return;
                }
                let slot = &mut grads[v.0];
                match slot {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += scale * b),
                    None => {
                        *slot = Some(if scale == 1.0 { g } else { g.iter().map(|v| v * scale).collect() })
                    }
                }
            };
            match node.op {
                Op::Leaf => unreachable!(),
                Op::Conv2d { x, w, b } => {
                    let [n, ci, h, wd] = self.image_shape(OpKind::Conv2d, x)?;
                    let ws = self.shape(w);
                    let geo = ConvGeom { ci, co: ws[0], h, w: wd, k: ws[2] };
                    let (gx, gw, gb) = conv_backward(
                        &geo,
                        n,
                        self.value(x),
                        self.value(w),
                        &gy,
                        self.nodes[x.0].requires_grad,
                        self.nodes[w.0].requires_grad || self.nodes[b.0].requires_grad,
                    );
                    if let Some(gx) = gx {
                        send(x, gx, &mut grads);
                    }
                    if let Some((gw, gb)) = gw.zip(gb) {
                        send(w, gw, &mut grads);
                        send(b, gb, &mut grads);
                    }
                }
                Op::Down(x) => {
                    let [_, _, h, w] = self.image_shape(OpKind::Stride2Downsample, x)?;
                    let (oh, ow) = (h / 2, w / 2);
                    let mut gx = vec![0.0; self.nodes[x.0].value.len()];
                    for (p, plane) in gx.chunks_exact_mut(h * w).enumerate() {
                        let g = &gy[p * oh * ow..(p + 1) * oh * ow];
                        for y in 0..h {
                            for xx in 0..w {
                                plane[y * w + xx] = 0.25 * g[(y / 2) * ow + xx / 2];
                            }
                        }
                    }
                    send(x, gx, &mut grads);
                }
                Op::Up(x) => {
                    let [_, _, h, w] = self.image_shape(OpKind::NearestUpsample2x, x)?;
                    let ow = 2 * w;
                    let mut gx = vec![0.0; self.nodes[x.0].value.len()];
                    for (p, plane) in gx.chunks_exact_mut(h * w).enumerate() {
                        let g = &gy[p * 4 * h * w..(p + 1) * 4 * h * w];
                        for y in 0..h {
                            for xx in 0..w {
                                let i = 2 * y * ow + 2 * xx;
                                plane[y * w + xx] = g[i] + g[i + 1] + g[i + ow] + g[i + ow + 1];
                            }
                        }
                    }
                    send(x, gx, &mut grads);
                }
                Op::Concat(a, b) => {
                    let [n, ca, h, w] = self.image_shape(OpKind::ConcatChannels, a)?;
                    let cb = self.shape(b)[1];
                    let plane = h * w;
                    let mut ga = Vec::with_capacity(n * ca * plane);
                    let mut gb = Vec::with_capacity(n * cb * plane);
                    for chunk in gy.chunks_exact((ca + cb) * plane) {
                        ga.extend_from_slice(&chunk[..ca * plane]);
                        gb.extend_from_slice(&chunk[ca * plane..]);
                    }
                    send(a, ga, &mut grads);
                    send(b, gb, &mut grads);
                }
                Op::Leaky(x, slope) => {
                    let gx = self.nodes[x.0]
                        .value
                        .iter()
                        .zip(&gy)
                        .map(|(&v, &g)| if v > 0.0 { g } else { slope * g })
                        .collect();
                    send(x, gx, &mut grads);
                }
                Op::Add(a, b) => {
                    send(a, gy.clone(), &mut grads);
                    send(b, gy, &mut grads);
                }
                Op::Mse(a, b) => {
                    let va = self.value(a);
                    let k = 2.0 * gy[0] / va.len() as f64;
                    let ga: Vec<f64> = va.iter().zip(self.value(b)).map(|(x, y)| k * (x - y)).collect();
                    let gb = ga.iter().map(|v| -v).collect();
                    send(a, ga, &mut grads);
                    send(b, gb, &mut grads);
                }
            }
        }

        let leaf_sizes = self
            .nodes
            .iter()
            .map(|n| (matches!(n.op, Op::Leaf) && n.requires_grad).then_some(n.value.len()))
            .collect();
        Ok(Gradients { grads, leaf_sizes })
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    ci: usize,
    co: usize,
    h: usize,
    w: usize,
    k: usize,
}

impl ConvGeom {
    fn rows(&self) -> usize {
        self.ci * self.k * self.k
    }

    fn plane(&self) -> usize {
        self.h * self.w
    }
}

/// Unfolds one `[ci, h, w]` sample into a `[ci*k*k, h*w]` column matrix.
fn im2col(g: &ConvGeom, x: &[f64], cols: &mut [f64]) {
    let r = (g.k / 2) as isize;
    let plane = g.plane();
    for c in 0..g.ci {
        let xc = &x[c * plane..(c + 1) * plane];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                let dy = ky as isize - r;
                let dx = kx as isize - r;
                for y in 0..g.h {
                    let sy = y as isize + dy;
                    let line = &mut dst[y * g.w..(y + 1) * g.w];
                    if sy < 0 || sy >= g.h as isize {
                        line.iter_mut().for_each(|v| *v = 0.0);
                        continue;
                    }
                    let src = &xc[sy as usize * g.w..(sy as usize + 1) * g.w];
                    for (x, v) in line.iter_mut().enumerate() {
                        let sx = x as isize + dx;
                        *v = if sx < 0 || sx >= g.w as isize { 0.0 } else { src[sx as usize] };
                    }
                }
            }
        }
    }
}

/// Inverse of [`im2col`]: scatters column gradients back onto the sample.
fn col2im(g: &ConvGeom, cols: &[f64], x: &mut [f64]) {
    let r = (g.k / 2) as isize;
    let plane = g.plane();
    for c in 0..g.ci {
        let xc = &mut x[c * plane..(c + 1) * plane];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let src = &cols[row * plane..(row + 1) * plane];
                let dy = ky as isize - r;
                let dx = kx as isize - r;
                for y in 0..g.h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut xc[sy as usize * g.w..(sy as usize + 1) * g.w];
                    for x in 0..g.w {
                        let sx = x as isize + dx;
                        if sx >= 0 && sx < g.w as isize {
                            dst[sx as usize] += src[y * g.w + x];
                        }
                    }
                }
            }
        }
    }
}

/// `c = a · b` for row-major `a: m×k`, `b: k×n`; `ta`/`tb` read the operand transposed.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, c: &mut [f64], beta: f64) {
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slices cover the m×k, k×n and m×n extents addressed by the strides above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn conv_forward(g: &ConvGeom, n: usize, x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let plane = g.plane();
    let in_stride = g.ci * plane;
    let mut out = vec![0.0; n * g.co * plane];
    out.par_chunks_mut(g.co * plane)
        .enumerate()
        .for_each(|(i, o)| {
            let mut cols = vec![0.0; g.rows() * plane];
            im2col(g, &x[i * in_stride..(i + 1) * in_stride], &mut cols);
            for (c, row) in o.chunks_exact_mut(plane).enumerate() {
                row.iter_mut().for_each(|v| *v = b[c]);
            }
            gemm(g.co, g.rows(), plane, w, false, &cols, false, o, 1.0);
        });
    out
}

type ConvGrads = (Option<Vec<f64>>, Option<Vec<f64>>, Option<Vec<f64>>);

/// Per-sample input and weight gradients of one convolution.
type SamplePartials = (Option<Vec<f64>>, Option<Vec<f64>>);

fn conv_backward(
    g: &ConvGeom,
    n: usize,
    x: &[f64],
    w: &[f64],
    gy: &[f64],
    want_x: bool,
    want_w: bool,
) -> ConvGrads {
    let plane = g.plane();
    let in_stride = g.ci * plane;
    let out_stride = g.co * plane;

    // Per-sample partials, reduced afterwards in sample order so results do
    // not depend on scheduling.
    let partials: Vec<SamplePartials> = (0..n)
        .into_par_iter()
        .map(|i| {
            let gyi = &gy[i * out_stride..(i + 1) * out_stride];
            let gx = want_x.then(|| {
                let mut dcols = vec![0.0; g.rows() * plane];
                gemm(g.rows(), g.co, plane, w, true, gyi, false, &mut dcols, 0.0);
                let mut gx = vec![0.0; in_stride];
                col2im(g, &dcols, &mut gx);
                gx
            });
            let gw = want_w.then(|| {
                let mut cols = vec![0.0; g.rows() * plane];
                im2col(g, &x[i * in_stride..(i + 1) * in_stride], &mut cols);
                let mut gw = vec![0.0; g.co * g.rows()];
                gemm(g.co, plane, g.rows(), gyi, false, &cols, true, &mut gw, 0.0);
                gw
            });
            (gx, gw)
        })
        .collect();

    let mut gx_all = want_x.then(|| Vec::with_capacity(n * in_stride));
    let mut gw_all = want_w.then(|| vec![0.0; g.co * g.rows()]);
    for (gx, gw) in partials {
        if let (Some(all), Some(gx)) = (gx_all.as_mut(), gx) {
            all.extend_from_slice(&gx);
        }
        if let (Some(all), Some(gw)) = (gw_all.as_mut(), gw) {
            all.iter_mut().zip(&gw).for_each(|(a, b)| *a += b);
        }
    }
    let gb = want_w.then(|| {
        let mut gb = vec![0.0; g.co];
        for i in 0..n {
            for (c, acc) in gb.iter_mut().enumerate() {
                let off = i * out_stride + c * plane;
                *acc += gy[off..off + plane].iter().sum::<f64>();
            }
        }
        gb
    });
    (gx_all, gw_all, gb)
}
