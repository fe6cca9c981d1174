use std::cell::RefCell;

use ndarray::{ArrayD, Axis, IxDyn};

/// Dynamic-dimension f64 array, the value type of every graph node.
pub type Arr = ArrayD<f64>;

/// Operation record for one node of the Wengert list.
///
/// Every backward rule is expressed in terms of these same primitives, so
/// gradients are themselves graph nodes and can be differentiated again
/// (required by the gradient penalty, which differentiates a gradient norm
/// with respect to the critic parameters).
// Some payload fields record shapes fixed at construction time; the backward
// pass reads shapes from node values instead, so those fields go unread.
#[allow(dead_code)]
#[derive(Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    AddScalar(usize, f64),
    Powf(usize, f64),
    /// Reduce by summation down to the recorded shape (adjoint of broadcast).
    SumTo(usize, Vec<usize>),
    BroadcastTo(usize, Vec<usize>),
    SumAll(usize),
    /// Keep-dims sum over the listed axes.
    SumAxes(usize, Vec<usize>),
    MatMul(usize, usize),
    Transpose2(usize),
    Reshape(usize, Vec<usize>),
    Permute(usize, Vec<usize>),
    Im2Col(usize, ConvGeom),
    Col2Im(usize, ConvGeom),
    LeakyRelu(usize, f64),
    /// Piecewise-constant derivative mask of leaky-relu; zero gradient.
    LreluMask(usize, f64),
    Upsample2x(usize, UpsampleKind, bool),
    ConcatC(Vec<usize>),
    SliceC(usize, usize, usize),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum UpsampleKind {
    Nearest,
    Bilinear,
}

/// Geometry of an im2col lowering: input shape, kernel, stride, zero padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.height + 2 * self.pad - self.kernel) / self.stride + 1
    }
    pub fn out_w(&self) -> usize {
        (self.width + 2 * self.pad - self.kernel) / self.stride + 1
    }
}

struct Node {
    value: Arr,
    op: Op,
}

/// A define-by-run computation tape. Dropped wholesale after each use.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to one node on a tape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Arr, op: Op) -> Var<'_> {
        // Keep every node C-contiguous: `into_shape` on an F-contiguous array
        // reshapes in memory order, which silently scrambles values.
        let value = if value.is_standard_layout() {
            value
        } else {
            value.as_standard_layout().into_owned()
        };
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var {
            tape: self,
            idx: nodes.len() - 1,
        }
    }

    pub fn leaf(&self, value: Arr) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&self, v: f64) -> Var<'_> {
        self.leaf(ArrayD::from_elem(IxDyn(&[]), v))
    }

    pub fn zeros(&self, shape: &[usize]) -> Var<'_> {
        self.leaf(ArrayD::zeros(IxDyn(shape)))
    }

    fn value_of(&self, idx: usize) -> Arr {
        self.nodes.borrow()[idx].value.clone()
    }

    fn shape_of(&self, idx: usize) -> Vec<usize> {
        self.nodes.borrow()[idx].value.shape().to_vec()
    }

    /// Reverse-mode gradients of a scalar `output` with respect to `wrt`.
    ///
    /// The returned gradients are ordinary graph nodes on the same tape, so
    /// they can participate in further computation and be differentiated
    /// again. Nodes created by this sweep have indices above `output` and are
    /// never revisited by it.
    pub fn grad<'t>(&'t self, output: Var<'t>, wrt: &[Var<'t>]) -> Vec<Var<'t>> {
        assert!(
            self.shape_of(output.idx).is_empty(),
            "grad requires a scalar output, got shape {:?}",
            self.shape_of(output.idx)
        );
        let mut adjoint: Vec<Option<Var<'t>>> = vec![None; output.idx + 1];
        adjoint[output.idx] = Some(self.scalar(1.0));
        for idx in (0..=output.idx).rev() {
            let cot = match adjoint[idx] {
                Some(v) => v,
                None => continue,
            };
            let op = self.nodes.borrow()[idx].op.clone();
            for (parent, contrib) in self.vjp(&op, idx, cot) {
                adjoint[parent] = Some(match adjoint[parent] {
                    Some(acc) => acc.add(contrib),
                    None => contrib,
                });
            }
        }
        wrt.iter()
            .map(|v| {
                adjoint
                    .get(v.idx)
                    .copied()
                    .flatten()
                    .unwrap_or_else(|| self.zeros(&self.shape_of(v.idx)))
            })
            .collect()
    }

    fn vjp<'t>(&'t self, op: &Op, idx: usize, cot: Var<'t>) -> Vec<(usize, Var<'t>)> {
        let var = |i: usize| Var { tape: self, idx: i };
        match op {
            Op::Leaf => vec![],
            Op::Add(a, b) => {
                let sa = self.shape_of(*a);
                let sb = self.shape_of(*b);
                vec![(*a, cot.sum_to(&sa)), (*b, cot.sum_to(&sb))]
            }
            Op::Mul(a, b) => {
                let sa = self.shape_of(*a);
                let sb = self.shape_of(*b);
                vec![
                    (*a, cot.mul(var(*b)).sum_to(&sa)),
                    (*b, cot.mul(var(*a)).sum_to(&sb)),
                ]
            }
            Op::Neg(a) => vec![(*a, cot.neg())],
            Op::Scale(a, s) => vec![(*a, cot.scale(*s))],
            Op::AddScalar(a, _) => vec![(*a, cot)],
            Op::Powf(a, p) => {
                let d = var(*a).powf(p - 1.0).scale(*p);
                vec![(*a, cot.mul(d))]
            }
            Op::SumTo(a, _) => {
                let sa = self.shape_of(*a);
                vec![(*a, cot.broadcast_to(&sa))]
            }
            Op::BroadcastTo(a, _) => {
                let sa = self.shape_of(*a);
                vec![(*a, cot.sum_to(&sa))]
            }
            Op::SumAll(a) => {
                let sa = self.shape_of(*a);
                vec![(*a, cot.broadcast_to(&sa))]
            }
            Op::SumAxes(a, _) => {
                let sa = self.shape_of(*a);
                vec![(*a, cot.broadcast_to(&sa))]
            }
            Op::MatMul(a, b) => {
                vec![
                    (*a, cot.matmul(var(*b).transpose2())),
                    (*b, var(*a).transpose2().matmul(cot)),
                ]
            }
            Op::Transpose2(a) => vec![(*a, cot.transpose2())],
            Op::Reshape(a, _) => {
                let sa = self.shape_of(*a);
                vec![(*a, cot.reshape(&sa))]
            }
            Op::Permute(a, axes) => {
                let mut inverse = vec![0usize; axes.len()];
                for (pos, &ax) in axes.iter().enumerate() {
                    inverse[ax] = pos;
                }
                vec![(*a, cot.permute(&inverse))]
            }
            Op::Im2Col(a, geom) => vec![(*a, cot.col2im(*geom))],
            Op::Col2Im(a, geom) => vec![(*a, cot.im2col(*geom))],
            Op::LeakyRelu(a, slope) => vec![(*a, cot.mul(var(*a).lrelu_mask(*slope)))],
            Op::LreluMask(_, _) => vec![],
            Op::Upsample2x(a, kind, adjoint) => {
                vec![(*a, cot.upsample2x_inner(*kind, !*adjoint))]
            }
            Op::ConcatC(parts) => {
                let mut out = Vec::with_capacity(parts.len());
                let mut start = 0usize;
                for &p in parts {
                    let ch = self.shape_of(p)[1];
                    out.push((p, cot.slice_c(start, ch)));
                    start += ch;
                }
                out
            }
            Op::SliceC(a, start, len) => {
                let sa = self.shape_of(*a);
                let mut parts = Vec::new();
                if *start > 0 {
                    let mut s = sa.clone();
                    s[1] = *start;
                    parts.push(self.zeros(&s));
                }
                parts.push(cot);
                let after = sa[1] - start - len;
                if after > 0 {
                    let mut s = sa.clone();
                    s[1] = after;
                    parts.push(self.zeros(&s));
                }
                let full = self.concat_c(&parts);
                let _ = idx;
                vec![(*a, full)]
            }
        }
    }

    pub fn concat_c<'t>(&'t self, parts: &[Var<'t>]) -> Var<'t> {
        assert!(!parts.is_empty());
        let values: Vec<Arr> = parts.iter().map(|p| self.value_of(p.idx)).collect();
        let views: Vec<_> = values.iter().map(|v| v.view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("concat shape mismatch");
        self.push(value, Op::ConcatC(parts.iter().map(|p| p.idx).collect()))
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Arr {
        self.tape.value_of(self.idx)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.shape_of(self.idx)
    }

    pub fn scalar_value(&self) -> f64 {
        let v = self.value();
        assert!(v.shape().is_empty(), "not a scalar: shape {:?}", v.shape());
        v.into_iter().next().unwrap()
    }

    pub fn add(self, other: Var<'t>) -> Var<'t> {
        let (a, b) = (self.value(), other.value());
        let value = broadcast_binop(&a, &b, |x, y| x + y);
        self.tape.push(value, Op::Add(self.idx, other.idx))
    }

    pub fn mul(self, other: Var<'t>) -> Var<'t> {
        let (a, b) = (self.value(), other.value());
        let value = broadcast_binop(&a, &b, |x, y| x * y);
        self.tape.push(value, Op::Mul(self.idx, other.idx))
    }

    pub fn sub(self, other: Var<'t>) -> Var<'t> {
        self.add(other.neg())
    }

    pub fn neg(self) -> Var<'t> {
        let value = self.value().mapv(|x| -x);
        self.tape.push(value, Op::Neg(self.idx))
    }

    pub fn scale(self, s: f64) -> Var<'t> {
        let value = self.value().mapv(|x| x * s);
        self.tape.push(value, Op::Scale(self.idx, s))
    }

    pub fn add_scalar(self, s: f64) -> Var<'t> {
        let value = self.value().mapv(|x| x + s);
        self.tape.push(value, Op::AddScalar(self.idx, s))
    }

    pub fn powf(self, p: f64) -> Var<'t> {
        let value = self.value().mapv(|x| x.powf(p));
        self.tape.push(value, Op::Powf(self.idx, p))
    }

    pub fn square(self) -> Var<'t> {
        self.mul(self)
    }

    pub fn sqrt(self) -> Var<'t> {
        self.powf(0.5)
    }

    /// Sum down to `shape` (right-aligned broadcast adjoint).
    pub fn sum_to(self, shape: &[usize]) -> Var<'t> {
        if self.shape() == shape {
            return self;
        }
        let value = sum_to_shape(&self.value(), shape);
        self.tape.push(value, Op::SumTo(self.idx, shape.to_vec()))
    }

    pub fn broadcast_to(self, shape: &[usize]) -> Var<'t> {
        if self.shape() == shape {
            return self;
        }
        let value = self
            .value()
            .broadcast(IxDyn(shape))
            .expect("broadcast shape mismatch")
            .to_owned();
        self.tape
            .push(value, Op::BroadcastTo(self.idx, shape.to_vec()))
    }

    pub fn sum_all(self) -> Var<'t> {
        let value = ArrayD::from_elem(IxDyn(&[]), self.value().sum());
        self.tape.push(value, Op::SumAll(self.idx))
    }

    pub fn mean_all(self) -> Var<'t> {
        let n = self.value().len() as f64;
        self.sum_all().scale(1.0 / n)
    }

    /// Keep-dims sum over `axes`.
    pub fn sum_axes(self, axes: &[usize]) -> Var<'t> {
        let mut value = self.value();
        for &ax in axes {
            let summed = value.sum_axis(Axis(ax));
            value = summed.insert_axis(Axis(ax));
        }
        self.tape.push(value, Op::SumAxes(self.idx, axes.to_vec()))
    }

    pub fn matmul(self, other: Var<'t>) -> Var<'t> {
        let a = self.value().into_dimensionality::<ndarray::Ix2>().unwrap();
        let b = other.value().into_dimensionality::<ndarray::Ix2>().unwrap();
        let value = a.dot(&b).into_dyn();
        self.tape.push(value, Op::MatMul(self.idx, other.idx))
    }

    pub fn transpose2(self) -> Var<'t> {
        let a = self.value().into_dimensionality::<ndarray::Ix2>().unwrap();
        let value = a.t().to_owned().into_dyn();
        self.tape.push(value, Op::Transpose2(self.idx))
    }

    pub fn reshape(self, shape: &[usize]) -> Var<'t> {
        let value = self
            .value()
            .as_standard_layout()
            .into_owned()
            .into_shape(IxDyn(shape))
            .expect("reshape element count mismatch");
        self.tape.push(value, Op::Reshape(self.idx, shape.to_vec()))
    }

    pub fn permute(self, axes: &[usize]) -> Var<'t> {
        let value = self
            .value()
            .permuted_axes(IxDyn(axes))
            .as_standard_layout()
            .to_owned();
        self.tape.push(value, Op::Permute(self.idx, axes.to_vec()))
    }

    pub fn im2col(self, geom: ConvGeom) -> Var<'t> {
        let value = im2col_value(&self.value(), &geom);
        self.tape.push(value, Op::Im2Col(self.idx, geom))
    }

    pub fn col2im(self, geom: ConvGeom) -> Var<'t> {
        let value = col2im_value(&self.value(), &geom);
        self.tape.push(value, Op::Col2Im(self.idx, geom))
    }

    pub fn leaky_relu(self, slope: f64) -> Var<'t> {
        let value = self.value().mapv(|x| if x >= 0.0 { x } else { slope * x });
        self.tape.push(value, Op::LeakyRelu(self.idx, slope))
    }

    fn lrelu_mask(self, slope: f64) -> Var<'t> {
        let value = self.value().mapv(|x| if x >= 0.0 { 1.0 } else { slope });
        self.tape.push(value, Op::LreluMask(self.idx, slope))
    }

    pub fn upsample2x(self, kind: UpsampleKind) -> Var<'t> {
        self.upsample2x_inner(kind, false)
    }

    fn upsample2x_inner(self, kind: UpsampleKind, adjoint: bool) -> Var<'t> {
        let value = upsample2x_value(&self.value(), kind, adjoint);
        self.tape
            .push(value, Op::Upsample2x(self.idx, kind, adjoint))
    }

    /// Slice `len` channels starting at `start` along axis 1.
    pub fn slice_c(self, start: usize, len: usize) -> Var<'t> {
        let value = self
            .value()
            .slice_axis(Axis(1), ndarray::Slice::from(start..start + len))
            .to_owned();
        self.tape.push(value, Op::SliceC(self.idx, start, len))
    }
}

fn broadcast_binop(a: &Arr, b: &Arr, f: impl Fn(f64, f64) -> f64) -> Arr {
    if a.shape() == b.shape() {
        let mut out = a.clone();
        out.zip_mut_with(b, |x, &y| *x = f(*x, y));
        return out;
    }
    let shape = broadcast_shape(a.shape(), b.shape());
    let av = a.broadcast(IxDyn(&shape)).expect("lhs not broadcastable");
    let bv = b.broadcast(IxDyn(&shape)).expect("rhs not broadcastable");
    let mut out = av.to_owned();
    out.zip_mut_with(&bv, |x, &y| *x = f(*x, y));
    out
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Vec<usize> {
    let n = a.len().max(b.len());
    let mut out = vec![0usize; n];
    for i in 0..n {
        let da = if i < n - a.len() { 1 } else { a[i - (n - a.len())] };
        let db = if i < n - b.len() { 1 } else { b[i - (n - b.len())] };
        assert!(
            da == db || da == 1 || db == 1,
            "incompatible broadcast {:?} vs {:?}",
            a,
            b
        );
        out[i] = da.max(db);
    }
    out
}

fn sum_to_shape(a: &Arr, target: &[usize]) -> Arr {
    let mut value = a.clone();
    // Collapse leading extra axes first.
    while value.ndim() > target.len() {
        value = value.sum_axis(Axis(0));
    }
    for (ax, &t) in target.iter().enumerate() {
        if value.shape()[ax] != t {
            assert_eq!(t, 1, "sum_to target {:?} from {:?}", target, a.shape());
            value = value.sum_axis(Axis(ax)).insert_axis(Axis(ax));
        }
    }
    value
}

fn im2col_value(x: &Arr, g: &ConvGeom) -> Arr {
    assert_eq!(
        x.shape(),
        &[g.batch, g.channels, g.height, g.width],
        "im2col input shape mismatch"
    );
    let (oh, ow) = (g.out_h(), g.out_w());
    let k = g.kernel;
    let mut out = ArrayD::zeros(IxDyn(&[g.batch * oh * ow, g.channels * k * k]));
    let x = x.as_standard_layout();
    let xs = x.as_slice().unwrap();
    let os = out.as_slice_mut().unwrap();
    let row_len = g.channels * k * k;
    for b in 0..g.batch {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = ((b * oh + oy) * ow + ox) * row_len;
                for c in 0..g.channels {
                    let plane = (b * g.channels + c) * g.height * g.width;
                    for ky in 0..k {
                        let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                        if iy < 0 || iy >= g.height as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                            if ix < 0 || ix >= g.width as isize {
                                continue;
                            }
                            os[row + (c * k + ky) * k + kx] =
                                xs[plane + iy as usize * g.width + ix as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

fn col2im_value(cols: &Arr, g: &ConvGeom) -> Arr {
    let (oh, ow) = (g.out_h(), g.out_w());
    let k = g.kernel;
    assert_eq!(
        cols.shape(),
        &[g.batch * oh * ow, g.channels * k * k],
        "col2im input shape mismatch"
    );
    let mut out = ArrayD::zeros(IxDyn(&[g.batch, g.channels, g.height, g.width]));
    let cols = cols.as_standard_layout();
    let cs = cols.as_slice().unwrap();
    let os = out.as_slice_mut().unwrap();
    let row_len = g.channels * k * k;
    for b in 0..g.batch {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = ((b * oh + oy) * ow + ox) * row_len;
                for c in 0..g.channels {
                    let plane = (b * g.channels + c) * g.height * g.width;
                    for ky in 0..k {
                        let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                        if iy < 0 || iy >= g.height as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                            if ix < 0 || ix >= g.width as isize {
                                continue;
                            }
                            os[plane + iy as usize * g.width + ix as usize] +=
                                cs[row + (c * k + ky) * k + kx];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Per-axis 2x interpolation taps: each output index reads two (possibly
/// clamped-equal) input indices with weights summing to 1.
fn upsample_taps(n_in: usize, kind: UpsampleKind) -> Vec<(usize, f64, usize, f64)> {
    let n_out = n_in * 2;
    (0..n_out)
        .map(|o| match kind {
            UpsampleKind::Nearest => (o / 2, 1.0, o / 2, 0.0),
            UpsampleKind::Bilinear => {
                let src = (o as f64 + 0.5) / 2.0 - 0.5;
                let lo = src.floor();
                let frac = src - lo;
                let i0 = lo.max(0.0) as usize;
                let i1 = ((lo + 1.0).max(0.0) as usize).min(n_in - 1);
                let i0 = i0.min(n_in - 1);
                (i0, 1.0 - frac, i1, frac)
            }
        })
        .collect()
}

fn upsample2x_value(x: &Arr, kind: UpsampleKind, adjoint: bool) -> Arr {
    let s = x.shape().to_vec();
    assert_eq!(s.len(), 4, "upsample expects (B,C,H,W)");
    let (b, c) = (s[0], s[1]);
    let (h_in, w_in) = if adjoint {
        (s[2] / 2, s[3] / 2)
    } else {
        (s[2], s[3])
    };
    let taps_y = upsample_taps(h_in, kind);
    let taps_x = upsample_taps(w_in, kind);
    let out_shape = if adjoint {
        vec![b, c, h_in, w_in]
    } else {
        vec![b, c, h_in * 2, w_in * 2]
    };
    let mut out = ArrayD::zeros(IxDyn(&out_shape));
    let x = x.as_standard_layout();
    let xs = x.as_slice().unwrap();
    let os = out.as_slice_mut().unwrap();
    for ib in 0..b {
        for ic in 0..c {
            let in_plane = (ib * c + ic) * s[2] * s[3];
            let out_plane = (ib * c + ic) * out_shape[2] * out_shape[3];
            for (oy, &(y0, wy0, y1, wy1)) in taps_y.iter().enumerate() {
                for (ox, &(x0, wx0, x1, wx1)) in taps_x.iter().enumerate() {
                    if adjoint {
                        let v = xs[in_plane + oy * s[3] + ox];
                        os[out_plane + y0 * w_in + x0] += wy0 * wx0 * v;
                        os[out_plane + y0 * w_in + x1] += wy0 * wx1 * v;
                        os[out_plane + y1 * w_in + x0] += wy1 * wx0 * v;
                        os[out_plane + y1 * w_in + x1] += wy1 * wx1 * v;
                    } else {
                        os[out_plane + oy * (w_in * 2) + ox] = wy0 * wx0
                            * xs[in_plane + y0 * s[3] + x0]
                            + wy0 * wx1 * xs[in_plane + y0 * s[3] + x1]
                            + wy1 * wx0 * xs[in_plane + y1 * s[3] + x0]
                            + wy1 * wx1 * xs[in_plane + y1 * s[3] + x1];
                    }
                }
            }
        }
    }
    out
}
