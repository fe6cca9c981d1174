use ndarray::IxDyn;

use crate::tape::{Arr, ConvGeom, Tape, Var};

/// Index of a parameter inside a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(pub usize);

/// Named parameter arrays, owned outside any tape. Each training step binds
/// them as fresh leaves on a new tape.
#[derive(Clone, Default)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Arr>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Arr) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Arr {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Arr {
        &mut self.values[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Arr)> {
        self.names.iter().map(|s| s.as_str()).zip(self.values.iter())
    }

    pub fn values(&self) -> &[Arr] {
        &self.values
    }

    pub fn set_all(&mut self, values: Vec<Arr>) {
        assert_eq!(values.len(), self.values.len());
        for (old, new) in self.values.iter().zip(values.iter()) {
            assert_eq!(old.shape(), new.shape(), "parameter shape changed");
        }
        self.values = values;
    }

    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Bind every parameter as a leaf on `tape`.
    pub fn bind<'t>(&self, tape: &'t Tape) -> Bound<'t> {
        Bound {
            vars: self.values.iter().map(|v| tape.leaf(v.clone())).collect(),
        }
    }
}

/// Per-tape leaf variables for a [`ParamSet`].
pub struct Bound<'t> {
    pub vars: Vec<Var<'t>>,
}

impl<'t> Bound<'t> {
    pub fn get(&self, id: ParamId) -> Var<'t> {
        self.vars[id.0]
    }
}

/// 2-D convolution built from im2col + matmul primitives.
///
/// `x`: (B, C, H, W), `w`: (O, C, k, k), `bias`: (O). Gradients close over
/// the primitive set, so this is differentiable to any order.
pub fn conv2d<'t>(
    x: Var<'t>,
    w: Var<'t>,
    bias: Option<Var<'t>>,
    stride: usize,
    pad: usize,
) -> Var<'t> {
    let xs = x.shape();
    let ws = w.shape();
    assert_eq!(xs.len(), 4, "conv2d input must be (B,C,H,W)");
    assert_eq!(ws.len(), 4, "conv2d weight must be (O,C,k,k)");
    assert_eq!(xs[1], ws[1], "conv2d channel mismatch");
    assert_eq!(ws[2], ws[3], "conv2d kernels are square");
    let geom = ConvGeom {
        batch: xs[0],
        channels: xs[1],
        height: xs[2],
        width: xs[3],
        kernel: ws[2],
        stride,
        pad,
    };
    let (oh, ow) = (geom.out_h(), geom.out_w());
    let out_c = ws[0];
    let cols = x.im2col(geom);
    let wmat = w.reshape(&[out_c, ws[1] * ws[2] * ws[3]]);
    let mut out = cols.matmul(wmat.transpose2());
    if let Some(b) = bias {
        out = out.add(b.reshape(&[1, out_c]));
    }
    out.reshape(&[xs[0], oh, ow, out_c]).permute(&[0, 3, 1, 2])
}

/// Fully connected layer: `x` (B, D) times `w` (D, O) plus `bias` (O).
pub fn dense<'t>(x: Var<'t>, w: Var<'t>, bias: Option<Var<'t>>) -> Var<'t> {
    let mut out = x.matmul(w);
    if let Some(b) = bias {
        let o = b.shape()[0];
        out = out.add(b.reshape(&[1, o]));
    }
    out
}

/// Adam optimizer state over one [`ParamSet`].
#[derive(Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Arr>,
    pub v: Vec<Arr>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64, beta1: f64, beta2: f64) -> Self {
        let zeros: Vec<Arr> = params
            .values()
            .iter()
            .map(|p| Arr::zeros(IxDyn(p.shape())))
            .collect();
        Self {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[Arr]) {
        assert_eq!(grads.len(), params.len(), "gradient count mismatch");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..grads.len() {
            let g = &grads[i];
            self.m[i].zip_mut_with(g, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            self.v[i]
                .zip_mut_with(g, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            let (m, v) = (&self.m[i], &self.v[i]);
            let lr = self.lr;
            let eps = self.eps;
            let p = params.value_mut(ParamId(i));
            ndarray::Zip::from(p)
                .and(m)
                .and(v)
                .for_each(|p, &m, &v| *p -= lr * (m / bc1) / ((v / bc2).sqrt() + eps));
        }
    }
}
