use crate::autodiff::Tensor;
use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<F> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `[.., n] + [n]`, broadcast over all leading positions.
    AddBias(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Abs(Var),
    OneMinus(Var),
    Scale(Var, F),
    MulConst(Var, Vec<F>),
    ConcatCols(Vec<Var>),
    Reshape(Var),
    Conv1d {
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
    },
    MaxPool1d {
        x: Var,
        argmax: Vec<usize>,
    },
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
    needs_grad: bool,
}

/// Record of a forward computation.
///
/// Confined to one thread; independent tapes may be evaluated concurrently.
#[derive(Debug, Default)]
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<F> {
    grads: Vec<Option<Vec<F>>>,
}

impl<F: Scalar> Gradients<F> {
    pub fn get(&self, v: Var) -> Option<&[F]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Differentiable leaf.
    pub fn leaf(&mut self, value: Tensor<F>) -> Result<Var> {
        self.push(value, Op::Leaf, true, "leaf")
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<F>) -> Result<Var> {
        self.push(value, Op::Leaf, false, "constant")
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, needs_grad: bool, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn dims2(&self, v: Var, what: &str) -> Result<(usize, usize)> {
        match self.shape(v) {
            [r, c] => Ok((*r, *c)),
            s => shape_err(format!("{what} expects a rank-2 operand, got {s:?}")),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2(a, "matmul")?;
        let (k2, n) = self.dims2(b, "matmul")?;
        if k != k2 {
            return shape_err(format!("matmul [{m}x{k}] by [{k2}x{n}]"));
        }
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let mut out = vec![F::zero(); m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let x = av[i * k + p];
                if x == F::zero() {
                    continue;
                }
                let brow = &bv[p * n..(p + 1) * n];
                for (o, &y) in row.iter_mut().zip(brow) {
                    *o = *o + x * y;
                }
            }
        }
        let needs = self.needs(a) || self.needs(b);
        self.push(Tensor::new(&[m, n], out)?, Op::MatMul(a, b), needs, "matmul")
    }

    fn zip_same(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(F, F) -> F, op: Op<F>) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return shape_err(format!(
                "{name} of {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            ));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a) || self.needs(b);
        self.push(Tensor::new(&shape, data)?, op, needs, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let n = *self.shape(a).last().unwrap_or(&0);
        if self.value(bias).len() != n {
            return shape_err(format!(
                "bias of {} elements against trailing dimension {n}",
                self.value(bias).len()
            ));
        }
        let bv = self.value(bias).data();
        let data = self
            .value(a)
            .data()
            .chunks(n)
            .flat_map(|row| row.iter().zip(bv).map(|(&x, &b)| x + b))
            .collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a) || self.needs(bias);
        self.push(Tensor::new(&shape, data)?, Op::AddBias(a, bias), needs, "add_bias")
    }

    fn map(&mut self, a: Var, name: &'static str, f: impl Fn(F) -> F, op: Op<F>) -> Result<Var> {
        let data = self.value(a).data().iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a);
        self.push(Tensor::new(&shape, data)?, op, needs, name)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.map(a, "sigmoid", |x| x.sigmoid(), Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.map(a, "tanh", |x| x.tanh(), Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.map(a, "relu", |x| x.max(F::zero()), Op::Relu(a))
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.map(a, "abs", |x| x.abs(), Op::Abs(a))
    }

    /// `1 - a`.
    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        self.map(a, "one_minus", |x| F::one() - x, Op::OneMinus(a))
    }

    pub fn scale(&mut self, a: Var, c: F) -> Result<Var> {
        self.map(a, "scale", |x| x * c, Op::Scale(a, c))
    }

    /// Elementwise product with a constant array (dropout masks).
    pub fn mul_const(&mut self, a: Var, mask: Vec<F>) -> Result<Var> {
        if mask.len() != self.value(a).len() {
            return shape_err(format!(
                "mask of {} elements against {:?}",
                mask.len(),
                self.shape(a)
            ));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(&mask)
            .map(|(&x, &m)| x * m)
            .collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a);
        self.push(Tensor::new(&shape, data)?, Op::MulConst(a, mask), needs, "mul_const")
    }

    /// Concatenates rank-2 operands with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return shape_err("concat of zero operands");
        }
        let mut widths = Vec::with_capacity(parts.len());
        let (rows, _) = self.dims2(parts[0], "concat")?;
        for &p in parts {
            let (r, c) = self.dims2(p, "concat")?;
            if r != rows {
                return shape_err(format!("concat rows {r} against {rows}"));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push(
            Tensor::new(&[rows, total], data)?,
            Op::ConcatCols(parts.to_vec()),
            needs,
            "concat",
        )
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().with_shape(shape)?;
        let needs = self.needs(a);
        self.push(value, Op::Reshape(a), needs, "reshape")
    }

    /// Valid (unpadded) strided 1-D convolution.
    ///
    /// `x: [B × C × L]`, `w: [O × C × f]`, `b: [O]` → `[B × O × L_out]` with
    /// `L_out = (L − f) / stride + 1`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, stride: usize) -> Result<Var> {
        let (bs, c, l) = match *self.shape(x) {
            [bs, c, l] => (bs, c, l),
            ref s => return shape_err(format!("conv1d input must be [B x C x L], got {s:?}")),
        };
        let (o, wc, f) = match *self.shape(w) {
            [o, wc, f] => (o, wc, f),
            ref s => return shape_err(format!("conv1d weights must be [O x C x f], got {s:?}")),
        };
        if wc != c {
            return shape_err(format!("conv1d weights expect {wc} channels, input has {c}"));
        }
        if self.value(b).len() != o {
            return shape_err(format!("conv1d bias has {} entries for {o} filters", self.value(b).len()));
        }
        if stride == 0 {
            return shape_err("conv1d stride must be at least 1");
        }
        if l < f {
            return shape_err(format!("conv1d input length {l} is shorter than filter size {f}"));
        }
        let lo = (l - f) / stride + 1;
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let bv = self.value(b).data();
        let mut out = vec![F::zero(); bs * o * lo];
        for bi in 0..bs {
            for oi in 0..o {
                let dst = &mut out[(bi * o + oi) * lo..(bi * o + oi + 1) * lo];
                for (t, d) in dst.iter_mut().enumerate() {
                    let mut acc = bv[oi];
                    for ci in 0..c {
                        let xs = &xv[(bi * c + ci) * l + t * stride..][..f];
                        let ws = &wv[(oi * c + ci) * f..][..f];
                        for (&xx, &ww) in xs.iter().zip(ws) {
                            acc = acc + xx * ww;
                        }
                    }
                    *d = acc;
                }
            }
        }
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        self.push(
            Tensor::new(&[bs, o, lo], out)?,
            Op::Conv1d { x, w, b, stride },
            needs,
            "conv1d",
        )
    }

    /// Max pooling along the last axis of `[B × C × L]`.
    pub fn max_pool1d(&mut self, x: Var, size: usize, stride: usize) -> Result<Var> {
        let (bs, c, l) = match *self.shape(x) {
            [bs, c, l] => (bs, c, l),
            ref s => return shape_err(format!("max_pool1d input must be [B x C x L], got {s:?}")),
        };
        if size == 0 || stride == 0 {
            return shape_err("max_pool1d size and stride must be at least 1");
        }
        if l < size {
            return shape_err(format!("max_pool1d input length {l} is shorter than pool size {size}"));
        }
        let lo = (l - size) / stride + 1;
        let xv = self.value(x).data();
        let mut out = Vec::with_capacity(bs * c * lo);
        let mut argmax = Vec::with_capacity(bs * c * lo);
        for row in 0..bs * c {
            for t in 0..lo {
                let start = row * l + t * stride;
                let mut best = start;
                for i in start + 1..start + size {
                    if xv[i] > xv[best] {
                        best = i;
                    }
                }
                out.push(xv[best]);
                argmax.push(best);
            }
        }
        let needs = self.needs(x);
        self.push(
            Tensor::new(&[bs, c, lo], out)?,
            Op::MaxPool1d { x, argmax },
            needs,
            "max_pool1d",
        )
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().copied().sum();
        let needs = self.needs(a);
        self.push(Tensor::scalar(s), Op::Sum(a), needs, "sum")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        if v.is_empty() {
            return shape_err("mean of an empty tensor");
        }
        let s: F = v.data().iter().copied().sum();
        let m = s / F::of(v.len() as f64);
        let needs = self.needs(a);
        self.push(Tensor::scalar(m), Op::Mean(a), needs, "mean")
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<F>> {
        if self.value(loss).len() != 1 {
            return shape_err(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            ));
        }
        let mut grads: Vec<Option<Vec<F>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![F::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.needs_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node<F>, g: &[F], grads: &mut [Option<Vec<F>>]) {
        let y = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let n = self.shape(*b)[1];
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                if self.needs(*a) {
                    let mut da = vec![F::zero(); m * k];
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &bv[p * n..(p + 1) * n];
                            da[i * k + p] = grow.iter().zip(brow).map(|(&x, &y)| x * y).sum();
                        }
                    }
                    accumulate(grads, *a, da);
                }
                if self.needs(*b) {
                    let mut db = vec![F::zero(); k * n];
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let x = av[i * k + p];
                            if x == F::zero() {
                                continue;
                            }
                            for (d, &gg) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *d = *d + x * gg;
                            }
                        }
                    }
                    accumulate(grads, *b, db);
                }
            }
            Op::Add(a, b) => {
                self.pass(grads, *a, g.to_vec());
                self.pass(grads, *b, g.to_vec());
            }
            Op::Sub(a, b) => {
                self.pass(grads, *a, g.to_vec());
                self.pass(grads, *b, g.iter().map(|&x| -x).collect());
            }
            Op::Mul(a, b) => {
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                self.pass(grads, *a, g.iter().zip(bv).map(|(&x, &y)| x * y).collect());
                self.pass(grads, *b, g.iter().zip(av).map(|(&x, &y)| x * y).collect());
            }
            Op::AddBias(a, bias) => {
                self.pass(grads, *a, g.to_vec());
                if self.needs(*bias) {
                    let n = self.value(*bias).len();
                    let mut db = vec![F::zero(); n];
                    for row in g.chunks(n) {
                        for (d, &x) in db.iter_mut().zip(row) {
                            *d = *d + x;
                        }
                    }
                    accumulate(grads, *bias, db);
                }
            }
            Op::Sigmoid(a) => {
                let d = g.iter().zip(y).map(|(&gg, &s)| gg * s * (F::one() - s)).collect();
                self.pass(grads, *a, d);
            }
            Op::Tanh(a) => {
                let d = g.iter().zip(y).map(|(&gg, &t)| gg * (F::one() - t * t)).collect();
                self.pass(grads, *a, d);
            }
            Op::Relu(a) => {
                let x = self.value(*a).data();
                let d = g
                    .iter()
                    .zip(x)
                    .map(|(&gg, &v)| if v > F::zero() { gg } else { F::zero() })
                    .collect();
                self.pass(grads, *a, d);
            }
            Op::Abs(a) => {
                let x = self.value(*a).data();
                let d = g
                    .iter()
                    .zip(x)
                    .map(|(&gg, &v)| {
                        if v > F::zero() {
                            gg
                        } else if v < F::zero() {
                            -gg
                        } else {
                            F::zero()
                        }
                    })
                    .collect();
                self.pass(grads, *a, d);
            }
            Op::OneMinus(a) => self.pass(grads, *a, g.iter().map(|&x| -x).collect()),
            Op::Scale(a, c) => self.pass(grads, *a, g.iter().map(|&x| x * *c).collect()),
            Op::MulConst(a, mask) => {
                self.pass(grads, *a, g.iter().zip(mask).map(|(&x, &m)| x * m).collect())
            }
            Op::ConcatCols(parts) => {
                let rows = node.value.shape()[0];
                let total = node.value.shape()[1];
                let mut offset = 0;
                for &p in parts {
                    let w = self.shape(p)[1];
                    if self.needs(p) {
                        let mut d = Vec::with_capacity(rows * w);
                        for i in 0..rows {
                            d.extend_from_slice(&g[i * total + offset..i * total + offset + w]);
                        }
                        accumulate(grads, p, d);
                    }
                    offset += w;
                }
            }
            Op::Reshape(a) => self.pass(grads, *a, g.to_vec()),
            Op::Conv1d { x, w, b, stride } => self.conv1d_backward(node, g, *x, *w, *b, *stride, grads),
            Op::MaxPool1d { x, argmax } => {
                if self.needs(*x) {
                    let mut d = vec![F::zero(); self.value(*x).len()];
                    for (&i, &gg) in argmax.iter().zip(g) {
                        d[i] = d[i] + gg;
                    }
                    accumulate(grads, *x, d);
                }
            }
            Op::Sum(a) => {
                let n = self.value(*a).len();
                self.pass(grads, *a, vec![g[0]; n]);
            }
            Op::Mean(a) => {
                let n = self.value(*a).len();
                self.pass(grads, *a, vec![g[0] / F::of(n as f64); n]);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn conv1d_backward(
        &self,
        node: &Node<F>,
        g: &[F],
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        grads: &mut [Option<Vec<F>>],
    ) {
        let (bs, c, l) = (self.shape(x)[0], self.shape(x)[1], self.shape(x)[2]);
        let (o, f) = (self.shape(w)[0], self.shape(w)[2]);
        let lo = node.value.shape()[2];
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let (nx, nw, nb) = (self.needs(x), self.needs(w), self.needs(b));
        let mut dx = if nx { vec![F::zero(); xv.len()] } else { Vec::new() };
        let mut dw = if nw { vec![F::zero(); wv.len()] } else { Vec::new() };
        let mut db = if nb { vec![F::zero(); o] } else { Vec::new() };
        for bi in 0..bs {
            for oi in 0..o {
                let gs = &g[(bi * o + oi) * lo..(bi * o + oi + 1) * lo];
                if nb {
                    db[oi] = db[oi] + gs.iter().copied().sum();
                }
                for ci in 0..c {
                    let wbase = (oi * c + ci) * f;
                    let xbase = (bi * c + ci) * l;
                    for (t, &gg) in gs.iter().enumerate() {
                        if gg == F::zero() {
                            continue;
                        }
                        let xs = xbase + t * stride;
                        if nw {
                            for (d, &xx) in dw[wbase..wbase + f].iter_mut().zip(&xv[xs..xs + f]) {
                                *d = *d + gg * xx;
                            }
                        }
                        if nx {
                            for (d, &ww) in dx[xs..xs + f].iter_mut().zip(&wv[wbase..wbase + f]) {
                                *d = *d + gg * ww;
                            }
                        }
                    }
                }
            }
        }
        if nx {
            accumulate(grads, x, dx);
        }
        if nw {
            accumulate(grads, w, dw);
        }
        if nb {
            accumulate(grads, b, db);
        }
    }

    fn pass(&self, grads: &mut [Option<Vec<F>>], v: Var, d: Vec<F>) {
        if self.needs(v) {
            accumulate(grads, v, d);
        }
    }
}

fn accumulate<F: Scalar>(grads: &mut [Option<Vec<F>>], v: Var, d: Vec<F>) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.iter_mut().zip(d) {
                *e = *e + x;
            }
        }
        slot @ None => *slot = Some(d),
    }
}
