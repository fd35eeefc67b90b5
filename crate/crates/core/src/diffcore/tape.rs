use super::tensor::{affine_row, axpy, dot, outer_acc, transposed_acc, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The operation kinds exposed through [`Tape::forward_op`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    /// `inputs = [weight (out, in), bias (out), x (in) | (rows, in)]`
    Affine,
    Relu,
    Abs,
    Neg,
    Add,
    Mul,
    /// Flat concatenation of any number of inputs.
    Concat,
    Sum,
    Log,
    Exp,
    /// Softmax over the last axis.
    Softmax,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Affine { w: usize, b: usize, x: usize },
    Relu(usize),
    Abs(usize),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Concat(Vec<usize>),
    Sum(usize),
    Log(usize),
    Exp(usize),
    Softmax(usize),
    LogSoftmax(usize),
    Reshape(usize),
    Slice { a: usize, start: usize },
    Gather { a: usize, indices: Vec<usize> },
    Bmv { w: usize, x: usize },
    ConcatCols(Vec<usize>),
    SumRows(usize),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Define-by-run computation graph with reverse-mode gradients.
///
/// Nodes are appended in evaluation order, so every input precedes its
/// consumer and a single reverse sweep in [`Tape::backward`] suffices.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradient slots produced by [`Tape::backward`], one per node.
#[derive(Clone, Debug)]
pub struct Gradients {
    slots: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `var`. Nodes the loss does not depend on
    /// get an all-zero tensor.
    pub fn get(&self, var: Var) -> Tensor {
        match &self.slots[var.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }

    pub fn take(&mut self, var: Var) -> Tensor {
        match self.slots[var.0].take() {
            Some(g) => g,
            None => Tensor::zeros(&self.shapes[var.0]),
        }
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, false)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.constant(Tensor::scalar(value))
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let src = &self.nodes[a.0].value;
        let data = src.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        let rg = self.nodes[a.0].requires_grad;
        self.push(op, value, rg)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::new(va.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(&[a.0, b.0]);
        self.push(op, value, rg)
    }

    /// Generic entry point over [`OpKind`].
    pub fn forward_op(&mut self, kind: OpKind, inputs: &[Var]) -> Result<Var> {
        let arity = |n: usize| -> Result<()> {
            if inputs.len() != n {
                return Err(Error::shape(
                    "forward_op",
                    format!("{kind:?} takes {n} inputs, got {}", inputs.len()),
                ));
            }
            Ok(())
        };
        match kind {
            OpKind::Affine => {
                arity(3)?;
                self.affine(inputs[0], inputs[1], inputs[2])
            }
            OpKind::Relu => {
                arity(1)?;
                Ok(self.relu(inputs[0]))
            }
            OpKind::Abs => {
                arity(1)?;
                Ok(self.abs(inputs[0]))
            }
            OpKind::Neg => {
                arity(1)?;
                Ok(self.neg(inputs[0]))
            }
            OpKind::Add => {
                arity(2)?;
                self.add(inputs[0], inputs[1])
            }
            OpKind::Mul => {
                arity(2)?;
                self.mul(inputs[0], inputs[1])
            }
            OpKind::Concat => self.concat(inputs),
            OpKind::Sum => {
                arity(1)?;
                Ok(self.sum(inputs[0]))
            }
            OpKind::Log => {
                arity(1)?;
                Ok(self.log(inputs[0]))
            }
            OpKind::Exp => {
                arity(1)?;
                Ok(self.exp(inputs[0]))
            }
            OpKind::Softmax => {
                arity(1)?;
                Ok(self.softmax(inputs[0]))
            }
        }
    }

    /// `w · x + b` where `w` is `(out, in)`, `b` is `(out)` and `x` is either
    /// `(in)` or a batch of rows `(rows, in)`.
    pub fn affine(&mut self, w: Var, b: Var, x: Var) -> Result<Var> {
        let (wv, bv, xv) = (self.value(w), self.value(b), self.value(x));
        let ws = wv.shape();
        if ws.len() != 2 {
            return Err(Error::shape(
                "affine",
                format!("weight must be 2-D, got {ws:?}"),
            ));
        }
        let (out, inp) = (ws[0], ws[1]);
        if bv.shape() != [out] {
            return Err(Error::shape(
                "affine",
                format!("weight {ws:?} needs bias [{out}], got {:?}", bv.shape()),
            ));
        }
        let (rows, out_shape) = match xv.shape() {
            [n] if *n == inp => (1, vec![out]),
            [r, n] if *n == inp => (*r, vec![*r, out]),
            other => {
                return Err(Error::shape(
                    "affine",
                    format!("weight {ws:?} cannot apply to input {other:?}"),
                ))
            }
        };
        let (wd, bd, xd) = (wv.data(), bv.data(), xv.data());
        let mut data = Vec::with_capacity(rows * out);
        for r in 0..rows {
            affine_row(wd, bd, &xd[r * inp..(r + 1) * inp], &mut data);
        }
        let value = Tensor::new(out_shape, data)?;
        let rg = self.rg(&[w.0, b.0, x.0]);
        Ok(self.push(
            Op::Affine {
                w: w.0,
                b: b.0,
                x: x.0,
            },
            value,
            rg,
        ))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a.0), |v| if v > 0.0 { v } else { 0.0 })
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, Op::Abs(a.0), f64::abs)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, Op::Neg(a.0), |v| -v)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a.0), f64::exp)
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, Op::Log(a.0), f64::ln)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::Scale(a.0, c), |v| v * c)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.binary(a, b, Op::Add(a.0, b.0), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.binary(a, b, Op::Sub(a.0, b.0), |x, y| x - y))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        Ok(self.binary(a, b, Op::Mul(a.0, b.0), |x, y| x * y))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::shape("concat", "no inputs"));
        }
        let mut data = Vec::new();
        for p in parts {
            data.extend_from_slice(self.value(*p).data());
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let rg = self.rg(&ids);
        Ok(self.push(Op::Concat(ids), Tensor::vector(data), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.nodes[a.0].requires_grad;
        self.push(Op::Sum(a.0), Tensor::scalar(s), rg)
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let value = softmax_rows(self.value(a));
        let rg = self.nodes[a.0].requires_grad;
        self.push(Op::Softmax(a.0), value, rg)
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let cols = src.last_dim().max(1);
        let mut data = src.data().to_vec();
        for row in data.chunks_mut(cols) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        let value = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        let rg = self.nodes[a.0].requires_grad;
        self.push(Op::LogSoftmax(a.0), value, rg)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshaped(shape.to_vec())?;
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(Op::Reshape(a.0), value, rg))
    }

    /// Contiguous flat range `[start, start + len)` as a 1-D tensor.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let src = self.value(a);
        if start + len > src.len() {
            return Err(Error::shape(
                "slice",
                format!("[{start}, {}) out of {} values", start + len, src.len()),
            ));
        }
        let value = Tensor::vector(src.data()[start..start + len].to_vec());
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(Op::Slice { a: a.0, start }, value, rg))
    }

    /// Picks flat indices into a 1-D tensor.
    pub fn gather(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let src = self.value(a);
        if let Some(&bad) = indices.iter().find(|&&i| i >= src.len()) {
            return Err(Error::shape(
                "gather",
                format!("index {bad} out of {} values", src.len()),
            ));
        }
        let value = Tensor::vector(indices.iter().map(|&i| src.data()[i]).collect());
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(
            Op::Gather {
                a: a.0,
                indices: indices.to_vec(),
            },
            value,
            rg,
        ))
    }

    /// Batched matrix-vector product: `w` is `(batch, out, in)`, `x` is
    /// `(batch, in)`; returns `(batch, out)`.
    pub fn bmv(&mut self, w: Var, x: Var) -> Result<Var> {
        let (wv, xv) = (self.value(w), self.value(x));
        let (batch, out, inp) = match (wv.shape(), xv.shape()) {
            ([b, o, i], [bx, ix]) if b == bx && i == ix => (*b, *o, *i),
            (ws, xs) => {
                return Err(Error::shape(
                    "bmv",
                    format!("weights {ws:?} cannot apply to input {xs:?}"),
                ))
            }
        };
        let (wd, xd) = (wv.data(), xv.data());
        let mut data = Vec::with_capacity(batch * out);
        for r in 0..batch {
            let xr = &xd[r * inp..(r + 1) * inp];
            let wb = &wd[r * out * inp..(r + 1) * out * inp];
            for o in 0..out {
                let wr = &wb[o * inp..(o + 1) * inp];
                data.push(dot(wr, xr));
            }
        }
        let value = Tensor::new(vec![batch, out], data)?;
        let rg = self.rg(&[w.0, x.0]);
        Ok(self.push(Op::Bmv { w: w.0, x: x.0 }, value, rg))
    }

    /// Concatenates `(rows, d_k)` matrices along the column axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = match parts.first() {
            Some(p) => self.value(*p).shape().first().copied().unwrap_or(0),
            None => return Err(Error::shape("concat_cols", "no inputs")),
        };
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            match self.value(*p).shape() {
                [r, c] if *r == rows => widths.push(*c),
                other => {
                    return Err(Error::shape(
                        "concat_cols",
                        format!("expected ({rows}, _), got {other:?}"),
                    ))
                }
            }
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (p, &c) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(*p).data()[r * c..(r + 1) * c]);
            }
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let rg = self.rg(&ids);
        Ok(self.push(
            Op::ConcatCols(ids),
            Tensor::new(vec![rows, total], data)?,
            rg,
        ))
    }

    /// Sums over the last axis: `(rows, cols)` to `(rows)`.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let src = self.value(a);
        let [rows, cols] = *src.shape() else {
            return Err(Error::shape(
                "sum_rows",
                format!("expected 2-D, got {:?}", src.shape()),
            ));
        };
        let data = (0..rows)
            .map(|r| src.data()[r * cols..(r + 1) * cols].iter().sum())
            .collect();
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(Op::SumRows(a.0), Tensor::vector(data), rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut slots: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        slots[loss.0] = Some(Tensor::full(lv.shape(), 1.0));

        for id in (0..=loss.0).rev() {
            let Some(g) = slots[id].take() else { continue };
            let node = &self.nodes[id];
            if node.requires_grad {
                self.propagate(node, &g, &mut slots);
            }
            slots[id] = Some(g);
        }
        let shapes = self
            .nodes
            .iter()
            .map(|n| n.value.shape().to_vec())
            .collect();
        Ok(Gradients { slots, shapes })
    }

    fn accumulate(&self, slots: &mut [Option<Tensor>], id: usize, grad: Tensor) {
        if !self.nodes[id].requires_grad {
            return;
        }
        match &mut slots[id] {
            Some(existing) => existing.add_assign(&grad),
            slot @ None => *slot = Some(grad),
        }
    }

    fn like(&self, id: usize, data: Vec<f64>) -> Tensor {
        Tensor::new(self.nodes[id].value.shape().to_vec(), data).expect("same shape")
    }

    fn propagate(&self, node: &Node, g: &Tensor, slots: &mut [Option<Tensor>]) {
        let gd = g.data();
        let val = |i: usize| self.nodes[i].value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Affine { w, b, x } => {
                let ws = self.nodes[*w].value.shape();
                let (out, inp) = (ws[0], ws[1]);
                let rows = gd.len() / out.max(1);
                let (wd, xd) = (val(*w), val(*x));
                if self.nodes[*w].requires_grad {
                    let mut dw = vec![0.0; out * inp];
                    for r in 0..rows {
                        outer_acc(
                            &gd[r * out..(r + 1) * out],
                            &xd[r * inp..(r + 1) * inp],
                            &mut dw,
                        );
                    }
                    let t = self.like(*w, dw);
                    self.accumulate(slots, *w, t);
                }
                if self.nodes[*b].requires_grad {
                    let mut db = vec![0.0; out];
                    for gr in gd.chunks_exact(out.max(1)) {
                        axpy(1.0, gr, &mut db);
                    }
                    let t = self.like(*b, db);
                    self.accumulate(slots, *b, t);
                }
                if self.nodes[*x].requires_grad {
                    let mut dx = vec![0.0; rows * inp];
                    for r in 0..rows {
                        transposed_acc(
                            wd,
                            &gd[r * out..(r + 1) * out],
                            &mut dx[r * inp..(r + 1) * inp],
                        );
                    }
                    let t = self.like(*x, dx);
                    self.accumulate(slots, *x, t);
                }
            }
            Op::Relu(a) => {
                let d = val(*a)
                    .iter()
                    .zip(gd)
                    .map(|(&v, &gi)| if v > 0.0 { gi } else { 0.0 })
                    .collect();
                let t = self.like(*a, d);
                self.accumulate(slots, *a, t);
            }
            Op::Abs(a) => {
                let d = val(*a)
                    .iter()
                    .zip(gd)
                    .map(|(&v, &gi)| {
                        if v > 0.0 {
                            gi
                        } else if v < 0.0 {
                            -gi
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let t = self.like(*a, d);
                self.accumulate(slots, *a, t);
            }
            Op::Neg(a) => {
                let t = self.like(*a, gd.iter().map(|v| -v).collect());
                self.accumulate(slots, *a, t);
            }
            Op::Scale(a, c) => {
                let t = self.like(*a, gd.iter().map(|v| v * c).collect());
                self.accumulate(slots, *a, t);
            }
            Op::Add(a, b) => {
                self.accumulate(slots, *a, self.like(*a, gd.to_vec()));
                self.accumulate(slots, *b, self.like(*b, gd.to_vec()));
            }
            Op::Sub(a, b) => {
                self.accumulate(slots, *a, self.like(*a, gd.to_vec()));
                self.accumulate(slots, *b, self.like(*b, gd.iter().map(|v| -v).collect()));
            }
            Op::Mul(a, b) => {
                if self.nodes[*a].requires_grad {
                    let d = val(*b).iter().zip(gd).map(|(y, gi)| y * gi).collect();
                    let t = self.like(*a, d);
                    self.accumulate(slots, *a, t);
                }
                if self.nodes[*b].requires_grad {
                    let d = val(*a).iter().zip(gd).map(|(x, gi)| x * gi).collect();
                    let t = self.like(*b, d);
                    self.accumulate(slots, *b, t);
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.nodes[p].value.len();
                    let t = self.like(p, gd[offset..offset + n].to_vec());
                    self.accumulate(slots, p, t);
                    offset += n;
                }
            }
            Op::Sum(a) => {
                let n = self.nodes[*a].value.len();
                let t = self.like(*a, vec![gd[0]; n]);
                self.accumulate(slots, *a, t);
            }
            Op::Log(a) => {
                let d = val(*a).iter().zip(gd).map(|(x, gi)| gi / x).collect();
                let t = self.like(*a, d);
                self.accumulate(slots, *a, t);
            }
            Op::Exp(a) => {
                let d = node
                    .value
                    .data()
                    .iter()
                    .zip(gd)
                    .map(|(y, gi)| y * gi)
                    .collect();
                let t = self.like(*a, d);
                self.accumulate(slots, *a, t);
            }
            Op::Softmax(a) => {
                let cols = node.value.last_dim().max(1);
                let y = node.value.data();
                let mut d = vec![0.0; y.len()];
                for ((dr, yr), gr) in d.chunks_mut(cols).zip(y.chunks(cols)).zip(gd.chunks(cols)) {
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((di, yi), gi) in dr.iter_mut().zip(yr).zip(gr) {
                        *di = yi * (gi - dot);
                    }
                }
                let t = self.like(*a, d);
                self.accumulate(slots, *a, t);
            }
            Op::LogSoftmax(a) => {
                let cols = node.value.last_dim().max(1);
                let y = node.value.data();
                let mut d = vec![0.0; y.len()];
                for ((dr, yr), gr) in d.chunks_mut(cols).zip(y.chunks(cols)).zip(gd.chunks(cols)) {
                    let gsum: f64 = gr.iter().sum();
                    for ((di, yi), gi) in dr.iter_mut().zip(yr).zip(gr) {
                        *di = gi - yi.exp() * gsum;
                    }
                }
                let t = self.like(*a, d);
                self.accumulate(slots, *a, t);
            }
            Op::Reshape(a) => {
                let t = self.like(*a, gd.to_vec());
                self.accumulate(slots, *a, t);
            }
            Op::Slice { a, start } => {
                let mut d = vec![0.0; self.nodes[*a].value.len()];
                d[*start..*start + gd.len()].copy_from_slice(gd);
                let t = self.like(*a, d);
                self.accumulate(slots, *a, t);
            }
            Op::Gather { a, indices } => {
                let mut d = vec![0.0; self.nodes[*a].value.len()];
                for (&i, gi) in indices.iter().zip(gd) {
                    d[i] += gi;
                }
                let t = self.like(*a, d);
                self.accumulate(slots, *a, t);
            }
            Op::Bmv { w, x } => {
                let ws = self.nodes[*w].value.shape();
                let (batch, out, inp) = (ws[0], ws[1], ws[2]);
                let (wd, xd) = (val(*w), val(*x));
                if self.nodes[*w].requires_grad {
                    let mut dw = vec![0.0; batch * out * inp];
                    for r in 0..batch {
                        let block = &mut dw[r * out * inp..(r + 1) * out * inp];
                        outer_acc(
                            &gd[r * out..(r + 1) * out],
                            &xd[r * inp..(r + 1) * inp],
                            block,
                        );
                    }
                    let t = self.like(*w, dw);
                    self.accumulate(slots, *w, t);
                }
                if self.nodes[*x].requires_grad {
                    let mut dx = vec![0.0; batch * inp];
                    for r in 0..batch {
                        let block = &wd[r * out * inp..(r + 1) * out * inp];
                        transposed_acc(
                            block,
                            &gd[r * out..(r + 1) * out],
                            &mut dx[r * inp..(r + 1) * inp],
                        );
                    }
                    let t = self.like(*x, dx);
                    self.accumulate(slots, *x, t);
                }
            }
            Op::ConcatCols(parts) => {
                let widths: Vec<usize> = parts
                    .iter()
                    .map(|&p| self.nodes[p].value.shape()[1])
                    .collect();
                let total: usize = widths.iter().sum();
                let rows = gd.len() / total.max(1);
                let mut offset = 0;
                for (&p, &c) in parts.iter().zip(&widths) {
                    let mut d = Vec::with_capacity(rows * c);
                    for r in 0..rows {
                        d.extend_from_slice(&gd[r * total + offset..r * total + offset + c]);
                    }
                    let t = self.like(p, d);
                    self.accumulate(slots, p, t);
                    offset += c;
                }
            }
            Op::SumRows(a) => {
                let cols = self.nodes[*a].value.shape()[1];
                let d = gd
                    .iter()
                    .flat_map(|&gi| std::iter::repeat_n(gi, cols))
                    .collect();
                let t = self.like(*a, d);
                self.accumulate(slots, *a, t);
            }
        }
    }
}

/// Row-wise softmax over the last axis.
pub fn softmax_rows(t: &Tensor) -> Tensor {
    let cols = t.last_dim().max(1);
    let mut data = t.data().to_vec();
    for row in data.chunks_mut(cols) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    Tensor::new(t.shape().to_vec(), data).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_abs_softmax_values() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::scalar(-2.0));
        let r = tape.forward_op(OpKind::Relu, &[x]).unwrap();
        assert_eq!(tape.scalar_value(r), 0.0);

        let y = tape.constant(Tensor::scalar(-0.7));
        let a = tape.forward_op(OpKind::Abs, &[y]).unwrap();
        assert_eq!(tape.scalar_value(a), 0.7);

        let z = tape.constant(Tensor::vector(vec![0.0, 0.0, 0.0]));
        let s = tape.forward_op(OpKind::Softmax, &[z]).unwrap();
        for &p in tape.value(s).data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(3.0));
        let y = tape.mul(x, x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).item(), 6.0);
        assert_eq!(g.get(y).item(), 1.0);
    }

    #[test]
    fn kink_subgradients_are_zero() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(0.0));
        let r = tape.relu(x);
        let a = tape.abs(x);
        let s = tape.add(r, a).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).item(), 0.0);
    }

    #[test]
    fn disconnected_nodes_get_zero() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0]));
        let unused = tape.param(Tensor::vector(vec![5.0, 6.0, 7.0]));
        let loss = tape.sum(x);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(unused).data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn shape_errors_name_the_op() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        let b = tape.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let err = tape.add(a, b).unwrap_err().to_string();
        assert!(err.contains("add"), "{err}");

        let w = tape.constant(Tensor::zeros(&[2, 3]));
        let bias = tape.constant(Tensor::zeros(&[3]));
        let err = tape.affine(w, bias, b).unwrap_err().to_string();
        assert!(err.contains("affine") && err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn batched_affine_matches_rows() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::matrix(2, 3, vec![1., 2., 3., -1., 0., 1.]).unwrap());
        let b = tape.param(Tensor::vector(vec![0.5, -0.5]));
        let x = tape.constant(Tensor::matrix(2, 3, vec![1., 1., 1., 0., 2., -1.]).unwrap());
        let y = tape.affine(w, b, x).unwrap();
        assert_eq!(tape.value(y).shape(), &[2, 2]);
        assert_eq!(tape.value(y).data(), &[6.5, -0.5, 1.5, -1.5]);
    }
}
