use crate::error::ShapeError;

use super::losses;
use super::tensor::{gemm_acc, Layout, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Embedding(Var, Vec<usize>),
    SelectRows(Vec<bool>, Var, Var),
    SoftmaxCe { logits: Var, targets: Vec<usize>, weights: Vec<f64> },
    BceLogits { logits: Var, targets: Tensor, weights: Tensor },
    SquaredError { pred: Var, target: Tensor, weights: Tensor },
    Sum(Var),
    SceneLoss { pred: Var, target: Tensor, coord_weight: f64 },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Append-only record of a forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn mismatch(op: &'static str, detail: String) -> ShapeError {
    ShapeError { op, detail }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(), ShapeError> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(mismatch(op, format!("{}x{} vs {}x{}", a.rows, a.cols, b.rows, b.cols)))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
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

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// A leaf that receives a gradient.
    pub fn var(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf treated as a constant.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn leaf(&mut self, value: Tensor, trainable: bool) -> Var {
        self.push(value, Op::Leaf, trainable)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let value = self.value(a).matmul(self.value(b))?;
        let needs = self.needs(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), needs))
    }

    fn zip(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, record: Op) -> Result<Var, ShapeError> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape(op, x, y)?;
        let value = Tensor { rows: x.rows, cols: x.cols, data: x.data.iter().zip(&y.data).map(|(&p, &q)| f(p, q)).collect() };
        let needs = self.needs(&[a, b]);
        Ok(self.push(value, record, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        self.zip("add", a, b, |p, q| p + q, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        self.zip("sub", a, b, |p, q| p - q, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        self.zip("mul", a, b, |p, q| p * q, Op::Mul(a, b))
    }

    /// Adds the `1 x n` row `bias` to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var, ShapeError> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.rows != 1 || b.cols != x.cols {
            return Err(mismatch("add_bias", format!("{}x{} plus bias {}x{}", x.rows, x.cols, b.rows, b.cols)));
        }
        let mut value = x.clone();
        for row in value.data.chunks_mut(b.cols) {
            for (v, &c) in row.iter_mut().zip(&b.data) {
                *v += c;
            }
        }
        let needs = self.needs(&[a, bias]);
        Ok(self.push(value, Op::AddBias(a, bias), needs))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|x| x * s);
        let needs = self.needs(&[a]);
        self.push(value, Op::Scale(a, s), needs)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, ShapeError> {
        let rows = parts.first().map_or(0, |&p| self.value(p).rows);
        if let Some(&bad) = parts.iter().find(|&&p| self.value(p).rows != rows) {
            return Err(mismatch("concat_cols", format!("{} rows among parts of {rows}", self.value(bad).rows)));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let needs = self.needs(parts);
        Ok(self.push(Tensor { rows, cols, data }, Op::ConcatCols(parts.to_vec()), needs))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, ShapeError> {
        let x = self.value(a);
        if start > end || end > x.cols {
            return Err(mismatch("slice_cols", format!("columns {start}..{end} of {}x{}", x.rows, x.cols)));
        }
        let data = (0..x.rows).flat_map(|r| x.row_slice(r)[start..end].iter().copied()).collect();
        let value = Tensor { rows: x.rows, cols: end - start, data };
        let needs = self.needs(&[a]);
        Ok(self.push(value, Op::SliceCols(a, start), needs))
    }

    /// Rows `start..end`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var, ShapeError> {
        let x = self.value(a);
        if start > end || end > x.rows {
            return Err(mismatch("slice_rows", format!("rows {start}..{end} of {}x{}", x.rows, x.cols)));
        }
        let value = Tensor { rows: end - start, cols: x.cols, data: x.data[start * x.cols..end * x.cols].to_vec() };
        let needs = self.needs(&[a]);
        Ok(self.push(value, Op::SliceRows(a, start), needs))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        let needs = self.needs(&[a]);
        self.push(value, Op::Tanh(a), needs)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        let needs = self.needs(&[a]);
        self.push(value, Op::Sigmoid(a), needs)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        let needs = self.needs(&[a]);
        self.push(value, Op::Relu(a), needs)
    }

    /// Gathers rows of `table` by id.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var, ShapeError> {
        let t = self.value(table);
        if let Some(&bad) = ids.iter().find(|&&i| i >= t.rows) {
            return Err(mismatch("embedding", format!("id {bad} in a table of {} rows", t.rows)));
        }
        let data = ids.iter().flat_map(|&i| t.row_slice(i).iter().copied()).collect();
        let value = Tensor { rows: ids.len(), cols: t.cols, data };
        let needs = self.needs(&[table]);
        Ok(self.push(value, Op::Embedding(table, ids.to_vec()), needs))
    }

    /// Row `i` comes from `on` where `mask[i]`, else from `off`.
    pub fn select_rows(&mut self, mask: &[bool], on: Var, off: Var) -> Result<Var, ShapeError> {
        let (a, b) = (self.value(on), self.value(off));
        same_shape("select_rows", a, b)?;
        if mask.len() != a.rows {
            return Err(mismatch("select_rows", format!("mask of {} for {} rows", mask.len(), a.rows)));
        }
        let data = (0..a.rows).flat_map(|r| if mask[r] { a.row_slice(r) } else { b.row_slice(r) }.iter().copied()).collect();
        let value = Tensor { rows: a.rows, cols: a.cols, data };
        let needs = self.needs(&[on, off]);
        Ok(self.push(value, Op::SelectRows(mask.to_vec(), on, off), needs))
    }

    /// `sum_i w_i * -log softmax(logits_i)[targets_i]`; weights default to 1.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize], weights: Option<&[f64]>) -> Result<Var, ShapeError> {
        let x = self.value(logits);
        if targets.len() != x.rows || weights.is_some_and(|w| w.len() != x.rows) {
            return Err(mismatch("softmax_cross_entropy", format!("{} targets for {}x{} logits", targets.len(), x.rows, x.cols)));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= x.cols) {
            return Err(mismatch("softmax_cross_entropy", format!("class {bad} of {}", x.cols)));
        }
        let weights = weights.map_or_else(|| vec![1.0; x.rows], <[f64]>::to_vec);
        let loss = (0..x.rows).map(|r| weights[r] * losses::cross_entropy(x.row_slice(r), targets[r])).sum();
        let needs = self.needs(&[logits]);
        Ok(self.push(Tensor::scalar(loss), Op::SoftmaxCe { logits, targets: targets.to_vec(), weights }, needs))
    }

    /// Weighted sum of binary cross-entropies on logits.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &Tensor, weights: Option<&Tensor>) -> Result<Var, ShapeError> {
        let x = self.value(logits);
        same_shape("bce_with_logits", x, targets)?;
        let weights = weights.cloned().unwrap_or_else(|| x.map(|_| 1.0));
        same_shape("bce_with_logits", x, &weights)?;
        let loss = x.data.iter().zip(&targets.data).zip(&weights.data).map(|((&z, &t), &w)| w * losses::bce(z, t)).sum();
        let needs = self.needs(&[logits]);
        Ok(self.push(Tensor::scalar(loss), Op::BceLogits { logits, targets: targets.clone(), weights }, needs))
    }

    /// Weighted sum of squared differences.
    pub fn squared_error(&mut self, pred: Var, target: &Tensor, weights: Option<&Tensor>) -> Result<Var, ShapeError> {
        let x = self.value(pred);
        same_shape("squared_error", x, target)?;
        let weights = weights.cloned().unwrap_or_else(|| x.map(|_| 1.0));
        same_shape("squared_error", x, &weights)?;
        let loss = x.data.iter().zip(&target.data).zip(&weights.data).map(|((&p, &t), &w)| w * (p - t) * (p - t)).sum();
        let needs = self.needs(&[pred]);
        Ok(self.push(Tensor::scalar(loss), Op::SquaredError { pred, target: target.clone(), weights }, needs))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).data.iter().sum());
        let needs = self.needs(&[a]);
        self.push(value, Op::Sum(a), needs)
    }

    /// Batch mean of the factorized scene likelihood loss, see [`losses::scene_loss_terms`].
    pub fn scene_loss(&mut self, pred: Var, target: &Tensor, coord_weight: f64) -> Result<Var, ShapeError> {
        let x = self.value(pred);
        same_shape("scene_loss", x, target)?;
        if x.cols != crate::tensorize::SCENE_DIM {
            return Err(mismatch("scene_loss", format!("rows of {} values, expected {}", x.cols, crate::tensorize::SCENE_DIM)));
        }
        let total: f64 = (0..x.rows).map(|r| losses::scene_loss_terms(x.row_slice(r), target.row_slice(r), coord_weight).total()).sum();
        let value = Tensor::scalar(total / x.rows.max(1) as f64);
        let needs = self.needs(&[pred]);
        Ok(self.push(value, Op::SceneLoss { pred, target: target.clone(), coord_weight }, needs))
    }

    /// Reverse pass from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        let seed = self.value(loss);
        grads[loss.0] = Some(seed.map(|_| 1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.needs_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        let grads = grads.into_iter().zip(&self.nodes).map(|(g, n)| g.filter(|_| n.needs_grad)).collect();
        Gradients { grads }
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut Tensor)| {
            let n = &self.nodes[v.0];
            if n.needs_grad {
                let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(n.value.rows, n.value.cols));
                f(slot);
            }
        };
        let val = |v: Var| &self.nodes[v.0].value;
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (x, y) = (val(*a), val(*b));
                acc(*a, &mut |ga| gemm_acc(x.rows, y.cols, x.cols, Layout::normal(g), Layout::transposed(y), &mut ga.data));
                acc(*b, &mut |gb| gemm_acc(x.cols, x.rows, y.cols, Layout::transposed(x), Layout::normal(g), &mut gb.data));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |ga| ga.add_assign(g));
                acc(*b, &mut |gb| gb.add_assign(g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |ga| ga.add_assign(g));
                acc(*b, &mut |gb| gb.data.iter_mut().zip(&g.data).for_each(|(d, &s)| *d -= s));
            }
            Op::Mul(a, b) => {
                let (x, y) = (val(*a), val(*b));
                acc(*a, &mut |ga| ga.data.iter_mut().zip(&g.data).zip(&y.data).for_each(|((d, &s), &q)| *d += s * q));
                acc(*b, &mut |gb| gb.data.iter_mut().zip(&g.data).zip(&x.data).for_each(|((d, &s), &p)| *d += s * p));
            }
            Op::AddBias(a, bias) => {
                acc(*a, &mut |ga| ga.add_assign(g));
                acc(*bias, &mut |gb| {
                    for row in g.data.chunks(g.cols) {
                        gb.data.iter_mut().zip(row).for_each(|(d, &s)| *d += s);
                    }
                });
            }
            Op::Scale(a, s) => acc(*a, &mut |ga| ga.data.iter_mut().zip(&g.data).for_each(|(d, &x)| *d += s * x)),
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let cols = val(p).cols;
                    acc(p, &mut |gp| {
                        for r in 0..g.rows {
                            let src = &g.row_slice(r)[offset..offset + cols];
                            gp.data[r * cols..(r + 1) * cols].iter_mut().zip(src).for_each(|(d, &s)| *d += s);
                        }
                    });
                    offset += cols;
                }
            }
            Op::SliceCols(a, start) => {
                let cols = val(*a).cols;
                acc(*a, &mut |ga| {
                    for r in 0..g.rows {
                        ga.data[r * cols + start..r * cols + start + g.cols].iter_mut().zip(g.row_slice(r)).for_each(|(d, &s)| *d += s);
                    }
                });
            }
            Op::SliceRows(a, start) => {
                let cols = g.cols;
                acc(*a, &mut |ga| ga.data[start * cols..start * cols + g.data.len()].iter_mut().zip(&g.data).for_each(|(d, &s)| *d += s));
            }
            Op::Tanh(a) => acc(*a, &mut |ga| ga.data.iter_mut().zip(&g.data).zip(&out.data).for_each(|((d, &s), &y)| *d += s * (1.0 - y * y))),
            Op::Sigmoid(a) => acc(*a, &mut |ga| ga.data.iter_mut().zip(&g.data).zip(&out.data).for_each(|((d, &s), &y)| *d += s * y * (1.0 - y))),
            Op::Relu(a) => {
                let x = val(*a);
                acc(*a, &mut |ga| ga.data.iter_mut().zip(&g.data).zip(&x.data).for_each(|((d, &s), &p)| *d += if p > 0.0 { s } else { 0.0 }));
            }
            Op::Embedding(table, ids) => {
                let cols = g.cols;
                acc(*table, &mut |gt| {
                    for (r, &id) in ids.iter().enumerate() {
                        gt.data[id * cols..(id + 1) * cols].iter_mut().zip(g.row_slice(r)).for_each(|(d, &s)| *d += s);
                    }
                });
            }
            Op::SelectRows(mask, on, off) => {
                let cols = g.cols;
                for (var, keep) in [(*on, true), (*off, false)] {
                    acc(var, &mut |gv| {
                        for (r, &m) in mask.iter().enumerate() {
                            if m == keep {
                                gv.data[r * cols..(r + 1) * cols].iter_mut().zip(g.row_slice(r)).for_each(|(d, &s)| *d += s);
                            }
                        }
                    });
                }
            }
            Op::SoftmaxCe { logits, targets, weights } => {
                let x = val(*logits);
                let s = g.item();
                acc(*logits, &mut |gl| {
                    for r in 0..x.rows {
                        let row = &mut gl.data[r * x.cols..(r + 1) * x.cols];
                        losses::cross_entropy_grad(x.row_slice(r), targets[r], s * weights[r], row);
                    }
                });
            }
            Op::BceLogits { logits, targets, weights } => {
                let x = val(*logits);
                let s = g.item();
                acc(*logits, &mut |gl| {
                    for (((d, &z), &t), &w) in gl.data.iter_mut().zip(&x.data).zip(&targets.data).zip(&weights.data) {
                        *d += s * w * (sigmoid(z) - t);
                    }
                });
            }
            Op::SquaredError { pred, target, weights } => {
                let x = val(*pred);
                let s = g.item();
                acc(*pred, &mut |gp| {
                    for (((d, &p), &t), &w) in gp.data.iter_mut().zip(&x.data).zip(&target.data).zip(&weights.data) {
                        *d += s * w * 2.0 * (p - t);
                    }
                });
            }
            Op::Sum(a) => {
                let s = g.item();
                acc(*a, &mut |ga| ga.data.iter_mut().for_each(|d| *d += s));
            }
            Op::SceneLoss { pred, target, coord_weight } => {
                let x = val(*pred);
                let s = g.item() / x.rows.max(1) as f64;
                acc(*pred, &mut |gp| {
                    for r in 0..x.rows {
                        let row = &mut gp.data[r * x.cols..(r + 1) * x.cols];
                        losses::scene_loss_grad(x.row_slice(r), target.row_slice(r), *coord_weight, s, row);
                    }
                });
            }
        }
    }
}

/// Gradients from one reverse pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when the value does not influence the loss or is a constant.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    sigmoid(x)
}
