use std::cell::{Ref, RefCell};
use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};

use super::neighbors::Neighborhoods;
use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    ScalarMul(usize, f64),
    Relu(usize),
    LeakyRelu(usize, f64),
    Elu(usize),
    Sigmoid(usize),
    Exp(usize),
    Log(usize),
    Square(usize),
    Sum(usize),
    Mean(usize),
    Transpose(usize),
    RowSoftmax(usize),
    RowLogSoftmax(usize),
    ConcatCols(Vec<usize>),
    SelectRows(usize, Arc<[usize]>),
    EdgeSum(usize, usize, Arc<Neighborhoods>),
    EdgeDot(usize, usize, Arc<Neighborhoods>),
    NeighborSoftmax(usize, Arc<Neighborhoods>),
    NeighborAggregate(usize, usize, Arc<Neighborhoods>),
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Records operations of one forward pass so they can be replayed backwards.
///
/// A tape is rebuilt for every forward pass. Nodes are appended in execution
/// order, so every op's inputs precede it.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by variable.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, var: Var<'_>) -> Option<&Matrix> {
        self.grads.get(var.id).and_then(|g| g.as_ref())
    }
}

fn dims(m: &Matrix) -> (usize, usize) {
    m.dim()
}

fn broadcast_shape(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<(usize, usize)> {
    let dim = |x: usize, y: usize| -> Option<usize> {
        if x == y {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else if y == 1 {
            Some(x)
        } else {
            None
        }
    };
    match (dim(a.0, b.0), dim(a.1, b.1)) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(Error::Shape { op, left: a, right: b }),
    }
}

/// Sum a broadcast gradient back down to `shape`.
fn reduce_to(g: &Matrix, shape: (usize, usize)) -> Matrix {
    let mut out = g.clone();
    if shape.0 == 1 && out.nrows() != 1 {
        out = out.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if shape.1 == 1 && out.ncols() != 1 {
        out = out.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    out
}

fn bcast(m: &Matrix, shape: (usize, usize)) -> Matrix {
    m.broadcast(shape).expect("shape checked at forward").to_owned()
}

fn accumulate(slot: &mut Option<Matrix>, g: Matrix) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
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

    /// Record an input value.
    pub fn leaf(&self, value: Matrix, requires_grad: bool) -> Var<'_> {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&self, value: Matrix) -> Var<'_> {
        self.leaf(value, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Array2::from_elem((1, 1), value))
    }

    fn push(&self, value: Matrix, op: Op, requires_grad: bool) -> Var<'_> {
        debug_assert!(
            value.iter().all(|v| v.is_finite()),
            "non-finite value produced by {op:?}"
        );
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value(&self, id: usize) -> Ref<'_, Matrix> {
        Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    fn needs(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Reverse pass from a scalar loss. Gradients accumulate additively over
    /// every use of a value.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let shape = dims(&nodes[loss.id].value);
        if shape != (1, 1) {
            return Err(Error::Shape {
                op: "backward",
                left: shape,
                right: (1, 1),
            });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; nodes.len()];
        grads[loss.id] = Some(Array2::ones((1, 1)));

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                grads[id] = Some(g);
                continue;
            }
            let val = |i: usize| &nodes[i].value;
            let wants = |i: usize| nodes[i].requires_grad;
            let push = |i: usize, grad: Matrix, grads: &mut Vec<Option<Matrix>>| {
                if nodes[i].requires_grad {
                    accumulate(&mut grads[i], grad);
                }
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    if wants(*a) {
                        push(*a, g.dot(&val(*b).t()), &mut grads);
                    }
                    if wants(*b) {
                        push(*b, val(*a).t().dot(&g), &mut grads);
                    }
                }
                Op::Add(a, b) => {
                    push(*a, reduce_to(&g, dims(val(*a))), &mut grads);
                    push(*b, reduce_to(&g, dims(val(*b))), &mut grads);
                }
                Op::Sub(a, b) => {
                    push(*a, reduce_to(&g, dims(val(*a))), &mut grads);
                    push(*b, -reduce_to(&g, dims(val(*b))), &mut grads);
                }
                Op::Mul(a, b) => {
                    let shape = g.dim();
                    if wants(*a) {
                        let ga = &g * &bcast(val(*b), shape);
                        push(*a, reduce_to(&ga, dims(val(*a))), &mut grads);
                    }
                    if wants(*b) {
                        let gb = &g * &bcast(val(*a), shape);
                        push(*b, reduce_to(&gb, dims(val(*b))), &mut grads);
                    }
                }
                Op::ScalarMul(a, c) => push(*a, &g * *c, &mut grads),
                Op::Relu(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(val(*a)).for_each(|g, &x| {
                        if x <= 0.0 {
                            *g = 0.0
                        }
                    });
                    push(*a, ga, &mut grads);
                }
                Op::LeakyRelu(a, slope) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(val(*a)).for_each(|g, &x| {
                        if x <= 0.0 {
                            *g *= slope
                        }
                    });
                    push(*a, ga, &mut grads);
                }
                Op::Elu(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(&node.value).for_each(|g, &y| {
                        if y <= 0.0 {
                            *g *= y + 1.0
                        }
                    });
                    push(*a, ga, &mut grads);
                }
                Op::Sigmoid(a) => {
                    let ga = &g * &node.value.mapv(|y| y * (1.0 - y));
                    push(*a, ga, &mut grads);
                }
                Op::Exp(a) => push(*a, &g * &node.value, &mut grads),
                Op::Log(a) => push(*a, &g / val(*a), &mut grads),
                Op::Square(a) => push(*a, &g * &(val(*a) * 2.0), &mut grads),
                Op::Sum(a) => push(*a, Array2::from_elem(dims(val(*a)), g[[0, 0]]), &mut grads),
                Op::Mean(a) => {
                    let n = val(*a).len() as f64;
                    push(*a, Array2::from_elem(dims(val(*a)), g[[0, 0]] / n), &mut grads);
                }
                Op::Transpose(a) => push(*a, g.t().to_owned(), &mut grads),
                Op::RowSoftmax(a) => {
                    let y = &node.value;
                    let mut ga = &g * y;
                    for (mut row, yrow) in ga.rows_mut().into_iter().zip(y.rows()) {
                        let s: f64 = row.sum();
                        Zip::from(&mut row).and(&yrow).for_each(|r, &yv| *r -= yv * s);
                    }
                    push(*a, ga, &mut grads);
                }
                Op::RowLogSoftmax(a) => {
                    let y = &node.value;
                    let mut ga = g.clone();
                    for ((mut row, grow), yrow) in ga.rows_mut().into_iter().zip(g.rows()).zip(y.rows()) {
                        let s: f64 = grow.sum();
                        Zip::from(&mut row).and(&yrow).for_each(|r, &yv| *r -= yv.exp() * s);
                    }
                    push(*a, ga, &mut grads);
                }
                Op::ConcatCols(parts) => {
                    let mut col = 0;
                    for &p in parts {
                        let w = val(p).ncols();
                        push(p, g.slice(ndarray::s![.., col..col + w]).to_owned(), &mut grads);
                        col += w;
                    }
                }
                Op::SelectRows(a, idx) => {
                    let mut ga = Array2::zeros(dims(val(*a)));
                    for (r, &src) in idx.iter().enumerate() {
                        let mut dst = ga.row_mut(src);
                        dst += &g.row(r);
                    }
                    push(*a, ga, &mut grads);
                }
                Op::EdgeSum(src, dst, nb) => {
                    let m = nb.node_count();
                    let mut gs = Array2::zeros((m, 1));
                    let mut gd = Array2::zeros((m, 1));
                    for i in 0..m {
                        for (e, &j) in nb.row_range(i).zip(nb.row(i)) {
                            gs[[i, 0]] += g[[e, 0]];
                            gd[[j, 0]] += g[[e, 0]];
                        }
                    }
                    push(*src, gs, &mut grads);
                    push(*dst, gd, &mut grads);
                }
                Op::EdgeDot(q, k, nb) => {
                    let (qv, kv) = (val(*q), val(*k));
                    let mut gq = Array2::zeros(qv.dim());
                    let mut gk = Array2::zeros(kv.dim());
                    for i in 0..nb.node_count() {
                        for (e, &j) in nb.row_range(i).zip(nb.row(i)) {
                            let ge = g[[e, 0]];
                            if ge == 0.0 {
                                continue;
                            }
                            gq.row_mut(i).scaled_add(ge, &kv.row(j));
                            gk.row_mut(j).scaled_add(ge, &qv.row(i));
                        }
                    }
                    push(*q, gq, &mut grads);
                    push(*k, gk, &mut grads);
                }
                Op::NeighborSoftmax(a, nb) => {
                    let y = &node.value;
                    let mut ga = Array2::zeros(y.dim());
                    for i in 0..nb.node_count() {
                        let r = nb.row_range(i);
                        let dot: f64 = r.clone().map(|e| g[[e, 0]] * y[[e, 0]]).sum();
                        for e in r {
                            ga[[e, 0]] = y[[e, 0]] * (g[[e, 0]] - dot);
                        }
                    }
                    push(*a, ga, &mut grads);
                }
                Op::NeighborAggregate(alpha, v, nb) => {
                    let (av, vv) = (val(*alpha), val(*v));
                    if wants(*alpha) {
                        let mut galpha = Array2::zeros(av.dim());
                        for i in 0..nb.node_count() {
                            let gi = g.row(i);
                            for (e, &j) in nb.row_range(i).zip(nb.row(i)) {
                                galpha[[e, 0]] = gi.dot(&vv.row(j));
                            }
                        }
                        push(*alpha, galpha, &mut grads);
                    }
                    if wants(*v) {
                        let mut gv = Array2::zeros(vv.dim());
                        for i in 0..nb.node_count() {
                            let gi = g.row(i);
                            for (e, &j) in nb.row_range(i).zip(nb.row(i)) {
                                gv.row_mut(j).scaled_add(av[[e, 0]], &gi);
                            }
                        }
                        push(*v, gv, &mut grads);
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Matrix> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value().dim()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.needs(self.id)
    }

    /// Scalar value of a 1x1 variable.
    pub fn item(&self) -> f64 {
        let v = self.value();
        debug_assert_eq!(v.dim(), (1, 1));
        v[[0, 0]]
    }

    fn same_tape(&self, other: &Var<'t>) {
        assert!(std::ptr::eq(self.tape, other.tape), "variables from different tapes");
    }

    fn unary(&self, value: Matrix, op: Op) -> Var<'t> {
        self.tape.push(value, op, self.requires_grad())
    }

    fn binary(&self, other: &Var<'t>, value: Matrix, op: Op) -> Var<'t> {
        self.same_tape(other);
        let rg = self.requires_grad() || other.requires_grad();
        self.tape.push(value, op, rg)
    }

    pub fn matmul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.shape(), other.shape());
        if a.1 != b.0 {
            return Err(Error::Shape {
                op: "matmul",
                left: a,
                right: b,
            });
        }
        let v = self.value().dot(&*other.value());
        Ok(self.binary(other, v, Op::MatMul(self.id, other.id)))
    }

    fn broadcast_op(
        &self,
        other: &Var<'t>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<(Matrix, (usize, usize))> {
        let shape = broadcast_shape(name, self.shape(), other.shape())?;
        let a = self.value();
        let b = other.value();
        let mut out = bcast(&a, shape);
        Zip::from(&mut out)
            .and(b.broadcast(shape).expect("checked"))
            .for_each(|x, &y| *x = f(*x, y));
        Ok((out, shape))
    }

    /// Elementwise sum; row and column vectors broadcast.
    pub fn add(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let (v, _) = self.broadcast_op(other, "add", |x, y| x + y)?;
        Ok(self.binary(other, v, Op::Add(self.id, other.id)))
    }

    pub fn sub(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let (v, _) = self.broadcast_op(other, "sub", |x, y| x - y)?;
        Ok(self.binary(other, v, Op::Sub(self.id, other.id)))
    }

    /// Elementwise product; row and column vectors broadcast.
    pub fn mul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let (v, _) = self.broadcast_op(other, "mul", |x, y| x * y)?;
        Ok(self.binary(other, v, Op::Mul(self.id, other.id)))
    }

    pub fn scale(&self, c: f64) -> Var<'t> {
        let v = &*self.value() * c;
        self.unary(v, Op::ScalarMul(self.id, c))
    }

    pub fn relu(&self) -> Var<'t> {
        let v = self.value().mapv(|x| x.max(0.0));
        self.unary(v, Op::Relu(self.id))
    }

    pub fn leaky_relu(&self, slope: f64) -> Var<'t> {
        let v = self.value().mapv(|x| if x > 0.0 { x } else { slope * x });
        self.unary(v, Op::LeakyRelu(self.id, slope))
    }

    pub fn elu(&self) -> Var<'t> {
        let v = self.value().mapv(|x| if x > 0.0 { x } else { x.exp_m1() });
        self.unary(v, Op::Elu(self.id))
    }

    pub fn sigmoid(&self) -> Var<'t> {
        let v = self.value().mapv(sigmoid);
        self.unary(v, Op::Sigmoid(self.id))
    }

    pub fn exp(&self) -> Var<'t> {
        let v = self.value().mapv(f64::exp);
        self.unary(v, Op::Exp(self.id))
    }

    pub fn log(&self) -> Result<Var<'t>> {
        let v = {
            let x = self.value();
            if let Some(bad) = x.iter().find(|&&x| x <= 0.0 || x.is_nan()) {
                return Err(Error::Domain {
                    op: "log",
                    msg: format!("non-positive input {bad}"),
                });
            }
            x.mapv(f64::ln)
        };
        Ok(self.unary(v, Op::Log(self.id)))
    }

    pub fn square(&self) -> Var<'t> {
        let v = self.value().mapv(|x| x * x);
        self.unary(v, Op::Square(self.id))
    }

    pub fn sum(&self) -> Var<'t> {
        let v = Array2::from_elem((1, 1), self.value().sum());
        self.unary(v, Op::Sum(self.id))
    }

    pub fn mean(&self) -> Result<Var<'t>> {
        let n = self.value().len();
        if n == 0 {
            return Err(Error::Domain {
                op: "mean",
                msg: "empty input".into(),
            });
        }
        let v = Array2::from_elem((1, 1), self.value().sum() / n as f64);
        Ok(self.unary(v, Op::Mean(self.id)))
    }

    pub fn t(&self) -> Var<'t> {
        let v = self.value().t().to_owned();
        self.unary(v, Op::Transpose(self.id))
    }

    /// Softmax along each row.
    pub fn row_softmax(&self) -> Var<'t> {
        let mut v = self.value().to_owned();
        for mut row in v.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let s = row.sum();
            row /= s;
        }
        self.unary(v, Op::RowSoftmax(self.id))
    }

    /// Log of the row softmax, computed without forming the softmax.
    pub fn row_log_softmax(&self) -> Var<'t> {
        let mut v = self.value().to_owned();
        for mut row in v.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
            row.mapv_inplace(|x| x - lse);
        }
        self.unary(v, Op::RowLogSoftmax(self.id))
    }

    pub fn concat_cols(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts.first().ok_or_else(|| Error::Domain {
            op: "concat_cols",
            msg: "no inputs".into(),
        })?;
        let rows = first.shape().0;
        for p in parts {
            first.same_tape(p);
            if p.shape().0 != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    left: first.shape(),
                    right: p.shape(),
                });
            }
        }
        let views: Vec<Ref<'_, Matrix>> = parts.iter().map(|p| p.value()).collect();
        let v =
            ndarray::concatenate(Axis(1), &views.iter().map(|m| m.view()).collect::<Vec<_>>()).expect("rows checked");
        drop(views);
        let rg = parts.iter().any(|p| p.requires_grad());
        Ok(first
            .tape
            .push(v, Op::ConcatCols(parts.iter().map(|p| p.id).collect()), rg))
    }

    /// Gather rows by index (repeats allowed).
    pub fn select_rows(&self, idx: &[usize]) -> Result<Var<'t>> {
        let shape = self.shape();
        if let Some(&bad) = idx.iter().find(|&&i| i >= shape.0) {
            return Err(Error::Shape {
                op: "select_rows",
                left: shape,
                right: (bad, 0),
            });
        }
        let v = self.value().select(Axis(0), idx);
        Ok(self.unary(v, Op::SelectRows(self.id, idx.into())))
    }

    /// Edge column `e_(i,j) = self[i] + other[j]` over every neighbor pair.
    pub fn edge_sum(&self, other: &Var<'t>, nb: &Arc<Neighborhoods>) -> Result<Var<'t>> {
        let m = nb.node_count();
        for (v, name) in [(self, "left"), (other, "right")] {
            if v.shape() != (m, 1) {
                return Err(Error::Shape {
                    op: if name == "left" { "edge_sum" } else { "edge_sum(rhs)" },
                    left: v.shape(),
                    right: (m, 1),
                });
            }
        }
        let (s, d) = (self.value(), other.value());
        let mut out = Array2::zeros((nb.edge_count(), 1));
        for i in 0..m {
            for (e, &j) in nb.row_range(i).zip(nb.row(i)) {
                out[[e, 0]] = s[[i, 0]] + d[[j, 0]];
            }
        }
        drop((s, d));
        Ok(self.binary(other, out, Op::EdgeSum(self.id, other.id, nb.clone())))
    }

    /// Edge column `e_(i,j) = <self_i, other_j>` over every neighbor pair.
    pub fn edge_dot(&self, other: &Var<'t>, nb: &Arc<Neighborhoods>) -> Result<Var<'t>> {
        let (qs, ks) = (self.shape(), other.shape());
        if qs != ks || qs.0 != nb.node_count() {
            return Err(Error::Shape {
                op: "edge_dot",
                left: qs,
                right: ks,
            });
        }
        let (q, k) = (self.value(), other.value());
        let mut out = Array2::zeros((nb.edge_count(), 1));
        for i in 0..nb.node_count() {
            let qi = q.row(i);
            for (e, &j) in nb.row_range(i).zip(nb.row(i)) {
                out[[e, 0]] = qi.dot(&k.row(j));
            }
        }
        drop((q, k));
        Ok(self.binary(other, out, Op::EdgeDot(self.id, other.id, nb.clone())))
    }

    /// Softmax of an edge column within each node's neighbor set.
    pub fn masked_neighbor_softmax(&self, nb: &Arc<Neighborhoods>) -> Result<Var<'t>> {
        if self.shape() != (nb.edge_count(), 1) {
            return Err(Error::Shape {
                op: "masked_neighbor_softmax",
                left: self.shape(),
                right: (nb.edge_count(), 1),
            });
        }
        let x = self.value();
        let mut out = Array2::zeros(x.dim());
        for i in 0..nb.node_count() {
            let r = nb.row_range(i);
            if r.is_empty() {
                continue;
            }
            let max = r.clone().map(|e| x[[e, 0]]).fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for e in r.clone() {
                let v = (x[[e, 0]] - max).exp();
                out[[e, 0]] = v;
                s += v;
            }
            for e in r {
                out[[e, 0]] /= s;
            }
        }
        drop(x);
        Ok(self.unary(out, Op::NeighborSoftmax(self.id, nb.clone())))
    }

    /// `out_i = sum_j alpha_(i,j) * values_j` with `self` as the edge column alpha.
    pub fn neighbor_aggregate(&self, values: &Var<'t>, nb: &Arc<Neighborhoods>) -> Result<Var<'t>> {
        if self.shape() != (nb.edge_count(), 1) || values.shape().0 != nb.node_count() {
            return Err(Error::Shape {
                op: "neighbor_aggregate",
                left: self.shape(),
                right: values.shape(),
            });
        }
        let (a, v) = (self.value(), values.value());
        let mut out = Array2::zeros((nb.node_count(), v.ncols()));
        for i in 0..nb.node_count() {
            let mut row = out.row_mut(i);
            for (e, &j) in nb.row_range(i).zip(nb.row(i)) {
                row.scaled_add(a[[e, 0]], &v.row(j));
            }
        }
        drop((a, v));
        Ok(self.binary(values, out, Op::NeighborAggregate(self.id, values.id, nb.clone())))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
