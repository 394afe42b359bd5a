use std::cell::RefCell;
use std::fmt;

use super::tensor::{gemm, Tensor};
use super::DiffError;

/// Lower bound applied to `log` arguments.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpKind {
    Leaf,
    MatMul,
    Add,
    AddRow,
    Sub,
    Mul,
    Exp,
    Log,
    PowScalar,
    Sigmoid,
    Relu,
    Neg,
    Scale,
    Offset,
    Clamp,
    Sum,
    SumAxis,
    ProdAxis,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Exp(usize),
    Log(usize),
    PowScalar(usize, f64),
    Sigmoid(usize),
    Relu(usize),
    Neg(usize),
    Scale(usize, f64),
    Offset(usize),
    Clamp(usize, f64, f64),
    Sum(usize),
    SumAxis(usize, usize),
    ProdAxis(usize, usize),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::AddRow(..) => OpKind::AddRow,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::Exp(..) => OpKind::Exp,
            Op::Log(..) => OpKind::Log,
            Op::PowScalar(..) => OpKind::PowScalar,
            Op::Sigmoid(..) => OpKind::Sigmoid,
            Op::Relu(..) => OpKind::Relu,
            Op::Neg(..) => OpKind::Neg,
            Op::Scale(..) => OpKind::Scale,
            Op::Offset(..) => OpKind::Offset,
            Op::Clamp(..) => OpKind::Clamp,
            Op::Sum(..) => OpKind::Sum,
            Op::SumAxis(..) => OpKind::SumAxis,
            Op::ProdAxis(..) => OpKind::ProdAxis,
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    trainable: bool,
}

/// Append-only record of a computation, differentiated in reverse order.
///
/// Nodes are pushed as operations execute, so the recorded order is always
/// a topological order. A graph is single-threaded; build one per step.
#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g> {
    graph: &'g Graph,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}", self.id)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf that receives a gradient on [`Graph::backward`].
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf treated as a constant; its gradient is never reported.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    fn push(&self, value: Tensor, op: Op, trainable: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            trainable,
        });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    fn record(&self, value: Tensor, op: Op) -> Result<Var<'_>, DiffError> {
        if !value.is_finite() {
            return Err(DiffError::NonFinite { op: op.kind() });
        }
        Ok(self.push(value, op, false))
    }

    fn value_of(&self, id: usize) -> std::cell::Ref<'_, Tensor> {
        std::cell::Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// Every operation recorded up to and including `loss` is visited once,
    /// latest first.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients, DiffError> {
        self.check_owner(loss)?;
        let nodes = self.nodes.borrow();
        let loss_node = &nodes[loss.id];
        if loss_node.value.len() != 1 {
            return Err(DiffError::NonScalarLoss {
                shape: loss_node.value.shape().to_vec(),
            });
        }

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.id + 1];
        grads[loss.id] = Some(vec![1.0]);

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            let out = node.value.data();
            match node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (&nodes[a].value, &nodes[b].value);
                    let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                    let ga = slot(&mut grads, a, m * k);
                    gemm(m, n, k, &g, false, bv.data(), true, ga, true);
                    let gb = slot(&mut grads, b, k * n);
                    gemm(k, m, n, av.data(), true, &g, false, gb, true);
                }
                Op::Add(a, b) => {
                    axpy(slot(&mut grads, a, g.len()), &g, 1.0);
                    axpy(slot(&mut grads, b, g.len()), &g, 1.0);
                }
                Op::AddRow(a, bias) => {
                    axpy(slot(&mut grads, a, g.len()), &g, 1.0);
                    let n = nodes[bias].value.len();
                    let gb = slot(&mut grads, bias, n);
                    for row in g.chunks(n) {
                        axpy(gb, row, 1.0);
                    }
                }
                Op::Sub(a, b) => {
                    axpy(slot(&mut grads, a, g.len()), &g, 1.0);
                    axpy(slot(&mut grads, b, g.len()), &g, -1.0);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (nodes[a].value.data(), nodes[b].value.data());
                    let ga = slot(&mut grads, a, g.len());
                    for ((s, gi), bi) in ga.iter_mut().zip(&g).zip(bv) {
                        *s += gi * bi;
                    }
                    let gb = slot(&mut grads, b, g.len());
                    for ((s, gi), ai) in gb.iter_mut().zip(&g).zip(av) {
                        *s += gi * ai;
                    }
                }
                Op::Exp(a) => {
                    let ga = slot(&mut grads, a, g.len());
                    for ((s, gi), yi) in ga.iter_mut().zip(&g).zip(out) {
                        *s += gi * yi;
                    }
                }
                Op::Log(a) => {
                    let av = nodes[a].value.data();
                    let ga = slot(&mut grads, a, g.len());
                    for ((s, gi), &xi) in ga.iter_mut().zip(&g).zip(av) {
                        if xi > LOG_FLOOR {
                            *s += gi / xi;
                        }
                    }
                }
                Op::PowScalar(a, c) => {
                    let av = nodes[a].value.data();
                    let ga = slot(&mut grads, a, g.len());
                    for ((s, gi), &xi) in ga.iter_mut().zip(&g).zip(av) {
                        *s += gi * c * xi.powf(c - 1.0);
                    }
                }
                Op::Sigmoid(a) => {
                    let ga = slot(&mut grads, a, g.len());
                    for ((s, gi), yi) in ga.iter_mut().zip(&g).zip(out) {
                        *s += gi * yi * (1.0 - yi);
                    }
                }
                Op::Relu(a) => {
                    let av = nodes[a].value.data();
                    let ga = slot(&mut grads, a, g.len());
                    for ((s, gi), &xi) in ga.iter_mut().zip(&g).zip(av) {
                        if xi > 0.0 {
                            *s += gi;
                        }
                    }
                }
                Op::Neg(a) => axpy(slot(&mut grads, a, g.len()), &g, -1.0),
                Op::Scale(a, c) => axpy(slot(&mut grads, a, g.len()), &g, c),
                Op::Offset(a) => axpy(slot(&mut grads, a, g.len()), &g, 1.0),
                Op::Clamp(a, lo, hi) => {
                    let av = nodes[a].value.data();
                    let ga = slot(&mut grads, a, g.len());
                    for ((s, gi), &xi) in ga.iter_mut().zip(&g).zip(av) {
                        if xi >= lo && xi <= hi {
                            *s += gi;
                        }
                    }
                }
                Op::Sum(a) => {
                    let ga = slot(&mut grads, a, nodes[a].value.len());
                    for s in ga.iter_mut() {
                        *s += g[0];
                    }
                }
                Op::SumAxis(a, axis) => {
                    let (outer, n, inner) = split_axis(nodes[a].value.shape(), axis);
                    let ga = slot(&mut grads, a, outer * n * inner);
                    for o in 0..outer {
                        for j in 0..n {
                            let base = (o * n + j) * inner;
                            axpy(&mut ga[base..base + inner], &g[o * inner..(o + 1) * inner], 1.0);
                        }
                    }
                }
                Op::ProdAxis(a, axis) => {
                    let (outer, n, inner) = split_axis(nodes[a].value.shape(), axis);
                    let av = nodes[a].value.data();
                    let ga = slot(&mut grads, a, outer * n * inner);
                    prod_axis_backward(av, &g, ga, outer, n, inner);
                }
            }
        }

        let grads = nodes
            .iter()
            .enumerate()
            .map(|(id, node)| {
                if node.trainable {
                    grads.get_mut(id).and_then(Option::take)
                } else {
                    None
                }
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn check_owner(&self, v: Var<'_>) -> Result<(), DiffError> {
        if std::ptr::eq(self, v.graph) {
            Ok(())
        } else {
            Err(DiffError::ForeignVar)
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], id: usize, len: usize) -> &mut [f64] {
    grads[id].get_or_insert_with(|| vec![0.0; len])
}

fn axpy(dst: &mut [f64], src: &[f64], alpha: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Adjoint of a product reduction: each factor receives the product of all
/// other factors, built from prefix and suffix products so zeros are safe.
fn prod_axis_backward(x: &[f64], g: &[f64], gx: &mut [f64], outer: usize, n: usize, inner: usize) {
    let mut prefix = vec![1.0; n];
    let mut suffix = vec![1.0; n];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| x[(o * n + j) * inner + i];
            for j in 1..n {
                prefix[j] = prefix[j - 1] * at(j - 1);
            }
            for j in (0..n.saturating_sub(1)).rev() {
                suffix[j] = suffix[j + 1] * at(j + 1);
            }
            let go = g[o * inner + i];
            for j in 0..n {
                gx[(o * n + j) * inner + i] += go * prefix[j] * suffix[j];
            }
        }
    }
}

/// Gradients of trainable leaves produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient with respect to `var`; zeros if `var` did not influence the loss.
    pub fn wrt(&self, var: Var<'_>) -> Tensor {
        let shape = var.shape();
        match self.grads.get(var.id).and_then(Option::as_ref) {
            Some(g) => Tensor::new(&shape, g.clone()).expect("gradient shape tracks value shape"),
            None => Tensor::zeros(&shape),
        }
    }
}

impl<'g> Var<'g> {
    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn value(&self) -> Tensor {
        self.graph.value_of(self.id).clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.value_of(self.id).shape().to_vec()
    }

    /// Value of a single-element node.
    pub fn item(&self) -> f64 {
        self.graph.value_of(self.id).data()[0]
    }

    fn same_graph(&self, other: Var<'g>) -> Result<(), DiffError> {
        if std::ptr::eq(self.graph, other.graph) {
            Ok(())
        } else {
            Err(DiffError::ForeignVar)
        }
    }

    fn unary(
        self,
        op: Op,
        f: impl Fn(f64) -> f64,
    ) -> Result<Var<'g>, DiffError> {
        let out = self.graph.value_of(self.id).map(f);
        self.graph.record(out, op)
    }

    fn binary(
        self,
        other: Var<'g>,
        kind: OpKind,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var<'g>, DiffError> {
        self.same_graph(other)?;
        let out = {
            let a = self.graph.value_of(self.id);
            let b = self.graph.value_of(other.id);
            if a.shape() != b.shape() {
                return Err(DiffError::Shape {
                    op: kind,
                    lhs: a.shape().to_vec(),
                    rhs: b.shape().to_vec(),
                });
            }
            let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
            Tensor::new(a.shape(), data)?
        };
        self.graph.record(out, op)
    }

    pub fn matmul(self, other: Var<'g>) -> Result<Var<'g>, DiffError> {
        self.same_graph(other)?;
        let out = {
            let a = self.graph.value_of(self.id);
            let b = self.graph.value_of(other.id);
            if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
                return Err(DiffError::Shape {
                    op: OpKind::MatMul,
                    lhs: a.shape().to_vec(),
                    rhs: b.shape().to_vec(),
                });
            }
            let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
            let mut c = vec![0.0; m * n];
            gemm(m, k, n, a.data(), false, b.data(), false, &mut c, false);
            Tensor::matrix(m, n, c)?
        };
        self.graph.record(out, Op::MatMul(self.id, other.id))
    }

    pub fn add(self, other: Var<'g>) -> Result<Var<'g>, DiffError> {
        self.binary(other, OpKind::Add, Op::Add(self.id, other.id), |a, b| a + b)
    }

    /// Adds a length-`n` bias to every row of an `m×n` matrix.
    pub fn add_row(self, bias: Var<'g>) -> Result<Var<'g>, DiffError> {
        self.same_graph(bias)?;
        let out = {
            let a = self.graph.value_of(self.id);
            let b = self.graph.value_of(bias.id);
            let n = b.len();
            if a.rank() != 2 || a.shape()[1] != n || b.rows() != 1 {
                return Err(DiffError::Shape {
                    op: OpKind::AddRow,
                    lhs: a.shape().to_vec(),
                    rhs: b.shape().to_vec(),
                });
            }
            let mut data = a.data().to_vec();
            for row in data.chunks_mut(n) {
                axpy(row, b.data(), 1.0);
            }
            Tensor::new(a.shape(), data)?
        };
        self.graph.record(out, Op::AddRow(self.id, bias.id))
    }

    pub fn sub(self, other: Var<'g>) -> Result<Var<'g>, DiffError> {
        self.binary(other, OpKind::Sub, Op::Sub(self.id, other.id), |a, b| a - b)
    }

    pub fn mul(self, other: Var<'g>) -> Result<Var<'g>, DiffError> {
        self.binary(other, OpKind::Mul, Op::Mul(self.id, other.id), |a, b| a * b)
    }

    pub fn exp(self) -> Result<Var<'g>, DiffError> {
        self.unary(Op::Exp(self.id), f64::exp)
    }

    /// Natural log with the argument floored at [`LOG_FLOOR`].
    pub fn log(self) -> Result<Var<'g>, DiffError> {
        self.unary(Op::Log(self.id), |x| x.max(LOG_FLOOR).ln())
    }

    pub fn pow_scalar(self, c: f64) -> Result<Var<'g>, DiffError> {
        self.unary(Op::PowScalar(self.id, c), |x| x.powf(c))
    }

    pub fn sigmoid(self) -> Result<Var<'g>, DiffError> {
        self.unary(Op::Sigmoid(self.id), sigmoid)
    }

    pub fn relu(self) -> Result<Var<'g>, DiffError> {
        self.unary(Op::Relu(self.id), |x| x.max(0.0))
    }

    pub fn neg(self) -> Result<Var<'g>, DiffError> {
        self.unary(Op::Neg(self.id), |x| -x)
    }

    pub fn scale(self, c: f64) -> Result<Var<'g>, DiffError> {
        self.unary(Op::Scale(self.id, c), |x| c * x)
    }

    /// Adds a constant to every element.
    pub fn offset(self, c: f64) -> Result<Var<'g>, DiffError> {
        self.unary(Op::Offset(self.id), |x| x + c)
    }

    pub fn clamp(self, lo: f64, hi: f64) -> Result<Var<'g>, DiffError> {
        self.unary(Op::Clamp(self.id, lo, hi), |x| x.clamp(lo, hi))
    }

    pub fn sum(self) -> Result<Var<'g>, DiffError> {
        let total = self.graph.value_of(self.id).data().iter().sum();
        self.graph.record(Tensor::scalar(total), Op::Sum(self.id))
    }

    pub fn sum_axis(self, axis: usize) -> Result<Var<'g>, DiffError> {
        let out = self.reduce(axis, OpKind::SumAxis, 0.0, |acc, x| acc + x)?;
        self.graph.record(out, Op::SumAxis(self.id, axis))
    }

    pub fn prod_axis(self, axis: usize) -> Result<Var<'g>, DiffError> {
        let out = self.reduce(axis, OpKind::ProdAxis, 1.0, |acc, x| acc * x)?;
        self.graph.record(out, Op::ProdAxis(self.id, axis))
    }

    /// Arithmetic mean over all elements.
    pub fn mean(self) -> Result<Var<'g>, DiffError> {
        let n = self.graph.value_of(self.id).len().max(1);
        self.sum()?.scale(1.0 / n as f64)
    }

    fn reduce(
        &self,
        axis: usize,
        kind: OpKind,
        init: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor, DiffError> {
        let a = self.graph.value_of(self.id);
        if axis >= a.rank() {
            return Err(DiffError::Axis {
                op: kind,
                axis,
                rank: a.rank(),
            });
        }
        let (outer, n, inner) = split_axis(a.shape(), axis);
        let x = a.data();
        let mut out = vec![init; outer * inner];
        for o in 0..outer {
            for j in 0..n {
                for i in 0..inner {
                    let dst = &mut out[o * inner + i];
                    *dst = f(*dst, x[(o * n + j) * inner + i]);
                }
            }
        }
        let mut shape = a.shape().to_vec();
        shape.remove(axis);
        Tensor::new(&shape, out)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
