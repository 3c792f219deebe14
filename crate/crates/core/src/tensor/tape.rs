//! Operation tape for reverse-mode differentiation.
//!
//! Forward calls record one node per result; [`Tape::backward`] walks the
//! nodes once in reverse creation order (reverse topological order by
//! construction) and accumulates gradients for every named parameter.
//! Batched network inputs use `[B, n, d]` tensors; plain matrices are 2D.

use super::{gemm, Tensor};
use super::optim::ParameterStore;
use indexmap::IndexMap;
use std::rc::Rc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Value(usize);

enum Op {
    Leaf,
    Param(String),
    /// `[m,k] x [k,n] -> [m,n]`
    Matmul(Value, Value),
    /// `[B,m,k] x [B,k,n] -> [B,m,n]`
    BatchMatmul(Value, Value),
    /// Constant `[n,n]` applied to each batch item of `[B,n,d]`.
    ConstMatmul(Rc<Tensor>, Value),
    Add(Value, Value),
    /// Last-axis broadcast add of a `[d]` parameter.
    AddBias(Value, Value),
    ScalarMul(Value, f64),
    ConcatLast(Value, Value),
    /// `[B,n,d]` -> `[B,k,d]` selecting the given middle-axis rows.
    GatherRows(Value, Rc<Vec<usize>>),
    /// `[B,k]` -> `[B,n,1]` writing entries at the given rows, zero elsewhere.
    ScatterRows(Value, Rc<Vec<usize>>, usize),
    /// `[B,n,d]` -> `[B,d]` arithmetic mean over the middle axis.
    MeanRows(Value),
    Relu(Value),
    LeakyRelu(Value, f64),
    Tanh(Value),
    /// Row-wise softmax of `[B,n,n]` scores over positions where the
    /// constant `[n,n]` mask is nonzero; masked-out entries are zero.
    MaskedSoftmaxRows(Value, Rc<Tensor>),
    /// Attention scores `e[b,i,j] = sum_f a[f] * leaky(s[b,i,f] + t[b,j,f])`.
    GatPairScores {
        s: Value,
        t: Value,
        a: Value,
        slope: f64,
    },
    MinElem(Value, Value),
    Square(Value),
    /// Total sum -> `[1]`.
    Sum(Value),
    Reshape(Value),
}

struct Node {
    op: Op,
    out: Tensor,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    spent: bool,
}

/// Parameter gradients keyed by name, in first-use order.
pub struct Gradients {
    pub by_name: IndexMap<String, Tensor>,
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

    pub fn value(&self, v: Value) -> &Tensor {
        &self.nodes[v.0].out
    }

    fn push(&mut self, op: Op, out: Tensor) -> Value {
        self.nodes.push(Node { op, out });
        Value(self.nodes.len() - 1)
    }

    /// Record a constant (non-parameter) input.
    pub fn leaf(&mut self, t: Tensor) -> Value {
        self.push(Op::Leaf, t)
    }

    /// Record a named parameter from a store; its gradient is collected by
    /// [`Tape::backward`].
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Value {
        let t = store.get(name).clone();
        self.push(Op::Param(name.to_string()), t)
    }

    pub fn matmul(&mut self, a: Value, b: Value) -> Value {
        let (ta, tb) = (self.value(a), self.value(b));
        assert!(
            ta.shape().len() == 2 && tb.shape().len() == 2 && ta.shape()[1] == tb.shape()[0],
            "matmul shape mismatch: {:?} x {:?}",
            ta.shape(),
            tb.shape()
        );
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut out = Tensor::zeros(&[m, n]);
        gemm(m, k, n, ta.data(), false, tb.data(), false, 0.0, out.data_mut());
        self.push(Op::Matmul(a, b), out)
    }

    pub fn batch_matmul(&mut self, a: Value, b: Value) -> Value {
        let (ta, tb) = (self.value(a), self.value(b));
        assert!(
            ta.shape().len() == 3
                && tb.shape().len() == 3
                && ta.shape()[0] == tb.shape()[0]
                && ta.shape()[2] == tb.shape()[1],
            "batch_matmul shape mismatch: {:?} x {:?}",
            ta.shape(),
            tb.shape()
        );
        let (bsz, m, k, n) = (ta.shape()[0], ta.shape()[1], ta.shape()[2], tb.shape()[2]);
        let mut out = Tensor::zeros(&[bsz, m, n]);
        for i in 0..bsz {
            gemm(
                m,
                k,
                n,
                &ta.data()[i * m * k..(i + 1) * m * k],
                false,
                &tb.data()[i * k * n..(i + 1) * k * n],
                false,
                0.0,
                &mut out.data_mut()[i * m * n..(i + 1) * m * n],
            );
        }
        self.push(Op::BatchMatmul(a, b), out)
    }

    /// Multiply every batch item of `x` (`[B,n,d]`) by the constant matrix
    /// `m` (`[n,n]`) on the left.
    pub fn const_matmul(&mut self, m: Rc<Tensor>, x: Value) -> Value {
        let tx = self.value(x);
        assert!(
            tx.shape().len() == 3 && m.shape() == [tx.shape()[1], tx.shape()[1]],
            "const_matmul shape mismatch: {:?} x {:?}",
            m.shape(),
            tx.shape()
        );
        let (bsz, n, d) = (tx.shape()[0], tx.shape()[1], tx.shape()[2]);
        let mut out = Tensor::zeros(&[bsz, n, d]);
        for i in 0..bsz {
            gemm(
                n,
                n,
                d,
                m.data(),
                false,
                &tx.data()[i * n * d..(i + 1) * n * d],
                false,
                0.0,
                &mut out.data_mut()[i * n * d..(i + 1) * n * d],
            );
        }
        self.push(Op::ConstMatmul(m, x), out)
    }

    pub fn add(&mut self, a: Value, b: Value) -> Value {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(
            ta.shape(),
            tb.shape(),
            "add shape mismatch: {:?} vs {:?}",
            ta.shape(),
            tb.shape()
        );
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x + y)
            .collect();
        let out = Tensor::new(ta.shape().to_vec(), data);
        self.push(Op::Add(a, b), out)
    }

    pub fn add_bias(&mut self, x: Value, bias: Value) -> Value {
        let (tx, tb) = (self.value(x), self.value(bias));
        assert!(
            tb.shape().len() == 1 && tb.shape()[0] == tx.last_dim(),
            "add_bias shape mismatch: {:?} + {:?}",
            tx.shape(),
            tb.shape()
        );
        let d = tx.last_dim();
        let mut out = tx.clone();
        for row in out.data_mut().chunks_mut(d) {
            for (o, b) in row.iter_mut().zip(tb.data()) {
                *o += b;
            }
        }
        self.push(Op::AddBias(x, bias), out)
    }

    pub fn scalar_mul(&mut self, x: Value, c: f64) -> Value {
        let tx = self.value(x);
        let data = tx.data().iter().map(|v| v * c).collect();
        let out = Tensor::new(tx.shape().to_vec(), data);
        self.push(Op::ScalarMul(x, c), out)
    }

    pub fn concat_last(&mut self, a: Value, b: Value) -> Value {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(
            ta.shape()[..ta.shape().len() - 1],
            tb.shape()[..tb.shape().len() - 1],
            "concat_last leading shape mismatch: {:?} vs {:?}",
            ta.shape(),
            tb.shape()
        );
        let (da, db) = (ta.last_dim(), tb.last_dim());
        let rows = ta.leading();
        let mut shape = ta.shape().to_vec();
        *shape.last_mut().unwrap() = da + db;
        let mut data = Vec::with_capacity(rows * (da + db));
        for r in 0..rows {
            data.extend_from_slice(&ta.data()[r * da..(r + 1) * da]);
            data.extend_from_slice(&tb.data()[r * db..(r + 1) * db]);
        }
        let out = Tensor::new(shape, data);
        self.push(Op::ConcatLast(a, b), out)
    }

    pub fn gather_rows(&mut self, x: Value, rows: Rc<Vec<usize>>) -> Value {
        let tx = self.value(x);
        assert!(
            tx.shape().len() == 3,
            "gather_rows wants [B,n,d], got {:?}",
            tx.shape()
        );
        let (bsz, n, d) = (tx.shape()[0], tx.shape()[1], tx.shape()[2]);
        assert!(rows.iter().all(|&r| r < n), "gather row out of range");
        let k = rows.len();
        let mut out = Tensor::zeros(&[bsz, k, d]);
        for b in 0..bsz {
            for (j, &r) in rows.iter().enumerate() {
                out.data_mut()[(b * k + j) * d..(b * k + j + 1) * d]
                    .copy_from_slice(&tx.data()[(b * n + r) * d..(b * n + r + 1) * d]);
            }
        }
        self.push(Op::GatherRows(x, rows), out)
    }

    pub fn scatter_rows(&mut self, src: Value, rows: Rc<Vec<usize>>, n: usize) -> Value {
        let ts = self.value(src);
        assert!(
            ts.shape().len() == 2 && ts.shape()[1] == rows.len(),
            "scatter_rows wants [B,k] with k = rows, got {:?} for {} rows",
            ts.shape(),
            rows.len()
        );
        let (bsz, k) = (ts.shape()[0], ts.shape()[1]);
        let mut out = Tensor::zeros(&[bsz, n, 1]);
        for b in 0..bsz {
            for (j, &r) in rows.iter().enumerate() {
                out.data_mut()[b * n + r] = ts.data()[b * k + j];
            }
        }
        self.push(Op::ScatterRows(src, rows, n), out)
    }

    pub fn mean_rows(&mut self, x: Value) -> Value {
        let tx = self.value(x);
        assert!(
            tx.shape().len() == 3 && tx.shape()[1] > 0,
            "mean_rows wants non-empty [B,n,d], got {:?}",
            tx.shape()
        );
        let (bsz, n, d) = (tx.shape()[0], tx.shape()[1], tx.shape()[2]);
        let mut out = Tensor::zeros(&[bsz, d]);
        for b in 0..bsz {
            for r in 0..n {
                for c in 0..d {
                    out.data_mut()[b * d + c] += tx.data()[(b * n + r) * d + c];
                }
            }
            for c in 0..d {
                out.data_mut()[b * d + c] /= n as f64;
            }
        }
        self.push(Op::MeanRows(x), out)
    }

    pub fn relu(&mut self, x: Value) -> Value {
        let tx = self.value(x);
        let data = tx.data().iter().map(|&v| v.max(0.0)).collect();
        let out = Tensor::new(tx.shape().to_vec(), data);
        self.push(Op::Relu(x), out)
    }

    pub fn leaky_relu(&mut self, x: Value, slope: f64) -> Value {
        let tx = self.value(x);
        let data = tx
            .data()
            .iter()
            .map(|&v| if v > 0.0 { v } else { slope * v })
            .collect();
        let out = Tensor::new(tx.shape().to_vec(), data);
        self.push(Op::LeakyRelu(x, slope), out)
    }

    pub fn tanh(&mut self, x: Value) -> Value {
        let tx = self.value(x);
        let data = tx.data().iter().map(|&v| v.tanh()).collect();
        let out = Tensor::new(tx.shape().to_vec(), data);
        self.push(Op::Tanh(x), out)
    }

    pub fn masked_softmax_rows(&mut self, scores: Value, mask: Rc<Tensor>) -> Value {
        let ts = self.value(scores);
        assert!(
            ts.shape().len() == 3
                && ts.shape()[1] == ts.shape()[2]
                && mask.shape() == [ts.shape()[1], ts.shape()[2]],
            "masked_softmax_rows shape mismatch: scores {:?}, mask {:?}",
            ts.shape(),
            mask.shape()
        );
        let (bsz, n) = (ts.shape()[0], ts.shape()[1]);
        let mut out = Tensor::zeros(&[bsz, n, n]);
        for b in 0..bsz {
            for i in 0..n {
                let row = &ts.data()[(b * n + i) * n..(b * n + i + 1) * n];
                let mrow = &mask.data()[i * n..(i + 1) * n];
                let mut maxv = f64::NEG_INFINITY;
                for j in 0..n {
                    if mrow[j] != 0.0 && row[j] > maxv {
                        maxv = row[j];
                    }
                }
                assert!(
                    maxv.is_finite(),
                    "masked_softmax_rows: row {i} has no unmasked entries"
                );
                let mut denom = 0.0;
                for j in 0..n {
                    if mrow[j] != 0.0 {
                        denom += (row[j] - maxv).exp();
                    }
                }
                let orow = &mut out.data_mut()[(b * n + i) * n..(b * n + i + 1) * n];
                for j in 0..n {
                    if mrow[j] != 0.0 {
                        orow[j] = (row[j] - maxv).exp() / denom;
                    }
                }
            }
        }
        self.push(Op::MaskedSoftmaxRows(scores, mask), out)
    }

    pub fn gat_pair_scores(&mut self, s: Value, t: Value, a: Value, slope: f64) -> Value {
        let (ts, tt, ta) = (self.value(s), self.value(t), self.value(a));
        assert!(
            ts.shape().len() == 3 && ts.shape() == tt.shape(),
            "gat_pair_scores wants matching [B,n,d], got {:?} and {:?}",
            ts.shape(),
            tt.shape()
        );
        assert!(
            ta.shape() == [ts.shape()[2]],
            "gat_pair_scores attention vector {:?} does not match feature dim {:?}",
            ta.shape(),
            ts.shape()
        );
        let (bsz, n, d) = (ts.shape()[0], ts.shape()[1], ts.shape()[2]);
        let mut out = Tensor::zeros(&[bsz, n, n]);
        for b in 0..bsz {
            for i in 0..n {
                let srow = &ts.data()[(b * n + i) * d..(b * n + i + 1) * d];
                for j in 0..n {
                    let trow = &tt.data()[(b * n + j) * d..(b * n + j + 1) * d];
                    let mut e = 0.0;
                    for f in 0..d {
                        let z = srow[f] + trow[f];
                        e += ta.data()[f] * if z > 0.0 { z } else { slope * z };
                    }
                    out.data_mut()[(b * n + i) * n + j] = e;
                }
            }
        }
        self.push(Op::GatPairScores { s, t, a, slope }, out)
    }

    pub fn min_elem(&mut self, a: Value, b: Value) -> Value {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(
            ta.shape(),
            tb.shape(),
            "min_elem shape mismatch: {:?} vs {:?}",
            ta.shape(),
            tb.shape()
        );
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| x.min(y))
            .collect();
        let out = Tensor::new(ta.shape().to_vec(), data);
        self.push(Op::MinElem(a, b), out)
    }

    pub fn square(&mut self, x: Value) -> Value {
        let tx = self.value(x);
        let data = tx.data().iter().map(|&v| v * v).collect();
        let out = Tensor::new(tx.shape().to_vec(), data);
        self.push(Op::Square(x), out)
    }

    pub fn sum(&mut self, x: Value) -> Value {
        let total: f64 = self.value(x).data().iter().sum();
        self.push(Op::Sum(x), Tensor::scalar(total))
    }

    pub fn reshape(&mut self, x: Value, shape: Vec<usize>) -> Value {
        let out = self.value(x).reshaped(shape);
        self.push(Op::Reshape(x), out)
    }

    /// Mean of all elements as a scalar value.
    pub fn mean_all(&mut self, x: Value) -> Value {
        let n = self.value(x).len() as f64;
        let s = self.sum(x);
        self.scalar_mul(s, 1.0 / n)
    }

    /// Backpropagate from a scalar loss, returning gradients for every
    /// parameter reachable on the tape. Panics if `loss` is not scalar or if
    /// the tape was already consumed.
    pub fn backward(&mut self, loss: Value) -> Gradients {
        assert!(!self.spent, "backward called twice without re-recording");
        self.spent = true;
        assert_eq!(
            self.value(loss).len(),
            1,
            "backward on non-scalar loss of shape {:?}",
            self.value(loss).shape()
        );
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut out = Gradients {
            by_name: IndexMap::new(),
        };

        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let (prev, _) = grads.split_at_mut(idx);
            let node = &self.nodes[idx];
            let mut add_to = |v: Value, delta: Tensor| {
                debug_assert!(v.0 < idx);
                if let Some(acc) = &mut prev[v.0] {
                    for (a, d) in acc.data_mut().iter_mut().zip(delta.data()) {
                        *a += d;
                    }
                } else {
                    prev[v.0] = Some(delta);
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(name) => match out.by_name.get_mut(name.as_str()) {
                    Some(acc) => {
                        for (a, d) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += d;
                        }
                    }
                    None => {
                        out.by_name.insert(name.clone(), g);
                    }
                },
                Op::Matmul(a, b) => {
                    let ta = &self.nodes[a.0].out;
                    let tb = &self.nodes[b.0].out;
                    let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                    let mut ga = Tensor::zeros(&[m, k]);
                    gemm(m, n, k, g.data(), false, tb.data(), true, 0.0, ga.data_mut());
                    let mut gb = Tensor::zeros(&[k, n]);
                    gemm(k, m, n, ta.data(), true, g.data(), false, 0.0, gb.data_mut());
                    add_to(*a, ga);
                    add_to(*b, gb);
                }
                Op::BatchMatmul(a, b) => {
                    let ta = &self.nodes[a.0].out;
                    let tb = &self.nodes[b.0].out;
                    let (bsz, m, k, n) =
                        (ta.shape()[0], ta.shape()[1], ta.shape()[2], tb.shape()[2]);
                    let mut ga = Tensor::zeros(&[bsz, m, k]);
                    let mut gb = Tensor::zeros(&[bsz, k, n]);
                    for i in 0..bsz {
                        gemm(
                            m,
                            n,
                            k,
                            &g.data()[i * m * n..(i + 1) * m * n],
                            false,
                            &tb.data()[i * k * n..(i + 1) * k * n],
                            true,
                            0.0,
                            &mut ga.data_mut()[i * m * k..(i + 1) * m * k],
                        );
                        gemm(
                            k,
                            m,
                            n,
                            &ta.data()[i * m * k..(i + 1) * m * k],
                            true,
                            &g.data()[i * m * n..(i + 1) * m * n],
                            false,
                            0.0,
                            &mut gb.data_mut()[i * k * n..(i + 1) * k * n],
                        );
                    }
                    add_to(*a, ga);
                    add_to(*b, gb);
                }
                Op::ConstMatmul(mt, x) => {
                    let tx = &self.nodes[x.0].out;
                    let (bsz, n, d) = (tx.shape()[0], tx.shape()[1], tx.shape()[2]);
                    let mut gx = Tensor::zeros(&[bsz, n, d]);
                    for i in 0..bsz {
                        gemm(
                            n,
                            n,
                            d,
                            mt.data(),
                            true,
                            &g.data()[i * n * d..(i + 1) * n * d],
                            false,
                            0.0,
                            &mut gx.data_mut()[i * n * d..(i + 1) * n * d],
                        );
                    }
                    add_to(*x, gx);
                }
                Op::Add(a, b) => {
                    add_to(*a, g.clone());
                    add_to(*b, g);
                }
                Op::AddBias(x, bias) => {
                    let d = self.nodes[bias.0].out.len();
                    let mut gb = Tensor::zeros(&[d]);
                    for row in g.data().chunks(d) {
                        for (acc, v) in gb.data_mut().iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                    add_to(*x, g.clone());
                    add_to(*bias, gb);
                }
                Op::ScalarMul(x, c) => {
                    let data = g.data().iter().map(|v| v * c).collect();
                    add_to(*x, Tensor::new(g.shape().to_vec(), data));
                }
                Op::ConcatLast(a, b) => {
                    let (da, db) = (
                        self.nodes[a.0].out.last_dim(),
                        self.nodes[b.0].out.last_dim(),
                    );
                    let rows = g.leading();
                    let mut ga = Tensor::zeros(self.nodes[a.0].out.shape());
                    let mut gb = Tensor::zeros(self.nodes[b.0].out.shape());
                    for r in 0..rows {
                        let src = &g.data()[r * (da + db)..(r + 1) * (da + db)];
                        ga.data_mut()[r * da..(r + 1) * da].copy_from_slice(&src[..da]);
                        gb.data_mut()[r * db..(r + 1) * db].copy_from_slice(&src[da..]);
                    }
                    add_to(*a, ga);
                    add_to(*b, gb);
                }
                Op::GatherRows(x, rows) => {
                    let tx = &self.nodes[x.0].out;
                    let (bsz, n, d) = (tx.shape()[0], tx.shape()[1], tx.shape()[2]);
                    let k = rows.len();
                    let mut gx = Tensor::zeros(&[bsz, n, d]);
                    for b in 0..bsz {
                        for (j, &r) in rows.iter().enumerate() {
                            for c in 0..d {
                                gx.data_mut()[(b * n + r) * d + c] +=
                                    g.data()[(b * k + j) * d + c];
                            }
                        }
                    }
                    add_to(*x, gx);
                }
                Op::ScatterRows(src, rows, n) => {
                    let ts = &self.nodes[src.0].out;
                    let (bsz, k) = (ts.shape()[0], ts.shape()[1]);
                    let mut gs = Tensor::zeros(&[bsz, k]);
                    for b in 0..bsz {
                        for (j, &r) in rows.iter().enumerate() {
                            gs.data_mut()[b * k + j] = g.data()[b * n + r];
                        }
                    }
                    add_to(*src, gs);
                }
                Op::MeanRows(x) => {
                    let tx = &self.nodes[x.0].out;
                    let (bsz, n, d) = (tx.shape()[0], tx.shape()[1], tx.shape()[2]);
                    let mut gx = Tensor::zeros(&[bsz, n, d]);
                    for b in 0..bsz {
                        for r in 0..n {
                            for c in 0..d {
                                gx.data_mut()[(b * n + r) * d + c] =
                                    g.data()[b * d + c] / n as f64;
                            }
                        }
                    }
                    add_to(*x, gx);
                }
                Op::Relu(x) => {
                    let tx = &self.nodes[x.0].out;
                    let data = g
                        .data()
                        .iter()
                        .zip(tx.data())
                        .map(|(&gv, &xv)| if xv > 0.0 { gv } else { 0.0 })
                        .collect();
                    add_to(*x, Tensor::new(g.shape().to_vec(), data));
                }
                Op::LeakyRelu(x, slope) => {
                    let tx = &self.nodes[x.0].out;
                    let data = g
                        .data()
                        .iter()
                        .zip(tx.data())
                        .map(|(&gv, &xv)| if xv > 0.0 { gv } else { slope * gv })
                        .collect();
                    add_to(*x, Tensor::new(g.shape().to_vec(), data));
                }
                Op::Tanh(x) => {
                    let data = g
                        .data()
                        .iter()
                        .zip(node.out.data())
                        .map(|(&gv, &y)| gv * (1.0 - y * y))
                        .collect();
                    add_to(*x, Tensor::new(g.shape().to_vec(), data));
                }
                Op::MaskedSoftmaxRows(scores, _mask) => {
                    let y = node.out.data();
                    let shape = node.out.shape();
                    let (bsz, n) = (shape[0], shape[1]);
                    let mut gs = Tensor::zeros(shape);
                    for b in 0..bsz {
                        for i in 0..n {
                            let off = (b * n + i) * n;
                            let yrow = &y[off..off + n];
                            let grow = &g.data()[off..off + n];
                            let dot: f64 =
                                yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                            let orow = &mut gs.data_mut()[off..off + n];
                            for j in 0..n {
                                orow[j] = yrow[j] * (grow[j] - dot);
                            }
                        }
                    }
                    add_to(*scores, gs);
                }
                Op::GatPairScores { s, t, a, slope } => {
                    let ts = &self.nodes[s.0].out;
                    let tt = &self.nodes[t.0].out;
                    let ta = &self.nodes[a.0].out;
                    let (bsz, n, d) = (ts.shape()[0], ts.shape()[1], ts.shape()[2]);
                    let mut gs = Tensor::zeros(&[bsz, n, d]);
                    let mut gt = Tensor::zeros(&[bsz, n, d]);
                    let mut ga = Tensor::zeros(&[d]);
                    for b in 0..bsz {
                        for i in 0..n {
                            let srow = &ts.data()[(b * n + i) * d..(b * n + i + 1) * d];
                            for j in 0..n {
                                let ge = g.data()[(b * n + i) * n + j];
                                if ge == 0.0 {
                                    continue;
                                }
                                let trow = &tt.data()[(b * n + j) * d..(b * n + j + 1) * d];
                                for f in 0..d {
                                    let z = srow[f] + trow[f];
                                    let (act, dact) = if z > 0.0 {
                                        (z, 1.0)
                                    } else {
                                        (slope * z, *slope)
                                    };
                                    let w = ge * ta.data()[f] * dact;
                                    gs.data_mut()[(b * n + i) * d + f] += w;
                                    gt.data_mut()[(b * n + j) * d + f] += w;
                                    ga.data_mut()[f] += ge * act;
                                }
                            }
                        }
                    }
                    add_to(*s, gs);
                    add_to(*t, gt);
                    add_to(*a, ga);
                }
                Op::MinElem(a, b) => {
                    let ta = &self.nodes[a.0].out;
                    let tb = &self.nodes[b.0].out;
                    let mut ga = Tensor::zeros(ta.shape());
                    let mut gb = Tensor::zeros(tb.shape());
                    for i in 0..g.len() {
                        if ta.data()[i] <= tb.data()[i] {
                            ga.data_mut()[i] = g.data()[i];
                        } else {
                            gb.data_mut()[i] = g.data()[i];
                        }
                    }
                    add_to(*a, ga);
                    add_to(*b, gb);
                }
                Op::Square(x) => {
                    let tx = &self.nodes[x.0].out;
                    let data = g
                        .data()
                        .iter()
                        .zip(tx.data())
                        .map(|(&gv, &xv)| 2.0 * xv * gv)
                        .collect();
                    add_to(*x, Tensor::new(g.shape().to_vec(), data));
                }
                Op::Sum(x) => {
                    let tx = &self.nodes[x.0].out;
                    let gv = g.item();
                    add_to(*x, Tensor::new(tx.shape().to_vec(), vec![gv; tx.len()]));
                }
                Op::Reshape(x) => {
                    let tx = &self.nodes[x.0].out;
                    add_to(*x, g.reshaped(tx.shape().to_vec()));
                }
            }
        }
        out
    }
}
