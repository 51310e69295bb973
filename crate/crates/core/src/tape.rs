//! Reverse-mode differentiation over a linear record of vector operations.
//!
//! A forward pass appends nodes in execution order. `backward` walks the
//! record from the loss node down to the first node, accumulating parameter
//! gradients into the `ParamStore`. A tape can be differentiated once.

use crate::error::{Error, Result};
use crate::param::{ParamId, ParamStore};
use crate::tensor::{matvec_into, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementwise {
    Relu,
    Sigmoid,
    Tanh,
    PairwiseMax,
    Add,
    Mul,
}

#[derive(Debug)]
enum Op {
    Input,
    Lookup {
        table: ParamId,
        row: usize,
    },
    Affine {
        w: ParamId,
        x: NodeId,
        b: Option<ParamId>,
    },
    Unary(Elementwise, NodeId),
    Binary(Elementwise, NodeId, NodeId),
    Concat(Vec<NodeId>),
    Slice {
        x: NodeId,
        start: usize,
    },
    Sum(Vec<NodeId>),
    SumAll(NodeId),
    SoftmaxXent {
        logits: NodeId,
        target: usize,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Vec<f64>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    differentiated: bool,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax with max-subtraction. Returns `(log_sum_exp, probs)`.
pub fn softmax(logits: &[f64]) -> Result<(f64, Vec<f64>)> {
    if logits.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let z: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= z);
    Ok((m + z.ln(), probs))
}

/// Cross-entropy of `target` under `softmax(logits)`, plus the distribution.
pub fn softmax_xent(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    let (lse, probs) = softmax(logits)?;
    if target >= logits.len() {
        return Err(Error::TargetOutOfRange {
            index: target,
            size: logits.len(),
        });
    }
    let loss = (lse - logits[target]).max(0.0);
    Ok((loss, probs))
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

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn tensor(&self, id: NodeId) -> Tensor {
        Tensor::vector(self.nodes[id.0].value.clone())
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, data: Vec<f64>) -> NodeId {
        self.push(Op::Input, data)
    }

    /// Row `row` of an embedding table.
    pub fn lookup(&mut self, store: &ParamStore, table: ParamId, row: usize) -> Result<NodeId> {
        let t = store.value(table);
        if row >= t.rows() {
            return Err(Error::Vocabulary {
                index: row,
                size: t.rows(),
            });
        }
        let v = t.row(row).to_vec();
        Ok(self.push(Op::Lookup { table, row }, v))
    }

    /// `w · x + b`, with `b` optional.
    pub fn affine(
        &mut self,
        store: &ParamStore,
        w: ParamId,
        x: NodeId,
        b: Option<ParamId>,
    ) -> Result<NodeId> {
        let wt = store.value(w);
        let xv = &self.nodes[x.0].value;
        if wt.shape().len() != 2 || wt.cols() != xv.len() {
            return Err(Error::Dimension {
                op: "affine",
                left: wt.shape().to_vec(),
                right: vec![xv.len()],
            });
        }
        let rows = wt.rows();
        let mut out = vec![0.0; rows];
        matvec_into(wt.data(), rows, wt.cols(), xv, &mut out);
        if let Some(b) = b {
            let bt = store.value(b);
            if bt.len() != rows {
                return Err(Error::Dimension {
                    op: "affine bias",
                    left: wt.shape().to_vec(),
                    right: bt.shape().to_vec(),
                });
            }
            out.iter_mut().zip(bt.data()).for_each(|(o, b)| *o += b);
        }
        Ok(self.push(Op::Affine { w, x, b }, out))
    }

    pub fn elementwise(&mut self, op: Elementwise, a: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        match (op, b) {
            (Elementwise::Relu | Elementwise::Sigmoid | Elementwise::Tanh, None) => {
                let f: fn(f64) -> f64 = match op {
                    Elementwise::Relu => |x| x.max(0.0),
                    Elementwise::Sigmoid => sigmoid,
                    _ => f64::tanh,
                };
                let v = self.nodes[a.0].value.iter().map(|&x| f(x)).collect();
                Ok(self.push(Op::Unary(op, a), v))
            }
            (Elementwise::PairwiseMax | Elementwise::Add | Elementwise::Mul, Some(b)) => {
                let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                if av.len() != bv.len() {
                    return Err(Error::Dimension {
                        op: "elementwise",
                        left: vec![av.len()],
                        right: vec![bv.len()],
                    });
                }
                let f: fn(f64, f64) -> f64 = match op {
                    Elementwise::PairwiseMax => f64::max,
                    Elementwise::Add => |x, y| x + y,
                    _ => |x, y| x * y,
                };
                let v = av.iter().zip(bv).map(|(&x, &y)| f(x, y)).collect();
                Ok(self.push(Op::Binary(op, a, b), v))
            }
            _ => Err(Error::Config(format!(
                "elementwise {op:?} called with wrong operand count"
            ))),
        }
    }

    /// Which side of each non-differentiable point this pass took: one flag
    /// per ReLU input element (`> 0`) and per pairwise-max element (first
    /// operand `>=` second). Passes with equal patterns lie on the same
    /// smooth piece of the function.
    pub fn branch_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match node.op {
                Op::Unary(Elementwise::Relu, a) => {
                    out.extend(self.nodes[a.0].value.iter().map(|&x| x > 0.0));
                }
                Op::Binary(Elementwise::PairwiseMax, a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    out.extend(av.iter().zip(bv).map(|(x, y)| x >= y));
                }
                _ => {}
            }
        }
        out
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.elementwise(Elementwise::Relu, a, None).expect("unary")
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.elementwise(Elementwise::Sigmoid, a, None).expect("unary")
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.elementwise(Elementwise::Tanh, a, None).expect("unary")
    }

    pub fn max(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise(Elementwise::PairwiseMax, a, Some(b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise(Elementwise::Add, a, Some(b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise(Elementwise::Mul, a, Some(b))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut v = Vec::new();
        for p in parts {
            v.extend_from_slice(&self.nodes[p.0].value);
        }
        self.push(Op::Concat(parts.to_vec()), v)
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let xv = &self.nodes[x.0].value;
        if start + len > xv.len() || len == 0 {
            return Err(Error::Dimension {
                op: "slice",
                left: vec![xv.len()],
                right: vec![start, len],
            });
        }
        let v = xv[start..start + len].to_vec();
        Ok(self.push(Op::Slice { x, start }, v))
    }

    /// Elementwise sum of same-length nodes.
    pub fn sum(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = parts.first().ok_or(Error::EmptyDistribution)?;
        let n = self.nodes[first.0].value.len();
        let mut v = vec![0.0; n];
        for p in parts {
            let pv = &self.nodes[p.0].value;
            if pv.len() != n {
                return Err(Error::Dimension {
                    op: "sum",
                    left: vec![n],
                    right: vec![pv.len()],
                });
            }
            v.iter_mut().zip(pv).for_each(|(a, b)| *a += b);
        }
        Ok(self.push(Op::Sum(parts.to_vec()), v))
    }

    /// Scalar sum of all entries.
    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s = self.nodes[x.0].value.iter().sum();
        self.push(Op::SumAll(x), vec![s])
    }

    /// Scalar cross-entropy node; also returns the softmax distribution.
    pub fn softmax_xent(&mut self, logits: NodeId, target: usize) -> Result<(NodeId, Vec<f64>)> {
        let (loss, probs) = softmax_xent(&self.nodes[logits.0].value, target)?;
        let id = self.push(
            Op::SoftmaxXent {
                logits,
                target,
                probs: probs.clone(),
            },
            vec![loss],
        );
        Ok((id, probs))
    }

    /// Accumulates `∂loss/∂θ` into every parameter's `grad`.
    pub fn backward(&mut self, loss: NodeId, store: &mut ParamStore) -> Result<()> {
        if self.differentiated {
            return Err(Error::StaleTape);
        }
        let n = self.nodes[loss.0].value.len();
        if n != 1 {
            return Err(Error::NonScalarLoss(vec![n]));
        }
        self.differentiated = true;

        let mut grads: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Lookup { table, row } => {
                    let p = store.get_mut(*table);
                    let c = p.grad.cols();
                    let dst = &mut p.grad.data_mut()[row * c..(row + 1) * c];
                    dst.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                }
                Op::Affine { w, x, b } => {
                    let xv = &self.nodes[x.0].value;
                    let cols = xv.len();
                    {
                        let wg = store.get_mut(*w).grad.data_mut();
                        for (r, gr) in g.iter().enumerate() {
                            if *gr == 0.0 {
                                continue;
                            }
                            let row = &mut wg[r * cols..(r + 1) * cols];
                            row.iter_mut().zip(xv).for_each(|(d, xi)| *d += gr * xi);
                        }
                    }
                    if let Some(b) = b {
                        let bg = store.get_mut(*b).grad.data_mut();
                        bg.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                    }
                    let wv = store.value(*w).data();
                    let gx = accumulate(&mut grads, *x, cols);
                    for (r, gr) in g.iter().enumerate() {
                        if *gr == 0.0 {
                            continue;
                        }
                        let row = &wv[r * cols..(r + 1) * cols];
                        gx.iter_mut().zip(row).for_each(|(d, w)| *d += gr * w);
                    }
                }
                Op::Unary(kind, a) => {
                    let (out, av) = (&node.value, &self.nodes[a.0].value);
                    let ga = accumulate(&mut grads, *a, g.len());
                    for k in 0..g.len() {
                        let d = match kind {
                            Elementwise::Relu => {
                                if av[k] > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            Elementwise::Sigmoid => out[k] * (1.0 - out[k]),
                            _ => 1.0 - out[k] * out[k],
                        };
                        ga[k] += g[k] * d;
                    }
                }
                Op::Binary(kind, a, b) => {
                    let (a, b) = (*a, *b);
                    match kind {
                        Elementwise::Add => {
                            add_into(accumulate(&mut grads, a, g.len()), &g);
                            add_into(accumulate(&mut grads, b, g.len()), &g);
                        }
                        Elementwise::Mul => {
                            let bv = self.nodes[b.0].value.clone();
                            let av = &self.nodes[a.0].value;
                            let ga: Vec<f64> = g.iter().zip(&bv).map(|(g, b)| g * b).collect();
                            let gb: Vec<f64> = g.iter().zip(av).map(|(g, a)| g * a).collect();
                            add_into(accumulate(&mut grads, a, g.len()), &ga);
                            add_into(accumulate(&mut grads, b, g.len()), &gb);
                        }
                        _ => {
                            // Ties route to the first operand.
                            let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                            let first: Vec<bool> = av.iter().zip(bv).map(|(x, y)| x >= y).collect();
                            let ga = accumulate(&mut grads, a, g.len());
                            for k in 0..g.len() {
                                if first[k] {
                                    ga[k] += g[k];
                                }
                            }
                            let gb = accumulate(&mut grads, b, g.len());
                            for k in 0..g.len() {
                                if !first[k] {
                                    gb[k] += g[k];
                                }
                            }
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts.clone() {
                        let len = self.nodes[p.0].value.len();
                        add_into(accumulate(&mut grads, p, len), &g[off..off + len]);
                        off += len;
                    }
                }
                Op::Slice { x, start } => {
                    let len = self.nodes[x.0].value.len();
                    let gx = accumulate(&mut grads, *x, len);
                    add_into(&mut gx[*start..*start + g.len()], &g);
                }
                Op::Sum(parts) => {
                    for p in parts.clone() {
                        add_into(accumulate(&mut grads, p, g.len()), &g);
                    }
                }
                Op::SumAll(x) => {
                    let len = self.nodes[x.0].value.len();
                    let gx = accumulate(&mut grads, *x, len);
                    gx.iter_mut().for_each(|d| *d += g[0]);
                }
                Op::SoftmaxXent {
                    logits,
                    target,
                    probs,
                } => {
                    let gl = accumulate(&mut grads, *logits, probs.len());
                    for (k, p) in probs.iter().enumerate() {
                        let y = if k == *target { 1.0 } else { 0.0 };
                        gl[k] += g[0] * (p - y);
                    }
                }
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
    grads[id.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}
