use std::cell::{Cell, RefCell};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::gemm::gemm;
use super::{Result, Tensor, TensorError};

static NEXT_TAPE: AtomicU64 = AtomicU64::new(1);

/// Position of a recorded value on a specific tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId {
    pub(crate) tape: u64,
    pub(crate) index: usize,
}

impl NodeId {
    pub fn index(&self) -> usize {
        self.index
    }
}

type Saved = Arc<Vec<f64>>;

/// A recorded primitive application together with whatever its
/// vector-Jacobian product needs.
pub(crate) enum Op {
    Leaf,
    MatMul { a: Saved, b: Saved, m: usize, k: usize, n: usize },
    BatchMatMul { a: Saved, b: Saved, batch: usize, m: usize, k: usize, n: usize },
    Add,
    Sub,
    Mul { a: Saved, b: Saved },
    Div { a: Saved, b: Saved },
    Scale(f64),
    Relu { out: Saved },
    Tanh { out: Saved },
    Exp { out: Saved },
    Log { input: Saved },
    Sqrt { out: Saved },
    Square { input: Saved },
    Softmax { out: Saved, cols: usize },
    Sum,
    Mean,
    Dot { a: Saved, b: Saved },
    Concat { outer: usize, inner: usize, sizes: Vec<usize> },
    Slice { outer: usize, inner: usize, full: usize, start: usize, len: usize },
    Transpose { batch: usize, rows: usize, cols: usize },
    BiasAdd { cols: usize },
    Reshape,
}

struct Node {
    op: Op,
    inputs: Vec<Option<usize>>,
    numel: usize,
}

/// Records primitive applications in execution order.
///
/// Every node on the tape requires a gradient: primitives whose inputs are
/// all constants are evaluated without being recorded. A tape supports a
/// single backward pass.
pub struct Tape {
    id: u64,
    nodes: RefCell<Vec<Node>>,
    consumed: Cell<bool>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            nodes: RefCell::new(Vec::new()),
            consumed: Cell::new(false),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers a copy of `value` as a gradient-receiving leaf.
    pub fn param(&self, value: &Tensor) -> Tensor {
        assert!(!self.consumed.get(), "param() on a consumed tape");
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len();
        nodes.push(Node {
            op: Op::Leaf,
            inputs: Vec::new(),
            numel: value.numel(),
        });
        Tensor {
            shape: value.shape.clone(),
            data: value.shared_data(),
            node: Some(NodeId { tape: self.id, index }),
        }
    }

    /// Returns the tape index of `t`, or `None` for a constant.
    fn input_index(&self, t: &Tensor) -> Result<Option<usize>> {
        match t.node {
            None => Ok(None),
            Some(id) if id.tape == self.id => Ok(Some(id.index)),
            Some(_) => Err(TensorError::ForeignTensor),
        }
    }

    pub(crate) fn record(
        &self,
        op: Op,
        inputs: &[&Tensor],
        shape: Vec<usize>,
        data: Vec<f64>,
    ) -> Result<Tensor> {
        let mut idx = Vec::with_capacity(inputs.len());
        for t in inputs {
            idx.push(self.input_index(t)?);
        }
        if idx.iter().all(Option::is_none) {
            return Ok(Tensor::from_parts(shape, data, None));
        }
        if self.consumed.get() {
            return Err(TensorError::StaleTape);
        }
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len();
        nodes.push(Node {
            op,
            inputs: idx,
            numel: data.len(),
        });
        Ok(Tensor::from_parts(
            shape,
            data,
            Some(NodeId { tape: self.id, index }),
        ))
    }

    /// Reverse-mode sweep from a scalar loss. Consumes the tape.
    pub fn backward(&self, loss: &Tensor) -> Result<Gradients> {
        if self.consumed.get() {
            return Err(TensorError::StaleTape);
        }
        if loss.numel() != 1 {
            return Err(TensorError::NonScalarLoss(loss.shape.clone()));
        }
        let root = self.input_index(loss)?.ok_or(TensorError::NotOnTape)?;
        self.consumed.set(true);

        let nodes = self.nodes.borrow();
        let mut grads: Vec<Option<Vec<f64>>> = (0..nodes.len()).map(|_| None).collect();
        grads[root] = Some(vec![1.0]);

        for i in (0..=root).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            let contribs = vjp(&node.op, &g, &node.inputs, &nodes);
            for (input, contrib) in node.inputs.iter().zip(contribs) {
                if let (Some(j), Some(c)) = (input, contrib) {
                    accumulate(&mut grads[*j], c);
                }
            }
        }
        for (i, node) in nodes.iter().enumerate() {
            if !matches!(node.op, Op::Leaf) {
                grads[i] = None;
            }
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, contrib: Vec<f64>) {
    match slot {
        Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, c)| *a += c),
        None => *slot = Some(contrib),
    }
}

/// Input gradients for one node; `None` where the input is a constant.
fn vjp(op: &Op, g: &[f64], inputs: &[Option<usize>], nodes: &[Node]) -> Vec<Option<Vec<f64>>> {
    let wants = |i: usize| inputs[i].is_some();
    let map = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..g.len()).map(f).collect() };
    match op {
        Op::Leaf => Vec::new(),
        Op::MatMul { a, b, m, k, n } => {
            let (m, k, n) = (*m, *k, *n);
            let da = wants(0).then(|| {
                let mut out = vec![0.0; m * k];
                gemm(m, n, k, g, false, b, true, 0.0, &mut out);
                out
            });
            let db = wants(1).then(|| {
                let mut out = vec![0.0; k * n];
                gemm(k, m, n, a, true, g, false, 0.0, &mut out);
                out
            });
            vec![da, db]
        }
        Op::BatchMatMul { a, b, batch, m, k, n } => {
            let (m, k, n) = (*m, *k, *n);
            let da = wants(0).then(|| {
                let mut out = vec![0.0; batch * m * k];
                for s in 0..*batch {
                    gemm(
                        m,
                        n,
                        k,
                        &g[s * m * n..],
                        false,
                        &b[s * k * n..],
                        true,
                        0.0,
                        &mut out[s * m * k..],
                    );
                }
                out
            });
            let db = wants(1).then(|| {
                let mut out = vec![0.0; batch * k * n];
                for s in 0..*batch {
                    gemm(
                        k,
                        m,
                        n,
                        &a[s * m * k..],
                        true,
                        &g[s * m * n..],
                        false,
                        0.0,
                        &mut out[s * k * n..],
                    );
                }
                out
            });
            vec![da, db]
        }
        Op::Add => vec![wants(0).then(|| g.to_vec()), wants(1).then(|| g.to_vec())],
        Op::Sub => vec![
            wants(0).then(|| g.to_vec()),
            wants(1).then(|| g.iter().map(|x| -x).collect()),
        ],
        Op::Mul { a, b } => vec![
            wants(0).then(|| map(&|i| g[i] * b[i])),
            wants(1).then(|| map(&|i| g[i] * a[i])),
        ],
        Op::Div { a, b } => vec![
            wants(0).then(|| map(&|i| g[i] / b[i])),
            wants(1).then(|| map(&|i| -g[i] * a[i] / (b[i] * b[i]))),
        ],
        Op::Scale(c) => vec![Some(g.iter().map(|x| x * c).collect())],
        Op::Relu { out } => vec![Some(map(&|i| if out[i] > 0.0 { g[i] } else { 0.0 }))],
        Op::Tanh { out } => vec![Some(map(&|i| g[i] * (1.0 - out[i] * out[i])))],
        Op::Exp { out } => vec![Some(map(&|i| g[i] * out[i]))],
        Op::Log { input } => vec![Some(map(&|i| g[i] / input[i]))],
        // sqrt is not differentiable at 0; the zero subgradient keeps
        // all-zero vectors (e.g. a zero-initialised velocity head) finite.
        Op::Sqrt { out } => vec![Some(map(&|i| {
            if out[i] > 0.0 {
                g[i] / (2.0 * out[i])
            } else {
                0.0
            }
        }))],
        Op::Square { input } => vec![Some(map(&|i| 2.0 * input[i] * g[i]))],
        Op::Softmax { out, cols } => {
            let mut dx = vec![0.0; g.len()];
            for ((gr, sr), dr) in g
                .chunks(*cols)
                .zip(out.chunks(*cols))
                .zip(dx.chunks_mut(*cols))
            {
                let inner: f64 = gr.iter().zip(sr).map(|(a, b)| a * b).sum();
                for j in 0..*cols {
                    dr[j] = sr[j] * (gr[j] - inner);
                }
            }
            vec![Some(dx)]
        }
        Op::Sum => {
            let n = nodes[inputs[0].unwrap_or(0)].numel;
            vec![wants(0).then(|| vec![g[0]; n])]
        }
        Op::Mean => {
            let n = nodes[inputs[0].unwrap_or(0)].numel;
            vec![wants(0).then(|| vec![g[0] / n as f64; n])]
        }
        Op::Dot { a, b } => vec![
            wants(0).then(|| b.iter().map(|x| x * g[0]).collect()),
            wants(1).then(|| a.iter().map(|x| x * g[0]).collect()),
        ],
        Op::Concat { outer, inner, sizes } => {
            let total: usize = sizes.iter().sum();
            let mut offset = 0;
            sizes
                .iter()
                .enumerate()
                .map(|(j, &size)| {
                    let start = offset;
                    offset += size;
                    wants(j).then(|| {
                        let chunk = size * inner;
                        let mut out = Vec::with_capacity(outer * chunk);
                        for o in 0..*outer {
                            let base = (o * total + start) * inner;
                            out.extend_from_slice(&g[base..base + chunk]);
                        }
                        out
                    })
                })
                .collect()
        }
        Op::Slice {
            outer,
            inner,
            full,
            start,
            len,
        } => {
            let mut out = vec![0.0; outer * full * inner];
            let chunk = len * inner;
            for o in 0..*outer {
                let dst = (o * full + start) * inner;
                out[dst..dst + chunk].copy_from_slice(&g[o * chunk..(o + 1) * chunk]);
            }
            vec![Some(out)]
        }
        Op::Transpose { batch, rows, cols } => {
            // g is batch × cols × rows; map it back to batch × rows × cols.
            vec![Some(transpose_last2(g, *batch, *cols, *rows))]
        }
        Op::BiasAdd { cols } => {
            let db = wants(1).then(|| {
                let mut acc = vec![0.0; *cols];
                for row in g.chunks(*cols) {
                    acc.iter_mut().zip(row).for_each(|(a, x)| *a += x);
                }
                acc
            });
            vec![wants(0).then(|| g.to_vec()), db]
        }
        Op::Reshape => vec![Some(g.to_vec())],
    }
}

pub(crate) fn transpose_last2(x: &[f64], batch: usize, rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let size = rows * cols;
    for s in 0..batch {
        let src = &x[s * size..(s + 1) * size];
        let dst = &mut out[s * size..(s + 1) * size];
        for r in 0..rows {
            for c in 0..cols {
                dst[c * rows + r] = src[r * cols + c];
            }
        }
    }
    out
}

/// Gradients of one backward pass, keyed by parameter leaf.
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient for a leaf created by [`Tape::param`]. Leaves the loss does
    /// not depend on have an all-zero gradient.
    pub fn wrt(&self, leaf: &Tensor) -> Option<&[f64]> {
        let id = leaf.node?;
        if id.tape != self.tape {
            return None;
        }
        self.grads.get(id.index)?.as_deref()
    }

    /// Like [`Gradients::wrt`] but materialises zeros for unreached leaves.
    pub fn wrt_or_zero(&self, leaf: &Tensor) -> Vec<f64> {
        self.wrt(leaf)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; leaf.numel()])
    }

    /// Number of leaves that received a gradient.
    pub fn len(&self) -> usize {
        self.grads.iter().filter(|g| g.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
