use super::gemm::gemm;
use super::tape::{transpose_last2, Op};
use super::{Result, Tape, Tensor, TensorError};

/// Every primitive the tape can record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    MatMul,
    BatchMatMul,
    Add,
    Sub,
    Mul,
    Div,
    Scale(f64),
    Relu,
    Tanh,
    Exp,
    Log,
    SoftmaxRows,
    Sum,
    Mean,
    Square,
    Sqrt,
    Concat { axis: usize },
    Slice { axis: usize, start: usize, len: usize },
    Transpose,
    BiasAdd,
    Dot,
    Reshape,
}

fn mismatch(op: &'static str, ts: &[&Tensor]) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        shapes: ts.iter().map(|t| t.shape().to_vec()).collect(),
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl Tape {
    /// Applies `kind` to `inputs`. `Reshape` takes its target shape from
    /// the second input's shape.
    pub fn apply(&self, kind: Primitive, inputs: &[&Tensor]) -> Result<Tensor> {
        let arity = match kind {
            Primitive::MatMul
            | Primitive::BatchMatMul
            | Primitive::Add
            | Primitive::Sub
            | Primitive::Mul
            | Primitive::Div
            | Primitive::BiasAdd
            | Primitive::Dot
            | Primitive::Reshape => Some(2),
            Primitive::Concat { .. } => None,
            _ => Some(1),
        };
        if let Some(n) = arity {
            if inputs.len() != n {
                return Err(mismatch("apply", inputs));
            }
        }
        match kind {
            Primitive::MatMul => self.matmul(inputs[0], inputs[1]),
            Primitive::BatchMatMul => self.bmm(inputs[0], inputs[1]),
            Primitive::Add => self.add(inputs[0], inputs[1]),
            Primitive::Sub => self.sub(inputs[0], inputs[1]),
            Primitive::Mul => self.mul(inputs[0], inputs[1]),
            Primitive::Div => self.div(inputs[0], inputs[1]),
            Primitive::Scale(c) => self.scale(inputs[0], c),
            Primitive::Relu => self.relu(inputs[0]),
            Primitive::Tanh => self.tanh(inputs[0]),
            Primitive::Exp => self.exp(inputs[0]),
            Primitive::Log => self.log(inputs[0]),
            Primitive::SoftmaxRows => self.softmax_rows(inputs[0]),
            Primitive::Sum => self.sum(inputs[0]),
            Primitive::Mean => self.mean(inputs[0]),
            Primitive::Square => self.square(inputs[0]),
            Primitive::Sqrt => self.sqrt(inputs[0]),
            Primitive::Concat { axis } => self.concat(inputs, axis),
            Primitive::Slice { axis, start, len } => self.slice(inputs[0], axis, start, len),
            Primitive::Transpose => self.transpose(inputs[0]),
            Primitive::BiasAdd => self.bias_add(inputs[0], inputs[1]),
            Primitive::Dot => self.dot(inputs[0], inputs[1]),
            Primitive::Reshape => self.reshape(inputs[0], inputs[1].shape()),
        }
    }

    /// (m×k) · (k×n).
    pub fn matmul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0] {
            return Err(mismatch("matmul", &[a, b]));
        }
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, a.data(), false, b.data(), false, 0.0, &mut out);
        let op = Op::MatMul {
            a: a.shared_data(),
            b: b.shared_data(),
            m,
            k,
            n,
        };
        self.record(op, &[a, b], vec![m, n], out)
    }

    /// Batched product (s×m×k) · (s×k×n).
    pub fn bmm(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if a.ndim() != 3 || b.ndim() != 3 || a.shape()[0] != b.shape()[0] || a.shape()[2] != b.shape()[1]
        {
            return Err(mismatch("bmm", &[a, b]));
        }
        let (s, m, k, n) = (a.shape()[0], a.shape()[1], a.shape()[2], b.shape()[2]);
        let mut out = vec![0.0; s * m * n];
        for i in 0..s {
            gemm(
                m,
                k,
                n,
                &a.data()[i * m * k..],
                false,
                &b.data()[i * k * n..],
                false,
                0.0,
                &mut out[i * m * n..],
            );
        }
        let op = Op::BatchMatMul {
            a: a.shared_data(),
            b: b.shared_data(),
            batch: s,
            m,
            k,
            n,
        };
        self.record(op, &[a, b], vec![s, m, n], out)
    }

    fn zip_with(
        &self,
        name: &'static str,
        a: &Tensor,
        b: &Tensor,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Vec<f64>> {
        if a.shape() != b.shape() {
            return Err(mismatch(name, &[a, b]));
        }
        Ok(a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect())
    }

    pub fn add(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let out = self.zip_with("add", a, b, |x, y| x + y)?;
        self.record(Op::Add, &[a, b], a.shape().to_vec(), out)
    }

    pub fn sub(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let out = self.zip_with("sub", a, b, |x, y| x - y)?;
        self.record(Op::Sub, &[a, b], a.shape().to_vec(), out)
    }

    /// Elementwise product.
    pub fn mul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let out = self.zip_with("mul", a, b, |x, y| x * y)?;
        let op = Op::Mul {
            a: a.shared_data(),
            b: b.shared_data(),
        };
        self.record(op, &[a, b], a.shape().to_vec(), out)
    }

    /// Elementwise quotient; a zero divisor is rejected.
    pub fn div(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if let Some((index, &value)) = b.data().iter().enumerate().find(|(_, v)| **v == 0.0) {
            return Err(TensorError::Domain {
                op: "div",
                index,
                value,
            });
        }
        let out = self.zip_with("div", a, b, |x, y| x / y)?;
        let op = Op::Div {
            a: a.shared_data(),
            b: b.shared_data(),
        };
        self.record(op, &[a, b], a.shape().to_vec(), out)
    }

    pub fn scale(&self, a: &Tensor, c: f64) -> Result<Tensor> {
        let out = a.data().iter().map(|x| x * c).collect();
        self.record(Op::Scale(c), &[a], a.shape().to_vec(), out)
    }

    pub fn relu(&self, a: &Tensor) -> Result<Tensor> {
        let out: Vec<f64> = a.data().iter().map(|x| x.max(0.0)).collect();
        let saved = std::sync::Arc::new(out.clone());
        self.record(Op::Relu { out: saved }, &[a], a.shape().to_vec(), out)
    }

    pub fn tanh(&self, a: &Tensor) -> Result<Tensor> {
        let out: Vec<f64> = a.data().iter().map(|x| x.tanh()).collect();
        let saved = std::sync::Arc::new(out.clone());
        self.record(Op::Tanh { out: saved }, &[a], a.shape().to_vec(), out)
    }

    pub fn exp(&self, a: &Tensor) -> Result<Tensor> {
        let out: Vec<f64> = a.data().iter().map(|x| x.exp()).collect();
        let saved = std::sync::Arc::new(out.clone());
        self.record(Op::Exp { out: saved }, &[a], a.shape().to_vec(), out)
    }

    /// Natural log; non-positive inputs are rejected.
    pub fn log(&self, a: &Tensor) -> Result<Tensor> {
        if let Some((index, &value)) = a.data().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(TensorError::Domain {
                op: "log",
                index,
                value,
            });
        }
        let out = a.data().iter().map(|x| x.ln()).collect();
        let op = Op::Log {
            input: a.shared_data(),
        };
        self.record(op, &[a], a.shape().to_vec(), out)
    }

    pub fn sqrt(&self, a: &Tensor) -> Result<Tensor> {
        if let Some((index, &value)) = a.data().iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(TensorError::Domain {
                op: "sqrt",
                index,
                value,
            });
        }
        let out: Vec<f64> = a.data().iter().map(|x| x.sqrt()).collect();
        let saved = std::sync::Arc::new(out.clone());
        self.record(Op::Sqrt { out: saved }, &[a], a.shape().to_vec(), out)
    }

    pub fn square(&self, a: &Tensor) -> Result<Tensor> {
        let out = a.data().iter().map(|x| x * x).collect();
        let op = Op::Square {
            input: a.shared_data(),
        };
        self.record(op, &[a], a.shape().to_vec(), out)
    }

    /// Softmax over the last axis, with the row maximum subtracted first.
    pub fn softmax_rows(&self, a: &Tensor) -> Result<Tensor> {
        let cols = *a.shape().last().expect("non-empty shape");
        let mut out = a.to_vec();
        for row in out.chunks_mut(cols) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                total += *x;
            }
            row.iter_mut().for_each(|x| *x /= total);
        }
        let saved = std::sync::Arc::new(out.clone());
        self.record(Op::Softmax { out: saved, cols }, &[a], a.shape().to_vec(), out)
    }

    pub fn sum(&self, a: &Tensor) -> Result<Tensor> {
        let total = a.data().iter().sum();
        self.record(Op::Sum, &[a], vec![1], vec![total])
    }

    pub fn mean(&self, a: &Tensor) -> Result<Tensor> {
        let total: f64 = a.data().iter().sum();
        self.record(Op::Mean, &[a], vec![1], vec![total / a.numel() as f64])
    }

    /// Inner product of two equally shaped tensors.
    pub fn dot(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if a.shape() != b.shape() {
            return Err(mismatch("dot", &[a, b]));
        }
        let v = a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum();
        let op = Op::Dot {
            a: a.shared_data(),
            b: b.shared_data(),
        };
        self.record(op, &[a, b], vec![1], vec![v])
    }

    pub fn concat(&self, parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        let first = parts.first().ok_or(TensorError::ShapeMismatch {
            op: "concat",
            shapes: Vec::new(),
        })?;
        let nd = first.ndim();
        let ok = axis < nd
            && parts.iter().all(|p| {
                p.ndim() == nd
                    && p
                        .shape()
                        .iter()
                        .zip(first.shape())
                        .enumerate()
                        .all(|(d, (x, y))| d == axis || x == y)
            });
        if !ok {
            return Err(mismatch("concat", parts));
        }
        let (outer, _, inner) = split_axis(first.shape(), axis);
        let sizes: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let total: usize = sizes.iter().sum();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (p, &size) in parts.iter().zip(&sizes) {
                let chunk = size * inner;
                out.extend_from_slice(&p.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = first.shape().to_vec();
        shape[axis] = total;
        self.record(Op::Concat { outer, inner, sizes }, parts, shape, out)
    }

    /// Entries `start..start + len` along `axis`.
    pub fn slice(&self, a: &Tensor, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        if axis >= a.ndim() || len == 0 || start + len > a.shape()[axis] {
            return Err(mismatch("slice", &[a]));
        }
        let (outer, full, inner) = split_axis(a.shape(), axis);
        let chunk = len * inner;
        let mut out = Vec::with_capacity(outer * chunk);
        for o in 0..outer {
            let src = (o * full + start) * inner;
            out.extend_from_slice(&a.data()[src..src + chunk]);
        }
        let mut shape = a.shape().to_vec();
        shape[axis] = len;
        let op = Op::Slice {
            outer,
            inner,
            full,
            start,
            len,
        };
        self.record(op, &[a], shape, out)
    }

    /// Swaps the last two axes of a 2-D or 3-D tensor.
    pub fn transpose(&self, a: &Tensor) -> Result<Tensor> {
        let (batch, rows, cols) = match *a.shape() {
            [r, c] => (1, r, c),
            [s, r, c] => (s, r, c),
            _ => return Err(mismatch("transpose", &[a])),
        };
        let out = transpose_last2(a.data(), batch, rows, cols);
        let mut shape = a.shape().to_vec();
        let nd = shape.len();
        shape.swap(nd - 2, nd - 1);
        self.record(Op::Transpose { batch, rows, cols }, &[a], shape, out)
    }

    /// Adds a length-C bias to every row of a `[.., C]` tensor.
    pub fn bias_add(&self, x: &Tensor, bias: &Tensor) -> Result<Tensor> {
        let cols = *x.shape().last().expect("non-empty shape");
        if bias.ndim() != 1 || bias.shape()[0] != cols {
            return Err(mismatch("bias_add", &[x, bias]));
        }
        let mut out = x.to_vec();
        for row in out.chunks_mut(cols) {
            row.iter_mut().zip(bias.data()).for_each(|(a, b)| *a += b);
        }
        self.record(Op::BiasAdd { cols }, &[x, bias], x.shape().to_vec(), out)
    }

    pub fn reshape(&self, a: &Tensor, shape: &[usize]) -> Result<Tensor> {
        if shape.is_empty() || shape.contains(&0) || shape.iter().product::<usize>() != a.numel() {
            return Err(TensorError::BadShape {
                shape: shape.to_vec(),
                len: a.numel(),
            });
        }
        self.record(Op::Reshape, &[a], shape.to_vec(), a.to_vec())
    }

    /// `x · w + b` for a 2-D `x`.
    pub fn linear(&self, x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
        let y = self.matmul(x, w)?;
        self.bias_add(&y, b)
    }
}
