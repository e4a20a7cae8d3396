//! Forward kernels and vector-Jacobian products for every primitive.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Operations that can be recorded on a [`Tape`](super::Tape).
///
/// Elementwise binary kinds require identical shapes; use
/// [`Primitive::Broadcast`] to expand an operand first.
#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    MatMul,
    Add,
    Sub,
    Mul,
    Div,
    /// Elementwise minimum; ties route the gradient to the first operand.
    Minimum,
    ScalarMul(f64),
    /// Derivative at exactly zero is 0.
    Relu,
    Tanh,
    Exp,
    Log,
    Square,
    Sqrt,
    /// Gradient passes only strictly inside `(min, max)`.
    Clamp { min: f64, max: f64 },
    /// Reduce over one axis (kept with length 1) or over everything (shape `[1]`).
    Sum { axis: Option<usize> },
    Mean { axis: Option<usize> },
    Concat { axis: usize },
    Broadcast { shape: Vec<usize> },
    Slice { axis: usize, start: usize, end: usize },
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::MatMul => "matmul",
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Div => "div",
            Primitive::Minimum => "minimum",
            Primitive::ScalarMul(_) => "scalar_mul",
            Primitive::Relu => "relu",
            Primitive::Tanh => "tanh",
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::Square => "square",
            Primitive::Sqrt => "sqrt",
            Primitive::Clamp { .. } => "clamp",
            Primitive::Sum { .. } => "sum",
            Primitive::Mean { .. } => "mean",
            Primitive::Concat { .. } => "concat",
            Primitive::Broadcast { .. } => "broadcast",
            Primitive::Slice { .. } => "slice",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            Primitive::MatMul
            | Primitive::Add
            | Primitive::Sub
            | Primitive::Mul
            | Primitive::Div
            | Primitive::Minimum => Some(2),
            Primitive::Concat { .. } => None,
            _ => Some(1),
        }
    }
}

fn mismatch(op: &Primitive, lhs: &[usize], rhs: &[usize]) -> Error {
    Error::ShapeMismatch {
        op: op.name(),
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

/// `(outer, len, inner)` split of a shape around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn unary(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    x.map(f)
}

fn binary(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).unwrap()
}

pub(crate) fn gemm(
    n: usize,
    k: usize,
    m: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    out: &mut [f64],
) {
    debug_assert!(out.len() >= n * m);
    // SAFETY: strides describe in-bounds views of `a` ([n, k]), `b` ([k, m])
    // and the dense row-major `out` ([n, m]).
    unsafe {
        matrixmultiply::dgemm(
            n,
            k,
            m,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            out.as_mut_ptr(),
            m as isize,
            1,
        );
    }
}

/// Row-major strides of `target` used to read an input broadcast into it.
fn broadcast_strides(src: &[usize], target: &[usize]) -> Option<Vec<usize>> {
    let numel: usize = src.iter().product();
    if src.len() != target.len() {
        return if numel == 1 {
            Some(vec![0; target.len()])
        } else {
            None
        };
    }
    let mut strides = vec![0; src.len()];
    let mut acc = 1;
    for i in (0..src.len()).rev() {
        if src[i] == target[i] {
            strides[i] = acc;
        } else if src[i] == 1 {
            strides[i] = 0;
        } else {
            return None;
        }
        acc *= src[i];
    }
    Some(strides)
}

/// Visit `(out_index, src_index)` pairs of a broadcast.
fn for_each_broadcast(target: &[usize], strides: &[usize], mut f: impl FnMut(usize, usize)) {
    let rank = target.len();
    let total: usize = target.iter().product();
    let mut idx = vec![0usize; rank];
    let mut src = 0usize;
    for out in 0..total {
        f(out, src);
        for d in (0..rank).rev() {
            idx[d] += 1;
            src += strides[d];
            if idx[d] < target[d] {
                break;
            }
            src -= strides[d] * idx[d];
            idx[d] = 0;
        }
    }
}

pub(crate) fn forward(kind: &Primitive, inputs: &[&Tensor]) -> Result<Tensor> {
    if let Some(n) = kind.arity() {
        if inputs.len() != n {
            return Err(Error::Invalid(alloc::format!(
                "{} expects {} inputs, got {}",
                kind.name(),
                n,
                inputs.len()
            )));
        }
    } else if inputs.is_empty() {
        return Err(Error::Invalid(alloc::format!("{} expects at least one input", kind.name())));
    }
    let x = inputs[0];
    match kind {
        Primitive::MatMul => {
            let b = inputs[1];
            let (sa, sb) = (x.shape(), b.shape());
            if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
                return Err(mismatch(kind, sa, sb));
            }
            let (n, k, m) = (sa[0], sa[1], sb[1]);
            let mut out = vec![0.0; n * m];
            gemm(n, k, m, x.data(), (k as isize, 1), b.data(), (m as isize, 1), &mut out);
            Tensor::new(vec![n, m], out)
        }
        Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div | Primitive::Minimum => {
            let b = inputs[1];
            if x.shape() != b.shape() {
                return Err(mismatch(kind, x.shape(), b.shape()));
            }
            Ok(match kind {
                Primitive::Add => binary(x, b, |p, q| p + q),
                Primitive::Sub => binary(x, b, |p, q| p - q),
                Primitive::Mul => binary(x, b, |p, q| p * q),
                Primitive::Minimum => binary(x, b, |p, q| if p <= q { p } else { q }),
                _ => {
                    if let Some(&z) = b.data().iter().find(|&&q| q == 0.0) {
                        return Err(Error::Domain { op: "div", value: z });
                    }
                    binary(x, b, |p, q| p / q)
                }
            })
        }
        Primitive::ScalarMul(s) => Ok(unary(x, |v| v * s)),
        Primitive::Relu => Ok(unary(x, |v| if v > 0.0 { v } else { 0.0 })),
        Primitive::Tanh => Ok(unary(x, libm::tanh)),
        Primitive::Exp => Ok(unary(x, libm::exp)),
        Primitive::Log | Primitive::Sqrt => {
            if let Some(&bad) = x.data().iter().find(|&&v| !(v > 0.0)) {
                return Err(Error::Domain {
                    op: kind.name(),
                    value: bad,
                });
            }
            Ok(if matches!(kind, Primitive::Log) {
                unary(x, libm::log)
            } else {
                unary(x, libm::sqrt)
            })
        }
        Primitive::Square => Ok(unary(x, |v| v * v)),
        Primitive::Clamp { min, max } => Ok(unary(x, |v| v.clamp(*min, *max))),
        Primitive::Sum { axis } | Primitive::Mean { axis } => {
            let mean = matches!(kind, Primitive::Mean { .. });
            match axis {
                None => {
                    let s: f64 = x.data().iter().sum();
                    Ok(Tensor::scalar(if mean { s / x.numel() as f64 } else { s }))
                }
                Some(ax) => {
                    if *ax >= x.shape().len() {
                        return Err(mismatch(kind, x.shape(), &[*ax]));
                    }
                    let (outer, len, inner) = split_axis(x.shape(), *ax);
                    let mut out = vec![0.0; outer * inner];
                    let d = x.data();
                    for o in 0..outer {
                        for l in 0..len {
                            let row = &d[(o * len + l) * inner..(o * len + l + 1) * inner];
                            for (acc, v) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                                *acc += v;
                            }
                        }
                    }
                    if mean {
                        out.iter_mut().for_each(|v| *v /= len as f64);
                    }
                    let mut shape = x.shape().to_vec();
                    shape[*ax] = 1;
                    Tensor::new(shape, out)
                }
            }
        }
        Primitive::Concat { axis } => {
            let rank = x.shape().len();
            if *axis >= rank {
                return Err(mismatch(kind, x.shape(), &[*axis]));
            }
            let mut total = 0;
            for t in inputs {
                let s = t.shape();
                let compatible = s.len() == rank
                    && s.iter().zip(x.shape()).enumerate().all(|(i, (p, q))| i == *axis || p == q);
                if !compatible {
                    return Err(mismatch(kind, x.shape(), s));
                }
                total += s[*axis];
            }
            let (outer, _, inner) = split_axis(x.shape(), *axis);
            let mut out = Vec::with_capacity(outer * total * inner);
            for o in 0..outer {
                for t in inputs {
                    let chunk = t.shape()[*axis] * inner;
                    out.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
                }
            }
            let mut shape = x.shape().to_vec();
            shape[*axis] = total;
            Tensor::new(shape, out)
        }
        Primitive::Broadcast { shape } => {
            let strides = broadcast_strides(x.shape(), shape).ok_or_else(|| mismatch(kind, x.shape(), shape))?;
            let total: usize = shape.iter().product();
            let mut out = vec![0.0; total];
            let d = x.data();
            for_each_broadcast(shape, &strides, |o, s| out[o] = d[s]);
            Tensor::new(shape.clone(), out)
        }
        Primitive::Slice { axis, start, end } => {
            let s = x.shape();
            if *axis >= s.len() || start >= end || *end > s[*axis] {
                return Err(mismatch(kind, s, &[*axis, *start, *end]));
            }
            let (outer, len, inner) = split_axis(s, *axis);
            let width = end - start;
            let mut out = Vec::with_capacity(outer * width * inner);
            for o in 0..outer {
                let base = (o * len + start) * inner;
                out.extend_from_slice(&x.data()[base..base + width * inner]);
            }
            let mut shape = s.to_vec();
            shape[*axis] = width;
            Tensor::new(shape, out)
        }
    }
}

/// Gradients with respect to each input, given the upstream gradient `g`
/// of the output. Entries for inputs with `needs[i] == false` are `None`.
pub(crate) fn vjp(
    kind: &Primitive,
    inputs: &[&Tensor],
    output: &Tensor,
    g: &[f64],
    needs: &[bool],
) -> Vec<Option<Vec<f64>>> {
    let x = inputs[0];
    let elementwise = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..g.len()).map(f).collect() };
    let mut res: Vec<Option<Vec<f64>>> = vec![None; inputs.len()];
    match kind {
        Primitive::MatMul => {
            let b = inputs[1];
            let (n, k, m) = (x.shape()[0], x.shape()[1], b.shape()[1]);
            if needs[0] {
                let mut ga = vec![0.0; n * k];
                gemm(n, m, k, g, (m as isize, 1), b.data(), (1, m as isize), &mut ga);
                res[0] = Some(ga);
            }
            if needs[1] {
                let mut gb = vec![0.0; k * m];
                gemm(k, n, m, x.data(), (1, k as isize), g, (m as isize, 1), &mut gb);
                res[1] = Some(gb);
            }
        }
        Primitive::Add => {
            res[0] = needs[0].then(|| g.to_vec());
            res[1] = needs[1].then(|| g.to_vec());
        }
        Primitive::Sub => {
            res[0] = needs[0].then(|| g.to_vec());
            res[1] = needs[1].then(|| g.iter().map(|v| -v).collect());
        }
        Primitive::Mul => {
            let (a, b) = (x.data(), inputs[1].data());
            res[0] = needs[0].then(|| elementwise(&|i| g[i] * b[i]));
            res[1] = needs[1].then(|| elementwise(&|i| g[i] * a[i]));
        }
        Primitive::Div => {
            let (a, b) = (x.data(), inputs[1].data());
            res[0] = needs[0].then(|| elementwise(&|i| g[i] / b[i]));
            res[1] = needs[1].then(|| elementwise(&|i| -g[i] * a[i] / (b[i] * b[i])));
        }
        Primitive::Minimum => {
            let (a, b) = (x.data(), inputs[1].data());
            res[0] = needs[0].then(|| elementwise(&|i| if a[i] <= b[i] { g[i] } else { 0.0 }));
            res[1] = needs[1].then(|| elementwise(&|i| if a[i] <= b[i] { 0.0 } else { g[i] }));
        }
        Primitive::ScalarMul(s) => res[0] = Some(g.iter().map(|v| v * s).collect()),
        Primitive::Relu => {
            let a = x.data();
            res[0] = Some(elementwise(&|i| if a[i] > 0.0 { g[i] } else { 0.0 }));
        }
        Primitive::Tanh => {
            let y = output.data();
            res[0] = Some(elementwise(&|i| g[i] * (1.0 - y[i] * y[i])));
        }
        Primitive::Exp => {
            let y = output.data();
            res[0] = Some(elementwise(&|i| g[i] * y[i]));
        }
        Primitive::Log => {
            let a = x.data();
            res[0] = Some(elementwise(&|i| g[i] / a[i]));
        }
        Primitive::Square => {
            let a = x.data();
            res[0] = Some(elementwise(&|i| 2.0 * a[i] * g[i]));
        }
        Primitive::Sqrt => {
            let y = output.data();
            res[0] = Some(elementwise(&|i| 0.5 * g[i] / y[i]));
        }
        Primitive::Clamp { min, max } => {
            let a = x.data();
            res[0] = Some(elementwise(&|i| if a[i] > *min && a[i] < *max { g[i] } else { 0.0 }));
        }
        Primitive::Sum { axis } | Primitive::Mean { axis } => {
            let mean = matches!(kind, Primitive::Mean { .. });
            match axis {
                None => {
                    let scale = if mean { 1.0 / x.numel() as f64 } else { 1.0 };
                    res[0] = Some(vec![g[0] * scale; x.numel()]);
                }
                Some(ax) => {
                    let (outer, len, inner) = split_axis(x.shape(), *ax);
                    let scale = if mean { 1.0 / len as f64 } else { 1.0 };
                    let mut gx = Vec::with_capacity(x.numel());
                    for o in 0..outer {
                        let src = &g[o * inner..(o + 1) * inner];
                        for _ in 0..len {
                            gx.extend(src.iter().map(|v| v * scale));
                        }
                    }
                    res[0] = Some(gx);
                }
            }
        }
        Primitive::Concat { axis } => {
            let (outer, total, inner) = split_axis(output.shape(), *axis);
            let mut offset = 0;
            for (i, t) in inputs.iter().enumerate() {
                let len = t.shape()[*axis];
                if needs[i] {
                    let mut gi = Vec::with_capacity(t.numel());
                    for o in 0..outer {
                        let base = (o * total + offset) * inner;
                        gi.extend_from_slice(&g[base..base + len * inner]);
                    }
                    res[i] = Some(gi);
                }
                offset += len;
            }
        }
        Primitive::Broadcast { shape } => {
            let strides = broadcast_strides(x.shape(), shape).expect("validated in forward");
            let mut gx = vec![0.0; x.numel()];
            for_each_broadcast(shape, &strides, |o, s| gx[s] += g[o]);
            res[0] = Some(gx);
        }
        Primitive::Slice { axis, start, end } => {
            let (outer, len, inner) = split_axis(x.shape(), *axis);
            let width = end - start;
            let mut gx = vec![0.0; x.numel()];
            for o in 0..outer {
                let base = (o * len + start) * inner;
                gx[base..base + width * inner].copy_from_slice(&g[o * width * inner..(o + 1) * width * inner]);
            }
            res[0] = Some(gx);
        }
    }
    res
}
