//! The recording tape and its primitives.
//!
//! Every primitive evaluates eagerly, appends one node holding its value and
//! parent references, and returns a [`Var`] handle. Parents always precede
//! their children, so a single reverse sweep over the node list is a valid
//! topological order for [`Tape::backward`].

use std::f64::consts::PI;

use crate::special;
use crate::tensor::Tensor;
use crate::AutodiffError;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Spatial padding for [`Tape::conv2d`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    Valid,
    /// Zero padding that preserves height and width (odd kernels only).
    Same,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Minimum(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatMul(Var, Var),
    Affine {
        x: Var,
        w: Var,
        b: Var,
    },
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Sqrt(Var),
    Erf(Var),
    Clamp {
        x: Var,
        lo: f64,
        hi: f64,
    },
    Softmax(Var),
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Var,
        pad: usize,
    },
    Reshape(Var),
    Concat(Vec<Var>),
    GatherRows {
        src: Var,
        index: Vec<usize>,
    },
    ReduceSum {
        src: Var,
        axis: Option<usize>,
    },
    ReduceMean {
        src: Var,
        axis: Option<usize>,
    },
    GaussianLogProb {
        mean: Var,
        log_std: Var,
        sample: Var,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if `v` required one.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

/// Records primitive applications for reverse-mode differentiation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Splits `shape` around `axis` into (outer, axis length, inner).
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    assert!(
        axis < shape.len(),
        "contract violation: axis {axis} out of range for shape {shape:?}"
    );
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn reduced_shape(shape: &[usize], axis: Option<usize>) -> Vec<usize> {
    match axis {
        None => vec![],
        Some(a) => {
            let mut s = shape.to_vec();
            s.remove(a);
            s
        }
    }
}

fn sum_axis(data: &[f64], shape: &[usize], axis: Option<usize>) -> Vec<f64> {
    match axis {
        None => vec![data.iter().sum()],
        Some(a) => {
            let (outer, n, inner) = split_axis(shape, a);
            let mut out = vec![0.0; outer * inner];
            for o in 0..outer {
                for k in 0..n {
                    let src = &data[(o * n + k) * inner..(o * n + k + 1) * inner];
                    let dst = &mut out[o * inner..(o + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
            out
        }
    }
}

fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

/// `ga += g * b^T` for `g: n x m`, `b: k x m`.
fn grad_lhs(g: &[f64], b: &[f64], ga: &mut [f64], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let grow = &g[i * m..(i + 1) * m];
        for p in 0..k {
            let brow = &b[p * m..(p + 1) * m];
            let dot: f64 = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
            ga[i * k + p] += dot;
        }
    }
}

/// `gb += a^T * g` for `a: n x k`, `g: n x m`.
fn grad_rhs(a: &[f64], g: &[f64], gb: &mut [f64], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let grow = &g[i * m..(i + 1) * m];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let dst = &mut gb[p * m..(p + 1) * m];
            for (d, gv) in dst.iter_mut().zip(grow) {
                *d += aip * gv;
            }
        }
    }
}

struct ConvDims {
    batch: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl ConvDims {
    /// Output columns `ox` for which `ox + kx - pad` lands inside the input.
    fn ox_range(&self, kx: usize) -> (usize, usize) {
        let lo = self.pad.saturating_sub(kx);
        let hi = (self.w + self.pad).saturating_sub(kx).min(self.ow);
        (lo, hi.max(lo))
    }

    fn iy(&self, oy: usize, ky: usize) -> Option<usize> {
        let iy = (oy + ky).checked_sub(self.pad)?;
        (iy < self.h).then_some(iy)
    }

    /// Visits every contiguous output-row segment touched by one kernel tap.
    ///
    /// The callback receives `(batch, out_channel, in_channel, tap, grad_segment,
    /// input_row, input_col_start)`.
    fn for_each_segment<F>(&self, g: &[f64], mut f: F)
    where
        F: FnMut(usize, usize, usize, usize, &[f64], usize, usize),
    {
        let plane_len = self.oh * self.ow;
        for b in 0..self.batch {
            for o in 0..self.cout {
                let gp = &g[(b * self.cout + o) * plane_len..][..plane_len];
                for c in 0..self.cin {
                    for ky in 0..self.kh {
                        for kx in 0..self.kw {
                            let (lo, hi) = self.ox_range(kx);
                            if lo >= hi {
                                continue;
                            }
                            for oy in 0..self.oh {
                                let Some(iy) = self.iy(oy, ky) else { continue };
                                let seg = &gp[oy * self.ow + lo..oy * self.ow + hi];
                                f(b, o, c, ky * self.kw + kx, seg, iy, lo + kx - self.pad);
                            }
                        }
                    }
                }
            }
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

    /// Allows another [`Tape::backward`] call on the same recording.
    pub fn reset(&mut self) {
        self.consumed = false;
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        let id = self.nodes.len();
        debug_assert!(parents.iter().all(|p| p.0 < id));
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node { value, op, needs_grad });
        Var(id)
    }

    /// Places a tensor on the tape; it is differentiated if `requires_grad` is set.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let needs_grad = t.requires_grad();
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A trainable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.leaf(t.with_grad())
    }

    /// A constant leaf.
    pub fn constant(&mut self, t: Tensor) -> Var {
        let t = Tensor::new(t.shape().to_vec(), t.into_data());
        self.leaf(t)
    }

    fn same_shape(&self, name: &str, a: Var, b: Var) {
        assert_eq!(
            self.shape(a),
            self.shape(b),
            "contract violation: {name} shape mismatch {:?} vs {:?}",
            self.shape(a),
            self.shape(b)
        );
    }

    fn zip_with(&mut self, name: &str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        self.same_shape(name, a, b);
        let data = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| f(x, y)).collect();
        let t = Tensor::new(self.shape(a).to_vec(), data);
        self.push(t, op, &[a, b])
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let data = self.data(a).iter().map(|&x| f(x)).collect();
        let t = Tensor::new(self.shape(a).to_vec(), data);
        self.push(t, op, &[a])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Var {
        self.zip_with("minimum", a, b, |x, y| if x <= y { x } else { y }, Op::Minimum(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| x + c, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, f64::exp, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.map(a, f64::ln, Op::Log(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.map(a, f64::sqrt, Op::Sqrt(a))
    }

    pub fn erf(&mut self, a: Var) -> Var {
        self.map(a, special::erf, Op::Erf(a))
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where the clamp is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.map(a, |x| x.clamp(lo, hi), Op::Clamp { x: a, lo, hi })
    }

    /// `a: n x k` times `b: k x m`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert!(
            sa.len() == 2 && sb.len() == 2 && sa[1] == sb[0],
            "contract violation: matmul shape mismatch {sa:?} vs {sb:?}"
        );
        let (n, k, m) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; n * m];
        matmul_into(self.data(a), self.data(b), &mut out, n, k, m);
        self.push(Tensor::matrix(n, m, out), Op::MatMul(a, b), &[a, b])
    }

    /// `x W + b` with `x: n x in`, `W: in x out`, `b: out` broadcast over rows.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (sx, sw, sb) = (self.shape(x), self.shape(w), self.shape(b));
        assert!(
            sx.len() == 2 && sw.len() == 2 && sx[1] == sw[0] && sb == [sw[1]],
            "contract violation: affine shape mismatch x {sx:?}, W {sw:?}, b {sb:?}"
        );
        let (n, k, m) = (sx[0], sx[1], sw[1]);
        let bias = self.data(b);
        let mut out = Vec::with_capacity(n * m);
        for _ in 0..n {
            out.extend_from_slice(bias);
        }
        matmul_into(self.data(x), self.data(w), &mut out, n, k, m);
        self.push(Tensor::matrix(n, m, out), Op::Affine { x, w, b }, &[x, w, b])
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let (rows, cols) = self.value(a).rows_cols();
        let src = self.data(a);
        let mut out = vec![0.0; src.len()];
        for r in 0..rows {
            let row = &src[r * cols..(r + 1) * cols];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let dst = &mut out[r * cols..(r + 1) * cols];
            let mut total = 0.0;
            for (d, &x) in dst.iter_mut().zip(row) {
                *d = (x - max).exp();
                total += *d;
            }
            for d in dst.iter_mut() {
                *d /= total;
            }
        }
        let t = Tensor::new(self.shape(a).to_vec(), out);
        self.push(t, Op::Softmax(a), &[a])
    }

    /// 2-D convolution, stride 1.
    ///
    /// `input: [B, C, H, W]`, `kernel: [O, C, KH, KW]`, `bias: [O]`.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, padding: Padding) -> Var {
        let dims = self.conv_dims(input, kernel, bias, padding);
        let x = self.data(input);
        let k = self.data(kernel);
        let bv = self.data(bias);
        let mut out = vec![0.0; dims.batch * dims.cout * dims.oh * dims.ow];
        for b in 0..dims.batch {
            for o in 0..dims.cout {
                let plane = &mut out[(b * dims.cout + o) * dims.oh * dims.ow..][..dims.oh * dims.ow];
                plane.iter_mut().for_each(|v| *v = bv[o]);
                for c in 0..dims.cin {
                    let xin = &x[(b * dims.cin + c) * dims.h * dims.w..][..dims.h * dims.w];
                    for ky in 0..dims.kh {
                        for kx in 0..dims.kw {
                            let kv = k[((o * dims.cin + c) * dims.kh + ky) * dims.kw + kx];
                            let (lo, hi) = dims.ox_range(kx);
                            for oy in 0..dims.oh {
                                let Some(iy) = dims.iy(oy, ky) else { continue };
                                let dst = &mut plane[oy * dims.ow + lo..oy * dims.ow + hi];
                                let src = &xin[iy * dims.w + lo + kx - dims.pad..][..hi - lo];
                                for (d, s) in dst.iter_mut().zip(src) {
                                    *d += kv * s;
                                }
                            }
                        }
                    }
                }
            }
        }
        let t = Tensor::new(vec![dims.batch, dims.cout, dims.oh, dims.ow], out);
        let pad = dims.pad;
        self.push(
            t,
            Op::Conv2d {
                input,
                kernel,
                bias,
                pad,
            },
            &[input, kernel, bias],
        )
    }

    fn conv_dims(&self, input: Var, kernel: Var, bias: Var, padding: Padding) -> ConvDims {
        let (si, sk, sb) = (self.shape(input), self.shape(kernel), self.shape(bias));
        assert!(
            si.len() == 4 && sk.len() == 4 && si[1] == sk[1] && sb == [sk[0]],
            "contract violation: conv2d shape mismatch input {si:?}, kernel {sk:?}, bias {sb:?}"
        );
        let pad = match padding {
            Padding::Valid => 0,
            Padding::Same => {
                assert!(
                    sk[2] % 2 == 1 && sk[3] % 2 == 1 && sk[2] == sk[3],
                    "contract violation: same padding needs an odd square kernel, got {sk:?}"
                );
                sk[2] / 2
            }
        };
        Self::conv_dims_padded(si, sk, pad)
    }

    fn conv_dims_padded(si: &[usize], sk: &[usize], pad: usize) -> ConvDims {
        assert!(
            si[2] + 2 * pad >= sk[2] && si[3] + 2 * pad >= sk[3],
            "contract violation: conv2d kernel {sk:?} larger than input {si:?}"
        );
        ConvDims {
            batch: si[0],
            cin: si[1],
            h: si[2],
            w: si[3],
            cout: sk[0],
            kh: sk[2],
            kw: sk[3],
            pad,
            oh: si[2] + 2 * pad - sk[2] + 1,
            ow: si[3] + 2 * pad - sk[3] + 1,
        }
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Var {
        let t = self.value(a).clone().reshaped(shape);
        let t = Tensor::new(t.shape().to_vec(), t.into_data());
        self.push(t, Op::Reshape(a), &[a])
    }

    /// Collapses every axis after the first.
    pub fn flatten(&mut self, a: Var) -> Var {
        let s = self.shape(a);
        let lead = s.first().copied().unwrap_or(1);
        let rest = s.iter().skip(1).product();
        self.reshape(a, vec![lead, rest])
    }

    /// Concatenates 2-D tensors with equal row counts along columns.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "contract violation: concat of nothing");
        let rows = self.shape(parts[0])[0];
        for &p in parts {
            let s = self.shape(p);
            assert!(
                s.len() == 2 && s[0] == rows,
                "contract violation: concat shape mismatch {:?} vs {:?}",
                self.shape(parts[0]),
                s
            );
        }
        let widths: Vec<usize> = parts.iter().map(|&p| self.shape(p)[1]).collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.data(p)[r * w..(r + 1) * w]);
            }
        }
        self.push(Tensor::matrix(rows, total, out), Op::Concat(parts.to_vec()), parts)
    }

    /// Selects rows of a 2-D tensor; indices may repeat.
    pub fn gather_rows(&mut self, src: Var, index: &[usize]) -> Var {
        let s = self.shape(src);
        assert_eq!(s.len(), 2, "contract violation: gather_rows on shape {s:?}");
        let (rows, cols) = (s[0], s[1]);
        let mut out = Vec::with_capacity(index.len() * cols);
        for &i in index {
            assert!(i < rows, "contract violation: row {i} out of range for shape {s:?}");
            out.extend_from_slice(&self.data(src)[i * cols..(i + 1) * cols]);
        }
        let t = Tensor::matrix(index.len(), cols, out);
        self.push(
            t,
            Op::GatherRows {
                src,
                index: index.to_vec(),
            },
            &[src],
        )
    }

    /// Sum over one axis, or over everything when `axis` is `None`.
    pub fn reduce_sum(&mut self, a: Var, axis: Option<usize>) -> Var {
        let shape = self.shape(a).to_vec();
        let out = sum_axis(self.data(a), &shape, axis);
        let t = Tensor::new(reduced_shape(&shape, axis), out);
        self.push(t, Op::ReduceSum { src: a, axis }, &[a])
    }

    pub fn reduce_mean(&mut self, a: Var, axis: Option<usize>) -> Var {
        let shape = self.shape(a).to_vec();
        let n = match axis {
            None => self.value(a).numel(),
            Some(ax) => split_axis(&shape, ax).1,
        } as f64;
        let out = sum_axis(self.data(a), &shape, axis)
            .into_iter()
            .map(|v| v / n)
            .collect();
        let t = Tensor::new(reduced_shape(&shape, axis), out);
        self.push(t, Op::ReduceMean { src: a, axis }, &[a])
    }

    /// Diagonal Gaussian log density summed over the last axis.
    ///
    /// `mean` and `sample` are `[n, d]`; `log_std` is `[n, d]` or `[d]`
    /// (shared by every row). Returns `[n]`.
    pub fn gaussian_log_prob(&mut self, mean: Var, log_std: Var, sample: Var) -> Var {
        self.same_shape("gaussian_log_prob", mean, sample);
        let (rows, d) = self.value(mean).rows_cols();
        let ls_shape = self.shape(log_std);
        let shared = ls_shape == [d];
        assert!(
            shared || ls_shape == self.shape(mean),
            "contract violation: gaussian_log_prob log_std shape {:?} vs mean {:?}",
            ls_shape,
            self.shape(mean)
        );
        let half_log_2pi = 0.5 * (2.0 * PI).ln();
        let (m, ls, a) = (self.data(mean), self.data(log_std), self.data(sample));
        let mut out = vec![0.0; rows];
        for (r, o) in out.iter_mut().enumerate() {
            for i in 0..d {
                let l = if shared { ls[i] } else { ls[r * d + i] };
                let z = (a[r * d + i] - m[r * d + i]) / l.exp();
                *o += -0.5 * z * z - l - half_log_2pi;
            }
        }
        let lead = self.shape(mean)[..self.shape(mean).len().saturating_sub(1)].to_vec();
        let t = Tensor::new(lead, out);
        self.push(
            t,
            Op::GaussianLogProb { mean, log_std, sample },
            &[mean, log_std, sample],
        )
    }

    /// Reverse sweep from a single-element `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, AutodiffError> {
        if self.consumed {
            return Err(AutodiffError::AlreadyConsumed);
        }
        let ls = self.shape(loss);
        if self.value(loss).numel() != 1 {
            return Err(AutodiffError::NonScalarLoss(ls.to_vec()));
        }
        self.consumed = true;

        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        if self.needs(loss) {
            grads[loss.0] = Some(vec![1.0]);
        }
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if matches!(self.nodes[id].op, Op::Leaf) {
                grads[id] = Some(g);
                continue;
            }
            self.propagate(id, &g, &mut grads);
        }
        // Trainable leaves that the loss never touched get explicit zeros.
        for (id, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.needs_grad && grads[id].is_none() {
                grads[id] = Some(vec![0.0; node.value.numel()]);
            }
            if !matches!(node.op, Op::Leaf) {
                grads[id] = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
        if !self.needs(v) {
            return None;
        }
        let numel = self.value(v).numel();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; numel]))
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl Fn(usize) -> f64) {
        if let Some(dst) = self.slot(grads, v) {
            for (i, d) in dst.iter_mut().enumerate() {
                *d += f(i);
            }
        }
    }

    fn propagate(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = self.nodes[id].value.data();
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |i| g[i]);
                self.accumulate(grads, *b, |i| g[i]);
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, |i| g[i]);
                self.accumulate(grads, *b, |i| -g[i]);
            }
            Op::Mul(a, b) => {
                let (da, db) = (self.data(*a), self.data(*b));
                self.accumulate(grads, *a, |i| g[i] * db[i]);
                self.accumulate(grads, *b, |i| g[i] * da[i]);
            }
            Op::Minimum(a, b) => {
                let (da, db) = (self.data(*a), self.data(*b));
                self.accumulate(grads, *a, |i| if da[i] <= db[i] { g[i] } else { 0.0 });
                self.accumulate(grads, *b, |i| if da[i] <= db[i] { 0.0 } else { g[i] });
            }
            Op::Scale(a, c) => self.accumulate(grads, *a, |i| g[i] * c),
            Op::AddScalar(a) | Op::Reshape(a) => self.accumulate(grads, *a, |i| g[i]),
            Op::Relu(a) => {
                let x = self.data(*a);
                self.accumulate(grads, *a, |i| if x[i] > 0.0 { g[i] } else { 0.0 });
            }
            Op::Tanh(a) => self.accumulate(grads, *a, |i| g[i] * (1.0 - out[i] * out[i])),
            Op::Exp(a) => self.accumulate(grads, *a, |i| g[i] * out[i]),
            Op::Log(a) => {
                let x = self.data(*a);
                self.accumulate(grads, *a, |i| g[i] / x[i]);
            }
            Op::Sqrt(a) => self.accumulate(grads, *a, |i| g[i] * 0.5 / out[i]),
            Op::Erf(a) => {
                let x = self.data(*a);
                self.accumulate(grads, *a, |i| g[i] * special::erf_derivative(x[i]));
            }
            Op::Clamp { x, lo, hi } => {
                let xv = self.data(*x);
                self.accumulate(grads, *x, |i| if xv[i] >= *lo && xv[i] <= *hi { g[i] } else { 0.0 });
            }
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (n, k, m) = (sa[0], sa[1], sb[1]);
                if let Some(ga) = self.slot(grads, *a) {
                    grad_lhs(g, self.data(*b), ga, n, k, m);
                }
                if let Some(gb) = self.slot(grads, *b) {
                    grad_rhs(self.data(*a), g, gb, n, k, m);
                }
            }
            Op::Affine { x, w, b } => {
                let (sx, sw) = (self.shape(*x), self.shape(*w));
                let (n, k, m) = (sx[0], sx[1], sw[1]);
                if let Some(gx) = self.slot(grads, *x) {
                    grad_lhs(g, self.data(*w), gx, n, k, m);
                }
                if let Some(gw) = self.slot(grads, *w) {
                    grad_rhs(self.data(*x), g, gw, n, k, m);
                }
                if let Some(gb) = self.slot(grads, *b) {
                    for r in 0..n {
                        for (d, gv) in gb.iter_mut().zip(&g[r * m..(r + 1) * m]) {
                            *d += gv;
                        }
                    }
                }
            }
            Op::Softmax(a) => {
                let (rows, cols) = self.value(*a).rows_cols();
                if let Some(ga) = self.slot(grads, *a) {
                    for r in 0..rows {
                        let y = &out[r * cols..(r + 1) * cols];
                        let gy = &g[r * cols..(r + 1) * cols];
                        let dot: f64 = y.iter().zip(gy).map(|(p, q)| p * q).sum();
                        for c in 0..cols {
                            ga[r * cols + c] += y[c] * (gy[c] - dot);
                        }
                    }
                }
            }
            Op::Conv2d {
                input,
                kernel,
                bias,
                pad,
            } => self.conv2d_backward(*input, *kernel, *bias, *pad, g, grads),
            Op::Concat(parts) => {
                let rows = self.shape(parts[0])[0];
                let widths: Vec<usize> = parts.iter().map(|&p| self.shape(p)[1]).collect();
                let total: usize = widths.iter().sum();
                let mut offset = 0;
                for (&p, &w) in parts.iter().zip(&widths) {
                    if let Some(gp) = self.slot(grads, p) {
                        for r in 0..rows {
                            for c in 0..w {
                                gp[r * w + c] += g[r * total + offset + c];
                            }
                        }
                    }
                    offset += w;
                }
            }
            Op::GatherRows { src, index } => {
                let cols = self.shape(*src)[1];
                if let Some(gs) = self.slot(grads, *src) {
                    for (k, &i) in index.iter().enumerate() {
                        for c in 0..cols {
                            gs[i * cols + c] += g[k * cols + c];
                        }
                    }
                }
            }
            Op::ReduceSum { src, axis } | Op::ReduceMean { src, axis } => {
                let shape = self.shape(*src);
                let scale = if matches!(self.nodes[id].op, Op::ReduceMean { .. }) {
                    match axis {
                        None => 1.0 / self.value(*src).numel() as f64,
                        Some(ax) => 1.0 / split_axis(shape, *ax).1 as f64,
                    }
                } else {
                    1.0
                };
                match axis {
                    None => self.accumulate(grads, *src, |_| g[0] * scale),
                    Some(ax) => {
                        let (_, n, inner) = split_axis(shape, *ax);
                        self.accumulate(grads, *src, |i| {
                            let o = i / (n * inner);
                            let j = i % inner;
                            g[o * inner + j] * scale
                        });
                    }
                }
            }
            Op::GaussianLogProb { mean, log_std, sample } => {
                let (rows, d) = self.value(*mean).rows_cols();
                let shared = self.shape(*log_std) == [d];
                let (m, ls, a) = (self.data(*mean), self.data(*log_std), self.data(*sample));
                let l_at = |i: usize| if shared { ls[i % d] } else { ls[i] };
                // z / sigma per element
                let zs = |i: usize| {
                    let s = l_at(i).exp();
                    (a[i] - m[i]) / (s * s)
                };
                self.accumulate(grads, *mean, |i| g[i / d] * zs(i));
                self.accumulate(grads, *sample, |i| -g[i / d] * zs(i));
                if let Some(gl) = self.slot(grads, *log_std) {
                    for r in 0..rows {
                        for c in 0..d {
                            let i = r * d + c;
                            let z = (a[i] - m[i]) / l_at(i).exp();
                            let dst = if shared { c } else { i };
                            gl[dst] += g[r] * (z * z - 1.0);
                        }
                    }
                }
            }
        }
    }

    fn conv2d_backward(
        &self,
        input: Var,
        kernel: Var,
        bias: Var,
        pad: usize,
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
    ) {
        let dims = Self::conv_dims_padded(self.shape(input), self.shape(kernel), pad);
        let x = self.data(input);
        let k = self.data(kernel);
        let plane_len = dims.oh * dims.ow;
        if let Some(gb) = self.slot(grads, bias) {
            for b in 0..dims.batch {
                for (o, d) in gb.iter_mut().enumerate() {
                    *d += g[(b * dims.cout + o) * plane_len..][..plane_len].iter().sum::<f64>();
                }
            }
        }
        if self.needs(kernel) {
            let mut gk = vec![0.0; k.len()];
            dims.for_each_segment(g, |b, o, c, kk, gseg, iy, ix0| {
                let len = gseg.len();
                let xs = &x[((b * dims.cin + c) * dims.h + iy) * dims.w + ix0..][..len];
                let dot: f64 = gseg.iter().zip(xs).map(|(p, q)| p * q).sum();
                gk[(o * dims.cin + c) * dims.kh * dims.kw + kk] += dot;
            });
            if let Some(dst) = self.slot(grads, kernel) {
                for (d, v) in dst.iter_mut().zip(gk) {
                    *d += v;
                }
            }
        }
        if self.needs(input) {
            let mut gx = vec![0.0; x.len()];
            dims.for_each_segment(g, |b, o, c, kk, gseg, iy, ix0| {
                let len = gseg.len();
                let kv = k[(o * dims.cin + c) * dims.kh * dims.kw + kk];
                let dst = &mut gx[((b * dims.cin + c) * dims.h + iy) * dims.w + ix0..][..len];
                for (d, gv) in dst.iter_mut().zip(gseg) {
                    *d += kv * gv;
                }
            });
            if let Some(dst) = self.slot(grads, input) {
                for (d, v) in dst.iter_mut().zip(gx) {
                    *d += v;
                }
            }
        }
    }
}
