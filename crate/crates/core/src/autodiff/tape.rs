//! Reverse-mode differentiation over a linear record of operations.
//!
//! Every op appends one node whose inputs all precede it, so walking the node
//! list backwards visits each node once and only after all of its consumers.

use super::kernels::{gemm, Layout};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::real::Real;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Attention geometry shared by the batched attention ops.
///
/// Activations are laid out as `[batch * seq, heads * head_dim]`, score
/// tensors as `[batch, heads, seq, seq]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttnShape {
    pub batch: usize,
    pub seq: usize,
    pub heads: usize,
    pub head_dim: usize,
}

impl AttnShape {
    pub fn width(&self) -> usize {
        self.heads * self.head_dim
    }

    pub fn scores_shape(&self) -> Vec<usize> {
        vec![self.batch, self.heads, self.seq, self.seq]
    }

    fn act_shape(&self) -> Vec<usize> {
        vec![self.batch * self.seq, self.width()]
    }
}

enum Op<F> {
    Leaf,
    MatMul {
        a: Var,
        b: Var,
        m: usize,
        k: usize,
        n: usize,
    },
    Transpose {
        x: Var,
        rows: usize,
        cols: usize,
    },
    Add {
        a: Var,
        b: Var,
    },
    AddRow {
        x: Var,
        bias: Var,
        cols: usize,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        factor: F,
    },
    Sum {
        x: Var,
    },
    SquaredRelu {
        x: Var,
    },
    Softmax {
        x: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        cols: usize,
        xhat: Vec<F>,
        rstd: Vec<F>,
    },
    Embedding {
        table: Var,
        ids: Vec<u32>,
        cols: usize,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<u32>,
        mask: Vec<bool>,
        probs: Vec<F>,
        count: usize,
    },
    Rope {
        x: Var,
        cos: Vec<F>,
        sin: Vec<F>,
        head_dim: usize,
    },
    L2Normalize {
        x: Var,
        head_dim: usize,
        norms: Vec<F>,
        eps: F,
    },
    HeadDots {
        q: Var,
        k: Var,
        shape: AttnShape,
    },
    ScaleHeads {
        x: Var,
        gains: Var,
        heads: usize,
        block: usize,
    },
    CausalSoftmax {
        x: Var,
        seq: usize,
    },
    AttnMix {
        probs: Var,
        v: Var,
        shape: AttnShape,
    },
}

struct Node<F> {
    shape: Vec<usize>,
    value: Vec<F>,
    op: Op<F>,
    requires_grad: bool,
    /// Accumulated gradient; only kept for leaves.
    grad: Option<Vec<F>>,
}

/// Recorded computation for one forward/backward pass.
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Error {
    Error::Shape {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a copy of `t` as a leaf; it is differentiable iff `t` is.
    pub fn leaf(&mut self, t: &Tensor<F>) -> Var {
        let requires_grad = t.requires_grad();
        let grad = requires_grad.then(|| vec![F::zero(); t.numel()]);
        self.nodes.push(Node {
            shape: t.shape().to_vec(),
            value: t.data().to_vec(),
            op: Op::Leaf,
            requires_grad,
            grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, shape: &[usize], data: Vec<F>) -> Result<Var> {
        let t = Tensor::new(shape.to_vec(), data)?;
        Ok(self.leaf(&t))
    }

    pub fn value(&self, v: Var) -> &[F] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn scalar(&self, v: Var) -> F {
        self.nodes[v.0].value[0]
    }

    /// Accumulated gradient of a differentiable leaf.
    pub fn grad(&self, v: Var) -> Option<&[F]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn zero_grads(&mut self) {
        for node in &mut self.nodes {
            if let Some(g) = node.grad.as_mut() {
                g.iter_mut().for_each(|x| *x = F::zero());
            }
        }
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<F>, op: Op<F>, inputs: &[Var]) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn matrix_dims(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        match self.shape(v) {
            [r, c] => Ok((*r, *c)),
            s => Err(shape_err(op, s, &[0, 0])),
        }
    }

    /// `a[m×k] · b[k×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix_dims(a, "matmul")?;
        let (k2, n) = self.matrix_dims(b, "matmul")?;
        if k != k2 {
            return Err(shape_err("matmul", self.shape(a), self.shape(b)));
        }
        let mut out = vec![F::zero(); m * n];
        gemm(
            m,
            k,
            n,
            F::one(),
            self.value(a),
            Layout::rows(k),
            self.value(b),
            Layout::rows(n),
            F::zero(),
            &mut out,
            Layout::rows(n),
        );
        Ok(self.push(vec![m, n], out, Op::MatMul { a, b, m, k, n }, &[a, b]))
    }

    /// Transpose of a 2-D tensor.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (rows, cols) = self.matrix_dims(x, "transpose")?;
        let src = self.value(x);
        let mut out = vec![F::zero(); src.len()];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = src[r * cols + c];
            }
        }
        Ok(self.push(vec![cols, rows], out, Op::Transpose { x, rows, cols }, &[x]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err("add", self.shape(a), self.shape(b)));
        }
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| *x + *y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, out, Op::Add { a, b }, &[a, b]))
    }

    /// Adds a `[cols]` vector to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let cols = *self.shape(x).last().unwrap_or(&0);
        if self.shape(bias) != [cols] {
            return Err(shape_err("add_row", self.shape(x), self.shape(bias)));
        }
        let b = self.value(bias);
        let out = self
            .value(x)
            .chunks_exact(cols.max(1))
            .flat_map(|row| row.iter().zip(b).map(|(v, w)| *v + *w))
            .collect();
        let shape = self.shape(x).to_vec();
        Ok(self.push(shape, out, Op::AddRow { x, bias, cols }, &[x, bias]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err("mul", self.shape(a), self.shape(b)));
        }
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| *x * *y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, out, Op::Mul { a, b }, &[a, b]))
    }

    pub fn scale(&mut self, x: Var, factor: F) -> Var {
        let out = self.value(x).iter().map(|v| *v * factor).collect();
        let shape = self.shape(x).to_vec();
        self.push(shape, out, Op::Scale { x, factor }, &[x])
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).iter().copied().sum();
        self.push(Vec::new(), vec![total], Op::Sum { x }, &[x])
    }

    /// Elementwise `max(0, x)²`.
    pub fn squared_relu(&mut self, x: Var) -> Var {
        let out = self
            .value(x)
            .iter()
            .map(|v| {
                let r = v.max(F::zero());
                r * r
            })
            .collect();
        let shape = self.shape(x).to_vec();
        self.push(shape, out, Op::SquaredRelu { x }, &[x])
    }

    /// Max-subtracted softmax along `axis`.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::Index {
                what: "softmax axis",
                index: axis,
                bound: shape.len(),
            });
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let src = self.value(x);
        let mut out = vec![F::zero(); src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let idx = |j: usize| base + j * inner;
                let mut max = F::neg_infinity();
                for j in 0..len {
                    max = max.max(src[idx(j)]);
                }
                let mut total = F::zero();
                for j in 0..len {
                    let e = (src[idx(j)] - max).exp();
                    out[idx(j)] = e;
                    total += e;
                }
                for j in 0..len {
                    out[idx(j)] /= total;
                }
            }
        }
        Ok(self.push(
            shape,
            out,
            Op::Softmax {
                x,
                outer,
                len,
                inner,
            },
            &[x],
        ))
    }

    /// Normalizes each last-axis vector to zero mean and unit variance, then
    /// applies `gain` and `bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: F) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let cols = *shape.last().unwrap_or(&0);
        if self.shape(gain) != [cols] || self.shape(bias) != [cols] {
            return Err(shape_err("layer_norm", &shape, self.shape(gain)));
        }
        let src = self.value(x);
        let g = self.value(gain);
        let b = self.value(bias);
        let rows = src.len() / cols.max(1);
        let mut xhat = vec![F::zero(); src.len()];
        let mut rstd = vec![F::zero(); rows];
        let mut out = vec![F::zero(); src.len()];
        let n = F::from_f64(cols as f64);
        for r in 0..rows {
            let row = &src[r * cols..(r + 1) * cols];
            let mean = row.iter().copied().sum::<F>() / n;
            let var = row.iter().map(|v| (*v - mean) * (*v - mean)).sum::<F>() / n;
            let inv = F::one() / (var + eps).sqrt();
            rstd[r] = inv;
            for c in 0..cols {
                let h = (row[c] - mean) * inv;
                xhat[r * cols + c] = h;
                out[r * cols + c] = h * g[c] + b[c];
            }
        }
        Ok(self.push(
            shape,
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                cols,
                xhat,
                rstd,
            },
            &[x, gain, bias],
        ))
    }

    /// Gathers rows of `table[V×d]`, giving `[ids.len()×d]`.
    pub fn embedding(&mut self, table: Var, ids: &[u32]) -> Result<Var> {
        let (vocab, cols) = self.matrix_dims(table, "embedding")?;
        let src = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            let id = id as usize;
            if id >= vocab {
                return Err(Error::Index {
                    what: "token id",
                    index: id,
                    bound: vocab,
                });
            }
            out.extend_from_slice(&src[id * cols..(id + 1) * cols]);
        }
        Ok(self.push(
            vec![ids.len(), cols],
            out,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
                cols,
            },
            &[table],
        ))
    }

    /// Mean negative log-likelihood of `targets` over positions where `mask`
    /// is set. Zero when no position is selected.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[u32], mask: &[bool]) -> Result<Var> {
        let (rows, vocab) = self.matrix_dims(logits, "cross_entropy")?;
        if targets.len() != rows || mask.len() != rows {
            return Err(shape_err("cross_entropy", &[rows, vocab], &[targets.len(), mask.len()]));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t as usize >= vocab) {
            return Err(Error::Index {
                what: "target id",
                index: bad as usize,
                bound: vocab,
            });
        }
        let src = self.value(logits);
        let mut probs = vec![F::zero(); src.len()];
        let mut total = F::zero();
        let mut count = 0usize;
        for r in 0..rows {
            if !mask[r] {
                continue;
            }
            count += 1;
            let row = &src[r * vocab..(r + 1) * vocab];
            let max = row.iter().copied().fold(F::neg_infinity(), F::max);
            let mut z = F::zero();
            for (p, v) in probs[r * vocab..(r + 1) * vocab].iter_mut().zip(row) {
                *p = (*v - max).exp();
                z += *p;
            }
            for p in &mut probs[r * vocab..(r + 1) * vocab] {
                *p /= z;
            }
            total += z.ln() + max - row[targets[r] as usize];
        }
        let loss = if count == 0 {
            F::zero()
        } else {
            total / F::from_f64(count as f64)
        };
        Ok(self.push(
            Vec::new(),
            vec![loss],
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                mask: mask.to_vec(),
                probs,
                count,
            },
            &[logits],
        ))
    }

    /// Rotates dimension pairs `(2i, 2i+1)` of every `head_dim` chunk of row
    /// `r` by `positions[r] · base^(-2i/head_dim)`.
    pub fn rope(&mut self, x: Var, positions: &[usize], head_dim: usize, base: f64) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let rows = *shape.first().unwrap_or(&0);
        let width: usize = shape.iter().skip(1).product();
        if head_dim == 0 || head_dim % 2 != 0 {
            return Err(Error::Config(format!("rotary head dimension must be even, got {head_dim}")));
        }
        if width % head_dim != 0 || positions.len() != rows {
            return Err(shape_err("rope", &shape, &[positions.len(), head_dim]));
        }
        let (cos, sin) = rope_tables::<F>(positions, head_dim, base);
        let half = head_dim / 2;
        let src = self.value(x);
        let mut out = vec![F::zero(); src.len()];
        for r in 0..rows {
            let c = &cos[r * half..(r + 1) * half];
            let s = &sin[r * half..(r + 1) * half];
            for (dst, chunk) in out[r * width..(r + 1) * width]
                .chunks_exact_mut(head_dim)
                .zip(src[r * width..(r + 1) * width].chunks_exact(head_dim))
            {
                for i in 0..half {
                    let (a, b) = (chunk[2 * i], chunk[2 * i + 1]);
                    dst[2 * i] = a * c[i] - b * s[i];
                    dst[2 * i + 1] = a * s[i] + b * c[i];
                }
            }
        }
        Ok(self.push(
            shape,
            out,
            Op::Rope {
                x,
                cos,
                sin,
                head_dim,
            },
            &[x],
        ))
    }

    /// L2-normalizes every `head_dim` chunk, dividing by `max(‖v‖, eps)`.
    pub fn l2_normalize(&mut self, x: Var, head_dim: usize, eps: F) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let src = self.value(x);
        if head_dim == 0 || src.len() % head_dim != 0 {
            return Err(shape_err("l2_normalize", &shape, &[head_dim]));
        }
        let mut out = vec![F::zero(); src.len()];
        let mut norms = Vec::with_capacity(src.len() / head_dim);
        for (dst, chunk) in out.chunks_exact_mut(head_dim).zip(src.chunks_exact(head_dim)) {
            let n = chunk.iter().map(|v| *v * *v).sum::<F>().sqrt();
            let d = n.max(eps);
            for (o, v) in dst.iter_mut().zip(chunk) {
                *o = *v / d;
            }
            norms.push(n);
        }
        Ok(self.push(
            shape,
            out,
            Op::L2Normalize {
                x,
                head_dim,
                norms,
                eps,
            },
            &[x],
        ))
    }

    /// Per-head query·key dot products, `[batch, heads, seq, seq]`.
    pub fn head_dots(&mut self, q: Var, k: Var, shape: AttnShape) -> Result<Var> {
        let act = shape.act_shape();
        if self.shape(q) != act.as_slice() || self.shape(k) != act.as_slice() {
            return Err(shape_err("head_dots", self.shape(q), self.shape(k)));
        }
        let AttnShape {
            batch,
            seq,
            heads,
            head_dim,
        } = shape;
        let width = shape.width();
        let mut out = vec![F::zero(); batch * heads * seq * seq];
        let (qv, kv) = (self.value(q), self.value(k));
        for b in 0..batch {
            for h in 0..heads {
                let off = b * seq * width + h * head_dim;
                gemm(
                    seq,
                    head_dim,
                    seq,
                    F::one(),
                    qv,
                    Layout::rows(width).at(off),
                    kv,
                    Layout::transposed(width).at(off),
                    F::zero(),
                    &mut out,
                    Layout::rows(seq).at((b * heads + h) * seq * seq),
                );
            }
        }
        Ok(self.push(shape.scores_shape(), out, Op::HeadDots { q, k, shape }, &[q, k]))
    }

    /// Multiplies head `h` of a `[outer, heads, ...]` tensor by `gains[h]`.
    pub fn scale_heads(&mut self, x: Var, gains: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let heads = *self.shape(gains).first().unwrap_or(&0);
        if self.shape(gains).len() != 1 || shape.len() < 2 || shape[1] != heads {
            return Err(shape_err("scale_heads", &shape, self.shape(gains)));
        }
        let block: usize = shape[2..].iter().product();
        let g = self.value(gains);
        let out = self
            .value(x)
            .chunks_exact(block)
            .enumerate()
            .flat_map(|(i, chunk)| {
                let gh = g[i % heads];
                chunk.iter().map(move |v| *v * gh)
            })
            .collect();
        Ok(self.push(
            shape,
            out,
            Op::ScaleHeads {
                x,
                gains,
                heads,
                block,
            },
            &[x, gains],
        ))
    }

    /// Row softmax over `[..., seq, seq]` scores with strictly-future key
    /// positions masked out (probability exactly zero).
    pub fn causal_softmax(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let n = shape.len();
        if n < 2 || shape[n - 1] != shape[n - 2] {
            return Err(shape_err("causal_softmax", &shape, &[]));
        }
        let seq = shape[n - 1];
        let src = self.value(x);
        let mut out = vec![F::zero(); src.len()];
        for (r, (dst, row)) in out
            .chunks_exact_mut(seq)
            .zip(src.chunks_exact(seq))
            .enumerate()
        {
            let t = r % seq;
            let live = &row[..=t];
            let max = live.iter().copied().fold(F::neg_infinity(), F::max);
            let mut total = F::zero();
            for (d, v) in dst[..=t].iter_mut().zip(live) {
                *d = (*v - max).exp();
                total += *d;
            }
            for d in &mut dst[..=t] {
                *d /= total;
            }
        }
        Ok(self.push(shape, out, Op::CausalSoftmax { x, seq }, &[x]))
    }

    /// Weighted sum of value rows: `out[b,i,h,:] = Σ_j p[b,h,i,j] · v[b,j,h,:]`.
    pub fn attn_mix(&mut self, probs: Var, v: Var, shape: AttnShape) -> Result<Var> {
        if self.shape(probs) != shape.scores_shape().as_slice()
            || self.shape(v) != shape.act_shape().as_slice()
        {
            return Err(shape_err("attn_mix", self.shape(probs), self.shape(v)));
        }
        let AttnShape {
            batch,
            seq,
            heads,
            head_dim,
        } = shape;
        let width = shape.width();
        let mut out = vec![F::zero(); batch * seq * width];
        let (pv, vv) = (self.value(probs), self.value(v));
        for b in 0..batch {
            for h in 0..heads {
                let off = b * seq * width + h * head_dim;
                gemm(
                    seq,
                    seq,
                    head_dim,
                    F::one(),
                    pv,
                    Layout::rows(seq).at((b * heads + h) * seq * seq),
                    vv,
                    Layout::rows(width).at(off),
                    F::zero(),
                    &mut out,
                    Layout::rows(width).at(off),
                );
            }
        }
        Ok(self.push(shape.act_shape(), out, Op::AttnMix { probs, v, shape }, &[probs, v]))
    }

    /// Propagates d`loss` to every differentiable leaf, adding into their
    /// accumulators. Calling it twice doubles leaf gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.nodes[loss.0].shape
            )));
        }
        let mut grads: Vec<Option<Vec<F>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![F::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                grads[i] = Some(g);
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }

        for (node, g) in self.nodes.iter_mut().zip(grads) {
            if let (Some(acc), Some(g)) = (node.grad.as_mut(), g) {
                for (a, b) in acc.iter_mut().zip(&g) {
                    *a += *b;
                }
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[F], grads: &mut [Option<Vec<F>>]) {
        let nodes = &self.nodes;
        let val = |v: Var| -> &[F] { &nodes[v.0].value };
        // Gradient buffer for an input, or None when it needs no gradient.
        macro_rules! buf {
            ($v:expr) => {{
                let v: Var = $v;
                if nodes[v.0].requires_grad {
                    let len = nodes[v.0].value.len();
                    Some(grads[v.0].get_or_insert_with(|| vec![F::zero(); len]))
                } else {
                    None
                }
            }};
        }
        match &nodes[i].op {
            Op::Leaf => {}
            &Op::MatMul { a, b, m, k, n } => {
                if let Some(ga) = buf!(a) {
                    // dA += dC · Bᵀ
                    gemm(m, n, k, F::one(), g, Layout::rows(n), val(b), Layout::transposed(n), F::one(), ga, Layout::rows(k));
                }
                if let Some(gb) = buf!(b) {
                    // dB += Aᵀ · dC
                    gemm(k, m, n, F::one(), val(a), Layout::transposed(k), g, Layout::rows(n), F::one(), gb, Layout::rows(n));
                }
            }
            &Op::Transpose { x, rows, cols } => {
                if let Some(gx) = buf!(x) {
                    for r in 0..rows {
                        for c in 0..cols {
                            gx[r * cols + c] += g[c * rows + r];
                        }
                    }
                }
            }
            &Op::Add { a, b } => {
                for v in [a, b] {
                    if let Some(gv) = buf!(v) {
                        add_into(gv, g);
                    }
                }
            }
            &Op::AddRow { x, bias, cols } => {
                if let Some(gx) = buf!(x) {
                    add_into(gx, g);
                }
                if let Some(gb) = buf!(bias) {
                    for row in g.chunks_exact(cols) {
                        add_into(gb, row);
                    }
                }
            }
            &Op::Mul { a, b } => {
                if let Some(ga) = buf!(a) {
                    for ((d, gv), y) in ga.iter_mut().zip(g).zip(val(b)) {
                        *d += *gv * *y;
                    }
                }
                if let Some(gb) = buf!(b) {
                    for ((d, gv), x) in gb.iter_mut().zip(g).zip(val(a)) {
                        *d += *gv * *x;
                    }
                }
            }
            &Op::Scale { x, factor } => {
                if let Some(gx) = buf!(x) {
                    for (d, gv) in gx.iter_mut().zip(g) {
                        *d += *gv * factor;
                    }
                }
            }
            &Op::Sum { x } => {
                if let Some(gx) = buf!(x) {
                    let s = g[0];
                    gx.iter_mut().for_each(|d| *d += s);
                }
            }
            &Op::SquaredRelu { x } => {
                if let Some(gx) = buf!(x) {
                    let two = F::from_f64(2.0);
                    for ((d, gv), xv) in gx.iter_mut().zip(g).zip(val(x)) {
                        *d += *gv * two * xv.max(F::zero());
                    }
                }
            }
            &Op::Softmax {
                x,
                outer,
                len,
                inner,
            } => {
                let y = &nodes[i].value;
                if let Some(gx) = buf!(x) {
                    for o in 0..outer {
                        for c in 0..inner {
                            let base = o * len * inner + c;
                            let dot: F = (0..len).map(|j| g[base + j * inner] * y[base + j * inner]).sum();
                            for j in 0..len {
                                let idx = base + j * inner;
                                gx[idx] += y[idx] * (g[idx] - dot);
                            }
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                cols,
                xhat,
                rstd,
            } => {
                let cols = *cols;
                let gainv = val(*gain);
                if let Some(gg) = buf!(*gain) {
                    for (grow, hrow) in g.chunks_exact(cols).zip(xhat.chunks_exact(cols)) {
                        for c in 0..cols {
                            gg[c] += grow[c] * hrow[c];
                        }
                    }
                }
                if let Some(gb) = buf!(*bias) {
                    for grow in g.chunks_exact(cols) {
                        add_into(gb, grow);
                    }
                }
                if let Some(gx) = buf!(*x) {
                    let n = F::from_f64(cols as f64);
                    for (r, (grow, hrow)) in g.chunks_exact(cols).zip(xhat.chunks_exact(cols)).enumerate() {
                        let mut mean_d = F::zero();
                        let mut mean_dh = F::zero();
                        for c in 0..cols {
                            let d = grow[c] * gainv[c];
                            mean_d += d;
                            mean_dh += d * hrow[c];
                        }
                        mean_d /= n;
                        mean_dh /= n;
                        let out = &mut gx[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            let d = grow[c] * gainv[c];
                            out[c] += rstd[r] * (d - mean_d - hrow[c] * mean_dh);
                        }
                    }
                }
            }
            Op::Embedding { table, ids, cols } => {
                let cols = *cols;
                if let Some(gt) = buf!(*table) {
                    for (row, &id) in g.chunks_exact(cols).zip(ids) {
                        let id = id as usize;
                        add_into(&mut gt[id * cols..(id + 1) * cols], row);
                    }
                }
            }
            Op::CrossEntropy {
                logits,
                targets,
                mask,
                probs,
                count,
            } => {
                if *count == 0 {
                    return;
                }
                let vocab = nodes[logits.0].shape[1];
                if let Some(gl) = buf!(*logits) {
                    let s = g[0] / F::from_f64(*count as f64);
                    for (r, &on) in mask.iter().enumerate() {
                        if !on {
                            continue;
                        }
                        let row = &mut gl[r * vocab..(r + 1) * vocab];
                        for (d, p) in row.iter_mut().zip(&probs[r * vocab..(r + 1) * vocab]) {
                            *d += s * *p;
                        }
                        row[targets[r] as usize] -= s;
                    }
                }
            }
            Op::Rope {
                x,
                cos,
                sin,
                head_dim,
            } => {
                let head_dim = *head_dim;
                let half = head_dim / 2;
                let rows = nodes[x.0].shape[0];
                if let Some(gx) = buf!(*x) {
                    let width = gx.len() / rows.max(1);
                    for r in 0..rows {
                        let c = &cos[r * half..(r + 1) * half];
                        let s = &sin[r * half..(r + 1) * half];
                        for (dst, chunk) in gx[r * width..(r + 1) * width]
                            .chunks_exact_mut(head_dim)
                            .zip(g[r * width..(r + 1) * width].chunks_exact(head_dim))
                        {
                            for k in 0..half {
                                let (a, b) = (chunk[2 * k], chunk[2 * k + 1]);
                                dst[2 * k] += a * c[k] + b * s[k];
                                dst[2 * k + 1] += b * c[k] - a * s[k];
                            }
                        }
                    }
                }
            }
            Op::L2Normalize {
                x,
                head_dim,
                norms,
                eps,
            } => {
                let y = &nodes[i].value;
                if let Some(gx) = buf!(*x) {
                    for (((dst, gc), yc), &n) in gx
                        .chunks_exact_mut(*head_dim)
                        .zip(g.chunks_exact(*head_dim))
                        .zip(y.chunks_exact(*head_dim))
                        .zip(norms)
                    {
                        if n > *eps {
                            let proj: F = gc.iter().zip(yc).map(|(a, b)| *a * *b).sum();
                            for ((d, gv), yv) in dst.iter_mut().zip(gc).zip(yc) {
                                *d += (*gv - *yv * proj) / n;
                            }
                        } else {
                            for (d, gv) in dst.iter_mut().zip(gc) {
                                *d += *gv / *eps;
                            }
                        }
                    }
                }
            }
            &Op::HeadDots { q, k, shape } => {
                let AttnShape {
                    batch,
                    seq,
                    heads,
                    head_dim,
                } = shape;
                let width = shape.width();
                for b in 0..batch {
                    for h in 0..heads {
                        let off = b * seq * width + h * head_dim;
                        let goff = (b * heads + h) * seq * seq;
                        if let Some(gq) = buf!(q) {
                            // dQ += dS · K
                            gemm(seq, seq, head_dim, F::one(), g, Layout::rows(seq).at(goff), val(k), Layout::rows(width).at(off), F::one(), gq, Layout::rows(width).at(off));
                        }
                        if let Some(gk) = buf!(k) {
                            // dK += dSᵀ · Q
                            gemm(seq, seq, head_dim, F::one(), g, Layout::transposed(seq).at(goff), val(q), Layout::rows(width).at(off), F::one(), gk, Layout::rows(width).at(off));
                        }
                    }
                }
            }
            &Op::ScaleHeads {
                x,
                gains,
                heads,
                block,
            } => {
                let gv = val(gains);
                if let Some(gx) = buf!(x) {
                    for (c, (dst, gc)) in gx.chunks_exact_mut(block).zip(g.chunks_exact(block)).enumerate() {
                        let gh = gv[c % heads];
                        for (d, v) in dst.iter_mut().zip(gc) {
                            *d += *v * gh;
                        }
                    }
                }
                if let Some(gg) = buf!(gains) {
                    for (c, (xc, gc)) in val(x).chunks_exact(block).zip(g.chunks_exact(block)).enumerate() {
                        let s: F = xc.iter().zip(gc).map(|(a, b)| *a * *b).sum();
                        gg[c % heads] += s;
                    }
                }
            }
            &Op::CausalSoftmax { x, seq } => {
                let y = &nodes[i].value;
                if let Some(gx) = buf!(x) {
                    for (r, ((dst, gr), yr)) in gx
                        .chunks_exact_mut(seq)
                        .zip(g.chunks_exact(seq))
                        .zip(y.chunks_exact(seq))
                        .enumerate()
                    {
                        let t = r % seq;
                        let dot: F = gr[..=t].iter().zip(&yr[..=t]).map(|(a, b)| *a * *b).sum();
                        for j in 0..=t {
                            dst[j] += yr[j] * (gr[j] - dot);
                        }
                    }
                }
            }
            &Op::AttnMix { probs, v, shape } => {
                let AttnShape {
                    batch,
                    seq,
                    heads,
                    head_dim,
                } = shape;
                let width = shape.width();
                for b in 0..batch {
                    for h in 0..heads {
                        let off = b * seq * width + h * head_dim;
                        let poff = (b * heads + h) * seq * seq;
                        if let Some(gp) = buf!(probs) {
                            // dP += dO · Vᵀ
                            gemm(seq, head_dim, seq, F::one(), g, Layout::rows(width).at(off), val(v), Layout::transposed(width).at(off), F::one(), gp, Layout::rows(seq).at(poff));
                        }
                        if let Some(gv) = buf!(v) {
                            // dV += Pᵀ · dO
                            gemm(seq, seq, head_dim, F::one(), val(probs), Layout::transposed(seq).at(poff), g, Layout::rows(width).at(off), F::one(), gv, Layout::rows(width).at(off));
                        }
                    }
                }
            }
        }
    }
}

fn add_into<F: Real>(dst: &mut [F], src: &[F]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

/// Per-row cos/sin tables, `positions.len() × head_dim/2`.
pub(crate) fn rope_tables<F: Real>(positions: &[usize], head_dim: usize, base: f64) -> (Vec<F>, Vec<F>) {
    let half = head_dim / 2;
    let freqs: Vec<f64> = (0..half)
        .map(|i| base.powf(-(2.0 * i as f64) / head_dim as f64))
        .collect();
    let mut cos = Vec::with_capacity(positions.len() * half);
    let mut sin = Vec::with_capacity(positions.len() * half);
    for &p in positions {
        for f in &freqs {
            let angle = p as f64 * f;
            cos.push(F::from_f64(angle.cos()));
            sin.push(F::from_f64(angle.sin()));
        }
    }
    (cos, sin)
}
