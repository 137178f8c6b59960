//! Tensor-level Wengert tape with forward-over-reverse Hessian-vector
//! products.
//!
//! Every node carries its primal value and, when a direction `v` is
//! supplied, its tangent `dV` (the directional derivative of the value along
//! `v`). The reverse sweep propagates adjoints and, alongside them, the
//! tangents of the adjoints. The tangent of the parameter adjoint is exactly
//! `H v`, obtained in one forward and one backward pass with no `p x p`
//! storage.
//!
//! Each evaluation owns its tape; nothing here is shared between calls.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{Layout, ParamVector};

pub(crate) type NodeId = usize;

#[derive(Debug)]
enum Op {
    Input,
    Param {
        offset: usize,
    },
    /// `[n, k] x [k, m]`
    MatMul {
        a: NodeId,
        b: NodeId,
    },
    /// Bias over axis 1 of `[n, c, ...]`.
    AddBias {
        x: NodeId,
        b: NodeId,
    },
    Relu {
        x: NodeId,
    },
    /// 3x3 same-padding, stride 1. `x: [n, cin, h, w]`, `k: [cout, cin, 3, 3]`.
    Conv3x3 {
        x: NodeId,
        k: NodeId,
    },
    /// 2x2 stride-2 max pooling; `argmax[o]` is the flat input index feeding
    /// output `o`.
    MaxPool2 {
        x: NodeId,
        argmax: Vec<usize>,
    },
    Reshape {
        x: NodeId,
    },
    /// Mean softmax cross-entropy over rows of `[n, classes]`.
    SoftmaxXent {
        logits: NodeId,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    op: Op,
    shape: Vec<usize>,
    value: Vec<f64>,
    tangent: Option<Vec<f64>>,
}

/// Result of a reverse sweep.
pub(crate) struct Sweep {
    pub grad: ParamVector,
    /// `H v`, present when the tape was built with a direction.
    pub hvp: Option<ParamVector>,
}

pub(crate) struct Tape<'a> {
    nodes: Vec<Node>,
    params: &'a ParamVector,
    direction: Option<&'a ParamVector>,
    layer: String,
}

impl<'a> Tape<'a> {
    pub fn new(params: &'a ParamVector, direction: Option<&'a ParamVector>) -> Result<Self> {
        if let Some(v) = direction {
            params.check_compatible(v)?;
        }
        Ok(Self {
            nodes: Vec::with_capacity(16),
            params,
            direction,
            layer: String::from("input"),
        })
    }

    /// Names the layer subsequent nodes belong to (used in error messages).
    pub fn scope(&mut self, name: &str) {
        self.layer.clear();
        self.layer.push_str(name);
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id].shape
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, value: Vec<f64>, tangent: Option<Vec<f64>>) -> Result<NodeId> {
        if value.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericOverflow(self.layer.clone()));
        }
        self.nodes.push(Node {
            op,
            shape,
            value,
            tangent,
        });
        Ok(self.nodes.len() - 1)
    }

    fn mismatch(&self, expected: Vec<usize>, actual: &[usize]) -> Error {
        Error::Shape {
            context: format!("layer `{}`", self.layer),
            expected,
            actual: actual.to_vec(),
        }
    }

    pub fn input(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<NodeId> {
        self.push(Op::Input, shape, data, None)
    }

    pub fn param(&mut self, name: &str) -> Result<NodeId> {
        let slot = self
            .params
            .layout()
            .slot(name)
            .ok_or_else(|| Error::LayoutMismatch(format!("no parameter slot `{name}`")))?
            .clone();
        let value = self.params.as_slice()[slot.range()].to_vec();
        let tangent = self.direction.map(|v| v.as_slice()[slot.range()].to_vec());
        self.push(Op::Param { offset: slot.offset }, slot.shape, value, tangent)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (&self.nodes[a].shape, &self.nodes[b].shape);
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            let expected = vec![sa.first().copied().unwrap_or(0), sb.first().copied().unwrap_or(0)];
            return Err(self.mismatch(expected, &sa.clone()));
        }
        let (n, k, m) = (sa[0], sa[1], sb[1]);
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        let mut y = vec![0.0; n * m];
        mm_acc(&mut y, &na.value, &nb.value, n, k, m);
        let tangent = if na.tangent.is_some() || nb.tangent.is_some() {
            let mut dy = vec![0.0; n * m];
            if let Some(da) = &na.tangent {
                mm_acc(&mut dy, da, &nb.value, n, k, m);
            }
            if let Some(db) = &nb.tangent {
                mm_acc(&mut dy, &na.value, db, n, k, m);
            }
            Some(dy)
        } else {
            None
        };
        self.push(Op::MatMul { a, b }, vec![n, m], y, tangent)
    }

    pub fn add_bias(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let sx = self.nodes[x].shape.clone();
        let channels = sx.get(1).copied().unwrap_or(0);
        if sx.len() < 2 || self.nodes[b].shape != [channels] {
            return Err(self.mismatch(vec![channels], &self.nodes[b].shape.clone()));
        }
        let inner: usize = sx[2..].iter().product();
        let (nx, nb) = (&self.nodes[x], &self.nodes[b]);
        let add = |src: Option<&Vec<f64>>, bias: Option<&Vec<f64>>| -> Vec<f64> {
            let mut out = src.cloned().unwrap_or_else(|| vec![0.0; nx.value.len()]);
            if let Some(bias) = bias {
                for (idx, o) in out.iter_mut().enumerate() {
                    *o += bias[(idx / inner) % channels];
                }
            }
            out
        };
        let y = add(Some(&nx.value), Some(&nb.value));
        let tangent = if nx.tangent.is_some() || nb.tangent.is_some() {
            Some(add(nx.tangent.as_ref(), nb.tangent.as_ref()))
        } else {
            None
        };
        self.push(Op::AddBias { x, b }, sx, y, tangent)
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let nx = &self.nodes[x];
        let y = nx.value.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let tangent = nx.tangent.as_ref().map(|t| {
            t.iter()
                .zip(&nx.value)
                .map(|(&d, &v)| if v > 0.0 { d } else { 0.0 })
                .collect()
        });
        let shape = nx.shape.clone();
        self.push(Op::Relu { x }, shape, y, tangent)
    }

    pub fn conv3x3(&mut self, x: NodeId, k: NodeId) -> Result<NodeId> {
        let sx = self.nodes[x].shape.clone();
        let sk = self.nodes[k].shape.clone();
        if sx.len() != 4 || sk.len() != 4 || sk[1] != sx[1] || sk[2] != 3 || sk[3] != 3 {
            return Err(self.mismatch(
                vec![sk.first().copied().unwrap_or(0), sx.get(1).copied().unwrap_or(0), 3, 3],
                &sk,
            ));
        }
        let dims = ConvDims {
            n: sx[0],
            cin: sx[1],
            cout: sk[0],
            h: sx[2],
            w: sx[3],
        };
        let (nx, nk) = (&self.nodes[x], &self.nodes[k]);
        let mut y = vec![0.0; dims.n * dims.cout * dims.h * dims.w];
        conv_fwd(&mut y, &nx.value, &nk.value, dims);
        let tangent = if nx.tangent.is_some() || nk.tangent.is_some() {
            let mut dy = vec![0.0; y.len()];
            if let Some(dx) = &nx.tangent {
                conv_fwd(&mut dy, dx, &nk.value, dims);
            }
            if let Some(dk) = &nk.tangent {
                conv_fwd(&mut dy, &nx.value, dk, dims);
            }
            Some(dy)
        } else {
            None
        };
        self.push(Op::Conv3x3 { x, k }, vec![dims.n, dims.cout, dims.h, dims.w], y, tangent)
    }

    pub fn maxpool2(&mut self, x: NodeId) -> Result<NodeId> {
        let sx = self.nodes[x].shape.clone();
        if sx.len() != 4 || sx[2] < 2 || sx[3] < 2 {
            return Err(self.mismatch(vec![0, 0, 2, 2], &sx));
        }
        let (n, c, h, w) = (sx[0], sx[1], sx[2], sx[3]);
        let (oh, ow) = (h / 2, w / 2);
        let nx = &self.nodes[x];
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        for plane in 0..n * c {
            let base = plane * h * w;
            for i in 0..oh {
                for j in 0..ow {
                    let mut best = base + (2 * i) * w + 2 * j;
                    for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * i + di) * w + 2 * j + dj;
                        if nx.value[idx] > nx.value[best] {
                            best = idx;
                        }
                    }
                    argmax.push(best);
                }
            }
        }
        let y = argmax.iter().map(|&i| nx.value[i]).collect();
        let tangent = nx.tangent.as_ref().map(|t| argmax.iter().map(|&i| t[i]).collect());
        self.push(Op::MaxPool2 { x, argmax }, vec![n, c, oh, ow], y, tangent)
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let nx = &self.nodes[x];
        if shape.iter().product::<usize>() != nx.value.len() {
            return Err(self.mismatch(shape, &nx.shape.clone()));
        }
        let (y, t) = (nx.value.clone(), nx.tangent.clone());
        self.push(Op::Reshape { x }, shape, y, t)
    }

    /// Mean cross-entropy of `logits: [n, classes]` against `labels`.
    pub fn softmax_xent(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let s = self.nodes[logits].shape.clone();
        if s.len() != 2 || s[0] != labels.len() {
            return Err(self.mismatch(vec![labels.len(), s.get(1).copied().unwrap_or(0)], &s));
        }
        let (n, classes) = (s[0], s[1]);
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        let nl = &self.nodes[logits];
        let probs = softmax_rows(&nl.value, n, classes);
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            loss -= log_softmax_at(&nl.value[i * classes..(i + 1) * classes], y);
        }
        loss /= n as f64;
        let tangent = nl.tangent.as_ref().map(|dz| {
            let mut d = 0.0;
            for (i, &y) in labels.iter().enumerate() {
                let row = i * classes..(i + 1) * classes;
                let pdz: f64 = probs[row.clone()].iter().zip(&dz[row]).map(|(p, t)| p * t).sum();
                d += pdz - dz[i * classes + y];
            }
            vec![d / n as f64]
        });
        let op = Op::SoftmaxXent {
            logits,
            labels: labels.to_vec(),
            probs,
        };
        self.push(op, vec![1], vec![loss], tangent)
    }

    /// Reverse sweep from the scalar node `loss`, returning the parameter
    /// gradient and (when a direction was given) the Hessian-vector product.
    pub fn backward(&self, loss: NodeId, layout: &Arc<Layout>) -> Sweep {
        let with_tangent = self.direction.is_some();
        let count = self.nodes.len();
        let mut adj: Vec<Option<Vec<f64>>> = (0..count).map(|_| None).collect();
        let mut dadj: Vec<Option<Vec<f64>>> = (0..count).map(|_| None).collect();
        adj[loss] = Some(vec![1.0]);
        if with_tangent {
            dadj[loss] = Some(vec![0.0]);
        }
        let mut grad = vec![0.0; layout.total_len()];
        let mut hvp = with_tangent.then(|| vec![0.0; layout.total_len()]);

        for id in (0..=loss).rev() {
            let Some(g) = adj[id].take() else { continue };
            let dg = dadj[id].take();
            let node = &self.nodes[id];
            match &node.op {
                Op::Input => {}
                Op::Param { offset } => {
                    for (dst, v) in grad[*offset..].iter_mut().zip(&g) {
                        *dst += v;
                    }
                    if let (Some(h), Some(dg)) = (hvp.as_mut(), &dg) {
                        for (dst, v) in h[*offset..].iter_mut().zip(dg) {
                            *dst += v;
                        }
                    }
                }
                Op::MatMul { a, b } => {
                    let (na, nb) = (&self.nodes[*a], &self.nodes[*b]);
                    let (n, k, m) = (na.shape[0], na.shape[1], nb.shape[1]);
                    // gA = gY B^T ; gB = A^T gY
                    let ga = acc(&mut adj, *a, n * k);
                    mm_acc_nt(ga, &g, &nb.value, n, m, k);
                    let gb = acc(&mut adj, *b, k * m);
                    mm_acc_tn(gb, &na.value, &g, n, k, m);
                    if let Some(dg) = &dg {
                        // dgA = dgY B^T + gY dB^T ; dgB = dA^T gY + A^T dgY
                        let dga = acc(&mut dadj, *a, n * k);
                        mm_acc_nt(dga, dg, &nb.value, n, m, k);
                        if let Some(db) = &nb.tangent {
                            mm_acc_nt(dga, &g, db, n, m, k);
                        }
                        let dgb = acc(&mut dadj, *b, k * m);
                        mm_acc_tn(dgb, &na.value, dg, n, k, m);
                        if let Some(da) = &na.tangent {
                            mm_acc_tn(dgb, da, &g, n, k, m);
                        }
                    }
                }
                Op::AddBias { x, b } => {
                    let channels = node.shape[1];
                    let inner: usize = node.shape[2..].iter().product();
                    add_into(acc(&mut adj, *x, g.len()), &g);
                    channel_sum(acc(&mut adj, *b, channels), &g, channels, inner);
                    if let Some(dg) = &dg {
                        add_into(acc(&mut dadj, *x, g.len()), dg);
                        channel_sum(acc(&mut dadj, *b, channels), dg, channels, inner);
                    }
                }
                Op::Relu { x } => {
                    let xv = &self.nodes[*x].value;
                    masked_add(acc(&mut adj, *x, g.len()), &g, xv);
                    if let Some(dg) = &dg {
                        masked_add(acc(&mut dadj, *x, g.len()), dg, xv);
                    }
                }
                Op::Conv3x3 { x, k } => {
                    let (nx, nk) = (&self.nodes[*x], &self.nodes[*k]);
                    let dims = ConvDims {
                        n: nx.shape[0],
                        cin: nx.shape[1],
                        cout: nk.shape[0],
                        h: nx.shape[2],
                        w: nx.shape[3],
                    };
                    conv_bwd_input(acc(&mut adj, *x, nx.value.len()), &g, &nk.value, dims);
                    conv_bwd_kernel(acc(&mut adj, *k, nk.value.len()), &nx.value, &g, dims);
                    if let Some(dg) = &dg {
                        let dgx = acc(&mut dadj, *x, nx.value.len());
                        conv_bwd_input(dgx, dg, &nk.value, dims);
                        if let Some(dk) = &nk.tangent {
                            conv_bwd_input(dgx, &g, dk, dims);
                        }
                        let dgk = acc(&mut dadj, *k, nk.value.len());
                        conv_bwd_kernel(dgk, &nx.value, dg, dims);
                        if let Some(dx) = &nx.tangent {
                            conv_bwd_kernel(dgk, dx, &g, dims);
                        }
                    }
                }
                Op::MaxPool2 { x, argmax } => {
                    let len = self.nodes[*x].value.len();
                    let gx = acc(&mut adj, *x, len);
                    for (o, &i) in argmax.iter().enumerate() {
                        gx[i] += g[o];
                    }
                    if let Some(dg) = &dg {
                        let dgx = acc(&mut dadj, *x, len);
                        for (o, &i) in argmax.iter().enumerate() {
                            dgx[i] += dg[o];
                        }
                    }
                }
                Op::Reshape { x } => {
                    add_into(acc(&mut adj, *x, g.len()), &g);
                    if let Some(dg) = &dg {
                        add_into(acc(&mut dadj, *x, g.len()), dg);
                    }
                }
                Op::SoftmaxXent {
                    logits,
                    labels,
                    probs,
                } => {
                    let nl = &self.nodes[*logits];
                    let (n, classes) = (nl.shape[0], nl.shape[1]);
                    let inv_n = 1.0 / n as f64;
                    let gl = g[0];
                    let gz = acc(&mut adj, *logits, n * classes);
                    for (i, &y) in labels.iter().enumerate() {
                        for c in 0..classes {
                            let onehot = if c == y { 1.0 } else { 0.0 };
                            gz[i * classes + c] += gl * (probs[i * classes + c] - onehot) * inv_n;
                        }
                    }
                    if let Some(dg) = &dg {
                        let dgl = dg[0];
                        let dgz = acc(&mut dadj, *logits, n * classes);
                        for (i, &y) in labels.iter().enumerate() {
                            let row = i * classes..(i + 1) * classes;
                            let p = &probs[row.clone()];
                            let pdz = nl
                                .tangent
                                .as_ref()
                                .map(|dz| p.iter().zip(&dz[row.clone()]).map(|(a, b)| a * b).sum::<f64>());
                            for c in 0..classes {
                                let onehot = if c == y { 1.0 } else { 0.0 };
                                let mut v = dgl * (p[c] - onehot);
                                if let (Some(dz), Some(pdz)) = (&nl.tangent, pdz) {
                                    // d softmax = p (dz - <p, dz>)
                                    v += gl * p[c] * (dz[i * classes + c] - pdz);
                                }
                                dgz[i * classes + c] += v * inv_n;
                            }
                        }
                    }
                }
            }
        }

        let grad = ParamVector::new(Arc::clone(layout), grad).expect("layout length");
        let hvp = hvp.map(|h| ParamVector::new(Arc::clone(layout), h).expect("layout length"));
        Sweep { grad, hvp }
    }
}

fn acc(slots: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
    slots[id].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn masked_add(dst: &mut [f64], src: &[f64], mask_from: &[f64]) {
    for ((d, s), &x) in dst.iter_mut().zip(src).zip(mask_from) {
        if x > 0.0 {
            *d += s;
        }
    }
}

fn channel_sum(dst: &mut [f64], src: &[f64], channels: usize, inner: usize) {
    for (idx, s) in src.iter().enumerate() {
        dst[(idx / inner) % channels] += s;
    }
}

/// `out[n,m] += a[n,k] b[k,m]`
fn mm_acc(out: &mut [f64], a: &[f64], b: &[f64], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(&b[p * m..(p + 1) * m]) {
                *o += av * bv;
            }
        }
    }
}

/// `out[n,k] += a[n,m] b[k,m]^T`
fn mm_acc_nt(out: &mut [f64], a: &[f64], b: &[f64], n: usize, m: usize, k: usize) {
    for i in 0..n {
        let arow = &a[i * m..(i + 1) * m];
        for p in 0..k {
            let brow = &b[p * m..(p + 1) * m];
            out[i * k + p] += arow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `out[k,m] += a[n,k]^T b[n,m]`
fn mm_acc_tn(out: &mut [f64], a: &[f64], b: &[f64], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let brow = &b[i * m..(i + 1) * m];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in out[p * m..(p + 1) * m].iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

fn softmax_rows(z: &[f64], n: usize, classes: usize) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    for i in 0..n {
        let row = &z[i * classes..(i + 1) * classes];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (o, &v) in out[i * classes..].iter_mut().zip(row) {
            *o = (v - max).exp();
            total += *o;
        }
        out[i * classes..(i + 1) * classes].iter_mut().for_each(|o| *o /= total);
    }
    out
}

fn log_softmax_at(row: &[f64], y: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row[y] - lse
}

/// Row-wise softmax, exposed for prediction.
pub(crate) fn softmax(z: &[f64], n: usize, classes: usize) -> Vec<f64> {
    softmax_rows(z, n, classes)
}

#[derive(Clone, Copy)]
struct ConvDims {
    n: usize,
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
}

/// Iterates the valid (output, input) pixel pairs of a 3x3 same convolution
/// for kernel tap `(a, b)`.
#[inline]
fn tap_range(a: usize, len: usize) -> std::ops::Range<usize> {
    // output i reads input i + a - 1
    let lo = if a == 0 { 1 } else { 0 };
    let hi = if a == 2 { len - 1 } else { len };
    lo..hi
}

fn conv_fwd(y: &mut [f64], x: &[f64], k: &[f64], d: ConvDims) {
    let plane = d.h * d.w;
    for s in 0..d.n {
        for co in 0..d.cout {
            let yo = &mut y[(s * d.cout + co) * plane..(s * d.cout + co + 1) * plane];
            for ci in 0..d.cin {
                let xi = &x[(s * d.cin + ci) * plane..(s * d.cin + ci + 1) * plane];
                for a in 0..3 {
                    for b in 0..3 {
                        let kv = k[((co * d.cin + ci) * 3 + a) * 3 + b];
                        if kv == 0.0 {
                            continue;
                        }
                        for i in tap_range(a, d.h) {
                            let xr = (i + a - 1) * d.w;
                            for j in tap_range(b, d.w) {
                                yo[i * d.w + j] += kv * xi[xr + j + b - 1];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn conv_bwd_input(gx: &mut [f64], gy: &[f64], k: &[f64], d: ConvDims) {
    let plane = d.h * d.w;
    for s in 0..d.n {
        for co in 0..d.cout {
            let go = &gy[(s * d.cout + co) * plane..(s * d.cout + co + 1) * plane];
            for ci in 0..d.cin {
                let gi = &mut gx[(s * d.cin + ci) * plane..(s * d.cin + ci + 1) * plane];
                for a in 0..3 {
                    for b in 0..3 {
                        let kv = k[((co * d.cin + ci) * 3 + a) * 3 + b];
                        if kv == 0.0 {
                            continue;
                        }
                        for i in tap_range(a, d.h) {
                            let xr = (i + a - 1) * d.w;
                            for j in tap_range(b, d.w) {
                                gi[xr + j + b - 1] += kv * go[i * d.w + j];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn conv_bwd_kernel(gk: &mut [f64], x: &[f64], gy: &[f64], d: ConvDims) {
    let plane = d.h * d.w;
    for s in 0..d.n {
        for co in 0..d.cout {
            let go = &gy[(s * d.cout + co) * plane..(s * d.cout + co + 1) * plane];
            for ci in 0..d.cin {
                let xi = &x[(s * d.cin + ci) * plane..(s * d.cin + ci + 1) * plane];
                for a in 0..3 {
                    for b in 0..3 {
                        let mut total = 0.0;
                        for i in tap_range(a, d.h) {
                            let xr = (i + a - 1) * d.w;
                            for j in tap_range(b, d.w) {
                                total += go[i * d.w + j] * xi[xr + j + b - 1];
                            }
                        }
                        gk[((co * d.cin + ci) * 3 + a) * 3 + b] += total;
                    }
                }
            }
        }
    }
}
