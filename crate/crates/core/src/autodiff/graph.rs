use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug)]
struct LstmCache {
    /// Activated gates per step, `[T, 4H]` in i, f, g, o order.
    gates: Vec<f64>,
    /// Cell states `c_0..c_T`, `[(T+1), H]`.
    cells: Vec<f64>,
    /// Hidden states `h_0..h_T`, `[(T+1), H]`.
    hidden: Vec<f64>,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv1d { x: Var, k: Var, b: Var },
    MaxPool { x: Var, argmax: Vec<usize> },
    Dropout { x: Var, mask: Vec<f64> },
    Lstm { x: Var, w: Var, u: Var, b: Var, cache: LstmCache },
    Dense { x: Var, w: Var, b: Var, relu: bool },
    Concat { parts: Vec<Var> },
    Stack { rows: Vec<Var> },
    SoftmaxXent { logits: Var, probs: Vec<f64>, targets: Vec<f64>, n: usize },
    SumSquares { params: Vec<Var>, lambda: f64 },
    Add { a: Var, b: Var },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Op,
}

/// Non-smooth branch decisions taken during a forward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct BranchSignature {
    pub relu_inputs: Vec<f64>,
    pub argmax: Vec<usize>,
}

/// Tape of operations; nodes are stored in creation order.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    signature: BranchSignature,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of one logit row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node { value, grad: None, requires_grad, op });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Adds a leaf; gradients are tracked iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let rg = t.requires_grad();
        self.push(t, rg, Op::Leaf)
    }

    pub fn param(&mut self, t: Tensor) -> Var {
        self.leaf(t.with_requires_grad(true))
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.leaf(t.with_requires_grad(false))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last [`Graph::backward`] target with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    /// Copy of the node value with its gradient attached.
    pub fn tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        let mut t = n.value.clone().with_requires_grad(n.requires_grad);
        t.set_grad(n.grad.clone());
        t
    }

    pub(crate) fn signature(&self) -> &BranchSignature {
        &self.signature
    }

    fn dims2(&self, v: Var, what: &str) -> Result<(usize, usize)> {
        match *self.shape(v) {
            [a, b] => Ok((a, b)),
            ref s => Err(Error::Shape(format!("{what} must be 2-D, got {s:?}"))),
        }
    }

    /// Valid 1-D convolution over the time axis.
    /// `x: [T, F_in]`, `k: [K, F_in, F_out]`, `b: [F_out]` → `[T−K+1, F_out]`.
    pub fn conv1d(&mut self, x: Var, k: Var, b: Var) -> Result<Var> {
        let (t, fin) = self.dims2(x, "conv1d input")?;
        let (kk, kin, fout) = match *self.shape(k) {
            [a, b, c] => (a, b, c),
            ref s => return Err(Error::Shape(format!("conv1d kernel must be 3-D, got {s:?}"))),
        };
        if kin != fin || self.shape(b) != [fout] {
            return Err(Error::Shape(format!(
                "conv1d kernel {:?} / bias {:?} incompatible with input {:?}",
                self.shape(k),
                self.shape(b),
                self.shape(x)
            )));
        }
        if kk == 0 || t < kk {
            return Err(Error::Shape(format!("conv1d needs T ≥ K ≥ 1, got T={t}, K={kk}")));
        }
        let tout = t - kk + 1;
        let (xd, kd, bd) = (self.value(x).data(), self.value(k).data(), self.value(b).data());
        let mut out = Vec::with_capacity(tout * fout);
        for _ in 0..tout {
            out.extend_from_slice(bd);
        }
        for to in 0..tout {
            let row = &mut out[to * fout..(to + 1) * fout];
            for j in 0..kk {
                let xr = &xd[(to + j) * fin..(to + j + 1) * fin];
                let kj = &kd[j * fin * fout..(j + 1) * fin * fout];
                for (i, &xv) in xr.iter().enumerate() {
                    if xv == 0.0 {
                        continue;
                    }
                    for (o, &kv) in row.iter_mut().zip(&kj[i * fout..(i + 1) * fout]) {
                        *o += xv * kv;
                    }
                }
            }
        }
        let rg = self.needs(&[x, k, b]);
        Ok(self.push(Tensor::new(vec![tout, fout], out)?, rg, Op::Conv1d { x, k, b }))
    }

    /// Non-overlapping max over `pool` frames; trailing frames are dropped.
    /// Ties route to the first index.
    pub fn maxpool1d(&mut self, x: Var, pool: usize) -> Result<Var> {
        let (t, f) = self.dims2(x, "maxpool1d input")?;
        if pool == 0 || pool > t {
            return Err(Error::Shape(format!("pool {pool} invalid for {t} frames")));
        }
        let tout = t / pool;
        let xd = self.value(x).data();
        let mut out = Vec::with_capacity(tout * f);
        let mut argmax = Vec::with_capacity(tout * f);
        for to in 0..tout {
            for c in 0..f {
                let mut best = to * pool * f + c;
                for p in 1..pool {
                    let idx = (to * pool + p) * f + c;
                    if xd[idx] > xd[best] {
                        best = idx;
                    }
                }
                out.push(xd[best]);
                argmax.push(best);
            }
        }
        self.signature.argmax.extend_from_slice(&argmax);
        let rg = self.needs(&[x]);
        Ok(self.push(Tensor::new(vec![tout, f], out)?, rg, Op::MaxPool { x, argmax }))
    }

    /// Inverted dropout. Eval mode and `rate == 0` return `x` itself.
    pub fn dropout(&mut self, x: Var, rate: f64, mode: Mode, rng: &mut impl Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} must lie in [0, 1)")));
        }
        if mode == Mode::Eval || rate == 0.0 {
            return Ok(x);
        }
        let scale = 1.0 / (1.0 - rate);
        let n = self.value(x).len();
        let mask: Vec<f64> = (0..n).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { scale }).collect();
        let out: Vec<f64> = self.value(x).data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.needs(&[x]);
        Ok(self.push(Tensor::new(shape, out)?, rg, Op::Dropout { x, mask }))
    }

    /// Single-layer LSTM from zero state, returning the final hidden state.
    /// `x: [T, F]`, `w: [F, 4H]`, `u: [H, 4H]`, `b: [4H]`, gate blocks i, f, g, o.
    pub fn lstm(&mut self, x: Var, w: Var, u: Var, b: Var) -> Result<Var> {
        let (t, f) = self.dims2(x, "lstm input")?;
        let (wf, h4) = self.dims2(w, "lstm W")?;
        let (uh, uh4) = self.dims2(u, "lstm U")?;
        if t == 0 || wf != f || h4 % 4 != 0 || uh * 4 != h4 || uh4 != h4 || self.shape(b) != [h4] {
            return Err(Error::Shape(format!(
                "lstm shapes x {:?}, W {:?}, U {:?}, b {:?} are inconsistent",
                self.shape(x),
                self.shape(w),
                self.shape(u),
                self.shape(b)
            )));
        }
        let h = uh;
        let (xd, wd, ud, bd) = (self.value(x).data(), self.value(w).data(), self.value(u).data(), self.value(b).data());
        let mut gates = vec![0.0; t * h4];
        let mut cells = vec![0.0; (t + 1) * h];
        let mut hidden = vec![0.0; (t + 1) * h];
        let mut z = vec![0.0; h4];
        for s in 0..t {
            z.copy_from_slice(bd);
            for (a, &xv) in xd[s * f..(s + 1) * f].iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                for (zj, &wv) in z.iter_mut().zip(&wd[a * h4..(a + 1) * h4]) {
                    *zj += xv * wv;
                }
            }
            for k in 0..h {
                let hv = hidden[s * h + k];
                if hv == 0.0 {
                    continue;
                }
                for (zj, &uv) in z.iter_mut().zip(&ud[k * h4..(k + 1) * h4]) {
                    *zj += hv * uv;
                }
            }
            let g = &mut gates[s * h4..(s + 1) * h4];
            for k in 0..h {
                let gi = sigmoid(z[k]);
                let gf = sigmoid(z[h + k]);
                let gg = z[2 * h + k].tanh();
                let go = sigmoid(z[3 * h + k]);
                g[k] = gi;
                g[h + k] = gf;
                g[2 * h + k] = gg;
                g[3 * h + k] = go;
                let c = gf * cells[s * h + k] + gi * gg;
                cells[(s + 1) * h + k] = c;
                hidden[(s + 1) * h + k] = go * c.tanh();
            }
        }
        let out = hidden[t * h..].to_vec();
        let rg = self.needs(&[x, w, u, b]);
        Ok(self.push(Tensor::vector(out), rg, Op::Lstm { x, w, u, b, cache: LstmCache { gates, cells, hidden } }))
    }

    /// `act(x·W + b)`. `x` is `[F]` or `[N, F]`, `W: [F, G]`, `b: [G]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var, relu: bool) -> Result<Var> {
        let (f, g) = self.dims2(w, "dense W")?;
        let xs = self.shape(x).to_vec();
        let rows = match xs[..] {
            [xf] if xf == f => 1,
            [n, xf] if xf == f => n,
            _ => return Err(Error::Shape(format!("dense input {xs:?} incompatible with W [{f}, {g}]"))),
        };
        if self.shape(b) != [g] {
            return Err(Error::Shape(format!("dense bias {:?} must be [{g}]", self.shape(b))));
        }
        let (xd, wd, bd) = (self.value(x).data(), self.value(w).data(), self.value(b).data());
        let mut out = Vec::with_capacity(rows * g);
        for r in 0..rows {
            let mut acc = bd.to_vec();
            for (a, &xv) in xd[r * f..(r + 1) * f].iter().enumerate() {
                for (o, &wv) in acc.iter_mut().zip(&wd[a * g..(a + 1) * g]) {
                    *o += xv * wv;
                }
            }
            out.extend(acc);
        }
        if relu {
            self.signature.relu_inputs.extend_from_slice(&out);
            for v in out.iter_mut() {
                *v = v.max(0.0);
            }
        }
        let shape = if xs.len() == 1 { vec![g] } else { vec![rows, g] };
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(Tensor::new(shape, out)?, rg, Op::Dense { x, w, b, relu }))
    }

    /// Concatenates flattened inputs into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let out: Vec<f64> = parts.iter().flat_map(|p| self.value(*p).data().iter().copied()).collect();
        let rg = self.needs(parts);
        self.push(Tensor::vector(out), rg, Op::Concat { parts: parts.to_vec() })
    }

    /// Stacks equal-length vectors as rows of a `[N, L]` matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let l = rows.first().map_or(0, |r| self.value(*r).len());
        if rows.is_empty() || rows.iter().any(|r| self.value(*r).len() != l) {
            return Err(Error::Shape("stack needs a non-empty list of equal-length rows".into()));
        }
        let out: Vec<f64> = rows.iter().flat_map(|r| self.value(*r).data().iter().copied()).collect();
        let rg = self.needs(rows);
        Ok(self.push(Tensor::new(vec![rows.len(), l], out)?, rg, Op::Stack { rows: rows.to_vec() }))
    }

    /// Mean categorical cross-entropy of `softmax(logits)` against one-hot
    /// `targets`, via log-sum-exp. `logits, targets: [N, C]`.
    pub fn softmax_xent(&mut self, logits: Var, targets: &Tensor) -> Result<Var> {
        let (n, c) = self.dims2(logits, "logits")?;
        if targets.shape() != [n, c] {
            return Err(Error::Target(format!("targets {:?} do not match logits [{n}, {c}]", targets.shape())));
        }
        let td = targets.data();
        for r in 0..n {
            let row = &td[r * c..(r + 1) * c];
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || zeros != c - 1 {
                return Err(Error::Target(format!("target row {r} is not one-hot: {row:?}")));
            }
        }
        let ld = self.value(logits).data();
        let mut probs = Vec::with_capacity(n * c);
        let mut total = 0.0;
        for r in 0..n {
            let z = &ld[r * c..(r + 1) * c];
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            let target = td[r * c..(r + 1) * c].iter().position(|&v| v == 1.0).unwrap();
            total += lse - z[target];
            probs.extend(z.iter().map(|v| (v - lse).exp()));
        }
        let rg = self.needs(&[logits]);
        Ok(self.push(
            Tensor::scalar(total / n as f64),
            rg,
            Op::SoftmaxXent { logits, probs, targets: td.to_vec(), n },
        ))
    }

    /// `λ·Σ‖p‖²` over `params`.
    pub fn l2_penalty(&mut self, params: &[Var], lambda: f64) -> Result<Var> {
        if !(lambda >= 0.0) {
            return Err(Error::Config(format!("L2 coefficient {lambda} must be non-negative")));
        }
        let s: f64 = params.iter().map(|p| self.value(*p).sum_squares()).sum();
        let rg = self.needs(params);
        Ok(self.push(Tensor::scalar(lambda * s), rg, Op::SumSquares { params: params.to_vec(), lambda }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!("add of {:?} and {:?}", self.shape(a), self.shape(b))));
        }
        let out: Vec<f64> = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x + y).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::new(shape, out)?, rg, Op::Add { a, b }))
    }

    /// Reverse pass from a single-element `target`. Previous gradients are
    /// discarded; forward values are left untouched.
    pub fn backward(&mut self, target: Var) -> Result<()> {
        if self.value(target).len() != 1 {
            return Err(Error::Shape(format!("backward target must be scalar, got {:?}", self.shape(target))));
        }
        for node in &mut self.nodes {
            node.grad = node.requires_grad.then(|| vec![0.0; node.value.len()]);
        }
        if !self.nodes[target.0].requires_grad {
            return Ok(());
        }
        self.nodes[target.0].grad.as_mut().unwrap()[0] = 1.0;

        for i in (0..=target.0).rev() {
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &rest[0];
            let Some(gout) = node.grad.as_deref() else { continue };
            if gout.iter().all(|&g| g == 0.0) {
                continue;
            }
            backward_node(node, gout, before);
        }
        Ok(())
    }
}

/// Accumulates into `nodes[v]`'s gradient when it is tracked.
fn grad_of(nodes: &mut [Node], v: Var) -> Option<&mut Vec<f64>> {
    nodes[v.0].grad.as_mut()
}

fn backward_node(node: &Node, gout: &[f64], nodes: &mut [Node]) {
    match &node.op {
        Op::Leaf => {}
        Op::Add { a, b } => {
            for v in [*a, *b] {
                if let Some(g) = grad_of(nodes, v) {
                    g.iter_mut().zip(gout).for_each(|(d, s)| *d += s);
                }
            }
        }
        Op::Concat { parts } => {
            let mut off = 0;
            for p in parts {
                let n = nodes[p.0].value.len();
                if let Some(g) = grad_of(nodes, *p) {
                    g.iter_mut().zip(&gout[off..off + n]).for_each(|(d, s)| *d += s);
                }
                off += n;
            }
        }
        Op::Stack { rows } => {
            let l = gout.len() / rows.len();
            for (r, v) in rows.iter().enumerate() {
                if let Some(g) = grad_of(nodes, *v) {
                    g.iter_mut().zip(&gout[r * l..(r + 1) * l]).for_each(|(d, s)| *d += s);
                }
            }
        }
        Op::Dropout { x, mask } => {
            if let Some(g) = grad_of(nodes, *x) {
                for ((d, s), m) in g.iter_mut().zip(gout).zip(mask) {
                    *d += s * m;
                }
            }
        }
        Op::MaxPool { x, argmax } => {
            if let Some(g) = grad_of(nodes, *x) {
                for (&idx, s) in argmax.iter().zip(gout) {
                    g[idx] += s;
                }
            }
        }
        Op::SumSquares { params, lambda } => {
            let s = gout[0];
            for p in params {
                let vals = nodes[p.0].value.data().to_vec();
                if let Some(g) = grad_of(nodes, *p) {
                    for (d, v) in g.iter_mut().zip(vals) {
                        *d += 2.0 * lambda * v * s;
                    }
                }
            }
        }
        Op::SoftmaxXent { logits, probs, targets, n } => {
            let scale = gout[0] / *n as f64;
            if let Some(g) = grad_of(nodes, *logits) {
                for ((d, p), y) in g.iter_mut().zip(probs).zip(targets) {
                    *d += (p - y) * scale;
                }
            }
        }
        Op::Dense { x, w, b, relu } => {
            let g_pre: Vec<f64> = if *relu {
                gout.iter().zip(node.value.data()).map(|(s, out)| if *out > 0.0 { *s } else { 0.0 }).collect()
            } else {
                gout.to_vec()
            };
            let wshape = nodes[w.0].value.shape().to_vec();
            let (f, gcols) = (wshape[0], wshape[1]);
            let rows = g_pre.len() / gcols;
            if let Some(gb) = grad_of(nodes, *b) {
                for r in 0..rows {
                    gb.iter_mut().zip(&g_pre[r * gcols..(r + 1) * gcols]).for_each(|(d, s)| *d += s);
                }
            }
            if nodes[w.0].requires_grad {
                let xd = nodes[x.0].value.data().to_vec();
                let gw = grad_of(nodes, *w).unwrap();
                for r in 0..rows {
                    let gr = &g_pre[r * gcols..(r + 1) * gcols];
                    for a in 0..f {
                        let xv = xd[r * f + a];
                        if xv == 0.0 {
                            continue;
                        }
                        for (d, s) in gw[a * gcols..(a + 1) * gcols].iter_mut().zip(gr) {
                            *d += xv * s;
                        }
                    }
                }
            }
            if nodes[x.0].requires_grad {
                let wd = nodes[w.0].value.data().to_vec();
                let gx = grad_of(nodes, *x).unwrap();
                for r in 0..rows {
                    let gr = &g_pre[r * gcols..(r + 1) * gcols];
                    for a in 0..f {
                        gx[r * f + a] += wd[a * gcols..(a + 1) * gcols].iter().zip(gr).map(|(wv, s)| wv * s).sum::<f64>();
                    }
                }
            }
        }
        Op::Conv1d { x, k, b } => {
            let (t, fin) = {
                let s = nodes[x.0].value.shape();
                (s[0], s[1])
            };
            let (kk, fout) = {
                let s = nodes[k.0].value.shape();
                (s[0], s[2])
            };
            let tout = t - kk + 1;
            if let Some(gb) = grad_of(nodes, *b) {
                for to in 0..tout {
                    gb.iter_mut().zip(&gout[to * fout..(to + 1) * fout]).for_each(|(d, s)| *d += s);
                }
            }
            if nodes[k.0].requires_grad {
                let xd = nodes[x.0].value.data().to_vec();
                let gk = grad_of(nodes, *k).unwrap();
                for to in 0..tout {
                    let gr = &gout[to * fout..(to + 1) * fout];
                    for j in 0..kk {
                        for i in 0..fin {
                            let xv = xd[(to + j) * fin + i];
                            if xv == 0.0 {
                                continue;
                            }
                            let base = (j * fin + i) * fout;
                            for (d, s) in gk[base..base + fout].iter_mut().zip(gr) {
                                *d += xv * s;
                            }
                        }
                    }
                }
            }
            if nodes[x.0].requires_grad {
                let kd = nodes[k.0].value.data().to_vec();
                let gx = grad_of(nodes, *x).unwrap();
                for to in 0..tout {
                    let gr = &gout[to * fout..(to + 1) * fout];
                    for j in 0..kk {
                        for i in 0..fin {
                            let base = (j * fin + i) * fout;
                            gx[(to + j) * fin + i] += kd[base..base + fout].iter().zip(gr).map(|(kv, s)| kv * s).sum::<f64>();
                        }
                    }
                }
            }
        }
        Op::Lstm { x, w, u, b, cache } => lstm_backward(nodes, gout, *x, *w, *u, *b, cache),
    }
}

/// Backpropagation through time for [`Graph::lstm`].
fn lstm_backward(nodes: &mut [Node], gout: &[f64], x: Var, w: Var, u: Var, b: Var, cache: &LstmCache) {
    let (t, f) = {
        let s = nodes[x.0].value.shape();
        (s[0], s[1])
    };
    let h4 = nodes[b.0].value.len();
    let h = h4 / 4;
    let xd = nodes[x.0].value.data().to_vec();
    let wd = nodes[w.0].value.data().to_vec();
    let ud = nodes[u.0].value.data().to_vec();
    let (need_x, need_w, need_u, need_b) =
        (nodes[x.0].requires_grad, nodes[w.0].requires_grad, nodes[u.0].requires_grad, nodes[b.0].requires_grad);

    let mut gx = vec![0.0; if need_x { t * f } else { 0 }];
    let mut gw = vec![0.0; if need_w { f * h4 } else { 0 }];
    let mut gu = vec![0.0; if need_u { h * h4 } else { 0 }];
    let mut gb = vec![0.0; if need_b { h4 } else { 0 }];

    let mut dh = gout.to_vec();
    let mut dc = vec![0.0; h];
    let mut dz = vec![0.0; h4];
    for s in (0..t).rev() {
        let g = &cache.gates[s * h4..(s + 1) * h4];
        for k in 0..h {
            let (gi, gf, gg, go) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let c_prev = cache.cells[s * h + k];
            let tc = cache.cells[(s + 1) * h + k].tanh();
            let d_o = dh[k] * tc;
            let dck = dc[k] + dh[k] * go * (1.0 - tc * tc);
            dz[k] = dck * gg * gi * (1.0 - gi);
            dz[h + k] = dck * c_prev * gf * (1.0 - gf);
            dz[2 * h + k] = dck * gi * (1.0 - gg * gg);
            dz[3 * h + k] = d_o * go * (1.0 - go);
            dc[k] = dck * gf;
        }
        if need_b {
            gb.iter_mut().zip(&dz).for_each(|(d, v)| *d += v);
        }
        let xs = &xd[s * f..(s + 1) * f];
        if need_w {
            for (a, &xv) in xs.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                for (d, v) in gw[a * h4..(a + 1) * h4].iter_mut().zip(&dz) {
                    *d += xv * v;
                }
            }
        }
        if need_x {
            for a in 0..f {
                gx[s * f + a] = wd[a * h4..(a + 1) * h4].iter().zip(&dz).map(|(wv, v)| wv * v).sum();
            }
        }
        let h_prev = &cache.hidden[s * h..(s + 1) * h];
        if need_u {
            for (k, &hv) in h_prev.iter().enumerate() {
                if hv == 0.0 {
                    continue;
                }
                for (d, v) in gu[k * h4..(k + 1) * h4].iter_mut().zip(&dz) {
                    *d += hv * v;
                }
            }
        }
        for k in 0..h {
            dh[k] = ud[k * h4..(k + 1) * h4].iter().zip(&dz).map(|(uv, v)| uv * v).sum();
        }
    }
    for (v, acc) in [(x, gx), (w, gw), (u, gu), (b, gb)] {
        if let Some(g) = grad_of(nodes, v) {
            g.iter_mut().zip(acc).for_each(|(d, s)| *d += s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        Tensor::new(shape, data).unwrap()
    }

    #[test]
    fn conv1d_small_cases() {
        let mut g = Graph::new();
        let x = g.input(t(vec![3, 1], vec![1.0, 2.0, 3.0]));
        let k1 = g.input(t(vec![1, 1, 1], vec![1.0]));
        let k2 = g.input(t(vec![2, 1, 1], vec![1.0, 1.0]));
        let b = g.input(t(vec![1], vec![0.0]));
        let y = g.conv1d(x, k1, b).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0]);
        let y = g.conv1d(x, k2, b).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 5.0]);
        let k4 = g.input(t(vec![4, 1, 1], vec![1.0; 4]));
        assert!(matches!(g.conv1d(x, k4, b), Err(Error::Shape(_))));
    }

    #[test]
    fn maxpool_cases() {
        let mut g = Graph::new();
        let x = g.param(t(vec![4, 1], vec![1.0, 3.0, 2.0, 5.0]));
        let y = g.maxpool1d(x, 2).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 5.0]);
        let y1 = g.maxpool1d(x, 1).unwrap();
        assert_eq!(g.value(y1).data(), g.value(x).data());
        assert!(g.maxpool1d(x, 5).is_err());

        let mut g = Graph::new();
        let x = g.param(t(vec![2, 1], vec![2.0, 2.0]));
        let y = g.maxpool1d(x, 2).unwrap();
        let w = g.input(t(vec![1, 1], vec![1.0]));
        let b = g.input(t(vec![1], vec![0.0]));
        let z = g.dense(y, w, b, false).unwrap();
        let s = g.l2_penalty(&[z], 0.5).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[2.0, 0.0]);
    }

    #[test]
    fn dropout_modes() {
        let mut rng = crate::rng::seeded(4);
        let mut g = Graph::new();
        let x = g.input(Tensor::vector(vec![1.5; 10]));
        assert_eq!(g.dropout(x, 0.5, Mode::Eval, &mut rng).unwrap(), x);
        assert_eq!(g.dropout(x, 0.0, Mode::Train, &mut rng).unwrap(), x);
        assert!(matches!(g.dropout(x, 1.0, Mode::Train, &mut rng), Err(Error::Config(_))));

        let ones = g.input(Tensor::vector(vec![1.0; 100_000]));
        let y = g.dropout(ones, 0.5, Mode::Train, &mut rng).unwrap();
        let mean = g.value(y).data().iter().sum::<f64>() / 100_000.0;
        assert!((0.99..=1.01).contains(&mean), "{mean}");
        assert!(g.value(y).data().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn zero_lstm_gives_zero() {
        let mut g = Graph::new();
        let x = g.input(t(vec![4, 3], vec![0.7; 12]));
        let w = g.input(Tensor::zeros(vec![3, 8]));
        let u = g.input(Tensor::zeros(vec![2, 8]));
        let b = g.input(Tensor::zeros(vec![8]));
        let h = g.lstm(x, w, u, b).unwrap();
        assert_eq!(g.value(h).data(), &[0.0, 0.0]);
    }

    #[test]
    fn lstm_cell_accumulates_with_open_forget_gate() {
        // One unit, input gate and candidate driven by the input, forget bias +10.
        let cell_after = |steps: usize| {
            let mut g = Graph::new();
            let x = g.input(t(vec![steps, 1], vec![1.0; steps]));
            let w = g.input(t(vec![1, 4], vec![1.0, 0.0, 1.0, 1.0]));
            let u = g.input(Tensor::zeros(vec![1, 4]));
            let b = g.input(t(vec![4], vec![0.0, 10.0, 0.0, 0.0]));
            let h = g.lstm(x, w, u, b).unwrap();
            let o = 1.0 / (1.0 + (-1.0f64).exp());
            // h = o·tanh(c) ⇒ c = atanh(h/o)
            (g.value(h).data()[0] / o).atanh()
        };
        assert!(cell_after(5).abs() > cell_after(1).abs());
    }

    #[test]
    fn dense_relu_and_identity() {
        let mut g = Graph::new();
        let x = g.input(Tensor::vector(vec![-1.0, 0.0, 2.0]));
        let eye = g.input(t(vec![3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]));
        let b = g.input(Tensor::zeros(vec![3]));
        let r = g.dense(x, eye, b, true).unwrap();
        assert_eq!(g.value(r).data(), &[0.0, 0.0, 2.0]);
        let id = g.dense(x, eye, b, false).unwrap();
        assert_eq!(g.value(id).data(), &[-1.0, 0.0, 2.0]);
    }

    #[test]
    fn xent_values() {
        let mut g = Graph::new();
        let z = g.param(Tensor::new(vec![1, 6], vec![0.3; 6]).unwrap());
        let mut y = vec![0.0; 6];
        y[2] = 1.0;
        let targets = t(vec![1, 6], y.clone());
        let l = g.softmax_xent(z, &targets).unwrap();
        assert!((g.value(l).item() - 6f64.ln()).abs() < 1e-12);

        let mut big = vec![0.0; 6];
        big[0] = 1000.0;
        let z = g.param(t(vec![1, 6], big));
        let mut y0 = vec![0.0; 6];
        y0[0] = 1.0;
        let l = g.softmax_xent(z, &t(vec![1, 6], y0)).unwrap();
        assert!(g.value(l).item().abs() < 1e-12);
        assert!(g.value(l).item().is_finite());

        let bad = t(vec![1, 6], vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(g.softmax_xent(z, &bad), Err(Error::Target(_))));
    }

    #[test]
    fn l2_values() {
        let mut g = Graph::new();
        let w = g.param(Tensor::vector(vec![3.0, 4.0]));
        let p = g.l2_penalty(&[w], 0.5).unwrap();
        assert_eq!(g.value(p).item(), 12.5);
        let z = g.l2_penalty(&[w], 0.0).unwrap();
        assert_eq!(g.value(z).item(), 0.0);
        g.backward(p).unwrap();
        assert_eq!(g.grad(w).unwrap(), &[3.0, 4.0]);
    }

    #[test]
    fn softmax_is_a_distribution() {
        let p = softmax(&[1.0, -2.0, 0.5, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
