//! Minimal eager reverse-mode automatic differentiation.
//!
//! Every operator computes its value immediately and records itself on a
//! [`Tape`]. [`Tape::grad`] builds the backward pass out of the same
//! operators, so gradients are themselves differentiable; this is what
//! training through an input gradient needs.

pub mod kernels;
mod tensor;

pub use tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    Conv { x: Var, w: Var },
    ConvTranspose { g: Var, w: Var },
    ConvWeightGrad { x: Var, g: Var },
    AddBias { x: Var, b: Var },
    ChannelSum { x: Var },
    BroadcastChannels { b: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Softplus { x: Var, order: usize },
    Unshuffle(Var),
    Shuffle(Var),
    Concat(Var, Var),
    Slice { x: Var, start: usize },
    Embed { x: Var, start: usize },
    Sum(Var),
    Broadcast(Var),
}

impl Op {
    fn parents(&self) -> [Option<Var>; 2] {
        use Op::*;
        match *self {
            Leaf => [None, None],
            Conv { x, w } => [Some(x), Some(w)],
            ConvTranspose { g, w } => [Some(g), Some(w)],
            ConvWeightGrad { x, g, .. } => [Some(x), Some(g)],
            AddBias { x, b } => [Some(x), Some(b)],
            Add(a, b) | Sub(a, b) | Mul(a, b) | Concat(a, b) => [Some(a), Some(b)],
            ChannelSum { x }
            | BroadcastChannels { b: x }
            | Scale(x, _)
            | Softplus { x, .. }
            | Unshuffle(x)
            | Shuffle(x)
            | Slice { x, .. }
            | Embed { x, .. }
            | Sum(x)
            | Broadcast(x) => [Some(x), None],
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only computation record.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 4] {
        self.nodes[v.0].value.shape()
    }

    /// Records an input. Whether it is differentiated is decided by [`Tape::grad`].
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn conv2d(&mut self, x: Var, w: Var) -> Var {
        let v = kernels::conv2d(self.value(x), self.value(w));
        self.push(v, Op::Conv { x, w })
    }

    pub fn conv2d_transpose(&mut self, g: Var, w: Var) -> Var {
        let v = kernels::conv2d_transpose(self.value(g), self.value(w));
        self.push(v, Op::ConvTranspose { g, w })
    }

    pub fn conv2d_weight_grad(&mut self, x: Var, g: Var, k: usize) -> Var {
        let v = kernels::conv2d_weight_grad(self.value(x), self.value(g), k);
        self.push(v, Op::ConvWeightGrad { x, g })
    }

    pub fn add_bias(&mut self, x: Var, b: Var) -> Var {
        let v = kernels::add_bias(self.value(x), self.value(b));
        self.push(v, Op::AddBias { x, b })
    }

    pub fn channel_sum(&mut self, x: Var) -> Var {
        let v = kernels::channel_sum(self.value(x));
        self.push(v, Op::ChannelSum { x })
    }

    pub fn broadcast_channels(&mut self, b: Var, shape: [usize; 4]) -> Var {
        let v = kernels::broadcast_channels(self.value(b), shape);
        self.push(v, Op::BroadcastChannels { b })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |p, q| p + q);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |p, q| p - q);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |p, q| p * q);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|p| c * p);
        self.push(v, Op::Scale(a, c))
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        self.softplus_derivative(x, 0)
    }

    /// Elementwise `order`-th derivative of softplus.
    pub fn softplus_derivative(&mut self, x: Var, order: usize) -> Var {
        let v = self.value(x).map(|t| kernels::softplus_derivative(t, order));
        self.push(v, Op::Softplus { x, order })
    }

    pub fn pixel_unshuffle(&mut self, x: Var) -> Var {
        let v = kernels::pixel_unshuffle(self.value(x));
        self.push(v, Op::Unshuffle(x))
    }

    pub fn pixel_shuffle(&mut self, x: Var) -> Var {
        let v = kernels::pixel_shuffle(self.value(x));
        self.push(v, Op::Shuffle(x))
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Var {
        let v = kernels::concat_channels(self.value(a), self.value(b));
        self.push(v, Op::Concat(a, b))
    }

    pub fn slice_channels(&mut self, x: Var, start: usize, len: usize) -> Var {
        let v = kernels::slice_channels(self.value(x), start, len);
        self.push(v, Op::Slice { x, start })
    }

    pub fn embed_channels(&mut self, x: Var, start: usize, total: usize) -> Var {
        let v = kernels::embed_channels(self.value(x), start, total);
        self.push(v, Op::Embed { x, start })
    }

    /// Sum of all entries, as a `[1, 1, 1, 1]` tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let v = Tensor::scalar(self.value(x).sum());
        self.push(v, Op::Sum(x))
    }

    /// Repeats a scalar node over `shape`.
    pub fn broadcast(&mut self, s: Var, shape: [usize; 4]) -> Var {
        let v = Tensor::full(shape, self.value(s).item());
        self.push(v, Op::Broadcast(s))
    }

    /// Gradients of the scalar `output` with respect to each of `wrt`.
    ///
    /// The returned nodes live on the same tape and can be differentiated again.
    pub fn grad(&mut self, output: Var, wrt: &[Var]) -> Vec<Var> {
        assert_eq!(self.value(output).len(), 1, "grad needs a scalar output");
        let n = output.0 + 1;
        let mut depends = vec![false; n];
        for w in wrt {
            if w.0 < n {
                depends[w.0] = true;
            }
        }
        for i in 0..n {
            if !depends[i] {
                depends[i] = self.nodes[i].op.parents().iter().flatten().any(|p| depends[p.0]);
            }
        }

        let mut adj: Vec<Option<Var>> = vec![None; n];
        if depends[output.0] {
            adj[output.0] = Some(self.leaf(Tensor::scalar(1.0)));
        }
        for i in (0..n).rev() {
            let Some(g) = adj[i] else { continue };
            let op = self.nodes[i].op;
            for (parent, contrib) in self.backward(op, i, g, &depends) {
                adj[parent.0] = Some(match adj[parent.0] {
                    Some(acc) => self.add(acc, contrib),
                    None => contrib,
                });
            }
        }

        wrt.iter()
            .map(|w| match adj.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let shape = self.shape(*w);
                    self.leaf(Tensor::zeros(shape))
                }
            })
            .collect()
    }

    fn backward(&mut self, op: Op, node: usize, g: Var, depends: &[bool]) -> Vec<(Var, Var)> {
        use Op::*;
        let need = |v: Var| depends[v.0];
        let mut out = Vec::with_capacity(2);
        match op {
            Leaf => {}
            Conv { x, w } => {
                if need(x) {
                    out.push((x, self.conv2d_transpose(g, w)));
                }
                if need(w) {
                    let k = self.shape(w)[2];
                    out.push((w, self.conv2d_weight_grad(x, g, k)));
                }
            }
            ConvTranspose { g: g0, w } => {
                if need(g0) {
                    out.push((g0, self.conv2d(g, w)));
                }
                if need(w) {
                    let k = self.shape(w)[2];
                    out.push((w, self.conv2d_weight_grad(g, g0, k)));
                }
            }
            ConvWeightGrad { x, g: g0, .. } => {
                if need(x) {
                    out.push((x, self.conv2d_transpose(g0, g)));
                }
                if need(g0) {
                    out.push((g0, self.conv2d(x, g)));
                }
            }
            AddBias { x, b } => {
                if need(x) {
                    out.push((x, g));
                }
                if need(b) {
                    out.push((b, self.channel_sum(g)));
                }
            }
            ChannelSum { x } => {
                let shape = self.shape(x);
                out.push((x, self.broadcast_channels(g, shape)));
            }
            BroadcastChannels { b } => out.push((b, self.channel_sum(g))),
            Add(a, b) => {
                if need(a) {
                    out.push((a, g));
                }
                if need(b) {
                    out.push((b, g));
                }
            }
            Sub(a, b) => {
                if need(a) {
                    out.push((a, g));
                }
                if need(b) {
                    out.push((b, self.scale(g, -1.0)));
                }
            }
            Mul(a, b) => {
                if need(a) {
                    out.push((a, self.mul(g, b)));
                }
                if need(b) {
                    out.push((b, self.mul(g, a)));
                }
            }
            Scale(a, c) => out.push((a, self.scale(g, c))),
            Softplus { x, order } => {
                let d = self.softplus_derivative(x, order + 1);
                out.push((x, self.mul(g, d)));
            }
            Unshuffle(x) => out.push((x, self.pixel_shuffle(g))),
            Shuffle(x) => out.push((x, self.pixel_unshuffle(g))),
            Concat(a, b) => {
                let ca = self.shape(a)[1];
                if need(a) {
                    out.push((a, self.slice_channels(g, 0, ca)));
                }
                if need(b) {
                    let cb = self.shape(b)[1];
                    out.push((b, self.slice_channels(g, ca, cb)));
                }
            }
            Slice { x, start, .. } => {
                let total = self.shape(x)[1];
                out.push((x, self.embed_channels(g, start, total)));
            }
            Embed { x, start, .. } => {
                let c = self.shape(x)[1];
                out.push((x, self.slice_channels(g, start, c)));
            }
            Sum(x) => {
                let shape = self.shape(x);
                out.push((x, self.broadcast(g, shape)));
            }
            Broadcast(s) => out.push((s, self.sum(g))),
        }
        debug_assert!(out.iter().all(|(p, c)| self.shape(*p) == self.shape(*c)), "node {node}");
        out.retain(|(p, _)| need(*p));
        out
    }
}
