//! Reverse-mode autodiff over a fixed set of eight operation kinds.
//!
//! Values are carried in `f64` internally and converted to [`Tensor`] at the
//! public boundary. Nodes may only reference earlier nodes, so node order is
//! a valid topological order and evaluation is a single forward sweep.

use std::collections::BTreeMap;
use std::fmt;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }

    pub(crate) fn from_index(i: usize) -> Self {
        NodeId(i)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Add,
    Multiply,
    /// `[m,k] x [k,n] -> [m,n]`, or `[m,k] x [k] -> [m]`.
    MatMul,
    Sigmoid,
    Relu,
    /// Mean of every element, producing shape `[1]`.
    Mean,
    /// `x * gamma + beta` with `gamma`, `beta` broadcast along the last axis of `x`.
    ScaleShift,
    /// Concatenation along the last axis.
    Concat,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OpKind::Add => "add",
            OpKind::Multiply => "multiply",
            OpKind::MatMul => "matmul",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Relu => "relu",
            OpKind::Mean => "mean",
            OpKind::ScaleShift => "scale_shift",
            OpKind::Concat => "concat",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { name: String },
    Op { kind: OpKind, inputs: Vec<NodeId> },
}

/// A dense `f64` buffer with its shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Value {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Value {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if dims.is_empty() || len != data.len() {
            return Err(Error::arg(format!(
                "value dims {dims:?} do not match {} elements",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::new(self.dims.clone(), self.data.iter().map(|&v| v as f32).collect())
    }
}

impl From<&Tensor> for Value {
    fn from(t: &Tensor) -> Self {
        Self {
            dims: t.dims().to_vec(),
            data: t.data().iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
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

    /// A leaf bound at evaluation time (data input or parameter).
    pub fn leaf(&mut self, name: impl Into<String>) -> NodeId {
        self.nodes.push(Node::Leaf { name: name.into() });
        NodeId(self.nodes.len() - 1)
    }

    pub fn op(&mut self, kind: OpKind, inputs: &[NodeId]) -> Result<NodeId> {
        let next = self.nodes.len();
        if let Some(bad) = inputs.iter().find(|id| id.0 >= next) {
            return Err(Error::arg(format!(
                "{kind} input {} does not precede node {next}",
                bad.0
            )));
        }
        let arity_ok = match kind {
            OpKind::Add | OpKind::Multiply | OpKind::MatMul => inputs.len() == 2,
            OpKind::Sigmoid | OpKind::Relu | OpKind::Mean => inputs.len() == 1,
            OpKind::ScaleShift => inputs.len() == 3,
            OpKind::Concat => !inputs.is_empty(),
        };
        if !arity_ok {
            return Err(Error::arg(format!("{kind} given {} inputs", inputs.len())));
        }
        self.nodes.push(Node::Op {
            kind,
            inputs: inputs.to_vec(),
        });
        Ok(NodeId(next))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.op(OpKind::Add, &[a, b]).expect("valid node ids")
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.op(OpKind::Multiply, &[a, b]).expect("valid node ids")
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.op(OpKind::MatMul, &[a, b]).expect("valid node ids")
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.op(OpKind::Sigmoid, &[x]).expect("valid node ids")
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.op(OpKind::Relu, &[x]).expect("valid node ids")
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        self.op(OpKind::Mean, &[x]).expect("valid node ids")
    }

    pub fn scale_shift(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> NodeId {
        self.op(OpKind::ScaleShift, &[x, gamma, beta])
            .expect("valid node ids")
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        self.op(OpKind::Concat, parts).expect("valid node ids")
    }

    pub fn kind(&self, id: NodeId) -> Option<OpKind> {
        match &self.nodes[id.0] {
            Node::Leaf { .. } => None,
            Node::Op { kind, .. } => Some(*kind),
        }
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn inputs(&self, id: NodeId) -> &[NodeId] {
        match &self.nodes[id.0] {
            Node::Leaf { .. } => &[],
            Node::Op { inputs, .. } => inputs,
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (NodeId, &str)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n {
            Node::Leaf { name } => Some((NodeId(i), name.as_str())),
            Node::Op { .. } => None,
        })
    }

    fn label(&self, id: usize) -> String {
        match &self.nodes[id] {
            Node::Leaf { name } => format!("leaf #{id} `{name}`"),
            Node::Op { kind, .. } => format!("node #{id} ({kind})"),
        }
    }

    /// Evaluates every node in f64.
    pub fn eval(&self, bindings: &BTreeMap<NodeId, Value>) -> Result<Evaluation<'_>> {
        let mut values: Vec<Value> = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let v = match node {
                Node::Leaf { .. } => bindings
                    .get(&NodeId(i))
                    .cloned()
                    .ok_or_else(|| Error::arg(format!("{} is unbound", self.label(i))))?,
                Node::Op { kind, inputs } => {
                    let args: Vec<&Value> = inputs.iter().map(|id| &values[id.0]).collect();
                    apply(*kind, &args).map_err(|detail| Error::shape(self.label(i), detail))?
                }
            };
            values.push(v);
        }
        Ok(Evaluation {
            graph: self,
            values,
        })
    }

    /// Evaluates the graph and returns every node's value.
    pub fn forward(&self, inputs: &BTreeMap<NodeId, Tensor>) -> Result<BTreeMap<NodeId, Tensor>> {
        let eval = self.eval(&to_values(inputs))?;
        (0..self.nodes.len())
            .map(|i| Ok((NodeId(i), eval.values[i].to_tensor()?)))
            .collect()
    }

    /// Gradient of the scalar `loss` node with respect to every leaf.
    pub fn backward(
        &self,
        inputs: &BTreeMap<NodeId, Tensor>,
        loss: NodeId,
    ) -> Result<BTreeMap<NodeId, Tensor>> {
        let eval = self.eval(&to_values(inputs))?;
        eval.gradients(loss)?
            .into_iter()
            .map(|(id, g)| Ok((id, g.to_tensor()?)))
            .collect()
    }
}

fn to_values(inputs: &BTreeMap<NodeId, Tensor>) -> BTreeMap<NodeId, Value> {
    inputs.iter().map(|(&k, t)| (k, Value::from(t))).collect()
}

/// Forward values of a graph, kept for the backward sweep.
pub struct Evaluation<'g> {
    graph: &'g Graph,
    values: Vec<Value>,
}

impl Evaluation<'_> {
    pub fn value(&self, id: NodeId) -> &Value {
        &self.values[id.0]
    }

    pub fn tensor(&self, id: NodeId) -> Result<Tensor> {
        self.values[id.0].to_tensor()
    }

    /// Backward sweep from a scalar node with seed 1.
    pub fn gradients(&self, loss: NodeId) -> Result<BTreeMap<NodeId, Value>> {
        let v = &self.values[loss.0];
        if v.data.len() != 1 {
            return Err(Error::arg(format!(
                "loss {} must be scalar, has dims {:?}",
                self.graph.label(loss.0),
                v.dims
            )));
        }
        self.gradients_seeded(loss, &[1.0])
    }

    /// Backward sweep from an arbitrary node given its upstream gradient.
    pub fn gradients_seeded(&self, from: NodeId, seed: &[f64]) -> Result<BTreeMap<NodeId, Value>> {
        let n = from.0 + 1;
        if seed.len() != self.values[from.0].data.len() {
            return Err(Error::shape(
                self.graph.label(from.0),
                format!(
                    "seed has {} elements, node has {}",
                    seed.len(),
                    self.values[from.0].data.len()
                ),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[from.0] = Some(seed.to_vec());
        for i in (0..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.graph.nodes[i] {
                Node::Leaf { .. } => grads[i] = Some(g),
                Node::Op { kind, inputs } => {
                    let args: Vec<&Value> = inputs.iter().map(|id| &self.values[id.0]).collect();
                    let parts = backprop(*kind, &args, &self.values[i], &g);
                    for (id, part) in inputs.iter().zip(parts) {
                        match &mut grads[id.0] {
                            Some(acc) => acc.iter_mut().zip(&part).for_each(|(a, p)| *a += p),
                            slot @ None => *slot = Some(part),
                        }
                    }
                }
            }
        }
        let mut out = BTreeMap::new();
        for (id, _) in self.graph.leaves() {
            let dims = self.values[id.0].dims.clone();
            // leaves after `from` cannot influence it
            let data = if id.0 < n { grads[id.0].take() } else { None }
                .unwrap_or_else(|| vec![0.0; self.values[id.0].data.len()]);
            out.insert(id, Value { dims, data });
        }
        Ok(out)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn apply(kind: OpKind, args: &[&Value]) -> Result<Value, String> {
    match kind {
        OpKind::Add | OpKind::Multiply => {
            let (a, b) = (args[0], args[1]);
            if a.dims != b.dims {
                return Err(format!("operand dims {:?} vs {:?}", a.dims, b.dims));
            }
            let data = a
                .data
                .iter()
                .zip(&b.data)
                .map(|(x, y)| if kind == OpKind::Add { x + y } else { x * y })
                .collect();
            Ok(Value {
                dims: a.dims.clone(),
                data,
            })
        }
        OpKind::MatMul => {
            let (a, b) = (args[0], args[1]);
            let (m, k, n) = matmul_dims(a, b)?;
            let mut data = vec![0.0; m * n];
            for i in 0..m {
                let row = &a.data[i * k..(i + 1) * k];
                let out = &mut data[i * n..(i + 1) * n];
                for (p, &av) in row.iter().enumerate() {
                    let brow = &b.data[p * n..(p + 1) * n];
                    for (o, &bv) in out.iter_mut().zip(brow) {
                        *o += av * bv;
                    }
                }
            }
            let dims = if b.dims.len() == 1 { vec![m] } else { vec![m, n] };
            Ok(Value { dims, data })
        }
        OpKind::Sigmoid => Ok(map(args[0], sigmoid)),
        OpKind::Relu => Ok(map(args[0], |x| x.max(0.0))),
        OpKind::Mean => {
            let x = args[0];
            let sum: f64 = x.data.iter().sum();
            Ok(Value {
                dims: vec![1],
                data: vec![sum / x.data.len() as f64],
            })
        }
        OpKind::ScaleShift => {
            let (x, gamma, beta) = (args[0], args[1], args[2]);
            let c = scale_shift_width(x, gamma, beta)?;
            let data = x
                .data
                .iter()
                .enumerate()
                .map(|(i, v)| v * gamma.data[i % c] + beta.data[i % c])
                .collect();
            Ok(Value {
                dims: x.dims.clone(),
                data,
            })
        }
        OpKind::Concat => {
            let first = args[0];
            let rank = first.dims.len();
            if rank > 2 {
                return Err(format!("concat supports rank 1 or 2, got {:?}", first.dims));
            }
            let rows = if rank == 2 { first.dims[0] } else { 1 };
            let mut widths = Vec::with_capacity(args.len());
            for a in args {
                if a.dims.len() != rank || (rank == 2 && a.dims[0] != rows) {
                    return Err(format!("concat parts {:?} vs {:?}", first.dims, a.dims));
                }
                widths.push(*a.dims.last().unwrap());
            }
            let total: usize = widths.iter().sum();
            let mut data = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for (a, &w) in args.iter().zip(&widths) {
                    data.extend_from_slice(&a.data[r * w..(r + 1) * w]);
                }
            }
            let dims = if rank == 2 { vec![rows, total] } else { vec![total] };
            Ok(Value { dims, data })
        }
    }
}

fn map(x: &Value, f: impl Fn(f64) -> f64) -> Value {
    Value {
        dims: x.dims.clone(),
        data: x.data.iter().map(|&v| f(v)).collect(),
    }
}

fn matmul_dims(a: &Value, b: &Value) -> Result<(usize, usize, usize), String> {
    if a.dims.len() != 2 || !(1..=2).contains(&b.dims.len()) {
        return Err(format!("matmul of {:?} and {:?}", a.dims, b.dims));
    }
    let (m, k) = (a.dims[0], a.dims[1]);
    let n = if b.dims.len() == 2 { b.dims[1] } else { 1 };
    if b.dims[0] != k {
        return Err(format!("inner dims differ: {:?} x {:?}", a.dims, b.dims));
    }
    Ok((m, k, n))
}

fn scale_shift_width(x: &Value, gamma: &Value, beta: &Value) -> Result<usize, String> {
    let c = *x.dims.last().unwrap();
    if x.dims.len() > 2 || gamma.dims != [c] || beta.dims != [c] {
        return Err(format!(
            "scale_shift of {:?} with gamma {:?}, beta {:?}",
            x.dims, gamma.dims, beta.dims
        ));
    }
    Ok(c)
}

fn backprop(kind: OpKind, args: &[&Value], out: &Value, g: &[f64]) -> Vec<Vec<f64>> {
    match kind {
        OpKind::Add => vec![g.to_vec(), g.to_vec()],
        OpKind::Multiply => {
            let (a, b) = (args[0], args[1]);
            vec![
                g.iter().zip(&b.data).map(|(g, y)| g * y).collect(),
                g.iter().zip(&a.data).map(|(g, x)| g * x).collect(),
            ]
        }
        OpKind::MatMul => {
            let (a, b) = (args[0], args[1]);
            let (m, k) = (a.dims[0], a.dims[1]);
            let n = if b.dims.len() == 2 { b.dims[1] } else { 1 };
            let mut ga = vec![0.0; m * k];
            let mut gb = vec![0.0; k * n];
            for i in 0..m {
                let gi = &g[i * n..(i + 1) * n];
                for p in 0..k {
                    let brow = &b.data[p * n..(p + 1) * n];
                    ga[i * k + p] = gi.iter().zip(brow).map(|(x, y)| x * y).sum();
                    let av = a.data[i * k + p];
                    for (o, &gv) in gb[p * n..(p + 1) * n].iter_mut().zip(gi) {
                        *o += av * gv;
                    }
                }
            }
            vec![ga, gb]
        }
        OpKind::Sigmoid => vec![g
            .iter()
            .zip(&out.data)
            .map(|(g, s)| g * s * (1.0 - s))
            .collect()],
        OpKind::Relu => vec![g
            .iter()
            .zip(&args[0].data)
            .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
            .collect()],
        OpKind::Mean => {
            let n = args[0].data.len();
            vec![vec![g[0] / n as f64; n]]
        }
        OpKind::ScaleShift => {
            let (x, gamma) = (args[0], args[1]);
            let c = gamma.data.len();
            let mut gx = vec![0.0; x.data.len()];
            let mut gg = vec![0.0; c];
            let mut gbeta = vec![0.0; c];
            for (i, (&gv, &xv)) in g.iter().zip(&x.data).enumerate() {
                let ch = i % c;
                gx[i] = gv * gamma.data[ch];
                gg[ch] += gv * xv;
                gbeta[ch] += gv;
            }
            vec![gx, gg, gbeta]
        }
        OpKind::Concat => {
            let rank = out.dims.len();
            let rows = if rank == 2 { out.dims[0] } else { 1 };
            let total = *out.dims.last().unwrap();
            let mut offset = 0;
            args.iter()
                .map(|a| {
                    let w = *a.dims.last().unwrap();
                    let mut part = Vec::with_capacity(rows * w);
                    for r in 0..rows {
                        let start = r * total + offset;
                        part.extend_from_slice(&g[start..start + w]);
                    }
                    offset += w;
                    part
                })
                .collect()
        }
    }
}
