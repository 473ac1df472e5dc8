//! Computation graphs shared by forward evaluation, reverse-mode
//! differentiation, and bound propagation.
//!
//! A [`ComputationGraph`] is a topologically ordered list of nodes: every
//! node's parents have smaller indices. Graphs are immutable after
//! construction; `forward` and `backward` allocate per-call state, so
//! concurrent evaluations of the same graph are safe.
//!
//! Tensors flow through nodes as flat buffers; shapes are metadata checked
//! at build time. There is no broadcasting — `concat`/`slice`/`reshape`
//! are the only structural operations, which keeps the verifier's bound
//! rules small and auditable.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub type NodeId = usize;

/// Operation performed by a graph node.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum NodeKind {
    /// Free input bound at evaluation time.
    Input { name: String },
    /// Embedded constant tensor.
    Constant { value: Tensor },
    /// `W x + b` with `W: [m, n]`, `b: [m]`.
    Affine { weight: Tensor, bias: Tensor },
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
    Neg,
    /// Elementwise sum of two parents.
    Add,
    /// Elementwise difference `p0 - p1`.
    Sub,
    ScalarMul { factor: f64 },
    /// Elementwise minimum of two parents.
    Min2,
    /// Elementwise maximum of two parents.
    Max2,
    /// Concatenation of flattened parents.
    Concat,
    /// Contiguous slice `[start, start + len)` of the flattened parent.
    Slice { start: usize, len: usize },
    /// Shape metadata change; data is untouched.
    Reshape { shape: Vec<usize> },
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Input { .. } => "input",
            NodeKind::Constant { .. } => "constant",
            NodeKind::Affine { .. } => "affine",
            NodeKind::Relu => "relu",
            NodeKind::LeakyRelu { .. } => "leaky_relu",
            NodeKind::Tanh => "tanh",
            NodeKind::Neg => "neg",
            NodeKind::Add => "add",
            NodeKind::Sub => "sub",
            NodeKind::ScalarMul { .. } => "scalar_mul",
            NodeKind::Min2 => "min2",
            NodeKind::Max2 => "max2",
            NodeKind::Concat => "concat",
            NodeKind::Slice { .. } => "slice",
            NodeKind::Reshape { .. } => "reshape",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Node {
    pub kind: NodeKind,
    pub parents: Vec<NodeId>,
    pub shape: Vec<usize>,
}

impl Node {
    pub fn size(&self) -> usize {
        self.shape.iter().product()
    }
}

/// An immutable, topologically ordered computation DAG with one designated
/// output node.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComputationGraph {
    nodes: Vec<Node>,
    output: NodeId,
}

impl ComputationGraph {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn output_id(&self) -> NodeId {
        self.output
    }

    pub fn output_size(&self) -> usize {
        self.nodes[self.output].size()
    }

    /// `(name, node id)` for every input node, in node order.
    pub fn inputs(&self) -> Vec<(&str, NodeId)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match &n.kind {
                NodeKind::Input { name } => Some((name.as_str(), i)),
                _ => None,
            })
            .collect()
    }

    pub fn input_id(&self, name: &str) -> Option<NodeId> {
        self.inputs()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, id)| id)
    }

    /// Structural validation: topological parent order, shape consistency,
    /// unique input names. Deserialized graphs must pass this before use.
    pub fn validate(&self) -> Result<()> {
        if self.output >= self.nodes.len() {
            return Err(Error::InvalidGraph("output id out of range".into()));
        }
        let mut names = std::collections::HashSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            for &p in &node.parents {
                if p >= i {
                    return Err(Error::InvalidGraph(format!(
                        "node {i} has parent {p} not preceding it"
                    )));
                }
            }
            let psize =
                |k: usize| -> usize { self.nodes[node.parents[k]].size() };
            let arity_ok = match &node.kind {
                NodeKind::Input { name } => {
                    if !names.insert(name.clone()) {
                        return Err(Error::InvalidGraph(format!(
                            "duplicate input name `{name}`"
                        )));
                    }
                    node.parents.is_empty()
                }
                NodeKind::Constant { value } => {
                    node.parents.is_empty() && value.len() == node.size()
                }
                NodeKind::Affine { weight, bias } => {
                    node.parents.len() == 1
                        && weight.shape().len() == 2
                        && weight.cols() == psize(0)
                        && weight.rows() == bias.len()
                        && bias.len() == node.size()
                }
                NodeKind::Relu
                | NodeKind::LeakyRelu { .. }
                | NodeKind::Tanh
                | NodeKind::Neg
                | NodeKind::ScalarMul { .. } => {
                    node.parents.len() == 1 && psize(0) == node.size()
                }
                NodeKind::Add | NodeKind::Sub | NodeKind::Min2 | NodeKind::Max2 => {
                    node.parents.len() == 2
                        && psize(0) == node.size()
                        && psize(1) == node.size()
                }
                NodeKind::Concat => {
                    !node.parents.is_empty()
                        && node.parents.iter().map(|&p| self.nodes[p].size()).sum::<usize>()
                            == node.size()
                }
                NodeKind::Slice { start, len } => {
                    node.parents.len() == 1
                        && *len == node.size()
                        && start + len <= psize(0)
                }
                NodeKind::Reshape { shape } => {
                    node.parents.len() == 1
                        && shape.iter().product::<usize>() == psize(0)
                        && node.size() == psize(0)
                }
            };
            if !arity_ok {
                return Err(Error::InvalidGraph(format!(
                    "node {i} ({}) has inconsistent arity or shape",
                    node.kind.name()
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: ComputationGraph = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }

    /// Evaluate every node in topological order. Returns per-node values.
    pub fn forward(&self, inputs: &HashMap<String, Tensor>) -> Result<Vec<Tensor>> {
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let value = match &node.kind {
                NodeKind::Input { name } => {
                    let t = inputs
                        .get(name)
                        .ok_or_else(|| Error::UnboundInput(name.clone()))?;
                    if t.len() != node.size() {
                        return Err(Error::ShapeMismatch(format!(
                            "input `{name}`: bound {} elements, node wants {}",
                            t.len(),
                            node.size()
                        )));
                    }
                    t.reshape(node.shape.clone())?
                }
                NodeKind::Constant { value } => value.clone(),
                NodeKind::Affine { weight, bias } => {
                    let x = values[node.parents[0]].data();
                    Tensor::new(node.shape.clone(), Tensor::affine_apply(weight, bias, x)?)?
                }
                NodeKind::Relu => {
                    let x = values[node.parents[0]].data();
                    Tensor::new(node.shape.clone(), x.iter().map(|v| v.max(0.0)).collect())?
                }
                NodeKind::LeakyRelu { slope } => {
                    let x = values[node.parents[0]].data();
                    Tensor::new(
                        node.shape.clone(),
                        x.iter()
                            .map(|&v| if v > 0.0 { v } else { slope * v })
                            .collect(),
                    )?
                }
                NodeKind::Tanh => {
                    let x = values[node.parents[0]].data();
                    Tensor::new(node.shape.clone(), x.iter().map(|v| v.tanh()).collect())?
                }
                NodeKind::Neg => {
                    let x = values[node.parents[0]].data();
                    Tensor::new(node.shape.clone(), x.iter().map(|v| -v).collect())?
                }
                NodeKind::Add => {
                    let a = values[node.parents[0]].data();
                    let b = values[node.parents[1]].data();
                    Tensor::new(
                        node.shape.clone(),
                        a.iter().zip(b).map(|(x, y)| x + y).collect(),
                    )?
                }
                NodeKind::Sub => {
                    let a = values[node.parents[0]].data();
                    let b = values[node.parents[1]].data();
                    Tensor::new(
                        node.shape.clone(),
                        a.iter().zip(b).map(|(x, y)| x - y).collect(),
                    )?
                }
                NodeKind::ScalarMul { factor } => {
                    let x = values[node.parents[0]].data();
                    Tensor::new(node.shape.clone(), x.iter().map(|v| factor * v).collect())?
                }
                NodeKind::Min2 => {
                    let a = values[node.parents[0]].data();
                    let b = values[node.parents[1]].data();
                    Tensor::new(
                        node.shape.clone(),
                        a.iter().zip(b).map(|(x, y)| x.min(*y)).collect(),
                    )?
                }
                NodeKind::Max2 => {
                    let a = values[node.parents[0]].data();
                    let b = values[node.parents[1]].data();
                    Tensor::new(
                        node.shape.clone(),
                        a.iter().zip(b).map(|(x, y)| x.max(*y)).collect(),
                    )?
                }
                NodeKind::Concat => {
                    let mut out = Vec::with_capacity(node.size());
                    for &p in &node.parents {
                        out.extend_from_slice(values[p].data());
                    }
                    Tensor::new(node.shape.clone(), out)?
                }
                NodeKind::Slice { start, len } => {
                    let x = values[node.parents[0]].data();
                    Tensor::new(node.shape.clone(), x[*start..start + len].to_vec())?
                }
                NodeKind::Reshape { shape } => values[node.parents[0]].reshape(shape.clone())?,
            };
            values.push(value);
        }
        Ok(values)
    }

    /// Evaluate and return only the output tensor.
    pub fn eval(&self, inputs: &HashMap<String, Tensor>) -> Result<Tensor> {
        let values = self.forward(inputs)?;
        Ok(values[self.output].clone())
    }

    /// Reverse-mode pass seeded with adjoint 1 at the scalar output.
    ///
    /// ReLU takes subgradient 0 at 0; `min2`/`max2` route the adjoint to the
    /// achieving branch, ties to the first parent.
    pub fn backward(&self, inputs: &HashMap<String, Tensor>) -> Result<GradientTape> {
        if self.output_size() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "backward needs a scalar output, got {} elements",
                self.output_size()
            )));
        }
        self.backward_seeded(inputs, &[1.0])
    }

    /// Reverse-mode pass with an explicit output adjoint (vector-Jacobian
    /// product). `seed` must match the output size.
    pub fn backward_seeded(
        &self,
        inputs: &HashMap<String, Tensor>,
        seed: &[f64],
    ) -> Result<GradientTape> {
        let values = self.forward(inputs)?;
        if seed.len() != self.output_size() {
            return Err(Error::ShapeMismatch(format!(
                "seed length {} vs output size {}",
                seed.len(),
                self.output_size()
            )));
        }
        let mut adjoints: Vec<Vec<f64>> =
            self.nodes.iter().map(|n| vec![0.0; n.size()]).collect();
        adjoints[self.output].copy_from_slice(seed);
        let mut affine_grads: HashMap<NodeId, AffineGrad> = HashMap::new();

        for id in (0..self.nodes.len()).rev() {
            let node = &self.nodes[id];
            if adjoints[id].iter().all(|&a| a == 0.0) {
                continue;
            }
            let out_adj = std::mem::take(&mut adjoints[id]);
            match &node.kind {
                NodeKind::Input { .. } | NodeKind::Constant { .. } => {
                    adjoints[id] = out_adj; // keep for inspection
                }
                NodeKind::Affine { weight, bias: _ } => {
                    let p = node.parents[0];
                    let x = values[p].data();
                    let grad = affine_grads.entry(id).or_insert_with(|| AffineGrad {
                        weight: Tensor::zeros(weight.shape().to_vec()),
                        bias: Tensor::zeros(vec![weight.rows()]),
                    });
                    let n = weight.cols();
                    for (i, &a) in out_adj.iter().enumerate() {
                        grad.bias.data_mut()[i] += a;
                        if a != 0.0 {
                            let row = &mut grad.weight.data_mut()[i * n..(i + 1) * n];
                            for (g, xv) in row.iter_mut().zip(x) {
                                *g += a * xv;
                            }
                        }
                    }
                    let up = Tensor::affine_transpose_apply(weight, &out_adj);
                    accumulate(&mut adjoints[p], &up);
                    adjoints[id] = out_adj;
                }
                NodeKind::Relu => {
                    let p = node.parents[0];
                    let x = values[p].data();
                    let up: Vec<f64> = out_adj
                        .iter()
                        .zip(x)
                        .map(|(&a, &xv)| if xv > 0.0 { a } else { 0.0 })
                        .collect();
                    accumulate(&mut adjoints[p], &up);
                    adjoints[id] = out_adj;
                }
                NodeKind::LeakyRelu { slope } => {
                    let p = node.parents[0];
                    let x = values[p].data();
                    let up: Vec<f64> = out_adj
                        .iter()
                        .zip(x)
                        .map(|(&a, &xv)| if xv > 0.0 { a } else { slope * a })
                        .collect();
                    accumulate(&mut adjoints[p], &up);
                    adjoints[id] = out_adj;
                }
                NodeKind::Tanh => {
                    let p = node.parents[0];
                    let y = values[id].data();
                    let up: Vec<f64> = out_adj
                        .iter()
                        .zip(y)
                        .map(|(&a, &yv)| a * (1.0 - yv * yv))
                        .collect();
                    accumulate(&mut adjoints[p], &up);
                    adjoints[id] = out_adj;
                }
                NodeKind::Neg => {
                    let p = node.parents[0];
                    let up: Vec<f64> = out_adj.iter().map(|&a| -a).collect();
                    accumulate(&mut adjoints[p], &up);
                    adjoints[id] = out_adj;
                }
                NodeKind::Add => {
                    let (p0, p1) = (node.parents[0], node.parents[1]);
                    accumulate(&mut adjoints[p0], &out_adj);
                    accumulate(&mut adjoints[p1], &out_adj);
                    adjoints[id] = out_adj;
                }
                NodeKind::Sub => {
                    let (p0, p1) = (node.parents[0], node.parents[1]);
                    accumulate(&mut adjoints[p0], &out_adj);
                    let neg: Vec<f64> = out_adj.iter().map(|&a| -a).collect();
                    accumulate(&mut adjoints[p1], &neg);
                    adjoints[id] = out_adj;
                }
                NodeKind::ScalarMul { factor } => {
                    let p = node.parents[0];
                    let up: Vec<f64> = out_adj.iter().map(|&a| factor * a).collect();
                    accumulate(&mut adjoints[p], &up);
                    adjoints[id] = out_adj;
                }
                NodeKind::Min2 | NodeKind::Max2 => {
                    let (p0, p1) = (node.parents[0], node.parents[1]);
                    let a0 = values[p0].data();
                    let a1 = values[p1].data();
                    let is_min = matches!(node.kind, NodeKind::Min2);
                    let mut up0 = vec![0.0; out_adj.len()];
                    let mut up1 = vec![0.0; out_adj.len()];
                    for i in 0..out_adj.len() {
                        // Ties route to the first parent.
                        let first_wins = if is_min {
                            a0[i] <= a1[i]
                        } else {
                            a0[i] >= a1[i]
                        };
                        if first_wins {
                            up0[i] = out_adj[i];
                        } else {
                            up1[i] = out_adj[i];
                        }
                    }
                    accumulate(&mut adjoints[p0], &up0);
                    accumulate(&mut adjoints[p1], &up1);
                    adjoints[id] = out_adj;
                }
                NodeKind::Concat => {
                    let mut off = 0;
                    for &p in &node.parents {
                        let sz = self.nodes[p].size();
                        accumulate(&mut adjoints[p], &out_adj[off..off + sz]);
                        off += sz;
                    }
                    adjoints[id] = out_adj;
                }
                NodeKind::Slice { start, .. } => {
                    let p = node.parents[0];
                    let mut up = vec![0.0; self.nodes[p].size()];
                    up[*start..start + out_adj.len()].copy_from_slice(&out_adj);
                    accumulate(&mut adjoints[p], &up);
                    adjoints[id] = out_adj;
                }
                NodeKind::Reshape { .. } => {
                    let p = node.parents[0];
                    accumulate(&mut adjoints[p], &out_adj);
                    adjoints[id] = out_adj;
                }
            }
        }

        Ok(GradientTape {
            values,
            adjoints: adjoints
                .into_iter()
                .zip(&self.nodes)
                .map(|(a, n)| Tensor::new(n.shape.clone(), a))
                .collect::<Result<Vec<_>>>()?,
            affine_grads,
        })
    }

    /// Chain `self` into `next`: the result computes `next(self(..))`.
    ///
    /// `next` must have exactly one input, of the same size as `self`'s
    /// output.
    pub fn compose(&self, next: &ComputationGraph) -> Result<ComputationGraph> {
        let next_inputs = next.inputs();
        if next_inputs.len() != 1 {
            return Err(Error::InvalidGraph(format!(
                "compose: second graph must have exactly one input, found {}",
                next_inputs.len()
            )));
        }
        let (_, next_in) = next_inputs[0];
        if next.nodes[next_in].size() != self.output_size() {
            return Err(Error::ShapeMismatch(format!(
                "compose: output size {} vs input size {}",
                self.output_size(),
                next.nodes[next_in].size()
            )));
        }
        let mut nodes = self.nodes.clone();
        let base = nodes.len();
        let mut remap: Vec<NodeId> = vec![0; next.nodes.len()];
        for (i, node) in next.nodes.iter().enumerate() {
            if i == next_in {
                remap[i] = self.output;
                continue;
            }
            let mut cloned = node.clone();
            cloned.parents = cloned.parents.iter().map(|&p| remap[p]).collect();
            remap[i] = nodes.len();
            nodes.push(cloned);
        }
        let output = if next.output == next_in {
            self.output
        } else {
            remap[next.output]
        };
        debug_assert!(output >= base || output == self.output);
        let g = ComputationGraph { nodes, output };
        g.validate()?;
        Ok(g)
    }

    /// Rewrite every `min2`/`max2` node into affine + ReLU form:
    /// `min(a,b) = b - relu(b-a)`, `max(a,b) = a + relu(b-a)`.
    pub fn rewrite_minmax_to_relu(&self) -> ComputationGraph {
        let mut nodes: Vec<Node> = Vec::with_capacity(self.nodes.len());
        let mut remap: Vec<NodeId> = vec![0; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            let parents: Vec<NodeId> = node.parents.iter().map(|&p| remap[p]).collect();
            match node.kind {
                NodeKind::Min2 | NodeKind::Max2 => {
                    let (a, b) = (parents[0], parents[1]);
                    let shape = node.shape.clone();
                    let is_min = matches!(node.kind, NodeKind::Min2);
                    // d = b - a, r = relu(d); min: b - r, max: a + r
                    let diff = nodes.len();
                    nodes.push(Node {
                        kind: NodeKind::Sub,
                        parents: vec![b, a],
                        shape: shape.clone(),
                    });
                    let relu = nodes.len();
                    nodes.push(Node {
                        kind: NodeKind::Relu,
                        parents: vec![diff],
                        shape: shape.clone(),
                    });
                    let out = nodes.len();
                    nodes.push(Node {
                        kind: if is_min { NodeKind::Sub } else { NodeKind::Add },
                        parents: if is_min { vec![b, relu] } else { vec![a, relu] },
                        shape,
                    });
                    remap[i] = out;
                }
                _ => {
                    let mut cloned = node.clone();
                    cloned.parents = parents;
                    remap[i] = nodes.len();
                    nodes.push(cloned);
                }
            }
        }
        ComputationGraph {
            output: remap[self.output],
            nodes,
        }
    }

    /// True if the graph contains any `min2`/`max2` node.
    pub fn has_minmax(&self) -> bool {
        self.nodes
            .iter()
            .any(|n| matches!(n.kind, NodeKind::Min2 | NodeKind::Max2))
    }
}

fn accumulate(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Per-node forward values and adjoints from one backward pass.
pub struct GradientTape {
    values: Vec<Tensor>,
    adjoints: Vec<Tensor>,
    affine_grads: HashMap<NodeId, AffineGrad>,
}

/// Gradients of the seeded objective w.r.t. one affine node's parameters.
#[derive(Clone, Debug)]
pub struct AffineGrad {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl GradientTape {
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.values[id]
    }

    pub fn adjoint(&self, id: NodeId) -> &Tensor {
        &self.adjoints[id]
    }

    /// Gradient w.r.t. a named input, if that input exists.
    pub fn input_gradient(&self, graph: &ComputationGraph, name: &str) -> Option<&Tensor> {
        graph.input_id(name).map(|id| &self.adjoints[id])
    }

    /// Parameter gradients for an affine node, if any adjoint reached it.
    pub fn affine_gradient(&self, id: NodeId) -> Option<&AffineGrad> {
        self.affine_grads.get(&id)
    }
}

/// Incrementally builds a [`ComputationGraph`] with shape checking.
pub struct GraphBuilder {
    nodes: Vec<Node>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, kind: NodeKind, parents: Vec<NodeId>, shape: Vec<usize>) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            kind,
            parents,
            shape,
        });
        id
    }

    fn size(&self, id: NodeId) -> usize {
        self.nodes[id].size()
    }

    /// Element count of an already-inserted node.
    pub fn node_size(&self, id: NodeId) -> usize {
        self.nodes[id].size()
    }

    pub fn input(&mut self, name: &str, shape: Vec<usize>) -> NodeId {
        self.push(
            NodeKind::Input {
                name: name.to_string(),
            },
            vec![],
            shape,
        )
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        let shape = value.shape().to_vec();
        self.push(NodeKind::Constant { value }, vec![], shape)
    }

    pub fn affine(&mut self, parent: NodeId, weight: Tensor, bias: Tensor) -> Result<NodeId> {
        if weight.shape().len() != 2
            || weight.cols() != self.size(parent)
            || weight.rows() != bias.len()
        {
            return Err(Error::ShapeMismatch(format!(
                "affine: W {:?} b {:?} on parent of size {}",
                weight.shape(),
                bias.shape(),
                self.size(parent)
            )));
        }
        let shape = vec![weight.rows()];
        Ok(self.push(NodeKind::Affine { weight, bias }, vec![parent], shape))
    }

    pub fn relu(&mut self, parent: NodeId) -> NodeId {
        let shape = self.nodes[parent].shape.clone();
        self.push(NodeKind::Relu, vec![parent], shape)
    }

    pub fn leaky_relu(&mut self, parent: NodeId, slope: f64) -> NodeId {
        let shape = self.nodes[parent].shape.clone();
        self.push(NodeKind::LeakyRelu { slope }, vec![parent], shape)
    }

    pub fn tanh(&mut self, parent: NodeId) -> NodeId {
        let shape = self.nodes[parent].shape.clone();
        self.push(NodeKind::Tanh, vec![parent], shape)
    }

    pub fn neg(&mut self, parent: NodeId) -> NodeId {
        let shape = self.nodes[parent].shape.clone();
        self.push(NodeKind::Neg, vec![parent], shape)
    }

    fn binary(&mut self, kind: NodeKind, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.size(a) != self.size(b) {
            return Err(Error::ShapeMismatch(format!(
                "{}: sizes {} vs {}",
                kind.name(),
                self.size(a),
                self.size(b)
            )));
        }
        let shape = self.nodes[a].shape.clone();
        Ok(self.push(kind, vec![a, b], shape))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(NodeKind::Add, a, b)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(NodeKind::Sub, a, b)
    }

    pub fn scalar_mul(&mut self, parent: NodeId, factor: f64) -> NodeId {
        let shape = self.nodes[parent].shape.clone();
        self.push(NodeKind::ScalarMul { factor }, vec![parent], shape)
    }

    pub fn min2(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(NodeKind::Min2, a, b)
    }

    pub fn max2(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(NodeKind::Max2, a, b)
    }

    pub fn concat(&mut self, parents: Vec<NodeId>) -> Result<NodeId> {
        if parents.is_empty() {
            return Err(Error::InvalidGraph("concat with no parents".into()));
        }
        let total: usize = parents.iter().map(|&p| self.size(p)).sum();
        Ok(self.push(NodeKind::Concat, parents, vec![total]))
    }

    pub fn slice(&mut self, parent: NodeId, start: usize, len: usize) -> Result<NodeId> {
        if start + len > self.size(parent) {
            return Err(Error::ShapeMismatch(format!(
                "slice [{start}, {}) of size-{} parent",
                start + len,
                self.size(parent)
            )));
        }
        Ok(self.push(NodeKind::Slice { start, len }, vec![parent], vec![len]))
    }

    pub fn reshape(&mut self, parent: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        if shape.iter().product::<usize>() != self.size(parent) {
            return Err(Error::ShapeMismatch(format!(
                "reshape to {:?} of size-{} parent",
                shape,
                self.size(parent)
            )));
        }
        Ok(self.push(
            NodeKind::Reshape {
                shape: shape.clone(),
            },
            vec![parent],
            shape,
        ))
    }

    pub fn finish(self, output: NodeId) -> Result<ComputationGraph> {
        let g = ComputationGraph {
            nodes: self.nodes,
            output,
        };
        g.validate()?;
        Ok(g)
    }
}

impl Default for GraphBuilder {
    fn default() -> Self {
        Self::new()
    }
}
