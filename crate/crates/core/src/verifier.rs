//! Sound output bounding of a computation graph over an input box.
//!
//! Two incomplete methods are provided: interval bound propagation (IBP)
//! and a backward linear-relaxation bound in the CROWN style. Both bind
//! one designated "free" graph input to an axis-aligned box and every
//! other input to a fixed point value.
//!
//! The backward relaxation requires all nonlinearities to be `relu`,
//! `leaky_relu`, or `tanh`; `min2`/`max2` nodes must first be rewritten
//! into ReLU form (see [`ComputationGraph::rewrite_minmax_to_relu`]).
//!
//! Bounds are computed in plain `f64` without outward rounding; soundness
//! is asserted in tests up to a documented slack of 1e-9 rather than as a
//! rigorous floating-point certificate.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ComputationGraph, NodeId, NodeKind};
use crate::tensor::Tensor;

/// An axis-aligned hyper-rectangle, `lower[j] <= z_j <= upper[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperbox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Hyperbox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidBox(format!(
                "bound lengths differ: {} vs {}",
                lower.len(),
                upper.len()
            )));
        }
        for (j, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) || l > u {
                return Err(Error::InvalidBox(format!(
                    "dimension {j}: [{l}, {u}] is not a finite ordered interval"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The box `[center - radius, center + radius]` with per-dimension radii.
    pub fn centered(center: &[f64], radius: &[f64]) -> Result<Self> {
        if center.len() != radius.len() {
            return Err(Error::InvalidBox("center/radius length mismatch".into()));
        }
        Hyperbox::new(
            center.iter().zip(radius).map(|(c, r)| c - r).collect(),
            center.iter().zip(radius).map(|(c, r)| c + r).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.len() == self.dim()
            && z.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .product()
    }

    /// Strict separation in at least one dimension. Touching boundaries
    /// count as overlapping.
    pub fn disjoint(&self, other: &Hyperbox) -> bool {
        debug_assert_eq!(self.dim(), other.dim());
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(other.lower.iter().zip(&other.upper))
            .any(|((al, au), (bl, bu))| au < bl || bu < al)
    }

    /// Uniform sample from the box.
    pub fn sample_uniform(&self, rng: &mut crate::rng::Rng) -> Vec<f64> {
        use rand::Rng as _;
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| if l == u { *l } else { rng.gen_range(*l..*u) })
            .collect()
    }
}

/// Per-node interval bounds from one IBP pass.
pub struct IntervalBounds {
    lower: Vec<Vec<f64>>,
    upper: Vec<Vec<f64>>,
}

impl IntervalBounds {
    pub fn lower(&self, id: NodeId) -> &[f64] {
        &self.lower[id]
    }

    pub fn upper(&self, id: NodeId) -> &[f64] {
        &self.upper[id]
    }

    /// Scalar output interval of the graph this was computed for.
    pub fn output_interval(&self, graph: &ComputationGraph) -> (f64, f64) {
        let id = graph.output_id();
        (self.lower[id][0], self.upper[id][0])
    }
}

/// Linear lower/upper bounding functions of the free input over a box:
/// `a_low · z + b_low <= f(z) <= a_up · z + b_up` for all `z` in the box.
#[derive(Clone, Debug)]
pub struct LinearBounds {
    pub a_low: Tensor,
    pub b_low: Tensor,
    pub a_up: Tensor,
    pub b_up: Tensor,
}

impl LinearBounds {
    /// Concretize over a box: minimize/maximize each linear form.
    pub fn concretize(&self, boxed: &Hyperbox) -> (Vec<f64>, Vec<f64>) {
        let rows = self.b_low.len();
        let k = boxed.dim();
        let mut lo = vec![0.0; rows];
        let mut hi = vec![0.0; rows];
        for r in 0..rows {
            let arow_l = &self.a_low.data()[r * k..(r + 1) * k];
            let arow_u = &self.a_up.data()[r * k..(r + 1) * k];
            let mut acc_l = self.b_low.data()[r];
            let mut acc_u = self.b_up.data()[r];
            for j in 0..k {
                let (l, u) = (boxed.lower()[j], boxed.upper()[j]);
                acc_l += if arow_l[j] >= 0.0 {
                    arow_l[j] * l
                } else {
                    arow_l[j] * u
                };
                acc_u += if arow_u[j] >= 0.0 {
                    arow_u[j] * u
                } else {
                    arow_u[j] * l
                };
            }
            lo[r] = acc_l;
            hi[r] = acc_u;
        }
        (lo, hi)
    }
}

/// Robustness bounds plus the Boolean satisfaction bounds they imply.
///
/// The Boolean mapping follows the strict-inequality predicate convention:
/// `bool_lower = 1` iff the robustness lower bound is strictly positive,
/// `bool_upper = 0` iff the robustness upper bound is non-positive.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SatBounds {
    pub rob_lower: f64,
    pub rob_upper: f64,
    pub bool_lower: u8,
    pub bool_upper: u8,
}

impl SatBounds {
    pub fn from_robustness(rob_lower: f64, rob_upper: f64) -> Self {
        SatBounds {
            rob_lower,
            rob_upper,
            bool_lower: u8::from(rob_lower > 0.0),
            bool_upper: u8::from(rob_upper > 0.0),
        }
    }

    /// The box is certified: every point satisfies the property.
    pub fn certified(&self) -> bool {
        self.bool_lower == 1
    }
}

/// Bounding strategy for [`verify_box`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    /// Interval bound propagation only.
    Ibp,
    /// Backward linear relaxation with IBP pre-activation intervals.
    Crown,
    /// Backward linear relaxation with pre-activation intervals themselves
    /// computed by backward substitution (tighter, slower).
    CrownFull,
}

impl std::str::FromStr for BoundMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ibp" => Ok(BoundMethod::Ibp),
            "crown" => Ok(BoundMethod::Crown),
            "crown-full" => Ok(BoundMethod::CrownFull),
            other => Err(Error::InvalidConfig(format!(
                "unknown bound method `{other}` (expected ibp|crown|crown-full)"
            ))),
        }
    }
}

/// Resolve the free input: the single graph input not bound in `fixed`.
fn free_input(
    graph: &ComputationGraph,
    boxed: &Hyperbox,
    fixed: &HashMap<String, Tensor>,
) -> Result<NodeId> {
    let mut free = Vec::new();
    for (name, id) in graph.inputs() {
        if !fixed.contains_key(name) {
            free.push((name.to_string(), id));
        }
    }
    if free.len() != 1 {
        return Err(Error::UnboundInput(format!(
            "expected exactly one free input, found {:?}",
            free.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>()
        )));
    }
    let (name, id) = free.pop().unwrap();
    if graph.node(id).size() != boxed.dim() {
        return Err(Error::ShapeMismatch(format!(
            "box dimension {} vs input `{name}` size {}",
            boxed.dim(),
            graph.node(id).size()
        )));
    }
    Ok(id)
}

/// Interval bound propagation: per-node sound intervals over the box.
///
/// Affine nodes split weights by sign; monotone activations map interval
/// endpoints; `min2`/`max2` take elementwise interval min/max.
pub fn ibp(
    graph: &ComputationGraph,
    boxed: &Hyperbox,
    fixed: &HashMap<String, Tensor>,
) -> Result<IntervalBounds> {
    let free = free_input(graph, boxed, fixed)?;
    let n = graph.nodes().len();
    let mut lower: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut upper: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (id, node) in graph.nodes().iter().enumerate() {
        let (lo, hi): (Vec<f64>, Vec<f64>) = match &node.kind {
            NodeKind::Input { name } => {
                if id == free {
                    (boxed.lower().to_vec(), boxed.upper().to_vec())
                } else {
                    let v = fixed
                        .get(name)
                        .ok_or_else(|| Error::UnboundInput(name.clone()))?;
                    if v.len() != node.size() {
                        return Err(Error::ShapeMismatch(format!(
                            "fixed input `{name}` has {} elements, node wants {}",
                            v.len(),
                            node.size()
                        )));
                    }
                    (v.data().to_vec(), v.data().to_vec())
                }
            }
            NodeKind::Constant { value } => (value.data().to_vec(), value.data().to_vec()),
            NodeKind::Affine { weight, bias } => {
                let p = node.parents[0];
                let (pl, pu) = (&lower[p], &upper[p]);
                let (m, k) = (weight.rows(), weight.cols());
                let mut lo = bias.data().to_vec();
                let mut hi = bias.data().to_vec();
                for i in 0..m {
                    let row = &weight.data()[i * k..(i + 1) * k];
                    let (mut acc_l, mut acc_u) = (0.0, 0.0);
                    for j in 0..k {
                        let w = row[j];
                        if w >= 0.0 {
                            acc_l += w * pl[j];
                            acc_u += w * pu[j];
                        } else {
                            acc_l += w * pu[j];
                            acc_u += w * pl[j];
                        }
                    }
                    lo[i] += acc_l;
                    hi[i] += acc_u;
                }
                (lo, hi)
            }
            NodeKind::Relu => {
                let p = node.parents[0];
                (
                    lower[p].iter().map(|v| v.max(0.0)).collect(),
                    upper[p].iter().map(|v| v.max(0.0)).collect(),
                )
            }
            NodeKind::LeakyRelu { slope } => {
                let p = node.parents[0];
                let f = |v: f64| if v > 0.0 { v } else { slope * v };
                (
                    lower[p].iter().map(|&v| f(v)).collect(),
                    upper[p].iter().map(|&v| f(v)).collect(),
                )
            }
            NodeKind::Tanh => {
                let p = node.parents[0];
                (
                    lower[p].iter().map(|v| v.tanh()).collect(),
                    upper[p].iter().map(|v| v.tanh()).collect(),
                )
            }
            NodeKind::Neg => {
                let p = node.parents[0];
                (
                    upper[p].iter().map(|v| -v).collect(),
                    lower[p].iter().map(|v| -v).collect(),
                )
            }
            NodeKind::Add => {
                let (a, b) = (node.parents[0], node.parents[1]);
                (
                    lower[a].iter().zip(&lower[b]).map(|(x, y)| x + y).collect(),
                    upper[a].iter().zip(&upper[b]).map(|(x, y)| x + y).collect(),
                )
            }
            NodeKind::Sub => {
                let (a, b) = (node.parents[0], node.parents[1]);
                (
                    lower[a].iter().zip(&upper[b]).map(|(x, y)| x - y).collect(),
                    upper[a].iter().zip(&lower[b]).map(|(x, y)| x - y).collect(),
                )
            }
            NodeKind::ScalarMul { factor } => {
                let p = node.parents[0];
                if *factor >= 0.0 {
                    (
                        lower[p].iter().map(|v| factor * v).collect(),
                        upper[p].iter().map(|v| factor * v).collect(),
                    )
                } else {
                    (
                        upper[p].iter().map(|v| factor * v).collect(),
                        lower[p].iter().map(|v| factor * v).collect(),
                    )
                }
            }
            NodeKind::Min2 => {
                let (a, b) = (node.parents[0], node.parents[1]);
                (
                    lower[a]
                        .iter()
                        .zip(&lower[b])
                        .map(|(x, y)| x.min(*y))
                        .collect(),
                    upper[a]
                        .iter()
                        .zip(&upper[b])
                        .map(|(x, y)| x.min(*y))
                        .collect(),
                )
            }
            NodeKind::Max2 => {
                let (a, b) = (node.parents[0], node.parents[1]);
                (
                    lower[a]
                        .iter()
                        .zip(&lower[b])
                        .map(|(x, y)| x.max(*y))
                        .collect(),
                    upper[a]
                        .iter()
                        .zip(&upper[b])
                        .map(|(x, y)| x.max(*y))
                        .collect(),
                )
            }
            NodeKind::Concat => {
                let mut lo = Vec::with_capacity(node.size());
                let mut hi = Vec::with_capacity(node.size());
                for &p in &node.parents {
                    lo.extend_from_slice(&lower[p]);
                    hi.extend_from_slice(&upper[p]);
                }
                (lo, hi)
            }
            NodeKind::Slice { start, len } => {
                let p = node.parents[0];
                (
                    lower[p][*start..start + len].to_vec(),
                    upper[p][*start..start + len].to_vec(),
                )
            }
            NodeKind::Reshape { .. } => {
                let p = node.parents[0];
                (lower[p].clone(), upper[p].clone())
            }
        };
        lower.push(lo);
        upper.push(hi);
    }
    Ok(IntervalBounds { lower, upper })
}

/// `(slope, intercept)` pairs for the linear relaxation of one scalar
/// activation over a pre-activation interval.
#[derive(Clone, Copy)]
struct Relaxation {
    low: (f64, f64),
    up: (f64, f64),
}

fn relu_relaxation(l: f64, u: f64) -> Relaxation {
    if l >= 0.0 {
        Relaxation {
            low: (1.0, 0.0),
            up: (1.0, 0.0),
        }
    } else if u <= 0.0 {
        Relaxation {
            low: (0.0, 0.0),
            up: (0.0, 0.0),
        }
    } else {
        let s = u / (u - l);
        // lower slope by the larger-side heuristic: |u| vs |l|
        let alpha = if u >= -l { 1.0 } else { 0.0 };
        Relaxation {
            low: (alpha, 0.0),
            up: (s, -s * l),
        }
    }
}

fn leaky_relu_relaxation(l: f64, u: f64, slope: f64) -> Relaxation {
    if l >= 0.0 {
        Relaxation {
            low: (1.0, 0.0),
            up: (1.0, 0.0),
        }
    } else if u <= 0.0 {
        Relaxation {
            low: (slope, 0.0),
            up: (slope, 0.0),
        }
    } else {
        let s = (u - slope * l) / (u - l);
        let t = u * (1.0 - s);
        let alpha = if u >= -l { 1.0 } else { slope };
        Relaxation {
            low: (alpha, 0.0),
            up: (s, t),
        }
    }
}

fn tanh_deriv(x: f64) -> f64 {
    let t = x.tanh();
    1.0 - t * t
}

/// Sound slope for an upper bound line anchored at `(l, tanh(l))` on a
/// zero-crossing interval: the maximal secant slope from `l`, found where
/// the secant meets the tangent. Falls back to the chord when the tangency
/// lies beyond `u`.
fn tanh_mixed_upper_slope(l: f64, u: f64) -> f64 {
    debug_assert!(l < 0.0 && u > 0.0);
    let secant = |x: f64| (x.tanh() - l.tanh()) / (x - l);
    // h(d) >= 0 once the tangent at d clears (l, tanh(l)); h is
    // nondecreasing on [0, u].
    let h = |d: f64| d.tanh() + tanh_deriv(d) * (l - d) - l.tanh();
    if h(u) < 0.0 {
        return secant(u); // chord regime
    }
    let (mut lo, mut hi) = (0.0, u);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // tanh' decreases away from 0, so the slope at the left bracket end
    // dominates the true tangency slope: sound by excess.
    tanh_deriv(lo)
}

fn tanh_relaxation(l: f64, u: f64) -> Relaxation {
    let (tl, tu) = (l.tanh(), u.tanh());
    let width = u - l;
    if width < 1e-12 {
        let m = 0.5 * (l + u);
        let d = tanh_deriv(m);
        let t = m.tanh() - d * m;
        return Relaxation {
            low: (d, t - 1e-15),
            up: (d, t + 1e-15),
        };
    }
    let chord = ((tu - tl) / width, tl - (tu - tl) / width * l);
    let mid = 0.5 * (l + u);
    let tangent_mid = (tanh_deriv(mid), mid.tanh() - tanh_deriv(mid) * mid);
    if l >= 0.0 {
        // concave region: chord below, tangent above
        Relaxation {
            low: chord,
            up: tangent_mid,
        }
    } else if u <= 0.0 {
        // convex region: tangent below, chord above
        Relaxation {
            low: tangent_mid,
            up: chord,
        }
    } else {
        let s_up = tanh_mixed_upper_slope(l, u);
        let up = (s_up, tl - s_up * l);
        // lower bound by odd symmetry: reflect the upper construction
        let s_lo = tanh_mixed_upper_slope(-u, -l);
        let low = (s_lo, -((-u).tanh() - s_lo * (-u)));
        Relaxation { low, up }
    }
}

/// Pre-activation bounds provider for the backward sweep.
struct PreActBounds {
    lower: Vec<Vec<f64>>,
    upper: Vec<Vec<f64>>,
}

impl PreActBounds {
    fn get(&self, id: NodeId) -> (&[f64], &[f64]) {
        (&self.lower[id], &self.upper[id])
    }
}

/// Accumulated linear functions during a backward sweep: one row per
/// output element being bounded.
struct Rows {
    low: Vec<f64>,
    up: Vec<f64>,
    width: usize,
}

impl Rows {
    fn zeros(rows: usize, width: usize) -> Self {
        Rows {
            low: vec![0.0; rows * width],
            up: vec![0.0; rows * width],
            width,
        }
    }
}

/// Backward linear-relaxation bounds for node `target`, expressed over the
/// free input and concretized on the box.
///
/// Returns per-element `(lower, upper)` for the target node.
fn backward_bounds(
    graph: &ComputationGraph,
    target: NodeId,
    boxed: &Hyperbox,
    fixed: &HashMap<String, Tensor>,
    free: NodeId,
    pre: &PreActBounds,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = graph.node(target).size();
    let mut acc: Vec<Option<Rows>> = (0..=target).map(|_| None).collect();
    {
        let width = rows;
        let mut init = Rows::zeros(rows, width);
        for r in 0..rows {
            init.low[r * width + r] = 1.0;
            init.up[r * width + r] = 1.0;
        }
        acc[target] = Some(init);
    }
    let mut c_low = vec![0.0; rows];
    let mut c_up = vec![0.0; rows];
    let mut input_rows: Option<Rows> = None;

    for id in (0..=target).rev() {
        let Some(cur) = acc[id].take() else { continue };
        let node = graph.node(id);
        let width = cur.width;
        debug_assert_eq!(width, node.size());
        match &node.kind {
            NodeKind::Input { name } => {
                if id == free {
                    match &mut input_rows {
                        None => input_rows = Some(cur),
                        Some(existing) => {
                            for (d, s) in existing.low.iter_mut().zip(&cur.low) {
                                *d += s;
                            }
                            for (d, s) in existing.up.iter_mut().zip(&cur.up) {
                                *d += s;
                            }
                        }
                    }
                } else {
                    let v = fixed
                        .get(name)
                        .ok_or_else(|| Error::UnboundInput(name.clone()))?;
                    fold_constant(&cur, v.data(), &mut c_low, &mut c_up, rows);
                }
            }
            NodeKind::Constant { value } => {
                fold_constant(&cur, value.data(), &mut c_low, &mut c_up, rows);
            }
            NodeKind::Affine { weight, bias } => {
                let p = node.parents[0];
                let pw = graph.node(p).size();
                let dst = ensure_rows(&mut acc[p], rows, pw);
                // rows · W accumulate onto parent; rows · b onto constants
                let (m, k) = (weight.rows(), weight.cols());
                debug_assert_eq!(m, width);
                debug_assert_eq!(k, pw);
                for r in 0..rows {
                    for i in 0..m {
                        let al = cur.low[r * width + i];
                        let au = cur.up[r * width + i];
                        if al != 0.0 || au != 0.0 {
                            let wrow = &weight.data()[i * k..(i + 1) * k];
                            let dl = &mut dst.low[r * pw..(r + 1) * pw];
                            if al != 0.0 {
                                for (d, w) in dl.iter_mut().zip(wrow) {
                                    *d += al * w;
                                }
                                c_low[r] += al * bias.data()[i];
                            }
                            let du = &mut dst.up[r * pw..(r + 1) * pw];
                            if au != 0.0 {
                                for (d, w) in du.iter_mut().zip(wrow) {
                                    *d += au * w;
                                }
                                c_up[r] += au * bias.data()[i];
                            }
                        }
                    }
                }
            }
            NodeKind::Relu | NodeKind::LeakyRelu { .. } | NodeKind::Tanh => {
                let p = node.parents[0];
                let (pl, pu) = pre.get(p);
                let dst = ensure_rows(&mut acc[p], rows, width);
                for j in 0..width {
                    let relax = match &node.kind {
                        NodeKind::Relu => relu_relaxation(pl[j], pu[j]),
                        NodeKind::LeakyRelu { slope } => {
                            leaky_relu_relaxation(pl[j], pu[j], *slope)
                        }
                        NodeKind::Tanh => tanh_relaxation(pl[j], pu[j]),
                        _ => unreachable!(),
                    };
                    for r in 0..rows {
                        let al = cur.low[r * width + j];
                        if al != 0.0 {
                            let (s, t) = if al >= 0.0 { relax.low } else { relax.up };
                            dst.low[r * width + j] += al * s;
                            c_low[r] += al * t;
                        }
                        let au = cur.up[r * width + j];
                        if au != 0.0 {
                            let (s, t) = if au >= 0.0 { relax.up } else { relax.low };
                            dst.up[r * width + j] += au * s;
                            c_up[r] += au * t;
                        }
                    }
                }
            }
            NodeKind::Neg => {
                let p = node.parents[0];
                let dst = ensure_rows(&mut acc[p], rows, width);
                for (d, s) in dst.low.iter_mut().zip(&cur.low) {
                    *d -= s;
                }
                for (d, s) in dst.up.iter_mut().zip(&cur.up) {
                    *d -= s;
                }
            }
            NodeKind::Add | NodeKind::Sub => {
                let (p0, p1) = (node.parents[0], node.parents[1]);
                let negate_second = matches!(node.kind, NodeKind::Sub);
                let dst0 = ensure_rows(&mut acc[p0], rows, width);
                for (d, s) in dst0.low.iter_mut().zip(&cur.low) {
                    *d += s;
                }
                for (d, s) in dst0.up.iter_mut().zip(&cur.up) {
                    *d += s;
                }
                let dst1 = ensure_rows(&mut acc[p1], rows, width);
                if negate_second {
                    for (d, s) in dst1.low.iter_mut().zip(&cur.low) {
                        *d -= s;
                    }
                    for (d, s) in dst1.up.iter_mut().zip(&cur.up) {
                        *d -= s;
                    }
                } else {
                    for (d, s) in dst1.low.iter_mut().zip(&cur.low) {
                        *d += s;
                    }
                    for (d, s) in dst1.up.iter_mut().zip(&cur.up) {
                        *d += s;
                    }
                }
            }
            NodeKind::ScalarMul { factor } => {
                let p = node.parents[0];
                let dst = ensure_rows(&mut acc[p], rows, width);
                for (d, s) in dst.low.iter_mut().zip(&cur.low) {
                    *d += factor * s;
                }
                for (d, s) in dst.up.iter_mut().zip(&cur.up) {
                    *d += factor * s;
                }
            }
            NodeKind::Min2 | NodeKind::Max2 => {
                return Err(Error::UnsupportedNode {
                    op: "backward relaxation",
                    kind: node.kind.name().into(),
                });
            }
            NodeKind::Concat => {
                let mut off = 0;
                for &p in &node.parents {
                    let pw = graph.node(p).size();
                    let dst = ensure_rows(&mut acc[p], rows, pw);
                    for r in 0..rows {
                        for j in 0..pw {
                            dst.low[r * pw + j] += cur.low[r * width + off + j];
                            dst.up[r * pw + j] += cur.up[r * width + off + j];
                        }
                    }
                    off += pw;
                }
            }
            NodeKind::Slice { start, .. } => {
                let p = node.parents[0];
                let pw = graph.node(p).size();
                let dst = ensure_rows(&mut acc[p], rows, pw);
                for r in 0..rows {
                    for j in 0..width {
                        dst.low[r * pw + start + j] += cur.low[r * width + j];
                        dst.up[r * pw + start + j] += cur.up[r * width + j];
                    }
                }
            }
            NodeKind::Reshape { .. } => {
                let p = node.parents[0];
                let dst = ensure_rows(&mut acc[p], rows, width);
                for (d, s) in dst.low.iter_mut().zip(&cur.low) {
                    *d += s;
                }
                for (d, s) in dst.up.iter_mut().zip(&cur.up) {
                    *d += s;
                }
            }
        }
    }

    // concretize over the box
    let k = boxed.dim();
    let empty = Rows::zeros(rows, k);
    let rows_in = input_rows.as_ref().unwrap_or(&empty);
    let mut lo = c_low;
    let mut hi = c_up;
    for r in 0..rows {
        let al = &rows_in.low[r * k..(r + 1) * k];
        let au = &rows_in.up[r * k..(r + 1) * k];
        for j in 0..k {
            let (l, u) = (boxed.lower()[j], boxed.upper()[j]);
            lo[r] += if al[j] >= 0.0 { al[j] * l } else { al[j] * u };
            hi[r] += if au[j] >= 0.0 { au[j] * u } else { au[j] * l };
        }
    }
    Ok((lo, hi))
}

fn fold_constant(cur: &Rows, value: &[f64], c_low: &mut [f64], c_up: &mut [f64], rows: usize) {
    let width = cur.width;
    for r in 0..rows {
        let mut accl = 0.0;
        let mut accu = 0.0;
        for j in 0..width {
            accl += cur.low[r * width + j] * value[j];
            accu += cur.up[r * width + j] * value[j];
        }
        c_low[r] += accl;
        c_up[r] += accu;
    }
}

fn ensure_rows(slot: &mut Option<Rows>, rows: usize, width: usize) -> &mut Rows {
    slot.get_or_insert_with(|| Rows::zeros(rows, width))
}

/// Pre-activation intervals for the backward relaxation.
fn preact_bounds(
    graph: &ComputationGraph,
    boxed: &Hyperbox,
    fixed: &HashMap<String, Tensor>,
    free: NodeId,
    tighten: bool,
) -> Result<PreActBounds> {
    let base = ibp(graph, boxed, fixed)?;
    let mut pre = PreActBounds {
        lower: base.lower,
        upper: base.upper,
    };
    if !tighten {
        return Ok(pre);
    }
    // Refine the parent interval of every nonlinearity by backward
    // substitution, in topological order so earlier refinements feed later
    // relaxations. Intersect with IBP so bounds never get looser.
    for id in 0..graph.nodes().len() {
        let node = graph.node(id);
        if !matches!(
            node.kind,
            NodeKind::Relu | NodeKind::LeakyRelu { .. } | NodeKind::Tanh
        ) {
            continue;
        }
        let p = node.parents[0];
        if matches!(graph.node(p).kind, NodeKind::Input { .. } | NodeKind::Constant { .. }) {
            continue;
        }
        let (lo, hi) = backward_bounds(graph, p, boxed, fixed, free, &pre)?;
        for j in 0..lo.len() {
            pre.lower[p][j] = pre.lower[p][j].max(lo[j]);
            pre.upper[p][j] = pre.upper[p][j].min(hi[j]);
        }
    }
    Ok(pre)
}

/// Backward linear-relaxation bounds `(lower, upper)` on the scalar output.
///
/// Pre-activation intervals come from IBP; the final interval is
/// intersected with the IBP output interval, so the result never falls
/// outside it.
pub fn crown(
    graph: &ComputationGraph,
    boxed: &Hyperbox,
    fixed: &HashMap<String, Tensor>,
) -> Result<(f64, f64)> {
    crown_with(graph, boxed, fixed, false)
}

/// As [`crown`], optionally tightening pre-activation intervals by backward
/// substitution (`tighten = true`).
pub fn crown_with(
    graph: &ComputationGraph,
    boxed: &Hyperbox,
    fixed: &HashMap<String, Tensor>,
    tighten: bool,
) -> Result<(f64, f64)> {
    if graph.output_size() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "bounding wants a scalar output, got {} elements",
            graph.output_size()
        )));
    }
    let free = free_input(graph, boxed, fixed)?;
    let pre = preact_bounds(graph, boxed, fixed, free, tighten)?;
    let (lo, hi) = backward_bounds(graph, graph.output_id(), boxed, fixed, free, &pre)?;
    let out = graph.output_id();
    Ok((lo[0].max(pre.lower[out][0]), hi[0].min(pre.upper[out][0])))
}

/// Linear input-space bounds on the scalar output (exposed for inspection
/// and soundness testing).
pub fn linear_bounds(
    graph: &ComputationGraph,
    boxed: &Hyperbox,
    fixed: &HashMap<String, Tensor>,
) -> Result<LinearBounds> {
    if graph.output_size() != 1 {
        return Err(Error::ShapeMismatch("scalar output required".into()));
    }
    let free = free_input(graph, boxed, fixed)?;
    let pre = preact_bounds(graph, boxed, fixed, free, false)?;
    // The backward sweep is fixed once the relaxations (functions of the
    // pre-activation intervals) are fixed, and concretization is affine in
    // the box corners. Probing with degenerate boxes at the origin and the
    // coordinate unit points therefore recovers the exact linear forms.
    let k = boxed.dim();
    let probe = |b: &Hyperbox| -> Result<(f64, f64)> {
        let (lo, hi) = backward_bounds(graph, graph.output_id(), b, fixed, free, &pre)?;
        Ok((lo[0], hi[0]))
    };
    let zero = Hyperbox::new(vec![0.0; k], vec![0.0; k])?;
    let (b_low, b_up) = probe(&zero)?;
    let mut a_low = vec![0.0; k];
    let mut a_up = vec![0.0; k];
    for j in 0..k {
        let mut point = vec![0.0; k];
        point[j] = 1.0;
        let unit = Hyperbox::new(point.clone(), point)?;
        let (l1, u1) = probe(&unit)?;
        a_low[j] = l1 - b_low;
        a_up[j] = u1 - b_up;
    }
    Ok(LinearBounds {
        a_low: Tensor::matrix(1, k, a_low)?,
        b_low: Tensor::vector(vec![b_low]),
        a_up: Tensor::matrix(1, k, a_up)?,
        b_up: Tensor::vector(vec![b_up]),
    })
}

/// Certified Boolean-satisfaction bounds for a reward graph over a box.
///
/// `min2`/`max2` nodes are rewritten to ReLU form automatically when the
/// backward relaxation is requested.
pub fn verify_box(
    graph: &ComputationGraph,
    boxed: &Hyperbox,
    fixed: &HashMap<String, Tensor>,
    method: BoundMethod,
) -> Result<SatBounds> {
    let (lo, hi) = match method {
        BoundMethod::Ibp => {
            let b = ibp(graph, boxed, fixed)?;
            b.output_interval(graph)
        }
        BoundMethod::Crown | BoundMethod::CrownFull => {
            let tighten = method == BoundMethod::CrownFull;
            if graph.has_minmax() {
                let rewritten = graph.rewrite_minmax_to_relu();
                crown_with(&rewritten, boxed, fixed, tighten)?
            } else {
                crown_with(graph, boxed, fixed, tighten)?
            }
        }
    };
    Ok(SatBounds::from_robustness(lo, hi))
}
