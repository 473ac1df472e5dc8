//! Conditional generator architectures built as computation graphs.
//!
//! Two families are provided: a feed-forward GAN-style generator and an
//! unrolled deterministic DDIM diffusion chain. Both expose the same
//! surface — a direct evaluation path for sampling and a compiled
//! [`ComputationGraph`] so the identical object is differentiated during
//! guidance and bounded during verification. The two paths are tested to
//! agree.
//!
//! When a workspace map is present, condition inputs are normalized to
//! `[-1, 1]` on the way in and outputs are mapped back to workspace
//! coordinates on the way out (through a tanh squash for the GAN, a plain
//! affine map for the diffusion chain), so the compiled graphs always
//! speak workspace coordinates end to end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ComputationGraph, GraphBuilder, NodeId};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Latent input name in compiled generator graphs.
pub const LATENT_INPUT: &str = "z";
/// Condition input name in compiled generator graphs.
pub const CONDITION_INPUT: &str = "y";

/// Hidden-layer activation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
}

/// Coordinate ranges used to normalize conditions and map outputs back to
/// the workspace. `lo`/`hi` are per state dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceMap {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl WorkspaceMap {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(Error::InvalidConfig(
                "workspace map wants lo < hi per dimension".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn normalize(&self, state: &[f64]) -> Vec<f64> {
        state
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let d = i % self.lo.len();
                2.0 * (v - self.lo[d]) / (self.hi[d] - self.lo[d]) - 1.0
            })
            .collect()
    }

    pub fn denormalize(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .enumerate()
            .map(|(i, v)| {
                let d = i % self.lo.len();
                self.lo[d] + 0.5 * (v + 1.0) * (self.hi[d] - self.lo[d])
            })
            .collect()
    }

    /// Diagonal affine graph node mapping workspace rows to `[-1, 1]`.
    fn normalize_node(&self, b: &mut GraphBuilder, src: NodeId, len: usize) -> Result<NodeId> {
        let n = self.lo.len();
        let mut w = vec![0.0; len * len];
        let mut bias = vec![0.0; len];
        for i in 0..len {
            let d = i % n;
            let span = self.hi[d] - self.lo[d];
            w[i * len + i] = 2.0 / span;
            bias[i] = -2.0 * self.lo[d] / span - 1.0;
        }
        b.affine(src, Tensor::matrix(len, len, w)?, Tensor::vector(bias))
    }

    /// Diagonal affine graph node mapping `[-1, 1]` rows to workspace.
    fn denormalize_node(&self, b: &mut GraphBuilder, src: NodeId, len: usize) -> Result<NodeId> {
        let n = self.lo.len();
        let mut w = vec![0.0; len * len];
        let mut bias = vec![0.0; len];
        for i in 0..len {
            let d = i % n;
            let span = self.hi[d] - self.lo[d];
            w[i * len + i] = 0.5 * span;
            bias[i] = self.lo[d] + 0.5 * span;
        }
        b.affine(src, Tensor::matrix(len, len, w)?, Tensor::vector(bias))
    }
}

/// Architecture of the feed-forward GAN generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub latent_dim: usize,
    pub condition_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Generated trajectory length (target steps).
    pub horizon: usize,
    pub state_dim: usize,
    /// When present, outputs pass through tanh and an affine range map to
    /// the workspace box, and conditions are normalized on input.
    pub workspace: Option<WorkspaceMap>,
}

impl GeneratorSpec {
    pub fn output_dim(&self) -> usize {
        self.horizon * self.state_dim
    }

    /// Layer dimensions from input to output.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.latent_dim + self.condition_dim];
        dims.extend_from_slice(&self.hidden);
        dims.push(self.output_dim());
        dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.horizon == 0 || self.state_dim == 0 {
            return Err(Error::InvalidConfig(
                "generator wants latent_dim, horizon, state_dim >= 1".into(),
            ));
        }
        if let Some(ws) = &self.workspace {
            if ws.lo.len() != self.state_dim {
                return Err(Error::InvalidConfig(
                    "workspace map dimension vs state_dim".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Architecture of the diffusion noise-prediction network plus schedule.
///
/// The latent has the output's dimensionality; the network input is the
/// noisy sample, a scalar time embedding `tau / T`, and the condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub horizon: usize,
    pub state_dim: usize,
    pub condition_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub steps: usize,
    pub betas: Vec<f64>,
    pub workspace: Option<WorkspaceMap>,
}

impl DiffusionSpec {
    pub fn output_dim(&self) -> usize {
        self.horizon * self.state_dim
    }

    /// Latent dimensionality equals the output dimensionality.
    pub fn latent_dim(&self) -> usize {
        self.output_dim()
    }

    pub fn epsnet_input_dim(&self) -> usize {
        self.output_dim() + 1 + self.condition_dim
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.epsnet_input_dim()];
        dims.extend_from_slice(&self.hidden);
        dims.push(self.output_dim());
        dims
    }

    /// Cumulative products `prod_{i<=tau} (1 - beta_i)` for `tau = 1..=T`,
    /// with the empty product defined as 1.
    pub fn alpha_bars(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.betas.len());
        let mut acc = 1.0;
        for b in &self.betas {
            acc *= 1.0 - b;
            out.push(acc);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.betas.len() != self.steps {
            return Err(Error::InvalidConfig(format!(
                "schedule length {} vs steps {}",
                self.betas.len(),
                self.steps
            )));
        }
        if self.betas.iter().any(|b| !(0.0 < *b && *b < 1.0)) {
            return Err(Error::InvalidConfig("betas must lie in (0, 1)".into()));
        }
        let bars = self.alpha_bars();
        if bars.windows(2).any(|w| w[1] >= w[0]) || bars.iter().any(|a| !(0.0 < *a && *a <= 1.0)) {
            return Err(Error::InvalidConfig(
                "alpha-bar sequence must be decreasing in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Quadratic noise schedule with exact endpoints: linear interpolation of
/// the square roots, squared.
pub fn beta_schedule(steps: usize, beta1: f64, beta_t: f64) -> Result<Vec<f64>> {
    if steps < 2 || !(0.0 < beta1 && beta1 <= beta_t && beta_t < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "schedule wants T >= 2 and 0 < beta1 <= betaT < 1, got T={steps}, {beta1}, {beta_t}"
        )));
    }
    let (s1, st) = (beta1.sqrt(), beta_t.sqrt());
    let denom = (steps - 1) as f64;
    Ok((1..=steps)
        .map(|tau| {
            let w = (tau - 1) as f64 / denom;
            let root = s1 * (1.0 - w) + st * w;
            root * root
        })
        .collect())
}

/// Per-layer weight matrices and bias vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub layers: Vec<Layer>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Weights {
    /// He-style initialization for the given layer dimensions.
    pub fn init_mlp(dims: &[usize], rng: &mut Rng) -> Self {
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = (2.0 / fan_in as f64).sqrt();
            let weight: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| crate::rng::standard_normal(rng) * scale)
                .collect();
            layers.push(Layer {
                weight: Tensor::matrix(fan_out, fan_in, weight).expect("shape by construction"),
                bias: Tensor::zeros(vec![fan_out]),
            });
        }
        Weights { layers }
    }

    /// Check layer shapes against an expected dimension chain.
    pub fn matches(&self, dims: &[usize]) -> Result<()> {
        if self.layers.len() + 1 != dims.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} layers vs {} expected",
                self.layers.len(),
                dims.len() - 1
            )));
        }
        for (i, (layer, w)) in self.layers.iter().zip(dims.windows(2)).enumerate() {
            if layer.weight.cols() != w[0] || layer.weight.rows() != w[1] || layer.bias.len() != w[1]
            {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i}: weight {:?} vs expected [{}, {}]",
                    layer.weight.shape(),
                    w[1],
                    w[0]
                )));
            }
        }
        Ok(())
    }

    /// Total parameter count.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }
}

fn apply_activation(act: Activation, x: &mut [f64]) {
    match act {
        Activation::Relu => x.iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::LeakyRelu { slope } => x.iter_mut().for_each(|v| {
            if *v <= 0.0 {
                *v *= slope;
            }
        }),
        Activation::Tanh => x.iter_mut().for_each(|v| *v = v.tanh()),
    }
}

fn builder_activation(b: &mut GraphBuilder, act: Activation, id: NodeId) -> NodeId {
    match act {
        Activation::Relu => b.relu(id),
        Activation::LeakyRelu { slope } => b.leaky_relu(id, slope),
        Activation::Tanh => b.tanh(id),
    }
}

/// MLP forward pass on a plain slice (hidden activations between layers,
/// linear final layer).
fn mlp_forward(weights: &Weights, act: Activation, input: &[f64]) -> Result<Vec<f64>> {
    let mut cur = input.to_vec();
    let last = weights.layers.len() - 1;
    for (i, layer) in weights.layers.iter().enumerate() {
        cur = Tensor::affine_apply(&layer.weight, &layer.bias, &cur)?;
        if i < last {
            apply_activation(act, &mut cur);
        }
    }
    Ok(cur)
}

/// Build the MLP portion of a graph; returns output node and affine ids.
fn mlp_graph(
    b: &mut GraphBuilder,
    weights: &Weights,
    act: Activation,
    input: NodeId,
) -> Result<(NodeId, Vec<NodeId>)> {
    let mut cur = input;
    let mut affine_ids = Vec::with_capacity(weights.layers.len());
    let last = weights.layers.len() - 1;
    for (i, layer) in weights.layers.iter().enumerate() {
        cur = b.affine(cur, layer.weight.clone(), layer.bias.clone())?;
        affine_ids.push(cur);
        if i < last {
            cur = builder_activation(b, act, cur);
        }
    }
    Ok((cur, affine_ids))
}

/// Deterministic GAN forward pass: MLP on `concat(z, y_norm)`, optional
/// tanh squash and workspace map, reshaped to `[horizon, state_dim]`.
pub fn gan_generate(
    spec: &GeneratorSpec,
    weights: &Weights,
    z: &Tensor,
    y: &Tensor,
) -> Result<Tensor> {
    spec.validate()?;
    weights.matches(&spec.layer_dims())?;
    if z.len() != spec.latent_dim || y.len() != spec.condition_dim {
        return Err(Error::ShapeMismatch(format!(
            "gan_generate: z len {} (want {}), y len {} (want {})",
            z.len(),
            spec.latent_dim,
            y.len(),
            spec.condition_dim
        )));
    }
    let mut input = z.data().to_vec();
    match &spec.workspace {
        Some(ws) => input.extend(ws.normalize(y.data())),
        None => input.extend_from_slice(y.data()),
    }
    let mut out = mlp_forward(weights, spec.activation, &input)?;
    if let Some(ws) = &spec.workspace {
        out.iter_mut().for_each(|v| *v = v.tanh());
        out = ws.denormalize(&out);
    }
    Tensor::new(vec![spec.horizon, spec.state_dim], out)
}

/// Graph computing the GAN target trajectory (flat `[horizon*state_dim]`)
/// from inputs `z` and `y`. Also returns the MLP affine node ids in layer
/// order, for training.
pub fn build_gan_graph(
    spec: &GeneratorSpec,
    weights: &Weights,
) -> Result<(ComputationGraph, Vec<NodeId>)> {
    spec.validate()?;
    weights.matches(&spec.layer_dims())?;
    let mut b = GraphBuilder::new();
    let z = b.input(LATENT_INPUT, vec![spec.latent_dim]);
    let net_in = if spec.condition_dim > 0 {
        let y = b.input(CONDITION_INPUT, vec![spec.condition_dim]);
        let y_in = match &spec.workspace {
            Some(ws) => ws.normalize_node(&mut b, y, spec.condition_dim)?,
            None => y,
        };
        b.concat(vec![z, y_in])?
    } else {
        z
    };
    let (mut out, affine_ids) = mlp_graph(&mut b, weights, spec.activation, net_in)?;
    if let Some(ws) = &spec.workspace {
        out = b.tanh(out);
        out = ws.denormalize_node(&mut b, out, spec.output_dim())?;
    }
    Ok((b.finish(out)?, affine_ids))
}

/// DDIM reverse-step coefficients `(1/sqrt(1-beta_tau), c_tau)` such that
/// `x_{tau-1} = x_tau / sqrt(1-beta_tau) + c_tau * eps(x_tau, tau)`.
fn ddim_coefficients(spec: &DiffusionSpec) -> Vec<(f64, f64)> {
    let bars = spec.alpha_bars();
    (1..=spec.steps)
        .map(|tau| {
            let beta = spec.betas[tau - 1];
            let bar = bars[tau - 1];
            let bar_prev = if tau >= 2 { bars[tau - 2] } else { 1.0 };
            let scale = 1.0 / (1.0 - beta).sqrt();
            // subtract the scaled prediction, add the re-noising term
            let c = (1.0 - bar_prev).sqrt() - (1.0 - bar).sqrt() / bar.sqrt();
            (scale, c)
        })
        .collect()
}

/// Deterministic DDIM sampling: `T` reverse steps from `x_T = z` with the
/// noise term removed, then the optional workspace map.
pub fn ddim_generate(
    spec: &DiffusionSpec,
    weights: &Weights,
    z: &Tensor,
    y: &Tensor,
) -> Result<Tensor> {
    spec.validate()?;
    weights.matches(&spec.layer_dims())?;
    if z.len() != spec.latent_dim() || y.len() != spec.condition_dim {
        return Err(Error::ShapeMismatch(format!(
            "ddim_generate: z len {} (want {}), y len {} (want {})",
            z.len(),
            spec.latent_dim(),
            y.len(),
            spec.condition_dim
        )));
    }
    let y_norm = match &spec.workspace {
        Some(ws) => ws.normalize(y.data()),
        None => y.data().to_vec(),
    };
    let coeffs = ddim_coefficients(spec);
    let mut x = z.data().to_vec();
    for tau in (1..=spec.steps).rev() {
        let (scale, c) = coeffs[tau - 1];
        let mut net_in = x.clone();
        net_in.push(tau as f64 / spec.steps as f64);
        net_in.extend_from_slice(&y_norm);
        let eps = mlp_forward(weights, spec.activation, &net_in)?;
        for (xi, ei) in x.iter_mut().zip(&eps) {
            *xi = *xi * scale + c * ei;
        }
    }
    let out = match &spec.workspace {
        Some(ws) => ws.denormalize(&x),
        None => x,
    };
    Tensor::new(vec![spec.horizon, spec.state_dim], out)
}

/// Unrolled DDIM chain as one graph from inputs `z`, `y` to the flat
/// target trajectory. Affine ids are returned per reverse step (the same
/// weights appear in every unrolled copy).
pub fn build_ddim_graph(
    spec: &DiffusionSpec,
    weights: &Weights,
) -> Result<(ComputationGraph, Vec<Vec<NodeId>>)> {
    spec.validate()?;
    weights.matches(&spec.layer_dims())?;
    let mut b = GraphBuilder::new();
    let z = b.input(LATENT_INPUT, vec![spec.latent_dim()]);
    let y_in = if spec.condition_dim > 0 {
        let y = b.input(CONDITION_INPUT, vec![spec.condition_dim]);
        Some(match &spec.workspace {
            Some(ws) => ws.normalize_node(&mut b, y, spec.condition_dim)?,
            None => y,
        })
    } else {
        None
    };
    let coeffs = ddim_coefficients(spec);
    let mut x = z;
    let mut step_affines = Vec::with_capacity(spec.steps);
    for tau in (1..=spec.steps).rev() {
        let (scale, c) = coeffs[tau - 1];
        let t_embed = b.constant(Tensor::scalar(tau as f64 / spec.steps as f64));
        let net_in = match y_in {
            Some(y) => b.concat(vec![x, t_embed, y])?,
            None => b.concat(vec![x, t_embed])?,
        };
        let (eps, affine_ids) = mlp_graph(&mut b, weights, spec.activation, net_in)?;
        step_affines.push(affine_ids);
        let scaled_x = b.scalar_mul(x, scale);
        let scaled_eps = b.scalar_mul(eps, c);
        x = b.add(scaled_x, scaled_eps)?;
    }
    let out = match &spec.workspace {
        Some(ws) => ws.denormalize_node(&mut b, x, spec.output_dim())?,
        None => x,
    };
    Ok((b.finish(out)?, step_affines))
}

/// Prefix rows followed by target rows: the conditioned trajectory the
/// monitors and the verifier see.
pub fn concat_condition(y: &Tensor, target: &Tensor) -> Result<Tensor> {
    if y.cols() != target.cols() {
        return Err(Error::ShapeMismatch(format!(
            "state dims differ: prefix {:?} vs target {:?}",
            y.shape(),
            target.shape()
        )));
    }
    let mut data = y.data().to_vec();
    data.extend_from_slice(target.data());
    Tensor::new(vec![y.rows() + target.rows(), target.cols()], data)
}

/// A trained generator of either family.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Generator {
    Gan {
        spec: GeneratorSpec,
        weights: Weights,
    },
    Ddim {
        spec: DiffusionSpec,
        weights: Weights,
    },
}

impl Generator {
    pub fn latent_dim(&self) -> usize {
        match self {
            Generator::Gan { spec, .. } => spec.latent_dim,
            Generator::Ddim { spec, .. } => spec.latent_dim(),
        }
    }

    pub fn condition_dim(&self) -> usize {
        match self {
            Generator::Gan { spec, .. } => spec.condition_dim,
            Generator::Ddim { spec, .. } => spec.condition_dim,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Generator::Gan { spec, .. } => spec.state_dim,
            Generator::Ddim { spec, .. } => spec.state_dim,
        }
    }

    /// Target steps generated (excluding the condition prefix).
    pub fn horizon(&self) -> usize {
        match self {
            Generator::Gan { spec, .. } => spec.horizon,
            Generator::Ddim { spec, .. } => spec.horizon,
        }
    }

    /// Condition prefix length in time steps.
    pub fn condition_len(&self) -> usize {
        self.condition_dim() / self.state_dim()
    }

    /// Full trajectory length including the prefix.
    pub fn trajectory_len(&self) -> usize {
        self.horizon() + self.condition_len()
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Generator::Gan { .. } => "gan",
            Generator::Ddim { .. } => "ddim",
        }
    }

    /// Generate the target trajectory `[horizon, state_dim]`.
    pub fn generate(&self, z: &Tensor, y: &Tensor) -> Result<Tensor> {
        match self {
            Generator::Gan { spec, weights } => gan_generate(spec, weights, z, y),
            Generator::Ddim { spec, weights } => ddim_generate(spec, weights, z, y),
        }
    }

    /// Generate the full conditioned trajectory `[h + horizon, state_dim]`.
    pub fn generate_trajectory(&self, z: &Tensor, y: &Tensor) -> Result<Tensor> {
        let target = self.generate(z, y)?;
        let prefix = y.reshape(vec![self.condition_len(), self.state_dim()])?;
        concat_condition(&prefix, &target)
    }

    /// Graph from `(z, y)` to the flat target trajectory.
    pub fn build_graph(&self) -> Result<ComputationGraph> {
        match self {
            Generator::Gan { spec, weights } => Ok(build_gan_graph(spec, weights)?.0),
            Generator::Ddim { spec, weights } => Ok(build_ddim_graph(spec, weights)?.0),
        }
    }

    /// Graph from `(z, y)` to the flat full trajectory: the raw condition
    /// rows concatenated before the generated target.
    pub fn build_conditioned_graph(&self) -> Result<ComputationGraph> {
        if self.condition_dim() == 0 {
            return self.build_graph();
        }
        match self {
            Generator::Gan { spec, weights } => {
                let mut b = GraphBuilder::new();
                let z = b.input(LATENT_INPUT, vec![spec.latent_dim]);
                let y = b.input(CONDITION_INPUT, vec![spec.condition_dim]);
                let y_in = match &spec.workspace {
                    Some(ws) => ws.normalize_node(&mut b, y, spec.condition_dim)?,
                    None => y,
                };
                let net_in = b.concat(vec![z, y_in])?;
                let (mut out, _) = mlp_graph(&mut b, weights, spec.activation, net_in)?;
                if let Some(ws) = &spec.workspace {
                    out = b.tanh(out);
                    out = ws.denormalize_node(&mut b, out, spec.output_dim())?;
                }
                let full = b.concat(vec![y, out])?;
                b.finish(full)
            }
            Generator::Ddim { spec, weights } => {
                let mut b = GraphBuilder::new();
                let z = b.input(LATENT_INPUT, vec![spec.latent_dim()]);
                let y = b.input(CONDITION_INPUT, vec![spec.condition_dim]);
                let y_norm = match &spec.workspace {
                    Some(ws) => ws.normalize_node(&mut b, y, spec.condition_dim)?,
                    None => y,
                };
                let coeffs = ddim_coefficients(spec);
                let mut x = z;
                for tau in (1..=spec.steps).rev() {
                    let (scale, c) = coeffs[tau - 1];
                    let t_embed =
                        b.constant(Tensor::scalar(tau as f64 / spec.steps as f64));
                    let net_in = b.concat(vec![x, t_embed, y_norm])?;
                    let (eps, _) = mlp_graph(&mut b, weights, spec.activation, net_in)?;
                    let scaled_x = b.scalar_mul(x, scale);
                    let scaled_eps = b.scalar_mul(eps, c);
                    x = b.add(scaled_x, scaled_eps)?;
                }
                let out = match &spec.workspace {
                    Some(ws) => ws.denormalize_node(&mut b, x, spec.output_dim())?,
                    None => x,
                };
                let full = b.concat(vec![y, out])?;
                b.finish(full)
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: Generator = serde_json::from_str(text)?;
        match &g {
            Generator::Gan { spec, weights } => {
                spec.validate()?;
                weights.matches(&spec.layer_dims())?;
            }
            Generator::Ddim { spec, weights } => {
                spec.validate()?;
                weights.matches(&spec.layer_dims())?;
            }
        }
        Ok(g)
    }
}
