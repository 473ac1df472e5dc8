//! Desk-scale training: the denoising loss for the diffusion noise network
//! and a weight-clipping Wasserstein GAN, both optimized with Adam or
//! rectified Adam.
//!
//! Training runs entirely in normalized data space when the generator spec
//! carries a workspace map: callers normalize real trajectories once and
//! the critic scores `concat(y_norm, x_norm)`. Runs are single-threaded
//! and seed-deterministic: a fixed seed reproduces the weight trajectory
//! bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{
    Activation, DiffusionSpec, GeneratorSpec, Layer, Weights, CONDITION_INPUT, LATENT_INPUT,
};
use crate::graph::{ComputationGraph, GraphBuilder, NodeId};
use crate::rng::{self, Rng};
use crate::tensor::Tensor;

/// Optimizer selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Radam,
}

/// Hyperparameters shared by both trainers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub optimizer: OptimizerKind,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Critic weight-clipping bound.
    pub clip: f64,
    /// Critic updates per generator update.
    pub critic_steps: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.0005,
            batch_size: 64,
            iterations: 2000,
            optimizer: OptimizerKind::Radam,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            clip: 0.01,
            critic_steps: 5,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || self.clip <= 0.0 {
            return Err(Error::InvalidConfig(
                "learning rate and clip bound must be positive".into(),
            ));
        }
        if self.batch_size == 0 || self.critic_steps == 0 {
            return Err(Error::InvalidConfig(
                "batch size and critic steps must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Feed-forward critic scoring full (condition + target) trajectories.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl CriticSpec {
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend_from_slice(&self.hidden);
        dims.push(1);
        dims
    }
}

/// Per-parameter gradients in the same layout as [`Weights`].
#[derive(Clone, Debug)]
pub struct WeightGrads {
    pub layers: Vec<Layer>,
}

impl WeightGrads {
    pub fn zeros_like(weights: &Weights) -> Self {
        WeightGrads {
            layers: weights
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Tensor::zeros(l.weight.shape().to_vec()),
                    bias: Tensor::zeros(l.bias.shape().to_vec()),
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weight.data_mut().iter_mut().for_each(|v| *v *= factor);
            l.bias.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Accumulate the affine-node gradients recorded on a tape.
    fn accumulate_from_tape(
        &mut self,
        tape: &crate::graph::GradientTape,
        affine_ids: &[NodeId],
        sign: f64,
    ) {
        for (layer, &node) in self.layers.iter_mut().zip(affine_ids) {
            if let Some(g) = tape.affine_gradient(node) {
                for (d, s) in layer.weight.data_mut().iter_mut().zip(g.weight.data()) {
                    *d += sign * s;
                }
                for (d, s) in layer.bias.data_mut().iter_mut().zip(g.bias.data()) {
                    *d += sign * s;
                }
            }
        }
    }
}

/// First/second moment state for Adam-family optimizers.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<Layer>,
    v: Vec<Layer>,
    step: usize,
}

impl AdamState {
    pub fn new(weights: &Weights) -> Self {
        let zero = |l: &Layer| Layer {
            weight: Tensor::zeros(l.weight.shape().to_vec()),
            bias: Tensor::zeros(l.bias.shape().to_vec()),
        };
        AdamState {
            m: weights.layers.iter().map(zero).collect(),
            v: weights.layers.iter().map(zero).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }
}

fn optimizer_update(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: usize,
    cfg: &TrainingConfig,
) {
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let t = step as f64;
    let bias1 = 1.0 - b1.powf(t);
    let bias2 = 1.0 - b2.powf(t);
    match cfg.optimizer {
        OptimizerKind::Adam => {
            for i in 0..param.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                let mhat = m[i] / bias1;
                let vhat = v[i] / bias2;
                param[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.adam_eps);
            }
        }
        OptimizerKind::Radam => {
            // variance rectification per the rectified-Adam update; while
            // the rectification term is undefined (early steps) fall back
            // to momentum SGD.
            let rho_inf = 2.0 / (1.0 - b2) - 1.0;
            let rho_t = rho_inf - 2.0 * t * b2.powf(t) / bias2;
            let rect = if rho_t > 4.0 {
                Some(
                    (((rho_t - 4.0) * (rho_t - 2.0) * rho_inf)
                        / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t))
                        .sqrt(),
                )
            } else {
                None
            };
            for i in 0..param.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                let mhat = m[i] / bias1;
                match rect {
                    Some(r) => {
                        let vhat = (v[i] / bias2).sqrt();
                        param[i] -= cfg.learning_rate * r * mhat / (vhat + cfg.adam_eps);
                    }
                    None => {
                        param[i] -= cfg.learning_rate * mhat;
                    }
                }
            }
        }
    }
}

/// One optimizer step over every layer. Increments the step counter.
pub fn adam_step(
    weights: &mut Weights,
    grads: &WeightGrads,
    state: &mut AdamState,
    cfg: &TrainingConfig,
) {
    state.step += 1;
    for ((layer, grad), (m, v)) in weights
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        optimizer_update(
            layer.weight.data_mut(),
            grad.weight.data(),
            m.weight.data_mut(),
            v.weight.data_mut(),
            state.step,
            cfg,
        );
        optimizer_update(
            layer.bias.data_mut(),
            grad.bias.data(),
            m.bias.data_mut(),
            v.bias.data_mut(),
            state.step,
            cfg,
        );
    }
}

/// A (condition, target) pair in flat normalized coordinates.
#[derive(Clone, Debug)]
pub struct TrainPair {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
}

/// Noise-prediction network as a standalone graph: input
/// `concat(x_tau, tau/T, y_norm)`, output the predicted noise.
pub fn build_epsnet_graph(
    spec: &DiffusionSpec,
    weights: &Weights,
) -> Result<(ComputationGraph, Vec<NodeId>)> {
    weights.matches(&spec.layer_dims())?;
    let mut b = GraphBuilder::new();
    let input = b.input("eps_in", vec![spec.epsnet_input_dim()]);
    let mut cur = input;
    let mut affine_ids = Vec::new();
    let last = weights.layers.len() - 1;
    for (i, layer) in weights.layers.iter().enumerate() {
        cur = b.affine(cur, layer.weight.clone(), layer.bias.clone())?;
        affine_ids.push(cur);
        if i < last {
            cur = match spec.activation {
                Activation::Relu => b.relu(cur),
                Activation::LeakyRelu { slope } => b.leaky_relu(cur, slope),
                Activation::Tanh => b.tanh(cur),
            };
        }
    }
    Ok((b.finish(cur)?, affine_ids))
}

/// Denoising loss and weight gradients on one batch.
///
/// Per item: a uniform diffusion step `tau`, a standard normal noise draw,
/// the noised sample `sqrt(abar) x0 + sqrt(1-abar) eps`, and the squared
/// error between the injected and predicted noise (summed over dimensions,
/// averaged over the batch).
pub fn ddpm_loss(
    spec: &DiffusionSpec,
    weights: &Weights,
    batch: &[TrainPair],
    rng: &mut Rng,
) -> Result<(f64, WeightGrads)> {
    use rand::Rng as _;
    if batch.is_empty() {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    spec.validate()?;
    let (graph, affine_ids) = build_epsnet_graph(spec, weights)?;
    let bars = spec.alpha_bars();
    let dim = spec.output_dim();
    let mut grads = WeightGrads::zeros_like(weights);
    let mut loss = 0.0;
    let mut inputs = std::collections::HashMap::new();
    for pair in batch {
        if pair.x.len() != dim || pair.y.len() != spec.condition_dim {
            return Err(Error::ShapeMismatch("batch item dims".into()));
        }
        let tau = rng.gen_range(1..=spec.steps);
        let eps: Vec<f64> = (0..dim).map(|_| rng::standard_normal(rng)).collect();
        let (sa, sb) = (bars[tau - 1].sqrt(), (1.0 - bars[tau - 1]).sqrt());
        let mut net_in = Vec::with_capacity(spec.epsnet_input_dim());
        net_in.extend(pair.x.iter().zip(&eps).map(|(x, e)| sa * x + sb * e));
        net_in.push(tau as f64 / spec.steps as f64);
        net_in.extend_from_slice(&pair.y);
        inputs.insert("eps_in".to_string(), Tensor::vector(net_in));
        let predicted = graph.eval(&inputs)?;
        let residual: Vec<f64> = predicted
            .data()
            .iter()
            .zip(&eps)
            .map(|(p, e)| p - e)
            .collect();
        loss += residual.iter().map(|r| r * r).sum::<f64>();
        let seed: Vec<f64> = residual.iter().map(|r| 2.0 * r).collect();
        let tape = graph.backward_seeded(&inputs, &seed)?;
        grads.accumulate_from_tape(&tape, &affine_ids, 1.0);
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    Ok((loss * inv, grads))
}

/// Ids of generator and critic affine nodes inside the composed
/// critic-of-generator graph.
struct ComposedIds {
    gen: Vec<NodeId>,
    critic: Vec<NodeId>,
}

/// Graph scoring a generated trajectory: `C(concat(y, G(z, y)))` in
/// normalized space (no tanh squash map to workspace — training stays in
/// normalized coordinates; the squash itself is included when the spec
/// has a workspace map).
fn build_critic_of_generator(
    gen_spec: &GeneratorSpec,
    gen_w: &Weights,
    critic_spec: &CriticSpec,
    critic_w: &Weights,
) -> Result<(ComputationGraph, ComposedIds)> {
    let mut b = GraphBuilder::new();
    let z = b.input(LATENT_INPUT, vec![gen_spec.latent_dim]);
    let y_node = (gen_spec.condition_dim > 0)
        .then(|| b.input(CONDITION_INPUT, vec![gen_spec.condition_dim]));
    let mut gen_ids = Vec::new();
    let net_in = match y_node {
        Some(y) => b.concat(vec![z, y])?,
        None => z,
    };
    let mut cur = net_in;
    let last = gen_w.layers.len() - 1;
    for (i, layer) in gen_w.layers.iter().enumerate() {
        cur = b.affine(cur, layer.weight.clone(), layer.bias.clone())?;
        gen_ids.push(cur);
        if i < last {
            cur = match gen_spec.activation {
                Activation::Relu => b.relu(cur),
                Activation::LeakyRelu { slope } => b.leaky_relu(cur, slope),
                Activation::Tanh => b.tanh(cur),
            };
        }
    }
    if gen_spec.workspace.is_some() {
        cur = b.tanh(cur);
    }
    let critic_in = match y_node {
        Some(y) => b.concat(vec![y, cur])?,
        None => cur,
    };
    let mut critic_ids = Vec::new();
    let mut cc = critic_in;
    let clast = critic_w.layers.len() - 1;
    for (i, layer) in critic_w.layers.iter().enumerate() {
        cc = b.affine(cc, layer.weight.clone(), layer.bias.clone())?;
        critic_ids.push(cc);
        if i < clast {
            cc = match critic_spec.activation {
                Activation::Relu => b.relu(cc),
                Activation::LeakyRelu { slope } => b.leaky_relu(cc, slope),
                Activation::Tanh => b.tanh(cc),
            };
        }
    }
    Ok((
        b.finish(cc)?,
        ComposedIds {
            gen: gen_ids,
            critic: critic_ids,
        },
    ))
}

/// Critic-only graph scoring a flat trajectory input.
fn build_critic_graph(
    critic_spec: &CriticSpec,
    critic_w: &Weights,
) -> Result<(ComputationGraph, Vec<NodeId>)> {
    critic_w.matches(&critic_spec.layer_dims())?;
    let mut b = GraphBuilder::new();
    let input = b.input("traj", vec![critic_spec.input_dim]);
    let mut cur = input;
    let mut ids = Vec::new();
    let last = critic_w.layers.len() - 1;
    for (i, layer) in critic_w.layers.iter().enumerate() {
        cur = b.affine(cur, layer.weight.clone(), layer.bias.clone())?;
        ids.push(cur);
        if i < last {
            cur = match critic_spec.activation {
                Activation::Relu => b.relu(cur),
                Activation::LeakyRelu { slope } => b.leaky_relu(cur, slope),
                Activation::Tanh => b.tanh(cur),
            };
        }
    }
    Ok((b.finish(cur)?, ids))
}

fn clip_weights(w: &mut Weights, bound: f64) {
    for layer in &mut w.layers {
        layer
            .weight
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = v.clamp(-bound, bound));
        layer
            .bias
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = v.clamp(-bound, bound));
    }
}

/// Generator forward in normalized space (mirrors the training graph:
/// tanh squash applied when a workspace map is configured, but no
/// denormalization).
fn generate_normalized(
    gen_spec: &GeneratorSpec,
    gen_w: &Weights,
    z: &[f64],
    y: &[f64],
) -> Result<Vec<f64>> {
    let mut cur: Vec<f64> = z.iter().chain(y).copied().collect();
    let last = gen_w.layers.len() - 1;
    for (i, layer) in gen_w.layers.iter().enumerate() {
        cur = Tensor::affine_apply(&layer.weight, &layer.bias, &cur)?;
        if i < last {
            match gen_spec.activation {
                Activation::Relu => cur.iter_mut().for_each(|v| *v = v.max(0.0)),
                Activation::LeakyRelu { slope } => cur.iter_mut().for_each(|v| {
                    if *v <= 0.0 {
                        *v *= slope;
                    }
                }),
                Activation::Tanh => cur.iter_mut().for_each(|v| *v = v.tanh()),
            }
        }
    }
    if gen_spec.workspace.is_some() {
        cur.iter_mut().for_each(|v| *v = v.tanh());
    }
    Ok(cur)
}

/// Mean critic score difference `E[C(real)] - E[C(fake)]` on a batch —
/// the quantity the critic ascends.
pub fn critic_objective(
    gen_spec: &GeneratorSpec,
    gen_w: &Weights,
    critic_spec: &CriticSpec,
    critic_w: &Weights,
    batch: &[TrainPair],
    rng: &mut Rng,
) -> Result<f64> {
    let (critic_graph, _) = build_critic_graph(critic_spec, critic_w)?;
    let mut inputs = std::collections::HashMap::new();
    let mut real = 0.0;
    let mut fake = 0.0;
    for pair in batch {
        let mut traj: Vec<f64> = pair.y.clone();
        traj.extend_from_slice(&pair.x);
        inputs.insert("traj".to_string(), Tensor::vector(traj));
        real += critic_graph.eval(&inputs)?.item()?;
        let z = rng::standard_normal_vec(rng, gen_spec.latent_dim);
        let gx = generate_normalized(gen_spec, gen_w, &z, &pair.y)?;
        let mut ftraj: Vec<f64> = pair.y.clone();
        ftraj.extend_from_slice(&gx);
        inputs.insert("traj".to_string(), Tensor::vector(ftraj));
        fake += critic_graph.eval(&inputs)?.item()?;
    }
    Ok((real - fake) / batch.len() as f64)
}

/// Optimizer state for one adversarial run.
pub struct WganState {
    pub gen_opt: AdamState,
    pub critic_opt: AdamState,
}

impl WganState {
    pub fn new(gen_w: &Weights, critic_w: &Weights) -> Self {
        WganState {
            gen_opt: AdamState::new(gen_w),
            critic_opt: AdamState::new(critic_w),
        }
    }
}

/// One adversarial round: `critic_steps` clipped critic ascents followed by
/// one generator descent. Batches are drawn from `data` with replacement.
pub fn wgan_step(
    gen_spec: &GeneratorSpec,
    gen_w: &mut Weights,
    critic_spec: &CriticSpec,
    critic_w: &mut Weights,
    data: &[TrainPair],
    cfg: &TrainingConfig,
    state: &mut WganState,
    rng: &mut Rng,
) -> Result<()> {
    use rand::Rng as _;
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("empty dataset".into()));
    }
    let mut inputs = std::collections::HashMap::new();

    for _ in 0..cfg.critic_steps {
        let (critic_graph, critic_ids) = build_critic_graph(critic_spec, critic_w)?;
        let mut grads = WeightGrads::zeros_like(critic_w);
        for _ in 0..cfg.batch_size {
            let pair = &data[rng.gen_range(0..data.len())];
            let mut traj: Vec<f64> = pair.y.clone();
            traj.extend_from_slice(&pair.x);
            inputs.insert("traj".to_string(), Tensor::vector(traj));
            // ascend E[C(real)] - E[C(fake)]: minimize the negation
            let tape = critic_graph.backward(&inputs)?;
            grads.accumulate_from_tape(&tape, &critic_ids, -1.0);

            let z = rng::standard_normal_vec(rng, gen_spec.latent_dim);
            let gx = generate_normalized(gen_spec, gen_w, &z, &pair.y)?;
            let mut ftraj: Vec<f64> = pair.y.clone();
            ftraj.extend_from_slice(&gx);
            inputs.insert("traj".to_string(), Tensor::vector(ftraj));
            let tape = critic_graph.backward(&inputs)?;
            grads.accumulate_from_tape(&tape, &critic_ids, 1.0);
        }
        grads.scale(1.0 / cfg.batch_size as f64);
        adam_step(critic_w, &grads, &mut state.critic_opt, cfg);
        clip_weights(critic_w, cfg.clip);
    }

    // generator descends -E[C(G(z))]
    let (composed, ids) = build_critic_of_generator(gen_spec, gen_w, critic_spec, critic_w)?;
    let mut grads = WeightGrads::zeros_like(gen_w);
    for _ in 0..cfg.batch_size {
        let pair = &data[rng.gen_range(0..data.len())];
        let z = rng::standard_normal_vec(rng, gen_spec.latent_dim);
        inputs.clear();
        inputs.insert(LATENT_INPUT.to_string(), Tensor::vector(z));
        if gen_spec.condition_dim > 0 {
            inputs.insert(CONDITION_INPUT.to_string(), Tensor::vector(pair.y.clone()));
        }
        let tape = composed.backward(&inputs)?;
        let _ = &ids.critic;
        grads.accumulate_from_tape(&tape, &ids.gen, -1.0);
    }
    grads.scale(1.0 / cfg.batch_size as f64);
    adam_step(gen_w, &grads, &mut state.gen_opt, cfg);
    inputs.clear();
    Ok(())
}

/// Full WGAN training loop. Returns the iteration count actually run.
pub fn train_wgan(
    gen_spec: &GeneratorSpec,
    gen_w: &mut Weights,
    critic_spec: &CriticSpec,
    critic_w: &mut Weights,
    data: &[TrainPair],
    cfg: &TrainingConfig,
) -> Result<usize> {
    let mut rng = rng::master(cfg.seed);
    let mut state = WganState::new(gen_w, critic_w);
    for _ in 0..cfg.iterations {
        wgan_step(
            gen_spec, gen_w, critic_spec, critic_w, data, cfg, &mut state, &mut rng,
        )?;
    }
    Ok(cfg.iterations)
}

/// Full denoising training loop; returns (first loss, last loss).
pub fn train_ddpm(
    spec: &DiffusionSpec,
    weights: &mut Weights,
    data: &[TrainPair],
    cfg: &TrainingConfig,
) -> Result<(f64, f64)> {
    use rand::Rng as _;
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("empty dataset".into()));
    }
    let mut rng = rng::master(cfg.seed);
    let mut state = AdamState::new(weights);
    let (mut first, mut last) = (0.0, 0.0);
    for it in 0..cfg.iterations {
        let batch: Vec<TrainPair> = (0..cfg.batch_size)
            .map(|_| data[rng.gen_range(0..data.len())].clone())
            .collect();
        let (loss, grads) = ddpm_loss(spec, weights, &batch, &mut rng)?;
        adam_step(weights, &grads, &mut state, cfg);
        if it == 0 {
            first = loss;
        }
        last = loss;
    }
    Ok((first, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::beta_schedule;

    fn small_diffusion_spec() -> DiffusionSpec {
        DiffusionSpec {
            horizon: 2,
            state_dim: 1,
            condition_dim: 1,
            hidden: vec![4],
            activation: Activation::Relu,
            steps: 3,
            betas: beta_schedule(3, 0.0001, 0.5).unwrap(),
            workspace: None,
        }
    }

    #[test]
    fn adam_first_step_bounded_by_learning_rate() {
        let mut w = Weights {
            layers: vec![Layer {
                weight: Tensor::matrix(1, 1, vec![1.0]).unwrap(),
                bias: Tensor::vector(vec![0.5]),
            }],
        };
        let before = w.clone();
        let grads = WeightGrads {
            layers: vec![Layer {
                weight: Tensor::matrix(1, 1, vec![0.37]).unwrap(),
                bias: Tensor::vector(vec![-2.5]),
            }],
        };
        let cfg = TrainingConfig {
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.01,
            ..Default::default()
        };
        let mut st = AdamState::new(&w);
        adam_step(&mut w, &grads, &mut st, &cfg);
        let dw = (w.layers[0].weight.data()[0] - before.layers[0].weight.data()[0]).abs();
        let db = (w.layers[0].bias.data()[0] - before.layers[0].bias.data()[0]).abs();
        assert!(dw <= cfg.learning_rate + 1e-9);
        assert!(db <= cfg.learning_rate + 1e-9);
    }

    #[test]
    fn zero_gradient_means_zero_update() {
        let mut w = Weights {
            layers: vec![Layer {
                weight: Tensor::matrix(1, 1, vec![1.0]).unwrap(),
                bias: Tensor::vector(vec![0.5]),
            }],
        };
        let before = w.clone();
        let grads = WeightGrads::zeros_like(&w);
        let cfg = TrainingConfig::default();
        let mut st = AdamState::new(&w);
        for _ in 0..10 {
            adam_step(&mut w, &grads, &mut st, &cfg);
        }
        assert_eq!(w, before);
    }

    #[test]
    fn adam_converges_on_quadratic_bowl() {
        // f(w) = ||w||^2, gradient 2w, from w0 = 5
        let mut w = Weights {
            layers: vec![Layer {
                weight: Tensor::matrix(1, 1, vec![5.0]).unwrap(),
                bias: Tensor::vector(vec![5.0]),
            }],
        };
        let cfg = TrainingConfig {
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.05,
            ..Default::default()
        };
        let mut st = AdamState::new(&w);
        for _ in 0..500 {
            let grads = WeightGrads {
                layers: vec![Layer {
                    weight: Tensor::matrix(1, 1, vec![2.0 * w.layers[0].weight.data()[0]])
                        .unwrap(),
                    bias: Tensor::vector(vec![2.0 * w.layers[0].bias.data()[0]]),
                }],
            };
            adam_step(&mut w, &grads, &mut st, &cfg);
        }
        assert!(w.layers[0].weight.data()[0].abs() < 0.01);
        assert!(w.layers[0].bias.data()[0].abs() < 0.01);
    }

    #[test]
    fn radam_converges_on_quadratic_bowl() {
        let mut w = Weights {
            layers: vec![Layer {
                weight: Tensor::matrix(1, 1, vec![5.0]).unwrap(),
                bias: Tensor::vector(vec![-5.0]),
            }],
        };
        let cfg = TrainingConfig {
            optimizer: OptimizerKind::Radam,
            learning_rate: 0.05,
            ..Default::default()
        };
        let mut st = AdamState::new(&w);
        for _ in 0..800 {
            let grads = WeightGrads {
                layers: vec![Layer {
                    weight: Tensor::matrix(1, 1, vec![2.0 * w.layers[0].weight.data()[0]])
                        .unwrap(),
                    bias: Tensor::vector(vec![2.0 * w.layers[0].bias.data()[0]]),
                }],
            };
            adam_step(&mut w, &grads, &mut st, &cfg);
        }
        assert!(w.layers[0].weight.data()[0].abs() < 0.01);
        assert!(w.layers[0].bias.data()[0].abs() < 0.01);
    }

    #[test]
    fn ddpm_loss_zero_for_perfect_predictor() {
        // With a single linear layer we cannot echo the injected noise, so
        // use the zero-noise structure instead: a zero-weight network and
        // zero injected noise is not reachable through the public API, so
        // assert the analytic mean for the zero network below and the
        // perfect-predictor case through a crafted identity: the network
        // input contains x_tau = sqrt(abar) x0 + sqrt(1-abar) eps; choosing
        // x0 = 0 makes eps recoverable by scaling, which one linear layer
        // can express exactly.
        let spec = DiffusionSpec {
            horizon: 1,
            state_dim: 1,
            condition_dim: 0,
            hidden: vec![],
            activation: Activation::Relu,
            steps: 1,
            betas: vec![0.19],
            workspace: None,
        };
        // abar = 1 - 0.19 = 0.81, so x_tau = sqrt(1 - abar) eps = sqrt(0.19) eps
        // when x0 = 0; one linear layer recovers eps exactly with W = 1/sqrt(0.19).
        let w = Weights {
            layers: vec![Layer {
                weight: Tensor::matrix(1, 2, vec![1.0 / 0.19f64.sqrt(), 0.0]).unwrap(),
                bias: Tensor::zeros(vec![1]),
            }],
        };
        let batch = vec![TrainPair {
            y: vec![],
            x: vec![0.0],
        }];
        let mut r = rng::master(5);
        let (loss, _) = ddpm_loss(&spec, &w, &batch, &mut r).unwrap();
        assert!(loss < 1e-24, "loss {loss}");
    }

    #[test]
    fn ddpm_loss_zero_network_estimates_noise_energy() {
        // eps_theta = 0 makes the loss E||eps||^2 = H * n
        let spec = small_diffusion_spec();
        let dims = spec.layer_dims();
        let w = Weights {
            layers: dims
                .windows(2)
                .map(|d| Layer {
                    weight: Tensor::zeros(vec![d[1], d[0]]),
                    bias: Tensor::zeros(vec![d[1]]),
                })
                .collect(),
        };
        let mut r = rng::master(17);
        let n = 10_000;
        let batch: Vec<TrainPair> = (0..n)
            .map(|_| TrainPair {
                y: vec![0.3],
                x: vec![0.1, -0.2],
            })
            .collect();
        let (loss, _) = ddpm_loss(&spec, &w, &batch, &mut r).unwrap();
        let want = spec.output_dim() as f64; // chi-square mean, 2 dims
        // stderr of mean of chi2_2 over n draws: sqrt(2*2/n)
        let stderr = (2.0 * want / n as f64).sqrt();
        assert!(
            (loss - want).abs() < 3.0 * stderr,
            "loss {loss} vs {want} +- {stderr}"
        );
    }

    #[test]
    fn ddpm_gradients_match_finite_differences() {
        let spec = small_diffusion_spec();
        let mut r = rng::master(23);
        let w = Weights::init_mlp(&spec.layer_dims(), &mut r);
        let batch = vec![
            TrainPair {
                y: vec![0.2],
                x: vec![0.5, -0.5],
            },
            TrainPair {
                y: vec![-0.4],
                x: vec![0.1, 0.9],
            },
        ];
        // gradients and the finite-difference probes must see identical
        // noise draws: reseed identically per evaluation
        let loss_at = |weights: &Weights| {
            let mut rr = rng::master(777);
            ddpm_loss(&spec, weights, &batch, &mut rr).unwrap().0
        };
        let mut rr = rng::master(777);
        let (_, grads) = ddpm_loss(&spec, &w, &batch, &mut rr).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for li in 0..w.layers.len() {
            for idx in [0_usize, w.layers[li].weight.len() / 2] {
                let mut wp = w.clone();
                wp.layers[li].weight.data_mut()[idx] += h;
                let mut wm = w.clone();
                wm.layers[li].weight.data_mut()[idx] -= h;
                let numeric = (loss_at(&wp) - loss_at(&wm)) / (2.0 * h);
                let analytic = grads.layers[li].weight.data()[idx];
                let denom = numeric.abs().max(analytic.abs()).max(1e-6);
                worst = worst.max((numeric - analytic).abs() / denom);
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn ddpm_training_reduces_loss_on_toy_data() {
        let spec = DiffusionSpec {
            horizon: 1,
            state_dim: 1,
            condition_dim: 1,
            hidden: vec![8],
            activation: Activation::Relu,
            steps: 3,
            betas: beta_schedule(3, 0.0001, 0.5).unwrap(),
            workspace: None,
        };
        let mut r = rng::master(1);
        let mut w = Weights::init_mlp(&spec.layer_dims(), &mut r);
        let data: Vec<TrainPair> = (0..64)
            .map(|i| TrainPair {
                y: vec![0.0],
                x: vec![(i as f64 / 64.0) * 0.8 - 0.4],
            })
            .collect();
        let cfg = TrainingConfig {
            iterations: 500,
            batch_size: 16,
            learning_rate: 0.003,
            optimizer: OptimizerKind::Adam,
            seed: 11,
            ..Default::default()
        };
        let (first, last) = train_ddpm(&spec, &mut w, &data, &cfg).unwrap();
        assert!(
            last < 0.5 * first,
            "loss did not halve: first {first}, last {last}"
        );
    }

    #[test]
    fn critic_weights_clipped_after_step() {
        let gen_spec = GeneratorSpec {
            latent_dim: 2,
            condition_dim: 1,
            hidden: vec![4],
            activation: Activation::Relu,
            horizon: 1,
            state_dim: 1,
            workspace: None,
        };
        let critic_spec = CriticSpec {
            input_dim: 2,
            hidden: vec![4],
            activation: Activation::LeakyRelu { slope: 0.2 },
        };
        let mut r = rng::master(3);
        let mut gw = Weights::init_mlp(&gen_spec.layer_dims(), &mut r);
        let mut cw = Weights::init_mlp(&critic_spec.layer_dims(), &mut r);
        let data = vec![TrainPair {
            y: vec![0.1],
            x: vec![0.7],
        }];
        let cfg = TrainingConfig {
            batch_size: 8,
            critic_steps: 2,
            clip: 0.01,
            ..Default::default()
        };
        let mut st = WganState::new(&gw, &cw);
        let mut rng = rng::master(9);
        wgan_step(
            &gen_spec,
            &mut gw,
            &critic_spec,
            &mut cw,
            &data,
            &cfg,
            &mut st,
            &mut rng,
        )
        .unwrap();
        for layer in &cw.layers {
            assert!(layer
                .weight
                .data()
                .iter()
                .chain(layer.bias.data())
                .all(|v| v.abs() <= cfg.clip + 1e-15));
        }
    }

    #[test]
    fn critic_objective_is_mean_score_difference() {
        let gen_spec = GeneratorSpec {
            latent_dim: 1,
            condition_dim: 0,
            hidden: vec![],
            activation: Activation::Relu,
            horizon: 1,
            state_dim: 1,
            workspace: None,
        };
        // generator: x = 0 * z  -> fake is always 0
        let gw = Weights {
            layers: vec![Layer {
                weight: Tensor::matrix(1, 1, vec![0.0]).unwrap(),
                bias: Tensor::zeros(vec![1]),
            }],
        };
        // critic: C(x) = 3x
        let critic_spec = CriticSpec {
            input_dim: 1,
            hidden: vec![],
            activation: Activation::Relu,
        };
        let cw = Weights {
            layers: vec![Layer {
                weight: Tensor::matrix(1, 1, vec![3.0]).unwrap(),
                bias: Tensor::zeros(vec![1]),
            }],
        };
        let data = vec![
            TrainPair {
                y: vec![],
                x: vec![1.0],
            },
            TrainPair {
                y: vec![],
                x: vec![2.0],
            },
        ];
        let mut r = rng::master(2);
        let obj =
            critic_objective(&gen_spec, &gw, &critic_spec, &cw, &data, &mut r).unwrap();
        // mean real score 3*(1+2)/2 = 4.5, fake score 0
        assert!((obj - 4.5).abs() < 1e-12);
    }

    #[test]
    fn wgan_training_is_seed_reproducible() {
        let gen_spec = GeneratorSpec {
            latent_dim: 2,
            condition_dim: 0,
            hidden: vec![6],
            activation: Activation::LeakyRelu { slope: 0.2 },
            horizon: 1,
            state_dim: 1,
            workspace: None,
        };
        let critic_spec = CriticSpec {
            input_dim: 1,
            hidden: vec![6],
            activation: Activation::LeakyRelu { slope: 0.2 },
        };
        let data: Vec<TrainPair> = (0..32)
            .map(|i| TrainPair {
                y: vec![],
                x: vec![3.0 + 0.01 * (i % 5) as f64],
            })
            .collect();
        let cfg = TrainingConfig {
            iterations: 20,
            batch_size: 8,
            seed: 42,
            ..Default::default()
        };
        let run = || {
            let mut r = rng::master(100);
            let mut gw = Weights::init_mlp(&gen_spec.layer_dims(), &mut r);
            let mut cw = Weights::init_mlp(&critic_spec.layer_dims(), &mut r);
            train_wgan(&gen_spec, &mut gw, &critic_spec, &mut cw, &data, &cfg).unwrap();
            (gw, cw)
        };
        let (g1, c1) = run();
        let (g2, c2) = run();
        assert_eq!(g1, g2);
        assert_eq!(c1, c2);
    }

    #[test]
    fn wgan_toy_generator_approaches_data_mean() {
        // 1-dim data clustered at 3.0; the generator mean should move there
        let gen_spec = GeneratorSpec {
            latent_dim: 1,
            condition_dim: 0,
            hidden: vec![8],
            activation: Activation::LeakyRelu { slope: 0.2 },
            horizon: 1,
            state_dim: 1,
            workspace: None,
        };
        let critic_spec = CriticSpec {
            input_dim: 1,
            hidden: vec![8],
            activation: Activation::LeakyRelu { slope: 0.2 },
        };
        let mut r = rng::master(7);
        let mut gw = Weights::init_mlp(&gen_spec.layer_dims(), &mut r);
        let mut cw = Weights::init_mlp(&critic_spec.layer_dims(), &mut r);
        let data: Vec<TrainPair> = (0..128)
            .map(|_| TrainPair {
                y: vec![],
                x: vec![3.0 + 0.1 * rng::standard_normal(&mut r)],
            })
            .collect();
        let cfg = TrainingConfig {
            iterations: 2000,
            batch_size: 32,
            learning_rate: 0.002,
            optimizer: OptimizerKind::Adam,
            clip: 0.1,
            critic_steps: 5,
            seed: 5,
            ..Default::default()
        };
        train_wgan(&gen_spec, &mut gw, &critic_spec, &mut cw, &data, &cfg).unwrap();
        let mut rr = rng::master(99);
        let mean: f64 = (0..500)
            .map(|_| {
                let z = rng::standard_normal_vec(&mut rr, 1);
                generate_normalized(&gen_spec, &gw, &z, &[]).unwrap()[0]
            })
            .sum::<f64>()
            / 500.0;
        assert!((mean - 3.0).abs() < 0.2, "generated mean {mean}");
    }
}
