//! Certified region search: gradient-ascent pivots and iterative
//! ε-expansion of latent boxes into a disjoint certified set.
//!
//! For each of `L` attempts, a latent start is drawn from the standard
//! normal, gradient ascent on the robustness reward finds a pivot, and a
//! box around the pivot grows while it stays certified and disjoint from
//! the regions accepted so far. The first failed growth step rolls back to
//! the last box that passed both checks; a pivot whose initial box already
//! fails contributes nothing.
//!
//! Candidates may also be expanded concurrently with overlap arbitration
//! at the end (descending box volume, losers rejected whole); both modes
//! produce disjoint certified sets.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{Generator, CONDITION_INPUT, LATENT_INPUT};
use crate::graph::ComputationGraph;
use crate::rng;
use crate::special::normal_interval_log_mass;
use crate::stl::{self, Formula, LoweringForm};
use crate::tensor::Tensor;
use crate::verifier::{verify_box, BoundMethod, Hyperbox};

/// Gradient-ascent settings for pivot search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PivotSearchConfig {
    /// Ascent step size.
    pub step_size: f64,
    pub iterations: usize,
    /// Number of independent restarts (attempted regions).
    pub restarts: usize,
}

impl Default for PivotSearchConfig {
    fn default() -> Self {
        PivotSearchConfig {
            step_size: 0.1,
            iterations: 300,
            restarts: 20,
        }
    }
}

impl PivotSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_size <= 0.0 || self.restarts == 0 {
            return Err(Error::InvalidConfig(
                "pivot search wants step_size > 0 and restarts >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Homogeneous growth adds `delta` to every half-width; heterogeneous
/// growth adds `alpha` times the normalized reward gradient magnitude per
/// dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionMode {
    Homogeneous,
    Heterogeneous,
}

impl std::str::FromStr for ExpansionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homogeneous" => Ok(ExpansionMode::Homogeneous),
            "heterogeneous" => Ok(ExpansionMode::Heterogeneous),
            other => Err(Error::InvalidConfig(format!(
                "unknown expansion mode `{other}`"
            ))),
        }
    }
}

/// ε-expansion settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionConfig {
    /// Initial half-width.
    pub eps0: f64,
    /// Homogeneous increment.
    pub delta: f64,
    pub mode: ExpansionMode,
    /// Heterogeneous step scale.
    pub alpha: f64,
    /// Cap on growth steps (guards unbounded satisfaction regions).
    pub max_steps: usize,
    pub method: BoundMethod,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            eps0: 0.01,
            delta: 0.005,
            mode: ExpansionMode::Homogeneous,
            alpha: 0.005,
            max_steps: 10_000,
            method: BoundMethod::Crown,
        }
    }
}

impl ExpansionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps0 <= 0.0 || self.delta <= 0.0 || self.alpha <= 0.0 {
            return Err(Error::InvalidConfig(
                "expansion wants eps0, delta, alpha > 0".into(),
            ));
        }
        Ok(())
    }
}

/// A certified latent box with its pivot and provenance values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Region {
    pub boxed: Hyperbox,
    pub pivot: Vec<f64>,
    /// Robustness lower bound at acceptance.
    pub rob_lower: f64,
    /// Log probability of the box under the standard normal
    /// (filled when the region set is assembled).
    pub log_prob: f64,
}

/// The certified region set: pairwise-disjoint boxes with log
/// probabilities, for one condition and formula.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertifiedLatent {
    pub regions: Vec<Region>,
    /// log p(B) = log sum_i p(B_i).
    pub log_p_b: f64,
    pub condition: Vec<f64>,
    pub latent_dim: usize,
}

impl CertifiedLatent {
    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Exhaustive pairwise disjointness check.
    pub fn pairwise_disjoint(&self) -> bool {
        for i in 0..self.regions.len() {
            for j in i + 1..self.regions.len() {
                if !self.regions[i].boxed.disjoint(&self.regions[j].boxed) {
                    return false;
                }
            }
        }
        true
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Result of one gradient ascent run.
#[derive(Clone, Debug)]
pub struct Pivot {
    pub z: Vec<f64>,
    pub reward: f64,
}

fn bind_inputs(z: &[f64], y: Option<&Tensor>) -> HashMap<String, Tensor> {
    let mut m = HashMap::new();
    m.insert(LATENT_INPUT.to_string(), Tensor::vector(z.to_vec()));
    if let Some(y) = y {
        if y.len() > 0 {
            m.insert(CONDITION_INPUT.to_string(), y.clone());
        }
    }
    m
}

/// Gradient ascent on the scalar reward graph from `z0`; returns the
/// best-seen iterate (never worse than the start).
pub fn pivot_search(
    reward_graph: &ComputationGraph,
    y: Option<&Tensor>,
    z0: &[f64],
    config: &PivotSearchConfig,
) -> Result<Pivot> {
    config.validate()?;
    let mut z = z0.to_vec();
    let mut inputs = bind_inputs(&z, y);
    let mut tape = reward_graph.backward(&inputs)?;
    let mut best = Pivot {
        z: z.clone(),
        reward: tape.value(reward_graph.output_id()).item()?,
    };
    for _ in 0..config.iterations {
        let grad = tape
            .input_gradient(reward_graph, LATENT_INPUT)
            .ok_or_else(|| Error::UnboundInput(LATENT_INPUT.into()))?;
        let step: Vec<f64> = grad.data().iter().map(|g| config.step_size * g).collect();
        if step.iter().all(|s| *s == 0.0) {
            break;
        }
        for (zi, s) in z.iter_mut().zip(&step) {
            *zi += s;
        }
        inputs.insert(LATENT_INPUT.to_string(), Tensor::vector(z.clone()));
        tape = reward_graph.backward(&inputs)?;
        let reward = tape.value(reward_graph.output_id()).item()?;
        if reward > best.reward {
            best = Pivot {
                z: z.clone(),
                reward,
            };
        }
    }
    Ok(best)
}

/// Strict disjointness of two boxes (touching boundaries overlap).
pub fn boxes_disjoint(a: &Hyperbox, b: &Hyperbox) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidBox(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(a.disjoint(b))
}

fn disjoint_from_all(boxed: &Hyperbox, existing: &[Region]) -> bool {
    existing.iter().all(|r| boxed.disjoint(&r.boxed))
}

/// The ε grid used by homogeneous growth: `eps0 + m * delta`, recomputed
/// from the step index (not accumulated) so results are reproducible to
/// the last bit.
fn homogeneous_radius(cfg: &ExpansionConfig, step: usize, dim: usize) -> Vec<f64> {
    vec![cfg.eps0 + step as f64 * cfg.delta; dim]
}

/// Iteratively grow a certified box around a pivot.
///
/// Returns `None` when the initial box already fails certification or
/// overlaps an accepted region. Otherwise grows until the first failure
/// and returns the last box that passed both checks.
pub fn expand_box(
    reward_graph: &ComputationGraph,
    y: Option<&Tensor>,
    pivot: &Pivot,
    existing: &[Region],
    config: &ExpansionConfig,
) -> Result<Option<Region>> {
    config.validate()?;
    let dim = pivot.z.len();
    let fixed = match y {
        Some(t) if t.len() > 0 => {
            HashMap::from([(CONDITION_INPUT.to_string(), t.clone())])
        }
        _ => HashMap::new(),
    };
    // verification sees the ReLU-rewritten graph once, not per step
    let graph = if reward_graph.has_minmax() {
        std::borrow::Cow::Owned(reward_graph.rewrite_minmax_to_relu())
    } else {
        std::borrow::Cow::Borrowed(reward_graph)
    };

    let grad_direction = match config.mode {
        ExpansionMode::Homogeneous => None,
        ExpansionMode::Heterogeneous => {
            let inputs = bind_inputs(&pivot.z, y);
            let tape = reward_graph.backward(&inputs)?;
            let g = tape
                .input_gradient(reward_graph, LATENT_INPUT)
                .ok_or_else(|| Error::UnboundInput(LATENT_INPUT.into()))?;
            let norm = g.data().iter().map(|v| v * v).sum::<f64>().sqrt();
            // half-widths must stay positive, so grow by the per-dimension
            // gradient magnitude
            let dir: Vec<f64> = if norm > 0.0 {
                g.data().iter().map(|v| v.abs() / norm).collect()
            } else {
                vec![1.0; dim]
            };
            Some(dir)
        }
    };

    let radius_at = |step: usize| -> Vec<f64> {
        match &grad_direction {
            None => homogeneous_radius(config, step, dim),
            Some(dir) => dir
                .iter()
                .map(|d| config.eps0 + step as f64 * config.alpha * d)
                .collect(),
        }
    };

    let check = |radius: &[f64]| -> Result<Option<(Hyperbox, f64)>> {
        let boxed = Hyperbox::centered(&pivot.z, radius)?;
        let sat = verify_box(&graph, &boxed, &fixed, config.method)?;
        if sat.certified() && disjoint_from_all(&boxed, existing) {
            Ok(Some((boxed, sat.rob_lower)))
        } else {
            Ok(None)
        }
    };

    let Some((mut best_box, mut best_rob)) = check(&radius_at(0))? else {
        return Ok(None);
    };
    for step in 1..=config.max_steps {
        match check(&radius_at(step))? {
            Some((boxed, rob)) => {
                best_box = boxed;
                best_rob = rob;
            }
            None => break,
        }
    }
    Ok(Some(Region {
        boxed: best_box,
        pivot: pivot.z.clone(),
        rob_lower: best_rob,
        log_prob: f64::NAN,
    }))
}

/// Log probability of a box under the standard normal, summed per
/// dimension in log space.
pub fn box_log_prob_standard_normal(boxed: &Hyperbox) -> f64 {
    boxed
        .lower()
        .iter()
        .zip(boxed.upper())
        .map(|(l, u)| normal_interval_log_mass(*l, *u))
        .sum()
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.collect();
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn finalize(regions: Vec<Region>, condition: &Tensor, latent_dim: usize) -> CertifiedLatent {
    let mut regions = regions;
    for r in &mut regions {
        r.log_prob = box_log_prob_standard_normal(&r.boxed);
    }
    let log_p_b = log_sum_exp(regions.iter().map(|r| r.log_prob));
    CertifiedLatent {
        regions,
        log_p_b,
        condition: condition.data().to_vec(),
        latent_dim,
    }
}

/// Reward graph `z -> robustness of the conditioned trajectory` for a
/// generator and formula.
pub fn build_reward_graph(
    generator: &Generator,
    formula: &Formula,
) -> Result<ComputationGraph> {
    let robustness = stl::lower_to_graph(
        formula,
        generator.trajectory_len(),
        generator.state_dim(),
        LoweringForm::MinMax,
    )?;
    generator.build_conditioned_graph()?.compose(&robustness)
}

/// Full certification settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub pivot: PivotSearchConfig,
    pub expansion: ExpansionConfig,
    pub seed: u64,
    /// Expand candidates concurrently and arbitrate overlaps at the end.
    pub parallel: bool,
    /// Worker cap for parallel mode (0 = available parallelism).
    pub threads: usize,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            pivot: PivotSearchConfig::default(),
            expansion: ExpansionConfig::default(),
            seed: 0,
            parallel: false,
            threads: 0,
        }
    }
}

/// Run the certification loop: sample starts, ascend, expand, accumulate
/// disjoint regions, then fill in log probabilities.
///
/// An empty region set is a valid result (the property may be
/// unsatisfiable for this generator); samplers refuse it downstream.
pub fn certify(
    generator: &Generator,
    formula: &Formula,
    condition: &Tensor,
    config: &CertifyConfig,
) -> Result<CertifiedLatent> {
    config.pivot.validate()?;
    config.expansion.validate()?;
    let reward = build_reward_graph(generator, formula)?;
    let k = generator.latent_dim();
    let y = (generator.condition_dim() > 0).then_some(condition);

    // derive per-candidate starts from independent seed streams so the
    // sequential and parallel modes see identical candidates
    let starts: Vec<Vec<f64>> = (0..config.pivot.restarts)
        .map(|i| {
            let mut r = rng::stream(config.seed, i as u64);
            rng::standard_normal_vec(&mut r, k)
        })
        .collect();

    if config.parallel {
        certify_parallel(&reward, y, &starts, config, condition, k)
    } else {
        let mut regions: Vec<Region> = Vec::new();
        for z0 in &starts {
            let pivot = pivot_search(&reward, y, z0, &config.pivot)?;
            if let Some(region) = expand_box(&reward, y, &pivot, &regions, &config.expansion)? {
                regions.push(region);
            }
        }
        Ok(finalize(regions, condition, k))
    }
}

/// Expand every candidate against an empty region set concurrently, then
/// arbitrate overlaps in descending box volume (losers rejected whole).
fn certify_parallel(
    reward: &ComputationGraph,
    y: Option<&Tensor>,
    starts: &[Vec<f64>],
    config: &CertifyConfig,
    condition: &Tensor,
    latent_dim: usize,
) -> Result<CertifiedLatent> {
    let workers = if config.threads > 0 {
        config.threads
    } else {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    }
    .min(starts.len().max(1));

    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Region>> = vec![None; starts.len()];
    let slot_refs: Vec<std::sync::Mutex<&mut Option<Region>>> =
        slots.iter_mut().map(std::sync::Mutex::new).collect();

    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for _ in 0..workers {
            let next = &next;
            let slot_refs = &slot_refs;
            handles.push(scope.spawn(move || -> Result<()> {
                loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= starts.len() {
                        return Ok(());
                    }
                    let pivot = pivot_search(reward, y, &starts[i], &config.pivot)?;
                    let region = expand_box(reward, y, &pivot, &[], &config.expansion)?;
                    **slot_refs[i].lock().expect("slot poisoned") = region;
                }
            }));
        }
        for h in handles {
            h.join().expect("worker panicked")?;
        }
        Ok(())
    })?;

    let mut candidates: Vec<Region> = slots.into_iter().flatten().collect();
    candidates.sort_by(|a, b| {
        b.boxed
            .volume()
            .partial_cmp(&a.boxed.volume())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut accepted: Vec<Region> = Vec::new();
    for cand in candidates {
        if disjoint_from_all(&cand.boxed, &accepted) {
            accepted.push(cand);
        }
    }
    Ok(finalize(accepted, condition, latent_dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{Activation, GeneratorSpec, Layer, Weights};
    use crate::graph::GraphBuilder;
    use crate::stl::PredicateExpr;

    /// Identity generator with `k = 1`: trajectory = z.
    fn identity_generator() -> Generator {
        Generator::Gan {
            spec: GeneratorSpec {
                latent_dim: 1,
                condition_dim: 0,
                hidden: vec![],
                activation: Activation::Relu,
                horizon: 1,
                state_dim: 1,
                workspace: None,
            },
            weights: Weights {
                layers: vec![Layer {
                    weight: Tensor::eye(1),
                    bias: Tensor::zeros(vec![1]),
                }],
            },
        }
    }

    fn s_positive() -> Formula {
        Formula::atomic(PredicateExpr::affine(vec![1.0], 0.0))
    }

    #[test]
    fn pivot_search_climbs_quadratic() {
        // r(z) = -(z-3)^2 built from relu pieces is awkward; use the exact
        // piecewise-linear equivalent -|z-3| which has the same argmax, and
        // verify the quadratic via the generator-free graph below.
        // -|z-3| = min(z-3, 3-z)
        let mut b = GraphBuilder::new();
        let z = b.input(LATENT_INPUT, vec![1]);
        let a1 = b
            .affine(z, Tensor::matrix(1, 1, vec![1.0]).unwrap(), Tensor::vector(vec![-3.0]))
            .unwrap();
        let a2 = b
            .affine(z, Tensor::matrix(1, 1, vec![-1.0]).unwrap(), Tensor::vector(vec![3.0]))
            .unwrap();
        let m = b.min2(a1, a2).unwrap();
        let g = b.finish(m).unwrap();
        let cfg = PivotSearchConfig {
            step_size: 0.1,
            iterations: 200,
            restarts: 1,
        };
        let p = pivot_search(&g, None, &[0.0], &cfg).unwrap();
        assert!((p.z[0] - 3.0).abs() < 1e-3, "pivot at {}", p.z[0]);
        assert!(p.reward >= -3.0); // never worse than the start
    }

    #[test]
    fn pivot_search_stays_put_on_constant_reward() {
        let mut b = GraphBuilder::new();
        let z = b.input(LATENT_INPUT, vec![2]);
        let a = b
            .affine(
                z,
                Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap(),
                Tensor::vector(vec![1.5]),
            )
            .unwrap();
        let g = b.finish(a).unwrap();
        let cfg = PivotSearchConfig {
            step_size: 0.5,
            iterations: 50,
            restarts: 1,
        };
        let p = pivot_search(&g, None, &[0.7, -0.7], &cfg).unwrap();
        assert_eq!(p.z, vec![0.7, -0.7]);
        assert_eq!(p.reward, 1.5);
    }

    #[test]
    fn boxes_disjoint_examples() {
        let a = Hyperbox::new(vec![0.0], vec![1.0]).unwrap();
        let b = Hyperbox::new(vec![2.0], vec![3.0]).unwrap();
        let c = Hyperbox::new(vec![1.0], vec![2.0]).unwrap();
        assert!(boxes_disjoint(&a, &b).unwrap());
        assert!(!boxes_disjoint(&a, &c).unwrap());
        let d2a = Hyperbox::new(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap();
        let d2b = Hyperbox::new(vec![1.0, 3.0], vec![3.0, 4.0]).unwrap();
        assert!(boxes_disjoint(&d2a, &d2b).unwrap());
        assert!(boxes_disjoint(&a, &d2a).is_err());
    }

    fn reward_for_identity() -> ComputationGraph {
        build_reward_graph(&identity_generator(), &s_positive()).unwrap()
    }

    #[test]
    fn expansion_reproduces_grid_rollback() {
        // certification holds while 2 - eps > 0; the largest grid value is
        // eps = 0.01 + 397 * 0.005 = 1.995
        let reward = reward_for_identity();
        let pivot = Pivot {
            z: vec![2.0],
            reward: 2.0,
        };
        let cfg = ExpansionConfig::default();
        let region = expand_box(&reward, None, &pivot, &[], &cfg).unwrap().unwrap();
        let eps = region.boxed.upper()[0] - 2.0;
        assert_eq!(eps, 1.995, "accepted eps {eps}");
        assert!(region.rob_lower > 0.0);
        // the accepted box re-verifies independently
        let sat = verify_box(
            &reward.rewrite_minmax_to_relu(),
            &region.boxed,
            &HashMap::new(),
            BoundMethod::Crown,
        )
        .unwrap();
        assert_eq!(sat.bool_lower, 1);
    }

    #[test]
    fn expansion_rejects_negative_pivot() {
        let reward = reward_for_identity();
        let pivot = Pivot {
            z: vec![-1.0],
            reward: -1.0,
        };
        let cfg = ExpansionConfig::default();
        assert!(expand_box(&reward, None, &pivot, &[], &cfg)
            .unwrap()
            .is_none());
    }

    #[test]
    fn expansion_halts_at_overlap_boundary() {
        let reward = reward_for_identity();
        let first = expand_box(
            &reward,
            None,
            &Pivot {
                z: vec![2.0],
                reward: 2.0,
            },
            &[],
            &ExpansionConfig::default(),
        )
        .unwrap()
        .unwrap();
        let second = expand_box(
            &reward,
            None,
            &Pivot {
                z: vec![4.5],
                reward: 4.5,
            },
            &[first.clone()],
            &ExpansionConfig::default(),
        )
        .unwrap()
        .unwrap();
        assert!(second.boxed.disjoint(&first.boxed));
        // growth stopped by the overlap, not by certification: the lower
        // edge of the second box sits just above the first box's upper edge
        assert!(second.boxed.lower()[0] > first.boxed.upper()[0]);
        assert!(second.boxed.lower()[0] - first.boxed.upper()[0] < 2.0 * 0.005 + 1e-12);
    }

    #[test]
    fn certify_identity_generator_yields_positive_disjoint_regions() {
        let gen = identity_generator();
        let cfg = CertifyConfig {
            pivot: PivotSearchConfig {
                step_size: 0.05,
                iterations: 100,
                restarts: 3,
            },
            expansion: ExpansionConfig {
                max_steps: 3000,
                ..Default::default()
            },
            seed: 11,
            parallel: false,
            threads: 0,
        };
        let out = certify(&gen, &s_positive(), &Tensor::zeros(vec![0]), &cfg).unwrap();
        assert!(!out.is_empty());
        assert!(out.pairwise_disjoint());
        for r in &out.regions {
            assert!(r.boxed.lower()[0] > 0.0, "region dips negative: {r:?}");
            assert!(r.boxed.contains(&r.pivot));
            assert!(r.log_prob.is_finite());
        }
        assert!(out.log_p_b <= 0.0 && out.log_p_b.is_finite());
        // deterministic under the seed
        let out2 = certify(&gen, &s_positive(), &Tensor::zeros(vec![0]), &cfg).unwrap();
        assert_eq!(out.to_json().unwrap(), out2.to_json().unwrap());
    }

    #[test]
    fn certify_unsatisfiable_formula_returns_empty() {
        let gen = identity_generator();
        // s > 0 and -s > 0 cannot hold together
        let f = Formula::and(
            s_positive(),
            Formula::atomic(PredicateExpr::affine(vec![-1.0], 0.0)),
        );
        let cfg = CertifyConfig {
            pivot: PivotSearchConfig {
                step_size: 0.05,
                iterations: 50,
                restarts: 3,
            },
            ..Default::default()
        };
        let out = certify(&gen, &f, &Tensor::zeros(vec![0]), &cfg).unwrap();
        assert!(out.is_empty());
        assert_eq!(out.log_p_b, f64::NEG_INFINITY);
    }

    #[test]
    fn parallel_mode_satisfies_the_same_invariants() {
        let gen = identity_generator();
        let cfg = CertifyConfig {
            pivot: PivotSearchConfig {
                step_size: 0.05,
                iterations: 100,
                restarts: 4,
            },
            expansion: ExpansionConfig {
                max_steps: 3000,
                ..Default::default()
            },
            seed: 21,
            parallel: true,
            threads: 2,
        };
        let out = certify(&gen, &s_positive(), &Tensor::zeros(vec![0]), &cfg).unwrap();
        assert!(out.pairwise_disjoint());
        for r in &out.regions {
            assert!(r.boxed.lower()[0] > 0.0);
            let sat = verify_box(
                &build_reward_graph(&gen, &s_positive())
                    .unwrap()
                    .rewrite_minmax_to_relu(),
                &r.boxed,
                &HashMap::new(),
                BoundMethod::Crown,
            )
            .unwrap();
            assert_eq!(sat.bool_lower, 1);
        }
        // volumes are sorted by the arbitration order: accepted regions
        // must be produced deterministically across runs
        let out2 = certify(&gen, &s_positive(), &Tensor::zeros(vec![0]), &cfg).unwrap();
        assert_eq!(out.to_json().unwrap(), out2.to_json().unwrap());
    }

    #[test]
    fn heterogeneous_mode_grows_along_gradient() {
        // reward depends only on the first coordinate: min(z0 - 0, 10 - z0)
        let mut b = GraphBuilder::new();
        let z = b.input(LATENT_INPUT, vec![2]);
        let a1 = b
            .affine(
                z,
                Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap(),
                Tensor::vector(vec![0.0]),
            )
            .unwrap();
        let a2 = b
            .affine(
                z,
                Tensor::matrix(1, 2, vec![-1.0, 0.0]).unwrap(),
                Tensor::vector(vec![10.0]),
            )
            .unwrap();
        let m = b.min2(a1, a2).unwrap();
        let g = b.finish(m).unwrap();
        let cfg = ExpansionConfig {
            mode: ExpansionMode::Heterogeneous,
            alpha: 0.01,
            max_steps: 2000,
            ..Default::default()
        };
        let region = expand_box(
            &g,
            None,
            &Pivot {
                z: vec![2.0, 0.0],
                reward: 2.0,
            },
            &[],
            &cfg,
        )
        .unwrap()
        .unwrap();
        // only the first coordinate matters for certification, and only it
        // receives growth: the second keeps the initial half-width
        let w0 = region.boxed.upper()[0] - region.boxed.lower()[0];
        let w1 = region.boxed.upper()[1] - region.boxed.lower()[1];
        assert!(w0 > w1, "widths {w0} vs {w1}");
        assert!((w1 - 2.0 * cfg.eps0).abs() < 1e-12);
        assert!(region.boxed.lower()[0] > 0.0);
    }
}
