//! Evaluation harness: acceptance ratios, the plain gradient-guidance
//! baseline, latent log-likelihood summaries, and figure-data export.
//!
//! Booleans reported anywhere here are recomputed by the independent STL
//! monitor on the emitted trajectory — never taken from the verifier.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certifier::{pivot_search, PivotSearchConfig};
use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::graph::ComputationGraph;
use crate::latent::TruncatedMixture;
use crate::rng::{self, Rng};
use crate::special::normal_logpdf;
use crate::stl::{eval_boolean, eval_robustness, Formula, Signal};
use crate::tasks::Environment;
use crate::tensor::Tensor;

/// Sampling strategy under evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Latents from the original standard normal.
    Original,
    /// Per-sample gradient ascent from a fresh start.
    Guidance,
    /// Latents from the certified truncated mixture.
    Certified,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Original => "original",
            Method::Guidance => "guidance",
            Method::Certified => "certified",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Method::Original),
            "guidance" => Ok(Method::Guidance),
            "certified" => Ok(Method::Certified),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

/// One evaluated sample.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleRecord {
    pub z: Vec<f64>,
    /// Full conditioned trajectory, row-major `[T, n]`.
    pub trajectory: Vec<Vec<f64>>,
    pub robustness: f64,
    pub satisfied: bool,
    /// Log density of `z` under the standard normal.
    pub log_p: f64,
}

/// All samples drawn for one method.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub drawn: usize,
    pub accepted: usize,
    pub truncated: bool,
    pub records: Vec<SampleRecord>,
}

impl MethodRun {
    pub fn acceptance_ratio(&self) -> f64 {
        if self.drawn == 0 {
            0.0
        } else {
            self.accepted as f64 / self.drawn as f64
        }
    }
}

fn standard_normal_log_density(z: &[f64]) -> f64 {
    z.iter().map(|v| normal_logpdf(*v)).sum()
}

fn record_sample(
    formula: &Formula,
    z: Vec<f64>,
    trajectory: Tensor,
) -> Result<(SampleRecord, bool)> {
    let signal = Signal::new(trajectory.clone())?;
    let robustness = eval_robustness(formula, &signal, 0)?;
    let satisfied = eval_boolean(formula, &signal, 0)?;
    let rows = (0..trajectory.rows())
        .map(|t| trajectory.row(t).to_vec())
        .collect();
    let log_p = standard_normal_log_density(&z);
    Ok((
        SampleRecord {
            z,
            trajectory: rows,
            robustness,
            satisfied,
            log_p,
        },
        satisfied,
    ))
}

/// Draw from `sampler` until `target_accepted` monitor-satisfying
/// trajectories are collected or the draw cap is hit; the ratio is
/// `target / draws`.
///
/// The sampler returns `(z, full trajectory)`; satisfaction is judged by
/// the Boolean monitor only.
pub fn acceptance_ratio<F>(
    mut sampler: F,
    formula: &Formula,
    target_accepted: usize,
    draw_cap: usize,
    method: Method,
) -> Result<MethodRun>
where
    F: FnMut(usize) -> Result<(Vec<f64>, Tensor)>,
{
    if target_accepted == 0 {
        return Err(Error::InvalidConfig("target_accepted must be >= 1".into()));
    }
    let mut run = MethodRun {
        method,
        drawn: 0,
        accepted: 0,
        truncated: false,
        records: Vec::new(),
    };
    while run.accepted < target_accepted {
        if run.drawn >= draw_cap {
            run.truncated = true;
            break;
        }
        let (z, traj) = sampler(run.drawn)?;
        run.drawn += 1;
        let (record, satisfied) = record_sample(formula, z, traj)?;
        if satisfied {
            run.accepted += 1;
        }
        run.records.push(record);
    }
    Ok(run)
}

/// One gradient-guidance draw: ascend the reward from a fresh standard
/// normal start and emit the final latent and its trajectory. No
/// certification is involved.
pub fn guidance_sample(
    generator: &Generator,
    reward_graph: &ComputationGraph,
    condition: &Tensor,
    config: &PivotSearchConfig,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Tensor)> {
    let z0 = rng::standard_normal_vec(rng, generator.latent_dim());
    let y = (generator.condition_dim() > 0).then_some(condition);
    let pivot = pivot_search(reward_graph, y, &z0, config)?;
    let traj = generator.generate_trajectory(&Tensor::vector(pivot.z.clone()), condition)?;
    Ok((pivot.z, traj.reshape(vec![generator.trajectory_len(), generator.state_dim()])?))
}

/// Sum of standard-normal log densities over the first `count` latents.
pub fn loglik_summary(latents: &[Vec<f64>], count: usize) -> Result<f64> {
    if latents.len() < count {
        return Err(Error::InsufficientSamples {
            need: count,
            have: latents.len(),
        });
    }
    Ok(latents[..count]
        .iter()
        .map(|z| standard_normal_log_density(z))
        .sum())
}

/// The three samplers, packaged for `eval` runs.
pub struct Samplers<'a> {
    pub generator: &'a Generator,
    pub reward_graph: &'a ComputationGraph,
    pub condition: &'a Tensor,
    pub mixture: Option<&'a TruncatedMixture>,
    pub guidance_cfg: PivotSearchConfig,
}

impl Samplers<'_> {
    /// Sampler closure for a method; each draw uses its own seed stream so
    /// runs are reproducible and order-independent.
    pub fn draw(
        &self,
        method: Method,
        seed: u64,
        index: usize,
    ) -> Result<(Vec<f64>, Tensor)> {
        let mut rng = rng::stream(seed, index as u64);
        let z = match method {
            Method::Original => rng::standard_normal_vec(&mut rng, self.generator.latent_dim()),
            Method::Guidance => {
                return guidance_sample(
                    self.generator,
                    self.reward_graph,
                    self.condition,
                    &self.guidance_cfg,
                    &mut rng,
                );
            }
            Method::Certified => self
                .mixture
                .ok_or(Error::EmptyCertifiedSet)?
                .sample(&mut rng),
        };
        let traj = self
            .generator
            .generate_trajectory(&Tensor::vector(z.clone()), self.condition)?;
        let shaped = traj.reshape(vec![
            self.generator.trajectory_len(),
            self.generator.state_dim(),
        ])?;
        Ok((z, shaped))
    }
}

/// Write per-step trajectory rows as CSV: method, sample, t, then one
/// column per state dimension.
pub fn write_trajectories_csv(path: &Path, runs: &[MethodRun]) -> Result<usize> {
    let mut file = std::fs::File::create(path)?;
    let dim = runs
        .iter()
        .flat_map(|r| r.records.first())
        .map(|rec| rec.trajectory.first().map(|row| row.len()).unwrap_or(0))
        .next()
        .unwrap_or(0);
    let mut header = String::from("method,sample,t");
    for d in 0..dim {
        header.push_str(&format!(",s{d}"));
    }
    writeln!(file, "{header}")?;
    let mut rows = 0;
    for run in runs {
        for (i, rec) in run.records.iter().enumerate() {
            for (t, point) in rec.trajectory.iter().enumerate() {
                let coords: Vec<String> = point.iter().map(|v| format!("{v}")).collect();
                writeln!(file, "{},{i},{t},{}", run.method.name(), coords.join(","))
                    .map_err(Error::Io)?;
                rows += 1;
            }
        }
    }
    Ok(rows)
}

fn method_color(method: Method) -> &'static str {
    match method {
        Method::Original => "#7b2fbe",
        Method::Guidance => "#d43d3d",
        Method::Certified => "#19a7b8",
    }
}

/// Static SVG overlay: workspace frame, obstacle rectangles, one polyline
/// per trajectory colored by method. Three-dimensional environments are
/// projected onto the first two axes.
pub fn write_overlay_svg(path: &Path, env: &Environment, runs: &[MethodRun]) -> Result<()> {
    let (lo, hi) = (&env.workspace_lo, &env.workspace_hi);
    let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
    let scale = 600.0 / w.max(h);
    let px = |x: f64| (x - lo[0]) * scale + 20.0;
    // flip the vertical axis so +y points up
    let py = |y: f64| (hi[1] - y) * scale + 20.0;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n",
        w * scale + 40.0,
        h * scale + 40.0
    ));
    svg.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        px(lo[0]),
        py(hi[1]),
        w * scale,
        h * scale
    ));
    for o in &env.obstacles {
        let x0 = o.center[0] - o.half_extents[0];
        let y1 = o.center[1] + o.half_extents[1];
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#bbbbbb\" stroke=\"#555555\"/>\n",
            px(x0),
            py(y1),
            2.0 * o.half_extents[0] * scale,
            2.0 * o.half_extents[1] * scale
        ));
    }
    for run in runs {
        let color = method_color(run.method);
        for rec in &run.records {
            let points: Vec<String> = rec
                .trajectory
                .iter()
                .map(|p| format!("{:.2},{:.2}", px(p[0]), py(p[1])))
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1\" opacity=\"0.6\"/>\n",
                points.join(" "),
                color
            ));
        }
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{Activation, GeneratorSpec, Layer, Weights};
    use crate::stl::PredicateExpr;
    use crate::tasks::builtin_environment;
    use crate::verifier::Hyperbox;

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
    fn certified_sampler_accepts_every_draw() {
        let gen = identity_generator();
        let f = s_positive();
        let mixture =
            TruncatedMixture::from_boxes(vec![Hyperbox::new(vec![0.5], vec![2.0]).unwrap()])
                .unwrap();
        let reward = crate::certifier::build_reward_graph(&gen, &f).unwrap();
        let samplers = Samplers {
            generator: &gen,
            reward_graph: &reward,
            condition: &Tensor::zeros(vec![0]),
            mixture: Some(&mixture),
            guidance_cfg: PivotSearchConfig::default(),
        };
        let run = acceptance_ratio(
            |i| samplers.draw(Method::Certified, 5, i),
            &f,
            200,
            1_000_000,
            Method::Certified,
        )
        .unwrap();
        assert_eq!(run.acceptance_ratio(), 1.0);
        assert_eq!(run.drawn, 200);
        assert!(!run.truncated);
    }

    #[test]
    fn never_satisfying_sampler_truncates() {
        let f = s_positive();
        let run = acceptance_ratio(
            |_| Ok((vec![-1.0], Tensor::new(vec![1, 1], vec![-1.0]).unwrap())),
            &f,
            200,
            5_000,
            Method::Original,
        )
        .unwrap();
        assert!(run.truncated);
        assert_eq!(run.accepted, 0);
        assert!(run.acceptance_ratio() <= 200.0 / 5_000.0);
    }

    #[test]
    fn alternating_sampler_gives_exactly_half() {
        let f = s_positive();
        // violate on even draws, satisfy on odd: exactly 2 draws per accept
        let run = acceptance_ratio(
            |i| {
                let v = if i % 2 == 0 { -1.0 } else { 1.0 };
                Ok((vec![v], Tensor::new(vec![1, 1], vec![v]).unwrap()))
            },
            &f,
            100,
            1_000_000,
            Method::Original,
        )
        .unwrap();
        assert_eq!(run.acceptance_ratio(), 0.5);
        assert!(!run.truncated);
    }

    #[test]
    fn guidance_improves_reward_and_accepts_on_identity() {
        let gen = identity_generator();
        let f = s_positive();
        let reward = crate::certifier::build_reward_graph(&gen, &f).unwrap();
        let cfg = PivotSearchConfig {
            step_size: 0.1,
            iterations: 100,
            restarts: 1,
        };
        let mut satisfied = 0;
        for i in 0..50 {
            let mut r = rng::stream(77, i);
            let (z, traj) = guidance_sample(&gen, &reward, &Tensor::zeros(vec![0]), &cfg, &mut r)
                .unwrap();
            // ascent on r(z) = z moves strictly upward from any start
            let sig = Signal::new(traj).unwrap();
            let rob = eval_robustness(&f, &sig, 0).unwrap();
            assert!(rob >= z[0] - 1e-12 || rob > 0.0);
            if eval_boolean(&f, &sig, 0).unwrap() {
                satisfied += 1;
            }
        }
        assert_eq!(satisfied, 50); // every ascent ends positive
    }

    #[test]
    fn loglik_summary_closed_form_at_zero() {
        let latents = vec![vec![0.0; 24]; 200];
        let total = loglik_summary(&latents, 200).unwrap();
        let want = 200.0 * (-(24.0 / 2.0) * (2.0 * std::f64::consts::PI).ln());
        assert!((total - want).abs() < 1e-9, "{total} vs {want}");
        assert!((want - -4406.0).abs() < 1.0); // near the hand value
        assert!(matches!(
            loglik_summary(&latents, 300),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn loglik_summary_is_permutation_invariant() {
        let mut r = rng::master(9);
        let latents: Vec<Vec<f64>> = (0..50)
            .map(|_| rng::standard_normal_vec(&mut r, 3))
            .collect();
        let a = loglik_summary(&latents, 50).unwrap();
        let mut reversed = latents.clone();
        reversed.reverse();
        let b = loglik_summary(&reversed, 50).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn csv_and_svg_export() {
        let env = builtin_environment("obstacles").unwrap();
        let run = MethodRun {
            method: Method::Certified,
            drawn: 2,
            accepted: 2,
            truncated: false,
            records: vec![
                SampleRecord {
                    z: vec![0.0],
                    trajectory: vec![vec![2.0, 2.0], vec![5.0, 6.0], vec![9.0, 9.0]],
                    robustness: 1.0,
                    satisfied: true,
                    log_p: -0.9,
                },
                SampleRecord {
                    z: vec![0.1],
                    trajectory: vec![vec![2.0, 2.0], vec![4.0, 7.0], vec![8.0, 10.0]],
                    robustness: 0.5,
                    satisfied: true,
                    log_p: -0.9,
                },
            ],
        };
        let dir = std::env::temp_dir().join("certiplan_eval_test");
        std::fs::create_dir_all(&dir).unwrap();
        let csv = dir.join("traj.csv");
        let rows = write_trajectories_csv(&csv, std::slice::from_ref(&run)).unwrap();
        assert_eq!(rows, 6); // sum of trajectory lengths
        let text = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().count(), 7); // header + rows

        let svg = dir.join("traj.svg");
        write_overlay_svg(&svg, &env, std::slice::from_ref(&run)).unwrap();
        let text = std::fs::read_to_string(&svg).unwrap();
        assert_eq!(text.matches("<polyline").count(), 2);
        // one rectangle per obstacle plus the workspace frame
        assert_eq!(text.matches("<rect").count(), env.obstacles.len() + 1);
        std::fs::remove_dir_all(&dir).ok();
    }
}
