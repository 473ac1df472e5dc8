//! Planning environments, a minimal probabilistic-roadmap planner, and
//! trajectory dataset generation.
//!
//! Four built-in environments are provided. Workspace bounds, the UMaze
//! wall, the Obstacles goal box, and the Crossroad left-lane box carry
//! their published values; the remaining geometry (Crossroad corner
//! blocks, Obstacles obstacle layout, City buildings, start/goal zones)
//! is not numerically specified anywhere, so the defaults here are
//! plausible hand-picked layouts, kept in one place and serializable so
//! alternatives can be loaded from JSON config files.
//!
//! Collision checking uses zero inflation: safety margins belong to the
//! property, not the planner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::stl::{eval_boolean, Formula, PredicateExpr, Signal};
use crate::tensor::Tensor;
use crate::verifier::Hyperbox;

/// Axis-aligned obstacle: center and per-dimension half-extents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleBox {
    pub center: Vec<f64>,
    pub half_extents: Vec<f64>,
}

impl ObstacleBox {
    pub fn new(center: Vec<f64>, half_extents: Vec<f64>) -> Self {
        ObstacleBox {
            center,
            half_extents,
        }
    }

    /// Point strictly inside or on the boundary.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.center.iter().zip(&self.half_extents))
            .all(|(x, (c, h))| (x - c).abs() <= *h)
    }

    /// Segment intersection by the slab method; touching counts as a hit.
    pub fn intersects_segment(&self, a: &[f64], b: &[f64]) -> bool {
        let mut t_min = 0.0_f64;
        let mut t_max = 1.0_f64;
        for j in 0..self.center.len() {
            let (lo, hi) = (
                self.center[j] - self.half_extents[j],
                self.center[j] + self.half_extents[j],
            );
            let d = b[j] - a[j];
            if d.abs() < 1e-300 {
                if a[j] < lo || a[j] > hi {
                    return false;
                }
            } else {
                let mut t0 = (lo - a[j]) / d;
                let mut t1 = (hi - a[j]) / d;
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                t_min = t_min.max(t0);
                t_max = t_max.min(t1);
                if t_min > t_max {
                    return false;
                }
            }
        }
        true
    }
}

/// Where starts or goals are drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Zone {
    Point { at: Vec<f64> },
    Area { lower: Vec<f64>, upper: Vec<f64> },
}

impl Zone {
    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        use rand::Rng as _;
        match self {
            Zone::Point { at } => at.clone(),
            Zone::Area { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| if l == u { *l } else { rng.gen_range(*l..*u) })
                .collect(),
        }
    }

    /// A representative fixed point (zone center).
    pub fn representative(&self) -> Vec<f64> {
        match self {
            Zone::Point { at } => at.clone(),
            Zone::Area { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| 0.5 * (l + u))
                .collect(),
        }
    }
}

/// A reach objective: an axis-aligned goal box plus how many consecutive
/// steps the trajectory must remain inside once there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalRegion {
    pub center: Vec<f64>,
    pub half_extents: Vec<f64>,
    /// Window length of the inner globally operator.
    pub settle_steps: usize,
}

/// A planning environment: geometry, horizons, and trajectory layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub name: String,
    pub state_dim: usize,
    pub workspace_lo: Vec<f64>,
    pub workspace_hi: Vec<f64>,
    pub obstacles: Vec<ObstacleBox>,
    /// When present, the property adds an eventually-globally reach term.
    pub goal: Option<GoalRegion>,
    /// When true, the property conjoins per-step workspace membership.
    pub bounds_in_spec: bool,
    /// Generated (target) steps for each model family.
    pub horizon_gan: usize,
    pub horizon_diff: usize,
    /// Condition prefix length in steps.
    pub condition_len: usize,
    pub start: Zone,
    /// Where the planner's goal points are drawn from.
    pub goal_zone: Zone,
}

/// Model family selector for horizons and dataset layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Gan,
    Diff,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gan" => Ok(Variant::Gan),
            "diff" | "ddim" => Ok(Variant::Diff),
            other => Err(Error::InvalidConfig(format!("unknown variant `{other}`"))),
        }
    }
}

impl Environment {
    pub fn horizon(&self, variant: Variant) -> usize {
        match variant {
            Variant::Gan => self.horizon_gan,
            Variant::Diff => self.horizon_diff,
        }
    }

    pub fn workspace_box(&self) -> Hyperbox {
        Hyperbox::new(self.workspace_lo.clone(), self.workspace_hi.clone())
            .expect("workspace bounds validated at construction")
    }

    /// Point collision against every obstacle (touching collides).
    pub fn point_in_collision(&self, p: &[f64]) -> bool {
        self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Segment collision against every obstacle.
    pub fn segment_in_collision(&self, a: &[f64], b: &[f64]) -> bool {
        self.obstacles.iter().any(|o| o.intersects_segment(a, b))
    }

    pub fn inside_workspace(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.workspace_lo.iter().zip(&self.workspace_hi))
            .all(|(x, (l, u))| x >= l && x <= u)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Built-in environment by name: `umaze`, `crossroad`, `obstacles`, `city`.
pub fn builtin_environment(name: &str) -> Result<Environment> {
    match name {
        "umaze" => Ok(Environment {
            name: "umaze".into(),
            state_dim: 2,
            workspace_lo: vec![5.0, 5.0],
            workspace_hi: vec![45.0, 45.0],
            // the published wall: reaches up from the floor in the middle
            obstacles: vec![ObstacleBox::new(vec![25.0, 15.0], vec![5.0, 15.0])],
            goal: None,
            bounds_in_spec: true,
            horizon_gan: 24,
            horizon_diff: 17,
            condition_len: 1,
            start: Zone::Area {
                lower: vec![8.0, 8.0],
                upper: vec![14.0, 40.0],
            },
            goal_zone: Zone::Area {
                lower: vec![36.0, 8.0],
                upper: vec![42.0, 40.0],
            },
        }),
        "crossroad" => Ok(Environment {
            name: "crossroad".into(),
            state_dim: 2,
            workspace_lo: vec![0.0, 0.0],
            workspace_hi: vec![40.0, 40.0],
            // four corner blocks leaving a vertical road x in [16, 24] and
            // a horizontal road y in [27, 35]; the published left-lane box
            // (0,27)..(15,35) is the left arm of the horizontal road
            obstacles: vec![
                ObstacleBox::new(vec![8.0, 13.5], vec![8.0, 13.5]),
                ObstacleBox::new(vec![32.0, 13.5], vec![8.0, 13.5]),
                ObstacleBox::new(vec![8.0, 37.5], vec![8.0, 2.5]),
                ObstacleBox::new(vec![32.0, 37.5], vec![8.0, 2.5]),
            ],
            goal: Some(GoalRegion {
                center: vec![7.5, 31.0],
                half_extents: vec![7.5, 4.0],
                settle_steps: 2,
            }),
            bounds_in_spec: false,
            horizon_gan: 23,
            horizon_diff: 16,
            condition_len: 1,
            start: Zone::Area {
                lower: vec![17.5, 1.0],
                upper: vec![22.5, 4.0],
            },
            goal_zone: Zone::Area {
                lower: vec![1.5, 29.0],
                upper: vec![6.0, 33.0],
            },
        }),
        "obstacles" => Ok(Environment {
            name: "obstacles".into(),
            state_dim: 2,
            workspace_lo: vec![0.0, 0.0],
            workspace_hi: vec![32.0, 32.0],
            obstacles: vec![
                ObstacleBox::new(vec![9.0, 10.0], vec![2.5, 3.0]),
                ObstacleBox::new(vec![21.0, 7.0], vec![2.5, 2.5]),
                ObstacleBox::new(vec![7.0, 23.0], vec![2.5, 2.5]),
                ObstacleBox::new(vec![19.0, 19.0], vec![3.0, 3.0]),
            ],
            // the published goal: unit box around (29, 29)
            goal: Some(GoalRegion {
                center: vec![29.0, 29.0],
                half_extents: vec![1.0, 1.0],
                settle_steps: 0,
            }),
            bounds_in_spec: false,
            horizon_gan: 15,
            horizon_diff: 15,
            condition_len: 1,
            start: Zone::Point { at: vec![2.0, 2.0] },
            goal_zone: Zone::Area {
                lower: vec![28.4, 28.4],
                upper: vec![29.6, 29.6],
            },
        }),
        "city" => Ok(Environment {
            name: "city".into(),
            state_dim: 3,
            workspace_lo: vec![0.0, 0.0, 0.0],
            workspace_hi: vec![50.0, 50.0, 16.0],
            // five building blocks grounded at z = 0
            obstacles: vec![
                ObstacleBox::new(vec![10.0, 10.0, 4.0], vec![4.0, 4.0, 4.0]),
                ObstacleBox::new(vec![25.0, 15.0, 5.0], vec![5.0, 4.0, 5.0]),
                ObstacleBox::new(vec![40.0, 12.0, 3.5], vec![4.0, 5.0, 3.5]),
                ObstacleBox::new(vec![15.0, 30.0, 6.0], vec![5.0, 5.0, 6.0]),
                ObstacleBox::new(vec![33.0, 35.0, 4.5], vec![5.0, 6.0, 4.5]),
            ],
            goal: None,
            bounds_in_spec: false,
            horizon_gan: 30,
            horizon_diff: 15,
            condition_len: 1,
            start: Zone::Area {
                lower: vec![1.0, 15.0, 3.0],
                upper: vec![4.0, 35.0, 10.0],
            },
            goal_zone: Zone::Area {
                lower: vec![46.0, 15.0, 3.0],
                upper: vec![49.0, 35.0, 10.0],
            },
        }),
        other => Err(Error::UnknownEnvironment(other.to_string())),
    }
}

/// Clearance-from-box predicate: `max_i (|s_i - c_i| - l_i) > 0` outside.
fn avoid_predicate(o: &ObstacleBox) -> Formula {
    Formula::atomic(PredicateExpr::InfNormDistance {
        center: o.center.clone(),
        scale: o.half_extents.clone(),
    })
}

/// Membership-with-margin predicate for an axis-aligned box:
/// `min_i (l_i - |s_i - c_i|) > 0` inside.
fn inside_predicate(center: &[f64], half_extents: &[f64]) -> Formula {
    Formula::atomic(PredicateExpr::Negate {
        child: Box::new(PredicateExpr::InfNormDistance {
            center: center.to_vec(),
            scale: half_extents.to_vec(),
        }),
    })
}

/// The environment's property for one model family.
///
/// Safety: globally over the whole trajectory, clear of every obstacle
/// (plus workspace membership when configured). Reach, when a goal is
/// set: eventually enter the goal box and stay for `settle_steps` more
/// steps; the nested windows are sized so the whole formula's horizon
/// equals the trajectory length.
pub fn build_spec(env: &Environment, variant: Variant) -> Formula {
    let h_bar = env.horizon(variant) + env.condition_len - 1;
    let mut avoid_parts: Vec<Formula> = env.obstacles.iter().map(avoid_predicate).collect();
    if env.bounds_in_spec {
        let center: Vec<f64> = env
            .workspace_lo
            .iter()
            .zip(&env.workspace_hi)
            .map(|(l, u)| 0.5 * (l + u))
            .collect();
        let half: Vec<f64> = env
            .workspace_lo
            .iter()
            .zip(&env.workspace_hi)
            .map(|(l, u)| 0.5 * (u - l))
            .collect();
        avoid_parts.push(inside_predicate(&center, &half));
    }
    let safety = Formula::globally(0, h_bar, Formula::conj(avoid_parts));
    match &env.goal {
        None => safety,
        Some(goal) => {
            let stay = Formula::globally(
                0,
                goal.settle_steps,
                inside_predicate(&goal.center, &goal.half_extents),
            );
            let reach = Formula::eventually(0, h_bar - goal.settle_steps, stay);
            Formula::and(safety, reach)
        }
    }
}

/// Shortest collision-free path on a sampled roadmap.
///
/// `n_nodes` uniform collision-free samples are connected to their
/// `k_neighbors` nearest neighbors through segment collision checks, and
/// the start-to-goal path is extracted with Dijkstra on Euclidean edge
/// lengths. Fails when start or goal collide, or the roadmap leaves them
/// disconnected.
pub fn prm_generate(
    env: &Environment,
    start: &[f64],
    goal: &[f64],
    n_nodes: usize,
    k_neighbors: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    if env.point_in_collision(start) || !env.inside_workspace(start) {
        return Err(Error::Planner("start point in collision".into()));
    }
    if env.point_in_collision(goal) || !env.inside_workspace(goal) {
        return Err(Error::Planner("goal point in collision".into()));
    }
    let ws = env.workspace_box();
    let mut nodes: Vec<Vec<f64>> = vec![start.to_vec(), goal.to_vec()];
    let mut guard = 0;
    while nodes.len() < n_nodes + 2 {
        let p = ws.sample_uniform(rng);
        if !env.point_in_collision(&p) {
            nodes.push(p);
        }
        guard += 1;
        if guard > 100 * (n_nodes + 2) {
            return Err(Error::Planner(
                "workspace appears mostly blocked: sampling budget exhausted".into(),
            ));
        }
    }

    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };

    // k-nearest adjacency with collision-checked edges
    let n = nodes.len();
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        let mut by_distance: Vec<(usize, f64)> = (0..n)
            .filter(|j| *j != i)
            .map(|j| (j, dist(&nodes[i], &nodes[j])))
            .collect();
        by_distance.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        for &(j, d) in by_distance.iter().take(k_neighbors) {
            if !env.segment_in_collision(&nodes[i], &nodes[j]) {
                adjacency[i].push((j, d));
                adjacency[j].push((i, d));
            }
        }
    }

    // Dijkstra from node 0 (start) to node 1 (goal)
    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl Ord for Item {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            other
                .0
                .partial_cmp(&self.0)
                .unwrap_or(std::cmp::Ordering::Equal)
        }
    }
    impl PartialOrd for Item {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    let mut cost = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = std::collections::BinaryHeap::new();
    cost[0] = 0.0;
    heap.push(Item(0.0, 0));
    while let Some(Item(c, i)) = heap.pop() {
        if c > cost[i] {
            continue;
        }
        if i == 1 {
            break;
        }
        for &(j, d) in &adjacency[i] {
            let next = c + d;
            if next < cost[j] {
                cost[j] = next;
                prev[j] = i;
                heap.push(Item(next, j));
            }
        }
    }
    if !cost[1].is_finite() {
        return Err(Error::Planner("roadmap disconnected".into()));
    }
    let mut path = vec![1usize];
    while *path.last().unwrap() != 0 {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    Ok(path.into_iter().map(|i| nodes[i].clone()).collect())
}

/// Total polyline length.
pub fn path_length(path: &[Vec<f64>]) -> f64 {
    path.windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// Arc-length-uniform resampling to exactly `target_len` points with both
/// endpoints preserved.
pub fn resample_path(path: &[Vec<f64>], target_len: usize) -> Result<Vec<Vec<f64>>> {
    if path.len() < 2 {
        return Err(Error::Planner("resampling wants at least 2 waypoints".into()));
    }
    if target_len < 2 {
        return Err(Error::Planner("target length must be at least 2".into()));
    }
    let total = path_length(path);
    if total <= 0.0 {
        return Err(Error::Planner("degenerate zero-length path".into()));
    }
    let mut out = Vec::with_capacity(target_len);
    out.push(path[0].clone());
    let mut seg = 0usize;
    let mut seg_start_arc = 0.0;
    let seg_len = |i: usize| {
        path[i]
            .iter()
            .zip(&path[i + 1])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let mut cur_len = seg_len(0);
    for i in 1..target_len - 1 {
        let s = total * i as f64 / (target_len - 1) as f64;
        while seg_start_arc + cur_len < s && seg + 1 < path.len() - 1 {
            seg_start_arc += cur_len;
            seg += 1;
            cur_len = seg_len(seg);
        }
        let t = if cur_len > 0.0 {
            ((s - seg_start_arc) / cur_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(
            path[seg]
                .iter()
                .zip(&path[seg + 1])
                .map(|(a, b)| a + t * (b - a))
                .collect(),
        );
    }
    out.push(path[path.len() - 1].clone());
    Ok(out)
}

/// One dataset record: condition prefix and target trajectory in
/// workspace coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// Prefix, `condition_len x state_dim`.
    pub y: Vec<Vec<f64>>,
    /// Target, `horizon x state_dim`.
    pub x: Vec<Vec<f64>>,
}

impl TrajectoryRecord {
    pub fn condition_tensor(&self) -> Result<Tensor> {
        Ok(Tensor::new(
            vec![self.y.len(), self.y.first().map(|r| r.len()).unwrap_or(0)],
            self.y.iter().flatten().copied().collect(),
        )?)
    }

    pub fn full_signal(&self) -> Result<Signal> {
        let rows: Vec<Vec<f64>> = self.y.iter().chain(self.x.iter()).cloned().collect();
        Signal::from_rows(rows)
    }
}

/// A generated dataset with its provenance metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    pub environment: String,
    pub variant: Variant,
    pub seed: u64,
    pub count: usize,
    pub records: Vec<TrajectoryRecord>,
}

impl TrajectoryDataset {
    pub fn validate(&self) -> Result<()> {
        if self.records.len() != self.count {
            return Err(Error::ShapeMismatch(format!(
                "dataset count {} vs records {}",
                self.count,
                self.records.len()
            )));
        }
        Ok(())
    }
}

/// Settings for [`make_dataset`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_nodes: usize,
    pub k_neighbors: usize,
    /// PRM attempts per record before giving up.
    pub attempts_per_record: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_nodes: 220,
            k_neighbors: 12,
            attempts_per_record: 40,
        }
    }
}

/// Generate `count` property-satisfying records: plan with the roadmap,
/// resample to the trajectory layout, keep only records whose full
/// trajectory passes the Boolean monitor (violators are regenerated).
pub fn make_dataset(
    env: &Environment,
    count: usize,
    variant: Variant,
    seed: u64,
    cfg: &DatasetConfig,
) -> Result<TrajectoryDataset> {
    let spec = build_spec(env, variant);
    let horizon = env.horizon(variant);
    let total_len = horizon + env.condition_len;
    let mut rng = crate::rng::stream(seed, 0);
    let mut records = Vec::with_capacity(count);
    while records.len() < count {
        let mut accepted = false;
        for _attempt in 0..cfg.attempts_per_record {
            let start = env.start.sample(&mut rng);
            let goal = env.goal_zone.sample(&mut rng);
            let Ok(path) = prm_generate(env, &start, &goal, cfg.n_nodes, cfg.k_neighbors, &mut rng)
            else {
                continue;
            };
            let Ok(resampled) = resample_path(&path, total_len) else {
                continue;
            };
            let record = TrajectoryRecord {
                y: resampled[..env.condition_len].to_vec(),
                x: resampled[env.condition_len..].to_vec(),
            };
            let signal = record.full_signal()?;
            if eval_boolean(&spec, &signal, 0)? {
                records.push(record);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::GenerationBudget {
                attempts: cfg.attempts_per_record,
            });
        }
    }
    Ok(TrajectoryDataset {
        environment: env.name.clone(),
        variant,
        seed,
        count,
        records,
    })
}

/// Serialize records as JSON lines (one record per line).
pub fn dataset_to_jsonl(dataset: &TrajectoryDataset) -> Result<String> {
    let mut out = String::new();
    for r in &dataset.records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parse records from JSON lines, skipping blank lines.
pub fn records_from_jsonl(text: &str) -> Result<Vec<TrajectoryRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
