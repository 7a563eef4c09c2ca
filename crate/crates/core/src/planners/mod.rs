//! Cartesian RRT and RRT-connect over axis-aligned box scenes, and the
//! conversion of their waypoint paths into baseline joint trajectories.

mod baseline;

pub use baseline::{path_to_joint_trajectory, BaselineFrame, BaselineTrajectory};

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Aabb, Layout};
use crate::Vec3;

/// Spacing of collision samples along a segment.
pub const COLLISION_RESOLUTION: f64 = 0.001;
pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("{which} is outside the bounds or inside an obstacle")]
    InvalidEndpoint { which: &'static str },
    #[error("no path found after expanding {nodes_expanded} nodes")]
    NoPath { nodes_expanded: usize },
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
    #[error("scene file: {0}")]
    Io(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningScene {
    pub schema_version: u32,
    pub bounds: Aabb,
    #[serde(default)]
    pub obstacles: Vec<Aabb>,
}

impl PlanningScene {
    pub fn open(bounds: Aabb) -> Self {
        PlanningScene {
            schema_version: SCENE_SCHEMA_VERSION,
            bounds,
            obstacles: Vec::new(),
        }
    }

    /// The task workspace with no obstacles.
    pub fn from_layout(layout: &Layout) -> Self {
        Self::open(layout.workspace)
    }

    pub fn load(path: &Path) -> Result<Self, PlanError> {
        let text = std::fs::read_to_string(path).map_err(|e| PlanError::Io(format!("{}: {e}", path.display())))?;
        let scene: PlanningScene = serde_json::from_str(&text)?;
        if scene.schema_version != SCENE_SCHEMA_VERSION {
            return Err(PlanError::InvalidConfig(format!("unsupported scene schema {}", scene.schema_version)));
        }
        Ok(scene)
    }

    pub fn point_free(&self, p: &Vec3) -> bool {
        self.bounds.contains(p) && !self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Checks points spaced at most 1 mm apart, both ends included.
    pub fn segment_free(&self, a: &Vec3, b: &Vec3) -> bool {
        let n = ((b - a).norm() / COLLISION_RESOLUTION).ceil().max(1.0) as usize;
        (0..=n).all(|k| self.point_free(&(a + (b - a) * (k as f64 / n as f64))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub step_size: f64,
    pub goal_tolerance: f64,
    pub max_nodes: usize,
    /// RRT only: probability of sampling the goal.
    pub goal_bias: f64,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            step_size: 0.05,
            goal_tolerance: 0.02,
            max_nodes: 5000,
            goal_bias: 0.05,
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.step_size > 0.0 && self.goal_tolerance > 0.0 && self.max_nodes > 0) {
            return Err(PlanError::InvalidConfig("step_size, goal_tolerance and max_nodes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(PlanError::InvalidConfig("goal_bias must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Rrt,
    RrtConnect,
}

impl std::str::FromStr for PlannerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rrt" => Ok(PlannerKind::Rrt),
            "rrt-connect" => Ok(PlannerKind::RrtConnect),
            other => Err(format!("unknown planner {other:?} (expected rrt or rrt-connect)")),
        }
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PlannerKind::Rrt => "rrt",
            PlannerKind::RrtConnect => "rrt-connect",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPath {
    pub planner: PlannerKind,
    pub points: Vec<Vec3>,
    /// Nodes in all trees when planning stopped, roots included.
    pub nodes_expanded: usize,
}

impl WaypointPath {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

/// A tree stored as parallel arrays; the root has no parent.
#[derive(Debug, Clone)]
pub struct Tree {
    pub points: Vec<Vec3>,
    pub parents: Vec<Option<usize>>,
}

impl Tree {
    fn new(root: Vec3) -> Self {
        Tree {
            points: vec![root],
            parents: vec![None],
        }
    }

    fn nearest(&self, p: &Vec3) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, q) in self.points.iter().enumerate() {
            let d = (q - p).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    fn push(&mut self, p: Vec3, parent: usize) -> usize {
        self.points.push(p);
        self.parents.push(Some(parent));
        self.points.len() - 1
    }

    /// Root-to-node path.
    fn path_to(&self, mut i: usize) -> Vec<Vec3> {
        let mut out = vec![self.points[i]];
        while let Some(p) = self.parents[i] {
            out.push(self.points[p]);
            i = p;
        }
        out.reverse();
        out
    }
}

/// The point `step` along the way from `from` towards `to`, or `to` itself if closer.
pub fn steer(from: &Vec3, to: &Vec3, step: f64) -> Vec3 {
    let d = to - from;
    let n = d.norm();
    if n <= step {
        *to
    } else {
        from + d * (step / n)
    }
}

enum Extend {
    Reached(usize),
    Advanced(usize),
    Trapped,
}

fn extend(tree: &mut Tree, target: &Vec3, scene: &PlanningScene, step: f64) -> Extend {
    let near = tree.nearest(target);
    let from = tree.points[near];
    let new = steer(&from, target, step);
    if new == from || !scene.segment_free(&from, &new) {
        return Extend::Trapped;
    }
    let id = tree.push(new, near);
    if new == *target {
        Extend::Reached(id)
    } else {
        Extend::Advanced(id)
    }
}

fn sample<R: Rng>(bounds: &Aabb, rng: &mut R) -> Vec3 {
    Vec3::from_fn(|i, _| rng.gen_range(bounds.min[i]..=bounds.max[i]))
}

fn check_endpoints(start: &Vec3, goal: &Vec3, scene: &PlanningScene, cfg: &PlannerConfig) -> Result<(), PlanError> {
    cfg.validate()?;
    if !scene.point_free(start) {
        return Err(PlanError::InvalidEndpoint { which: "start" });
    }
    if !scene.point_free(goal) {
        return Err(PlanError::InvalidEndpoint { which: "goal" });
    }
    Ok(())
}

/// Trivial cases: identical endpoints, or a goal within one free step.
fn direct(start: &Vec3, goal: &Vec3, scene: &PlanningScene, cfg: &PlannerConfig, planner: PlannerKind) -> Option<WaypointPath> {
    if start == goal {
        return Some(WaypointPath {
            planner,
            points: vec![*start],
            nodes_expanded: 1,
        });
    }
    if (goal - start).norm() <= cfg.step_size && scene.segment_free(start, goal) {
        return Some(WaypointPath {
            planner,
            points: vec![*start, *goal],
            nodes_expanded: 2,
        });
    }
    None
}

pub fn rrt_plan(start: Vec3, goal: Vec3, scene: &PlanningScene, cfg: &PlannerConfig) -> Result<WaypointPath, PlanError> {
    check_endpoints(&start, &goal, scene, cfg)?;
    if let Some(p) = direct(&start, &goal, scene, cfg, PlannerKind::Rrt) {
        return Ok(p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tree = Tree::new(start);
    while tree.points.len() < cfg.max_nodes {
        let target = if rng.gen_bool(cfg.goal_bias) { goal } else { sample(&scene.bounds, &mut rng) };
        let id = match extend(&mut tree, &target, scene, cfg.step_size) {
            Extend::Trapped => continue,
            Extend::Reached(id) | Extend::Advanced(id) => id,
        };
        let p = tree.points[id];
        if (p - goal).norm() <= cfg.goal_tolerance {
            let mut points = tree.path_to(id);
            let mut nodes = tree.points.len();
            if p != goal && scene.segment_free(&p, &goal) {
                points.push(goal);
                nodes += 1;
            }
            return Ok(WaypointPath {
                planner: PlannerKind::Rrt,
                points,
                nodes_expanded: nodes,
            });
        }
    }
    Err(PlanError::NoPath {
        nodes_expanded: tree.points.len(),
    })
}

pub fn rrt_connect_plan(start: Vec3, goal: Vec3, scene: &PlanningScene, cfg: &PlannerConfig) -> Result<WaypointPath, PlanError> {
    check_endpoints(&start, &goal, scene, cfg)?;
    if let Some(p) = direct(&start, &goal, scene, cfg, PlannerKind::RrtConnect) {
        return Ok(p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut a = Tree::new(start);
    let mut b = Tree::new(goal);
    let mut a_is_start = true;
    while a.points.len() + b.points.len() < cfg.max_nodes {
        let target = sample(&scene.bounds, &mut rng);
        let new_id = match extend(&mut a, &target, scene, cfg.step_size) {
            Extend::Trapped => None,
            Extend::Reached(id) | Extend::Advanced(id) => Some(id),
        };
        if let Some(new_id) = new_id {
            let q_new = a.points[new_id];
            loop {
                if a.points.len() + b.points.len() >= cfg.max_nodes {
                    break;
                }
                match extend(&mut b, &q_new, scene, cfg.step_size) {
                    Extend::Advanced(_) => continue,
                    Extend::Trapped => break,
                    Extend::Reached(b_id) => {
                        let mut from_a = a.path_to(new_id);
                        let mut from_b = b.path_to(b_id);
                        from_b.pop();
                        from_b.reverse();
                        from_a.extend(from_b);
                        if !a_is_start {
                            from_a.reverse();
                        }
                        return Ok(WaypointPath {
                            planner: PlannerKind::RrtConnect,
                            points: from_a,
                            nodes_expanded: a.points.len() + b.points.len(),
                        });
                    }
                }
            }
        }
        std::mem::swap(&mut a, &mut b);
        a_is_start = !a_is_start;
    }
    Err(PlanError::NoPath {
        nodes_expanded: a.points.len() + b.points.len(),
    })
}

pub fn plan(kind: PlannerKind, start: Vec3, goal: Vec3, scene: &PlanningScene, cfg: &PlannerConfig) -> Result<WaypointPath, PlanError> {
    match kind {
        PlannerKind::Rrt => rrt_plan(start, goal, scene, cfg),
        PlannerKind::RrtConnect => rrt_connect_plan(start, goal, scene, cfg),
    }
}

/// Plans through a sequence of waypoints (e.g. the sub-goals of a task),
/// concatenating the legs. The seed advances per leg.
pub fn plan_through(kind: PlannerKind, waypoints: &[Vec3], scene: &PlanningScene, cfg: &PlannerConfig) -> Result<WaypointPath, PlanError> {
    let mut points = vec![*waypoints.first().ok_or(PlanError::InvalidConfig("no waypoints".into()))?];
    let mut nodes = 0;
    for (k, w) in waypoints.windows(2).enumerate() {
        let leg_cfg = PlannerConfig {
            seed: cfg.seed.wrapping_add(k as u64),
            ..cfg.clone()
        };
        let leg = plan(kind, *points.last().expect("non-empty"), w[1], scene, &leg_cfg)?;
        nodes += leg.nodes_expanded;
        points.extend_from_slice(&leg.points[1..]);
    }
    Ok(WaypointPath {
        planner: kind,
        points,
        nodes_expanded: nodes,
    })
}

/// First and last points plus every point where the path turns by more
/// than `min_angle` radians or pauses; these are the sub-goals a planner
/// must visit to reproduce the task.
pub fn path_corners(path: &[Vec3], min_angle: f64) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = path.first().copied().into_iter().collect();
    for w in path.windows(3) {
        let (a, b) = (w[1] - w[0], w[2] - w[1]);
        let turn = if a.norm() < 1e-9 || b.norm() < 1e-9 {
            a.norm() > 1e-9 || b.norm() > 1e-9
        } else {
            a.angle(&b) > min_angle
        };
        if turn && out.last() != Some(&w[1]) {
            out.push(w[1]);
        }
    }
    if let Some(&last) = path.last() {
        if out.last() != Some(&last) {
            out.push(last);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_scene() -> PlanningScene {
        PlanningScene::open(Aabb::new(Vec3::new(0.0, -0.5, 0.0), Vec3::new(1.0, 0.5, 0.5)))
    }

    fn wall_scene() -> PlanningScene {
        let mut s = open_scene();
        // A wall at x in [0.45, 0.55] with a gap for y in [0.15, 0.30].
        s.obstacles.push(Aabb::new(Vec3::new(0.45, -0.5, 0.0), Vec3::new(0.55, 0.15, 0.5)));
        s.obstacles.push(Aabb::new(Vec3::new(0.45, 0.30, 0.0), Vec3::new(0.55, 0.5, 0.5)));
        s
    }

    fn assert_valid(path: &WaypointPath, scene: &PlanningScene, cfg: &PlannerConfig) {
        for w in path.points.windows(2) {
            assert!((w[1] - w[0]).norm() <= cfg.step_size + 1e-9);
            assert!(scene.segment_free(&w[0], &w[1]));
        }
    }

    #[test]
    fn start_equals_goal() {
        let s = open_scene();
        let p = Vec3::new(0.5, 0.0, 0.2);
        for kind in [PlannerKind::Rrt, PlannerKind::RrtConnect] {
            let path = plan(kind, p, p, &s, &PlannerConfig::default()).unwrap();
            assert_eq!(path.points, vec![p]);
        }
    }

    #[test]
    fn straight_line_case() {
        let s = open_scene();
        let cfg = PlannerConfig::default();
        let (a, b) = (Vec3::new(0.2, 0.0, 0.2), Vec3::new(0.7, 0.0, 0.2));
        for kind in [PlannerKind::Rrt, PlannerKind::RrtConnect] {
            let path = plan(kind, a, b, &s, &cfg).unwrap();
            assert!(path.length() >= 0.5 - 1e-12);
            assert_eq!(*path.points.first().unwrap(), a);
            assert!((path.points.last().unwrap() - b).norm() <= cfg.goal_tolerance);
            assert_valid(&path, &s, &cfg);
        }
    }

    #[test]
    fn wall_with_gap() {
        let s = wall_scene();
        let (a, b) = (Vec3::new(0.2, -0.2, 0.25), Vec3::new(0.8, -0.2, 0.25));
        for seed in 0..5 {
            let cfg = PlannerConfig {
                seed,
                max_nodes: 20_000,
                ..Default::default()
            };
            for kind in [PlannerKind::Rrt, PlannerKind::RrtConnect] {
                let path = plan(kind, a, b, &s, &cfg).unwrap();
                assert_valid(&path, &s, &cfg);
                let crossing = path
                    .points
                    .windows(2)
                    .find(|w| w[0].x < 0.5 && w[1].x >= 0.5)
                    .expect("path crosses the wall plane");
                assert!((0.15..=0.30).contains(&crossing[0].y) || (0.15..=0.30).contains(&crossing[1].y));
            }
        }
    }

    #[test]
    fn invalid_endpoints_and_failure() {
        let s = wall_scene();
        let cfg = PlannerConfig::default();
        assert!(matches!(
            rrt_plan(Vec3::new(0.5, 0.0, 0.2), Vec3::new(0.8, 0.0, 0.2), &s, &cfg),
            Err(PlanError::InvalidEndpoint { which: "start" })
        ));
        let tiny = PlannerConfig { max_nodes: 3, ..cfg };
        assert!(matches!(
            rrt_plan(Vec3::new(0.1, 0.0, 0.2), Vec3::new(0.9, 0.0, 0.2), &s, &tiny),
            Err(PlanError::NoPath { .. })
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let s = wall_scene();
        let cfg = PlannerConfig { seed: 9, max_nodes: 20_000, ..Default::default() };
        let (a, b) = (Vec3::new(0.2, -0.2, 0.25), Vec3::new(0.8, -0.2, 0.25));
        assert_eq!(rrt_plan(a, b, &s, &cfg).unwrap(), rrt_plan(a, b, &s, &cfg).unwrap());
        assert_eq!(rrt_connect_plan(a, b, &s, &cfg).unwrap(), rrt_connect_plan(a, b, &s, &cfg).unwrap());
    }

    #[test]
    fn tree_extension_is_exact() {
        let s = open_scene();
        let mut t = Tree::new(Vec3::new(0.5, 0.0, 0.25));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let target = sample(&s.bounds, &mut rng);
            let near = t.nearest(&target);
            let from = t.points[near];
            if let Extend::Reached(id) | Extend::Advanced(id) = extend(&mut t, &target, &s, 0.05) {
                assert_eq!(t.parents[id], Some(near));
                let d = (t.points[id] - from).norm();
                let full = (target - from).norm();
                assert!((d - full.min(0.05)).abs() < 1e-12);
            }
        }
        assert_eq!(t.parents.iter().filter(|p| p.is_none()).count(), 1);
        assert!(t.parents[1..].iter().all(|p| p.is_some()));
    }

    #[test]
    fn corners_of_an_l_shape() {
        let p: Vec<Vec3> = (0..5)
            .map(|i| Vec3::new(0.05 * i as f64, 0.0, 0.0))
            .chain((1..4).map(|i| Vec3::new(0.2, 0.05 * i as f64, 0.0)))
            .collect();
        let c = path_corners(&p, 0.1);
        assert_eq!(c, vec![p[0], p[4], p[7]]);
        assert_eq!(path_corners(&p[..1], 0.1), vec![p[0]]);
    }

    #[test]
    fn scene_json_round_trip() {
        let s = wall_scene();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scene.json");
        std::fs::write(&p, serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(PlanningScene::load(&p).unwrap(), s);
    }
}
