use rand::Rng;
use serde::{Deserialize, Serialize};

use super::detect::{select_with_rule, Detection, Label, ObjectOfInterest};
use super::WorldError;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Sorting,
    Pouring,
}

impl std::str::FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sorting" => Ok(Task::Sorting),
            "pouring" => Ok(Task::Pouring),
            other => Err(format!("unknown task {other:?} (expected sorting or pouring)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    OnConveyor,
    Grasped,
    AtBin,
    AtCorner,
}

/// Axis-aligned box given by its two extreme corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn clamp(&self, p: Vec3) -> Vec3 {
        Vec3::from_fn(|i, _| p[i].clamp(self.min[i], self.max[i]))
    }

    /// Maps the box onto `[-1, 1]^3`.
    pub fn normalize(&self, p: &Vec3) -> Vec3 {
        Vec3::from_fn(|i, _| 2.0 * (p[i] - self.min[i]) / (self.max[i] - self.min[i]) - 1.0)
    }

    pub fn denormalize(&self, u: &Vec3) -> Vec3 {
        Vec3::from_fn(|i, _| self.min[i] + (u[i] + 1.0) * 0.5 * (self.max[i] - self.min[i]))
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }
}

/// Positions of everything on the table, metres in the robot world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Layout {
    /// Region objects are spawned in (z fixed at `conveyor.min.z`).
    pub conveyor: Aabb,
    pub bin: Vec3,
    pub corner: Vec3,
    pub pour_point: Vec3,
    pub home: Vec3,
    pub inspection_height: f64,
    /// End-effector bounds; every position is clipped into this box.
    pub workspace: Aabb,
    pub max_step: f64,
    /// Grasp, release and pour trigger distance.
    pub reach_radius: f64,
    pub min_spacing: f64,
}

impl Default for Layout {
    fn default() -> Self {
        Layout {
            conveyor: Aabb::new(Vec3::new(0.40, -0.15, 0.10), Vec3::new(0.55, 0.15, 0.10)),
            bin: Vec3::new(0.30, 0.25, 0.15),
            corner: Vec3::new(0.55, -0.25, 0.15),
            pour_point: Vec3::new(0.35, -0.05, 0.30),
            home: Vec3::new(0.45, 0.0, 0.25),
            inspection_height: 0.25,
            workspace: Aabb::new(Vec3::new(0.20, -0.40, 0.05), Vec3::new(0.70, 0.40, 0.45)),
            max_step: 0.05,
            reach_radius: 0.02,
            min_spacing: 0.08,
        }
    }
}

impl Layout {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: &str| Err(WorldError::InvalidConfig(m.to_string()));
        if !(self.max_step > 0.0 && self.reach_radius > 0.0) {
            return bad("max_step and reach_radius must be positive");
        }
        for (name, p) in [
            ("bin", self.bin),
            ("corner", self.corner),
            ("pour_point", self.pour_point),
            ("home", self.home),
            ("conveyor.min", self.conveyor.min),
            ("conveyor.max", self.conveyor.max),
        ] {
            if !self.workspace.contains(&p) {
                return Err(WorldError::InvalidConfig(format!("{name} lies outside the workspace")));
            }
        }
        if self.inspection_height > self.workspace.max.z || self.inspection_height <= self.conveyor.min.z {
            return bad("inspection_height must lie between the conveyor and the workspace top");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub label_true: Label,
    pub location: Vec3,
    pub phase: Phase,
    /// Whether the true label is currently visible to the detector.
    pub revealed: bool,
    /// Pouring only: contents already poured.
    #[serde(default)]
    pub poured: bool,
}

impl SceneObject {
    pub fn sorted(&self) -> bool {
        matches!(self.phase, Phase::AtBin | Phase::AtCorner)
    }

    pub fn visible_label(&self) -> Label {
        if self.revealed {
            self.label_true
        } else {
            Label::Unknown
        }
    }
}

/// Detector behaviour for synthetic detections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionModel {
    /// Confidence range of an ordinary detection.
    pub confidence_lo: f64,
    pub confidence_hi: f64,
    /// Confidence once the true label is visible.
    pub revealed_confidence: f64,
    /// Chance that an object's confidence falls below the threshold.
    pub miss_prob: f64,
    /// Pixel noise std (both image axes) and depth noise std (mm).
    pub pixel_noise: f64,
    pub depth_noise_mm: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        DetectionModel {
            confidence_lo: 0.6,
            confidence_hi: 0.9,
            revealed_confidence: 0.95,
            miss_prob: 0.0,
            pixel_noise: 0.0,
            depth_noise_mm: 0.0,
        }
    }
}

/// Events raised by one transition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepEvents {
    pub grasped: Option<usize>,
    pub released: Option<usize>,
    pub revealed: Option<usize>,
    pub tilted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub task: Task,
    pub objects: Vec<SceneObject>,
    pub eef: Vec3,
    pub time: f64,
}

impl SceneState {
    /// Random placement on the conveyor with the configured spacing.
    pub fn random<R: Rng>(task: Task, layout: &Layout, n_objects: usize, blemish_visible_prob: f64, rng: &mut R) -> Result<Self, WorldError> {
        let mut objects: Vec<SceneObject> = Vec::with_capacity(n_objects);
        let c = &layout.conveyor;
        for _ in 0..n_objects {
            let mut placed = None;
            for _ in 0..1000 {
                let p = Vec3::new(
                    rng.gen_range(c.min.x..=c.max.x),
                    rng.gen_range(c.min.y..=c.max.y),
                    c.min.z,
                );
                if objects.iter().all(|o| (o.location - p).norm() >= layout.min_spacing) {
                    placed = Some(p);
                    break;
                }
            }
            let location = placed.ok_or_else(|| {
                WorldError::Generation(format!("cannot place {n_objects} objects with spacing {}", layout.min_spacing))
            })?;
            let (label_true, revealed) = match task {
                Task::Sorting => {
                    if rng.gen_bool(0.5) {
                        (Label::Blemished, rng.gen_bool(blemish_visible_prob))
                    } else {
                        (Label::Unblemished, false)
                    }
                }
                Task::Pouring => (if rng.gen_bool(0.5) { Label::Red } else { Label::Blue }, true),
            };
            objects.push(SceneObject {
                label_true,
                location,
                phase: Phase::OnConveyor,
                revealed,
                poured: false,
            });
        }
        Ok(SceneState {
            task,
            objects,
            eef: layout.home,
            time: 0.0,
        })
    }

    pub fn grasped(&self) -> Option<usize> {
        self.objects.iter().position(|o| o.phase == Phase::Grasped)
    }

    pub fn all_sorted(&self) -> bool {
        self.objects.iter().all(SceneObject::sorted)
    }

    /// Noise-free detections of every unsorted object, in object order,
    /// paired with the object index.
    pub fn ideal_detections(&self, model: &DetectionModel) -> Vec<(usize, Detection)> {
        let mid = 0.5 * (model.confidence_lo + model.confidence_hi);
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, o)| !o.sorted())
            .map(|(i, o)| {
                let confidence = if o.revealed { model.revealed_confidence } else { mid };
                (
                    i,
                    Detection {
                        label: o.visible_label(),
                        confidence,
                        centroid: o.location,
                    },
                )
            })
            .collect()
    }

    /// Object of interest under noise-free detection, with its object index.
    pub fn ideal_object_of_interest(&self) -> (ObjectOfInterest, Option<usize>) {
        let dets = self.ideal_detections(&DetectionModel::default());
        let plain: Vec<Detection> = dets.iter().map(|(_, d)| d.clone()).collect();
        let (ooi, _, idx) = select_with_rule(&plain, self.eef);
        (ooi, idx.map(|k| dets[k].0))
    }

    /// Deterministic transition: move (clipped), carry the grasped object,
    /// then apply grasp / reveal / pour / release rules in that order.
    pub fn apply(&mut self, action: Vec3, layout: &Layout, dt: f64) -> StepEvents {
        let mut ev = StepEvents::default();
        let new_eef = layout.workspace.clamp(self.eef + action);
        let moved = new_eef - self.eef;
        self.eef = new_eef;
        self.time += dt;
        if let Some(g) = self.grasped() {
            self.objects[g].location += moved;
            let obj = &mut self.objects[g];
            if !obj.revealed && self.eef.z >= layout.inspection_height - 1e-9 {
                obj.revealed = true;
                ev.revealed = Some(g);
            }
            match self.task {
                Task::Sorting => {
                    for (point, phase) in [(layout.bin, Phase::AtBin), (layout.corner, Phase::AtCorner)] {
                        if (self.eef - point).norm() <= layout.reach_radius {
                            obj.phase = phase;
                            ev.released = Some(g);
                            break;
                        }
                    }
                }
                Task::Pouring => {
                    if !obj.poured && (self.eef - layout.pour_point).norm() <= layout.reach_radius {
                        obj.poured = true;
                        ev.tilted = true;
                    } else if obj.poured && (self.eef - layout.bin).norm() <= layout.reach_radius {
                        obj.phase = Phase::AtBin;
                        ev.released = Some(g);
                    }
                }
            }
        } else {
            let nearest = self
                .objects
                .iter()
                .enumerate()
                .filter(|(_, o)| o.phase == Phase::OnConveyor)
                .map(|(i, o)| (i, (o.location - self.eef).norm()))
                .filter(|(_, d)| *d <= layout.reach_radius)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((i, _)) = nearest {
                self.objects[i].phase = Phase::Grasped;
                ev.grasped = Some(i);
            }
        }
        ev
    }

    /// Where the scripted expert is heading next, if anywhere.
    pub fn expert_goal(&self, layout: &Layout) -> Option<Vec3> {
        if let Some(g) = self.grasped() {
            let obj = &self.objects[g];
            return Some(match self.task {
                Task::Sorting if !obj.revealed => Vec3::new(obj.location.x, obj.location.y, layout.inspection_height),
                Task::Sorting if obj.label_true == Label::Blemished => layout.bin,
                Task::Sorting => layout.corner,
                Task::Pouring if !obj.poured => layout.pour_point,
                Task::Pouring => layout.bin,
            });
        }
        let (_, idx) = self.ideal_object_of_interest();
        idx.map(|i| self.objects[i].location)
    }

    /// The scripted expert's action: a straight step of at most `max_step`
    /// towards the current goal, zero when the task is done.
    pub fn expert_action(&self, layout: &Layout) -> Vec3 {
        match self.expert_goal(layout) {
            Some(goal) => step_towards(self.eef, goal, layout.max_step),
            None => Vec3::zeros(),
        }
    }
}

pub fn step_towards(from: Vec3, to: Vec3, max_step: f64) -> Vec3 {
    let d = to - from;
    let n = d.norm();
    if n <= max_step {
        d
    } else {
        d * (max_step / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run_episode(mut s: SceneState, layout: &Layout, budget: usize) -> (SceneState, usize) {
        for k in 0..budget {
            if s.all_sorted() {
                return (s, k);
            }
            let a = s.expert_action(layout);
            let goal = s.expert_goal(layout).unwrap();
            let before = (s.eef - goal).norm();
            s.apply(a, layout, 0.1);
            let after = (s.eef - goal).norm();
            assert!(after <= before + 1e-12);
        }
        (s, budget)
    }

    #[test]
    fn default_layout_is_valid() {
        Layout::default().validate().unwrap();
    }

    #[test]
    fn no_objects_means_no_motion() {
        let layout = Layout::default();
        let s = SceneState { task: Task::Sorting, objects: vec![], eef: layout.home, time: 0.0 };
        assert_eq!(s.expert_action(&layout), Vec3::zeros());
    }

    #[test]
    fn carries_blemished_object_towards_bin() {
        let layout = Layout::default();
        let eef = layout.bin + Vec3::new(0.0, -0.4, 0.0);
        let s = SceneState {
            task: Task::Sorting,
            objects: vec![SceneObject {
                label_true: Label::Blemished,
                location: eef,
                phase: Phase::Grasped,
                revealed: true,
                poured: false,
            }],
            eef,
            time: 0.0,
        };
        let a = s.expert_action(&layout);
        assert!((a.norm() - 0.05).abs() < 1e-15);
        assert!((a.normalize() - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn grasped_object_follows_and_clipping_holds() {
        let layout = Layout::default();
        let mut s = SceneState {
            task: Task::Sorting,
            objects: vec![SceneObject {
                label_true: Label::Unblemished,
                location: Vec3::new(0.45, 0.0, 0.20),
                phase: Phase::Grasped,
                revealed: true,
                poured: false,
            }],
            eef: Vec3::new(0.45, 0.0, 0.20),
            time: 0.0,
        };
        s.apply(Vec3::new(0.05, 0.0, 0.0), &layout, 0.1);
        assert!((s.eef - Vec3::new(0.50, 0.0, 0.20)).norm() < 1e-15);
        assert_eq!(s.objects[0].location, s.eef);
        s.eef.x = layout.workspace.max.x;
        let before = s.eef;
        s.apply(Vec3::new(0.05, 0.0, 0.0), &layout, 0.1);
        assert_eq!(s.eef.x, before.x);
        let mut far = SceneState { task: Task::Sorting, objects: vec![], eef: layout.home, time: 0.0 };
        let ev = far.apply(Vec3::zeros(), &layout, 0.1);
        assert_eq!(far.eef, layout.home);
        assert_eq!(ev, StepEvents::default());
    }

    #[test]
    fn episodes_end_sorted_correctly() {
        let layout = Layout::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let s = SceneState::random(Task::Sorting, &layout, 3, 0.5, &mut rng).unwrap();
            let (end, steps) = run_episode(s, &layout, 200);
            assert!(steps < 200);
            for o in &end.objects {
                let want = if o.label_true == Label::Blemished { Phase::AtBin } else { Phase::AtCorner };
                assert_eq!(o.phase, want);
            }
        }
    }

    #[test]
    fn pouring_episode_tilts_then_bins() {
        let layout = Layout::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut s = SceneState::random(Task::Pouring, &layout, 2, 0.0, &mut rng).unwrap();
        let mut tilts = 0;
        for _ in 0..300 {
            if s.all_sorted() {
                break;
            }
            let a = s.expert_action(&layout);
            tilts += s.apply(a, &layout, 0.1).tilted as usize;
        }
        assert!(s.all_sorted());
        assert_eq!(tilts, 2);
        assert!(s.objects.iter().all(|o| o.poured && o.phase == Phase::AtBin));
    }
}
