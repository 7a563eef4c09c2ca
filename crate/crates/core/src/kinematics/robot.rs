use std::path::Path;

use nalgebra::{Rotation3, Unit};
use serde::{Deserialize, Serialize};

use super::KinematicsError;
use crate::Vec3;

pub const ROBOT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    /// Rotation axis in the joint's parent frame; normalized on use.
    pub axis: Vec3,
    /// Translation to the next joint, applied after this joint's rotation.
    pub link_offset: Vec3,
    pub limit_lo: f64,
    pub limit_hi: f64,
}

/// Joint origins `P_0..P_{n-1}` followed by the end-effector `P_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FkResult {
    pub joint_positions: Vec<Vec3>,
    pub eef: Vec3,
}

/// A serial chain of revolute joints.
///
/// Frame convention: start at `base` with the identity orientation; for
/// each joint rotate about its axis by `q_i`, then translate by its
/// `link_offset` in the rotated frame. With all angles zero the
/// end-effector sits at `base + sum(link_offset)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub schema_version: u32,
    pub name: String,
    #[serde(default = "Vec3::zeros")]
    pub base: Vec3,
    pub joints: Vec<Joint>,
    /// Cobot joints playing the hip, shoulder, elbow and wrist roles, base to tip.
    pub mapped_indices: [usize; 4],
    /// Full-length pose; entries at mapped indices give the mapped joints' rest values.
    pub neutral_pose: Vec<f64>,
}

const SAWYER_LIKE: &str = include_str!("../../config/sawyer_like.json");
const KUKA_LIKE: &str = include_str!("../../config/kuka_like.json");

impl RobotSpec {
    /// The bundled 7-DoF stand-in geometry.
    pub fn sawyer_like() -> Self {
        Self::from_json(SAWYER_LIKE).expect("bundled sawyer_like.json is valid")
    }

    /// The bundled 6-DoF stand-in geometry.
    pub fn kuka_like() -> Self {
        Self::from_json(KUKA_LIKE).expect("bundled kuka_like.json is valid")
    }

    pub fn bundled(name: &str) -> Option<Self> {
        match name {
            "sawyer_like" => Some(Self::sawyer_like()),
            "kuka_like" => Some(Self::kuka_like()),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, KinematicsError> {
        let spec: RobotSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, KinematicsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KinematicsError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("robot spec serializes")
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let bad = |m: String| Err(KinematicsError::InvalidSpec(m));
        if self.schema_version != ROBOT_SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        let n = self.joints.len();
        if ![4, 6, 7].contains(&n) {
            return bad(format!("{}: expected 4, 6 or 7 joints, got {n}", self.name));
        }
        for j in &self.joints {
            if !(j.limit_lo < j.limit_hi) {
                return bad(format!("joint {}: limit_lo must be below limit_hi", j.name));
            }
            if !(j.axis.norm() > 1e-12) || j.axis.iter().any(|v| !v.is_finite()) {
                return bad(format!("joint {}: axis must be a non-zero finite vector", j.name));
            }
            if j.link_offset.iter().any(|v| !v.is_finite()) {
                return bad(format!("joint {}: non-finite link offset", j.name));
            }
        }
        let m = self.mapped_indices;
        if m.iter().any(|&i| i >= n) || m.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("mapped_indices {m:?} must be distinct, ascending and < {n}"));
        }
        if self.neutral_pose.len() != n {
            return bad(format!("neutral_pose has {} entries for {n} joints", self.neutral_pose.len()));
        }
        if !self.within_limits(&self.neutral_pose) {
            return bad("neutral_pose violates joint limits".into());
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn analytic_fk(&self, q: &[f64]) -> Result<FkResult, KinematicsError> {
        if q.len() != self.dof() {
            return Err(KinematicsError::JointCount {
                expected: self.dof(),
                got: q.len(),
            });
        }
        let mut rot = Rotation3::identity();
        let mut p = self.base;
        let mut joint_positions = Vec::with_capacity(q.len());
        for (j, &angle) in self.joints.iter().zip(q) {
            joint_positions.push(p);
            rot *= Rotation3::from_axis_angle(&Unit::new_normalize(j.axis), angle);
            p += rot * j.link_offset;
        }
        Ok(FkResult {
            joint_positions,
            eef: p,
        })
    }

    /// Full joint vector with the mapped joints at `q4` and every other joint at neutral.
    pub fn embed(&self, q4: &[f64; 4]) -> Vec<f64> {
        let mut q = self.neutral_pose.clone();
        for (&i, &v) in self.mapped_indices.iter().zip(q4) {
            q[i] = v;
        }
        q
    }

    pub fn restrict(&self, q: &[f64]) -> [f64; 4] {
        self.mapped_indices.map(|i| q[i])
    }

    pub fn neutral_mapped(&self) -> [f64; 4] {
        self.restrict(&self.neutral_pose)
    }

    /// End-effector with only the mapped joints moving.
    pub fn restricted_fk_oracle(&self, q4: &[f64; 4]) -> Vec3 {
        self.analytic_fk(&self.embed(q4))
            .expect("embedded pose has full length")
            .eef
    }

    /// `(lo, hi)` for the four mapped joints.
    pub fn mapped_limits(&self) -> [(f64, f64); 4] {
        self.mapped_indices
            .map(|i| (self.joints[i].limit_lo, self.joints[i].limit_hi))
    }

    /// Closed-interval limit check; false on a length mismatch.
    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof()
            && self
                .joints
                .iter()
                .zip(q)
                .all(|(j, v)| *v >= j.limit_lo && *v <= j.limit_hi)
    }

    pub fn clamp_mapped(&self, q4: &mut [f64; 4]) {
        for (v, (lo, hi)) in q4.iter_mut().zip(self.mapped_limits()) {
            *v = v.clamp(lo, hi);
        }
    }

    /// Sum of link lengths: an upper bound on reach from the base.
    pub fn total_length(&self) -> f64 {
        self.joints.iter().map(|j| j.link_offset.norm()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Isometry3, Translation3, UnitQuaternion};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_q(spec: &RobotSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
        spec.joints
            .iter()
            .map(|j| rng.gen_range(j.limit_lo..=j.limit_hi))
            .collect()
    }

    /// Second FK written with homogeneous transforms.
    fn transform_fk(spec: &RobotSpec, q: &[f64]) -> Vec3 {
        let mut t = Isometry3::from_parts(Translation3::from(spec.base), UnitQuaternion::identity());
        for (j, &a) in spec.joints.iter().zip(q) {
            let r = Isometry3::from_parts(
                Translation3::identity(),
                UnitQuaternion::from_axis_angle(&Unit::new_normalize(j.axis), a),
            );
            let tr = Isometry3::from_parts(Translation3::from(j.link_offset), UnitQuaternion::identity());
            t = t * r * tr;
        }
        t.translation.vector
    }

    fn planar_two_link() -> RobotSpec {
        let joint = |name: &str| Joint {
            name: name.into(),
            axis: Vec3::z(),
            link_offset: Vec3::new(1.0, 0.0, 0.0),
            limit_lo: -3.0,
            limit_hi: 3.0,
        };
        let mut joints = vec![joint("a"), joint("b")];
        for k in 0..2 {
            let mut j = joint("pad");
            j.link_offset = Vec3::zeros();
            j.name = format!("pad{k}");
            joints.push(j);
        }
        RobotSpec {
            schema_version: 1,
            name: "planar".into(),
            base: Vec3::zeros(),
            joints,
            mapped_indices: [0, 1, 2, 3],
            neutral_pose: vec![0.0; 4],
        }
    }

    #[test]
    fn bundled_specs_are_valid() {
        let s = RobotSpec::sawyer_like();
        assert_eq!(s.dof(), 7);
        assert_eq!(s.mapped_indices, [0, 1, 3, 5]);
        let k = RobotSpec::kuka_like();
        assert_eq!(k.dof(), 6);
        assert_eq!(k.mapped_indices, [0, 1, 2, 4]);
        let back = RobotSpec::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn zero_pose_sums_offsets() {
        for spec in [RobotSpec::sawyer_like(), RobotSpec::kuka_like()] {
            let fk = spec.analytic_fk(&vec![0.0; spec.dof()]).unwrap();
            let sum: Vec3 = spec.joints.iter().map(|j| j.link_offset).sum();
            assert!((fk.eef - (spec.base + sum)).norm() < 1e-15);
        }
    }

    #[test]
    fn planar_quarter_turn() {
        let spec = planar_two_link();
        let fk = spec
            .analytic_fk(&[std::f64::consts::FRAC_PI_2, 0.0, 0.0, 0.0])
            .unwrap();
        assert!((fk.eef - Vec3::new(0.0, 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn matches_transform_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for spec in [RobotSpec::sawyer_like(), RobotSpec::kuka_like()] {
            for _ in 0..200 {
                let q = random_q(&spec, &mut rng);
                let a = spec.analytic_fk(&q).unwrap().eef;
                assert!((a - transform_fk(&spec, &q)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn restricted_oracle_is_embedded_fk() {
        let spec = RobotSpec::sawyer_like();
        let n = spec.neutral_mapped();
        assert_eq!(
            spec.restricted_fk_oracle(&n),
            spec.analytic_fk(&spec.neutral_pose).unwrap().eef
        );
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let q4 = spec.mapped_limits().map(|(lo, hi)| rng.gen_range(lo..=hi));
            let full = spec.embed(&q4);
            assert_eq!(spec.restricted_fk_oracle(&q4), spec.analytic_fk(&full).unwrap().eef);
            assert_eq!(spec.restrict(&full), q4);
        }
    }

    #[test]
    fn single_joint_sweep_traces_circle() {
        let spec = RobotSpec::kuka_like();
        let fk0 = spec.analytic_fk(&spec.neutral_pose).unwrap();
        let pivot = fk0.joint_positions[2];
        let mut radii = Vec::new();
        let mut heights = Vec::new();
        for k in 0..20 {
            let q4 = [0.0, 0.0, -2.4 + 0.13 * k as f64, 0.0];
            let e = spec.restricted_fk_oracle(&q4);
            let d = e - pivot;
            radii.push(Vec3::new(d.x, 0.0, d.z).norm());
            heights.push(d.y);
        }
        for r in &radii {
            assert!((r - radii[0]).abs() < 1e-12);
        }
        assert!(heights.iter().all(|y| y.abs() < 1e-12));
    }

    #[test]
    fn limit_checks() {
        let spec = RobotSpec::sawyer_like();
        assert!(spec.within_limits(&spec.neutral_pose));
        let mut q = spec.neutral_pose.clone();
        q[3] = spec.joints[3].limit_hi;
        assert!(spec.within_limits(&q));
        q[3] += 0.01;
        assert!(!spec.within_limits(&q));
        assert!(!spec.within_limits(&[0.0; 3]));
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = RobotSpec::sawyer_like();
        s.mapped_indices = [0, 3, 1, 5];
        assert!(s.validate().is_err());
        let mut s = RobotSpec::sawyer_like();
        s.joints.pop();
        assert!(s.validate().is_err());
        let mut s = RobotSpec::kuka_like();
        s.joints[0].limit_lo = 2.0;
        assert!(s.validate().is_err());
        assert!(matches!(
            RobotSpec::kuka_like().analytic_fk(&[0.0; 7]),
            Err(KinematicsError::JointCount { expected: 6, got: 7 })
        ));
    }

    proptest! {
        #[test]
        fn links_keep_their_lengths(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = RobotSpec::sawyer_like();
            let q = random_q(&spec, &mut rng);
            let fk = spec.analytic_fk(&q).unwrap();
            let mut pts = fk.joint_positions.clone();
            pts.push(fk.eef);
            for (i, j) in spec.joints.iter().enumerate() {
                prop_assert!(((pts[i + 1] - pts[i]).norm() - j.link_offset.norm()).abs() < 1e-9);
            }
        }

        #[test]
        fn fk_is_lipschitz(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = RobotSpec::kuka_like();
            let q = random_q(&spec, &mut rng);
            let d: Vec<f64> = (0..spec.dof()).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
            let q2: Vec<f64> = q.iter().zip(&d).map(|(a, b)| a + b).collect();
            let moved = (spec.analytic_fk(&q).unwrap().eef - spec.analytic_fk(&q2).unwrap().eef).norm();
            let l1: f64 = d.iter().map(|v| v.abs()).sum();
            prop_assert!(moved <= spec.total_length() * l1 + 1e-15);
        }
    }
}
