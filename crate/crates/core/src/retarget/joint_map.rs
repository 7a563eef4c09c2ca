use serde::{Deserialize, Serialize};

use super::RetargetError;
use crate::kinematics::{HumanAngles, RobotSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointMapEntry {
    pub human_angle_index: usize,
    pub cobot_joint_index: usize,
    pub scale: f64,
    /// Radians.
    pub offset: f64,
}

/// Affine one-to-one correspondence between the four human arm angles
/// (torso yaw, elevation, flexion, hand deviation) and the robot's mapped joints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicJointMap {
    pub entries: [JointMapEntry; 4],
}

/// Human pose that maps to the robot's neutral pose by default: arm hanging, torso square.
pub const HUMAN_REST: HumanAngles = [0.0; 4];

impl SymbolicJointMap {
    /// Scale 1 and offsets that send the human rest pose to the robot's neutral pose.
    pub fn rest_to_neutral(robot: &RobotSpec) -> Self {
        Self::with_scales(robot, [1.0; 4], None)
    }

    /// Per-joint scales; offsets default to rest-to-neutral for those scales.
    pub fn with_scales(robot: &RobotSpec, scale: [f64; 4], offset: Option<[f64; 4]>) -> Self {
        let neutral = robot.neutral_mapped();
        let entries = [0, 1, 2, 3].map(|k| JointMapEntry {
            human_angle_index: k,
            cobot_joint_index: robot.mapped_indices[k],
            scale: scale[k],
            offset: offset.map_or(neutral[k] - scale[k] * HUMAN_REST[k], |o| o[k]),
        });
        SymbolicJointMap { entries }
    }

    /// Calibration for the bundled arms, whose base faces the demonstrator:
    /// yaw mirrors, a hanging human arm points the cobot's shoulder down,
    /// and flexion bends the cobot's elbow and wrist the same way.
    pub fn facing_demonstrator(robot: &RobotSpec) -> Self {
        Self::with_scales(robot, [-1.0; 4], Some([0.0, std::f64::consts::FRAC_PI_2, 0.0, 0.0]))
    }

    pub fn validate(&self, robot: &RobotSpec) -> Result<(), RetargetError> {
        for (k, e) in self.entries.iter().enumerate() {
            if e.cobot_joint_index != robot.mapped_indices[k] {
                return Err(RetargetError::InvalidConfig(format!(
                    "map entry {k} drives joint {} but the robot maps joint {}",
                    e.cobot_joint_index, robot.mapped_indices[k]
                )));
            }
            if e.human_angle_index > 3 {
                return Err(RetargetError::InvalidConfig(format!("human angle index {} out of range", e.human_angle_index)));
            }
            if e.scale == 0.0 || !e.scale.is_finite() || !e.offset.is_finite() {
                return Err(RetargetError::InvalidConfig(format!("map entry {k} needs a finite non-zero scale")));
            }
        }
        Ok(())
    }

    pub fn scales(&self) -> [f64; 4] {
        self.entries.map(|e| e.scale)
    }

    /// Initial cobot angles for the mapped joints, clamped to their limits.
    pub fn apply(&self, robot: &RobotSpec, human: &HumanAngles) -> [f64; 4] {
        let mut q = self.entries.map(|e| e.scale * human[e.human_angle_index] + e.offset);
        robot.clamp_mapped(&mut q);
        q
    }
}

/// Free-function form of [`SymbolicJointMap::apply`].
pub fn symbolic_map(map: &SymbolicJointMap, robot: &RobotSpec, human: &HumanAngles) -> [f64; 4] {
    map.apply(robot, human)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wide_robot() -> RobotSpec {
        let mut r = RobotSpec::sawyer_like();
        for j in r.joints.iter_mut() {
            j.limit_lo = -3.0;
            j.limit_hi = 3.0;
        }
        r
    }

    #[test]
    fn identity_and_sign_examples() {
        let r = wide_robot();
        let id = SymbolicJointMap::rest_to_neutral(&r);
        assert_eq!(id.apply(&r, &[0.1, 0.2, 0.3, 0.4]), [0.1, 0.2, 0.3, 0.4]);
        let m = SymbolicJointMap::with_scales(&r, [1.0, 1.0, -1.0, 1.0], None);
        assert_eq!(m.apply(&r, &[0.0, 0.0, 0.5, 0.0])[2], -0.5);
    }

    #[test]
    fn clamps_to_limits() {
        let r = RobotSpec::sawyer_like();
        let m = SymbolicJointMap::rest_to_neutral(&r);
        let q = m.apply(&r, &[5.0, -5.0, 0.0, 0.0]);
        let lim = r.mapped_limits();
        assert_eq!(q[0], lim[0].1);
        assert_eq!(q[1], lim[1].0);
    }

    #[test]
    fn rest_maps_to_neutral_and_validates() {
        for r in [RobotSpec::sawyer_like(), RobotSpec::kuka_like()] {
            let m = SymbolicJointMap::rest_to_neutral(&r);
            assert_eq!(m.apply(&r, &HUMAN_REST), r.neutral_mapped());
            m.validate(&r).unwrap();
            SymbolicJointMap::facing_demonstrator(&r).validate(&r).unwrap();
        }
        let r = RobotSpec::sawyer_like();
        let mut bad = SymbolicJointMap::rest_to_neutral(&r);
        bad.entries[1].scale = 0.0;
        assert!(bad.validate(&r).is_err());
        bad = SymbolicJointMap::rest_to_neutral(&RobotSpec::kuka_like());
        assert!(bad.validate(&r).is_err());
    }
}
