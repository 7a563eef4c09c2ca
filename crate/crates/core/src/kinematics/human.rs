use std::f64::consts::PI;

use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

use super::KinematicsError;
use crate::Vec3;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Human arm angles, radians:
/// `[torso yaw, shoulder elevation, elbow flexion, wrist deviation]`.
///
/// * yaw rotates the body about the vertical, relative to `heading`;
/// * elevation is measured in the body's sagittal plane from hanging
///   straight down (0) towards pointing forward (pi/2);
/// * flexion is the forearm's additional rotation in the same plane, 0 for
///   a straight arm, positive bending forward;
/// * deviation is the hand's additional rotation past the forearm.
pub type HumanAngles = [f64; 4];

/// Range of each human angle used for sampling and clamping.
pub const HUMAN_ANGLE_LIMITS: [(f64, f64); 4] = [(-1.4, 1.4), (-0.6, 2.7), (0.0, 2.6), (-1.2, 1.2)];

/// Positions of the tracked arm joints for one frame, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmKeypoints {
    pub hip: Vec3,
    pub shoulder: Vec3,
    pub elbow: Vec3,
    pub wrist: Vec3,
    #[serde(default)]
    pub index_finger: Option<Vec3>,
    #[serde(default)]
    pub thumb: Option<Vec3>,
}

impl ArmKeypoints {
    /// The four core joints, hip to wrist.
    pub fn core(&self) -> [Vec3; 4] {
        [self.hip, self.shoulder, self.elbow, self.wrist]
    }

    /// All six joints; missing fingers are placed at the wrist.
    pub fn six(&self) -> [Vec3; 6] {
        [
            self.hip,
            self.shoulder,
            self.elbow,
            self.wrist,
            self.index_finger.unwrap_or(self.wrist),
            self.thumb.unwrap_or(self.wrist),
        ]
    }

    pub fn from_six(p: [Vec3; 6]) -> Self {
        ArmKeypoints {
            hip: p[0],
            shoulder: p[1],
            elbow: p[2],
            wrist: p[3],
            index_finger: Some(p[4]),
            thumb: Some(p[5]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.six().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    pub fn translated(&self, d: Vec3) -> Self {
        ArmKeypoints {
            hip: self.hip + d,
            shoulder: self.shoulder + d,
            elbow: self.elbow + d,
            wrist: self.wrist + d,
            index_finger: self.index_finger.map(|p| p + d),
            thumb: self.thumb.map(|p| p + d),
        }
    }
}

/// Body placement and segment lengths of the demonstrator's arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanArmGeometry {
    /// Hip keypoint in world coordinates.
    pub origin: Vec3,
    /// World yaw of the body's forward axis at zero torso yaw.
    pub heading: f64,
    /// Shoulder position relative to the hip in the body frame
    /// (x forward, y left, z up). Needs a non-zero lateral part.
    pub shoulder_offset: Vec3,
    pub upper_arm: f64,
    pub forearm: f64,
    pub hand: f64,
    /// Lateral (body y) offset of the thumb from the hand axis.
    pub thumb_offset: f64,
}

impl Default for HumanArmGeometry {
    fn default() -> Self {
        HumanArmGeometry {
            origin: Vec3::new(0.78, 0.0, -0.10),
            heading: PI,
            shoulder_offset: Vec3::new(0.0, -0.17, 0.45),
            upper_arm: 0.33,
            forearm: 0.31,
            hand: 0.08,
            thumb_offset: 0.03,
        }
    }
}

fn planar_dir(angle: f64) -> Vec3 {
    Vec3::new(angle.sin(), 0.0, -angle.cos())
}

fn planar_angle(v: &Vec3) -> f64 {
    v.x.atan2(-v.z)
}

impl HumanArmGeometry {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.upper_arm > 0.0 && self.forearm > 0.0 && self.hand > 0.0) {
            return Err(KinematicsError::InvalidSpec("segment lengths must be positive".into()));
        }
        if self.shoulder_offset.xy().norm() < 1e-6 {
            return Err(KinematicsError::InvalidSpec(
                "shoulder offset needs a horizontal component to recover torso yaw".into(),
            ));
        }
        Ok(())
    }

    fn body_rotation(&self, yaw: f64) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vec3::z_axis(), self.heading + yaw)
    }

    pub fn shoulder(&self, yaw: f64) -> Vec3 {
        self.origin + self.body_rotation(yaw) * self.shoulder_offset
    }

    /// Keypoints for the given angles, fingers included.
    pub fn fk(&self, q: &HumanAngles) -> ArmKeypoints {
        let rot = self.body_rotation(q[0]);
        let shoulder = self.origin + rot * self.shoulder_offset;
        let a1 = q[1];
        let a2 = a1 + q[2];
        let a3 = a2 + q[3];
        let elbow = shoulder + rot * (planar_dir(a1) * self.upper_arm);
        let wrist = elbow + rot * (planar_dir(a2) * self.forearm);
        let index = wrist + rot * (planar_dir(a3) * self.hand);
        let thumb = wrist + rot * (planar_dir(a3) * (0.5 * self.hand) + Vec3::new(0.0, self.thumb_offset, 0.0));
        ArmKeypoints {
            hip: self.origin,
            shoulder,
            elbow,
            wrist,
            index_finger: Some(index),
            thumb: Some(thumb),
        }
    }

    /// Recovers the four angles from keypoints. The wrist deviation is 0 when
    /// no index-finger keypoint is present.
    pub fn angles_from_keypoints(&self, k: &ArmKeypoints) -> Result<HumanAngles, KinematicsError> {
        if !k.is_finite() {
            return Err(KinematicsError::Degenerate("non-finite keypoint".into()));
        }
        let upper = k.elbow - k.shoulder;
        let fore = k.wrist - k.elbow;
        if upper.norm() < 1e-9 || fore.norm() < 1e-9 {
            return Err(KinematicsError::Degenerate("zero-length arm segment".into()));
        }
        let torso = k.shoulder - k.hip;
        if torso.xy().norm() < 1e-9 {
            return Err(KinematicsError::Degenerate("shoulder directly above hip".into()));
        }
        let offset_angle = self.shoulder_offset.y.atan2(self.shoulder_offset.x);
        let yaw = wrap_angle(torso.y.atan2(torso.x) - offset_angle - self.heading);
        let inv = self.body_rotation(yaw).inverse();
        let a1 = planar_angle(&(inv * upper));
        let a2 = planar_angle(&(inv * fore));
        let dev = match k.index_finger {
            Some(f) if (f - k.wrist).norm() > 1e-9 => wrap_angle(planar_angle(&(inv * (f - k.wrist))) - a2),
            _ => 0.0,
        };
        Ok([yaw, wrap_angle(a1), wrap_angle(a2 - a1), dev])
    }

    /// Angles that put the wrist exactly at `target`, with the elbow bent
    /// forward, and the hand turned by `deviation` (clamped to its range).
    pub fn reach(&self, target: Vec3, deviation: f64) -> Result<HumanAngles, KinematicsError> {
        let d = target - self.origin;
        let r = d.xy().norm();
        let sy = self.shoulder_offset.y;
        if r <= sy.abs() + 1e-9 {
            return Err(KinematicsError::Unreachable(format!(
                "target {target:?} is inside the torso column"
            )));
        }
        let psi = d.y.atan2(d.x) - (sy / r).asin();
        let yaw = wrap_angle(psi - self.heading);
        let bx = r * (sy / r).asin().cos();
        let px = bx - self.shoulder_offset.x;
        let pz = d.z - self.shoulder_offset.z;
        let dist = (px * px + pz * pz).sqrt();
        let (l1, l2) = (self.upper_arm, self.forearm);
        if dist > l1 + l2 - 1e-9 || dist < (l1 - l2).abs() + 1e-9 {
            return Err(KinematicsError::Unreachable(format!(
                "target {target:?} is {dist:.3} m from the shoulder"
            )));
        }
        let a = px.atan2(-pz);
        let cos_kappa = ((l1 * l1 + dist * dist - l2 * l2) / (2.0 * l1 * dist)).clamp(-1.0, 1.0);
        let cos_inner = ((l1 * l1 + l2 * l2 - dist * dist) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
        let elevation = a - cos_kappa.acos();
        let flexion = PI - cos_inner.acos();
        let (lo, hi) = HUMAN_ANGLE_LIMITS[3];
        Ok([yaw, elevation, flexion, deviation.clamp(lo, hi)])
    }
}

/// Free-function form of [`HumanArmGeometry::fk`].
pub fn human_arm_fk(geometry: &HumanArmGeometry, q: &HumanAngles) -> ArmKeypoints {
    geometry.fk(q)
}

/// Free-function form of [`HumanArmGeometry::angles_from_keypoints`].
pub fn joint_angles_from_keypoints(
    geometry: &HumanArmGeometry,
    k: &ArmKeypoints,
) -> Result<HumanAngles, KinematicsError> {
    geometry.angles_from_keypoints(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_angles(rng: &mut ChaCha8Rng) -> HumanAngles {
        HUMAN_ANGLE_LIMITS.map(|(lo, hi)| rng.gen_range(lo..=hi))
    }

    #[test]
    fn zero_pose_hangs_down() {
        let g = HumanArmGeometry::default();
        let k = g.fk(&[0.0; 4]);
        let down = Vec3::new(0.0, 0.0, -1.0);
        assert!(((k.elbow - k.shoulder).normalize() - down).norm() < 1e-12);
        assert!(((k.wrist - k.elbow).normalize() - down).norm() < 1e-12);
        assert!(((k.elbow - k.shoulder).norm() - g.upper_arm).abs() < 1e-15);
        assert_eq!(k.hip, g.origin);
        assert_eq!(g.angles_from_keypoints(&k).unwrap(), [0.0; 4]);
    }

    #[test]
    fn right_angle_flexion() {
        let g = HumanArmGeometry::default();
        let k = g.fk(&[0.3, 0.7, PI / 2.0, 0.0]);
        let a = k.shoulder - k.elbow;
        let b = k.wrist - k.elbow;
        assert!((a.angle(&b) - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn straight_arm_has_zero_flexion() {
        let g = HumanArmGeometry::default();
        let mut k = g.fk(&[0.0, 1.0, 0.0, 0.0]);
        let dir = (k.elbow - k.shoulder).normalize();
        k.wrist = k.elbow + dir * 0.25;
        k.index_finger = None;
        let q = g.angles_from_keypoints(&k).unwrap();
        assert!(q[2].abs() < 1e-12);
        assert_eq!(q[3], 0.0);
    }

    #[test]
    fn extraction_inverts_fk() {
        let g = HumanArmGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let q = random_angles(&mut rng);
            let back = g.angles_from_keypoints(&g.fk(&q)).unwrap();
            for i in 0..4 {
                assert!((back[i] - q[i]).abs() < 1e-6, "{q:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn degenerate_keypoints_rejected() {
        let g = HumanArmGeometry::default();
        let mut k = g.fk(&[0.0; 4]);
        k.elbow = k.shoulder;
        assert!(matches!(g.angles_from_keypoints(&k), Err(KinematicsError::Degenerate(_))));
        let mut k = g.fk(&[0.0; 4]);
        k.wrist.x = f64::NAN;
        assert!(g.angles_from_keypoints(&k).is_err());
    }

    #[test]
    fn reach_puts_wrist_on_target() {
        let g = HumanArmGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..300 {
            let q = random_angles(&mut rng);
            let target = g.fk(&q).wrist;
            let sol = g.reach(target, 0.2).unwrap();
            assert!((g.fk(&sol).wrist - target).norm() < 1e-9);
            assert!(sol[2] >= 0.0);
            assert_eq!(sol[3], 0.2);
        }
        assert!(g.reach(g.origin + Vec3::new(-3.0, 0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }
}
