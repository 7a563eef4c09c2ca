use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::WorldError;
use crate::Vec3;

/// Pinhole intrinsics plus a camera-to-world extrinsic made of an axis
/// permutation and a translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// `permutation[i]` is the world axis that camera axis `i` maps onto.
    pub permutation: [usize; 3],
    pub translation: Vec3,
    /// Scale X and Y by the raw millimetre depth while Z is converted to
    /// metres. Kept to show what that unit mix-up does.
    #[serde(default)]
    pub literal_depth_units: bool,
}

impl Default for CameraModel {
    /// A 640x480 depth camera looking along world +x at the conveyor.
    fn default() -> Self {
        CameraModel {
            fx: 615.0,
            fy: 615.0,
            cx: 320.0,
            cy: 240.0,
            permutation: [1, 2, 0],
            translation: Vec3::new(-0.30, 0.0, 0.20),
            literal_depth_units: false,
        }
    }
}

/// A pixel with depth in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelDepth {
    pub x: f64,
    pub y: f64,
    pub z_mm: f64,
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(WorldError::InvalidConfig("camera focal lengths must be positive".into()));
        }
        let mut seen = [false; 3];
        for &a in &self.permutation {
            if a > 2 || seen[a] {
                return Err(WorldError::InvalidConfig(format!(
                    "camera permutation {:?} is not a permutation of 0..3",
                    self.permutation
                )));
            }
            seen[a] = true;
        }
        Ok(())
    }

    /// Column `i` has its single 1 in row `permutation[i]`.
    pub fn permutation_matrix(&self) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for (i, &w) in self.permutation.iter().enumerate() {
            m[(w, i)] = 1.0;
        }
        m
    }

    pub fn pixel_to_camera(&self, x: f64, y: f64, z_mm: f64) -> Result<Vec3, WorldError> {
        if !(z_mm > 0.0) {
            return Err(WorldError::InvalidDepth(z_mm));
        }
        let z = z_mm / 1000.0;
        let scale = if self.literal_depth_units { z_mm } else { z };
        Ok(Vec3::new(
            (x - self.cx) * scale / self.fx,
            (y - self.cy) * scale / self.fy,
            z,
        ))
    }

    pub fn camera_to_world(&self, p: Vec3) -> Vec3 {
        let mut w = Vec3::zeros();
        for (i, &a) in self.permutation.iter().enumerate() {
            w[a] = p[i];
        }
        w + self.translation
    }

    pub fn world_to_camera(&self, w: Vec3) -> Vec3 {
        let d = w - self.translation;
        Vec3::from_fn(|i, _| d[self.permutation[i]])
    }

    pub fn world_to_pixel(&self, w: Vec3) -> Result<PixelDepth, WorldError> {
        let p = self.world_to_camera(w);
        if !(p.z > 0.0) {
            return Err(WorldError::BehindCamera(w));
        }
        Ok(PixelDepth {
            x: p.x * self.fx / p.z + self.cx,
            y: p.y * self.fy / p.z + self.cy,
            z_mm: p.z * 1000.0,
        })
    }

    /// `camera_to_world(pixel_to_camera(..))`.
    pub fn pixel_to_world(&self, px: &PixelDepth) -> Result<Vec3, WorldError> {
        Ok(self.camera_to_world(self.pixel_to_camera(px.x, px.y, px.z_mm)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn principal_point_and_scale() {
        let cam = CameraModel::default();
        assert_eq!(cam.pixel_to_camera(cam.cx, cam.cy, 1000.0).unwrap(), Vec3::new(0.0, 0.0, 1.0));
        let cam = CameraModel { fx: 600.0, ..Default::default() };
        let p = cam.pixel_to_camera(cam.cx + 600.0, cam.cy, 1000.0).unwrap();
        assert_eq!(p.x, 1.0);
        assert!(cam.pixel_to_camera(0.0, 0.0, 0.0).is_err());
        assert!(cam.pixel_to_camera(0.0, 0.0, -5.0).is_err());
    }

    #[test]
    fn literal_formula_keeps_millimetres_in_xy() {
        let cam = CameraModel { fx: 600.0, literal_depth_units: true, ..Default::default() };
        let p = cam.pixel_to_camera(cam.cx + 600.0, cam.cy, 1000.0).unwrap();
        assert_eq!(p.x, 1000.0);
        assert_eq!(p.z, 1.0);
    }

    #[test]
    fn default_permutation() {
        let cam = CameraModel {
            translation: Vec3::zeros(),
            ..Default::default()
        };
        assert_eq!(cam.camera_to_world(Vec3::new(1.0, 2.0, 3.0)), Vec3::new(3.0, 1.0, 2.0));
        let cam = CameraModel {
            translation: Vec3::new(0.5, 0.0, 0.0),
            ..Default::default()
        };
        assert_eq!(cam.camera_to_world(Vec3::zeros()), Vec3::new(0.5, 0.0, 0.0));
        let m = cam.permutation_matrix();
        assert!((m.determinant().abs() - 1.0).abs() < 1e-15);
        for i in 0..3 {
            assert_eq!(m.row(i).sum(), 1.0);
            assert_eq!(m.column(i).sum(), 1.0);
        }
        assert_eq!(m * Vec3::new(1.0, 2.0, 3.0), Vec3::new(3.0, 1.0, 2.0));
        let bad = CameraModel { permutation: [0, 0, 1], ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn world_pixel_round_trip() {
        let cam = CameraModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let w = Vec3::new(
                rng.gen_range(0.0..1.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.2..0.6),
            );
            let px = cam.world_to_pixel(w).unwrap();
            assert!(px.z_mm > 0.0);
            let back = cam.pixel_to_world(&px).unwrap();
            assert!((back - w).norm() < 1e-9);
        }
    }

    #[test]
    fn principal_ray_and_behind() {
        let cam = CameraModel::default();
        let on_axis = cam.camera_to_world(Vec3::new(0.0, 0.0, 0.7));
        let px = cam.world_to_pixel(on_axis).unwrap();
        assert!((px.x - cam.cx).abs() < 1e-12 && (px.y - cam.cy).abs() < 1e-12);
        let behind = cam.camera_to_world(Vec3::new(0.0, 0.0, -0.1));
        assert!(matches!(cam.world_to_pixel(behind), Err(WorldError::BehindCamera(_))));
    }
}
