use rayon::prelude::*;

use super::camera::{camera_to_body, CameraModel, Pose};
use super::mask::{MaskMode, PixelMask};
use super::texture::SceneTexture;
use crate::simcore::euler_to_rotation;

/// Intensity given to pixels whose ray misses the ground or falls outside
/// the lens circle.
pub const BACKGROUND_INTENSITY: f64 = 0.5;

/// Body-frame unit rays of every enabled pixel center, in compacted row-major
/// order. `None` marks pixels outside the field of view.
#[derive(Debug, Clone)]
pub struct RayTable {
    pub mask: PixelMask,
    rays: Vec<Option<[f64; 3]>>,
}

impl RayTable {
    pub fn new(camera: &CameraModel, mask: PixelMask) -> Self {
        let mut rays = Vec::with_capacity(mask.len());
        for gy in 0..mask.height() {
            for gx in 0..mask.width() {
                let (x, y) = mask.native(gx, gy);
                rays.push(camera.unproject(x as f64 + 0.5, y as f64 + 0.5).map(camera_to_body));
            }
        }
        Self { mask, rays }
    }

    pub fn full(camera: &CameraModel) -> Self {
        let mask = PixelMask::new(MaskMode::Full, camera.width, camera.height).expect("full mask always fits");
        Self::new(camera, mask)
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    /// Writes `ln(intensity)` for every enabled pixel into `out`.
    pub fn render(&self, pose: &Pose, scene: &SceneTexture, out: &mut [f64]) {
        assert_eq!(out.len(), self.rays.len(), "output buffer length");
        let r = euler_to_rotation(pose.roll, pose.pitch, pose.yaw);
        let [px, py, h] = pose.position;
        let bg = BACKGROUND_INTENSITY.ln();
        let w = self.mask.width().max(1);
        out.par_chunks_mut(w).zip(self.rays.par_chunks(w)).for_each(|(row, rays)| {
            for (o, ray) in row.iter_mut().zip(rays) {
                *o = match ray {
                    Some(b) => {
                        let d = [0, 1, 2].map(|i| r[i][0] * b[0] + r[i][1] * b[1] + r[i][2] * b[2]);
                        // d[2] is the downward component in NED.
                        if d[2] > 1e-9 && h > 0.0 {
                            let t = h / d[2];
                            scene.sample(px + t * d[0], py + t * d[1]).ln()
                        } else {
                            bg
                        }
                    }
                    None => bg,
                };
            }
        });
    }
}

/// Full-resolution log-intensity field, row-major `H×W`.
pub fn render_log_intensity(camera: &CameraModel, pose: &Pose, scene: &SceneTexture) -> Vec<f64> {
    let table = RayTable::full(camera);
    let mut out = vec![0.0; table.len()];
    table.render(pose, scene, &mut out);
    out
}
