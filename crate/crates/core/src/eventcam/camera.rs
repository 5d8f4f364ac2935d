use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::simcore::{euler_to_rotation, DroneState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// `r = f·θ`, the usual model for wide fisheye lenses.
    Equidistant,
    /// `r = f·tan θ`.
    Pinhole,
}

impl FromStr for Projection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equidistant" | "fisheye" => Ok(Self::Equidistant),
            "pinhole" => Ok(Self::Pinhole),
            _ => Err(Error::Config(format!("unknown projection {s:?}"))),
        }
    }
}

impl fmt::Display for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Equidistant => "equidistant",
            Self::Pinhole => "pinhole",
        })
    }
}

/// Camera intrinsics. The camera is rigidly mounted at the body origin
/// looking along body `+z` (down); image `u` runs along body `+y` and image
/// `v` along body `−x`, so the top of the image faces forward.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub projection: Projection,
    pub width: usize,
    pub height: usize,
    pub fov_deg: f64,
    /// Focal length in pixels, chosen so the horizontal field of view spans
    /// the sensor width.
    pub focal_px: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self::new(Projection::Equidistant, 640, 480, 140.0).expect("default camera is valid")
    }
}

/// Camera pose: position `[north, east, height]` and ZYX Euler angles.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: [f64; 3],
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn from_state(s: &DroneState) -> Self {
        Self { position: [s.x, s.y, s.z], roll: s.roll, pitch: s.pitch, yaw: s.yaw }
    }

    pub fn level(height: f64) -> Self {
        Self { position: [0.0, 0.0, height], ..Default::default() }
    }
}

impl CameraModel {
    pub fn new(projection: Projection, width: usize, height: usize, fov_deg: f64) -> Result<Self> {
        if !(fov_deg > 10.0 && fov_deg < 180.0) {
            return Err(Error::Config(format!("field of view {fov_deg} deg outside (10, 180)")));
        }
        if width == 0 || height == 0 || width % 2 != 0 || height % 2 != 0 {
            return Err(Error::Config(format!("resolution {width}x{height} must be even and non-zero")));
        }
        if width > u16::MAX as usize || height > u16::MAX as usize {
            return Err(Error::Config("resolution exceeds 16-bit coordinates".into()));
        }
        let half = fov_deg.to_radians() / 2.0;
        let focal_px = match projection {
            Projection::Equidistant => (width as f64 / 2.0) / half,
            Projection::Pinhole => (width as f64 / 2.0) / half.tan(),
        };
        Ok(Self { projection, width, height, fov_deg, focal_px })
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        Self::new(
            kv.parse_or("projection", d.projection)?,
            kv.parse_or("camera_width", d.width)?,
            kv.parse_or("camera_height", d.height)?,
            kv.parse_or("fov_deg", d.fov_deg)?,
        )
    }

    pub fn write_kv(&self, kv: &mut KeyValues) {
        kv.set("projection", self.projection);
        kv.set("camera_width", self.width);
        kv.set("camera_height", self.height);
        kv.set("fov_deg", self.fov_deg);
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    pub fn half_fov(&self) -> f64 {
        self.fov_deg.to_radians() / 2.0
    }

    /// Image radius of a ray at angle `theta` from the optical axis.
    pub fn radius(&self, theta: f64) -> f64 {
        match self.projection {
            Projection::Equidistant => self.focal_px * theta,
            Projection::Pinhole => self.focal_px * theta.tan(),
        }
    }

    /// Unit ray in camera coordinates through image point `(u, v)`, or
    /// `None` outside the field of view.
    pub fn unproject(&self, u: f64, v: f64) -> Option<[f64; 3]> {
        let (cx, cy) = self.principal_point();
        let (dx, dy) = (u - cx, v - cy);
        let r = dx.hypot(dy);
        let theta = match self.projection {
            Projection::Equidistant => r / self.focal_px,
            Projection::Pinhole => (r / self.focal_px).atan(),
        };
        if theta > self.half_fov() {
            return None;
        }
        if r == 0.0 {
            return Some([0.0, 0.0, 1.0]);
        }
        let s = theta.sin() / r;
        Some([dx * s, dy * s, theta.cos()])
    }

    /// Image point of a camera-frame direction, or `None` outside the field
    /// of view.
    pub fn project_direction(&self, d: [f64; 3]) -> Option<(f64, f64)> {
        let rho = d[0].hypot(d[1]);
        let theta = rho.atan2(d[2]);
        if theta > self.half_fov() {
            return None;
        }
        let (cx, cy) = self.principal_point();
        if rho == 0.0 {
            return Some((cx, cy));
        }
        let r = self.radius(theta);
        Some((cx + r * d[0] / rho, cy + r * d[1] / rho))
    }
}

pub(crate) fn camera_to_body(d: [f64; 3]) -> [f64; 3] {
    [-d[1], d[0], d[2]]
}

pub(crate) fn body_to_camera(d: [f64; 3]) -> [f64; 3] {
    [d[1], -d[0], d[2]]
}

/// Projects a ground point `[north, east]` (height 0) into the image.
pub fn project(camera: &CameraModel, pose: &Pose, ground: [f64; 2]) -> Option<(f64, f64)> {
    if !(pose.position[2] > 0.0) {
        return None;
    }
    let r = euler_to_rotation(pose.roll, pose.pitch, pose.yaw);
    // NED vector from camera to the ground point.
    let w = [ground[0] - pose.position[0], ground[1] - pose.position[1], pose.position[2]];
    let b = [0, 1, 2].map(|j| r[0][j] * w[0] + r[1][j] * w[1] + r[2][j] * w[2]);
    camera.project_direction(body_to_camera(b))
}
