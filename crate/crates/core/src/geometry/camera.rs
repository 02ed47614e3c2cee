use serde::{Deserialize, Serialize};

use super::{CameraPose, GeometryError, Point3, Vec3};

/// Ideal pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics")]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Deserialize)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = GeometryError;

    fn try_from(r: RawIntrinsics) -> Result<Self, Self::Error> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let ok = fx.is_finite()
            && fy.is_finite()
            && fx > 0.0
            && fy > 0.0
            && cx >= 0.0
            && cx < width as f64
            && cy >= 0.0
            && cy < height as f64;
        if !ok {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "fx={fx} fy={fy} cx={cx} cy={cy} size={width}x{height}"
            )));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    /// Phone-class default: 1920×1440 sensor, 1500 px focal length, centred
    /// principal point.
    pub fn phone_default() -> Self {
        Self { fx: 1500.0, fy: 1500.0, cx: 960.0, cy: 720.0, width: 1920, height: 1440 }
    }

    pub fn principal_point(&self) -> Pixel {
        Pixel { u: self.cx, v: self.cy }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

/// Result of projecting a world point: pixel plus camera-frame depth (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub pixel: Pixel,
    pub depth: f64,
}

pub fn project(intr: &CameraIntrinsics, pose: &CameraPose, p: &Point3) -> Result<Projection, GeometryError> {
    let c = pose.apply_inverse(p);
    if c.z <= 0.0 {
        return Err(GeometryError::BehindCamera { depth: c.z });
    }
    Ok(Projection {
        pixel: Pixel { u: intr.fx * (c.x / c.z) + intr.cx, v: intr.fy * (c.y / c.z) + intr.cy },
        depth: c.z,
    })
}

pub fn unproject(
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    pixel: Pixel,
    depth: f64,
) -> Result<Point3, GeometryError> {
    if !(depth > 0.0 && depth.is_finite()) {
        return Err(GeometryError::NonPositiveDepth(depth));
    }
    let c = Point3::new((pixel.u - intr.cx) / intr.fx * depth, (pixel.v - intr.cy) / intr.fy * depth, depth);
    Ok(pose.apply(&c))
}

/// World-space ray through a pixel, starting at the camera centre.
pub fn pixel_ray(intr: &CameraIntrinsics, pose: &CameraPose, pixel: Pixel) -> Ray {
    let dir_cam = Vec3::new((pixel.u - intr.cx) / intr.fx, (pixel.v - intr.cy) / intr.fy, 1.0);
    Ray::new(pose.origin(), pose.rotation.rotate(&dir_cam)).expect("pixel ray direction is never zero")
}

/// Half-line with unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRay")]
pub struct Ray {
    pub origin: Point3,
    direction: Vec3,
}

#[derive(Deserialize)]
struct RawRay {
    origin: Point3,
    direction: Vec3,
}

impl TryFrom<RawRay> for Ray {
    type Error = GeometryError;

    fn try_from(r: RawRay) -> Result<Self, Self::Error> {
        Ray::new(r.origin, r.direction)
    }
}

impl Ray {
    /// Normalizes `direction`; fails on zero or non-finite input. Directions
    /// already unit to round-off are kept as given, so serialized rays load
    /// back bit for bit.
    pub fn new(origin: Point3, direction: Vec3) -> Result<Self, GeometryError> {
        let n = direction.norm();
        if !(n.is_finite() && n > 1e-300) || !origin.coords.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidRay);
        }
        let direction = if (n - 1.0).abs() <= 4.0 * f64::EPSILON { direction } else { direction / n };
        Ok(Self { origin, direction })
    }

    pub fn direction(&self) -> &Vec3 {
        &self.direction
    }

    pub fn at(&self, t: f64) -> Point3 {
        self.origin + self.direction * t
    }
}
