//! Frame math for the local policy: pinhole projection and back-projection,
//! the camera-to-robot axis remap and the planar robot-to-world transform.
//!
//! Conventions:
//! - camera frame is Z forward, X right, Y down;
//! - depth `d` is the camera Z coordinate (plane depth), not ray length;
//! - robot frame is x forward, y left; world headings are counterclockwise.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{Scene, SceneError, SceneObject};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-positive depth {0} cannot be back-projected")]
    NonPositiveDepth(f64),
    #[error("point is behind the camera (Z = {0})")]
    BehindCamera(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// Planar point in meters (world or robot frame, depending on context).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// 3D world point in meters, z up.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn planar(self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t > PI {
        t - TAU
    } else {
        t
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// Square-pixel camera with the principal point at the image center and
    /// the given horizontal field of view.
    pub fn from_hfov(width: u32, height: u32, hfov: f64) -> Result<Self, GeometryError> {
        let f = (width as f64 / 2.0) / (hfov / 2.0).tan();
        Self::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidIntrinsics(format!("{self:?}")))
        }
    }

    pub fn hfov(&self) -> f64 {
        2.0 * (self.width as f64 / (2.0 * self.fx)).atan()
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64
    }
}

impl Default for CameraIntrinsics {
    /// 640x480 with a 90 degree horizontal field of view.
    fn default() -> Self {
        Self { fx: 320.0, fy: 320.0, cx: 320.0, cy: 240.0, width: 640, height: 480 }
    }
}

/// Planar robot pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct AgentPose {
    pub x_r: f64,
    pub y_r: f64,
    /// Heading in `(-pi, pi]`, counterclockwise from world +x.
    pub theta_r: f64,
}

impl AgentPose {
    pub fn new(x_r: f64, y_r: f64, theta_r: f64) -> Self {
        Self { x_r, y_r, theta_r: wrap_angle(theta_r) }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x_r, self.y_r)
    }

    /// Same position, heading rotated by `delta`.
    pub fn rotated(&self, delta: f64) -> Self {
        Self::new(self.x_r, self.y_r, self.theta_r + delta)
    }

    /// Pose of `self` expressed in the world when `self` is given relative to `base`.
    pub fn compose(base: &AgentPose, rel: &AgentPose) -> AgentPose {
        let p = robot_to_world(rel.position(), base);
        AgentPose::new(p.x, p.y, base.theta_r + rel.theta_r)
    }
}

impl From<[f64; 3]> for AgentPose {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<AgentPose> for [f64; 3] {
    fn from(p: AgentPose) -> Self {
        [p.x_r, p.y_r, p.theta_r]
    }
}

/// Pixel coordinates plus plane depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
    pub d: f64,
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64, d: f64) -> Self {
        Self { u, v, d }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct CameraPoint {
    pub X: f64,
    pub Y: f64,
    pub Z: f64,
}

impl CameraPoint {
    #[allow(non_snake_case)]
    pub const fn new(X: f64, Y: f64, Z: f64) -> Self {
        Self { X, Y, Z }
    }
}

/// Result of [`project`]: the pixel and whether it lands inside the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: PixelPoint,
    pub in_frame: bool,
}

pub fn backproject(p: PixelPoint, k: &CameraIntrinsics) -> Result<CameraPoint, GeometryError> {
    if !(p.d > 0.0) {
        return Err(GeometryError::NonPositiveDepth(p.d));
    }
    Ok(CameraPoint::new((p.u - k.cx) * p.d / k.fx, (p.v - k.cy) * p.d / k.fy, p.d))
}

pub fn project(c: CameraPoint, k: &CameraIntrinsics) -> Result<Projection, GeometryError> {
    if !(c.Z > 0.0) {
        return Err(GeometryError::BehindCamera(c.Z));
    }
    let u = k.fx * c.X / c.Z + k.cx;
    let v = k.fy * c.Y / c.Z + k.cy;
    Ok(Projection { pixel: PixelPoint::new(u, v, c.Z), in_frame: k.contains(u, v) })
}

/// Camera frame to planar robot frame: forward is camera Z, left is -X.
/// Height is dropped.
pub fn camera_to_robot(c: CameraPoint) -> Point2 {
    Point2::new(c.Z, -c.X)
}

/// Rotation by the pose heading followed by translation to the pose position.
pub fn robot_to_world(p: Point2, pose: &AgentPose) -> Point2 {
    let (s, c) = pose.theta_r.sin_cos();
    Point2::new(pose.x_r + (c * p.x - s * p.y), pose.y_r + (s * p.x + c * p.y))
}

/// Inverse of [`robot_to_world`].
pub fn world_to_robot(p: Point2, pose: &AgentPose) -> Point2 {
    let (s, c) = pose.theta_r.sin_cos();
    let dx = p.x - pose.x_r;
    let dy = p.y - pose.y_r;
    Point2::new(c * dx + s * dy, -s * dx + c * dy)
}

/// World point to camera frame for a camera at the pose origin, looking along
/// the pose heading, mounted `camera_height` meters above the floor.
pub fn world_to_camera(p: Point3, pose: &AgentPose, camera_height: f64) -> CameraPoint {
    let r = world_to_robot(p.planar(), pose);
    CameraPoint::new(-r.y, camera_height - p.z, r.x)
}

/// Reached within `radius` of the target with an unobstructed line of sight.
pub fn success(pose: &AgentPose, target: &SceneObject, scene: &Scene, radius: f64) -> Result<bool, SceneError> {
    if pose.position().distance(target.position.planar()) > radius {
        return Ok(false);
    }
    scene.line_of_sight_to_object(pose.position(), target)
}
