//! Domain records shared by every stage, plus relative-state arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension of a per-frame feature vector: 4 ego kinematics + 8 latent.
pub const FEATURE_DIM: usize = 12;
/// Size of the autoencoder bottleneck.
pub const LATENT_DIM: usize = 8;

pub type FeatureVector = [f64; FEATURE_DIM];

/// One vehicle's kinematic record at one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub vehicle_id: i64,
    pub frame: i64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub ax: f64,
    pub ay: f64,
    pub lane_id: i64,
}

impl VehicleState {
    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.vx, self.vy, self.ax, self.ay]
            .iter()
            .all(|v| v.is_finite())
            && self.frame >= 0
            && self.lane_id >= 1
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// A location in the ego-centred plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Position and velocity of `other` relative to `ego` (other minus ego).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeState {
    pub dx: f64,
    pub dy: f64,
    pub dvx: f64,
    pub dvy: f64,
}

pub fn relative_state(ego: &VehicleState, other: &VehicleState) -> RelativeState {
    RelativeState {
        dx: other.x - ego.x,
        dy: other.y - ego.y,
        dvx: other.vx - ego.vx,
        dvy: other.vy - ego.vy,
    }
}

/// Ego-centred rectangle and the grid the field is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoiConfig {
    pub d_front: f64,
    pub d_behind: f64,
    pub d_side: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Default for RoiConfig {
    fn default() -> Self {
        Self {
            d_front: 40.0,
            d_behind: 40.0,
            d_side: 6.0,
            dx: 5.0,
            dy: 1.0,
        }
    }
}

fn divides(span: f64, step: f64) -> Option<usize> {
    let n = span / step;
    let r = n.round();
    ((n - r).abs() < 1e-9).then_some(r as usize)
}

impl RoiConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.d_front, self.d_behind, self.d_side, self.dx, self.dy];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig(
                "ROI distances and grid steps must be positive".into(),
            ));
        }
        if divides(self.d_front + self.d_behind, self.dx).is_none() {
            return Err(Error::InvalidConfig(
                "d_front + d_behind must be a multiple of dx".into(),
            ));
        }
        if divides(2.0 * self.d_side, self.dy).is_none() {
            return Err(Error::InvalidConfig("2 * d_side must be a multiple of dy".into()));
        }
        Ok(())
    }

    /// Number of longitudinal grid points (columns).
    pub fn nx(&self) -> usize {
        divides(self.d_front + self.d_behind, self.dx).expect("validated roi") + 1
    }

    /// Number of lateral grid points (rows).
    pub fn ny(&self) -> usize {
        divides(2.0 * self.d_side, self.dy).expect("validated roi") + 1
    }

    pub fn x_at(&self, col: usize) -> f64 {
        -self.d_behind + col as f64 * self.dx
    }

    pub fn y_at(&self, row: usize) -> f64 {
        -self.d_side + row as f64 * self.dy
    }

    /// `(row, col)` of the grid point nearest the ego.
    pub fn ego_cell(&self) -> (usize, usize) {
        (
            (self.d_side / self.dy).round() as usize,
            (self.d_behind / self.dx).round() as usize,
        )
    }

    /// Grid points in row-major order (rows = lateral).
    pub fn grid_points(&self) -> Vec<Point> {
        let (ny, nx) = (self.ny(), self.nx());
        let mut pts = Vec::with_capacity(ny * nx);
        for r in 0..ny {
            for c in 0..nx {
                pts.push(Point::new(self.x_at(c), self.y_at(r)));
            }
        }
        pts
    }
}

/// Boundary-inclusive rectangle membership.
pub fn in_roi(dx: f64, dy: f64, roi: &RoiConfig) -> bool {
    -roi.d_behind <= dx && dx <= roi.d_front && dy.abs() <= roi.d_side
}

/// Ego state plus the in-ROI neighbours at one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub frame: i64,
    pub ego: VehicleState,
    pub neighbors: Vec<VehicleState>,
}

impl Scene {
    /// Builds a scene, rejecting neighbours outside the ROI, duplicate ids
    /// and the ego listed as its own neighbour.
    pub fn new(ego: VehicleState, neighbors: Vec<VehicleState>, roi: &RoiConfig) -> Result<Self> {
        if !ego.is_valid() {
            return Err(Error::InvalidScene(format!("ego {} has invalid state", ego.vehicle_id)));
        }
        let mut seen = std::collections::HashSet::new();
        for n in &neighbors {
            if n.vehicle_id == ego.vehicle_id {
                return Err(Error::InvalidScene("ego listed among its neighbors".into()));
            }
            if !seen.insert(n.vehicle_id) {
                return Err(Error::InvalidScene(format!(
                    "neighbor id {} appears twice",
                    n.vehicle_id
                )));
            }
            if !n.is_valid() {
                return Err(Error::InvalidScene(format!(
                    "neighbor {} has invalid state",
                    n.vehicle_id
                )));
            }
            let rel = relative_state(&ego, n);
            if !in_roi(rel.dx, rel.dy, roi) {
                return Err(Error::InvalidScene(format!(
                    "neighbor {} at ({}, {}) lies outside the ROI",
                    n.vehicle_id, rel.dx, rel.dy
                )));
            }
        }
        Ok(Self {
            frame: ego.frame,
            ego,
            neighbors,
        })
    }
}

/// Grid of relative velocities for one frame, `rows x cols x 2`.
///
/// Rows index the lateral coordinate, columns the longitudinal one;
/// channel 0 is the x-component and channel 1 the y-component.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTensor {
    pub frame: i64,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl FieldTensor {
    pub fn zeros(frame: i64, rows: usize, cols: usize) -> Self {
        Self {
            frame,
            rows,
            cols,
            values: vec![0.0; rows * cols * 2],
        }
    }

    /// Wraps row-major `[row][col][channel]` values.
    pub fn from_values(frame: i64, rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols * 2 {
            return Err(Error::ShapeError {
                expected: format!("{}", rows * cols * 2),
                got: format!("{}", values.len()),
            });
        }
        Ok(Self {
            frame,
            rows,
            cols,
            values,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, 2)
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.values[(row * self.cols + col) * 2 + channel]
    }

    pub fn set(&mut self, row: usize, col: usize, channel: usize, v: f64) {
        self.values[(row * self.cols + col) * 2 + channel] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// One channel as a row-major `rows x cols` vector.
    pub fn channel(&self, channel: usize) -> Vec<f64> {
        self.values.iter().skip(channel).step_by(2).copied().collect()
    }

    pub fn max_abs_diff(&self, other: &FieldTensor) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Kernel and skew parameters of the velocity field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldParams {
    pub amplitude: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub xi_x: f64,
    pub xi_y: f64,
    pub jitter: f64,
    pub include_ego_anchor: bool,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            sigma_x: 15.0,
            sigma_y: 1.5,
            lambda_x: 0.6,
            lambda_y: 0.9,
            xi_x: 2.0,
            xi_y: 2.0,
            jitter: 1e-8,
            include_ego_anchor: true,
        }
    }
}

impl FieldParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.amplitude, self.sigma_x, self.sigma_y, self.xi_x, self.xi_y];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig(
                "amplitude, length scales and xi must be positive".into(),
            ));
        }
        if !(self.jitter >= 0.0) || !self.lambda_x.is_finite() || !self.lambda_y.is_finite() {
            return Err(Error::InvalidConfig("jitter must be >= 0 and lambdas finite".into()));
        }
        Ok(())
    }
}
