//! Gaussian-process velocity fields.
//!
//! Each frame's neighbours are noise-free observations of the relative
//! velocity at their relative positions. The field is the posterior mean of
//! a zero-mean GP with a squared-exponential kernel evaluated on the ROI
//! grid, one independent regression per velocity channel. The
//! acceleration-sensitive variant multiplies every test/training
//! cross-covariance by a product of logistic factors driven by the training
//! vehicle's acceleration; the training Gram itself is left untouched.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::domain::{relative_state, FieldParams, FieldTensor, Point, RoiConfig, Scene};
use crate::error::{Error, Result};

/// Which velocity component a regression targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    X,
    Y,
}

impl Channel {
    fn index(self) -> usize {
        match self {
            Channel::X => 0,
            Channel::Y => 1,
        }
    }
}

/// Squared-exponential kernel with separate longitudinal/lateral length scales.
pub fn se_kernel(pi: Point, pj: Point, params: &FieldParams) -> f64 {
    let dx = pi.x - pj.x;
    let dy = pi.y - pj.y;
    params.amplitude
        * (-(dx * dx) / (2.0 * params.sigma_x * params.sigma_x) - (dy * dy) / (2.0 * params.sigma_y * params.sigma_y))
            .exp()
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Logistic skew of the covariance between test point `pi` and training
/// vehicle `pj` with acceleration `aj`. Larger ahead of an accelerating
/// vehicle, smaller behind it; `(xi_x / 2) * (xi_y / 2)` at zero acceleration.
pub fn skew_factor(pi: Point, pj: Point, aj: [f64; 2], params: &FieldParams) -> f64 {
    params.xi_x
        * logistic(params.lambda_x * aj[0] * (pi.x - pj.x))
        * params.xi_y
        * logistic(params.lambda_y * aj[1] * (pi.y - pj.y))
}

/// Factorized training system for one frame.
#[derive(Debug, Clone)]
pub struct GramSystem {
    points: Vec<Point>,
    accels: Vec<[f64; 2]>,
    gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    targets: [DVector<f64>; 2],
    weights: [DVector<f64>; 2],
    params: FieldParams,
}

impl GramSystem {
    /// Factorizes `K(p, p) + jitter * I` for the given observations.
    pub fn from_observations(
        points: Vec<Point>,
        accels: Vec<[f64; 2]>,
        targets_x: Vec<f64>,
        targets_y: Vec<f64>,
        params: &FieldParams,
    ) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::SingularGram("no training observations".into()));
        }
        if accels.len() != n || targets_x.len() != n || targets_y.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: accels.len().min(targets_x.len()).min(targets_y.len()),
            });
        }
        for i in 0..n {
            for j in i + 1..n {
                if points[i] == points[j] && (targets_x[i] != targets_x[j] || targets_y[i] != targets_y[j]) {
                    return Err(Error::SingularGram(format!(
                        "observations {i} and {j} share a location but disagree"
                    )));
                }
            }
        }
        let gram = DMatrix::from_fn(n, n, |i, j| {
            let k = se_kernel(points[i], points[j], params);
            if i == j {
                k + params.jitter
            } else {
                k
            }
        });
        let chol = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularGram(format!("{n}x{n} Gram is not positive definite")))?;
        let tx = DVector::from_vec(targets_x);
        let ty = DVector::from_vec(targets_y);
        let weights = [chol.solve(&tx), chol.solve(&ty)];
        Ok(Self {
            points,
            accels,
            gram,
            chol,
            targets: [tx, ty],
            weights,
            params: *params,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn targets(&self, channel: Channel) -> &DVector<f64> {
        &self.targets[channel.index()]
    }

    fn cross(&self, test: &[Point]) -> DMatrix<f64> {
        DMatrix::from_fn(test.len(), self.len(), |i, j| {
            se_kernel(test[i], self.points[j], &self.params)
        })
    }

    /// Value of the (optionally skewed) posterior mean at one point.
    fn mean_at(&self, p: Point, skewed: bool) -> [f64; 2] {
        let mut out = [0.0; 2];
        for j in 0..self.len() {
            let mut k = se_kernel(p, self.points[j], &self.params);
            if skewed {
                k *= skew_factor(p, self.points[j], self.accels[j], &self.params);
            }
            out[0] += k * self.weights[0][j];
            out[1] += k * self.weights[1][j];
        }
        out
    }
}

/// Training system for one scene: neighbour positions and velocities
/// relative to the ego, plus an optional ego anchor at the origin with zero
/// relative velocity and zero acceleration.
pub fn build_gram(scene: &Scene, params: &FieldParams) -> Result<GramSystem> {
    let mut points = Vec::with_capacity(scene.neighbors.len() + 1);
    let mut accels = Vec::with_capacity(points.capacity());
    let mut tx = Vec::with_capacity(points.capacity());
    let mut ty = Vec::with_capacity(points.capacity());
    for n in &scene.neighbors {
        let r = relative_state(&scene.ego, n);
        points.push(Point::new(r.dx, r.dy));
        accels.push([n.ax, n.ay]);
        tx.push(r.dvx);
        ty.push(r.dvy);
    }
    if params.include_ego_anchor {
        points.push(Point::ORIGIN);
        accels.push([0.0, 0.0]);
        tx.push(0.0);
        ty.push(0.0);
    }
    GramSystem::from_observations(points, accels, tx, ty, params)
}

/// `K(p*, p) K(p, p)^-1 dV` for one channel.
pub fn gp_posterior_mean(sys: &GramSystem, test: &[Point], channel: Channel) -> Vec<f64> {
    let c = channel.index();
    test.iter().map(|p| sys.mean_at(*p, false)[c]).collect()
}

/// `K(p*, p*) - K(p*, p) K(p, p)^-1 K(p, p*)`, symmetrized.
pub fn gp_posterior_cov(sys: &GramSystem, test: &[Point]) -> DMatrix<f64> {
    let cross = sys.cross(test);
    let mut v = cross.transpose();
    let l = sys.chol.l();
    l.solve_lower_triangular_mut(&mut v);
    let prior = DMatrix::from_fn(test.len(), test.len(), |i, j| se_kernel(test[i], test[j], &sys.params));
    let cov = prior - v.transpose() * v;
    (&cov + cov.transpose()) * 0.5
}

fn field_tensor(scene: &Scene, roi: &RoiConfig, params: &FieldParams, skewed: bool) -> Result<FieldTensor> {
    roi.validate()?;
    params.validate()?;
    let sys = build_gram(scene, params)?;
    let (ny, nx) = (roi.ny(), roi.nx());
    let mut field = FieldTensor::zeros(scene.frame, ny, nx);
    for r in 0..ny {
        for c in 0..nx {
            let m = sys.mean_at(Point::new(roi.x_at(c), roi.y_at(r)), skewed);
            field.set(r, c, 0, m[0]);
            field.set(r, c, 1, m[1]);
        }
    }
    Ok(field)
}

/// Acceleration-sensitive velocity field of one scene on the ROI grid.
pub fn as_gvf(scene: &Scene, roi: &RoiConfig, params: &FieldParams) -> Result<FieldTensor> {
    field_tensor(scene, roi, params, true)
}

/// Plain (unskewed) Gaussian velocity field.
pub fn gvf(scene: &Scene, roi: &RoiConfig, params: &FieldParams) -> Result<FieldTensor> {
    field_tensor(scene, roi, params, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl From<&RoiConfig> for GridSpec {
    fn from(roi: &RoiConfig) -> Self {
        Self {
            x0: -roi.d_behind,
            y0: -roi.d_side,
            dx: roi.dx,
            dy: roi.dy,
            nx: roi.nx(),
            ny: roi.ny(),
        }
    }
}

/// Serialized field: channels as row-major `ny x nx` arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub frame: i64,
    pub grid: GridSpec,
    pub dvx: Vec<f64>,
    pub dvy: Vec<f64>,
}

impl FieldRecord {
    pub fn new(field: &FieldTensor, roi: &RoiConfig) -> Self {
        Self {
            frame: field.frame,
            grid: roi.into(),
            dvx: field.channel(0),
            dvy: field.channel(1),
        }
    }

    pub fn to_tensor(&self) -> Result<FieldTensor> {
        let n = self.grid.nx * self.grid.ny;
        if self.dvx.len() != n || self.dvy.len() != n {
            return Err(Error::ShapeError {
                expected: format!("{n} values per channel"),
                got: format!("{} / {}", self.dvx.len(), self.dvy.len()),
            });
        }
        let values = self.dvx.iter().zip(&self.dvy).flat_map(|(a, b)| [*a, *b]).collect();
        FieldTensor::from_values(self.frame, self.grid.ny, self.grid.nx, values)
    }
}

pub fn export_field_json<W: Write>(field: &FieldTensor, roi: &RoiConfig, sink: W) -> Result<()> {
    serde_json::to_writer(sink, &FieldRecord::new(field, roi))?;
    Ok(())
}

/// Flat `frame,row,col,x,y,dvx,dvy` rows for plotting tools.
pub fn export_fields_csv<W: Write>(fields: &[FieldTensor], roi: &RoiConfig, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["frame", "row", "col", "x", "y", "dvx", "dvy"])?;
    for f in fields {
        let (rows, cols, _) = f.shape();
        for r in 0..rows {
            for c in 0..cols {
                w.write_record([
                    f.frame.to_string(),
                    r.to_string(),
                    c.to_string(),
                    roi.x_at(c).to_string(),
                    roi.y_at(r).to_string(),
                    f.get(r, c, 0).to_string(),
                    f.get(r, c, 1).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
