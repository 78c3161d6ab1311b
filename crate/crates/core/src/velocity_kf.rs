//! Linear Kalman filter on the object twist driven by dense optical flow.
//!
//! The state is the camera-frame twist `[linear, angular]` under a random
//! walk. Each object pixel of the previous frame contributes one 2-row
//! measurement `F_k(u, v) = J(u, v, d) · V + noise` with isotropic noise, so
//! the update is carried out in information form and only ever factors a 6x6
//! matrix, regardless of how many pixels are stacked.

use nalgebra::{DMatrix, DVector, Matrix2x6, Matrix3, Matrix6, SymmetricEigen, Vector2, Vector6};

use crate::error::{Error, Result};
use crate::geometry::{flow_jacobian_row, CameraIntrinsics, DepthMap, FlowField, Mask, Twist};

/// Ratio between the smallest and largest eigenvalue of the posterior
/// information below which the update is reported as degenerate.
const DEGENERATE_RATIO: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct TwistFilterConfig {
    /// Per-frame random-walk covariance of the linear part (m²/s²).
    pub q_linear: Matrix3<f64>,
    /// Per-frame random-walk covariance of the angular part (rad²/s²).
    pub q_angular: Matrix3<f64>,
    /// Flow noise standard deviation in pixels.
    pub sigma_flow: f64,
    /// Upper bound on the number of pixels stacked into one update.
    pub max_pixels: usize,
    /// Frame period in seconds.
    pub dt: f64,
    /// Evaluate each pixel's jacobian halfway along its flow vector instead
    /// of at the pixel itself. This cancels the second-order chord error of
    /// finite inter-frame motion.
    pub midpoint_jacobian: bool,
}

impl Default for TwistFilterConfig {
    fn default() -> Self {
        Self {
            q_linear: Matrix3::from_diagonal_element(0.05f64.powi(2)),
            q_angular: Matrix3::from_diagonal_element(0.2f64.powi(2)),
            sigma_flow: 1.0,
            max_pixels: 3000,
            dt: 1.0 / 30.0,
            midpoint_jacobian: true,
        }
    }
}

impl TwistFilterConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("q_linear", &self.q_linear), ("q_angular", &self.q_angular)] {
            if !is_psd(m) {
                return Err(Error::Config(format!("{name} must be positive semi-definite")));
            }
        }
        if !(self.sigma_flow > 0.0) {
            return Err(Error::Config("sigma_flow must be positive".into()));
        }
        if self.max_pixels < 100 {
            return Err(Error::Config("max_pixels must be at least 100".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        Ok(())
    }

    pub fn process_noise(&self) -> Matrix6<f64> {
        let mut q = Matrix6::zeros();
        q.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.q_linear);
        q.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.q_angular);
        q
    }
}

pub(crate) fn is_psd<const N: usize>(m: &nalgebra::SMatrix<f64, N, N>) -> bool {
    let d = DMatrix::from_column_slice(N, N, m.as_slice());
    (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0)
        && SymmetricEigen::new(d).eigenvalues.iter().all(|&e| e >= -1e-12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwistBelief {
    pub mean: Twist,
    pub covariance: Matrix6<f64>,
}

impl TwistBelief {
    pub fn new(mean: Twist, covariance: Matrix6<f64>) -> Self {
        Self { mean, covariance }
    }

    /// Zero twist with a broad isotropic prior.
    pub fn diffuse(variance: f64) -> Self {
        Self::new(Twist::zero(), Matrix6::from_diagonal_element(variance))
    }
}

/// Stacked flow observations with their jacobian rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMeasurement {
    rows: Vec<(Vector2<f64>, Matrix2x6<f64>)>,
}

impl FlowMeasurement {
    pub fn from_rows(rows: Vec<(Vector2<f64>, Matrix2x6<f64>)>) -> Self {
        Self { rows }
    }

    pub fn pixel_count(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[(Vector2<f64>, Matrix2x6<f64>)] {
        &self.rows
    }

    /// Stacked `2n` observation vector.
    pub fn y(&self) -> DVector<f64> {
        DVector::from_iterator(
            2 * self.rows.len(),
            self.rows.iter().flat_map(|(y, _)| [y.x, y.y]),
        )
    }

    /// Stacked `2n x 6` jacobian.
    pub fn jacobian(&self) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(2 * self.rows.len(), 6);
        for (i, (_, row)) in self.rows.iter().enumerate() {
            j.view_mut((2 * i, 0), (2, 6)).copy_from(row);
        }
        j
    }
}

/// Random-walk prediction: the mean is kept, the covariance grows by the
/// process noise.
pub fn predict(belief: &TwistBelief, cfg: &TwistFilterConfig) -> TwistBelief {
    TwistBelief::new(belief.mean, belief.covariance + cfg.process_noise())
}

/// Collects flow vectors over the previous-frame mask.
///
/// `mask_prev` and `depth_prev` belong to frame `k-1`, the frame the flow
/// vectors start from. Pixels without valid depth are skipped. Returns
/// `None` when nothing usable remains.
pub fn build_flow_measurement(
    flow: &FlowField,
    mask_prev: &Mask,
    depth_prev: &DepthMap,
    intr: &CameraIntrinsics,
    cfg: &TwistFilterConfig,
) -> Result<Option<FlowMeasurement>> {
    for dims in [mask_prev.dims(), depth_prev.dims()] {
        if dims != flow.dims() {
            return Err(Error::DimensionMismatch {
                expected: flow.dims(),
                got: dims,
            });
        }
    }
    let valid: Vec<(u32, u32, f64)> = mask_prev
        .pixels()
        .iter()
        .filter_map(|&(u, v)| depth_prev.get(u, v).map(|d| (u, v, d)))
        .collect();
    if valid.is_empty() {
        return Ok(None);
    }
    let n = valid.len();
    let keep = n.min(cfg.max_pixels);
    let mut rows = Vec::with_capacity(keep);
    for i in 0..keep {
        // Uniform stride over the row-major pixel list.
        let (u, v, d) = valid[i * n / keep];
        let [fu, fv] = flow.get(u, v);
        let (fu, fv) = (f64::from(fu), f64::from(fv));
        let (ju, jv) = if cfg.midpoint_jacobian {
            (f64::from(u) + 0.5 * fu, f64::from(v) + 0.5 * fv)
        } else {
            (f64::from(u), f64::from(v))
        };
        let j = flow_jacobian_row(ju, jv, d, intr, cfg.dt)?;
        rows.push((Vector2::new(fu, fv), j));
    }
    Ok(Some(FlowMeasurement { rows }))
}

/// Kalman correction with `y = J V + ν`, `ν ~ N(0, σ² I)`.
pub fn update(
    belief: &TwistBelief,
    meas: &FlowMeasurement,
    cfg: &TwistFilterConfig,
) -> Result<TwistBelief> {
    let inv_var = 1.0 / (cfg.sigma_flow * cfg.sigma_flow);
    let mut jtj = Matrix6::zeros();
    let mut jtr = Vector6::zeros();
    let m = belief.mean.to_vector();
    for (y, j) in &meas.rows {
        let r = y - j * m;
        jtj += j.transpose() * j;
        jtr += j.transpose() * r;
    }
    let prior_info = belief
        .covariance
        .cholesky()
        .ok_or_else(|| Error::Numerical("twist covariance is not positive-definite".into()))?
        .inverse();
    let info = symmetrize(&(prior_info + jtj * inv_var));
    let eig = SymmetricEigen::new(info).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > hi * DEGENERATE_RATIO) {
        return Err(Error::Numerical(format!(
            "degenerate flow geometry, information eigenvalues span [{lo:e}, {hi:e}]"
        )));
    }
    let chol = info
        .cholesky()
        .ok_or_else(|| Error::Numerical("posterior information is not positive-definite".into()))?;
    let cov = symmetrize(&chol.inverse());
    let mean = m + chol.solve(&(jtr * inv_var));
    Ok(TwistBelief::new(Twist::from_vector(&mean), cov))
}

pub(crate) fn symmetrize<const N: usize>(
    m: &nalgebra::SMatrix<f64, N, N>,
) -> nalgebra::SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

/// Outcome of one filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistStep {
    pub belief: TwistBelief,
    /// Velocity handed to the pose filter: the posterior mean.
    pub measurement: Twist,
    /// Number of stacked pixels, zero when the update was skipped.
    pub pixels: usize,
}

/// Predict, then correct with the flow over `mask_prev` when any pixel is
/// usable.
pub fn step(
    belief: &TwistBelief,
    flow: &FlowField,
    mask_prev: &Mask,
    depth_prev: &DepthMap,
    intr: &CameraIntrinsics,
    cfg: &TwistFilterConfig,
) -> Result<TwistStep> {
    let predicted = predict(belief, cfg);
    match build_flow_measurement(flow, mask_prev, depth_prev, intr, cfg)? {
        Some(meas) => {
            let posterior = update(&predicted, &meas, cfg)?;
            Ok(TwistStep {
                measurement: posterior.mean,
                belief: posterior,
                pixels: meas.pixel_count(),
            })
        }
        None => Ok(TwistStep {
            measurement: predicted.mean,
            belief: predicted,
            pixels: 0,
        }),
    }
}

/// Stateful wrapper owning the belief and configuration of one object.
#[derive(Debug, Clone)]
pub struct VelocityFilter {
    belief: TwistBelief,
    config: TwistFilterConfig,
}

impl VelocityFilter {
    pub fn new(config: TwistFilterConfig, initial: TwistBelief) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            belief: initial,
            config,
        })
    }

    pub fn belief(&self) -> &TwistBelief {
        &self.belief
    }

    pub fn config(&self) -> &TwistFilterConfig {
        &self.config
    }

    pub fn step(
        &mut self,
        flow: &FlowField,
        mask_prev: &Mask,
        depth_prev: &DepthMap,
        intr: &CameraIntrinsics,
    ) -> Result<Twist> {
        Ok(self.step_detailed(flow, mask_prev, depth_prev, intr)?.measurement)
    }

    /// Like [`VelocityFilter::step`], also reporting the stacked pixel count.
    pub fn step_detailed(
        &mut self,
        flow: &FlowField,
        mask_prev: &Mask,
        depth_prev: &DepthMap,
        intr: &CameraIntrinsics,
    ) -> Result<TwistStep> {
        let out = step(&self.belief, flow, mask_prev, depth_prev, intr, &self.config)?;
        self.belief = out.belief.clone();
        Ok(out)
    }
}
