//! Constant-velocity Kalman filter over `(cx, cy, w, h)` boxes with a
//! confidence-driven measurement-noise scale.
//!
//! The state is `[cx, cy, w, h, vcx, vcy, vw, vh]`. Process and measurement
//! noise standard deviations are proportional to the current box height.
//! Each update multiplies the preset measurement covariance `R` by a scalar
//! factor computed from the detection confidence attached to the track and
//! the number of frames the track spent unmatched.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::geometry::BBox;

pub type StateVector = SVector<f64, 8>;
pub type StateCovariance = SMatrix<f64, 8, 8>;
pub type Measurement = SVector<f64, 4>;
pub type MeasurementCovariance = SMatrix<f64, 4, 4>;

/// Smallest width/height kept in the state after an update.
pub const MIN_SIDE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub sigma_pos: f64,
    pub sigma_vel: f64,
    pub sigma_meas: f64,
    /// Detection-confidence threshold of the adaptive factor.
    pub th_det: f64,
    /// Frames an unmatched track is retained.
    pub n_max: u32,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_pos: 1.0 / 20.0,
            sigma_vel: 1.0 / 160.0,
            sigma_meas: 1.0 / 20.0,
            th_det: 0.6,
            n_max: 30,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let scales = [
            ("sigma_pos", self.sigma_pos),
            ("sigma_vel", self.sigma_vel),
            ("sigma_meas", self.sigma_meas),
        ];
        for (name, v) in scales {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.th_det > 0.0 && self.th_det < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "th_det must lie in (0, 1), got {}",
                self.th_det
            )));
        }
        if self.n_max < 1 {
            return Err(Error::InvalidConfig("n_max must be >= 1".into()));
        }
        Ok(())
    }

    /// Preset measurement covariance for a box of height `h`.
    pub fn measurement_covariance(&self, h: f64) -> MeasurementCovariance {
        let std = self.sigma_meas * h;
        MeasurementCovariance::from_diagonal_element(std * std)
    }

    /// Process covariance for one frame step at height `h`.
    pub fn process_covariance(&self, h: f64) -> StateCovariance {
        let p = (self.sigma_pos * h).powi(2);
        let v = (self.sigma_vel * h).powi(2);
        StateCovariance::from_diagonal(&StateVector::from_column_slice(&[
            p, p, p, p, v, v, v, v,
        ]))
    }
}

/// Measurement-noise scale for a matched track.
///
/// Above the confidence threshold the scale is `th_det / s_det` (below one,
/// so the measurement is trusted more). Otherwise it is
/// `exp(1 - s_det)^(1.5 - N)` with `N = max(0.5, n_lost / n_max)`, which
/// shrinks as the track stays lost longer.
pub fn adaptive_factor(s_det: f64, n_lost: u32, n_max: u32, th_det: f64) -> f64 {
    if s_det > th_det {
        return th_det / s_det;
    }
    let ratio = f64::from(n_lost) / f64::from(n_max.max(1));
    let n = if ratio > 0.5 { ratio } else { 0.5 };
    (1.0 - s_det).exp().powf(1.5 - n)
}

/// Mean and covariance of one track's filter.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
}

impl KalmanState {
    /// Starts a filter at `bbox` with zero velocity. Velocity stds are ten
    /// times the position stds.
    pub fn initiate(bbox: &BBox, cfg: &NoiseConfig) -> Self {
        let (cx, cy) = bbox.center();
        let mean = StateVector::from_column_slice(&[cx, cy, bbox.w, bbox.h, 0.0, 0.0, 0.0, 0.0]);
        let pos = 2.0 * cfg.sigma_pos * bbox.h;
        let vel = 10.0 * pos;
        let var = StateVector::from_column_slice(&[
            pos * pos,
            pos * pos,
            pos * pos,
            pos * pos,
            vel * vel,
            vel * vel,
            vel * vel,
            vel * vel,
        ]);
        Self {
            mean,
            covariance: StateCovariance::from_diagonal(&var),
        }
    }

    /// Current box estimate. Width and height are floored at [`MIN_SIDE`] so
    /// long coasting never yields a degenerate box.
    pub fn bbox(&self) -> BBox {
        let w = self.mean[2].max(MIN_SIDE);
        let h = self.mean[3].max(MIN_SIDE);
        BBox {
            x: self.mean[0] - w / 2.0,
            y: self.mean[1] - h / 2.0,
            w,
            h,
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.covariance - self.covariance.transpose()).abs().max() <= tol
    }

    pub fn is_positive_definite(&self) -> bool {
        self.covariance.cholesky().is_some()
    }
}

pub fn transition_matrix() -> StateCovariance {
    let mut f = StateCovariance::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

pub fn observation_matrix() -> SMatrix<f64, 4, 8> {
    SMatrix::<f64, 4, 8>::identity()
}

pub fn measurement_of(bbox: &BBox) -> Measurement {
    let (cx, cy) = bbox.center();
    Measurement::new(cx, cy, bbox.w, bbox.h)
}

fn symmetrize(m: &StateCovariance) -> StateCovariance {
    (m + m.transpose()) * 0.5
}

/// Advances the state one frame under constant velocity.
pub fn predict(state: &KalmanState, cfg: &NoiseConfig) -> KalmanState {
    let f = transition_matrix();
    let q = cfg.process_covariance(state.mean[3].max(MIN_SIDE));
    let mean = f * state.mean;
    let covariance = symmetrize(&(f * state.covariance * f.transpose() + q));
    KalmanState { mean, covariance }
}

/// Measurement update with noise covariance `alpha * R`.
pub fn update(
    state: &KalmanState,
    measurement: &BBox,
    alpha: f64,
    cfg: &NoiseConfig,
) -> Result<KalmanState> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "measurement noise scale must be positive, got {alpha}"
        )));
    }
    let h_mat = observation_matrix();
    let r = cfg.measurement_covariance(state.mean[3].max(MIN_SIDE)) * alpha;

    let projected_mean = h_mat * state.mean;
    let innovation_cov = h_mat * state.covariance * h_mat.transpose() + r;
    let chol = innovation_cov.cholesky().ok_or(Error::DegenerateFilter)?;

    // K = P H^T S^-1, solved as S K^T = H P
    let pht = state.covariance * h_mat.transpose();
    let gain = chol.solve(&pht.transpose()).transpose();

    let innovation = measurement_of(measurement) - projected_mean;
    let mut mean = state.mean + gain * innovation;
    mean[2] = mean[2].max(MIN_SIDE);
    mean[3] = mean[3].max(MIN_SIDE);

    let covariance = symmetrize(&(state.covariance - gain * innovation_cov * gain.transpose()));
    Ok(KalmanState { mean, covariance })
}
