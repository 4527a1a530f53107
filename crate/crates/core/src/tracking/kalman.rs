use nalgebra::{Matrix3, Matrix3x6, Matrix6, SymmetricEigen, Vector3, Vector6};

use crate::error::{Error, Result};

/// Constant-velocity state `(x, y, z, vx, vy, vz)` with covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub mean: Vector6<f64>,
    pub covariance: Matrix6<f64>,
}

impl KalmanState {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>, pos_var: f64, vel_var: f64) -> Self {
        let mut mean = Vector6::zeros();
        mean.fixed_rows_mut::<3>(0).copy_from(&position);
        mean.fixed_rows_mut::<3>(3).copy_from(&velocity);
        let mut cov = Matrix6::zeros();
        for i in 0..3 {
            cov[(i, i)] = pos_var;
            cov[(i + 3, i + 3)] = vel_var;
        }
        Self {
            mean,
            covariance: cov,
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        self.mean.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.mean.fixed_rows::<3>(3).into_owned()
    }

    /// Symmetric within 1e-9 (relative) and no eigenvalue below −1e-9 (relative).
    pub fn check_psd(&self) -> Result<()> {
        check_psd(&self.covariance)
    }
}

fn check_psd(p: &Matrix6<f64>) -> Result<()> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPsd);
    }
    let scale = p.amax().max(1.0);
    if (p - p.transpose()).amax() > 1e-9 * scale {
        return Err(Error::NotPsd);
    }
    let eig = SymmetricEigen::new((p + p.transpose()) * 0.5);
    if eig.eigenvalues.min() < -1e-9 * scale {
        return Err(Error::NotPsd);
    }
    Ok(())
}

fn h() -> Matrix3x6<f64> {
    let mut h = Matrix3x6::zeros();
    for i in 0..3 {
        h[(i, i)] = 1.0;
    }
    h
}

/// Constant-velocity prediction with white-acceleration process noise of
/// spectral density `accel_noise` (m²/s³).
pub fn kf_predict(state: &KalmanState, dt: f64, accel_noise: f64) -> Result<KalmanState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    state.check_psd()?;
    let mut f = Matrix6::identity();
    for i in 0..3 {
        f[(i, i + 3)] = dt;
    }
    let mut q = Matrix6::zeros();
    for i in 0..3 {
        q[(i, i)] = dt.powi(3) / 3.0;
        q[(i, i + 3)] = dt * dt / 2.0;
        q[(i + 3, i)] = dt * dt / 2.0;
        q[(i + 3, i + 3)] = dt;
    }
    let cov = f * state.covariance * f.transpose() + q * accel_noise;
    Ok(KalmanState {
        mean: f * state.mean,
        covariance: (cov + cov.transpose()) * 0.5,
    })
}

/// Joseph-form update on a 3D position measurement with isotropic variance.
pub fn kf_update(state: &KalmanState, measured: &Vector3<f64>, noise_var: f64) -> Result<KalmanState> {
    if !(noise_var >= 0.0) {
        return Err(Error::InvalidParameter("measurement variance must be >= 0".into()));
    }
    state.check_psd()?;
    let h = h();
    let r = Matrix3::identity() * noise_var;
    let s = h * state.covariance * h.transpose() + r;
    let s_inv = s.try_inverse().ok_or(Error::NotPsd)?;
    let k = state.covariance * h.transpose() * s_inv;
    let innovation = measured - h * state.mean;
    let ikh = Matrix6::identity() - k * h;
    let cov = ikh * state.covariance * ikh.transpose() + k * r * k.transpose();
    Ok(KalmanState {
        mean: state.mean + k * innovation,
        covariance: (cov + cov.transpose()) * 0.5,
    })
}

/// Position gain of the last update, `K[0][0]`, handy for convergence checks.
pub fn position_gain(state: &KalmanState, noise_var: f64) -> f64 {
    let p = state.covariance[(0, 0)];
    p / (p + noise_var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_velocity_prediction() {
        let s = KalmanState::new(Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0), 1.0, 1.0);
        let p = kf_predict(&s, 1.0, 0.1).unwrap();
        let want = Vector6::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        assert!((p.mean - want).amax() < 1e-15);
    }

    #[test]
    fn noiseless_measurement_is_adopted() {
        let s = KalmanState::new(Vector3::new(1.0, 2.0, 3.0), Vector3::zeros(), 4.0, 9.0);
        let z = Vector3::new(1.5, 1.0, 3.2);
        let u = kf_update(&s, &z, 0.0).unwrap();
        assert!((u.position() - z).amax() < 1e-12);
    }

    #[test]
    fn rejects_non_psd() {
        let mut s = KalmanState::new(Vector3::zeros(), Vector3::zeros(), 1.0, 1.0);
        s.covariance[(0, 0)] = -1.0;
        assert!(matches!(kf_predict(&s, 0.1, 1.0), Err(Error::NotPsd)));
        assert!(matches!(kf_update(&s, &Vector3::zeros(), 1.0), Err(Error::NotPsd)));
    }
}
