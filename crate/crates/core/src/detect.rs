//! Non-cryptographic integrity checks: angle-of-arrival gate (ULA + ESPRIT),
//! DL/UL position handshake and an innovation-gated constant-velocity
//! Kalman tracker with M-of-N reacquisition.

use nalgebra::{DMatrix, Matrix2, Matrix2x4, Matrix4, SymmetricEigen, Vector2, Vector4};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geom::Point;
use crate::rng::{complex_gaussian, rng_from};
use crate::{DetectionVerdict, Error, Result, Technique, C64};

/// Chi-square(2) gate at 85% confidence: -2 ln(0.15).
pub const DEFAULT_GATE_GAMMA: f64 = 3.794_239_969_771_763;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UlaConfig {
    pub n_elements: usize,
    pub spacing_wavelengths: f64,
    pub snapshots: usize,
}

impl Default for UlaConfig {
    fn default() -> Self {
        Self {
            n_elements: 5,
            spacing_wavelengths: 0.5,
            snapshots: 48,
        }
    }
}

impl UlaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_elements < 2 {
            return Err(Error::Config("ULA needs at least two elements".into()));
        }
        if !(self.spacing_wavelengths > 0.0 && self.spacing_wavelengths <= 0.5) {
            return Err(Error::Config(
                "ULA spacing must be in (0, 0.5] wavelengths".into(),
            ));
        }
        if self.snapshots == 0 {
            return Err(Error::Config("ULA needs at least one snapshot".into()));
        }
        Ok(())
    }

    pub fn steering(&self, theta_deg: f64) -> Vec<C64> {
        let phi =
            2.0 * std::f64::consts::PI * self.spacing_wavelengths * theta_deg.to_radians().sin();
        (0..self.n_elements)
            .map(|m| C64::from_polar(1.0, phi * m as f64))
            .collect()
    }
}

/// One impinging source: per-snapshot complex amplitudes and azimuth.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidentSignal {
    pub amplitudes: Vec<C64>,
    pub theta_deg: f64,
}

impl IncidentSignal {
    /// Random-amplitude source of mean power `power`.
    pub fn random<R: Rng + ?Sized>(
        theta_deg: f64,
        power: f64,
        snapshots: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            amplitudes: (0..snapshots)
                .map(|_| complex_gaussian(rng, power))
                .collect(),
            theta_deg,
        }
    }
}

/// Array snapshot matrix `[n_elements x snapshots]`.
pub fn ula_snapshots(
    sources: &[IncidentSignal],
    ula: &UlaConfig,
    noise_var: f64,
    seed: u64,
) -> Result<DMatrix<C64>> {
    let t = ula.snapshots;
    if t == 0 {
        return Err(Error::param("at least one snapshot is required"));
    }
    if let Some(s) = sources.iter().find(|s| s.amplitudes.len() != t) {
        return Err(Error::DimensionMismatch {
            expected: t,
            actual: s.amplitudes.len(),
        });
    }
    let mut rng = rng_from(seed);
    let mut x = DMatrix::<C64>::zeros(ula.n_elements, t);
    for s in sources {
        let a = ula.steering(s.theta_deg);
        for (col, amp) in s.amplitudes.iter().enumerate() {
            for (m, am) in a.iter().enumerate() {
                x[(m, col)] += am * amp;
            }
        }
    }
    if noise_var > 0.0 {
        for v in x.iter_mut() {
            *v += complex_gaussian(&mut rng, noise_var);
        }
    }
    Ok(x)
}

pub fn sample_covariance(x: &DMatrix<C64>) -> DMatrix<C64> {
    x * x.adjoint() / C64::new(x.ncols() as f64, 0.0)
}

/// Hermitian eigen-decomposition with eigenvalues sorted descending.
pub fn sorted_eigen(r: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = SymmetricEigen::new(r.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(r.nrows(), r.ncols(), |row, col| {
        eig.eigenvectors[(row, order[col])]
    });
    (vals, vecs)
}

/// LS-ESPRIT azimuth estimates (degrees, signed) for a half-wavelength or
/// denser ULA with spacing `spacing_wavelengths`.
pub fn esprit_azimuth(
    x: &DMatrix<C64>,
    n_sources: usize,
    spacing_wavelengths: f64,
) -> Result<Vec<f64>> {
    let m = x.nrows();
    if n_sources == 0 || m <= n_sources || x.ncols() < n_sources {
        return Err(Error::param(
            "ESPRIT needs snapshots >= sources and elements > sources",
        ));
    }
    let (vals, vecs) = sorted_eigen(&sample_covariance(x));
    if !(vals[0] > 0.0) || vals[n_sources - 1] <= 1e-12 * vals[0] {
        return Err(Error::MeasurementUnavailable(
            "rank-deficient array covariance".into(),
        ));
    }
    let es = vecs.columns(0, n_sources);
    let e1 = es.rows(0, m - 1).into_owned();
    let e2 = es.rows(1, m - 1).into_owned();
    let gram = e1.adjoint() * &e1;
    let psi = gram
        .try_inverse()
        .ok_or_else(|| Error::MeasurementUnavailable("singular ESPRIT sub-array".into()))?
        * e1.adjoint()
        * e2;
    let eigs: Vec<C64> = if n_sources == 1 {
        vec![psi[(0, 0)]]
    } else {
        let (_, t) = nalgebra::linalg::Schur::new(psi).unpack();
        (0..n_sources).map(|i| t[(i, i)]).collect()
    };
    let scale = 2.0 * std::f64::consts::PI * spacing_wavelengths;
    Ok(eigs
        .iter()
        .map(|l| (l.arg() / scale).clamp(-1.0, 1.0).asin().to_degrees())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleGate {
    pub theta_ref_deg: f64,
    pub delta_th_deg: f64,
}

/// Absolute angular difference folded into [0, 180].
pub fn angular_deviation_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

pub fn absa_check(theta_deg: Option<f64>, gate: &AngleGate) -> DetectionVerdict {
    let Some(theta) = theta_deg else {
        return DetectionVerdict::invalid(Technique::Absa, "angle_unavailable");
    };
    let dev = angular_deviation_deg(theta, gate.theta_ref_deg);
    let v = if dev <= gate.delta_th_deg + 1e-9 {
        DetectionVerdict::valid(Technique::Absa)
    } else {
        DetectionVerdict::invalid(Technique::Absa, "angle_deviation")
    };
    v.with_diag("deviation_deg", dev)
}

/// Array-frame bearing of `target` seen from `from`: the array axis lies
/// along world x, so broadside (0 deg) is along y and endfire is +-90 deg.
pub fn array_angle_deg(from: &Point, target: &Point) -> Result<f64> {
    let d = target - from;
    let n = d.norm();
    if !(n > 1e-9) {
        return Err(Error::param("coincident points have no bearing"));
    }
    Ok((d.x / n).clamp(-1.0, 1.0).asin().to_degrees())
}

pub fn reference_angle(last_valid_position: &Point, bs_position: &Point) -> Result<f64> {
    array_angle_deg(last_valid_position, bs_position)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HandshakeGate {
    pub epsilon_m: f64,
    pub ul_sigma_m: f64,
}

impl Default for HandshakeGate {
    fn default() -> Self {
        Self {
            epsilon_m: 20.0,
            ul_sigma_m: 3.0,
        }
    }
}

/// Uplink position estimate: truth plus isotropic Gaussian error.
pub fn ul_position_model(true_position: &Point, gate: &HandshakeGate, seed: u64) -> Point {
    let mut rng = rng_from(seed);
    let ex: f64 = StandardNormal.sample(&mut rng);
    let ey: f64 = StandardNormal.sample(&mut rng);
    true_position + Point::new(ex, ey) * gate.ul_sigma_m
}

pub fn handshake_check(
    p_dl: Option<&Point>,
    p_ul: &Point,
    gate: &HandshakeGate,
) -> DetectionVerdict {
    let Some(dl) = p_dl else {
        return DetectionVerdict::invalid(Technique::Handshake, "no_dl_position");
    };
    let gap = (dl - p_ul).norm();
    let v = if gap <= gate.epsilon_m {
        DetectionVerdict::valid(Technique::Handshake)
    } else {
        DetectionVerdict::invalid(Technique::Handshake, "dl_ul_mismatch")
    };
    v.with_diag("discrepancy_m", gap)
}

/// Constant-velocity track `[p_x, p_y, v_x, v_y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
    pub gate_gamma: f64,
    /// Consecutive gate passes while coasting.
    pub consecutive_valid: u32,
    pub coasting: bool,
    /// Passes required to resume updates.
    pub reacquire_n: u32,
}

impl TrackState {
    pub fn new(
        position: &Point,
        pos_sigma: f64,
        vel_sigma: f64,
        gate_gamma: f64,
        reacquire_n: u32,
    ) -> Self {
        let mut p = Matrix4::zeros();
        p[(0, 0)] = pos_sigma * pos_sigma;
        p[(1, 1)] = pos_sigma * pos_sigma;
        p[(2, 2)] = vel_sigma * vel_sigma;
        p[(3, 3)] = vel_sigma * vel_sigma;
        Self {
            x: Vector4::new(position.x, position.y, 0.0, 0.0),
            p,
            gate_gamma,
            consecutive_valid: 0,
            coasting: false,
            reacquire_n: reacquire_n.max(1),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x[0], self.x[1])
    }

    pub fn velocity(&self) -> Point {
        Point::new(self.x[2], self.x[3])
    }
}

pub fn cv_transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

/// Discrete white-noise-acceleration process covariance.
pub fn dwna_q(dt: f64, accel_sigma: f64) -> Matrix4<f64> {
    let q = accel_sigma * accel_sigma;
    let (a, b, c) = (dt.powi(4) / 4.0 * q, dt.powi(3) / 2.0 * q, dt * dt * q);
    let mut m = Matrix4::zeros();
    for i in 0..2 {
        m[(i, i)] = a;
        m[(i, i + 2)] = b;
        m[(i + 2, i)] = b;
        m[(i + 2, i + 2)] = c;
    }
    m
}

fn symmetrize(p: &Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}

pub fn kf_predict(ts: &TrackState, dt_s: f64, accel_sigma: f64) -> Result<TrackState> {
    if !(dt_s > 0.0) {
        return Err(Error::param("prediction interval must be positive"));
    }
    let f = cv_transition(dt_s);
    let mut out = ts.clone();
    out.x = f * ts.x;
    out.p = symmetrize(&(f * ts.p * f.transpose() + dwna_q(dt_s, accel_sigma)));
    Ok(out)
}

fn observation() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

/// Normalized innovation squared of `z` against the predicted state.
pub fn nis(ts: &TrackState, z: &Point, meas_sigma: f64) -> Option<f64> {
    let h = observation();
    let s = h * ts.p * h.transpose() + Matrix2::identity() * (meas_sigma * meas_sigma);
    let y: Vector2<f64> = z - h * ts.x;
    s.try_inverse().map(|si| (y.transpose() * si * y)[(0, 0)])
}

/// Advance the M-of-N counter while coasting; updates resume once
/// `reacquire_n` consecutive epochs pass the gate.
pub fn mofn_reacquire(ts: &TrackState, gate_passes: bool) -> TrackState {
    let mut out = ts.clone();
    if !out.coasting {
        return out;
    }
    if gate_passes {
        out.consecutive_valid += 1;
        if out.consecutive_valid >= out.reacquire_n {
            out.coasting = false;
            out.consecutive_valid = 0;
        }
    } else {
        out.consecutive_valid = 0;
    }
    out
}

fn joseph_update(ts: &TrackState, z: &Point, meas_sigma: f64) -> Option<TrackState> {
    let h = observation();
    let r = Matrix2::identity() * (meas_sigma * meas_sigma);
    let s = h * ts.p * h.transpose() + r;
    let k = ts.p * h.transpose() * s.try_inverse()?;
    let y: Vector2<f64> = z - h * ts.x;
    let ikh = Matrix4::identity() - k * h;
    let mut out = ts.clone();
    out.x = ts.x + k * y;
    out.p = symmetrize(&(ikh * ts.p * ikh.transpose() + k * r * k.transpose()));
    Some(out)
}

/// Gate the measurement and update when permitted. The verdict reports the
/// gate outcome; an absent measurement is invalid and the track coasts.
pub fn kf_update_gated(
    ts: &TrackState,
    z: Option<&Point>,
    meas_sigma: f64,
) -> (TrackState, DetectionVerdict) {
    let Some(z) = z else {
        let mut out = ts.clone();
        out.coasting = true;
        out.consecutive_valid = 0;
        return (
            out,
            DetectionVerdict::invalid(Technique::Tracking, "no_measurement"),
        );
    };
    let Some(e) = nis(ts, z, meas_sigma) else {
        let mut out = ts.clone();
        out.coasting = true;
        out.consecutive_valid = 0;
        return (
            out,
            DetectionVerdict::invalid(Technique::Tracking, "singular_innovation"),
        );
    };
    let pass = e <= ts.gate_gamma;
    let was_coasting = ts.coasting;
    let mut next = if was_coasting {
        mofn_reacquire(ts, pass)
    } else if pass {
        ts.clone()
    } else {
        let mut c = ts.clone();
        c.coasting = true;
        c.consecutive_valid = 0;
        c
    };
    if pass && !next.coasting {
        if let Some(u) = joseph_update(&next, z, meas_sigma) {
            next = u;
        }
    }
    let verdict = if pass {
        DetectionVerdict::valid(Technique::Tracking)
    } else {
        DetectionVerdict::invalid(Technique::Tracking, "innovation_gate")
    };
    let verdict = verdict
        .with_diag("nis", e)
        .with_diag("coasting", if next.coasting { 1.0 } else { 0.0 });
    (next, verdict)
}
