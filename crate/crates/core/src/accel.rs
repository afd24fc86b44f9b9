//! Accelerometer calibration estimation from rest periods.
//!
//! Two estimators are provided. The closed-form Z-axis pair needs one
//! face-up and one face-down rest reading:
//!
//! ```text
//! S_z = (z_up - z_down) / 2g
//! O_z = (z_up + z_down) / 2
//! ```
//!
//! The six-parameter estimator fits every axis from rest readings in at
//! least six arbitrary orientations by minimizing the sum of squared
//! constraint residuals
//! `eps = sum_axis ((m_axis - O_axis) / S_axis)^2 - g^2`
//! with numerical gradient descent started at `O = 0, S = 1`.

use serde::{Deserialize, Serialize};

use crate::device::{AccelCalibration, AccelSample, GRAVITY};
use crate::error::{invalid, Error, Result};

/// Rest-detection thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RestDetection {
    /// Allowed deviation of each sample's magnitude from g, m/s².
    pub magnitude_tol: f64,
    /// Maximum per-axis variance inside a window, (m/s²)².
    pub variance_tol: f64,
    pub min_samples: usize,
    /// Fraction of the mean vector's norm that must lie on Z for a window to
    /// count as face-up or face-down.
    pub dominance: f64,
}

impl Default for RestDetection {
    fn default() -> Self {
        Self {
            magnitude_tol: 1.0,
            variance_tol: 0.01,
            min_samples: 50,
            dominance: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestWindow {
    /// First sample index (inclusive).
    pub start: usize,
    /// One past the last sample index.
    pub end: usize,
    pub mean: [f64; 3],
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceOrientation {
    FaceUp,
    FaceDown,
    Other,
}

/// Running per-axis mean and variance (Welford).
#[derive(Default, Clone, Copy)]
struct AxisStats {
    n: usize,
    mean: [f64; 3],
    m2: [f64; 3],
}

impl AxisStats {
    fn push(&mut self, v: [f64; 3]) {
        self.n += 1;
        for k in 0..3 {
            let delta = v[k] - self.mean[k];
            self.mean[k] += delta / self.n as f64;
            self.m2[k] += delta * (v[k] - self.mean[k]);
        }
    }

    fn max_variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.m2.iter().fold(0.0f64, |m, &x| m.max(x / self.n as f64))
    }
}

/// Finds disjoint, ordered stretches of the stream in which the device is
/// at rest.
///
/// Samples whose magnitude leaves `[g - tol, g + tol]` break a window. A
/// window also closes when adding the next sample would push any axis's
/// variance above the limit; the next window then starts at that sample.
/// Windows shorter than `min_samples` are dropped.
pub fn detect_rest_windows(stream: &[AccelSample], cfg: &RestDetection) -> Vec<RestWindow> {
    let mut windows = Vec::new();
    let mut start = 0usize;
    let mut stats = AxisStats::default();

    let close = |start: usize, end: usize, stats: &AxisStats, windows: &mut Vec<RestWindow>| {
        if stats.n >= cfg.min_samples.max(1) {
            windows.push(RestWindow {
                start,
                end,
                mean: stats.mean,
                count: stats.n,
            });
        }
    };

    for (i, sample) in stream.iter().enumerate() {
        let in_band = (sample.magnitude() - GRAVITY).abs() <= cfg.magnitude_tol;
        if !in_band {
            close(start, i, &stats, &mut windows);
            stats = AxisStats::default();
            start = i + 1;
            continue;
        }
        let mut trial = stats;
        trial.push(sample.vector());
        if trial.max_variance() > cfg.variance_tol {
            close(start, i, &stats, &mut windows);
            stats = AxisStats::default();
            stats.push(sample.vector());
            start = i;
        } else {
            stats = trial;
        }
    }
    close(start, stream.len(), &stats, &mut windows);
    windows
}

pub fn classify_orientation(window: &RestWindow, dominance: f64) -> FaceOrientation {
    let [x, y, z] = window.mean;
    let norm = (x * x + y * y + z * z).sqrt();
    if norm == 0.0 || z.abs() < dominance * norm {
        return FaceOrientation::Other;
    }
    if z > 0.0 {
        FaceOrientation::FaceUp
    } else {
        FaceOrientation::FaceDown
    }
}

/// Z-axis offset and sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZAxisFingerprint {
    pub o_z: f64,
    pub s_z: f64,
}

pub fn estimate_z_axis(z_up: f64, z_down: f64) -> Result<ZAxisFingerprint> {
    if !z_up.is_finite() || !z_down.is_finite() || z_up <= z_down {
        return Err(Error::MislabeledWindows { z_up, z_down });
    }
    Ok(ZAxisFingerprint {
        o_z: (z_up + z_down) / 2.0,
        s_z: (z_up - z_down) / (2.0 * GRAVITY),
    })
}

/// Count-weighted mean Z over all windows of one orientation.
fn merged_z(windows: &[RestWindow], dominance: f64, want: FaceOrientation) -> Option<f64> {
    let (sum, count) = windows
        .iter()
        .filter(|w| classify_orientation(w, dominance) == want)
        .fold((0.0, 0usize), |(s, n), w| (s + w.mean[2] * w.count as f64, n + w.count));
    (count > 0).then(|| sum / count as f64)
}

/// Detects rest windows, labels them face-up/face-down and applies the
/// closed-form estimator to the merged window means.
pub fn z_axis_from_stream(stream: &[AccelSample], cfg: &RestDetection) -> Result<ZAxisFingerprint> {
    if stream.is_empty() {
        return Err(Error::Empty("accelerometer stream"));
    }
    let windows = detect_rest_windows(stream, cfg);
    let up = merged_z(&windows, cfg.dominance, FaceOrientation::FaceUp)
        .ok_or(Error::MissingOrientation("face-up"))?;
    let down = merged_z(&windows, cfg.dominance, FaceOrientation::FaceDown)
        .ok_or(Error::MissingOrientation("face-down"))?;
    estimate_z_axis(up, down)
}

/// Six-parameter calibration estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixParamFingerprint {
    pub o_x: f64,
    pub o_y: f64,
    pub o_z: f64,
    pub s_x: f64,
    pub s_y: f64,
    pub s_z: f64,
    /// Final sum of squared residuals.
    pub residual_norm: f64,
}

impl SixParamFingerprint {
    pub fn calibration(&self) -> AccelCalibration {
        AccelCalibration::from_arrays([self.s_x, self.s_y, self.s_z], [self.o_x, self.o_y, self.o_z])
    }

    /// `[o_x, o_y, o_z, s_x, s_y, s_z]`.
    pub fn to_vector(&self) -> Vec<f64> {
        vec![self.o_x, self.o_y, self.o_z, self.s_x, self.s_y, self.s_z]
    }
}

/// Residual of the rest constraint for one mean reading.
pub fn six_param_residual(cal: &AccelCalibration, m: [f64; 3]) -> Result<f64> {
    for (axis, s) in ['x', 'y', 'z'].into_iter().zip(cal.sensitivities()) {
        if s == 0.0 {
            return Err(Error::ZeroSensitivity { axis });
        }
    }
    Ok(residual(&params_of(cal), &m))
}

/// Parameter vector layout: `[o_x, o_y, o_z, s_x, s_y, s_z]`.
type Params = [f64; 6];

fn params_of(cal: &AccelCalibration) -> Params {
    [cal.o_x, cal.o_y, cal.o_z, cal.s_x, cal.s_y, cal.s_z]
}

#[inline]
fn residual(p: &Params, m: &[f64; 3]) -> f64 {
    let mut sum = 0.0;
    for k in 0..3 {
        let t = (m[k] - p[k]) / p[k + 3];
        sum += t * t;
    }
    sum - GRAVITY * GRAVITY
}

fn objective(p: &Params, means: &[[f64; 3]]) -> f64 {
    means.iter().map(|m| residual(p, m).powi(2)).sum()
}

/// Sum of squared residuals at `cal`.
pub fn six_param_objective(cal: &AccelCalibration, means: &[[f64; 3]]) -> f64 {
    objective(&params_of(cal), means)
}

/// Central-difference gradient of the objective, in `[o.., s..]` order.
pub fn numerical_gradient(cal: &AccelCalibration, means: &[[f64; 3]], step: f64) -> [f64; 6] {
    gradient(&params_of(cal), means, step)
}

fn gradient(p: &Params, means: &[[f64; 3]], step: f64) -> Params {
    std::array::from_fn(|k| {
        let mut hi = *p;
        let mut lo = *p;
        hi[k] += step;
        lo[k] -= step;
        (objective(&hi, means) - objective(&lo, means)) / (2.0 * step)
    })
}

/// Gradient-descent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GdConfig {
    /// Central-difference step per parameter.
    pub gradient_step: f64,
    /// Step length tried first on the first iteration, and whenever the
    /// two-point step is unusable.
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the objective by less than this.
    pub tolerance: f64,
    /// Halvings of the learning rate tried before declaring a stationary point.
    pub max_halvings: u32,
    /// Two mean vectors closer than this angle count as one orientation, degrees.
    pub min_separation_deg: f64,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            gradient_step: 1e-6,
            learning_rate: 1e-4,
            max_iterations: 10_000,
            tolerance: 1e-12,
            max_halvings: 60,
            min_separation_deg: 10.0,
        }
    }
}

impl GdConfig {
    fn validate(&self) -> Result<()> {
        let positive = [
            self.gradient_step,
            self.learning_rate,
            self.tolerance,
            self.min_separation_deg,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || self.max_iterations == 0 {
            return Err(invalid("gd", "all settings must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SixParamEstimate {
    pub fingerprint: SixParamFingerprint,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial point.
    pub objective_trace: Vec<f64>,
}

/// Number of mutually separated directions among the mean vectors
/// (greedy, in input order).
pub fn distinct_orientations(means: &[[f64; 3]], min_separation_deg: f64) -> usize {
    let cos_limit = min_separation_deg.to_radians().cos();
    let mut reps: Vec<[f64; 3]> = Vec::new();
    for m in means {
        let norm = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            continue;
        }
        let u = m.map(|v| v / norm);
        let separate = reps
            .iter()
            .all(|r| (r[0] * u[0] + r[1] * u[1] + r[2] * u[2]) < cos_limit);
        if separate {
            reps.push(u);
        }
    }
    reps.len()
}

/// Descent runs with offsets measured in units of g, which puts the
/// gradients of both parameter groups on a comparable scale. In the
/// original parameters that is a per-component step factor of g² for the
/// offsets.
const DESCENT_SCALE: Params = [
    GRAVITY * GRAVITY,
    GRAVITY * GRAVITY,
    GRAVITY * GRAVITY,
    1.0,
    1.0,
    1.0,
];

/// Fits all six calibration parameters to rest-window means.
///
/// Descent starts at `O = 0, S = 1`. Each iteration starts from the
/// Barzilai-Borwein step length of the last two iterates (the configured
/// learning rate on the first iteration) and halves it until the objective
/// does not increase, so accepted objectives are monotone non-increasing.
pub fn estimate_six_params(means: &[[f64; 3]], cfg: &GdConfig) -> Result<SixParamEstimate> {
    cfg.validate()?;
    let distinct = distinct_orientations(means, cfg.min_separation_deg);
    if distinct < 6 {
        return Err(Error::Underdetermined {
            distinct,
            required: 6,
        });
    }

    let mut p: Params = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
    let mut f = objective(&p, means);
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut converged = false;
    let mut previous: Option<(Params, Params)> = None;
    let mut stalled = false;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let grad = gradient(&p, means, cfg.gradient_step);
        let mut rate = previous
            .map(|(p0, g0)| {
                let (mut ss, mut sy) = (0.0, 0.0);
                for k in 0..6 {
                    let step = p[k] - p0[k];
                    ss += step * step / DESCENT_SCALE[k];
                    sy += step * (grad[k] - g0[k]);
                }
                ss / sy
            })
            .filter(|r| r.is_finite() && *r > 0.0)
            .unwrap_or(cfg.learning_rate);
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial: Params = std::array::from_fn(|k| p[k] - rate * DESCENT_SCALE[k] * grad[k]);
            if trial[3..].iter().all(|&s| s > 0.0) {
                let ft = objective(&trial, means);
                if ft <= f {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            rate *= 0.5;
        }
        let Some((next, fnext)) = accepted else {
            // No descent direction at any tried step: stationary point.
            converged = true;
            break;
        };
        let decrease = f - fnext;
        previous = Some((p, grad));
        p = next;
        f = fnext;
        trace.push(f);
        // One short step can come from heavy backtracking; two in a row
        // mean the descent has stalled.
        if decrease < cfg.tolerance {
            if stalled {
                converged = true;
                break;
            }
            stalled = true;
        } else {
            stalled = false;
        }
    }

    Ok(SixParamEstimate {
        fingerprint: SixParamFingerprint {
            o_x: p[0],
            o_y: p[1],
            o_z: p[2],
            s_x: p[3],
            s_y: p[4],
            s_z: p[5],
            residual_norm: f,
        },
        iterations,
        converged,
        objective_trace: trace,
    })
}
