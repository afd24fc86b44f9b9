//! Synthetic device populations and their simulated sensor outputs.
//!
//! A [`DeviceProfile`] carries the ground-truth imperfections of one
//! simulated handset: a speaker/microphone gain curve with harmonic
//! distortion, the six accelerometer calibration parameters of the linear
//! model `measured = true * S + O`, and a User-Agent string. The simulators
//! below turn a profile into raw recordings and accelerometer streams; all
//! randomness is drawn from streams derived from `(seed, inputs)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::accel::{self, RestDetection};
use crate::entropy::{CookieId, Submission};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, SimRng};

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.80665;

/// Default audio sample rate, Hz.
pub const DEFAULT_SAMPLE_RATE: f64 = 8000.0;

const TAG_POPULATION: u64 = 0x504F_50;
const TAG_AUDIO: u64 = 0x4155_4449;
const TAG_REST: u64 = 0x5245_5354;
const TAG_SUBMISSION: u64 = 0x5355_424D;
const TAG_PLAN: u64 = 0x504C_414E;
const TAG_COOKIE: u64 = 0x434F_4F4B;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct DeviceId(pub u32);

impl std::fmt::Display for DeviceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "dev-{:05}", self.0)
    }
}

/// Sensitivity and offset of each accelerometer axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelCalibration {
    pub s_x: f64,
    pub s_y: f64,
    pub s_z: f64,
    pub o_x: f64,
    pub o_y: f64,
    pub o_z: f64,
}

impl AccelCalibration {
    pub const IDENTITY: Self = Self {
        s_x: 1.0,
        s_y: 1.0,
        s_z: 1.0,
        o_x: 0.0,
        o_y: 0.0,
        o_z: 0.0,
    };

    pub fn sensitivities(&self) -> [f64; 3] {
        [self.s_x, self.s_y, self.s_z]
    }

    pub fn offsets(&self) -> [f64; 3] {
        [self.o_x, self.o_y, self.o_z]
    }

    pub fn from_arrays(s: [f64; 3], o: [f64; 3]) -> Self {
        Self {
            s_x: s[0],
            s_y: s[1],
            s_z: s[2],
            o_x: o[0],
            o_y: o[1],
            o_z: o[2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.sensitivities().into_iter().chain(self.offsets());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(invalid("calibration", "non-finite parameter"));
        }
        if self.sensitivities().iter().any(|&s| s <= 0.0) {
            return Err(invalid("calibration", "sensitivities must be positive"));
        }
        Ok(())
    }

    /// Biased reading for a true acceleration vector.
    pub fn apply(&self, truth: [f64; 3]) -> [f64; 3] {
        [
            truth[0] * self.s_x + self.o_x,
            truth[1] * self.s_y + self.o_y,
            truth[2] * self.s_z + self.o_z,
        ]
    }
}

/// Piecewise-linear function of frequency, constant beyond its end knots.
/// An empty curve evaluates to zero everywhere.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResponseCurve {
    pub knots_hz: Vec<f64>,
    pub values: Vec<f64>,
}

impl ResponseCurve {
    pub fn new(knots_hz: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots_hz.len() != values.len() {
            return Err(invalid("curve", "knot and value counts differ"));
        }
        if knots_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("curve", "knots must be strictly increasing"));
        }
        if knots_hz.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(invalid("curve", "non-finite knot or value"));
        }
        Ok(Self { knots_hz, values })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            knots_hz: vec![0.0],
            values: vec![value],
        }
    }

    /// Evenly spaced knots from 0 to `max_hz` with values from `f(freq)`.
    pub fn sampled(max_hz: f64, spacing_hz: f64, mut f: impl FnMut(f64) -> f64) -> Self {
        let count = (max_hz / spacing_hz).ceil() as usize + 1;
        let knots_hz: Vec<f64> = (0..count).map(|i| i as f64 * spacing_hz).collect();
        let values = knots_hz.iter().map(|&k| f(k)).collect();
        Self { knots_hz, values }
    }

    pub fn at(&self, freq: f64) -> f64 {
        let knots = &self.knots_hz;
        match knots.len() {
            0 => 0.0,
            1 => self.values[0],
            n => {
                if freq <= knots[0] {
                    return self.values[0];
                }
                if freq >= knots[n - 1] {
                    return self.values[n - 1];
                }
                let hi = knots.partition_point(|&k| k <= freq);
                let lo = hi - 1;
                let w = (freq - knots[lo]) / (knots[hi] - knots[lo]);
                self.values[lo] + w * (self.values[hi] - self.values[lo])
            }
        }
    }
}

/// Speaker-to-microphone response of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioResponseProfile {
    /// Gain deviation from nominal, dB.
    pub gain_db: ResponseCurve,
    /// Second-harmonic distortion as a fraction of the fundamental amplitude.
    pub h2: f64,
    /// Third-harmonic distortion as a fraction of the fundamental amplitude.
    pub h3: f64,
}

impl AudioResponseProfile {
    pub fn flat() -> Self {
        Self {
            gain_db: ResponseCurve::default(),
            h2: 0.0,
            h3: 0.0,
        }
    }

    pub fn validate(&self, tolerance_db: f64) -> Result<()> {
        if self.gain_db.values.iter().any(|v| v.abs() > tolerance_db) {
            return Err(invalid("audio", "gain deviation outside tolerance band"));
        }
        for h in [self.h2, self.h3] {
            if !(0.0..1.0).contains(&h) {
                return Err(invalid("audio", "harmonic coefficient outside [0, 1)"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Additive Gaussian noise on recorded audio samples.
    #[serde(default)]
    pub audio_sigma: f64,
    /// Per-axis Gaussian noise on accelerometer samples, m/s².
    #[serde(default)]
    pub accel_sigma: f64,
    /// Accelerometer quantization step, m/s².
    #[serde(default)]
    pub quantization_step: Option<f64>,
    /// Constant per-axis error drawn once per rest placement, m/s².
    #[serde(default)]
    pub placement_sigma: f64,
    /// Per-axis offset drift drawn once per submission, m/s².
    #[serde(default)]
    pub offset_drift_sigma: f64,
}

impl NoiseSpec {
    pub const NONE: Self = Self {
        audio_sigma: 0.0,
        accel_sigma: 0.0,
        quantization_step: None,
        placement_sigma: 0.0,
        offset_drift_sigma: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let sigmas = [
            self.audio_sigma,
            self.accel_sigma,
            self.placement_sigma,
            self.offset_drift_sigma,
        ];
        if sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(invalid("noise", "standard deviations must be finite and non-negative"));
        }
        if let Some(q) = self.quantization_step {
            if !q.is_finite() || q <= 0.0 {
                return Err(invalid("noise", "quantization step must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: DeviceId,
    pub audio: AudioResponseProfile,
    pub accel: AccelCalibration,
    pub user_agent: String,
    pub noise: NoiseSpec,
}

impl DeviceProfile {
    /// Distortion-free, flat-response device with identity calibration.
    pub fn ideal(device_id: DeviceId) -> Self {
        Self {
            device_id,
            audio: AudioResponseProfile::flat(),
            accel: AccelCalibration::IDENTITY,
            user_agent: String::new(),
            noise: NoiseSpec::NONE,
        }
    }
}

/// Acoustic influence of the surface and surroundings a device rests on.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LocationEffect {
    /// Gain change shared by every device at this location, dB.
    pub gain_db: ResponseCurve,
    /// Variance of a per-measurement random gain perturbation, dB².
    pub excess_var_db2: ResponseCurve,
}

impl LocationEffect {
    pub fn validate(&self) -> Result<()> {
        if self.excess_var_db2.values.iter().any(|&v| v < 0.0) {
            return Err(invalid("location", "excess variance must be non-negative"));
        }
        Ok(())
    }
}

/// Attitude of the device: a rotation from device frame to world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    pub matrix: [[f64; 3]; 3],
}

impl Orientation {
    pub const FACE_UP: Self = Self {
        matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Flipped about the device x axis.
    pub const FACE_DOWN: Self = Self {
        matrix: [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]],
    };

    /// Rotation by `angle` radians about `axis` (normalized internally).
    pub fn axis_angle(axis: [f64; 3], angle: f64) -> Result<Self> {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if !(norm > 0.0) || !norm.is_finite() || !angle.is_finite() {
            return Err(invalid("orientation", "axis must be finite and non-zero"));
        }
        let [x, y, z] = axis.map(|a| a / norm);
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Ok(Self {
            matrix: [
                [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
                [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
                [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
            ],
        })
    }

    /// Uniformly distributed random rotation.
    pub fn random(rng: &mut SimRng) -> Self {
        // Shoemake's uniform unit quaternion.
        let (u1, u2, u3) = (rng.next_f64(), rng.next_f64(), rng.next_f64());
        let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
        let (w, x) = (a * (TAU * u2).sin(), a * (TAU * u2).cos());
        let (y, z) = (b * (TAU * u3).sin(), b * (TAU * u3).cos());
        Self {
            matrix: [
                [
                    1.0 - 2.0 * (y * y + z * z),
                    2.0 * (x * y - z * w),
                    2.0 * (x * z + y * w),
                ],
                [
                    2.0 * (x * y + z * w),
                    1.0 - 2.0 * (x * x + z * z),
                    2.0 * (y * z - x * w),
                ],
                [
                    2.0 * (x * z - y * w),
                    2.0 * (y * z + x * w),
                    1.0 - 2.0 * (x * x + y * y),
                ],
            ],
        }
    }

    /// Gravity reaction (what an ideal accelerometer reads) in device frame.
    pub fn gravity_in_device_frame(&self) -> [f64; 3] {
        // R^T * (0, 0, g): the third row of R.
        let r = &self.matrix;
        [r[2][0] * GRAVITY, r[2][1] * GRAVITY, r[2][2] * GRAVITY]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl AccelSample {
    pub fn vector(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn magnitude(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

impl Recording {
    pub fn nyquist(&self) -> f64 {
        self.sample_rate / 2.0
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// Distribution of one device parameter across a population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamDist {
    Uniform { min: f64, max: f64 },
    Gaussian { mean: f64, std_dev: f64 },
}

impl ParamDist {
    pub const fn uniform(min: f64, max: f64) -> Self {
        ParamDist::Uniform { min, max }
    }

    fn validate(&self, name: &str, positive: bool) -> Result<()> {
        let bad = |reason: &str| Error::InvalidRange {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        match *self {
            ParamDist::Uniform { min, max } => {
                if !min.is_finite() || !max.is_finite() {
                    return Err(bad("bounds must be finite"));
                }
                if min > max {
                    return Err(bad("min exceeds max"));
                }
                if positive && min <= 0.0 {
                    return Err(bad("must be strictly positive"));
                }
            }
            ParamDist::Gaussian { mean, std_dev } => {
                if !mean.is_finite() || !std_dev.is_finite() || std_dev < 0.0 {
                    return Err(bad("mean and std_dev must be finite, std_dev non-negative"));
                }
                if positive && mean <= 0.0 {
                    return Err(bad("mean must be strictly positive"));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut SimRng, positive: bool) -> f64 {
        match *self {
            ParamDist::Uniform { min, max } => rng.uniform(min, max),
            ParamDist::Gaussian { mean, std_dev } => {
                // Sensitivities are redrawn until positive (mean > 0 is validated).
                loop {
                    let v = rng.normal(mean, std_dev);
                    if !positive || v > 0.0 {
                        return v;
                    }
                }
            }
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            ParamDist::Uniform { min, max } => Some((min, max)),
            ParamDist::Gaussian { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedUserAgent {
    pub user_agent: String,
    pub weight: f64,
}

/// Builds a catalog of `n` distinct User-Agent strings with Zipf(1) weights.
pub fn synthetic_user_agents(n: usize) -> Vec<WeightedUserAgent> {
    const PLATFORMS: [&str; 3] = [
        "Mozilla/5.0 (iPhone; CPU iPhone OS {v} like Mac OS X) AppleWebKit/536.26 Mobile/10A5376e",
        "Mozilla/5.0 (Linux; U; Android {v}; en-us; Model-{m}) AppleWebKit/534.30 Mobile Safari/534.30",
        "Mozilla/5.0 (iPod touch; CPU iPhone OS {v} like Mac OS X) AppleWebKit/536.26 Mobile/10A403",
    ];
    (0..n)
        .map(|i| {
            let template = PLATFORMS[i % PLATFORMS.len()];
            let version = format!("{}_{}", 4 + i % 3, i / 3);
            WeightedUserAgent {
                user_agent: template
                    .replace("{v}", &version)
                    .replace("{m}", &format!("{:02}", i)),
                weight: 1.0 / (i + 1) as f64,
            }
        })
        .collect()
}

/// Parameter ranges and shared settings for [`sample_population`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationRanges {
    pub s_x: ParamDist,
    pub s_y: ParamDist,
    pub s_z: ParamDist,
    pub o_x: ParamDist,
    pub o_y: ParamDist,
    pub o_z: ParamDist,
    /// Half-width of the per-frequency gain deviation band, dB.
    pub gain_tolerance_db: f64,
    /// Spacing of independently drawn gain knots, Hz.
    pub gain_knot_spacing_hz: f64,
    /// Highest frequency covered by the gain curve, Hz.
    pub gain_max_hz: f64,
    pub h2: ParamDist,
    pub h3: ParamDist,
    pub user_agents: Vec<WeightedUserAgent>,
    pub noise: NoiseSpec,
}

impl Default for PopulationRanges {
    fn default() -> Self {
        Self {
            s_x: ParamDist::uniform(0.99, 1.04),
            s_y: ParamDist::uniform(0.99, 1.04),
            s_z: ParamDist::uniform(0.99, 1.04),
            o_x: ParamDist::uniform(-0.5, 0.5),
            o_y: ParamDist::uniform(-0.5, 0.5),
            o_z: ParamDist::uniform(-0.5, 0.5),
            gain_tolerance_db: 2.0,
            gain_knot_spacing_hz: 20.0,
            gain_max_hz: DEFAULT_SAMPLE_RATE / 2.0,
            h2: ParamDist::uniform(0.01, 0.1),
            h3: ParamDist::uniform(0.005, 0.05),
            user_agents: synthetic_user_agents(30),
            noise: NoiseSpec::NONE,
        }
    }
}

impl PopulationRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, dist) in [("s_x", &self.s_x), ("s_y", &self.s_y), ("s_z", &self.s_z)] {
            dist.validate(name, true)?;
        }
        for (name, dist) in [("o_x", &self.o_x), ("o_y", &self.o_y), ("o_z", &self.o_z)] {
            dist.validate(name, false)?;
        }
        for (name, dist) in [("h2", &self.h2), ("h3", &self.h3)] {
            dist.validate(name, false)?;
            match *dist {
                ParamDist::Uniform { min, max } if min < 0.0 || max >= 1.0 => {
                    return Err(Error::InvalidRange {
                        name: name.to_string(),
                        reason: "harmonic coefficients must lie in [0, 1)".into(),
                    })
                }
                ParamDist::Gaussian { .. } => {
                    return Err(Error::InvalidRange {
                        name: name.to_string(),
                        reason: "harmonic coefficients support uniform ranges only".into(),
                    })
                }
                _ => {}
            }
        }
        let range_err = |name: &str, reason: &str| Error::InvalidRange {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        if !(self.gain_tolerance_db >= 0.0) || !self.gain_tolerance_db.is_finite() {
            return Err(range_err("gain_tolerance_db", "must be finite and non-negative"));
        }
        if !(self.gain_knot_spacing_hz > 0.0) || !(self.gain_max_hz > 0.0) {
            return Err(range_err("gain_knot_spacing_hz", "spacing and max must be positive"));
        }
        if self.user_agents.iter().any(|u| !(u.weight >= 0.0)) {
            return Err(range_err("user_agents", "weights must be non-negative"));
        }
        if !self.user_agents.is_empty() && self.user_agents.iter().all(|u| u.weight == 0.0) {
            return Err(range_err("user_agents", "at least one weight must be positive"));
        }
        self.noise.validate()
    }
}

/// Draws `n` independent device profiles. Device `i` depends only on
/// `(seed, i)`, so a larger population extends a smaller one.
pub fn sample_population(
    n: usize,
    ranges: &PopulationRanges,
    seed: u64,
) -> Result<Vec<DeviceProfile>> {
    ranges.validate()?;
    let weights: Vec<f64> = ranges.user_agents.iter().map(|u| u.weight).collect();
    let profiles = (0..n)
        .map(|i| {
            let mut rng = SimRng::derived(seed, &[TAG_POPULATION, i as u64]);
            let accel = AccelCalibration {
                s_x: ranges.s_x.sample(&mut rng, true),
                s_y: ranges.s_y.sample(&mut rng, true),
                s_z: ranges.s_z.sample(&mut rng, true),
                o_x: ranges.o_x.sample(&mut rng, false),
                o_y: ranges.o_y.sample(&mut rng, false),
                o_z: ranges.o_z.sample(&mut rng, false),
            };
            let tol = ranges.gain_tolerance_db;
            let gain_db = ResponseCurve::sampled(ranges.gain_max_hz, ranges.gain_knot_spacing_hz, |_| {
                rng.uniform(-tol, tol)
            });
            let h2 = ranges.h2.sample(&mut rng, false);
            let h3 = ranges.h3.sample(&mut rng, false);
            let user_agent = rng
                .weighted_index(&weights)
                .map(|k| ranges.user_agents[k].user_agent.clone())
                .unwrap_or_default();
            DeviceProfile {
                device_id: DeviceId(i as u32),
                audio: AudioResponseProfile { gain_db, h2, h3 },
                accel,
                user_agent,
                noise: ranges.noise,
            }
        })
        .collect();
    Ok(profiles)
}

/// Timing of an audio capture relative to the start of playback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureSpec {
    pub sample_rate: f64,
    /// Seconds of playback discarded before recording starts.
    pub skip: f64,
    /// Length of the recorded window, seconds.
    pub duration: f64,
}

impl CaptureSpec {
    /// Records `duration` seconds from the start of playback.
    pub fn window(duration: f64) -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            skip: 0.0,
            duration,
        }
    }

    /// Three seconds of playback, the middle second recorded.
    pub fn app_protocol() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            skip: 1.0,
            duration: 1.0,
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.sample_rate * self.duration).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(invalid("sample_rate", "must be positive"));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(invalid("duration", "must be positive"));
        }
        if !(self.skip >= 0.0) || !self.skip.is_finite() {
            return Err(invalid("skip", "must be non-negative"));
        }
        Ok(())
    }
}

impl Default for CaptureSpec {
    fn default() -> Self {
        Self::window(1.0)
    }
}

/// Plays a single tone through the device's speaker and records it.
pub fn simulate_audio_measurement(
    device: &DeviceProfile,
    location: &LocationEffect,
    freq: f64,
    amplitude: f64,
    capture: &CaptureSpec,
    seed: u64,
) -> Result<Recording> {
    simulate_multitone(device, location, &[freq], amplitude, capture, seed)
}

/// Plays several tones at once, each at `amplitude`, and records the sum.
///
/// Each tone `f` reaches the microphone with gain
/// `10^((device_db(f) + location_db(f) + e) / 20)` where `e` is a fresh
/// Gaussian draw with the location's excess variance. Its distortion
/// products at `2f` and `3f` carry `h2` and `h3` times that fundamental
/// amplitude; products at or above Nyquist are dropped.
pub fn simulate_multitone(
    device: &DeviceProfile,
    location: &LocationEffect,
    freqs: &[f64],
    amplitude: f64,
    capture: &CaptureSpec,
    seed: u64,
) -> Result<Recording> {
    capture.validate()?;
    location.validate()?;
    if freqs.is_empty() {
        return Err(Error::Empty("tone list"));
    }
    if !amplitude.is_finite() {
        return Err(invalid("amplitude", "must be finite"));
    }
    let nyquist = capture.sample_rate / 2.0;
    for &f in freqs {
        if !(f > 0.0) || f >= nyquist {
            return Err(Error::AboveNyquist { freq: f, nyquist });
        }
    }

    let mut tags = vec![TAG_AUDIO, device.device_id.0 as u64];
    tags.extend(freqs.iter().map(|f| f.to_bits()));
    let mut rng = SimRng::derived(seed, &tags);

    struct Tone {
        cycles_per_sample: f64,
        fundamental: f64,
        second: f64,
        third: f64,
    }
    let tones: Vec<Tone> = freqs
        .iter()
        .map(|&f| {
            let excess = location.excess_var_db2.at(f).max(0.0).sqrt();
            let perturbation = rng.normal(0.0, excess);
            let gain_db = device.audio.gain_db.at(f) + location.gain_db.at(f) + perturbation;
            let fundamental = amplitude * 10f64.powf(gain_db / 20.0);
            let keep = |k: f64| if k * f < nyquist { 1.0 } else { 0.0 };
            Tone {
                cycles_per_sample: f / capture.sample_rate,
                fundamental,
                second: device.audio.h2 * fundamental * keep(2.0),
                third: device.audio.h3 * fundamental * keep(3.0),
            }
        })
        .collect();

    let offset = (capture.skip * capture.sample_rate).round() as usize;
    let sigma = device.noise.audio_sigma;
    let samples = (0..capture.sample_count())
        .map(|n| {
            let index = (offset + n) as f64;
            let mut value = 0.0;
            for tone in &tones {
                let cycles = tone.cycles_per_sample * index;
                let (s, c) = (TAU * (cycles - cycles.floor())).sin_cos();
                // sin 2x = 2 sin x cos x, sin 3x = sin x (3 - 4 sin^2 x)
                value += tone.fundamental * s
                    + tone.second * (2.0 * s * c)
                    + tone.third * (s * (3.0 - 4.0 * s * s));
            }
            if sigma > 0.0 {
                value += rng.normal(0.0, sigma);
            }
            value
        })
        .collect();
    Ok(Recording {
        sample_rate: capture.sample_rate,
        samples,
    })
}

/// Sampling of a rest stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub duration: f64,
    pub rate: f64,
}

impl Default for StreamSpec {
    fn default() -> Self {
        Self {
            duration: 2.0,
            rate: 100.0,
        }
    }
}

/// Accelerometer readings of a device lying still in `orientation`.
pub fn simulate_rest_stream(
    device: &DeviceProfile,
    orientation: &Orientation,
    spec: &StreamSpec,
    seed: u64,
) -> Result<Vec<AccelSample>> {
    rest_stream_with_drift(device, orientation, spec, seed, [0.0; 3])
}

pub(crate) fn rest_stream_with_drift(
    device: &DeviceProfile,
    orientation: &Orientation,
    spec: &StreamSpec,
    seed: u64,
    drift: [f64; 3],
) -> Result<Vec<AccelSample>> {
    if !(spec.duration > 0.0) || !(spec.rate > 0.0) {
        return Err(invalid("stream", "duration and rate must be positive"));
    }
    device.accel.validate()?;
    device.noise.validate()?;
    let noise = device.noise;
    let mut tags = vec![TAG_REST, device.device_id.0 as u64];
    tags.extend(orientation.matrix.iter().flatten().map(|v| v.to_bits()));
    let mut rng = SimRng::derived(seed, &tags);

    let placement: [f64; 3] = std::array::from_fn(|_| rng.normal(0.0, noise.placement_sigma));
    let truth = orientation.gravity_in_device_frame();
    let biased = device.accel.apply(truth);
    let base: [f64; 3] = std::array::from_fn(|k| biased[k] + placement[k] + drift[k]);
    let count = (spec.duration * spec.rate).round().max(1.0) as usize;
    let samples = (0..count)
        .map(|n| {
            let v: [f64; 3] = std::array::from_fn(|k| {
                let mut value = base[k] + rng.normal(0.0, noise.accel_sigma);
                if let Some(step) = noise.quantization_step {
                    value = (value / step).round() * step;
                }
                value
            });
            AccelSample {
                t: n as f64 / spec.rate,
                x: v[0],
                y: v[1],
                z: v[2],
            }
        })
        .collect();
    Ok(samples)
}

/// How many submissions each device contributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SubmissionPlan {
    /// Every device submits the same number of times.
    Fixed(u32),
    /// Devices are split across multiplicities in proportion to the weights;
    /// when the weights are device counts summing to the population size the
    /// split is exact.
    Mixture(Vec<MultiplicityShare>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplicityShare {
    pub submissions: u32,
    pub weight: f64,
}

impl SubmissionPlan {
    /// Per-device submission counts, in device order.
    pub fn assign(&self, devices: usize, seed: u64) -> Result<Vec<u32>> {
        match self {
            SubmissionPlan::Fixed(k) => Ok(vec![*k; devices]),
            SubmissionPlan::Mixture(shares) => {
                let total: f64 = shares.iter().map(|s| s.weight).sum();
                if shares.is_empty()
                    || shares.iter().any(|s| !(s.weight >= 0.0))
                    || !(total > 0.0)
                {
                    return Err(invalid("submissions", "mixture weights must be non-negative with a positive sum"));
                }
                // Largest-remainder apportionment.
                let quotas: Vec<f64> = shares
                    .iter()
                    .map(|s| s.weight / total * devices as f64)
                    .collect();
                let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
                let mut remaining = devices - counts.iter().sum::<usize>();
                let mut order: Vec<usize> = (0..shares.len()).collect();
                order.sort_by(|&a, &b| {
                    let ra = quotas[a] - quotas[a].floor();
                    let rb = quotas[b] - quotas[b].floor();
                    rb.total_cmp(&ra).then(a.cmp(&b))
                });
                for &i in order.iter().cycle() {
                    if remaining == 0 {
                        break;
                    }
                    counts[i] += 1;
                    remaining -= 1;
                }
                let mut multiplicities: Vec<u32> = shares
                    .iter()
                    .zip(&counts)
                    .flat_map(|(s, &c)| std::iter::repeat(s.submissions).take(c))
                    .collect();
                SimRng::derived(seed, &[TAG_PLAN]).shuffle(&mut multiplicities);
                Ok(multiplicities)
            }
        }
    }
}

/// Collection settings for [`simulate_submission_set`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubmissionSim {
    /// Rest stream recorded for each of the face-up and face-down phases.
    pub stream: StreamSpec,
    pub detection: RestDetection,
    /// Seconds between consecutive submissions of one device.
    pub interval_s: u64,
}

impl Default for SubmissionSim {
    fn default() -> Self {
        Self {
            stream: StreamSpec::default(),
            detection: RestDetection::default(),
            interval_s: 3600,
        }
    }
}

/// Cookie planted in the browser of a simulated device.
pub fn device_cookie(seed: u64, device: DeviceId) -> CookieId {
    CookieId(derive_seed(seed, &[TAG_COOKIE, device.0 as u64]))
}

/// Generates cookie-correlated Z-axis fingerprint submissions.
///
/// Each submission records a face-up and a face-down rest stream with fresh
/// noise and runs the full rest-detection and closed-form estimation path.
pub fn simulate_submission_set(
    population: &[DeviceProfile],
    plan: &SubmissionPlan,
    sim: &SubmissionSim,
    seed: u64,
) -> Result<Vec<Submission>> {
    if population.is_empty() {
        return Err(Error::Empty("population"));
    }
    let multiplicities = plan.assign(population.len(), seed)?;
    let mut out = Vec::new();
    for (device, &count) in population.iter().zip(&multiplicities) {
        let cookie_id = device_cookie(seed, device.device_id);
        let base_time = 1_000_000 + device.device_id.0 as u64 * 100;
        for k in 0..count {
            let sub_seed = derive_seed(seed, &[TAG_SUBMISSION, device.device_id.0 as u64, k as u64]);
            let mut rng = SimRng::seed_from_u64(sub_seed);
            let drift_sigma = device.noise.offset_drift_sigma;
            let drift: [f64; 3] = std::array::from_fn(|_| rng.normal(0.0, drift_sigma));
            let up = rest_stream_with_drift(device, &Orientation::FACE_UP, &sim.stream, sub_seed, drift)?;
            let down =
                rest_stream_with_drift(device, &Orientation::FACE_DOWN, &sim.stream, sub_seed, drift)?;
            let mut stream = up;
            let t_shift = sim.stream.duration + 1.0;
            stream.extend(down.into_iter().map(|s| AccelSample { t: s.t + t_shift, ..s }));
            let fingerprint = accel::z_axis_from_stream(&stream, &sim.detection)?;
            out.push(Submission {
                cookie_id,
                user_agent: device.user_agent.clone(),
                fingerprint,
                timestamp: base_time + k as u64 * sim.interval_s,
            });
        }
    }
    Ok(out)
}
