//! Experiment configuration, read from one JSON document.
//!
//! Unknown keys are rejected everywhere. Every section except `population`
//! and `experiment.kind` has a default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use sensorprint::audio::DEFAULT_STEALTH_BASES;
use sensorprint::device::MultiplicityShare;
use sensorprint::{
    CaptureSpec, FrequencyPlan, GdConfig, GridSpec, PopulationRanges, RestDetection, StreamSpec,
    SubmissionPlan, SubmissionSim,
};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Used when no `--seed` flag is given.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Number of simulated devices.
    pub population: usize,
    #[serde(default)]
    pub ranges: PopulationRanges,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// Train on one location, L2-classify the others (per distance variant).
    AudioL2(AudioL2),
    /// Repeated runs per location, MLE against L2 on the second harmonic.
    AudioMle(AudioMle),
    /// Simultaneous-tone fingerprints with k-NN cross-validation.
    Stealth(Stealth),
    /// Enrollment recognition rate as a function of M_Sz.
    AccelSweep(AccelSweep),
    /// Intra-device percentiles, grid entropy and recognition protocols.
    AccelEntropy(AccelEntropy),
    /// Six-parameter calibration fingerprints with k-NN cross-validation.
    SixParam(SixParam),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::AudioL2(_) => "audio_l2",
            Experiment::AudioMle(_) => "audio_mle",
            Experiment::Stealth(_) => "stealth",
            Experiment::AccelSweep(_) => "accel_sweep",
            Experiment::AccelEntropy(_) => "accel_entropy",
            Experiment::SixParam(_) => "six_param",
        }
    }

    pub fn is_audio(&self) -> bool {
        matches!(
            self,
            Experiment::AudioL2(_) | Experiment::AudioMle(_) | Experiment::Stealth(_)
        )
    }
}

/// Fixed recording locations shared by every device. Location `l` gets a
/// gain curve drawn uniformly within `±gain_db` and an excess-variance
/// curve drawn log-uniformly from `[excess_var_min, excess_var_max]`, both
/// with independent knots every `knot_spacing_hz`. With `shared_variance`
/// every location uses the first location's excess-variance curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Locations {
    pub count: usize,
    pub gain_db: f64,
    pub excess_var_min: f64,
    pub excess_var_max: f64,
    pub shared_variance: bool,
    pub knot_spacing_hz: f64,
}

impl Default for Locations {
    fn default() -> Self {
        Self {
            count: 3,
            gain_db: 0.0,
            excess_var_min: 0.0,
            excess_var_max: 0.0,
            shared_variance: false,
            knot_spacing_hz: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AudioL2 {
    pub plan: FrequencyPlan,
    pub locations: Locations,
    pub amplitude: f64,
    pub capture: CaptureSpec,
    /// Location whose measurements are enrolled.
    pub train_location: usize,
}

impl Default for AudioL2 {
    fn default() -> Self {
        Self {
            plan: FrequencyPlan::standard(),
            locations: Locations::default(),
            amplitude: 1.0,
            capture: CaptureSpec::app_protocol(),
            train_location: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AudioMle {
    pub plan: FrequencyPlan,
    pub locations: Locations,
    /// Measurement runs per device and location.
    pub runs: usize,
    /// Runs `0..train_runs` train the models; the rest are tested.
    pub train_runs: usize,
    /// Location left out of training entirely.
    pub untrained_location: Option<usize>,
    pub amplitude: f64,
    pub capture: CaptureSpec,
}

impl Default for AudioMle {
    fn default() -> Self {
        Self {
            plan: FrequencyPlan::thirteen_tone(),
            locations: Locations::default(),
            runs: 4,
            train_runs: 2,
            untrained_location: None,
            amplitude: 1.0,
            capture: CaptureSpec::app_protocol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stealth {
    pub bases: Vec<f64>,
    pub locations: Locations,
    /// Measurements per device, spread round-robin over the locations.
    pub measurements: usize,
    pub amplitude: f64,
    pub capture: CaptureSpec,
    pub folds: usize,
    pub k: usize,
}

impl Default for Stealth {
    fn default() -> Self {
        Self {
            bases: DEFAULT_STEALTH_BASES.to_vec(),
            locations: Locations::default(),
            measurements: 10,
            amplitude: 1.0,
            capture: CaptureSpec::app_protocol(),
            folds: 10,
            k: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AccelSweep {
    pub submissions: SubmissionPlan,
    pub sim: SubmissionSim,
    pub m_sz: Vec<f64>,
}

impl Default for AccelSweep {
    fn default() -> Self {
        Self {
            submissions: SubmissionPlan::Fixed(2),
            sim: SubmissionSim::default(),
            m_sz: vec![1.0, 10.0, 100.0, 300.0, 1000.0, 10000.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AccelEntropy {
    pub submissions: SubmissionPlan,
    pub sim: SubmissionSim,
    pub grid: GridSpec,
    /// Percentile used for the reported distances and the recognition filter.
    pub percentile: f64,
    pub m_sz: f64,
    /// Fractional grid-origin shifts, in cell widths.
    pub origin_offsets: Vec<f64>,
}

impl Default for AccelEntropy {
    fn default() -> Self {
        Self {
            submissions: SubmissionPlan::Mixture(vec![
                MultiplicityShare {
                    submissions: 1,
                    weight: 1.0,
                },
                MultiplicityShare {
                    submissions: 2,
                    weight: 1.0,
                },
            ]),
            sim: SubmissionSim::default(),
            grid: GridSpec::default(),
            percentile: 95.0,
            m_sz: sensorprint::classify::DEFAULT_M_SZ,
            origin_offsets: vec![0.0, 0.25, 0.5, 0.75],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SixParam {
    /// Random resting orientations per fingerprint.
    pub orientations: usize,
    /// Fingerprints per device.
    pub samples: usize,
    pub stream: StreamSpec,
    pub detection: RestDetection,
    pub gd: GdConfig,
    pub folds: usize,
    pub k: usize,
}

impl Default for SixParam {
    fn default() -> Self {
        Self {
            orientations: 8,
            samples: 4,
            stream: StreamSpec::default(),
            // Arbitrary attitudes put x/y offsets into the magnitude too.
            detection: RestDetection {
                magnitude_tol: 1.5,
                ..RestDetection::default()
            },
            gd: GdConfig::default(),
            folds: 4,
            k: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("{path}: {}", e.into_inner()))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg = Self::from_json(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every module precondition up front and reports all failures.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if let Err(e) = self.ranges.validate() {
            problems.push(format!("ranges: {e}"));
        }
        let accel_min = |p: &mut Vec<String>, plan: &SubmissionPlan, sim: &SubmissionSim| {
            if let Err(e) = plan.assign(self.population, 0) {
                p.push(format!("submissions: {e}"));
            }
            if !(sim.stream.duration > 0.0 && sim.stream.rate > 0.0) {
                p.push("sim.stream: duration and rate must be positive".into());
            }
            let samples = (sim.stream.duration * sim.stream.rate).round() as usize;
            if samples < sim.detection.min_samples {
                p.push("sim.stream: too short for detection.min_samples".into());
            }
        };
        match &self.experiment {
            Experiment::AudioL2(a) => {
                check_audio(&mut problems, &a.plan, &a.locations, a.amplitude, &a.capture);
                require(&mut problems, self.population >= 1, "population: need at least one device");
                require(&mut problems, 
                    a.train_location < a.locations.count,
                    "train_location: must name an existing location",
                );
                require(&mut problems, a.locations.count >= 2, "locations.count: need a test location besides the training one");
            }
            Experiment::AudioMle(a) => {
                check_audio(&mut problems, &a.plan, &a.locations, a.amplitude, &a.capture);
                require(&mut problems, self.population >= 1, "population: need at least one device");
                require(&mut problems, a.train_runs < a.runs, "train_runs: must leave at least one test run");
                let trained_locations = a.locations.count - usize::from(a.untrained_location.is_some());
                require(&mut problems, 
                    a.train_runs * trained_locations >= 2,
                    "train_runs: every device needs at least two training measurements",
                );
                if let Some(l) = a.untrained_location {
                    require(&mut problems, l < a.locations.count, "untrained_location: must name an existing location");
                }
            }
            Experiment::Stealth(s) => {
                let plan = FrequencyPlan {
                    sample_rate: s.capture.sample_rate,
                    frequencies: s.bases.clone(),
                    harmonics: vec![2, 3],
                };
                check_audio(&mut problems, &plan, &s.locations, s.amplitude, &s.capture);
                require(&mut problems, s.k >= 1, "k: must be at least 1");
                require(&mut problems, s.folds >= 2, "folds: need at least 2");
                require(&mut problems, 
                    self.population * s.measurements >= s.folds,
                    "folds: more folds than measurements",
                );
            }
            Experiment::AccelSweep(a) => {
                accel_min(&mut problems, &a.submissions, &a.sim);
                require(&mut problems, !a.m_sz.is_empty(), "m_sz: need at least one value");
                require(&mut problems, 
                    a.m_sz.iter().all(|m| m.is_finite() && *m >= 0.0),
                    "m_sz: values must be finite and non-negative",
                );
            }
            Experiment::AccelEntropy(a) => {
                accel_min(&mut problems, &a.submissions, &a.sim);
                if let Err(e) = a.grid.validate() {
                    problems.push(format!("grid: {e}"));
                }
                require(&mut problems, 
                    a.percentile > 0.0 && a.percentile <= 100.0,
                    "percentile: must lie in (0, 100]",
                );
                require(&mut problems, a.m_sz.is_finite() && a.m_sz >= 0.0, "m_sz: must be finite and non-negative");
                require(&mut problems, !a.origin_offsets.is_empty(), "origin_offsets: need at least one offset");
                require(&mut problems, 
                    a.origin_offsets.iter().all(|d| d.abs() <= 1.0),
                    "origin_offsets: must lie within one cell width",
                );
            }
            Experiment::SixParam(s) => {
                require(&mut problems, s.orientations >= 6, "orientations: need at least 6");
                require(&mut problems, s.k >= 1, "k: must be at least 1");
                require(&mut problems, s.folds >= 2, "folds: need at least 2");
                require(&mut problems, 
                    self.population * s.samples >= s.folds,
                    "folds: more folds than fingerprints",
                );
                let samples = (s.stream.duration * s.stream.rate).round() as usize;
                require(&mut problems, 
                    samples >= s.detection.min_samples,
                    "stream: too short for detection.min_samples",
                );
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(problems))
        }
    }
}

fn check_audio(
    problems: &mut Vec<String>,
    plan: &FrequencyPlan,
    locations: &Locations,
    amplitude: f64,
    capture: &CaptureSpec,
) {
    if let Err(e) = plan.validate() {
        problems.push(format!("plan: {e}"));
    }
    if plan.sample_rate != capture.sample_rate {
        problems.push("capture.sample_rate: must equal the plan's sample rate".into());
    }
    if let Err(e) = capture.validate() {
        problems.push(format!("capture: {e}"));
    }
    if !(amplitude.is_finite() && amplitude > 0.0) {
        problems.push("amplitude: must be positive".into());
    }
    if locations.count == 0 {
        problems.push("locations.count: need at least one location".into());
    }
    let l = locations;
    if !(l.gain_db.is_finite() && l.gain_db >= 0.0) {
        problems.push("locations.gain_db: must be finite and non-negative".into());
    }
    if !(l.excess_var_min >= 0.0 && l.excess_var_min <= l.excess_var_max && l.excess_var_max.is_finite()) {
        problems.push("locations: need 0 <= excess_var_min <= excess_var_max".into());
    }
    if !(l.knot_spacing_hz > 0.0) {
        problems.push("locations.knot_spacing_hz: must be positive".into());
    }
}

fn require(problems: &mut Vec<String>, ok: bool, msg: &str) {
    if !ok {
        problems.push(msg.to_string());
    }
}
