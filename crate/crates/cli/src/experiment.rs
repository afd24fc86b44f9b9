//! Seeded experiment pipeline: simulate a population, extract fingerprints
//! into a [`Dataset`], then analyze the dataset.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use sensorprint::accel::distinct_orientations;
use sensorprint::device::device_cookie;
use sensorprint::rng::{derive_seed, SimRng};
use sensorprint::{
    detect_rest_windows, enrollment_recognition_rate, estimate_six_params, extract_features,
    grid_entropy, intra_device_distances, kfold_accuracy, l2_classify, mle_classify, mle_fit,
    origin_sensitivity, percentile_nearest_rank, recognition_rate, sample_population,
    simulate_audio_measurement, simulate_multitone, simulate_rest_stream, simulate_submission_set,
    stealth_fingerprint, ua_fused_recognition, AudioFingerprint, CaptureSpec, DeviceId,
    DeviceProfile, DistanceVariant, FingerprintDb, FoldClassifier, FrequencyPlan,
    KFoldReport, LocationEffect, Orientation, RecognitionOutcome, ResponseCurve,
    ScaledDistanceConfig, Submission, SweepAnalyzer,
};

use crate::config::{
    AccelEntropy, AccelSweep, AudioL2, AudioMle, Experiment, ExperimentConfig, Locations, SixParam,
    Stealth,
};
use crate::dataset::{AudioFingerprintRecord, AudioMethod, Dataset, RecordingMeta, SixParamRecord, SubmissionRecord};
use crate::error::{CliError, Result};

const TAG_LOCATION: u64 = 0x4C4F_43;
const TAG_MEASURE: u64 = 0x4D45_4153;
const TAG_SUBMISSIONS: u64 = 0x5355_4253;
const TAG_SIX: u64 = 0x5349_58;
const TAG_FOLDS: u64 = 0x464F_4C44;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub seed: u64,
    pub devices: usize,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    AudioL2(L2Outcome),
    AudioMle(MleOutcome),
    Stealth(StealthOutcome),
    AccelSweep(SweepOutcome),
    AccelEntropy(EntropyOutcome),
    SixParam(SixParamOutcome),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Row {
    pub location: usize,
    pub variant: String,
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Outcome {
    pub train_location: usize,
    pub rows: Vec<L2Row>,
}

/// Correct identifications per test location; `main` and `second` are MLE
/// on the first and second harmonic, `l2_second` is L2 against the
/// per-device training mean of the second harmonic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleRow {
    pub location: usize,
    pub trained: bool,
    pub total: usize,
    pub main: usize,
    pub second: usize,
    pub l2_second: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleOutcome {
    pub train_runs: usize,
    pub rows: Vec<MleRow>,
}

impl MleOutcome {
    fn overall(&self, pick: impl Fn(&MleRow) -> usize) -> f64 {
        let total: usize = self.rows.iter().map(|r| r.total).sum();
        let correct: usize = self.rows.iter().map(pick).sum();
        correct as f64 / total.max(1) as f64
    }

    pub fn mle_accuracy(&self) -> f64 {
        self.overall(|r| r.second)
    }

    pub fn l2_accuracy(&self) -> f64 {
        self.overall(|r| r.l2_second)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StealthOutcome {
    pub samples: usize,
    pub k: usize,
    pub stealth: KFoldReport,
    pub sweep: KFoldReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m_sz: f64,
    pub correct: usize,
    pub evaluated: usize,
}

impl SweepRow {
    pub fn rate(&self) -> f64 {
        self.correct as f64 / self.evaluated.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecognitionSet {
    pub unfiltered: RecognitionOutcome,
    pub filtered: RecognitionOutcome,
    pub fused: RecognitionOutcome,
    pub fused_filtered: RecognitionOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyOutcome {
    pub submissions: usize,
    pub two_submission_devices: usize,
    pub percentile: f64,
    pub distance_o: f64,
    pub distance_s: f64,
    pub width_o: f64,
    pub width_s: f64,
    pub entropy_bits: f64,
    pub occupied_cells: usize,
    pub origin_min_bits: f64,
    pub origin_max_bits: f64,
    pub m_sz: f64,
    pub recognition: RecognitionSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SixParamOutcome {
    pub fingerprints: usize,
    pub converged: usize,
    pub mean_iterations: f64,
    /// Largest deviation of any estimated parameter from the device's truth.
    pub max_abs_error: f64,
    pub k: usize,
    pub kfold: KFoldReport,
}

/// Seed precedence: explicit flag, then the config, then `SENSORPRINT_SEED`,
/// then zero.
pub fn resolve_seed(flag: Option<u64>, cfg: &ExperimentConfig) -> Result<u64> {
    if let Some(s) = flag.or(cfg.seed) {
        return Ok(s);
    }
    match std::env::var("SENSORPRINT_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(vec![format!("SENSORPRINT_SEED: not an unsigned integer: {v:?}")])),
        Err(_) => Ok(0),
    }
}

pub fn simulate_devices(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    Ok(Dataset {
        devices: sample_population(cfg.population, &cfg.ranges, seed)?,
        ..Dataset::default()
    })
}

/// Location effects shared by all devices of one experiment.
pub fn location_effects(spec: &Locations, max_hz: f64, seed: u64) -> Vec<LocationEffect> {
    let (lo, hi) = (spec.excess_var_min, spec.excess_var_max);
    let variance = |l: usize| {
        let mut rng = SimRng::derived(seed, &[TAG_LOCATION, l as u64, 1]);
        ResponseCurve::sampled(max_hz, spec.knot_spacing_hz, |_| {
            if lo > 0.0 {
                rng.uniform(lo.ln(), hi.ln()).exp()
            } else {
                rng.uniform(lo, hi)
            }
        })
    };
    (0..spec.count)
        .map(|l| {
            let mut rng = SimRng::derived(seed, &[TAG_LOCATION, l as u64, 0]);
            let gain_db = ResponseCurve::sampled(max_hz, spec.knot_spacing_hz, |_| rng.uniform(-spec.gain_db, spec.gain_db));
            let excess_var_db2 = variance(if spec.shared_variance { 0 } else { l });
            LocationEffect { gain_db, excess_var_db2 }
        })
        .collect()
}

fn measurement_seed(seed: u64, location: usize, run: usize) -> u64 {
    derive_seed(seed, &[TAG_MEASURE, location as u64, run as u64])
}

/// Adds the fingerprints the configured experiment analyzes to `ds`, whose
/// devices must already be present.
pub fn extract_fingerprints(cfg: &ExperimentConfig, seed: u64, ds: &mut Dataset) -> Result<()> {
    cfg.validate()?;
    ds.check_integrity()?;
    match &cfg.experiment {
        Experiment::AudioL2(a) => {
            let runs = [0];
            audio_sweeps(ds, &a.plan, &a.locations, &runs, a.amplitude, &a.capture, seed)
        }
        Experiment::AudioMle(a) => {
            let runs: Vec<usize> = (0..a.runs).collect();
            audio_sweeps(ds, &a.plan, &a.locations, &runs, a.amplitude, &a.capture, seed)
        }
        Experiment::Stealth(s) => stealth_measurements(ds, s, seed),
        Experiment::AccelSweep(a) => submissions(ds, &a.submissions, &a.sim, seed),
        Experiment::AccelEntropy(a) => submissions(ds, &a.submissions, &a.sim, seed),
        Experiment::SixParam(s) => six_param_fingerprints(ds, s, seed),
    }
}

fn audio_sweeps(
    ds: &mut Dataset,
    plan: &FrequencyPlan,
    locations: &Locations,
    runs: &[usize],
    amplitude: f64,
    capture: &CaptureSpec,
    seed: u64,
) -> Result<()> {
    let effects = location_effects(locations, plan.sample_rate / 2.0, seed);
    let analyzer = SweepAnalyzer::new(plan, capture.sample_count())?;
    for device in &ds.devices {
        for (l, effect) in effects.iter().enumerate() {
            for &run in runs {
                let m_seed = measurement_seed(seed, l, run);
                let fp = analyzer.sweep(
                    |f, a| simulate_audio_measurement(device, effect, f, a, capture, m_seed),
                    amplitude,
                )?;
                for &f in &plan.frequencies {
                    ds.recordings.push(recording_meta(device.device_id, l, run, vec![f], amplitude, capture));
                }
                ds.audio_fingerprints
                    .push(AudioFingerprintRecord::new(device.device_id, l, run, AudioMethod::Sweep, &fp));
            }
        }
    }
    Ok(())
}

fn recording_meta(
    device_id: DeviceId,
    location: usize,
    run: usize,
    tones_hz: Vec<f64>,
    amplitude: f64,
    capture: &CaptureSpec,
) -> RecordingMeta {
    RecordingMeta {
        device_id,
        location,
        run,
        tones_hz,
        amplitude,
        sample_rate: capture.sample_rate,
        samples: capture.sample_count(),
    }
}

fn stealth_measurements(ds: &mut Dataset, s: &Stealth, seed: u64) -> Result<()> {
    let effects = location_effects(&s.locations, s.capture.sample_rate / 2.0, seed);
    let plan = FrequencyPlan {
        sample_rate: s.capture.sample_rate,
        frequencies: s.bases.clone(),
        harmonics: vec![2, 3],
    };
    let analyzer = SweepAnalyzer::new(&plan, s.capture.sample_count())?;
    for device in &ds.devices {
        for m in 0..s.measurements {
            let (l, run) = (m % effects.len(), m / effects.len());
            let m_seed = measurement_seed(seed, l, run);
            let effect = &effects[l];
            let rec = simulate_multitone(device, effect, &s.bases, s.amplitude, &s.capture, m_seed)?;
            let stealth = stealth_fingerprint(&rec, &s.bases, s.amplitude)?;
            ds.recordings
                .push(recording_meta(device.device_id, l, run, s.bases.clone(), s.amplitude, &s.capture));
            ds.audio_fingerprints
                .push(AudioFingerprintRecord::new(device.device_id, l, run, AudioMethod::Stealth, &stealth));
            let sweep = analyzer.sweep(
                |f, a| simulate_audio_measurement(device, effect, f, a, &s.capture, m_seed),
                s.amplitude,
            )?;
            for &f in &s.bases {
                ds.recordings
                    .push(recording_meta(device.device_id, l, run, vec![f], s.amplitude, &s.capture));
            }
            ds.audio_fingerprints
                .push(AudioFingerprintRecord::new(device.device_id, l, run, AudioMethod::Sweep, &sweep));
        }
    }
    Ok(())
}

fn submissions(
    ds: &mut Dataset,
    plan: &sensorprint::SubmissionPlan,
    sim: &sensorprint::SubmissionSim,
    seed: u64,
) -> Result<()> {
    let sub_seed = derive_seed(seed, &[TAG_SUBMISSIONS]);
    let subs = simulate_submission_set(&ds.devices, plan, sim, sub_seed)?;
    let owner: HashMap<_, _> = ds
        .devices
        .iter()
        .map(|d| (device_cookie(sub_seed, d.device_id), d.device_id))
        .collect();
    ds.submissions
        .extend(subs.iter().map(|s| SubmissionRecord::new(owner[&s.cookie_id], s)));
    Ok(())
}

/// `count` random orientations whose gravity directions are pairwise at
/// least `min_deg` apart.
fn spread_orientations(rng: &mut SimRng, count: usize, min_deg: f64) -> Vec<Orientation> {
    let mut out: Vec<Orientation> = Vec::with_capacity(count);
    let mut dirs: Vec<[f64; 3]> = Vec::with_capacity(count);
    while out.len() < count {
        let o = Orientation::random(rng);
        let g = o.gravity_in_device_frame();
        let mut trial = dirs.clone();
        trial.push(g);
        if distinct_orientations(&trial, min_deg) == trial.len() {
            dirs.push(g);
            out.push(o);
        }
    }
    out
}

fn six_param_fingerprints(ds: &mut Dataset, s: &SixParam, seed: u64) -> Result<()> {
    for device in &ds.devices {
        let id = device.device_id.0 as u64;
        for sample in 0..s.samples {
            let mut rng = SimRng::derived(seed, &[TAG_SIX, id, sample as u64]);
            let orientations = spread_orientations(&mut rng, s.orientations, s.gd.min_separation_deg);
            let mut means = Vec::with_capacity(orientations.len());
            for (k, o) in orientations.iter().enumerate() {
                let stream_seed = derive_seed(seed, &[TAG_SIX, id, sample as u64, k as u64]);
                let stream = simulate_rest_stream(device, o, &s.stream, stream_seed)?;
                let windows = detect_rest_windows(&stream, &s.detection);
                let count: usize = windows.iter().map(|w| w.count).sum();
                if count == 0 {
                    return Err(sensorprint::Error::Empty("rest windows").into());
                }
                let mean: [f64; 3] = std::array::from_fn(|axis| {
                    windows.iter().map(|w| w.mean[axis] * w.count as f64).sum::<f64>() / count as f64
                });
                means.push(mean);
            }
            let est = estimate_six_params(&means, &s.gd)?;
            let fp = est.fingerprint;
            ds.six_param.push(SixParamRecord {
                device_id: device.device_id,
                sample,
                o_x: fp.o_x,
                o_y: fp.o_y,
                o_z: fp.o_z,
                s_x: fp.s_x,
                s_y: fp.s_y,
                s_z: fp.s_z,
                residual_norm: fp.residual_norm,
                iterations: est.iterations,
                converged: est.converged,
            });
        }
    }
    Ok(())
}

/// Analyzes a dataset produced by [`extract_fingerprints`] for `cfg`.
pub fn analyze(cfg: &ExperimentConfig, seed: u64, ds: &Dataset) -> Result<ExperimentResult> {
    cfg.validate()?;
    ds.check_integrity()?;
    let outcome = match &cfg.experiment {
        Experiment::AudioL2(a) => Outcome::AudioL2(analyze_l2(a, ds)?),
        Experiment::AudioMle(a) => Outcome::AudioMle(analyze_mle(a, ds)?),
        Experiment::Stealth(s) => Outcome::Stealth(analyze_stealth(s, ds, seed)?),
        Experiment::AccelSweep(a) => Outcome::AccelSweep(analyze_sweep(a, ds)?),
        Experiment::AccelEntropy(a) => Outcome::AccelEntropy(analyze_entropy(a, ds)?),
        Experiment::SixParam(s) => Outcome::SixParam(analyze_six(s, ds, seed)?),
    };
    Ok(ExperimentResult {
        seed,
        devices: ds.devices.len(),
        outcome,
    })
}

/// Simulate, extract and analyze in one pass.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentResult> {
    let mut ds = simulate_devices(cfg, seed)?;
    extract_fingerprints(cfg, seed, &mut ds)?;
    analyze(cfg, seed, &ds)
}

type AudioKey = (DeviceId, usize, usize);

fn audio_index(ds: &Dataset, method: AudioMethod) -> BTreeMap<AudioKey, AudioFingerprint> {
    ds.audio_fingerprints
        .iter()
        .filter(|r| r.method == method)
        .map(|r| ((r.device_id, r.location, r.run), r.fingerprint()))
        .collect()
}

fn missing(what: &str) -> CliError {
    CliError::Integrity(format!("dataset lacks the {what} this experiment needs"))
}

fn analyze_l2(a: &AudioL2, ds: &Dataset) -> Result<L2Outcome> {
    let index = audio_index(ds, AudioMethod::Sweep);
    let ids: Vec<DeviceId> = ds.devices.iter().map(|d| d.device_id).collect();
    let lookup = |id: DeviceId, l: usize| index.get(&(id, l, 0)).ok_or_else(|| missing("sweep fingerprints"));
    let mut rows = Vec::new();
    for l in (0..a.locations.count).filter(|&l| l != a.train_location) {
        for variant in DistanceVariant::ALL {
            let enrolled = ids
                .iter()
                .map(|&id| Ok((id, extract_features(lookup(id, a.train_location)?, variant)?)))
                .collect::<Result<Vec<_>>>()?;
            let db = FingerprintDb::new(enrolled)?;
            let mut correct = 0;
            for &id in &ids {
                let probe = extract_features(lookup(id, l)?, variant)?;
                if l2_classify(&db, &probe)? == id {
                    correct += 1;
                }
            }
            rows.push(L2Row {
                location: l,
                variant: variant.label().to_string(),
                correct,
                total: ids.len(),
            });
        }
    }
    Ok(L2Outcome {
        train_location: a.train_location,
        rows,
    })
}

fn analyze_mle(a: &AudioMle, ds: &Dataset) -> Result<MleOutcome> {
    let index = audio_index(ds, AudioMethod::Sweep);
    let ids: Vec<DeviceId> = ds.devices.iter().map(|d| d.device_id).collect();
    let features = |id: DeviceId, l: usize, run: usize, harmonic: u32| -> Result<Vec<f64>> {
        let fp = index.get(&(id, l, run)).ok_or_else(|| missing("sweep fingerprints"))?;
        Ok(fp.harmonic_values(harmonic)?)
    };
    let trained = |l: usize| a.untrained_location != Some(l);

    let mut models = Vec::new();
    let mut l2_db = None;
    for harmonic in [1, 2] {
        let mut training: BTreeMap<DeviceId, Vec<Vec<f64>>> = BTreeMap::new();
        for &id in &ids {
            for l in (0..a.locations.count).filter(|&l| trained(l)) {
                for run in 0..a.train_runs {
                    training.entry(id).or_default().push(features(id, l, run, harmonic)?);
                }
            }
        }
        let model = mle_fit(&training)?;
        if harmonic == 2 {
            let means = model.devices.iter().map(|(id, st)| (*id, st.mean.clone()));
            l2_db = Some(FingerprintDb::new(means)?);
        }
        models.push(model);
    }
    let l2_db = l2_db.expect("second harmonic is always fitted");

    let mut rows = Vec::new();
    for l in 0..a.locations.count {
        let mut row = MleRow {
            location: l,
            trained: trained(l),
            total: 0,
            main: 0,
            second: 0,
            l2_second: 0,
        };
        for &id in &ids {
            for run in a.train_runs..a.runs {
                row.total += 1;
                let main = features(id, l, run, 1)?;
                let second = features(id, l, run, 2)?;
                row.main += usize::from(mle_classify(&models[0], &main)? == id);
                row.second += usize::from(mle_classify(&models[1], &second)? == id);
                row.l2_second += usize::from(l2_classify(&l2_db, &second)? == id);
            }
        }
        rows.push(row);
    }
    Ok(MleOutcome {
        train_runs: a.train_runs,
        rows,
    })
}

fn analyze_stealth(s: &Stealth, ds: &Dataset, seed: u64) -> Result<StealthOutcome> {
    let labeled = |method: AudioMethod| -> Vec<(Vec<f64>, DeviceId)> {
        audio_index(ds, method)
            .into_iter()
            .map(|((id, _, _), fp)| (fp.values(), id))
            .collect()
    };
    let stealth = labeled(AudioMethod::Stealth);
    let sweep = labeled(AudioMethod::Sweep);
    if stealth.is_empty() || sweep.is_empty() {
        return Err(missing("stealth and sweep fingerprints"));
    }
    let classifier = FoldClassifier::Knn { k: s.k };
    let fold_seed = derive_seed(seed, &[TAG_FOLDS]);
    Ok(StealthOutcome {
        samples: stealth.len(),
        k: s.k,
        stealth: kfold_accuracy(&stealth, s.folds, classifier, fold_seed)?,
        sweep: kfold_accuracy(&sweep, s.folds, classifier, fold_seed)?,
    })
}

fn core_submissions(ds: &Dataset) -> Result<Vec<Submission>> {
    if ds.submissions.is_empty() {
        return Err(missing("submissions"));
    }
    Ok(ds.submissions.iter().map(SubmissionRecord::submission).collect())
}

fn analyze_sweep(a: &AccelSweep, ds: &Dataset) -> Result<SweepOutcome> {
    let subs = core_submissions(ds)?;
    let rows = a
        .m_sz
        .iter()
        .map(|&m_sz| {
            let out = enrollment_recognition_rate(&subs, &ScaledDistanceConfig { m_sz })?;
            Ok(SweepRow {
                m_sz,
                correct: out.correct,
                evaluated: out.evaluated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepOutcome { rows })
}

fn analyze_entropy(a: &AccelEntropy, ds: &Dataset) -> Result<EntropyOutcome> {
    let subs = core_submissions(ds)?;
    let (d_o, d_s) = intra_device_distances(&subs);
    let distance_o = percentile_nearest_rank(&d_o, a.percentile)?;
    let distance_s = percentile_nearest_rank(&d_s, a.percentile)?;
    let points: Vec<(f64, f64)> = subs.iter().map(|s| (s.fingerprint.o_z, s.fingerprint.s_z)).collect();
    let report = grid_entropy(&points, &a.grid)?;
    let origin = origin_sensitivity(&points, a.grid.width_o, a.grid.width_s, &a.origin_offsets)?;
    let cfg = ScaledDistanceConfig { m_sz: a.m_sz };
    let p = Some(a.percentile);
    let recognition = RecognitionSet {
        unfiltered: recognition_rate(&subs, &cfg, None)?,
        filtered: recognition_rate(&subs, &cfg, p)?,
        fused: ua_fused_recognition(&subs, &cfg, None)?,
        fused_filtered: ua_fused_recognition(&subs, &cfg, p)?,
    };
    Ok(EntropyOutcome {
        submissions: subs.len(),
        two_submission_devices: d_o.len(),
        percentile: a.percentile,
        distance_o,
        distance_s,
        width_o: a.grid.width_o,
        width_s: a.grid.width_s,
        entropy_bits: report.entropy_bits,
        occupied_cells: report.occupied_cells(),
        origin_min_bits: origin.min_bits,
        origin_max_bits: origin.max_bits,
        m_sz: a.m_sz,
        recognition,
    })
}

fn analyze_six(s: &SixParam, ds: &Dataset, seed: u64) -> Result<SixParamOutcome> {
    if ds.six_param.is_empty() {
        return Err(missing("six-parameter fingerprints"));
    }
    let truth: BTreeMap<DeviceId, &DeviceProfile> = ds.devices.iter().map(|d| (d.device_id, d)).collect();
    let mut max_abs_error: f64 = 0.0;
    for r in &ds.six_param {
        let cal = truth[&r.device_id].accel;
        let expected = [cal.o_x, cal.o_y, cal.o_z, cal.s_x, cal.s_y, cal.s_z];
        for (e, v) in expected.iter().zip(r.vector()) {
            max_abs_error = max_abs_error.max((e - v).abs());
        }
    }
    let labeled: Vec<(Vec<f64>, DeviceId)> = ds.six_param.iter().map(|r| (r.vector(), r.device_id)).collect();
    let kfold = kfold_accuracy(
        &labeled,
        s.folds,
        FoldClassifier::Knn { k: s.k },
        derive_seed(seed, &[TAG_FOLDS]),
    )?;
    let n = ds.six_param.len();
    Ok(SixParamOutcome {
        fingerprints: n,
        converged: ds.six_param.iter().filter(|r| r.converged).count(),
        mean_iterations: ds.six_param.iter().map(|r| r.iterations as f64).sum::<f64>() / n as f64,
        max_abs_error,
        k: s.k,
        kfold,
    })
}
