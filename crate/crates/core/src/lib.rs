//! Sensor fingerprinting of mobile devices on simulated populations.
//!
//! - [`device`]: synthetic device profiles, audio loop and accelerometer
//!   simulators, cookie-correlated submission sets.
//! - [`audio`]: harmonic feedback-ratio extraction, sweep and stealth.
//! - [`accel`]: rest detection, closed-form Z-axis and six-parameter
//!   calibration estimators.
//! - [`classify`]: L2, maximum-likelihood, scaled accelerometer distance,
//!   k-NN and k-fold cross-validation.
//! - [`entropy`]: intra-device percentiles, grid entropy and recognition
//!   protocols.
//!
//! Every random draw comes from [`rng::SimRng`] streams derived from an
//! explicit seed, so all results are reproducible bit for bit.

pub mod accel;
pub mod audio;
pub mod classify;
pub mod device;
pub mod entropy;
pub mod error;
pub mod rng;

pub use accel::{
    classify_orientation, detect_rest_windows, estimate_six_params, estimate_z_axis,
    six_param_residual, z_axis_from_stream, FaceOrientation, GdConfig, RestDetection, RestWindow,
    SixParamEstimate, SixParamFingerprint, ZAxisFingerprint,
};
pub use audio::{
    quadrature_response, stealth_fingerprint, sweep_fingerprint, synthesize_tone, AudioFingerprint,
    FrequencyPlan, HarmonicResponse, QuadratureBasis, SweepAnalyzer,
};
pub use classify::{
    extract_features, kfold_accuracy, knn_classify, l2_classify, mle_classify, mle_fit,
    scaled_accel_distance, DistanceVariant, FingerprintDb, FoldClassifier, KFoldReport, MleModel,
    ScaledDistanceConfig,
};
pub use device::{
    sample_population, simulate_audio_measurement, simulate_multitone, simulate_rest_stream,
    simulate_submission_set, AccelCalibration, AccelSample, AudioResponseProfile, CaptureSpec,
    DeviceId, DeviceProfile, LocationEffect, NoiseSpec, Orientation, ParamDist, PopulationRanges,
    Recording, ResponseCurve, StreamSpec, SubmissionPlan, SubmissionSim, GRAVITY,
};
pub use entropy::{
    enrollment_recognition_rate, grid_entropy, intra_device_distances, origin_sensitivity,
    percentile_nearest_rank, recognition_rate, ua_fused_recognition, CookieId, GridEntropyReport,
    GridSpec, RecognitionOutcome, Submission,
};
pub use error::{Error, Result};
