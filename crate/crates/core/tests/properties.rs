use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use sensorprint::accel::{numerical_gradient, six_param_objective};
use sensorprint::classify::FeatureStats;
use sensorprint::rng::SimRng;
use sensorprint::*;

const G: f64 = 9.80665;

fn cheap() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

fn device_with(s: [f64; 3], o: [f64; 3]) -> DeviceProfile {
    DeviceProfile {
        accel: AccelCalibration::from_arrays(s, o),
        ..DeviceProfile::ideal(DeviceId(7))
    }
}

fn stream_mean(stream: &[AccelSample]) -> [f64; 3] {
    let n = stream.len() as f64;
    std::array::from_fn(|k| stream.iter().map(|s| s.vector()[k]).sum::<f64>() / n)
}

fn face_pair(device: &DeviceProfile, spec: &StreamSpec, seed: u64) -> Vec<AccelSample> {
    let mut stream = simulate_rest_stream(device, &Orientation::FACE_UP, spec, seed).unwrap();
    let down = simulate_rest_stream(device, &Orientation::FACE_DOWN, spec, seed).unwrap();
    stream.extend(down.into_iter().map(|s| AccelSample {
        t: s.t + spec.duration + 1.0,
        ..s
    }));
    stream
}

proptest! {
    #[test]
    fn rest_stream_magnitude_is_g(seed in any::<u64>()) {
        let o = Orientation::random(&mut SimRng::seed_from_u64(seed));
        let spec = StreamSpec { duration: 0.2, rate: 100.0 };
        for s in simulate_rest_stream(&DeviceProfile::ideal(DeviceId(0)), &o, &spec, seed).unwrap() {
            prop_assert!((s.magnitude() - G).abs() < 1e-9);
        }
    }

    #[test]
    fn population_within_ranges_and_reproducible(n in 0usize..40, seed in any::<u64>()) {
        let ranges = PopulationRanges::default();
        let pop = sample_population(n, &ranges, seed).unwrap();
        prop_assert_eq!(pop.len(), n);
        for d in &pop {
            for (dist, v) in [
                (&ranges.s_x, d.accel.s_x), (&ranges.s_y, d.accel.s_y), (&ranges.s_z, d.accel.s_z),
                (&ranges.o_x, d.accel.o_x), (&ranges.o_y, d.accel.o_y), (&ranges.o_z, d.accel.o_z),
                (&ranges.h2, d.audio.h2), (&ranges.h3, d.audio.h3),
            ] {
                let (lo, hi) = dist.bounds().unwrap();
                prop_assert!(lo <= v && v <= hi);
            }
            prop_assert!(d.audio.gain_db.values.iter().all(|g| g.abs() <= ranges.gain_tolerance_db));
        }
        prop_assert_eq!(pop, sample_population(n, &ranges, seed).unwrap());
    }

    #[test]
    fn closed_form_inverts_noiseless_simulation(s_z in 0.99f64..1.04, o_z in -0.5f64..0.5, seed in any::<u64>()) {
        let d = device_with([1.0, 1.0, s_z], [0.0, 0.0, o_z]);
        let est = z_axis_from_stream(&face_pair(&d, &StreamSpec::default(), seed), &RestDetection::default()).unwrap();
        prop_assert!((est.s_z - s_z).abs() < 1e-9);
        prop_assert!((est.o_z - o_z).abs() < 1e-9);
    }

    #[test]
    fn residual_vanishes_at_true_parameters(
        s in prop::array::uniform3(0.99f64..1.04),
        o in prop::array::uniform3(-0.5f64..0.5),
        seed in any::<u64>(),
    ) {
        let d = device_with(s, o);
        let orientation = Orientation::random(&mut SimRng::seed_from_u64(seed));
        let stream = simulate_rest_stream(&d, &orientation, &StreamSpec { duration: 0.1, rate: 100.0 }, seed).unwrap();
        prop_assert!(six_param_residual(&d.accel, stream_mean(&stream)).unwrap().abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finer_step(
        s in prop::array::uniform3(0.95f64..1.05),
        o in prop::array::uniform3(-0.6f64..0.6),
        seed in any::<u64>(),
    ) {
        let mut rng = SimRng::seed_from_u64(seed);
        let truth = device_with([1.01, 0.99, 1.03], [0.1, -0.2, 0.3]).accel;
        let means: Vec<[f64; 3]> = (0..8)
            .map(|_| truth.apply(Orientation::random(&mut rng).gravity_in_device_frame()))
            .collect();
        let cal = AccelCalibration::from_arrays(s, o);
        let coarse = numerical_gradient(&cal, &means, 1e-6);
        let fine = numerical_gradient(&cal, &means, 1e-7);
        let norm = fine.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = coarse.iter().zip(&fine).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(diff <= 1e-4 * norm.max(1.0), "diff {diff} norm {norm}");
    }
}

proptest! {
    #![proptest_config(cheap())]

    #[test]
    fn descent_is_monotone(
        s in prop::array::uniform3(0.99f64..1.04),
        o in prop::array::uniform3(-0.5f64..0.5),
        seed in any::<u64>(),
    ) {
        let d = DeviceProfile {
            noise: NoiseSpec { accel_sigma: 0.05, ..NoiseSpec::NONE },
            ..device_with(s, o)
        };
        let mut rng = SimRng::seed_from_u64(seed);
        let means: Vec<[f64; 3]> = (0..8)
            .map(|k| {
                let orientation = Orientation::random(&mut rng);
                stream_mean(&simulate_rest_stream(&d, &orientation, &StreamSpec::default(), seed ^ k).unwrap())
            })
            .collect();
        let Ok(est) = estimate_six_params(&means, &GdConfig::default()) else {
            return Ok(());
        };
        prop_assert!(est.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        let last = *est.objective_trace.last().unwrap();
        prop_assert_eq!(last, six_param_objective(&est.fingerprint.calibration(), &means));
    }

    #[test]
    fn audio_is_linear_in_amplitude(seed in any::<u64>(), amplitude in 0.01f64..1.0, f in 100.0f64..1300.0) {
        let d = &sample_population(1, &PopulationRanges::default(), seed).unwrap()[0];
        let capture = CaptureSpec::window(0.05);
        let quiet = LocationEffect::default();
        let one = simulate_audio_measurement(d, &quiet, f, amplitude, &capture, seed).unwrap();
        let two = simulate_audio_measurement(d, &quiet, f, 2.0 * amplitude, &capture, seed).unwrap();
        for (a, b) in one.samples.iter().zip(&two.samples) {
            prop_assert!((2.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn stealth_agrees_with_sweep_when_noiseless(seed in any::<u64>()) {
        let d = &sample_population(1, &PopulationRanges::default(), seed).unwrap()[0];
        let capture = CaptureSpec::app_protocol();
        let bases = audio::DEFAULT_STEALTH_BASES;
        let quiet = LocationEffect::default();
        let rec = simulate_multitone(d, &quiet, &bases, 0.5, &capture, 0).unwrap();
        let stealth = stealth_fingerprint(&rec, &bases, 0.5).unwrap();
        let plan = FrequencyPlan { sample_rate: capture.sample_rate, frequencies: bases.to_vec(), harmonics: vec![2, 3] };
        let sweep = sweep_fingerprint(|f, a| simulate_audio_measurement(d, &quiet, f, a, &capture, 0), &plan, 0.5).unwrap();
        prop_assert_eq!(stealth.keys(), sweep.keys());
        for (a, b) in stealth.values().iter().zip(sweep.values()) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn sweep_keys_match_plan(seed in any::<u64>()) {
        let d = &sample_population(1, &PopulationRanges::default(), seed).unwrap()[0];
        let plan = FrequencyPlan::standard();
        let capture = CaptureSpec::window(0.1);
        let fp = sweep_fingerprint(
            |f, a| simulate_audio_measurement(d, &LocationEffect::default(), f, a, &capture, seed),
            &plan,
            1.0,
        ).unwrap();
        let expected: BTreeSet<(u64, u32)> = plan
            .frequencies
            .iter()
            .flat_map(|f| plan.harmonics.iter().map(move |&j| (f.to_bits(), j)))
            .collect();
        let got: BTreeSet<(u64, u32)> = fp.keys().into_iter().map(|(f, j)| (f.to_bits(), j)).collect();
        prop_assert_eq!(got, expected);
    }
}

proptest! {
    #[test]
    fn quadrature_never_exceeds_amplitude(
        tone in 1u32..3999,
        probe in 1u32..1999,
        harmonic in 1u32..3,
        amplitude in 0.0f64..2.0,
    ) {
        let rec = synthesize_tone(tone as f64, amplitude, 1.0, 8000.0).unwrap();
        let r = quadrature_response(&rec, probe as f64, harmonic).unwrap();
        prop_assert!(r <= amplitude * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn quadrature_ignores_whole_cycle_shifts(
        divisor in prop::sample::select(vec![10u32, 16, 20, 25, 32, 40, 50, 80, 100]),
        cycles in 0usize..50,
    ) {
        let f = 8000.0 / divisor as f64;
        let shift = cycles * divisor as usize;
        let tone = |start: usize| Recording {
            sample_rate: 8000.0,
            samples: (start..start + 8000).map(|n| (std::f64::consts::TAU * f * n as f64 / 8000.0).sin()).collect(),
        };
        let a = quadrature_response(&tone(0), f, 1).unwrap();
        let b = quadrature_response(&tone(shift), f, 1).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn quadrature_scales_with_recording(c in -5.0f64..5.0, f in 50u32..1000) {
        let rec = synthesize_tone(f as f64 * 1.5, 0.7, 0.5, 8000.0).unwrap();
        let scaled = Recording { samples: rec.samples.iter().map(|v| c * v).collect(), ..rec.clone() };
        let a = quadrature_response(&rec, f as f64, 1).unwrap();
        let b = quadrature_response(&scaled, f as f64, 1).unwrap();
        prop_assert!((b - c.abs() * a).abs() <= 1e-12 * (1.0 + b));
    }
}

fn db_strategy() -> impl Strategy<Value = (Vec<Vec<Vec<f64>>>, Vec<f64>)> {
    (1usize..5).prop_flat_map(|dim| {
        (
            prop::collection::vec(prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), 1..4), 2..7),
            prop::collection::vec(-10.0f64..10.0, dim),
        )
    })
}

proptest! {
    #[test]
    fn l2_ignores_appended_constant((devices, probe) in db_strategy(), c in -100.0f64..100.0) {
        let extend = |v: &Vec<f64>| { let mut v = v.clone(); v.push(c); v };
        let enrolled = |f: &dyn Fn(&Vec<f64>) -> Vec<f64>| {
            FingerprintDb::new(devices.iter().enumerate().flat_map(|(k, vs)| vs.iter().map(move |v| (k, f(v))))).unwrap()
        };
        let db = enrolled(&|v| v.clone());
        let extended = enrolled(&extend);
        prop_assert_eq!(l2_classify(&db, &probe).unwrap(), l2_classify(&extended, &extend(&probe)).unwrap());
    }

    #[test]
    fn mle_with_equal_variances_is_l2_on_means((devices, probe) in db_strategy(), var in 1e-3f64..10.0) {
        let means: Vec<Vec<f64>> = devices.iter().map(|vs| vs[0].clone()).collect();
        let dim = probe.len();
        let model = MleModel {
            devices: means
                .iter()
                .enumerate()
                .map(|(k, m)| (k, FeatureStats { mean: m.clone(), variance: vec![var; dim] }))
                .collect(),
            dim,
        };
        let db = FingerprintDb::new(means.iter().cloned().enumerate()).unwrap();
        prop_assert_eq!(mle_classify(&model, &probe).unwrap(), l2_classify(&db, &probe).unwrap());
    }

    #[test]
    fn scaled_distance_symmetric_and_definite(
        a in (-1.0f64..1.0, 0.9f64..1.1),
        b in (-1.0f64..1.0, 0.9f64..1.1),
        m_sz in 1e-3f64..1e5,
    ) {
        let fa = ZAxisFingerprint { o_z: a.0, s_z: a.1 };
        let fb = ZAxisFingerprint { o_z: b.0, s_z: b.1 };
        let cfg = ScaledDistanceConfig { m_sz };
        prop_assert_eq!(scaled_accel_distance(&fa, &fb, &cfg), scaled_accel_distance(&fb, &fa, &cfg));
        prop_assert_eq!(scaled_accel_distance(&fa, &fa, &cfg), 0.0);
        if a != b {
            prop_assert!(scaled_accel_distance(&fa, &fb, &cfg) > 0.0);
        }
    }

    #[test]
    fn one_nn_returns_own_label(points in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..30), pick in any::<prop::sample::Index>()) {
        let labeled: Vec<(Vec<f64>, usize)> = points.into_iter().enumerate().map(|(i, v)| (v, i)).collect();
        let i = pick.index(labeled.len());
        // Skip exact duplicates; the property needs a unique training point.
        prop_assume!(labeled.iter().filter(|(v, _)| *v == labeled[i].0).count() == 1);
        prop_assert_eq!(knn_classify(&labeled, &labeled[i].0, 1).unwrap(), i);
    }

    #[test]
    fn percentile_100_is_max(values in prop::collection::vec(-1e3f64..1e3, 1..100)) {
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(percentile_nearest_rank(&values, 100.0).unwrap(), max);
    }
}

/// Points placed strictly inside known cells of a grid at `origin`.
fn celled_points(rng: &mut SimRng, origin: (f64, f64), w: (f64, f64), n: usize, span: u64) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            let (i, j) = (rng.below(span) as f64, rng.below(span) as f64);
            (
                origin.0 + (i + rng.uniform(0.1, 0.9)) * w.0,
                origin.1 + (j + rng.uniform(0.1, 0.9)) * w.1,
            )
        })
        .collect()
}

proptest! {
    #[test]
    fn entropy_bounded_by_occupied_cells(seed in any::<u64>(), n in 1usize..300, span in 1u64..12) {
        let mut rng = SimRng::seed_from_u64(seed);
        let points = celled_points(&mut rng, (0.0, 1.0), (0.045, 0.0037), n, span);
        let grid = GridSpec { origin: Some((0.0, 1.0)), ..GridSpec::default() };
        let report = grid_entropy(&points, &grid).unwrap();
        let bound = (report.occupied_cells() as f64).log2();
        prop_assert!(report.entropy_bits <= bound + 1e-12);
        let uniform = report.cells.iter().all(|c| c.count == report.cells[0].count);
        prop_assert_eq!(uniform, (report.entropy_bits - bound).abs() < 1e-12);
    }

    #[test]
    fn entropy_translation_invariant(seed in any::<u64>(), n in 1usize..200, t in (-3.0f64..3.0, -0.5f64..0.5)) {
        let mut rng = SimRng::seed_from_u64(seed);
        let w = (rng.uniform(0.01, 0.5), rng.uniform(0.001, 0.05));
        let origin = (rng.uniform(-1.0, 1.0), rng.uniform(0.5, 1.5));
        let points = celled_points(&mut rng, origin, w, n, 6);
        let moved: Vec<(f64, f64)> = points.iter().map(|p| (p.0 + t.0, p.1 + t.1)).collect();
        let a = grid_entropy(&points, &GridSpec { width_o: w.0, width_s: w.1, origin: Some(origin) }).unwrap();
        let b = grid_entropy(&moved, &GridSpec { width_o: w.0, width_s: w.1, origin: Some((origin.0 + t.0, origin.1 + t.1)) }).unwrap();
        prop_assert_eq!(a.entropy_bits, b.entropy_bits);
    }
}

/// Clustered submissions: each device enrolls once and some submit a second
/// time with a small perturbation. Few user agents, so fusion is non-trivial.
fn random_submissions(seed: u64, devices: usize, agents: u64, noise: f64) -> Vec<Submission> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut subs = Vec::new();
    for d in 0..devices as u64 {
        let o_z = rng.uniform(-0.5, 0.5);
        let s_z = rng.uniform(0.99, 1.04);
        let ua = format!("ua-{}", rng.below(agents));
        let repeats = if d == 0 { 2 } else { 1 + rng.below(2) };
        for k in 0..repeats {
            subs.push(Submission {
                cookie_id: CookieId(d),
                user_agent: ua.clone(),
                fingerprint: ZAxisFingerprint {
                    o_z: o_z + rng.normal(0.0, noise),
                    s_z: s_z + rng.normal(0.0, noise / 10.0),
                },
                timestamp: 100 * d + k,
            });
        }
    }
    subs
}

proptest! {
    #[test]
    fn fusion_never_lowers_recognition(seed in any::<u64>(), devices in 2usize..60, agents in 1u64..6, noise in 0.0f64..0.1) {
        let subs = random_submissions(seed, devices, agents, noise);
        let cfg = ScaledDistanceConfig::default();
        for filter in [None, Some(95.0)] {
            let plain = recognition_rate(&subs, &cfg, filter).unwrap();
            let fused = ua_fused_recognition(&subs, &cfg, filter).unwrap();
            prop_assert_eq!(plain.evaluated, fused.evaluated);
            prop_assert!(fused.correct >= plain.correct);
        }
    }

    #[test]
    fn full_percentile_filter_is_no_filter(seed in any::<u64>(), devices in 2usize..60, noise in 0.0f64..0.1) {
        let subs = random_submissions(seed, devices, 3, noise);
        let cfg = ScaledDistanceConfig::default();
        prop_assert_eq!(recognition_rate(&subs, &cfg, Some(100.0)).unwrap(), recognition_rate(&subs, &cfg, None).unwrap());
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn closed_form_error_shrinks_with_window_length() {
    let pop = sample_population(
        50,
        &PopulationRanges {
            noise: NoiseSpec { accel_sigma: 0.05, ..NoiseSpec::NONE },
            ..PopulationRanges::default()
        },
        3,
    )
    .unwrap();
    let error = |samples: usize| {
        let spec = StreamSpec { duration: samples as f64 / 100.0, rate: 100.0 };
        let errs: Vec<f64> = pop
            .iter()
            .map(|d| {
                let est = z_axis_from_stream(&face_pair(d, &spec, 4), &RestDetection::default()).unwrap();
                (est.o_z - d.accel.o_z).abs().max((est.s_z - d.accel.s_z).abs())
            })
            .collect();
        median(errs)
    };
    let (short, long) = (error(100), error(10_000));
    assert!(long < short, "n=100: {short}, n=10000: {long}");
}

#[test]
fn identical_inputs_give_identical_kfold() {
    let pop = sample_population(6, &PopulationRanges::default(), 8).unwrap();
    let mut rng = SimRng::seed_from_u64(9);
    let labeled: Vec<(Vec<f64>, u32)> = pop
        .iter()
        .flat_map(|d| {
            let base = vec![d.audio.h2, d.audio.h3];
            (0..5).map(move |_| base.clone()).collect::<Vec<_>>()
        })
        .enumerate()
        .map(|(i, v)| (v.iter().map(|x| x + rng.normal(0.0, 0.002)).collect(), (i / 5) as u32))
        .collect();
    let a = kfold_accuracy(&labeled, 5, FoldClassifier::Knn { k: 1 }, 1).unwrap();
    let b = kfold_accuracy(&labeled, 5, FoldClassifier::Knn { k: 1 }, 1).unwrap();
    assert_eq!(a, b);
    let mut by_device: BTreeMap<u32, usize> = BTreeMap::new();
    for (_, l) in &labeled {
        *by_device.entry(*l).or_default() += 1;
    }
    assert!(by_device.values().all(|&c| c == 5));
}
