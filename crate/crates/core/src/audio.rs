//! Probe tones and harmonic response extraction.
//!
//! A recording is reduced to per-harmonic amplitudes by projecting it onto
//! sampled cosine and sine references at `j * f`. The projection is scaled
//! by `2 / N` so a unit-amplitude sinusoid spanning an integer number of
//! cycles yields exactly 1. Dividing by the played amplitude gives the
//! feedback ratio of the speaker/microphone loop.
//!
//! The stealth variant plays several non-harmonic tones at once and reads
//! the second and third harmonic of each from a single spectrum.

use std::f64::consts::TAU;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::device::{Recording, DEFAULT_SAMPLE_RATE};
use crate::error::{invalid, Error, Result};

/// Probe frequencies of the standard seven-tone sweep, Hz.
pub const TABLE2_FREQUENCIES: [f64; 7] = [220.0, 330.0, 440.0, 550.0, 660.0, 880.0, 1320.0];

/// Default simultaneous base tones for the stealth measurement, Hz.
pub const DEFAULT_STEALTH_BASES: [f64; 3] = [460.0, 740.0, 1060.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyPlan {
    pub sample_rate: f64,
    pub frequencies: Vec<f64>,
    pub harmonics: Vec<u32>,
}

impl FrequencyPlan {
    /// Seven tones from 220 Hz to 1320 Hz, first and second harmonic.
    pub fn standard() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            frequencies: TABLE2_FREQUENCIES.to_vec(),
            harmonics: vec![1, 2],
        }
    }

    /// Thirteen tones, 100 Hz to 1300 Hz in 100 Hz steps.
    pub fn thirteen_tone() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            frequencies: (1..=13).map(|k| k as f64 * 100.0).collect(),
            harmonics: vec![1, 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.is_empty() {
            return Err(Error::Empty("frequency plan"));
        }
        if self.harmonics.is_empty() || self.harmonics.contains(&0) {
            return Err(invalid("harmonics", "need at least one harmonic index, all >= 1"));
        }
        let nyquist = self.sample_rate / 2.0;
        for (i, &f) in self.frequencies.iter().enumerate() {
            if !(f > 0.0) || !f.is_finite() {
                return Err(invalid("frequencies", format!("{f} Hz is not positive")));
            }
            if self.frequencies[..i].contains(&f) {
                return Err(invalid("frequencies", format!("{f} Hz listed twice")));
            }
        }
        let max_f = self.frequencies.iter().cloned().fold(0.0, f64::max);
        let max_j = *self.harmonics.iter().max().unwrap() as f64;
        if max_f * max_j >= nyquist {
            return Err(Error::AboveNyquist {
                freq: max_f * max_j,
                nyquist,
            });
        }
        Ok(())
    }
}

/// Cosine and sine references at `harmonic * freq` over one window.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureBasis {
    pub freq: f64,
    pub harmonic: u32,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl QuadratureBasis {
    pub fn new(freq: f64, harmonic: u32, sample_rate: f64, len: usize) -> Result<Self> {
        if harmonic == 0 {
            return Err(invalid("harmonic", "must be >= 1"));
        }
        if len == 0 {
            return Err(Error::Empty("recording"));
        }
        let target = freq * harmonic as f64;
        let nyquist = sample_rate / 2.0;
        if !(target > 0.0) || target >= nyquist {
            return Err(Error::AboveNyquist {
                freq: target,
                nyquist,
            });
        }
        if (len as f64) < sample_rate / target {
            return Err(Error::WindowTooShort { len, freq: target });
        }
        let step = target / sample_rate;
        let (sin, cos) = (0..len)
            .map(|n| {
                let cycles = step * n as f64;
                (TAU * (cycles - cycles.floor())).sin_cos()
            })
            .unzip();
        Ok(Self {
            freq,
            harmonic,
            cos,
            sin,
        })
    }

    /// `(2/N) * sqrt((C.R)^2 + (S.R)^2)`.
    pub fn response(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.cos.len() {
            return Err(Error::LengthMismatch {
                expected: self.cos.len(),
                actual: samples.len(),
            });
        }
        let (mut c, mut s) = (0.0, 0.0);
        for ((&x, &cr), &sr) in samples.iter().zip(&self.cos).zip(&self.sin) {
            c += x * cr;
            s += x * sr;
        }
        Ok(2.0 / samples.len() as f64 * c.hypot(s))
    }
}

/// Amplitude of the `harmonic * freq` component of a recording.
pub fn quadrature_response(rec: &Recording, freq: f64, harmonic: u32) -> Result<f64> {
    if rec.samples.is_empty() {
        return Err(Error::Empty("recording"));
    }
    QuadratureBasis::new(freq, harmonic, rec.sample_rate, rec.samples.len())?.response(&rec.samples)
}

/// `amplitude * sin(2 pi freq t / sample_rate)` for `t` in `0..duration*sample_rate`.
pub fn synthesize_tone(freq: f64, amplitude: f64, duration: f64, sample_rate: f64) -> Result<Recording> {
    let nyquist = sample_rate / 2.0;
    if !(freq > 0.0) || freq >= nyquist {
        return Err(Error::AboveNyquist { freq, nyquist });
    }
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(invalid("duration", "must be positive"));
    }
    let len = (duration * sample_rate).round() as usize;
    let step = freq / sample_rate;
    let samples = (0..len)
        .map(|n| {
            let cycles = step * n as f64;
            amplitude * (TAU * (cycles - cycles.floor())).sin()
        })
        .collect();
    Ok(Recording {
        sample_rate,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicResponse {
    pub freq_hz: f64,
    pub harmonic: u32,
    /// Recorded amplitude over played amplitude.
    pub ratio: f64,
}

/// Harmonic feedback ratios keyed by `(frequency, harmonic)`, in plan order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AudioFingerprint {
    pub entries: Vec<HarmonicResponse>,
}

impl AudioFingerprint {
    pub fn get(&self, freq: f64, harmonic: u32) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.freq_hz == freq && e.harmonic == harmonic)
            .map(|e| e.ratio)
    }

    /// Distinct probe frequencies in insertion order.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.freq_hz) {
                out.push(e.freq_hz);
            }
        }
        out
    }

    /// Ratios of one harmonic across all probe frequencies, in order.
    pub fn harmonic_values(&self, harmonic: u32) -> Result<Vec<f64>> {
        self.frequencies()
            .into_iter()
            .map(|f| {
                self.get(f, harmonic)
                    .ok_or(Error::MissingHarmonic { freq: f, harmonic })
            })
            .collect()
    }

    /// Every ratio in entry order.
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.ratio).collect()
    }

    pub fn keys(&self) -> Vec<(f64, u32)> {
        self.entries.iter().map(|e| (e.freq_hz, e.harmonic)).collect()
    }
}

/// Precomputed references for every `(frequency, harmonic)` of a plan at a
/// fixed window length, reusable across many sweeps.
#[derive(Debug, Clone)]
pub struct SweepAnalyzer {
    plan: FrequencyPlan,
    bases: Vec<Vec<QuadratureBasis>>,
}

impl SweepAnalyzer {
    pub fn new(plan: &FrequencyPlan, window_len: usize) -> Result<Self> {
        plan.validate()?;
        let bases = plan
            .frequencies
            .iter()
            .map(|&f| {
                plan.harmonics
                    .iter()
                    .map(|&j| QuadratureBasis::new(f, j, plan.sample_rate, window_len))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            plan: plan.clone(),
            bases,
        })
    }

    pub fn plan(&self) -> &FrequencyPlan {
        &self.plan
    }

    /// Plays each plan frequency through `measure` and extracts the ratios.
    pub fn sweep<F>(&self, mut measure: F, played_amplitude: f64) -> Result<AudioFingerprint>
    where
        F: FnMut(f64, f64) -> Result<Recording>,
    {
        if !(played_amplitude != 0.0) || !played_amplitude.is_finite() {
            return Err(invalid("played_amplitude", "must be finite and non-zero"));
        }
        let mut entries = Vec::with_capacity(self.plan.frequencies.len() * self.plan.harmonics.len());
        for (&f, bases) in self.plan.frequencies.iter().zip(&self.bases) {
            let rec = measure(f, played_amplitude)?;
            if rec.sample_rate != self.plan.sample_rate {
                return Err(invalid("recording", "sample rate differs from the plan"));
            }
            for basis in bases {
                entries.push(HarmonicResponse {
                    freq_hz: f,
                    harmonic: basis.harmonic,
                    ratio: basis.response(&rec.samples)? / played_amplitude.abs(),
                });
            }
        }
        Ok(AudioFingerprint { entries })
    }
}

/// Measures the feedback ratio at every `(frequency, harmonic)` of `plan`.
/// `measure(freq, amplitude)` plays one tone and returns the analysis window.
pub fn sweep_fingerprint<F>(measure: F, plan: &FrequencyPlan, played_amplitude: f64) -> Result<AudioFingerprint>
where
    F: FnMut(f64, f64) -> Result<Recording>,
{
    plan.validate()?;
    // The window length is only known once the first recording arrives.
    let mut measure = measure;
    let first = measure(plan.frequencies[0], played_amplitude)?;
    let analyzer = SweepAnalyzer::new(plan, first.samples.len())?;
    let mut pending = Some(first);
    analyzer.sweep(
        |f, a| match pending.take() {
            Some(rec) => Ok(rec),
            None => measure(f, a),
        },
        played_amplitude,
    )
}

fn harmonically_related(a: f64, b: f64) -> bool {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let ratio = hi / lo;
    (ratio - ratio.round()).abs() < 1e-9 * ratio
}

/// Second- and third-harmonic ratios of simultaneously played base tones,
/// read from one magnitude spectrum (rectangular window, nearest bin,
/// scaled by `2/N` and divided by the per-tone played amplitude).
pub fn stealth_fingerprint(rec: &Recording, base_freqs: &[f64], played_amplitude: f64) -> Result<AudioFingerprint> {
    if rec.samples.is_empty() {
        return Err(Error::Empty("recording"));
    }
    if base_freqs.is_empty() {
        return Err(Error::Empty("base frequencies"));
    }
    if !(played_amplitude != 0.0) || !played_amplitude.is_finite() {
        return Err(invalid("played_amplitude", "must be finite and non-zero"));
    }
    let nyquist = rec.nyquist();
    for (i, &f) in base_freqs.iter().enumerate() {
        if !(f > 0.0) || 3.0 * f >= nyquist {
            return Err(Error::AboveNyquist { freq: 3.0 * f, nyquist });
        }
        for &other in &base_freqs[..i] {
            if harmonically_related(f, other) {
                return Err(Error::HarmonicBaseFrequencies { a: other, b: f });
            }
        }
    }

    let n = rec.samples.len();
    let bin_of = |freq: f64| (freq * n as f64 / rec.sample_rate).round() as usize;
    // Every fundamental and extracted harmonic must land in its own bin.
    let mut occupied: Vec<(usize, f64, f64)> = Vec::new();
    for &f in base_freqs {
        for k in 1..=3u32 {
            let bin = bin_of(f * k as f64);
            if let Some(&(_, other, _)) = occupied.iter().find(|(b, _, _)| *b == bin) {
                return Err(Error::HarmonicBaseFrequencies { a: other, b: f });
            }
            occupied.push((bin, f, k as f64));
        }
    }

    let mut buffer: Vec<Complex<f64>> = rec.samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
    let scale = 2.0 / n as f64 / played_amplitude.abs();
    let entries = base_freqs
        .iter()
        .flat_map(|&f| {
            [2u32, 3].map(|j| HarmonicResponse {
                freq_hz: f,
                harmonic: j,
                ratio: buffer[bin_of(f * j as f64)].norm() * scale,
            })
        })
        .collect();
    Ok(AudioFingerprint { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{
        simulate_audio_measurement, simulate_multitone, CaptureSpec, DeviceId, DeviceProfile,
        LocationEffect, ResponseCurve,
    };

    /// Single-bin DFT by direct summation, independent of the FFT path.
    fn dft_amplitude(samples: &[f64], sample_rate: f64, freq: f64) -> f64 {
        let n = samples.len();
        let k = (freq * n as f64 / sample_rate).round();
        let (mut re, mut im) = (0.0, 0.0);
        for (t, &x) in samples.iter().enumerate() {
            let phase = TAU * ((k * t as f64) % n as f64) / n as f64;
            re += x * phase.cos();
            im -= x * phase.sin();
        }
        2.0 * re.hypot(im) / n as f64
    }

    #[test]
    fn tone_length_and_phase() {
        let rec = synthesize_tone(220.0, 1.0, 1.0, 8000.0).unwrap();
        assert_eq!(rec.samples.len(), 8000);
        assert_eq!(rec.samples[0], 0.0);
        let silent = synthesize_tone(220.0, 0.0, 1.0, 8000.0).unwrap();
        assert!(silent.samples.iter().all(|&x| x == 0.0));
        assert!(matches!(
            synthesize_tone(4000.0, 1.0, 1.0, 8000.0),
            Err(Error::AboveNyquist { .. })
        ));
    }

    #[test]
    fn unit_tone_has_unit_response() {
        let rec = synthesize_tone(440.0, 1.0, 1.0, 8000.0).unwrap();
        let r = quadrature_response(&rec, 440.0, 1).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_signal_zero_response() {
        let rec = Recording {
            sample_rate: 8000.0,
            samples: vec![0.0; 8000],
        };
        assert_eq!(quadrature_response(&rec, 440.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_tone_leaks_nothing() {
        let rec = synthesize_tone(550.0, 1.0, 1.0, 8000.0).unwrap();
        assert!(quadrature_response(&rec, 440.0, 1).unwrap() <= 1e-9);
    }

    #[test]
    fn scaling_is_absolute() {
        let rec = synthesize_tone(330.0, 1.0, 1.0, 8000.0).unwrap();
        let neg = Recording {
            sample_rate: 8000.0,
            samples: rec.samples.iter().map(|x| -2.5 * x).collect(),
        };
        let r = quadrature_response(&rec, 330.0, 1).unwrap();
        let rn = quadrature_response(&neg, 330.0, 1).unwrap();
        assert!((rn - 2.5 * r).abs() < 1e-12);
    }

    #[test]
    fn extraction_errors() {
        let empty = Recording {
            sample_rate: 8000.0,
            samples: vec![],
        };
        assert!(matches!(quadrature_response(&empty, 440.0, 1), Err(Error::Empty(_))));
        let short = Recording {
            sample_rate: 8000.0,
            samples: vec![0.0; 10],
        };
        assert!(matches!(
            quadrature_response(&short, 100.0, 1),
            Err(Error::WindowTooShort { .. })
        ));
        let rec = synthesize_tone(440.0, 1.0, 1.0, 8000.0).unwrap();
        assert!(matches!(
            quadrature_response(&rec, 2200.0, 2),
            Err(Error::AboveNyquist { .. })
        ));
    }

    #[test]
    fn plans_validate() {
        FrequencyPlan::standard().validate().unwrap();
        FrequencyPlan::thirteen_tone().validate().unwrap();
        let mut p = FrequencyPlan::standard();
        p.harmonics = vec![1, 2, 4];
        assert!(p.validate().is_err());
        let mut p = FrequencyPlan::standard();
        p.frequencies.push(220.0);
        assert!(p.validate().is_err());
    }

    fn ideal_measure(
        dev: &DeviceProfile,
    ) -> impl FnMut(f64, f64) -> Result<Recording> + '_ {
        move |f, a| simulate_audio_measurement(dev, &LocationEffect::default(), f, a, &CaptureSpec::app_protocol(), 0)
    }

    #[test]
    fn flat_device_sweep() {
        let dev = DeviceProfile::ideal(DeviceId(0));
        let fp = sweep_fingerprint(ideal_measure(&dev), &FrequencyPlan::standard(), 0.5).unwrap();
        assert_eq!(fp.entries.len(), 14);
        for e in &fp.entries {
            let expected = if e.harmonic == 1 { 1.0 } else { 0.0 };
            assert!((e.ratio - expected).abs() < 1e-9, "{e:?}");
        }
        assert_eq!(fp.harmonic_values(1).unwrap().len(), 7);
    }

    #[test]
    fn thirteen_tone_sweep_shape() {
        let mut dev = DeviceProfile::ideal(DeviceId(0));
        dev.audio.h2 = 0.05;
        let fp = sweep_fingerprint(ideal_measure(&dev), &FrequencyPlan::thirteen_tone(), 1.0).unwrap();
        assert_eq!(fp.harmonic_values(1).unwrap().len(), 13);
        assert_eq!(fp.harmonic_values(2).unwrap().len(), 13);
        let plan = FrequencyPlan::thirteen_tone();
        let expected: Vec<(f64, u32)> = plan
            .frequencies
            .iter()
            .flat_map(|&f| plan.harmonics.iter().map(move |&j| (f, j)))
            .collect();
        assert_eq!(fp.keys(), expected);
    }

    #[test]
    fn stealth_zero_signal() {
        let rec = Recording {
            sample_rate: 8000.0,
            samples: vec![0.0; 8000],
        };
        let fp = stealth_fingerprint(&rec, &DEFAULT_STEALTH_BASES, 1.0).unwrap();
        assert_eq!(fp.entries.len(), 6);
        assert!(fp.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stealth_single_tone_matches_dft_oracle() {
        let mut dev = DeviceProfile::ideal(DeviceId(0));
        dev.audio.h2 = 0.1;
        let rec = simulate_audio_measurement(
            &dev,
            &LocationEffect::default(),
            500.0,
            1.0,
            &CaptureSpec::window(1.0),
            0,
        )
        .unwrap();
        let fp = stealth_fingerprint(&rec, &[500.0], 1.0).unwrap();
        let fundamental = dft_amplitude(&rec.samples, 8000.0, 500.0);
        let second = dft_amplitude(&rec.samples, 8000.0, 1000.0);
        assert!((fundamental - 1.0).abs() < 1e-9);
        assert!((second - 0.1).abs() < 1e-9);
        assert!((fp.get(500.0, 2).unwrap() - second).abs() < 1e-9);
        assert!(fp.get(500.0, 3).unwrap() < 1e-9);
    }

    #[test]
    fn stealth_rejects_harmonic_bases() {
        let rec = synthesize_tone(300.0, 1.0, 1.0, 8000.0).unwrap();
        assert!(matches!(
            stealth_fingerprint(&rec, &[300.0, 600.0], 1.0),
            Err(Error::HarmonicBaseFrequencies { .. })
        ));
        // 2 * 300 == 3 * 200: distinct bases whose products share a bin.
        assert!(matches!(
            stealth_fingerprint(&rec, &[200.0, 300.0], 1.0),
            Err(Error::HarmonicBaseFrequencies { .. })
        ));
    }

    #[test]
    fn stealth_matches_separate_sweeps() {
        let mut dev = DeviceProfile::ideal(DeviceId(4));
        dev.audio.h2 = 0.06;
        dev.audio.h3 = 0.03;
        dev.audio.gain_db = ResponseCurve::new(vec![0.0, 4000.0], vec![-1.5, 1.8]).unwrap();
        let loc = LocationEffect::default();
        let cap = CaptureSpec::window(1.0);
        let rec = simulate_multitone(&dev, &loc, &DEFAULT_STEALTH_BASES, 0.3, &cap, 1).unwrap();
        let stealth = stealth_fingerprint(&rec, &DEFAULT_STEALTH_BASES, 0.3).unwrap();
        let plan = FrequencyPlan {
            sample_rate: 8000.0,
            frequencies: DEFAULT_STEALTH_BASES.to_vec(),
            harmonics: vec![2, 3],
        };
        let sweep = sweep_fingerprint(
            |f, a| simulate_audio_measurement(&dev, &loc, f, a, &cap, 1),
            &plan,
            0.3,
        )
        .unwrap();
        assert_eq!(stealth.keys(), sweep.keys());
        for (a, b) in stealth.values().iter().zip(sweep.values()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}
