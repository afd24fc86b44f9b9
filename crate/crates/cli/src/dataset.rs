//! JSON Lines dataset files.
//!
//! One record per line, tagged by a `kind` field: `device`, `recording`,
//! `audio_fingerprint`, `submission` or `six_param`. Fingerprint values are
//! written as decimal strings (shortest round-trip form) so a store/load
//! cycle reproduces them bit for bit. Records are written grouped by kind
//! in that order; loading accepts any order.

use std::collections::BTreeSet;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sensorprint::{
    AudioFingerprint, CookieId, DeviceId, DeviceProfile, HarmonicResponse, Submission,
    ZAxisFingerprint,
};

use crate::error::{CliError, Result};

mod decimal {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:?}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        text.trim()
            .parse()
            .map_err(|_| D::Error::custom(format!("expected a decimal number string, found {text:?}")))
    }
}

/// Metadata of one simulated capture; the samples themselves are not kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingMeta {
    pub device_id: DeviceId,
    pub location: usize,
    pub run: usize,
    pub tones_hz: Vec<f64>,
    pub amplitude: f64,
    pub sample_rate: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioMethod {
    Sweep,
    Stealth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseValue {
    pub freq_hz: f64,
    pub harmonic: u32,
    #[serde(with = "decimal")]
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AudioFingerprintRecord {
    pub device_id: DeviceId,
    pub location: usize,
    pub run: usize,
    pub method: AudioMethod,
    pub entries: Vec<ResponseValue>,
}

impl AudioFingerprintRecord {
    pub fn new(device_id: DeviceId, location: usize, run: usize, method: AudioMethod, fp: &AudioFingerprint) -> Self {
        let entries = fp
            .entries
            .iter()
            .map(|e| ResponseValue {
                freq_hz: e.freq_hz,
                harmonic: e.harmonic,
                ratio: e.ratio,
            })
            .collect();
        Self {
            device_id,
            location,
            run,
            method,
            entries,
        }
    }

    pub fn fingerprint(&self) -> AudioFingerprint {
        AudioFingerprint {
            entries: self
                .entries
                .iter()
                .map(|e| HarmonicResponse {
                    freq_hz: e.freq_hz,
                    harmonic: e.harmonic,
                    ratio: e.ratio,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmissionRecord {
    pub device_id: DeviceId,
    pub cookie_id: CookieId,
    pub user_agent: String,
    #[serde(with = "decimal")]
    pub o_z: f64,
    #[serde(with = "decimal")]
    pub s_z: f64,
    pub timestamp: u64,
}

impl SubmissionRecord {
    pub fn new(device_id: DeviceId, sub: &Submission) -> Self {
        Self {
            device_id,
            cookie_id: sub.cookie_id,
            user_agent: sub.user_agent.clone(),
            o_z: sub.fingerprint.o_z,
            s_z: sub.fingerprint.s_z,
            timestamp: sub.timestamp,
        }
    }

    pub fn submission(&self) -> Submission {
        Submission {
            cookie_id: self.cookie_id,
            user_agent: self.user_agent.clone(),
            fingerprint: ZAxisFingerprint {
                o_z: self.o_z,
                s_z: self.s_z,
            },
            timestamp: self.timestamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SixParamRecord {
    pub device_id: DeviceId,
    pub sample: usize,
    #[serde(with = "decimal")]
    pub o_x: f64,
    #[serde(with = "decimal")]
    pub o_y: f64,
    #[serde(with = "decimal")]
    pub o_z: f64,
    #[serde(with = "decimal")]
    pub s_x: f64,
    #[serde(with = "decimal")]
    pub s_y: f64,
    #[serde(with = "decimal")]
    pub s_z: f64,
    #[serde(with = "decimal")]
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SixParamRecord {
    pub fn vector(&self) -> Vec<f64> {
        vec![self.o_x, self.o_y, self.o_z, self.s_x, self.s_y, self.s_z]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub devices: Vec<DeviceProfile>,
    pub recordings: Vec<RecordingMeta>,
    pub audio_fingerprints: Vec<AudioFingerprintRecord>,
    pub submissions: Vec<SubmissionRecord>,
    pub six_param: Vec<SixParamRecord>,
}

#[derive(Serialize)]
struct Tagged<'a, T> {
    kind: &'static str,
    #[serde(flatten)]
    record: &'a T,
}

fn push_line<T: Serialize>(out: &mut String, kind: &'static str, record: &T) {
    let line = serde_json::to_string(&Tagged { kind, record }).expect("records always serialize");
    out.push_str(&line);
    out.push('\n');
}

impl Dataset {
    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
            && self.recordings.is_empty()
            && self.audio_fingerprints.is_empty()
            && self.submissions.is_empty()
            && self.six_param.is_empty()
    }

    /// Canonical JSONL text.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.devices {
            push_line(&mut out, "device", r);
        }
        for r in &self.recordings {
            push_line(&mut out, "recording", r);
        }
        for r in &self.audio_fingerprints {
            push_line(&mut out, "audio_fingerprint", r);
        }
        for r in &self.submissions {
            push_line(&mut out, "submission", r);
        }
        for r in &self.six_param {
            push_line(&mut out, "six_param", r);
        }
        out
    }

    /// Parses JSONL text; `origin` only labels error messages.
    pub fn from_jsonl(text: &str, origin: &Path) -> Result<Self> {
        let mut ds = Dataset::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fail = |field: &str, message: String| CliError::Record {
                path: origin.to_path_buf(),
                line: i + 1,
                field: field.to_string(),
                message,
            };
            let value: serde_json::Value = serde_json::from_str(line).map_err(|e| fail("(line)", e.to_string()))?;
            let serde_json::Value::Object(mut map) = value else {
                return Err(fail("(line)", "expected a JSON object".into()));
            };
            let kind = match map.remove("kind") {
                Some(serde_json::Value::String(k)) => k,
                Some(_) => return Err(fail("kind", "expected a string".into())),
                None => return Err(fail("kind", "missing record kind".into())),
            };
            let body = serde_json::Value::Object(map);
            match kind.as_str() {
                "device" => ds.devices.push(parse(body, &fail)?),
                "recording" => ds.recordings.push(parse(body, &fail)?),
                "audio_fingerprint" => ds.audio_fingerprints.push(parse(body, &fail)?),
                "submission" => ds.submissions.push(parse(body, &fail)?),
                "six_param" => ds.six_param.push(parse(body, &fail)?),
                other => return Err(fail("kind", format!("unknown record kind {other:?}"))),
            }
        }
        Ok(ds)
    }

    /// Device ids are unique and every other record names a known device.
    pub fn check_integrity(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for d in &self.devices {
            if !ids.insert(d.device_id) {
                return Err(CliError::Integrity(format!("duplicate device {}", d.device_id)));
            }
        }
        let refs = self
            .recordings
            .iter()
            .map(|r| ("recording", r.device_id))
            .chain(self.audio_fingerprints.iter().map(|r| ("audio_fingerprint", r.device_id)))
            .chain(self.submissions.iter().map(|r| ("submission", r.device_id)))
            .chain(self.six_param.iter().map(|r| ("six_param", r.device_id)));
        for (kind, id) in refs {
            if !ids.contains(&id) {
                return Err(CliError::Integrity(format!("{kind} record references unknown device {id}")));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let ds = Self::from_jsonl(&text, path)?;
        ds.check_integrity()?;
        Ok(ds)
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        self.check_integrity()?;
        std::fs::write(path, self.to_jsonl()).map_err(|e| CliError::io(path, e))
    }
}

fn parse<T: DeserializeOwned>(body: serde_json::Value, fail: &dyn Fn(&str, String) -> CliError) -> Result<T> {
    serde_path_to_error::deserialize(body).map_err(|e| {
        let field = e.path().to_string();
        fail(&field, e.into_inner().to_string())
    })
}
