//! Identification power of Z-axis accelerometer fingerprints.
//!
//! Submissions are grouped by browser cookie. Devices with exactly two
//! submissions give the intra-device scatter; its 95th percentiles size the
//! cells of a 2-D grid whose occupancy distribution yields the Shannon
//! entropy of the population. The recognition protocols ask whether a
//! device's second submission lands closest to its own first one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::accel::ZAxisFingerprint;
use crate::classify::{scaled_accel_distance, ScaledDistanceConfig};
use crate::error::{invalid, Error, Result};

/// Paper-scale 95th-percentile intra-device distance along O_z, m/s².
pub const DEFAULT_CELL_O: f64 = 0.045;
/// Paper-scale 95th-percentile intra-device distance along S_z.
pub const DEFAULT_CELL_S: f64 = 0.0037;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CookieId(pub u64);

impl std::fmt::Display for CookieId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// One fingerprint observation as received from a browser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub cookie_id: CookieId,
    pub user_agent: String,
    pub fingerprint: ZAxisFingerprint,
    /// Seconds since an arbitrary epoch.
    pub timestamp: u64,
}

/// Submission indices per cookie, each list ordered by timestamp.
fn by_cookie(subs: &[Submission]) -> BTreeMap<CookieId, Vec<usize>> {
    let mut groups: BTreeMap<CookieId, Vec<usize>> = BTreeMap::new();
    for (i, s) in subs.iter().enumerate() {
        groups.entry(s.cookie_id).or_default().push(i);
    }
    for idx in groups.values_mut() {
        idx.sort_by_key(|&i| (subs[i].timestamp, i));
    }
    groups
}

/// `|dO_z|` and `|dS_z|` between the two submissions of every
/// two-submission device, in cookie order.
pub fn intra_device_distances(subs: &[Submission]) -> (Vec<f64>, Vec<f64>) {
    by_cookie(subs)
        .values()
        .filter(|idx| idx.len() == 2)
        .map(|idx| {
            let (a, b) = (&subs[idx[0]].fingerprint, &subs[idx[1]].fingerprint);
            ((b.o_z - a.o_z).abs(), (b.s_z - a.s_z).abs())
        })
        .unzip()
}

/// Nearest-rank percentile: the `ceil(p/100 * n)`-th smallest value.
pub fn percentile_nearest_rank(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("percentile input"));
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(invalid("percentile", format!("{p} outside (0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p * sorted.len() as f64) / 100.0).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Cell width along O_z, m/s².
    pub width_o: f64,
    /// Cell width along S_z.
    pub width_s: f64,
    /// Grid origin `(o_z, s_z)`; the component-wise minimum of the points
    /// when absent.
    #[serde(default)]
    pub origin: Option<(f64, f64)>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            width_o: DEFAULT_CELL_O,
            width_s: DEFAULT_CELL_S,
            origin: None,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.width_o > 0.0) || !(self.width_s > 0.0) || !self.width_o.is_finite() || !self.width_s.is_finite() {
            return Err(invalid("grid", "cell widths must be positive"));
        }
        Ok(())
    }

    pub fn cell(&self, origin: (f64, f64), point: (f64, f64)) -> (i64, i64) {
        (
            ((point.0 - origin.0) / self.width_o).floor() as i64,
            ((point.1 - origin.1) / self.width_s).floor() as i64,
        )
    }
}

fn component_min(points: &[(f64, f64)]) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::INFINITY), |(a, b), &(o, s)| (a.min(o), b.min(s)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellCount {
    pub x: i64,
    pub y: i64,
    pub count: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntropyReport {
    /// Non-empty cells in index order.
    pub cells: Vec<CellCount>,
    pub total: usize,
    pub origin: (f64, f64),
    /// Shannon entropy of the cell distribution, bits.
    pub entropy_bits: f64,
}

impl GridEntropyReport {
    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }
}

/// Bins `(o_z, s_z)` points on the grid and returns
/// `H = -sum P_xy log2 P_xy` with `P_xy = C_xy / sum C`.
pub fn grid_entropy(points: &[(f64, f64)], grid: &GridSpec) -> Result<GridEntropyReport> {
    if points.is_empty() {
        return Err(Error::Empty("point set"));
    }
    grid.validate()?;
    let origin = grid.origin.unwrap_or_else(|| component_min(points));
    let mut counts: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for &p in points {
        *counts.entry(grid.cell(origin, p)).or_default() += 1;
    }
    let total = points.len() as f64;
    let mut entropy_bits = 0.0;
    let cells = counts
        .into_iter()
        .map(|((x, y), count)| {
            let probability = count as f64 / total;
            entropy_bits -= probability * probability.log2();
            CellCount {
                x,
                y,
                count,
                probability,
            }
        })
        .collect();
    Ok(GridEntropyReport {
        cells,
        total: points.len(),
        origin,
        entropy_bits: entropy_bits.max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginSensitivity {
    pub min_bits: f64,
    pub max_bits: f64,
}

impl OriginSensitivity {
    pub fn spread(&self) -> f64 {
        self.max_bits - self.min_bits
    }
}

/// Entropy extremes over grid origins shifted from the component-wise
/// minimum by every pair of fractional offsets `(d_o, d_s)`, each in cell
/// widths.
pub fn origin_sensitivity(points: &[(f64, f64)], width_o: f64, width_s: f64, offsets: &[f64]) -> Result<OriginSensitivity> {
    if points.is_empty() {
        return Err(Error::Empty("point set"));
    }
    if offsets.is_empty() {
        return Err(Error::Empty("origin offsets"));
    }
    if offsets.iter().any(|d| !(d.abs() <= 1.0)) {
        return Err(invalid("offsets", "must lie within one cell width"));
    }
    let base = component_min(points);
    let mut min_bits = f64::INFINITY;
    let mut max_bits = f64::NEG_INFINITY;
    for &d_o in offsets {
        for &d_s in offsets {
            let grid = GridSpec {
                width_o,
                width_s,
                origin: Some((base.0 - d_o * width_o, base.1 - d_s * width_s)),
            };
            let h = grid_entropy(points, &grid)?.entropy_bits;
            min_bits = min_bits.min(h);
            max_bits = max_bits.max(h);
        }
    }
    Ok(OriginSensitivity { min_bits, max_bits })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecognitionOutcome {
    pub correct: usize,
    pub evaluated: usize,
}

impl RecognitionOutcome {
    pub fn rate(&self) -> f64 {
        if self.evaluated == 0 {
            0.0
        } else {
            self.correct as f64 / self.evaluated as f64
        }
    }
}

fn recognize(
    subs: &[Submission],
    cfg: &ScaledDistanceConfig,
    filter_percentile: Option<f64>,
    fuse_user_agent: bool,
) -> Result<RecognitionOutcome> {
    let groups = by_cookie(subs);
    let mut pairs: Vec<(CookieId, usize, usize)> = groups
        .iter()
        .filter(|(_, idx)| idx.len() == 2)
        .map(|(&c, idx)| (c, idx[0], idx[1]))
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoTwoSubmissionDevices);
    }

    let mut active = vec![true; subs.len()];
    if let Some(p) = filter_percentile {
        let (d_o, d_s) = intra_device_distances(subs);
        let limit_o = percentile_nearest_rank(&d_o, p)?;
        let limit_s = percentile_nearest_rank(&d_s, p)?;
        pairs.retain(|&(_, first, second)| {
            let (a, b) = (&subs[first].fingerprint, &subs[second].fingerprint);
            let keep = (b.o_z - a.o_z).abs() <= limit_o && (b.s_z - a.s_z).abs() <= limit_s;
            if !keep {
                active[first] = false;
                active[second] = false;
            }
            keep
        });
    }

    let mut correct = 0;
    for &(_, first, probe) in &pairs {
        let target = &subs[probe];
        let mut best: Option<(f64, CookieId, usize)> = None;
        for (i, cand) in subs.iter().enumerate() {
            if i == probe || !active[i] {
                continue;
            }
            if fuse_user_agent && cand.user_agent != target.user_agent {
                continue;
            }
            let d = scaled_accel_distance(&target.fingerprint, &cand.fingerprint, cfg);
            let key = (d, cand.cookie_id, i);
            let better = match best {
                None => true,
                Some(b) => key.0.total_cmp(&b.0).then(key.1.cmp(&b.1)).then(key.2.cmp(&b.2)).is_lt(),
            };
            if better {
                best = Some(key);
            }
        }
        if best.map(|b| b.2) == Some(first) {
            correct += 1;
        }
    }
    Ok(RecognitionOutcome {
        correct,
        evaluated: pairs.len(),
    })
}

/// Fraction of two-submission devices whose second submission is nearest
/// to their own first one among every other submission in the set.
///
/// With `filter_percentile`, devices whose intra-device `|dO_z|` or
/// `|dS_z|` exceeds that nearest-rank percentile are removed from the set
/// first. Distance ties go to the lowest cookie id.
pub fn recognition_rate(subs: &[Submission], cfg: &ScaledDistanceConfig, filter_percentile: Option<f64>) -> Result<RecognitionOutcome> {
    recognize(subs, cfg, filter_percentile, false)
}

/// As [`recognition_rate`], but candidates must share the probe's
/// User-Agent string.
pub fn ua_fused_recognition(subs: &[Submission], cfg: &ScaledDistanceConfig, filter_percentile: Option<f64>) -> Result<RecognitionOutcome> {
    recognize(subs, cfg, filter_percentile, true)
}

/// Enrollment protocol: every device's first submission is its stored
/// fingerprint and its second is matched to the nearest stored fingerprint.
pub fn enrollment_recognition_rate(subs: &[Submission], cfg: &ScaledDistanceConfig) -> Result<RecognitionOutcome> {
    let groups = by_cookie(subs);
    let enrolled: Vec<(CookieId, &ZAxisFingerprint)> =
        groups.iter().map(|(&c, idx)| (c, &subs[idx[0]].fingerprint)).collect();
    let probes: Vec<(CookieId, &ZAxisFingerprint)> = groups
        .iter()
        .filter(|(_, idx)| idx.len() >= 2)
        .map(|(&c, idx)| (c, &subs[idx[1]].fingerprint))
        .collect();
    if probes.is_empty() {
        return Err(Error::NoTwoSubmissionDevices);
    }
    let correct = probes
        .iter()
        .filter(|(cookie, probe)| {
            // Cookie order plus strict `<` resolves ties to the lowest cookie.
            let mut best: Option<(f64, CookieId)> = None;
            for (c, fp) in &enrolled {
                let d = scaled_accel_distance(probe, fp, cfg);
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, *c));
                }
            }
            best.map(|b| b.1) == Some(*cookie)
        })
        .count();
    Ok(RecognitionOutcome {
        correct,
        evaluated: probes.len(),
    })
}
