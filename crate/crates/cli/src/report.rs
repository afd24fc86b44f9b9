//! Text, CSV and JSON renderings of experiment results.
//!
//! CSV layouts (header line first, one row per line):
//!
//! - `audio_l2`: `location,variant,correct,total,accuracy`
//! - `audio_mle`: `location,trained,total,mle_main,mle_second,l2_second,mle_main_accuracy,mle_second_accuracy,l2_second_accuracy`
//! - `stealth`: `method,folds,k,correct,total,accuracy`
//! - `accel_sweep`: `m_sz,correct,evaluated,rate`
//! - `accel_entropy`, `six_param`: `metric,value`
//!
//! Accuracies and rates are fractions with 6 decimals; entropies are bits
//! with 3 decimals.

use std::fmt::Write as _;

use clap::ValueEnum;

use crate::experiment::{ExperimentResult, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

fn frac(correct: usize, total: usize) -> f64 {
    correct as f64 / total.max(1) as f64
}

fn pct(correct: usize, total: usize) -> String {
    format!("{:.1}%", 100.0 * frac(correct, total))
}

pub fn emit_report(result: &ExperimentResult, format: Format) -> String {
    match format {
        Format::Text => text(result),
        Format::Csv => csv(result),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(result).expect("results always serialize");
            s.push('\n');
            s
        }
    }
}

fn text(r: &ExperimentResult) -> String {
    let mut out = String::new();
    let w = &mut out;
    match &r.outcome {
        Outcome::AudioL2(o) => {
            let _ = writeln!(w, "L2 classification, {} devices, trained on location {}", r.devices, o.train_location + 1);
            let mut locations: Vec<usize> = o.rows.iter().map(|row| row.location).collect();
            locations.dedup();
            let variants: Vec<&str> = o
                .rows
                .iter()
                .filter(|row| row.location == locations[0])
                .map(|row| row.variant.as_str())
                .collect();
            let _ = write!(w, "{:<10}", "location");
            for v in &variants {
                let _ = write!(w, "{v:>9}");
            }
            let _ = writeln!(w);
            for l in locations {
                let _ = write!(w, "{:<10}", l + 1);
                for row in o.rows.iter().filter(|row| row.location == l) {
                    let _ = write!(w, "{:>9}", pct(row.correct, row.total));
                }
                let _ = writeln!(w);
            }
        }
        Outcome::AudioMle(o) => {
            let _ = writeln!(w, "MLE classification, {} devices, {} training runs per location", r.devices, o.train_runs);
            let _ = writeln!(w, "{:<14}{:>9}{:>9}{:>9}", "location", "main", "second", "L2(B)");
            for row in &o.rows {
                let label = if row.trained {
                    format!("{}", row.location + 1)
                } else {
                    format!("{} (untrained)", row.location + 1)
                };
                let _ = writeln!(
                    w,
                    "{:<14}{:>9}{:>9}{:>9}",
                    label,
                    pct(row.main, row.total),
                    pct(row.second, row.total),
                    pct(row.l2_second, row.total)
                );
            }
        }
        Outcome::Stealth(o) => {
            let _ = writeln!(w, "Stealth fingerprints, {} devices, {} samples, {}-NN {}-fold", r.devices, o.samples, o.k, o.stealth.folds);
            for (name, rep) in [("stealth", &o.stealth), ("sweep", &o.sweep)] {
                let _ = writeln!(w, "{name:<8} {} ({}/{})", pct(rep.correct, rep.total), rep.correct, rep.total);
            }
        }
        Outcome::AccelSweep(o) => {
            let _ = writeln!(w, "Recognition rate vs M_Sz, {} devices", r.devices);
            let _ = writeln!(w, "{:>10}{:>10}", "M_Sz", "rate");
            for row in &o.rows {
                let _ = writeln!(w, "{:>10}{:>10}", row.m_sz, pct(row.correct, row.evaluated));
            }
        }
        Outcome::AccelEntropy(o) => {
            let rec = &o.recognition;
            let _ = writeln!(w, "Accelerometer entropy, {} devices, {} submissions", r.devices, o.submissions);
            let _ = writeln!(w, "two-submission devices: {}", o.two_submission_devices);
            let _ = writeln!(w, "{}th percentile dO_z: {:.4}", o.percentile, o.distance_o);
            let _ = writeln!(w, "{}th percentile dS_z: {:.5}", o.percentile, o.distance_s);
            let _ = writeln!(w, "grid {} x {}: {} occupied cells", o.width_o, o.width_s, o.occupied_cells);
            let _ = writeln!(w, "entropy: {:.3} bits", o.entropy_bits);
            let _ = writeln!(w, "origin shifts: {:.3} to {:.3} bits", o.origin_min_bits, o.origin_max_bits);
            let _ = writeln!(w, "recognition (M_Sz = {}):", o.m_sz);
            for (name, out) in [
                ("all", rec.unfiltered),
                ("filtered", rec.filtered),
                ("user-agent", rec.fused),
                ("user-agent, filtered", rec.fused_filtered),
            ] {
                let _ = writeln!(w, "  {name:<22}{:>8} ({}/{})", pct(out.correct, out.evaluated), out.correct, out.evaluated);
            }
        }
        Outcome::SixParam(o) => {
            let _ = writeln!(w, "Six-parameter fingerprints, {} devices, {} fingerprints", r.devices, o.fingerprints);
            let _ = writeln!(w, "converged: {}/{}", o.converged, o.fingerprints);
            let _ = writeln!(w, "mean iterations: {:.1}", o.mean_iterations);
            let _ = writeln!(w, "max parameter error: {:.3e}", o.max_abs_error);
            let _ = writeln!(w, "{}-NN {}-fold accuracy: {}", o.k, o.kfold.folds, pct(o.kfold.correct, o.kfold.total));
        }
    }
    out
}

fn csv(r: &ExperimentResult) -> String {
    let mut out = String::new();
    let w = &mut out;
    match &r.outcome {
        Outcome::AudioL2(o) => {
            let _ = writeln!(w, "location,variant,correct,total,accuracy");
            for row in &o.rows {
                let _ = writeln!(
                    w,
                    "{},{},{},{},{:.6}",
                    row.location + 1,
                    row.variant,
                    row.correct,
                    row.total,
                    frac(row.correct, row.total)
                );
            }
        }
        Outcome::AudioMle(o) => {
            let _ = writeln!(w, "location,trained,total,mle_main,mle_second,l2_second,mle_main_accuracy,mle_second_accuracy,l2_second_accuracy");
            for row in &o.rows {
                let _ = writeln!(
                    w,
                    "{},{},{},{},{},{},{:.6},{:.6},{:.6}",
                    row.location + 1,
                    row.trained,
                    row.total,
                    row.main,
                    row.second,
                    row.l2_second,
                    frac(row.main, row.total),
                    frac(row.second, row.total),
                    frac(row.l2_second, row.total)
                );
            }
        }
        Outcome::Stealth(o) => {
            let _ = writeln!(w, "method,folds,k,correct,total,accuracy");
            for (name, rep) in [("stealth", &o.stealth), ("sweep", &o.sweep)] {
                let _ = writeln!(w, "{name},{},{},{},{},{:.6}", rep.folds, o.k, rep.correct, rep.total, rep.accuracy);
            }
        }
        Outcome::AccelSweep(o) => {
            let _ = writeln!(w, "m_sz,correct,evaluated,rate");
            for row in &o.rows {
                let _ = writeln!(w, "{},{},{},{:.6}", row.m_sz, row.correct, row.evaluated, row.rate());
            }
        }
        Outcome::AccelEntropy(o) => {
            let rec = &o.recognition;
            let _ = writeln!(w, "metric,value");
            let rows = [
                ("submissions", o.submissions.to_string()),
                ("two_submission_devices", o.two_submission_devices.to_string()),
                ("percentile", o.percentile.to_string()),
                ("distance_o", format!("{:.6}", o.distance_o)),
                ("distance_s", format!("{:.6}", o.distance_s)),
                ("width_o", o.width_o.to_string()),
                ("width_s", o.width_s.to_string()),
                ("occupied_cells", o.occupied_cells.to_string()),
                ("entropy_bits", format!("{:.3}", o.entropy_bits)),
                ("origin_min_bits", format!("{:.3}", o.origin_min_bits)),
                ("origin_max_bits", format!("{:.3}", o.origin_max_bits)),
                ("m_sz", o.m_sz.to_string()),
                ("recognition_unfiltered", format!("{:.6}", rec.unfiltered.rate())),
                ("recognition_filtered", format!("{:.6}", rec.filtered.rate())),
                ("recognition_fused", format!("{:.6}", rec.fused.rate())),
                ("recognition_fused_filtered", format!("{:.6}", rec.fused_filtered.rate())),
            ];
            for (k, v) in rows {
                let _ = writeln!(w, "{k},{v}");
            }
        }
        Outcome::SixParam(o) => {
            let _ = writeln!(w, "metric,value");
            let _ = writeln!(w, "fingerprints,{}", o.fingerprints);
            let _ = writeln!(w, "converged,{}", o.converged);
            let _ = writeln!(w, "mean_iterations,{:.1}", o.mean_iterations);
            let _ = writeln!(w, "max_abs_error,{:e}", o.max_abs_error);
            let _ = writeln!(w, "knn_k,{}", o.k);
            let _ = writeln!(w, "kfold_accuracy,{:.6}", o.kfold.accuracy);
        }
    }
    out
}
