//! Per-instance IoU scoring and leaderboard ranking.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{Manifest, ManifestRow};
use crate::raster::{BinaryMask, ImageRGB8};
use crate::redact::recover_mask;

/// `|pred ∧ truth| / |pred ∨ truth|`, or 1.0 when both are empty.
pub fn iou(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    if !pred.same_dims(truth.width(), truth.height()) {
        return Err(Error::arg(format!(
            "prediction {}x{} vs truth {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    let (mut inter, mut union) = (0u64, 0u64);
    for (&p, &t) in pred.bits().iter().zip(truth.bits()) {
        inter += u64::from(p && t);
        union += u64::from(p || t);
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IoUReport {
    pub mean: f64,
    pub per_instance: BTreeMap<String, f64>,
    pub missing: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub errors: BTreeMap<String, String>,
}

impl IoUReport {
    /// Reduces per-id outcomes in ascending id order.
    pub fn from_outcomes(outcomes: BTreeMap<String, Outcome>) -> Self {
        let mut report = IoUReport::default();
        let mut sum = 0.0;
        for (id, outcome) in outcomes {
            let value = match outcome {
                Outcome::Scored(v) => v,
                Outcome::Missing => {
                    report.missing.push(id.clone());
                    0.0
                }
                Outcome::Failed(msg) => {
                    report.errors.insert(id.clone(), msg);
                    0.0
                }
            };
            sum += value;
            report.per_instance.insert(id, value);
        }
        if !report.per_instance.is_empty() {
            report.mean = sum / report.per_instance.len() as f64;
        }
        report
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Scored(f64),
    Missing,
    Failed(String),
}

/// Ground truth for a row: its mask PNG, or the diff of original and blurred images.
pub fn truth_mask(manifest: &Manifest, row: &ManifestRow) -> Result<BinaryMask> {
    if let Some(mask) = &row.mask {
        return BinaryMask::read_png(manifest.resolve(mask));
    }
    if let Some(blurred) = &row.blurred {
        let original = ImageRGB8::read_png(manifest.resolve(&row.image))?;
        let blurred = ImageRGB8::read_png(manifest.resolve(blurred))?;
        return recover_mask(&original, &blurred, 0);
    }
    Err(Error::Metadata(format!("row `{}` has no ground truth", row.id)))
}

fn score_row(pred_dir: &Path, manifest: &Manifest, row: &ManifestRow) -> Result<Outcome> {
    let truth = truth_mask(manifest, row)?;
    let pred_path = pred_dir.join(format!("{}.png", row.id));
    if !pred_path.exists() {
        return Ok(Outcome::Missing);
    }
    Ok(match BinaryMask::read_png(&pred_path).and_then(|p| iou(&p, &truth)) {
        Ok(v) => Outcome::Scored(v),
        Err(e) => Outcome::Failed(e.to_string()),
    })
}

/// Scores `<id>.png` predictions in `pred_dir` against every row in `rows`.
/// Missing or unreadable predictions score 0; unreadable ground truth is an error.
pub fn score(pred_dir: &Path, manifest: &Manifest, rows: &[&ManifestRow]) -> Result<IoUReport> {
    #[cfg(feature = "parallel")]
    let scored: Vec<(String, Outcome)> = {
        use rayon::prelude::*;
        rows.par_iter()
            .map(|row| Ok((row.id.clone(), score_row(pred_dir, manifest, row)?)))
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let scored: Vec<(String, Outcome)> = rows
        .iter()
        .map(|row| Ok((row.id.clone(), score_row(pred_dir, manifest, row)?)))
        .collect::<Result<_>>()?;
    Ok(IoUReport::from_outcomes(scored.into_iter().collect()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub team: String,
    /// Mean IoU rounded to two decimals.
    pub iou: f64,
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Ranks teams by mean IoU, descending, ties broken by team name.
pub fn leaderboard(reports: &BTreeMap<String, IoUReport>) -> Vec<LeaderboardEntry> {
    let mut teams: Vec<(&String, f64)> = reports.iter().map(|(t, r)| (t, r.mean)).collect();
    teams.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    teams
        .into_iter()
        .enumerate()
        .map(|(i, (team, mean))| LeaderboardEntry {
            rank: i + 1,
            team: team.clone(),
            iou: round2(mean),
        })
        .collect()
}

pub fn leaderboard_csv(entries: &[LeaderboardEntry]) -> String {
    let mut out = String::from("rank,team,iou\n");
    for e in entries {
        let team = if e.team.contains([',', '"', '\n']) {
            format!("\"{}\"", e.team.replace('"', "\"\""))
        } else {
            e.team.clone()
        };
        writeln!(out, "{},{},{:.2}", e.rank, team, e.iou).unwrap();
    }
    out
}
