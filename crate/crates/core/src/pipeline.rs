//! End-to-end trial execution: simulate, track, evaluate.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::doe::TrialSpec;
use crate::error::{Error, Result};
use crate::geometry::{transform_to_map, ClassId, ClassRegistry, PlanarPose};
use crate::io::RunConfig;
use crate::metrics::{average_rows, evaluate, ClassMetrics, EvalMode, FramePair};
use crate::simulate::simulate_trial;
use crate::stream::{CoordFrame, FrameRecord, LabeledBox, Stream, StreamKind};
use crate::tracker::{Tracker, TrackerConfig};

/// Tolerance when pairing frames of two streams by timestamp.
pub const TIMESTAMP_TOLERANCE: f64 = 1e-9;

fn boxes_in_map(rec: &FrameRecord, frame: CoordFrame, offset: &PlanarPose) -> Result<Vec<LabeledBox>> {
    match frame {
        CoordFrame::Map => Ok(rec.boxes.clone()),
        CoordFrame::Sensor => rec
            .boxes
            .iter()
            .map(|b| {
                Ok(LabeledBox {
                    id: b.id,
                    bbox: transform_to_map(&b.bbox, &rec.robot, offset)?,
                })
            })
            .collect(),
    }
}

/// Pairs two frame-aligned streams record by record, bringing both into the
/// map frame with each record's own robot pose.
pub fn frame_pairs(gt: &Stream, pred: &Stream, sensor_offset: &PlanarPose) -> Result<Vec<FramePair>> {
    if gt.len() != pred.len() {
        return Err(Error::Alignment(format!(
            "{} ground-truth frames vs {} predicted frames",
            gt.len(),
            pred.len()
        )));
    }
    gt.records
        .iter()
        .zip(&pred.records)
        .enumerate()
        .map(|(i, (g, p))| {
            if (g.timestamp - p.timestamp).abs() > TIMESTAMP_TOLERANCE {
                return Err(Error::Alignment(format!(
                    "frame {i}: ground truth at t={} but prediction at t={}",
                    g.timestamp, p.timestamp
                )));
            }
            Ok(FramePair {
                timestamp: g.timestamp,
                gt: boxes_in_map(g, gt.frame, sensor_offset)?,
                pred: boxes_in_map(p, pred.frame, sensor_offset)?,
            })
        })
        .collect()
}

/// Runs the tracker over a detection stream and returns one map-frame
/// record of confirmed tracklets per input frame. Tracklet boxes carry no
/// detector score, so their confidence is reset to 1.
pub fn track_stream(detections: &Stream, config: &TrackerConfig, classes: &ClassRegistry) -> Result<Stream> {
    let mut tracker = Tracker::new(config.clone(), classes.clone())?;
    let mut out = Stream::new(StreamKind::Tracklets, CoordFrame::Map);
    out.records.reserve(detections.len());
    for rec in &detections.records {
        let snapshot = match detections.frame {
            CoordFrame::Sensor => tracker.ingest_frame(rec)?,
            CoordFrame::Map => tracker.ingest_map(
                rec.timestamp,
                rec.boxes.iter().map(|b| b.bbox.clone()).collect(),
            )?,
        };
        out.records.push(FrameRecord {
            timestamp: rec.timestamp,
            robot: rec.robot,
            boxes: snapshot
                .confirmed()
                .map(|e| Ok(LabeledBox::with_id(e.id, e.output_pose.clone().with_confidence(1.0)?)))
                .collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

/// Detection (D) and tracklet (T) metric rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeRows {
    pub detection: ClassMetrics,
    pub tracklet: ClassMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub trial_id: u32,
    pub block: String,
    pub class_id: ClassId,
    pub series_number: u32,
    #[serde(flatten)]
    pub rows: ModeRows,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub row: TrialRow,
    pub detection_frames: Vec<FramePair>,
    pub tracklet_frames: Vec<FramePair>,
}

pub fn run_trial(trial: &TrialSpec, config: &RunConfig, seed: u64) -> Result<TrialOutcome> {
    let offset = &config.tracker.sensor_offset;
    let sim = simulate_trial(trial, &config.sim, &config.classes, &config.noise, offset, seed)?;
    let tracklets = track_stream(&sim.detections, &config.tracker, &config.classes)?;
    let detection_frames = frame_pairs(&sim.ground_truth, &sim.detections, offset)?;
    let tracklet_frames = frame_pairs(&sim.ground_truth, &tracklets, offset)?;
    let detection = evaluate(&detection_frames, &config.metrics.options(EvalMode::Detection))?.overall;
    let tracklet = evaluate(&tracklet_frames, &config.metrics.options(EvalMode::Tracklet))?.overall;
    Ok(TrialOutcome {
        row: TrialRow {
            trial_id: trial.trial_id,
            block: trial.block.clone(),
            class_id: trial.class_id.clone(),
            series_number: trial.series_number,
            rows: ModeRows { detection, tracklet },
        },
        detection_frames,
        tracklet_frames,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignReport {
    pub seed: u64,
    pub trials: Vec<TrialRow>,
    /// Metrics over all frames of each class's trials.
    pub per_class: BTreeMap<ClassId, ModeRows>,
    /// Unweighted mean of the per-class rows.
    pub average: ModeRows,
}

/// Makes identities unique across trials so pooled frames can be scored
/// together.
fn namespaced(frames: &[FramePair], trial_id: u32) -> impl Iterator<Item = FramePair> + '_ {
    let base = u64::from(trial_id) << 32;
    let remap = move |boxes: &[LabeledBox]| -> Vec<LabeledBox> {
        boxes
            .iter()
            .map(|b| LabeledBox {
                id: b.id.map(|id| base | (id & 0xffff_ffff)),
                bbox: b.bbox.clone(),
            })
            .collect()
    };
    frames.iter().map(move |f| FramePair {
        timestamp: f.timestamp,
        gt: remap(&f.gt),
        pred: remap(&f.pred),
    })
}

fn pooled(outcomes: &[&TrialOutcome], config: &RunConfig, class: &ClassId, mode: EvalMode) -> Result<ClassMetrics> {
    let frames: Vec<FramePair> = outcomes
        .iter()
        .flat_map(|o| {
            let f = match mode {
                EvalMode::Detection => &o.detection_frames,
                EvalMode::Tracklet => &o.tracklet_frames,
            };
            namespaced(f, o.row.trial_id)
        })
        .collect();
    let report = evaluate(&frames, &config.metrics.options(mode))?;
    Ok(report.per_class.get(class).cloned().unwrap_or_default())
}

/// Runs every trial (in parallel) and aggregates per class. The result only
/// depends on the inputs, not on scheduling.
pub fn run_campaign(trials: &[TrialSpec], config: &RunConfig, seed: u64) -> Result<CampaignReport> {
    config.validate()?;
    let outcomes = trials
        .par_iter()
        .map(|t| run_trial(t, config, seed))
        .collect::<Result<Vec<_>>>()?;

    let mut by_class: BTreeMap<ClassId, Vec<&TrialOutcome>> = BTreeMap::new();
    for o in &outcomes {
        by_class.entry(o.row.class_id.clone()).or_default().push(o);
    }
    let per_class = by_class
        .iter()
        .map(|(class, group)| {
            Ok((
                class.clone(),
                ModeRows {
                    detection: pooled(group, config, class, EvalMode::Detection)?,
                    tracklet: pooled(group, config, class, EvalMode::Tracklet)?,
                },
            ))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let average = ModeRows {
        detection: average_rows(per_class.values().map(|r| &r.detection)),
        tracklet: average_rows(per_class.values().map(|r| &r.tracklet)),
    };
    Ok(CampaignReport {
        seed,
        trials: outcomes.into_iter().map(|o| o.row).collect(),
        per_class,
        average,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::{block_by_name, campaign};
    use crate::geometry::OrientedBox;

    fn stream(kind: StreamKind, ts: &[f64]) -> Stream {
        let mut s = Stream::new(kind, CoordFrame::Map);
        for &t in ts {
            let b = OrientedBox::new([1.0, 0.0, 0.5], [1.0; 3], 0.0, ClassId::Mw).unwrap();
            s.records.push(FrameRecord {
                timestamp: t,
                robot: PlanarPose::identity(),
                boxes: vec![LabeledBox::with_id(1, b)],
            });
        }
        s
    }

    #[test]
    fn alignment_errors() {
        let g = stream(StreamKind::GroundTruth, &[0.0, 0.1]);
        assert!(matches!(
            frame_pairs(&g, &stream(StreamKind::Tracklets, &[0.0]), &PlanarPose::identity()),
            Err(Error::Alignment(_))
        ));
        assert!(matches!(
            frame_pairs(&g, &stream(StreamKind::Tracklets, &[0.0, 0.2]), &PlanarPose::identity()),
            Err(Error::Alignment(_))
        ));
        assert_eq!(frame_pairs(&g, &g, &PlanarPose::identity()).unwrap().len(), 2);
    }

    #[test]
    fn single_object_keeps_one_id() {
        let classes = ClassRegistry::default();
        let cfg = RunConfig::default();
        let trial = &campaign(&[block_by_name("single-mw").unwrap()], &classes).unwrap()[3];
        let sim = simulate_trial(trial, &cfg.sim, &classes, &crate::simulate::NoiseModel { fp_rate: 0.0, ..cfg.noise.clone() }, &PlanarPose::identity(), 11).unwrap();
        let out = track_stream(&sim.detections, &cfg.tracker, &classes).unwrap();
        let ids: std::collections::BTreeSet<u64> = out
            .records
            .iter()
            .flat_map(|r| r.boxes.iter().filter_map(|b| b.id))
            .collect();
        assert_eq!(ids.len(), 1, "{ids:?}");
        assert_eq!(out.len(), sim.detections.len());
    }

    #[test]
    fn small_campaign_is_deterministic() {
        let classes = ClassRegistry::default();
        let trials = campaign(&[block_by_name("single-sw").unwrap()], &classes).unwrap();
        let cfg = RunConfig::default();
        let a = run_campaign(&trials[..4], &cfg, 3).unwrap();
        let b = run_campaign(&trials[..4], &cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trials.len(), 4);
        assert!(a.per_class.contains_key(&ClassId::Sw));
        assert!(a.average.detection.hota.is_none());
        assert!(a.average.tracklet.hota.is_some());
    }
}
