//! Detection and tracking evaluation: per-frame optimal matching, DetA,
//! HOTA, average IoU and pose RMSEs.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{iou_3d, yaw_difference, ClassId, OrientedBox};
use crate::stream::LabeledBox;

/// IoU threshold for a true positive.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Thresholds used when HOTA is averaged over localization levels.
pub fn alpha_sweep() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FramePairing {
    pub timestamp: f64,
    /// `(gt_index, pred_index, iou)`.
    pub tp_pairs: Vec<(usize, usize, f64)>,
    pub fp_indices: Vec<usize>,
    pub fn_indices: Vec<usize>,
}

/// Maximum-weight assignment on a dense `rows × cols` matrix with
/// `rows <= cols`. Returns the column chosen for every row.
fn max_weight_assignment(weights: &[Vec<f64>], cols: usize) -> Vec<usize> {
    let rows = weights.len();
    debug_assert!(rows <= cols);
    let top = weights
        .iter()
        .flat_map(|r| r.iter().copied())
        .fold(0.0f64, f64::max);
    // Hungarian method with potentials on cost = top - weight (1-based).
    let cost = |i: usize, j: usize| top - weights[i - 1][j - 1];
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; rows];
    for j in 1..=cols {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// One-to-one same-class matching with `iou > alpha`, maximizing first
/// the number of true positives and then their total IoU.
pub fn match_frame(gt: &[OrientedBox], pred: &[OrientedBox], alpha: f64) -> FramePairing {
    let mut pairing = FramePairing::default();
    let mut iou = vec![vec![0.0; pred.len()]; gt.len()];
    let mut any = false;
    for (g, gb) in gt.iter().enumerate() {
        for (p, pb) in pred.iter().enumerate() {
            if gb.class_id != pb.class_id {
                continue;
            }
            let v = iou_3d(gb, pb).unwrap_or(0.0);
            if v > alpha {
                iou[g][p] = v;
                any = true;
            }
        }
    }
    let mut gt_hit = vec![false; gt.len()];
    let mut pred_hit = vec![false; pred.len()];
    if any {
        // every admissible edge outweighs any IoU gain from a smaller matching
        let bonus = gt.len().min(pred.len()) as f64 + 1.0;
        let weight = |v: f64| if v > 0.0 { bonus + v } else { 0.0 };
        let transpose = gt.len() > pred.len();
        let (rows, cols) = if transpose {
            (pred.len(), gt.len())
        } else {
            (gt.len(), pred.len())
        };
        let w: Vec<Vec<f64>> = (0..rows)
            .map(|r| {
                (0..cols)
                    .map(|c| {
                        let (g, p) = if transpose { (c, r) } else { (r, c) };
                        weight(iou[g][p])
                    })
                    .collect()
            })
            .collect();
        for (r, c) in max_weight_assignment(&w, cols).into_iter().enumerate() {
            let (g, p) = if transpose { (c, r) } else { (r, c) };
            if iou[g][p] > 0.0 {
                pairing.tp_pairs.push((g, p, iou[g][p]));
                gt_hit[g] = true;
                pred_hit[p] = true;
            }
        }
        pairing.tp_pairs.sort_by_key(|t| (t.0, t.1));
    }
    pairing.fn_indices = (0..gt.len()).filter(|&g| !gt_hit[g]).collect();
    pairing.fp_indices = (0..pred.len()).filter(|&p| !pred_hit[p]).collect();
    pairing
}

/// `ΣTP / (ΣTP + ΣFP + ΣFN)` over all frames.
pub fn det_a(pairings: &[FramePairing]) -> Result<f64> {
    let (tp, fp, fn_) = pairings.iter().fold((0usize, 0usize, 0usize), |acc, p| {
        (
            acc.0 + p.tp_pairs.len(),
            acc.1 + p.fp_indices.len(),
            acc.2 + p.fn_indices.len(),
        )
    });
    let denom = tp + fp + fn_;
    if denom == 0 {
        return Err(Error::UndefinedMetric("DetA with no ground truth and no predictions"));
    }
    Ok(tp as f64 / denom as f64)
}

/// Root mean squared center error over matched pairs, plus its per-axis
/// components.
pub fn pos_rmse(pairs: &[(&OrientedBox, &OrientedBox)]) -> Result<(f64, [f64; 3])> {
    if pairs.is_empty() {
        return Err(Error::UndefinedMetric("position RMSE without true positives"));
    }
    let mut axes = [0.0; 3];
    for (g, p) in pairs {
        for k in 0..3 {
            axes[k] += (g.center[k] - p.center[k]).powi(2);
        }
    }
    let n = pairs.len() as f64;
    let total = (axes.iter().sum::<f64>() / n).sqrt();
    Ok((total, axes.map(|s| (s / n).sqrt())))
}

/// Root mean squared wrapped yaw error over matched pairs, in radians.
pub fn yaw_rmse(pairs: &[(&OrientedBox, &OrientedBox)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::UndefinedMetric("yaw RMSE without true positives"));
    }
    let sum: f64 = pairs
        .iter()
        .map(|(g, p)| yaw_difference(g.yaw(), p.yaw()).powi(2))
        .sum();
    Ok((sum / pairs.len() as f64).sqrt())
}

/// Ground truth and predictions for one timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePair {
    pub timestamp: f64,
    pub gt: Vec<LabeledBox>,
    pub pred: Vec<LabeledBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HotaScore {
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ids_of(boxes: &[LabeledBox], side: &str, t: f64) -> Result<Vec<u64>> {
    let mut seen = HashSet::with_capacity(boxes.len());
    boxes
        .iter()
        .map(|b| {
            let id = b
                .id
                .ok_or_else(|| Error::invalid(format!("{side} box without id at t={t}")))?;
            if !seen.insert(id) {
                return Err(Error::invalid(format!(
                    "{side} id {id} appears twice at t={t}"
                )));
            }
            Ok(id)
        })
        .collect()
}

/// HOTA at a single IoU threshold.
pub fn hota_at(frames: &[FramePair], alpha: f64) -> Result<HotaScore> {
    let mut matches: HashMap<(u64, u64), usize> = HashMap::new();
    let mut gt_count: HashMap<u64, usize> = HashMap::new();
    let mut pred_count: HashMap<u64, usize> = HashMap::new();
    let mut tp_pairs: Vec<(u64, u64)> = Vec::new();
    let (mut fp, mut fn_) = (0usize, 0usize);

    for f in frames {
        let gids = ids_of(&f.gt, "ground-truth", f.timestamp)?;
        let pids = ids_of(&f.pred, "prediction", f.timestamp)?;
        for &g in &gids {
            *gt_count.entry(g).or_default() += 1;
        }
        for &p in &pids {
            *pred_count.entry(p).or_default() += 1;
        }
        let gb: Vec<OrientedBox> = f.gt.iter().map(|b| b.bbox.clone()).collect();
        let pb: Vec<OrientedBox> = f.pred.iter().map(|b| b.bbox.clone()).collect();
        let pairing = match_frame(&gb, &pb, alpha);
        for &(g, p, _) in &pairing.tp_pairs {
            let key = (gids[g], pids[p]);
            *matches.entry(key).or_default() += 1;
            tp_pairs.push(key);
        }
        fp += pairing.fp_indices.len();
        fn_ += pairing.fn_indices.len();
    }

    let tp = tp_pairs.len();
    if tp + fp + fn_ == 0 {
        return Err(Error::UndefinedMetric("HOTA with no ground truth and no predictions"));
    }
    let det_a = tp as f64 / (tp + fp + fn_) as f64;
    let ass_a = if tp == 0 {
        0.0
    } else {
        tp_pairs
            .iter()
            .map(|key| {
                let tpa = matches[key] as f64;
                let g = gt_count[&key.0] as f64;
                let p = pred_count[&key.1] as f64;
                tpa / (g + p - tpa)
            })
            .sum::<f64>()
            / tp as f64
    };
    Ok(HotaScore {
        hota: (det_a * ass_a).sqrt(),
        det_a,
        ass_a,
        tp,
        fp,
        fn_,
    })
}

/// HOTA at `alpha`, or averaged over the 0.05..0.95 threshold sweep.
pub fn hota(frames: &[FramePair], alpha: f64, sweep: bool) -> Result<f64> {
    if !sweep {
        return Ok(hota_at(frames, alpha)?.hota);
    }
    let alphas = alpha_sweep();
    let mut total = 0.0;
    for a in &alphas {
        total += hota_at(frames, *a)?.hota;
    }
    Ok(total / alphas.len() as f64)
}

/// Number of times a ground-truth identity is matched to a different
/// prediction identity than at its previous match.
pub fn id_switches(frames: &[FramePair], alpha: f64) -> usize {
    let mut last: HashMap<u64, u64> = HashMap::new();
    let mut switches = 0;
    for f in frames {
        let gb: Vec<OrientedBox> = f.gt.iter().map(|b| b.bbox.clone()).collect();
        let pb: Vec<OrientedBox> = f.pred.iter().map(|b| b.bbox.clone()).collect();
        for (g, p, _) in match_frame(&gb, &pb, alpha).tp_pairs {
            let (Some(gid), Some(pid)) = (f.gt[g].id, f.pred[p].id) else {
                continue;
            };
            if let Some(prev) = last.insert(gid, pid) {
                if prev != pid {
                    switches += 1;
                }
            }
        }
    }
    switches
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Per-frame detections without identities; HOTA is not reported.
    Detection,
    Tracklet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub mode: EvalMode,
    pub alpha: f64,
    pub alpha_sweep: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            mode: EvalMode::Tracklet,
            alpha: DEFAULT_ALPHA,
            alpha_sweep: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ClassMetrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub id_switches: usize,
    pub avg_iou: Option<f64>,
    pub pos_rmse: Option<f64>,
    pub pos_rmse_axes: Option<[f64; 3]>,
    pub yaw_rmse: Option<f64>,
    pub det_a: Option<f64>,
    pub hota: Option<f64>,
}

impl ClassMetrics {
    pub fn yaw_rmse_deg(&self) -> Option<f64> {
        self.yaw_rmse.map(f64::to_degrees)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub overall: ClassMetrics,
    pub per_class: BTreeMap<ClassId, ClassMetrics>,
    /// Unweighted mean of the per-class values.
    pub class_average: ClassMetrics,
}

fn filter_class(frames: &[FramePair], class: &ClassId) -> Vec<FramePair> {
    frames
        .iter()
        .map(|f| FramePair {
            timestamp: f.timestamp,
            gt: f.gt.iter().filter(|b| &b.bbox.class_id == class).cloned().collect(),
            pred: f.pred.iter().filter(|b| &b.bbox.class_id == class).cloned().collect(),
        })
        .collect()
}

fn class_metrics(frames: &[FramePair], opts: &EvalOptions) -> Result<ClassMetrics> {
    let mut pairings = Vec::with_capacity(frames.len());
    let mut matched: Vec<(&OrientedBox, &OrientedBox)> = Vec::new();
    let mut iou_sum = 0.0;
    for f in frames {
        if f.gt.is_empty() && f.pred.is_empty() {
            continue;
        }
        let gb: Vec<OrientedBox> = f.gt.iter().map(|b| b.bbox.clone()).collect();
        let pb: Vec<OrientedBox> = f.pred.iter().map(|b| b.bbox.clone()).collect();
        let mut pairing = match_frame(&gb, &pb, opts.alpha);
        pairing.timestamp = f.timestamp;
        for &(g, p, iou) in &pairing.tp_pairs {
            matched.push((&f.gt[g].bbox, &f.pred[p].bbox));
            iou_sum += iou;
        }
        pairings.push(pairing);
    }
    let mut m = ClassMetrics {
        tp: matched.len(),
        fp: pairings.iter().map(|p| p.fp_indices.len()).sum(),
        fn_: pairings.iter().map(|p| p.fn_indices.len()).sum(),
        ..ClassMetrics::default()
    };
    m.det_a = det_a(&pairings).ok();
    if !matched.is_empty() {
        m.avg_iou = Some(iou_sum / matched.len() as f64);
        let (pos, axes) = pos_rmse(&matched)?;
        m.pos_rmse = Some(pos);
        m.pos_rmse_axes = Some(axes);
        m.yaw_rmse = Some(yaw_rmse(&matched)?);
    }
    if opts.mode == EvalMode::Tracklet {
        m.id_switches = id_switches(frames, opts.alpha);
        if m.det_a.is_some() {
            m.hota = Some(hota(frames, opts.alpha, opts.alpha_sweep)?);
        }
    }
    Ok(m)
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Unweighted mean of per-class metric rows; counts are summed.
pub fn average_rows<'a>(rows: impl Iterator<Item = &'a ClassMetrics> + Clone) -> ClassMetrics {
    ClassMetrics {
        tp: rows.clone().map(|r| r.tp).sum(),
        fp: rows.clone().map(|r| r.fp).sum(),
        fn_: rows.clone().map(|r| r.fn_).sum(),
        id_switches: rows.clone().map(|r| r.id_switches).sum(),
        avg_iou: mean_of(rows.clone().map(|r| r.avg_iou)),
        pos_rmse: mean_of(rows.clone().map(|r| r.pos_rmse)),
        pos_rmse_axes: {
            let axes: Vec<[f64; 3]> = rows.clone().filter_map(|r| r.pos_rmse_axes).collect();
            (!axes.is_empty()).then(|| {
                let n = axes.len() as f64;
                [0, 1, 2].map(|k| axes.iter().map(|a| a[k]).sum::<f64>() / n)
            })
        },
        yaw_rmse: mean_of(rows.clone().map(|r| r.yaw_rmse)),
        det_a: mean_of(rows.clone().map(|r| r.det_a)),
        hota: mean_of(rows.map(|r| r.hota)),
    }
}

/// Full report over frame-aligned ground truth and predictions.
pub fn evaluate(frames: &[FramePair], opts: &EvalOptions) -> Result<MetricsReport> {
    let mut classes: Vec<ClassId> = frames
        .iter()
        .flat_map(|f| f.gt.iter().chain(&f.pred).map(|b| b.bbox.class_id.clone()))
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    classes.sort();
    let overall = class_metrics(frames, opts)?;
    let mut per_class = BTreeMap::new();
    for c in classes {
        let m = class_metrics(&filter_class(frames, &c), opts)?;
        per_class.insert(c, m);
    }
    let class_average = average_rows(per_class.values());
    Ok(MetricsReport {
        overall,
        per_class,
        class_average,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ClassId;

    fn cube(x: f64, y: f64) -> OrientedBox {
        OrientedBox::new([x, y, 0.0], [1.0; 3], 0.0, ClassId::Msu).unwrap()
    }

    #[test]
    fn identical_boxes_all_tp() {
        let g = vec![cube(0.0, 0.0), cube(3.0, 0.0)];
        let p = match_frame(&g, &g, DEFAULT_ALPHA);
        assert_eq!(p.tp_pairs, vec![(0, 0, 1.0), (1, 1, 1.0)]);
        assert!(p.fp_indices.is_empty() && p.fn_indices.is_empty());
    }

    #[test]
    fn low_iou_is_fp_and_fn() {
        // offset 0.6 m: IoU = 0.4 / 1.6 = 0.25
        let p = match_frame(&[cube(0.0, 0.0)], &[cube(0.6, 0.0)], DEFAULT_ALPHA);
        assert!(p.tp_pairs.is_empty());
        assert_eq!((p.fp_indices.len(), p.fn_indices.len()), (1, 1));
        // offset so that IoU = 0.4 exactly: overlap 4/7
        let d = 1.0 - 4.0 / 7.0;
        let v = iou_3d(&cube(0.0, 0.0), &cube(d, 0.0)).unwrap();
        assert!((v - 0.4).abs() < 1e-12);
        let p = match_frame(&[cube(0.0, 0.0)], &[cube(d, 0.0)], DEFAULT_ALPHA);
        assert_eq!((p.tp_pairs.len(), p.fp_indices.len(), p.fn_indices.len()), (0, 1, 1));
    }

    #[test]
    fn prefers_cardinality_over_iou() {
        // greedy on IoU would pair g0-p0 (0.9 region) and leave g1 unmatched
        let g = vec![cube(0.0, 0.0), cube(0.3, 0.0)];
        let p = vec![cube(0.15, 0.0), cube(0.5, 0.0)];
        let m = match_frame(&g, &p, DEFAULT_ALPHA);
        assert_eq!(m.tp_pairs.len(), 2);
    }

    #[test]
    fn class_restricted() {
        let g = vec![cube(0.0, 0.0)];
        let p = vec![OrientedBox::new([0.0; 3], [1.0; 3], 0.0, ClassId::Mw).unwrap()];
        let m = match_frame(&g, &p, DEFAULT_ALPHA);
        assert!(m.tp_pairs.is_empty());
    }

    #[test]
    fn det_a_formula() {
        let pairing = FramePairing {
            timestamp: 0.0,
            tp_pairs: (0..6).map(|i| (i, i, 1.0)).collect(),
            fp_indices: vec![6, 7],
            fn_indices: vec![6, 7],
        };
        assert!((det_a(&[pairing]).unwrap() - 0.6).abs() < 1e-15);
        assert!(matches!(
            det_a(&[FramePairing::default()]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn rmse_examples() {
        let g: Vec<_> = (0..5).map(|i| cube(i as f64, 0.0)).collect();
        let p: Vec<_> = (0..5).map(|i| cube(i as f64 + 0.1, 0.0)).collect();
        let pairs: Vec<_> = g.iter().zip(&p).collect();
        let (pos, axes) = pos_rmse(&pairs).unwrap();
        assert!((pos - 0.1).abs() < 1e-12);
        assert!((axes[0] - 0.1).abs() < 1e-12 && axes[1] == 0.0);
        assert_eq!(yaw_rmse(&pairs).unwrap(), 0.0);
        let perfect: Vec<_> = g.iter().zip(&g).collect();
        assert_eq!(pos_rmse(&perfect).unwrap().0, 0.0);
        assert!(pos_rmse(&[]).is_err());
        assert!(yaw_rmse(&[]).is_err());
    }

    #[test]
    fn flipped_symmetric_yaw_rmse_is_pi() {
        let sw = |yaw| OrientedBox::new([0.0; 3], [1.6, 0.8, 0.82], yaw, ClassId::Sw).unwrap();
        let g: Vec<_> = (0..10).map(|i| sw(0.1 * i as f64)).collect();
        let p: Vec<_> = g.iter().map(|b| sw(b.yaw() + std::f64::consts::PI)).collect();
        let pairs: Vec<_> = g.iter().zip(&p).collect();
        assert!((yaw_rmse(&pairs).unwrap() - std::f64::consts::PI).abs() < 1e-9);
    }

    fn track(frames: usize, ids: impl Fn(usize) -> u64) -> Vec<FramePair> {
        (0..frames)
            .map(|k| FramePair {
                timestamp: k as f64 * 0.1,
                gt: vec![LabeledBox::with_id(1, cube(0.0, 0.0))],
                pred: vec![LabeledBox::with_id(ids(k), cube(0.0, 0.0))],
            })
            .collect()
    }

    #[test]
    fn hota_perfect_and_switch() {
        assert_eq!(hota(&track(10, |_| 7), 0.5, false).unwrap(), 1.0);
        // switch at frame 5: two TP groups of 5 with A = 5 / (10 + 5 - 5)
        let s = hota_at(&track(10, |k| if k < 5 { 7 } else { 8 }), 0.5).unwrap();
        assert_eq!(s.det_a, 1.0);
        assert!((s.ass_a - 0.5).abs() < 1e-15);
        assert!((s.hota - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(id_switches(&track(10, |k| if k < 5 { 7 } else { 8 }), 0.5), 1);
    }

    #[test]
    fn hota_without_predictions_is_zero() {
        let frames: Vec<_> = track(5, |_| 1)
            .into_iter()
            .map(|mut f| {
                f.pred.clear();
                f
            })
            .collect();
        let s = hota_at(&frames, 0.5).unwrap();
        assert_eq!((s.hota, s.det_a), (0.0, 0.0));
    }

    #[test]
    fn hota_rejects_id_collision() {
        let mut frames = track(2, |_| 1);
        frames[1].gt.push(LabeledBox::with_id(1, cube(4.0, 0.0)));
        assert!(matches!(hota_at(&frames, 0.5), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn hota_sweep_perfect() {
        assert!((hota(&track(4, |_| 2), 0.5, true).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn evaluate_self_is_perfect() {
        let frames = track(6, |_| 1)
            .into_iter()
            .map(|mut f| {
                f.pred = f.gt.clone();
                f
            })
            .collect::<Vec<_>>();
        let r = evaluate(&frames, &EvalOptions::default()).unwrap();
        assert_eq!(r.overall.avg_iou, Some(1.0));
        assert_eq!(r.overall.pos_rmse, Some(0.0));
        assert_eq!(r.overall.det_a, Some(1.0));
        assert_eq!(r.overall.hota, Some(1.0));
        assert_eq!(r.per_class.len(), 1);
        let det = evaluate(
            &frames,
            &EvalOptions {
                mode: EvalMode::Detection,
                ..EvalOptions::default()
            },
        )
        .unwrap();
        assert_eq!(det.overall.hota, None);
    }
}
