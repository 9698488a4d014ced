//! Greedy center-distance association with a size-based gate.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::geometry::{center_distance, OrientedBox};

pub type TrackId = u64;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssociationResult {
    /// `(tracklet_id, detection_index, distance)`, in acceptance order.
    pub matches: Vec<(TrackId, usize, f64)>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_tracklets: Vec<TrackId>,
}

/// Half the larger of the two footprint diagonals.
pub fn gate_threshold(det: &OrientedBox, track_box: &OrientedBox) -> f64 {
    // extents are validated positive by OrientedBox::new
    0.5 * det.footprint_diagonal().max(track_box.footprint_diagonal())
}

/// Greedily pairs detections with tracklets in ascending center distance.
///
/// Only same-class pairs within `gate_scale * gate_threshold` are
/// candidates. Ties are broken by `(distance, tracklet_id, detection_index)`,
/// so the match set does not depend on input order.
pub fn associate(
    detections: &[OrientedBox],
    tracklets: &[(TrackId, OrientedBox)],
    gate_scale: f64,
) -> Result<AssociationResult> {
    if !(gate_scale > 0.0) {
        return Err(Error::invalid(format!(
            "gate scale must be positive, got {gate_scale}"
        )));
    }
    let mut seen = HashSet::with_capacity(tracklets.len());
    for (id, _) in tracklets {
        if !seen.insert(*id) {
            return Err(Error::invalid(format!("duplicate tracklet id {id}")));
        }
    }

    let mut candidates: Vec<(f64, TrackId, usize, usize)> = Vec::new();
    for (ti, (id, tb)) in tracklets.iter().enumerate() {
        for (di, det) in detections.iter().enumerate() {
            if det.class_id != tb.class_id {
                continue;
            }
            let d = center_distance(det, tb);
            if d <= gate_scale * gate_threshold(det, tb) {
                candidates.push((d, *id, di, ti));
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut det_used = vec![false; detections.len()];
    let mut trk_used = vec![false; tracklets.len()];
    let mut result = AssociationResult::default();
    for (d, id, di, ti) in candidates {
        if det_used[di] || trk_used[ti] {
            continue;
        }
        det_used[di] = true;
        trk_used[ti] = true;
        result.matches.push((id, di, d));
    }
    result.unmatched_detections = (0..detections.len()).filter(|&i| !det_used[i]).collect();
    result.unmatched_tracklets = tracklets
        .iter()
        .zip(&trk_used)
        .filter(|(_, &used)| !used)
        .map(|((id, _), _)| *id)
        .collect();
    Ok(result)
}
