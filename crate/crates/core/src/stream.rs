//! In-memory stream records shared by the simulator, tracker and metrics.

use crate::geometry::{OrientedBox, PlanarPose};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    GroundTruth,
    Detections,
    Tracklets,
}

impl StreamKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StreamKind::GroundTruth => "ground_truth",
            StreamKind::Detections => "detections",
            StreamKind::Tracklets => "tracklets",
        }
    }
}

/// Coordinate frame the boxes of a stream are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordFrame {
    Map,
    Sensor,
}

impl CoordFrame {
    pub fn as_str(self) -> &'static str {
        match self {
            CoordFrame::Map => "map",
            CoordFrame::Sensor => "sensor",
        }
    }
}

/// A box with an optional persistent identity (ground truth and tracklets).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBox {
    pub id: Option<u64>,
    pub bbox: OrientedBox,
}

impl LabeledBox {
    pub fn anonymous(bbox: OrientedBox) -> Self {
        Self { id: None, bbox }
    }

    pub fn with_id(id: u64, bbox: OrientedBox) -> Self {
        Self { id: Some(id), bbox }
    }
}

/// Timestamped robot pose plus the boxes observed at that instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub timestamp: f64,
    pub robot: PlanarPose,
    pub boxes: Vec<LabeledBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub kind: StreamKind,
    pub frame: CoordFrame,
    pub records: Vec<FrameRecord>,
}

impl Stream {
    pub fn new(kind: StreamKind, frame: CoordFrame) -> Self {
        Self {
            kind,
            frame,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn robot_poses(&self) -> Vec<PlanarPose> {
        self.records.iter().map(|r| r.robot).collect()
    }
}
