//! Tracking-by-detection of oriented 3D boxes with symmetry-aware yaw
//! handling, evaluation metrics, an orthogonal-array trial design and a
//! detector emulator.

pub mod association;
pub mod doe;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod simulate;
pub mod stream;
pub mod tracker;

pub use association::{associate, AssociationResult, TrackId};
pub use error::{Error, Result};
pub use io::RunConfig;
pub use metrics::{evaluate, ClassMetrics, EvalMode, EvalOptions, MetricsReport};
pub use pipeline::{run_campaign, run_trial, track_stream, CampaignReport};
pub use geometry::{ClassId, ClassRegistry, ClassSpec, OrientedBox, PlanarPose};
pub use stream::{CoordFrame, FrameRecord, LabeledBox, Stream, StreamKind};
pub use tracker::{Tracker, TrackerConfig};
