//! Tracklet lifecycle engine.
//!
//! Each ingested frame runs association, per-tracklet pose stabilization,
//! lifecycle management and finally a snapshot of the registry.
//!
//! Stabilization works on a bounded observation history. Stationary
//! tracklets publish the mean of that history; moving tracklets publish
//! the latest observation. Symmetric classes have every incoming yaw
//! snapped to the symmetry hypothesis nearest the last published yaw
//! before anything else looks at it.

use std::collections::{BTreeMap, VecDeque};

use crate::association::{associate, gate_threshold, TrackId};
use crate::error::{Error, Result};
use crate::geometry::{
    canonical_yaw, center_distance, circular_mean, hypothesis_count, resolve_symmetry, transform_to_map,
    wrap_angle, yaw_difference, ClassId, ClassRegistry, OrientedBox, PlanarPose,
};
use crate::stream::FrameRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub move_pos_threshold: f64,
    pub move_yaw_threshold: f64,
    pub confirm_count: usize,
    pub confirm_window: f64,
    pub history_capacity: usize,
    pub prune_after_tentative: f64,
    pub prune_after_confirmed: f64,
    pub stationary_reentry_frames: u32,
    pub orientation_outlier_threshold: f64,
    pub orientation_outlier_frames: u32,
    /// Lead in raw-observation votes a symmetry hypothesis needs over the
    /// current yaw anchor before the tracklet switches to it.
    pub flip_vote_margin: u32,
    /// Observations required before the trajectory fit is trusted for
    /// motion detection.
    pub motion_min_history: usize,
    pub gate_scale: f64,
    /// An unmatched detection only starts a tracklet when it lies beyond
    /// this multiple of the gate from every same-class tracklet.
    pub spawn_gate_scale: f64,
    /// Sensor mount pose in the robot frame.
    pub sensor_offset: PlanarPose,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            move_pos_threshold: 0.05,
            move_yaw_threshold: 2.5f64.to_radians(),
            confirm_count: 3,
            confirm_window: 2.0,
            history_capacity: 20,
            prune_after_tentative: 3.0,
            prune_after_confirmed: 5.0,
            stationary_reentry_frames: 5,
            orientation_outlier_threshold: 45f64.to_radians(),
            orientation_outlier_frames: 3,
            flip_vote_margin: 8,
            motion_min_history: 20,
            gate_scale: 1.0,
            spawn_gate_scale: 2.0,
            sensor_offset: PlanarPose::identity(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("move_pos_threshold", self.move_pos_threshold),
            ("move_yaw_threshold", self.move_yaw_threshold),
            ("confirm_window", self.confirm_window),
            ("prune_after_tentative", self.prune_after_tentative),
            ("prune_after_confirmed", self.prune_after_confirmed),
            (
                "orientation_outlier_threshold",
                self.orientation_outlier_threshold,
            ),
            ("gate_scale", self.gate_scale),
            ("spawn_gate_scale", self.spawn_gate_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!(
                    "tracker.{name} must be positive, got {v}"
                )));
            }
        }
        let counts = [
            ("confirm_count", self.confirm_count),
            ("history_capacity", self.history_capacity),
            (
                "stationary_reentry_frames",
                self.stationary_reentry_frames as usize,
            ),
            (
                "orientation_outlier_frames",
                self.orientation_outlier_frames as usize,
            ),
            ("flip_vote_margin", self.flip_vote_margin as usize),
            ("motion_min_history", self.motion_min_history),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::config(format!("tracker.{name} must be at least 1")));
            }
        }
        if self.motion_min_history < 2 || self.motion_min_history > self.history_capacity {
            return Err(Error::config(
                "tracker.motion_min_history must lie between 2 and tracker.history_capacity",
            ));
        }
        if self.spawn_gate_scale < self.gate_scale {
            return Err(Error::config(
                "tracker.spawn_gate_scale must not be below tracker.gate_scale",
            ));
        }
        if !self.sensor_offset.is_finite() {
            return Err(Error::config("tracker.sensor_offset is not finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lifecycle {
    Tentative,
    Confirmed,
    Lost,
}

impl Lifecycle {
    pub fn as_str(self) -> &'static str {
        match self {
            Lifecycle::Tentative => "tentative",
            Lifecycle::Confirmed => "confirmed",
            Lifecycle::Lost => "lost",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionState {
    Stationary,
    Moving,
}

/// Moving iff the center moved more than `move_pos_threshold` or the yaw
/// turned more than `move_yaw_threshold` between two consecutive poses.
pub fn detect_motion(prev: &OrientedBox, curr: &OrientedBox, config: &TrackerConfig) -> MotionState {
    if center_distance(prev, curr) > config.move_pos_threshold
        || yaw_difference(prev.yaw(), curr.yaw()) > config.move_yaw_threshold
    {
        MotionState::Moving
    } else {
        MotionState::Stationary
    }
}

/// Whether some interval of length `window` holds at least `count` of the
/// (ascending) timestamps.
pub fn confirmation_qualifies(timestamps: &[f64], count: usize, window: f64) -> bool {
    if count == 0 {
        return true;
    }
    if timestamps.len() < count {
        return false;
    }
    timestamps
        .windows(count)
        .any(|w| w[count - 1] - w[0] <= window)
}

#[derive(Debug, Clone)]
pub struct Tracklet {
    id: TrackId,
    class_id: ClassId,
    symmetry_planes: u8,
    history: VecDeque<(f64, OrientedBox)>,
    yaw_history: VecDeque<f64>,
    lifecycle: Lifecycle,
    motion_state: MotionState,
    output_pose: OrientedBox,
    match_timestamps: Vec<f64>,
    miss_count: u32,
    quiet_frames: u32,
    outlier_streak: u32,
    /// Per symmetry hypothesis, relative to the current yaw anchor: how many
    /// raw observations pointed that way.
    hypothesis_votes: Vec<u32>,
}

impl Tracklet {
    /// Starts a tentative tracklet. Symmetric classes are anchored at the
    /// canonical member of the observed yaw's hypothesis set.
    pub fn spawn(
        id: TrackId,
        timestamp: f64,
        obs: OrientedBox,
        symmetry_planes: u8,
        config: &TrackerConfig,
    ) -> Result<Self> {
        let yaw = canonical_yaw(obs.yaw(), symmetry_planes)?;
        let n = hypothesis_count(symmetry_planes)?;
        let mut hypothesis_votes = vec![0; n];
        hypothesis_votes[hypothesis_offset(obs.yaw(), yaw, n)] = 1;
        let obs = obs.with_yaw(yaw);
        let mut history = VecDeque::with_capacity(config.history_capacity);
        history.push_back((timestamp, obs.clone()));
        let mut yaw_history = VecDeque::with_capacity(config.history_capacity);
        yaw_history.push_back(yaw);
        Ok(Self {
            id,
            class_id: obs.class_id.clone(),
            symmetry_planes,
            history,
            yaw_history,
            lifecycle: Lifecycle::Tentative,
            motion_state: MotionState::Stationary,
            output_pose: obs,
            match_timestamps: vec![timestamp],
            miss_count: 0,
            quiet_frames: 0,
            outlier_streak: 0,
            hypothesis_votes,
        })
    }

    pub fn id(&self) -> TrackId {
        self.id
    }

    pub fn class_id(&self) -> &ClassId {
        &self.class_id
    }

    pub fn lifecycle(&self) -> Lifecycle {
        self.lifecycle
    }

    pub fn motion_state(&self) -> MotionState {
        self.motion_state
    }

    pub fn output_pose(&self) -> &OrientedBox {
        &self.output_pose
    }

    pub fn history(&self) -> impl ExactSizeIterator<Item = &(f64, OrientedBox)> {
        self.history.iter()
    }

    pub fn match_timestamps(&self) -> &[f64] {
        &self.match_timestamps
    }

    pub fn miss_count(&self) -> u32 {
        self.miss_count
    }

    pub fn last_match(&self) -> f64 {
        *self.match_timestamps.last().expect("spawned with one match")
    }

    /// Folds one matched observation into the tracklet and returns the new
    /// published pose.
    pub fn update(
        &mut self,
        timestamp: f64,
        obs: OrientedBox,
        config: &TrackerConfig,
    ) -> Result<&OrientedBox> {
        let last_t = self.history.back().map(|h| h.0);
        if last_t.is_some_and(|t| timestamp <= t) {
            return Err(Error::StreamOrder {
                last: last_t.unwrap(),
                got: timestamp,
            });
        }

        let mut yaw = resolve_symmetry(obs.yaw(), self.output_pose.yaw(), self.symmetry_planes)?;
        yaw += self.vote_hypothesis(obs.yaw(), yaw, config.flip_vote_margin);
        let obs = obs.with_yaw(yaw);

        // orientation outliers are judged against the history before this frame
        let outlier = match circular_mean_of(&self.yaw_history) {
            Some(mean) => yaw_difference(yaw, mean) > config.orientation_outlier_threshold,
            None => false,
        };
        self.outlier_streak = if outlier { self.outlier_streak + 1 } else { 0 };

        if self.history.len() == config.history_capacity {
            self.history.pop_front();
        }
        self.history.push_back((timestamp, obs));
        if self.yaw_history.len() == config.history_capacity {
            self.yaw_history.pop_front();
        }
        self.yaw_history.push_back(yaw);

        if self.outlier_streak >= config.orientation_outlier_frames {
            let keep = config.orientation_outlier_frames as usize;
            while self.yaw_history.len() > keep {
                self.yaw_history.pop_front();
            }
            self.outlier_streak = 0;
        }

        self.update_motion_state(config);
        self.match_timestamps.push(timestamp);
        self.miss_count = 0;
        self.output_pose = stabilize_pose(self, config)?;
        Ok(&self.output_pose)
    }

    /// Records which hypothesis the raw yaw supports relative to its resolved
    /// value. Once another hypothesis leads the current anchor by
    /// `flip_vote_margin` votes, every stored yaw is rotated onto it; the
    /// returned offset is to be added to `resolved`.
    fn vote_hypothesis(&mut self, raw: f64, resolved: f64, margin: u32) -> f64 {
        let n = self.hypothesis_votes.len();
        if n < 2 {
            return 0.0;
        }
        let step = 2.0 * std::f64::consts::PI / n as f64;
        self.hypothesis_votes[hypothesis_offset(raw, resolved, n)] += 1;
        let (best, &votes) = self
            .hypothesis_votes
            .iter()
            .enumerate()
            .max_by_key(|&(i, v)| (*v, std::cmp::Reverse(i)))
            .expect("at least two hypotheses");
        if best == 0 || votes < self.hypothesis_votes[0] + margin {
            return 0.0;
        }
        let shift = best as f64 * step;
        self.hypothesis_votes.rotate_left(best);
        for y in &mut self.yaw_history {
            *y = wrap_angle(*y + shift);
        }
        for (_, b) in &mut self.history {
            *b = b.clone().with_yaw(b.yaw() + shift);
        }
        self.output_pose = self.output_pose.clone().with_yaw(self.output_pose.yaw() + shift);
        shift
    }

    /// Motion is judged on consecutive poses of a least-squares trajectory
    /// fitted to the history, which keeps detector jitter from reading as
    /// movement.
    fn update_motion_state(&mut self, config: &TrackerConfig) {
        let moving = match self.fitted_step(config) {
            Some((prev, curr)) => detect_motion(&prev, &curr, config) == MotionState::Moving,
            None => false,
        };
        match (self.motion_state, moving) {
            (_, true) => {
                self.motion_state = MotionState::Moving;
                self.quiet_frames = 0;
            }
            (MotionState::Moving, false) => {
                self.quiet_frames += 1;
                if self.quiet_frames >= config.stationary_reentry_frames {
                    self.motion_state = MotionState::Stationary;
                    self.quiet_frames = 0;
                }
            }
            (MotionState::Stationary, false) => {}
        }
    }

    fn fitted_step(&self, config: &TrackerConfig) -> Option<(OrientedBox, OrientedBox)> {
        let n = self.history.len();
        if n < config.motion_min_history.max(2) {
            return None;
        }
        let t_now = self.history[n - 1].0;
        let t_prev = self.history[n - 2].0;
        let times: Vec<f64> = self.history.iter().map(|h| h.0).collect();
        let [fx, fy, fz] = self.center_fit()?;

        let template = &self.history[n - 1].1;
        let (yaw_prev, yaw_now) = if self.yaw_history.len() >= config.motion_min_history.max(2) {
            let mean = circular_mean_of(&self.yaw_history)?;
            let k = self.yaw_history.len();
            let unwrapped: Vec<f64> = self
                .yaw_history
                .iter()
                .map(|&y| mean + wrap_angle(y - mean))
                .collect();
            let fyaw = LineFit::new(&times[n - k..], &unwrapped)?;
            (fyaw.at(t_prev), fyaw.at(t_now))
        } else {
            (template.yaw(), template.yaw())
        };
        let at = |t: f64, yaw: f64| {
            template
                .clone()
                .with_center([fx.at(t), fy.at(t), fz.at(t)])
                .with_yaw(yaw)
        };
        Some((at(t_prev, yaw_prev), at(t_now, yaw_now)))
    }

    fn center_fit(&self) -> Option<[LineFit; 3]> {
        let times: Vec<f64> = self.history.iter().map(|h| h.0).collect();
        let axis = |k: usize| -> Vec<f64> { self.history.iter().map(|h| h.1.center[k]).collect() };
        Some([
            LineFit::new(&times, &axis(0))?,
            LineFit::new(&times, &axis(1))?,
            LineFit::new(&times, &axis(2))?,
        ])
    }

    /// Pose offered to association. While moving the published pose is a
    /// raw observation, so the trajectory fit at the latest history time is
    /// used instead.
    pub fn predicted_pose(&self) -> OrientedBox {
        if self.motion_state == MotionState::Moving {
            if let (Some(fit), Some((t, _))) = (self.center_fit(), self.history.back()) {
                return self
                    .output_pose
                    .clone()
                    .with_center(fit.map(|f| f.at(*t)));
            }
        }
        self.output_pose.clone()
    }
}

/// Index `k` such that `raw` is `resolved` turned by `k` symmetry steps.
fn hypothesis_offset(raw: f64, resolved: f64, n: usize) -> usize {
    let step = 2.0 * std::f64::consts::PI / n as f64;
    ((wrap_angle(raw - resolved) / step).round() as i64).rem_euclid(n as i64) as usize
}

fn circular_mean_of(yaws: &VecDeque<f64>) -> Option<f64> {
    let (a, b) = yaws.as_slices();
    if b.is_empty() {
        circular_mean(a, None).ok()
    } else {
        let all: Vec<f64> = yaws.iter().copied().collect();
        circular_mean(&all, None).ok()
    }
}

struct LineFit {
    t_mean: f64,
    v_mean: f64,
    slope: f64,
}

impl LineFit {
    fn new(t: &[f64], v: &[f64]) -> Option<Self> {
        let n = t.len() as f64;
        let t_mean = t.iter().sum::<f64>() / n;
        let v_mean = v.iter().sum::<f64>() / n;
        let mut stt = 0.0;
        let mut stv = 0.0;
        for (ti, vi) in t.iter().zip(v) {
            stt += (ti - t_mean) * (ti - t_mean);
            stv += (ti - t_mean) * (vi - v_mean);
        }
        (stt > 0.0).then(|| Self {
            t_mean,
            v_mean,
            slope: stv / stt,
        })
    }

    fn at(&self, t: f64) -> f64 {
        self.v_mean + self.slope * (t - self.t_mean)
    }
}

/// Published pose for a tracklet whose latest observation is already the
/// last history entry: the raw (symmetry-resolved) observation while
/// moving, otherwise the mean center and circular-mean yaw of the history.
pub fn stabilize_pose(track: &Tracklet, _config: &TrackerConfig) -> Result<OrientedBox> {
    let (_, latest) = track
        .history
        .back()
        .ok_or_else(|| Error::InternalState(format!("tracklet {} has no history", track.id)))?;
    if track.motion_state == MotionState::Moving {
        return Ok(latest.clone());
    }
    let n = track.history.len() as f64;
    let mut c = [0.0; 3];
    for (_, b) in &track.history {
        for k in 0..3 {
            c[k] += b.center[k];
        }
    }
    let center = c.map(|v| v / n);
    let yaw = match circular_mean_of(&track.yaw_history) {
        Some(y) => y,
        // antipodal cancellation: keep the latest resolved yaw
        None => latest.yaw(),
    };
    Ok(latest.clone().with_center(center).with_yaw(yaw))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotEntry {
    pub id: TrackId,
    pub class_id: ClassId,
    pub lifecycle: Lifecycle,
    pub motion_state: MotionState,
    pub output_pose: OrientedBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerSnapshot {
    pub timestamp: f64,
    /// Active tracklets in ascending id order.
    pub entries: Vec<SnapshotEntry>,
}

impl TrackerSnapshot {
    pub fn confirmed(&self) -> impl Iterator<Item = &SnapshotEntry> {
        self.entries
            .iter()
            .filter(|e| e.lifecycle == Lifecycle::Confirmed)
    }
}

/// Single-owner tracking state: the active registry, an archive of lost
/// tracklets and the id counter.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    classes: ClassRegistry,
    active: BTreeMap<TrackId, Tracklet>,
    archive: Vec<Tracklet>,
    next_id: TrackId,
    last_timestamp: Option<f64>,
}

impl Tracker {
    pub fn new(config: TrackerConfig, classes: ClassRegistry) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            classes,
            active: BTreeMap::new(),
            archive: Vec::new(),
            next_id: 1,
            last_timestamp: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn active(&self) -> impl Iterator<Item = &Tracklet> {
        self.active.values()
    }

    pub fn archive(&self) -> &[Tracklet] {
        &self.archive
    }

    pub fn get(&self, id: TrackId) -> Option<&Tracklet> {
        self.active
            .get(&id)
            .or_else(|| self.archive.iter().find(|t| t.id == id))
    }

    /// Ingests a sensor-frame detection record.
    pub fn ingest_frame(&mut self, frame: &FrameRecord) -> Result<TrackerSnapshot> {
        let boxes = frame
            .boxes
            .iter()
            .map(|b| transform_to_map(&b.bbox, &frame.robot, &self.config.sensor_offset))
            .collect::<Result<Vec<_>>>()?;
        self.ingest_map(frame.timestamp, boxes)
    }

    /// Ingests detections already expressed in the map frame.
    pub fn ingest_map(
        &mut self,
        timestamp: f64,
        detections: Vec<OrientedBox>,
    ) -> Result<TrackerSnapshot> {
        if !timestamp.is_finite() {
            return Err(Error::invalid("non-finite frame timestamp"));
        }
        if let Some(last) = self.last_timestamp {
            if timestamp <= last {
                return Err(Error::StreamOrder {
                    last,
                    got: timestamp,
                });
            }
        }
        self.last_timestamp = Some(timestamp);

        let predicted: Vec<(TrackId, OrientedBox)> = self
            .active
            .values()
            .map(|t| (t.id, t.predicted_pose()))
            .collect();
        let assoc = associate(&detections, &predicted, self.config.gate_scale)?;

        let mut detections: Vec<Option<OrientedBox>> = detections.into_iter().map(Some).collect();
        for &(id, di, _) in &assoc.matches {
            let obs = detections[di].take().expect("detections matched once");
            let track = self
                .active
                .get_mut(&id)
                .ok_or_else(|| Error::InternalState(format!("matched unknown tracklet {id}")))?;
            track.update(timestamp, obs, &self.config)?;
        }
        for &id in &assoc.unmatched_tracklets {
            if let Some(t) = self.active.get_mut(&id) {
                t.miss_count += 1;
            }
        }
        let mut occupied = predicted;
        for &di in &assoc.unmatched_detections {
            let obs = detections[di].take().expect("unmatched detection unused");
            let crowded = occupied.iter().any(|(_, b)| {
                b.class_id == obs.class_id
                    && center_distance(&obs, b)
                        <= self.config.spawn_gate_scale * gate_threshold(&obs, b)
            });
            if crowded {
                continue;
            }
            let planes = self.classes.symmetry_planes(&obs.class_id);
            let id = self.next_id;
            self.next_id += 1;
            let t = Tracklet::spawn(id, timestamp, obs, planes, &self.config)?;
            occupied.push((id, t.output_pose.clone()));
            self.active.insert(id, t);
        }

        self.manage(timestamp);
        Ok(self.snapshot(timestamp, false))
    }

    /// Confirms tracklets with enough recent matches and retires those that
    /// have gone unmatched for too long.
    pub fn manage(&mut self, now: f64) {
        let cfg = &self.config;
        let mut lost = Vec::new();
        for t in self.active.values_mut() {
            if t.lifecycle == Lifecycle::Tentative
                && confirmation_qualifies(&t.match_timestamps, cfg.confirm_count, cfg.confirm_window)
            {
                t.lifecycle = Lifecycle::Confirmed;
            }
            let limit = match t.lifecycle {
                Lifecycle::Confirmed => cfg.prune_after_confirmed,
                _ => cfg.prune_after_tentative,
            };
            if now - t.last_match() > limit {
                lost.push(t.id);
            }
        }
        for id in lost {
            if let Some(mut t) = self.active.remove(&id) {
                t.lifecycle = Lifecycle::Lost;
                self.archive.push(t);
            }
        }
    }

    pub fn snapshot(&self, now: f64, confirmed_only: bool) -> TrackerSnapshot {
        let entries = self
            .active
            .values()
            .filter(|t| !confirmed_only || t.lifecycle == Lifecycle::Confirmed)
            .map(|t| SnapshotEntry {
                id: t.id,
                class_id: t.class_id.clone(),
                lifecycle: t.lifecycle,
                motion_state: t.motion_state,
                output_pose: t.output_pose.clone(),
            })
            .collect();
        TrackerSnapshot {
            timestamp: now,
            entries,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn sw(x: f64, yaw: f64) -> OrientedBox {
        OrientedBox::new([x, 0.0, 0.41], [1.6, 0.8, 0.82], yaw, ClassId::Sw).unwrap()
    }

    fn mw(x: f64, y: f64, yaw: f64) -> OrientedBox {
        OrientedBox::new([x, y, 0.35], [1.2, 0.8, 0.7], yaw, ClassId::Mw).unwrap()
    }

    fn tracker() -> Tracker {
        Tracker::new(TrackerConfig::default(), ClassRegistry::default()).unwrap()
    }

    #[test]
    fn motion_thresholds() {
        let cfg = TrackerConfig::default();
        let a = mw(0.0, 0.0, 0.0);
        assert_eq!(detect_motion(&a, &mw(0.06, 0.0, 0.0), &cfg), MotionState::Moving);
        assert_eq!(
            detect_motion(&a, &mw(0.0, 0.0, 3f64.to_radians()), &cfg),
            MotionState::Moving
        );
        assert_eq!(
            detect_motion(&a, &mw(0.04, 0.0, 2f64.to_radians()), &cfg),
            MotionState::Stationary
        );
    }

    #[test]
    fn confirmation_windows() {
        assert!(confirmation_qualifies(&[0.0, 0.9, 1.9], 3, 2.0));
        assert!(!confirmation_qualifies(&[0.0, 1.5, 3.0], 3, 2.0));
        assert!(confirmation_qualifies(&[0.0, 1.5, 3.0, 3.2], 3, 2.0));
        assert!(!confirmation_qualifies(&[0.0, 0.1], 3, 2.0));
    }

    #[test]
    fn cold_start_is_tentative() {
        let mut t = tracker();
        let snap = t.ingest_map(0.0, vec![mw(0.0, 0.0, 0.0), mw(5.0, 0.0, 0.0)]).unwrap();
        assert_eq!(snap.entries.len(), 2);
        assert!(snap.entries.iter().all(|e| e.lifecycle == Lifecycle::Tentative));
        assert_eq!(snap.confirmed().count(), 0);
    }

    #[test]
    fn confirms_on_third_frame() {
        let mut t = tracker();
        for (i, ts) in [0.0, 0.5, 1.0].into_iter().enumerate() {
            let snap = t.ingest_map(ts, vec![mw(1.0, 1.0, 0.2)]).unwrap();
            let expected = if i == 2 {
                Lifecycle::Confirmed
            } else {
                Lifecycle::Tentative
            };
            assert_eq!(snap.entries[0].lifecycle, expected);
            assert_eq!(snap.entries[0].id, 1);
        }
    }

    #[test]
    fn lifecycle_step_through() {
        // tentative tracklet: last match at 0.0, pruned once now - 0.0 > 3.0
        let mut t = tracker();
        t.ingest_map(0.0, vec![mw(0.0, 0.0, 0.0)]).unwrap();
        assert_eq!(t.ingest_map(3.0, vec![]).unwrap().entries.len(), 1);
        assert!(t.ingest_map(3.1, vec![]).unwrap().entries.is_empty());
        assert_eq!(t.archive().len(), 1);
        assert_eq!(t.archive()[0].lifecycle(), Lifecycle::Lost);
        assert_eq!(t.archive()[0].miss_count(), 2);

        // confirmed tracklet survives 5 s without matches, not 5.1 s
        let mut t = tracker();
        for ts in [0.0, 0.1, 0.2] {
            t.ingest_map(ts, vec![mw(0.0, 0.0, 0.0)]).unwrap();
        }
        assert_eq!(t.ingest_map(5.2, vec![]).unwrap().entries.len(), 1);
        assert!(t.ingest_map(5.3, vec![]).unwrap().entries.is_empty());
    }

    #[test]
    fn rejects_non_monotone_time() {
        let mut t = tracker();
        t.ingest_map(1.0, vec![]).unwrap();
        assert!(matches!(t.ingest_map(1.0, vec![]), Err(Error::StreamOrder { .. })));
        assert!(matches!(t.ingest_map(0.5, vec![]), Err(Error::StreamOrder { .. })));
    }

    #[test]
    fn ids_are_never_reused() {
        let mut t = tracker();
        t.ingest_map(0.0, vec![mw(0.0, 0.0, 0.0)]).unwrap();
        t.ingest_map(4.0, vec![]).unwrap();
        let snap = t.ingest_map(4.1, vec![mw(0.0, 0.0, 0.0)]).unwrap();
        assert_eq!(snap.entries[0].id, 2);
    }

    #[test]
    fn stationary_mean_of_five() {
        let cfg = TrackerConfig::default();
        let mut tr = Tracklet::spawn(1, 0.0, mw(0.0, 0.0, 0.30), 0, &cfg).unwrap();
        for i in 1..4 {
            tr.update(i as f64 * 0.1, mw(0.0, 0.0, 0.30), &cfg).unwrap();
        }
        let out = tr.update(0.4, mw(0.0, 0.0, 0.31), &cfg).unwrap();
        // arithmetic mean of 4 × 0.30 and 0.31
        let oracle = (4.0 * 0.30 + 0.31) / 5.0;
        assert!((out.yaw() - oracle).abs() < 1e-6, "{}", out.yaw());
        assert!((out.yaw() - 0.302).abs() < 1e-6);
    }

    #[test]
    fn flip_is_resolved_before_averaging() {
        let cfg = TrackerConfig::default();
        let mut tr = Tracklet::spawn(1, 0.0, sw(0.0, 0.0), 1, &cfg).unwrap();
        tr.update(0.1, sw(0.0, PI + 0.01), &cfg).unwrap();
        let (_, last) = tr.history().last().unwrap();
        assert!((last.yaw() - 0.01).abs() < 1e-12);
        assert!((tr.output_pose().yaw() - 0.005).abs() < 1e-6);
        assert_eq!(tr.motion_state(), MotionState::Stationary);
    }

    #[test]
    fn symmetric_birth_is_canonical() {
        let cfg = TrackerConfig::default();
        let tr = Tracklet::spawn(1, 0.0, sw(0.0, PI - 0.2), 1, &cfg).unwrap();
        assert!((tr.output_pose().yaw() + 0.2).abs() < 1e-12);
    }

    #[test]
    fn vote_margin_reanchors_boundary_birth() {
        let cfg = TrackerConfig::default();
        // object at 1.55 rad; the first detection lands across the canonical
        // boundary and is anchored half a turn away
        let mut tr = Tracklet::spawn(1, 0.0, sw(0.0, 1.65), 1, &cfg).unwrap();
        assert!(yaw_difference(tr.output_pose().yaw(), 1.65 - PI) < 1e-12);
        // the birth detection already voted for the other side
        for k in 1..cfg.flip_vote_margin - 1 {
            tr.update(0.1 * k as f64, sw(0.0, 1.55), &cfg).unwrap();
            assert!(yaw_difference(tr.output_pose().yaw(), 1.6) > 3.0, "frame {k}");
        }
        tr.update(0.7, sw(0.0, 1.55), &cfg).unwrap();
        assert!(yaw_difference(tr.output_pose().yaw(), 1.56) < 0.02);
        assert_eq!(tr.motion_state(), MotionState::Stationary);
        // later minority flips are resolved away
        tr.update(0.9, sw(0.0, 1.55 - PI), &cfg).unwrap();
        assert!(yaw_difference(tr.output_pose().yaw(), 1.56) < 0.02);
    }

    #[test]
    fn four_fold_birth_is_canonical() {
        let cfg = TrackerConfig::default();
        let msu = |yaw: f64| OrientedBox::new([1.0, 0.0, 0.9], [0.8, 0.8, 1.8], yaw, ClassId::Msu).unwrap();
        let tr = Tracklet::spawn(1, 0.0, msu(0.1 + FRAC_PI_2), 2, &cfg).unwrap();
        assert!((tr.output_pose().yaw() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn moving_passthrough_and_reentry() {
        let cfg = TrackerConfig::default();
        let mut tr = Tracklet::spawn(1, 0.0, mw(0.0, 0.0, 0.0), 0, &cfg).unwrap();
        let mut t = 0.0;
        for _ in 0..12 {
            t += 0.1;
            tr.update(t, mw(0.0, 0.0, 0.0), &cfg).unwrap();
        }
        assert_eq!(tr.motion_state(), MotionState::Stationary);
        // 1 m/s drift: 0.1 m per frame along the fit
        let mut x = 0.0;
        for _ in 0..10 {
            t += 0.1;
            x += 0.1;
            tr.update(t, mw(x, 0.0, 0.0), &cfg).unwrap();
        }
        assert_eq!(tr.motion_state(), MotionState::Moving);
        let (_, last) = tr.history().last().unwrap();
        assert_eq!(tr.output_pose(), last);
        assert_eq!(tr.output_pose().center[0], x);

        // stop: needs the fit to settle and then 5 quiet frames
        let mut quiet = 0;
        while tr.motion_state() == MotionState::Moving {
            t += 0.1;
            tr.update(t, mw(x, 0.0, 0.0), &cfg).unwrap();
            quiet += 1;
            assert!(quiet < 40);
        }
        assert!(quiet >= cfg.stationary_reentry_frames as usize);
    }

    #[test]
    fn orientation_outlier_resets_history() {
        let cfg = TrackerConfig::default();
        let mut tr = Tracklet::spawn(1, 0.0, mw(0.0, 0.0, 0.0), 0, &cfg).unwrap();
        let mut t = 0.0;
        for _ in 0..10 {
            t += 0.1;
            tr.update(t, mw(0.0, 0.0, 0.0), &cfg).unwrap();
        }
        for k in 0..3 {
            t += 0.1;
            tr.update(t, mw(0.0, 0.0, 1.2), &cfg).unwrap();
            if k < 2 {
                assert!(tr.yaw_history.len() > 3);
            }
        }
        assert_eq!(tr.yaw_history.len(), 3);
        assert!((tr.output_pose().yaw() - 1.2).abs() < 1e-9);
    }

    #[test]
    fn stabilize_requires_history() {
        let cfg = TrackerConfig::default();
        let mut tr = Tracklet::spawn(1, 0.0, mw(0.0, 0.0, 0.0), 0, &cfg).unwrap();
        tr.history.clear();
        assert!(matches!(stabilize_pose(&tr, &cfg), Err(Error::InternalState(_))));
    }

    #[test]
    fn snapshot_filters_and_sorts() {
        let mut t = tracker();
        assert!(t.snapshot(0.0, false).entries.is_empty());
        for ts in [0.0, 0.1, 0.2] {
            let mut dets = vec![mw(0.0, 0.0, 0.0), mw(4.0, 0.0, 0.0)];
            if ts == 0.2 {
                dets.push(mw(8.0, 0.0, 0.0));
            }
            t.ingest_map(ts, dets).unwrap();
        }
        let all = t.snapshot(0.2, false);
        assert_eq!(all.entries.len(), 3);
        assert!(all.entries.windows(2).all(|w| w[0].id < w[1].id));
        assert_eq!(t.snapshot(0.2, true).entries.len(), 2);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = TrackerConfig {
            confirm_count: 0,
            ..TrackerConfig::default()
        };
        assert!(matches!(
            Tracker::new(cfg, ClassRegistry::default()),
            Err(Error::Config(_))
        ));
    }
}
