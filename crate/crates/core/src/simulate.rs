//! Scenario simulator and noisy detector emulator.
//!
//! Ground truth is generated in the map frame from a [`TrialSpec`]. The
//! emulator corrupts it into a sensor-frame detection stream; stale ego
//! poses are injected afterwards by [`apply_latency`].

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::doe::{Occlusion, TrialSpec};
use crate::error::{Error, Result};
use crate::geometry::{
    canonical_yaw, hypothesis_count, transform_to_sensor, wrap_angle, ClassId, ClassRegistry,
    OrientedBox, PlanarPose,
};
use crate::stream::{CoordFrame, FrameRecord, LabeledBox, Stream, StreamKind};

/// Scenario kinematics shared by every trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub duration: f64,
    pub rate: f64,
    /// Speed of objects with linear motion, m/s.
    pub object_linear_speed: f64,
    /// Yaw rate of objects with angular motion, rad/s.
    pub object_angular_speed: f64,
    /// Lateral distance between objects in two-object layouts, m.
    pub object_spacing: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            duration: 20.0,
            rate: 10.0,
            object_linear_speed: 0.2,
            object_angular_speed: 0.2,
            object_spacing: 2.0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !(self.rate > 0.0) {
            return Err(Error::config("sim.duration and sim.rate must be positive"));
        }
        if !(self.object_linear_speed >= 0.0) || !(self.object_angular_speed >= 0.0) {
            return Err(Error::config("object speeds must be non-negative"));
        }
        if !(self.object_spacing >= 0.0) {
            return Err(Error::config("sim.object_spacing must be non-negative"));
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.rate).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Per-axis center noise, m.
    pub pos_sigma: f64,
    pub yaw_sigma: f64,
    /// Per frame and symmetric object.
    pub flip_prob: f64,
    /// Indexed by occlusion level: none, < 20 %, > 40 %.
    pub dropout: [f64; 3],
    /// Noise multiplier per occlusion level.
    pub sigma_scale: [f64; 3],
    /// Expected false positives per frame for every class in the scene.
    pub fp_rate: f64,
    pub fp_rate_by_class: BTreeMap<ClassId, f64>,
    /// Relative extent jitter of false positives.
    pub fp_extent_jitter: f64,
    /// Map-frame rectangle `[x_min, x_max, y_min, y_max]` for false positives.
    pub fp_region: [f64; 4],
    /// Age of the ego pose used to place a sweep in the map, s.
    pub latency: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        let fp_rate_by_class = [(ClassId::Msu, 0.02)].into_iter().collect();
        Self {
            pos_sigma: 0.1,
            yaw_sigma: 3f64.to_radians(),
            flip_prob: 0.1,
            dropout: [0.02, 0.15, 0.4],
            sigma_scale: [1.0, 1.5, 2.5],
            fp_rate: 0.1,
            fp_rate_by_class,
            fp_extent_jitter: 0.1,
            fp_region: [-1.0, 8.0, -4.0, 4.0],
            latency: 0.05,
        }
    }
}

impl NoiseModel {
    /// No corruption at all.
    pub fn zero() -> Self {
        Self {
            pos_sigma: 0.0,
            yaw_sigma: 0.0,
            flip_prob: 0.0,
            dropout: [0.0; 3],
            sigma_scale: [1.0; 3],
            fp_rate: 0.0,
            fp_rate_by_class: BTreeMap::new(),
            fp_extent_jitter: 0.0,
            fp_region: [-1.0, 8.0, -4.0, 4.0],
            latency: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::config(format!("noise.{name} = {p} is not a probability")))
            }
        };
        let non_neg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("noise.{name} = {v} must be non-negative")))
            }
        };
        non_neg("pos_sigma", self.pos_sigma)?;
        non_neg("yaw_sigma", self.yaw_sigma)?;
        prob("flip_prob", self.flip_prob)?;
        for (o, p) in Occlusion::ALL.iter().zip(self.dropout) {
            prob(&format!("dropout.{}", o.key()), p)?;
        }
        for (o, s) in Occlusion::ALL.iter().zip(self.sigma_scale) {
            non_neg(&format!("sigma_scale.{}", o.key()), s)?;
        }
        non_neg("fp_rate", self.fp_rate)?;
        for (c, r) in &self.fp_rate_by_class {
            non_neg(&format!("fp_rate.{c}"), *r)?;
        }
        prob("fp_extent_jitter", self.fp_extent_jitter)?;
        non_neg("latency", self.latency)?;
        let [x0, x1, y0, y1] = self.fp_region;
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::config("noise.fp_region is empty"));
        }
        Ok(())
    }

    pub fn fp_rate_for(&self, class: &ClassId) -> f64 {
        self.fp_rate_by_class.get(class).copied().unwrap_or(self.fp_rate)
    }

    fn level(occlusion: Occlusion) -> usize {
        occlusion as usize
    }
}

/// Source of ego poses at arbitrary times.
pub trait PoseSource {
    fn pose_at(&self, t: f64) -> PlanarPose;
}

/// Constant forward speed and yaw rate from the origin, starting at `t = 0`.
/// Before that the robot rests at its start pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotMotion {
    pub linear: f64,
    pub angular: f64,
}

impl PoseSource for RobotMotion {
    fn pose_at(&self, t: f64) -> PlanarPose {
        let s = t.max(0.0);
        let heading = self.angular * s;
        let (x, y) = if self.angular.abs() < 1e-12 {
            (self.linear * s, 0.0)
        } else {
            let r = self.linear / self.angular;
            (r * heading.sin(), r * (1.0 - heading.cos()))
        };
        PlanarPose::new(x, y, heading, t)
    }
}

/// Piecewise-linear interpolation over sampled poses, clamped at the ends.
#[derive(Debug, Clone)]
pub struct SampledTrajectory {
    poses: Vec<PlanarPose>,
}

impl SampledTrajectory {
    pub fn new(poses: Vec<PlanarPose>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::invalid("empty trajectory"));
        }
        if poses.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
            return Err(Error::invalid("trajectory timestamps must increase"));
        }
        Ok(Self { poses })
    }
}

impl PoseSource for SampledTrajectory {
    fn pose_at(&self, t: f64) -> PlanarPose {
        let p = &self.poses;
        let i = p.partition_point(|q| q.timestamp <= t);
        if i == 0 {
            return PlanarPose::new(p[0].x, p[0].y, p[0].heading(), t);
        }
        if i == p.len() {
            let q = p[i - 1];
            return PlanarPose::new(q.x, q.y, q.heading(), t);
        }
        let (a, b) = (p[i - 1], p[i]);
        let f = (t - a.timestamp) / (b.timestamp - a.timestamp);
        PlanarPose::new(
            a.x + f * (b.x - a.x),
            a.y + f * (b.y - a.y),
            a.heading() + f * wrap_angle(b.heading() - a.heading()),
            t,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ObjectPlan {
    id: u64,
    start: [f64; 3],
    extent: [f64; 3],
    yaw0: f64,
    class_id: ClassId,
    velocity: [f64; 2],
    yaw_rate: f64,
}

impl ObjectPlan {
    fn box_at(&self, t: f64) -> Result<OrientedBox> {
        OrientedBox::new(
            [
                self.start[0] + self.velocity[0] * t,
                self.start[1] + self.velocity[1] * t,
                self.start[2],
            ],
            self.extent,
            self.yaw0 + self.yaw_rate * t,
            self.class_id.clone(),
        )
    }
}

/// Ground truth of one trial and the robot motion that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub stream: Stream,
    pub robot: RobotMotion,
    pub occlusion: Occlusion,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Robot and object trajectories for `trial`, sampled at `params.rate`.
///
/// Objects start `initial_distance` ahead of the robot start pose. The
/// initial yaw is random; for symmetric classes it is drawn from the
/// canonical range of the hypothesis set, so an object's labelled front is
/// well defined. Later yaws evolve continuously from there.
pub fn generate_ground_truth(
    trial: &TrialSpec,
    params: &SimParams,
    classes: &ClassRegistry,
    seed: u64,
) -> Result<GroundTruth> {
    params.validate()?;
    let spec = classes.require(&trial.class_id)?;
    let levels = &trial.levels;
    let mut rng = rng_for(seed, 2 * trial.trial_id as u64);

    let n = levels.num_objects as usize;
    let d = levels.initial_distance.meters();
    let mut objects = Vec::with_capacity(n);
    for i in 0..n {
        let lateral = (i as f64 - (n as f64 - 1.0) / 2.0) * params.object_spacing;
        let yaw0 = canonical_yaw(rng.random_range(-PI..PI), spec.symmetry_planes)?;
        let (velocity, yaw_rate) = {
            let m = levels.object_motion;
            let v = if m.linear { params.object_linear_speed } else { 0.0 };
            let w = if m.angular { params.object_angular_speed } else { 0.0 };
            ([v * yaw0.cos(), v * yaw0.sin()], w)
        };
        objects.push(ObjectPlan {
            id: i as u64 + 1,
            start: [d, lateral, 0.5 * spec.nominal_extent[2]],
            extent: spec.nominal_extent,
            yaw0,
            class_id: spec.class_id.clone(),
            velocity,
            yaw_rate,
        });
    }

    let robot = RobotMotion {
        linear: levels.robot_linear.speed(),
        angular: levels.robot_angular.rate(),
    };
    let mut stream = Stream::new(StreamKind::GroundTruth, CoordFrame::Map);
    for k in 0..params.frame_count() {
        let t = k as f64 / params.rate;
        let boxes = objects
            .iter()
            .map(|o| Ok(LabeledBox::with_id(o.id, o.box_at(t)?)))
            .collect::<Result<Vec<_>>>()?;
        stream.records.push(FrameRecord {
            timestamp: t,
            robot: robot.pose_at(t),
            boxes,
        });
    }
    Ok(GroundTruth {
        stream,
        robot,
        occlusion: levels.occlusion,
    })
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
}

/// Corrupts map-frame ground truth into a sensor-frame detection stream.
///
/// Per visible object and frame: drop with the occlusion level's dropout
/// probability, add Gaussian center and yaw noise scaled by the level's
/// sigma multiplier, and for symmetric classes swap the yaw for a random
/// non-identity symmetry hypothesis with `flip_prob`. Each class in the
/// scene then receives Poisson-distributed false positives inside
/// `fp_region`.
pub fn emulate_detector(
    gt: &Stream,
    occlusion: Occlusion,
    classes: &ClassRegistry,
    noise: &NoiseModel,
    sensor_offset: &PlanarPose,
    seed: u64,
    rng_stream: u64,
) -> Result<Stream> {
    noise.validate()?;
    let mut rng = rng_for(seed, rng_stream);
    let level = NoiseModel::level(occlusion);
    let scale = noise.sigma_scale[level];
    let dropout = noise.dropout[level];

    let mut scene_classes: Vec<ClassId> = gt
        .records
        .iter()
        .flat_map(|r| r.boxes.iter().map(|b| b.bbox.class_id.clone()))
        .collect();
    scene_classes.sort();
    scene_classes.dedup();

    let mut out = Stream::new(StreamKind::Detections, CoordFrame::Sensor);
    for rec in &gt.records {
        let mut boxes = Vec::with_capacity(rec.boxes.len());
        for b in &rec.boxes {
            if dropout > 0.0 && rng.random_bool(dropout) {
                continue;
            }
            let local = transform_to_sensor(&b.bbox, &rec.robot, sensor_offset)?;
            let mut center = local.center;
            for c in &mut center {
                *c += gaussian(&mut rng, noise.pos_sigma * scale);
            }
            let mut yaw = local.yaw() + gaussian(&mut rng, noise.yaw_sigma * scale);
            let planes = classes.symmetry_planes(&local.class_id);
            let n_hyp = hypothesis_count(planes)?;
            if n_hyp > 1 && noise.flip_prob > 0.0 && rng.random_bool(noise.flip_prob) {
                let k = rng.random_range(1..n_hyp);
                yaw += k as f64 * 2.0 * PI / n_hyp as f64;
            }
            let score = rng.random_range(0.6..1.0);
            let det = local.with_center(center).with_yaw(yaw).with_confidence(score)?;
            boxes.push(LabeledBox::anonymous(det));
        }
        for class in &scene_classes {
            let rate = noise.fp_rate_for(class);
            if rate <= 0.0 {
                continue;
            }
            let count = Poisson::new(rate).expect("positive rate").sample(&mut rng) as usize;
            let nominal = classes.require(class)?.nominal_extent;
            for _ in 0..count {
                let [x0, x1, y0, y1] = noise.fp_region;
                let j = noise.fp_extent_jitter;
                let extent = nominal.map(|e| {
                    let f = if j > 0.0 { rng.random_range(-j..=j) } else { 0.0 };
                    e * (1.0 + f)
                });
                let map_box = OrientedBox::new(
                    [
                        rng.random_range(x0..x1),
                        rng.random_range(y0..y1),
                        0.5 * extent[2],
                    ],
                    extent,
                    rng.random_range(-PI..PI),
                    class.clone(),
                )?
                .with_confidence(rng.random_range(0.3..0.7))?;
                boxes.push(LabeledBox::anonymous(transform_to_sensor(
                    &map_box,
                    &rec.robot,
                    sensor_offset,
                )?));
            }
        }
        out.records.push(FrameRecord {
            timestamp: rec.timestamp,
            robot: rec.robot,
            boxes,
        });
    }
    Ok(out)
}

/// Replaces each frame's ego pose by the pose `latency` seconds earlier, so
/// that map reconstruction uses a stale pose.
pub fn apply_latency(
    detections: &Stream,
    trajectory: &impl PoseSource,
    latency: f64,
) -> Result<Stream> {
    if !(latency >= 0.0) || !latency.is_finite() {
        return Err(Error::config(format!("latency {latency} must be non-negative")));
    }
    if latency == 0.0 {
        return Ok(detections.clone());
    }
    let span = match (detections.records.first(), detections.records.last()) {
        (Some(a), Some(b)) => b.timestamp - a.timestamp,
        _ => 0.0,
    };
    if latency > span {
        return Err(Error::config(format!(
            "latency {latency} s exceeds the stream span of {span} s"
        )));
    }
    let mut out = detections.clone();
    for rec in &mut out.records {
        let stale = trajectory.pose_at(rec.timestamp - latency);
        rec.robot = PlanarPose::new(stale.x, stale.y, stale.heading(), rec.timestamp);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTrial {
    pub ground_truth: Stream,
    pub detections: Stream,
}

/// Ground truth, emulated detections and latency for one trial.
pub fn simulate_trial(
    trial: &TrialSpec,
    params: &SimParams,
    classes: &ClassRegistry,
    noise: &NoiseModel,
    sensor_offset: &PlanarPose,
    seed: u64,
) -> Result<SimulatedTrial> {
    let gt = generate_ground_truth(trial, params, classes, seed)?;
    let raw = emulate_detector(
        &gt.stream,
        gt.occlusion,
        classes,
        noise,
        sensor_offset,
        seed,
        2 * trial.trial_id as u64 + 1,
    )?;
    let detections = apply_latency(&raw, &gt.robot, noise.latency)?;
    Ok(SimulatedTrial {
        ground_truth: gt.stream,
        detections,
    })
}
