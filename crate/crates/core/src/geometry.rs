//! Oriented-box and planar-pose arithmetic.
//!
//! Boxes are yaw-only (roll = pitch = 0). Every angle handed out by this
//! module is wrapped to `(-π, π]`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clipped footprints smaller than this are treated as empty.
const MIN_CLIP_AREA: f64 = 1e-12;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

/// Smallest absolute difference between two angles, in `[0, π]`.
pub fn yaw_difference(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Object category. The three built-in assets have short codes; anything
/// else is carried verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassId {
    /// Mobile workstation.
    Mw,
    /// Stationary workstation.
    Sw,
    /// Mobile storage unit.
    Msu,
    Custom(String),
}

impl ClassId {
    pub fn as_str(&self) -> &str {
        match self {
            ClassId::Mw => "MW",
            ClassId::Sw => "SW",
            ClassId::Msu => "MSU",
            ClassId::Custom(s) => s,
        }
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "MW" => ClassId::Mw,
            "SW" => ClassId::Sw,
            "MSU" => ClassId::Msu,
            "" => return Err(Error::invalid("empty class label")),
            other => ClassId::Custom(other.to_string()),
        })
    }
}

impl Serialize for ClassId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ClassId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Yaw-oriented 3D bounding box: center, extent (length, width, height) and
/// heading about the vertical axis.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientedBox {
    pub center: [f64; 3],
    extent: [f64; 3],
    yaw: f64,
    pub class_id: ClassId,
    confidence: f64,
}

impl OrientedBox {
    pub fn new(center: [f64; 3], extent: [f64; 3], yaw: f64, class_id: ClassId) -> Result<Self> {
        if center.iter().chain(extent.iter()).any(|v| !v.is_finite()) || !yaw.is_finite() {
            return Err(Error::invalid("box has non-finite components"));
        }
        if extent.iter().any(|&e| e <= 0.0) {
            return Err(Error::invalid(format!(
                "box extent must be strictly positive, got {extent:?}"
            )));
        }
        Ok(Self {
            center,
            extent,
            yaw: wrap_angle(yaw),
            class_id,
            confidence: 1.0,
        })
    }

    pub fn with_confidence(mut self, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::invalid(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        self.confidence = confidence;
        Ok(self)
    }

    pub fn with_yaw(mut self, yaw: f64) -> Self {
        self.yaw = wrap_angle(yaw);
        self
    }

    pub fn with_center(mut self, center: [f64; 3]) -> Self {
        self.center = center;
        self
    }

    pub fn extent(&self) -> [f64; 3] {
        self.extent
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn volume(&self) -> f64 {
        self.extent.iter().product()
    }

    /// Length of the footprint diagonal.
    pub fn footprint_diagonal(&self) -> f64 {
        self.extent[0].hypot(self.extent[1])
    }

    /// Footprint corners in counter-clockwise order.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let hl = 0.5 * self.extent[0];
        let hw = 0.5 * self.extent[1];
        [(hl, -hw), (hl, hw), (-hl, hw), (-hl, -hw)].map(|(u, v)| {
            [
                self.center[0] + c * u - s * v,
                self.center[1] + s * u + c * v,
            ]
        })
    }

    /// Whether a point lies inside the box (boundary included).
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let dz = p[2] - self.center[2];
        if dz.abs() > 0.5 * self.extent[2] {
            return false;
        }
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        u.abs() <= 0.5 * self.extent[0] && v.abs() <= 0.5 * self.extent[1]
    }

    fn is_finite(&self) -> bool {
        self.center.iter().all(|v| v.is_finite())
    }
}

/// Ego pose on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    heading: f64,
    pub timestamp: f64,
}

impl PlanarPose {
    pub fn new(x: f64, y: f64, heading: f64, timestamp: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
            timestamp,
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()
    }

    /// `self ∘ other`: `other` expressed in `self`'s frame, lifted to the
    /// parent frame. The result keeps `self`'s timestamp.
    pub fn compose(&self, other: &PlanarPose) -> PlanarPose {
        let [x, y] = self.apply([other.x, other.y]);
        PlanarPose::new(x, y, self.heading + other.heading, self.timestamp)
    }

    pub fn inverse(&self) -> PlanarPose {
        let (s, c) = self.heading.sin_cos();
        PlanarPose::new(
            -(c * self.x + s * self.y),
            s * self.x - c * self.y,
            -self.heading,
            self.timestamp,
        )
    }

    /// Maps a point from this pose's local frame to the parent frame.
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.heading.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }
}

fn apply_to_box(pose: &PlanarPose, b: &OrientedBox) -> OrientedBox {
    let [x, y] = pose.apply([b.center[0], b.center[1]]);
    b.clone()
        .with_center([x, y, b.center[2]])
        .with_yaw(b.yaw + pose.heading)
}

/// Lifts a sensor-frame box into the map frame through `robot ∘ sensor_offset`.
pub fn transform_to_map(
    b: &OrientedBox,
    robot: &PlanarPose,
    sensor_offset: &PlanarPose,
) -> Result<OrientedBox> {
    if !b.is_finite() || !robot.is_finite() || !sensor_offset.is_finite() {
        return Err(Error::invalid("non-finite box or pose in frame transform"));
    }
    Ok(apply_to_box(&robot.compose(sensor_offset), b))
}

/// Inverse of [`transform_to_map`].
pub fn transform_to_sensor(
    b: &OrientedBox,
    robot: &PlanarPose,
    sensor_offset: &PlanarPose,
) -> Result<OrientedBox> {
    if !b.is_finite() || !robot.is_finite() || !sensor_offset.is_finite() {
        return Err(Error::invalid("non-finite box or pose in frame transform"));
    }
    Ok(apply_to_box(&robot.compose(sensor_offset).inverse(), b))
}

pub fn center_distance(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let dx = a.center[0] - b.center[0];
    let dy = a.center[1] - b.center[1];
    let dz = a.center[2] - b.center[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn line_intersection(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    // p + t (q - p) on the line through a, b
    let cp = cross(a, b, p);
    let cq = cross(a, b, q);
    let t = cp / (cp - cq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Sutherland–Hodgman clip of `subject` against the convex CCW polygon `clip`.
fn clip_polygon(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut output: Vec<[f64; 2]> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        let mut prev = *input.last().unwrap();
        let mut prev_inside = cross(a, b, prev) >= 0.0;
        for &cur in &input {
            let cur_inside = cross(a, b, cur) >= 0.0;
            if cur_inside {
                if !prev_inside {
                    output.push(line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_inside {
                output.push(line_intersection(prev, cur, a, b));
            }
            prev = cur;
            prev_inside = cur_inside;
        }
    }
    output
}

fn shoelace(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        acc += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * acc.abs()
}

/// Area of the intersection of the two footprints.
pub fn footprint_intersection(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let area = shoelace(&clip_polygon(&a.footprint(), &b.footprint()));
    if area < MIN_CLIP_AREA {
        0.0
    } else {
        area
    }
}

fn vertical_overlap(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let lo = (a.center[2] - 0.5 * a.extent[2]).max(b.center[2] - 0.5 * b.extent[2]);
    let hi = (a.center[2] + 0.5 * a.extent[2]).min(b.center[2] + 0.5 * b.extent[2]);
    (hi - lo).max(0.0)
}

fn box_key(b: &OrientedBox) -> [f64; 7] {
    [
        b.center[0],
        b.center[1],
        b.center[2],
        b.extent[0],
        b.extent[1],
        b.extent[2],
        b.yaw,
    ]
}

/// Volumetric intersection over union of two yaw-oriented boxes.
pub fn iou_3d(a: &OrientedBox, b: &OrientedBox) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid("non-finite box in IoU"));
    }
    // evaluate in a fixed argument order so the result is exactly symmetric
    let (a, b) = if box_key(a).partial_cmp(&box_key(b)) == Some(std::cmp::Ordering::Greater) {
        (b, a)
    } else {
        (a, b)
    };
    // cheap rejection on circumscribed circles
    let dx = a.center[0] - b.center[0];
    let dy = a.center[1] - b.center[1];
    let reach = 0.5 * (a.footprint_diagonal() + b.footprint_diagonal());
    if dx * dx + dy * dy > reach * reach {
        return Ok(0.0);
    }
    let dz = vertical_overlap(a, b);
    if dz <= 0.0 {
        return Ok(0.0);
    }
    let inter = footprint_intersection(a, b) * dz;
    if inter <= 0.0 {
        return Ok(0.0);
    }
    let union = a.volume() + b.volume() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

/// Per-class nominal shape and footprint symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub class_id: ClassId,
    pub nominal_extent: [f64; 3],
    pub symmetry_planes: u8,
}

impl ClassSpec {
    pub fn new(class_id: ClassId, nominal_extent: [f64; 3], symmetry_planes: u8) -> Result<Self> {
        if nominal_extent.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::config(format!(
                "class {class_id}: nominal extent must be positive"
            )));
        }
        hypothesis_count(symmetry_planes)?;
        Ok(Self {
            class_id,
            nominal_extent,
            symmetry_planes,
        })
    }

    pub fn hypotheses(&self, yaw: f64) -> Vec<f64> {
        // validated at construction
        symmetry_hypotheses(yaw, self.symmetry_planes).expect("validated symmetry plane count")
    }

    pub fn hypothesis_count(&self) -> usize {
        hypothesis_count(self.symmetry_planes).expect("validated symmetry plane count")
    }
}

/// Size of the yaw equivalence class induced by `planes` vertical symmetry
/// planes.
pub fn hypothesis_count(planes: u8) -> Result<usize> {
    match planes {
        0 => Ok(1),
        1 => Ok(2),
        2 => Ok(4),
        n => Err(Error::config(format!(
            "unsupported symmetry plane count {n} (expected 0, 1 or 2)"
        ))),
    }
}

/// All yaws indistinguishable from `yaw` for a footprint with `planes`
/// symmetry planes, starting with `yaw` itself.
pub fn symmetry_hypotheses(yaw: f64, planes: u8) -> Result<Vec<f64>> {
    let n = hypothesis_count(planes)?;
    let step = TAU / n as f64;
    Ok((0..n).map(|k| wrap_angle(yaw + k as f64 * step)).collect())
}

/// The member of `yaw`'s hypothesis set closest to `reference`. Ties go to
/// the earliest hypothesis.
pub fn resolve_symmetry(yaw: f64, reference: f64, planes: u8) -> Result<f64> {
    let hyps = symmetry_hypotheses(yaw, planes)?;
    let mut best = hyps[0];
    let mut best_diff = yaw_difference(best, reference);
    for &h in &hyps[1..] {
        let d = yaw_difference(h, reference);
        if d < best_diff {
            best = h;
            best_diff = d;
        }
    }
    Ok(best)
}

/// Canonical representative of the hypothesis set: the member in
/// `(-s/2, s/2]` where `s` is the symmetry step.
pub fn canonical_yaw(yaw: f64, planes: u8) -> Result<f64> {
    let n = hypothesis_count(planes)?;
    if n == 1 {
        return Ok(wrap_angle(yaw));
    }
    let step = TAU / n as f64;
    let mut r = yaw - (yaw / step).round() * step;
    if r <= -0.5 * step {
        r += step;
    } else if r > 0.5 * step {
        r -= step;
    }
    Ok(wrap_angle(r))
}

/// Circular mean via the resultant of unit vectors.
pub fn circular_mean(angles: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    if angles.is_empty() {
        return Err(Error::invalid("circular mean of an empty list"));
    }
    if let Some(w) = weights {
        if w.len() != angles.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} angles",
                w.len(),
                angles.len()
            )));
        }
        if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
    }
    let (mut s, mut c, mut total) = (0.0, 0.0, 0.0);
    for (i, &a) in angles.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        s += w * a.sin();
        c += w * a.cos();
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::invalid("weights sum to zero"));
    }
    let resultant = s.hypot(c) / total;
    if resultant < 1e-9 {
        return Err(Error::UndefinedMean(resultant));
    }
    Ok(wrap_angle(s.atan2(c)))
}

/// Lookup table of known classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRegistry {
    specs: BTreeMap<ClassId, ClassSpec>,
}

impl Default for ClassRegistry {
    /// Built-in assets: MW (0.7 m high, no symmetry), SW (0.82 m, one
    /// plane), MSU (1.8 m, square footprint, two planes).
    fn default() -> Self {
        let specs = [
            ClassSpec::new(ClassId::Mw, [1.2, 0.8, 0.7], 0),
            ClassSpec::new(ClassId::Sw, [1.6, 0.8, 0.82], 1),
            ClassSpec::new(ClassId::Msu, [0.8, 0.8, 1.8], 2),
        ]
        .into_iter()
        .map(|s| s.expect("built-in class specs are valid"))
        .map(|s| (s.class_id.clone(), s))
        .collect();
        Self { specs }
    }
}

impl ClassRegistry {
    pub fn empty() -> Self {
        Self {
            specs: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, spec: ClassSpec) {
        self.specs.insert(spec.class_id.clone(), spec);
    }

    pub fn get(&self, class_id: &ClassId) -> Option<&ClassSpec> {
        self.specs.get(class_id)
    }

    pub fn require(&self, class_id: &ClassId) -> Result<&ClassSpec> {
        self.get(class_id)
            .ok_or_else(|| Error::config(format!("unknown class {class_id}")))
    }

    /// Symmetry planes of a class; unregistered classes are asymmetric.
    pub fn symmetry_planes(&self, class_id: &ClassId) -> u8 {
        self.get(class_id).map_or(0, |s| s.symmetry_planes)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ClassSpec> {
        self.specs.values()
    }

    pub fn get_mut(&mut self, class_id: &ClassId) -> Option<&mut ClassSpec> {
        self.specs.get_mut(class_id)
    }
}
