//! Mixed-level orthogonal-array trial design.
//!
//! The 18-run matrix is embedded as data. One 6-level column combines
//! robot translation with object motion, and three 3-level columns cover
//! robot rotation, occlusion and initial distance.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ClassId, ClassRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MotionLevel {
    StationaryNlNa,
    StationaryPlNa,
    StationaryNlPa,
    StationaryPlPa,
    Linear025,
    Linear050,
}

impl MotionLevel {
    pub const ALL: [MotionLevel; 6] = [
        MotionLevel::StationaryNlNa,
        MotionLevel::StationaryPlNa,
        MotionLevel::StationaryNlPa,
        MotionLevel::StationaryPlPa,
        MotionLevel::Linear025,
        MotionLevel::Linear050,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MotionLevel::StationaryNlNa => "Stationary - NL - NA",
            MotionLevel::StationaryPlNa => "Stationary - PL - NA",
            MotionLevel::StationaryNlPa => "Stationary - NL - PA",
            MotionLevel::StationaryPlPa => "Stationary - PL - PA",
            MotionLevel::Linear025 => "0.25 m/s",
            MotionLevel::Linear050 => "0.5 m/s",
        }
    }

    pub fn robot_linear(self) -> RobotLinear {
        match self {
            MotionLevel::Linear025 => RobotLinear::Slow,
            MotionLevel::Linear050 => RobotLinear::Fast,
            _ => RobotLinear::Stationary,
        }
    }

    pub fn object_motion(self) -> ObjectMotion {
        let (linear, angular) = match self {
            MotionLevel::StationaryPlNa => (true, false),
            MotionLevel::StationaryNlPa => (false, true),
            MotionLevel::StationaryPlPa => (true, true),
            _ => (false, false),
        };
        ObjectMotion { linear, angular }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RobotLinear {
    Stationary,
    Slow,
    Fast,
}

impl RobotLinear {
    /// Forward speed in m/s.
    pub fn speed(self) -> f64 {
        match self {
            RobotLinear::Stationary => 0.0,
            RobotLinear::Slow => 0.25,
            RobotLinear::Fast => 0.5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RobotLinear::Stationary => "Stationary",
            RobotLinear::Slow => "0.25 m/s",
            RobotLinear::Fast => "0.5 m/s",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RobotAngular {
    Stationary,
    Slow,
    Fast,
}

impl RobotAngular {
    pub const ALL: [RobotAngular; 3] = [RobotAngular::Stationary, RobotAngular::Slow, RobotAngular::Fast];

    /// Yaw rate in rad/s.
    pub fn rate(self) -> f64 {
        match self {
            RobotAngular::Stationary => 0.0,
            RobotAngular::Slow => 0.25,
            RobotAngular::Fast => 0.5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RobotAngular::Stationary => "Stationary",
            RobotAngular::Slow => "0.25 rad/s",
            RobotAngular::Fast => "0.5 rad/s",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Occlusion {
    None,
    /// Less than 20 % occluded.
    Light,
    /// More than 40 % occluded.
    Heavy,
}

impl Occlusion {
    pub const ALL: [Occlusion; 3] = [Occlusion::None, Occlusion::Light, Occlusion::Heavy];

    pub fn label(self) -> &'static str {
        match self {
            Occlusion::None => "No",
            Occlusion::Light => "< 20%",
            Occlusion::Heavy => "> 40%",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Occlusion::None => "none",
            Occlusion::Light => "light",
            Occlusion::Heavy => "heavy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InitialDistance {
    Near,
    Mid,
    Far,
}

impl InitialDistance {
    pub const ALL: [InitialDistance; 3] = [InitialDistance::Near, InitialDistance::Mid, InitialDistance::Far];

    pub fn meters(self) -> f64 {
        match self {
            InitialDistance::Near => 2.5,
            InitialDistance::Mid => 3.5,
            InitialDistance::Far => 4.5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            InitialDistance::Near => "2.5 m",
            InitialDistance::Mid => "3.5 m",
            InitialDistance::Far => "4.5 m",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectMotion {
    pub linear: bool,
    pub angular: bool,
}

/// One row of the orthogonal array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OaRow {
    pub motion: MotionLevel,
    pub angular: RobotAngular,
    pub occlusion: Occlusion,
    pub distance: InitialDistance,
}

impl OaRow {
    /// Cell labels in column order.
    pub fn labels(&self) -> [&'static str; 4] {
        [
            self.motion.label(),
            self.angular.label(),
            self.occlusion.label(),
            self.distance.label(),
        ]
    }

    fn levels(&self) -> [usize; 4] {
        [
            self.motion as usize,
            self.angular as usize,
            self.occlusion as usize,
            self.distance as usize,
        ]
    }
}

const COLUMN_NAMES: [&str; 4] = ["motion", "robot angular", "occlusion", "initial distance"];
const COLUMN_LEVELS: [usize; 4] = [6, 3, 3, 3];

static OA_MATRIX: [OaRow; 18] = {
    use InitialDistance::*;
    use MotionLevel::*;
    use Occlusion::{Heavy, Light, None as No};
    use RobotAngular::{Fast, Slow, Stationary};
    const fn r(m: MotionLevel, a: RobotAngular, o: Occlusion, d: InitialDistance) -> OaRow {
        OaRow {
            motion: m,
            angular: a,
            occlusion: o,
            distance: d,
        }
    }
    [
        r(StationaryNlNa, Stationary, No, Near),
        r(StationaryNlNa, Slow, Light, Mid),
        r(StationaryNlNa, Fast, Heavy, Far),
        r(StationaryPlNa, Stationary, No, Mid),
        r(StationaryPlNa, Slow, Light, Far),
        r(StationaryPlNa, Fast, Heavy, Near),
        r(StationaryNlPa, Stationary, Light, Near),
        r(StationaryNlPa, Slow, Heavy, Mid),
        r(StationaryNlPa, Fast, No, Far),
        r(StationaryPlPa, Stationary, Heavy, Far),
        r(StationaryPlPa, Slow, No, Near),
        r(StationaryPlPa, Fast, Light, Mid),
        r(Linear025, Stationary, Light, Far),
        r(Linear025, Slow, Heavy, Near),
        r(Linear025, Fast, No, Mid),
        r(Linear050, Stationary, Heavy, Mid),
        r(Linear050, Slow, No, Far),
        r(Linear050, Fast, Light, Near),
    ]
};

/// The embedded 18-run orthogonal array.
pub fn oa_matrix() -> &'static [OaRow; 18] {
    &OA_MATRIX
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalanceReport {
    /// Occurrences of each level, per column.
    pub level_counts: Vec<Vec<usize>>,
    /// Human-readable description of every violated balance condition.
    pub imbalances: Vec<String>,
}

impl BalanceReport {
    pub fn is_balanced(&self) -> bool {
        self.imbalances.is_empty()
    }
}

/// Checks per-column level balance and pairwise level-combination balance.
pub fn balance_check(rows: &[OaRow]) -> BalanceReport {
    let n = rows.len();
    let mut imbalances = Vec::new();
    let mut level_counts = Vec::with_capacity(4);
    for c in 0..4 {
        let mut counts = vec![0usize; COLUMN_LEVELS[c]];
        for r in rows {
            counts[r.levels()[c]] += 1;
        }
        if n % COLUMN_LEVELS[c] != 0 {
            imbalances.push(format!(
                "column {}: {n} rows cannot balance {} levels",
                COLUMN_NAMES[c], COLUMN_LEVELS[c]
            ));
        } else {
            let expected = n / COLUMN_LEVELS[c];
            for (level, &k) in counts.iter().enumerate() {
                if k != expected {
                    imbalances.push(format!(
                        "column {}: level {level} occurs {k} times, expected {expected}",
                        COLUMN_NAMES[c]
                    ));
                }
            }
        }
        level_counts.push(counts);
    }
    for a in 0..4 {
        for b in (a + 1)..4 {
            let cells = COLUMN_LEVELS[a] * COLUMN_LEVELS[b];
            let mut counts = vec![0usize; cells];
            for r in rows {
                let l = r.levels();
                counts[l[a] * COLUMN_LEVELS[b] + l[b]] += 1;
            }
            let expected = n / cells;
            if n % cells != 0 || counts.iter().any(|&k| k != expected) {
                imbalances.push(format!(
                    "columns {} x {}: level pairs occur unevenly {:?}",
                    COLUMN_NAMES[a], COLUMN_NAMES[b], counts
                ));
            }
        }
    }
    BalanceReport {
        level_counts,
        imbalances,
    }
}

/// Fully resolved factor assignment of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorLevels {
    pub num_objects: u8,
    pub motion_level: MotionLevel,
    pub robot_linear: RobotLinear,
    pub robot_angular: RobotAngular,
    pub occlusion: Occlusion,
    pub initial_distance: InitialDistance,
    pub object_motion: ObjectMotion,
}

/// A group of trials sharing one asset layout.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayoutBlock {
    pub name: String,
    pub class_id: ClassId,
    pub count: u8,
    /// First number of this block within its asset series.
    pub series_offset: u32,
    /// Stationary assets: object-motion levels collapse to no motion.
    pub stationary_asset: bool,
}

impl LayoutBlock {
    pub fn new(name: &str, class_id: ClassId, count: u8, series_offset: u32, stationary_asset: bool) -> Self {
        Self {
            name: name.to_string(),
            class_id,
            count,
            series_offset,
            stationary_asset,
        }
    }
}

/// Single MW, single MSU, two MSU, single SW.
pub fn default_layout() -> Vec<LayoutBlock> {
    vec![
        LayoutBlock::new("single-mw", ClassId::Mw, 1, 0, false),
        LayoutBlock::new("single-msu", ClassId::Msu, 1, 0, false),
        LayoutBlock::new("two-msu", ClassId::Msu, 2, 18, false),
        LayoutBlock::new("single-sw", ClassId::Sw, 1, 0, true),
    ]
}

pub fn block_by_name(name: &str) -> Result<LayoutBlock> {
    default_layout()
        .into_iter()
        .find(|b| b.name == name)
        .ok_or_else(|| {
            let names: Vec<String> = default_layout().into_iter().map(|b| b.name).collect();
            Error::config(format!(
                "unknown block `{name}` (expected one of {})",
                names.join(", ")
            ))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    /// Unique within the campaign, starting at 1.
    pub trial_id: u32,
    pub block: String,
    pub class_id: ClassId,
    /// Number within the asset's own series (e.g. two-MSU runs are 19-36).
    pub series_number: u32,
    /// Row of the orthogonal array, 1-based.
    pub matrix_row: u32,
    pub levels: FactorLevels,
    pub object_motion_collapsed: bool,
}

impl fmt::Display for TrialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "trial {} [{} #{}] {} | {} | {} | {}",
            self.trial_id,
            self.block,
            self.series_number,
            self.levels.motion_level.label(),
            self.levels.robot_angular.label(),
            self.levels.occlusion.label(),
            self.levels.initial_distance.label()
        )
    }
}

/// Instantiates the matrix once per layout block with campaign-wide ids.
pub fn campaign(layout: &[LayoutBlock], classes: &ClassRegistry) -> Result<Vec<TrialSpec>> {
    let mut trials = Vec::with_capacity(layout.len() * OA_MATRIX.len());
    let mut next_id = 1;
    for block in layout {
        classes.require(&block.class_id)?;
        if !(1..=2).contains(&block.count) {
            return Err(Error::config(format!(
                "block {}: object count {} outside {{1, 2}}",
                block.name, block.count
            )));
        }
        for (i, row) in OA_MATRIX.iter().enumerate() {
            let mut object_motion = row.motion.object_motion();
            let collapsed = block.stationary_asset && (object_motion.linear || object_motion.angular);
            if block.stationary_asset {
                object_motion = ObjectMotion {
                    linear: false,
                    angular: false,
                };
            }
            trials.push(TrialSpec {
                trial_id: next_id,
                block: block.name.clone(),
                class_id: block.class_id.clone(),
                series_number: block.series_offset + i as u32 + 1,
                matrix_row: i as u32 + 1,
                levels: FactorLevels {
                    num_objects: block.count,
                    motion_level: row.motion,
                    robot_linear: row.motion.robot_linear(),
                    robot_angular: row.angular,
                    occlusion: row.occlusion,
                    initial_distance: row.distance,
                    object_motion,
                },
                object_motion_collapsed: collapsed,
            });
            next_id += 1;
        }
    }
    Ok(trials)
}

/// Level histogram per factor over a trial list.
pub fn level_histogram(trials: &[TrialSpec]) -> BTreeMap<&'static str, BTreeMap<&'static str, usize>> {
    let mut h: BTreeMap<&'static str, BTreeMap<&'static str, usize>> = BTreeMap::new();
    for t in trials {
        let l = &t.levels;
        *h.entry("motion").or_default().entry(l.motion_level.label()).or_default() += 1;
        *h.entry("robot_angular").or_default().entry(l.robot_angular.label()).or_default() += 1;
        *h.entry("occlusion").or_default().entry(l.occlusion.label()).or_default() += 1;
        *h.entry("initial_distance").or_default().entry(l.initial_distance.label()).or_default() += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_rows() {
        let m = oa_matrix();
        assert_eq!(m[0].labels(), ["Stationary - NL - NA", "Stationary", "No", "2.5 m"]);
        assert_eq!(m[13].labels(), ["0.25 m/s", "0.25 rad/s", "> 40%", "2.5 m"]);
        assert_eq!(m[17].labels(), ["0.5 m/s", "0.5 rad/s", "< 20%", "2.5 m"]);
    }

    #[test]
    fn embedded_matrix_is_balanced() {
        let report = balance_check(oa_matrix());
        assert!(report.is_balanced(), "{:?}", report.imbalances);
        // counted over the table rows
        assert_eq!(report.level_counts[2], vec![6, 6, 6]);
        assert_eq!(report.level_counts[0], vec![3; 6]);
    }

    #[test]
    fn every_single_cell_mutation_is_detected() {
        for row in 0..18 {
            for col in 0..4 {
                for level in 0..COLUMN_LEVELS[col] {
                    let mut rows = oa_matrix().to_vec();
                    let r = &mut rows[row];
                    let before = r.levels()[col];
                    if before == level {
                        continue;
                    }
                    match col {
                        0 => r.motion = MotionLevel::ALL[level],
                        1 => r.angular = RobotAngular::ALL[level],
                        2 => r.occlusion = Occlusion::ALL[level],
                        _ => r.distance = InitialDistance::ALL[level],
                    }
                    assert!(!balance_check(&rows).is_balanced(), "row {row} col {col}");
                }
            }
        }
    }

    #[test]
    fn campaign_sizes_and_numbering() {
        let classes = ClassRegistry::default();
        let all = campaign(&default_layout(), &classes).unwrap();
        assert_eq!(all.len(), 72);
        let ids: Vec<u32> = all.iter().map(|t| t.trial_id).collect();
        assert_eq!(ids, (1..=72).collect::<Vec<_>>());

        let one = campaign(&[block_by_name("single-msu").unwrap()], &classes).unwrap();
        assert_eq!(one.len(), 18);

        let two = all.iter().find(|t| t.block == "two-msu" && t.series_number == 19).unwrap();
        assert_eq!(two.matrix_row, 1);
        assert_eq!(two.levels.num_objects, 2);
        assert_eq!(two.levels.motion_level, MotionLevel::StationaryNlNa);
    }

    #[test]
    fn stationary_asset_keeps_robot_motion() {
        let all = campaign(&default_layout(), &ClassRegistry::default()).unwrap();
        let sw: Vec<_> = all.iter().filter(|t| t.class_id == ClassId::Sw).collect();
        assert_eq!(sw.len(), 18);
        assert!(sw.iter().all(|t| !t.levels.object_motion.linear && !t.levels.object_motion.angular));
        assert_eq!(sw.iter().filter(|t| t.object_motion_collapsed).count(), 9);
        assert_eq!(sw[17].levels.robot_linear, RobotLinear::Fast);
    }

    #[test]
    fn unknown_class_rejected() {
        let block = LayoutBlock::new("x", ClassId::Custom("crate".into()), 1, 0, false);
        assert!(matches!(
            campaign(&[block], &ClassRegistry::default()),
            Err(Error::Config(_))
        ));
        assert!(block_by_name("three-msu").is_err());
    }

    #[test]
    fn matrix_is_stable() {
        let a = format!("{:?}", oa_matrix());
        let b = format!("{:?}", oa_matrix());
        assert_eq!(a, b);
    }
}
