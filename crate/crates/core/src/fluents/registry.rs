//! Fluent definitions: threshold configuration and the registry of every
//! fluent evaluated per frame.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::confidence::{Direction, Motion, MotionThreshold, TransitionSpec};
use crate::geometry::Plane;
use crate::skeleton::{JointId, Side};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse fluent config: {0}")]
    Parse(String),
    #[error("unknown threshold key {0:?}")]
    UnknownThreshold(String),
    #[error("threshold {key:?}: {message}")]
    InvalidThreshold { key: String, message: String },
    #[error("epsilon must lie in (0, 0.5), got {0}")]
    Epsilon(f64),
    #[error("temporal window must be at least 1 frame")]
    Window,
    #[error("{0}")]
    Other(String),
}

/// Thresholds for every angle-derived transition, keyed by the side-generic
/// row name (`"arm bent"`) or a side-specific override (`"left arm bent"`).
pub fn table_thresholds() -> BTreeMap<String, TransitionSpec> {
    let rows = [
        ("arm bent", TransitionSpec::lower(5.0 * PI / 8.0, PI / 8.0)),
        ("leg bent", TransitionSpec::lower(19.0 * PI / 24.0, PI / 24.0)),
        ("arm in front", TransitionSpec::lower(7.0 * PI / 16.0, PI / 16.0)),
        ("arm behind", TransitionSpec::upper(9.0 * PI / 16.0, PI / 16.0)),
        ("leg in front", TransitionSpec::lower(7.0 * PI / 16.0, PI / 16.0)),
        ("leg behind", TransitionSpec::upper(9.0 * PI / 16.0, PI / 16.0)),
        ("arm raised", TransitionSpec::upper(9.0 * PI / 16.0, PI / 16.0)),
        ("arm lowered", TransitionSpec::lower(3.0 * PI / 8.0, PI / 8.0)),
        ("leg raised", TransitionSpec::lower(13.0 * PI / 16.0, PI / 16.0)),
        ("arm outward", TransitionSpec::lower(7.0 * PI / 16.0, PI / 16.0)),
        ("arm inward", TransitionSpec::upper(9.0 * PI / 16.0, PI / 16.0)),
        ("leg outward", TransitionSpec::lower(7.0 * PI / 16.0, PI / 16.0)),
        ("leg inward", TransitionSpec::upper(9.0 * PI / 16.0, PI / 16.0)),
        ("head tilted forward", TransitionSpec::lower(7.0 * PI / 16.0, PI / 16.0)),
        ("head tilted left", TransitionSpec::lower(7.0 * PI / 16.0, PI / 16.0)),
        ("torso tilted forward", TransitionSpec::lower(7.0 * PI / 16.0, PI / 16.0)),
        ("torso tilted left", TransitionSpec::lower(7.0 * PI / 16.0, PI / 16.0)),
        ("head twisted left", TransitionSpec::lower(7.0 * PI / 16.0, PI / 16.0)),
        ("torso twisted left", TransitionSpec::lower(7.0 * PI / 16.0, PI / 16.0)),
        // mirror images of the rows above about pi/2
        ("head tilted backward", TransitionSpec::upper(9.0 * PI / 16.0, PI / 16.0)),
        ("head tilted right", TransitionSpec::upper(9.0 * PI / 16.0, PI / 16.0)),
        ("torso tilted backward", TransitionSpec::upper(9.0 * PI / 16.0, PI / 16.0)),
        ("torso tilted right", TransitionSpec::upper(9.0 * PI / 16.0, PI / 16.0)),
        ("head twisted right", TransitionSpec::upper(9.0 * PI / 16.0, PI / 16.0)),
        ("torso twisted right", TransitionSpec::upper(9.0 * PI / 16.0, PI / 16.0)),
        // distances in headlengths
        ("near", TransitionSpec::lower(0.5, 0.25)),
    ];
    rows.into_iter().map(|(k, s)| (k.to_string(), s)).collect()
}

/// Tunable parameters of fluent evaluation. Defaults reproduce the
/// published thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluentConfig {
    pub epsilon: f64,
    /// Frames of history `r` for locally temporal fluents.
    pub window: usize,
    /// Raw pose-space distance at or below which two joints touch.
    pub touching_distance: f64,
    /// Skip near pairs whose joints are absent instead of failing.
    pub allow_missing_optional: bool,
    pub angle_motion: MotionThreshold,
    /// In headlengths per frame.
    pub distance_motion: MotionThreshold,
    pub thresholds: BTreeMap<String, TransitionSpec>,
}

impl Default for FluentConfig {
    fn default() -> Self {
        FluentConfig {
            epsilon: 1e-3,
            window: 5,
            touching_distance: 0.1,
            allow_missing_optional: false,
            angle_motion: MotionThreshold {
                tau: PI / 72.0,
                delta: PI / 72.0,
            },
            distance_motion: MotionThreshold {
                tau: 0.05,
                delta: 0.05,
            },
            thresholds: table_thresholds(),
        }
    }
}

impl FluentConfig {
    /// Parses a TOML document; keys not given keep their defaults and
    /// threshold entries override the table row by row.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let parsed: FluentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut thresholds = table_thresholds();
        for (key, spec) in parsed.thresholds {
            thresholds.insert(key, spec);
        }
        Ok(FluentConfig {
            thresholds,
            ..parsed
        })
    }

    /// Resolves the threshold for `generic` on `side`, preferring the
    /// side-specific override.
    fn lookup(&self, side: Option<Side>, generic: &str) -> Result<TransitionSpec, ConfigError> {
        if let Some(side) = side {
            if let Some(spec) = self.thresholds.get(&format!("{} {generic}", side.name())) {
                return Ok(*spec);
            }
        }
        self.thresholds
            .get(generic)
            .copied()
            .ok_or_else(|| ConfigError::InvalidThreshold {
                key: generic.to_string(),
                message: "missing".into(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    Bent,
    InFront,
    Raised,
    Outward,
    Tilted,
    Twisted,
    Near,
}

/// Second point of a measured triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    Joint(JointId),
    /// Vertex plus the torso normal.
    Forward,
    /// Vertex plus the outward lateral axis of the frame's side.
    Lateral,
}

/// How a channel's scalar measurement is obtained from a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measurement {
    /// Unprojected vertex angle `a-vertex-c`.
    Angle { a: JointId, vertex: JointId, c: JointId },
    /// Vertex angle after projecting both links onto a torso plane.
    Projected {
        a: JointId,
        vertex: JointId,
        reference: Reference,
        plane: Plane,
        frame_side: Side,
    },
    /// Distance in headlengths.
    Distance { a: JointId, b: JointId },
}

/// One measured quantity of a fluent and the states it separates.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    /// Series identifier, also used for the motion-primitive series.
    pub id: String,
    pub measurement: Measurement,
    /// Extreme state names: `s0` (first transition) and `sn`.
    pub first: String,
    pub last: String,
    pub first_transition: TransitionSpec,
    /// Present for three-state channels.
    pub last_transition: Option<TransitionSpec>,
    pub toward_first: String,
    pub toward_last: String,
    pub still: String,
    pub motion: MotionThreshold,
}

impl Channel {
    pub fn is_three_state(&self) -> bool {
        self.last_transition.is_some()
    }

    /// Direction of change that moves the measurement toward `s0`.
    pub fn first_motion(&self) -> Motion {
        match self.first_transition.direction {
            Direction::Lower => Motion::Decreasing,
            Direction::Upper => Motion::Increasing,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluentSpec {
    pub id: String,
    pub family: Family,
    pub channels: Vec<Channel>,
    /// Name of the shared middle state of three-state fluents.
    pub middle: Option<String>,
}

impl FluentSpec {
    /// Every instantaneous state name, in emission order.
    pub fn state_names(&self) -> Vec<&str> {
        let mut names = Vec::new();
        for ch in &self.channels {
            names.push(ch.first.as_str());
            if !ch.is_three_state() {
                names.push(ch.last.as_str());
            }
        }
        if let Some(m) = &self.middle {
            names.push(m.as_str());
        }
        for ch in self.channels.iter().filter(|c| c.is_three_state()) {
            names.push(ch.last.as_str());
        }
        names
    }
}

fn validate(key: &str, spec: &TransitionSpec, angle: bool) -> Result<(), ConfigError> {
    let bad = |message: String| ConfigError::InvalidThreshold {
        key: key.to_string(),
        message,
    };
    if !(spec.delta > 0.0) || !spec.delta.is_finite() {
        return Err(bad(format!("delta must be positive, got {}", spec.delta)));
    }
    if !spec.tau.is_finite() {
        return Err(bad("tau must be finite".into()));
    }
    if angle && !(spec.tau > 0.0 && spec.tau < PI) {
        return Err(bad(format!("angle tau must lie in (0, pi), got {}", spec.tau)));
    }
    Ok(())
}

fn validate_pair(key: &str, first: &TransitionSpec, last: &TransitionSpec) -> Result<(), ConfigError> {
    if first.direction != Direction::Lower || last.direction != Direction::Upper {
        return Err(ConfigError::InvalidThreshold {
            key: key.to_string(),
            message: "three-state fluents need a lower first and an upper last transition".into(),
        });
    }
    if first.tau + first.delta > last.tau - last.delta {
        return Err(ConfigError::InvalidThreshold {
            key: key.to_string(),
            message: "transition bands overlap".into(),
        });
    }
    Ok(())
}

struct Builder<'a> {
    config: &'a FluentConfig,
    used: BTreeSet<String>,
}

impl Builder<'_> {
    fn spec(&mut self, side: Option<Side>, generic: &str) -> Result<TransitionSpec, ConfigError> {
        self.used.insert(generic.to_string());
        if let Some(s) = side {
            self.used.insert(format!("{} {generic}", s.name()));
        }
        let spec = self.config.lookup(side, generic)?;
        validate(generic, &spec, generic != "near")?;
        Ok(spec)
    }

    #[allow(clippy::too_many_arguments)]
    fn channel(
        &mut self,
        id: String,
        side: Option<Side>,
        measurement: Measurement,
        states: [&str; 2],
        keys: (&str, Option<&str>),
        temporal: [&str; 3],
    ) -> Result<Channel, ConfigError> {
        let first_transition = self.spec(side, keys.0)?;
        let last_transition = match keys.1 {
            Some(k) => {
                let last = self.spec(side, k)?;
                validate_pair(&id, &first_transition, &last)?;
                Some(last)
            }
            None => None,
        };
        Ok(Channel {
            id,
            measurement,
            first: states[0].into(),
            last: states[1].into(),
            first_transition,
            last_transition,
            toward_first: temporal[0].into(),
            toward_last: temporal[1].into(),
            still: temporal[2].into(),
            motion: self.config.angle_motion,
        })
    }
}

/// Immutable set of fluents evaluated per frame.
#[derive(Debug, Clone)]
pub struct FluentRegistry {
    config: FluentConfig,
    fluents: Vec<FluentSpec>,
    near: Vec<FluentSpec>,
}

/// Unordered near pairs from `J_from x J_to`, minus reflexive pairs and
/// same-side links whose lengths are fixed.
pub fn near_pairs() -> Vec<(JointId, JointId)> {
    use JointId::*;
    let from = [LeftIndexFinger, RightIndexFinger, LeftHeel, RightHeel];
    let to_extra = [
        Nose,
        LeftEye,
        RightEye,
        LeftEar,
        RightEar,
        LeftMouth,
        RightMouth,
        LeftShoulder,
        LeftElbow,
        LeftWrist,
        RightShoulder,
        RightElbow,
        RightWrist,
        LeftHip,
        RightHip,
        LeftKnee,
        RightKnee,
        LeftBigToe,
        RightBigToe,
    ];
    let excluded = |a: JointId, b: JointId| {
        Side::BOTH.into_iter().any(|s| {
            let f = s.index_finger();
            let h = s.heel();
            (a == f && (b == s.wrist() || b == s.elbow())) || (a == h && (b == s.knee() || b == s.big_toe()))
        })
    };
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::new();
    for &a in &from {
        for &b in from.iter().chain(to_extra.iter()) {
            if a == b || excluded(a, b) || excluded(b, a) {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if seen.insert(key) {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

pub fn near_id(a: JointId, b: JointId) -> String {
    format!("near({a}, {b})")
}

impl FluentRegistry {
    pub fn new(config: FluentConfig) -> Result<Self, ConfigError> {
        if !(config.epsilon > 0.0 && config.epsilon < 0.5) {
            return Err(ConfigError::Epsilon(config.epsilon));
        }
        if config.window == 0 {
            return Err(ConfigError::Window);
        }
        for (key, m) in [("angle_motion", &config.angle_motion), ("distance_motion", &config.distance_motion)] {
            if !(m.delta > 0.0) || !m.tau.is_finite() {
                return Err(ConfigError::InvalidThreshold {
                    key: key.into(),
                    message: "delta must be positive and tau finite".into(),
                });
            }
        }
        if !(config.touching_distance >= 0.0) {
            return Err(ConfigError::Other("touching_distance must be non-negative".into()));
        }
        let mut b = Builder {
            config: &config,
            used: BTreeSet::new(),
        };
        let mut fluents = Vec::new();
        use JointId::*;

        for side in Side::BOTH {
            let s = side.name();
            let single = |id: String, ch: Channel, family| FluentSpec {
                id,
                family,
                channels: vec![ch],
                middle: None,
            };
            let id = format!("{s} arm bent");
            let ch = b.channel(
                id.clone(),
                Some(side),
                Measurement::Angle {
                    a: side.shoulder(),
                    vertex: side.elbow(),
                    c: side.wrist(),
                },
                ["bent", "straight"],
                ("arm bent", None),
                ["bending", "straightening", "still"],
            )?;
            fluents.push(single(id, ch, Family::Bent));

            let id = format!("{s} leg bent");
            let ch = b.channel(
                id.clone(),
                Some(side),
                Measurement::Angle {
                    a: side.hip(),
                    vertex: side.knee(),
                    c: side.ankle(),
                },
                ["bent", "straight"],
                ("leg bent", None),
                ["bending", "straightening", "still"],
            )?;
            fluents.push(single(id, ch, Family::Bent));
        }

        for side in Side::BOTH {
            let s = side.name();
            for (limb, root, distal) in [("arm", side.shoulder(), side.elbow()), ("leg", side.hip(), side.knee())] {
                let id = format!("{s} {limb} in front");
                let ch = b.channel(
                    id.clone(),
                    Some(side),
                    Measurement::Projected {
                        a: distal,
                        vertex: root,
                        reference: Reference::Forward,
                        plane: Plane::Sagittal,
                        frame_side: side,
                    },
                    ["in front", "behind"],
                    (&format!("{limb} in front"), Some(&format!("{limb} behind"))),
                    ["moving forward", "moving backward", "still"],
                )?;
                fluents.push(FluentSpec {
                    id,
                    family: Family::InFront,
                    channels: vec![ch],
                    middle: Some("centered".into()),
                });
            }
        }

        for side in Side::BOTH {
            let s = side.name();
            let id = format!("{s} arm raised");
            let ch = b.channel(
                id.clone(),
                Some(side),
                Measurement::Angle {
                    a: side.elbow(),
                    vertex: side.shoulder(),
                    c: side.hip(),
                },
                ["lowered", "raised"],
                ("arm lowered", Some("arm raised")),
                ["lowering", "raising", "still"],
            )?;
            fluents.push(FluentSpec {
                id,
                family: Family::Raised,
                channels: vec![ch],
                middle: Some("chest-level".into()),
            });

            let id = format!("{s} leg raised");
            let ch = b.channel(
                id.clone(),
                Some(side),
                Measurement::Angle {
                    a: side.knee(),
                    vertex: side.hip(),
                    c: side.shoulder(),
                },
                ["raised", "lowered"],
                ("leg raised", None),
                ["raising", "lowering", "still"],
            )?;
            fluents.push(FluentSpec {
                id,
                family: Family::Raised,
                channels: vec![ch],
                middle: None,
            });
        }

        for side in Side::BOTH {
            let s = side.name();
            for (limb, root, distal) in [("arm", side.shoulder(), side.elbow()), ("leg", side.hip(), side.knee())] {
                let id = format!("{s} {limb} outward");
                let ch = b.channel(
                    id.clone(),
                    Some(side),
                    Measurement::Projected {
                        a: distal,
                        vertex: root,
                        reference: Reference::Lateral,
                        plane: Plane::Frontal,
                        frame_side: side,
                    },
                    ["outward", "inward"],
                    (&format!("{limb} outward"), Some(&format!("{limb} inward"))),
                    ["moving outward", "moving inward", "still"],
                )?;
                fluents.push(FluentSpec {
                    id,
                    family: Family::Outward,
                    channels: vec![ch],
                    middle: Some("at side".into()),
                });
            }
        }

        for (part, vertex, tip) in [("head", Neck, MidEar), ("torso", MidHip, Neck)] {
            let forward = b.channel(
                format!("{part} tilted forward"),
                None,
                Measurement::Projected {
                    a: tip,
                    vertex,
                    reference: Reference::Forward,
                    plane: Plane::Sagittal,
                    frame_side: Side::Left,
                },
                ["tilted forward", "tilted backward"],
                (&format!("{part} tilted forward"), Some(&format!("{part} tilted backward"))),
                ["tilting forward", "tilting backward", "still (sagittal)"],
            )?;
            let left = b.channel(
                format!("{part} tilted left"),
                None,
                Measurement::Projected {
                    a: tip,
                    vertex,
                    reference: Reference::Lateral,
                    plane: Plane::Frontal,
                    frame_side: Side::Left,
                },
                ["tilted left", "tilted right"],
                (&format!("{part} tilted left"), Some(&format!("{part} tilted right"))),
                ["tilting left", "tilting right", "still (frontal)"],
            )?;
            fluents.push(FluentSpec {
                id: format!("{part} tilted"),
                family: Family::Tilted,
                channels: vec![forward, left],
                middle: Some("centered".into()),
            });
        }

        let twists = [
            (
                "head",
                Measurement::Projected {
                    a: Nose,
                    vertex: Neck,
                    reference: Reference::Joint(LeftShoulder),
                    plane: Plane::Transverse,
                    frame_side: Side::Left,
                },
            ),
            (
                "torso",
                Measurement::Projected {
                    a: LeftHip,
                    vertex: MidHip,
                    reference: Reference::Forward,
                    plane: Plane::Transverse,
                    frame_side: Side::Left,
                },
            ),
        ];
        for (part, measurement) in twists {
            let id = format!("{part} twisted");
            let ch = b.channel(
                id.clone(),
                None,
                measurement,
                ["twisted left", "twisted right"],
                (&format!("{part} twisted left"), Some(&format!("{part} twisted right"))),
                ["twisting left", "twisting right", "still"],
            )?;
            fluents.push(FluentSpec {
                id,
                family: Family::Twisted,
                channels: vec![ch],
                middle: Some("centered".into()),
            });
        }

        let near_spec = b.spec(None, "near")?;
        let near = near_pairs()
            .into_iter()
            .map(|(a, c)| {
                let id = near_id(a, c);
                FluentSpec {
                    id: id.clone(),
                    family: Family::Near,
                    channels: vec![Channel {
                        id,
                        measurement: Measurement::Distance { a, b: c },
                        first: "near".into(),
                        last: "far".into(),
                        first_transition: near_spec,
                        last_transition: None,
                        toward_first: "approaching".into(),
                        toward_last: "distancing".into(),
                        still: "still".into(),
                        motion: config.distance_motion,
                    }],
                    middle: None,
                }
            })
            .collect();

        let known = b.used;
        if let Some(unknown) = config.thresholds.keys().find(|k| !known.contains(*k)) {
            return Err(ConfigError::UnknownThreshold(unknown.clone()));
        }
        Ok(FluentRegistry { config, fluents, near })
    }

    pub fn config(&self) -> &FluentConfig {
        &self.config
    }

    /// Angle-derived fluents (every family except near).
    pub fn fluents(&self) -> &[FluentSpec] {
        &self.fluents
    }

    pub fn near(&self) -> &[FluentSpec] {
        &self.near
    }

    pub fn all(&self) -> impl Iterator<Item = &FluentSpec> {
        self.fluents.iter().chain(self.near.iter())
    }

    pub fn get(&self, id: &str) -> Option<&FluentSpec> {
        self.all().find(|f| f.id == id)
    }

    pub fn channel(&self, id: &str) -> Option<&Channel> {
        self.all().flat_map(|f| f.channels.iter()).find(|c| c.id == id)
    }
}

impl Default for FluentRegistry {
    fn default() -> Self {
        FluentRegistry::new(FluentConfig::default()).expect("default fluent config is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_registry_covers_every_family() {
        let reg = FluentRegistry::default();
        assert_eq!(reg.fluents().len(), 20);
        let families: BTreeSet<_> = reg.all().map(|f| f.family).collect();
        assert_eq!(families.len(), 7);
        let tilted = reg.get("head tilted").unwrap();
        assert_eq!(tilted.channels.len(), 2);
        assert_eq!(
            tilted.state_names(),
            ["tilted forward", "tilted left", "centered", "tilted backward", "tilted right"]
        );
        assert_eq!(reg.get("left arm bent").unwrap().state_names(), ["bent", "straight"]);
    }

    #[test]
    fn near_pairs_exclude_linked_and_duplicate_pairs() {
        let pairs = near_pairs();
        // 4 x 23 ordered, minus 4 reflexive, 8 linked, 6 symmetric duplicates
        assert_eq!(pairs.len(), 74);
        let has = |a, b| pairs.iter().any(|&(x, y)| (x, y) == (a, b) || (y, x) == (a, b));
        assert!(!has(JointId::LeftIndexFinger, JointId::LeftWrist));
        assert!(!has(JointId::RightHeel, JointId::RightBigToe));
        assert!(has(JointId::LeftIndexFinger, JointId::RightWrist));
        assert!(has(JointId::LeftHeel, JointId::RightHeel));
        assert!(has(JointId::LeftIndexFinger, JointId::Nose));
    }

    #[test]
    fn table_values_are_exact() {
        let t = table_thresholds();
        assert_eq!(t["arm bent"].tau, 5.0 * PI / 8.0);
        assert_eq!(t["leg bent"].tau, 19.0 * PI / 24.0);
        assert_eq!(t["leg bent"].delta, PI / 24.0);
        assert_eq!(t["arm lowered"].delta, PI / 8.0);
        assert_eq!(t["leg raised"].tau, 13.0 * PI / 16.0);
    }

    #[test]
    fn overrides_and_rejections() {
        let cfg = FluentConfig::from_toml_str(
            "epsilon = 0.01\n[thresholds]\n\"left arm bent\" = { tau = 2.0, delta = 0.2, direction = \"lower\" }\n",
        )
        .unwrap();
        assert_eq!(cfg.window, 5);
        let reg = FluentRegistry::new(cfg).unwrap();
        assert_eq!(reg.channel("left arm bent").unwrap().first_transition.tau, 2.0);
        assert_eq!(reg.channel("right arm bent").unwrap().first_transition.tau, 5.0 * PI / 8.0);

        let unknown = FluentConfig::from_toml_str("[thresholds]\n\"tail wagging\" = { tau = 1.0, delta = 0.1, direction = \"lower\" }\n")
            .unwrap();
        assert!(matches!(FluentRegistry::new(unknown), Err(ConfigError::UnknownThreshold(_))));

        let overlap = FluentConfig::from_toml_str("[thresholds]\n\"arm behind\" = { tau = 1.4, delta = 0.2, direction = \"upper\" }\n")
            .unwrap();
        assert!(matches!(FluentRegistry::new(overlap), Err(ConfigError::InvalidThreshold { .. })));

        let neg = FluentConfig::from_toml_str("[thresholds]\n\"arm bent\" = { tau = 1.0, delta = -0.1, direction = \"lower\" }\n")
            .unwrap();
        assert!(FluentRegistry::new(neg).is_err());
        assert!(FluentConfig::from_toml_str("bogus = 1").is_err());
        assert!(FluentRegistry::new(FluentConfig { epsilon: 0.7, ..Default::default() }).is_err());
    }
}
