//! Stick-figure data model: joints, frames, pose sequences.
//!
//! Input files are UTF-8 with one JSON frame record per line:
//!
//! ```text
//! {"index": 0, "t": 0.0, "joints": {"nose": [0.0, 1.6, 0.1], "left eye": [...], ...}}
//! ```
//!
//! Only the 25 estimator landmarks may appear in a file. The virtual joints
//! (neck, mid-hip, mid-ear) are always derived by [`augment_frame`].

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Frame rate used when a sequence has fewer than two frames and no rate
/// was supplied.
pub const DEFAULT_FRAME_RATE: f64 = 30.0;

#[derive(Debug, Error)]
pub enum PoseError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("frame {frame}: malformed record: {message}")]
    Malformed { frame: usize, message: String },
    #[error("frame {frame}: unknown joint name {name:?}")]
    UnknownJoint { frame: usize, name: String },
    #[error("frame {frame}: virtual joint {name:?} must not appear in input")]
    VirtualJointInInput { frame: usize, name: String },
    #[error("frame {frame}: missing joint {joint}")]
    MissingJoint { frame: usize, joint: JointId },
    #[error("frame {frame}: non-finite coordinate for {joint}")]
    NonFinite { frame: usize, joint: JointId },
    #[error("frame {frame}: index {found} out of sequence (expected {frame})")]
    IndexMismatch { frame: usize, found: u64 },
    #[error("frame {frame}: timestamp {current} does not increase past {previous}")]
    NonIncreasingTimestamp {
        frame: usize,
        previous: f64,
        current: f64,
    },
    #[error("invalid frame rate {0}")]
    InvalidFrameRate(f64),
    #[error("frame {frame}: degenerate skeleton (neck and mid-ear coincide)")]
    DegenerateSkeleton { frame: usize },
}

macro_rules! joints {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// Named joint of the stick figure.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum JointId {
            $($variant),*
        }

        impl JointId {
            pub const ALL: [JointId; JointId::COUNT] = [$(JointId::$variant),*];

            pub fn name(self) -> &'static str {
                match self {
                    $(JointId::$variant => $name),*
                }
            }
        }

        impl FromStr for JointId {
            type Err = ();

            fn from_str(s: &str) -> Result<Self, ()> {
                match s {
                    $($name => Ok(JointId::$variant),)*
                    _ => Err(()),
                }
            }
        }
    };
}

joints! {
    Nose => "nose",
    LeftEye => "left eye",
    RightEye => "right eye",
    LeftEar => "left ear",
    RightEar => "right ear",
    LeftMouth => "left mouth",
    RightMouth => "right mouth",
    LeftShoulder => "left shoulder",
    RightShoulder => "right shoulder",
    LeftElbow => "left elbow",
    RightElbow => "right elbow",
    LeftWrist => "left wrist",
    RightWrist => "right wrist",
    LeftIndexFinger => "left index finger",
    RightIndexFinger => "right index finger",
    LeftHip => "left hip",
    RightHip => "right hip",
    LeftKnee => "left knee",
    RightKnee => "right knee",
    LeftAnkle => "left ankle",
    RightAnkle => "right ankle",
    LeftHeel => "left heel",
    RightHeel => "right heel",
    LeftBigToe => "left big toe",
    RightBigToe => "right big toe",
    Neck => "neck",
    MidHip => "mid-hip",
    MidEar => "mid-ear",
}

impl JointId {
    pub const COUNT: usize = 28;
    pub const RAW_COUNT: usize = 25;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_virtual(self) -> bool {
        matches!(self, JointId::Neck | JointId::MidHip | JointId::MidEar)
    }

    /// Landmarks that some estimators do not emit (hands and feet detail).
    pub fn is_optional(self) -> bool {
        matches!(
            self,
            JointId::LeftIndexFinger
                | JointId::RightIndexFinger
                | JointId::LeftHeel
                | JointId::RightHeel
                | JointId::LeftBigToe
                | JointId::RightBigToe
        )
    }

    pub fn raw() -> impl Iterator<Item = JointId> {
        JointId::ALL.into_iter().filter(|j| !j.is_virtual())
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Body side for the paired limbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    pub fn shoulder(self) -> JointId {
        self.pick(JointId::LeftShoulder, JointId::RightShoulder)
    }
    pub fn elbow(self) -> JointId {
        self.pick(JointId::LeftElbow, JointId::RightElbow)
    }
    pub fn wrist(self) -> JointId {
        self.pick(JointId::LeftWrist, JointId::RightWrist)
    }
    pub fn index_finger(self) -> JointId {
        self.pick(JointId::LeftIndexFinger, JointId::RightIndexFinger)
    }
    pub fn hip(self) -> JointId {
        self.pick(JointId::LeftHip, JointId::RightHip)
    }
    pub fn knee(self) -> JointId {
        self.pick(JointId::LeftKnee, JointId::RightKnee)
    }
    pub fn ankle(self) -> JointId {
        self.pick(JointId::LeftAnkle, JointId::RightAnkle)
    }
    pub fn heel(self) -> JointId {
        self.pick(JointId::LeftHeel, JointId::RightHeel)
    }
    pub fn big_toe(self) -> JointId {
        self.pick(JointId::LeftBigToe, JointId::RightBigToe)
    }
    pub fn ear(self) -> JointId {
        self.pick(JointId::LeftEar, JointId::RightEar)
    }
    pub fn eye(self) -> JointId {
        self.pick(JointId::LeftEye, JointId::RightEye)
    }
    pub fn mouth(self) -> JointId {
        self.pick(JointId::LeftMouth, JointId::RightMouth)
    }

    fn pick(self, left: JointId, right: JointId) -> JointId {
        match self {
            Side::Left => left,
            Side::Right => right,
        }
    }
}

/// One sample of the stick figure.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub timestamp: f64,
    joints: [Option<Vec3>; JointId::COUNT],
}

impl Frame {
    pub fn new(index: usize, timestamp: f64) -> Self {
        Frame {
            index,
            timestamp,
            joints: [None; JointId::COUNT],
        }
    }

    pub fn with_joints(
        index: usize,
        timestamp: f64,
        joints: impl IntoIterator<Item = (JointId, Vec3)>,
    ) -> Self {
        let mut frame = Frame::new(index, timestamp);
        for (id, p) in joints {
            frame.set(id, p);
        }
        frame
    }

    pub fn get(&self, id: JointId) -> Option<Vec3> {
        self.joints[id.index()]
    }

    pub fn set(&mut self, id: JointId, p: Vec3) {
        self.joints[id.index()] = Some(p);
    }

    pub fn remove(&mut self, id: JointId) {
        self.joints[id.index()] = None;
    }

    pub fn position(&self, id: JointId) -> Result<Vec3, PoseError> {
        self.get(id).ok_or(PoseError::MissingJoint {
            frame: self.index,
            joint: id,
        })
    }

    pub fn joints(&self) -> impl Iterator<Item = (JointId, Vec3)> + '_ {
        JointId::ALL
            .into_iter()
            .filter_map(move |id| self.get(id).map(|p| (id, p)))
    }

    pub fn is_augmented(&self) -> bool {
        self.get(JointId::Neck).is_some()
            && self.get(JointId::MidHip).is_some()
            && self.get(JointId::MidEar).is_some()
    }

    /// Applies `f` to every stored joint position.
    pub fn map_positions(&self, f: impl Fn(Vec3) -> Vec3) -> Frame {
        let mut out = self.clone();
        for slot in out.joints.iter_mut() {
            if let Some(p) = slot {
                *p = f(*p);
            }
        }
        out
    }
}

/// Derives the virtual joints: mid-ear and mid-hip as midpoints of the
/// paired landmarks, neck as the midpoint of the shoulders.
///
/// Virtual joints are recomputed from the raw landmarks every time, so the
/// operation is idempotent.
pub fn augment_frame(frame: &Frame) -> Result<Frame, PoseError> {
    let mid = |a: JointId, b: JointId| -> Result<Vec3, PoseError> {
        Ok(0.5 * (frame.position(a)? + frame.position(b)?))
    };
    let mut out = frame.clone();
    out.set(JointId::MidEar, mid(JointId::LeftEar, JointId::RightEar)?);
    out.set(JointId::MidHip, mid(JointId::LeftHip, JointId::RightHip)?);
    out.set(
        JointId::Neck,
        mid(JointId::LeftShoulder, JointId::RightShoulder)?,
    );
    Ok(out)
}

/// Scale unit: twice the neck to mid-ear distance.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Headlength(f64);

impl Headlength {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn headlength(frame: &Frame) -> Result<Headlength, PoseError> {
    let neck = frame.position(JointId::Neck)?;
    let mid_ear = frame.position(JointId::MidEar)?;
    let len = (mid_ear - neck).norm();
    if !(len > 0.0) || !len.is_finite() {
        return Err(PoseError::DegenerateSkeleton { frame: frame.index });
    }
    Ok(Headlength(2.0 * len))
}

/// Time-ordered frames at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    frames: Vec<Frame>,
    frame_rate: f64,
}

impl PoseSequence {
    /// Validates index contiguity, timestamp monotonicity and finiteness.
    pub fn new(frames: Vec<Frame>, frame_rate: f64) -> Result<Self, PoseError> {
        if !(frame_rate > 0.0) || !frame_rate.is_finite() {
            return Err(PoseError::InvalidFrameRate(frame_rate));
        }
        for (pos, frame) in frames.iter().enumerate() {
            if frame.index != pos {
                return Err(PoseError::IndexMismatch {
                    frame: pos,
                    found: frame.index as u64,
                });
            }
            if !frame.timestamp.is_finite() {
                return Err(PoseError::Malformed {
                    frame: pos,
                    message: "non-finite timestamp".into(),
                });
            }
            if pos > 0 && frame.timestamp <= frames[pos - 1].timestamp {
                return Err(PoseError::NonIncreasingTimestamp {
                    frame: pos,
                    previous: frames[pos - 1].timestamp,
                    current: frame.timestamp,
                });
            }
            for (id, p) in frame.joints() {
                if !p.iter().all(|c| c.is_finite()) {
                    return Err(PoseError::NonFinite {
                        frame: pos,
                        joint: id,
                    });
                }
            }
        }
        Ok(PoseSequence { frames, frame_rate })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Out-of-band frame rate. Inferred from timestamps when absent.
    pub frame_rate: Option<f64>,
    /// Accept frames lacking index fingers, heels or big toes.
    pub allow_missing_optional: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    index: u64,
    t: f64,
    joints: BTreeMap<String, Vec<f64>>,
}

#[derive(Serialize)]
struct FrameRecordOut<'a> {
    index: usize,
    t: f64,
    joints: BTreeMap<&'a str, [f64; 3]>,
}

fn parse_record(line: &str, pos: usize, options: &ParseOptions) -> Result<Frame, PoseError> {
    let record: FrameRecord = serde_json::from_str(line).map_err(|e| PoseError::Malformed {
        frame: pos,
        message: e.to_string(),
    })?;
    if record.index != pos as u64 {
        return Err(PoseError::IndexMismatch {
            frame: pos,
            found: record.index,
        });
    }
    let mut frame = Frame::new(pos, record.t);
    for (name, coords) in &record.joints {
        let id = JointId::from_str(name).map_err(|_| PoseError::UnknownJoint {
            frame: pos,
            name: name.clone(),
        })?;
        if id.is_virtual() {
            return Err(PoseError::VirtualJointInInput {
                frame: pos,
                name: name.clone(),
            });
        }
        let [x, y, z] = coords[..] else {
            return Err(PoseError::Malformed {
                frame: pos,
                message: format!("joint {name:?} needs 3 coordinates, got {}", coords.len()),
            });
        };
        let p = Vec3::new(x, y, z);
        if !p.iter().all(|c| c.is_finite()) {
            return Err(PoseError::NonFinite { frame: pos, joint: id });
        }
        frame.set(id, p);
    }
    for id in JointId::raw() {
        if frame.get(id).is_none() && !(options.allow_missing_optional && id.is_optional()) {
            return Err(PoseError::MissingJoint { frame: pos, joint: id });
        }
    }
    Ok(frame)
}

/// Reads a line-delimited pose file. Blank lines are skipped.
///
/// The returned frames carry raw landmarks only; call [`augment_frame`]
/// before geometric evaluation.
pub fn parse_pose_sequence<R: BufRead>(
    source: R,
    options: ParseOptions,
) -> Result<PoseSequence, PoseError> {
    let mut frames: Vec<Frame> = Vec::new();
    for line in source.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pos = frames.len();
        let frame = parse_record(&line, pos, &options)?;
        if let Some(prev) = frames.last() {
            if frame.timestamp <= prev.timestamp {
                return Err(PoseError::NonIncreasingTimestamp {
                    frame: pos,
                    previous: prev.timestamp,
                    current: frame.timestamp,
                });
            }
        }
        frames.push(frame);
    }
    let frame_rate = match options.frame_rate {
        Some(rate) => rate,
        None => infer_frame_rate(&frames),
    };
    PoseSequence::new(frames, frame_rate)
}

fn infer_frame_rate(frames: &[Frame]) -> f64 {
    match (frames.first(), frames.last()) {
        (Some(first), Some(last)) if frames.len() >= 2 => {
            (frames.len() - 1) as f64 / (last.timestamp - first.timestamp)
        }
        _ => DEFAULT_FRAME_RATE,
    }
}

/// Serializes a frame's raw landmarks as one record line (no newline).
pub fn frame_record(frame: &Frame) -> String {
    let joints = frame
        .joints()
        .filter(|(id, _)| !id.is_virtual())
        .map(|(id, p)| (id.name(), [p.x, p.y, p.z]))
        .collect();
    let record = FrameRecordOut {
        index: frame.index,
        t: frame.timestamp,
        joints,
    };
    serde_json::to_string(&record).expect("frame records always serialize")
}

pub fn write_pose_sequence<W: Write>(mut out: W, seq: &PoseSequence) -> std::io::Result<()> {
    for frame in seq.frames() {
        writeln!(out, "{}", frame_record(frame))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_frame(index: usize, t: f64) -> Frame {
        let mut f = Frame::new(index, t);
        for (k, id) in JointId::raw().enumerate() {
            f.set(id, Vec3::new(k as f64 * 0.1, 1.0 + k as f64 * 0.01, -0.2));
        }
        f
    }

    fn text_of(frames: &[Frame]) -> String {
        frames.iter().map(|f| frame_record(f) + "\n").collect()
    }

    #[test]
    fn joint_names_round_trip() {
        for id in JointId::ALL {
            assert_eq!(JointId::from_str(id.name()), Ok(id));
        }
        assert_eq!(JointId::raw().count(), JointId::RAW_COUNT);
        assert!(JointId::from_str("left pinky").is_err());
    }

    #[test]
    fn parses_three_frames() {
        let text = text_of(&[full_frame(0, 0.0), full_frame(1, 0.1), full_frame(2, 0.2)]);
        let seq = parse_pose_sequence(text.as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(seq.len(), 3);
        assert!((seq.frame_rate() - 10.0).abs() < 1e-9);
        assert!(seq.frames().iter().all(|f| !f.is_augmented()));
    }

    #[test]
    fn missing_joint_names_joint_and_frame() {
        let mut second = full_frame(1, 0.1);
        second.remove(JointId::LeftKnee);
        let text = text_of(&[full_frame(0, 0.0), second]);
        let err = parse_pose_sequence(text.as_bytes(), ParseOptions::default()).unwrap_err();
        match err {
            PoseError::MissingJoint { frame, joint } => {
                assert_eq!(frame, 1);
                assert_eq!(joint, JointId::LeftKnee);
            }
            other => panic!("unexpected {other}"),
        }
        assert!(err_text(&text).contains("left knee"));
    }

    fn err_text(text: &str) -> String {
        parse_pose_sequence(text.as_bytes(), ParseOptions::default())
            .unwrap_err()
            .to_string()
    }

    #[test]
    fn repeated_timestamp_is_rejected() {
        let text = text_of(&[full_frame(0, 0.0), full_frame(1, 0.0)]);
        let err = parse_pose_sequence(text.as_bytes(), ParseOptions::default()).unwrap_err();
        assert!(matches!(err, PoseError::NonIncreasingTimestamp { frame: 1, .. }));
    }

    #[test]
    fn rejects_bad_records() {
        let good = frame_record(&full_frame(0, 0.0));
        let unknown = good.replacen("\"nose\"", "\"snout\"", 1);
        assert!(matches!(
            parse_pose_sequence(unknown.as_bytes(), ParseOptions::default()),
            Err(PoseError::UnknownJoint { .. })
        ));
        let virt = good.replacen("\"nose\"", "\"neck\"", 1);
        assert!(matches!(
            parse_pose_sequence(virt.as_bytes(), ParseOptions::default()),
            Err(PoseError::VirtualJointInInput { .. })
        ));
        assert!(matches!(
            parse_pose_sequence("{\"index\": 0".as_bytes(), ParseOptions::default()),
            Err(PoseError::Malformed { frame: 0, .. })
        ));
        let skipped = frame_record(&full_frame(1, 0.0));
        assert!(matches!(
            parse_pose_sequence(skipped.as_bytes(), ParseOptions::default()),
            Err(PoseError::IndexMismatch { frame: 0, found: 1 })
        ));
        let huge = good.replacen("[0.0,", "[1e999,", 1);
        assert!(parse_pose_sequence(huge.as_bytes(), ParseOptions::default()).is_err());
    }

    #[test]
    fn optional_joints_can_be_absent_when_allowed() {
        let mut f = full_frame(0, 0.0);
        f.remove(JointId::LeftHeel);
        let text = text_of(&[f]);
        assert!(parse_pose_sequence(text.as_bytes(), ParseOptions::default()).is_err());
        let opts = ParseOptions {
            allow_missing_optional: true,
            ..Default::default()
        };
        let seq = parse_pose_sequence(text.as_bytes(), opts).unwrap();
        assert!(seq.frames()[0].get(JointId::LeftHeel).is_none());
    }

    #[test]
    fn augmentation_midpoints() {
        let mut f = full_frame(0, 0.0);
        f.set(JointId::LeftHip, Vec3::new(1.0, 0.0, 0.0));
        f.set(JointId::RightHip, Vec3::new(3.0, 0.0, 0.0));
        f.set(JointId::LeftEar, Vec3::new(0.0, 2.0, 0.0));
        f.set(JointId::RightEar, Vec3::new(0.0, 2.0, 0.0));
        f.set(JointId::LeftShoulder, Vec3::new(1.0, 1.0, 0.0));
        f.set(JointId::RightShoulder, Vec3::new(-1.0, 1.0, 0.0));
        let a = augment_frame(&f).unwrap();
        assert_eq!(a.get(JointId::MidHip), Some(Vec3::new(2.0, 0.0, 0.0)));
        assert_eq!(a.get(JointId::MidEar), Some(Vec3::new(0.0, 2.0, 0.0)));
        assert_eq!(a.get(JointId::Neck), Some(Vec3::new(0.0, 1.0, 0.0)));
        assert_eq!(augment_frame(&a).unwrap(), a);
    }

    #[test]
    fn headlength_values() {
        let mut f = Frame::new(0, 0.0);
        f.set(JointId::Neck, Vec3::zeros());
        f.set(JointId::MidEar, Vec3::new(0.0, 0.05, 0.0));
        assert!((headlength(&f).unwrap().value() - 0.1).abs() < 1e-15);
        f.set(JointId::MidEar, Vec3::zeros());
        assert!(matches!(
            headlength(&f),
            Err(PoseError::DegenerateSkeleton { frame: 0 })
        ));
        f.set(JointId::Neck, Vec3::new(1.0, 1.0, 1.0));
        f.set(JointId::MidEar, Vec3::new(1.0, 1.1, 1.0));
        assert!((headlength(&f).unwrap().value() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn empty_input_is_an_empty_sequence() {
        let seq = parse_pose_sequence("".as_bytes(), ParseOptions::default()).unwrap();
        assert!(seq.is_empty());
        assert_eq!(seq.frame_rate(), DEFAULT_FRAME_RATE);
    }
}
