//! Forward-kinematic generator of stick-figure sequences with commanded
//! joint-angle trajectories.
//!
//! Body axes: left is `+x`, up is `+y`, forward is `+z`. Vertex-angle
//! channels (elbow, armpit, knee, hip) are reproduced exactly by
//! [`angle_at_vertex`](crate::geometry::angle_at_vertex) on the generated
//! joints.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skeleton::{Frame, JointId, PoseSequence, Side, Vec3};

pub const HALF_WIDTH: f64 = 0.18;
pub const HIP_HEIGHT: f64 = 1.0;
pub const SHOULDER_HEIGHT: f64 = 1.5;
pub const NECK_TO_MID_EAR: f64 = 0.12;
pub const UPPER_ARM: f64 = 0.3;
pub const FOREARM: f64 = 0.27;
pub const THIGH: f64 = 0.45;
pub const SHIN: f64 = 0.43;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("channel {channel:?} leaves [0, pi] at t={t}: {value}")]
    Infeasible { channel: String, t: f64, value: f64 },
    #[error("invalid motion spec: {0}")]
    Invalid(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("cannot parse motion spec: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Trajectory {
    Constant {
        value: f64,
    },
    Ramp {
        start: f64,
        /// Per second.
        rate: f64,
    },
    Sinusoid {
        center: f64,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl Trajectory {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Trajectory::Constant { value } => value,
            Trajectory::Ramp { start, rate } => start + rate * t,
            Trajectory::Sinusoid {
                center,
                amplitude,
                period,
                phase,
            } => center + amplitude * (2.0 * PI * t / period + phase).sin(),
        }
    }
}

/// Every commandable channel with its resting value.
pub fn channel_defaults() -> BTreeMap<&'static str, f64> {
    BTreeMap::from([
        ("left elbow", PI),
        ("right elbow", PI),
        ("left armpit", 0.08),
        ("right armpit", 0.08),
        ("left arm azimuth", 0.0),
        ("right arm azimuth", 0.0),
        ("left knee", PI),
        ("right knee", PI),
        ("left hip", PI),
        ("right hip", PI),
        ("left hip azimuth", FRAC_PI_2),
        ("right hip azimuth", FRAC_PI_2),
        ("neck pitch", 0.0),
        ("neck roll", 0.0),
        ("neck yaw", 0.0),
        ("torso twist", 0.0),
        ("body pitch", 0.0),
    ])
}

fn is_vertex_channel(name: &str) -> bool {
    ["elbow", "armpit", "knee", "hip"]
        .iter()
        .any(|s| name.ends_with(&format!(" {s}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSpec {
    pub duration: f64,
    #[serde(default = "default_rate")]
    pub frame_rate: f64,
    /// Standard deviation of isotropic per-joint jitter.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub channels: BTreeMap<String, Trajectory>,
}

fn default_rate() -> f64 {
    30.0
}

impl MotionSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        toml::from_str(text).map_err(|e| SynthError::Parse(e.to_string()))
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.frame_rate).round() as usize
    }

    fn validate(&self) -> Result<(), SynthError> {
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(SynthError::Invalid("duration must be non-negative".into()));
        }
        if !(self.frame_rate > 0.0) || !self.frame_rate.is_finite() {
            return Err(SynthError::Invalid("frame rate must be positive".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(SynthError::Invalid("noise must be non-negative".into()));
        }
        let known = channel_defaults();
        for (name, traj) in &self.channels {
            if !known.contains_key(name.as_str()) {
                return Err(SynthError::UnknownChannel(name.clone()));
            }
            if let Trajectory::Sinusoid { period, .. } = traj {
                if !(*period > 0.0) {
                    return Err(SynthError::Invalid(format!("{name}: period must be positive")));
                }
            }
        }
        Ok(())
    }

    /// Channel values at time `t`.
    pub fn values_at(&self, t: f64) -> BTreeMap<&'static str, f64> {
        let mut values = channel_defaults();
        for (name, v) in values.iter_mut() {
            if let Some(traj) = self.channels.get(*name) {
                *v = traj.at(t);
            }
        }
        values
    }
}

fn gram_schmidt(v: Vec3, against: &[Vec3]) -> Vec3 {
    let mut out = v;
    for a in against {
        out -= out.dot(a) * a;
    }
    out.normalize()
}

fn rotate_about(p: Vec3, pivot: Vec3, axis: Vec3, angle: f64) -> Vec3 {
    let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
    pivot + rot * (p - pivot)
}

/// Places a two-link chain at `root` so that the angle between the first
/// link and `toward` is `spread` and the vertex angle at the middle joint
/// is `bend`. `e1`, `e2` span the azimuth plane around `toward`.
#[allow(clippy::too_many_arguments)]
fn chain(root: Vec3, toward: Vec3, e1: Vec3, e2: Vec3, azimuth: f64, spread: f64, bend: f64, l1: f64, l2: f64) -> (Vec3, Vec3, Vec3) {
    let e = azimuth.cos() * e1 + azimuth.sin() * e2;
    let u = spread.cos() * toward + spread.sin() * e;
    let g = spread.cos() * e - spread.sin() * toward;
    let w = bend.cos() * (-u) + bend.sin() * g;
    let mid = root + l1 * u;
    let end = mid + l2 * w;
    (mid, end, w)
}

/// Joint positions for one set of channel values.
pub fn pose(values: &BTreeMap<&'static str, f64>, index: usize, t: f64) -> Frame {
    let v = |k: &str| values[k];
    let x = Vec3::x();
    let y = Vec3::y();
    let z = Vec3::z();
    let mid_hip = Vec3::new(0.0, HIP_HEIGHT, 0.0);
    let twist = v("torso twist");
    let mut frame = Frame::new(index, t);

    let hip = |s: Side| Vec3::new(sign(s) * HALF_WIDTH, HIP_HEIGHT, 0.0);
    let shoulder = |s: Side| rotate_about(Vec3::new(sign(s) * HALF_WIDTH, SHOULDER_HEIGHT, 0.0), mid_hip, y, twist);
    let left_u = rotate_about(x, Vec3::zeros(), y, twist);
    let fwd_u = rotate_about(z, Vec3::zeros(), y, twist);

    for side in Side::BOTH {
        let s = side.name();
        let sh = shoulder(side);
        let hp = hip(side);
        frame.set(side.shoulder(), sh);
        frame.set(side.hip(), hp);

        let d = (hp - sh).normalize();
        let out = gram_schmidt(sign(side) * left_u, &[d]);
        let fwd = gram_schmidt(fwd_u, &[d, out]);
        let (elbow, wrist, dir) = chain(
            sh,
            d,
            out,
            fwd,
            v(&format!("{s} arm azimuth")),
            v(&format!("{s} armpit")),
            v(&format!("{s} elbow")),
            UPPER_ARM,
            FOREARM,
        );
        frame.set(side.elbow(), elbow);
        frame.set(side.wrist(), wrist);
        frame.set(side.index_finger(), wrist + 0.08 * dir);

        let d = (sh - hp).normalize();
        let out = gram_schmidt(sign(side) * x, &[d]);
        let fwd = gram_schmidt(z, &[d, out]);
        let (knee, ankle, _) = chain(
            hp,
            d,
            out,
            fwd,
            v(&format!("{s} hip azimuth")),
            v(&format!("{s} hip")),
            v(&format!("{s} knee")),
            THIGH,
            SHIN,
        );
        frame.set(side.knee(), knee);
        frame.set(side.ankle(), ankle);
        frame.set(side.heel(), ankle - 0.06 * z - 0.04 * y);
        frame.set(side.big_toe(), ankle + 0.15 * z - 0.05 * y + sign(side) * 0.02 * x);
    }

    let neck = 0.5 * (shoulder(Side::Left) + shoulder(Side::Right));
    let (yaw, pitch, roll) = (v("neck yaw"), v("neck pitch"), v("neck roll"));
    let f1 = yaw.cos() * fwd_u + yaw.sin() * left_u;
    let l1 = yaw.cos() * left_u - yaw.sin() * fwd_u;
    let u2 = pitch.cos() * y + pitch.sin() * f1;
    let f2 = pitch.cos() * f1 - pitch.sin() * y;
    let u3 = roll.cos() * u2 + roll.sin() * l1;
    let l3 = roll.cos() * l1 - roll.sin() * u2;
    let ear = neck + NECK_TO_MID_EAR * u3;
    frame.set(JointId::Nose, ear + 0.1 * f2);
    for side in Side::BOTH {
        let lat = sign(side) * l3;
        frame.set(side.ear(), ear + 0.075 * lat);
        frame.set(side.eye(), ear + 0.085 * f2 + 0.01 * u3 + 0.035 * lat);
        frame.set(side.mouth(), ear + 0.08 * f2 - 0.06 * u3 + 0.025 * lat);
    }

    let body_pitch = v("body pitch");
    if body_pitch != 0.0 {
        frame = frame.map_positions(|p| rotate_about(p, mid_hip, x, body_pitch));
    }
    frame
}

fn sign(side: Side) -> f64 {
    match side {
        Side::Left => 1.0,
        Side::Right => -1.0,
    }
}

/// The resting figure: arms hanging, legs straight, head level.
pub fn upright_frame(index: usize, t: f64) -> Frame {
    pose(&channel_defaults(), index, t)
}

/// Samples the spec at its frame rate. Raw joints only; virtual joints are
/// left to augmentation.
pub fn generate_motion(spec: &MotionSpec) -> Result<PoseSequence, SynthError> {
    spec.validate()?;
    let n = spec.frame_count();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let jitter = Normal::new(0.0, spec.noise.max(0.0)).map_err(|e| SynthError::Invalid(e.to_string()))?;
    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / spec.frame_rate;
        let values = spec.values_at(t);
        for (name, value) in &values {
            if is_vertex_channel(name) && !(0.0..=PI).contains(value) {
                return Err(SynthError::Infeasible {
                    channel: name.to_string(),
                    t,
                    value: *value,
                });
            }
        }
        let mut frame = pose(&values, k, t);
        if spec.noise > 0.0 {
            for id in JointId::raw() {
                if let Some(p) = frame.get(id) {
                    let d = Vec3::new(jitter.sample(&mut rng), jitter.sample(&mut rng), jitter.sample(&mut rng));
                    frame.set(id, p + d);
                }
            }
        }
        frames.push(frame);
    }
    PoseSequence::new(frames, spec.frame_rate).map_err(|e| SynthError::Invalid(e.to_string()))
}

pub const PRESETS: [&str; 4] = ["squat", "push-up", "jumping jack", "single-leg Romanian deadlift"];

fn sinusoid(center: f64, amplitude: f64, period: f64, phase: f64) -> Trajectory {
    Trajectory::Sinusoid {
        center,
        amplitude,
        period,
        phase,
    }
}

fn constant(value: f64) -> Trajectory {
    Trajectory::Constant { value }
}

/// Kinematics for the four exercises.
pub fn preset(name: &str) -> Result<MotionSpec, SynthError> {
    let mut ch: BTreeMap<String, Trajectory> = BTreeMap::new();
    fn both(ch: &mut BTreeMap<String, Trajectory>, joint: &str, t: Trajectory) {
        for s in ["left", "right"] {
            ch.insert(format!("{s} {joint}"), t);
        }
    }
    let duration = match name {
        "squat" => {
            both(&mut ch, "knee", sinusoid(2.3, 0.75, 3.0, FRAC_PI_2));
            both(&mut ch, "hip", sinusoid(2.3, 0.75, 3.0, FRAC_PI_2));
            both(&mut ch, "armpit", sinusoid(0.6, 0.5, 3.0, -FRAC_PI_2));
            both(&mut ch, "arm azimuth", constant(FRAC_PI_2));
            9.0
        }
        "push-up" => {
            both(&mut ch, "armpit", constant(FRAC_PI_2));
            both(&mut ch, "arm azimuth", constant(FRAC_PI_2));
            both(&mut ch, "elbow", sinusoid(2.2, 0.85, 2.5, FRAC_PI_2));
            ch.insert("body pitch".into(), constant(1.3));
            7.5
        }
        "jumping jack" => {
            both(&mut ch, "armpit", sinusoid(1.55, 1.3, 1.5, -FRAC_PI_2));
            both(&mut ch, "arm azimuth", constant(0.0));
            both(&mut ch, "hip", sinusoid(PI - 0.2, 0.19, 1.5, FRAC_PI_2));
            both(&mut ch, "hip azimuth", constant(0.0));
            6.0
        }
        "single-leg Romanian deadlift" => {
            ch.insert("left hip".into(), sinusoid(2.25, 0.8, 4.0, FRAC_PI_2));
            ch.insert("left knee".into(), constant(2.9));
            ch.insert("right hip".into(), constant(PI - 0.05));
            both(&mut ch, "armpit", sinusoid(0.8, 0.7, 4.0, -FRAC_PI_2));
            both(&mut ch, "arm azimuth", constant(FRAC_PI_2));
            ch.insert("body pitch".into(), sinusoid(0.7, 0.7, 4.0, -FRAC_PI_2));
            12.0
        }
        other => return Err(SynthError::UnknownPreset(other.to_string())),
    };
    Ok(MotionSpec {
        duration,
        frame_rate: 30.0,
        noise: 0.0,
        seed: 0,
        channels: ch,
    })
}

/// Randomly rescales amplitudes and periods by up to `strength` (relative),
/// shifts phases, and adds `noise` jitter. Vertex channels are clipped to
/// stay feasible.
pub fn perturb(spec: &MotionSpec, seed: u64, strength: f64, noise: f64) -> MotionSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = spec.clone();
    let tempo = 1.0 + rng.random_range(-strength..=strength);
    for (name, traj) in out.channels.iter_mut() {
        if let Trajectory::Sinusoid {
            center,
            amplitude,
            period,
            phase,
        } = traj
        {
            *amplitude *= 1.0 + rng.random_range(-strength..=strength);
            *period *= tempo;
            *phase += rng.random_range(-0.5..=0.5);
            if is_vertex_channel(name) {
                let room = (*center).min(PI - *center).max(0.0);
                *amplitude = amplitude.min(room);
            }
        }
    }
    out.noise = noise;
    out.seed = seed;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_at_vertex;

    fn angle(frame: &Frame, a: JointId, b: JointId, c: JointId) -> f64 {
        angle_at_vertex(frame.get(a).unwrap(), frame.get(b).unwrap(), frame.get(c).unwrap()).radians()
    }

    #[test]
    fn constant_spec_repeats_frames() {
        let spec = MotionSpec {
            duration: 1.0,
            frame_rate: 10.0,
            noise: 0.0,
            seed: 0,
            channels: BTreeMap::new(),
        };
        let seq = generate_motion(&spec).unwrap();
        assert_eq!(seq.len(), 10);
        for f in seq.frames() {
            let a: Vec<_> = f.joints().collect();
            let b: Vec<_> = seq.frames()[0].joints().collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn knee_sinusoid_closed_loop() {
        let traj = sinusoid(2.0, 0.6, 2.0, 0.0);
        let spec = MotionSpec {
            duration: 4.0,
            frame_rate: 30.0,
            noise: 0.0,
            seed: 0,
            channels: BTreeMap::from([("left knee".to_string(), traj)]),
        };
        let seq = generate_motion(&spec).unwrap();
        for f in seq.frames() {
            let measured = angle(f, JointId::LeftHip, JointId::LeftKnee, JointId::LeftAnkle);
            assert!((measured - traj.at(f.timestamp)).abs() < 1e-6);
        }
    }

    #[test]
    fn infeasible_angle_is_rejected() {
        let spec = MotionSpec {
            duration: 2.0,
            frame_rate: 30.0,
            noise: 0.0,
            seed: 0,
            channels: BTreeMap::from([("left elbow".to_string(), sinusoid(3.0, 0.5, 1.0, 0.0))]),
        };
        assert!(matches!(generate_motion(&spec), Err(SynthError::Infeasible { .. })));
        let bad = MotionSpec {
            channels: BTreeMap::from([("left tail".to_string(), constant(1.0))]),
            ..spec
        };
        assert!(matches!(generate_motion(&bad), Err(SynthError::UnknownChannel(_))));
    }

    #[test]
    fn presets_are_feasible() {
        for name in PRESETS {
            let seq = generate_motion(&preset(name).unwrap()).unwrap();
            assert!(!seq.is_empty());
            for seed in 0..5 {
                generate_motion(&perturb(&preset(name).unwrap(), seed, 0.15, 0.002)).unwrap();
            }
        }
    }

    #[test]
    fn noise_is_seeded() {
        let mut spec = preset("squat").unwrap();
        spec.noise = 0.01;
        let a = generate_motion(&spec).unwrap();
        let b = generate_motion(&spec).unwrap();
        assert_eq!(a, b);
        spec.seed = 1;
        assert_ne!(a, generate_motion(&spec).unwrap());
    }

    #[test]
    fn spec_parses_from_toml() {
        let spec = MotionSpec::from_toml_str(
            "duration = 2.0\n[channels]\n\"left knee\" = { kind = \"sinusoid\", center = 2.0, amplitude = 0.5, period = 1.0 }\n",
        )
        .unwrap();
        assert_eq!(spec.frame_rate, 30.0);
        assert_eq!(spec.frame_count(), 60);
    }
}
