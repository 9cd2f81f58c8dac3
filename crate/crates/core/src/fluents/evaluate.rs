//! Per-frame evaluation of instantaneous and near fluents.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::confidence::{middle_confidence, transition_confidence};
use super::registry::{Channel, Family, FluentRegistry, FluentSpec, Measurement, Reference};
use crate::geometry::{angle_at_vertex, torso_frame, TorsoFrame};
use crate::skeleton::{headlength, Frame, Headlength, Side};

/// Confidences for one frame, keyed `"<fluent id>:<state>"`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FluentReport {
    #[serde(rename = "frame")]
    pub frame_index: usize,
    #[serde(rename = "fluents")]
    pub entries: BTreeMap<String, f64>,
    pub indeterminate: BTreeSet<String>,
}

impl FluentReport {
    pub fn new(frame_index: usize) -> Self {
        FluentReport {
            frame_index,
            ..Default::default()
        }
    }

    pub fn get(&self, fluent: &str, state: &str) -> Option<f64> {
        self.entries.get(&state_key(fluent, state)).copied()
    }

    /// Adds every entry and indeterminate id of `other`.
    pub fn merge(&mut self, other: FluentReport) {
        self.entries.extend(other.entries);
        self.indeterminate.extend(other.indeterminate);
    }

    /// State with the highest confidence among `states` of `fluent`.
    pub fn dominant<'a>(&self, fluent: &str, states: &[&'a str]) -> Option<&'a str> {
        let mut best: Option<(&str, f64)> = None;
        for &s in states {
            if let Some(c) = self.get(fluent, s) {
                if best.is_none_or(|(_, b)| c > b) {
                    best = Some((s, c));
                }
            }
        }
        best.map(|(s, _)| s)
    }
}

pub fn state_key(fluent: &str, state: &str) -> String {
    format!("{fluent}:{state}")
}

/// Lazily built torso frames and headlength of one augmented frame.
pub struct FrameGeometry<'a> {
    frame: &'a Frame,
    torso: [Option<Option<TorsoFrame>>; 2],
    headlength: Option<Option<Headlength>>,
}

impl<'a> FrameGeometry<'a> {
    pub fn new(frame: &'a Frame) -> Self {
        FrameGeometry {
            frame,
            torso: [None, None],
            headlength: None,
        }
    }

    pub fn frame(&self) -> &Frame {
        self.frame
    }

    pub fn torso(&mut self, side: Side) -> Option<TorsoFrame> {
        let slot = &mut self.torso[side as usize];
        *slot.get_or_insert_with(|| torso_frame(self.frame, side).ok())
    }

    pub fn headlength(&mut self) -> Option<Headlength> {
        *self.headlength.get_or_insert_with(|| headlength(self.frame).ok())
    }

    /// The channel's scalar, or `None` when its geometry is degenerate or a
    /// joint is missing.
    pub fn measure(&mut self, measurement: &Measurement) -> Option<f64> {
        match *measurement {
            Measurement::Angle { a, vertex, c } => {
                let f = self.frame;
                angle_at_vertex(f.get(a)?, f.get(vertex)?, f.get(c)?).value()
            }
            Measurement::Projected {
                a,
                vertex,
                reference,
                plane,
                frame_side,
            } => {
                let torso = self.torso(frame_side)?;
                let f = self.frame;
                let v = f.get(vertex)?;
                let c = match reference {
                    Reference::Joint(j) => f.get(j)?,
                    Reference::Forward => v + torso.forward,
                    Reference::Lateral => v + torso.lateral,
                };
                torso.projected_angle(f.get(a)?, v, c, plane).value()
            }
            Measurement::Distance { a, b } => {
                let hl = self.headlength()?;
                Some((self.frame.get(a)? - self.frame.get(b)?).norm() / hl.value())
            }
        }
    }
}

/// Extreme-state confidences `(s0, sn)` of one channel; for two-state
/// channels `sn` is the complement.
pub fn channel_confidences(channel: &Channel, x: f64, epsilon: f64) -> (f64, f64) {
    let c0 = transition_confidence(x, &channel.first_transition, epsilon);
    match &channel.last_transition {
        Some(spec) => (c0, transition_confidence(x, spec, epsilon)),
        None => (c0, 1.0 - c0),
    }
}

/// State confidences of a fluent given one measurement per channel.
pub fn fluent_confidences(fluent: &FluentSpec, values: &[f64], epsilon: f64) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut middle = 1.0;
    for (ch, &x) in fluent.channels.iter().zip(values) {
        let (c0, cn) = channel_confidences(ch, x, epsilon);
        out.push((ch.first.clone(), c0));
        out.push((ch.last.clone(), cn));
        if ch.is_three_state() {
            middle *= middle_confidence(c0, cn);
        }
    }
    if let Some(m) = &fluent.middle {
        out.push((m.clone(), middle));
    }
    out
}

/// Measures every channel of `fluent`; `None` if any is indeterminate.
pub fn measure_fluent(geom: &mut FrameGeometry, fluent: &FluentSpec) -> Option<Vec<f64>> {
    fluent.channels.iter().map(|ch| geom.measure(&ch.measurement)).collect()
}

/// Instantaneous states of every angle-derived fluent.
pub fn eval_instantaneous(frame: &Frame, registry: &FluentRegistry) -> FluentReport {
    let mut geom = FrameGeometry::new(frame);
    let mut report = FluentReport::new(frame.index);
    let eps = registry.config().epsilon;
    for fluent in registry.fluents() {
        insert_fluent(&mut report, &mut geom, fluent, eps);
    }
    report
}

fn insert_fluent(report: &mut FluentReport, geom: &mut FrameGeometry, fluent: &FluentSpec, eps: f64) {
    match measure_fluent(geom, fluent) {
        Some(values) => {
            for (state, c) in fluent_confidences(fluent, &values, eps) {
                report.entries.insert(state_key(&fluent.id, &state), c);
            }
        }
        None => {
            report.indeterminate.insert(fluent.id.clone());
        }
    }
}

/// Whether the near pair is skipped because an optional joint is absent.
fn pair_disabled(frame: &Frame, fluent: &FluentSpec, allow_missing: bool) -> bool {
    let Measurement::Distance { a, b } = fluent.channels[0].measurement else {
        return false;
    };
    allow_missing && [a, b].iter().any(|&j| j.is_optional() && frame.get(j).is_none())
}

/// Near, far and touching for every permitted joint pair.
pub fn eval_near(frame: &Frame, registry: &FluentRegistry) -> FluentReport {
    let mut geom = FrameGeometry::new(frame);
    let mut report = FluentReport::new(frame.index);
    let cfg = registry.config();
    for fluent in registry.near() {
        debug_assert_eq!(fluent.family, Family::Near);
        if pair_disabled(frame, fluent, cfg.allow_missing_optional) {
            continue;
        }
        let Measurement::Distance { a, b } = fluent.channels[0].measurement else {
            continue;
        };
        insert_fluent(&mut report, &mut geom, fluent, cfg.epsilon);
        if let (Some(pa), Some(pb)) = (frame.get(a), frame.get(b)) {
            if !report.indeterminate.contains(&fluent.id) {
                let touching = (pa - pb).norm() <= cfg.touching_distance;
                report
                    .entries
                    .insert(state_key(&fluent.id, "touching"), if touching { 1.0 } else { 0.0 });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{augment_frame, JointId};
    use crate::synth::upright_frame;

    fn registry() -> FluentRegistry {
        FluentRegistry::default()
    }

    #[test]
    fn upright_figure_states() {
        let frame = augment_frame(&upright_frame(0, 0.0)).unwrap();
        let r = eval_instantaneous(&frame, &registry());
        assert!(r.indeterminate.is_empty(), "{:?}", r.indeterminate);
        assert_eq!(r.get("left arm bent", "straight"), Some(1.0));
        assert_eq!(r.get("left arm raised", "lowered"), Some(1.0));
        assert_eq!(r.get("left leg raised", "lowered"), Some(1.0));
        // rest sits on the shared pi/2 edge of both bands
        let edge = (1.0 - 1e-3) * (1.0 - 1e-3);
        let near = |x: Option<f64>, want: f64| (x.unwrap() - want).abs() < 1e-9;
        assert!(near(r.get("left arm in front", "centered"), edge));
        assert!(near(r.get("right leg outward", "at side"), edge));
        assert!(near(r.get("head tilted", "centered"), edge * edge));
        assert!(near(r.get("torso twisted", "centered"), edge));
        assert!(near(r.get("head twisted", "centered"), edge));
        assert!(near(r.get("head twisted", "twisted left"), 1e-3));
    }

    #[test]
    fn t_pose_sits_on_both_band_edges() {
        let mut frame = upright_frame(0, 0.0);
        for side in Side::BOTH {
            let s = frame.get(side.shoulder()).unwrap();
            let out = if side == Side::Left { 1.0 } else { -1.0 };
            frame.set(side.elbow(), s + crate::skeleton::Vec3::new(out * 0.3, 0.0, 0.0));
            frame.set(side.wrist(), s + crate::skeleton::Vec3::new(out * 0.55, 0.0, 0.0));
            frame.set(side.index_finger(), s + crate::skeleton::Vec3::new(out * 0.62, 0.0, 0.0));
        }
        let frame = augment_frame(&frame).unwrap();
        let r = eval_instantaneous(&frame, &registry());
        let eps = 1e-3;
        let lowered = r.get("left arm raised", "lowered").unwrap();
        let raised = r.get("left arm raised", "raised").unwrap();
        let chest = r.get("left arm raised", "chest-level").unwrap();
        assert!((lowered - eps).abs() < 1e-9);
        assert!((raised - eps).abs() < 1e-9);
        assert!((chest - (1.0 - eps) * (1.0 - eps)).abs() < 1e-9);
    }

    #[test]
    fn near_examples() {
        let reg = registry();
        let mut frame = augment_frame(&upright_frame(0, 0.0)).unwrap();
        let hl = headlength(&frame).unwrap().value();
        let nose = frame.get(JointId::Nose).unwrap();
        frame.set(JointId::LeftIndexFinger, nose + crate::skeleton::Vec3::new(0.2 * hl, 0.0, 0.0));
        let r = eval_near(&frame, &reg);
        let id = "near(left index finger, nose)";
        assert_eq!(r.get(id, "near"), Some(1.0));
        assert_eq!(r.get(id, "far"), Some(0.0));

        frame.set(JointId::LeftIndexFinger, nose + crate::skeleton::Vec3::new(0.5 * hl, 0.0, 0.0));
        let r = eval_near(&frame, &reg);
        assert!((r.get(id, "near").unwrap() - 0.5).abs() < 1e-12);

        frame.set(JointId::LeftIndexFinger, nose + crate::skeleton::Vec3::new(0.05, 0.0, 0.0));
        assert_eq!(eval_near(&frame, &reg).get(id, "touching"), Some(1.0));
        frame.set(JointId::LeftIndexFinger, nose + crate::skeleton::Vec3::new(0.15, 0.0, 0.0));
        assert_eq!(eval_near(&frame, &reg).get(id, "touching"), Some(0.0));
        assert_eq!(eval_near(&frame, &reg).entries.len(), 74 * 3);
    }

    #[test]
    fn missing_optional_joints_disable_pairs() {
        let mut frame = upright_frame(0, 0.0);
        frame.remove(JointId::LeftHeel);
        let frame = augment_frame(&frame).unwrap();
        let strict = eval_near(&frame, &registry());
        assert!(strict.indeterminate.contains("near(left heel, right heel)"));
        let cfg = super::super::FluentConfig {
            allow_missing_optional: true,
            ..Default::default()
        };
        let lax = eval_near(&frame, &FluentRegistry::new(cfg).unwrap());
        assert!(lax.indeterminate.is_empty());
        assert!(!lax.entries.keys().any(|k| k.contains("left heel")));
    }

    #[test]
    fn degenerate_elbow_is_indeterminate() {
        let mut frame = upright_frame(0, 0.0);
        let elbow = frame.get(JointId::LeftElbow).unwrap();
        frame.set(JointId::LeftWrist, elbow);
        let frame = augment_frame(&frame).unwrap();
        let r = eval_instantaneous(&frame, &registry());
        assert!(r.indeterminate.contains("left arm bent"));
        assert!(r.get("left arm bent", "bent").is_none());
        assert!(r.get("right arm bent", "bent").is_some());
    }
}
