//! Locally temporal fluents and the per-frame driver over a sequence.

use std::collections::{BTreeMap, VecDeque};

use super::confidence::temporal_confidences;
use super::evaluate::{eval_near, fluent_confidences, state_key, FluentReport, FrameGeometry};
use super::registry::{Channel, FluentRegistry, FluentSpec};
use crate::fluents::confidence::Motion;
use crate::skeleton::{augment_frame, Frame, PoseError, PoseSequence};

/// The last `r + 1` consecutive valid measurements of one channel.
#[derive(Debug, Clone)]
pub struct TemporalWindow {
    r: usize,
    history: VecDeque<f64>,
}

impl TemporalWindow {
    pub fn new(r: usize) -> Self {
        TemporalWindow {
            r,
            history: VecDeque::with_capacity(r + 1),
        }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Appends a measurement; an indeterminate one clears the history.
    pub fn push(&mut self, x: Option<f64>) {
        match x {
            Some(x) => {
                if self.history.len() == self.r + 1 {
                    self.history.pop_front();
                }
                self.history.push_back(x);
            }
            None => self.history.clear(),
        }
    }

    pub fn is_full(&self) -> bool {
        self.history.len() == self.r + 1
    }

    pub fn history(&self) -> Vec<f64> {
        self.history.iter().copied().collect()
    }
}

/// `(toward s0, toward sn, still)` with their state names, once the window
/// is full.
pub fn eval_temporal(window: &TemporalWindow, channel: &Channel, epsilon: f64) -> Option<[(String, f64); 3]> {
    if !window.is_full() {
        return None;
    }
    let (down, up, still) = temporal_confidences(&window.history(), &channel.motion, epsilon);
    let (first, last) = match channel.first_motion() {
        Motion::Decreasing => (down, up),
        Motion::Increasing => (up, down),
    };
    Some([
        (channel.toward_first.clone(), first),
        (channel.toward_last.clone(), last),
        (channel.still.clone(), still),
    ])
}

/// Stateful per-frame evaluator; frames must arrive in index order.
pub struct StreamEvaluator<'a> {
    registry: &'a FluentRegistry,
    windows: BTreeMap<String, TemporalWindow>,
}

/// One evaluated frame: its report and the raw measurement of every channel.
pub struct FrameOutput {
    pub report: FluentReport,
    pub measurements: BTreeMap<String, Option<f64>>,
}

impl<'a> StreamEvaluator<'a> {
    pub fn new(registry: &'a FluentRegistry) -> Self {
        StreamEvaluator {
            registry,
            windows: BTreeMap::new(),
        }
    }

    /// Evaluates an augmented frame.
    pub fn push(&mut self, frame: &Frame) -> FrameOutput {
        let cfg = self.registry.config();
        let eps = cfg.epsilon;
        let mut report = FluentReport::new(frame.index);
        let mut measurements = BTreeMap::new();
        let mut geom = FrameGeometry::new(frame);

        let near = eval_near(frame, self.registry);
        let emitted: Vec<&FluentSpec> = self
            .registry
            .near()
            .iter()
            .filter(|f| near.indeterminate.contains(&f.id) || near.entries.contains_key(&state_key(&f.id, "near")))
            .collect();
        report.merge(near);

        for fluent in self.registry.fluents().iter().chain(emitted) {
            let values: Vec<Option<f64>> = fluent.channels.iter().map(|ch| geom.measure(&ch.measurement)).collect();
            let complete: Option<Vec<f64>> = values.iter().copied().collect();
            match &complete {
                Some(v) if fluent.family != super::registry::Family::Near => {
                    for (state, c) in fluent_confidences(fluent, v, eps) {
                        report.entries.insert(state_key(&fluent.id, &state), c);
                    }
                }
                Some(_) => {}
                None => {
                    report.indeterminate.insert(fluent.id.clone());
                }
            }
            for (ch, x) in fluent.channels.iter().zip(&values) {
                measurements.insert(ch.id.clone(), *x);
                let window = self
                    .windows
                    .entry(ch.id.clone())
                    .or_insert_with(|| TemporalWindow::new(cfg.window));
                window.push(*x);
                if let Some(states) = eval_temporal(window, ch, eps) {
                    for (state, c) in states {
                        report.entries.insert(state_key(&fluent.id, &state), c);
                    }
                }
            }
        }
        FrameOutput { report, measurements }
    }
}

/// Reports for a whole sequence plus every channel's measurement series.
#[derive(Debug, Clone, Default)]
pub struct FluentStream {
    pub reports: Vec<FluentReport>,
    /// Radians for angle channels, headlengths for near pairs; `None` where
    /// indeterminate.
    pub series: BTreeMap<String, Vec<Option<f64>>>,
    pub frame_rate: f64,
}

impl FluentStream {
    /// Contiguous valid samples of `id` over `start..end`, if there are no
    /// gaps.
    pub fn window(&self, id: &str, start: usize, end: usize) -> Option<Vec<f64>> {
        self.series.get(id)?.get(start..end)?.iter().copied().collect()
    }
}

/// Augments and evaluates every frame in order.
pub fn fluent_stream(seq: &PoseSequence, registry: &FluentRegistry) -> Result<FluentStream, PoseError> {
    let mut eval = StreamEvaluator::new(registry);
    let mut stream = FluentStream {
        frame_rate: seq.frame_rate(),
        ..Default::default()
    };
    for frame in seq.frames() {
        let frame = augment_frame(frame)?;
        let out = eval.push(&frame);
        for (id, x) in out.measurements {
            stream.series.entry(id).or_default().push(x);
        }
        stream.reports.push(out.report);
    }
    Ok(stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluents::MotionThreshold;
    use crate::synth::upright_frame;
    use std::f64::consts::PI;

    const ANGLE: MotionThreshold = MotionThreshold {
        tau: PI / 72.0,
        delta: PI / 72.0,
    };

    #[test]
    fn window_fills_and_resets() {
        let mut w = TemporalWindow::new(5);
        for k in 0..5 {
            w.push(Some(k as f64));
            assert!(!w.is_full());
        }
        w.push(Some(5.0));
        assert!(w.is_full());
        w.push(Some(6.0));
        assert_eq!(w.history(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        w.push(None);
        assert!(!w.is_full());
        assert!(w.history().is_empty());
    }

    #[test]
    fn bending_ramp_saturates() {
        let reg = FluentRegistry::default();
        let ch = reg.channel("left arm bent").unwrap();
        assert_eq!(ch.motion, ANGLE);
        let mut w = TemporalWindow::new(5);
        for k in 0..6 {
            w.push(Some(3.0 - k as f64 * PI / 36.0));
        }
        let [(a, bending), (_, straightening), (_, still)] = eval_temporal(&w, ch, 1e-3).unwrap();
        assert_eq!(a, "bending");
        assert_eq!(bending, 1.0);
        assert_eq!(straightening, 0.0);
        assert_eq!(still, 0.0);
    }

    #[test]
    fn constant_sequence_stream() {
        let reg = FluentRegistry::default();
        let frames: Vec<Frame> = (0..10).map(|k| upright_frame(k, k as f64 / 30.0)).collect();
        let seq = PoseSequence::new(frames, 30.0).unwrap();
        let stream = fluent_stream(&seq, &reg).unwrap();
        assert_eq!(stream.reports.len(), 10);
        for (k, r) in stream.reports.iter().enumerate() {
            let still = r.get("left arm bent", "still");
            if k < 5 {
                assert!(still.is_none());
            } else {
                assert!(still.unwrap() > 0.99);
            }
            assert_eq!(r.get("left arm bent", "straight"), Some(1.0));
        }
        let first: Vec<_> = stream.reports[0].entries.iter().filter(|(k, _)| !k.contains("still")).collect();
        let last: BTreeMap<_, _> = stream.reports[9].entries.iter().collect();
        for (k, v) in first {
            assert_eq!(last[k], v);
        }
        assert_eq!(stream.series["left arm bent"].len(), 10);
        assert!(stream.window("near(left heel, right heel)", 0, 10).is_some());
    }

    #[test]
    fn empty_sequence_gives_empty_stream() {
        let seq = PoseSequence::new(vec![], 30.0).unwrap();
        let stream = fluent_stream(&seq, &FluentRegistry::default()).unwrap();
        assert!(stream.reports.is_empty());
    }
}
