//! Activity recognition: DAD scoring, case-based reasoning and explanations.

pub mod cbr;
pub mod dad;
pub mod explain;
pub mod features;

use std::collections::BTreeMap;

use thiserror::Error;

pub use cbr::{similarity, trim_init, Case, CaseBase, CbrError, Classification, RetainOutcome, TrimPolicy};
pub use dad::{dad_score, mean_ratios, ActivityConfig, ActivityError, ActivityScore, DadTracker, ResolvedActivity};
pub use explain::{explain_cbr, explain_dad, Explanation, ExplanationItem};

use crate::fluents::{fluent_stream, FluentRegistry, FluentStream};
use crate::qmp::{characterize_stream, evaluate_add, ActionDatabase, AddOutcome, QmpError, RegressionConfig, WindowModels};
use crate::skeleton::{PoseError, PoseSequence};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Qmp(#[from] QmpError),
    #[error("sequence is shorter than one second; no window to characterize")]
    TooShort,
}

pub struct Models<'a> {
    pub registry: &'a FluentRegistry,
    pub add: &'a ActionDatabase,
    pub activities: &'a [ResolvedActivity],
    pub regression: &'a RegressionConfig,
    pub window_s: f64,
    pub hop_s: f64,
}

/// Everything computed from one pose sequence.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub stream: FluentStream,
    pub windows: Vec<WindowModels>,
    pub add_results: Vec<BTreeMap<String, AddOutcome>>,
    pub scores: Vec<Vec<ActivityScore>>,
}

impl Analysis {
    /// Mean ratio of each activity over all windows.
    pub fn mean_ratios(&self) -> Vec<(String, f64)> {
        mean_ratios(&self.scores)
    }

    /// Activity with the highest mean ratio; ties keep definition order.
    pub fn top_activity(&self) -> Option<(String, f64)> {
        self.mean_ratios()
            .into_iter()
            .fold(None, |best, (n, r)| match best {
                Some((_, b)) if b >= r => best,
                _ => Some((n, r)),
            })
    }

    pub fn clip_add_outcomes(&self, add: &ActionDatabase) -> BTreeMap<String, bool> {
        features::clip_add_outcomes(&self.add_results, add)
    }

    pub fn clip_features(&self, add: &ActionDatabase, registry: &FluentRegistry) -> Vec<String> {
        features::clip_features(&self.clip_add_outcomes(add), &self.stream.reports, add, registry)
    }
}

pub fn analyze(seq: &PoseSequence, m: &Models) -> Result<Analysis, AnalysisError> {
    let stream = fluent_stream(seq, m.registry)?;
    let series = m.add.series();
    let windows = characterize_stream(&stream, m.regression, m.window_s, m.hop_s, Some(&series))?;
    if windows.is_empty() {
        return Err(AnalysisError::TooShort);
    }
    let mut tracker = DadTracker::default();
    let mut add_results = Vec::with_capacity(windows.len());
    let mut scores = Vec::with_capacity(windows.len());
    for w in &windows {
        let r = evaluate_add(&w.models, m.add);
        scores.push(tracker.push(&r, m.activities));
        add_results.push(r);
    }
    Ok(Analysis {
        stream,
        windows,
        add_results,
        scores,
    })
}
