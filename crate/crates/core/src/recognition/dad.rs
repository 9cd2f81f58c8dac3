//! Dynamic action detection: weighted ratios of satisfied ADD criteria per
//! activity, with optional ordering between criterion onsets.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cbr::TrimPolicy;
use crate::qmp::{ActionDatabase, AddOutcome};

#[derive(Debug, Error)]
pub enum ActivityError {
    #[error("cannot parse activity definitions: {0}")]
    Parse(String),
    #[error("activity {activity:?}: {message}")]
    Invalid { activity: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Criterion {
    /// ADD entry name.
    pub entry: String,
    /// Overrides the entry's own weight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<u8>,
}

/// `first` must have its onset no later than `then`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConstraint {
    pub first: String,
    pub then: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityDefinition {
    pub name: String,
    pub criteria: Vec<Criterion>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequence: Vec<SequenceConstraint>,
}

/// Activity definitions plus the case-base policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityConfig {
    #[serde(rename = "activity")]
    pub activities: Vec<ActivityDefinition>,
    #[serde(default)]
    pub cbr: TrimPolicy,
}

pub const DEFAULT_ACTIVITIES: &str = include_str!("../../config/activities.toml");

impl ActivityConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ActivityError> {
        toml::from_str(text).map_err(|e| ActivityError::Parse(e.to_string()))
    }

    /// Resolves weights against `add` and checks every reference.
    pub fn resolve(&self, add: &ActionDatabase) -> Result<Vec<ResolvedActivity>, ActivityError> {
        let mut names = BTreeSet::new();
        self.activities
            .iter()
            .map(|a| {
                let bad = |message: String| ActivityError::Invalid {
                    activity: a.name.clone(),
                    message,
                };
                if !names.insert(a.name.as_str()) {
                    return Err(bad("defined twice".into()));
                }
                if a.criteria.len() < 2 {
                    return Err(bad("needs at least two criteria".into()));
                }
                let mut criteria = Vec::new();
                for c in &a.criteria {
                    let entry = add
                        .get(&c.entry)
                        .ok_or_else(|| bad(format!("unknown ADD entry {:?}", c.entry)))?;
                    let weight = c.weight.unwrap_or(entry.weight);
                    if !(1..=10).contains(&weight) {
                        return Err(bad(format!("weight of {:?} must be 1..=10", c.entry)));
                    }
                    criteria.push((c.entry.clone(), weight));
                }
                for s in &a.sequence {
                    for n in [&s.first, &s.then] {
                        if !criteria.iter().any(|(e, _)| e == n) {
                            return Err(bad(format!("sequence names {n:?}, which is not a criterion")));
                        }
                    }
                }
                Ok(ResolvedActivity {
                    name: a.name.clone(),
                    criteria,
                    sequence: a.sequence.clone(),
                })
            })
            .collect()
    }
}

impl Default for ActivityConfig {
    fn default() -> Self {
        ActivityConfig::from_toml_str(DEFAULT_ACTIVITIES).expect("shipped activities are valid")
    }
}

/// Activity with criterion weights fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedActivity {
    pub name: String,
    pub criteria: Vec<(String, u8)>,
    pub sequence: Vec<SequenceConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityScore {
    pub activity: String,
    pub ratio: f64,
    pub ordered: bool,
    pub satisfied: Vec<String>,
    pub unsatisfied: Vec<String>,
}

/// Scores every activity on one window's ADD results. `onsets` maps entry
/// names to the window index where they were first satisfied.
pub fn dad_score(
    add_results: &BTreeMap<String, AddOutcome>,
    defs: &[ResolvedActivity],
    onsets: Option<&BTreeMap<String, usize>>,
) -> Vec<ActivityScore> {
    defs.iter()
        .map(|a| {
            let mut total = 0.0;
            let mut hit = 0.0;
            let mut satisfied = Vec::new();
            let mut unsatisfied = Vec::new();
            for (entry, weight) in &a.criteria {
                total += *weight as f64;
                if add_results.get(entry).is_some_and(|o| o.satisfied) {
                    hit += *weight as f64;
                    satisfied.push(entry.clone());
                } else {
                    unsatisfied.push(entry.clone());
                }
            }
            let ordered = a.sequence.iter().all(|s| {
                let onset = |n: &str| onsets.and_then(|o| o.get(n).copied());
                matches!((onset(&s.first), onset(&s.then)), (Some(f), Some(t)) if f <= t)
            });
            ActivityScore {
                activity: a.name.clone(),
                ratio: if total > 0.0 { hit / total } else { 0.0 },
                ordered,
                satisfied,
                unsatisfied,
            }
        })
        .collect()
}

/// Tracks criterion onsets across consecutive windows.
#[derive(Debug, Clone, Default)]
pub struct DadTracker {
    window: usize,
    onsets: BTreeMap<String, usize>,
}

impl DadTracker {
    pub fn push(&mut self, add_results: &BTreeMap<String, AddOutcome>, defs: &[ResolvedActivity]) -> Vec<ActivityScore> {
        for (name, o) in add_results {
            if o.satisfied {
                self.onsets.entry(name.clone()).or_insert(self.window);
            }
        }
        self.window += 1;
        dad_score(add_results, defs, Some(&self.onsets))
    }

    pub fn onsets(&self) -> &BTreeMap<String, usize> {
        &self.onsets
    }
}

/// Mean ratio per activity over windows, in definition order.
pub fn mean_ratios(per_window: &[Vec<ActivityScore>]) -> Vec<(String, f64)> {
    let Some(first) = per_window.first() else {
        return Vec::new();
    };
    first
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let sum: f64 = per_window.iter().map(|w| w[i].ratio).sum();
            (s.activity.clone(), sum / per_window.len() as f64)
        })
        .collect()
}
