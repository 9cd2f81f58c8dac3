//! Discrete problem vectors for the case-based reasoner.

use std::collections::BTreeMap;

use crate::fluents::{FluentRegistry, FluentReport};
use crate::qmp::{ActionDatabase, AddOutcome};

pub const ABSENT: &str = "absent";

/// Feature names for the clip-level schema: every ADD entry, then the modal
/// state of every angle fluent.
pub fn clip_schema(add: &ActionDatabase, registry: &FluentRegistry) -> Vec<String> {
    add.entries
        .iter()
        .map(|e| format!("add:{}", e.name))
        .chain(registry.fluents().iter().map(|f| format!("state:{}", f.id)))
        .collect()
}

/// An entry counts as observed when it holds in at least half the windows.
pub fn clip_add_outcomes(per_window: &[BTreeMap<String, AddOutcome>], add: &ActionDatabase) -> BTreeMap<String, bool> {
    add.entries
        .iter()
        .map(|e| {
            let hits = per_window
                .iter()
                .filter(|w| w.get(&e.name).is_some_and(|o| o.satisfied))
                .count();
            (e.name.clone(), !per_window.is_empty() && 2 * hits >= per_window.len())
        })
        .collect()
}

/// Dominant instantaneous state of every angle fluent in one frame.
pub fn frame_states(report: &FluentReport, registry: &FluentRegistry) -> Vec<String> {
    registry
        .fluents()
        .iter()
        .map(|f| {
            let states = f.state_names();
            report.dominant(&f.id, &states).unwrap_or(ABSENT).to_string()
        })
        .collect()
}

/// Most frequent value; ties go to the lexicographically smallest.
fn modal<'a>(values: impl Iterator<Item = &'a str>) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    counts
        .into_iter()
        .fold(None, |best: Option<(&str, usize)>, (v, n)| match best {
            Some((_, b)) if b >= n => best,
            _ => Some((v, n)),
        })
        .map_or_else(|| ABSENT.to_string(), |(v, _)| v.to_string())
}

pub fn clip_features(
    add_outcomes: &BTreeMap<String, bool>,
    reports: &[FluentReport],
    add: &ActionDatabase,
    registry: &FluentRegistry,
) -> Vec<String> {
    let per_frame: Vec<Vec<String>> = reports.iter().map(|r| frame_states(r, registry)).collect();
    let mut out: Vec<String> = add
        .entries
        .iter()
        .map(|e| if add_outcomes.get(&e.name).copied().unwrap_or(false) { "yes" } else { "no" }.to_string())
        .collect();
    for i in 0..registry.fluents().len() {
        out.push(modal(per_frame.iter().map(|s| s[i].as_str())));
    }
    out
}

/// Schema for raw per-frame fluent states over `frames` frames.
pub fn timestep_schema(registry: &FluentRegistry, frames: usize) -> Vec<String> {
    (0..frames)
        .flat_map(|k| registry.fluents().iter().map(move |f| format!("t{k}:{}", f.id)))
        .collect()
}

/// Every frame's dominant states, truncated or padded with [`ABSENT`] to
/// `frames` frames.
pub fn timestep_features(reports: &[FluentReport], registry: &FluentRegistry, frames: usize) -> Vec<String> {
    let width = registry.fluents().len();
    let mut out = Vec::with_capacity(frames * width);
    for k in 0..frames {
        match reports.get(k) {
            Some(r) => out.extend(frame_states(r, registry)),
            None => out.extend(std::iter::repeat_n(ABSENT.to_string(), width)),
        }
    }
    out
}
