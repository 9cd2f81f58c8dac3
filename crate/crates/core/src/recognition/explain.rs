//! Template explanations for DAD scores and CBR classifications.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::cbr::{CaseBase, Classification};
use super::dad::ActivityScore;
use crate::qmp::AddOutcome;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplanationItem {
    pub feature: String,
    pub observed: String,
    pub expected: String,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    /// `"dad"` or `"cbr"`.
    pub kind: String,
    /// Activity name, or the label assigned by the case base.
    pub subject: String,
    /// Ratio or similarity.
    pub value: f64,
    pub items: Vec<ExplanationItem>,
}

impl Explanation {
    pub fn mismatches(&self) -> impl Iterator<Item = &ExplanationItem> {
        self.items.iter().filter(|i| !i.matched)
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        match self.kind.as_str() {
            "dad" => {
                let _ = writeln!(s, "{}: ratio {:.3}", self.subject, self.value);
            }
            _ => {
                let _ = writeln!(s, "classified as {}: similarity {:.3}", self.subject, self.value);
            }
        }
        for i in &self.items {
            let mark = if i.matched { "match" } else { "MISMATCH" };
            let _ = writeln!(
                s,
                "  [{mark}] {}: observed {}, expected {}",
                i.feature, i.observed, i.expected
            );
        }
        let missing: Vec<&str> = self.mismatches().map(|i| i.feature.as_str()).collect();
        if missing.is_empty() {
            let _ = writeln!(s, "  all {} features match", self.items.len());
        } else {
            let _ = writeln!(s, "  missing: {}", missing.join(", "));
        }
        s
    }
}

fn outcome_text(o: Option<&AddOutcome>) -> String {
    match o {
        Some(o) if o.satisfied => format!("detected (slack {:.3})", o.score),
        Some(o) => format!("not detected (slack {:.3})", o.score),
        None => "not evaluated".to_string(),
    }
}

/// One item per criterion of the scored activity, sorted by name.
pub fn explain_dad(score: &ActivityScore, add_results: &BTreeMap<String, AddOutcome>) -> Explanation {
    let mut names: Vec<(&String, bool)> = score
        .satisfied
        .iter()
        .map(|n| (n, true))
        .chain(score.unsatisfied.iter().map(|n| (n, false)))
        .collect();
    names.sort_by_key(|(n, _)| n.as_str());
    let items = names
        .into_iter()
        .map(|(n, matched)| ExplanationItem {
            feature: n.clone(),
            observed: outcome_text(add_results.get(n)),
            expected: "detected".to_string(),
            matched,
        })
        .collect();
    Explanation {
        kind: "dad".into(),
        subject: score.activity.clone(),
        value: score.ratio,
        items,
    }
}

/// One item per schema feature, comparing `problem` with the best case.
pub fn explain_cbr(problem: &[String], result: &Classification, cb: &CaseBase) -> Explanation {
    let best = &cb.cases()[result.best_case];
    let items = cb
        .schema
        .iter()
        .zip(problem)
        .zip(&best.problem)
        .map(|((f, o), e)| ExplanationItem {
            feature: f.clone(),
            observed: o.clone(),
            expected: e.clone(),
            matched: o == e,
        })
        .collect();
    Explanation {
        kind: "cbr".into(),
        subject: result.label.clone(),
        value: result.similarity,
        items,
    }
}
