//! Action Description Database: named threshold predicates over fitted
//! primitives, each carrying an importance weight.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::QmpModel;

#[derive(Debug, Error)]
pub enum AddError {
    #[error("cannot parse action database: {0}")]
    Parse(String),
    #[error("entry {entry:?}: {message}")]
    Invalid { entry: String, message: String },
    #[error("duplicate entry {0:?}")]
    Duplicate(String),
}

/// Scalar read off a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// `lambda1` .. `lambda6`, zero-based inside.
    Lambda(usize),
    AbsLambda(usize),
    OscAmplitude,
    HalfOscAmplitude,
    CombinedOscAmplitude,
    Period,
    Residual,
    Sparsity,
}

impl Quantity {
    pub fn of(&self, m: &QmpModel) -> f64 {
        match *self {
            Quantity::Lambda(i) => m.lambda[i],
            Quantity::AbsLambda(i) => m.lambda[i].abs(),
            Quantity::OscAmplitude => m.osc_amplitude(),
            Quantity::HalfOscAmplitude => m.half_osc_amplitude(),
            Quantity::CombinedOscAmplitude => m.combined_osc_amplitude(),
            Quantity::Period => m.period,
            Quantity::Residual => m.residual,
            Quantity::Sparsity => m.sparsity as f64,
        }
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let index = |rest: &str| -> Result<usize, String> {
            match rest.parse::<usize>() {
                Ok(i @ 1..=6) => Ok(i - 1),
                _ => Err(format!("unknown quantity {s:?}")),
            }
        };
        Ok(match s {
            "osc_amplitude" => Quantity::OscAmplitude,
            "half_osc_amplitude" => Quantity::HalfOscAmplitude,
            "combined_osc_amplitude" => Quantity::CombinedOscAmplitude,
            "period" => Quantity::Period,
            "residual" => Quantity::Residual,
            "sparsity" => Quantity::Sparsity,
            _ => {
                if let Some(rest) = s.strip_prefix("abs_lambda") {
                    Quantity::AbsLambda(index(rest)?)
                } else if let Some(rest) = s.strip_prefix("lambda") {
                    Quantity::Lambda(index(rest)?)
                } else {
                    return Err(format!("unknown quantity {s:?}"));
                }
            }
        })
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Lambda(i) => write!(f, "lambda{}", i + 1),
            Quantity::AbsLambda(i) => write!(f, "abs_lambda{}", i + 1),
            Quantity::OscAmplitude => f.write_str("osc_amplitude"),
            Quantity::HalfOscAmplitude => f.write_str("half_osc_amplitude"),
            Quantity::CombinedOscAmplitude => f.write_str("combined_osc_amplitude"),
            Quantity::Period => f.write_str("period"),
            Quantity::Residual => f.write_str("residual"),
            Quantity::Sparsity => f.write_str("sparsity"),
        }
    }
}

impl Serialize for Quantity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "in_range")]
    InRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub quantity: Quantity,
    pub op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<[f64; 2]>,
    /// Series the condition reads; defaults to the entry's `fluent_id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluent: Option<String>,
}

fn scale(v: f64) -> f64 {
    if v.abs() > 1e-12 {
        v.abs()
    } else {
        1.0
    }
}

impl Condition {
    /// Signed normalized slack: non-negative iff the condition holds.
    pub fn slack(&self, q: f64) -> f64 {
        if !q.is_finite() {
            return -1.0;
        }
        match self.op {
            Op::AtLeast => {
                let v = self.value.unwrap_or(0.0);
                (q - v) / scale(v)
            }
            Op::AtMost => {
                let v = self.value.unwrap_or(0.0);
                (v - q) / scale(v)
            }
            Op::InRange => {
                let [lo, hi] = self.values.unwrap_or([0.0, 0.0]);
                (q - lo).min(hi - q) / scale(0.5 * (hi - lo))
            }
        }
    }

    fn validate(&self, entry: &str) -> Result<(), AddError> {
        let bad = |message: &str| AddError::Invalid {
            entry: entry.to_string(),
            message: message.to_string(),
        };
        match self.op {
            Op::AtLeast | Op::AtMost => match self.value {
                Some(v) if v.is_finite() => Ok(()),
                _ => Err(bad("<= and >= need a finite `value`")),
            },
            Op::InRange => match self.values {
                Some([lo, hi]) if lo.is_finite() && hi.is_finite() && lo <= hi => Ok(()),
                _ => Err(bad("in_range needs `values = [lo, hi]` with lo <= hi")),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddEntry {
    pub name: String,
    pub fluent_id: String,
    pub conditions: Vec<Condition>,
    pub weight: u8,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

impl AddEntry {
    /// Every series id the entry reads.
    pub fn series(&self) -> BTreeSet<String> {
        self.conditions
            .iter()
            .map(|c| c.fluent.clone().unwrap_or_else(|| self.fluent_id.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDatabase {
    #[serde(rename = "entry")]
    pub entries: Vec<AddEntry>,
}

pub const DEFAULT_ADD: &str = include_str!("../../config/add.toml");

impl ActionDatabase {
    pub fn from_toml_str(text: &str) -> Result<Self, AddError> {
        let db: ActionDatabase = toml::from_str(text).map_err(|e| AddError::Parse(e.to_string()))?;
        db.validate()?;
        Ok(db)
    }

    pub fn validate(&self) -> Result<(), AddError> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.name.as_str()) {
                return Err(AddError::Duplicate(e.name.clone()));
            }
            if !(1..=10).contains(&e.weight) {
                return Err(AddError::Invalid {
                    entry: e.name.clone(),
                    message: format!("weight must be 1..=10, got {}", e.weight),
                });
            }
            if e.conditions.is_empty() {
                return Err(AddError::Invalid {
                    entry: e.name.clone(),
                    message: "no conditions".into(),
                });
            }
            for c in &e.conditions {
                c.validate(&e.name)?;
            }
        }
        Ok(())
    }

    /// Checks every referenced series against the known ids.
    pub fn check_series<'a>(&self, known: impl Fn(&str) -> bool + 'a) -> Result<(), AddError> {
        for e in &self.entries {
            for s in e.series() {
                if !known(&s) {
                    return Err(AddError::Invalid {
                        entry: e.name.clone(),
                        message: format!("unknown series {s:?}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&AddEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Union of all referenced series ids.
    pub fn series(&self) -> BTreeSet<String> {
        self.entries.iter().flat_map(|e| e.series()).collect()
    }
}

impl Default for ActionDatabase {
    fn default() -> Self {
        ActionDatabase::from_toml_str(DEFAULT_ADD).expect("shipped action database is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AddOutcome {
    pub satisfied: bool,
    /// Minimum slack over the entry's conditions; `-1` when a series is
    /// missing.
    pub score: f64,
}

/// Evaluates every entry independently against one window's models.
pub fn evaluate_add(models: &BTreeMap<String, QmpModel>, add: &ActionDatabase) -> BTreeMap<String, AddOutcome> {
    add.entries
        .iter()
        .map(|e| {
            let mut score = f64::INFINITY;
            for c in &e.conditions {
                let id = c.fluent.as_deref().unwrap_or(&e.fluent_id);
                match models.get(id) {
                    Some(m) => score = score.min(c.slack(c.quantity.of(m))),
                    None => {
                        score = -1.0;
                        break;
                    }
                }
            }
            (
                e.name.clone(),
                AddOutcome {
                    satisfied: score >= 0.0,
                    score,
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(id: &str, lambda: [f64; 6]) -> QmpModel {
        QmpModel {
            fluent_id: id.into(),
            window: (0, 90),
            lambda,
            period: 2.0,
            residual: 0.01,
            sparsity: lambda.iter().filter(|c| **c != 0.0).count(),
        }
    }

    #[test]
    fn quantities_parse_and_print() {
        for s in ["lambda1", "lambda6", "abs_lambda2", "osc_amplitude", "period", "sparsity"] {
            assert_eq!(s.parse::<Quantity>().unwrap().to_string(), s);
        }
        assert!("lambda7".parse::<Quantity>().is_err());
        assert!("lambda0".parse::<Quantity>().is_err());
        assert!("speed".parse::<Quantity>().is_err());
    }

    #[test]
    fn default_database_loads() {
        let db = ActionDatabase::default();
        assert_eq!(db.entries.len(), 7);
        assert!(db.get("knee oscillation").is_some());
    }

    #[test]
    fn entries_are_evaluated_independently() {
        let db = ActionDatabase::from_toml_str(
            r#"
[[entry]]
name = "knee oscillation"
fluent_id = "left leg bent"
weight = 10
conditions = [{ quantity = "osc_amplitude", op = ">=", value = 1.0 }]

[[entry]]
name = "slow knee"
fluent_id = "left leg bent"
weight = 3
conditions = [{ quantity = "period", op = "in_range", values = [1.0, 3.0] }]

[[entry]]
name = "elbow"
fluent_id = "left arm bent"
weight = 5
conditions = [{ quantity = "osc_amplitude", op = ">=", value = 1.0 }]
"#,
        )
        .unwrap();
        let models = BTreeMap::from([("left leg bent".to_string(), model("left leg bent", [0.0, 0.0, 1.2, 0.9, 0.0, 0.0]))]);
        let out = evaluate_add(&models, &db);
        assert!(out["knee oscillation"].satisfied);
        assert!((out["knee oscillation"].score - 0.5).abs() < 1e-12);
        assert!(out["slow knee"].satisfied);
        assert!(!out["elbow"].satisfied);
        assert_eq!(out["elbow"].score, -1.0);
    }

    #[test]
    fn invalid_databases_are_rejected() {
        let weight = "[[entry]]\nname = \"a\"\nfluent_id = \"x\"\nweight = 11\nconditions = [{ quantity = \"period\", op = \">=\", value = 1.0 }]\n";
        assert!(ActionDatabase::from_toml_str(weight).is_err());
        let range = "[[entry]]\nname = \"a\"\nfluent_id = \"x\"\nweight = 1\nconditions = [{ quantity = \"period\", op = \"in_range\", values = [2.0, 1.0] }]\n";
        assert!(ActionDatabase::from_toml_str(range).is_err());
        let qty = "[[entry]]\nname = \"a\"\nfluent_id = \"x\"\nweight = 1\nconditions = [{ quantity = \"speed\", op = \">=\", value = 1.0 }]\n";
        assert!(ActionDatabase::from_toml_str(qty).is_err());
    }

    #[test]
    fn slack_is_signed_and_normalized() {
        let c = Condition {
            quantity: Quantity::OscAmplitude,
            op: Op::AtMost,
            value: Some(0.5),
            values: None,
            fluent: None,
        };
        assert_eq!(c.slack(0.25), 0.5);
        assert_eq!(c.slack(1.0), -1.0);
        let zero = Condition { value: Some(0.0), ..c };
        assert_eq!(zero.slack(-0.3), 0.3);
    }
}
