//! Case-based reasoning over discrete feature vectors: match-count
//! similarity, novelty/benefit retention and quota trimming.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CbrError {
    #[error("feature vectors differ in length ({0} vs {1})")]
    SchemaMismatch(usize, usize),
    #[error("case base is empty")]
    Empty,
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("case base line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrimPolicy {
    /// Minimum novelty `theta_n` for a case to be worth keeping.
    pub novelty_threshold: f64,
    pub per_label_quota: usize,
}

impl Default for TrimPolicy {
    fn default() -> Self {
        TrimPolicy {
            novelty_threshold: 0.1,
            per_label_quota: 50,
        }
    }
}

impl TrimPolicy {
    pub fn validate(&self) -> Result<(), CbrError> {
        if !(self.novelty_threshold > 0.0 && self.novelty_threshold <= 1.0) {
            return Err(CbrError::Policy("novelty_threshold must lie in (0, 1]".into()));
        }
        if self.per_label_quota == 0 {
            return Err(CbrError::Policy("per_label_quota must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseMeta {
    pub source: String,
    /// Logical retention clock.
    pub retained_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub problem: Vec<String>,
    pub solution: String,
    #[serde(default)]
    pub meta: CaseMeta,
}

impl Case {
    pub fn new(problem: Vec<String>, solution: impl Into<String>, source: impl Into<String>) -> Self {
        Case {
            problem,
            solution: solution.into(),
            meta: CaseMeta {
                source: source.into(),
                retained_at: 0,
            },
        }
    }
}

/// Fraction of positions where `p` and `q` agree.
pub fn similarity(p: &[String], q: &[String]) -> Result<f64, CbrError> {
    if p.len() != q.len() {
        return Err(CbrError::SchemaMismatch(p.len(), q.len()));
    }
    if p.is_empty() {
        return Ok(1.0);
    }
    let matches = p.iter().zip(q).filter(|(a, b)| a == b).count();
    Ok(matches as f64 / p.len() as f64)
}

fn sim(p: &[String], q: &[String]) -> f64 {
    similarity(p, q).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub label: String,
    /// Index into the case base.
    pub best_case: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RetainDecision {
    Duplicate,
    Novel,
    Benefit,
    NotNovel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetainOutcome {
    pub retained: bool,
    pub decision: RetainDecision,
    pub novelty: f64,
    pub evicted: Option<Case>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseBase {
    pub schema: Vec<String>,
    pub policy: TrimPolicy,
    cases: Vec<Case>,
    clock: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema: Vec<String>,
    policy: TrimPolicy,
    clock: u64,
}

impl CaseBase {
    pub fn new(schema: Vec<String>, policy: TrimPolicy) -> Self {
        CaseBase {
            schema,
            policy,
            cases: Vec::new(),
            clock: 0,
        }
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.cases.iter().map(|c| c.solution.as_str()).collect()
    }

    fn check(&self, problem: &[String]) -> Result<(), CbrError> {
        if problem.len() != self.schema.len() {
            return Err(CbrError::SchemaMismatch(problem.len(), self.schema.len()));
        }
        Ok(())
    }

    /// Appends without any retention policy, stamping the clock.
    pub fn push(&mut self, mut case: Case) -> Result<(), CbrError> {
        self.check(&case.problem)?;
        case.meta.retained_at = self.clock;
        self.clock += 1;
        self.cases.push(case);
        Ok(())
    }

    /// Most similar case; ties go to the most recently retained, then the
    /// lexicographically smallest label.
    pub fn classify(&self, problem: &[String]) -> Result<Classification, CbrError> {
        self.check(problem)?;
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.cases.iter().enumerate() {
            let s = sim(problem, &c.problem);
            let better = match best {
                None => true,
                Some((j, bs)) => {
                    let b = &self.cases[j];
                    s > bs
                        || (s == bs
                            && (c.meta.retained_at, std::cmp::Reverse(&c.solution))
                                > (b.meta.retained_at, std::cmp::Reverse(&b.solution)))
                }
            };
            if better {
                best = Some((i, s));
            }
        }
        let (i, s) = best.ok_or(CbrError::Empty)?;
        Ok(Classification {
            label: self.cases[i].solution.clone(),
            best_case: i,
            similarity: s,
        })
    }

    /// `1 - max similarity` to the cases labelled `label`, skipping index
    /// `skip`; 1 when there are none.
    fn novelty_against(&self, problem: &[String], label: &str, skip: Option<usize>) -> f64 {
        let max = self
            .cases
            .iter()
            .enumerate()
            .filter(|(i, c)| c.solution == label && Some(*i) != skip)
            .map(|(_, c)| sim(problem, &c.problem))
            .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))));
        1.0 - max.unwrap_or(0.0)
    }

    pub fn novelty(&self, case: &Case) -> f64 {
        self.novelty_against(&case.problem, &case.solution, None)
    }

    /// Returns the updated case base. `correct` says whether the case was
    /// classified correctly before retention.
    pub fn retain(&self, case: Case, correct: bool) -> Result<(CaseBase, RetainOutcome), CbrError> {
        self.check(&case.problem)?;
        let novelty = self.novelty(&case);
        let duplicate = self
            .cases
            .iter()
            .any(|c| c.solution == case.solution && c.problem == case.problem);
        let decision = if duplicate {
            RetainDecision::Duplicate
        } else if novelty >= self.policy.novelty_threshold {
            RetainDecision::Novel
        } else if !correct {
            RetainDecision::Benefit
        } else {
            RetainDecision::NotNovel
        };
        let mut next = self.clone();
        let retained = matches!(decision, RetainDecision::Novel | RetainDecision::Benefit);
        let mut evicted = None;
        if retained {
            let label = case.solution.clone();
            next.push(case)?;
            let new_index = next.cases.len() - 1;
            let members: Vec<usize> = (0..next.cases.len()).filter(|&i| next.cases[i].solution == label).collect();
            if members.len() > next.policy.per_label_quota {
                let victim = members
                    .iter()
                    .copied()
                    .filter(|&i| i != new_index)
                    .min_by(|&a, &b| {
                        let na = next.novelty_against(&next.cases[a].problem, &label, Some(a));
                        let nb = next.novelty_against(&next.cases[b].problem, &label, Some(b));
                        na.total_cmp(&nb)
                            .then(next.cases[a].meta.retained_at.cmp(&next.cases[b].meta.retained_at))
                    })
                    .expect("quota is positive so another member exists");
                evicted = Some(next.cases.remove(victim));
            }
        }
        Ok((
            next,
            RetainOutcome {
                retained,
                decision,
                novelty,
                evicted,
            },
        ))
    }

    /// Fraction of cases correctly labelled by the rest of the case base.
    pub fn leave_one_out_accuracy(&self) -> f64 {
        if self.cases.len() < 2 {
            return 0.0;
        }
        let mut hits = 0;
        for i in 0..self.cases.len() {
            let mut rest = self.clone();
            let held = rest.cases.remove(i);
            if rest.classify(&held.problem).is_ok_and(|c| c.label == held.solution) {
                hits += 1;
            }
        }
        hits as f64 / self.cases.len() as f64
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header = Header {
            schema: self.schema.clone(),
            policy: self.policy,
            clock: self.clock,
        };
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        for c in &self.cases {
            writeln!(out, "{}", serde_json::to_string(c)?)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(src: R) -> Result<CaseBase, CbrError> {
        let mut lines = src.lines().enumerate().filter(|(_, l)| !l.as_ref().is_ok_and(|l| l.trim().is_empty()));
        let (_, first) = lines.next().ok_or(CbrError::Format {
            line: 1,
            message: "missing schema header".into(),
        })?;
        let header: Header = serde_json::from_str(&first?).map_err(|e| CbrError::Format {
            line: 1,
            message: e.to_string(),
        })?;
        header.policy.validate()?;
        let mut cb = CaseBase::new(header.schema, header.policy);
        cb.clock = header.clock;
        for (n, line) in lines {
            let case: Case = serde_json::from_str(&line?).map_err(|e| CbrError::Format {
                line: n + 1,
                message: e.to_string(),
            })?;
            cb.check(&case.problem).map_err(|e| CbrError::Format {
                line: n + 1,
                message: e.to_string(),
            })?;
            cb.clock = cb.clock.max(case.meta.retained_at + 1);
            cb.cases.push(case);
        }
        Ok(cb)
    }
}

/// Per-label frequency of every `(feature index, value)` pair.
pub type Prevalence = BTreeMap<String, BTreeMap<(usize, String), f64>>;

pub fn prevalence(cases: &[Case]) -> Prevalence {
    let mut counts: BTreeMap<String, (usize, BTreeMap<(usize, String), usize>)> = BTreeMap::new();
    for c in cases {
        let entry = counts.entry(c.solution.clone()).or_default();
        entry.0 += 1;
        for (i, v) in c.problem.iter().enumerate() {
            *entry.1.entry((i, v.clone())).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .map(|(label, (n, m))| (label, m.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect()))
        .collect()
}

/// Mean absolute difference over every `(feature, value)` pair present in
/// either profile of `label`.
pub fn prevalence_difference(a: &Prevalence, b: &Prevalence, label: &str) -> f64 {
    let empty = BTreeMap::new();
    let pa = a.get(label).unwrap_or(&empty);
    let pb = b.get(label).unwrap_or(&empty);
    let keys: BTreeSet<_> = pa.keys().chain(pb.keys()).collect();
    if keys.is_empty() {
        return 0.0;
    }
    let sum: f64 = keys
        .iter()
        .map(|k| (pa.get(*k).unwrap_or(&0.0) - pb.get(*k).unwrap_or(&0.0)).abs())
        .sum();
    sum / keys.len() as f64
}

/// Builds a case base from raw cases, keeping at most `per_label_quota`
/// per label. Within a label, exact duplicates are dropped, then cases are
/// picked greedily: candidates at least `novelty_threshold` away from the
/// current selection are preferred, and among them the one that keeps the
/// selection's feature prevalence closest to the label's raw prevalence.
pub fn trim_init(schema: Vec<String>, raw: &[Case], policy: TrimPolicy) -> Result<CaseBase, CbrError> {
    policy.validate()?;
    if raw.is_empty() {
        return Err(CbrError::Empty);
    }
    let mut cb = CaseBase::new(schema, policy);
    for c in raw {
        cb.check(&c.problem)?;
    }
    let target = prevalence(raw);
    let labels: BTreeSet<&str> = raw.iter().map(|c| c.solution.as_str()).collect();
    let mut chosen: Vec<usize> = Vec::new();
    for label in labels {
        let mut pool: Vec<usize> = Vec::new();
        for (i, c) in raw.iter().enumerate() {
            if c.solution == label && !pool.iter().any(|&j| raw[j].problem == c.problem) {
                pool.push(i);
            }
        }
        if pool.len() <= policy.per_label_quota {
            chosen.extend(pool);
            continue;
        }
        let mut selected: Vec<usize> = Vec::new();
        while selected.len() < policy.per_label_quota && !pool.is_empty() {
            let novelty = |i: usize| {
                1.0 - selected
                    .iter()
                    .map(|&j| sim(&raw[i].problem, &raw[j].problem))
                    .fold(0.0, f64::max)
            };
            let gated: Vec<usize> = pool
                .iter()
                .copied()
                .filter(|&i| selected.is_empty() || novelty(i) >= policy.novelty_threshold)
                .collect();
            let candidates = if gated.is_empty() { pool.clone() } else { gated };
            let mut best: Option<(usize, f64, f64)> = None;
            for i in candidates {
                let trial: Vec<Case> = selected.iter().chain([&i]).map(|&j| raw[j].clone()).collect();
                let diff = prevalence_difference(&prevalence(&trial), &target, label);
                let nov = novelty(i);
                let better = best.is_none_or(|(_, d, n)| diff < d - 1e-12 || ((diff - d).abs() <= 1e-12 && nov > n));
                if better {
                    best = Some((i, diff, nov));
                }
            }
            let (pick, _, _) = best.expect("candidates are non-empty");
            selected.push(pick);
            pool.retain(|&i| i != pick);
        }
        chosen.extend(selected);
    }
    chosen.sort_unstable();
    for i in chosen {
        let mut c = raw[i].clone();
        c.meta.retained_at = 0;
        cb.push(c)?;
    }
    Ok(cb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Vec<String> {
        s.chars().map(|c| c.to_string()).collect()
    }

    fn base(cases: &[(&str, &str)]) -> CaseBase {
        let mut cb = CaseBase::new(p(&"f".repeat(cases[0].0.len())), TrimPolicy::default());
        for (prob, label) in cases {
            cb.push(Case::new(p(prob), *label, "test")).unwrap();
        }
        cb
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity(&p("abcd"), &p("abcd")).unwrap(), 1.0);
        assert_eq!(similarity(&p("abcd"), &p("wxyz")).unwrap(), 0.0);
        assert_eq!(similarity(&p("abcd"), &p("abyz")).unwrap(), 0.5);
        assert!(similarity(&p("abc"), &p("ab")).is_err());
    }

    #[test]
    fn classify_examples() {
        let one = base(&[("aaaa", "squat")]);
        assert_eq!(one.classify(&p("zzzz")).unwrap().label, "squat");
        let two = base(&[("aaaa", "squat"), ("bbbb", "push-up")]);
        let c = two.classify(&p("bbbb")).unwrap();
        assert_eq!((c.label.as_str(), c.similarity), ("push-up", 1.0));
        // equal similarity: the later case wins
        let tie = base(&[("aabb", "squat"), ("bbaa", "push-up")]);
        assert_eq!(tie.classify(&p("abab")).unwrap().label, "push-up");
        assert!(CaseBase::new(p("ffff"), TrimPolicy::default()).classify(&p("aaaa")).is_err());
    }

    #[test]
    fn retention_policy() {
        let cb = base(&[("aaaaaaaaaa", "squat"), ("bbbbbbbbbb", "push-up")]);
        let (same, out) = cb.retain(Case::new(p("aaaaaaaaaa"), "squat", "x"), true).unwrap();
        assert_eq!(out.decision, RetainDecision::Duplicate);
        assert_eq!(same.len(), 2);

        let close = Case::new(p("aaaaaaaaab"), "squat", "x");
        let (_, out) = cb.retain(close.clone(), true).unwrap();
        assert!(!out.retained);
        let (next, out) = cb.retain(close, false).unwrap();
        assert_eq!(out.decision, RetainDecision::Benefit);
        assert_eq!(next.len(), 3);

        let mut full = base(&[("aaaaaaaaaa", "squat"), ("aaaaaaaaab", "squat"), ("cccccccccc", "squat")]);
        full.policy.per_label_quota = 3;
        let (next, out) = full.retain(Case::new(p("dddddddddd"), "squat", "x"), true).unwrap();
        assert!(out.retained);
        assert_eq!(next.len(), 3);
        // the two near twins are least novel; the older one goes
        assert_eq!(out.evicted.unwrap().problem, p("aaaaaaaaaa"));
    }

    #[test]
    fn benefit_retention_keeps_leave_one_out_accuracy() {
        let cb = base(&[("aaaa", "x"), ("aaab", "x"), ("bbbb", "y"), ("bbba", "y"), ("abab", "x")]);
        let before = cb.leave_one_out_accuracy();
        let probe = Case::new(p("abba"), "y", "n");
        let correct = cb.classify(&probe.problem).unwrap().label == probe.solution;
        let (next, _) = cb.retain(probe, correct).unwrap();
        assert!(next.leave_one_out_accuracy() >= before);
    }

    #[test]
    fn round_trip_through_lines() {
        let cb = base(&[("ab", "squat"), ("ba", "push-up")]);
        let mut buf = Vec::new();
        cb.write(&mut buf).unwrap();
        let back = CaseBase::read(buf.as_slice()).unwrap();
        assert_eq!(back, cb);
        assert!(CaseBase::read("{\"schema\":[\"a\"],\"policy\":{\"novelty_threshold\":0.1,\"per_label_quota\":5},\"clock\":0}\n{\"problem\":[\"a\",\"b\"],\"solution\":\"s\"}\n".as_bytes()).is_err());
    }

    #[test]
    fn trim_under_quota_is_identity() {
        let raw: Vec<Case> = ["ab", "ba", "aa"].iter().map(|s| Case::new(p(s), "squat", "r")).collect();
        let cb = trim_init(p("ff"), &raw, TrimPolicy::default()).unwrap();
        assert_eq!(cb.len(), 3);
    }

    #[test]
    fn trim_near_duplicates_keeps_prevalence() {
        // 100 distinct squat cases: feature 0 is "a" in 70%, feature 1 "b" in 30%
        let raw: Vec<Case> = (0..100)
            .map(|k| {
                let f0 = if k % 10 < 7 { "a" } else { "x" };
                let f1 = if k % 10 < 3 { "b" } else { "y" };
                let f2 = if k % 2 == 0 { "c" } else { "z" };
                Case::new(vec![f0.into(), f1.into(), f2.into(), format!("{}", k % 13)], "squat", format!("{k}"))
            })
            .collect();
        let policy = TrimPolicy {
            novelty_threshold: 0.1,
            per_label_quota: 10,
        };
        let cb = trim_init(p("ffff"), &raw, policy).unwrap();
        assert_eq!(cb.len(), 10);
        let d = prevalence_difference(&prevalence(cb.cases()), &prevalence(&raw), "squat");
        assert!(d <= 0.1, "{d}");
    }

    #[test]
    fn trim_quota_limits_dominant_label() {
        let mut raw: Vec<Case> = (0..40).map(|k| Case::new(vec![format!("{}", k % 7), "s".into()], "squat", "r")).collect();
        raw.extend((0..5).map(|k| Case::new(vec![format!("{k}"), "p".into()], "push-up", "r")));
        let policy = TrimPolicy {
            novelty_threshold: 0.1,
            per_label_quota: 5,
        };
        let cb = trim_init(p("ff"), &raw, policy).unwrap();
        let squats = cb.cases().iter().filter(|c| c.solution == "squat").count();
        assert_eq!(squats, 5);
        assert_eq!(cb.len(), 10);
    }

    proptest! {
        #[test]
        fn similarity_is_one_minus_hamming(a in proptest::collection::vec(0..3u8, 1..12), seed in proptest::collection::vec(0..3u8, 12)) {
            let pa: Vec<String> = a.iter().map(|v| v.to_string()).collect();
            let pb: Vec<String> = seed[..a.len()].iter().map(|v| v.to_string()).collect();
            let s = similarity(&pa, &pb).unwrap();
            prop_assert_eq!(s, similarity(&pb, &pa).unwrap());
            prop_assert_eq!(similarity(&pa, &pa).unwrap(), 1.0);
            let hamming = pa.iter().zip(&pb).filter(|(x, y)| x != y).count();
            prop_assert!((s - (1.0 - hamming as f64 / pa.len() as f64)).abs() < 1e-15);
        }
    }
}
