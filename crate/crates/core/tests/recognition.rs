use std::collections::BTreeMap;

use proptest::prelude::*;

use qualpose::fluents::FluentRegistry;
use qualpose::qmp::{ActionDatabase, AddOutcome, RegressionConfig};
use qualpose::recognition::{
    analyze, dad_score, explain_cbr, explain_dad, ActivityConfig, Case, CaseBase, Models, ResolvedActivity, TrimPolicy,
};
use qualpose::synth::{generate_motion, perturb, preset, Trajectory, PRESETS};

struct Fixture {
    registry: FluentRegistry,
    add: ActionDatabase,
    activities: Vec<ResolvedActivity>,
    regression: RegressionConfig,
}

fn fixture() -> Fixture {
    let add = ActionDatabase::default();
    let activities = ActivityConfig::default().resolve(&add).unwrap();
    Fixture {
        registry: FluentRegistry::default(),
        add,
        activities,
        regression: RegressionConfig::default(),
    }
}

impl Fixture {
    fn models(&self) -> Models<'_> {
        Models {
            registry: &self.registry,
            add: &self.add,
            activities: &self.activities,
            regression: &self.regression,
            window_s: 3.0,
            hop_s: 1.0,
        }
    }
}

#[test]
fn each_preset_tops_its_own_activity() {
    let fx = fixture();
    for name in PRESETS {
        let seq = generate_motion(&preset(name).unwrap()).unwrap();
        let a = analyze(&seq, &fx.models()).unwrap();
        assert_eq!(a.top_activity().unwrap().0, name);
    }
}

#[test]
fn squat_without_knee_motion_names_the_missing_criterion() {
    let fx = fixture();
    let mut spec = preset("squat").unwrap();
    for side in ["left", "right"] {
        spec.channels.insert(format!("{side} knee"), Trajectory::Constant { value: std::f64::consts::PI });
    }
    let seq = generate_motion(&spec).unwrap();
    let a = analyze(&seq, &fx.models()).unwrap();
    let last = a.scores.last().unwrap();
    let squat = last.iter().find(|s| s.activity == "squat").unwrap();
    assert!(squat.ratio < 0.8, "{}", squat.ratio);
    let e = explain_dad(squat, a.add_results.last().unwrap());
    let missing: Vec<&str> = e.mismatches().map(|i| i.feature.as_str()).collect();
    assert!(missing.contains(&"knee oscillation"), "{missing:?}");
    assert!(e.text().contains("knee oscillation"));
}

#[test]
fn perturbed_instances_classify_against_presets() {
    let fx = fixture();
    let schema = qualpose::recognition::features::clip_schema(&fx.add, &fx.registry);
    let mut cb = CaseBase::new(schema, TrimPolicy::default());
    for name in PRESETS {
        let seq = generate_motion(&preset(name).unwrap()).unwrap();
        let a = analyze(&seq, &fx.models()).unwrap();
        cb.push(Case::new(a.clip_features(&fx.add, &fx.registry), name, "preset")).unwrap();
    }
    for (k, name) in PRESETS.iter().enumerate() {
        let spec = perturb(&preset(name).unwrap(), 50 + k as u64, 0.15, 0.003);
        let a = analyze(&generate_motion(&spec).unwrap(), &fx.models()).unwrap();
        let p = a.clip_features(&fx.add, &fx.registry);
        let r = cb.classify(&p).unwrap();
        assert_eq!(r.label, *name);
        let e = explain_cbr(&p, &r, &cb);
        let mismatched = e.mismatches().count() as f64;
        assert!((1.0 - mismatched / p.len() as f64 - r.similarity).abs() < 1e-12);
    }
}

fn outcomes(entries: &[String], satisfied: &[bool]) -> BTreeMap<String, AddOutcome> {
    entries
        .iter()
        .zip(satisfied)
        .map(|(n, &s)| {
            (
                n.clone(),
                AddOutcome {
                    satisfied: s,
                    score: 0.0,
                },
            )
        })
        .collect()
}

proptest! {
    #[test]
    fn satisfying_another_criterion_never_lowers_a_ratio(mask in proptest::collection::vec(any::<bool>(), 7), extra in 0usize..7) {
        let fx = fixture();
        let names: Vec<String> = fx.add.entries.iter().map(|e| e.name.clone()).collect();
        let before = dad_score(&outcomes(&names, &mask), &fx.activities, None);
        let mut more = mask.clone();
        more[extra] = true;
        let after = dad_score(&outcomes(&names, &more), &fx.activities, None);
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(a.ratio >= b.ratio);
            prop_assert!((0.0..=1.0).contains(&a.ratio));
        }
    }

    #[test]
    fn explanations_are_pure(mask in proptest::collection::vec(any::<bool>(), 7)) {
        let fx = fixture();
        let names: Vec<String> = fx.add.entries.iter().map(|e| e.name.clone()).collect();
        let results = outcomes(&names, &mask);
        for s in dad_score(&results, &fx.activities, None) {
            prop_assert_eq!(explain_dad(&s, &results).text(), explain_dad(&s, &results).text());
            prop_assert_eq!(s.satisfied.len() + s.unsatisfied.len(), explain_dad(&s, &results).items.len());
        }
    }
}
