use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use qualpose::fluents::{curve_samples, fluent_stream, Channel, FluentConfig, FluentRegistry, FluentReport};
use qualpose::qmp::{characterize_stream, AddOutcome, ActionDatabase, QmpRecord, RegressionConfig};
use qualpose::recognition::{
    analyze, dad_score, explain_cbr, explain_dad, features, ActivityConfig, ActivityScore, Analysis, Case, CaseBase,
    Models, ResolvedActivity,
};
use qualpose::skeleton::{parse_pose_sequence, write_pose_sequence, ParseOptions, PoseSequence};
use qualpose::synth::{generate_motion, perturb, preset, MotionSpec};

#[derive(Parser)]
#[command(name = "qualpose", version, about = "Qualitative pose fluents, motion primitives and activity recognition")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Line-delimited pose file.
    #[arg(long, global = true)]
    poses: Option<PathBuf>,
    /// Frame rate; inferred from timestamps when omitted.
    #[arg(long, global = true)]
    fps: Option<f64>,
    /// Fluent configuration (TOML).
    #[arg(long, global = true)]
    fluents: Option<PathBuf>,
    /// Action database (TOML).
    #[arg(long, global = true)]
    add: Option<PathBuf>,
    /// Activity definitions and case-base policy (TOML).
    #[arg(long, global = true)]
    activities: Option<PathBuf>,
    /// Case base file.
    #[arg(long, global = true)]
    cb: Option<PathBuf>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Window length in seconds for motion primitives.
    #[arg(long, global = true, default_value_t = 3.0)]
    window: f64,
    /// Hop between windows in seconds.
    #[arg(long, global = true, default_value_t = 1.0)]
    hop: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Records)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Records,
}

#[derive(Subcommand)]
enum Command {
    /// Per-frame fluent confidences.
    Annotate,
    /// Motion-primitive models per window.
    Qmp {
        /// Restrict to these series (repeatable).
        #[arg(long)]
        series: Vec<String>,
    },
    /// Activity scores from the action database, with explanations.
    Dad,
    /// Case-based recognition.
    #[command(subcommand)]
    Cbr(CbrCommand),
    /// Synthetic pose sequence.
    Synth {
        #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
        preset: Option<String>,
        /// Motion spec (TOML).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Jitter standard deviation.
        #[arg(long)]
        noise: Option<f64>,
        /// Relative random variation of amplitudes and tempo.
        #[arg(long)]
        perturb: Option<f64>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Sampled confidence curves of configured transitions.
    Curves {
        /// Fluent id; every fluent when omitted.
        #[arg(long)]
        fluent: Option<String>,
        #[arg(long, default_value_t = 193)]
        samples: usize,
    },
}

#[derive(Subcommand)]
enum CbrCommand {
    /// Empty case base for the current schema.
    Init,
    /// Problem vector of a pose file as a case line.
    Case {
        #[arg(long)]
        label: String,
        #[arg(long)]
        source: Option<String>,
    },
    /// Most similar stored case, with explanation.
    Classify,
    /// Offers a labelled pose file to the case base.
    Retain {
        #[arg(long)]
        label: String,
        #[arg(long)]
        source: Option<String>,
        /// Where to write the updated case base; defaults to --cb.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quota-limited case base from the cases in --cb.
    Trim,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn line<T: Serialize>(out: &mut Vec<u8>, value: &T) {
    let s = serde_json::to_string(value).expect("records serialize");
    out.extend_from_slice(s.as_bytes());
    out.push(b'\n');
}

/// Configuration loaded up front, before any pose data is read.
struct Loaded {
    registry: FluentRegistry,
    add: ActionDatabase,
    activity_config: ActivityConfig,
    activities: Vec<ResolvedActivity>,
    regression: RegressionConfig,
}

fn load(common: &Common) -> Result<Loaded> {
    let mut fluent_cfg = match &common.fluents {
        Some(p) => FluentConfig::from_toml_str(&read_text(p)?).map_err(config_err)?,
        None => FluentConfig::default(),
    };
    if let Some(eps) = common.epsilon {
        fluent_cfg.epsilon = eps;
    }
    let registry = FluentRegistry::new(fluent_cfg).map_err(config_err)?;
    let add = match &common.add {
        Some(p) => ActionDatabase::from_toml_str(&read_text(p)?).map_err(config_err)?,
        None => ActionDatabase::default(),
    };
    add.check_series(|s| registry.channel(s).is_some()).map_err(config_err)?;
    let activity_config = match &common.activities {
        Some(p) => ActivityConfig::from_toml_str(&read_text(p)?).map_err(config_err)?,
        None => ActivityConfig::default(),
    };
    activity_config.cbr.validate().map_err(config_err)?;
    let activities = activity_config.resolve(&add).map_err(config_err)?;
    for (name, v) in [("window", common.window), ("hop", common.hop)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(config_err(format!("--{name} must be positive, got {v}")));
        }
    }
    if let Some(fps) = common.fps {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(config_err(format!("--fps must be positive, got {fps}")));
        }
    }
    Ok(Loaded {
        registry,
        add,
        activity_config,
        activities,
        regression: RegressionConfig::default(),
    })
}

fn read_poses(common: &Common, loaded: &Loaded) -> Result<PoseSequence> {
    let path = common
        .poses
        .as_ref()
        .ok_or_else(|| config_err("--poses is required for this command"))?;
    let file = fs::File::open(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    let options = ParseOptions {
        frame_rate: common.fps,
        allow_missing_optional: loaded.registry.config().allow_missing_optional,
    };
    parse_pose_sequence(BufReader::new(file), options).map_err(data_err)
}

fn read_cb(common: &Common) -> Result<CaseBase> {
    let path = common.cb.as_ref().ok_or_else(|| config_err("--cb is required for this command"))?;
    let file = fs::File::open(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    CaseBase::read(BufReader::new(file)).map_err(data_err)
}

fn models<'a>(common: &Common, l: &'a Loaded) -> Models<'a> {
    Models {
        registry: &l.registry,
        add: &l.add,
        activities: &l.activities,
        regression: &l.regression,
        window_s: common.window,
        hop_s: common.hop,
    }
}

fn run_analysis(common: &Common, l: &Loaded) -> Result<Analysis> {
    let seq = read_poses(common, l)?;
    analyze(&seq, &models(common, l)).map_err(data_err)
}

fn fmt_conf(c: f64) -> String {
    format!("{c:.3}")
}

fn annotate_text(report: &FluentReport, registry: &FluentRegistry, out: &mut Vec<u8>) {
    let mut parts = Vec::new();
    for f in registry.fluents() {
        if report.indeterminate.contains(&f.id) {
            parts.push(format!("{}: indeterminate", f.id));
            continue;
        }
        let states = f.state_names();
        if let Some(s) = report.dominant(&f.id, &states) {
            let mut text = format!("{} {} ({})", f.id, s, fmt_conf(report.get(&f.id, s).unwrap_or(0.0)));
            for ch in &f.channels {
                let temporal = [ch.toward_first.as_str(), ch.toward_last.as_str(), ch.still.as_str()];
                if let Some(t) = report.dominant(&f.id, &temporal) {
                    text.push_str(&format!(", {t}"));
                }
            }
            parts.push(text);
        }
    }
    for f in registry.near() {
        if report.get(&f.id, "touching") == Some(1.0) {
            parts.push(format!("{} touching", f.id));
        } else if report.get(&f.id, "near").is_some_and(|c| c > 0.5) {
            parts.push(format!("{} near", f.id));
        }
    }
    let _ = writeln!(out, "frame {}: {}", report.frame_index, parts.join("; "));
}

fn cmd_annotate(common: &Common, l: &Loaded, out: &mut Vec<u8>) -> Result<()> {
    let seq = read_poses(common, l)?;
    let stream = fluent_stream(&seq, &l.registry).map_err(data_err)?;
    for r in &stream.reports {
        match common.format {
            Format::Records => line(out, r),
            Format::Text => annotate_text(r, &l.registry, out),
        }
    }
    Ok(())
}

fn cmd_qmp(common: &Common, l: &Loaded, series: &[String], out: &mut Vec<u8>) -> Result<()> {
    for s in series {
        if l.registry.channel(s).is_none() {
            return Err(config_err(format!("unknown series {s:?}")));
        }
    }
    let seq = read_poses(common, l)?;
    let stream = fluent_stream(&seq, &l.registry).map_err(data_err)?;
    let only: Option<std::collections::BTreeSet<String>> =
        (!series.is_empty()).then(|| series.iter().cloned().collect());
    let windows = characterize_stream(&stream, &l.regression, common.window, common.hop, only.as_ref())
        .map_err(data_err)?;
    if windows.is_empty() {
        return Err(data_err("sequence is shorter than one second; no window to characterize"));
    }
    for w in &windows {
        for m in w.models.values() {
            let rec = QmpRecord::from(m);
            match common.format {
                Format::Records => line(out, &rec),
                Format::Text => {
                    let lambda: Vec<String> = rec.lambda.iter().map(|v| format!("{v:.4}")).collect();
                    let _ = writeln!(
                        out,
                        "{} [{}, {}) T={:.4} lambda=[{}] residual={:.5}",
                        rec.fluent,
                        rec.window[0],
                        rec.window[1],
                        rec.period,
                        lambda.join(", "),
                        rec.residual
                    );
                }
            }
        }
    }
    Ok(())
}

/// Majority outcome per entry with the mean slack over windows.
fn clip_outcomes(analysis: &Analysis, add: &ActionDatabase) -> BTreeMap<String, AddOutcome> {
    let majority = analysis.clip_add_outcomes(add);
    let n = analysis.add_results.len().max(1) as f64;
    majority
        .into_iter()
        .map(|(name, satisfied)| {
            let score = analysis.add_results.iter().filter_map(|w| w.get(&name)).map(|o| o.score).sum::<f64>() / n;
            (name, AddOutcome { satisfied, score })
        })
        .collect()
}

#[derive(Serialize)]
struct WindowScores<'a> {
    window: [usize; 2],
    scores: &'a [ActivityScore],
}

fn cmd_dad(common: &Common, l: &Loaded, out: &mut Vec<u8>) -> Result<()> {
    let analysis = run_analysis(common, l)?;
    let clip = clip_outcomes(&analysis, &l.add);
    let mut onsets = BTreeMap::new();
    for (k, w) in analysis.add_results.iter().enumerate() {
        for (name, o) in w {
            if o.satisfied {
                onsets.entry(name.clone()).or_insert(k);
            }
        }
    }
    let clip_scores = dad_score(&clip, &l.activities, Some(&onsets));
    let explanations: Vec<_> = clip_scores.iter().map(|s| explain_dad(s, &clip)).collect();
    let means = analysis.mean_ratios();
    let top = analysis.top_activity();
    match common.format {
        Format::Records => {
            for (w, scores) in analysis.windows.iter().zip(&analysis.scores) {
                line(
                    out,
                    &WindowScores {
                        window: [w.window.0, w.window.1],
                        scores,
                    },
                );
            }
            let mean_map: Vec<_> = means.iter().map(|(a, r)| json!({"activity": a, "mean_ratio": r})).collect();
            line(
                out,
                &json!({
                    "summary": {
                        "top": top.as_ref().map(|t| &t.0),
                        "mean_ratios": mean_map,
                        "scores": clip_scores,
                        "explanations": explanations,
                    }
                }),
            );
        }
        Format::Text => {
            if let Some((name, r)) = &top {
                let _ = writeln!(out, "top activity: {name} (mean ratio {r:.3})");
            }
            for (a, r) in &means {
                let _ = writeln!(out, "  {a}: mean ratio {r:.3} over {} windows", analysis.scores.len());
            }
            for e in &explanations {
                out.extend_from_slice(e.text().as_bytes());
            }
        }
    }
    Ok(())
}

fn schema(l: &Loaded) -> Vec<String> {
    features::clip_schema(&l.add, &l.registry)
}

fn problem(common: &Common, l: &Loaded) -> Result<Vec<String>> {
    let analysis = run_analysis(common, l)?;
    Ok(analysis.clip_features(&l.add, &l.registry))
}

fn source_name(common: &Common, source: &Option<String>) -> String {
    source.clone().unwrap_or_else(|| {
        common
            .poses
            .as_ref()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    })
}

fn check_schema(cb: &CaseBase, l: &Loaded) -> Result<()> {
    if cb.schema != schema(l) {
        return Err(data_err("case base schema differs from the current action database and fluents"));
    }
    Ok(())
}

fn write_cb(cb: &CaseBase, out: &mut Vec<u8>) {
    cb.write(&mut *out).expect("writing to memory cannot fail");
}

fn cmd_cbr(common: &Common, l: &Loaded, cmd: &CbrCommand, out: &mut Vec<u8>) -> Result<()> {
    match cmd {
        CbrCommand::Init => {
            write_cb(&CaseBase::new(schema(l), l.activity_config.cbr), out);
        }
        CbrCommand::Case { label, source } => {
            let case = Case::new(problem(common, l)?, label.clone(), source_name(common, source));
            line(out, &case);
        }
        CbrCommand::Classify => {
            let cb = read_cb(common)?;
            check_schema(&cb, l)?;
            let p = problem(common, l)?;
            let result = cb.classify(&p).map_err(data_err)?;
            let explanation = explain_cbr(&p, &result, &cb);
            match common.format {
                Format::Records => line(
                    out,
                    &json!({
                        "label": result.label,
                        "best_case": result.best_case,
                        "similarity": result.similarity,
                        "explanation": explanation,
                    }),
                ),
                Format::Text => out.extend_from_slice(explanation.text().as_bytes()),
            }
        }
        CbrCommand::Retain { label, source, out: dest } => {
            let cb = read_cb(common)?;
            check_schema(&cb, l)?;
            let case = Case::new(problem(common, l)?, label.clone(), source_name(common, source));
            let correct = cb.classify(&case.problem).is_ok_and(|c| c.label == case.solution);
            let (next, outcome) = cb.retain(case, correct).map_err(data_err)?;
            let dest = dest.clone().or_else(|| common.cb.clone()).expect("--cb was read");
            let mut buf = Vec::new();
            write_cb(&next, &mut buf);
            fs::write(&dest, buf).map_err(|e| data_err(format!("{}: {e}", dest.display())))?;
            match common.format {
                Format::Records => line(out, &json!({"correct": correct, "outcome": outcome, "cases": next.len()})),
                Format::Text => {
                    let _ = writeln!(
                        out,
                        "{} (novelty {:.3}, classified {}); case base has {} cases",
                        if outcome.retained { "retained" } else { "rejected" },
                        outcome.novelty,
                        if correct { "correctly" } else { "incorrectly" },
                        next.len()
                    );
                }
            }
        }
        CbrCommand::Trim => {
            let raw = read_cb(common)?;
            let trimmed =
                qualpose::recognition::trim_init(raw.schema.clone(), raw.cases(), l.activity_config.cbr).map_err(data_err)?;
            write_cb(&trimmed, out);
        }
    }
    Ok(())
}

fn cmd_synth(
    common: &Common,
    preset_name: &Option<String>,
    spec_path: &Option<PathBuf>,
    seed: Option<u64>,
    noise: Option<f64>,
    strength: Option<f64>,
    duration: Option<f64>,
    out: &mut Vec<u8>,
) -> Result<()> {
    let mut spec: MotionSpec = match (preset_name, spec_path) {
        (Some(name), _) => preset(name).map_err(config_err)?,
        (None, Some(p)) => MotionSpec::from_toml_str(&read_text(p)?).map_err(config_err)?,
        (None, None) => return Err(config_err("give --preset or --spec")),
    };
    if let Some(d) = duration {
        spec.duration = d;
    }
    if let Some(fps) = common.fps {
        spec.frame_rate = fps;
    }
    if let Some(s) = strength {
        spec = perturb(&spec, seed.unwrap_or(spec.seed), s, noise.unwrap_or(spec.noise));
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(n) = noise {
        spec.noise = n;
    }
    let seq = generate_motion(&spec).map_err(config_err)?;
    write_pose_sequence(&mut *out, &seq).expect("writing to memory cannot fail");
    Ok(())
}

/// Sample positions: an even grid plus every transition's tau and band
/// edges.
fn curve_xs(ch: &Channel, lo: f64, hi: f64, samples: usize, eps: f64) -> Vec<f64> {
    let mut marks = Vec::new();
    for t in std::iter::once(&ch.first_transition).chain(ch.last_transition.as_ref()) {
        let (a, b) = t.band();
        marks.extend([a, t.tau, b].into_iter().filter(|x| (lo..=hi).contains(x)));
    }
    let snap = |x: f64| marks.iter().copied().find(|m| (m - x).abs() <= 1e-9).unwrap_or(x);
    let mut xs: Vec<f64> = curve_samples(&ch.first_transition, eps, lo, hi, samples)
        .into_iter()
        .map(|(x, _)| snap(x))
        .chain(marks.iter().copied())
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

#[derive(Serialize)]
struct CurveSample<'a> {
    fluent: &'a str,
    channel: &'a str,
    x: f64,
    confidences: BTreeMap<&'a str, f64>,
}

fn cmd_curves(common: &Common, l: &Loaded, fluent: &Option<String>, samples: usize, out: &mut Vec<u8>) -> Result<()> {
    if samples < 2 {
        return Err(config_err("--samples must be at least 2"));
    }
    let selected: Vec<_> = match fluent {
        Some(id) => vec![l.registry.get(id).ok_or_else(|| config_err(format!("unknown fluent {id:?}")))?],
        None => l.registry.all().collect(),
    };
    let eps = l.registry.config().epsilon;
    for f in selected {
        for ch in &f.channels {
            let (lo, hi) = match f.family {
                qualpose::fluents::Family::Near => (0.0, 1.5),
                _ => (0.0, std::f64::consts::PI),
            };
            for x in curve_xs(ch, lo, hi, samples, eps) {
                let (c0, cn) = qualpose::fluents::channel_confidences(ch, x, eps);
                let mut confidences = BTreeMap::from([(ch.first.as_str(), c0), (ch.last.as_str(), cn)]);
                if let (true, Some(m)) = (ch.is_three_state(), f.middle.as_deref()) {
                    confidences.insert(m, qualpose::fluents::middle_confidence(c0, cn));
                }
                let rec = CurveSample {
                    fluent: &f.id,
                    channel: &ch.id,
                    x,
                    confidences,
                };
                match common.format {
                    Format::Records => line(out, &rec),
                    Format::Text => {
                        let cs: Vec<String> = rec.confidences.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
                        let _ = writeln!(out, "{}\t{:.6}\t{}", rec.channel, rec.x, cs.join("\t"));
                    }
                }
            }
        }
    }
    Ok(())
}

fn run(cli: &Cli, out: &mut Vec<u8>) -> Result<()> {
    let common = &cli.common;
    let loaded = load(common)?;
    match &cli.command {
        Command::Annotate => cmd_annotate(common, &loaded, out),
        Command::Qmp { series } => cmd_qmp(common, &loaded, series, out),
        Command::Dad => cmd_dad(common, &loaded, out),
        Command::Cbr(cmd) => cmd_cbr(common, &loaded, cmd, out),
        Command::Synth {
            preset,
            spec,
            seed,
            noise,
            perturb,
            duration,
        } => cmd_synth(common, preset, spec, *seed, *noise, *perturb, *duration, out),
        Command::Curves { fluent, samples } => cmd_curves(common, &loaded, fluent, *samples, out),
    }
}

fn fail(err: &CliError) -> ExitCode {
    let rec = json!({"error": err.kind(), "message": err.to_string()});
    eprintln!("{rec}");
    ExitCode::from(err.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Config(e.render().to_string().trim_end().to_string())),
    };
    let mut out = Vec::new();
    match run(&cli, &mut out) {
        Ok(()) => {
            let mut stdout = io::stdout().lock();
            if stdout.write_all(&out).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
