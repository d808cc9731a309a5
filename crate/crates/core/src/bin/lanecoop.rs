//! `lanecoop` command line front end. Every subcommand reads an optional flat
//! `key = value` config, takes a seed and writes into `--out-dir`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use lanecoop::artifact::{read_json, read_jsonl, write_csv, write_json, write_jsonl};
use lanecoop::bundle::ModelBundle;
use lanecoop::config::{Config, Provenance};
use lanecoop::decision::{ablate, evaluate, generate_corpus, train, Ablation, CorpusConfig, TrainConfig};
use lanecoop::detect::duration_stats;
use lanecoop::ingest::format::{read_samples, write_samples};
use lanecoop::ingest::synthetic::{generate_scene, SceneConfig};
use lanecoop::ingest::{ingest_records, parse_csv, Episode, IngestConfig, SampleSet, Style};
use lanecoop::irl::{demos_from_episodes, fit_weights, FitConfig, FitTrace, RewardWeights};
use lanecoop::sim::report::{write_confusion, write_run_report, write_training_curves, RUN_REPORT_FORMAT};
use lanecoop::sim::{
    blocked_scene, case_study_scene, cooperative_demos, open_gap_scene, plan_lane_change, replay, GapRulePolicy,
    LaneChangePolicy, LearnedPolicy, Mode, ReplayConfig, RunReport, Scenario, ScriptedPolicy,
};
use lanecoop::style::{cluster_styles, features_from_episodes, label_samples, train_recognizer, RecognizerConfig, StyleModel};
use lanecoop::{Error, Result};

#[derive(Parser)]
#[command(name = "lanecoop", version, about = "Lane-change decision, prediction and planning toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Clone)]
struct Source {
    /// NGSIM-format CSV.
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Use the bundled synthetic traffic generator instead of a CSV.
    #[arg(long)]
    synthetic: bool,
}

#[derive(Args, Clone)]
struct SampleSource {
    /// Samples file written by `ingest`.
    #[arg(long, conflicts_with = "synthetic")]
    samples: Option<PathBuf>,
    /// Use the rule-generated decision corpus.
    #[arg(long)]
    synthetic: bool,
    /// Style model used to label the samples' T-Rear styles.
    #[arg(long)]
    style_model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, filter, smooth, detect and window trajectories.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
    },
    /// Detect lane changes and fit the duration distribution.
    Detect {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
    },
    /// Cluster driving styles from episode trajectories.
    Cluster {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: PathBuf,
    },
    /// Train the style recognizer on cluster labels.
    TrainStyle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: PathBuf,
    },
    /// Train the joint intention/decision model.
    TrainDecision {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: SampleSource,
        /// IRL weights to include in the model bundle.
        #[arg(long)]
        omega: Option<PathBuf>,
    },
    /// Train every ablation variant and tabulate the results.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: SampleSource,
    },
    /// Fit Max-Ent IRL reward weights.
    FitIrl {
        #[command(flatten)]
        common: Common,
        /// Episodes file written by `ingest`.
        #[arg(long, conflicts_with = "synthetic")]
        episodes: Option<PathBuf>,
        /// Use synthetic cooperative-follower demonstrations.
        #[arg(long)]
        synthetic: bool,
        #[arg(long, default_value = "omega.json")]
        out: String,
    },
    /// Plan and track one lane change from a scenario's initial state.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Scenario JSON file or built-in name (case_study, blocked, open_gap).
        #[arg(long)]
        scenario: String,
        /// IRL weights; without them the T-Rear vehicle is predicted with IDM.
        #[arg(long)]
        omega: Option<PathBuf>,
        #[arg(long, default_value = "plan.csv")]
        out: String,
    },
    /// Closed-loop replay of a scenario.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "ours")]
        mode: Mode,
        #[arg(long)]
        omega: Option<PathBuf>,
        /// Model bundle for learned decisions (also supplies IRL weights).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Request a lane change from this step on instead of using a model.
        #[arg(long, conflicts_with = "model")]
        lc_from: Option<usize>,
    },
    /// Evaluate a trained model on a sample set.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: SampleSource,
        #[arg(long)]
        model: PathBuf,
    },
    /// Turn saved training histories and run reports into plot data.
    Report {
        #[command(flatten)]
        common: Common,
        /// `train_history.json` from `train-decision`.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Run report JSON from `simulate`.
        #[arg(long)]
        run: Vec<PathBuf>,
    },
}

struct Ctx {
    cfg: Config,
    seed: u64,
    out: PathBuf,
    prov: Provenance,
}

impl Ctx {
    fn new(c: &Common) -> Result<Self> {
        let cfg = Config::load_optional(c.config.as_deref())?;
        cfg.ensure_known(&known_keys())?;
        validate_values(&cfg, c.seed)?;
        Ok(Self {
            prov: Provenance::new(c.seed, &cfg),
            cfg,
            seed: c.seed,
            out: c.out_dir.clone(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn json<T: Serialize>(&self, name: &str, format: &str, v: &T) -> Result<()> {
        write_json(&self.path(name), format, &self.prov, v)
    }
}

fn known_keys() -> Vec<&'static str> {
    let mut k: Vec<&str> = Vec::new();
    k.extend_from_slice(IngestConfig::KEYS);
    k.extend_from_slice(TrainConfig::KEYS);
    k.extend_from_slice(FitConfig::KEYS);
    k.extend(ReplayConfig::keys());
    k.extend(["samples", "synthetic_vehicles_per_lane"]);
    k
}

/// Parses every recognised key up front so a malformed value fails with the
/// config exit code whichever subcommand runs.
fn validate_values(cfg: &Config, seed: u64) -> Result<()> {
    IngestConfig::from_config(cfg)?;
    TrainConfig::from_config(cfg, seed)?;
    FitConfig::from_config(cfg)?;
    ReplayConfig::from_config(cfg)?;
    cfg.get("samples", CorpusConfig::default().samples)?;
    cfg.get("synthetic_vehicles_per_lane", SceneConfig::default().vehicles_per_lane)?;
    Ok(())
}

fn records(src: &Source, ctx: &Ctx) -> Result<Vec<lanecoop::ingest::RawRecord>> {
    let icfg = IngestConfig::from_config(&ctx.cfg)?;
    match (&src.input, src.synthetic) {
        (Some(p), _) => parse_csv(p, icfg.location.as_deref()),
        (None, true) => {
            let scene = SceneConfig {
                vehicles_per_lane: ctx.cfg.get("synthetic_vehicles_per_lane", SceneConfig::default().vehicles_per_lane)?,
                ..SceneConfig::default()
            };
            Ok(generate_scene(&scene, ctx.seed).records)
        }
        (None, false) => Err(Error::config("give --input <csv> or --synthetic")),
    }
}

fn samples(src: &SampleSource, ctx: &Ctx) -> Result<SampleSet> {
    let mut set = match (&src.samples, src.synthetic) {
        (Some(p), _) => read_samples(p)?.1,
        (None, true) => {
            let corpus = CorpusConfig {
                samples: ctx.cfg.get("samples", CorpusConfig::default().samples)?,
                ..CorpusConfig::default()
            };
            generate_corpus(&corpus, ctx.seed)?
        }
        (None, false) => return Err(Error::config("give --samples <file> or --synthetic")),
    };
    if let Some(p) = &src.style_model {
        label_samples(&load_style(p)?, &mut set)?;
    }
    Ok(set)
}

/// Training settings: the synthetic preset for the synthetic corpus, library
/// defaults otherwise; config keys override either.
fn train_config(src: &SampleSource, ctx: &Ctx) -> Result<TrainConfig> {
    let mut cfg = if src.synthetic {
        TrainConfig::synthetic_preset().to_config()
    } else {
        Config::default()
    };
    for (k, v) in ctx.cfg.entries() {
        cfg.set(k, v);
    }
    TrainConfig::from_config(&cfg, ctx.seed)
}

fn load_episodes(p: &Path) -> Result<Vec<Episode>> {
    Ok(read_jsonl(p)?.1)
}

const STYLE_FORMAT: &str = "style_model";
const OMEGA_FORMAT: &str = "reward_weights";

fn load_style(p: &Path) -> Result<StyleModel> {
    Ok(read_json(p, STYLE_FORMAT)?.content)
}

fn load_omega(p: &Path) -> Result<RewardWeights> {
    Ok(read_json(p, OMEGA_FORMAT)?.content)
}

fn scenario(arg: &str) -> Result<Scenario> {
    match arg {
        "case_study" => Ok(case_study_scene()),
        "blocked" => Ok(blocked_scene()),
        "open_gap" => Ok(open_gap_scene()),
        path => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            Ok(serde_json::from_slice(&bytes)?)
        }
    }
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Ingest { common, source } => {
            let ctx = Ctx::new(&common)?;
            let out = ingest_records(&records(&source, &ctx)?, &IngestConfig::from_config(&ctx.cfg)?, ctx.seed)?;
            write_jsonl(&ctx.path("episodes.jsonl"), &ctx.prov, &out.episodes)?;
            write_samples(&ctx.path("samples.bin"), &out.samples, &ctx.prov)?;
            ctx.json("ingest_report.json", "ingest_report", &out.report)?;
            println!(
                "{} episodes, {} samples ({} LK / {} LC)",
                out.report.episodes, out.report.samples, out.report.lk_samples, out.report.lc_samples
            );
        }
        Cmd::Detect { common, source } => {
            let ctx = Ctx::new(&common)?;
            let out = ingest_records(&records(&source, &ctx)?, &IngestConfig::from_config(&ctx.cfg)?, ctx.seed)?;
            write_jsonl(&ctx.path("events.jsonl"), &ctx.prov, &out.events)?;
            let stats = duration_stats(&out.events)?;
            ctx.json("durations.json", "duration_fit", &stats.fit)?;
            let rows: Vec<Vec<String>> = stats.residuals.iter().map(|(d, r)| vec![f6(*d), f6(*r)]).collect();
            write_csv(&ctx.path("duration_residuals.csv"), &ctx.prov, &["duration_s", "ecdf_minus_fit"], &rows)?;
            println!(
                "{} lane changes, log-normal mu {:.4} sigma {:.4}",
                out.events.len(),
                stats.fit.mu,
                stats.fit.sigma
            );
        }
        Cmd::Cluster { common, episodes } => {
            let ctx = Ctx::new(&common)?;
            let feats = features_from_episodes(&load_episodes(&episodes)?)?;
            let f: Vec<_> = feats.iter().map(|(_, f)| *f).collect();
            let out = cluster_styles(&f, ctx.seed)?;
            ctx.json("style_model.json", STYLE_FORMAT, &out.model)?;
            let rows: Vec<Vec<String>> = feats
                .iter()
                .zip(&out.scores)
                .zip(&out.labels)
                .map(|(((id, _), sc), l)| {
                    vec![
                        id.to_string(),
                        f6(sc.first().copied().unwrap_or(0.0)),
                        f6(sc.get(1).copied().unwrap_or(0.0)),
                        l.name().to_string(),
                    ]
                })
                .collect();
            write_csv(&ctx.path("style_embedding.csv"), &ctx.prov, &["vehicle_id", "pc1", "pc2", "style"], &rows)?;
            for s in Style::ALL {
                println!("{:<13} {}", s.name(), out.labels.iter().filter(|l| **l == s).count());
            }
        }
        Cmd::TrainStyle { common, episodes } => {
            let ctx = Ctx::new(&common)?;
            let feats = features_from_episodes(&load_episodes(&episodes)?)?;
            let f: Vec<_> = feats.iter().map(|(_, f)| *f).collect();
            let mut out = cluster_styles(&f, ctx.seed)?;
            let x = f.iter().map(|f| out.model.standardize(f)).collect::<Result<Vec<_>>>()?;
            let (net, summary) = train_recognizer(&x, &out.labels, ctx.seed, &RecognizerConfig::default())?;
            out.model.recognizer = Some(net);
            ctx.json("style_model.json", STYLE_FORMAT, &out.model)?;
            ctx.json("style_training.json", "style_training", &summary)?;
            println!(
                "recognizer: {} epochs, loss {:.4}, train accuracy {:.4}",
                summary.epochs, summary.loss, summary.train_accuracy
            );
        }
        Cmd::TrainDecision { common, source, omega } => {
            let ctx = Ctx::new(&common)?;
            let set = samples(&source, &ctx)?;
            let cfg = train_config(&source, &ctx)?;
            let out = train(&set, &cfg, Ablation::FULL)?;
            let bundle = ModelBundle {
                style: source.style_model.as_deref().map(load_style).transpose()?,
                decision: out.model.clone(),
                omega: omega.as_deref().map(load_omega).transpose()?,
            };
            bundle.save(&ctx.path("model_bundle.json"), &ctx.prov)?;
            ctx.json("train_history.json", "train_history", &out.history)?;
            write_training_curves(&ctx.out, &ctx.prov, &out.history)?;
            let report = out.final_report();
            write_confusion(&ctx.path("confusion.csv"), &ctx.prov, &report.confusion)?;
            ctx.json("metrics.json", "eval_report", report)?;
            println!(
                "val accuracy {:.4}  f1 {:.4}  (best f1 {:.4} at epoch {})",
                report.accuracy, report.f1, out.best_f1, out.best_epoch
            );
        }
        Cmd::Ablate { common, source } => {
            let ctx = Ctx::new(&common)?;
            let set = samples(&source, &ctx)?;
            let rows = ablate(&set, &train_config(&source, &ctx)?, &Ablation::TABLE)?;
            ctx.json("ablation.json", "ablation", &rows)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.ablation.label(),
                        f6(r.report.accuracy),
                        f6(r.report.precision),
                        f6(r.report.recall),
                        f6(r.report.f1),
                        f6(r.best_f1),
                    ]
                })
                .collect();
            write_csv(
                &ctx.path("ablation.csv"),
                &ctx.prov,
                &["variant", "accuracy", "precision", "recall", "f1", "best_f1"],
                &table,
            )?;
            for r in &table {
                println!("{}", r.join("  "));
            }
        }
        Cmd::FitIrl {
            common,
            episodes,
            synthetic,
            out,
        } => {
            let ctx = Ctx::new(&common)?;
            let rcfg = ReplayConfig::from_config(&ctx.cfg)?;
            let demos = match (&episodes, synthetic) {
                (Some(p), _) => demos_from_episodes(&load_episodes(p)?, rcfg.horizon)?,
                (None, true) => cooperative_demos(200, rcfg.horizon, ctx.seed, &rcfg.idm)?,
                (None, false) => return Err(Error::config("give --episodes <file> or --synthetic")),
            };
            let (w, trace) = fit_weights(&demos, &FitConfig::from_config(&ctx.cfg)?)?;
            ctx.json(&out, OMEGA_FORMAT, &w)?;
            write_irl_trace(&ctx, &trace)?;
            println!(
                "omega [{:.4}, {:.4}, {:.4}] from {} demos, {} iterations, converged {}",
                w.omega[0],
                w.omega[1],
                w.omega[2],
                demos.len(),
                trace.iterations,
                trace.converged
            );
        }
        Cmd::Plan {
            common,
            scenario: sc,
            omega,
            out,
        } => {
            let ctx = Ctx::new(&common)?;
            let w = omega.as_deref().map(load_omega).transpose()?;
            let plan = plan_lane_change(&scenario(&sc)?, w.as_ref(), &ReplayConfig::from_config(&ctx.cfg)?)?;
            let rows: Vec<Vec<String>> = plan
                .steps
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    vec![
                        k.to_string(),
                        f6(s.state.x),
                        f6(s.state.y),
                        f6(s.state.psi),
                        f6(s.state.v),
                        f6(s.control.accel),
                        f6(s.control.steer),
                        f6(s.y_ref),
                    ]
                })
                .collect();
            write_csv(
                &ctx.path(&out),
                &ctx.prov,
                &["step", "x", "y", "psi", "v", "accel", "steer", "y_ref"],
                &rows,
            )?;
            ctx.json("plan_summary.json", "plan", &PlanSummary::from(&plan))?;
            println!("d_long {:.2} m (fallback {}), {} steps", plan.d_long, plan.d_long_fallback, plan.steps.len());
        }
        Cmd::Simulate {
            common,
            scenario: sc,
            mode,
            omega,
            model,
            lc_from,
        } => {
            let ctx = Ctx::new(&common)?;
            let sc = scenario(&sc)?;
            let bundle = model.as_deref().map(ModelBundle::load).transpose()?;
            let w = match (&omega, &bundle) {
                (Some(p), _) => Some(load_omega(p)?),
                (None, Some(b)) => b.omega.clone(),
                _ => None,
            };
            let mut policy: Box<dyn LaneChangePolicy> = match (bundle, lc_from) {
                (Some(b), _) => Box::new(LearnedPolicy {
                    model: b.decision,
                    style: b.style,
                }),
                (None, Some(k)) => Box::new(ScriptedPolicy { lc_from: Some(k) }),
                (None, None) => Box::new(GapRulePolicy {
                    rule: CorpusConfig::default(),
                    style: Style::Normal,
                }),
            };
            let rep = replay(&sc, mode, policy.as_mut(), w.as_ref(), &ReplayConfig::from_config(&ctx.cfg)?)?;
            write_run_report(&ctx.out, &format!("run_{mode}"), &ctx.prov, &rep)?;
            print_run(&rep);
        }
        Cmd::Eval { common, source, model } => {
            let ctx = Ctx::new(&common)?;
            let set = samples(&source, &ctx)?;
            let bundle = ModelBundle::load(&model)?;
            let report = evaluate(&bundle.decision, &set, None)?;
            ctx.json("eval.json", "eval_report", &report)?;
            write_confusion(&ctx.path("eval_confusion.csv"), &ctx.prov, &report.confusion)?;
            println!(
                "accuracy {:.4}  f1 {:.4}  LC f1 {:.4}  on {} samples",
                report.accuracy,
                report.f1,
                report.lc.f1,
                set.len()
            );
        }
        Cmd::Report { common, history, run } => {
            let ctx = Ctx::new(&common)?;
            if history.is_none() && run.is_empty() {
                return Err(Error::config("give --history and/or --run"));
            }
            if let Some(p) = history {
                let h: Vec<lanecoop::decision::EpochRecord> = read_json(&p, "train_history")?.content;
                for p in write_training_curves(&ctx.out, &ctx.prov, &h)? {
                    println!("{}", p.display());
                }
                if let Some(last) = h.last() {
                    write_confusion(&ctx.path("confusion.csv"), &ctx.prov, &last.val.confusion)?;
                }
            }
            for p in run {
                let rep: RunReport = read_json(&p, RUN_REPORT_FORMAT)?.content;
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string();
                for p in write_run_report(&ctx.out, &stem, &ctx.prov, &rep)? {
                    println!("{}", p.display());
                }
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PlanSummary {
    d_long: f64,
    d_long_fallback: bool,
    path: lanecoop::planner::SigmoidPath,
    predicted_rear: Option<Vec<f64>>,
    final_lateral_error: f64,
}

impl From<&lanecoop::sim::PlanOutput> for PlanSummary {
    fn from(p: &lanecoop::sim::PlanOutput) -> Self {
        let last = p.steps.last().expect("tracking yields at least one step");
        Self {
            d_long: p.d_long,
            d_long_fallback: p.d_long_fallback,
            path: p.path,
            predicted_rear: p.predicted_rear.clone(),
            final_lateral_error: last.state.y - last.y_ref,
        }
    }
}

fn write_irl_trace(ctx: &Ctx, t: &FitTrace) -> Result<()> {
    let rows: Vec<Vec<String>> = t
        .log_likelihood
        .iter()
        .zip(&t.grad_norm)
        .enumerate()
        .map(|(i, (ll, g))| vec![i.to_string(), f6(*ll), f6(*g)])
        .collect();
    write_csv(&ctx.path("irl_trace.csv"), &ctx.prov, &["iteration", "log_likelihood", "grad_norm"], &rows)
}

fn print_run(rep: &RunReport) {
    let f = |o: Option<f64>| o.map_or("-".to_string(), |v| format!("{v:.2}"));
    println!(
        "{} [{}]: completion {} s, commit {} s, min gap {} m, max |jerk| {:.2}, collision {}",
        rep.scenario,
        rep.mode,
        f(rep.completion_time_s),
        f(rep.commit_s),
        f(rep.min_gap_m),
        rep.max_abs_jerk,
        rep.collision
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
