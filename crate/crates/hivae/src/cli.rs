//! Command-line orchestration: configuration loading, the
//! simulate/train/eval/report subcommands, and the end-to-end `run-all`
//! pipeline. All randomness derives from one master seed.

use crate::baselines::{
    train_rnn, train_tomnet, BTomModel, ExtendedBTomModel, GoalInferenceModel, RnnConfig,
    RnnKind, RnnModel, ToMNetConfig, ToMNetModel, DEFAULT_BTOM_BETA,
};
use crate::error::{Error, Result};
use crate::eval::{
    self, drift_evaluation, emit_report, evaluate_brier_curve, false_goal_curve,
    wilcoxon_signed_rank, BrierCurve, EvalReport, ReportMetadata, EVAL_FRACTIONS,
    FALSE_GOAL_INTERVALS,
};
use crate::graph::{generate_synthetic_graph, load_graph, save_graph, GeneratorSpec, SpatialGraph};
use crate::model::{self, HiVaeModel, ModelConfig};
use crate::rng;
use crate::sim::{
    generate_dataset, generate_drifted_profiles, kl_divergence, load_dataset,
    sample_agent_profiles, save_dataset, synthesize_false_goal_episode, AgentProfile, Dataset,
    Episode, FalseGoalMeta, SimParams,
};
use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

/// Model names accepted by `train` and listed in `RunConfig::models`.
pub const REGISTERED_MODELS: [&str; 6] =
    ["btom", "extended_btom", "gru", "lstm", "tomnet", "hivae"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// Load an existing graph instead of generating one.
    pub graph_path: Option<PathBuf>,
    pub generator: GeneratorSpec,
    pub sim: SimParams,
    /// Models to train and evaluate; each must be registered.
    pub models: Vec<String>,
    pub hivae: ModelConfig,
    pub rnn: RnnConfig,
    pub tomnet: ToMNetConfig,
    pub btom_beta: f64,
    pub fractions: Vec<f64>,
    /// False-goal waypoint radius as a multiple of the mean edge length.
    pub false_goal_radius_factor: f64,
    pub drift_kl_threshold: f64,
    pub drift_max_attempts: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 0,
            out_dir: PathBuf::from("out"),
            graph_path: None,
            generator: GeneratorSpec::default(),
            sim: SimParams::default(),
            models: REGISTERED_MODELS.iter().map(|s| s.to_string()).collect(),
            hivae: ModelConfig::default(),
            rnn: RnnConfig::default(),
            tomnet: ToMNetConfig::default(),
            btom_beta: DEFAULT_BTOM_BETA,
            fractions: EVAL_FRACTIONS.to_vec(),
            false_goal_radius_factor: 1.5,
            drift_kl_threshold: 1.0,
            drift_max_attempts: 512,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for name in &self.models {
            if !REGISTERED_MODELS.contains(&name.as_str()) {
                return Err(Error::UnknownModel(name.clone()));
            }
        }
        if self.sim.num_agents == 0 {
            return Err(Error::Config("sim.num_agents must be >= 1".into()));
        }
        if self.sim.episodes_per_agent == 0 {
            return Err(Error::Config("sim.episodes_per_agent must be >= 1".into()));
        }
        if self.fractions.is_empty() || self.fractions.iter().any(|&f| !(0.0 < f && f <= 1.0)) {
            return Err(Error::Config("fractions must be non-empty, each in (0, 1]".into()));
        }
        if self.btom_beta <= 0.0 {
            return Err(Error::Config("btom_beta must be positive".into()));
        }
        self.hivae.validate()?;
        Ok(())
    }

    /// One seed governs everything: the master seed is pushed into every
    /// component seed so a config + master_seed pair is fully reproducible.
    pub fn propagate_seed(&mut self) {
        self.generator.seed = self.master_seed;
        self.hivae.seed = self.master_seed;
        self.rnn.seed = self.master_seed;
        self.tomnet.seed = self.master_seed;
    }

    // Artifact layout inside out_dir.
    pub fn graph_file(&self) -> PathBuf {
        self.out_dir.join("graph.json")
    }
    pub fn dataset_file(&self) -> PathBuf {
        self.out_dir.join("dataset.jsonl")
    }
    pub fn dataset_header_file(&self) -> PathBuf {
        self.out_dir.join("dataset.header.json")
    }
    pub fn profiles_file(&self) -> PathBuf {
        self.out_dir.join("profiles.json")
    }
    pub fn checkpoint_file(&self, model: &str) -> PathBuf {
        self.out_dir.join("models").join(format!("{model}.json"))
    }
    pub fn trace_file(&self, model: &str) -> PathBuf {
        self.out_dir.join("models").join(format!("{model}.trace.csv"))
    }
    pub fn report_dir(&self) -> PathBuf {
        self.out_dir.join("report")
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "hivae",
    about = "Goal inference on spatial graphs: simulator, hierarchical VAE, baselines, experiments"
)]
pub struct Cli {
    /// JSON configuration file; flags override config fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory override.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Worker threads for evaluation; results are identical for any value.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// Number of simulated agents override.
    #[arg(long, global = true)]
    pub agents: Option<usize>,

    /// Episodes per agent override.
    #[arg(long, global = true)]
    pub episodes: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the graph and the synthetic episode dataset.
    Simulate,
    /// Train or fit one model and write its checkpoint.
    Train {
        /// One of: btom, extended_btom, gru, lstm, tomnet, hivae.
        model: String,
    },
    /// Run evaluation experiments over all configured models.
    Eval {
        #[arg(value_enum)]
        experiment: Experiment,
    },
    /// Re-render CSV tables from a stored JSON report.
    Report,
    /// simulate + train every configured model + eval all.
    RunAll,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Brier,
    FalseGoal,
    Drift,
    All,
}

/// Resolves the effective configuration: flag > file > default.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(agents) = cli.agents {
        cfg.sim.num_agents = agents;
    }
    if let Some(episodes) = cli.episodes {
        cfg.sim.episodes_per_agent = episodes;
    }
    cfg.propagate_seed();
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let threads = cli.threads.max(1);
    match &cli.command {
        Command::Simulate => {
            cmd_simulate(&cfg)?;
        }
        Command::Train { model } => {
            cmd_train(&cfg, model)?;
        }
        Command::Eval { experiment } => {
            cmd_eval(&cfg, *experiment, threads)?;
        }
        Command::Report => {
            cmd_report(&cfg)?;
        }
        Command::RunAll => {
            cmd_simulate(&cfg)?;
            for name in cfg.models.clone() {
                cmd_train(&cfg, &name)?;
            }
            cmd_eval(&cfg, Experiment::All, threads)?;
        }
    }
    Ok(())
}

fn load_or_generate_graph(cfg: &RunConfig) -> Result<SpatialGraph> {
    match &cfg.graph_path {
        Some(path) => load_graph(path),
        None => generate_synthetic_graph(&cfg.generator),
    }
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::io(cfg.out_dir.display().to_string(), e))?;
    let g = load_or_generate_graph(cfg)?;
    save_graph(&g, cfg.graph_file())?;
    let profiles = sample_agent_profiles(
        &g,
        cfg.sim.num_agents,
        cfg.sim.dirichlet_alpha,
        cfg.sim.tau,
        cfg.master_seed,
    )?;
    let profiles_json = serde_json::to_string_pretty(&profiles)?;
    std::fs::write(cfg.profiles_file(), profiles_json)
        .map_err(|e| Error::io(cfg.profiles_file().display().to_string(), e))?;
    let dataset = generate_dataset(&g, &profiles, &cfg.sim, cfg.master_seed)?;
    save_dataset(&dataset, cfg.dataset_file(), cfg.dataset_header_file())?;
    let train_n = dataset.train().count();
    let test_n = dataset.test().count();
    println!(
        "simulated {} episodes ({} train / {} test) over graph {} ({} nodes, {} goals)",
        dataset.episodes.len(),
        train_n,
        test_n,
        &g.content_hash()[..12],
        g.num_nodes(),
        g.goal_set().len()
    );
    Ok(())
}

fn load_artifacts(cfg: &RunConfig) -> Result<(SpatialGraph, Dataset, Vec<AgentProfile>)> {
    let g = load_graph(cfg.graph_file())?;
    let dataset = load_dataset(cfg.dataset_file(), cfg.dataset_header_file())?;
    dataset.validate(&g)?;
    let path = cfg.profiles_file();
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let profiles: Vec<AgentProfile> = serde_json::from_str(&text)?;
    Ok((g, dataset, profiles))
}

fn write_trace_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn cmd_train(cfg: &RunConfig, model_name: &str) -> Result<()> {
    if !REGISTERED_MODELS.contains(&model_name) {
        return Err(Error::UnknownModel(model_name.to_string()));
    }
    let (g, dataset, _profiles) = load_artifacts(cfg)?;
    let models_dir = cfg.out_dir.join("models");
    std::fs::create_dir_all(&models_dir)
        .map_err(|e| Error::io(models_dir.display().to_string(), e))?;
    let ckpt = cfg.checkpoint_file(model_name);
    match model_name {
        "btom" => {
            let model = BTomModel::new(&g, cfg.btom_beta)?;
            let json = serde_json::to_string(&model)?;
            std::fs::write(&ckpt, json).map_err(|e| Error::io(ckpt.display().to_string(), e))?;
            println!("fit btom (beta = {}), no gradient steps", cfg.btom_beta);
        }
        "extended_btom" => {
            let model = ExtendedBTomModel::fit(&g, &dataset, cfg.btom_beta)?;
            let json = serde_json::to_string(&model)?;
            std::fs::write(&ckpt, json).map_err(|e| Error::io(ckpt.display().to_string(), e))?;
            println!("fit extended_btom priors from {} train episodes", dataset.train().count());
        }
        "gru" | "lstm" => {
            let kind = if model_name == "gru" { RnnKind::Gru } else { RnnKind::Lstm };
            let (model, trace) = train_rnn(&dataset, &g, kind, cfg.rnn.clone())?;
            let json = serde_json::to_string(&model)?;
            std::fs::write(&ckpt, json).map_err(|e| Error::io(ckpt.display().to_string(), e))?;
            let rows: Vec<String> = trace
                .iter()
                .enumerate()
                .map(|(e, l)| format!("{e},{l}"))
                .collect();
            write_trace_csv(&cfg.trace_file(model_name), "epoch,loss", &rows)?;
            println!("trained {model_name}: {} epochs, final loss {:.4}", trace.len(), trace.last().unwrap());
        }
        "tomnet" => {
            let (model, trace) = train_tomnet(&dataset, &g, cfg.tomnet.clone())?;
            let json = serde_json::to_string(&model)?;
            std::fs::write(&ckpt, json).map_err(|e| Error::io(ckpt.display().to_string(), e))?;
            let rows: Vec<String> = trace
                .iter()
                .enumerate()
                .map(|(e, l)| format!("{e},{l}"))
                .collect();
            write_trace_csv(&cfg.trace_file(model_name), "epoch,loss", &rows)?;
            println!("trained tomnet: {} epochs, final loss {:.4}", trace.len(), trace.last().unwrap());
        }
        "hivae" => {
            let (model, trace) = model::train(&dataset, &g, cfg.hivae.clone())?;
            model.save(&ckpt)?;
            let rows: Vec<String> = trace
                .iter()
                .map(|s| format!("{},{},{},{},{}", s.epoch, s.total, s.goal_ce, s.kl_sum, s.recon_sum))
                .collect();
            write_trace_csv(&cfg.trace_file(model_name), "epoch,total,goal_ce,kl,recon", &rows)?;
            println!(
                "trained hivae: {} epochs, final total loss {:.4}",
                trace.len(),
                trace.last().unwrap().total
            );
        }
        _ => unreachable!("registry is checked above"),
    }
    Ok(())
}

/// Checkpoint-backed model usable through the common inference interface.
pub enum AnyModel {
    BTom(BTomModel),
    Extended(ExtendedBTomModel),
    Rnn(RnnModel),
    ToMNet(ToMNetModel),
    HiVae(HiVaeModel),
}

impl GoalInferenceModel for AnyModel {
    fn infer_goal(
        &self,
        g: &SpatialGraph,
        path: &[crate::graph::NodeId],
        agent_id: Option<usize>,
    ) -> Result<Vec<f64>> {
        match self {
            AnyModel::BTom(m) => m.infer_goal(g, path, agent_id),
            AnyModel::Extended(m) => m.infer_goal(g, path, agent_id),
            AnyModel::Rnn(m) => m.infer_goal(g, path, agent_id),
            AnyModel::ToMNet(m) => m.infer_goal(g, path, agent_id),
            AnyModel::HiVae(m) => m.infer_goal(g, path, agent_id),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            AnyModel::BTom(m) => m.name(),
            AnyModel::Extended(m) => m.name(),
            AnyModel::Rnn(m) => m.name(),
            AnyModel::ToMNet(m) => m.name(),
            AnyModel::HiVae(m) => m.name(),
        }
    }
}

pub fn load_model(cfg: &RunConfig, name: &str, g: &SpatialGraph) -> Result<AnyModel> {
    let path = cfg.checkpoint_file(name);
    let text = std::fs::read_to_string(&path).map_err(|_| {
        Error::MissingCheckpoint(name.to_string(), path.display().to_string())
    })?;
    Ok(match name {
        "btom" => AnyModel::BTom(serde_json::from_str(&text)?),
        "extended_btom" => AnyModel::Extended(serde_json::from_str(&text)?),
        "gru" | "lstm" => AnyModel::Rnn(serde_json::from_str(&text)?),
        "tomnet" => AnyModel::ToMNet(serde_json::from_str(&text)?),
        "hivae" => AnyModel::HiVae(HiVaeModel::load(&path, g)?),
        other => return Err(Error::UnknownModel(other.to_string())),
    })
}

/// Runs `f` over `items` on up to `threads` workers; the output order matches
/// the input order regardless of thread count.
pub fn parallel_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, R)>();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            let tx = tx.clone();
            let next = &next;
            let f = &f;
            scope.spawn(move || loop {
                let ix = next.fetch_add(1, Ordering::SeqCst);
                if ix >= items.len() {
                    break;
                }
                let r = f(&items[ix]);
                if tx.send((ix, r)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
        for (ix, r) in rx {
            slots[ix] = Some(r);
        }
        slots.into_iter().map(|s| s.expect("worker produced every slot")).collect()
    })
}

/// Seed for the drifted dataset, derived from the master seed.
fn drift_seed(master_seed: u64) -> u64 {
    rng::stream(master_seed, "cli/drift-dataset", &[]).gen()
}

fn synthesize_false_goal_set(
    g: &SpatialGraph,
    profiles: &[AgentProfile],
    radius_factor: f64,
) -> Result<Vec<(Episode, FalseGoalMeta)>> {
    let radius = radius_factor * g.mean_edge_length();
    let mut out = Vec::new();
    for profile in profiles {
        match synthesize_false_goal_episode(g, profile, radius) {
            Ok(pair) => out.push(pair),
            Err(e) => {
                // one episode per agent is the target, but a profile whose
                // extreme goals are adjacent may not admit a plausible detour
                eprintln!("note: skipping agent {}: {e}", profile.agent_id);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Data("no agent admitted a false-goal episode".into()));
    }
    Ok(out)
}

pub fn cmd_eval(cfg: &RunConfig, experiment: Experiment, threads: usize) -> Result<()> {
    let (g, dataset, profiles) = load_artifacts(cfg)?;
    let models: Vec<(String, AnyModel)> = cfg
        .models
        .iter()
        .map(|name| Ok((name.clone(), load_model(cfg, name, &g)?)))
        .collect::<Result<_>>()?;
    let test_eps: Vec<&Episode> = dataset.test().collect();
    let metadata = ReportMetadata {
        graph_hash: g.content_hash(),
        master_seed: cfg.master_seed,
        num_goals: g.goal_set().len(),
        test_episodes: test_eps.len(),
    };
    let mut report = EvalReport::new(metadata);

    if matches!(experiment, Experiment::Brier | Experiment::All) {
        let curves: Vec<Result<BrierCurve>> = parallel_map(&models, threads, |(_, m)| {
            evaluate_brier_curve(m, &g, &test_eps, &cfg.fractions)
        });
        for c in curves {
            report.brier_curves.push(c?);
        }
        attach_wilcoxon(&mut report);
        print_brier_table(&report);
    }

    if matches!(experiment, Experiment::FalseGoal | Experiment::All) {
        let episodes = synthesize_false_goal_set(&g, &profiles, cfg.false_goal_radius_factor)?;
        let curves = parallel_map(&models, threads, |(_, m)| {
            false_goal_curve(m, &g, &episodes, FALSE_GOAL_INTERVALS)
        });
        for c in curves {
            let c = c?;
            if c.deduplicated {
                eprintln!("note: {} false-goal checkpoints were deduplicated (early pass point)", c.model);
            }
            report.false_goal_curves.push(c);
        }
        println!("false-goal curves over {} episodes", episodes.len());
    }

    if matches!(experiment, Experiment::Drift | Experiment::All) {
        let drifted_profiles = generate_drifted_profiles(
            &profiles,
            cfg.drift_kl_threshold,
            cfg.sim.dirichlet_alpha,
            cfg.master_seed,
            cfg.drift_max_attempts,
        )?;
        // the generator guarantees the threshold; re-check it explicitly so a
        // stale profiles file cannot slip through
        for (orig, new) in profiles.iter().zip(&drifted_profiles) {
            let kl = kl_divergence(&orig.preferences, &new.preferences)?;
            if kl <= cfg.drift_kl_threshold {
                return Err(Error::Data(format!(
                    "drifted profile for agent {} has KL {kl:.4} <= {}",
                    orig.agent_id, cfg.drift_kl_threshold
                )));
            }
        }
        let drifted_dataset =
            generate_dataset(&g, &drifted_profiles, &cfg.sim, drift_seed(cfg.master_seed))?;
        let deltas = parallel_map(&models, threads, |(_, m)| {
            drift_evaluation(m, &g, &dataset, &drifted_dataset, &cfg.fractions)
        });
        for d in deltas {
            report.drift_deltas.push(d?);
        }
        println!("drift deltas over {} drifted agents", drifted_profiles.len());
    }

    emit_report(&report, cfg.report_dir())?;
    println!("report written to {}", cfg.report_dir().display());
    Ok(())
}

/// Wilcoxon signed-rank between the hierarchical model and the next-best
/// model (lowest mean Brier at the final fraction among the others), over
/// per-episode Briers at that fraction.
fn attach_wilcoxon(report: &mut EvalReport) {
    let Some(hivae) = report.brier_curves.iter().find(|c| c.model == "hivae") else {
        return;
    };
    let last = hivae.fractions.len() - 1;
    let rival = report
        .brier_curves
        .iter()
        .filter(|c| c.model != "hivae")
        .min_by(|a, b| a.means[last].total_cmp(&b.means[last]));
    let Some(rival) = rival else { return };
    match wilcoxon_signed_rank(&hivae.per_episode[last], &rival.per_episode[last]) {
        Ok(w) => {
            println!(
                "wilcoxon hivae vs {}: W = {}, z = {:.3}, p = {:.6} (n = {})",
                rival.model, w.w, w.z_approx, w.p_two_sided, w.n_effective
            );
            report.wilcoxon = Some(w);
        }
        Err(e) => eprintln!("note: wilcoxon skipped: {e}"),
    }
}

fn print_brier_table(report: &EvalReport) {
    if report.brier_curves.is_empty() {
        return;
    }
    let header: Vec<String> = report.brier_curves[0]
        .fractions
        .iter()
        .map(|f| format!("f{}", (f * 100.0).round() as u32))
        .collect();
    println!("{:<16}{}", "model", header.join("      "));
    for c in &report.brier_curves {
        let cells: Vec<String> = c.means.iter().map(|m| format!("{m:.4}")).collect();
        println!("{:<16}{}", c.model, cells.join("   "));
    }
}

pub fn cmd_report(cfg: &RunConfig) -> Result<()> {
    let path = cfg.report_dir().join("report.json");
    let report = eval::load_report(&path)?;
    emit_report(&report, cfg.report_dir())?;
    print_brier_table(&report);
    println!("re-rendered CSV tables in {}", cfg.report_dir().display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(dir: &Path) -> RunConfig {
        let mut cfg = RunConfig {
            out_dir: dir.to_path_buf(),
            master_seed: 11,
            generator: GeneratorSpec {
                grid_width: 4,
                grid_height: 3,
                diagonal_probability: 0.0,
                jitter: 0.0,
                num_goals: 3,
                seed: 0,
            },
            sim: SimParams { num_agents: 2, episodes_per_agent: 12, ..Default::default() },
            models: vec!["btom".into(), "extended_btom".into()],
            ..Default::default()
        };
        cfg.propagate_seed();
        cfg
    }

    #[test]
    fn unknown_model_rejected_at_validation() {
        let mut cfg = RunConfig::default();
        cfg.models.push("mystery".into());
        assert!(matches!(cfg.validate(), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn zero_agents_rejected() {
        let mut cfg = RunConfig::default();
        cfg.sim.num_agents = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn config_file_round_trip_with_flag_override() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("config.json");
        let cfg = tiny_config(dir.path());
        std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
        let cli = Cli::try_parse_from([
            "hivae",
            "--config",
            cfg_path.to_str().unwrap(),
            "--seed",
            "99",
            "simulate",
        ])
        .unwrap();
        let resolved = resolve_config(&cli).unwrap();
        assert_eq!(resolved.master_seed, 99, "flag overrides file");
        assert_eq!(resolved.generator.seed, 99, "seed propagates");
        assert_eq!(resolved.sim.num_agents, 2, "file overrides default");
    }

    #[test]
    fn malformed_config_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("config.json");
        std::fs::write(&cfg_path, "{\"no_such_field\": 1}").unwrap();
        assert!(matches!(RunConfig::load(&cfg_path), Err(Error::Config(_))));
    }

    #[test]
    fn simulate_is_deterministic_per_config() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        cmd_simulate(&tiny_config(dir1.path())).unwrap();
        cmd_simulate(&tiny_config(dir2.path())).unwrap();
        for file in ["graph.json", "dataset.jsonl", "dataset.header.json", "profiles.json"] {
            let a = std::fs::read(dir1.path().join(file)).unwrap();
            let b = std::fs::read(dir2.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between identical runs");
        }
    }

    #[test]
    fn train_requires_simulated_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        assert!(cmd_train(&cfg, "btom").is_err());
    }

    #[test]
    fn eval_reports_missing_checkpoint_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        cmd_simulate(&cfg).unwrap();
        let err = cmd_eval(&cfg, Experiment::Brier, 1).unwrap_err();
        match err {
            Error::MissingCheckpoint(name, _) => assert_eq!(name, "btom"),
            other => panic!("expected MissingCheckpoint, got {other:?}"),
        }
    }

    #[test]
    fn btom_pipeline_end_to_end_with_thread_invariance() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        cmd_simulate(&cfg).unwrap();
        cmd_train(&cfg, "btom").unwrap();
        cmd_train(&cfg, "extended_btom").unwrap();
        cmd_eval(&cfg, Experiment::All, 1).unwrap();
        let single = std::fs::read_to_string(cfg.report_dir().join("report.json")).unwrap();
        cmd_eval(&cfg, Experiment::All, 4).unwrap();
        let multi = std::fs::read_to_string(cfg.report_dir().join("report.json")).unwrap();
        assert_eq!(single, multi, "thread count changed the report");
        // CSV has one row per configured model
        let brier_csv = std::fs::read_to_string(cfg.report_dir().join("brier.csv")).unwrap();
        assert_eq!(brier_csv.lines().count(), 1 + cfg.models.len());
    }

    #[test]
    fn report_rerenders_identically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        cmd_simulate(&cfg).unwrap();
        cmd_train(&cfg, "btom").unwrap();
        cmd_train(&cfg, "extended_btom").unwrap();
        cmd_eval(&cfg, Experiment::Brier, 1).unwrap();
        let before = std::fs::read_to_string(cfg.report_dir().join("brier.csv")).unwrap();
        cmd_report(&cfg).unwrap();
        let after = std::fs::read_to_string(cfg.report_dir().join("brier.csv")).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn parallel_map_preserves_order() {
        let items: Vec<usize> = (0..37).collect();
        let a = parallel_map(&items, 1, |&x| x * 2);
        let b = parallel_map(&items, 7, |&x| x * 2);
        assert_eq!(a, b);
        assert_eq!(a[5], 10);
    }
}
