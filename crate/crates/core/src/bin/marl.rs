use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use marl_core::env::{write_jsonl, EnvConfig, EnvKind};
use marl_core::harness::{
    encode_checkpoint, evaluate, load_checkpoint, save_checkpoint, tournament, EpisodeMetrics, EvalReport, Method,
    Team, Trainer, TrainerConfig, METRICS_HEADER,
};
use marl_core::{Error, Result};

#[derive(Parser)]
#[command(name = "marl", version, about = "Multi-agent actor-critic training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one method and write metrics and checkpoints.
    Train(TrainArgs),
    /// Evaluate one checkpoint (self-play in mixed environments).
    Evaluate(EvalArgs),
    /// Round-robin cross-play between checkpoints with role swapping.
    Crossplay(CrossArgs),
    /// Print the default configuration or describe a checkpoint.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Resume from a resumable checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Write a resumable checkpoint every N episodes.
    #[arg(long)]
    save_every: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-step trajectory records.
    #[arg(long)]
    dump_trajectories: bool,
}

#[derive(Args)]
struct CrossArgs {
    /// Two or more checkpoints; each becomes one team.
    #[arg(long = "checkpoint", required = true, num_args = 1..)]
    checkpoints: Vec<PathBuf>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    defaults: bool,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn resolve_config(args: &TrainArgs) -> Result<TrainerConfig> {
    let mut config = match &args.config {
        Some(path) => TrainerConfig::from_file(path)?,
        None => TrainerConfig::default(),
    };
    if let Some(env) = &args.env {
        let kind: EnvKind = env.parse()?;
        if kind != config.env.kind {
            config.env = EnvConfig::for_kind(kind);
            config.scenarios = None;
        }
    }
    if let Some(m) = &args.method {
        config.method = m.parse::<Method>()?;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(e) = args.episodes {
        config.episodes = e;
    }
    if let Some(o) = &args.out {
        config.out_dir = Some(o.clone());
    }
    config.validate()?;
    Ok(config)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn train(args: TrainArgs) -> Result<()> {
    let mut trainer = match &args.checkpoint {
        Some(path) => {
            let t = load_checkpoint(path)?.into_trainer()?;
            if let Some(e) = args.episodes {
                let mut t = t;
                t.model.config.episodes = e;
                t.model.config.validate()?;
                t
            } else {
                t
            }
        }
        None => Trainer::new(&resolve_config(&args)?)?,
    };
    let out = args.out.clone().or_else(|| trainer.config().out_dir.clone()).unwrap_or_else(|| PathBuf::from("runs"));
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("config.toml"), trainer.config().to_toml_string())?;
    let resumed = args.checkpoint.is_some();
    let mut csv = BufWriter::new(
        std::fs::OpenOptions::new().create(true).append(resumed).write(true).truncate(!resumed).open(out.join("metrics.csv"))?,
    );
    let mut jsonl = BufWriter::new(
        std::fs::OpenOptions::new().create(true).append(resumed).write(true).truncate(!resumed).open(out.join("metrics.jsonl"))?,
    );
    if !resumed {
        writeln!(csv, "{METRICS_HEADER}")?;
    }
    let total = trainer.config().episodes;
    let chunk = args.save_every.unwrap_or(total.max(1));
    let report_every = (total / 20).max(1);
    while !trainer.is_finished() {
        let until = (trainer.episode() / chunk + 1) * chunk;
        trainer.run_until(until, |rows: &[EpisodeMetrics]| {
            for r in rows {
                writeln!(csv, "{}", r.csv_row())?;
            }
            write_jsonl(&mut jsonl, rows)?;
            let ep = rows[0].episode + 1;
            if ep % report_every == 0 {
                let team: f64 = rows.iter().map(|r| r.ret).sum::<f64>() / rows.len() as f64;
                eprintln!("episode {ep}/{total}  mean reward {team:.3}");
            }
            Ok(())
        })?;
        csv.flush()?;
        jsonl.flush()?;
        save_checkpoint(&out.join("resume.ckpt"), &trainer.checkpoint())?;
    }
    save_checkpoint(&out.join("final.ckpt"), &encode_checkpoint(&trainer.model, None))?;
    println!("trained {} on {} for {} episodes -> {}", trainer.config().method, trainer.config().env.kind, total, out.display());
    Ok(())
}

fn print_report(report: &EvalReport) {
    for r in &report.records {
        let scenario = r.scenario.map_or("all".to_string(), |c| c.to_string());
        let adv = r.adversaries.as_deref().unwrap_or("-");
        let adv_stats = r.adversary.as_ref().map_or(String::new(), |s| format!("  adversary {:.4} ± {:.4}", s.mean, s.stderr));
        println!(
            "{:>14} vs {:<14} scenario {:>3}  n={:<6} cooperator {:.4} ± {:.4}{}",
            r.cooperators, adv, scenario, r.episodes, r.cooperator.mean, r.cooperator.stderr, adv_stats
        );
    }
    for s in &report.scores {
        println!("score {:>14}: cooperator {:.4} (normalized {:.3})", s.team, s.cooperator_mean, s.cooperator_normalized);
    }
}

fn write_report(out: &Path, report: &EvalReport) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let text = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    std::fs::write(out.join("report.json"), text)?;
    Ok(())
}

fn evaluate_cmd(args: EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let episodes = args.episodes.unwrap_or(ckpt.model.config.eval_episodes);
    let record = args.out.is_some();
    let (report, eps) = evaluate(&ckpt.model, episodes, args.seed, record)?;
    print_report(&report);
    if let Some(out) = &args.out {
        write_report(out, &report)?;
        let preds: Vec<_> = eps.iter().flat_map(|e| e.predictions.iter().cloned()).collect();
        write_jsonl(create(&out.join("predictions.jsonl"))?, &preds)?;
        if args.dump_trajectories {
            let traj: Vec<_> = eps.iter().flat_map(|e| e.trajectory.iter().cloned()).collect();
            write_jsonl(create(&out.join("trajectories.jsonl"))?, &traj)?;
        }
    }
    Ok(())
}

fn crossplay_cmd(args: CrossArgs) -> Result<()> {
    if args.checkpoints.len() < 2 {
        return Err(Error::Config("crossplay needs at least two checkpoints".into()));
    }
    let mut teams = Vec::new();
    let mut episodes = args.episodes;
    for (k, path) in args.checkpoints.iter().enumerate() {
        let model = load_checkpoint(path)?.model;
        episodes.get_or_insert(model.config.eval_episodes);
        teams.push(Team::from_model(format!("{}#{k}", model.method()), &model)?);
    }
    if teams.iter().any(|t| t.env != teams[0].env || t.catalog != teams[0].catalog) {
        return Err(Error::Config("checkpoints were trained on different environments".into()));
    }
    let report = tournament(&teams, episodes.unwrap_or(1000), args.seed)?;
    print_report(&report);
    if let Some(out) = &args.out {
        write_report(out, &report)?;
    }
    Ok(())
}

fn inspect(args: InspectArgs) -> Result<()> {
    if let Some(path) = &args.checkpoint {
        let ckpt = load_checkpoint(path)?;
        let m = &ckpt.model;
        println!("method      {}", m.method());
        println!("environment {}", m.config.env.kind);
        println!("episodes    {} of {}", m.episode, m.config.episodes);
        println!("policies    {} per agent, {} agents", m.learners.len(), m.num_agents());
        println!("predictors  {}", m.predictors.len());
        println!("resumable   {}", ckpt.state.is_some());
        return Ok(());
    }
    let mut config = match &args.config {
        Some(path) => TrainerConfig::from_file(path)?,
        None => TrainerConfig::default(),
    };
    if let Some(env) = &args.env {
        config.env = EnvConfig::for_kind(env.parse()?);
    }
    if args.defaults || args.config.is_some() {
        config.scenarios = Some(config.catalog());
        print!("{}", config.to_toml_string());
        return Ok(());
    }
    Err(Error::Config("inspect needs --defaults, --config or --checkpoint".into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Crossplay(a) => crossplay_cmd(a),
        Command::Inspect(a) => inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
