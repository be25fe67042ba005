use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use idlab_core::experiment::{run_experiment, write_outputs, ExperimentSpec, Scenario};
use idlab_core::seed;
use idlab_core::sim::{load_ground_truth, load_queries};
use idlab_core::theory::connected_frequency;
use idlab_core::train::load_param_tables;
use idlab_core::{
    build_ig, derive_guesses, evaluate, fit, generate_synthetic, identifiability_probability, is_identifiable,
    load_bias_features, load_dataset, plan_intervention, plan_merge, sample_clicks, CostStrategy, GuessModels,
    SimulationConfig, TrainConfig,
};
use serde_json::json;

/// Identifiability checks, repair planning and seeded experiments for click logs.
#[derive(Parser, Debug)]
#[command(name = "ultr-idlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report the connected components of a click log's identifiability graph
    Check {
        dataset: PathBuf,
        /// Print JSON instead of text
        #[arg(long)]
        json: bool,
        /// Print the graph in DOT format
        #[arg(long)]
        dot: bool,
    },
    /// Plan feature swaps that connect every component
    PlanIntervene {
        dataset: PathBuf,
        /// Relevance and observation guesses (`r`/`o` table file)
        #[arg(long)]
        guesses: Option<PathBuf>,
        /// Bias features used to derive guesses from a merged fit
        #[arg(long, conflicts_with = "guesses")]
        bias_features: Option<PathBuf>,
        #[arg(long, default_value = "min")]
        strategy: CostStrategy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Plan bias-factor merges that connect every component
    PlanMerge {
        dataset: PathBuf,
        #[arg(long)]
        bias_features: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic click log with its ground truth
    Simulate {
        /// TOML file with simulation settings; defaults apply to missing keys
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit relevance and observation tables to a click log
    Train {
        dataset: PathBuf,
        #[arg(long, default_value_t = TrainConfig::default().max_steps)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a trained model against ground truth
    Eval(EvalArgs),
    /// Closed-form probability that a random log is identifiable
    EstimateProb {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        x: usize,
        #[arg(long)]
        t: usize,
        /// Also run this many Monte-Carlo trials
        #[arg(long)]
        simulate: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an experiment scenario
    Run {
        #[arg(long, required_unless_present = "list_scenarios")]
        spec: Option<PathBuf>,
        /// Output directory; overrides `output_dir` in the spec
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        list_scenarios: bool,
    },
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Restrict correlation to the features of this log
    #[arg(long)]
    dataset: Option<PathBuf>,
}

fn check(dataset: &Path, as_json: bool, dot: bool) -> Result<()> {
    let d = load_dataset(dataset)?;
    if dot {
        print!("{}", build_ig(&d)?.to_dot(&d));
        return Ok(());
    }
    let (ok, cc) = is_identifiable(&d)?;
    let sizes = cc.sizes_desc();
    if as_json {
        let comps: Vec<Vec<&str>> = (0..cc.count())
            .map(|c| cc.nodes(c).iter().map(|&t| d.bias_name(t)).collect())
            .collect();
        let out = json!({
            "identifiable": ok,
            "components": cc.count(),
            "sizes": sizes,
            "top3": &sizes[..sizes.len().min(3)],
            "nodes": comps,
            "records": d.len(),
            "features": d.feature_count(),
            "bias_factors": d.bias_count(),
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        let top: Vec<String> = sizes.iter().take(3).map(usize::to_string).collect();
        println!("K\t{}", cc.count());
        println!("top3\t{}", top.join("\t"));
        println!("identifiable\t{}", if ok { "yes" } else { "no" });
    }
    Ok(())
}

fn emit(value: serde_json::Value, tsv: String, as_json: bool) -> Result<()> {
    if as_json {
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        print!("{tsv}");
    }
    Ok(())
}

fn simulate(config: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = match config {
        Some(p) => SimulationConfig::load(p)?,
        None => SimulationConfig::default(),
    };
    let (display, gt) = generate_synthetic(&cfg)?;
    let clicked = sample_clicks(&display, &gt, cfg.total_clicks, seed::derive(cfg.seed, &[1]))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    clicked.save(out.join("dataset.tsv"))?;
    gt.bias_features.save(out.join("bias_features.tsv"))?;
    fs::write(out.join("ground_truth.tsv"), gt.tables_tsv())?;
    fs::write(out.join("queries.tsv"), gt.queries_tsv())?;
    let (_, cc) = is_identifiable(&clicked)?;
    log::info!(
        "{} records, {} clicks, {} components",
        clicked.len(),
        clicked.total_clicks(),
        cc.count()
    );
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let model = load_param_tables(&args.model)?;
    let truth = load_ground_truth(&args.truth)?;
    let queries = load_queries(&args.queries)?;
    let restrict = match &args.dataset {
        Some(p) => Some(load_dataset(p)?.features().names().to_vec()),
        None => None,
    };
    let report = evaluate(&model.relevance, &truth.relevance, &queries, restrict.as_deref())?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run(spec: Option<&Path>, out: Option<&Path>, list: bool) -> Result<ExitCode> {
    if list {
        for s in Scenario::ALL {
            println!("{}\t{}", s.name(), s.description());
        }
        return Ok(ExitCode::SUCCESS);
    }
    let path = spec.context("--spec is required")?;
    let spec = ExperimentSpec::load(path)?;
    let Some(dir) = out.map(Path::to_path_buf).or_else(|| spec.output_dir.clone()) else {
        bail!("no output directory: pass --out or set output_dir in the spec");
    };
    let result = run_experiment(&spec)?;
    write_outputs(&spec, &result, &dir)?;
    if result.failures() > 0 {
        eprintln!("{} repeats failed; see {}", result.failures(), dir.join("FAILED").display());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Check { dataset, json, dot } => check(&dataset, json, dot)?,
        Command::PlanIntervene {
            dataset,
            guesses,
            bias_features,
            strategy,
            seed,
            json,
        } => {
            let d = load_dataset(&dataset)?;
            let g = match (guesses, bias_features) {
                (Some(p), _) => GuessModels::from_tables(&d, &load_param_tables(p)?)?,
                (None, Some(p)) => derive_guesses(&d, &load_bias_features(p)?, &TrainConfig { seed, ..Default::default() })?,
                (None, None) => GuessModels::uniform(&d, 0.5)?,
            };
            let plan = plan_intervention(&d, &g, strategy, seed)?;
            emit(serde_json::to_value(&plan)?, plan.to_tsv(), json)?;
        }
        Command::PlanMerge {
            dataset,
            bias_features,
            json,
        } => {
            let d = load_dataset(&dataset)?;
            let plan = plan_merge(&d, &load_bias_features(bias_features)?)?;
            emit(serde_json::to_value(&plan)?, plan.to_tsv(), json)?;
        }
        Command::Simulate { config, out } => simulate(config.as_deref(), &out)?,
        Command::Train {
            dataset,
            steps,
            seed,
            out,
        } => {
            let d = load_dataset(&dataset)?;
            let cfg = TrainConfig {
                max_steps: steps,
                seed,
                ..Default::default()
            };
            let res = fit(&d, &cfg)?;
            log::info!("{} steps, final loss {:.3e}", res.steps, res.final_loss());
            res.params.save(&out)?;
        }
        Command::Eval(args) => eval(&args)?,
        Command::EstimateProb { d, x, t, simulate, seed } => {
            let mut out = BTreeMap::new();
            out.insert("estimate", json!(identifiability_probability(d as f64, x as f64, t as f64)?));
            if let Some(trials) = simulate {
                out.insert("trials", json!(trials));
                out.insert("frequency", json!(connected_frequency(d, x, t, trials, seed)?));
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Run {
            spec,
            out,
            list_scenarios,
        } => return run(spec.as_deref(), out.as_deref(), list_scenarios),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
