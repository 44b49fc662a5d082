//! `qpb` command line: schema/log generation, belief computation, session
//! scoring, distribution distances and the canned experiments.
//!
//! Exit codes: 0 on success, 1 on validation errors, 2 on usage errors.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qpb::eval::{write_results, ExperimentOutput};
use qpb::{
    alpha_sweep, build_log_graph, build_schema_graph, check_connectivity, compute_belief,
    generate_log, generate_schema, pagerank, reco_impact, si_profiles, AlphaSweepParams,
    BeliefVector, CubeSchema, Error, Log, PageRankConfig, QueryPartGraph, RecoImpactParams,
    Result, Scenario, SchemaSpec, Template, TemplateParams,
};

use config::RawConfig;

#[derive(Parser)]
#[command(
    name = "qpb",
    version,
    about = "Belief and subjective interestingness over cube query parts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a cube schema (a preset or a spec file) and write it as JSON.
    GenSchema {
        /// Named preset; `ssb-like` is the only one.
        #[arg(long, conflicts_with = "spec")]
        preset: Option<String>,
        /// JSON file with {"hierarchies", "depth": [lo, hi], "branching": [lo, hi], "measures"}.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic exploration log over a schema.
    GenLog {
        #[arg(long)]
        schema: PathBuf,
        /// One template for all sessions (with --sessions).
        #[arg(long, conflicts_with = "mix")]
        template: Option<String>,
        /// Template mix, e.g. `slice_all=20,explorative=10`.
        #[arg(long)]
        mix: Option<String>,
        /// Session count when --template is used.
        #[arg(long)]
        sessions: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute a belief vector from a schema and a log, optionally blended
    /// with a user log, and write it as CSV.
    Belief {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long, requires = "alpha")]
        user_log: Option<PathBuf>,
        /// Blend weight in [0, 1) for the user log.
        #[arg(long, requires = "user_log")]
        alpha: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score one session of a log with the incremental interestingness
    /// evaluation and write the scores as CSV.
    Si {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        session_id: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hellinger distance between two belief CSV dumps.
    Hellinger {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Run a canned experiment and write its results directory.
    Experiment {
        #[arg(value_parser = ["alpha-sweep", "si-profiles", "reco-impact"])]
        name: String,
        /// `key = value` config file; flags override file values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base results directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Worker threads (default: number of processors). The results do
        /// not depend on this.
        #[arg(long)]
        jobs: Option<usize>,
        /// Results subdirectory name; defaults to the current UTC time.
        #[arg(long)]
        stamp: Option<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter("QPB_LOG_LEVEL")
            .default_filter_or("error"),
    )
    .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenSchema {
            preset,
            spec,
            seed,
            out,
        } => cmd_gen_schema(preset.as_deref(), spec.as_deref(), seed, &out),
        Command::GenLog {
            schema,
            template,
            mix,
            sessions,
            seed,
            out,
        } => cmd_gen_log(&schema, template.as_deref(), mix.as_deref(), sessions, seed, &out),
        Command::Belief {
            schema,
            log,
            user_log,
            alpha,
            out,
        } => cmd_belief(&schema, &log, user_log.as_deref(), alpha, &out),
        Command::Si {
            schema,
            log,
            session_id,
            alpha,
            out,
        } => cmd_si(&schema, &log, &session_id, alpha, &out),
        Command::Hellinger { a, b } => cmd_hellinger(&a, &b),
        Command::Experiment {
            name,
            config,
            out,
            seed,
            alpha,
            jobs,
            stamp,
        } => cmd_experiment(&name, config.as_deref(), &out, seed, alpha, jobs, stamp),
    }
}

fn cmd_gen_schema(
    preset: Option<&str>,
    spec: Option<&Path>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let spec = match (preset, spec) {
        (None, Some(path)) => {
            serde_json::from_str::<SchemaSpec>(&std::fs::read_to_string(path)?)?
        }
        (Some("ssb-like"), None) | (None, None) => SchemaSpec::ssb_like(),
        (Some(other), None) => {
            return Err(Error::InvalidParameter(format!("unknown preset {other}")))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    let schema = generate_schema(&spec, seed)?;
    schema.write_to_path(out)?;
    log::info!(
        "schema with {} hierarchies / {} parts written to {}",
        schema.hierarchies.len(),
        schema.enumerate_query_parts().len(),
        out.display()
    );
    Ok(())
}

fn parse_mix(text: &str) -> Result<Vec<(TemplateParams, usize)>> {
    text.split(',')
        .map(|entry| {
            let (label, count) = entry.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("mix entry `{entry}` is not template=count"))
            })?;
            let template = Template::from_label(label.trim())?;
            let count: usize = count.trim().parse().map_err(|_| {
                Error::InvalidParameter(format!("mix entry `{entry}`: bad count"))
            })?;
            Ok((TemplateParams::new(template, 0), count))
        })
        .collect()
}

fn cmd_gen_log(
    schema: &Path,
    template: Option<&str>,
    mix: Option<&str>,
    sessions: Option<usize>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let schema = CubeSchema::from_path(schema)?;
    let mix = match (template, mix) {
        (Some(label), None) => {
            let count = sessions.ok_or_else(|| {
                Error::InvalidParameter("--template needs --sessions".into())
            })?;
            vec![(TemplateParams::new(Template::from_label(label)?, 0), count)]
        }
        (None, Some(spec)) => parse_mix(spec)?,
        _ => {
            return Err(Error::InvalidParameter(
                "give exactly one of --template or --mix".into(),
            ))
        }
    };
    let log = generate_log(&schema, &mix, seed)?;
    log.write_to_path(out)?;
    log::info!(
        "{} sessions / {} queries written to {}",
        log.sessions.len(),
        log.query_count(),
        out.display()
    );
    Ok(())
}

fn topology_graph(schema: &CubeSchema, log: &Log) -> Result<QueryPartGraph> {
    let graph = build_log_graph(log, &build_schema_graph(schema))?;
    let report = check_connectivity(&graph);
    if !report.strongly_connected {
        return Err(Error::NotStronglyConnected {
            components: report.component_count,
            unreached_measures: report.unreached_measures.into_iter().collect(),
        });
    }
    Ok(graph)
}

fn cmd_belief(
    schema: &Path,
    log: &Path,
    user_log: Option<&Path>,
    alpha: Option<f64>,
    out: &Path,
) -> Result<()> {
    let schema = CubeSchema::from_path(schema)?;
    let log = Log::from_path(log, &schema)?;
    let topology = topology_graph(&schema, &log)?;
    let config = PageRankConfig::default();
    let belief = match user_log {
        Some(path) => {
            let user = Log::from_path(path, &schema)?;
            let user_graph = build_log_graph(&user, &QueryPartGraph::new())?;
            compute_belief(&topology, &user_graph, alpha.expect("clap ties alpha to user-log"), &config)?
        }
        None => pagerank(&topology, &config)?,
    };
    belief.write_csv(out)?;
    log::info!(
        "belief over {} parts converged in {} iterations (residual {:e})",
        belief.len(),
        belief.iteration_count,
        belief.residual
    );
    Ok(())
}

fn cmd_si(schema: &Path, log: &Path, session_id: &str, alpha: f64, out: &Path) -> Result<()> {
    let schema = CubeSchema::from_path(schema)?;
    let log = Log::from_path(log, &schema)?;
    let session = log
        .session(session_id)
        .ok_or_else(|| Error::Log(format!("no session with id {session_id}")))?;
    // reuse the connectivity diagnostics before any output is created
    let _ = topology_graph(&schema, &log)?;
    let scores =
        qpb::evaluate_session(session, &log, &schema, alpha, &PageRankConfig::default())?;
    qpb::interest::write_scores_csv(&scores, out)?;
    log::info!("{} scores written to {}", scores.len(), out.display());
    Ok(())
}

fn cmd_hellinger(a: &Path, b: &Path) -> Result<()> {
    let a = BeliefVector::read_csv(a)?;
    let b = BeliefVector::read_csv(b)?;
    let d = qpb::hellinger(&a, &b)?;
    println!("{d:.12}");
    Ok(())
}

fn cmd_experiment(
    name: &str,
    config: Option<&Path>,
    out: &Path,
    seed_flag: Option<u64>,
    alpha_flag: Option<f64>,
    jobs: Option<usize>,
    stamp: Option<String>,
) -> Result<()> {
    if let Some(jobs) = jobs {
        // build_global fails if a pool already exists; that is fine in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let cfg = RawConfig::from_path(config)?;
    let seed = seed_flag.unwrap_or(cfg.get_u64("seed", 42)?);
    let pagerank_config = PageRankConfig {
        tolerance: cfg.get_f64("pagerank_tolerance", 1e-10)?,
        max_iterations: cfg.get_usize("pagerank_max_iterations", 10_000)?,
    };
    let (schema, schema_source) = match cfg.get_str("schema") {
        Some(path) => (CubeSchema::from_path(path)?, path.to_string()),
        None => {
            let schema_seed = cfg.get_u64("schema_seed", seed)?;
            (
                generate_schema(&SchemaSpec::ssb_like(), schema_seed)?,
                format!("generated:ssb-like:seed={schema_seed}"),
            )
        }
    };
    let stamp = stamp.unwrap_or_else(|| {
        chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string()
    });

    let output = match name {
        "alpha-sweep" => {
            cfg.warn_unknown(&[
                "seed",
                "schema",
                "schema_seed",
                "runs",
                "alphas",
                "topology_sessions",
                "user_sessions",
                "pagerank_tolerance",
                "pagerank_max_iterations",
            ]);
            let params = AlphaSweepParams {
                topology_sessions: cfg.get_usize("topology_sessions", 43)?,
                user_sessions: cfg.get_usize("user_sessions", 7)?,
                user_templates: Template::ALL.to_vec(),
                alphas: cfg.get_f64_list(
                    "alphas",
                    &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
                )?,
                runs: cfg.get_usize("runs", 20)?,
            };
            let table = alpha_sweep(&schema, &params, seed, &pagerank_config)?;
            ExperimentOutput {
                experiment: "alpha-sweep".into(),
                table_csv: Some(table.to_csv()),
                series: Vec::new(),
                meta: serde_json::json!({
                    "experiment": "alpha-sweep",
                    "version": env!("CARGO_PKG_VERSION"),
                    "seed": seed,
                    "schema": schema_source,
                    "runs": params.runs,
                    "alphas": params.alphas,
                    "topology_sessions": params.topology_sessions,
                    "user_sessions": params.user_sessions,
                    "topology_mix": "even over the four templates",
                    "pagerank": {
                        "tolerance": pagerank_config.tolerance,
                        "max_iterations": pagerank_config.max_iterations,
                    },
                    "table": "rows = user template, cols = alpha, cells = mean/sd Hellinger distance to the topology belief",
                }),
            }
        }
        "si-profiles" => {
            cfg.warn_unknown(&[
                "seed",
                "schema",
                "schema_seed",
                "sessions_per_template",
                "alpha",
                "pagerank_tolerance",
                "pagerank_max_iterations",
            ]);
            let sessions = cfg.get_usize("sessions_per_template", 50)?;
            let alpha = alpha_flag.unwrap_or(cfg.get_f64("alpha", 0.9)?);
            let profiles = si_profiles(&schema, sessions, alpha, seed, &pagerank_config)?;
            let mut table = String::from("template,mean_si,mean_final_unique_parts\n");
            let mut series = Vec::new();
            for p in &profiles {
                table.push_str(&format!(
                    "{},{},{}\n",
                    p.template.label(),
                    fmt9(p.mean_si),
                    fmt9(p.mean_final_unique_parts)
                ));
                series.push((p.si.label.clone(), p.si.to_csv()));
                series.push((p.cumulative_parts.label.clone(), p.cumulative_parts.to_csv()));
            }
            ExperimentOutput {
                experiment: "si-profiles".into(),
                table_csv: Some(table),
                series,
                meta: serde_json::json!({
                    "experiment": "si-profiles",
                    "version": env!("CARGO_PKG_VERSION"),
                    "seed": seed,
                    "schema": schema_source,
                    "sessions_per_template": sessions,
                    "alpha": alpha,
                    "pagerank": {
                        "tolerance": pagerank_config.tolerance,
                        "max_iterations": pagerank_config.max_iterations,
                    },
                    "series": "series-si-<template>.csv = mean/sd SI by query position; series-parts-<template>.csv = mean/sd cumulative unique parts",
                    "history": "each session is evaluated with the other same-template sessions as the user's past log",
                }),
            }
        }
        "reco-impact" => {
            cfg.warn_unknown(&[
                "seed",
                "schema",
                "schema_seed",
                "scenario",
                "runs",
                "k",
                "alpha",
                "topology_sessions",
                "user_sessions",
                "training_sessions",
                "pagerank_tolerance",
                "pagerank_max_iterations",
            ]);
            let params = RecoImpactParams {
                runs: cfg.get_usize("runs", 10)?,
                k: cfg.get_usize("k", 5)?,
                alpha: alpha_flag.unwrap_or(cfg.get_f64("alpha", 0.8)?),
                topology_sessions: cfg.get_usize("topology_sessions", 43)?,
                user_sessions: cfg.get_usize("user_sessions", 7)?,
                training_sessions: cfg.get_usize("training_sessions", 10)?,
            };
            let scenarios = match cfg.get_str("scenario").unwrap_or("both") {
                "both" => vec![Scenario::Identical, Scenario::Independent],
                other => vec![Scenario::from_label(other)?],
            };
            let mut table = String::from("scenario,test,reference,mean,sd\n");
            for scenario in &scenarios {
                let result = reco_impact(&schema, *scenario, &params, seed, &pagerank_config)?;
                for (r, row) in result.table.rows.iter().enumerate() {
                    for (c, col) in result.table.cols.iter().enumerate() {
                        table.push_str(&format!(
                            "{},{row},{col},{},{}\n",
                            scenario.label(),
                            fmt9(result.table.mean[r][c]),
                            fmt9(result.table.sd[r][c])
                        ));
                    }
                }
            }
            ExperimentOutput {
                experiment: "reco-impact".into(),
                table_csv: Some(table),
                series: Vec::new(),
                meta: serde_json::json!({
                    "experiment": "reco-impact",
                    "version": env!("CARGO_PKG_VERSION"),
                    "seed": seed,
                    "schema": schema_source,
                    "scenarios": scenarios.iter().map(|s| s.label()).collect::<Vec<_>>(),
                    "runs": params.runs,
                    "k": params.k,
                    "alpha": params.alpha,
                    "topology_sessions": params.topology_sessions,
                    "user_sessions": params.user_sessions,
                    "training_sessions": params.training_sessions,
                    "topology_mix": "even over the four templates",
                    "protocol_notes": [
                        "seed sessions are truncated to their first half (floor)",
                        "identical scenario draws training and seed from the reference log; training count is capped at pool size minus one",
                        "recommended queries form a single-session user log over the same topology",
                    ],
                    "pagerank": {
                        "tolerance": pagerank_config.tolerance,
                        "max_iterations": pagerank_config.max_iterations,
                    },
                    "table": "rows = test (recommendation) template, cols = reference template",
                }),
            }
        }
        _ => unreachable!("clap restricts the experiment name"),
    };
    let dir = write_results(out, &stamp, &output)?;
    println!("results written to {}", dir.display());
    Ok(())
}

fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}
