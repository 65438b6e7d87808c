use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use firesmac_core::mdp::{Constituency, ConstituencyWeights};
use firesmac_workbench::api::{router, AppState};
use firesmac_workbench::config::WorkbenchConfig;
use firesmac_workbench::runner::{
    build_db, create_experiment, load_db, run_experiment, run_validation, save_db,
};
use firesmac_workbench::store::ExperimentStore;
use firesmac_workbench::validation::ValidatedPolicy;

#[derive(Parser)]
#[command(name = "firesmac", version, about = "Wildfire suppression policy optimization workbench")]
struct Cli {
    /// Configuration file (TOML). Defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StoreArgs {
    /// Experiment directory.
    #[arg(long, default_value = "experiments")]
    store: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default configuration.
    DefaultConfig,
    /// Build the surrogate trajectory database.
    SeedDb {
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Optimize a policy against the surrogate.
    Optimize {
        #[arg(long)]
        db: PathBuf,
        #[command(flatten)]
        store: StoreArgs,
        /// Preset weights: composite, politics, home_owners or timber.
        #[arg(long, conflicts_with = "weights")]
        constituency: Option<String>,
        /// Custom weights as suppression,timber,ecology,air,recreation.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        weights: Option<Vec<f64>>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate an optimized experiment on the real simulator.
    Validate {
        #[arg(long)]
        db: PathBuf,
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        id: String,
        #[arg(long)]
        n_rollouts: Option<usize>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        db: PathBuf,
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Summarize one experiment, or list all of them.
    Report {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        id: Option<String>,
        /// Print the raw JSON record and validation report.
        #[arg(long)]
        json: bool,
    },
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => WorkbenchConfig::load(path)?,
        None => WorkbenchConfig::default(),
    };
    match cli.command {
        Command::DefaultConfig => print!("{}", WorkbenchConfig::default().to_toml()),
        Command::SeedDb { out } => {
            let start = Instant::now();
            let db = build_db(&config)?;
            save_db(&db, &out)?;
            eprintln!(
                "wrote {} records from {} seed policies to {} in {:.1}s",
                db.len(),
                db.info().n_policies,
                out.display(),
                start.elapsed().as_secs_f64()
            );
        }
        Command::Optimize { db, store, constituency, weights, budget, seed } => {
            let (preset, weights) = match (constituency, weights) {
                (Some(name), None) => {
                    let c: Constituency = name.parse()?;
                    (Some(c), c.weights())
                }
                (None, Some(w)) => {
                    let [s, t, e, a, r] = w[..] else {
                        bail!("--weights takes 5 comma-separated values, got {}", w.len())
                    };
                    (None, ConstituencyWeights::new(s, t, e, a, r)?)
                }
                _ => bail!("give --constituency or --weights"),
            };
            let db = load_db(&db)?;
            let store = ExperimentStore::open(store.store)?;
            let record = create_experiment(
                &store,
                preset,
                weights,
                seed.unwrap_or(config.smac.seed),
                budget.unwrap_or(config.smac.budget),
                &config,
            )?;
            eprintln!("experiment {} running ({} evaluations)", record.id, record.budget);
            let start = Instant::now();
            let record = run_experiment(&store, &record.id, &db, &config)?;
            eprintln!("done in {:.1}s", start.elapsed().as_secs_f64());
            println!("{}", serde_json::to_string_pretty(&record)?);
        }
        Command::Validate { db, store, id, n_rollouts } => {
            let db = load_db(&db)?;
            let store = ExperimentStore::open(store.store)?;
            let n = n_rollouts.unwrap_or(config.validation.n_rollouts);
            let report = run_validation(&store, &id, &db, &config, n)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Serve { db, store, host, port } => {
            let db = load_db(&db)?;
            let store = ExperimentStore::open(store.store)?;
            let recovered = store.recover()?;
            if recovered > 0 {
                eprintln!("marked {recovered} interrupted experiment(s) as failed");
            }
            let state = AppState { store: Arc::new(store), db: Arc::new(db), config: Arc::new(config) };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let addr = format!("{host}:{port}");
                let listener =
                    tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                axum::serve(listener, router(state))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                anyhow::Ok(())
            })?;
        }
        Command::Report { store, id, json } => {
            let store = ExperimentStore::open(store.store)?;
            match id {
                None => {
                    for r in store.list()? {
                        let name =
                            r.constituency.map(|c| c.name().to_string()).unwrap_or_else(|| "custom".into());
                        let value = r
                            .incumbent
                            .as_ref()
                            .map(|i| format!("{:.2}", i.value))
                            .unwrap_or_else(|| "-".into());
                        println!(
                            "{}  {:12} {:?}  {}/{}  {}",
                            r.id, name, r.status, r.evaluations, r.budget, value
                        );
                    }
                }
                Some(id) => {
                    let record = store.load(&id)?;
                    let validation = store.load_validation(&id)?;
                    if json {
                        println!(
                            "{}",
                            serde_json::to_string_pretty(&serde_json::json!({
                                "record": record,
                                "validation": validation,
                            }))?
                        );
                        return Ok(());
                    }
                    println!("experiment   {}", record.id);
                    println!("weights      {:?}", record.weights.as_array());
                    println!(
                        "status       {:?} ({} / {} evaluations)",
                        record.status, record.evaluations, record.budget
                    );
                    if let Some(inc) = &record.incumbent {
                        println!("incumbent    {:.3}", inc.value);
                        println!("theta        {:?}", inc.theta.theta());
                    }
                    if let Some(v) = validation {
                        println!(
                            "validation   {} rollouts, incumbent suppresses {:.1}% of ignitions",
                            v.n_rollouts,
                            100.0 * v.suppression_fraction
                        );
                        for p in &v.policies {
                            let name = match p.policy {
                                ValidatedPolicy::Incumbent => "incumbent",
                                ValidatedPolicy::SuppressAll => "suppress-all",
                                ValidatedPolicy::LetBurnAll => "let-burn-all",
                            };
                            println!(
                                "  {name:13} q1 {:10.2}  median {:10.2}  q3 {:10.2}  surrogate {:10.2}",
                                p.quartiles.q1, p.quartiles.median, p.quartiles.q3, p.surrogate_estimate
                            );
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
