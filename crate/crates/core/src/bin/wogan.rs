//! Command-line front end for replicated WOGAN campaigns.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wogan::campaign::{self, CampaignError, ExperimentConfig, RankRow, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "wogan", version, about = "Train and evaluate WOGAN test generators")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated campaign from a TOML configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the configuration.
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Quantile and diversity scores of a finished campaign.
    Evaluate { dir: PathBuf },
    /// Tournament ranking of evaluated campaigns.
    Rank {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Robustness histogram and falsification metrics of a campaign.
    Report { dir: PathBuf },
}

fn execute(command: Command) -> Result<String, CampaignError> {
    match command {
        Command::Run { config, replicas, seed, output_dir } => {
            let mut c = ExperimentConfig::load(&config)?;
            if let Some(n) = replicas {
                c.replicas = n;
            }
            if let Some(s) = seed {
                c.seed = s;
            }
            let c = c.resolve(output_dir)?;
            let outcome = campaign::run_campaign(&c)?;
            let failed = outcome.failed();
            if failed > 0 {
                return Err(CampaignError::ReplicasFailed(failed, outcome.replicas.len()));
            }
            Ok(format!("{} replicas written to {}", outcome.replicas.len(), c.output_dir().display()))
        }
        Command::Evaluate { dir } => {
            let s = campaign::evaluate(&dir)?;
            Ok(format!(
                "{}: Q_L {:.4} ({:.4})  Q_U {:.4} ({:.4})  D {:.4}  loss {:.3} {}  over {} replicas",
                s.name,
                s.scores.q_l,
                s.scores.s_l,
                s.scores.q_u,
                s.scores.s_u,
                s.scores.diversity,
                s.diversity_loss.ratio,
                s.diversity_loss.category.as_str(),
                s.scores.n
            ))
        }
        Command::Rank { dirs, csv } => {
            let rows = campaign::rank(&dirs)?;
            if let Some(path) = csv {
                std::fs::write(&path, RankRow::csv(&rows)?).map_err(|e| CampaignError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
            }
            Ok(RankRow::table(&rows).trim_end().to_string())
        }
        Command::Report { dir } => {
            let r = campaign::report(&dir)?;
            let f = r.falsification;
            Ok(format!(
                "{}: FR {:.2}  D_F {:.2} ({:.2})  normalized {:.3} ({:.3})  over {} replicas",
                r.name, f.rate, f.diversity, f.diversity_std, f.normalized, f.normalized_std, f.n
            ))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .init();
    match execute(cli.command) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(match e {
                CampaignError::Config(_) => 2,
                _ => 1,
            })
        }
    }
}
