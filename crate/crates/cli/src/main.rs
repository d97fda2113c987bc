use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cliffbench::config::{RunConfig, Settings};
use cliffbench::error::{CliError, Result};
use cliffbench::pipeline::{self, Workspace};
use cliffbench::{report, toy};

/// Activity-cliff benchmarking of QSAR models on matched molecular pairs.
#[derive(Parser)]
#[command(name = "cliffbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Working directory holding the stage artifacts.
    #[arg(short, long)]
    out: PathBuf,
    /// TOML run configuration; defaults to the one stored by an earlier stage.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores); overrides the config.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<(Workspace, Option<RunConfig>)> {
        let cfg = self.config.as_deref().map(RunConfig::load).transpose()?;
        Ok((Workspace::new(&self.out), cfg))
    }

    fn settings(&self) -> Result<(Workspace, Settings, usize)> {
        let (ws, cfg) = self.load()?;
        let settings = ws.settings(cfg.as_ref())?;
        let threads = self.threads.or(cfg.map(|c| c.threads)).unwrap_or(0);
        Ok((ws, settings, threads))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Standardize, desalt and deduplicate an activity CSV.
    Curate {
        /// CSV with columns id,smiles,activity_value,activity_unit.
        #[arg(short, long)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Enumerate and label matched molecular pairs of the curated set.
    Pairs(Common),
    /// Draw the repeated k-fold splits and their MMP sets.
    Split(Common),
    /// Tune and fit every selected model in every trial.
    Train(Common),
    /// Twin-train the MLP-based models with the pair loss.
    Twin(Common),
    /// Score the stored predictions as QSAR, AC and PD classifiers.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Override the AC decision threshold.
        #[arg(long)]
        d_crit: Option<f64>,
    },
    /// Render results.json into a long CSV and SVG plots.
    Report {
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run every stage from curation to report.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        /// Activity CSV; defaults to `dataset` in the config.
        #[arg(short, long)]
        input: Option<PathBuf>,
        /// Working directory; defaults to `output_dir` in the config.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write the bundled synthetic toy corpus as an activity CSV.
    Toy {
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn print_results(results: &pipeline::Results, dir: &Path) {
    println!("{:<24} {:>10} {:>12} {:>12} {:>12}", "model", "QSAR MAE", "sens inter", "sens test", "sens cores");
    for m in &results.models {
        let sens = |k| {
            m.report.sets.get(&k).and_then(|s| s.ac_sensitivity.mean).map_or("-".to_string(), |v| format!("{v:.3}"))
        };
        use cliffbench_core::eval::SetKind;
        println!(
            "{:<24} {:>10} {:>12} {:>12} {:>12}",
            m.report.model,
            m.report.qsar_mae.mean.map_or("-".to_string(), |v| format!("{v:.3}")),
            sens(SetKind::Inter),
            sens(SetKind::Test),
            sens(SetKind::Cores)
        );
    }
    println!("wrote {}", dir.join(pipeline::RESULTS).display());
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Curate { input, common } => {
            let (ws, settings, _) = common.settings()?;
            let s = pipeline::curate(&input, &ws, &settings)?;
            println!(
                "{} rows ({} malformed): {} curated, {} rejected, {} desalted, {} merged groups, {} removed groups",
                s.input_rows,
                s.malformed_rows,
                s.stats.curated,
                s.stats.rejected,
                s.stats.desalted,
                s.stats.merged_groups,
                s.stats.removed_groups
            );
        }
        Command::Pairs(common) => {
            let (ws, settings, threads) = common.settings()?;
            let s = pipeline::pairs(&ws, &settings, threads)?;
            let c = &s.counts;
            println!(
                "compounds {}  MMPs {}  ACs {}  half-ACs {}  non-ACs {}",
                c.compounds, c.mmps, c.acs, c.half_acs, c.non_acs
            );
            match s.non_acs_per_ac {
                Some(r) => println!("ACs : non-ACs = 1 : {r:.1}"),
                None => println!("ACs : non-ACs = undefined (no ACs)"),
            }
        }
        Command::Split(common) => {
            let (ws, settings, _) = common.settings()?;
            let s = pipeline::split(&ws, &settings)?;
            for p in &s.plans {
                println!(
                    "trial (i={}, j={}): train {} test {} | M_train {} M_inter {} M_test {} M_cores {}",
                    p.i,
                    p.j,
                    p.d_train.len(),
                    p.d_test.len(),
                    p.m_train.len(),
                    p.m_inter.len(),
                    p.m_test.len(),
                    p.m_cores.len()
                );
            }
        }
        Command::Train(common) => {
            let (ws, settings, threads) = common.settings()?;
            let n = pipeline::train(&ws, &settings, threads)?;
            println!("fitted {n} model-trial combinations");
        }
        Command::Twin(common) => {
            let (ws, settings, threads) = common.settings()?;
            let n = pipeline::twin(&ws, &settings, threads)?;
            println!("twin-trained {n} model-trial combinations");
        }
        Command::Eval { common, d_crit } => {
            let (ws, mut settings, _) = common.settings()?;
            if let Some(d) = d_crit {
                if d <= 0.0 || !d.is_finite() {
                    return Err(CliError::Usage(format!("d_crit must be positive, got {d}")));
                }
                settings.d_crit = d;
            }
            let results = pipeline::eval(&ws, &settings)?;
            print_results(&results, &ws.dir);
        }
        Command::Report { out } => {
            for p in report::render(&Workspace::new(out))? {
                println!("wrote {}", p.display());
            }
        }
        Command::Run {
            config,
            input,
            out,
            threads,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(t) = threads {
                cfg.threads = t;
            }
            let input = input
                .or(cfg.dataset.clone())
                .ok_or_else(|| CliError::Usage("no input: pass --input or set `dataset` in the config".into()))?;
            let out = out
                .or(cfg.output_dir.clone())
                .ok_or_else(|| CliError::Usage("no output: pass --out or set `output_dir` in the config".into()))?;
            let ws = Workspace::new(&out);
            let results = pipeline::run_all(&input, &ws, &cfg)?;
            print_results(&results, &out);
        }
        Command::Toy { output } => {
            let n = toy::write_csv(&output)?;
            println!("wrote {n} rows to {}", output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
