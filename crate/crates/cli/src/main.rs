use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use koopman_uq::io::{
    load_model, load_series, save_model, save_series, write_ftle_csv, write_prediction_csv, write_report_json,
    write_trace_csv, write_variance_csv, write_window_csv, PipelineConfig,
};
use koopman_uq::pipeline::{fit_from_config, ftle_from_config, predict_from_config, produce_trajectory};
use koopman_uq::uq::{batch_traces, score_rollout, sweep_batch_sizes};
use koopman_uq::{Error, Result};

#[derive(Parser)]
#[command(name = "koopman-uq", version, about = "Koopman model identification with VAMP prediction uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct Inputs {
    /// Trajectory CSV; defaults to `<output_dir>/trajectory.csv`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model file; defaults to `<output_dir>/model.kqm`.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate (or ingest) the configured system and write trajectory.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Overrides the simulation seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the model on samples up to the hand-off and write model.kqm.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Roll the fitted model forward and write prediction.csv.
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Score the prediction batch by batch and write report.json and the CSV summaries.
    Uq {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        /// Overrides `uq.batch_len`.
        #[arg(long)]
        batch_len: Option<usize>,
        /// Also write the solver trace of this batch to vamp_trace.csv.
        #[arg(long)]
        trace_batch: Option<usize>,
    },
    /// Uncertainty window against batch size; writes window_vs_batchsize.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        /// Comma-separated batch sizes, overriding `sweep.batch_sizes`.
        #[arg(long, value_delimiter = ',')]
        batch_sizes: Option<Vec<usize>>,
    },
    /// Finite-time Lyapunov exponents along the trajectory; writes ftle.csv.
    Ftle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Overrides the FTLE window.
        #[arg(long)]
        window: Option<f64>,
    },
}

struct Ctx {
    cfg: PipelineConfig,
    out: PathBuf,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let cfg = PipelineConfig::load(&common.config)?;
        let out = common.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
        fs::create_dir_all(&out)?;
        Ok(Self { cfg, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn data(&self, given: &Option<PathBuf>) -> Result<koopman_uq::TimeSeriesData> {
        let p = given.clone().unwrap_or_else(|| self.path("trajectory.csv"));
        load_artifact(&p, load_series)
    }

    fn model(&self, given: &Option<PathBuf>) -> Result<koopman_uq::koopman::KoopmanModel> {
        let p = given.clone().unwrap_or_else(|| self.path("model.kqm"));
        load_artifact(&p, load_model)
    }
}

fn load_artifact<T>(path: &Path, f: impl Fn(&Path) -> Result<T>) -> Result<T> {
    if !path.exists() {
        return Err(Error::Data(format!("missing artifact {}", path.display())));
    }
    f(path)
}

fn create(path: &Path) -> Result<File> {
    Ok(File::create(path)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, seed } => {
            let mut ctx = Ctx::new(&common)?;
            if let (Some(s), Some(sim)) = (seed, ctx.cfg.simulation.as_mut()) {
                sim.seed = s;
            }
            let data = produce_trajectory(&ctx.cfg)?;
            let p = ctx.path("trajectory.csv");
            save_series(&p, &data)?;
            println!("wrote {} ({} samples, {} observables)", p.display(), data.len(), data.n_observables());
        }
        Command::Fit { common, inputs } => {
            let ctx = Ctx::new(&common)?;
            let data = ctx.data(&inputs.data)?;
            let model = fit_from_config(&ctx.cfg, &data)?;
            let p = inputs.model.unwrap_or_else(|| ctx.path("model.kqm"));
            save_model(&p, &model)?;
            println!(
                "wrote {} (lift dim {}, regressor dim {}, residual variance {:e})",
                p.display(),
                model.lift_dim(),
                model.regressor_dim(),
                model.residual_variance
            );
        }
        Command::Predict { common, inputs } => {
            let ctx = Ctx::new(&common)?;
            let data = ctx.data(&inputs.data)?;
            let model = ctx.model(&inputs.model)?;
            let ro = predict_from_config(&ctx.cfg, &model, &data)?;
            let p = ctx.path("prediction.csv");
            write_prediction_csv(create(&p)?, &ro, &data.observable_names, Some(&data))?;
            println!("wrote {} ({} steps)", p.display(), ro.n_steps());
        }
        Command::Uq {
            common,
            inputs,
            batch_len,
            trace_batch,
        } => {
            let mut ctx = Ctx::new(&common)?;
            if let Some(b) = batch_len {
                ctx.cfg.uq.batch_len = b;
            }
            let data = ctx.data(&inputs.data)?;
            let model = ctx.model(&inputs.model)?;
            let ro = predict_from_config(&ctx.cfg, &model, &data)?;
            let report = score_rollout(&model, &ro, Some(&data), &ctx.cfg.uq)?;
            write_report_json(create(&ctx.path("report.json"))?, &report)?;
            write_variance_csv(create(&ctx.path("variance_vs_time.csv"))?, &report)?;
            write_window_csv(create(&ctx.path("window_vs_batchsize.csv"))?, &report.window_curve)?;
            if let Some(b) = trace_batch {
                let traces = batch_traces(&model, &ro, &ctx.cfg.uq, b)?;
                write_trace_csv(create(&ctx.path("vamp_trace.csv"))?, &traces)?;
            }
            let flagged = report.per_batch.iter().filter(|b| b.flags.iter().any(|&f| f)).count();
            println!(
                "{} batches, {} flagged at the lowest threshold or above; reports in {}",
                report.per_batch.len(),
                flagged,
                ctx.out.display()
            );
        }
        Command::Sweep {
            common,
            inputs,
            batch_sizes,
        } => {
            let ctx = Ctx::new(&common)?;
            let sizes = batch_sizes.unwrap_or_else(|| ctx.cfg.sweep.batch_sizes.clone());
            let data = ctx.data(&inputs.data)?;
            let model = ctx.model(&inputs.model)?;
            let curve = sweep_batch_sizes(&model, &data, &ctx.cfg.uq, &sizes)?;
            let p = ctx.path("window_vs_batchsize.csv");
            write_window_csv(create(&p)?, &curve)?;
            println!("wrote {} ({} rows)", p.display(), curve.len());
        }
        Command::Ftle { common, data, window } => {
            let mut ctx = Ctx::new(&common)?;
            if window.is_some() {
                ctx.cfg.ftle.window = window;
            }
            let traj = ctx.data(&data)?;
            let ftle = ftle_from_config(&ctx.cfg, &traj)?;
            let p = ctx.path("ftle.csv");
            write_ftle_csv(create(&p)?, &ftle)?;
            println!("wrote {} ({} points)", p.display(), ftle.lambda.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
