use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlr_core::datagen::write_csv_dataset;
use nlr_harness::config::ExperimentConfig;
use nlr_harness::experiment::{compare_optimizers, load_dataset, sweep, train_command};
use nlr_harness::landscape::{
    run_diffusion, run_exit_time, run_grid, run_post_escape, run_violation, write_study, LandscapeSettings,
    QuadraticSettings,
};
use nlr_harness::report::summarize_reports;
use nlr_harness::{HarnessError, Result};

const OUT_ENV: &str = "NLRQ_OUT";

#[derive(Parser)]
#[command(name = "nlrq", version, about = "Train variational classifiers and study optimizer behavior on plateaus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic data set a configuration would train on.
    GenData(RunArgs),
    /// Train one model and write report.json, report.csv and trace.csv.
    Train(RunArgs),
    /// Train once per value of one parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<String>,
    },
    /// Train several optimizers over shared seeds.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated optimizer names.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        opts: Vec<String>,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
    },
    /// Plateau-surface and noisy-quadratic studies.
    #[command(subcommand)]
    Landscape(LandscapeCommand),
    /// Check every report under a directory against its trace and write summary.csv.
    Report {
        #[arg(long, env = OUT_ENV, default_value = "runs")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eta_prime: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// 0 selects exact expectations.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    opt: Option<String>,
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Any configuration key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv.split_once('=').ok_or_else(|| HarnessError::config(format!("--set expects key=value, got {kv:?}")))?;
            cfg.set(k.trim(), v)?;
        }
        let flags: [(&str, Option<String>); 9] = [
            ("qubits", self.qubits.map(|v| v.to_string())),
            ("layers", self.layers.map(|v| v.to_string())),
            ("eta", self.eta.map(|v| v.to_string())),
            ("eta_prime", self.eta_prime.map(|v| v.to_string())),
            ("batch", self.batch.map(|v| v.to_string())),
            ("steps", self.steps.map(|v| v.to_string())),
            ("shots", self.shots.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("optimizer", self.opt.clone()),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct LandscapeCommon {
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    #[arg(long, default_value_t = 0.02)]
    eta_prime: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = OUT_ENV, default_value = "runs")]
    out: PathBuf,
}

impl LandscapeCommon {
    fn plateau(&self, gradient_sigma: f64, cost_sigma: f64) -> LandscapeSettings {
        LandscapeSettings { eta: self.eta, eta_prime: self.eta_prime, gradient_sigma, cost_sigma, seed: self.seed, ..Default::default() }
    }

    fn quadratic(&self, sigma: f64) -> QuadraticSettings {
        QuadraticSettings { eta: self.eta, eta_prime: self.eta_prime, sigma, seed: self.seed, ..Default::default() }
    }
}

#[derive(Subcommand)]
enum LandscapeCommand {
    /// Cost and gradient norm of the plateau surface on a square grid.
    Grid {
        #[arg(long, default_value_t = -3.0)]
        lo: f64,
        #[arg(long, default_value_t = 3.0)]
        hi: f64,
        #[arg(long, default_value_t = 121)]
        points: usize,
        #[arg(long, env = OUT_ENV, default_value = "runs")]
        out: PathBuf,
    },
    /// Diffusion coefficients on the plateau, in the order given.
    Diffusion {
        #[command(flatten)]
        common: LandscapeCommon,
        #[arg(long = "opt", default_values_t = ["nlr".to_string(), "backtrack".to_string()])]
        opts: Vec<String>,
        #[arg(long, default_value_t = 200)]
        trajectories: usize,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        gradient_sigma: f64,
        #[arg(long, default_value_t = 1e-3)]
        cost_sigma: f64,
    },
    /// First-passage times against the diffusive prediction.
    ExitTime {
        #[command(flatten)]
        common: LandscapeCommon,
        #[arg(long, default_value = "nlr")]
        opt: String,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0])]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        gradient_sigma: f64,
        #[arg(long, default_value_t = 1e-3)]
        cost_sigma: f64,
    },
    /// Acceptance-test violation rate against gradient norm on a noisy quadratic.
    Violation {
        #[command(flatten)]
        common: LandscapeCommon,
        /// Gradient norms in units of the noise level.
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0])]
        scales: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
    },
    /// Squared-gradient floor after escape, per noise variance.
    PostEscape {
        #[command(flatten)]
        common: LandscapeCommon,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.5])]
        variances: Vec<f64>,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 50)]
        seeds: usize,
        /// Also run `η_t = η·t0/(t0 + t)` at the first variance.
        #[arg(long)]
        decay_t0: Option<f64>,
    },
}

fn landscape(cmd: LandscapeCommand) -> Result<()> {
    match cmd {
        LandscapeCommand::Grid { lo, hi, points, out } => {
            run_grid(&LandscapeSettings::default(), lo, hi, points, &out)?;
            println!("{}", out.join("grid.csv").display());
        }
        LandscapeCommand::Diffusion { common, opts, trajectories, steps, gradient_sigma, cost_sigma } => {
            let study = run_diffusion(&common.plateau(gradient_sigma, cost_sigma), &opts, trajectories, steps)?;
            for r in &study.reports {
                println!("{:<10} D = {:.6e}  95% CI [{:.6e}, {:.6e}]  p = {:.4}", r.optimizer, r.d_hat, r.d_lower, r.d_upper, r.p_hat);
            }
            println!("ordered: {}", study.ordered);
            write_study(&common.out, "diffusion", &study)?;
        }
        LandscapeCommand::ExitTime { common, opt, radii, trials, max_steps, gradient_sigma, cost_sigma } => {
            let settings = common.plateau(gradient_sigma, cost_sigma);
            let study = run_exit_time(&settings, &opt, &radii, trials, max_steps, 200, 500)?;
            for row in &study.rows {
                let mean = row.report.mean.map_or("n/a".to_string(), |m| format!("{m:.1}"));
                println!(
                    "R = {}  mean {mean}  predicted {:.1}  censored {:.3}",
                    row.report.radius, row.predicted, row.report.censored_fraction
                );
            }
            println!("monotone: {}", study.monotone);
            write_study(&common.out, "exit_time", &study)?;
        }
        LandscapeCommand::Violation { common, scales, trials, sigma } => {
            let study = run_violation(&common.quadratic(sigma), &scales, trials)?;
            for (scale, row) in study.scales.iter().zip(&study.rows) {
                println!("|grad| = {scale} sigma  p = {:.4} ± {:.4}", row.p_hat, row.halfwidth);
            }
            write_study(&common.out, "violation", &study)?;
        }
        LandscapeCommand::PostEscape { common, variances, steps, seeds, decay_t0 } => {
            let study = run_post_escape(&common.quadratic(1.0), &variances, steps, seeds, decay_t0)?;
            for (v, r) in study.variances.iter().zip(&study.fixed) {
                println!("sigma^2 = {v}  tail |grad|^2 = {:.6e} ± {:.2e}", r.tail_grad_sq, r.tail_halfwidth);
            }
            if let Some(r) = &study.decaying {
                println!("decaying rate  tail |grad|^2 = {:.6e}", r.tail_grad_sq);
            }
            write_study(&common.out, "post_escape", &study)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(args) => {
            let cfg = args.resolve()?;
            let data = load_dataset(&cfg)?;
            std::fs::create_dir_all(&cfg.out).map_err(|e| HarnessError::io(&cfg.out, e))?;
            let path = cfg.out.join("data.csv");
            write_csv_dataset(&data, &path)?;
            println!("{}", path.display());
        }
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let outcome = train_command(&cfg)?;
            let r = &outcome.report;
            println!(
                "{}  final loss {:.6e}  accuracy {:.2}%  reversals {}",
                r.optimizer, r.final_loss, r.accuracy_percent, r.reversal_count
            );
            eprintln!("wall time {:.3} s", outcome.wall_time.as_secs_f64());
        }
        Command::Sweep { run, param, values } => {
            let cfg = run.resolve()?;
            let (aggregate, outcomes) = sweep(&cfg, &param, &values)?;
            for (row, o) in aggregate.rows.iter().zip(&outcomes) {
                println!("{} = {}  final loss {:.6e}  accuracy {:.2}%", row.parameter, row.value, row.report.final_loss, row.report.accuracy_percent);
                eprintln!("{} = {}  wall time {:.3} s", row.parameter, row.value, o.wall_time.as_secs_f64());
            }
        }
        Command::Compare { run, opts, seeds } => {
            let cfg = run.resolve()?;
            let comparison = compare_optimizers(&cfg, &opts, seeds)?;
            for r in &comparison.rows {
                println!(
                    "{:<16} loss {:.6e} ± {:.2e}  accuracy {:.2} ± {:.2}",
                    r.optimizer, r.final_loss.mean, r.final_loss.std, r.accuracy_percent.mean, r.accuracy_percent.std
                );
            }
        }
        Command::Landscape(cmd) => landscape(cmd)?,
        Command::Report { out } => {
            let reports = summarize_reports(&out)?;
            println!("{} reports verified; {}", reports.len(), out.join("summary.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nlrq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
