use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use radodom::commands::{self, TRAJECTORY_FILE, VELOCITY_FILE};
use radodom::format::{format_report, load_kappa, load_trajectory, report_csv_rows, REPORT_CSV_HEADER};
use radodom::{Config, DatasetLayout, IoError};
use radodom_core::evaluation::KITTI_LENGTHS;
use radodom_core::lift::KappaCalibration;

/// Spinning-radar and gyroscope odometry.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run odometry over a dataset; writes trajectory.txt and velocities.csv.
    Odom(OdomArgs),
    /// Estimate kappa from one sequence with ground truth.
    Calibrate(CalibrateArgs),
    /// Write a simulated figure-eight dataset.
    Simulate(SimulateArgs),
    /// Compare an estimated trajectory against ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct OdomArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Without it, kappa = 0 (no vertical velocity).
    #[arg(long)]
    kappa_file: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// kappa file to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Dataset directory to create.
    #[arg(long)]
    output: PathBuf,
    /// Scenario overrides under `sim.*`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("truth").required(true).args(["dataset", "ground_truth"]))]
struct EvaluateArgs {
    /// Dataset whose manifest names the ground truth.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Estimated trajectory file.
    #[arg(long)]
    estimate: PathBuf,
    /// Also evaluate the SE(2) projections.
    #[arg(long)]
    se2: bool,
    /// Segment lengths in metres.
    #[arg(long, value_delimiter = ',', default_values_t = KITTI_LENGTHS.to_vec())]
    lengths: Vec<f64>,
    /// Also write the report as CSV.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<Config> {
    Ok(match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    })
}

fn odom(a: OdomArgs) -> anyhow::Result<()> {
    let config = load_config(a.config.as_ref())?;
    let layout = DatasetLayout::open(&a.dataset)?;
    let kappa = match &a.kappa_file {
        Some(k) => load_kappa(k)?,
        None => KappaCalibration::fixed(0.0),
    };
    let out = commands::odometry(&layout, &config, &kappa).context("odometry failed")?;
    commands::write_odometry(&out, &a.output)?;
    println!(
        "wrote {} poses to {} and {} velocities to {}",
        out.trajectory.len(),
        a.output.join(TRAJECTORY_FILE).display(),
        out.velocities.len(),
        a.output.join(VELOCITY_FILE).display()
    );
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> anyhow::Result<()> {
    let config = load_config(a.config.as_ref())?;
    let layout = DatasetLayout::open(&a.dataset)?;
    let (cal, _) = commands::calibrate(&layout, &config).context("calibration failed")?;
    commands::write_kappa(&cal, &a.output)?;
    println!("kappa = {:.6e} from {} samples, written to {}", cal.kappa, cal.sample_count, a.output.display());
    Ok(())
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let mut scenario = load_config(a.config.as_ref())?.scenario;
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    let data = scenario.generate().context("simulation failed")?;
    DatasetLayout::create(&a.output, &data.scans, &data.gyro, Some(&data.ground_truth), &data.intrinsics)?;
    println!("wrote {} scans and {} gyro samples to {}", data.scans.len(), data.gyro.len(), a.output.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    if a.lengths.is_empty() || a.lengths.iter().any(|l| !l.is_finite() || *l <= 0.0) {
        bail!("--lengths must be positive and finite");
    }
    let gt_path = match (&a.ground_truth, &a.dataset) {
        (Some(g), _) => g.clone(),
        (None, Some(d)) => {
            DatasetLayout::open(d)?.ground_truth.context("the dataset manifest has no ground_truth entry")?
        }
        (None, None) => unreachable!("clap enforces the group"),
    };
    let gt = load_trajectory(&gt_path)?;
    let est = load_trajectory(&a.estimate)?;
    let ev = commands::evaluate(&gt, &est, &a.lengths, a.se2)?;
    print!("{}", format_report("SE(3)", &ev.se3));
    let mut csv = format!("{REPORT_CSV_HEADER}{}", report_csv_rows("SE3", &ev.se3));
    if let Some(r) = &ev.se2 {
        print!("{}", format_report("SE(2)", r));
        csv.push_str(&report_csv_rows("SE2", r));
    }
    if let Some(out) = &a.output {
        std::fs::write(out, csv).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Odom(a) => odom(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Simulate(a) => simulate(a),
        Command::Evaluate(a) => evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            // Missing inputs are a usage problem, like a missing flag.
            if e.chain().any(|c| matches!(c.downcast_ref::<IoError>(), Some(IoError::Missing { .. }))) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
