//! `cstrd`: tree-ring detection, evaluation and measurement on cross-section
//! images.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cstrd_core::detect::{DetectParams, EdgeThreshold};

use commands::Failure;

#[derive(Parser)]
#[command(name = "cstrd", version, about = "Tree-ring detection on wood cross-section images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect rings; writes detection.json and overlay.png.
    Detect(DetectArgs),
    /// Score a detection file against ground truth and render the reports.
    Evaluate(EvaluateArgs),
    /// Growth series and cardinal ring widths of an annotation file.
    Measure(MeasureArgs),
    /// Fit the millimeters-per-pixel factor from paired measurements.
    Calibrate(CalibrateArgs),
    /// Detect and evaluate every row of a manifest; writes summary.csv.
    Batch(BatchArgs),
}

#[derive(Args, Clone)]
struct PithArgs {
    /// Pith x coordinate, pixels.
    #[arg(long, requires = "cy")]
    cx: Option<f64>,
    /// Pith y coordinate, pixels.
    #[arg(long, requires = "cx")]
    cy: Option<f64>,
    /// Pith table (header row, then name,cx,cy) used when --cx/--cy are absent.
    #[arg(long, conflicts_with_all = ["cx", "cy"])]
    pith_csv: Option<PathBuf>,
    /// Row of --pith-csv to use; defaults to the image file stem.
    #[arg(long, requires = "pith_csv")]
    section: Option<String>,
}

#[derive(Args, Clone)]
struct ParamArgs {
    /// Edge detector scale.
    #[arg(long, default_value_t = DetectParams::default().sigma)]
    sigma: f64,
    /// Number of rays of the spider web.
    #[arg(long, default_value_t = DetectParams::default().nb_rays)]
    nb_rays: usize,
    /// Largest angle, degrees, between a node gradient and its ray.
    #[arg(long, default_value_t = DetectParams::default().angle_tol_deg)]
    angle_tol: f64,
    /// Radial tolerance between candidate offsets to the support, pixels.
    #[arg(long, default_value_t = DetectParams::default().th_rt)]
    th_rt: f64,
    /// Standard-deviation multiplier of the radial-distance ranges.
    #[arg(long, default_value_t = DetectParams::default().th_ds)]
    th_ds: f64,
    /// Allowed ratio of gap to chain radial derivative.
    #[arg(long, default_value_t = DetectParams::default().th_rd)]
    th_rd: f64,
    /// Nodes per chain end used by the connectivity criteria.
    #[arg(long, default_value_t = DetectParams::default().n_nodes)]
    n_nodes: usize,
    /// Number of threshold relaxation levels.
    #[arg(long, default_value_t = DetectParams::default().relax_iters)]
    relax_iters: usize,
    /// Growth factor of th-rt and th-rd per relaxation level.
    #[arg(long, default_value_t = DetectParams::default().relax_factor)]
    relax_factor: f64,
    /// Shortest chain kept after gradient filtering, in nodes.
    #[arg(long, default_value_t = DetectParams::default().min_chain_nodes)]
    min_chain_nodes: usize,
    /// Fraction of rays a chain must cover to become a ring.
    #[arg(long, default_value_t = DetectParams::default().min_ring_coverage)]
    min_coverage: f64,
    /// Side of the square working image.
    #[arg(long, default_value_t = DetectParams::default().target_size)]
    target_size: u32,
    /// Low hysteresis threshold: `p70` for a percentile, or an absolute value.
    #[arg(long, default_value_t = DetectParams::default().edge_low)]
    edge_low: EdgeThreshold,
    /// High hysteresis threshold: `p85` for a percentile, or an absolute value.
    #[arg(long, default_value_t = DetectParams::default().edge_high)]
    edge_high: EdgeThreshold,
}

impl ParamArgs {
    fn params(&self) -> DetectParams {
        DetectParams {
            sigma: self.sigma,
            nb_rays: self.nb_rays,
            angle_tol_deg: self.angle_tol,
            th_rt: self.th_rt,
            th_ds: self.th_ds,
            th_rd: self.th_rd,
            n_nodes: self.n_nodes,
            relax_iters: self.relax_iters,
            relax_factor: self.relax_factor,
            min_chain_nodes: self.min_chain_nodes,
            min_ring_coverage: self.min_coverage,
            target_size: self.target_size,
            edge_low: self.edge_low,
            edge_high: self.edge_high,
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    image: PathBuf,
    #[command(flatten)]
    pith: PithArgs,
    /// Background mask; zero pixels are background.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Detection annotation file.
    #[arg(long)]
    dt: PathBuf,
    /// Ground-truth annotation file.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    image: PathBuf,
    #[command(flatten)]
    pith: PithArgs,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    /// Fraction of a detection's nodes that must fall in a GT influence area.
    #[arg(long, default_value_t = 0.6)]
    th: f64,
    #[arg(long, default_value_t = DetectParams::default().nb_rays)]
    nb_rays: usize,
}

#[derive(Args)]
struct MeasureArgs {
    /// Annotation file with the rings to measure.
    #[arg(long)]
    rings: PathBuf,
    #[command(flatten)]
    pith: PithArgs,
    /// Calibration points (header row, then direction,px,mm).
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Calibration direction to fit: N, S, E, W or all.
    #[arg(long, default_value = "all")]
    direction: String,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    #[arg(long, default_value_t = DetectParams::default().nb_rays)]
    nb_rays: usize,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Calibration points (header row, then direction,px,mm).
    #[arg(long)]
    data: PathBuf,
    /// Direction to fit: N, S, E, W or all.
    #[arg(long, default_value = "all")]
    direction: String,
}

#[derive(Args)]
struct BatchArgs {
    /// CSV with header image,cx,cy,gt[,mask]; relative paths resolve against
    /// the manifest directory.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 0.6)]
    th: f64,
    /// Also render the five evaluation images per row.
    #[arg(long)]
    reports: bool,
    #[command(flatten)]
    params: ParamArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Detect(a) => commands::detect(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Measure(a) => commands::measure(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Batch(a) => commands::batch(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}
