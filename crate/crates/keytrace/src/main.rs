use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use keytrace::commands;
use keytrace::error::{CliError, CliResult};
use keytrace::formats::{read_json, DepthEncoding};
use keytrace::ParamArgs;
use keytrace_core::synth::{Motion, SynthConfig};

#[derive(Parser)]
#[command(name = "keytrace", version, about = "Keypoint extraction and tracking for ropes, branched ropes and cloth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment every frame of a sequence into object point clouds.
    Segment {
        sequence: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Recover topology and initial keypoints from the first frame.
    Init {
        sequence: PathBuf,
        /// Output JSON file.
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Track keypoints through a sequence from an init file.
    Track {
        sequence: PathBuf,
        #[arg(long, value_name = "FILE")]
        init: PathBuf,
        /// Output trajectory JSON file.
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Score a trajectory against its sequence and/or ground truth.
    Eval {
        trajectory: PathBuf,
        #[arg(long, value_name = "DIR")]
        sequence: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        ground_truth: Option<PathBuf>,
        /// Output directory for metrics.json and metrics.csv.
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Render a synthetic sequence with ground truth.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Rope,
    Bdlo,
    Cloth,
}

#[derive(Clone, Copy, ValueEnum)]
enum MotionArg {
    Static,
    Translate,
    Swing,
    Fold,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    F32,
    U16,
}

#[derive(Args)]
struct SynthArgs {
    /// Output sequence directory.
    #[arg(short, long)]
    out: PathBuf,
    /// JSON synthetic-scene config; flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Preset used when no config file is given.
    #[arg(long, value_enum, default_value = "rope")]
    kind: KindArg,
    #[arg(long, value_enum)]
    motion: Option<MotionArg>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long, value_name = "HZ")]
    frame_rate: Option<f64>,
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long, value_name = "M")]
    size: Option<f64>,
    #[arg(long, value_name = "M")]
    noise_sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    num_keypoints: Option<usize>,
    #[arg(long)]
    grid_rows: Option<usize>,
    #[arg(long)]
    grid_cols: Option<usize>,
    #[arg(long, value_name = "M")]
    tube_radius: Option<f64>,
    #[arg(long, value_name = "RAD", allow_negative_numbers = true)]
    yaw: Option<f64>,
    #[arg(long, value_name = "RAD", allow_negative_numbers = true)]
    bend: Option<f64>,
    #[arg(long, value_name = "RAD", allow_negative_numbers = true)]
    curl: Option<f64>,
    #[arg(long, value_name = "RAD", allow_negative_numbers = true)]
    lift: Option<f64>,
    /// Omit the distractor arms.
    #[arg(long)]
    no_arms: bool,
    #[arg(long, value_enum, default_value = "f32")]
    depth_encoding: EncodingArg,
}

impl SynthArgs {
    fn resolve(&self) -> CliResult<SynthConfig> {
        let mut c = match &self.config {
            Some(p) => read_json(p)?,
            None => match self.kind {
                KindArg::Rope => SynthConfig::rope(),
                KindArg::Bdlo => SynthConfig::bdlo(),
                KindArg::Cloth => SynthConfig::cloth(),
            },
        };
        if let Some(m) = self.motion {
            c.motion = match m {
                MotionArg::Static => Motion::Static,
                MotionArg::Translate => Motion::Translate,
                MotionArg::Swing => Motion::Swing,
                MotionArg::Fold => Motion::Fold,
            };
        }
        let f = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        f(&mut c.frame_rate, self.frame_rate);
        f(&mut c.speed, self.speed);
        f(&mut c.size, self.size);
        f(&mut c.noise_sigma, self.noise_sigma);
        f(&mut c.tube_radius, self.tube_radius);
        f(&mut c.yaw, self.yaw);
        f(&mut c.bend, self.bend);
        f(&mut c.curl, self.curl);
        f(&mut c.lift, self.lift);
        c.frames = self.frames.unwrap_or(c.frames);
        c.rng_seed = self.seed.unwrap_or(c.rng_seed);
        c.num_keypoints = self.num_keypoints.unwrap_or(c.num_keypoints);
        c.grid_shape.0 = self.grid_rows.unwrap_or(c.grid_shape.0);
        c.grid_shape.1 = self.grid_cols.unwrap_or(c.grid_shape.1);
        c.arms &= !self.no_arms;
        c.validate()?;
        Ok(c)
    }

    fn encoding(&self) -> DepthEncoding {
        match self.depth_encoding {
            EncodingArg::F32 => DepthEncoding::F32Meters,
            EncodingArg::U16 => DepthEncoding::U16Millimeters,
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Segment { sequence, out, params } => {
            let report = commands::segment(&sequence, &params.resolve()?, &out)?;
            let failed = report.frames.iter().filter(|f| f.error.is_some()).count();
            eprintln!("segmented {} frames ({failed} failed)", report.frames.len());
        }
        Command::Init { sequence, out, params } => {
            let f = commands::init(&sequence, &params.resolve()?, &out)?;
            eprintln!(
                "{:?} object: {} keypoints, {} edges, {} anchors",
                f.class,
                f.topology.num_keypoints,
                f.topology.edges.len(),
                f.topology.anchors.len()
            );
        }
        Command::Track { sequence, init, out, params } => {
            let f = commands::track(&sequence, &init, &params.resolve()?, &out)?;
            let flagged = f.frames.iter().filter(|fr| fr.flagged).count();
            eprintln!("tracked {} frames ({flagged} flagged)", f.frames.len());
        }
        Command::Eval { trajectory, sequence, ground_truth, out, params } => {
            let r = commands::eval(&trajectory, sequence.as_deref(), ground_truth.as_deref(), &params.resolve()?, &out)?;
            if let Some(s) = &r.summary {
                eprintln!(
                    "edge RMSE {:.2} mm, Chamfer {:.2} mm, F-score {:.1}%",
                    s.mean_edge_rmse_mm, s.mean_chamfer_mm, s.mean_fscore_pct
                );
            }
            if let Some(t) = &r.truth {
                eprintln!("keypoint error {:.2} mm, {} swapped frames", t.mean_error_mm, t.swap_count);
            }
        }
        Command::Synth(args) => commands::synth(&args.resolve()?, args.encoding(), &args.out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(CliError::Internal(String::new()).exit_code() as u8),
    }
}
