use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use edgetrack::harness::{
    self, evaluate_files, generate_sequence, parse_init_pose, profile, read_poses, run_tracking,
    HarnessError, PoseRecord, RunConfig, RunOptions, SynthOptions, TrajectorySpec,
    GROUND_TRUTH_FILE, SEQUENCE_CONFIG_FILE,
};
use edgetrack::{Backend, WireframeModel};

#[derive(Parser)]
#[command(
    name = "edgetrack",
    version,
    about = "Model-based edge tracking of a wireframe object"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic orbit sequence with ground truth.
    Synth {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Gaussian noise sigma in gray levels; overrides the config.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Track a sequence and write poses.csv and stats.csv.
    Track {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sequence: PathBuf,
        /// `wx,wy,wz,tx,ty,tz` or a pose CSV whose first row is used.
        #[arg(long)]
        init: String,
        #[arg(long, default_value = "float")]
        backend: Backend,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-frame ID and depth buffers to OUT/buffers.
        #[arg(long)]
        dump_buffers: bool,
    },
    /// Compare a pose file against ground truth.
    Eval {
        #[arg(long)]
        poses: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Write the per-frame error table here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Track a synthetic sequence from its ground-truth start and print the timing profile.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long, default_value = "float")]
        backend: Backend,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Synth {
            model,
            config,
            frames,
            out,
            seed,
            noise,
        } => {
            let model = WireframeModel::load(&model)?;
            let cfg = RunConfig::load(&config)?;
            let traj = TrajectorySpec::Orbit {
                frames,
                orbit: cfg.orbit,
            };
            let opts = SynthOptions {
                noise_sigma: noise.unwrap_or(cfg.noise_sigma),
                seed,
                occluder: cfg.occluder,
            };
            generate_sequence(&model, &cfg.intrinsics, &traj, &opts, &out)?;
            let copy = out.join(SEQUENCE_CONFIG_FILE);
            std::fs::copy(&config, &copy).map_err(|e| HarnessError::Io {
                path: copy,
                source: e,
            })?;
            println!("wrote {frames} frames to {}", out.display());
        }
        Command::Track {
            model,
            config,
            sequence,
            init,
            backend,
            out,
            dump_buffers,
        } => {
            let model = WireframeModel::load(&model)?;
            let cfg = RunConfig::load(&config)?;
            let init = parse_init_pose(&init)?;
            let opts = RunOptions {
                dump_buffers: dump_buffers.then(|| out.join("buffers")),
            };
            let run = run_tracking(
                &sequence,
                &model,
                &cfg.intrinsics,
                &cfg.tracker,
                &init,
                backend,
                &opts,
            )?;
            run.write(&out)?;
            println!(
                "{} frames: {} tracked, {} coasting, {} lost",
                run.frames.len(),
                run.count(edgetrack::pose_estimation::FrameStatus::Tracked),
                run.count(edgetrack::pose_estimation::FrameStatus::Coasting),
                run.count(edgetrack::pose_estimation::FrameStatus::Lost),
            );
        }
        Command::Eval {
            poses,
            truth,
            report,
        } => {
            let r = evaluate_files(&poses, &truth)?;
            println!("{}", r.summary());
            if let Some(path) = report {
                std::fs::write(&path, r.to_csv())
                    .map_err(|e| HarnessError::Io { path, source: e })?;
            }
        }
        Command::Bench {
            model,
            sequence,
            backend,
        } => {
            let model = WireframeModel::load(&model)?;
            let conf = sequence.join(SEQUENCE_CONFIG_FILE);
            let cfg = if conf.is_file() {
                RunConfig::load(&conf)?
            } else {
                RunConfig::default()
            };
            let truth = read_poses(&sequence.join(GROUND_TRUTH_FILE))?;
            let truth: Vec<_> = truth.records.iter().map(PoseRecord::pose).collect();
            let init = truth
                .first()
                .copied()
                .ok_or(HarnessError::NoTrackedFrames)?;
            let run = run_tracking(
                &sequence,
                &model,
                &cfg.intrinsics,
                &cfg.tracker,
                &init,
                backend,
                &RunOptions::default(),
            )?;
            println!("backend: {backend}");
            println!("{}", profile(&run.stats())?.table());
            println!("mean sampled points: {:.1}", run.mean_sampled());
            println!("mean LM iterations: {:.2}", run.mean_iterations());
            println!("{}", harness::evaluate(&run.poses(), &truth)?.summary());
        }
    }
    Ok(())
}
