use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use parttrack::metrics::DEFAULT_MATCH_THRESHOLD;
use parttrack::{GeometricAggregation, Solver, TrackingMode};
use parttrack_harness::commands::{self, TrackArgs};
use parttrack_harness::config::{load_toml, TrackerFile};
use parttrack_harness::instances::InstanceLimits;
use parttrack_harness::io::report_text;
use parttrack_harness::synth::ScenarioConfig;
use parttrack_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(
    name = "parttrack",
    version,
    about = "Multi-part tracking with a joint assignment program"
)]
struct Cli {
    /// Tracker settings (TOML). Flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    f_false: Option<f64>,
    #[arg(long, global = true)]
    image_width: Option<f64>,
    #[arg(long, global = true)]
    image_height: Option<f64>,
    #[arg(long, global = true)]
    upsilon: Option<f64>,
    #[arg(long, global = true)]
    epsilon_geo: Option<f64>,
    #[arg(long, global = true)]
    neighbor_count: Option<usize>,
    #[arg(long, global = true)]
    template_variance: Option<f64>,
    #[arg(long, global = true, value_enum)]
    geometric_aggregation: Option<Aggregation>,
    #[arg(long, global = true)]
    iou_floor: Option<f64>,
    #[arg(long, global = true)]
    birth_confidence: Option<f64>,
    #[arg(long, global = true)]
    birth_persistence: Option<u32>,
    #[arg(long, global = true)]
    birth_radius: Option<f64>,
    #[arg(long, global = true)]
    max_coast: Option<u32>,
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    #[arg(long, global = true)]
    targets_per_type: Option<usize>,
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    q_d: Option<f64>,
    #[arg(long, global = true)]
    observation_variance: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Aggregation {
    Mixture,
    MomentMatched,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Fixed,
    Open,
}

#[derive(Clone, Copy, ValueEnum, Default)]
enum SolverArg {
    #[default]
    BranchAndBound,
    Exhaustive,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    TwoMice,
    ThreeMice,
}

#[derive(Subcommand)]
enum Command {
    /// Track detections and write the trajectories.
    Track {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Optional per-frame assignment log.
        #[arg(long)]
        assignments: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SolverArg::BranchAndBound)]
        solver: SolverArg,
    },
    /// Generate a synthetic scene into a directory.
    Simulate {
        /// Scenario settings (TOML); flags override it.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long)]
        mice: Option<usize>,
        #[arg(long)]
        frames: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        miss_rate: Option<f64>,
        #[arg(long)]
        false_rate: Option<f64>,
        #[arg(long)]
        detection_noise: Option<f64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score tracks against ground truth.
    Evaluate {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MATCH_THRESHOLD)]
        threshold: f64,
        /// Report file; `.json` selects JSON, anything else the text table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare branch-and-bound with exhaustive enumeration on random programs.
    Oracle {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        max_targets: usize,
        #[arg(long, default_value_t = 5)]
        max_detections: usize,
    },
}

fn settings(cli_config: Option<&PathBuf>, o: &Overrides) -> Result<TrackerFile> {
    let mut file = match cli_config {
        Some(p) => TrackerFile::load(p)?,
        None => TrackerFile::default(),
    };
    let c = &mut file.tracker;
    macro_rules! set {
        ($($field:ident),*) => {$(if let Some(v) = o.$field { c.$field = v; })*};
    }
    set!(
        f_false,
        image_width,
        image_height,
        upsilon,
        epsilon_geo,
        neighbor_count,
        template_variance,
        iou_floor,
        birth_confidence,
        birth_persistence,
        birth_radius,
        max_coast,
        targets_per_type,
        tau,
        q_d,
        observation_variance
    );
    if o.beta.is_some() {
        c.beta = o.beta;
    }
    if let Some(a) = o.geometric_aggregation {
        c.geometric_aggregation = match a {
            Aggregation::Mixture => GeometricAggregation::Mixture,
            Aggregation::MomentMatched => GeometricAggregation::MomentMatched,
        };
    }
    if let Some(m) = o.mode {
        c.mode = match m {
            Mode::Fixed => TrackingMode::Fixed,
            Mode::Open => TrackingMode::Open,
        };
    }
    Ok(file)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Track {
            detections,
            templates,
            out,
            assignments,
            solver,
        } => {
            let settings = settings(cli.config.as_ref(), &cli.overrides)?;
            let output = commands::track(TrackArgs {
                detections: &detections,
                templates: templates.as_deref(),
                settings,
                solver: match solver {
                    SolverArg::BranchAndBound => Solver::BranchAndBound,
                    SolverArg::Exhaustive => Solver::Exhaustive,
                },
                out: &out,
                assignments: assignments.as_deref(),
            })?;
            println!("tracks {} frames {}", output.tracks.len(), output.frames.len() + 1);
        }
        Command::Simulate {
            scenario,
            preset,
            mice,
            frames,
            seed,
            miss_rate,
            false_rate,
            detection_noise,
            out_dir,
        } => {
            let mut cfg = match (scenario, preset) {
                (Some(p), _) => load_toml::<ScenarioConfig>(p)?,
                (None, Some(Preset::ThreeMice)) => ScenarioConfig::three_mice_with_occlusions(0),
                (None, _) => ScenarioConfig::two_mice(0),
            };
            if let Some(v) = mice {
                cfg.mice = v;
            }
            if let Some(v) = frames {
                cfg.frames = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = miss_rate {
                cfg.miss_rate = v;
            }
            if let Some(v) = false_rate {
                cfg.f_false = v;
            }
            if let Some(v) = detection_noise {
                cfg.detection_noise = v;
            }
            let s = commands::simulate(&cfg, &out_dir)?;
            let n: usize = s.frames.iter().map(|f| f.detections.len()).sum();
            println!(
                "frames {} detections {} templates {}",
                s.frames.len(),
                n,
                s.templates.len()
            );
        }
        Command::Evaluate {
            tracks,
            ground_truth,
            threshold,
            out,
        } => {
            let report = commands::evaluate_files(&tracks, &ground_truth, threshold, out.as_ref())?;
            print!("{}", report_text(&report));
        }
        Command::Oracle {
            instances,
            seed,
            max_targets,
            max_detections,
        } => {
            let s = commands::oracle_suite(
                instances,
                seed,
                InstanceLimits {
                    max_targets,
                    max_detections,
                },
            )?;
            println!("instances {}", s.instances);
            println!("mismatches {}", s.mismatches);
            println!("infeasible {}", s.infeasible);
            println!("max_difference {:e}", s.max_difference);
            println!("max_variables {}", s.max_variables);
            println!("lp_solves {}", s.total_nodes);
            if !s.passed() {
                return Err(HarnessError::Check("branch-and-bound and enumeration disagree".into()));
            }
        }
    }
    Ok(())
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
