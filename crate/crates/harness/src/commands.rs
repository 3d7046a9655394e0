//! The work behind each subcommand, independent of argument parsing.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use parttrack::geometry::TemplateLibrary;
use parttrack::ilp::{branch_and_bound, check_feasible, exhaustive_oracle};
use parttrack::metrics::DEFAULT_MATCH_THRESHOLD;
use parttrack::{evaluate, MetricsReport, Solver, Tracker, TrackerConfig, TrackingOutput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::TrackerFile;
use crate::error::{HarnessError, Result};
use crate::instances::{random_instance, InstanceLimits};
use crate::io;
use crate::synth::{synthesize, Scenario, ScenarioConfig};

pub const DETECTIONS_FILE: &str = "detections.csv";
pub const TEMPLATES_FILE: &str = "templates.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

pub struct TrackArgs<'a> {
    pub detections: &'a Path,
    pub templates: Option<&'a Path>,
    pub settings: TrackerFile,
    pub solver: Solver,
    pub out: &'a Path,
    pub assignments: Option<&'a Path>,
}

pub fn track(args: TrackArgs<'_>) -> Result<TrackingOutput> {
    let frames = io::load_detections(args.detections)?;
    let templates = match args.templates {
        Some(p) => io::load_templates(p)?,
        None => Vec::new(),
    };
    let mut tracker = Tracker::new(args.settings.tracker, TemplateLibrary::new(templates))?.with_solver(args.solver);
    if let Some(models) = args.settings.distance_models {
        tracker = tracker.with_distance_models(models);
    }
    let output = tracker.run(&frames)?;
    io::save_tracks(args.out, &output.tracks)?;
    if let Some(path) = args.assignments {
        save_assignments(path, &output)?;
    }
    Ok(output)
}

/// `frame,target_id,part_type,detection,objective`, with `-1` for the fake
/// candidate.
fn save_assignments(path: &Path, output: &TrackingOutput) -> Result<()> {
    let mut text = String::from("frame,target_id,part_type,detection,objective\n");
    for r in &output.frames {
        for a in &r.assignments {
            let det = a.detection.map_or("-1".to_string(), |d| d.to_string());
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                r.frame,
                a.target_id,
                a.part_type.label(),
                det,
                r.objective
            ));
        }
    }
    let mut file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

/// Writes the scenario's detections, templates and ground truth into `dir`.
pub fn simulate(config: &ScenarioConfig, dir: &Path) -> Result<Scenario> {
    let scenario = synthesize(config)?;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    io::save_detections(dir.join(DETECTIONS_FILE), &scenario.frames)?;
    io::save_templates(dir.join(TEMPLATES_FILE), &scenario.templates)?;
    io::save_ground_truth(dir.join(GROUND_TRUTH_FILE), &scenario.ground_truth)?;
    Ok(scenario)
}

pub fn evaluate_files(
    tracks: &Path,
    ground_truth: &Path,
    threshold: f64,
    out: Option<&PathBuf>,
) -> Result<MetricsReport> {
    let hyp = io::load_tracks(tracks)?;
    let gt = io::load_ground_truth(ground_truth)?;
    let report = evaluate(&gt, &hyp, threshold)?;
    if let Some(path) = out {
        io::save_report(path, &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSummary {
    pub instances: usize,
    pub mismatches: usize,
    pub infeasible: usize,
    pub max_difference: f64,
    pub max_variables: usize,
    pub total_nodes: usize,
    pub solver_time: Duration,
}

impl OracleSummary {
    pub fn passed(&self) -> bool {
        self.mismatches == 0 && self.infeasible == 0
    }
}

/// Solves `count` random instances with both solvers and compares them.
pub fn oracle_suite(count: usize, seed: u64, limits: InstanceLimits) -> Result<OracleSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = OracleSummary {
        instances: count,
        mismatches: 0,
        infeasible: 0,
        max_difference: 0.0,
        max_variables: 0,
        total_nodes: 0,
        solver_time: Duration::ZERO,
    };
    for _ in 0..count {
        let problem = random_instance(&mut rng, limits);
        let started = Instant::now();
        let solution = branch_and_bound(&problem)?;
        summary.solver_time += started.elapsed();
        let exact = exhaustive_oracle(&problem)?;
        let diff = (solution.objective - exact.objective).abs();
        summary.max_difference = summary.max_difference.max(diff);
        summary.max_variables = summary.max_variables.max(problem.len());
        summary.total_nodes += solution.node_count;
        if diff > 1e-9 {
            summary.mismatches += 1;
        }
        if !check_feasible(&solution.assignment, &problem).is_feasible() {
            summary.infeasible += 1;
        }
    }
    Ok(summary)
}

/// Outcome of tracking one synthetic scenario in memory.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub report: MetricsReport,
    pub elapsed: Duration,
}

/// Synthesizes `scenario`, tracks it with one fixed-mode target per mouse
/// and part type, and scores the result.
pub fn benchmark(scenario: &ScenarioConfig, settings: &TrackerConfig, solver: Solver) -> Result<BenchmarkRun> {
    let started = Instant::now();
    let s = synthesize(scenario)?;
    let config = TrackerConfig {
        targets_per_type: scenario.mice,
        ..settings.clone()
    };
    let output = Tracker::new(config, TemplateLibrary::new(s.templates))?
        .with_solver(solver)
        .run(&s.frames)?;
    let report = evaluate(&s.ground_truth, &output.tracks, DEFAULT_MATCH_THRESHOLD)?;
    Ok(BenchmarkRun {
        report,
        elapsed: started.elapsed(),
    })
}
