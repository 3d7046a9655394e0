//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! failure status if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{Matrix4, SymmetricEigen, Vector2, Vector4};
use parttrack::geometry::{fit_prior, geometric_score, GeometricTemplate};
use parttrack::ilp::{branch_and_bound, check_feasible, exhaustive_oracle};
use parttrack::motion::{predict, update};
use parttrack::{
    evaluate, BoundingBox, Detection, GeometricAggregation, GroundTruthEntry, GroundTruthTrack, MotionModel, PartType,
    Solver, TargetState, Track, TrackStatus, TrackerConfig,
};
use parttrack_harness::commands::benchmark;
use parttrack_harness::instances::{random_instance, InstanceLimits};
use parttrack_harness::synth::ScenarioConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

// Solver exactness and bound convergence share one batch of instances.
struct SolverBatch {
    instances: usize,
    max_difference: f64,
    infeasible: usize,
    elapsed: Duration,
    bad_traces: usize,
    worst_final_gap: f64,
}

fn solve_batch() -> SolverBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut batch = SolverBatch {
        instances: 200,
        max_difference: 0.0,
        infeasible: 0,
        elapsed: Duration::ZERO,
        bad_traces: 0,
        worst_final_gap: 0.0,
    };
    let started = Instant::now();
    for _ in 0..batch.instances {
        let problem = random_instance(
            &mut rng,
            InstanceLimits {
                max_targets: 3,
                max_detections: 5,
            },
        );
        let bnb = branch_and_bound(&problem).expect("branch-and-bound solves");
        let exact = exhaustive_oracle(&problem).expect("enumeration solves");
        batch.max_difference = batch.max_difference.max((bnb.objective - exact.objective).abs());
        if !check_feasible(&bnb.assignment, &problem).is_feasible() {
            batch.infeasible += 1;
        }

        let trace = &bnb.bound_trace;
        let monotone = trace
            .windows(2)
            .all(|w| w[1].upper <= w[0].upper && w[1].lower >= w[0].lower);
        let last = trace.last().expect("non-empty trace");
        let gap = (last.upper - last.lower).abs();
        batch.worst_final_gap = batch.worst_final_gap.max(gap);
        if !monotone || gap > 1e-9 || (last.upper - bnb.objective).abs() > 1e-9 {
            batch.bad_traces += 1;
        }
    }
    batch.elapsed = started.elapsed();
    batch
}

fn solver_exactness(b: &SolverBatch) -> Outcome {
    let passed = b.max_difference <= 1e-9 && b.infeasible == 0 && b.elapsed < Duration::from_secs(10);
    Outcome::new(
        passed,
        format!(
            "{} instances, max |objective difference| {:.2e}, infeasible {}, {:.2?} total",
            b.instances, b.max_difference, b.infeasible, b.elapsed
        ),
    )
}

fn bound_convergence(b: &SolverBatch) -> Outcome {
    Outcome::new(
        b.bad_traces == 0,
        format!(
            "{} traces, {} non-monotone or open, worst final gap {:.2e}",
            b.instances, b.bad_traces, b.worst_final_gap
        ),
    )
}

fn random_psd(rng: &mut ChaCha8Rng, scale: f64) -> Matrix4<f64> {
    let l = Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0) * scale);
    l * l.transpose() + Matrix4::identity() * 1e-3
}

fn gain_form(
    mean: &Vector4<f64>,
    cov: &Matrix4<f64>,
    z: &Vector2<f64>,
    m: &MotionModel,
) -> (Vector4<f64>, Matrix4<f64>) {
    let x = m.transition * mean;
    let p = m.transition * cov * m.transition.transpose() + m.process_noise;
    let s = m.observation * p * m.observation.transpose() + m.observation_noise;
    let k = p * m.observation.transpose() * s.try_inverse().expect("invertible innovation");
    let x_post = x + k * (z - m.observation * x);
    let i_kc = Matrix4::identity() - k * m.observation;
    let p_post = i_kc * p * i_kc.transpose() + k * m.observation_noise * k.transpose();
    (x_post, p_post)
}

fn kalman_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    let mut ordering_violations = 0;
    for _ in 0..1000 {
        let model = MotionModel::constant_velocity(
            rng.random_range(0.5..2.0),
            rng.random_range(0.01..3.0),
            rng.random_range(0.1..10.0),
        )
        .expect("valid model");
        let scale = rng.random_range(0.5..5.0);
        let cov = random_psd(&mut rng, scale);
        let mean = Vector4::from_fn(|_, _| rng.random_range(-50.0..50.0));
        let state = TargetState {
            target_id: 0,
            part_type: PartType::Head,
            mean,
            covariance: cov,
        };
        let z = Vector2::new(rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0));
        let det = Detection::new(0, 0, PartType::Head, z, (8.0, 8.0), 0.9);

        let post = update(&state, &det, &model).expect("update succeeds");
        let (x_ref, p_ref) = gain_form(&mean, &cov, &z, &model);
        worst = worst
            .max((post.mean - x_ref).amax())
            .max((post.covariance - p_ref).amax());

        let prior = predict(&state, &model)
            .expect("prediction succeeds")
            .predicted_covariance;
        let diff = prior - post.covariance;
        let min_eig = SymmetricEigen::new((diff + diff.transpose()) * 0.5).eigenvalues.min();
        if min_eig < -1e-9 * prior.amax().max(1.0) {
            ordering_violations += 1;
        }
    }
    Outcome::new(
        worst <= 1e-8 && ordering_violations == 0,
        format!("1000 instances, max abs difference {worst:.2e}, covariance ordering violations {ordering_violations}"),
    )
}

fn geometric_aggregation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    let mut evaluations = 0;
    for set in 0..100 {
        let count = 1 + set % 10;
        let templates: Vec<GeometricTemplate> = (0..count)
            .map(|k| GeometricTemplate {
                template_id: k,
                body_width: rng.random_range(30.0..120.0),
                body_height: rng.random_range(30.0..120.0),
                part_offsets: BTreeMap::from([
                    (
                        PartType::Head,
                        Vector2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
                    ),
                    (
                        PartType::TailBase,
                        Vector2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
                    ),
                ]),
            })
            .collect();
        let refs: Vec<&GeometricTemplate> = templates.iter().collect();
        let body_center = Vector2::new(rng.random_range(100.0..500.0), rng.random_range(100.0..400.0));
        let (bw, bh) = (rng.random_range(40.0..110.0), rng.random_range(40.0..110.0));
        let body = Detection::new(0, 0, PartType::Body, body_center, (bw, bh), 0.9);
        let sigma = rng.random_range(4.0..60.0);
        let prior = fit_prior(&refs, &body, sigma).expect("prior fits");

        for part in PartType::TRACKED {
            for _ in 0..5 {
                let x = body_center + Vector2::new(rng.random_range(-0.6..0.6) * bw, rng.random_range(-0.6..0.6) * bh);
                let candidate = Detection::new(1, 0, part, x, (10.0, 10.0), 0.8);
                let got = geometric_score(&candidate, Some(&prior), GeometricAggregation::Mixture, 1e-4);

                // Brute force: one isotropic Gaussian per template, summed in log space.
                let logs: Vec<f64> = templates
                    .iter()
                    .map(|t| {
                        let off = t.part_offsets[&part];
                        let mu = Vector2::new(body_center.x + off.x * bw, body_center.y + off.y * bh);
                        let d2 = (x - mu).norm_squared();
                        -d2 / (2.0 * sigma) - (2.0 * std::f64::consts::PI * sigma).ln()
                    })
                    .collect();
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let expected = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
                worst = worst.max((got - expected).abs());
                evaluations += 1;
            }
        }
    }
    Outcome::new(
        worst <= 1e-6,
        format!("100 template sets, {evaluations} scores, max log difference {worst:.2e}"),
    )
}

fn tracking_benchmark() -> Outcome {
    let settings = TrackerConfig::default();
    let limit = Duration::from_secs(60);
    let mut slowest = Duration::ZERO;

    let mut mota_sum = 0.0;
    let mut clean_seeds = 0;
    for seed in 0..20 {
        let run = benchmark(&ScenarioConfig::two_mice(seed), &settings, Solver::BranchAndBound).expect("two-mice run");
        slowest = slowest.max(run.elapsed);
        mota_sum += run.report.mota;
        if run.report.id_switches == 0 {
            clean_seeds += 1;
        }
    }
    let mean_mota = mota_sum / 20.0;

    let mut switches: Vec<usize> = (0..20)
        .map(|seed| {
            let run = benchmark(
                &ScenarioConfig::three_mice_with_occlusions(seed),
                &settings,
                Solver::BranchAndBound,
            )
            .expect("three-mice run");
            slowest = slowest.max(run.elapsed);
            run.report.id_switches
        })
        .collect();
    switches.sort_unstable();
    let median = (switches[9] + switches[10]) as f64 / 2.0;

    let passed = mean_mota >= 0.90 && clean_seeds >= 18 && median <= 2.0 && slowest < limit;
    Outcome::new(
        passed,
        format!(
            "two mice: mean MOTA {mean_mota:.4}, zero switches in {clean_seeds}/20 seeds; \
             three mice: median switches {median}; slowest scenario {slowest:.2?}"
        ),
    )
}

fn gt_line(gt_id: u64, y: f64, frames: std::ops::Range<u32>) -> GroundTruthTrack {
    GroundTruthTrack {
        gt_id,
        part_type: PartType::Head,
        entries: frames
            .map(|f| {
                let c = Vector2::new(20.0 * f as f64, y);
                GroundTruthEntry {
                    frame: f,
                    center: c,
                    bbox: BoundingBox::centered(c, 16.0, 16.0),
                    occluded: false,
                }
            })
            .collect(),
    }
}

fn hyp(target_id: u64, points: &[(u32, f64, f64)]) -> Track {
    Track {
        target_id,
        part_type: PartType::Head,
        history: points
            .iter()
            .map(|&(f, x, y)| {
                (
                    f,
                    TargetState::at_rest(target_id, PartType::Head, Vector2::new(x, y), Matrix4::identity()),
                )
            })
            .collect(),
        status: TrackStatus::Active,
        birth_frame: points[0].0,
        confirmed: true,
    }
}

fn on_line(y: f64, frames: impl Iterator<Item = u32>) -> Vec<(u32, f64, f64)> {
    frames.map(|f| (f, 20.0 * f as f64, y)).collect()
}

fn metrics_correctness() -> Outcome {
    let gt = [gt_line(1, 50.0, 0..10), gt_line(2, 250.0, 0..10)];

    let perfect = [hyp(1, &on_line(50.0, 0..10)), hyp(2, &on_line(250.0, 0..10))];
    let p = evaluate(&gt, &perfect, 15.0).expect("evaluation succeeds");
    let perfect_ok = p.mota == 1.0 && p.idf1 == 1.0 && p.motp == 0.0;

    // Track 2 is covered by one hypothesis for frames 0-3 and another for
    // frames 4-9 except frame 6: one switch and one miss. Two stray points
    // far from any object give the false positives.
    let flawed = [
        hyp(10, &on_line(50.0, 0..10)),
        hyp(11, &on_line(250.0, 0..4)),
        hyp(12, &on_line(250.0, (4..10).filter(|&f| f != 6))),
        hyp(13, &[(1, 600.0, 600.0), (8, 600.0, 600.0)]),
    ];
    let r = evaluate(&gt, &flawed, 15.0).expect("evaluation succeeds");
    let counts_ok = (r.false_positives, r.false_negatives, r.id_switches, r.gt_appearances) == (2, 1, 1, 20);
    let mota_ok = r.mota == 0.8;

    Outcome::new(
        perfect_ok && counts_ok && mota_ok,
        format!(
            "perfect: MOTA {} IDF1 {} MOTP {}; flawed: FP {} FN {} IDs {} over {} -> MOTA {}",
            p.mota, p.idf1, p.motp, r.false_positives, r.false_negatives, r.id_switches, r.gt_appearances, r.mota
        ),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_parttrack"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn pipeline(dir: &Path) -> Result<(), String> {
    let d = |name: &str| dir.join(name).to_string_lossy().into_owned();
    run_cli(&[
        "simulate",
        "--preset",
        "three-mice",
        "--seed",
        "11",
        "--out-dir",
        &d(""),
    ])?;
    run_cli(&[
        "--targets-per-type",
        "3",
        "track",
        "--detections",
        &d("detections.csv"),
        "--templates",
        &d("templates.csv"),
        "--out",
        &d("tracks.csv"),
        "--assignments",
        &d("assignments.csv"),
    ])?;
    run_cli(&[
        "evaluate",
        "--tracks",
        &d("tracks.csv"),
        "--ground-truth",
        &d("ground_truth.csv"),
        "--out",
        &d("report.json"),
    ])
}

fn determinism() -> Outcome {
    let files = [
        "detections.csv",
        "templates.csv",
        "ground_truth.csv",
        "tracks.csv",
        "assignments.csv",
        "report.json",
    ];
    let dirs = [
        tempfile::tempdir().expect("temp dir"),
        tempfile::tempdir().expect("temp dir"),
    ];
    for dir in &dirs {
        if let Err(e) = pipeline(dir.path()) {
            return Outcome::new(false, format!("command failed: {e}"));
        }
    }
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| {
            let a = std::fs::read(dirs[0].path().join(f)).ok();
            let b = std::fs::read(dirs[1].path().join(f)).ok();
            a.is_none() || a != b
        })
        .collect();
    Outcome::new(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} files identical across two runs", files.len())
        } else {
            format!("differing or missing: {}", differing.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let batch = solve_batch();
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("solver exactness", Box::new(|| solver_exactness(&batch))),
        ("bound convergence", Box::new(|| bound_convergence(&batch))),
        ("Kalman equivalence", Box::new(kalman_equivalence)),
        ("geometric aggregation", Box::new(geometric_aggregation)),
        ("synthetic tracking benchmark", Box::new(tracking_benchmark)),
        ("metrics correctness", Box::new(metrics_correctness)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = check();
        let verdict = if outcome.passed { "PASS" } else { "FAIL" };
        if !outcome.passed {
            failures += 1;
        }
        println!("{verdict} criterion {} ({name}): {}", i + 1, outcome.detail);
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
