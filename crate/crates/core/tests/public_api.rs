use nalgebra::{Matrix4, Vector2};
use parttrack::geometry::TemplateLibrary;
use parttrack::ilp::{branch_and_bound, check_feasible, exhaustive_oracle, AssignmentProblem};
use parttrack::{
    evaluate, BoundingBox, Detection, Frame, GroundTruthEntry, GroundTruthTrack, PartType, TargetState, Track,
    TrackStatus, Tracker, TrackerConfig, VariableLayout,
};
use proptest::prelude::*;

const H: PartType = PartType::Head;
const T: PartType = PartType::TailBase;

fn problem_strategy() -> impl Strategy<Value = AssignmentProblem> {
    (1usize..4, 0usize..5).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(any::<bool>(), m),
            prop::collection::vec(5.0..15.0f64, n),
            prop::collection::vec(prop::collection::vec(-5.0..20.0f64, m), n),
            prop::collection::vec(prop::collection::vec(-6.0..6.0f64, m), m),
        )
            .prop_map(|(tt, dt, fake, assign, pair)| {
                let kind = |b: bool| if b { H } else { T };
                AssignmentProblem::from_costs(
                    tt.into_iter().map(kind).collect(),
                    dt.into_iter().map(kind).collect(),
                    fake,
                    assign,
                    pair,
                )
                .unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solvers_agree_through_the_public_interface(problem in problem_strategy()) {
        let a = branch_and_bound(&problem).unwrap();
        let b = exhaustive_oracle(&problem).unwrap();
        prop_assert!((a.objective - b.objective).abs() <= 1e-9);
        prop_assert!(check_feasible(&a.assignment, &problem).is_feasible());
        prop_assert!((problem.objective(&a.assignment) - a.objective).abs() <= 1e-9);
    }
}

#[test]
fn layout_size_matches_the_counting_formula() {
    for n in 0..5 {
        for m in 0..6 {
            assert_eq!(VariableLayout::new(n, m).len(), n * (m + 1) + m * m);
        }
    }
}

#[test]
fn tracked_pair_scores_perfectly() {
    let frames: Vec<Frame> = (0..40u32)
        .map(|f| {
            let x = 100.0 + 3.0 * f as f64;
            Frame {
                index: f,
                detections: vec![
                    Detection::new(0, f, H, Vector2::new(x, 100.0), (16.0, 16.0), 0.9),
                    Detection::new(1, f, T, Vector2::new(x - 50.0, 100.0), (16.0, 16.0), 0.9),
                    Detection::new(2, f, PartType::Body, Vector2::new(x - 25.0, 100.0), (82.0, 32.0), 0.9),
                ],
            }
        })
        .collect();
    let config = TrackerConfig {
        targets_per_type: 1,
        epsilon_geo: 1.0,
        ..TrackerConfig::default()
    };
    let out = Tracker::new(config, TemplateLibrary::default())
        .unwrap()
        .run(&frames)
        .unwrap();
    assert_eq!(out.tracks.len(), 2);

    let gt: Vec<GroundTruthTrack> = [(0u64, H, 0.0), (1, T, -50.0)]
        .into_iter()
        .map(|(id, part, dx)| GroundTruthTrack {
            gt_id: id,
            part_type: part,
            entries: (0..40u32)
                .map(|f| {
                    let c = Vector2::new(100.0 + 3.0 * f as f64 + dx, 100.0);
                    GroundTruthEntry {
                        frame: f,
                        center: c,
                        bbox: BoundingBox::centered(c, 16.0, 16.0),
                        occluded: false,
                    }
                })
                .collect(),
        })
        .collect();
    let report = evaluate(&gt, &out.tracks, 15.0).unwrap();
    assert_eq!(report.mota, 1.0);
    assert_eq!(report.id_switches, 0);
    assert!(report.motp < 2.0);
}

#[test]
fn metrics_reject_a_non_positive_threshold() {
    let track = Track {
        target_id: 0,
        part_type: H,
        history: vec![(0, TargetState::at_rest(0, H, Vector2::zeros(), Matrix4::identity()))],
        status: TrackStatus::Active,
        birth_frame: 0,
        confirmed: true,
    };
    assert!(evaluate(&[], &[track], 0.0).is_err());
}
