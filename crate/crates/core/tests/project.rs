use std::sync::OnceLock;

use proptest::prelude::*;
use xa11y_core::fixture::FixturePlan;
use xa11y_core::pipeline::analyze_bundle;
use xa11y_core::postprocess::IssueStatus;
use xa11y_core::project::webvtt::parse_strict;
use xa11y_core::project::{
    load_project, save_project, AnnotationKind, Mutation, MutationRecord, PreviewAction, Project, ProjectError,
};
use xa11y_core::AnalysisConfig;

fn fresh() -> Project {
    static BASE: OnceLock<Project> = OnceLock::new();
    BASE.get_or_init(|| analyze_bundle(&FixturePlan::default().bundle(), "fixture", &AnalysisConfig::default()).unwrap())
        .clone()
}

fn rec(mutation: Mutation) -> MutationRecord {
    MutationRecord { at_ms: 1_000, mutation }
}

fn describe(segment: &str, text: &str, anchor: Option<f64>) -> MutationRecord {
    rec(Mutation::AddAnnotation {
        kind: AnnotationKind::AudioDescription,
        segment_id: segment.into(),
        text: text.into(),
        anchor_time: anchor,
    })
}

fn caption(segment: &str, text: &str) -> MutationRecord {
    rec(Mutation::AddAnnotation { kind: AnnotationKind::Caption, segment_id: segment.into(), text: text.into(), anchor_time: None })
}

fn status(p: &Project, issue: &str) -> IssueStatus {
    p.issue(issue).unwrap().status
}

#[test]
fn describe_then_unsave() {
    let mut p = fresh();
    assert_eq!(status(&p, "auto-v2"), IssueStatus::Open);
    assert!(p.apply(&describe("v2", "  Butter browns in the pan. ", None)).unwrap());
    assert_eq!(p.revision, 1);
    assert_eq!(status(&p, "auto-v2"), IssueStatus::Addressed);
    let entry = &p.annotations[0];
    assert_eq!((entry.entry_id.as_str(), entry.anchor_time, entry.text.as_str()), ("ann-1", 24.0, "Butter browns in the pan."));

    assert!(matches!(
        p.apply(&rec(Mutation::DismissIssue { issue_id: "auto-v2".into() })),
        Err(ProjectError::AlreadyAddressed(_))
    ));
    assert_eq!(p.revision, 1);

    assert!(p.apply(&rec(Mutation::RemoveAnnotation { entry_id: "ann-1".into() })).unwrap());
    assert_eq!(status(&p, "auto-v2"), IssueStatus::Open);
    assert_eq!(p.revision, 2);
}

#[test]
fn dismiss_and_reopen() {
    let mut p = fresh();
    let dismiss = rec(Mutation::DismissIssue { issue_id: "auto-a5".into() });
    assert!(p.apply(&dismiss).unwrap());
    assert!(!p.apply(&dismiss).unwrap());
    assert_eq!(p.revision, 1);
    assert!(matches!(
        p.apply(&caption("a5", "[timer rings]")),
        Err(ProjectError::LifecycleViolation { from: IssueStatus::Dismissed, to: IssueStatus::Addressed, .. })
    ));
    let reopen = rec(Mutation::ReopenIssue { issue_id: "auto-a5".into() });
    assert!(p.apply(&reopen).unwrap());
    assert!(!p.apply(&reopen).unwrap());
    assert_eq!(status(&p, "auto-a5"), IssueStatus::Open);
    assert!(p.apply(&caption("a5", "[timer rings]")).unwrap());
    assert!(matches!(p.apply(&reopen), Err(ProjectError::LifecycleViolation { from: IssueStatus::Addressed, .. })));
    assert_eq!(p.revision, 3);
}

#[test]
fn annotation_validation() {
    let mut p = fresh();
    assert!(matches!(p.apply(&caption("v2", "x")), Err(ProjectError::KindMismatch { .. })));
    assert!(matches!(p.apply(&describe("a5", "x", None)), Err(ProjectError::KindMismatch { .. })));
    assert!(matches!(p.apply(&describe("v2", " \n ", None)), Err(ProjectError::EmptyText)));
    assert!(matches!(p.apply(&describe("v9", "x", None)), Err(ProjectError::UnknownSegment(_))));
    assert!(matches!(p.apply(&describe("v2", "x", Some(40.0))), Err(ProjectError::AnchorOutsideSegment { .. })));
    assert!(matches!(
        p.apply(&rec(Mutation::EditAnnotation { entry_id: "ann-7".into(), text: "x".into() })),
        Err(ProjectError::UnknownAnnotation(_))
    ));
    assert!(matches!(p.apply(&rec(Mutation::DismissIssue { issue_id: "auto-v0".into() })), Err(ProjectError::UnknownIssue(_))));
    assert_eq!(p.revision, 0);
    assert_eq!(p, fresh());
}

#[test]
fn edits_and_manual_issues() {
    let mut p = fresh();
    // v0 has no issue; describing it creates an addressed manual one
    assert!(p.apply(&describe("v0", "A bowl of cream.", Some(3.0))).unwrap());
    assert_eq!(status(&p, "manual-v0"), IssueStatus::Addressed);
    let edit = |text: &str| rec(Mutation::EditAnnotation { entry_id: "ann-1".into(), text: text.into() });
    assert!(!p.apply(&edit("A bowl of cream.")).unwrap());
    assert!(p.apply(&edit("A bowl of whipped cream.")).unwrap());
    let log: Vec<&str> = p.annotations[0].author_action_log.iter().map(|e| e.action.as_str()).collect();
    assert_eq!(log, ["save", "edit"]);

    assert!(matches!(
        p.apply(&rec(Mutation::AddManualIssue { segment_id: "v2".into() })),
        Err(ProjectError::DuplicateIssue(_))
    ));
    assert!(p.apply(&rec(Mutation::AddManualIssue { segment_id: "v4".into() })).unwrap());
    assert_eq!(status(&p, "manual-v4"), IssueStatus::Open);
    assert_eq!(p.revision, 3);
}

#[test]
fn refilter_mutation() {
    let mut p = fresh();
    assert!(!p.apply(&rec(Mutation::Refilter { tau: 0.35 })).unwrap());
    assert!(matches!(p.apply(&rec(Mutation::Refilter { tau: 1.5 })), Err(ProjectError::TauOutOfRange(_))));
    assert!(p.apply(&rec(Mutation::Refilter { tau: 0.75 })).unwrap());
    // v4 scores about 0.714 and now falls under tau; v0 (about 0.816) does not
    assert_eq!(status(&p, "auto-v4"), IssueStatus::Open);
    assert!(p.issue("auto-v0").is_none());
    assert!(p.apply(&rec(Mutation::Refilter { tau: 0.35 })).unwrap());
    let mut back = p.clone();
    back.revision = 0;
    assert_eq!(back, fresh());
}

#[test]
fn caption_export_spans_segment() {
    let mut p = fresh();
    p.apply(&caption("a5", "[oven timer rings]")).unwrap();
    let vtt = p.export_webvtt(AnnotationKind::Caption);
    assert_eq!(vtt, "WEBVTT\n\nann-1\n00:00:35.400 --> 00:00:48.000\n[oven timer rings]\n");
    let cues = parse_strict(&vtt).unwrap();
    assert_eq!((cues[0].start, cues[0].end), (35.4, 48.0));
}

#[test]
fn description_export_and_dismissed_exclusion() {
    let mut p = fresh();
    p.apply(&describe("v2", "Butter browns <slowly> & foams.", Some(25.5))).unwrap();
    p.apply(&describe("v0", "A bowl of cream.", None)).unwrap();
    let vtt = p.export_webvtt(AnnotationKind::AudioDescription);
    let cues = parse_strict(&vtt).unwrap();
    assert!(vtt.starts_with("WEBVTT\n\nNOTE descriptions\n"));
    assert_eq!(cues.len(), 2);
    assert_eq!((cues[0].start, cues[0].text.as_str()), (0.0, "A bowl of cream."));
    assert_eq!((cues[1].start, cues[1].end), (25.5, 25.6));
    assert_eq!(cues[1].text, "Butter browns &lt;slowly&gt; &amp; foams.");

    // a caption on a segment whose issue is then dismissed drops out
    p.apply(&caption("a1", "[pause]")).unwrap();
    assert_eq!(parse_strict(&p.export_webvtt(AnnotationKind::Caption)).unwrap().len(), 1);
    p.apply(&rec(Mutation::RemoveAnnotation { entry_id: "ann-3".into() })).unwrap();
    p.apply(&rec(Mutation::DismissIssue { issue_id: "auto-a1".into() })).unwrap();
    assert_eq!(p.export_webvtt(AnnotationKind::Caption), "WEBVTT\n");
}

#[test]
fn preview_schedule_groups_descriptions() {
    let mut p = fresh();
    p.apply(&describe("v2", "First.", Some(30.0))).unwrap();
    p.apply(&describe("v2", "Second.", Some(30.0))).unwrap();
    p.apply(&describe("v3", "Oven.", None)).unwrap();
    p.apply(&caption("a5", "[timer]")).unwrap();
    let events = p.preview_schedule();
    let summary: Vec<(f64, &PreviewAction)> = events.iter().map(|e| (e.at, &e.action)).collect();
    let speak = |t: &str| PreviewAction::Speak { text: t.into() };
    assert_eq!(
        summary,
        vec![
            (30.0, &PreviewAction::PauseVideo),
            (30.0, &speak("First.")),
            (30.0, &speak("Second.")),
            (30.0, &PreviewAction::ResumeVideo),
            (35.4, &PreviewAction::ShowCaption { text: "[timer]".into(), until: 48.0 }),
            (36.0, &PreviewAction::PauseVideo),
            (36.0, &speak("Oven.")),
            (36.0, &PreviewAction::ResumeVideo),
        ]
    );
}

#[test]
fn caption_precedes_description_at_same_time() {
    let mut p = fresh();
    p.apply(&describe("v4", "Plated cake.", Some(48.0))).unwrap();
    p.apply(&caption("a6", "fresh dessert")).unwrap();
    let events = p.preview_schedule();
    assert!(matches!(events[0].action, PreviewAction::ShowCaption { .. }));
    assert_eq!(events[1].action, PreviewAction::PauseVideo);
    assert!(events.iter().all(|e| e.at == 48.0));
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("demo.xa11y.json");
    let mut p = fresh();
    p.apply(&describe("v2", "Butter browns.", None)).unwrap();
    save_project(&path, &p).unwrap();
    let loaded = load_project(&path).unwrap();
    assert_eq!(loaded, p);
    assert_eq!(loaded.to_json(), std::fs::read_to_string(&path).unwrap());
    // no temp files left behind
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn future_and_truncated_files() {
    let text = fresh().to_json();
    let future = text.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
    assert!(matches!(Project::from_json(&future), Err(ProjectError::VersionUnsupported { found: 2, supported: 1 })));
    assert!(matches!(Project::from_json(&text[..text.len() / 2]), Err(ProjectError::FormatError(_))));
    assert!(matches!(Project::from_json("{}"), Err(ProjectError::FormatError(_))));
}

#[test]
fn mutation_records_serialize_flat() {
    let r = describe("v2", "x", None);
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["op"], "add_annotation");
    assert_eq!(json["kind"], "audio_description");
    assert_eq!(serde_json::from_value::<MutationRecord>(json).unwrap(), r);
}

fn any_mutation() -> impl Strategy<Value = MutationRecord> {
    let segment = prop::sample::select(vec!["v0", "v1", "v2", "v3", "v4", "a1", "a3", "a5", "a7", "a0"]);
    let issue = prop::sample::select(vec!["auto-v1", "auto-v2", "auto-a1", "auto-a5", "auto-a7", "manual-v0", "manual-v4"]);
    let entry = (1u64..8).prop_map(|n| format!("ann-{n}"));
    let m = prop_oneof![
        (segment.clone(), any::<bool>(), "[a-z ]{0,12}").prop_map(|(s, desc, text)| {
            let kind = if desc { AnnotationKind::AudioDescription } else { AnnotationKind::Caption };
            Mutation::AddAnnotation { kind, segment_id: s.into(), text, anchor_time: None }
        }),
        (entry.clone(), "[a-z]{1,6}").prop_map(|(entry_id, text)| Mutation::EditAnnotation { entry_id, text }),
        entry.prop_map(|entry_id| Mutation::RemoveAnnotation { entry_id }),
        issue.clone().prop_map(|i| Mutation::DismissIssue { issue_id: i.into() }),
        issue.prop_map(|i| Mutation::ReopenIssue { issue_id: i.into() }),
        segment.prop_map(|s| Mutation::AddManualIssue { segment_id: s.into() }),
        prop::sample::select(vec![0.1, 0.35, 0.75, 0.9]).prop_map(|tau| Mutation::Refilter { tau }),
    ];
    (0u64..100_000, m).prop_map(|(at_ms, mutation)| MutationRecord { at_ms, mutation })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_replay_is_byte_identical(log in prop::collection::vec(any_mutation(), 0..25)) {
        let mut live = fresh();
        let mut accepted = Vec::new();
        let mut changes = 0;
        for r in &log {
            let before = live.clone();
            match live.apply(r) {
                Ok(changed) => {
                    changes += changed as u64;
                    if !changed {
                        prop_assert_eq!(&live, &before);
                    }
                    accepted.push(r.clone());
                }
                Err(_) => prop_assert_eq!(&live, &before),
            }
            // every segment still resolves to a single displayed status, and
            // an addressed segment always has an annotation
            for i in &live.issues {
                if i.status == IssueStatus::Addressed {
                    prop_assert!(live.annotations.iter().any(|a| a.segment_id == i.segment_id));
                }
            }
        }
        prop_assert_eq!(live.revision, changes);

        let log_json = serde_json::to_string(&accepted).unwrap();
        let replayed_log: Vec<MutationRecord> = serde_json::from_str(&log_json).unwrap();
        let mut replay = fresh();
        for r in &replayed_log {
            replay.apply(r).unwrap();
        }
        prop_assert_eq!(replay.to_json(), live.to_json());
        prop_assert_eq!(Project::from_json(&live.to_json()).unwrap(), live);
    }
}
