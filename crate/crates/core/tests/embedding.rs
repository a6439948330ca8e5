use proptest::prelude::*;
use xa11y_core::embedding::{
    dot, hash_token, remove_stop_words, BuiltinEmbedder, EmbeddingDocument, EmbeddingError, EmbeddingModality,
    EmbeddingProvider, FileProvider, Projection,
};
use xa11y_core::ingest::{AudioTrack, FrameSeries, HsvFrame};
use xa11y_core::segmentation::{AudioKind, AudioSegment, VisualSegment};

fn shot(frames: Vec<usize>) -> VisualSegment {
    VisualSegment { id: "v0".into(), index: 0, start: 0.0, end: frames.len() as f64, representative_frames: frames }
}

fn gap(start: f64, end: f64) -> AudioSegment {
    AudioSegment { id: "a0".into(), index: 0, start, end, kind: AudioKind::NonSpeech, transcript: String::new() }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[test]
fn disjoint_single_tokens() {
    let e = BuiltinEmbedder::new(32, 42).unwrap();
    let a = e.embed_text("a", "foil").unwrap();
    let b = e.embed_text("b", "oven").unwrap();
    let bucket = |t: &str| hash_token(t, 42) % 32;
    let sign = |t: &str| if (hash_token(t, 42) >> 32) & 1 == 1 { -1.0 } else { 1.0 };
    let expected = if bucket("foil") == bucket("oven") { sign("foil") * sign("oven") } else { 0.0 };
    assert_eq!(a.dot(&b), expected);
    assert_eq!(expected, 0.0);
}

#[test]
fn stop_word_only_text_is_zero() {
    let e = BuiltinEmbedder::new(32, 42).unwrap();
    let cleaned = remove_stop_words("and the of it is");
    assert_eq!(cleaned, "");
    assert!(e.embed_text("a0", &cleaned).unwrap().zero);
    assert_eq!(remove_stop_words("Mix the batter until it looks like this"), "mix batter looks like");
}

#[test]
fn seed_determines_vectors() {
    let frames = FrameSeries::from_rasters(1.0, vec![HsvFrame::solid(8, 8, [200, 40, 40])]).unwrap();
    let a = BuiltinEmbedder::new(32, 42).unwrap().embed_visual(&shot(vec![0]), &frames).unwrap();
    let b = BuiltinEmbedder::new(32, 42).unwrap().embed_visual(&shot(vec![0]), &frames).unwrap();
    let c = BuiltinEmbedder::new(32, 43).unwrap().embed_visual(&shot(vec![0]), &frames).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.vector, c.vector);
}

#[test]
fn audio_needs_non_speech() {
    let e = BuiltinEmbedder::new(32, 42).unwrap();
    let track = AudioTrack::new(16_000, vec![0.0; 16_000]).unwrap();
    let mut seg = gap(0.0, 1.0);
    seg.kind = AudioKind::Pause;
    assert_eq!(e.embed_audio(&seg, &track), Err(EmbeddingError::WrongKind("a0".into())));
    // digital silence carries no signal
    assert!(e.embed_audio(&gap(0.0, 1.0), &track).unwrap().zero);
}

#[test]
fn shot_without_frames_is_an_error() {
    let frames = FrameSeries::from_rasters(1.0, vec![HsvFrame::solid(2, 2, [0, 0, 0])]).unwrap();
    let e = BuiltinEmbedder::new(32, 42).unwrap();
    assert_eq!(e.embed_visual(&shot(vec![]), &frames), Err(EmbeddingError::NoFrames("v0".into())));
}

#[test]
fn file_provider_coverage_and_dims() {
    let doc = EmbeddingDocument::parse(
        r#"{"version":1,"sections":[
            {"modality":"visual","dim":2,"records":[{"segment_id":"v0","vector":[3,4]}]},
            {"modality":"audio","dim":2,"records":[{"segment_id":"a0","vector":[0,0]}]}]}"#,
    )
    .unwrap();
    let embeddings = doc.embeddings().unwrap();
    assert_eq!(embeddings[0].vector, vec![0.6, 0.8]);
    assert!(embeddings[1].zero);
    let provider = FileProvider::new(embeddings);
    let visual = vec![shot(vec![0])];
    let speech = AudioSegment {
        id: "a1".into(),
        index: 1,
        start: 1.0,
        end: 2.0,
        kind: AudioKind::Speech,
        transcript: "x".into(),
    };
    assert!(provider.check_coverage(&visual, &[gap(0.0, 1.0)]).is_ok());
    assert_eq!(
        provider.check_coverage(&visual, &[gap(0.0, 1.0), speech]),
        Err(EmbeddingError::MissingSegment(vec!["a1".into()]))
    );

    let single = EmbeddingDocument::parse(r#"{"version":1,"modality":"text","dim":3,"records":[{"segment_id":"a1","vector":[1,0]}]}"#).unwrap();
    assert!(matches!(single.embeddings(), Err(EmbeddingError::DimensionMismatch { expected: 3, found: 2, .. })));
    assert_eq!(single.sections[0].modality, EmbeddingModality::Text);
    assert!(EmbeddingDocument::parse(r#"{"version":2,"sections":[]}"#).is_err());
}

proptest! {
    #[test]
    fn visual_embeddings_unit_norm(rgb in prop::collection::vec(any::<u8>(), 3 * 16), dim in 2usize..80, seed in any::<u64>()) {
        let frame = HsvFrame::from_rgb(4, 4, &rgb).unwrap();
        let frames = FrameSeries::from_rasters(1.0, vec![frame]).unwrap();
        let e = BuiltinEmbedder::new(dim, seed).unwrap().embed_visual(&shot(vec![0]), &frames).unwrap();
        prop_assert_eq!(e.dim(), dim);
        prop_assert!(e.zero || (norm(&e.vector) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn text_embeddings_unit_norm(words in prop::collection::vec("[a-z]{1,8}", 0..12), seed in any::<u64>()) {
        let e = BuiltinEmbedder::new(32, seed).unwrap().embed_text("a0", &words.join(" ")).unwrap();
        prop_assert!(e.zero || (norm(&e.vector) - 1.0).abs() < 1e-9);
        prop_assert_eq!(e.zero, norm(&e.vector) == 0.0);
    }

    #[test]
    fn audio_embeddings_unit_norm(freq in 50.0f64..7000.0, amp in 0.01f64..0.9, seed in any::<u64>()) {
        let samples: Vec<f32> = (0..8000).map(|i| (amp * (std::f64::consts::TAU * freq * i as f64 / 16000.0).sin()) as f32).collect();
        let track = AudioTrack::new(16_000, samples).unwrap();
        let e = BuiltinEmbedder::new(32, seed).unwrap().embed_audio(&gap(0.0, 0.5), &track).unwrap();
        prop_assert!(!e.zero);
        prop_assert!((norm(&e.vector) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn wide_projection_preserves_dot_products(
        x in prop::collection::vec(-1.0f64..1.0, 48),
        y in prop::collection::vec(-1.0f64..1.0, 48),
        extra in 0usize..40,
        seed in any::<u64>(),
    ) {
        let p = Projection::new(48, 48 + extra, seed, 1);
        prop_assert!((dot(&p.apply(&x), &p.apply(&y)) - dot(&x, &y)).abs() < 1e-9);
    }

    #[test]
    fn narrow_projection_is_a_contraction(x in prop::collection::vec(-1.0f64..1.0, 48), dim in 2usize..48, seed in any::<u64>()) {
        let p = Projection::new(48, dim, seed, 1);
        prop_assert!(norm(&p.apply(&x)) <= norm(&x) + 1e-9);
    }
}
