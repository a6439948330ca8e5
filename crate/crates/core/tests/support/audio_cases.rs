//! Hand-built word timings and the audio segments they must produce.
#![allow(dead_code)]

use xa11y_core::ingest::WordTiming;
use xa11y_core::segmentation::AudioKind;
use AudioKind::{NonSpeech as N, Pause as P, Speech as S};

pub fn w(word: &str, start: f64, end: f64) -> WordTiming {
    WordTiming::new(word, start, end)
}

pub struct Case {
    pub name: &'static str,
    pub words: Vec<WordTiming>,
    pub duration: f64,
    pub expected: Vec<(AudioKind, f64, f64)>,
}

pub fn cases() -> Vec<Case> {
    vec![
        Case { name: "empty long", words: vec![], duration: 10.0, expected: vec![(N, 0.0, 10.0)] },
        Case { name: "empty medium", words: vec![], duration: 1.0, expected: vec![(P, 0.0, 1.0)] },
        Case { name: "empty very short", words: vec![], duration: 0.3, expected: vec![(P, 0.0, 0.3)] },
        Case { name: "empty exactly 2 s", words: vec![], duration: 2.0, expected: vec![(N, 0.0, 2.0)] },
        Case { name: "single word fills", words: vec![w("a", 0.0, 1.0)], duration: 1.0, expected: vec![(S, 0.0, 1.0)] },
        Case {
            name: "short edges absorbed",
            words: vec![w("a", 0.2, 0.8)],
            duration: 1.0,
            expected: vec![(S, 0.0, 1.0)],
        },
        Case {
            name: "leading gap exactly 0.5",
            words: vec![w("a", 0.5, 1.0)],
            duration: 1.0,
            expected: vec![(P, 0.0, 0.5), (S, 0.5, 1.0)],
        },
        Case {
            name: "leading gap just under 0.5",
            words: vec![w("a", 0.49, 1.0)],
            duration: 1.0,
            expected: vec![(S, 0.0, 1.0)],
        },
        Case {
            name: "inner gap exactly 2.0",
            words: vec![w("a", 0.0, 1.0), w("b", 3.0, 4.0)],
            duration: 4.0,
            expected: vec![(S, 0.0, 1.0), (N, 1.0, 3.0), (S, 3.0, 4.0)],
        },
        Case {
            name: "inner gap just under 2.0",
            words: vec![w("a", 0.0, 1.0), w("b", 2.99, 4.0)],
            duration: 4.0,
            expected: vec![(S, 0.0, 1.0), (P, 1.0, 2.99), (S, 2.99, 4.0)],
        },
        Case {
            name: "inner gap 0.4 merges",
            words: vec![w("a", 0.0, 1.0), w("b", 1.4, 2.0)],
            duration: 2.0,
            expected: vec![(S, 0.0, 2.0)],
        },
        Case {
            name: "inner gap exactly 0.5",
            words: vec![w("a", 0.0, 1.0), w("b", 1.5, 2.0)],
            duration: 2.0,
            expected: vec![(S, 0.0, 1.0), (P, 1.0, 1.5), (S, 1.5, 2.0)],
        },
        Case {
            name: "trailing gap exactly 2.0",
            words: vec![w("a", 0.0, 1.0)],
            duration: 3.0,
            expected: vec![(S, 0.0, 1.0), (N, 1.0, 3.0)],
        },
        Case {
            name: "trailing pause",
            words: vec![w("a", 0.0, 1.0)],
            duration: 1.7,
            expected: vec![(S, 0.0, 1.0), (P, 1.0, 1.7)],
        },
        Case {
            name: "trailing 0.3 absorbed",
            words: vec![w("a", 0.0, 1.0)],
            duration: 1.3,
            expected: vec![(S, 0.0, 1.3)],
        },
        Case {
            name: "long leading gap",
            words: vec![w("a", 5.0, 6.0)],
            duration: 6.0,
            expected: vec![(N, 0.0, 5.0), (S, 5.0, 6.0)],
        },
        Case {
            name: "leading pause",
            words: vec![w("a", 1.0, 2.0)],
            duration: 2.0,
            expected: vec![(P, 0.0, 1.0), (S, 1.0, 2.0)],
        },
        Case {
            name: "mixed runs",
            words: vec![w("a", 0.0, 1.0), w("b", 1.2, 2.0), w("c", 2.6, 3.0), w("d", 6.0, 7.0)],
            duration: 7.0,
            expected: vec![(S, 0.0, 2.0), (P, 2.0, 2.6), (S, 2.6, 3.0), (N, 3.0, 6.0), (S, 6.0, 7.0)],
        },
        Case {
            // 0.6 - 0.1 is 0.49999999999999994 in binary floating point
            name: "float tie at 0.5",
            words: vec![w("a", 0.0, 0.1), w("b", 0.6, 0.7)],
            duration: 0.7,
            expected: vec![(S, 0.0, 0.1), (P, 0.1, 0.6), (S, 0.6, 0.7)],
        },
        Case {
            // 2.3 - 0.3 is 1.9999999999999998
            name: "float tie at 2.0",
            words: vec![w("a", 0.0, 0.3), w("b", 2.3, 2.5)],
            duration: 2.5,
            expected: vec![(S, 0.0, 0.3), (N, 0.3, 2.3), (S, 2.3, 2.5)],
        },
        Case {
            name: "abutting words",
            words: vec![w("a", 0.0, 0.5), w("b", 0.5, 1.0), w("c", 1.0, 1.5)],
            duration: 1.5,
            expected: vec![(S, 0.0, 1.5)],
        },
        Case {
            name: "both edges long",
            words: vec![w("a", 3.0, 4.0)],
            duration: 8.0,
            expected: vec![(N, 0.0, 3.0), (S, 3.0, 4.0), (N, 4.0, 8.0)],
        },
        Case {
            name: "pause then non-speech",
            words: vec![w("a", 0.0, 1.0), w("b", 1.8, 2.0), w("c", 5.0, 5.5)],
            duration: 5.5,
            expected: vec![(S, 0.0, 1.0), (P, 1.0, 1.8), (S, 1.8, 2.0), (N, 2.0, 5.0), (S, 5.0, 5.5)],
        },
    ]
}

