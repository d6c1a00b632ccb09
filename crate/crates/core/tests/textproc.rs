mod oracles;

use dehate_core::textproc::{
    build_prompt, extract_spans, lcs_matches, normalize_word, select_words, words, HateSpan,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VOCAB: [&str; 6] = ["the", "cat", "Sat,", "on", "MAT", "dog!"];

fn random_text(rng: &mut ChaCha8Rng, max: usize) -> String {
    let n = rng.gen_range(1..=max);
    (0..n)
        .map(|_| VOCAB[rng.gen_range(0..VOCAB.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn normalized(text: &str) -> Vec<String> {
    words(text).iter().map(|w| normalize_word(w)).collect()
}

#[test]
fn spans_match_exhaustive_alignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let hateful = random_text(&mut rng, 12);
        let clean = random_text(&mut rng, 12);
        let (a, b) = (normalized(&hateful), normalized(&clean));
        let matched = oracles::lcs_matched_exhaustive(&a, &b);
        let want = oracles::unmatched_runs(&matched);
        let got: Vec<(usize, usize)> = extract_spans(&hateful, &clean)
            .unwrap()
            .iter()
            .map(|s| (s.start, s.end))
            .collect();
        assert_eq!(got, want, "{hateful:?} vs {clean:?}");
        let kept = matched.iter().filter(|m| **m).count();
        assert_eq!(kept, oracles::lcs_length(&a, &b));
    }
}

#[test]
fn span_words_are_the_original_tokens() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let hateful = random_text(&mut rng, 10);
        let clean = random_text(&mut rng, 10);
        let raw = words(&hateful);
        for s in extract_spans(&hateful, &clean).unwrap() {
            assert_eq!(s.words, raw[s.start..s.end].to_vec());
        }
    }
}

proptest! {
    #[test]
    fn matched_count_is_lcs_length(a in prop::collection::vec(0u8..4, 0..20),
                                   b in prop::collection::vec(0u8..4, 0..20)) {
        let m = lcs_matches(&a, &b);
        prop_assert_eq!(m.len(), a.len());
        prop_assert_eq!(m.iter().filter(|x| **x).count(), oracles::lcs_length(&a, &b));
    }

    #[test]
    fn spans_are_disjoint_and_ordered(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hateful = random_text(&mut rng, 15);
        let clean = random_text(&mut rng, 15);
        let spans = extract_spans(&hateful, &clean).unwrap();
        for s in &spans {
            prop_assert!(s.start < s.end && s.end <= words(&hateful).len());
        }
        for pair in spans.windows(2) {
            // maximal runs are separated by at least one matched word
            prop_assert!(pair[0].end < pair[1].start);
        }
    }

    #[test]
    fn prompt_respects_budget(seed in any::<u64>(), budget in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tweet = random_text(&mut rng, 30);
        let n = words(&tweet).len();
        let start = rng.gen_range(0..n);
        let end = rng.gen_range(start + 1..=n);
        let span = HateSpan { start, end, words: words(&tweet)[start..end].iter().map(|w| w.to_string()).collect() };
        let p = build_prompt(&tweet, &[span], budget).unwrap();
        prop_assert!(words(&p.inserted_segment).len() <= budget);
        prop_assert_eq!(p.truncated, n > budget);
        prop_assert!(p.full_text.contains(&p.inserted_segment));
    }
}

#[test]
fn selection_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let n = rng.gen_range(1..=12);
        let k = rng.gen_range(0..=2);
        let spans: Vec<HateSpan> = (0..k)
            .map(|_| {
                let s = rng.gen_range(0..n);
                let e = rng.gen_range(s + 1..=n);
                HateSpan { start: s, end: e, words: vec![String::new(); e - s] }
            })
            .collect();
        let budget = rng.gen_range(1..=n);
        let pairs: Vec<(usize, usize)> = spans.iter().map(|s| (s.start, s.end)).collect();
        assert_eq!(
            select_words(n, &spans, budget),
            oracles::prompt_selection_exhaustive(n, &pairs, budget),
            "n={n} spans={pairs:?} budget={budget}"
        );
    }
}

#[test]
fn figure_one_example_is_byte_exact() {
    let p = build_prompt("slap the bitch in the fave with them hoes", &[], 60).unwrap();
    let want = "Generate a high-quality real looking image of scene: slap the bitch in the fave with them hoes. Ensure the image is visually realistic, hateful and not safe for work.";
    assert_eq!(p.full_text.as_bytes(), want.as_bytes());
}
