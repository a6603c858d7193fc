use super::*;
use proptest::prelude::*;
use std::sync::atomic::{AtomicUsize, Ordering};

fn pair(en: &str, it: &str) -> SentencePair {
    SentencePair::new(en, it, "test").unwrap()
}

struct Scripted {
    replies: Vec<Result<String>>,
    calls: AtomicUsize,
}

impl Scripted {
    fn new(replies: Vec<Result<String>>) -> Self {
        Scripted {
            replies,
            calls: AtomicUsize::new(0),
        }
    }
}

impl Judge for Scripted {
    fn ask(&self, _prompt: &str) -> Result<String> {
        let i = self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.replies[i.min(self.replies.len() - 1)] {
            Ok(s) => Ok(s.clone()),
            Err(_) => Err(crate::Error::Client("down".into())),
        }
    }
}

#[test]
fn pairs_validate_and_trim_only_newlines() {
    let p = SentencePair::new(" Hello \n", "Ciao\r\n", "opus").unwrap();
    assert_eq!(p.english, " Hello ");
    assert_eq!(p.italian, "Ciao");
    assert!(SentencePair::new("  ", "Ciao", "x").is_err());
    assert!(SentencePair::new("a\nb", "Ciao", "x").is_err());
}

#[test]
fn templates_are_byte_exact() {
    let p = pair("Hello", "Ciao");
    let s: Vec<FormattedSample> = format_bidirectional([&p]).collect();
    assert_eq!(s[0].text, "ENG: Hello IT: Ciao");
    assert_eq!(s[0].direction, Direction::EnIt);
    assert_eq!(s[1].text, "IT: Ciao ENG: Hello");
    assert_eq!(s[1].direction, Direction::ItEn);
    let p = pair("It's 5 o'clock.", "Sono le 5.");
    assert_eq!(format_sample(&p, Direction::ItEn).text, "IT: Sono le 5. ENG: It's 5 o'clock.");
}

#[test]
fn bidirectional_doubles_every_size() {
    for n in [0usize, 1, 1000] {
        let pairs: Vec<SentencePair> = (0..n).map(|i| pair(&format!("e{i}"), &format!("i{i}"))).collect();
        assert_eq!(format_bidirectional(&pairs).count(), 2 * n);
    }
}

#[test]
fn synthetic_pairs_train_one_direction() {
    let mut p = pair("HELLO", "ciao");
    p.synthetic_side = Some(Lang::English);
    let s = format_pair(&p);
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].text, "ENG: HELLO IT: ciao");
    p.synthetic_side = None;
    assert_eq!(format_pair(&p).len(), 2);
}

#[test]
fn dedup_keeps_first_occurrences() {
    let (a, b, c) = (pair("a", "b"), pair("a", "b"), pair("c", "d"));
    let (out, dups) = dedup(vec![a.clone(), b, c.clone()]);
    assert_eq!(out, vec![a.clone(), c.clone()]);
    assert_eq!(dups, 1);
    let (again, dups) = dedup(out.clone());
    assert_eq!((again, dups), (out, 0));
    // Case differences are not duplicates.
    assert_eq!(dedup(vec![pair("A", "b"), pair("a", "b")]).0.len(), 2);
}

#[test]
fn planted_duplicates_are_removed_exactly() {
    let mut pairs: Vec<SentencePair> = (0..7000).map(|i| pair(&format!("en {i}"), &format!("it {i}"))).collect();
    for k in 0..3000 {
        let src = pairs[(k * 7) % 7000].clone();
        pairs.push(src);
    }
    shuffle(&mut pairs, 9);
    let (out, dups) = dedup(pairs);
    assert_eq!((out.len(), dups), (7000, 3000));
}

#[test]
fn filter_prompt_is_fixed() {
    let p = pair("The cat.", "Il gatto.");
    let prompt = build_filter_prompt(&p);
    assert!(prompt.starts_with(
        "Given the English and Italian sentences below, are they translations of each other? Answer with yes or no only."
    ));
    assert_eq!(prompt, format!("{FILTER_INSTRUCTION}\nEnglish: The cat.\nItalian: Il gatto."));
    assert_eq!(prompt, build_filter_prompt(&p));
}

#[test]
fn reply_normalization() {
    assert_eq!(parse_reply("yes"), Some(true));
    assert_eq!(parse_reply("Yes."), Some(true));
    assert_eq!(parse_reply("  YES, they are"), Some(true));
    assert_eq!(parse_reply("No."), Some(false));
    assert_eq!(parse_reply("no!"), Some(false));
    assert_eq!(parse_reply("maybe"), None);
    assert_eq!(parse_reply("yesterday"), None);
    assert_eq!(parse_reply(""), None);
}

#[test]
fn judge_decision_table() {
    let policy = RetryPolicy::immediate();
    let run = |replies: Vec<Result<String>>| {
        let judge = Scripted::new(replies);
        let out = llm_filter(vec![pair("a", "b")], &judge, &policy, 1);
        (out, judge.calls.load(Ordering::SeqCst))
    };
    let (out, calls) = run(vec![Ok("yes".into())]);
    let out = out.unwrap();
    assert_eq!((out.kept.len(), calls), (1, 1));

    let (out, calls) = run(vec![Ok("No.".into())]);
    let out = out.unwrap();
    assert_eq!((out.kept.len(), calls), (0, 1));
    assert_eq!(out.rejections[0].reason, RejectReason::No);
    assert_eq!(out.rejections[0].raw_reply, "No.");

    let (out, calls) = run(vec![Ok("maybe".into())]);
    let out = out.unwrap();
    assert_eq!((out.kept.len(), calls), (0, 2));
    assert_eq!(out.rejections[0].reason, RejectReason::Malformed);

    let (out, calls) = run(vec![Ok("maybe".into()), Ok("yes".into())]);
    assert_eq!((out.unwrap().kept.len(), calls), (1, 2));

    let (out, calls) = run(vec![Err(crate::Error::Client(String::new())), Ok("yes".into())]);
    assert_eq!((out.unwrap().kept.len(), calls), (1, 2));

    let (out, calls) = run(vec![Err(crate::Error::Client(String::new()))]);
    assert_eq!(calls, 2);
    match out {
        Err(crate::Error::Client(msg)) => assert!(msg.contains("pair 0"), "{msg}"),
        other => panic!("expected client error, got {other:?}"),
    }
}

#[test]
fn filter_preserves_order_with_workers() {
    let pairs: Vec<SentencePair> = (0..50).map(|i| pair(&format!("s{i}"), &format!("t{i}"))).collect();
    let judge = Stub::Reject("s1".into());
    let out = llm_filter(pairs.clone(), &judge, &RetryPolicy::immediate(), 4).unwrap();
    let expected: Vec<SentencePair> = pairs.iter().filter(|p| !p.english.starts_with("s1")).cloned().collect();
    assert_eq!(out.kept, expected);
    let positions: Vec<usize> = out.rejections.iter().map(|r| r.position).collect();
    assert_eq!(positions, vec![1, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19]);
}

#[test]
fn shuffle_matches_reference_permutation() {
    let mut v: Vec<u32> = (1..=10).collect();
    shuffle(&mut v, 42);
    assert_eq!(v, vec![1, 2, 7, 9, 4, 10, 6, 8, 5, 3]);
    let mut rng = XorShift64Star::new(0);
    assert_eq!(rng.next_u64(), 0x7bbc_b40d_5506_82d0);
    assert_eq!(rng.next_u64(), 0xde7f_e413_d00c_c9fd);
    assert_eq!(permutation(10, 42), permutation(10, 42));
    assert_ne!(permutation(10, 42), permutation(10, 43));
}

#[test]
fn file_shuffle_matches_memory_shuffle() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("in.txt"), dir.path().join("out.txt"));
    let lines: Vec<String> = (0..100).map(|i| format!("line {i} ü")).collect();
    write_lines(&a, &lines).unwrap();
    assert_eq!(shuffle_file(&a, &b, 7).unwrap(), 100);
    let mut expected = lines.clone();
    shuffle(&mut expected, 7);
    assert_eq!(read_lines(&b).unwrap(), expected);
}

#[test]
fn backtranslation_orients_synthetic_side_as_source() {
    let mono: Vec<String> = (0..100).map(|i| format!("frase numero {i}")).collect();
    let out = backtranslate(&mono, &Stub::Upper, Direction::ItEn, &RetryPolicy::immediate(), 3);
    assert_eq!(out.pairs.len(), 100);
    for (p, line) in out.pairs.iter().zip(&mono) {
        assert_eq!(p.english, line.to_uppercase());
        assert_eq!(&p.italian, line);
        assert_eq!(p.source_tag, SYNTHETIC_TAG);
        assert_eq!(p.synthetic_side, Some(Lang::English));
        assert_eq!(format_pair(p)[0].direction, Direction::EnIt);
    }
    let en = backtranslate(&["Hello"], &Stub::Upper, Direction::EnIt, &RetryPolicy::immediate(), 1);
    assert_eq!(en.pairs[0].italian, "HELLO");
    assert_eq!(en.pairs[0].synthetic_side, Some(Lang::Italian));
    let empty: [&str; 0] = [];
    assert!(backtranslate(&empty, &Stub::Upper, Direction::ItEn, &RetryPolicy::immediate(), 1).pairs.is_empty());
}

#[test]
fn backtranslation_skips_failures() {
    let out = backtranslate(&["a", "", "b"], &Stub::Fail, Direction::ItEn, &RetryPolicy::immediate(), 1);
    assert!(out.pairs.is_empty());
    assert_eq!(out.blank, 1);
    assert_eq!(out.failures.iter().map(|f| f.position).collect::<Vec<_>>(), vec![0, 2]);
}

#[test]
fn prepare_planted_fixture() {
    let mut pairs: Vec<SentencePair> = (0..8).map(|i| pair(&format!("en {i}"), &format!("it {i}"))).collect();
    pairs.push(pairs[2].clone());
    pairs.push(pairs[5].clone());
    let judge = Stub::Reject("English: en 4\n".into());
    let out = prepare(pairs, Some(&judge), &RetryPolicy::immediate(), 1, 42).unwrap();
    assert_eq!(out.stats.input_pairs, 10);
    assert_eq!(out.stats.duplicates, 2);
    assert_eq!(out.stats.rejected_no, 1);
    assert_eq!(out.stats.kept_pairs, 7);
    assert_eq!(out.stats.output_samples, 14);
    assert_eq!(out.samples.len(), 14);
}

#[test]
fn aligned_reader_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (en, it) = (dir.path().join("en"), dir.path().join("it"));
    write_lines(&en, &["a", "b", "c"]).unwrap();
    write_lines(&it, &["x", "y"]).unwrap();
    let err = read_aligned(&en, &it, "t").unwrap_err().to_string();
    assert!(err.contains("3 lines") && err.contains("2 lines"), "{err}");
    write_lines(&it, &["x", "", "z"]).unwrap();
    let (pairs, stats) = read_aligned(&en, &it, "t").unwrap();
    assert_eq!((pairs.len(), stats.blank), (2, 1));
}

#[test]
fn tsv_round_trip_keeps_synthetic_side() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.tsv");
    let mut a = pair("Hi", "Ciao");
    a.synthetic_side = Some(Lang::Italian);
    let b = pair("Bye", "Addio");
    write_pairs_tsv(&path, &[a.clone(), b.clone()]).unwrap();
    let (back, _) = read_tsv(&path, "x").unwrap();
    assert_eq!(back, vec![a, b]);
}

proptest! {
    #[test]
    fn shuffle_preserves_multiset(v in proptest::collection::vec(0u32..50, 0..200), seed in any::<u64>()) {
        let mut s = v.clone();
        shuffle(&mut s, seed);
        let mut a = v.clone();
        a.sort();
        let mut b = s.clone();
        b.sort();
        prop_assert_eq!(a, b);
        let mut again = v.clone();
        shuffle(&mut again, seed);
        prop_assert_eq!(again, s);
    }

    #[test]
    fn pipeline_never_alters_sentences(words in proptest::collection::vec("[a-zA-Zà-ù ,.!?]{1,12}", 1..30), seed in any::<u64>()) {
        let pairs: Vec<SentencePair> = words
            .iter()
            .filter(|w| !w.trim().is_empty())
            .map(|w| pair(w, &w.chars().rev().collect::<String>()))
            .collect();
        let (unique, _) = dedup(pairs.clone());
        let out = prepare(pairs, None, &RetryPolicy::immediate(), 1, seed).unwrap();
        prop_assert_eq!(out.samples.len(), 2 * unique.len());
        let mut expected: Vec<FormattedSample> = format_bidirectional(&unique).collect();
        let mut got = out.samples.clone();
        expected.sort();
        got.sort();
        prop_assert_eq!(got, expected);
    }
}
