use std::collections::HashMap;

use proptest::prelude::*;

use super::*;
use crate::data::Direction;
use crate::Error;

const FIXTURE_HYP: &str = include_str!("../../tests/fixtures/mt50.hyp");
const FIXTURE_REF: &str = include_str!("../../tests/fixtures/mt50.ref");

fn lines(s: &str) -> Vec<&str> {
    s.lines().collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// Every substring of length n, counted, without any library help.
fn brute_chrf(hyp: &str, reference: &str) -> f64 {
    let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<Vec<char>>();
    let (h, r) = (strip(hyp), strip(reference));
    let count = |cs: &[char], n: usize| {
        let mut m: HashMap<String, usize> = HashMap::new();
        if cs.len() >= n {
            for i in 0..=cs.len() - n {
                *m.entry(cs[i..i + n].iter().collect()).or_default() += 1;
            }
        }
        m
    };
    let (mut p, mut rc, mut orders) = (0.0, 0.0, 0.0);
    for n in 1..=6 {
        let (hm, rm) = (count(&h, n), count(&r, n));
        let ht: usize = hm.values().sum();
        let rt: usize = rm.values().sum();
        if ht == 0 || rt == 0 {
            continue;
        }
        let matched: usize = hm.iter().map(|(g, c)| (*c).min(*rm.get(g).unwrap_or(&0))).sum();
        p += matched as f64 / ht as f64;
        rc += matched as f64 / rt as f64;
        orders += 1.0;
    }
    let (p, rc) = (p / orders, rc / orders);
    if p + rc == 0.0 {
        0.0
    } else {
        100.0 * 5.0 * p * rc / (4.0 * p + rc)
    }
}

#[test]
fn intl_tokenization_examples() {
    assert_eq!(tokenize_intl("Hello, world!"), "Hello , world !");
    assert_eq!(tokenize_intl("Il 3.5% dell'economia €10."), "Il 3.5 % dell ' economia € 10.");
    assert_eq!(
        tokenize_intl("$20 (nota) \"citazione\" U.S. 1,000 e-mail"),
        "$ 20 ( nota ) \" citazione \" U . S . 1,000 e - mail"
    );
}

#[test]
fn bleu_of_identical_corpus_is_100() {
    let x = ["a small test .", "another line here", "x"];
    assert!(close(bleu(&x, &x).unwrap().score, 100.0));
}

#[test]
fn bleu_needs_a_four_gram_somewhere() {
    let x = ["a b c", "d e"];
    assert_eq!(bleu(&x, &x).unwrap().score, 0.0);
    assert!(close(chrf(&x, &x).unwrap().score, 100.0));
}

#[test]
fn bleu_hand_count_example() {
    let s = bleu(&["the cat sat on the mat"], &["the cat is on the mat"]).unwrap();
    assert_eq!(s.counts, [5, 3, 1, 0]);
    assert_eq!(s.totals, [6, 5, 4, 3]);
    assert_eq!(s.bp, 1.0);
    // p4 has no matches: exponential smoothing gives 1/(2·3).
    let hand = ((500.0f64 / 6.0).ln() + 60.0f64.ln() + 25.0f64.ln() + (100.0f64 / 6.0).ln()) / 4.0;
    assert!(close(s.score, hand.exp()));
    assert!(close(s.score, 37.99178428257963));
}

#[test]
fn bleu_without_smoothing_collapses_on_zero_four_gram_matches() {
    let cfg = BleuConfig {
        smoothing: Smoothing::None,
        ..BleuConfig::default()
    };
    let s = bleu_with(&["the cat sat on the mat"], &["the cat is on the mat"], &cfg).unwrap();
    assert_eq!(s.score, 0.0);
}

#[test]
fn bleu_matches_reference_scorer_on_fixture() {
    let (h, r) = (lines(FIXTURE_HYP), lines(FIXTURE_REF));
    assert_eq!((h.len(), r.len()), (50, 50));
    let s = bleu(&h, &r).unwrap();
    assert_eq!(s.counts, [677, 572, 480, 401]);
    assert_eq!(s.totals, [717, 668, 619, 570]);
    assert_eq!((s.sys_len, s.ref_len), (717, 786));
    assert!(close(s.score, 74.01730471213814));
    let none = BleuConfig {
        smoothing: Smoothing::None,
        ..BleuConfig::default()
    };
    assert!(close(bleu_with(&h, &r, &none).unwrap().score, 74.01730471213814));
    assert!(close(bleu(&h[..5], &r[..5]).unwrap().score, 70.50403269699746));
}

#[test]
fn bleu_punctuation_cases_match_reference_scorer() {
    assert!(close(bleu(&["Hello, world!"], &["Hello world."]).unwrap().score, 18.99589214128981));
    assert!(close(
        bleu(&["Il 3.5% dell'economia €10."], &["Il 3.5 % dell' economia € 10 ."]).unwrap().score,
        74.20884818558928
    ));
}

#[test]
fn bleu_signature_is_labelled() {
    assert_eq!(BleuConfig::default().signature(), "nrefs:1|case:mixed|eff:no|tok:intl|smooth:exp");
}

#[test]
fn metric_length_mismatch_is_contract_error() {
    assert!(matches!(bleu(&["a", "b"], &["a"]), Err(Error::Contract(_))));
    assert!(matches!(chrf(&["a"], &["a", "b"]), Err(Error::Contract(_))));
    let empty: [&str; 0] = [];
    assert!(matches!(bleu(&empty, &empty), Err(Error::Contract(_))));
}

#[test]
fn chrf_examples() {
    assert!(close(chrf(&["aaa"], &["zzz"]).unwrap().score, 0.0));
    let x = ["identical text", "à è ì"];
    assert!(close(chrf(&x, &x).unwrap().score, 100.0));
    let brute = brute_chrf("abcd", "abce");
    assert!(close(brute, 47.91666666666667));
    assert!(close(chrf(&["abcd"], &["abce"]).unwrap().score, brute));
    assert!(close(
        chrf(&["the cat sat on the mat"], &["the cat is on the mat"]).unwrap().score,
        64.5779420625287
    ));
}

#[test]
fn chrf_matches_reference_scorer_on_fixture() {
    let (h, r) = (lines(FIXTURE_HYP), lines(FIXTURE_REF));
    assert!(close(chrf(&h, &r).unwrap().score, 83.75030296507458));
    assert!(close(chrf(&h[..5], &r[..5]).unwrap().score, 82.17161231496407));
}

#[test]
fn scores_are_normalization_stable() {
    let composed = ["perché così è"];
    let decomposed = ["perche\u{301} cosi\u{300} e\u{300}"];
    let r = ["perché così"];
    assert_eq!(bleu(&composed, &r).unwrap().score, bleu(&decomposed, &r).unwrap().score);
    assert_eq!(chrf(&composed, &r).unwrap().score, chrf(&decomposed, &r).unwrap().score);
}

#[test]
fn external_stub_means() {
    let hyps = ["a", "b", "c"];
    let srcs = ["x", "y", "z"];
    let s = score_external(&hyps, &srcs, None, &StubScorer::constant("comet", 0.5)).unwrap();
    assert_eq!(s.value, MetricValue::Score(0.5));
    assert_eq!(s.segments, vec![0.5; 3]);
    let s = score_external(&hyps, &srcs, None, &StubScorer::fixed("cometkiwi", vec![0.2, 0.4, 0.9])).unwrap();
    assert!(close(s.value.score().unwrap(), 0.5));
    assert_eq!(s.scorer, "cometkiwi");
}

#[test]
fn external_reference_based_without_references_is_contract_error() {
    let scorer = StubScorer::constant("bleurt", 0.1).reference_based(true);
    assert!(matches!(score_external(&["a"], &["b"], None, &scorer), Err(Error::Contract(_))));
    assert!(score_external(&["a"], &["b"], Some(&["c"][..]), &scorer).is_ok());
}

#[test]
fn external_failure_is_absent_not_zero() {
    let s = score_external(&["a"], &["b"], None, &StubScorer::failing("metricx")).unwrap();
    assert!(matches!(s.value, MetricValue::Absent(_)));
    let bad = StubScorer::fixed("comet", vec![0.1, 0.2]);
    let s = score_external(&["a"], &["b"], None, &bad).unwrap();
    assert!(matches!(s.value, MetricValue::Absent(_)));

    let mut rep = MetricReport::new("sys", Direction::EnIt);
    rep.set("bleu", MetricValue::Score(12.0)).set("metricx", s.value);
    let t = render_report(&[rep]);
    assert_eq!(t.rows, vec![vec!["sys".to_string(), "12.00".into(), "-".into()]]);
    assert!(t.notes.iter().any(|n| n.contains("absent")));
}

#[test]
fn report_one_system_bleu_both_directions() {
    let mut a = MetricReport::new("opus-mt-big", Direction::EnIt);
    a.set("bleu", MetricValue::Score(30.0));
    let mut b = MetricReport::new("opus-mt-big", Direction::ItEn);
    b.set("bleu", MetricValue::Score(33.25));
    let t = render_report(&[b, a]);
    assert_eq!(t.header, vec!["system", "bleu(↑) en→it", "bleu(↑) it→en"]);
    assert_eq!(t.rows, vec![vec!["opus-mt-big", "30.00", "33.25"]]);
    assert_eq!(t.to_tsv().lines().count(), 2);
}

#[test]
fn report_marks_metricx_as_lower_is_better() {
    let mut r = MetricReport::new("x", Direction::EnIt);
    r.set("metricx", MetricValue::Score(3.0)).set("qemetricx", MetricValue::Score(2.0));
    r.set("comet", MetricValue::Score(0.8));
    let t = render_report(&[r]);
    assert_eq!(t.header[1], "metricx(↓) en→it");
    assert_eq!(t.header[2], "qemetricx(↓) en→it");
    assert_eq!(t.header[3], "comet(↑) en→it");
}

#[test]
fn report_sorts_systems_with_dieta_variants_last() {
    let names = [
        "DIETA+nosynth",
        "opus-mt-big",
        "DIETA-b5",
        "mBART",
        "DIETA",
        "DIETA+allsynth",
        "Gemma-2B",
        "DIETA+BT",
        "LLaMAntino-8B",
        "DIETA+cont",
        "NLLB-600M",
    ];
    let reports: Vec<_> = names
        .iter()
        .map(|n| {
            let mut r = MetricReport::new(n, Direction::EnIt);
            r.set("bleu", MetricValue::Score(1.0));
            r
        })
        .collect();
    let t = render_report(&reports);
    let order: Vec<&str> = t.rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(
        order,
        [
            "Gemma-2B",
            "LLaMAntino-8B",
            "mBART",
            "NLLB-600M",
            "opus-mt-big",
            "DIETA",
            "DIETA-b5",
            "DIETA+BT",
            "DIETA+cont",
            "DIETA+nosynth",
            "DIETA+allsynth",
        ]
    );
    assert!(t.notes.iter().any(|n| n.contains(BEAM_SUFFIX)));
    let text = t.to_text();
    assert!(text.lines().nth(2).unwrap().starts_with("Gemma-2B"));
}

fn corpus() -> impl Strategy<Value = Vec<(String, String)>> {
    let sent = "[a-eè ,.!0-9]{0,24}";
    prop::collection::vec((sent, sent), 1..8)
}

proptest! {
    #[test]
    fn metrics_are_permutation_invariant(pairs in corpus(), seed in any::<u64>()) {
        let (h, r): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let perm = crate::data::permutation(pairs.len(), seed);
        let hp: Vec<_> = perm.iter().map(|&i| h[i].clone()).collect();
        let rp: Vec<_> = perm.iter().map(|&i| r[i].clone()).collect();
        prop_assert!((bleu(&h, &r).unwrap().score - bleu(&hp, &rp).unwrap().score).abs() < 1e-9);
        prop_assert!((chrf(&h, &r).unwrap().score - chrf(&hp, &rp).unwrap().score).abs() < 1e-9);
    }

    #[test]
    fn metrics_of_identical_corpus_are_100(x in prop::collection::vec("[a-z]{1,6}( [a-z.,]{1,6}){3,6}", 1..6)) {
        prop_assert!((bleu(&x, &x).unwrap().score - 100.0).abs() < 1e-9);
        prop_assert!((chrf(&x, &x).unwrap().score - 100.0).abs() < 1e-9);
    }

    #[test]
    fn metrics_stay_in_range(pairs in corpus()) {
        let (h, r): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let b = bleu(&h, &r).unwrap().score;
        let c = chrf(&h, &r).unwrap().score;
        prop_assert!((0.0..=100.0 + 1e-9).contains(&b));
        prop_assert!((0.0..=100.0 + 1e-9).contains(&c));
    }
}
