use proptest::collection::{btree_set, vec};
use proptest::prelude::*;

use predtext::complete::{
    simulate_word, theoretical_bound, vocabulary_bound, CompletionMetrics, CompletionOptions, Lexicon,
};
use predtext::corpus::{
    format_value, numeric_value, read_jsonl, write_jsonl, Document, EncodedDocument, KbTuple, TokenId, Vocabulary,
};
use predtext::predict::{rank_of, top_k};

fn vocab_of(words: &[String]) -> Vocabulary {
    let mut entries = words.to_vec();
    entries.extend(["<num>", "<unk>", "<eos>"].map(String::from));
    Vocabulary::from_entries(entries).unwrap()
}

fn words() -> impl Strategy<Value = Vec<String>> {
    btree_set("[abc]{1,4}", 1..12).prop_map(|s| s.into_iter().collect())
}

fn options() -> impl Strategy<Value = CompletionOptions> {
    any::<bool>().prop_map(|count_accept_key| CompletionOptions { count_accept_key })
}

/// Scores quantized to a few levels so ties are common.
fn scores(n: usize) -> impl Strategy<Value = Vec<f64>> {
    vec((0u8..4).prop_map(|q| f64::from(q) / 4.0), n)
}

proptest! {
    #[test]
    fn best_match_is_the_highest_scoring_prefix_match(
        (words, scores, prefix) in words().prop_flat_map(|w| { let n = w.len() + 3; (Just(w), scores(n), "[abc]{0,3}") })
    ) {
        let vocab = vocab_of(&words);
        let lexicon = Lexicon::new(&vocab);
        let expected = (0..vocab.len())
            .filter(|&i| !vocab.is_special(i as TokenId) && vocab.surface(i as TokenId).starts_with(&prefix))
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if scores[b] >= scores[i] => Some(b),
                _ => Some(i),
            });
        let got = lexicon.best_match(&prefix, &scores).map(|(_, id)| id as usize);
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn word_accounting_balances(
        (words, scores, target, opts) in words().prop_flat_map(|w| {
            let n = w.len() + 3;
            (Just(w), scores(n), "[abcd]{1,5}", options())
        })
    ) {
        let lexicon = Lexicon::new(&vocab_of(&words));
        let o = simulate_word(&lexicon, &scores, &target, opts);
        let n = target.chars().count() as u64;
        prop_assert_eq!(o.chars, n);
        match o.accepted_at {
            Some(at) => {
                prop_assert!(words.contains(&target));
                prop_assert_eq!(o.accepted_chars + at as u64, n);
                prop_assert_eq!(o.typed_keys, at as u64 + u64::from(opts.count_accept_key));
            }
            None => {
                prop_assert_eq!(o.typed_keys, n);
                prop_assert_eq!(o.accepted_chars, 0);
            }
        }
        if opts.count_accept_key {
            prop_assert!(o.accepted_at.is_none() || o.accepted_chars > 0);
        }
    }

    #[test]
    fn bounds_are_ordered(
        (words, docs, opts) in words().prop_flat_map(|w| {
            let doc = vec(prop_oneof![proptest::sample::select(w.clone()), "[abcd]{1,5}"], 1..10);
            (Just(w), vec(doc, 1..5), options())
        })
    ) {
        let vocab = vocab_of(&words);
        let docs: Vec<EncodedDocument> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| Document::from_text(&format!("d{i}"), &d.join(" "), vec![]).encode(&vocab))
            .collect();
        let v = vocabulary_bound(&docs, &vocab, opts).metrics;
        let t = theoretical_bound(&docs, opts).metrics;
        prop_assert!(v.ks <= t.ks);
        prop_assert!(t.ks < 1.0);
        if !opts.count_accept_key {
            prop_assert_eq!(v.ks.to_bits(), v.recall.to_bits());
            prop_assert_eq!(t.ks.to_bits(), t.recall.to_bits());
        }
    }

    #[test]
    fn tally_metrics_identities(
        total in 1u64..10_000,
        typed_frac in 0.0f64..=1.0,
        distraction in 0u64..50_000,
    ) {
        let typed = ((total as f64) * typed_frac) as u64;
        let tally = predtext::complete::CompletionTally {
            total_chars: total,
            typed_keys: typed,
            accepted_chars: total - typed,
            distraction_chars: distraction,
            accept_events: 1,
            words: 1,
        };
        let m = CompletionMetrics::from_tally(&tally);
        prop_assert_eq!(m.ks.to_bits(), m.recall.to_bits());
        if let (Some(p), Some(ud)) = (m.precision, m.ud) {
            prop_assert!((p - 1.0 / (1.0 + ud)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&m.f1));
        }
    }

    #[test]
    fn ranks_follow_a_stable_sort(dist in vec((0u8..5).prop_map(|q| f64::from(q) / 10.0), 1..40), k in 0usize..45) {
        let mut order: Vec<usize> = (0..dist.len()).collect();
        order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
        for (pos, &id) in order.iter().enumerate() {
            prop_assert_eq!(rank_of(&dist, id), pos + 1);
        }
        prop_assert_eq!(top_k(&dist, k, |_| true), order[..k.min(order.len())].to_vec());
    }

    #[test]
    fn rendered_values_parse_back(tenths in -100_000i64..100_000) {
        let v = tenths as f64 / 10.0;
        let s = format_value(v);
        let parsed = numeric_value(&s).unwrap();
        prop_assert!((parsed - v).abs() < 1e-9, "{} -> {} -> {}", v, s, parsed);
        prop_assert_eq!(format_value(parsed), s);
    }

    #[test]
    fn documents_survive_jsonl(
        docs in vec(("[a-z]{1,6}( [a-z0-9.]{1,5}){0,8}", proptest::option::of(0u32..500)), 0..6)
    ) {
        let docs: Vec<Document> = docs
            .iter()
            .enumerate()
            .map(|(i, (text, v))| {
                let kb = v.map(|v| vec![KbTuple::number("lv_ef", f64::from(v) / 10.0)]).unwrap_or_default();
                Document::from_text(&format!("doc-{i}"), text, kb)
            })
            .collect();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &docs).unwrap();
        prop_assert_eq!(read_jsonl(buf.as_slice()).unwrap(), docs);
    }
}
