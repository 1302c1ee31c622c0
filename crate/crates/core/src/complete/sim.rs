//! The simulated typist.
//!
//! For each word the user types one character at a time. After every
//! character the lexicon is narrowed to the words sharing the typed prefix
//! and the best of them under the word-level scores is displayed. The user
//! accepts the moment the displayed word is the one being typed; otherwise
//! the suffix of the displayed word counts as a distraction. Words with no
//! match, masked numerals included, are typed in full. One space separates
//! consecutive words and is always typed.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::lexicon::{best_in, narrow, Lexicon};
use super::metrics::{CompletionMetrics, CompletionTally};
use crate::corpus::{EncodedDocument, Vocabulary};
use crate::error::Result;
use crate::lm::{Ablation, LanguageModel};
use crate::predict::csv_field;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionOptions {
    /// Charge one key for the accept gesture; the user then only accepts
    /// suggestions that insert at least one character.
    pub count_accept_key: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WordOutcome {
    pub chars: u64,
    pub typed_keys: u64,
    pub accepted_chars: u64,
    pub distraction_chars: u64,
    /// Characters typed before accepting.
    pub accepted_at: Option<usize>,
}

impl WordOutcome {
    fn tally(&self) -> CompletionTally {
        CompletionTally {
            total_chars: self.chars,
            typed_keys: self.typed_keys,
            accepted_chars: self.accepted_chars,
            distraction_chars: self.distraction_chars,
            accept_events: u64::from(self.accepted_at.is_some()),
            words: 1,
        }
    }
}

/// Simulates typing `target` against `lexicon` with fixed word scores.
pub fn simulate_word(lexicon: &Lexicon, scores: &[f64], target: &str, options: CompletionOptions) -> WordOutcome {
    let chars: Vec<char> = target.chars().collect();
    let mut outcome = WordOutcome { chars: chars.len() as u64, typed_keys: chars.len() as u64, ..Default::default() };
    let mut run = lexicon.all();
    let mut prefix = String::with_capacity(target.len());
    for (i, &ch) in chars.iter().enumerate() {
        let typed = i + 1;
        prefix.push(ch);
        run = narrow(run, &prefix);
        let Some((shown, _)) = best_in(run, scores) else { break };
        let suffix = (shown.chars().count() - typed) as u64;
        if shown == target && (!options.count_accept_key || suffix > 0) {
            outcome.accepted_chars = suffix;
            outcome.typed_keys = typed as u64 + u64::from(options.count_accept_key);
            outcome.accepted_at = Some(typed);
            return outcome;
        }
        outcome.distraction_chars += suffix;
    }
    outcome
}

/// Per-word record for the event log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordEvent {
    pub doc_id: String,
    pub word_index: usize,
    pub word: String,
    pub accepted: bool,
    pub prefix_len_at_accept: Option<usize>,
    pub distraction_chars: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletionRun {
    pub tally: CompletionTally,
    pub metrics: CompletionMetrics,
    pub events: Vec<WordEvent>,
}

/// Space keys between the words of a document.
fn separators(n_words: usize) -> CompletionTally {
    let spaces = n_words.saturating_sub(1) as u64;
    CompletionTally { total_chars: spaces, typed_keys: spaces, ..Default::default() }
}

/// Simulates one document; `scores(i)` gives the word scores in force while
/// word `i` is typed.
pub fn simulate_document<'s, F>(
    lexicon: &Lexicon,
    doc: &EncodedDocument,
    options: CompletionOptions,
    mut scores: F,
    events: &mut Vec<WordEvent>,
) -> CompletionTally
where
    F: FnMut(usize) -> &'s [f64],
{
    let mut tally = separators(doc.len());
    for (i, token) in doc.tokens.iter().enumerate() {
        let outcome = simulate_word(lexicon, scores(i), &token.surface, options);
        tally += outcome.tally();
        events.push(WordEvent {
            doc_id: doc.id.clone(),
            word_index: i,
            word: token.surface.clone(),
            accepted: outcome.accepted_at.is_some(),
            prefix_len_at_accept: outcome.accepted_at,
            distraction_chars: outcome.distraction_chars,
        });
    }
    tally
}

/// Runs the typist over `docs`, scoring words with the model's teacher-forced
/// next-word distribution at each word start.
pub fn simulate_corpus(
    model: &LanguageModel,
    docs: &[EncodedDocument],
    ablation: Ablation,
    options: CompletionOptions,
) -> Result<CompletionRun> {
    let lexicon = Lexicon::new(&model.vocab);
    let mut tally = CompletionTally::default();
    let mut events = Vec::new();
    for doc in docs {
        let mut dists = Vec::with_capacity(doc.len());
        model.teacher_forced(doc, ablation, |position, dist| {
            if position < doc.len() {
                dists.push(dist.to_vec());
            }
        })?;
        tally += simulate_document(&lexicon, doc, options, |i| &dists[i], &mut events);
    }
    Ok(CompletionRun { tally, metrics: CompletionMetrics::from_tally(&tally), events })
}

/// Tally of an ideal completer that shows the right word after the first
/// character of every word for which `completable` holds.
fn ideal_tally(
    docs: &[EncodedDocument],
    options: CompletionOptions,
    completable: impl Fn(&str) -> bool,
) -> CompletionTally {
    let mut tally = CompletionTally::default();
    for doc in docs {
        tally += separators(doc.len());
        for token in &doc.tokens {
            let len = token.surface.chars().count() as u64;
            let mut word = CompletionTally { total_chars: len, typed_keys: len, words: 1, ..Default::default() };
            let accepts = len >= 1 && completable(&token.surface) && (!options.count_accept_key || len >= 2);
            if accepts {
                word.accepted_chars = len - 1;
                word.typed_keys = 1 + u64::from(options.count_accept_key);
                word.accept_events = 1;
            }
            tally += word;
        }
    }
    tally
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub tally: CompletionTally,
    pub metrics: CompletionMetrics,
}

/// Upper bound from a completer that knows every word.
pub fn theoretical_bound(docs: &[EncodedDocument], options: CompletionOptions) -> BoundResult {
    let tally = ideal_tally(docs, options, |_| true);
    BoundResult { tally, metrics: CompletionMetrics::ideal(&tally) }
}

/// Upper bound from a completer that only knows the vocabulary words.
pub fn vocabulary_bound(docs: &[EncodedDocument], vocab: &Vocabulary, options: CompletionOptions) -> BoundResult {
    let tally = ideal_tally(docs, options, |s| vocab.contains_word(s));
    BoundResult { tally, metrics: CompletionMetrics::ideal(&tally) }
}

/// Event log CSV: `doc_id,word_index,word,accepted,prefix_len_at_accept,distraction_chars`.
pub fn write_events_csv<W: Write>(mut out: W, events: &[WordEvent]) -> Result<()> {
    writeln!(out, "doc_id,word_index,word,accepted,prefix_len_at_accept,distraction_chars")?;
    for e in events {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(&e.doc_id),
            e.word_index,
            csv_field(&e.word),
            e.accepted,
            e.prefix_len_at_accept.map_or_else(String::new, |n| n.to_string()),
            e.distraction_chars
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, Document};

    fn vocab_of(text: &str) -> Vocabulary {
        build_vocabulary(&[Document::from_text("v", text, Vec::new())], 100).unwrap()
    }

    const FREE: CompletionOptions = CompletionOptions { count_accept_key: false };
    const PAID: CompletionOptions = CompletionOptions { count_accept_key: true };

    #[test]
    fn single_word_vocabulary() {
        let vocab = vocab_of("cat");
        let lex = Lexicon::new(&vocab);
        let w = simulate_word(&lex, &vec![0.0; vocab.len()], "cat", FREE);
        assert_eq!((w.accepted_chars, w.typed_keys, w.distraction_chars, w.accepted_at), (2, 1, 0, Some(1)));
    }

    #[test]
    fn oov_target_never_accepts() {
        let vocab = vocab_of("zoo zebra");
        let lex = Lexicon::new(&vocab);
        let scores = vec![0.0; vocab.len()];
        // 'z' shows "zebra" (4), "zz" matches nothing
        let w = simulate_word(&lex, &scores, "zzz", FREE);
        assert_eq!((w.accepted_chars, w.typed_keys, w.distraction_chars, w.accepted_at), (0, 3, 4, None));
    }

    #[test]
    fn one_letter_word() {
        let vocab = vocab_of("a and");
        let lex = Lexicon::new(&vocab);
        let mut scores = vec![0.0; vocab.len()];
        scores[vocab.id("a").unwrap() as usize] = 1.0;
        let w = simulate_word(&lex, &scores, "a", FREE);
        assert_eq!((w.accepted_chars, w.typed_keys, w.accepted_at), (0, 1, Some(1)));
        let w = simulate_word(&lex, &scores, "a", PAID);
        assert_eq!((w.accepted_chars, w.typed_keys, w.accepted_at), (0, 1, None));
    }

    #[test]
    fn distractions_accumulate_until_the_word_appears() {
        let vocab = vocab_of("mild mildly mitral");
        let lex = Lexicon::new(&vocab);
        let mut scores = vec![0.0; vocab.len()];
        scores[vocab.id("mitral").unwrap() as usize] = 0.6;
        scores[vocab.id("mild").unwrap() as usize] = 0.3;
        scores[vocab.id("mildly").unwrap() as usize] = 0.1;
        // m → mitral (5), mi → mitral (4), mil → mild (1), mild → mild (0),
        // mildl → mildly accepted with 1 left
        let w = simulate_word(&lex, &scores, "mildly", FREE);
        assert_eq!((w.distraction_chars, w.accepted_at, w.accepted_chars, w.typed_keys), (10, Some(5), 1, 5));
        let w = simulate_word(&lex, &scores, "mildly", PAID);
        assert_eq!((w.accepted_chars, w.typed_keys), (1, 6));
    }

    #[test]
    fn hello_bound() {
        let vocab = vocab_of("x");
        let doc = Document::from_text("d", "hello", Vec::new()).encode(&vocab);
        let b = theoretical_bound(std::slice::from_ref(&doc), FREE);
        assert_eq!(b.metrics.ks, 0.8);
        assert_eq!(b.metrics.ud, Some(0.0));
        assert_eq!(b.metrics.precision, Some(1.0));
        assert!(b.metrics.f1 > b.metrics.recall);
        let paid = theoretical_bound(&[doc], PAID);
        assert_eq!(paid.metrics.ks, 0.6);
    }

    #[test]
    fn single_character_words_save_nothing() {
        let vocab = vocab_of("a");
        let doc = Document::from_text("d", "a b c", Vec::new()).encode(&vocab);
        assert_eq!(theoretical_bound(&[doc], FREE).metrics.ks, 0.0);
    }

    #[test]
    fn vocabulary_bound_by_hand() {
        // words: the(3) lv(2) zebra(5, oov) is(2) 57(2, oov numeral); 4 spaces
        let vocab = vocab_of("the lv is");
        let doc = Document::from_text("d", "the lv zebra is 57", Vec::new()).encode(&vocab);
        let b = vocabulary_bound(std::slice::from_ref(&doc), &vocab, FREE);
        assert_eq!(b.tally.total_chars, 14 + 4);
        assert_eq!(b.tally.accepted_chars, 2 + 1 + 1);
        assert_eq!(b.metrics.ks, 4.0 / 18.0);
        let all_oov = vocabulary_bound(std::slice::from_ref(&doc), &vocab_of("q"), FREE);
        assert_eq!(all_oov.metrics.ks, 0.0);
        let t = theoretical_bound(&[doc], FREE);
        assert_eq!(t.tally.accepted_chars, 2 + 1 + 4 + 1 + 1);
    }

    #[test]
    fn events_csv() {
        let events = vec![WordEvent {
            doc_id: "d".into(),
            word_index: 0,
            word: ",".into(),
            accepted: false,
            prefix_len_at_accept: None,
            distraction_chars: 3,
        }];
        let mut buf = Vec::new();
        write_events_csv(&mut buf, &events).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "doc_id,word_index,word,accepted,prefix_len_at_accept,distraction_chars\nd,0,\",\",false,,3\n"
        );
    }
}
