//! Live typing with next-word predictions and ghost completions, tallied
//! with the same accounting as the simulated typist.

use super::lexicon::Lexicon;
use super::metrics::{CompletionMetrics, CompletionTally};
use super::sim::{CompletionOptions, WordEvent};
use crate::corpus::{EncodedDocument, KbTuple, TokenId};
use crate::error::Result;
use crate::lm::{Ablation, DecodeState, LanguageModel};
use crate::predict::top_k;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Key {
    Char(char),
    /// Accept the displayed completion (Tab).
    Accept,
    /// Word separator.
    Space,
}

pub struct TypingSession<'a> {
    model: &'a LanguageModel,
    lexicon: &'a Lexicon,
    ablation: Ablation,
    options: CompletionOptions,
    state: DecodeState,
    dist: Vec<f64>,
    prefix: String,
    shown: Option<TokenId>,
    words: Vec<String>,
    tally: CompletionTally,
}

impl<'a> TypingSession<'a> {
    pub fn new(
        model: &'a LanguageModel,
        lexicon: &'a Lexicon,
        kb: &[KbTuple],
        ablation: Ablation,
        options: CompletionOptions,
    ) -> Result<Self> {
        let state = model.state_after(kb, &[], ablation)?;
        let dist = model.distribution(&state);
        Ok(Self {
            model,
            lexicon,
            ablation,
            options,
            state,
            dist,
            prefix: String::new(),
            shown: None,
            words: Vec::new(),
            tally: CompletionTally::default(),
        })
    }

    /// Top-`k` next-word suggestions (mask symbols excluded).
    pub fn predictions(&self, k: usize) -> Vec<(&str, f64)> {
        let vocab = &self.model.vocab;
        top_k(&self.dist, k, |j| !vocab.is_special(j as TokenId))
            .into_iter()
            .map(|j| (vocab.surface(j as TokenId), self.dist[j]))
            .collect()
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Word currently displayed for the typed prefix.
    pub fn suggestion(&self) -> Option<&str> {
        self.shown.map(|id| self.model.vocab.surface(id))
    }

    /// Part of the suggestion not yet typed.
    pub fn ghost(&self) -> Option<&str> {
        let s = self.suggestion()?;
        Some(&s[self.prefix.len()..])
    }

    fn ghost_chars(&self) -> u64 {
        self.ghost().map_or(0, |g| g.chars().count() as u64)
    }

    fn dismiss(&mut self) {
        self.tally.distraction_chars += self.ghost_chars();
        self.shown = None;
    }

    fn commit_word(&mut self) -> Result<()> {
        let word = std::mem::take(&mut self.prefix);
        let token = self.model.vocab.encode(&word);
        self.model.advance(&mut self.state, &token, self.ablation)?;
        self.dist = self.model.distribution(&self.state);
        self.words.push(word);
        self.tally.words += 1;
        Ok(())
    }

    pub fn press(&mut self, key: Key) -> Result<()> {
        match key {
            Key::Char(ch) => {
                self.dismiss();
                self.prefix.push(ch);
                self.tally.typed_keys += 1;
                self.tally.total_chars += 1;
                self.shown = self.lexicon.best_match(&self.prefix, &self.dist).map(|(_, id)| id);
            }
            Key::Accept => {
                let Some(id) = self.shown else { return Ok(()) };
                let ghost = self.ghost_chars();
                if self.options.count_accept_key && ghost == 0 {
                    return Ok(());
                }
                self.tally.accepted_chars += ghost;
                self.tally.total_chars += ghost;
                self.tally.accept_events += 1;
                self.tally.typed_keys += u64::from(self.options.count_accept_key);
                self.prefix = self.model.vocab.surface(id).to_owned();
                self.shown = None;
            }
            Key::Space => {
                self.dismiss();
                self.tally.typed_keys += 1;
                self.tally.total_chars += 1;
                if !self.prefix.is_empty() {
                    self.commit_word()?;
                }
            }
        }
        Ok(())
    }

    /// Ends the text: a pending suggestion counts as a distraction and an
    /// unfinished word is committed.
    pub fn finish(&mut self) -> Result<()> {
        self.dismiss();
        if !self.prefix.is_empty() {
            self.commit_word()?;
        }
        Ok(())
    }

    pub fn tally(&self) -> CompletionTally {
        self.tally
    }

    pub fn metrics(&self) -> CompletionMetrics {
        CompletionMetrics::from_tally(&self.tally)
    }
}

/// Keys the simulated typist presses for `doc`, given its per-word events.
pub fn replay_keys(doc: &EncodedDocument, events: &[WordEvent]) -> Vec<Key> {
    let mut keys = Vec::new();
    for (i, token) in doc.tokens.iter().enumerate() {
        if i > 0 {
            keys.push(Key::Space);
        }
        let event = events.iter().find(|e| e.doc_id == doc.id && e.word_index == i);
        match event.and_then(|e| e.prefix_len_at_accept) {
            Some(n) => {
                keys.extend(token.surface.chars().take(n).map(Key::Char));
                keys.push(Key::Accept);
            }
            None => keys.extend(token.surface.chars().map(Key::Char)),
        }
    }
    keys
}
