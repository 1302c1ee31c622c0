//! Word completion: prefix matching against the vocabulary, the simulated
//! typist, keystroke savings and unnecessary-distraction metrics, and the
//! theoretical and vocabulary bounds.

mod lexicon;
mod metrics;
mod session;
mod sim;

pub use lexicon::Lexicon;
pub use metrics::{CompletionMetrics, CompletionTally};
pub use session::{replay_keys, Key, TypingSession};
pub use sim::{
    simulate_corpus, simulate_document, simulate_word, theoretical_bound, vocabulary_bound, write_events_csv,
    BoundResult, CompletionOptions, CompletionRun, WordEvent, WordOutcome,
};
