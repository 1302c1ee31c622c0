use crate::corpus::{TokenId, Vocabulary};

/// Vocabulary words (specials excluded) in byte-lexicographic order, so the
/// words sharing a prefix form one contiguous run.
#[derive(Clone, Debug)]
pub struct Lexicon {
    words: Vec<(String, TokenId)>,
}

impl Lexicon {
    pub fn new(vocab: &Vocabulary) -> Self {
        let mut words: Vec<(String, TokenId)> = vocab
            .entries()
            .iter()
            .enumerate()
            .map(|(id, s)| (s.clone(), id as TokenId))
            .filter(|&(_, id)| !vocab.is_special(id))
            .collect();
        words.sort_unstable();
        Self { words }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn all(&self) -> &[(String, TokenId)] {
        &self.words
    }

    /// Words starting with `prefix`.
    pub fn matching(&self, prefix: &str) -> &[(String, TokenId)] {
        narrow(&self.words, prefix)
    }

    /// Highest-scoring word starting with `prefix`; ties go to the lower id.
    pub fn best_match(&self, prefix: &str, scores: &[f64]) -> Option<(&str, TokenId)> {
        best_in(self.matching(prefix), scores)
    }
}

/// Sub-run of a sorted `run` whose words start with `prefix`.
pub(crate) fn narrow<'a>(run: &'a [(String, TokenId)], prefix: &str) -> &'a [(String, TokenId)] {
    let lo = run.partition_point(|(w, _)| w.as_str() < prefix);
    let len = run[lo..].partition_point(|(w, _)| w.starts_with(prefix));
    &run[lo..lo + len]
}

pub(crate) fn best_in<'a>(run: &'a [(String, TokenId)], scores: &[f64]) -> Option<(&'a str, TokenId)> {
    let mut best: Option<(&str, TokenId)> = None;
    for (w, id) in run {
        let better = match best {
            None => true,
            Some((_, b)) => {
                let (s, sb) = (scores[*id as usize], scores[b as usize]);
                s > sb || (s == sb && *id < b)
            }
        };
        if better {
            best = Some((w, *id));
        }
    }
    best
}
