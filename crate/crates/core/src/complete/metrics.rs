use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

/// Keystroke and suggestion counts, all in characters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionTally {
    /// Keys an unaided user presses: every character plus one space per
    /// word boundary.
    pub total_chars: u64,
    /// Keys pressed with completion.
    pub typed_keys: u64,
    /// Characters inserted by accepted suggestions.
    pub accepted_chars: u64,
    /// Suffix characters of displayed suggestions that were not accepted.
    pub distraction_chars: u64,
    pub accept_events: u64,
    pub words: u64,
}

impl AddAssign for CompletionTally {
    fn add_assign(&mut self, o: Self) {
        self.total_chars += o.total_chars;
        self.typed_keys += o.typed_keys;
        self.accepted_chars += o.accepted_chars;
        self.distraction_chars += o.distraction_chars;
        self.accept_events += o.accept_events;
        self.words += o.words;
    }
}

/// Keystroke savings (KS), unnecessary distractions (UD), precision, recall
/// and their F1. UD and precision are `None` when nothing was accepted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionMetrics {
    pub ks: f64,
    pub ud: Option<f64>,
    pub precision: Option<f64>,
    pub recall: f64,
    pub f1: f64,
}

fn f1(precision: Option<f64>, recall: f64) -> f64 {
    match precision {
        Some(p) if p + recall > 0.0 => 2.0 * p * recall / (p + recall),
        _ => 0.0,
    }
}

impl CompletionMetrics {
    pub fn from_tally(t: &CompletionTally) -> Self {
        if t.total_chars == 0 {
            return Self { ks: 0.0, ud: None, precision: None, recall: 0.0, f1: 0.0 };
        }
        let total = t.total_chars as f64;
        let saved = t.total_chars as i64 - t.typed_keys as i64;
        let ks = saved as f64 / total;
        let recall = t.accepted_chars as f64 / total;
        let (ud, precision) = if t.accepted_chars == 0 {
            (None, None)
        } else {
            let accepted = t.accepted_chars as f64;
            (
                Some(t.distraction_chars as f64 / accepted),
                Some(accepted / (t.accepted_chars + t.distraction_chars) as f64),
            )
        };
        Self { ks, ud, precision, recall, f1: f1(precision, recall) }
    }

    /// Metrics of a system whose suggestions are always right: UD = 0 and
    /// precision = 1 regardless of the tally.
    pub fn ideal(t: &CompletionTally) -> Self {
        let base = Self::from_tally(t);
        Self { ud: Some(0.0), precision: Some(1.0), f1: f1(Some(1.0), base.recall), ..base }
    }

    /// Assembles the metrics from keystroke savings and UD alone, with
    /// recall = KS and precision = 1 / (1 + UD).
    pub fn from_ks_ud(ks: f64, ud: f64) -> Self {
        let precision = Some(1.0 / (1.0 + ud));
        Self { ks, ud: Some(ud), precision, recall: ks, f1: f1(precision, ks) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_f1() {
        let m = CompletionMetrics::from_ks_ud(0.5887, 1.0);
        assert_eq!(m.precision, Some(0.5));
        assert!((m.f1 * 100.0 - 54.07).abs() < 0.01, "{}", m.f1);
    }

    #[test]
    fn tally_identities() {
        let t = CompletionTally {
            total_chars: 100,
            typed_keys: 60,
            accepted_chars: 40,
            distraction_chars: 25,
            accept_events: 9,
            words: 20,
        };
        let m = CompletionMetrics::from_tally(&t);
        assert_eq!(m.ks.to_bits(), m.recall.to_bits());
        assert_eq!(m.ud, Some(0.625));
        assert!((m.precision.unwrap() - 1.0 / (1.0 + m.ud.unwrap())).abs() < 1e-12);
        assert!((m.f1 - 2.0 * m.precision.unwrap() * 0.4 / (m.precision.unwrap() + 0.4)).abs() < 1e-15);
    }

    #[test]
    fn nothing_accepted() {
        let t = CompletionTally { total_chars: 10, typed_keys: 10, distraction_chars: 4, ..Default::default() };
        let m = CompletionMetrics::from_tally(&t);
        assert_eq!((m.ud, m.precision, m.f1, m.ks), (None, None, 0.0, 0.0));
        let ideal = CompletionMetrics::ideal(&t);
        assert_eq!((ideal.ud, ideal.precision, ideal.f1), (Some(0.0), Some(1.0), 0.0));
    }

    #[test]
    fn tallies_add() {
        let mut a = CompletionTally { total_chars: 3, typed_keys: 2, accepted_chars: 1, ..Default::default() };
        a += a;
        assert_eq!((a.total_chars, a.typed_keys, a.accepted_chars), (6, 4, 2));
    }
}
