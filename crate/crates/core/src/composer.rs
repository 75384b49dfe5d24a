//! Generate-and-test composition: sample pieces from the grammar and keep
//! the ones a classifier confidently assigns to the requested label.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::Label;
use crate::grammar::{format_tokens, generate, GenConfig, Lexicon, Token};
use crate::learn::{derive_seed, predict_distribution, predict_label, LearnError, Mode};
use crate::model::Model;
use crate::sim::SimError;

/// Anything that maps a piece to `(l0, l1)` and a decision threshold.
pub trait Classifier {
    fn distribution(&self, tokens: &[Token]) -> Result<(f64, f64), LearnError>;
    fn threshold(&self) -> f64;
}

/// A trained model read out in the given mode. Shot-mode seeds are derived
/// from the piece itself so repeated queries agree.
pub struct ModelClassifier<'a> {
    pub model: &'a Model,
    pub mode: Mode,
    pub seed: u64,
}

impl Classifier for ModelClassifier<'_> {
    fn distribution(&self, tokens: &[Token]) -> Result<(f64, f64), LearnError> {
        let key: Vec<u64> = format_tokens(tokens).bytes().map(u64::from).collect();
        predict_distribution(self.model, tokens, &self.mode, derive_seed(self.seed, &key))
    }

    fn threshold(&self) -> f64 {
        self.model.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComposeRequest {
    pub target: Label,
    pub accept_margin: f64,
    pub count: usize,
    pub max_attempts: usize,
    /// Generation settings; its own seed field is ignored in favor of
    /// `seed`.
    pub gen: GenConfig,
    pub seed: u64,
}

impl ComposeRequest {
    pub fn new(target: Label, count: usize, seed: u64) -> Self {
        ComposeRequest {
            target,
            accept_margin: 0.1,
            count,
            max_attempts: 500,
            gen: GenConfig::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ComposeError> {
        let bad = |m: &str| Err(ComposeError::InvalidRequest(m.to_string()));
        if self.count == 0 {
            return bad("count must be at least 1");
        }
        if self.max_attempts < self.count {
            return bad("max_attempts must be at least count");
        }
        if !(0.0..0.5).contains(&self.accept_margin) {
            return bad("accept_margin must lie in [0, 0.5)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub attempt: usize,
    pub tokens: Vec<Token>,
    /// `None` when the candidate's circuit is too wide to simulate.
    pub l0: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComposeReport {
    pub accepted: Vec<(Vec<Token>, f64)>,
    pub attempts: usize,
    pub rejected_count: usize,
    pub log: Vec<Attempt>,
}

impl ComposeReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("attempt,tokens,l0,accepted\n");
        for a in &self.log {
            let l0 = a.l0.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", a.attempt, format_tokens(&a.tokens), l0, a.accepted).unwrap();
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("invalid compose request: {0}")]
    InvalidRequest(String),
    #[error("only {} of the requested pieces were accepted in {} attempts", .0.accepted.len(), .0.attempts)]
    AttemptsExhausted(ComposeReport),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// Whether `(l0, l1)` counts as a confident vote for `target`.
pub fn accepts(target: Label, l: (f64, f64), threshold: f64, margin: f64) -> bool {
    let l_target = match target {
        Label::Mel => l.0,
        Label::Rit => l.1,
    };
    predict_label(l.0, threshold) == target && (l_target - 0.5).abs() >= margin
}

pub fn compose(clf: &impl Classifier, lexicon: &Lexicon, req: &ComposeRequest) -> Result<ComposeReport, ComposeError> {
    req.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut seen = BTreeSet::new();
    let mut report = ComposeReport::default();
    while report.accepted.len() < req.count && report.attempts < req.max_attempts {
        report.attempts += 1;
        let tokens = generate(&req.gen, lexicon, &mut rng);
        // candidates too wide to simulate are rejected, not fatal
        let l = match clf.distribution(&tokens) {
            Ok(l) => Some(l),
            Err(LearnError::Sim(SimError::WidthExceeded { .. })) => None,
            Err(e) => return Err(e.into()),
        };
        let fresh = !seen.contains(&tokens);
        let ok = fresh && l.is_some_and(|l| accepts(req.target, l, clf.threshold(), req.accept_margin));
        if let (true, Some(l)) = (ok, l) {
            seen.insert(tokens.clone());
            report.accepted.push((tokens.clone(), l.0));
        } else {
            report.rejected_count += 1;
        }
        report.log.push(Attempt {
            attempt: report.attempts,
            tokens,
            l0: l.map(|l| l.0),
            accepted: ok,
        });
    }
    if report.accepted.len() < req.count {
        return Err(ComposeError::AttemptsExhausted(report));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(f64);

    impl Classifier for Constant {
        fn distribution(&self, _: &[Token]) -> Result<(f64, f64), LearnError> {
            Ok((self.0, 1.0 - self.0))
        }

        fn threshold(&self) -> f64 {
            0.5
        }
    }

    #[test]
    fn certain_classifier_accepts_immediately() {
        let req = ComposeRequest::new(Label::Mel, 2, 1);
        let r = compose(&Constant(1.0), &Lexicon::standard(), &req).unwrap();
        assert_eq!(r.accepted.len(), 2);
        assert_eq!(r.attempts, 2);
        assert_eq!(r.rejected_count, 0);
    }

    #[test]
    fn undecided_classifier_exhausts_attempts() {
        let req = ComposeRequest::new(Label::Rit, 2, 1);
        match compose(&Constant(0.5), &Lexicon::standard(), &req) {
            Err(ComposeError::AttemptsExhausted(r)) => {
                assert!(r.accepted.is_empty());
                assert_eq!(r.attempts, 500);
                assert_eq!(r.to_csv().lines().count(), 501);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicates_are_accepted_once() {
        // a grammar that can only produce g1 or g2
        let req = ComposeRequest {
            gen: GenConfig::new([1.0, 0.0, 0.0], 4, 0).unwrap(),
            max_attempts: 50,
            ..ComposeRequest::new(Label::Mel, 3, 7)
        };
        match compose(&Constant(0.9), &Lexicon::standard(), &req) {
            Err(ComposeError::AttemptsExhausted(r)) => assert_eq!(r.accepted.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    struct TooWide;

    impl Classifier for TooWide {
        fn distribution(&self, _: &[Token]) -> Result<(f64, f64), LearnError> {
            Err(LearnError::Sim(SimError::WidthExceeded { width: 30, cap: 26 }))
        }

        fn threshold(&self) -> f64 {
            0.5
        }
    }

    #[test]
    fn unsimulable_candidates_are_rejected() {
        let req = ComposeRequest {
            max_attempts: 3,
            ..ComposeRequest::new(Label::Mel, 1, 0)
        };
        match compose(&TooWide, &Lexicon::standard(), &req) {
            Err(ComposeError::AttemptsExhausted(r)) => {
                assert_eq!(r.rejected_count, 3);
                assert!(r.log.iter().all(|a| a.l0.is_none()));
                assert!(r.to_csv().lines().nth(1).unwrap().ends_with(",,false"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn requests_are_validated() {
        let mut req = ComposeRequest::new(Label::Mel, 0, 0);
        assert!(req.validate().is_err());
        req.count = 3;
        req.max_attempts = 2;
        assert!(req.validate().is_err());
        req.max_attempts = 10;
        req.accept_margin = 0.5;
        assert!(req.validate().is_err());
    }

    #[test]
    fn margin_rule() {
        assert!(accepts(Label::Rit, (0.2, 0.8), 0.5, 0.1));
        assert!(!accepts(Label::Rit, (0.45, 0.55), 0.5, 0.1));
        assert!(!accepts(Label::Mel, (0.2, 0.8), 0.5, 0.0));
    }
}
