//! Classification head, loss and SPSA training.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{compile, AnsatzConfig, CircuitError, ParamCircuit, QubitAssignment};
use crate::corpus::{Corpus, Label, Record, SplitName};
use crate::diagram::{cfg_to_pregroup, rewrite};
use crate::grammar::{parse, Lexicon, ParseError, Token};
use crate::model::Model;
use crate::sim::{evaluate_exact, sample, NoiseConfig, SimError};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("record {id}: {source}")]
    Parse {
        id: u32,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("record {0} has no label")]
    Unlabeled(u32),
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
}

/// How circuits are read out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mode {
    /// Exact postselected branch weights.
    Exact,
    /// Finite shots under the given noise model.
    Shots { shots: u64, noise: NoiseConfig },
}

impl Mode {
    pub fn shots_default() -> Self {
        Mode::Shots {
            shots: 8192,
            noise: NoiseConfig::default(),
        }
    }
}

/// `l_i = (L_i + ε) / (L_0 + L_1 + 2ε)`.
pub fn smooth(raw: (f64, f64), epsilon: f64) -> (f64, f64) {
    let total = raw.0 + raw.1 + 2.0 * epsilon;
    ((raw.0 + epsilon) / total, (raw.1 + epsilon) / total)
}

/// MEL when `t < l0`, RIT otherwise (ties go to RIT).
pub fn predict_label(l0: f64, threshold: f64) -> Label {
    if threshold < l0 {
        Label::Mel
    } else {
        Label::Rit
    }
}

/// Binary cross-entropy, `-Σ Σ_i target_i · ln l_i`, over parallel slices.
pub fn bce(preds: &[(f64, f64)], labels: &[Label]) -> f64 {
    assert_eq!(preds.len(), labels.len());
    preds
        .iter()
        .zip(labels)
        .map(|(&(l0, l1), label)| {
            let t = label.target();
            -(t[0] * l0.ln() + t[1] * l1.ln())
        })
        .sum()
}

/// Mixes a root seed with a path of stream indices (SplitMix64 finalizer),
/// so every task draws from its own independent stream.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    path.iter().fold(mix(root), |acc, &p| mix(acc ^ mix(p)))
}

const STREAM_INIT: u64 = 1;
const STREAM_PERTURB: u64 = 2;
const STREAM_LOSS: u64 = 3;
const STREAM_TRACK: u64 = 4;
const STREAM_CALIBRATE: u64 = 5;

/// Full pipeline up to a parameterized circuit: parse, diagram, rewrite,
/// compile.
pub fn prepare_circuit(tokens: &[Token], qa: &QubitAssignment, ac: &AnsatzConfig) -> Result<ParamCircuit, LearnError> {
    let tree = parse(tokens).map_err(|source| LearnError::Parse { id: 0, source })?;
    Ok(compile(&rewrite(&cfg_to_pregroup(&tree)), qa, ac)?)
}

/// A compiled record whose circuit symbols are resolved to ranges of a
/// model's flat parameter vector.
#[derive(Debug, Clone)]
pub struct PreparedItem {
    pub id: u32,
    pub label: Option<Label>,
    pub circuit: ParamCircuit,
    blocks: Vec<(usize, usize)>,
}

impl PreparedItem {
    pub fn new(record: &Record, model: &Model) -> Result<Self, LearnError> {
        let circuit = prepare_circuit(&record.tokens, &model.qa, &model.ac).map_err(|e| match e {
            LearnError::Parse { source, .. } => LearnError::Parse { id: record.id, source },
            other => other,
        })?;
        let layout = model.flat_layout();
        let blocks = circuit
            .symbols
            .iter()
            .map(|s| {
                let (_, off, len) = layout
                    .iter()
                    .find(|(name, _, _)| name == s)
                    .ok_or_else(|| CircuitError::MissingParameters(s.clone()))?;
                if *len != circuit.param_table[s] {
                    return Err(CircuitError::SlotCountMismatch {
                        symbol: s.clone(),
                        expected: circuit.param_table[s],
                        found: *len,
                    });
                }
                Ok((*off, *len))
            })
            .collect::<Result<_, CircuitError>>()?;
        Ok(PreparedItem {
            id: record.id,
            label: record.label,
            circuit,
            blocks,
        })
    }

    /// Raw `(L0, L1)` at the flat parameter vector `theta`. A shot run with
    /// no surviving shots reports `(0, 0)`.
    pub fn raw(&self, theta: &[f64], mode: &Mode, seed: u64) -> Result<(f64, f64), LearnError> {
        let values: Vec<&[f64]> = self.blocks.iter().map(|&(o, n)| &theta[o..o + n]).collect();
        let bound = self.circuit.bind_slices(&values);
        match mode {
            Mode::Exact => Ok(evaluate_exact(&bound)?),
            Mode::Shots { shots, noise } => {
                match sample(&bound, *shots, noise, &mut ChaCha8Rng::seed_from_u64(seed)) {
                    Ok(r) => Ok((
                        r.counts[0] as f64 / r.shots_requested as f64,
                        r.counts[1] as f64 / r.shots_requested as f64,
                    )),
                    Err(SimError::ZeroUsableShots { .. }) => Ok((0.0, 0.0)),
                    Err(e) => Err(e.into()),
                }
            }
        }
    }
}

pub fn prepare_all<'a>(records: impl IntoIterator<Item = &'a Record>, model: &Model) -> Result<Vec<PreparedItem>, LearnError> {
    records.into_iter().map(|r| PreparedItem::new(r, model)).collect()
}

/// Smoothed predictions for every item, evaluated in parallel. Item `i`
/// draws shots from stream `derive_seed(seed, [i])`.
pub fn predict_all(
    items: &[PreparedItem],
    theta: &[f64],
    mode: &Mode,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<(f64, f64)>, LearnError> {
    items
        .par_iter()
        .enumerate()
        .map(|(i, item)| Ok(smooth(item.raw(theta, mode, derive_seed(seed, &[i as u64]))?, epsilon)))
        .collect()
}

/// `(l0, l1)` for one token sequence.
pub fn predict_distribution(model: &Model, tokens: &[Token], mode: &Mode, seed: u64) -> Result<(f64, f64), LearnError> {
    let record = Record {
        id: 0,
        label: None,
        tokens: tokens.to_vec(),
    };
    let item = PreparedItem::new(&record, model)?;
    Ok(smooth(item.raw(&model.flatten(), mode, seed)?, model.epsilon))
}

fn labels_of(items: &[PreparedItem]) -> Result<Vec<Label>, LearnError> {
    items.iter().map(|i| i.label.ok_or(LearnError::Unlabeled(i.id))).collect()
}

/// Loss of `model` on labeled records.
pub fn bce_loss(model: &Model, records: &[Record], mode: &Mode, seed: u64) -> Result<f64, LearnError> {
    let items = prepare_all(records, model)?;
    let labels = labels_of(&items)?;
    let preds = predict_all(&items, &model.flatten(), mode, model.epsilon, seed)?;
    Ok(bce(&preds, &labels))
}

fn error_rate(preds: &[(f64, f64)], labels: &[Label], threshold: f64) -> f64 {
    let wrong = preds
        .iter()
        .zip(labels)
        .filter(|(p, l)| predict_label(p.0, threshold) != **l)
        .count();
    wrong as f64 / preds.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpsaSchedule {
    pub a: f64,
    pub c: f64,
    pub big_a: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl SpsaSchedule {
    pub fn a_k(&self, k: usize) -> f64 {
        self.a / (self.big_a + k as f64 + 1.0).powf(self.alpha)
    }

    pub fn c_k(&self, k: usize) -> f64 {
        self.c / (k as f64 + 1.0).powf(self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpsaStep {
    pub loss_plus: f64,
    pub loss_minus: f64,
}

fn rademacher<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

fn shifted(theta: &[f64], delta: &[f64], by: f64) -> Vec<f64> {
    theta.iter().zip(delta).map(|(t, d)| t + by * d).collect()
}

/// One SPSA update of `theta` in place, calling `loss` exactly twice.
pub fn spsa_step<R, F, E>(theta: &mut [f64], k: usize, schedule: &SpsaSchedule, mut loss: F, rng: &mut R) -> Result<SpsaStep, E>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    let ck = schedule.c_k(k);
    let ak = schedule.a_k(k);
    let delta = rademacher(theta.len(), rng);
    let loss_plus = loss(&shifted(theta, &delta, ck))?;
    let loss_minus = loss(&shifted(theta, &delta, -ck))?;
    let scale = (loss_plus - loss_minus) / (2.0 * ck);
    for (t, d) in theta.iter_mut().zip(&delta) {
        // Δ is ±1, so Δ⁻¹ = Δ
        *t -= ak * scale * d;
    }
    Ok(SpsaStep {
        loss_plus,
        loss_minus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Step size numerator; `None` calibrates it so the first update moves
    /// angles by `target_first_step` on average.
    pub a: Option<f64>,
    pub c: f64,
    /// Stability constant; `None` means `0.01 · iterations`.
    pub big_a: Option<f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub target_first_step: f64,
    pub calibration_samples: usize,
    pub mode: Mode,
    pub seed: u64,
    /// Initial angles are uniform on `[init_low, init_high)`.
    pub init_low: f64,
    pub init_high: f64,
    pub qa: QubitAssignment,
    pub ac: AnsatzConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 2000,
            a: None,
            c: 0.2,
            big_a: None,
            alpha: 0.602,
            gamma: 0.101,
            target_first_step: 0.3,
            calibration_samples: 5,
            mode: Mode::Exact,
            seed: 0,
            init_low: 0.0,
            init_high: std::f64::consts::TAU,
            qa: QubitAssignment::default(),
            ac: AnsatzConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidConfig(m.to_string()));
        if self.a.is_some_and(|a| a.is_nan() || a < 0.0) {
            return bad("a must be nonnegative");
        }
        if self.c.is_nan() || self.c <= 0.0 {
            return bad("c must be positive");
        }
        if self.big_a.is_some_and(|a| a.is_nan() || a < 0.0) {
            return bad("A must be nonnegative");
        }
        if self.init_low.is_nan() || self.init_high.is_nan() || self.init_high <= self.init_low {
            return bad("init range is empty");
        }
        if self.calibration_samples == 0 {
            return bad("calibration needs at least one sample");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub loss: f64,
    pub train_error: f64,
    pub dev_error: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub rows: Vec<HistoryRow>,
    /// Schedule actually used, after calibration.
    pub schedule: Option<SpsaSchedule>,
}

impl History {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&HistoryRow> {
        self.rows.last()
    }

    pub fn to_csv(&self) -> String {
        let with_dev = self.rows.iter().any(|r| r.dev_error.is_some());
        let mut out = String::from(if with_dev {
            "iteration,loss,train_error,dev_error\n"
        } else {
            "iteration,loss,train_error\n"
        });
        for r in &self.rows {
            write!(out, "{},{},{}", r.iteration, r.loss, r.train_error).unwrap();
            if let (true, Some(d)) = (with_dev, r.dev_error) {
                write!(out, ",{d}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn initial_model(lexicon: &Lexicon, cfg: &TrainConfig) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_INIT]));
    let mut model = Model::zeros(lexicon, cfg.qa, cfg.ac);
    for v in model.params.values_mut() {
        for x in v.iter_mut() {
            *x = rng.random_range(cfg.init_low..cfg.init_high);
        }
    }
    model
}

/// Trains a freshly initialized model on the corpus train split.
pub fn train(corpus: &Corpus, lexicon: &Lexicon, cfg: &TrainConfig) -> Result<(Model, History), LearnError> {
    cfg.validate()?;
    train_from(initial_model(lexicon, cfg), corpus, cfg)
}

/// Continues training from `model`; this is how an exact-mode model is
/// handed to a shot-mode phase.
pub fn train_from(mut model: Model, corpus: &Corpus, cfg: &TrainConfig) -> Result<(Model, History), LearnError> {
    cfg.validate()?;
    let train_records: Vec<Record> = corpus.subset(SplitName::Train).into_iter().cloned().collect();
    if train_records.is_empty() {
        return Err(LearnError::EmptySplit("train"));
    }
    let dev_records: Vec<Record> = corpus.subset(SplitName::Dev).into_iter().cloned().collect();
    let train_items = prepare_all(&train_records, &model)?;
    let train_labels = labels_of(&train_items)?;
    let dev_items = prepare_all(&dev_records, &model)?;
    let dev_labels = labels_of(&dev_items)?;

    let mut history = History::default();
    if cfg.iterations == 0 {
        return Ok((model, history));
    }
    let eps = model.epsilon;
    let threshold = model.threshold;
    let mut theta = model.flatten();
    let loss_at = |theta: &[f64], seed: u64| -> Result<f64, LearnError> {
        let preds = predict_all(&train_items, theta, &cfg.mode, eps, seed)?;
        Ok(bce(&preds, &train_labels))
    };

    let big_a = cfg.big_a.unwrap_or(0.01 * cfg.iterations as f64);
    let mut schedule = SpsaSchedule {
        a: cfg.a.unwrap_or(0.0),
        c: cfg.c,
        big_a,
        alpha: cfg.alpha,
        gamma: cfg.gamma,
    };
    if cfg.a.is_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_CALIBRATE]));
        let c0 = schedule.c_k(0);
        let mut total = 0.0;
        for s in 0..cfg.calibration_samples {
            let delta = rademacher(theta.len(), &mut rng);
            let seed = derive_seed(cfg.seed, &[STREAM_CALIBRATE, s as u64]);
            let diff = loss_at(&shifted(&theta, &delta, c0), seed)? - loss_at(&shifted(&theta, &delta, -c0), seed)?;
            total += diff.abs() / (2.0 * c0);
        }
        let mean = total / cfg.calibration_samples as f64;
        schedule.a = if mean > 0.0 {
            cfg.target_first_step * (big_a + 1.0).powf(cfg.alpha) / mean
        } else {
            cfg.target_first_step
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_PERTURB]));
    for k in 0..cfg.iterations {
        let seed = derive_seed(cfg.seed, &[STREAM_LOSS, k as u64]);
        spsa_step(&mut theta, k, &schedule, |t| loss_at(t, seed), &mut rng)?;
        let track = derive_seed(cfg.seed, &[STREAM_TRACK, k as u64]);
        let preds = predict_all(&train_items, &theta, &cfg.mode, eps, track)?;
        let dev_error = if dev_items.is_empty() {
            None
        } else {
            let dev_preds = predict_all(&dev_items, &theta, &cfg.mode, eps, derive_seed(track, &[1]))?;
            Some(error_rate(&dev_preds, &dev_labels, threshold))
        };
        history.rows.push(HistoryRow {
            iteration: k + 1,
            loss: bce(&preds, &train_labels),
            train_error: error_rate(&preds, &train_labels, threshold),
            dev_error,
        });
    }
    history.schedule = Some(schedule);
    model.set_flat(&theta);
    Ok((model, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: u32,
    pub label: Label,
    pub l0: f64,
    pub predicted: Label,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub rows: Vec<EvalRow>,
}

impl Evaluation {
    pub fn correct(&self) -> usize {
        self.rows.iter().filter(|r| r.correct).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,label,l0,predicted,correct\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.id, r.label, r.l0, r.predicted, r.correct).unwrap();
        }
        out
    }
}

/// Accuracy and per-item predictions on labeled records.
pub fn evaluate(model: &Model, records: &[Record], mode: &Mode, seed: u64) -> Result<Evaluation, LearnError> {
    let items = prepare_all(records, model)?;
    let labels = labels_of(&items)?;
    let preds = predict_all(&items, &model.flatten(), mode, model.epsilon, seed)?;
    let rows: Vec<EvalRow> = items
        .iter()
        .zip(&labels)
        .zip(&preds)
        .map(|((item, &label), &(l0, _))| {
            let predicted = predict_label(l0, model.threshold);
            EvalRow {
                id: item.id,
                label,
                l0,
                predicted,
                correct: predicted == label,
            }
        })
        .collect();
    let accuracy = if rows.is_empty() {
        0.0
    } else {
        rows.iter().filter(|r| r.correct).count() as f64 / rows.len() as f64
    };
    Ok(Evaluation { accuracy, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_tokens;
    use proptest::prelude::*;

    #[test]
    fn smoothing_examples() {
        assert_eq!(smooth((0.0, 0.0), 1e-9), (0.5, 0.5));
        let (l0, l1) = smooth((0.3, 0.1), 1e-9);
        assert!((l0 - 0.75).abs() < 1e-8 && (l1 - 0.25).abs() < 1e-8);
    }

    #[test]
    fn threshold_rule() {
        assert_eq!(predict_label(0.9, 0.5), Label::Mel);
        assert_eq!(predict_label(0.5, 0.5), Label::Rit);
        assert_eq!(predict_label(0.1, 0.5), Label::Rit);
    }

    #[test]
    fn bce_examples() {
        let uniform = vec![(0.5, 0.5); 7];
        let labels = vec![Label::Mel, Label::Rit, Label::Mel, Label::Mel, Label::Rit, Label::Rit, Label::Mel];
        assert!((bce(&uniform, &labels) - 7.0 * 2f64.ln()).abs() < 1e-9);
        let confident = [smooth((1.0, 0.0), 1e-9), smooth((0.0, 1.0), 1e-9)];
        let loss = bce(&confident, &[Label::Mel, Label::Rit]);
        assert!(loss > 0.0 && loss < 1e-8);
    }

    #[test]
    fn bce_is_order_invariant() {
        let preds = [(0.2, 0.8), (0.7, 0.3), (0.45, 0.55)];
        let labels = [Label::Mel, Label::Rit, Label::Mel];
        let a = bce(&preds, &labels);
        let b = bce(&[preds[2], preds[0], preds[1]], &[labels[2], labels[0], labels[1]]);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn spsa_minimizes_a_quadratic() {
        let mut theta = vec![1.0; 10];
        let schedule = SpsaSchedule {
            a: 0.5,
            c: 0.1,
            big_a: 2.0,
            alpha: 0.602,
            gamma: 0.101,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let quad = |t: &[f64]| Ok::<_, ()>(t.iter().map(|x| x * x).sum());
        for k in 0..200 {
            spsa_step(&mut theta, k, &schedule, quad, &mut rng).unwrap();
        }
        assert!(quad(&theta).unwrap() < 1e-2);
    }

    #[test]
    fn spsa_calls_loss_twice_and_zero_step_is_identity() {
        let mut theta = vec![0.3, -0.2];
        let schedule = SpsaSchedule {
            a: 0.0,
            c: 0.1,
            big_a: 0.0,
            alpha: 0.602,
            gamma: 0.101,
        };
        let mut calls = 0;
        spsa_step(
            &mut theta,
            0,
            &schedule,
            |t| {
                calls += 1;
                Ok::<_, ()>(t[0] * t[1])
            },
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        assert_eq!(calls, 2);
        assert_eq!(theta, vec![0.3, -0.2]);
    }

    #[test]
    fn spsa_is_deterministic() {
        let run = || {
            let mut theta = vec![0.5; 4];
            let s = SpsaSchedule {
                a: 0.2,
                c: 0.1,
                big_a: 1.0,
                alpha: 0.602,
                gamma: 0.101,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            for k in 0..20 {
                spsa_step(&mut theta, k, &s, |t| Ok::<_, ()>(t.iter().map(|x| x.sin()).sum()), &mut rng).unwrap();
            }
            theta
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zero_iterations_return_the_initial_model() {
        let corpus = Corpus::canonical();
        let cfg = TrainConfig {
            iterations: 0,
            ..TrainConfig::default()
        };
        let (m, h) = train(&corpus, &Lexicon::standard(), &cfg).unwrap();
        assert!(h.is_empty());
        assert_eq!(m, initial_model(&Lexicon::standard(), &cfg));
    }

    #[test]
    fn short_training_is_seeded() {
        let corpus = Corpus::canonical();
        let cfg = TrainConfig {
            iterations: 3,
            seed: 8,
            ..TrainConfig::default()
        };
        let (a, ha) = train(&corpus, &Lexicon::standard(), &cfg).unwrap();
        let (b, hb) = train(&corpus, &Lexicon::standard(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        assert_eq!(ha.len(), 3);
        assert!(ha.to_csv().starts_with("iteration,loss,train_error,dev_error\n"));
    }

    #[test]
    fn constant_mel_model_scores_all_mel() {
        // a zero-angle model prepares |0> on every ground word
        let m = Model::zeros(&Lexicon::standard(), QubitAssignment::default(), AnsatzConfig::default());
        let records: Vec<Record> = (1..=4)
            .map(|id| Record {
                id,
                label: Some(Label::Mel),
                tokens: parse_tokens("g1").unwrap(),
            })
            .collect();
        let e = evaluate(&m, &records, &Mode::Exact, 0).unwrap();
        assert_eq!(e.accuracy, 1.0);
        assert_eq!(e.to_csv().lines().count(), 5);
    }

    #[test]
    fn absent_snippets_do_not_affect_predictions() {
        let mut m = Model::random(
            &Lexicon::standard(),
            QubitAssignment::default(),
            AnsatzConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(6),
        );
        let tokens = parse_tokens("t3 p8 p1 p8 p1 s4 g1").unwrap();
        let before = predict_distribution(&m, &tokens, &Mode::Exact, 0).unwrap();
        for v in m.params.get_mut("s2").unwrap() {
            *v += 1.0;
        }
        assert_eq!(predict_distribution(&m, &tokens, &Mode::Exact, 0).unwrap(), before);
        m.params.get_mut("s4").unwrap()[0] += 1.0;
        assert_ne!(predict_distribution(&m, &tokens, &Mode::Exact, 0).unwrap(), before);
    }

    #[test]
    fn untrained_models_sit_near_chance() {
        let corpus = Corpus::canonical();
        let dev: Vec<Record> = corpus.subset(SplitName::Dev).into_iter().cloned().collect();
        let mean: f64 = (0..20)
            .map(|s| {
                let m = Model::random(
                    &Lexicon::standard(),
                    QubitAssignment::default(),
                    AnsatzConfig::default(),
                    &mut ChaCha8Rng::seed_from_u64(s),
                );
                evaluate(&m, &dev, &Mode::Exact, 0).unwrap().accuracy
            })
            .sum::<f64>()
            / 20.0;
        assert!((0.35..=0.65).contains(&mean), "{mean}");
    }

    proptest! {
        #[test]
        fn smoothed_components_are_probabilities(l0 in 0.0f64..1.0, l1 in 0.0f64..1.0) {
            let (a, b) = smooth((l0, l1), 1e-9);
            prop_assert!(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0);
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn raising_threshold_never_creates_mel(l0 in 0.0f64..1.0, t in 0.0f64..1.0, dt in 0.0f64..0.5) {
            if predict_label(l0, t + dt) == Label::Mel {
                prop_assert_eq!(predict_label(l0, t), Label::Mel);
            }
        }
    }
}
