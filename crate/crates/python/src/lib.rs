//! Python bindings for the `quantone` library.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ::quantone::circuit::{compile, AnsatzConfig, QubitAssignment};
use ::quantone::composer::{self, ComposeError, ComposeRequest, ModelClassifier};
use ::quantone::corpus::{self, SplitName};
use ::quantone::diagram::{self, PregroupDiagram};
use ::quantone::grammar::{self, format_tokens, parse_tokens, GenConfig};
use ::quantone::learn::{self, Mode, TrainConfig};
use ::quantone::midi::{self, LexiconScores, RenderConfig};
use ::quantone::model;
use ::quantone::sim::{self, NoiseConfig};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn learn_err(e: learn::LearnError) -> PyErr {
    match e {
        learn::LearnError::Sim(_) => runtime_err(e),
        _ => value_err(e),
    }
}

fn tokens(text: &str) -> PyResult<Vec<grammar::Token>> {
    parse_tokens(text).map_err(value_err)
}

fn readout(mode: &str, shots: u64, noise: bool) -> PyResult<Mode> {
    match mode {
        "exact" => Ok(Mode::Exact),
        "shots" => Ok(Mode::Shots {
            shots,
            noise: if noise { NoiseConfig::default() } else { NoiseConfig::disabled() },
        }),
        other => Err(PyValueError::new_err(format!("mode must be 'exact' or 'shots', not {other:?}"))),
    }
}

fn split_name(split: &str) -> PyResult<SplitName> {
    split.parse().map_err(PyValueError::new_err)
}

/// A labelled collection of token sequences with a train/dev/test split.
#[pyclass(module = "quantone", skip_from_py_object)]
#[derive(Clone)]
struct Corpus {
    inner: corpus::Corpus,
}

#[pymethods]
impl Corpus {
    /// The embedded 100-piece corpus.
    #[staticmethod]
    fn canonical() -> Self {
        Corpus {
            inner: corpus::Corpus::canonical(),
        }
    }

    /// Loads `canonical-100` or a corpus file.
    #[staticmethod]
    fn load(name_or_path: &str) -> PyResult<Self> {
        Ok(Corpus {
            inner: corpus::Corpus::load(name_or_path).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Corpus {
            inner: corpus::Corpus::parse_str(text).map_err(value_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(id, label or None, tokens)` for every record, or one split.
    #[pyo3(signature = (split=None))]
    fn records(&self, split: Option<&str>) -> PyResult<Vec<(u32, Option<String>, String)>> {
        let rows: Vec<&corpus::Record> = match split {
            None | Some("all") => self.inner.records.iter().collect(),
            Some(s) => self.inner.subset(split_name(s)?),
        };
        Ok(rows
            .into_iter()
            .map(|r| (r.id, r.label.map(|l| l.as_str().to_string()), format_tokens(&r.tokens)))
            .collect())
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }
}

/// A pregroup diagram for one token sequence.
#[pyclass(module = "quantone", skip_from_py_object)]
#[derive(Clone)]
struct Diagram {
    inner: PregroupDiagram,
}

#[pymethods]
impl Diagram {
    #[staticmethod]
    fn from_tokens(text: &str) -> PyResult<Self> {
        let tree = grammar::parse(&tokens(text)?).map_err(value_err)?;
        Ok(Diagram {
            inner: diagram::cfg_to_pregroup(&tree),
        })
    }

    fn rewrite(&self) -> Self {
        Diagram {
            inner: diagram::rewrite(&self.inner),
        }
    }

    fn unrewrite(&self) -> Self {
        Diagram {
            inner: diagram::unrewrite(&self.inner),
        }
    }

    fn reduces_to_s(&self) -> bool {
        diagram::reduces_to_s(&self.inner)
    }

    fn dump(&self) -> String {
        self.inner.dump()
    }

    /// Compiled circuit width for the given qubits per `n` and `s` wire.
    #[pyo3(signature = (q_n=2, q_s=1))]
    fn width(&self, q_n: usize, q_s: usize) -> PyResult<usize> {
        let qa = QubitAssignment::new(q_n, q_s).map_err(value_err)?;
        Ok(compile(&self.inner, &qa, &AnsatzConfig::default()).map_err(value_err)?.width)
    }

    fn __eq__(&self, other: &Diagram) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Diagram({:?})", format_tokens(&self.inner.tokens()))
    }
}

/// Snippet parameters plus the circuit configuration they were trained for.
#[pyclass(module = "quantone", skip_from_py_object)]
#[derive(Clone)]
struct Model {
    inner: model::Model,
}

#[pymethods]
impl Model {
    /// Angles drawn uniformly from [0, 2π).
    #[staticmethod]
    #[pyo3(signature = (seed=0))]
    fn random(seed: u64) -> Self {
        Model {
            inner: model::Model::random(
                &grammar::Lexicon::standard(),
                QubitAssignment::default(),
                AnsatzConfig::default(),
                &mut ChaCha8Rng::seed_from_u64(seed),
            ),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Model {
            inner: model::Model::load(path).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Model {
            inner: model::Model::from_json(text).map_err(value_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(runtime_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.inner.num_params()
    }

    fn params(&self) -> std::collections::BTreeMap<String, Vec<f64>> {
        self.inner.params.clone()
    }

    /// Smoothed `(l0, l1)` for a piece.
    #[pyo3(signature = (tokens, mode="exact", shots=8192, seed=0, noise=true))]
    fn predict(&self, tokens: &str, mode: &str, shots: u64, seed: u64, noise: bool) -> PyResult<(f64, f64)> {
        let t = self::tokens(tokens)?;
        learn::predict_distribution(&self.inner, &t, &readout(mode, shots, noise)?, seed).map_err(learn_err)
    }

    /// "MEL" or "RIT".
    #[pyo3(signature = (tokens, mode="exact", shots=8192, seed=0, noise=true))]
    fn classify(&self, tokens: &str, mode: &str, shots: u64, seed: u64, noise: bool) -> PyResult<String> {
        let (l0, _) = self.predict(tokens, mode, shots, seed, noise)?;
        Ok(learn::predict_label(l0, self.inner.threshold).as_str().to_string())
    }

    /// Accuracy on one split of a corpus.
    #[pyo3(signature = (corpus, split="test", mode="exact", shots=8192, seed=0, noise=true))]
    fn evaluate(&self, corpus: &Corpus, split: &str, mode: &str, shots: u64, seed: u64, noise: bool) -> PyResult<f64> {
        let records: Vec<corpus::Record> = match split {
            "all" => corpus.inner.records.clone(),
            s => corpus.inner.subset(split_name(s)?).into_iter().cloned().collect(),
        };
        let e = learn::evaluate(&self.inner, &records, &readout(mode, shots, noise)?, seed).map_err(learn_err)?;
        Ok(e.accuracy)
    }

    /// Compiled, parameter-bound circuit for a piece after rewriting.
    fn circuit(&self, tokens: &str) -> PyResult<Circuit> {
        let t = self::tokens(tokens)?;
        let pc = learn::prepare_circuit(&t, &self.inner.qa, &self.inner.ac).map_err(learn_err)?;
        Ok(Circuit {
            inner: pc.bind(&self.inner.params).map_err(value_err)?,
        })
    }
}

/// A bound circuit with postselected qubits and one readout qubit.
#[pyclass(module = "quantone")]
struct Circuit {
    inner: ::quantone::circuit::Circuit,
}

#[pymethods]
impl Circuit {
    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    #[getter]
    fn postselect(&self) -> Vec<usize> {
        self.inner.postselect.clone()
    }

    #[getter]
    fn readout(&self) -> usize {
        self.inner.readout
    }

    fn dump(&self) -> String {
        self.inner.dump()
    }

    /// Unnormalized postselected readout weights `(L0, L1)`.
    fn evaluate_exact(&self) -> PyResult<(f64, f64)> {
        sim::evaluate_exact(&self.inner).map_err(runtime_err)
    }

    /// `(usable shots, count of 0, count of 1)`.
    #[pyo3(signature = (shots, seed=0, noise=true))]
    fn sample(&self, shots: u64, seed: u64, noise: bool) -> PyResult<(u64, u64, u64)> {
        let cfg = if noise { NoiseConfig::default() } else { NoiseConfig::disabled() };
        match sim::sample(&self.inner, shots, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)) {
            Ok(r) => Ok((r.shots_usable, r.counts[0], r.counts[1])),
            Err(sim::SimError::ZeroUsableShots { .. }) => Ok((0, 0, 0)),
            Err(e) => Err(runtime_err(e)),
        }
    }
}

/// Whether a token sequence is a grammatical piece.
#[pyfunction]
fn is_grammatical(tokens: &str) -> bool {
    parse_tokens(tokens).is_ok_and(|t| grammar::parse(&t).is_ok())
}

/// Samples one piece from the grammar.
#[pyfunction]
#[pyo3(signature = (seed=0, weights=(0.4, 0.4, 0.2), max_depth=4))]
fn generate(seed: u64, weights: (f64, f64, f64), max_depth: usize) -> PyResult<String> {
    let cfg = GenConfig::new([weights.0, weights.1, weights.2], max_depth, seed).map_err(value_err)?;
    let t = grammar::generate(&cfg, &grammar::Lexicon::standard(), &mut ChaCha8Rng::seed_from_u64(seed));
    Ok(format_tokens(&t))
}

/// Trains on the train split and returns the model and per-iteration
/// `(loss, train_error)` history.
#[pyfunction]
#[pyo3(signature = (corpus=None, iterations=2000, seed=0, mode="exact", shots=8192, noise=true))]
fn train(
    py: Python<'_>,
    corpus: Option<&Corpus>,
    iterations: usize,
    seed: u64,
    mode: &str,
    shots: u64,
    noise: bool,
) -> PyResult<(Model, Vec<(f64, f64)>)> {
    let c = corpus.map_or_else(corpus::Corpus::canonical, |c| c.inner.clone());
    let cfg = TrainConfig {
        iterations,
        seed,
        mode: readout(mode, shots, noise)?,
        ..TrainConfig::default()
    };
    let (m, h) = py
        .detach(|| learn::train(&c, &grammar::Lexicon::standard(), &cfg))
        .map_err(learn_err)?;
    Ok((Model { inner: m }, h.rows.iter().map(|r| (r.loss, r.train_error)).collect()))
}

/// Generate-and-test composition; returns accepted `(tokens, l0)` pairs.
#[pyfunction]
#[pyo3(signature = (model, target, count=4, seed=0, margin=0.1, max_attempts=500))]
fn compose(
    model: &Model,
    target: &str,
    count: usize,
    seed: u64,
    margin: f64,
    max_attempts: usize,
) -> PyResult<Vec<(String, f64)>> {
    let req = ComposeRequest {
        accept_margin: margin,
        max_attempts,
        ..ComposeRequest::new(target.parse().map_err(PyValueError::new_err)?, count, seed)
    };
    let clf = ModelClassifier {
        model: &model.inner,
        mode: Mode::Exact,
        seed,
    };
    match composer::compose(&clf, &grammar::Lexicon::standard(), &req) {
        Ok(r) => Ok(r.accepted.iter().map(|(t, l0)| (format_tokens(t), *l0)).collect()),
        Err(e @ ComposeError::AttemptsExhausted(_)) => Err(runtime_err(e)),
        Err(e) => Err(value_err(e)),
    }
}

/// Standard MIDI File bytes for a piece using the shipped snippet scores.
#[pyfunction]
#[pyo3(signature = (tokens, tempo=120.0))]
fn render_midi(tokens: &str, tempo: f64) -> PyResult<Vec<u8>> {
    let events = midi::render(&self::tokens(tokens)?, &LexiconScores::default_scores()).map_err(value_err)?;
    let cfg = RenderConfig {
        tempo_bpm: tempo,
        ..RenderConfig::default()
    };
    Ok(midi::encode_midi(&events, &cfg))
}

#[pymodule]
#[pyo3(name = "quantone")]
fn quantone_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Corpus>()?;
    m.add_class::<Diagram>()?;
    m.add_class::<Model>()?;
    m.add_class::<Circuit>()?;
    m.add_function(wrap_pyfunction!(is_grammatical, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(compose, m)?)?;
    m.add_function(wrap_pyfunction!(render_midi, m)?)?;
    Ok(())
}
