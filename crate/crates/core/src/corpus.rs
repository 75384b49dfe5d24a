//! Annotated composition corpora and their tab-separated file format.
//!
//! One record per line: `id<TAB>LABEL<TAB>tok1 tok2 ...` with LABEL one of
//! `MEL`, `RIT` or `UNK` (not yet annotated). Lines starting with `#` are
//! comments, except for an optional split directive
//! `#split train=1-50 dev=51-75 test=76-100` over record ids.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{format_tokens, parse_tokens, Token};

const CANONICAL_100: &str = include_str!("../data/canonical-100.tsv");

/// Name under which the embedded 100-piece corpus loads.
pub const CANONICAL_NAME: &str = "canonical-100";

/// Meaning label. One-hot encodings follow the convention `[0,1]` for
/// melodic and `[1,0]` for rhythmic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "MEL")]
    Mel,
    #[serde(rename = "RIT")]
    Rit,
}

impl Label {
    pub fn one_hot(self) -> [u8; 2] {
        match self {
            Label::Mel => [0, 1],
            Label::Rit => [1, 0],
        }
    }

    pub fn from_one_hot(v: [u8; 2]) -> Option<Label> {
        match v {
            [0, 1] => Some(Label::Mel),
            [1, 0] => Some(Label::Rit),
            _ => None,
        }
    }

    /// Target distribution over the readout outcomes (0, 1). A melodic
    /// piece should put its mass on outcome 0 so that thresholding `l0`
    /// recovers the label.
    pub fn target(self) -> [f64; 2] {
        match self {
            Label::Mel => [1.0, 0.0],
            Label::Rit => [0.0, 1.0],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Mel => "MEL",
            Label::Rit => "RIT",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "MEL" => Ok(Label::Mel),
            "RIT" => Ok(Label::Rit),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: u32,
    /// `None` for unannotated (`UNK`) records.
    pub label: Option<Label>,
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitName {
    Train,
    Dev,
    Test,
}

impl FromStr for SplitName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitName::Train),
            "dev" => Ok(SplitName::Dev),
            "test" => Ok(SplitName::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// Record indices (positions in `Corpus::records`) per split.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub records: Vec<Record>,
    pub split: Split,
    /// Id ranges as given by a `#split` directive, kept for saving.
    split_ranges: Option<[(u32, u32); 3]>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate record id {0}")]
    DuplicateId(u32),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Corpus {
    /// Builds a corpus with the default positional split (50% / 25% / rest).
    pub fn new(records: Vec<Record>) -> Result<Self, CorpusError> {
        check_ids(&records)?;
        let n = records.len();
        let train = n / 2;
        let dev = n / 4;
        let split = Split {
            train: (0..train).collect(),
            dev: (train..train + dev).collect(),
            test: (train + dev..n).collect(),
        };
        Ok(Corpus {
            records,
            split,
            split_ranges: None,
        })
    }

    pub fn canonical() -> Self {
        Corpus::parse_str(CANONICAL_100).expect("embedded corpus is well formed")
    }

    /// Loads a corpus by name (`canonical-100`) or from a file path.
    pub fn load(name_or_path: &str) -> Result<Self, CorpusError> {
        if name_or_path == CANONICAL_NAME {
            return Ok(Corpus::canonical());
        }
        load_corpus(name_or_path)
    }

    pub fn parse_str(text: &str) -> Result<Self, CorpusError> {
        let mut records = Vec::new();
        let mut ranges = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(directive) = line.strip_prefix("#split") {
                ranges = Some(parse_split_directive(directive).map_err(|reason| {
                    CorpusError::MalformedRecord {
                        line: line_no,
                        reason,
                    }
                })?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            records.push(parse_record(line).map_err(|reason| CorpusError::MalformedRecord {
                line: line_no,
                reason,
            })?);
        }
        match ranges {
            None => Corpus::new(records),
            Some(r) => {
                check_ids(&records)?;
                let select = |(lo, hi): (u32, u32)| -> Vec<usize> {
                    records
                        .iter()
                        .enumerate()
                        .filter(|(_, rec)| rec.id >= lo && rec.id <= hi)
                        .map(|(i, _)| i)
                        .collect()
                };
                let split = Split {
                    train: select(r[0]),
                    dev: select(r[1]),
                    test: select(r[2]),
                };
                Ok(Corpus {
                    records,
                    split,
                    split_ranges: Some(r),
                })
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# quantone corpus v1\n");
        if let Some(r) = self.split_ranges {
            out.push_str(&format!(
                "#split train={}-{} dev={}-{} test={}-{}\n",
                r[0].0, r[0].1, r[1].0, r[1].1, r[2].0, r[2].1
            ));
        }
        for rec in &self.records {
            let label = rec.label.map_or("UNK", Label::as_str);
            out.push_str(&format!("{}\t{}\t{}\n", rec.id, label, format_tokens(&rec.tokens)));
        }
        out
    }

    pub fn indices(&self, split: SplitName) -> &[usize] {
        match split {
            SplitName::Train => &self.split.train,
            SplitName::Dev => &self.split.dev,
            SplitName::Test => &self.split.test,
        }
    }

    pub fn subset(&self, split: SplitName) -> Vec<&Record> {
        self.indices(split).iter().map(|&i| &self.records[i]).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn check_ids(records: &[Record]) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.id) {
            return Err(CorpusError::DuplicateId(r.id));
        }
    }
    Ok(())
}

fn parse_record(line: &str) -> Result<Record, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Err(format!("expected 3 tab-separated fields, found {}", fields.len()));
    }
    let id = fields[0]
        .trim()
        .parse::<u32>()
        .map_err(|e| format!("bad id {:?}: {e}", fields[0]))?;
    let label = match fields[1].trim() {
        "UNK" => None,
        other => Some(other.parse::<Label>()?),
    };
    let tokens = parse_tokens(fields[2]).map_err(|e| e.to_string())?;
    if tokens.is_empty() {
        return Err("empty token sequence".into());
    }
    Ok(Record { id, label, tokens })
}

fn parse_split_directive(text: &str) -> Result<[(u32, u32); 3], String> {
    let mut out = [None; 3];
    for part in text.split_whitespace() {
        let (name, range) = part
            .split_once('=')
            .ok_or_else(|| format!("bad split entry {part:?}"))?;
        let slot = match name.parse::<SplitName>()? {
            SplitName::Train => 0,
            SplitName::Dev => 1,
            SplitName::Test => 2,
        };
        let (lo, hi) = range
            .split_once('-')
            .ok_or_else(|| format!("bad id range {range:?}"))?;
        let lo = lo.parse::<u32>().map_err(|e| e.to_string())?;
        let hi = hi.parse::<u32>().map_err(|e| e.to_string())?;
        out[slot] = Some((lo, hi));
    }
    match out {
        [Some(a), Some(b), Some(c)] => Ok([a, b, c]),
        _ => Err("split directive must name train, dev and test".into()),
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Corpus::parse_str(&text)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    fs::write(path, corpus.to_text()).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}
