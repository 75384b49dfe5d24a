//! Snippet note content and Standard MIDI File output.
//!
//! Lexicon score files hold one note per line,
//! `token pitch onset_num/onset_den dur_num/dur_den velocity`, with timing
//! in beats. A line holding only a token declares it with no notes. Every
//! snippet lasts eight beats (two bars of 4/4).

use std::collections::BTreeMap;
use std::path::Path;

use num_rational::Rational64;
use thiserror::Error;

use crate::grammar::{Lexicon, Token};

pub const SNIPPET_BEATS: i64 = 8;
pub const TICKS_PER_QUARTER: u16 = 480;
pub const PIANO_LOW: u8 = 21;
pub const PIANO_HIGH: u8 = 108;
pub const DEFAULT_LEXICON_NAME: &str = "default";

const DEFAULT_LEXICON: &str = include_str!("../data/default-lexicon.txt");

#[derive(Debug, Error)]
pub enum MidiError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: {reason}")]
    RangeViolation { line: usize, reason: String },
    #[error("unknown snippet {0:?}")]
    UnknownToken(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoteEvent {
    pub pitch: u8,
    /// Beats from the start of the snippet (or piece, once rendered).
    pub onset: Rational64,
    pub duration: Rational64,
    pub velocity: u8,
}

impl NoteEvent {
    pub fn end(&self) -> Rational64 {
        self.onset + self.duration
    }

    pub fn shifted(mut self, beats: Rational64) -> Self {
        self.onset += beats;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnippetScore {
    pub token: Token,
    pub events: Vec<NoteEvent>,
}

impl SnippetScore {
    pub fn length_beats(&self) -> Rational64 {
        Rational64::from_integer(SNIPPET_BEATS)
    }
}

/// Scores for every snippet of a lexicon, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconScores {
    scores: BTreeMap<String, SnippetScore>,
    order: Vec<String>,
}

impl LexiconScores {
    /// The shipped placeholder scores for g1–g2, p1–p9, s1–s4, t1–t3.
    pub fn default_scores() -> Self {
        parse_lexicon_scores(DEFAULT_LEXICON).expect("shipped lexicon is valid")
    }

    pub fn get(&self, name: &str) -> Option<&SnippetScore> {
        self.scores.get(name)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn lexicon(&self) -> Lexicon {
        let tokens = self.order.iter().map(|n| self.scores[n].token.clone()).collect();
        Lexicon::new(tokens).expect("names are unique")
    }
}

fn parse_ratio(s: &str, line: usize) -> Result<Rational64, MidiError> {
    let bad = || MidiError::MalformedLine {
        line,
        reason: format!("expected a fraction like 3/2, found {s:?}"),
    };
    let (n, d) = s.split_once('/').ok_or_else(bad)?;
    let n: i64 = n.parse().map_err(|_| bad())?;
    let d: i64 = d.parse().map_err(|_| bad())?;
    if d <= 0 {
        return Err(bad());
    }
    Ok(Rational64::new(n, d))
}

pub fn parse_lexicon_scores(text: &str) -> Result<LexiconScores, MidiError> {
    let mut scores: BTreeMap<String, SnippetScore> = BTreeMap::new();
    let mut order = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let token = Token::new(fields[0]).map_err(|_| MidiError::UnknownToken(fields[0].to_string()))?;
        let entry = scores.entry(fields[0].to_string()).or_insert_with(|| {
            order.push(fields[0].to_string());
            SnippetScore {
                token,
                events: Vec::new(),
            }
        });
        if fields.len() == 1 {
            continue;
        }
        if fields.len() != 5 {
            return Err(MidiError::MalformedLine {
                line,
                reason: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let number = |s: &str, what: &str| -> Result<i64, MidiError> {
            s.parse().map_err(|_| MidiError::MalformedLine {
                line,
                reason: format!("{what} {s:?} is not an integer"),
            })
        };
        let pitch = number(fields[1], "pitch")?;
        let velocity = number(fields[4], "velocity")?;
        let onset = parse_ratio(fields[2], line)?;
        let duration = parse_ratio(fields[3], line)?;
        let range = |reason: String| Err(MidiError::RangeViolation { line, reason });
        if !(i64::from(PIANO_LOW)..=i64::from(PIANO_HIGH)).contains(&pitch) {
            return range(format!("pitch {pitch} outside the piano range {PIANO_LOW}-{PIANO_HIGH}"));
        }
        if !(1..=127).contains(&velocity) {
            return range(format!("velocity {velocity} outside 1-127"));
        }
        if onset < Rational64::from_integer(0) || duration <= Rational64::from_integer(0) {
            return range("onset must be nonnegative and duration positive".into());
        }
        if onset + duration > Rational64::from_integer(SNIPPET_BEATS) {
            return range(format!("note ends after beat {SNIPPET_BEATS}"));
        }
        entry.events.push(NoteEvent {
            pitch: pitch as u8,
            onset,
            duration,
            velocity: velocity as u8,
        });
    }
    Ok(LexiconScores { scores, order })
}

/// Loads a score file, or the shipped scores for the name `default`.
pub fn load_lexicon_scores(path: &str) -> Result<LexiconScores, MidiError> {
    if path == DEFAULT_LEXICON_NAME {
        return Ok(LexiconScores::default_scores());
    }
    let text = std::fs::read_to_string(path).map_err(|source| MidiError::Io {
        path: path.to_string(),
        source,
    })?;
    parse_lexicon_scores(&text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub tempo_bpm: f64,
    pub time_signature: (u8, u8),
    pub program: u8,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            tempo_bpm: 120.0,
            time_signature: (4, 4),
            program: 0,
        }
    }
}

/// Concatenates snippet scores: snippet `k` starts at beat `8k`.
pub fn render(tokens: &[Token], scores: &LexiconScores) -> Result<Vec<NoteEvent>, MidiError> {
    let mut out = Vec::new();
    for (k, t) in tokens.iter().enumerate() {
        let score = scores
            .get(t.name())
            .ok_or_else(|| MidiError::UnknownToken(t.name().to_string()))?;
        let offset = Rational64::from_integer(SNIPPET_BEATS * k as i64);
        out.extend(score.events.iter().map(|e| e.shifted(offset)));
    }
    Ok(out)
}

fn push_vlq(out: &mut Vec<u8>, mut v: u32) {
    let mut bytes = vec![(v & 0x7f) as u8];
    v >>= 7;
    while v > 0 {
        bytes.push((v & 0x7f) as u8 | 0x80);
        v >>= 7;
    }
    bytes.reverse();
    out.extend(bytes);
}

fn ticks(beats: Rational64) -> u32 {
    (beats * Rational64::from_integer(i64::from(TICKS_PER_QUARTER)))
        .round()
        .to_integer() as u32
}

/// Standard MIDI File, format 0, one track on channel 0. Note-offs sort
/// before note-ons at the same tick; otherwise events keep input order.
pub fn encode_midi(events: &[NoteEvent], cfg: &RenderConfig) -> Vec<u8> {
    let mut track = Vec::new();
    let tempo = (60_000_000.0 / cfg.tempo_bpm).round() as u32;
    track.extend([0x00, 0xff, 0x51, 0x03]);
    track.extend(&tempo.to_be_bytes()[1..]);
    if !events.is_empty() {
        let (num, den) = cfg.time_signature;
        track.extend([0x00, 0xff, 0x58, 0x04, num, den.trailing_zeros() as u8, 24, 8]);
        track.extend([0x00, 0xc0, cfg.program & 0x7f]);
    }
    // (tick, off-before-on, sequence, status, pitch, velocity)
    let mut msgs: Vec<(u32, u8, usize, u8, u8, u8)> = Vec::with_capacity(events.len() * 2);
    for (i, e) in events.iter().enumerate() {
        msgs.push((ticks(e.onset), 1, i, 0x90, e.pitch, e.velocity));
        msgs.push((ticks(e.end()), 0, i, 0x80, e.pitch, 64));
    }
    msgs.sort_by_key(|m| (m.0, m.1, m.2));
    let mut now = 0;
    for (tick, _, _, status, pitch, vel) in msgs {
        push_vlq(&mut track, tick - now);
        track.extend([status, pitch, vel]);
        now = tick;
    }
    track.extend([0x00, 0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend(b"MThd");
    out.extend(6u32.to_be_bytes());
    out.extend(0u16.to_be_bytes());
    out.extend(1u16.to_be_bytes());
    out.extend(TICKS_PER_QUARTER.to_be_bytes());
    out.extend(b"MTrk");
    out.extend((track.len() as u32).to_be_bytes());
    out.extend(track);
    out
}

pub fn write_midi(events: &[NoteEvent], cfg: &RenderConfig, path: impl AsRef<Path>) -> Result<(), MidiError> {
    let path = path.as_ref();
    std::fs::write(path, encode_midi(events, cfg)).map_err(|source| MidiError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{parse_tokens, SnippetType};

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn default_lexicon_inventory() {
        let s = LexiconScores::default_scores();
        assert_eq!(s.len(), 18);
        let lex = s.lexicon();
        let counts: Vec<usize> = SnippetType::ALL.iter().map(|&k| lex.count(k)).collect();
        assert_eq!(counts, vec![2, 9, 4, 3]);
        for name in ["g1", "p9", "s4", "t3"] {
            assert!(!s.get(name).unwrap().events.is_empty());
        }
    }

    #[test]
    fn silent_snippet_and_errors() {
        let s = parse_lexicon_scores("g1\np1 60 0/1 1/1 80\n").unwrap();
        assert!(s.get("g1").unwrap().events.is_empty());
        assert!(matches!(
            parse_lexicon_scores("p1 200 0/1 1/1 80"),
            Err(MidiError::RangeViolation { line: 1, .. })
        ));
        assert!(matches!(
            parse_lexicon_scores("# c\np1 60 0/1 1/1"),
            Err(MidiError::MalformedLine { line: 2, .. })
        ));
        assert!(matches!(
            parse_lexicon_scores("p1 60 15/2 1/1 80"),
            Err(MidiError::RangeViolation { .. })
        ));
        assert!(matches!(
            parse_lexicon_scores("x1 60 0/1 1/1 80"),
            Err(MidiError::UnknownToken(_))
        ));
    }

    #[test]
    fn render_concatenates() {
        let s = LexiconScores::default_scores();
        assert!(render(&[], &s).unwrap().is_empty());
        let g1 = &s.get("g1").unwrap().events;
        let two = render(&parse_tokens("g1 g1").unwrap(), &s).unwrap();
        assert_eq!(two.len(), 2 * g1.len());
        for (a, b) in g1.iter().zip(&two[g1.len()..]) {
            assert_eq!(b.onset, a.onset + r(8, 1));
        }
        let item1 = render(&parse_tokens("t3 g1 g1").unwrap(), &s).unwrap();
        assert_eq!(item1.len(), s.get("t3").unwrap().events.len() + 2 * g1.len());
        assert!(item1.iter().all(|e| e.end() <= r(24, 1)));
        assert!(matches!(
            render(&parse_tokens("g1 p10").unwrap(), &s),
            Err(MidiError::UnknownToken(_))
        ));
    }

    #[test]
    fn empty_file_bytes() {
        let bytes = encode_midi(&[], &RenderConfig::default());
        let expected: Vec<u8> = [
            b"MThd".as_slice(),
            &[0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xe0],
            b"MTrk",
            &[0, 0, 0, 11],
            &[0x00, 0xff, 0x51, 0x03, 0x07, 0xa1, 0x20],
            &[0x00, 0xff, 0x2f, 0x00],
        ]
        .concat();
        assert_eq!(bytes, expected);
    }

    #[test]
    fn single_note_bytes() {
        let e = NoteEvent {
            pitch: 60,
            onset: r(0, 1),
            duration: r(1, 1),
            velocity: 64,
        };
        let bytes = encode_midi(&[e], &RenderConfig::default());
        let body = &bytes[22..];
        let notes = &body[7 + 8 + 3..];
        // 480 ticks = 0x83 0x60 as a variable-length quantity
        assert_eq!(
            notes,
            &[0x00, 0x90, 0x3c, 0x40, 0x83, 0x60, 0x80, 0x3c, 0x40, 0x00, 0xff, 0x2f, 0x00]
        );
    }

    #[test]
    fn vlq_boundaries() {
        for (v, enc) in [
            (0u32, vec![0x00]),
            (0x7f, vec![0x7f]),
            (0x80, vec![0x81, 0x00]),
            (0x3fff, vec![0xff, 0x7f]),
            (0x4000, vec![0x81, 0x80, 0x00]),
        ] {
            let mut out = Vec::new();
            push_vlq(&mut out, v);
            assert_eq!(out, enc);
        }
    }
}
