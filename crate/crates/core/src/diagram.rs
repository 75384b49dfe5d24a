//! Pregroup types, string diagrams built from derivations, reduction
//! checking and the cup-removing rewrite.
//!
//! Wire occurrences are numbered left to right over the concatenated word
//! types; cups and feeds refer to those occurrence indices.

use std::fmt::{self, Write as _};

use crate::grammar::{Derivation, SnippetType, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Base {
    N,
    S,
}

/// A basic type with its adjoint order: 0 plain, -1 left adjoint, +1 right
/// adjoint, and so on for iterated adjoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasicType {
    pub base: Base,
    pub adjoint: i32,
}

impl BasicType {
    pub const fn new(base: Base, adjoint: i32) -> Self {
        BasicType { base, adjoint }
    }

    pub const fn plain(base: Base) -> Self {
        BasicType { base, adjoint: 0 }
    }

    pub fn left(self) -> Self {
        BasicType::new(self.base, self.adjoint - 1)
    }

    pub fn right(self) -> Self {
        BasicType::new(self.base, self.adjoint + 1)
    }

    /// `self · next -> 1`, i.e. `b^k · b^(k+1)`.
    pub fn annihilates(self, next: BasicType) -> bool {
        self.base == next.base && next.adjoint == self.adjoint + 1
    }
}

impl fmt::Display for BasicType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.base {
            Base::N => "n",
            Base::S => "s",
        };
        f.write_str(base)?;
        if self.adjoint != 0 {
            let mark = if self.adjoint < 0 { "l" } else { "r" };
            write!(f, "^{}", mark.repeat(self.adjoint.unsigned_abs() as usize))?;
        }
        Ok(())
    }
}

/// Product of basic types; the empty product is the unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PregroupType(pub Vec<BasicType>);

impl PregroupType {
    pub fn factors(&self) -> &[BasicType] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for PregroupType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" "))
    }
}

const S: BasicType = BasicType::plain(Base::S);
const N: BasicType = BasicType::plain(Base::N);

/// Image of a snippet type under the grammar-to-pregroup functor.
pub fn functor_type(kind: SnippetType) -> PregroupType {
    match kind {
        SnippetType::Ground => PregroupType(vec![S]),
        SnippetType::Primary => PregroupType(vec![N]),
        SnippetType::Secondary => PregroupType(vec![N.right(), N.right(), N.right(), N.right(), S]),
        SnippetType::Tertiary => PregroupType(vec![S, S.left(), S.left()]),
    }
}

/// Positions (within the word type) that turn into inputs when the box is
/// rotated. Secondaries take their four noun wires, tertiaries the inner
/// sentence argument.
pub fn rotation_inputs(kind: SnippetType) -> &'static [usize] {
    match kind {
        SnippetType::Secondary => &[0, 1, 2, 3],
        SnippetType::Tertiary => &[2],
        SnippetType::Ground | SnippetType::Primary => &[],
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordBox {
    pub token: Token,
    pub ty: PregroupType,
    pub rotated: bool,
}

impl WordBox {
    pub fn new(token: Token) -> Self {
        let ty = functor_type(token.kind());
        WordBox {
            token,
            ty,
            rotated: false,
        }
    }

    pub fn can_rotate(&self) -> bool {
        !rotation_inputs(self.token.kind()).is_empty()
    }

    /// Transposes the box; applying it twice restores the original.
    pub fn toggle_rotation(&mut self) {
        if self.can_rotate() {
            self.rotated = !self.rotated;
        }
    }

    /// Positions acting as inputs in the current orientation.
    pub fn input_positions(&self) -> &'static [usize] {
        if self.rotated {
            rotation_inputs(self.token.kind())
        } else {
            &[]
        }
    }

    /// Positions acting as outputs in the current orientation.
    pub fn output_positions(&self) -> Vec<usize> {
        let inputs = self.input_positions();
        (0..self.ty.len()).filter(|p| !inputs.contains(p)).collect()
    }
}

/// A straightened snake: the output occurrence `from` flows directly into
/// input occurrence `into` of a rotated box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Feed {
    pub from: usize,
    pub into: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PregroupDiagram {
    pub words: Vec<WordBox>,
    /// Annihilating pairs `(i, j)` with `i < j`, sorted.
    pub cups: Vec<(usize, usize)>,
    /// Sorted by `into`.
    pub feeds: Vec<Feed>,
    /// Occurrences left open, in order.
    pub open_wires: Vec<usize>,
}

impl PregroupDiagram {
    pub fn num_occurrences(&self) -> usize {
        self.words.iter().map(|w| w.ty.len()).sum()
    }

    /// Index of each word's first occurrence.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.words.len());
        let mut acc = 0;
        for w in &self.words {
            out.push(acc);
            acc += w.ty.len();
        }
        out
    }

    /// `(word index, position within word)` of every occurrence.
    pub fn locate(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_occurrences());
        for (wi, w) in self.words.iter().enumerate() {
            for p in 0..w.ty.len() {
                out.push((wi, p));
            }
        }
        out
    }

    pub fn wire_types(&self) -> Vec<BasicType> {
        self.words
            .iter()
            .flat_map(|w| w.ty.factors().iter().copied())
            .collect()
    }

    pub fn open_types(&self) -> Vec<BasicType> {
        let types = self.wire_types();
        self.open_wires.iter().map(|&o| types[o]).collect()
    }

    pub fn tokens(&self) -> Vec<Token> {
        self.words.iter().map(|w| w.token.clone()).collect()
    }

    /// Checks the wiring invariants: every occurrence belongs to exactly one
    /// cup, feed or open slot, cups and feeds join annihilating types, feeds
    /// end on inputs of rotated boxes, and arcs do not cross.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.num_occurrences();
        let types = self.wire_types();
        let loc = self.locate();
        let mut used = vec![0u8; n];
        let mut mark = |o: usize| -> Result<(), String> {
            if o >= n {
                return Err(format!("occurrence {o} out of range"));
            }
            used[o] += 1;
            Ok(())
        };
        for &(i, j) in &self.cups {
            mark(i)?;
            mark(j)?;
            if i >= j || !types[i].annihilates(types[j]) {
                return Err(format!("cup ({i},{j}) joins {} and {}", types[i], types[j]));
            }
        }
        for f in &self.feeds {
            mark(f.from)?;
            mark(f.into)?;
            let (wi, p) = loc[f.into];
            if !self.words[wi].input_positions().contains(&p) {
                return Err(format!("feed into {} which is not a rotated input", f.into));
            }
            let (a, b) = (f.from.min(f.into), f.from.max(f.into));
            if !types[a].annihilates(types[b]) {
                return Err(format!("feed {}->{} joins incompatible types", f.from, f.into));
            }
        }
        for &o in &self.open_wires {
            mark(o)?;
        }
        if let Some(o) = used.iter().position(|&u| u != 1) {
            return Err(format!("occurrence {o} is used {} times", used[o]));
        }
        for (wi, w) in self.words.iter().enumerate() {
            for &p in w.input_positions() {
                let o = self.offsets()[wi] + p;
                if !self.feeds.iter().any(|f| f.into == o) {
                    return Err(format!("rotated input {o} has no feed"));
                }
            }
        }
        if !self.is_planar() {
            return Err("arcs cross".into());
        }
        Ok(())
    }

    fn arcs(&self) -> Vec<(usize, usize)> {
        let mut arcs = self.cups.clone();
        arcs.extend(
            self.feeds
                .iter()
                .map(|f| (f.from.min(f.into), f.from.max(f.into))),
        );
        arcs
    }

    /// No two arcs (cups or feeds) interleave.
    pub fn is_planar(&self) -> bool {
        let arcs = self.arcs();
        for (k, &(a, b)) in arcs.iter().enumerate() {
            for &(c, d) in &arcs[k + 1..] {
                if (a < c && c < b && b < d) || (c < a && a < d && d < b) {
                    return false;
                }
            }
        }
        true
    }

    /// Deterministic text listing used for golden files.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let offsets = self.offsets();
        writeln!(out, "words {}", self.words.len()).unwrap();
        for (wi, w) in self.words.iter().enumerate() {
            writeln!(
                out,
                "word {wi} {} {} at={} rotated={} : {}",
                w.token,
                w.token.kind(),
                offsets[wi],
                w.rotated,
                w.ty
            )
            .unwrap();
        }
        writeln!(out, "cups {}", self.cups.len()).unwrap();
        for (i, j) in &self.cups {
            writeln!(out, "cup {i} {j}").unwrap();
        }
        writeln!(out, "feeds {}", self.feeds.len()).unwrap();
        for f in &self.feeds {
            writeln!(out, "feed {} -> {}", f.from, f.into).unwrap();
        }
        let types = self.wire_types();
        let open: Vec<String> = self
            .open_wires
            .iter()
            .map(|&o| format!("{o}:{}", types[o]))
            .collect();
        writeln!(out, "open {}", open.join(" ")).unwrap();
        out
    }
}

/// Converts a derivation into its pregroup diagram: words in yield order
/// with functor types, one cup per annihilation realizing each production.
pub fn cfg_to_pregroup(tree: &Derivation) -> PregroupDiagram {
    let mut words = Vec::new();
    let mut cups = Vec::new();
    let mut next = 0usize;
    let out = build(tree, &mut words, &mut cups, &mut next);
    cups.sort_unstable();
    PregroupDiagram {
        words,
        cups,
        feeds: Vec::new(),
        open_wires: vec![out],
    }
}

fn push_word(token: &Token, words: &mut Vec<WordBox>, next: &mut usize) -> usize {
    let w = WordBox::new(token.clone());
    let start = *next;
    *next += w.ty.len();
    words.push(w);
    start
}

/// Returns the occurrence carrying the sentence output of `tree`.
fn build(tree: &Derivation, words: &mut Vec<WordBox>, cups: &mut Vec<(usize, usize)>, next: &mut usize) -> usize {
    match tree {
        Derivation::Ground(tok) => push_word(tok, words, next),
        Derivation::Basic { motif, secondary } => {
            let nouns: Vec<usize> = motif.iter().map(|t| push_word(t, words, next)).collect();
            let sec = push_word(secondary, words, next);
            // nested: the last primary meets the first n^r
            for (k, &noun) in nouns.iter().rev().enumerate() {
                cups.push((noun, sec + k));
            }
            sec + 4
        }
        Derivation::Composite {
            head,
            first,
            second,
        } => {
            let t = push_word(head, words, next);
            let a = build(first, words, cups, next);
            let b = build(second, words, cups, next);
            cups.push((t + 2, a));
            cups.push((t + 1, b));
            t
        }
    }
}

/// Table `r[i][j]`: factors `i..j` contract to the unit.
fn unit_table(types: &[BasicType]) -> Vec<Vec<bool>> {
    let n = types.len();
    let mut r = vec![vec![false; n + 1]; n + 1];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    for len in (2..=n).step_by(2) {
        for i in 0..=n - len {
            let j = i + len;
            r[i][j] = (i + 1..j)
                .step_by(2)
                .any(|k| types[i].annihilates(types[k]) && r[i + 1][k] && r[k + 1][j]);
        }
    }
    r
}

/// Whether the factor string reduces to exactly one plain `s` by adjacent
/// annihilations.
pub fn type_reduces_to_s(types: &[BasicType]) -> bool {
    let n = types.len();
    if n % 2 == 0 {
        return false;
    }
    let r = unit_table(types);
    (0..n).any(|m| types[m] == S && r[0][m] && r[m + 1][n])
}

/// Whether the concatenated word types of `d` reduce to the sentence type.
pub fn reduces_to_s(d: &PregroupDiagram) -> bool {
    type_reduces_to_s(&d.wire_types())
}

/// Removes cups by rotating every secondary and tertiary box: each cup that
/// meets a rotation input becomes a feed from the partner wire into the
/// transposed box. Diagrams without such boxes come back unchanged.
pub fn rewrite(d: &PregroupDiagram) -> PregroupDiagram {
    let mut out = d.clone();
    let offsets = d.offsets();
    for (wi, word) in d.words.iter().enumerate() {
        if word.rotated || !word.can_rotate() {
            continue;
        }
        let inputs: Vec<usize> = rotation_inputs(word.token.kind())
            .iter()
            .map(|p| offsets[wi] + p)
            .collect();
        let partners: Option<Vec<(usize, usize)>> = inputs
            .iter()
            .map(|&o| {
                out.cups
                    .iter()
                    .position(|&(i, j)| i == o || j == o)
                    .map(|c| (o, c))
            })
            .collect();
        let Some(partners) = partners else { continue };
        let mut remove = Vec::new();
        for (o, c) in partners {
            let (i, j) = out.cups[c];
            let from = if i == o { j } else { i };
            out.feeds.push(Feed { from, into: o });
            remove.push(c);
        }
        remove.sort_unstable();
        for c in remove.into_iter().rev() {
            out.cups.remove(c);
        }
        out.words[wi].rotated = true;
    }
    out.feeds.sort_unstable_by_key(|f| (f.into, f.from));
    out
}

/// Inverse of [`rewrite`]: bends every feed back into a cup.
pub fn unrewrite(d: &PregroupDiagram) -> PregroupDiagram {
    let mut out = d.clone();
    for f in out.feeds.drain(..) {
        out.cups.push((f.from.min(f.into), f.from.max(f.into)));
    }
    out.cups.sort_unstable();
    for w in &mut out.words {
        w.rotated = false;
    }
    out
}
