//! The musical context-free grammar: snippet tokens, lexicons, an LL(1)
//! parser and a depth-bounded random generator.
//!
//! Sentences follow three productions, selected by the type of the first
//! token:
//!
//! ```text
//! S -> g            (ground snippet)
//! S -> p p p p s    (motif of four primaries closed by a secondary)
//! S -> t S S        (tertiary head followed by two sentences)
//! ```

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SnippetType {
    Ground,
    Primary,
    Secondary,
    Tertiary,
}

impl SnippetType {
    pub const ALL: [SnippetType; 4] = [
        SnippetType::Ground,
        SnippetType::Primary,
        SnippetType::Secondary,
        SnippetType::Tertiary,
    ];

    pub fn letter(self) -> char {
        match self {
            SnippetType::Ground => 'g',
            SnippetType::Primary => 'p',
            SnippetType::Secondary => 's',
            SnippetType::Tertiary => 't',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'g' => Some(SnippetType::Ground),
            'p' => Some(SnippetType::Primary),
            's' => Some(SnippetType::Secondary),
            't' => Some(SnippetType::Tertiary),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SnippetType::Ground => "ground",
            SnippetType::Primary => "primary",
            SnippetType::Secondary => "secondary",
            SnippetType::Tertiary => "tertiary",
        }
    }
}

impl fmt::Display for SnippetType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid snippet name {0:?}: expected one of g/p/s/t followed by a decimal index")]
pub struct TokenNameError(pub String);

/// A lexicon entry. The name is a type letter followed by an index
/// (`p4`, `t3`, ...); the letter fixes the snippet type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token {
    name: String,
    kind: SnippetType,
}

impl Token {
    pub fn new(name: &str) -> Result<Self, TokenNameError> {
        let mut chars = name.chars();
        let kind = chars
            .next()
            .and_then(SnippetType::from_letter)
            .ok_or_else(|| TokenNameError(name.to_string()))?;
        let index = chars.as_str();
        if index.is_empty() || !index.bytes().all(|b| b.is_ascii_digit()) {
            return Err(TokenNameError(name.to_string()));
        }
        Ok(Token {
            name: name.to_string(),
            kind,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> SnippetType {
        self.kind
    }
}

impl FromStr for Token {
    type Err = TokenNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Token::new(s)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Parses a whitespace separated token list such as `"t3 g1 g1"`.
pub fn parse_tokens(text: &str) -> Result<Vec<Token>, TokenNameError> {
    text.split_whitespace().map(Token::new).collect()
}

pub fn format_tokens(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(Token::name)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexiconError {
    #[error("duplicate lexicon entry {0}")]
    Duplicate(String),
}

/// An ordered set of snippet tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    entries: Vec<Token>,
}

impl Lexicon {
    pub fn new(entries: Vec<Token>) -> Result<Self, LexiconError> {
        let mut seen = HashSet::new();
        for tok in &entries {
            if !seen.insert(tok.name()) {
                return Err(LexiconError::Duplicate(tok.name().to_string()));
            }
        }
        Ok(Lexicon { entries })
    }

    /// The inventory g1-g2, p1-p9, s1-s4, t1-t3.
    pub fn standard() -> Self {
        let mut entries = Vec::new();
        for (letter, count) in [('g', 2), ('p', 9), ('s', 4), ('t', 3)] {
            for i in 1..=count {
                entries.push(Token::new(&format!("{letter}{i}")).expect("static name"));
            }
        }
        Lexicon { entries }
    }

    pub fn entries(&self) -> &[Token] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Token> {
        self.entries.iter().find(|t| t.name() == name)
    }

    pub fn of_type(&self, kind: SnippetType) -> Vec<&Token> {
        self.entries.iter().filter(|t| t.kind() == kind).collect()
    }

    pub fn count(&self, kind: SnippetType) -> usize {
        self.entries.iter().filter(|t| t.kind() == kind).count()
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::standard()
    }
}

/// Parse tree of a composition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Derivation {
    Ground(Token),
    Basic { motif: [Token; 4], secondary: Token },
    Composite {
        head: Token,
        first: Box<Derivation>,
        second: Box<Derivation>,
    },
}

impl Derivation {
    /// Left-to-right leaf sequence.
    pub fn tokens(&self) -> Vec<Token> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<Token>) {
        match self {
            Derivation::Ground(t) => out.push(t.clone()),
            Derivation::Basic { motif, secondary } => {
                out.extend(motif.iter().cloned());
                out.push(secondary.clone());
            }
            Derivation::Composite {
                head,
                first,
                second,
            } => {
                out.push(head.clone());
                first.collect(out);
                second.collect(out);
            }
        }
    }

    /// Number of sentence nodes on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            Derivation::Ground(_) | Derivation::Basic { .. } => 1,
            Derivation::Composite { first, second, .. } => 1 + first.depth().max(second.depth()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Derivation::Ground(_) => 1,
            Derivation::Basic { .. } => 5,
            Derivation::Composite { first, second, .. } => 1 + first.len() + second.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Derivation::Ground(t) => write!(f, "Ground({t})"),
            Derivation::Basic { motif, secondary } => write!(
                f,
                "Basic(Motif({}, {}, {}, {}), {secondary})",
                motif[0], motif[1], motif[2], motif[3]
            ),
            Derivation::Composite {
                head,
                first,
                second,
            } => write!(f, "Composite({head}, {first}, {second})"),
        }
    }
}

/// Left-to-right yield of a derivation.
pub fn yield_tokens(tree: &Derivation) -> Vec<Token> {
    tree.tokens()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("unexpected {found} snippet {token} at position {position}, expected {expected}")]
    UnexpectedToken {
        position: usize,
        token: String,
        found: SnippetType,
        expected: &'static str,
    },
    #[error("input ended at position {position} while expecting {expected}")]
    TruncatedInput {
        position: usize,
        expected: &'static str,
    },
    #[error("{remaining} trailing token(s) after a complete sentence, starting at position {position}")]
    TrailingTokens { position: usize, remaining: usize },
}

/// Parses a token sequence into its derivation. The grammar is LL(1): the
/// type of the next token alone picks the production.
pub fn parse(tokens: &[Token]) -> Result<Derivation, ParseError> {
    let mut parser = Parser { tokens, pos: 0 };
    let tree = parser.sentence()?;
    if parser.pos < tokens.len() {
        return Err(ParseError::TrailingTokens {
            position: parser.pos,
            remaining: tokens.len() - parser.pos,
        });
    }
    Ok(tree)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl Parser<'_> {
    fn next(&mut self, expected: &'static str) -> Result<&Token, ParseError> {
        let tok = self
            .tokens
            .get(self.pos)
            .ok_or(ParseError::TruncatedInput {
                position: self.pos,
                expected,
            })?;
        self.pos += 1;
        Ok(tok)
    }

    fn expect(&mut self, kind: SnippetType, expected: &'static str) -> Result<Token, ParseError> {
        let position = self.pos;
        let tok = self.next(expected)?;
        if tok.kind() != kind {
            return Err(ParseError::UnexpectedToken {
                position,
                token: tok.name().to_string(),
                found: tok.kind(),
                expected,
            });
        }
        Ok(tok.clone())
    }

    fn sentence(&mut self) -> Result<Derivation, ParseError> {
        const SENTENCE: &str = "a ground, primary or tertiary snippet";
        let position = self.pos;
        let tok = self.next(SENTENCE)?.clone();
        match tok.kind() {
            SnippetType::Ground => Ok(Derivation::Ground(tok)),
            SnippetType::Primary => {
                let motif = [
                    tok,
                    self.expect(SnippetType::Primary, "a primary snippet")?,
                    self.expect(SnippetType::Primary, "a primary snippet")?,
                    self.expect(SnippetType::Primary, "a primary snippet")?,
                ];
                let secondary = self.expect(SnippetType::Secondary, "a secondary snippet")?;
                Ok(Derivation::Basic { motif, secondary })
            }
            SnippetType::Tertiary => {
                let first = self.sentence()?;
                let second = self.sentence()?;
                Ok(Derivation::Composite {
                    head: tok,
                    first: Box::new(first),
                    second: Box::new(second),
                })
            }
            SnippetType::Secondary => Err(ParseError::UnexpectedToken {
                position,
                token: tok.name().to_string(),
                found: tok.kind(),
                expected: SENTENCE,
            }),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenConfigError {
    #[error("rule weights must be finite and nonnegative, got {0:?}")]
    NegativeWeight([f64; 3]),
    #[error("rule weights must sum to 1, got {0}")]
    WeightSum(f64),
    #[error("max_depth must be at least 1")]
    ZeroDepth,
}

/// Sentence-expansion weights (ground, basic, composite), depth bound and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    weights: [f64; 3],
    max_depth: usize,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(weights: [f64; 3], max_depth: usize, seed: u64) -> Result<Self, GenConfigError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(GenConfigError::NegativeWeight(weights));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(GenConfigError::WeightSum(sum));
        }
        if max_depth == 0 {
            return Err(GenConfigError::ZeroDepth);
        }
        Ok(GenConfig {
            weights,
            max_depth,
            seed,
        })
    }

    pub fn with_seed(self, seed: u64) -> Self {
        GenConfig { seed, ..self }
    }

    pub fn weights(&self) -> [f64; 3] {
        self.weights
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            weights: [0.4, 0.4, 0.2],
            max_depth: 4,
            seed: 0,
        }
    }
}

/// Draws a random derivation. Composite expansion is disabled once the
/// recursion reaches `max_depth`.
///
/// Panics if the lexicon lacks a token of some type.
pub fn generate_tree<R: Rng + ?Sized>(cfg: &GenConfig, lexicon: &Lexicon, rng: &mut R) -> Derivation {
    let pools: Vec<Vec<&Token>> = SnippetType::ALL.iter().map(|k| lexicon.of_type(*k)).collect();
    for (kind, pool) in SnippetType::ALL.iter().zip(&pools) {
        assert!(!pool.is_empty(), "lexicon has no {kind} snippet");
    }
    expand(cfg, &pools, 1, rng)
}

/// Draws a random composition; see [`generate_tree`].
pub fn generate<R: Rng + ?Sized>(cfg: &GenConfig, lexicon: &Lexicon, rng: &mut R) -> Vec<Token> {
    generate_tree(cfg, lexicon, rng).tokens()
}

fn pick<R: Rng + ?Sized>(pool: &[&Token], rng: &mut R) -> Token {
    pool[rng.random_range(0..pool.len())].clone()
}

fn expand<R: Rng + ?Sized>(cfg: &GenConfig, pools: &[Vec<&Token>], depth: usize, rng: &mut R) -> Derivation {
    let [wg, wb, wc] = cfg.weights;
    let wc = if depth >= cfg.max_depth { 0.0 } else { wc };
    let total = wg + wb + wc;
    let choice = if total <= 0.0 {
        0
    } else {
        let x = rng.random::<f64>() * total;
        if x < wg {
            0
        } else if x < wg + wb || wc == 0.0 {
            1
        } else {
            2
        }
    };
    match choice {
        0 => Derivation::Ground(pick(&pools[0], rng)),
        1 => {
            let motif = [
                pick(&pools[1], rng),
                pick(&pools[1], rng),
                pick(&pools[1], rng),
                pick(&pools[1], rng),
            ];
            Derivation::Basic {
                motif,
                secondary: pick(&pools[2], rng),
            }
        }
        _ => {
            let head = pick(&pools[3], rng);
            let first = expand(cfg, pools, depth + 1, rng);
            let second = expand(cfg, pools, depth + 1, rng);
            Derivation::Composite {
                head,
                first: Box::new(first),
                second: Box::new(second),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toks(s: &str) -> Vec<Token> {
        parse_tokens(s).unwrap()
    }

    fn t(s: &str) -> Token {
        Token::new(s).unwrap()
    }

    #[test]
    fn token_names() {
        assert_eq!(t("p4").kind(), SnippetType::Primary);
        assert_eq!(t("s12").kind(), SnippetType::Secondary);
        assert!(Token::new("x1").is_err());
        assert!(Token::new("p").is_err());
        assert!(Token::new("p1a").is_err());
        assert!(Token::new("").is_err());
    }

    #[test]
    fn standard_lexicon_counts() {
        let lex = Lexicon::standard();
        assert_eq!(lex.count(SnippetType::Ground), 2);
        assert_eq!(lex.count(SnippetType::Primary), 9);
        assert_eq!(lex.count(SnippetType::Secondary), 4);
        assert_eq!(lex.count(SnippetType::Tertiary), 3);
        assert_eq!(lex.len(), 18);
        assert!(Lexicon::new(vec![t("g1"), t("g1")]).is_err());
    }

    #[test]
    fn parses_composite_of_grounds() {
        let tree = parse(&toks("t3 g1 g1")).unwrap();
        assert_eq!(
            tree,
            Derivation::Composite {
                head: t("t3"),
                first: Box::new(Derivation::Ground(t("g1"))),
                second: Box::new(Derivation::Ground(t("g1"))),
            }
        );
    }

    #[test]
    fn parses_basic_sequence() {
        let tree = parse(&toks("p9 p4 p4 p4 s3")).unwrap();
        assert_eq!(
            tree,
            Derivation::Basic {
                motif: [t("p9"), t("p4"), t("p4"), t("p4")],
                secondary: t("s3"),
            }
        );
    }

    #[test]
    fn parses_nested_composite() {
        let tree = parse(&toks("t3 p9 p5 p9 p9 s1 t3 g2 g2")).unwrap();
        assert_eq!(
            tree.to_string(),
            "Composite(t3, Basic(Motif(p9, p5, p9, p9), s1), Composite(t3, Ground(g2), Ground(g2)))"
        );
    }

    #[test]
    fn single_ground() {
        assert_eq!(parse(&toks("g1")).unwrap(), Derivation::Ground(t("g1")));
        assert_eq!(yield_tokens(&Derivation::Ground(t("g2"))), vec![t("g2")]);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse(&toks("t3 g1")),
            Err(ParseError::TruncatedInput { position: 2, .. })
        ));
        assert!(matches!(parse(&[]), Err(ParseError::TruncatedInput { position: 0, .. })));
        assert!(matches!(
            parse(&toks("g1 g1")),
            Err(ParseError::TrailingTokens { position: 1, remaining: 1 })
        ));
        assert!(matches!(
            parse(&toks("s1")),
            Err(ParseError::UnexpectedToken { position: 0, .. })
        ));
        assert!(matches!(
            parse(&toks("p1 p2 g1 p3 s1")),
            Err(ParseError::UnexpectedToken { position: 2, .. })
        ));
        assert!(matches!(
            parse(&toks("p1 p2 p3 p4 p5")),
            Err(ParseError::UnexpectedToken { position: 4, .. })
        ));
    }

    #[test]
    fn yield_of_item_two() {
        let tree = Derivation::Composite {
            head: t("t3"),
            first: Box::new(Derivation::Basic {
                motif: [t("p8"), t("p1"), t("p8"), t("p1")],
                secondary: t("s4"),
            }),
            second: Box::new(Derivation::Ground(t("g1"))),
        };
        assert_eq!(format_tokens(&tree.tokens()), "t3 p8 p1 p8 p1 s4 g1");
    }

    #[test]
    fn forced_weights() {
        let lex = Lexicon::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = GenConfig::new([1.0, 0.0, 0.0], 4, 7).unwrap();
        let out = generate(&cfg, &lex, &mut rng);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].kind(), SnippetType::Ground);

        let cfg = GenConfig::new([0.0, 1.0, 0.0], 4, 7).unwrap();
        let out = generate(&cfg, &lex, &mut rng);
        let kinds: Vec<_> = out.iter().map(Token::kind).collect();
        assert_eq!(
            kinds,
            vec![
                SnippetType::Primary,
                SnippetType::Primary,
                SnippetType::Primary,
                SnippetType::Primary,
                SnippetType::Secondary
            ]
        );
    }

    #[test]
    fn composite_only_weights_terminate() {
        let lex = Lexicon::standard();
        let cfg = GenConfig::new([0.0, 0.0, 1.0], 3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = generate_tree(&cfg, &lex, &mut rng);
        assert_eq!(tree.depth(), 3);
        assert_eq!(format_tokens(&tree.tokens()).matches('g').count(), 4);
    }

    #[test]
    fn config_validation() {
        assert!(GenConfig::new([0.5, 0.5, 0.5], 4, 0).is_err());
        assert!(GenConfig::new([-0.5, 1.0, 0.5], 4, 0).is_err());
        assert!(GenConfig::new([0.4, 0.4, 0.2], 0, 0).is_err());
        assert!(GenConfig::new([0.4, 0.4, 0.2], 1, 0).is_ok());
    }

    #[test]
    fn generation_round_trips_over_many_seeds() {
        let lex = Lexicon::standard();
        let cfg = GenConfig::default();
        for seed in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tree = generate_tree(&cfg, &lex, &mut rng);
            assert!(tree.depth() <= cfg.max_depth());
            let tokens = tree.tokens();
            let parsed = parse(&tokens).unwrap();
            assert_eq!(parsed, tree);
            assert_eq!(parsed.tokens(), tokens);
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let lex = Lexicon::standard();
        let cfg = GenConfig::default();
        let a = generate(&cfg, &lex, &mut ChaCha8Rng::seed_from_u64(42));
        let b = generate(&cfg, &lex, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    /// Lengths reachable under the grammar: 1, 5 and 1 + a + b.
    fn admissible_lengths(limit: usize) -> Vec<bool> {
        let mut ok = vec![false; limit + 1];
        ok[1] = true;
        if limit >= 5 {
            ok[5] = true;
        }
        for n in 1..=limit {
            if ok[n] {
                continue;
            }
            ok[n] = (1..n).any(|a| n > 1 + a && ok[a] && ok[n - 1 - a]);
        }
        ok
    }

    #[test]
    fn length_law() {
        let ok = admissible_lengths(64);
        let lex = Lexicon::standard();
        let cfg = GenConfig::default();
        for seed in 0..300u64 {
            let tokens = generate(&cfg, &lex, &mut ChaCha8Rng::seed_from_u64(seed));
            assert!(ok[tokens.len()], "length {} not admissible", tokens.len());
        }
        assert!(!ok[2] && !ok[4] && ok[3] && ok[7] && ok[9]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip(seed in any::<u64>(), w in (0.01f64..1.0, 0.0f64..1.0, 0.0f64..1.0), depth in 1usize..6) {
                let sum = w.0 + w.1 + w.2;
                let cfg = GenConfig::new([w.0 / sum, w.1 / sum, w.2 / sum], depth, seed).unwrap();
                let lex = Lexicon::standard();
                let tree = generate_tree(&cfg, &lex, &mut ChaCha8Rng::seed_from_u64(seed));
                prop_assert!(tree.depth() <= depth);
                prop_assert_eq!(parse(&tree.tokens()).unwrap(), tree);
            }

            #[test]
            fn parse_never_panics(names in proptest::collection::vec(0usize..18, 0..12)) {
                let lex = Lexicon::standard();
                let tokens: Vec<Token> = names.iter().map(|i| lex.entries()[*i].clone()).collect();
                if let Ok(tree) = parse(&tokens) {
                    prop_assert_eq!(tree.tokens(), tokens);
                }
            }
        }
    }
}
