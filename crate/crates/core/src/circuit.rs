//! Compilation of pregroup diagrams into parameterized circuits.
//!
//! Every word owns an ansatz unitary `U` acting on `m = max(a, b)` qubits,
//! where `a` counts the qubits of its rotation inputs and `b` the rest. A
//! rotated word applies `U` to its fed-in qubits (padding with fresh
//! ancillas or postselecting surplus ones); an unrotated word prepares the
//! matching state by bending its inputs with Bell pairs and applying `U` (or
//! its transpose) to one side. Both realizations describe the same tensor up
//! to the scale `2^(-min(a, b)/2)`, which is what makes the rewrite sound.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{rotation_inputs, Base, PregroupDiagram, WordBox};
use crate::grammar::{Lexicon, SnippetType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitAssignment {
    pub q_n: usize,
    pub q_s: usize,
}

impl QubitAssignment {
    pub fn new(q_n: usize, q_s: usize) -> Result<Self, CircuitError> {
        if q_n == 0 || q_s == 0 {
            return Err(CircuitError::InvalidConfig(
                "qubits per wire must be positive".into(),
            ));
        }
        Ok(QubitAssignment { q_n, q_s })
    }

    pub fn qubits(&self, base: Base) -> usize {
        match base {
            Base::N => self.q_n,
            Base::S => self.q_s,
        }
    }

    /// Total qubits of a word's type.
    pub fn word_qubits(&self, kind: SnippetType) -> usize {
        let (a, b) = self.block_shape(kind);
        a + b
    }

    /// `(a, b)`: qubits on rotation inputs and on the remaining wires.
    pub fn block_shape(&self, kind: SnippetType) -> (usize, usize) {
        let ty = crate::diagram::functor_type(kind);
        let inputs = rotation_inputs(kind);
        let mut a = 0;
        let mut b = 0;
        for (p, f) in ty.factors().iter().enumerate() {
            if inputs.contains(&p) {
                a += self.qubits(f.base);
            } else {
                b += self.qubits(f.base);
            }
        }
        (a, b)
    }

    /// Qubits the word's ansatz unitary acts on.
    pub fn block_width(&self, kind: SnippetType) -> usize {
        let (a, b) = self.block_shape(kind);
        a.max(b)
    }
}

impl Default for QubitAssignment {
    fn default() -> Self {
        QubitAssignment { q_n: 2, q_s: 1 }
    }
}

/// Single-qubit blocks use a fixed RX-RZ-RX Euler triple; wider blocks use
/// `iqp_layers` layers of Hadamards followed by a CRZ chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzConfig {
    pub iqp_layers: usize,
}

impl AnsatzConfig {
    pub fn new(iqp_layers: usize) -> Result<Self, CircuitError> {
        if iqp_layers == 0 {
            return Err(CircuitError::InvalidConfig("iqp_layers must be positive".into()));
        }
        Ok(AnsatzConfig { iqp_layers })
    }

    pub fn slot_count(&self, k: usize) -> usize {
        match k {
            0 => 0,
            1 => 3,
            _ => self.iqp_layers * (k - 1),
        }
    }
}

impl Default for AnsatzConfig {
    fn default() -> Self {
        AnsatzConfig { iqp_layers: 3 }
    }
}

/// Reference to slot `slot` of the circuit's `symbol`-th snippet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamRef {
    pub symbol: usize,
    pub slot: usize,
}

/// A gate whose rotation angle has type `P`: a [`ParamRef`] before binding,
/// radians after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate<P> {
    H(usize),
    Rx(usize, P),
    Rz(usize, P),
    /// Control, target, angle.
    Crz(usize, usize, P),
    /// Control, target.
    Cnot(usize, usize),
}

impl<P: Copy> Gate<P> {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::Rx(q, _) | Gate::Rz(q, _) => vec![q],
            Gate::Crz(c, t, _) | Gate::Cnot(c, t) => vec![c, t],
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Gate::H(_) | Gate::Rx(..) | Gate::Rz(..) => 1,
            Gate::Crz(..) | Gate::Cnot(..) => 2,
        }
    }

    pub fn param(&self) -> Option<P> {
        match *self {
            Gate::Rx(_, p) | Gate::Rz(_, p) | Gate::Crz(_, _, p) => Some(p),
            Gate::H(_) | Gate::Cnot(..) => None,
        }
    }

    pub fn map_param<Q>(&self, mut f: impl FnMut(P) -> Q) -> Gate<Q> {
        match *self {
            Gate::H(q) => Gate::H(q),
            Gate::Rx(q, p) => Gate::Rx(q, f(p)),
            Gate::Rz(q, p) => Gate::Rz(q, f(p)),
            Gate::Crz(c, t, p) => Gate::Crz(c, t, f(p)),
            Gate::Cnot(c, t) => Gate::Cnot(c, t),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "h",
            Gate::Rx(..) => "rx",
            Gate::Rz(..) => "rz",
            Gate::Crz(..) => "crz",
            Gate::Cnot(..) => "cnot",
        }
    }
}

/// A circuit with numeric angles, ready for simulation. Qubits listed in
/// `postselect` must read 0; `readout` carries the sentence qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub width: usize,
    pub gates: Vec<Gate<f64>>,
    pub postselect: Vec<usize>,
    pub readout: usize,
}

impl Circuit {
    pub fn new(width: usize, gates: Vec<Gate<f64>>, postselect: Vec<usize>, readout: usize) -> Self {
        Circuit {
            width,
            gates,
            postselect,
            readout,
        }
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        writeln!(out, "width {}", self.width).unwrap();
        for g in &self.gates {
            let qs: Vec<String> = g.qubits().iter().map(|q| format!("q{q}")).collect();
            match g.param() {
                Some(a) => writeln!(out, "{} {} {a:.15e}", g.name(), qs.join(" ")).unwrap(),
                None => writeln!(out, "{} {}", g.name(), qs.join(" ")).unwrap(),
            }
        }
        write_tail(&mut out, &self.postselect, self.readout);
        out
    }
}

fn write_tail(out: &mut String, postselect: &[usize], readout: usize) {
    let ps: Vec<String> = postselect.iter().map(ToString::to_string).collect();
    writeln!(out, "postselect {}", ps.join(" ")).unwrap();
    writeln!(out, "readout {readout}").unwrap();
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCircuit {
    pub width: usize,
    pub gates: Vec<Gate<ParamRef>>,
    pub postselect: Vec<usize>,
    pub readout: usize,
    /// Snippet names in order of first use; `ParamRef::symbol` indexes this.
    pub symbols: Vec<String>,
    /// Slot count of every referenced snippet.
    pub param_table: BTreeMap<String, usize>,
}

impl ParamCircuit {
    /// Binds angles from a snippet-to-vector map.
    pub fn bind(&self, params: &BTreeMap<String, Vec<f64>>) -> Result<Circuit, CircuitError> {
        let mut slices = Vec::with_capacity(self.symbols.len());
        for s in &self.symbols {
            let v = params
                .get(s)
                .ok_or_else(|| CircuitError::MissingParameters(s.clone()))?;
            let expected = self.param_table[s];
            if v.len() != expected {
                return Err(CircuitError::SlotCountMismatch {
                    symbol: s.clone(),
                    expected,
                    found: v.len(),
                });
            }
            slices.push(v.as_slice());
        }
        Ok(self.bind_slices(&slices))
    }

    /// Binds from one slice per entry of `symbols`; lengths are assumed
    /// checked.
    pub fn bind_slices(&self, values: &[&[f64]]) -> Circuit {
        let gates = self
            .gates
            .iter()
            .map(|g| g.map_param(|p| values[p.symbol][p.slot]))
            .collect();
        Circuit {
            width: self.width,
            gates,
            postselect: self.postselect.clone(),
            readout: self.readout,
        }
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        writeln!(out, "width {}", self.width).unwrap();
        for g in &self.gates {
            let qs: Vec<String> = g.qubits().iter().map(|q| format!("q{q}")).collect();
            match g.param() {
                Some(p) => writeln!(
                    out,
                    "{} {} {}[{}]",
                    g.name(),
                    qs.join(" "),
                    self.symbols[p.symbol],
                    p.slot
                )
                .unwrap(),
                None => writeln!(out, "{} {}", g.name(), qs.join(" ")).unwrap(),
            }
        }
        write_tail(&mut out, &self.postselect, self.readout);
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("diagram does not have a single open s wire (open: {0})")]
    NonSentenceDiagram(String),
    #[error("malformed diagram: {0}")]
    InvalidDiagram(String),
    #[error("no parameters for snippet {0}")]
    MissingParameters(String),
    #[error("snippet {symbol} has {found} parameters, expected {expected}")]
    SlotCountMismatch {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Snippet name to slot count for every lexicon entry.
pub fn param_vector_layout(
    lexicon: &Lexicon,
    qa: &QubitAssignment,
    ac: &AnsatzConfig,
) -> BTreeMap<String, usize> {
    lexicon
        .entries()
        .iter()
        .map(|t| (t.name().to_string(), ac.slot_count(qa.block_width(t.kind()))))
        .collect()
}

/// Ansatz unitary on `register`, slots drawn from `symbol`.
pub fn ansatz(register: &[usize], symbol: usize, ac: &AnsatzConfig) -> Vec<Gate<ParamRef>> {
    let p = |slot| ParamRef { symbol, slot };
    match register.len() {
        0 => Vec::new(),
        1 => {
            let q = register[0];
            vec![Gate::Rx(q, p(0)), Gate::Rz(q, p(1)), Gate::Rx(q, p(2))]
        }
        k => {
            let mut gates = Vec::with_capacity(ac.iqp_layers * (2 * k - 1));
            let mut slot = 0;
            for _ in 0..ac.iqp_layers {
                gates.extend(register.iter().map(|&q| Gate::H(q)));
                for pair in register.windows(2) {
                    gates.push(Gate::Crz(pair[0], pair[1], p(slot)));
                    slot += 1;
                }
            }
            gates
        }
    }
}

/// Splits a word's qubits (listed in wire order) into rotation-input and
/// remaining qubits.
pub fn split_word_qubits(word: &WordBox, qubits: &[usize], qa: &QubitAssignment) -> (Vec<usize>, Vec<usize>) {
    let inputs = rotation_inputs(word.token.kind());
    let mut ins = Vec::new();
    let mut outs = Vec::new();
    let mut at = 0;
    for (p, f) in word.ty.factors().iter().enumerate() {
        let q = qa.qubits(f.base);
        let chunk = &qubits[at..at + q];
        if inputs.contains(&p) {
            ins.extend_from_slice(chunk);
        } else {
            outs.extend_from_slice(chunk);
        }
        at += q;
    }
    (ins, outs)
}

/// State preparation of an unrotated word on fresh qubits in `|0…0⟩`.
pub fn state_prep(
    word: &WordBox,
    qubits: &[usize],
    symbol: usize,
    qa: &QubitAssignment,
    ac: &AnsatzConfig,
) -> Vec<Gate<ParamRef>> {
    let (ins, outs) = split_word_qubits(word, qubits, qa);
    let mut gates = Vec::new();
    if ins.len() <= outs.len() {
        for (&o, &i) in outs.iter().zip(&ins) {
            gates.push(Gate::H(o));
            gates.push(Gate::Cnot(o, i));
        }
        gates.extend(ansatz(&outs, symbol, ac));
    } else {
        for (&i, &o) in ins.iter().zip(&outs) {
            gates.push(Gate::H(i));
            gates.push(Gate::Cnot(i, o));
        }
        // every gate of the ansatz is a symmetric matrix, so the transpose
        // is the same gates in reverse order
        let mut u = ansatz(&ins, symbol, ac);
        u.reverse();
        gates.extend(u);
    }
    gates
}

struct Builder<'a> {
    qa: &'a QubitAssignment,
    ac: &'a AnsatzConfig,
    width: usize,
    gates: Vec<Gate<ParamRef>>,
    postselect: Vec<usize>,
    symbols: Vec<String>,
    param_table: BTreeMap<String, usize>,
}

impl Builder<'_> {
    fn fresh(&mut self, n: usize) -> Vec<usize> {
        let qs = (self.width..self.width + n).collect();
        self.width += n;
        qs
    }

    fn symbol(&mut self, word: &WordBox) -> usize {
        let name = word.token.name();
        if let Some(i) = self.symbols.iter().position(|s| s == name) {
            return i;
        }
        self.symbols.push(name.to_string());
        let slots = self.ac.slot_count(self.qa.block_width(word.token.kind()));
        self.param_table.insert(name.to_string(), slots);
        self.symbols.len() - 1
    }
}

/// Compiles a sentence diagram (rewritten or not).
pub fn compile(
    d: &PregroupDiagram,
    qa: &QubitAssignment,
    ac: &AnsatzConfig,
) -> Result<ParamCircuit, CircuitError> {
    let open = d.open_types();
    if open.len() != 1 || open[0].base != Base::S || open[0].adjoint != 0 {
        let names: Vec<String> = open.iter().map(ToString::to_string).collect();
        return Err(CircuitError::NonSentenceDiagram(names.join(" ")));
    }
    d.validate().map_err(CircuitError::InvalidDiagram)?;

    let types = d.wire_types();
    let offsets = d.offsets();
    let mut b = Builder {
        qa,
        ac,
        width: 0,
        gates: Vec::new(),
        postselect: Vec::new(),
        symbols: Vec::new(),
        param_table: BTreeMap::new(),
    };
    let mut wire: Vec<Option<Vec<usize>>> = vec![None; types.len()];

    for (wi, word) in d.words.iter().enumerate() {
        if word.rotated {
            continue;
        }
        let mut qubits = Vec::new();
        for p in 0..word.ty.len() {
            let o = offsets[wi] + p;
            let qs = b.fresh(qa.qubits(types[o].base));
            qubits.extend_from_slice(&qs);
            wire[o] = Some(qs);
        }
        let sym = b.symbol(word);
        let prep = state_prep(word, &qubits, sym, qa, ac);
        b.gates.extend(prep);
    }

    let source: BTreeMap<usize, usize> = d.feeds.iter().map(|f| (f.into, f.from)).collect();
    let mut pending: Vec<usize> = (0..d.words.len()).filter(|&w| d.words[w].rotated).collect();
    while !pending.is_empty() {
        let ready = pending.iter().position(|&wi| {
            d.words[wi]
                .input_positions()
                .iter()
                .all(|p| wire[source[&(offsets[wi] + p)]].is_some())
        });
        let Some(k) = ready else {
            return Err(CircuitError::InvalidDiagram("feeds form a cycle".into()));
        };
        let wi = pending.remove(k);
        let word = &d.words[wi];
        let mut register = Vec::new();
        for p in word.input_positions() {
            register.extend(wire[source[&(offsets[wi] + p)]].as_ref().unwrap());
        }
        let a = register.len();
        let outputs = word.output_positions();
        let out_qubits: usize = outputs.iter().map(|&p| qa.qubits(types[offsets[wi] + p].base)).sum();
        if out_qubits > a {
            let extra = b.fresh(out_qubits - a);
            register.extend(extra);
        }
        let sym = b.symbol(word);
        let u = ansatz(&register, sym, ac);
        b.gates.extend(u);
        let mut at = 0;
        for p in outputs {
            let o = offsets[wi] + p;
            let q = qa.qubits(types[o].base);
            wire[o] = Some(register[at..at + q].to_vec());
            at += q;
        }
        b.postselect.extend_from_slice(&register[out_qubits..]);
    }

    for &(i, j) in &d.cups {
        let (Some(x), Some(y)) = (&wire[i], &wire[j]) else {
            return Err(CircuitError::InvalidDiagram(format!("cup ({i},{j}) on unassigned wire")));
        };
        for (&x, &y) in x.iter().zip(y) {
            b.gates.push(Gate::Cnot(x, y));
            b.gates.push(Gate::H(x));
            b.postselect.push(x);
            b.postselect.push(y);
        }
    }

    let read = wire[d.open_wires[0]]
        .clone()
        .ok_or_else(|| CircuitError::InvalidDiagram("open wire unassigned".into()))?;
    b.postselect.extend_from_slice(&read[1..]);
    debug_assert_eq!(b.width, b.postselect.len() + 1);
    Ok(ParamCircuit {
        width: b.width,
        gates: b.gates,
        postselect: b.postselect,
        readout: read[0],
        symbols: b.symbols,
        param_table: b.param_table,
    })
}

impl fmt::Display for QubitAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q_n={} q_s={}", self.q_n, self.q_s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, SplitName};
    use crate::diagram::{cfg_to_pregroup, rewrite};
    use crate::grammar::{parse, parse_tokens, Token};

    fn diagram(s: &str) -> PregroupDiagram {
        cfg_to_pregroup(&parse(&parse_tokens(s).unwrap()).unwrap())
    }

    /// Width straight from token letters: g=q_s, p=q_n, s=4q_n+q_s, t=3q_s.
    fn arithmetic_width(tokens: &[Token], q_n: usize, q_s: usize) -> usize {
        tokens
            .iter()
            .map(|t| match t.kind() {
                SnippetType::Ground => q_s,
                SnippetType::Primary => q_n,
                SnippetType::Secondary => 4 * q_n + q_s,
                SnippetType::Tertiary => 3 * q_s,
            })
            .sum()
    }

    #[test]
    fn single_ground() {
        let c = compile(&diagram("g1"), &QubitAssignment::default(), &AnsatzConfig::default()).unwrap();
        assert_eq!(c.width, 1);
        assert_eq!(c.gates.len(), 3);
        assert!(c.postselect.is_empty());
        assert_eq!(c.readout, 0);
    }

    #[test]
    fn basic_sequence_unrewritten() {
        let c = compile(
            &diagram("p4 p9 p7 p5 s1"),
            &QubitAssignment::default(),
            &AnsatzConfig::default(),
        )
        .unwrap();
        assert_eq!(c.width, 4 * 2 + (4 * 2 + 1));
        assert_eq!(c.postselect.len(), 16);
    }

    #[test]
    fn slot_layout() {
        let layout = param_vector_layout(
            &Lexicon::standard(),
            &QubitAssignment::default(),
            &AnsatzConfig::default(),
        );
        assert_eq!(layout.len(), 18);
        assert_eq!(layout["g1"], 3);
        // q_n=2: 3 layers * (2-1)
        assert_eq!(layout["p1"], 3);
        // rotated block on max(8, 1) qubits: 3 * 7
        assert_eq!(layout["s1"], 21);
        // max(1, 2) qubits: 3 * 1
        assert_eq!(layout["t1"], 3);
    }

    #[test]
    fn width_and_postselection_laws_on_corpus() {
        let qa = QubitAssignment::default();
        let ac = AnsatzConfig::default();
        for rec in Corpus::canonical().records {
            let d = cfg_to_pregroup(&parse(&rec.tokens).unwrap());
            let c = compile(&d, &qa, &ac).unwrap();
            assert_eq!(c.width, arithmetic_width(&rec.tokens, 2, 1));
            assert_eq!(c.postselect.len() + 1, c.width);
            let r = compile(&rewrite(&d), &qa, &ac).unwrap();
            assert_eq!(r.postselect.len() + 1, r.width);
            assert!(!r.postselect.contains(&r.readout));
            assert!(r.width <= c.width);
            for g in &r.gates {
                let p = g.param().map(|p| p.slot);
                if let Some(slot) = p {
                    let sym = &r.symbols[g.param().unwrap().symbol];
                    assert!(slot < r.param_table[sym]);
                }
            }
        }
    }

    #[test]
    fn only_two_one_assignment_gives_paper_width() {
        let corpus = Corpus::canonical();
        let train: Vec<_> = corpus.subset(SplitName::Train);
        let mut hits = Vec::new();
        for q_n in 1..=3 {
            for q_s in 1..=3 {
                let qa = QubitAssignment::new(q_n, q_s).unwrap();
                let max = train
                    .iter()
                    .map(|r| {
                        compile(&cfg_to_pregroup(&parse(&r.tokens).unwrap()), &qa, &AnsatzConfig::default())
                            .unwrap()
                            .width
                    })
                    .max()
                    .unwrap();
                let oracle = train.iter().map(|r| arithmetic_width(&r.tokens, q_n, q_s)).max().unwrap();
                assert_eq!(max, oracle);
                if max == 25 {
                    hits.push((q_n, q_s));
                }
            }
        }
        assert_eq!(hits, vec![(2, 1)]);
    }

    #[test]
    fn rewrite_halves_postselections_on_composite_shape() {
        let qa = QubitAssignment::default();
        let ac = AnsatzConfig::default();
        let d = diagram("t1 g1 t3 g1 g1");
        assert_eq!(compile(&d, &qa, &ac).unwrap().postselect.len(), 8);
        assert_eq!(compile(&rewrite(&d), &qa, &ac).unwrap().postselect.len(), 4);
    }

    #[test]
    fn iqp_structure() {
        let ac = AnsatzConfig::default();
        let gates = ansatz(&[0, 1, 2, 3], 0, &ac);
        let layer: Vec<&str> = gates[..7].iter().map(|g| g.name()).collect();
        assert_eq!(layer, ["h", "h", "h", "h", "crz", "crz", "crz"]);
        let params = gates.iter().filter(|g| g.param().is_some()).count();
        assert_eq!(params, ac.slot_count(4));
    }

    #[test]
    fn bind_errors_and_stability() {
        let c = compile(&diagram("t3 g1 g1"), &QubitAssignment::default(), &AnsatzConfig::default()).unwrap();
        let mut params = BTreeMap::new();
        params.insert("t3".to_string(), vec![0.1, 0.2, 0.3]);
        assert_eq!(c.bind(&params), Err(CircuitError::MissingParameters("g1".into())));
        params.insert("g1".to_string(), vec![0.0; 2]);
        assert!(matches!(c.bind(&params), Err(CircuitError::SlotCountMismatch { .. })));
        params.insert("g1".to_string(), vec![0.4, 0.5, 0.6]);
        assert_eq!(c.bind(&params).unwrap(), c.bind(&params).unwrap());
    }

    #[test]
    fn non_sentence_is_rejected() {
        let mut d = diagram("g1");
        d.words[0] = WordBox::new(Token::new("p1").unwrap());
        assert!(matches!(
            compile(&d, &QubitAssignment::default(), &AnsatzConfig::default()),
            Err(CircuitError::NonSentenceDiagram(_))
        ));
    }

    #[test]
    fn dump_lists_symbols() {
        let c = compile(&diagram("g2"), &QubitAssignment::default(), &AnsatzConfig::default()).unwrap();
        assert_eq!(
            c.dump(),
            "width 1\nrx q0 g2[0]\nrz q0 g2[1]\nrx q0 g2[2]\npostselect \nreadout 0\n"
        );
    }
}
