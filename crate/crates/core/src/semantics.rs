//! Reference semantics of diagrams by direct tensor contraction.
//!
//! Every qubit of every wire is a dimension-2 index. A cup or feed makes its
//! two occurrences share indices; contracting all word tensors leaves a
//! vector over the open wire. Cups are plain index identification here,
//! without the `1/sqrt 2` of a physical Bell effect, so circuit
//! probabilities agree with this vector only after normalization.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::circuit::{ansatz, state_prep, AnsatzConfig, Circuit, CircuitError, QubitAssignment};
use crate::diagram::PregroupDiagram;
use crate::sim::StateVector;

/// Dense tensor whose index bit `j` belongs to `labels[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub labels: Vec<usize>,
    pub data: Vec<Complex64>,
}

impl Tensor {
    pub fn scalar(v: Complex64) -> Self {
        Tensor {
            labels: Vec::new(),
            data: vec![v],
        }
    }

    /// Sums over labels present in both tensors; the result carries the
    /// free labels of `self` followed by those of `other`.
    pub fn contract(&self, other: &Tensor) -> Tensor {
        let shared: Vec<usize> = self
            .labels
            .iter()
            .copied()
            .filter(|l| other.labels.contains(l))
            .collect();
        let free_a: Vec<usize> = self.labels.iter().copied().filter(|l| !shared.contains(l)).collect();
        let free_b: Vec<usize> = other.labels.iter().copied().filter(|l| !shared.contains(l)).collect();
        let pos = |labels: &[usize], l: usize| labels.iter().position(|&x| x == l).unwrap();
        let a_free_bits: Vec<usize> = free_a.iter().map(|&l| pos(&self.labels, l)).collect();
        let b_free_bits: Vec<usize> = free_b.iter().map(|&l| pos(&other.labels, l)).collect();
        let a_shared_bits: Vec<usize> = shared.iter().map(|&l| pos(&self.labels, l)).collect();
        let b_shared_bits: Vec<usize> = shared.iter().map(|&l| pos(&other.labels, l)).collect();
        let scatter = |value: usize, bits: &[usize]| -> usize {
            bits.iter()
                .enumerate()
                .fold(0, |acc, (k, &b)| acc | ((value >> k & 1) << b))
        };

        let nfa = free_a.len();
        let mut data = vec![Complex64::new(0.0, 0.0); 1 << (nfa + free_b.len())];
        let shared_a: Vec<usize> = (0..1usize << shared.len()).map(|s| scatter(s, &a_shared_bits)).collect();
        let shared_b: Vec<usize> = (0..1usize << shared.len()).map(|s| scatter(s, &b_shared_bits)).collect();
        for (r, slot) in data.iter_mut().enumerate() {
            let ai = scatter(r & ((1 << nfa) - 1), &a_free_bits);
            let bi = scatter(r >> nfa, &b_free_bits);
            *slot = shared_a
                .iter()
                .zip(&shared_b)
                .map(|(sa, sb)| self.data[ai | sa] * other.data[bi | sb])
                .sum();
        }
        let mut labels = free_a;
        labels.extend(free_b);
        Tensor { labels, data }
    }

    /// Reorders the index bits to follow `order`, which must be a
    /// permutation of `labels`.
    pub fn permuted(&self, order: &[usize]) -> Tensor {
        let src: Vec<usize> = order
            .iter()
            .map(|l| self.labels.iter().position(|x| x == l).expect("label missing"))
            .collect();
        let data = (0..self.data.len())
            .map(|i| {
                let j = src
                    .iter()
                    .enumerate()
                    .fold(0, |acc, (k, &b)| acc | ((i >> k & 1) << b));
                self.data[j]
            })
            .collect();
        Tensor {
            labels: order.to_vec(),
            data,
        }
    }
}

fn word_params<'a>(
    params: &'a BTreeMap<String, Vec<f64>>,
    name: &str,
    expected: usize,
) -> Result<&'a [f64], CircuitError> {
    let v = params
        .get(name)
        .ok_or_else(|| CircuitError::MissingParameters(name.to_string()))?;
    if v.len() != expected {
        return Err(CircuitError::SlotCountMismatch {
            symbol: name.to_string(),
            expected,
            found: v.len(),
        });
    }
    Ok(v)
}

/// Contracts the word tensors of `d` and returns the amplitudes of the open
/// wire (qubit 0 least significant).
pub fn tensor_eval(
    d: &PregroupDiagram,
    params: &BTreeMap<String, Vec<f64>>,
    qa: &QubitAssignment,
    ac: &AnsatzConfig,
) -> Result<Vec<Complex64>, CircuitError> {
    let types = d.wire_types();
    let offsets = d.offsets();
    let mut rep: Vec<usize> = (0..types.len()).collect();
    for &(i, j) in &d.cups {
        rep[j] = i;
    }
    for f in &d.feeds {
        rep[f.into] = f.from;
    }
    let stride = qa.q_n.max(qa.q_s);
    let labels_of = |o: usize| -> Vec<usize> {
        (0..qa.qubits(types[o].base)).map(|k| rep[o] * stride + k).collect()
    };

    let mut acc = Tensor::scalar(Complex64::new(1.0, 0.0));
    for (wi, word) in d.words.iter().enumerate() {
        let kind = word.token.kind();
        let (a, b) = qa.block_shape(kind);
        let m = a.max(b);
        let theta = word_params(params, word.token.name(), ac.slot_count(m))?;
        let bind = |gates: Vec<crate::circuit::Gate<crate::circuit::ParamRef>>| -> Vec<_> {
            gates.iter().map(|g| g.map_param(|p| theta[p.slot])).collect()
        };

        let tensor = if word.rotated {
            let mut ins = Vec::new();
            for &p in word.input_positions() {
                ins.extend(labels_of(offsets[wi] + p));
            }
            let mut outs = Vec::new();
            for p in word.output_positions() {
                outs.extend(labels_of(offsets[wi] + p));
            }
            let register: Vec<usize> = (0..m).collect();
            let u = bind(ansatz(&register, 0, ac));
            let scale = 0.5f64.powf(a.min(b) as f64 / 2.0);
            let mut data = vec![Complex64::new(0.0, 0.0); 1 << (a + b)];
            for i in 0..1usize << a {
                let mut amps = vec![Complex64::new(0.0, 0.0); 1 << m];
                amps[i] = Complex64::new(1.0, 0.0);
                let mut s = StateVector::from_amplitudes(amps);
                for g in &u {
                    s.apply(g);
                }
                for o in 0..1usize << b {
                    data[o | (i << b)] = s.amplitudes()[o] * scale;
                }
            }
            let mut labels = outs;
            labels.extend(ins);
            Tensor { labels, data }
        } else {
            let n = a + b;
            let qubits: Vec<usize> = (0..n).collect();
            let prep = bind(state_prep(word, &qubits, 0, qa, ac));
            let s = StateVector::run(&Circuit::new(n, prep, Vec::new(), 0));
            let mut labels = Vec::with_capacity(n);
            for p in 0..word.ty.len() {
                labels.extend(labels_of(offsets[wi] + p));
            }
            Tensor {
                labels,
                data: s.amplitudes().to_vec(),
            }
        };
        acc = acc.contract(&tensor);
    }

    let open: Vec<usize> = d.open_wires.iter().flat_map(|&o| labels_of(o)).collect();
    Ok(acc.permuted(&open).data)
}
