//! Statevector simulation: exact postselected evaluation, shot sampling and
//! a Pauli-trajectory noise model. Qubit 0 is the least significant bit of
//! the amplitude index.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Gate};

pub const DEFAULT_WIDTH_CAP: usize = 26;

/// Widest circuit for which per-gate clean states are cached while sampling.
const PREFIX_CACHE_WIDTH: usize = 14;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("circuit width {width} exceeds the simulator cap of {cap} qubits")]
    WidthExceeded { width: usize, cap: usize },
    #[error("none of the {shots} shots survived postselection")]
    ZeroUsableShots { shots: u64 },
    #[error("invalid noise configuration: {0}")]
    InvalidNoise(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    const NON_IDENTITY: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];
    const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    width: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `width` qubits.
    pub fn zero(width: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << width];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { width, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Self {
        assert!(amps.len().is_power_of_two(), "length must be a power of two");
        let width = amps.len().trailing_zeros() as usize;
        StateVector { width, amps }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn apply(&mut self, gate: &Gate<f64>) {
        apply_gate(&mut self.amps, gate);
    }

    pub fn apply_pauli(&mut self, q: usize, p: Pauli) {
        apply_pauli(&mut self.amps, q, p);
    }

    /// Runs every gate of `c` from `|0…0⟩`, ignoring postselection.
    pub fn run(c: &Circuit) -> Self {
        let mut s = StateVector::zero(c.width);
        for g in &c.gates {
            s.apply(g);
        }
        s
    }
}

fn apply_1q(amps: &mut [Complex64], q: usize, m: [[Complex64; 2]; 2]) {
    let bit = 1usize << q;
    for base in 0..amps.len() {
        if base & bit != 0 {
            continue;
        }
        let (a, b) = (amps[base], amps[base | bit]);
        amps[base] = m[0][0] * a + m[0][1] * b;
        amps[base | bit] = m[1][0] * a + m[1][1] * b;
    }
}

fn apply_gate(amps: &mut [Complex64], gate: &Gate<f64>) {
    match *gate {
        Gate::H(q) => {
            let bit = 1usize << q;
            let r = std::f64::consts::FRAC_1_SQRT_2;
            for i in 0..amps.len() {
                if i & bit == 0 {
                    let (a, b) = (amps[i], amps[i | bit]);
                    amps[i] = (a + b) * r;
                    amps[i | bit] = (a - b) * r;
                }
            }
        }
        Gate::Rx(q, theta) => {
            let c = Complex64::new((theta / 2.0).cos(), 0.0);
            let s = Complex64::new(0.0, -(theta / 2.0).sin());
            apply_1q(amps, q, [[c, s], [s, c]]);
        }
        Gate::Rz(q, theta) => {
            let bit = 1usize << q;
            let lo = Complex64::from_polar(1.0, -theta / 2.0);
            let hi = Complex64::from_polar(1.0, theta / 2.0);
            for (i, a) in amps.iter_mut().enumerate() {
                *a *= if i & bit == 0 { lo } else { hi };
            }
        }
        Gate::Crz(c, t, theta) => {
            let (cb, tb) = (1usize << c, 1usize << t);
            let lo = Complex64::from_polar(1.0, -theta / 2.0);
            let hi = Complex64::from_polar(1.0, theta / 2.0);
            for (i, a) in amps.iter_mut().enumerate() {
                if i & cb != 0 {
                    *a *= if i & tb == 0 { lo } else { hi };
                }
            }
        }
        Gate::Cnot(c, t) => {
            let (cb, tb) = (1usize << c, 1usize << t);
            for i in 0..amps.len() {
                if i & cb != 0 && i & tb == 0 {
                    amps.swap(i, i | tb);
                }
            }
        }
    }
}

fn apply_pauli(amps: &mut [Complex64], q: usize, p: Pauli) {
    let bit = 1usize << q;
    match p {
        Pauli::I => {}
        Pauli::X => {
            for i in 0..amps.len() {
                if i & bit == 0 {
                    amps.swap(i, i | bit);
                }
            }
        }
        Pauli::Y => {
            let j = Complex64::new(0.0, 1.0);
            for i in 0..amps.len() {
                if i & bit == 0 {
                    let (a, b) = (amps[i], amps[i | bit]);
                    amps[i] = -j * b;
                    amps[i | bit] = j * a;
                }
            }
        }
        Pauli::Z => {
            for (i, a) in amps.iter_mut().enumerate() {
                if i & bit != 0 {
                    *a = -*a;
                }
            }
        }
    }
}

/// Unnormalized readout weights `(L0, L1)` after postselection.
pub fn evaluate_exact(c: &Circuit) -> Result<(f64, f64), SimError> {
    evaluate_exact_capped(c, DEFAULT_WIDTH_CAP)
}

/// As [`evaluate_exact`] with an explicit width cap.
///
/// Qubits join the register at their first gate and postselected qubits
/// are projected out right after their last one, so the live register is
/// usually much narrower than the circuit.
pub fn evaluate_exact_capped(c: &Circuit, cap: usize) -> Result<(f64, f64), SimError> {
    if c.width > cap {
        return Err(SimError::WidthExceeded {
            width: c.width,
            cap,
        });
    }
    let mut last_use = vec![usize::MAX; c.width];
    for (i, g) in c.gates.iter().enumerate() {
        for q in g.qubits() {
            last_use[q] = i;
        }
    }
    let mut selected = vec![false; c.width];
    for &q in &c.postselect {
        selected[q] = true;
    }

    let mut slot: Vec<Option<usize>> = vec![None; c.width];
    let mut live: Vec<usize> = Vec::new();
    let mut amps = vec![Complex64::new(1.0, 0.0)];
    for (i, g) in c.gates.iter().enumerate() {
        let qs = g.qubits();
        for &q in &qs {
            if slot[q].is_none() {
                slot[q] = Some(live.len());
                live.push(q);
                amps.resize(amps.len() * 2, Complex64::new(0.0, 0.0));
            }
        }
        let local = match *g {
            Gate::H(q) => Gate::H(slot[q].unwrap()),
            Gate::Rx(q, t) => Gate::Rx(slot[q].unwrap(), t),
            Gate::Rz(q, t) => Gate::Rz(slot[q].unwrap(), t),
            Gate::Crz(a, b, t) => Gate::Crz(slot[a].unwrap(), slot[b].unwrap(), t),
            Gate::Cnot(a, b) => Gate::Cnot(slot[a].unwrap(), slot[b].unwrap()),
        };
        apply_gate(&mut amps, &local);
        for &q in &qs {
            if selected[q] && last_use[q] == i {
                let p = slot[q].take().unwrap();
                amps = project_out(&amps, p);
                live.remove(p);
                for (k, &lq) in live.iter().enumerate().skip(p) {
                    slot[lq] = Some(k);
                }
            }
        }
    }
    let (mut l0, mut l1) = (0.0, 0.0);
    match slot[c.readout] {
        None => l0 = amps.iter().map(|a| a.norm_sqr()).sum(),
        Some(p) => {
            for (i, a) in amps.iter().enumerate() {
                if i >> p & 1 == 0 {
                    l0 += a.norm_sqr();
                } else {
                    l1 += a.norm_sqr();
                }
            }
        }
    }
    Ok((l0, l1))
}

/// Keeps the amplitudes where bit `p` is 0 and drops that bit.
fn project_out(amps: &[Complex64], p: usize) -> Vec<Complex64> {
    let low = (1usize << p) - 1;
    (0..amps.len() / 2)
        .map(|j| amps[((j >> p) << (p + 1)) | (j & low)])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub p1: f64,
    pub p2: f64,
    pub p_read: f64,
    pub enabled: bool,
}

impl NoiseConfig {
    pub fn new(p1: f64, p2: f64, p_read: f64) -> Result<Self, SimError> {
        for (name, p) in [("p1", p1), ("p2", p2), ("p_read", p_read)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidNoise(format!("{name}={p} is not in [0, 1]")));
            }
        }
        Ok(NoiseConfig {
            p1,
            p2,
            p_read,
            enabled: true,
        })
    }

    pub fn disabled() -> Self {
        NoiseConfig {
            enabled: false,
            ..NoiseConfig::default()
        }
    }

    fn gate_probability(&self, arity: usize) -> f64 {
        match (self.enabled, arity) {
            (false, _) => 0.0,
            (true, 1) => self.p1,
            (true, _) => self.p2,
        }
    }

    fn read_flip(&self) -> f64 {
        if self.enabled {
            self.p_read
        } else {
            0.0
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            p1: 0.001,
            p2: 0.01,
            p_read: 0.02,
            enabled: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotResult {
    pub shots_requested: u64,
    pub shots_usable: u64,
    /// Tallies of readout outcome 0 and 1 among usable shots.
    pub counts: [u64; 2],
}

/// Draws the depolarizing error following `gate`: with probability `p1` or
/// `p2` (by arity) a uniformly chosen non-identity Pauli string on its
/// qubits, otherwise nothing.
fn draw_error<R: Rng + ?Sized>(gate: &Gate<f64>, noise: &NoiseConfig, rng: &mut R) -> Option<Vec<Pauli>> {
    let p = noise.gate_probability(gate.arity());
    if p == 0.0 || !rng.random_bool(p) {
        return None;
    }
    Some(if gate.arity() == 1 {
        vec![Pauli::NON_IDENTITY[rng.random_range(0..3)]]
    } else {
        // index 0 would be I⊗I
        let k = rng.random_range(1..16);
        vec![Pauli::ALL[k % 4], Pauli::ALL[k / 4]]
    })
}

/// Trajectory step: after `gate` has been applied to `state`, applies a
/// random depolarizing error on its qubits.
pub fn apply_noise_channel<R: Rng + ?Sized>(
    state: &mut StateVector,
    gate: &Gate<f64>,
    noise: &NoiseConfig,
    rng: &mut R,
) {
    if let Some(paulis) = draw_error(gate, noise, rng) {
        for (q, p) in gate.qubits().into_iter().zip(paulis) {
            state.apply_pauli(q, p);
        }
    }
}

type ErrorPattern = Vec<(usize, Vec<Pauli>)>;

/// Samples `shots` runs of `c`. Each shot draws its own error trajectory;
/// shots sharing a trajectory share one statevector simulation.
pub fn sample<R: Rng + ?Sized>(
    c: &Circuit,
    shots: u64,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<ShotResult, SimError> {
    if c.width > DEFAULT_WIDTH_CAP {
        return Err(SimError::WidthExceeded {
            width: c.width,
            cap: DEFAULT_WIDTH_CAP,
        });
    }
    let mut patterns: BTreeMap<ErrorPattern, u64> = BTreeMap::new();
    for _ in 0..shots {
        let mut pattern = Vec::new();
        for (i, g) in c.gates.iter().enumerate() {
            if let Some(p) = draw_error(g, noise, rng) {
                pattern.push((i, p));
            }
        }
        *patterns.entry(pattern).or_default() += 1;
    }

    let cache: Option<Vec<StateVector>> = (patterns.len() > 1 && c.width <= PREFIX_CACHE_WIDTH).then(|| {
        let mut s = StateVector::zero(c.width);
        let mut states = Vec::with_capacity(c.gates.len());
        for g in &c.gates {
            s.apply(g);
            states.push(s.clone());
        }
        states
    });

    let flip = noise.read_flip();
    let mut result = ShotResult {
        shots_requested: shots,
        shots_usable: 0,
        counts: [0, 0],
    };
    for (pattern, count) in &patterns {
        let state = match (&cache, pattern.first()) {
            (Some(states), Some(&(first, _))) => {
                let mut s = states[first].clone();
                finish_trajectory(&mut s, c, pattern, first);
                s
            }
            (Some(states), None) if !c.gates.is_empty() => states[c.gates.len() - 1].clone(),
            _ => {
                let mut s = StateVector::zero(c.width);
                for (i, g) in c.gates.iter().enumerate() {
                    s.apply(g);
                    apply_pattern_at(&mut s, c, pattern, i);
                }
                s
            }
        };
        let cdf = cumulative(&state.probabilities());
        for _ in 0..*count {
            let u = rng.random::<f64>() * cdf[cdf.len() - 1];
            let idx = cdf.partition_point(|&x| x <= u).min(cdf.len() - 1);
            let read = |q: usize, rng: &mut R| {
                let bit = idx >> q & 1 == 1;
                if flip > 0.0 && rng.random_bool(flip) {
                    !bit
                } else {
                    bit
                }
            };
            let mut usable = true;
            for &q in &c.postselect {
                if read(q, rng) {
                    usable = false;
                }
            }
            let out = read(c.readout, rng);
            if usable {
                result.shots_usable += 1;
                result.counts[out as usize] += 1;
            }
        }
    }
    if result.shots_usable == 0 {
        return Err(SimError::ZeroUsableShots { shots });
    }
    Ok(result)
}

fn apply_pattern_at(s: &mut StateVector, c: &Circuit, pattern: &ErrorPattern, gate: usize) {
    for (i, paulis) in pattern {
        if *i == gate {
            for (q, p) in c.gates[gate].qubits().into_iter().zip(paulis) {
                s.apply_pauli(q, *p);
            }
        }
    }
}

/// Continues a state that already includes gates `0..=first` but not the
/// error at `first`.
fn finish_trajectory(s: &mut StateVector, c: &Circuit, pattern: &ErrorPattern, first: usize) {
    apply_pattern_at(s, c, pattern, first);
    for i in first + 1..c.gates.len() {
        s.apply(&c.gates[i]);
        apply_pattern_at(s, c, pattern, i);
    }
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}
