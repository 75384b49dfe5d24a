use quantone::circuit::{Circuit, Gate};
use quantone::sim::{sample, NoiseConfig, Pauli, StateVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Exact noisy statistics by enumerating every Pauli error pattern:
/// returns `(P(usable), P(usable and readout 1))`.
fn enumerate(c: &Circuit, noise: &NoiseConfig) -> (f64, f64) {
    let options: Vec<Vec<(f64, Vec<Pauli>)>> = c
        .gates
        .iter()
        .map(|g| {
            let mut v = Vec::new();
            if g.arity() == 1 {
                v.push((1.0 - noise.p1, vec![]));
                for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                    v.push((noise.p1 / 3.0, vec![p]));
                }
            } else {
                v.push((1.0 - noise.p2, vec![]));
                let all = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
                for a in all {
                    for b in all {
                        if (a, b) != (Pauli::I, Pauli::I) {
                            v.push((noise.p2 / 15.0, vec![a, b]));
                        }
                    }
                }
            }
            v
        })
        .collect();

    let mut usable = 0.0;
    let mut one = 0.0;
    let mut choice = vec![0usize; options.len()];
    loop {
        let mut weight = 1.0;
        let mut s = StateVector::zero(c.width);
        for (i, g) in c.gates.iter().enumerate() {
            s.apply(g);
            let (w, paulis) = &options[i][choice[i]];
            weight *= w;
            for (q, p) in g.qubits().into_iter().zip(paulis) {
                s.apply_pauli(q, *p);
            }
        }
        for (x, a) in s.amplitudes().iter().enumerate() {
            let p = a.norm_sqr() * weight;
            // every measured bit flips independently
            let mut ok = 1.0;
            for &q in &c.postselect {
                ok *= if x >> q & 1 == 0 { 1.0 - noise.p_read } else { noise.p_read };
            }
            let read1 = if x >> c.readout & 1 == 1 { 1.0 - noise.p_read } else { noise.p_read };
            usable += p * ok;
            one += p * ok * read1;
        }
        let mut k = 0;
        loop {
            if k == choice.len() {
                return (usable, one);
            }
            choice[k] += 1;
            if choice[k] < options[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

#[test]
fn noisy_sampling_matches_enumerated_channel() {
    let c = Circuit::new(
        3,
        vec![
            Gate::H(0),
            Gate::Cnot(0, 1),
            Gate::Rx(2, 0.7),
            Gate::Crz(1, 2, 1.1),
            Gate::H(2),
        ],
        vec![1],
        2,
    );
    let noise = NoiseConfig::new(0.1, 0.2, 0.05).unwrap();
    let (usable, one) = enumerate(&c, &noise);
    let shots = 200_000u64;
    let r = sample(&c, shots, &noise, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();

    let n = shots as f64;
    let sd_u = (usable * (1.0 - usable) / n).sqrt();
    assert!(
        (r.shots_usable as f64 / n - usable).abs() < 4.0 * sd_u,
        "survival {} vs {usable}",
        r.shots_usable as f64 / n
    );
    let p1 = one / usable;
    let m = r.shots_usable as f64;
    let sd_p = (p1 * (1.0 - p1) / m).sqrt();
    assert!(
        (r.counts[1] as f64 / m - p1).abs() < 4.0 * sd_p,
        "P(1 | usable) {} vs {p1}",
        r.counts[1] as f64 / m
    );
}

#[test]
fn enumeration_without_noise_is_the_pure_state() {
    let c = Circuit::new(2, vec![Gate::H(0), Gate::Cnot(0, 1)], vec![], 1);
    let noise = NoiseConfig::new(0.0, 0.0, 0.0).unwrap();
    let (usable, one) = enumerate(&c, &noise);
    assert!((usable - 1.0).abs() < 1e-12);
    assert!((one - 0.5).abs() < 1e-12);
}
