#![allow(dead_code)]

use std::f64::consts::PI;

use opsens::circuit::{Auxiliary, Circuit, CircuitDef, Component, Detection, Outcome};
use opsens::fock::PureState;
use opsens::metrology::{haar_state, herald_probability};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random heralded gate with at most 3 modes, 2 photons and 4 components.
/// Mode 0 (and for 3 modes possibly mode 1) is the input; the rest carry a
/// Fock ancilla and are detected.
pub fn random_gate(rng: &mut ChaCha8Rng) -> Circuit {
    let num_modes = rng.random_range(2..=3usize);
    let n_in = if num_modes == 3 {
        rng.random_range(1..=2usize)
    } else {
        1
    };
    let input_modes: Vec<usize> = (0..n_in).collect();
    let aux_modes: Vec<usize> = (n_in..num_modes).collect();

    let max_in = rng.random_range(1..=2usize);
    let mut input_sectors: Vec<usize> = (0..=max_in).filter(|_| rng.random_bool(0.7)).collect();
    if !input_sectors.contains(&max_in) {
        input_sectors.push(max_in);
    }
    let aux_photons = rng.random_range(0..=2 - max_in);
    let mut occupation = vec![0u8; aux_modes.len()];
    for _ in 0..aux_photons {
        let k = rng.random_range(0..aux_modes.len());
        occupation[k] += 1;
    }
    let max_total = max_in + aux_photons;
    let mut pattern = vec![0u8; aux_modes.len()];
    for _ in 0..rng.random_range(0..=max_total) {
        let k = rng.random_range(0..aux_modes.len());
        pattern[k] += 1;
    }

    let n_comp = rng.random_range(1..=4usize);
    let components = (0..n_comp)
        .map(|i| {
            let label = format!("C{}", i + 1);
            let theta = rng.random_range(-PI..PI);
            if rng.random_bool(0.8) {
                let mut modes: Vec<usize> = (0..num_modes).collect();
                modes.shuffle(rng);
                Component::beam_splitter(label, (modes[0], modes[1]), theta)
            } else {
                Component::phase_shifter(label, rng.random_range(0..num_modes), theta)
            }
        })
        .collect();

    Circuit::new(CircuitDef {
        name: "random".into(),
        num_modes,
        polarised: false,
        components,
        input_modes,
        input_sectors,
        auxiliary: Some(Auxiliary::fock(aux_modes.clone(), occupation)),
        detection: Detection::Herald {
            modes: aux_modes,
            outcome: Outcome {
                label: "H".into(),
                patterns: vec![pattern],
            },
        },
    })
    .expect("random circuit is well formed")
}

/// Draws random gates until one heralds `input` with probability above
/// `min_p`; returns the circuit and its Haar input.
pub fn random_heralded_gate(rng: &mut ChaCha8Rng, min_p: f64) -> (Circuit, PureState) {
    loop {
        let circuit = random_gate(rng);
        let input = haar_state(circuit.input_basis(), rng.random(), 0);
        if herald_probability(&circuit, &input).unwrap() > min_p {
            return (circuit, input);
        }
    }
}

/// Least-squares fit of `a + bx + cx²`; returns `(a, b, c)`.
pub fn quadratic_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let mut m = nalgebra::Matrix3::<f64>::zeros();
    let mut v = nalgebra::Vector3::<f64>::zeros();
    for (&x, &y) in xs.iter().zip(ys) {
        let row = [1.0, x, x * x];
        for i in 0..3 {
            v[i] += row[i] * y;
            for j in 0..3 {
                m[(i, j)] += row[i] * row[j];
            }
        }
    }
    let s = m.lu().solve(&v).expect("non-degenerate abscissae");
    (s[0], s[1], s[2])
}
