//! Built-in devices: the KLM and Reverse nonlinear-sign gates and the
//! Grice and Ewert–van Loock enhanced Bell detectors.
//!
//! Every entry re-checks its defining behaviour when it is built: the NS
//! gates must map `α|0⟩+β|1⟩+γ|2⟩ → α|0⟩+β|1⟩−γ|2⟩` (up to a global phase)
//! with success probability 1/4, and the Bell detectors must herald with total probability 3/4 and
//! always identify `Ψ±`.
//!
//! Polarised devices use spatial modes `a, b, c, d = 0, 1, 2, 3`; optical mode
//! `2k` is H and `2k+1` is V of spatial mode `k`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;

use crate::circuit::{Auxiliary, Circuit, CircuitDef, Component, Detection, Outcome, ReferenceBasis};
use crate::fock::{FockBasis, PureState};
use crate::{Error, Result};

/// Catalog names accepted by [`get`].
pub const NAMES: [&str; 4] = ["klm_ns", "reverse_ns", "grice", "evl"];

/// Angle expressions of the KLM NS gate.
pub const KLM_THETA: [&str; 3] = [
    "arccos(sqrt(1/(4 - 2*sqrt(2))))",
    "pi - arccos(sqrt(3 - 2*sqrt(2)))",
    "-arccos(sqrt(1/(4 - 2*sqrt(2))))",
];

/// Angle expressions of the Reverse NS gate.
pub const REVERSE_XI: [&str; 3] = [
    "arctan(8^(1/4))",
    "pi - arctan(sqrt(16*sqrt(2) - 13)/7)",
    "-arctan(8^(1/4))",
];

/// Labels of the Bell basis, in register order.
pub const BELL_LABELS: [&str; 4] = ["PHI+", "PHI-", "PSI+", "PSI-"];

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub circuit: Circuit,
    pub standard_inputs: Vec<(String, PureState)>,
    pub notes: &'static str,
}

impl CatalogEntry {
    pub fn input(&self, name: &str) -> Option<&PureState> {
        self.standard_inputs.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }
}

/// Looks up an entry by name. `grice_bell` and `evl_bell` are accepted as
/// aliases.
pub fn get(name: &str) -> Result<CatalogEntry> {
    match name {
        "klm_ns" => klm_ns(),
        "reverse_ns" => reverse_ns(),
        "grice" | "grice_bell" => grice_bell(),
        "evl" | "evl_bell" => evl_bell(),
        _ => Err(Error::config(
            "catalog",
            format!("unknown entry `{name}`; known: {}", NAMES.join(", ")),
        )),
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

const KLM_NOTES: &str = "Mode 0 carries the signal, modes 1 and 2 the ancilla |1,0>. \
BS1 mixes the ancilla modes (1,2), BS2 couples signal and ancilla (0,1), BS3 acts on (2,1). \
Heralded by one photon in mode 1 and none in mode 2; the map carries an overall sign of -1. \
The angles use amplitude transmissions: cos^2(theta1) = 1/(4-2*sqrt(2)) and cos^2(theta2) = 3-2*sqrt(2).";

const REVERSE_NOTES: &str = "Mode 0 carries the signal, modes 1 and 2 the ancilla |1,0>. \
BS1 couples signal and ancilla (0,1), BS2 mixes the ancilla modes (1,2), BS3 repeats (0,1). \
Heralded by one photon in mode 1 and none in mode 2.";

const GRICE_NOTES: &str = "Input photons in spatial modes a and b, ancilla |PHI+> in c and d. \
BS1 (a,c) and BS2 (b,d) are met first, then BS3 (a,b) and BS4 (c,d); all 50:50. \
Photon-number-resolving detection of H and V in all four outputs.";

const EVL_NOTES: &str = "Input photons in spatial modes a and b, ancillas (|2H>+|2V>)/sqrt(2) in c and d. \
BS1 (a,b), then BS2 (a,c) and BS3 (b,d); all 50:50. \
Photon-number-resolving detection of H and V in all four outputs.";

fn ns_circuit(name: &str, pairs: [(usize, usize); 3], angles: [&str; 3]) -> Result<Circuit> {
    let components = pairs
        .iter()
        .zip(angles)
        .enumerate()
        .map(|(i, (&pair, expr))| Component::beam_splitter(format!("BS{}", i + 1), pair, 0.0).with_theta_expr(expr))
        .collect::<Result<Vec<_>>>()?;
    Circuit::new(CircuitDef {
        name: name.to_string(),
        num_modes: 3,
        polarised: false,
        components,
        input_modes: vec![0],
        input_sectors: vec![0, 1, 2],
        auxiliary: Some(Auxiliary::fock(vec![1, 2], vec![1, 0])),
        detection: Detection::Herald {
            modes: vec![1, 2],
            outcome: Outcome {
                label: "NS".into(),
                patterns: vec![vec![1, 0]],
            },
        },
    })
}

/// Checks the NS map on each Fock input: the heralded output of `|n⟩` is
/// `g s_n |n⟩` with `s = (1, 1, −1)`, probability 1/4 and a common global
/// phase `g`.
fn validate_ns(circuit: &Circuit) -> Result<()> {
    let mut phase = None;
    for n in 0..=2u8 {
        let input = circuit.input_state(&[(c(1.0), &[n])])?;
        let branch = circuit.postselect(&circuit.run(&input)?, &[1, 0])?;
        let sign = if n == 2 { -1.0 } else { 1.0 };
        let ok = (branch.probability - 0.25).abs() < 1e-12
            && branch
                .state
                .as_ref()
                .map(|s| {
                    let a = s.amplitude(&[n], 0) * sign;
                    let g = *phase.get_or_insert(a);
                    (a.norm() - 1.0).abs() < 1e-10 && (a - g).norm() < 1e-10
                })
                .unwrap_or(false);
        if !ok {
            return Err(Error::InvalidInput(format!(
                "{} fails the NS map on |{n}>",
                circuit.name()
            )));
        }
    }
    Ok(())
}

/// Global phase `g` of the heralded NS map, `⟨0|out(|0⟩)⟩ / |·|`.
pub fn ns_global_phase(circuit: &Circuit) -> Result<Complex64> {
    let input = circuit.input_state(&[(c(1.0), &[0])])?;
    let branch = circuit.postselect(&circuit.run(&input)?, &[1, 0])?;
    let a = branch
        .state
        .ok_or(Error::VanishingProbability(branch.probability))?
        .amplitude(&[0], 0);
    Ok(a / a.norm())
}

fn ns_inputs(circuit: &Circuit) -> Result<Vec<(String, PureState)>> {
    Ok(vec![
        ("eigen".into(), crate::metrology::eigen_superposition(circuit)?),
        ("plus02".into(), circuit.input_state(&[(c(1.0), &[0]), (c(1.0), &[2])])?),
        ("two".into(), circuit.input_state(&[(c(1.0), &[2])])?),
    ])
}

pub fn klm_ns() -> Result<CatalogEntry> {
    let circuit = ns_circuit("klm_ns", [(1, 2), (0, 1), (2, 1)], KLM_THETA)?;
    validate_ns(&circuit)?;
    Ok(CatalogEntry {
        name: "klm_ns",
        standard_inputs: ns_inputs(&circuit)?,
        circuit,
        notes: KLM_NOTES,
    })
}

pub fn reverse_ns() -> Result<CatalogEntry> {
    let circuit = ns_circuit("reverse_ns", [(0, 1), (1, 2), (0, 1)], REVERSE_XI)?;
    validate_ns(&circuit)?;
    Ok(CatalogEntry {
        name: "reverse_ns",
        standard_inputs: ns_inputs(&circuit)?,
        circuit,
        notes: REVERSE_NOTES,
    })
}

/// The Bell basis of two polarisation qubits in spatial modes `a, b`, over
/// the optical modes `(aH, aV, bH, bV)` with two photons.
pub fn bell_basis() -> ReferenceBasis {
    let basis = Arc::new(FockBasis::enumerate(4, [2]).expect("static basis"));
    let r = FRAC_1_SQRT_2;
    let state = |x: [u8; 4], y: [u8; 4], sign: f64| {
        let mut s = PureState::zeros(basis.clone(), 1);
        s.amplitudes_mut()[basis.index_of(&x).expect("two photons")] = c(r);
        s.amplitudes_mut()[basis.index_of(&y).expect("two photons")] = c(sign * r);
        s
    };
    ReferenceBasis {
        name: "bell".into(),
        labels: BELL_LABELS.iter().map(|s| s.to_string()).collect(),
        states: vec![
            state([1, 0, 1, 0], [0, 1, 0, 1], 1.0),
            state([1, 0, 1, 0], [0, 1, 0, 1], -1.0),
            state([1, 0, 0, 1], [0, 1, 1, 0], 1.0),
            state([1, 0, 0, 1], [0, 1, 1, 0], -1.0),
        ],
    }
}

/// `½ Σ_k |B_k⟩ ⊗ |k⟩` over the Bell basis, with the register as the
/// second factor.
pub fn bell_measurement_input() -> PureState {
    let reference = bell_basis();
    let basis = reference.states[0].basis().clone();
    let mut amps = vec![c(0.0); basis.len() * 4];
    for (k, s) in reference.states.iter().enumerate() {
        for (i, a) in s.amplitudes().iter().enumerate() {
            amps[i * 4 + k] = a * 0.5;
        }
    }
    PureState::new(basis, 4, amps).expect("dimensions agree")
}

fn bell_circuit(name: &str, pairs: &[(usize, usize)], auxiliary: Auxiliary) -> Result<Circuit> {
    let components = pairs
        .iter()
        .enumerate()
        .map(|(i, &pair)| Component::polarised_beam_splitter(format!("BS{}", i + 1), pair, 0.0).with_theta_expr("pi/4"))
        .collect::<Result<Vec<_>>>()?;
    Circuit::new(CircuitDef {
        name: name.to_string(),
        num_modes: 8,
        polarised: true,
        components,
        input_modes: vec![0, 1, 2, 3],
        input_sectors: vec![2],
        auxiliary: Some(auxiliary),
        detection: Detection::Classify {
            modes: (0..8).collect(),
            reference: bell_basis(),
        },
    })
}

fn validate_bell(circuit: &Circuit) -> Result<()> {
    let table = circuit.outcomes().ok_or(Error::MissingOutcomeTable)?;
    let total = table.herald_probability();
    let labels = table.label_probabilities();
    let psi_ok = ["PSI+", "PSI-"]
        .iter()
        .all(|l| (labels.get(*l).copied().unwrap_or(0.0) - 0.25).abs() < 1e-9);
    if (total - 0.75).abs() > 1e-9 || !psi_ok || (table.total_probability() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "{} heralds with probability {total} ({labels:?})",
            circuit.name()
        )));
    }
    Ok(())
}

fn bell_inputs(circuit: &Circuit) -> Result<Vec<(String, PureState)>> {
    Ok(vec![("bell".into(), circuit.entangled_input()?)])
}

pub fn grice_bell() -> Result<CatalogEntry> {
    let r = FRAC_1_SQRT_2;
    let aux = Auxiliary {
        modes: vec![4, 5, 6, 7],
        terms: vec![(c(r), vec![1, 0, 1, 0]), (c(r), vec![0, 1, 0, 1])],
    };
    let circuit = bell_circuit("grice", &[(0, 2), (1, 3), (0, 1), (2, 3)], aux)?;
    validate_bell(&circuit)?;
    Ok(CatalogEntry {
        name: "grice",
        standard_inputs: bell_inputs(&circuit)?,
        circuit,
        notes: GRICE_NOTES,
    })
}

pub fn evl_bell() -> Result<CatalogEntry> {
    let aux = Auxiliary {
        modes: vec![4, 5, 6, 7],
        terms: vec![
            (c(0.5), vec![2, 0, 2, 0]),
            (c(0.5), vec![2, 0, 0, 2]),
            (c(0.5), vec![0, 2, 2, 0]),
            (c(0.5), vec![0, 2, 0, 2]),
        ],
    };
    let circuit = bell_circuit("evl", &[(0, 1), (0, 2), (1, 3)], aux)?;
    validate_bell(&circuit)?;
    Ok(CatalogEntry {
        name: "evl",
        standard_inputs: bell_inputs(&circuit)?,
        circuit,
        notes: EVL_NOTES,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr;

    #[test]
    fn angle_values_and_identities() {
        let t: Vec<f64> = KLM_THETA.iter().map(|s| expr::eval(s).unwrap()).collect();
        assert_eq!(t[2], -t[0]);
        assert!((t[0] - std::f64::consts::PI / 8.0).abs() < 1e-15);
        let x: Vec<f64> = REVERSE_XI.iter().map(|s| expr::eval(s).unwrap()).collect();
        assert_eq!(x[2], -x[0]);
        assert!((x[0] - 1.034_354).abs() < 1e-6);
        assert!((x[1] - 2.724_359).abs() < 1e-6);
        let e = klm_ns().unwrap();
        assert_eq!(e.circuit.components()[2].theta, -e.circuit.components()[0].theta);
    }

    #[test]
    fn bell_input_properties() {
        let s = bell_measurement_input();
        assert!((s.norm() - 1.0).abs() < 1e-15);
        let ref_basis = bell_basis();
        // ⟨Φ+, Φ+| input⟩ = 1/2
        let mut overlap = c(0.0);
        for (i, a) in ref_basis.states[0].amplitudes().iter().enumerate() {
            overlap += a.conj() * s.amplitudes()[i * 4];
        }
        assert!((overlap - c(0.5)).norm() < 1e-15);
        // register reduced state = I/4
        for r in 0..4 {
            for q in 0..4 {
                let rho: Complex64 = (0..s.basis().len())
                    .map(|i| s.amplitudes()[i * 4 + r] * s.amplitudes()[i * 4 + q].conj())
                    .sum();
                let target = if r == q { 0.25 } else { 0.0 };
                assert!((rho - c(target)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(get("nope"), Err(Error::Config { .. })));
    }
}
