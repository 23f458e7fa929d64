use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{clamp_non_negative, CONVENTION};
use crate::circuit::{Circuit, MIN_PROBABILITY};
use crate::fock::PureState;
use crate::{Error, Result};

/// The full sensitivity matrix `S = p · I_Q` of a device.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityMatrix {
    pub labels: Vec<String>,
    /// Real symmetric, rad⁻².
    pub matrix: DMatrix<f64>,
    pub convention: String,
    /// Total herald probability of the evaluated input.
    pub probability: f64,
}

impl SensitivityMatrix {
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// True when the smallest eigenvalue is negligible against the largest.
    pub fn is_singular(&self) -> bool {
        let ev = self.eigenvalues();
        match (ev.first(), ev.last()) {
            (Some(&lo), Some(&hi)) => lo <= 1e-10 * hi.abs().max(1.0),
            _ => true,
        }
    }
}

/// A point of a fidelity sweep. `fidelity` is `None` where the herald never
/// fires.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityPoint {
    pub delta: f64,
    pub fidelity: Option<f64>,
    pub probability: f64,
}

fn group_inner(a: &[Complex64], b: &[Complex64], group: &[usize], d: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &i in group {
        for r in i * d..(i + 1) * d {
            acc += a[r].conj() * b[r];
        }
    }
    acc
}

fn group_norm_sqr(a: &[Complex64], group: &[usize], d: usize) -> f64 {
    group
        .iter()
        .flat_map(|&i| a[i * d..(i + 1) * d].iter())
        .map(|x| x.norm_sqr())
        .sum()
}

/// `χ` and `η_j` for the listed components.
struct Propagation {
    chi: PureState,
    etas: Vec<PureState>,
}

fn propagate(circuit: &Circuit, input: &PureState, which: &[usize]) -> Result<Propagation> {
    let n = circuit.components().len();
    for &j in which {
        circuit.component(j)?;
    }
    let mut states = Vec::with_capacity(n + 1);
    states.push(circuit.prepare(input)?);
    for c in circuit.components() {
        let next = c.apply(states.last().expect("non-empty"), 0.0)?;
        states.push(next);
    }
    let etas = which
        .iter()
        .map(|&j| {
            let c = &circuit.components()[j];
            let h = c.generator.apply(&states[j + 1])?;
            circuit.evolve(&h, j + 1..n, None)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Propagation {
        chi: states.pop().expect("non-empty"),
        etas,
    })
}

/// Raw matrix `Σ_g Re[⟨Π_g η_j|Π_g η_k⟩ − ⟨Π_g η_j|Π_g χ⟩⟨Π_g χ|Π_g η_k⟩ / p_g]`.
fn matrix_from(circuit: &Circuit, prop: &Propagation) -> Result<(DMatrix<f64>, f64)> {
    let d = circuit.register_dim();
    let groups = circuit.selection_groups();
    let chi = prop.chi.amplitudes();
    let probs: Vec<f64> = groups.iter().map(|g| group_norm_sqr(chi, g, d)).collect();
    let p: f64 = probs.iter().sum();
    if p <= MIN_PROBABILITY {
        return Err(Error::VanishingProbability(p));
    }
    let m = prop.etas.len();
    let mut out = DMatrix::<f64>::zeros(m, m);
    for (g, &pg) in groups.iter().zip(&probs) {
        if pg <= MIN_PROBABILITY {
            continue;
        }
        let overlaps: Vec<Complex64> = prop
            .etas
            .iter()
            .map(|e| group_inner(chi, e.amplitudes(), g, d))
            .collect();
        for a in 0..m {
            for b in a..m {
                let ee = group_inner(prop.etas[a].amplitudes(), prop.etas[b].amplitudes(), g, d);
                let v = (ee - overlaps[a].conj() * overlaps[b] / pg).re;
                out[(a, b)] += v;
                if a != b {
                    out[(b, a)] += v;
                }
            }
        }
    }
    Ok((out, p))
}

/// Total probability of the post-selection projectors that enter the
/// sensitivity sums.
pub fn herald_probability(circuit: &Circuit, input: &PureState) -> Result<f64> {
    let chi = circuit.run(input)?;
    let d = circuit.register_dim();
    Ok(circuit
        .selection_groups()
        .iter()
        .map(|g| group_norm_sqr(chi.amplitudes(), g, d))
        .sum())
}

/// `S_j` for component `j` (0-based) and the given input.
pub fn gate_sensitivity(circuit: &Circuit, j: usize, input: &PureState) -> Result<f64> {
    let prop = propagate(circuit, input, &[j])?;
    let (m, _) = matrix_from(circuit, &prop)?;
    Ok(clamp_non_negative(m[(0, 0)], "sensitivity"))
}

/// `S_j` for every component.
pub fn gate_sensitivities(circuit: &Circuit, input: &PureState) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..circuit.components().len()).collect();
    let prop = propagate(circuit, input, &all)?;
    let (m, _) = matrix_from(circuit, &prop)?;
    Ok(m.diagonal()
        .iter()
        .map(|&x| clamp_non_negative(x, "sensitivity"))
        .collect())
}

/// Independent evaluation of `S_j = Σ_k |⟨φ_k|H_j|φ⟩|²`: the post-selected
/// output is completed to an orthonormal basis of the projector's range,
/// each completing vector is pulled back through `W_j†`, and its overlap with
/// `H_j u_j V_j |ψ_in, A⟩` is accumulated.
pub fn gate_sensitivity_oracle(circuit: &Circuit, j: usize, input: &PureState) -> Result<f64> {
    let split = circuit.split(j)?;
    let d = circuit.register_dim();
    let phi = split.apply_component(&split.prefix(&circuit.prepare(input)?)?)?;
    let h_phi = split.component().generator.apply(&phi)?;
    let chi = split.suffix(&phi)?;
    let groups = circuit.selection_groups();
    let p_total: f64 = groups.iter().map(|g| group_norm_sqr(chi.amplitudes(), g, d)).sum();
    if p_total <= MIN_PROBABILITY {
        return Err(Error::VanishingProbability(p_total));
    }
    let mut total = 0.0;
    for g in &groups {
        let p = group_norm_sqr(chi.amplitudes(), g, d);
        if p <= MIN_PROBABILITY {
            continue;
        }
        let slots: Vec<usize> = g.iter().flat_map(|&i| i * d..(i + 1) * d).collect();
        let out: Vec<Complex64> = slots.iter().map(|&s| chi.amplitudes()[s] / p.sqrt()).collect();
        let mut frame: Vec<Vec<Complex64>> = vec![out];
        for e in 0..slots.len() {
            let mut v = vec![Complex64::new(0.0, 0.0); slots.len()];
            v[e] = Complex64::new(1.0, 0.0);
            // two passes of modified Gram-Schmidt for stability
            for _ in 0..2 {
                for b in &frame {
                    let c: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                    v.iter_mut().zip(b).for_each(|(y, x)| *y -= c * x);
                }
            }
            let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if n > 1e-8 {
                v.iter_mut().for_each(|x| *x /= n);
                frame.push(v);
            }
        }
        for b in &frame[1..] {
            let mut full = PureState::zeros(chi.basis().clone(), d);
            for (&s, &x) in slots.iter().zip(b) {
                full.amplitudes_mut()[s] = x;
            }
            let pulled = split.suffix_adjoint(&full)?;
            total += pulled.inner(&h_phi)?.norm_sqr();
        }
    }
    Ok(clamp_non_negative(total, "oracle sensitivity"))
}

/// The full sensitivity matrix for the given input. Off-diagonal entries
/// are `Re[⟨Πη_j|Πη_k⟩ − ⟨Πη_j|Πχ⟩⟨Πχ|Πη_k⟩/p]`, summed over projectors.
pub fn sensitivity_matrix(circuit: &Circuit, input: &PureState) -> Result<SensitivityMatrix> {
    let all: Vec<usize> = (0..circuit.components().len()).collect();
    let prop = propagate(circuit, input, &all)?;
    let (mut m, p) = matrix_from(circuit, &prop)?;
    for i in 0..m.nrows() {
        m[(i, i)] = clamp_non_negative(m[(i, i)], "sensitivity");
    }
    Ok(SensitivityMatrix {
        labels: circuit.labels(),
        matrix: m,
        convention: CONVENTION.to_string(),
        probability: p,
    })
}

fn entangled(circuit: &Circuit) -> Result<PureState> {
    if !circuit.is_measurement() || circuit.outcomes().is_none() {
        return Err(Error::MissingOutcomeTable);
    }
    circuit.entangled_input()
}

/// Failure-excluded sensitivity of a measurement device for component `j`,
/// evaluated on its maximally entangled input.
pub fn measurement_sensitivity(circuit: &Circuit, j: usize) -> Result<f64> {
    gate_sensitivity(circuit, j, &entangled(circuit)?)
}

pub fn measurement_sensitivities(circuit: &Circuit) -> Result<Vec<f64>> {
    gate_sensitivities(circuit, &entangled(circuit)?)
}

pub fn measurement_sensitivity_matrix(circuit: &Circuit) -> Result<SensitivityMatrix> {
    sensitivity_matrix(circuit, &entangled(circuit)?)
}

/// Normalised post-selected branches `Π_g ψ/√p_g` and their probabilities.
fn branches(circuit: &Circuit, state: &PureState, groups: &[Vec<usize>]) -> Vec<(f64, Vec<Complex64>)> {
    let d = circuit.register_dim();
    groups
        .iter()
        .map(|g| {
            let p = group_norm_sqr(state.amplitudes(), g, d);
            let s = if p > MIN_PROBABILITY { 1.0 / p.sqrt() } else { 0.0 };
            let v = g
                .iter()
                .flat_map(|&i| state.amplitudes()[i * d..(i + 1) * d].iter())
                .map(|a| a * s)
                .collect();
            (p, v)
        })
        .collect()
}

/// Central-difference estimate of the scalar QFI of the normalised
/// post-selected output with respect to `θ_j`. Measurement devices return
/// `Σ_g p_g I_g / Σ_g p_g`, so `p · result` is comparable with `S_j` in both
/// cases.
pub fn qfi_finite_difference(circuit: &Circuit, j: usize, input: &PureState, step: f64) -> Result<f64> {
    if !(1e-6..=1e-2).contains(&step) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step {step} outside [1e-6, 1e-2]"
        )));
    }
    circuit.component(j)?;
    let groups = circuit.selection_groups();
    let at = |delta: f64| -> Result<Vec<(f64, Vec<Complex64>)>> {
        let s = circuit.run_shifted(input, Some((j, delta)))?;
        Ok(branches(circuit, &s, &groups))
    };
    let (minus, centre, plus) = (at(-step)?, at(0.0)?, at(step)?);
    let p_total: f64 = centre.iter().map(|b| b.0).sum();
    if p_total <= MIN_PROBABILITY {
        return Err(Error::VanishingProbability(p_total));
    }
    let mut acc = 0.0;
    for ((m, c), p) in minus.iter().zip(&centre).zip(&plus) {
        if c.0 <= MIN_PROBABILITY {
            continue;
        }
        let worst = m.0.min(p.0);
        if worst <= MIN_PROBABILITY {
            return Err(Error::VanishingProbability(worst));
        }
        let deriv: Vec<Complex64> = p.1.iter().zip(&m.1).map(|(a, b)| (a - b) / (2.0 * step)).collect();
        let dd: f64 = deriv.iter().map(|x| x.norm_sqr()).sum();
        let overlap: Complex64 = c.1.iter().zip(&deriv).map(|(x, y)| x.conj() * y).sum();
        acc += c.0 * (dd - overlap.norm_sqr());
    }
    Ok(clamp_non_negative(acc / p_total, "finite-difference QFI"))
}

/// Fidelity of the post-selected output at `θ_j + δ` with the nominal one,
/// `Σ_g (p_g/p) |⟨r_g(0)|r_g(δ)⟩|²`; for a gate this is `|⟨ψ(0)|ψ(δ)⟩|²`.
pub fn fidelity_curve(circuit: &Circuit, j: usize, input: &PureState, deltas: &[f64]) -> Result<Vec<FidelityPoint>> {
    circuit.component(j)?;
    let groups = circuit.selection_groups();
    let nominal = branches(circuit, &circuit.run(input)?, &groups);
    let p0: f64 = nominal.iter().map(|b| b.0).sum();
    if p0 <= MIN_PROBABILITY {
        return Err(Error::VanishingProbability(p0));
    }
    deltas
        .par_iter()
        .map(|&delta| {
            let shifted = branches(circuit, &circuit.run_shifted(input, Some((j, delta)))?, &groups);
            let probability: f64 = shifted.iter().map(|b| b.0).sum();
            if probability <= MIN_PROBABILITY {
                return Ok(FidelityPoint {
                    delta,
                    fidelity: None,
                    probability,
                });
            }
            let f = nominal
                .iter()
                .zip(&shifted)
                .filter(|(n, s)| n.0 > MIN_PROBABILITY && s.0 > MIN_PROBABILITY)
                .map(|(n, s)| {
                    let o: Complex64 = n.1.iter().zip(&s.1).map(|(x, y)| x.conj() * y).sum();
                    n.0 / p0 * o.norm_sqr()
                })
                .sum::<f64>();
            Ok(FidelityPoint {
                delta,
                fidelity: Some(f.min(1.0)),
                probability,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Auxiliary, CircuitDef, Component, Detection, Outcome};
    use crate::fock::Generator;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn three_mode() -> Circuit {
        Circuit::new(CircuitDef {
            name: "t".into(),
            num_modes: 3,
            polarised: false,
            components: vec![
                Component::beam_splitter("A", (0, 1), 0.4),
                Component::beam_splitter("B", (1, 2), 1.1),
                Component::phase_shifter("C", 0, 0.3),
                Component::beam_splitter("D", (0, 2), -0.7),
            ],
            input_modes: vec![0, 1],
            input_sectors: vec![0, 1],
            auxiliary: Some(Auxiliary::fock(vec![2], vec![1])),
            detection: Detection::Herald {
                modes: vec![2],
                outcome: Outcome {
                    label: "h".into(),
                    patterns: vec![vec![1]],
                },
            },
        })
        .unwrap()
    }

    #[test]
    fn closed_form_oracle_and_fd_agree() {
        let c = three_mode();
        let input = c
            .input_state(&[
                (one(), &[0, 0]),
                (Complex64::new(0.3, -0.8), &[1, 0]),
                (Complex64::new(0.1, 0.4), &[0, 1]),
            ])
            .unwrap();
        let p = herald_probability(&c, &input).unwrap();
        for j in 0..4 {
            let s = gate_sensitivity(&c, j, &input).unwrap();
            let o = gate_sensitivity_oracle(&c, j, &input).unwrap();
            let fd = qfi_finite_difference(&c, j, &input, 1e-4).unwrap();
            assert!((s - o).abs() < 1e-10, "{j}: {s} vs {o}");
            assert!((s - p * fd).abs() <= 1e-5 * s.max(1e-12), "{j}: {s} vs {}", p * fd);
        }
    }

    #[test]
    fn matrix_diagonal_matches_scalars() {
        let c = three_mode();
        let input = c.input_state(&[(one(), &[1, 0]), (one(), &[0, 1])]).unwrap();
        let m = sensitivity_matrix(&c, &input).unwrap();
        let s = gate_sensitivities(&c, &input).unwrap();
        for j in 0..4 {
            assert!((m.matrix[(j, j)] - s[j]).abs() < 1e-12);
            assert!((m.matrix[(j, j)] - gate_sensitivity(&c, j, &input).unwrap()).abs() < 1e-12);
        }
        assert!((&m.matrix - m.matrix.transpose()).amax() < 1e-14);
        assert!(m.eigenvalues()[0] > -1e-10);
        assert_eq!(m.convention, CONVENTION);
    }

    #[test]
    fn zero_generator_gives_zero() {
        let mut c = three_mode().def().clone();
        c.components.push(Component::custom("Z", Generator::Zero, 0.2));
        let c = Circuit::new(c).unwrap();
        let input = c.input_state(&[(one(), &[1, 0])]).unwrap();
        assert_eq!(gate_sensitivity(&c, 4, &input).unwrap(), 0.0);
        assert!(gate_sensitivity_oracle(&c, 4, &input).unwrap().abs() < 1e-14);
        assert!(qfi_finite_difference(&c, 4, &input, 1e-4).unwrap().abs() < 1e-12);
    }

    #[test]
    fn trivial_detection_reduces_to_variance() {
        let c = Circuit::new(CircuitDef {
            name: "v".into(),
            num_modes: 3,
            polarised: false,
            components: vec![Component::beam_splitter("BS", (0, 1), 0.6)],
            input_modes: vec![0, 1],
            input_sectors: vec![1, 2],
            auxiliary: Some(Auxiliary::fock(vec![2], vec![0])),
            detection: Detection::Herald {
                modes: vec![2],
                outcome: Outcome {
                    label: "all".into(),
                    patterns: vec![vec![0]],
                },
            },
        })
        .unwrap();
        let input = c
            .input_state(&[
                (one(), &[1, 0]),
                (Complex64::new(0.5, 0.5), &[1, 1]),
                (Complex64::new(-0.2, 0.0), &[0, 2]),
            ])
            .unwrap();
        let s = gate_sensitivity(&c, 0, &input).unwrap();
        let o = gate_sensitivity_oracle(&c, 0, &input).unwrap();
        // Var(H) on the prepared input
        let prepared = c.prepare(&input).unwrap();
        let g = &c.components()[0].generator;
        let h = g.apply(&prepared).unwrap();
        let mean = prepared.inner(&h).unwrap();
        let var = h.norm_sqr() - mean.norm_sqr();
        assert!((s - var).abs() < 1e-12);
        assert!((o - var).abs() < 1e-10);
    }

    #[test]
    fn fd_is_second_order() {
        let c = three_mode();
        let input = c
            .input_state(&[(one(), &[1, 0]), (Complex64::new(0.0, 0.7), &[0, 1])])
            .unwrap();
        let exact = gate_sensitivity(&c, 1, &input).unwrap() / herald_probability(&c, &input).unwrap();
        let e1 = (qfi_finite_difference(&c, 1, &input, 1e-2).unwrap() - exact).abs();
        let e2 = (qfi_finite_difference(&c, 1, &input, 5e-3).unwrap() - exact).abs();
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
        assert!(qfi_finite_difference(&c, 1, &input, 0.1).is_err());
        assert!(qfi_finite_difference(&c, 1, &input, 1e-7).is_err());
    }

    #[test]
    fn fidelity_starts_at_one_and_tracks_sensitivity() {
        let c = three_mode();
        let input = c.input_state(&[(one(), &[1, 0]), (one(), &[0, 0])]).unwrap();
        let pts = fidelity_curve(&c, 1, &input, &[0.0, 1e-3]).unwrap();
        assert!((pts[0].fidelity.unwrap() - 1.0).abs() < 1e-14);
        let s = gate_sensitivity(&c, 1, &input).unwrap() / herald_probability(&c, &input).unwrap();
        let curvature = (1.0 - pts[1].fidelity.unwrap()) / 1e-6;
        assert!((curvature - s).abs() < 1e-2 * s);
    }

    #[test]
    fn vanishing_herald_is_an_error() {
        let c = Circuit::new(CircuitDef {
            name: "never".into(),
            num_modes: 2,
            polarised: false,
            components: vec![Component::beam_splitter("BS", (0, 1), 0.3)],
            input_modes: vec![0],
            input_sectors: vec![1],
            auxiliary: None,
            detection: Detection::Herald {
                modes: vec![1],
                outcome: Outcome {
                    label: "h".into(),
                    patterns: vec![vec![2]],
                },
            },
        })
        .unwrap();
        let input = c.input_state(&[(one(), &[1])]).unwrap();
        assert!(matches!(
            gate_sensitivity(&c, 0, &input),
            Err(Error::VanishingProbability(_))
        ));
        assert!(matches!(
            fidelity_curve(&c, 0, &input, &[0.0]),
            Err(Error::VanishingProbability(_))
        ));
        assert!(matches!(
            measurement_sensitivity(&c, 0),
            Err(Error::MissingOutcomeTable)
        ));
    }
}
