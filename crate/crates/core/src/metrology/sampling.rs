use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::sensitivity::{gate_sensitivities, sensitivity_matrix, SensitivityMatrix};
use super::CONVENTION;
use crate::circuit::Circuit;
use crate::fock::{FockBasis, PureState};
use crate::{Error, Result};

/// How the input state of a gate is chosen.
#[derive(Clone, Debug)]
pub enum InputSpec {
    /// Mean over `samples` Haar-random states of the input space.
    Haar { samples: usize, seed: u64 },
    /// Equal superposition of the input-space Fock states.
    Eigen,
    /// A fixed state.
    State(PureState),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Averaged {
    pub mean: f64,
    /// Standard error of the mean; present only for sampled inputs.
    pub stderr: Option<f64>,
}

/// Sample `index` of the Haar stream `seed`: normalised i.i.d. complex
/// Gaussian amplitudes drawn from ChaCha8 stream `index`.
pub fn haar_state(basis: &Arc<FockBasis>, seed: u64, index: u64) -> PureState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let amps = (0..basis.len())
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        })
        .collect();
    PureState::new(basis.clone(), 1, amps)
        .and_then(PureState::normalized)
        .expect("a Gaussian vector is non-zero with probability one")
}

/// `(Σ_n |n⟩)/√D` over the input-space Fock states, the eigenstates of a
/// number-diagonal gate map such as NS.
pub fn eigen_superposition(circuit: &Circuit) -> Result<PureState> {
    let basis = circuit.input_basis();
    let amp = Complex64::new(1.0 / (basis.len() as f64).sqrt(), 0.0);
    PureState::new(basis.clone(), 1, vec![amp; basis.len()])
}

/// Input-averaged `S_j` for every component.
pub fn average_sensitivities(circuit: &Circuit, spec: &InputSpec) -> Result<Vec<Averaged>> {
    if circuit.register_dim() != 1 {
        return Err(Error::InvalidInput(
            "input averaging applies to gates; measurement devices use the entangled input".into(),
        ));
    }
    match spec {
        InputSpec::Eigen => fixed(circuit, &eigen_superposition(circuit)?),
        InputSpec::State(s) => fixed(circuit, s),
        InputSpec::Haar { samples, seed } => {
            if *samples == 0 {
                return Err(Error::InvalidInput("Haar average needs at least one sample".into()));
            }
            let basis = circuit.input_basis();
            let rows = (0..*samples as u64)
                .into_par_iter()
                .map(|i| gate_sensitivities(circuit, &haar_state(basis, *seed, i)))
                .collect::<Result<Vec<_>>>()?;
            let n = rows.len() as f64;
            let m = circuit.components().len();
            Ok((0..m)
                .map(|j| {
                    let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
                    let stderr = if rows.len() > 1 {
                        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
                        (var / n).sqrt()
                    } else {
                        0.0
                    };
                    Averaged {
                        mean,
                        stderr: Some(stderr),
                    }
                })
                .collect())
        }
    }
}

fn fixed(circuit: &Circuit, input: &PureState) -> Result<Vec<Averaged>> {
    Ok(gate_sensitivities(circuit, input)?
        .into_iter()
        .map(|mean| Averaged { mean, stderr: None })
        .collect())
}

/// Sensitivity matrix averaged over the inputs of `spec` (a single
/// evaluation for fixed inputs). `probability` is the mean herald
/// probability.
pub fn average_sensitivity_matrix(circuit: &Circuit, spec: &InputSpec) -> Result<SensitivityMatrix> {
    if circuit.register_dim() != 1 {
        return Err(Error::InvalidInput(
            "input averaging applies to gates; measurement devices use the entangled input".into(),
        ));
    }
    match spec {
        InputSpec::Eigen => sensitivity_matrix(circuit, &eigen_superposition(circuit)?),
        InputSpec::State(s) => sensitivity_matrix(circuit, s),
        InputSpec::Haar { samples, seed } => {
            if *samples == 0 {
                return Err(Error::InvalidInput("Haar average needs at least one sample".into()));
            }
            let basis = circuit.input_basis();
            let all = (0..*samples as u64)
                .into_par_iter()
                .map(|i| sensitivity_matrix(circuit, &haar_state(basis, *seed, i)))
                .collect::<Result<Vec<_>>>()?;
            let n = all.len() as f64;
            let mut matrix = all[0].matrix.clone() * 0.0;
            let mut probability = 0.0;
            for m in &all {
                matrix += &m.matrix;
                probability += m.probability;
            }
            Ok(SensitivityMatrix {
                labels: circuit.labels(),
                matrix: matrix / n,
                convention: CONVENTION.to_string(),
                probability: probability / n,
            })
        }
    }
}

pub fn average_sensitivity(circuit: &Circuit, j: usize, spec: &InputSpec) -> Result<Averaged> {
    circuit.component(j)?;
    Ok(average_sensitivities(circuit, spec)?[j])
}
