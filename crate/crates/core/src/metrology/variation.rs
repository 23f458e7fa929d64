use num_complex::Complex64;

use super::clamp_non_negative;
use crate::circuit::Circuit;
use crate::fock::{Generator, PureState};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariationTarget {
    /// Acts on the auxiliary state before the device.
    AuxiliarySource,
    /// Acts on the detected modes after the device.
    Detector,
}

/// A variation `exp(−iθ H)` of an auxiliary source or a detector.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationSpec {
    pub label: String,
    pub target: VariationTarget,
    pub generator: Generator,
}

fn check(circuit: &Circuit, var: &VariationSpec, target: VariationTarget) -> Result<()> {
    if var.target != target {
        return Err(Error::InvalidInput(format!(
            "`{}` targets {:?}, not {:?}",
            var.label, var.target, target
        )));
    }
    var.generator.validate(circuit.def().num_modes)?;
    let allowed: &[usize] = match target {
        VariationTarget::AuxiliarySource => {
            let input = &circuit.def().input_modes;
            if let Some(m) = var.generator.modes().into_iter().find(|m| input.contains(m)) {
                return Err(Error::InvalidInput(format!("`{}` acts on input mode {m}", var.label)));
            }
            circuit.def().auxiliary.as_ref().map(|a| &a.modes[..]).unwrap_or(&[])
        }
        VariationTarget::Detector => circuit.detected_modes(),
    };
    if let Some(m) = var.generator.modes().into_iter().find(|m| !allowed.contains(m)) {
        return Err(Error::InvalidInput(format!(
            "`{}` acts on mode {m}, outside the {:?} modes {allowed:?}",
            var.label, target
        )));
    }
    Ok(())
}

fn projected_norm_sqr(circuit: &Circuit, state: &PureState) -> f64 {
    let d = circuit.register_dim();
    circuit
        .herald_indices()
        .iter()
        .flat_map(|&i| state.amplitudes()[i * d..(i + 1) * d].iter())
        .map(|a| a.norm_sqr())
        .sum()
}

/// `S_A = ⟨ψ_in, A| H_A U† Π_D U H_A |ψ_in, A⟩`.
pub fn source_sensitivity(circuit: &Circuit, var: &VariationSpec, input: &PureState) -> Result<f64> {
    check(circuit, var, VariationTarget::AuxiliarySource)?;
    let h = var.generator.apply(&circuit.prepare(input)?)?;
    let out = circuit.evolve(&h, 0..circuit.components().len(), None)?;
    Ok(clamp_non_negative(
        projected_norm_sqr(circuit, &out),
        "source sensitivity",
    ))
}

/// `S_D = ⟨ψ_in, A| U† H_D Π_D H_D U |ψ_in, A⟩`.
pub fn detector_sensitivity(circuit: &Circuit, var: &VariationSpec, input: &PureState) -> Result<f64> {
    check(circuit, var, VariationTarget::Detector)?;
    let h = var.generator.apply(&circuit.run(input)?)?;
    Ok(clamp_non_negative(
        projected_norm_sqr(circuit, &h),
        "detector sensitivity",
    ))
}

/// Squared norm of the central-difference derivative of the unnormalised
/// post-selected branch `Π_D … exp(−iθH) …` at `θ = 0`.
pub fn variation_finite_difference(
    circuit: &Circuit,
    var: &VariationSpec,
    input: &PureState,
    step: f64,
) -> Result<f64> {
    if !(1e-6..=1e-2).contains(&step) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step {step} outside [1e-6, 1e-2]"
        )));
    }
    check(circuit, var, var.target)?;
    let n = circuit.components().len();
    let branch = |theta: f64| -> Result<Vec<Complex64>> {
        let out = match var.target {
            VariationTarget::AuxiliarySource => {
                let s = var.generator.evolve(&circuit.prepare(input)?, theta)?;
                circuit.evolve(&s, 0..n, None)?
            }
            VariationTarget::Detector => var.generator.evolve(&circuit.run(input)?, theta)?,
        };
        let d = circuit.register_dim();
        Ok(circuit
            .herald_indices()
            .iter()
            .flat_map(|&i| out.amplitudes()[i * d..(i + 1) * d].to_vec())
            .collect())
    };
    let plus = branch(step)?;
    let minus = branch(-step)?;
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(a, b)| ((a - b) / (2.0 * step)).norm_sqr())
        .sum())
}
