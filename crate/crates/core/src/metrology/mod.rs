//! Component sensitivities and the quantities built on them.
//!
//! For component `j` with generator `H_j`, write `χ = U|ψ_in, A⟩` for the
//! pre-detection state and `η_j = W_j H_j u_j V_j |ψ_in, A⟩` for the state with
//! the generator inserted after the component. For a post-selection
//! projector `Π` with success probability `p = ‖Πχ‖²` the sensitivity is
//!
//! ```text
//! S_j = ‖Π η_j‖² − |⟨Πχ|η_j⟩|² / p
//! ```
//!
//! which equals `p · I_Q` with `I_Q = ⟨∂ψ|∂ψ⟩ − |⟨ψ|∂ψ⟩|²` the scalar quantum
//! Fisher information of the normalised post-selected output (no factor 4).
//! Measurement devices sum this over every heralding pattern, each with its
//! own projector and probability; failure patterns are left out.

mod cost;
mod diamond;
mod sampling;
mod sensitivity;
mod variation;

pub use cost::{
    combine_tolerances, compare_implementations, total_cost, Comparison, CostMatrix, Tolerance, Verdict,
    DEFAULT_TIE_EPSILON,
};
pub use diamond::{diamond_bound, generator_spectrum, state_angle, DiamondBound};
pub use sampling::{
    average_sensitivities, average_sensitivity, average_sensitivity_matrix, eigen_superposition, haar_state, Averaged,
    InputSpec,
};
pub use sensitivity::{
    fidelity_curve, gate_sensitivities, gate_sensitivity, gate_sensitivity_oracle, herald_probability,
    measurement_sensitivities, measurement_sensitivity, measurement_sensitivity_matrix, qfi_finite_difference,
    sensitivity_matrix, FidelityPoint, SensitivityMatrix,
};
pub use variation::{
    detector_sensitivity, source_sensitivity, variation_finite_difference, VariationSpec, VariationTarget,
};

/// Tag recorded with every sensitivity matrix and report: scalar QFI without
/// the factor 4, matrix scaled by the success probability, so the matrix
/// diagonal equals the scalar sensitivities.
pub const CONVENTION: &str = "scalar-qfi";

/// Values below this are reported as a numerical problem before clamping.
const NEGATIVE_WARN: f64 = -1e-12;

pub(crate) fn clamp_non_negative(x: f64, what: &str) -> f64 {
    if x < NEGATIVE_WARN {
        log::warn!("{what} came out negative ({x:e}); clamping to 0");
    }
    x.max(0.0)
}
