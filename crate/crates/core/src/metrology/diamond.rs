use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::SymmetricEigen;

use crate::circuit::Component;
use crate::fock::{FockBasis, Generator, PureState};
use crate::{Error, Result};

/// Bound on the channel distance between `u(θ)` and `u(θ + δθ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiamondBound {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Half the spectral range of the generator.
    pub mu: f64,
    /// `μ·δθ`.
    pub distance: f64,
    /// `min_φ ‖u(θ+δθ) − e^{iφ} u(θ)‖ = 2 sin(μδθ/2)`.
    pub operator_norm: f64,
    /// Trace distance of the outputs for the input `(|λ_min⟩ + |λ_max⟩)/√2`,
    /// `2 |sin(μδθ)|`.
    pub lower_bound: f64,
    /// False once `μ·|δθ| > π`, where the small-angle identification fails.
    pub small_angle: bool,
}

/// Eigenvalues of the generator restricted to its own modes and the given
/// photon numbers (counted on those modes), ascending.
pub fn generator_spectrum(generator: &Generator, truncation: &[usize]) -> Result<Vec<f64>> {
    if truncation.is_empty() {
        return Err(Error::InvalidInput("empty truncation".into()));
    }
    let modes = generator.modes();
    if modes.is_empty() {
        return Ok(vec![0.0]);
    }
    let local = generator.relabel(|m| modes.iter().position(|&x| x == m).expect("mode of the generator"));
    let basis = Arc::new(FockBasis::enumerate(modes.len(), truncation.iter().copied())?);
    let h = local.matrix_on(&basis)?;
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub fn diamond_bound(component: &Component, delta_theta: f64, truncation: &[usize]) -> Result<DiamondBound> {
    if !delta_theta.is_finite() {
        return Err(Error::InvalidInput("δθ is not finite".into()));
    }
    let ev = generator_spectrum(&component.generator, truncation)?;
    let lambda_min = ev[0];
    let lambda_max = ev[ev.len() - 1];
    let mu = (lambda_max - lambda_min) / 2.0;
    let x = mu * delta_theta.abs();
    if x > PI {
        log::warn!(
            "μ·δθ = {x} exceeds π for `{}`; the small-angle bound no longer applies",
            component.label
        );
    }
    Ok(DiamondBound {
        lambda_min,
        lambda_max,
        mu,
        distance: x,
        operator_norm: 2.0 * (x.min(PI) / 2.0).sin(),
        lower_bound: 2.0 * x.sin().abs(),
        small_angle: x <= PI,
    })
}

/// Fubini-Study angle `arccos |⟨ψ|exp(−iδH)|ψ⟩|` between a normalised state
/// and its evolution.
pub fn state_angle(generator: &Generator, state: &PureState, delta: f64) -> Result<f64> {
    let moved = generator.evolve(state, delta)?;
    let overlap = state.inner(&moved)?.norm() / state.norm_sqr();
    Ok(overlap.min(1.0).acos())
}
