mod common;

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use opsens::circuit::Component;
use opsens::fock::{apply_two_mode_rotation, FockBasis, Generator};
use opsens::metrology::{
    diamond_bound, gate_sensitivities, gate_sensitivity_oracle, haar_state, herald_probability, qfi_finite_difference,
    sensitivity_matrix, state_angle, total_cost, CostMatrix,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn basis(modes: usize, sectors: &[usize]) -> Arc<FockBasis> {
    Arc::new(FockBasis::enumerate(modes, sectors.iter().copied()).unwrap())
}

fn component(kind: u8, modes: usize, a: usize, b: usize, theta: f64) -> Component {
    let b = if a == b { (a + 1) % modes } else { b };
    match kind % 3 {
        0 => Component::beam_splitter("C", (a, b), theta),
        1 => Component::phase_shifter("C", a, theta),
        _ => Component::custom("C", Generator::Number(vec![(a, 0.7), (b, -1.3)]), theta),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn components_are_unitary_and_conserve_photons(
        seed in any::<u64>(),
        kind in 0u8..3,
        a in 0usize..4,
        b in 0usize..4,
        theta in -4.0f64..4.0,
    ) {
        let bs = basis(4, &[0, 1, 2, 3]);
        let psi = haar_state(&bs, seed, 0);
        let c = component(kind, 4, a, b, theta);
        let out = c.apply(&psi, 0.0).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-12);
        for ((n, w), (m, v)) in psi.sector_weights().iter().zip(out.sector_weights()) {
            prop_assert_eq!(*n, m);
            prop_assert!((w - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rotations_compose(seed in any::<u64>(), t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
        let bs = basis(3, &[2]);
        let psi = haar_state(&bs, seed, 1);
        let two = apply_two_mode_rotation(&apply_two_mode_rotation(&psi, (0, 2), t1).unwrap(), (0, 2), t2).unwrap();
        let one = apply_two_mode_rotation(&psi, (0, 2), t1 + t2).unwrap();
        prop_assert!(two.distance(&one).unwrap() < 1e-12);
        let back = apply_two_mode_rotation(&one, (0, 2), -(t1 + t2)).unwrap();
        prop_assert!(back.distance(&psi).unwrap() < 1e-12);
    }

    #[test]
    fn generator_evolution_matches_dense_exponential(seed in any::<u64>(), theta in -2.0f64..2.0) {
        let mut h = DMatrix::<Complex64>::zeros(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..3 {
            for j in i..3 {
                let re = rand::Rng::random_range(&mut rng, -1.0..1.0);
                let im = if i == j { 0.0 } else { rand::Rng::random_range(&mut rng, -1.0..1.0) };
                h[(i, j)] = Complex64::new(re, im);
                h[(j, i)] = Complex64::new(re, -im);
            }
        }
        let g = Generator::Quadratic { modes: vec![0, 1, 2], matrix: h };
        let bs = basis(3, &[1, 2]);
        let psi = haar_state(&bs, seed, 2);
        let fast = g.evolve(&psi, theta).unwrap();
        // exp(−iθH) by a plain Taylor series on the Fock-space matrix
        let m = g.matrix_on(&bs).unwrap() * Complex64::new(0.0, -theta);
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let mut term = v.clone();
        let mut sum = v;
        for k in 1..80 {
            term = &m * term / Complex64::new(k as f64, 0.0);
            sum += &term;
        }
        let err = fast.amplitudes().iter().zip(sum.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10, "{}", err);
    }

    #[test]
    fn sensitivity_oracle_triangle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (circuit, input) = common::random_heralded_gate(&mut rng, 1e-2);
        let p = herald_probability(&circuit, &input).unwrap();
        let s = gate_sensitivities(&circuit, &input).unwrap();
        for (j, &sj) in s.iter().enumerate() {
            prop_assert!(sj >= 0.0);
            let o = gate_sensitivity_oracle(&circuit, j, &input).unwrap();
            prop_assert!((sj - o).abs() < 1e-10, "S {} oracle {}", sj, o);
            let fd = p * qfi_finite_difference(&circuit, j, &input, 1e-4).unwrap();
            prop_assert!((sj - fd).abs() <= 1e-5 * sj.max(1e-3), "S {} fd {}", sj, fd);
        }
    }

    #[test]
    fn outcome_probabilities_are_complete(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let circuit = common::random_gate(&mut rng);
        let input = haar_state(circuit.input_basis(), seed, 3);
        let table = circuit.outcome_table(&input).unwrap();
        prop_assert!((table.total_probability() - 1.0).abs() < 1e-12);
        prop_assert!(table.herald_probability() <= 1.0 + 1e-12);
    }

    #[test]
    fn matrix_is_psd_with_sensitivity_diagonal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (circuit, input) = common::random_heralded_gate(&mut rng, 1e-2);
        let m = sensitivity_matrix(&circuit, &input).unwrap();
        let s = gate_sensitivities(&circuit, &input).unwrap();
        for (j, sj) in s.iter().enumerate() {
            prop_assert!((m.matrix[(j, j)] - sj).abs() < 1e-12);
        }
        prop_assert!((&m.matrix - m.matrix.transpose()).amax() < 1e-12);
        prop_assert!(m.eigenvalues()[0] > -1e-10);
        let cost = total_cost(&m, &CostMatrix::identity(m.labels.clone())).unwrap();
        prop_assert!((cost - m.trace()).abs() < 1e-12);
    }

    #[test]
    fn state_angle_never_exceeds_diamond_distance(
        seed in any::<u64>(),
        n in 1usize..4,
        delta in 1e-4f64..0.5,
        kind in 0u8..3,
    ) {
        let c = component(kind, 3, 0, 2, 0.0);
        let bs = basis(3, &[n]);
        let psi = haar_state(&bs, seed, 4);
        // photons on the generator's own modes range over 0..=n
        let truncation: Vec<usize> = (0..=n).collect();
        let bound = diamond_bound(&c, delta, &truncation).unwrap();
        let angle = state_angle(&c.generator, &psi, delta).unwrap();
        prop_assert!(angle <= bound.distance + 1e-12);
        prop_assert!(bound.operator_norm <= bound.distance + 1e-12);
    }
}
