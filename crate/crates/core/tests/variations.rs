use num_complex::Complex64;
use opsens::catalog;
use opsens::circuit::{Auxiliary, Circuit, CircuitDef, Component, Detection, Outcome};
use opsens::fock::Generator;
use opsens::metrology::{
    detector_sensitivity, eigen_superposition, source_sensitivity, variation_finite_difference, VariationSpec,
    VariationTarget,
};

fn spec(target: VariationTarget, generator: Generator) -> VariationSpec {
    VariationSpec {
        label: "V".into(),
        target,
        generator,
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn klm_ancilla_phase_matches_finite_difference() {
    let entry = catalog::klm_ns().unwrap();
    let input = eigen_superposition(&entry.circuit).unwrap();
    for generator in [Generator::Number(vec![(1, 1.0)]), Generator::Rotation(vec![(1, 2)])] {
        let v = spec(VariationTarget::AuxiliarySource, generator);
        let s = source_sensitivity(&entry.circuit, &v, &input).unwrap();
        let fd = variation_finite_difference(&entry.circuit, &v, &input, 1e-4).unwrap();
        assert!(close(s, fd, 1e-6), "{s} vs {fd}");
    }
}

#[test]
fn grice_wave_plate_detector_matches_finite_difference() {
    let entry = catalog::grice_bell().unwrap();
    let circuit = &entry.circuit;
    let input = circuit.entangled_input().unwrap();
    let wp = Component::wave_plate("WP", 0, 0.0);
    let v = spec(VariationTarget::Detector, wp.generator.clone());
    let s = detector_sensitivity(circuit, &v, &input).unwrap();
    let fd = variation_finite_difference(circuit, &v, &input, 1e-4).unwrap();
    assert!(s > 0.0);
    assert!(close(s, fd, 1e-6), "{s} vs {fd}");
}

#[test]
fn source_variation_must_avoid_input_modes() {
    let entry = catalog::klm_ns().unwrap();
    let input = eigen_superposition(&entry.circuit).unwrap();
    let v = spec(VariationTarget::AuxiliarySource, Generator::Number(vec![(0, 1.0)]));
    assert!(source_sensitivity(&entry.circuit, &v, &input).is_err());
    let wrong_target = spec(VariationTarget::Detector, Generator::Number(vec![(1, 1.0)]));
    assert!(source_sensitivity(&entry.circuit, &wrong_target, &input).is_err());
}

/// A device whose herald accepts every pattern on the ancilla modes.
fn transparent() -> Circuit {
    let patterns = vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]];
    Circuit::new(CircuitDef {
        name: "transparent".into(),
        num_modes: 3,
        polarised: false,
        components: vec![
            Component::beam_splitter("BS1", (0, 1), 0.4),
            Component::beam_splitter("BS2", (1, 2), 1.1),
        ],
        input_modes: vec![0],
        input_sectors: vec![0, 1],
        auxiliary: Some(Auxiliary::fock(vec![1, 2], vec![1, 0])),
        detection: Detection::Herald {
            modes: vec![1, 2],
            outcome: Outcome {
                label: "all".into(),
                patterns,
            },
        },
    })
    .unwrap()
}

#[test]
fn identity_projector_gives_second_moment() {
    let circuit = transparent();
    let input = circuit
        .input_state(&[(Complex64::new(1.0, 0.0), &[0]), (Complex64::new(0.0, 1.0), &[1])])
        .unwrap();
    // ⟨1,0| H² |1,0⟩ = 1 for the ancilla rotation, w² for a number generator
    let rot = spec(VariationTarget::AuxiliarySource, Generator::Rotation(vec![(1, 2)]));
    assert!((source_sensitivity(&circuit, &rot, &input).unwrap() - 1.0).abs() < 1e-12);
    let num = spec(VariationTarget::AuxiliarySource, Generator::Number(vec![(1, 0.3)]));
    assert!((source_sensitivity(&circuit, &num, &input).unwrap() - 0.09).abs() < 1e-12);
}
