//! Devices as ordered chains of unitary components with auxiliary inputs and
//! post-selected photon-number-resolving detection.
//!
//! Components are applied in list order, so `components[0]` acts first.
//! Component indices are 0-based throughout this crate.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;

use crate::expr;
use crate::fock::{FockBasis, Generator, Occupation, PureState};
use crate::{Error, Result};

/// Fidelity a collapsed register state needs with a reference element to be
/// counted as a herald of that element.
pub const CLASSIFY_FIDELITY: f64 = 1.0 - 1e-9;

/// Probabilities at or below this are treated as a herald that never fires.
pub const MIN_PROBABILITY: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ComponentKind {
    BeamSplitter,
    /// Beam splitter between two spatial modes acting identically on H and V.
    PolarisedBeamSplitter,
    /// Rotation between the H and V modes of one spatial mode.
    WavePlate,
    PhaseShifter,
    Custom,
}

impl ComponentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::BeamSplitter | ComponentKind::PolarisedBeamSplitter => "beam_splitter",
            ComponentKind::WavePlate => "wave_plate",
            ComponentKind::PhaseShifter => "phase_shifter",
            ComponentKind::Custom => "custom",
        }
    }
}

/// One element `u = exp(−iθH)` of a device.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub label: String,
    pub kind: ComponentKind,
    /// Optical modes acted on.
    pub modes: Vec<usize>,
    pub theta: f64,
    /// Closed-form source of `theta`, kept for export.
    pub theta_expr: Option<String>,
    pub generator: Generator,
}

impl Component {
    pub fn beam_splitter(label: impl Into<String>, pair: (usize, usize), theta: f64) -> Self {
        Self {
            label: label.into(),
            kind: ComponentKind::BeamSplitter,
            modes: vec![pair.0, pair.1],
            theta,
            theta_expr: None,
            generator: Generator::Rotation(vec![pair]),
        }
    }

    /// Beam splitter between spatial modes `x` and `y`, with mode `2k` the H
    /// and `2k+1` the V polarisation of spatial mode `k`.
    pub fn polarised_beam_splitter(label: impl Into<String>, (x, y): (usize, usize), theta: f64) -> Self {
        Self {
            label: label.into(),
            kind: ComponentKind::PolarisedBeamSplitter,
            modes: vec![2 * x, 2 * x + 1, 2 * y, 2 * y + 1],
            theta,
            theta_expr: None,
            generator: Generator::Rotation(vec![(2 * x, 2 * y), (2 * x + 1, 2 * y + 1)]),
        }
    }

    pub fn wave_plate(label: impl Into<String>, spatial: usize, theta: f64) -> Self {
        Self {
            label: label.into(),
            kind: ComponentKind::WavePlate,
            modes: vec![2 * spatial, 2 * spatial + 1],
            theta,
            theta_expr: None,
            generator: Generator::Rotation(vec![(2 * spatial, 2 * spatial + 1)]),
        }
    }

    pub fn phase_shifter(label: impl Into<String>, mode: usize, theta: f64) -> Self {
        Self {
            label: label.into(),
            kind: ComponentKind::PhaseShifter,
            modes: vec![mode],
            theta,
            theta_expr: None,
            generator: Generator::Number(vec![(mode, 1.0)]),
        }
    }

    pub fn custom(label: impl Into<String>, generator: Generator, theta: f64) -> Self {
        Self {
            label: label.into(),
            kind: ComponentKind::Custom,
            modes: generator.modes(),
            theta,
            theta_expr: None,
            generator,
        }
    }

    /// Sets `theta` from a closed-form expression and remembers the source.
    pub fn with_theta_expr(mut self, source: &str) -> Result<Self> {
        self.theta = expr::eval(source)?;
        self.theta_expr = Some(source.to_string());
        Ok(self)
    }

    /// Spatial modes of a polarised beam splitter or wave plate.
    pub fn spatial_modes(&self) -> Option<Vec<usize>> {
        match self.kind {
            ComponentKind::PolarisedBeamSplitter => Some(vec![self.modes[0] / 2, self.modes[2] / 2]),
            ComponentKind::WavePlate => Some(vec![self.modes[0] / 2]),
            _ => None,
        }
    }

    /// `exp(−i(θ+shift)H)|state⟩`.
    pub fn apply(&self, state: &PureState, shift: f64) -> Result<PureState> {
        self.generator.evolve(state, self.theta + shift)
    }
}

/// Auxiliary input `|A⟩ = Σ c |occupation⟩` on `modes`.
#[derive(Clone, Debug, PartialEq)]
pub struct Auxiliary {
    pub modes: Vec<usize>,
    pub terms: Vec<(Complex64, Vec<u8>)>,
}

impl Auxiliary {
    pub fn fock(modes: Vec<usize>, occupation: Vec<u8>) -> Self {
        Self {
            modes,
            terms: vec![(Complex64::new(1.0, 0.0), occupation)],
        }
    }

    fn photon_numbers(&self) -> BTreeSet<usize> {
        self.terms
            .iter()
            .map(|(_, o)| o.iter().map(|&x| x as usize).sum())
            .collect()
    }
}

/// A post-selection outcome: a label and the detection patterns whose
/// projectors sum to it (rank > 1 when several patterns or undetected modes).
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub label: String,
    pub patterns: Vec<Vec<u8>>,
}

/// Labelled orthonormal states on the input space that a measurement device
/// is meant to discriminate.
#[derive(Clone, Debug)]
pub struct ReferenceBasis {
    pub name: String,
    pub labels: Vec<String>,
    pub states: Vec<PureState>,
}

impl ReferenceBasis {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for (a, x) in self.states.iter().enumerate() {
            for (b, y) in self.states.iter().enumerate() {
                let g = x.inner(y)?;
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug)]
pub enum Detection {
    /// Gate: a single declared herald outcome on `modes`.
    Herald { modes: Vec<usize>, outcome: Outcome },
    /// Measurement device: every pattern on `modes` is classified against the
    /// reference basis using the maximally entangled input.
    Classify {
        modes: Vec<usize>,
        reference: ReferenceBasis,
    },
}

impl Detection {
    pub fn modes(&self) -> &[usize] {
        match self {
            Detection::Herald { modes, .. } | Detection::Classify { modes, .. } => modes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OutcomeClass {
    Herald(String),
    Failure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeEntry {
    pub pattern: Vec<u8>,
    pub class: OutcomeClass,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeTable {
    pub entries: Vec<OutcomeEntry>,
}

impl OutcomeTable {
    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    pub fn herald_probability(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.class != OutcomeClass::Failure)
            .map(|e| e.probability)
            .sum()
    }

    /// Herald probability per label, labels in sorted order.
    pub fn label_probabilities(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            if let OutcomeClass::Herald(l) = &e.class {
                *out.entry(l.clone()).or_insert(0.0) += e.probability;
            }
        }
        out
    }

    pub fn get(&self, pattern: &[u8]) -> Option<&OutcomeEntry> {
        self.entries.iter().find(|e| e.pattern == pattern)
    }
}

/// Result of post-selecting on one pattern. `state` is `None` when `p = 0`.
#[derive(Clone, Debug)]
pub struct Branch {
    pub pattern: Vec<u8>,
    pub probability: f64,
    pub state: Option<PureState>,
}

/// Everything needed to build a [`Circuit`].
#[derive(Clone, Debug)]
pub struct CircuitDef {
    pub name: String,
    pub num_modes: usize,
    /// Mode `2k` is H and `2k+1` is V of spatial mode `k`.
    pub polarised: bool,
    pub components: Vec<Component>,
    pub input_modes: Vec<usize>,
    pub input_sectors: Vec<usize>,
    pub auxiliary: Option<Auxiliary>,
    pub detection: Detection,
}

#[derive(Debug)]
struct PatternTable {
    patterns: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
    members: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct Circuit {
    def: CircuitDef,
    basis: Arc<FockBasis>,
    input_basis: Arc<FockBasis>,
    undetected: Vec<usize>,
    patterns: Arc<PatternTable>,
    register_dim: usize,
    herald_patterns: Vec<usize>,
    outcomes: Option<OutcomeTable>,
}

impl Circuit {
    pub fn new(def: CircuitDef) -> Result<Self> {
        let m = def.num_modes;
        if m == 0 {
            return Err(Error::config("num_modes", "a circuit needs at least one mode"));
        }
        if def.polarised && !m.is_multiple_of(2) {
            return Err(Error::config(
                "num_modes",
                "a polarised circuit needs an even mode count",
            ));
        }
        let check = |field: &str, modes: &[usize]| -> Result<()> {
            let mut seen = BTreeSet::new();
            for &x in modes {
                if x >= m {
                    return Err(Error::config(field, format!("mode {x} out of range for {m} modes")));
                }
                if !seen.insert(x) {
                    return Err(Error::config(field, format!("mode {x} listed twice")));
                }
            }
            Ok(())
        };

        let mut labels = BTreeSet::new();
        for (j, c) in def.components.iter().enumerate() {
            let field = format!("components[{j}]");
            if !labels.insert(c.label.as_str()) {
                return Err(Error::config(&field, format!("duplicate label `{}`", c.label)));
            }
            if !c.theta.is_finite() {
                return Err(Error::config(&field, "theta is not finite"));
            }
            c.generator
                .validate(m)
                .map_err(|e| Error::config(&field, e.to_string()))?;
        }

        if def.input_modes.is_empty() {
            return Err(Error::config("input_space.modes", "no input modes"));
        }
        check("input_space.modes", &def.input_modes)?;
        if def.input_sectors.is_empty() {
            return Err(Error::config("input_space.sectors", "no photon sectors"));
        }
        let input_basis = Arc::new(FockBasis::enumerate(
            def.input_modes.len(),
            def.input_sectors.iter().copied(),
        )?);

        let aux_numbers = match &def.auxiliary {
            None => BTreeSet::from([0]),
            Some(aux) => {
                check("auxiliary.modes", &aux.modes)?;
                if let Some(&x) = aux.modes.iter().find(|x| def.input_modes.contains(x)) {
                    return Err(Error::config(
                        "auxiliary.modes",
                        format!("mode {x} is also an input mode"),
                    ));
                }
                if aux.terms.is_empty() {
                    return Err(Error::config("auxiliary.terms", "no terms"));
                }
                let mut seen = BTreeSet::new();
                for (c, occ) in &aux.terms {
                    if occ.len() != aux.modes.len() {
                        return Err(Error::config(
                            "auxiliary.terms",
                            format!("occupation {occ:?} does not match {} modes", aux.modes.len()),
                        ));
                    }
                    if !seen.insert(occ.clone()) {
                        return Err(Error::config("auxiliary.terms", format!("occupation {occ:?} repeated")));
                    }
                    if !(c.re.is_finite() && c.im.is_finite()) {
                        return Err(Error::config("auxiliary.terms", "amplitude is not finite"));
                    }
                }
                let norm: f64 = aux.terms.iter().map(|(c, _)| c.norm_sqr()).sum();
                if (norm - 1.0).abs() > 1e-10 {
                    return Err(Error::config(
                        "auxiliary.terms",
                        format!("state has squared norm {norm}"),
                    ));
                }
                aux.photon_numbers()
            }
        };

        let mut sectors = BTreeSet::new();
        for &a in &def.input_sectors {
            for &b in &aux_numbers {
                sectors.insert(a + b);
            }
        }
        let basis = Arc::new(FockBasis::enumerate(m, sectors)?);

        let detected = def.detection.modes().to_vec();
        check("detection.modes", &detected)?;
        let undetected: Vec<usize> = (0..m).filter(|x| !detected.contains(x)).collect();

        let mut patterns = PatternTable {
            patterns: Vec::new(),
            index: HashMap::new(),
            members: Vec::new(),
        };
        for (i, occ) in basis.states().iter().enumerate() {
            let pat: Occupation = detected.iter().map(|&x| occ[x]).collect();
            let k = *patterns.index.entry(pat.clone()).or_insert_with(|| {
                patterns.patterns.push(pat);
                patterns.members.push(Vec::new());
                patterns.patterns.len() - 1
            });
            patterns.members[k].push(i);
        }

        let (register_dim, herald_patterns) = match &def.detection {
            Detection::Herald { outcome, .. } => {
                if outcome.patterns.is_empty() {
                    return Err(Error::config("detection.heralds", "no herald pattern"));
                }
                let mut hp = Vec::new();
                for p in &outcome.patterns {
                    if p.len() != detected.len() {
                        return Err(Error::config(
                            "detection.heralds",
                            format!("pattern {p:?} does not match {} detected modes", detected.len()),
                        ));
                    }
                    // unreachable herald patterns contribute a zero projector
                    if let Some(&k) = patterns.index.get(&p[..]) {
                        if !hp.contains(&k) {
                            hp.push(k);
                        }
                    }
                }
                (1, hp)
            }
            Detection::Classify { reference, .. } => {
                if reference.is_empty() {
                    return Err(Error::config("detection.reference", "empty reference basis"));
                }
                if reference.labels.len() != reference.len() {
                    return Err(Error::config(
                        "detection.reference",
                        "labels and states differ in length",
                    ));
                }
                for s in &reference.states {
                    if **s.basis() != *input_basis || s.register_dim() != 1 {
                        return Err(Error::config(
                            "detection.reference",
                            "reference states must live on the input space",
                        ));
                    }
                }
                let err = reference.orthonormality_error()?;
                if err > 1e-10 {
                    return Err(Error::NotOrthonormal(err));
                }
                (reference.len(), Vec::new())
            }
        };

        let mut circuit = Circuit {
            def,
            basis,
            input_basis,
            undetected,
            patterns: Arc::new(patterns),
            register_dim,
            herald_patterns,
            outcomes: None,
        };
        if let Detection::Classify { reference, .. } = &circuit.def.detection {
            let table = circuit.classify_outcomes(reference)?;
            circuit.herald_patterns = table
                .entries
                .iter()
                .filter(|e| e.class != OutcomeClass::Failure)
                .map(|e| circuit.patterns.index[&e.pattern[..]])
                .collect();
            circuit.outcomes = Some(table);
        }
        Ok(circuit)
    }

    pub fn def(&self) -> &CircuitDef {
        &self.def
    }

    pub fn name(&self) -> &str {
        &self.def.name
    }

    pub fn components(&self) -> &[Component] {
        &self.def.components
    }

    pub fn component(&self, j: usize) -> Result<&Component> {
        self.def.components.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            len: self.def.components.len(),
        })
    }

    pub fn labels(&self) -> Vec<String> {
        self.def.components.iter().map(|c| c.label.clone()).collect()
    }

    pub fn component_index(&self, label: &str) -> Option<usize> {
        self.def.components.iter().position(|c| c.label == label)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn input_basis(&self) -> &Arc<FockBasis> {
        &self.input_basis
    }

    pub fn register_dim(&self) -> usize {
        self.register_dim
    }

    pub fn is_measurement(&self) -> bool {
        matches!(self.def.detection, Detection::Classify { .. })
    }

    pub fn detected_modes(&self) -> &[usize] {
        self.def.detection.modes()
    }

    pub fn undetected_modes(&self) -> &[usize] {
        &self.undetected
    }

    /// Nominal outcome classification of a measurement device.
    pub fn outcomes(&self) -> Option<&OutcomeTable> {
        self.outcomes.as_ref()
    }

    pub fn reference(&self) -> Option<&ReferenceBasis> {
        match &self.def.detection {
            Detection::Classify { reference, .. } => Some(reference),
            Detection::Herald { .. } => None,
        }
    }

    /// Every detection pattern reachable in the circuit's basis, in the order
    /// of first appearance.
    pub fn patterns(&self) -> Vec<Vec<u8>> {
        self.patterns.patterns.iter().map(|p| p.to_vec()).collect()
    }

    /// Full-basis index sets, one per post-selection projector that enters
    /// the sensitivity sums: the herald projector of a gate, or each
    /// heralding pattern of a measurement device.
    pub fn selection_groups(&self) -> Vec<Vec<usize>> {
        match &self.def.detection {
            Detection::Herald { .. } => {
                let mut all: Vec<usize> = self
                    .herald_patterns
                    .iter()
                    .flat_map(|&k| self.patterns.members[k].iter().copied())
                    .collect();
                all.sort_unstable();
                vec![all]
            }
            Detection::Classify { .. } => self
                .herald_patterns
                .iter()
                .map(|&k| self.patterns.members[k].clone())
                .collect(),
        }
    }

    /// Full-basis indices of the whole herald projector `Π_D`.
    pub fn herald_indices(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.selection_groups().into_iter().flatten().collect();
        all.sort_unstable();
        all
    }

    /// The maximally entangled state `d^{-1/2} Σ_k |ref_k⟩ ⊗ |k⟩` of a
    /// measurement device.
    pub fn entangled_input(&self) -> Result<PureState> {
        let reference = self.reference().ok_or(Error::MissingOutcomeTable)?;
        let d = reference.len();
        let scale = 1.0 / (d as f64).sqrt();
        let mut amps = vec![Complex64::new(0.0, 0.0); self.input_basis.len() * d];
        for (k, s) in reference.states.iter().enumerate() {
            for (i, a) in s.amplitudes().iter().enumerate() {
                amps[i * d + k] = a * scale;
            }
        }
        PureState::new(self.input_basis.clone(), d, amps)
    }

    /// `|ψ_in⟩ ⊗ |A⟩` on the full basis, vacuum on the remaining modes.
    pub fn prepare(&self, input: &PureState) -> Result<PureState> {
        if **input.basis() != *self.input_basis {
            return Err(Error::SectorMismatch(format!(
                "input lives on {:?}, circuit expects {:?}",
                input.basis(),
                self.input_basis
            )));
        }
        if input.register_dim() != self.register_dim {
            return Err(Error::DimensionMismatch {
                expected: self.register_dim,
                got: input.register_dim(),
            });
        }
        let d = self.register_dim;
        let unit = [(Complex64::new(1.0, 0.0), Vec::new())];
        let (aux_modes, aux_terms): (&[usize], &[(Complex64, Vec<u8>)]) = match &self.def.auxiliary {
            Some(a) => (&a.modes, &a.terms),
            None => (&[], &unit),
        };
        let mut out = PureState::zeros(self.basis.clone(), d);
        let mut occ = vec![0u8; self.def.num_modes];
        for (i, in_occ) in self.input_basis.states().iter().enumerate() {
            let src = &input.amplitudes()[i * d..(i + 1) * d];
            if src.iter().all(|a| a.norm_sqr() == 0.0) {
                continue;
            }
            for (c, a_occ) in aux_terms {
                occ.iter_mut().for_each(|x| *x = 0);
                for (&mode, &n) in self.def.input_modes.iter().zip(in_occ.iter()) {
                    occ[mode] = n;
                }
                for (&mode, &n) in aux_modes.iter().zip(a_occ) {
                    occ[mode] = n;
                }
                let k = self
                    .basis
                    .index_of(&occ)
                    .expect("sectors cover every input and auxiliary combination");
                let dst = &mut out.amplitudes_mut()[k * d..(k + 1) * d];
                for r in 0..d {
                    dst[r] += src[r] * c;
                }
            }
        }
        Ok(out)
    }

    /// Applies components `range` in order; `shift` adds `δ` to one
    /// component's angle.
    pub fn evolve(&self, state: &PureState, range: Range<usize>, shift: Option<(usize, f64)>) -> Result<PureState> {
        if range.end > self.def.components.len() || range.start > range.end {
            return Err(Error::IndexOutOfRange {
                index: range.end,
                len: self.def.components.len(),
            });
        }
        let mut s = state.clone();
        for j in range {
            let delta = match shift {
                Some((k, d)) if k == j => d,
                _ => 0.0,
            };
            s = self.def.components[j].apply(&s, delta)?;
        }
        Ok(s)
    }

    /// The pre-detection state `U|ψ_in, A⟩`.
    pub fn run(&self, input: &PureState) -> Result<PureState> {
        self.run_shifted(input, None)
    }

    pub fn run_shifted(&self, input: &PureState, shift: Option<(usize, f64)>) -> Result<PureState> {
        let s = self.prepare(input)?;
        self.evolve(&s, 0..self.def.components.len(), shift)
    }

    /// `(V_j, u_j, W_j)` with `run = W_j ∘ u_j ∘ V_j ∘ prepare`.
    pub fn split(&self, j: usize) -> Result<Split<'_>> {
        self.component(j)?;
        Ok(Split { circuit: self, j })
    }

    /// Conditions `state` on one detection pattern. Returns the normalised
    /// state of the undetected modes (⊗ register) and its probability.
    pub fn postselect(&self, state: &PureState, pattern: &[u8]) -> Result<Branch> {
        self.check_state(state)?;
        if pattern.len() != self.detected_modes().len() {
            return Err(Error::UnknownOutcome(pattern.to_vec()));
        }
        let members = match self.patterns.index.get(pattern) {
            Some(&k) => &self.patterns.members[k][..],
            None => {
                let declared = match &self.def.detection {
                    Detection::Herald { outcome, .. } => outcome.patterns.iter().any(|p| p == pattern),
                    Detection::Classify { .. } => false,
                };
                if !declared {
                    return Err(Error::UnknownOutcome(pattern.to_vec()));
                }
                &[]
            }
        };
        let d = self.register_dim;
        let probability: f64 = members
            .iter()
            .flat_map(|&i| state.amplitudes()[i * d..(i + 1) * d].iter())
            .map(|a| a.norm_sqr())
            .sum();
        if probability <= MIN_PROBABILITY {
            return Ok(Branch {
                pattern: pattern.to_vec(),
                probability,
                state: None,
            });
        }
        let photons: usize = pattern.iter().map(|&x| x as usize).sum();
        let out_basis = if self.undetected.is_empty() {
            Arc::new(FockBasis::trivial())
        } else {
            let sectors: Vec<usize> = self
                .basis
                .sectors()
                .iter()
                .filter_map(|&n| n.checked_sub(photons))
                .collect();
            Arc::new(FockBasis::enumerate(self.undetected.len(), sectors)?)
        };
        let mut out = PureState::zeros(out_basis.clone(), d);
        let scale = 1.0 / probability.sqrt();
        let mut occ = vec![0u8; self.undetected.len()];
        for &i in members {
            let full = self.basis.state(i);
            for (slot, &mode) in occ.iter_mut().zip(&self.undetected) {
                *slot = full[mode];
            }
            let k = out_basis
                .index_of(&occ)
                .expect("undetected occupation lies in a derived sector");
            for r in 0..d {
                out.amplitudes_mut()[k * d + r] = state.amplitudes()[i * d + r] * scale;
            }
        }
        Ok(Branch {
            pattern: pattern.to_vec(),
            probability,
            state: Some(out),
        })
    }

    /// Probability and class of every reachable pattern for `input`. Gate
    /// patterns are classified by the declared herald; measurement patterns
    /// use the nominal classification.
    pub fn outcome_table(&self, input: &PureState) -> Result<OutcomeTable> {
        let out = self.run(input)?;
        let d = self.register_dim;
        let entries = self
            .patterns
            .patterns
            .iter()
            .enumerate()
            .map(|(k, pat)| {
                let probability = self.patterns.members[k]
                    .iter()
                    .flat_map(|&i| out.amplitudes()[i * d..(i + 1) * d].iter())
                    .map(|a| a.norm_sqr())
                    .sum();
                let class = match (&self.def.detection, &self.outcomes) {
                    (Detection::Herald { outcome, .. }, _) if self.herald_patterns.contains(&k) => {
                        OutcomeClass::Herald(outcome.label.clone())
                    }
                    (_, Some(table)) => table.entries[k].class.clone(),
                    _ => OutcomeClass::Failure,
                };
                OutcomeEntry {
                    pattern: pat.to_vec(),
                    class,
                    probability,
                }
            })
            .collect();
        Ok(OutcomeTable { entries })
    }

    /// Classifies every pattern at nominal parameters by comparing the
    /// collapsed register state with the register basis `|k⟩`, which the
    /// maximally entangled input ties to `reference[k]`.
    pub fn classify_outcomes(&self, reference: &ReferenceBasis) -> Result<OutcomeTable> {
        let err = reference.orthonormality_error()?;
        if err > 1e-10 {
            return Err(Error::NotOrthonormal(err));
        }
        let d = reference.len();
        if d != self.register_dim {
            return Err(Error::DimensionMismatch {
                expected: self.register_dim,
                got: d,
            });
        }
        let scale = 1.0 / (d as f64).sqrt();
        let mut amps = vec![Complex64::new(0.0, 0.0); self.input_basis.len() * d];
        for (k, s) in reference.states.iter().enumerate() {
            for (i, a) in s.amplitudes().iter().enumerate() {
                amps[i * d + k] = a * scale;
            }
        }
        let input = PureState::new(self.input_basis.clone(), d, amps)?;
        let out = self.run(&input)?;
        let mut entries = Vec::with_capacity(self.patterns.patterns.len());
        for (k, pat) in self.patterns.patterns.iter().enumerate() {
            // diagonal of the reduced register density matrix
            let mut diag = vec![0.0; d];
            for &i in &self.patterns.members[k] {
                for (r, slot) in diag.iter_mut().enumerate() {
                    *slot += out.amplitudes()[i * d + r].norm_sqr();
                }
            }
            let p: f64 = diag.iter().sum();
            let class = if p <= MIN_PROBABILITY {
                OutcomeClass::Failure
            } else {
                let (best, &w) = diag
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .expect("register dimension is positive");
                if w / p >= CLASSIFY_FIDELITY {
                    OutcomeClass::Herald(reference.labels[best].clone())
                } else {
                    OutcomeClass::Failure
                }
            };
            entries.push(OutcomeEntry {
                pattern: pat.to_vec(),
                class,
                probability: p,
            });
        }
        Ok(OutcomeTable { entries })
    }

    fn check_state(&self, state: &PureState) -> Result<()> {
        if **state.basis() != *self.basis || state.register_dim() != self.register_dim {
            return Err(Error::BasisMismatch(format!(
                "state on {:?} (register {}), circuit uses {:?} (register {})",
                state.basis(),
                state.register_dim(),
                self.basis,
                self.register_dim
            )));
        }
        Ok(())
    }

    /// Input state from a list of `(amplitude, occupation)` terms on the
    /// input modes, normalised.
    pub fn input_state(&self, terms: &[(Complex64, &[u8])]) -> Result<PureState> {
        let mut s = PureState::zeros(self.input_basis.clone(), self.register_dim);
        if self.register_dim != 1 {
            return Err(Error::InvalidInput(
                "measurement devices take the entangled input".into(),
            ));
        }
        for (c, occ) in terms {
            let i = self
                .input_basis
                .index_of(occ)
                .ok_or_else(|| Error::SectorMismatch(format!("{occ:?} is not in the input space")))?;
            s.amplitudes_mut()[i] += c;
        }
        s.normalized()
    }
}

/// Prefix/component/suffix view of a circuit around component `j`.
pub struct Split<'a> {
    circuit: &'a Circuit,
    j: usize,
}

impl Split<'_> {
    pub fn index(&self) -> usize {
        self.j
    }

    pub fn component(&self) -> &Component {
        &self.circuit.def.components[self.j]
    }

    /// `V_j = u_{j−1} ⋯ u_0`.
    pub fn prefix(&self, state: &PureState) -> Result<PureState> {
        self.circuit.evolve(state, 0..self.j, None)
    }

    pub fn apply_component(&self, state: &PureState) -> Result<PureState> {
        self.component().apply(state, 0.0)
    }

    /// `W_j = u_{N−1} ⋯ u_{j+1}`.
    pub fn suffix(&self, state: &PureState) -> Result<PureState> {
        self.circuit
            .evolve(state, self.j + 1..self.circuit.def.components.len(), None)
    }

    /// `W_j† = u_{j+1}† ⋯ u_{N−1}†`.
    pub fn suffix_adjoint(&self, state: &PureState) -> Result<PureState> {
        let mut s = state.clone();
        for c in self.circuit.def.components[self.j + 1..].iter().rev() {
            s = c.generator.evolve(&s, -c.theta)?;
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn hom_circuit() -> Circuit {
        Circuit::new(CircuitDef {
            name: "hom".into(),
            num_modes: 2,
            polarised: false,
            components: vec![Component::beam_splitter("BS", (0, 1), FRAC_PI_4)],
            input_modes: vec![0, 1],
            input_sectors: vec![2],
            auxiliary: None,
            detection: Detection::Herald {
                modes: vec![0, 1],
                outcome: Outcome {
                    label: "bunch".into(),
                    patterns: vec![vec![2, 0], vec![0, 2]],
                },
            },
        })
        .unwrap()
    }

    #[test]
    fn empty_circuit_is_identity_with_auxiliary() {
        let c = Circuit::new(CircuitDef {
            name: "id".into(),
            num_modes: 3,
            polarised: false,
            components: vec![],
            input_modes: vec![0],
            input_sectors: vec![0, 1],
            auxiliary: Some(Auxiliary::fock(vec![2], vec![1])),
            detection: Detection::Herald {
                modes: vec![2],
                outcome: Outcome {
                    label: "ok".into(),
                    patterns: vec![vec![1]],
                },
            },
        })
        .unwrap();
        let one = Complex64::new(1.0, 0.0);
        let input = c.input_state(&[(one, &[0]), (one, &[1])]).unwrap();
        let out = c.run(&input).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amplitude(&[0, 0, 1], 0).re - r).abs() < 1e-15);
        assert!((out.amplitude(&[1, 0, 1], 0).re - r).abs() < 1e-15);
        let b = c.postselect(&out, &[1]).unwrap();
        assert!((b.probability - 1.0).abs() < 1e-15);
        let s = b.state.unwrap();
        assert_eq!(s.basis().num_modes(), 2);
        assert!((s.amplitude(&[1, 0], 0).re - r).abs() < 1e-15);
    }

    #[test]
    fn hom_outcomes_and_completeness() {
        let c = hom_circuit();
        let one = Complex64::new(1.0, 0.0);
        let input = c.input_state(&[(one, &[1, 1])]).unwrap();
        let table = c.outcome_table(&input).unwrap();
        assert!((table.total_probability() - 1.0).abs() < 1e-12);
        assert!((table.herald_probability() - 1.0).abs() < 1e-12);
        assert!(table.get(&[1, 1]).unwrap().probability < 1e-15);
        assert_eq!(table.get(&[1, 1]).unwrap().class, OutcomeClass::Failure);
        let out = c.run(&input).unwrap();
        let b = c.postselect(&out, &[1, 1]).unwrap();
        assert!(b.state.is_none());
        assert!(matches!(c.postselect(&out, &[3, 0]), Err(Error::UnknownOutcome(_))));
        assert!(matches!(c.postselect(&out, &[1]), Err(Error::UnknownOutcome(_))));
        // fully detected: output is the trivial space
        let b = c.postselect(&out, &[2, 0]).unwrap();
        assert!((b.probability - 0.5).abs() < 1e-12);
        assert_eq!(b.state.unwrap().amplitudes().len(), 1);
    }

    #[test]
    fn split_reproduces_run() {
        let c = Circuit::new(CircuitDef {
            name: "chain".into(),
            num_modes: 3,
            polarised: false,
            components: vec![
                Component::beam_splitter("a", (0, 1), 0.3),
                Component::phase_shifter("b", 1, 0.7),
                Component::beam_splitter("c", (1, 2), -1.1),
            ],
            input_modes: vec![0, 1, 2],
            input_sectors: vec![1, 2],
            auxiliary: None,
            detection: Detection::Herald {
                modes: vec![2],
                outcome: Outcome {
                    label: "h".into(),
                    patterns: vec![vec![0]],
                },
            },
        })
        .unwrap();
        let one = Complex64::new(1.0, 0.0);
        let input = c
            .input_state(&[
                (one, &[1, 1, 0]),
                (Complex64::new(0.2, 0.5), &[0, 0, 1]),
                (one, &[0, 2, 0]),
            ])
            .unwrap();
        let full = c.run(&input).unwrap();
        for j in 0..3 {
            let s = c.split(j).unwrap();
            let x = s
                .suffix(
                    &s.apply_component(&s.prefix(&c.prepare(&input).unwrap()).unwrap())
                        .unwrap(),
                )
                .unwrap();
            assert!(x.distance(&full).unwrap() < 1e-12);
            let back = s.suffix_adjoint(&s.suffix(&full).unwrap()).unwrap();
            assert!(back.distance(&full).unwrap() < 1e-12);
        }
        assert!(matches!(c.split(3), Err(Error::IndexOutOfRange { .. })));
        assert!((full.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_definitions() {
        let base = || CircuitDef {
            name: "x".into(),
            num_modes: 2,
            polarised: false,
            components: vec![Component::beam_splitter("BS", (0, 1), 0.1)],
            input_modes: vec![0],
            input_sectors: vec![1],
            auxiliary: None,
            detection: Detection::Herald {
                modes: vec![1],
                outcome: Outcome {
                    label: "h".into(),
                    patterns: vec![vec![0]],
                },
            },
        };
        let mut d = base();
        d.components.push(Component::beam_splitter("BS", (0, 1), 0.2));
        assert!(matches!(Circuit::new(d), Err(Error::Config { .. })));
        let mut d = base();
        d.components[0] = Component::beam_splitter("BS", (0, 5), 0.2);
        assert!(matches!(Circuit::new(d), Err(Error::Config { .. })));
        let mut d = base();
        d.auxiliary = Some(Auxiliary {
            modes: vec![1],
            terms: vec![(Complex64::new(0.5, 0.0), vec![1])],
        });
        assert!(matches!(Circuit::new(d), Err(Error::Config { .. })));
        let mut d = base();
        d.input_sectors.clear();
        assert!(matches!(Circuit::new(d), Err(Error::Config { .. })));
    }

    #[test]
    fn vacuum_detection_is_a_single_certain_outcome() {
        let c = Circuit::new(CircuitDef {
            name: "idle".into(),
            num_modes: 3,
            polarised: false,
            components: vec![Component::beam_splitter("BS", (0, 1), 0.4)],
            input_modes: vec![0, 1],
            input_sectors: vec![1],
            auxiliary: None,
            detection: Detection::Herald {
                modes: vec![2],
                outcome: Outcome {
                    label: "h".into(),
                    patterns: vec![vec![0]],
                },
            },
        })
        .unwrap();
        let one = Complex64::new(1.0, 0.0);
        let t = c.outcome_table(&c.input_state(&[(one, &[1, 0])]).unwrap()).unwrap();
        // the basis also holds the unreachable pattern (1); it stays as a p = 0 entry
        let live: Vec<_> = t.entries.iter().filter(|e| e.probability > 0.0).collect();
        assert_eq!(live.len(), 1);
        assert_eq!(live[0].pattern, vec![0]);
        assert!((live[0].probability - 1.0).abs() < 1e-15);
        assert_eq!(t.entries.len(), 2);
    }
}
