//! TOML circuit descriptions.
//!
//! ```toml
//! schema_version = 1
//! name = "klm_ns"
//!
//! [modes]
//! count = 3
//! polarised = false
//!
//! [[components]]
//! label = "BS1"
//! kind = "beam_splitter"
//! modes = [1, 2]
//! theta = "arccos(sqrt(1/(4 - 2*sqrt(2))))"
//!
//! [auxiliary]
//! modes = [1, 2]
//! terms = [{ amplitude = 1, occupation = [1, 0] }]
//!
//! [input_space]
//! modes = [0]
//! sectors = [0, 1, 2]
//!
//! [detection]
//! modes = [1, 2]
//! heralds = [[1, 0]]
//! ```
//!
//! In a polarised file `modes.count` and every `modes` list name spatial
//! modes, and occupation and herald vectors give `(H, V)` counts for each
//! listed spatial mode in turn. `beam_splitter` acts on two spatial modes,
//! `wave_plate` rotates H into V of one spatial mode and `phase_shifter`
//! delays one spatial mode. `custom` generators always address optical modes.
//! Measurement devices replace `heralds` by `classify = "bell"`.
//!
//! Angles and amplitudes are numbers or closed-form strings (see
//! [`crate::expr`]); amplitudes may also be `[re, im]` pairs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::catalog;
use crate::circuit::{Auxiliary, Circuit, CircuitDef, Component, ComponentKind, Detection, Outcome};
use crate::expr;
use crate::fock::Generator;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expr(String),
}

impl Scalar {
    fn value(&self, field: &str) -> Result<f64> {
        match self {
            Scalar::Number(x) if x.is_finite() => Ok(*x),
            Scalar::Number(x) => Err(Error::config(field, format!("{x} is not finite"))),
            Scalar::Expr(s) => expr::eval(s).map_err(|e| Error::config(field, e.to_string())),
        }
    }

    fn expr(&self) -> Option<String> {
        match self {
            Scalar::Expr(s) => Some(s.clone()),
            Scalar::Number(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Real(Scalar),
    Complex([Scalar; 2]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitFile {
    pub schema_version: u32,
    pub name: String,
    pub modes: ModesSection,
    #[serde(default)]
    pub components: Vec<ComponentSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auxiliary: Option<AuxiliarySection>,
    pub input_space: InputSection,
    pub detection: DetectionSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesSection {
    pub count: usize,
    #[serde(default)]
    pub polarised: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSection {
    pub label: String,
    pub kind: String,
    #[serde(default)]
    pub modes: Vec<usize>,
    pub theta: Scalar,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSection>,
}

/// Generator of a `custom` component, on optical modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum GeneratorSection {
    Zero,
    /// Mode pairs of two-mode rotation generators.
    Rotation(Vec<[usize; 2]>),
    /// `(mode, weight)` of `Σ w n`.
    Number(Vec<(usize, f64)>),
    /// Hermitian single-particle matrix `re + i·im` over `modes`.
    Hermitian {
        modes: Vec<usize>,
        re: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        im: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxiliarySection {
    pub modes: Vec<usize>,
    pub terms: Vec<TermSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSection {
    pub amplitude: Amplitude,
    pub occupation: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub modes: Vec<usize>,
    pub sectors: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub modes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heralds: Option<Vec<Vec<u8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify: Option<String>,
}

/// Parses and validates a circuit description.
pub fn parse(text: &str) -> Result<Circuit> {
    let file: CircuitFile = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let field = field_from_message(&message).unwrap_or_else(|| "file".to_string());
        Error::config(field, format!("{message}{}", span_hint(text, e.span())))
    })?;
    file.to_circuit()
}

fn field_from_message(message: &str) -> Option<String> {
    // serde names the offending key in backticks, e.g. "unknown field `foo`"
    let start = message.find('`')? + 1;
    let end = start + message[start..].find('`')?;
    Some(message[start..end].to_string())
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(s) => {
            let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

pub fn to_toml(circuit: &Circuit) -> Result<String> {
    let file = CircuitFile::from_circuit(circuit)?;
    toml::to_string_pretty(&file).map_err(|e| Error::InvalidInput(e.to_string()))
}

fn expand(polarised: bool, modes: &[usize]) -> Vec<usize> {
    if polarised {
        modes.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect()
    } else {
        modes.to_vec()
    }
}

fn contract(polarised: bool, modes: &[usize], field: &str) -> Result<Vec<usize>> {
    if !polarised {
        return Ok(modes.to_vec());
    }
    let ok = modes.len().is_multiple_of(2) && modes.chunks(2).all(|p| p[0] % 2 == 0 && p[1] == p[0] + 1);
    if !ok {
        return Err(Error::config(field, "optical modes do not form whole spatial modes"));
    }
    Ok(modes.chunks(2).map(|p| p[0] / 2).collect())
}

impl CircuitFile {
    pub fn to_circuit(&self) -> Result<Circuit> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        let pol = self.modes.polarised;
        let num_modes = if pol { 2 * self.modes.count } else { self.modes.count };
        let spatial = self.modes.count;
        let in_range = |field: &str, modes: &[usize]| -> Result<()> {
            match modes.iter().find(|&&m| m >= spatial) {
                Some(m) => Err(Error::config(
                    field,
                    format!("mode {m} out of range for {spatial} modes"),
                )),
                None => Ok(()),
            }
        };

        let mut components = Vec::with_capacity(self.components.len());
        for (j, cs) in self.components.iter().enumerate() {
            let field = |f: &str| format!("components[{j}].{f}");
            let theta = cs.theta.value(&field("theta"))?;
            let arity = |n: usize| -> Result<()> {
                if cs.modes.len() != n {
                    return Err(Error::config(
                        field("modes"),
                        format!("`{}` needs {n} mode(s), got {}", cs.kind, cs.modes.len()),
                    ));
                }
                Ok(())
            };
            if cs.generator.is_some() && cs.kind != "custom" {
                return Err(Error::config(
                    field("generator"),
                    "only `custom` components take a generator",
                ));
            }
            if cs.kind != "custom" {
                in_range(&field("modes"), &cs.modes)?;
            }
            let mut comp = match (cs.kind.as_str(), pol) {
                ("beam_splitter", false) => {
                    arity(2)?;
                    Component::beam_splitter(cs.label.clone(), (cs.modes[0], cs.modes[1]), theta)
                }
                ("beam_splitter", true) => {
                    arity(2)?;
                    Component::polarised_beam_splitter(cs.label.clone(), (cs.modes[0], cs.modes[1]), theta)
                }
                ("wave_plate", true) => {
                    arity(1)?;
                    Component::wave_plate(cs.label.clone(), cs.modes[0], theta)
                }
                ("wave_plate", false) => {
                    return Err(Error::config(field("kind"), "`wave_plate` needs a polarised circuit"));
                }
                ("phase_shifter", false) => {
                    arity(1)?;
                    Component::phase_shifter(cs.label.clone(), cs.modes[0], theta)
                }
                ("phase_shifter", true) => {
                    arity(1)?;
                    let k = cs.modes[0];
                    Component {
                        label: cs.label.clone(),
                        kind: ComponentKind::PhaseShifter,
                        modes: vec![2 * k, 2 * k + 1],
                        theta,
                        theta_expr: None,
                        generator: Generator::Number(vec![(2 * k, 1.0), (2 * k + 1, 1.0)]),
                    }
                }
                ("custom", _) => {
                    let g = cs
                        .generator
                        .as_ref()
                        .ok_or_else(|| Error::config(field("generator"), "`custom` needs a generator"))?;
                    let generator = g.to_generator(&field("generator"))?;
                    if !cs.modes.is_empty() && cs.modes != generator.modes() {
                        return Err(Error::config(field("modes"), "does not match the generator's modes"));
                    }
                    Component::custom(cs.label.clone(), generator, theta)
                }
                (other, _) => {
                    return Err(Error::config(
                        field("kind"),
                        format!("unknown kind `{other}` (expected beam_splitter, wave_plate, phase_shifter or custom)"),
                    ));
                }
            };
            comp.theta_expr = cs.theta.expr();
            components.push(comp);
        }

        let auxiliary = match &self.auxiliary {
            None => None,
            Some(a) => {
                in_range("auxiliary.modes", &a.modes)?;
                let terms = a
                    .terms
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        let f = format!("auxiliary.terms[{i}].amplitude");
                        let amp = match &t.amplitude {
                            Amplitude::Real(s) => Complex64::new(s.value(&f)?, 0.0),
                            Amplitude::Complex([re, im]) => Complex64::new(re.value(&f)?, im.value(&f)?),
                        };
                        Ok((amp, t.occupation.clone()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(Auxiliary {
                    modes: expand(pol, &a.modes),
                    terms,
                })
            }
        };

        in_range("input_space.modes", &self.input_space.modes)?;
        in_range("detection.modes", &self.detection.modes)?;
        let det_modes = expand(pol, &self.detection.modes);
        let input_modes = expand(pol, &self.input_space.modes);
        let detection = match (&self.detection.heralds, &self.detection.classify) {
            (Some(h), None) => Detection::Herald {
                modes: det_modes,
                outcome: Outcome {
                    label: self.detection.label.clone().unwrap_or_else(|| "herald".into()),
                    patterns: h.clone(),
                },
            },
            (None, Some(name)) => {
                if self.detection.label.is_some() {
                    return Err(Error::config(
                        "detection.label",
                        "classified detection takes its labels from the reference basis",
                    ));
                }
                if name != "bell" {
                    return Err(Error::config(
                        "detection.classify",
                        format!("unknown reference basis `{name}` (expected bell)"),
                    ));
                }
                if input_modes.len() != 4 || self.input_space.sectors != [2] {
                    return Err(Error::config(
                        "detection.classify",
                        "the bell basis needs two polarised input modes with two photons",
                    ));
                }
                Detection::Classify {
                    modes: det_modes,
                    reference: catalog::bell_basis(),
                }
            }
            _ => {
                return Err(Error::config(
                    "detection",
                    "give exactly one of `heralds` or `classify`",
                ));
            }
        };

        Circuit::new(CircuitDef {
            name: self.name.clone(),
            num_modes,
            polarised: pol,
            components,
            input_modes,
            input_sectors: self.input_space.sectors.clone(),
            auxiliary,
            detection,
        })
    }

    pub fn from_circuit(circuit: &Circuit) -> Result<Self> {
        let def = circuit.def();
        let pol = def.polarised;
        let components = def
            .components
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let field = format!("components[{j}]");
                let theta = match &c.theta_expr {
                    Some(s) => Scalar::Expr(s.clone()),
                    None => Scalar::Number(c.theta),
                };
                let (kind, modes, generator) = match (c.kind, pol) {
                    (ComponentKind::BeamSplitter, false) | (ComponentKind::PhaseShifter, false) => {
                        (c.kind.as_str(), c.modes.clone(), None)
                    }
                    (ComponentKind::PolarisedBeamSplitter, true) | (ComponentKind::WavePlate, true) => {
                        (c.kind.as_str(), c.spatial_modes().expect("polarised kind"), None)
                    }
                    (ComponentKind::PhaseShifter, true) => (c.kind.as_str(), contract(true, &c.modes, &field)?, None),
                    _ => (
                        "custom",
                        Vec::new(),
                        Some(GeneratorSection::from_generator(&c.generator)),
                    ),
                };
                Ok(ComponentSection {
                    label: c.label.clone(),
                    kind: kind.to_string(),
                    modes,
                    theta,
                    generator,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let auxiliary = match &def.auxiliary {
            None => None,
            Some(a) => Some(AuxiliarySection {
                modes: contract(pol, &a.modes, "auxiliary.modes")?,
                terms: a
                    .terms
                    .iter()
                    .map(|(c, occ)| TermSection {
                        amplitude: if c.im == 0.0 {
                            Amplitude::Real(Scalar::Number(c.re))
                        } else {
                            Amplitude::Complex([Scalar::Number(c.re), Scalar::Number(c.im)])
                        },
                        occupation: occ.clone(),
                    })
                    .collect(),
            }),
        };
        let det_modes = contract(pol, def.detection.modes(), "detection.modes")?;
        let detection = match &def.detection {
            Detection::Herald { outcome, .. } => DetectionSection {
                modes: det_modes,
                label: Some(outcome.label.clone()),
                heralds: Some(outcome.patterns.clone()),
                classify: None,
            },
            Detection::Classify { reference, .. } => DetectionSection {
                modes: det_modes,
                label: None,
                heralds: None,
                classify: Some(reference.name.clone()),
            },
        };
        Ok(CircuitFile {
            schema_version: SCHEMA_VERSION,
            name: def.name.clone(),
            modes: ModesSection {
                count: if pol { def.num_modes / 2 } else { def.num_modes },
                polarised: pol,
            },
            components,
            auxiliary,
            input_space: InputSection {
                modes: contract(pol, &def.input_modes, "input_space.modes")?,
                sectors: def.input_sectors.clone(),
            },
            detection,
        })
    }
}

impl GeneratorSection {
    fn to_generator(&self, field: &str) -> Result<Generator> {
        Ok(match self {
            GeneratorSection::Zero => Generator::Zero,
            GeneratorSection::Rotation(p) => Generator::Rotation(p.iter().map(|&[a, b]| (a, b)).collect()),
            GeneratorSection::Number(w) => Generator::Number(w.clone()),
            GeneratorSection::Hermitian { modes, re, im } => {
                let n = modes.len();
                let rows_ok = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
                if !rows_ok(re) || !im.as_ref().map(rows_ok).unwrap_or(true) {
                    return Err(Error::config(field, format!("matrix must be {n}x{n}")));
                }
                let matrix = DMatrix::from_fn(n, n, |a, b| {
                    Complex64::new(re[a][b], im.as_ref().map(|m| m[a][b]).unwrap_or(0.0))
                });
                Generator::Quadratic {
                    modes: modes.clone(),
                    matrix,
                }
            }
        })
    }

    fn from_generator(g: &Generator) -> Self {
        match g {
            Generator::Zero => GeneratorSection::Zero,
            Generator::Rotation(p) => GeneratorSection::Rotation(p.iter().map(|&(a, b)| [a, b]).collect()),
            Generator::Number(w) => GeneratorSection::Number(w.clone()),
            Generator::Quadratic { modes, matrix } => {
                let n = modes.len();
                let re = (0..n).map(|a| (0..n).map(|b| matrix[(a, b)].re).collect()).collect();
                let im: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| matrix[(a, b)].im).collect()).collect();
                let any_im = im.iter().flatten().any(|&x| x != 0.0);
                GeneratorSection::Hermitian {
                    modes: modes.clone(),
                    re,
                    im: any_im.then_some(im),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KLM: &str = r#"
schema_version = 1
name = "demo"

[modes]
count = 3

[[components]]
label = "BS1"
kind = "beam_splitter"
modes = [1, 2]
theta = "arccos(sqrt(1/(4 - 2*sqrt(2))))"

[[components]]
label = "BS2"
kind = "beam_splitter"
modes = [0, 1]
theta = "pi - arccos(sqrt(3 - 2*sqrt(2)))"

[[components]]
label = "BS3"
kind = "beam_splitter"
modes = [2, 1]
theta = "-arccos(sqrt(1/(4 - 2*sqrt(2))))"

[auxiliary]
modes = [1, 2]
terms = [{ amplitude = 1, occupation = [1, 0] }]

[input_space]
modes = [0]
sectors = [0, 1, 2]

[detection]
modes = [1, 2]
heralds = [[1, 0]]
"#;

    #[test]
    fn parses_and_matches_catalog() {
        let c = parse(KLM).unwrap();
        let k = catalog::klm_ns().unwrap().circuit;
        for (a, b) in c.components().iter().zip(k.components()) {
            assert_eq!(a.theta.to_bits(), b.theta.to_bits());
            assert_eq!(a.generator, b.generator);
        }
    }

    #[test]
    fn round_trip_is_exact() {
        for name in catalog::NAMES {
            let c = catalog::get(name).unwrap().circuit;
            let text = to_toml(&c).unwrap();
            let back = parse(&text).unwrap();
            assert_eq!(back.components(), c.components(), "{name}");
            assert_eq!(back.def().auxiliary, c.def().auxiliary, "{name}");
            assert_eq!(back.def().input_modes, c.def().input_modes);
            assert_eq!(back.detected_modes(), c.detected_modes());
            assert_eq!(to_toml(&back).unwrap(), text);
        }
    }

    #[test]
    fn strict_schema() {
        let bad = KLM.replace("count = 3", "count = 3\ncolour = 1");
        match parse(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "colour"),
            other => panic!("{other:?}"),
        }
        let bad = KLM.replacen("kind = \"beam_splitter\"", "kind = \"mirror\"", 1);
        match parse(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "components[0].kind"),
            other => panic!("{other:?}"),
        }
        let bad = KLM.replacen("theta = \"arccos", "theta = \"arcos", 1);
        match parse(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "components[0].theta"),
            other => panic!("{other:?}"),
        }
        let bad = KLM.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(parse(&bad), Err(Error::Config { field, .. }) if field == "schema_version"));
        let bad = KLM.replace("heralds = [[1, 0]]", "heralds = [[1, 0]]\nclassify = \"bell\"");
        assert!(matches!(parse(&bad), Err(Error::Config { field, .. }) if field == "detection"));
    }

    #[test]
    fn custom_generators_parse() {
        let text = KLM.replace(
            "kind = \"beam_splitter\"\nmodes = [0, 1]",
            "kind = \"custom\"\ngenerator = { hermitian = { modes = [0, 1], re = [[0, 0], [0, 0]], im = [[0, 1], [-1, 0]] } }",
        );
        let c = parse(&text).unwrap();
        assert_eq!(c.components()[1].kind, ComponentKind::Custom);
        let back = parse(&to_toml(&c).unwrap()).unwrap();
        assert_eq!(back.components(), c.components());
    }
}
