use std::path::Path;

use nalgebra::DMatrix;
use opsens::circuit::Circuit;
use opsens::fock::PureState;
use opsens::metrology::{CostMatrix, InputSpec, Tolerance};
use opsens::{catalog, circuit_file, Complex64, Error};
use serde::Deserialize;

use crate::Failure;

pub struct Loaded {
    pub circuit: Circuit,
    /// Named standard inputs; empty for circuits read from a file.
    pub inputs: Vec<(String, PureState)>,
}

/// `catalog:NAME` or a path to a circuit file.
pub fn circuit(source: &str) -> Result<Loaded, Failure> {
    if let Some(name) = source.strip_prefix("catalog:") {
        let entry = catalog::get(name).map_err(Failure::config_error)?;
        return Ok(Loaded {
            circuit: entry.circuit,
            inputs: entry.standard_inputs,
        });
    }
    let text = std::fs::read_to_string(source)
        .map_err(|e| Failure::config("circuit", format!("cannot read `{source}`: {e}")))?;
    let circuit = circuit_file::parse(&text).map_err(Failure::config_error)?;
    Ok(Loaded {
        circuit,
        inputs: Vec::new(),
    })
}

/// Resolved `--input`. Measurement devices always use their entangled input.
pub struct Input {
    pub name: String,
    pub spec: InputSpec,
    pub samples: Option<usize>,
}

pub fn input(loaded: &Loaded, arg: Option<&str>, seed: u64) -> Result<Input, Failure> {
    let circuit = &loaded.circuit;
    if circuit.is_measurement() {
        return match arg {
            None | Some("entangled") | Some("bell") => {
                let state = circuit.entangled_input().map_err(Failure::from)?;
                Ok(Input {
                    name: "entangled".into(),
                    spec: InputSpec::State(state),
                    samples: None,
                })
            }
            Some(other) => Err(Failure::config(
                "--input",
                format!("`{other}`: measurement devices take the entangled input only"),
            )),
        };
    }
    let arg = arg.unwrap_or("eigen");
    if arg == "eigen" {
        return Ok(Input {
            name: "eigen".into(),
            spec: InputSpec::Eigen,
            samples: None,
        });
    }
    if let Some(n) = arg.strip_prefix("haar:") {
        let samples: usize =
            n.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
                Failure::config("--input", format!("`{arg}`: sample count must be a positive integer"))
            })?;
        return Ok(Input {
            name: arg.into(),
            spec: InputSpec::Haar { samples, seed },
            samples: Some(samples),
        });
    }
    if let Some(list) = arg.strip_prefix("fock:") {
        let occ = list
            .split(',')
            .map(|x| x.trim().parse::<u8>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| Failure::config("--input", format!("`{arg}`: expected fock:n1,n2,...")))?;
        let state = circuit
            .input_state(&[(Complex64::new(1.0, 0.0), &occ)])
            .map_err(|e| Failure::config("--input", e.to_string()))?;
        return Ok(Input {
            name: arg.into(),
            spec: InputSpec::State(state),
            samples: None,
        });
    }
    match loaded.inputs.iter().find(|(n, _)| n == arg) {
        Some((n, s)) => Ok(Input {
            name: n.clone(),
            spec: InputSpec::State(s.clone()),
            samples: None,
        }),
        None => {
            let mut known = vec!["eigen".to_string(), "haar:N".into(), "fock:n1,...".into()];
            known.extend(loaded.inputs.iter().map(|(n, _)| n.clone()));
            Err(Failure::config(
                "--input",
                format!("unknown input `{arg}`; known: {}", known.join(", ")),
            ))
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CostFile {
    labels: Vec<String>,
    #[serde(default)]
    identity: Option<bool>,
    #[serde(default)]
    matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    tolerances: Option<Vec<ToleranceEntry>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ToleranceEntry {
    manufacturing: f64,
    stochastic: f64,
}

/// Reads a cost file and checks its labels against the circuit's.
/// `None` gives the identity over `labels`.
pub fn cost(path: Option<&Path>, labels: &[String], flag: &str) -> Result<CostMatrix, Failure> {
    let Some(path) = path else {
        return Ok(CostMatrix::identity(labels.to_vec()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(flag, format!("cannot read `{}`: {e}", path.display())))?;
    let file: CostFile = toml::from_str(&text).map_err(|e| Failure::config(flag, e.message().trim_end()))?;
    if file.labels != labels {
        return Err(Failure::config(
            "labels",
            format!(
                "{} lists {:?} but the circuit has {:?}",
                path.display(),
                file.labels,
                labels
            ),
        ));
    }
    let given = [
        file.identity.is_some(),
        file.matrix.is_some(),
        file.tolerances.is_some(),
    ];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(Failure::config(
            flag,
            "give exactly one of `identity`, `matrix` or `tolerances`",
        ));
    }
    let bad = |e: Error| Failure::config(flag, e.to_string());
    if let Some(flag_value) = file.identity {
        if !flag_value {
            return Err(Failure::config("identity", "must be true when present"));
        }
        return Ok(CostMatrix::identity(file.labels));
    }
    if let Some(rows) = file.matrix {
        let n = file.labels.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Failure::config("matrix", format!("expected a {n}x{n} matrix")));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        return CostMatrix::from_matrix(file.labels, m).map_err(bad);
    }
    let tolerances = file
        .tolerances
        .unwrap_or_default()
        .into_iter()
        .map(|t| Tolerance {
            manufacturing: t.manufacturing,
            stochastic: t.stochastic,
        })
        .collect();
    CostMatrix::from_tolerances(file.labels, tolerances).map_err(bad)
}
