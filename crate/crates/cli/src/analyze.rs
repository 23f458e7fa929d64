use std::path::PathBuf;
use std::time::Instant;

use opsens::circuit::Circuit;
use opsens::metrology::{
    average_sensitivities, average_sensitivity_matrix, measurement_sensitivity_matrix, total_cost, Averaged, InputSpec,
    SensitivityMatrix, CONVENTION,
};
use serde::Serialize;

use crate::load::{self, Input};
use crate::{emit, Failure, Format};

#[derive(clap::Args)]
pub struct Args {
    /// Circuit file, or `catalog:NAME`.
    pub circuit: String,
    /// Component label, or `all`.
    #[arg(long, default_value = "all")]
    pub component: String,
    /// `eigen`, `haar:N`, `fock:n1,...` or a named catalog input.
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long, env = "OPSENS_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Cost matrix file; the identity is used when absent.
    #[arg(long)]
    pub cost: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct Units {
    sensitivity: &'static str,
    stderr: &'static str,
    probability: &'static str,
    matrix: &'static str,
    cost_total: &'static str,
    timing_ms: &'static str,
}

const UNITS: Units = Units {
    sensitivity: "rad^-2",
    stderr: "rad^-2",
    probability: "dimensionless",
    matrix: "rad^-2",
    cost_total: "dimensionless",
    timing_ms: "ms",
};

#[derive(Serialize)]
struct Row {
    label: String,
    sensitivity: f64,
    stderr: Option<f64>,
    method: &'static str,
}

#[derive(Serialize)]
struct MatrixOut {
    labels: Vec<String>,
    values: Vec<Vec<f64>>,
    trace: f64,
    singular: bool,
}

#[derive(Serialize)]
struct Report {
    tool: &'static str,
    version: &'static str,
    convention: &'static str,
    seed: u64,
    circuit: String,
    input: String,
    samples: Option<usize>,
    probability: f64,
    units: Units,
    components: Vec<Row>,
    matrix: MatrixOut,
    cost_total: f64,
    timing_ms: f64,
}

/// Sensitivities and matrix of `circuit` under `input`.
pub fn evaluate(circuit: &Circuit, input: &Input) -> Result<(Vec<Averaged>, SensitivityMatrix), Failure> {
    if circuit.is_measurement() {
        let m = measurement_sensitivity_matrix(circuit)?;
        let rows = m
            .diagonal()
            .into_iter()
            .map(|mean| Averaged { mean, stderr: None })
            .collect();
        return Ok((rows, m));
    }
    let rows = average_sensitivities(circuit, &input.spec)?;
    let m = average_sensitivity_matrix(circuit, &input.spec)?;
    Ok((rows, m))
}

pub fn run(args: Args) -> Result<(), Failure> {
    let start = Instant::now();
    let loaded = load::circuit(&args.circuit)?;
    let circuit = &loaded.circuit;
    let input = load::input(&loaded, args.input.as_deref(), args.seed)?;
    if args.format == Format::Text {
        return Err(Failure::config("--format", "analyze writes json or csv"));
    }
    let labels = circuit.labels();
    let selected: Vec<usize> = if args.component == "all" {
        (0..labels.len()).collect()
    } else {
        match circuit.component_index(&args.component) {
            Some(j) => vec![j],
            None => {
                return Err(Failure::config(
                    "--component",
                    format!("no component `{}`; labels: {}", args.component, labels.join(", ")),
                ))
            }
        }
    };
    let cost = load::cost(args.cost.as_deref(), &labels, "--cost")?;

    let (rows, matrix) = evaluate(circuit, &input)?;
    let method = match input.spec {
        InputSpec::Haar { .. } => "haar-mean",
        _ => "analytic",
    };
    let components: Vec<Row> = selected
        .iter()
        .map(|&j| Row {
            label: labels[j].clone(),
            sensitivity: rows[j].mean,
            stderr: rows[j].stderr,
            method,
        })
        .collect();

    let text = match args.format {
        Format::Csv => {
            let mut out = String::from("label,sensitivity_rad^-2,stderr_rad^-2,method\n");
            for r in &components {
                let stderr = r.stderr.map(|s| s.to_string()).unwrap_or_default();
                out.push_str(&format!("{},{},{},{}\n", r.label, r.sensitivity, stderr, r.method));
            }
            out
        }
        _ => {
            let n = matrix.matrix.nrows();
            let report = Report {
                tool: "opsens",
                version: env!("CARGO_PKG_VERSION"),
                convention: CONVENTION,
                seed: args.seed,
                circuit: circuit.name().to_string(),
                input: input.name.clone(),
                samples: input.samples,
                probability: matrix.probability,
                units: UNITS,
                components,
                cost_total: total_cost(&matrix, &cost)?,
                matrix: MatrixOut {
                    labels: matrix.labels.clone(),
                    values: (0..n)
                        .map(|i| (0..n).map(|k| matrix.matrix[(i, k)]).collect())
                        .collect(),
                    trace: matrix.trace(),
                    singular: matrix.is_singular(),
                },
                timing_ms: start.elapsed().as_secs_f64() * 1e3,
            };
            let mut s = serde_json::to_string_pretty(&report).expect("report serialises");
            s.push('\n');
            s
        }
    };
    emit(&text, args.output.as_ref())
}
