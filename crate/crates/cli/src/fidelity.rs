use std::path::PathBuf;

use opsens::metrology::{eigen_superposition, fidelity_curve, InputSpec};

use crate::load;
use crate::{emit, Failure};

#[derive(clap::Args)]
pub struct Args {
    /// Circuit file, or `catalog:NAME`.
    pub circuit: String,
    #[arg(long)]
    pub component: String,
    /// `lo:hi:step` in rad.
    #[arg(long, allow_hyphen_values = true)]
    pub range: String,
    /// `eigen`, `fock:n1,...` or a named catalog input.
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Grid `lo, lo + step, …` up to `hi` inclusive; points within rounding of
/// zero are snapped to exactly zero.
pub fn grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = |m: &str| Failure::config("--range", format!("`{spec}`: {m}"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad("expected lo:hi:step"))?;
    let [lo, hi, step] = parts[..] else {
        return Err(bad("expected lo:hi:step"));
    };
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
        return Err(bad("values must be finite"));
    }
    if step <= 0.0 {
        return Err(bad("step must be positive"));
    }
    if hi < lo {
        return Err(bad("hi must not be below lo"));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let snap = 1e-9 * step;
    Ok((0..count)
        .map(|k| {
            let d = lo + k as f64 * step;
            if d.abs() < snap {
                0.0
            } else {
                d
            }
        })
        .collect())
}

pub fn run(args: Args) -> Result<(), Failure> {
    let loaded = load::circuit(&args.circuit)?;
    let circuit = &loaded.circuit;
    let Some(j) = circuit.component_index(&args.component) else {
        return Err(Failure::config(
            "--component",
            format!(
                "no component `{}`; labels: {}",
                args.component,
                circuit.labels().join(", ")
            ),
        ));
    };
    let deltas = grid(&args.range)?;
    let input = load::input(&loaded, args.input.as_deref(), 0)?;
    let state = match input.spec {
        InputSpec::State(s) => s,
        InputSpec::Eigen => eigen_superposition(circuit)?,
        InputSpec::Haar { .. } => {
            return Err(Failure::config(
                "--input",
                "a fidelity sweep needs a single input state",
            ));
        }
    };
    let points = fidelity_curve(circuit, j, &state, &deltas)?;
    let mut out = String::from("delta_rad,fidelity_dimensionless,probability_dimensionless\n");
    for p in points {
        let f = p.fidelity.map(|f| f.to_string()).unwrap_or_else(|| "undefined".into());
        out.push_str(&format!("{},{},{}\n", p.delta, f, p.probability));
    }
    emit(&out, args.output.as_ref())
}
