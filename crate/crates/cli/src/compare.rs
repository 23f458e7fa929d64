use std::path::PathBuf;

use opsens::metrology::{compare_implementations, CostMatrix, SensitivityMatrix, CONVENTION, DEFAULT_TIE_EPSILON};
use serde::Serialize;

use crate::analyze::evaluate;
use crate::load;
use crate::{emit, Failure, Format};

#[derive(clap::Args)]
pub struct Args {
    /// First implementation: circuit file or `catalog:NAME`.
    pub a: String,
    /// Second implementation.
    pub b: String,
    #[arg(long)]
    pub cost_a: Option<PathBuf>,
    #[arg(long)]
    pub cost_b: Option<PathBuf>,
    /// Gate input for both circuits; measurement devices ignore it.
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long, env = "OPSENS_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Costs closer than this are a tie.
    #[arg(long, default_value_t = DEFAULT_TIE_EPSILON)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct Side {
    circuit: String,
    input: String,
    labels: Vec<String>,
    sensitivities: Vec<f64>,
    cost_total: f64,
    singular: bool,
    cramer_rao: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    tool: &'static str,
    version: &'static str,
    convention: &'static str,
    seed: u64,
    a: Side,
    b: Side,
    epsilon: f64,
    verdict: &'static str,
}

pub fn run(args: Args) -> Result<(), Failure> {
    if args.format == Format::Csv {
        return Err(Failure::config("--format", "compare writes text or json"));
    }
    if args.epsilon.is_nan() || args.epsilon < 0.0 {
        return Err(Failure::config("--epsilon", "must be non-negative"));
    }
    let mut sides = Vec::new();
    for (source, cost, flag) in [(&args.a, &args.cost_a, "--cost-a"), (&args.b, &args.cost_b, "--cost-b")] {
        let loaded = load::circuit(source)?;
        let input_arg = if loaded.circuit.is_measurement() {
            None
        } else {
            args.input.as_deref()
        };
        let input = load::input(&loaded, input_arg, args.seed)?;
        let labels = loaded.circuit.labels();
        let cost = load::cost(cost.as_deref(), &labels, flag)?;
        let (_, matrix) = evaluate(&loaded.circuit, &input)?;
        sides.push((loaded.circuit.name().to_string(), input.name, matrix, cost));
    }
    let (a, b) = (&sides[0], &sides[1]);
    let cmp = compare_implementations((&a.2, &a.3), (&b.2, &b.3), args.epsilon)?;

    let side = |s: &(String, String, SensitivityMatrix, CostMatrix), cost_total, singular, cramer_rao| Side {
        circuit: s.0.clone(),
        input: s.1.clone(),
        labels: s.2.labels.clone(),
        sensitivities: s.2.diagonal(),
        cost_total,
        singular,
        cramer_rao,
    };
    let report = Report {
        tool: "opsens",
        version: env!("CARGO_PKG_VERSION"),
        convention: CONVENTION,
        seed: args.seed,
        a: side(a, cmp.cost_a, cmp.singular_a, cmp.cramer_rao_a),
        b: side(b, cmp.cost_b, cmp.singular_b, cmp.cramer_rao_b),
        epsilon: cmp.epsilon,
        verdict: cmp.verdict.as_str(),
    };
    let text = match args.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report).expect("report serialises");
            s.push('\n');
            s
        }
        _ => {
            let mut out = format!("convention: {CONVENTION}\n");
            for (tag, s) in [("a", &report.a), ("b", &report.b)] {
                out.push_str(&format!(
                    "{tag}: {} (input {}) Tr(R·S) = {:.6} [dimensionless]{}\n",
                    s.circuit,
                    s.input,
                    s.cost_total,
                    if s.singular {
                        ", sensitivity matrix singular"
                    } else {
                        ""
                    }
                ));
            }
            out.push_str(&format!("verdict: {}\n", report.verdict));
            out
        }
    };
    emit(&text, args.output.as_ref())
}
