use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use segre_witness::certify::{
    best_bound, classify, exceptional_rank, Certificate, Derivation, Status, Verdict, Witness,
};
use segre_witness::error::Error;
use segre_witness::shape::SegreShape;
use segre_witness::survey::{run_survey, SurveyConfig};
use segre_witness::tangency::{
    fresh_seed, identifiability_numeric, secant_dimension, tangency_check, CheckConfig,
    TangencyQuery, TangencyReport, DEFAULT_PRIME_BITS, DEFAULT_TRIALS,
};
use serde_json::json;

/// Ambient sizes above this need `--allow-long`.
const LONG_AMBIENT: u64 = 1 << 13;

const EXIT_DIVERGENCE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_OUT_OF_METHOD: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "segre-witness",
    version,
    about = "Identifiability of general tensors on Segre products"
)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Bit width of the random primes (31..=62).
    #[arg(long, global = true, default_value_t = DEFAULT_PRIME_BITS)]
    prime_bits: u32,
    /// Master seed. Sampled and printed when absent.
    #[arg(long, global = true, env = "SEGRE_WITNESS_SEED")]
    seed: Option<u64>,
    /// Independent trials per numeric check.
    #[arg(long, global = true, default_value_t = DEFAULT_TRIALS)]
    trials: u32,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Allow numeric checks on ambient spaces above 2^13.
    #[arg(long, global = true)]
    allow_long: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Decide k-identifiability of a shape.
    Check {
        #[arg(long, value_parser = parse_dims)]
        dims: Dims,
        #[arg(long)]
        k: u64,
        /// Run the padded tangency check at this span dimension.
        #[arg(long)]
        r: Option<u64>,
    },
    /// Critical rank, closed-form bounds and the engine bound.
    Bounds {
        #[arg(long, value_parser = parse_dims)]
        dims: Dims,
    },
    /// Expected and measured dimension of the k-th secant variety.
    Secant {
        #[arg(long, value_parser = parse_dims)]
        dims: Dims,
        #[arg(long)]
        k: u64,
    },
    /// Sweep all shapes up to a size against the exceptions table.
    Survey {
        #[arg(long, default_value_t = 100)]
        max_size: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Debug)]
struct Dims(Vec<i64>);

/// `2,3,3`, or `1x12` for twelve copies of 1. Items may be mixed: `1x3,2`.
fn parse_dims(text: &str) -> Result<Dims, String> {
    let mut dims = Vec::new();
    for item in text.split(',').map(str::trim) {
        match item.split_once('x') {
            Some((dim, count)) => {
                let dim: i64 = dim
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad dimension in `{item}`"))?;
                let count: usize = count
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad count in `{item}`"))?;
                if count == 0 {
                    return Err(format!("zero count in `{item}`"));
                }
                dims.extend(std::iter::repeat_n(dim, count));
            }
            None => dims.push(
                item.parse()
                    .map_err(|_| format!("bad dimension `{item}`"))?,
            ),
        }
    }
    Ok(Dims(dims))
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::PreconditionViolation(_) => EXIT_OUT_OF_METHOD,
            Error::Io(_) => EXIT_IO,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        message: message.into(),
    }
}

struct Run {
    args: RunArgs,
    seed: u64,
}

impl Run {
    fn check_config(&self) -> CheckConfig {
        CheckConfig {
            prime_bits: self.args.prime_bits,
            seed: self.seed,
            trials: self.args.trials,
        }
    }

    fn config_json(&self) -> serde_json::Value {
        json!({
            "prime_bits": self.args.prime_bits,
            "seed": self.seed,
            "trials": self.args.trials,
            "format": if self.args.json { "json" } else { "text" },
            "allow_long": self.args.allow_long,
        })
    }

    fn gate(&self, shape: &SegreShape) -> Result<(), Failure> {
        if shape.ambient_dim() > LONG_AMBIENT && !self.args.allow_long {
            return Err(invalid(format!(
                "ambient dimension {} of {shape} exceeds 2^13; rerun with --allow-long",
                shape.ambient_dim()
            )));
        }
        Ok(())
    }

    fn emit(&self, value: serde_json::Value) {
        println!(
            "{}",
            serde_json::to_string_pretty(&value).expect("serializable")
        );
    }
}

fn shape_of(dims: &Dims) -> Result<SegreShape, Failure> {
    SegreShape::canonicalize(&dims.0).map_err(Failure::from)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = cli.run.seed.unwrap_or_else(fresh_seed);
    eprintln!("seed: {seed}");
    let run = Run {
        args: cli.run,
        seed,
    };
    let result = run
        .check_config()
        .validate()
        .map_err(Failure::from)
        .and_then(|()| match &cli.command {
            Command::Check { dims, k, r } => cmd_check(&run, dims, *k, *r),
            Command::Bounds { dims } => cmd_bounds(&run, dims),
            Command::Secant { dims, k } => cmd_secant(&run, dims, *k),
            Command::Survey { max_size, out } => cmd_survey(&run, *max_size, out),
        });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_check(run: &Run, dims: &Dims, k: u64, r: Option<u64>) -> Result<u8, Failure> {
    let shape = shape_of(dims)?;
    if shape.factors() < 3 {
        return Err(invalid(format!(
            "unsupported shape {shape}: at least three factors are required"
        )));
    }
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let mut verdict = classify(&shape, k);
    let mut report: Option<TangencyReport> = None;
    if let Some(r) = r {
        run.gate(&shape)?;
        let query = TangencyQuery::padded(shape.clone(), k, r, run.check_config());
        report = Some(tangency_check(&query)?);
    } else if verdict.status == Status::Unknown {
        run.gate(&shape)?;
        verdict = identifiability_numeric(&shape, k, &run.check_config())?;
    }

    if run.args.json {
        run.emit(json!({
            "config": run.config_json(),
            "shape": shape.dims(),
            "k": k,
            "verdict": verdict,
            "tangency": report,
        }));
    } else {
        println!("shape {shape}, k = {k}, k_c = {}", shape.critical_rank());
        print_verdict(&verdict);
        if let Some(rep) = &report {
            println!("padded tangency check, r = {}:", rep.r);
            print_report(rep);
        }
    }
    Ok(0)
}

fn print_verdict(v: &Verdict) {
    println!("verdict: {}", v.status);
    println!("rule: {} ({})", v.rule, v.reason);
    match &v.witness {
        Some(Witness::Decompositions { decompositions }) => {
            println!("decompositions: {decompositions}")
        }
        Some(Witness::Bound { bound }) => println!("bound: k <= {bound}"),
        Some(Witness::Certificate { certificate }) => {
            println!("certificate:");
            print_certificate(certificate, 1);
        }
        Some(Witness::Numeric(rep)) => print_report(rep),
        None => {}
    }
    if let Some(c) = &v.caveat {
        println!("caveat: {c}");
    }
}

fn print_report(rep: &TangencyReport) {
    println!(
        "  {:?}: prime {}, seed {}, terracini rank {}, span dim {}, equations {}, jacobian rank {} of {}, trials {}/{}, {} ms",
        rep.verdict,
        rep.prime,
        rep.seed,
        rep.terracini_rank,
        rep.span_dim,
        rep.num_equations,
        rep.jacobian_rank,
        rep.variety_dim,
        rep.trials,
        rep.max_trials,
        rep.elapsed_ms
    );
}

fn print_certificate(c: &Certificate, depth: usize) {
    let pad = "  ".repeat(depth);
    let (name, parent) = match &c.derivation {
        Derivation::NumericBase { report } => (
            format!(
                "numeric base (prime {}, seed {})",
                report.prime, report.seed
            ),
            None,
        ),
        Derivation::AssumedBase { source } => (format!("assumed base: {source}"), None),
        Derivation::StrassenBase => ("three-factor base".to_string(), None),
        Derivation::Extend { m, from } => (format!("extend by P^{m}"), Some(from)),
        Derivation::Weaken { from } => ("weaken".to_string(), Some(from)),
    };
    println!("{pad}{}: r = {}, k = {} <- {name}", c.shape, c.r, c.k);
    if let Some(p) = parent {
        print_certificate(p, depth + 1);
    }
}

fn cmd_bounds(run: &Run, dims: &Dims) -> Result<u8, Failure> {
    let shape = shape_of(dims)?;
    let report = best_bound(&shape, &[]);
    let table = exceptional_rank(&shape);
    if run.args.json {
        run.emit(json!({
            "config": run.config_json(),
            "bounds": report,
            "exceptional": table,
        }));
        return Ok(0);
    }
    let kc = &report.critical_rank;
    println!("shape {shape}");
    println!("k_c = {kc} ~ {:.6}", kc.to_f64());
    if report.rules.is_empty() {
        println!("no closed-form bound applies");
    }
    for b in &report.rules {
        println!(
            "{} = {} (k <= {}; {})",
            b.rule,
            b.bound,
            b.value,
            b.rule.citation()
        );
    }
    match &report.engine {
        Some(cert) => {
            println!("engine = {}", report.engine_bound);
            print_certificate(cert, 1);
        }
        None => println!("engine: no derivation"),
    }
    match report.max_rule {
        Some(rule) => println!("best: k <= {} ({rule})", report.max),
        None => println!("best: none"),
    }
    if let Some(t) = table {
        println!(
            "table: {} is not identifiable at k = {} ({} decompositions)",
            t.row, t.k, t.decompositions
        );
    }
    Ok(0)
}

fn cmd_secant(run: &Run, dims: &Dims, k: u64) -> Result<u8, Failure> {
    let shape = shape_of(dims)?;
    run.gate(&shape)?;
    let s = secant_dimension(&shape, k, &run.check_config())?;
    if run.args.json {
        run.emit(json!({ "config": run.config_json(), "secant": s }));
    } else {
        println!("shape {shape}, k = {k}");
        println!(
            "expected {}, actual {}, defect {} (prime {})",
            s.expected, s.actual, s.defect, s.prime
        );
    }
    Ok(0)
}

fn cmd_survey(run: &Run, max_size: u64, out: &Path) -> Result<u8, Failure> {
    let config = SurveyConfig {
        check: run.check_config(),
        record_timings: true,
    };
    let result = run_survey(max_size, &config, out)?;
    let s = &result.summary;
    if run.args.json {
        run.emit(
            json!({ "config": run.config_json(), "summary": s, "divergences": result.divergences }),
        );
    } else {
        println!(
            "max size {}: shapes {}, records {} ({} resumed)",
            s.max_size, s.shapes, s.total, result.resumed
        );
        println!(
            "numeric checks {}, certified {}, table hits {}",
            s.numeric, s.certified, s.table_hits
        );
        for (dims, k) in &s.non_certified {
            let shape = SegreShape::from_dims(dims.clone()).map_err(Failure::from)?;
            println!("  not certified: {shape}, k = {k}");
        }
        println!("divergences: {}", s.divergences);
        for d in &result.divergences {
            let shape = SegreShape::from_dims(d.dims.clone()).map_err(Failure::from)?;
            println!(
                "  {shape}, k = {}: {} by {}, expected {}",
                d.k, d.verdict, d.rule, d.expected
            );
        }
    }
    Ok(if result.succeeded() {
        0
    } else {
        EXIT_DIVERGENCE
    })
}
