//! `lamflow`: analyze, evaluate, and check λ-terms; compile and decide
//! Boolean circuits through flow analysis.
//!
//! Exit codes: 0 success, 1 input error, 2 usage error, 3 fuel exhausted,
//! 4 linearity violation, 5 analysis disagrees with direct evaluation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use lamflow_core::circuits::{
    compile, decide_instance, eval_circuit, parse_netlist, Circuit, CompileError, InputVector,
};
use lamflow_core::eval::{default_fuel, eval, Closure, Env, EvalError};
use lamflow_core::sub0cfa::analyze_sub0cfa;
use lamflow_core::syntax::{linearity_violations, parse_raw, pretty, pretty_value};
use lamflow_core::{Analysis, Expr, Program};

#[derive(Parser)]
#[command(
    name = "lamflow",
    version,
    about = "Monovariant flow analysis for the λ-calculus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the flow cache of a program.
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Evaluate a closed program and print its value.
    Eval {
        file: PathBuf,
        /// Evaluation step budget [default: 10 × program size]
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        fuel: Option<u64>,
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Exit 0 iff the program is closed and linear.
    CheckLinear {
        file: PathBuf,
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Boolean circuits.
    #[command(subcommand)]
    Circuit(CircuitCommand),
}

#[derive(Subcommand)]
enum CircuitCommand {
    /// Write the circuit and its inputs as a closed linear term.
    Compile {
        netlist: PathBuf,
        #[arg(long)]
        inputs: String,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Evaluate the circuit directly.
    Eval {
        netlist: PathBuf,
        #[arg(long)]
        inputs: String,
    },
    /// Decide the circuit value by flow analysis of its compiled term.
    Decide {
        netlist: PathBuf,
        #[arg(long)]
        inputs: String,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
}

#[derive(Args)]
struct AnalysisArgs {
    #[arg(long, value_enum, default_value_t = AnalysisKind::Cfa0)]
    analysis: AnalysisKind,
    /// Growth events allowed per key (sub0cfa only) [default: 1]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    bound: Option<u64>,
}

#[derive(Args)]
struct SourceArgs {
    /// Rename clashing binders apart instead of rejecting the program.
    #[arg(long)]
    alpha_rename: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalysisKind {
    #[value(name = "0cfa")]
    Cfa0,
    ScaNaive,
    ScaUf,
    #[value(name = "sub0cfa")]
    Sub0cfa,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

/// A failure carrying its exit code; the message goes to standard error.
struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn input_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    fail(1, format!("{}: {e}", path.display()))
}

impl AnalysisArgs {
    fn resolve(&self) -> Analysis {
        match (self.analysis, self.bound) {
            (AnalysisKind::Sub0cfa, bound) => Analysis::Sub0cfa(bound.unwrap_or(1) as usize),
            (_, Some(_)) => Cli::command()
                .error(
                    ErrorKind::ArgumentConflict,
                    "--bound is only valid with --analysis sub0cfa",
                )
                .exit(),
            (AnalysisKind::Cfa0, None) => Analysis::Cfa0,
            (AnalysisKind::ScaNaive, None) => Analysis::ScaNaive,
            (AnalysisKind::ScaUf, None) => Analysis::ScaUnionFind,
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| input_error(path, e))
}

/// The program and whether its text carried explicit labels.
fn load_program(path: &Path, source: &SourceArgs) -> Result<(Arc<Expr>, bool), Failure> {
    let raw = parse_raw(&read(path)?).map_err(|e| input_error(path, e))?;
    let labeled = raw.has_explicit_labels();
    let raw = if source.alpha_rename {
        raw.alpha_rename()
    } else {
        raw
    };
    let e = raw.into_expr().map_err(|e| input_error(path, e))?;
    Ok((e, labeled))
}

fn load_circuit(path: &Path, bits: &str) -> Result<(Circuit, InputVector), Failure> {
    let circuit = parse_netlist(&read(path)?).map_err(|e| input_error(path, e))?;
    let inputs = InputVector::parse(bits).map_err(|e| fail(1, format!("--inputs: {e}")))?;
    if inputs.0.len() != circuit.inputs().len() {
        return Err(fail(
            1,
            format!(
                "--inputs: circuit has {} inputs, got {} bits",
                circuit.inputs().len(),
                inputs.0.len()
            ),
        ));
    }
    Ok((circuit, inputs))
}

fn compile_failure(e: CompileError) -> Failure {
    match e {
        CompileError::Netlist(e) => fail(1, e.to_string()),
        other => fail(5, other.to_string()),
    }
}

fn analyze(program: Arc<Expr>, analysis: Analysis, format: Format) -> String {
    let program = Program::new(program);
    match (analysis, format) {
        (Analysis::Sub0cfa(bound), Format::Table) => analyze_sub0cfa(&program, bound).to_string(),
        (Analysis::Sub0cfa(bound), Format::Json) => json(&analyze_sub0cfa(&program, bound)),
        (_, Format::Table) => analysis.run(&program).to_string(),
        (_, Format::Json) => json(&analysis.run(&program)),
    }
}

fn json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("caches serialize") + "\n"
}

fn write_closure(out: &mut String, c: &Closure, labeled: bool, depth: usize) {
    for (x, inner) in c.env.iter() {
        let pad = "  ".repeat(depth);
        let _ = writeln!(out, "{pad}{x} = {}", pretty_value(&inner.term, labeled));
        write_closure(out, inner, labeled, depth + 1);
    }
}

fn run_eval(program: Arc<Expr>, labeled: bool, fuel: Option<u64>) -> Result<String, Failure> {
    let fuel = fuel.map_or_else(|| default_fuel(&program, &Env::new()), |f| f as usize);
    match eval(&program, &Env::new(), fuel) {
        Ok(value) => {
            let mut out = pretty_value(&value.term, labeled) + "\n";
            write_closure(&mut out, &value, labeled, 1);
            Ok(out)
        }
        Err(e @ EvalError::FuelExhausted) => Err(fail(3, format!("{e} after {fuel} steps"))),
        Err(e @ EvalError::UnboundVariable(_)) => Err(fail(1, e.to_string())),
    }
}

fn check_linear(program: &Arc<Expr>) -> Result<String, Failure> {
    let mut problems: Vec<String> = linearity_violations(program)
        .into_iter()
        .map(|(x, n)| format!("{x}×{n}"))
        .collect();
    problems.extend(program.free_vars().iter().map(|x| format!("free {x}")));
    if problems.is_empty() {
        Ok("linear\n".into())
    } else {
        Err(fail(4, format!("not linear: {}", problems.join(", "))))
    }
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Analyze {
            file,
            analysis,
            format,
            source,
        } => {
            let analysis = analysis.resolve();
            let (program, _) = load_program(&file, &source)?;
            Ok(analyze(program, analysis, format))
        }
        Command::Eval { file, fuel, source } => {
            let (program, labeled) = load_program(&file, &source)?;
            run_eval(program, labeled, fuel)
        }
        Command::CheckLinear { file, source } => {
            let (program, _) = load_program(&file, &source)?;
            check_linear(&program)
        }
        Command::Circuit(CircuitCommand::Compile {
            netlist,
            inputs,
            output,
        }) => {
            let (circuit, inputs) = load_circuit(&netlist, &inputs)?;
            let instance = compile(&circuit, &inputs).map_err(compile_failure)?;
            let meta = format!(
                "-- true_marker: {}\n-- false_marker: {}\n-- probe_label: {}\n",
                instance.true_marker, instance.false_marker, instance.probe_label.0
            );
            let text = format!("{}\n{meta}", pretty(&instance.term, true));
            match output {
                Some(path) => {
                    std::fs::write(&path, text).map_err(|e| input_error(&path, e))?;
                    Ok(meta)
                }
                None => Ok(text),
            }
        }
        Command::Circuit(CircuitCommand::Eval { netlist, inputs }) => {
            let (circuit, inputs) = load_circuit(&netlist, &inputs)?;
            let value = eval_circuit(&circuit, &inputs).map_err(|e| input_error(&netlist, e))?;
            Ok(format!("{value}\n"))
        }
        Command::Circuit(CircuitCommand::Decide {
            netlist,
            inputs,
            analysis,
        }) => {
            let analysis = analysis.resolve();
            let (circuit, inputs) = load_circuit(&netlist, &inputs)?;
            let expected = eval_circuit(&circuit, &inputs).map_err(|e| input_error(&netlist, e))?;
            let instance = compile(&circuit, &inputs).map_err(compile_failure)?;
            let decided = decide_instance(&instance, analysis);
            if decided != expected {
                return Err(fail(
                    5,
                    format!("{analysis} decided {decided} but the circuit evaluates to {expected}"),
                ));
            }
            Ok(if decided { "ACCEPT\n" } else { "REJECT\n" }.into())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let worker = std::thread::Builder::new()
        .stack_size(1 << 28)
        .spawn(move || run(cli))
        .expect("spawn worker thread");
    let result = match worker.join() {
        Ok(result) => result,
        Err(_) => Err(fail(5, "internal error")),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure { code, message }) => {
            eprintln!("lamflow: {message}");
            ExitCode::from(code)
        }
    }
}
