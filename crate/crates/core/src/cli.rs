//! `satnet` command-line front end.
//!
//! Results go to stdout as JSON (CSV for `evolve --format csv`, DIMACS for
//! `gen`, text for `plan`). Failures go to stderr as one JSON line. Exit
//! codes: 0 success, 1 domain error, 2 usage or parse error, 3 resource
//! limit (plan too wide, instance too large, integer overflow).

use std::ffi::OsString;
use std::fs;
use std::io::{Read, Write};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::cnf::{generate_instance, parse_dimacs, Assignment, CnfError, Instance, InstanceKind};
use crate::engine::{plan_contraction, EngineError, DEFAULT_CAP};
use crate::network::{build_network, NetworkError};
use crate::oracle::{self, Bipartition, OracleError};
use crate::solver::{self, SolveError, SolverConfig, TieBreak};

#[derive(Debug, Parser)]
#[command(name = "satnet", version, about = "Exact tensor-network counting and solving for 3SAT")]
pub struct Cli {
    /// Maximum plan width (index groups per intermediate).
    #[arg(long, global = true, env = "SATNET_CAP", default_value_t = DEFAULT_CAP)]
    pub cap: usize,
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count satisfying assignments.
    Count { input: String },
    /// Extract one satisfying assignment.
    Solve {
        input: String,
        #[arg(long, value_enum, default_value_t = TieBreakArg::Zero)]
        tie_break: TieBreakArg,
        /// Seed for `--tie-break random`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fraction of solutions with the variable set to 0.
    Marginal {
        input: String,
        #[arg(long)]
        var: usize,
        /// Fixed bits, `k=v`.
        #[arg(long = "fix", value_parser = parse_fix)]
        fix: Vec<(usize, bool)>,
    },
    /// Imaginary-time overlap curve.
    Evolve {
        input: String,
        #[arg(long, default_value_t = 0.001)]
        dt: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Entanglement entropy of the solution state across a cut.
    Entropy {
        input: String,
        /// Variables on side A, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        cut: Vec<usize>,
    },
    /// Print the contraction plan of the counting network.
    Plan { input: String },
    /// Brute-force energy histogram.
    Census { input: String },
    /// Generate an instance as DIMACS.
    Gen {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TieBreakArg {
    Zero,
    One,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Random,
    Chain,
}

fn parse_fix(s: &str) -> Result<(usize, bool), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected k=v, got {s:?}"))?;
    let k = k.trim().parse().map_err(|_| format!("bad variable in {s:?}"))?;
    let v = match v.trim() {
        "0" => false,
        "1" => true,
        _ => return Err(format!("bit must be 0 or 1 in {s:?}")),
    };
    Ok((k, v))
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    fn usage(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind,
            message: message.into(),
        }
    }

    fn to_json(&self) -> String {
        json!({"error": self.kind, "message": self.message}).to_string()
    }
}

impl From<CnfError> for Failure {
    fn from(e: CnfError) -> Self {
        let kind = match e {
            CnfError::MalformedHeader(_) => "MalformedHeader",
            CnfError::ClauseWidthNot3 { .. } => "ClauseWidthNot3",
            CnfError::DuplicateVariableInClause { .. } => "DuplicateVariableInClause",
            CnfError::VariableOutOfRange { .. } => "VariableOutOfRange",
            CnfError::ClauseCountMismatch { .. } => "ClauseCountMismatch",
            CnfError::ZeroLiteral => "ZeroLiteral",
            CnfError::InvalidLiteral(_) => "InvalidLiteral",
            CnfError::UnterminatedClause => "UnterminatedClause",
            CnfError::TooFewVariables(_) => "TooFewVariables",
        };
        Self::usage(kind, e.to_string())
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let (code, kind) = match e {
            EngineError::PlanTooWide { .. } => (3, "PlanTooWide"),
            EngineError::IntegerOverflow => (3, "IntegerOverflow"),
            EngineError::OpenIndex(_) => (1, "OpenIndex"),
            EngineError::HyperIndex(_) => (1, "HyperIndex"),
            EngineError::PlanNetworkMismatch(_) => (1, "PlanNetworkMismatch"),
            EngineError::InvalidStep(_) => (1, "InvalidStep"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<NetworkError> for Failure {
    fn from(e: NetworkError) -> Self {
        let kind = match e {
            NetworkError::UnknownVariable(_) => "UnknownVariable",
            NetworkError::AlreadyConditioned(_) => "AlreadyConditioned",
            NetworkError::Tensor(_) => "Tensor",
        };
        Self {
            code: 1,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let kind = match e {
            SolveError::Engine(e) => return e.into(),
            SolveError::Network(e) => return e.into(),
            SolveError::Unsatisfiable => "Unsatisfiable",
            SolveError::ZeroNorm => "ZeroNorm",
            SolveError::PartialAssignment => "PartialAssignment",
            SolveError::LengthMismatch { .. } => "LengthMismatch",
            SolveError::AlreadyFixed(_) => "AlreadyFixed",
        };
        Self {
            code: 1,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let (code, kind) = match e {
            OracleError::InstanceTooLarge { .. } => (3, "InstanceTooLarge"),
            OracleError::ZeroNorm => (1, "ZeroNorm"),
            OracleError::InvalidBipartition(_) => (2, "InvalidBipartition"),
            OracleError::InvalidParameters(_) => (2, "InvalidParameters"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

impl Command {
    fn input(&self) -> Option<&str> {
        match self {
            Command::Count { input }
            | Command::Solve { input, .. }
            | Command::Marginal { input, .. }
            | Command::Evolve { input, .. }
            | Command::Entropy { input, .. }
            | Command::Plan { input }
            | Command::Census { input } => Some(input),
            Command::Gen { .. } => None,
        }
    }
}

fn read_instance(input: &str, stdin: &[u8]) -> Result<Instance, Failure> {
    if input == "-" {
        return Ok(parse_dimacs(stdin)?);
    }
    let bytes =
        fs::read(input).map_err(|e| Failure::usage("Io", format!("reading {input}: {e}")))?;
    Ok(parse_dimacs(&bytes)?)
}

fn bits_json(x: &Assignment) -> Value {
    Value::Array(
        x.bits()
            .iter()
            .map(|b| Value::from(u8::from(b.unwrap_or(false))))
            .collect(),
    )
}

/// Executes one parsed command and returns what goes to stdout. `stdin`
/// holds the standard input when the input path is `-`.
pub fn execute(cli: &Cli, stdin: &[u8]) -> Result<String, Failure> {
    if cli.cap < 3 {
        return Err(Failure::usage("Usage", format!("--cap must be at least 3, got {}", cli.cap)));
    }
    let cap = cli.cap;
    let out = match &cli.command {
        Command::Count { input } => {
            let inst = read_instance(input, stdin)?;
            let p = solver::count(&inst, cap)?;
            json!({"count": p.value().to_string()}).to_string()
        }
        Command::Solve {
            input,
            tie_break,
            seed,
        } => {
            let inst = read_instance(input, stdin)?;
            let config = SolverConfig {
                cap,
                tie_break: match tie_break {
                    TieBreakArg::Zero => TieBreak::PreferZero,
                    TieBreakArg::One => TieBreak::PreferOne,
                    TieBreakArg::Random => TieBreak::Random(*seed),
                },
                order: None,
            };
            match solver::extract_solution(&inst, &config) {
                Ok(e) => json!({
                    "sat": true,
                    "solution": bits_json(&e.assignment),
                    "contractions": e.contractions,
                })
                .to_string(),
                Err(SolveError::Unsatisfiable) => json!({"sat": false}).to_string(),
                Err(e) => return Err(e.into()),
            }
        }
        Command::Marginal { input, var, fix } => {
            let inst = read_instance(input, stdin)?;
            let mut fixed = Assignment::unset(inst.num_vars());
            for &(k, v) in fix {
                if k == 0 || k > inst.num_vars() {
                    return Err(NetworkError::UnknownVariable(k).into());
                }
                fixed.set(k, v);
            }
            let m = solver::marginal(&inst, &fixed, *var, cap)?;
            json!({"marginal": {"num": m.numerator.to_string(), "den": m.denominator.to_string()}})
                .to_string()
        }
        Command::Evolve {
            input,
            dt,
            steps,
            format,
        } => {
            let inst = read_instance(input, stdin)?;
            let curve = oracle::evolve_overlap(&inst, *dt, *steps)?;
            match format {
                Format::Csv => return Ok(curve.to_csv()),
                Format::Json => json!({
                    "dt": curve.dt,
                    "steps": curve.steps,
                    "points": curve.points.iter().map(|&(t, f)| json!([t, f])).collect::<Vec<_>>(),
                })
                .to_string(),
            }
        }
        Command::Entropy { input, cut } => {
            let inst = read_instance(input, stdin)?;
            let bip = Bipartition::new(inst.num_vars(), cut.iter().copied())?;
            let s = oracle::reduced_entropy(&inst, &bip)?;
            json!({
                "entropy": s,
                "cut": bip.side_a().iter().collect::<Vec<_>>(),
                "crossing_bonds": bip.crossing_bonds(&inst),
            })
            .to_string()
        }
        Command::Plan { input } => {
            let inst = read_instance(input, stdin)?;
            let net = build_network(&inst).absorb_test_state()?;
            return Ok(plan_contraction(&net, cap)?.dump());
        }
        Command::Census { input } => {
            let inst = read_instance(input, stdin)?;
            let census = oracle::brute_census(&inst)?;
            let hist: serde_json::Map<String, Value> = census
                .histogram
                .iter()
                .map(|(e, c)| (e.to_string(), Value::from(c.to_string())))
                .collect();
            json!({"p": census.p.to_string(), "histogram": hist}).to_string()
        }
        Command::Gen { kind, n, m, seed } => {
            let kind = match kind {
                KindArg::Random => InstanceKind::Random,
                KindArg::Chain => InstanceKind::Chain,
            };
            return Ok(generate_instance(kind, *n, *m, *seed)?.to_dimacs());
        }
    };
    Ok(out + "\n")
}

/// Parses arguments, runs the command on a pool of `--threads` workers and
/// writes the result. Returns the process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                return 0;
            }
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("usage error").to_string();
            let _ = writeln!(stderr, "{}", Failure::usage("Usage", first).to_json());
            return 2;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            let _ = writeln!(stderr, "{}", Failure { code: 3, kind: "ThreadPool", message: e.to_string() }.to_json());
            return 3;
        }
    };
    let mut input = Vec::new();
    if cli.command.input() == Some("-") {
        if let Err(e) = stdin.read_to_end(&mut input) {
            let _ = writeln!(stderr, "{}", Failure::usage("Io", format!("reading stdin: {e}")).to_json());
            return 2;
        }
    }
    match pool.install(|| execute(&cli, &input)) {
        Ok(out) => {
            let _ = stdout.write_all(out.as_bytes());
            0
        }
        Err(f) => {
            let _ = writeln!(stderr, "{}", f.to_json());
            f.code
        }
    }
}
