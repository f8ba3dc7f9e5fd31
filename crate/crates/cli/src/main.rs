//! `rvsdg`: batch driver for construction, optimization and destruction.
//!
//! Exit status: 0 on success, 1 for unreadable, unparsable or invalid input
//! and bad flags, 2 when a roundtrip finds behaviour that differs from the
//! source, 3 when an internal invariant is violated.

use clap::{Args, Parser, Subcommand};
use rvsdg::interp::DEFAULT_FUEL;
use rvsdg::opt::{parse_passes, PassConfig, DEFAULT_ORDER, DEFAULT_UNROLL_FACTOR};
use rvsdg::report::{self, Error, Level, Via};
use rvsdg::source::{parse, Module};
use std::io::Read;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rvsdg", version, about = "Construct, optimize and destruct regionalized value state dependence graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Input {
    /// Source IR file, or `-` for standard input.
    file: String,
}

#[derive(Args)]
struct Passes {
    /// Passes to run, separated by commas or spaces (DNE CNE ILN INV PSH PLL
    /// RED URL IVT). `default` is the standard order; an empty string runs
    /// nothing.
    #[arg(long)]
    passes: Option<String>,
    /// Replication factor of loop unrolling.
    #[arg(long, default_value_t = DEFAULT_UNROLL_FACTOR)]
    unroll_factor: u32,
}

impl Passes {
    fn config(&self, default: &str) -> Result<PassConfig, Error> {
        let text = self.passes.as_deref().unwrap_or(default);
        let text = if text.trim() == "default" { DEFAULT_ORDER } else { text };
        let passes = parse_passes(text).map_err(|e| Error::Usage(e.to_string()))?;
        if self.unroll_factor == 0 {
            return Err(Error::Usage("--unroll-factor must be at least 1".into()));
        }
        Ok(PassConfig { passes, unroll_factor: self.unroll_factor, disabled: Vec::new() })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and validate a module.
    Check(Input),
    /// Print the constructed graph.
    Construct(Input),
    /// Print the graph after optimization (default: the standard pass order).
    Opt {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        passes: Passes,
    },
    /// Construct, optimize (default: standard order) and print the destructed module.
    Destruct {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        passes: Passes,
    },
    /// Evaluate a function and print its result and side-effect trace.
    Run {
        #[command(flatten)]
        input: Input,
        /// Function to call.
        #[arg(long = "fn")]
        func: String,
        /// Comma-separated arguments.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        args: String,
        /// Maximum number of evaluated operations.
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
        /// Evaluator: source, rvsdg or destructed.
        #[arg(long, default_value = "source")]
        via: String,
        #[command(flatten)]
        passes: Passes,
    },
    /// Print DOT for the graph (after --passes), the CFGs or the control trees.
    Dot {
        #[command(flatten)]
        input: Input,
        /// rvsdg, cfg or tree.
        #[arg(long, default_value = "rvsdg")]
        level: String,
        #[command(flatten)]
        passes: Passes,
    },
    /// Print key=value statistics (after --passes, none by default).
    Stats {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        passes: Passes,
    },
    /// Check graph and destructed module against the source on random inputs.
    Roundtrip {
        #[command(flatten)]
        input: Input,
        /// Random inputs per exported function.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        passes: Passes,
    },
}

fn load(input: &Input) -> Result<Module, Error> {
    let text = if input.file == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| Error::Usage(format!("stdin: {e}")))?;
        s
    } else {
        std::fs::read_to_string(&input.file).map_err(|e| Error::Usage(format!("{}: {e}", input.file)))?
    };
    Ok(parse(&text)?)
}

fn execute(cmd: Cmd) -> Result<String, Error> {
    match cmd {
        Cmd::Check(input) => {
            let m = load(&input)?;
            let defined = m.functions.iter().filter(|f| f.body.is_some()).count();
            Ok(format!(
                "ok functions={defined} externals={} globals={} instructions={}\n",
                m.functions.len() - defined,
                m.globals.len(),
                m.instruction_count()
            ))
        }
        Cmd::Construct(input) => {
            let (g, _) = report::build(&load(&input)?, &PassConfig::only(vec![]))?;
            Ok(rvsdg::graph::dump::dump(&g))
        }
        Cmd::Opt { input, passes } => {
            let (g, _) = report::build(&load(&input)?, &passes.config(DEFAULT_ORDER)?)?;
            Ok(rvsdg::graph::dump::dump(&g))
        }
        Cmd::Destruct { input, passes } => {
            let (g, _) = report::build(&load(&input)?, &passes.config(DEFAULT_ORDER)?)?;
            Ok(rvsdg::source::print_module(&report::lower(&g)?))
        }
        Cmd::Run { input, func, args, fuel, via, passes } => {
            let m = load(&input)?;
            let values = report::parse_args(&m, &func, &args)?;
            let via: Via = via.parse()?;
            match report::run(&m, &func, &values, fuel, via, &passes.config(DEFAULT_ORDER)?)? {
                Ok(run) => Ok(run.render()),
                Err(trap) => Ok(format!("trap {trap}\n")),
            }
        }
        Cmd::Dot { input, level, passes } => {
            let level: Level = level.parse()?;
            report::dot(&load(&input)?, level, &passes.config("")?)
        }
        Cmd::Stats { input, passes } => report::stats(&load(&input)?, &passes.config("")?),
        Cmd::Roundtrip { input, samples, seed, passes } => {
            let r = report::roundtrip(&load(&input)?, &passes.config(DEFAULT_ORDER)?, samples, seed)?;
            Ok(format!(
                "graph agreed={} skipped={}\ndestructed agreed={} skipped={}\nok\n",
                r.graph.agreed, r.graph.skipped, r.destructed.agreed, r.destructed.skipped
            ))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.cmd) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
