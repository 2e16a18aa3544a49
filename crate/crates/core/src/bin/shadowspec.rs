use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use shadowspec::cli::{self, Command, KindFilter, RunConfig, THREADS_ENV};
use shadowspec::error::exit;
use shadowspec::shadowing::ProbeKind;

#[derive(Parser)]
#[command(
    name = "shadowspec",
    version,
    about = "Hyperbolicity, expansivity and shadowing diagnostics for linear operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Spectral report and verdicts for an operator.
    Analyze(Common),
    /// Pseudo-orbit shadowing experiment.
    Shadow(Common),
    /// Windowed sequence-operator gains (CSV with columns N,gain).
    Probe(Common),
    /// Reproduce the weighted-shift pair T and S.
    Example17(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Dense,
    Shift,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeArg {
    /// Rows x_{n+1} - T x_n.
    S,
    /// Rows x_{n-1} - T* x_n.
    B,
}

#[derive(Args)]
struct Common {
    /// Operator JSON.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Report path; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Quadrature nodes on the unit circle; adapted to the spectrum when absent.
    #[arg(long)]
    nodes: Option<usize>,
    /// Window half-width N.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Test-sequence ratio (> 1).
    #[arg(long)]
    q: Option<f64>,
    /// Require the input to be of this kind.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Per-state cut for shift operators.
    #[arg(long, default_value_t = 16)]
    half_width: usize,
    #[arg(long, value_enum, default_value_t = ProbeArg::B)]
    probe_kind: ProbeArg,
    /// Explicit splitting matrix for `shadow` (dense operator JSON).
    #[arg(long)]
    projector: Option<PathBuf>,
}

fn config(command: Command, c: Common) -> RunConfig {
    RunConfig {
        command,
        input: c.input,
        output: c.output,
        tol: c.tol,
        seed: c.seed,
        nodes: c.nodes,
        window: c.window,
        delta: c.delta,
        q: c.q,
        kind: c.kind.map(|k| match k {
            KindArg::Dense => KindFilter::Dense,
            KindArg::Shift => KindFilter::Shift,
        }),
        half_width: c.half_width,
        probe_kind: match c.probe_kind {
            ProbeArg::S => ProbeKind::ScriptS,
            ProbeArg::B => ProbeKind::ScriptB,
        },
        projector: c.projector,
    }
}

fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    init_threads();
    let cfg = match args.command {
        Cmd::Analyze(c) => config(Command::Analyze, c),
        Cmd::Shadow(c) => config(Command::Shadow, c),
        Cmd::Probe(c) => config(Command::Probe, c),
        Cmd::Example17(c) => config(Command::Example17, c),
    };
    let result = cli::run(&cfg).and_then(|outcome| {
        let stdout_doc = outcome.emit(&cfg)?;
        match stdout_doc {
            Some(doc) => print!("{doc}"),
            None => print!("{}", outcome.table),
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
