//! Command-line front end: parses flags, launches a registered program once
//! per shot and prints rank-prefixed output plus outcome statistics.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;
use qmpi_core::fabric::ConfigFile;
use qmpi_core::nqasm;
use qmpi_core::runtime::nqasm_session;
use qmpi_core::{launch, Error, LaunchSpec, Registry, RunReport, SchedulerMode};

/// Name under which `--asm`/`--peer-asm` sessions are registered.
pub const NQASM_PROGRAM: &str = "nqasm-run";

#[derive(Debug, Parser)]
#[command(name = "qmpi", about = "Run an SPMD quantum network program on simulated ranks")]
pub struct Args {
    /// Number of ranks.
    #[arg(short = 'n', value_parser = clap::value_parser!(u64).range(1..))]
    pub ranks: u64,

    /// Registered program to run (`hello`, `ghz`, `nqasm-run`).
    #[arg(long)]
    pub program: String,

    /// Topology file (`size`, `connectivity`, `qubit_cap`, `seed`).
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Base seed; shot `i` runs with `seed + i`. Defaults to the config
    /// file's seed, then 0.
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, default_value_t = SchedulerMode::RoundRobinDeterministic)]
    pub scheduler: SchedulerMode,

    /// Write the operation trace of the first shot here.
    #[arg(long)]
    pub trace: Option<PathBuf>,

    /// Number of independent launches to aggregate.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub shots: u64,

    /// Assembly program for rank 0 of `nqasm-run`.
    #[arg(long)]
    pub asm: Option<PathBuf>,

    /// Assembly program for rank 1 of `nqasm-run` (default: empty program).
    #[arg(long)]
    pub peer_asm: Option<PathBuf>,
}

/// Outcome counts over all shots, keyed by the rank-ordered bitstring.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ShotSummary {
    pub shots: u64,
    pub counts: BTreeMap<String, u64>,
}

impl ShotSummary {
    pub fn fraction(&self, bits: &str) -> f64 {
        self.counts.get(bits).copied().unwrap_or(0) as f64 / self.shots as f64
    }

    pub fn render(&self) -> String {
        let mut s = format!("shots: {}\n", self.shots);
        for (bits, n) in &self.counts {
            s.push_str(&format!("{bits}: {n} ({:.4})\n", *n as f64 / self.shots as f64));
        }
        s
    }
}

fn read_asm(path: &PathBuf) -> Result<nqasm::NqasmProgram, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(nqasm::parse(&text)?)
}

fn registry(args: &Args) -> Result<Registry, Error> {
    let mut reg = Registry::with_builtins();
    if args.program == NQASM_PROGRAM {
        let asm_path = args.asm.as_ref().ok_or_else(|| {
            Error::Program(format!("{NQASM_PROGRAM} needs --asm <path>"))
        })?;
        let asm = read_asm(asm_path)?;
        let peer = match &args.peer_asm {
            Some(p) => read_asm(p)?,
            None => nqasm::NqasmProgram::default(),
        };
        reg.register(NQASM_PROGRAM, nqasm_session(asm, peer))?;
    }
    Ok(reg)
}

/// Launches every shot. Returns the report of the first shot and the
/// aggregated statistics (`None` when the program reported no bits).
pub fn run_shots(args: &Args) -> Result<(RunReport, Option<ShotSummary>), Error> {
    let reg = registry(args)?;
    let base_seed = match (args.seed, &args.config) {
        (Some(seed), _) => seed,
        (None, Some(path)) => ConfigFile::load(path)?.seed.unwrap_or(0),
        (None, None) => 0,
    };
    let mut first = None;
    let mut summary = ShotSummary::default();
    for shot in 0..args.shots {
        let mut spec = LaunchSpec::new(args.program.clone(), args.ranks as usize)
            .seed(base_seed.wrapping_add(shot))
            .scheduler(args.scheduler);
        spec.config_path = args.config.clone();
        if shot == 0 {
            spec.trace_path = args.trace.clone();
        }
        let report = launch(&reg, &spec)?;
        let bits = report.bitstring();
        if !bits.is_empty() {
            summary.shots += 1;
            *summary.counts.entry(bits).or_default() += 1;
        }
        first.get_or_insert(report);
    }
    let summary = (summary.shots > 0).then_some(summary);
    Ok((first.expect("at least one shot"), summary))
}

/// Entry point shared by the binary and tests. Exit codes: 0 success,
/// 1 run failure, 2 usage error.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    2
                }
            };
            return code;
        }
    };
    match run_shots(&args) {
        Ok((report, summary)) => {
            for (rank, line) in &report.output {
                let _ = writeln!(out, "rank={rank}: {line}");
            }
            if let Some(s) = summary {
                let _ = write!(out, "{}", s.render());
            }
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
