//! SPMD launcher: one registered program runs on every rank, with the rank
//! and size injected through [`RankContext`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::communicator::Communicator;
use crate::error::{Error, Result};
use crate::fabric::{
    render_trace, ConfigFile, Fabric, FabricConfig, SchedulerMode, TopologyConfig, TraceRecord,
    DEFAULT_DEADLOCK_TIMEOUT,
};
use crate::nqasm::{self, NqasmProgram};
use crate::programs;
use crate::Rank;

type OutputLog = Arc<Mutex<Vec<(Rank, String)>>>;

/// Everything a rank's program can see: its identity, its communicator and
/// an output sink.
pub struct RankContext {
    rank: Rank,
    size: usize,
    comm: Communicator,
    log: OutputLog,
    bits: Vec<u8>,
}

impl RankContext {
    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn comm(&self) -> &Communicator {
        &self.comm
    }

    pub fn comm_mut(&mut self) -> &mut Communicator {
        &mut self.comm
    }

    /// Emits one line of program output attributed to this rank.
    pub fn println(&self, line: impl fmt::Display) {
        self.log
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .push((self.rank, line.to_string()));
    }

    /// Adds measurement outcomes to this rank's entry in the run report.
    pub fn report_bits(&mut self, bits: &[u8]) {
        self.bits.extend_from_slice(bits);
    }
}

pub type ProgramFn = dyn Fn(&mut RankContext) -> Result<()> + Send + Sync;

/// Named SPMD entry points.
#[derive(Clone, Default)]
pub struct Registry {
    programs: BTreeMap<String, Arc<ProgramFn>>,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// `hello` and `ghz`.
    pub fn with_builtins() -> Self {
        let mut r = Registry::new();
        r.register("hello", programs::hello::main)
            .expect("fresh registry");
        r.register("ghz", programs::ghz::main).expect("fresh registry");
        r
    }

    pub fn register<F>(&mut self, name: &str, entry: F) -> Result<()>
    where
        F: Fn(&mut RankContext) -> Result<()> + Send + Sync + 'static,
    {
        if self.programs.contains_key(name) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        self.programs.insert(name.to_string(), Arc::new(entry));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Arc<ProgramFn>> {
        self.programs
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownProgram(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.programs.keys().map(String::as_str)
    }
}

/// Registers a two-rank assembly session: rank 0 runs `asm`, rank 1 runs
/// `peer_asm`, each with the other as its peer. Each rank prints its
/// non-zero registers when its program finishes.
pub fn nqasm_session(asm: NqasmProgram, peer_asm: NqasmProgram) -> impl Fn(&mut RankContext) -> Result<()> + Send + Sync {
    move |ctx: &mut RankContext| {
        if ctx.size() != 2 {
            return Err(Error::Program(format!(
                "nqasm-run needs exactly 2 ranks, got {}",
                ctx.size()
            )));
        }
        let (program, peer) = if ctx.rank() == 0 { (&asm, 1) } else { (&peer_asm, 0) };
        let state = nqasm::execute(program, ctx.comm(), peer)?;
        let regs: Vec<String> = state
            .registers
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0)
            .map(|(i, v)| format!("R{i}={v}"))
            .collect();
        ctx.println(format!("registers: {}", regs.join(" ")));
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LaunchSpec {
    pub program_name: String,
    pub num_ranks: usize,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub scheduler: SchedulerMode,
    pub trace_path: Option<PathBuf>,
    pub deadlock_timeout: Duration,
}

impl LaunchSpec {
    pub fn new(program_name: impl Into<String>, num_ranks: usize) -> Self {
        LaunchSpec {
            program_name: program_name.into(),
            num_ranks,
            config_path: None,
            seed: 0,
            scheduler: SchedulerMode::RoundRobinDeterministic,
            trace_path: None,
            deadlock_timeout: DEFAULT_DEADLOCK_TIMEOUT,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn scheduler(mut self, scheduler: SchedulerMode) -> Self {
        self.scheduler = scheduler;
        self
    }

    pub fn trace_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.trace_path = Some(path.into());
        self
    }

    pub fn config_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.config_path = Some(path.into());
        self
    }

    fn fabric_config(&self) -> Result<FabricConfig> {
        if self.num_ranks == 0 {
            return Err(Error::Config {
                line: 0,
                message: "num_ranks must be at least 1".into(),
            });
        }
        let topology = match &self.config_path {
            Some(path) => ConfigFile::load(path)?.resolve(self.num_ranks, self.seed)?,
            None => TopologyConfig::mesh(self.num_ranks, self.seed),
        };
        Ok(FabricConfig::new(topology, self.scheduler).with_timeout(self.deadlock_timeout))
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    /// Output lines in emission order.
    pub output: Vec<(Rank, String)>,
    /// Measurement bits reported by each rank, indexed by rank.
    pub bits: Vec<Vec<u8>>,
    pub probes: BTreeMap<String, Vec<Complex64>>,
    pub trace: Vec<TraceRecord>,
    pub trace_path: Option<PathBuf>,
    pub live_qubits: usize,
    pub wall_time: Duration,
}

impl RunReport {
    /// Reported bits of all ranks concatenated in rank order, e.g. `"010"`.
    pub fn bitstring(&self) -> String {
        self.bits
            .iter()
            .flatten()
            .map(|b| char::from(b'0' + b))
            .collect()
    }

    pub fn trace_text(&self) -> String {
        render_trace(&self.trace)
    }
}

/// Results of [`run_spmd`]: per-rank return values plus the fabric, which
/// stays inspectable after the ranks exit.
pub struct SpmdRun<T> {
    pub results: Vec<T>,
    pub bits: Vec<Vec<u8>>,
    pub output: Vec<(Rank, String)>,
    pub fabric: Arc<Fabric>,
    pub wall_time: Duration,
}

struct FinishGuard<'a> {
    fabric: &'a Fabric,
    rank: Rank,
}

impl Drop for FinishGuard<'_> {
    fn drop(&mut self) {
        if std::thread::panicking() {
            self.fabric.shutdown();
        }
        self.fabric.rank_finished(self.rank);
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}

/// Runs `entry` on `config.topology.size` ranks, one thread each, and waits
/// for all of them. The first rank to fail (in rank order, ignoring ranks
/// that were only shut down as a consequence) determines the error.
pub fn run_spmd<T, F>(config: FabricConfig, entry: F) -> Result<SpmdRun<T>>
where
    T: Send,
    F: Fn(&mut RankContext) -> Result<T> + Sync,
{
    let size = config.topology.size;
    let fabric = Arc::new(Fabric::new(config)?);
    let log: OutputLog = Arc::default();
    let start = Instant::now();

    let outcomes: Vec<Result<(T, Vec<u8>)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..size)
            .map(|rank| {
                let fabric = fabric.clone();
                let log = log.clone();
                let entry = &entry;
                std::thread::Builder::new()
                    .name(format!("rank-{rank}"))
                    .spawn_scoped(s, move || {
                        let _guard = FinishGuard {
                            fabric: &fabric,
                            rank,
                        };
                        let run = || -> Result<(T, Vec<u8>)> {
                            let comm = Communicator::init(rank, size, fabric.clone())?;
                            let mut ctx = RankContext {
                                rank,
                                size,
                                comm,
                                log,
                                bits: Vec::new(),
                            };
                            let value = entry(&mut ctx)?;
                            Ok((value, ctx.bits))
                        };
                        let out = run();
                        if let Err(e) = &out {
                            if !matches!(e, Error::Shutdown | Error::GlobalDeadlock) {
                                fabric.shutdown();
                            }
                        }
                        out
                    })
                    .expect("spawn rank thread")
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|p| Err(Error::Panicked(panic_message(p))))
            })
            .collect()
    });
    let wall_time = start.elapsed();

    let mut results = Vec::with_capacity(size);
    let mut bits = Vec::with_capacity(size);
    let mut first_failure = None;
    let mut deadlocked = false;
    for (rank, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((v, b)) => {
                results.push(v);
                bits.push(b);
            }
            Err(Error::GlobalDeadlock) => deadlocked = true,
            Err(Error::Shutdown) => {}
            Err(e) => {
                first_failure.get_or_insert((rank, e));
            }
        }
    }
    if let Some((rank, e)) = first_failure {
        return Err(Error::RankPanic {
            rank,
            source: Box::new(e),
        });
    }
    if deadlocked {
        return Err(Error::GlobalDeadlock);
    }
    if results.len() != size {
        return Err(Error::Shutdown);
    }
    let output = std::mem::take(&mut *log.lock().unwrap_or_else(|p| p.into_inner()));
    Ok(SpmdRun {
        results,
        bits,
        output,
        fabric,
        wall_time,
    })
}

/// Launches a registered program.
pub fn launch(registry: &Registry, spec: &LaunchSpec) -> Result<RunReport> {
    let entry = registry.get(&spec.program_name)?;
    let config = spec.fabric_config()?;
    let run = run_spmd(config, |ctx| entry(ctx))?;
    let trace = run.fabric.trace();
    if let Some(path) = &spec.trace_path {
        std::fs::write(path, render_trace(&trace))?;
    }
    let probes = run
        .fabric
        .probe_labels()
        .into_iter()
        .filter_map(|l| {
            let v = run.fabric.probe_result(&l)?.ok()?;
            Some((l, v))
        })
        .collect();
    Ok(RunReport {
        output: run.output,
        bits: run.bits,
        probes,
        trace,
        trace_path: spec.trace_path.clone(),
        live_qubits: run.fabric.live_qubits(),
        wall_time: run.wall_time,
    })
}
