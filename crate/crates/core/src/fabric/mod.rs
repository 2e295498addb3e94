//! Simulated network substrate: ordered classical channels, EPR sockets and
//! GHZ sessions over the shared state-vector engine.
//!
//! Every rank-issued operation goes through one lock, so operations commit
//! one at a time and each emits exactly one trace record. Two scheduling
//! modes are supported:
//!
//! * [`SchedulerMode::Concurrent`]: ranks commit in whatever order they reach
//!   the lock.
//! * [`SchedulerMode::RoundRobinDeterministic`]: a turn token cycles through
//!   the ranks in rank order and only its holder may commit. A rank parked in
//!   a blocking receive gives up the token and is skipped until some other
//!   rank makes progress, so the commit order is a pure function of the
//!   programs and the seed.
//!
//! In both modes a run where every live rank is parked without any progress
//! since its last check is reported as [`Error::GlobalDeadlock`]; a parked
//! rank gets [`Error::DeadlockTimeout`] once no rank has completed an
//! operation for the configured timeout.

mod config;
mod trace;

pub use config::{ConfigFile, Connectivity, TopologyConfig};
pub use trace::{render as render_trace, TraceKind, TraceRecord};

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::engine::{GateKind, QuantumState, QubitHandle};
use crate::error::{Error, Result};
use crate::Rank;

pub const DEFAULT_DEADLOCK_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SchedulerMode {
    #[default]
    RoundRobinDeterministic,
    Concurrent,
}

impl FromStr for SchedulerMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "round-robin-deterministic" => Ok(SchedulerMode::RoundRobinDeterministic),
            "concurrent" => Ok(SchedulerMode::Concurrent),
            other => Err(format!(
                "unknown scheduler {other:?} (expected round-robin-deterministic or concurrent)"
            )),
        }
    }
}

impl fmt::Display for SchedulerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchedulerMode::RoundRobinDeterministic => "round-robin-deterministic",
            SchedulerMode::Concurrent => "concurrent",
        })
    }
}

#[derive(Debug, Clone)]
pub struct FabricConfig {
    pub topology: TopologyConfig,
    pub scheduler: SchedulerMode,
    /// A waiting rank gives up with `DeadlockTimeout` once no rank has
    /// completed an operation for this long.
    pub deadlock_timeout: Duration,
}

impl FabricConfig {
    pub fn new(topology: TopologyConfig, scheduler: SchedulerMode) -> Self {
        FabricConfig {
            topology,
            scheduler,
            deadlock_timeout: DEFAULT_DEADLOCK_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.deadlock_timeout = timeout;
        self
    }
}

/// A tagged classical payload. Immutable once constructed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassicalMessage {
    tag: String,
    payload: Vec<i64>,
}

impl ClassicalMessage {
    pub fn new(tag: impl Into<String>, payload: Vec<i64>) -> Self {
        ClassicalMessage {
            tag: tag.into(),
            payload,
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn payload(&self) -> &[i64] {
        &self.payload
    }
}

/// Endpoint pair for entanglement generation. Both ranks of a pair refer
/// to the same socket value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EprSocket {
    lo: Rank,
    hi: Rank,
}

impl EprSocket {
    pub fn new(a: Rank, b: Rank) -> Result<Self> {
        if a == b {
            return Err(Error::SelfSend(a));
        }
        Ok(EprSocket {
            lo: a.min(b),
            hi: a.max(b),
        })
    }

    pub fn endpoints(&self) -> (Rank, Rank) {
        (self.lo, self.hi)
    }

    pub fn peer_of(&self, rank: Rank) -> Option<Rank> {
        if rank == self.lo {
            Some(self.hi)
        } else if rank == self.hi {
            Some(self.lo)
        } else {
            None
        }
    }
}

impl fmt::Display for EprSocket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.lo, self.hi)
    }
}

#[derive(Debug, Default, Clone)]
struct RankState {
    alive: bool,
    // epoch at which this rank last found its wait condition unmet
    waiting: Option<u64>,
    comm_init: bool,
    barrier_seen: u64,
    collectives_seen: usize,
}

#[derive(Debug, Default)]
struct Probe {
    parts: Vec<Option<Vec<QubitHandle>>>,
    result: Option<Result<Vec<Complex64>>>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SocketCounts {
    pub created: u64,
    pub received: u64,
}

struct Inner {
    engine: QuantumState,
    channels: HashMap<(Rank, Rank), VecDeque<ClassicalMessage>>,
    // (initiator, receiver) -> pending halves
    epr: HashMap<(Rank, Rank), VecDeque<(u64, QubitHandle)>>,
    ghz: HashMap<(Rank, Rank), VecDeque<(u64, QubitHandle)>>,
    epr_counts: BTreeMap<EprSocket, SocketCounts>,
    next_pair: u64,
    next_session: u64,
    barrier_arrived: usize,
    barrier_generation: u64,
    probes: BTreeMap<String, Probe>,
    // collective sequence as first announced by any rank: (op, root)
    collectives: Vec<(&'static str, Rank)>,
    ranks: Vec<RankState>,
    turn: Rank,
    epoch: u64,
    deadlocked: bool,
    shutdown: bool,
    // last time any rank completed an operation
    last_activity: Instant,
    trace: Vec<TraceRecord>,
}

impl Inner {
    fn record(&mut self, rank: Rank, kind: TraceKind, details: Vec<(&'static str, String)>) {
        let seq = self.trace.len() as u64;
        self.trace.push(TraceRecord {
            seq,
            rank,
            kind,
            details,
        });
    }

    fn owned(&self, rank: Rank, q: QubitHandle) -> Result<()> {
        if !self.engine.is_live(q) {
            return Err(Error::DeadHandle(q.id()));
        }
        if q.owner() != rank {
            return Err(Error::LocalityViolation {
                rank,
                qubit: q.id(),
                owner: q.owner(),
            });
        }
        Ok(())
    }

    fn all_blocked(&self) -> bool {
        let mut any = false;
        for r in self.ranks.iter().filter(|r| r.alive) {
            any = true;
            if r.waiting != Some(self.epoch) {
                return false;
            }
        }
        any
    }
}

/// The shared network: one engine, all channels and sockets of a run.
pub struct Fabric {
    config: FabricConfig,
    inner: Mutex<Inner>,
    wake: Vec<Condvar>,
}

impl fmt::Debug for Fabric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fabric").field("config", &self.config).finish()
    }
}

type Guard<'a> = MutexGuard<'a, Inner>;

impl Fabric {
    pub fn new(config: FabricConfig) -> Result<Self> {
        config.topology.validate()?;
        let size = config.topology.size;
        let inner = Inner {
            engine: QuantumState::new(config.topology.qubit_cap, config.topology.seed),
            channels: HashMap::new(),
            epr: HashMap::new(),
            ghz: HashMap::new(),
            epr_counts: BTreeMap::new(),
            next_pair: 0,
            next_session: 0,
            barrier_arrived: 0,
            barrier_generation: 0,
            probes: BTreeMap::new(),
            collectives: Vec::new(),
            ranks: vec![
                RankState {
                    alive: true,
                    ..RankState::default()
                };
                size
            ],
            turn: 0,
            epoch: 0,
            deadlocked: false,
            shutdown: false,
            last_activity: Instant::now(),
            trace: Vec::new(),
        };
        Ok(Fabric {
            config,
            inner: Mutex::new(inner),
            wake: (0..size).map(|_| Condvar::new()).collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.config.topology.size
    }

    pub fn config(&self) -> &FabricConfig {
        &self.config
    }

    pub fn connected(&self, a: Rank, b: Rank) -> bool {
        a < self.size() && b < self.size() && self.config.topology.connectivity.connected(a, b)
    }

    fn lock(&self) -> Guard<'_> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn deterministic(&self) -> bool {
        self.config.scheduler == SchedulerMode::RoundRobinDeterministic
    }

    fn check_rank(&self, rank: Rank) -> Result<()> {
        if rank >= self.size() {
            return Err(Error::UnknownNode(rank));
        }
        Ok(())
    }

    fn notify_all(&self) {
        for cv in &self.wake {
            cv.notify_all();
        }
    }

    /// Parks `rank` until woken or until no rank has completed an operation
    /// for the deadlock timeout (counted from `start` at the earliest).
    /// Returns `false` on timeout.
    fn park<'a>(&'a self, g: Guard<'a>, rank: Rank, start: Instant) -> (Guard<'a>, bool) {
        let since = start.max(g.last_activity);
        let left = self.config.deadlock_timeout.saturating_sub(since.elapsed());
        if left.is_zero() {
            return (g, false);
        }
        let (g, _) = self.wake[rank]
            .wait_timeout(g, left)
            .unwrap_or_else(|p| p.into_inner());
        (g, true)
    }

    fn acquire(&self, rank: Rank, op: &str) -> Result<Guard<'_>> {
        self.check_rank(rank)?;
        let start = Instant::now();
        let mut g = self.lock();
        loop {
            if g.shutdown {
                return Err(Error::Shutdown);
            }
            if g.deadlocked {
                return Err(Error::GlobalDeadlock);
            }
            if !self.deterministic() || g.turn == rank {
                return Ok(g);
            }
            let (ng, ok) = self.park(g, rank, start);
            g = ng;
            if !ok {
                return Err(Error::DeadlockTimeout {
                    rank,
                    op: op.to_string(),
                });
            }
        }
    }

    fn advance_turn(&self, g: &mut Inner, from: Rank) {
        let n = self.size();
        for step in 1..=n {
            let r = (from + step) % n;
            let st = &g.ranks[r];
            if st.alive && st.waiting != Some(g.epoch) {
                g.turn = r;
                self.wake[r].notify_all();
                return;
            }
        }
        if g.ranks.iter().any(|r| r.alive) {
            g.deadlocked = true;
            self.notify_all();
        }
    }

    fn release(&self, mut g: Guard<'_>, rank: Rank, progressed: bool) {
        g.last_activity = Instant::now();
        if progressed {
            g.epoch += 1;
        }
        if self.deterministic() {
            if g.turn == rank {
                self.advance_turn(&mut g, rank);
            }
        } else if progressed {
            self.notify_all();
        }
    }

    /// Runs one non-blocking committed operation for `rank`.
    fn op<T>(&self, rank: Rank, name: &str, f: impl FnOnce(&mut Inner) -> Result<T>) -> Result<T> {
        let mut g = self.acquire(rank, name)?;
        let out = f(&mut g);
        self.release(g, rank, out.is_ok());
        out
    }

    /// Runs a blocking operation: `register` executes once on entry, then
    /// `poll` is retried whenever another rank makes progress until it yields
    /// a value or fails.
    fn blocking<S, T>(
        &self,
        rank: Rank,
        name: &str,
        register: impl FnOnce(&mut Inner) -> Result<(S, bool)>,
        mut poll: impl FnMut(&mut Inner, &mut S) -> Result<Option<T>>,
    ) -> Result<T> {
        let start = Instant::now();
        let mut g = self.acquire(rank, name)?;
        let mut state = match register(&mut g) {
            Ok((s, progressed)) => {
                if progressed {
                    g.last_activity = Instant::now();
                    g.epoch += 1;
                    if !self.deterministic() {
                        self.notify_all();
                    }
                }
                s
            }
            Err(e) => {
                self.release(g, rank, false);
                return Err(e);
            }
        };
        loop {
            match poll(&mut g, &mut state) {
                Ok(Some(v)) => {
                    g.ranks[rank].waiting = None;
                    self.release(g, rank, true);
                    return Ok(v);
                }
                Err(e) => {
                    g.ranks[rank].waiting = None;
                    self.release(g, rank, false);
                    return Err(e);
                }
                Ok(None) => {}
            }
            let checked = g.epoch;
            g.ranks[rank].waiting = Some(checked);
            if self.deterministic() {
                if g.turn == rank {
                    self.advance_turn(&mut g, rank);
                }
            } else if g.all_blocked() {
                g.deadlocked = true;
                self.notify_all();
            }
            loop {
                if g.shutdown || g.deadlocked {
                    g.ranks[rank].waiting = None;
                    return Err(if g.shutdown {
                        Error::Shutdown
                    } else {
                        Error::GlobalDeadlock
                    });
                }
                if g.epoch != checked && (!self.deterministic() || g.turn == rank) {
                    break;
                }
                let (ng, ok) = self.park(g, rank, start);
                g = ng;
                if !ok {
                    g.ranks[rank].waiting = None;
                    return Err(Error::DeadlockTimeout {
                        rank,
                        op: name.to_string(),
                    });
                }
            }
        }
    }

    // ---------------------------------------------------------------- lifecycle

    /// Marks `rank` as finished. Under the deterministic scheduler this waits
    /// for the rank's turn so that termination is ordered like any other
    /// operation.
    pub fn rank_finished(&self, rank: Rank) {
        let mut g = match self.acquire(rank, "finish") {
            Ok(g) => g,
            Err(_) => self.lock(),
        };
        g.ranks[rank].alive = false;
        g.ranks[rank].waiting = None;
        if self.deterministic() {
            if g.turn == rank {
                self.advance_turn(&mut g, rank);
            }
        } else if g.all_blocked() {
            g.deadlocked = true;
        }
        self.notify_all();
    }

    /// Stops the run: every parked or future operation fails with
    /// [`Error::Shutdown`].
    pub fn shutdown(&self) {
        let mut g = self.lock();
        g.shutdown = true;
        self.notify_all();
    }

    pub(crate) fn register_communicator(&self, rank: Rank, size: usize) -> Result<()> {
        self.check_rank(rank)?;
        self.op(rank, "init", |g| {
            if size != self.size() {
                return Err(Error::SizeMismatch {
                    expected: self.size(),
                    got: size,
                });
            }
            if g.ranks[rank].comm_init {
                return Err(Error::DuplicateInit(rank));
            }
            g.ranks[rank].comm_init = true;
            g.record(
                rank,
                TraceKind::Collective,
                vec![("op", "init".into()), ("size", size.to_string())],
            );
            Ok(())
        })
    }

    // ---------------------------------------------------------------- local quantum ops

    pub fn alloc(&self, rank: Rank) -> Result<QubitHandle> {
        self.op(rank, "alloc", |g| {
            let q = g.engine.alloc_qubit(rank)?;
            g.record(rank, TraceKind::Alloc, vec![("qubit", q.id().to_string())]);
            Ok(q)
        })
    }

    /// Applies a gate; every operand must be owned by `rank`.
    pub fn apply_gate(&self, rank: Rank, gate: GateKind) -> Result<()> {
        self.op(rank, "gate", |g| {
            for q in gate.qubits() {
                g.owned(rank, q)?;
            }
            g.engine.apply_gate(gate)?;
            let qubits = gate
                .qubits()
                .iter()
                .map(|q| q.id().to_string())
                .collect::<Vec<_>>()
                .join(",");
            g.record(
                rank,
                TraceKind::Gate,
                vec![("gate", gate.name().into()), ("qubits", qubits)],
            );
            Ok(())
        })
    }

    pub fn measure(&self, rank: Rank, q: QubitHandle) -> Result<u8> {
        self.op(rank, "measure", |g| {
            g.owned(rank, q)?;
            let m = g.engine.measure(q)?;
            g.record(
                rank,
                TraceKind::Measure,
                vec![("qubit", q.id().to_string()), ("outcome", m.to_string())],
            );
            Ok(m)
        })
    }

    pub fn free(&self, rank: Rank, q: QubitHandle) -> Result<()> {
        self.op(rank, "free", |g| {
            g.owned(rank, q)?;
            g.engine.free_qubit(q)?;
            g.record(rank, TraceKind::Free, vec![("qubit", q.id().to_string())]);
            Ok(())
        })
    }

    /// Loads `α|0⟩ + β|1⟩` (normalised) into a qubit that factors out of the
    /// global state. Test and example plumbing; not a gate.
    pub fn prepare(&self, rank: Rank, q: QubitHandle, alpha: Complex64, beta: Complex64) -> Result<()> {
        self.op(rank, "prepare", |g| {
            g.owned(rank, q)?;
            g.engine.prepare_qubit(q, alpha, beta)?;
            g.record(
                rank,
                TraceKind::Gate,
                vec![
                    ("gate", "prepare".into()),
                    ("qubits", q.id().to_string()),
                    ("alpha", format!("{alpha}")),
                    ("beta", format!("{beta}")),
                ],
            );
            Ok(())
        })
    }

    /// Commit fence. The engine commits eagerly, so this only orders the trace.
    pub fn flush(&self, rank: Rank) -> Result<()> {
        self.op(rank, "flush", |g| {
            g.record(rank, TraceKind::Flush, Vec::new());
            Ok(())
        })
    }

    /// Records the start of a collective in the trace.
    /// Records that `rank` entered a collective. The k-th collective of
    /// every rank must agree in operation and root with the k-th collective
    /// of the first rank to get there; a mismatch fails with `TagMismatch`.
    pub(crate) fn mark_collective(&self, rank: Rank, op: &'static str, root: Rank) -> Result<()> {
        self.op(rank, op, |g| {
            let k = g.ranks[rank].collectives_seen;
            match g.collectives.get(k) {
                Some(&(want_op, want_root)) if (want_op, want_root) != (op, root) => {
                    return Err(Error::TagMismatch {
                        expected: format!("{want_op}(root={want_root})"),
                        found: format!("{op}(root={root})"),
                    });
                }
                Some(_) => {}
                None => g.collectives.push((op, root)),
            }
            g.ranks[rank].collectives_seen += 1;
            g.record(
                rank,
                TraceKind::Collective,
                vec![("op", op.into()), ("root", root.to_string())],
            );
            Ok(())
        })
    }

    // ---------------------------------------------------------------- entanglement services

    fn check_socket(&self, socket: &EprSocket, rank: Rank) -> Result<Rank> {
        let (a, b) = socket.endpoints();
        self.check_rank(b)?;
        let peer = socket
            .peer_of(rank)
            .ok_or(Error::NotEndpoint { rank, a, b })?;
        if !self.connected(a, b) {
            return Err(Error::NotConnected(a, b));
        }
        Ok(peer)
    }

    /// Generates one Bell pair on `socket`. The initiator's half is returned;
    /// the peer's half waits in the socket's FIFO for [`Fabric::epr_recv`].
    pub fn epr_create(&self, socket: &EprSocket, initiator: Rank) -> Result<QubitHandle> {
        let peer = self.check_socket(socket, initiator)?;
        self.op(initiator, "epr_create", |g| {
            let (mine, theirs) = g.engine.create_bell(initiator, peer)?;
            let pair = g.next_pair;
            g.next_pair += 1;
            g.epr.entry((initiator, peer)).or_default().push_back((pair, theirs));
            g.epr_counts.entry(*socket).or_default().created += 1;
            g.record(
                initiator,
                TraceKind::Epr,
                vec![
                    ("op", "create".into()),
                    ("socket", socket.to_string()),
                    ("pair", pair.to_string()),
                    ("qubits", format!("{},{}", mine.id(), theirs.id())),
                ],
            );
            Ok(mine)
        })
    }

    /// Blocks until the peer has created a pair on `socket` and returns the
    /// receiver's half. Pairs are matched in creation order.
    pub fn epr_recv(&self, socket: &EprSocket, receiver: Rank) -> Result<QubitHandle> {
        let peer = self.check_socket(socket, receiver)?;
        self.blocking(
            receiver,
            "epr_recv",
            |_| Ok(((), false)),
            |g, _| {
                let Some((pair, q)) = g.epr.get_mut(&(peer, receiver)).and_then(|d| d.pop_front())
                else {
                    return Ok(None);
                };
                g.epr_counts.entry(*socket).or_default().received += 1;
                g.record(
                    receiver,
                    TraceKind::Epr,
                    vec![
                        ("op", "recv".into()),
                        ("socket", socket.to_string()),
                        ("pair", pair.to_string()),
                        ("qubit", q.id().to_string()),
                    ],
                );
                Ok(Some(q))
            },
        )
    }

    /// Creates one GHZ state over `owners` (in that order). The initiator's
    /// share is returned; every other owner collects its share with
    /// [`Fabric::ghz_recv`].
    pub fn ghz_create(&self, owners: &[Rank], initiator: Rank) -> Result<QubitHandle> {
        for (i, &o) in owners.iter().enumerate() {
            self.check_rank(o)?;
            if owners[..i].contains(&o) {
                return Err(Error::DuplicateOwner(o));
            }
        }
        if !owners.contains(&initiator) {
            return Err(Error::NotEndpoint {
                rank: initiator,
                a: owners.first().copied().unwrap_or(initiator),
                b: owners.last().copied().unwrap_or(initiator),
            });
        }
        for &o in owners {
            if o != initiator && !self.connected(initiator, o) {
                return Err(Error::NotConnected(initiator, o));
            }
        }
        self.op(initiator, "ghz_create", |g| {
            let shares = g.engine.create_ghz(owners)?;
            let session = g.next_session;
            g.next_session += 1;
            let mut mine = None;
            for (&o, &q) in owners.iter().zip(&shares) {
                if o == initiator {
                    mine = Some(q);
                } else {
                    g.ghz.entry((initiator, o)).or_default().push_back((session, q));
                }
            }
            let ids = shares.iter().map(|q| q.id().to_string()).collect::<Vec<_>>().join(",");
            let owner_list = owners.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(",");
            g.record(
                initiator,
                TraceKind::Ghz,
                vec![
                    ("op", "create".into()),
                    ("session", session.to_string()),
                    ("owners", owner_list),
                    ("qubits", ids),
                ],
            );
            Ok(mine.expect("initiator is an owner"))
        })
    }

    pub fn ghz_recv(&self, rank: Rank, initiator: Rank) -> Result<QubitHandle> {
        self.check_rank(initiator)?;
        self.blocking(
            rank,
            "ghz_recv",
            |_| Ok(((), false)),
            |g, _| {
                let Some((session, q)) = g.ghz.get_mut(&(initiator, rank)).and_then(|d| d.pop_front())
                else {
                    return Ok(None);
                };
                g.record(
                    rank,
                    TraceKind::Ghz,
                    vec![
                        ("op", "recv".into()),
                        ("session", session.to_string()),
                        ("qubit", q.id().to_string()),
                    ],
                );
                Ok(Some(q))
            },
        )
    }

    // ---------------------------------------------------------------- classical plane

    pub fn csend(&self, from: Rank, to: Rank, msg: ClassicalMessage) -> Result<()> {
        self.check_rank(to)?;
        self.op(from, "csend", |g| {
            let payload = format!("{:?}", msg.payload);
            let tag = msg.tag.clone();
            g.channels.entry((from, to)).or_default().push_back(msg);
            g.record(
                from,
                TraceKind::Csend,
                vec![("to", to.to_string()), ("tag", tag), ("payload", payload)],
            );
            Ok(())
        })
    }

    /// Blocks until the head of the `from → at` channel exists and returns it
    /// if it carries `tag`. A different tag at the head is a protocol error.
    pub fn crecv(&self, at: Rank, from: Rank, tag: &str) -> Result<ClassicalMessage> {
        self.check_rank(from)?;
        self.blocking(
            at,
            "crecv",
            |_| Ok(((), false)),
            |g, _| {
                let Some(queue) = g.channels.get_mut(&(from, at)) else {
                    return Ok(None);
                };
                let Some(head) = queue.front() else {
                    return Ok(None);
                };
                if head.tag != tag {
                    return Err(Error::TagMismatch {
                        expected: tag.to_string(),
                        found: head.tag.clone(),
                    });
                }
                let msg = queue.pop_front().expect("head exists");
                g.record(
                    at,
                    TraceKind::Crecv,
                    vec![
                        ("from", from.to_string()),
                        ("tag", msg.tag.clone()),
                        ("payload", format!("{:?}", msg.payload)),
                    ],
                );
                Ok(Some(msg))
            },
        )
    }

    /// Returns once every rank has entered the current barrier generation.
    pub fn barrier(&self, rank: Rank) -> Result<u64> {
        self.blocking(
            rank,
            "barrier",
            |g| {
                let generation = g.barrier_generation;
                g.barrier_arrived += 1;
                if g.barrier_arrived == self.size() {
                    g.barrier_arrived = 0;
                    g.barrier_generation += 1;
                }
                g.record(
                    rank,
                    TraceKind::Barrier,
                    vec![("generation", generation.to_string())],
                );
                Ok((generation, true))
            },
            |g, generation| {
                if g.barrier_generation > *generation {
                    g.ranks[rank].barrier_seen = *generation + 1;
                    Ok(Some(*generation + 1))
                } else {
                    Ok(None)
                }
            },
        )
    }

    /// Collective snapshot: every rank contributes the handles it holds and
    /// all ranks get the joint reduced state, ordered by rank and then by the
    /// order each rank listed its handles.
    pub fn probe(&self, rank: Rank, label: &str, handles: &[QubitHandle]) -> Result<Vec<Complex64>> {
        let size = self.size();
        self.blocking(
            rank,
            "probe",
            |g| {
                let probe = g.probes.entry(label.to_string()).or_default();
                if probe.parts.is_empty() {
                    probe.parts = vec![None; size];
                }
                probe.parts[rank] = Some(handles.to_vec());
                if probe.parts.iter().all(Option::is_some) {
                    let all: Vec<QubitHandle> = probe.parts.iter().flatten().flatten().copied().collect();
                    let result = g.engine.snapshot_amplitudes(&all);
                    g.probes.get_mut(label).expect("just inserted").result = Some(result);
                }
                g.record(
                    rank,
                    TraceKind::Collective,
                    vec![("op", "probe".into()), ("label", label.to_string())],
                );
                Ok(((), true))
            },
            |g, _| Ok(g.probes.get(label).and_then(|p| p.result.clone())),
        )?
    }

    // ---------------------------------------------------------------- observers

    /// Snapshot issued from inside a rank; ordered like any other operation
    /// but not traced since it changes nothing.
    pub fn snapshot_as(&self, rank: Rank, handles: &[QubitHandle]) -> Result<Vec<Complex64>> {
        let g = self.acquire(rank, "snapshot")?;
        let out = g.engine.snapshot_amplitudes(handles);
        self.release(g, rank, false);
        out
    }

    /// Harness-side snapshot; ignores scheduling.
    pub fn snapshot(&self, handles: &[QubitHandle]) -> Result<Vec<Complex64>> {
        self.lock().engine.snapshot_amplitudes(handles)
    }

    pub fn with_engine<T>(&self, f: impl FnOnce(&QuantumState) -> T) -> T {
        f(&self.lock().engine)
    }

    pub fn live_qubits(&self) -> usize {
        self.lock().engine.live_count()
    }

    pub fn is_live(&self, q: QubitHandle) -> bool {
        self.lock().engine.is_live(q)
    }

    pub fn was_measured(&self, q: QubitHandle) -> Result<bool> {
        self.lock().engine.was_measured(q)
    }

    pub fn trace(&self) -> Vec<TraceRecord> {
        self.lock().trace.clone()
    }

    pub fn probe_result(&self, label: &str) -> Option<Result<Vec<Complex64>>> {
        self.lock().probes.get(label).and_then(|p| p.result.clone())
    }

    pub fn probe_labels(&self) -> Vec<String> {
        self.lock().probes.keys().cloned().collect()
    }

    pub fn socket_counts(&self, socket: &EprSocket) -> SocketCounts {
        self.lock().epr_counts.get(socket).copied().unwrap_or_default()
    }

    /// Halves created on `socket` still waiting for a receiver, both directions.
    pub fn socket_pending(&self, socket: &EprSocket) -> usize {
        let (a, b) = socket.endpoints();
        let g = self.lock();
        [(a, b), (b, a)]
            .iter()
            .map(|k| g.epr.get(k).map_or(0, VecDeque::len))
            .sum()
    }

    pub fn barrier_generation(&self, rank: Rank) -> u64 {
        self.lock().ranks[rank].barrier_seen
    }
}
