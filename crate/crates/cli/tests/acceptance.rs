//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use clap::Parser;
use common::*;
use qmpi_cli::{run_shots, Args};
use qmpi_core::nqasm::{disassemble, execute, parse};
use qmpi_core::{
    launch, run_spmd, Complex64, GateKind, LaunchSpec, QuantumState, QubitHandle, Registry,
    TraceKind,
};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

const GHZ_SHOTS: u64 = 10_000;
const FREQ_TOL: f64 = 0.015;
const AMP_TOL: f64 = 1e-9;
const FIDELITY_TOL: f64 = 1e-9;
const NORM_TOL: f64 = 1e-12;
const GHZ_BUDGET: Duration = Duration::from_secs(60);
// GHZ needs up to 2N-1 live qubits; beyond this the default 24-qubit cap is hit
const MAX_SWEEP_RANKS: usize = 12;

fn criterion_1() -> Outcome {
    let mut notes = Vec::new();
    for n in [2usize, 3, 5, 8] {
        let args = Args::parse_from([
            "qmpi".to_string(),
            "-n".into(),
            n.to_string(),
            "--program".into(),
            "ghz".into(),
            "--shots".into(),
            GHZ_SHOTS.to_string(),
            "--seed".into(),
            "7".into(),
        ]);
        let start = Instant::now();
        let (first, summary) = run_shots(&args).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        let summary = summary.ok_or("no bits reported")?;
        ensure!(summary.shots == GHZ_SHOTS, "n={n}: {} shots", summary.shots);
        let zeros = "0".repeat(n);
        let ones = "1".repeat(n);
        for bits in summary.counts.keys() {
            ensure!(*bits == zeros || *bits == ones, "n={n}: outcome {bits}");
        }
        let (f0, f1) = (summary.fraction(&zeros), summary.fraction(&ones));
        ensure!((f0 - 0.5).abs() <= FREQ_TOL, "n={n}: P(0..0)={f0}");
        ensure!((f1 - 0.5).abs() <= FREQ_TOL, "n={n}: P(1..1)={f1}");
        let probe = first.probes.get("ghz").ok_or("no ghz snapshot")?;
        let diff = max_diff(probe, &ghz_vector(n));
        ensure!(diff <= AMP_TOL, "n={n}: snapshot off by {diff:e}");
        ensure!(elapsed < GHZ_BUDGET, "n={n}: took {elapsed:?}");
        notes.push(format!("N={n} {f0:.4}/{f1:.4} {:.1}s", elapsed.as_secs_f64()));
    }
    Ok(notes.join(", "))
}

/// Integer literals of a Rust source file, comments excluded.
fn int_literals(src: &str) -> BTreeSet<String> {
    let code: String = src
        .lines()
        .map(|l| l.split("//").next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join("\n");
    let mut out = BTreeSet::new();
    let bytes = code.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let prev_ident = i > 0 && (bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'_');
        if b.is_ascii_digit() && !prev_ident {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.insert(code[start..i].to_string());
        } else {
            i += 1;
        }
    }
    out
}

fn criterion_2() -> Outcome {
    let src = include_str!("../../core/src/programs/ghz.rs");
    let literals = int_literals(src);
    let allowed: BTreeSet<String> = ["0", "2"].iter().map(|s| s.to_string()).collect();
    ensure!(literals.is_subset(&allowed), "size-dependent literals {literals:?}");
    ensure!(!src.contains("size() =="), "branches on a specific size");
    // one registered entry point serves every size; only -n changes
    let reg = Registry::with_builtins();
    let entry = reg.get("ghz").map_err(|e| e.to_string())?;
    for n in 2..=MAX_SWEEP_RANKS {
        ensure!(std::sync::Arc::ptr_eq(&entry, &reg.get("ghz").unwrap()), "registry changed");
        let args = Args::parse_from(["qmpi", "-n", &n.to_string(), "--program", "ghz", "--seed", "1"]);
        let (report, _) = run_shots(&args).map_err(|e| format!("n={n}: {e}"))?;
        ensure!(report.bits.len() == n, "n={n}: {} ranks reported", report.bits.len());
    }
    let lines = src.lines().filter(|l| !l.trim().is_empty()).count();
    Ok(format!("literals {literals:?}, {lines} non-blank lines for N=2..{MAX_SWEEP_RANKS}"))
}

fn teleport_snapshot(alpha: Complex64, beta: Complex64, seed: u64) -> Result<(Vec<Complex64>, (u8, u8)), String> {
    let run = run_spmd(deterministic(2, seed), |ctx| {
        let comm = ctx.comm();
        if ctx.rank() == 0 {
            let q = comm.alloc()?;
            comm.prepare(q, alpha, beta)?;
            let corr = comm.qsend(q, 1)?;
            Ok((Vec::new(), (corr.m1, corr.m2)))
        } else {
            let q = comm.qrecv(0)?;
            let snap = comm.snapshot(&[q])?;
            comm.measure(q)?;
            comm.free(q)?;
            Ok((snap, (0, 0)))
        }
    })
    .map_err(|e| e.to_string())?;
    Ok((run.results[1].0.clone(), run.results[0].1))
}

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let mut branches = BTreeSet::new();
    let mut worst: f64 = 1.0;
    for i in 0..100 {
        let (alpha, beta) = random_state(&mut r);
        let (snap, branch) = teleport_snapshot(alpha, beta, i)?;
        let f = overlap(&snap, &[alpha, beta]);
        ensure!(f >= 1.0 - FIDELITY_TOL, "state {i}: fidelity {f}");
        worst = worst.min(f);
        branches.insert(branch);
    }
    ensure!(branches.len() == 4, "branches seen: {branches:?}");

    // entangled halves: one side of a Bell pair, one share of a GHZ state
    for seed in 0..16 {
        let run = run_spmd(deterministic(3, seed), |ctx| {
            let comm = ctx.comm();
            let held = match ctx.rank() {
                0 => {
                    let a = comm.alloc()?;
                    let b = comm.alloc()?;
                    comm.h(a)?;
                    comm.cnot(a, b)?;
                    comm.qsend_entangled_half(b, 1)?;
                    let g = comm.fabric().ghz_create(&[0, 1, 2], 0)?;
                    vec![a, g]
                }
                1 => {
                    let b = comm.qrecv(0)?;
                    let g = comm.fabric().ghz_recv(1, 0)?;
                    vec![b, g, comm.qrecv(2)?]
                }
                _ => {
                    let g = comm.fabric().ghz_recv(2, 0)?;
                    comm.qsend_entangled_half(g, 1)?;
                    vec![]
                }
            };
            comm.barrier()?;
            Ok(held)
        })
        .map_err(|e| e.to_string())?;
        let bell = run.fabric.snapshot(&[run.results[0][0], run.results[1][0]]).map_err(|e| e.to_string())?;
        ensure!(max_diff(&bell, &ghz_vector(2)) <= AMP_TOL, "seed {seed}: Bell pair broken");
        let ghz = run
            .fabric
            .snapshot(&[run.results[0][1], run.results[1][1], run.results[1][2]])
            .map_err(|e| e.to_string())?;
        ensure!(max_diff(&ghz, &ghz_vector(3)) <= AMP_TOL, "seed {seed}: GHZ broken");
    }
    Ok(format!("min fidelity {worst:.12}, branches {branches:?}"))
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let mut checked = 0;
    for n in 2..=5usize {
        let mut branches = BTreeSet::new();
        let mut parities = BTreeSet::new();
        for trial in 0..50u64 {
            let (alpha, beta) = random_state(&mut r);
            let run = run_spmd(deterministic(n, trial), |ctx| {
                let comm = ctx.comm_mut();
                let mut data = Vec::new();
                if comm.rank() == 0 {
                    let q = comm.alloc()?;
                    comm.prepare(q, alpha, beta)?;
                    data.push(q);
                }
                let exposed = comm.expose(&data, 0)?;
                let snap = comm.probe("exposed", &[exposed.local_share()])?;
                comm.unexpose(&exposed, 0)?;
                let restored = if comm.rank() == 0 { comm.snapshot(&data)? } else { Vec::new() };
                Ok((snap, restored))
            })
            .map_err(|e| e.to_string())?;
            let trace = run.fabric.trace();
            let bit = |tag: &str, rank| {
                trace
                    .iter()
                    .filter(|t| t.rank == rank && t.detail("tag") == Some(tag))
                    .map(|t| u8::from(t.detail("payload") == Some("[1]")))
                    .collect::<Vec<_>>()
            };
            let m = bit("expose-corr", 0)[0] as usize;
            let parity = trace
                .iter()
                .filter(|t| t.kind == TraceKind::Crecv && t.detail("tag") == Some("unexpose-corr"))
                .filter(|t| t.detail("payload") == Some("[1]"))
                .count()
                % 2;
            let (snap, restored) = &run.results[0];
            let (want, _) = expose_oracle(alpha, beta, n, m);
            ensure!(max_diff(snap, &want) <= AMP_TOL, "n={n} trial={trial}: oracle mismatch on branch {m}");
            let mut eq2 = vec![c(0.0, 0.0); 1 << n];
            eq2[0] = alpha;
            eq2[(1 << n) - 1] = beta;
            ensure!(max_diff(snap, &canonical(eq2)) <= AMP_TOL, "n={n} trial={trial}: not a|0..0>+b|1..1>");
            let f = overlap(restored, &[alpha, beta]);
            ensure!(f >= 1.0 - FIDELITY_TOL, "n={n} trial={trial}: restored fidelity {f}");
            branches.insert(m);
            parities.insert(parity);
            checked += 1;
        }
        ensure!(branches.len() == 2, "n={n}: expose branches {branches:?}");
        ensure!(parities.len() == 2, "n={n}: unexpose parities {parities:?}");
    }
    Ok(format!("{checked} exposures, both branches and parities per N"))
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    for n in [2usize, 3, 5] {
        for trial in 0..20 {
            let inputs: Vec<_> = (0..n).map(|_| random_state(&mut r)).collect();
            let run = run_spmd(deterministic(n, trial), |ctx| {
                let comm = ctx.comm();
                let mut qs = Vec::new();
                if ctx.rank() == 0 {
                    for &(a, b) in &inputs {
                        let q = comm.alloc()?;
                        comm.prepare(q, a, b)?;
                        qs.push(q);
                    }
                }
                let local = comm.qscatter(&qs, 0)?;
                let back = comm.qgather(local[0], 0)?;
                let snaps = back.iter().map(|&q| comm.snapshot(&[q])).collect::<Result<Vec<_>, _>>()?;
                for q in back {
                    comm.measure(q)?;
                    comm.free(q)?;
                }
                Ok(snaps)
            })
            .map_err(|e| e.to_string())?;
            for (i, &(a, b)) in inputs.iter().enumerate() {
                let d = max_diff(&run.results[0][i], &canonical(vec![a, b]));
                ensure!(d <= AMP_TOL, "n={n} trial={trial} element {i}: off by {d:e}");
            }
            ensure!(run.fabric.live_qubits() == 0, "n={n}: {} qubits leaked", run.fabric.live_qubits());
        }
    }
    Ok("N=2,3,5 x 20 trials, 0 leaked".into())
}

fn criterion_6() -> Outcome {
    // normalization over a long random run
    let mut r = rng(6);
    let mut e = QuantumState::new(24, 6);
    let mut live: Vec<QubitHandle> = Vec::new();
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let roll = r.random_range(0..100);
        if live.len() < 2 || (roll < 5 && live.len() < 8) {
            live.push(e.alloc_qubit(0).unwrap());
        } else if roll < 10 {
            let q = live.swap_remove(r.random_range(0..live.len()));
            e.measure(q).unwrap();
            e.free_qubit(q).unwrap();
        } else if roll < 15 {
            e.measure(live[r.random_range(0..live.len())]).unwrap();
        } else if roll < 40 {
            let a = r.random_range(0..live.len());
            let b = (a + 1 + r.random_range(0..live.len() - 1)) % live.len();
            e.apply_gate(GateKind::Cnot { control: live[a], target: live[b] }).unwrap();
        } else {
            let q = live[r.random_range(0..live.len())];
            let g = [GateKind::H(q), GateKind::X(q), GateKind::Z(q)][roll % 3];
            e.apply_gate(g).unwrap();
        }
        worst = worst.max((e.norm_sqr() - 1.0).abs());
    }
    ensure!(worst <= NORM_TOL, "normalization drift {worst:e}");

    // self-inverse round trips on random entangled states
    for trial in 0..100 {
        let mut e = QuantumState::new(24, trial);
        let qs: Vec<_> = (0..3).map(|_| e.alloc_qubit(0).unwrap()).collect();
        for &q in &qs {
            let (a, b) = random_state(&mut r);
            e.prepare_qubit(q, a, b).unwrap();
        }
        e.apply_gate(GateKind::Cnot { control: qs[0], target: qs[1] }).unwrap();
        let before = e.amplitudes().to_vec();
        for g in [
            GateKind::H(qs[0]),
            GateKind::X(qs[1]),
            GateKind::Z(qs[2]),
            GateKind::Cnot { control: qs[2], target: qs[0] },
        ] {
            e.apply_gate(g).unwrap();
            e.apply_gate(g).unwrap();
            let d = max_diff(e.amplitudes(), &before);
            ensure!(d <= NORM_TOL, "trial {trial}: {} twice is off by {d:e}", g.name());
        }
    }

    // Born statistics
    let shots = 10_000;
    for seed in 0..5 {
        let (a, b) = random_state(&mut r);
        let mut e = QuantumState::new(24, seed);
        let mut ones = 0;
        for _ in 0..shots {
            let q = e.alloc_qubit(0).unwrap();
            e.prepare_qubit(q, a, b).unwrap();
            ones += u32::from(e.measure(q).unwrap());
            e.free_qubit(q).unwrap();
        }
        let p = b.norm_sqr();
        let sigma = (f64::from(shots) * p * (1.0 - p)).sqrt();
        let dev = (f64::from(ones) - f64::from(shots) * p).abs();
        ensure!(dev <= 3.0 * sigma, "p={p:.4}: {ones} ones, {:.2} sigma", dev / sigma);
    }

    // seeded determinism: whole launches, byte for byte
    let reg = Registry::with_builtins();
    let spec = LaunchSpec::new("ghz", 4).seed(99);
    let a = launch(&reg, &spec).map_err(|e| e.to_string())?;
    let b = launch(&reg, &spec).map_err(|e| e.to_string())?;
    ensure!(a.trace_text() == b.trace_text(), "traces differ");
    ensure!(a.bits == b.bits, "bits differ");
    Ok(format!("max drift {worst:e}"))
}

fn asm_receiver(alice: &str, bob: &str, seed: u64) -> Result<(Vec<Complex64>, (i64, i64)), String> {
    let alice = parse(alice).map_err(|e| e.to_string())?;
    let bob = parse(bob).map_err(|e| e.to_string())?;
    let run = run_spmd(deterministic(2, seed), |ctx| {
        let program = if ctx.rank() == 0 { &alice } else { &bob };
        let vm = execute(program, ctx.comm(), 1 - ctx.rank())?;
        let snap = match vm.qubit(0) {
            Some(q) if ctx.rank() == 1 => ctx.comm().snapshot(&[q])?,
            _ => Vec::new(),
        };
        Ok((snap, (vm.register(3), vm.register(2))))
    })
    .map_err(|e| e.to_string())?;
    Ok((run.results[1].0.clone(), run.results[0].1))
}

fn criterion_7() -> Outcome {
    const BOB: &str = include_str!("../../core/asm/teleport_bob.nqasm");
    let senders = [
        (c(1.0, 0.0), c(0.0, 0.0), include_str!("../../core/asm/teleport_alice_zero.nqasm")),
        (c(0.0, 0.0), c(1.0, 0.0), include_str!("../../core/asm/teleport_alice_one.nqasm")),
    ];
    for (alpha, beta, alice) in senders {
        let mut branches = BTreeSet::new();
        for seed in 0..64 {
            let (asm, branch) = asm_receiver(alice, BOB, seed)?;
            let (high, _) = teleport_snapshot(alpha, beta, seed)?;
            let d = max_diff(&asm, &high);
            ensure!(d <= 1e-12, "payload ({alpha},{beta}) branch {branch:?}: off by {d:e}");
            branches.insert(branch);
        }
        ensure!(branches.len() == 4, "branches seen: {branches:?}");
    }
    let corpus = [
        include_str!("../../core/asm/alice_epr_cnot.nqasm"),
        include_str!("../../core/asm/teleport_alice_zero.nqasm"),
        include_str!("../../core/asm/teleport_alice_one.nqasm"),
        BOB,
        include_str!("../../core/asm/measure_zero.nqasm"),
        include_str!("../../core/asm/idle.nqasm"),
    ];
    for text in corpus {
        let p = parse(text).map_err(|e| e.to_string())?;
        let again = parse(&disassemble(&p)).map_err(|e| e.to_string())?;
        ensure!(p.instructions() == again.instructions(), "round trip changed a program");
    }
    Ok(format!("|0>,|1> x 4 branches; {} corpus files round-trip", corpus.len()))
}

fn criterion_8() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_qmpi"))
        .args(["-n", "3", "--program", "hello"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.code() == Some(0), "exit status {:?}", out.status.code());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<_> = stdout.lines().collect();
    ensure!(lines.len() == 3, "{} lines", lines.len());
    let mut ranks = BTreeSet::new();
    for line in &lines {
        let r = (0..3)
            .find(|r| line.ends_with(&format!("Hello, rank={r} of 3 processes")))
            .ok_or_else(|| format!("unexpected line {line:?}"))?;
        ranks.insert(r);
    }
    ensure!(ranks.len() == 3, "ranks {ranks:?}");
    Ok(lines.join(" | "))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("GHZ benchmark statistics and snapshot", criterion_1),
        ("SPMD source constancy", criterion_2),
        ("teleportation fidelity", criterion_3),
        ("expose realises the distributed state", criterion_4),
        ("scatter/gather identity", criterion_5),
        ("engine properties", criterion_6),
        ("assembly cross-stack equivalence", criterion_7),
        ("launcher transcript", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {p:?}")));
        match result {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({why})", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
