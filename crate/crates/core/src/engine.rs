//! Global state-vector simulator.
//!
//! All live qubits of a run share one amplitude vector. Bit position `p` of
//! an amplitude index is the qubit stored in slot `p`; slots are packed in
//! allocation order and compacted when a qubit is freed. Node ownership is
//! bookkeeping only: the engine itself never enforces locality.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::Rank;

/// Default upper bound on simultaneously live qubits.
pub const DEFAULT_QUBIT_CAP: usize = 24;

/// Tolerance used when deciding whether a qubit factors out of the state.
pub const SEPARABILITY_TOL: f64 = 1e-9;

const PHASE_EPS: f64 = 1e-10;

/// A node-owned reference to one live qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitHandle {
    id: u64,
    owner: Rank,
}

impl QubitHandle {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn owner(&self) -> Rank {
        self.owner
    }
}

impl fmt::Display for QubitHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}@{}", self.id, self.owner)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    H(QubitHandle),
    X(QubitHandle),
    Z(QubitHandle),
    Cnot {
        control: QubitHandle,
        target: QubitHandle,
    },
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::H(_) => "h",
            GateKind::X(_) => "x",
            GateKind::Z(_) => "z",
            GateKind::Cnot { .. } => "cnot",
        }
    }

    pub fn qubits(&self) -> Vec<QubitHandle> {
        match *self {
            GateKind::H(q) | GateKind::X(q) | GateKind::Z(q) => vec![q],
            GateKind::Cnot { control, target } => vec![control, target],
        }
    }
}

#[derive(Debug, Clone)]
struct Slot {
    pos: usize,
    owner: Rank,
    measured: bool,
}

/// The amplitude vector and its bookkeeping.
#[derive(Debug, Clone)]
pub struct QuantumState {
    amps: Vec<Complex64>,
    // slot position -> qubit id
    order: Vec<u64>,
    slots: BTreeMap<u64, Slot>,
    next_id: u64,
    cap: usize,
    rng: ChaCha8Rng,
    rng_cursor: u64,
}

impl QuantumState {
    pub fn new(cap: usize, seed: u64) -> Self {
        QuantumState {
            amps: vec![Complex64::new(1.0, 0.0)],
            order: Vec::new(),
            slots: BTreeMap::new(),
            next_id: 0,
            cap,
            rng: ChaCha8Rng::seed_from_u64(seed),
            rng_cursor: 0,
        }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn live_count(&self) -> usize {
        self.order.len()
    }

    /// Number of random draws consumed so far.
    pub fn rng_cursor(&self) -> u64 {
        self.rng_cursor
    }

    /// Raw amplitudes in slot order (slot 0 is the least significant bit).
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Live handles in slot order.
    pub fn handles(&self) -> Vec<QubitHandle> {
        self.order
            .iter()
            .map(|id| QubitHandle {
                id: *id,
                owner: self.slots[id].owner,
            })
            .collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_live(&self, q: QubitHandle) -> bool {
        self.slots.get(&q.id).is_some_and(|s| s.owner == q.owner)
    }

    /// Whether `q` has been measured since allocation.
    pub fn was_measured(&self, q: QubitHandle) -> Result<bool> {
        Ok(self.slot(q)?.measured)
    }

    fn slot(&self, q: QubitHandle) -> Result<&Slot> {
        match self.slots.get(&q.id) {
            Some(s) if s.owner == q.owner => Ok(s),
            _ => Err(Error::DeadHandle(q.id)),
        }
    }

    fn pos(&self, q: QubitHandle) -> Result<usize> {
        self.slot(q).map(|s| s.pos)
    }

    fn ensure_capacity(&self, extra: usize) -> Result<()> {
        if self.order.len() + extra > self.cap {
            return Err(Error::CapacityExceeded { cap: self.cap });
        }
        Ok(())
    }

    /// Allocates a fresh qubit in |0⟩ as the new most significant slot.
    pub fn alloc_qubit(&mut self, owner: Rank) -> Result<QubitHandle> {
        self.ensure_capacity(1)?;
        let id = self.next_id;
        self.next_id += 1;
        let pos = self.order.len();
        self.amps.resize(self.amps.len() * 2, Complex64::new(0.0, 0.0));
        self.order.push(id);
        self.slots.insert(
            id,
            Slot {
                pos,
                owner,
                measured: false,
            },
        );
        Ok(QubitHandle { id, owner })
    }

    pub fn apply_gate(&mut self, gate: GateKind) -> Result<()> {
        match gate {
            GateKind::H(q) => {
                let bit = 1usize << self.pos(q)?;
                let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
                for i in 0..self.amps.len() {
                    if i & bit == 0 {
                        let (a, b) = (self.amps[i], self.amps[i | bit]);
                        self.amps[i] = (a + b) * s;
                        self.amps[i | bit] = (a - b) * s;
                    }
                }
            }
            GateKind::X(q) => {
                let bit = 1usize << self.pos(q)?;
                for i in 0..self.amps.len() {
                    if i & bit == 0 {
                        self.amps.swap(i, i | bit);
                    }
                }
            }
            GateKind::Z(q) => {
                let bit = 1usize << self.pos(q)?;
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & bit != 0 {
                        *a = -*a;
                    }
                }
            }
            GateKind::Cnot { control, target } => {
                let c = 1usize << self.pos(control)?;
                let t = 1usize << self.pos(target)?;
                if control.id == target.id {
                    return Err(Error::SameQubitCnot(control.id));
                }
                for i in 0..self.amps.len() {
                    if i & c != 0 && i & t == 0 {
                        self.amps.swap(i, i | t);
                    }
                }
            }
        }
        Ok(())
    }

    /// Born-rule measurement in the computational basis. The handle stays
    /// live in the collapsed state.
    pub fn measure(&mut self, q: QubitHandle) -> Result<u8> {
        let bit = 1usize << self.pos(q)?;
        let p1: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let draw: f64 = self.rng.random();
        self.rng_cursor += 1;
        let outcome = u8::from(draw < p1);
        let keep = if outcome == 1 { bit } else { 0 };
        let mut norm = 0.0;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & bit != keep {
                *a = Complex64::new(0.0, 0.0);
            } else {
                norm += a.norm_sqr();
            }
        }
        let scale = 1.0 / norm.sqrt();
        for a in &mut self.amps {
            *a *= scale;
        }
        if let Some(s) = self.slots.get_mut(&q.id) {
            s.measured = true;
        }
        Ok(outcome)
    }

    /// Removes a qubit that factors out of the state.
    pub fn free_qubit(&mut self, q: QubitHandle) -> Result<()> {
        let pos = self.pos(q)?;
        let (_, rest) = self
            .factor(&[pos])
            .ok_or(Error::StillEntangled(q.id))?;
        self.amps = rest;
        self.slots.remove(&q.id);
        self.order.remove(pos);
        for (p, id) in self.order.iter().enumerate() {
            if let Some(s) = self.slots.get_mut(id) {
                s.pos = p;
            }
        }
        Ok(())
    }

    /// Overwrites a qubit that factors out of the state with `α|0⟩ + β|1⟩`.
    pub fn prepare_qubit(&mut self, q: QubitHandle, alpha: Complex64, beta: Complex64) -> Result<()> {
        let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::InvalidAmplitudes);
        }
        let pos = self.pos(q)?;
        let (_, rest) = self
            .factor(&[pos])
            .ok_or(Error::StillEntangled(q.id))?;
        let (alpha, beta) = (alpha / norm, beta / norm);
        let bit = 1usize << pos;
        let low = bit - 1;
        for i in 0..self.amps.len() {
            let r = (i & low) | ((i >> 1) & !low);
            self.amps[i] = rest[r] * if i & bit == 0 { alpha } else { beta };
        }
        if let Some(s) = self.slots.get_mut(&q.id) {
            s.measured = false;
        }
        Ok(())
    }

    pub fn create_bell(&mut self, owner_a: Rank, owner_b: Rank) -> Result<(QubitHandle, QubitHandle)> {
        let shares = self.create_ghz(&[owner_a, owner_b])?;
        Ok((shares[0], shares[1]))
    }

    pub fn create_ghz(&mut self, owners: &[Rank]) -> Result<Vec<QubitHandle>> {
        if owners.len() < 2 {
            return Err(Error::TooFewOwners(owners.len()));
        }
        self.ensure_capacity(owners.len())?;
        let shares = owners
            .iter()
            .map(|&o| self.alloc_qubit(o))
            .collect::<Result<Vec<_>>>()?;
        self.apply_gate(GateKind::H(shares[0]))?;
        for &t in &shares[1..] {
            self.apply_gate(GateKind::Cnot {
                control: shares[0],
                target: t,
            })?;
        }
        Ok(shares)
    }

    /// Reduced pure state of `handles`, listed most significant first, with
    /// the first non-negligible amplitude rotated to the positive real axis.
    pub fn snapshot_amplitudes(&self, handles: &[QubitHandle]) -> Result<Vec<Complex64>> {
        let mut positions = Vec::with_capacity(handles.len());
        for (i, h) in handles.iter().enumerate() {
            if handles[..i].iter().any(|o| o.id == h.id) {
                return Err(Error::DuplicateOwner(h.owner));
            }
            positions.push(self.pos(*h)?);
        }
        let (mut local, _) = self.factor(&positions).ok_or(Error::NotSeparable)?;
        canonicalize_phase(&mut local);
        Ok(local)
    }

    /// Splits the state into `local ⊗ rest` where `local` covers `positions`
    /// (first entry = most significant bit of the local index). Returns `None`
    /// when the subset is entangled with the remainder.
    fn factor(&self, positions: &[usize]) -> Option<(Vec<Complex64>, Vec<Complex64>)> {
        let k = self.order.len();
        let n_local = positions.len();
        let rest_pos: Vec<usize> = (0..k).filter(|p| !positions.contains(p)).collect();
        let local_dim = 1usize << n_local;
        let rest_dim = 1usize << rest_pos.len();

        // matrix[local][rest]
        let mut matrix = vec![Complex64::new(0.0, 0.0); local_dim * rest_dim];
        for (i, a) in self.amps.iter().enumerate() {
            let mut l = 0usize;
            for &p in positions {
                l = (l << 1) | ((i >> p) & 1);
            }
            let mut r = 0usize;
            for (j, &p) in rest_pos.iter().enumerate() {
                r |= ((i >> p) & 1) << j;
            }
            matrix[l * rest_dim + r] = *a;
        }

        let column_norm = |r: usize| -> f64 {
            (0..local_dim)
                .map(|l| matrix[l * rest_dim + r].norm_sqr())
                .sum()
        };
        let best = (0..rest_dim).max_by(|a, b| column_norm(*a).total_cmp(&column_norm(*b)))?;
        let best_norm = column_norm(best).sqrt();
        if best_norm == 0.0 {
            return None;
        }
        let local: Vec<Complex64> = (0..local_dim)
            .map(|l| matrix[l * rest_dim + best] / best_norm)
            .collect();
        let rest: Vec<Complex64> = (0..rest_dim)
            .map(|r| {
                (0..local_dim)
                    .map(|l| local[l].conj() * matrix[l * rest_dim + r])
                    .sum()
            })
            .collect();
        let captured: f64 = rest.iter().map(|a| a.norm_sqr()).sum();
        let total = self.norm_sqr();
        if total - captured > SEPARABILITY_TOL * total {
            return None;
        }
        let scale = 1.0 / captured.sqrt();
        Some((local, rest.into_iter().map(|a| a * scale).collect()))
    }
}

/// Rotates the vector so its first non-negligible entry is real and positive.
pub fn canonicalize_phase(v: &mut [Complex64]) {
    if let Some(first) = v.iter().find(|a| a.norm() > PHASE_EPS).copied() {
        let phase = first.conj() / first.norm();
        for a in v.iter_mut() {
            *a *= phase;
        }
    }
}

/// |⟨a|b⟩|² for two equal-length state vectors.
pub fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>()
        .norm_sqr()
}
