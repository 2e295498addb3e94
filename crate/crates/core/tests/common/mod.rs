//! Test-only reference simulator, written independently of the engine:
//! qubit 0 is the most significant bit and every gate is applied as an
//! explicit 2x2 matrix.

#![allow(dead_code)]

use std::time::Duration;

use qmpi_core::{Complex64, FabricConfig, SchedulerMode, TopologyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub struct Dense {
    n: usize,
    pub amps: Vec<Complex64>,
}

type Mat = [[Complex64; 2]; 2];

pub fn h_mat() -> Mat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]]
}

pub fn x_mat() -> Mat {
    [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]
}

pub fn z_mat() -> Mat {
    [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]
}

impl Dense {
    pub fn new(n: usize) -> Self {
        let mut amps = vec![c(0.0, 0.0); 1 << n];
        amps[0] = c(1.0, 0.0);
        Dense { n, amps }
    }

    fn bit(&self, idx: usize, q: usize) -> usize {
        (idx >> (self.n - 1 - q)) & 1
    }

    pub fn apply(&mut self, q: usize, m: Mat) {
        let mut out = vec![c(0.0, 0.0); self.amps.len()];
        for (idx, a) in self.amps.iter().enumerate() {
            let b = self.bit(idx, q);
            let flipped = idx ^ (1 << (self.n - 1 - q));
            let (i0, i1) = if b == 0 { (idx, flipped) } else { (flipped, idx) };
            out[i0] += m[0][b] * a;
            out[i1] += m[1][b] * a;
        }
        self.amps = out;
    }

    pub fn cnot(&mut self, ctrl: usize, tgt: usize) {
        let mut out = vec![c(0.0, 0.0); self.amps.len()];
        for (idx, a) in self.amps.iter().enumerate() {
            let dest = if self.bit(idx, ctrl) == 1 {
                idx ^ (1 << (self.n - 1 - tgt))
            } else {
                idx
            };
            out[dest] += a;
        }
        self.amps = out;
    }

    /// Sets qubit `q` (currently |0⟩) to `α|0⟩ + β|1⟩`.
    pub fn prepare(&mut self, q: usize, alpha: Complex64, beta: Complex64) {
        let mut out = vec![c(0.0, 0.0); self.amps.len()];
        for (idx, a) in self.amps.iter().enumerate() {
            if self.bit(idx, q) == 0 {
                out[idx] += alpha * a;
                out[idx | (1 << (self.n - 1 - q))] += beta * a;
            }
        }
        self.amps = out;
    }

    /// Postselects qubit `q` on `outcome`; returns the branch probability.
    pub fn project(&mut self, q: usize, outcome: usize) -> f64 {
        let mut p = 0.0;
        for idx in 0..self.amps.len() {
            if self.bit(idx, q) != outcome {
                self.amps[idx] = c(0.0, 0.0);
            } else {
                p += self.amps[idx].norm_sqr();
            }
        }
        if p > 0.0 {
            let s = 1.0 / p.sqrt();
            for a in &mut self.amps {
                *a *= s;
            }
        }
        p
    }

    /// State of `keep` (in listed order) once every other qubit has been
    /// projected onto a basis state.
    pub fn reduced(&self, keep: &[usize]) -> Vec<Complex64> {
        let mut out = vec![c(0.0, 0.0); 1 << keep.len()];
        for (idx, a) in self.amps.iter().enumerate() {
            if a.norm() < 1e-14 {
                continue;
            }
            let mut k = 0;
            for &q in keep {
                k = (k << 1) | self.bit(idx, q);
            }
            out[k] += a;
        }
        canonical(out)
    }
}

pub fn canonical(mut v: Vec<Complex64>) -> Vec<Complex64> {
    if let Some(first) = v.iter().find(|a| a.norm() > 1e-10).copied() {
        let ph = first.conj() / first.norm();
        for a in &mut v {
            *a *= ph;
        }
    }
    v
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn overlap(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm_sqr()
}

/// Uniformly random single-qubit state (normalised complex Gaussian pair).
pub fn random_state(rng: &mut ChaCha8Rng) -> (Complex64, Complex64) {
    let mut g = || {
        // Box-Muller
        let u1: f64 = rng.random::<f64>().max(1e-300);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let (a, b) = (c(g(), g()), c(g(), g()));
    let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
    (a / n, b / n)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// GHZ vector over `n` qubits: 1/√2 at index 0 and 2^n−1.
pub fn ghz_vector(n: usize) -> Vec<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![c(0.0, 0.0); 1 << n];
    v[0] = c(s, 0.0);
    v[(1 << n) - 1] = c(s, 0.0);
    v
}

pub fn deterministic(size: usize, seed: u64) -> FabricConfig {
    FabricConfig::new(TopologyConfig::mesh(size, seed), SchedulerMode::RoundRobinDeterministic)
        .with_timeout(Duration::from_secs(5))
}

pub fn concurrent(size: usize, seed: u64) -> FabricConfig {
    FabricConfig::new(TopologyConfig::mesh(size, seed), SchedulerMode::Concurrent)
        .with_timeout(Duration::from_secs(5))
}

/// Oracle for teleporting `α|0⟩+β|1⟩` with measurement branch (m1, m2):
/// receiver state after X^m2 then Z^m1, plus the branch probability.
pub fn teleport_oracle(alpha: Complex64, beta: Complex64, m1: usize, m2: usize) -> (Vec<Complex64>, f64) {
    let mut d = Dense::new(3); // payload, sender half, receiver half
    d.prepare(0, alpha, beta);
    d.apply(1, h_mat());
    d.cnot(1, 2);
    d.cnot(0, 1);
    d.apply(0, h_mat());
    let p1 = d.project(0, m1);
    let p2 = d.project(1, m2);
    if m2 == 1 {
        d.apply(2, x_mat());
    }
    if m1 == 1 {
        d.apply(2, z_mat());
    }
    (d.reduced(&[2]), p1 * p2)
}

/// Oracle for expose over `n` ranks on measurement branch `m`: state of
/// (data, shares of ranks 1..n) and the branch probability.
pub fn expose_oracle(alpha: Complex64, beta: Complex64, n: usize, m: usize) -> (Vec<Complex64>, f64) {
    // qubit 0 = data, qubits 1..=n = GHZ shares of ranks 0..n
    let mut d = Dense::new(n + 1);
    d.prepare(0, alpha, beta);
    d.apply(1, h_mat());
    for t in 2..=n {
        d.cnot(1, t);
    }
    d.cnot(0, 1);
    let p = d.project(1, m);
    if m == 1 {
        for t in 2..=n {
            d.apply(t, x_mat());
        }
    }
    let keep: Vec<usize> = std::iter::once(0).chain(2..=n).collect();
    (d.reduced(&keep), p)
}
