//! Topology configuration and its plain-text file format.
//!
//! ```text
//! # comments start with '#'
//! size = 3
//! connectivity = pairs:(0,1),(1,2)
//! qubit_cap = 24
//! seed = 42
//! ```
//!
//! `connectivity` is either `mesh` or `pairs:` followed by a comma separated
//! list of `(a,b)` edges. Unknown keys are rejected.

use std::collections::BTreeSet;
use std::path::Path;

use crate::engine::DEFAULT_QUBIT_CAP;
use crate::error::{Error, Result};
use crate::Rank;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Connectivity {
    FullMesh,
    /// Undirected edges stored as `(min, max)`.
    Pairs(BTreeSet<(Rank, Rank)>),
}

impl Connectivity {
    pub fn pairs(edges: impl IntoIterator<Item = (Rank, Rank)>) -> Self {
        Connectivity::Pairs(
            edges
                .into_iter()
                .map(|(a, b)| (a.min(b), a.max(b)))
                .collect(),
        )
    }

    pub fn connected(&self, a: Rank, b: Rank) -> bool {
        match self {
            Connectivity::FullMesh => a != b,
            Connectivity::Pairs(edges) => a != b && edges.contains(&(a.min(b), a.max(b))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyConfig {
    pub size: usize,
    pub connectivity: Connectivity,
    pub qubit_cap: usize,
    pub seed: u64,
}

impl TopologyConfig {
    pub fn mesh(size: usize, seed: u64) -> Self {
        TopologyConfig {
            size,
            connectivity: Connectivity::FullMesh,
            qubit_cap: DEFAULT_QUBIT_CAP,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Config {
                line: 0,
                message: "size must be at least 1".into(),
            });
        }
        if let Connectivity::Pairs(edges) = &self.connectivity {
            for &(a, b) in edges {
                if a == b || b >= self.size {
                    return Err(Error::Config {
                        line: 0,
                        message: format!("invalid edge ({a},{b}) for size {}", self.size),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Values read from a config file; absent keys fall back to launch defaults.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    pub size: Option<usize>,
    pub connectivity: Option<Connectivity>,
    pub qubit_cap: Option<usize>,
    pub seed: Option<u64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ConfigFile::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let int = |v: &str| -> Result<u64> {
                v.parse::<u64>()
                    .map_err(|_| err(format!("{key}: not a non-negative integer: {v:?}")))
            };
            match key {
                "size" => cfg.size = Some(int(value)? as usize),
                "qubit_cap" => cfg.qubit_cap = Some(int(value)? as usize),
                "seed" => cfg.seed = Some(int(value)?),
                "connectivity" => cfg.connectivity = Some(parse_connectivity(value).map_err(err)?),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        Ok(cfg)
    }

    /// Builds the topology for a launch of `num_ranks` ranks.
    pub fn resolve(&self, num_ranks: usize, seed: u64) -> Result<TopologyConfig> {
        if let Some(size) = self.size {
            if size != num_ranks {
                return Err(Error::SizeMismatch {
                    expected: num_ranks,
                    got: size,
                });
            }
        }
        let topo = TopologyConfig {
            size: num_ranks,
            connectivity: self.connectivity.clone().unwrap_or(Connectivity::FullMesh),
            qubit_cap: self.qubit_cap.unwrap_or(DEFAULT_QUBIT_CAP),
            seed,
        };
        topo.validate()?;
        Ok(topo)
    }
}

fn parse_connectivity(value: &str) -> std::result::Result<Connectivity, String> {
    if value == "mesh" {
        return Ok(Connectivity::FullMesh);
    }
    let list = value
        .strip_prefix("pairs:")
        .ok_or_else(|| format!("connectivity must be 'mesh' or 'pairs:...', got {value:?}"))?;
    let mut edges = Vec::new();
    let mut rest = list.trim();
    while !rest.is_empty() {
        let inner = rest
            .strip_prefix('(')
            .and_then(|r| r.split_once(')'))
            .ok_or_else(|| format!("malformed edge list {list:?}"))?;
        let (pair, tail) = inner;
        let (a, b) = pair
            .split_once(',')
            .ok_or_else(|| format!("malformed edge ({pair})"))?;
        let a = a.trim().parse::<Rank>().map_err(|_| format!("bad rank {a:?}"))?;
        let b = b.trim().parse::<Rank>().map_err(|_| format!("bad rank {b:?}"))?;
        edges.push((a, b));
        rest = tail.trim_start();
        if let Some(t) = rest.strip_prefix(',') {
            rest = t.trim_start();
        }
    }
    Ok(Connectivity::pairs(edges))
}
