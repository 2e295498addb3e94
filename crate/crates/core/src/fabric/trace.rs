use std::fmt;

use crate::Rank;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceKind {
    Alloc,
    Gate,
    Measure,
    Free,
    Epr,
    Ghz,
    Csend,
    Crecv,
    Flush,
    Barrier,
    Collective,
}

impl TraceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceKind::Alloc => "alloc",
            TraceKind::Gate => "gate",
            TraceKind::Measure => "measure",
            TraceKind::Free => "free",
            TraceKind::Epr => "epr",
            TraceKind::Ghz => "ghz",
            TraceKind::Csend => "csend",
            TraceKind::Crecv => "crecv",
            TraceKind::Flush => "flush",
            TraceKind::Barrier => "barrier",
            TraceKind::Collective => "collective",
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One committed operation. Rendered as `seq rank kind key="value" ...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub seq: u64,
    pub rank: Rank,
    pub kind: TraceKind,
    pub details: Vec<(&'static str, String)>,
}

impl TraceRecord {
    pub fn detail(&self, key: &str) -> Option<&str> {
        self.details
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.seq, self.rank, self.kind)?;
        for (k, v) in &self.details {
            write!(f, " {k}={v:?}")?;
        }
        Ok(())
    }
}

/// Renders records one per line, newline terminated.
pub fn render(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}
