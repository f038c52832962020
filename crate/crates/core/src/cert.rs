//! Clause lists with an input digest.

use crate::trigpoly::{GridMask, TrigPoly};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq)]
pub struct Clause {
    pub description: String,
    pub lhs: f64,
    /// One of `<`, `<=`, `>=`, `>`.
    pub relation: &'static str,
    pub rhs: f64,
    pub pass: bool,
}

impl Clause {
    pub fn new(description: impl Into<String>, lhs: f64, relation: &'static str, rhs: f64) -> Self {
        let pass = match relation {
            "<" => lhs < rhs,
            "<=" => lhs <= rhs,
            ">=" => lhs >= rhs,
            ">" => lhs > rhs,
            _ => panic!("unknown relation {relation}"),
        };
        Self { description: description.into(), lhs, relation, rhs, pass }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub kind: String,
    pub clauses: Vec<Clause>,
    pub digest: String,
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn new(kind: impl Into<String>) -> Self {
        Self { kind: kind.into(), clauses: Vec::new(), digest: String::new(), notes: Vec::new() }
    }

    pub fn check(&mut self, description: impl Into<String>, lhs: f64, relation: &'static str, rhs: f64) {
        self.clauses.push(Clause::new(description, lhs, relation, rhs));
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn pass(&self) -> bool {
        self.clauses.iter().all(|c| c.pass)
    }

    pub fn failing(&self) -> Vec<&Clause> {
        self.clauses.iter().filter(|c| !c.pass).collect()
    }

    /// Appends another certificate's clauses, prefixing their descriptions.
    pub fn absorb(&mut self, prefix: &str, other: &Certificate) {
        for c in &other.clauses {
            self.clauses.push(Clause { description: format!("{prefix}: {}", c.description), ..c.clone() });
        }
        self.notes.extend(other.notes.iter().map(|n| format!("{prefix}: {n}")));
    }
}

/// SHA-256 over the raw coefficient and mask bits.
pub fn digest(polys: &[&TrigPoly], masks: &[&GridMask]) -> String {
    let mut h = Sha256::new();
    for p in polys {
        h.update((p.len() as u64).to_le_bytes());
        for (n, c) in p.terms() {
            h.update(n.to_le_bytes());
            h.update(c.re.to_bits().to_le_bytes());
            h.update(c.im.to_bits().to_le_bytes());
        }
    }
    for m in masks {
        h.update((m.len() as u64).to_le_bytes());
        h.update(m.bits().iter().map(|&b| b as u8).collect::<Vec<u8>>());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
