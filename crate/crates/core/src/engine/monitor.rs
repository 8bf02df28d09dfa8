use std::collections::HashSet;
use std::fmt;

use super::worker::EngineEvent;
use crate::oracle::DisjointSet;
use crate::VertexId;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InvariantViolation {
    /// A newly branched edge closed a cycle among branch edges.
    BranchCycle { u: VertexId, v: VertexId, step: u64 },
    LevelDecreased { vertex: VertexId, from: u8, to: u8, step: u64 },
    /// A fragment of level L has at least 2^L vertices.
    LevelTooHigh { vertex: VertexId, level: u8, bound: u8, step: u64 },
}

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BranchCycle { u, v, step } => write!(f, "step {step}: branch edge ({u}, {v}) closes a cycle"),
            Self::LevelDecreased { vertex, from, to, step } => {
                write!(f, "step {step}: vertex {vertex} level fell from {from} to {to}")
            }
            Self::LevelTooHigh { vertex, level, bound, step } => {
                write!(f, "step {step}: vertex {vertex} reached level {level} > {bound}")
            }
        }
    }
}

/// Global observer fed with every worker's events by the simulator.
///
/// Branch marks are permanent, so a running union–find over all edges ever
/// marked `Branch` on either side detects a cycle the moment it forms.
pub(crate) struct InvariantMonitor {
    forest: DisjointSet,
    branched: HashSet<(VertexId, VertexId)>,
    level_bound: u8,
    pub violations: Vec<InvariantViolation>,
}

impl InvariantMonitor {
    pub fn new(num_vertices: usize) -> Self {
        let level_bound = (usize::BITS - 1 - num_vertices.max(1).leading_zeros()) as u8;
        InvariantMonitor {
            forest: DisjointSet::new(num_vertices),
            branched: HashSet::new(),
            level_bound,
            violations: Vec::new(),
        }
    }

    pub fn observe(&mut self, events: impl IntoIterator<Item = EngineEvent>, step: u64) {
        for ev in events {
            match ev {
                EngineEvent::Branched { u, v } => {
                    let key = (u.min(v), u.max(v));
                    if self.branched.insert(key) && !self.forest.union(u as usize, v as usize) {
                        self.violations.push(InvariantViolation::BranchCycle { u, v, step });
                    }
                }
                EngineEvent::LevelChanged { vertex, from, to } => {
                    if to < from {
                        self.violations.push(InvariantViolation::LevelDecreased { vertex, from, to, step });
                    }
                    if to > self.level_bound {
                        self.violations.push(InvariantViolation::LevelTooHigh {
                            vertex,
                            level: to,
                            bound: self.level_bound,
                            step,
                        });
                    }
                }
            }
        }
    }
}
