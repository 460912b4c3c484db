use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::policy::{InstanceId, RequestId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Arrival(RequestId),
    ResizeApplied { instance: InstanceId, generation: u64 },
    ExecComplete { instance: InstanceId, generation: u64 },
    IdleExpiry { instance: InstanceId, deadline: f64 },
    InstanceReady(InstanceId),
}

#[derive(Debug, Clone, Copy)]
pub struct SimEvent {
    /// Virtual time in ms.
    pub at: f64,
    /// Insertion order; breaks ties between equal timestamps.
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.at
            .total_cmp(&other.at)
            .then_with(|| self.seq.cmp(&other.seq))
    }
}

/// Min-ordered by `(at, seq)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<SimEvent>>,
    next_seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, at: f64, kind: EventKind) -> u64 {
        debug_assert!(at.is_finite(), "event time must be finite");
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(SimEvent { at, seq, kind }));
        seq
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
