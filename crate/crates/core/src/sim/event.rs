use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// An event stamped with its firing time and a creation ordinal that breaks
/// ties between simultaneous events.
#[derive(Debug, Clone)]
pub struct SimEvent<T> {
    pub time_us: u64,
    pub ordinal: u64,
    pub payload: T,
}

impl<T> PartialEq for SimEvent<T> {
    fn eq(&self, other: &Self) -> bool {
        (self.time_us, self.ordinal) == (other.time_us, other.ordinal)
    }
}

impl<T> Eq for SimEvent<T> {}

impl<T> PartialOrd for SimEvent<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for SimEvent<T> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time_us, other.ordinal).cmp(&(self.time_us, self.ordinal))
    }
}

/// Min-queue ordered by `(time_us, ordinal)`.
#[derive(Debug)]
pub struct EventQueue<T> {
    heap: BinaryHeap<SimEvent<T>>,
    next_ordinal: u64,
}

impl<T> Default for EventQueue<T> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_ordinal: 0,
        }
    }
}

impl<T> EventQueue<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, time_us: u64, payload: T) -> u64 {
        let ordinal = self.next_ordinal;
        self.next_ordinal += 1;
        self.heap.push(SimEvent {
            time_us,
            ordinal,
            payload,
        });
        ordinal
    }

    pub fn peek_time(&self) -> Option<u64> {
        self.heap.peek().map(|e| e.time_us)
    }

    pub fn pop(&mut self) -> Option<SimEvent<T>> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
