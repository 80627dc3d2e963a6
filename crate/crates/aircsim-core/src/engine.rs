//! Deterministic discrete-event core: future-event list, clock, and
//! seeded random streams.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::model::SimTime;

struct QueuedEvent<P> {
    fire_at: SimTime,
    seq: u64,
    payload: P,
}

impl<P> PartialEq for QueuedEvent<P> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq && self.fire_at == other.fire_at
    }
}
impl<P> Eq for QueuedEvent<P> {}

impl<P> Ord for QueuedEvent<P> {
    // Reversed: BinaryHeap is a max-heap, we want the earliest (fire_at, seq)
    // on top. Ties in fire_at break by scheduling order.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .total_cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}
impl<P> PartialOrd for QueuedEvent<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Future-event list plus the simulation clock.
///
/// Events fire in `(fire_at, sequence)` order; the sequence number is
/// issued at scheduling time, so simultaneous events fire FIFO.
pub struct EventQueue<P> {
    heap: BinaryHeap<QueuedEvent<P>>,
    next_seq: u64,
    now: SimTime,
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: 0.0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Schedules `payload` to fire at `fire_at`.
    ///
    /// Scheduling into the past is a programming error and panics.
    pub fn schedule(&mut self, fire_at: SimTime, payload: P) -> u64 {
        assert!(
            fire_at >= self.now,
            "event scheduled into the past: fire_at={fire_at}, clock={}",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(QueuedEvent {
            fire_at,
            seq,
            payload,
        });
        seq
    }

    /// Pops the next event with `fire_at <= end`, advancing the clock to it.
    /// When no such event remains the clock advances to `end` and `None`
    /// is returned.
    pub fn pop_until(&mut self, end: SimTime) -> Option<(SimTime, P)> {
        match self.heap.peek() {
            Some(ev) if ev.fire_at <= end => {
                let ev = self.heap.pop().unwrap();
                debug_assert!(ev.fire_at >= self.now);
                self.now = ev.fire_at;
                Some((ev.fire_at, ev.payload))
            }
            _ => {
                if end > self.now {
                    self.now = end;
                }
                None
            }
        }
    }
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        Self::new()
    }
}

/// An independent, reproducible random stream.
///
/// Identical `(seed, stream_id)` yields identical draw sequences across
/// runs and platforms; distinct stream ids never share state, so adding
/// one consumer does not perturb another's draws.
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { rng }
    }

    /// Draws from an exponential distribution with the given mean.
    pub fn sample_exponential(&mut self, mean: f64) -> f64 {
        assert!(
            mean > 0.0 && mean.is_finite(),
            "exponential mean must be positive, got {mean}"
        );
        Exp::new(1.0 / mean).unwrap().sample(&mut self.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_fire_in_time_order() {
        let mut q = EventQueue::new();
        q.schedule(5.0, "late");
        q.schedule(3.0, "early");
        assert_eq!(q.pop_until(10.0), Some((3.0, "early")));
        assert_eq!(q.now(), 3.0);
        assert_eq!(q.pop_until(10.0), Some((5.0, "late")));
        assert_eq!(q.pop_until(10.0), None);
        assert_eq!(q.now(), 10.0);
    }

    #[test]
    fn ties_break_by_scheduling_order() {
        let mut q = EventQueue::new();
        q.schedule(5.0, "a");
        q.schedule(5.0, "b");
        assert_eq!(q.pop_until(10.0), Some((5.0, "a")));
        assert_eq!(q.pop_until(10.0), Some((5.0, "b")));
    }

    #[test]
    #[should_panic(expected = "scheduled into the past")]
    fn scheduling_into_the_past_panics() {
        let mut q = EventQueue::new();
        q.schedule(3.0, ());
        q.pop_until(3.0);
        q.schedule(2.0, ());
    }

    #[test]
    fn boundary_event_inclusion() {
        let mut q = EventQueue::new();
        q.schedule(999.999, 1);
        q.schedule(1000.001, 2);
        assert_eq!(q.pop_until(1000.0), Some((999.999, 1)));
        assert_eq!(q.pop_until(1000.0), None);
        assert_eq!(q.now(), 1000.0);
    }

    #[test]
    fn empty_run_advances_clock() {
        let mut q: EventQueue<()> = EventQueue::new();
        assert_eq!(q.pop_until(4000.0), None);
        assert_eq!(q.now(), 4000.0);
    }

    #[test]
    fn exponential_mean_converges() {
        for mean in [3.33, 1.0] {
            let mut s = RandomStream::new(7, 0);
            let n = 100_000;
            let sum: f64 = (0..n).map(|_| s.sample_exponential(mean)).sum();
            let empirical = sum / n as f64;
            assert!(
                (empirical - mean).abs() / mean < 0.03,
                "mean {mean}: empirical {empirical}"
            );
        }
    }

    #[test]
    fn same_stream_reproduces_same_sequence() {
        let mut a = RandomStream::new(42, 3);
        let mut b = RandomStream::new(42, 3);
        for _ in 0..1000 {
            assert_eq!(a.sample_exponential(2.0), b.sample_exponential(2.0));
        }
    }

    #[test]
    fn distinct_streams_are_independent() {
        let mut a = RandomStream::new(42, 0);
        let mut b = RandomStream::new(42, 1);
        let same = (0..100)
            .filter(|_| a.sample_exponential(1.0) == b.sample_exponential(1.0))
            .count();
        assert_eq!(same, 0);
    }

    #[test]
    #[should_panic(expected = "mean must be positive")]
    fn non_positive_mean_rejected() {
        RandomStream::new(1, 0).sample_exponential(0.0);
    }
}
