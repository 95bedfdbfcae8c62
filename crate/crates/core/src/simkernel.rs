//! Deterministic discrete-event kernel.
//!
//! All simulated work runs on a single logical executor driven by a virtual
//! clock with microsecond resolution. Events fire in `(fire_at, seq)` order,
//! so two runs that schedule the same work from the same seed replay the
//! exact same history. Randomness is only available through named
//! [`RngStream`]s derived from the master seed, which keeps independent
//! consumers (auth challenges, execution jitter) from perturbing each other.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Virtual time in microseconds since the start of the run.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct VirtualTime(u64);

impl VirtualTime {
    pub const ZERO: VirtualTime = VirtualTime(0);

    pub const fn from_micros(us: u64) -> Self {
        VirtualTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        VirtualTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        VirtualTime(s * 1_000_000)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub const fn add_micros(self, us: u64) -> Self {
        VirtualTime(self.0 + us)
    }

    pub const fn saturating_sub(self, other: VirtualTime) -> u64 {
        self.0.saturating_sub(other.0)
    }

    pub fn max(self, other: VirtualTime) -> Self {
        if self.0 >= other.0 {
            self
        } else {
            other
        }
    }
}

impl std::fmt::Display for VirtualTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.6}s", self.as_secs_f64())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("cannot schedule at {at} while the clock is at {now}")]
    SchedulingInPast { at: VirtualTime, now: VirtualTime },
}

/// Token for a scheduled event, usable to cancel it before it fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

type Action<W> = Box<dyn FnOnce(&mut SimKernel<W>, &mut W)>;

struct QueuedEvent<W> {
    fire_at: VirtualTime,
    seq: u64,
    action: Action<W>,
}

impl<W> PartialEq for QueuedEvent<W> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<W> Eq for QueuedEvent<W> {}

impl<W> Ord for QueuedEvent<W> {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the earliest (fire_at, seq) pops first.
        (other.fire_at, other.seq).cmp(&(self.fire_at, self.seq))
    }
}

impl<W> PartialOrd for QueuedEvent<W> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Scheduling and dispatch statistics, exposed so callers can check the
/// conservation invariant: scheduled = dispatched + cancelled + pending.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KernelStats {
    pub scheduled: u64,
    pub dispatched: u64,
    pub cancelled: u64,
    pub pending: u64,
}

/// Single-executor event loop over a caller-owned world `W`.
///
/// Actions receive `&mut SimKernel<W>` so they can read the clock, schedule
/// follow-ups and cancel timers, plus `&mut W` for everything else.
pub struct SimKernel<W> {
    now: VirtualTime,
    next_seq: u64,
    queue: BinaryHeap<QueuedEvent<W>>,
    cancelled: HashSet<u64>,
    master_seed: u64,
    stats: KernelStats,
}

impl<W> SimKernel<W> {
    pub fn new(master_seed: u64) -> Self {
        SimKernel {
            now: VirtualTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            cancelled: HashSet::new(),
            master_seed,
            stats: KernelStats::default(),
        }
    }

    pub fn now(&self) -> VirtualTime {
        self.now
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stats(&self) -> KernelStats {
        self.stats
    }

    /// Schedule `action` to fire at `at`. Events at the same instant fire in
    /// scheduling order.
    pub fn schedule(
        &mut self,
        at: VirtualTime,
        action: impl FnOnce(&mut SimKernel<W>, &mut W) + 'static,
    ) -> Result<EventHandle, SimError> {
        if at < self.now {
            return Err(SimError::SchedulingInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(QueuedEvent {
            fire_at: at,
            seq,
            action: Box::new(action),
        });
        self.stats.scheduled += 1;
        self.stats.pending += 1;
        Ok(EventHandle(seq))
    }

    /// Cancel a pending event. Returns false if it already fired or was
    /// already cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        let live = handle.0 < self.next_seq
            && !self.cancelled.contains(&handle.0)
            && self.queue.iter().any(|e| e.seq == handle.0);
        if live {
            self.cancelled.insert(handle.0);
            self.stats.cancelled += 1;
            self.stats.pending -= 1;
        }
        live
    }

    /// Dispatch every event with `fire_at <= until`, including events those
    /// actions schedule inside the window. The clock ends at the later of
    /// `until` and the last dispatched instant. Returns the dispatch count.
    pub fn run_until(&mut self, until: VirtualTime, world: &mut W) -> u64 {
        let mut dispatched = 0;
        while let Some(head) = self.queue.peek() {
            if head.fire_at > until {
                break;
            }
            let event = self.queue.pop().expect("peeked entry present");
            if self.cancelled.remove(&event.seq) {
                continue;
            }
            debug_assert!(event.fire_at >= self.now, "event queue went backwards");
            self.now = event.fire_at;
            self.stats.dispatched += 1;
            self.stats.pending -= 1;
            dispatched += 1;
            (event.action)(self, world);
        }
        self.now = self.now.max(until);
        dispatched
    }

    /// Dispatch until the queue is empty. Returns the dispatch count.
    pub fn run_all(&mut self, world: &mut W) -> u64 {
        let mut dispatched = 0;
        while let Some(head) = self.queue.peek() {
            let target = head.fire_at;
            dispatched += self.run_until(target, world);
        }
        dispatched
    }

    /// Named deterministic random substream. The same (master seed, id) pair
    /// always yields the same stream regardless of scheduling history.
    pub fn rng(&self, stream_id: &str) -> RngStream {
        RngStream::derive(self.master_seed, stream_id)
    }
}

/// Deterministic random stream, independent per (seed, label).
///
/// Internally ChaCha12 keyed with SHA-256(seed_le || label); the digest keeps
/// labels from colliding even when one is a prefix of another.
#[derive(Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
    label: String,
}

impl RngStream {
    pub fn derive(master_seed: u64, stream_id: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(master_seed.to_le_bytes());
        hasher.update([stream_id.len() as u8]);
        hasher.update(stream_id.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        RngStream {
            rng: ChaCha12Rng::from_seed(key),
            label: stream_id.to_string(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest);
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn unit_f64(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform draw in [lo, hi).
    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.unit_f64() * (hi - lo)
    }

    /// Uniform draw in [0, n) without modulo bias (rejection sampling).
    pub fn below_u64(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.rng.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }
}

impl std::fmt::Debug for RngStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RngStream").field("label", &self.label).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_instant_fires_in_scheduling_order() {
        let mut kernel: SimKernel<Vec<u32>> = SimKernel::new(1);
        let mut world = Vec::new();
        kernel
            .schedule(VirtualTime::from_micros(5), |_, w| w.push(1))
            .unwrap();
        kernel
            .schedule(VirtualTime::from_micros(5), |_, w| w.push(2))
            .unwrap();
        kernel
            .schedule(VirtualTime::from_micros(3), |_, w| w.push(0))
            .unwrap();
        let n = kernel.run_until(VirtualTime::from_micros(10), &mut world);
        assert_eq!(n, 3);
        assert_eq!(world, vec![0, 1, 2]);
        assert_eq!(kernel.now(), VirtualTime::from_micros(10));
    }

    #[test]
    fn scheduling_in_past_is_rejected() {
        let mut kernel: SimKernel<()> = SimKernel::new(1);
        kernel
            .schedule(VirtualTime::from_micros(10), |_, _| {})
            .unwrap();
        kernel.run_until(VirtualTime::from_micros(10), &mut ());
        let err = kernel
            .schedule(VirtualTime::from_micros(4), |_, _| {})
            .unwrap_err();
        assert_eq!(
            err,
            SimError::SchedulingInPast {
                at: VirtualTime::from_micros(4),
                now: VirtualTime::from_micros(10),
            }
        );
    }

    #[test]
    fn follow_up_within_window_fires_in_same_call() {
        let mut kernel: SimKernel<Vec<u64>> = SimKernel::new(1);
        let mut world = Vec::new();
        kernel
            .schedule(VirtualTime::from_micros(2), |k, w| {
                w.push(k.now().as_micros());
                k.schedule(VirtualTime::from_micros(7), |k, w| {
                    w.push(k.now().as_micros());
                })
                .unwrap();
            })
            .unwrap();
        let n = kernel.run_until(VirtualTime::from_micros(10), &mut world);
        assert_eq!(n, 2);
        assert_eq!(world, vec![2, 7]);
    }

    #[test]
    fn cancelled_event_does_not_fire() {
        let mut kernel: SimKernel<Vec<u32>> = SimKernel::new(1);
        let mut world = Vec::new();
        let h = kernel
            .schedule(VirtualTime::from_micros(5), |_, w| w.push(1))
            .unwrap();
        assert!(kernel.cancel(h));
        assert!(!kernel.cancel(h));
        kernel.run_until(VirtualTime::from_micros(10), &mut world);
        assert!(world.is_empty());
        let stats = kernel.stats();
        assert_eq!(stats.scheduled, 1);
        assert_eq!(stats.cancelled, 1);
        assert_eq!(stats.dispatched, 0);
        assert_eq!(stats.pending, 0);
    }

    #[test]
    fn clock_never_runs_backwards() {
        let mut kernel: SimKernel<Vec<u64>> = SimKernel::new(1);
        let mut world = Vec::new();
        for t in [9u64, 1, 5, 5, 2] {
            kernel
                .schedule(VirtualTime::from_micros(t), move |k, w| {
                    w.push(k.now().as_micros())
                })
                .unwrap();
        }
        kernel.run_all(&mut world);
        let mut sorted = world.clone();
        sorted.sort_unstable();
        assert_eq!(world, sorted);
        assert_eq!(kernel.now(), VirtualTime::from_micros(9));
    }

    #[test]
    fn conservation_of_events() {
        let mut kernel: SimKernel<u32> = SimKernel::new(7);
        let mut world = 0u32;
        let mut handles = Vec::new();
        for t in 0..50u64 {
            handles.push(
                kernel
                    .schedule(VirtualTime::from_micros(t * 3), |_, w| *w += 1)
                    .unwrap(),
            );
        }
        for h in handles.iter().step_by(7) {
            kernel.cancel(*h);
        }
        kernel.run_until(VirtualTime::from_micros(60), &mut world);
        let s = kernel.stats();
        assert_eq!(s.scheduled, s.dispatched + s.cancelled + s.pending);
        kernel.run_all(&mut world);
        let s = kernel.stats();
        assert_eq!(s.pending, 0);
        assert_eq!(s.scheduled, s.dispatched + s.cancelled);
        assert_eq!(u64::from(world), s.dispatched);
    }

    #[test]
    fn rng_streams_are_stable_and_independent() {
        let a1 = RngStream::derive(42, "auth-rand").next_u64();
        let a2 = RngStream::derive(42, "auth-rand").next_u64();
        let b = RngStream::derive(42, "exec-jitter").next_u64();
        let c = RngStream::derive(43, "auth-rand").next_u64();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
        assert_ne!(a1, c);
    }

    #[test]
    fn rng_labels_do_not_collide_on_prefixes() {
        let mut a = RngStream::derive(1, "ab");
        let mut b = RngStream::derive(1, "a");
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn unit_f64_stays_in_range() {
        let mut rng = RngStream::derive(5, "unit");
        for _ in 0..1000 {
            let v = rng.unit_f64();
            assert!((0.0..1.0).contains(&v));
        }
    }
}
