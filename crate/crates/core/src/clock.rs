//! Monotonic nanosecond time source shared by probes and the benchmark loop.

use std::hint::black_box;
use std::sync::OnceLock;
use std::time::Instant;

static EPOCH: OnceLock<Instant> = OnceLock::new();

/// Nanoseconds since the first call in this process. Never goes backwards.
#[inline]
pub fn now_ns() -> u64 {
    let epoch = *EPOCH.get_or_init(Instant::now);
    epoch.elapsed().as_nanos() as u64
}

/// Spins on the monotonic clock until at least `busy_ns` have elapsed since
/// `start`. Returns `start`.
#[inline]
pub fn busy_wait_from(start: u64, busy_ns: u64) -> u64 {
    if busy_ns > 0 {
        while now_ns().wrapping_sub(start) < busy_ns {
            std::hint::spin_loop();
        }
    }
    start
}

/// Smallest positive step observed between consecutive clock readings.
pub fn estimate_resolution_ns(samples: usize) -> u64 {
    let mut best = u64::MAX;
    for _ in 0..samples {
        let a = now_ns();
        let mut b = now_ns();
        while b == a {
            b = black_box(now_ns());
        }
        best = best.min(b - a);
    }
    best
}
