use std::sync::{Condvar, Mutex, PoisonError};
use std::time::{Duration, Instant};

use super::{lock, BoundedQueue, Closed, QueueStats};

/// Fixed-slot circular FIFO guarded by one mutex per operation.
///
/// `put` writes at the end index; when every slot is in use the element at
/// the start index is overwritten and the start advances with it. No memory
/// is allocated after construction.
#[derive(Debug)]
pub struct SyncRingQueue<T> {
    state: Mutex<Ring<T>>,
    not_empty: Condvar,
}

#[derive(Debug)]
struct Ring<T> {
    slots: Box<[Option<T>]>,
    start: usize,
    len: usize,
    closed: bool,
    enqueued: u64,
    dequeued: u64,
    overwritten: u64,
    waiting_consumers: u32,
    /// Wakeups sent to consumers that have not resumed yet.
    pending_wakeups: u32,
}

impl<T> Ring<T> {
    fn pop(&mut self) -> Option<T> {
        if self.len == 0 {
            return None;
        }
        let item = self.slots[self.start].take();
        self.start = (self.start + 1) % self.slots.len();
        self.len -= 1;
        self.dequeued += 1;
        item
    }
}

impl<T> SyncRingQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "queue capacity must be at least 1");
        Self {
            state: Mutex::new(Ring {
                slots: (0..capacity).map(|_| None).collect(),
                start: 0,
                len: 0,
                closed: false,
                enqueued: 0,
                dequeued: 0,
                overwritten: 0,
                waiting_consumers: 0,
                pending_wakeups: 0,
            }),
            not_empty: Condvar::new(),
        }
    }

    fn wait_for_data(&self, timeout: Duration) -> std::sync::MutexGuard<'_, Ring<T>> {
        let deadline = Instant::now() + timeout;
        let mut r = lock(&self.state);
        while r.len == 0 && !r.closed {
            let now = Instant::now();
            if now >= deadline {
                break;
            }
            r.waiting_consumers += 1;
            let (guard, _) = self
                .not_empty
                .wait_timeout(r, deadline - now)
                .unwrap_or_else(PoisonError::into_inner);
            r = guard;
            r.waiting_consumers -= 1;
            r.pending_wakeups = r.pending_wakeups.saturating_sub(1);
        }
        r
    }
}

impl<T: Send> BoundedQueue<T> for SyncRingQueue<T> {
    #[inline]
    fn put(&self, item: T) -> Result<(), Closed<T>> {
        let mut r = lock(&self.state);
        if r.closed {
            return Err(Closed(item));
        }
        let cap = r.slots.len();
        let end = (r.start + r.len) % cap;
        r.slots[end] = Some(item);
        if r.len == cap {
            r.start = (r.start + 1) % cap;
            r.overwritten += 1;
        } else {
            r.len += 1;
        }
        r.enqueued += 1;
        if r.waiting_consumers > r.pending_wakeups {
            r.pending_wakeups += 1;
            self.not_empty.notify_one();
        }
        Ok(())
    }

    fn take(&self) -> Option<T> {
        lock(&self.state).pop()
    }

    fn take_timeout(&self, timeout: Duration) -> Option<T> {
        self.wait_for_data(timeout).pop()
    }

    fn drain_into(&self, out: &mut Vec<T>, max: usize, timeout: Duration) -> usize {
        let mut r = self.wait_for_data(timeout);
        let mut moved = 0;
        while moved < max {
            match r.pop() {
                Some(item) => {
                    out.push(item);
                    moved += 1;
                }
                None => break,
            }
        }
        moved
    }

    fn close(&self) {
        lock(&self.state).closed = true;
        self.not_empty.notify_all();
    }

    fn is_closed(&self) -> bool {
        lock(&self.state).closed
    }

    fn len(&self) -> usize {
        lock(&self.state).len
    }

    fn capacity(&self) -> usize {
        lock(&self.state).slots.len()
    }

    fn stats(&self) -> QueueStats {
        let r = lock(&self.state);
        QueueStats {
            enqueued: r.enqueued,
            dequeued: r.dequeued,
            overwritten: r.overwritten,
            in_queue: r.len as u64,
            capacity: r.slots.len() as u64,
        }
    }
}
