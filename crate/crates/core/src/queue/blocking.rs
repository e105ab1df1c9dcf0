use std::collections::LinkedList;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use super::{lock, BoundedQueue, Closed, QueueStats};

/// Linked-list queue that parks producers while full.
///
/// Each element gets its own heap node, like a `LinkedBlockingQueue`.
#[derive(Debug)]
pub struct BlockingLinkedQueue<T> {
    state: Mutex<State<T>>,
    not_empty: Condvar,
    not_full: Condvar,
    capacity: usize,
}

#[derive(Debug)]
struct State<T> {
    items: LinkedList<T>,
    closed: bool,
    enqueued: u64,
    dequeued: u64,
    waiting_consumers: u32,
    /// Wakeups sent to consumers that have not resumed yet.
    pending_wakeups: u32,
    waiting_producers: u32,
}

impl<T> BlockingLinkedQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "queue capacity must be at least 1");
        Self {
            state: Mutex::new(State {
                items: LinkedList::new(),
                closed: false,
                enqueued: 0,
                dequeued: 0,
                waiting_consumers: 0,
                pending_wakeups: 0,
                waiting_producers: 0,
            }),
            not_empty: Condvar::new(),
            not_full: Condvar::new(),
            capacity,
        }
    }

    fn wait_for_data(&self, timeout: Duration) -> std::sync::MutexGuard<'_, State<T>> {
        let deadline = Instant::now() + timeout;
        let mut s = lock(&self.state);
        while s.items.is_empty() && !s.closed {
            let now = Instant::now();
            if now >= deadline {
                break;
            }
            s.waiting_consumers += 1;
            let (guard, _) = self
                .not_empty
                .wait_timeout(s, deadline - now)
                .unwrap_or_else(std::sync::PoisonError::into_inner);
            s = guard;
            s.waiting_consumers -= 1;
            s.pending_wakeups = s.pending_wakeups.saturating_sub(1);
        }
        s
    }

    fn pop(&self, s: &mut State<T>) -> Option<T> {
        let item = s.items.pop_front()?;
        s.dequeued += 1;
        if s.waiting_producers > 0 {
            self.not_full.notify_one();
        }
        Some(item)
    }
}

impl<T: Send> BoundedQueue<T> for BlockingLinkedQueue<T> {
    fn put(&self, item: T) -> Result<(), Closed<T>> {
        let mut s = lock(&self.state);
        loop {
            if s.closed {
                return Err(Closed(item));
            }
            if s.items.len() < self.capacity {
                break;
            }
            s.waiting_producers += 1;
            s = self
                .not_full
                .wait(s)
                .unwrap_or_else(std::sync::PoisonError::into_inner);
            s.waiting_producers -= 1;
        }
        s.items.push_back(item);
        s.enqueued += 1;
        if s.waiting_consumers > s.pending_wakeups {
            s.pending_wakeups += 1;
            self.not_empty.notify_one();
        }
        Ok(())
    }

    fn take(&self) -> Option<T> {
        let mut s = lock(&self.state);
        self.pop(&mut s)
    }

    fn take_timeout(&self, timeout: Duration) -> Option<T> {
        let mut s = self.wait_for_data(timeout);
        self.pop(&mut s)
    }

    fn drain_into(&self, out: &mut Vec<T>, max: usize, timeout: Duration) -> usize {
        let mut s = self.wait_for_data(timeout);
        let mut moved = 0;
        while moved < max {
            match s.items.pop_front() {
                Some(item) => {
                    out.push(item);
                    moved += 1;
                }
                None => break,
            }
        }
        s.dequeued += moved as u64;
        if moved > 0 && s.waiting_producers > 0 {
            self.not_full.notify_all();
        }
        moved
    }

    fn close(&self) {
        let mut s = lock(&self.state);
        s.closed = true;
        self.not_empty.notify_all();
        self.not_full.notify_all();
    }

    fn is_closed(&self) -> bool {
        lock(&self.state).closed
    }

    fn len(&self) -> usize {
        lock(&self.state).items.len()
    }

    fn capacity(&self) -> usize {
        self.capacity
    }

    fn stats(&self) -> QueueStats {
        let s = lock(&self.state);
        QueueStats {
            enqueued: s.enqueued,
            dequeued: s.dequeued,
            overwritten: 0,
            in_queue: s.items.len() as u64,
            capacity: self.capacity as u64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicBool, Ordering};
    use std::sync::Arc;
    use std::thread;

    #[test]
    fn fifo_order() {
        let q = BlockingLinkedQueue::new(2);
        q.put('a').unwrap();
        q.put('b').unwrap();
        assert_eq!(q.take(), Some('a'));
        assert_eq!(q.take(), Some('b'));
        assert_eq!(q.take(), None);
    }

    #[test]
    fn fresh_stats_are_zero() {
        let q = BlockingLinkedQueue::<u8>::new(4);
        assert_eq!(
            q.stats(),
            QueueStats {
                capacity: 4,
                ..QueueStats::default()
            }
        );
    }

    #[test]
    fn blocked_producer_resumes_after_one_take() {
        let q = Arc::new(BlockingLinkedQueue::new(1));
        q.put(1).unwrap();
        let done = Arc::new(AtomicBool::new(false));
        let producer = {
            let (q, done) = (q.clone(), done.clone());
            thread::spawn(move || {
                q.put(2).unwrap();
                done.store(true, Ordering::SeqCst);
            })
        };
        thread::sleep(Duration::from_millis(50));
        assert!(
            !done.load(Ordering::SeqCst),
            "producer should block while full"
        );
        assert_eq!(q.len(), 1);
        assert_eq!(q.take(), Some(1));
        producer.join().unwrap();
        assert!(done.load(Ordering::SeqCst));
        assert_eq!(q.take(), Some(2));
    }

    #[test]
    fn close_rejects_puts_and_releases_waiters() {
        let q = Arc::new(BlockingLinkedQueue::new(1));
        q.put(1).unwrap();
        let producer = {
            let q = q.clone();
            thread::spawn(move || q.put(2))
        };
        thread::sleep(Duration::from_millis(20));
        q.close();
        assert_eq!(producer.join().unwrap(), Err(Closed(2)));
        assert_eq!(q.take_timeout(Duration::from_secs(5)), Some(1));
        let start = Instant::now();
        assert_eq!(q.take_timeout(Duration::from_secs(5)), None);
        assert!(start.elapsed() < Duration::from_secs(1));
    }

    #[test]
    fn take_timeout_is_bounded() {
        let q = BlockingLinkedQueue::<u8>::new(1);
        let start = Instant::now();
        assert_eq!(q.take_timeout(Duration::from_millis(20)), None);
        assert!(start.elapsed() >= Duration::from_millis(20));
    }

    #[test]
    fn concurrent_producer_consumer_preserves_order() {
        let q = Arc::new(BlockingLinkedQueue::new(16));
        let producer = {
            let q = q.clone();
            thread::spawn(move || {
                for i in 0..50_000u32 {
                    q.put(i).unwrap();
                }
                q.close();
            })
        };
        let mut got = Vec::new();
        let mut buf = Vec::new();
        loop {
            buf.clear();
            if q.drain_into(&mut buf, 64, Duration::from_millis(10)) == 0
                && q.is_closed()
                && q.is_empty()
            {
                break;
            }
            got.extend_from_slice(&buf);
        }
        producer.join().unwrap();
        assert_eq!(got, (0..50_000).collect::<Vec<_>>());
        let s = q.stats();
        assert_eq!(s.enqueued, 50_000);
        assert_eq!(s.dequeued, 50_000);
    }
}
