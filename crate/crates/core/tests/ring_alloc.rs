use std::alloc::{GlobalAlloc, Layout, System};
use std::cell::Cell;

use minimon::queue::{BlockingLinkedQueue, BoundedQueue, SyncRingQueue};
use minimon::record::{DurationRecord, MonitoringRecord, RecordText};

struct Counting;

thread_local! {
    static ALLOCATIONS: Cell<u64> = const { Cell::new(0) };
}

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let _ = ALLOCATIONS.try_with(|c| c.set(c.get() + 1));
        System.alloc(layout)
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout)
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let _ = ALLOCATIONS.try_with(|c| c.set(c.get() + 1));
        System.realloc(ptr, layout, new_size)
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

fn allocations_during(f: impl FnOnce()) -> u64 {
    let before = ALLOCATIONS.with(Cell::get);
    f();
    ALLOCATIONS.with(Cell::get) - before
}

fn record(sig: &RecordText, i: u64) -> MonitoringRecord {
    DurationRecord {
        signature: sig.clone(),
        duration: i,
    }
    .into()
}

#[test]
fn sync_ring_does_not_allocate_after_construction() {
    let sig = RecordText::new("m()").unwrap();
    let queue = SyncRingQueue::new(64);
    let allocated = allocations_during(|| {
        // fill, overwrite, drain, refill: every slot path is exercised
        for i in 0..1000 {
            queue.put(record(&sig, i)).unwrap();
            if i % 3 == 0 {
                queue.take();
            }
        }
        while queue.take().is_some() {}
        for i in 0..200 {
            queue.put(record(&sig, i)).unwrap();
        }
    });
    assert_eq!(allocated, 0);
    assert!(queue.stats().overwritten > 0);
}

#[test]
fn blocking_linked_allocates_one_node_per_put() {
    let sig = RecordText::new("m()").unwrap();
    let queue = BlockingLinkedQueue::new(1000);
    let allocated = allocations_during(|| {
        for i in 0..500 {
            queue.put(record(&sig, i)).unwrap();
        }
    });
    assert_eq!(allocated, 500);
}
