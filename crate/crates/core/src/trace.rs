//! Per-thread control-flow bookkeeping: trace id, execution order index (eoi)
//! and execution stack size (ess).
//!
//! The per-thread context lives in thread-local storage and is shared by all
//! registries on that thread; a [`ControlFlowRegistry`] only owns the
//! sequence from which trace ids are allocated.

use std::cell::Cell;
use std::sync::atomic::{AtomicI64, Ordering};

use thiserror::Error;

/// Trace id of a thread that is not inside a monitored call.
pub const NO_TRACE: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("a trace is already active on this thread (id {0})")]
    AlreadyActive(i64),
    #[error("no trace is active on this thread")]
    NoActiveTrace,
    #[error("method exit without a matching entry")]
    UnbalancedExit,
}

/// Snapshot of the calling thread's trace state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceContext {
    pub trace_id: i64,
    pub next_eoi: u32,
    pub ess: u32,
}

impl TraceContext {
    const IDLE: TraceContext = TraceContext {
        trace_id: NO_TRACE,
        next_eoi: 0,
        ess: 0,
    };
}

thread_local! {
    static CONTEXT: Cell<TraceContext> = const { Cell::new(TraceContext::IDLE) };
}

#[derive(Debug, Default)]
pub struct ControlFlowRegistry {
    next_trace_id: AtomicI64,
}

static GLOBAL: ControlFlowRegistry = ControlFlowRegistry::new();

impl ControlFlowRegistry {
    pub const fn new() -> Self {
        Self {
            next_trace_id: AtomicI64::new(0),
        }
    }

    /// The process-wide registry used by the probes.
    pub fn global() -> &'static ControlFlowRegistry {
        &GLOBAL
    }

    #[inline]
    pub fn recall_trace_id(&self) -> i64 {
        CONTEXT.with(|c| c.get().trace_id)
    }

    pub fn context(&self) -> TraceContext {
        CONTEXT.with(Cell::get)
    }

    /// Starts a trace on this thread with the next id from this registry.
    #[inline]
    pub fn begin_trace(&self) -> Result<i64, TraceError> {
        CONTEXT.with(|c| {
            let ctx = c.get();
            if ctx.trace_id != NO_TRACE {
                return Err(TraceError::AlreadyActive(ctx.trace_id));
            }
            let id = self.next_trace_id.fetch_add(1, Ordering::Relaxed);
            c.set(TraceContext {
                trace_id: id,
                next_eoi: 0,
                ess: 0,
            });
            Ok(id)
        })
    }

    /// Returns `(eoi, ess)` for the method being entered, then advances both.
    #[inline]
    pub fn enter_method(&self) -> Result<(u32, u32), TraceError> {
        CONTEXT.with(|c| {
            let mut ctx = c.get();
            if ctx.trace_id == NO_TRACE {
                return Err(TraceError::NoActiveTrace);
            }
            let entered = (ctx.next_eoi, ctx.ess);
            ctx.next_eoi += 1;
            ctx.ess += 1;
            c.set(ctx);
            Ok(entered)
        })
    }

    /// Leaves the current method. When the stack empties the trace ends.
    #[inline]
    pub fn exit_method(&self) -> Result<(), TraceError> {
        CONTEXT.with(|c| {
            let mut ctx = c.get();
            if ctx.ess == 0 {
                return Err(TraceError::UnbalancedExit);
            }
            ctx.ess -= 1;
            if ctx.ess == 0 {
                ctx = TraceContext::IDLE;
            }
            c.set(ctx);
            Ok(())
        })
    }
}
