//! Measurement code placed at method entry and exit.
//!
//! Direct probes are plain statements compiled into the monitored method.
//! The interceptor path instead routes every call through a generic
//! [`Weaver`]: a freshly allocated [`CallContext`], dynamically dispatched
//! before/after handlers, and an extra indirect call to reach the original
//! body. Both produce the same [`FullRecord`]s.

use std::cell::RefCell;
use std::fmt::Debug;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clock::now_ns;
use crate::pipeline::MonitoringController;
use crate::record::{AggregatedRecord, DurationRecord, FullRecord, RecordText, Signature};
use crate::trace::{ControlFlowRegistry, NO_TRACE};

pub const DEFAULT_AGGREGATION_WINDOW: u64 = 1000;
pub const BENCH_HOSTNAME: &str = "bench-host";
pub const BENCH_SESSION: &str = "s0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    None,
    InterceptorFull,
    DirectFull,
    DirectDuration,
    DirectAggregating,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 5] = [
        ProbeKind::None,
        ProbeKind::InterceptorFull,
        ProbeKind::DirectFull,
        ProbeKind::DirectDuration,
        ProbeKind::DirectAggregating,
    ];
}

/// Entry/exit hooks for one monitored method.
pub trait Probe {
    type Token;

    fn enter(&self) -> Self::Token;

    fn exit(&self, token: Self::Token);

    /// Enters now and exits when the guard drops, including during unwinding.
    #[inline(always)]
    fn guard(&self) -> ProbeGuard<'_, Self>
    where
        Self: Sized,
    {
        ProbeGuard {
            probe: self,
            token: Some(self.enter()),
        }
    }
}

pub struct ProbeGuard<'a, P: Probe> {
    probe: &'a P,
    token: Option<P::Token>,
}

impl<P: Probe> Drop for ProbeGuard<'_, P> {
    #[inline(always)]
    fn drop(&mut self) {
        if let Some(token) = self.token.take() {
            self.probe.exit(token);
        }
    }
}

/// Uninstrumented baseline.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoProbe;

impl Probe for NoProbe {
    type Token = ();

    #[inline(always)]
    fn enter(&self) {}

    #[inline(always)]
    fn exit(&self, _: ()) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FullToken {
    pub tin: u64,
    pub trace_id: u64,
    pub eoi: u32,
    pub ess: u32,
}

/// Host and session labels stamped into every full record.
#[derive(Debug, Clone)]
pub struct RecordOrigin {
    pub hostname: RecordText,
    pub session_id: RecordText,
}

impl Default for RecordOrigin {
    fn default() -> Self {
        Self {
            hostname: RecordText::new(BENCH_HOSTNAME).expect("valid hostname"),
            session_id: RecordText::new(BENCH_SESSION).expect("valid session"),
        }
    }
}

#[inline]
fn enter_full(registry: &ControlFlowRegistry) -> FullToken {
    let mut trace_id = registry.recall_trace_id();
    if trace_id == NO_TRACE {
        trace_id = registry
            .begin_trace()
            .expect("no trace was active on this thread");
    }
    let (eoi, ess) = registry
        .enter_method()
        .expect("trace is active after begin_trace");
    FullToken {
        tin: now_ns(),
        trace_id: trace_id as u64,
        eoi,
        ess,
    }
}

#[inline]
fn exit_full(
    controller: &MonitoringController,
    registry: &ControlFlowRegistry,
    origin: &RecordOrigin,
    signature: &Signature,
    token: FullToken,
) {
    let tout = now_ns();
    controller.new_monitoring_record(
        FullRecord {
            signature: signature.clone(),
            tin: token.tin,
            tout,
            trace_id: token.trace_id,
            eoi: token.eoi,
            ess: token.ess,
            hostname: origin.hostname.clone(),
            session_id: origin.session_id.clone(),
        }
        .into(),
    );
    let exited = registry.exit_method();
    debug_assert!(exited.is_ok());
}

/// Entry and exit timestamps plus trace metadata for each call.
#[derive(Debug, Clone)]
pub struct DirectFullProbe {
    controller: Arc<MonitoringController>,
    registry: &'static ControlFlowRegistry,
    signature: Signature,
    origin: RecordOrigin,
}

impl DirectFullProbe {
    pub fn new(controller: Arc<MonitoringController>, signature: Signature) -> Self {
        Self {
            controller,
            registry: ControlFlowRegistry::global(),
            signature,
            origin: RecordOrigin::default(),
        }
    }
}

impl Probe for DirectFullProbe {
    type Token = FullToken;

    #[inline]
    fn enter(&self) -> FullToken {
        enter_full(self.registry)
    }

    #[inline]
    fn exit(&self, token: FullToken) {
        exit_full(
            &self.controller,
            self.registry,
            &self.origin,
            &self.signature,
            token,
        );
    }
}

/// Only `tout - tin`; no trace bookkeeping.
#[derive(Debug, Clone)]
pub struct DirectDurationProbe {
    controller: Arc<MonitoringController>,
    signature: Signature,
}

impl DirectDurationProbe {
    pub fn new(controller: Arc<MonitoringController>, signature: Signature) -> Self {
        Self {
            controller,
            signature,
        }
    }
}

impl Probe for DirectDurationProbe {
    type Token = u64;

    #[inline]
    fn enter(&self) -> u64 {
        now_ns()
    }

    #[inline]
    fn exit(&self, tin: u64) {
        let duration = now_ns().saturating_sub(tin);
        self.controller.new_monitoring_record(
            DurationRecord {
                signature: self.signature.clone(),
                duration,
            }
            .into(),
        );
    }
}

/// Running sum and count for one method; emits every `window` calls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationState {
    signature: Signature,
    window: u64,
    counter: u64,
    sum: u64,
}

impl AggregationState {
    pub fn new(signature: Signature, window: u64) -> Self {
        assert!(window >= 1, "aggregation window must be at least 1");
        Self {
            signature,
            window,
            counter: 0,
            sum: 0,
        }
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn sum(&self) -> u64 {
        self.sum
    }

    /// Adds one duration. Returns the window's record when it fills, after
    /// which sum and counter start over.
    #[inline]
    pub fn aggregate_duration(&mut self, duration: u64) -> Option<AggregatedRecord> {
        self.sum += duration;
        self.counter += 1;
        if self.counter == self.window {
            Some(self.take_record())
        } else {
            None
        }
    }

    /// The partially filled window, if any, as a record with `count < window`.
    pub fn flush(&mut self) -> Option<AggregatedRecord> {
        (self.counter > 0).then(|| self.take_record())
    }

    fn take_record(&mut self) -> AggregatedRecord {
        let record = AggregatedRecord {
            signature: self.signature.clone(),
            count: self.counter,
            sum_duration: self.sum,
        };
        self.counter = 0;
        self.sum = 0;
        record
    }
}

/// Duration probe that only emits one record per full window.
///
/// Not `Sync`: each thread instruments with its own instance.
#[derive(Debug)]
pub struct AggregatingProbe {
    controller: Arc<MonitoringController>,
    state: RefCell<AggregationState>,
}

impl AggregatingProbe {
    pub fn new(controller: Arc<MonitoringController>, signature: Signature, window: u64) -> Self {
        Self {
            controller,
            state: RefCell::new(AggregationState::new(signature, window)),
        }
    }

    pub fn state(&self) -> AggregationState {
        self.state.borrow().clone()
    }

    /// Emits the residual window. Call before shutting the pipeline down.
    pub fn flush(&self) {
        if let Some(record) = self.state.borrow_mut().flush() {
            self.controller.new_monitoring_record(record.into());
        }
    }
}

impl Probe for AggregatingProbe {
    type Token = u64;

    #[inline]
    fn enter(&self) -> u64 {
        now_ns()
    }

    #[inline]
    fn exit(&self, tin: u64) {
        let duration = now_ns().saturating_sub(tin);
        if let Some(record) = self.state.borrow_mut().aggregate_duration(duration) {
            self.controller.new_monitoring_record(record.into());
        }
    }
}

/// Per-invocation data carried between the before and after handlers.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct InvocationState {
    pub tin: u64,
    pub trace_id: u64,
    pub eoi: u32,
    pub ess: u32,
}

/// Allocated fresh for every intercepted call.
#[derive(Debug)]
pub struct CallContext {
    pub signature: Signature,
    pub args: Vec<String>,
    pub state: InvocationState,
}

/// Argument lists that can describe themselves to an interceptor.
pub trait CallArgs {
    fn describe(&self) -> Vec<String>;
}

impl CallArgs for () {
    fn describe(&self) -> Vec<String> {
        Vec::new()
    }
}

macro_rules! tuple_args {
    ($($name:ident),+) => {
        impl<$($name: Debug),+> CallArgs for ($($name,)+) {
            #[allow(non_snake_case)]
            fn describe(&self) -> Vec<String> {
                let ($($name,)+) = self;
                vec![$(format!("{:?}", $name)),+]
            }
        }
    };
}

tuple_args!(A);
tuple_args!(A, B);
tuple_args!(A, B, C);
tuple_args!(A, B, C, D);

pub trait Interceptor: Send + Sync {
    fn before(&self, ctx: &mut CallContext);

    fn after(&self, ctx: &CallContext);
}

/// Emits the same full records as [`DirectFullProbe`].
#[derive(Debug)]
pub struct FullRecordInterceptor {
    controller: Arc<MonitoringController>,
    registry: &'static ControlFlowRegistry,
    origin: RecordOrigin,
}

impl FullRecordInterceptor {
    pub fn new(controller: Arc<MonitoringController>) -> Self {
        Self {
            controller,
            registry: ControlFlowRegistry::global(),
            origin: RecordOrigin::default(),
        }
    }
}

impl Interceptor for FullRecordInterceptor {
    fn before(&self, ctx: &mut CallContext) {
        let token = enter_full(self.registry);
        ctx.state = InvocationState {
            tin: token.tin,
            trace_id: token.trace_id,
            eoi: token.eoi,
            ess: token.ess,
        };
    }

    fn after(&self, ctx: &CallContext) {
        let s = ctx.state;
        exit_full(
            &self.controller,
            self.registry,
            &self.origin,
            &ctx.signature,
            FullToken {
                tin: s.tin,
                trace_id: s.trace_id,
                eoi: s.eoi,
                ess: s.ess,
            },
        );
    }
}

/// Generic call interception in front of an [`Interceptor`].
pub struct Weaver {
    interceptor: Arc<dyn Interceptor>,
    contexts_allocated: AtomicU64,
}

impl Weaver {
    pub fn new(interceptor: Arc<dyn Interceptor>) -> Self {
        Self {
            interceptor,
            contexts_allocated: AtomicU64::new(0),
        }
    }

    pub fn contexts_allocated(&self) -> u64 {
        self.contexts_allocated.load(Ordering::Relaxed)
    }

    /// Runs `wrapped(args)` between the interceptor's handlers. The after
    /// handler also runs if `wrapped` panics.
    #[inline(never)]
    pub fn invoke<A: CallArgs, R>(
        &self,
        signature: &Signature,
        wrapped: &dyn Fn(A) -> R,
        args: A,
    ) -> R {
        self.contexts_allocated.fetch_add(1, Ordering::Relaxed);
        let mut ctx = Box::new(CallContext {
            signature: signature.clone(),
            args: args.describe(),
            state: InvocationState::default(),
        });
        self.interceptor.before(&mut ctx);
        let _after = AfterHandler {
            interceptor: &*self.interceptor,
            ctx,
        };
        proceed(wrapped, args)
    }
}

#[inline(never)]
fn proceed<A, R>(wrapped: &dyn Fn(A) -> R, args: A) -> R {
    wrapped(args)
}

struct AfterHandler<'a> {
    interceptor: &'a dyn Interceptor,
    ctx: Box<CallContext>,
}

impl Drop for AfterHandler<'_> {
    fn drop(&mut self) {
        self.interceptor.after(&self.ctx);
    }
}

/// Wraps `wrapped` so that every call goes through `weaver`.
pub fn intercept<A, R, F>(weaver: Arc<Weaver>, signature: Signature, wrapped: F) -> impl Fn(A) -> R
where
    A: CallArgs,
    F: Fn(A) -> R,
{
    move |args| weaver.invoke(&signature, &wrapped, args)
}
