//! The monitored application: a recursive chain of `depth` calls whose leaf
//! busy-waits for `busy_ns` and returns its entry timestamp up the chain.

use std::hint::black_box;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clock::{busy_wait_from, now_ns};
use crate::pipeline::MonitoringController;
use crate::probe::{
    AggregatingProbe, DirectDurationProbe, DirectFullProbe, FullRecordInterceptor, NoProbe, Probe,
    ProbeKind, Weaver,
};
use crate::record::{RecordText, Signature};

pub const MONITORED_SIGNATURE: &str =
    "public long bench.app.MonitoredClass.monitoredMethod(long, int)";

pub const DEFAULT_DEPTH: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadParams {
    /// Monitored calls per iteration; the leaf is at depth 1.
    #[serde(default = "default_depth")]
    pub depth: u32,
    #[serde(default)]
    pub busy_ns: u64,
}

fn default_depth() -> u32 {
    DEFAULT_DEPTH
}

impl Default for WorkloadParams {
    fn default() -> Self {
        Self {
            depth: DEFAULT_DEPTH,
            busy_ns: 0,
        }
    }
}

/// One call of the chain with the probe statements of `P` inlined.
#[inline(never)]
pub fn monitored_method<P: Probe>(probe: &P, busy_ns: u64, depth: u32) -> u64 {
    let _probe = probe.guard();
    if depth > 1 {
        black_box(monitored_method(probe, busy_ns, black_box(depth - 1)))
    } else {
        busy_wait_from(now_ns(), busy_ns)
    }
}

/// Same chain, but every call is routed through `weaver`.
#[inline(never)]
pub fn intercepted_method(weaver: &Weaver, signature: &Signature, busy_ns: u64, depth: u32) -> u64 {
    weaver.invoke(
        signature,
        &|(busy_ns, depth): (u64, u32)| {
            if depth > 1 {
                black_box(intercepted_method(
                    weaver,
                    signature,
                    busy_ns,
                    black_box(depth - 1),
                ))
            } else {
                busy_wait_from(now_ns(), busy_ns)
            }
        },
        (busy_ns, depth),
    )
}

/// The monitored application built for one probe kind.
pub enum InstrumentedWorkload {
    None(NoProbe),
    DirectFull(DirectFullProbe),
    DirectDuration(DirectDurationProbe),
    DirectAggregating(AggregatingProbe),
    InterceptorFull {
        weaver: Weaver,
        signature: Signature,
    },
}

impl InstrumentedWorkload {
    pub fn new(kind: ProbeKind, controller: Arc<MonitoringController>, window: u64) -> Self {
        let signature = RecordText::new(MONITORED_SIGNATURE).expect("valid signature");
        match kind {
            ProbeKind::None => Self::None(NoProbe),
            ProbeKind::DirectFull => Self::DirectFull(DirectFullProbe::new(controller, signature)),
            ProbeKind::DirectDuration => {
                Self::DirectDuration(DirectDurationProbe::new(controller, signature))
            }
            ProbeKind::DirectAggregating => {
                Self::DirectAggregating(AggregatingProbe::new(controller, signature, window))
            }
            ProbeKind::InterceptorFull => Self::InterceptorFull {
                weaver: Weaver::new(Arc::new(FullRecordInterceptor::new(controller))),
                signature,
            },
        }
    }

    pub fn kind(&self) -> ProbeKind {
        match self {
            Self::None(_) => ProbeKind::None,
            Self::DirectFull(_) => ProbeKind::DirectFull,
            Self::DirectDuration(_) => ProbeKind::DirectDuration,
            Self::DirectAggregating(_) => ProbeKind::DirectAggregating,
            Self::InterceptorFull { .. } => ProbeKind::InterceptorFull,
        }
    }

    /// Runs one root invocation.
    #[inline]
    pub fn call(&self, params: WorkloadParams) -> u64 {
        let WorkloadParams { depth, busy_ns } = params;
        match self {
            Self::None(p) => monitored_method(p, busy_ns, depth),
            Self::DirectFull(p) => monitored_method(p, busy_ns, depth),
            Self::DirectDuration(p) => monitored_method(p, busy_ns, depth),
            Self::DirectAggregating(p) => monitored_method(p, busy_ns, depth),
            Self::InterceptorFull { weaver, signature } => {
                intercepted_method(weaver, signature, busy_ns, depth)
            }
        }
    }

    /// Emits anything the probe still holds, such as a partial window.
    pub fn finish(&self) {
        if let Self::DirectAggregating(p) = self {
            p.flush();
        }
    }
}
