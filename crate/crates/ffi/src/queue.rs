use std::ffi::c_char;
use std::time::Duration;

use watchtower::bus::{BusError, Endpoint, Overflow, Payload, PayloadKind, Queue, QueuePolicy};
use watchtower::time::Timestamp;

use crate::error::{give_box, give_string, guard, non_null, non_null_mut, read_str, Failure, FfiResult, WtStatus};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WtOverflow {
    Block = 0,
    DropOldest = 1,
    LatestWins = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WtPayloadKind {
    CaptionBatch = 0,
    Summary = 1,
    Decision = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WtQueueStats {
    pub published: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

/// Bounded typed queue. Safe to share between threads.
pub struct WtQueue {
    inner: Queue,
}

fn bus_failure(e: BusError) -> Failure {
    let status = match e {
        BusError::Closed => WtStatus::Closed,
        BusError::NotReady => WtStatus::NotReady,
        BusError::Full => WtStatus::Full,
        BusError::KindMismatch { .. } => WtStatus::InvalidArgument,
        BusError::Transport(_) => WtStatus::Io,
    };
    Failure::new(status, e.to_string())
}

fn queue<'a>(q: *const WtQueue) -> FfiResult<&'a Queue> {
    Ok(&non_null(q, "queue")?.inner)
}

/// Creates a queue. `capacity` below 1 is raised to 1.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_queue_new(
    kind: WtPayloadKind,
    capacity: usize,
    overflow: WtOverflow,
    out: *mut *mut WtQueue,
) -> WtStatus {
    guard(|| {
        let kind = match kind {
            WtPayloadKind::CaptionBatch => PayloadKind::CaptionBatch,
            WtPayloadKind::Summary => PayloadKind::Summary,
            WtPayloadKind::Decision => PayloadKind::Decision,
        };
        let overflow = match overflow {
            WtOverflow::Block => Overflow::Block,
            WtOverflow::DropOldest => Overflow::DropOldest,
            WtOverflow::LatestWins => Overflow::LatestWins,
        };
        give_box(
            WtQueue {
                inner: Queue::new(kind, QueuePolicy { capacity, overflow }),
            },
            out,
        )
    })
}

/// Publishes a payload given as JSON (`{"kind": ..., "body": ...}`).
///
/// With `wait` zero a full `Block` queue returns `WT_STATUS_FULL`;
/// otherwise the call blocks until space frees up.
///
/// # Safety
/// `queue` must be live; `payload_json` NUL-terminated; `seq_out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn wt_queue_publish_json(
    queue_ptr: *const WtQueue,
    payload_json: *const c_char,
    produced_ts: f64,
    wait: bool,
    seq_out: *mut u64,
) -> WtStatus {
    guard(|| {
        let q = queue(queue_ptr)?;
        let payload: Payload = serde_json::from_str(read_str(payload_json, "payload_json")?)
            .map_err(|e| Failure::invalid(format!("payload: {e}")))?;
        if !produced_ts.is_finite() {
            return Err(Failure::invalid("produced_ts must be finite"));
        }
        let ts = Timestamp::from_secs_f64(produced_ts);
        let seq = if wait { q.publish(payload, ts) } else { q.try_publish(payload, ts) }.map_err(bus_failure)?;
        if let Some(s) = seq_out.as_mut() {
            *s = seq;
        }
        Ok(())
    })
}

/// Takes the next envelope as JSON, waiting up to `timeout_ms`
/// (negative waits indefinitely).
///
/// # Safety
/// `queue` must be live; `json_out` writable.
#[no_mangle]
pub unsafe extern "C" fn wt_queue_consume_json(
    queue_ptr: *const WtQueue,
    timeout_ms: i64,
    json_out: *mut *mut c_char,
) -> WtStatus {
    guard(|| {
        let q = queue(queue_ptr)?;
        let env = match timeout_ms {
            t if t < 0 => q.consume(),
            0 => q.try_consume(),
            t => q.consume_timeout(Duration::from_millis(t as u64)),
        }
        .map_err(bus_failure)?;
        give_string(String::from_utf8(env.to_canonical_json()).expect("JSON is UTF-8"), json_out)
    })
}

/// # Safety
/// `queue` must be live; `stats_out` writable.
#[no_mangle]
pub unsafe extern "C" fn wt_queue_stats(queue_ptr: *const WtQueue, stats_out: *mut WtQueueStats) -> WtStatus {
    guard(|| {
        let s = queue(queue_ptr)?.stats();
        *non_null_mut(stats_out, "stats_out")? = WtQueueStats {
            published: s.published,
            delivered: s.delivered,
            dropped: s.dropped,
            in_flight: s.in_flight,
        };
        Ok(())
    })
}

/// Closes the queue; pending items stay consumable.
///
/// # Safety
/// `queue` must be live.
#[no_mangle]
pub unsafe extern "C" fn wt_queue_close(queue_ptr: *const WtQueue) -> WtStatus {
    guard(|| {
        queue(queue_ptr)?.close();
        Ok(())
    })
}

/// # Safety
/// `queue` must come from `wt_queue_new`, not be freed, and have no
/// other thread still using it.
#[no_mangle]
pub unsafe extern "C" fn wt_queue_free(queue_ptr: *mut WtQueue) {
    if !queue_ptr.is_null() {
        drop(Box::from_raw(queue_ptr));
    }
}
