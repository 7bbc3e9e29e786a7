use std::collections::VecDeque;
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};

use super::{BusError, Endpoint, Envelope, Overflow, Payload, PayloadKind, QueueName, QueuePolicy};
use crate::time::Timestamp;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueStats {
    pub published: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

impl QueueStats {
    pub fn is_conserved(&self) -> bool {
        self.published == self.delivered + self.dropped + self.in_flight
    }
}

#[derive(Debug)]
struct Inner {
    items: VecDeque<Envelope>,
    next_seq: u64,
    closed: bool,
    published: u64,
    delivered: u64,
    dropped: u64,
}

/// In-process bounded queue with a fixed payload kind and overflow policy.
#[derive(Debug)]
pub struct Queue {
    name: Option<QueueName>,
    kind: PayloadKind,
    policy: QueuePolicy,
    inner: Mutex<Inner>,
    not_empty: Condvar,
    not_full: Condvar,
}

impl Queue {
    pub fn new(kind: PayloadKind, policy: QueuePolicy) -> Self {
        let policy = QueuePolicy {
            capacity: policy.capacity.max(1),
            ..policy
        };
        Queue {
            name: None,
            kind,
            policy,
            inner: Mutex::new(Inner {
                items: VecDeque::with_capacity(policy.capacity.min(1024)),
                next_seq: 0,
                closed: false,
                published: 0,
                delivered: 0,
                dropped: 0,
            }),
            not_empty: Condvar::new(),
            not_full: Condvar::new(),
        }
    }

    pub fn named(name: QueueName, policy: QueuePolicy) -> Self {
        Queue {
            name: Some(name),
            ..Queue::new(name.kind(), policy)
        }
    }

    pub fn name(&self) -> Option<QueueName> {
        self.name
    }

    pub fn kind(&self) -> PayloadKind {
        self.kind
    }

    pub fn policy(&self) -> QueuePolicy {
        self.policy
    }

    pub fn stats(&self) -> QueueStats {
        let inner = self.inner.lock();
        QueueStats {
            published: inner.published,
            delivered: inner.delivered,
            dropped: inner.dropped,
            in_flight: inner.items.len() as u64,
        }
    }

    pub fn len(&self) -> usize {
        self.inner.lock().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_closed(&self) -> bool {
        self.inner.lock().closed
    }

    fn check_kind(&self, payload: &Payload) -> Result<(), BusError> {
        if payload.kind() != self.kind {
            return Err(BusError::KindMismatch {
                expected: self.kind,
                got: payload.kind(),
            });
        }
        Ok(())
    }

    fn enqueue(&self, inner: &mut Inner, payload: Payload, produced_ts: Timestamp) -> u64 {
        match self.policy.overflow {
            Overflow::LatestWins => {
                inner.dropped += inner.items.len() as u64;
                inner.items.clear();
            }
            Overflow::DropOldest => {
                while inner.items.len() >= self.policy.capacity {
                    inner.items.pop_front();
                    inner.dropped += 1;
                }
            }
            Overflow::Block => debug_assert!(inner.items.len() < self.policy.capacity),
        }
        let seq = inner.next_seq;
        inner.next_seq += 1;
        inner.published += 1;
        inner.items.push_back(Envelope {
            seq,
            produced_ts,
            payload,
        });
        self.not_empty.notify_one();
        seq
    }

    /// Publishes without waiting; a full `Block` queue returns `Full`.
    pub fn try_publish(&self, payload: Payload, produced_ts: Timestamp) -> Result<u64, BusError> {
        self.check_kind(&payload)?;
        let mut inner = self.inner.lock();
        if inner.closed {
            return Err(BusError::Closed);
        }
        if self.policy.overflow == Overflow::Block && inner.items.len() >= self.policy.capacity {
            return Err(BusError::Full);
        }
        Ok(self.enqueue(&mut inner, payload, produced_ts))
    }

    /// Returns the next item without waiting.
    pub fn try_consume(&self) -> Result<Envelope, BusError> {
        let mut inner = self.inner.lock();
        self.pop(&mut inner)
    }

    fn pop(&self, inner: &mut Inner) -> Result<Envelope, BusError> {
        match inner.items.pop_front() {
            Some(env) => {
                inner.delivered += 1;
                self.not_full.notify_one();
                Ok(env)
            }
            None if inner.closed => Err(BusError::Closed),
            None => Err(BusError::NotReady),
        }
    }

    fn consume_until(&self, deadline: Option<Instant>) -> Result<Envelope, BusError> {
        let mut inner = self.inner.lock();
        loop {
            match self.pop(&mut inner) {
                Err(BusError::NotReady) => {}
                other => return other,
            }
            match deadline {
                Some(d) => {
                    if self.not_empty.wait_until(&mut inner, d).timed_out() {
                        return self.pop(&mut inner);
                    }
                }
                None => self.not_empty.wait(&mut inner),
            }
        }
    }
}

impl Endpoint for Queue {
    fn publish(&self, payload: Payload, produced_ts: Timestamp) -> Result<u64, BusError> {
        self.check_kind(&payload)?;
        let mut inner = self.inner.lock();
        loop {
            if inner.closed {
                return Err(BusError::Closed);
            }
            if self.policy.overflow != Overflow::Block || inner.items.len() < self.policy.capacity {
                return Ok(self.enqueue(&mut inner, payload, produced_ts));
            }
            self.not_full.wait(&mut inner);
        }
    }

    fn consume(&self) -> Result<Envelope, BusError> {
        self.consume_until(None)
    }

    fn consume_timeout(&self, timeout: Duration) -> Result<Envelope, BusError> {
        self.consume_until(Some(Instant::now() + timeout))
    }

    fn close(&self) {
        let mut inner = self.inner.lock();
        inner.closed = true;
        self.not_empty.notify_all();
        self.not_full.notify_all();
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{Decision, Summary, DECISION_SCHEMA_VERSION};

    fn summary(seq: u64) -> Payload {
        Payload::Summary(Summary {
            summary_seq: seq,
            text: format!("S{seq}"),
            prev_seq: seq as i64 - 1,
            source_window_seq: seq,
            created_ts: Timestamp::ZERO,
            carried: false,
        })
    }

    fn text(env: &Envelope) -> String {
        match &env.payload {
            Payload::Summary(s) => s.text.clone(),
            _ => unreachable!(),
        }
    }

    fn policy(capacity: usize, overflow: Overflow) -> QueuePolicy {
        QueuePolicy { capacity, overflow }
    }

    #[test]
    fn latest_wins_delivers_only_freshest() {
        let q = Queue::new(PayloadKind::Summary, policy(1, Overflow::LatestWins));
        for i in 0..3 {
            q.publish(summary(i), Timestamp::ZERO).unwrap();
        }
        let env = q.try_consume().unwrap();
        assert_eq!(text(&env), "S2");
        assert_eq!(env.seq, 2);
        assert_eq!(q.stats().dropped, 2);
        assert_eq!(q.try_consume(), Err(BusError::NotReady));
        assert!(q.stats().is_conserved());
    }

    #[test]
    fn fifo_order() {
        let q = Queue::new(PayloadKind::Summary, policy(4, Overflow::Block));
        q.publish(summary(0), Timestamp::ZERO).unwrap();
        q.publish(summary(1), Timestamp::ZERO).unwrap();
        assert_eq!(text(&q.consume().unwrap()), "S0");
        assert_eq!(text(&q.consume().unwrap()), "S1");
    }

    #[test]
    fn empty_queue_polls_not_ready_then_closed() {
        let q = Queue::new(PayloadKind::Summary, policy(1, Overflow::Block));
        assert_eq!(q.try_consume(), Err(BusError::NotReady));
        assert_eq!(
            q.consume_timeout(Duration::from_millis(10)),
            Err(BusError::NotReady)
        );
        q.close();
        assert_eq!(q.consume(), Err(BusError::Closed));
        assert_eq!(q.publish(summary(0), Timestamp::ZERO), Err(BusError::Closed));
    }

    #[test]
    fn close_still_drains_pending_items() {
        let q = Queue::new(PayloadKind::Summary, policy(2, Overflow::Block));
        q.publish(summary(0), Timestamp::ZERO).unwrap();
        q.close();
        assert_eq!(text(&q.consume().unwrap()), "S0");
        assert_eq!(q.consume(), Err(BusError::Closed));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let q = Queue::named(
            QueueName::Q1Captions,
            QueuePolicy::default_for(QueueName::Q1Captions),
        );
        let decision = Payload::Decision(Decision {
            schema_version: DECISION_SCHEMA_VERSION,
            stream_id: "s".into(),
            decision_id: 0,
            summary_seq: 0,
            frame_ids: vec![],
            subject: String::new(),
            location: String::new(),
            cause: String::new(),
            is_anomalous: false,
            score: 0.0,
            emitted_ts: Timestamp::ZERO,
        });
        assert_eq!(
            q.publish(decision, Timestamp::ZERO),
            Err(BusError::KindMismatch {
                expected: PayloadKind::CaptionBatch,
                got: PayloadKind::Decision
            })
        );
        assert_eq!(q.stats().published, 0);
    }

    #[test]
    fn block_parks_producer_until_consume() {
        let q = Arc::new(Queue::new(PayloadKind::Summary, policy(2, Overflow::Block)));
        q.publish(summary(0), Timestamp::ZERO).unwrap();
        q.publish(summary(1), Timestamp::ZERO).unwrap();
        assert_eq!(q.try_publish(summary(2), Timestamp::ZERO), Err(BusError::Full));

        let producer = {
            let q = Arc::clone(&q);
            std::thread::spawn(move || q.publish(summary(2), Timestamp::ZERO))
        };
        std::thread::sleep(Duration::from_millis(50));
        assert!(!producer.is_finished());
        assert_eq!(q.stats().published, 2);
        assert_eq!(text(&q.consume().unwrap()), "S0");
        assert_eq!(producer.join().unwrap(), Ok(2));
        assert_eq!(q.len(), 2);
    }

    #[test]
    fn drop_oldest_evicts_front() {
        let q = Queue::new(PayloadKind::Summary, policy(2, Overflow::DropOldest));
        for i in 0..5 {
            q.publish(summary(i), Timestamp::ZERO).unwrap();
        }
        assert_eq!(text(&q.try_consume().unwrap()), "S3");
        assert_eq!(text(&q.try_consume().unwrap()), "S4");
        let stats = q.stats();
        assert_eq!((stats.published, stats.delivered, stats.dropped), (5, 2, 3));
    }
}
