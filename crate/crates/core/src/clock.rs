//! Pipeline clocks.
//!
//! Agents and mock backends read time and spend injected latency through a
//! [`Clock`]. The threaded driver uses [`WallClock`]; the deterministic
//! driver gives each agent its own [`VirtualClock`] cursor.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use crate::stream::Speed;
use crate::time::{Span, Timestamp};

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
    /// Spends `span` of stream time.
    fn wait(&self, span: Span);
}

pub type SharedClock = Arc<dyn Clock>;

/// Stream time derived from wall time scaled by the replay speed.
#[derive(Debug)]
pub struct WallClock {
    origin: Instant,
    speed: f64,
}

impl WallClock {
    pub fn new(speed: Speed) -> Self {
        let speed = match speed {
            Speed::Factor(f) => f,
            Speed::Unbounded => 1.0,
        };
        WallClock {
            origin: Instant::now(),
            speed,
        }
    }

    pub fn starting_at(origin: Instant, speed: Speed) -> Self {
        WallClock {
            origin,
            ..WallClock::new(speed)
        }
    }
}

impl Clock for WallClock {
    fn now(&self) -> Timestamp {
        Timestamp::from_secs_f64(self.origin.elapsed().as_secs_f64() * self.speed)
    }

    fn wait(&self, span: Span) {
        if span > Span::ZERO {
            std::thread::sleep(std::time::Duration::from_secs_f64(
                span.as_secs_f64() / self.speed,
            ));
        }
    }
}

/// Manually driven time cursor; `wait` advances it instantly.
#[derive(Debug, Default)]
pub struct VirtualClock {
    cursor: AtomicI64,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&self, ts: Timestamp) {
        self.cursor.store(ts.as_micros(), Ordering::SeqCst);
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Timestamp {
        Timestamp::from_micros(self.cursor.load(Ordering::SeqCst))
    }

    fn wait(&self, span: Span) {
        self.cursor
            .fetch_add(span.as_micros().max(0), Ordering::SeqCst);
    }
}
