//! One thread per agent, paced by wall time.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use tracing::{info, warn};

use super::{PipelineError, RunCounts, Setup};
use crate::agents::Agent3Outcome;
use crate::bus::wire::{QueueHost, RemoteQueue};
use crate::bus::{BusError, Endpoint, Payload, Queue, QueueName};
use crate::clock::{SharedClock, WallClock};
use crate::model::FrameRef;
use crate::sink::DecisionSink;
use crate::stream::{open_stream, Speed};
use crate::time::Timestamp;
use crate::windowing::{ClosedWindow, WindowTracker};

const POLL: Duration = Duration::from_millis(5);

/// Producer and consumer handles for one queue.
struct Link {
    producer: Arc<dyn Endpoint>,
    consumer: Arc<dyn Endpoint>,
    _host: Option<QueueHost>,
}

fn link(setup: &Setup, name: QueueName, queue: &Arc<Queue>, wire: bool) -> Result<Link, PipelineError> {
    if !wire {
        let q: Arc<dyn Endpoint> = queue.clone();
        return Ok(Link {
            producer: q.clone(),
            consumer: q,
            _host: None,
        });
    }
    let wire_err = |e: std::io::Error| PipelineError::Wire(format!("{name}: {e}"));
    let host = QueueHost::bind(setup.config.bus.wire.addr(name), queue.clone()).map_err(wire_err)?;
    info!(queue = %name, addr = %host.local_addr(), "serving queue");
    let producer = RemoteQueue::connect(host.local_addr()).map_err(wire_err)?;
    let consumer = RemoteQueue::connect(host.local_addr()).map_err(wire_err)?;
    Ok(Link {
        producer: Arc::new(producer),
        consumer: Arc::new(consumer),
        _host: Some(host),
    })
}

#[derive(Default)]
struct A1Counts {
    batches: u64,
    gaps: u64,
}

#[derive(Default)]
struct A2Counts {
    summaries: u64,
    carried: u64,
}

/// Replays the stream at `speed` with a worker thread per agent.
///
/// Setting `stop` ends the replay early; work already handed to the agents
/// is finished and every produced decision reaches `sink`.
pub fn run_threaded(
    setup: &Setup,
    speed: Speed,
    wire: bool,
    stop: Arc<AtomicBool>,
    sink: &mut dyn DecisionSink,
) -> Result<RunCounts, PipelineError> {
    let cfg = &setup.config;
    let clock: SharedClock = Arc::new(WallClock::new(speed));
    let queues = [
        Arc::new(Queue::named(QueueName::Q1Captions, cfg.bus.q1)),
        Arc::new(Queue::named(QueueName::Q2Summaries, cfg.bus.q2)),
        Arc::new(Queue::named(QueueName::Q3Decisions, cfg.bus.q3)),
    ];
    let q1 = link(setup, QueueName::Q1Captions, &queues[0], wire)?;
    let q2 = link(setup, QueueName::Q2Summaries, &queues[1], wire)?;
    let q3 = link(setup, QueueName::Q3Decisions, &queues[2], wire)?;

    let mut tracker = WindowTracker::new(cfg.window.clone())
        .map_err(|e| crate::config::ConfigError::invalid("window", e.to_string()))?;
    let source = open_stream(setup.manifest.clone(), speed)?;
    let (window_tx, window_rx) = mpsc::channel::<ClosedWindow>();
    let (frame_tx, frame_rx) = mpsc::channel::<FrameRef>();

    let mut a1 = setup.caption_agent(clock.clone());
    let mut a2 = setup.summary_agent(clock.clone());
    let mut a3 = setup.discrimination_agent(clock.clone());
    let retrigger = cfg.agents.retrigger;

    let mut counts = RunCounts::default();
    let mut sink_error = None;

    thread::scope(|s| {
        let source_stop = Arc::clone(&stop);
        let source_thread = s.spawn(move || {
            let (mut frames, mut windows) = (0u64, 0u64);
            for frame in source {
                if source_stop.load(Ordering::SeqCst) {
                    break;
                }
                frames += 1;
                let _ = frame_tx.send(frame.clone());
                if let Some(w) = tracker.push(frame) {
                    windows += 1;
                    let _ = window_tx.send(w);
                }
            }
            (frames, windows)
        });

        let a1_stop = Arc::clone(&stop);
        let (q1_out, clock1) = (q1.producer.clone(), clock.clone());
        let a1_thread = s.spawn(move || {
            let mut c = A1Counts::default();
            for w in window_rx {
                if a1_stop.load(Ordering::SeqCst) {
                    continue;
                }
                let batch = a1
                    .step(w.window_seq, &w.frames)
                    .expect("tracker emits samples_per_window frames");
                c.gaps += batch.gaps.len() as u64;
                match q1_out.publish(Payload::CaptionBatch(batch), clock1.now()) {
                    Ok(_) => c.batches += 1,
                    Err(e) => {
                        warn!(error = %e, "Q1 publish failed");
                        break;
                    }
                }
            }
            q1_out.close();
            c
        });

        let (q1_in, q2_out, clock2) = (q1.consumer.clone(), q2.producer.clone(), clock.clone());
        let a2_thread = s.spawn(move || {
            let mut c = A2Counts::default();
            loop {
                let batch = match q1_in.consume() {
                    Ok(env) => env.payload.into_caption_batch().expect("Q1 carries batches"),
                    Err(BusError::Closed) => break,
                    Err(e) => {
                        warn!(error = %e, "Q1 consume failed");
                        break;
                    }
                };
                let step = match a2.step(&batch) {
                    Ok(step) => step,
                    Err(e) => {
                        warn!(error = %e, "batch rejected");
                        continue;
                    }
                };
                c.summaries += 1;
                c.carried += step.summary.carried as u64;
                if let Err(e) = q2_out.publish(Payload::Summary(step.summary), clock2.now()) {
                    warn!(error = %e, "Q2 publish failed");
                    break;
                }
            }
            q2_out.close();
            c
        });

        let (q2_in, q3_out, clock3) = (q2.consumer.clone(), q3.producer.clone(), clock.clone());
        let a3_thread = s.spawn(move || {
            let mut suppressed = 0u64;
            let mut next_tick: Option<Timestamp> = retrigger.map(|p| Timestamp::ZERO + p);
            let drain = |a3: &mut crate::agents::DiscriminationAgent| {
                while let Ok(f) = frame_rx.try_recv() {
                    a3.observe(f);
                }
            };
            loop {
                drain(&mut a3);
                let run = match q2_in.consume_timeout(POLL) {
                    Ok(env) => {
                        a3.offer_summary(env.payload.into_summary().expect("Q2 carries summaries"));
                        true
                    }
                    Err(BusError::NotReady) => match (next_tick, retrigger) {
                        (Some(t), Some(p)) if clock3.now() >= t => {
                            next_tick = Some(t + p);
                            true
                        }
                        _ => false,
                    },
                    Err(BusError::Closed) => break,
                    Err(e) => {
                        warn!(error = %e, "Q2 consume failed");
                        break;
                    }
                };
                if !run {
                    continue;
                }
                drain(&mut a3);
                match a3.step() {
                    Agent3Outcome::Decision(d) => {
                        if let Err(e) = q3_out.publish(Payload::Decision(d), clock3.now()) {
                            warn!(error = %e, "Q3 publish failed");
                            break;
                        }
                    }
                    Agent3Outcome::Fault(f) => {
                        suppressed += 1;
                        warn!(stage = %f.stage, message = %f.message, "fault event");
                    }
                    Agent3Outcome::NotReady => {}
                }
            }
            q3_out.close();
            suppressed
        });

        loop {
            match q3.consumer.consume() {
                Ok(env) => {
                    let d = env.payload.into_decision().expect("Q3 carries decisions");
                    counts.decisions += 1;
                    if sink_error.is_none() {
                        if let Err(e) = sink.emit(&d) {
                            sink_error = Some(e);
                            stop.store(true, Ordering::SeqCst);
                        }
                    }
                }
                Err(BusError::Closed) => break,
                Err(e) => {
                    warn!(error = %e, "Q3 consume failed");
                    break;
                }
            }
        }

        let joined = (
            source_thread.join(),
            a1_thread.join(),
            a2_thread.join(),
            a3_thread.join(),
        );
        match joined {
            (Ok((frames, windows)), Ok(c1), Ok(c2), Ok(suppressed)) => {
                counts.frames = frames;
                counts.windows = windows;
                counts.caption_batches = c1.batches;
                counts.caption_gaps = c1.gaps;
                counts.summaries = c2.summaries;
                counts.carried_summaries = c2.carried;
                counts.suppressed_decisions = suppressed;
                Ok(())
            }
            (Err(_), ..) => Err(PipelineError::Worker("source")),
            (_, Err(_), ..) => Err(PipelineError::Worker("agent1")),
            (_, _, Err(_), _) => Err(PipelineError::Worker("agent2")),
            (.., Err(_)) => Err(PipelineError::Worker("agent3")),
        }
    })?;

    if let Some(e) = sink_error {
        return Err(PipelineError::Sink(e));
    }
    counts.q1 = queues[0].stats();
    counts.q2 = queues[1].stats();
    counts.q3 = queues[2].stats();
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::entity::EntityVocabulary;
    use crate::model::Decision;
    use crate::stream::StreamManifest;

    fn setup() -> Setup {
        Setup::new(
            Config::default(),
            StreamManifest::synthetic("cam", 30.0, 300),
            EntityVocabulary::parse("person\n").unwrap(),
        )
    }

    #[test]
    fn threaded_run_matches_window_arithmetic() {
        let mut out: Vec<Decision> = Vec::new();
        let counts = run_threaded(
            &setup(),
            Speed::Factor(50.0),
            false,
            Arc::new(AtomicBool::new(false)),
            &mut out,
        )
        .unwrap();
        assert_eq!((counts.frames, counts.windows, counts.summaries), (300, 3, 3));
        assert_eq!(counts.caption_batches, 3);
        assert_eq!(out.len() as u64, counts.decisions);
        assert!(counts.decisions >= 1 && counts.decisions <= 3);
        assert!(counts.q1.is_conserved() && counts.q2.is_conserved() && counts.q3.is_conserved());
    }

    #[test]
    fn wire_mode_delivers_same_summaries() {
        let mut out: Vec<Decision> = Vec::new();
        let counts = run_threaded(
            &setup(),
            Speed::Factor(50.0),
            true,
            Arc::new(AtomicBool::new(false)),
            &mut out,
        )
        .unwrap();
        assert_eq!(counts.summaries, 3);
        assert_eq!(out.len() as u64, counts.decisions);
    }

    #[test]
    fn stop_flag_ends_run_early() {
        let stop = Arc::new(AtomicBool::new(true));
        let mut out: Vec<Decision> = Vec::new();
        let counts = run_threaded(&setup(), Speed::Factor(1.0), false, stop, &mut out).unwrap();
        assert_eq!(counts.frames, 0);
        assert!(out.is_empty());
    }
}
