//! Deterministic scripted backends.
//!
//! Outputs depend only on the script and the call inputs. Injected latency
//! is spent on the backend's clock and drawn, like random faults, from a
//! seeded generator in call order.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    BackendError, CaptionScript, Captioner, FaultSpec, LatencyModel, MockSpec, Reasoner,
    ReasonerResponse, ReasonerScript, SummarizeRequest, Summarizer,
};
use crate::agents::DiscriminationRequest;
use crate::clock::SharedClock;
use crate::model::FrameRef;

/// Latency and fault bookkeeping shared by the three mocks.
struct Injector {
    latency: LatencyModel,
    faults: FaultSpec,
    clock: SharedClock,
    rng: ChaCha8Rng,
    calls: u64,
}

impl Injector {
    fn new(latency: LatencyModel, faults: FaultSpec, clock: SharedClock, seed: u64) -> Self {
        Injector {
            latency,
            faults,
            clock,
            rng: ChaCha8Rng::seed_from_u64(seed),
            calls: 0,
        }
    }

    /// Spends the call's latency and decides whether it fails.
    fn begin_call(&mut self, frame_id: Option<u64>) -> Result<(), BackendError> {
        let call = self.calls;
        self.calls += 1;
        let latency = self.latency.sample(&mut self.rng);
        let random_fault =
            self.faults.probability > 0.0 && self.rng.gen_bool(self.faults.probability);
        self.clock.wait(latency);
        let scripted_fault = self.faults.calls.contains(&call)
            || frame_id.is_some_and(|id| self.faults.frames.contains(&id));
        if random_fault || scripted_fault {
            return Err(BackendError::Timeout);
        }
        Ok(())
    }
}

pub struct MockCaptioner {
    script: CaptionScript,
    injector: Injector,
}

impl MockCaptioner {
    pub fn new(spec: MockSpec<CaptionScript>, clock: SharedClock, seed: u64) -> Self {
        MockCaptioner {
            script: spec.script,
            injector: Injector::new(spec.latency, spec.faults, clock, seed),
        }
    }

    pub fn scripted(script: CaptionScript, clock: SharedClock) -> Self {
        Self::new(
            MockSpec {
                script,
                ..MockSpec::default()
            },
            clock,
            0,
        )
    }

    fn lookup(&self, frame_id: u64) -> String {
        if let Some(f) = self.script.frames.iter().find(|f| f.frame_id == frame_id) {
            return f.text.clone();
        }
        if let Some(r) = self
            .script
            .ranges
            .iter()
            .find(|r| (r.from..r.to).contains(&frame_id))
        {
            return r.text.clone();
        }
        self.script
            .fallback
            .replace("{frame_id}", &frame_id.to_string())
    }
}

impl Captioner for MockCaptioner {
    fn caption(&mut self, frame: &FrameRef) -> Result<String, BackendError> {
        self.injector.begin_call(Some(frame.frame_id))?;
        let text = self.lookup(frame.frame_id);
        if text.trim().is_empty() {
            return Err(BackendError::Protocol(format!(
                "empty caption for frame {}",
                frame.frame_id
            )));
        }
        Ok(text)
    }
}

/// Summarizer whose output is `previous | descriptions joined by spaces`.
pub struct MockSummarizer {
    injector: Injector,
}

impl MockSummarizer {
    pub fn new(latency: LatencyModel, faults: FaultSpec, clock: SharedClock, seed: u64) -> Self {
        MockSummarizer {
            injector: Injector::new(latency, faults, clock, seed),
        }
    }

    pub fn rule(request: &SummarizeRequest) -> String {
        format!("{}|{}", request.previous, request.descriptions.join(" "))
    }
}

impl Summarizer for MockSummarizer {
    fn summarize(&mut self, request: &SummarizeRequest) -> Result<String, BackendError> {
        if request.prompt.trim().is_empty() {
            return Err(BackendError::Protocol("empty prompt".into()));
        }
        self.injector.begin_call(None)?;
        Ok(Self::rule(request))
    }
}

pub struct MockReasoner {
    script: ReasonerScript,
    injector: Injector,
}

impl MockReasoner {
    pub fn new(spec: MockSpec<ReasonerScript>, clock: SharedClock, seed: u64) -> Self {
        MockReasoner {
            script: spec.script,
            injector: Injector::new(spec.latency, spec.faults, clock, seed),
        }
    }

    pub fn scripted(script: ReasonerScript, clock: SharedClock) -> Self {
        Self::new(
            MockSpec {
                script,
                ..MockSpec::default()
            },
            clock,
            0,
        )
    }

    fn lookup(&self, request: &DiscriminationRequest) -> ReasonerResponse {
        let ids: BTreeSet<u64> = request.frames.iter().map(|f| f.frame_id).collect();
        if let Some(e) = self.script.entries.iter().find(|e| {
            e.summary == request.summary && e.frame_ids.iter().copied().collect::<BTreeSet<_>>() == ids
        }) {
            return e.response.clone();
        }
        if let Some(r) = self
            .script
            .rules
            .iter()
            .find(|r| request.summary.contains(&r.summary_contains))
        {
            return r.response.clone();
        }
        self.script.default.clone()
    }
}

impl Reasoner for MockReasoner {
    fn discriminate(
        &mut self,
        request: &DiscriminationRequest,
    ) -> Result<ReasonerResponse, BackendError> {
        self.injector.begin_call(None)?;
        Ok(self.lookup(request))
    }
}
