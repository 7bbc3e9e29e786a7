//! Pipeline configuration file.
//!
//! One TOML document drives `run` and `simulate`. Relative paths are
//! resolved against the directory holding the config file. Remote
//! endpoints can be overridden through the environment:
//!
//! | variable                        | replaces                       |
//! |---------------------------------|--------------------------------|
//! | `WATCHTOWER_CAPTIONER_ENDPOINT` | `backends.captioner.endpoint`  |
//! | `WATCHTOWER_SUMMARIZER_ENDPOINT`| `backends.summarizer.endpoint` |
//! | `WATCHTOWER_REASONER_ENDPOINT`  | `backends.reasoner.endpoint`   |
//!
//! Setting a variable switches that backend to remote mode.
//!
//! ```toml
//! [stream]
//! manifest = "stream.json"
//! speed = "inf"          # or a positive multiplier
//! seed = 7
//!
//! [window]               # all optional
//! window_len = 100
//! stride = 70
//! samples_per_window = 5
//! adjacent_count = 8
//! adjacent_spacing = 0.1
//!
//! [filter]
//! vocab = "vocab.txt"
//! tau = 3
//! screen_rule = "prefix_cut"   # or "literal"
//! horizon = 10                 # default 2 * samples_per_window
//!
//! [agents]
//! threshold = 0.5
//! cold_start = "empty_history" # or "wait"
//! retrigger = 1.0              # seconds; omit to disable
//!
//! [bus.Q2_summaries]
//! capacity = 1
//! overflow = "latest_wins"
//!
//! [backends.reasoner]
//! mode = "remote"
//! endpoint = "http://127.0.0.1:8000"
//! timeout = 2.0
//! retries = 1
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{ColdStart, DEFAULT_THRESHOLD};
use crate::backends::{
    BackendSpec, CaptionerSpec, ReasonerSpec, RemoteSpec, SummarizerSpec,
};
use crate::bus::{QueueName, QueuePolicy};
use crate::entity::{ScreenRule, DEFAULT_TAU};
use crate::stream::Speed;
use crate::time::Span;
use crate::windowing::WindowConfig;

pub const ENV_CAPTIONER: &str = "WATCHTOWER_CAPTIONER_ENDPOINT";
pub const ENV_SUMMARIZER: &str = "WATCHTOWER_SUMMARIZER_ENDPOINT";
pub const ENV_REASONER: &str = "WATCHTOWER_REASONER_ENDPOINT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

/// Backend validation result: offending field and reason.
type FieldCheck<'a> = Result<(), (&'a str, String)>;

impl ConfigError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Dotted path of the offending field, when known.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Parse { path, .. } => Some(path),
            ConfigError::Invalid { field, .. } => Some(field),
            ConfigError::Io { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    pub speed: Speed,
    pub seed: u64,
}

impl Default for StreamSection {
    fn default() -> Self {
        StreamSection {
            manifest: None,
            speed: Speed::Unbounded,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
    pub tau: u32,
    pub screen_rule: ScreenRule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection {
            vocab: None,
            tau: DEFAULT_TAU,
            screen_rule: ScreenRule::default(),
            horizon: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentsSection {
    pub threshold: f64,
    pub cold_start: ColdStart,
    /// Period of extra Agent 3 runs between summaries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrigger: Option<Span>,
}

impl Default for AgentsSection {
    fn default() -> Self {
        AgentsSection {
            threshold: DEFAULT_THRESHOLD,
            cold_start: ColdStart::default(),
            retrigger: None,
        }
    }
}

/// Loopback addresses used when queues are served over the wire protocol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WireSection {
    #[serde(rename = "Q1_captions")]
    pub q1: String,
    #[serde(rename = "Q2_summaries")]
    pub q2: String,
    #[serde(rename = "Q3_decisions")]
    pub q3: String,
}

impl Default for WireSection {
    fn default() -> Self {
        let any = "127.0.0.1:0".to_string();
        WireSection {
            q1: any.clone(),
            q2: any.clone(),
            q3: any,
        }
    }
}

impl WireSection {
    pub fn addr(&self, name: QueueName) -> &str {
        match name {
            QueueName::Q1Captions => &self.q1,
            QueueName::Q2Summaries => &self.q2,
            QueueName::Q3Decisions => &self.q3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BusSection {
    #[serde(rename = "Q1_captions")]
    pub q1: QueuePolicy,
    #[serde(rename = "Q2_summaries")]
    pub q2: QueuePolicy,
    #[serde(rename = "Q3_decisions")]
    pub q3: QueuePolicy,
    pub wire: WireSection,
}

impl Default for BusSection {
    fn default() -> Self {
        BusSection {
            q1: QueuePolicy::default_for(QueueName::Q1Captions),
            q2: QueuePolicy::default_for(QueueName::Q2Summaries),
            q3: QueuePolicy::default_for(QueueName::Q3Decisions),
            wire: WireSection::default(),
        }
    }
}

impl BusSection {
    pub fn policy(&self, name: QueueName) -> QueuePolicy {
        match name {
            QueueName::Q1Captions => self.q1,
            QueueName::Q2Summaries => self.q2,
            QueueName::Q3Decisions => self.q3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendsSection {
    pub captioner: CaptionerSpec,
    pub summarizer: SummarizerSpec,
    pub reasoner: ReasonerSpec,
}

impl BackendsSection {
    pub fn any_remote(&self) -> bool {
        self.captioner.is_remote() || self.summarizer.is_remote() || self.reasoner.is_remote()
    }

    /// Remote endpoints with their config field names.
    pub fn remote_endpoints(&self) -> Vec<(&'static str, &RemoteSpec)> {
        let mut out = Vec::new();
        if let BackendSpec::Remote(r) = &self.captioner {
            out.push(("backends.captioner.endpoint", r));
        }
        if let BackendSpec::Remote(r) = &self.summarizer {
            out.push(("backends.summarizer.endpoint", r));
        }
        if let BackendSpec::Remote(r) = &self.reasoner {
            out.push(("backends.reasoner.endpoint", r));
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptsSection {
    /// Directory with `agent1.txt`..`agent3.txt`; shipped templates otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Decision JSONL destination; stdout when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decisions: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub stream: StreamSection,
    pub window: WindowConfig,
    pub filter: FilterSection,
    pub agents: AgentsSection,
    pub bus: BusSection,
    pub backends: BackendsSection,
    pub prompts: PromptsSection,
    pub output: OutputSection,
}

impl Config {
    /// Parses TOML; errors carry the dotted path of the offending field.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::Parse {
                path: if path == "." { "<root>".into() } else { path },
                message: e.into_inner().message().trim().to_string(),
            }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads, resolves paths, applies environment overrides and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.apply_env(|k| std::env::var(k).ok());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.stream.manifest);
        fix(&mut self.filter.vocab);
        fix(&mut self.prompts.dir);
        fix(&mut self.output.decisions);
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        fn set<S>(spec: &mut BackendSpec<S>, endpoint: String) {
            match spec {
                BackendSpec::Remote(r) => r.endpoint = endpoint,
                BackendSpec::Mock(_) => {
                    *spec = BackendSpec::Remote(RemoteSpec {
                        endpoint,
                        timeout: Span::from_secs_f64(2.0),
                        retries: 1,
                    })
                }
            }
        }
        if let Some(e) = lookup(ENV_CAPTIONER) {
            set(&mut self.backends.captioner, e);
        }
        if let Some(e) = lookup(ENV_SUMMARIZER) {
            set(&mut self.backends.summarizer, e);
        }
        if let Some(e) = lookup(ENV_REASONER) {
            set(&mut self.backends.reasoner, e);
        }
    }

    /// Counting horizon in captions.
    pub fn horizon(&self) -> usize {
        self.filter
            .horizon
            .unwrap_or(2 * self.window.samples_per_window)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match &self.filter.vocab {
            None => return Err(ConfigError::invalid("filter.vocab", "vocabulary file is required")),
            Some(p) if !p.is_file() => {
                return Err(ConfigError::invalid(
                    "filter.vocab",
                    format!("no such file {}", p.display()),
                ))
            }
            _ => {}
        }
        if let Some(p) = &self.stream.manifest {
            if !p.is_file() {
                return Err(ConfigError::invalid(
                    "stream.manifest",
                    format!("no such file {}", p.display()),
                ));
            }
        }
        if let Some(p) = &self.prompts.dir {
            if !p.is_dir() {
                return Err(ConfigError::invalid(
                    "prompts.dir",
                    format!("no such directory {}", p.display()),
                ));
            }
        }
        self.validate_values()
    }

    /// Checks everything that does not touch the filesystem.
    pub fn validate_values(&self) -> Result<(), ConfigError> {
        self.window
            .validate()
            .map_err(|(field, e)| ConfigError::invalid(format!("window.{field}"), e.to_string()))?;
        if self.filter.horizon == Some(0) {
            return Err(ConfigError::invalid("filter.horizon", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.agents.threshold) {
            return Err(ConfigError::invalid("agents.threshold", "must be within [0, 1]"));
        }
        if let Some(r) = self.agents.retrigger {
            if r <= Span::ZERO {
                return Err(ConfigError::invalid("agents.retrigger", "must be > 0"));
            }
        }
        for name in [QueueName::Q1Captions, QueueName::Q2Summaries, QueueName::Q3Decisions] {
            if self.bus.policy(name).capacity == 0 {
                return Err(ConfigError::invalid(format!("bus.{name}.capacity"), "must be >= 1"));
            }
        }
        let roles: [(&str, FieldCheck); 3] = [
            ("captioner", self.backends.captioner.validate()),
            ("summarizer", self.backends.summarizer.validate()),
            ("reasoner", self.backends.reasoner.validate()),
        ];
        for (role, result) in roles {
            if let Err((field, msg)) = result {
                return Err(ConfigError::invalid(format!("backends.{role}.{field}"), msg));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{LatencyModel, MockSpec};
    use crate::bus::Overflow;

    const FULL: &str = r#"
[stream]
manifest = "stream.json"
speed = 10.0
seed = 7

[window]
stride = 50

[filter]
vocab = "vocab.txt"
tau = 2
screen_rule = "literal"

[agents]
threshold = 0.6
cold_start = "wait"
retrigger = 1.5

[bus.Q3_decisions]
capacity = 16
overflow = "drop_oldest"

[backends.captioner]
mode = "mock"
latency = { kind = "uniform", lo = 0.1, hi = 0.2 }
script.fallback = "frame {frame_id}"
script.ranges = [{ from = 60, to = 300, text = "a man conceals a bottle" }]

[backends.summarizer]
mode = "mock"
latency = { kind = "fixed", secs = 0.7 }
faults = { probability = 0.25 }

[backends.reasoner]
mode = "remote"
endpoint = "http://127.0.0.1:9000"
"#;

    #[test]
    fn parses_full_document() {
        let cfg = Config::parse(FULL).unwrap();
        assert_eq!(cfg.stream.speed, Speed::Factor(10.0));
        assert_eq!(cfg.window.stride, 50);
        assert_eq!(cfg.window.window_len, 100);
        assert_eq!(cfg.filter.screen_rule, ScreenRule::Literal);
        assert_eq!(cfg.agents.retrigger, Some(Span::from_millis(1500)));
        assert_eq!(cfg.bus.q3.capacity, 16);
        assert_eq!(cfg.bus.q2.overflow, Overflow::LatestWins);
        let BackendSpec::Remote(r) = &cfg.backends.reasoner else {
            panic!("reasoner should be remote")
        };
        assert_eq!(r.timeout, Span::from_secs_f64(2.0));
        assert_eq!(r.retries, 1);
        let BackendSpec::Mock(MockSpec { latency, .. }) = &cfg.backends.summarizer else {
            panic!()
        };
        assert_eq!(*latency, LatencyModel::fixed(0.7));
        cfg.validate_values().unwrap();
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = Config::parse(FULL).unwrap();
        let again = Config::parse(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        let default = Config::default();
        assert_eq!(Config::parse(&default.to_toml()).unwrap(), default);
    }

    #[test]
    fn errors_name_field_paths() {
        let err = Config::parse("[window]\nstride = \"x\"\n").unwrap_err();
        assert_eq!(err.field(), Some("window.stride"));
        let err = Config::parse("[agents]\nbogus = 1\n").unwrap_err();
        assert!(err.field().unwrap().starts_with("agents"), "{err}");
        let err = Config::parse("[window]\nstride = 0\n")
            .unwrap()
            .validate_values()
            .unwrap_err();
        assert_eq!(err.field(), Some("window.stride"));
        let err = Config::parse("[backends.summarizer]\nmode = \"mock\"\nfaults = { probability = 1.5 }\n")
            .unwrap()
            .validate_values()
            .unwrap_err();
        assert_eq!(err.field(), Some("backends.summarizer.faults.probability"));
    }

    #[test]
    fn missing_vocab_is_reported() {
        let err = Config::default().validate().unwrap_err();
        assert_eq!(err.field(), Some("filter.vocab"));
    }

    #[test]
    fn env_overrides_switch_to_remote() {
        let mut cfg = Config::default();
        cfg.apply_env(|k| (k == ENV_CAPTIONER).then(|| "http://10.0.0.1:1".to_string()));
        assert!(cfg.backends.captioner.is_remote());
        assert!(!cfg.backends.reasoner.is_remote());
        assert_eq!(cfg.backends.remote_endpoints()[0].1.endpoint, "http://10.0.0.1:1");
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let mut cfg = Config::parse(FULL).unwrap();
        cfg.resolve_paths(Path::new("/etc/wt"));
        assert_eq!(cfg.filter.vocab.unwrap(), PathBuf::from("/etc/wt/vocab.txt"));
        assert_eq!(cfg.stream.manifest.unwrap(), PathBuf::from("/etc/wt/stream.json"));
    }
}
