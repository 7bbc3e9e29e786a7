//! Multi-agent streaming orchestrator for early warning of criminal
//! behavior in video streams.
//!
//! Frames flow from a [`stream::FrameSource`] through three agents: a
//! captioner that describes uniformly sampled frames of overlapping
//! windows, a summarizer that folds filtered captions into a causal summary
//! chain, and a discriminator that judges the freshest summary together
//! with the most recent frames. Agents talk through the queues in [`bus`];
//! model inference sits behind the traits in [`backends`].

pub mod agents;
pub mod backends;
pub mod bus;
pub mod cli;
pub mod clock;
pub mod config;
pub mod corpus;
pub mod entity;
pub mod eval;
pub mod model;
pub mod pipeline;
pub mod sink;
pub mod stream;
pub mod time;
pub mod windowing;
