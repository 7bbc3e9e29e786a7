//! C ABI over `watchtower`.
//!
//! Conventions:
//! - Every fallible function returns a [`WtStatus`]; on failure the
//!   message is available from [`wt_last_error_message`].
//! - Objects are opaque handles created by `wt_*_new` / `wt_*_load` and
//!   released by the matching `wt_*_free`. Freeing NULL is a no-op.
//! - Strings returned through `char **` outputs are owned by the caller
//!   and released with [`wt_string_free`].
//! - Handles are not thread-safe unless noted; queues are.

mod error;
mod metrics;
mod pipeline;
mod queue;
mod vocab;

pub use error::{wt_last_error_message, wt_string_free, wt_version, WtStatus};
pub use metrics::*;
pub use pipeline::*;
pub use queue::*;
pub use vocab::*;
