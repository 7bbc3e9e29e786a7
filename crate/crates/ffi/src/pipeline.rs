use std::ffi::c_char;
use std::path::Path;

use watchtower::config::Config;
use watchtower::pipeline::{simulate, PipelineError, Setup};
use watchtower::sink::to_json_line;

use crate::error::{give_box, give_string, guard, non_null, read_str, Failure, WtStatus};

/// A loaded pipeline configuration with its stream, vocabulary and prompts.
pub struct WtPipeline {
    setup: Setup,
}

fn pipeline_failure(e: PipelineError) -> Failure {
    let status = match e {
        PipelineError::Config(_)
        | PipelineError::Manifest(_)
        | PipelineError::Vocabulary(_)
        | PipelineError::Prompts(_) => WtStatus::Config,
        PipelineError::Sink(_) => WtStatus::Io,
        _ => WtStatus::Runtime,
    };
    Failure::new(status, e.to_string())
}

/// Loads and validates a TOML config file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_pipeline_load(path: *const c_char, seed: u64, out: *mut *mut WtPipeline) -> WtStatus {
    guard(|| {
        let path = read_str(path, "path")?;
        let mut config = Config::load(Path::new(path)).map_err(|e| Failure::new(WtStatus::Config, e.to_string()))?;
        config.stream.seed = seed;
        let setup = Setup::load(config).map_err(pipeline_failure)?;
        give_box(WtPipeline { setup }, out)
    })
}

/// Runs the pipeline on virtual time and returns the decisions as JSONL.
///
/// `latency_out`, if non-NULL, receives the detection latency in seconds
/// or a negative value when the stream has no onset or no positive decision.
///
/// # Safety
/// `pipeline` must be a live handle; `jsonl_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_pipeline_simulate(
    pipeline: *const WtPipeline,
    jsonl_out: *mut *mut c_char,
    latency_out: *mut f64,
) -> WtStatus {
    guard(|| {
        let p = non_null(pipeline, "pipeline")?;
        let out = simulate(&p.setup).map_err(pipeline_failure)?;
        let text: String = out.decisions.iter().map(to_json_line).collect();
        if let Some(l) = latency_out.as_mut() {
            *l = out
                .report
                .detection
                .and_then(|d| d.latency)
                .map_or(-1.0, |s| s.as_secs_f64());
        }
        give_string(text, jsonl_out)
    })
}

/// Frees a pipeline handle.
///
/// # Safety
/// `pipeline` must come from `wt_pipeline_load` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn wt_pipeline_free(pipeline: *mut WtPipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}
