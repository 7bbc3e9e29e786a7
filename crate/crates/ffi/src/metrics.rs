use std::ffi::c_char;

use watchtower::corpus::{sample_adjacent, split_segment, SplitRatio};
use watchtower::eval::{self, LabeledOutcome, TextPair};
use watchtower::windowing::{self, WindowConfig};

use crate::error::{guard, non_null_mut, read_slice, read_str, Failure, FfiResult, WtStatus};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WtSplitRatio {
    ThreeSeven = 0,
    OneOne = 1,
    SevenThree = 2,
}

unsafe fn outcomes(labels: *const u8, scores: *const f64, n: usize) -> FfiResult<Vec<LabeledOutcome>> {
    let labels = read_slice(labels, n, "labels")?;
    let scores = read_slice(scores, n, "scores")?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Failure::invalid("scores must be finite"));
    }
    Ok(labels
        .iter()
        .zip(scores)
        .enumerate()
        .map(|(i, (&l, &s))| LabeledOutcome::new(i.to_string(), l != 0, s, 0.5))
        .collect())
}

unsafe fn write(out: *mut f64, v: f64) -> FfiResult<()> {
    *non_null_mut(out, "out")? = v;
    Ok(())
}

/// ROC AUC with tied scores counted half. Needs both classes present.
///
/// # Safety
/// `labels` and `scores` point to `n` elements; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn wt_auc(labels: *const u8, scores: *const f64, n: usize, out: *mut f64) -> WtStatus {
    guard(|| {
        let v = eval::auc(&outcomes(labels, scores, n)?).map_err(|e| Failure::invalid(e.to_string()))?;
        write(out, v)
    })
}

/// Average precision with tied scores grouped. Needs both classes present.
///
/// # Safety
/// As for [`wt_auc`].
#[no_mangle]
pub unsafe extern "C" fn wt_ap(labels: *const u8, scores: *const f64, n: usize, out: *mut f64) -> WtStatus {
    guard(|| {
        let v = eval::ap(&outcomes(labels, scores, n)?).map_err(|e| Failure::invalid(e.to_string()))?;
        write(out, v)
    })
}

unsafe fn pair(candidate: *const c_char, refs: *const *const c_char, n_refs: usize) -> FfiResult<TextPair> {
    let cand = read_str(candidate, "candidate")?;
    let refs = read_slice(refs, n_refs, "references")?
        .iter()
        .map(|&p| read_str(p, "reference"))
        .collect::<Result<Vec<_>, _>>()?;
    TextPair::new(cand, &refs).map_err(|e| Failure::invalid(e.to_string()))
}

/// Sum of BLEU-1..4 for one candidate against its references.
///
/// # Safety
/// Strings are NUL-terminated; `refs` points to `n_refs` of them.
#[no_mangle]
pub unsafe extern "C" fn wt_bleu_cumulative(
    candidate: *const c_char,
    refs: *const *const c_char,
    n_refs: usize,
    out: *mut f64,
) -> WtStatus {
    guard(|| write(out, eval::bleu_cumulative(&[pair(candidate, refs, n_refs)?])))
}

/// ROUGE-L F-measure, best over references.
///
/// # Safety
/// As for [`wt_bleu_cumulative`].
#[no_mangle]
pub unsafe extern "C" fn wt_rouge_l(
    candidate: *const c_char,
    refs: *const *const c_char,
    n_refs: usize,
    out: *mut f64,
) -> WtStatus {
    guard(|| write(out, eval::rouge_l(&pair(candidate, refs, n_refs)?)))
}

/// Half-open frame interval of window `window_seq`.
///
/// # Safety
/// `start_out` and `end_out` are writable.
#[no_mangle]
pub unsafe extern "C" fn wt_window_bounds(
    window_seq: u64,
    window_len: u64,
    stride: u64,
    start_out: *mut u64,
    end_out: *mut u64,
) -> WtStatus {
    guard(|| {
        if stride == 0 || stride > window_len {
            return Err(Failure::invalid("need 0 < stride <= window_len"));
        }
        let cfg = WindowConfig {
            window_len,
            stride,
            ..WindowConfig::default()
        };
        let r = windowing::window_bounds(window_seq, &cfg);
        *non_null_mut(start_out, "start_out")? = r.start;
        *non_null_mut(end_out, "end_out")? = r.end;
        Ok(())
    })
}

/// Writes `k` evenly spaced ordinals from `[start, end)` into `out`.
///
/// # Safety
/// `out` points to at least `k` writable elements.
#[no_mangle]
pub unsafe extern "C" fn wt_uniform_sample(start: u64, end: u64, k: usize, out: *mut u64) -> WtStatus {
    guard(|| {
        let s = windowing::uniform_sample(start, end, k).map_err(|e| Failure::invalid(e.to_string()))?;
        non_null_mut(out, "out")?;
        std::ptr::copy_nonoverlapping(s.as_ptr(), out, s.len());
        Ok(())
    })
}

/// Splits `n` ordinals (a multiple of 10) into historical and adjacent
/// parts; `historical_len_out` receives the prefix length. When
/// `sample_out` is non-NULL it receives `k` ordinals resampled from the
/// adjacent part.
///
/// # Safety
/// `historical_len_out` is writable; `sample_out` is NULL or has `k` slots.
#[no_mangle]
pub unsafe extern "C" fn wt_split_segment(
    n: usize,
    ratio: WtSplitRatio,
    k: usize,
    historical_len_out: *mut usize,
    sample_out: *mut u64,
) -> WtStatus {
    guard(|| {
        let ratio = match ratio {
            WtSplitRatio::ThreeSeven => SplitRatio::ThreeSeven,
            WtSplitRatio::OneOne => SplitRatio::OneOne,
            WtSplitRatio::SevenThree => SplitRatio::SevenThree,
        };
        let ids: Vec<u64> = (0..n as u64).collect();
        let (hist, adj) = split_segment(&ids, ratio).map_err(|e| Failure::invalid(e.to_string()))?;
        *non_null_mut(historical_len_out, "historical_len_out")? = hist.len();
        if !sample_out.is_null() {
            let s = sample_adjacent(&adj, k).map_err(|e| Failure::invalid(e.to_string()))?;
            std::ptr::copy_nonoverlapping(s.as_ptr(), sample_out, s.len());
        }
        Ok(())
    })
}
