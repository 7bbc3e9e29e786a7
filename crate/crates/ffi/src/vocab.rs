use std::ffi::c_char;

use watchtower::entity::{count_texts, screen_main_entities, EntityVocabulary, FrequencyTable, ScreenRule};

use crate::error::{give_box, guard, non_null, non_null_mut, read_slice, read_str, Failure, WtStatus};

/// Entity vocabulary with alias folding.
pub struct WtVocabulary {
    inner: EntityVocabulary,
}

/// Parses a vocabulary: one entity per line, aliases separated by `|`.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_vocab_parse(text: *const c_char, out: *mut *mut WtVocabulary) -> WtStatus {
    guard(|| {
        let inner = EntityVocabulary::parse(read_str(text, "text")?)
            .map_err(|e| Failure::new(WtStatus::Config, e.to_string()))?;
        give_box(WtVocabulary { inner }, out)
    })
}

/// Number of entities, or 0 for NULL.
///
/// # Safety
/// `vocab` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wt_vocab_len(vocab: *const WtVocabulary) -> usize {
    vocab.as_ref().map_or(0, |v| v.inner.len())
}

/// Whole-word occurrence counts per entity over `n_texts` strings.
///
/// `counts` must have room for `wt_vocab_len(vocab)` entries.
///
/// # Safety
/// `texts` points to `n_texts` NUL-terminated strings; `counts` to
/// `counts_len` writable integers.
#[no_mangle]
pub unsafe extern "C" fn wt_vocab_count(
    vocab: *const WtVocabulary,
    texts: *const *const c_char,
    n_texts: usize,
    counts: *mut u32,
    counts_len: usize,
) -> WtStatus {
    guard(|| {
        let v = &non_null(vocab, "vocab")?.inner;
        if counts_len < v.len() {
            return Err(Failure::invalid(format!("counts holds {counts_len}, need {}", v.len())));
        }
        let ptrs = read_slice(texts, n_texts, "texts")?;
        let strs = ptrs
            .iter()
            .map(|&p| read_str(p, "text"))
            .collect::<Result<Vec<_>, _>>()?;
        let table = count_texts(strs, v);
        non_null_mut(counts, "counts")?;
        let out = std::slice::from_raw_parts_mut(counts, counts_len);
        out[..table.counts.len()].copy_from_slice(&table.counts);
        Ok(())
    })
}

/// Splits nonzero entities into main (`1`) and redundant (`2`) by the
/// prefix-cut rule; zero-count entities get `0`.
///
/// # Safety
/// `counts` and `classes` each point to `n` elements.
#[no_mangle]
pub unsafe extern "C" fn wt_screen_entities(counts: *const u32, n: usize, tau: u32, classes: *mut u8) -> WtStatus {
    guard(|| {
        let counts = read_slice(counts, n, "counts")?;
        let s = screen_main_entities(&FrequencyTable::from_counts(counts.to_vec()), tau, ScreenRule::PrefixCut);
        if n > 0 {
            non_null_mut(classes, "classes")?;
        }
        for i in 0..n {
            *classes.add(i) = if s.main.contains(&i) {
                1
            } else if s.redundant.contains(&i) {
                2
            } else {
                0
            };
        }
        Ok(())
    })
}

/// Frees a vocabulary handle.
///
/// # Safety
/// `vocab` must come from `wt_vocab_parse` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn wt_vocab_free(vocab: *mut WtVocabulary) {
    if !vocab.is_null() {
        drop(Box::from_raw(vocab));
    }
}
