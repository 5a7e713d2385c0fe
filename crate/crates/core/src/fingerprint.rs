//! Stable 64-bit dataset fingerprints.
//!
//! Fingerprints hash the canonical wire rendering of every record in
//! canonical order (pageviews by `detail_id`, sessions by `session_id`), so
//! equal datasets hash equal regardless of input order, and the value is
//! stable across platforms and releases. FNV-1a is used because the standard
//! library hasher makes no cross-release stability promise.

use crate::ingest;
use crate::timefmt::TimestampFormat;
use crate::types::{PageviewRecord, SessionRecord};

/// FNV-1a 64-bit offset basis; the fingerprint of an empty dataset.
pub const EMPTY_FINGERPRINT: u64 = 0xcbf2_9ce4_8422_2325;

const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over a byte slice, continuing from `state`.
fn fnv1a(mut state: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        state ^= u64::from(b);
        state = state.wrapping_mul(FNV_PRIME);
    }
    state
}

fn hash_lines<'a>(lines: impl Iterator<Item = String>) -> u64 {
    let mut state = EMPTY_FINGERPRINT;
    for line in lines {
        state = fnv1a(state, line.as_bytes());
        state = fnv1a(state, b"\n");
    }
    state
}

/// Fingerprint of a pageview dataset. Input order does not matter.
pub fn fingerprint_pageviews(records: &[PageviewRecord]) -> u64 {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|&i| records[i].detail_id);
    hash_lines(
        order
            .iter()
            .map(|&i| ingest::render_pageview(&records[i], TimestampFormat::Paper)),
    )
}

/// Fingerprint of a session dataset. Input order does not matter.
pub fn fingerprint_sessions(records: &[SessionRecord]) -> u64 {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|&i| records[i].session_id);
    hash_lines(
        order
            .iter()
            .map(|&i| ingest::render_session(&records[i], TimestampFormat::Paper)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timefmt::epoch_for;

    fn record(detail_id: i64) -> PageviewRecord {
        PageviewRecord {
            detail_id,
            session_id: 10,
            detail_date_time: epoch_for(2022, 11, 20, 13, 1),
            user_id: 5,
            current_login_status: 1,
            session_login_status: 1,
            user_type: 2,
            sex: 1,
            age: 30,
            age_group: 3,
            user_language_tr: 1,
            user_location: 2,
            browser_type: 1,
            referer_type: 1,
            server_id: 1,
            service_id: 1,
            page_duration: 10,
            page_load_time: 0.1,
        }
    }

    #[test]
    fn empty_dataset_has_the_published_constant() {
        assert_eq!(fingerprint_pageviews(&[]), EMPTY_FINGERPRINT);
        assert_eq!(fingerprint_sessions(&[]), EMPTY_FINGERPRINT);
    }

    #[test]
    fn order_does_not_matter() {
        let a = vec![record(1), record(2), record(3)];
        let b = vec![record(3), record(1), record(2)];
        assert_eq!(fingerprint_pageviews(&a), fingerprint_pageviews(&b));
    }

    #[test]
    fn single_field_changes_change_the_hash() {
        // 1000 random single-field mutations, no collisions expected.
        use rand::Rng;
        let mut rng = crate::seed::stream(7, &[]);
        let base: Vec<PageviewRecord> = (0..50).map(|i| record(i)).collect();
        let reference = fingerprint_pageviews(&base);
        for _ in 0..1000 {
            let mut mutated = base.clone();
            let i = rng.random_range(0..mutated.len());
            let field = rng.random_range(0..6);
            match field {
                0 => mutated[i].user_id += 1,
                1 => mutated[i].age += 1,
                2 => mutated[i].page_duration += 1,
                3 => mutated[i].page_load_time += 0.001,
                4 => mutated[i].server_id += 1,
                _ => mutated[i].detail_date_time += 60,
            }
            assert_ne!(fingerprint_pageviews(&mutated), reference);
        }
    }
}
