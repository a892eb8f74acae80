//! Shared helpers for integration tests: a deterministic generator of
//! random manufacturing-rule-valid knitting maps.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use surfweave::stitch::{validate_rules, KnitState, KnittingMap, RowDir};

/// Random rules-valid map: contiguous knit runs walking by at most one
/// column at each meeting side, gray filled where a column knits both below
/// and above a skipped cell.
pub fn random_rules_valid_map(rng: &mut ChaCha8Rng, max_rows: usize, max_cols: usize) -> KnittingMap {
    let rows = rng.gen_range(1..=max_rows);
    let cols = rng.gen_range(1..=max_cols);
    let first = if rng.gen() {
        RowDir::LeftToRight
    } else {
        RowDir::RightToLeft
    };
    let mut runs: Vec<(usize, usize)> = Vec::with_capacity(rows);
    let l0 = rng.gen_range(1..=cols);
    let r0 = rng.gen_range(l0..=cols);
    runs.push((l0, r0));
    for i in 1..rows {
        let prev_dir = RowDir::for_row(first, i);
        let (pl, pr) = runs[i - 1];
        let end = match prev_dir {
            RowDir::LeftToRight => pr,
            RowDir::RightToLeft => pl,
        };
        let start = (end as i64 + rng.gen_range(-1..=1)).clamp(1, cols as i64) as usize;
        let run = match RowDir::for_row(first, i + 1) {
            // Next row starts at its leftmost cell.
            RowDir::LeftToRight => (start, rng.gen_range(start..=cols)),
            // Next row starts at its rightmost cell.
            RowDir::RightToLeft => (rng.gen_range(1..=start), start),
        };
        runs.push(run);
    }
    let mut map = KnittingMap::filled(rows, cols, KnitState::White);
    for (i, &(l, r)) in runs.iter().enumerate() {
        let state = match RowDir::for_row(first, i + 1) {
            RowDir::LeftToRight => KnitState::Yellow,
            RowDir::RightToLeft => KnitState::Cyan,
        };
        for col in l..=r {
            map.set(i + 1, col, state);
        }
    }
    // Gray where short rows connect stitches across skipped cells.
    for col in 1..=cols {
        let knit: Vec<usize> = (1..=rows).filter(|&r| map.get(r, col).is_knit()).collect();
        if let (Some(&lo), Some(&hi)) = (knit.first(), knit.last()) {
            for row in lo..=hi {
                if !map.get(row, col).is_knit() {
                    map.set(row, col, KnitState::Gray);
                }
            }
        }
    }
    validate_rules(&map).expect("generator must produce rules-valid maps");
    map
}

pub fn corpus(seed: u64, count: usize, max_rows: usize, max_cols: usize) -> Vec<KnittingMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_rules_valid_map(&mut rng, max_rows, max_cols))
        .collect()
}
