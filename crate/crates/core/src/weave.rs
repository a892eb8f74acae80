//! Knitting map to weaving map conversion.
//!
//! A woven stitch is bounded by two warp and two weft threads, so an N x M
//! knitting map becomes an (N+1) x (M+1) weaving map. Cell semantics on the
//! machine: Blue holds the warp beam and keeps the jacquard down (sewn
//! short-row spans), Magenta releases one stitch height and lifts, Green
//! releases and stays down.

use crate::stitch::{KnitState, KnittingMap};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeaveState {
    Green,
    Magenta,
    Blue,
}

impl WeaveState {
    pub fn letter(self) -> char {
        match self {
            WeaveState::Green => 'G',
            WeaveState::Magenta => 'M',
            WeaveState::Blue => 'B',
        }
    }

    pub fn from_letter(c: char) -> Option<WeaveState> {
        match c {
            'G' => Some(WeaveState::Green),
            'M' => Some(WeaveState::Magenta),
            'B' => Some(WeaveState::Blue),
            _ => None,
        }
    }
}

/// (N+1) x (M+1) grid, row 1 at the bottom, column 1 at the left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeavingMap {
    pub rows: usize,
    pub cols: usize,
    grid: Vec<WeaveState>,
}

impl WeavingMap {
    pub fn filled(rows: usize, cols: usize, state: WeaveState) -> Self {
        WeavingMap {
            rows,
            cols,
            grid: vec![state; rows * cols],
        }
    }

    pub fn from_rows(rows: &[&str]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        let mut map = WeavingMap::filled(n, m, WeaveState::Green);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), m, "ragged weaving map rows");
            for (j, ch) in row.chars().enumerate() {
                map.set(i + 1, j + 1, WeaveState::from_letter(ch).expect("bad letter"));
            }
        }
        map
    }

    pub fn get(&self, row: usize, col: usize) -> WeaveState {
        self.grid[(row - 1) * self.cols + (col - 1)]
    }

    pub fn set(&mut self, row: usize, col: usize, state: WeaveState) {
        self.grid[(row - 1) * self.cols + (col - 1)] = state;
    }

    pub fn rows_as_strings(&self) -> Vec<String> {
        (1..=self.rows)
            .map(|i| (1..=self.cols).map(|j| self.get(i, j).letter()).collect())
            .collect()
    }

    pub fn count(&self, state: WeaveState) -> usize {
        self.grid.iter().filter(|&&s| s == state).count()
    }
}

#[derive(Serialize, Deserialize)]
struct GridJson {
    rows: usize,
    cols: usize,
    grid: Vec<String>,
}

impl Serialize for WeavingMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GridJson {
            rows: self.rows,
            cols: self.cols,
            grid: self.rows_as_strings(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeavingMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = GridJson::deserialize(d)?;
        if j.grid.len() != j.rows {
            return Err(serde::de::Error::custom("row count mismatch"));
        }
        let mut map = WeavingMap::filled(j.rows, j.cols, WeaveState::Green);
        for (i, row) in j.grid.iter().enumerate() {
            if row.len() != j.cols {
                return Err(serde::de::Error::custom("column count mismatch"));
            }
            for (jx, ch) in row.chars().enumerate() {
                let state = WeaveState::from_letter(ch)
                    .ok_or_else(|| serde::de::Error::custom(format!("bad state '{ch}'")))?;
                map.set(i + 1, jx + 1, state);
            }
        }
        Ok(map)
    }
}

/// Bookkeeping of where each Blue cell came from, for conservation checks.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ConversionTrace {
    /// Blue cells assigned directly from Gray knitting cells (step 2).
    pub gray_blue: usize,
    /// Blue cells copied by the row-end extension (step 3).
    pub extension_blue: usize,
    /// Blue cells copied into the first row (step 4).
    pub first_row_blue: usize,
}

pub fn convert_map(k: &KnittingMap) -> WeavingMap {
    convert_map_traced(k).0
}

/// The five conversion steps, instrumented.
pub fn convert_map_traced(k: &KnittingMap) -> (WeavingMap, ConversionTrace) {
    let (n, m) = (k.rows, k.cols);
    let mut trace = ConversionTrace::default();

    // Step 1: all green, one extra row and column.
    let mut w = WeavingMap::filled(n + 1, m + 1, WeaveState::Green);

    // Step 2: knit cells lift the warp above them, gray cells hold it.
    for i in 1..=n {
        for j in 1..=m {
            match k.get(i, j) {
                KnitState::Yellow | KnitState::Cyan => w.set(i + 1, j, WeaveState::Magenta),
                KnitState::Gray => {
                    w.set(i + 1, j, WeaveState::Blue);
                    trace.gray_blue += 1;
                }
                KnitState::White => {}
            }
        }
    }

    // Step 3: extend each row's last non-green block one column right.
    for i in 2..=n + 1 {
        let last = (1..=w.cols).rev().find(|&j| w.get(i, j) != WeaveState::Green);
        if let Some(jp) = last {
            if jp < w.cols {
                let state = w.get(i, jp);
                w.set(i, jp + 1, state);
                if state == WeaveState::Blue {
                    trace.extension_blue += 1;
                }
            }
        }
    }

    // Step 4: the first row copies the second.
    for j in 1..=w.cols {
        let state = w.get(2, j);
        w.set(1, j, state);
        if state == WeaveState::Blue {
            trace.first_row_blue += 1;
        }
    }

    // Step 5: magenta on parity-matching cells drops back to green, which
    // produces the plain-weave alternation inside each lifted run.
    for i in 1..=w.rows {
        for j in 1..=w.cols {
            if w.get(i, j) == WeaveState::Magenta && (i % 2) == (j % 2) {
                w.set(i, j, WeaveState::Green);
            }
        }
    }

    (w, trace)
}

/// Summary numbers for reports: thread counts and per-column release totals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapStatistics {
    pub warp_count: usize,
    pub weft_rows: usize,
    /// Released warp length (mm) per column: s_h per non-Blue cell.
    pub per_column_release: Vec<f64>,
    pub blue: usize,
    pub magenta: usize,
    pub green: usize,
}

pub fn map_statistics(w: &WeavingMap, s_h: f64) -> MapStatistics {
    let per_column_release = (1..=w.cols)
        .map(|j| {
            let released = (1..=w.rows)
                .filter(|&i| w.get(i, j) != WeaveState::Blue)
                .count();
            s_h * released as f64
        })
        .collect();
    MapStatistics {
        warp_count: w.cols,
        weft_rows: w.rows,
        per_column_release,
        blue: w.count(WeaveState::Blue),
        magenta: w.count(WeaveState::Magenta),
        green: w.count(WeaveState::Green),
    }
}
