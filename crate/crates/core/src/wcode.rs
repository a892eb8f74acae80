//! W-code: the loom's instruction language.
//!
//! Five commands: A initializes the machine, each woven row is a (B, C, D)
//! triple (jacquard bits, beam-release bits, shuttle direction), E stops.
//! Text form is one command per line; B and C carry a bit string per warp,
//! D carries 0 (left to right) or 1 (right to left).

use crate::config::StitchParams;
use crate::stitch::RowDir;
use crate::weave::{WeaveState, WeavingMap};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WCodeError {
    #[error("map needs {needed} warp threads but the machine has {available}")]
    TooManyWarps { needed: usize, available: usize },
    #[error("line {line}: unknown command '{token}'")]
    UnknownCommand { line: usize, token: String },
    #[error("line {line}: bit string of length {got}, expected {expected}")]
    BitLengthMismatch {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: expected {expected}, found '{found}'")]
    TripleOrderViolation {
        line: usize,
        expected: &'static str,
        found: String,
    },
    #[error("program does not start with A")]
    ProgramNotInitialized,
    #[error("program ended without the E terminator")]
    MissingTerminator,
    #[error("line {line}: content after the E terminator")]
    TrailingContent { line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShuttleDir {
    /// D0
    LeftToRight,
    /// D1
    RightToLeft,
}

impl ShuttleDir {
    pub fn bit(self) -> u8 {
        match self {
            ShuttleDir::LeftToRight => 0,
            ShuttleDir::RightToLeft => 1,
        }
    }

    pub fn flipped(self) -> ShuttleDir {
        match self {
            ShuttleDir::LeftToRight => ShuttleDir::RightToLeft,
            ShuttleDir::RightToLeft => ShuttleDir::LeftToRight,
        }
    }
}

impl From<RowDir> for ShuttleDir {
    fn from(d: RowDir) -> Self {
        match d {
            RowDir::LeftToRight => ShuttleDir::LeftToRight,
            RowDir::RightToLeft => ShuttleDir::RightToLeft,
        }
    }
}

/// One woven row: the (B, C, D) triple. Bit index 0 is the leftmost warp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowOp {
    pub jacquard: Vec<bool>,
    pub release: Vec<bool>,
    pub dir: ShuttleDir,
}

/// A structurally valid program: A, then row triples, then E.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WCodeProgram {
    pub width: usize,
    pub rows: Vec<RowOp>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    /// Consecutive D commands with the same direction (row is 1-based).
    DirectionNotAlternating { row: usize },
}

fn bits_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

impl WCodeProgram {
    pub fn to_text(&self) -> String {
        let mut out = String::from("A\n");
        for row in &self.rows {
            writeln!(out, "B {}", bits_string(&row.jacquard)).unwrap();
            writeln!(out, "C {}", bits_string(&row.release)).unwrap();
            writeln!(out, "D{}", row.dir.bit()).unwrap();
        }
        out.push_str("E\n");
        out
    }

    /// Release events (C bit set) per warp column, 0-based.
    pub fn release_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.width];
        for row in &self.rows {
            for (j, &bit) in row.release.iter().enumerate() {
                if bit {
                    counts[j] += 1;
                }
            }
        }
        counts
    }
}

/// Generate the program for a weaving map. Shuttle directions: row r >= 2
/// takes the knitting row r-1 direction; row 1 runs opposite to row 2, which
/// keeps the strict alternation.
pub fn emit_wcode(
    w: &WeavingMap,
    params: &StitchParams,
    first_knit_row_dir: RowDir,
) -> Result<WCodeProgram, WCodeError> {
    if w.cols > params.max_warp_threads {
        return Err(WCodeError::TooManyWarps {
            needed: w.cols,
            available: params.max_warp_threads,
        });
    }
    let mut rows = Vec::with_capacity(w.rows);
    for i in 1..=w.rows {
        let jacquard = (1..=w.cols)
            .map(|j| w.get(i, j) == WeaveState::Magenta)
            .collect();
        let release = (1..=w.cols)
            .map(|j| w.get(i, j) != WeaveState::Blue)
            .collect();
        let dir: ShuttleDir = if i >= 2 {
            RowDir::for_row(first_knit_row_dir, i - 1).into()
        } else {
            ShuttleDir::from(RowDir::for_row(first_knit_row_dir, 1)).flipped()
        };
        rows.push(RowOp {
            jacquard,
            release,
            dir,
        });
    }
    Ok(WCodeProgram {
        width: w.cols,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Expect {
    Init,
    JacquardOrEnd,
    Release,
    Shuttle,
    Done,
}

/// Parse W-code text. Whitespace layout is free-form (commands may share a
/// line); command letters and bit order are fixed. Non-fatal oddities are
/// returned as warnings.
pub fn parse_wcode(text: &str) -> Result<(WCodeProgram, Vec<ParseWarning>), WCodeError> {
    let mut state = Expect::Init;
    let mut width: Option<usize> = None;
    let mut rows: Vec<RowOp> = Vec::new();
    let mut warnings = Vec::new();
    let mut pending_jacquard: Option<Vec<bool>> = None;
    let mut pending_release: Option<Vec<bool>> = None;

    let mut tokens: Vec<(usize, &str)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        for tok in line.split_whitespace() {
            tokens.push((lineno + 1, tok));
        }
    }

    let parse_bits = |line: usize, tok: &str| -> Result<Vec<bool>, WCodeError> {
        if tok.is_empty() || !tok.chars().all(|c| c == '0' || c == '1') {
            return Err(WCodeError::UnknownCommand {
                line,
                token: tok.to_string(),
            });
        }
        Ok(tok.chars().map(|c| c == '1').collect())
    };

    let mut i = 0;
    while i < tokens.len() {
        let (line, tok) = tokens[i];
        i += 1;
        if state == Expect::Done {
            return Err(WCodeError::TrailingContent { line });
        }
        // Accept "B 010" and "B010" alike; same for C and D.
        let (cmd, inline) = {
            let mut chars = tok.chars();
            let head = chars.next().unwrap();
            (head, chars.as_str())
        };
        let take_arg = |i: &mut usize| -> Option<(usize, String)> {
            if !inline.is_empty() {
                Some((line, inline.to_string()))
            } else if *i < tokens.len() {
                let (l, t) = tokens[*i];
                *i += 1;
                Some((l, t.to_string()))
            } else {
                None
            }
        };
        match (cmd, state) {
            ('A', Expect::Init) if inline.is_empty() => {
                state = Expect::JacquardOrEnd;
            }
            ('E', Expect::JacquardOrEnd) if inline.is_empty() => {
                state = Expect::Done;
            }
            ('B', Expect::JacquardOrEnd) => {
                let (bl, arg) = take_arg(&mut i).ok_or(WCodeError::MissingTerminator)?;
                let bits = parse_bits(bl, &arg)?;
                match width {
                    None => width = Some(bits.len()),
                    Some(wd) if wd != bits.len() => {
                        return Err(WCodeError::BitLengthMismatch {
                            line: bl,
                            expected: wd,
                            got: bits.len(),
                        })
                    }
                    _ => {}
                }
                pending_jacquard = Some(bits);
                state = Expect::Release;
            }
            ('C', Expect::Release) => {
                let (bl, arg) = take_arg(&mut i).ok_or(WCodeError::MissingTerminator)?;
                let bits = parse_bits(bl, &arg)?;
                let wd = width.unwrap();
                if bits.len() != wd {
                    return Err(WCodeError::BitLengthMismatch {
                        line: bl,
                        expected: wd,
                        got: bits.len(),
                    });
                }
                pending_release = Some(bits);
                state = Expect::Shuttle;
            }
            ('D', Expect::Shuttle) => {
                let (dl, arg) = take_arg(&mut i).ok_or(WCodeError::MissingTerminator)?;
                let dir = match arg.as_str() {
                    "0" => ShuttleDir::LeftToRight,
                    "1" => ShuttleDir::RightToLeft,
                    other => {
                        return Err(WCodeError::UnknownCommand {
                            line: dl,
                            token: format!("D{other}"),
                        })
                    }
                };
                if let Some(prev) = rows.last() {
                    if prev.dir == dir {
                        warnings.push(ParseWarning::DirectionNotAlternating {
                            row: rows.len() + 1,
                        });
                    }
                }
                rows.push(RowOp {
                    jacquard: pending_jacquard.take().unwrap(),
                    release: pending_release.take().unwrap(),
                    dir,
                });
                state = Expect::JacquardOrEnd;
            }
            (_, Expect::Init) => return Err(WCodeError::ProgramNotInitialized),
            (_, expected_state) => {
                let expected = match expected_state {
                    Expect::Init => "A",
                    Expect::JacquardOrEnd => "B or E",
                    Expect::Release => "C",
                    Expect::Shuttle => "D",
                    Expect::Done => unreachable!(),
                };
                return Err(WCodeError::TripleOrderViolation {
                    line,
                    expected,
                    found: tok.to_string(),
                });
            }
        }
    }
    if state != Expect::Done {
        return Err(WCodeError::MissingTerminator);
    }
    Ok((
        WCodeProgram {
            width: width.unwrap_or(0),
            rows,
        },
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stitch::KnittingMap;
    use crate::weave::convert_map;

    fn params() -> StitchParams {
        StitchParams::with_height(2.0)
    }

    #[test]
    fn all_knit_two_by_two_text() {
        let k = KnittingMap::from_rows(&["YY", "CC"]);
        let w = convert_map(&k);
        let prog = emit_wcode(&w, &params(), RowDir::LeftToRight).unwrap();
        assert_eq!(
            prog.to_text(),
            "A\nB 010\nC 111\nD1\nB 101\nC 111\nD0\nB 010\nC 111\nD1\nE\n"
        );
    }

    #[test]
    fn all_green_map_bits() {
        let w = WeavingMap::filled(2, 2, WeaveState::Green);
        let prog = emit_wcode(&w, &params(), RowDir::LeftToRight).unwrap();
        for row in &prog.rows {
            assert_eq!(bits_string(&row.jacquard), "00");
            assert_eq!(bits_string(&row.release), "11");
        }
    }

    #[test]
    fn blue_column_holds_release() {
        let w = WeavingMap::from_rows(&["GBG", "MBM"]);
        let prog = emit_wcode(&w, &params(), RowDir::LeftToRight).unwrap();
        for row in &prog.rows {
            assert!(!row.release[1]);
        }
    }

    #[test]
    fn too_many_warps() {
        let w = WeavingMap::filled(2, 5, WeaveState::Green);
        let mut p = params();
        p.max_warp_threads = 4;
        assert!(matches!(
            emit_wcode(&w, &p, RowDir::LeftToRight),
            Err(WCodeError::TooManyWarps {
                needed: 5,
                available: 4
            })
        ));
    }

    #[test]
    fn directions_alternate_strictly() {
        let k = KnittingMap::from_rows(&["YYY", "CCW", "YYW"]);
        let w = convert_map(&k);
        let prog = emit_wcode(&w, &params(), RowDir::LeftToRight).unwrap();
        for pair in prog.rows.windows(2) {
            assert_ne!(pair[0].dir, pair[1].dir);
        }
    }

    #[test]
    fn round_trip_identity() {
        let k = KnittingMap::from_rows(&["YGW", "CCW", "WYY"]);
        // Not rules-valid, but conversion and emission are total functions.
        let w = convert_map(&k);
        let prog = emit_wcode(&w, &params(), RowDir::LeftToRight).unwrap();
        let (back, warnings) = parse_wcode(&prog.to_text()).unwrap();
        assert_eq!(prog, back);
        assert!(warnings.is_empty());
    }

    #[test]
    fn empty_program() {
        let (prog, warnings) = parse_wcode("A\nE\n").unwrap();
        assert_eq!(prog.rows.len(), 0);
        assert!(warnings.is_empty());
    }

    #[test]
    fn layout_variations_parse() {
        // Multi-command lines and inline D arguments.
        let text = "A B 01 C 11 D0\nB 10 C 11 D1 E";
        let (prog, _) = parse_wcode(text).unwrap();
        assert_eq!(prog.rows.len(), 2);
        // Inline bit strings.
        let text = "A\nB01\nC11\nD0\nE\n";
        let (prog2, _) = parse_wcode(text).unwrap();
        assert_eq!(prog2.rows.len(), 1);
        assert_eq!(prog2.rows[0].jacquard, vec![false, true]);
    }

    #[test]
    fn bit_length_mismatch_reports_line() {
        let text = "A\nB 0101\nC 0101\nD0\nB 01010\nC 01010\nD1\nE\n";
        match parse_wcode(text) {
            Err(WCodeError::BitLengthMismatch {
                line,
                expected: 4,
                got: 5,
            }) => assert_eq!(line, 5),
            other => panic!("expected BitLengthMismatch, got {other:?}"),
        }
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(
            parse_wcode("B 01\n"),
            Err(WCodeError::ProgramNotInitialized)
        ));
        assert!(matches!(
            parse_wcode("A\nB 01\nD0\n"),
            Err(WCodeError::TripleOrderViolation { .. })
        ));
        assert!(matches!(
            parse_wcode("A\nB 01\nC 01\nD0\n"),
            Err(WCodeError::MissingTerminator)
        ));
        assert!(matches!(
            parse_wcode("A\nE\nB 01\n"),
            Err(WCodeError::TrailingContent { line: 3 })
        ));
    }

    #[test]
    fn non_alternating_is_a_warning() {
        let text = "A\nB 01\nC 11\nD0\nB 10\nC 11\nD0\nE\n";
        let (_, warnings) = parse_wcode(text).unwrap();
        assert_eq!(
            warnings,
            vec![ParseWarning::DirectionNotAlternating { row: 2 }]
        );
    }
}
