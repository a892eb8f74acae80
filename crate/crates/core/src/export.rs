//! Image export of the maps: plain-text PPM, one fixed color per cell state,
//! matching the usual map color convention (knit yellow/cyan, short-row
//! connections gray, weaving green/magenta/blue).

use crate::stitch::{KnitState, KnittingMap};
use crate::weave::{WeaveState, WeavingMap};
use std::fmt::Write as _;

const CELL_PX: usize = 8;

fn ppm<F: Fn(usize, usize) -> (u8, u8, u8)>(rows: usize, cols: usize, at: F) -> String {
    let (w, h) = (cols * CELL_PX, rows * CELL_PX);
    let mut out = String::with_capacity(w * h * 12 + 32);
    writeln!(out, "P3\n{w} {h}\n255").unwrap();
    // Image rows top-down; map row 1 is at the bottom.
    for py in 0..h {
        let row = rows - py / CELL_PX;
        for px in 0..w {
            let col = px / CELL_PX + 1;
            let (r, g, b) = at(row, col);
            write!(out, "{r} {g} {b} ").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn knitting_map_ppm(map: &KnittingMap) -> String {
    ppm(map.rows, map.cols, |row, col| match map.get(row, col) {
        KnitState::White => (255, 255, 255),
        KnitState::Gray => (128, 128, 128),
        KnitState::Yellow => (255, 255, 0),
        KnitState::Cyan => (0, 255, 255),
    })
}

pub fn weaving_map_ppm(map: &WeavingMap) -> String {
    ppm(map.rows, map.cols, |row, col| match map.get(row, col) {
        WeaveState::Green => (0, 255, 0),
        WeaveState::Magenta => (255, 0, 255),
        WeaveState::Blue => (0, 0, 255),
    })
}
