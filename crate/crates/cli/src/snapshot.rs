//! Text snapshots of the fire layer.
//!
//! ```text
//! emberline-snapshot v1 3 4 12
//! UUBX
//! UBBX
//! UUUU
//! agent 0 2 17
//! ```
//!
//! The header gives height, width and step. Rows follow north first, one
//! character per cell: `U` unburned, `B` burning, `X` burned. The optional
//! `agent row col water` line uses model coordinates (row 0 is south). Lines
//! starting with `#` are comments. Several snapshots may be concatenated in
//! one file.

use std::fmt::Write as _;

use emberline::{CellIndex, CellState, Dims, FireState};
use thiserror::Error;

pub const MAGIC: &str = "emberline-snapshot";
pub const VERSION: &str = "v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("snapshot line {line}: {msg}")]
pub struct SnapshotError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentMarker {
    pub cell: CellIndex,
    pub water: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub fire: FireState,
    pub step: usize,
    pub agent: Option<AgentMarker>,
}

fn state_char(s: CellState) -> char {
    match s {
        CellState::Unburned => 'U',
        CellState::Burning => 'B',
        CellState::Burned => 'X',
    }
}

fn char_state(c: char) -> Option<CellState> {
    match c {
        'U' => Some(CellState::Unburned),
        'B' => Some(CellState::Burning),
        'X' => Some(CellState::Burned),
        _ => None,
    }
}

impl Snapshot {
    pub fn new(fire: FireState, step: usize) -> Self {
        Self { fire, step, agent: None }
    }

    pub fn write_to(&self, out: &mut String) {
        let dims = self.fire.dims();
        let _ = writeln!(out, "{MAGIC} {VERSION} {} {} {}", dims.height, dims.width, self.step);
        for row in (0..dims.height).rev() {
            out.extend((0..dims.width).map(|col| state_char(self.fire.get(CellIndex { row, col }))));
            out.push('\n');
        }
        if let Some(a) = self.agent {
            let _ = writeln!(out, "agent {} {} {}", a.cell.row, a.cell.col, a.water);
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        self.write_to(&mut s);
        s
    }

    /// Parses a file holding exactly one snapshot.
    pub fn parse(text: &str) -> Result<Self, SnapshotError> {
        let mut all = parse_all(text)?;
        match all.len() {
            1 => Ok(all.remove(0)),
            n => Err(SnapshotError {
                line: 1,
                msg: format!("expected one snapshot, found {n}"),
            }),
        }
    }
}

/// Writes snapshots back to back.
pub fn write_all(snaps: &[Snapshot]) -> String {
    let mut s = String::new();
    for snap in snaps {
        snap.write_to(&mut s);
    }
    s
}

/// Parses any number of concatenated snapshots.
pub fn parse_all(text: &str) -> Result<Vec<Snapshot>, SnapshotError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .peekable();
    let mut out = Vec::new();
    while let Some((line, header)) = lines.next() {
        let err = |line: usize, msg: String| SnapshotError { line, msg };
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != MAGIC {
            return Err(err(line, format!("expected `{MAGIC} {VERSION} H W step`, found {header:?}")));
        }
        if fields[1] != VERSION {
            return Err(err(line, format!("unsupported version {}", fields[1])));
        }
        let num = |s: &str, what: &str| -> Result<usize, SnapshotError> {
            s.parse().map_err(|_| err(line, format!("{what} {s:?} is not a nonnegative integer")))
        };
        let height = num(fields[2], "height")?;
        let width = num(fields[3], "width")?;
        let step = num(fields[4], "step")?;
        if height == 0 || width == 0 {
            return Err(err(line, "grid must be at least 1x1".into()));
        }
        let dims = Dims::new(height, width);
        let mut cells = vec![CellState::Unburned; dims.len()];
        for k in 0..height {
            let (ln, text) = lines
                .next()
                .ok_or_else(|| err(line, format!("expected {height} rows, found {k}")))?;
            let chars: Vec<char> = text.chars().collect();
            if chars.len() != width {
                return Err(err(ln, format!("expected {width} cells, found {}", chars.len())));
            }
            let row = height - 1 - k;
            for (col, c) in chars.into_iter().enumerate() {
                cells[row * width + col] =
                    char_state(c).ok_or_else(|| err(ln, format!("unknown cell state {c:?}")))?;
            }
        }
        let fire = FireState::from_cells(dims, cells).expect("dims match");
        let mut agent = None;
        if let Some(&(ln, text)) = lines.peek() {
            if text.starts_with("agent") {
                lines.next();
                let f: Vec<&str> = text.split_whitespace().collect();
                if f.len() != 4 || f[0] != "agent" {
                    return Err(err(ln, "expected `agent row col water`".into()));
                }
                let n = |s: &str| -> Result<usize, SnapshotError> {
                    s.parse().map_err(|_| err(ln, format!("{s:?} is not a nonnegative integer")))
                };
                let cell = CellIndex::new(n(f[1])?, n(f[2])?, dims).map_err(|e| err(ln, e.to_string()))?;
                let water = n(f[3])?;
                agent = Some(AgentMarker {
                    cell,
                    water: u32::try_from(water).map_err(|_| err(ln, "water out of range".into()))?,
                });
            }
        }
        out.push(Snapshot { fire, step, agent });
    }
    Ok(out)
}
