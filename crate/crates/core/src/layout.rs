//! Geometry of the element array: eight elements on a 2 x 4 grid, numbered row-major.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const ELEMENT_COUNT: usize = 8;
pub const ROWS: usize = 2;
pub const COLS: usize = 4;

/// Index of one element, `0..8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ElementId(u8);

impl ElementId {
    pub fn new(id: u8) -> Option<Self> {
        ((id as usize) < ELEMENT_COUNT).then_some(ElementId(id))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = ElementId> {
        (0..ELEMENT_COUNT as u8).map(ElementId)
    }

    pub fn row(self) -> usize {
        self.index() / COLS
    }

    pub fn col(self) -> usize {
        self.index() % COLS
    }
}

impl TryFrom<u8> for ElementId {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        ElementId::new(v).ok_or_else(|| format!("element id {v} out of range 0..{ELEMENT_COUNT}"))
    }
}

impl From<ElementId> for u8 {
    fn from(e: ElementId) -> u8 {
        e.0
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Elements of one grid row, in column order.
pub fn row_members(row: usize) -> Vec<ElementId> {
    ElementId::all().filter(|e| e.row() == row).collect()
}

/// Elements of one grid column, in row order.
pub fn col_members(col: usize) -> Vec<ElementId> {
    ElementId::all().filter(|e| e.col() == col).collect()
}
