//! Phase points of the rod hierarchy.
//!
//! A level-`n` state stacks `n + 1` body-frame triples: the moment `m`, the
//! force `n`, the magnetic field `B` and the hypermagnetic field `D`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RodError};
use crate::so3::Triple;

/// Member of the rod hierarchy, indexed by the number of fields beyond `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum HierarchyLevel {
    /// Euler rod, fields `(m)`.
    ForceFree = 0,
    /// Kirchhoff rod / heavy top, fields `(m, n)`.
    Kirchhoff = 1,
    /// Conducting rod in a uniform field, fields `(m, n, B)`.
    Magnetic = 2,
    /// Rod in a linearly varying field, fields `(m, n, B, D)`.
    Hypermagnetic = 3,
}

impl HierarchyLevel {
    pub const ALL: [HierarchyLevel; 4] = [
        HierarchyLevel::ForceFree,
        HierarchyLevel::Kirchhoff,
        HierarchyLevel::Magnetic,
        HierarchyLevel::Hypermagnetic,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Number of stacked triples.
    pub fn field_count(self) -> usize {
        self.index() + 1
    }

    /// Phase-space dimension `3(n + 1)`.
    pub fn dim(self) -> usize {
        3 * self.field_count()
    }
}

impl TryFrom<u8> for HierarchyLevel {
    type Error = String;

    fn try_from(value: u8) -> std::result::Result<Self, Self::Error> {
        Self::from_index(value as usize).ok_or_else(|| format!("hierarchy level {value} not in 0..=3"))
    }
}

impl From<HierarchyLevel> for u8 {
    fn from(level: HierarchyLevel) -> u8 {
        level as u8
    }
}

impl fmt::Display for HierarchyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Stacked body-frame field triples `(m, n, B, D)` truncated at `level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldState {
    level: HierarchyLevel,
    fields: [Triple; 4],
}

impl FieldState {
    /// All-zero state at `level`.
    pub fn zeros(level: HierarchyLevel) -> Self {
        FieldState {
            level,
            fields: [Triple::zeros(); 4],
        }
    }

    /// Builds a state from its triples, `fields.len()` fixing the level.
    pub fn from_fields(fields: &[Triple]) -> Result<Self> {
        let level = match fields.len() {
            1..=4 => HierarchyLevel::from_index(fields.len() - 1).unwrap(),
            n => return Err(RodError::DimensionMismatch { expected: 4, found: n }),
        };
        let mut state = FieldState::zeros(level);
        state.fields[..fields.len()].copy_from_slice(fields);
        state.check_finite()?;
        Ok(state)
    }

    pub fn force_free(m: Triple) -> Self {
        Self::from_fields(&[m]).expect("finite level-0 state")
    }

    pub fn kirchhoff(m: Triple, n: Triple) -> Self {
        Self::from_fields(&[m, n]).expect("finite level-1 state")
    }

    pub fn magnetic(m: Triple, n: Triple, b: Triple) -> Self {
        Self::from_fields(&[m, n, b]).expect("finite level-2 state")
    }

    pub fn hypermagnetic(m: Triple, n: Triple, b: Triple, d: Triple) -> Self {
        Self::from_fields(&[m, n, b, d]).expect("finite level-3 state")
    }

    /// Reads `3(level + 1)` packed components `(m1, m2, m3, n1, ...)`.
    pub fn from_slice(level: HierarchyLevel, data: &[f64]) -> Result<Self> {
        if data.len() != level.dim() {
            return Err(RodError::DimensionMismatch {
                expected: level.dim(),
                found: data.len(),
            });
        }
        let mut state = FieldState::zeros(level);
        for (field, chunk) in state.fields.iter_mut().zip(data.chunks_exact(3)) {
            *field = Triple::new(chunk[0], chunk[1], chunk[2]);
        }
        state.check_finite()?;
        Ok(state)
    }

    fn check_finite(&self) -> Result<()> {
        for (i, x) in self.as_vec().iter().enumerate() {
            if !x.is_finite() {
                return Err(RodError::NonFinite { s: f64::NAN, component: i });
            }
        }
        Ok(())
    }

    pub fn level(&self) -> HierarchyLevel {
        self.level
    }

    /// Active triples, `m` first.
    pub fn fields(&self) -> &[Triple] {
        &self.fields[..self.level.field_count()]
    }

    pub fn fields_mut(&mut self) -> &mut [Triple] {
        let count = self.level.field_count();
        &mut self.fields[..count]
    }

    /// Field `i` (0 = m, 1 = n, 2 = B, 3 = D); zero above the active level.
    pub fn field(&self, i: usize) -> Triple {
        if i < self.level.field_count() {
            self.fields[i]
        } else {
            Triple::zeros()
        }
    }

    pub fn m(&self) -> Triple {
        self.field(0)
    }

    pub fn n(&self) -> Triple {
        self.field(1)
    }

    pub fn b(&self) -> Triple {
        self.field(2)
    }

    pub fn d(&self) -> Triple {
        self.field(3)
    }

    pub fn as_vec(&self) -> Vec<f64> {
        self.fields().iter().flat_map(|f| f.iter().copied()).collect()
    }

    pub fn write_into(&self, out: &mut [f64]) {
        for (chunk, field) in out.chunks_exact_mut(3).zip(self.fields()) {
            chunk.copy_from_slice(field.as_slice());
        }
    }

    /// Same fields viewed at another level: truncates, or pads with zero fields.
    pub fn with_level(&self, level: HierarchyLevel) -> Self {
        let mut out = FieldState::zeros(level);
        for i in 0..level.field_count() {
            out.fields[i] = self.field(i);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.fields().iter().all(|f| f.iter().all(|x| x.is_finite()))
    }
}
