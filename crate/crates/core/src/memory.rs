//! Per-class, per-position store of learned location codes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LocationActivity;
use crate::sdr::Sdr;

/// A learned location: exactly one active cell per module.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocationCode(pub Vec<u32>);

impl LocationCode {
    pub fn from_activity(a: &LocationActivity) -> Result<Self> {
        a.modules
            .iter()
            .map(|m| match m.active() {
                [c] => Ok(*c),
                other => Err(Error::InvalidConfig(format!(
                    "location code needs one cell per module, found {}",
                    other.len()
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(LocationCode)
    }

    pub fn to_activity(&self, cells_per_module: usize) -> LocationActivity {
        LocationActivity {
            modules: self
                .0
                .iter()
                .map(|&c| Sdr::from_sorted_unchecked(cells_per_module, vec![c]))
                .collect(),
        }
    }

    pub fn flatten(&self, cells_per_module: usize) -> Sdr {
        let cells = self.0.iter().enumerate().map(|(m, &c)| (m * cells_per_module) as u32 + c).collect();
        Sdr::from_sorted_unchecked(self.0.len() * cells_per_module, cells)
    }
}

/// A learned example as stored in memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredCode {
    pub object_id: usize,
    pub code: LocationCode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassMemory {
    num_classes: usize,
    num_positions: usize,
    num_modules: usize,
    /// `[class][position]` -> every stored code.
    codes: Vec<Vec<Vec<StoredCode>>>,
    /// `[class][position][module]` -> sorted union of stored cells.
    unions: Vec<Vec<Vec<Vec<u32>>>>,
}

impl ClassMemory {
    pub fn new(num_classes: usize, num_positions: usize, num_modules: usize) -> Self {
        Self {
            num_classes,
            num_positions,
            num_modules,
            codes: vec![vec![Vec::new(); num_positions]; num_classes],
            unions: vec![vec![vec![Vec::new(); num_modules]; num_positions]; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_positions(&self) -> usize {
        self.num_positions
    }

    /// Stores one learned example: `codes[p]` is its location code at position `p`.
    pub fn store(&mut self, label: usize, object_id: usize, codes: &[LocationCode]) -> Result<()> {
        if label >= self.num_classes {
            return Err(Error::IndexOutOfRange { index: label, dimension: self.num_classes });
        }
        if codes.len() != self.num_positions {
            return Err(Error::DimensionMismatch { expected: self.num_positions, found: codes.len() });
        }
        for (pos, code) in codes.iter().enumerate() {
            if code.0.len() != self.num_modules {
                return Err(Error::DimensionMismatch { expected: self.num_modules, found: code.0.len() });
            }
            for (module, &cell) in code.0.iter().enumerate() {
                let u = &mut self.unions[label][pos][module];
                if let Err(i) = u.binary_search(&cell) {
                    u.insert(i, cell);
                }
            }
            self.codes[label][pos].push(StoredCode { object_id, code: code.clone() });
        }
        Ok(())
    }

    pub fn codes(&self, label: usize, position: usize) -> &[StoredCode] {
        &self.codes[label][position]
    }

    pub fn examples_in_class(&self, label: usize) -> usize {
        self.codes[label].first().map_or(0, Vec::len)
    }

    /// Per-module union of class `label`'s codes at `position`.
    pub fn union_cells(&self, label: usize, position: usize, module: usize) -> &[u32] {
        &self.unions[label][position][module]
    }

    /// True iff every module's active cells lie within the class union of
    /// that module at `position`.
    pub fn contains(&self, label: usize, position: usize, location: &LocationActivity) -> bool {
        location
            .modules
            .iter()
            .zip(&self.unions[label][position])
            .all(|(active, union)| crate::sdr::sorted_is_subset(active.active(), union))
    }
}
