//! The input layer: mini-columns of cells whose dendritic segments sample
//! location-layer activity.

use serde::{Deserialize, Serialize};

use crate::dendrite::SegmentStore;
use crate::error::{Error, Result};
use crate::sdr::Sdr;

pub const DEFAULT_COLUMNS: usize = 128;
pub const DEFAULT_CELLS_PER_COLUMN: usize = 32;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensoryLayer {
    pub num_columns: usize,
    pub cells_per_column: usize,
    /// Segments on sensory cells, sampling the flattened location layer.
    pub segments: SegmentStore,
}

impl SensoryLayer {
    pub fn new(num_columns: usize, cells_per_column: usize, location_cells: usize) -> Self {
        Self {
            num_columns,
            cells_per_column,
            segments: SegmentStore::new(num_columns * cells_per_column, location_cells),
        }
    }

    pub fn num_cells(&self) -> usize {
        self.num_columns * self.cells_per_column
    }

    pub fn column_of(&self, cell: u32) -> u32 {
        cell / self.cells_per_column as u32
    }

    /// Cells with a segment whose overlap with the flattened location
    /// activity reaches `theta_in`.
    pub fn compute_predictive(&self, location_active: &Sdr, theta_in: u32) -> Result<Sdr> {
        self.segments.active_cells(location_active, theta_in)
    }

    pub fn activate(&self, predictive: &Sdr, input_columns: &Sdr) -> Result<Sdr> {
        activate(predictive, input_columns, self.cells_per_column)
    }

    /// Groups cells by column: `(column, cells)` for every column with at
    /// least one cell in `cells`.
    pub fn cells_by_column(&self, cells: &Sdr) -> Vec<(u32, Vec<u32>)> {
        let mut out: Vec<(u32, Vec<u32>)> = Vec::new();
        for &c in cells.active() {
            let col = self.column_of(c);
            match out.last_mut() {
                Some((last, v)) if *last == col => v.push(c),
                _ => out.push((col, vec![c])),
            }
        }
        out
    }

    pub fn columns_of(&self, cells: &Sdr) -> Sdr {
        let cols = cells.active().iter().map(|&c| self.column_of(c));
        Sdr::from_indices(self.num_columns, cols).expect("column index within layer")
    }
}

/// Resolves sensory activity for one input.
///
/// Each column receiving input activates its predictive cells, or every cell
/// when none is predictive. Columns without input stay silent.
pub fn activate(predictive: &Sdr, input_columns: &Sdr, cells_per_column: usize) -> Result<Sdr> {
    let num_cells = predictive.dimension();
    if input_columns.dimension() * cells_per_column != num_cells {
        return Err(Error::DimensionMismatch {
            expected: num_cells / cells_per_column.max(1),
            found: input_columns.dimension(),
        });
    }
    let cpc = cells_per_column as u32;
    let pred = predictive.active();
    let mut out = Vec::new();
    let mut p = 0;
    for &col in input_columns.active() {
        let (lo, hi) = (col * cpc, (col + 1) * cpc);
        while p < pred.len() && pred[p] < lo {
            p += 1;
        }
        let start = out.len();
        while p < pred.len() && pred[p] < hi {
            out.push(pred[p]);
            p += 1;
        }
        if out.len() == start {
            out.extend(lo..hi);
        }
    }
    Ok(Sdr::from_sorted_unchecked(num_cells, out))
}
