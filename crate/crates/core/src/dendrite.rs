//! Dendritic segments with binary, permanent synapses.
//!
//! A [`SegmentStore`] owns every segment grown on one postsynaptic
//! population and keeps an inverted index from presynaptic cells to the
//! segments that sample them, so thresholded matching only touches segments
//! that share at least one synapse with the current activity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sdr::Sdr;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DendriticSegment {
    pub cell: u32,
    pub synapses: Sdr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "StoreData", into = "StoreData")]
pub struct SegmentStore {
    num_cells: usize,
    presynaptic_dim: usize,
    segments: Vec<DendriticSegment>,
    by_cell: Vec<Vec<u32>>,
    by_presynaptic: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct StoreData {
    num_cells: usize,
    presynaptic_dim: usize,
    segments: Vec<DendriticSegment>,
}

impl From<SegmentStore> for StoreData {
    fn from(s: SegmentStore) -> Self {
        Self { num_cells: s.num_cells, presynaptic_dim: s.presynaptic_dim, segments: s.segments }
    }
}

impl From<StoreData> for SegmentStore {
    fn from(data: StoreData) -> Self {
        let mut store = SegmentStore::new(data.num_cells, data.presynaptic_dim);
        for seg in data.segments {
            store.push(seg);
        }
        store
    }
}

/// Outcome of growing a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grown {
    pub segment: u32,
    pub created: bool,
}

impl SegmentStore {
    pub fn new(num_cells: usize, presynaptic_dim: usize) -> Self {
        Self {
            num_cells,
            presynaptic_dim,
            segments: Vec::new(),
            by_cell: vec![Vec::new(); num_cells],
            by_presynaptic: vec![Vec::new(); presynaptic_dim],
        }
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn presynaptic_dim(&self) -> usize {
        self.presynaptic_dim
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn segments(&self) -> &[DendriticSegment] {
        &self.segments
    }

    pub fn segment(&self, id: u32) -> &DendriticSegment {
        &self.segments[id as usize]
    }

    pub fn segments_of(&self, cell: u32) -> impl Iterator<Item = &DendriticSegment> + '_ {
        self.by_cell[cell as usize].iter().map(move |&s| &self.segments[s as usize])
    }

    fn push(&mut self, seg: DendriticSegment) -> u32 {
        let id = self.segments.len() as u32;
        for &p in seg.synapses.active() {
            self.by_presynaptic[p as usize].push(id);
        }
        self.by_cell[seg.cell as usize].push(id);
        self.segments.push(seg);
        id
    }

    fn check(&self, cell: u32, synapses: &Sdr) -> Result<()> {
        if cell as usize >= self.num_cells {
            return Err(Error::IndexOutOfRange { index: cell as usize, dimension: self.num_cells });
        }
        if synapses.dimension() != self.presynaptic_dim {
            return Err(Error::DimensionMismatch {
                expected: self.presynaptic_dim,
                found: synapses.dimension(),
            });
        }
        Ok(())
    }

    /// Forms the association `synapses` on `cell`.
    ///
    /// If the cell already carries a segment with exactly these synapses, OR-ing
    /// into it is a no-op and that segment is returned; otherwise a fresh
    /// segment is grown.
    pub fn grow(&mut self, cell: u32, synapses: Sdr) -> Result<Grown> {
        self.check(cell, &synapses)?;
        if let Some(&existing) =
            self.by_cell[cell as usize].iter().find(|&&s| self.segments[s as usize].synapses == synapses)
        {
            return Ok(Grown { segment: existing, created: false });
        }
        let segment = self.push(DendriticSegment { cell, synapses });
        Ok(Grown { segment, created: true })
    }

    /// Bitwise OR of `synapses` into an existing segment. Synapses already
    /// present are left untouched.
    pub fn reinforce(&mut self, segment: u32, synapses: &Sdr) -> Result<()> {
        let seg = self
            .segments
            .get(segment as usize)
            .ok_or(Error::IndexOutOfRange { index: segment as usize, dimension: self.segments.len() })?;
        self.check(seg.cell, synapses)?;
        let before = seg.synapses.clone();
        let mut merged = before.clone();
        merged.union_with(synapses)?;
        for &p in merged.active() {
            if !before.contains(p) {
                self.by_presynaptic[p as usize].push(segment);
            }
        }
        self.segments[segment as usize].synapses = merged;
        Ok(())
    }

    /// Per-segment overlap with `activity`, for segments with nonzero overlap.
    pub fn overlaps(&self, activity: &Sdr) -> Result<Vec<(u32, u32)>> {
        if activity.dimension() != self.presynaptic_dim {
            return Err(Error::DimensionMismatch {
                expected: self.presynaptic_dim,
                found: activity.dimension(),
            });
        }
        let mut counts = vec![0u32; self.segments.len()];
        let mut touched = Vec::new();
        for &p in activity.active() {
            for &s in &self.by_presynaptic[p as usize] {
                if counts[s as usize] == 0 {
                    touched.push(s);
                }
                counts[s as usize] += 1;
            }
        }
        touched.sort_unstable();
        Ok(touched.into_iter().map(|s| (s, counts[s as usize])).collect())
    }

    /// Cells with at least one segment whose overlap with `activity` reaches
    /// `threshold`.
    pub fn active_cells(&self, activity: &Sdr, threshold: u32) -> Result<Sdr> {
        let cells: Vec<u32> = if threshold == 0 {
            if activity.dimension() != self.presynaptic_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.presynaptic_dim,
                    found: activity.dimension(),
                });
            }
            self.segments.iter().map(|s| s.cell).collect()
        } else {
            self.overlaps(activity)?
                .into_iter()
                .filter(|&(_, n)| n >= threshold)
                .map(|(s, _)| self.segments[s as usize].cell)
                .collect()
        };
        Sdr::from_indices(self.num_cells, cells)
    }
}
