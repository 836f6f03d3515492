//! The two-layer network: grid-cell location layer, sensory layer, the
//! reciprocal segments between them, and the per-class location memory.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dendrite::SegmentStore;
use crate::error::{Error, Result};
use crate::grid::{GridModuleConfig, DEFAULT_LATTICE_SIDE};
use crate::memory::ClassMemory;
use crate::sensory::{SensoryLayer, DEFAULT_CELLS_PER_COLUMN, DEFAULT_COLUMNS};

pub const DEFAULT_MODULES: usize = 40;
pub const DEFAULT_GRID_SIDE: usize = 5;
pub const DEFAULT_FEATURE_ACTIVE: usize = 19;
pub const DEFAULT_THETA_IN: u32 = 20;
pub const DEFAULT_THETA_LOC: u32 = 13;

/// Location-recall threshold tuned per training-set size (examples per
/// class 1, 5, 10, 20). Other sizes use the nearest tabulated entry.
pub fn tuned_theta_loc(examples_per_class: usize) -> u32 {
    const TABLE: [(usize, u32); 4] = [(1, 11), (5, 13), (10, 13), (20, 15)];
    TABLE
        .iter()
        .min_by_key(|(n, _)| n.abs_diff(examples_per_class))
        .map(|&(_, t)| t)
        .unwrap_or(DEFAULT_THETA_LOC)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub num_modules: usize,
    pub lattice_side: usize,
    /// Module scales are drawn log-uniformly from this range (patch spacings).
    pub scale_range: (f64, f64),
    pub num_columns: usize,
    pub cells_per_column: usize,
    /// Side of the square patch grid an object is sampled on.
    pub grid_side: usize,
    pub num_classes: usize,
    pub theta_in: u32,
    pub theta_loc: u32,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            num_modules: DEFAULT_MODULES,
            lattice_side: DEFAULT_LATTICE_SIDE,
            scale_range: (1.0, 2.0),
            num_columns: DEFAULT_COLUMNS,
            cells_per_column: DEFAULT_CELLS_PER_COLUMN,
            grid_side: DEFAULT_GRID_SIDE,
            num_classes: 10,
            theta_in: DEFAULT_THETA_IN,
            theta_loc: DEFAULT_THETA_LOC,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_modules", self.num_modules),
            ("lattice_side", self.lattice_side),
            ("num_columns", self.num_columns),
            ("cells_per_column", self.cells_per_column),
            ("grid_side", self.grid_side),
            ("num_classes", self.num_classes),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.num_classes > 256 {
            return Err(Error::InvalidConfig("at most 256 classes are supported".into()));
        }
        Ok(())
    }

    pub fn cells_per_module(&self) -> usize {
        self.lattice_side * self.lattice_side
    }

    pub fn location_cells(&self) -> usize {
        self.num_modules * self.cells_per_module()
    }

    pub fn sensory_cells(&self) -> usize {
        self.num_columns * self.cells_per_column
    }

    pub fn num_positions(&self) -> usize {
        self.grid_side * self.grid_side
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    pub config: NetworkConfig,
    pub modules: Vec<GridModuleConfig>,
    /// Segments on location cells (flattened module-major), sampling sensory cells.
    pub location_segments: SegmentStore,
    pub sensory: SensoryLayer,
    pub memory: ClassMemory,
    objects_learned: usize,
}

impl Network {
    pub fn new<R: Rng + ?Sized>(config: NetworkConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let modules = GridModuleConfig::random_ensemble(
            config.num_modules,
            config.lattice_side,
            config.scale_range,
            rng,
        )?;
        Self::with_modules(config, modules)
    }

    pub fn with_modules(config: NetworkConfig, modules: Vec<GridModuleConfig>) -> Result<Self> {
        config.validate()?;
        if modules.len() != config.num_modules {
            return Err(Error::DimensionMismatch { expected: config.num_modules, found: modules.len() });
        }
        for m in &modules {
            m.validate()?;
            if m.lattice_side != config.lattice_side {
                return Err(Error::InvalidConfig("module lattice side differs from config".into()));
            }
        }
        Ok(Self {
            location_segments: SegmentStore::new(config.location_cells(), config.sensory_cells()),
            sensory: SensoryLayer::new(
                config.num_columns,
                config.cells_per_column,
                config.location_cells(),
            ),
            memory: ClassMemory::new(config.num_classes, config.num_positions(), config.num_modules),
            modules,
            config,
            objects_learned: 0,
        })
    }

    pub fn objects_learned(&self) -> usize {
        self.objects_learned
    }

    pub(crate) fn next_object_id(&mut self) -> usize {
        let id = self.objects_learned;
        self.objects_learned += 1;
        id
    }

    pub fn check_position(&self, position: usize) -> Result<()> {
        if position >= self.config.num_positions() {
            return Err(Error::InvalidPosition { position, side: self.config.grid_side });
        }
        Ok(())
    }

    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Self> {
        let r = BufReader::new(File::open(path)?);
        Ok(serde_json::from_reader(r)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuned_thresholds() {
        assert_eq!(tuned_theta_loc(1), 11);
        assert_eq!(tuned_theta_loc(5), 13);
        assert_eq!(tuned_theta_loc(10), 13);
        assert_eq!(tuned_theta_loc(20), 15);
        assert_eq!(tuned_theta_loc(100), 15);
    }

    #[test]
    fn default_dimensions() {
        let c = NetworkConfig::default();
        assert_eq!(c.location_cells(), 100_000);
        assert_eq!(c.sensory_cells(), 4096);
        assert_eq!(c.num_positions(), 25);
    }
}
