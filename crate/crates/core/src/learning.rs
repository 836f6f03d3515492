//! Single-pass learning of objects.
//!
//! Each visited patch binds the current location code (one exact cell per
//! module) to a sparse sensory code (one random cell in every input column)
//! through reciprocal segments.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{random_init_location, LocationRepresentation, Movement};
use crate::memory::LocationCode;
use crate::network::Network;
use crate::sdr::Sdr;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearningEvent {
    pub position: usize,
    /// One sensory cell per input column.
    pub sensory_learn: Sdr,
    /// One location cell per module, flattened.
    pub location_code: Sdr,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AssociationStats {
    pub location_segments_grown: usize,
    pub sensory_segments_grown: usize,
}

#[derive(Debug, Clone)]
pub struct LearnedObject {
    pub object_id: usize,
    /// Location code at every grid position, indexed by position.
    pub codes: Vec<LocationCode>,
    pub events: Vec<LearningEvent>,
    pub stats: AssociationStats,
}

/// Picks one uniformly random cell in each active input column.
pub fn select_learning_cells<R: Rng + ?Sized>(
    input_columns: &Sdr,
    cells_per_column: usize,
    rng: &mut R,
) -> Sdr {
    let cpc = cells_per_column as u32;
    let cells = input_columns.active().iter().map(|&c| c * cpc + rng.gen_range(0..cpc)).collect();
    Sdr::from_sorted_unchecked(input_columns.dimension() * cells_per_column, cells)
}

/// Grows reciprocal segments between the event's sensory and location cells.
pub fn learn_association(net: &mut Network, event: &LearningEvent) -> Result<AssociationStats> {
    let mut stats = AssociationStats::default();
    for &cell in event.location_code.active() {
        if net.location_segments.grow(cell, event.sensory_learn.clone())?.created {
            stats.location_segments_grown += 1;
        }
    }
    for &cell in event.sensory_learn.active() {
        if net.sensory.segments.grow(cell, event.location_code.clone())?.created {
            stats.sensory_segments_grown += 1;
        }
    }
    Ok(stats)
}

pub fn validate_order(order: &[usize], num_positions: usize) -> Result<()> {
    let mut seen = vec![false; num_positions];
    for &p in order {
        if p >= num_positions {
            return Err(Error::InvalidOrder(format!("position {p} out of range")));
        }
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidOrder(format!("position {p} repeated")));
        }
    }
    Ok(())
}

/// Learns one object from a fresh random location space anchored at the
/// first visited position.
pub fn learn_object<R: Rng + ?Sized>(
    net: &mut Network,
    features: &[Sdr],
    order: &[usize],
    rng: &mut R,
) -> Result<LearnedObject> {
    let start = random_init_location(&net.modules, rng);
    let first = *order.first().ok_or_else(|| Error::InvalidOrder("empty order".into()))?;
    learn_object_anchored(net, features, order, start, first, rng)
}

/// Learns one object whose location layer reads `anchor` at `anchor_position`.
pub fn learn_object_anchored<R: Rng + ?Sized>(
    net: &mut Network,
    features: &[Sdr],
    order: &[usize],
    anchor: LocationRepresentation,
    anchor_position: usize,
    rng: &mut R,
) -> Result<LearnedObject> {
    let n = net.config.num_positions();
    let side = net.config.grid_side;
    if order.len() != n {
        return Err(Error::InvalidOrder(format!("expected a permutation of {n} positions")));
    }
    validate_order(order, n)?;
    net.check_position(anchor_position)?;
    if features.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: features.len() });
    }
    for f in features {
        if f.dimension() != net.config.num_columns {
            return Err(Error::DimensionMismatch { expected: net.config.num_columns, found: f.dimension() });
        }
    }

    let mut location = anchor;
    let mut here = anchor_position;
    let mut codes = vec![None; n];
    let mut events = Vec::with_capacity(n);
    let mut stats = AssociationStats::default();
    for &pos in order {
        let m = Movement::between(side, here, pos)?;
        location = location.path_integrate(&net.modules, m)?;
        here = pos;
        let snapshot = location.snapshot(&net.modules)?;
        let code = LocationCode::from_activity(&snapshot)?;
        let event = LearningEvent {
            position: pos,
            sensory_learn: select_learning_cells(&features[pos], net.config.cells_per_column, rng),
            location_code: snapshot.flatten(),
        };
        let s = learn_association(net, &event)?;
        stats.location_segments_grown += s.location_segments_grown;
        stats.sensory_segments_grown += s.sensory_segments_grown;
        codes[pos] = Some(code);
        events.push(event);
    }
    Ok(LearnedObject {
        object_id: net.next_object_id(),
        codes: codes.into_iter().map(|c| c.expect("order covers every position")).collect(),
        events,
        stats,
    })
}

impl Network {
    /// Learns a labelled example and records its codes in class memory.
    pub fn train_example<R: Rng + ?Sized>(
        &mut self,
        features: &[Sdr],
        label: usize,
        order: &[usize],
        rng: &mut R,
    ) -> Result<LearnedObject> {
        if label >= self.config.num_classes {
            return Err(Error::IndexOutOfRange { index: label, dimension: self.config.num_classes });
        }
        let learned = learn_object(self, features, order, rng)?;
        self.memory.store(label, learned.object_id, &learned.codes)?;
        Ok(learned)
    }
}
