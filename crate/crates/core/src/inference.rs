//! Sensorimotor inference and union-subset classification.
//!
//! Each sensation runs four stages: path-integrate the location layer by the
//! sensor movement, predict sensory cells from location activity, resolve
//! sensory activity against the sensed feature, and recall location cells
//! from the sensory activity. The resulting location activity is then tested
//! against the stored location codes of every class at the sensor position.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{activate_from_sensory, LocationActivity, Movement};
use crate::memory::ClassMemory;
use crate::network::Network;
use crate::sdr::Sdr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Correct,
    WrongClass,
    NoConvergence,
    Ambiguous,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Correct => "correct",
            Status::WrongClass => "wrong_class",
            Status::NoConvergence => "no_convergence",
            Status::Ambiguous => "ambiguous",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// The location activity lies within exactly one class's union.
    Unique(usize),
    /// No class contains the activity; keep sensing.
    Undecided,
    Multiple(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    /// `p(y)` for every class.
    pub probabilities: Vec<u8>,
    pub verdict: Verdict,
}

pub fn classify(location: &LocationActivity, memory: &ClassMemory, position: usize) -> Classification {
    let n = memory.num_classes();
    if location.is_empty() || position >= memory.num_positions() {
        return Classification { probabilities: vec![0; n], verdict: Verdict::Undecided };
    }
    let within: Vec<usize> = (0..n)
        .filter(|&y| memory.examples_in_class(y) > 0 && memory.contains(y, position, location))
        .collect();
    let mut probabilities = vec![0u8; n];
    let verdict = match within.as_slice() {
        [] => Verdict::Undecided,
        [y] => {
            probabilities[*y] = 1;
            Verdict::Unique(*y)
        }
        _ => Verdict::Multiple(within),
    };
    Classification { probabilities, verdict }
}

/// Per-sensation record of what the network did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepReport {
    pub position: usize,
    pub predictive: Sdr,
    pub sensory_active: Sdr,
    /// Input columns that burst for lack of prediction.
    pub bursting_columns: usize,
    pub classification: Classification,
}

/// Mutable state of one inference run. The trained network is only read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferenceSession {
    location: LocationActivity,
    position: Option<usize>,
    sensations: usize,
    sensory_active: Sdr,
}

impl InferenceSession {
    pub fn new(net: &Network) -> Self {
        Self {
            location: LocationActivity::empty(&net.modules),
            position: None,
            sensations: 0,
            sensory_active: Sdr::empty(net.config.sensory_cells()),
        }
    }

    pub fn location(&self) -> &LocationActivity {
        &self.location
    }

    pub fn position(&self) -> Option<usize> {
        self.position
    }

    pub fn sensations(&self) -> usize {
        self.sensations
    }

    pub fn sensory_active(&self) -> &Sdr {
        &self.sensory_active
    }
}

/// Prediction of the feature expected at some grid position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeaturePrediction {
    pub position: usize,
    pub columns: Sdr,
    pub cells_by_column: Vec<(u32, Vec<u32>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferenceResult {
    pub status: Status,
    pub predicted_class: Option<usize>,
    pub sensations_used: usize,
    /// Position and location activity at the final sensation.
    pub final_position: Option<usize>,
    pub final_location: LocationActivity,
}

impl Network {
    /// Runs one sensation: `movement` is the sensor displacement since the
    /// previous sensation and is ignored on the first one.
    pub fn infer_step(
        &self,
        session: &mut InferenceSession,
        movement: Movement,
        feature: &Sdr,
        position: usize,
    ) -> Result<StepReport> {
        self.check_position(position)?;
        if feature.dimension() != self.config.num_columns {
            return Err(Error::DimensionMismatch {
                expected: self.config.num_columns,
                found: feature.dimension(),
            });
        }
        // move
        let moved = if session.sensations == 0 {
            LocationActivity::empty(&self.modules)
        } else {
            session.location.path_integrate(&self.modules, movement)
        };
        // predict
        let predictive = self.sensory.compute_predictive(&moved.flatten(), self.config.theta_in)?;
        // sense
        let sensory_active = self.sensory.activate(&predictive, feature)?;
        let predicted_columns = self.sensory.columns_of(&predictive);
        let bursting_columns = feature.cardinality() - feature.overlap(&predicted_columns)?;
        // recall location
        let sensed = activate_from_sensory(
            &self.location_segments,
            &sensory_active,
            self.config.theta_loc,
            &moved,
        )?;
        let classification = classify(&sensed, &self.memory, position);

        session.location = sensed;
        session.position = Some(position);
        session.sensations += 1;
        session.sensory_active = sensory_active.clone();
        Ok(StepReport { position, predictive, sensory_active, bursting_columns, classification })
    }

    /// Senses `feature` at grid `position`, deriving the movement from the
    /// session's previous position.
    pub fn sense(
        &self,
        session: &mut InferenceSession,
        feature: &Sdr,
        position: usize,
    ) -> Result<StepReport> {
        self.check_position(position)?;
        let movement = match session.position {
            Some(prev) => Movement::between(self.config.grid_side, prev, position)?,
            None => Movement::ZERO,
        };
        self.infer_step(session, movement, feature, position)
    }

    /// Senses `features[order[i]]` in turn until a classification fires or
    /// `max_sensations` have been used.
    pub fn run_inference(
        &self,
        features: &[Sdr],
        label: usize,
        order: &[usize],
        max_sensations: usize,
    ) -> Result<InferenceResult> {
        self.run_inference_traced(features, label, order, max_sensations, |_, _| Ok(()))
    }

    /// As [`run_inference`](Self::run_inference), calling `observe` before
    /// every sensation with the session state and the upcoming position.
    pub fn run_inference_traced<F>(
        &self,
        features: &[Sdr],
        label: usize,
        order: &[usize],
        max_sensations: usize,
        mut observe: F,
    ) -> Result<InferenceResult>
    where
        F: FnMut(&InferenceSession, usize) -> Result<()>,
    {
        crate::learning::validate_order(order, self.config.num_positions())?;
        if features.len() != self.config.num_positions() {
            return Err(Error::DimensionMismatch {
                expected: self.config.num_positions(),
                found: features.len(),
            });
        }
        let mut session = InferenceSession::new(self);
        let limit = max_sensations.min(order.len());
        for &pos in &order[..limit] {
            observe(&session, pos)?;
            let report = self.sense(&mut session, &features[pos], pos)?;
            let (status, predicted_class) = match report.classification.verdict {
                Verdict::Undecided => continue,
                Verdict::Unique(y) if y == label => (Status::Correct, Some(y)),
                Verdict::Unique(y) => (Status::WrongClass, Some(y)),
                Verdict::Multiple(_) => (Status::Ambiguous, None),
            };
            return Ok(InferenceResult {
                status,
                predicted_class,
                sensations_used: session.sensations,
                final_position: session.position,
                final_location: session.location,
            });
        }
        Ok(InferenceResult {
            status: Status::NoConvergence,
            predicted_class: None,
            sensations_used: session.sensations,
            final_position: session.position,
            final_location: session.location,
        })
    }

    /// Predicts the feature at `target` by path-integrating a copy of the
    /// session's location activity there. The session is not modified.
    pub fn predict_feature_at(&self, session: &InferenceSession, target: usize) -> Result<FeaturePrediction> {
        self.check_position(target)?;
        let here = match session.position {
            Some(p) if !session.location.is_empty() => p,
            _ => return Err(Error::EmptyLocation),
        };
        let m = Movement::between(self.config.grid_side, here, target)?;
        let moved = session.location.path_integrate(&self.modules, m);
        let predictive = self.sensory.compute_predictive(&moved.flatten(), self.config.theta_in)?;
        Ok(FeaturePrediction {
            position: target,
            columns: self.sensory.columns_of(&predictive),
            cells_by_column: self.sensory.cells_by_column(&predictive),
        })
    }
}
